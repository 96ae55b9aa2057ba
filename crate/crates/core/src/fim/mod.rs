//! Fisher information of the noise-free signal.
//!
//! `[J]_{vg} = (2/σ²) Σ_{t,u,n} Re{ ∂μ*/∂v · ∂μ/∂g }`

mod analytic;
mod oracle;
mod params;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelError, Regime};

pub use analytic::{
    analytic_jacobian, derivatives_scenario1_far, derivatives_scenario1_near,
    derivatives_scenario2_far, derivatives_scenario2_near, AnalyticDerivatives,
    DerivativeProvider,
};
pub use oracle::{column_errors, fd_oracle, FdSteps};
pub use params::{ParamLabel, ParamVector, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FimError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("parameters were built for the {params:?}-field model but the model is {model:?}-field")]
    RegimeMismatch { params: Regime, model: Regime },
    #[error("operation expects {expected} parameters, got {actual}")]
    ScenarioMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("duplicate parameter label {0}")]
    DuplicateLabel(String),
    #[error("unknown parameter label {0}")]
    UnknownLabel(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("finite-difference step for {label} must be positive, got {step}")]
    Step { label: String, step: f64 },
}

/// Storage of `∂μ_{t,u}[n]/∂η_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum JacobianData {
    /// `∂μ_{t,u}[n]/∂η_k = response[(t·N_U + u, k)] · pilots[n]`
    Separable {
        response: DMatrix<Complex64>,
        pilots: Vec<Complex64>,
    },
    /// Rows indexed `(t·N_U + u)·N + n`.
    Dense(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    labels: Vec<ParamLabel>,
    symbols: usize,
    antennas: usize,
    subcarriers: usize,
    data: JacobianData,
}

impl Jacobian {
    pub fn new(
        labels: Vec<ParamLabel>,
        symbols: usize,
        antennas: usize,
        subcarriers: usize,
        data: JacobianData,
    ) -> Result<Self, FimError> {
        let (rows, cols, pilots) = match &data {
            JacobianData::Separable { response, pilots } => {
                (response.nrows() * subcarriers, response.ncols(), Some(pilots.len()))
            }
            JacobianData::Dense(m) => (m.nrows(), m.ncols(), None),
        };
        if cols != labels.len() {
            return Err(FimError::Dimension(format!(
                "{cols} columns for {} labels",
                labels.len()
            )));
        }
        if rows != symbols * antennas * subcarriers || pilots.is_some_and(|p| p != subcarriers) {
            return Err(FimError::Dimension(format!(
                "{rows} rows for T={symbols}, N_U={antennas}, N={subcarriers}"
            )));
        }
        let finite = match &data {
            JacobianData::Separable { response, pilots } => {
                response.iter().chain(pilots).all(|z| z.re.is_finite() && z.im.is_finite())
            }
            JacobianData::Dense(m) => m.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        };
        if !finite {
            return Err(FimError::Dimension("non-finite Jacobian entry".into()));
        }
        Ok(Self {
            labels,
            symbols,
            antennas,
            subcarriers,
            data,
        })
    }

    pub fn labels(&self) -> &[ParamLabel] {
        &self.labels
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn data(&self) -> &JacobianData {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.symbols * self.antennas * self.subcarriers
    }

    pub fn cols(&self) -> usize {
        self.labels.len()
    }

    pub fn entry(&self, t: usize, u: usize, n: usize, k: usize) -> Complex64 {
        match &self.data {
            JacobianData::Separable { response, pilots } => {
                response[(t * self.antennas + u, k)] * pilots[n]
            }
            JacobianData::Dense(m) => m[((t * self.antennas + u) * self.subcarriers + n, k)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.data {
            JacobianData::Dense(m) => m.clone(),
            JacobianData::Separable { response, pilots } => {
                let n = self.subcarriers;
                DMatrix::from_fn(self.rows(), self.cols(), |row, k| {
                    response[(row / n, k)] * pilots[row % n]
                })
            }
        }
    }

    pub fn column_norm(&self, k: usize) -> f64 {
        match &self.data {
            JacobianData::Separable { response, pilots } => {
                let energy: f64 = pilots.iter().map(|x| x.norm_sqr()).sum();
                (response.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>() * energy).sqrt()
            }
            JacobianData::Dense(m) => m.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        }
    }

    /// Multiplies column `k` by `factor` in place.
    pub fn scale_column(&mut self, k: usize, factor: Complex64) {
        match &mut self.data {
            JacobianData::Separable { response, .. } => {
                for z in response.column_mut(k).iter_mut() {
                    *z *= factor;
                }
            }
            JacobianData::Dense(m) => {
                for z in m.column_mut(k).iter_mut() {
                    *z *= factor;
                }
            }
        }
    }
}

/// Symmetric real Fisher information matrix with labeled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix {
    labels: Vec<ParamLabel>,
    matrix: DMatrix<f64>,
}

impl FimMatrix {
    pub fn new(labels: Vec<ParamLabel>, matrix: DMatrix<f64>) -> Result<Self, FimError> {
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return Err(FimError::Dimension(format!(
                "{}x{} matrix for {} labels",
                matrix.nrows(),
                matrix.ncols(),
                labels.len()
            )));
        }
        Ok(Self { labels, matrix })
    }

    pub fn labels(&self) -> &[ParamLabel] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &ParamLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn indices_of(&self, labels: &[ParamLabel]) -> Result<Vec<usize>, FimError> {
        labels
            .iter()
            .map(|l| self.index_of(l).ok_or_else(|| FimError::UnknownLabel(l.to_string())))
            .collect()
    }

    pub fn entry(&self, a: &ParamLabel, b: &ParamLabel) -> Result<f64, FimError> {
        let i = self.indices_of(&[*a, *b])?;
        Ok(self.matrix[(i[0], i[1])])
    }

    /// Principal sub-matrix over `labels`, in the given order.
    pub fn restrict(&self, labels: &[ParamLabel]) -> Result<FimMatrix, FimError> {
        let idx = self.indices_of(labels)?;
        let matrix = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])]);
        Ok(FimMatrix {
            labels: labels.to_vec(),
            matrix,
        })
    }

    /// Rows of `rows` against columns of `cols`.
    pub fn block(&self, rows: &[ParamLabel], cols: &[ParamLabel]) -> Result<DMatrix<f64>, FimError> {
        let r = self.indices_of(rows)?;
        let c = self.indices_of(cols)?;
        Ok(DMatrix::from_fn(r.len(), c.len(), |i, j| self.matrix[(r[i], c[j])]))
    }

    /// Labels of path `sensor` (`None` = line of sight) in matrix order.
    pub fn path_labels(&self, sensor: Option<usize>) -> Vec<ParamLabel> {
        self.labels.iter().copied().filter(|l| l.sensor() == sensor).collect()
    }

    pub fn scaled(&self, factor: f64) -> FimMatrix {
        FimMatrix {
            labels: self.labels.clone(),
            matrix: &self.matrix * factor,
        }
    }

    pub fn symmetrized(&self) -> DMatrix<f64> {
        (&self.matrix + self.matrix.transpose()) * 0.5
    }

    /// `max |J − Jᵀ| / max |J|`
    pub fn symmetry_residual(&self) -> f64 {
        let scale = self.matrix.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.symmetrized()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Largest entry coupling two different paths, relative to the largest diagonal entry.
    pub fn cross_path_ratio(&self) -> f64 {
        let diag = self.matrix.diagonal().amax();
        let mut cross = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if self.labels[i].sensor() != self.labels[j].sensor() {
                    cross = cross.max(self.matrix[(i, j)].abs());
                }
            }
        }
        if diag == 0.0 {
            cross
        } else {
            cross / diag
        }
    }
}

/// `(2/σ²) Σ Re{∇ᴴμ ∇μ}` over every symbol, antenna and subcarrier.
pub fn assemble_fim(jacobian: &Jacobian, noise_variance: f64) -> Result<FimMatrix, FimError> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(FimError::NoiseVariance(noise_variance));
    }
    let scale = 2.0 / noise_variance;
    let gram = match jacobian.data() {
        JacobianData::Separable { response, pilots } => {
            let energy: f64 = pilots.iter().map(|x| x.norm_sqr()).sum();
            (response.adjoint() * response).map(|z| z.re * energy * scale)
        }
        JacobianData::Dense(m) => (m.adjoint() * m).map(|z| z.re * scale),
    };
    // the Gram product is Hermitian up to roundoff; store the exactly symmetric part
    let gram = (&gram + gram.transpose()) * 0.5;
    FimMatrix::new(jacobian.labels().to_vec(), gram)
}
