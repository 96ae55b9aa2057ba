//! Effective Fisher information and the orientation/position error bounds derived from it.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::channel::{Regime, SignalModel};
use crate::codes::FastVaryingCode;
use crate::fim::{assemble_fim, DerivativeProvider, FimError, FimMatrix, ParamLabel, ParamVector, Scenario};

/// Relative eigenvalue threshold for positive definiteness.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Smallest EFIM eigenvalue, relative to the pre-elimination block, that is
/// distinguishable from cancellation roundoff (about 450 ε).
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Equilibrated nuisance blocks below this relative eigenvalue are treated as singular.
const NUISANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Fim(#[from] FimError),
    #[error("nuisance block singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularNuisance { min_eigenvalue: f64 },
    #[error("parameters not identifiable (smallest EFIM eigenvalue {lambda_min:e}, threshold {threshold:e})")]
    NotIdentifiable { lambda_min: f64, threshold: f64 },
    #[error("expected a {expected}x{expected} EFIM, got {actual}x{actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid label split: {0}")]
    Labels(String),
}

/// Effective FIM of the retained parameters after eliminating the nuisance ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Efim {
    matrix: DMatrix<f64>,
    retained: Vec<ParamLabel>,
    nuisance: Vec<ParamLabel>,
    /// largest eigenvalue of the retained block before elimination
    reference_scale: f64,
}

impl Efim {
    /// EFIM with no eliminated parameters; the reference scale is its own largest eigenvalue.
    pub fn from_matrix(retained: Vec<ParamLabel>, matrix: DMatrix<f64>) -> Result<Self, BoundsError> {
        if matrix.nrows() != retained.len() || matrix.ncols() != retained.len() {
            return Err(BoundsError::Dimension {
                expected: retained.len(),
                actual: matrix.nrows(),
            });
        }
        let reference_scale = extremes(&matrix).0;
        Ok(Self {
            matrix,
            retained,
            nuisance: Vec::new(),
            reference_scale,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn retained(&self) -> &[ParamLabel] {
        &self.retained
    }

    pub fn nuisance(&self) -> &[ParamLabel] {
        &self.nuisance
    }

    pub fn dim(&self) -> usize {
        self.retained.len()
    }

    pub fn reference_scale(&self) -> f64 {
        self.reference_scale
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * factor,
            reference_scale: self.reference_scale * factor,
            ..self.clone()
        }
    }

    /// `‖Jᵉ‖₂ / ‖J_AA‖₂`; zero for a vanishing Schur complement.
    pub fn nullity_ratio(&self) -> f64 {
        let (max, min) = extremes(&self.matrix);
        let norm = max.abs().max(min.abs());
        if self.reference_scale > 0.0 {
            norm / self.reference_scale
        } else {
            norm
        }
    }

    pub fn symmetry_residual(&self) -> f64 {
        let scale = self.matrix.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `(λ_max, λ_min)` of the symmetrized matrix.
fn extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let ev = SymmetricEigen::new(symmetrized(m)).eigenvalues;
    (ev.max(), ev.min())
}

/// `J_AA − J_AB J_BB⁻¹ J_BA`, with `A = retained` and `B` every other label of `fim`.
///
/// The computation runs on the diagonally equilibrated matrix; the Schur
/// complement commutes with that scaling, and it keeps the solve well
/// conditioned when gains (~1e-6) and angles share one matrix.
pub fn schur_complement(fim: &FimMatrix, retained: &[ParamLabel]) -> Result<Efim, BoundsError> {
    let a_idx = fim.indices_of(retained)?;
    for (i, a) in a_idx.iter().enumerate() {
        if a_idx[..i].contains(a) {
            return Err(BoundsError::Labels(format!("{} retained twice", fim.labels()[*a])));
        }
    }
    let nuisance: Vec<ParamLabel> = fim
        .labels()
        .iter()
        .copied()
        .filter(|l| !retained.contains(l))
        .collect();
    let j = symmetrized(fim.matrix());
    let b_idx = fim.indices_of(&nuisance)?;
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, k| j[(r[i], c[k])]);
    let j_aa = sub(&a_idx, &a_idx);
    let reference_scale = extremes(&j_aa).0;
    if nuisance.is_empty() {
        return Ok(Efim {
            matrix: j_aa,
            retained: retained.to_vec(),
            nuisance,
            reference_scale,
        });
    }
    let j_bb = sub(&b_idx, &b_idx);
    let j_ab = sub(&a_idx, &b_idx);

    let scale = |m: &DMatrix<f64>| -> Vec<f64> {
        m.diagonal()
            .iter()
            .map(|&d| if d > 0.0 { d.sqrt() } else { 1.0 })
            .collect()
    };
    let da = scale(&j_aa);
    let db = scale(&j_bb);
    let s_aa = DMatrix::from_fn(da.len(), da.len(), |i, k| j_aa[(i, k)] / (da[i] * da[k]));
    let s_bb = DMatrix::from_fn(db.len(), db.len(), |i, k| j_bb[(i, k)] / (db[i] * db[k]));
    let s_ab = DMatrix::from_fn(da.len(), db.len(), |i, k| j_ab[(i, k)] / (da[i] * db[k]));

    let (bb_max, bb_min) = extremes(&s_bb);
    if !(bb_min > NUISANCE_TOLERANCE * bb_max) {
        return Err(BoundsError::SingularNuisance {
            min_eigenvalue: extremes(&j_bb).1,
        });
    }
    let chol = s_bb.clone().cholesky().ok_or(BoundsError::SingularNuisance {
        min_eigenvalue: extremes(&j_bb).1,
    })?;
    let x = chol.solve(&s_ab.transpose());
    let s_e = symmetrized(&(s_aa - &s_ab * x));
    let matrix = DMatrix::from_fn(da.len(), da.len(), |i, k| s_e[(i, k)] * da[i] * da[k]);
    Ok(Efim {
        matrix,
        retained: retained.to_vec(),
        nuisance,
        reference_scale,
    })
}

/// `(λ_max, λ_min)` by symmetric eigen-decomposition of `(J + Jᵀ)/2`.
pub fn eigen_extremes(efim: &Efim) -> (f64, f64) {
    extremes(&efim.matrix)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub identifiable: bool,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub threshold: f64,
}

/// Positive definiteness test.
///
/// Passes when `λ_min > tol · λ_max` of the EFIM itself and also
/// `λ_min > ROUNDOFF_FLOOR · λ_ref`, where `λ_ref` is the largest eigenvalue
/// of the retained block before elimination. A Schur complement that is zero
/// in exact arithmetic comes out as roundoff of size `ε · λ_ref`; against its
/// own (equally tiny) `λ_max` alone such noise would pass the first test at random.
pub fn identifiability_verdict(efim: &Efim, tol: f64) -> Verdict {
    let (lambda_max, lambda_min) = eigen_extremes(efim);
    let threshold = (tol * lambda_max).max(ROUNDOFF_FLOOR * efim.reference_scale);
    Verdict {
        identifiable: lambda_max > 0.0 && lambda_min > threshold,
        lambda_max,
        lambda_min,
        threshold,
    }
}

/// Root-trace bound with the underlying trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    /// `Tr{[(Jᵉ)⁻¹]_block}` in rad² or m²
    pub trace: f64,
    /// `√trace` in rad or m
    pub root: f64,
}

impl ErrorBound {
    fn from_trace(trace: f64) -> Self {
        Self {
            trace,
            root: trace.sqrt(),
        }
    }
}

fn checked_inverse(efim: &Efim, expected: usize) -> Result<DMatrix<f64>, BoundsError> {
    if efim.dim() != expected {
        return Err(BoundsError::Dimension {
            expected,
            actual: efim.dim(),
        });
    }
    let verdict = identifiability_verdict(efim, DEFAULT_TOLERANCE);
    if !verdict.identifiable {
        return Err(BoundsError::NotIdentifiable {
            lambda_min: verdict.lambda_min,
            threshold: verdict.threshold,
        });
    }
    let eig = SymmetricEigen::new(symmetrized(&efim.matrix));
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

fn block_trace(m: &DMatrix<f64>, start: usize, len: usize) -> f64 {
    (start..start + len).map(|i| m[(i, i)]).sum()
}

/// OEB of one sensor from its 3×3 orientation EFIM.
pub fn oeb_scenario1(efim: &Efim) -> Result<ErrorBound, BoundsError> {
    let inv = checked_inverse(efim, 3)?;
    Ok(ErrorBound::from_trace(block_trace(&inv, 0, 3)))
}

/// `(PEB, OEB)` from a 6×6 EFIM ordered `[p(3), Φ(3)]`.
pub fn peb_oeb_scenario2(efim: &Efim) -> Result<(ErrorBound, ErrorBound), BoundsError> {
    let inv = checked_inverse(efim, 6)?;
    Ok((
        ErrorBound::from_trace(block_trace(&inv, 0, 3)),
        ErrorBound::from_trace(block_trace(&inv, 3, 3)),
    ))
}

/// Bound evaluation for one sensor path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBound {
    pub scenario: Scenario,
    pub sensor: usize,
    pub efim: Efim,
    pub verdict: Verdict,
    pub oeb: Option<ErrorBound>,
    pub peb: Option<ErrorBound>,
}

/// Full FIM of the scenario's parameter vector.
pub fn scenario_fim(
    model: &SignalModel,
    codes: &FastVaryingCode,
    provider: &dyn DerivativeProvider,
    scenario: Scenario,
) -> Result<FimMatrix, BoundsError> {
    let params = match scenario {
        Scenario::Rest => ParamVector::scenario1(model),
        Scenario::Exercise => ParamVector::scenario2(model),
    };
    let jacobian = provider.jacobian(model, codes, &params)?;
    Ok(assemble_fim(&jacobian, model.numerology().noise_variance())?)
}

/// EFIM of path `sensor` from a scenario FIM: the path's own block, with its
/// complex gain eliminated.
pub fn path_efim(fim: &FimMatrix, scenario: Scenario, sensor: usize) -> Result<Efim, BoundsError> {
    let path = fim.path_labels(Some(sensor));
    let retained: Vec<ParamLabel> = match scenario {
        Scenario::Rest => ParamLabel::orientations(sensor).to_vec(),
        Scenario::Exercise => ParamLabel::positions(sensor)
            .into_iter()
            .chain(ParamLabel::orientations(sensor))
            .collect(),
    };
    schur_complement(&fim.restrict(&path)?, &retained)
}

pub fn bound_from_efim(efim: Efim, scenario: Scenario, sensor: usize) -> Result<PathBound, BoundsError> {
    let verdict = identifiability_verdict(&efim, DEFAULT_TOLERANCE);
    let (oeb, peb) = match (scenario, verdict.identifiable) {
        (_, false) => (None, None),
        (Scenario::Rest, true) => (Some(oeb_scenario1(&efim)?), None),
        (Scenario::Exercise, true) => {
            let (peb, oeb) = peb_oeb_scenario2(&efim)?;
            (Some(oeb), Some(peb))
        }
    };
    Ok(PathBound {
        scenario,
        sensor,
        efim,
        verdict,
        oeb,
        peb,
    })
}

/// Every sensor's bound for one model.
pub fn evaluate_paths(
    model: &SignalModel,
    codes: &FastVaryingCode,
    provider: &dyn DerivativeProvider,
    scenario: Scenario,
) -> Result<Vec<PathBound>, BoundsError> {
    let fim = scenario_fim(model, codes, provider, scenario)?;
    (0..model.sensors().len())
        .map(|m| bound_from_efim(path_efim(&fim, scenario, m)?, scenario, m))
        .collect()
}

/// Configuration echo attached to every emitted bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigEcho {
    pub regime: Regime,
    pub antennas: usize,
    pub side_length_m: f64,
    pub carrier_hz: f64,
    pub symbols: usize,
    pub subcarriers: usize,
    pub seed: u64,
}

/// One output row: a sensor's bounds plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub echo: ConfigEcho,
    pub scenario: Scenario,
    pub sensor: usize,
    pub oeb: Option<ErrorBound>,
    pub peb: Option<ErrorBound>,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub nullity_ratio: f64,
    pub identifiable: bool,
    pub receiver_in_near_field: bool,
}

impl BoundReport {
    pub fn new(echo: ConfigEcho, bound: &PathBound, receiver_in_near_field: bool) -> Self {
        Self {
            echo,
            scenario: bound.scenario,
            sensor: bound.sensor,
            oeb: bound.oeb,
            peb: bound.peb,
            lambda_max: bound.verdict.lambda_max,
            lambda_min: bound.verdict.lambda_min,
            nullity_ratio: bound.efim.nullity_ratio(),
            identifiable: bound.verdict.identifiable,
            receiver_in_near_field,
        }
    }

    /// `λ_min` with non-identifiable points counted as zero information.
    pub fn effective_lambda_min(&self) -> f64 {
        if self.identifiable {
            self.lambda_min
        } else {
            0.0
        }
    }
}
