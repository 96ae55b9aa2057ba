//! RIS reflection coefficients.
//!
//! The reflection of sensor `m` during symbol `t` factors into a scalar
//! fast-varying code `γ_t` and a static per-element phase profile `Γ`. The
//! codes are built so that the line-of-sight path and every sensor path are
//! orthogonal across the `T` symbols:
//!
//! ```text
//! Σ_t γ_t = 0,   Σ_t |γ_t|² = 1,   Σ_t conj(γ_t^[a]) γ_t^[b] = 0  (a ≠ b)
//! ```

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("insufficient symbols for separability: T = {symbols} but {sensors} sensors need T >= {}", sensors + 1)]
    InsufficientSymbols { sensors: usize, symbols: usize },
    #[error("phase profile needs at least one element")]
    EmptyProfile,
    #[error("code matrix has {got} entries, expected {symbols} x {sensors}")]
    Shape {
        symbols: usize,
        sensors: usize,
        got: usize,
    },
}

/// `T × M` matrix of per-symbol sensor coefficients, stored row-major by symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct FastVaryingCode {
    symbols: usize,
    sensors: usize,
    values: Vec<Complex64>,
}

impl FastVaryingCode {
    /// Builds a code from row-major `values[t * sensors + m]`.
    pub fn from_values(
        symbols: usize,
        sensors: usize,
        values: Vec<Complex64>,
    ) -> Result<Self, CodeError> {
        if values.len() != symbols * sensors {
            return Err(CodeError::Shape {
                symbols,
                sensors,
                got: values.len(),
            });
        }
        Ok(Self {
            symbols,
            sensors,
            values,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    /// `γ_t^[m]` with 0-based `t` and `m`.
    pub fn get(&self, t: usize, m: usize) -> Complex64 {
        self.values[t * self.sensors + m]
    }

    pub fn column(&self, m: usize) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.symbols).map(move |t| self.get(t, m))
    }
}

/// Distinct non-DC columns of the normalized `T`-point DFT matrix.
///
/// Sensor `m` (1-based) receives `γ_t = e^{-j2π m t / T} / √T`, `t = 0..T-1`.
pub fn dft_code_assignment(sensors: usize, symbols: usize) -> Result<FastVaryingCode, CodeError> {
    if symbols <= sensors {
        return Err(CodeError::InsufficientSymbols { sensors, symbols });
    }
    let scale = 1.0 / (symbols as f64).sqrt();
    let mut values = Vec::with_capacity(symbols * sensors);
    for t in 0..symbols {
        for m in 1..=sensors {
            // reduce m·t mod T first so the phase argument stays small
            let k = (m * t) % symbols;
            let phase = -TAU * k as f64 / symbols as f64;
            values.push(Complex64::from_polar(scale, phase));
        }
    }
    Ok(FastVaryingCode {
        symbols,
        sensors,
        values,
    })
}

/// Worst-case violations of the separability constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeResiduals {
    /// `max_m |Σ_t γ_t^[m]|`
    pub zero_mean: f64,
    /// `max_m |Σ_t |γ_t^[m]|² − 1|`
    pub unit_energy: f64,
    /// `max_{a≠b} |Σ_t conj(γ_t^[a]) γ_t^[b]|`
    pub cross_correlation: f64,
}

impl CodeResiduals {
    pub fn max(&self) -> f64 {
        self.zero_mean
            .max(self.unit_energy)
            .max(self.cross_correlation)
    }
}

pub fn verify_code_constraints(code: &FastVaryingCode) -> CodeResiduals {
    let mut zero_mean = 0.0f64;
    let mut unit_energy = 0.0f64;
    let mut cross_correlation = 0.0f64;
    for a in 0..code.sensors {
        let sum: Complex64 = code.column(a).sum();
        let energy: f64 = code.column(a).map(|g| g.norm_sqr()).sum();
        zero_mean = zero_mean.max(sum.norm());
        unit_energy = unit_energy.max((energy - 1.0).abs());
        for b in (a + 1)..code.sensors {
            let corr: Complex64 = code
                .column(a)
                .zip(code.column(b))
                .map(|(ga, gb)| ga.conj() * gb)
                .sum();
            cross_correlation = cross_correlation.max(corr.norm());
        }
    }
    CodeResiduals {
        zero_mean,
        unit_energy,
        cross_correlation,
    }
}

/// Static per-element phases `ϑ_r ∈ [0, 2π)` and the diagonal `Γ = diag(e^{jϑ_r})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowVaryingProfile {
    phases: Vec<f64>,
    coefficients: Vec<Complex64>,
}

impl SlowVaryingProfile {
    pub fn from_phases(phases: Vec<f64>) -> Result<Self, CodeError> {
        if phases.is_empty() {
            return Err(CodeError::EmptyProfile);
        }
        let phases: Vec<f64> = phases.into_iter().map(|p| p.rem_euclid(TAU)).collect();
        let coefficients = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        Ok(Self {
            phases,
            coefficients,
        })
    }

    /// All-zero phases (`Γ = I`).
    pub fn uniform(element_count: usize) -> Result<Self, CodeError> {
        Self::from_phases(vec![0.0; element_count])
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// i.i.d. uniform phases, deterministic in `seed`.
pub fn random_phase_profile(seed: u64, element_count: usize) -> Result<SlowVaryingProfile, CodeError> {
    if element_count == 0 {
        return Err(CodeError::EmptyProfile);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = (0..element_count).map(|_| rng.gen_range(0.0..TAU)).collect();
    SlowVaryingProfile::from_phases(phases)
}
