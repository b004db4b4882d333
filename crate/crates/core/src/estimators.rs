//! Estimators of the expected adjacency matrix and related moments.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::DegreeSequence;
use crate::solver::BetaEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimateSource {
    /// `d_i d_j / 2m`.
    #[cfg_attr(feature = "serde", serde(rename = "cl"))]
    ChungLu,
    /// Odds `f / (1 - f)` at the solved `β`.
    UniformSolver,
    Mcmc,
    /// Exact enumeration.
    Oracle,
}

/// Moment matrices, all symmetric with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub source: EstimateSource,
    /// Expected multiplicities.
    pub omega: DMatrix<f64>,
    /// Probabilities that a pair carries at least one edge.
    pub chi: Option<DMatrix<f64>>,
    /// Standard deviations of the multiplicities.
    pub sigma: Option<DMatrix<f64>>,
    /// Expected collapsed degrees.
    pub beta: Option<Vec<f64>>,
    /// Expected collapsed edge count.
    pub psi: Option<f64>,
    /// Error-bound diagnostic for `chi`.
    pub eps: Option<DMatrix<f64>>,
}

impl MomentEstimates {
    pub fn node_count(&self) -> usize {
        self.omega.nrows()
    }

    /// Only the expected multiplicities, as used for modularity nulls.
    pub fn from_omega(source: EstimateSource, omega: DMatrix<f64>) -> Self {
        Self { source, omega, chi: None, sigma: None, beta: None, psi: None, eps: None }
    }
}

pub fn cl_estimate(d: &DegreeSequence) -> Result<MomentEstimates> {
    let m = d.edge_count();
    if m == 0 {
        return Err(Error::InvalidConfig("degree sequence has no edges"));
    }
    let dv = d.to_f64();
    let two_m = 2.0 * m as f64;
    let n = d.len();
    let omega = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { dv[i] * dv[j] / two_m });
    Ok(MomentEstimates::from_omega(EstimateSource::ChungLu, omega))
}

fn kernel_matrix(beta: &[f64]) -> Result<DMatrix<f64>> {
    let n = beta.len();
    let two_psi: f64 = beta.iter().sum();
    let mut f = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = beta[i] * beta[j] / two_psi;
            if !(v < 1.0) {
                return Err(Error::KernelOutOfRange { i, j, value: v });
            }
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    Ok(f)
}

/// `χ̂_ij = β_i β_j / 2ψ`.
pub fn chi_estimate(beta: &[f64]) -> Result<DMatrix<f64>> {
    kernel_matrix(beta)
}

/// Ω̂, χ̂ and σ̂ from a solved `β`, with the error-bound diagnostic for χ̂
/// at unit regularity constants.
pub fn omega_i_estimate(est: &BetaEstimate) -> Result<MomentEstimates> {
    let chi = kernel_matrix(&est.beta)?;
    let omega = chi.map(|f| f / (1.0 - f));
    let sigma = omega.map(|w| libm::sqrt(w * (w + 1.0)));
    let eps = collapse_error_bound(&est.beta, &chi, RegularityConstants::default());
    Ok(MomentEstimates {
        source: EstimateSource::UniformSolver,
        omega,
        chi: Some(chi),
        sigma: Some(sigma),
        beta: Some(est.beta.clone()),
        psi: Some(est.psi),
        eps: Some(eps),
    })
}

/// Constants bounding how much β and ψ move when one edge is added. Both
/// are conjectured to be at most one; the diagnostic is only as good as
/// that conjecture.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityConstants {
    pub u: f64,
    pub v: f64,
}

impl Default for RegularityConstants {
    fn default() -> Self {
        Self { u: 1.0, v: 1.0 }
    }
}

/// `ε_ij = (2χ_ij (β_i + β_j + 3u + 2v + 2) + (2u + 1) min(β_i, β_j)) / 2ψ`.
pub fn collapse_error_bound(beta: &[f64], chi: &DMatrix<f64>, c: RegularityConstants) -> DMatrix<f64> {
    let n = beta.len();
    let two_psi: f64 = beta.iter().sum();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let lead = 2.0 * chi[(i, j)] * (beta[i] + beta[j] + 3.0 * c.u + 2.0 * c.v + 2.0);
        (lead + (2.0 * c.u + 1.0) * beta[i].min(beta[j])) / two_psi
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeError {
    /// `(estimate - reference) / reference`; NaN where the reference is
    /// zero, zero on the diagonal.
    pub errors: DMatrix<f64>,
    /// Mean of `|E_ij|` over unordered pairs with nonzero reference.
    pub mean_abs: f64,
    pub included_pairs: usize,
    pub excluded_pairs: usize,
}

pub fn relative_error(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<RelativeError> {
    let n = reference.nrows();
    if estimate.shape() != reference.shape() || reference.ncols() != n {
        return Err(Error::ShapeMismatch { expected: n, found: estimate.nrows() });
    }
    let mut errors = DMatrix::zeros(n, n);
    let (mut sum, mut included, mut excluded) = (0.0, 0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = reference[(i, j)];
            let e = if r == 0.0 {
                excluded += 1;
                f64::NAN
            } else {
                included += 1;
                let e = (estimate[(i, j)] - r) / r;
                sum += e.abs();
                e
            };
            errors[(i, j)] = e;
            errors[(j, i)] = e;
        }
    }
    if included == 0 {
        return Err(Error::AllReferenceZero);
    }
    Ok(RelativeError { errors, mean_abs: sum / included as f64, included_pairs: included, excluded_pairs: excluded })
}
