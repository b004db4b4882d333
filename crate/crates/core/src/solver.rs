//! Coordinate-wise solver for `h(β) = d`.
//!
//! With `f_ij = β_i β_j / 2ψ` and `ψ = Σβ / 2`, the map
//! `h_i(β) = Σ_{j≠i} f_ij / (1 - f_ij)` gives the degrees implied by `β`.
//! Each sweep replaces every `β_i` by the unique root of the scalar equation
//! `h_i(…, b, …) = d_i`, where `ψ` is recomputed with `b` in place of `β_i`.
//! By default the other coordinates are held at the previous sweep's values;
//! [`UpdateScheme::Sequential`] uses the freshest values instead.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::DegreeSequence;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Stop once `n⁻¹ ‖h(β) - d‖₂²` falls to this level...
    pub tol: f64,
    /// ...and the largest coordinate change in the last sweep, relative to
    /// `max β`, is at most this.
    pub step_tol: f64,
    pub max_sweeps: usize,
    /// Relative width at which a scalar root is accepted.
    pub inner_tol: f64,
    /// Starting point; all ones when absent.
    pub initial: Option<Vec<f64>>,
    /// Margin used when classifying the result.
    pub delta: f64,
    pub update: UpdateScheme,
}

/// How a sweep feeds coordinates into each scalar solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateScheme {
    /// Every coordinate is solved against the previous sweep's values.
    #[default]
    Simultaneous,
    /// Coordinates are solved in index order, each against the values
    /// already updated in the current sweep.
    Sequential,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            step_tol: 1e-10,
            max_sweeps: 10_000,
            inner_tol: 1e-14,
            initial: None,
            delta: DEFAULT_DELTA,
            update: UpdateScheme::default(),
        }
    }
}

pub const DEFAULT_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Classification {
    /// Physical, and `(max β)² ≤ Σβ - δ`.
    WellBehaved { delta: f64 },
    /// `1 ≤ β_i ≤ n - 1` for every `i`.
    Physical,
    Neither,
}

impl Classification {
    pub fn is_physical(&self) -> bool {
        !matches!(self, Classification::Neither)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum StopReason {
    Converged,
    MaxSweeps,
    /// No root exists for this node's scalar equation given the others.
    CoordinateFailure { node: usize },
    /// The iterate left the region where `h` is finite.
    Divergent,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaEstimate {
    pub beta: Vec<f64>,
    pub psi: f64,
    /// Completed sweeps.
    pub sweeps: usize,
    /// `n⁻¹ ‖h(β) - d‖₂²`.
    pub final_mse: f64,
    /// `n⁻¹ ‖h(β) - d‖₂`.
    pub residual_norm: f64,
    pub initial_mse: f64,
    /// Mean-square error after each completed sweep.
    pub mse_trace: Vec<f64>,
    pub converged: bool,
    pub stop: StopReason,
    pub classification: Classification,
}

fn total(beta: &[f64]) -> f64 {
    beta.iter().sum()
}

/// `β_i β_j / 2ψ`.
pub fn pair_kernel(beta: &[f64], i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::DiagonalPair(i));
    }
    Ok(beta[i] * beta[j] / total(beta))
}

/// Degrees implied by `β`.
pub fn implied_degrees(beta: &[f64]) -> Result<Vec<f64>> {
    let n = beta.len();
    let two_psi = total(beta);
    let mut h = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let f = beta[i] * beta[j] / two_psi;
            if !(f < 1.0) {
                return Err(Error::KernelOutOfRange { i, j, value: f });
            }
            let odds = f / (1.0 - f);
            h[i] += odds;
            h[j] += odds;
        }
    }
    Ok(h)
}

/// `n⁻¹ ‖h - d‖₂²`.
pub fn mean_square_error(h: &[f64], d: &[f64]) -> f64 {
    h.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / h.len() as f64
}

/// Value and derivative of `b ↦ h_i(…, b, …) - target`.
fn scalar(beta: &[f64], i: usize, rest: f64, b: f64, target: f64) -> (f64, f64) {
    let (mut g, mut dg) = (-target, 0.0);
    for (j, &bj) in beta.iter().enumerate() {
        if j == i {
            continue;
        }
        let denom = rest + b * (1.0 - bj);
        g += b * bj / denom;
        dg += bj * rest / (denom * denom);
    }
    (g, dg)
}

/// Solves `h_i(…, b, …) = d_i` for `b` with every other coordinate fixed.
pub fn coordinate_update(beta: &[f64], i: usize, d_i: f64, inner_tol: f64) -> Result<f64> {
    let rest: f64 = beta.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, b)| b).sum();
    let max_other = beta
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &b)| b)
        .fold(0.0, f64::max);
    let fail = || Error::Bracket { i, target: d_i, current: beta[i] };
    if !(d_i > 0.0) || !(rest > 0.0) {
        return Err(fail());
    }
    let g = |b: f64| scalar(beta, i, rest, b, d_i);

    let mut hi = if max_other > 1.0 {
        // Largest b keeping every kernel value below one, pulled inwards.
        let hi = rest / (max_other - 1.0) * (1.0 - 1e-12);
        if !(g(hi).0 > 0.0) {
            return Err(fail());
        }
        hi
    } else {
        if max_other < 1.0 {
            let sup: f64 = beta
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &b)| b / (1.0 - b))
                .sum();
            if d_i >= sup {
                return Err(fail());
            }
        }
        let mut hi = beta[i].max(1.0);
        let mut doublings = 0;
        while !(g(hi).0 > 0.0) {
            hi *= 2.0;
            doublings += 1;
            if doublings > 2000 || !hi.is_finite() {
                return Err(fail());
            }
        }
        hi
    };
    let mut lo = 0.0;
    let mut x = if beta[i] > lo && beta[i] < hi { beta[i] } else { 0.5 * hi };
    for _ in 0..200 {
        let (v, dv) = g(x);
        if v == 0.0 {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - v / dv;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - x).abs();
        x = next;
        if step <= inner_tol * x || hi - lo <= inner_tol * x {
            return Ok(x);
        }
    }
    Ok(x)
}

pub fn classify(beta: &[f64], delta: f64) -> Classification {
    let n = beta.len() as f64;
    if beta.iter().any(|&b| !(b >= 1.0 && b <= n - 1.0)) {
        return Classification::Neither;
    }
    let max = beta.iter().copied().fold(f64::MIN, f64::max);
    if max * max <= total(beta) - delta {
        Classification::WellBehaved { delta }
    } else {
        Classification::Physical
    }
}

pub fn solve(d: &DegreeSequence, cfg: &SolverConfig) -> Result<BetaEstimate> {
    if !(cfg.tol > 0.0) || cfg.max_sweeps == 0 {
        return Err(Error::InvalidConfig("tol must be positive and max_sweeps at least one"));
    }
    if let Some(node) = d.first_zero() {
        return Err(Error::ZeroDegree { node });
    }
    let n = d.len();
    let target = d.to_f64();
    let mut beta = match &cfg.initial {
        Some(b) if b.len() != n => return Err(Error::ShapeMismatch { expected: n, found: b.len() }),
        Some(b) if b.iter().any(|&x| !(x > 0.0)) => {
            return Err(Error::InvalidConfig("initial beta must be positive"))
        }
        Some(b) => b.clone(),
        None => vec![1.0; n],
    };
    let initial_mse = mean_square_error(&implied_degrees(&beta)?, &target);

    let mut trace = Vec::new();
    let mut mse = initial_mse;
    let mut stop = StopReason::MaxSweeps;
    for _ in 0..cfg.max_sweeps {
        let mut max_step: f64 = 0.0;
        let mut failed = None;
        let previous = beta.clone();
        for i in 0..n {
            let source = match cfg.update {
                UpdateScheme::Simultaneous => &previous,
                UpdateScheme::Sequential => &beta,
            };
            match coordinate_update(source, i, target[i], cfg.inner_tol) {
                Ok(b) => {
                    max_step = max_step.max((b - beta[i]).abs());
                    beta[i] = b;
                }
                Err(_) => {
                    failed = Some(i);
                    break;
                }
            }
        }
        if let Some(node) = failed {
            stop = StopReason::CoordinateFailure { node };
            break;
        }
        // A kernel value can pass one transiently while other coordinates
        // catch up, so an infinite error alone does not end the solve.
        mse = match implied_degrees(&beta) {
            Ok(h) => mean_square_error(&h, &target),
            Err(_) => f64::INFINITY,
        };
        trace.push(mse);
        if beta.iter().any(|b| !b.is_finite()) {
            stop = StopReason::Divergent;
            break;
        }
        let scale = beta.iter().copied().fold(0.0, f64::max);
        if mse <= cfg.tol && max_step <= cfg.step_tol * scale {
            stop = StopReason::Converged;
            break;
        }
    }
    if matches!(stop, StopReason::CoordinateFailure { .. }) {
        mse = implied_degrees(&beta).map_or(f64::INFINITY, |h| mean_square_error(&h, &target));
    }
    Ok(BetaEstimate {
        psi: 0.5 * total(&beta),
        sweeps: trace.len(),
        final_mse: mse,
        residual_norm: libm::sqrt(mse * n as f64) / n as f64,
        initial_mse,
        mse_trace: trace,
        converged: stop == StopReason::Converged,
        stop,
        classification: classify(&beta, cfg.delta),
        beta,
    })
}

/// `J = (S + D)(B⁻¹ - E / 4ψ)` with `s_ij = f_ij / (1 - f_ij)²`,
/// `D = diag(S 1)`, `B = diag(β)` and `E` the all-ones matrix.
pub fn jacobian(beta: &[f64]) -> Result<DMatrix<f64>> {
    let (sd, p) = jacobian_factors(beta)?;
    Ok(sd * p)
}

fn jacobian_factors(beta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = beta.len();
    let two_psi = total(beta);
    let mut sd = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let f = beta[i] * beta[j] / two_psi;
            if !(f < 1.0) {
                return Err(Error::KernelOutOfRange { i, j, value: f });
            }
            let s = f / ((1.0 - f) * (1.0 - f));
            sd[(i, j)] = s;
            sd[(j, i)] = s;
            sd[(i, i)] += s;
            sd[(j, j)] += s;
        }
    }
    let p = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { 1.0 / beta[i] } else { 0.0 };
        diag - 1.0 / (2.0 * two_psi)
    });
    Ok((sd, p))
}

/// Smallest eigenvalue of the Jacobian.
///
/// `B⁻¹ - E / 4ψ` is positive definite for positive `β`, so with its
/// Cholesky factor `L` the Jacobian is similar to the symmetric matrix
/// `Lᵀ (S + D) L`, whose spectrum is computed instead.
pub fn jacobian_min_eigenvalue(beta: &[f64]) -> Result<f64> {
    let (sd, p) = jacobian_factors(beta)?;
    let l = nalgebra::Cholesky::new(p)
        .ok_or(Error::InvalidConfig("beta must be positive"))?
        .l();
    let sym = l.transpose() * sd * l;
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}
