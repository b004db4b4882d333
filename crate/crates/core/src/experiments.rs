//! Synthetic degree sequences and the numerical experiments built on them.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{cl_estimate, omega_i_estimate, relative_error, MomentEstimates, RelativeError};
use crate::graph::{DegreeSequence, Multigraph};
use crate::mcmc::{mc_estimates, run_chain, ChainConfig, ChainRun};
use crate::rng::stream_rng;
use crate::solver::{solve, BetaEstimate, SolverConfig};

/// Largest value drawn by the truncated Zipf sampler.
pub const ZIPF_CAP: u32 = 1_000_000;

/// `n` independent copies of `2(u + 1)` with `u` uniform on `{0, …, 50}`.
pub fn synthetic_uniform_sequence(n: usize, seed: u64) -> DegreeSequence {
    let mut rng = stream_rng(seed, 0);
    let d = (0..n).map(|_| 2 * (rng.random_range(0..=50u32) + 1)).collect();
    DegreeSequence::new(d).expect("even entries")
}

/// Inverse-CDF sampler for a Zipf law truncated to `{1, …, cap}` and
/// renormalised.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    alpha: f64,
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(alpha: f64, cap: u32) -> Result<Self> {
        if !(alpha > 1.0) || cap == 0 {
            return Err(Error::InvalidConfig("zipf exponent must exceed one and the cap be positive"));
        }
        let mut cdf = Vec::with_capacity(cap as usize);
        let mut acc = 0.0;
        for k in 1..=cap {
            acc += libm::pow(f64::from(k), -alpha);
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { alpha, cdf })
    }

    pub fn cap(&self) -> u32 {
        self.cdf.len() as u32
    }

    /// Probability mass of the untruncated law above the cap.
    pub fn truncation_mass(&self) -> f64 {
        let cap = f64::from(self.cap());
        let a = self.alpha;
        let head: f64 = (1..=self.cap()).map(|k| libm::pow(f64::from(k), -a)).sum();
        // Euler–Maclaurin estimate of Σ_{k > cap} k^-α.
        let tail = libm::pow(cap, 1.0 - a) / (a - 1.0) - 0.5 * libm::pow(cap, -a) + a / 12.0 * libm::pow(cap, -a - 1.0);
        tail / (head + tail)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c < u);
        (k.min(self.cdf.len() - 1) + 1) as u32
    }
}

/// `n` independent copies of `2z` with `z` Zipf(α) truncated at [`ZIPF_CAP`].
pub fn synthetic_zipf_sequence(n: usize, alpha: f64, seed: u64) -> Result<DegreeSequence> {
    zipf_sequence_with(&ZipfSampler::new(alpha, ZIPF_CAP)?, n, seed)
}

pub fn zipf_sequence_with(sampler: &ZipfSampler, n: usize, seed: u64) -> Result<DegreeSequence> {
    let mut rng = stream_rng(seed, 0);
    DegreeSequence::new((0..n).map(|_| 2 * sampler.sample(&mut rng)).collect())
}

/// Level at which the mean-square error is indistinguishable from rounding:
/// `ε² Σ d_i²` with `ε` the double-precision machine epsilon.
pub fn machine_precision_threshold(d: &DegreeSequence) -> f64 {
    let norm2: f64 = d.to_f64().iter().map(|x| x * x).sum();
    f64::EPSILON * f64::EPSILON * norm2
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdHit {
    pub label: String,
    pub threshold: f64,
    /// First sweep (1-based) whose error is at or below the threshold.
    pub sweep: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceReport {
    pub name: String,
    pub n: usize,
    pub sweeps: usize,
    /// `n⁻¹ ‖h(β) - d‖₂²` after each sweep.
    pub mse_trace: Vec<f64>,
    /// `n⁻¹ ‖h(β) - d‖₂` after each sweep.
    pub residual_trace: Vec<f64>,
    pub thresholds: Vec<ThresholdHit>,
    /// Sweeps after the first where the error went up.
    pub increases: Vec<usize>,
    pub converged: bool,
    pub final_mse: f64,
}

impl ConvergenceReport {
    pub fn sweeps_to(&self, label: &str) -> Option<usize> {
        self.thresholds.iter().find(|t| t.label == label).and_then(|t| t.sweep)
    }
}

/// Solves `d` recording the error after every sweep. The tolerance is
/// lowered to the machine-precision threshold so the trace runs that far.
pub fn convergence_trace(name: &str, d: &DegreeSequence, cfg: &SolverConfig) -> Result<ConvergenceReport> {
    let machine = machine_precision_threshold(d);
    let mut cfg = cfg.clone();
    cfg.tol = cfg.tol.min(machine);
    let est = solve(d, &cfg)?;
    let n = d.len();
    let levels = [("1e-6", 1e-6), ("1e-12", 1e-12), ("machine", machine)];
    let thresholds = levels
        .iter()
        .map(|&(label, threshold)| ThresholdHit {
            label: label.into(),
            threshold,
            sweep: est.mse_trace.iter().position(|&e| e <= threshold).map(|s| s + 1),
        })
        .collect();
    let increases = (1..est.mse_trace.len())
        .filter(|&s| est.mse_trace[s] > est.mse_trace[s - 1])
        .map(|s| s + 1)
        .collect();
    Ok(ConvergenceReport {
        name: name.into(),
        n,
        sweeps: est.sweeps,
        residual_trace: est.mse_trace.iter().map(|&e| libm::sqrt(e * n as f64) / n as f64).collect(),
        mse_trace: est.mse_trace,
        thresholds,
        increases,
        converged: est.converged,
        final_mse: est.final_mse,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapTrial {
    pub i: usize,
    pub j: usize,
    pub converged: bool,
    /// `‖β̂′ - β̂‖∞`.
    pub max_change: f64,
    /// `n⁻¹ ‖β̂′ - β̂‖₁`.
    pub mean_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapReport {
    pub name: String,
    pub seed: u64,
    pub trials: Vec<BootstrapTrial>,
    /// Largest `‖β̂′ - β̂‖∞` over converged trials.
    pub max_change: f64,
    /// Largest `n⁻¹ ‖β̂′ - β̂‖₁` over converged trials.
    pub max_mean_change: f64,
    pub average_mean_change: f64,
    pub non_converged: usize,
}

/// The node pairs perturbed by each trial.
pub fn bootstrap_pairs(n: usize, trials: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = stream_rng(seed, 0);
    (0..trials)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Re-solves with one extra edge between `i` and `j`, starting from the base
/// solution.
pub fn bootstrap_trial(d: &DegreeSequence, base: &BetaEstimate, i: usize, j: usize, cfg: &SolverConfig) -> Result<BootstrapTrial> {
    let mut cfg = cfg.clone();
    cfg.initial = Some(base.beta.clone());
    let est = solve(&d.incremented(i, j), &cfg)?;
    let diffs: Vec<f64> = est.beta.iter().zip(&base.beta).map(|(a, b)| (a - b).abs()).collect();
    Ok(BootstrapTrial {
        i,
        j,
        converged: est.converged,
        max_change: diffs.iter().copied().fold(0.0, f64::max),
        mean_change: diffs.iter().sum::<f64>() / diffs.len() as f64,
    })
}

pub fn summarise_bootstrap(name: &str, seed: u64, trials: Vec<BootstrapTrial>) -> BootstrapReport {
    let ok: Vec<&BootstrapTrial> = trials.iter().filter(|t| t.converged).collect();
    BootstrapReport {
        name: name.into(),
        seed,
        max_change: ok.iter().map(|t| t.max_change).fold(0.0, f64::max),
        max_mean_change: ok.iter().map(|t| t.mean_change).fold(0.0, f64::max),
        average_mean_change: if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|t| t.mean_change).sum::<f64>() / ok.len() as f64
        },
        non_converged: trials.len() - ok.len(),
        trials,
    }
}

/// Measures how much `β̂` moves when a random edge is added, `trials` times.
pub fn bootstrap_u_test(name: &str, d: &DegreeSequence, trials: usize, seed: u64, cfg: &SolverConfig) -> Result<BootstrapReport> {
    let base = solve(d, cfg)?;
    if !base.converged {
        return Err(Error::NotConverged);
    }
    let results = bootstrap_pairs(d.len(), trials, seed)
        .into_iter()
        .map(|(i, j)| bootstrap_trial(d, &base, i, j, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarise_bootstrap(name, seed, results))
}

/// Both estimates scored against a Monte Carlo reference.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub cl: MomentEstimates,
    pub uniform: MomentEstimates,
    pub beta: BetaEstimate,
    pub reference: MomentEstimates,
    pub cl_error: RelativeError,
    pub uniform_error: RelativeError,
    /// χ̂ against the sampled collapse frequencies, when both exist.
    pub chi_error: Option<RelativeError>,
    /// σ̂ against the sampled standard deviations, when both exist.
    pub sigma_error: Option<RelativeError>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonSummary {
    pub cl_mean_abs_rel_error: f64,
    pub uniform_mean_abs_rel_error: f64,
    pub chi_mean_abs_rel_error: Option<f64>,
    pub sigma_mean_abs_rel_error: Option<f64>,
    pub included_pairs: usize,
    pub excluded_pairs: usize,
    pub solver_converged: bool,
}

impl Comparison {
    pub fn summary(&self) -> ComparisonSummary {
        ComparisonSummary {
            cl_mean_abs_rel_error: self.cl_error.mean_abs,
            uniform_mean_abs_rel_error: self.uniform_error.mean_abs,
            chi_mean_abs_rel_error: self.chi_error.as_ref().map(|e| e.mean_abs),
            sigma_mean_abs_rel_error: self.sigma_error.as_ref().map(|e| e.mean_abs),
            included_pairs: self.uniform_error.included_pairs,
            excluded_pairs: self.uniform_error.excluded_pairs,
            solver_converged: self.beta.converged,
        }
    }
}

/// Scores the Chung–Lu and solver estimates for `d` against `reference`.
pub fn compare_estimates(d: &DegreeSequence, reference: MomentEstimates, cfg: &SolverConfig) -> Result<Comparison> {
    let cl = cl_estimate(d)?;
    let beta = solve(d, cfg)?;
    let uniform = omega_i_estimate(&beta)?;
    let cl_error = relative_error(&cl.omega, &reference.omega)?;
    let uniform_error = relative_error(&uniform.omega, &reference.omega)?;
    let pair_error = |a: &Option<nalgebra::DMatrix<f64>>, b: &Option<nalgebra::DMatrix<f64>>| match (a, b) {
        (Some(a), Some(b)) => relative_error(a, b).ok(),
        _ => None,
    };
    let chi_error = pair_error(&uniform.chi, &reference.chi);
    let sigma_error = pair_error(&uniform.sigma, &reference.sigma);
    Ok(Comparison { cl, uniform, beta, reference, cl_error, uniform_error, chi_error, sigma_error })
}

/// Runs the chain on `g` and scores both estimates against its output.
pub fn estimator_comparison(g: &Multigraph, chain: &ChainConfig, cfg: &SolverConfig) -> Result<(Comparison, ChainRun)> {
    let run = run_chain(g, chain)?;
    let reference = mc_estimates(&run.accumulator)?;
    Ok((compare_estimates(&g.degree_sequence(), reference, cfg)?, run))
}

/// Scales every entry of `d` by `factor` and realises the result.
pub fn scaled_realisation(d: &DegreeSequence, factor: u32) -> Result<Multigraph> {
    let scaled = DegreeSequence::new(d.as_slice().iter().map(|&x| x * factor).collect())?;
    Multigraph::realise(&scaled)
}
