//! Degree-preserving edge-swap chain and Monte Carlo moment accumulation.
//!
//! The chain keeps one slot per parallel edge. A step draws an unordered
//! pair of distinct slots uniformly. If the two edges share a node the step
//! is a no-op; otherwise one of the two rewirings is chosen with probability
//! one half and accepted with probability 1 (configuration target) or
//! `1 / (w_ij * w_kl)` (uniform target). The clock advances on every
//! proposal, whatever its outcome.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{EstimateSource, MomentEstimates};
use crate::graph::{packed_index, DegreeSequence, Multigraph};
use crate::rng::{stream_rng, DEFAULT_SEED};

/// Stationary distribution targeted by the chain, or weighting used by the
/// enumeration oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Model {
    Uniform,
    Configuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// The two edges shared a node; nothing was proposed.
    Collision,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcceptanceStats {
    pub proposals: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub collisions: u64,
}

impl AcceptanceStats {
    pub fn record(&mut self, outcome: StepOutcome) {
        self.proposals += 1;
        match outcome {
            StepOutcome::Accepted => self.accepted += 1,
            StepOutcome::Rejected => self.rejected += 1,
            StepOutcome::Collision => self.collisions += 1,
        }
    }

    /// Accepted swaps per chain step.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.collisions += other.collisions;
    }
}

/// Mutable chain state: dense adjacency plus a flat edge-slot array.
#[derive(Debug, Clone)]
pub struct EdgeSwapChain {
    n: usize,
    w: Vec<u32>,
    edges: Vec<(u32, u32)>,
}

impl EdgeSwapChain {
    pub fn new(g: &Multigraph) -> Result<Self> {
        let edges: Vec<(u32, u32)> = g
            .edge_list()
            .into_iter()
            .map(|(i, j)| (i as u32, j as u32))
            .collect();
        if edges.len() < 2 {
            return Err(Error::NoMoves { m: edges.len() });
        }
        Ok(Self {
            n: g.node_count(),
            w: g.adjacency().to_vec(),
            edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.w[i * self.n + j]
    }

    /// Row-major adjacency of the current state.
    pub fn adjacency(&self) -> &[u32] {
        &self.w
    }

    /// Edge slots of the current state, one per parallel edge.
    pub fn edge_slots(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.w.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn to_multigraph(&self) -> Multigraph {
        Multigraph::from_adjacency(self.n, self.w.clone()).expect("chain state is a valid multigraph")
    }

    /// Probability of accepting a swap that removes one copy of each of the
    /// edges `(i, j)` and `(k, l)`.
    pub fn acceptance_probability(&self, model: Model, (i, j): (usize, usize), (k, l): (usize, usize)) -> f64 {
        match model {
            Model::Configuration => 1.0,
            Model::Uniform => 1.0 / (f64::from(self.weight(i, j)) * f64::from(self.weight(k, l))),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, model: Model, rng: &mut R) -> StepOutcome {
        let m = self.edges.len();
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = self.edges[a];
        let (k, l) = self.edges[b];
        if i == k || i == l || j == k || j == l {
            return StepOutcome::Collision;
        }
        let (p, q) = if rng.random_bool(0.5) { ((i, k), (j, l)) } else { ((i, l), (j, k)) };
        let accept = self.acceptance_probability(model, (i as usize, j as usize), (k as usize, l as usize));
        if accept < 1.0 && rng.random::<f64>() >= accept {
            return StepOutcome::Rejected;
        }
        self.bump(i, j, false);
        self.bump(k, l, false);
        self.bump(p.0, p.1, true);
        self.bump(q.0, q.1, true);
        self.edges[a] = (p.0.min(p.1), p.0.max(p.1));
        self.edges[b] = (q.0.min(q.1), q.0.max(q.1));
        StepOutcome::Accepted
    }

    fn bump(&mut self, i: u32, j: u32, up: bool) {
        let n = self.n;
        let (i, j) = (i as usize, j as usize);
        for idx in [i * n + j, j * n + i] {
            if up {
                self.w[idx] += 1;
            } else {
                debug_assert!(self.w[idx] > 0, "removing an absent edge");
                self.w[idx] -= 1;
            }
        }
        debug_assert_eq!(self.w[i * n + j], self.w[j * n + i]);
    }
}

/// How the chain is warmed up before the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BurnIn {
    /// Exactly this many chain steps.
    Steps(u64),
    /// Run until this many swaps have been accepted, giving up after one
    /// hundred times as many proposals.
    AcceptedSwaps(u64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainConfig {
    pub model: Model,
    /// Steps between samples; `None` picks `max(10, m)`.
    pub sample_interval: Option<u64>,
    pub samples: u64,
    /// `None` runs until `10 m` swaps have been accepted.
    pub burn_in: Option<BurnIn>,
    pub seed: u64,
    pub stream: u64,
    /// Number of batches for batch-means standard errors.
    pub batches: u64,
    /// Also accumulate the inner products of adjacency rows, at `O(n^3)`
    /// cost per sample.
    pub track_row_products: bool,
}

impl ChainConfig {
    pub fn new(model: Model, samples: u64) -> Self {
        Self {
            model,
            sample_interval: None,
            samples,
            burn_in: None,
            seed: DEFAULT_SEED,
            stream: 0,
            batches: 50,
            track_row_products: false,
        }
    }

    pub fn interval_for(&self, m: usize) -> u64 {
        self.sample_interval.unwrap_or((m as u64).max(10))
    }

    pub fn burn_in_for(&self, m: usize) -> BurnIn {
        self.burn_in.unwrap_or(BurnIn::AcceptedSwaps(10 * m as u64))
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("sample count must be positive"));
        }
        if self.sample_interval == Some(0) {
            return Err(Error::InvalidConfig("sample interval must be positive"));
        }
        if self.batches == 0 {
            return Err(Error::InvalidConfig("batch count must be positive"));
        }
        Ok(())
    }
}

/// Running sums over sampled graphs, stored over the upper triangle.
///
/// Samples are grouped into consecutive batches of fixed size. For each
/// entry the accumulator keeps the sum of squared batch totals and the sum
/// of batch totals weighted by batch size, which is all the batch-means
/// variance needs and keeps memory independent of the batch count.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    n: usize,
    pub count: u64,
    pub sum_w: Vec<u64>,
    pub sum_w2: Vec<u64>,
    pub sum_x: Vec<u64>,
    pub sum_b: Vec<u64>,
    pub sum_y: u64,
    pub sum_row_inner: Option<Vec<u64>>,
    pub acceptance: AcceptanceStats,
    batch_size: u64,
    batch_count: u64,
    batch_n2: f64,
    open_len: u64,
    open_w: Vec<u64>,
    open_x: Vec<u64>,
    batch_sq_w: Vec<f64>,
    batch_nw: Vec<f64>,
    batch_sq_x: Vec<f64>,
    batch_nx: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(n: usize, batch_size: u64, track_row_products: bool) -> Self {
        let p = n * n.saturating_sub(1) / 2;
        Self {
            n,
            count: 0,
            sum_w: vec![0; p],
            sum_w2: vec![0; p],
            sum_x: vec![0; p],
            sum_b: vec![0; n],
            sum_y: 0,
            sum_row_inner: track_row_products.then(|| vec![0; p]),
            acceptance: AcceptanceStats::default(),
            batch_size: batch_size.max(1),
            batch_count: 0,
            batch_n2: 0.0,
            open_len: 0,
            open_w: vec![0; p],
            open_x: vec![0; p],
            batch_sq_w: vec![0.0; p],
            batch_nw: vec![0.0; p],
            batch_sq_x: vec![0.0; p],
            batch_nx: vec![0.0; p],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Closed batches, counting a trailing partial batch once `finish` runs.
    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    /// Adds one sampled graph given its row-major adjacency.
    pub fn push(&mut self, w: &[u32]) {
        let n = self.n;
        debug_assert_eq!(w.len(), n * n);
        let mut y = 0u64;
        let mut p = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = u64::from(w[i * n + j]);
                self.sum_w[p] += v;
                self.sum_w2[p] += v * v;
                self.open_w[p] += v;
                if v > 0 {
                    self.sum_x[p] += 1;
                    self.open_x[p] += 1;
                    self.sum_b[i] += 1;
                    self.sum_b[j] += 1;
                    y += 1;
                }
                p += 1;
            }
        }
        self.sum_y += y;
        if let Some(rows) = self.sum_row_inner.as_mut() {
            let mut p = 0;
            for i in 0..n {
                let ri = &w[i * n..(i + 1) * n];
                for j in (i + 1)..n {
                    let rj = &w[j * n..(j + 1) * n];
                    rows[p] += ri.iter().zip(rj).map(|(&a, &b)| u64::from(a) * u64::from(b)).sum::<u64>();
                    p += 1;
                }
            }
        }
        self.count += 1;
        self.open_len += 1;
        if self.open_len == self.batch_size {
            self.close_batch();
        }
    }

    /// Closes a trailing partial batch.
    pub fn finish(&mut self) {
        if self.open_len > 0 {
            self.close_batch();
        }
    }

    fn close_batch(&mut self) {
        let len = self.open_len as f64;
        for p in 0..self.open_w.len() {
            let sw = self.open_w[p] as f64;
            let sx = self.open_x[p] as f64;
            self.batch_sq_w[p] += sw * sw;
            self.batch_nw[p] += len * sw;
            self.batch_sq_x[p] += sx * sx;
            self.batch_nx[p] += len * sx;
            self.open_w[p] = 0;
            self.open_x[p] = 0;
        }
        self.batch_n2 += len * len;
        self.batch_count += 1;
        self.open_len = 0;
    }

    /// Combines two finished accumulators over the same node set.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.n != self.n {
            return Err(Error::ShapeMismatch { expected: self.n, found: other.n });
        }
        self.finish();
        let mut other = other.clone();
        other.finish();
        let add = |a: &mut [u64], b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        let addf = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.sum_w, &other.sum_w);
        add(&mut self.sum_w2, &other.sum_w2);
        add(&mut self.sum_x, &other.sum_x);
        add(&mut self.sum_b, &other.sum_b);
        match (self.sum_row_inner.as_mut(), other.sum_row_inner.as_ref()) {
            (Some(a), Some(b)) => add(a, b),
            _ => self.sum_row_inner = None,
        }
        addf(&mut self.batch_sq_w, &other.batch_sq_w);
        addf(&mut self.batch_nw, &other.batch_nw);
        addf(&mut self.batch_sq_x, &other.batch_sq_x);
        addf(&mut self.batch_nx, &other.batch_nx);
        self.sum_y += other.sum_y;
        self.count += other.count;
        self.batch_count += other.batch_count;
        self.batch_n2 += other.batch_n2;
        self.acceptance.merge(&other.acceptance);
        Ok(())
    }

    fn symmetric(&self, packed: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = packed(packed_index(n, i, j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Batch-means standard errors of the sample means of `w` and of the
    /// collapse indicator. Entries are NaN when fewer than two batches exist.
    pub fn standard_errors(&self) -> Result<StandardErrors> {
        if self.count == 0 {
            return Err(Error::NoSamples);
        }
        let mut acc = self.clone();
        acc.finish();
        let s = acc.count as f64;
        let b = acc.batch_count as f64;
        let se = |sum: u64, sq: f64, nsum: f64| {
            if acc.batch_count < 2 {
                return f64::NAN;
            }
            let mean = sum as f64 / s;
            let ss = sq - 2.0 * mean * nsum + mean * mean * acc.batch_n2;
            libm::sqrt((ss.max(0.0) / (s * s)) * b / (b - 1.0))
        };
        Ok(StandardErrors {
            batches: acc.batch_count,
            omega: acc.symmetric(|p| se(acc.sum_w[p], acc.batch_sq_w[p], acc.batch_nw[p])),
            chi: acc.symmetric(|p| se(acc.sum_x[p], acc.batch_sq_x[p], acc.batch_nx[p])),
        })
    }

    /// Sample means of the pair moments used by the configuration identity.
    pub fn pair_moments(&self) -> Result<PairMoments> {
        if self.count == 0 {
            return Err(Error::NoSamples);
        }
        let rows = self.sum_row_inner.as_ref().ok_or(Error::RowProductsNotTracked)?;
        let s = self.count as f64;
        Ok(PairMoments {
            omega: self.symmetric(|p| self.sum_w[p] as f64 / s),
            second: self.symmetric(|p| self.sum_w2[p] as f64 / s),
            row_inner: self.symmetric(|p| rows[p] as f64 / s),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    pub batches: u64,
    pub omega: DMatrix<f64>,
    pub chi: DMatrix<f64>,
}

/// Sample means of a finished accumulator.
pub fn mc_estimates(acc: &MomentAccumulator) -> Result<MomentEstimates> {
    if acc.count == 0 {
        return Err(Error::NoSamples);
    }
    let s = acc.count as f64;
    let omega = acc.symmetric(|p| acc.sum_w[p] as f64 / s);
    let sigma = acc.symmetric(|p| {
        let mean = acc.sum_w[p] as f64 / s;
        libm::sqrt((acc.sum_w2[p] as f64 / s - mean * mean).max(0.0))
    });
    Ok(MomentEstimates {
        source: EstimateSource::Mcmc,
        omega,
        chi: Some(acc.symmetric(|p| acc.sum_x[p] as f64 / s)),
        sigma: Some(sigma),
        beta: Some(acc.sum_b.iter().map(|&b| b as f64 / s).collect()),
        psi: Some(acc.sum_y as f64 / s),
        eps: None,
    })
}

/// Result of a chain run.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub accumulator: MomentAccumulator,
    pub sample_interval: u64,
    pub burn_in_steps: u64,
    pub burn_in_accepted: u64,
    pub final_state: Multigraph,
}

pub fn run_chain(g0: &Multigraph, cfg: &ChainConfig) -> Result<ChainRun> {
    run_chain_with(g0, cfg, |_| {})
}

/// Runs the chain, calling `on_sample` with the state at every sample.
pub fn run_chain_with<F: FnMut(&EdgeSwapChain)>(g0: &Multigraph, cfg: &ChainConfig, mut on_sample: F) -> Result<ChainRun> {
    cfg.validate()?;
    let mut chain = EdgeSwapChain::new(g0)?;
    let m = chain.edge_count();
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    let mut stats = AcceptanceStats::default();

    let (mut burn_steps, mut burn_accepted) = (0u64, 0u64);
    match cfg.burn_in_for(m) {
        BurnIn::Steps(t) => {
            for _ in 0..t {
                let o = chain.step(cfg.model, &mut rng);
                stats.record(o);
                burn_accepted += u64::from(o == StepOutcome::Accepted);
            }
            burn_steps = t;
        }
        BurnIn::AcceptedSwaps(target) => {
            let cap = target.saturating_mul(100);
            while burn_accepted < target && burn_steps < cap {
                let o = chain.step(cfg.model, &mut rng);
                stats.record(o);
                burn_accepted += u64::from(o == StepOutcome::Accepted);
                burn_steps += 1;
            }
        }
    }

    let interval = cfg.interval_for(m);
    let batch_size = cfg.samples.div_ceil(cfg.batches);
    let mut acc = MomentAccumulator::new(chain.node_count(), batch_size, cfg.track_row_products);
    for _ in 0..cfg.samples {
        for _ in 0..interval {
            stats.record(chain.step(cfg.model, &mut rng));
        }
        acc.push(chain.adjacency());
        on_sample(&chain);
    }
    acc.finish();
    acc.acceptance = stats;
    Ok(ChainRun {
        accumulator: acc,
        sample_interval: interval,
        burn_in_steps: burn_steps,
        burn_in_accepted: burn_accepted,
        final_state: chain.to_multigraph(),
    })
}

/// Ω together with the second moments entering the configuration identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMoments {
    pub omega: DMatrix<f64>,
    /// E[w_ij^2].
    pub second: DMatrix<f64>,
    /// E[w_i . w_j], the inner product of adjacency rows i and j.
    pub row_inner: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResidual {
    /// Residual matrix with zero diagonal and NaN on undefined pairs.
    pub residual: DMatrix<f64>,
    /// Pairs with `2m = d_i + d_j`, where the identity has no denominator.
    pub undefined: Vec<(usize, usize)>,
    pub max_abs: f64,
}

/// Residual of `ω_ij (2m - d_i - d_j) = d_i d_j - E[w_i . w_j] - E[w_ij^2]`,
/// which holds exactly under the configuration model.
pub fn configuration_identity_residual(moments: &PairMoments, d: &DegreeSequence) -> Result<IdentityResidual> {
    let n = d.len();
    if moments.omega.nrows() != n {
        return Err(Error::ShapeMismatch { expected: n, found: moments.omega.nrows() });
    }
    let dv = d.to_f64();
    let two_m = 2.0 * d.edge_count() as f64;
    let mut residual = DMatrix::zeros(n, n);
    let mut undefined = Vec::new();
    let mut max_abs: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let denom = two_m - dv[i] - dv[j];
            let r = if denom == 0.0 {
                undefined.push((i, j));
                f64::NAN
            } else {
                let predicted = (dv[i] * dv[j] - moments.row_inner[(i, j)] - moments.second[(i, j)]) / denom;
                let r = moments.omega[(i, j)] - predicted;
                max_abs = max_abs.max(r.abs());
                r
            };
            residual[(i, j)] = r;
            residual[(j, i)] = r;
        }
    }
    Ok(IdentityResidual { residual, undefined, max_abs })
}
