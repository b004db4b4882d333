//! Independent chains, MSP restarts and bootstrap trials on a thread pool.
//!
//! Work item `c` always uses random stream `c` under the caller's seed and
//! results are combined in item order, so output depends on the seed and
//! the chain count but not on scheduling.

use mgmoments_core::experiments::{bootstrap_pairs, bootstrap_trial, summarise_bootstrap, BootstrapReport};
use mgmoments_core::modularity::MspEmbedding;
use mgmoments_core::{
    run_chain, solve, ChainConfig, ChainRun, DegreeSequence, ModularityMatrix, MomentAccumulator, Multigraph, MspConfig,
    Partition, SolverConfig,
};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn pool(threads: usize) -> Result<ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainSummary {
    pub stream: u64,
    pub samples: u64,
    pub burn_in_steps: u64,
    pub burn_in_accepted: u64,
    pub proposals: u64,
    pub accepted: u64,
}

#[derive(Debug, Clone)]
pub struct MultiChainRun {
    pub accumulator: MomentAccumulator,
    pub sample_interval: u64,
    pub chains: Vec<ChainSummary>,
}

/// Splits `cfg.samples` over `chains` chains on streams `0..chains` and
/// merges their accumulators in stream order. Batches are split the same
/// way so the merged batch count stays near `cfg.batches`.
pub fn run_chains(g0: &Multigraph, cfg: &ChainConfig, chains: usize, pool: &ThreadPool) -> Result<MultiChainRun> {
    let chains = chains.max(1) as u64;
    if cfg.samples < chains {
        return Err(Error::Usage(format!("{} samples cannot be split over {chains} chains", cfg.samples)));
    }
    let configs: Vec<ChainConfig> = (0..chains)
        .map(|c| {
            let mut cc = cfg.clone();
            cc.stream = c;
            cc.samples = cfg.samples / chains + u64::from(c < cfg.samples % chains);
            cc.batches = cfg.batches.div_ceil(chains);
            cc
        })
        .collect();
    let runs: Vec<ChainRun> =
        pool.install(|| configs.par_iter().map(|cc| run_chain(g0, cc)).collect::<mgmoments_core::Result<_>>())?;

    let mut accumulator = runs[0].accumulator.clone();
    for run in &runs[1..] {
        accumulator.merge(&run.accumulator)?;
    }
    let chains = runs
        .iter()
        .zip(&configs)
        .map(|(r, cc)| ChainSummary {
            stream: cc.stream,
            samples: cc.samples,
            burn_in_steps: r.burn_in_steps,
            burn_in_accepted: r.burn_in_accepted,
            proposals: r.accumulator.acceptance.proposals,
            accepted: r.accumulator.acceptance.accepted,
        })
        .collect();
    Ok(MultiChainRun { accumulator, sample_interval: runs[0].sample_interval, chains })
}

/// Same result as [`mgmoments_core::msp`], with restarts spread over the pool.
pub fn msp_parallel(m: &ModularityMatrix, cfg: &MspConfig, pool: &ThreadPool) -> Result<Partition> {
    if cfg.restarts == 0 {
        return Err(Error::Usage("at least one restart is required".into()));
    }
    let emb = MspEmbedding::new(m, cfg.k)?;
    let runs: Vec<Partition> =
        pool.install(|| (0..cfg.restarts).into_par_iter().map(|r| emb.run(r, cfg.seed, cfg.max_passes)).collect());
    Ok(emb.select(runs))
}

/// Same result as [`mgmoments_core::experiments::bootstrap_u_test`], with
/// trials spread over the pool.
pub fn bootstrap_parallel(
    name: &str,
    d: &DegreeSequence,
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
    pool: &ThreadPool,
) -> Result<BootstrapReport> {
    let base = solve(d, cfg)?;
    if !base.converged {
        return Err(mgmoments_core::Error::NotConverged.into());
    }
    let pairs = bootstrap_pairs(d.len(), trials, seed);
    let results = pool.install(|| {
        pairs.par_iter().map(|&(i, j)| bootstrap_trial(d, &base, i, j, cfg)).collect::<mgmoments_core::Result<Vec<_>>>()
    })?;
    Ok(summarise_bootstrap(name, seed, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mgmoments_core::experiments::{bootstrap_u_test, synthetic_uniform_sequence};
    use mgmoments_core::{cl_estimate, mc_estimates, modularity_matrix, msp, Model};

    fn ring_of_cliques() -> Multigraph {
        let mut edges = Vec::new();
        for c in 0..4 {
            let base = 4 * c;
            for a in 0..4 {
                for b in (a + 1)..4 {
                    edges.push((base + a, base + b));
                }
            }
            edges.push((base + 3, (base + 4) % 16));
        }
        Multigraph::from_edges(16, &edges).unwrap()
    }

    #[test]
    fn single_chain_matches_core_run() {
        let g = ring_of_cliques();
        let cfg = ChainConfig::new(Model::Uniform, 200);
        let multi = run_chains(&g, &cfg, 1, &pool(1).unwrap()).unwrap();
        let single = run_chain(&g, &cfg).unwrap();
        assert_eq!(multi.accumulator, single.accumulator);
    }

    #[test]
    fn chains_independent_of_pool_size() {
        let g = ring_of_cliques();
        let mut cfg = ChainConfig::new(Model::Configuration, 301);
        cfg.batches = 10;
        let a = run_chains(&g, &cfg, 4, &pool(1).unwrap()).unwrap();
        let b = run_chains(&g, &cfg, 4, &pool(4).unwrap()).unwrap();
        assert_eq!(a.accumulator, b.accumulator);
        assert_eq!(a.accumulator.count, 301);
        assert_eq!(a.chains.iter().map(|c| c.samples).collect::<Vec<_>>(), [76, 75, 75, 75]);
        let est = mc_estimates(&a.accumulator).unwrap();
        for i in 0..16 {
            let row: f64 = est.omega.row(i).iter().sum();
            assert!((row - f64::from(g.degrees()[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_samples_for_chains() {
        let g = ring_of_cliques();
        let cfg = ChainConfig::new(Model::Uniform, 2);
        assert!(matches!(run_chains(&g, &cfg, 3, &pool(1).unwrap()), Err(Error::Usage(_))));
    }

    #[test]
    fn parallel_msp_matches_sequential() {
        let g = ring_of_cliques();
        let m = modularity_matrix(&g, &cl_estimate(&g.degree_sequence()).unwrap()).unwrap();
        let cfg = MspConfig::new(4, 12, 5);
        assert_eq!(msp_parallel(&m, &cfg, &pool(3).unwrap()).unwrap(), msp(&m, &cfg).unwrap());
    }

    #[test]
    fn parallel_bootstrap_matches_sequential() {
        let d = synthetic_uniform_sequence(30, 4);
        let cfg = SolverConfig::default();
        let a = bootstrap_parallel("u", &d, 8, 2, &cfg, &pool(4).unwrap()).unwrap();
        assert_eq!(a, bootstrap_u_test("u", &d, 8, 2, &cfg).unwrap());
    }
}
