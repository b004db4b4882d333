//! Brute-force enumeration of every loopless multigraph with a given degree
//! sequence, for exact moments on tiny instances.
//!
//! Graphs are enumerated directly by filling the upper triangle of the
//! adjacency. Configuration-model weights are then obtained independently by
//! walking every perfect matching of the stub multiset, discarding matchings
//! with a self-loop, and tallying the graph each matching maps to. No closed
//! form for the stub-matching multiplicity is used.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{EstimateSource, MomentEstimates};
use crate::graph::{collapse, packed_index, DegreeSequence, Multigraph};
use crate::mcmc::{Model, PairMoments};

/// Largest edge count enumerated unless the caller raises the cap.
pub const DEFAULT_ENUMERATION_CAP: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedEnsemble {
    pub degrees: DegreeSequence,
    pub graphs: Vec<Multigraph>,
    /// Number of self-loop-free stub matchings mapping to each graph.
    pub config_weights: Vec<u64>,
}

impl EnumeratedEnsemble {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Position of `g` in the ensemble.
    pub fn index_of(&self, g: &Multigraph) -> Option<usize> {
        self.graphs.iter().position(|h| h == g)
    }

    /// Probability of each graph under `model`.
    pub fn probabilities(&self, model: Model) -> Vec<f64> {
        match model {
            Model::Uniform => vec![1.0 / self.graphs.len() as f64; self.graphs.len()],
            Model::Configuration => {
                let total: u64 = self.config_weights.iter().sum();
                self.config_weights
                    .iter()
                    .map(|&c| c as f64 / total as f64)
                    .collect()
            }
        }
    }
}

pub fn enumerate_ensemble(d: &DegreeSequence, max_m: u64) -> Result<EnumeratedEnsemble> {
    let m = d.edge_count();
    if m > max_m {
        return Err(Error::EnumerationCap { m, cap: max_m });
    }
    let n = d.len();
    let mut graphs = Vec::new();
    let mut remaining = d.as_slice().to_vec();
    let mut packed = vec![0u32; n * n.saturating_sub(1) / 2];
    fill_pairs(n, 0, 1, &mut remaining, &mut packed, &mut graphs);

    let lookup: BTreeMap<Vec<u32>, usize> = graphs
        .iter()
        .enumerate()
        .map(|(idx, (key, _))| (key.clone(), idx))
        .collect();
    let config_weights = stub_matching_weights(d, &lookup, graphs.len());
    Ok(EnumeratedEnsemble {
        degrees: d.clone(),
        graphs: graphs.into_iter().map(|(_, g)| g).collect(),
        config_weights,
    })
}

fn fill_pairs(
    n: usize,
    i: usize,
    j: usize,
    remaining: &mut [u32],
    packed: &mut [u32],
    out: &mut Vec<(Vec<u32>, Multigraph)>,
) {
    if i + 1 >= n {
        if n == 0 || remaining[n - 1] == 0 {
            out.push((packed.to_vec(), unpack(n, packed)));
        }
        return;
    }
    if j == n {
        if remaining[i] == 0 {
            fill_pairs(n, i + 1, i + 2, remaining, packed, out);
        }
        return;
    }
    let later: u32 = remaining[j + 1..].iter().sum();
    let hi = remaining[i].min(remaining[j]);
    // Whatever row i does not place on (i, j) must fit on later columns.
    let lo = remaining[i].saturating_sub(later);
    for v in lo..=hi {
        remaining[i] -= v;
        remaining[j] -= v;
        packed[packed_index(n, i, j)] = v;
        fill_pairs(n, i, j + 1, remaining, packed, out);
        remaining[i] += v;
        remaining[j] += v;
    }
    packed[packed_index(n, i, j)] = 0;
}

fn unpack(n: usize, packed: &[u32]) -> Multigraph {
    let mut w = vec![0u32; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = packed[packed_index(n, i, j)];
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    Multigraph::from_adjacency(n, w).expect("enumerated adjacency is valid")
}

fn stub_matching_weights(
    d: &DegreeSequence,
    lookup: &BTreeMap<Vec<u32>, usize>,
    count: usize,
) -> Vec<u64> {
    let n = d.len();
    let owner: Vec<usize> = d
        .as_slice()
        .iter()
        .enumerate()
        .flat_map(|(i, &deg)| core::iter::repeat_n(i, deg as usize))
        .collect();
    let mut matched = vec![false; owner.len()];
    let mut packed = vec![0u32; n * n.saturating_sub(1) / 2];
    let mut weights = vec![0u64; count];
    match_stubs(n, &owner, &mut matched, &mut packed, lookup, &mut weights);
    weights
}

fn match_stubs(
    n: usize,
    owner: &[usize],
    matched: &mut [bool],
    packed: &mut [u32],
    lookup: &BTreeMap<Vec<u32>, usize>,
    weights: &mut [u64],
) {
    let Some(s) = matched.iter().position(|&m| !m) else {
        let idx = *lookup
            .get(packed)
            .expect("every stub matching maps to an enumerated graph");
        weights[idx] += 1;
        return;
    };
    matched[s] = true;
    for t in (s + 1)..owner.len() {
        if matched[t] || owner[t] == owner[s] {
            continue;
        }
        let (a, b) = (owner[s].min(owner[t]), owner[s].max(owner[t]));
        matched[t] = true;
        packed[packed_index(n, a, b)] += 1;
        match_stubs(n, owner, matched, packed, lookup, weights);
        packed[packed_index(n, a, b)] -= 1;
        matched[t] = false;
    }
    matched[s] = false;
}

/// Exact moments of an enumerated ensemble.
#[derive(Debug, Clone)]
pub struct OracleMoments {
    /// Ω, χ, σ, β and ψ.
    pub estimates: MomentEstimates,
    /// Ω together with E[w_ij^2] and E[w_i . w_j].
    pub pair: PairMoments,
}

pub fn oracle_moments(ensemble: &EnumeratedEnsemble, model: Model) -> Result<OracleMoments> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = ensemble.degrees.len();
    let mut omega = DMatrix::<f64>::zeros(n, n);
    let mut second = DMatrix::<f64>::zeros(n, n);
    let mut chi = DMatrix::zeros(n, n);
    let mut row_inner = DMatrix::zeros(n, n);
    let mut beta = vec![0.0; n];
    let mut psi = 0.0;
    for (g, p) in ensemble.graphs.iter().zip(ensemble.probabilities(model)) {
        let c = collapse(g);
        for i in 0..n {
            beta[i] += p * f64::from(c.b[i]);
            for j in 0..n {
                let w = f64::from(g.weight(i, j));
                omega[(i, j)] += p * w;
                second[(i, j)] += p * w * w;
                if c.indicator(i, j) {
                    chi[(i, j)] += p;
                }
                if i != j {
                    let inner: u64 = g
                        .row(i)
                        .iter()
                        .zip(g.row(j))
                        .map(|(&a, &b)| u64::from(a) * u64::from(b))
                        .sum();
                    row_inner[(i, j)] += p * inner as f64;
                }
            }
        }
        psi += p * c.y as f64;
    }
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        libm::sqrt((second[(i, j)] - omega[(i, j)] * omega[(i, j)]).max(0.0))
    });
    Ok(OracleMoments {
        estimates: MomentEstimates {
            source: EstimateSource::Oracle,
            omega: omega.clone(),
            chi: Some(chi),
            sigma: Some(sigma),
            beta: Some(beta),
            psi: Some(psi),
            eps: None,
        },
        pair: PairMoments {
            omega,
            second,
            row_inner,
        },
    })
}
