//! Uniform corruption model: Erdős–Rényi graphs whose edges are either replaced
//! by Haar-random rotations or perturbed by projected Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, GroundTruth, ViewGraph};
use crate::rotation::{sample_haar, wigner_perturb, Rotation};

/// Attempts at drawing a connected graph before giving up.
pub const MAX_REGENERATIONS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("graph stayed disconnected after {attempts} draws (last had {components} components)")]
    Disconnected { attempts: usize, components: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcmParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl UcmParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n < 2 {
            return Err(SynthError::InvalidParams(format!("n = {} < 2", self.n)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(SynthError::InvalidParams(format!("p = {} not in (0, 1]", self.p)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(SynthError::InvalidParams(format!("q = {} not in [0, 1]", self.q)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SynthError::InvalidParams(format!("sigma = {} < 0", self.sigma)));
        }
        Ok(())
    }
}

/// Summary written next to generated instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub seed: u64,
    pub num_edges: usize,
    pub num_corrupted: usize,
}

#[derive(Debug, Clone)]
pub struct UcmInstance {
    pub params: UcmParams,
    pub graph: ViewGraph,
    pub truth: GroundTruth,
    /// Extra draws needed to obtain a connected graph.
    pub regenerations: usize,
}

impl UcmInstance {
    pub fn manifest(&self) -> InstanceManifest {
        InstanceManifest {
            n: self.params.n,
            p: self.params.p,
            q: self.params.q,
            sigma: self.params.sigma,
            seed: self.params.seed,
            num_edges: self.graph.num_edges(),
            num_corrupted: self.truth.corrupted.iter().filter(|&&b| b).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Graph = 1,
    Truth = 2,
    Corruption = 3,
    Noise = 4,
}

/// Derives an independent child seed from a base seed and a stream label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    label
        .bytes()
        .fold(splitmix64(seed), |h, b| splitmix64(h ^ u64::from(b)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Child generator for one named stream of one grid cell.
fn child_rng(params: &UcmParams, stream: Stream, attempt: usize) -> ChaCha8Rng {
    let words = [
        params.seed,
        params.q.to_bits(),
        params.sigma.to_bits(),
        params.n as u64,
        params.p.to_bits(),
        stream as u64,
        attempt as u64,
    ];
    let mut h = 0u64;
    for w in words {
        h = splitmix64(h ^ w);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Draws a UCM instance. Disconnected graphs are redrawn up to
/// [`MAX_REGENERATIONS`] times.
pub fn generate_ucm(params: &UcmParams) -> Result<UcmInstance, SynthError> {
    params.validate()?;
    let n = params.n;
    let mut attempt = 0;
    let pairs = loop {
        let mut rng = child_rng(params, Stream::Graph, attempt);
        let pairs = erdos_renyi(n, params.p, &mut rng);
        let probe = ViewGraph::new(n, pairs.iter().map(|&(i, j)| (i, j, Rotation::identity())))?;
        let (components, _) = probe.components();
        if components == 1 {
            break pairs;
        }
        attempt += 1;
        if attempt >= MAX_REGENERATIONS {
            return Err(SynthError::Disconnected {
                attempts: attempt,
                components,
            });
        }
    };

    let mut truth_rng = child_rng(params, Stream::Truth, 0);
    let rotations: Vec<Rotation> = (0..n).map(|_| sample_haar(&mut truth_rng)).collect();
    let mut corruption_rng = child_rng(params, Stream::Corruption, 0);
    let mut noise_rng = child_rng(params, Stream::Noise, 0);

    let mut corrupted = Vec::with_capacity(pairs.len());
    let mut edges = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let clean = rotations[i] * rotations[j].transpose();
        let bad = corruption_rng.random::<f64>() < params.q;
        let measured = if bad {
            sample_haar(&mut corruption_rng)
        } else {
            wigner_perturb(&clean, params.sigma, &mut noise_rng)
        };
        corrupted.push(bad);
        edges.push((i, j, measured));
    }
    let graph = ViewGraph::new(n, edges)?;
    let corruption = crate::graph::corruption_levels(&graph, &rotations);
    Ok(UcmInstance {
        params: *params,
        graph,
        truth: GroundTruth {
            rotations,
            corruption,
            corrupted,
        },
        regenerations: attempt,
    })
}

/// Evenly spaced values `start, start + step, …, ≤ end`, rounded to 12 decimals.
pub fn grid_range(start: f64, step: f64, end: f64) -> Vec<f64> {
    if step <= 0.0 || end < start {
        return vec![start];
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// The experimental grid: corruption probabilities, noise levels and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n: usize,
    pub p: f64,
    pub q: Vec<f64>,
    pub sigma: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    /// `q ∈ {0, 0.1, …, 0.8}`, `σ ∈ {0, 0.1}`, on `G(100, 0.5)`.
    pub fn standard(num_seeds: u64) -> Self {
        Self {
            n: 100,
            p: 0.5,
            q: grid_range(0.0, 0.1, 0.8),
            sigma: vec![0.0, 0.1],
            seeds: (0..num_seeds).collect(),
        }
    }

    /// Every `(q, σ, seed)` cell in a fixed order.
    pub fn cells(&self) -> Vec<UcmParams> {
        let mut out = Vec::new();
        for &q in &self.q {
            for &sigma in &self.sigma {
                for &seed in &self.seeds {
                    out.push(UcmParams {
                        n: self.n,
                        p: self.p,
                        q,
                        sigma,
                        seed,
                    });
                }
            }
        }
        out
    }
}

/// Lazily generated instances over a grid.
pub fn ucm_sweep(grid: &SweepGrid) -> impl Iterator<Item = Result<UcmInstance, SynthError>> + '_ {
    grid.cells().into_iter().map(|p| generate_ucm(&p))
}
