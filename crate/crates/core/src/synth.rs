//! Synthetic token embeddings with controlled structure, and a moment
//! diagnostic for visual/textual difference vectors.
//!
//! All randomness comes from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`); Gaussian draws use the ziggurat
//! sampler from `rand_distr`. Both are fixed algorithms, so a seed pins the
//! output on every platform.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{PruneError, Result};
use crate::tokenset::{Modality, TokenMatrix};

pub type SynthRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> SynthRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn normal(rng: &mut SynthRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Shape and structure of a synthetic visual/textual pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_visual: usize,
    pub n_textual: usize,
    pub dim: usize,
    pub n_clusters: usize,
    /// Within-cluster standard deviation per coordinate.
    pub cluster_spread: f64,
    pub outlier_fraction: f64,
    pub outlier_scale: f64,
    /// Fraction of visual tokens drawn close to a textual token.
    pub coupling: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_visual: 64,
            n_textual: 8,
            dim: 32,
            n_clusters: 4,
            cluster_spread: 0.3,
            outlier_fraction: 0.0,
            outlier_scale: 1.0,
            coupling: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PruneError::InvalidConfig(msg.to_string()));
        if self.n_visual == 0 || self.n_textual == 0 || self.dim == 0 || self.n_clusters == 0 {
            return bad("synthetic counts must all be at least 1");
        }
        if !(self.cluster_spread >= 0.0 && self.cluster_spread.is_finite()) {
            return bad("cluster_spread must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1]");
        }
        if !(self.outlier_scale >= 1.0 && self.outlier_scale.is_finite()) {
            return bad("outlier_scale must be finite and >= 1");
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad("coupling must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SynthSpec { seed, ..self.clone() }
    }
}

fn to_matrix(modality: Modality, rows: usize, dim: usize, data: Vec<f64>) -> TokenMatrix {
    let data = data.into_iter().map(|v| v as f32).collect();
    TokenMatrix::new(modality, rows, dim, data).expect("generated values are finite")
}

/// Draws a visual/textual pair.
///
/// Cluster centers are standard normal vectors. Textual tokens sit around
/// randomly chosen centers with `cluster_spread` noise. A `coupling` share of
/// visual tokens sits around randomly chosen textual tokens with half that
/// noise; the rest sit around centers like the text. Finally an
/// `outlier_fraction` share of visual rows is multiplied by `outlier_scale`.
pub fn generate(spec: &SynthSpec) -> Result<(TokenMatrix, TokenMatrix)> {
    spec.validate()?;
    let mut rng = rng(spec.seed);
    let d = spec.dim;

    let centers: Vec<f64> = (0..spec.n_clusters * d).map(|_| normal(&mut rng)).collect();
    let center = |k: usize| &centers[k * d..(k + 1) * d];

    let mut text = Vec::with_capacity(spec.n_textual * d);
    for _ in 0..spec.n_textual {
        let k = rng.gen_range(0..spec.n_clusters);
        for &c in center(k) {
            text.push(c + spec.cluster_spread * normal(&mut rng));
        }
    }

    let n_coupled = (spec.coupling * spec.n_visual as f64).round() as usize;
    let coupled = rand::seq::index::sample(&mut rng, spec.n_visual, n_coupled);
    let mut is_coupled = vec![false; spec.n_visual];
    for i in coupled.iter() {
        is_coupled[i] = true;
    }

    let mut vis = Vec::with_capacity(spec.n_visual * d);
    for &coupled in &is_coupled {
        if coupled {
            let j = rng.gen_range(0..spec.n_textual);
            for c in 0..d {
                let t = text[j * d + c];
                vis.push(t + 0.5 * spec.cluster_spread * normal(&mut rng));
            }
        } else {
            let k = rng.gen_range(0..spec.n_clusters);
            for &c in center(k) {
                vis.push(c + spec.cluster_spread * normal(&mut rng));
            }
        }
    }

    let n_out = (spec.outlier_fraction * spec.n_visual as f64).round() as usize;
    for i in rand::seq::index::sample(&mut rng, spec.n_visual, n_out).iter() {
        for v in &mut vis[i * d..(i + 1) * d] {
            *v *= spec.outlier_scale;
        }
    }

    Ok((
        to_matrix(Modality::Visual, spec.n_visual, d, vis),
        to_matrix(Modality::Textual, spec.n_textual, d, text),
    ))
}

/// Standard normal textual tokens, and visual tokens each correlated with
/// one textual partner at a strength drawn uniformly from `[0, 1)`:
/// `v = rho * t + sqrt(1 - rho^2) * z`. Returns the per-row strengths too.
pub fn coupled_gaussian(
    n_visual: usize,
    n_textual: usize,
    dim: usize,
    seed: u64,
) -> (TokenMatrix, TokenMatrix, Vec<f64>) {
    let mut rng = rng(seed);
    let text: Vec<f64> = (0..n_textual * dim).map(|_| normal(&mut rng)).collect();
    let mut vis = Vec::with_capacity(n_visual * dim);
    let mut strengths = Vec::with_capacity(n_visual);
    for _ in 0..n_visual {
        let rho: f64 = rng.gen();
        let j = rng.gen_range(0..n_textual);
        let noise = (1.0 - rho * rho).sqrt();
        for c in 0..dim {
            vis.push(rho * text[j * dim + c] + noise * normal(&mut rng));
        }
        strengths.push(rho);
    }
    (
        to_matrix(Modality::Visual, n_visual, dim, vis),
        to_matrix(Modality::Textual, n_textual, dim, text),
        strengths,
    )
}

/// Independent standard normal rows.
pub fn standard_normal(modality: Modality, rows: usize, dim: usize, seed: u64) -> TokenMatrix {
    let mut rng = rng(seed);
    let data = (0..rows * dim).map(|_| normal(&mut rng)).collect();
    to_matrix(modality, rows, dim, data)
}

/// Per-dimension moments of sampled `visual_i - textual_j` differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    pub per_dim_mean: Vec<f64>,
    pub per_dim_std: Vec<f64>,
    pub grand_mean: f64,
    pub grand_std: f64,
    /// Standard deviation of `per_dim_std`; near zero for isotropic noise.
    pub std_dispersion: f64,
}

pub const DEFAULT_PAIR_SAMPLE: usize = 10_000;

/// Samples `pair_sample` uniform `(i, j)` pairs and fits mean and
/// (population) standard deviation of the difference in every coordinate.
pub fn diagnose_isotropy(
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    pair_sample: usize,
    seed: u64,
) -> Result<IsotropyReport> {
    if visual.dim() != textual.dim() {
        return Err(PruneError::DimMismatch {
            visual: visual.dim(),
            textual: textual.dim(),
        });
    }
    if pair_sample < 2 {
        return Err(PruneError::InvalidConfig("pair_sample must be at least 2".into()));
    }
    let d = visual.dim();
    let mut rng = rng(seed);
    // Welford accumulators per coordinate.
    let mut mean = vec![0.0f64; d];
    let mut m2 = vec![0.0f64; d];
    for count in 1..=pair_sample {
        let i = rng.gen_range(0..visual.rows());
        let j = rng.gen_range(0..textual.rows());
        let (v, t) = (visual.row(i), textual.row(j));
        for c in 0..d {
            let x = f64::from(v[c]) - f64::from(t[c]);
            let delta = x - mean[c];
            mean[c] += delta / count as f64;
            m2[c] += delta * (x - mean[c]);
        }
    }
    let std: Vec<f64> = m2.iter().map(|s| (s / pair_sample as f64).sqrt()).collect();
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let grand_mean = avg(&mean);
    let grand_std = avg(&std);
    let std_dispersion =
        (std.iter().map(|s| (s - grand_std).powi(2)).sum::<f64>() / d as f64).sqrt();
    Ok(IsotropyReport {
        per_dim_mean: mean,
        per_dim_std: std,
        grand_mean,
        grand_std,
        std_dispersion,
    })
}
