//! Quality sweeps and pruning-overhead timings on synthetic data.
//!
//! A sweep cell is one (synthetic spec, stage-1 ratio) pair run over
//! `trials` seeds. Per cell it records, for every selector, the mean and
//! spread of the expected pairwise cosine dissimilarity of the kept set and
//! the mean alignment score of the kept tokens. When the stage-1 survivor set
//! is small enough for exhaustive search, each selector's objective is also
//! divided by the optimum.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment;
use crate::error::{PruneError, Result};
use crate::pipeline::{self, AblationOrder, PruneConfig};
use crate::repmax::{self, DEFAULT_ENUMERATION_CAP};
use crate::synth::{self, SynthSpec};
use crate::tokenset::{Modality, Selection};

/// Selectors compared in every sweep cell, in reporting order.
pub const METHODS: [&str; 6] = [
    "repmax",
    "maxmin",
    "random",
    "repmax-align",
    "align-only",
    "repmax-only",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub objective_mean: f64,
    pub objective_std: f64,
    /// Mean alignment score of the kept tokens.
    pub alignment_mean: f64,
    /// Mean objective / optimum, when the exhaustive oracle ran.
    pub ratio_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub spec: SynthSpec,
    pub stage1_ratio: f64,
    pub keep_final: usize,
    pub stage1_keep: usize,
    pub trials: usize,
    pub methods: Vec<MethodSummary>,
    /// Mean wall-clock of the full pipeline run, milliseconds.
    pub wall_ms_mean: f64,
}

impl CellSummary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<CellSummary>,
}

impl SweepResult {
    /// Equality ignoring wall-clock figures.
    pub fn same_quality(&self, other: &SweepResult) -> bool {
        let strip = |r: &SweepResult| {
            r.grid
                .iter()
                .map(|c| CellSummary {
                    wall_ms_mean: 0.0,
                    ..c.clone()
                })
                .collect::<Vec<_>>()
        };
        strip(self) == strip(other)
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = [
            "n_visual",
            "n_textual",
            "dim",
            "n_clusters",
            "cluster_spread",
            "outlier_fraction",
            "outlier_scale",
            "coupling",
            "seed",
            "stage1_ratio",
            "keep_final",
            "stage1_keep",
            "trials",
            "wall_ms_mean",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for m in METHODS {
            for field in ["objective_mean", "objective_std", "alignment_mean", "ratio_mean"] {
                header.push(format!("{m}_{field}"));
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for c in &self.grid {
            let s = &c.spec;
            let mut row = vec![
                s.n_visual.to_string(),
                s.n_textual.to_string(),
                s.dim.to_string(),
                s.n_clusters.to_string(),
                s.cluster_spread.to_string(),
                s.outlier_fraction.to_string(),
                s.outlier_scale.to_string(),
                s.coupling.to_string(),
                s.seed.to_string(),
                c.stage1_ratio.to_string(),
                c.keep_final.to_string(),
                c.stage1_keep.to_string(),
                c.trials.to_string(),
                c.wall_ms_mean.to_string(),
            ];
            for m in METHODS {
                let ms = c.method(m).expect("every method summarized");
                row.push(ms.objective_mean.to_string());
                row.push(ms.objective_std.to_string());
                row.push(ms.alignment_mean.to_string());
                row.push(ms.ratio_mean.map(|r| r.to_string()).unwrap_or_default());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

#[derive(Default)]
struct Acc {
    objective: Vec<f64>,
    alignment: Vec<f64>,
    ratio: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// One instance per trial, seeded `spec.seed + trial`.
fn run_cell(spec: &SynthSpec, ratio: f64, keep: usize, trials: usize) -> Result<CellSummary> {
    let config = PruneConfig::new(keep).with_ratio(ratio);
    let n1 = pipeline::resolve_n1(spec.n_visual, &config);
    let mut accs: Vec<Acc> = METHODS.iter().map(|_| Acc::default()).collect();
    let mut wall = Vec::with_capacity(trials);
    let oracle = repmax::binomial(n1, keep) <= DEFAULT_ENUMERATION_CAP;

    for trial in 0..trials {
        let inst = spec.with_seed(spec.seed.wrapping_add(trial as u64));
        let (visual, textual) = synth::generate(&inst)?;

        let main = pipeline::prune(&visual, &textual, &config)?;
        wall.push(main.timings.total);
        let stage1 = &main.stage1;
        let scores = &main.alignment_scores.values;

        let sim = repmax::build_similarity(&visual, stage1)?;
        let maxmin = repmax::maxmin_baseline(&sim, keep)?.remap(stage1.indices(), visual.rows())?;
        let random = repmax::random_baseline(n1, keep, inst.seed)?.remap(stage1.indices(), visual.rows())?;
        let exact = if oracle {
            let local = repmax::exact_solve(&sim, keep)?;
            Some(repmax::objective(&sim, &local)?)
        } else {
            None
        };

        let mut finals: Vec<Selection> = vec![main.stage2.clone(), maxmin, random];
        for order in [
            AblationOrder::RepMaxThenAlign,
            AblationOrder::AlignOnly,
            AblationOrder::RepMaxOnly,
        ] {
            finals.push(pipeline::prune_ablation(&visual, &textual, &config, order)?.stage2);
        }

        for (k, sel) in finals.iter().enumerate() {
            let obj = pipeline::set_objective(&visual, sel.indices(), config.intra_metric)?
                .expect("keep_final >= 2");
            let acc = &mut accs[k];
            acc.objective.push(obj);
            acc.alignment.push(mean(
                &sel.indices().iter().map(|&i| scores[i]).collect::<Vec<_>>(),
            ));
            // Only selectors confined to the stage-1 survivors share the
            // oracle's search space.
            if let (Some(best), true) = (exact, k < 3) {
                acc.ratio.push(if best > 0.0 { obj / best } else { 1.0 });
            }
        }
    }

    let methods = METHODS
        .iter()
        .zip(accs)
        .map(|(name, a)| MethodSummary {
            method: name.to_string(),
            objective_mean: mean(&a.objective),
            objective_std: sample_std(&a.objective),
            alignment_mean: mean(&a.alignment),
            ratio_mean: (!a.ratio.is_empty()).then(|| mean(&a.ratio)),
        })
        .collect();

    Ok(CellSummary {
        spec: spec.clone(),
        stage1_ratio: ratio,
        keep_final: keep,
        stage1_keep: n1,
        trials,
        methods,
        wall_ms_mean: mean(&wall),
    })
}

/// Runs every (spec, ratio) cell for `trials` seeded instances.
pub fn run_quality_sweep(
    specs: &[SynthSpec],
    ratios: &[f64],
    keep_final: usize,
    trials: usize,
) -> Result<SweepResult> {
    if trials == 0 {
        return Err(PruneError::InvalidConfig("trials must be at least 1".into()));
    }
    if keep_final < 2 {
        return Err(PruneError::InvalidConfig(
            "sweeps need keep_final >= 2 for a defined objective".into(),
        ));
    }
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(PruneError::InvalidConfig(format!("ratio {r} must lie in (0, 1]")));
        }
    }
    for s in specs {
        s.validate()?;
        if keep_final > s.n_visual {
            return Err(PruneError::KeepOutOfRange {
                keep: keep_final,
                available: s.n_visual,
            });
        }
    }
    let cells: Vec<(&SynthSpec, f64)> = specs
        .iter()
        .flat_map(|s| ratios.iter().map(move |&r| (s, r)))
        .collect();
    let grid = cells
        .into_par_iter()
        .map(|(s, r)| run_cell(s, r, keep_final, trials))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(v: &[f64]) -> Stats {
        Stats {
            mean: mean(v),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub keep_final: usize,
    pub stage1_keep: usize,
    pub repeats: usize,
    pub stage1_ms: Stats,
    pub stage2_ms: Stats,
    pub total_ms: Stats,
}

impl TimingSummary {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n", "m", "d", "keep_final", "stage1_keep", "repeats"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        let mut row = vec![
            self.n.to_string(),
            self.m.to_string(),
            self.d.to_string(),
            self.keep_final.to_string(),
            self.stage1_keep.to_string(),
            self.repeats.to_string(),
        ];
        for (name, s) in [("stage1", self.stage1_ms), ("stage2", self.stage2_ms), ("total", self.total_ms)] {
            for (field, v) in [("mean", s.mean), ("min", s.min), ("max", s.max)] {
                header.push(format!("{name}_ms_{field}"));
                row.push(v.to_string());
            }
        }
        w.write_record(&header).expect("in-memory write");
        w.write_record(&row).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Times the full pipeline (default ratio and metrics) on standard normal
/// inputs of the given geometry. One warm-up run precedes `repeats` timed
/// runs; runs are sequential.
pub fn run_timing(n: usize, m: usize, d: usize, keep_final: usize, repeats: usize) -> Result<TimingSummary> {
    run_timing_with(&PruneConfig::new(keep_final), n, m, d, repeats)
}

pub fn run_timing_with(
    config: &PruneConfig,
    n: usize,
    m: usize,
    d: usize,
    repeats: usize,
) -> Result<TimingSummary> {
    if repeats < 3 {
        return Err(PruneError::InvalidConfig("timing needs at least 3 repeats".into()));
    }
    let visual = synth::standard_normal(Modality::Visual, n, d, 0x5eed);
    let textual = synth::standard_normal(Modality::Textual, m, d, 0x5eed + 1);
    let (mut s1, mut s2, mut tot) = (Vec::new(), Vec::new(), Vec::new());
    for run in 0..=repeats {
        let start = Instant::now();
        let report = pipeline::prune(&visual, &textual, config)?;
        let total = start.elapsed().as_secs_f64() * 1e3;
        if run == 0 {
            continue;
        }
        s1.push(report.timings.stage1);
        s2.push(report.timings.stage2);
        tot.push(total);
    }
    Ok(TimingSummary {
        n,
        m,
        d,
        keep_final: config.keep_final,
        stage1_keep: pipeline::resolve_n1(n, config),
        repeats,
        stage1_ms: Stats::of(&s1),
        stage2_ms: Stats::of(&s2),
        total_ms: Stats::of(&tot),
    })
}

/// Mean alignment score of the kept tokens.
pub fn alignment_mass(scores: &alignment::AlignmentScores, kept: &[usize]) -> f64 {
    mean(&kept.iter().map(|&i| scores.values[i]).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            n_visual: 12,
            n_textual: 4,
            dim: 8,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn no_pruning_cell_is_flat() {
        let r = run_quality_sweep(&[small()], &[1.0], 12, 3).unwrap();
        let cell = &r.grid[0];
        let full = cell.method("repmax").unwrap().objective_mean;
        for m in &cell.methods {
            assert!((m.objective_mean - full).abs() < 1e-12, "{}", m.method);
        }
        for name in ["repmax", "maxmin", "random"] {
            assert!((cell.method(name).unwrap().ratio_mean.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_cells_agree() {
        let r = run_quality_sweep(&[small(), small()], &[0.75], 4, 5).unwrap();
        let a = CellSummary { wall_ms_mean: 0.0, ..r.grid[0].clone() };
        let b = CellSummary { wall_ms_mean: 0.0, ..r.grid[1].clone() };
        assert_eq!(a, b);
        let again = run_quality_sweep(&[small(), small()], &[0.75], 4, 5).unwrap();
        assert!(r.same_quality(&again));
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let r = run_quality_sweep(&[small()], &[0.75, 1.0], 3, 2).unwrap();
        let text = r.to_csv();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("repmax_ratio_mean"));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(run_quality_sweep(&[small()], &[1.0], 4, 0).is_err());
        assert!(run_quality_sweep(&[small()], &[1.5], 4, 1).is_err());
        assert!(run_quality_sweep(&[small()], &[1.0], 1, 1).is_err());
        assert!(run_quality_sweep(&[small()], &[1.0], 13, 1).is_err());
    }

    #[test]
    fn timing_harness_contract() {
        let t = run_timing(40, 4, 16, 8, 3).unwrap();
        assert_eq!(t.repeats, 3);
        assert_eq!(t.stage1_keep, 32);
        assert!(t.total_ms.min <= t.total_ms.mean && t.total_ms.mean <= t.total_ms.max);
        assert!(run_timing(40, 4, 16, 8, 2).is_err());
        assert_eq!(t.to_csv().lines().count(), 2);
    }
}
