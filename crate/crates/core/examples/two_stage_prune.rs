//! Runs the default pipeline on a synthetic image/caption pair.

use prunekit::synth::{self, SynthSpec};
use prunekit::{prune, PruneConfig};

fn main() -> prunekit::error::Result<()> {
    let spec = SynthSpec { n_visual: 576, n_textual: 16, dim: 256, ..SynthSpec::default() };
    let (visual, textual) = synth::generate(&spec)?;
    let config = PruneConfig::new(64);
    let report = prune(&visual, &textual, &config)?;
    println!(
        "{} -> {} -> {} tokens, objective {:.4}",
        visual.rows(),
        report.stage1.len(),
        report.stage2.len(),
        report.objective_value.unwrap_or(f64::NAN)
    );
    println!(
        "stage1 {:.2} ms, stage2 {:.2} ms, total {:.2} ms",
        report.timings.stage1, report.timings.stage2, report.timings.total
    );
    println!("first picks: {:?}", &report.stage2.indices()[..8]);
    Ok(())
}
