//! Objective of every method across first-stage ratios, averaged over
//! seeded trials.

use prunekit::bench;
use prunekit::synth::SynthSpec;

fn main() -> prunekit::error::Result<()> {
    let spec = SynthSpec { n_visual: 64, ..SynthSpec::default() };
    let sweep = bench::run_quality_sweep(&[spec], &[0.9, 0.75, 0.5], 8, 40)?;
    for cell in &sweep.grid {
        println!("ratio {:.2}", cell.stage1_ratio);
        for m in &cell.methods {
            println!(
                "  {:<14} objective {:.4} ± {:.4}  alignment {:+.4}",
                m.method, m.objective_mean, m.objective_std, m.alignment_mean
            );
        }
    }
    Ok(())
}
