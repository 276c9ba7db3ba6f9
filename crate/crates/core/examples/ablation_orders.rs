//! Runs the four stage orderings on the same inputs.

use prunekit::bench::alignment_mass;
use prunekit::synth::{self, SynthSpec};
use prunekit::{prune_ablation, AblationOrder, PruneConfig};

fn main() -> prunekit::error::Result<()> {
    let (visual, textual) = synth::generate(&SynthSpec { n_visual: 96, ..SynthSpec::default() })?;
    let config = PruneConfig::new(12);
    println!("{:<14} {:>10} {:>10}", "order", "objective", "alignment");
    for order in AblationOrder::ALL {
        let report = prune_ablation(&visual, &textual, &config, order)?;
        println!(
            "{:<14} {:>10.4} {:>10.4}",
            order.to_string(),
            report.objective_value.unwrap_or(f64::NAN),
            alignment_mass(&report.alignment_scores, report.stage2.indices())
        );
    }
    Ok(())
}
