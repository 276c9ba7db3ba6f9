//! Generates a synthetic pair and checks whether visual-text differences
//! look like isotropic Gaussian noise.

use prunekit::synth::{self, SynthSpec, DEFAULT_PAIR_SAMPLE};

fn main() -> prunekit::error::Result<()> {
    for coupling in [0.0, 0.9] {
        let spec = SynthSpec { coupling, ..SynthSpec::default() };
        let (visual, textual) = synth::generate(&spec)?;
        let report = synth::diagnose_isotropy(&visual, &textual, DEFAULT_PAIR_SAMPLE, 1)?;
        println!(
            "coupling {coupling:.1}: grand mean {:+.4}, grand std {:.4}, std dispersion {:.4}",
            report.grand_mean, report.grand_std, report.std_dispersion
        );
    }
    Ok(())
}
