//! Scores visual tokens against a caption with each cross-modal metric and
//! keeps the best-aligned half.

use prunekit::alignment::{self, CrossMetric};
use prunekit::synth;

fn main() -> prunekit::error::Result<()> {
    let (visual, textual, strengths) = synth::coupled_gaussian(12, 3, 32, 4);
    for metric in [CrossMetric::L2, CrossMetric::Cosine, CrossMetric::KnnMi] {
        let scores = alignment::score(&visual, &textual, metric, 3)?;
        let top = alignment::select_top(&scores, 6)?;
        println!("{:>7}: keep {:?}", metric.to_string(), top.indices());
    }
    let mut by_strength: Vec<usize> = (0..strengths.len()).collect();
    by_strength.sort_by(|&a, &b| strengths[b].total_cmp(&strengths[a]));
    println!("planted: {:?}", {
        let mut s = by_strength[..6].to_vec();
        s.sort_unstable();
        s
    });
    Ok(())
}
