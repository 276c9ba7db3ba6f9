//! Compares greedy selection with exhaustive search on small random sets.

use prunekit::repmax;
use prunekit::{synth, Modality, Selection};

fn main() -> prunekit::error::Result<()> {
    let (mut worst, mut total) = (1.0f64, 0.0);
    let trials = 50;
    for seed in 0..trials {
        let tokens = synth::standard_normal(Modality::Visual, 12, 8, seed);
        let sim = repmax::build_similarity(&tokens, &Selection::all(12))?;
        let greedy = repmax::objective(&sim, &repmax::greedy_repmax(&sim, 5)?)?;
        let exact = repmax::objective(&sim, &repmax::exact_solve(&sim, 5)?)?;
        let ratio = greedy / exact;
        worst = worst.min(ratio);
        total += ratio;
    }
    println!("greedy/exact over {trials} sets: mean {:.4}, worst {worst:.4}", total / trials as f64);
    Ok(())
}
