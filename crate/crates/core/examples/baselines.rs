//! Greedy, max-min, random and exhaustive selection on three tight clusters
//! plus one far token.

use prunekit::repmax;
use prunekit::{Modality, Selection, TokenMatrix};

fn main() -> prunekit::error::Result<()> {
    let mut rows: Vec<[f32; 3]> = Vec::new();
    for (c, centre) in [[1.0f32, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
        for k in 0..4 {
            let jitter = 0.05 * (k as f32 - 1.5);
            let mut r = *centre;
            r[(c + 1) % 3] += jitter;
            rows.push(r);
        }
    }
    rows.push([-0.6, -0.6, -0.5]);
    let outlier = rows.len() - 1;
    let tokens = TokenMatrix::from_rows(Modality::Visual, &rows).expect("finite rows");
    let sim = repmax::build_similarity(&tokens, &Selection::all(rows.len()))?;

    let runs = [
        ("greedy", repmax::greedy_repmax(&sim, 3)?),
        ("maxmin", repmax::maxmin_baseline(&sim, 3)?),
        ("random", repmax::random_baseline(rows.len(), 3, 7)?),
        ("exact", repmax::exact_solve(&sim, 3)?),
    ];
    for (name, sel) in runs {
        let has_outlier = sel.indices().contains(&outlier);
        println!(
            "{name:<7} {:?}  objective {:.4}  outlier {}",
            sel.indices(),
            repmax::objective(&sim, &sel)?,
            if has_outlier { "yes" } else { "no" }
        );
    }
    Ok(())
}
