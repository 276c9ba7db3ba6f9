//! Steps the greedy selector by hand and prints the running similarity
//! accumulator after every pick.

use prunekit::repmax::{self, GreedyState};
use prunekit::{Modality, Selection, TokenMatrix};

fn main() -> prunekit::error::Result<()> {
    let tokens = TokenMatrix::from_rows(
        Modality::Visual,
        &[[1.0f32, 0.0], [0.98, 0.2], [0.0, 1.0], [-0.7, 0.7], [0.9, -0.4]],
    )
    .expect("finite rows");
    let sim = repmax::build_similarity(&tokens, &Selection::all(tokens.rows()))?;

    let mut state = GreedyState::new(&sim);
    while let Some(pick) = state.step() {
        let sigma: Vec<String> = state.sigma().iter().map(|s| format!("{s:+.3}")).collect();
        println!("pick {pick}  sigma [{}]", sigma.join(" "));
        if state.step_count() == 3 {
            break;
        }
    }
    let chosen = state.into_selection();
    println!("objective {:.4}", repmax::objective(&sim, &chosen)?);
    Ok(())
}
