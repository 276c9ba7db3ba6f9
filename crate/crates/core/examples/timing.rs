//! Wall-clock timing of the full pipeline at a typical image-token count.

use prunekit::bench;

fn main() -> prunekit::error::Result<()> {
    let summary = bench::run_timing(576, 32, 1024, 64, 5)?;
    print!("{}", summary.to_csv());
    Ok(())
}
