//! Writes a token matrix in both file formats and reads it back.

use prunekit::tokenset::{self, FileFormat};
use prunekit::{synth, Modality};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("prunekit-roundtrip");
    std::fs::create_dir_all(&dir)?;
    let tokens = synth::standard_normal(Modality::Textual, 4, 6, 11);
    for (name, format) in [("tokens.tpk", FileFormat::Binary), ("tokens.csv", FileFormat::Csv)] {
        let path = dir.join(name);
        tokenset::write_token_file(&tokens, &path, format)?;
        let back = tokenset::read_token_file(&path)?;
        let size = std::fs::metadata(&path)?.len();
        println!("{name}: {size} bytes, identical = {}", back.data() == tokens.data());
    }
    Ok(())
}
