//! Writes a synthetic graph and 1/2/3-hop question files for the `dog` binary.
//!
//! ```text
//! cargo run --example synth_fixture -- /tmp/synth
//! dog eval --kg /tmp/synth/kb.txt --provider oracle --dataset /tmp/synth/qa_3hop.tsv --dataset-format tabular
//! ```

use std::fs;
use std::path::PathBuf;

use dog_kgqa::synth::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth".into()));
    let seed = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(0);
    fs::create_dir_all(&dir)?;
    let fixture = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    });
    fs::write(dir.join("kb.txt"), fixture.kb_text())?;
    for k in 1..=3 {
        fs::write(dir.join(format!("qa_{k}hop.tsv")), fixture.tabular(k))?;
    }
    println!(
        "wrote {} triples and 3 x {} questions to {}",
        fixture.kg.triple_count(),
        fixture.chains.len(),
        dir.display()
    );
    Ok(())
}
