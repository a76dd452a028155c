//! Regenerates the bundled synthetic fixtures under `fixtures/`.
//!
//!     cargo run --example generate_fixtures

use irony_agents::data::{self, DatasetName, FIXTURE_SEED};

fn main() -> std::io::Result<()> {
    std::fs::create_dir_all(data::fixtures_dir())?;
    for name in DatasetName::BENCHMARKS {
        let samples = data::synthetic(name, FIXTURE_SEED);
        let path = data::fixture_path(name);
        data::write_jsonl(&path, &samples)?;
        let stats = data::summarize(&samples);
        println!(
            "{:<14} {:>5} samples  avg {:>3} tokens  ironic {:>4}  -> {}",
            name.title(),
            stats.size,
            stats.avg_length,
            stats.ironic,
            path.display()
        );
    }
    Ok(())
}
