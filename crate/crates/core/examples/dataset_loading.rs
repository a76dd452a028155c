//! Loads a CSV export with custom column names and label values, prints
//! summary statistics and converts it to canonical JSONL. Also shows how
//! unmappable labels are reported.
//!
//!     cargo run --example dataset_loading

use irony_agents::data::{self, DatasetName, DatasetSpec, FieldMapping};

const CSV: &str = "\
tweet_id;tweet;is_sarcastic;thread
t1;I just love waiting on hold for an hour.;yes;\"[\"\"A: Support line again?\"\"]\"
t2;The new release fixed the crash.;no;
t3;Oh sure, because that worked so well last time.;yes;A: Let's try the old plan.
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("tweets.csv");
    std::fs::write(&path, CSV)?;

    let mapping = FieldMapping {
        text_column: "tweet".into(),
        label_column: Some("is_sarcastic".into()),
        positive_label: "yes".into(),
        negative_label: "no".into(),
        context_column: Some("thread".into()),
        id_column: Some("tweet_id".into()),
        delimiter: ';',
    };
    let spec = DatasetSpec::csv(DatasetName::Custom, &path, mapping.clone());
    let samples = data::load(&spec)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&data::summarize(&samples))?
    );
    print!("{}", data::to_jsonl(&samples));

    std::fs::write(&path, CSV.replace(";no;", ";maybe;"))?;
    match data::load(&DatasetSpec::csv(DatasetName::Custom, &path, mapping)) {
        Ok(_) => println!("unexpectedly loaded"),
        Err(e) => println!("error: {e}"),
    }

    for name in DatasetName::BENCHMARKS {
        let stats = data::summarize(&data::load_fixture(name)?);
        println!(
            "{:<14} {:>5} samples, avg {} tokens",
            name.title(),
            stats.size,
            stats.avg_length
        );
    }
    Ok(())
}
