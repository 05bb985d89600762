//! Full experiment on the fixture corpus with the offline mock backend:
//! run, aggregate and print the score table. Running it twice reuses the
//! ledger and makes no backend calls.

use soapbench::experiment::{aggregate, render_table, run_experiment, write_aggregates, ExperimentConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/experiment.toml"))?;
    config.run.output_dir = std::env::temp_dir().join("soapbench-mock-experiment");

    let outcome = run_experiment(&config).await?;
    println!(
        "{} new runs, {} reused, {} backend calls",
        outcome.new_records, outcome.skipped, outcome.backend_calls
    );

    let report = aggregate(&outcome.ledger)?;
    write_aggregates(&config.run.output_dir, &report)?;
    print!("{}", render_table(&report));
    println!("written to {}", config.run.output_dir.display());
    Ok(())
}
