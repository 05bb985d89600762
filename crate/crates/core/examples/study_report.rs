//! Mock experiment followed by the combined study report with the fixture
//! annotations.

use soapbench::annotation::AnnotationSet;
use soapbench::experiment::{aggregate, run_experiment, ExperimentConfig};
use soapbench::report::{best_variant, render_study_report, StudyInputs};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let mut config = ExperimentConfig::load(format!("{fixtures}/experiment.toml"))?;
    config.run.output_dir = std::env::temp_dir().join("soapbench-study-report");

    let outcome = run_experiment(&config).await?;
    let aggregates = aggregate(&outcome.ledger)?;
    let annotations = AnnotationSet::load(format!("{fixtures}/annotations"))?;
    let corpus = config.load_corpus()?;
    let inputs = StudyInputs {
        corpus: &corpus,
        ledger: &outcome.ledger,
        aggregates: &aggregates,
        variant_id: best_variant(&aggregates).unwrap_or("two-shot"),
        annotations: Some(&annotations),
    };
    print!("{}", render_study_report(&inputs, &[])?);
    Ok(())
}
