//! Serve the annotation API over a fresh mock ledger.
//!
//!     cargo run --example annotation_server
//!     curl localhost:8765/api/session/2006/0

use soapbench::experiment::{run_experiment, ExperimentConfig};
use soapbench::serve::{serve, ServeConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/experiment.toml"))?;
    let out = std::env::temp_dir().join("soapbench-annotation-server");
    config.run.output_dir = out.clone();
    let outcome = run_experiment(&config).await?;

    let serve_config = ServeConfig {
        corpus: config.load_corpus()?,
        ledger: outcome.ledger,
        default_variant: "two-shot+a+b+c+d".into(),
        annotations_dir: out.join("annotations"),
        assets_dir: None,
        tokenizer: config.tokenizer,
    };
    println!("listening on http://127.0.0.1:8765");
    serve(serve_config, ([127, 0, 0, 1], 8765).into()).await?;
    Ok(())
}
