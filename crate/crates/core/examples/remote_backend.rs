//! One request against an OpenAI-compatible endpoint.
//!
//!     SOAPBENCH_ENDPOINT=https://api.openai.com/v1 OPENAI_API_KEY=... \
//!         cargo run --example remote_backend
//!
//! Without SOAPBENCH_ENDPOINT the example only prints the request body.

use soapbench::corpus::load_corpus;
use soapbench::llm::{complete, BackendConfig};
use soapbench::prompt::{generate_matrix, render_prompt, PromptPack};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus"))?;
    let matrix = generate_matrix(&PromptPack::default(), &corpus.shots)?;
    let variant = matrix.iter().find(|v| v.id == "two-shot+a+b+c+d").expect("default matrix");
    let prompt = render_prompt(variant, &corpus.transcripts[0]);

    let Ok(endpoint) = std::env::var("SOAPBENCH_ENDPOINT") else {
        let request = BackendConfig::default().request(&prompt, 0);
        println!("{}", serde_json::to_string_pretty(&request.wire_body())?);
        eprintln!("set SOAPBENCH_ENDPOINT (and OPENAI_API_KEY) to send it");
        return Ok(());
    };
    let mut config = BackendConfig::remote(endpoint, "OPENAI_API_KEY");
    if let Ok(model) = std::env::var("SOAPBENCH_MODEL") {
        config.model = model;
    }
    let response = complete(&config, &config.request(&prompt, 0)).await?;
    println!("{}", response.text);
    eprintln!(
        "latency {:?}, tokens in/out {:?}/{:?}",
        response.latency, response.prompt_tokens, response.completion_tokens
    );
    Ok(())
}
