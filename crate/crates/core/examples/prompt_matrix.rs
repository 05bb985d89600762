//! List the prompt variants and print one fully rendered prompt.
//!
//!     cargo run --example prompt_matrix [variant-id]

use soapbench::corpus::load_corpus;
use soapbench::prompt::{generate_matrix, render_prompt, PromptPack};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus"))?;
    let pack = PromptPack::default();
    let matrix = generate_matrix(&pack, &corpus.shots)?;
    for v in &matrix {
        println!("{:<20} {} example(s), contexts [{}]", v.id, v.shots.examples.len(), v.context_set());
    }

    let wanted = std::env::args().nth(1).unwrap_or_else(|| "two-shot+a+b+c+d".into());
    let variant = matrix.iter().find(|v| v.id == wanted).ok_or("unknown variant")?;
    let prompt = render_prompt(variant, &corpus.transcripts[0]);
    let text = prompt.to_text();
    // The transcript is long; show the head of the prompt only.
    let head: String = text.lines().take(40).collect::<Vec<_>>().join("\n");
    println!("\n{head}\n...");
    Ok(())
}
