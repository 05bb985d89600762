//! ROUGE-1 and ROUGE-L between a generated report and a reference.
//!
//!     cargo run --example score_reports [candidate.txt reference.txt]

use soapbench::rouge::{score_texts, tokenize, TokenizerOptions};

const GENERATED: &str = "S: Pain in the left ear for 4 days.\nO: Left eardrum red.\nA: Otitis media acuta left.\nP: Paracetamol, ctrl 1 wk.";
const REFERENCE: &str = "S: Earache left 4 days, worse at night.\nO: Eardrum left red and bulging.\nA: OMA left.\nP: Paracetamol as needed.";

fn main() -> std::io::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (candidate, reference) = match args.as_slice() {
        [c, r] => (std::fs::read_to_string(c)?, std::fs::read_to_string(r)?),
        _ => (GENERATED.to_string(), REFERENCE.to_string()),
    };

    println!("candidate tokens: {:?}", tokenize(&candidate).tokens());
    let scores = score_texts(&candidate, &reference, &TokenizerOptions::default());
    for (name, s) in [("ROUGE-1", scores.rouge1), ("ROUGE-L", scores.rouge_l)] {
        println!("{name}: precision {:.3}  recall {:.3}  f1 {:.3}", s.precision, s.recall, s.f1);
    }
    Ok(())
}
