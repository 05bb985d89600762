//! Load a corpus directory, validate it and print word-count statistics.

use soapbench::corpus::{corpus_stats, load_corpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus").into());
    let corpus = load_corpus(&root)?;
    let stats = corpus_stats(&corpus)?;
    for t in &corpus.transcripts {
        let reference = corpus.reference(&t.id).expect("validated corpus");
        println!("{}: transcript {:>5} words, reference {:>3} words", t.id, t.word_count, reference.word_count);
    }
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
