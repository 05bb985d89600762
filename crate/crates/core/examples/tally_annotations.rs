//! Tally the shipped annotation files: deduplicated error counts and the
//! relevance vote distribution.

use soapbench::annotation::{render_error_tally, render_relevance, tally_errors, tally_relevance, AnnotationSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/annotations").into());
    let set = AnnotationSet::load(&dir)?;
    let raw = set.annotations().count();
    let tally = tally_errors(set.annotations());
    println!("{raw} annotations, {} distinct errors after per-consultation dedup\n", tally.total);
    print!("{}", render_error_tally(&tally));
    println!();
    print!("{}", render_relevance(&tally_relevance(set.votes())?));
    Ok(())
}
