//! Parse two SOAP reports and compare their section lengths.

use soapbench::report::{render_word_count_table, WordCountRow};
use soapbench::soap::{parse_soap, render_soap, section_word_counts};

fn main() {
    let generated = parse_soap(
        "**S:** Patient reports an itchy right ear after swimming, with some discharge.\n\
         O: Right ear canal swollen.\n\
         A: Otitis externa right.\n\
         P: Ear drops three times a day for a week. Keep the ear dry.\n\
         NB: Follow-up for hearing test in three months.",
    )
    .expect("markers present");
    let reference = parse_soap("S: Itchy ear re after swimming.\nO: Canal swollen.\nA: OE re.\nP: Drops 1 wk.").unwrap();

    println!("canonical form:\n{}\n", render_soap(&generated));
    println!("addendum kept aside: {:?}\n", generated.extra);

    let cmp = section_word_counts(&generated, &reference);
    print!("{}", render_word_count_table(&[WordCountRow::from_comparison("example", &cmp)]));
}
