//! Prompt-engineering experiment harness for generating SOAP medical reports
//! from consultation transcripts.
//!
//! The pipeline: load a [`corpus`], build the [`prompt`] variant matrix, run
//! every variant against an [`llm`] backend several times per transcript,
//! score each output against the human reference with [`rouge`], and
//! aggregate per variant in [`experiment`]. [`annotation`] holds the data model
//! and tallies for the manual error analysis.

pub mod annotation;
pub mod cli;
pub mod corpus;
pub mod experiment;
pub mod llm;
pub mod prompt;
pub mod report;
pub mod rouge;
pub mod serve;
pub mod soap;
pub mod stats;
