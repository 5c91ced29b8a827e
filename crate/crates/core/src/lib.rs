//! Knowledge-graph question answering by iterative retrieval and multi-role question simplification.

// Failures carry their partial trace by value.
#![allow(clippy::result_large_err)]

pub mod cli;
pub mod debate;
pub mod eval;
pub mod kg;
pub mod llm;
pub mod oracle;
pub mod prompts;
pub mod reasoner;
pub mod synth;
pub mod text;

#[cfg(test)]
mod testutil;
