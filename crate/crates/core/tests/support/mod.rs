#![allow(dead_code)]

pub mod chunking;
pub mod comment_corpus;
pub mod hostile;
pub mod pure_programs;
pub mod types_gen;
