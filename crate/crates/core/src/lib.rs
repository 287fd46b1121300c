pub mod constraints;
pub mod dataprep;
pub mod decoder;
pub mod diversifier;
pub mod engine;
pub mod eval;
pub mod lexicon;
pub mod scorer;
pub mod session;
pub mod suggest;
pub mod tokenizer;
