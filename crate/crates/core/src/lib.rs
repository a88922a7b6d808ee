pub mod attrnet;
pub mod captioner;
pub mod doc2vec;
pub mod error;
pub mod evalkit;
pub mod knowledge;
pub mod numkit;
pub mod pipeline;
pub mod synth;
pub mod text;
pub mod vqalstm;

pub use error::{Error, Result};
