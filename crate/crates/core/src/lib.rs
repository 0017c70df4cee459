// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod factorizer;
pub mod lexicon;
pub mod network;
pub mod pipeline;
pub mod seeding;
pub mod synth;
pub mod trends;
pub mod attitude;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/corpus.md")]
mod book_corpus {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/model.md")]
mod book_model {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lexicon.md")]
mod book_lexicon {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/networks.md")]
mod book_networks {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/trends.md")]
mod book_trends {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pipeline.md")]
mod book_pipeline {}
