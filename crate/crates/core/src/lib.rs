//! Automatic sense annotation of raw corpora.
//!
//! The pipeline runs in three steps over a WordNet-like semantic graph:
//!
//! 1. [`profiler`]: a Personalized PageRank lexical profile for every synset.
//! 2. [`scorer`]: a distribution over the candidate senses of each target
//!    word occurrence, from the product of per-word profile probabilities.
//! 3. [`ranker`]: per-sense selection of the most confident occurrences,
//!    with a Zipf-shaped quota over the sense ordering.
//!
//! [`pipeline`] ties these together over a corpus file and computes the
//! corpus statistics; [`cli`] exposes it as the `senseforge` binary.

pub mod cli;
pub mod graph;
pub mod pipeline;
pub mod profiler;
pub mod ranker;
pub mod scorer;
