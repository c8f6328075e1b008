//! Regulatory update monitoring: article ingest, entity and relation
//! extraction, data-model fusion, a domain knowledge graph and subscriber
//! alerting.

pub mod extract;
pub mod fuse;
pub mod ingest;
pub mod json;
pub mod kgraph;
pub mod lexicon;
pub mod ratio;
pub mod relate;
pub mod textcore;
pub mod notify;
