pub mod classify;
pub mod config;
pub mod container;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod metric;
pub mod position;
pub mod principal;
pub mod rng;
pub mod selftest;
pub mod synth;
pub mod text;
