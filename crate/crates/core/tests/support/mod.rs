//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod bus;
pub mod corpus;
pub mod gae;
pub mod gradient;
pub mod reward;
