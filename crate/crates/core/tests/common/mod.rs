//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod experiments;
pub mod gradcheck;
pub mod grounding;
pub mod oracles;
