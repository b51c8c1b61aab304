//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod cases;
pub mod mpc_cases;
pub mod passage_oracle;
pub mod paths;
pub mod qp_oracle;
