#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod benders;
pub mod fixtures;
pub mod forecast;
pub mod formulation;
pub mod lp;
pub mod model;
pub mod simulator;
