//! Independent reference implementations used as test oracles.
#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod ap_reference;
pub mod f_oracle;
pub mod grad_check;
