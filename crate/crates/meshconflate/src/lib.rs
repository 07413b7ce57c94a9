//! File formats, configuration and command drivers around
//! [`meshconflate_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod pipeline;

pub use meshconflate_core as core;
