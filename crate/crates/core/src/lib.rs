#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod arithmetic;
pub mod evalharness;
pub mod experts;
pub mod extractor;
pub mod numword;
pub mod router;
pub mod templates;
