//! Binary LDPC coding for the q-ary symmetric channel with a symbol-aware
//! decoder front-end, plus the capacity, EXIT, design and construction
//! tools around it.

pub mod channel;
pub mod code;
pub mod construct;
pub mod design;
pub mod error;
pub mod exit;
pub mod frontend;
pub mod harness;
pub mod layered;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
