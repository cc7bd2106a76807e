pub mod emit;
pub mod ltl;
pub mod model;
pub mod parse;
pub mod synth;
pub mod validate;
pub mod valuation;
pub mod verify;
