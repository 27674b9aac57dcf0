//! Frequency sets and lower densities, the condition checkers for
//! frequent hypercyclicity of pseudo-shifts and translation semigroups, the
//! explicit frequently hypercyclic vector and the frequency-set extractor.

mod checks;
mod construct;
mod density;
mod sets;

pub use checks::*;
pub use construct::*;
pub use density::*;
pub use sets::*;
