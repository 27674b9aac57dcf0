//! Executable checks for frequent hypercyclicity of weighted shifts and
//! translation semigroups on weighted function spaces.
//!
//! The crate is organised around the objects that appear in the theory:
//!
//! - [`weights`]: admissible weight functions and weight-level criteria
//!   (admissibility, hypercyclicity, chaos, `L_p` summability).
//! - [`dyadic`]: exact dyadic indices `k + j/2^n`, the Faber–Schauder hat
//!   system, coefficient extraction and reconstruction.
//! - [`shifts`]: sparse sequences, weighted pseudo-shifts and backward shifts,
//!   the `l_p^v` conjugacy and the `L_p` discretization.
//! - [`conjugacy`]: the maps between `C_0^rho` and `c_0(Z + D)` that intertwine
//!   translation with a weighted backward shift.
//! - [`freqdyn`]: lower densities, frequency sets, condition checkers, the
//!   explicit frequently hypercyclic vector and the frequency-set extractor.
//! - [`cli`]: config-driven experiment runner behind the `fhdyn` binary.
//!
//! Every asymptotic statement is checked up to an explicit horizon and the
//! horizon is carried in the corresponding report.

pub mod cli;
pub mod conjugacy;
pub mod dyadic;
pub mod error;
pub mod freqdyn;
pub mod numeric;
pub mod shifts;
pub mod weights;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Domain of a weight or function space: the real line or `[0, inf)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    FullLine,
    HalfLine,
}

impl Domain {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Domain::FullLine => x.is_finite(),
            Domain::HalfLine => x.is_finite() && x >= 0.0,
        }
    }
}
