//! Semi-analytic solver for the converging Güderley shock and its reflected
//! continuation, together with an exact-rational polynomial sign certifier.
//!
//! The pipeline runs `collapse` (similarity exponent and the trajectory from
//! the incoming shock to the origin), `continuation` (passage through the
//! origin and the maximal smooth extension), `reflected` (matching to the
//! trajectory from `P∞` across an admissible shock) and `fields` (physical
//! reconstruction and verification).

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collapse;
pub mod continuation;
pub mod error;
pub mod fields;
pub mod jump_map;
pub mod ode_engine;
pub mod origin_series;
pub mod phase_plane;
pub mod polycert;
pub mod reflected;
pub mod roots;

pub use error::{Error, Result};
pub use phase_plane::{CriticalPointSet, Params, PhasePoint, Triple};
