//! Phased-array acoustics: focusing, field evaluation, modulation and
//! spatiotemporal shape paths.

mod array;
pub mod bessel;
mod field;
mod modulation;
mod stm;

use thiserror::Error;

pub use array::{clamp_to_frustum, focus_phases, resolve_focus, PhaseSolution, TransducerArray, QUALITY_SCALE};
pub use field::{field_slice, pressure_at, pressure_terms, Axis, Grid2D, SlicePlane, MAX_GRID_SAMPLES};
pub use modulation::{am_envelope, ModulationState};
pub use stm::{stm_path, StmPath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcousticsError {
    #[error("focus lies at or below the array surface (height {height} m)")]
    FocusBelowArray { height: f64 },
    #[error("focus height {height} m is below the minimum {min} m")]
    FocusTooClose { height: f64, min: f64 },
    #[error("point coincides with element {index}")]
    CoincidentWithElement { index: usize },
    #[error("point has non-finite coordinates")]
    NonFinitePoint,
    #[error("solution has {phases} phases and {amplitudes} amplitudes for {expected} elements")]
    LengthMismatch { expected: usize, phases: usize, amplitudes: usize },
    #[error("grid of {samples} samples exceeds the 1e6 limit")]
    OversizedGrid { samples: usize },
    #[error("resolution must be > 0 (got {0})")]
    InvalidResolution(f64),
    #[error("extent must be finite and non-negative")]
    InvalidExtent,
    #[error("path has zero length")]
    ZeroLengthPath,
    #[error("traversal speed and update rate must be > 0")]
    InvalidRate,
    #[error("invalid modulation: {0}")]
    InvalidModulation(&'static str),
}
