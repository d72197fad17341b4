//! Simulated multi-level compute-in-memory crossbar.
//!
//! Codes are stored on differential cell pairs whose conductances carry
//! level-dependent Gaussian variation. Read-out errors are modelled either as
//! discrete level flips through a [`TransitionMatrix`] or as analog
//! conductance noise inside [`Crossbar::mips`].

mod corpus;
mod cost;
mod crossbar;
mod mapping;
mod profile;
mod transition;

pub use corpus::QuantizedCorpus;
pub use cost::{int4_slicing_cost, slicing_cost, two_bit_native_cost, SlicingCost};
pub use crossbar::{crossbar_mips, ArraySpec, Crossbar};
pub use mapping::CellMapping;
pub use profile::{DeviceProfile, PRESET_NAMES};
pub use transition::{apply_flips, derive_transition_matrix, phi, TransitionMatrix};
