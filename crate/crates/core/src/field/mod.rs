//! Static control-field design: electrode and wire arrays, the induced
//! shift profile along the storage axis, and its linearity.

pub mod laplace;
pub mod layout;
pub mod linearity;
pub mod map;
pub mod wires;

pub use layout::{ArrayFamily, Electrode, ElectrodeLayout};
pub use linearity::{linearity_fit, linearity_report, LinearityReport};
pub use map::{
    core_samples, max_field, sample_wires, shift_profile, solve_dirichlet_box, solve_potential, CoreBand, FieldKind, FieldMap, GridSpec,
    RegionBoundary, ShiftProfile,
};
pub use wires::{wire_field, Wire, WireLayout};
