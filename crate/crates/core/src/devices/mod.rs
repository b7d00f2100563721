//! Analytic device models and their calibration.

pub mod calibration;
pub mod memristor;
pub mod mosfet;

pub use calibration::{
    calibrate_mn2, calibrate_nmos_io, pmos_from_nmos, CurrentAnchor, Mn2Calibration, IO_ANCHORS, IO_ANCHOR_VDS,
    MIN_LEVEL_SPACING,
};
pub use memristor::{
    lrs_from_compliance, stochastic_lrs, MemristorParams, MemristorState, ProgrammingAnchor, ResistiveMode,
};
pub use mosfet::{
    drain_current, small_signal, MosfetGeometry, MosfetParams, Polarity, SmallSignal, Transistor, V_THERMAL,
};
