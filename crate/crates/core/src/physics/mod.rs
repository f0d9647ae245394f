//! Superconducting-gap model and quasiparticle dynamics behind burst recovery.

mod gap;
mod qp;

pub use gap::{gap_difference_ghz, gap_of_thickness, GapDifference, GapModel, JunctionStack, PLANCK_EV_S};
pub use qp::{
    excess_gamma1, gamma1_of, integrate_fixed, qp_step, recovery_time_model, rk4_step, trajectory, trajectory_csv,
    QpModelParams, QpState, MAX_RELATIVE_CHANGE,
};
pub(crate) use qp::advance;
