use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Planck constant, eV·s.
pub const PLANCK_EV_S: f64 = 4.135667696e-15;

/// Thin-film aluminium gap `Δ(d) = Δ_bulk + α / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapModel {
    /// µeV
    pub delta_bulk: f64,
    /// µeV·nm
    pub alpha: f64,
}

impl Default for GapModel {
    fn default() -> Self {
        Self {
            delta_bulk: 180.0,
            alpha: 600.0,
        }
    }
}

/// Double-angle-evaporated junction: thin bottom layer, thick top layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionStack {
    pub d_bottom_nm: f64,
    pub d_top_nm: f64,
    pub f_q_ghz: f64,
    /// An extra inactive junction (Dolan bridge) acts as a quasiparticle trap.
    pub has_builtin_trap: bool,
}

/// Gap energy for film thickness `d_nm`, µeV.
pub fn gap_of_thickness(model: &GapModel, d_nm: f64) -> Result<f64> {
    if !(d_nm > 0.0) {
        return Err(Error::InvalidArgument(format!("thickness must be positive, got {d_nm}")));
    }
    Ok(model.delta_bulk + model.alpha / d_nm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDifference {
    /// `|Δ_bottom - Δ_top| / h`, GHz.
    pub ghz: f64,
    /// `h f_q > δΔ`: a quasiparticle can cross by absorbing the qubit energy,
    /// so gap engineering offers no protection.
    pub below_qubit_energy: bool,
}

pub fn gap_difference_ghz(stack: &JunctionStack, model: &GapModel) -> Result<GapDifference> {
    let lo = gap_of_thickness(model, stack.d_bottom_nm)?;
    let hi = gap_of_thickness(model, stack.d_top_nm)?;
    let ghz = (lo - hi).abs() * 1e-6 / PLANCK_EV_S * 1e-9;
    Ok(GapDifference {
        ghz,
        below_qubit_energy: stack.f_q_ghz > ghz,
    })
}
