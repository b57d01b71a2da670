//! Quantitative budgets: cooling limits, off-resonant transition
//! probabilities, weak-coupling and Lamb-Dicke margins, Stark shifts and the
//! speed limits of sideband pulses.
//!
//! Everything here is a closed-form estimate; the simulator provides the
//! matching time-resolved curves (see the off-resonant helpers in the
//! interaction module) so the two can be cross-checked.

use crate::constants::{HBAR, PLANCK};
use crate::trap::IonSpecies;
use crate::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Inputs of the laser-cooling limits.
#[derive(Debug, Clone, Copy)]
pub struct CoolingParams {
    /// Natural linewidth of the cooling transition, rad/s.
    pub linewidth: f64,
    /// Axial trap frequency, rad/s.
    pub omega_z: f64,
    /// Laser detuning below the atomic frequency, rad/s.
    pub detuning: f64,
    /// Radiation-pattern factor; 2/5 for dipole emission.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoolingLimits {
    /// Doppler-limit mean phonon number at the given detuning.
    pub doppler_nbar: f64,
    /// Doppler limit at the optimal detuning, the 0.7 linewidth/omega_z form
    /// (zero-point 1/2 dropped).
    pub doppler_optimal_nbar: f64,
    /// Sideband-cooling limit (linewidth/omega_z)^2 (alpha + 1/2).
    pub sideband_nbar: f64,
}

pub fn cooling_limits(p: &CoolingParams) -> Result<CoolingLimits> {
    if !(p.linewidth > 0.0) || !(p.omega_z > 0.0) {
        return Err(Error::physics("linewidth and trap frequency must be positive"));
    }
    if !(p.detuning > 0.0) {
        return Err(Error::physics("the Doppler limit needs a positive detuning"));
    }
    if !p.alpha.is_finite() || p.alpha < 0.0 {
        return Err(Error::physics("pattern factor must be finite and non-negative"));
    }
    let ratio = p.linewidth / p.omega_z;
    let lorentzian = p.linewidth / p.detuning + p.detuning / p.linewidth;
    Ok(CoolingLimits {
        doppler_nbar: ratio * (1.0 + p.alpha) / 4.0 * lorentzian - 0.5,
        doppler_optimal_nbar: 0.7 * ratio,
        sideband_nbar: ratio * ratio * (p.alpha + 0.5),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EitEstimates {
    /// Stark light shift of the strong dressing beam, rad/s.
    pub stark_shift: f64,
    /// Fractional Rabi-frequency blur caused by thermal spectator modes.
    pub rabi_fluctuation: f64,
}

/// `spectators` lists (eta, nbar) for every motional mode except the bus.
pub fn eit_estimates(delta_r: f64, omega_r: f64, spectators: &[(f64, f64)]) -> EitEstimates {
    let stark = ((delta_r * delta_r + omega_r * omega_r).sqrt() - delta_r.abs()) / 2.0;
    let blur = spectators
        .iter()
        .map(|&(eta, nbar)| eta.powi(4) * nbar * (nbar + 1.0))
        .sum::<f64>()
        .sqrt();
    EitEstimates { stark_shift: stark, rabi_fluctuation: blur }
}

/// Peak off-resonant excitation probabilities and the weak-coupling margins
/// they define. Ratios are raw; probabilities are capped at 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OffresBudget {
    pub p_blue: f64,
    pub p_red: f64,
    pub p_carrier: f64,
    /// |lambda| eta sqrt(n+1) / nu.
    pub margin_blue: f64,
    /// |lambda| eta sqrt(n) / nu.
    pub margin_red: f64,
    /// |lambda| / nu.
    pub margin_carrier: f64,
    /// Differential light shift on a red-sideband pulse, rad/s.
    pub stark_shift: f64,
}

/// |lambda|^2 / (2 nu): the level shift a resonant red-sideband pulse picks
/// up from the off-resonant carrier.
pub fn stark_shift(lambda_mag: f64, nu: f64) -> f64 {
    lambda_mag * lambda_mag / (2.0 * nu)
}

pub fn offres_report(lambda_mag: f64, eta: f64, n: usize, nu: f64) -> Result<OffresBudget> {
    if !(nu > 0.0) {
        return Err(Error::physics("mode frequency must be positive"));
    }
    if !(lambda_mag >= 0.0) || !(eta >= 0.0) || !lambda_mag.is_finite() || !eta.is_finite() {
        return Err(Error::physics("coupling and eta must be finite and non-negative"));
    }
    let nf = n as f64;
    let margin_blue = lambda_mag * eta * (nf + 1.0).sqrt() / nu;
    let margin_red = lambda_mag * eta * nf.sqrt() / nu;
    let margin_carrier = lambda_mag / nu;
    Ok(OffresBudget {
        p_blue: (margin_blue * margin_blue).min(1.0),
        p_red: (margin_red * margin_red).min(1.0),
        p_carrier: (margin_carrier * margin_carrier).min(1.0),
        margin_blue,
        margin_red,
        margin_carrier,
        stark_shift: stark_shift(lambda_mag, nu),
    })
}

/// eta sqrt(nbar + 1/2); well inside the Lamb-Dicke limit when << 1.
pub fn lamb_dicke_margin(eta: f64, nbar: f64) -> f64 {
    eta * (nbar + 0.5).sqrt()
}

/// Speed floor of sideband pulses at a given infidelity allowance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimingReport {
    /// Single-ion recoil energy at the projected wave number, J.
    pub recoil_energy: f64,
    /// Recoil energy over h, Hz.
    pub recoil_frequency: f64,
    /// Single-ion Lamb-Dicke parameter sqrt(E_r / (hbar omega_z)).
    pub eta: f64,
    /// Shortest red-sideband pi pulse compatible with the fidelity, s.
    pub t_b: f64,
    /// Gate floor 2 (T_A + Q T_B) for a Q-ion CNOT, s.
    pub t_total: f64,
}

pub fn timing_report(
    n_ions: usize,
    q_ions: usize,
    fidelity: f64,
    wavelength: f64,
    angle: f64,
    omega_z: f64,
    species: &IonSpecies,
    t_a: f64,
) -> Result<TimingReport> {
    if n_ions == 0 || q_ions == 0 || q_ions > n_ions {
        return Err(Error::physics(format!(
            "need 1 <= gate ions <= chain ions, got {q_ions} of {n_ions}"
        )));
    }
    if !(fidelity > 0.0 && fidelity < 1.0) {
        return Err(Error::physics("fidelity must lie strictly between 0 and 1"));
    }
    if !(wavelength > 0.0) || !(omega_z > 0.0) {
        return Err(Error::physics("wavelength and trap frequency must be positive"));
    }
    if !(t_a >= 0.0) || !t_a.is_finite() {
        return Err(Error::physics("carrier pulse time must be finite and non-negative"));
    }
    let kappa = 2.0 * PI / wavelength * angle.cos();
    let recoil_energy = HBAR * HBAR * kappa * kappa / (2.0 * species.mass_kg());
    if !(recoil_energy > 0.0) {
        return Err(Error::physics("projected wave number vanishes at this angle"));
    }
    let epsilon = (1.0 - fidelity).sqrt();
    let rate = 2.0 * 2f64.sqrt()
        * epsilon
        * (recoil_energy / (n_ions as f64 * PLANCK) * omega_z / (2.0 * PI)).sqrt();
    let t_b = 1.0 / rate;
    Ok(TimingReport {
        recoil_energy,
        recoil_frequency: recoil_energy / PLANCK,
        eta: (recoil_energy / (HBAR * omega_z)).sqrt(),
        t_b,
        t_total: 2.0 * (t_a + q_ions as f64 * t_b),
    })
}

/// Chain sizes of the standard gate-time table.
pub const TABLE_SIZES: [usize; 5] = [2, 3, 6, 9, 10];

/// One row of the gate-time table: an N-ion CNOT on all N ions, at 99% and
/// 75% fidelity. Times in seconds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GateTimeRow {
    pub n: usize,
    pub t_b_99: f64,
    pub t_b_75: f64,
    pub t_99: f64,
    pub t_75: f64,
}

pub fn gate_time_table(
    species: &IonSpecies,
    wavelength: f64,
    angle: f64,
    omega_z: f64,
    t_a: f64,
) -> Result<Vec<GateTimeRow>> {
    TABLE_SIZES
        .iter()
        .map(|&n| {
            let hi = timing_report(n, n, 0.99, wavelength, angle, omega_z, species, t_a)?;
            let lo = timing_report(n, n, 0.75, wavelength, angle, omega_z, species, t_a)?;
            Ok(GateTimeRow { n, t_b_99: hi.t_b, t_b_75: lo.t_b, t_99: hi.t_total, t_75: lo.t_total })
        })
        .collect()
}

/// CSV replica of the gate-time table, T_B in microseconds and totals in
/// milliseconds.
pub fn format_gate_time_table(rows: &[GateTimeRow]) -> String {
    let mut out = String::from("n,t_b_99_us,t_b_75_us,t_99_ms,t_75_ms\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            row.n,
            row.t_b_99 * 1e6,
            row.t_b_75 * 1e6,
            row.t_99 * 1e3,
            row.t_75 * 1e3
        ));
    }
    out
}

/// The combined estimate the `estimate` command reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BudgetReport {
    pub p_blue: f64,
    pub p_red: f64,
    pub p_carrier: f64,
    pub margin_blue: f64,
    pub margin_red: f64,
    pub margin_carrier: f64,
    /// rad/s.
    pub stark_shift: f64,
    pub ld_margin: f64,
    /// J.
    pub recoil_energy: f64,
    /// Hz.
    pub recoil_frequency: f64,
    pub eta: f64,
    /// Seconds.
    pub t_a: f64,
    pub t_b: f64,
    pub t_total: f64,
}

/// Assembles the full report for a chain of `n_ions` driven on the axial
/// COM mode (nu = omega_z) at coupling `lambda_mag`, with `q_ions` in the
/// gate, thermal occupation `nbar` and worst-case Fock level `n_fock`.
#[allow(clippy::too_many_arguments)]
pub fn budget_report(
    species: &IonSpecies,
    wavelength: f64,
    angle: f64,
    omega_z: f64,
    lambda_mag: f64,
    nbar: f64,
    n_fock: usize,
    n_ions: usize,
    q_ions: usize,
    fidelity: f64,
    t_a: f64,
) -> Result<BudgetReport> {
    let timing =
        timing_report(n_ions, q_ions, fidelity, wavelength, angle, omega_z, species, t_a)?;
    let off = offres_report(lambda_mag, timing.eta, n_fock, omega_z)?;
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::physics("mean occupation must be finite and non-negative"));
    }
    Ok(BudgetReport {
        p_blue: off.p_blue,
        p_red: off.p_red,
        p_carrier: off.p_carrier,
        margin_blue: off.margin_blue,
        margin_red: off.margin_red,
        margin_carrier: off.margin_carrier,
        stark_shift: off.stark_shift,
        ld_margin: lamb_dicke_margin(timing.eta, nbar),
        recoil_energy: timing.recoil_energy,
        recoil_frequency: timing.recoil_frequency,
        eta: timing.eta,
        t_a,
        t_b: timing.t_b,
        t_total: timing.t_total,
    })
}
