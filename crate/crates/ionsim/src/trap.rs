//! Single-ion motion in a linear RF quadrupole trap: stability parameters, secular
//! frequencies, effective well depths, exact Mathieu integration and the zig-zag
//! (linear-chain) criterion.

use crate::constants::{ATOMIC_MASS, ELEMENTARY_CHARGE};
use crate::{Error, Result};

/// Ion species given as mass number and charge state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IonSpecies {
    pub mass_amu: f64,
    pub charge_e: u32,
}

impl IonSpecies {
    pub fn new(mass_amu: f64, charge_e: u32) -> Result<Self> {
        if !(mass_amu > 0.0) || !mass_amu.is_finite() {
            return Err(Error::physics("ion mass must be positive"));
        }
        if charge_e == 0 {
            return Err(Error::physics("ion charge must be at least 1 e"));
        }
        Ok(IonSpecies { mass_amu, charge_e })
    }

    /// Singly charged calcium-40, the worked reference species.
    pub fn ca40() -> Self {
        IonSpecies { mass_amu: 40.0, charge_e: 1 }
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * ATOMIC_MASS
    }

    pub fn charge_c(&self) -> f64 {
        f64::from(self.charge_e) * ELEMENTARY_CHARGE
    }
}

/// Static description of the trap drive and electrode geometry.
///
/// `u0`/`v0` are the DC and RF electrode voltages (V), `rf` the drive angular
/// frequency (rad/s), `r0` the radial electrode distance (m) and `endcap` the
/// axial center-to-endcap distance (m). Axial confinement comes either from an
/// explicit `omega_z_override` (rad/s) or from the endcap voltage `u12` (V)
/// reduced by the geometric loss factor `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    pub species: IonSpecies,
    pub u0: f64,
    pub v0: f64,
    pub rf: f64,
    pub r0: f64,
    pub endcap: f64,
    pub u12: Option<f64>,
    pub xi: Option<f64>,
    pub omega_z_override: Option<f64>,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.v0, "v0_v"),
            (self.rf, "rf_hz"),
            (self.r0, "r0_m"),
            (self.endcap, "endcap_m"),
        ];
        for (value, name) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::physics(format!("{name} must be positive")));
            }
        }
        if !(self.u0 >= 0.0) || !self.u0.is_finite() {
            return Err(Error::physics("u0_v must be non-negative"));
        }
        if let Some(u12) = self.u12 {
            if !(u12 > 0.0) {
                return Err(Error::physics("u12_v must be positive"));
            }
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0 && xi <= 1.0) {
                return Err(Error::physics("xi must lie in (0, 1]"));
            }
        }
        if let Some(wz) = self.omega_z_override {
            if !(wz > 0.0) {
                return Err(Error::physics("omega_z_hz must be positive"));
            }
        }
        Ok(())
    }

    /// Axial secular frequency (rad/s): the override if given, otherwise from the
    /// harmonic endcap well (1/2) m omega_z^2 z0^2 = xi q U12.
    pub fn omega_z(&self) -> Result<f64> {
        if let Some(wz) = self.omega_z_override {
            return Ok(wz);
        }
        match (self.u12, self.xi) {
            (Some(u12), Some(xi)) => {
                let m = self.species.mass_kg();
                let q = self.species.charge_c();
                Ok((2.0 * xi * q * u12 / m).sqrt() / self.endcap)
            }
            _ => Err(Error::physics(
                "axial confinement undefined: set omega_z_hz or both u12_v and xi",
            )),
        }
    }
}

/// Derived trap-operating-point summary.
///
/// `omega_x`/`omega_y` are `None` when the corresponding radicand of the secular
/// approximation is negative (no bounded secular motion). `stable` is the
/// lowest-stability-region check a < b^2/10 and b^2 < 0.1.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrapSummary {
    pub a: f64,
    pub b: f64,
    pub stable: bool,
    pub omega_x: Option<f64>,
    pub omega_y: Option<f64>,
    pub omega_r: f64,
    pub omega_z: f64,
    pub axial_depth_ev: f64,
    pub radial_depth_ev: f64,
}

/// Stability parameters and secular frequencies for the operating point.
///
/// a = 4qU0/(m r0^2 Omega^2), b = 2qV0/(m r0^2 Omega^2),
/// omega_x,y = (Omega/2) sqrt(b^2/2 +- a), omega_r = Omega b / (2 sqrt(2)),
/// well depths V = (1/2) m omega^2 d^2 expressed in eV.
pub fn trap_characteristics(cfg: &TrapConfig) -> Result<TrapSummary> {
    cfg.validate()?;
    let m = cfg.species.mass_kg();
    let q = cfg.species.charge_c();
    let denom = m * cfg.r0 * cfg.r0 * cfg.rf * cfg.rf;
    let a = 4.0 * q * cfg.u0 / denom;
    let b = 2.0 * q * cfg.v0 / denom;
    let stable = a < b * b / 10.0 && b * b < 0.1;

    let radicand_x = b * b / 2.0 + a;
    let radicand_y = b * b / 2.0 - a;
    let omega_x = (radicand_x >= 0.0).then(|| 0.5 * cfg.rf * radicand_x.sqrt());
    let omega_y = (radicand_y >= 0.0).then(|| 0.5 * cfg.rf * radicand_y.sqrt());
    let omega_r = cfg.rf * b / (2.0 * std::f64::consts::SQRT_2);
    let omega_z = cfg.omega_z()?;

    let axial_depth_ev =
        0.5 * m * omega_z * omega_z * cfg.endcap * cfg.endcap / ELEMENTARY_CHARGE;
    let radial_depth_ev = 0.5 * m * omega_r * omega_r * cfg.r0 * cfg.r0 / ELEMENTARY_CHARGE;

    Ok(TrapSummary {
        a,
        b,
        stable,
        omega_x,
        omega_y,
        omega_r,
        omega_z,
        axial_depth_ev,
        radial_depth_ev,
    })
}

/// Secular (adiabatic) radial trajectory samples (x, y) at the given times:
/// x(t) = x0 [1 + (b/2) cos(Omega t)] cos(omega_x t + phase_x) and the y analogue
/// with the micromotion sign flipped. Requires a stable operating point.
pub fn secular_trajectory(
    cfg: &TrapConfig,
    x0: f64,
    y0: f64,
    phase_x: f64,
    phase_y: f64,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let summary = trap_characteristics(cfg)?;
    if !summary.stable {
        return Err(Error::physics(
            "secular approximation requires a stable operating point (a < b^2/10, b^2 < 0.1)",
        ));
    }
    let (Some(wx), Some(wy)) = (summary.omega_x, summary.omega_y) else {
        return Err(Error::physics("secular frequencies undefined for this operating point"));
    };
    let b = summary.b;
    Ok(times
        .iter()
        .map(|&t| {
            let micro = (cfg.rf * t).cos();
            let x = x0 * (1.0 + 0.5 * b * micro) * (wx * t + phase_x).cos();
            let y = y0 * (1.0 - 0.5 * b * micro) * (wy * t + phase_y).cos();
            (x, y)
        })
        .collect())
}

/// Time-sampled exact trajectory of the driven (Mathieu) equations of motion.
#[derive(Debug, Clone)]
pub struct MathieuTrajectory {
    pub t: Vec<f64>,
    /// State rows [x, vx, y, vy, z, vz] in SI units.
    pub states: Vec<[f64; 6]>,
}

/// Integrates the full driven equations of motion
/// x'' = -(q/m r0^2)(U0 + V0 cos Omega t) x, y'' = +(...) y, z'' = 0
/// with fixed-step RK4 from t = 0 to `t_end`. The step must resolve the drive:
/// steps longer than one fiftieth of an RF period are rejected.
pub fn mathieu_integrate(
    cfg: &TrapConfig,
    init: [f64; 6],
    t_end: f64,
    step: f64,
) -> Result<MathieuTrajectory> {
    cfg.validate()?;
    if !(t_end > 0.0) || !(step > 0.0) {
        return Err(Error::physics("integration span and step must be positive"));
    }
    let rf_period = 2.0 * std::f64::consts::PI / cfg.rf;
    if step > rf_period / 50.0 {
        return Err(Error::physics(format!(
            "step {step:.3e} s too coarse for RF period {rf_period:.3e} s; need step <= period/50"
        )));
    }
    let n_steps = (t_end / step).ceil() as usize;
    if n_steps > 50_000_000 {
        return Err(Error::physics("integration would exceed 5e7 steps"));
    }

    let m = cfg.species.mass_kg();
    let q = cfg.species.charge_c();
    let drive = q / (m * cfg.r0 * cfg.r0);
    let accel = |t: f64, s: &[f64; 6]| -> [f64; 6] {
        let field = drive * (cfg.u0 + cfg.v0 * (cfg.rf * t).cos());
        [s[1], -field * s[0], s[3], field * s[2], s[5], 0.0]
    };

    let mut t = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut s = init;
    let mut now = 0.0;
    t.push(now);
    states.push(s);
    for i in 0..n_steps {
        let h = step.min(t_end - now);
        let k1 = accel(now, &s);
        let s2 = add_scaled(&s, &k1, 0.5 * h);
        let k2 = accel(now + 0.5 * h, &s2);
        let s3 = add_scaled(&s, &k2, 0.5 * h);
        let k3 = accel(now + 0.5 * h, &s3);
        let s4 = add_scaled(&s, &k3, h);
        let k4 = accel(now + h, &s4);
        for j in 0..6 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        now = if i + 1 == n_steps { t_end } else { now + h };
        t.push(now);
        states.push(s);
    }
    Ok(MathieuTrajectory { t, states })
}

fn add_scaled(s: &[f64; 6], k: &[f64; 6], h: f64) -> [f64; 6] {
    let mut out = *s;
    for j in 0..6 {
        out[j] += h * k[j];
    }
    out
}

/// Zig-zag criterion for an N-ion string.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ZigZag {
    pub alpha: f64,
    pub alpha_crit: f64,
    pub linear: bool,
}

/// Checks the anisotropy alpha = (omega_z/omega_r)^2 against the critical value
/// alpha_crit = 3.23 N^-1.83. The chain is linear only strictly below the
/// critical value; equality already destabilizes the zig-zag mode.
pub fn linear_stability(n: usize, omega_z: f64, omega_r: f64) -> Result<ZigZag> {
    if n < 2 {
        return Err(Error::physics("zig-zag criterion needs at least 2 ions"));
    }
    if !(omega_z > 0.0 && omega_r > 0.0) {
        return Err(Error::physics("frequencies must be positive"));
    }
    let alpha = (omega_z / omega_r).powi(2);
    let alpha_crit = 3.23 * (n as f64).powf(-1.83);
    Ok(ZigZag { alpha, alpha_crit, linear: alpha < alpha_crit })
}

/// Parses the trap description format: one `key = value` pair per line, `#`
/// comments, exactly the documented keys. Frequencies are given in Hz and
/// converted to angular units here.
pub fn parse_trap_config(text: &str) -> Result<TrapConfig> {
    let mut seen: std::collections::BTreeMap<&str, (usize, f64)> = std::collections::BTreeMap::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let eq = body.find('=').ok_or_else(|| {
            Error::parse(line_no, body.len(), "expected `key = value`")
        })?;
        let key_raw = &body[..eq];
        let key = key_raw.trim();
        let key_col = body.find(key).unwrap_or(0) + 1;
        const KEYS: [&str; 10] = [
            "mass_amu", "charge_e", "u0_v", "v0_v", "rf_hz", "r0_m", "endcap_m", "u12_v",
            "xi", "omega_z_hz",
        ];
        if !KEYS.contains(&key) {
            return Err(Error::parse(line_no, key_col, format!("unknown key `{key}`")));
        }
        if seen.contains_key(key) {
            return Err(Error::parse(line_no, key_col, format!("duplicate key `{key}`")));
        }
        let val_str = body[eq + 1..].trim();
        let val_col = eq + 1 + body[eq + 1..].find(val_str).unwrap_or(0) + 1;
        let value: f64 = val_str.parse().map_err(|_| {
            Error::parse(line_no, val_col, format!("invalid number `{val_str}`"))
        })?;
        if !value.is_finite() {
            return Err(Error::parse(line_no, val_col, "value must be finite"));
        }
        let key_owned = KEYS.iter().find(|k| **k == key).unwrap();
        seen.insert(key_owned, (line_no, value));
    }

    let get = |key: &str| seen.get(key).map(|&(_, v)| v);
    let required = |field: Option<f64>, key: &str| {
        field.ok_or_else(|| Error::parse(last_line.max(1), 1, format!("missing required key `{key}`")))
    };

    let mass_amu = required(get("mass_amu"), "mass_amu")?;
    let charge_val = required(get("charge_e"), "charge_e")?;
    if charge_val.fract() != 0.0 || !(charge_val >= 1.0) || charge_val > 100.0 {
        let (line, _) = seen["charge_e"];
        return Err(Error::parse(line, 1, "charge_e must be a small positive integer"));
    }
    let species = IonSpecies::new(mass_amu, charge_val as u32)
        .map_err(|e| promote_physics(e, &seen, "mass_amu"))?;
    let tau = 2.0 * std::f64::consts::PI;
    let cfg = TrapConfig {
        species,
        u0: get("u0_v").unwrap_or(0.0),
        v0: required(get("v0_v"), "v0_v")?,
        rf: required(get("rf_hz"), "rf_hz")? * tau,
        r0: required(get("r0_m"), "r0_m")?,
        endcap: required(get("endcap_m"), "endcap_m")?,
        u12: get("u12_v"),
        xi: get("xi"),
        omega_z_override: get("omega_z_hz").map(|f| f * tau),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn promote_physics(
    err: Error,
    seen: &std::collections::BTreeMap<&str, (usize, f64)>,
    key: &str,
) -> Error {
    match err {
        Error::Physics(msg) => {
            let line = seen.get(key).map(|&(l, _)| l).unwrap_or(1);
            Error::parse(line, 1, msg)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ca_config() -> TrapConfig {
        TrapConfig {
            species: IonSpecies::ca40(),
            u0: 0.0,
            v0: 500.0,
            rf: 2.0 * std::f64::consts::PI * 17.0e6,
            r0: 1.2e-3,
            endcap: 5.0e-3,
            u12: None,
            xi: None,
            omega_z_override: Some(2.0 * std::f64::consts::PI * 700.0e3),
        }
    }

    #[test]
    fn stability_parameters_match_hand_values() {
        let s = trap_characteristics(&ca_config()).unwrap();
        // b = 2 q V0 / (m r0^2 Omega^2) evaluated with independent arithmetic.
        let m = 40.0 * ATOMIC_MASS;
        let omega = 2.0 * std::f64::consts::PI * 17.0e6;
        let b_expect = 2.0 * ELEMENTARY_CHARGE * 500.0 / (m * 1.2e-3 * 1.2e-3 * omega * omega);
        assert_relative_eq!(s.b, b_expect, max_relative = 1e-14);
        assert_eq!(s.a, 0.0);
        assert!(s.stable);
        // Radial secular frequency approximately 0.88 MHz for this operating point.
        assert_relative_eq!(s.omega_r / (2.0 * std::f64::consts::PI), 0.8824e6, max_relative = 2e-3);
        // With a = 0 both radial frequencies coincide with omega_r.
        assert_relative_eq!(s.omega_x.unwrap(), s.omega_r, max_relative = 1e-12);
        assert_relative_eq!(s.omega_y.unwrap(), s.omega_r, max_relative = 1e-12);
    }

    #[test]
    fn axial_well_depth_near_100_ev() {
        let s = trap_characteristics(&ca_config()).unwrap();
        // (1/2) m omega_z^2 z0^2 for 700 kHz and 5 mm endcaps.
        assert_relative_eq!(s.axial_depth_ev, 100.0, max_relative = 0.01);
    }

    #[test]
    fn radial_well_depth_recomputed_not_catalog_value() {
        // At omega_r/2pi = 2 MHz and r0 = 1.2 mm the well depth evaluates to ~47 eV.
        // (A much larger catalog figure of ~820 eV circulates but is not consistent
        // with V = m omega_r^2 r0^2 / 2 at these numbers.)
        let m = 40.0 * ATOMIC_MASS;
        let omega_r = 2.0 * std::f64::consts::PI * 2.0e6;
        let v_r = 0.5 * m * omega_r * omega_r * 1.2e-3 * 1.2e-3 / ELEMENTARY_CHARGE;
        assert_relative_eq!(v_r, 47.14, max_relative = 0.01);
    }

    #[test]
    fn axial_frequency_from_endcap_voltage() {
        let mut cfg = ca_config();
        cfg.omega_z_override = None;
        cfg.u12 = Some(1000.0);
        cfg.xi = Some(0.5);
        let wz = cfg.omega_z().unwrap();
        // (1/2) m wz^2 z0^2 = xi q U12 by construction.
        let m = cfg.species.mass_kg();
        let lhs = 0.5 * m * wz * wz * 5.0e-3 * 5.0e-3;
        let rhs = 0.5 * ELEMENTARY_CHARGE * 1000.0;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        // Axial depth in eV equals xi * U12 exactly under the same model.
        let s = trap_characteristics(&cfg).unwrap();
        assert_relative_eq!(s.axial_depth_ev, 500.0, max_relative = 1e-12);
    }

    #[test]
    fn stability_flag_boundaries() {
        let mut cfg = ca_config();
        // Push b^2 over 0.1 by lowering the drive frequency.
        cfg.rf = 2.0 * std::f64::consts::PI * 4.0e6;
        let s = trap_characteristics(&cfg).unwrap();
        assert!(s.b * s.b > 0.1);
        assert!(!s.stable);

        // A DC offset beyond b^2/10 also breaks the flag.
        let mut cfg = ca_config();
        let b = trap_characteristics(&cfg).unwrap().b;
        cfg.u0 = 500.0 * b / 10.0 * 1.5; // a = (2 q U0 / q V0) * b/2 scaled to exceed b^2/10
        let s = trap_characteristics(&cfg).unwrap();
        assert!(s.a > s.b * s.b / 10.0);
        assert!(!s.stable);
    }

    #[test]
    fn secular_trajectory_initial_amplitude() {
        let cfg = ca_config();
        let s = trap_characteristics(&cfg).unwrap();
        let samples = secular_trajectory(&cfg, 1.0e-6, 2.0e-6, 0.0, 0.0, &[0.0]).unwrap();
        let (x, y) = samples[0];
        assert_relative_eq!(x, 1.0e-6 * (1.0 + 0.5 * s.b), max_relative = 1e-14);
        assert_relative_eq!(y, 2.0e-6 * (1.0 - 0.5 * s.b), max_relative = 1e-14);
    }

    #[test]
    fn mathieu_free_particle_is_exact() {
        let mut cfg = ca_config();
        cfg.v0 = 1e-30; // effectively field-free but still a valid config
        cfg.u0 = 0.0;
        let step = 2.0 * std::f64::consts::PI / cfg.rf / 100.0;
        let traj = mathieu_integrate(&cfg, [1e-6, 2.0, 0.0, 0.0, 1e-6, -1.5], 1e-6, step).unwrap();
        let last = traj.states.last().unwrap();
        let t = *traj.t.last().unwrap();
        assert_relative_eq!(last[0], 1e-6 + 2.0 * t, max_relative = 1e-10);
        assert_relative_eq!(last[4], 1e-6 - 1.5 * t, max_relative = 1e-10);
    }

    #[test]
    fn mathieu_motion_bounded_in_stable_region() {
        let cfg = ca_config(); // a = 0, b ~ 0.147
        let period = 2.0 * std::f64::consts::PI / cfg.rf;
        let x0 = 1.0e-6;
        let traj =
            mathieu_integrate(&cfg, [x0, 0.0, x0, 0.0, 0.0, 0.0], 100.0 * period, period / 200.0)
                .unwrap();
        let max_x = traj.states.iter().map(|s| s[0].abs()).fold(0.0, f64::max);
        let max_y = traj.states.iter().map(|s| s[2].abs()).fold(0.0, f64::max);
        assert!(max_x < 1.6 * x0, "x grew to {max_x:e}");
        assert!(max_y < 1.6 * x0, "y grew to {max_y:e}");
    }

    #[test]
    fn mathieu_grows_outside_stability() {
        // a = 0.3, b = 0.1: the y equation sees a defocusing DC term and blows up.
        let mut cfg = ca_config();
        let m = cfg.species.mass_kg();
        let denom = m * cfg.r0 * cfg.r0 * cfg.rf * cfg.rf;
        cfg.u0 = 0.3 * denom / (4.0 * ELEMENTARY_CHARGE);
        cfg.v0 = 0.1 * denom / (2.0 * ELEMENTARY_CHARGE);
        let s = trap_characteristics(&cfg).unwrap();
        assert_relative_eq!(s.a, 0.3, max_relative = 1e-12);
        assert_relative_eq!(s.b, 0.1, max_relative = 1e-12);
        assert!(!s.stable);
        assert!(s.omega_y.is_none());

        let period = 2.0 * std::f64::consts::PI / cfg.rf;
        let y0 = 1.0e-9;
        let traj =
            mathieu_integrate(&cfg, [0.0, 0.0, y0, 0.0, 0.0, 0.0], 30.0 * period, period / 200.0)
                .unwrap();
        // Floquet-exponent estimate: amplitude ratio across a 10-period window.
        let sample = |k: usize| {
            traj.states[k * 200..(k + 1) * 200].iter().map(|s| s[2].abs()).fold(0.0, f64::max)
        };
        let early = sample(5);
        let late = sample(25);
        let exponent = (late / early).ln() / (20.0 * period);
        assert!(
            exponent > 0.1 * cfg.rf / (2.0 * std::f64::consts::PI),
            "no exponential growth detected: exponent {exponent:.3e}"
        );
    }

    #[test]
    fn secular_approximation_tracks_exact_solution() {
        let mut errors = Vec::new();
        for b_target in [0.05, 0.1, 0.2] {
            let mut cfg = ca_config();
            let m = cfg.species.mass_kg();
            let denom = m * cfg.r0 * cfg.r0 * cfg.rf * cfg.rf;
            cfg.u0 = 0.0;
            cfg.v0 = b_target * denom / (2.0 * ELEMENTARY_CHARGE);
            let s = trap_characteristics(&cfg).unwrap();
            let wx = s.omega_x.unwrap();
            let x0 = 1.0e-6;

            let t_end = 10.0 * 2.0 * std::f64::consts::PI / wx;
            let step = 2.0 * std::f64::consts::PI / cfg.rf / 100.0;
            let traj = mathieu_integrate(
                &cfg,
                [x0 * (1.0 + 0.5 * s.b), 0.0, 0.0, 0.0, 0.0, 0.0],
                t_end,
                step,
            )
            .unwrap();
            let secular = secular_trajectory(&cfg, x0, 0.0, 0.0, 0.0, &traj.t).unwrap();
            let mse: f64 = traj
                .states
                .iter()
                .zip(&secular)
                .map(|(ex, (sx, _))| (ex[0] - sx).powi(2))
                .sum::<f64>()
                / traj.states.len() as f64;
            let rms_rel = mse.sqrt() / x0;
            // Dominant error is the O(b^2) secular-frequency correction; the
            // accumulated phase drift over 10 cycles stays below ~1.5 b.
            assert!(rms_rel <= 1.5 * s.b, "rms {rms_rel:.3} exceeds 1.5 b = {:.3}", 1.5 * s.b);
            errors.push(rms_rel);
        }
        assert!(errors[0] < errors[1] && errors[1] < errors[2], "error not increasing: {errors:?}");
    }

    #[test]
    fn step_coarser_than_drive_rejected() {
        let cfg = ca_config();
        let period = 2.0 * std::f64::consts::PI / cfg.rf;
        let err = mathieu_integrate(&cfg, [0.0; 6], 1e-6, period / 10.0).unwrap_err();
        assert!(matches!(err, Error::Physics(_)));
    }

    #[test]
    fn zigzag_threshold_values() {
        let z = linear_stability(10, 1.0, 1.0).unwrap();
        assert_relative_eq!(z.alpha_crit, 3.23 * 10f64.powf(-1.83), max_relative = 1e-14);
        assert_relative_eq!(z.alpha_crit, 0.04777, max_relative = 1e-3);

        // Strictly-below test: the boundary itself counts as unstable. Nudge
        // omega_r down a hair so rounding cannot land alpha below the line.
        let wz = 1.0;
        let wr = (1.0 / z.alpha_crit).sqrt() * (1.0 - 5e-13);
        let at_boundary = linear_stability(10, wz, wr).unwrap();
        assert!((at_boundary.alpha - at_boundary.alpha_crit).abs() < 1e-12);
        assert!(!at_boundary.linear);

        let comfortably_linear = linear_stability(2, 1.0, 10.0).unwrap();
        assert!(comfortably_linear.linear);
        assert!(linear_stability(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn parses_complete_config() {
        let text = "\
# reference operating point
mass_amu = 40
charge_e = 1
u0_v = 0
v0_v = 500
rf_hz = 17e6
r0_m = 1.2e-3
endcap_m = 5e-3
omega_z_hz = 700e3
";
        let cfg = parse_trap_config(text).unwrap();
        assert_eq!(cfg.species.mass_amu, 40.0);
        assert_relative_eq!(cfg.rf, 2.0 * std::f64::consts::PI * 17e6, max_relative = 1e-15);
        assert_relative_eq!(
            cfg.omega_z_override.unwrap(),
            2.0 * std::f64::consts::PI * 700e3,
            max_relative = 1e-15
        );
    }

    #[test]
    fn rejects_unknown_key_with_position() {
        let text = "mass_amu = 40\ncharge_e = 1\nv0_volts = 500\n";
        match parse_trap_config(text).unwrap_err() {
            Error::Parse { line, col, msg } => {
                assert_eq!(line, 3);
                assert_eq!(col, 1);
                assert!(msg.contains("v0_volts"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_and_malformed_entries() {
        let dup = "mass_amu = 40\nmass_amu = 43\n";
        match parse_trap_config(dup).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }

        let bad_num = "mass_amu = forty\n";
        match parse_trap_config(bad_num).unwrap_err() {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 1);
                assert_eq!(col, 12);
            }
            other => panic!("unexpected error {other:?}"),
        }

        let missing = "mass_amu = 40\n";
        assert!(matches!(parse_trap_config(missing), Err(Error::Parse { .. })));
    }
}
