//! Ion-string statics and axial normal modes: equilibrium positions from the
//! Coulomb/harmonic balance, the mode eigenproblem, and per-ion Lamb-Dicke
//! parameters for a given laser geometry.

use crate::constants::{HBAR, VACUUM_PERMITTIVITY};
use crate::trap::IonSpecies;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Equilibrium configuration of an N-ion string in a harmonic axial well.
#[derive(Debug, Clone, PartialEq)]
pub struct IonChain {
    pub species: IonSpecies,
    /// Axial secular frequency, rad/s.
    pub omega_z: f64,
    /// Length scale gamma with gamma^3 = q^2 / (4 pi eps0 m omega_z^2), m.
    pub gamma: f64,
    /// Dimensionless equilibrium positions, ascending, in units of gamma.
    pub z: Vec<f64>,
    /// Physical equilibrium positions, m.
    pub z_phys: Vec<f64>,
}

impl IonChain {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Smallest physical gap, attained at the chain center, m.
    pub fn min_spacing(&self) -> f64 {
        self.z_phys
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Power-law fit 2.018 N^-0.559 gamma for the minimum gap, m.
    pub fn min_spacing_fit(&self) -> f64 {
        2.018 * (self.n() as f64).powf(-0.559) * self.gamma
    }
}

/// Solves the dimensionless equilibrium conditions
/// Z_i - sum_{j<i} (Z_i - Z_j)^-2 + sum_{j>i} (Z_i - Z_j)^-2 = 0
/// by damped Newton iteration from a uniformly spaced start.
pub fn equilibrium_positions(n: usize, species: &IonSpecies, omega_z: f64) -> Result<IonChain> {
    if n == 0 {
        return Err(Error::physics("chain needs at least one ion"));
    }
    if !(omega_z > 0.0) {
        return Err(Error::physics("omega_z must be positive"));
    }

    let mut z = DVector::from_fn(n, |i, _| {
        let spacing = 2.018 * (n as f64).powf(-0.559);
        (i as f64 - 0.5 * (n as f64 - 1.0)) * spacing
    });

    let residual = |z: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            let mut f = z[i];
            for j in 0..i {
                f -= 1.0 / (z[i] - z[j]).powi(2);
            }
            for j in i + 1..n {
                f += 1.0 / (z[i] - z[j]).powi(2);
            }
            f
        })
    };

    let mut f = residual(&z);
    let mut fnorm = f.norm();
    let mut converged = f.amax() <= 1e-12;
    for _ in 0..200 {
        if converged {
            break;
        }
        let jac = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let mut d = 1.0;
                for k in 0..n {
                    if k != i {
                        d += 2.0 / (z[i] - z[k]).abs().powi(3);
                    }
                }
                d
            } else {
                -2.0 / (z[i] - z[j]).abs().powi(3)
            }
        });
        let delta = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::physics("singular Jacobian in equilibrium solve"))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &z - scale * &delta;
            let ft = residual(&trial);
            if ft.norm() < fnorm || ft.amax() <= 1e-12 {
                z = trial;
                f = ft;
                fnorm = f.norm();
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::physics("equilibrium Newton iteration stalled"));
        }
        converged = f.amax() <= 1e-12;
    }
    if !converged {
        return Err(Error::physics("equilibrium solve did not reach 1e-12 residual"));
    }

    let m = species.mass_kg();
    let q = species.charge_c();
    let gamma = (q * q / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * m * omega_z * omega_z))
        .cbrt();
    let z: Vec<f64> = z.iter().copied().collect();
    let z_phys = z.iter().map(|&u| u * gamma).collect();
    Ok(IonChain { species: *species, omega_z, gamma, z, z_phys })
}

/// Axial normal-mode data for a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub omega_z: f64,
    /// Eigenvalues mu_alpha of the coupling matrix, ascending (mu_1 = 1, mu_2 = 3).
    pub mu: Vec<f64>,
    /// Mode angular frequencies nu_alpha = omega_z sqrt(mu_alpha), rad/s.
    pub nu: Vec<f64>,
    /// Orthonormal eigenvectors, `d[alpha][i]` for ion i in mode alpha.
    pub d: Vec<Vec<f64>>,
    /// Coupling factors K_i = D_i / mu^(1/4).
    pub k: Vec<Vec<f64>>,
    /// Ground-state size sqrt(hbar / 2 m omega_z) of a single ion, m.
    pub z0: f64,
}

/// Diagonalizes the dimensionless coupling matrix
/// V_kk = 1 + sum_{j != k} 2/|Z_k - Z_j|^3, V_kl = -2/|Z_k - Z_l|^3 (k != l).
/// Eigenvector signs: the center-of-mass mode sums positive, every other mode has
/// a positive last component. Near-degenerate eigenvalues (gap below 1e-8) are
/// rejected so the sign convention stays well defined.
pub fn normal_modes(chain: &IonChain) -> Result<ModeSpectrum> {
    let n = chain.n();
    let z = &chain.z;
    let v = DMatrix::from_fn(n, n, |k, l| {
        if k == l {
            let mut d = 1.0;
            for j in 0..n {
                if j != k {
                    d += 2.0 / (z[k] - z[j]).abs().powi(3);
                }
            }
            d
        } else {
            -2.0 / (z[k] - z[l]).abs().powi(3)
        }
    });

    let eig = nalgebra::SymmetricEigen::new(v);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    for pair in mu.windows(2) {
        if pair[1] - pair[0] <= 1e-8 {
            return Err(Error::physics(format!(
                "mode eigenvalues {:.12} and {:.12} closer than 1e-8; sign convention undefined",
                pair[0], pair[1]
            )));
        }
    }

    let mut d = Vec::with_capacity(n);
    for (alpha, &col) in order.iter().enumerate() {
        let mut vec: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let flip = if alpha == 0 {
            vec.iter().sum::<f64>() < 0.0
        } else {
            vec[n - 1] < 0.0
        };
        if flip {
            for x in &mut vec {
                *x = -*x;
            }
        }
        d.push(vec);
    }

    let nu: Vec<f64> = mu.iter().map(|&m| chain.omega_z * m.sqrt()).collect();
    let k = d
        .iter()
        .zip(&mu)
        .map(|(vec, &m)| vec.iter().map(|&x| x / m.powf(0.25)).collect())
        .collect();
    let z0 = (HBAR / (2.0 * chain.species.mass_kg() * chain.omega_z)).sqrt();
    Ok(ModeSpectrum { omega_z: chain.omega_z, mu, nu, d, k, z0 })
}

/// How the addressing beam samples ion motion.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Travelling,
    /// Standing wave with per-ion positions chi_j (rad) relative to a node.
    Standing { kind: MomentKind, chi: Vec<f64> },
}

/// Transition moment driving the standing-wave coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    Dipole,
    Quadrupole,
}

/// Laser addressing parameters shared by a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserConfig {
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    /// Angle between beam and trap axis, rad.
    pub angle: f64,
    /// Travelling-wave coupling magnitude |lambda|, rad/s.
    pub lambda_mag: f64,
    /// Laser phase at the coordinate origin, rad.
    pub phase: f64,
    pub geometry: Geometry,
}

impl LaserConfig {
    pub fn travelling(wavelength: f64, angle: f64, lambda_mag: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !(lambda_mag >= 0.0) {
            return Err(Error::physics("wavelength must be positive, |lambda| non-negative"));
        }
        Ok(LaserConfig { wavelength, angle, lambda_mag, phase: 0.0, geometry: Geometry::Travelling })
    }

    /// Axial wave-number projection kappa_theta = (2 pi / wavelength) cos(angle).
    pub fn kappa_theta(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength * self.angle.cos()
    }
}

/// Per-ion Lamb-Dicke parameters eta_j = K_j kappa_theta z0 for bus mode `alpha`
/// (0-based index into the spectrum).
pub fn lamb_dicke_parameters(
    spectrum: &ModeSpectrum,
    laser: &LaserConfig,
    alpha: usize,
) -> Result<Vec<f64>> {
    let k = spectrum
        .k
        .get(alpha)
        .ok_or_else(|| Error::physics(format!("mode index {alpha} out of range")))?;
    let eta_bar = laser.kappa_theta().abs() * spectrum.z0;
    Ok(k.iter().map(|&kj| kj * eta_bar).collect())
}

/// Static laser phase seen by each ion, phi_j = phi - kappa_theta z_j.
pub fn ion_phase_offsets(chain: &IonChain, laser: &LaserConfig) -> Vec<f64> {
    chain
        .z_phys
        .iter()
        .map(|&zj| laser.phase - laser.kappa_theta() * zj)
        .collect()
}
