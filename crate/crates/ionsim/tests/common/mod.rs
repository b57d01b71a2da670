//! Shared oracles for the integration suites. Everything here is computed by
//! a route independent of the library code it checks.

#![allow(dead_code)]

use ionsim::statespace::{Level, QuantumState};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Matrix elements of e^{i eta (a + a^dag)} from an explicit truncated matrix
/// exponential: the position quadrature X = a + a^dag is real symmetric
/// tridiagonal, so X = U diag(x) U^T and the exponential is U e^{i eta x} U^T.
/// The eigendecomposition is done once; `element` is then cheap per (m, n, eta).
pub struct DisplacementOracle {
    vals: DVector<f64>,
    vecs: DMatrix<f64>,
}

impl DisplacementOracle {
    /// `dim` is the Fock truncation; keep the probed m, n well below it so the
    /// truncation error stays under the comparison tolerance.
    pub fn new(dim: usize) -> DisplacementOracle {
        let x = DMatrix::<f64>::from_fn(dim, dim, |r, c| {
            if r + 1 == c {
                (c as f64).sqrt()
            } else if c + 1 == r {
                (r as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(x);
        DisplacementOracle { vals: eig.eigenvalues, vecs: eig.eigenvectors }
    }

    /// <m| e^{i eta (a + a^dag)} |n>.
    pub fn element(&self, m: usize, n: usize, eta: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.vals.len() {
            acc += Complex64::from_polar(1.0, eta * self.vals[j]) * self.vecs[(m, j)] * self.vecs[(n, j)];
        }
        acc
    }
}

/// Reduced density matrix of ions `a` and `b` (1-based), tracing out every
/// other ion and the bus. Rows/columns are ordered gg, ge, eg, ee; population
/// in |r> is dropped and the result renormalized to unit trace.
pub fn two_qubit_density(state: &QuantumState, a: usize, b: usize) -> DMatrix<Complex64> {
    assert!(a != b && a >= 1 && b >= 1 && a <= state.n_ions && b <= state.n_ions);
    let fock_dim = state.n_max + 1;
    let stride = |ion: usize| 3usize.pow((state.n_ions - ion) as u32) * fock_dim;
    let (sa, sb) = (stride(a), stride(b));
    let mut rho = DMatrix::<Complex64>::zeros(4, 4);
    for base in 0..state.dim() {
        if state.level_of(base, a) != Level::G || state.level_of(base, b) != Level::G {
            continue;
        }
        let amps: Vec<Complex64> =
            [0, sb, sa, sa + sb].iter().map(|&off| state.amplitudes[base + off]).collect();
        for r in 0..4 {
            for c in 0..4 {
                rho[(r, c)] += amps[r] * amps[c].conj();
            }
        }
    }
    let trace: f64 = (0..4).map(|i| rho[(i, i)].re).sum();
    rho / Complex64::new(trace, 0.0)
}

/// Two-qubit concurrence C = max(0, l1 - l2 - l3 - l4) where l_i are the
/// decreasing square-rooted eigenvalues of sqrt(rho) rho_tilde sqrt(rho) and
/// rho_tilde = (Y x Y) rho* (Y x Y) is the spin-flipped state.
pub fn concurrence(rho: &DMatrix<Complex64>) -> f64 {
    let flip = DMatrix::<Complex64>::from_fn(4, 4, |r, c| {
        let sign = match (r, c) {
            (0, 3) | (3, 0) => -1.0,
            (1, 2) | (2, 1) => 1.0,
            _ => 0.0,
        };
        Complex64::new(sign, 0.0)
    });
    let rho_tilde = &flip * rho.conjugate() * &flip;

    let hermitian_sqrt = |m: &DMatrix<Complex64>| {
        let eig = SymmetricEigen::new(m.clone());
        let mut out = DMatrix::<Complex64>::zeros(4, 4);
        for j in 0..4 {
            let root = eig.eigenvalues[j].max(0.0).sqrt();
            let col = eig.eigenvectors.column(j);
            for r in 0..4 {
                for c in 0..4 {
                    out[(r, c)] += Complex64::new(root, 0.0) * col[r] * col[c].conj();
                }
            }
        }
        out
    };

    let root = hermitian_sqrt(rho);
    let mut m = &root * rho_tilde * &root;
    let m_adj = m.adjoint();
    m = (m + m_adj) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(m);
    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
    lambdas.sort_by(|x, y| y.total_cmp(x));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
}
