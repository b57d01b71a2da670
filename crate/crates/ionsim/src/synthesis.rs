//! Logic-network generators: W states and arbitrary three-qubit states.
//!
//! Both generators emit plain gate lists so the result compiles to pulses
//! through the gates module unchanged. The W network runs on the initial
//! state |e>^N; the arbitrary-state network on |ggg>.

use crate::gates::GateSpec;
use crate::statespace::Level;
use crate::{Error, Result};
use std::f64::consts::PI;

/// A pure target state: non-negative magnitudes and phases per basis label.
/// Index order is binary counting with ion 1 as the most significant trit
/// and g < e, so for three qubits: ggg, gge, geg, gee, egg, ege, eeg, eee.
/// The phase of the all-g component is gauged to zero on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub n: usize,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

/// Qubit count above which a dense 2^N table stops being sensible.
const MAX_TARGET_QUBITS: usize = 20;

impl TargetState {
    /// Validates and gauges: the all-g phase is subtracted from every
    /// component, so two inputs differing by a uniform phase shift build
    /// the identical network.
    pub fn new(n: usize, amplitudes: Vec<f64>, mut phases: Vec<f64>) -> Result<TargetState> {
        if n == 0 || n > MAX_TARGET_QUBITS {
            return Err(Error::physics(format!("qubit count {n} outside 1..={MAX_TARGET_QUBITS}")));
        }
        let dim = 1usize << n;
        if amplitudes.len() != dim || phases.len() != dim {
            return Err(Error::physics(format!(
                "target needs {dim} amplitudes and phases, got {} and {}",
                amplitudes.len(),
                phases.len()
            )));
        }
        let mut norm = 0.0;
        for (&a, &p) in amplitudes.iter().zip(&phases) {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::physics("target amplitudes must be finite and non-negative"));
            }
            if !p.is_finite() {
                return Err(Error::physics("target phases must be finite"));
            }
            norm += a * a;
        }
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::physics(format!("target norm^2 = {norm:.12}, must be 1 to 1e-10")));
        }
        let gauge = phases[0];
        for p in phases.iter_mut() {
            *p -= gauge;
        }
        phases[0] = 0.0;
        Ok(TargetState { n, amplitudes, phases })
    }

    /// Re-checks the construction invariants (fields are public).
    pub fn validate(&self) -> Result<()> {
        TargetState::new(self.n, self.amplitudes.clone(), self.phases.clone()).map(drop)
    }

    /// g/e string of basis index `i`, ion 1 first.
    pub fn basis_label(&self, i: usize) -> String {
        (0..self.n)
            .map(|q| {
                if i >> (self.n - 1 - q) & 1 == 1 {
                    Level::E.to_char()
                } else {
                    Level::G.to_char()
                }
            })
            .collect()
    }
}

fn label_index(label: &str) -> Option<(usize, usize)> {
    let mut idx = 0usize;
    let mut n = 0usize;
    for ch in label.chars() {
        idx = idx << 1
            | match ch {
                'g' => 0,
                'e' => 1,
                _ => return None,
            };
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some((n, idx))
    }
}

/// Parses the target-state CSV: rows `basis_label,alpha,phi` (phi in
/// radians), one row per basis component; omitted components are zero.
/// An optional header row and `#` comments are allowed.
pub fn parse_target_state_csv(text: &str) -> Result<TargetState> {
    let mut n: Option<usize> = None;
    let mut rows: Vec<(usize, f64, f64, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let line = raw.trim_end_matches('\r');
        let body = match line.find('#') {
            Some(cut) => &line[..cut],
            None => line,
        };
        if body.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if lineno == 0 && fields.first() == Some(&"basis_label") {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::parse(
                line_num,
                1,
                format!("expected `basis_label,alpha,phi`, got {} fields", fields.len()),
            ));
        }
        let label_col = body.len() - body.trim_start().len() + 1;
        let (row_n, idx) = label_index(fields[0]).ok_or_else(|| {
            Error::parse(line_num, label_col, format!("malformed basis label `{}`", fields[0]))
        })?;
        match n {
            None => {
                if row_n > MAX_TARGET_QUBITS {
                    return Err(Error::parse(
                        line_num,
                        label_col,
                        format!("label `{}` exceeds {MAX_TARGET_QUBITS} qubits", fields[0]),
                    ));
                }
                n = Some(row_n);
            }
            Some(have) if have != row_n => {
                return Err(Error::parse(
                    line_num,
                    label_col,
                    format!("label `{}` has {row_n} qubits, earlier rows have {have}", fields[0]),
                ));
            }
            _ => {}
        }
        let value_col = |i: usize| {
            body.split(',').take(i).map(|f| f.len() + 1).sum::<usize>() + 1
        };
        let alpha: f64 = fields[1].parse().map_err(|_| {
            Error::parse(line_num, value_col(1), format!("malformed amplitude `{}`", fields[1]))
        })?;
        let phi: f64 = fields[2].parse().map_err(|_| {
            Error::parse(line_num, value_col(2), format!("malformed phase `{}`", fields[2]))
        })?;
        rows.push((idx, alpha, phi, line_num));
    }
    let n = n.ok_or_else(|| Error::parse(1, 1, "no target components given"))?;
    let dim = 1usize << n;
    let mut amplitudes = vec![0.0; dim];
    let mut phases = vec![0.0; dim];
    let mut seen = vec![0usize; dim];
    for (idx, alpha, phi, line_num) in rows {
        if seen[idx] != 0 {
            return Err(Error::parse(
                line_num,
                1,
                format!("duplicate basis label (first given on line {})", seen[idx]),
            ));
        }
        seen[idx] = line_num;
        amplitudes[idx] = alpha;
        phases[idx] = phi;
    }
    TargetState::new(n, amplitudes, phases).map_err(|e| match e {
        Error::Physics(msg) => Error::parse(1, 1, msg),
        other => other,
    })
}

pub fn format_target_state_csv(target: &TargetState) -> String {
    let mut out = String::from("basis_label,alpha,phi\n");
    for i in 0..target.amplitudes.len() {
        if target.amplitudes[i] == 0.0 {
            continue;
        }
        out.push_str(&format!(
            "{},{:e},{:e}\n",
            target.basis_label(i),
            target.amplitudes[i],
            target.phases[i]
        ));
    }
    out
}

/// Network preparing the N-qubit W state (equal superposition of the N
/// one-g-rest-e strings) from |e>^N: a chain of controlled rotations Q_j
/// with cos(theta_j) = sqrt((N-j)/(N-j+1)), each controlled by all earlier
/// qubits, closed by an N-1-control CNOT on the last qubit.
pub fn w_state_network(n: usize) -> Result<Vec<GateSpec>> {
    if n < 2 {
        return Err(Error::physics("W state needs at least two qubits"));
    }
    let mut gates = Vec::with_capacity(n);
    for j in 1..n {
        let left = (n - j) as f64;
        let theta = (left / (left + 1.0)).sqrt().acos();
        gates.push(GateSpec::ReducedControlledR { controls: (1..j).collect(), target: j, theta });
    }
    gates.push(GateSpec::MultiCnot { controls: (1..n).collect(), target: n });
    Ok(gates)
}

/// Order in which the construction consumes the eight components: by e
/// count, with the flipped qubit moving 3, 2, 1 inside each weight block.
const PEEL_ORDER: [usize; 8] = [0b000, 0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111];

/// Network preparing an arbitrary three-qubit state from |ggg>. Seven
/// controlled rotations (14 parameters) interleaved with four multi-CNOT
/// movers peel one basis component off the residual per rotation; rotations
/// whose amplitude ratio degenerates to 0/0 are dropped, movers are kept.
pub fn arbitrary_state_network(target: &TargetState) -> Result<Vec<GateSpec>> {
    target.validate()?;
    if target.n != 3 {
        return Err(Error::physics(format!(
            "the explicit construction covers exactly three qubits, target has {}",
            target.n
        )));
    }
    let a: Vec<f64> = PEEL_ORDER.iter().map(|&i| target.amplitudes[i]).collect();
    let ph: Vec<f64> = PEEL_ORDER.iter().map(|&i| target.phases[i]).collect();
    let phi_last = ph[7];

    let mut b = [0.0f64; 7];
    b[0] = (1.0 - a[0] * a[0]).max(0.0).sqrt();
    let mut consumed = a[0] * a[0];
    for j in 1..7 {
        let left = 1.0 - consumed;
        b[j] = if left <= 0.0 || a[j] == 0.0 {
            0.0
        } else {
            (a[j] / left.sqrt()).clamp(0.0, 1.0)
        };
        consumed += a[j] * a[j];
    }
    if b[0] == 0.0 {
        return Ok(Vec::new());
    }

    let mut phi = [0.0f64; 7];
    phi[0] = 0.5 * (PI - phi_last);
    for j in 1..7 {
        phi[j] = 0.5 * (ph[j] - phi_last);
    }

    let mut gates = Vec::with_capacity(11);
    let rotation = |j: usize, controls: Vec<usize>, tq: usize, gates: &mut Vec<GateSpec>| {
        if b[j] != 0.0 {
            gates.push(GateSpec::ControlledR {
                controls,
                target: tq,
                theta: b[j].asin(),
                phi: phi[j],
            });
        }
    };
    let mover = |controls: Vec<usize>, tq: usize, gates: &mut Vec<GateSpec>| {
        gates.push(GateSpec::MultiCnot { controls, target: tq });
    };

    rotation(0, vec![], 3, &mut gates);
    mover(vec![3], 2, &mut gates);
    rotation(1, vec![3], 2, &mut gates);
    rotation(2, vec![2], 3, &mut gates);
    mover(vec![2, 3], 1, &mut gates);
    mover(vec![1, 2], 3, &mut gates);
    rotation(3, vec![1], 2, &mut gates);
    mover(vec![1, 2], 3, &mut gates);
    rotation(4, vec![2, 3], 1, &mut gates);
    rotation(5, vec![1, 3], 2, &mut gates);
    rotation(6, vec![1, 2], 3, &mut gates);
    Ok(gates)
}
