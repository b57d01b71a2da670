//! State vectors for N three-level ions (|g>, |e>, |r>) sharing one truncated
//! Fock bus mode, plus electron-shelving readout with Poisson photon counts.
//!
//! Index layout: ion 1 varies slowest, the Fock index fastest, so
//! `index = (sum_i s_i 3^(N-1-i)) * (n_max+1) + n` with levels g=0, e=1, r=2.

use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;

/// Internal level of one ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    G,
    E,
    R,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::R => 2,
        }
    }

    pub fn from_index(i: usize) -> Level {
        match i {
            0 => Level::G,
            1 => Level::E,
            _ => Level::R,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Level::G => 'g',
            Level::E => 'e',
            Level::R => 'r',
        }
    }

    pub fn from_char(c: char) -> Option<Level> {
        match c {
            'g' => Some(Level::G),
            'e' => Some(Level::E),
            'r' => Some(Level::R),
            _ => None,
        }
    }
}

/// Pure state of the ion string plus bus mode.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub n_ions: usize,
    /// Fock truncation: occupations 0..=n_max are represented.
    pub n_max: usize,
    pub amplitudes: Vec<Complex64>,
}

/// Rejects states whose amplitude array would exceed the memory budget.
/// (The 10^8-byte cap also covers the dimension itself: 16 bytes per entry.)
fn checked_dim(n_ions: usize, n_max: usize) -> Result<usize> {
    if n_ions < 1 || n_max < 1 {
        return Err(Error::physics("need at least one ion and n_max >= 1"));
    }
    let dim = 3f64.powi(n_ions as i32) * (n_max as f64 + 1.0);
    if 16.0 * dim > 1e8 {
        return Err(Error::physics(format!(
            "state of {n_ions} ions with n_max {n_max} exceeds the size guard"
        )));
    }
    Ok(3usize.pow(n_ions as u32) * (n_max + 1))
}

impl QuantumState {
    /// |g>^N tensor |n=0>.
    pub fn ground_state(n_ions: usize, n_max: usize) -> Result<QuantumState> {
        let dim = checked_dim(n_ions, n_max)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { n_ions, n_max, amplitudes })
    }

    /// Basis state with the given internal levels and Fock occupation.
    pub fn basis(spins: &[Level], n: usize, n_max: usize) -> Result<QuantumState> {
        let mut state = QuantumState::ground_state(spins.len(), n_max)?;
        let idx = state.basis_index(spins, n)?;
        state.amplitudes[0] = Complex64::new(0.0, 0.0);
        state.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn basis_index(&self, spins: &[Level], n: usize) -> Result<usize> {
        if spins.len() != self.n_ions {
            return Err(Error::physics(format!(
                "expected {} ion levels, got {}",
                self.n_ions,
                spins.len()
            )));
        }
        if n > self.n_max {
            return Err(Error::physics(format!(
                "Fock occupation {n} beyond truncation {}",
                self.n_max
            )));
        }
        let mut s = 0usize;
        for level in spins {
            s = s * 3 + level.index();
        }
        Ok(s * (self.n_max + 1) + n)
    }

    pub fn amplitude(&self, spins: &[Level], n: usize) -> Result<Complex64> {
        Ok(self.amplitudes[self.basis_index(spins, n)?])
    }

    /// Fock occupation encoded in a flat index.
    pub fn fock_of(&self, index: usize) -> usize {
        index % (self.n_max + 1)
    }

    /// Internal level of `ion` (1-based) encoded in a flat index.
    pub fn level_of(&self, index: usize, ion: usize) -> Level {
        let spin = index / (self.n_max + 1);
        let shift = 3usize.pow((self.n_ions - ion) as u32);
        Level::from_index(spin / shift % 3)
    }

    /// Label like `|geg>|2>` for a flat index.
    pub fn label_of(&self, index: usize) -> String {
        let mut spins = String::with_capacity(self.n_ions);
        for ion in 1..=self.n_ions {
            spins.push(self.level_of(index, ion).to_char());
        }
        format!("|{spins}>|{}>", self.fock_of(index))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Errors unless the norm is 1 within `tol`.
    pub fn check_norm(&self, tol: f64) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::physics(format!("state norm {norm} drifted beyond {tol}")));
        }
        Ok(())
    }

    /// Population stranded at the top Fock level; above 1e-8 the truncation
    /// is considered leaky and callers should warn.
    pub fn truncation_population(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.fock_of(*i) == self.n_max)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Probability of finding `ion` (1-based) in |g>.
    pub fn bright_probability(&self, ion: usize) -> Result<f64> {
        if ion < 1 || ion > self.n_ions {
            return Err(Error::physics(format!("ion {ion} out of range")));
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.level_of(*i, ion) == Level::G)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projective fluorescence measurement of one ion: Born-rule collapse onto
    /// the |g> (bright) or {|e>,|r>} (dark) sector, then a Poisson photon count
    /// at the sector's scattering rate; the reported outcome compares that
    /// count against the threshold, so misclassification is representable.
    pub fn measure_internal(
        &mut self,
        ion: usize,
        model: &ReadoutModel,
        rng: &mut ChaCha12Rng,
    ) -> Result<Measurement> {
        model.validate()?;
        let p_bright = self.bright_probability(ion)?;
        let bright_sector = rng.gen::<f64>() < p_bright;
        let sector_pop = if bright_sector { p_bright } else { 1.0 - p_bright };
        if sector_pop <= 0.0 {
            return Err(Error::physics("collapse onto empty sector"));
        }
        let scale = 1.0 / sector_pop.sqrt();
        let fock_dim = self.n_max + 1;
        let shift = 3usize.pow((self.n_ions - ion) as u32);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            let in_bright = i / fock_dim / shift % 3 == 0;
            if in_bright == bright_sector {
                *amp *= scale;
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        let rate_per_100ms = if bright_sector { model.bright_rate } else { model.dark_rate };
        let mean = rate_per_100ms * model.duration / 0.1;
        let photons = if mean > 0.0 {
            rand_distr::Poisson::new(mean)
                .map_err(|_| Error::physics("invalid Poisson rate"))?
                .sample(rng) as u64
        } else {
            0
        };
        let outcome = if photons as f64 >= model.threshold { Outcome::Bright } else { Outcome::Dark };
        Ok(Measurement { outcome, photons })
    }

}

/// Fluorescence detection parameters. Rates are photon counts per 100 ms.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReadoutModel {
    pub bright_rate: f64,
    pub dark_rate: f64,
    /// Detection window, s.
    pub duration: f64,
    /// Counts at or above this classify as bright.
    pub threshold: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        ReadoutModel { bright_rate: 2000.0, dark_rate: 150.0, duration: 0.1, threshold: 1075.0 }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.dark_rate >= 0.0) || !(self.bright_rate > self.dark_rate) {
            return Err(Error::physics("readout needs bright_rate > dark_rate >= 0"));
        }
        if !(self.duration > 0.0) || !(self.threshold >= 0.0) {
            return Err(Error::physics("readout duration and threshold must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub outcome: Outcome,
    pub photons: u64,
}

/// |<a|b>|^2 for equal-shape states.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.n_ions != b.n_ions || a.n_max != b.n_max {
        return Err(Error::physics("fidelity of states with different shapes"));
    }
    let overlap: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm_sqr())
}

/// Deterministic generator for all sampling in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent substream of the same seed, for fan-out work such as
/// truth-table rows.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}

/// Serializes nonzero amplitudes as `basis_label,re,im` rows after a header
/// comment carrying the shape. Floats use exponent form, which round-trips
/// bit-exactly.
pub fn format_state_csv(state: &QuantumState) -> String {
    let mut out = format!("# ions={} n_max={}\n", state.n_ions, state.n_max);
    for (i, amp) in state.amplitudes.iter().enumerate() {
        if amp.re != 0.0 || amp.im != 0.0 {
            out.push_str(&format!("{},{:e},{:e}\n", state.label_of(i), amp.re, amp.im));
        }
    }
    out
}

/// Reads back the `format_state_csv` form. Unlisted amplitudes are zero; the
/// shape comes from the `# ions=.. n_max=..` header when present, otherwise it
/// is inferred from the rows. Norm must be 1 within 1e-6.
pub fn parse_state_csv(text: &str) -> Result<QuantumState> {
    struct Row {
        spins: Vec<Level>,
        n: usize,
        amp: Complex64,
        line: usize,
    }

    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Row> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if declared.is_none() {
                declared = parse_shape_header(rest);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line_num,
                1,
                format!("expected 3 comma-separated fields, got {}", fields.len()),
            ));
        }
        let col_of = |field: usize| -> usize {
            fields[..field].iter().map(|f| f.chars().count() + 1).sum::<usize>() + 1
        };
        let (spins, n) = parse_basis_label(fields[0].trim())
            .ok_or_else(|| Error::parse(line_num, 1, "malformed basis label"))?;
        let re: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_num, col_of(1), "malformed real part"))?;
        let im: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_num, col_of(2), "malformed imaginary part"))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::parse(line_num, col_of(1), "amplitude must be finite"));
        }
        rows.push(Row { spins, n, amp: Complex64::new(re, im), line: line_num });
    }

    if rows.is_empty() {
        return Err(Error::parse(1, 1, "no amplitude rows"));
    }
    let n_ions = declared.map(|(n, _)| n).unwrap_or(rows[0].spins.len());
    let n_max = declared
        .map(|(_, m)| m)
        .unwrap_or_else(|| rows.iter().map(|r| r.n).max().unwrap().max(1));

    let mut state = QuantumState::ground_state(n_ions, n_max)
        .map_err(|e| Error::parse(rows[0].line, 1, e.to_string()))?;
    state.amplitudes[0] = Complex64::new(0.0, 0.0);
    let mut seen = vec![false; state.dim()];
    for row in &rows {
        if row.spins.len() != n_ions {
            return Err(Error::parse(
                row.line,
                1,
                format!("label has {} ions, expected {n_ions}", row.spins.len()),
            ));
        }
        if row.n > n_max {
            return Err(Error::parse(
                row.line,
                1,
                format!("Fock occupation {} beyond n_max {n_max}", row.n),
            ));
        }
        let idx = state.basis_index(&row.spins, row.n).expect("bounds checked");
        if seen[idx] {
            return Err(Error::parse(row.line, 1, "duplicate basis label"));
        }
        seen[idx] = true;
        state.amplitudes[idx] = row.amp;
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::physics(format!("state file norm {norm} is not 1")));
    }
    Ok(state)
}

fn parse_shape_header(rest: &str) -> Option<(usize, usize)> {
    let mut ions = None;
    let mut n_max = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix("ions=") {
            ions = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("n_max=") {
            n_max = v.parse().ok();
        }
    }
    Some((ions?, n_max?))
}

fn parse_basis_label(label: &str) -> Option<(Vec<Level>, usize)> {
    let rest = label.strip_prefix('|')?;
    let (spins_str, rest) = rest.split_once('>')?;
    let rest = rest.strip_prefix('|')?;
    let n_str = rest.strip_suffix('>')?;
    if spins_str.is_empty() || n_str.is_empty() || !n_str.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let spins: Option<Vec<Level>> = spins_str.chars().map(Level::from_char).collect();
    Some((spins?, n_str.parse().ok()?))
}
