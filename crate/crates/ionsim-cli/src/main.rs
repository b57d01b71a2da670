//! Command-line front end: trap characterization, chain geometry, normal
//! modes, circuit compilation to pulse programs, schedule simulation, error
//! and timing budgets, and sideband absorption spectra.
//!
//! Data goes to files under `--out-dir`; stderr carries diagnostics only.
//! Exit codes: 0 success, 1 file I/O trouble, 2 malformed input text or
//! usage, 3 physically invalid parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ionsim::chain::{self, LaserConfig};
use ionsim::gates::{self, CompileContext, GateSpec, PulseSchedule};
use ionsim::interaction::{self, ModeSpec, Pulse, Regime};
use ionsim::statespace::{self, Level, Outcome, QuantumState, ReadoutModel};
use ionsim::trap::{self, IonSpecies};
use ionsim::{budget, synthesis};

const TAU: f64 = std::f64::consts::TAU;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}

/// Failure paired with its exit code: 1 file I/O, 2 parse, 3 physics.
#[derive(Debug)]
enum Failure {
    Io { path: PathBuf, msg: String },
    Parse { path: PathBuf, line: usize, col: usize, msg: String },
    Physics(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io { .. } => 1,
            Failure::Parse { .. } => 2,
            Failure::Physics(_) => 3,
        }
    }

    /// Attributes parse positions to the file the text came from.
    fn in_file(path: &Path, err: ionsim::Error) -> Failure {
        match err {
            ionsim::Error::Parse { line, col, msg } => {
                Failure::Parse { path: path.to_path_buf(), line, col, msg }
            }
            ionsim::Error::Physics(msg) => Failure::Physics(msg),
        }
    }
}

impl From<ionsim::Error> for Failure {
    fn from(err: ionsim::Error) -> Failure {
        Failure::in_file(Path::new("<arguments>"), err)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io { path, msg } => write!(f, "{}: {msg}", path.display()),
            Failure::Parse { path, line, col, msg } => {
                write!(f, "{}:{line}:{col}: {msg}", path.display())
            }
            Failure::Physics(msg) => f.write_str(msg),
        }
    }
}

/// Ion-string processor toolbox: trap and chain characterization, pulse
/// compilation and simulation, error budgets and spectra.
///
/// Flags and file formats use Hz for frequencies (converted to angular
/// frequencies internally), radians for angles and phases, meters and
/// seconds elsewhere. Outputs are deterministic and record the --seed value
/// (a `# seed=` comment in CSV and pulse files, a "seed" field in JSON).
#[derive(Parser)]
#[command(name = "ionsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a trap operating point from a key = value config file
    Trap(TrapArgs),
    /// Solve ion-string equilibrium positions
    Chain(ChainArgs),
    /// Axial normal modes and per-ion Lamb-Dicke parameters
    Modes(ModesArgs),
    /// Compile a circuit into a timed pulse program
    Compile(CompileArgs),
    /// Simulate a circuit or pulse program on a state vector
    Run(RunArgs),
    /// Cooling, off-resonant and gate-speed budget report
    Estimate(EstimateArgs),
    /// Sideband absorption spectrum I(delta)
    Spectrum(SpectrumArgs),
}

impl Command {
    fn dispatch(self) -> Result<(), Failure> {
        match self {
            Command::Trap(args) => args.run(),
            Command::Chain(args) => args.run(),
            Command::Modes(args) => args.run(),
            Command::Compile(args) => args.run(),
            Command::Run(args) => args.run(),
            Command::Estimate(args) => args.run(),
            Command::Spectrum(args) => args.run(),
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory, created if missing
    #[arg(long, default_value = ".", value_name = "DIR")]
    out_dir: PathBuf,
    /// Output file stem (default: the subcommand name)
    #[arg(long)]
    stem: Option<String>,
    /// Seed recorded in every output and driving any sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl OutputArgs {
    fn file(&self, fallback: &str, ext: &str) -> PathBuf {
        let stem = self.stem.as_deref().unwrap_or(fallback);
        self.out_dir.join(format!("{stem}.{ext}"))
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Io { path: path.to_path_buf(), msg: e.to_string() })
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::Io { path: dir.to_path_buf(), msg: e.to_string() })?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| Failure::Io { path: path.to_path_buf(), msg: e.to_string() })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Physics(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

#[derive(Args)]
struct SpeciesArgs {
    /// Ion mass, atomic mass units
    #[arg(long, default_value_t = 40.0)]
    mass_amu: f64,
    /// Ion charge, elementary charges
    #[arg(long, default_value_t = 1)]
    charge_e: u32,
}

impl SpeciesArgs {
    fn species(&self) -> Result<IonSpecies, Failure> {
        Ok(IonSpecies::new(self.mass_amu, self.charge_e)?)
    }
}

#[derive(Args)]
struct BeamArgs {
    /// Axial secular frequency omega_z / 2 pi, Hz
    #[arg(long, default_value_t = 700e3)]
    omega_z_hz: f64,
    /// Laser wavelength, m
    #[arg(long, default_value_t = 729e-9)]
    wavelength_m: f64,
    /// Beam angle to the trap axis, radians
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    angle_rad: f64,
    /// Resonant coupling strength |lambda| / 2 pi, Hz
    #[arg(long, default_value_t = 50e3)]
    lambda_hz: f64,
}

impl BeamArgs {
    fn omega_z(&self) -> f64 {
        TAU * self.omega_z_hz
    }

    fn laser(&self) -> Result<LaserConfig, Failure> {
        Ok(LaserConfig::travelling(self.wavelength_m, self.angle_rad, TAU * self.lambda_hz)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    /// First-order Lamb-Dicke coupling rates
    Ld,
    /// Exact Laguerre-function coupling rates
    Exact,
    /// Numerical integration with off-resonant terms
    Full,
}

impl RegimeArg {
    fn regime(self) -> Regime {
        match self {
            RegimeArg::Ld => Regime::IdealLd,
            RegimeArg::Exact => Regime::ExactLaguerre,
            RegimeArg::Full => Regime::FullOffresonant,
        }
    }
}

#[derive(Args)]
struct ChainContextArgs {
    /// Ions in the chain (default: the largest ion index the circuit uses)
    #[arg(long)]
    ions: Option<usize>,
    #[command(flatten)]
    species: SpeciesArgs,
    #[command(flatten)]
    beam: BeamArgs,
    /// Bus mode index: 0 is the center-of-mass mode
    #[arg(long, default_value_t = 0)]
    mode: usize,
    /// Override the bus-mode Lamb-Dicke parameter on every ion
    #[arg(long)]
    eta: Option<f64>,
    /// Coupling model stamped on compiled pulses
    #[arg(long, value_enum, default_value_t = RegimeArg::Ld)]
    regime: RegimeArg,
}

impl ChainContextArgs {
    fn context(&self, n_ions: usize) -> Result<CompileContext, Failure> {
        let species = self.species.species()?;
        let string = chain::equilibrium_positions(n_ions, &species, self.beam.omega_z())?;
        let spectrum = chain::normal_modes(&string)?;
        let laser = self.beam.laser()?;
        match self.eta {
            Some(eta) => {
                let nu = *spectrum.nu.get(self.mode).ok_or_else(|| {
                    Failure::Physics(format!(
                        "mode index {} out of range for {n_ions} ions",
                        self.mode
                    ))
                })?;
                let mut ctx = CompileContext::uniform(
                    n_ions,
                    laser.lambda_mag,
                    eta,
                    nu,
                    self.regime.regime(),
                )?;
                ctx.bus_mode = self.mode;
                Ok(ctx)
            }
            None => {
                Ok(gates::context_from_chain(&spectrum, &laser, self.mode, self.regime.regime())?)
            }
        }
    }
}

/// Register the circuit's contract starts from when no initial state is given.
#[derive(Clone, Copy, PartialEq)]
enum StartRegister {
    AllGround,
    AllExcited,
}

struct LoadedCircuit {
    gates: Vec<GateSpec>,
    implied_ions: usize,
    start: StartRegister,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CircuitSource {
    /// Circuit text file (rot, cnot, ccnot, ncnot, crot, monroe)
    #[arg(long, value_name = "FILE")]
    circuit: Option<PathBuf>,
    /// Use the built-in N-ion W-state preparation network
    #[arg(long, value_name = "N")]
    w_state: Option<usize>,
    /// Synthesize the three-qubit network preparing a target-state CSV
    #[arg(long, value_name = "FILE")]
    target: Option<PathBuf>,
}

impl CircuitSource {
    fn load(&self) -> Result<LoadedCircuit, Failure> {
        if let Some(path) = &self.circuit {
            let text = read_input(path)?;
            let gates = gates::parse_circuit(&text).map_err(|e| Failure::in_file(path, e))?;
            let implied_ions = gates.iter().flat_map(|g| g.ions()).max().unwrap_or(1);
            return Ok(LoadedCircuit { gates, implied_ions, start: StartRegister::AllGround });
        }
        if let Some(n) = self.w_state {
            let gates = synthesis::w_state_network(n)?;
            return Ok(LoadedCircuit { gates, implied_ions: n, start: StartRegister::AllExcited });
        }
        let path = self.target.as_ref().expect("clap enforces exactly one source");
        let text = read_input(path)?;
        let target =
            synthesis::parse_target_state_csv(&text).map_err(|e| Failure::in_file(path, e))?;
        let gates = synthesis::arbitrary_state_network(&target)?;
        Ok(LoadedCircuit { gates, implied_ions: target.n, start: StartRegister::AllGround })
    }
}

#[derive(Args)]
struct TrapArgs {
    /// Trap operating-point config file
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(serde::Serialize)]
struct TrapReport {
    seed: u64,
    a: f64,
    b: f64,
    stable: bool,
    omega_x_hz: Option<f64>,
    omega_y_hz: Option<f64>,
    omega_r_hz: f64,
    omega_z_hz: f64,
    axial_depth_ev: f64,
    radial_depth_ev: f64,
}

impl TrapArgs {
    fn run(self) -> Result<(), Failure> {
        let text = read_input(&self.config)?;
        let cfg = trap::parse_trap_config(&text).map_err(|e| Failure::in_file(&self.config, e))?;
        let summary = trap::trap_characteristics(&cfg)?;
        if !summary.stable {
            eprintln!("warning: operating point is outside the stability region");
        }
        let report = TrapReport {
            seed: self.out.seed,
            a: summary.a,
            b: summary.b,
            stable: summary.stable,
            omega_x_hz: summary.omega_x.map(|w| w / TAU),
            omega_y_hz: summary.omega_y.map(|w| w / TAU),
            omega_r_hz: summary.omega_r / TAU,
            omega_z_hz: summary.omega_z / TAU,
            axial_depth_ev: summary.axial_depth_ev,
            radial_depth_ev: summary.radial_depth_ev,
        };
        write_output(&self.out.file("trap", "report.json"), &to_json(&report)?)
    }
}

#[derive(Args)]
struct ChainArgs {
    /// Number of ions
    #[arg(long)]
    ions: usize,
    #[command(flatten)]
    species: SpeciesArgs,
    /// Axial secular frequency omega_z / 2 pi, Hz
    #[arg(long, default_value_t = 700e3)]
    omega_z_hz: f64,
    #[command(flatten)]
    out: OutputArgs,
}

impl ChainArgs {
    fn run(self) -> Result<(), Failure> {
        let species = self.species.species()?;
        let string = chain::equilibrium_positions(self.ions, &species, TAU * self.omega_z_hz)?;
        let mut csv = format!("# seed={}\n", self.out.seed);
        csv.push_str(&format!(
            "# gamma_m={:e} min_spacing_m={:e} fit_spacing_m={:e}\n",
            string.gamma,
            string.min_spacing(),
            string.min_spacing_fit()
        ));
        csv.push_str("ion,z_gamma,z_m\n");
        for (i, (&zg, &zm)) in string.z.iter().zip(&string.z_phys).enumerate() {
            csv.push_str(&format!("{},{zg:e},{zm:e}\n", i + 1));
        }
        write_output(&self.out.file("chain", "chain.csv"), &csv)
    }
}

#[derive(Args)]
struct ModesArgs {
    /// Number of ions
    #[arg(long)]
    ions: usize,
    #[command(flatten)]
    species: SpeciesArgs,
    #[command(flatten)]
    beam: BeamArgs,
    #[command(flatten)]
    out: OutputArgs,
}

impl ModesArgs {
    fn run(self) -> Result<(), Failure> {
        let species = self.species.species()?;
        let string = chain::equilibrium_positions(self.ions, &species, self.beam.omega_z())?;
        let spectrum = chain::normal_modes(&string)?;
        let laser = self.beam.laser()?;
        let mut csv = format!("# seed={}\n", self.out.seed);
        let mut header = String::from("mode,mu,nu_hz");
        for i in 1..=self.ions {
            header.push_str(&format!(",d{i}"));
        }
        for i in 1..=self.ions {
            header.push_str(&format!(",eta{i}"));
        }
        csv.push_str(&header);
        csv.push('\n');
        for alpha in 0..self.ions {
            let etas = chain::lamb_dicke_parameters(&spectrum, &laser, alpha)?;
            csv.push_str(&format!(
                "{alpha},{:e},{:e}",
                spectrum.mu[alpha],
                spectrum.nu[alpha] / TAU
            ));
            for &d in &spectrum.d[alpha] {
                csv.push_str(&format!(",{d:e}"));
            }
            for &eta in &etas {
                csv.push_str(&format!(",{eta:e}"));
            }
            csv.push('\n');
        }
        write_output(&self.out.file("modes", "modes.csv"), &csv)
    }
}

#[derive(serde::Serialize)]
struct PulseRow {
    index: usize,
    ion: usize,
    k: i64,
    transition: &'static str,
    area_pi: String,
    phase_rad: f64,
    start_s: f64,
    duration_s: f64,
}

#[derive(serde::Serialize)]
struct ScheduleReport {
    seed: u64,
    n_ions: usize,
    bus_mode: usize,
    regime: &'static str,
    pulse_count: usize,
    total_time_s: f64,
    pulses: Vec<PulseRow>,
    /// Effective phase history phi_tilde per ion, radians.
    ledger: BTreeMap<usize, Vec<f64>>,
    warnings: Vec<String>,
}

fn schedule_report(schedule: &PulseSchedule, ctx: &CompileContext, seed: u64) -> ScheduleReport {
    ScheduleReport {
        seed,
        n_ions: ctx.n_ions(),
        bus_mode: schedule.bus_mode,
        regime: ctx.regime.token(),
        pulse_count: schedule.pulses.len(),
        total_time_s: schedule.total_time,
        pulses: schedule
            .pulses
            .iter()
            .enumerate()
            .map(|(index, timed)| PulseRow {
                index,
                ion: timed.pulse.ion,
                k: timed.pulse.k,
                transition: timed.pulse.transition.token(),
                area_pi: timed.pulse.area.to_string(),
                phase_rad: timed.pulse.phase,
                start_s: timed.start,
                duration_s: timed.duration,
            })
            .collect(),
        ledger: schedule.ledger.clone(),
        warnings: schedule.warnings.clone(),
    }
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    source: CircuitSource,
    #[command(flatten)]
    chain: ChainContextArgs,
    #[command(flatten)]
    out: OutputArgs,
}

impl CompileArgs {
    fn run(self) -> Result<(), Failure> {
        let loaded = self.source.load()?;
        let n_ions = self.chain.ions.unwrap_or(loaded.implied_ions);
        let ctx = self.chain.context(n_ions)?;
        let schedule = gates::compile(&loaded.gates, &ctx)?;
        for warning in &schedule.warnings {
            eprintln!("warning: {warning}");
        }
        let program = format!("# seed={}\n{}", self.out.seed, schedule.pulse_text());
        write_output(&self.out.file("compile", "pulses"), &program)?;
        let report = schedule_report(&schedule, &ctx, self.out.seed);
        write_output(&self.out.file("compile", "report.json"), &to_json(&report)?)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RunSource {
    /// Circuit text file (rot, cnot, ccnot, ncnot, crot, monroe)
    #[arg(long, value_name = "FILE")]
    circuit: Option<PathBuf>,
    /// Use the built-in N-ion W-state preparation network
    #[arg(long, value_name = "N")]
    w_state: Option<usize>,
    /// Synthesize the three-qubit network preparing a target-state CSV
    #[arg(long, value_name = "FILE")]
    target: Option<PathBuf>,
    /// Re-run a previously emitted pulse program
    #[arg(long, value_name = "FILE")]
    pulses: Option<PathBuf>,
}

enum RunPlan {
    Circuit(Vec<GateSpec>),
    Pulses(Vec<Pulse>),
}

impl RunSource {
    fn load(&self) -> Result<(RunPlan, usize, StartRegister), Failure> {
        if let Some(path) = &self.pulses {
            let text = read_input(path)?;
            let pulses =
                interaction::parse_pulse_program(&text).map_err(|e| Failure::in_file(path, e))?;
            let implied = pulses.iter().map(|p| p.ion).max().unwrap_or(1);
            return Ok((RunPlan::Pulses(pulses), implied, StartRegister::AllGround));
        }
        let source = CircuitSource {
            circuit: self.circuit.clone(),
            w_state: self.w_state,
            target: self.target.clone(),
        };
        let loaded = source.load()?;
        Ok((RunPlan::Circuit(loaded.gates), loaded.implied_ions, loaded.start))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: RunSource,
    #[command(flatten)]
    chain: ChainContextArgs,
    /// Initial internal levels, one of g/e/r per ion (default: all g, or
    /// all e for --w-state)
    #[arg(long, value_name = "LEVELS")]
    initial_spins: Option<String>,
    /// Initial bus phonon number
    #[arg(long, default_value_t = 0)]
    initial_fock: usize,
    /// Initial state CSV (takes precedence over --initial-spins)
    #[arg(long, value_name = "FILE")]
    initial_state: Option<PathBuf>,
    /// Phonon cutoff of the simulation space
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    /// Override every pulse's coupling model during simulation
    #[arg(long, value_enum, value_name = "REGIME")]
    force_regime: Option<RegimeArg>,
    /// Also write a truth table (2^q simulations over the probed qubits)
    #[arg(long)]
    truth_table: bool,
    /// Qubits the truth table probes, comma separated (default: every ion
    /// the schedule touches); implies --truth-table
    #[arg(long, value_delimiter = ',', value_name = "IONS")]
    qubits: Vec<usize>,
    /// Sample fluorescence readout of the final state this many times
    #[arg(long, value_name = "COUNT")]
    shots: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

impl RunArgs {
    fn run(self) -> Result<(), Failure> {
        let (plan, implied_ions, start) = self.source.load()?;
        let n_ions = self.chain.ions.unwrap_or(implied_ions);
        let ctx = self.chain.context(n_ions)?;
        let schedule = match plan {
            RunPlan::Circuit(circuit) => gates::compile(&circuit, &ctx)?,
            RunPlan::Pulses(pulses) => gates::schedule_pulses(pulses, &ctx)?,
        };
        for warning in &schedule.warnings {
            eprintln!("warning: {warning}");
        }

        let mut state = self.initial_state(&ctx, start)?;
        let sim_warnings = gates::simulate_schedule(
            &schedule,
            &mut state,
            &ctx,
            self.force_regime.map(RegimeArg::regime),
        )?;
        for warning in &sim_warnings {
            eprintln!("warning: {warning}");
        }

        let csv = format!("# seed={}\n{}", self.out.seed, statespace::format_state_csv(&state));
        write_output(&self.out.file("run", "state.csv"), &csv)?;

        if self.truth_table || !self.qubits.is_empty() {
            self.write_truth_table(&schedule, &ctx)?;
        }
        if let Some(shots) = self.shots {
            self.write_shots(&state, &ctx, shots)?;
        }
        Ok(())
    }

    fn initial_state(
        &self,
        ctx: &CompileContext,
        start: StartRegister,
    ) -> Result<QuantumState, Failure> {
        if let Some(path) = &self.initial_state {
            let text = read_input(path)?;
            let state =
                statespace::parse_state_csv(&text).map_err(|e| Failure::in_file(path, e))?;
            if state.n_ions != ctx.n_ions() {
                return Err(Failure::Physics(format!(
                    "initial state has {} ions, chain has {}",
                    state.n_ions,
                    ctx.n_ions()
                )));
            }
            return Ok(state);
        }
        let spins: Vec<Level> = match &self.initial_spins {
            Some(text) => {
                let levels: Option<Vec<Level>> = text.chars().map(Level::from_char).collect();
                let levels = levels.ok_or_else(|| {
                    Failure::Physics(format!("initial spins must use g/e/r, got {text:?}"))
                })?;
                if levels.len() != ctx.n_ions() {
                    return Err(Failure::Physics(format!(
                        "initial spins list {} ions, chain has {}",
                        levels.len(),
                        ctx.n_ions()
                    )));
                }
                levels
            }
            None => {
                let fill = match start {
                    StartRegister::AllGround => Level::G,
                    StartRegister::AllExcited => Level::E,
                };
                vec![fill; ctx.n_ions()]
            }
        };
        Ok(QuantumState::basis(&spins, self.initial_fock, self.n_max)?)
    }

    fn write_truth_table(
        &self,
        schedule: &PulseSchedule,
        ctx: &CompileContext,
    ) -> Result<(), Failure> {
        let qubits: Vec<usize> = if self.qubits.is_empty() {
            let touched: BTreeSet<usize> =
                schedule.pulses.iter().map(|t| t.pulse.ion).collect();
            touched.into_iter().collect()
        } else {
            self.qubits.clone()
        };
        if qubits.len() > 10 {
            return Err(Failure::Physics(format!(
                "truth table over {} qubits is too large",
                qubits.len()
            )));
        }
        let rows = gates::truth_table(schedule, ctx, &qubits, self.n_max)?;
        let mut csv = format!("# seed={}\n", self.out.seed);
        csv.push_str("input,output,re,im,leakage\n");
        for row in &rows {
            let input: String = row.input.iter().map(|l| l.to_char()).collect();
            if row.outputs.is_empty() {
                csv.push_str(&format!("{input},,0e0,0e0,{:e}\n", row.leakage));
            }
            for (label, amp) in &row.outputs {
                csv.push_str(&format!(
                    "{input},{label},{:e},{:e},{:e}\n",
                    amp.re, amp.im, row.leakage
                ));
            }
        }
        write_output(&self.out.file("run", "truth.csv"), &csv)
    }

    fn write_shots(
        &self,
        state: &QuantumState,
        ctx: &CompileContext,
        shots: u64,
    ) -> Result<(), Failure> {
        let model = ReadoutModel::default();
        let mut csv = format!("# seed={}\n", self.out.seed);
        csv.push_str("shot,ion,outcome,photons\n");
        for shot in 0..shots {
            let mut sampled = state.clone();
            let mut rng = statespace::substream_rng(self.out.seed, shot);
            for ion in 1..=ctx.n_ions() {
                let m = sampled.measure_internal(ion, &model, &mut rng)?;
                let outcome = match m.outcome {
                    Outcome::Bright => "bright",
                    Outcome::Dark => "dark",
                };
                csv.push_str(&format!("{shot},{ion},{outcome},{}\n", m.photons));
            }
        }
        write_output(&self.out.file("run", "shots.csv"), &csv)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    species: SpeciesArgs,
    #[command(flatten)]
    beam: BeamArgs,
    /// Ions in the chain
    #[arg(long, default_value_t = 2)]
    ions: usize,
    /// Ions the gate acts on
    #[arg(long, default_value_t = 2)]
    gate_ions: usize,
    /// Target gate fidelity for the speed limit
    #[arg(long, default_value_t = 0.99)]
    fidelity: f64,
    /// Mean phonon occupation for the Lamb-Dicke margin
    #[arg(long, default_value_t = 0.5)]
    nbar: f64,
    /// Phonon number probed by the off-resonant budget
    #[arg(long, default_value_t = 0)]
    n_fock: usize,
    /// Single-qubit pulse time, s
    #[arg(long, default_value_t = 5e-6)]
    t_a_s: f64,
    /// Also write the N = 2,3,6,9,10 gate-time table CSV
    #[arg(long)]
    table: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(serde::Serialize)]
struct EstimateReport {
    seed: u64,
    #[serde(flatten)]
    budget: budget::BudgetReport,
}

impl EstimateArgs {
    fn run(self) -> Result<(), Failure> {
        let species = self.species.species()?;
        let budget = budget::budget_report(
            &species,
            self.beam.wavelength_m,
            self.beam.angle_rad,
            self.beam.omega_z(),
            TAU * self.beam.lambda_hz,
            self.nbar,
            self.n_fock,
            self.ions,
            self.gate_ions,
            self.fidelity,
            self.t_a_s,
        )?;
        let report = EstimateReport { seed: self.out.seed, budget };
        write_output(&self.out.file("estimate", "report.json"), &to_json(&report)?)?;
        if self.table {
            let rows = budget::gate_time_table(
                &species,
                self.beam.wavelength_m,
                self.beam.angle_rad,
                self.beam.omega_z(),
                self.t_a_s,
            )?;
            let csv =
                format!("# seed={}\n{}", self.out.seed, budget::format_gate_time_table(&rows));
            write_output(&self.out.file("estimate", "table.csv"), &csv)?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct SpectrumArgs {
    /// Ions in the chain
    #[arg(long, default_value_t = 1)]
    ions: usize,
    /// Addressed ion, 1-based
    #[arg(long, default_value_t = 1)]
    ion: usize,
    #[command(flatten)]
    species: SpeciesArgs,
    #[command(flatten)]
    beam: BeamArgs,
    /// Mean thermal occupation of every mode
    #[arg(long, default_value_t = 0.5)]
    nbar: f64,
    /// Highest sideband order per mode
    #[arg(long, default_value_t = 2)]
    max_order: i64,
    /// Phonon cutoff of the thermal distributions
    #[arg(long, default_value_t = 40)]
    n_top: usize,
    /// Lorentzian display linewidth, Hz (default: omega_z / 100)
    #[arg(long)]
    linewidth_hz: Option<f64>,
    /// Detuning grid half-width, Hz (default: 20% past the outermost line)
    #[arg(long)]
    span_hz: Option<f64>,
    /// Grid points
    #[arg(long, default_value_t = 2001)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

impl SpectrumArgs {
    fn run(self) -> Result<(), Failure> {
        if self.ion < 1 || self.ion > self.ions {
            return Err(Failure::Physics(format!(
                "ion {} outside 1..={}",
                self.ion, self.ions
            )));
        }
        if self.points < 2 {
            return Err(Failure::Physics("need at least two grid points".into()));
        }
        let species = self.species.species()?;
        let string = chain::equilibrium_positions(self.ions, &species, self.beam.omega_z())?;
        let spectrum = chain::normal_modes(&string)?;
        let laser = self.beam.laser()?;
        let occupation = interaction::thermal_occupation(self.nbar, self.n_top)?;
        let mut modes = Vec::with_capacity(self.ions);
        for alpha in 0..self.ions {
            let etas = chain::lamb_dicke_parameters(&spectrum, &laser, alpha)?;
            modes.push(ModeSpec {
                eta: etas[self.ion - 1],
                nu: spectrum.nu[alpha],
                occupation: occupation.clone(),
            });
        }
        let lines = interaction::absorption_lines(&modes, self.max_order)?;
        let outermost = lines.iter().map(|l| l.delta.abs()).fold(0.0, f64::max);
        let span = match self.span_hz {
            Some(hz) => TAU * hz,
            None => (1.2 * outermost).max(self.beam.omega_z()),
        };
        let linewidth = TAU * self.linewidth_hz.unwrap_or(self.beam.omega_z_hz / 100.0);
        let grid: Vec<f64> = (0..self.points)
            .map(|i| -span + 2.0 * span * i as f64 / (self.points - 1) as f64)
            .collect();
        let intensity = interaction::render_spectrum(&lines, &grid, linewidth)?;
        let mut csv = format!("# seed={}\n", self.out.seed);
        csv.push_str("delta_hz,intensity\n");
        for (delta, value) in grid.iter().zip(&intensity) {
            csv.push_str(&format!("{:e},{value:e}\n", delta / TAU));
        }
        write_output(&self.out.file("spectrum", "spectrum.csv"), &csv)
    }
}
