//! Run configuration, subcommand dispatch and result emission for the
//! `erasure-qec` binary.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! [code]
//! distance = 5
//! rounds = 5          # optional, defaults to the distance
//!
//! [noise]
//! p = 0.003
//! e = 0.02
//! scheme = "erasure"  # erasure | standard | code_capacity
//! # p_m = 0.002       # optional, defaults to 2p/3
//! # q_plus = 0.0
//! # q_minus = 0.0
//!
//! [run]
//! shots = 100000
//! seed = 7
//! # realizations, n_rep, threads
//!
//! [sweep]             # required by `sweep`
//! axis = "p"          # the other rate is taken from [noise]
//! values = [0.002, 0.003, 0.004]
//! distances = [3, 5, 7]
//!
//! [output]
//! path = "results.csv"
//! format = "csv"      # csv | json
//!
//! [device]            # optional, for `physics` and `evolve`
//! g_c = 2.136e8       # any DeviceParams field, rad/s and seconds
//!
//! [evolve]            # optional
//! levels = 3
//! tol = 1e-8
//! initial = 3
//! samples = 220
//! calibrate = true
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{estimate_pfail, fit_threshold, sweep, Axis, PfailEstimate, SamplingConfig, SweepSpec, ThresholdFit};
use crate::code_layout::build_layout;
use crate::device_physics::{
    dispersive_shifts, dual_rail_eff_params, error_budget, gf_eff_params, leakage_estimate, measurement_dephasing_rate, qubit_freq_vs_photons, spinlock_params, DeviceParams, DispersiveShifts,
    DualRailCoupling, ErrorBudget, FourthOrder, GfCoupling, LeakageEstimate, PhotonDependence, SpinLock,
};
use crate::error::{Error, Result};
use crate::gate_evolve::{calibrate_g_max, cx_composition_check, gate_trace, sqrt_iswap_sim, SqrtIswapResult};
use crate::noise::{NoiseParams, Scheme};
use crate::pauli_sim::Simulator;

pub const SEED_ENV: &str = "ERASURE_QEC_SEED";
pub const THREADS_ENV: &str = "ERASURE_QEC_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SIMULATION: i32 = 2;
pub const EXIT_FIT: i32 = 3;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::EmptyRecords => EXIT_CONFIG,
        Error::FitFailed(_) | Error::Optimizer { .. } => EXIT_FIT,
        _ => EXIT_SIMULATION,
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub code: Option<CodeSection>,
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub device: Option<DeviceSection>,
    pub evolve: Option<EvolveSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    pub distance: usize,
    pub rounds: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub p: f64,
    pub p_m: Option<f64>,
    pub e: f64,
    #[serde(default)]
    pub q_plus: f64,
    #[serde(default)]
    pub q_minus: f64,
    pub scheme: Scheme,
}

impl NoiseSection {
    pub fn params(&self) -> NoiseParams {
        let mut n = NoiseParams::new(self.p, self.e, self.scheme).with_detection(self.q_plus, self.q_minus);
        if let Some(p_m) = self.p_m {
            n = n.with_p_m(p_m);
        }
        n
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub shots: Option<u64>,
    pub realizations: Option<u64>,
    pub n_rep: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub distances: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Overrides for [`DeviceParams::fig3`]; every field is optional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub omega0: Option<f64>,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub g_c: Option<f64>,
    pub g_12: Option<f64>,
    pub g_rt1: Option<f64>,
    pub g_rt2: Option<f64>,
    pub kappa: Option<f64>,
    pub n_bar: Option<f64>,
    pub eps_d: Option<f64>,
    pub t1: Option<f64>,
    pub t_gate: Option<f64>,
    pub t_meas: Option<f64>,
    pub t_ramp: Option<f64>,
    pub q_minus: Option<f64>,
}

impl DeviceSection {
    pub fn params(&self) -> DeviceParams {
        let d = DeviceParams::fig3();
        DeviceParams {
            omega0: self.omega0.unwrap_or(d.omega0),
            eta: self.eta.unwrap_or(d.eta),
            delta: self.delta.unwrap_or(d.delta),
            g_c: self.g_c.unwrap_or(d.g_c),
            g_12: self.g_12.unwrap_or(d.g_12),
            g_rt1: self.g_rt1.unwrap_or(d.g_rt1),
            g_rt2: self.g_rt2.unwrap_or(d.g_rt2),
            kappa: self.kappa.unwrap_or(d.kappa),
            n_bar: self.n_bar.unwrap_or(d.n_bar),
            eps_d: self.eps_d.unwrap_or(d.eps_d),
            t1: self.t1.unwrap_or(d.t1),
            t_gate: self.t_gate.unwrap_or(d.t_gate),
            t_meas: self.t_meas.unwrap_or(d.t_meas),
            t_ramp: self.t_ramp.unwrap_or(d.t_ramp),
            q_minus: self.q_minus.unwrap_or(d.q_minus),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_initial")]
    pub initial: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Refine `g_c` within ±3% to minimize the infidelity before tracing.
    #[serde(default)]
    pub calibrate: bool,
}

fn default_levels() -> usize {
    3
}
fn default_tol() -> f64 {
    1e-8
}
fn default_initial() -> usize {
    3
}
fn default_samples() -> usize {
    220
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            levels: default_levels(),
            tol: default_tol(),
            initial: default_initial(),
            samples: default_samples(),
            calibrate: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    fn code(&self) -> Result<CodeSection> {
        self.code.ok_or_else(|| config_err("missing [code] section"))
    }

    fn noise(&self) -> Result<NoiseSection> {
        self.noise.ok_or_else(|| config_err("missing [noise] section"))
    }

    pub fn sampling(&self) -> Result<SamplingConfig> {
        let run = &self.run;
        if run.shots.is_none() && run.realizations.is_none() {
            return Err(config_err("[run] needs shots or realizations"));
        }
        Ok(SamplingConfig {
            shots: run.shots.unwrap_or(0),
            realizations: run.realizations,
            n_rep: run.n_rep,
        })
    }

    /// Check everything the subcommand will need before any work starts.
    pub fn validate(&self, command: Command) -> Result<()> {
        let check = |r: Result<()>| r.map_err(|e| config_err(e.to_string()));
        if self.run.threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }
        match command {
            Command::Simulate | Command::Sweep => {
                let noise = self.noise()?;
                check(noise.params().validate())?;
                let sampling = self.sampling()?;
                if sampling.shots == 0 && sampling.realizations.unwrap_or(0) == 0 {
                    return Err(config_err("shots must be positive"));
                }
                if self.run.n_rep == Some(0) {
                    return Err(config_err("n_rep must be positive"));
                }
                if command == Command::Simulate {
                    let code = self.code()?;
                    check(build_layout(code.distance).map(|_| ()))?;
                    if code.rounds == Some(0) {
                        return Err(config_err("rounds must be positive"));
                    }
                } else {
                    let sw = self.sweep.as_ref().ok_or_else(|| config_err("missing [sweep] section"))?;
                    if sw.values.is_empty() || sw.distances.is_empty() {
                        return Err(config_err("sweep values and distances must be non-empty"));
                    }
                    for &d in &sw.distances {
                        check(build_layout(d).map(|_| ()))?;
                    }
                    if !sw.values.windows(2).all(|w| w[0] < w[1]) {
                        return Err(config_err("sweep values must be strictly increasing"));
                    }
                    for &v in &sw.values {
                        let mut n = noise;
                        match sw.axis {
                            Axis::P => n.p = v,
                            Axis::E => n.e = v,
                        }
                        check(n.params().validate())?;
                    }
                }
            }
            Command::Fit => {}
            Command::Physics | Command::Evolve => {
                let ev = self.evolve.unwrap_or_default();
                if ev.levels < 3 || ev.initial > 3 || ev.samples == 0 || !(ev.tol > 0.0) {
                    return Err(config_err("[evolve] needs levels >= 3, initial in 0..=3, samples > 0 and tol > 0"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Fit,
    Physics,
    Evolve,
}

/// Write estimates as CSV with columns
/// `scheme,d,p,p_m,e,shots,failures,p_fail,stderr`.
pub fn write_csv<W: Write>(records: &[PfailEstimate], w: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<PfailEstimate>> {
    let mut rdr = csv::Reader::from_reader(r);
    let records = rdr.deserialize().collect::<std::result::Result<Vec<PfailEstimate>, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    Ok(records)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Write `records` to `path` in `format`. The file is not created when
/// there is nothing to write.
pub fn emit_results(records: &[PfailEstimate], format: Format, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let file = BufWriter::new(File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?);
    match format {
        Format::Csv => write_csv(records, file),
        Format::Json => write_json(records, file),
    }
}

/// Records from a CSV or JSON file, chosen by extension.
pub fn load_records(path: &Path) -> Result<Vec<PfailEstimate>> {
    let file = File::open(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let records: Vec<PfailEstimate> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_reader(file)?
    } else {
        read_csv(file)?
    };
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    Ok(records)
}

pub fn simulate(config: &RunConfig) -> Result<PfailEstimate> {
    config.validate(Command::Simulate)?;
    let code = config.code()?;
    let params = config.noise()?.params();
    let sim = Simulator::new(build_layout(code.distance)?, code.rounds.unwrap_or(code.distance))?;
    estimate_pfail(&sim, &params, &config.sampling()?, config.seed())
}

/// Every estimate of a sweep and the threshold fit over them. The records
/// are kept even when the fit fails.
#[derive(Debug)]
pub struct SweepReport {
    pub records: Vec<PfailEstimate>,
    pub fit: Result<ThresholdFit>,
}

pub fn run_sweep(config: &RunConfig) -> Result<SweepReport> {
    config.validate(Command::Sweep)?;
    let noise = config.noise()?;
    let sw = config.sweep.as_ref().ok_or_else(|| config_err("missing [sweep] section"))?;
    let spec = SweepSpec {
        schemes: vec![noise.scheme],
        axis: sw.axis,
        values: sw.values.clone(),
        fixed: vec![match sw.axis {
            Axis::P => noise.e,
            Axis::E => noise.p,
        }],
        distances: sw.distances.clone(),
        p_m: noise.p_m,
        sampling: config.sampling()?,
        seed: config.seed(),
    };
    let result = sweep(&spec)?;
    let records: Vec<PfailEstimate> = result.estimates().cloned().collect();
    let fit = fit_threshold(&records, sw.axis);
    Ok(SweepReport { records, fit })
}

/// Closed-form quantities evaluated at one parameter set.
#[derive(Clone, Debug, Serialize)]
pub struct PhysicsReport {
    pub params: DeviceParams,
    pub dual_rail: DualRailCoupling,
    pub gf: Option<GfCoupling>,
    pub dispersive: DispersiveShifts,
    /// Ω(n̄) with the fourth-order term at the mean readout coupling.
    pub photon_dependence: PhotonDependence,
    /// Γ from the magnitude sum of the two photon slopes.
    pub measurement_dephasing_rate: f64,
    pub t_phi_meas: f64,
    pub leakage: LeakageEstimate,
    pub spin_lock: SpinLock,
    pub error_budget: ErrorBudget,
    pub dispersive_valid: bool,
}

pub fn physics_report(params: &DeviceParams) -> Result<PhysicsReport> {
    let dispersive = dispersive_shifts(params.g_rt1, params.g_rt2, params.delta, params.eta)?;
    let fourth = FourthOrder::On {
        g_rt: (params.g_rt1 + params.g_rt2) / 2.0,
        g_12: params.g_12,
        delta: params.delta,
        eta: params.eta,
    };
    let photon_dependence = qubit_freq_vs_photons(params.n_bar, params.omega0, &dispersive, fourth)?;
    let rate = measurement_dephasing_rate(params.kappa, photon_dependence.slope_magnitude_sum, params.n_bar)?;
    let t_phi_meas = 1.0 / rate;
    Ok(PhysicsReport {
        params: *params,
        dual_rail: dual_rail_eff_params(params.g_c, params.delta, params.eta, params.omega0)?,
        gf: gf_eff_params(params.g_c, params.delta, params.eta).ok(),
        dispersive,
        photon_dependence,
        measurement_dephasing_rate: rate,
        t_phi_meas,
        leakage: leakage_estimate(params.g_c, params.delta, params.t_ramp, None)?,
        spin_lock: spinlock_params(params.eps_d, params.eta)?,
        error_budget: error_budget(params.t_gate, params.t_meas, params.t1, t_phi_meas, params.q_minus)?,
        dispersive_valid: params.dispersive_valid(),
    })
}

/// Gate simulation summary written next to the trace.
#[derive(Clone, Debug, Serialize)]
pub struct EvolveSummary {
    pub result: SqrtIswapResult,
    pub cx_infidelity: f64,
}

pub fn evolve(config: &RunConfig) -> Result<(EvolveSummary, crate::gate_evolve::Trace)> {
    config.validate(Command::Evolve)?;
    let ev = config.evolve.unwrap_or_default();
    let mut params = config.device.unwrap_or_default().params();
    let result = if ev.calibrate {
        calibrate_g_max(&params, ev.levels, ev.tol, 0.03)?
    } else {
        sqrt_iswap_sim(&params, ev.levels, ev.tol)?
    };
    params.g_c = result.g_max;
    let trace = gate_trace(&params, ev.levels, ev.tol, ev.initial, ev.samples)?;
    let cx_infidelity = cx_composition_check(&result);
    Ok((EvolveSummary { result, cx_infidelity }, trace))
}

/// Resolve seed and thread count with precedence flag, environment, config.
pub fn apply_overrides(config: &mut RunConfig, seed: Option<u64>, threads: Option<usize>) -> Result<()> {
    let env = |name: &str| -> Result<Option<String>> {
        match std::env::var(name) {
            Ok(v) => Ok(Some(v)),
            Err(std::env::VarError::NotPresent) => Ok(None),
            Err(e) => Err(config_err(format!("{name}: {e}"))),
        }
    };
    if let Some(s) = env(SEED_ENV)? {
        config.run.seed = Some(s.trim().parse().map_err(|_| config_err(format!("{SEED_ENV}={s:?} is not an integer")))?);
    }
    if let Some(t) = env(THREADS_ENV)? {
        config.run.threads = Some(t.trim().parse().map_err(|_| config_err(format!("{THREADS_ENV}={t:?} is not an integer")))?);
    }
    if seed.is_some() {
        config.run.seed = seed;
    }
    if threads.is_some() {
        config.run.threads = threads;
    }
    Ok(())
}
