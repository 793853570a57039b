//! Command-line front end.
//!
//! Every subcommand reads its options from flags and, optionally, from a
//! section of a TOML file given with `--config`; flags win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{self, dissipativity_reduce, hinf_grid_sup, weighted_reduce, Model, SupplyRate, WeightedBackMap};
use crate::kernels::{Axis, KernelSpec};
use crate::problem::{self, FrequencyPartition};
use crate::qcqp::SolverConfig;
use crate::signals::{self, scale_outputs, Dataset, Input};
use crate::sim::{self, RationalTF};
use crate::tuning::{self, Fitter, Split, TuneConfig};

/// Largest partition the automatic mesh choice will build.
const AUTO_MAX_INTERVALS: usize = 20_000;

#[derive(Parser, Debug)]
#[command(name = "freqid", version, about = "Kernel-based impulse response identification with an H-infinity bound")]
struct Cli {
    /// TOML file with [simulate], [identify], [tune] or [evaluate] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset from a built-in or user-given system.
    Simulate(SimulateOpts),
    /// Identify a model and write model, responses and report.
    Identify(IdentifyOpts),
    /// Grid search over lambda and kernel decay.
    Tune(TuneOpts),
    /// Evaluate a saved model.
    Evaluate(EvaluateOpts),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateOpts {
    /// `example1`, `example3` or `custom` (with --num/--den/--axis).
    system: Option<String>,
    #[arg(long)]
    axis: Option<Axis>,
    /// Numerator coefficients, descending powers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    num: Vec<f64>,
    /// Denominator coefficients, descending powers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    den: Vec<f64>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Output SNR in dB; `inf` for noise-free data.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Continuous time: nominal sample spacing.
    #[arg(long)]
    spacing: Option<f64>,
    /// Dataset CSV path (default data.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continuous time: input CSV path (default next to --out).
    #[arg(long)]
    input_out: Option<PathBuf>,
    /// Also write the true impulse response here.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Impulse response horizon (samples or seconds).
    #[arg(long)]
    horizon: Option<f64>,
    /// Write a gnuplot script next to the dataset.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DataOpts {
    /// Dataset CSV `t,u,y`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Continuous time: input CSV `s,xi`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    axis: Option<Axis>,
    /// Kernel scale.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Output normalization.
    #[arg(long)]
    rho: Option<f64>,
    /// Number of partition intervals.
    #[arg(long)]
    n_p: Option<usize>,
    /// Partition mesh target.
    #[arg(long)]
    mesh: Option<f64>,
    /// Upper end of the partition.
    #[arg(long)]
    omega_max: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    barrier_tol: Option<f64>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    max_newton: Option<usize>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TruthOpts {
    /// Built-in system used as ground truth for the fit.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth_num: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth_den: Vec<f64>,
    /// Impulse response horizon (samples or seconds).
    #[arg(long)]
    horizon: Option<f64>,
    /// Continuous time: impulse response grid step.
    #[arg(long)]
    step: Option<f64>,
    /// Refinement of the partition for the frequency response CSV.
    #[arg(long)]
    fine_factor: Option<usize>,
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IdentifyOpts {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataOpts,
    #[command(flatten)]
    #[serde(flatten)]
    truth: TruthOpts,
    /// Kernel decay: alpha (discrete) or beta (continuous).
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Supply rate `q_u,q_uy,q_y`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    supply: Vec<f64>,
    /// Reference system numerator (identify the deviation from it).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    reference_num: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    reference_den: Vec<f64>,
    /// Output weight numerator (discrete time).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weight_num: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weight_den: Vec<f64>,
    /// Solve with every partition constraint at once.
    #[arg(long)]
    full: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TuneOpts {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataOpts,
    /// Train on the first N samples.
    #[arg(long)]
    train_count: Option<usize>,
    /// Train on this leading fraction of samples.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    decays: Vec<f64>,
    /// Extra random points inside the grid box.
    #[arg(long)]
    random_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `constrained` or `ridge`.
    #[arg(long)]
    fitter: Option<String>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateOpts {
    /// Model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    truth: TruthOpts,
    /// Intervals of the evaluation grid.
    #[arg(long)]
    n_p: Option<usize>,
    #[arg(long)]
    omega_max: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    simulate: Option<toml::Table>,
    identify: Option<toml::Table>,
    tune: Option<toml::Table>,
    evaluate: Option<toml::Table>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }
            });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<ConfigFile>(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", p.display())))?
        }
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Simulate(o) => cmd_simulate(merge(file.simulate, o)?),
        Command::Identify(o) => cmd_identify(merge(file.identify, o)?),
        Command::Tune(o) => cmd_tune(merge(file.tune, o)?),
        Command::Evaluate(o) => cmd_evaluate(merge(file.evaluate, o)?),
    }
}

/// Overlays the flags that were given onto the config table.
fn merge<T: Serialize + DeserializeOwned>(file: Option<toml::Table>, flags: T) -> Result<T> {
    let Some(mut table) = file else { return Ok(flags) };
    let given = toml::Table::try_from(&flags).map_err(|e| Error::Config(e.to_string()))?;
    for (k, v) in given {
        let set = match &v {
            toml::Value::Boolean(b) => *b,
            toml::Value::Array(a) => !a.is_empty(),
            _ => true,
        };
        if set {
            table.insert(k, v);
        }
    }
    toml::Value::Table(table).try_into().map_err(|e| Error::Config(e.to_string().trim().to_string()))
}

fn need<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required option --{}", name.replace('_', "-"))))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn tf_from(axis: Axis, num: &[f64], den: &[f64], what: &str) -> Result<Option<RationalTF>> {
    match (num.is_empty(), den.is_empty()) {
        (true, true) => Ok(None),
        (false, false) => RationalTF::new(axis, num.to_vec(), den.to_vec()).map(Some).map_err(|e| Error::Config(format!("{what}: {e}"))),
        _ => Err(Error::Config(format!("{what} needs both numerator and denominator"))),
    }
}

fn named_or_custom(name: &Option<String>, axis: Axis, num: &[f64], den: &[f64], what: &str) -> Result<Option<RationalTF>> {
    if let Some(n) = name {
        if !num.is_empty() || !den.is_empty() {
            return Err(Error::Config(format!("give either a named {what} or coefficients, not both")));
        }
        let tf = sim::example_system(n)?;
        if tf.axis != axis {
            return Err(Error::Config(format!("{what} '{n}' is {} but the data are {}", tf.axis.name(), axis.name())));
        }
        return Ok(Some(tf));
    }
    tf_from(axis, num, den, what)
}

// ------------------------------------------------------------------ simulate

fn cmd_simulate(o: SimulateOpts) -> Result<()> {
    let name = o.system.clone().unwrap_or_else(|| "custom".into());
    let tf = if name == "custom" {
        let axis = need(o.axis, "axis")?;
        tf_from(axis, &o.num, &o.den, "system")?.ok_or_else(|| Error::Config("custom system needs --num and --den".into()))?
    } else {
        sim::example_system(&name)?
    };
    let n = o.n.unwrap_or(match tf.axis {
        Axis::Discrete => 150,
        Axis::Continuous => 250,
    });
    if n == 0 {
        return Err(Error::Config("--n must be positive".into()));
    }
    let snr = o.snr.unwrap_or(f64::INFINITY);
    let seed = o.seed.unwrap_or(0);
    let d = match tf.axis {
        Axis::Discrete => sim::white_noise_experiment(&tf, n, snr, seed)?,
        Axis::Continuous => sim::switching_experiment(&tf, n, o.spacing.unwrap_or(0.04), snr, seed)?,
    };
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("data.csv"));
    write_file(&out, &signals::dataset_to_csv(&d))?;
    if let Input::PiecewiseConstant(u) = d.input() {
        let ip = o.input_out.clone().unwrap_or_else(|| sibling(&out, "input.csv"));
        write_file(&ip, &signals::pwc_input_to_csv(u))?;
    }
    if let Some(tp) = &o.truth_out {
        let grid = impulse_grid(tf.axis, &d, o.horizon, None)?;
        let g = sim::impulse_response_of(&tf, &grid)?;
        write_file(tp, &columns_csv("t,g", &[&grid, &g]))?;
    }
    if o.gnuplot {
        let file = out.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n\
             plot '{file}' using 1:2 with steps title 'u', '{file}' using 1:3 with linespoints title 'y'\npause -1\n"
        );
        write_file(&out.with_extension("gp"), &script)?;
    }
    if !tf.is_stable() {
        eprintln!("warning: the simulated system is unstable");
    }
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{name}"))
}

fn columns_csv(header: &str, cols: &[&[f64]]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for i in 0..cols[0].len() {
        let row: Vec<String> = cols.iter().map(|c| format!("{}", c[i])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

// -------------------------------------------------------------- shared setup

fn load_data(o: &DataOpts) -> Result<Dataset> {
    let path = need(o.data.clone(), "data")?;
    if !path.exists() {
        return Err(Error::Config(format!("dataset not found: {}", path.display())));
    }
    let axis = need(o.axis, "axis")?;
    if let Some(ip) = &o.input {
        if !ip.exists() {
            return Err(Error::Config(format!("input file not found: {}", ip.display())));
        }
    }
    if axis == Axis::Continuous && o.input.is_none() {
        return Err(Error::Config("continuous data need --input".into()));
    }
    signals::load_dataset(&path, axis, o.input.as_deref())
}

fn solver_config(o: &DataOpts) -> Result<SolverConfig> {
    let mut c = SolverConfig::default();
    if let Some(v) = o.theta0 {
        c.theta0 = v;
    }
    if let Some(v) = o.barrier_tol {
        c.barrier_tol = v;
    }
    if let Some(v) = o.newton_tol {
        c.newton_tol = v;
    }
    if let Some(v) = o.max_newton {
        c.max_newton = v;
    }
    if let Some(v) = o.jitter {
        c.jitter = v;
    }
    c.validate()?;
    Ok(c)
}

fn eps_rho(o: &DataOpts) -> Result<(f64, f64)> {
    let eps = o.eps.unwrap_or(1e-3);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps must lie in (0,1), got {eps}")));
    }
    let rho = o.rho.unwrap_or(1.0);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("rho must be positive, got {rho}")));
    }
    Ok((eps, rho))
}

/// Partition from `--n-p`, `--mesh`, or the certified mesh when that is small enough.
fn partition(o: &DataOpts, spec: &KernelSpec, y: &[f64], lambda: f64, eps: f64) -> Result<(FrequencyPartition, Vec<String>)> {
    let wmax = match o.omega_max {
        Some(w) => w,
        None => problem::omega_max(spec, y, lambda)?,
    };
    let mut notes = Vec::new();
    let p = match (o.n_p, o.mesh) {
        (Some(_), Some(_)) => return Err(Error::Config("give at most one of --n-p and --mesh".into())),
        (Some(n), None) => problem::uniform_partition(wmax, n)?,
        (None, Some(m)) => problem::build_partition(wmax, m)?,
        (None, None) => {
            let bound = problem::mesh_bound(spec, y, lambda, eps)?;
            if wmax / bound <= AUTO_MAX_INTERVALS as f64 {
                problem::build_partition(wmax, bound)?
            } else {
                notes.push(format!("certified mesh {bound:.3e} needs more than {AUTO_MAX_INTERVALS} intervals; using {AUTO_MAX_INTERVALS}"));
                problem::uniform_partition(wmax, AUTO_MAX_INTERVALS)?
            }
        }
    };
    Ok((p, notes))
}

fn out_dir(o: &Option<PathBuf>) -> Result<PathBuf> {
    let d = o.clone().unwrap_or_else(|| PathBuf::from("freqid-out"));
    std::fs::create_dir_all(&d).map_err(|source| Error::Io { path: d.display().to_string(), source })?;
    Ok(d)
}

/// Impulse response grid: `0..horizon` samples, or `[0, horizon]` with `step`.
fn impulse_grid(axis: Axis, d: &Dataset, horizon: Option<f64>, step: Option<f64>) -> Result<Vec<f64>> {
    let last = d.sample_times().last().copied().unwrap_or(0.0);
    match axis {
        Axis::Discrete => {
            let n = horizon.unwrap_or(last + 1.0);
            if !(n >= 1.0) {
                return Err(Error::Config(format!("horizon must be at least 1, got {n}")));
            }
            Ok((0..n as usize).map(|t| t as f64).collect())
        }
        Axis::Continuous => {
            let t_max = horizon.unwrap_or(last);
            let h = step.unwrap_or(0.01);
            if !(t_max > 0.0 && h > 0.0) {
                return Err(Error::Config("horizon and step must be positive".into()));
            }
            let n = (t_max / h).round() as usize;
            Ok((0..=n).map(|k| k as f64 * h).collect())
        }
    }
}

// ------------------------------------------------------------------ identify

/// Final estimate after undoing a reduction.
enum Estimate {
    Plain(Model),
    Delta(Model, RationalTF),
    Weighted(Model, WeightedBackMap),
}

impl Estimate {
    fn model(&self) -> &Model {
        match self {
            Estimate::Plain(m) | Estimate::Delta(m, _) | Estimate::Weighted(m, _) => m,
        }
    }

    fn freq(&self, omegas: &[f64]) -> Result<Vec<C64>> {
        let base = self.model().frequency_response_grid(omegas)?;
        Ok(match self {
            Estimate::Plain(_) => base,
            Estimate::Delta(_, r) => base.iter().zip(omegas).map(|(b, &w)| b + r.freq_response(w)).collect(),
            Estimate::Weighted(_, map) => base.iter().zip(omegas).map(|(b, &w)| b * map.inverse.freq_response(w)).collect(),
        })
    }

    fn impulse(&self, grid: &[f64]) -> Result<Vec<f64>> {
        match self {
            Estimate::Plain(m) => m.impulse_response_grid(grid),
            Estimate::Delta(m, r) => {
                let a = m.impulse_response_grid(grid)?;
                let b = sim::impulse_response_of(r, grid)?;
                Ok(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            Estimate::Weighted(m, map) => {
                let n = grid.len().max(map.horizon);
                let steps: Vec<f64> = (0..n).map(|t| t as f64).collect();
                let g = map.apply(&m.impulse_response_grid(&steps)?);
                Ok(grid.iter().map(|&t| g[t as usize]).collect())
            }
        }
    }
}

fn cmd_identify(o: IdentifyOpts) -> Result<()> {
    let started = Instant::now();
    let d = load_data(&o.data)?;
    let axis = d.axis();
    let (eps, rho) = eps_rho(&o.data)?;
    let lambda = need(o.lambda, "lambda")?;
    let decay = need(o.decay, "decay")?;
    let spec = KernelSpec::new(axis, decay, o.data.gamma.unwrap_or(1.0)).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = solver_config(&o.data)?;
    problem::check_params(lambda, eps)?;
    let truth = named_or_custom(&o.truth.truth, axis, &o.truth.truth_num, &o.truth.truth_den, "truth")?;

    let supply = if o.supply.is_empty() {
        None
    } else if o.supply.len() == 3 {
        Some(SupplyRate::new(o.supply[0], o.supply[1], o.supply[2])?)
    } else {
        return Err(Error::Config("--supply takes three values q_u,q_uy,q_y".into()));
    };
    let reference = tf_from(axis, &o.reference_num, &o.reference_den, "reference")?;
    let weight = tf_from(axis, &o.weight_num, &o.weight_den, "weight")?;
    let modes = supply.is_some() as usize + reference.is_some() as usize + weight.is_some() as usize;
    if modes > 1 {
        return Err(Error::Config("choose at most one of --supply, --reference-*, --weight-*".into()));
    }

    let (work, undo): (Dataset, Box<dyn Fn(Model) -> Estimate>) = if let Some(q) = supply {
        let (dd, map) = dissipativity_reduce(&d, &q)?;
        (dd, Box::new(move |m| Estimate::Plain(map.apply(&m))))
    } else if let Some(r) = reference {
        let dd = identify::delta_reduce_tf(&d, &r)?;
        (dd, Box::new(move |m| Estimate::Delta(m, r.clone())))
    } else if let Some(w) = weight {
        let (dd, map) = weighted_reduce(&d, &w)?;
        (dd, Box::new(move |m| Estimate::Weighted(m, map.clone())))
    } else {
        (d.clone(), Box::new(Estimate::Plain))
    };

    let normalized = scale_outputs(&work, rho)?;
    let (p, mut notes) = partition(&o.data, &spec, normalized.outputs(), lambda, eps)?;
    let mut model = if o.full {
        identify::identify_full(&normalized, &spec, &p, lambda, eps, &cfg)?
    } else {
        identify::identify(&normalized, &spec, &p, lambda, eps, &cfg)?
    };
    model.rho = rho;
    notes.extend(model.report.warnings.iter().cloned());
    for w in &notes {
        eprintln!("warning: {w}");
    }
    let fine = p.refined(o.truth.fine_factor.unwrap_or(10));
    let check = hinf_grid_sup(&model, &fine)?;
    let est = undo(model);
    let dir = out_dir(&o.data.out_dir)?;
    let summary = write_outputs(&dir, &est, &fine, &d, &o.truth, truth.as_ref())?;

    let m = est.model();
    let report = serde_json::json!({
        "iterations": m.report.iterations,
        "active_sizes": m.report.active_sizes,
        "n_active": m.active.len(),
        "newton_iterations": m.report.newton_iterations,
        "barrier_stages": m.report.barrier_stages,
        "objective": m.report.objective,
        "hinf_sup": check.grid_sup,
        "hinf_argmax": check.argmax,
        "hinf_bound": check.bound,
        "lipschitz_holds": check.lipschitz_holds,
        "estimate_hinf_sup": summary.hinf,
        "certified": m.certified,
        "mesh": p.mesh(),
        "mesh_bound": m.report.mesh_bound,
        "n_p": p.n_p(),
        "omega_max": p.omega_max(),
        "lambda": lambda,
        "decay": decay,
        "eps": eps,
        "rho": rho,
        "fit": summary.fit,
        "elapsed_s": started.elapsed().as_secs_f64(),
        "warnings": notes,
    });
    write_file(&dir.join("model.json"), &m.to_json())?;
    write_file(&dir.join("report.json"), &serde_json::to_string_pretty(&report).expect("json"))?;
    Ok(())
}

struct Summary {
    hinf: f64,
    fit: Option<f64>,
}

fn write_outputs(dir: &Path, est: &Estimate, fine: &FrequencyPartition, d: &Dataset, o: &TruthOpts, truth: Option<&RationalTF>) -> Result<Summary> {
    let resp = est.freq(fine.omegas())?;
    let mut s = String::from("omega,re,im,mag\n");
    for (w, g) in fine.omegas().iter().zip(&resp) {
        s.push_str(&format!("{w},{},{},{}\n", g.re, g.im, g.norm()));
    }
    write_file(&dir.join("freq_response.csv"), &s)?;
    let hinf = resp.iter().map(|g| g.norm()).fold(0.0, f64::max);

    let grid = impulse_grid(d.axis(), d, o.horizon, o.step)?;
    let g = est.impulse(&grid)?;
    let mut fit = None;
    let csv = match truth {
        Some(tf) => {
            let g0 = sim::impulse_response_of(tf, &grid)?;
            fit = Some(identify::fit(&g, &g0)?);
            columns_csv("t,g,g_true", &[&grid, &g, &g0])
        }
        None => columns_csv("t,g", &[&grid, &g]),
    };
    write_file(&dir.join("impulse_response.csv"), &csv)?;
    if o.gnuplot {
        let truth_plot = if truth.is_some() { ", 'impulse_response.csv' using 1:3 with lines title 'truth'" } else { "" };
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset multiplot layout 2,1\n\
             set xlabel 'omega'\nset ylabel '|G|'\nplot 'freq_response.csv' using 1:4 with lines title 'model'\n\
             set xlabel 't'\nset ylabel 'g'\nplot 'impulse_response.csv' using 1:2 with lines title 'model'{truth_plot}\n\
             unset multiplot\npause -1\n"
        );
        write_file(&dir.join("plot.gp"), &script)?;
    }
    Ok(Summary { hinf, fit })
}

// ---------------------------------------------------------------------- tune

fn cmd_tune(o: TuneOpts) -> Result<()> {
    let d = load_data(&o.data)?;
    let axis = d.axis();
    let (eps, rho) = eps_rho(&o.data)?;
    let cfg = solver_config(&o.data)?;
    let split = match (o.train_count, o.train_fraction) {
        (Some(_), Some(_)) => return Err(Error::Config("give at most one of --train-count and --train-fraction".into())),
        (Some(n), None) => Split::TrainCount(n),
        (None, Some(f)) => Split::TrainFraction(f),
        (None, None) => Split::TrainFraction(2.0 / 3.0),
    };
    let mut tc = TuneConfig::default_for(axis, split);
    if !o.lambdas.is_empty() {
        tc.lambdas = o.lambdas.clone();
    }
    if !o.decays.is_empty() {
        tc.decays = o.decays.clone();
    }
    tc.random_points = o.random_points.unwrap_or(0);
    tc.seed = o.seed.unwrap_or(0);
    tc.fitter = match o.fitter.as_deref().unwrap_or("constrained") {
        "constrained" => Fitter::Constrained,
        "ridge" => Fitter::Ridge,
        other => return Err(Error::Config(format!("unknown fitter '{other}'"))),
    };
    tc.validate()?;
    let base = KernelSpec::new(axis, tc.decays[0], o.data.gamma.unwrap_or(1.0)).map_err(|e| Error::Config(e.to_string()))?;
    let normalized = scale_outputs(&d, rho)?;
    let lam_min = tc.lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let dmin = tc.decays.iter().copied().fold(f64::INFINITY, f64::min);
    let wide = base.with_decay(dmin).map_err(|e| Error::Config(e.to_string()))?;
    let (p, notes) = partition(&o.data, &wide, normalized.outputs(), lam_min, eps)?;
    for w in &notes {
        eprintln!("warning: {w}");
    }
    let res = tuning::tune(&normalized, &tc, &base, &p, eps, &cfg)?;
    let dir = out_dir(&o.data.out_dir)?;
    write_file(&dir.join("tuning.csv"), &tuning::table_to_csv(&res.table))?;
    let best = serde_json::json!({
        "lambda": res.best.lambda,
        "decay": res.best.decay,
        "v": res.best_v,
        "fitter": o.fitter.as_deref().unwrap_or("constrained"),
        "grid_size": res.table.len(),
        "failed": res.table.iter().filter(|r| r.error.is_some()).count(),
    });
    write_file(&dir.join("best.json"), &serde_json::to_string_pretty(&best).expect("json"))?;
    Ok(())
}

// ------------------------------------------------------------------ evaluate

fn cmd_evaluate(o: EvaluateOpts) -> Result<()> {
    let path = need(o.model.clone(), "model")?;
    if !path.exists() {
        return Err(Error::Config(format!("model not found: {}", path.display())));
    }
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let model = Model::from_json(&text)?;
    let axis = model.spec.axis();
    let truth = named_or_custom(&o.truth.truth, axis, &o.truth.truth_num, &o.truth.truth_den, "truth")?;
    let wmax = match (o.omega_max, axis) {
        (Some(w), _) => w,
        (None, Axis::Discrete) => std::f64::consts::PI,
        (None, Axis::Continuous) => model.active.iter().copied().fold(10.0, f64::max) * 2.0,
    };
    let grid = problem::uniform_partition(wmax, o.n_p.unwrap_or(3140))?;
    let check = hinf_grid_sup(&model, &grid)?;
    // the basis times double as the sample times for the impulse grid
    let taus: Vec<f64> = model
        .descriptors
        .iter()
        .filter_map(|d| match d {
            crate::functionals::BasisDescriptor::InputFunctional(t) => Some(*t),
            _ => None,
        })
        .collect();
    let d = Dataset::new(model.input.clone(), taus.clone(), vec![0.0; taus.len()])?;
    let dir = out_dir(&o.out_dir)?;
    let est = Estimate::Plain(model);
    let summary = write_outputs(&dir, &est, &grid, &d, &o.truth, truth.as_ref())?;
    let report = serde_json::json!({
        "hinf_sup": check.grid_sup,
        "hinf_argmax": check.argmax,
        "hinf_bound": check.bound,
        "lipschitz_holds": check.lipschitz_holds,
        "estimate_hinf_sup": summary.hinf,
        "fit": summary.fit,
        "certified": est.model().certified,
    });
    write_file(&dir.join("report.json"), &serde_json::to_string_pretty(&report).expect("json"))?;
    Ok(())
}
