//! Config-driven experiment runner.
//!
//! One JSON document names a command and its inputs; the run writes a JSON
//! report (and optionally CSV traces) to the output directory. Exit status:
//! 0 when every check passes, 1 on a refutation or negative verdict, 2 on a
//! usage or config error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conjugacy::{verify_diagram_p, verify_diagram_q};
use crate::dyadic::{add_hat, DyadicIndex, SampledFunction};
use crate::freqdyn::{
    check_c0_translation_fh, check_unconditional_series, construct_fh_vector, dense_sequence_term,
    extract_frequency_sets, generate_frequency_sets, lower_density, orbit_distance, scan_orbit, write_orbit_csv,
    CheckOptions, FrequencySets, GeneratorParams,
};
use crate::shifts::{BackwardShift, LogSeq, PseudoShift, SparseSeq};
use crate::weights::{
    check_admissibility, check_chaos_c0, check_fh_lp, check_hypercyclic_translation, weight_from_shift_weights,
    AdmissibilityVerdict, IntTable, SeriesOptions, SeriesVerdict, Weight,
};
use crate::{Domain, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fhdyn", about = "Frequent hypercyclicity experiments for weighted shifts and translations")]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for reports and traces.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for parallel scans.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckWeight,
    CheckFh,
    BuildVector,
    ExtractSets,
    VerifyConjugacy,
    SimulateOrbit,
    SeriesCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightFamily {
    Constant { c: f64 },
    ExpAbs { rate: f64 },
    ExpLinear { rate: f64 },
    Gaussian { rate: f64 },
    ExpSquare { rate: f64 },
    InverseQuadratic,
    PowAbs { base: f64 },
    /// `rho(k)` tabulated on `start, start + 1, ...`, extended as a step weight.
    Table { start: i64, values: Vec<f64> },
    /// `rho` built from shift weights `w_k` by the product formula.
    ShiftWeights { start: i64, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(flatten)]
    pub family: WeightFamily,
    /// Replace `rho` by `rho(floor(x))`.
    #[serde(default)]
    pub step: bool,
    #[serde(default)]
    pub half_line: bool,
}

impl WeightSpec {
    pub fn build(&self) -> Result<Weight> {
        let w = match &self.family {
            WeightFamily::Constant { c } => Weight::constant(*c)?,
            WeightFamily::ExpAbs { rate } => Weight::exp_abs(*rate),
            WeightFamily::ExpLinear { rate } => Weight::exp_linear(*rate),
            WeightFamily::Gaussian { rate } => Weight::gaussian(*rate),
            WeightFamily::ExpSquare { rate } => Weight::exp_square(*rate),
            WeightFamily::InverseQuadratic => Weight::inverse_quadratic(),
            WeightFamily::PowAbs { base } => Weight::pow_abs(*base)?,
            WeightFamily::Table { start, values } => Weight::from_table(&IntTable::new(*start, values.clone()))?,
            WeightFamily::ShiftWeights { start, values } => {
                weight_from_shift_weights(&IntTable::new(*start, values.clone()))?
            }
        };
        let w = if self.half_line { w.on_half_line() } else { w };
        Ok(if self.step { w.step_normalized() } else { w })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftSpec {
    /// `w_k = rho(k) / rho(k + 1)` from the config weight; `R` fitted on `[-r_window, r_window]`.
    Induced {
        #[serde(default = "default_r_window")]
        r_window: i64,
    },
    /// Explicit weights `w_k`, repeated at the table edges.
    Table {
        start: i64,
        values: Vec<f64>,
        #[serde(default)]
        half_line: bool,
    },
}

fn default_r_window() -> i64 {
    50
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub p_max: Option<u32>,
    pub start: Option<u64>,
    pub gap: Option<u64>,
    pub modulus: Option<u64>,
    #[serde(default)]
    pub m: Vec<f64>,
    /// Explicit prefixes `E_1, E_2, ...`; overrides the generator.
    pub explicit: Option<Vec<Vec<u64>>>,
    #[serde(default)]
    pub half_line: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FhMode {
    Lp,
    C0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Diagram residual bound.
    pub diagram: f64,
    /// Smallness threshold for `rho` along frequency sets and in the tail.
    pub c0: f64,
    /// `eps` of the unconditional-series check.
    pub eps: f64,
    pub tail: f64,
    pub decay_ratio: f64,
    /// Orbit distance counted as a hit in `simulate-orbit`.
    pub hit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            diagram: 1e-12,
            c0: 1e-3,
            eps: 1e-3,
            tail: 1e-9,
            decay_ratio: 0.9,
            hit: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub report: String,
    pub csv: Option<String>,
    pub vector: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            report: "report.json".into(),
            csv: None,
            vector: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub weight: Option<WeightSpec>,
    pub shift: Option<ShiftSpec>,
    pub frequency: Option<FrequencySpec>,
    /// `check-fh`: `lp` (summability) or `c0` (frequency-set criterion).
    pub mode: Option<FhMode>,
    /// Target amplitudes `alpha_p`; targets are `alpha_p sum_{W_p} e_i`.
    pub alpha: Option<Vec<f64>>,
    /// Number of levels when targets come from the dense sequence.
    pub levels: Option<u32>,
    /// `extract-sets`: a vector written by `build-vector`.
    pub vector_path: Option<PathBuf>,
    /// `verify-conjugacy`: number of random inputs, window half-width and level.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_window")]
    pub window: i64,
    #[serde(default = "default_level")]
    pub level: u32,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_horizon() -> u64 {
    1000
}
fn default_trials() -> usize {
    50
}
fn default_window() -> i64 {
    6
}
fn default_level() -> u32 {
    5
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("diagram", t.diagram),
            ("c0", t.c0),
            ("eps", t.eps),
            ("tail", t.tail),
            ("decay_ratio", t.decay_ratio),
            ("hit", t.hit),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be positive")));
            }
        }
        let command = serde_json::to_value(self.command)?;
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Config(format!("{} requires `{what}`", command.as_str().unwrap_or("command"))))
            }
        };
        match self.command {
            Command::CheckWeight | Command::VerifyConjugacy | Command::SeriesCheck => {
                need(self.weight.is_some(), "weight")
            }
            Command::CheckFh => {
                need(self.weight.is_some(), "weight")?;
                need(self.mode.is_some(), "mode")?;
                if self.mode == Some(FhMode::C0) {
                    need(self.frequency.is_some(), "frequency")?;
                }
                Ok(())
            }
            Command::BuildVector | Command::SimulateOrbit => {
                need(self.shift.is_some(), "shift")?;
                need(self.frequency.is_some(), "frequency")?;
                need(self.alpha.is_some() || self.levels.is_some(), "alpha or levels")
            }
            Command::ExtractSets => {
                need(self.shift.is_some(), "shift")?;
                need(self.alpha.is_some(), "alpha")?;
                need(self.vector_path.is_some() || self.frequency.is_some(), "vector_path or frequency")
            }
        }?;
        if matches!(self.shift, Some(ShiftSpec::Induced { .. })) && self.weight.is_none() {
            return Err(Error::Config("an induced shift requires `weight`".into()));
        }
        Ok(())
    }
}

/// Result of one run: whether the checks passed, and the report body.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub report: BTreeMap<String, Value>,
}

impl Outcome {
    fn new(passed: bool) -> Self {
        Self {
            passed,
            report: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, v: impl Serialize) -> Result<Self> {
        self.report.insert(key.into(), serde_json::to_value(v)?);
        Ok(self)
    }
}

fn build_shift(cfg: &ExperimentConfig) -> Result<BackwardShift> {
    match cfg.shift.as_ref().ok_or_else(|| Error::Config("missing `shift`".into()))? {
        ShiftSpec::Induced { r_window } => {
            let w = cfg.weight.as_ref().ok_or_else(|| Error::Config("missing `weight`".into()))?;
            BackwardShift::from_weight(&w.build()?, *r_window)
        }
        ShiftSpec::Table { start, values, half_line } => {
            let d = if *half_line { Domain::HalfLine } else { Domain::FullLine };
            BackwardShift::from_weights(&IntTable::new(*start, values.clone()), d)
        }
    }
}

fn build_sets(spec: &FrequencySpec, horizon: u64, p_default: u32) -> Result<FrequencySets> {
    if let Some(explicit) = &spec.explicit {
        let m: Vec<f64> = (0..explicit.len())
            .map(|i| spec.m.get(i).copied().unwrap_or(i as f64 + 1.0))
            .collect();
        return FrequencySets::from_prefixes(explicit.iter().cloned().zip(m).collect(), horizon);
    }
    let mut params = GeneratorParams::new(spec.p_max.unwrap_or(p_default), horizon);
    if let Some(g) = spec.gap {
        params.gap = g;
        params.start = g;
    }
    if let Some(s) = spec.start {
        params.start = s;
    }
    params.modulus = spec.modulus;
    params.m = spec.m.clone();
    if spec.half_line {
        params.domain = Domain::HalfLine;
    }
    generate_frequency_sets(&params)
}

fn targets(cfg: &ExperimentConfig, t: &BackwardShift) -> Result<Vec<SparseSeq<i64>>> {
    if let Some(alpha) = &cfg.alpha {
        return Ok(alpha
            .iter()
            .enumerate()
            .map(|(pi, a)| {
                SparseSeq::from_entries(PseudoShift::<i64>::window(t, pi as u32 + 1).into_iter().map(|s| (s, *a)))
            })
            .collect());
    }
    let levels = cfg.levels.unwrap_or(1);
    let r = PseudoShift::<i64>::ratio_r(t);
    (1..=levels).map(|p| dense_sequence_term(p, r, t.domain())).collect()
}

/// Builds the vector of `build-vector` and the per-level orbit checks at `G_p`.
fn build_vector(cfg: &ExperimentConfig, t: &BackwardShift) -> Result<(LogSeq<i64>, Vec<SparseSeq<i64>>, Outcome)> {
    let ys = targets(cfg, t)?;
    let fspec = cfg.frequency.as_ref().ok_or_else(|| Error::Config("missing `frequency`".into()))?;
    let f = build_sets(fspec, cfg.horizon, ys.len() as u32)?;
    let (x, trace) = construct_fh_vector(t, &f, &ys, cfg.horizon)?;
    let r = PseudoShift::<i64>::ratio_r(t);
    let mut passed = true;
    let mut levels = Vec::new();
    for (pi, g) in trace.g.iter().enumerate() {
        let bound = r.powi(-(pi as i32 + 1));
        let worst = g
            .iter()
            .map(|&n| orbit_distance(t, &x, n, &ys[pi]))
            .fold(0.0f64, f64::max);
        passed &= worst <= bound;
        levels.push(json!({
            "p": pi + 1,
            "g_len": g.len(),
            "g_density": lower_density(g, cfg.horizon)?,
            "max_distance_on_g": worst,
            "bound": bound,
        }));
    }
    let out = Outcome::new(passed).with("levels", levels)?.with("trace", &trace)?;
    Ok((x, ys, out))
}

fn random_function(rng: &mut ChaCha8Rng, half: i64, level: u32) -> Result<SampledFunction> {
    let mut f = SampledFunction::zeros(-half, half, level)?;
    for v in f.values.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    Ok(f)
}

fn random_sparse(rng: &mut ChaCha8Rng, half: i64, level: u32) -> Result<SparseSeq<DyadicIndex>> {
    let mut a = SparseSeq::new();
    let count = rng.gen_range(1..=8);
    while a.len() < count {
        let lv = rng.gen_range(0..=level);
        let k = rng.gen_range(-half + 1..half - 1);
        let j = if lv == 0 { 0 } else { 2 * rng.gen_range(0..1u64 << (lv - 1)) + 1 };
        a.insert(DyadicIndex::new(k, lv, j)?, rng.gen_range(-1.0..1.0));
    }
    Ok(a)
}

fn weight_of(cfg: &ExperimentConfig) -> Result<Weight> {
    cfg.weight
        .as_ref()
        .ok_or_else(|| Error::Config("missing `weight`".into()))?
        .build()
}

fn write_csv(path: &Path, rows: &[(u64, Vec<f64>)]) -> Result<()> {
    write_orbit_csv(rows, std::io::BufWriter::new(fs::File::create(path)?))
}

/// Executes the configured pipeline, writing traces to `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome> {
    let h = cfg.horizon;
    match cfg.command {
        Command::CheckWeight => {
            let w = weight_of(cfg)?;
            let adm = check_admissibility(&w, 0.25, h as f64)?;
            let chaos = check_chaos_c0(&w, cfg.tolerances.c0, h as f64)?;
            let hyper = if w.domain() == Domain::FullLine {
                Some(check_hypercyclic_translation(&w, &[0.0], h as f64, cfg.tolerances.c0)?)
            } else {
                None
            };
            Outcome::new(adm.verdict == AdmissibilityVerdict::AdmissibleAtHorizon)
                .with("weight", w.name())?
                .with("admissibility", adm)?
                .with("chaos_c0", chaos)?
                .with("hypercyclicity", hyper)
        }
        Command::CheckFh => {
            let w = weight_of(cfg)?;
            match cfg.mode.unwrap_or(FhMode::Lp) {
                FhMode::Lp => {
                    let opts = SeriesOptions {
                        tail_tol: cfg.tolerances.tail,
                        decay_ratio: cfg.tolerances.decay_ratio,
                    };
                    let r = check_fh_lp(&w, h, &opts)?;
                    Outcome::new(r.series.verdict == SeriesVerdict::ConvergentAtHorizon)
                        .with("weight", w.name())?
                        .with("verdict", r.series.verdict)?
                        .with("partial_sum", r.series.sum)?
                        .with("tail", r.series.tail)?
                        .with("tail_ratio", r.series.tail_ratio)?
                        .with("integral", r.integral)
                }
                FhMode::C0 => {
                    let fspec = cfg.frequency.as_ref().ok_or_else(|| Error::Config("missing `frequency`".into()))?;
                    let f = build_sets(fspec, h, fspec.p_max.unwrap_or(2))?;
                    let opts = CheckOptions {
                        c_tol: cfg.tolerances.c0,
                        ..CheckOptions::default()
                    };
                    let r = check_c0_translation_fh(&w.step_normalized(), &f, &opts)?;
                    Outcome::new(r.all_passed()).with("weight", w.name())?.with("conditions", r)
                }
            }
        }
        Command::BuildVector => {
            let t = build_shift(cfg)?;
            let (x, ys, out) = build_vector(cfg, &t)?;
            let name = cfg.output.vector.clone().unwrap_or_else(|| "vector.json".into());
            fs::write(out_dir.join(&name), serde_json::to_string_pretty(&x)?)?;
            if let Some(csv) = &cfg.output.csv {
                write_csv(&out_dir.join(csv), &scan_orbit(&t, &x, &ys, 1, h))?;
            }
            out.with("vector_file", name)?.with("entries", x.len())
        }
        Command::SimulateOrbit => {
            let t = build_shift(cfg)?;
            let (x, ys, out) = build_vector(cfg, &t)?;
            let rows = scan_orbit(&t, &x, &ys, 1, h);
            let mut hits = Vec::new();
            let mut passed = out.passed;
            for pi in 0..ys.len() {
                let set: Vec<u64> = rows
                    .iter()
                    .filter(|(_, d)| d[pi] < cfg.tolerances.hit)
                    .map(|(n, _)| *n)
                    .collect();
                let d = lower_density(&set, h)?;
                passed &= d > 0.0;
                hits.push(json!({"p": pi + 1, "hits": set.len(), "lower_density": d}));
            }
            let csv = cfg.output.csv.clone().unwrap_or_else(|| "orbit.csv".into());
            write_csv(&out_dir.join(&csv), &rows)?;
            let mut out = out.with("hits", hits)?.with("csv_file", csv)?;
            out.passed = passed;
            Ok(out)
        }
        Command::ExtractSets => {
            let t = build_shift(cfg)?;
            let x: LogSeq<i64> = match &cfg.vector_path {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => build_vector(cfg, &t)?.0,
            };
            let alpha = cfg.alpha.as_ref().ok_or_else(|| Error::Config("missing `alpha`".into()))?;
            let r = extract_frequency_sets(&t, &x, alpha, h)?;
            Outcome::new(r.all_nonempty() && r.estimate_violations == 0).with("extraction", r)
        }
        Command::VerifyConjugacy => {
            let w = weight_of(cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let fs_in = (0..cfg.trials)
                .map(|_| random_function(&mut rng, cfg.window, cfg.level))
                .collect::<Result<Vec<_>>>()?;
            let q = verify_diagram_q(&w, &fs_in, cfg.level, cfg.tolerances.diagram)?;
            let as_in = (0..cfg.trials)
                .map(|_| random_sparse(&mut rng, cfg.window, cfg.level))
                .collect::<Result<Vec<_>>>()?;
            let p = verify_diagram_p(&w, &as_in, (-cfg.window, cfg.window), cfg.level, cfg.tolerances.diagram)?;
            Outcome::new(q.passed() && p.passed()).with("q_side", q)?.with("p_side", p)
        }
        Command::SeriesCheck => {
            let w = weight_of(cfg)?;
            let mut f = SampledFunction::zeros(-2, 2, 4)?;
            add_hat(&mut f, &DyadicIndex::integer(0), 1.0, Domain::FullLine);
            let r = check_unconditional_series(&f, &w, cfg.trials, h, cfg.tolerances.eps, cfg.seed)?;
            Outcome::new(r.passed).with("weight", w.name())?.with("series", r)
        }
    }
}

/// Errors that describe a negative mathematical finding rather than misuse.
fn is_refutation(e: &Error) -> bool {
    matches!(
        e,
        Error::HypothesisViolation(_)
            | Error::SpecInconsistency(_)
            | Error::HorizonTooSmall { .. }
            | Error::InvalidWeight(_)
            | Error::Normalization
    )
}

fn finish(cfg: &ExperimentConfig, out_dir: &Path, result: Result<Outcome>) -> Result<i32> {
    let (code, mut report) = match result {
        Ok(o) => (if o.passed { 0 } else { 1 }, o.report),
        Err(e) if is_refutation(&e) => {
            let mut r = BTreeMap::new();
            r.insert("error".into(), Value::String(e.to_string()));
            (1, r)
        }
        Err(e) => return Err(e),
    };
    report.insert("command".into(), serde_json::to_value(cfg.command)?);
    report.insert("passed".into(), Value::Bool(code == 0));
    report.insert("horizon".into(), json!(cfg.horizon));
    report.insert("seed".into(), json!(cfg.seed));
    report.insert("tolerances".into(), serde_json::to_value(cfg.tolerances)?);
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(out_dir.join(&cfg.output.report), text + "\n")?;
    Ok(code)
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let go = || -> Result<i32> {
        let text = fs::read_to_string(&args.config)
            .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(n) = args.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        fs::create_dir_all(&args.out)?;
        let result = run(&cfg, &args.out);
        finish(&cfg, &args.out, result)
    };
    match go() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fhdyn: {e}");
            2
        }
    }
}
