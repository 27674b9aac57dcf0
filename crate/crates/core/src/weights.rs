//! Admissible weight functions and the weight-level criteria for
//! translation semigroups on `C_0^rho` and `L_p^rho`.
//!
//! Weights are evaluated in log space: products of shift weights and
//! super-exponential families leave the `f64` range long before the
//! horizons used in experiments.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::{Domain, Error, Result};

/// Values on a contiguous integer range `start, start + 1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntTable {
    pub start: i64,
    pub values: Vec<f64>,
}

impl IntTable {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn from_fn(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> Self {
        Self {
            start: lo,
            values: (lo..=hi).map(f).collect(),
        }
    }

    /// Last covered integer.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> Option<f64> {
        if k < self.start {
            return None;
        }
        self.values.get((k - self.start) as usize).copied()
    }

    /// Value at `k`, clamping to the nearest covered integer.
    pub fn get_clamped(&self, k: i64) -> f64 {
        let i = (k.clamp(self.start, self.end()) - self.start) as usize;
        self.values[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.start + i as i64, *v))
    }
}

type LogFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// `rho = c`
    Constant { ln_c: f64 },
    /// `rho = exp(-rate |x|)`
    ExpAbs { rate: f64 },
    /// `rho = exp(-rate x)`
    ExpLinear { rate: f64 },
    /// `rho = exp(-rate x^2)`
    Gaussian { rate: f64 },
    /// `rho = exp(rate x^2)`
    ExpSquare { rate: f64 },
    /// `rho = base^{-|x|}`, evaluated with `powf` so powers of two are exact
    PowAbs { base: f64 },
    /// `rho = 1 / (1 + x^2)`
    InverseQuadratic,
    /// step weight `rho(x) = table[floor(x)]`, logs stored, clamped outside
    Table(IntTable),
    /// `rho(x) = inner(floor(x))`
    Floor(Box<Weight>),
    Custom { name: String, ln: LogFn },
}

/// Integer samples `rho(k)` on a window, computed with [`Weight::eval`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegerSamples {
    pub window: (i64, i64),
    pub values: Vec<f64>,
}

/// Constants `M >= 1`, `omega` with `rho(tau) <= M exp(omega t) rho(tau + t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityConstants {
    pub m: f64,
    pub omega: f64,
}

/// Constants `A, B` with `A rho(s) <= rho(t) <= B rho(s + l)` for `t` in `[s, s + l]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConstants {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

/// A positive weight function on the line or the half-line.
#[derive(Clone)]
pub struct Weight {
    domain: Domain,
    kind: Kind,
    samples: IntegerSamples,
    pub admissibility: Option<AdmissibilityConstants>,
    pub step_constants: Option<StepConstants>,
}

const SAMPLE_RADIUS: i64 = 64;

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("name", &self.name())
            .field("domain", &self.domain)
            .finish()
    }
}

impl Weight {
    fn build(domain: Domain, kind: Kind) -> Self {
        let mut w = Weight {
            domain,
            kind,
            samples: IntegerSamples {
                window: (0, 0),
                values: Vec::new(),
            },
            admissibility: None,
            step_constants: None,
        };
        let lo = match domain {
            Domain::FullLine => -SAMPLE_RADIUS,
            Domain::HalfLine => 0,
        };
        w.samples = IntegerSamples {
            window: (lo, SAMPLE_RADIUS),
            values: (lo..=SAMPLE_RADIUS).map(|k| w.eval(k as f64)).collect(),
        };
        w
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidWeight(format!("constant {c} is not positive")));
        }
        Ok(Self::build(Domain::FullLine, Kind::Constant { ln_c: c.ln() }))
    }

    pub fn exp_abs(rate: f64) -> Self {
        Self::build(Domain::FullLine, Kind::ExpAbs { rate })
    }

    pub fn exp_linear(rate: f64) -> Self {
        Self::build(Domain::FullLine, Kind::ExpLinear { rate })
    }

    pub fn gaussian(rate: f64) -> Self {
        Self::build(Domain::FullLine, Kind::Gaussian { rate })
    }

    pub fn exp_square(rate: f64) -> Self {
        Self::build(Domain::FullLine, Kind::ExpSquare { rate })
    }

    pub fn inverse_quadratic() -> Self {
        Self::build(Domain::FullLine, Kind::InverseQuadratic)
    }

    /// `rho(x) = base^{-|x|}`.
    pub fn pow_abs(base: f64) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::InvalidWeight(format!("base {base} is not positive")));
        }
        Ok(Self::build(Domain::FullLine, Kind::PowAbs { base }))
    }

    /// `rho(k) = 2^{-|k|}` extended as a step function; integer values are exact.
    pub fn two_pow_abs_step() -> Self {
        Self::build(Domain::FullLine, Kind::PowAbs { base: 2.0 }).step_normalized()
    }

    /// Step weight from integer samples `rho(start + i) = values[i]`,
    /// clamped to the edge values outside the table.
    pub fn from_table(table: &IntTable) -> Result<Self> {
        if table.values.is_empty() {
            return Err(Error::InvalidWeight("empty table".into()));
        }
        if let Some((k, v)) = table.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidWeight(format!("rho({k}) = {v} is not positive")));
        }
        let logs = IntTable::new(table.start, table.values.iter().map(|v| v.ln()).collect());
        Ok(Self::build(Domain::FullLine, Kind::Table(logs)))
    }

    /// Step weight from integer log-samples.
    pub fn from_log_table(logs: IntTable) -> Result<Self> {
        if logs.values.is_empty() || logs.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeight("log table must be finite and nonempty".into()));
        }
        Ok(Self::build(Domain::FullLine, Kind::Table(logs)))
    }

    /// Weight given by its natural log.
    pub fn custom(name: &str, ln: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::build(
            Domain::FullLine,
            Kind::Custom {
                name: name.to_string(),
                ln: Arc::new(ln),
            },
        )
    }

    /// Restricts to `[0, inf)`.
    pub fn on_half_line(self) -> Self {
        let mut w = Self::build(Domain::HalfLine, self.kind);
        w.admissibility = self.admissibility;
        w.step_constants = self.step_constants;
        w
    }

    /// `rho~(x) = rho(floor(x))`. Step weights are returned unchanged.
    pub fn step_normalized(&self) -> Self {
        if self.is_step() {
            return self.clone();
        }
        Self::build(self.domain, Kind::Floor(Box::new(self.clone())))
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_step(&self) -> bool {
        matches!(
            self.kind,
            Kind::Constant { .. } | Kind::Table(_) | Kind::Floor(_)
        )
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Constant { ln_c } => format!("constant({})", ln_c.exp()),
            Kind::ExpAbs { rate } => format!("exp_abs({rate})"),
            Kind::ExpLinear { rate } => format!("exp_linear({rate})"),
            Kind::Gaussian { rate } => format!("gaussian({rate})"),
            Kind::ExpSquare { rate } => format!("exp_square({rate})"),
            Kind::PowAbs { base } => format!("pow_abs({base})"),
            Kind::InverseQuadratic => "inverse_quadratic".into(),
            Kind::Table(t) => format!("table[{}..={}]", t.start, t.end()),
            Kind::Floor(inner) => format!("floor({})", inner.name()),
            Kind::Custom { name, .. } => name.clone(),
        }
    }

    /// `ln rho(x)`; NaN outside the domain.
    pub fn ln_eval(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return f64::NAN;
        }
        match &self.kind {
            Kind::Constant { ln_c } => *ln_c,
            Kind::ExpAbs { rate } => -rate * x.abs(),
            Kind::ExpLinear { rate } => -rate * x,
            Kind::Gaussian { rate } => -rate * x * x,
            Kind::ExpSquare { rate } => rate * x * x,
            Kind::PowAbs { base } => -x.abs() * base.ln(),
            Kind::InverseQuadratic => -(x * x).ln_1p(),
            Kind::Table(t) => t.get_clamped(x.floor() as i64),
            Kind::Floor(inner) => inner.ln_eval(x.floor()),
            Kind::Custom { ln, .. } => ln(x),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return f64::NAN;
        }
        match &self.kind {
            Kind::PowAbs { base } => base.powf(-x.abs()),
            Kind::Floor(inner) => inner.eval(x.floor()),
            _ => self.ln_eval(x).exp(),
        }
    }

    /// `rho(k)`, served from the cached window when possible.
    pub fn at(&self, k: i64) -> f64 {
        let (lo, hi) = self.samples.window;
        if (lo..=hi).contains(&k) {
            self.samples.values[(k - lo) as usize]
        } else {
            self.eval(k as f64)
        }
    }

    pub fn ln_at(&self, k: i64) -> f64 {
        self.ln_eval(k as f64)
    }

    pub fn integer_samples(&self) -> &IntegerSamples {
        &self.samples
    }

    fn checked_ln(&self, x: f64) -> Result<f64> {
        let v = self.ln_eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidWeight(format!(
                "{}: rho({x}) is not a positive finite number",
                self.name()
            )))
        }
    }

    fn sample_range(&self, horizon: f64) -> (f64, f64) {
        match self.domain {
            Domain::FullLine => (-horizon, horizon),
            Domain::HalfLine => (0.0, horizon),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityVerdict {
    AdmissibleAtHorizon,
    Refuted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub verdict: AdmissibilityVerdict,
    pub horizon: f64,
    pub grid_step: f64,
    /// `(tau, t)` with `rho(tau) > M exp(omega t) rho(tau + t)` for the fitted constants.
    pub witness: Option<(f64, f64)>,
    pub fitted_m: f64,
    pub fitted_omega: f64,
    pub fitted_a_b: (f64, f64),
}

impl AdmissibilityReport {
    pub fn constants(&self) -> AdmissibilityConstants {
        AdmissibilityConstants {
            m: self.fitted_m,
            omega: self.fitted_omega,
        }
    }
}

/// Fits `(M, omega)` over grid pairs `(i, i + j)` restricted to `lo_i..hi_i`
/// for both endpoints. `omega` is the largest log-ratio slope among pairs
/// with `t >= t_long`; `M` absorbs the remaining short-range excess.
fn fit_m_omega(logs: &[f64], step: f64, lo_i: usize, hi_i: usize, max_j: usize) -> (f64, f64) {
    let long_j = (max_j / 2).max(1);
    let mut omega = f64::NEG_INFINITY;
    for i in lo_i..=hi_i {
        for j in long_j..=max_j {
            if i + j > hi_i {
                break;
            }
            omega = omega.max((logs[i] - logs[i + j]) / (j as f64 * step));
        }
    }
    if !omega.is_finite() {
        omega = 0.0;
    }
    let mut excess = 0.0f64;
    for i in lo_i..=hi_i {
        for j in 1..=max_j {
            if i + j > hi_i {
                break;
            }
            excess = excess.max(logs[i] - logs[i + j] - omega * j as f64 * step);
        }
    }
    (excess.exp(), omega)
}

/// Checks `rho(tau) <= M e^{omega t} rho(tau + t)` on a grid of `(tau, t)`,
/// `tau` in the domain within `[-horizon, horizon]`, `0 < t <= horizon`.
///
/// The weight is refuted when the one-step log-ratio `ln rho(tau) - ln rho(tau+1)`
/// keeps growing without deceleration over the nested windows of radius
/// `horizon/4, horizon/2, horizon`; the constants are then fitted from steps
/// `t <= 1` on the inner half and the witness is the worst violating unit step.
pub fn check_admissibility(w: &Weight, grid_step: f64, horizon: f64) -> Result<AdmissibilityReport> {
    if !(grid_step > 0.0) || !(horizon >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need grid_step > 0 and horizon >= 1, got {grid_step}, {horizon}"
        )));
    }
    let (lo, hi) = w.sample_range(horizon);
    let n_tau = ((hi - lo) / grid_step).round() as usize;
    let max_j = (horizon / grid_step).round().max(1.0) as usize;
    let total = n_tau + max_j;
    let logs: Vec<f64> = (0..=total)
        .map(|i| w.checked_ln(lo + i as f64 * grid_step))
        .collect::<Result<_>>()?;
    let x_of = |i: usize| lo + i as f64 * grid_step;
    let j1 = (1.0 / grid_step).round().max(1.0) as usize;

    // one-step log ratio sup over nested windows
    let ratio_sup = |radius: f64| -> f64 {
        (0..=n_tau)
            .filter(|&i| {
                let x = x_of(i);
                x.abs() <= radius + 1e-9 && i + j1 <= total
            })
            .map(|i| logs[i] - logs[i + j1])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let s1 = ratio_sup(horizon / 4.0);
    let s2 = ratio_sup(horizon / 2.0);
    let s3 = ratio_sup(horizon);
    let growing = s2 - s1 > 1.0 && s3 - s2 >= s2 - s1;

    let (a, b) = fit_step_constants_on(w, lo, hi, grid_step)?;

    if growing {
        // constants forced by steps t <= 1 on the inner half; the unit step
        // is then searched for a violation over the whole window
        let inner_lo = ((-(horizon / 2.0) - lo).max(0.0) / grid_step).round() as usize;
        let inner_hi = (((horizon / 2.0) - lo) / grid_step).round() as usize;
        let (m, omega) = fit_m_omega(&logs, grid_step, inner_lo, inner_hi.min(total), j1);
        let mut best: Option<(f64, usize)> = None;
        for i in 0..=n_tau {
            if i + j1 > total {
                continue;
            }
            let excess = logs[i] - logs[i + j1] - omega * j1 as f64 * grid_step - m.ln();
            if excess > 0.0 && best.is_none_or(|(e, _)| excess > e) {
                best = Some((excess, i));
            }
        }
        if let Some((_, i)) = best {
            return Ok(AdmissibilityReport {
                verdict: AdmissibilityVerdict::Refuted,
                horizon,
                grid_step,
                witness: Some((x_of(i), j1 as f64 * grid_step)),
                fitted_m: m,
                fitted_omega: omega,
                fitted_a_b: (a, b),
            });
        }
    }

    let (m, omega) = fit_m_omega(&logs, grid_step, 0, total, max_j);
    Ok(AdmissibilityReport {
        verdict: AdmissibilityVerdict::AdmissibleAtHorizon,
        horizon,
        grid_step,
        witness: None,
        fitted_m: m.max(1.0),
        fitted_omega: omega,
        fitted_a_b: (a, b),
    })
}

fn fit_step_constants_on(w: &Weight, lo: f64, hi: f64, grid_step: f64) -> Result<(f64, f64)> {
    let sub = (1.0 / grid_step).round().max(1.0) as usize;
    let n = ((hi - lo) / grid_step).round() as usize;
    let mut a = f64::INFINITY;
    let mut b = 0.0f64;
    for i in 0..=n {
        let s = lo + i as f64 * grid_step;
        let ls = w.checked_ln(s)?;
        let ls1 = w.checked_ln(s + 1.0)?;
        for u in 0..=sub {
            let t = s + u as f64 / sub as f64;
            let lt = w.checked_ln(t)?;
            a = a.min((lt - ls).exp());
            b = b.max((lt - ls1).exp());
        }
    }
    Ok((a, b))
}

/// Fits the constants `A, B` of the unit-step bound on `sigma` in `[lo, hi]`.
pub fn fit_step_constants(w: &Weight, lo: f64, hi: f64, grid_step: f64) -> Result<StepConstants> {
    let (a, b) = fit_step_constants_on(w, lo, hi, grid_step)?;
    Ok(StepConstants { l: 1.0, a, b })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonVerdict {
    ConsistentAtHorizon,
    NotWitnessedAtHorizon,
    RefutedAtHorizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypercyclicityWitness {
    pub theta: f64,
    pub verdict: HorizonVerdict,
    /// Integer times `t` with `rho(t + theta) < tol` and `rho(-t + theta) < tol`.
    pub times: Vec<f64>,
}

/// Searches integer times `t <= horizon - |theta|` with both `rho(t + theta)`
/// and `rho(-t + theta)` below `tol`. A theta is consistent when at least two
/// witnesses exist and the largest lies in the upper half of the horizon.
pub fn check_hypercyclic_translation(
    w: &Weight,
    thetas: &[f64],
    horizon: f64,
    tol: f64,
) -> Result<Vec<HypercyclicityWitness>> {
    if w.domain() != Domain::FullLine {
        return Err(Error::InvalidInput(
            "hypercyclicity test is stated for weights on the full line".into(),
        ));
    }
    let max_theta = thetas.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if !(horizon > max_theta) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must exceed max |theta| = {max_theta}"
        )));
    }
    thetas
        .iter()
        .map(|&theta| {
            let t_max = (horizon - theta.abs()).floor() as i64;
            let mut times = Vec::new();
            for t in 1..=t_max {
                let t = t as f64;
                let fwd = w.checked_ln(t + theta)?;
                let bwd = w.checked_ln(-t + theta)?;
                if fwd.exp() < tol && bwd.exp() < tol {
                    times.push(t);
                }
            }
            let consistent =
                times.len() >= 2 && times.last().is_some_and(|&t| t >= horizon / 2.0);
            Ok(HypercyclicityWitness {
                theta,
                verdict: if consistent {
                    HorizonVerdict::ConsistentAtHorizon
                } else {
                    HorizonVerdict::NotWitnessedAtHorizon
                },
                times,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosC0Report {
    pub verdict: HorizonVerdict,
    pub horizon: f64,
    pub tol: f64,
    /// Largest sampled value of `rho` on `horizon/2 <= |x| <= horizon`.
    pub max_tail_value: f64,
    /// Point where the maximum is attained when the check fails.
    pub witness: Option<f64>,
}

/// `rho(x) -> 0` as `x -> +-inf`, tested on `horizon/2 <= |x| <= horizon`
/// (only `x -> +inf` on the half-line) with a quarter-unit grid that
/// contains every integer of the tail window.
pub fn check_chaos_c0(w: &Weight, tol: f64, horizon: f64) -> Result<ChaosC0Report> {
    let start = (horizon / 2.0).ceil();
    let mut points = Vec::new();
    let mut x = start;
    while x <= horizon {
        points.push(x);
        if w.domain() == Domain::FullLine {
            points.push(-x);
        }
        x += 0.25;
    }
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for x in points {
        let v = w.checked_ln(x)?.exp();
        if v > best.0 {
            best = (v, x);
        }
    }
    let ok = best.0 < tol;
    Ok(ChaosC0Report {
        verdict: if ok {
            HorizonVerdict::ConsistentAtHorizon
        } else {
            HorizonVerdict::RefutedAtHorizon
        },
        horizon,
        tol,
        max_tail_value: best.0,
        witness: (!ok).then_some(best.1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpChaosOptions {
    pub p_step: f64,
    pub k_cut: u64,
    pub overflow: f64,
}

impl Default for LpChaosOptions {
    fn default() -> Self {
        Self {
            p_step: 0.5,
            k_cut: 1000,
            overflow: 1e300,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodStatus {
    /// truncated sum plus tail estimate below epsilon
    Witness,
    /// truncated sum alone reaches epsilon (terms are nonnegative)
    Refuted,
    /// truncated sum overflowed the configured bound
    RefutedAtCutoff,
    /// truncated sum below epsilon but the tail is not controlled
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodTrial {
    pub period: f64,
    pub truncated_sum: f64,
    pub tail_estimate: f64,
    pub status: PeriodStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpChaosVerdict {
    Witness,
    NotWitnessed,
    Refuted,
    RefutedAtCutoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpChaosReport {
    pub verdict: LpChaosVerdict,
    pub witness_period: Option<f64>,
    pub l: f64,
    pub eps: f64,
    pub k_cut: u64,
    pub trials: Vec<PeriodTrial>,
}

/// Geometric tail extrapolation from the last two terms; infinite when the
/// terms do not decay.
fn geometric_tail(last: f64, prev: f64) -> f64 {
    if last == 0.0 {
        return 0.0;
    }
    let r = last / prev;
    if r.is_finite() && r < 1.0 {
        last * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Searches `P <= p_max` on a grid with `sum_{0 < |k| <= K} rho(l + kP) + tail < eps`.
pub fn check_chaos_lp(
    w: &Weight,
    l: f64,
    eps: f64,
    p_max: f64,
    opts: &LpChaosOptions,
) -> Result<LpChaosReport> {
    if w.domain() != Domain::FullLine {
        return Err(Error::InvalidInput("periodic sum test needs the full line".into()));
    }
    if !(l > 0.0 && eps > 0.0 && p_max >= opts.p_step && opts.k_cut >= 2) {
        return Err(Error::InvalidInput("need l, eps > 0, p_max >= p_step, k_cut >= 2".into()));
    }
    let mut trials = Vec::new();
    let mut witness = None;
    let n_p = (p_max / opts.p_step).floor() as u64;
    for ip in 1..=n_p {
        let period = ip as f64 * opts.p_step;
        let mut sum = CompensatedSum::new();
        let term = |k: i64| w.checked_ln(l + k as f64 * period).map(f64::exp);
        for k in 1..=opts.k_cut as i64 {
            sum.add(term(k)?);
            sum.add(term(-k)?);
        }
        let k = opts.k_cut as i64;
        let tail = geometric_tail(term(k)?, term(k - 1)?) + geometric_tail(term(-k)?, term(-k + 1)?);
        let s = sum.value();
        let status = if !(s <= opts.overflow) {
            PeriodStatus::RefutedAtCutoff
        } else if s >= eps {
            PeriodStatus::Refuted
        } else if s + tail < eps {
            PeriodStatus::Witness
        } else {
            PeriodStatus::Undecided
        };
        trials.push(PeriodTrial {
            period,
            truncated_sum: s,
            tail_estimate: tail,
            status,
        });
        if status == PeriodStatus::Witness {
            witness = Some(period);
            break;
        }
    }
    let verdict = if witness.is_some() {
        LpChaosVerdict::Witness
    } else if trials.iter().all(|t| t.status == PeriodStatus::RefutedAtCutoff) {
        LpChaosVerdict::RefutedAtCutoff
    } else if trials
        .iter()
        .all(|t| matches!(t.status, PeriodStatus::Refuted | PeriodStatus::RefutedAtCutoff))
    {
        LpChaosVerdict::Refuted
    } else {
        LpChaosVerdict::NotWitnessed
    };
    Ok(LpChaosReport {
        verdict,
        witness_period: witness,
        l,
        eps,
        k_cut: opts.k_cut,
        trials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Absolute tail bound that certifies convergence on its own.
    pub tail_tol: f64,
    /// Ratio `tail(K/2, K] / tail(K/4, K/2]` below which the tails count as decaying.
    pub decay_ratio: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-9,
            decay_ratio: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    ConvergentAtHorizon,
    DivergentAtHorizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub verdict: SeriesVerdict,
    pub horizon: u64,
    pub sum: f64,
    /// `partial_sums[j]` sums the terms with `|k| <= j`.
    pub partial_sums: Vec<f64>,
    pub tail: f64,
    pub tail_ratio: Option<f64>,
}

/// Summation verdict for nonnegative terms `term(j)` = total mass at
/// distance `j` (so `term(j) = a_j + a_{-j}` on the line).
pub fn series_verdict(term: impl Fn(u64) -> f64, horizon: u64, opts: &SeriesOptions) -> SeriesReport {
    let mut acc = CompensatedSum::new();
    let mut partial_sums = Vec::with_capacity(horizon as usize + 1);
    for j in 0..=horizon {
        acc.add(term(j));
        partial_sums.push(acc.value());
    }
    let s = |j: u64| partial_sums[j as usize];
    let tail = s(horizon) - s(horizon / 2);
    let tail_ratio = (horizon >= 4).then(|| {
        let prev = s(horizon / 2) - s(horizon / 4);
        if prev > 0.0 {
            tail / prev
        } else if tail > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    });
    let convergent = tail < opts.tail_tol || tail_ratio.is_some_and(|r| r <= opts.decay_ratio);
    SeriesReport {
        verdict: if convergent {
            SeriesVerdict::ConvergentAtHorizon
        } else {
            SeriesVerdict::DivergentAtHorizon
        },
        horizon,
        sum: s(horizon),
        partial_sums,
        tail,
        tail_ratio,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FhLpReport {
    pub series: SeriesReport,
    /// Trapezoid estimate of the integral of `rho` over `[-K, K]` (or `[0, K]`),
    /// computed cell by cell with left limits, so it is exact for step weights.
    pub integral: f64,
}

/// `sum_k rho(k) < inf` (equivalently `int rho < inf`) checked up to `|k| <= K`.
pub fn check_fh_lp(w: &Weight, k_max: u64, opts: &SeriesOptions) -> Result<FhLpReport> {
    if k_max < 1 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    let domain = w.domain();
    let lo = match domain {
        Domain::FullLine => -(k_max as i64),
        Domain::HalfLine => 0,
    };
    for k in lo..=k_max as i64 {
        w.checked_ln(k as f64)?;
    }
    let series = series_verdict(
        |j| match (domain, j) {
            (_, 0) => w.at(0),
            (Domain::FullLine, j) => w.at(j as i64) + w.at(-(j as i64)),
            (Domain::HalfLine, j) => w.at(j as i64),
        },
        k_max,
        opts,
    );
    let mut integral = CompensatedSum::new();
    const SUB: usize = 64;
    for k in lo..k_max as i64 {
        if w.is_step() {
            integral.add(w.at(k));
        } else {
            let h = 1.0 / SUB as f64;
            for i in 0..SUB {
                let a = k as f64 + i as f64 * h;
                integral.add(0.5 * h * (w.eval(a) + w.eval(a + h)));
            }
        }
    }
    Ok(FhLpReport {
        series,
        integral: integral.value(),
    })
}

/// Weight from backward-shift weights:
/// `rho(k) = 1/(w_1 ... w_k)` for `k >= 1` and `rho(k) = w_k ... w_0` for
/// `k <= 0`, extended by `rho(x) = rho(floor(x))`. Products are accumulated as
/// compensated log sums. The table must cover a window containing 0 and 1.
pub fn weight_from_shift_weights(w_seq: &IntTable) -> Result<Weight> {
    if w_seq.start > 0 || w_seq.end() < 1 {
        return Err(Error::InvalidInput(format!(
            "shift weights on [{}, {}] must cover 0 and 1",
            w_seq.start,
            w_seq.end()
        )));
    }
    if let Some((k, v)) = w_seq.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("w_{k} = {v} is not positive")));
    }
    let ln_w = |k: i64| w_seq.get(k).unwrap().ln();
    let mut logs = vec![0.0; w_seq.values.len()];
    let idx = |k: i64| (k - w_seq.start) as usize;
    let mut acc = CompensatedSum::new();
    for k in (w_seq.start..=0).rev() {
        acc.add(ln_w(k));
        logs[idx(k)] = acc.value();
    }
    let mut acc = CompensatedSum::new();
    for k in 1..=w_seq.end() {
        acc.add(-ln_w(k));
        logs[idx(k)] = acc.value();
    }
    Weight::from_log_table(IntTable::new(w_seq.start, logs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_is_admissible_with_unit_constants() {
        let w = Weight::constant(1.0).unwrap();
        let r = check_admissibility(&w, 0.5, 20.0).unwrap();
        assert_eq!(r.verdict, AdmissibilityVerdict::AdmissibleAtHorizon);
        assert_eq!((r.fitted_m, r.fitted_omega), (1.0, 0.0));
        assert_eq!(r.fitted_a_b, (1.0, 1.0));
    }

    #[test]
    fn exponential_weight_constants() {
        let w = Weight::exp_linear(1.0);
        let r = check_admissibility(&w, 0.25, 20.0).unwrap();
        assert_eq!(r.verdict, AdmissibilityVerdict::AdmissibleAtHorizon);
        assert!((r.fitted_omega - 1.0).abs() < 1e-9);
        assert!((r.fitted_m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exp_square_is_refuted_with_genuine_witness() {
        let w = Weight::exp_square(1.0);
        let r = check_admissibility(&w, 0.5, 50.0).unwrap();
        assert_eq!(r.verdict, AdmissibilityVerdict::Refuted);
        let (tau, t) = r.witness.unwrap();
        assert!(tau < -25.0, "witness at {tau}");
        assert_eq!(t, 1.0);
        let lhs = w.ln_eval(tau);
        let rhs = r.fitted_m.ln() + r.fitted_omega * t + w.ln_eval(tau + t);
        assert!(lhs > rhs);

        // brute-force ratio scan: exp(-2 tau - 1) grows along tau -> -inf
        let ratios: Vec<f64> = (-50..=0)
            .map(|tau| w.ln_eval(tau as f64) - w.ln_eval(tau as f64 + 1.0))
            .collect();
        assert!(ratios.windows(2).all(|p| p[0] > p[1]));
        assert_eq!(ratios[0], 99.0);
    }

    #[test]
    fn invalid_weight_is_reported() {
        let w = Weight::custom("bad", |x| if x > 3.0 { f64::NEG_INFINITY } else { 0.0 });
        assert!(matches!(
            check_admissibility(&w, 0.5, 10.0),
            Err(Error::InvalidWeight(_))
        ));
        assert!(Weight::from_table(&IntTable::new(0, vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn step_bounds_hold_for_fitted_constants() {
        for w in [
            Weight::exp_abs(1.0),
            Weight::two_pow_abs_step(),
            Weight::inverse_quadratic(),
        ] {
            let r = check_admissibility(&w, 0.25, 16.0).unwrap();
            let (a, b) = r.fitted_a_b;
            for i in 0..=128 {
                let s = -16.0 + i as f64 * 0.25;
                for u in 0..=4 {
                    let t = s + u as f64 * 0.25;
                    assert!(a * w.eval(s) <= w.eval(t) * (1.0 + 1e-12));
                    assert!(w.eval(t) <= b * w.eval(s + 1.0) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn hypercyclicity_search() {
        let w = Weight::exp_abs(1.0);
        let r = check_hypercyclic_translation(&w, &[0.0], 30.0, 1e-3).unwrap();
        assert_eq!(r[0].verdict, HorizonVerdict::ConsistentAtHorizon);
        assert_eq!(&r[0].times[..2], &[7.0, 8.0]);

        let one = Weight::constant(1.0).unwrap();
        let r = check_hypercyclic_translation(&one, &[0.0, 2.5], 30.0, 0.5).unwrap();
        assert!(r.iter().all(|v| v.verdict == HorizonVerdict::NotWitnessedAtHorizon));

        let r = check_hypercyclic_translation(&Weight::exp_linear(1.0), &[0.0], 30.0, 1e-3).unwrap();
        assert_eq!(r[0].verdict, HorizonVerdict::NotWitnessedAtHorizon);
        assert!(r[0].times.is_empty());

        assert!(check_hypercyclic_translation(&w, &[40.0], 30.0, 1e-3).is_err());
    }

    #[test]
    fn c0_chaos() {
        let r = check_chaos_c0(&Weight::exp_abs(1.0), 1e-3, 40.0).unwrap();
        assert_eq!(r.verdict, HorizonVerdict::ConsistentAtHorizon);
        let r = check_chaos_c0(&Weight::constant(1.0).unwrap(), 1e-3, 40.0).unwrap();
        assert_eq!(r.verdict, HorizonVerdict::RefutedAtHorizon);
        assert!(r.witness.is_some());
        // exp(-x) only decays on the right
        let r = check_chaos_c0(&Weight::exp_linear(1.0), 1e-3, 40.0).unwrap();
        assert_eq!(r.verdict, HorizonVerdict::RefutedAtHorizon);
        let r = check_chaos_c0(&Weight::exp_linear(1.0).on_half_line(), 1e-3, 40.0).unwrap();
        assert_eq!(r.verdict, HorizonVerdict::ConsistentAtHorizon);
    }

    #[test]
    fn lp_chaos_periods() {
        let opts = LpChaosOptions::default();
        let r = check_chaos_lp(&Weight::exp_abs(1.0), 1.0, 0.1, 10.0, &opts).unwrap();
        assert_eq!(r.verdict, LpChaosVerdict::Witness);
        let p = r.witness_period.unwrap();
        assert!(p <= 5.0);
        // closed form of the two geometric tails
        let e = std::f64::consts::E;
        let exact = (e.powf(-(1.0 + p)) + e.powf(-(p - 1.0))) / (1.0 - e.powf(-p));
        let trial = r.trials.last().unwrap();
        assert!((trial.truncated_sum - exact).abs() < 1e-12);
        // the upper bound 2e^{-P+1}/(1-e^{-P}) is below 0.1 at P = 5
        assert!(2.0 * e.powf(-4.0) / (1.0 - e.powf(-5.0)) < 0.1);

        let r = check_chaos_lp(&Weight::constant(1.0).unwrap(), 1.0, 0.1, 10.0, &opts).unwrap();
        assert_eq!(r.verdict, LpChaosVerdict::Refuted);

        let r = check_chaos_lp(&Weight::gaussian(1.0), 1.0, 1e-3, 10.0, &opts).unwrap();
        assert_eq!(r.verdict, LpChaosVerdict::Witness);

        let r = check_chaos_lp(&Weight::exp_square(1.0), 1.0, 1e-3, 2.0, &opts).unwrap();
        assert_eq!(r.verdict, LpChaosVerdict::RefutedAtCutoff);
    }

    #[test]
    fn fh_lp_sums() {
        let opts = SeriesOptions::default();
        let r = check_fh_lp(&Weight::exp_abs(1.0), 100, &opts).unwrap();
        let e = std::f64::consts::E;
        let exact = 1.0 + 2.0 / (e - 1.0);
        assert_eq!(r.series.verdict, SeriesVerdict::ConvergentAtHorizon);
        assert!((r.series.sum - exact).abs() < 1e-12);
        assert!((r.series.sum - 2.16395).abs() < 1e-5);

        let r = check_fh_lp(&Weight::constant(1.0).unwrap(), 100, &opts).unwrap();
        assert_eq!(r.series.verdict, SeriesVerdict::DivergentAtHorizon);
        assert_eq!(r.series.sum, 201.0);
    }

    #[test]
    fn fh_lp_inverse_quadratic_against_brute_force() {
        // oracle: direct summation to 10^6 plus the analytic tail 2/10^6
        let mut oracle = CompensatedSum::new();
        oracle.add(1.0);
        for k in 1..=1_000_000u64 {
            oracle.add(2.0 / (1.0 + (k * k) as f64));
        }
        let total = oracle.value() + 2e-6;
        let pi = std::f64::consts::PI;
        assert!((total - pi / pi.tanh()).abs() < 1e-10);
        let k = 10_000;
        let r = check_fh_lp(&Weight::inverse_quadratic(), k, &SeriesOptions::default()).unwrap();
        assert_eq!(r.series.verdict, SeriesVerdict::ConvergentAtHorizon);
        assert!((total - r.series.sum).abs() <= 2.0 / k as f64);
    }

    #[test]
    fn step_weight_integral_is_the_left_sum() {
        let w = Weight::two_pow_abs_step();
        let r = check_fh_lp(&w, 20, &SeriesOptions::default()).unwrap();
        let left: f64 = (-20..20).map(|k| w.at(k)).sum();
        assert!((r.integral - left).abs() < 1e-15);
        assert!(r.series.partial_sums.windows(2).all(|p| p[0] <= p[1]));
        let half = check_fh_lp(&Weight::exp_linear(1.0).on_half_line(), 50, &SeriesOptions::default())
            .unwrap();
        assert!((half.series.sum - 1.0 / (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn shift_weights_to_rho() {
        let ones = IntTable::new(-5, vec![1.0; 11]);
        let w = weight_from_shift_weights(&ones).unwrap();
        assert!((-8..8).all(|k| w.at(k) == 1.0));

        let twos = IntTable::new(-5, vec![2.0; 11]);
        let w = weight_from_shift_weights(&twos).unwrap();
        assert!((w.at(0) - 2.0).abs() < 1e-15);
        assert!((w.at(-1) - 4.0).abs() < 1e-14);
        for k in 1..=5 {
            assert!((w.at(k) - 2f64.powi(-(k as i32))).abs() < 1e-15);
        }
        assert_eq!(w.eval(2.7), w.at(2));
        assert!(w.is_step());

        assert!(weight_from_shift_weights(&IntTable::new(1, vec![1.0, 1.0])).is_err());
        assert!(weight_from_shift_weights(&IntTable::new(0, vec![1.0, -1.0])).is_err());
    }

    #[test]
    fn integer_samples_match_eval() {
        let w = Weight::inverse_quadratic();
        let s = w.integer_samples();
        for (i, v) in s.values.iter().enumerate() {
            assert_eq!(*v, w.eval((s.window.0 + i as i64) as f64));
        }
    }
}
