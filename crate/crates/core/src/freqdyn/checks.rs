use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::lower_density;
use super::sets::{neighbourhood_collision, FrequencySets};
use crate::dyadic::SampledFunction;
use crate::shifts::{PseudoShift, ShiftIndex};
use crate::weights::Weight;
use crate::{Domain, Error, Result};

/// Stored witnesses per condition; the total count is always reported.
const MAX_WITNESSES: usize = 50;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub passed: bool,
    pub violations: usize,
    pub witnesses: Vec<String>,
    pub detail: String,
}

impl ConditionResult {
    fn from_witnesses(violations: usize, witnesses: Vec<String>, detail: String) -> Self {
        Self {
            passed: violations == 0,
            violations,
            witnesses,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub horizon: u64,
    pub a: ConditionResult,
    pub b: ConditionResult,
    pub c: ConditionResult,
    pub d: ConditionResult,
    /// The bound `rho(k + n) <= M^{|k|} rho(n)`, translation criterion only.
    pub k_plus_n: Option<ConditionResult>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.a.passed
            && self.b.passed
            && self.c.passed
            && self.d.passed
            && self.k_plus_n.as_ref().is_none_or(|r| r.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Condition (a) asks for `lower_density > density_threshold`.
    pub density_threshold: f64,
    /// Condition (c) for the translation criterion asks for
    /// `max rho(n) < c_tol` over `E_p ∩ [horizon/2, horizon]`.
    pub c_tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            density_threshold: 0.0,
            c_tol: 1e-3,
        }
    }
}

fn check_density(f: &FrequencySets, opts: &CheckOptions) -> Result<ConditionResult> {
    let mut w = Vec::new();
    let mut details = Vec::new();
    for s in &f.sets {
        let d = lower_density(&s.prefix, f.horizon)?;
        details.push(format!("E_{}: {d:.6}", s.p));
        if !(d > opts.density_threshold) {
            w.push(format!("E_{} has lower density {d} at horizon {}", s.p, f.horizon));
        }
    }
    Ok(ConditionResult::from_witnesses(w.len(), w, details.join(", ")))
}

/// Splits `E_p` at `horizon/2` and compares the minimum of `values` over
/// the tail with the minimum over the head: growth along the set is
/// witnessed when the tail minimum is strictly larger.
fn tail_growth(prefix: &[u64], horizon: u64, value: impl Fn(u64) -> f64) -> std::result::Result<(f64, f64), String> {
    let split = horizon / 2;
    let head = prefix.iter().filter(|&&n| n < split).map(|&n| value(n)).fold(f64::INFINITY, f64::min);
    let tail = prefix.iter().filter(|&&n| n >= split).map(|&n| value(n)).fold(f64::INFINITY, f64::min);
    if !head.is_finite() || !tail.is_finite() {
        return Err("prefix does not reach both halves of the horizon".into());
    }
    Ok((head, tail))
}

/// Conditions (a)–(d) of the pseudo-shift criterion on the materialized
/// prefixes, with `W_p` taken from the shift.
pub fn check_thm21_conditions<I: ShiftIndex, S: PseudoShift<I>>(
    spec: &S,
    f: &FrequencySets,
    opts: &CheckOptions,
) -> Result<ConditionReport> {
    let a = check_density(f, opts)?;
    let windows: Vec<Vec<I>> = (1..=f.p_max()).map(|p| spec.window(p)).collect();

    // (b): phi_n(W_p) ∩ phi_m(W_q) = ∅ for p != q
    let mut owner: HashMap<I, (u32, u64)> = HashMap::new();
    let mut wb = Vec::new();
    let mut nb = 0;
    for s in &f.sets {
        for &n in &s.prefix {
            for t in &windows[s.p as usize - 1] {
                let i = spec.phi(n, t);
                match owner.get(&i) {
                    Some(&(q, m)) if q != s.p => {
                        nb += 1;
                        if wb.len() < MAX_WITNESSES {
                            wb.push(format!("phi_{n}(W_{}) meets phi_{m}(W_{q}) at {i:?}", s.p));
                        }
                    }
                    Some(_) => {}
                    None => {
                        owner.insert(i, (s.p, n));
                    }
                }
            }
        }
    }
    let b = ConditionResult::from_witnesses(nb, wb, format!("{} images checked", owner.len()));

    // (c): b_s^n grows along E_p for s in W_p
    let mut wc = Vec::new();
    for s in &f.sets {
        for t in &windows[s.p as usize - 1] {
            match tail_growth(&s.prefix, f.horizon, |n| spec.ln_b(n, t)) {
                Ok((head, tail)) if tail > head => {}
                Ok((head, tail)) => wc.push(format!(
                    "E_{}, s = {t:?}: min ln b over tail {tail} does not exceed head {head}",
                    s.p
                )),
                Err(e) => wc.push(format!("E_{}: {e}", s.p)),
            }
        }
    }
    let c = ConditionResult::from_witnesses(wc.len(), wc.into_iter().take(MAX_WITNESSES).collect(), format!("horizon {}", f.horizon));

    // (d): b_s^n / b_t^m <= 1 / (M(p) M(q)) whenever phi_n(s) = phi_m(t), n != m
    let all: Vec<(u32, u64, f64)> = f
        .sets
        .iter()
        .flat_map(|s| s.prefix.iter().map(move |&n| (s.p, n, s.m.ln())))
        .collect();
    let found: Vec<(usize, Vec<String>)> = all
        .par_iter()
        .map(|&(p, n, ln_mp)| {
            let mut count = 0;
            let mut w = Vec::new();
            for &(q, m, ln_mq) in &all {
                if m == n {
                    continue;
                }
                for t in &windows[q as usize - 1] {
                    let Some(s) = spec.phi_inv(n, &spec.phi(m, t)) else {
                        continue;
                    };
                    let lhs = spec.ln_b(n, &s) - spec.ln_b(m, t);
                    if lhs > -(ln_mp + ln_mq) + 1e-12 * (1.0 + lhs.abs()) {
                        count += 1;
                        if w.len() < 4 {
                            w.push(format!(
                                "n = {n} in E_{p}, m = {m} in E_{q}, t = {t:?}: ln(b_s^n / b_t^m) = {lhs:.6}"
                            ));
                        }
                    }
                }
            }
            (count, w)
        })
        .collect();
    let nd = found.iter().map(|r| r.0).sum();
    let wd = found.into_iter().flat_map(|r| r.1).take(MAX_WITNESSES).collect();
    let d = ConditionResult::from_witnesses(nd, wd, format!("{} pairs", all.len() * all.len()));

    Ok(ConditionReport {
        horizon: f.horizon,
        a,
        b,
        c,
        d,
        k_plus_n: None,
    })
}

/// Conditions (a)–(d) of the translation criterion on `C_0^rho` (the
/// half-line variant when the weight lives on `[0, inf)`), plus the bound
/// `rho(k + n) <= M^{|k|} rho(n)` for `n in E_p`, `|k| <= p`, with `M`
/// fitted as the largest ratio `rho(k+1)/rho(k)` or its inverse on the window.
pub fn check_c0_translation_fh(w: &Weight, f: &FrequencySets, opts: &CheckOptions) -> Result<ConditionReport> {
    let h = f.horizon as i64;
    let domain = w.domain();
    let lo = if domain == Domain::FullLine { -h } else { 0 };
    let pm = f.p_max() as i64;

    // hypothesis: bounded neighbour ratios on the window
    let mut outer = 0.0f64;
    let mut inner = 0.0f64;
    for k in lo..h + pm {
        let r = (w.ln_at(k + 1) - w.ln_at(k)).abs();
        if !r.is_finite() {
            return Err(Error::InvalidWeight(format!("{} is not positive near {k}", w.name())));
        }
        outer = outer.max(r);
        if k.abs() <= h / 2 {
            inner = inner.max(r);
        }
    }
    // linear growth of the log-ratio between the halves signals an unbounded ratio
    if outer > inner + 1.0 {
        return Err(Error::HypothesisViolation(format!(
            "neighbour ratios of {} grow across the window: ln sup {outer} vs {inner} on the inner half",
            w.name()
        )));
    }
    let ln_m = outer;

    let a = check_density(f, opts)?;

    let b = match neighbourhood_collision(f, domain) {
        None => ConditionResult::from_witnesses(0, vec![], "neighbourhoods disjoint".into()),
        Some(wit) => ConditionResult::from_witnesses(1, vec![wit], "first collision".into()),
    };

    let mut wc = Vec::new();
    for s in &f.sets {
        let split = f.horizon / 2;
        let head = s.prefix.iter().filter(|&&n| n < split).map(|&n| w.at(n as i64)).fold(0.0, f64::max);
        let tail = s.prefix.iter().filter(|&&n| n >= split).map(|&n| w.at(n as i64)).fold(f64::NAN, f64::max);
        if tail.is_nan() {
            wc.push(format!("E_{} has no elements in the tail half", s.p));
        } else if !(tail < opts.c_tol && tail <= head.max(tail.min(head))) {
            wc.push(format!(
                "E_{}: max rho over tail {tail:.3e} (head {head:.3e}, tolerance {})",
                s.p, opts.c_tol
            ));
        }
    }
    let c = ConditionResult::from_witnesses(wc.len(), wc, format!("horizon {}, c_tol {}", f.horizon, opts.c_tol));

    let all: Vec<(u32, u64, f64)> = f
        .sets
        .iter()
        .flat_map(|s| s.prefix.iter().map(move |&n| (s.p, n, s.m.ln())))
        .collect();
    let found: Vec<(usize, Vec<String>)> = all
        .par_iter()
        .map(|&(p, n, ln_mp)| {
            let mut count = 0;
            let mut wit = Vec::new();
            for &(q, m, ln_mq) in &all {
                let applies = match domain {
                    Domain::FullLine => m != n,
                    Domain::HalfLine => m > n,
                };
                if !applies {
                    continue;
                }
                let d = m as i64 - n as i64;
                let lhs = w.ln_at(d);
                if lhs > -(ln_mp + ln_mq) + 1e-12 * (1.0 + lhs.abs()) {
                    count += 1;
                    if wit.len() < 4 {
                        wit.push(format!("n = {n} in E_{p}, m = {m} in E_{q}: rho({d}) = {:.3e}", lhs.exp()));
                    }
                }
            }
            (count, wit)
        })
        .collect();
    let nd = found.iter().map(|r| r.0).sum();
    let wd = found.into_iter().flat_map(|r| r.1).take(MAX_WITNESSES).collect();
    let d = ConditionResult::from_witnesses(nd, wd, format!("{} pairs", all.len() * all.len()));

    let mut wk = Vec::new();
    for s in &f.sets {
        let p = s.p as i64;
        let ks = if domain == Domain::FullLine { -p..=p } else { 0..=p };
        for &n in &s.prefix {
            for k in ks.clone() {
                let lhs = w.ln_at(k + n as i64);
                let rhs = k.abs() as f64 * ln_m + w.ln_at(n as i64);
                if lhs > rhs + 1e-12 * (1.0 + rhs.abs()) {
                    wk.push(format!("rho({} + {n}) exceeds M^{} rho({n})", k, k.abs()));
                }
            }
        }
    }
    let k_plus_n = ConditionResult::from_witnesses(
        wk.len(),
        wk.into_iter().take(MAX_WITNESSES).collect(),
        format!("M = {:.6}", ln_m.exp()),
    );

    Ok(ConditionReport {
        horizon: f.horizon,
        a,
        b,
        c,
        d,
        k_plus_n: Some(k_plus_n),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTrialWitness {
    pub shift: String,
    pub set: Vec<u64>,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalSeriesReport {
    pub passed: bool,
    pub eps: f64,
    pub horizon: u64,
    pub seed: u64,
    pub trials: usize,
    /// Support `[a, b]` of `f` (integer hull) and its length.
    pub support: (i64, i64),
    /// First `n` past which the translates are uniformly small, for `T_1` and `S`.
    pub threshold_backward: Option<u64>,
    pub threshold_forward: Option<u64>,
    pub max_norm: f64,
    pub witness: Option<SeriesTrialWitness>,
}

/// Integer hull of the support of a sampled function.
fn support_hull(f: &SampledFunction) -> Option<(i64, i64)> {
    let first = f.values.iter().position(|v| *v != 0.0)?;
    let last = f.values.iter().rposition(|v| *v != 0.0)?;
    let pu = f.per_unit();
    let a = f.lo + ((first - 1) / pu) as i64;
    let b = f.lo + (last + 1).div_ceil(pu) as i64;
    Some((a, b))
}

/// `sup_{y in [a, b]} rho(y + shift)` on the node grid of `f`.
fn sup_rho_on(w: &Weight, a: i64, b: i64, pu: usize, shift: i64) -> f64 {
    let h = 1.0 / pu as f64;
    (0..=((b - a) as usize * pu))
        .map(|i| w.eval(a as f64 + i as f64 * h + shift as f64))
        .fold(0.0, f64::max)
}

/// `|| sum_{n in set} f(. + sign n) ||_rho` on the common node grid.
fn shifted_sum_norm(f: &SampledFunction, w: &Weight, set: &[u64], sign: i64) -> f64 {
    let pu = f.per_unit() as i64;
    let mut acc: HashMap<i64, f64> = HashMap::new();
    for &n in set {
        // f(x + sign n) lives on x in [lo - sign n, hi - sign n]
        let base = (f.lo - sign * n as i64) * pu;
        for (i, v) in f.values.iter().enumerate() {
            if *v != 0.0 {
                *acc.entry(base + i as i64).or_insert(0.0) += v;
            }
        }
    }
    acc.into_iter()
        .map(|(node, v)| v.abs() * w.eval(node as f64 / pu as f64))
        .fold(0.0, f64::max)
}

/// Random finite sets `F ⊆ [M_eps, horizon]` with
/// `|| sum_{n in F} T_1^n f ||_rho <= 2 eps`, and the same for the forward
/// shift `S f = f(. - 1)`. `M_eps` is the first `n` such that for all
/// `n' in [n, horizon]`, `sup rho` over the translated support stays below
/// `2 eps / (c ||f||_inf)`, with `c = b - a` bounding how many translates
/// overlap. When no threshold exists the check refutes with the set
/// `{horizon}` as witness.
pub fn check_unconditional_series(
    f: &SampledFunction,
    w: &Weight,
    trials: usize,
    horizon: u64,
    eps: f64,
    seed: u64,
) -> Result<UnconditionalSeriesReport> {
    if f.values.first().copied().unwrap_or(0.0) != 0.0 || f.values.last().copied().unwrap_or(0.0) != 0.0 {
        return Err(Error::InvalidInput(
            "f must vanish at both ends of its window (compact support)".into(),
        ));
    }
    if !(eps > 0.0) || horizon < 2 {
        return Err(Error::InvalidInput("need eps > 0 and horizon >= 2".into()));
    }
    let Some((a, b)) = support_hull(f) else {
        return Ok(UnconditionalSeriesReport {
            passed: true,
            eps,
            horizon,
            seed,
            trials,
            support: (f.lo, f.lo),
            threshold_backward: Some(1),
            threshold_forward: Some(1),
            max_norm: 0.0,
            witness: None,
        });
    };
    let pu = f.per_unit();
    let bound = 2.0 * eps / ((b - a) as f64 * f.sup_abs());
    // last n with sup rho >= bound on the translated support
    let threshold = |sign: i64| -> Option<u64> {
        let bad = (1..=horizon)
            .into_par_iter()
            .filter(|&n| sup_rho_on(w, a, b, pu, -sign * n as i64) >= bound)
            .max();
        match bad {
            None => Some(1),
            Some(n) if n < horizon => Some(n + 1),
            Some(_) => None,
        }
    };
    let thr_t = threshold(1);
    let thr_s = threshold(-1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_norm = 0.0f64;
    let mut witness = None;
    for (name, sign, thr) in [("backward", 1i64, thr_t), ("forward", -1, thr_s)] {
        let Some(start) = thr else {
            let norm = shifted_sum_norm(f, w, &[horizon], sign);
            if witness.is_none() {
                witness = Some(SeriesTrialWitness {
                    shift: name.into(),
                    set: vec![horizon],
                    norm,
                });
            }
            max_norm = max_norm.max(norm);
            continue;
        };
        let span = (horizon - start + 1) as usize;
        for _ in 0..trials {
            let size = rng.gen_range(1..=span.min(32));
            let mut set: Vec<u64> = sample(&mut rng, span, size).into_iter().map(|i| start + i as u64).collect();
            set.sort_unstable();
            let norm = shifted_sum_norm(f, w, &set, sign);
            max_norm = max_norm.max(norm);
            if norm > 2.0 * eps && witness.is_none() {
                witness = Some(SeriesTrialWitness {
                    shift: name.into(),
                    set,
                    norm,
                });
            }
        }
    }
    Ok(UnconditionalSeriesReport {
        passed: witness.is_none(),
        eps,
        horizon,
        seed,
        trials,
        support: (a, b),
        threshold_backward: thr_t,
        threshold_forward: thr_s,
        max_norm,
        witness,
    })
}
