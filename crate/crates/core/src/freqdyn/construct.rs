use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sets::{FrequencySet, FrequencySets, SetRule};
use crate::numeric::LogReal;
use crate::shifts::{LogSeq, PseudoShift, ShiftIndex, SparseSeq};
use crate::{Domain, Error, Result};

/// Inverse of the Cantor pairing `(a, b) -> (a + b)(a + b + 1)/2 + b`.
fn cantor_unpair(z: u64) -> (u64, u64) {
    let mut w = (((8.0 * z as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while w * (w + 1) / 2 > z {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    let b = z - w * (w + 1) / 2;
    (w - b, b)
}

/// The `p`-th term of the default dense sequence in `c_0`. `p - 1` is
/// unpaired into a resolution `l` and a code `c`; the base-`2(l+1)2^l + 1`
/// digits of `c` are read as signed numerators over `2^l`, placed on
/// `I::nth(0), I::nth(1), ...`, and truncated to `W_p`. Every finitely
/// supported vector with dyadic entries is hit at infinitely many `p`
/// (resolution `l` repeats it at every finer resolution). The result is
/// scaled down by a power of two until `||y^p|| < R^p`, so entries stay dyadic.
pub fn dense_sequence_term<I: ShiftIndex>(p: u32, ratio_r: f64, domain: Domain) -> Result<SparseSeq<I>> {
    if p < 1 || !(ratio_r > 1.0) {
        return Err(Error::InvalidInput("need p >= 1 and R > 1".into()));
    }
    let (level, mut code) = cantor_unpair(p as u64 - 1);
    let level = level.min(20) as i32;
    let den = 2f64.powi(level);
    let base = 2 * (level as u64 + 1) * (1u64 << level) + 1;
    let mut out = SparseSeq::new();
    let mut j = 0;
    while code > 0 {
        let d = code % base;
        code /= base;
        let z = if d % 2 == 1 { d.div_ceil(2) as f64 } else { -((d / 2) as f64) };
        let i = I::nth(j, domain);
        if i.in_window(p, domain) {
            out.insert(i, z / den);
        }
        j += 1;
    }
    let bound = ratio_r.powi(p as i32);
    let mut scale = 1.0;
    while out.sup_norm() * scale >= bound {
        scale *= 0.5;
    }
    Ok(out.scale(scale))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "I: Serialize + Clone", deserialize = "I: Deserialize<'de> + Ord"))]
pub struct ConstructionTrace<I: Ord> {
    pub horizon: u64,
    pub ratio_r: f64,
    /// Level `p` uses the set `E_{sigma(p)}`.
    pub sigma: Vec<u32>,
    /// `ln beta_p`, the growth threshold defining `E'_p` (see `construct_fh_vector`).
    pub ln_threshold: Vec<f64>,
    pub psi: Vec<f64>,
    pub e_prime: Vec<Vec<u64>>,
    pub g: Vec<Vec<u64>>,
    pub dense_seq: Vec<SparseSeq<I>>,
    /// `max ln|x_i|` over the entries written at level `p`.
    pub ln_max_entry: Vec<f64>,
    pub entries: usize,
}

/// Builds the frequently hypercyclic vector
/// `x_{phi_n(s)} = y^p(s) / b_s^n` for `n in G_p`, `s in W_p`.
///
/// The threshold for `E'_p` is `beta_p = R^{3p} max(R^p, ||y^p||)` rather than
/// `R^{4p}`, so that targets with `||y^p|| >= R^p` (as used for extraction
/// round trips) still give entries of size at most `R^{-3p}`. Level `p` uses
/// the set `E_{sigma(p)}`, with `sigma` chosen greedily increasing such that
/// `M(sigma(p)) >= beta_p`.
pub fn construct_fh_vector<I: ShiftIndex, S: PseudoShift<I>>(
    spec: &S,
    f: &FrequencySets,
    dense_seq: &[SparseSeq<I>],
    horizon: u64,
) -> Result<(LogSeq<I>, ConstructionTrace<I>)> {
    let r = spec.ratio_r();
    if !(r > 1.0) {
        return Err(Error::HypothesisViolation(format!("ratio constant R = {r} must exceed 1")));
    }
    if horizon > f.horizon {
        return Err(Error::InvalidInput(format!(
            "construction horizon {horizon} exceeds the materialized horizon {}",
            f.horizon
        )));
    }
    let ln_r = r.ln();
    let mut trace = ConstructionTrace {
        horizon,
        ratio_r: r,
        sigma: Vec::new(),
        ln_threshold: Vec::new(),
        psi: Vec::new(),
        e_prime: Vec::new(),
        g: Vec::new(),
        dense_seq: dense_seq.to_vec(),
        ln_max_entry: Vec::new(),
        entries: 0,
    };
    let mut x = LogSeq::new();
    let mut owner: HashMap<I, (u32, u64)> = HashMap::new();
    let mut next_set = 1u32;
    for (pi, y) in dense_seq.iter().enumerate() {
        let p = pi as u32 + 1;
        let pf = p as f64;
        if let Some(s) = y.indices().find(|s| !spec.in_window(p, s)) {
            return Err(Error::InvalidInput(format!("y^{p} has support at {s:?} outside W_{p}")));
        }
        let ln_beta = 3.0 * pf * ln_r + (pf * ln_r).max(y.sup_norm().ln());
        let Some(set) = f.sets[(next_set as usize - 1).min(f.sets.len())..]
            .iter()
            .find(|s| s.m.ln() >= ln_beta - 1e-12)
        else {
            return Err(Error::HypothesisViolation(format!(
                "no frequency set from E_{next_set} on has M >= beta_{p} = exp({ln_beta:.3})"
            )));
        };
        next_set = set.p + 1;

        let window = spec.window(p);
        let e_prime: Vec<u64> = set
            .prefix
            .iter()
            .copied()
            .filter(|&n| n <= horizon && window.iter().all(|s| spec.ln_b(n, s) > ln_beta))
            .collect();
        let psi = spec.psi(p);
        let step = 2 * psi.floor() as usize + 3;
        let g: Vec<u64> = e_prime.iter().skip(step - 1).step_by(step).copied().collect();
        if g.is_empty() {
            return Err(Error::HorizonTooSmall {
                horizon,
                reason: format!(
                    "G_{p} is empty: E'_{p} has {} elements, every {step}-th is kept",
                    e_prime.len()
                ),
            });
        }

        let mut ln_max = f64::NEG_INFINITY;
        for &n in &g {
            for s in &window {
                let i = spec.phi(n, s);
                if let Some((q, m)) = owner.insert(i, (p, n)) {
                    return Err(Error::SpecInconsistency(format!(
                        "index {i:?} assigned from (p = {q}, n = {m}) and (p = {p}, n = {n})"
                    )));
                }
                if let Some(v) = LogReal::from_f64(y.get(s)) {
                    let v = LogReal {
                        negative: v.negative,
                        ln_abs: v.ln_abs - spec.ln_b(n, s),
                    };
                    ln_max = ln_max.max(v.ln_abs);
                    x.insert(i, v);
                }
            }
        }
        if ln_max > -3.0 * pf * ln_r + 1e-9 {
            return Err(Error::SpecInconsistency(format!(
                "level {p} entry exp({ln_max}) exceeds R^-3p"
            )));
        }
        trace.sigma.push(set.p);
        trace.ln_threshold.push(ln_beta);
        trace.psi.push(psi);
        trace.e_prime.push(e_prime);
        trace.g.push(g);
        trace.ln_max_entry.push(ln_max);
    }
    trace.entries = x.len();
    Ok((x, trace))
}

/// The entries `(s, b_s^n x_{phi_n(s)})` of `T_n x`.
pub fn orbit_point<I: ShiftIndex, S: PseudoShift<I>>(spec: &S, x: &LogSeq<I>, n: u64) -> Vec<(I, f64)> {
    x.iter()
        .filter_map(|(i, v)| spec.phi_inv(n, i).map(|s| (s, v.scaled(spec.ln_b(n, &s)))))
        .collect()
}

fn distance_to<I: ShiftIndex>(point: &[(I, f64)], y: &SparseSeq<I>) -> f64 {
    let mut d = 0.0f64;
    let mut seen = 0;
    for (s, v) in point {
        let t = y.get(s);
        if t != 0.0 {
            seen += 1;
        }
        d = d.max((v - t).abs());
    }
    if seen < y.len() {
        let present: std::collections::HashSet<&I> = point.iter().map(|(s, _)| s).collect();
        for (s, t) in y.iter() {
            if !present.contains(s) {
                d = d.max(t.abs());
            }
        }
    }
    d
}

/// `||T_n x - y||_sup`, without materializing `T_n x` as a sequence.
pub fn orbit_distance<I: ShiftIndex, S: PseudoShift<I>>(spec: &S, x: &LogSeq<I>, n: u64, y: &SparseSeq<I>) -> f64 {
    distance_to(&orbit_point(spec, x, n), y)
}

/// `||T_n x - y_j||` for every target and every `n` in `[start, horizon]`,
/// one row per `n`.
pub fn scan_orbit<I: ShiftIndex, S: PseudoShift<I>>(
    spec: &S,
    x: &LogSeq<I>,
    targets: &[SparseSeq<I>],
    start: u64,
    horizon: u64,
) -> Vec<(u64, Vec<f64>)> {
    (start..=horizon)
        .into_par_iter()
        .map(|n| {
            let pt = orbit_point(spec, x, n);
            (n, targets.iter().map(|y| distance_to(&pt, y)).collect())
        })
        .collect()
}

pub fn write_orbit_csv<W: Write>(rows: &[(u64, Vec<f64>)], mut out: W) -> Result<()> {
    writeln!(out, "# schema=1")?;
    let cols = rows.first().map_or(0, |r| r.1.len());
    let header: Vec<String> = (1..=cols).map(|p| format!("distance_{p}")).collect();
    writeln!(out, "n,{}", header.join(","))?;
    for (n, d) in rows {
        let vals: Vec<String> = d.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{n},{}", vals.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub sets: FrequencySets,
    /// `|F_p|` before thinning.
    pub hits: Vec<usize>,
    /// Violations of `alpha_p / 2 <= |b_s^n x_{phi_n(s)}| < 2 alpha_p` on `E_p x W_p`.
    pub estimate_violations: usize,
    pub witnesses: Vec<String>,
}

impl ExtractionReport {
    pub fn all_nonempty(&self) -> bool {
        self.sets.sets.iter().all(|s| !s.prefix.is_empty())
    }
}

/// `F_p = {n in [1, horizon] : ||T_n x - alpha_p sum_{W_p} e_i|| < 1/p}`,
/// thinned to every `(2 floor(Psi(p)) + 3)`-th element, with `M(p) = p`.
/// An empty `F_p` is a finding, not an error.
pub fn extract_frequency_sets<I: ShiftIndex, S: PseudoShift<I>>(
    spec: &S,
    x: &LogSeq<I>,
    alpha: &[f64],
    horizon: u64,
) -> Result<ExtractionReport> {
    let r = spec.ratio_r();
    if alpha.first() != Some(&2.0) {
        return Err(Error::InvalidInput("alpha_1 must equal 2".into()));
    }
    for p in 2..=alpha.len() {
        let need = 4.0 * alpha[p - 2] * r.powf(2.0 * spec.psi(p as u32));
        if !(alpha[p - 1] > need) {
            return Err(Error::InvalidInput(format!("alpha_{p} = {} must exceed {need}", alpha[p - 1])));
        }
    }
    let targets: Vec<SparseSeq<I>> = alpha
        .iter()
        .enumerate()
        .map(|(pi, a)| SparseSeq::from_entries(spec.window(pi as u32 + 1).into_iter().map(|s| (s, *a))))
        .collect();
    let rows = scan_orbit(spec, x, &targets, 1, horizon);

    let mut sets = Vec::new();
    let mut hits = Vec::new();
    let mut violations = 0;
    let mut witnesses = Vec::new();
    for (pi, a) in alpha.iter().enumerate() {
        let p = pi as u32 + 1;
        let f_p: Vec<u64> = rows
            .iter()
            .filter(|(_, d)| d[pi] < 1.0 / p as f64)
            .map(|(n, _)| *n)
            .collect();
        let step = 2 * spec.psi(p).floor() as usize + 3;
        let e_p: Vec<u64> = f_p.iter().skip(step - 1).step_by(step).copied().collect();
        for &n in &e_p {
            for s in spec.window(p) {
                let v = x.get(&spec.phi(n, &s)).map_or(0.0, |v| v.scaled(spec.ln_b(n, &s)));
                if !(a / 2.0 <= v.abs() && v.abs() < 2.0 * a) {
                    violations += 1;
                    if witnesses.len() < 50 {
                        witnesses.push(format!("n = {n}, s = {s:?}: |b x| = {v:e}, alpha_{p} = {a}"));
                    }
                }
            }
        }
        hits.push(f_p.len());
        sets.push(FrequencySet {
            p,
            rule: SetRule::Extracted { step: step as u64 },
            prefix: e_p,
            m: p as f64,
        });
    }
    Ok(ExtractionReport {
        sets: FrequencySets { sets, horizon },
        hits,
        estimate_violations: violations,
        witnesses,
    })
}
