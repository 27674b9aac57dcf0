//! Sparse sequences, weighted pseudo-shifts, weighted backward shifts, the
//! `l_p^v` conjugacy and the `L_p^rho -> l_p^v` discretization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyadic::{in_wn, wn_set, BasisOrdering, DyadicIndex, SampledFunction};
use crate::numeric::{CompensatedSum, LogReal};
use crate::weights::{fit_step_constants, series_verdict, IntTable, SeriesOptions, SeriesReport, Weight};
use crate::{Domain, Error, Result};

/// A finitely supported real sequence. Zero entries are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    bound(serialize = "I: Serialize + Clone", deserialize = "I: Deserialize<'de> + Ord"),
    into = "Vec<Record<I>>",
    from = "Vec<Record<I>>"
)]
pub struct SparseSeq<I: Ord> {
    entries: BTreeMap<I, f64>,
}

/// Serialized form of one sequence entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record<I> {
    pub index: I,
    pub value: f64,
}

impl<I: Ord + Clone> From<SparseSeq<I>> for Vec<Record<I>> {
    fn from(s: SparseSeq<I>) -> Self {
        s.entries
            .into_iter()
            .map(|(index, value)| Record { index, value })
            .collect()
    }
}

impl<I: Ord> From<Vec<Record<I>>> for SparseSeq<I> {
    fn from(r: Vec<Record<I>>) -> Self {
        SparseSeq::from_entries(r.into_iter().map(|r| (r.index, r.value)))
    }
}

impl<I: Ord> Default for SparseSeq<I> {
    fn default() -> Self {
        Self::new()
    }
}

impl<I: Ord> SparseSeq<I> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Later duplicates overwrite earlier ones.
    pub fn from_entries(it: impl IntoIterator<Item = (I, f64)>) -> Self {
        let mut s = Self::new();
        for (i, v) in it {
            s.insert(i, v);
        }
        s
    }

    /// Sets entry `i`; a zero value removes it.
    pub fn insert(&mut self, i: I, v: f64) {
        if v == 0.0 {
            self.entries.remove(&i);
        } else {
            self.entries.insert(i, v);
        }
    }

    pub fn get(&self, i: &I) -> f64 {
        self.entries.get(i).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&I, &f64)> {
        self.entries.iter()
    }

    pub fn indices(&self) -> impl Iterator<Item = &I> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(sum |x_i|^p v(i))^{1/p}`.
    pub fn weighted_p_norm(&self, p: f64, v: impl Fn(&I) -> f64) -> f64 {
        let s: CompensatedSum = self.entries.iter().map(|(i, x)| x.abs().powf(p) * v(i)).collect();
        s.value().powf(1.0 / p)
    }

    pub fn scale(&self, c: f64) -> Self
    where
        I: Clone,
    {
        Self::from_entries(self.entries.iter().map(|(i, v)| (i.clone(), c * v)))
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self
    where
        I: Clone,
    {
        let mut out = self.clone();
        for (i, v) in other.iter() {
            let cur = out.get(i);
            out.insert(i.clone(), cur + c * v);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self
    where
        I: Clone,
    {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self
    where
        I: Clone,
    {
        self.axpy(-1.0, other)
    }

    /// `sup_i |self_i - other_i|`.
    pub fn sup_distance(&self, other: &Self) -> f64
    where
        I: Clone,
    {
        self.sub(other).sup_norm()
    }
}

/// A finitely supported sequence whose entries are stored as `LogReal`,
/// for vectors with entries far outside the `f64` range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSeq<I: Ord> {
    pub entries: BTreeMap<I, LogReal>,
}

impl<I: Ord> Default for LogSeq<I> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl<I: Ord> LogSeq<I> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, i: I, v: LogReal) -> Option<LogReal> {
        self.entries.insert(i, v)
    }

    pub fn get(&self, i: &I) -> Option<LogReal> {
        self.entries.get(i).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&I, &LogReal)> {
        self.entries.iter()
    }

    /// Plain values; entries beyond the `f64` range under- or overflow.
    pub fn to_sparse(&self) -> SparseSeq<I>
    where
        I: Clone,
    {
        SparseSeq::from_entries(self.entries.iter().map(|(i, v)| (i.clone(), v.to_f64())))
    }

    /// `max ln|x_i|`, or `-inf` for the zero sequence.
    pub fn ln_sup(&self) -> f64 {
        self.entries
            .values()
            .fold(f64::NEG_INFINITY, |m, v| m.max(v.ln_abs))
    }
}

impl<I: Ord + Clone> From<&SparseSeq<I>> for LogSeq<I> {
    fn from(s: &SparseSeq<I>) -> Self {
        let mut out = LogSeq::new();
        for (i, v) in s.iter() {
            if let Some(l) = LogReal::from_f64(*v) {
                out.insert(i.clone(), l);
            }
        }
        out
    }
}

/// Index sets closed under integer translation: `Z` and `Z + D~`.
pub trait ShiftIndex: Ord + Copy + Hash + Debug + Send + Sync {
    /// `self + n`.
    fn offset(&self, n: i64) -> Self;
    fn integer_part(&self) -> i64;
    fn value(&self) -> f64;
    /// The exhausting finite sets: `[[-p, p]]` on `Z` and
    /// `[[-p, p]] + D~_p` on `Z + D~` (`[[0, p]]` on the half-line).
    fn window(p: u32, domain: Domain) -> Vec<Self>;
    fn in_window(&self, p: u32, domain: Domain) -> bool;
    /// A fixed enumeration of the domain, exhausting `W_p` early: the
    /// `j`-th element lies in `W_j`.
    fn nth(j: u64, domain: Domain) -> Self;
    fn in_domain(&self, domain: Domain) -> bool {
        domain == Domain::FullLine || self.integer_part() >= 0
    }
}

impl ShiftIndex for i64 {
    fn offset(&self, n: i64) -> Self {
        self + n
    }
    fn integer_part(&self) -> i64 {
        *self
    }
    fn value(&self) -> f64 {
        *self as f64
    }
    fn window(p: u32, domain: Domain) -> Vec<Self> {
        let p = p as i64;
        match domain {
            Domain::FullLine => (-p..=p).collect(),
            Domain::HalfLine => (0..=p).collect(),
        }
    }
    fn in_window(&self, p: u32, domain: Domain) -> bool {
        let p = p as i64;
        match domain {
            Domain::FullLine => (-p..=p).contains(self),
            Domain::HalfLine => (0..=p).contains(self),
        }
    }
    fn nth(j: u64, domain: Domain) -> Self {
        match domain {
            // 0, 1, -1, 2, -2, ...
            Domain::FullLine if j % 2 == 0 => -((j / 2) as i64),
            Domain::FullLine => j.div_ceil(2) as i64,
            Domain::HalfLine => j as i64,
        }
    }
}

impl ShiftIndex for DyadicIndex {
    fn offset(&self, n: i64) -> Self {
        self.shifted(n)
    }
    fn integer_part(&self) -> i64 {
        self.k
    }
    fn value(&self) -> f64 {
        DyadicIndex::value(self)
    }
    fn window(p: u32, domain: Domain) -> Vec<Self> {
        wn_set(p, domain)
    }
    fn in_window(&self, p: u32, domain: Domain) -> bool {
        in_wn(self, p, domain)
    }
    fn nth(j: u64, domain: Domain) -> Self {
        BasisOrdering::new(domain).index_at(j)
    }
}

/// Weighted pseudo-shifts `T_n x = (b_s^n x_{phi_n(s)})_s`.
pub trait PseudoShift<I: ShiftIndex>: Sync {
    /// `ln b_s^n`.
    fn ln_b(&self, n: u64, s: &I) -> f64;
    /// `phi_n(s)`.
    fn phi(&self, n: u64, s: &I) -> I;
    /// The unique `s` with `phi_n(s) = i`, if any.
    fn phi_inv(&self, n: u64, i: &I) -> Option<I>;
    fn g(&self, s: &I) -> f64;
    /// The finite set `W_p`.
    fn window(&self, p: u32) -> Vec<I>;
    fn in_window(&self, p: u32, s: &I) -> bool;
    /// The ratio constant `R > 1` of hypothesis (ii).
    fn ratio_r(&self) -> f64;

    /// `Psi(p) = max { |g(t)| : t in W_p }`.
    fn psi(&self, p: u32) -> f64 {
        self.window(p)
            .iter()
            .fold(0.0f64, |m, t| m.max(self.g(t).abs()))
    }
}

type LnB<I> = Arc<dyn Fn(u64, &I) -> f64 + Send + Sync>;
type Phi<I> = Arc<dyn Fn(u64, &I) -> I + Send + Sync>;
type PhiInv<I> = Arc<dyn Fn(u64, &I) -> Option<I> + Send + Sync>;
type GFn<I> = Arc<dyn Fn(&I) -> f64 + Send + Sync>;
type WinFn<I> = Arc<dyn Fn(u32) -> Vec<I> + Send + Sync>;

/// A pseudo-shift given by closures, for experiments with arbitrary data.
#[derive(Clone)]
pub struct PseudoShiftSpec<I> {
    pub ln_b: LnB<I>,
    pub phi: Phi<I>,
    pub phi_inv: PhiInv<I>,
    pub g: GFn<I>,
    pub window: WinFn<I>,
    pub ratio_r: f64,
}

impl<I: ShiftIndex> PseudoShift<I> for PseudoShiftSpec<I> {
    fn ln_b(&self, n: u64, s: &I) -> f64 {
        (self.ln_b)(n, s)
    }
    fn phi(&self, n: u64, s: &I) -> I {
        (self.phi)(n, s)
    }
    fn phi_inv(&self, n: u64, i: &I) -> Option<I> {
        (self.phi_inv)(n, i)
    }
    fn g(&self, s: &I) -> f64 {
        (self.g)(s)
    }
    fn window(&self, p: u32) -> Vec<I> {
        (self.window)(p)
    }
    fn in_window(&self, p: u32, s: &I) -> bool {
        self.window(p).contains(s)
    }
    fn ratio_r(&self) -> f64 {
        self.ratio_r
    }
}

/// Log-potential `P` with `ln(w_k ... w_{k+n-1}) = P(k + n) - P(k)`.
#[derive(Clone, Debug)]
enum Potential {
    /// `P(k) = sum_{j < k} ln w_j` relative to the table start, with the
    /// edge weights repeated outside the table.
    Table { ln_w: IntTable, prefix: Vec<f64> },
    /// `P(k) = -ln rho(k)`, for `w_k = rho(k) / rho(k + 1)`.
    Weight(Weight),
}

impl Potential {
    fn at(&self, k: i64) -> f64 {
        match self {
            Potential::Weight(w) => -w.ln_at(k),
            Potential::Table { ln_w, prefix } => {
                let lo = ln_w.start;
                let hi = ln_w.end() + 1;
                if k < lo {
                    -(lo - k) as f64 * ln_w.values[0]
                } else if k > hi {
                    prefix[prefix.len() - 1] + (k - hi) as f64 * ln_w.values[ln_w.values.len() - 1]
                } else {
                    prefix[(k - lo) as usize]
                }
            }
        }
    }

    fn ln_w(&self, k: i64) -> f64 {
        match self {
            Potential::Table { ln_w, .. } => ln_w.get_clamped(k),
            Potential::Weight(w) => w.ln_at(k) - w.ln_at(k + 1),
        }
    }
}

/// The weighted backward shift `(B_w x)_i = w_i x_{i+1}` on `c_0(Z)` or
/// `c_0(Z + D~)` with weights depending on the integer part of the index,
/// viewed as the pseudo-shift family of its powers:
/// `b_s^n = w_s ... w_{s+n-1}`, `phi_n(s) = s + n`, `g(s) = s`.
#[derive(Clone, Debug)]
pub struct BackwardShift {
    potential: Potential,
    domain: Domain,
    ratio_r: f64,
}

impl BackwardShift {
    /// Weights `w_k = table[k]`, repeated at the edges outside the table.
    /// `R` is `max(sup w, 1/inf w)` over the table.
    pub fn from_weights(w: &IntTable, domain: Domain) -> Result<Self> {
        if w.values.is_empty() {
            return Err(Error::InvalidInput("empty weight table".into()));
        }
        if let Some((k, v)) = w.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("w_{k} = {v} is not positive")));
        }
        let ln_w = IntTable::new(w.start, w.values.iter().map(|v| v.ln()).collect());
        let mut prefix = Vec::with_capacity(ln_w.values.len() + 1);
        let mut acc = CompensatedSum::new();
        prefix.push(0.0);
        for v in &ln_w.values {
            acc.add(*v);
            prefix.push(acc.value());
        }
        let ratio_r = ratio_from_logs(ln_w.values.iter().copied());
        Ok(Self {
            potential: Potential::Table { ln_w, prefix },
            domain,
            ratio_r,
        })
    }

    /// `w_k = rho(k) / rho(k + 1)`, the shift conjugate to translation by 1.
    /// `R` is fitted from the weights on `[-r_window, r_window]`.
    pub fn from_weight(rho: &Weight, r_window: i64) -> Result<Self> {
        let domain = rho.domain();
        let lo = match domain {
            Domain::FullLine => -r_window,
            Domain::HalfLine => 0,
        };
        let pot = Potential::Weight(rho.clone());
        let logs: Vec<f64> = (lo..=r_window).map(|k| pot.ln_w(k)).collect();
        if logs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeight(format!(
                "{} is not positive on the window",
                rho.name()
            )));
        }
        Ok(Self {
            ratio_r: ratio_from_logs(logs.into_iter()),
            potential: pot,
            domain,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `w_k`.
    pub fn weight(&self, k: i64) -> f64 {
        self.potential.ln_w(k).exp()
    }

    pub fn ln_weight(&self, k: i64) -> f64 {
        self.potential.ln_w(k)
    }

    /// `ln(w_k ... w_{k+n-1})` for integer `k`.
    pub fn ln_product(&self, k: i64, n: i64) -> f64 {
        self.potential.at(k + n) - self.potential.at(k)
    }

    /// Overrides the fitted ratio constant (any `R' >= R` also satisfies (ii)).
    pub fn with_ratio(mut self, r: f64) -> Self {
        self.ratio_r = r;
        self
    }
}

fn ratio_from_logs(logs: impl Iterator<Item = f64>) -> f64 {
    logs.fold(0.0f64, |m, l| m.max(l.abs())).exp()
}

impl<I: ShiftIndex> PseudoShift<I> for BackwardShift {
    fn ln_b(&self, n: u64, s: &I) -> f64 {
        self.ln_product(s.integer_part(), n as i64)
    }
    fn phi(&self, n: u64, s: &I) -> I {
        s.offset(n as i64)
    }
    fn phi_inv(&self, n: u64, i: &I) -> Option<I> {
        let s = i.offset(-(n as i64));
        s.in_domain(self.domain).then_some(s)
    }
    fn g(&self, s: &I) -> f64 {
        s.value()
    }
    fn window(&self, p: u32) -> Vec<I> {
        I::window(p, self.domain)
    }
    fn in_window(&self, p: u32, s: &I) -> bool {
        s.in_window(p, self.domain)
    }
    fn ratio_r(&self) -> f64 {
        self.ratio_r
    }
}

/// `T_n x = (b_j^n x_{phi_n(j)})_j`, one output entry per input entry with a preimage.
pub fn pseudo_shift_apply<I: ShiftIndex, S: PseudoShift<I> + ?Sized>(
    spec: &S,
    n: u64,
    x: &SparseSeq<I>,
) -> SparseSeq<I> {
    let mut out = SparseSeq::new();
    for (i, v) in x.iter() {
        if let Some(j) = spec.phi_inv(n, i) {
            out.insert(j, spec.ln_b(n, &j).exp() * v);
        }
    }
    out
}

/// `T_n x` for a log-stored `x`; products are formed in log space and only
/// the final entries are converted.
pub fn pseudo_shift_apply_log<I: ShiftIndex, S: PseudoShift<I> + ?Sized>(
    spec: &S,
    n: u64,
    x: &LogSeq<I>,
) -> SparseSeq<I> {
    let mut out = SparseSeq::new();
    for (i, v) in x.iter() {
        if let Some(j) = spec.phi_inv(n, i) {
            out.insert(j, v.scaled(spec.ln_b(n, &j)));
        }
    }
    out
}

/// `(B_w x)_i = w_i x_{i+1}`; on the half-line the entry at `i + 1 = 0`
/// has no image.
pub fn backward_shift_apply<I: ShiftIndex>(
    w: impl Fn(&I) -> f64,
    x: &SparseSeq<I>,
    domain: Domain,
) -> SparseSeq<I> {
    let mut out = SparseSeq::new();
    for (i, v) in x.iter() {
        let j = i.offset(-1);
        if j.in_domain(domain) {
            out.insert(j, w(&j) * v);
        }
    }
    out
}

/// For the backward shift on `Z`: the least `n0` with
/// `phi_n(J0) ∩ I0 = ∅` for every `n >= n0`, i.e. `max(I0) - min(J0) + 1`
/// (0 when the sets are empty or `J0` already lies above `I0`).
pub fn run_away_threshold(i0: &[i64], j0: &[i64]) -> u64 {
    match (i0.iter().max(), j0.iter().min()) {
        (Some(a), Some(b)) => (a - b + 1).max(0) as u64,
        _ => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisViolation {
    pub kind: String,
    pub n: u64,
    pub m: u64,
    pub s: String,
    pub t: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub pairs_checked: usize,
    pub violations: Vec<HypothesisViolation>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks injectivity of each `phi_n`, hypothesis (ii) and hypothesis (iii)
/// on every colliding pair `phi_n(s) = phi_m(t)` with `1 <= n, m <= n_max`
/// and `s, t` from `sample`.
pub fn check_pseudo_shift_hypotheses<I: ShiftIndex, S: PseudoShift<I> + ?Sized>(
    spec: &S,
    n_max: u64,
    sample: &[I],
) -> HypothesisReport {
    let ln_r = spec.ratio_r().ln();
    let mut hits: HashMap<I, Vec<(u64, I)>> = HashMap::new();
    for n in 1..=n_max {
        for s in sample {
            hits.entry(spec.phi(n, s)).or_default().push((n, *s));
        }
    }
    let mut pairs = 0;
    let mut violations = Vec::new();
    let mut keys: Vec<_> = hits.keys().copied().collect();
    keys.sort();
    for key in keys {
        let group = &hits[&key];
        for (a, &(n, s)) in group.iter().enumerate() {
            for &(m, t) in &group[a + 1..] {
                pairs += 1;
                let mut push = |kind: &str, detail: String| {
                    violations.push(HypothesisViolation {
                        kind: kind.into(),
                        n,
                        m,
                        s: format!("{s:?}"),
                        t: format!("{t:?}"),
                        detail,
                    })
                };
                if n == m && s != t {
                    push("injectivity", format!("phi_{n} not injective"));
                }
                let d = n.abs_diff(m) as f64;
                let lr = spec.ln_b(n, &s) - spec.ln_b(m, &t);
                // (ii) in both orders: |ln b_s^n - ln b_t^m| <= |n - m| ln R
                if lr.abs() > d * ln_r + 1e-12 * (1.0 + lr.abs()) {
                    push("ratio", format!("|ln(b_s^n / b_t^m)| = {lr} > {d} ln R"));
                }
                let dg = (spec.g(&s) - spec.g(&t)).abs();
                if d > dg + 1e-12 {
                    push("g_separation", format!("|n - m| = {d} > |g(s) - g(t)| = {dg}"));
                }
            }
        }
    }
    HypothesisReport {
        pairs_checked: pairs,
        violations,
    }
}

/// The conjugacy between the unweighted backward shift on `l_p^v` and the
/// weighted shift `B_w` on `l_p`, `w_k = (v_k / v_{k+1})^{1/p}`, via
/// `J x = (x_k v_k^{1/p})_k`.
#[derive(Clone)]
pub struct LpvConjugacy {
    ln_v: Arc<dyn Fn(i64) -> f64 + Send + Sync>,
    p: f64,
    window: (i64, i64),
    pub max_ratio: f64,
    pub ratio_warning: Option<String>,
}

impl LpvConjugacy {
    /// `ln_v(k) = ln v_k`. The ratio `v_k / v_{k+1}` is inspected on `window`:
    /// a warning is recorded when its sup over the window exceeds twice its
    /// sup over the inner half, the finite-window sign of an unbounded ratio.
    pub fn new(ln_v: impl Fn(i64) -> f64 + Send + Sync + 'static, p: f64, window: (i64, i64)) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidInput(format!("p = {p} must be at least 1")));
        }
        let (lo, hi) = window;
        if hi <= lo {
            return Err(Error::InvalidInput("empty window".into()));
        }
        let mut outer = f64::NEG_INFINITY;
        let mut inner = f64::NEG_INFINITY;
        let (ilo, ihi) = (lo + (hi - lo) / 4, hi - (hi - lo) / 4);
        for k in lo..hi {
            let (a, b) = (ln_v(k), ln_v(k + 1));
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidInput(format!("v is not positive near {k}")));
            }
            outer = outer.max(a - b);
            if (ilo..ihi).contains(&k) {
                inner = inner.max(a - b);
            }
        }
        let ratio_warning = (outer > inner + std::f64::consts::LN_2).then(|| {
            format!(
                "v_k/v_(k+1) grows across the window: sup {:.3e} vs {:.3e} on the inner half",
                outer.exp(),
                inner.exp()
            )
        });
        Ok(Self {
            ln_v: Arc::new(ln_v),
            p,
            window,
            max_ratio: outer.exp(),
            ratio_warning,
        })
    }

    pub fn from_weight(rho: &Weight, p: f64, window: (i64, i64)) -> Result<Self> {
        let rho = rho.clone();
        Self::new(move |k| rho.ln_at(k), p, window)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn v(&self, k: i64) -> f64 {
        (self.ln_v)(k).exp()
    }

    /// `w_k = (v_k / v_{k+1})^{1/p}`.
    pub fn shift_weight(&self, k: i64) -> f64 {
        (((self.ln_v)(k) - (self.ln_v)(k + 1)) / self.p).exp()
    }

    /// The weights on the inspected window.
    pub fn shift_weights(&self) -> IntTable {
        IntTable::from_fn(self.window.0, self.window.1 - 1, |k| self.shift_weight(k))
    }

    pub fn j(&self, x: &SparseSeq<i64>) -> SparseSeq<i64> {
        SparseSeq::from_entries(
            x.iter()
                .map(|(k, v)| (*k, v * ((self.ln_v)(*k) / self.p).exp())),
        )
    }

    pub fn j_inv(&self, x: &SparseSeq<i64>) -> SparseSeq<i64> {
        SparseSeq::from_entries(
            x.iter()
                .map(|(k, v)| (*k, v * (-(self.ln_v)(*k) / self.p).exp())),
        )
    }

    /// The unweighted backward shift `(B x)_k = x_{k+1}`.
    pub fn b(&self, x: &SparseSeq<i64>) -> SparseSeq<i64> {
        backward_shift_apply(|_| 1.0, x, Domain::FullLine)
    }

    pub fn b_w(&self, x: &SparseSeq<i64>) -> SparseSeq<i64> {
        backward_shift_apply(|k: &i64| self.shift_weight(*k), x, Domain::FullLine)
    }

    /// `||x||_{l_p^v}^p = sum |x_k|^p v_k`, accumulated from logs.
    pub fn norm_v_pow(&self, x: &SparseSeq<i64>) -> f64 {
        x.iter()
            .map(|(k, v)| (self.p * v.abs().ln() + (self.ln_v)(*k)).exp())
            .collect::<CompensatedSum>()
            .value()
    }

    /// `||x||_{l_p}^p`.
    pub fn norm_lp_pow(&self, x: &SparseSeq<i64>) -> f64 {
        x.iter()
            .map(|(_, v)| v.abs().powf(self.p))
            .collect::<CompensatedSum>()
            .value()
    }

    /// The summability verdict for `sum_k v_k` on `|k| <= k_max`, which decides
    /// frequent hypercyclicity of `B` on `l_p^v`.
    pub fn fh_verdict(&self, k_max: u64, opts: &SeriesOptions) -> SeriesReport {
        series_verdict(
            |j| {
                if j == 0 {
                    self.v(0)
                } else {
                    self.v(j as i64) + self.v(-(j as i64))
                }
            },
            k_max,
            opts,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// `x_k = int_k^{k+1} f`.
    pub x: SparseSeq<i64>,
    pub p: f64,
    /// `sum |x_k|^p rho(k)`.
    pub seq_norm_pow: f64,
    /// `int |f|^p rho` over the window.
    pub fn_norm_pow: f64,
    /// The constant `A` of the unit-step bound, fitted on the window.
    pub a: f64,
}

impl Discretization {
    /// `sum |x_k|^p rho(k) <= (1/A) int |f|^p rho`, with a rounding margin.
    pub fn inequality_holds(&self) -> bool {
        self.seq_norm_pow <= self.fn_norm_pow / self.a * (1.0 + 1e-12) + 1e-300
    }
}

/// `int_0^1 |u + (v - u) t|^p dt`.
fn abs_pow_segment(u: f64, v: f64, p: f64) -> f64 {
    let (a, b) = (u.abs(), v.abs());
    if u.signum() * v.signum() < 0.0 {
        // split at the root
        return (a.powf(p + 1.0) + b.powf(p + 1.0)) / ((p + 1.0) * (a + b));
    }
    let m = 0.5 * (a + b);
    let d = b - a;
    if m == 0.0 {
        return 0.0;
    }
    if d.abs() < 1e-6 * m {
        // series of the exact mean around the midpoint
        let r = d / m;
        return m.powf(p) * (1.0 + p * (p - 1.0) / 24.0 * r * r);
    }
    (b.powf(p + 1.0) - a.powf(p + 1.0)) / ((p + 1.0) * d)
}

const GAUSS_NODES: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Gauss–Legendre on `[a, b]`.
fn gauss(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS_NODES.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// `x_k = int_k^{k+1} f` (exact for the piecewise-linear `f`), together with
/// both sides of `sum |x_k|^p rho(k) <= (1/A) int |f|^p rho`. The right
/// integral is exact per segment for step weights; otherwise each segment is
/// split at its root and integrated with 5-point Gauss–Legendre.
pub fn discretize_lp(f: &SampledFunction, w: &Weight, p: f64) -> Result<Discretization> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p = {p} must be at least 1")));
    }
    let pu = f.per_unit();
    let h = 1.0 / pu as f64;
    let mut x = SparseSeq::new();
    let mut seq = CompensatedSum::new();
    let mut fun = CompensatedSum::new();
    for (c, k) in (f.lo..f.hi).enumerate() {
        let cell = &f.values[c * pu..=(c + 1) * pu];
        let integral: CompensatedSum = cell.windows(2).map(|s| 0.5 * h * (s[0] + s[1])).collect();
        let xk = integral.value();
        x.insert(k, xk);
        let rho_k = w.at(k);
        seq.add(xk.abs().powf(p) * rho_k);
        for (i, s) in cell.windows(2).enumerate() {
            let a = k as f64 + i as f64 * h;
            if w.is_step() {
                fun.add(h * abs_pow_segment(s[0], s[1], p) * rho_k);
            } else {
                let lin = |t: f64| s[0] + (s[1] - s[0]) * (t - a) / h;
                let g = |t: f64| lin(t).abs().powf(p) * w.eval(t);
                if s[0] * s[1] < 0.0 {
                    let r = a + h * s[0] / (s[0] - s[1]);
                    fun.add(gauss(a, r, g) + gauss(r, a + h, g));
                } else {
                    fun.add(gauss(a, a + h, g));
                }
            }
        }
    }
    let step = fit_step_constants(w, f.lo as f64, (f.hi - 1) as f64, h.max(1.0 / 64.0))?;
    Ok(Discretization {
        x,
        p,
        seq_norm_pow: seq.value(),
        fn_norm_pow: fun.value(),
        a: step.a,
    })
}
