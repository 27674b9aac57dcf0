//! Dyadic index set `Z + D`, the Faber–Schauder hat system and sampled
//! piecewise-linear functions.
//!
//! All index arithmetic is exact: a dyadic rational is an `(i128, exponent)`
//! pair and a [`DyadicIndex`] is `(k, level, numerator)`. Floating point only
//! enters through function values.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::shifts::SparseSeq;
use crate::weights::Weight;
use crate::{Domain, Error, Result};

/// Exact dyadic rational `num / 2^exp`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

impl Dyadic {
    pub fn new(num: i128, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.reduce();
        d
    }

    pub fn integer(k: i64) -> Self {
        Dyadic {
            num: k as i128,
            exp: 0,
        }
    }

    fn reduce(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    /// Numerator over the common denominator `2^exp`; `exp` must be at least `self.exp`.
    pub fn scaled_numerator(&self, exp: u32) -> i128 {
        debug_assert!(exp >= self.exp);
        self.num << (exp - self.exp)
    }

    pub fn floor(&self) -> i64 {
        (self.num >> self.exp) as i64
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.exp as i32)
    }

    pub fn add(self, other: Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        Dyadic::new(self.scaled_numerator(e) + other.scaled_numerator(e), e)
    }

    pub fn sub(self, other: Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        Dyadic::new(self.scaled_numerator(e) - other.scaled_numerator(e), e)
    }

    /// Multiply by `2^n`.
    pub fn shl(self, n: u32) -> Dyadic {
        if n <= self.exp {
            Dyadic::new(self.num, self.exp - n)
        } else {
            Dyadic::new(self.num << (n - self.exp), 0)
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        self.scaled_numerator(e).cmp(&other.scaled_numerator(e))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1u128 << self.exp)
        }
    }
}

/// Element `k + j/2^n` of `Z + D`, with `j` odd and `0 < j < 2^n` when
/// `n >= 1`, and `j = 0` when `n = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub k: i64,
    pub level: u32,
    pub numerator: u64,
}

/// Highest supported level; keeps `k * 2^level` inside `i128` comfortably.
pub const MAX_LEVEL: u32 = 60;

impl DyadicIndex {
    pub fn new(k: i64, level: u32, numerator: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidInput(format!(
                "level {level} exceeds {MAX_LEVEL}"
            )));
        }
        let ok = if level == 0 {
            numerator == 0
        } else {
            numerator % 2 == 1 && numerator < (1u64 << level)
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "numerator {numerator} invalid at level {level}"
            )));
        }
        Ok(DyadicIndex {
            k,
            level,
            numerator,
        })
    }

    pub const fn integer(k: i64) -> Self {
        DyadicIndex {
            k,
            level: 0,
            numerator: 0,
        }
    }

    /// Index whose peak is the dyadic rational `x`.
    pub fn from_peak(x: Dyadic) -> Self {
        let k = x.floor();
        let frac = x.sub(Dyadic::integer(k));
        DyadicIndex {
            k,
            level: frac.exponent(),
            numerator: frac.numerator() as u64,
        }
    }

    pub fn tau(&self) -> Dyadic {
        Dyadic::new(self.numerator as i128, self.level)
    }

    /// The peak `k + tau` as an exact dyadic.
    pub fn peak(&self) -> Dyadic {
        Dyadic::integer(self.k).add(self.tau())
    }

    pub fn value(&self) -> f64 {
        self.k as f64 + self.numerator as f64 / 2f64.powi(self.level as i32)
    }

    /// Half-width of the hat support: `2^-n`, or 1 for integer indices.
    pub fn half_width(&self) -> Dyadic {
        if self.level == 0 {
            Dyadic::integer(1)
        } else {
            Dyadic::new(1, self.level)
        }
    }

    /// `k + tau^-`.
    pub fn left(&self) -> Dyadic {
        self.peak().sub(self.half_width())
    }

    /// `k + tau^+`.
    pub fn right(&self) -> Dyadic {
        self.peak().add(self.half_width())
    }

    pub fn shifted(&self, n: i64) -> Self {
        DyadicIndex {
            k: self.k + n,
            ..*self
        }
    }
}

impl PartialOrd for DyadicIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.k
            .cmp(&other.k)
            .then_with(|| self.tau().cmp(&other.tau()))
    }
}

impl fmt::Display for DyadicIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            write!(f, "{}", self.k)
        } else {
            write!(f, "{}+{}/{}", self.k, self.numerator, 1u64 << self.level)
        }
    }
}

/// Number of elements of `D_n`.
fn d_len(n: u32) -> u64 {
    if n == 0 {
        1
    } else {
        1u64 << (n - 1)
    }
}

/// `D_n` as numerators over `2^n`, increasing.
pub fn d_set(n: u32) -> Vec<u64> {
    if n == 0 {
        vec![0]
    } else {
        (0..d_len(n)).map(|i| 2 * i + 1).collect()
    }
}

/// `W_n = [[-n, n]] + (D_0 u ... u D_n)`, sorted by value. The half-line
/// variant uses `[[0, n]]`.
pub fn wn_set(n: u32, domain: Domain) -> Vec<DyadicIndex> {
    let lo = match domain {
        Domain::FullLine => -(n as i64),
        Domain::HalfLine => 0,
    };
    let mut out = Vec::with_capacity(((n as i64 - lo + 1) as usize) << n);
    for k in lo..=n as i64 {
        let mut taus: Vec<DyadicIndex> = (0..=n)
            .flat_map(|h| {
                d_set(h).into_iter().map(move |j| DyadicIndex {
                    k,
                    level: h,
                    numerator: j,
                })
            })
            .collect();
        taus.sort();
        out.extend(taus);
    }
    out
}

/// Membership test for `W_n` without materializing it.
pub fn in_wn(idx: &DyadicIndex, n: u32, domain: Domain) -> bool {
    let k_ok = match domain {
        Domain::FullLine => idx.k.unsigned_abs() <= n as u64,
        Domain::HalfLine => idx.k >= 0 && idx.k <= n as i64,
    };
    k_ok && idx.level <= n
}

/// Enumeration of `Z + D` by the blocks `V_n` (or `J_n` on the half-line),
/// ordered by value inside each block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisOrdering {
    pub domain: Domain,
}

impl BasisOrdering {
    pub fn new(domain: Domain) -> Self {
        Self { domain }
    }

    /// Block number containing `idx`: `|k| + level`.
    pub fn block_of(&self, idx: &DyadicIndex) -> Result<u32> {
        if self.domain == Domain::HalfLine && idx.k < 0 {
            return Err(Error::InvalidInput(format!(
                "{idx} is not in the half-line index set"
            )));
        }
        Ok(idx.k.unsigned_abs() as u32 + idx.level)
    }

    pub fn block_len(&self, n: u32) -> u64 {
        match (self.domain, n) {
            (_, 0) => 1,
            (Domain::FullLine, n) => 3u64 << (n - 1),
            (Domain::HalfLine, n) => 1u64 << n,
        }
    }

    /// Rank of the first element of block `n`.
    pub fn block_offset(&self, n: u32) -> u64 {
        match (self.domain, n) {
            (_, 0) => 0,
            (Domain::FullLine, n) => (3u64 << (n - 1)) - 2,
            (Domain::HalfLine, n) => (1u64 << n) - 1,
        }
    }

    /// Elements of block `n` in order.
    pub fn block(&self, n: u32) -> Vec<DyadicIndex> {
        let mut out = Vec::with_capacity(self.block_len(n) as usize);
        let push_k = |out: &mut Vec<DyadicIndex>, k: i64, level: u32| {
            for j in d_set(level) {
                out.push(DyadicIndex {
                    k,
                    level,
                    numerator: j,
                });
            }
        };
        match self.domain {
            Domain::FullLine => {
                for h in 0..=n {
                    push_k(&mut out, -(n as i64) + h as i64, h);
                }
                for h in 1..=n {
                    push_k(&mut out, h as i64, n - h);
                }
            }
            Domain::HalfLine => {
                for h in 0..=n {
                    push_k(&mut out, h as i64, n - h);
                }
            }
        }
        out
    }

    pub fn rank(&self, idx: &DyadicIndex) -> Result<u64> {
        let n = self.block_of(idx)?;
        let within_d = if idx.level == 0 {
            0
        } else {
            (idx.numerator - 1) / 2
        };
        let before_in_block = match self.domain {
            Domain::FullLine if idx.k <= 0 => {
                // k = -n + h with level h
                if idx.level == 0 {
                    0
                } else {
                    1u64 << (idx.level - 1)
                }
            }
            Domain::FullLine => {
                let mut acc = 1u64 << n;
                for h in 1..idx.k as u32 {
                    acc += d_len(n - h);
                }
                acc
            }
            Domain::HalfLine => (0..idx.k as u32).map(|h| d_len(n - h)).sum(),
        };
        Ok(self.block_offset(n) + before_in_block + within_d)
    }

    pub fn index_at(&self, rank: u64) -> DyadicIndex {
        let mut n = 0;
        while self.block_offset(n + 1) <= rank {
            n += 1;
        }
        self.block(n)[(rank - self.block_offset(n)) as usize]
    }

    /// First `len` indices in basis order.
    pub fn prefix(&self, len: usize) -> Vec<DyadicIndex> {
        let mut out = Vec::with_capacity(len);
        let mut n = 0;
        while out.len() < len {
            out.extend(self.block(n));
            n += 1;
        }
        out.truncate(len);
        out
    }
}

/// `phi(x) = max(0, 1 - |x|)`.
pub fn hat(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

/// `phi_{k+tau}(x) = phi(2^n (x - k - tau))`.
pub fn hat_eval(idx: &DyadicIndex, x: f64) -> f64 {
    let scale = 2f64.powi(idx.level as i32);
    hat((x - idx.k as f64) * scale - idx.numerator as f64)
}

/// Exact evaluation at a dyadic point; the result is exact whenever it fits
/// an `f64` mantissa (always the case for `x` of level at most `idx.level`
/// plus 52).
pub fn hat_eval_dyadic(idx: &DyadicIndex, x: Dyadic) -> f64 {
    let u = x.sub(idx.peak()).shl(idx.level);
    let e = u.exponent();
    let one = 1i128 << e;
    let v = one - u.numerator().abs();
    if v <= 0 {
        0.0
    } else {
        Dyadic::new(v, e).to_f64()
    }
}

/// Hat function of the half-line system: `psi_0(x) = max(0, 1 - x)` on
/// `[0, inf)` replaces `phi_0`; all other indices use `phi`.
pub fn basis_eval(domain: Domain, idx: &DyadicIndex, x: f64) -> f64 {
    match domain {
        Domain::HalfLine if x < 0.0 => 0.0,
        Domain::HalfLine if *idx == DyadicIndex::integer(0) => (1.0 - x).max(0.0),
        _ => hat_eval(idx, x),
    }
}

/// Function on the integer window `[lo, hi]` sampled at every node
/// `lo + i / 2^n_max`; linear between nodes and zero outside the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub lo: i64,
    pub hi: i64,
    pub n_max: u32,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn zeros(lo: i64, hi: i64, n_max: u32) -> Result<Self> {
        if hi <= lo {
            return Err(Error::InvalidInput(format!("empty window [{lo}, {hi}]")));
        }
        if n_max > 30 {
            return Err(Error::InvalidInput(format!("n_max {n_max} too large")));
        }
        let len = ((hi - lo) as usize) << n_max;
        Ok(Self {
            lo,
            hi,
            n_max,
            values: vec![0.0; len + 1],
        })
    }

    pub fn from_values(lo: i64, hi: i64, n_max: u32, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::zeros(lo, hi, n_max)?;
        if values.len() != f.values.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} node values, got {}",
                f.values.len(),
                values.len()
            )));
        }
        f.values = values;
        Ok(f)
    }

    pub fn from_fn(lo: i64, hi: i64, n_max: u32, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut s = Self::zeros(lo, hi, n_max)?;
        for i in 0..s.values.len() {
            s.values[i] = f(s.node_f64(i));
        }
        Ok(s)
    }

    /// Nodes per unit interval.
    pub fn per_unit(&self) -> usize {
        1 << self.n_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> Dyadic {
        Dyadic::new(
            ((self.lo as i128) << self.n_max) + i as i128,
            self.n_max,
        )
    }

    pub fn node_f64(&self, i: usize) -> f64 {
        self.lo as f64 + i as f64 / self.per_unit() as f64
    }

    /// Position of an exact dyadic node in `values`, if it is a node.
    pub fn node_index(&self, x: Dyadic) -> Option<usize> {
        if x.exponent() > self.n_max {
            return None;
        }
        let i = x.scaled_numerator(self.n_max) - ((self.lo as i128) << self.n_max);
        (0..self.values.len() as i128)
            .contains(&i)
            .then_some(i as usize)
    }

    /// Value at an exact dyadic point; 0 outside the window.
    pub fn value_at(&self, x: Dyadic) -> Option<f64> {
        if x.exponent() > self.n_max {
            return None;
        }
        Some(self.node_index(x).map_or(0.0, |i| self.values[i]))
    }

    /// Piecewise-linear evaluation; 0 outside the window.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.lo as f64) * self.per_unit() as f64;
        let last = (self.values.len() - 1) as f64;
        if !(0.0..=last).contains(&u) {
            return 0.0;
        }
        let i = u.floor() as usize;
        if i as f64 == last {
            return self.values[i];
        }
        let t = u - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted sup norm `sup |f(x)| rho(x)` over the window. For step weights
    /// each cell `[k, k+1]` is weighted by `rho(k)` including its right
    /// endpoint (the left limit of `rho` there); otherwise nodes are sampled.
    pub fn weighted_sup(&self, w: &Weight) -> f64 {
        let pu = self.per_unit();
        if w.is_step() {
            let mut best = 0.0f64;
            for (c, k) in (self.lo..self.hi).enumerate() {
                let rho = w.eval(k as f64);
                let cell = &self.values[c * pu..=(c + 1) * pu];
                let m = cell.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                best = best.max(m * rho);
            }
            let last = *self.values.last().unwrap();
            best.max(last.abs() * w.eval(self.hi as f64))
        } else {
            self.values
                .iter()
                .enumerate()
                .fold(0.0f64, |m, (i, v)| m.max(v.abs() * w.eval(self.node_f64(i))))
        }
    }

    /// `(T_1 f)(x) = f(x + 1)`: an exact node reindex. The result lives on
    /// `[lo, hi - 1]`, the part of the shifted window still inside the
    /// original one.
    pub fn translate_left(&self) -> Result<SampledFunction> {
        if self.hi - self.lo < 2 {
            return Err(Error::WindowExtension(format!(
                "window [{}, {}] too short to translate",
                self.lo, self.hi
            )));
        }
        let pu = self.per_unit();
        Ok(SampledFunction {
            lo: self.lo,
            hi: self.hi - 1,
            n_max: self.n_max,
            values: self.values[pu..].to_vec(),
        })
    }

    /// `T_1 f` on the full shifted window `[lo - 1, hi - 1]`.
    pub fn translate_left_full(&self) -> SampledFunction {
        SampledFunction {
            lo: self.lo - 1,
            hi: self.hi - 1,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema=1")?;
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{:e}", self.node_f64(i), v)?;
        }
        Ok(())
    }
}

/// Faber–Schauder coefficients of `f` for every index whose peak lies in
/// the window, up to `level`:
/// `a_k = f(k)` and `a_{k+tau} = f(k+tau) - (f(k+tau^-) + f(k+tau^+))/2`.
pub fn schauder_coefficients(f: &SampledFunction, level: u32) -> Result<SparseSeq<DyadicIndex>> {
    if level > f.n_max {
        return Err(Error::Resolution {
            requested: level,
            available: f.n_max,
        });
    }
    let pu = f.per_unit();
    let mut out = SparseSeq::new();
    for (c, k) in (f.lo..=f.hi).enumerate() {
        out.insert(DyadicIndex::integer(k), f.values[c * pu]);
    }
    for n in 1..=level {
        let step = 1usize << (f.n_max - n);
        for (c, k) in (f.lo..f.hi).enumerate() {
            for j in d_set(n) {
                let mid = c * pu + j as usize * step;
                let a = f.values[mid] - 0.5 * (f.values[mid - step] + f.values[mid + step]);
                out.insert(
                    DyadicIndex {
                        k,
                        level: n,
                        numerator: j,
                    },
                    a,
                );
            }
        }
    }
    Ok(out)
}

/// Partial sum `sum a_{k+tau} phi_{k+tau}` over entries of level at most
/// `n_max`, evaluated at every node of `[lo, hi]`.
pub fn reconstruct(
    a: &SparseSeq<DyadicIndex>,
    lo: i64,
    hi: i64,
    n_max: u32,
    domain: Domain,
) -> Result<SampledFunction> {
    let mut out = SampledFunction::zeros(lo, hi, n_max)?;
    for (idx, &v) in a.iter() {
        if idx.level > n_max {
            continue;
        }
        add_hat(&mut out, idx, v, domain);
    }
    Ok(out)
}

/// Adds `v * phi_idx` to the node values of `f` (exact for dyadic data).
pub(crate) fn add_hat(f: &mut SampledFunction, idx: &DyadicIndex, v: f64, domain: Domain) {
    let half = 1i64 << (f.n_max - idx.level.min(f.n_max));
    let center = idx.peak().scaled_numerator(f.n_max) as i64 - (f.lo << f.n_max);
    let n = f.values.len() as i64;
    let psi0 = domain == Domain::HalfLine && *idx == DyadicIndex::integer(0);
    for d in -half..=half {
        if psi0 && d < 0 {
            continue;
        }
        let i = center + d;
        if i < 0 || i >= n {
            continue;
        }
        let h = 1.0 - (d.unsigned_abs() as f64) / half as f64;
        if h > 0.0 {
            f.values[i as usize] += v * h;
        }
    }
}
