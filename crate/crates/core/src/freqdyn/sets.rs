use serde::{Deserialize, Serialize};

use super::density::lower_density;
use crate::{Domain, Error, Result};

/// How a frequency set was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetRule {
    /// `{offset + j * modulus : j >= 0}`
    Progression { offset: u64, modulus: u64 },
    /// A progression with the listed elements removed by a filter.
    Filtered { offset: u64, modulus: u64, description: String },
    /// Sets obtained by thinning an orbit scan.
    Extracted { step: u64 },
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub p: u32,
    pub rule: SetRule,
    /// Elements in `[0, horizon]`, strictly increasing.
    pub prefix: Vec<u64>,
    /// The constant `M(p)`.
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySets {
    pub sets: Vec<FrequencySet>,
    pub horizon: u64,
}

impl FrequencySets {
    /// Sets `E_1, E_2, ...` given by explicit prefixes and constants.
    pub fn from_prefixes(prefixes: Vec<(Vec<u64>, f64)>, horizon: u64) -> Result<Self> {
        let sets = prefixes
            .into_iter()
            .enumerate()
            .map(|(i, (mut prefix, m))| {
                prefix.retain(|&n| n <= horizon);
                if prefix.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidInput(format!("E_{} is not strictly increasing", i + 1)));
                }
                Ok(FrequencySet {
                    p: i as u32 + 1,
                    rule: SetRule::Explicit,
                    prefix,
                    m,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { sets, horizon })
    }

    pub fn p_max(&self) -> u32 {
        self.sets.len() as u32
    }

    pub fn get(&self, p: u32) -> Option<&FrequencySet> {
        self.sets.get(p.checked_sub(1)? as usize)
    }

    pub fn densities(&self) -> Result<Vec<f64>> {
        self.sets
            .iter()
            .map(|s| lower_density(&s.prefix, self.horizon))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub p_max: u32,
    pub horizon: u64,
    /// Offset of `E_1`.
    pub start: u64,
    /// Distance between the offsets of consecutive sets.
    pub gap: u64,
    /// Common modulus; defaults to `p_max * gap`.
    pub modulus: Option<u64>,
    /// `M(p)`; defaults to `p`.
    pub m: Vec<f64>,
    pub domain: Domain,
}

impl GeneratorParams {
    /// The smallest gap that separates `E_p + [[-p, p]]` from `E_q + [[-q, q]]`.
    pub fn new(p_max: u32, horizon: u64) -> Self {
        let gap = 2 * p_max as u64;
        Self {
            p_max,
            horizon,
            start: gap,
            gap,
            modulus: None,
            m: Vec::new(),
            domain: Domain::FullLine,
        }
    }
}

/// Residue classes `E_p = {o_p + j L}` with `o_p = start + (p - 1) gap` and
/// modulus `L >= p_max gap`. Distinct sets are at distance at least `gap`
/// from each other, so `gap > p + q` (`gap > q` on the half-line) gives
/// condition (b) of the translation criterion. The claims are re-verified on
/// the generated prefixes.
pub fn generate_frequency_sets(params: &GeneratorParams) -> Result<FrequencySets> {
    let GeneratorParams {
        p_max,
        horizon,
        start,
        gap,
        ..
    } = *params;
    if p_max < 1 {
        return Err(Error::Generation("p_max must be at least 1".into()));
    }
    let pm = p_max as u64;
    let modulus = params.modulus.unwrap_or(pm * gap);
    if gap == 0 || modulus < pm * gap {
        return Err(Error::Generation(format!(
            "modulus {modulus} cannot hold {p_max} offsets at gap {gap}"
        )));
    }
    let needed = match params.domain {
        Domain::FullLine => 2 * pm - 1,
        Domain::HalfLine => pm,
    };
    if p_max > 1 && gap <= needed {
        return Err(Error::Generation(format!(
            "gap {gap} does not separate the neighbourhoods of {p_max} sets (need > {needed})"
        )));
    }
    if horizon < start + modulus {
        return Err(Error::Generation(format!(
            "horizon {horizon} is shorter than one period {} of the scheme",
            start + modulus
        )));
    }
    let sets: Vec<FrequencySet> = (1..=p_max)
        .map(|p| {
            let offset = start + (p as u64 - 1) * gap;
            FrequencySet {
                p,
                rule: SetRule::Progression { offset, modulus },
                prefix: (offset..=horizon).step_by(modulus as usize).collect(),
                m: params.m.get(p as usize - 1).copied().unwrap_or(p as f64),
            }
        })
        .collect();
    let out = FrequencySets { sets, horizon };
    if let Some(w) = neighbourhood_collision(&out, params.domain) {
        return Err(Error::Generation(format!("generated sets collide: {w}")));
    }
    for (s, d) in out.sets.iter().zip(out.densities()?) {
        if !(d > 0.0) {
            return Err(Error::Generation(format!("E_{} has zero density at horizon", s.p)));
        }
    }
    Ok(out)
}

/// First pair `n in E_p`, `m in E_q`, `p != q`, whose neighbourhoods
/// `n + [[-p, p]]` and `m + [[-q, q]]` (`[[0, p]]` on the half-line) meet.
pub fn neighbourhood_collision(sets: &FrequencySets, domain: Domain) -> Option<String> {
    let mut all: Vec<(i64, i64, u32, u64)> = sets
        .sets
        .iter()
        .flat_map(|s| {
            let r = s.p as i64;
            let lo = if domain == Domain::FullLine { r } else { 0 };
            s.prefix.iter().map(move |&n| (n as i64 - lo, n as i64 + r, s.p, n))
        })
        .collect();
    all.sort();
    // sweep: keep the interval reaching furthest right
    let mut reach: Option<(i64, u32, u64)> = None;
    for (a, b, p, n) in all {
        if let Some((rb, rp, rn)) = reach {
            if a <= rb && rp != p {
                return Some(format!("E_{rp} at {rn} and E_{p} at {n}"));
            }
            if b > rb {
                reach = Some((b, p, n));
            }
        } else {
            reach = Some((b, p, n));
        }
    }
    None
}
