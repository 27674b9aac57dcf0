//! The coefficient map `Q: C_0^rho(R) -> c_0(Z + D~)` and the synthesis map
//! `P: c_0(Z + D~) -> C_0^rho(R)`, which intertwine translation by one with
//! the weighted backward shift `B_w`, `w_{k+tau} = rho(k) / rho(k+1)`:
//! `Q T_1 = B_w Q` and `P B_w = T_1 P`.
//!
//! Both maps need a step weight `rho(x) = rho(floor(x))`.

use serde::{Deserialize, Serialize};

use crate::dyadic::{add_hat, schauder_coefficients, DyadicIndex, SampledFunction};
use crate::shifts::{backward_shift_apply, SparseSeq};
use crate::weights::{fit_step_constants, Weight};
use crate::{Domain, Error, Result};

fn require_step(w: &Weight) -> Result<()> {
    if !w.is_step() {
        return Err(Error::Normalization);
    }
    if w.domain() != Domain::FullLine {
        return Err(Error::InvalidInput(
            "the coefficient maps are defined for weights on the full line".into(),
        ));
    }
    Ok(())
}

/// `w_{k+tau} = rho(k) / rho(k+1)`.
pub fn shift_weight(w: &Weight, idx: &DyadicIndex) -> f64 {
    w.at(idx.k) / w.at(idx.k + 1)
}

/// `B_w a` with the weights induced by `w`.
pub fn weighted_backward_shift(w: &Weight, a: &SparseSeq<DyadicIndex>) -> SparseSeq<DyadicIndex> {
    backward_shift_apply(|i: &DyadicIndex| shift_weight(w, i), a, Domain::FullLine)
}

/// `Q f = (rho(k) a_{k+tau}(f))`, over the indices of level at most `level`
/// whose peaks lie in the window of `f`.
pub fn coefficient_operator(f: &SampledFunction, w: &Weight, level: u32) -> Result<SparseSeq<DyadicIndex>> {
    require_step(w)?;
    let a = schauder_coefficients(f, level)?;
    Ok(SparseSeq::from_entries(
        a.iter().map(|(i, v)| (*i, v * w.at(i.k))),
    ))
}

fn synthesize(a: &SparseSeq<DyadicIndex>, w: &Weight, lo: i64, hi: i64, n_max: u32) -> Result<SampledFunction> {
    let mut out = SampledFunction::zeros(lo, hi, n_max)?;
    for (idx, v) in a.iter() {
        if idx.level > n_max {
            return Err(Error::Resolution {
                requested: idx.level,
                available: n_max,
            });
        }
        let c = v / w.at(idx.k) / (1u64 << idx.level) as f64;
        add_hat(&mut out, idx, c, Domain::FullLine);
    }
    Ok(out)
}

/// `P a = sum_n 2^{-n} sum_{k, tau in D_n} a_{k+tau} / rho(k) phi_{k+tau}`,
/// sampled on `[lo, hi]` at resolution `n_max`. Every hat in the support of
/// `a` must lie inside the window, so the sampled function is exact.
pub fn synthesis_operator(
    a: &SparseSeq<DyadicIndex>,
    w: &Weight,
    window: (i64, i64),
    n_max: u32,
) -> Result<SampledFunction> {
    require_step(w)?;
    let (lo, hi) = window;
    let (lo_d, hi_d) = (crate::dyadic::Dyadic::integer(lo), crate::dyadic::Dyadic::integer(hi));
    if let Some((idx, _)) = a.iter().find(|(i, _)| i.left() < lo_d || i.right() > hi_d) {
        return Err(Error::WindowExtension(format!(
            "support of the hat at {idx} leaves [{lo}, {hi}]"
        )));
    }
    synthesize(a, w, lo, hi, n_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramSide {
    QSide,
    PSide,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub direction: DiagramSide,
    pub weight: String,
    /// Largest diagram defect over the inputs.
    pub residual: f64,
    pub tolerance: f64,
    /// `(claimed bound, largest observed ratio)`.
    pub norm_bound_checked: (f64, f64),
    pub norm_violations: usize,
    /// Window on which the two sides were compared.
    pub comparison_window: (i64, i64),
    pub inputs_used: Vec<String>,
}

impl ConjugacyReport {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance && self.norm_violations == 0
    }
}

/// Compares `Q(T_1 f)` with `B_w(Q f)` on the indices with peaks in
/// `[lo, hi - 1]`, the part of the window still covered after translating,
/// and checks `||Q f|| <= 2 ||f||_rho` for each input.
pub fn verify_diagram_q(
    w: &Weight,
    inputs: &[SampledFunction],
    level: u32,
    tol: f64,
) -> Result<ConjugacyReport> {
    require_step(w)?;
    let mut residual = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut violations = 0;
    let mut window = (i64::MAX, i64::MIN);
    let mut used = Vec::with_capacity(inputs.len());
    for f in inputs {
        let shifted = f.translate_left()?;
        let lhs = coefficient_operator(&shifted, w, level)?;
        let qf = coefficient_operator(f, w, level)?;
        let (lo, hi) = (shifted.lo, shifted.hi);
        let (lo_d, hi_d) = (crate::dyadic::Dyadic::integer(lo), crate::dyadic::Dyadic::integer(hi));
        let rhs = SparseSeq::from_entries(
            weighted_backward_shift(w, &qf)
                .iter()
                .filter(|(i, _)| i.peak() >= lo_d && i.peak() <= hi_d)
                .map(|(i, v)| (*i, *v)),
        );
        residual = residual.max(lhs.sup_distance(&rhs));
        window = (window.0.min(lo), window.1.max(hi));

        let norm = f.weighted_sup(w);
        let q = qf.sup_norm();
        if q > 2.0 * norm * (1.0 + 1e-12) {
            violations += 1;
        }
        if norm > 0.0 {
            worst_ratio = worst_ratio.max(q / norm);
        }
        used.push(format!("sampled[{}, {}] n_max={}", f.lo, f.hi, f.n_max));
    }
    Ok(ConjugacyReport {
        direction: DiagramSide::QSide,
        weight: w.name(),
        residual,
        tolerance: tol,
        norm_bound_checked: (2.0, worst_ratio),
        norm_violations: violations,
        comparison_window: window,
        inputs_used: used,
    })
}

/// Compares `P(B_w a)` with `T_1(P a)` in the weighted sup norm on
/// `[lo - 1, hi - 1]` and checks `||P a||_rho <= (B + 4) ||a||` with `B`
/// fitted on the window.
pub fn verify_diagram_p(
    w: &Weight,
    inputs: &[SparseSeq<DyadicIndex>],
    window: (i64, i64),
    n_max: u32,
    tol: f64,
) -> Result<ConjugacyReport> {
    require_step(w)?;
    let (lo, hi) = window;
    let b = fit_step_constants(w, (lo - 1) as f64, hi as f64, 1.0 / 64.0)?.b;
    let bound = b + 4.0;
    let mut residual = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut violations = 0;
    let mut used = Vec::with_capacity(inputs.len());
    for a in inputs {
        let pa = synthesis_operator(a, w, window, n_max)?;
        let rhs = pa.translate_left_full();
        let lhs = synthesize(&weighted_backward_shift(w, a), w, lo - 1, hi - 1, n_max)?;
        let diff = SampledFunction::from_values(
            lo - 1,
            hi - 1,
            n_max,
            lhs.values.iter().zip(&rhs.values).map(|(x, y)| x - y).collect(),
        )?;
        residual = residual.max(diff.weighted_sup(w));

        let norm = a.sup_norm();
        let p = pa.weighted_sup(w);
        if p > bound * norm * (1.0 + 1e-12) {
            violations += 1;
        }
        if norm > 0.0 {
            worst_ratio = worst_ratio.max(p / norm);
        }
        used.push(format!("sparse[{} entries]", a.len()));
    }
    Ok(ConjugacyReport {
        direction: DiagramSide::PSide,
        weight: w.name(),
        residual,
        tolerance: tol,
        norm_bound_checked: (bound, worst_ratio),
        norm_violations: violations,
        comparison_window: (lo - 1, hi - 1),
        inputs_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::BasisOrdering;

    fn idx(k: i64, level: u32, j: u64) -> DyadicIndex {
        DyadicIndex::new(k, level, j).unwrap()
    }

    fn hat_function(i: &DyadicIndex, c: f64, lo: i64, hi: i64, n: u32) -> SampledFunction {
        let mut f = SampledFunction::zeros(lo, hi, n).unwrap();
        add_hat(&mut f, i, c, Domain::FullLine);
        f
    }

    #[test]
    fn q_requires_step_weight() {
        let f = SampledFunction::zeros(-2, 2, 3).unwrap();
        assert!(matches!(
            coefficient_operator(&f, &Weight::exp_abs(1.0), 3),
            Err(Error::Normalization)
        ));
    }

    #[test]
    fn q_attains_unit_vectors() {
        let w = Weight::two_pow_abs_step();
        for i in BasisOrdering::new(Domain::FullLine).prefix(60) {
            let f = hat_function(&i, 1.0 / w.at(i.k), -8, 8, 6);
            let q = coefficient_operator(&f, &w, 6).unwrap();
            assert_eq!(q.len(), 1, "{i}");
            assert!((q.get(&i) - 1.0).abs() < 1e-15);
        }
        let z = SampledFunction::zeros(-3, 3, 4).unwrap();
        assert!(coefficient_operator(&z, &w, 4).unwrap().is_empty());
    }

    #[test]
    fn p_of_unit_vector_and_q_p_diagonal() {
        let w = Weight::exp_abs(1.0).step_normalized();
        let i = idx(2, 3, 5);
        let a = SparseSeq::from_entries([(i, 1.0)]);
        let pa = synthesis_operator(&a, &w, (-5, 5), 5).unwrap();
        let expected = hat_function(&i, 1.0 / 8.0 / w.at(2), -5, 5, 5);
        for (x, y) in pa.values.iter().zip(&expected.values) {
            assert!((x - y).abs() < 1e-15);
        }
        let qpa = coefficient_operator(&pa, &w, 5).unwrap();
        assert_eq!(qpa.len(), 1);
        assert!((qpa.get(&i) - 0.125).abs() < 1e-15);
        assert!(synthesis_operator(&SparseSeq::new(), &w, (-5, 5), 5)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn p_rejects_support_at_window_edge() {
        let w = Weight::two_pow_abs_step();
        let a = SparseSeq::from_entries([(DyadicIndex::integer(5), 1.0)]);
        assert!(matches!(
            synthesis_operator(&a, &w, (-5, 5), 4),
            Err(Error::WindowExtension(_))
        ));
        let a = SparseSeq::from_entries([(idx(4, 1, 1), 1.0)]);
        assert!(synthesis_operator(&a, &w, (-5, 5), 4).is_ok());
    }

    #[test]
    fn diagrams_on_single_hats() {
        let w = Weight::two_pow_abs_step();
        let f = hat_function(&idx(1, 2, 3), 3.0, -4, 4, 4);
        let r = verify_diagram_q(&w, &[f, SampledFunction::zeros(-4, 4, 4).unwrap()], 4, 0.0).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(r.passed());
        assert_eq!(r.comparison_window, (-4, 3));

        let a = SparseSeq::from_entries([(idx(0, 2, 1), 1.0)]);
        let r = verify_diagram_p(&w, &[a], (-4, 4), 4, 1e-15).unwrap();
        assert!(r.passed(), "{r:?}");
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"direction\":\"p_side\""));
    }
}
