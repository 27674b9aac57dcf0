//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use fhdyn::conjugacy::{verify_diagram_p, verify_diagram_q};
use fhdyn::dyadic::{reconstruct, schauder_coefficients, DyadicIndex, SampledFunction};
use fhdyn::freqdyn::{
    check_c0_translation_fh, check_thm21_conditions, check_unconditional_series, construct_fh_vector,
    extract_frequency_sets, generate_frequency_sets, lower_density, CheckOptions, ConstructionTrace, FrequencySets,
    GeneratorParams,
};
use fhdyn::shifts::{discretize_lp, BackwardShift, LogSeq, LpvConjugacy, SparseSeq};
use fhdyn::weights::{check_chaos_c0, check_fh_lp, weight_from_shift_weights, HorizonVerdict, IntTable, SeriesOptions, SeriesVerdict, Weight};
use fhdyn::Domain::FullLine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Random dyadic value `z / 2^10` with `|z| <= 2^20`: every Schauder
/// operation on such data is exact in `f64`.
fn dyadic_value(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-(1i64 << 20)..=(1i64 << 20)) as f64 / 1024.0
}

fn schauder_round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let mut f = SampledFunction::zeros(-8, 8, 8).map_err(|e| e.to_string())?;
        for v in f.values.iter_mut() {
            *v = dyadic_value(&mut rng);
        }
        let a = schauder_coefficients(&f, 8).map_err(|e| e.to_string())?;
        let g = reconstruct(&a, -8, 8, 8, FullLine).map_err(|e| e.to_string())?;
        mismatches += f.values.iter().zip(&g.values).filter(|(x, y)| x != y).count();
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(mismatches == 0, || format!("{mismatches} node mismatches"))?;
    ensure(secs < 5.0, || format!("runtime {secs:.2}s"))?;
    Ok(format!("200 functions, 0 mismatching nodes, {secs:.2}s"))
}

fn level_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..500 {
        let level = rng.gen_range(0..=8u32);
        let mut a = SparseSeq::new();
        for _ in 0..rng.gen_range(1..=20) {
            let idx = if level == 0 {
                DyadicIndex::integer(rng.gen_range(-7..=7))
            } else {
                let j = 2 * rng.gen_range(0..1u64 << (level - 1)) + 1;
                DyadicIndex::new(rng.gen_range(-8..8), level, j).map_err(|e| e.to_string())?
            };
            a.insert(idx, dyadic_value(&mut rng));
        }
        let f = reconstruct(&a, -8, 8, 8, FullLine).map_err(|e| e.to_string())?;
        if f.sup_abs() > 2.0 * a.sup_norm() {
            violations += 1;
        }
        // oracle: hats of one level peak at distinct nodes and vanish at the
        // other peaks, so the sup is exactly the largest coefficient
        ensure(f.sup_abs() == a.sup_norm(), || format!("sup {} != max |a| {}", f.sup_abs(), a.sup_norm()))?;
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok("500 single-level sets, 0 violations".into())
}

fn step_weights() -> Vec<Weight> {
    vec![
        Weight::constant(1.0).unwrap(),
        Weight::exp_abs(1.0).step_normalized(),
        Weight::two_pow_abs_step(),
    ]
}

fn random_function(rng: &mut ChaCha8Rng, half: i64, level: u32) -> SampledFunction {
    SampledFunction::from_values(
        -half,
        half,
        level,
        (0..(2 * half as usize) * (1 << level) + 1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn quasiconjugacy_q() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut parts = Vec::new();
    for w in step_weights() {
        let inputs: Vec<_> = (0..50).map(|_| random_function(&mut rng, 6, 6)).collect();
        let r = verify_diagram_q(&w, &inputs, 6, 1e-12).map_err(|e| e.to_string())?;
        ensure(r.residual <= 1e-12, || format!("{}: residual {:e}", r.weight, r.residual))?;
        ensure(r.norm_violations == 0, || format!("{}: {} norm violations", r.weight, r.norm_violations))?;
        parts.push(format!("{} residual {:.1e}", r.weight, r.residual));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("runtime {secs:.2}s"))?;
    Ok(format!("{}; 0 norm violations, {secs:.2}s", parts.join(", ")))
}

fn random_sparse(rng: &mut ChaCha8Rng, half: i64, level: u32) -> SparseSeq<DyadicIndex> {
    let mut a = SparseSeq::new();
    let count = rng.gen_range(1..=8);
    while a.len() < count {
        let lv = rng.gen_range(0..=level);
        let k = rng.gen_range(-half + 1..half - 1);
        let j = if lv == 0 { 0 } else { 2 * rng.gen_range(0..1u64 << (lv - 1)) + 1 };
        a.insert(DyadicIndex::new(k, lv, j).unwrap(), rng.gen_range(-1.0..1.0));
    }
    a
}

fn quasiconjugacy_p() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut parts = Vec::new();
    for w in step_weights() {
        let inputs: Vec<_> = (0..50).map(|_| random_sparse(&mut rng, 6, 5)).collect();
        let r = verify_diagram_p(&w, &inputs, (-6, 6), 5, 1e-12).map_err(|e| e.to_string())?;
        ensure(r.residual <= 1e-12, || format!("{}: residual {:e}", r.weight, r.residual))?;
        ensure(r.norm_violations == 0, || format!("{}: {} norm violations", r.weight, r.norm_violations))?;
        parts.push(format!(
            "{} residual {:.1e}, ratio {:.3} <= B+4 = {:.3}",
            r.weight, r.residual, r.norm_bound_checked.1, r.norm_bound_checked.0
        ));
    }
    Ok(parts.join("; "))
}

const ALPHA: [f64; 3] = [2.0, 256.0, 131072.0];
const HORIZON: u64 = 100_000;

struct Construction {
    shift: BackwardShift,
    sets: FrequencySets,
    targets: Vec<SparseSeq<i64>>,
    x: LogSeq<i64>,
    trace: ConstructionTrace<i64>,
}

/// Backward shift from `rho(k) = 2^{-|k|}` (`w_k = 2` for `k >= 0`, `1/2`
/// below), `R = 2`, targets `alpha_p sum_{W_p} e_i` and
/// `M(p) = beta_p = R^{3p} max(R^p, alpha_p)`.
fn construction() -> Result<Construction, String> {
    let shift = BackwardShift::from_weight(&Weight::two_pow_abs_step(), 50).map_err(|e| e.to_string())?;
    let mut params = GeneratorParams::new(3, HORIZON);
    params.gap = 60;
    params.start = 60;
    params.modulus = Some(180);
    params.m = vec![16.0, 16384.0, 2f64.powi(26)];
    let sets = generate_frequency_sets(&params).map_err(|e| e.to_string())?;
    let targets: Vec<SparseSeq<i64>> = ALPHA
        .iter()
        .enumerate()
        .map(|(pi, a)| {
            let p = pi as i64 + 1;
            SparseSeq::from_entries((-p..=p).map(|s| (s, *a)))
        })
        .collect();
    let (x, trace) = construct_fh_vector(&shift, &sets, &targets, HORIZON).map_err(|e| e.to_string())?;
    Ok(Construction {
        shift,
        sets,
        targets,
        x,
        trace,
    })
}

/// `T_n x` computed from `b_s^n = rho(s) / rho(s + n) = 2^{|s+n| - |s|}`,
/// independently of the library's shift.
fn orbit_oracle(x: &[(i64, bool, f64)], n: u64) -> Vec<(i64, f64)> {
    let ln2 = std::f64::consts::LN_2;
    x.iter()
        .map(|&(i, neg, ln_abs)| {
            let s = i - n as i64;
            let v = (ln_abs + (i.abs() - s.abs()) as f64 * ln2).exp();
            (s, if neg { -v } else { v })
        })
        .collect()
}

fn oracle_distance(point: &[(i64, f64)], p: i64, alpha: f64) -> f64 {
    let mut d = 0.0f64;
    let mut seen = 0;
    for &(s, v) in point {
        if (-p..=p).contains(&s) {
            seen += 1;
            d = d.max((v - alpha).abs());
        } else {
            d = d.max(v.abs());
        }
    }
    if seen < 2 * p + 1 {
        d = d.max(alpha);
    }
    d
}

fn fh_vector_construction() -> Outcome {
    let t0 = Instant::now();
    let c = construction()?;
    let pre = check_thm21_conditions::<i64, _>(&c.shift, &c.sets, &CheckOptions::default()).map_err(|e| e.to_string())?;
    ensure(pre.all_passed(), || format!("conditions (a)-(d) fail on the generated sets: {pre:?}"))?;
    let entries: Vec<(i64, bool, f64)> = c.x.iter().map(|(i, v)| (*i, v.negative, v.ln_abs)).collect();

    let mut worst = Vec::new();
    for (pi, g) in c.trace.g.iter().enumerate() {
        let p = pi as i64 + 1;
        let bound = 2f64.powi(-(p as i32));
        let mut w = 0.0f64;
        for &n in g {
            let d = oracle_distance(&orbit_oracle(&entries, n), p, ALPHA[pi]);
            ensure(d <= bound, || format!("p = {p}, n = {n}: distance {d:e} > R^-p = {bound}"))?;
            let lib = fhdyn::freqdyn::orbit_distance(&c.shift, &c.x, n, &c.targets[pi]);
            // both sides reconstruct alpha_p from exp(ln alpha_p - ln b + ln b), ln b ~ n ln 2
            let rounding = 64.0 * f64::EPSILON * ALPHA[pi] * (n as f64 + 1.0);
            ensure((lib - d).abs() <= rounding, || format!("library distance {lib} vs oracle {d}"))?;
            w = w.max(d);
        }
        worst.push(format!("p={p}: |G_p|={} max dist {w:.1e}", g.len()));
    }

    let hits: Vec<u64> = (1..=HORIZON)
        .filter(|&n| oracle_distance(&orbit_oracle(&entries, n), 1, ALPHA[0]) < 0.1)
        .collect();
    let d_hits = lower_density(&hits, HORIZON).map_err(|e| e.to_string())?;
    let d_g1 = lower_density(&c.trace.g[0], HORIZON).map_err(|e| e.to_string())?;
    ensure(d_hits >= 0.9 * d_g1, || format!("hit density {d_hits} < 0.9 x {d_g1}"))?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("runtime {secs:.2}s"))?;
    Ok(format!(
        "{}; hit density {d_hits:.5} >= 0.9 x ldens(G_1) = {:.5}; {secs:.1}s",
        worst.join(", "),
        0.9 * d_g1
    ))
}

fn extraction_round_trip() -> Outcome {
    let c = construction()?;
    let r = extract_frequency_sets(&c.shift, &c.x, &ALPHA, HORIZON).map_err(|e| e.to_string())?;
    ensure(r.all_nonempty(), || format!("empty extracted set: hits {:?}", r.hits))?;
    ensure(r.estimate_violations == 0, || format!("{} violations: {:?}", r.estimate_violations, r.witnesses))?;
    // independent recomputation of the two-sided estimate
    let ln2 = std::f64::consts::LN_2;
    for (pi, s) in r.sets.sets.iter().enumerate() {
        let p = pi as i64 + 1;
        for &n in &s.prefix {
            for t in -p..=p {
                let i = t + n as i64;
                let v = c.x.get(&i).map_or(0.0, |v| (v.ln_abs + (i.abs() - t.abs()) as f64 * ln2).exp());
                ensure(ALPHA[pi] / 2.0 <= v && v < 2.0 * ALPHA[pi], || format!("n = {n}, s = {t}: {v}"))?;
            }
        }
    }
    let sizes: Vec<usize> = r.sets.sets.iter().map(|s| s.prefix.len()).collect();
    Ok(format!("|E_p| = {sizes:?} (from |F_p| = {:?}), 0 violations", r.hits))
}

fn lp_characterization() -> Outcome {
    let opts = SeriesOptions::default();
    let conv = check_fh_lp(&Weight::exp_abs(1.0), 100, &opts).map_err(|e| e.to_string())?;
    let e = (-1f64).exp();
    let oracle = 1.0 + 2.0 * e / (1.0 - e);
    ensure(conv.series.verdict == SeriesVerdict::ConvergentAtHorizon, || "e^-|k| not convergent".into())?;
    ensure((conv.series.sum - oracle).abs() <= 1e-6, || format!("sum {} vs {oracle}", conv.series.sum))?;
    let div = check_fh_lp(&Weight::constant(1.0).unwrap(), 100, &opts).map_err(|e| e.to_string())?;
    ensure(div.series.verdict == SeriesVerdict::DivergentAtHorizon, || "constant weight not divergent".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = Weight::exp_abs(1.0);
    let a_true = e; // inf over [k, k+1] of rho(x) / rho(k) for e^{-|x|}
    for _ in 0..100 {
        let f = random_function(&mut rng, 5, 4);
        let p = [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)];
        let d = discretize_lp(&f, &w, p).map_err(|e| e.to_string())?;
        ensure(d.inequality_holds(), || format!("p = {p}: {} > {} / {}", d.seq_norm_pow, d.fn_norm_pow, d.a))?;
        ensure(d.seq_norm_pow <= d.fn_norm_pow / a_true * (1.0 + 1e-12), || "fails with closed-form A".into())?;
    }
    Ok(format!("partial sum {:.8} (oracle {oracle:.8}); rho = 1 divergent; 100 discretizations hold", conv.series.sum))
}

fn lpv_conjugacy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for p in [1.0, 2.0] {
        let c = LpvConjugacy::new(|k| -(k.abs() as f64), p, (-40, 40)).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x = SparseSeq::from_entries((0..rng.gen_range(1..12)).map(|_| (rng.gen_range(-30..30i64), rng.gen_range(-1.0..1.0))));
            let lhs = c.j(&c.b(&x));
            let rhs = c.b_w(&c.j(&x));
            // oracle: (J B x)_k = e^{-|k|/p} x_{k+1}
            let oracle = SparseSeq::from_entries(x.iter().map(|(k, v)| (k - 1, v * (-((k - 1).abs() as f64) / p).exp())));
            for (k, v) in oracle.iter() {
                ensure((lhs.get(k) - v).abs() <= 1e-12 * v.abs(), || format!("J B at {k}"))?;
                let d = (rhs.get(k) - v).abs();
                ensure(d <= 1e-12 * v.abs() + 1e-300, || format!("B_w J at {k}: {d:e}"))?;
                worst = worst.max(d / v.abs());
            }
            ensure(lhs.len() == oracle.len() && rhs.len() == oracle.len(), || "support mismatch".into())?;
        }
    }
    Ok(format!("200 vectors, p in {{1, 2}}, worst relative defect {worst:.1e}"))
}

fn unconditional_series() -> Outcome {
    let f = SampledFunction::from_fn(-3, 3, 4, |x| (1.0 - x.abs()).max(0.0)).map_err(|e| e.to_string())?;
    let r = check_unconditional_series(&f, &Weight::exp_abs(1.0), 1000, 400, 1e-3, 9).map_err(|e| e.to_string())?;
    // oracle: the translate by n has weighted norm e^{1-n}; first n below eps = 1e-3
    let m_eps = (1u64..).find(|&n| (1.0 - n as f64).exp() < 1e-3).unwrap();
    ensure(r.threshold_backward == Some(m_eps) && r.threshold_forward == Some(m_eps), || {
        format!("thresholds {:?}/{:?}, expected {m_eps}", r.threshold_backward, r.threshold_forward)
    })?;
    ensure(r.passed && r.max_norm <= 2e-3, || format!("max norm {}", r.max_norm))?;
    let flat = check_unconditional_series(&f, &Weight::constant(1.0).unwrap(), 100, 400, 1e-3, 9).map_err(|e| e.to_string())?;
    ensure(!flat.passed && flat.witness.is_some(), || "rho = 1 not refuted".into())?;
    Ok(format!(
        "M_eps = {m_eps}; 2 x 1000 sums, max norm {:.3e} <= 2e-3; rho = 1 refuted at {:?}",
        r.max_norm,
        flat.witness.map(|w| w.set)
    ))
}

fn counterexample() -> Outcome {
    const H: u64 = 10_000;
    let reach = H as i64 + 20;
    // rho*(k) = 2^{-dist(k, K u {0})} for k >= 0, K = {24 + 48 2^j}
    let mut k_set = vec![0i64];
    let mut j = 1i64;
    while 24 + 48 * j <= reach {
        k_set.push(24 + 48 * j);
        j *= 2;
    }
    let dist = |k: i64| k_set.iter().map(|c| (k - c).abs()).min().unwrap();
    let w = IntTable::from_fn(-reach, reach, |k| match k {
        k if k < 0 => 0.5,
        0 => 1.0,
        // rho*(k - 1) / rho*(k), from exponents to avoid underflow
        k => 2f64.powi((dist(k) - dist(k - 1)) as i32),
    });
    ensure(w.iter().all(|(_, v)| (0.5..=2.0).contains(&v)), || {
        format!("weights leave [1/2, 2]: {:?}", w.iter().find(|(_, v)| !(0.5..=2.0).contains(v)))
    })?;
    // w_1 ... w_k = 2^{sum of exponents}, kept as an integer
    let mut exponent = 0i64;
    for k in 1..=reach {
        exponent += w.get(k).unwrap().log2() as i64;
        if k_set.contains(&k) {
            ensure(exponent == 0, || format!("w_1...w_{k} = 2^{exponent}"))?;
        }
    }
    let rho = weight_from_shift_weights(&w).map_err(|e| e.to_string())?;
    for &k in &k_set {
        ensure(rho.at(k) == 1.0, || format!("rho({k}) = {}", rho.at(k)))?;
    }
    let chaos = check_chaos_c0(&rho, 1e-3, H as f64).map_err(|e| e.to_string())?;
    ensure(chaos.verdict == HorizonVerdict::RefutedAtHorizon, || format!("mixing not refuted: {chaos:?}"))?;

    // E_p = 6(p - 1) + 48 N, which stays at distance >= 12 from K
    let sets = FrequencySets::from_prefixes(
        (1..=3u64)
            .map(|p| ((1..).map(|j| 48 * j + 6 * (p - 1)).take_while(|&n| n <= H).collect(), 2f64.powi(p as i32)))
            .collect(),
        H,
    )
    .map_err(|e| e.to_string())?;
    let r = check_c0_translation_fh(&rho, &sets, &CheckOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.all_passed(), || format!("frequency-set conditions fail: {r:?}"))?;
    Ok(format!(
        "rho = 1 on {} points of K u {{0}} up to {}; chaos refuted at x = {:?}; (a)-(d) and (k+n) pass on 3 sets",
        k_set.len(),
        k_set.last().unwrap(),
        chaos.witness
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Schauder round trip", schauder_round_trip),
        ("single-level bound", level_bound),
        ("Q-side quasiconjugacy", quasiconjugacy_q),
        ("P-side quasiconjugacy", quasiconjugacy_p),
        ("FH vector construction", fh_vector_construction),
        ("extraction round trip", extraction_round_trip),
        ("L_p characterization", lp_characterization),
        ("l_p^v conjugacy", lpv_conjugacy),
        ("unconditional series", unconditional_series),
        ("counterexample pipeline", counterexample),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("[PASS] criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
