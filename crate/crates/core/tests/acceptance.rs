//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::HashSet;
use std::time::Instant;

use binsis::dpsampler::{backward_pass, build_factors, eval_column, ColumnChain};
use binsis::margins::{gale_ryser_feasible, Allowed, ColumnSupport, MarginPair};
use binsis::oracle::{
    enumerate_omega, exact_count_dp, pathological_count, pathological_margins, tv_distance,
    DEFAULT_BUDGET,
};
use binsis::parallel::log_weights;
use binsis::rng::stream;
use binsis::weights::{
    adversarial_block, delta_max_experiment, log_delta_star, summarize, WeightSummary,
};
use binsis::{BernoulliProfile, BinaryMatrix, Heuristic, Sampler, SamplerConfig, StructuralZeroMask};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sampler(mp: &MarginPair, mask: Option<&StructuralZeroMask>, h: Heuristic) -> Sampler {
    Sampler::new(mp, mask, SamplerConfig::with_heuristic(h)).unwrap()
}

fn run_count(mp: &MarginPair, h: Heuristic, draws: u64, seed: u64) -> WeightSummary {
    summarize(&log_weights(&sampler(mp, None, h), seed, draws).unwrap()).unwrap()
}

fn random_matrix<R: Rng>(rng: &mut R, m: usize, n: usize, mask: Option<&StructuralZeroMask>) -> BinaryMatrix {
    let density: f64 = rng.random();
    let mut z = BinaryMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let blocked = mask.is_some_and(|a| a.is_zero(i, j));
            z.set(i, j, !blocked && rng.random::<f64>() < density);
        }
    }
    z
}

/// Random mask with at most one zero per row and column.
fn random_restricted_mask<R: Rng>(rng: &mut R, m: usize, n: usize) -> StructuralZeroMask {
    let mut cols: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        cols.swap(k, rng.random_range(0..=k));
    }
    let positions = (0..m.min(n))
        .filter(|_| rng.random::<f64>() < 0.7)
        .map(|i| (i, cols[i]));
    StructuralZeroMask::new(m, n, positions).unwrap()
}

struct Instance {
    mp: MarginPair,
    mask: Option<StructuralZeroMask>,
}

fn support_instances() -> Vec<Instance> {
    let mut rng = stream(2024, 0);
    let mut out = Vec::new();
    while out.len() < 500 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let mask = (out.len() % 2 == 1).then(|| random_restricted_mask(&mut rng, m, n));
        let z = random_matrix(&mut rng, m, n, mask.as_ref());
        let mp = MarginPair::new(z.row_sums(), z.col_sums()).unwrap();
        out.push(Instance { mp, mask });
    }
    out
}

fn heuristics_for(mask: Option<&StructuralZeroMask>) -> Vec<Heuristic> {
    match mask {
        None => Heuristic::BASE.to_vec(),
        Some(_) => Heuristic::BASE.iter().map(|h| h.with_zeros()).collect(),
    }
}

fn c1_gale_ryser() -> Outcome {
    let mut mismatches = 0;
    let mut checked = 0;
    for m in 1..=4usize {
        for n in 1..=4usize {
            let mut reachable = HashSet::new();
            for bits in 0u32..1 << (m * n) {
                let mut r = vec![0; m];
                let mut c = vec![0; n];
                for (i, ri) in r.iter_mut().enumerate() {
                    for (j, cj) in c.iter_mut().enumerate() {
                        if bits >> (i * n + j) & 1 == 1 {
                            *ri += 1;
                            *cj += 1;
                        }
                    }
                }
                reachable.insert((r, c));
            }
            for r in vectors(m, n) {
                for c in vectors(n, m) {
                    let total: usize = r.iter().sum();
                    if total != c.iter().sum::<usize>() || total > 8 {
                        continue;
                    }
                    checked += 1;
                    let mp = MarginPair::new(r.clone(), c.clone()).unwrap();
                    if gale_ryser_feasible(&mp) != reachable.contains(&(r.clone(), c)) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} margin pairs, {mismatches} mismatches"))
}

/// All vectors of length `len` with entries in `0..=max`.
fn vectors(len: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=max).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn all_with_margins(mp: &MarginPair) -> Vec<BinaryMatrix> {
    enumerate_omega(mp, None).unwrap()
}

fn c2_c3_support_and_normalisation(instances: &[Instance]) -> (Outcome, Outcome) {
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    let mut runs = 0;
    for inst in instances {
        let mask = inst.mask.as_ref();
        let omega: HashSet<BinaryMatrix> = enumerate_omega(&inst.mp, mask).unwrap().into_iter().collect();
        let candidates = all_with_margins(&inst.mp);
        for h in heuristics_for(mask) {
            runs += 1;
            let s = sampler(&inst.mp, mask, h);
            let mut total = 0.0;
            for z in &candidates {
                let lq = s.eval(z);
                if (lq > f64::NEG_INFINITY) != omega.contains(z) {
                    mismatches += 1;
                }
                if lq > f64::NEG_INFINITY {
                    total += lq.exp();
                }
            }
            worst = worst.max((total - 1.0).abs());
        }
    }
    (
        outcome(mismatches == 0, format!("{runs} instance/heuristic runs, {mismatches} mismatches")),
        outcome(worst <= 1e-9, format!("max |sum Q - 1| = {worst:.3e} over {runs} runs")),
    )
}

fn c4_conditional_bernoulli() -> Outcome {
    let mut rng = stream(7, 0);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for m in 1..=12usize {
        for c1 in 0..=m {
            let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.95)).collect();
            let support = ColumnSupport {
                allowed: vec![Allowed::Both; m],
                lower: (0..m).map(|i| if i + 1 == m { c1 } else { 0 }).collect(),
                upper: vec![c1; m],
            };
            let chain: ColumnChain =
                backward_pass(&build_factors(&BernoulliProfile::from_probabilities(&p), &support).unwrap())
                    .unwrap();
            let weight = |b: &[u8]| -> f64 {
                b.iter()
                    .zip(&p)
                    .map(|(&x, &pi)| if x == 1 { pi } else { 1.0 - pi })
                    .product()
            };
            let cols: Vec<Vec<u8>> = (0..1u32 << m)
                .map(|k| (0..m).map(|i| (k >> i & 1) as u8).collect())
                .collect();
            let norm: f64 = cols
                .iter()
                .filter(|b| b.iter().map(|&x| x as usize).sum::<usize>() == c1)
                .map(|b| weight(b))
                .sum();
            for b in &cols {
                let sum: usize = b.iter().map(|&x| x as usize).sum();
                let exact = if sum == c1 { weight(b) / norm } else { 0.0 };
                worst = worst.max((eval_column(&chain, b).exp() - exact).abs());
            }
            cases += 1;
        }
    }
    outcome(worst <= 1e-10, format!("{cases} chains, max atom error {worst:.3e}"))
}

fn c5_exact_uniformity() -> Outcome {
    let (big_r, big_c, m, n) = (240, 179, 240, 301);
    let mp = pathological_margins(big_r, big_c, m, n).unwrap();
    let exact = pathological_count(big_r, big_c, m, n).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for h in [Heuristic::Gmw, Heuristic::Oneil] {
        let s = run_count(&mp, h, 1000, 5);
        let rel = ((s.log_mean - exact.ln()).exp() - 1.0).abs();
        let ok = (s.delta_hat - 1.0).abs() <= 1e-9 && rel < 5e-11;
        pass &= ok;
        parts.push(format!("{h}: delta-1={:.1e} rel.err={rel:.1e}", s.delta_hat - 1.0));
    }
    outcome(pass, format!("N={} ; {}", exact.scientific(8), parts.join(" ; ")))
}

fn finch() -> MarginPair {
    MarginPair::new(
        vec![14, 13, 14, 10, 12, 2, 10, 1, 10, 11, 6, 2, 17],
        vec![4, 4, 11, 10, 10, 8, 9, 10, 8, 9, 3, 10, 4, 7, 9, 3, 3],
    )
    .unwrap()
}

fn c6_finch() -> Outcome {
    let mp = finch();
    let exact = exact_count_dp(&mp, None, DEFAULT_BUDGET).unwrap();
    let exact_ok = exact.to_string() == "67149106137567626";
    let s = run_count(&mp, Heuristic::Cgm, 100_000, 6);
    let rel = (s.log_mean - exact.ln()).exp() - 1.0;
    let cv_ok = (0.4363 / 3.0..=0.4363 * 3.0).contains(&s.cv2_hat);
    outcome(
        exact_ok && rel.abs() < 0.01 && cv_ok,
        format!("exact={exact} W_bar rel.err={rel:+.4} cv2={:.4}", s.cv2_hat),
    )
}

fn c7_consistency() -> Outcome {
    let mut rng = stream(77, 0);
    let mut good = 0;
    let mut done = 0;
    while done < 50 {
        let m = rng.random_range(2..=5);
        let n = rng.random_range(2..=5);
        let z = random_matrix(&mut rng, m, n, None);
        let mp = MarginPair::new(z.row_sums(), z.col_sums()).unwrap();
        let h = Heuristic::BASE[done % 4];
        let truth = enumerate_omega(&mp, None).unwrap().len() as f64;
        let s = run_count(&mp, h, 10_000, 1000 + done as u64);
        // exactly uniform proposals give S = 0 up to rounding
        if (s.mean() - truth).abs() <= 3.0 * s.std_error() + 1e-9 * truth {
            good += 1;
        }
        done += 1;
    }
    outcome(good >= 47, format!("{good}/50 within 3 standard errors"))
}

fn c8_regular_pattern() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [2usize, 8] {
        let mp = MarginPair::new(vec![k; 100], vec![k; 100]).unwrap();
        let cgm = run_count(&mp, Heuristic::Cgm, 1000, 80 + k as u64);
        let bin = run_count(&mp, Heuristic::Binomial, 1000, 80 + k as u64);
        pass &= cgm.log_delta_hat < bin.log_delta_hat && cgm.cv2_hat < bin.cv2_hat;
        parts.push(format!(
            "k={k}: delta {:.4} vs {:.4}, cv2 {:.2e} vs {:.2e}",
            cgm.delta_hat, bin.delta_hat, cgm.cv2_hat, bin.cv2_hat
        ));
    }
    outcome(pass, parts.join(" ; "))
}

fn c9_external_checks() -> Outcome {
    // unit row sums: the proposal is uniform whatever the column sums
    let mut uniform_ok = true;
    for h in [Heuristic::Oneil, Heuristic::Gmw] {
        let rep = delta_max_experiment(&[1; 40], 30, 20, 200, h, 9).unwrap();
        uniform_ok &= (rep.delta_max - 1.0).abs() <= 1e-9;
    }

    let z = adversarial_block(30, 30, 2).unwrap();
    let mp = MarginPair::new(z.row_sums(), z.col_sums()).unwrap();
    let s = sampler(&mp, None, Heuristic::Binomial);
    let logs = log_weights(&s, 99, 1000).unwrap();
    let internal = summarize(&logs).unwrap().log_delta_hat;
    let star = log_delta_star(s.eval(&z), &logs).unwrap();
    outcome(
        uniform_ok && star > internal,
        format!(
            "delta_max uniform={uniform_ok} ; block: delta*={:.4} > delta={:.4}",
            star.exp(),
            internal.exp()
        ),
    )
}

fn c10_structural_zeros() -> Outcome {
    let m = 20;
    let mp = MarginPair::new(vec![4; m], vec![4; m]).unwrap();
    let mask = StructuralZeroMask::zero_diagonal(m, m);
    let s = sampler(&mp, Some(&mask), Heuristic::CgmSz);
    let draws = binsis::parallel::sample_batch(&s, 10, 10_000).unwrap();
    let valid = draws.iter().all(|d| {
        d.matrix.row_sums() == mp.rows()
            && d.matrix.col_sums() == mp.cols()
            && (0..m).all(|i| d.matrix.get(i, i) == 0)
    });

    let small = MarginPair::new(vec![1; 3], vec![1; 3]).unwrap();
    let diag = StructuralZeroMask::zero_diagonal(3, 3);
    let mut tv_ok = true;
    let mut parts = Vec::new();
    for h in [Heuristic::CgmSz, Heuristic::BinomialSz, Heuristic::OneilSz, Heuristic::Gmw] {
        let tv = tv_distance(&small, h, Some(&diag)).unwrap().tv;
        tv_ok &= tv <= 0.2;
        parts.push(format!("{h}={tv:.3}"));
    }
    outcome(
        valid && tv_ok,
        format!("10000 draws valid={valid} ; TV {}", parts.join(" ")),
    )
}

fn c11_rescaling() -> Outcome {
    let mp = MarginPair::new(vec![5, 4, 4, 3, 3, 2, 2, 1], vec![4, 4, 3, 3, 3, 3, 2, 2]).unwrap();
    let plain = sampler(&mp, None, Heuristic::Cgm);
    let scaled = Sampler::new(
        &mp,
        None,
        SamplerConfig {
            factor_scale: 1e3,
            ..SamplerConfig::with_heuristic(Heuristic::Cgm)
        },
    )
    .unwrap();
    let mut same = true;
    let mut worst_q = 0.0f64;
    for k in 0..200 {
        let a = plain.sample_indexed(11, k).unwrap();
        let b = scaled.sample_indexed(11, k).unwrap();
        same &= a.matrix == b.matrix;
        worst_q = worst_q.max((a.log_q - b.log_q).abs());
    }

    let mut rng = stream(12, 0);
    let mut worst_pi = 0.0f64;
    for _ in 0..50 {
        let m = 10;
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..0.99)).collect();
        let support = ColumnSupport {
            allowed: vec![Allowed::Both; m],
            lower: (0..m).map(|i| if i + 1 == m { 4 } else { 0 }).collect(),
            upper: vec![4; m],
        };
        let f = build_factors(&BernoulliProfile::from_probabilities(&p), &support).unwrap();
        let mut g = f.clone();
        for i in 0..m {
            g.scale_stage(i, 1e3f64.ln());
        }
        let (a, b) = (backward_pass(&f).unwrap(), backward_pass(&g).unwrap());
        for i in 0..m {
            for s in 0..a.width() {
                let (x, y) = (a.transition(i, s), b.transition(i, s));
                for (u, v) in [(x.0, y.0), (x.1, y.1)] {
                    worst_pi = worst_pi.max((u.exp() - v.exp()).abs());
                }
            }
        }
    }
    outcome(
        same && worst_q <= 1e-12 && worst_pi <= 1e-12,
        format!("matrices identical={same} max dlogQ={worst_q:.1e} max dpi={worst_pi:.1e}"),
    )
}

fn c12_complexity() -> Outcome {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for m in [50usize, 100, 200, 400] {
        let mp = MarginPair::new(vec![4; m], vec![4; m]).unwrap();
        let s = sampler(&mp, None, Heuristic::Cgm);
        let ops: u64 = (0..3)
            .map(|k| s.sample_counted(&mut stream(12, k)).unwrap().1)
            .sum();
        xs.push((m * mp.col_total()) as f64);
        ys.push(ops as f64 / 3.0);
    }
    let r2 = r_squared(&xs, &ys);
    outcome(r2 >= 0.99, format!("R^2={r2:.5} ops={ys:?}"))
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn acceptance() {
    let instances = support_instances();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "[{}] {name}: {} ({secs:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((name, o, secs));
    };
    run("1 gale-ryser oracle equivalence", &mut c1_gale_ryser);
    let (c2, c3) = c2_c3_support_and_normalisation(&instances);
    let mut c2 = Some(c2);
    let mut c3 = Some(c3);
    run("2 support exactness", &mut || c2.take().unwrap());
    run("3 normalisation", &mut || c3.take().unwrap());
    run("4 conditional bernoulli reduction", &mut c4_conditional_bernoulli);
    run("5 exact uniformity regime", &mut c5_exact_uniformity);
    run("6 finch count", &mut c6_finch);
    run("7 count consistency", &mut c7_consistency);
    run("8 regular margins ordering", &mut c8_regular_pattern);
    run("9 external uniformity checks", &mut c9_external_checks);
    run("10 structural zeros", &mut c10_structural_zeros);
    run("11 rescaling invariance", &mut c11_rescaling);
    run("12 complexity", &mut c12_complexity);
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
