//! Importance-weight statistics, count and expectation estimates, and the
//! two external uniformity checks.
//!
//! Weights `W = 1/Q` overflow `f64` for all but the smallest instances, so
//! everything here takes log weights and works relative to their maximum.

use rand::seq::index::sample;
use rand::Rng;

use crate::dpsampler::{Sampler, SamplerConfig};
use crate::enumeration::Heuristic;
use crate::error::{Error, Result};
use crate::margins::MarginPair;
use crate::matrix::BinaryMatrix;
use crate::parallel;
use crate::rng::{child_seed, stream};
use crate::szero::StructuralZeroMask;

/// Largest log-ratio whose exponential is still finite.
const MAX_LOG_RATIO: f64 = 709.782_712_893_384;

/// Summary statistics of a set of importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSummary {
    pub log_weights: Vec<f64>,
    /// `max W / min W`; `inf` when the ratio overflows.
    pub delta_hat: f64,
    /// `log(max W / min W)`, always finite.
    pub log_delta_hat: f64,
    /// Squared coefficient of variation, `S_W^2 / W_bar^2`.
    pub cv2_hat: f64,
    /// `log W_bar`.
    pub log_mean: f64,
    /// `log S_{W_bar}`, `-inf` when all weights are equal.
    pub log_se: f64,
}

impl WeightSummary {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// `W_bar`, possibly `inf`.
    pub fn mean(&self) -> f64 {
        self.log_mean.exp()
    }

    /// `S_{W_bar}`, possibly `inf`.
    pub fn std_error(&self) -> f64 {
        self.log_se.exp()
    }

    /// `S_{W_bar} / W_bar`.
    pub fn relative_error(&self) -> f64 {
        (self.log_se - self.log_mean).exp()
    }
}

/// Summarises log weights.
///
/// With `u_k = log W_k`, `M = max u_k` and `w_k = exp(u_k - M)`:
///
/// * `log W_bar = M + log(sum w_k / N)`
/// * `S_W^2 = e^{2M} sum (w_k - w_bar)^2 / (N - 1)`
/// * `cv^2 = S_W^2 / W_bar^2 = sum (w_k - w_bar)^2 / ((N - 1) w_bar^2)`
/// * `log S_{W_bar} = M + log(S_w^2 / N) / 2`
pub fn summarize(log_weights: &[f64]) -> Result<WeightSummary> {
    let n = log_weights.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 weights, got {n}")));
    }
    if let Some(w) = log_weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite log weight {w}")));
    }
    let (lo, hi) = min_max(log_weights);
    let w: Vec<f64> = log_weights.iter().map(|u| (u - hi).exp()).collect();
    let nf = n as f64;
    let mean = w.iter().sum::<f64>() / nf;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let spread = hi - lo;
    Ok(WeightSummary {
        log_weights: log_weights.to_vec(),
        delta_hat: ratio_from_log(spread),
        log_delta_hat: spread,
        cv2_hat: var / (mean * mean),
        log_mean: hi + mean.ln(),
        log_se: hi + 0.5 * (var / nf).ln(),
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)))
}

fn ratio_from_log(spread: f64) -> f64 {
    if spread > MAX_LOG_RATIO {
        f64::INFINITY
    } else {
        spread.exp()
    }
}

/// Draws `count` matrices and summarises their weights. `W_bar` estimates
/// the number of matrices with the given margins and zeros.
pub fn estimate_count(
    mp: &MarginPair,
    h: Heuristic,
    mask: Option<&StructuralZeroMask>,
    count: u64,
    seed: u64,
) -> Result<WeightSummary> {
    let sampler = Sampler::new(mp, mask, SamplerConfig::with_heuristic(h))?;
    summarize(&parallel::log_weights(&sampler, seed, count)?)
}

/// Self-normalised importance estimate `sum f_k W_k / sum W_k` of the
/// uniform expectation of `f`.
pub fn estimate_expectation(log_weights: &[f64], f_values: &[f64]) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(Error::Degenerate("no samples".into()));
    }
    if log_weights.len() != f_values.len() {
        return Err(Error::Shape(format!(
            "{} weights but {} function values",
            log_weights.len(),
            f_values.len()
        )));
    }
    if log_weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Degenerate("non-finite log weight".into()));
    }
    let (_, hi) = min_max(log_weights);
    let (mut num, mut den) = (0.0, 0.0);
    for (u, f) in log_weights.iter().zip(f_values) {
        let w = (u - hi).exp();
        num += f * w;
        den += w;
    }
    Ok(num / den)
}

/// A matrix whose row `i` is a uniformly chosen `r_i`-subset of the `n`
/// columns, independently across rows. Conditional on its column sums it
/// is uniform over the matrices with those margins.
pub fn uniform_given_rowsums<R: Rng + ?Sized>(r: &[usize], n: usize, rng: &mut R) -> Result<BinaryMatrix> {
    if let Some(&ri) = r.iter().find(|&&ri| ri > n) {
        return Err(Error::Domain(format!("row sum {ri} exceeds {n} columns")));
    }
    let mut z = BinaryMatrix::zeros(r.len(), n);
    for (i, &ri) in r.iter().enumerate() {
        for j in sample(rng, n, ri) {
            z.set(i, j, true);
        }
    }
    Ok(z)
}

/// One replicate of the row-generated uniformity check.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReplicate {
    /// Column sums of the uniform draw.
    pub cols: Vec<usize>,
    /// `-log Q(Z_0)` of the uniform draw.
    pub log_w0: f64,
    /// Max/min weight ratio over the `N` proposal draws and `Z_0`.
    pub delta: f64,
    pub log_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMaxReport {
    pub replicates: Vec<DeltaReplicate>,
    pub delta_max: f64,
    pub log_delta_max: f64,
}

/// For each of `replicates` draws `Z_0` with row sums `r` (uniform given its
/// column sums `C`), compares `1/Q(Z_0)` with `draws` proposal weights for
/// margins `(r, C)`. A uniform proposal gives ratio 1 in every replicate.
pub fn delta_max_experiment(
    r: &[usize],
    n: usize,
    replicates: usize,
    draws: u64,
    h: Heuristic,
    seed: u64,
) -> Result<DeltaMaxReport> {
    if replicates == 0 {
        return Err(Error::Degenerate("need at least one replicate".into()));
    }
    let z_seed = child_seed(seed, 0);
    let mut out = Vec::with_capacity(replicates);
    for l in 0..replicates {
        let z0 = uniform_given_rowsums(r, n, &mut stream(z_seed, l as u64))?;
        let cols = z0.col_sums();
        let mp = MarginPair::new(r.to_vec(), cols.clone())?;
        let sampler = Sampler::new(&mp, None, SamplerConfig::with_heuristic(h))?;
        let log_w0 = -sampler.eval(&z0);
        if !log_w0.is_finite() {
            return Err(Error::OutOfSupport);
        }
        let mut logs = parallel::log_weights(&sampler, child_seed(seed, l as u64 + 1), draws)?;
        logs.push(log_w0);
        let (lo, hi) = min_max(&logs);
        out.push(DeltaReplicate {
            cols,
            log_w0,
            delta: ratio_from_log(hi - lo),
            log_delta: hi - lo,
        });
    }
    let log_delta_max = out.iter().map(|d| d.log_delta).fold(0.0, f64::max);
    Ok(DeltaMaxReport {
        replicates: out,
        delta_max: ratio_from_log(log_delta_max),
        log_delta_max,
    })
}

/// Block-diagonal matrix of `r1 x r1` blocks of ones.
pub fn adversarial_block(m: usize, n: usize, r1: usize) -> Result<BinaryMatrix> {
    if m != n {
        return Err(Error::Shape(format!("block construction needs a square matrix, got {m}x{n}")));
    }
    if r1 == 0 || !n.is_multiple_of(r1) {
        return Err(Error::Domain(format!("block size {r1} does not divide {n}")));
    }
    let mut z = BinaryMatrix::zeros(m, n);
    for i in 0..m {
        let start = i / r1 * r1;
        for j in start..start + r1 {
            z.set(i, j, true);
        }
    }
    Ok(z)
}

/// Fills each column's ones into the last rows that still have room.
/// Rows and columns must be sorted non-increasing.
pub fn adversarial_greedy(r: &[usize], c: &[usize]) -> Result<BinaryMatrix> {
    let sorted = |v: &[usize]| v.windows(2).all(|w| w[0] >= w[1]);
    if !sorted(r) || !sorted(c) {
        return Err(Error::Domain("margins must be sorted non-increasing".into()));
    }
    let m = r.len();
    let mut left = r.to_vec();
    let mut z = BinaryMatrix::zeros(m, c.len());
    for (j, &cj) in c.iter().enumerate() {
        let mut placed = 0;
        for i in (0..m).rev() {
            if placed == cj {
                break;
            }
            if left[i] > 0 {
                left[i] -= 1;
                z.set(i, j, true);
                placed += 1;
            }
        }
        if placed < cj {
            return Err(Error::ConstructionFailed(format!(
                "column {} has room for only {placed} of {cj} ones",
                j + 1
            )));
        }
    }
    if let Some(i) = left.iter().position(|&x| x > 0) {
        return Err(Error::ConstructionFailed(format!(
            "row {} is left {} short",
            i + 1,
            left[i]
        )));
    }
    Ok(z)
}

/// Max/min ratio of `1/Q(z*)` together with the sample weights, in the
/// linear domain (`inf` on overflow).
pub fn delta_star(log_q_star: f64, log_weights: &[f64]) -> Result<f64> {
    log_delta_star(log_q_star, log_weights).map(ratio_from_log)
}

/// `log` of [`delta_star`].
pub fn log_delta_star(log_q_star: f64, log_weights: &[f64]) -> Result<f64> {
    if log_q_star == f64::NEG_INFINITY {
        return Err(Error::OutOfSupport);
    }
    let w_star = -log_q_star;
    let (lo, hi) = min_max(log_weights);
    Ok(hi.max(w_star) - lo.min(w_star))
}

/// `x` given as `log x`, in scientific notation with `digits` significant
/// digits, e.g. `9.68431e205`.
pub fn format_log_scientific(log_x: f64, digits: usize) -> String {
    if log_x == f64::NEG_INFINITY {
        return "0".into();
    }
    if !log_x.is_finite() {
        return format!("{}", log_x.exp());
    }
    let l10 = log_x / std::f64::consts::LN_10;
    let mut exp = l10.floor();
    let mut mant = 10f64.powf(l10 - exp);
    let scale = 10f64.powi(digits.saturating_sub(1) as i32);
    mant = (mant * scale).round() / scale;
    if mant >= 10.0 {
        mant /= 10.0;
        exp += 1.0;
    }
    format!("{:.*}e{}", digits.saturating_sub(1), mant, exp as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weights() {
        let s = summarize(&[3.0; 5]).unwrap();
        assert_eq!(s.delta_hat, 1.0);
        assert_eq!(s.cv2_hat, 0.0);
        assert!((s.log_mean - 3.0).abs() < 1e-15);
        assert_eq!(s.log_se, f64::NEG_INFINITY);
    }

    #[test]
    fn two_point_example() {
        let s = summarize(&[0.0, 3f64.ln()]).unwrap();
        assert!((s.delta_hat - 3.0).abs() < 1e-12);
        assert!((s.mean() - 2.0).abs() < 1e-12);
        assert!((s.cv2_hat - 0.5).abs() < 1e-12);
        // S_W^2 = 2, N = 2
        assert!((s.std_error() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_equivariance() {
        let u = [1.0, 2.5, 0.3, 4.0];
        let a = summarize(&u).unwrap();
        let shifted: Vec<f64> = u.iter().map(|x| x + 1000.0).collect();
        let b = summarize(&shifted).unwrap();
        assert!((a.delta_hat - b.delta_hat).abs() < 1e-9);
        assert!((a.cv2_hat - b.cv2_hat).abs() < 1e-12);
        assert!((b.log_mean - a.log_mean - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn overflow_ratio_is_infinite() {
        let s = summarize(&[0.0, 800.0]).unwrap();
        assert_eq!(s.delta_hat, f64::INFINITY);
        assert_eq!(s.log_delta_hat, 800.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(summarize(&[1.0]), Err(Error::Degenerate(_))));
        assert!(matches!(estimate_expectation(&[], &[]), Err(Error::Degenerate(_))));
        assert!(matches!(estimate_expectation(&[0.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn expectation_estimates() {
        let u = [0.5, 1.5, -2.0];
        assert!((estimate_expectation(&u, &[1.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        let f = [1.0, 2.0, 6.0];
        assert!((estimate_expectation(&[7.0; 3], &f).unwrap() - 3.0).abs() < 1e-12);
        let scaled: Vec<f64> = u.iter().map(|x| x - 50.0).collect();
        let a = estimate_expectation(&u, &f).unwrap();
        let b = estimate_expectation(&scaled, &f).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn count_of_all_zero_margins_is_one() {
        let mp = MarginPair::new(vec![0, 0], vec![0, 0, 0]).unwrap();
        let s = estimate_count(&mp, Heuristic::Cgm, None, 10, 1).unwrap();
        assert_eq!(s.log_mean, 0.0);
        assert_eq!(s.delta_hat, 1.0);
    }

    #[test]
    fn rowsum_generator() {
        let z = uniform_given_rowsums(&[3, 3], 3, &mut stream(0, 0)).unwrap();
        assert_eq!(z.as_slice(), &[1; 6]);
        let mut rng = stream(1, 0);
        for _ in 0..20 {
            let z = uniform_given_rowsums(&[2, 0, 1], 4, &mut rng).unwrap();
            assert_eq!(z.row_sums(), vec![2, 0, 1]);
        }
        assert!(uniform_given_rowsums(&[5], 4, &mut rng).is_err());
    }

    #[test]
    fn block_construction() {
        let z = adversarial_block(4, 4, 2).unwrap();
        assert_eq!(z.to_string(), "1 1 0 0\n1 1 0 0\n0 0 1 1\n0 0 1 1\n");
        assert_eq!(adversarial_block(3, 3, 3).unwrap().as_slice(), &[1; 9]);
        let z = adversarial_block(6, 6, 3).unwrap();
        assert_eq!(z.row_sums(), vec![3; 6]);
        assert_eq!(z.col_sums(), vec![3; 6]);
        assert!(adversarial_block(5, 5, 2).is_err());
        assert!(adversarial_block(4, 5, 2).is_err());
    }

    #[test]
    fn greedy_construction() {
        let z = adversarial_greedy(&[1, 1], &[1, 1]).unwrap();
        assert_eq!(z.to_string(), "0 1\n1 0\n");
        let z = adversarial_greedy(&[2, 2], &[2, 2]).unwrap();
        assert_eq!(z.as_slice(), &[1; 4]);
        // (2,1,1)/(2,2): the first column takes the two unit rows
        assert!(matches!(
            adversarial_greedy(&[2, 1, 1], &[2, 2]),
            Err(Error::ConstructionFailed(_))
        ));
    }

    #[test]
    fn delta_star_values() {
        assert_eq!(delta_star(-2.0, &[2.0, 2.0]).unwrap(), 1.0);
        let w = [0.0, 10f64.ln()];
        assert!((delta_star(-(100f64.ln()), &w).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(delta_star(f64::NEG_INFINITY, &w), Err(Error::OutOfSupport));
    }

    #[test]
    fn replicate_with_no_draws_is_one() {
        let rep = delta_max_experiment(&[1, 1, 1], 3, 1, 0, Heuristic::Cgm, 4).unwrap();
        assert_eq!(rep.delta_max, 1.0);
    }

    #[test]
    fn scientific_format() {
        assert_eq!(format_log_scientific(1234567f64.ln(), 6), "1.23457e6");
        assert_eq!(format_log_scientific(0.0, 3), "1.00e0");
        assert_eq!(format_log_scientific(99999.99f64.ln(), 3), "1.00e5");
    }
}
