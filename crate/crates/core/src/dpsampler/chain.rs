//! The first column as a Markov chain on its partial sums.
//!
//! A column `b` with partial sums `s_i = b_1 + .. + b_i` has proposal weight
//! `prod_i h_i(s_{i-1}, s_i)`, where `h_i` is `p_i` for a step, `1 - p_i` for
//! a stay, and zero when the move leaves the support. Only the two moves
//! `s -> s` and `s -> s + 1` exist, so each `h_i` is stored as two
//! `(c_1 + 1)`-vectors indexed by `s_{i-1}`.
//!
//! The backward recursion turns the product into transition probabilities
//! that can be sampled forward in one pass. Each stage is shifted by its
//! maximum so the recursion stays within range; the shift cancels in the
//! transitions.

use rand::Rng;

use crate::enumeration::BernoulliProfile;
use crate::error::{Error, Result};
use crate::margins::ColumnSupport;

/// `log(e^a + e^b)`.
#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    let lo = a.min(b);
    hi + (lo - hi).exp().ln_1p()
}

/// Log-weights of the stay and step moves, `m` stages by `c_1 + 1` states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnChainFactors {
    m: usize,
    width: usize,
    stay: Vec<f64>,
    step: Vec<f64>,
}

impl ColumnChainFactors {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of partial-sum states, `c_1 + 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// `log h_i(s, s)`; `i` is 0-based.
    pub fn stay(&self, i: usize, s: usize) -> f64 {
        self.stay[i * self.width + s]
    }

    /// `log h_i(s, s + 1)`.
    pub fn step(&self, i: usize, s: usize) -> f64 {
        self.step[i * self.width + s]
    }

    /// Adds `log_scale` to every finite entry of stage `i`.
    pub fn scale_stage(&mut self, i: usize, log_scale: f64) {
        let range = i * self.width..(i + 1) * self.width;
        for v in self.stay[range.clone()].iter_mut().chain(&mut self.step[range]) {
            if v.is_finite() {
                *v += log_scale;
            }
        }
    }

    pub(crate) fn fill(&mut self, profile: &BernoulliProfile, support: &ColumnSupport) {
        let m = support.len();
        let width = support.total() + 1;
        self.m = m;
        self.width = width;
        self.stay.clear();
        self.stay.resize(m * width, f64::NEG_INFINITY);
        self.step.clear();
        self.step.resize(m * width, f64::NEG_INFINITY);
        // previous partial sum range, starting from s_0 = 0
        let (mut prev_lo, mut prev_hi) = (0usize, 0usize);
        for i in 0..m {
            let allowed = support.allowed[i];
            let (lo, hi) = (support.lower[i], support.upper[i].min(width - 1));
            let row = i * width;
            if allowed.allows_zero() {
                // s in B_{i-1} and s in B_i
                let (a, b) = (lo.max(prev_lo), hi.min(prev_hi));
                if a <= b {
                    self.stay[row + a..=row + b].fill(profile.log_1mp(i));
                }
            }
            if allowed.allows_one() {
                // s in B_{i-1} and s + 1 in B_i
                let (a, b) = (lo.saturating_sub(1).max(prev_lo), (hi.saturating_sub(1)).min(prev_hi));
                if hi >= 1 && a <= b {
                    self.step[row + a..=row + b].fill(profile.log_p(i));
                }
            }
            (prev_lo, prev_hi) = (lo, hi);
        }
    }
}

/// Builds the per-stage factors for `profile` restricted to `support`.
pub fn build_factors(profile: &BernoulliProfile, support: &ColumnSupport) -> Result<ColumnChainFactors> {
    if profile.len() != support.len() {
        return Err(Error::Shape(format!(
            "profile has {} rows but support has {}",
            profile.len(),
            support.len()
        )));
    }
    let mut f = ColumnChainFactors::default();
    f.fill(profile, support);
    Ok(f)
}

/// Backward messages and the resulting log transition probabilities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnChain {
    m: usize,
    width: usize,
    beta_stay: Vec<f64>,
    beta_step: Vec<f64>,
    trans_stay: Vec<f64>,
    trans_step: Vec<f64>,
    /// Per-stage rescaling term that was subtracted, kept for diagnostics.
    shifts: Vec<f64>,
}

impl ColumnChain {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Rescaled `log beta_i(s, s)` and `log beta_i(s, s + 1)`.
    pub fn beta(&self, i: usize, s: usize) -> (f64, f64) {
        let k = i * self.width + s;
        (self.beta_stay[k], self.beta_step[k])
    }

    /// `(log pi_i(s | s), log pi_i(s + 1 | s))`; both `-inf` for unreachable
    /// states.
    pub fn transition(&self, i: usize, s: usize) -> (f64, f64) {
        let k = i * self.width + s;
        (self.trans_stay[k], self.trans_step[k])
    }

    pub fn stage_shift(&self, i: usize) -> f64 {
        self.shifts[i]
    }

    pub(crate) fn fill(&mut self, f: &ColumnChainFactors) -> Result<()> {
        let (m, w) = (f.m, f.width);
        self.m = m;
        self.width = w;
        for v in [
            &mut self.beta_stay,
            &mut self.beta_step,
            &mut self.trans_stay,
            &mut self.trans_step,
        ] {
            v.clear();
            v.resize(m * w, f64::NEG_INFINITY);
        }
        self.shifts.clear();
        self.shifts.resize(m, 0.0);
        if m == 0 {
            return Ok(());
        }

        for i in (0..m).rev() {
            let row = i * w;
            let next = (i + 1) * w;
            let mut hi = f64::NEG_INFINITY;
            for s in 0..w {
                let (tail_stay, tail_step) = if i + 1 == m {
                    (0.0, 0.0)
                } else {
                    let total = |t: usize| {
                        if t < w {
                            log_add(self.beta_stay[next + t], self.beta_step[next + t])
                        } else {
                            f64::NEG_INFINITY
                        }
                    };
                    (total(s), total(s + 1))
                };
                let bs = f.stay[row + s] + tail_stay;
                let bp = f.step[row + s] + tail_step;
                self.beta_stay[row + s] = bs;
                self.beta_step[row + s] = bp;
                hi = hi.max(bs).max(bp);
            }
            if hi.is_finite() {
                self.shifts[i] = hi;
                for s in 0..w {
                    self.beta_stay[row + s] -= hi;
                    self.beta_step[row + s] -= hi;
                }
            }
            for s in 0..w {
                let (bs, bp) = (self.beta_stay[row + s], self.beta_step[row + s]);
                let total = log_add(bs, bp);
                if total > f64::NEG_INFINITY {
                    self.trans_stay[row + s] = bs - total;
                    self.trans_step[row + s] = bp - total;
                }
            }
        }
        let (s0, p0) = (self.trans_stay[0], self.trans_step[0]);
        if s0 == f64::NEG_INFINITY && p0 == f64::NEG_INFINITY {
            return Err(Error::NoValidPath);
        }
        Ok(())
    }

    /// Draws a column forward from `s_0 = 0`, writing it into `out`.
    /// Returns its log-probability. One uniform is consumed per row.
    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<u8>) -> f64 {
        out.clear();
        let mut s = 0usize;
        let mut logp = 0.0;
        for i in 0..self.m {
            let (ls, lp) = self.transition(i, s);
            let u: f64 = rng.random();
            let step = if lp == f64::NEG_INFINITY {
                false
            } else if ls == f64::NEG_INFINITY {
                true
            } else {
                u >= ls.exp()
            };
            if step {
                logp += lp;
                s += 1;
                out.push(1);
            } else {
                logp += ls;
                out.push(0);
            }
        }
        logp
    }

    /// Log-probability of a given column; `-inf` outside the support.
    pub fn eval(&self, b: &[u8]) -> f64 {
        if b.len() != self.m {
            return f64::NEG_INFINITY;
        }
        let mut s = 0usize;
        let mut logp = 0.0;
        for (i, &bit) in b.iter().enumerate() {
            if bit > 1 || s >= self.width {
                return f64::NEG_INFINITY;
            }
            let (ls, lp) = self.transition(i, s);
            let w = if bit == 1 { lp } else { ls };
            if w == f64::NEG_INFINITY {
                return w;
            }
            logp += w;
            s += bit as usize;
        }
        logp
    }
}

/// Runs the backward recursion over `factors`.
pub fn backward_pass(factors: &ColumnChainFactors) -> Result<ColumnChain> {
    let mut chain = ColumnChain::default();
    chain.fill(factors)?;
    Ok(chain)
}

/// Draws one column and its log-probability.
pub fn sample_column<R: Rng + ?Sized>(chain: &ColumnChain, rng: &mut R) -> (Vec<u8>, f64) {
    let mut out = Vec::with_capacity(chain.m());
    let lp = chain.sample_into(rng, &mut out);
    (out, lp)
}

/// Log-probability of column `b` under the chain.
pub fn eval_column(chain: &ColumnChain, b: &[u8]) -> f64 {
    chain.eval(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::{first_column_support, Allowed, MarginPair};
    use crate::rng::stream;

    fn all_columns(m: usize) -> impl Iterator<Item = Vec<u8>> {
        (0..1u32 << m).map(move |k| (0..m).map(|i| (k >> (m - 1 - i) & 1) as u8).collect())
    }

    fn half_profile(m: usize) -> BernoulliProfile {
        BernoulliProfile::from_logodds(vec![0.0; m])
    }

    fn example_support() -> ColumnSupport {
        first_column_support(&MarginPair::new(vec![2, 1, 1], vec![2, 1, 1]).unwrap()).unwrap()
    }

    #[test]
    fn pinned_single_row() {
        let support = ColumnSupport {
            allowed: vec![Allowed::Both],
            lower: vec![1],
            upper: vec![1],
        };
        let f = build_factors(&half_profile(1), &support).unwrap();
        assert_eq!(f.stay(0, 0), f64::NEG_INFINITY);
        assert_eq!(f.stay(0, 1), f64::NEG_INFINITY);
        assert!((f.step(0, 0) - 0.5f64.ln()).abs() < 1e-15);
        let chain = backward_pass(&f).unwrap();
        assert_eq!(chain.transition(0, 0), (f64::NEG_INFINITY, 0.0));
        let (b, lp) = sample_column(&chain, &mut stream(1, 0));
        assert_eq!(b, vec![1]);
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn forbidden_one_blocks_steps() {
        let support = ColumnSupport {
            allowed: vec![Allowed::Zero, Allowed::Both],
            lower: vec![0, 1],
            upper: vec![1, 1],
        };
        let f = build_factors(&half_profile(2), &support).unwrap();
        assert!((0..2).all(|s| f.step(0, s) == f64::NEG_INFINITY));
    }

    #[test]
    fn three_valid_columns_are_uniform() {
        let f = build_factors(&half_profile(3), &example_support()).unwrap();
        let chain = backward_pass(&f).unwrap();
        let mut total = 0.0;
        for b in all_columns(3) {
            let lp = eval_column(&chain, &b);
            let valid = [[1, 1, 0], [1, 0, 1], [0, 1, 1]].iter().any(|v| v[..] == b[..]);
            if valid {
                assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-12, "{b:?}");
            } else {
                assert_eq!(lp, f64::NEG_INFINITY, "{b:?}");
            }
            total += lp.exp();
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sampled_column_evaluates_to_same_probability() {
        let f = build_factors(
            &BernoulliProfile::from_probabilities(&[0.7, 0.2, 0.4]),
            &example_support(),
        )
        .unwrap();
        let chain = backward_pass(&f).unwrap();
        let mut rng = stream(3, 0);
        for _ in 0..100 {
            let (b, lp) = sample_column(&chain, &mut rng);
            assert_eq!(eval_column(&chain, &b), lp);
        }
        assert_eq!(eval_column(&chain, &[1, 1, 1]), f64::NEG_INFINITY);
        assert_eq!(eval_column(&chain, &[1, 1]), f64::NEG_INFINITY);
    }

    #[test]
    fn no_path_is_an_error() {
        let support = ColumnSupport {
            allowed: vec![Allowed::Zero, Allowed::Zero],
            lower: vec![0, 1],
            upper: vec![1, 1],
        };
        let f = build_factors(&half_profile(2), &support).unwrap();
        assert_eq!(backward_pass(&f), Err(Error::NoValidPath));
    }

    #[test]
    fn transitions_normalise() {
        let f = build_factors(
            &BernoulliProfile::from_probabilities(&[0.9, 0.3, 0.6]),
            &example_support(),
        )
        .unwrap();
        let chain = backward_pass(&f).unwrap();
        for i in 0..3 {
            for s in 0..chain.width() {
                let (a, b) = chain.transition(i, s);
                let total = a.exp() + b.exp();
                assert!(total == 0.0 || (total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            build_factors(&half_profile(2), &example_support()),
            Err(Error::Shape(_))
        ));
    }
}
