//! Asymptotic approximations to the number of binary matrices with given
//! margins, and the per-row Bernoulli probabilities they induce for the
//! first column.
//!
//! Everything is computed in the log domain: the counts involved overflow
//! `f64` long before the matrices become interesting. Probabilities are
//! stored as log-odds so that `p = 0` and `p = 1` are exact (`-inf`, `+inf`).
//!
//! Every formula site with a `0/0` ratio treats it as `0`.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::margins::MarginPair;
use crate::szero::StructuralZeroMask;

/// Choice of approximation used to build the Bernoulli profile.
///
/// * `Cgm`: Canfield–Greenhill–McKay, good for near-regular margins.
/// * `Binomial`: product of binomials, `p = r / n`.
/// * `Gmw`: Greenhill–McKay–Wang, good for sparse margins.
/// * `Oneil`: O'Neil's sparse approximation.
/// * `*Sz`: the same families corrected for structural zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    Cgm,
    Binomial,
    Gmw,
    Oneil,
    CgmSz,
    BinomialSz,
    OneilSz,
}

impl Heuristic {
    /// The four families without structural-zero corrections.
    pub const BASE: [Heuristic; 4] = [
        Heuristic::Cgm,
        Heuristic::Binomial,
        Heuristic::Gmw,
        Heuristic::Oneil,
    ];

    pub fn is_sz(self) -> bool {
        matches!(self, Heuristic::CgmSz | Heuristic::BinomialSz | Heuristic::OneilSz)
    }

    /// The structural-zero corrected variant, where one exists. `Gmw` has
    /// none and maps to itself.
    pub fn with_zeros(self) -> Heuristic {
        match self {
            Heuristic::Cgm => Heuristic::CgmSz,
            Heuristic::Binomial => Heuristic::BinomialSz,
            Heuristic::Oneil => Heuristic::OneilSz,
            other => other,
        }
    }

    /// True when the approximation factors over rows, so that the Bernoulli
    /// probabilities are exact conditionals of the approximation rather than
    /// a first-order expansion.
    pub fn factors_over_rows(self) -> bool {
        !matches!(self, Heuristic::Gmw)
    }

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Cgm => "cgm",
            Heuristic::Binomial => "binomial",
            Heuristic::Gmw => "gmw",
            Heuristic::Oneil => "oneil",
            Heuristic::CgmSz => "cgm-sz",
            Heuristic::BinomialSz => "binomial-sz",
            Heuristic::OneilSz => "oneil-sz",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "cgm" => Heuristic::Cgm,
            "binomial" => Heuristic::Binomial,
            "gmw" => Heuristic::Gmw,
            "oneil" => Heuristic::Oneil,
            "cgm-sz" => Heuristic::CgmSz,
            "binomial-sz" => Heuristic::BinomialSz,
            "oneil-sz" => Heuristic::OneilSz,
            other => return Err(Error::Domain(format!("unknown heuristic {other:?}"))),
        })
    }
}

/// Per-row Bernoulli probabilities, stored as log-odds.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliProfile {
    logodds: Vec<f64>,
}

impl BernoulliProfile {
    pub fn from_logodds(logodds: Vec<f64>) -> Self {
        Self { logodds }
    }

    pub fn from_probabilities(p: &[f64]) -> Self {
        Self {
            logodds: p.iter().map(|&p| (p / (1.0 - p)).ln()).collect(),
        }
    }

    pub fn into_logodds(self) -> Vec<f64> {
        self.logodds
    }

    pub fn logodds(&self) -> &[f64] {
        &self.logodds
    }

    pub fn len(&self) -> usize {
        self.logodds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logodds.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        let x = self.logodds[i];
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.probability(i)).collect()
    }

    /// `log p_i`.
    pub fn log_p(&self, i: usize) -> f64 {
        -softplus(-self.logodds[i])
    }

    /// `log (1 - p_i)`.
    pub fn log_1mp(&self, i: usize) -> f64 {
        -softplus(self.logodds[i])
    }

    /// Replaces exact 0 and 1 probabilities by `eps` and `1 - eps`, so that
    /// no allowed transition gets zero weight.
    pub fn clamp_extremes(&mut self, eps: f64) {
        let bound = ((1.0 - eps) / eps).ln();
        for x in &mut self.logodds {
            if *x == f64::INFINITY {
                *x = bound;
            } else if *x == f64::NEG_INFINITY {
                *x = -bound;
            }
        }
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x == f64::INFINITY {
        f64::INFINITY
    } else if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Falling-factorial power sums `[t]_l = sum_i t_i (t_i - 1) ... (t_i - l + 1)`
/// for `l = 1, 2, 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCache {
    falling: [f64; 3],
}

impl MomentCache {
    pub fn new(t: &[usize]) -> Self {
        let mut falling = [0.0; 3];
        for &v in t {
            let v = v as f64;
            falling[0] += v;
            falling[1] += v * (v - 1.0);
            falling[2] += v * (v - 1.0) * (v - 2.0);
        }
        Self { falling }
    }

    /// `[t]_order` for `order` in `1..=3`.
    pub fn get(&self, order: usize) -> f64 {
        self.falling[order - 1]
    }
}

/// `log(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `log C(n, k)`, `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else if k == 0 || k == n {
        0.0
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// `a / b` with `0/0 := 0`.
#[inline]
fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn check_domain(mp: &MarginPair) -> Result<()> {
    let (m, n) = (mp.m(), mp.n());
    if let Some(r) = mp.rows().iter().find(|&&r| r > n) {
        return Err(Error::Domain(format!("row sum {r} exceeds {n} columns")));
    }
    if let Some(c) = mp.cols().iter().find(|&&c| c > m) {
        return Err(Error::Domain(format!("column sum {c} exceeds {m} rows")));
    }
    Ok(())
}

fn check_mask(mp: &MarginPair, mask: &StructuralZeroMask) -> Result<()> {
    if mask.m() != mp.m() || mask.n() != mp.n() {
        return Err(Error::Shape(format!(
            "mask is {}x{} but margins are {}x{}",
            mask.m(),
            mask.n(),
            mp.m(),
            mp.n()
        )));
    }
    Ok(())
}

/// Row and column deviation statistics shared by the CGM family: the common
/// scale `mn / ([c]_1 (mn - [c]_1))` and the `mu`, `nu` terms.
struct CgmTerms {
    scale: f64,
    mu: f64,
    nu: f64,
}

impl CgmTerms {
    fn new(mp: &MarginPair) -> Self {
        let (m, n) = (mp.m() as f64, mp.n() as f64);
        let total = mp.col_total() as f64;
        let scale = ratio(m * n, total * (m * n - total));
        let row_dev: f64 = mp.rows().iter().map(|&r| (r as f64 - total / m).powi(2)).sum();
        let col_dev: f64 = mp.cols().iter().map(|&c| (c as f64 - total / n).powi(2)).sum();
        Self {
            scale,
            mu: scale * row_dev,
            nu: scale * col_dev,
        }
    }

    /// `-(1 - mu)(1 - nu) / 2`, dropped entirely when the total is `0` or
    /// `mn` (the matrix is then forced and the approximation exact).
    fn correction(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            -0.5 * (1.0 - self.mu) * (1.0 - self.nu)
        }
    }
}

/// Log of the Canfield–Greenhill–McKay approximation.
pub fn log_ntilde_cgm(mp: &MarginPair) -> Result<f64> {
    Ok(log_ntilde_binomial(mp)? + CgmTerms::new(mp).correction())
}

/// Log of the plain binomial approximation (CGM without its exponential
/// correction).
pub fn log_ntilde_binomial(mp: &MarginPair) -> Result<f64> {
    check_domain(mp)?;
    let (m, n) = (mp.m(), mp.n());
    let total = mp.col_total();
    Ok(-ln_binomial(m * n, total)
        + mp.rows().iter().map(|&r| ln_binomial(n, r)).sum::<f64>()
        + mp.cols().iter().map(|&c| ln_binomial(m, c)).sum::<f64>())
}

/// The three Greenhill–McKay–Wang coefficients for column sums with the
/// given moments.
fn gmw_alphas(c: &MomentCache) -> [f64; 3] {
    let (c1, c2, c3) = (c.get(1), c.get(2), c.get(3));
    if c1 == 0.0 {
        return [0.0; 3];
    }
    let a1 = c2 / (2.0 * c1.powi(2)) + c2 / (2.0 * c1.powi(3)) + c2 * c2 / (4.0 * c1.powi(4));
    let a2 = -c3 / (3.0 * c1.powi(3)) + c2 * c2 / (2.0 * c1.powi(4));
    let a3 = c2 / (4.0 * c1.powi(4)) + c3 / (2.0 * c1.powi(4)) - c2 * c2 / (2.0 * c1.powi(5));
    [a1, a2, a3]
}

fn log_multinomial_part(mp: &MarginPair) -> f64 {
    ln_factorial(mp.col_total())
        - mp.rows().iter().map(|&r| ln_factorial(r)).sum::<f64>()
        - mp.cols().iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

/// Log of the Greenhill–McKay–Wang sparse approximation.
pub fn log_ntilde_gmw(mp: &MarginPair) -> Result<f64> {
    check_domain(mp)?;
    let r = MomentCache::new(mp.rows());
    let [a1, a2, a3] = gmw_alphas(&MomentCache::new(mp.cols()));
    Ok(log_multinomial_part(mp) - a1 * r.get(2) - a2 * r.get(3) - a3 * r.get(2).powi(2))
}

/// Log of O'Neil's sparse approximation.
pub fn log_ntilde_oneil(mp: &MarginPair) -> Result<f64> {
    check_domain(mp)?;
    let r = MomentCache::new(mp.rows());
    let c = MomentCache::new(mp.cols());
    Ok(log_multinomial_part(mp) - ratio(r.get(2) * c.get(2), 2.0 * c.get(1).powi(2)))
}

/// Log of the binomial approximation corrected for structural zeros.
pub fn log_ntilde_binomial_sz(mp: &MarginPair, mask: &StructuralZeroMask) -> Result<f64> {
    check_domain(mp)?;
    check_mask(mp, mask)?;
    let (m, n) = (mp.m(), mp.n());
    let xi = mask.xi();
    let zeta = mask.zeta();
    let cells = m * n - mask.count();
    Ok(-ln_binomial(cells, mp.col_total())
        + mp.rows().iter().zip(&xi).map(|(&r, &x)| ln_binomial(n - x, r)).sum::<f64>()
        + mp.cols().iter().zip(&zeta).map(|(&c, &z)| ln_binomial(m - z, c)).sum::<f64>())
}

/// Log of the Canfield–Greenhill–McKay approximation corrected for
/// structural zeros.
pub fn log_ntilde_cgm_sz(mp: &MarginPair, mask: &StructuralZeroMask) -> Result<f64> {
    let base = log_ntilde_binomial_sz(mp, mask)?;
    let terms = CgmTerms::new(mp);
    if terms.scale == 0.0 {
        return Ok(base);
    }
    let (m, n) = (mp.m() as f64, mp.n() as f64);
    let total = mp.col_total() as f64;
    let eta: f64 = terms.scale
        * mask
            .positions()
            .map(|(i, j)| {
                (mp.rows()[i] as f64 - total / m) * (mp.cols()[j] as f64 - total / n)
            })
            .sum::<f64>();
    Ok(base + terms.correction() - eta)
}

/// Log of O'Neil's approximation with Bender's structural-zero correction.
pub fn log_ntilde_oneil_sz(mp: &MarginPair, mask: &StructuralZeroMask) -> Result<f64> {
    let base = log_ntilde_oneil(mp)?;
    check_mask(mp, mask)?;
    let cross: f64 = mask
        .positions()
        .map(|(i, j)| mp.rows()[i] as f64 * mp.cols()[j] as f64)
        .sum();
    Ok(base - ratio(cross, mp.col_total() as f64))
}

/// Moments of the columns that remain after the current one.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TailMoments {
    /// Number of remaining columns.
    pub len: usize,
    /// `sum c'`.
    pub s1: f64,
    /// `sum c'^2`.
    pub sq: f64,
    /// `[c']_2`.
    pub f2: f64,
    /// `[c']_3`.
    pub f3: f64,
}

impl TailMoments {
    pub fn from_cols(tail: &[usize]) -> Self {
        let mut t = Self {
            len: tail.len(),
            ..Self::default()
        };
        for &c in tail {
            t.add(c);
        }
        t
    }

    #[inline]
    pub fn add(&mut self, c: usize) {
        let c = c as f64;
        self.s1 += c;
        self.sq += c * c;
        self.f2 += c * (c - 1.0);
        self.f3 += c * (c - 1.0) * (c - 2.0);
    }

    fn moments(&self) -> MomentCache {
        MomentCache {
            falling: [self.s1, self.f2, self.f3],
        }
    }
}

/// Structural zeros of one row that lie in the remaining columns.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct RowZeroTerm {
    /// Number of zeros among the remaining columns.
    pub count: usize,
    /// Sum of the column sums at those zeros.
    pub col_sum: f64,
}

/// Fills `out` with the log-odds of the profile for the first column.
///
/// `rows` are the current row sums, `n` the current number of columns,
/// `tail` the moments of columns `2..=n`, `zeros` the per-row zero terms
/// over those columns (required by the `*Sz` heuristics).
pub(crate) fn logodds_into(
    out: &mut Vec<f64>,
    rows: &[usize],
    n: usize,
    tail: &TailMoments,
    h: Heuristic,
    zeros: Option<&[RowZeroTerm]>,
) {
    out.clear();
    let m = rows.len() as f64;
    let n_tail = tail.len as f64;
    let s1 = tail.s1;

    // CGM scale for (c', m, n - 1): m n' / ([c']_1 (m n' - [c']_1)).
    let scale = ratio(m * n_tail, s1 * (m * n_tail - s1));
    let nu = scale * (tail.sq - ratio(s1 * s1, n_tail));
    let beta = 0.5 * scale * (1.0 - nu);
    let x_bar = s1 / m;

    let alphas = gmw_alphas(&tail.moments());
    let r2: f64 = if h == Heuristic::Gmw {
        rows.iter().map(|&r| (r as f64) * (r as f64 - 1.0)).sum()
    } else {
        0.0
    };
    let oneil = ratio(tail.f2, s1 * s1);

    let zero_term = |i: usize| zeros.map(|z| z[i]).unwrap_or_default();

    for (i, &r) in rows.iter().enumerate() {
        if r == 0 {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let rf = r as f64;
        // log C(N, r-1) / C(N, r) = log r - log(N - r + 1), N = n - 1 - xi'
        let binom_odds = |excluded: usize| {
            let free = n as i64 - excluded as i64 - r as i64;
            if free <= 0 {
                f64::INFINITY
            } else {
                rf.ln() - (free as f64).ln()
            }
        };
        let lo = match h {
            Heuristic::Binomial => binom_odds(0),
            Heuristic::BinomialSz => binom_odds(zero_term(i).count),
            Heuristic::Cgm => binom_odds(0) + beta * (1.0 - 2.0 * (rf - x_bar)),
            Heuristic::CgmSz => {
                let z = zero_term(i);
                let dev = z.col_sum - z.count as f64 * ratio(s1, n_tail);
                binom_odds(z.count) + beta * (1.0 - 2.0 * (rf - x_bar)) + scale * dev
            }
            Heuristic::Gmw => {
                let [a1, a2, a3] = alphas;
                let gamma = 2.0 * a1 + 3.0 * a2 * (rf - 2.0) + 4.0 * a3 * (r2 - rf + 1.0);
                rf.ln() + gamma * (rf - 1.0)
            }
            Heuristic::Oneil => rf.ln() + (rf - 1.0) * oneil,
            Heuristic::OneilSz => {
                rf.ln() + (rf - 1.0) * oneil + ratio(zero_term(i).col_sum, s1)
            }
        };
        out.push(lo);
    }
}

/// Per-row zero terms over columns `2..=n` of `mask`.
pub(crate) fn row_zero_terms(mask: &StructuralZeroMask, cols: &[usize]) -> Vec<RowZeroTerm> {
    (0..mask.m())
        .map(|i| {
            let mut t = RowZeroTerm::default();
            for &j in mask.row_zeros(i).iter().filter(|&&j| j > 0) {
                t.count += 1;
                t.col_sum += cols[j] as f64;
            }
            t
        })
        .collect()
}

/// Bernoulli profile for the first column of `mp` under heuristic `h`.
///
/// The `*Sz` heuristics require a mask; the others ignore it.
pub fn bernoulli_profile(
    mp: &MarginPair,
    h: Heuristic,
    mask: Option<&StructuralZeroMask>,
) -> Result<BernoulliProfile> {
    let zeros = match (h.is_sz(), mask) {
        (true, None) => {
            return Err(Error::Domain(format!(
                "heuristic {h} needs a structural-zero mask"
            )))
        }
        (true, Some(mask)) => {
            check_mask(mp, mask)?;
            Some(row_zero_terms(mask, mp.cols()))
        }
        (false, _) => None,
    };
    let tail = TailMoments::from_cols(&mp.cols()[1..]);
    let mut out = Vec::with_capacity(mp.m());
    logodds_into(&mut out, mp.rows(), mp.n(), &tail, h, zeros.as_deref());
    Ok(BernoulliProfile { logodds: out })
}

/// Bernoulli profile from a first-order expansion of an arbitrary
/// approximation `log_n`:
///
/// `p_i = N(r - e_i, c') / (N(r, c') + N(r - e_i, c'))`.
///
/// Rows with `r_i = 0` get `p_i = 0`. Rows whose sum cannot fit in the
/// `n - 1` remaining columns get `p_i = 1` and enter the expansion point
/// with that one already removed.
pub fn taylor_profile(
    mp: &MarginPair,
    log_n: impl Fn(&MarginPair) -> Result<f64>,
) -> Result<BernoulliProfile> {
    let n = mp.n();
    if n < 2 {
        return Err(Error::Domain(
            "expansion needs at least two columns".into(),
        ));
    }
    let tail_cols = mp.cols()[1..].to_vec();
    let base_rows: Vec<usize> = mp
        .rows()
        .iter()
        .map(|&r| if r >= n { r - 1 } else { r })
        .collect();
    let base = log_n(&MarginPair::new(base_rows.clone(), tail_cols.clone())?)?;
    let mut logodds = Vec::with_capacity(mp.m());
    for (i, &r) in mp.rows().iter().enumerate() {
        if r == 0 {
            logodds.push(f64::NEG_INFINITY);
            continue;
        }
        if r >= n {
            logodds.push(f64::INFINITY);
            continue;
        }
        let mut rows = base_rows.clone();
        rows[i] -= 1;
        let minus = log_n(&MarginPair::new(rows, tail_cols.clone())?)?;
        let lo = minus - base;
        if lo.is_nan() {
            return Err(Error::Domain(format!(
                "approximation vanishes at both expansion points for row {}",
                i + 1
            )));
        }
        logodds.push(lo);
    }
    Ok(BernoulliProfile { logodds })
}
