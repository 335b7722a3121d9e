//! Exact reference values: brute-force enumeration, exact counts, exact
//! uniform draws and the closed-form count of a family with a uniform
//! proposal.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use rand::Rng;

use crate::dpsampler::{Sampler, SamplerConfig};
use crate::enumeration::Heuristic;
use crate::error::{Error, Result};
use crate::margins::MarginPair;
use crate::matrix::BinaryMatrix;
use crate::szero::StructuralZeroMask;

/// Largest number of cells [`enumerate_omega`] accepts.
pub const ENUMERATION_LIMIT: usize = 25;

/// Default cap on the number of memoised states in [`exact_count_dp`].
pub const DEFAULT_BUDGET: usize = 10_000_000;

/// An exact number of matrices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactCount {
    pub value: BigUint,
}

impl ExactCount {
    pub fn new(value: BigUint) -> Self {
        Self { value }
    }

    pub fn is_zero(&self) -> bool {
        self.value.bits() == 0
    }

    /// Natural log, `-inf` for zero. Accurate to `f64` precision at any
    /// magnitude.
    pub fn ln(&self) -> f64 {
        let bits = self.value.bits();
        if bits == 0 {
            return f64::NEG_INFINITY;
        }
        let shift = bits.saturating_sub(64);
        let top = (&self.value >> shift).iter_u64_digits().next().unwrap_or(0);
        (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
    }

    /// Decimal scientific notation with `digits` significant digits,
    /// truncated, e.g. `6.71491e16`.
    pub fn scientific(&self, digits: usize) -> String {
        let s = self.value.to_string();
        let digits = digits.max(1);
        let exp = s.len() - 1;
        let head: String = s.chars().take(digits).collect();
        let head = format!("{head:0<digits$}");
        if digits == 1 {
            format!("{head}e{exp}")
        } else {
            format!("{}.{}e{exp}", &head[..1], &head[1..])
        }
    }
}

impl fmt::Display for ExactCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl From<u64> for ExactCount {
    fn from(v: u64) -> Self {
        Self::new(BigUint::from(v))
    }
}

fn check_mask(mp: &MarginPair, mask: Option<&StructuralZeroMask>) -> Result<()> {
    match mask {
        Some(a) if a.m() != mp.m() || a.n() != mp.n() => Err(Error::Shape(format!(
            "mask is {}x{} but margins are {}x{}",
            a.m(),
            a.n(),
            mp.m(),
            mp.n()
        ))),
        _ => Ok(()),
    }
}

/// Every matrix with margins `mp` and zeros at the mask positions, in
/// lexicographic order of their row-major bits (ones first).
pub fn enumerate_omega(mp: &MarginPair, mask: Option<&StructuralZeroMask>) -> Result<Vec<BinaryMatrix>> {
    let (m, n) = (mp.m(), mp.n());
    if m * n > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            cells: m * n,
            limit: ENUMERATION_LIMIT,
        });
    }
    check_mask(mp, mask)?;
    let mut out = Vec::new();
    let mut z = BinaryMatrix::zeros(m, n);
    let mut col_left = mp.cols().to_vec();
    fill_cell(mp, mask, 0, mp.rows()[0], &mut col_left, &mut z, &mut out);
    Ok(out)
}

fn fill_cell(
    mp: &MarginPair,
    mask: Option<&StructuralZeroMask>,
    cell: usize,
    row_left: usize,
    col_left: &mut [usize],
    z: &mut BinaryMatrix,
    out: &mut Vec<BinaryMatrix>,
) {
    let (m, n) = (mp.m(), mp.n());
    let (i, j) = (cell / n, cell % n);
    if j == 0 && cell > 0 && row_left != 0 {
        return;
    }
    if cell == m * n {
        if col_left.iter().all(|&c| c == 0) {
            out.push(z.clone());
        }
        return;
    }
    let row_left = if j == 0 { mp.rows()[i] } else { row_left };
    if row_left > n - j || col_left[j] > m - i {
        return;
    }
    let forbidden = mask.is_some_and(|a| a.is_zero(i, j));
    if row_left > 0 && col_left[j] > 0 && !forbidden {
        z.set(i, j, true);
        col_left[j] -= 1;
        fill_cell(mp, mask, cell + 1, row_left - 1, col_left, z, out);
        col_left[j] += 1;
        z.set(i, j, false);
    }
    fill_cell(mp, mask, cell + 1, row_left, col_left, z, out);
}

/// A class of interchangeable rows: residual sum and the remaining zero
/// columns.
type RowClass = (usize, Vec<usize>);

/// Exact count by a memoised column recursion. Rows with equal residual
/// sums and equal remaining zeros are interchangeable, so states are
/// multisets of row classes; `budget` caps the number of stored states.
pub fn exact_count_dp(
    mp: &MarginPair,
    mask: Option<&StructuralZeroMask>,
    budget: usize,
) -> Result<ExactCount> {
    check_mask(mp, mask)?;
    if mp.row_total() != mp.col_total() {
        return Ok(ExactCount::from(0));
    }
    let mut classes: HashMap<RowClass, usize> = HashMap::new();
    for i in 0..mp.m() {
        let zeros = mask.map(|a| a.row_zeros(i).to_vec()).unwrap_or_default();
        *classes.entry((mp.rows()[i], zeros)).or_default() += 1;
    }
    let mut state: Vec<(RowClass, usize)> = classes.into_iter().collect();
    state.sort();
    let mut counter = Counter {
        cols: mp.cols(),
        memo: HashMap::new(),
        budget,
    };
    counter.count(0, state).map(ExactCount::new)
}

struct Counter<'a> {
    cols: &'a [usize],
    memo: HashMap<(usize, Vec<(RowClass, usize)>), BigUint>,
    budget: usize,
}

impl Counter<'_> {
    fn count(&mut self, k: usize, state: Vec<(RowClass, usize)>) -> Result<BigUint> {
        let n = self.cols.len();
        if k == n {
            let done = state.iter().all(|((r, _), _)| *r == 0);
            return Ok(BigUint::from(done as u32));
        }
        // every row must fit its residual into the columns it can still use
        let fits = state.iter().all(|((r, zeros), _)| *r + zeros.len() <= n - k);
        if !fits {
            return Ok(BigUint::ZERO);
        }
        let key = (k, state);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let state = &key.1;
        let mut total = BigUint::ZERO;
        let mut take = vec![0usize; state.len()];
        self.split(k, state, 0, self.cols[k], &mut take, &mut total)?;
        if self.memo.len() >= self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        self.memo.insert(key, total.clone());
        Ok(total)
    }

    /// Distributes `left` ones of column `k` over the classes from `g` on.
    fn split(
        &mut self,
        k: usize,
        state: &[(RowClass, usize)],
        g: usize,
        left: usize,
        take: &mut Vec<usize>,
        total: &mut BigUint,
    ) -> Result<()> {
        if g == state.len() {
            if left > 0 {
                return Ok(());
            }
            let mut ways = BigUint::from(1u32);
            let mut next: HashMap<RowClass, usize> = HashMap::new();
            for (((r, zeros), size), &t) in state.iter().zip(take.iter()) {
                ways *= binomial(*size, t);
                let rest: Vec<usize> = zeros.iter().copied().filter(|&p| p != k).collect();
                if t > 0 {
                    *next.entry((r - 1, rest.clone())).or_default() += t;
                }
                if size - t > 0 {
                    *next.entry((*r, rest)).or_default() += size - t;
                }
            }
            let mut next: Vec<(RowClass, usize)> = next.into_iter().collect();
            next.sort();
            *total += ways * self.count(k + 1, next)?;
            return Ok(());
        }
        let ((r, zeros), size) = &state[g];
        let can_take = *r > 0 && !zeros.contains(&k);
        let hi = if can_take { (*size).min(left) } else { 0 };
        for t in 0..=hi {
            take[g] = t;
            self.split(k, state, g + 1, left - t, take, total)?;
        }
        take[g] = 0;
        Ok(())
    }
}

/// `C(n, k)` exactly; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `n!` exactly.
pub fn factorial(n: usize) -> BigUint {
    (2..=n).fold(BigUint::from(1u32), |acc, i| acc * i)
}

/// Number of `m x n` matrices with row sums `(R, 1, ..., 1)` and column sums
/// `(C, 1, ..., 1)`, by conditioning on the corner entry.
///
/// With `z_11 = 1` the first row picks `R - 1` of the other columns, the
/// first column `C - 1` of the other rows, and the rest is a permutation
/// matrix; with `z_11 = 0` likewise with `R` and `C`.
pub fn pathological_count(big_r: usize, big_c: usize, m: usize, n: usize) -> Result<ExactCount> {
    if m == 0 || n == 0 || big_r > n || big_c > m {
        return Err(Error::Shape(format!(
            "({big_r}, 1, ..) x ({big_c}, 1, ..) is not a valid {m}x{n} margin pair"
        )));
    }
    if big_r + m != big_c + n {
        return Ok(ExactCount::from(0));
    }
    let mut total = BigUint::ZERO;
    if big_r >= 1 && big_c >= 1 && m - big_c == n - big_r {
        total += binomial(n - 1, big_r - 1) * binomial(m - 1, big_c - 1) * factorial(m - big_c);
    }
    if big_c < m && big_r < n && m - 1 - big_c == n - 1 - big_r {
        total += binomial(n - 1, big_r) * binomial(m - 1, big_c) * factorial(m - 1 - big_c);
    }
    Ok(ExactCount::new(total))
}

/// Margins `(R, 1, ..., 1)` and `(C, 1, ..., 1)`.
pub fn pathological_margins(big_r: usize, big_c: usize, m: usize, n: usize) -> Result<MarginPair> {
    let mut rows = vec![1; m];
    let mut cols = vec![1; n];
    if m == 0 || n == 0 {
        return Err(Error::Shape("empty margins".into()));
    }
    rows[0] = big_r;
    cols[0] = big_c;
    MarginPair::new(rows, cols)
}

/// A uniform draw from the enumerated matrices.
pub fn exact_uniform_sample<R: Rng + ?Sized>(
    mp: &MarginPair,
    mask: Option<&StructuralZeroMask>,
    rng: &mut R,
) -> Result<BinaryMatrix> {
    let mut all = enumerate_omega(mp, mask)?;
    if all.is_empty() {
        return Err(Error::InfeasibleMargins("no matrix has these margins".into()));
    }
    let k = rng.random_range(0..all.len());
    Ok(all.swap_remove(k))
}

/// Total-variation distance between the proposal and the uniform
/// distribution over all matrices with margins `mp` (and mask).
pub fn tv_distance(mp: &MarginPair, h: Heuristic, mask: Option<&StructuralZeroMask>) -> Result<TvReport> {
    let omega = enumerate_omega(mp, mask)?;
    if omega.is_empty() {
        return Err(Error::InfeasibleMargins("no matrix has these margins".into()));
    }
    let sampler = Sampler::new(mp, mask, SamplerConfig::with_heuristic(h))?;
    let u = 1.0 / omega.len() as f64;
    let q: Vec<f64> = omega.iter().map(|z| sampler.eval(z).exp()).collect();
    Ok(TvReport {
        size: omega.len(),
        tv: 0.5 * q.iter().map(|q| (q - u).abs()).sum::<f64>(),
        mass: q.iter().sum(),
        q_min: q.iter().copied().fold(f64::INFINITY, f64::min),
        q_max: q.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvReport {
    /// Number of matrices.
    pub size: usize,
    pub tv: f64,
    /// Total proposal mass on the enumerated matrices.
    pub mass: f64,
    pub q_min: f64,
    pub q_max: f64,
}
