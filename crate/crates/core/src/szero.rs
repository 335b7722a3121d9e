//! Structural zeros: cells forced to be zero, and the first-column support
//! when each row and each column holds at most one of them.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::margins::{Allowed, ColumnSupport, MarginPair, RowOrdering};

/// Positions of forced zeros in an `m x n` matrix.
///
/// Any set of positions can be stored. The exact-support machinery requires
/// the restricted form (at most one zero per row and per column); see
/// [`is_restricted`](Self::is_restricted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralZeroMask {
    m: usize,
    n: usize,
    /// Sorted zero columns, per row.
    zeros: Vec<Vec<usize>>,
}

impl StructuralZeroMask {
    /// Builds a mask from 0-based `(row, column)` positions. Duplicates are
    /// merged.
    pub fn new(m: usize, n: usize, positions: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); m];
        for (i, j) in positions {
            if i >= m || j >= n {
                return Err(Error::Domain(format!(
                    "structural zero ({}, {}) outside a {m}x{n} matrix",
                    i + 1,
                    j + 1
                )));
            }
            sets[i].insert(j);
        }
        Ok(Self {
            m,
            n,
            zeros: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn empty(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            zeros: vec![Vec::new(); m],
        }
    }

    /// Zeros at `(i, i)` for `i < min(m, n)`.
    pub fn zero_diagonal(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            zeros: (0..m).map(|i| if i < n { vec![i] } else { vec![] }).collect(),
        }
    }

    /// Parses lines of 1-based `i j` coordinates. `#` comments and blank
    /// lines are skipped.
    pub fn parse_text(text: &str, m: usize, n: usize) -> Result<Self> {
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(format!(
                    "expected \"i j\", found {} values",
                    toks.len()
                )));
            }
            let mut coord = [0usize; 2];
            for (slot, tok) in coord.iter_mut().zip(&toks) {
                *slot = tok
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| parse_err(format!("expected a 1-based index, found {tok:?}")))?;
            }
            let (i, j) = (coord[0] - 1, coord[1] - 1);
            if i >= m || j >= n {
                return Err(parse_err(format!(
                    "position ({}, {}) outside a {m}x{n} matrix",
                    coord[0], coord[1]
                )));
            }
            positions.push((i, j));
        }
        Self::new(m, n, positions)
    }

    pub fn to_text(&self) -> String {
        self.positions()
            .map(|(i, j)| format!("{} {}\n", i + 1, j + 1))
            .collect()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        self.zeros[i].binary_search(&j).is_ok()
    }

    pub fn row_zeros(&self, i: usize) -> &[usize] {
        &self.zeros[i]
    }

    /// All positions, row-major.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.zeros
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
    }

    pub fn count(&self) -> usize {
        self.zeros.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Per-row zero counts.
    pub fn xi(&self) -> Vec<usize> {
        self.zeros.iter().map(Vec::len).collect()
    }

    /// Per-column zero counts.
    pub fn zeta(&self) -> Vec<usize> {
        let mut z = vec![0; self.n];
        for (_, j) in self.positions() {
            z[j] += 1;
        }
        z
    }

    /// The zero column of each row, `None` if the row has none. Only
    /// meaningful for restricted masks (the first zero is reported otherwise).
    pub fn y(&self) -> Vec<Option<usize>> {
        self.zeros.iter().map(|js| js.first().copied()).collect()
    }

    pub fn is_restricted(&self) -> bool {
        self.zeros.iter().all(|js| js.len() <= 1) && self.zeta().iter().all(|&z| z <= 1)
    }

    pub fn check_restricted(&self) -> Result<()> {
        if let Some(i) = self.zeros.iter().position(|js| js.len() > 1) {
            return Err(Error::MaskViolation(format!(
                "row {} has {} structural zeros",
                i + 1,
                self.zeros[i].len()
            )));
        }
        if let Some(j) = self.zeta().iter().position(|&z| z > 1) {
            return Err(Error::MaskViolation(format!(
                "column {} has more than one structural zero",
                j + 1
            )));
        }
        Ok(())
    }

    pub fn permute_rows(&self, ordering: &RowOrdering) -> Self {
        Self {
            m: self.m,
            n: self.n,
            zeros: ordering.apply(&self.zeros),
        }
    }

    /// Reorders columns so that new column `k` is old column `order[k]`.
    pub fn permute_cols(&self, order: &[usize]) -> Self {
        let mut new_index = vec![0; self.n];
        for (k, &old) in order.iter().enumerate() {
            new_index[old] = k;
        }
        let zeros = self
            .zeros
            .iter()
            .map(|js| {
                let mut v: Vec<usize> = js.iter().map(|&j| new_index[j]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Self {
            m: self.m,
            n: self.n,
            zeros,
        }
    }

    /// The mask of the submatrix left after removing the first column.
    pub fn drop_first_column(&self) -> Self {
        Self {
            m: self.m,
            n: self.n.saturating_sub(1),
            zeros: self
                .zeros
                .iter()
                .map(|js| js.iter().filter(|&&j| j > 0).map(|&j| j - 1).collect())
                .collect(),
        }
    }
}

/// Row order key for masked sampling: larger row sums first, then smaller
/// zero column (rows without a zero last), then original index.
#[inline]
pub(crate) fn sz_row_key(r: usize, y: Option<usize>, index: usize) -> (std::cmp::Reverse<usize>, usize, usize) {
    (std::cmp::Reverse(r), y.unwrap_or(usize::MAX), index)
}

/// Sorts rows by decreasing row sum, breaking ties by ascending zero column.
/// Columns must already be in non-increasing order.
pub fn sort_rows_sz(
    mp: &MarginPair,
    mask: &StructuralZeroMask,
) -> Result<(MarginPair, StructuralZeroMask, RowOrdering)> {
    mask.check_restricted()?;
    check_dims(mp, mask)?;
    if !mp.cols().windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "column sums must be sorted non-increasing before sorting rows".into(),
        ));
    }
    let y = mask.y();
    let mut perm: Vec<usize> = (0..mp.m()).collect();
    perm.sort_by_key(|&i| sz_row_key(mp.rows()[i], y[i], i));
    let ordering = RowOrdering::from_permutation(perm);
    let sorted = MarginPair::new(ordering.apply(mp.rows()), mp.cols().to_vec())?;
    Ok((sorted, mask.permute_rows(&ordering), ordering))
}

fn check_dims(mp: &MarginPair, mask: &StructuralZeroMask) -> Result<()> {
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

/// Support construction for restricted masks without precondition checks.
///
/// `rows` sorted with the masked tie rule, `cols` non-increasing, and
/// `zero_col(i)` giving row `i`'s zero column relative to `cols` (if any).
pub(crate) fn support_sz_unchecked(
    rows: &[usize],
    cols: &[usize],
    zero_col: impl Fn(usize) -> Option<usize>,
    scratch: &mut Vec<i64>,
) -> ColumnSupport {
    let m = rows.len();
    let n = cols.len();
    let c1 = cols[0];

    // tail[j] = sum of cols[j+1..]
    scratch.clear();
    scratch.resize(2 * n, 0);
    let (tail, cnt) = scratch.split_at_mut(n);
    let mut acc = 0i64;
    for j in (0..n).rev() {
        tail[j] = acc;
        acc += cols[j] as i64;
    }

    let mut allowed = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let mut r_acc = 0i64;
    for (t, &r) in rows.iter().enumerate() {
        let y = zero_col(t);
        let xi = y.is_some() as usize;
        allowed.push(if r == 0 || y == Some(0) {
            Allowed::Zero
        } else if r + xi >= n {
            Allowed::One
        } else {
            Allowed::Both
        });
        r_acc += r as i64;
        if t + 1 == m {
            lower.push(c1);
            break;
        }
        // zeros at relative columns 1..=j in rows 0..=t
        if let Some(k) = y.filter(|&k| k >= 1) {
            for c in cnt[k..].iter_mut() {
                *c += 1;
            }
        }
        let i = (t + 1) as i64;
        let d = (0..n)
            .map(|j| i * j as i64 + tail[j] - cnt[j])
            .min()
            .unwrap_or(0);
        lower.push((r_acc - d).max(0) as usize);
    }
    ColumnSupport {
        allowed,
        lower,
        upper: vec![c1; m],
    }
}

/// Exact first-column support under a restricted structural-zero mask.
///
/// Columns must be non-increasing and rows sorted by [`sort_rows_sz`].
pub fn first_column_support_sz(mp: &MarginPair, mask: &StructuralZeroMask) -> Result<ColumnSupport> {
    mask.check_restricted()?;
    check_dims(mp, mask)?;
    if !mp.cols().windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::Domain("column sums must be non-increasing".into()));
    }
    let y = mask.y();
    let ordered = (1..mp.m()).all(|i| {
        sz_row_key(mp.rows()[i - 1], y[i - 1], 0) <= sz_row_key(mp.rows()[i], y[i], 0)
    });
    if !ordered {
        return Err(Error::Domain(
            "rows must be sorted by decreasing sum with ties by ascending zero column".into(),
        ));
    }
    let mut scratch = Vec::new();
    Ok(support_sz_unchecked(mp.rows(), mp.cols(), |i| y[i], &mut scratch))
}
