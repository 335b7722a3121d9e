//! Margin arithmetic: conjugate sequences, Gale–Ryser feasibility, row
//! ordering and the exact support of the first column.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Row sums `r` (length `m`) and column sums `c` (length `n`).
///
/// Entries may exceed the opposite dimension; such pairs are simply
/// infeasible. Equality of the two totals is not enforced here either.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarginPair {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl MarginPair {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::Shape(format!(
                "need at least one row and one column, got {}x{}",
                rows.len(),
                cols.len()
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn row_total(&self) -> usize {
        self.rows.iter().sum()
    }

    pub fn col_total(&self) -> usize {
        self.cols.iter().sum()
    }

    /// True when the row sums are non-increasing.
    pub fn rows_sorted(&self) -> bool {
        self.rows.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn is_feasible(&self) -> bool {
        gale_ryser_feasible(self)
    }

    /// Parses the margins text format: `m n`, then the `m` row sums, then
    /// the `n` column sums. Lines starting with `#` and blank lines are
    /// skipped. Row and column sums may each span one line only.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut next_line = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing {what} line"),
            })
        };

        let (dims_line, dims) = next_line("dimension")?;
        let dims = parse_ints(dims_line, dims)?;
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: dims_line,
                message: format!("expected \"m n\", found {} values", dims.len()),
            });
        }
        let (m, n) = (dims[0], dims[1]);

        let (row_line, row_text) = next_line("row sum")?;
        let rows = parse_ints(row_line, row_text)?;
        if rows.len() != m {
            return Err(Error::Parse {
                line: row_line,
                message: format!("expected {m} row sums, found {}", rows.len()),
            });
        }
        let (col_line, col_text) = next_line("column sum")?;
        let cols = parse_ints(col_line, col_text)?;
        if cols.len() != n {
            return Err(Error::Parse {
                line: col_line,
                message: format!("expected {n} column sums, found {}", cols.len()),
            });
        }
        if let Some((extra, _)) = lines.next() {
            return Err(Error::Parse {
                line: extra,
                message: "unexpected content after column sums".into(),
            });
        }
        Self::new(rows, cols).map_err(|e| Error::Parse {
            line: dims_line,
            message: e.to_string(),
        })
    }

    /// Renders the margins in the text format accepted by [`parse_text`](Self::parse_text).
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "{} {}\n{}\n{}\n",
            self.m(),
            self.n(),
            join(&self.rows),
            join(&self.cols)
        )
    }
}

impl FromStr for MarginPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_text(s)
    }
}

fn parse_ints(line: usize, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("expected a non-negative integer, found {tok:?}"),
            })
        })
        .collect()
}

/// `out[j-1] = #{i : t[i] >= j}` for `j = 1..=len`.
pub fn conjugate(t: &[usize], len: usize) -> Vec<usize> {
    // counts[v] = #{i : t[i] == v}, capped at len
    let mut counts = vec![0usize; len + 1];
    for &v in t {
        counts[v.min(len)] += 1;
    }
    let mut out = vec![0usize; len];
    let mut running = 0;
    for j in (1..=len).rev() {
        running += counts[j];
        out[j - 1] = running;
    }
    out
}

/// Gale–Ryser test for nonemptiness of the set of binary matrices with the
/// given margins.
pub fn gale_ryser_feasible(mp: &MarginPair) -> bool {
    let (m, n) = (mp.m(), mp.n());
    if mp.rows.iter().any(|&r| r > n) || mp.cols.iter().any(|&c| c > m) {
        return false;
    }
    if mp.row_total() != mp.col_total() {
        return false;
    }
    let mut rows = mp.rows.clone();
    rows.sort_unstable_by(|a, b| b.cmp(a));
    let conj = conjugate(&mp.cols, m);
    let (mut lhs, mut rhs) = (0usize, 0usize);
    for (r, c) in rows.iter().zip(&conj) {
        lhs += r;
        rhs += c;
        if lhs > rhs {
            return false;
        }
    }
    lhs == rhs
}

/// A row permutation. `permutation[k]` is the original index of the row
/// placed at position `k`; `inverse` undoes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOrdering {
    pub permutation: Vec<usize>,
    pub inverse: Vec<usize>,
}

impl RowOrdering {
    pub fn from_permutation(permutation: Vec<usize>) -> Self {
        let mut inverse = vec![0; permutation.len()];
        for (pos, &orig) in permutation.iter().enumerate() {
            inverse[orig] = pos;
        }
        Self {
            permutation,
            inverse,
        }
    }

    pub fn identity(m: usize) -> Self {
        Self::from_permutation((0..m).collect())
    }

    /// Reorders `values` (indexed by original row) into sorted position order.
    pub fn apply<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&i| values[i].clone()).collect()
    }

    /// Inverse of [`apply`](Self::apply).
    pub fn restore<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.inverse.iter().map(|&k| values[k].clone()).collect()
    }
}

/// Stable sort of the rows into non-increasing row-sum order.
pub fn sort_rows(mp: &MarginPair) -> (MarginPair, RowOrdering) {
    let mut perm: Vec<usize> = (0..mp.m()).collect();
    perm.sort_by(|&a, &b| mp.rows[b].cmp(&mp.rows[a]));
    let ordering = RowOrdering::from_permutation(perm);
    let sorted = MarginPair {
        rows: ordering.apply(&mp.rows),
        cols: mp.cols.clone(),
    };
    (sorted, ordering)
}

/// Values a single entry of the first column may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allowed {
    Zero,
    One,
    Both,
}

impl Allowed {
    #[inline]
    pub fn allows_zero(self) -> bool {
        matches!(self, Allowed::Zero | Allowed::Both)
    }

    #[inline]
    pub fn allows_one(self) -> bool {
        matches!(self, Allowed::One | Allowed::Both)
    }

    #[inline]
    pub fn allows(self, bit: u8) -> bool {
        if bit == 0 {
            self.allows_zero()
        } else {
            self.allows_one()
        }
    }

    /// Removes the option of placing a one; `None` if nothing is left.
    pub fn without_one(self) -> Option<Allowed> {
        match self {
            Allowed::One => None,
            _ => Some(Allowed::Zero),
        }
    }
}

/// Per-row allowed bits and the partial-sum window `[lower[i], upper[i]]`
/// for the first column. A column `b` is valid iff every `b[i]` is allowed
/// and every partial sum `b[0] + .. + b[i]` lies in its window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSupport {
    pub allowed: Vec<Allowed>,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
}

impl ColumnSupport {
    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    /// The pinned column total.
    pub fn total(&self) -> usize {
        self.upper.last().copied().unwrap_or(0)
    }

    pub fn contains(&self, b: &[u8]) -> bool {
        if b.len() != self.len() {
            return false;
        }
        let mut s = 0usize;
        for (i, &bit) in b.iter().enumerate() {
            if bit > 1 || !self.allowed[i].allows(bit) {
                return false;
            }
            s += bit as usize;
            if s < self.lower[i] || s > self.upper[i] {
                return false;
            }
        }
        true
    }
}

/// Allowed bits for a row with `r` ones left among `n` columns.
#[inline]
pub(crate) fn allowed_for(r: usize, n: usize) -> Allowed {
    if r == 0 {
        Allowed::Zero
    } else if r >= n {
        Allowed::One
    } else {
        Allowed::Both
    }
}

/// Support construction without precondition checks. `rows` must be sorted
/// non-increasing and `cols[0]` is the column being filled.
pub(crate) fn support_unchecked(rows: &[usize], cols: &[usize]) -> ColumnSupport {
    let m = rows.len();
    let n = cols.len();
    let c1 = cols[0];
    let conj = conjugate(&cols[1..], m);
    let mut allowed = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let (mut r_acc, mut c_acc) = (0usize, 0usize);
    for (i, &r) in rows.iter().enumerate() {
        allowed.push(allowed_for(r, n));
        r_acc += r;
        c_acc += conj[i];
        lower.push(if i + 1 == m {
            c1
        } else {
            r_acc.saturating_sub(c_acc)
        });
    }
    ColumnSupport {
        allowed,
        lower,
        upper: vec![c1; m],
    }
}

/// Exact support of the first column for sorted, feasible margins.
pub fn first_column_support(mp: &MarginPair) -> Result<ColumnSupport> {
    if !mp.rows_sorted() {
        return Err(Error::InfeasibleMargins(
            "row sums must be sorted non-increasing".into(),
        ));
    }
    if !gale_ryser_feasible(mp) {
        return Err(Error::InfeasibleMargins(
            "Gale-Ryser conditions fail".into(),
        ));
    }
    Ok(support_unchecked(&mp.rows, &mp.cols))
}
