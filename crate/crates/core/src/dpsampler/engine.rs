//! Full-matrix sampling and evaluation, one column at a time.

use std::cmp::Reverse;

use rand::Rng;

use super::chain::{ColumnChain, ColumnChainFactors};
use crate::enumeration::{logodds_into, BernoulliProfile, Heuristic, RowZeroTerm, TailMoments};
use crate::error::{Error, Result};
use crate::margins::{gale_ryser_feasible, support_unchecked, MarginPair};
use crate::matrix::BinaryMatrix;
use crate::rng;
use crate::szero::{support_sz_unchecked, StructuralZeroMask};

/// Probabilities of exactly 0 or 1 on rows that still have both options are
/// moved this far inside the interval.
const EXTREME_EPS: f64 = 1e-12;

/// Sampling options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub heuristic: Heuristic,
    /// Sample columns in the given order instead of by decreasing sum.
    /// Not allowed together with a mask.
    pub keep_column_order: bool,
    /// Accept masks with more than one zero per row or column. Zeros are
    /// then enforced by pinning and sampling may hit a dead end.
    pub allow_general_mask: bool,
    /// Multiplies every stage factor by this constant before the backward
    /// pass. The transitions do not depend on it.
    pub factor_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            heuristic: Heuristic::Cgm,
            keep_column_order: false,
            allow_general_mask: false,
            factor_scale: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn with_heuristic(heuristic: Heuristic) -> Self {
        Self {
            heuristic,
            ..Self::default()
        }
    }
}

/// A sampled matrix and its log proposal probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    pub matrix: BinaryMatrix,
    pub log_q: f64,
}

impl SampledMatrix {
    /// `log W = -log Q`.
    pub fn log_weight(&self) -> f64 {
        -self.log_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MaskMode {
    None,
    Restricted,
    General,
}

/// Scratch buffers reused across columns.
#[derive(Default)]
struct Workspace {
    residual: Vec<usize>,
    order: Vec<usize>,
    rows: Vec<usize>,
    zeros: Vec<RowZeroTerm>,
    logodds: Vec<f64>,
    scratch: Vec<i64>,
    factors: ColumnChainFactors,
    chain: ColumnChain,
    column: Vec<u8>,
}

enum Mode<'a, R: ?Sized> {
    Sample(&'a mut R),
    Eval(&'a BinaryMatrix),
}

/// The column-by-column sampler for one margin pair and mask.
#[derive(Debug, Clone)]
pub struct Sampler {
    margins: MarginPair,
    config: SamplerConfig,
    mode: MaskMode,
    /// Position `k` is filled from original column `col_order[k]`.
    col_order: Vec<usize>,
    cols: Vec<usize>,
    /// Zero positions per row, in sampling order.
    zeros: Vec<Vec<usize>>,
    /// `tails[k]` holds the moments of columns after position `k`.
    tails: Vec<TailMoments>,
}

impl Sampler {
    pub fn new(
        margins: &MarginPair,
        mask: Option<&StructuralZeroMask>,
        config: SamplerConfig,
    ) -> Result<Self> {
        let (m, n) = (margins.m(), margins.n());
        let h = config.heuristic;
        if h.is_sz() && mask.is_none() {
            return Err(Error::Domain(format!(
                "heuristic {h} needs a structural-zero mask"
            )));
        }
        if !(config.factor_scale > 0.0 && config.factor_scale.is_finite()) {
            return Err(Error::Domain("factor scale must be positive and finite".into()));
        }
        let mode = match mask {
            None => MaskMode::None,
            Some(mask) => {
                if mask.m() != m || mask.n() != n {
                    return Err(Error::Shape(format!(
                        "mask is {}x{} but margins are {m}x{n}",
                        mask.m(),
                        mask.n()
                    )));
                }
                if config.keep_column_order {
                    return Err(Error::Domain(
                        "columns must be reordered when structural zeros are present".into(),
                    ));
                }
                if mask.is_restricted() {
                    MaskMode::Restricted
                } else if config.allow_general_mask {
                    MaskMode::General
                } else {
                    return Err(mask.check_restricted().unwrap_err());
                }
            }
        };
        if !gale_ryser_feasible(margins) {
            return Err(Error::InfeasibleMargins("Gale-Ryser conditions fail".into()));
        }
        if let Some(mask) = mask {
            let xi = mask.xi();
            if let Some(i) = (0..m).find(|&i| margins.rows()[i] + xi[i] > n) {
                return Err(Error::InfeasibleMargins(format!(
                    "row {} cannot place {} ones around its structural zeros",
                    i + 1,
                    margins.rows()[i]
                )));
            }
            let zeta = mask.zeta();
            if let Some(j) = (0..n).find(|&j| margins.cols()[j] + zeta[j] > m) {
                return Err(Error::InfeasibleMargins(format!(
                    "column {} cannot place {} ones around its structural zeros",
                    j + 1,
                    margins.cols()[j]
                )));
            }
        }

        let mut col_order: Vec<usize> = (0..n).collect();
        if !config.keep_column_order {
            col_order.sort_by_key(|&j| (Reverse(margins.cols()[j]), j));
        }
        let cols: Vec<usize> = col_order.iter().map(|&j| margins.cols()[j]).collect();
        let zeros = match mask {
            Some(mask) => {
                let permuted = mask.permute_cols(&col_order);
                (0..m).map(|i| permuted.row_zeros(i).to_vec()).collect()
            }
            None => vec![Vec::new(); m],
        };
        let mut tails = vec![TailMoments::default(); n];
        for k in (0..n.saturating_sub(1)).rev() {
            let mut t = tails[k + 1];
            t.len += 1;
            t.add(cols[k + 1]);
            tails[k] = t;
        }

        Ok(Self {
            margins: margins.clone(),
            config,
            mode,
            col_order,
            cols,
            zeros,
            tails,
        })
    }

    pub fn margins(&self) -> &MarginPair {
        &self.margins
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn heuristic(&self) -> Heuristic {
        self.config.heuristic
    }

    /// Original column index filled at each sampling step.
    pub fn column_order(&self) -> &[usize] {
        &self.col_order
    }

    /// Draws one matrix.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampledMatrix> {
        self.sample_counted(rng).map(|(s, _)| s)
    }

    /// Draws one matrix and reports the number of elementary operations
    /// spent: DP cells visited plus one per row and per remaining column at
    /// each step.
    pub fn sample_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(SampledMatrix, u64)> {
        let mut ws = Workspace::default();
        let mut ops = 0u64;
        let (matrix, log_q) = self.run(Mode::Sample(rng), &mut ws, &mut ops)?;
        Ok((SampledMatrix { matrix, log_q }, ops))
    }

    /// Draw `index` of the batch keyed by `seed`.
    pub fn sample_indexed(&self, seed: u64, index: u64) -> Result<SampledMatrix> {
        self.sample(&mut rng::stream(seed, index))
    }

    /// Checks that the first sampled column has at least one valid value.
    /// Sufficient for non-emptiness without a mask; with a mask it is a
    /// one-step look-ahead.
    pub fn check_first_column(&self) -> Result<()> {
        let mut ws = Workspace::default();
        ws.residual.extend_from_slice(self.margins.rows());
        ws.order.extend(0..self.margins.m());
        if self.margins.n() == 1 {
            let ok = (0..self.margins.m())
                .all(|i| ws.residual[i] <= 1 && !(ws.residual[i] == 1 && self.zeros[i].contains(&0)));
            return if ok { Ok(()) } else { Err(self.stuck(0)) };
        }
        self.prepare_column(0, &mut ws, &mut 0)
    }

    /// `log Q(z)`; `-inf` when `z` has the wrong shape or margins, hits a
    /// structural zero, or lies outside the support.
    pub fn eval(&self, z: &BinaryMatrix) -> f64 {
        let (m, n) = (self.margins.m(), self.margins.n());
        if z.nrows() != m || z.ncols() != n {
            return f64::NEG_INFINITY;
        }
        if z.row_sums() != self.margins.rows() || z.col_sums() != self.margins.cols() {
            return f64::NEG_INFINITY;
        }
        let mut ws = Workspace::default();
        let mut ops = 0u64;
        match self.run::<rand_chacha::ChaCha8Rng>(Mode::Eval(z), &mut ws, &mut ops) {
            Ok((_, lq)) => lq,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn run<R: Rng + ?Sized>(
        &self,
        mut mode: Mode<'_, R>,
        ws: &mut Workspace,
        ops: &mut u64,
    ) -> Result<(BinaryMatrix, f64)> {
        let (m, n) = (self.margins.m(), self.margins.n());
        let mut out = BinaryMatrix::zeros(m, n);
        ws.residual.clear();
        ws.residual.extend_from_slice(self.margins.rows());
        ws.order.clear();
        ws.order.extend(0..m);
        let mut log_q = 0.0;

        for k in 0..n {
            let col = self.col_order[k];
            let remaining = n - k;
            *ops += (m + remaining) as u64;

            if remaining == 1 {
                // Last column: forced by the residual row sums.
                for i in 0..m {
                    let bit = ws.residual[i];
                    if bit > 1 || (bit == 1 && self.zeros[i].contains(&k)) {
                        return Err(self.stuck(k));
                    }
                    if let Mode::Eval(z) = &mode {
                        if z.get(i, col) as usize != bit {
                            return Err(Error::OutOfSupport);
                        }
                    }
                    out.set(i, col, bit == 1);
                }
                break;
            }

            self.prepare_column(k, ws, ops)?;

            let lp = match &mut mode {
                Mode::Sample(rng) => ws.chain.sample_into(&mut **rng, &mut ws.column),
                Mode::Eval(z) => {
                    ws.column.clear();
                    ws.column.extend(ws.order.iter().map(|&i| z.get(i, col)));
                    let lp = ws.chain.eval(&ws.column);
                    if lp == f64::NEG_INFINITY {
                        return Err(Error::OutOfSupport);
                    }
                    lp
                }
            };
            log_q += lp;
            for (t, &i) in ws.order.iter().enumerate() {
                let bit = ws.column[t];
                ws.residual[i] -= bit as usize;
                out.set(i, col, bit == 1);
            }
        }
        Ok((out, log_q))
    }

    /// Sorts the rows by their residual sums and builds the chain for the
    /// column at position `k` in `ws.chain`.
    fn prepare_column(&self, k: usize, ws: &mut Workspace, ops: &mut u64) -> Result<()> {
        let m = self.margins.m();
        let h = self.config.heuristic;
        let log_scale = self.config.factor_scale.ln();
        let c1 = self.cols[k];
        let remaining = self.margins.n() - k;
        let zero_at = |i: usize| -> Option<usize> {
            self.zeros[i].iter().find(|&&p| p >= k).map(|&p| p - k)
        };
        let residual = &ws.residual;
        match self.mode {
            MaskMode::Restricted => ws
                .order
                .sort_by_key(|&i| (Reverse(residual[i]), zero_at(i).unwrap_or(usize::MAX), i)),
            _ => ws.order.sort_by_key(|&i| (Reverse(residual[i]), i)),
        }
        ws.rows.clear();
        ws.rows.extend(ws.order.iter().map(|&i| ws.residual[i]));

        let tail_cols = &self.cols[k..];
        let mut support = match self.mode {
            MaskMode::Restricted => {
                let order = &ws.order;
                support_sz_unchecked(&ws.rows, tail_cols, |t| zero_at(order[t]), &mut ws.scratch)
            }
            _ => support_unchecked(&ws.rows, tail_cols),
        };
        if self.mode == MaskMode::General {
            for (t, &i) in ws.order.iter().enumerate() {
                if self.zeros[i].contains(&k) {
                    support.allowed[t] = support.allowed[t].without_one().ok_or(self.stuck(k))?;
                }
            }
        }

        let zeros = if h.is_sz() {
            ws.zeros.clear();
            for &i in &ws.order {
                let mut term = RowZeroTerm::default();
                for &p in self.zeros[i].iter().filter(|&&p| p > k) {
                    term.count += 1;
                    term.col_sum += self.cols[p] as f64;
                }
                ws.zeros.push(term);
            }
            Some(&ws.zeros[..])
        } else {
            None
        };
        logodds_into(&mut ws.logodds, &ws.rows, remaining, &self.tails[k], h, zeros);
        let mut profile = BernoulliProfile::from_logodds(std::mem::take(&mut ws.logodds));
        profile.clamp_extremes(EXTREME_EPS);

        ws.factors.fill(&profile, &support);
        ws.logodds = profile.into_logodds();
        if log_scale != 0.0 {
            for i in 0..m {
                ws.factors.scale_stage(i, log_scale);
            }
        }
        *ops += (m * (c1 + 1)) as u64;
        if let Err(e) = ws.chain.fill(&ws.factors) {
            return Err(match (e, self.mode) {
                (Error::NoValidPath, MaskMode::General) => self.stuck(k),
                (Error::NoValidPath, _) => Error::InfeasibleMargins(
                    "no matrix satisfies the margins and structural zeros".into(),
                ),
                (e, _) => e,
            });
        }
        Ok(())
    }

    fn stuck(&self, k: usize) -> Error {
        match self.mode {
            MaskMode::General => Error::DeadEnd {
                column: self.col_order[k] + 1,
            },
            _ => Error::InfeasibleMargins(
                "no matrix satisfies the margins and structural zeros".into(),
            ),
        }
    }
}

/// Draws one matrix with margins `mp` under heuristic `h`.
pub fn sample_matrix<R: Rng + ?Sized>(
    mp: &MarginPair,
    h: Heuristic,
    mask: Option<&StructuralZeroMask>,
    rng: &mut R,
) -> Result<SampledMatrix> {
    Sampler::new(mp, mask, SamplerConfig::with_heuristic(h))?.sample(rng)
}

/// `log Q(z)` under the sampler for `mp`, `h` and `mask`. Infeasible margins
/// give `-inf`.
pub fn eval_matrix(
    mp: &MarginPair,
    h: Heuristic,
    mask: Option<&StructuralZeroMask>,
    z: &BinaryMatrix,
) -> Result<f64> {
    match Sampler::new(mp, mask, SamplerConfig::with_heuristic(h)) {
        Ok(s) => Ok(s.eval(z)),
        Err(Error::InfeasibleMargins(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}
