//! Exact L^q partition sums of constructed measures, coarse large-deviation
//! counts by dynamic programming over stage exponents, and empirical
//! spectra of explicit cube tables.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::{StageTable, SymbolicMeasure};
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::legendre::{Dom, LqFunction, SpectrumFunction};
use crate::logspace::{log2_sum_exp2, Log2Sum};

/// Initial bucket width of the exponent DP, `2^-20`.
pub const DP_WIDTH: f64 = 1.0 / 1_048_576.0;
/// Default cap on the number of DP buckets.
pub const DP_MAX_BUCKETS: usize = 2048;

/// `log2 sum_{I in G_s} mu(I)^q`.
pub fn exact_partition(mu: &SymbolicMeasure, q: f64, s: usize) -> Result<f64> {
    if !q.is_finite() {
        return Err(Error::InvalidInput(format!("q = {q} must be finite")));
    }
    mu.log2_partition(q, s)
}

/// `tau_s(q) = log2 sum mu(I)^q / -n(s)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTau {
    pub s: usize,
    pub n: u64,
    pub tau: Vec<f64>,
}

/// `tau_s` at one round boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTau {
    pub m: usize,
    /// `tau` at `s_m`, the end of the `f` run.
    pub at_s: StageTau,
    /// `tau` at `s'_m`, the end of the `g` run.
    pub at_s_prime: StageTau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauProfile {
    pub q: Vec<f64>,
    /// Profile at every run end and at evenly spaced stages inside each run.
    pub stages: Vec<StageTau>,
    pub boundaries: Vec<BoundaryTau>,
    /// Pointwise min over `{s_m, s'_m}` in the tail half of the rounds,
    /// the finite-depth stand-in for `liminf tau_s`.
    pub lower: Vec<f64>,
    /// Pointwise max over the same stages, standing in for `limsup tau_s`.
    pub upper: Vec<f64>,
}

/// One-stage partition values of every run on the grid.
fn run_partitions(mu: &SymbolicMeasure, q: &[f64]) -> Vec<Vec<f64>> {
    mu.runs.par_iter().map(|r| q.iter().map(|&qq| r.table.log2_partition(qq)).collect()).collect()
}

fn stage_tau(mu: &SymbolicMeasure, parts: &[Vec<f64>], s: usize) -> Result<StageTau> {
    let n = mu.n_of(s)?;
    let runs = mu.runs_upto(s)?;
    let len = parts.first().map_or(0, Vec::len);
    let tau = (0..len)
        .map(|i| -runs.iter().enumerate().map(|(r, (_, c))| *c as f64 * parts[r][i]).sum::<f64>() / n as f64)
        .collect();
    Ok(StageTau { s, n, tau })
}

/// Profile of `tau_s` with the boundary reports at `s_m` and `s'_m`.
pub fn tau_profile(mu: &SymbolicMeasure, q_grid: &[f64], per_run: usize) -> Result<TauProfile> {
    let parts = run_partitions(mu, q_grid);
    let mut stages_idx = Vec::new();
    let mut start = 0usize;
    for r in &mu.runs {
        let reps = r.reps as usize;
        let inner = per_run.max(1).min(reps);
        for j in 1..=inner {
            stages_idx.push(start + (j * reps).div_ceil(inner));
        }
        start += reps;
    }
    stages_idx.dedup();
    let stages = stages_idx.iter().map(|&s| stage_tau(mu, &parts, s)).collect::<Result<Vec<_>>>()?;
    let mut boundaries = Vec::new();
    for m in 1..=mu.schedule.m_max {
        if let (Some(a), Some(b)) = (mu.s_m(m), mu.s_prime_m(m)) {
            boundaries.push(BoundaryTau { m, at_s: stage_tau(mu, &parts, a)?, at_s_prime: stage_tau(mu, &parts, b)? });
        }
    }
    let tail = &boundaries[boundaries.len() / 2..];
    let pick = |agg: fn(f64, f64) -> f64, init: f64| -> Vec<f64> {
        (0..q_grid.len())
            .map(|i| tail.iter().flat_map(|b| [b.at_s.tau[i], b.at_s_prime.tau[i]]).fold(init, agg))
            .collect()
    };
    let lower = pick(f64::min, f64::INFINITY);
    let upper = pick(f64::max, f64::NEG_INFINITY);
    Ok(TauProfile { q: q_grid.to_vec(), stages, boundaries, lower, upper })
}

/// `sup_q |a(q) - b(q)|` over the grid points where both are finite.
pub fn sup_distance(q: &[f64], a: &[f64], b: &LqFunction) -> f64 {
    q.iter()
        .zip(a)
        .map(|(&qq, &x)| {
            let y = b.eval(qq);
            if x.is_finite() && y.is_finite() {
                (x - y).abs()
            } else if x == y {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Distribution of `-log2 mu(I)` over `G_s`: log2 counts on a grid of width `w`.
#[derive(Debug, Clone, PartialEq)]
struct Dist {
    w: f64,
    start: i64,
    lc: Vec<f64>,
    /// Bound on `|value - bucket position|` for every cube.
    err: f64,
}

impl Dist {
    fn delta() -> Self {
        Self { w: DP_WIDTH, start: 0, lc: vec![0.0], err: 0.0 }
    }

    /// One stage on the finest grid `2^j DP_WIDTH` spanning at most `max_buckets` buckets.
    fn of_stage(t: &StageTable, max_buckets: usize) -> Self {
        let classes = t.classes();
        let lo = classes.iter().map(|c| -c.3).fold(f64::INFINITY, f64::min);
        let hi = classes.iter().map(|c| -c.3).fold(f64::NEG_INFINITY, f64::max);
        let mut w = DP_WIDTH;
        while (hi - lo) / w + 2.0 > max_buckets as f64 {
            w *= 2.0;
        }
        let mut pts: Vec<(i64, f64)> = classes.into_iter().map(|(_, _, lc, lm)| (((-lm) / w).round() as i64, lc)).collect();
        pts.sort_by_key(|p| p.0);
        let start = pts[0].0;
        let len = (pts[pts.len() - 1].0 - start + 1) as usize;
        let mut acc = vec![Log2Sum::new(); len];
        for (i, lc) in pts {
            acc[(i - start) as usize].add(lc);
        }
        Self { w, start, lc: acc.iter().map(Log2Sum::value).collect(), err: w / 2.0 }
    }

    fn coarsen(&self) -> Self {
        let start = self.start.div_euclid(2);
        let end = (self.start + self.lc.len() as i64 - 1).div_euclid(2);
        let mut acc = vec![Log2Sum::new(); (end - start + 1) as usize];
        for (j, &v) in self.lc.iter().enumerate() {
            acc[((self.start + j as i64).div_euclid(2) - start) as usize].add(v);
        }
        Self { w: 2.0 * self.w, start, lc: acc.iter().map(Log2Sum::value).collect(), err: self.err + self.w }
    }

    fn at_width(mut self, w: f64) -> Self {
        while self.w < w {
            self = self.coarsen();
        }
        self
    }

    fn fit(mut self, max_buckets: usize) -> Self {
        while self.lc.len() > max_buckets {
            self = self.coarsen();
        }
        self
    }

    fn is_delta(&self) -> bool {
        self.start == 0 && self.lc == [0.0] && self.err == 0.0
    }

    fn conv(a: &Dist, b: &Dist, max_buckets: usize) -> Dist {
        if a.is_delta() {
            return b.clone().fit(max_buckets);
        }
        if b.is_delta() {
            return a.clone().fit(max_buckets);
        }
        let w = a.w.max(b.w);
        let a = a.clone().at_width(w);
        let b = b.clone().at_width(w);
        let len = a.lc.len() + b.lc.len() - 1;
        let lc: Vec<f64> = (0..len)
            .into_par_iter()
            .map(|k| {
                let lo = k.saturating_sub(b.lc.len() - 1);
                let hi = k.min(a.lc.len() - 1);
                log2_sum_exp2((lo..=hi).map(|i| a.lc[i] + b.lc[k - i]))
            })
            .collect();
        Dist { w, start: a.start + b.start, lc, err: a.err + b.err }.fit(max_buckets)
    }

    fn pow(base: &Dist, mut r: u64, max_buckets: usize) -> Dist {
        let mut out = Dist::delta();
        let mut b = base.clone();
        while r > 0 {
            if r & 1 == 1 {
                out = Dist::conv(&out, &b, max_buckets);
            }
            r >>= 1;
            if r > 0 {
                b = Dist::conv(&b, &b, max_buckets);
            }
        }
        out
    }

    /// `log2` count of cubes whose bucket position lies in `[lo, hi]`.
    fn count_between(&self, lo: f64, hi: f64) -> f64 {
        log2_sum_exp2(self.lc.iter().enumerate().filter_map(|(j, &v)| {
            let x = (self.start + j as i64) as f64 * self.w;
            (x >= lo && x <= hi).then_some(v)
        }))
    }
}

/// Exponent distribution of `G_s`, reusable across windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentDistribution {
    pub s: usize,
    pub n: u64,
    dist: Dist,
}

impl ExponentDistribution {
    pub fn new(mu: &SymbolicMeasure, s: usize, max_buckets: usize) -> Result<Self> {
        if max_buckets < 2 {
            return Err(Error::InvalidInput("the DP needs at least 2 buckets".into()));
        }
        let n = mu.n_of(s)?;
        let mut dist = Dist::delta();
        for (run, c) in mu.runs_upto(s)? {
            let stage = Dist::of_stage(&run.table, max_buckets).fit(max_buckets);
            let rep = Dist::pow(&stage, c, max_buckets);
            dist = Dist::conv(&dist, &rep, max_buckets);
        }
        Ok(Self { s, n, dist })
    }

    /// Bound on `|-log2 mu(I) / n(s) - bucket exponent|` for every cube.
    pub fn broadening(&self) -> f64 {
        self.dist.err / self.n as f64
    }

    /// `log2 #{I : mu(I) in [2^{-n(hi)}, 2^{-n(lo)}]} / n`, bucket-resolved.
    pub fn exponent_between(&self, lo: f64, hi: f64) -> f64 {
        let n = self.n as f64;
        self.dist.count_between(lo * n, hi * n) / n
    }

    /// `log2 #G_s / n(s)`.
    pub fn log2_total(&self) -> f64 {
        log2_sum_exp2(self.dist.lc.iter().copied()) / self.n as f64
    }

    /// `(exponent, log2 count / n)` of every nonempty bucket.
    pub fn buckets(&self) -> Vec<(f64, f64)> {
        let n = self.n as f64;
        self.dist
            .lc
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(j, &v)| ((self.dist.start + j as i64) as f64 * self.dist.w / n, v / n))
            .collect()
    }
}

/// Coarse large-deviation exponents `c_s(alpha)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseSpectrum {
    pub s: usize,
    pub n: u64,
    pub eps: f64,
    pub alpha: Vec<f64>,
    /// `log2 N_s(alpha, eps) / n(s)`, `-inf` for empty windows.
    #[serde(with = "crate::serde_ext::vec")]
    pub c: Vec<f64>,
    /// Bucketing error bound on the exponents, from the DP.
    pub broadening: f64,
    /// `log2 #G_s / n(s)`, the ceiling of every `c`.
    pub ceiling: f64,
}

/// `c_s(alpha)` for every `alpha` of the grid.
pub fn ld_counts(mu: &SymbolicMeasure, s: usize, alpha_grid: &[f64], eps: f64) -> Result<CoarseSpectrum> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let ed = ExponentDistribution::new(mu, s, DP_MAX_BUCKETS)?;
    Ok(ld_from(&ed, alpha_grid, eps))
}

/// `c_s(alpha)` from a precomputed exponent distribution.
pub fn ld_from(ed: &ExponentDistribution, alpha_grid: &[f64], eps: f64) -> CoarseSpectrum {
    let c = alpha_grid.par_iter().map(|&a| ed.exponent_between(a - eps, a + eps)).collect();
    CoarseSpectrum {
        s: ed.s,
        n: ed.n,
        eps,
        alpha: alpha_grid.to_vec(),
        c,
        broadening: ed.broadening(),
        ceiling: ed.log2_total(),
    }
}

/// Window variant: `log2 #{mu(I) in [2^{-n(beta+eps)}, 2^{-n(alpha-eps)}]} / n`.
pub fn ld_window(ed: &ExponentDistribution, alpha: f64, beta: f64, eps: f64) -> f64 {
    ed.exponent_between(alpha - eps, beta + eps)
}

/// Tail variant: `log2 #{mu(I) <= 2^{-n A}} / n`.
pub fn ld_tail(ed: &ExponentDistribution, a: f64) -> f64 {
    ed.exponent_between(a, f64::INFINITY)
}

/// Ingredients of the tolerance `delta` between `c_s` and the spectrum `h`
/// of the run ending at `s`:
/// `delta = L (eps + shift) + count + substitute + hull`, with `L` the
/// Lipschitz constant of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdBroadening {
    pub eps: f64,
    pub lipschitz: f64,
    /// Bound on how far a cube exponent sits from a mixture of menu exponents:
    /// earlier runs, separators, class windows, weights and DP buckets.
    pub shift: f64,
    /// Bound on the excess count exponent: earlier runs, class windows and
    /// the number of atom and class sequences.
    pub count: f64,
    /// Largest excess of a menu target over `h`.
    pub substitute: f64,
    /// Largest gap between `h` and the concave hull of the menu on the grid.
    pub hull: f64,
    pub dp: f64,
    pub total: f64,
}

impl LdBroadening {
    /// `delta - eps`, the broadening attributable to the schedule and the DP.
    pub fn broadening(&self) -> f64 {
        self.total - self.eps
    }
}

fn lipschitz(h: &SpectrumFunction) -> f64 {
    h.pieces()
        .iter()
        .flat_map(|p| p.knots.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()))
        .fold(0.0, f64::max)
}

/// Upper concave hull of `pts` (sorted by abscissa) evaluated at `x`, `-inf` outside.
fn hull_at(pts: &[(f64, f64)], x: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (i, a) in pts.iter().enumerate() {
        if (a.0 - x).abs() <= 1e-12 {
            best = best.max(a.1);
        }
        for b in &pts[i + 1..] {
            if a.0 < x && x < b.0 {
                best = best.max(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0));
            }
        }
    }
    best
}

/// Tolerance for comparing `c_s` on `alpha_grid` against `h`.
pub fn ld_broadening(
    mu: &SymbolicMeasure,
    s: usize,
    eps: f64,
    dp: f64,
    h: &SpectrumFunction,
    alpha_grid: &[f64],
) -> Result<LdBroadening> {
    let n = mu.n_of(s)? as f64;
    let runs = mu.runs_upto(s)?;
    let (last, reps) = *runs.last().ok_or_else(|| Error::InvalidInput("stage 0 has no run".into()))?;
    let t = &last.table;
    let d = mu.d() as f64;
    let (lo, hi) = runs
        .iter()
        .flat_map(|(r, _)| r.table.atoms.iter().map(|a| a.alpha))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, a| (acc.0.min(a), acc.1.max(a)));
    let alpha_max = t.atoms.iter().map(|a| a.alpha).fold(0.0, f64::max);
    let stage_gen = t.stage_generation() as f64;
    let prior = (n - reps as f64 * stage_gen) / n;
    let rho_min = t.atoms.iter().map(|a| a.log2_rho).fold(0.0, f64::min);
    let shift = prior * (hi - lo)
        + t.ell as f64 / stage_gen * alpha_max
        + t.eps / 2.0
        + (-rho_min + t.log2_z.abs()) / t.n_gen as f64
        + dp;
    let sequences = reps as f64 * ((t.atoms.len() as f64) * (t.class_len() as f64 + 1.0)).log2() / n;
    let count = prior * d + t.eps / 2.0 + sequences;
    let substitute = t.atoms.iter().map(|a| a.gamma - h.eval(a.alpha).max(0.0)).fold(0.0, f64::max);
    let mut menu: Vec<(f64, f64)> = t.atoms.iter().map(|a| (a.alpha, a.gamma)).collect();
    menu.sort_by(|a, b| a.0.total_cmp(&b.0));
    let hull = alpha_grid
        .iter()
        .filter(|&&a| h.contains(a))
        .map(|&a| (h.eval(a) - hull_at(&menu, a)).max(0.0))
        .fold(0.0, f64::max);
    let lip = lipschitz(h);
    let total = lip.max(1.0) * (eps + shift) + count + substitute + hull;
    Ok(LdBroadening { eps, lipschitz: lip, shift, count, substitute, hull, dp, total })
}

/// `log2 sum mu(I)^q` of an explicit table aggregated to generation `g`.
pub fn empirical_partition(table: &[(DyadicCube, f64)], q: f64, g: u64) -> Result<f64> {
    let mut agg: HashMap<DyadicCube, f64> = HashMap::new();
    for (cube, m) in table {
        *agg.entry(cube.ancestor(g)?).or_insert(0.0) += m;
    }
    let mut acc = Log2Sum::new();
    for m in agg.values() {
        if *m > 0.0 {
            acc.add(q * m.log2());
        }
    }
    Ok(acc.value())
}

/// Least-squares slope of `log2 sum mu(I)^q` against `-n` over generations
/// `0..=n_max` of an explicit table of same-generation cubes.
pub fn empirical_tau(table: &[(DyadicCube, f64)], q_grid: &[f64]) -> Result<LqFunction> {
    let first = table.first().ok_or_else(|| Error::InvalidInput("empty table".into()))?;
    let n_max = first.0.generation();
    if table.iter().any(|(c, _)| c.generation() != n_max) {
        return Err(Error::InvalidInput("table mixes generations".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidInput("a single generation gives no slope".into()));
    }
    let total: f64 = table.iter().map(|(_, m)| m).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("table masses sum to {total}, not 1")));
    }
    // Aggregate level by level from the finest generation.
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(n_max as usize + 1);
    let mut cur: HashMap<DyadicCube, f64> = HashMap::new();
    for (c, m) in table {
        *cur.entry(c.clone()).or_insert(0.0) += m;
    }
    for g in (0..=n_max).rev() {
        levels.push(cur.values().copied().filter(|&m| m > 0.0).collect());
        if g > 0 {
            let mut next: HashMap<DyadicCube, f64> = HashMap::new();
            for (c, m) in cur {
                *next.entry(c.ancestor(g - 1)?).or_insert(0.0) += m;
            }
            cur = next;
        }
    }
    levels.reverse();
    let xs: Vec<f64> = (0..=n_max).map(|n| -(n as f64)).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let tau = q_grid
        .par_iter()
        .map(|&q| {
            let ys: Vec<f64> = levels.iter().map(|ms| log2_sum_exp2(ms.iter().map(|m| q * m.log2()))).collect();
            let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
            xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum::<f64>() / sxx
        })
        .collect();
    LqFunction::new(q_grid.to_vec(), tau, Dom::R)
}
