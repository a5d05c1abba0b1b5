//! Wavelet series built from measures on `[0,1]`, their wavelet leaders,
//! leader-based scaling functions, pointwise Hölder profiles and the
//! spectrum-to-function recipe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::SymbolicMeasure;
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::legendre::{fixed_points, Dom, LqFunction, Piece, SpectrumFunction, TOL};
use crate::logspace::{log2_sum_exp2, Log2Sum};

/// Mother wavelet `psi(t) = hat(2t) - hat(2t - 1)` with
/// `hat(t) = max(0, 1 - |2t - 1|)`: supported on `[0,1]`, sup norm 1.
pub fn mother(t: f64) -> f64 {
    let hat = |u: f64| (1.0 - (2.0 * u - 1.0).abs()).max(0.0);
    hat(2.0 * t) - hat(2.0 * t - 1.0)
}

/// `F = sum_I 2^{-n gamma1} mu(I)^{gamma2} psi_I` truncated at `n_max`, in log2 form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletSeries {
    pub gamma1: f64,
    pub gamma2: f64,
    pub n_max: u32,
    /// `log2 mu(I)` for every generation `0..=n_max`, left to right.
    pub log2_mu: Vec<Vec<f64>>,
    /// `log2 lambda_I` on the same layout.
    pub log2_lambda: Vec<Vec<f64>>,
    /// Additive `log2 c` of a global scaling `c F`.
    pub log2_scale: f64,
}

impl WaveletSeries {
    fn check(gamma1: f64, gamma2: f64, n_max: u32) -> Result<()> {
        if !(gamma1 >= 0.0 && gamma2 > 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
            return Err(Error::InvalidInput(format!("need gamma1 >= 0 and gamma2 > 0 (got {gamma1}, {gamma2})")));
        }
        if n_max > 24 {
            return Err(Error::InvalidInput(format!("n_max = {n_max} exceeds 24")));
        }
        Ok(())
    }

    /// Series over an explicit table of `log2` masses of the `2^n_max`
    /// intervals of generation `n_max`.
    pub fn from_table(log2_masses: &[f64], gamma1: f64, gamma2: f64) -> Result<Self> {
        let len = log2_masses.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidInput("table length must be a power of two".into()));
        }
        let n_max = len.trailing_zeros();
        Self::check(gamma1, gamma2, n_max)?;
        let mut log2_mu = vec![log2_masses.to_vec()];
        for _ in 0..n_max {
            let fine = log2_mu.last().expect("nonempty");
            let coarse: Vec<f64> = fine.chunks(2).map(|p| log2_sum_exp2(p.iter().copied())).collect();
            log2_mu.push(coarse);
        }
        log2_mu.reverse();
        Ok(Self::with_masses(log2_mu, gamma1, gamma2))
    }

    /// Series over a constructed measure on `[0,1]`, masses queried exactly
    /// at every generation up to `n_max`.
    pub fn from_measure(mu: &SymbolicMeasure, gamma1: f64, gamma2: f64, n_max: u32) -> Result<Self> {
        if mu.d() != 1 {
            return Err(Error::DimensionMismatch(1, mu.d()));
        }
        Self::check(gamma1, gamma2, n_max)?;
        let log2_mu = (0..=n_max)
            .map(|n| {
                (0..1u64 << n)
                    .into_par_iter()
                    .map(|k| mu.log2_mass_of_cube(&DyadicCube::from_indices(1, n as u64, &[k])?))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::with_masses(log2_mu, gamma1, gamma2))
    }

    fn with_masses(log2_mu: Vec<Vec<f64>>, gamma1: f64, gamma2: f64) -> Self {
        let log2_lambda = log2_mu
            .iter()
            .enumerate()
            .map(|(n, row)| row.iter().map(|&m| if m == f64::NEG_INFINITY { m } else { -(n as f64) * gamma1 + gamma2 * m }).collect())
            .collect();
        let n_max = log2_mu.len() as u32 - 1;
        Self { gamma1, gamma2, n_max, log2_mu, log2_lambda, log2_scale: 0.0 }
    }

    /// The series `c F`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("scale {c} must be positive")));
        }
        let l = c.log2();
        let mut out = self.clone();
        out.log2_scale += l;
        for row in out.log2_lambda.iter_mut() {
            for v in row.iter_mut() {
                *v += l;
            }
        }
        Ok(out)
    }

    /// `sum_{n <= n_max} lambda_{n, floor(2^n x)} psi(2^n x - k)` on a grid.
    pub fn evaluate(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter()
            .map(|&x| {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (n, row) in self.log2_lambda.iter().enumerate() {
                    let t = x * (1u64 << n) as f64;
                    let k = (t.floor() as usize).min(row.len() - 1);
                    let lam = row[k];
                    if lam > f64::NEG_INFINITY {
                        acc += lam.exp2() * mother(t - k as f64);
                    }
                }
                acc
            })
            .collect()
    }

    /// Estimated sup-norm of the generations beyond `n_max`:
    /// `2^{-(n_max+1) h} / (1 - 2^{-h})` with `h = gamma1 + gamma2 alpha`,
    /// `alpha` the smallest mass exponent observed at `n_max`.
    pub fn tail_bound(&self) -> f64 {
        let n = self.n_max as f64;
        if n == 0.0 {
            return f64::INFINITY;
        }
        let top = self.log2_mu[self.n_max as usize].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let alpha = -top / n;
        let h = self.gamma1 + self.gamma2 * alpha;
        if h <= 0.0 {
            return f64::INFINITY;
        }
        (self.log2_scale - (n + 1.0) * h).exp2() / (1.0 - (-h).exp2())
    }

    /// Largest coefficient of generation `n`.
    pub fn sup_coefficient(&self, n: usize) -> f64 {
        self.log2_lambda[n].iter().copied().fold(f64::NEG_INFINITY, f64::max).exp2()
    }
}

/// Wavelet leaders of a truncated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderTable {
    pub n_max: u32,
    pub log2_lambda: Vec<Vec<f64>>,
    /// `log2 D_I`: sup of coefficients over `I` and its descendants.
    pub log2_desc: Vec<Vec<f64>>,
    /// `log2 L_I`: sup of `D` over `I` and its two neighbors.
    pub log2_leader: Vec<Vec<f64>>,
    /// Upper bound on `log2` of the ratio between a coefficient beyond
    /// `n_max` and the `D` of its ancestor at `n_max`. A value `<= 0` means
    /// the truncated leaders are exact.
    pub truncation_gap: f64,
}

/// Leaders by a bottom-up max over descendants and a neighbor max.
pub fn leaders(series: &WaveletSeries) -> LeaderTable {
    let lam = &series.log2_lambda;
    let mut desc: Vec<Vec<f64>> = lam.clone();
    for n in (0..lam.len() - 1).rev() {
        let (upper, lower) = desc.split_at_mut(n + 1);
        let row = &mut upper[n];
        for (k, v) in row.iter_mut().enumerate() {
            *v = v.max(lower[0][2 * k]).max(lower[0][2 * k + 1]);
        }
    }
    let leader = desc
        .iter()
        .map(|row| {
            (0..row.len())
                .map(|k| {
                    let mut v = row[k];
                    if k > 0 {
                        v = v.max(row[k - 1]);
                    }
                    if k + 1 < row.len() {
                        v = v.max(row[k + 1]);
                    }
                    v
                })
                .collect()
        })
        .collect();
    LeaderTable { n_max: series.n_max, log2_lambda: lam.clone(), log2_desc: desc, log2_leader: leader, truncation_gap: truncation_gap(series) }
}

/// A child has mass at most its parent's and a smaller `|I|^{gamma1}`, so
/// coefficients beyond `n_max` never exceed their ancestor at `n_max`.
fn truncation_gap(_series: &WaveletSeries) -> f64 {
    0.0
}

/// Per-generation leader scaling function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderTau {
    pub q: Vec<f64>,
    /// `T_n(q) = -log2 sum_{L_I > 0} L_I^q / n` for `n = 1..=n_max`.
    pub per_n: Vec<Vec<f64>>,
    /// Min over the tail half of the generations.
    pub tail_min: Vec<f64>,
    /// `C_n = max log2(L_I / lambda_I)` over `lambda_I > 0`.
    pub window_excess: Vec<f64>,
    /// `E_n = max log2(D_I / lambda_I)` over `D_I > 0`.
    pub descendant_excess: Vec<f64>,
}

impl LeaderTau {
    /// The tail-min as an L^q-function.
    pub fn to_lq(&self) -> Result<LqFunction> {
        LqFunction::new(self.q.clone(), self.tail_min.clone(), Dom::R)
    }

    /// Bound on `|T_n(q) - (gamma1 q + tau_n(gamma2 q))|`:
    /// `(|q| max(C_n, E_n) + log2 3) / n`.
    pub fn bridge_bound(&self, n: usize, q: f64) -> f64 {
        let c = self.window_excess[n - 1].max(self.descendant_excess[n - 1]);
        (q.abs() * c + 3f64.log2()) / n as f64
    }
}

/// `T_n(q)` for every generation; errors on an all-zero generation.
pub fn leader_tau(table: &LeaderTable, q_grid: &[f64]) -> Result<LeaderTau> {
    let mut per_n = Vec::with_capacity(table.n_max as usize);
    let mut window_excess = Vec::new();
    let mut descendant_excess = Vec::new();
    for n in 1..=table.n_max as usize {
        let row = &table.log2_leader[n];
        if row.iter().all(|&v| v == f64::NEG_INFINITY) {
            return Err(Error::InvalidInput(format!("generation {n} has no nonzero leader")));
        }
        let vals: Vec<f64> = q_grid
            .iter()
            .map(|&q| {
                let mut acc = Log2Sum::new();
                for &l in row.iter().filter(|l| l.is_finite()) {
                    acc.add(q * l);
                }
                -acc.value() / n as f64
            })
            .collect();
        per_n.push(vals);
        let lam = &table.log2_lambda[n];
        let excess = |other: &[f64]| {
            lam.iter().zip(other).filter(|(l, _)| l.is_finite()).map(|(l, o)| o - l).fold(0.0, f64::max)
        };
        window_excess.push(excess(row));
        descendant_excess.push(excess(&table.log2_desc[n]));
    }
    let tail = &per_n[per_n.len() / 2..];
    let tail_min = (0..q_grid.len()).map(|i| tail.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min)).collect();
    Ok(LeaderTau { q: q_grid.to_vec(), per_n, tail_min, window_excess, descendant_excess })
}

/// `tau_n(q) = -log2 sum_{mu(I) > 0} mu(I)^q / n` of the source masses.
pub fn measure_tau_n(series: &WaveletSeries, n: usize, q: f64) -> f64 {
    let mut acc = Log2Sum::new();
    for &m in series.log2_mu[n].iter().filter(|m| m.is_finite()) {
        acc.add(q * m);
    }
    -acc.value() / n as f64
}

/// Prediction `gamma1 q + tau_n(gamma2 q)` for `T_n(q)`.
pub fn bridge_prediction(series: &WaveletSeries, n: usize, q: f64) -> f64 {
    series.gamma1 * q + measure_tau_n(series, n, series.gamma2 * q) - q * series.log2_scale / n as f64
}

/// `log2 L(I_n(x)) / -n` for `n = 1..=n_max` with its tail-min.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderProfile {
    pub exponents: Vec<f64>,
    pub tail_min: f64,
}

pub fn holder_profile(table: &LeaderTable, x: f64) -> Result<HolderProfile> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("x = {x} outside [0,1)")));
    }
    let mut exponents = Vec::with_capacity(table.n_max as usize);
    for n in 1..=table.n_max as usize {
        let k = ((x * (1u64 << n) as f64).floor() as usize).min((1 << n) - 1);
        let l = table.log2_leader[n][k];
        if l == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!("x = {x} lies outside the support at generation {n}")));
        }
        exponents.push(-l / n as f64);
    }
    let tail_min = exponents[exponents.len() / 2..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(HolderProfile { exponents, tail_min })
}

/// How the target spectrum is turned into a measure spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "case")]
pub enum SynthCase {
    /// `f` not identically 0: `F = F_{mu, 0, 1/lambda0}`.
    Scale { lambda0: f64, theta: f64 },
    /// `f = 0` on its domain: `F = F_{mu, min dom, 1}`.
    Shift { shift: f64 },
}

/// Recipe for a function with prescribed lower Hölder spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecipe {
    pub case: SynthCase,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Spectrum the measure must realize.
    pub measure_spectrum: SpectrumFunction,
    /// A fixed point of `measure_spectrum`, the exact dimension of the measure.
    pub fixed_point: f64,
}

/// `theta(lambda) = sup { f(h) / (lambda h) : h in dom f }` with `x / inf = 0`.
pub fn theta(f: &SpectrumFunction, lambda: f64) -> f64 {
    let mut best: f64 = 0.0;
    for p in f.pieces() {
        for &(h, v) in &p.knots {
            if h > 0.0 {
                best = best.max(v / (lambda * h));
            }
        }
    }
    for &(h, v) in f.points() {
        if h > 0.0 {
            best = best.max(v / (lambda * h));
        }
    }
    best
}

fn map_abscissae(f: &SpectrumFunction, map: impl Fn(f64) -> f64) -> Result<SpectrumFunction> {
    let pieces = f
        .pieces()
        .iter()
        .map(|p| Piece::new(map(p.a), if p.b.is_finite() { map(p.b) } else { p.b }, p.knots.iter().map(|&(x, y)| (map(x), y)).collect()))
        .collect::<Result<Vec<_>>>()?;
    let points = f.points().iter().map(|&(x, y)| (map(x), y)).collect();
    SpectrumFunction::new(pieces, points, f.infinity(), f.d())
}

/// Finds `lambda0` with `theta(lambda0) = 1` by bisection, or the shift case.
pub fn synth_from_spectrum(f: &SpectrumFunction) -> Result<SynthRecipe> {
    if f.d() != 1 {
        return Err(Error::DimensionMismatch(1, f.d()));
    }
    let lo = f.dom_min().ok_or_else(|| Error::EmptyDomain("f has an empty domain".into()))?;
    if !(lo > 0.0 && lo.is_finite()) {
        return Err(Error::InvalidInput(format!("min dom f = {lo} must lie in (0, inf)")));
    }
    let sup = f.sup_finite().max(if f.has_infinity() { f.infinity() } else { f64::NEG_INFINITY });
    if sup > 1.0 + TOL || f.pieces().iter().flat_map(|p| &p.knots).any(|k| k.1 < -TOL) || f.points().iter().any(|p| p.1 < -TOL) {
        return Err(Error::InvalidInput("f must take values in [0, 1]".into()));
    }
    let (case, gamma1, gamma2, g) = if f.sup_finite() <= TOL {
        let g = map_abscissae(f, |x| x - lo)?;
        (SynthCase::Shift { shift: lo }, lo, 1.0, g)
    } else {
        // theta is decreasing in lambda, theta(1/lo) <= 1 and theta -> inf at 0+.
        let mut a = 0.0;
        let mut b = 1.0 / lo;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if theta(f, mid) > 1.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let lambda0 = b;
        let th = theta(f, lambda0);
        let g = map_abscissae(f, |x| lambda0 * x)?;
        (SynthCase::Scale { lambda0, theta: th }, 0.0, 1.0 / lambda0, g)
    };
    let fix = fixed_points(&g);
    let fixed_point = fix.first().map(|c| c.lo).ok_or_else(|| Error::InvalidInput("the rescaled spectrum has no fixed point".into()))?;
    Ok(SynthRecipe { case, gamma1, gamma2, measure_spectrum: g, fixed_point })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::uniform_grid;

    fn binomial_table(p: f64, n: u32) -> Vec<f64> {
        (0..1u64 << n).map(|k| {
            let ones = k.count_ones() as f64;
            ones * p.log2() + (n as f64 - ones) * (1.0 - p).log2()
        }).collect()
    }

    fn brute_leader(t: &LeaderTable, n: usize, k: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for j in n..=t.n_max as usize {
            let shift = j - n;
            for kk in 0..(1usize << j) {
                let anc = kk >> shift;
                if anc + 1 >= k && anc <= k + 1 {
                    best = best.max(t.log2_lambda[j][kk]);
                }
            }
        }
        best
    }

    #[test]
    fn mother_wavelet_shape() {
        assert_eq!(mother(0.25), 1.0);
        assert_eq!(mother(0.75), -1.0);
        assert_eq!(mother(0.0), 0.0);
        assert_eq!(mother(1.0), 0.0);
        assert_eq!(mother(1.5), 0.0);
    }

    #[test]
    fn single_coefficient_leaders() {
        let n = 6u32;
        let mut table = vec![f64::NEG_INFINITY; 1 << n];
        table[20] = 0.0;
        let s = WaveletSeries::from_table(&table, 0.0, 1.0).unwrap();
        let t = leaders(&s);
        for g in 0..=n as usize {
            for k in 0..(1usize << g) {
                assert_eq!(t.log2_leader[g][k], brute_leader(&t, g, k));
            }
        }
        assert_eq!(t.log2_leader[n as usize][21], 0.0);
        assert_eq!(t.log2_leader[n as usize][22], f64::NEG_INFINITY);
        let xs = [20.25 / 64.0, 20.75 / 64.0, 0.9];
        let f = s.evaluate(&xs);
        for (x, v) in xs.iter().zip(&f) {
            let direct: f64 = (0..=n)
                .map(|g| {
                    let t = x * (1u64 << g) as f64;
                    let k = t.floor();
                    if (k as u64) == (20 >> (n - g)) { mother(t - k) } else { 0.0 }
                })
                .sum();
            assert!((v - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn leaders_match_brute_force() {
        let n = 10u32;
        let mut state = 12345u64;
        let table: Vec<f64> = (0..1u64 << n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if state >> 61 == 0 { f64::NEG_INFINITY } else { -((state >> 11) as f64 / (1u64 << 53) as f64) * 20.0 }
            })
            .collect();
        let s = WaveletSeries::from_table(&table, 0.3, 0.7).unwrap();
        let t = leaders(&s);
        for g in 0..=n as usize {
            for k in 0..(1usize << g) {
                assert_eq!(t.log2_leader[g][k], brute_leader(&t, g, k));
                if g > 0 {
                    assert!(t.log2_leader[g][k] <= t.log2_leader[g - 1][k / 2]);
                }
            }
        }
    }

    #[test]
    fn monofractal_leader_tau() {
        let n = 10;
        let s = WaveletSeries::from_table(&vec![-(n as f64); 1 << n], 0.2, 0.5).unwrap();
        let t = leaders(&s);
        let q = uniform_grid(-2.0, 2.0, 0.5);
        let lt = leader_tau(&t, &q).unwrap();
        let h = 0.2 + 0.5;
        for row in &lt.per_n {
            for (qq, v) in q.iter().zip(row) {
                assert!((v - (h * qq - 1.0)).abs() < 1e-12);
            }
        }
        let hp = holder_profile(&t, 0.3).unwrap();
        assert!(hp.exponents.iter().all(|e| (e - h).abs() < 1e-12));
    }

    #[test]
    fn bridge_and_scaling() {
        let s = WaveletSeries::from_table(&binomial_table(0.3, 12), 0.25, 0.8).unwrap();
        for (n, row) in s.log2_lambda.iter().enumerate() {
            for (l, m) in row.iter().zip(&s.log2_mu[n]) {
                assert!((l - (-(n as f64) * 0.25 + 0.8 * m)).abs() < 1e-12);
            }
        }
        let q = uniform_grid(-3.0, 3.0, 0.5);
        let t = leaders(&s);
        let lt = leader_tau(&t, &q).unwrap();
        assert!(lt.descendant_excess.iter().all(|&e| e == 0.0));
        for n in 1..=12 {
            for (i, &qq) in q.iter().enumerate() {
                let gap = (lt.per_n[n - 1][i] - bridge_prediction(&s, n, qq)).abs();
                assert!(gap <= lt.bridge_bound(n, qq) + 1e-12);
            }
        }
        let c = 3.5;
        let lt2 = leader_tau(&leaders(&s.scaled(c).unwrap()), &q).unwrap();
        for n in 1..=12 {
            for (i, &qq) in q.iter().enumerate() {
                let want = lt.per_n[n - 1][i] - qq * c.log2() / n as f64;
                assert!((lt2.per_n[n - 1][i] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bridge_bound_on_sparse_support() {
        let mut table = binomial_table(0.3, 10);
        for (k, v) in table.iter_mut().enumerate() {
            if k % 3 != 0 {
                *v = f64::NEG_INFINITY;
            }
        }
        let s = WaveletSeries::from_table(&table, 0.2, 1.5).unwrap();
        let q = uniform_grid(-3.0, 3.0, 0.5);
        let lt = leader_tau(&leaders(&s), &q).unwrap();
        for n in 1..=10 {
            assert!(lt.window_excess[n - 1].is_finite());
            for (i, &qq) in q.iter().enumerate() {
                let gap = (lt.per_n[n - 1][i] - bridge_prediction(&s, n, qq)).abs();
                assert!(gap <= lt.bridge_bound(n, qq) + 1e-12, "n={n} q={qq}");
            }
        }
    }

    #[test]
    fn evaluation_tail_bound() {
        let fine = WaveletSeries::from_table(&binomial_table(0.3, 12), 0.5, 1.0).unwrap();
        let coarse = WaveletSeries::from_table(&binomial_table(0.3, 8), 0.5, 1.0).unwrap();
        let xs = uniform_grid(0.0, 1.0, 1.0 / 512.0);
        let a = fine.evaluate(&xs);
        let b = coarse.evaluate(&xs);
        let sup = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let sum: f64 = (9..=12).map(|n| fine.sup_coefficient(n)).sum();
        assert!(sup <= sum + 1e-15);
        assert!(sup <= coarse.tail_bound());
        let zero = WaveletSeries::from_table(&vec![f64::NEG_INFINITY; 8], 0.5, 1.0).unwrap();
        assert!(zero.evaluate(&xs).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synth_cases() {
        let f = SpectrumFunction::point(0.7, 0.7, 1).unwrap();
        let r = synth_from_spectrum(&f).unwrap();
        match r.case {
            SynthCase::Scale { lambda0, theta } => {
                assert!((lambda0 - 1.0).abs() < 1e-12);
                assert!((theta - 1.0).abs() < 1e-10);
            }
            _ => panic!("expected the scale case"),
        }
        assert!((r.fixed_point - 0.7).abs() < 1e-12);
        let z = SpectrumFunction::point(0.4, 0.0, 1).unwrap();
        let r = synth_from_spectrum(&z).unwrap();
        assert_eq!(r.case, SynthCase::Shift { shift: 0.4 });
        assert_eq!((r.gamma1, r.gamma2, r.fixed_point), (0.4, 1.0, 0.0));
        let tent = SpectrumFunction::tent(0.5, 1.0, 1.5, 1.0, 1).unwrap();
        let r = synth_from_spectrum(&tent).unwrap();
        let SynthCase::Scale { lambda0, theta } = r.case else { panic!() };
        assert!((theta - 1.0).abs() < 1e-10);
        assert!((lambda0 - 1.0).abs() < 1e-10);
        let half = SpectrumFunction::tent(1.0, 2.0, 3.0, 0.5, 1).unwrap();
        let r = synth_from_spectrum(&half).unwrap();
        let SynthCase::Scale { lambda0, theta } = r.case else { panic!() };
        assert!((theta - 1.0).abs() < 1e-10);
        assert!((lambda0 - 0.25).abs() < 1e-10);
        assert!((r.gamma2 - 4.0).abs() < 1e-8);
        assert!(synth_from_spectrum(&SpectrumFunction::point(0.0, 0.0, 1).unwrap()).is_err());
    }
}
