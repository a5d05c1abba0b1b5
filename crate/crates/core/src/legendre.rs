//! Extended concave Legendre-Fenchel transforms on `R` and `R ∪ {∞}`,
//! validation of candidate L^q-spectra and spectra, and the closed-form
//! dimension predictors for level sets of prescribed measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_ext::{unwrap, wrap, Ext};

/// Comparison tolerance for grid-level equalities.
pub const TOL: f64 = 1e-9;

/// Uniform grid `min, min + step, ..., <= max`; values within `1e-12` of an
/// integer multiple of `step` are snapped onto it so that `0` and `1` are hit
/// exactly.
pub fn uniform_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && max >= min, "invalid grid");
    let count = ((max - min) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| {
            let x = min + i as f64 * step;
            let k = (x / step).round();
            let snapped = k * step;
            let y = if (snapped - x).abs() < 1e-9 * step { snapped } else { x };
            let r = y.round();
            if (r - y).abs() < 1e-12 {
                r
            } else {
                y
            }
        })
        .collect()
}

/// Domain of an L^q-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dom {
    #[serde(rename = "R")]
    R,
    #[serde(rename = "R+")]
    RPlus,
}

/// A sampled `tau`: strictly increasing `q` grid, values in `R ∪ {-inf}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LqJson", into = "LqJson")]
pub struct LqFunction {
    q: Vec<f64>,
    tau: Vec<f64>,
    dom: Dom,
}

#[derive(Serialize, Deserialize)]
struct LqJson {
    q: Vec<f64>,
    tau: Vec<Ext>,
    dom: Dom,
}

impl TryFrom<LqJson> for LqFunction {
    type Error = Error;
    fn try_from(j: LqJson) -> Result<Self> {
        LqFunction::new(j.q, unwrap(&j.tau), j.dom)
    }
}

impl From<LqFunction> for LqJson {
    fn from(f: LqFunction) -> Self {
        LqJson { tau: wrap(&f.tau), q: f.q, dom: f.dom }
    }
}

impl LqFunction {
    pub fn new(q: Vec<f64>, tau: Vec<f64>, dom: Dom) -> Result<Self> {
        if q.len() != tau.len() {
            return Err(Error::InvalidInput(format!("{} grid points but {} values", q.len(), tau.len())));
        }
        if q.is_empty() {
            return Err(Error::EmptyDomain("empty q grid".into()));
        }
        if q.iter().any(|x| !x.is_finite()) || q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("q grid must be finite and strictly increasing".into()));
        }
        if tau.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
            return Err(Error::InvalidInput("tau values must lie in R ∪ {-inf}".into()));
        }
        let mut tau = tau;
        if dom == Dom::RPlus {
            for (qi, ti) in q.iter().zip(tau.iter_mut()) {
                if *qi < 0.0 {
                    *ti = f64::NEG_INFINITY;
                }
            }
        }
        Ok(Self { q, tau, dom })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.tau
    }

    pub fn dom(&self) -> Dom {
        self.dom
    }

    pub fn index_of(&self, q: f64) -> Option<usize> {
        self.q.iter().position(|&x| x == q)
    }

    /// Piecewise-linear interpolation; `-inf` outside the grid or the domain.
    pub fn eval(&self, q: f64) -> f64 {
        let n = self.q.len();
        if q < self.q[0] || q > self.q[n - 1] {
            return f64::NEG_INFINITY;
        }
        let i = self.q.partition_point(|&x| x < q);
        if self.q[i] == q {
            return self.tau[i];
        }
        let (q0, q1, t0, t1) = (self.q[i - 1], self.q[i], self.tau[i - 1], self.tau[i]);
        if t0 == f64::NEG_INFINITY || t1 == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        t0 + (t1 - t0) * (q - q0) / (q1 - q0)
    }

    /// Indices carrying finite values inside the domain.
    fn finite_indices(&self) -> Vec<usize> {
        (0..self.q.len())
            .filter(|&i| self.tau[i].is_finite() && (self.dom == Dom::R || self.q[i] >= 0.0))
            .collect()
    }

    /// Largest spacing of the grid.
    pub fn spacing(&self) -> f64 {
        self.q.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// One closed piece `[a, b]` carrying a piecewise-linear function given by
/// its knots. `b = +inf` means the last knot value extends as a constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub knots: Vec<(f64, f64)>,
}

impl Piece {
    pub fn new(a: f64, b: f64, knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("piece [{a},{b}]: {m}")));
        if !(a.is_finite() && a >= 0.0 && b >= a) {
            return bad("interval must satisfy 0 <= a <= b");
        }
        if knots.is_empty() {
            return bad("no knots");
        }
        if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
            return bad("knots must be finite");
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("knot abscissae must increase strictly");
        }
        if knots[0].0 != a {
            return bad("first knot must sit at a");
        }
        let last = knots[knots.len() - 1].0;
        if (b.is_finite() && last != b) || (!b.is_finite() && last < a) {
            return bad("last knot must sit at b");
        }
        Ok(Self { a, b, knots })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b && x.is_finite()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        let k = &self.knots;
        let last = k[k.len() - 1];
        if x >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|p| p.0 <= x);
        let (x0, v0) = k[i - 1];
        let (x1, v1) = k[i];
        if x == x0 {
            return v0;
        }
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    fn slopes(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }

    pub fn is_concave(&self) -> bool {
        let s = self.slopes();
        let tail_ok = self.b.is_finite() || s.last().is_none_or(|&x| x >= -TOL);
        tail_ok && s.windows(2).all(|w| w[1] <= w[0] + TOL * (1.0 + w[0].abs()))
    }
}

/// A spectrum on `[0,∞] ∪ {∞}`: finitely many pieces, isolated points and the
/// value at `∞` (`-inf` when `∞` is off the domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumJson", into = "SpectrumJson")]
pub struct SpectrumFunction {
    pieces: Vec<Piece>,
    points: Vec<(f64, f64)>,
    infinity: f64,
    d: usize,
}

#[derive(Serialize, Deserialize)]
struct PieceJson {
    interval: [Ext; 2],
    knots: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    #[serde(default)]
    pieces: Vec<PieceJson>,
    #[serde(default)]
    points: Vec<[f64; 2]>,
    #[serde(default = "neg_inf_ext")]
    infinity: Ext,
    d: usize,
}

fn neg_inf_ext() -> Ext {
    Ext(f64::NEG_INFINITY)
}

impl TryFrom<SpectrumJson> for SpectrumFunction {
    type Error = Error;
    fn try_from(j: SpectrumJson) -> Result<Self> {
        let pieces = j
            .pieces
            .into_iter()
            .map(|p| Piece::new(p.interval[0].0, p.interval[1].0, p.knots.iter().map(|k| (k[0], k[1])).collect()))
            .collect::<Result<Vec<_>>>()?;
        SpectrumFunction::new(pieces, j.points.iter().map(|p| (p[0], p[1])).collect(), j.infinity.0, j.d)
    }
}

impl From<SpectrumFunction> for SpectrumJson {
    fn from(f: SpectrumFunction) -> Self {
        let infinity = if f.infinity == f64::NEG_INFINITY { Ext(f64::NEG_INFINITY) } else { Ext(f.infinity) };
        SpectrumJson {
            pieces: f
                .pieces
                .iter()
                .map(|p| PieceJson { interval: [Ext(p.a), Ext(p.b)], knots: p.knots.iter().map(|k| [k.0, k.1]).collect() })
                .collect(),
            points: f.points.iter().map(|p| [p.0, p.1]).collect(),
            infinity,
            d: f.d,
        }
    }
}

impl SpectrumFunction {
    pub fn new(mut pieces: Vec<Piece>, mut points: Vec<(f64, f64)>, infinity: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("d must be positive".into()));
        }
        if infinity.is_nan() || infinity == f64::INFINITY {
            return Err(Error::InvalidInput("value at infinity must be finite or -inf".into()));
        }
        if points.iter().any(|p| !(p.0.is_finite() && p.0 >= 0.0 && p.1.is_finite())) {
            return Err(Error::InvalidInput("isolated points must be finite with alpha >= 0".into()));
        }
        pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
        if pieces.windows(2).any(|w| w[1].a < w[0].b) {
            return Err(Error::InvalidInput("pieces overlap".into()));
        }
        points.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Self { pieces, points, infinity, d })
    }

    /// Tent: linear from `(a, 0)` to `(peak, peak_value)` to `(b, 0)`.
    pub fn tent(a: f64, peak: f64, b: f64, peak_value: f64, d: usize) -> Result<Self> {
        let piece = Piece::new(a, b, vec![(a, 0.0), (peak, peak_value), (b, 0.0)])?;
        Self::new(vec![piece], vec![], f64::NEG_INFINITY, d)
    }

    /// Single point `{alpha -> value}`.
    pub fn point(alpha: f64, value: f64, d: usize) -> Result<Self> {
        Self::new(vec![], vec![(alpha, value)], f64::NEG_INFINITY, d)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn infinity(&self) -> f64 {
        self.infinity
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_infinity(&self) -> bool {
        self.infinity > f64::NEG_INFINITY
    }

    /// `f(alpha)`, `-inf` off the domain; `alpha = +inf` reads the infinity slot.
    pub fn eval(&self, alpha: f64) -> f64 {
        if alpha == f64::INFINITY {
            return self.infinity;
        }
        let mut v = f64::NEG_INFINITY;
        for p in &self.pieces {
            v = v.max(p.eval(alpha));
        }
        for &(x, y) in &self.points {
            if x == alpha {
                v = v.max(y);
            }
        }
        v
    }

    pub fn contains(&self, alpha: f64) -> bool {
        self.eval(alpha) > f64::NEG_INFINITY
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty() && self.points.is_empty() && !self.has_infinity()
    }

    /// `min dom(f)`; `None` for an empty domain.
    pub fn dom_min(&self) -> Option<f64> {
        let a = self.pieces.first().map(|p| p.a);
        let b = self.points.first().map(|p| p.0);
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) => x.or(if self.has_infinity() { Some(f64::INFINITY) } else { None }),
            (None, y) => y,
        }
    }

    /// `max dom(f)`, `+inf` when `∞` is in the domain or a piece is unbounded.
    pub fn dom_max(&self) -> Option<f64> {
        if self.has_infinity() {
            return Some(f64::INFINITY);
        }
        let a = self.pieces.last().map(|p| p.b);
        let b = self.points.last().map(|p| p.0);
        match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        }
    }

    /// All abscissae where the function can change slope, plus isolated points.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.pieces.iter().flat_map(|p| p.knots.iter().map(|k| k.0)).collect();
        xs.extend(self.points.iter().map(|p| p.0));
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// `sup f` over the finite part of the domain.
    pub fn sup_finite(&self) -> f64 {
        let a = self.pieces.iter().flat_map(|p| p.knots.iter().map(|k| k.1)).fold(f64::NEG_INFINITY, f64::max);
        self.points.iter().map(|p| p.1).fold(a, f64::max)
    }

    /// Concave on every piece, with connected finite domain.
    pub fn is_concave(&self) -> bool {
        self.pieces.iter().all(Piece::is_concave)
    }

    /// Whether `[lo, hi]` (with `hi` possibly `+inf`) lies inside the domain.
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        if hi == f64::INFINITY && !self.has_infinity() {
            return false;
        }
        if lo == f64::INFINITY {
            return self.has_infinity();
        }
        if lo == hi {
            return self.contains(lo);
        }
        let mut reach = lo;
        for p in &self.pieces {
            if p.a <= reach && p.b >= reach {
                reach = p.b;
                if reach >= hi {
                    return true;
                }
            }
        }
        false
    }

    /// Whether the domain meets `[lo, hi]`.
    pub fn meets(&self, lo: f64, hi: f64) -> bool {
        if hi == f64::INFINITY && self.has_infinity() {
            return true;
        }
        self.pieces.iter().any(|p| p.a <= hi && p.b >= lo) || self.points.iter().any(|p| p.0 >= lo && p.0 <= hi)
    }
}

/// Result of [`conjugate_tau`]/[`conjugate_f`] chains: `tau* ` on the given grid.
///
/// `tau*(alpha) = inf_q (alpha q - tau(q))` over the finite grid values inside
/// `dom(tau)`, restricted to the slope range where the infimum is interior.
/// In case (2)(c) the right limit `tau(0+)` replaces `tau(0)` for finite `alpha`.
pub fn conjugate_tau(tau: &LqFunction, alpha_grid: &[f64], d: usize) -> Result<SpectrumFunction> {
    conjugate_tau_with(tau, alpha_grid, d, ConjugateMethod::Direct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugateMethod {
    /// `O(|alpha| |q|)` scan, the reference implementation.
    Direct,
    /// Monotone pointer walk; valid for concave `tau`.
    Chain,
}

pub fn conjugate_tau_with(tau: &LqFunction, alpha_grid: &[f64], d: usize, method: ConjugateMethod) -> Result<SpectrumFunction> {
    let idx = tau.finite_indices();
    if idx.is_empty() {
        return Err(Error::EmptyDomain("tau has no finite value in its domain".into()));
    }
    let mut qs: Vec<f64> = idx.iter().map(|&i| tau.q[i]).collect();
    let mut ts: Vec<f64> = idx.iter().map(|&i| tau.tau[i]).collect();
    let zero = zero_behavior(tau);
    if tau.dom == Dom::RPlus {
        if let (Some(z), Some(pos)) = (zero.as_ref(), qs.iter().position(|&x| x == 0.0)) {
            if z.jump {
                ts[pos] = z.tau0_plus;
            }
        }
    }
    let n = qs.len();
    let first_slope = if n > 1 { (ts[1] - ts[0]) / (qs[1] - qs[0]) } else { f64::INFINITY };
    let last_slope = if n > 1 { (ts[n - 1] - ts[n - 2]) / (qs[n - 1] - qs[n - 2]) } else { f64::NEG_INFINITY };
    let lo = last_slope.max(0.0);
    let hi = if tau.dom == Dom::RPlus && qs[0] == 0.0 { f64::INFINITY } else { first_slope };
    if n == 1 {
        // A single sample gives the affine minorant alpha q0 - tau(q0) on [0, inf).
        qs.push(qs[0]);
        ts.push(ts[0]);
    }
    let eval_direct = |a: f64| qs.iter().zip(&ts).map(|(q, t)| a * q - t).fold(f64::INFINITY, f64::min);
    let mut alphas: Vec<f64> = alpha_grid.iter().copied().filter(|a| a.is_finite() && *a >= lo && *a <= hi).collect();
    if lo.is_finite() {
        alphas.push(lo);
    }
    if hi.is_finite() {
        alphas.push(hi);
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    if alphas.is_empty() {
        return Err(Error::EmptyDomain("alpha grid misses the slope range of tau".into()));
    }
    let values: Vec<f64> = match method {
        ConjugateMethod::Direct => alphas.par_iter().map(|&a| eval_direct(a)).collect(),
        ConjugateMethod::Chain => {
            let mut out = Vec::with_capacity(alphas.len());
            let mut i = qs.len() - 1;
            for &a in &alphas {
                let val = |j: usize| a * qs[j] - ts[j];
                while i > 0 && val(i - 1) <= val(i) {
                    i -= 1;
                }
                out.push(val(i));
            }
            out
        }
    };
    let knots: Vec<(f64, f64)> = alphas.iter().copied().zip(values).collect();
    let a = knots[0].0;
    let top = knots[knots.len() - 1].0;
    // The constant tail beyond the first secant slope is exact for dom R+.
    let b = if hi == f64::INFINITY && top >= first_slope { f64::INFINITY } else { top };
    let piece = Piece::new(a, if b.is_finite() { top } else { b }, knots)?;
    let infinity = match tau.dom {
        Dom::RPlus => -tau.eval(0.0),
        Dom::R => f64::NEG_INFINITY,
    };
    SpectrumFunction::new(vec![piece], vec![], infinity, d)
}

/// `f*(q) = inf_alpha (q alpha - f(alpha))` with `q ∞ = sign(q) ∞`, `0 ∞ = 0`.
pub fn conjugate_f(f: &SpectrumFunction, q_grid: &[f64]) -> Result<LqFunction> {
    if f.pieces.is_empty() && f.points.is_empty() {
        return Err(Error::EmptyDomain("spectrum has no finite domain".into()));
    }
    let mut cand: Vec<(f64, f64)> = f.pieces.iter().flat_map(|p| p.knots.iter().copied()).collect();
    cand.extend(f.points.iter().copied());
    let unbounded: Vec<f64> = f.pieces.iter().filter(|p| !p.b.is_finite()).map(|p| p.knots[p.knots.len() - 1].1).collect();
    let rplus = f.has_infinity() || !unbounded.is_empty();
    let values = q_grid
        .par_iter()
        .map(|&q| {
            if rplus && q < 0.0 {
                return f64::NEG_INFINITY;
            }
            let mut v = cand.iter().map(|(a, y)| q * a - y).fold(f64::INFINITY, f64::min);
            if q == 0.0 && f.has_infinity() {
                v = v.min(-f.infinity);
            }
            v
        })
        .collect();
    LqFunction::new(q_grid.to_vec(), values, if rplus { Dom::RPlus } else { Dom::R })
}

/// Classification of a valid `tau` per the structure of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauCase {
    /// `dom = R`.
    #[serde(rename = "1")]
    Case1,
    /// `dom = R+`, `tau ≡ 0`.
    #[serde(rename = "2a")]
    Case2a,
    /// `dom = R+`, `tau(0) < 0`, continuous at `0+`.
    #[serde(rename = "2b")]
    Case2b,
    /// `dom = R+`, `tau(0) < 0`, jump at `0+`.
    #[serde(rename = "2c")]
    Case2c,
}

#[derive(Debug, Clone, PartialEq)]
struct ZeroBehavior {
    jump: bool,
    tau0_plus: f64,
    threshold: f64,
}

/// Grid test of continuity at `0+`: jump when `tau(q1) - tau(0)` exceeds
/// `10 h` times the slope of the next cell.
fn zero_behavior(tau: &LqFunction) -> Option<ZeroBehavior> {
    let i0 = tau.index_of(0.0)?;
    let (q1, q2) = (*tau.q.get(i0 + 1)?, tau.q.get(i0 + 2).copied());
    let (t0, t1) = (tau.tau[i0], tau.tau[i0 + 1]);
    let slope = match q2 {
        Some(q2) => ((tau.tau[i0 + 2] - t1) / (q2 - q1)).abs(),
        None => (t1 - t0).abs() / q1,
    };
    let threshold = 10.0 * q1 * slope.max(TOL);
    let jump = t1 - t0 > threshold;
    let tau0_plus = match q2 {
        Some(q2) if jump => t1 - q1 * (tau.tau[i0 + 2] - t1) / (q2 - q1),
        _ => t0,
    };
    Some(ZeroBehavior { jump, tau0_plus, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub valid: bool,
    pub violations: Vec<String>,
    pub case: Option<TauCase>,
    /// `[tau'(1+), tau'(1-)]` from one-sided secants.
    pub fix: Option<(f64, f64)>,
    /// Jump threshold used at `0+` (dom R+ only).
    pub jump_threshold: Option<f64>,
}

/// Checks `tau(1) = 0`, `-d <= tau(0) <= 0`, concavity, monotonicity and the
/// domain flag, then classifies the case and reports `Fix(tau*)`.
pub fn validate_tau(tau: &LqFunction, d: usize) -> Result<TauReport> {
    let i0 = tau.index_of(0.0).ok_or(Error::MissingGridPoint(0.0))?;
    let i1 = tau.index_of(1.0).ok_or(Error::MissingGridPoint(1.0))?;
    let mut v = Vec::new();
    let t1 = tau.tau[i1];
    let t0 = tau.tau[i0];
    if !(t1.abs() <= TOL) {
        v.push("τ(1)≠0".to_string());
    }
    if !(t0 >= -(d as f64) - TOL && t0 <= TOL) {
        v.push(format!("τ(0)={t0} outside [-d,0]"));
    }
    let idx = tau.finite_indices();
    if tau.dom == Dom::R && idx.len() != tau.q.len() {
        v.push("dom R with -inf value".to_string());
    }
    if tau.dom == Dom::RPlus && tau.q.iter().zip(&tau.tau).any(|(q, t)| *q >= 0.0 && !t.is_finite()) {
        v.push("dom R+ with -inf value at q >= 0".to_string());
    }
    let pts: Vec<(f64, f64)> = idx.iter().map(|&i| (tau.q[i], tau.tau[i])).collect();
    if pts.windows(2).any(|w| w[1].1 < w[0].1 - TOL) {
        v.push("τ not non-decreasing".to_string());
    }
    let slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let zero = zero_behavior(tau);
    // The first cell of dom R+ may carry the jump at 0+.
    let skip = usize::from(tau.dom == Dom::RPlus && zero.as_ref().is_some_and(|z| z.jump));
    if slopes.iter().skip(skip).collect::<Vec<_>>().windows(2).any(|w| *w[1] > *w[0] + TOL * (1.0 + w[0].abs())) {
        v.push("τ not concave".to_string());
    }
    let case = match tau.dom {
        Dom::R => TauCase::Case1,
        Dom::RPlus if t0.abs() <= TOL => TauCase::Case2a,
        Dom::RPlus if zero.as_ref().is_some_and(|z| z.jump) => TauCase::Case2c,
        Dom::RPlus => TauCase::Case2b,
    };
    let right = tau.q.get(i1 + 1).map(|&q| (tau.tau[i1 + 1] - t1) / (q - 1.0));
    let left = if i1 > 0 && tau.tau[i1 - 1].is_finite() { Some((t1 - tau.tau[i1 - 1]) / (1.0 - tau.q[i1 - 1])) } else { None };
    let fix = match (right, left) {
        (Some(r), Some(l)) => Some((r, l)),
        _ => None,
    };
    let valid = v.is_empty();
    Ok(TauReport {
        valid,
        violations: v,
        case: if valid { Some(case) } else { None },
        fix,
        jump_threshold: if tau.dom == Dom::RPlus { zero.map(|z| z.threshold) } else { None },
    })
}

/// A connected component of `Fix(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixComponent {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub valid: bool,
    pub violations: Vec<String>,
    pub fix: Vec<FixComponent>,
}

/// `Fix(f) = {alpha : f(alpha) = alpha}`, merged into components.
pub fn fixed_points(f: &SpectrumFunction) -> Vec<FixComponent> {
    let mut comps: Vec<FixComponent> = Vec::new();
    let zero = |x: f64, y: f64| (y - x).abs() <= TOL * (1.0 + x.abs());
    for p in &f.pieces {
        for w in p.knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let (g0, g1) = (y0 - x0, y1 - x1);
            match (zero(x0, y0), zero(x1, y1)) {
                (true, true) => comps.push(FixComponent { lo: x0, hi: x1 }),
                (true, false) => comps.push(FixComponent { lo: x0, hi: x0 }),
                (false, true) => comps.push(FixComponent { lo: x1, hi: x1 }),
                (false, false) if g0 * g1 < 0.0 => {
                    let x = x0 + (x1 - x0) * g0 / (g0 - g1);
                    comps.push(FixComponent { lo: x, hi: x });
                }
                _ => {}
            }
        }
        if p.knots.len() == 1 && zero(p.knots[0].0, p.knots[0].1) {
            comps.push(FixComponent { lo: p.a, hi: p.a });
        }
        if !p.b.is_finite() {
            let (x, y) = p.knots[p.knots.len() - 1];
            if y >= x - TOL && zero(y, y) {
                comps.push(FixComponent { lo: y, hi: y });
            }
        }
    }
    for &(x, y) in &f.points {
        if zero(x, y) {
            comps.push(FixComponent { lo: x, hi: x });
        }
    }
    comps.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut merged: Vec<FixComponent> = Vec::new();
    for c in comps {
        match merged.last_mut() {
            Some(m) if c.lo <= m.hi + TOL => m.hi = m.hi.max(c.hi),
            _ => merged.push(c),
        }
    }
    merged
}

/// Checks `0 <= f <= min(id, d)` on the domain and `Fix(f) ≠ ∅`.
pub fn validate_spectrum(f: &SpectrumFunction) -> SpectrumReport {
    let mut v = Vec::new();
    let d = f.d as f64;
    let mut vals: Vec<(f64, f64)> = f.pieces.iter().flat_map(|p| p.knots.iter().copied()).collect();
    vals.extend(f.points.iter().copied());
    if vals.iter().any(|&(x, y)| y > x + TOL * (1.0 + x)) {
        v.push("f > id somewhere".to_string());
    }
    if vals.iter().any(|&(_, y)| y > d + TOL) || f.infinity > d + TOL {
        v.push("f > d somewhere".to_string());
    }
    if vals.iter().any(|&(_, y)| y < -TOL) || (f.has_infinity() && f.infinity < -TOL) {
        v.push("f < 0 somewhere".to_string());
    }
    if f.is_empty() {
        v.push("empty domain".to_string());
    }
    let fix = fixed_points(f);
    if fix.is_empty() {
        v.push("Fix(f) empty".to_string());
    }
    SpectrumReport { valid: v.is_empty(), violations: v, fix }
}

/// Maximum of `f` over `[alpha, beta]` with its leftmost maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub value: f64,
    pub argmax: Option<f64>,
}

pub fn envelope(f: &SpectrumFunction, alpha: f64, beta: f64) -> Result<Envelope> {
    if alpha > beta || alpha.is_nan() || beta.is_nan() {
        return Err(Error::InvalidInput(format!("envelope needs alpha <= beta, got [{alpha},{beta}]")));
    }
    let mut cand: Vec<(f64, f64)> = Vec::new();
    for p in &f.pieces {
        let lo = p.a.max(alpha);
        let hi = p.b.min(beta);
        if lo > hi || lo == f64::INFINITY {
            continue;
        }
        cand.push((lo, p.eval(lo)));
        if hi.is_finite() {
            cand.push((hi, p.eval(hi)));
        }
        cand.extend(p.knots.iter().copied().filter(|k| k.0 > lo && k.0 < hi));
    }
    cand.extend(f.points.iter().copied().filter(|p| p.0 >= alpha && p.0 <= beta));
    if beta == f64::INFINITY && f.has_infinity() {
        cand.push((f64::INFINITY, f.infinity));
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = Envelope { value: f64::NEG_INFINITY, argmax: None };
    for (x, y) in cand {
        if y > best.value {
            best = Envelope { value: y, argmax: Some(x) };
        }
    }
    Ok(best)
}

/// Predicted dimensions of `E(mu, alpha, beta)`, `E_lower(mu, alpha)` and
/// `E_upper(mu, beta)` for a measure with lower spectrum `f` and upper spectrum `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimPrediction {
    #[serde(with = "ext_field")]
    pub dim_h_e: f64,
    #[serde(with = "ext_field")]
    pub dim_p_e: f64,
    #[serde(with = "ext_field")]
    pub dim_h_lower: f64,
    #[serde(with = "ext_field")]
    pub dim_h_upper: f64,
    #[serde(with = "ext_field")]
    pub dim_p_lower: f64,
    #[serde(with = "ext_field")]
    pub dim_p_upper: f64,
}

mod ext_field {
    use crate::serde_ext::Ext;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        Ext(*x).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Ext::deserialize(d)?.0)
    }
}

impl DimPrediction {
    pub fn entries(&self) -> [f64; 6] {
        [self.dim_h_e, self.dim_p_e, self.dim_h_lower, self.dim_h_upper, self.dim_p_lower, self.dim_p_upper]
    }
}

/// `f <= g` on `dom(f)` (hence `dom(f) ⊆ dom(g)`).
pub fn dominated(f: &SpectrumFunction, g: &SpectrumFunction) -> bool {
    let mut xs = f.breakpoints();
    xs.extend(g.breakpoints().into_iter().filter(|&x| f.contains(x)));
    let ok_finite = xs.iter().all(|&x| {
        let fx = f.eval(x);
        fx == f64::NEG_INFINITY || g.eval(x) >= fx - TOL
    });
    let ok_tail = f.pieces.iter().filter(|p| !p.b.is_finite()).all(|p| g.covers(p.a, f64::MAX));
    let ok_inf = !f.has_infinity() || g.infinity >= f.infinity - TOL;
    ok_finite && ok_tail && ok_inf
}

/// The six level-set dimension formulas for a measure whose lower and upper
/// spectra are `f <= g`, with domains `I = dom(f)` and `J = dom(g)`.
pub fn predict_dims(f: &SpectrumFunction, g: &SpectrumFunction, alpha: f64, beta: f64) -> Result<DimPrediction> {
    if alpha > beta {
        return Err(Error::InvalidInput(format!("alpha={alpha} > beta={beta}")));
    }
    if !dominated(f, g) {
        return Err(Error::NotDominated("f ≰ g".into()));
    }
    let ninf = f64::NEG_INFINITY;
    let (i_min, i_max) = (f.dom_min().unwrap_or(f64::INFINITY), f.dom_max().unwrap_or(ninf));
    let (j_min, j_max) = (g.dom_min().unwrap_or(f64::INFINITY), g.dom_max().unwrap_or(ninf));
    let inside = g.covers(alpha, beta) && f.meets(alpha, beta);
    let (dim_h_e, dim_p_e) = if inside {
        let fab = envelope(f, alpha, beta)?.value;
        (g.eval(alpha).min(g.eval(beta)).min(fab), envelope(g, alpha, beta)?.value)
    } else {
        (ninf, ninf)
    };
    let dim_h_lower = g.eval(alpha).min(envelope(f, alpha, f64::INFINITY)?.value);
    let dim_h_upper = g.eval(beta).min(envelope(f, 0.0, beta)?.value);
    let dim_p_lower = if alpha >= j_min && alpha <= i_max { envelope(g, alpha, f64::INFINITY)?.value } else { ninf };
    let dim_p_upper = if beta >= i_min && beta <= j_max { envelope(g, 0.0, beta)?.value } else { ninf };
    Ok(DimPrediction { dim_h_e, dim_p_e, dim_h_lower, dim_h_upper, dim_p_lower, dim_p_upper })
}
