//! Dyadic cubes of `[0,1]^d`: addressing, concatenation, neighborhoods and
//! the separated families `L(k)` used as stage separators.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Closed dyadic cube `prod_i [k_i 2^-n, (k_i + 1) 2^-n]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    d: usize,
    n: u64,
    k: Vec<BigUint>,
}

impl DyadicCube {
    pub fn new(d: usize, n: u64, k: Vec<BigUint>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if k.len() != d {
            return Err(Error::DimensionMismatch(d, k.len()));
        }
        let side = BigUint::one() << n;
        if k.iter().any(|ki| ki >= &side) {
            return Err(Error::InvalidInput(format!("index out of range at generation {n}")));
        }
        Ok(Self { d, n, k })
    }

    pub fn from_indices(d: usize, n: u64, k: &[u64]) -> Result<Self> {
        Self::new(d, n, k.iter().map(|&x| BigUint::from(x)).collect())
    }

    /// The unit cube `[0,1]^d`, identity of [`concat`](Self::concat).
    pub fn unit(d: usize) -> Self {
        Self { d, n: 0, k: vec![BigUint::zero(); d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn generation(&self) -> u64 {
        self.n
    }

    pub fn indices(&self) -> &[BigUint] {
        &self.k
    }

    /// Indices as `u64`, available when `n <= 64`.
    pub fn indices_u64(&self) -> Option<Vec<u64>> {
        self.k.iter().map(|x| x.to_u64()).collect()
    }

    /// `log2` of the side length.
    pub fn log2_side(&self) -> f64 {
        -(self.n as f64)
    }

    /// `I . J`: the image of `J` under the affine map sending `[0,1]^d` onto `I`.
    pub fn concat(&self, other: &DyadicCube) -> Result<DyadicCube> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch(self.d, other.d));
        }
        let k = self
            .k
            .iter()
            .zip(&other.k)
            .map(|(a, b)| (a << other.n) + b)
            .collect();
        Ok(DyadicCube { d: self.d, n: self.n + other.n, k })
    }

    /// Cube reached by a level-major digit string: bit `level * d + i` is the
    /// digit of coordinate `i` at that level.
    pub fn from_digits(d: usize, bits: &[u8]) -> Result<DyadicCube> {
        if d == 0 || bits.len() % d != 0 {
            return Err(Error::InvalidInput("digit string length must be a multiple of d".into()));
        }
        let n = (bits.len() / d) as u64;
        let mut k = vec![BigUint::zero(); d];
        for level in bits.chunks(d) {
            for (ki, &b) in k.iter_mut().zip(level) {
                *ki <<= 1u32;
                if b != 0 {
                    *ki += 1u32;
                }
            }
        }
        Ok(DyadicCube { d, n, k })
    }

    /// Level-major digit string of the cube (inverse of [`from_digits`](Self::from_digits)).
    pub fn digits(&self) -> Vec<u8> {
        let n = self.n as usize;
        let mut bits = vec![0u8; n * self.d];
        for (i, ki) in self.k.iter().enumerate() {
            for level in 0..n {
                let shift = (n - 1 - level) as u64;
                bits[level * self.d + i] = u8::from(ki.bit(shift));
            }
        }
        bits
    }

    /// `I_n(x)` for a point of `[0,1)^d`.
    pub fn of_point(x: &[f64], n: u32) -> Result<DyadicCube> {
        if n > 52 {
            return Err(Error::InvalidInput("point addressing limited to n <= 52".into()));
        }
        let side = (1u64 << n) as f64;
        let k = x
            .iter()
            .map(|&xi| {
                if !(0.0..1.0).contains(&xi) {
                    return Err(Error::InvalidInput(format!("coordinate {xi} outside [0,1)")));
                }
                Ok(BigUint::from((xi * side).floor() as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DyadicCube { d: x.len(), n: n as u64, k })
    }

    /// Ancestor at generation `g <= n`.
    pub fn ancestor(&self, g: u64) -> Result<DyadicCube> {
        if g > self.n {
            return Err(Error::GenerationBelowCube { requested: self.n, cube: g });
        }
        let shift = self.n - g;
        Ok(DyadicCube { d: self.d, n: g, k: self.k.iter().map(|x| x >> shift).collect() })
    }

    /// Midpoint coordinates (rounded to `f64`).
    pub fn midpoint(&self) -> Vec<f64> {
        let scale = (-(self.n as f64) - 1.0).exp2();
        self.k
            .iter()
            .map(|ki| {
                let twice = (ki << 1u32) + 1u32;
                big_to_f64(&twice) * scale
            })
            .collect()
    }

    /// Whether the interiors of the two cubes intersect.
    pub fn interiors_meet(&self, other: &DyadicCube) -> bool {
        if self.d != other.d {
            return false;
        }
        let g = self.n.min(other.n);
        let a = self.ancestor(g).expect("g <= n");
        let b = other.ancestor(g).expect("g <= n");
        a == b
    }

    /// `N_1(n, J)` (order 1) or `N_2(n, J)` (order 2), clipped to `[0,1]^d`.
    pub fn neighborhood(&self, n: u64, order: u8) -> Result<Vec<DyadicCube>> {
        if n < self.n {
            return Err(Error::GenerationBelowCube { requested: n, cube: self.n });
        }
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidInput(format!("neighborhood order {order}")));
        }
        let ring = BigUint::from(order as u32);
        let shift = n - self.n;
        let top = BigUint::one() << n;
        let ranges: Vec<(BigUint, BigUint)> = self
            .k
            .iter()
            .map(|ki| {
                let lo = ki << shift;
                let hi = (&lo + (BigUint::one() << shift)) + &ring;
                let lo = if lo >= ring { lo - &ring } else { BigUint::zero() };
                let hi = if hi > top { top.clone() } else { hi };
                (lo, hi)
            })
            .collect();
        let mut out = Vec::new();
        let mut cur: Vec<BigUint> = ranges.iter().map(|r| r.0.clone()).collect();
        loop {
            out.push(DyadicCube { d: self.d, n, k: cur.clone() });
            let mut axis = self.d;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                cur[axis] += 1u32;
                if cur[axis] < ranges[axis].1 {
                    break;
                }
                cur[axis] = ranges[axis].0.clone();
            }
        }
    }
}

pub(crate) fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ks: Vec<String> = self.k.iter().map(|x| x.to_string()).collect();
        write!(f, "{}:{}:{}", self.d, self.n, ks.join(","))
    }
}

impl FromStr for DyadicCube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cube text {s:?}, expected d:n:k1,...,kd"));
        let mut parts = s.split(':');
        let d: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let n: u64 = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let ks = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let k = ks
            .split(',')
            .map(|x| x.parse::<BigUint>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        DyadicCube::new(d, n, k)
    }
}

/// `k` cubes of generation `l(k)` inside `L_0` whose order-2 neighborhoods are
/// pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparatedFamily {
    pub d: usize,
    pub count: usize,
    pub generation: u64,
    pub cubes: Vec<DyadicCube>,
}

/// `l(k) = floor(log2(6^d k) / d) + 3`.
pub fn separator_generation(k: usize, d: usize) -> u64 {
    let v = (d as f64) * 6f64.log2() + (k as f64).log2();
    // Guard against `log2` landing a hair below an exact integer.
    let q = v / d as f64;
    let fl = (q + 1e-12).floor();
    fl as u64 + 3
}

/// Generation-2 cube with all indices equal to 1, i.e. `[1/4,1/2]^d`.
pub fn base_cube(d: usize) -> DyadicCube {
    DyadicCube::from_indices(d, 2, &vec![1; d]).expect("valid")
}

/// Deterministic family on a stride-6 index grid inside `L_0`, row-major order.
///
/// Slots start one cell in from the lower face of `L_0`. For the few `(k, d)`
/// where that grid is short of `k` slots, the grid starts on the lower face
/// instead; should that still be short, the generation increases.
pub fn separated_family(k: usize, d: usize) -> Result<SeparatedFamily> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidInput("separated family needs k >= 1 and d >= 1".into()));
    }
    let mut l = separator_generation(k, d);
    let (offset, slots) = loop {
        if l - 2 >= 63 {
            return Err(Error::InvalidInput(format!("no room for {k} separators")));
        }
        let cells = 1u64 << (l - 2);
        let fits = |offset: u64| {
            let slots = (cells - 2 - offset) / 6 + 1;
            ((slots as f64).powi(d as i32) >= k as f64).then_some((offset, slots))
        };
        if let Some(found) = fits(1).or_else(|| fits(0)) {
            break found;
        }
        l += 1;
    };
    let base = 1u64 << (l - 2);
    let mut cubes = Vec::with_capacity(k);
    for j in 0..k as u64 {
        let mut idx = vec![0u64; d];
        let mut rest = j;
        for axis in (0..d).rev() {
            idx[axis] = base + offset + 6 * (rest % slots);
            rest /= slots;
        }
        cubes.push(DyadicCube::from_indices(d, l, &idx)?);
    }
    Ok(SeparatedFamily { d, count: k, generation: l, cubes })
}
