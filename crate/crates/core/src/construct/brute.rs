//! Direct enumeration of every cube of a small constructed measure, used as
//! an oracle for the symbolic queries.

use std::collections::{BTreeMap, HashSet};

use super::measure::SymbolicMeasure;
use super::schedule::AtomKind;
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};

/// One admissible `(separator, class string)` choice of a stage, found by
/// scanning all digit strings.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteEntry {
    pub atom: usize,
    pub bits: Vec<u8>,
    pub ones: u64,
    /// Normalized linear mass of the choice.
    pub mass: f64,
    pub diagonal: bool,
}

/// All cubes of the last built stage with their linear masses.
#[derive(Debug, Clone)]
pub struct BruteMeasure {
    pub d: usize,
    pub stages: Vec<Vec<BruteEntry>>,
    /// Normalizer of each stage, recomputed from the entries.
    pub z: Vec<f64>,
    /// `(digits, mass, entry index per stage)`.
    pub cubes: Vec<(Vec<u8>, f64, Vec<usize>)>,
}

impl BruteMeasure {
    /// Enumerates `2^{N d}` strings per atom and stage, then all products.
    pub fn enumerate(mu: &SymbolicMeasure, max_cubes: usize) -> Result<Self> {
        let d = mu.d();
        let mut stages = Vec::new();
        let mut z = Vec::new();
        for s in 1..=mu.stage_count() {
            let t = mu.table(s)?;
            let len = t.class_len() as usize;
            if len > 24 {
                return Err(Error::InvalidInput(format!("stage {s}: 2^{len} strings is too many to enumerate")));
            }
            let n = t.n_gen as f64;
            let half = t.eps / 2.0;
            let mut raw = Vec::new();
            for (i, a) in t.atoms.iter().enumerate() {
                let (p, q) = (a.params.p, a.params.q);
                let (one, zero) = (a.la.exp2(), a.lb.exp2());
                let rho = a.log2_rho.exp2();
                for code in 0u64..(1u64 << len) {
                    let bits: Vec<u8> = (0..len).map(|j| ((code >> j) & 1) as u8).collect();
                    let ones = bits.iter().filter(|&&b| b == 1).count();
                    let nu_p = p.powi(ones as i32) * (1.0 - p).powi((len - ones) as i32);
                    let nu_q = q.powi(ones as i32) * (1.0 - q).powi((len - ones) as i32);
                    let ok_p = (-nu_p.log2() / n - a.alpha).abs() <= half;
                    let ok_q = (-nu_q.log2() / n - a.gamma).abs() <= half;
                    if !(ok_p && ok_q) {
                        continue;
                    }
                    let mass = rho * one.powi(ones as i32) * zero.powi((len - ones) as i32);
                    let mut full = a.separator_digits.clone();
                    full.extend(&bits);
                    raw.push(BruteEntry { atom: i, bits: full, ones: ones as u64, mass, diagonal: a.kind == AtomKind::Diagonal });
                }
            }
            let zs: f64 = raw.iter().map(|e| e.mass).sum();
            for e in raw.iter_mut() {
                e.mass /= zs;
            }
            z.push(zs);
            stages.push(raw);
        }
        let total: f64 = stages.iter().map(|s| s.len() as f64).product();
        if total > max_cubes as f64 {
            return Err(Error::InvalidInput(format!("{total} cubes exceed the enumeration cap {max_cubes}")));
        }
        let mut cubes = vec![(Vec::new(), 1.0, Vec::new())];
        for stage in &stages {
            let mut next = Vec::with_capacity(cubes.len() * stage.len());
            for (bits, mass, idx) in &cubes {
                for (j, e) in stage.iter().enumerate() {
                    let mut b = bits.clone();
                    b.extend(&e.bits);
                    let mut ix = idx.clone();
                    ix.push(j);
                    next.push((b, mass * e.mass, ix));
                }
            }
            cubes = next;
        }
        Ok(Self { d, stages, z, cubes })
    }

    pub fn total_mass(&self) -> f64 {
        self.cubes.iter().map(|c| c.1).sum()
    }

    /// `log2 sum_I mu(I)^q` over the enumerated cubes.
    pub fn log2_partition(&self, q: f64) -> f64 {
        self.cubes.iter().map(|c| c.1.powf(q)).sum::<f64>().log2()
    }

    /// Linear masses of all cubes of generation `g`, keyed by their digits.
    pub fn masses_at(&self, g: usize) -> BTreeMap<Vec<u8>, f64> {
        let mut out = BTreeMap::new();
        for (bits, mass, _) in &self.cubes {
            *out.entry(bits[..g * self.d].to_vec()).or_insert(0.0) += mass;
        }
        out
    }

    /// Mass of the cubes whose stage-`s` choice is off the diagonal.
    pub fn offdiag_mass(&self, s: usize) -> f64 {
        self.cubes.iter().filter(|c| !self.stages[s - 1][c.2[s - 1]].diagonal).map(|c| c.1).sum()
    }

    /// Generation of the enumerated cubes.
    pub fn generation(&self) -> usize {
        self.cubes.first().map_or(0, |c| c.0.len() / self.d)
    }
}

/// Largest discrepancies between symbolic queries and the enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteReport {
    pub cubes: usize,
    pub total_mass_err: f64,
    pub z_err: f64,
    pub cube_mass_err: f64,
    pub ancestor_mass_err: f64,
    pub partition_err: f64,
    pub count_err: f64,
    pub offdiag_err: f64,
    pub path_roundtrip: bool,
    pub disjoint: bool,
}

impl BruteReport {
    pub fn max_err(&self) -> f64 {
        [self.total_mass_err, self.z_err, self.cube_mass_err, self.ancestor_mass_err, self.partition_err, self.count_err, self.offdiag_err]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_err() <= tol && self.path_roundtrip && self.disjoint
    }
}

/// Compares every symbolic query with the enumeration of `mu`.
pub fn compare(mu: &SymbolicMeasure, max_cubes: usize, q_grid: &[f64]) -> Result<BruteReport> {
    let b = BruteMeasure::enumerate(mu, max_cubes)?;
    let d = b.d;
    let last = mu.stage_count();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-300);
    let total_mass_err = (b.total_mass() - 1.0).abs();
    let mut z_err: f64 = 0.0;
    for s in 1..=last {
        z_err = z_err.max(rel(mu.table(s)?.log2_z.exp2(), b.z[s - 1]));
    }
    let mut cube_mass_err: f64 = 0.0;
    let mut path_roundtrip = true;
    for (bits, mass, _) in &b.cubes {
        let cube = DyadicCube::from_digits(d, bits)?;
        cube_mass_err = cube_mass_err.max(rel(mu.log2_mass_of_cube(&cube)?.exp2(), *mass));
        match mu.path_of_cube(&cube)? {
            Some(path) => {
                cube_mass_err = cube_mass_err.max(rel(mu.mass_of_path(&path)?.exp2(), *mass));
                path_roundtrip &= mu.materialize(&path)? == cube;
            }
            None => path_roundtrip = false,
        }
    }
    let mut ancestor_mass_err: f64 = 0.0;
    for g in 0..b.generation() {
        for (bits, mass) in b.masses_at(g) {
            let cube = DyadicCube::from_digits(d, &bits)?;
            ancestor_mass_err = ancestor_mass_err.max(rel(mu.log2_mass_of_cube(&cube)?.exp2(), mass));
        }
    }
    let mut partition_err: f64 = 0.0;
    for &q in q_grid {
        partition_err = partition_err.max((mu.log2_partition(q, last)? - b.log2_partition(q)).abs());
    }
    let count_err = (mu.log2_count(last)? - (b.cubes.len() as f64).log2()).abs();
    let mut offdiag_err: f64 = 0.0;
    for m in 1..=mu.schedule.m_max {
        let brute = mu
            .runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.m == m)
            .map(|(i, _)| {
                let s: usize = mu.runs[..=i].iter().map(|r| r.reps as usize).sum();
                b.offdiag_mass(s)
            })
            .fold(0.0, f64::max);
        offdiag_err = offdiag_err.max((mu.offdiag_mass(m)? - brute).abs());
    }
    let distinct: HashSet<&Vec<u8>> = b.cubes.iter().map(|c| &c.0).collect();
    let disjoint = distinct.len() == b.cubes.len();
    Ok(BruteReport {
        cubes: b.cubes.len(),
        total_mass_err,
        z_err,
        cube_mass_err,
        ancestor_mass_err,
        partition_err,
        count_err,
        offdiag_err,
        path_roundtrip,
        disjoint,
    })
}
