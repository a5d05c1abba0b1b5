//! The constructed measure as a staged product of type-class tables.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::members::{colex_rank, colex_unrank, member_count};
use super::schedule::{atom_params, AtomKind, Mode, Phase, Schedule};
use crate::bernoulli::{logmass_from_logs, typical_classes, BernoulliParams, Selection};
use crate::dyadic::{separated_family, DyadicCube};
use crate::error::{Error, Result};
use crate::logspace::{log2_binomial, log2_sum_exp2, Log2Sum};

/// One exponent of a stage table with its separator and selected classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAtom {
    pub alpha: f64,
    pub gamma: f64,
    pub kind: AtomKind,
    #[serde(skip)]
    pub separator: Option<DyadicCube>,
    #[serde(skip)]
    pub separator_digits: Vec<u8>,
    pub params: BernoulliParams,
    pub sel: Selection,
    pub log2_rho: f64,
    /// `log2` mass factors of a one-digit and a zero-digit.
    pub la: f64,
    pub lb: f64,
}

impl StageAtom {
    /// `log2` of the unnormalized mass `rho * nu(I)` of one cube of class `k`.
    fn log2_cube(&self, n: u64, d: usize, k: u64) -> f64 {
        self.log2_rho + logmass_from_logs(self.la, self.lb, n, d, k)
    }
}

/// Atoms, generations and normalizer shared by all stages of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTable {
    pub m: usize,
    pub phase: Phase,
    pub n_gen: u64,
    pub ell: u64,
    pub d: usize,
    pub eps: f64,
    pub atoms: Vec<StageAtom>,
    pub log2_z: f64,
}

impl StageTable {
    fn new(m: usize, phase: Phase, n_gen: u64, d: usize, eps: f64, atoms: Vec<StageAtom>) -> Result<Self> {
        let family = separated_family(atoms.len(), d)?;
        let mut atoms = atoms;
        for (a, cube) in atoms.iter_mut().zip(family.cubes) {
            a.separator_digits = cube.digits();
            a.separator = Some(cube);
        }
        let mut t = Self { m, phase, n_gen, ell: family.generation, d, eps, atoms, log2_z: 0.0 };
        t.log2_z = t.raw_partition(1.0);
        Ok(t)
    }

    /// Number of digits of the class block.
    pub fn class_len(&self) -> u64 {
        self.n_gen * self.d as u64
    }

    /// Generation added by one stage, `l + N`.
    pub fn stage_generation(&self) -> u64 {
        self.ell + self.n_gen
    }

    /// `log2` of the normalized mass of one cube of class `k` under atom `i`.
    pub fn class_log2_mass(&self, i: usize, k: u64) -> f64 {
        self.atoms[i].log2_cube(self.n_gen, self.d, k) - self.log2_z
    }

    /// `log2` of the total normalized weight of atom `i`.
    pub fn atom_log2_weight(&self, i: usize) -> f64 {
        let a = &self.atoms[i];
        a.log2_rho + a.sel.log2_mass(a.la, a.lb) - self.log2_z
    }

    /// `log2 sum_I (rho nu(I))^q` before normalization; `q = 1` gives `log2 Z`.
    fn raw_partition(&self, q: f64) -> f64 {
        let mut acc = Log2Sum::new();
        for a in &self.atoms {
            for k in a.sel.ks() {
                acc.add(log2_binomial(self.class_len(), k) + q * a.log2_cube(self.n_gen, self.d, k));
            }
        }
        acc.value()
    }

    /// `log2 sum_I (mass of I)^q` over the cubes added by one stage.
    pub fn log2_partition(&self, q: f64) -> f64 {
        self.raw_partition(q) - q * self.log2_z
    }

    /// `log2` number of cubes added by one stage.
    pub fn log2_count(&self) -> f64 {
        log2_sum_exp2(self.atoms.iter().map(|a| a.sel.log2_count()))
    }

    /// `(log2 count, log2 mass)` of every selected class.
    pub fn classes(&self) -> Vec<(usize, u64, f64, f64)> {
        let mut out = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            for k in a.sel.ks() {
                out.push((i, k, log2_binomial(self.class_len(), k), self.class_log2_mass(i, k)));
            }
        }
        out
    }

    fn diagonal(&self) -> Option<usize> {
        self.atoms.iter().position(|a| a.kind == AtomKind::Diagonal)
    }
}

/// `reps` consecutive stages sharing one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub m: usize,
    pub phase: Phase,
    pub reps: u64,
    pub table: StageTable,
}

/// Stage choice of a path: atom index, class and optional member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStep {
    pub atom: usize,
    pub k: u64,
    pub member: Option<BigUint>,
}

/// A prefix of stage choices, serialized as `s0:atom/k/member;s1:...`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Path(pub Vec<PathStep>);

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, step) in self.0.iter().enumerate() {
            if s > 0 {
                write!(f, ";")?;
            }
            match &step.member {
                Some(r) => write!(f, "s{s}:{}/{}/{r}", step.atom, step.k)?,
                None => write!(f, "s{s}:{}/{}/*", step.atom, step.k)?,
            }
        }
        Ok(())
    }
}

impl FromStr for Path {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::InvalidPath(text.to_string());
        if text.trim().is_empty() {
            return Ok(Path::default());
        }
        let mut steps = Vec::new();
        for (s, part) in text.trim().split(';').enumerate() {
            let (label, body) = part.split_once(':').ok_or_else(bad)?;
            if label != format!("s{s}") {
                return Err(bad());
            }
            let fields: Vec<&str> = body.split('/').collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            let atom = fields[0].parse().map_err(|_| bad())?;
            let k = fields[1].parse().map_err(|_| bad())?;
            let member = match fields[2] {
                "*" => None,
                r => Some(r.parse::<BigUint>().map_err(|_| bad())?),
            };
            steps.push(PathStep { atom, k, member });
        }
        Ok(Path(steps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    pub count: usize,
    pub seed: u64,
    /// Stop after this many stages (`None` for all built stages).
    pub max_stages: Option<usize>,
    /// Draw full member indices, not only the leading digits.
    pub with_members: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { count: 1, seed: 0, max_stages: None, with_members: false }
    }
}

/// A sampled path with the midpoint of its first 52 levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub path: Path,
    pub point: Vec<f64>,
}

/// Which measure the tables describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "alphas")]
pub enum MeasureKind {
    Mu,
    /// Auxiliary measure for the given exponent per run.
    Aux(Vec<f64>),
}

/// Staged product representation of a constructed measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicMeasure {
    pub schedule: Schedule,
    pub kind: MeasureKind,
    pub runs: Vec<Run>,
}

/// Position of stage `s` (1-based) inside the run list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StagePos {
    run: usize,
}

impl SymbolicMeasure {
    /// Builds the tables of every round of the schedule.
    pub fn build(schedule: &Schedule) -> Result<Self> {
        let d = schedule.d;
        let mut runs = Vec::new();
        let mut stage = 0usize;
        for round in &schedule.rounds {
            for ph in &round.phases {
                let mut atoms = Vec::with_capacity(ph.atoms.len());
                for a in &ph.atoms {
                    let params = atom_params(a, d, &schedule.preset)?;
                    let sel = typical_classes(&params, round.n_gen, round.eps / 2.0)?;
                    atoms.push(StageAtom {
                        alpha: a.alpha,
                        gamma: a.gamma,
                        kind: a.kind,
                        separator: None,
                        separator_digits: Vec::new(),
                        params,
                        sel,
                        log2_rho: a.log2_rho,
                        la: params.log2_p,
                        lb: params.log2_1mp,
                    });
                }
                let table = StageTable::new(round.m, ph.phase, round.n_gen, d, round.eps, atoms)?;
                let z = table.log2_z.exp2();
                if z < 0.5 {
                    return Err(Error::NormalizerTooSmall { stage: stage + 1, z });
                }
                stage += ph.reps as usize;
                runs.push(Run { m: round.m, phase: ph.phase, reps: ph.reps, table });
            }
        }
        Ok(Self { schedule: schedule.clone(), kind: MeasureKind::Mu, runs })
    }

    /// The auxiliary measure that keeps one exponent per run, weighted by its
    /// own Bernoulli measure restricted to the selected classes.
    pub fn aux_measure(&self, alphas: &[f64]) -> Result<Self> {
        if alphas.len() != self.runs.len() {
            return Err(Error::InvalidInput(format!("need one exponent per run: {} given, {} runs", alphas.len(), self.runs.len())));
        }
        let mut runs = Vec::with_capacity(self.runs.len());
        for (r, (run, &alpha)) in self.runs.iter().zip(alphas).enumerate() {
            let t = &run.table;
            let a = t
                .atoms
                .iter()
                .find(|a| (a.alpha - alpha).abs() <= 1e-12)
                .ok_or_else(|| Error::InvalidInput(format!("run {r}: exponent {alpha} is not on the menu")))?;
            let mut atom = a.clone();
            atom.log2_rho = 0.0;
            atom.la = a.params.log2_q;
            atom.lb = a.params.log2_1mq;
            let mut table = StageTable { atoms: vec![atom], log2_z: 0.0, ..t.clone() };
            table.log2_z = table.raw_partition(1.0);
            runs.push(Run { table, ..run.clone() });
        }
        Ok(Self { schedule: self.schedule.clone(), kind: MeasureKind::Aux(alphas.to_vec()), runs })
    }

    /// The diagonal exponent of every run, the default auxiliary sequence.
    pub fn diagonal_alphas(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.table.diagonal().map_or(r.table.atoms[0].alpha, |i| r.table.atoms[i].alpha)).collect()
    }

    pub fn d(&self) -> usize {
        self.schedule.d
    }

    pub fn mode(&self) -> Mode {
        self.schedule.mode
    }

    /// Total number of built stages.
    pub fn stage_count(&self) -> usize {
        self.runs.iter().map(|r| r.reps as usize).sum()
    }

    fn pos(&self, s: usize) -> Result<StagePos> {
        let mut acc = 0usize;
        for (run, r) in self.runs.iter().enumerate() {
            acc += r.reps as usize;
            if s <= acc {
                return Ok(StagePos { run });
            }
        }
        Err(Error::InvalidInput(format!("stage {s} beyond the {acc} built stages")))
    }

    /// Table of stage `s` (1-based).
    pub fn table(&self, s: usize) -> Result<&StageTable> {
        if s == 0 {
            return Err(Error::InvalidInput("stages are numbered from 1".into()));
        }
        Ok(&self.runs[self.pos(s)?.run].table)
    }

    /// `(run, multiplicity)` pairs covering stages `1..=s`.
    pub fn runs_upto(&self, s: usize) -> Result<Vec<(&Run, u64)>> {
        if s > self.stage_count() {
            return Err(Error::InvalidInput(format!("stage {s} beyond the {} built stages", self.stage_count())));
        }
        let mut left = s as u64;
        let mut out = Vec::new();
        for r in &self.runs {
            if left == 0 {
                break;
            }
            let take = r.reps.min(left);
            out.push((r, take));
            left -= take;
        }
        Ok(out)
    }

    /// Cumulative generation `n(s)`, counting separators.
    pub fn n_of(&self, s: usize) -> Result<u64> {
        Ok(self.runs_upto(s)?.iter().map(|(r, c)| c * r.table.stage_generation()).sum())
    }

    /// Cumulative class generation `n'(s)`, separators excluded.
    pub fn n_prime_of(&self, s: usize) -> Result<u64> {
        Ok(self.runs_upto(s)?.iter().map(|(r, c)| c * r.table.n_gen).sum())
    }

    /// Last stage of round `m`'s `F` run (`s_m`).
    pub fn s_m(&self, m: usize) -> Option<usize> {
        self.round_end(m, Phase::F)
    }

    /// Last stage of round `m`'s `G` run (`s'_m`); equals `s_m` in single mode.
    pub fn s_prime_m(&self, m: usize) -> Option<usize> {
        match self.mode() {
            Mode::Single => self.s_m(m),
            Mode::Pair => self.round_end(m, Phase::G),
        }
    }

    fn round_end(&self, m: usize, phase: Phase) -> Option<usize> {
        let mut acc = 0usize;
        for r in &self.runs {
            acc += r.reps as usize;
            if r.m == m && r.phase == phase {
                return Some(acc);
            }
        }
        None
    }

    /// `log2` number of cubes of `G_s`.
    pub fn log2_count(&self, s: usize) -> Result<f64> {
        Ok(self.runs_upto(s)?.iter().map(|(r, c)| *c as f64 * r.table.log2_count()).sum())
    }

    /// `log2 sum_{I in G_s} mu(I)^q`, the stage sum of one-stage partition values.
    pub fn log2_partition(&self, q: f64, s: usize) -> Result<f64> {
        Ok(self.runs_upto(s)?.iter().map(|(r, c)| *c as f64 * r.table.log2_partition(q)).sum())
    }

    /// `log2` total mass of `G_s`, computed from every class weight.
    pub fn log2_total_mass(&self, s: usize) -> Result<f64> {
        self.log2_partition(1.0, s)
    }

    fn check_step(&self, s: usize, step: &PathStep) -> Result<&StageTable> {
        let t = self.table(s)?;
        let a = t.atoms.get(step.atom).ok_or_else(|| Error::InvalidPath(format!("stage {s}: atom {} out of range", step.atom)))?;
        if !a.sel.ks().contains(&step.k) {
            return Err(Error::InvalidPath(format!("stage {s}: class {} not selected", step.k)));
        }
        if let Some(r) = &step.member {
            if r >= &member_count(t.class_len(), step.k) {
                return Err(Error::InvalidPath(format!("stage {s}: member {r} out of range")));
            }
        }
        Ok(t)
    }

    /// Exact `log2 mu(I)` of the cube addressed by `path`.
    pub fn mass_of_path(&self, path: &Path) -> Result<f64> {
        let mut total = 0.0;
        for (i, step) in path.0.iter().enumerate() {
            let t = self.check_step(i + 1, step)?;
            total += t.class_log2_mass(step.atom, step.k);
        }
        Ok(total)
    }

    /// The cube addressed by a path whose steps all carry member indices.
    pub fn materialize(&self, path: &Path) -> Result<DyadicCube> {
        let d = self.d();
        let mut bits = Vec::new();
        for (i, step) in path.0.iter().enumerate() {
            let t = self.check_step(i + 1, step)?;
            let member = step.member.as_ref().ok_or_else(|| Error::InvalidPath(format!("stage {}: no member index", i + 1)))?;
            bits.extend_from_slice(&t.atoms[step.atom].separator_digits);
            bits.extend(colex_unrank(t.class_len(), step.k, member)?);
        }
        DyadicCube::from_digits(d, &bits)
    }

    /// Path of a cube whose generation is a stage boundary.
    pub fn path_of_cube(&self, cube: &DyadicCube) -> Result<Option<Path>> {
        let bits = cube.digits();
        let d = self.d();
        let mut pos = 0usize;
        let mut steps = Vec::new();
        let mut s = 0;
        while pos < bits.len() {
            s += 1;
            let t = self.table(s)?;
            let sep = t.ell as usize * d;
            let cls = t.class_len() as usize;
            if pos + sep + cls > bits.len() {
                return Err(Error::InvalidInput("cube generation is not a stage boundary".into()));
            }
            let Some(atom) = t.atoms.iter().position(|a| a.separator_digits[..] == bits[pos..pos + sep]) else {
                return Ok(None);
            };
            let block = &bits[pos + sep..pos + sep + cls];
            let k = block.iter().filter(|&&b| b == 1).count() as u64;
            if !t.atoms[atom].sel.ks().contains(&k) {
                return Ok(None);
            }
            steps.push(PathStep { atom, k, member: Some(colex_rank(block)) });
            pos += sep + cls;
        }
        Ok(Some(Path(steps)))
    }

    /// Exact `log2 mu(I)` of an arbitrary dyadic cube up to the built depth.
    pub fn log2_mass_of_cube(&self, cube: &DyadicCube) -> Result<f64> {
        let d = self.d();
        if cube.dim() != d {
            return Err(Error::DimensionMismatch(d, cube.dim()));
        }
        let bits = cube.digits();
        let total = self.n_of(self.stage_count())?;
        if cube.generation() > total {
            return Err(Error::InvalidInput(format!("generation {} beyond the built depth {total}", cube.generation())));
        }
        let mut pos = 0usize;
        let mut acc = 0.0;
        let mut s = 0;
        while pos < bits.len() {
            s += 1;
            let t = self.table(s)?;
            let sep = t.ell as usize * d;
            let cls = t.class_len() as usize;
            let rest = &bits[pos..];
            if rest.len() < sep {
                let w = log2_sum_exp2(
                    t.atoms
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| a.separator_digits[..rest.len()] == *rest)
                        .map(|(i, _)| t.atom_log2_weight(i)),
                );
                return Ok(acc + w);
            }
            let Some(i) = t.atoms.iter().position(|a| a.separator_digits[..] == rest[..sep]) else {
                return Ok(f64::NEG_INFINITY);
            };
            let a = &t.atoms[i];
            let block = &rest[sep..];
            if block.len() < cls {
                let j = block.iter().filter(|&&b| b == 1).count() as u64;
                let free = (cls - block.len()) as u64;
                let w = log2_sum_exp2(
                    a.sel.ks().filter(|&k| k >= j && k - j <= free).map(|k| log2_binomial(free, k - j) + t.class_log2_mass(i, k)),
                );
                return Ok(acc + w);
            }
            let k = block[..cls].iter().filter(|&&b| b == 1).count() as u64;
            if !a.sel.ks().contains(&k) {
                return Ok(f64::NEG_INFINITY);
            }
            acc += t.class_log2_mass(i, k);
            pos += sep + cls;
        }
        Ok(acc)
    }

    /// Exact mass of `{stage exponent != D_m}` at a stage of round `m`,
    /// maximized over the runs of that round.
    pub fn offdiag_mass(&self, m: usize) -> Result<f64> {
        let runs: Vec<&Run> = self.runs.iter().filter(|r| r.m == m).collect();
        if runs.is_empty() {
            return Err(Error::InvalidInput(format!("round {m} not built")));
        }
        Ok(runs
            .iter()
            .map(|r| {
                let t = &r.table;
                log2_sum_exp2((0..t.atoms.len()).filter(|&i| t.atoms[i].kind != AtomKind::Diagonal).map(|i| t.atom_log2_weight(i)))
                    .exp2()
            })
            .fold(0.0, f64::max))
    }

    /// Deterministic samples of paths and points.
    pub fn sample(&self, opts: &SampleOptions) -> Result<Vec<Sample>> {
        let d = self.d();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let stages = opts.max_stages.unwrap_or(usize::MAX).min(self.stage_count());
        let dists: Vec<(Vec<(usize, u64)>, WeightedIndex<f64>)> = self
            .runs
            .iter()
            .map(|r| {
                let classes = r.table.classes();
                let top = classes.iter().map(|c| c.2 + c.3).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = classes.iter().map(|c| (c.2 + c.3 - top).exp2()).collect();
                let idx = classes.iter().map(|c| (c.0, c.1)).collect();
                WeightedIndex::new(w).map(|w| (idx, w)).map_err(|e| Error::InvalidInput(e.to_string()))
            })
            .collect::<Result<_>>()?;
        let max_bits = 52 * d;
        let mut out = Vec::with_capacity(opts.count);
        for _ in 0..opts.count {
            let mut steps = Vec::with_capacity(stages);
            let mut bits: Vec<u8> = Vec::with_capacity(max_bits);
            let mut s = 0usize;
            'runs: for (run, (idx, dist)) in self.runs.iter().zip(&dists) {
                for _ in 0..run.reps {
                    if s == stages {
                        break 'runs;
                    }
                    s += 1;
                    let (atom, k) = idx[dist.sample(&mut rng)];
                    let t = &run.table;
                    for &b in &t.atoms[atom].separator_digits {
                        if bits.len() < max_bits {
                            bits.push(b);
                        }
                    }
                    let len = t.class_len();
                    let need_all = opts.with_members;
                    let mut member_bits = Vec::new();
                    let mut ones = k;
                    for j in 0..len {
                        if !need_all && bits.len() >= max_bits {
                            break;
                        }
                        let left = len - j;
                        let b = u8::from(rng.gen_range(0..left) < ones);
                        ones -= b as u64;
                        if bits.len() < max_bits {
                            bits.push(b);
                        }
                        if need_all {
                            member_bits.push(b);
                        }
                    }
                    let member = need_all.then(|| colex_rank(&member_bits));
                    steps.push(PathStep { atom, k, member });
                }
            }
            let whole = bits.len() / d * d;
            let point = DyadicCube::from_digits(d, &bits[..whole])?.midpoint();
            out.push(Sample { path: Path(steps), point });
        }
        Ok(out)
    }

    /// Predicted local exponents of a path at the end of each stage:
    /// `(n(s), -log2 mu(I_{n(s)}) / n(s))`.
    pub fn exponent_profile(&self, path: &Path) -> Result<Vec<(u64, f64)>> {
        let mut out = Vec::with_capacity(path.0.len());
        let mut mass = 0.0;
        let mut n = 0u64;
        for (i, step) in path.0.iter().enumerate() {
            let t = self.check_step(i + 1, step)?;
            mass += t.class_log2_mass(step.atom, step.k);
            n += t.stage_generation();
            out.push((n, -mass / n as f64));
        }
        Ok(out)
    }

    /// Metadata for reports: per run, generations, normalizer and menus.
    pub fn meta(&self) -> serde_json::Value {
        let runs: Vec<serde_json::Value> = self
            .runs
            .iter()
            .map(|r| {
                let t = &r.table;
                serde_json::json!({
                    "m": r.m,
                    "phase": r.phase,
                    "reps": r.reps,
                    "n_gen": t.n_gen,
                    "ell": t.ell,
                    "eps": t.eps,
                    "z": t.log2_z.exp2(),
                    "atoms": t.atoms.iter().enumerate().map(|(i, a)| serde_json::json!({
                        "alpha": a.alpha,
                        "gamma": a.gamma,
                        "kind": a.kind,
                        "p": a.params.p,
                        "q": a.params.q,
                        "k_lo": a.sel.lo,
                        "k_hi": a.sel.hi,
                        "log2_rho": a.log2_rho,
                        "weight": t.atom_log2_weight(i).exp2(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "mode": self.schedule.mode,
            "d": self.d(),
            "stages": self.stage_count(),
            "n_total": self.n_of(self.stage_count()).unwrap_or(0),
            "runs": runs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::schedule::{build_schedule, Preset};
    use super::*;
    use crate::legendre::SpectrumFunction;

    fn pair_measure() -> SymbolicMeasure {
        let f = SpectrumFunction::tent(0.8, 1.0, 1.2, 1.0, 1).unwrap();
        let g = SpectrumFunction::tent(0.5, 1.0, 1.5, 1.0, 1).unwrap();
        let s = build_schedule(&f, Some(&g), 1.0, 2, &Preset::named("desk-small").unwrap()).unwrap();
        SymbolicMeasure::build(&s).unwrap()
    }

    #[test]
    fn path_text_roundtrip() {
        let p = Path(vec![
            PathStep { atom: 1, k: 3, member: Some(BigUint::from(17u32)) },
            PathStep { atom: 0, k: 0, member: None },
        ]);
        let text = p.to_string();
        assert_eq!(text, "s0:1/3/17;s1:0/0/*");
        assert_eq!(text.parse::<Path>().unwrap(), p);
        assert!("s1:0/0/*".parse::<Path>().is_err());
        assert!("s0:0/0".parse::<Path>().is_err());
    }

    #[test]
    fn single_atom_measure() {
        let f = SpectrumFunction::point(0.6, 0.6, 1).unwrap();
        let s = build_schedule(&f, None, 0.6, 2, &Preset::named("desk-small").unwrap()).unwrap();
        let mu = SymbolicMeasure::build(&s).unwrap();
        for r in &mu.runs {
            let z = r.table.log2_z.exp2();
            assert!((0.5..=1.0 + 1e-12).contains(&z), "{z}");
        }
        assert_eq!(mu.offdiag_mass(1).unwrap(), 0.0);
        let t = mu.table(1).unwrap();
        let a = &t.atoms[0];
        let k = a.sel.lo;
        let p = Path(vec![PathStep { atom: 0, k, member: None }]);
        let want = logmass_from_logs(a.params.log2_p, a.params.log2_1mp, t.n_gen, 1, k) - t.log2_z;
        assert!((mu.mass_of_path(&p).unwrap() - want).abs() < 1e-12);
        let samples = mu.sample(&SampleOptions { count: 5, seed: 3, ..Default::default() }).unwrap();
        assert!(samples.iter().all(|x| x.path.0.iter().all(|st| st.atom == 0)));
    }

    #[test]
    fn mass_is_conserved_and_bounded() {
        let mu = pair_measure();
        for s in 1..=mu.stage_count() {
            assert!(mu.log2_total_mass(s).unwrap().abs() < 1e-12, "{s} {}", mu.log2_total_mass(s).unwrap());
        }
        for r in &mu.runs {
            let z = r.table.log2_z.exp2();
            assert!(z >= 0.5 && z <= 1.0 + 2f64.powi(-(r.m as i32)), "{z}");
        }
        assert!(mu.offdiag_mass(2).unwrap() <= 0.5);
        assert!(mu.n_prime_of(3).unwrap() <= mu.n_of(3).unwrap());
        assert!(mu.s_m(1).unwrap() < mu.s_prime_m(1).unwrap());
        assert!(mu.s_prime_m(1).unwrap() < mu.s_m(2).unwrap());
    }

    #[test]
    fn materialize_and_cube_queries_agree() {
        let mu = pair_measure();
        let samples = mu.sample(&SampleOptions { count: 4, seed: 7, max_stages: Some(3), with_members: true }).unwrap();
        for smp in &samples {
            let cube = mu.materialize(&smp.path).unwrap();
            assert_eq!(cube.generation(), mu.n_of(3).unwrap());
            let direct = mu.log2_mass_of_cube(&cube).unwrap();
            let via_path = mu.mass_of_path(&smp.path).unwrap();
            assert!((direct - via_path).abs() < 1e-9);
            assert_eq!(mu.path_of_cube(&cube).unwrap().unwrap(), smp.path);
            let x = DyadicCube::of_point(&smp.point, 30).unwrap();
            assert_eq!(cube.ancestor(30).unwrap(), x);
            let parent = cube.ancestor(cube.generation() - 1).unwrap();
            assert!(mu.log2_mass_of_cube(&parent).unwrap() >= direct);
        }
    }

    #[test]
    fn aux_measure_is_normalized() {
        let mu = pair_measure();
        let aux = mu.aux_measure(&mu.diagonal_alphas()).unwrap();
        for s in 1..=aux.stage_count() {
            assert!(aux.log2_total_mass(s).unwrap().abs() < 1e-12);
        }
        let mut alphas = mu.diagonal_alphas();
        alphas[0] = 0.123;
        assert!(mu.aux_measure(&alphas).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let mu = pair_measure();
        let o = SampleOptions { count: 3, seed: 11, max_stages: Some(5), with_members: false };
        assert_eq!(mu.sample(&o).unwrap(), mu.sample(&o).unwrap());
    }
}
