//! Stage schedules: exponent menus, targets, weights, generations and
//! repetition counts.

use serde::{Deserialize, Serialize};

use crate::bernoulli::{coverage, min_generation, typical_classes, solve_params, BernoulliParams, Branch, GENERATION_CAP};
use crate::dyadic::separator_generation;
use crate::error::{Error, Result};
use crate::legendre::{dominated, fixed_points, validate_spectrum, SpectrumFunction, TOL};

/// Construction mode: one spectrum `f`, or the interleaved pair `(f, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "single-f")]
    Single,
    #[serde(rename = "pair-fg")]
    Pair,
}

/// Which spectrum a block of stages approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    F,
    G,
}

/// Origin of a menu exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomKind {
    /// A point of the dense sequence with positive spectrum value.
    Menu,
    /// A point of the dense sequence where the spectrum vanishes.
    Zero,
    /// `D_m`.
    Diagonal,
    /// `alpha_m(0)`.
    Origin,
    /// `alpha_m(inf)`.
    Infinity,
}

/// Tunable constants of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    /// `eps_m = eps_scale * (m + 1)^-2`.
    pub eps_scale: f64,
    /// Exponent `r` of the substitute `eps_m^r` for vanishing spectrum values,
    /// of `D_m = 2 eps_m^r` when `D = 0`, and of the menu filter. `None`
    /// selects `1/3` in pair mode and `1` in single mode.
    pub zero_root: Option<f64>,
    /// Menu filter `alpha >= filter_factor * eps_m^r`.
    pub filter_factor: f64,
    /// Gain `G` of the growth policy.
    pub gain: f64,
    /// Floor on every `N_m`.
    pub n_min: u64,
    /// Coverage target of the typical selection.
    pub coverage_target: f64,
    /// Cap on `alpha_m(inf)`; `None` means `64 d`.
    pub alpha_cap: Option<f64>,
    /// Generations per round, bypassing the growth policy.
    pub fixed_n: Option<Vec<u64>>,
    /// Repetition count for every phase, bypassing the growth policy.
    pub fixed_reps: Option<u64>,
    #[serde(default)]
    pub branch_q: Branch,
    #[serde(default)]
    pub branch_p: Branch,
}

impl Preset {
    fn desk(name: &str, gain: f64) -> Self {
        Self {
            name: name.into(),
            eps_scale: 0.5,
            zero_root: Some(1.0),
            filter_factor: 4.0,
            gain,
            n_min: 16,
            coverage_target: 0.5,
            alpha_cap: None,
            fixed_n: None,
            fixed_reps: None,
            branch_q: Branch::Low,
            branch_p: Branch::High,
        }
    }

    /// Literal constants: `eps_m = (m+1)^-2`, filter `4 eps_m^r`.
    pub fn paper() -> Self {
        Self { name: "paper".into(), eps_scale: 1.0, zero_root: None, n_min: 1, ..Self::desk("paper", 8.0) }
    }

    /// Deliberately small variant for exhaustive enumeration: `N = 3, 4`,
    /// one repetition per phase, wide windows.
    pub fn tiny() -> Self {
        Self {
            name: "tiny".into(),
            eps_scale: 2.0,
            filter_factor: 0.0,
            n_min: 1,
            fixed_n: Some(vec![3, 4]),
            fixed_reps: Some(1),
            ..Self::desk("tiny", 1.0)
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk-small" => Ok(Self::desk(name, 8.0)),
            "desk-medium" => Ok(Self::desk(name, 50.0)),
            "desk-large" => Ok(Self::desk(name, 400.0)),
            "tiny" => Ok(Self::tiny()),
            _ => Err(Error::InvalidInput(format!(
                "unknown preset {name:?} (paper, desk-small, desk-medium, desk-large, tiny)"
            ))),
        }
    }

    pub fn eps(&self, m: usize) -> f64 {
        self.eps_scale / ((m + 1) * (m + 1)) as f64
    }

    pub fn root(&self, mode: Mode) -> f64 {
        self.zero_root.unwrap_or(match mode {
            Mode::Pair => 1.0 / 3.0,
            Mode::Single => 1.0,
        })
    }
}

/// One exponent of a stage menu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuAtom {
    pub alpha: f64,
    /// Target dimension `gamma_m(alpha)`.
    pub gamma: f64,
    /// Target before the `(1 - theta)` contraction.
    pub gamma_tilde: f64,
    pub log2_rho: f64,
    pub kind: AtomKind,
    /// Smallest generation whose typical selection reaches the coverage target.
    pub min_generation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phase: Phase,
    /// Repetitions `R^h_m` (1 in single mode).
    pub reps: u64,
    pub theta: f64,
    /// Separator generation `l(#A)`.
    pub ell: u64,
    pub atoms: Vec<MenuAtom>,
}

impl PhaseSchedule {
    pub fn diagonal_index(&self) -> usize {
        self.atoms.iter().position(|a| a.kind == AtomKind::Diagonal).expect("menu holds D_m")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub m: usize,
    pub eps: f64,
    pub d_m: f64,
    /// Generation `N_m` of the class blocks.
    pub n_gen: u64,
    pub phases: Vec<PhaseSchedule>,
}

/// An exponent removed from a menu because no admissible target exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedAtom {
    pub m: usize,
    pub phase: Phase,
    pub alpha: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: Mode,
    pub d: usize,
    pub m_max: usize,
    pub fixed_point: f64,
    pub alpha_cap: f64,
    pub preset: Preset,
    pub rounds: Vec<Round>,
    pub dropped: Vec<DroppedAtom>,
}

/// A fixed enumeration of a dense subset of `dom(f) \ {0, D, inf}`: every
/// piece contributes its endpoints, then its dyadic points breadth first
/// (unbounded pieces through `t -> a + t/(1-t)`); isolated points and the
/// components of `Fix(f)` are interleaved round robin.
pub fn dense_sequence(f: &SpectrumFunction, d_fix: f64, count: usize) -> Vec<f64> {
    #[derive(Clone, Copy)]
    enum Src {
        Interval(f64, f64),
        Unbounded(f64),
        Point(f64),
    }
    let mut sources = Vec::new();
    for p in f.pieces() {
        if p.a == p.b {
            sources.push(Src::Point(p.a));
        } else if p.b.is_finite() {
            sources.push(Src::Interval(p.a, p.b));
        } else {
            sources.push(Src::Unbounded(p.a));
        }
    }
    sources.extend(f.points().iter().map(|p| Src::Point(p.0)));
    for c in fixed_points(f) {
        if c.lo == c.hi {
            sources.push(Src::Point(c.lo));
        } else {
            sources.push(Src::Interval(c.lo, c.hi));
        }
    }
    // Breadth-first dyadic parameter: 1/2, 1/4, 3/4, 1/8, ...
    let dyadic = |j: usize| {
        let level = (usize::BITS - (j + 1).leading_zeros()) as i32;
        let first = (1usize << (level - 1)) - 1;
        let odd = 2 * (j - first) + 1;
        odd as f64 / (1u64 << level) as f64
    };
    let item = |s: Src, j: usize| -> Option<f64> {
        match s {
            Src::Point(x) => (j == 0).then_some(x),
            Src::Interval(a, b) => Some(match j {
                0 => a,
                1 => b,
                _ => a + dyadic(j - 2) * (b - a),
            }),
            Src::Unbounded(a) => Some(match j {
                0 => a,
                _ => {
                    let t = dyadic(j - 1);
                    a + t / (1.0 - t)
                }
            }),
        }
    };
    let skip = |x: f64| x == 0.0 || (x - d_fix).abs() <= TOL || !x.is_finite();
    let mut out: Vec<f64> = Vec::new();
    let has_infinite = sources.iter().any(|s| !matches!(s, Src::Point(_)));
    let max_j = if has_infinite { usize::MAX } else { 1 };
    let mut j = 0;
    while out.len() < count && j < max_j {
        for &s in &sources {
            if let Some(x) = item(s, j) {
                if !skip(x) && !out.iter().any(|y| (y - x).abs() <= 1e-12) && out.len() < count {
                    out.push(x);
                }
            }
        }
        j += 1;
        if j > 64 + count * 4 {
            break;
        }
    }
    out
}

/// Bernoulli parameters realizing a menu atom.
pub(crate) fn atom_params(a: &MenuAtom, d: usize, preset: &Preset) -> Result<BernoulliParams> {
    solve_params(a.alpha, a.gamma, d, preset.branch_q, preset.branch_p)
}

fn value_at_infinity(h: &SpectrumFunction) -> f64 {
    if h.has_infinity() {
        return h.infinity();
    }
    h.pieces().iter().filter(|p| !p.b.is_finite()).map(|p| p.knots[p.knots.len() - 1].1).fold(f64::NEG_INFINITY, f64::max)
}

struct MenuInput<'a> {
    h: &'a SpectrumFunction,
    phase: Phase,
}

/// Validates the targets and returns the schedule of rounds `1..=m_max`.
pub fn build_schedule(
    f: &SpectrumFunction,
    g: Option<&SpectrumFunction>,
    fixed_point: f64,
    m_max: usize,
    preset: &Preset,
) -> Result<Schedule> {
    let mode = if g.is_some() { Mode::Pair } else { Mode::Single };
    let d = f.d();
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    if f.is_empty() {
        return Err(Error::EmptyDomain("f has an empty domain".into()));
    }
    let rep = validate_spectrum(f);
    if !rep.valid {
        return Err(Error::InvalidInput(format!("f is not a valid spectrum: {}", rep.violations.join("; "))));
    }
    if (f.eval(fixed_point) - fixed_point).abs() > TOL * (1.0 + fixed_point.abs()) {
        return Err(Error::InvalidInput(format!("D = {fixed_point} is not a fixed point of f")));
    }
    if let Some(g) = g {
        if g.d() != d {
            return Err(Error::DimensionMismatch(d, g.d()));
        }
        let rep = validate_spectrum(g);
        if !rep.valid {
            return Err(Error::InvalidInput(format!("g is not a valid spectrum: {}", rep.violations.join("; "))));
        }
        if !dominated(f, g) {
            return Err(Error::NotDominated("f ≰ g".into()));
        }
        if !f.is_concave() || !g.is_concave() {
            return Err(Error::InvalidInput("pair mode needs f and g concave on their domains".into()));
        }
    }
    if let Some(ns) = &preset.fixed_n {
        if ns.len() < m_max {
            return Err(Error::InvalidInput(format!("preset {} fixes only {} rounds", preset.name, ns.len())));
        }
    }
    let alpha_cap = preset.alpha_cap.unwrap_or(64.0 * d as f64);
    let root = preset.root(mode);
    let inputs: Vec<MenuInput> = match g {
        None => vec![MenuInput { h: f, phase: Phase::F }],
        Some(g) => vec![MenuInput { h: f, phase: Phase::F }, MenuInput { h: g, phase: Phase::G }],
    };
    let deltas: Vec<Vec<f64>> = inputs.iter().map(|i| dense_sequence(i.h, fixed_point, m_max)).collect();
    let mut rounds = Vec::with_capacity(m_max);
    let mut dropped = Vec::new();
    // Cumulative generation of all previous stages, `sum R (N + l)`.
    let mut total_prev = 0f64;
    let mut n_prev = 0u64;
    let mut rg_prev = 0u64;
    for m in 1..=m_max {
        let eps = preset.eps(m);
        let sub = eps.powf(root);
        let d_m = if fixed_point == 0.0 { (2.0 * sub).min(d as f64) } else { fixed_point };
        let mut phases = Vec::new();
        for (input, delta) in inputs.iter().zip(&deltas) {
            let (ph, mut drops) = build_phase(input, delta, m, eps, sub, d_m, fixed_point, alpha_cap, mode, preset, d)?;
            dropped.append(&mut drops);
            phases.push(ph);
        }
        let need = phases.iter().flat_map(|p| p.atoms.iter().map(|a| a.min_generation)).max().unwrap_or(1);
        let gm = preset.gain * m as f64;
        let n_gen: u64;
        match mode {
            Mode::Single => {
                n_gen = match &preset.fixed_n {
                    Some(ns) => ns[m - 1],
                    None => preset.n_min.max(n_prev).max(need).max((gm * total_prev).ceil() as u64),
                };
                total_prev += (n_gen + phases[0].ell) as f64;
            }
            Mode::Pair => {
                let (rf, rg);
                match (&preset.fixed_n, preset.fixed_reps) {
                    (Some(ns), Some(r)) => {
                        n_gen = ns[m - 1];
                        rf = r;
                        rg = r;
                    }
                    _ => {
                        rf = ((m as f64 + 1.0).exp().ceil() as u64).max(rg_prev);
                        let exp_floor = phases.iter().map(|p| (p.atoms.len() as f64).exp().ceil() as u64).max().unwrap_or(1);
                        let grow = (gm * total_prev / rf as f64).ceil() as u64;
                        n_gen = match &preset.fixed_n {
                            Some(ns) => ns[m - 1],
                            None => preset
                                .n_min
                                .max(n_prev)
                                .max(need)
                                .max(exp_floor)
                                .max((m as f64).exp().ceil() as u64)
                                .max(grow),
                        };
                        rg = preset
                            .fixed_reps
                            .unwrap_or_else(|| rf.max((gm * (total_prev + (rf * n_gen) as f64) / n_gen as f64).ceil() as u64));
                    }
                }
                phases[0].reps = rf;
                phases[1].reps = rg;
                total_prev += (rf * (n_gen + phases[0].ell) + rg * (n_gen + phases[1].ell)) as f64;
                rg_prev = rg;
            }
        }
        let n_gen_pre = n_gen;
        let mut n_gen = n_gen;
        if preset.fixed_n.is_none() {
            // Coverage is not monotone in n, so re-check every atom at the chosen N.
            let params: Vec<BernoulliParams> =
                phases.iter().flat_map(|p| p.atoms.iter()).map(|a| atom_params(a, d, preset)).collect::<Result<_>>()?;
            while params.iter().any(|p| coverage(p, n_gen, eps / 2.0) < preset.coverage_target) {
                n_gen += 1;
                if n_gen > GENERATION_CAP {
                    return Err(Error::GenerationCap { cap: GENERATION_CAP, what: format!("round {m} coverage") });
                }
            }
            if mode == Mode::Pair && preset.fixed_reps.is_none() {
                // Keep R^g_m consistent with the final N_m.
                let rf = phases[0].reps;
                let prev = total_prev - (rf * (n_gen_pre + phases[0].ell) + phases[1].reps * (n_gen_pre + phases[1].ell)) as f64;
                let rg = rf.max((gm * (prev + (rf * n_gen) as f64) / n_gen as f64).ceil() as u64);
                phases[1].reps = rg;
                total_prev = prev + (rf * (n_gen + phases[0].ell) + rg * (n_gen + phases[1].ell)) as f64;
                rg_prev = rg;
            } else if mode == Mode::Single {
                total_prev += (n_gen - n_gen_pre) as f64;
            }
        }
        if need > n_gen && preset.fixed_n.is_none() {
            return Err(Error::InvalidInput(format!(
                "round {m}: N = {n_gen} is below the minimal generation {need} of the typical selections"
            )));
        }
        n_prev = n_gen;
        rounds.push(Round { m, eps, d_m, n_gen, phases });
    }
    Ok(Schedule { mode, d, m_max, fixed_point, alpha_cap, preset: preset.clone(), rounds, dropped })
}

#[allow(clippy::too_many_arguments)]
fn build_phase(
    input: &MenuInput,
    delta: &[f64],
    m: usize,
    eps: f64,
    sub: f64,
    d_m: f64,
    fixed_point: f64,
    alpha_cap: f64,
    mode: Mode,
    preset: &Preset,
    d: usize,
) -> Result<(PhaseSchedule, Vec<DroppedAtom>)> {
    let h = input.h;
    let df = d as f64;
    let mut atoms: Vec<MenuAtom> = Vec::new();
    let mut push = |alpha: f64, gamma_tilde: f64, kind: AtomKind| {
        if !atoms.iter().any(|a| (a.alpha - alpha).abs() <= 1e-12) {
            atoms.push(MenuAtom { alpha, gamma: gamma_tilde, gamma_tilde, log2_rho: 0.0, kind, min_generation: 0 });
        }
    };
    push(d_m, d_m, AtomKind::Diagonal);
    let zero_target = |alpha: f64| sub.min(alpha / 2.0).min(df);
    for &alpha in delta.iter().take(m) {
        if alpha < preset.filter_factor * sub {
            continue;
        }
        let v = h.eval(alpha);
        if v > 0.0 {
            push(alpha, v.min(alpha).min(df), AtomKind::Menu);
        } else {
            push(alpha, zero_target(alpha), AtomKind::Zero);
        }
    }
    if h.dom_min() == Some(0.0) {
        let a0 = if fixed_point == 0.0 { d_m } else { sub.min(fixed_point) / 2.0 };
        push(a0, a0.min(df), AtomKind::Origin);
    }
    if h.dom_max() == Some(f64::INFINITY) {
        let top = delta.iter().take(m).cloned().fold(df.max(m as f64), f64::max);
        let a_inf = (top * top).min(alpha_cap);
        let v = value_at_infinity(h);
        let gt = if v > 0.0 { v.min(df).min(a_inf) } else { zero_target(a_inf) };
        push(a_inf, gt, AtomKind::Infinity);
    }
    atoms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut drops = Vec::new();
    let mut theta = 0.0;
    if mode == Mode::Pair {
        let se = eps.sqrt();
        let need = |a: &MenuAtom| {
            let t1 = 1.0 - (a.alpha - d_m * se) / a.gamma_tilde;
            let t2 = 1.0 - (1.0 - se) * a.alpha / a.gamma_tilde;
            t1.max(t2).max(0.0)
        };
        atoms.retain(|a| {
            if a.kind == AtomKind::Diagonal {
                return true;
            }
            let t = need(a);
            if t >= 1.0 - 1e-9 {
                drops.push(DroppedAtom {
                    m,
                    phase: input.phase,
                    alpha: a.alpha,
                    reason: format!("contraction condition needs theta = {t:.4} >= 1"),
                });
                false
            } else {
                true
            }
        });
        theta = atoms.iter().filter(|a| a.kind != AtomKind::Diagonal).map(need).fold(0.0, f64::max);
        for a in atoms.iter_mut().filter(|a| a.kind != AtomKind::Diagonal) {
            a.gamma = (1.0 - theta) * a.gamma_tilde;
        }
    }
    if let Some(ns) = &preset.fixed_n {
        // Fixed generations may leave a window without any lattice class.
        let n = ns[m - 1];
        let mut kept = Vec::with_capacity(atoms.len());
        for a in atoms {
            let params = atom_params(&a, d, preset)?;
            if a.kind == AtomKind::Diagonal || typical_classes(&params, n, eps / 2.0).is_ok() {
                kept.push(a);
            } else {
                drops.push(DroppedAtom {
                    m,
                    phase: input.phase,
                    alpha: a.alpha,
                    reason: format!("no selected class at the fixed generation N = {n}"),
                });
            }
        }
        atoms = kept;
    }
    let count = atoms.len();
    let base = -(m as f64) - (count as f64).log2();
    for a in atoms.iter_mut() {
        a.log2_rho = match (a.kind, mode) {
            (AtomKind::Diagonal, _) => 0.0,
            (_, Mode::Single) => base,
            (_, Mode::Pair) => 2.0 * base,
        };
        let params = atom_params(a, d, preset)?;
        a.min_generation = match (&preset.fixed_n, min_generation(&params, eps / 2.0, preset.coverage_target)) {
            (_, Ok(n)) => n,
            (Some(_), Err(_)) => u64::MAX,
            (None, Err(e)) => return Err(e),
        };
    }
    let ell = separator_generation(count, d);
    Ok((PhaseSchedule { phase: input.phase, reps: 1, theta, ell, atoms }, drops))
}
