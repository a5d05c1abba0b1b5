//! Configuration-driven pipeline behind the `mforge` binary:
//! validate, build, tau, ld, predict, wavelet and report.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::construct::{build_schedule, Mode, Preset, SampleOptions, Schedule, SymbolicMeasure};
use crate::dyadic::DyadicCube;
use crate::error::Error;
use crate::legendre::{
    conjugate_f, conjugate_tau, dominated, fixed_points, predict_dims, uniform_grid, validate_spectrum, validate_tau,
    LqFunction, SpectrumFunction, TOL,
};
use crate::spectra::{ld_broadening, ld_from, sup_distance, tau_profile, ExponentDistribution, DP_MAX_BUCKETS};
use crate::wavelet::{bridge_prediction, holder_profile, leader_tau, leaders, synth_from_spectrum, WaveletSeries};

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed or missing input: exit code 2.
    Input(String),
    /// Mathematically invalid target or violated bound: exit code 1.
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Invalid(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Invalid(m) => write!(f, "invalid: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::MissingGridPoint(_) => CliError::Input(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Closed grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        if !(self.step > 0.0 && self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(CliError::Input(format!("bad grid {self:?}")));
        }
        Ok(uniform_grid(self.min, self.max, self.step))
    }
}

/// Exponents of one wavelet series `F_{mu, gamma1, gamma2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletSpec {
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Contents of `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub f: Option<SpectrumFunction>,
    #[serde(default)]
    pub g: Option<SpectrumFunction>,
    #[serde(default)]
    pub tau: Option<LqFunction>,
    #[serde(default)]
    pub tau_upper: Option<LqFunction>,
    /// Ambient dimension for targets given as `tau`.
    #[serde(default = "one")]
    pub d: usize,
    /// Grid on which a `tau` target is conjugated.
    #[serde(default = "default_conj_grid")]
    pub conj_alpha_grid: GridSpec,
    /// Exact dimension `D`; defaults to the smallest fixed point of `f`.
    #[serde(default)]
    pub d_fix: Option<f64>,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_q_grid")]
    pub q_grid: GridSpec,
    #[serde(default = "default_alpha_step")]
    pub alpha_step: f64,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Stages sampled inside every run for `tau.csv`.
    #[serde(default = "default_per_run")]
    pub per_run: usize,
    #[serde(default = "default_predict_step")]
    pub predict_step: f64,
    #[serde(default = "default_wavelet")]
    pub wavelet: Vec<WaveletSpec>,
    #[serde(default = "default_wavelet_n_max")]
    pub wavelet_n_max: u32,
    #[serde(default = "default_x_step")]
    pub wavelet_x_step: f64,
    /// Number of `mu`-typical points whose Hölder profile is reported.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn one() -> usize {
    1
}
fn default_conj_grid() -> GridSpec {
    GridSpec { min: 0.0, max: 4.0, step: 0.01 }
}
fn default_m_max() -> usize {
    3
}
fn default_preset() -> String {
    "desk-small".into()
}
fn default_out() -> PathBuf {
    PathBuf::from("mforge-out")
}
fn default_q_grid() -> GridSpec {
    GridSpec { min: -3.0, max: 3.0, step: 0.1 }
}
fn default_alpha_step() -> f64 {
    0.02
}
fn default_eps() -> Vec<f64> {
    vec![0.02]
}
fn default_per_run() -> usize {
    2
}
fn default_predict_step() -> f64 {
    0.1
}
fn default_wavelet() -> Vec<WaveletSpec> {
    vec![WaveletSpec { gamma1: 0.0, gamma2: 1.0 }, WaveletSpec { gamma1: 0.5, gamma2: 0.5 }]
}
fn default_wavelet_n_max() -> u32 {
    12
}
fn default_x_step() -> f64 {
    1.0 / 1024.0
}
fn default_samples() -> usize {
    8
}

/// Sets `key` (dotted path) in a JSON object; `value` is parsed as JSON and
/// falls back to a string.
fn apply_override(root: &mut Value, key: &str, value: &str) -> CliResult<()> {
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| CliError::Input(format!("override {key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    Err(CliError::Input(format!("empty override key {key:?}")))
}

/// Reads `config.json` and applies `--key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    for o in overrides {
        let body = o.strip_prefix("--").ok_or_else(|| CliError::Input(format!("override {o:?} must look like --key=value")))?;
        let (k, v) = body.split_once('=').ok_or_else(|| CliError::Input(format!("override {o:?} must look like --key=value")))?;
        apply_override(&mut value, k, v)?;
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| io_err(path, e))?;
    if cfg.eps.iter().any(|e| !(*e > 0.0)) || !(cfg.alpha_step > 0.0) || !(cfg.predict_step > 0.0) || !(cfg.wavelet_x_step > 0.0) {
        return Err(CliError::Input("eps, alpha_step, predict_step and wavelet_x_step must be positive".into()));
    }
    Ok(cfg)
}

/// Targets after conversion and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub f: SpectrumFunction,
    pub g: Option<SpectrumFunction>,
    pub d_fix: f64,
    pub report: Value,
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Checks the targets and converts `tau` inputs to spectra.
pub fn resolve_targets(cfg: &RunConfig) -> CliResult<Targets> {
    let mut violations = Vec::new();
    let mut report = serde_json::Map::new();
    let (f, g, source) = match (&cfg.f, &cfg.g, &cfg.tau, &cfg.tau_upper) {
        (Some(f), g, None, None) => (f.clone(), g.clone(), if g.is_some() { "f,g" } else { "f" }),
        (None, None, Some(tau), upper) => {
            let rep = validate_tau(tau, cfg.d)?;
            violations.extend(rep.violations.iter().map(|v| format!("tau: {v}")));
            report.insert("tau".into(), json!(rep));
            if let Some(up) = upper {
                let rep = validate_tau(up, cfg.d)?;
                violations.extend(rep.violations.iter().map(|v| format!("tau_upper: {v}")));
                report.insert("tau_upper".into(), json!(rep));
                if let Some(q) = tau.q().iter().zip(tau.values()).find(|(q, t)| **t > up.eval(**q) + TOL).map(|p| *p.0) {
                    violations.push(format!("τ ≰ τ̄ at q = {q}"));
                }
            }
            if !violations.is_empty() {
                report.insert("source".into(), json!("tau"));
                report.insert("valid".into(), json!(false));
                report.insert("violations".into(), json!(violations));
                return Ok(Targets {
                    f: SpectrumFunction::point(0.0, 0.0, cfg.d)?,
                    g: None,
                    d_fix: 0.0,
                    report: Value::Object(report),
                    valid: false,
                    violations,
                });
            }
            let grid = cfg.conj_alpha_grid.points()?;
            let g = conjugate_tau(tau, &grid, cfg.d)?;
            let f = match upper {
                Some(up) => conjugate_tau(up, &grid, cfg.d)?,
                None => g.clone(),
            };
            (f, Some(g), if upper.is_some() { "tau,tau_upper" } else { "tau" })
        }
        _ => return Err(CliError::Input("provide exactly one of {f}, {f,g}, {tau}, {tau,tau_upper}".into())),
    };
    let rf = validate_spectrum(&f);
    violations.extend(rf.violations.iter().map(|v| format!("f: {v}")));
    report.insert("f_report".into(), json!(rf));
    if let Some(g) = &g {
        if g.d() != f.d() {
            return Err(CliError::Input(format!("f has d = {} but g has d = {}", f.d(), g.d())));
        }
        let rg = validate_spectrum(g);
        violations.extend(rg.violations.iter().map(|v| format!("g: {v}")));
        report.insert("g_report".into(), json!(rg));
        if !dominated(&f, g) {
            violations.push("f ≰ g".into());
        }
    }
    let fix = fixed_points(&f);
    let d_fix = match cfg.d_fix {
        Some(x) => {
            if !((f.eval(x) - x).abs() <= TOL * (1.0 + x)) {
                violations.push(format!("D = {x} is not a fixed point of f"));
            }
            x
        }
        None => fix.first().map_or(0.0, |c| c.lo),
    };
    let valid = violations.is_empty();
    report.insert("source".into(), json!(source));
    report.insert("valid".into(), json!(valid));
    report.insert("violations".into(), json!(violations));
    report.insert("d_fix".into(), json!(d_fix));
    report.insert("f".into(), json!(f));
    if let Some(g) = &g {
        report.insert("g".into(), json!(g));
    }
    Ok(Targets { f, g, d_fix, report: Value::Object(report), valid, violations })
}

fn valid_targets(cfg: &RunConfig) -> CliResult<Targets> {
    let t = resolve_targets(cfg)?;
    if !t.valid {
        return Err(CliError::Invalid(t.violations.join("; ")));
    }
    Ok(t)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Number formatting for CSV cells: shortest round-trip form, `inf`, `-inf`.
fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

/// JSON number, or its CSV spelling when not finite.
fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(num(x))
    }
}

struct Csv {
    path: PathBuf,
    w: csv::Writer<fs::File>,
}

impl Csv {
    fn create(path: PathBuf, header: &[&str]) -> CliResult<Self> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        Ok(Self { path, w })
    }

    fn row(&mut self, cells: Vec<String>) -> CliResult<()> {
        self.w.write_record(&cells).map_err(|e| io_err(&self.path, e))
    }

    fn finish(mut self) -> CliResult<()> {
        self.w.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Line plot of finite points of every series.
fn plot(path: &Path, title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> CliResult<()> {
    let pts = || series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts() {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| if b - a < 1e-12 { (a - 0.5, b + 0.5) } else { (a - 0.02 * (b - a), b + 0.02 * (b - a)) };
    let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
    let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(52)
            .build_cartesian_2d(x0..x1, y0..y1)?;
        chart.configure_mesh().x_desc(x_label).draw()?;
        for (i, (name, data)) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let finite: Vec<(f64, f64)> = data.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            chart
                .draw_series(LineSeries::new(finite, color.stroke_width(2)))?
                .label(name.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| io_err(path, e))
}

/// `validate`: writes `validate.json`; valid iff exit code 0.
pub fn cmd_validate(cfg: &RunConfig) -> CliResult<Value> {
    let t = resolve_targets(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("validate.json"), &t.report)?;
    if t.valid {
        Ok(t.report)
    } else {
        Err(CliError::Invalid(t.violations.join("; ")))
    }
}

/// `build`: writes `schedule.json` and `measure.meta.json`.
pub fn cmd_build(cfg: &RunConfig) -> CliResult<Value> {
    let t = valid_targets(cfg)?;
    let preset = Preset::named(&cfg.preset).map_err(|e| CliError::Input(e.to_string()))?;
    let schedule = build_schedule(&t.f, t.g.as_ref(), t.d_fix, cfg.m_max, &preset)?;
    let mu = SymbolicMeasure::build(&schedule)?;
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("schedule.json"), &schedule)?;
    let meta = mu.meta();
    write_json(&cfg.out_dir.join("measure.meta.json"), &meta)?;
    let last = mu.stage_count();
    let mut offdiag = Vec::new();
    for m in 1..=schedule.m_max {
        offdiag.push(mu.offdiag_mass(m)?);
    }
    Ok(json!({
        "stages": last,
        "n_total": mu.n_of(last)?,
        "log2_total_mass": mu.log2_total_mass(last)?,
        "z": mu.runs.iter().map(|r| r.table.log2_z.exp2()).collect::<Vec<_>>(),
        "offdiag_mass": offdiag,
        "dropped": schedule.dropped.len(),
    }))
}

fn load_measure(cfg: &RunConfig) -> CliResult<SymbolicMeasure> {
    let path = cfg.out_dir.join("schedule.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, format!("{e} (run `mforge build` first)")))?;
    let schedule: Schedule = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
    Ok(SymbolicMeasure::build(&schedule)?)
}

/// `tau`: writes `tau.csv` and `tau.svg`.
pub fn cmd_tau(cfg: &RunConfig) -> CliResult<Value> {
    let t = valid_targets(cfg)?;
    let mu = load_measure(cfg)?;
    let q = cfg.q_grid.points()?;
    let prof = tau_profile(&mu, &q, cfg.per_run)?;
    let f_star = conjugate_f(&t.f, &q)?;
    let g_star = t.g.as_ref().map(|g| conjugate_f(g, &q)).transpose()?;
    let mut csv = Csv::create(cfg.out_dir.join("tau.csv"), &["kind", "m", "s", "n", "q", "tau", "f_star", "g_star"])?;
    let mut emit = |kind: &str, m: String, st: &crate::spectra::StageTau| -> CliResult<()> {
        for (i, &qq) in q.iter().enumerate() {
            let gs = g_star.as_ref().map_or(String::new(), |g| num(g.values()[i]));
            csv.row(vec![kind.into(), m.clone(), st.s.to_string(), st.n.to_string(), num(qq), num(st.tau[i]), num(f_star.values()[i]), gs])?;
        }
        Ok(())
    };
    for st in &prof.stages {
        emit("stage", String::new(), st)?;
    }
    let mut distances = Vec::new();
    for b in &prof.boundaries {
        emit("s_m", b.m.to_string(), &b.at_s)?;
        emit("s_prime_m", b.m.to_string(), &b.at_s_prime)?;
        let mut row = json!({
            "m": b.m,
            "s_m": b.at_s.s,
            "s_prime_m": b.at_s_prime.s,
            "s_m_vs_f_star": jnum(sup_distance(&q, &b.at_s.tau, &f_star)),
            "s_prime_m_vs_f_star": jnum(sup_distance(&q, &b.at_s_prime.tau, &f_star)),
        });
        if let Some(g) = &g_star {
            row["s_m_vs_g_star"] = jnum(sup_distance(&q, &b.at_s.tau, g));
            row["s_prime_m_vs_g_star"] = jnum(sup_distance(&q, &b.at_s_prime.tau, g));
        }
        distances.push(row);
    }
    csv.finish()?;
    let mut series = vec![("f*".to_string(), q.iter().copied().zip(f_star.values().iter().copied()).collect::<Vec<_>>())];
    if let Some(g) = &g_star {
        series.push(("g*".into(), q.iter().copied().zip(g.values().iter().copied()).collect()));
    }
    if let Some(b) = prof.boundaries.last() {
        series.push((format!("tau at s_{}", b.m), q.iter().copied().zip(b.at_s.tau.iter().copied()).collect()));
        if mu.mode() == Mode::Pair {
            series.push((format!("tau at s'_{}", b.m), q.iter().copied().zip(b.at_s_prime.tau.iter().copied()).collect()));
        }
    }
    plot(&cfg.out_dir.join("tau.svg"), "L^q profile at the last round", "q", &series)?;
    Ok(json!({ "boundaries": distances }))
}

fn alpha_grid(h: &SpectrumFunction, cap: f64, step: f64) -> CliResult<Vec<f64>> {
    let lo = h.dom_min().ok_or_else(|| CliError::Invalid("empty domain".into()))?;
    let hi = h.dom_max().map_or(cap, |x| x.min(cap));
    if !lo.is_finite() {
        return Ok(vec![]);
    }
    Ok(uniform_grid(lo, hi.max(lo), step))
}

/// `ld`: writes `ld.csv` and `ld.svg`.
pub fn cmd_ld(cfg: &RunConfig) -> CliResult<Value> {
    let t = valid_targets(cfg)?;
    let mu = load_measure(cfg)?;
    let cap = mu.schedule.alpha_cap;
    let mut csv = Csv::create(
        cfg.out_dir.join("ld.csv"),
        &["target", "m", "s", "n", "eps", "alpha", "c", "h", "delta", "dp_broadening"],
    )?;
    let mut checks = Vec::new();
    let mut series = Vec::new();
    let mut targets: Vec<(&str, &SpectrumFunction)> = vec![("f", &t.f)];
    if let (Some(g), Mode::Pair) = (&t.g, mu.mode()) {
        targets.push(("g", g));
    }
    for m in 1..=mu.schedule.m_max {
        for &(label, h) in &targets {
            let s = if label == "f" { mu.s_m(m) } else { mu.s_prime_m(m) };
            let Some(s) = s else { continue };
            let grid = alpha_grid(h, cap, cfg.alpha_step)?;
            let ed = ExponentDistribution::new(&mu, s, DP_MAX_BUCKETS)?;
            for &eps in &cfg.eps {
                let cs = ld_from(&ed, &grid, eps);
                let br = ld_broadening(&mu, s, eps, ed.broadening(), h, &grid)?;
                let mut worst: f64 = 0.0;
                for (a, c) in grid.iter().zip(&cs.c) {
                    let hv = h.eval(*a);
                    if hv.is_finite() {
                        worst = worst.max((c - hv).abs());
                    }
                    csv.row(vec![
                        label.into(),
                        m.to_string(),
                        s.to_string(),
                        cs.n.to_string(),
                        num(eps),
                        num(*a),
                        num(*c),
                        num(hv),
                        num(br.total),
                        num(cs.broadening),
                    ])?;
                }
                checks.push(json!({ "target": label, "m": m, "s": s, "eps": eps, "max_deviation": jnum(worst), "delta": br.total, "within": worst.is_finite() && worst <= br.total, "broadening": br }));
                if m == mu.schedule.m_max && eps == cfg.eps[0] {
                    series.push((format!("c at {label} run end"), grid.iter().copied().zip(cs.c.iter().copied()).collect::<Vec<_>>()));
                    series.push((label.to_string(), grid.iter().map(|&a| (a, h.eval(a))).collect()));
                }
            }
        }
    }
    csv.finish()?;
    plot(&cfg.out_dir.join("ld.svg"), "Coarse large-deviation exponents", "alpha", &series)?;
    Ok(json!({ "checks": checks }))
}

/// `predict`: writes `predict.csv` over an `(alpha, beta)` grid.
pub fn cmd_predict(cfg: &RunConfig) -> CliResult<Value> {
    let t = valid_targets(cfg)?;
    let g = t.g.clone().unwrap_or_else(|| t.f.clone());
    let lo = t.f.dom_min().unwrap_or(0.0).min(g.dom_min().unwrap_or(0.0));
    let cap = 64.0 * t.f.d() as f64;
    let top = [t.f.dom_max(), g.dom_max()].into_iter().flatten().filter(|x| x.is_finite()).fold(lo, f64::max).min(cap);
    let mut grid = uniform_grid((lo - cfg.predict_step).max(0.0), top + cfg.predict_step, cfg.predict_step);
    if t.f.has_infinity() || g.has_infinity() {
        grid.push(f64::INFINITY);
    }
    ensure_dir(&cfg.out_dir)?;
    let mut csv = Csv::create(
        cfg.out_dir.join("predict.csv"),
        &["alpha", "beta", "dim_h_e", "dim_p_e", "dim_h_lower", "dim_h_upper", "dim_p_lower", "dim_p_upper"],
    )?;
    let mut rows = 0usize;
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i..] {
            let p = predict_dims(&t.f, &g, a, b)?;
            let mut cells = vec![num(a), num(b)];
            cells.extend(p.entries().iter().map(|&x| num(x)));
            csv.row(cells)?;
            rows += 1;
        }
    }
    csv.finish()?;
    Ok(json!({ "rows": rows, "grid_points": grid.len() }))
}

/// `wavelet`: writes `wavelet.csv`, `wavelet_tau.csv`, `wavelet_function.csv`,
/// `wavelet_holder.csv`, `wavelet.json` and `wavelet.svg`.
pub fn cmd_wavelet(cfg: &RunConfig) -> CliResult<Value> {
    let t = valid_targets(cfg)?;
    let mu = load_measure(cfg)?;
    if mu.d() != 1 {
        return Err(CliError::Invalid(format!("wavelet series need d = 1, the measure has d = {}", mu.d())));
    }
    let n_max = cfg.wavelet_n_max;
    let q = cfg.q_grid.points()?;
    let xs = uniform_grid(0.0, 1.0, cfg.wavelet_x_step);
    let samples = mu.sample(&SampleOptions { count: cfg.samples, seed: cfg.seed, max_stages: None, with_members: false })?;
    let dir = &cfg.out_dir;
    let mut coef = Csv::create(dir.join("wavelet.csv"), &["gamma1", "gamma2", "n", "k", "log2_lambda", "log2_leader"])?;
    let mut tau = Csv::create(dir.join("wavelet_tau.csv"), &["gamma1", "gamma2", "n", "q", "leader_tau", "bridge", "bound"])?;
    let mut func = Csv::create(dir.join("wavelet_function.csv"), &["gamma1", "gamma2", "x", "F"])?;
    let mut hold = Csv::create(dir.join("wavelet_holder.csv"), &["gamma1", "gamma2", "sample", "x", "n", "exponent", "coefficient_exponent"])?;
    let mut series_json = Vec::new();
    let mut plots = Vec::new();
    for spec in &cfg.wavelet {
        let series = WaveletSeries::from_measure(&mu, spec.gamma1, spec.gamma2, n_max)?;
        let table = leaders(&series);
        let lt = leader_tau(&table, &q)?;
        let (g1, g2) = (num(spec.gamma1), num(spec.gamma2));
        for (n, row) in table.log2_leader.iter().enumerate() {
            for (k, l) in row.iter().enumerate() {
                if l.is_finite() {
                    coef.row(vec![g1.clone(), g2.clone(), n.to_string(), k.to_string(), num(table.log2_lambda[n][k]), num(*l)])?;
                }
            }
        }
        let mut worst_excess: f64 = f64::NEG_INFINITY;
        for n in 1..=n_max as usize {
            for (i, &qq) in q.iter().enumerate() {
                let pred = bridge_prediction(&series, n, qq);
                let bound = lt.bridge_bound(n, qq);
                worst_excess = worst_excess.max((lt.per_n[n - 1][i] - pred).abs() - bound);
                tau.row(vec![g1.clone(), g2.clone(), n.to_string(), num(qq), num(lt.per_n[n - 1][i]), num(pred), num(bound)])?;
            }
        }
        let values = series.evaluate(&xs);
        for (x, v) in xs.iter().zip(&values) {
            func.row(vec![g1.clone(), g2.clone(), num(*x), num(*v)])?;
        }
        plots.push((format!("gamma1={g1} gamma2={g2}"), xs.iter().copied().zip(values).collect::<Vec<_>>()));
        for (i, smp) in samples.iter().enumerate() {
            let x = smp.point[0];
            let hp = holder_profile(&table, x)?;
            for (j, e) in hp.exponents.iter().enumerate() {
                let n = j as u32 + 1;
                let cube = DyadicCube::of_point(&[x], n)?;
                let own = -series.log2_lambda[n as usize][cube.indices_u64().map_or(0, |v| v[0] as usize)] / n as f64;
                hold.row(vec![g1.clone(), g2.clone(), i.to_string(), num(x), n.to_string(), num(*e), num(own)])?;
            }
        }
        series_json.push(json!({
            "gamma1": spec.gamma1,
            "gamma2": spec.gamma2,
            "n_max": n_max,
            "tail_bound": jnum(series.tail_bound()),
            "truncation_gap": table.truncation_gap,
            "bridge_within_bound": worst_excess <= 1e-12,
            "leader_tau_tail_min": lt.tail_min,
        }));
    }
    coef.finish()?;
    tau.finish()?;
    func.finish()?;
    hold.finish()?;
    plot(&dir.join("wavelet.svg"), "Wavelet series over the constructed measure", "x", &plots)?;
    let synth = match synth_from_spectrum(&t.f) {
        Ok(r) => json!(r),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    let out = json!({ "series": series_json, "synth": synth });
    write_json(&dir.join("wavelet.json"), &out)?;
    Ok(out)
}

/// Numerical tolerances in effect.
pub fn tolerances() -> Value {
    json!({
        "legendre_tol": TOL,
        "bernoulli_residual": 1e-10,
        "partition_identity": 1e-9,
        "legendre_duality": 1e-3,
        "total_mass": 1e-12,
        "brute_force": 1e-9,
        "wavelet_coefficient": 1e-12,
        "theta": 1e-10,
        "dp_max_buckets": DP_MAX_BUCKETS,
    })
}

/// Design knobs that depart from the literal construction.
pub fn deviations() -> Vec<&'static str> {
    vec![
        "repetition counts follow a growth policy with gain G instead of the asymptotic conditions",
        "eps_m and the vanishing-value root come from the preset",
        "desk presets use the high branch for p",
        "D_m is clamped to at most d",
        "N_m is raised until every selected atom reaches the coverage target",
        "exponents with no admissible target are dropped and listed in the schedule",
        "alpha_m(inf) is capped",
        "exponent distributions use adaptive buckets with a reported broadening",
        "sampled points use the midpoint of the first 52 levels",
        "the mother wavelet is a compactly supported hat difference with sup norm 1",
        "leaders are computed from coefficients up to n_max",
    ]
}

/// `report`: every stage in order plus `manifest.json`.
pub fn cmd_report(cfg: &RunConfig) -> CliResult<Value> {
    let validate = cmd_validate(cfg)?;
    let build = cmd_build(cfg)?;
    let tau = cmd_tau(cfg)?;
    let ld = cmd_ld(cfg)?;
    let predict = cmd_predict(cfg)?;
    let wavelet = if validate["f"]["d"] == json!(1) { cmd_wavelet(cfg)? } else { json!({ "skipped": "d > 1" }) };
    let preset = Preset::named(&cfg.preset).map_err(|e| CliError::Input(e.to_string()))?;
    let mut files: Vec<String> = fs::read_dir(&cfg.out_dir)
        .map_err(|e| io_err(&cfg.out_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n != "manifest.json")
        .collect();
    files.sort();
    let manifest = json!({
        "config": cfg,
        "preset": preset,
        "tolerances": tolerances(),
        "deviations": deviations(),
        "files": files,
        "results": { "validate": validate, "build": build, "tau": tau, "ld": ld, "predict": predict, "wavelet": wavelet },
    });
    write_json(&cfg.out_dir.join("manifest.json"), &manifest)?;
    Ok(json!({ "files": manifest["files"] }))
}

#[derive(Parser, Debug)]
#[command(name = "mforge", version, about = "Inverse multifractal constructions at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct CmdArgs {
    /// Path to config.json.
    config: PathBuf,
    /// Overrides of config keys, `--key=value` (dotted keys reach nested fields).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the targets and write validate.json.
    Validate(CmdArgs),
    /// Build the schedule and the symbolic measure.
    Build(CmdArgs),
    /// L^q profile of the built measure.
    Tau(CmdArgs),
    /// Coarse large-deviation spectra of the built measure.
    Ld(CmdArgs),
    /// Predicted level-set dimensions over an (alpha, beta) grid.
    Predict(CmdArgs),
    /// Wavelet series, leaders and Hölder profiles over the built measure.
    Wavelet(CmdArgs),
    /// Run every stage and write manifest.json.
    Report(CmdArgs),
}

fn set_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("MFORGE_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::Input(format!("MFORGE_THREADS={v:?} is not a thread count")))?;
        // A pool installed earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (a, f): (&CmdArgs, fn(&RunConfig) -> CliResult<Value>) = match &cli.command {
        Command::Validate(a) => (a, cmd_validate),
        Command::Build(a) => (a, cmd_build),
        Command::Tau(a) => (a, cmd_tau),
        Command::Ld(a) => (a, cmd_ld),
        Command::Predict(a) => (a, cmd_predict),
        Command::Wavelet(a) => (a, cmd_wavelet),
        Command::Report(a) => (a, cmd_report),
    };
    let result = set_threads().and_then(|_| load_config(&a.config, &a.overrides)).and_then(|cfg| f(&cfg));
    match result {
        Ok(v) => {
            println!("{}", serde_json::to_string(&v).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("mforge: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_keys() {
        let mut v = json!({ "q_grid": { "min": -3, "max": 3, "step": 0.1 } });
        apply_override(&mut v, "q_grid.step", "0.5").unwrap();
        apply_override(&mut v, "preset", "tiny").unwrap();
        assert_eq!(v["q_grid"]["step"], json!(0.5));
        assert_eq!(v["preset"], json!("tiny"));
        assert!(apply_override(&mut v, "preset.x", "1").is_err());
    }

    #[test]
    fn cell_formatting() {
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(2.0), "2.0");
        assert_eq!(num(-7.5e-17), "-7.5e-17");
    }

    #[test]
    fn exactly_one_target_family() {
        let f = SpectrumFunction::tent(0.5, 1.0, 1.5, 1.0, 1).unwrap();
        let tau = LqFunction::new(vec![0.0, 1.0], vec![-1.0, 0.0], crate::legendre::Dom::R).unwrap();
        let mut cfg: RunConfig = serde_json::from_value(json!({})).unwrap();
        assert_eq!(resolve_targets(&cfg).unwrap_err().exit_code(), 2);
        cfg.f = Some(f);
        cfg.tau = Some(tau);
        assert_eq!(resolve_targets(&cfg).unwrap_err().exit_code(), 2);
        cfg.tau = None;
        let t = resolve_targets(&cfg).unwrap();
        assert!(t.valid);
        assert_eq!(t.d_fix, 1.0);
    }

    #[test]
    fn tau_pair_order_is_checked() {
        let q = uniform_grid(-2.0, 2.0, 0.5);
        let lower = LqFunction::new(q.clone(), q.iter().map(|x| (x - 1.0).min(0.8 * (x - 1.0))).collect(), crate::legendre::Dom::R).unwrap();
        let upper = LqFunction::new(q.clone(), q.iter().map(|x| 0.9 * (x - 1.0)).collect(), crate::legendre::Dom::R).unwrap();
        let mut cfg: RunConfig = serde_json::from_value(json!({})).unwrap();
        cfg.tau = Some(upper.clone());
        cfg.tau_upper = Some(lower.clone());
        let t = resolve_targets(&cfg).unwrap();
        assert!(!t.valid);
        assert!(t.violations.iter().any(|v| v.contains("τ ≰ τ̄")));
        cfg.tau = Some(lower);
        cfg.tau_upper = Some(upper);
        let t = resolve_targets(&cfg).unwrap();
        assert!(t.valid, "{:?}", t.violations);
    }
}
