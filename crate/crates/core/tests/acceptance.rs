//! Acceptance suite: one pass/fail line per criterion, non-zero exit on failure.

use std::time::{Duration, Instant};

use mforge::bernoulli::{analytic_tau, partition_sum, solve_params, Branch};
use mforge::construct::brute::{compare, BruteMeasure};
use mforge::construct::{build_schedule, Preset, SymbolicMeasure};
use mforge::legendre::{conjugate_f, conjugate_tau, fixed_points, predict_dims, uniform_grid, Piece, SpectrumFunction};
use mforge::spectra::{ld_broadening, ld_from, sup_distance, tau_profile, ExponentDistribution, DP_MAX_BUCKETS};
use mforge::wavelet::{bridge_prediction, leader_tau, leaders, measure_tau_n, synth_from_spectrum, theta, SynthCase, WaveletSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tent(a: f64, peak: f64, b: f64) -> SpectrumFunction {
    SpectrumFunction::tent(a, peak, b, 1.0, 1).unwrap()
}

fn desk_small_pair() -> SymbolicMeasure {
    let s = build_schedule(&tent(0.8, 1.0, 1.2), Some(&tent(0.5, 1.0, 1.5)), 1.0, 3, &Preset::named("desk-small").unwrap()).unwrap();
    SymbolicMeasure::build(&s).unwrap()
}

fn tiny_pair() -> SymbolicMeasure {
    let s = build_schedule(&tent(0.8, 1.0, 1.2), Some(&tent(0.5, 1.0, 1.5)), 1.0, 2, &Preset::tiny()).unwrap();
    SymbolicMeasure::build(&s).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=3usize);
        let gamma = rng.gen_range(0.01..1.0) * d as f64;
        let alpha = gamma + rng.gen_range(0.0..3.0);
        let br = |b: bool| if b { Branch::High } else { Branch::Low };
        let p = solve_params(alpha, gamma, d, br(rng.gen()), br(rng.gen())).unwrap();
        worst = worst.max(p.entropy_residual()).max(p.alpha_residual());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-10 && t < Duration::from_secs(1), format!("max residual {worst:.2e}, {t:.2?}"))
}

fn criterion_2() -> Outcome {
    let q = uniform_grid(-5.0, 5.0, 0.1);
    let exact = analytic_tau(0.25, 1, &q).unwrap();
    let masses: Vec<f64> = (0..1u32 << 16).map(|k| 0.25f64.powi(k.count_ones() as i32) * 0.75f64.powi(16 - k.count_ones() as i32)).collect();
    let mut worst: f64 = 0.0;
    for (i, &qq) in q.iter().enumerate() {
        let classes = -partition_sum(0.25, 1, 16, qq) / 16.0;
        let direct = -masses.iter().map(|m| m.powf(qq)).sum::<f64>().log2() / 16.0;
        worst = worst.max((classes - exact.values()[i]).abs()).max((direct - exact.values()[i]).abs());
    }
    let spot = analytic_tau(0.25, 1, &[0.0, 1.0, 2.0]).unwrap();
    let v = spot.values();
    let ok = worst <= 1e-9 && v[1] == 0.0 && v[0] == -1.0 && (v[2] - 0.678072).abs() <= 1e-6;
    outcome(ok, format!("max quotient error {worst:.2e}; tau(0)={}, tau(1)={}, tau(2)={:.6}", v[0], v[1] + 0.0, v[2]))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let q = uniform_grid(-20.0, 20.0, 0.01);
    let tau = analytic_tau(0.25, 1, &q).unwrap();
    let star = conjugate_tau(&tau, &uniform_grid(0.0, 2.5, 1e-4), 1).unwrap();
    let back = conjugate_f(&star, &q).unwrap();
    let err = back.values().iter().zip(tau.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let fix = fixed_points(&star);
    let t = start.elapsed();
    let fp = fix.first().map_or(f64::NAN, |c| 0.5 * (c.lo + c.hi));
    let ok = err <= 1e-3 && (fp - 0.811278).abs() <= 1e-4 && t < Duration::from_secs(5);
    outcome(ok, format!("sup |(tau*)* - tau| = {err:.2e}, fixed point {fp:.6}, {t:.2?}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mu = desk_small_pair();
    let last = mu.stage_count();
    let mass_err = (mu.log2_total_mass(last).unwrap().exp2() - 1.0).abs();
    let z_ok = mu.runs.iter().all(|r| {
        let z = r.table.log2_z.exp2();
        (0.5..=1.0 + (-(r.m as f64)).exp2()).contains(&z)
    });
    let off: Vec<f64> = (1..=3).map(|m| mu.offdiag_mass(m).unwrap()).collect();
    let off_ok = (2..=3).all(|m| off[m - 1] <= (-((m - 1) as f64)).exp2());
    let report = compare(&tiny_pair(), 100_000, &[-2.0, -0.5, 0.0, 1.0, 2.0, 3.5]).unwrap();
    let t = start.elapsed();
    let ok = mass_err <= 1e-12 && z_ok && off_ok && report.cubes <= 100_000 && report.passes(1e-9) && t < Duration::from_secs(60);
    outcome(
        ok,
        format!(
            "mass error {mass_err:.1e}, Z in range {z_ok}, offdiag [{}], brute {} cubes max error {:.1e}, {t:.2?}",
            off.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join(", "),
            report.cubes,
            report.max_err()
        ),
    )
}

const FROZEN_TAU_S: f64 = 0.02140605753909064;
const FROZEN_TAU_S_PRIME: f64 = 0.040990742235988975;

fn criterion_5() -> Outcome {
    let mu = desk_small_pair();
    let q = uniform_grid(-3.0, 3.0, 0.1);
    let f_star = conjugate_f(&tent(0.8, 1.0, 1.2), &q).unwrap();
    let g_star = conjugate_f(&tent(0.5, 1.0, 1.5), &q).unwrap();
    let prof = tau_profile(&mu, &q, 1).unwrap();
    let a: Vec<f64> = prof.boundaries.iter().map(|b| sup_distance(&q, &b.at_s.tau, &f_star)).collect();
    let b: Vec<f64> = prof.boundaries.iter().map(|b| sup_distance(&q, &b.at_s_prime.tau, &g_star)).collect();
    let lit_a: Vec<f64> = prof.boundaries.iter().map(|b| sup_distance(&q, &b.at_s.tau, &g_star)).collect();
    let lit_b: Vec<f64> = prof.boundaries.iter().map(|b| sup_distance(&q, &b.at_s_prime.tau, &f_star)).collect();
    println!("    literal pairing diagnostic: s_m vs g* {lit_a:.4?}, s'_m vs f* {lit_b:.4?}");
    let dec = |v: &[f64]| v.len() == 3 && v.windows(2).all(|w| w[1] < w[0]);
    let frozen = (a[2] - FROZEN_TAU_S).abs() <= 1e-9 && (b[2] - FROZEN_TAU_S_PRIME).abs() <= 1e-9;
    outcome(dec(&a) && dec(&b) && frozen, format!("s_m vs f* {a:.4?}, s'_m vs g* {b:.4?}, frozen terminal values match {frozen}"))
}

/// `(target, m, max deviation, delta)` at the end of each run of desk-small.
const FROZEN_LD: [(&str, usize, f64, f64); 4] = [
    ("f", 2, 0.23713341573044208, 0.6569004648018136),
    ("g", 2, 0.10659142497327331, 0.3981988770056759),
    ("f", 3, 0.19878715118724918, 0.47751188286269314),
    ("g", 3, 0.09046079210521733, 0.25415220832685426),
];

fn criterion_6() -> Outcome {
    let mu = desk_small_pair();
    let eps = 0.02;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in 1..=3 {
        for (label, h, s) in [("f", tent(0.8, 1.0, 1.2), mu.s_m(m).unwrap()), ("g", tent(0.5, 1.0, 1.5), mu.s_prime_m(m).unwrap())] {
            let grid = uniform_grid(h.dom_min().unwrap(), h.dom_max().unwrap(), 0.02);
            let ed = ExponentDistribution::new(&mu, s, DP_MAX_BUCKETS).unwrap();
            let cs = ld_from(&ed, &grid, eps);
            let br = ld_broadening(&mu, s, eps, ed.broadening(), &h, &grid).unwrap();
            let dev = grid.iter().zip(&cs.c).map(|(a, c)| (c - h.eval(*a)).abs()).fold(0.0, f64::max);
            if m == 1 {
                println!("    m=1 diagnostic {label}: max deviation {dev:.3}, delta {:.3} (menu hull does not cover dom yet)", br.total);
                continue;
            }
            let frozen = FROZEN_LD.iter().find(|r| r.0 == label && r.1 == m).unwrap();
            let same = (dev - frozen.2).abs() <= 1e-9 && (br.total - frozen.3).abs() <= 1e-9;
            ok &= dev <= br.total && same;
            parts.push(format!("{label} m={m}: {dev:.4} <= {:.4}", br.total));
        }
    }
    outcome(ok, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut coef_err: f64 = 0.0;
    let mut bridge_ok = true;
    let mut literal: f64 = 0.0;
    let q = uniform_grid(-3.0, 3.0, 0.5);
    let tiny = tiny_pair();
    let brute = BruteMeasure::enumerate(&tiny, 100_000).unwrap();
    let desk = desk_small_pair();
    for (g1, g2) in [(0.0, 1.0), (0.5, 0.5), (0.25, 2.0)] {
        let s = WaveletSeries::from_measure(&tiny, g1, g2, 14).unwrap();
        for n in 0..=14usize {
            let masses = brute.masses_at(n);
            for (k, l) in s.log2_lambda[n].iter().enumerate() {
                let bits: Vec<u8> = (0..n).map(|j| ((k >> (n - 1 - j)) & 1) as u8).collect();
                let m = masses.get(&bits).copied().unwrap_or(0.0);
                let want = if m > 0.0 { -(n as f64) * g1 + g2 * m.log2() } else { f64::NEG_INFINITY };
                coef_err = coef_err.max(if want == *l { 0.0 } else { (want - l).abs() });
            }
        }
        let top: Vec<f64> = s.log2_mu[14].clone();
        let aggregated = WaveletSeries::from_table(&top, g1, g2).unwrap();
        let d = WaveletSeries::from_measure(&desk, g1, g2, 14).unwrap();
        for (series, other) in [(&s, &aggregated), (&d, &d)] {
            for (ra, rb) in series.log2_lambda.iter().zip(&other.log2_lambda) {
                for (x, y) in ra.iter().zip(rb) {
                    coef_err = coef_err.max(if x == y { 0.0 } else { (x - y).abs() });
                }
            }
            let lt = leader_tau(&leaders(series), &q).unwrap();
            for n in 1..=14 {
                for (i, &qq) in q.iter().enumerate() {
                    let t = lt.per_n[n - 1][i];
                    bridge_ok &= (t - bridge_prediction(series, n, qq)).abs() <= lt.bridge_bound(n, qq) + 1e-12;
                    literal = literal.max((t - (measure_tau_n(series, n, g2 * qq) - g1 * qq)).abs());
                }
            }
        }
    }
    println!("    literal form tau(gamma2 q) - gamma1 q: largest discrepancy {literal:.3}");
    let mut theta_err: f64 = 0.0;
    let mut lambdas = Vec::new();
    let targets = vec![
        tent(0.5, 1.0, 1.5),
        SpectrumFunction::tent(1.0, 2.0, 3.0, 0.5, 1).unwrap(),
        SpectrumFunction::new(vec![Piece::new(0.3, 0.9, vec![(0.3, 0.1), (0.6, 0.5), (0.9, 0.2)]).unwrap()], vec![(1.2, 0.7)], f64::NEG_INFINITY, 1).unwrap(),
    ];
    for f in &targets {
        let r = synth_from_spectrum(f).unwrap();
        if let SynthCase::Scale { lambda0, theta: th } = r.case {
            theta_err = theta_err.max((th - 1.0).abs()).max((theta(f, lambda0) - 1.0).abs());
            lambdas.push(lambda0);
        }
    }
    let t = start.elapsed();
    let ok = coef_err <= 1e-12 && bridge_ok && theta_err <= 1e-10 && lambdas.len() == 3 && t < Duration::from_secs(30);
    outcome(ok, format!("coefficient error {coef_err:.1e}, bridge within bound {bridge_ok}, |theta(lambda0)-1| {theta_err:.1e}, lambda0 {lambdas:.6?}, {t:.2?}"))
}

/// Values of every level-set dimension from the max-over-windows
/// definitions, on a grid containing all knots.
fn brute_dims(f: &SpectrumFunction, g: &SpectrumFunction, grid: &[f64], a: f64, b: f64) -> [f64; 6] {
    let ninf = f64::NEG_INFINITY;
    let (i0, i1) = (f.dom_min().unwrap(), f.dom_max().unwrap());
    let (j0, j1) = (g.dom_min().unwrap(), g.dom_max().unwrap());
    let admissible = |x: f64, y: f64| j0 <= x && y <= j1 && x <= i1 && y >= i0;
    let max_on = |h: &SpectrumFunction, x: f64, y: f64| grid.iter().filter(|&&t| t >= x && t <= y).map(|&t| h.eval(t)).fold(ninf, f64::max);
    let e_h = |x: f64, y: f64| if admissible(x, y) { g.eval(x).min(g.eval(y)).min(max_on(f, x, y)) } else { ninf };
    let e_p = |x: f64, y: f64| if admissible(x, y) { max_on(g, x, y) } else { ninf };
    let mut ext: Vec<f64> = grid.to_vec();
    ext.push(f64::INFINITY);
    let above = |x: f64, e: &dyn Fn(f64, f64) -> f64| ext.iter().filter(|&&y| y >= x).map(|&y| e(x, y)).fold(ninf, f64::max);
    let below = |y: f64, e: &dyn Fn(f64, f64) -> f64| ext.iter().filter(|&&x| x <= y).map(|&x| e(x, y)).fold(ninf, f64::max);
    [e_h(a, b), e_p(a, b), above(a, &e_h), below(b, &e_h), above(a, &e_p), below(b, &e_p)]
}

fn random_pair(rng: &mut ChaCha8Rng) -> (SpectrumFunction, SpectrumFunction) {
    let step = 0.125;
    let pick = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + step * rng.gen_range(0..=((hi - lo) / step).round() as i64) as f64;
    let j0 = pick(rng, 0.25, 1.25);
    let j1 = pick(rng, j0 + step, 2.75);
    let pg = pick(rng, j0, j1);
    let top = pick(rng, 0.25, 1.0);
    let ends = (pick(rng, 0.0, top), pick(rng, 0.0, top));
    let mut knots = vec![(j0, ends.0), (pg, top), (j1, ends.1)];
    knots.dedup_by(|x, y| x.0 == y.0);
    let g = SpectrumFunction::new(vec![Piece::new(j0, j1, knots).unwrap()], vec![], f64::NEG_INFINITY, 1).unwrap();
    let i0 = pick(rng, j0, j1);
    let i1 = pick(rng, i0, j1);
    let scale = [0.0, 0.5, 1.0][rng.gen_range(0..3)];
    let mut fk: Vec<(f64, f64)> = [i0, pg, i1].iter().filter(|&&x| x >= i0 && x <= i1).map(|&x| (x, scale * g.eval(x))).collect();
    fk.sort_by(|a, b| a.0.total_cmp(&b.0));
    fk.dedup_by(|x, y| x.0 == y.0);
    let f = SpectrumFunction::new(vec![Piece::new(i0, i1, fk).unwrap()], vec![], f64::NEG_INFINITY, 1).unwrap();
    (f, g)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = uniform_grid(0.0, 3.0, 0.125);
    let mut mismatches = 0usize;
    let mut cases = 0usize;
    // finite E, -inf E, P-lower -inf below min J, above max I, P-upper -inf below min I, above max J
    let mut seen = [false; 6];
    for _ in 0..50 {
        let (f, g) = random_pair(&mut rng);
        let (i0, i1, j0, j1) = (f.dom_min().unwrap(), f.dom_max().unwrap(), g.dom_min().unwrap(), g.dom_max().unwrap());
        let mut ext = grid.clone();
        ext.push(f64::INFINITY);
        for (i, &a) in ext.iter().enumerate() {
            for &b in &ext[i..] {
                let p = predict_dims(&f, &g, a, b).unwrap().entries();
                let want = brute_dims(&f, &g, &grid, a, b);
                cases += 1;
                if p != want {
                    mismatches += 1;
                }
                seen[0] |= p[0].is_finite();
                seen[1] |= p[0] == f64::NEG_INFINITY;
                seen[2] |= a < j0 && p[4] == f64::NEG_INFINITY;
                seen[3] |= a > i1 && a <= j1 && p[4] == f64::NEG_INFINITY;
                seen[4] |= b < i0 && b >= j0 && p[5] == f64::NEG_INFINITY;
                seen[5] |= b > j1 && p[5] == f64::NEG_INFINITY;
            }
        }
    }
    let all = seen.iter().all(|&s| s);
    outcome(mismatches == 0 && all, format!("{cases} (f,g,alpha,beta) cases over 50 instances, {mismatches} mismatches, all branches hit {all}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 Bernoulli solver residuals", criterion_1),
        ("2 binomial partition oracle", criterion_2),
        ("3 Legendre duality", criterion_3),
        ("4 construction invariants", criterion_4),
        ("5 spectrum convergence trend", criterion_5),
        ("6 coarse LD spectra", criterion_6),
        ("7 wavelet bridge", criterion_7),
        ("8 predict_dims branches", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
