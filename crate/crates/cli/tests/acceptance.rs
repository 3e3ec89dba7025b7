//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_pi::baselines::{self, INDEX_SEGMENTS};
use spectral_pi::frequency::{boundary_frequencies, boundary_residual};
use spectral_pi::pade::{DEFAULT_KI_RANGE, DEFAULT_KP_RANGE, DEFAULT_RESOLUTION};
use spectral_pi::semi_discrete::decay_rate;
use spectral_pi::tuner::linspace;
use spectral_pi::{
    build_model, char_fn, dominant_poles, integral_index_tune, margins, model_error_map, simc,
    spectral_abscissa, stability_boundary, tune, ziegler_nichols, DeConfig, ErrorMethod, IntegralIndex,
    ModelOrder, PiGains, PlantParams, Scenario, SimcVariant, DEFAULT_SEGMENTS,
};

const OPTIMUM: (f64, f64) = (0.4614, 0.0793);
const OPTIMUM_TOL: f64 = 0.01;
const TUNE_BUDGET_SECS: f64 = 60.0;
const WGC: (f64, f64) = (0.4891, 0.001);
const PM_DEG: (f64, f64) = (42.6, 0.2);
const WPC: (f64, f64) = (1.4531, 0.001);
const GM: (f64, f64) = (3.13, 0.02);
const TABLE_II_TOL: f64 = 0.05;
const P95_LIMIT: f64 = 1e-3;
const FIRST_ORDER_RATIO: f64 = 10.0;
const POLE_RE_BAND: (f64, f64) = (-0.62, -0.55);
const SPREAD_LIMIT: f64 = 0.02;
const RESIDUAL_LIMIT: f64 = 1e-12;
const KU_TOL: f64 = 1e-9;
const DECAY_REL_TOL: f64 = 0.05;
const BOUNDARY_STEP: f64 = 0.02;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id} {} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn within(x: f64, (target, tol): (f64, f64)) -> bool {
    (x - target).abs() <= tol
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn main() {
    let plant = PlantParams::normalized();
    let config = DeConfig::default();
    let mut report = Report { failures: 0 };

    let start = Instant::now();
    let tuned = tune(&plant, &config, DEFAULT_SEGMENTS);
    let elapsed = start.elapsed().as_secs_f64();
    let optimum = tuned.as_ref().map(|t| t.gains).ok();
    match &tuned {
        Ok(t) => report.check(
            1,
            "optimum reproduction",
            within(t.gains.kp, (OPTIMUM.0, OPTIMUM_TOL))
                && within(t.gains.ki, (OPTIMUM.1, OPTIMUM_TOL))
                && elapsed < TUNE_BUDGET_SECS,
            format!("kp = {:.6}, ki = {:.6}, {elapsed:.2} s", t.gains.kp, t.gains.ki),
        ),
        Err(e) => report.check(1, "optimum reproduction", false, e.to_string()),
    }

    match optimum.map(|g| margins(&plant, &g)) {
        Some(Ok(m)) => report.check(
            2,
            "margins at the optimum",
            within(m.gain_crossover, WGC)
                && within(m.phase_margin, PM_DEG)
                && within(m.phase_crossover, WPC)
                && within(m.gain_margin, GM),
            format!(
                "wgc = {:.5}, PM = {:.3} deg, wpc = {:.5}, GM = {:.4}",
                m.gain_crossover, m.phase_margin, m.phase_crossover, m.gain_margin
            ),
        ),
        Some(Err(e)) => report.check(2, "margins at the optimum", false, e.to_string()),
        None => report.check(2, "margins at the optimum", false, "no optimum".into()),
    }

    let table_one = [
        ("ziegler_nichols", ziegler_nichols(&plant), (0.7069, 0.2121)),
        (
            "simc_conservative",
            simc(&plant, SimcVariant::Conservative),
            (0.2857, 0.0204),
        ),
        (
            "simc_aggressive",
            simc(&plant, SimcVariant::Aggressive),
            (0.9524, 0.2268),
        ),
    ];
    let pass = table_one
        .iter()
        .all(|(_, g, (kp, ki))| round4(g.kp) == *kp && round4(g.ki) == *ki);
    let detail = table_one
        .iter()
        .map(|(n, g, _)| format!("{n} ({:.4}, {:.4})", g.kp, g.ki))
        .collect::<Vec<_>>()
        .join(", ");
    report.check(3, "classical rules table", pass, detail);

    let horizon = baselines::index_horizon(&plant);
    let mut pass = true;
    let mut detail = Vec::new();
    for (index, (kp, ki)) in [
        (IntegralIndex::Iae, (0.8289, 0.2015)),
        (IntegralIndex::Itae, (0.7532, 0.1916)),
    ] {
        match integral_index_tune(&plant, index, 0.5, INDEX_SEGMENTS, horizon, &config) {
            Ok(g) => {
                pass &= within(g.kp, (kp, TABLE_II_TOL)) && within(g.ki, (ki, TABLE_II_TOL));
                detail.push(format!("{} ({:.4}, {:.4})", index.name(), g.kp, g.ki));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{}: {e}", index.name()));
            }
        }
    }
    report.check(4, "integral-index table", pass, detail.join(", "));

    let kp_axis = linspace(DEFAULT_KP_RANGE.0, DEFAULT_KP_RANGE.1, DEFAULT_RESOLUTION);
    let ki_axis = linspace(DEFAULT_KI_RANGE.0, DEFAULT_KI_RANGE.1, DEFAULT_RESOLUTION);
    let sd = ErrorMethod::SemiDiscrete(DEFAULT_SEGMENTS);
    let first = ErrorMethod::FirstOrderSemiDiscrete(DEFAULT_SEGMENTS);
    let methods = [sd, first, ErrorMethod::PadeTwo, ErrorMethod::PadeThree];
    match model_error_map(&plant, &kp_axis, &ki_axis, &methods, DEFAULT_SEGMENTS) {
        Ok(map) => {
            let stat = |m, f: &dyn Fn(ErrorMethod) -> spectral_pi::Result<f64>| f(m).unwrap_or(f64::NAN);
            let max = |m| stat(m, &|m| map.max_error(m));
            let p95 = stat(sd, &|m| map.percentile(m, 95.0));
            let (sd_max, first_max) = (max(sd), max(first));
            report.check(
                5,
                "semi-discrete accuracy",
                p95 < P95_LIMIT && first_max >= FIRST_ORDER_RATIO * sd_max,
                format!(
                    "{} stable cells, p95 = {p95:.3e}, max = {sd_max:.3e}, first-order max = {first_max:.3e}",
                    map.stable_cells()
                ),
            );
            let (p2, p3) = (max(ErrorMethod::PadeTwo), max(ErrorMethod::PadeThree));
            report.check(
                6,
                "approximation ordering",
                p3 < sd_max && sd_max < p2,
                format!("pade3 {p3:.3e} < semi-discrete {sd_max:.3e} < pade2 {p2:.3e}"),
            );
        }
        Err(e) => {
            report.check(5, "semi-discrete accuracy", false, e.to_string());
            report.check(6, "approximation ordering", false, e.to_string());
        }
    }

    match &tuned {
        Ok(t) => {
            let set = &t.poles;
            let real = set.real_poles().count();
            let pairs = set.complex_pairs().count();
            let in_band = set
                .poles()
                .iter()
                .all(|p| p.re >= POLE_RE_BAND.0 && p.re <= POLE_RE_BAND.1);
            report.check(
                7,
                "dominant pole structure",
                real == 1 && pairs == 1 && in_band && set.real_part_spread() < SPREAD_LIMIT,
                format!(
                    "{real} real, {pairs} pair(s), J = {:.6}, spread = {:.3e}",
                    set.abscissa(),
                    set.real_part_spread()
                ),
            );
        }
        Err(e) => report.check(7, "dominant pole structure", false, e.to_string()),
    }

    let (pass, detail) = property_suite(&plant);
    report.check(8, "property suite", pass, detail);

    let (pass, detail) = cli_determinism();
    report.check(9, "CLI determinism", pass, detail);

    if report.failures > 0 {
        println!("{} criterion/criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}

fn property_suite(plant: &PlantParams) -> (bool, String) {
    let mut notes = Vec::new();
    let mut pass = true;

    let mut worst_residual: f64 = 0.0;
    let mut symmetric = true;
    for kp in linspace(0.1, 1.4, 8) {
        for ki in linspace(0.01, 0.35, 8) {
            let gains = PiGains { kp, ki };
            let Ok(set) = dominant_poles(plant, &gains, DEFAULT_SEGMENTS) else {
                continue;
            };
            for p in set.poles() {
                worst_residual = worst_residual.max(char_fn(p.to_complex(), plant, &gains).norm());
                if p.im != 0.0 {
                    symmetric &= set.poles().iter().any(|q| q.re == p.re && q.im == -p.im);
                }
            }
        }
    }
    pass &= worst_residual < RESIDUAL_LIMIT && symmetric;
    notes.push(format!(
        "max |Δ| = {worst_residual:.1e}, conjugate closure {symmetric}"
    ));

    let omegas = boundary_frequencies(plant, 5);
    match stability_boundary(plant, &omegas) {
        Ok(points) => {
            let residual = points
                .iter()
                .map(|p| boundary_residual(plant, p))
                .fold(0.0, f64::max);
            let flips = points
                .iter()
                .filter(|p| {
                    let inner =
                        spectral_abscissa(plant, &p.gains().scaled(1.0 - BOUNDARY_STEP), DEFAULT_SEGMENTS);
                    let outer =
                        spectral_abscissa(plant, &p.gains().scaled(1.0 + BOUNDARY_STEP), DEFAULT_SEGMENTS);
                    matches!((inner, outer), (Ok(a), Ok(b)) if a < 0.0 && b > 0.0)
                })
                .count();
            pass &= residual < RESIDUAL_LIMIT && flips == points.len();
            notes.push(format!("boundary |Δ(jω)| = {residual:.1e}, sign flips {flips}/5"));
        }
        Err(e) => {
            pass = false;
            notes.push(e.to_string());
        }
    }

    let top = std::f64::consts::FRAC_PI_2 / plant.delay();
    let ku_boundary = stability_boundary(plant, &[top * (1.0 - 1e-12)])
        .map(|p| p[0].kp)
        .unwrap_or(f64::NAN);
    let ku_abscissa = spectral_abscissa(
        plant,
        &PiGains {
            kp: plant.ultimate_gain(),
            ki: 0.0,
        },
        DEFAULT_SEGMENTS,
    )
    .unwrap_or(f64::NAN);
    let ku_err = (ku_boundary - std::f64::consts::FRAC_PI_2).abs();
    pass &= ku_err < KU_TOL && ku_abscissa.abs() < KU_TOL;
    notes.push(format!("K_u error {ku_err:.1e}, J(K_u, 0) = {ku_abscissa:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_decay: f64 = 0.0;
    let mut sampled = 0;
    while sampled < 5 {
        let gains = PiGains {
            kp: rng.gen_range(0.05..1.4),
            ki: rng.gen_range(0.005..0.4),
        };
        let Ok(j) = spectral_abscissa(plant, &gains, DEFAULT_SEGMENTS) else {
            continue;
        };
        if j >= -0.02 {
            continue;
        }
        let slope = build_model(plant, &gains, DEFAULT_SEGMENTS, ModelOrder::Second)
            .and_then(|m| decay_rate(&m, Scenario::Tracking, 400.0 * plant.delay()))
            .unwrap_or(f64::NAN);
        let rel = ((slope - j) / j).abs();
        worst_decay = if rel.is_nan() {
            f64::NAN
        } else {
            worst_decay.max(rel)
        };
        sampled += 1;
    }
    pass &= worst_decay < DECAY_REL_TOL;
    notes.push(format!("decay slope error {:.2}%", 100.0 * worst_decay));

    (pass, notes.join(", "))
}

fn cli_determinism() -> (bool, String) {
    let dir = std::env::temp_dir().join(format!("spectral-pi-acceptance-{}", std::process::id()));
    if let Err(e) = fs::create_dir_all(&dir) {
        return (false, e.to_string());
    }
    let commands: [&[&str]; 11] = [
        &["tune"],
        &["sweep"],
        &["grid", "--resolution", "20"],
        &["simulate", "--kp", "0.4614", "--ki", "0.0793"],
        &["margins", "--kp", "0.4614", "--ki", "0.0793"],
        &["margin-grid", "--resolution", "15"],
        &["boundary"],
        &["baselines"],
        &["perf-opt", "--alpha", "0.5", "--generations", "40"],
        &["model-error", "--resolution", "15"],
        &["pade-compare", "--kp", "0.4614", "--ki", "0.0793"],
    ];
    let mut mismatched = Vec::new();
    let mut runs = 0;
    for args in commands {
        for format in ["csv", "json"] {
            let mut files = Vec::new();
            for copy in 0..2 {
                let path = dir.join(format!("{}-{copy}.{format}", args[0]));
                let status = Command::new(env!("CARGO_BIN_EXE_spectral-pi"))
                    .args(args)
                    .args(["--format", format, "--out"])
                    .arg(&path)
                    .output()
                    .map(|o| o.status.success())
                    .unwrap_or(false);
                files.push(if status { fs::read(&path).ok() } else { None });
                runs += 1;
            }
            if files[0].is_none() || files[0] != files[1] {
                mismatched.push(format!("{} ({format})", args[0]));
            }
        }
    }
    let _ = fs::remove_dir_all(&dir);
    if mismatched.is_empty() {
        (true, format!("{runs} runs, all pairs bit-identical"))
    } else {
        (false, format!("differing or failed: {}", mismatched.join(", ")))
    }
}
