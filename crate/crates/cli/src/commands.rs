use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};
use spectral_pi::pade::{DEFAULT_KI_RANGE, DEFAULT_KP_RANGE, DEFAULT_RESOLUTION};
use spectral_pi::tuner::linspace;
use spectral_pi::{
    baselines, build_model, frequency, gain_trajectory, integral_index_tune, margin_grid, margins,
    model_error_map, optimal_ki_sweep, simulate, spectral_abscissa, spectrum_fidelity, stability_boundary,
    stability_grid, tune, DeConfig, ErrorMethod, GainBounds, IntegralIndex, Method, ModelOrder, PiGains,
    PlantParams, PoleSet, Scenario,
};

use crate::output::{num, object, sig, Output};
use crate::{Command, DeArgs, Failure, GlobalArgs, GridArgs, IndexArg, MethodArg, OrderArg, ScenarioArg};

const GRID_KP_RANGE: (f64, f64) = (0.01, 1.5);
const GRID_KI_RANGE: (f64, f64) = (0.005, 0.4);
const GRID_RESOLUTION: usize = 100;
const SIMULATION_HORIZON_DELAYS: f64 = 40.0;

pub fn run(global: &GlobalArgs, plant: PlantParams, command: &Command) -> Result<(), Failure> {
    let segments = global.segments;
    match command {
        Command::Tune { de } => {
            let config = de_config(de, global.seed);
            let out = prepare(global, "tune", json!({ "de": config }))?;
            let result = tune(&plant, &config, segments)?;
            let report = margins(&plant, &result.gains).ok();
            let value = json!({
                "gains": result.gains,
                "normalized_gains": result.normalized_gains,
                "abscissa": num(result.abscissa()),
                "poles": poles_value(&result.poles),
                "margins": report,
                "evaluations": result.evaluations,
            });
            println!(
                "optimal gains: kp = {}, ki = {} (normalized kp = {}, ki = {})",
                sig(result.gains.kp),
                sig(result.gains.ki),
                sig(result.normalized_gains.kp),
                sig(result.normalized_gains.ki)
            );
            print_poles(&result.poles);
            match report {
                Some(r) => println!(
                    "wgc = {} rad/s, PM = {} deg, wpc = {} rad/s, GM = {} ({} dB)",
                    sig(r.gain_crossover),
                    sig(r.phase_margin),
                    sig(r.phase_crossover),
                    sig(r.gain_margin),
                    sig(r.gain_margin_db)
                ),
                None => println!("margins: undefined"),
            }
            println!("cost evaluations: {}", result.evaluations);
            out.emit_record(value)?;
        }
        Command::Sweep { kp_range, points } => {
            check_count("points", *points, 1)?;
            let out = prepare(
                global,
                "sweep",
                json!({ "kp_range": [kp_range.0, kp_range.1], "points": points }),
            )?;
            let kp = linspace(kp_range.0, kp_range.1, *points);
            let sweep = optimal_ki_sweep(&plant, &kp, segments)?;
            let best = sweep
                .iter()
                .filter(|p| p.j_star.is_finite())
                .min_by(|a, b| a.j_star.total_cmp(&b.j_star))
                .ok_or_else(|| Failure::Infeasible("no kp in the sweep admits a stabilizing ki".into()))?;
            let stable = sweep.iter().filter(|p| p.j_star < 0.0).count();
            println!(
                "{} of {} kp values stabilizable; best kp = {}, ki* = {}, J* = {}",
                stable,
                sweep.len(),
                sig(best.kp),
                sig(best.ki_star),
                sig(best.j_star)
            );
            out.emit(|| to_value(&sweep), |w| write_rows(w, &sweep))?;
        }
        Command::Grid { grid } => {
            let (kp_axis, ki_axis) = axes(grid, GRID_KP_RANGE, GRID_KI_RANGE, GRID_RESOLUTION)?;
            let out = prepare(global, "grid", grid_config(&kp_axis, &ki_axis))?;
            let result = stability_grid(&plant, &kp_axis, &ki_axis, segments)?;
            let (kp, ki, j) = result
                .argmin()
                .ok_or_else(|| Failure::Infeasible("no grid cell was evaluated".into()))?;
            let real = result.real_dominant.iter().flatten().filter(|r| **r).count();
            println!(
                "{} cells: {} stable, {} failed, {} with a real dominant root; minimum J = {} at kp = {}, ki = {}",
                kp_axis.len() * ki_axis.len(),
                result.stable_cells(),
                result.failed_cells(),
                real,
                sig(j),
                sig(kp),
                sig(ki)
            );
            if result.stable_cells() == 0 {
                return Err(Failure::Infeasible("no stable cell in the grid".into()));
            }
            out.emit(|| to_value(&result), |w| result.write_csv(w))?;
        }
        Command::Simulate {
            kp,
            ki,
            scenario,
            disturbance,
            horizon,
            order,
        } => {
            let gains = PiGains::new(*kp, *ki)?;
            let horizon = horizon.unwrap_or(SIMULATION_HORIZON_DELAYS * plant.delay());
            let scenario = match scenario {
                ScenarioArg::Tracking => Scenario::Tracking,
                ScenarioArg::Disturbance => Scenario::Disturbance(*disturbance),
            };
            let order = match order {
                OrderArg::First => ModelOrder::First,
                OrderArg::Second => ModelOrder::Second,
            };
            let out = prepare(
                global,
                "simulate",
                json!({ "gains": gains, "scenario": scenario, "horizon": num(horizon), "order": order }),
            )?;
            let model = build_model(&plant, &gains, segments, order)?;
            let trace = simulate(&model, scenario, horizon)?;
            let last = trace.error.last().copied().unwrap_or(f64::NAN);
            let peak = trace.error.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
            println!(
                "{} response over {} samples (h = {}): final e = {}, peak |e| = {}, {} sign changes",
                scenario.name(),
                trace.len(),
                sig(trace.step),
                sig(last),
                sig(peak),
                trace.oscillation_count()
            );
            out.emit(|| to_value(&trace), |w| trace.write_csv(w))?;
        }
        Command::Margins { kp, ki } => {
            let gains = PiGains::new(*kp, *ki)?;
            let out = prepare(global, "margins", json!({ "gains": gains }))?;
            let report = margins(&plant, &gains)?;
            println!(
                "wgc = {} rad/s, PM = {} deg, wpc = {} rad/s, GM = {} ({} dB)",
                sig(report.gain_crossover),
                sig(report.phase_margin),
                sig(report.phase_crossover),
                sig(report.gain_margin),
                sig(report.gain_margin_db)
            );
            out.emit_record(to_value(&report))?;
        }
        Command::MarginGrid { grid } => {
            let (kp_axis, ki_axis) = axes(grid, DEFAULT_KP_RANGE, DEFAULT_KI_RANGE, DEFAULT_RESOLUTION)?;
            let out = prepare(global, "margin-grid", grid_config(&kp_axis, &ki_axis))?;
            let result = margin_grid(&plant, &kp_axis, &ki_axis, segments)?;
            let stable: Vec<_> = result.cells.iter().filter(|c| c.stable).collect();
            if stable.is_empty() {
                return Err(Failure::Infeasible("no stable cell in the grid".into()));
            }
            let best_pm = stable
                .iter()
                .filter(|c| c.pm_deg.is_finite())
                .max_by(|a, b| a.pm_deg.total_cmp(&b.pm_deg));
            let best_gm = stable
                .iter()
                .filter(|c| c.gm.is_finite())
                .max_by(|a, b| a.gm.total_cmp(&b.gm));
            println!("{} cells: {} stable", result.cells.len(), stable.len());
            if let Some(c) = best_pm {
                println!(
                    "largest PM = {} deg at kp = {}, ki = {}",
                    sig(c.pm_deg),
                    sig(c.kp),
                    sig(c.ki)
                );
            }
            if let Some(c) = best_gm {
                println!(
                    "largest GM = {} at kp = {}, ki = {}",
                    sig(c.gm),
                    sig(c.kp),
                    sig(c.ki)
                );
            }
            out.emit(|| to_value(&result), |w| result.write_csv(w))?;
        }
        Command::Boundary { points } => {
            check_count("points", *points, 1)?;
            let out = prepare(global, "boundary", json!({ "points": points }))?;
            let omegas = frequency::boundary_frequencies(&plant, *points);
            let boundary = stability_boundary(&plant, &omegas)?;
            let top = boundary
                .iter()
                .max_by(|a, b| a.ki.total_cmp(&b.ki))
                .expect("at least one boundary point");
            println!(
                "{} boundary points for w in (0, {}); ultimate gain K_u = {}; largest ki = {} at kp = {}",
                boundary.len(),
                sig(std::f64::consts::FRAC_PI_2 / plant.delay()),
                sig(plant.ultimate_gain()),
                sig(top.ki),
                sig(top.kp)
            );
            out.emit(
                || to_value(&boundary),
                |w| frequency::write_boundary_csv(&boundary, w),
            )?;
        }
        Command::Baselines { indices, alpha, de } => {
            let config = de_config(de, global.seed);
            let out = prepare(
                global,
                "baselines",
                json!({ "de": config, "indices": indices, "alpha": num(*alpha) }),
            )?;
            let mut rows = vec![(Method::Proposed, tune(&plant, &config, segments)?.gains)];
            rows.extend(
                baselines::classical_rules(&plant)
                    .into_iter()
                    .map(|r| (r.method, r.gains)),
            );
            if *indices {
                let horizon = baselines::index_horizon(&plant);
                for index in [IntegralIndex::Iae, IntegralIndex::Itae] {
                    let gains = integral_index_tune(
                        &plant,
                        index,
                        *alpha,
                        baselines::INDEX_SEGMENTS,
                        horizon,
                        &config,
                    )?;
                    let method = match index {
                        IntegralIndex::Iae => Method::Iae(*alpha),
                        IntegralIndex::Itae => Method::Itae(*alpha),
                    };
                    rows.push((method, gains));
                }
            }
            let table: Vec<BaselineRow> = rows
                .into_iter()
                .map(|(method, gains)| BaselineRow {
                    method: method.to_string(),
                    kp: gains.kp,
                    ki: gains.ki,
                    abscissa: spectral_abscissa(&plant, &gains, segments).unwrap_or(f64::NAN),
                })
                .collect();
            println!("{:<22} {:>10} {:>10} {:>10}", "method", "kp", "ki", "J");
            for r in &table {
                println!(
                    "{:<22} {:>10} {:>10} {:>10}",
                    r.method,
                    sig(r.kp),
                    sig(r.ki),
                    sig(r.abscissa)
                );
            }
            out.emit(|| to_value(&table), |w| write_rows(w, &table))?;
        }
        Command::PerfOpt {
            index,
            alpha,
            index_segments,
            horizon,
            de,
        } => {
            let config = de_config(de, global.seed);
            let index = match index {
                IndexArg::Iae => IntegralIndex::Iae,
                IndexArg::Itae => IntegralIndex::Itae,
            };
            let horizon = horizon.unwrap_or_else(|| baselines::index_horizon(&plant));
            let out = prepare(
                global,
                "perf-opt",
                json!({
                    "de": config,
                    "index": index,
                    "alpha": alpha,
                    "index_segments": index_segments,
                    "horizon": num(horizon),
                }),
            )?;
            let trajectory = gain_trajectory(&plant, index, alpha, *index_segments, horizon, &config)?;
            let solved = trajectory.iter().filter(|p| p.gains().is_some()).count();
            if solved == 0 {
                return Err(Failure::Infeasible("no alpha produced stabilizing gains".into()));
            }
            println!(
                "{} optimal gains, {} of {} weights solved",
                index.name(),
                solved,
                trajectory.len()
            );
            for p in &trajectory {
                println!(
                    "  alpha = {}: kp = {}, ki = {}",
                    sig(p.alpha),
                    sig(p.kp),
                    sig(p.ki)
                );
            }
            out.emit(
                || to_value(&trajectory),
                |w| baselines::write_trajectory_csv(&trajectory, w),
            )?;
        }
        Command::ModelError { grid, methods } => {
            if methods.is_empty() {
                return Err(Failure::Usage("--methods needs at least one method".into()));
            }
            let mut chosen: Vec<ErrorMethod> = Vec::new();
            for m in methods {
                let method = match m {
                    MethodArg::SemiDiscrete => ErrorMethod::SemiDiscrete(segments),
                    MethodArg::FirstOrder => ErrorMethod::FirstOrderSemiDiscrete(segments),
                    MethodArg::Pade2 => ErrorMethod::PadeTwo,
                    MethodArg::Pade3 => ErrorMethod::PadeThree,
                };
                if !chosen.contains(&method) {
                    chosen.push(method);
                }
            }
            let (kp_axis, ki_axis) = axes(grid, DEFAULT_KP_RANGE, DEFAULT_KI_RANGE, DEFAULT_RESOLUTION)?;
            let mut config = grid_config(&kp_axis, &ki_axis);
            config["methods"] = json!(chosen.iter().map(ToString::to_string).collect::<Vec<_>>());
            let out = prepare(global, "model-error", config)?;
            let map = model_error_map(&plant, &kp_axis, &ki_axis, &chosen, segments)?;
            if map.stable_cells() == 0 {
                return Err(Failure::Infeasible("no stable cell in the grid".into()));
            }
            println!(
                "{} cells, {} stable (reference: refined poles at M = {})",
                map.status.len(),
                map.stable_cells(),
                segments
            );
            for &m in &chosen {
                println!(
                    "  {:<18} max = {}, p95 = {}",
                    m.to_string(),
                    sig(map.max_error(m)?),
                    sig(map.percentile(m, 95.0)?)
                );
            }
            out.emit(|| to_value(&map), |w| map.write_csv(w))?;
        }
        Command::PadeCompare { kp, ki } => {
            let gains = PiGains::new(*kp, *ki)?;
            let out = prepare(global, "pade-compare", json!({ "gains": gains }))?;
            let report = spectrum_fidelity(&plant, &gains, segments)?;
            println!(
                "{} continuous roots; matched within 0.05: semi-discrete {}, pade2 {}, pade3 {}",
                report.reference.len(),
                report.semi_discrete_matches,
                report.pade_two_matches,
                report.pade_three_matches
            );
            for p in &report.reference {
                println!("  {}", complex(p.re, p.im));
            }
            out.emit(|| to_value(&report), |w| report.write_csv(w))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineRow {
    method: String,
    kp: f64,
    ki: f64,
    abscissa: f64,
}

fn prepare(global: &GlobalArgs, command: &str, extra: Value) -> Result<Output, Failure> {
    let mut config = object(vec![
        ("command", json!(command)),
        ("gain", num(global.gain)),
        ("delay", num(global.delay)),
        ("segments", json!(global.segments)),
        ("seed", json!(global.seed)),
    ]);
    if let (Value::Object(base), Value::Object(more)) = (&mut config, extra) {
        base.extend(more);
    }
    Output::prepare(global.out.clone(), global.format, config).map_err(Failure::Usage)
}

fn de_config(de: &DeArgs, seed: u64) -> DeConfig {
    DeConfig {
        population: de.population,
        weight_f: de.weight_f,
        crossover_cr: de.crossover_cr,
        max_generations: de.generations,
        bounds: GainBounds {
            kp: de.bounds_kp,
            ki: de.bounds_ki,
        },
        seed,
    }
}

fn axes(
    grid: &GridArgs,
    kp_default: (f64, f64),
    ki_default: (f64, f64),
    resolution_default: usize,
) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let n = grid.resolution.unwrap_or(resolution_default);
    check_count("resolution", n, 2)?;
    let (kp_lo, kp_hi) = grid.kp_range.unwrap_or(kp_default);
    let (ki_lo, ki_hi) = grid.ki_range.unwrap_or(ki_default);
    Ok((linspace(kp_lo, kp_hi, n), linspace(ki_lo, ki_hi, n)))
}

fn grid_config(kp_axis: &[f64], ki_axis: &[f64]) -> Value {
    json!({
        "kp_range": [kp_axis[0], kp_axis[kp_axis.len() - 1]],
        "ki_range": [ki_axis[0], ki_axis[ki_axis.len() - 1]],
        "resolution": kp_axis.len(),
    })
}

fn check_count(name: &str, value: usize, min: usize) -> Result<(), Failure> {
    if value < min {
        return Err(Failure::Usage(format!("--{name} must be >= {min}, got {value}")));
    }
    Ok(())
}

fn to_value<S: Serialize>(value: &S) -> Value {
    serde_json::to_value(value).expect("result types serialize to JSON")
}

fn write_rows<S: Serialize>(w: &mut dyn Write, rows: &[S]) -> spectral_pi::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn poles_value(set: &PoleSet) -> Value {
    json!({
        "abscissa": num(set.abscissa()),
        "dominant_is_real": set.dominant_is_real(),
        "real_part_spread": num(set.real_part_spread()),
        "poles": set.poles(),
    })
}

fn print_poles(set: &PoleSet) {
    println!(
        "spectral abscissa J = {} ({} dominant root), real-part spread {}",
        sig(set.abscissa()),
        if set.dominant_is_real() { "real" } else { "complex" },
        sig(set.real_part_spread())
    );
    for p in set.poles() {
        println!("  {}", complex(p.re, p.im));
    }
}

fn complex(re: f64, im: f64) -> String {
    let sign = if im.is_sign_negative() { '-' } else { '+' };
    format!("{} {sign} {}j", sig(re), sig(im.abs()))
}
