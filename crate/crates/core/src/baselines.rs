//! Reference tunings: Ziegler–Nichols, SIMC, and integral-index optimization.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{normalize_gains, scale_gains_to_plant, PiGains, PlantParams};
use crate::semi_discrete::{build_model, simulate, ModelOrder, Scenario};
use crate::spectral::spectral_abscissa;
use crate::tuner::{check_segments, DeConfig, INFEASIBLE_COST};
use crate::DEFAULT_SEGMENTS;

/// Delay segments used for integral-index simulations.
pub const INDEX_SEGMENTS: usize = 50;

/// Simulation horizon for integral indices, in multiples of `L`.
pub const INDEX_HORIZON_DELAYS: f64 = 50.0;

/// Load-disturbance step for the disturbance half of the weighted index.
pub const INDEX_DISTURBANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimcVariant {
    /// `τ_c = 2.5 L`.
    Conservative,
    /// `τ_c = 0.05 L`.
    Aggressive,
}

impl SimcVariant {
    /// Closed-loop time constant as a multiple of `L`.
    pub fn tau_ratio(self) -> f64 {
        match self {
            SimcVariant::Conservative => 2.5,
            SimcVariant::Aggressive => 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralIndex {
    /// `Σ |e[k]| h`.
    Iae,
    /// `Σ t_k |e[k]| h`.
    Itae,
}

impl IntegralIndex {
    pub fn name(self) -> &'static str {
        match self {
            IntegralIndex::Iae => "iae",
            IntegralIndex::Itae => "itae",
        }
    }

    /// Index of a sampled error signal.
    pub fn evaluate(self, times: &[f64], error: &[f64], step: f64) -> f64 {
        match self {
            IntegralIndex::Iae => error.iter().map(|e| e.abs()).sum::<f64>() * step,
            IntegralIndex::Itae => times.iter().zip(error).map(|(t, e)| t * e.abs()).sum::<f64>() * step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    ZieglerNichols,
    SimcConservative,
    SimcAggressive,
    Iae(f64),
    Itae(f64),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Proposed => write!(f, "proposed"),
            Method::ZieglerNichols => write!(f, "ziegler_nichols"),
            Method::SimcConservative => write!(f, "simc_conservative"),
            Method::SimcAggressive => write!(f, "simc_aggressive"),
            Method::Iae(a) => write!(f, "iae(alpha={a})"),
            Method::Itae(a) => write!(f, "itae(alpha={a})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningResult {
    pub method: Method,
    pub gains: PiGains,
}

/// `K_P = 0.45 K_u`, `T_i = P_u / 1.2`.
pub fn ziegler_nichols(plant: &PlantParams) -> PiGains {
    let kp = 0.45 * plant.ultimate_gain();
    let ti = plant.ultimate_period() / 1.2;
    PiGains { kp, ki: kp / ti }
}

/// SIMC rule for an integrating process with the variant's `τ_c`.
pub fn simc(plant: &PlantParams, variant: SimcVariant) -> PiGains {
    simc_with_tau(plant, variant.tau_ratio() * plant.delay())
}

/// `K_P = 1/(K (τ_c + L))`, `T_i = 4 (τ_c + L)`.
pub fn simc_with_tau(plant: &PlantParams, tau_c: f64) -> PiGains {
    let lag = tau_c + plant.delay();
    let kp = 1.0 / (plant.gain() * lag);
    PiGains {
        kp,
        ki: kp / (4.0 * lag),
    }
}

/// The three closed-form rows of the comparison table.
pub fn classical_rules(plant: &PlantParams) -> Vec<TuningResult> {
    vec![
        TuningResult {
            method: Method::ZieglerNichols,
            gains: ziegler_nichols(plant),
        },
        TuningResult {
            method: Method::SimcConservative,
            gains: simc(plant, SimcVariant::Conservative),
        },
        TuningResult {
            method: Method::SimcAggressive,
            gains: simc(plant, SimcVariant::Aggressive),
        },
    ]
}

/// `α I_track + (1 − α) I_dist` on the semi-discrete simulation, or
/// [`INFEASIBLE_COST`] when the loop is not stable.
pub fn weighted_index(
    plant: &PlantParams,
    gains: &PiGains,
    index: IntegralIndex,
    alpha: f64,
    segments: usize,
    horizon: f64,
) -> f64 {
    match spectral_abscissa(plant, gains, DEFAULT_SEGMENTS) {
        Ok(j) if j < 0.0 => {}
        _ => return INFEASIBLE_COST,
    }
    let Ok(model) = build_model(plant, gains, segments, ModelOrder::Second) else {
        return INFEASIBLE_COST;
    };
    let mut cost = 0.0;
    for (weight, scenario) in [
        (alpha, Scenario::Tracking),
        (1.0 - alpha, Scenario::Disturbance(INDEX_DISTURBANCE)),
    ] {
        if weight == 0.0 {
            continue;
        }
        let Ok(trace) = simulate(&model, scenario, horizon) else {
            return INFEASIBLE_COST;
        };
        cost += weight * index.evaluate(&trace.times, &trace.error, trace.step);
    }
    if cost.is_finite() {
        cost.min(INFEASIBLE_COST)
    } else {
        INFEASIBLE_COST
    }
}

/// Gains minimizing the weighted integral index over the DE box of `config`.
pub fn integral_index_tune(
    plant: &PlantParams,
    index: IntegralIndex,
    alpha: f64,
    segments: usize,
    horizon: f64,
    config: &DeConfig,
) -> Result<PiGains> {
    integral_index_tune_from(plant, index, alpha, segments, horizon, config, None)
}

fn integral_index_tune_from(
    plant: &PlantParams,
    index: IntegralIndex,
    alpha: f64,
    segments: usize,
    horizon: f64,
    config: &DeConfig,
    warm_start: Option<PiGains>,
) -> Result<PiGains> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    check_segments(segments)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    // The search box is in normalized units; costs are evaluated on the
    // actual plant because the disturbance term does not scale with K and L.
    let (best, _, _) = config.minimize(
        |g| {
            weighted_index(
                plant,
                &scale_gains_to_plant(g, plant),
                index,
                alpha,
                segments,
                horizon,
            )
        },
        warm_start.map(|g| normalize_gains(&g, plant)),
    )?;
    Ok(scale_gains_to_plant(&best, plant))
}

/// One point of [`gain_trajectory`]; gains are `NaN` where tuning failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub alpha: f64,
    pub kp: f64,
    pub ki: f64,
}

impl TrajectoryPoint {
    pub fn gains(&self) -> Option<PiGains> {
        (self.kp.is_finite() && self.ki.is_finite()).then_some(PiGains {
            kp: self.kp,
            ki: self.ki,
        })
    }
}

/// [`integral_index_tune`] along `alphas`, each run warm-started at the
/// previous successful optimum.
pub fn gain_trajectory(
    plant: &PlantParams,
    index: IntegralIndex,
    alphas: &[f64],
    segments: usize,
    horizon: f64,
    config: &DeConfig,
) -> Result<Vec<TrajectoryPoint>> {
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {a}"
        )));
    }
    let mut previous = None;
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let point = match integral_index_tune_from(plant, index, alpha, segments, horizon, config, previous) {
            Ok(g) => {
                previous = Some(g);
                TrajectoryPoint {
                    alpha,
                    kp: g.kp,
                    ki: g.ki,
                }
            }
            Err(e @ Error::InvalidParameter(_)) => return Err(e),
            Err(_) => TrajectoryPoint {
                alpha,
                kp: f64::NAN,
                ki: f64::NAN,
            },
        };
        points.push(point);
    }
    Ok(points)
}

/// CSV with header `alpha,kp,ki`.
pub fn write_trajectory_csv<W: Write>(points: &[TrajectoryPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Default integral-index horizon for `plant`.
pub fn index_horizon(plant: &PlantParams) -> f64 {
    INDEX_HORIZON_DELAYS * plant.delay()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semi_discrete::oscillation_count;

    fn unit() -> PlantParams {
        PlantParams::normalized()
    }

    fn round4(x: f64) -> f64 {
        (x * 1e4).round() / 1e4
    }

    #[test]
    fn ziegler_nichols_table_row() {
        let g = ziegler_nichols(&unit());
        assert_eq!((round4(g.kp), round4(g.ki)), (0.7069, 0.2121));
    }

    #[test]
    fn ziegler_nichols_scaling() {
        let g = ziegler_nichols(&PlantParams::new(2.0, 1.0).unwrap());
        let base = ziegler_nichols(&unit());
        assert!((g.kp - base.kp / 2.0).abs() < 1e-15 && (g.ki - base.ki / 2.0).abs() < 1e-15);
        assert!((g.kp - 0.35345).abs() < 5e-5 && (g.ki - 0.10605).abs() < 5e-5);
        let g = ziegler_nichols(&PlantParams::new(1.0, 2.0).unwrap());
        assert!((g.kp - base.kp / 2.0).abs() < 1e-15 && (g.ki - base.ki / 4.0).abs() < 1e-15);
    }

    #[test]
    fn simc_table_rows() {
        let c = simc(&unit(), SimcVariant::Conservative);
        assert_eq!((round4(c.kp), round4(c.ki)), (0.2857, 0.0204));
        let a = simc(&unit(), SimcVariant::Aggressive);
        assert_eq!((round4(a.kp), round4(a.ki)), (0.9524, 0.2268));
    }

    #[test]
    fn slow_simc_vanishes() {
        let g = simc_with_tau(&unit(), 1e9);
        assert!(g.kp < 1e-8 && g.ki < 1e-17);
    }

    #[test]
    fn table_gains_are_stable() {
        let mut all: Vec<PiGains> = classical_rules(&unit()).into_iter().map(|r| r.gains).collect();
        all.extend([
            PiGains {
                kp: 0.4614,
                ki: 0.0793,
            },
            PiGains {
                kp: 0.8289,
                ki: 0.2015,
            },
            PiGains {
                kp: 0.7532,
                ki: 0.1916,
            },
        ]);
        for g in all {
            assert!(spectral_abscissa(&unit(), &g, 20).unwrap() < 0.0, "{g:?}");
        }
    }

    #[test]
    fn baselines_oscillate_more_than_proposed() {
        let count = |kp, ki| {
            let m = build_model(&unit(), &PiGains { kp, ki }, 20, ModelOrder::Second).unwrap();
            oscillation_count(&simulate(&m, Scenario::Tracking, 40.0).unwrap().error)
        };
        let proposed = count(0.4614, 0.0793);
        for (kp, ki) in [
            (0.7069, 0.2121),
            (0.9524, 0.2268),
            (0.8289, 0.2015),
            (0.7532, 0.1916),
        ] {
            assert!(count(kp, ki) > proposed, "({kp}, {ki})");
        }
    }

    #[test]
    fn iae_table_row() {
        let g =
            integral_index_tune(&unit(), IntegralIndex::Iae, 0.5, 50, 50.0, &DeConfig::default()).unwrap();
        assert!(
            (g.kp - 0.8289).abs() < 0.05 && (g.ki - 0.2015).abs() < 0.05,
            "{g:?}"
        );
    }

    #[test]
    fn itae_table_row() {
        let g =
            integral_index_tune(&unit(), IntegralIndex::Itae, 0.5, 50, 50.0, &DeConfig::default()).unwrap();
        assert!(
            (g.kp - 0.7532).abs() < 0.05 && (g.ki - 0.1916).abs() < 0.05,
            "{g:?}"
        );
    }

    #[test]
    fn endpoint_optima_win_their_own_objective() {
        let cfg = DeConfig {
            max_generations: 60,
            ..DeConfig::default()
        };
        let track = integral_index_tune(&unit(), IntegralIndex::Iae, 1.0, 50, 50.0, &cfg).unwrap();
        let dist = integral_index_tune(&unit(), IntegralIndex::Iae, 0.0, 50, 50.0, &cfg).unwrap();
        let on_track = |g: &PiGains| weighted_index(&unit(), g, IntegralIndex::Iae, 1.0, 50, 50.0);
        assert!(on_track(&track) < on_track(&dist));
    }

    #[test]
    fn unstable_gains_cost_surrogate() {
        let g = PiGains { kp: 2.0, ki: 0.3 };
        assert_eq!(
            weighted_index(&unit(), &g, IntegralIndex::Iae, 0.5, 50, 50.0),
            INFEASIBLE_COST
        );
    }

    #[test]
    fn itae_weights_late_error() {
        let t = [0.0, 1.0, 2.0];
        let e = [1.0, 1.0, 1.0];
        assert_eq!(IntegralIndex::Iae.evaluate(&t, &e, 0.5), 1.5);
        assert_eq!(IntegralIndex::Itae.evaluate(&t, &e, 0.5), 1.5);
        let e = [0.0, 0.0, 1.0];
        assert_eq!(IntegralIndex::Itae.evaluate(&t, &e, 0.5), 1.0);
    }

    #[test]
    fn single_alpha_trajectory_matches_direct_tune() {
        let cfg = DeConfig {
            max_generations: 40,
            ..DeConfig::default()
        };
        let traj = gain_trajectory(&unit(), IntegralIndex::Iae, &[0.5], 50, 50.0, &cfg).unwrap();
        let direct = integral_index_tune(&unit(), IntegralIndex::Iae, 0.5, 50, 50.0, &cfg).unwrap();
        assert_eq!(traj[0].gains(), Some(direct));
    }

    #[test]
    fn trajectory_is_continuous() {
        let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let cfg = DeConfig {
            max_generations: 80,
            ..DeConfig::default()
        };
        let traj = gain_trajectory(&unit(), IntegralIndex::Iae, &alphas, 50, 50.0, &cfg).unwrap();
        for w in traj.windows(2) {
            assert!(
                (w[1].kp - w[0].kp).abs() < 0.2 && (w[1].ki - w[0].ki).abs() < 0.2,
                "{w:?}"
            );
        }
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("alpha,kp,ki\n"));
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        let cfg = DeConfig::default();
        assert!(integral_index_tune(&unit(), IntegralIndex::Iae, 1.5, 50, 50.0, &cfg).is_err());
        assert!(gain_trajectory(&unit(), IntegralIndex::Iae, &[0.2, -0.1], 50, 50.0, &cfg).is_err());
    }
}
