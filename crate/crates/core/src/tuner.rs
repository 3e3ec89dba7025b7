//! Minimization of the spectral abscissa over the PI gain plane.
//!
//! All searches run on the normalized plant (`K = L = 1`); gains are mapped
//! onto the caller's plant at the boundary. Bounds in [`DeConfig`] are
//! therefore in normalized units.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::de::{self, DeSettings, Initialization};
use crate::error::{Error, Result};
use crate::model::{normalize_gains, scale_gains_to_plant, PiGains, PlantParams};
use crate::spectral::{dominant_poles, spectral_abscissa, PoleSet};

/// Cost assigned to unstable or unevaluable candidates.
pub const INFEASIBLE_COST: f64 = 1e6;

/// Points in the coarse `K_I` scan of [`optimal_ki_sweep`].
pub const COARSE_SCAN_POINTS: usize = 32;

/// Upper end of the normalized `K_I` search interval.
pub const KI_SEARCH_MAX: f64 = 0.6;

const GOLDEN_TOLERANCE: f64 = 1e-7;

/// Axis-aligned box in the normalized `(K_P, K_I)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainBounds {
    pub kp: (f64, f64),
    pub ki: (f64, f64),
}

impl GainBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("kp", self.kp), ("ki", self.ki)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "{name} bounds must satisfy 0 < lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn lower(&self) -> [f64; 2] {
        [self.kp.0, self.ki.0]
    }

    fn upper(&self) -> [f64; 2] {
        [self.kp.1, self.ki.1]
    }
}

impl Default for GainBounds {
    fn default() -> Self {
        Self {
            kp: (0.01, 1.5),
            ki: (0.001, 0.6),
        }
    }
}

/// Differential-evolution setup shared by [`tune`] and the integral-index tuners.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeConfig {
    pub population: usize,
    pub weight_f: f64,
    pub crossover_cr: f64,
    pub max_generations: usize,
    pub bounds: GainBounds,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 30,
            weight_f: 0.7,
            crossover_cr: 0.9,
            max_generations: 200,
            bounds: GainBounds::default(),
            seed: 42,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.settings().validate()
    }

    pub(crate) fn settings(&self) -> DeSettings {
        DeSettings {
            population: self.population,
            weight_f: self.weight_f,
            crossover_cr: self.crossover_cr,
            max_generations: self.max_generations,
            seed: self.seed,
        }
    }

    /// Runs DE over the normalized gain box. `warm_start` centers the
    /// initial population on a previous normalized optimum.
    pub(crate) fn minimize<F>(&self, cost: F, warm_start: Option<PiGains>) -> Result<(PiGains, f64, usize)>
    where
        F: Fn(&PiGains) -> f64 + Sync,
    {
        self.validate()?;
        let init = match warm_start {
            Some(g) => Initialization::Around {
                center: [g.kp, g.ki],
                radius: 0.1,
            },
            None => Initialization::Uniform,
        };
        let out = de::minimize(
            |x: &[f64; 2]| cost(&PiGains { kp: x[0], ki: x[1] }),
            self.bounds.lower(),
            self.bounds.upper(),
            &self.settings(),
            init,
        )?;
        if out.cost >= INFEASIBLE_COST {
            return Err(Error::NoStabilizingGains);
        }
        Ok((
            PiGains {
                kp: out.best[0],
                ki: out.best[1],
            },
            out.cost,
            out.evaluations,
        ))
    }
}

/// Optimum found by [`tune`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    /// Gains for the caller's plant.
    pub gains: PiGains,
    /// The same optimum on the normalized plant.
    pub normalized_gains: PiGains,
    /// Dominant poles of the caller's plant at `gains`.
    pub poles: PoleSet,
    pub evaluations: usize,
}

impl TuneResult {
    pub fn abscissa(&self) -> f64 {
        self.poles.abscissa()
    }
}

/// `J` on the normalized plant, or [`INFEASIBLE_COST`] when unstable or unevaluable.
pub fn normalized_cost(gains: &PiGains, segments: usize) -> f64 {
    match spectral_abscissa(&PlantParams::normalized(), gains, segments) {
        Ok(j) if j < 0.0 => j,
        _ => INFEASIBLE_COST,
    }
}

/// Gains minimizing the spectral abscissa.
pub fn tune(plant: &PlantParams, config: &DeConfig, segments: usize) -> Result<TuneResult> {
    check_segments(segments)?;
    let (normalized_gains, _, evaluations) = config.minimize(|g| normalized_cost(g, segments), None)?;
    let gains = scale_gains_to_plant(&normalized_gains, plant);
    let poles = dominant_poles(plant, &gains, segments)?;
    Ok(TuneResult {
        gains,
        normalized_gains,
        poles,
        evaluations,
    })
}

pub(crate) fn check_segments(segments: usize) -> Result<()> {
    if segments < 2 {
        return Err(Error::InvalidParameter(format!(
            "segments must be >= 2, got {segments}"
        )));
    }
    Ok(())
}

/// Minimizer of `J` over `K_I` at one `K_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub kp: f64,
    /// `NaN` when no `K_I` in the search interval stabilizes the loop.
    pub ki_star: f64,
    /// `+∞` when no `K_I` stabilizes the loop.
    pub j_star: f64,
}

/// Coarse scan of `J` over `K_I ∈ (0, 0.6/(K L²)]` at fixed `kp`; failures are `NaN`.
pub fn ki_scan(plant: &PlantParams, kp: f64, segments: usize) -> Result<Vec<(f64, f64)>> {
    check_segments(segments)?;
    let unit = PlantParams::normalized();
    let norm_kp = normalize_gains(&PiGains { kp, ki: 0.0 }, plant).kp;
    let points: Vec<(f64, f64)> = (1..=COARSE_SCAN_POINTS)
        .into_par_iter()
        .map(|j| {
            let ki = KI_SEARCH_MAX * j as f64 / COARSE_SCAN_POINTS as f64;
            let cost = spectral_abscissa(&unit, &PiGains { kp: norm_kp, ki }, segments).unwrap_or(f64::NAN);
            (ki, cost)
        })
        .collect();
    Ok(points
        .into_iter()
        .map(|(ki, j)| {
            let g = scale_gains_to_plant(&PiGains { kp: norm_kp, ki }, plant);
            (g.ki, j / plant.delay())
        })
        .collect())
}

/// Per-`K_P` minimizer of `J` over `K_I`: coarse scan then golden section.
pub fn optimal_ki_sweep(plant: &PlantParams, kp_values: &[f64], segments: usize) -> Result<Vec<SweepPoint>> {
    check_segments(segments)?;
    for &kp in kp_values {
        if !(kp.is_finite() && kp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kp values must be > 0, got {kp}"
            )));
        }
    }
    kp_values
        .iter()
        .map(|&kp| optimal_ki(plant, kp, segments))
        .collect()
}

fn optimal_ki(plant: &PlantParams, kp: f64, segments: usize) -> Result<SweepPoint> {
    let unit = PlantParams::normalized();
    let norm_kp = normalize_gains(&PiGains { kp, ki: 0.0 }, plant).kp;
    let j_at = |ki: f64| {
        spectral_abscissa(&unit, &PiGains { kp: norm_kp, ki }, segments)
            .ok()
            .filter(|j| j.is_finite())
            .unwrap_or(f64::INFINITY)
    };
    let grid: Vec<f64> = (0..=COARSE_SCAN_POINTS)
        .map(|j| KI_SEARCH_MAX * j as f64 / COARSE_SCAN_POINTS as f64)
        .collect();
    let costs: Vec<f64> = grid[1..].par_iter().map(|&ki| j_at(ki)).collect();
    let best = (0..costs.len())
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]))
        .expect("scan is non-empty");
    if costs[best] >= 0.0 {
        return Ok(SweepPoint {
            kp,
            ki_star: f64::NAN,
            j_star: f64::INFINITY,
        });
    }
    // grid[best + 1] is the scan minimum; bracket with its neighbours.
    let lo = grid[best];
    let hi = grid[(best + 2).min(COARSE_SCAN_POINTS)];
    let (mut ki, mut j) = golden_section(&j_at, lo, hi);
    if costs[best] < j {
        ki = grid[best + 1];
        j = costs[best];
    }
    let scaled = scale_gains_to_plant(&PiGains { kp: norm_kp, ki }, plant);
    Ok(SweepPoint {
        kp,
        ki_star: scaled.ki,
        j_star: j / plant.delay(),
    })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > GOLDEN_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Count of strict interior local minima in a scan, skipping `NaN` cells.
pub fn local_minima(values: &[f64]) -> usize {
    let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let mut count = 0;
    let mut i = 0;
    while i < finite.len() {
        // Treat runs of equal values as one point.
        let mut j = i;
        while j + 1 < finite.len() && finite[j + 1] == finite[i] {
            j += 1;
        }
        let left = i == 0 || finite[i - 1] > finite[i];
        let right = j + 1 == finite.len() || finite[j + 1] > finite[i];
        if left && right {
            count += 1;
        }
        i = j + 1;
    }
    count
}

/// `J` and dominant-root type over a rectangular grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainGrid {
    pub kp_axis: Vec<f64>,
    pub ki_axis: Vec<f64>,
    /// `abscissa[i][j]` at `(kp_axis[j], ki_axis[i])`; `NaN` where refinement failed.
    pub abscissa: Vec<Vec<f64>>,
    pub real_dominant: Vec<Vec<bool>>,
}

impl GainGrid {
    /// CSV with header `kp,ki,abscissa,real_dominant`, `ki` outer.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kp", "ki", "abscissa", "real_dominant"])?;
        for (i, ki) in self.ki_axis.iter().enumerate() {
            for (j, kp) in self.kp_axis.iter().enumerate() {
                w.write_record([
                    kp.to_string(),
                    ki.to_string(),
                    self.abscissa[i][j].to_string(),
                    self.real_dominant[i][j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Cell with the smallest finite abscissa, as `(kp, ki, J)`.
    pub fn argmin(&self) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, row) in self.abscissa.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.is_finite() && best.is_none_or(|b| v < b.2) {
                    best = Some((self.kp_axis[j], self.ki_axis[i], v));
                }
            }
        }
        best
    }

    pub fn failed_cells(&self) -> usize {
        self.abscissa.iter().flatten().filter(|v| v.is_nan()).count()
    }

    pub fn stable_cells(&self) -> usize {
        self.abscissa.iter().flatten().filter(|&&v| v < 0.0).count()
    }
}

/// Evaluates `J` on every `(kp, ki)` cell.
pub fn stability_grid(
    plant: &PlantParams,
    kp_axis: &[f64],
    ki_axis: &[f64],
    segments: usize,
) -> Result<GainGrid> {
    check_segments(segments)?;
    check_axis("kp", kp_axis)?;
    check_axis("ki", ki_axis)?;
    let cells: Vec<(f64, bool)> = (0..kp_axis.len() * ki_axis.len())
        .into_par_iter()
        .map(|idx| {
            let gains = PiGains {
                kp: kp_axis[idx % kp_axis.len()],
                ki: ki_axis[idx / kp_axis.len()],
            };
            match dominant_poles(plant, &gains, segments) {
                Ok(set) => (set.abscissa(), set.dominant_is_real()),
                Err(_) => (f64::NAN, false),
            }
        })
        .collect();
    let evaluated = cells.iter().filter(|c| !c.0.is_nan()).count();
    if 2 * evaluated < cells.len() {
        return Err(Error::GridMostlyFailed {
            evaluated,
            total: cells.len(),
        });
    }
    let rows = cells.chunks(kp_axis.len());
    Ok(GainGrid {
        kp_axis: kp_axis.to_vec(),
        ki_axis: ki_axis.to_vec(),
        abscissa: rows.clone().map(|r| r.iter().map(|c| c.0).collect()).collect(),
        real_dominant: rows.map(|r| r.iter().map(|c| c.1).collect()).collect(),
    })
}

pub(crate) fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} axis is empty")));
    }
    if let Some(v) = axis.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "{name} axis values must be > 0, got {v}"
        )));
    }
    Ok(())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
