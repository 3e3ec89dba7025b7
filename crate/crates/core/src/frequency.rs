//! Open-loop frequency response, stability margins and the D-partition
//! stability boundary.
//!
//! The loop is `L(jω) = K (K_P jω + K_I) e^(-jωL) / (jω)²`. Phase is
//! handled in unwrapped form, `−π + atan2(ω K_P, K_I) − ωL`, so the delay
//! term never wraps.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{char_fn, PiGains, PlantParams};
use crate::spectral::spectral_abscissa;
use crate::tuner::{check_axis, check_segments};

/// Lower end of the crossover search window, rad/s.
pub const OMEGA_MIN: f64 = 1e-4;

/// Upper end of the window is this over `L`.
pub const OMEGA_MAX_DELAYS: f64 = 50.0;

/// Log-spaced samples scanned before bisection.
pub const PRESCAN_POINTS: usize = 2048;

const GAIN_CHECK: f64 = 1e-9;
const PHASE_CHECK_DEG: f64 = 1e-6;

/// `L(jω)`.
pub fn loop_response(omega: f64, plant: &PlantParams, gains: &PiGains) -> Result<Complex<f64>> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
    }
    let jw = Complex::new(0.0, omega);
    let delay = Complex::from_polar(1.0, -omega * plant.delay());
    Ok((jw * gains.kp + gains.ki) * delay * plant.gain() / (jw * jw))
}

/// `|L(jω)|`.
pub fn loop_magnitude(omega: f64, plant: &PlantParams, gains: &PiGains) -> f64 {
    plant.gain() * (gains.kp * omega).hypot(gains.ki) / (omega * omega)
}

/// Unwrapped `arg L(jω)` in radians.
pub fn loop_phase(omega: f64, plant: &PlantParams, gains: &PiGains) -> f64 {
    -PI + (omega * gains.kp).atan2(gains.ki) - omega * plant.delay()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    /// `ω_gc`, rad/s.
    pub gain_crossover: f64,
    /// Degrees.
    pub phase_margin: f64,
    /// Smallest `ω_pc`, rad/s.
    pub phase_crossover: f64,
    /// Linear ratio.
    pub gain_margin: f64,
    pub gain_margin_db: f64,
}

/// Gain and phase margins.
///
/// Fails with [`Error::MissingCrossover`] unless the window
/// `(1e-4, 50/L)` contains exactly one gain crossover and a phase
/// crossover on the principal branch.
pub fn margins(plant: &PlantParams, gains: &PiGains) -> Result<MarginReport> {
    let lo = OMEGA_MIN;
    let hi = OMEGA_MAX_DELAYS / plant.delay();
    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / (PRESCAN_POINTS - 1) as f64))
        .collect();

    let gain_gap = |w: f64| loop_magnitude(w, plant, gains) - 1.0;
    let gain_brackets = sign_changes(&grid, &gain_gap);
    let [(a, b)] = gain_brackets[..] else {
        return Err(Error::MissingCrossover("gain"));
    };
    let gain_crossover = bisect(&gain_gap, a, b);

    let phase_gap = |w: f64| loop_phase(w, plant, gains) + PI;
    let (a, b) = grid
        .windows(2)
        .map(|w| (w[0], w[1]))
        .find(|&(a, b)| phase_gap(a) > 0.0 && phase_gap(b) <= 0.0)
        .ok_or(Error::MissingCrossover("phase"))?;
    let phase_crossover = bisect(&phase_gap, a, b);

    let gain_margin = 1.0 / loop_magnitude(phase_crossover, plant, gains);
    let report = MarginReport {
        gain_crossover,
        phase_margin: 180.0 + loop_phase(gain_crossover, plant, gains).to_degrees(),
        phase_crossover,
        gain_margin,
        gain_margin_db: 20.0 * gain_margin.log10(),
    };
    verify(&report, plant, gains)?;
    Ok(report)
}

/// Re-checks the report against [`loop_response`].
fn verify(report: &MarginReport, plant: &PlantParams, gains: &PiGains) -> Result<()> {
    let at_gc = loop_response(report.gain_crossover, plant, gains)?;
    if (at_gc.norm() - 1.0).abs() > GAIN_CHECK {
        return Err(Error::NewtonNoConvergence {
            re: report.gain_crossover,
            im: 0.0,
            residual: (at_gc.norm() - 1.0).abs(),
        });
    }
    let at_pc = loop_response(report.phase_crossover, plant, gains)?;
    // Wrapped phase of a −180° point is ±180°.
    let off = (180.0 - at_pc.arg().to_degrees().abs()).abs();
    if off > PHASE_CHECK_DEG {
        return Err(Error::NewtonNoConvergence {
            re: report.phase_crossover,
            im: 0.0,
            residual: off,
        });
    }
    Ok(())
}

fn sign_changes(grid: &[f64], f: &impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let values: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    (0..grid.len() - 1)
        .filter(|&i| (values[i] > 0.0) != (values[i + 1] > 0.0))
        .map(|i| (grid[i], grid[i + 1]))
        .collect()
}

/// Bisection to machine resolution; `f(a)` and `f(b)` differ in sign.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let positive_at_a = f(a) > 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) > 0.0) == positive_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// One cell of a [`MarginGrid`]; margins are `NaN` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginCell {
    pub kp: f64,
    pub ki: f64,
    pub pm_deg: f64,
    pub gm: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginGrid {
    pub kp_axis: Vec<f64>,
    pub ki_axis: Vec<f64>,
    /// Row-major with `ki` outer.
    pub cells: Vec<MarginCell>,
}

impl MarginGrid {
    pub fn cell(&self, kp_index: usize, ki_index: usize) -> &MarginCell {
        &self.cells[ki_index * self.kp_axis.len() + kp_index]
    }

    /// CSV with header `kp,ki,pm_deg,gm,stable`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.cells {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Margins and stability over a gain grid.
pub fn margin_grid(
    plant: &PlantParams,
    kp_axis: &[f64],
    ki_axis: &[f64],
    segments: usize,
) -> Result<MarginGrid> {
    check_segments(segments)?;
    check_axis("kp", kp_axis)?;
    check_axis("ki", ki_axis)?;
    let cells = (0..kp_axis.len() * ki_axis.len())
        .into_par_iter()
        .map(|idx| {
            let gains = PiGains {
                kp: kp_axis[idx % kp_axis.len()],
                ki: ki_axis[idx / kp_axis.len()],
            };
            let (pm_deg, gm) = match margins(plant, &gains) {
                Ok(r) => (r.phase_margin, r.gain_margin),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let stable = matches!(spectral_abscissa(plant, &gains, segments), Ok(j) if j < 0.0);
            MarginCell {
                kp: gains.kp,
                ki: gains.ki,
                pm_deg,
                gm,
                stable,
            }
        })
        .collect();
    Ok(MarginGrid {
        kp_axis: kp_axis.to_vec(),
        ki_axis: ki_axis.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub omega: f64,
    pub kp: f64,
    pub ki: f64,
}

impl BoundaryPoint {
    pub fn gains(&self) -> PiGains {
        PiGains {
            kp: self.kp,
            ki: self.ki,
        }
    }
}

/// Gains with a closed-loop root at `jω`:
/// `K_P = ω sin(ωL)/K`, `K_I = ω² cos(ωL)/K`, for `ω ∈ (0, π/(2L))`.
pub fn stability_boundary(plant: &PlantParams, omegas: &[f64]) -> Result<Vec<BoundaryPoint>> {
    let top = FRAC_PI_2 / plant.delay();
    omegas
        .iter()
        .map(|&omega| {
            if !(omega > 0.0 && omega < top) {
                return Err(Error::InvalidParameter(format!(
                    "boundary frequency must lie in (0, {top}), got {omega}"
                )));
            }
            let wl = omega * plant.delay();
            Ok(BoundaryPoint {
                omega,
                kp: omega * wl.sin() / plant.gain(),
                ki: omega * omega * wl.cos() / plant.gain(),
            })
        })
        .collect()
}

/// `n` frequencies evenly spaced strictly inside `(0, π/(2L))`.
pub fn boundary_frequencies(plant: &PlantParams, n: usize) -> Vec<f64> {
    let top = FRAC_PI_2 / plant.delay();
    (1..=n).map(|i| top * i as f64 / (n + 1) as f64).collect()
}

/// `|Δ(jω)|` at a boundary point.
pub fn boundary_residual(plant: &PlantParams, point: &BoundaryPoint) -> f64 {
    char_fn(Complex::new(0.0, point.omega), plant, &point.gains()).norm()
}

/// CSV with header `omega,kp,ki`.
pub fn write_boundary_csv<W: Write>(points: &[BoundaryPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{simc, SimcVariant};

    fn unit() -> PlantParams {
        PlantParams::normalized()
    }

    fn optimum() -> PiGains {
        PiGains {
            kp: 0.4614,
            ki: 0.0793,
        }
    }

    #[test]
    fn loop_magnitude_and_phase_match_response() {
        let plant = PlantParams::new(1.7, 0.6).unwrap();
        let g = PiGains { kp: 0.3, ki: 0.05 };
        for w in [0.01, 0.3, 1.0, 2.5, 7.0] {
            let l = loop_response(w, &plant, &g).unwrap();
            assert!((l.norm() - loop_magnitude(w, &plant, &g)).abs() < 1e-12 * l.norm().max(1.0));
            let wrapped = Complex::from_polar(1.0, loop_phase(w, &plant, &g));
            assert!((l / l.norm() - wrapped).norm() < 1e-12);
        }
        assert!(loop_response(0.0, &plant, &g).is_err());
    }

    #[test]
    fn proportional_phase_is_exact() {
        let g = PiGains { kp: 0.8, ki: 0.0 };
        for w in [0.1, 1.0, 3.0] {
            assert_eq!(loop_phase(w, &unit(), &g), -FRAC_PI_2 - w);
        }
    }

    #[test]
    fn crossover_frequencies_at_table_optimum() {
        let l = loop_response(0.4891, &unit(), &optimum()).unwrap();
        assert!((l.norm() - 1.0).abs() < 1e-3);
        let phase = loop_phase(1.4531, &unit(), &optimum()).to_degrees();
        assert!((phase + 180.0).abs() < 0.1);
    }

    #[test]
    fn margins_at_table_optimum() {
        let r = margins(&unit(), &optimum()).unwrap();
        assert!((r.gain_crossover - 0.4891).abs() < 1e-3, "{r:?}");
        assert!((r.phase_margin - 42.6).abs() < 0.2, "{r:?}");
        assert!((r.phase_crossover - 1.4531).abs() < 1e-3, "{r:?}");
        assert!((r.gain_margin - 3.13).abs() < 0.02, "{r:?}");
        assert!((r.gain_margin_db - 9.9).abs() < 0.1, "{r:?}");
        assert_eq!(r.gain_margin_db, 20.0 * r.gain_margin.log10());
    }

    #[test]
    fn proportional_limit_recovers_ultimate_point() {
        let g = PiGains {
            kp: FRAC_PI_2 * 0.9999,
            ki: 1e-9,
        };
        let r = margins(&unit(), &g).unwrap();
        assert!((r.gain_margin - 1.0 / 0.9999).abs() < 1e-6, "{r:?}");
        assert!((r.phase_crossover - FRAC_PI_2).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn gain_margin_is_homogeneous() {
        let base = margins(&unit(), &optimum()).unwrap();
        for c in [0.5, 2.0] {
            let r = margins(&unit(), &optimum().scaled(c)).unwrap();
            assert!((r.gain_margin - base.gain_margin / c).abs() < 1e-9 * base.gain_margin);
            assert!((r.phase_crossover - base.phase_crossover).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gains_have_no_gain_crossover() {
        let r = margins(&unit(), &PiGains { kp: 0.0, ki: 0.0 });
        assert!(matches!(r, Err(Error::MissingCrossover("gain"))));
    }

    #[test]
    fn grid_cells_at_reference_tunings() {
        let simc_c = simc(&unit(), SimcVariant::Conservative);
        let grid = margin_grid(&unit(), &[0.4614, simc_c.kp], &[0.0793, simc_c.ki], 20).unwrap();
        let opt = grid.cell(0, 0);
        assert!(opt.stable && opt.pm_deg > 40.0 && opt.gm > 3.0, "{opt:?}");
        assert!(grid.cell(1, 1).gm > opt.gm);
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("kp,ki,pm_deg,gm,stable\n"));
    }

    #[test]
    fn unstable_cells_have_small_or_undefined_gain_margin() {
        let kp: Vec<f64> = (1..=12).map(|i| 0.15 * i as f64).collect();
        let ki: Vec<f64> = (1..=12).map(|i| 0.05 * i as f64).collect();
        let grid = margin_grid(&unit(), &kp, &ki, 20).unwrap();
        let mut unstable = 0;
        for c in grid.cells.iter().filter(|c| !c.stable) {
            unstable += 1;
            assert!(c.gm.is_nan() || c.gm < 1.0, "{c:?}");
        }
        assert!(unstable > 20);
        for c in grid.cells.iter().filter(|c| c.stable) {
            assert!(c.gm > 1.0, "{c:?}");
        }
    }

    #[test]
    fn boundary_endpoint_is_ultimate_gain() {
        let top = FRAC_PI_2 * (1.0 - 1e-12);
        let p = stability_boundary(&unit(), &[top]).unwrap()[0];
        assert!((p.kp - FRAC_PI_2).abs() < 1e-9 && p.ki.abs() < 1e-9);
        assert!(stability_boundary(&unit(), &[FRAC_PI_2]).is_err());
        assert!(stability_boundary(&unit(), &[0.0]).is_err());
    }

    #[test]
    fn boundary_points_are_imaginary_roots() {
        let plant = PlantParams::new(1.5, 0.7).unwrap();
        let pts = stability_boundary(&plant, &boundary_frequencies(&plant, 100)).unwrap();
        for p in &pts {
            assert!(boundary_residual(&plant, p) < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn boundary_separates_abscissa_sign() {
        let pts = stability_boundary(&unit(), &[0.3, 0.6, 0.9, 1.2, 1.4]).unwrap();
        for p in pts {
            let inside = PiGains {
                kp: p.kp,
                ki: 0.99 * p.ki,
            };
            let outside = PiGains {
                kp: p.kp,
                ki: 1.01 * p.ki,
            };
            assert!(spectral_abscissa(&unit(), &inside, 20).unwrap() < 0.0, "{p:?}");
            assert!(spectral_abscissa(&unit(), &outside, 20).unwrap() > 0.0, "{p:?}");
        }
    }

    #[test]
    fn boundary_csv_header() {
        let pts = stability_boundary(&unit(), &[0.5]).unwrap();
        let mut buf = Vec::new();
        write_boundary_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("omega,kp,ki\n"));
    }
}
