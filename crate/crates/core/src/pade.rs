//! Padé delay approximants and accuracy maps for the finite-dimensional
//! models of the delay loop.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::polynomial_roots;
use crate::model::{ComplexPole, PiGains, PlantParams};
use crate::semi_discrete::{build_model, eigenvalues, ModelOrder};
use crate::spectral::{dominant_poles, map_to_continuous, newton_refine_deflated};
use crate::tuner::{check_axis, check_segments};

/// Default error-map extent and resolution.
pub const DEFAULT_KP_RANGE: (f64, f64) = (0.02, 1.5);
pub const DEFAULT_KI_RANGE: (f64, f64) = (0.005, 0.4);
pub const DEFAULT_RESOLUTION: usize = 60;

/// Roots in the full-spectrum comparison.
pub const FIDELITY_ROOTS: usize = 7;

/// Distance within which an approximate root counts as a match.
pub const FIDELITY_MATCH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PadeOrder {
    Two,
    Three,
}

impl PadeOrder {
    pub fn degree(self) -> usize {
        match self {
            PadeOrder::Two => 2,
            PadeOrder::Three => 3,
        }
    }
}

/// Diagonal Padé approximant of `e^(-Ls)`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalDelay {
    pub order: PadeOrder,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl RationalDelay {
    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        horner(&self.numerator, s) / horner(&self.denominator, s)
    }
}

fn horner(coeffs: &[f64], s: Complex<f64>) -> Complex<f64> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn pade_coeffs(order: PadeOrder, delay: f64) -> RationalDelay {
    let l = delay;
    let denominator = match order {
        PadeOrder::Two => vec![1.0, l / 2.0, l * l / 12.0],
        PadeOrder::Three => vec![1.0, l / 2.0, l * l / 10.0, l * l * l / 120.0],
    };
    let numerator = denominator
        .iter()
        .enumerate()
        .map(|(k, c)| if k % 2 == 1 { -c } else { *c })
        .collect();
    RationalDelay {
        order,
        numerator,
        denominator,
    }
}

/// Roots of `s² den(s) + K (K_P s + K_I) num(s)`, real part descending.
pub fn pade_closed_loop_poles(
    plant: &PlantParams,
    gains: &PiGains,
    order: PadeOrder,
) -> Result<Vec<Complex<f64>>> {
    let pade = pade_coeffs(order, plant.delay());
    let n = order.degree();
    let mut poly = vec![0.0; n + 3];
    for (k, c) in pade.denominator.iter().enumerate() {
        poly[k + 2] += c;
    }
    for (k, c) in pade.numerator.iter().enumerate() {
        poly[k] += plant.gain() * gains.ki * c;
        poly[k + 1] += plant.gain() * gains.kp * c;
    }
    let mut roots = polynomial_roots(&poly)?;
    sort_by_real_part(&mut roots);
    Ok(roots)
}

fn sort_by_real_part(roots: &mut [Complex<f64>]) {
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Finite-dimensional approximation whose dominant root is compared with
/// the refined continuous-time abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorMethod {
    /// Second-order semi-discrete model with the given segment count.
    SemiDiscrete(usize),
    /// First-order semi-discrete model with the given segment count.
    FirstOrderSemiDiscrete(usize),
    PadeTwo,
    PadeThree,
}

impl fmt::Display for ErrorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorMethod::SemiDiscrete(m) => write!(f, "semi_discrete_m{m}"),
            ErrorMethod::FirstOrderSemiDiscrete(m) => write!(f, "first_order_m{m}"),
            ErrorMethod::PadeTwo => write!(f, "pade2"),
            ErrorMethod::PadeThree => write!(f, "pade3"),
        }
    }
}

impl ErrorMethod {
    /// Largest real part of the method's closed-loop spectrum.
    pub fn approximate_abscissa(&self, plant: &PlantParams, gains: &PiGains) -> Result<f64> {
        match *self {
            ErrorMethod::SemiDiscrete(m) => semi_discrete_abscissa(plant, gains, m, ModelOrder::Second),
            ErrorMethod::FirstOrderSemiDiscrete(m) => {
                semi_discrete_abscissa(plant, gains, m, ModelOrder::First)
            }
            ErrorMethod::PadeTwo => Ok(pade_closed_loop_poles(plant, gains, PadeOrder::Two)?[0].re),
            ErrorMethod::PadeThree => Ok(pade_closed_loop_poles(plant, gains, PadeOrder::Three)?[0].re),
        }
    }
}

fn semi_discrete_abscissa(
    plant: &PlantParams,
    gains: &PiGains,
    segments: usize,
    order: ModelOrder,
) -> Result<f64> {
    let model = build_model(plant, gains, segments, order)?;
    let top = eigenvalues(&model)?
        .into_iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if top == 0.0 {
        return Err(Error::ZeroEigenvalue);
    }
    Ok(top.ln() / model.step())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Stable,
    Unstable,
    /// The reference abscissa could not be computed.
    Failed,
}

/// `Δ_max = |Re s_ref − Re s_approx|` per method over a gain grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMap {
    pub kp_axis: Vec<f64>,
    pub ki_axis: Vec<f64>,
    pub methods: Vec<ErrorMethod>,
    /// Row-major, `ki` outer.
    pub status: Vec<CellStatus>,
    /// `errors[method][cell]`; `NaN` outside stable cells or on solver failure.
    pub errors: Vec<Vec<f64>>,
}

impl ErrorMap {
    fn method_index(&self, method: ErrorMethod) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| *m == method)
            .ok_or_else(|| Error::InvalidParameter(format!("method {method} not in map")))
    }

    /// Finite errors over stable cells.
    pub fn stable_errors(&self, method: ErrorMethod) -> Result<Vec<f64>> {
        let i = self.method_index(method)?;
        Ok(self.errors[i]
            .iter()
            .zip(&self.status)
            .filter(|(e, s)| **s == CellStatus::Stable && e.is_finite())
            .map(|(e, _)| *e)
            .collect())
    }

    pub fn max_error(&self, method: ErrorMethod) -> Result<f64> {
        Ok(self.stable_errors(method)?.into_iter().fold(f64::NAN, f64::max))
    }

    /// Nearest-rank percentile, `p` in `(0, 100]`.
    pub fn percentile(&self, method: ErrorMethod, p: f64) -> Result<f64> {
        let mut v = self.stable_errors(method)?;
        if v.is_empty() {
            return Ok(f64::NAN);
        }
        v.sort_by(f64::total_cmp);
        let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
        Ok(v[rank.min(v.len()) - 1])
    }

    /// Fraction of stable cells where `a` has strictly smaller error than `b`.
    pub fn fraction_better(&self, a: ErrorMethod, b: ErrorMethod) -> Result<f64> {
        let (ia, ib) = (self.method_index(a)?, self.method_index(b)?);
        let mut total = 0usize;
        let mut better = 0usize;
        for (c, s) in self.status.iter().enumerate() {
            let (ea, eb) = (self.errors[ia][c], self.errors[ib][c]);
            if *s == CellStatus::Stable && ea.is_finite() && eb.is_finite() {
                total += 1;
                if ea < eb {
                    better += 1;
                }
            }
        }
        Ok(better as f64 / total.max(1) as f64)
    }

    pub fn stable_cells(&self) -> usize {
        self.status.iter().filter(|s| **s == CellStatus::Stable).count()
    }

    /// CSV with header `kp,ki,method,delta_max`; masked cells carry `unstable`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kp", "ki", "method", "delta_max"])?;
        let nkp = self.kp_axis.len();
        for (m, method) in self.methods.iter().enumerate() {
            let name = method.to_string();
            for (c, status) in self.status.iter().enumerate() {
                let value = match status {
                    CellStatus::Stable => self.errors[m][c].to_string(),
                    CellStatus::Unstable => "unstable".to_string(),
                    CellStatus::Failed => f64::NAN.to_string(),
                };
                w.write_record([
                    self.kp_axis[c % nkp].to_string(),
                    self.ki_axis[c / nkp].to_string(),
                    name.clone(),
                    value,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Error of each method's dominant real part against the refined abscissa
/// from `reference_segments`, inside the stable region.
pub fn model_error_map(
    plant: &PlantParams,
    kp_axis: &[f64],
    ki_axis: &[f64],
    methods: &[ErrorMethod],
    reference_segments: usize,
) -> Result<ErrorMap> {
    check_segments(reference_segments)?;
    check_axis("kp", kp_axis)?;
    check_axis("ki", ki_axis)?;
    if methods.is_empty() {
        return Err(Error::InvalidParameter("at least one method is required".into()));
    }
    for m in methods {
        if let ErrorMethod::SemiDiscrete(s) | ErrorMethod::FirstOrderSemiDiscrete(s) = m {
            check_segments(*s)?;
        }
    }
    let cells: Vec<(CellStatus, Vec<f64>)> = (0..kp_axis.len() * ki_axis.len())
        .into_par_iter()
        .map(|idx| {
            let gains = PiGains {
                kp: kp_axis[idx % kp_axis.len()],
                ki: ki_axis[idx / kp_axis.len()],
            };
            let nan = vec![f64::NAN; methods.len()];
            match dominant_poles(plant, &gains, reference_segments) {
                Err(_) => (CellStatus::Failed, nan),
                Ok(set) if set.abscissa() >= 0.0 => (CellStatus::Unstable, nan),
                Ok(set) => {
                    let errs = methods
                        .iter()
                        .map(|m| {
                            m.approximate_abscissa(plant, &gains)
                                .map(|a| (set.abscissa() - a).abs())
                                .unwrap_or(f64::NAN)
                        })
                        .collect();
                    (CellStatus::Stable, errs)
                }
            }
        })
        .collect();
    let mut errors = vec![Vec::with_capacity(cells.len()); methods.len()];
    let mut status = Vec::with_capacity(cells.len());
    for (s, errs) in cells {
        status.push(s);
        for (m, e) in errs.into_iter().enumerate() {
            errors[m].push(e);
        }
    }
    Ok(ErrorMap {
        kp_axis: kp_axis.to_vec(),
        ki_axis: ki_axis.to_vec(),
        methods: methods.to_vec(),
        status,
        errors,
    })
}

/// A pole tagged with the model it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleRecord {
    pub re: f64,
    pub im: f64,
    pub source: String,
}

/// Reference roots from a Newton seed fan and how many each model recovers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    /// Upper-half-plane continuous roots with the smallest `|Re|`.
    pub reference: Vec<ComplexPole>,
    pub semi_discrete: Vec<ComplexPole>,
    pub pade_two: Vec<ComplexPole>,
    pub pade_three: Vec<ComplexPole>,
    pub semi_discrete_matches: usize,
    pub pade_two_matches: usize,
    pub pade_three_matches: usize,
}

impl FidelityReport {
    /// All poles, conjugates included, for the `re,im,source` CSV.
    pub fn records(&self) -> Vec<PoleRecord> {
        let mut out = Vec::new();
        for (source, poles) in [
            ("continuous", &self.reference),
            ("semi_discrete", &self.semi_discrete),
            ("pade2", &self.pade_two),
            ("pade3", &self.pade_three),
        ] {
            for p in poles {
                out.push(PoleRecord {
                    re: p.re,
                    im: p.im,
                    source: source.to_string(),
                });
                if p.im > 0.0 {
                    out.push(PoleRecord {
                        re: p.re,
                        im: -p.im,
                        source: source.to_string(),
                    });
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in self.records() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Continuous roots from Newton seeds at `Re = J − 0.15 k (2π/L)`,
/// `Im = k (2π/L)`, `k = 0..6`, compared with the log-mapped semi-discrete
/// spectrum and the Padé roots.
pub fn spectrum_fidelity(plant: &PlantParams, gains: &PiGains, segments: usize) -> Result<FidelityReport> {
    let dominant = dominant_poles(plant, gains, segments)?;
    let j = dominant.abscissa();
    let spacing = 2.0 * PI / plant.delay();
    let mut found: Vec<Complex<f64>> = dominant.poles().iter().map(|p| p.to_complex()).collect();
    for k in 0..FIDELITY_ROOTS {
        let seed = ComplexPole::new(j - 0.15 * k as f64 * spacing, k as f64 * spacing);
        if let Ok(root) = newton_refine_deflated(seed, plant, gains, &found) {
            let z = root.pole.to_complex();
            if found.iter().all(|r| (r - z).norm() >= 1e-6) {
                found.push(z);
                if z.im != 0.0 {
                    found.push(z.conj());
                }
            }
        }
    }
    let mut reference: Vec<ComplexPole> = found
        .into_iter()
        .filter(|z| z.im >= 0.0)
        .map(Into::into)
        .collect();
    reference.sort_by(|a, b| a.re.abs().total_cmp(&b.re.abs()).then(a.im.total_cmp(&b.im)));
    reference.truncate(FIDELITY_ROOTS);

    let model = build_model(plant, gains, segments, ModelOrder::Second)?;
    let mut semi_discrete = Vec::new();
    for lambda in eigenvalues(&model)? {
        if lambda.norm() > 0.0 {
            let s = map_to_continuous(lambda, model.step())?;
            if s.im >= 0.0 {
                semi_discrete.push(s);
            }
        }
    }
    let upper = |order| -> Result<Vec<ComplexPole>> {
        Ok(pade_closed_loop_poles(plant, gains, order)?
            .into_iter()
            .filter(|z| z.im >= 0.0)
            .map(Into::into)
            .collect())
    };
    let pade_two = upper(PadeOrder::Two)?;
    let pade_three = upper(PadeOrder::Three)?;
    let matches = |approx: &[ComplexPole]| {
        reference
            .iter()
            .filter(|r| {
                approx
                    .iter()
                    .any(|a| (a.to_complex() - r.to_complex()).norm() < FIDELITY_MATCH)
            })
            .count()
    };
    Ok(FidelityReport {
        semi_discrete_matches: matches(&semi_discrete),
        pade_two_matches: matches(&pade_two),
        pade_three_matches: matches(&pade_three),
        reference,
        semi_discrete,
        pade_two,
        pade_three,
    })
}
