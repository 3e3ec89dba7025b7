//! Dominant closed-loop poles and the spectral abscissa.
//!
//! Pipeline: the three largest-modulus eigenvalues of the semi-discrete
//! model are mapped to the `s`-plane with `ŝ = ln(λ)/h`, then each estimate
//! is refined by damped Newton iteration on the exact quasi-polynomial
//! `Δ(s)`. The spectral abscissa is the largest real part among the
//! refined roots.
//!
//! Seeds after the first are refined with implicit deflation
//! (Newton on `Δ(s) / Π (s − r_i)` over roots already found). Near the
//! multiple-root configurations where the optimum lives, two seeds can
//! otherwise slide onto the same root and hide the rightmost one.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{char_fn, char_fn_derivative, ComplexPole, PiGains, PlantParams};
use crate::scalar::Scalar;
use crate::semi_discrete::{build_model, dominant_discrete_poles, ModelOrder};

/// Number of discrete eigenvalues used as Newton seeds.
pub const SEED_COUNT: usize = 3;

const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 20;
const POLISH_STEPS: usize = 4;

/// `ŝ = ln(λ)/h` on the principal branch, so `|Im ŝ| ≤ π/h`.
pub fn map_to_continuous<T: Scalar>(lambda: Complex<T>, step: T) -> Result<ComplexPole<T>> {
    if lambda.norm() == T::zero() {
        return Err(Error::ZeroEigenvalue);
    }
    if !(step.is_finite() && step > T::zero()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    Ok((lambda.ln() / step).into())
}

/// A converged Newton iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonRoot<T = f64> {
    pub pole: ComplexPole<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Refines `seed` to a zero of `Δ`.
///
/// Damped Newton: a step is halved (up to 20 times) until `|Δ|` decreases.
/// Converges within 100 iterations when `|Δ(s)| < 1e-12 · max(1, σ(s))`
/// (for `f64`), where `σ(s) = |s|² + K |K_P s + K_I| |e^(-Ls)|` is the size of
/// the terms being cancelled; near the dominant poles `σ < 1` and the test is
/// absolute. The result is snapped to the real axis if `|Im s| < 1e-6`.
pub fn newton_refine<T: Scalar>(
    seed: ComplexPole<T>,
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
) -> Result<NewtonRoot<T>> {
    newton_refine_deflated(seed, plant, gains, &[])
}

/// [`newton_refine`] on `Δ(s) / Π (s − r)` for the roots `known`.
pub fn newton_refine_deflated<T: Scalar>(
    seed: ComplexPole<T>,
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
    known: &[Complex<T>],
) -> Result<NewtonRoot<T>> {
    if !seed.is_finite() {
        return Err(Error::InvalidParameter("Newton seed must be finite".into()));
    }
    let tol = |s: Complex<T>| T::root_tolerance() * term_scale(s, plant, gains).max(T::one());
    let residual = |s: Complex<T>| char_fn(s, plant, gains).norm();
    let merit = |s: Complex<T>| known.iter().fold(residual(s), |m, r| m / (s - r).norm());
    // Newton correction for the deflated function g = Δ / Π (s − r):
    // g/g' = 1 / (Δ'/Δ − Σ 1/(s − r)).
    let correction = |s: Complex<T>, f: Complex<T>| -> Option<Complex<T>> {
        let d = char_fn_derivative(s, plant, gains);
        let mut ratio = d / f;
        for r in known {
            ratio -= (s - r).inv();
        }
        let step = ratio.inv();
        (step.re.is_finite() && step.im.is_finite() && ratio.norm() != T::zero()).then_some(step)
    };

    let mut s = seed.to_complex();
    let mut best = (s, residual(s));
    let mut converged_at = None;
    for it in 0..=MAX_ITERATIONS {
        let f = char_fn(s, plant, gains);
        let res = f.norm();
        if res < best.1 {
            best = (s, res);
        }
        if res < tol(s) {
            converged_at = Some(it);
            break;
        }
        if it == MAX_ITERATIONS {
            break;
        }
        let Some(step) = correction(s, f) else {
            return Err(no_convergence(best));
        };
        let current = merit(s);
        let mut scale = T::one();
        let mut trial = s - step;
        for _ in 0..MAX_HALVINGS {
            if merit(trial) < current {
                break;
            }
            scale *= T::lit(0.5);
            trial = s - step * scale;
        }
        s = trial;
    }
    let Some(iterations) = converged_at else {
        return Err(no_convergence(best));
    };

    // A few undamped steps past the threshold, kept only while |Δ| drops.
    let mut res = residual(s);
    for _ in 0..POLISH_STEPS {
        let f = char_fn(s, plant, gains);
        if f.norm() == T::zero() {
            break;
        }
        let Some(step) = correction(s, f) else { break };
        let trial = s - step;
        let r = residual(trial);
        if r < res {
            s = trial;
            res = r;
        } else {
            break;
        }
    }

    if s.im != T::zero() && s.im.abs() < T::merge_distance() {
        let snapped = polish_real(s.re, plant, gains);
        let r = residual(snapped);
        if r < tol(snapped) {
            s = snapped;
            res = r;
        }
    }

    Ok(NewtonRoot {
        pole: s.into(),
        iterations,
        residual: res,
    })
}

/// `|s|² + K |K_P s + K_I| |e^(-Ls)|`.
fn term_scale<T: Scalar>(s: Complex<T>, plant: &PlantParams<T>, gains: &PiGains<T>) -> T {
    let delay = (-s.re * plant.delay()).exp();
    s.norm_sqr() + plant.gain() * (s * gains.kp + gains.ki).norm() * delay
}

/// Real-axis Newton on `Δ`, which is real-valued there.
fn polish_real<T: Scalar>(x0: T, plant: &PlantParams<T>, gains: &PiGains<T>) -> Complex<T> {
    let mut x = Complex::new(x0, T::zero());
    let mut res = char_fn(x, plant, gains).norm();
    for _ in 0..8 {
        let f = char_fn(x, plant, gains).re;
        let d = char_fn_derivative(x, plant, gains).re;
        if d == T::zero() || f == T::zero() {
            break;
        }
        let trial = Complex::new(x.re - f / d, T::zero());
        let r = char_fn(trial, plant, gains).norm();
        if r < res {
            x = trial;
            res = r;
        } else {
            break;
        }
    }
    x
}

fn no_convergence<T: Scalar>((s, res): (Complex<T>, T)) -> Error {
    Error::NewtonNoConvergence {
        re: s.re.to_f64_lossy(),
        im: s.im.to_f64_lossy(),
        residual: res.to_f64_lossy(),
    }
}

/// Refined dominant roots of `Δ`, real part descending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleSet<T = f64> {
    poles: Vec<ComplexPole<T>>,
    abscissa: T,
    dominant_is_real: bool,
    seeds: Vec<ComplexPole<T>>,
}

impl<T: Scalar> PoleSet<T> {
    /// Validates and orders `roots`; every root must be a residual-level zero of `Δ`.
    fn new(
        mut poles: Vec<ComplexPole<T>>,
        seeds: Vec<ComplexPole<T>>,
        plant: &PlantParams<T>,
        gains: &PiGains<T>,
    ) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::InvalidParameter("pole set cannot be empty".into()));
        }
        for p in &poles {
            let residual = char_fn(p.to_complex(), plant, gains).norm();
            if residual.is_nan() || residual >= T::pole_tolerance() {
                return Err(Error::PoleResidual {
                    re: p.re.to_f64_lossy(),
                    im: p.im.to_f64_lossy(),
                    residual: residual.to_f64_lossy(),
                });
            }
        }
        poles.sort_by(|a, b| {
            b.re.partial_cmp(&a.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        let lead = poles[0];
        Ok(Self {
            abscissa: lead.re,
            dominant_is_real: lead.im == T::zero(),
            poles,
            seeds,
        })
    }

    pub fn poles(&self) -> &[ComplexPole<T>] {
        &self.poles
    }

    /// Largest real part, `J`.
    pub fn abscissa(&self) -> T {
        self.abscissa
    }

    /// Whether the abscissa-achieving pole lies on the real axis.
    pub fn dominant_is_real(&self) -> bool {
        self.dominant_is_real
    }

    /// Log-mapped eigenvalues the poles were refined from.
    pub fn seeds(&self) -> &[ComplexPole<T>] {
        &self.seeds
    }

    pub fn real_poles(&self) -> impl Iterator<Item = &ComplexPole<T>> {
        self.poles.iter().filter(|p| p.im == T::zero())
    }

    /// Upper-half-plane members of the complex pairs.
    pub fn complex_pairs(&self) -> impl Iterator<Item = &ComplexPole<T>> {
        self.poles.iter().filter(|p| p.im > T::zero())
    }

    /// Largest minus smallest real part.
    pub fn real_part_spread(&self) -> T {
        let min = self.poles.iter().fold(T::infinity(), |m, p| m.min(p.re));
        self.abscissa - min
    }
}

/// Refines `seeds` into a deduplicated, conjugate-closed [`PoleSet`].
///
/// Seeds in the lower half-plane are skipped: their upper partners cover
/// them by symmetry. Roots whose imaginary part reaches `alias_band` are
/// rejected.
pub fn refine_seeds<T: Scalar>(
    seeds: &[ComplexPole<T>],
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
    alias_band: T,
) -> Result<PoleSet<T>> {
    let merge = T::merge_distance();
    let mut roots: Vec<Complex<T>> = Vec::new();
    for seed in seeds {
        if seed.im < T::zero() && seeds.iter().any(|s| *s == seed.conj()) {
            continue;
        }
        let wrap = |e: Error| Error::Seed {
            seed_re: seed.re.to_f64_lossy(),
            seed_im: seed.im.to_f64_lossy(),
            source: Box::new(e),
        };
        let root = newton_refine_deflated(*seed, plant, gains, &roots).map_err(wrap)?;
        let z = root.pole.to_complex();
        if z.im.abs() >= alias_band {
            return Err(wrap(Error::Aliased {
                re: z.re.to_f64_lossy(),
                im: z.im.to_f64_lossy(),
                band: alias_band.to_f64_lossy(),
            }));
        }
        if roots.iter().any(|r| (r - z).norm() < merge) {
            continue;
        }
        roots.push(z);
        if z.im != T::zero() {
            roots.push(z.conj());
        }
    }
    PoleSet::new(
        roots.into_iter().map(Into::into).collect(),
        seeds.to_vec(),
        plant,
        gains,
    )
}

/// Dominant pole set from the second-order model with `segments` delay segments.
pub fn dominant_poles<T: Scalar>(
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
    segments: usize,
) -> Result<PoleSet<T>> {
    let model = build_model(plant, gains, segments, ModelOrder::Second)?;
    let discrete = dominant_discrete_poles(&model, SEED_COUNT)?;
    let h = model.step();
    let seeds = discrete
        .into_iter()
        .map(|lambda| map_to_continuous(lambda, h))
        .collect::<Result<Vec<_>>>()?;
    refine_seeds(&seeds, plant, gains, T::PI() / h)
}

/// `J(K_P, K_I)`: largest real part over the refined dominant poles.
pub fn spectral_abscissa<T: Scalar>(
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
    segments: usize,
) -> Result<T> {
    Ok(dominant_poles(plant, gains, segments)?.abscissa())
}
