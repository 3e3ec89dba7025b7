//! Differential evolution, DE/rand/1/bin, over a box in `R^N`.
//!
//! Trial vectors for a generation are drawn sequentially from one seeded
//! stream, then costed in parallel and collected in population order, so a
//! run is bit-identical regardless of thread count.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Control parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DeSettings {
    pub population: usize,
    /// Differential weight `F`.
    pub weight_f: f64,
    /// Crossover probability `CR`.
    pub crossover_cr: f64,
    pub max_generations: usize,
    pub seed: u64,
}

impl DeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidParameter(format!(
                "population must be >= 4, got {}",
                self.population
            )));
        }
        if !(self.weight_f > 0.0 && self.weight_f < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "weight F must lie in (0, 2), got {}",
                self.weight_f
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_cr) {
            return Err(Error::InvalidParameter(format!(
                "crossover CR must lie in [0, 1], got {}",
                self.crossover_cr
            )));
        }
        if self.max_generations == 0 {
            return Err(Error::InvalidParameter("max_generations must be >= 1".into()));
        }
        Ok(())
    }
}

/// How the first generation is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initialization<const N: usize> {
    /// Uniform over the whole box.
    Uniform,
    /// Uniform over a sub-box around `center`, `radius` given as a fraction
    /// of each side length and clipped to the box.
    Around { center: [f64; N], radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome<const N: usize> {
    pub best: [f64; N],
    pub cost: f64,
    pub evaluations: usize,
}

/// Minimizes `cost` over `lower ≤ x ≤ upper`.
///
/// Mutants falling outside the box are clamped to it. Ties keep the
/// lower population index, and a trial replaces its target when its cost
/// is no worse.
pub fn minimize<const N: usize, F>(
    cost: F,
    lower: [f64; N],
    upper: [f64; N],
    settings: &DeSettings,
    init: Initialization<N>,
) -> Result<DeOutcome<N>>
where
    F: Fn(&[f64; N]) -> f64 + Sync,
{
    settings.validate()?;
    for d in 0..N {
        if !(lower[d].is_finite() && upper[d].is_finite() && lower[d] < upper[d]) {
            return Err(Error::InvalidParameter(format!(
                "bounds for coordinate {d} must be finite with lower < upper, got [{}, {}]",
                lower[d], upper[d]
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let (init_lo, init_hi) = match init {
        Initialization::Uniform => (lower, upper),
        Initialization::Around { center, radius } => {
            let mut lo = lower;
            let mut hi = upper;
            for d in 0..N {
                let half = radius * (upper[d] - lower[d]);
                let c = center[d].clamp(lower[d], upper[d]);
                lo[d] = (c - half).max(lower[d]);
                hi[d] = (c + half).min(upper[d]);
            }
            (lo, hi)
        }
    };
    let mut population: Vec<[f64; N]> = (0..settings.population)
        .map(|_| std::array::from_fn(|d| draw(&mut rng, init_lo[d], init_hi[d])))
        .collect();
    let mut costs = evaluate(&cost, &population);
    let mut evaluations = population.len();

    let np = settings.population;
    for _ in 0..settings.max_generations {
        let trials: Vec<[f64; N]> = (0..np)
            .map(|i| {
                let [a, b, c] = pick_three(&mut rng, np, i);
                let forced = rng.gen_range(0..N);
                std::array::from_fn(|d| {
                    if d == forced || rng.gen::<f64>() < settings.crossover_cr {
                        let v = population[a][d] + settings.weight_f * (population[b][d] - population[c][d]);
                        v.clamp(lower[d], upper[d])
                    } else {
                        population[i][d]
                    }
                })
            })
            .collect();
        let trial_costs = evaluate(&cost, &trials);
        evaluations += np;
        for (i, (trial, tc)) in trials.into_iter().zip(trial_costs).enumerate() {
            if tc <= costs[i] {
                population[i] = trial;
                costs[i] = tc;
            }
        }
    }

    let best = (0..np)
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)))
        .expect("population is non-empty");
    Ok(DeOutcome {
        best: population[best],
        cost: costs[best],
        evaluations,
    })
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Three distinct indices, all different from `exclude`.
fn pick_three(rng: &mut ChaCha8Rng, np: usize, exclude: usize) -> [usize; 3] {
    let picked = sample(rng, np - 1, 3);
    let shift = |k: usize| if k >= exclude { k + 1 } else { k };
    [
        shift(picked.index(0)),
        shift(picked.index(1)),
        shift(picked.index(2)),
    ]
}

fn evaluate<const N: usize, F>(cost: &F, points: &[[f64; N]]) -> Vec<f64>
where
    F: Fn(&[f64; N]) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|x| {
            let c = cost(x);
            if c.is_nan() {
                f64::INFINITY
            } else {
                c
            }
        })
        .collect()
}
