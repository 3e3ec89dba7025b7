//! PI tuning for integrating-plus-dead-time plants by minimizing the
//! closed-loop spectral abscissa.
//!
//! The plant `K/s · e^(-Ls)` under PI control has infinitely many
//! closed-loop poles. A semi-discrete model with `M` delay segments gives
//! estimates of the rightmost ones, which are refined by Newton iteration
//! on the exact characteristic quasi-polynomial. Differential evolution then
//! minimizes the largest real part over `(K_P, K_I)`.
//!
//! ```
//! use spectral_pi::{dominant_poles, PiGains, PlantParams};
//!
//! let plant = PlantParams::normalized();
//! let gains = PiGains::new(0.4614, 0.0793).unwrap();
//! let poles = dominant_poles(&plant, &gains, 20).unwrap();
//! assert!(poles.abscissa() < -0.55);
//! ```
//!
//! Numerical kernels are generic over [`Scalar`] (`f32` or `f64`, default
//! `f64`). Tuning, baselines and the frequency-domain tools are `f64` only.

pub mod baselines;
pub mod de;
pub mod error;
pub mod frequency;
pub mod linalg;
pub mod model;
pub mod pade;
pub mod scalar;
pub mod semi_discrete;
pub mod spectral;
pub mod tuner;

pub use baselines::{
    gain_trajectory, integral_index_tune, simc, ziegler_nichols, IntegralIndex, Method, SimcVariant,
    TrajectoryPoint, TuningResult,
};
pub use error::{Error, Result};
pub use frequency::{
    loop_response, margin_grid, margins, stability_boundary, BoundaryPoint, MarginCell, MarginGrid,
    MarginReport,
};
pub use model::{
    char_fn, char_fn_derivative, normalize_gains, scale_gains_to_plant, ComplexPole, PiGains, PlantParams,
};
pub use pade::{
    model_error_map, pade_closed_loop_poles, pade_coeffs, spectrum_fidelity, CellStatus, ErrorMap,
    ErrorMethod, FidelityReport, PadeOrder, RationalDelay,
};
pub use scalar::Scalar;
pub use semi_discrete::{
    build_model, simulate, ModelOrder, Scenario, SemiDiscreteModel, SimulationTrace, DEFAULT_SEGMENTS,
};
pub use spectral::{dominant_poles, map_to_continuous, newton_refine, spectral_abscissa, PoleSet};
pub use tuner::{
    optimal_ki_sweep, stability_grid, tune, DeConfig, GainBounds, GainGrid, SweepPoint, TuneResult,
};

pub type PlantParamsF32 = PlantParams<f32>;
pub type PiGainsF32 = PiGains<f32>;
pub type ComplexPoleF32 = ComplexPole<f32>;
pub type PoleSetF32 = PoleSet<f32>;
pub type SemiDiscreteModelF32 = SemiDiscreteModel<f32>;
