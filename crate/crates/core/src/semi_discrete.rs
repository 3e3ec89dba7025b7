//! Finite-dimensional recurrence approximating the delayed closed loop.
//!
//! The dead time `L` is split into `M` segments of length `h = L/M`. The
//! state is
//!
//! ```text
//! x[k] = [e[k], u[k], u[k-1], …, u[k-M]]
//! ```
//!
//! of dimension `M + 2`. The integral state of the PI law is not stored:
//! it is eliminated through `K_I s[k] = u[k] − K_P e[k]`.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::model::{PiGains, PlantParams};
use crate::scalar::Scalar;

/// Default number of delay segments.
pub const DEFAULT_SEGMENTS: usize = 20;

/// Accuracy order of the delay and integral quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOrder {
    /// Forward-Euler error update, left-rectangle integral.
    First,
    /// Trapezoidal error update, end-corrected trapezoidal integral.
    Second,
}

/// Transition matrix of `x[k+1] = A x[k]` for one plant/gain pair.
///
/// Only the first two rows of `A` are dense; the remaining rows shift the
/// control history by one slot. [`SemiDiscreteModel::matrix`] materializes
/// the full matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteModel<T = f64> {
    plant: PlantParams<T>,
    gains: PiGains<T>,
    segments: usize,
    order: ModelOrder,
    step: T,
    error_row: Vec<T>,
    control_row: Vec<T>,
}

impl<T: Scalar> SemiDiscreteModel<T> {
    pub fn plant(&self) -> &PlantParams<T> {
        &self.plant
    }

    pub fn gains(&self) -> &PiGains<T> {
        &self.gains
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn order(&self) -> ModelOrder {
        self.order
    }

    /// Step length `h = L/M`.
    pub fn step(&self) -> T {
        self.step
    }

    /// State dimension `M + 2`.
    pub fn dimension(&self) -> usize {
        self.segments + 2
    }

    pub fn matrix(&self) -> SquareMatrix<T> {
        let n = self.dimension();
        let mut a = SquareMatrix::zeros(n);
        for j in 0..n {
            a[(0, j)] = self.error_row[j];
            a[(1, j)] = self.control_row[j];
        }
        for i in 2..n {
            a[(i, i - 1)] = T::one();
        }
        a
    }

    /// One step of the recurrence, `A x`, in O(M) operations.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.dimension();
        assert_eq!(x.len(), n, "state dimension mismatch");
        let mut next = Vec::with_capacity(n);
        next.push(dot(&self.error_row, x));
        next.push(dot(&self.control_row, x));
        next.extend_from_slice(&x[1..n - 1]);
        next
    }

    fn apply_into(&self, x: &[T], next: &mut [T]) {
        let n = x.len();
        next[0] = dot(&self.error_row, x);
        next[1] = dot(&self.control_row, x);
        next[2..n].copy_from_slice(&x[1..n - 1]);
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Builds the closed-loop transition matrix.
///
/// Second order:
///
/// ```text
/// e[k+1] = e[k] − (hK/2)(u[k−M] + u[k−M+1])
/// u[k+1] = K_P e[k+1] + (u[k] − K_P e[k]) + K_I (h/2)(e[k] + e[k+1])
///          − K_I (K h²/12)(u[k−M+1] − u[k−M])
/// ```
///
/// First order: `e[k+1] = e[k] − hK u[k−M]` and `s[k+1] = s[k] + h e[k]`.
pub fn build_model<T: Scalar>(
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
    segments: usize,
    order: ModelOrder,
) -> Result<SemiDiscreteModel<T>> {
    if segments < 2 {
        return Err(Error::InvalidParameter(format!(
            "segments must be >= 2 (the second-order stencil needs two delayed samples), got {segments}"
        )));
    }
    let m = segments;
    let n = m + 2;
    let k = plant.gain();
    let h = plant.delay() / T::from_usize(m).expect("segment count");
    let half = T::lit(0.5);
    let (kp, ki) = (gains.kp, gains.ki);

    // Column of u[k-j] is 1 + j.
    let oldest = m + 1;
    let second_oldest = m;

    let mut error_row = vec![T::zero(); n];
    error_row[0] = T::one();
    let mut control_row;
    match order {
        ModelOrder::Second => {
            error_row[oldest] -= h * k * half;
            error_row[second_oldest] -= h * k * half;
            let c = kp + ki * h * half;
            control_row = error_row.iter().map(|&v| v * c).collect::<Vec<_>>();
            control_row[0] += -kp + ki * h * half;
            control_row[1] += T::one();
            let corr = ki * k * h * h / T::lit(12.0);
            control_row[second_oldest] -= corr;
            control_row[oldest] += corr;
        }
        ModelOrder::First => {
            error_row[oldest] -= h * k;
            control_row = error_row.iter().map(|&v| v * kp).collect::<Vec<_>>();
            control_row[0] += -kp + ki * h;
            control_row[1] += T::one();
        }
    }

    Ok(SemiDiscreteModel {
        plant: *plant,
        gains: *gains,
        segments,
        order,
        step: h,
        error_row,
        control_row,
    })
}

/// All `M + 2` eigenvalues of the transition matrix.
pub fn eigenvalues<T: Scalar>(model: &SemiDiscreteModel<T>) -> Result<Vec<Complex<T>>> {
    linalg::eigenvalues(&model.matrix())
}

/// The `count` eigenvalues of largest modulus, modulus-descending.
///
/// A conjugate pair is never split: if the cut falls between the two
/// members, the partner is included and `count + 1` values are returned.
pub fn dominant_discrete_poles<T: Scalar>(
    model: &SemiDiscreteModel<T>,
    count: usize,
) -> Result<Vec<Complex<T>>> {
    if count == 0 || count > model.dimension() {
        return Err(Error::InvalidParameter(format!(
            "count must be in 1..={}, got {count}",
            model.dimension()
        )));
    }
    let mut ev = eigenvalues(model)?;
    sort_by_modulus(&mut ev);
    let mut take = count;
    if take < ev.len() {
        let last = ev[take - 1];
        if last.im != T::zero() && !ev[..take].contains(&last.conj()) {
            if let Some(pos) = ev[take..].iter().position(|z| *z == last.conj()) {
                ev.swap(take, take + pos);
                take += 1;
            }
        }
    }
    ev.truncate(take);
    Ok(ev)
}

/// Modulus descending; within equal modulus, upper half-plane first.
pub(crate) fn sort_by_modulus<T: Scalar>(ev: &mut [Complex<T>]) {
    ev.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Initial condition of a time-domain run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario<T = f64> {
    /// Unit reference step: `x[0] = [1, K_P, 0, …, 0]`.
    Tracking,
    /// Constant input disturbance `D` at zero reference: `x[0] = [0, D, 0, …, 0]`.
    Disturbance(T),
}

impl<T: Scalar> Scenario<T> {
    pub fn initial_state(&self, gains: &PiGains<T>, dimension: usize) -> Vec<T> {
        let mut x = vec![T::zero(); dimension];
        match *self {
            Scenario::Tracking => {
                x[0] = T::one();
                x[1] = gains.kp;
            }
            Scenario::Disturbance(d) => x[1] = d,
        }
        x
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Tracking => "tracking",
            Scenario::Disturbance(_) => "disturbance",
        }
    }
}

/// Sampled error and control signals from one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace<T = f64> {
    pub scenario: Scenario<T>,
    pub step: T,
    pub times: Vec<T>,
    pub error: Vec<T>,
    pub control: Vec<T>,
}

impl<T: Scalar> SimulationTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,e,u` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "e", "u"])?;
        for i in 0..self.len() {
            w.write_record([
                self.times[i].to_string(),
                self.error[i].to_string(),
                self.control[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sign changes of `e` after its first local extremum.
    ///
    /// Samples smaller than `1e-10 × max|e|` are treated as zero and skipped.
    pub fn oscillation_count(&self) -> usize {
        oscillation_count(&self.error)
    }
}

/// Sign changes after the first local extremum of `signal`.
pub fn oscillation_count<T: Scalar>(signal: &[T]) -> usize {
    let peak = signal.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if peak == T::zero() {
        return 0;
    }
    let floor = peak * T::lit(1e-10);
    // First local extremum, ignoring flat stretches.
    let mut start = signal.len();
    let mut prev_slope = T::zero();
    for i in 1..signal.len() {
        let slope = signal[i] - signal[i - 1];
        if slope == T::zero() {
            continue;
        }
        if prev_slope != T::zero() && slope.signum() != prev_slope.signum() {
            start = i - 1;
            break;
        }
        prev_slope = slope;
    }
    let mut count = 0;
    let mut last_sign = T::zero();
    for v in signal.iter().skip(start) {
        if v.abs() <= floor {
            continue;
        }
        let s = v.signum();
        if last_sign != T::zero() && s != last_sign {
            count += 1;
        }
        last_sign = s;
    }
    count
}

/// Iterates the recurrence from the scenario's initial state for
/// `floor(horizon / h)` steps. The trace includes the initial sample.
pub fn simulate<T: Scalar>(
    model: &SemiDiscreteModel<T>,
    scenario: Scenario<T>,
    horizon: T,
) -> Result<SimulationTrace<T>> {
    let h = model.step();
    if !(horizon.is_finite() && horizon >= h) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be >= one step ({h}), got {horizon}"
        )));
    }
    let steps = step_count(horizon, h);
    let mut x = scenario.initial_state(model.gains(), model.dimension());
    let mut next = vec![T::zero(); x.len()];
    let mut times = Vec::with_capacity(steps + 1);
    let mut error = Vec::with_capacity(steps + 1);
    let mut control = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        times.push(T::from_usize(k).expect("step index") * h);
        error.push(x[0]);
        control.push(x[1]);
        if k < steps {
            model.apply_into(&x, &mut next);
            std::mem::swap(&mut x, &mut next);
        }
    }
    Ok(SimulationTrace {
        scenario,
        step: h,
        times,
        error,
        control,
    })
}

fn step_count<T: Scalar>(horizon: T, h: T) -> usize {
    // Guard against 40/0.05 evaluating to 799.999…
    (horizon / h + T::lit(1e-9)).floor().to_usize().unwrap_or(0)
}

/// Continuous-time decay rate of `‖x[k]‖` fitted over the second half of
/// the run: least-squares slope of `ln ‖x[k]‖` against `t_k`.
///
/// The state is renormalized every step, so horizons far beyond the
/// underflow point of the raw trajectory are fine.
pub fn decay_rate<T: Scalar>(model: &SemiDiscreteModel<T>, scenario: Scenario<T>, horizon: T) -> Result<T> {
    let h = model.step();
    let steps = step_count(horizon, h);
    if steps < 4 {
        return Err(Error::InvalidParameter(
            "horizon too short for a decay fit".into(),
        ));
    }
    let mut x = scenario.initial_state(model.gains(), model.dimension());
    let mut next = vec![T::zero(); x.len()];
    let mut log_scale = T::zero();
    let tail_start = steps / 2;
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for k in 0..=steps {
        let norm = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if !(norm > T::zero() && norm.is_finite()) {
            return Err(Error::InvalidParameter(
                "state vanished or diverged during decay fit".into(),
            ));
        }
        if k >= tail_start {
            let t = T::from_usize(k).unwrap() * h;
            let y = log_scale + norm.ln();
            sx += t;
            sy += y;
            sxx += t * t;
            sxy += t * y;
            n += T::one();
        }
        for v in x.iter_mut() {
            *v /= norm;
        }
        log_scale += norm.ln();
        model.apply_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
