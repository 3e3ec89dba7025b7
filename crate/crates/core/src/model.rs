//! Plant, controller and closed-loop characteristic function.
//!
//! The plant is `K/s · e^(-Ls)` under unity feedback with the PI law
//! `K_P + K_I/s`. Closed-loop poles are the zeros of the quasi-polynomial
//!
//! ```text
//! Δ(s) = s² + K (K_P s + K_I) e^(-L s)
//! ```

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Integrating-plus-dead-time process: gain `K` and dead time `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantParams<T = f64> {
    gain: T,
    delay: T,
}

impl<T: Scalar> PlantParams<T> {
    pub fn new(gain: T, delay: T) -> Result<Self> {
        if !(gain.is_finite() && gain > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "plant gain must be finite and > 0, got {gain}"
            )));
        }
        if !(delay.is_finite() && delay > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "plant delay must be finite and > 0, got {delay}"
            )));
        }
        Ok(Self { gain, delay })
    }

    /// `K = 1`, `L = 1`; every tuning run works on this plant.
    pub fn normalized() -> Self {
        Self {
            gain: T::one(),
            delay: T::one(),
        }
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    /// Ultimate gain `K_u = π/(2LK)` of the proportional-only loop.
    pub fn ultimate_gain(&self) -> T {
        T::PI() / (T::lit(2.0) * self.delay * self.gain)
    }

    /// Ultimate period `P_u = 4L`.
    pub fn ultimate_period(&self) -> T {
        T::lit(4.0) * self.delay
    }
}

impl<T: Scalar> Default for PlantParams<T> {
    fn default() -> Self {
        Self::normalized()
    }
}

/// Proportional and integral gains. Any finite pair is valid, stable or not.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PiGains<T = f64> {
    pub kp: T,
    pub ki: T,
}

impl<T: Scalar> PiGains<T> {
    pub fn new(kp: T, ki: T) -> Result<Self> {
        if !(kp.is_finite() && ki.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gains must be finite, got ({kp}, {ki})"
            )));
        }
        Ok(Self { kp, ki })
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            kp: self.kp * factor,
            ki: self.ki * factor,
        }
    }
}

/// A point in the complex `s`-plane, in 1/s (real) and rad/s (imaginary).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ComplexPole<T = f64> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> ComplexPole<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::new(self.re, self.im)
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: Scalar> From<Complex<T>> for ComplexPole<T> {
    fn from(z: Complex<T>) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl<T: Scalar> From<ComplexPole<T>> for Complex<T> {
    fn from(p: ComplexPole<T>) -> Self {
        Complex::new(p.re, p.im)
    }
}

/// Δ(s) = s² + K (K_P s + K_I) e^(-L s).
pub fn char_fn<T: Scalar>(s: Complex<T>, plant: &PlantParams<T>, gains: &PiGains<T>) -> Complex<T> {
    let delay = (-s * plant.delay).exp();
    s * s + (s * gains.kp + gains.ki) * delay * plant.gain
}

/// Δ′(s) = 2s + K e^(-L s) (K_P − L (K_P s + K_I)).
pub fn char_fn_derivative<T: Scalar>(
    s: Complex<T>,
    plant: &PlantParams<T>,
    gains: &PiGains<T>,
) -> Complex<T> {
    let delay = (-s * plant.delay).exp();
    let inner = (s * gains.kp + gains.ki) * plant.delay;
    s * T::lit(2.0) + delay * plant.gain * (Complex::from(gains.kp) - inner)
}

/// Maps gains tuned on the normalized plant (K = L = 1) onto `plant`:
/// `K_P = K_P*/(K L)`, `K_I = K_I*/(K L²)`.
pub fn scale_gains_to_plant<T: Scalar>(normalized: &PiGains<T>, plant: &PlantParams<T>) -> PiGains<T> {
    let kl = plant.gain * plant.delay;
    PiGains {
        kp: normalized.kp / kl,
        ki: normalized.ki / (kl * plant.delay),
    }
}

/// Inverse of [`scale_gains_to_plant`].
pub fn normalize_gains<T: Scalar>(gains: &PiGains<T>, plant: &PlantParams<T>) -> PiGains<T> {
    let kl = plant.gain * plant.delay;
    PiGains {
        kp: gains.kp * kl,
        ki: gains.ki * kl * plant.delay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit() -> PlantParams {
        PlantParams::normalized()
    }

    #[test]
    fn char_fn_at_origin_is_ki() {
        for &(kp, ki) in &[(0.3, 0.1), (1.2, -0.4), (0.0, 2.5)] {
            let g = PiGains::new(kp, ki).unwrap();
            let d = char_fn(Complex::new(0.0, 0.0), &unit(), &g);
            assert_eq!(d, Complex::new(ki, 0.0));
        }
    }

    #[test]
    fn char_fn_vanishes_at_ultimate_point() {
        let g = PiGains::new(PI / 2.0, 0.0).unwrap();
        let d = char_fn(Complex::new(0.0, PI / 2.0), &unit(), &g);
        assert!(d.norm() < 1e-15, "{d}");
    }

    #[test]
    fn derivative_at_origin() {
        let g = PiGains::new(0.5, 0.1).unwrap();
        let d = char_fn_derivative(Complex::new(0.0, 0.0), &unit(), &g);
        assert!((d - Complex::new(0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_differences_on_rectangle() {
        // Deterministic pseudo-random points over Re∈[-2,1], Im∈[-5,5].
        let plant = PlantParams::new(1.3, 0.8).unwrap();
        let g = PiGains::new(0.47, 0.09).unwrap();
        let delta = 1e-6;
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let s = Complex::new(-2.0 + 3.0 * next(), -5.0 + 10.0 * next());
            let fd = (char_fn(s + delta, &plant, &g) - char_fn(s - delta, &plant, &g)) / (2.0 * delta);
            let exact = char_fn_derivative(s, &plant, &g);
            let rel = (fd - exact).norm() / exact.norm().max(1.0);
            assert!(rel < 1e-6, "s={s} fd={fd} exact={exact}");
        }
    }

    #[test]
    fn scale_gains_examples() {
        let norm = PiGains::new(0.4614, 0.0793).unwrap();
        let same = scale_gains_to_plant(&norm, &unit());
        assert_eq!(same, norm);

        let plant = PlantParams::new(2.0, 0.5).unwrap();
        let g = scale_gains_to_plant(&norm, &plant);
        assert!((g.kp - 0.4614).abs() < 1e-15);
        // K_I / (K L²) = 0.0793 / 0.5
        assert!((g.ki - 0.1586).abs() < 1e-15);

        let zero = scale_gains_to_plant(&PiGains::new(0.0, 0.0).unwrap(), &plant);
        assert_eq!(zero, PiGains::new(0.0, 0.0).unwrap());
    }

    #[test]
    fn rejects_nonpositive_plant() {
        assert!(PlantParams::new(0.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, -1.0).is_err());
        assert!(PlantParams::new(f64::NAN, 1.0).is_err());
        assert!(PiGains::new(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let plant = PlantParams::<f32>::normalized();
        let g = PiGains::<f32>::new(std::f32::consts::FRAC_PI_2, 0.0).unwrap();
        let d = char_fn(Complex::new(0.0f32, std::f32::consts::FRAC_PI_2), &plant, &g);
        assert!(d.norm() < 1e-5);
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(re in -3.0f64..2.0, im in -20.0f64..20.0,
                              kp in -2.0f64..2.0, ki in -1.0f64..1.0,
                              k in 0.1f64..5.0, l in 0.1f64..5.0) {
            let plant = PlantParams::new(k, l).unwrap();
            let g = PiGains::new(kp, ki).unwrap();
            let s = Complex::new(re, im);
            let a = char_fn(s.conj(), &plant, &g);
            let b = char_fn(s, &plant, &g).conj();
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
            let da = char_fn_derivative(s.conj(), &plant, &g);
            let db = char_fn_derivative(s, &plant, &g).conj();
            prop_assert!((da - db).norm() <= 1e-12 * (1.0 + db.norm()));
        }

        #[test]
        fn normalize_inverts_scaling(kp in -2.0f64..2.0, ki in -1.0f64..1.0,
                                     k in 0.1f64..5.0, l in 0.1f64..5.0) {
            let plant = PlantParams::new(k, l).unwrap();
            let g = PiGains::new(kp, ki).unwrap();
            let back = normalize_gains(&scale_gains_to_plant(&g, &plant), &plant);
            prop_assert!((back.kp - kp).abs() < 1e-12 && (back.ki - ki).abs() < 1e-12);
        }
    }
}
