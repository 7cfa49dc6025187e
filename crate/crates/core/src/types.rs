//! Shared domain types: the power model, the beamformer and the RIS phase vector.

use std::f64::consts::TAU;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::{CVector, Complex64};

/// Unit-modulus tolerance for phase vectors.
pub const MODULUS_TOL: f64 = 1e-12;
/// Relative tolerance on the power ball.
pub const POWER_TOL: f64 = 1e-12;

/// Total consumed power `||w||^2 / eta + p_a + K p_c + M p_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    /// `1/eta`; zero turns EE into plain secrecy rate over a constant.
    pub inv_eta: f64,
    pub p_a: f64,
    pub p_c: f64,
    pub p_s: f64,
    pub n_users: usize,
    pub n_elements: usize,
}

impl PowerModel {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            inv_eta: cfg.inv_eta,
            p_a: cfg.p_a,
            p_c: cfg.p_c,
            p_s: cfg.p_s,
            n_users: cfg.n_users,
            n_elements: cfg.n_elements,
        }
    }

    pub fn static_power(&self) -> f64 {
        self.p_a + self.n_users as f64 * self.p_c + self.n_elements as f64 * self.p_s
    }

    pub fn power_from_norm_sq(&self, norm_sq: f64) -> f64 {
        norm_sq * self.inv_eta + self.static_power()
    }

    pub fn total_power(&self, w: &CVector) -> f64 {
        self.power_from_norm_sq(w.norm_squared())
    }
}

/// Free-function form of [`PowerModel::total_power`].
pub fn total_power(pm: &PowerModel, w: &Beamformer) -> f64 {
    pm.total_power(&w.w)
}

/// Transmit vector; its squared norm is the radiated power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub w: CVector,
}

impl Beamformer {
    /// Rejects vectors outside the power ball.
    pub fn new(w: CVector, p_max: f64) -> Result<Self> {
        let norm_sq = w.norm_squared();
        if !is_within_power(norm_sq, p_max) {
            return Err(Error::InfeasibleBeamformer { norm_sq, p_max });
        }
        Ok(Self { w })
    }

    pub fn zeros(n: usize) -> Self {
        Self { w: CVector::zeros(n) }
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.norm_squared()
    }
}

pub fn is_within_power(norm_sq: f64, p_max: f64) -> bool {
    norm_sq.is_finite() && norm_sq <= p_max * (1.0 + POWER_TOL)
}

/// Augmented phase vector `v` of length `M + 1`.
///
/// Entry `m < M` is the complex conjugate of the `m`-th reflection coefficient,
/// which makes `v^H A_k w` equal the composite channel gain. The last entry is
/// the common-phase slot; [`PhaseVector::canonical`] rotates it to exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    pub v: CVector,
}

impl PhaseVector {
    /// Accepts a vector whose entries are unit modulus to [`MODULUS_TOL`].
    pub fn new(v: CVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Geometry("phase vector needs at least one entry".into()));
        }
        if let Some(m) = v.iter().position(|z| ((z.norm() - 1.0).abs() > MODULUS_TOL) || !z.is_finite()) {
            return Err(Error::Geometry(format!(
                "phase entry {m} has modulus {}",
                v[m].norm()
            )));
        }
        Ok(Self { v })
    }

    /// Projects every entry onto the unit circle; zeros map to 1.
    pub fn normalized(v: CVector) -> Self {
        Self {
            v: v.map(|z| {
                let r = z.norm();
                if r > 0.0 && r.is_finite() {
                    z / r
                } else {
                    Complex64::new(1.0, 0.0)
                }
            }),
        }
    }

    /// All reflection coefficients equal to one (identity RIS).
    pub fn ones(n_elements: usize) -> Self {
        Self {
            v: CVector::from_element(n_elements + 1, Complex64::new(1.0, 0.0)),
        }
    }

    /// From reflection phases `theta_m` in radians.
    pub fn from_reflection_phases(theta: &[f64]) -> Self {
        let mut v = CVector::from_element(theta.len() + 1, Complex64::new(1.0, 0.0));
        for (m, t) in theta.iter().enumerate() {
            v[m] = Complex64::from_polar(1.0, -t);
        }
        Self { v }
    }

    pub fn n_elements(&self) -> usize {
        self.v.len() - 1
    }

    /// The first `M` entries of `v`.
    pub fn e(&self) -> CVector {
        self.v.rows(0, self.n_elements()).into_owned()
    }

    /// Diagonal of the reflection matrix after removing the common phase.
    pub fn reflection(&self) -> CVector {
        let c = self.canonical();
        c.e().map(|z| z.conj())
    }

    /// Reflection phases in [0, 2pi).
    pub fn reflection_phases(&self) -> Vec<f64> {
        self.reflection()
            .iter()
            .map(|z| z.arg().rem_euclid(TAU))
            .collect()
    }

    /// Copy rotated so the last entry is exactly 1.
    pub fn canonical(&self) -> Self {
        let n = self.v.len();
        let last = self.v[n - 1];
        let rot = last.conj() / last.norm();
        let mut v = self.v.map(|z| z * rot);
        v[n - 1] = Complex64::new(1.0, 0.0);
        Self { v }
    }

    pub fn max_modulus_error(&self) -> f64 {
        self.v
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pm(inv_eta: f64) -> PowerModel {
        PowerModel {
            inv_eta,
            p_a: 1.0,
            p_c: 0.25,
            p_s: 0.05,
            n_users: 2,
            n_elements: 10,
        }
    }

    #[test]
    fn zero_beam_costs_static_power() {
        let p = pm(1.0 / 0.311);
        assert!((total_power(&p, &Beamformer::zeros(4)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_efficiency_arithmetic() {
        let p = pm(1.0);
        let w = CVector::from_element(1, Complex64::new(1.0, 0.0));
        assert!((p.total_power(&w) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_efficiency_mode_is_constant() {
        let p = pm(0.0);
        let w = CVector::from_element(3, Complex64::new(5.0, -2.0));
        assert_eq!(p.total_power(&w), p.static_power());
    }

    #[test]
    fn beamformer_rejects_excess_power() {
        let w = CVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(Beamformer::new(w.clone(), 2.0).is_ok());
        assert!(matches!(
            Beamformer::new(w, 1.9),
            Err(Error::InfeasibleBeamformer { .. })
        ));
    }

    #[test]
    fn canonical_pins_last_entry() {
        let v = PhaseVector::from_reflection_phases(&[0.3, 1.2, -2.0]);
        let rotated = PhaseVector {
            v: v.v.map(|z| z * Complex64::from_polar(1.0, 0.7)),
        };
        let c = rotated.canonical();
        assert_eq!(c.v[3], Complex64::new(1.0, 0.0));
        for m in 0..3 {
            assert!((c.v[m] - v.v[m]).norm() < 1e-14);
        }
        let phases = rotated.reflection_phases();
        assert!((phases[0] - 0.3).abs() < 1e-12);
        assert!((phases[2] - (TAU - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn modulus_check() {
        let mut v = PhaseVector::ones(2).v;
        assert!(PhaseVector::new(v.clone()).is_ok());
        v[1] = Complex64::new(1.0 + 1e-9, 0.0);
        assert!(PhaseVector::new(v.clone()).is_err());
        assert!(PhaseVector::normalized(v).max_modulus_error() < 1e-15);
    }

    proptest! {
        #[test]
        fn power_is_increasing_in_norm(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let p = pm(1.0 / 0.311);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(p.power_from_norm_sq(hi) > p.power_from_norm_sq(lo));
        }
    }
}
