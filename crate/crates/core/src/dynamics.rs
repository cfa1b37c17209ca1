//! State evolution through the closed-form solution and its affine Bloch
//! representation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{same_time, CoefficientSet};
use crate::error::{invalid, Result};

/// Slack allowed when validating states that came out of floating-point
/// arithmetic.
pub const STATE_TOL: f64 = 1e-12;

/// A qubit density matrix as ground-state population and coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    /// `P1 = ⟨1|ρ|1⟩`.
    pub p1: f64,
    /// `α = ⟨1|ρ|2⟩`.
    pub alpha: Complex64,
}

impl QubitState {
    pub fn new(p1: f64, alpha: Complex64) -> Result<Self> {
        let s = Self { p1, alpha };
        s.validate(STATE_TOL)?;
        Ok(s)
    }

    pub fn ground() -> Self {
        Self {
            p1: 1.0,
            alpha: Complex64::new(0.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        Self {
            p1: 0.0,
            alpha: Complex64::new(0.0, 0.0),
        }
    }

    /// Positivity margin `P1(1 - P1) - |α|²` (the determinant of ρ).
    pub fn determinant(&self) -> f64 {
        self.p1 * (1.0 - self.p1) - self.alpha.norm_sqr()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.validate(tol).is_ok()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if !(self.p1.is_finite() && self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return invalid("state has non-finite entries");
        }
        if self.p1 < -tol || self.p1 > 1.0 + tol {
            return invalid(format!("population {} outside [0, 1]", self.p1));
        }
        if self.determinant() < -tol {
            return invalid(format!(
                "|alpha|^2 = {} exceeds P1(1-P1) = {}",
                self.alpha.norm_sqr(),
                self.p1 * (1.0 - self.p1)
            ));
        }
        Ok(())
    }

    /// Bloch vector `(x1, x2, x3)` with `x3 = 2P1 - 1`, `α = (x1 - i x2)/2`.
    pub fn bloch(&self) -> [f64; 3] {
        [
            2.0 * self.alpha.re,
            -2.0 * self.alpha.im,
            2.0 * self.p1 - 1.0,
        ]
    }

    pub fn from_bloch(v: [f64; 3]) -> Self {
        Self {
            p1: 0.5 * (1.0 + v[2]),
            alpha: Complex64::new(0.5 * v[0], -0.5 * v[1]),
        }
    }
}

/// Closed-form evolution: `P1(t) = e^{-Γ} P1(0) + g`, `α(t) = α(0) e^{iΩ - Γ/2 - Γ̃}`.
///
/// The result is not re-validated: a map that is not positive may take a
/// valid state out of the state space, and callers check that separately.
pub fn evolve_state(s0: &QubitState, c: &CoefficientSet) -> Result<QubitState> {
    s0.validate(STATE_TOL)?;
    Ok(QubitState {
        p1: c.decay() * s0.p1 + c.g,
        alpha: s0.alpha * c.coherence_factor(),
    })
}

/// The channel as an affine map on Bloch vectors, `v ↦ Λ v + (0, 0, t3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineBlochMap {
    /// `λ3 = e^{-Γ}`.
    pub lambda3: f64,
    /// `t3 = 2g + e^{-Γ} - 1`.
    pub t3: f64,
    /// `κ = λ1 = conj(λ2) = e^{iΩ - Γ/2 - Γ̃}`.
    pub kappa: Complex64,
}

impl AffineBlochMap {
    pub fn identity() -> Self {
        Self {
            lambda3: 1.0,
            t3: 0.0,
            kappa: Complex64::new(1.0, 0.0),
        }
    }

    /// Damping matrix: `|κ|` times a rotation by `Ω` in the x1–x2 plane, and
    /// `λ3` along x3.
    pub fn damping_matrix(&self) -> [[f64; 3]; 3] {
        let (k, w) = (self.kappa.re, self.kappa.im);
        [[k, w, 0.0], [-w, k, 0.0], [0.0, 0.0, self.lambda3]]
    }

    pub fn translation(&self) -> [f64; 3] {
        [0.0, 0.0, self.t3]
    }

    /// Population reached from the ground state, `e^{-Γ}(G + 1)`.
    pub fn p_bar(&self) -> f64 {
        0.5 * (1.0 + self.t3 + self.lambda3)
    }

    /// Population reached from the excited state, `e^{-Γ} G`.
    pub fn q_bar(&self) -> f64 {
        0.5 * (1.0 + self.t3 - self.lambda3)
    }
}

pub fn bloch_map(c: &CoefficientSet) -> AffineBlochMap {
    let lambda3 = c.decay();
    AffineBlochMap {
        lambda3,
        t3: 2.0 * c.g + lambda3 - 1.0,
        kappa: c.coherence_factor(),
    }
}

pub fn apply_bloch(m: &AffineBlochMap, v: [f64; 3]) -> [f64; 3] {
    let l = m.damping_matrix();
    let t = m.translation();
    let mut out = [0.0; 3];
    for (i, row) in l.iter().enumerate() {
        out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + t[i];
    }
    out
}

/// Decomposition of the coherence log-attenuation `ln|α(t)/α(0)|` into the
/// contribution of the dissipative environment and of each dephaser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub t: f64,
    /// `-Γ/2`.
    pub dissipative: f64,
    /// `-Γ̃_k` per dephasing environment.
    pub dephasing: Vec<f64>,
    /// Sum of all addends.
    pub total: f64,
}

impl AdditivityReport {
    /// `|α(t)/α(0)|` from the summed exponent.
    pub fn attenuation(&self) -> f64 {
        self.total.exp()
    }

    /// Product of the per-environment attenuation factors.
    pub fn product_of_attenuations(&self) -> f64 {
        self.dephasing
            .iter()
            .fold(self.dissipative.exp(), |acc, d| acc * d.exp())
    }
}

pub fn additivity_report(
    dissipative: &CoefficientSet,
    dephasers: &[CoefficientSet],
    t: f64,
) -> Result<AdditivityReport> {
    for c in std::iter::once(dissipative).chain(dephasers) {
        if !same_time(c.t, t) {
            return invalid(format!(
                "coefficient set at t = {} does not match t = {t}",
                c.t
            ));
        }
    }
    let mut dephasing: Vec<f64> = dephasers.iter().map(|c| -c.gamma_tilde).collect();
    if dissipative.gamma_tilde != 0.0 {
        dephasing.insert(0, -dissipative.gamma_tilde);
    }
    let head = -0.5 * dissipative.gamma;
    let total = dephasing.iter().fold(head, |acc, d| acc + d);
    Ok(AdditivityReport {
        t,
        dissipative: head,
        dephasing,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::markovian_coefficients;
    use crate::models::{memory_zeros, thermal_closed_form, ThermalParams};
    use proptest::prelude::*;

    fn c(gamma: f64, gamma_tilde: f64, omega: f64, g: f64) -> CoefficientSet {
        CoefficientSet {
            t: 1.0,
            gamma,
            gamma_tilde,
            omega,
            g,
        }
    }

    #[test]
    fn zero_coefficients_are_identity() {
        let s = QubitState::new(0.3, Complex64::new(0.2, -0.1)).unwrap();
        assert_eq!(evolve_state(&s, &CoefficientSet::zero(0.0)).unwrap(), s);
        assert_eq!(
            bloch_map(&CoefficientSet::zero(0.0)),
            AffineBlochMap::identity()
        );
        let v = [0.1, -0.4, 0.3];
        assert_eq!(apply_bloch(&AffineBlochMap::identity(), v), v);
    }

    #[test]
    fn markovian_population() {
        let gamma = 0.8;
        for t in [0.5, 2.0, 9.0] {
            let cs = markovian_coefficients(0.0, gamma, 0.0, 0.0, t).unwrap();
            let p0 = 0.2;
            let s =
                evolve_state(&QubitState::new(p0, Complex64::new(0.0, 0.0)).unwrap(), &cs).unwrap();
            let e = (-gamma * t / 2.0).exp();
            assert!((s.p1 - (e * p0 + 1.0 - e)).abs() < 1e-15);
        }
    }

    #[test]
    fn thermal_at_memory_zero_resets_population() {
        let p = ThermalParams::new(10.0, 0.0).unwrap();
        let tau = memory_zeros(10.0, 1.0).unwrap()[0];
        let (gamma, g) = thermal_closed_form(p, tau).unwrap();
        let cs = CoefficientSet {
            t: tau,
            gamma,
            g,
            ..CoefficientSet::zero(tau)
        };
        let s = evolve_state(&QubitState::excited(), &cs).unwrap();
        assert!((s.p1 - 1.0).abs() < 1e-12);
        let m = bloch_map(&cs);
        assert!(m.lambda3 < 1e-12 && (m.t3 - 1.0).abs() < 1e-12 && m.kappa.norm() < 1e-6);
        let v = apply_bloch(&m, [0.0, 0.0, 1.0]);
        assert!((v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_dephasing_map() {
        let m = bloch_map(&c(0.0, 2f64.ln(), 0.0, 0.0));
        assert_eq!(m.lambda3, 1.0);
        assert_eq!(m.t3, 0.0);
        assert!((m.kappa - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn full_relaxation_limit() {
        let m = bloch_map(&c(f64::INFINITY, 0.0, 0.3, 1.0));
        assert_eq!((m.lambda3, m.t3), (0.0, 1.0));
        assert_eq!(m.kappa.norm(), 0.0);
    }

    #[test]
    fn invalid_state_rejected() {
        assert!(QubitState::new(1.2, Complex64::new(0.0, 0.0)).is_err());
        assert!(QubitState::new(0.5, Complex64::new(0.6, 0.0)).is_err());
        let bad = QubitState {
            p1: 0.5,
            alpha: Complex64::new(0.6, 0.0),
        };
        assert!(evolve_state(&bad, &CoefficientSet::zero(0.0)).is_err());
    }

    #[test]
    fn additivity_single_and_dissipative_only() {
        let diss = c(0.6, 0.0, 0.0, 0.2);
        let deph = c(0.0, 0.35, 0.1, 0.0);
        let r = additivity_report(&diss, &[deph], 1.0).unwrap();
        assert_eq!(r.total, -0.3 - 0.35);
        let r = additivity_report(&diss, &[], 1.0).unwrap();
        let s0 = QubitState::new(0.5, Complex64::new(0.3, 0.2)).unwrap();
        let s = evolve_state(&s0, &diss).unwrap();
        assert!((s.alpha.norm() / s0.alpha.norm() - r.attenuation()).abs() < 1e-15);
        assert!(additivity_report(&diss, &[CoefficientSet::zero(2.0)], 1.0).is_err());
    }

    #[test]
    fn markovian_semigroup() {
        let (g1, g2, g3, w) = (0.3, 0.9, 0.2, 0.7);
        for (t1, t2) in [(0.4, 1.1), (2.0, 3.5)] {
            let a = bloch_map(&markovian_coefficients(g1, g2, g3, w, t1).unwrap());
            let b = bloch_map(&markovian_coefficients(g1, g2, g3, w, t2).unwrap());
            let ab = bloch_map(&markovian_coefficients(g1, g2, g3, w, t1 + t2).unwrap());
            for v in [[0.0, 0.0, 1.0], [0.3, -0.5, 0.2], [-0.6, 0.1, -0.7]] {
                let lhs = apply_bloch(&ab, v);
                let rhs = apply_bloch(&b, apply_bloch(&a, v));
                for i in 0..3 {
                    assert!((lhs[i] - rhs[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stationary_population_of_constant_rates() {
        let (g1, g2) = (0.4, 1.4);
        let cs = markovian_coefficients(g1, g2, 0.0, 0.0, 200.0).unwrap();
        let s = evolve_state(
            &QubitState::new(0.1, Complex64::new(0.0, 0.0)).unwrap(),
            &cs,
        )
        .unwrap();
        assert!((s.p1 - g2 / (g1 + g2)).abs() < 1e-14);
    }

    fn state() -> impl Strategy<Value = QubitState> {
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(p1, frac, phase)| {
            let r = frac * (p1 * (1.0 - p1)).sqrt();
            QubitState {
                p1,
                alpha: Complex64::from_polar(r, phase),
            }
        })
    }

    proptest! {
        #[test]
        fn bloch_representation_commutes(s in state(), gamma in -0.5..5.0f64, gt in -0.5..3.0f64,
                                         omega in -10.0..10.0f64, g in -0.2..1.2f64) {
            let cs = c(gamma, gt, omega, g);
            let via_state = evolve_state(&s, &cs).unwrap().bloch();
            let via_map = apply_bloch(&bloch_map(&cs), s.bloch());
            for i in 0..3 {
                prop_assert!((via_state[i] - via_map[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn coherence_modulus_ignores_phase(s in state(), omega in -50.0..50.0f64) {
            let a = evolve_state(&s, &c(0.7, 0.2, 0.0, 0.1)).unwrap();
            let b = evolve_state(&s, &c(0.7, 0.2, omega, 0.1)).unwrap();
            prop_assert!((a.alpha.norm() - b.alpha.norm()).abs() <= 1e-15 * a.alpha.norm().max(1.0));
        }

        #[test]
        fn bloch_round_trip(s in state()) {
            let back = QubitState::from_bloch(s.bloch());
            prop_assert!((back.p1 - s.p1).abs() < 1e-15);
            prop_assert!((back.alpha - s.alpha).norm() < 1e-15);
        }
    }
}
