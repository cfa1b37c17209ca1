//! Direct integration of the master equation, used as an independent oracle.
//!
//! The generator is assembled from explicit operator matrices (jump
//! operators `|1⟩⟨2|`, `|2⟩⟨1|` and `σz`), so it shares nothing with the
//! closed-form path except the rate functions. The density matrix is carried
//! as `(P1, Re α, Im α)`, which keeps trace and Hermiticity exact; the
//! embedded Dormand–Prince 5(4) pair controls the step size.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{RateKind, RateProfile};
use crate::dynamics::QubitState;
use crate::error::{invalid, Error, Result};

type Mat = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Mat) -> Mat {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn add_scaled(acc: &mut Mat, s: Complex64, a: &Mat) {
    for i in 0..2 {
        for j in 0..2 {
            acc[i][j] += s * a[i][j];
        }
    }
}

/// `L ρ L† - ½{L†L, ρ}`
fn dissipator(l: &Mat, rho: &Mat) -> Mat {
    let ld = dagger(l);
    let ldl = mul(&ld, l);
    let mut out = mul(&mul(l, rho), &ld);
    add_scaled(&mut out, Complex64::new(-0.5, 0.0), &mul(&ldl, rho));
    add_scaled(&mut out, Complex64::new(-0.5, 0.0), &mul(rho, &ldl));
    out
}

/// Lowering operator `|1⟩⟨2|` (excited → ground).
const LOWER: Mat = [[ZERO, ONE], [ZERO, ZERO]];
/// Raising operator `|2⟩⟨1|` (ground → excited).
const RAISE: Mat = [[ZERO, ZERO], [ONE, ZERO]];
/// Energy operator with the ground state at eigenvalue -1.
const SIGMA_Z: Mat = [[Complex64::new(-1.0, 0.0), ZERO], [ZERO, ONE]];

/// `dρ/dt` at time `t` with rates `[γ1, γ2, γ3, ω]`.
fn generator(rates: [f64; 4], rho: &Mat) -> Mat {
    let [g1, g2, g3, w] = rates;
    let mut out = [[ZERO; 2]; 2];
    // -i (ω/2) [σz, ρ]
    let comm = {
        let mut c = mul(&SIGMA_Z, rho);
        add_scaled(&mut c, -ONE, &mul(rho, &SIGMA_Z));
        c
    };
    add_scaled(&mut out, Complex64::new(0.0, -0.5 * w), &comm);
    add_scaled(
        &mut out,
        Complex64::new(0.5 * g2, 0.0),
        &dissipator(&LOWER, rho),
    );
    add_scaled(
        &mut out,
        Complex64::new(0.5 * g1, 0.0),
        &dissipator(&RAISE, rho),
    );
    // ½ γ3 (σz ρ σz - ρ)
    let mut deph = mul(&mul(&SIGMA_Z, rho), &SIGMA_Z);
    add_scaled(&mut deph, -ONE, rho);
    add_scaled(&mut out, Complex64::new(0.5 * g3, 0.0), &deph);
    out
}

/// A 2×2 qubit density matrix in the `{|1⟩, |2⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    entries: Mat,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to within `tol`.
    pub fn new(entries: Mat, tol: f64) -> Result<Self> {
        let herm = (entries[0][1] - entries[1][0].conj()).norm()
            + entries[0][0].im.abs()
            + entries[1][1].im.abs();
        if !(herm <= tol) {
            return invalid(format!(
                "density matrix is not Hermitian (deviation {herm:e})"
            ));
        }
        let trace = entries[0][0].re + entries[1][1].re;
        if !((trace - 1.0).abs() <= tol) {
            return invalid(format!("density matrix trace is {trace}, expected 1"));
        }
        let m = Self { entries };
        m.to_state().validate(tol)?;
        Ok(m)
    }

    pub fn from_state(s: &QubitState) -> Self {
        let p1 = Complex64::new(s.p1, 0.0);
        Self {
            entries: [[p1, s.alpha], [s.alpha.conj(), ONE - p1]],
        }
    }

    pub fn to_state(&self) -> QubitState {
        QubitState {
            p1: self.entries[0][0].re,
            alpha: self.entries[0][1],
        }
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.entries[i][j] - other.entries[i][j]).norm());
            }
        }
        d
    }

    fn to_vec(self) -> [f64; 3] {
        let a = self.entries[0][1];
        [self.entries[0][0].re, a.re, a.im]
    }

    fn from_vec(y: [f64; 3]) -> Self {
        Self::from_state(&QubitState {
            p1: y[0],
            alpha: Complex64::new(y[1], y[2]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Smallest step tried before giving up.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            min_step: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.min_step > 0.0 && self.max_steps > 0)
        {
            return invalid(format!("invalid ODE configuration {self:?}"));
        }
        Ok(())
    }
}

fn rhs(profile: &RateProfile, t: f64, y: [f64; 3]) -> Result<[f64; 3]> {
    let rates = profile.rates(t);
    for (kind, r) in [
        RateKind::Gamma1,
        RateKind::Gamma2,
        RateKind::Gamma3,
        RateKind::Omega,
    ]
    .into_iter()
    .zip(rates)
    {
        if !r.is_finite() {
            return Err(Error::NotEvaluable {
                rate: kind.name(),
                t,
            });
        }
    }
    let d = generator(rates, &DensityMatrix::from_vec(y).entries);
    Ok([d[0][0].re, d[0][1].re, d[0][1].im])
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    profile: &'a RateProfile,
    cfg: OdeConfig,
    t: f64,
    y: [f64; 3],
    /// Derivative at `(t, y)` (first-same-as-last).
    k1: [f64; 3],
    h: f64,
    steps: usize,
}

impl<'a> Stepper<'a> {
    fn new(profile: &'a RateProfile, cfg: OdeConfig, y: [f64; 3], span: f64) -> Result<Self> {
        let k1 = rhs(profile, 0.0, y)?;
        let scale = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = if scale > 0.0 {
            (0.01 / scale).min(span)
        } else {
            span
        };
        Ok(Self {
            profile,
            cfg,
            t: 0.0,
            y,
            k1,
            h: h.max(cfg.min_step),
            steps: 0,
        })
    }

    /// Advance exactly to `t_end`.
    fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.steps += 1;
            if self.steps > self.cfg.max_steps {
                return Err(Error::Integration {
                    t: self.t,
                    reason: format!("step budget of {} exhausted", self.cfg.max_steps),
                });
            }
            let last = self.t + self.h >= t_end;
            let h = if last { t_end - self.t } else { self.h };
            let mut k = [[0.0; 3]; 7];
            k[0] = self.k1;
            for s in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for i in 0..3 {
                        ys[i] += h * A[s][j] * kj[i];
                    }
                }
                k[s] = rhs(self.profile, self.t + C[s] * h, ys)?;
            }
            // Stage 7 is evaluated at the fifth-order solution.
            let mut y_new = self.y;
            for (j, kj) in k.iter().enumerate().take(6) {
                for i in 0..3 {
                    y_new[i] += h * A[6][j] * kj[i];
                }
            }
            let mut err_sq = 0.0;
            for i in 0..3 {
                let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * self.y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc).powi(2);
            }
            let err = (err_sq / 3.0).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    t: self.t,
                    reason: "non-finite error estimate".into(),
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.k1 = k[6];
                // Do not let a short final step shrink the controller's step.
                self.h = (if last { self.h.max(h) } else { h }) * factor;
            } else {
                self.h = h * factor.min(1.0);
                if self.h < self.cfg.min_step {
                    return Err(Error::Integration {
                        t: self.t,
                        reason: format!("step size underflow (h = {:e})", self.h),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Integrate `dρ/dt = L_t ρ` from `ρ(0) = rho0` and report `ρ` at each
/// requested time (non-decreasing, non-negative).
///
/// Windows containing a declared singular point of the profile are refused:
/// the generator is undefined there.
pub fn integrate_me_at(
    profile: &RateProfile,
    rho0: &DensityMatrix,
    times: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<DensityMatrix>> {
    cfg.validate()?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return invalid("times must be finite and non-negative");
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return invalid("times must be non-decreasing");
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    if let Some(&s) = profile.singular_points().iter().find(|&&s| s <= t_end) {
        return Err(Error::Integration {
            t: s,
            reason: "the integration window contains a singular point of the generator".into(),
        });
    }
    let mut stepper = Stepper::new(profile, *cfg, rho0.to_vec(), t_end.max(f64::MIN_POSITIVE))?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        stepper.advance_to(t)?;
        out.push(DensityMatrix::from_vec(stepper.y));
    }
    Ok(out)
}

/// Integrate the master equation up to `t_end`.
pub fn integrate_me(
    profile: &RateProfile,
    rho0: &DensityMatrix,
    t_end: f64,
    cfg: &OdeConfig,
) -> Result<DensityMatrix> {
    Ok(integrate_me_at(profile, rho0, &[t_end], cfg)?[0])
}
