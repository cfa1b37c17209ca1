//! Concrete rate models: the finite-temperature amplitude-damping profile
//! built on the zero-temperature memory kernel, and Ohmic-class dephasing.
//!
//! Time is dimensionless throughout the thermal model (`τ` in units of the
//! inverse spectral width). The dephasing model takes absolute time `t`
//! together with the cutoff `omega_c`; most formulas use `u = omega_c * t`.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as euler_gamma;

use crate::coeffs::{Channel, CoefficientSet, QuadratureConfig, RateProfile};
use crate::error::{invalid, Result};
use crate::quadrature::integrate;

/// Parameters of the heuristic thermal amplitude-damping model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Dimensionless coupling `R > 0`.
    pub r: f64,
    /// Mean thermal occupation `N >= 0`.
    pub n: f64,
}

impl ThermalParams {
    pub fn new(r: f64, n: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return invalid(format!("R must be positive, got {r}"));
        }
        if !(n >= 0.0 && n.is_finite()) {
            return invalid(format!("N must be >= 0, got {n}"));
        }
        Ok(Self { r, n })
    }

    /// `2N + 1`, the exponent relating `Γ` to the zero-temperature kernel.
    pub fn exponent(&self) -> f64 {
        2.0 * self.n + 1.0
    }

    /// Stationary ground-state population `(N + 1)/(2N + 1)`.
    pub fn stationary_population(&self) -> f64 {
        (self.n + 1.0) / self.exponent()
    }
}

/// Convention for the thermal factor and measure of the dephasing integral.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `2∫ J(ω) coth(ω/T) sin(ωt) dω`.
    Paper,
    /// `2∫ J(ω) coth(ω/2T) sin(ωt)/ω dω`.
    #[default]
    Literature,
}

/// Ohmic-class spectral density `J(ω) = α (ω/ω_c)^s e^{-ω/ω_c}` at temperature `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhmicParams {
    pub alpha: f64,
    pub s: f64,
    pub omega_c: f64,
    pub temperature: f64,
    pub kernel: Kernel,
}

impl OhmicParams {
    pub fn new(alpha: f64, s: f64, omega_c: f64, temperature: f64, kernel: Kernel) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("s", s), ("omega_c", omega_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return invalid(format!("temperature must be >= 0, got {temperature}"));
        }
        Ok(Self {
            alpha,
            s,
            omega_c,
            temperature,
            kernel,
        })
    }
}

/// The zero-temperature memory kernel sampled at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySample {
    pub tau: f64,
    /// `c(τ)/c(0)`.
    pub c_ratio: f64,
    /// `x = (c(τ)/c(0))²`.
    pub x: f64,
    /// `ln x`, kept separately so long times do not underflow.
    pub ln_x: f64,
    /// `f = -2 Re(ċ/c)`; `None` at a zero of `c`.
    pub f: Option<f64>,
}

/// Evaluate `c(τ)/c(0)` and the rate `f(τ)` analytically.
///
/// Three branches avoid complex arithmetic: hyperbolic for `R < 1/2`, the
/// degenerate limit `e^{-τ/2}(1 + τ/2)` at `R = 1/2`, trigonometric for
/// `R > 1/2`.
pub fn amplitude_memory(r: f64, tau: f64) -> Result<MemorySample> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("R must be positive, got {r}"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return invalid(format!("tau must be finite and >= 0, got {tau}"));
    }
    if tau == 0.0 {
        return Ok(MemorySample {
            tau,
            c_ratio: 1.0,
            x: 1.0,
            ln_x: 0.0,
            f: Some(0.0),
        });
    }
    let disc = 1.0 - 2.0 * r;
    let (ln_x, c_ratio, f) = if disc > 0.0 {
        let d = disc.sqrt();
        let y = 0.5 * d * tau;
        let th = y.tanh();
        // h = cosh y (1 + tanh y / d) > 0
        let ln_cosh = y + (-2.0 * y).exp().ln_1p() - LN_2;
        let ln_h = ln_cosh + (th / d).ln_1p();
        let ln_x = -tau + 2.0 * ln_h;
        let f = 1.0 - d * (d * th + 1.0) / (d + th);
        (ln_x, (0.5 * ln_x).exp(), Some(f))
    } else if disc == 0.0 {
        let h = 1.0 + 0.5 * tau;
        let ln_x = -tau + 2.0 * h.ln();
        (ln_x, (0.5 * ln_x).exp(), Some(tau / (2.0 + tau)))
    } else {
        // With θ = wτ/2 and the nearest zero τ_k of h: h = ∓M sin ε,
        // ε = w(τ - τ_k)/2, M = √(1 + 1/w²), and f = 1 - w cot ε. Measuring
        // from τ_k keeps full relative accuracy right next to the pole.
        let w = (-disc).sqrt();
        let k = ((0.5 * w * tau - first_zero_phase(w)) / PI).round() as i64;
        let eps = 0.5 * w * (tau - memory_zero(w, k));
        let m = (1.0 + 1.0 / (w * w)).sqrt();
        let sign = if k.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
        let h = sign * m * eps.sin();
        let c_ratio = (-0.5 * tau).exp() * h;
        let ln_x = if h == 0.0 {
            f64::NEG_INFINITY
        } else {
            -tau + 2.0 * (m * eps.sin().abs()).ln()
        };
        let f = (h != 0.0).then(|| 1.0 - w / eps.tan());
        (ln_x, c_ratio, f)
    };
    Ok(MemorySample {
        tau,
        c_ratio,
        x: ln_x.exp(),
        ln_x,
        f,
    })
}

/// Zeros of `c(τ)` in `[0, t_max]` (non-empty only for `R > 1/2`).
pub fn memory_zeros(r: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("R must be positive, got {r}"));
    }
    let disc = 1.0 - 2.0 * r;
    if disc >= 0.0 {
        return Ok(Vec::new());
    }
    let w = (-disc).sqrt();
    let mut zeros = Vec::new();
    for k in 0.. {
        let tau = memory_zero(w, k);
        if tau > t_max {
            break;
        }
        zeros.push(tau);
    }
    Ok(zeros)
}

/// Phase `θ = wτ/2` of the first zero of `cos θ + sin θ / w` (where `tan θ = -w`).
fn first_zero_phase(w: f64) -> f64 {
    PI - w.atan()
}

/// The `k`-th zero of `c(τ)` for `R > 1/2`, `w = √(2R - 1)`.
fn memory_zero(w: f64, k: i64) -> f64 {
    2.0 * (first_zero_phase(w) + k as f64 * PI) / w
}

fn memory_rate(r: f64, tau: f64) -> f64 {
    match amplitude_memory(r, tau) {
        Ok(MemorySample { f: Some(f), .. }) => f,
        _ => f64::NAN,
    }
}

/// Rates `γ1 = 2N f`, `γ2 = 2(N + 1) f`, `γ3 = ω = 0`, with the zeros of
/// `c` in `[0, t_max]` declared as singular points.
pub fn thermal_profile(p: ThermalParams, t_max: f64) -> Result<RateProfile> {
    let p = ThermalParams::new(p.r, p.n)?;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return invalid(format!("t_max must be finite and >= 0, got {t_max}"));
    }
    let r = p.r;
    let heat = 2.0 * p.n;
    let diss = 2.0 * (p.n + 1.0);
    let gamma1 = if p.n == 0.0 {
        Channel::zero()
    } else {
        Channel::new(move |t| heat * memory_rate(r, t))
    };
    RateProfile::zero()
        .with_gamma1(gamma1)
        .with_gamma2(Channel::new(move |t| diss * memory_rate(r, t)))
        .with_singular_points(memory_zeros(r, t_max)?)
}

/// Closed-form `(Γ, g)` of the thermal model: `Γ = -(2N+1) ln x`,
/// `g = (N+1)/(2N+1) (1 - x^{2N+1})`.
pub fn thermal_closed_form(p: ThermalParams, t: f64) -> Result<(f64, f64)> {
    let p = ThermalParams::new(p.r, p.n)?;
    let m = amplitude_memory(p.r, t)?;
    let k = p.exponent();
    let gamma = -k * m.ln_x;
    let g = p.stationary_population() * -(k * m.ln_x).exp_m1();
    Ok((gamma, g))
}

/// [`thermal_closed_form`] packaged as coefficient sets on a time grid.
pub fn thermal_coefficients(p: ThermalParams, times: &[f64]) -> Result<Vec<CoefficientSet>> {
    times
        .iter()
        .map(|&t| {
            let (gamma, g) = thermal_closed_form(p, t)?;
            Ok(CoefficientSet {
                t,
                gamma,
                g,
                ..CoefficientSet::zero(t)
            })
        })
        .collect()
}

/// Long-time limit of `γ2(t)` at `N = 0`: `2(1 - √(1 - 2R))`.
pub fn markov_rate_limit(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 0.5) {
        return invalid(format!(
            "Markovian rate limit needs 0 < R < 1/2 (rates oscillate otherwise), got {r}"
        ));
    }
    Ok(4.0 * r / (1.0 + (1.0 - 2.0 * r).sqrt()))
}

#[inline]
fn coth(z: f64) -> f64 {
    if z > 20.0 {
        1.0
    } else {
        1.0 / z.tanh()
    }
}

/// Which ω-integral to evaluate.
#[derive(Clone, Copy)]
enum Quantity {
    Rate,
    Decoherence,
}

/// Upper cutoff `L` (in units of `ω_c`) such that the neglected tail
/// `prefactor * ∫_L^∞ x^a e^{-x} dx` is below `bound`. Uses
/// `Γ(a+1, L) <= L^a e^{-L} / (1 - a/L)` for `L > a`.
fn truncation(a: f64, prefactor: f64, bound: f64) -> f64 {
    let a = a.max(0.0);
    let mut l: f64 = 50.0;
    loop {
        let tail = prefactor * (a * l.ln() - l).exp() / (1.0 - a / l);
        if l > 2.0 * a && tail <= bound {
            return l;
        }
        l += 10.0;
    }
}

fn ohmic_integral(p: &OhmicParams, t: f64, cfg: &QuadratureConfig, what: Quantity) -> Result<f64> {
    let p = OhmicParams::new(p.alpha, p.s, p.omega_c, p.temperature, p.kernel)?;
    cfg.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let u = p.omega_c * t;
    // Integration variable x = ω/ω_c. `scale` collects constants so that the
    // result is scale * ∫ x^power e^{-x} thermal(x) osc(xu) dx.
    let (power, scale, thermal_arg) = match (p.kernel, what) {
        (Kernel::Paper, Quantity::Rate) => {
            (p.s, 2.0 * p.alpha * p.omega_c, p.omega_c / p.temperature)
        }
        (Kernel::Paper, Quantity::Decoherence) => {
            (p.s - 1.0, 2.0 * p.alpha, p.omega_c / p.temperature)
        }
        (Kernel::Literature, Quantity::Rate) => {
            (p.s - 1.0, 2.0 * p.alpha, 0.5 * p.omega_c / p.temperature)
        }
        (Kernel::Literature, Quantity::Decoherence) => (
            p.s - 2.0,
            2.0 * p.alpha / p.omega_c,
            0.5 * p.omega_c / p.temperature,
        ),
    };
    let zero_t = p.temperature == 0.0;
    let integrand = |x: f64| -> f64 {
        if x == 0.0 {
            // Integrable endpoint; its value has measure zero.
            return 0.0;
        }
        let thermal = if zero_t { 1.0 } else { coth(x * thermal_arg) };
        let osc = match what {
            Quantity::Rate => (x * u).sin(),
            Quantity::Decoherence => 2.0 * (0.5 * x * u).sin().powi(2),
        };
        (power * x.ln() - x).exp() * thermal * osc
    };
    let thermal_max = if zero_t {
        1.0
    } else {
        coth(50.0 * thermal_arg)
    };
    let osc_max = match what {
        Quantity::Rate => 1.0,
        Quantity::Decoherence => 2.0,
    };
    let cutoff = truncation(
        power,
        scale.abs() * thermal_max * osc_max,
        1e-3 * cfg.abs_tol,
    );
    // x = v² on [0, 1] softens x^{s-1}-type endpoint behaviour.
    let head = integrate(|v: f64| 2.0 * v * integrand(v * v), 0.0, 1.0, cfg)?;
    let body = integrate(integrand, 1.0, cutoff, cfg)?;
    Ok(scale * (head.value + body.value))
}

/// Dephasing rate `γ3(t)` by quadrature of the spectral integral.
pub fn ohmic_rate(p: &OhmicParams, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    ohmic_integral(p, t, cfg, Quantity::Rate)
}

/// `Γ̃(t) = ∫₀ᵗ γ3` evaluated as a single ω-integral after exchanging the
/// order of integration (`sin ωt → (1 - cos ωt)/ω`).
pub fn ohmic_decoherence(p: &OhmicParams, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    ohmic_integral(p, t, cfg, Quantity::Decoherence)
}

/// `(1 - e^{-aL} cos(aφ)) / a`, continuous through `a = 0` where it equals `L`.
fn damped_cos_ratio(a: f64, l: f64, phi: f64) -> f64 {
    if a == 0.0 {
        return l;
    }
    (-(-a * l).exp_m1() + (-a * l).exp() * 2.0 * (0.5 * a * phi).sin().powi(2)) / a
}

/// Zero-temperature closed forms `(γ3(t), Γ̃(t))`.
pub fn ohmic_decoherence_closed_zero_t(p: &OhmicParams, t: f64) -> Result<(f64, f64)> {
    let p = OhmicParams::new(p.alpha, p.s, p.omega_c, p.temperature, p.kernel)?;
    if p.temperature != 0.0 {
        return invalid("closed forms hold only at zero temperature");
    }
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    let u = p.omega_c * t;
    let phi = u.atan();
    // ln sqrt(1 + u²)
    let l = 0.5 * u.mul_add(u, 1.0).ln();
    let s = p.s;
    Ok(match p.kernel {
        Kernel::Paper => {
            let rate = 2.0
                * p.alpha
                * euler_gamma(s + 1.0)
                * p.omega_c
                * (-(s + 1.0) * l).exp()
                * ((s + 1.0) * phi).sin();
            let deco = 2.0 * p.alpha * euler_gamma(s + 1.0) * damped_cos_ratio(s, l, phi);
            (rate, deco)
        }
        Kernel::Literature => {
            let rate = 2.0 * p.alpha * euler_gamma(s) * (-s * l).exp() * (s * phi).sin();
            let deco =
                2.0 * p.alpha * euler_gamma(s) / p.omega_c * damped_cos_ratio(s - 1.0, l, phi);
            (rate, deco)
        }
    })
}

/// Pure-dephasing profile with `γ3` from the Ohmic spectral density.
///
/// At zero temperature the closed forms supply both the rate and `Γ̃`; at
/// finite temperature the rate is a spectral quadrature and `Γ̃` the
/// exchanged-order single integral. A quadrature failure surfaces as a
/// non-finite rate.
pub fn ohmic_profile(p: OhmicParams, cfg: QuadratureConfig) -> Result<RateProfile> {
    let p = OhmicParams::new(p.alpha, p.s, p.omega_c, p.temperature, p.kernel)?;
    cfg.validate()?;
    let channel = if p.temperature == 0.0 {
        Channel::new(move |t| ohmic_decoherence_closed_zero_t(&p, t).map_or(f64::NAN, |v| v.0))
            .with_primitive(move |t| Ok(ohmic_decoherence_closed_zero_t(&p, t)?.1))
    } else {
        Channel::new(move |t| ohmic_rate(&p, t, &cfg).unwrap_or(f64::NAN))
            .with_primitive(move |t| ohmic_decoherence(&p, t, &cfg))
    };
    Ok(RateProfile::zero().with_gamma3(channel))
}

/// Piecewise-linear interpolation of one tabulated column, with its exact
/// running integral. Undefined (NaN) outside the table.
struct Table {
    times: Arc<[f64]>,
    values: Vec<f64>,
    /// `∫₀^{times[i]}` of the interpolant.
    cumulative: Vec<f64>,
}

impl Table {
    fn new(times: Arc<[f64]>, values: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(values.len());
        cumulative.push(0.0);
        for i in 1..values.len() {
            let area = 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
            cumulative.push(cumulative[i - 1] + area);
        }
        Self {
            times,
            values,
            cumulative,
        }
    }

    /// Segment index `i` with `times[i] <= t <= times[i+1]`.
    fn segment(&self, t: f64) -> Option<usize> {
        let last = *self.times.last()?;
        if !(t >= self.times[0] && t <= last) {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t);
        Some(i.saturating_sub(1).min(self.times.len() - 2))
    }

    fn eval(&self, t: f64) -> f64 {
        let Some(i) = self.segment(t) else {
            return f64::NAN;
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    fn primitive(&self, t: f64) -> Result<f64> {
        let Some(i) = self.segment(t) else {
            return invalid(format!(
                "time {t} is outside the tabulated range [{}, {}]",
                self.times[0],
                self.times[self.times.len() - 1]
            ));
        };
        let h = t - self.times[i];
        let v = self.eval(t);
        Ok(self.cumulative[i] + 0.5 * (self.values[i] + v) * h)
    }
}

/// Rates `[γ1, γ2, γ3, ω]` interpolated linearly between tabulated samples.
///
/// The table must start at `t = 0`, have strictly increasing times and
/// finite values; rates are undefined beyond its last row.
pub fn tabulated_profile(times: &[f64], rates: &[[f64; 4]]) -> Result<RateProfile> {
    if times.len() < 2 || times.len() != rates.len() {
        return invalid(format!(
            "a rate table needs at least two rows and one rate row per time (got {} times, {} rows)",
            times.len(),
            rates.len()
        ));
    }
    if times[0] != 0.0 {
        return invalid(format!(
            "a rate table must start at t = 0, got {}",
            times[0]
        ));
    }
    if let Some(w) = times
        .windows(2)
        .find(|w| !(w[1] > w[0] && w[1].is_finite()))
    {
        return invalid(format!(
            "table times must be strictly increasing ({} then {})",
            w[0], w[1]
        ));
    }
    if let Some(i) = rates.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return invalid(format!("non-finite rate in table row at t = {}", times[i]));
    }
    let times: Arc<[f64]> = times.into();
    let column = |k: usize| -> Channel {
        let values: Vec<f64> = rates.iter().map(|r| r[k]).collect();
        if values.iter().all(|&v| v == 0.0) {
            return Channel::zero();
        }
        let table = Arc::new(Table::new(times.clone(), values));
        let for_primitive = table.clone();
        Channel::new(move |t| table.eval(t)).with_primitive(move |t| for_primitive.primitive(t))
    };
    Ok(RateProfile::zero()
        .with_gamma1(column(0))
        .with_gamma2(column(1))
        .with_gamma3(column(2))
        .with_omega(column(3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::integrate_profile;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    /// c(τ)/c(0) straight from the defining expression (complex d for R > 1/2).
    fn c_direct(r: f64, tau: f64) -> f64 {
        use num_complex::Complex64;
        let d = Complex64::new(1.0 - 2.0 * r, 0.0).sqrt();
        if d.norm() == 0.0 {
            return (-tau / 2.0f64).exp() * (1.0 + tau / 2.0);
        }
        let z = d * tau / 2.0;
        ((-tau / 2.0f64).exp() * (z.cosh() + z.sinh() / d)).re
    }

    #[test]
    fn weak_coupling_edge_is_trivial() {
        for tau in [0.0, 0.5, 3.0, 100.0] {
            let m = amplitude_memory(1e-12, tau).unwrap();
            assert!((m.x - 1.0).abs() < 1e-9, "{m:?}");
            assert!(m.f.unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_is_flat_at_origin() {
        for r in [0.05, 0.25, 0.5, 2.0, 10.0] {
            let m = amplitude_memory(r, 0.0).unwrap();
            assert_eq!(m.x, 1.0);
            assert_eq!(m.f, Some(0.0));
            // ċ(0) = 0 by central difference of the direct expression.
            let h = 1e-5;
            let slope = (c_direct(r, h) - 1.0) / h;
            assert!(slope.abs() < 1e-3 * r.max(1.0), "R={r}: {slope}");
        }
    }

    #[test]
    fn branches_agree_with_direct_expression() {
        for r in [0.01, 0.3, 0.49999, 0.5, 0.50001, 0.9, 10.0] {
            for tau in [0.1, 0.7, 2.0, 5.5] {
                let m = amplitude_memory(r, tau).unwrap();
                assert!(
                    (m.c_ratio - c_direct(r, tau)).abs() < 1e-10,
                    "R={r} tau={tau}"
                );
                assert!((m.x - m.c_ratio.powi(2)).abs() < 1e-12);
                // f = -2 c'/c by central difference
                let h = 1e-6;
                let fd = -2.0 * (c_direct(r, tau + h) - c_direct(r, tau - h))
                    / (2.0 * h)
                    / c_direct(r, tau);
                assert!(
                    (m.f.unwrap() - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "R={r} tau={tau}"
                );
            }
        }
    }

    #[test]
    fn critical_coupling_limit() {
        let m = amplitude_memory(0.5, 2.0).unwrap();
        assert!(rel(m.x, (-2.0f64).exp() * 4.0) < 1e-14);
    }

    #[test]
    fn first_zero_for_strong_coupling() {
        let zeros = memory_zeros(10.0, 1.0).unwrap();
        assert_eq!(zeros.len(), 1);
        // bisection on the direct expression
        let (mut lo, mut hi) = (0.5, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if c_direct(10.0, mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((zeros[0] - lo).abs() < 1e-12);
        assert!((zeros[0] - 0.824).abs() < 1e-3);
        let w = 19f64.sqrt();
        assert!(((w * zeros[0] / 2.0).tan() + w).abs() < 1e-9);
        let m = amplitude_memory(10.0, zeros[0]).unwrap();
        assert!(m.x < 1e-28);
    }

    #[test]
    fn no_zeros_at_or_below_critical_coupling() {
        assert!(memory_zeros(0.5, 1e4).unwrap().is_empty());
        assert!(memory_zeros(0.1, 1e4).unwrap().is_empty());
        assert!(amplitude_memory(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_temperature_has_no_heating() {
        let p = thermal_profile(ThermalParams::new(0.3, 0.0).unwrap(), 10.0).unwrap();
        assert!(p.gamma1.is_zero());
        let q = thermal_profile(ThermalParams::new(3.0, 1.5).unwrap(), 10.0).unwrap();
        for t in [0.1, 0.5, 1.3, 4.0] {
            let [g1, g2, _, _] = q.rates(t);
            let f = amplitude_memory(3.0, t).unwrap().f.unwrap();
            assert!(rel(0.5 * (g1 + g2), 4.0 * f) < 1e-14);
        }
    }

    #[test]
    fn weak_thermal_rates_are_nonnegative() {
        let p = thermal_profile(ThermalParams::new(0.25, 1.0).unwrap(), 10.0).unwrap();
        for i in 0..=10_000 {
            let [g1, g2, _, _] = p.rates(i as f64 * 1e-3);
            assert!(g1 >= 0.0 && g2 >= 0.0);
        }
    }

    #[test]
    fn thermal_closed_form_limits() {
        let p = ThermalParams::new(0.25, 1.0).unwrap();
        assert_eq!(thermal_closed_form(p, 0.0).unwrap(), (0.0, 0.0));
        let (_, g) = thermal_closed_form(p, 200.0).unwrap();
        assert!((g - 2.0 / 3.0).abs() < 1e-12);
        let p0 = ThermalParams::new(0.25, 0.0).unwrap();
        let (_, g) = thermal_closed_form(p0, 200.0).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_quadrature_matches_closed_form() {
        let p = ThermalParams::new(0.25, 1.0).unwrap();
        let prof = thermal_profile(p, 5.0).unwrap();
        let c = integrate_profile(&prof, &[0.0, 2.0, 5.0], &QuadratureConfig::default()).unwrap();
        for s in &c[1..] {
            let (gamma, g) = thermal_closed_form(p, s.t).unwrap();
            assert!(rel(s.gamma, gamma) < 1e-8);
            assert!(rel(s.g, g) < 1e-8);
        }
    }

    #[test]
    fn thermal_quadrature_through_memory_zeros() {
        let p = ThermalParams::new(10.0, 1.0).unwrap();
        let prof = thermal_profile(p, 6.0).unwrap();
        assert_eq!(prof.singular_points().len(), 4);
        let times: Vec<f64> = (0..=12).map(|i| 0.5 * i as f64).collect();
        let c = integrate_profile(&prof, &times, &QuadratureConfig::default()).unwrap();
        for s in &c[1..] {
            let (gamma, g) = thermal_closed_form(p, s.t).unwrap();
            assert!(
                rel(s.gamma, gamma) < 1e-8,
                "t={} {} vs {}",
                s.t,
                s.gamma,
                gamma
            );
            assert!((s.g - g).abs() < 1e-8, "t={} {} vs {}", s.t, s.g, g);
        }
    }

    #[test]
    fn markov_rate_values() {
        assert!(markov_rate_limit(1e-12).unwrap() < 1e-11);
        assert!((markov_rate_limit(0.25).unwrap() - 2.0 * (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!(markov_rate_limit(0.5).is_err());
        assert!(markov_rate_limit(0.0).is_err());
    }

    #[test]
    fn markov_rate_is_long_time_dissipation_rate() {
        for r in [0.01, 0.25] {
            let f = amplitude_memory(r, 2000.0).unwrap().f.unwrap();
            assert!(rel(2.0 * f, markov_rate_limit(r).unwrap()) < 1e-12);
        }
        assert!((markov_rate_limit(0.01).unwrap() - 0.0201).abs() < 1e-4);
    }

    fn ohmic(s: f64, kernel: Kernel) -> OhmicParams {
        OhmicParams::new(0.1, s, 1.0, 0.0, kernel).unwrap()
    }

    #[test]
    fn ohmic_rate_vanishes_at_origin() {
        let cfg = QuadratureConfig::default();
        for k in [Kernel::Paper, Kernel::Literature] {
            for temp in [0.0, 1.0] {
                let p = OhmicParams::new(0.1, 2.0, 1.0, temp, k).unwrap();
                assert_eq!(ohmic_rate(&p, 0.0, &cfg).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn ohmic_s1_paper_closed_form() {
        let p = ohmic(1.0, Kernel::Paper);
        let cfg = QuadratureConfig::default();
        for u in [0.1f64, 0.5, 1.0, 3.0, 10.0] {
            let expect = 4.0 * 0.1 * u / (1.0 + u * u).powi(2);
            let (closed, _) = ohmic_decoherence_closed_zero_t(&p, u).unwrap();
            assert!(rel(closed, expect) < 1e-13);
            assert!(rel(ohmic_rate(&p, u, &cfg).unwrap(), expect) < 1e-8);
        }
        let (_, deco) = ohmic_decoherence_closed_zero_t(&p, 1.0).unwrap();
        assert!(rel(deco, 0.1) < 1e-14);
    }

    #[test]
    fn ohmic_sign_changes() {
        let (r, _) = ohmic_decoherence_closed_zero_t(&ohmic(3.0, Kernel::Paper), 1.0).unwrap();
        assert!(r.abs() < 1e-15);
        let before = ohmic_decoherence_closed_zero_t(&ohmic(3.0, Kernel::Paper), 0.999)
            .unwrap()
            .0;
        let after = ohmic_decoherence_closed_zero_t(&ohmic(3.0, Kernel::Paper), 1.001)
            .unwrap()
            .0;
        assert!(before > 0.0 && after < 0.0);
        let root = 3f64.sqrt();
        let lit = ohmic(3.0, Kernel::Literature);
        assert!(
            ohmic_decoherence_closed_zero_t(&lit, root - 1e-3)
                .unwrap()
                .0
                > 0.0
        );
        assert!(
            ohmic_decoherence_closed_zero_t(&lit, root + 1e-3)
                .unwrap()
                .0
                < 0.0
        );
    }

    #[test]
    fn closed_decoherence_is_integral_of_rate() {
        let cfg = QuadratureConfig::default();
        for k in [Kernel::Paper, Kernel::Literature] {
            for s in [0.5, 1.0, 1.0 + 1e-9, 2.0, 3.0] {
                let p = ohmic(s, k);
                for t in [0.3, 2.0, 7.0] {
                    let quad = integrate(
                        |x| ohmic_decoherence_closed_zero_t(&p, x).unwrap().0,
                        0.0,
                        t,
                        &cfg,
                    )
                    .unwrap()
                    .value;
                    let (_, deco) = ohmic_decoherence_closed_zero_t(&p, t).unwrap();
                    assert!(
                        (quad - deco).abs() < 1e-10 * deco.abs().max(1.0),
                        "{k:?} s={s} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn decoherence_nonnegative_grid() {
        for k in [Kernel::Paper, Kernel::Literature] {
            for si in 1..=40 {
                let p = ohmic(0.1 * si as f64, k);
                for ui in 0..=400 {
                    let (_, deco) = ohmic_decoherence_closed_zero_t(&p, 0.05 * ui as f64).unwrap();
                    assert!(deco >= -1e-15);
                }
            }
        }
    }

    #[test]
    fn finite_temperature_decoherence_matches_rate_integral() {
        let cfg = QuadratureConfig::default();
        for k in [Kernel::Paper, Kernel::Literature] {
            for s in [0.5, 3.0] {
                let p = OhmicParams::new(0.1, s, 1.0, 1.0, k).unwrap();
                let t = 2.5;
                let direct = ohmic_decoherence(&p, t, &cfg).unwrap();
                let nested = integrate(|x| ohmic_rate(&p, x, &cfg).unwrap(), 0.0, t, &cfg)
                    .unwrap()
                    .value;
                assert!(
                    rel(direct, nested) < 1e-8,
                    "{k:?} s={s}: {direct} vs {nested}"
                );
                assert!(direct > 0.0);
            }
        }
    }

    #[test]
    fn closed_form_rejects_finite_temperature() {
        let p = OhmicParams::new(0.1, 1.0, 1.0, 0.5, Kernel::Paper).unwrap();
        assert!(ohmic_decoherence_closed_zero_t(&p, 1.0).is_err());
        assert!(OhmicParams::new(0.0, 1.0, 1.0, 0.0, Kernel::Paper).is_err());
        assert!(OhmicParams::new(0.1, 1.0, 1.0, -1.0, Kernel::Paper).is_err());
    }

    #[test]
    fn tabulated_rates_interpolate_and_integrate_exactly() {
        let times = [0.0, 1.0, 3.0];
        let rows = [
            [0.0, 1.0, 0.0, 2.0],
            [0.0, 3.0, -1.0, 2.0],
            [0.0, 1.0, 1.0, 2.0],
        ];
        let p = tabulated_profile(&times, &rows).unwrap();
        assert!(p.gamma1.is_zero());
        assert_eq!(p.gamma2.eval(0.5), 2.0);
        assert_eq!(p.gamma3.eval(2.0), 0.0);
        assert!(p.gamma2.eval(3.5).is_nan());
        let cs = integrate_profile(&p, &[1.0, 2.0, 3.0], &QuadratureConfig::default()).unwrap();
        assert!((cs[2].gamma - 0.5 * 6.0).abs() < 1e-14);
        assert!((cs[0].gamma_tilde + 0.5).abs() < 1e-14);
        assert!((cs[2].gamma_tilde + 0.5).abs() < 1e-14);
        assert!((cs[1].omega - 4.0).abs() < 1e-14);
        // quadrature of the interpolant agrees with the exact primitive
        let q = integrate_profile(
            &p.without_primitives(),
            &[1.0, 2.0, 3.0],
            &QuadratureConfig::default(),
        )
        .unwrap();
        for (a, b) in q.iter().zip(&cs) {
            assert!((a.gamma - b.gamma).abs() < 1e-12 && (a.g - b.g).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_profile_validation() {
        let row = [0.0; 4];
        assert!(tabulated_profile(&[0.0], &[row]).is_err());
        assert!(tabulated_profile(&[0.5, 1.0], &[row, row]).is_err());
        assert!(tabulated_profile(&[0.0, 0.0], &[row, row]).is_err());
        assert!(tabulated_profile(&[0.0, 1.0], &[row, [f64::NAN, 0.0, 0.0, 0.0]]).is_err());
        assert!(tabulated_profile(&[0.0, 1.0], &[row]).is_err());
    }
}
