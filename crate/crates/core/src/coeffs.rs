//! Rate profiles and their time-integrated coefficients.
//!
//! A [`RateProfile`] holds the four time functions of the generator: heating
//! rate `gamma1`, dissipation rate `gamma2`, pure dephasing rate `gamma3` and
//! frequency shift `omega`. [`integrate_profile`] turns it into the
//! cumulative quantities consumed by the closed-form solution:
//!
//! * `Gamma(t)  = ∫₀ᵗ (γ1 + γ2)/2`
//! * `GammaTilde(t) = ∫₀ᵗ γ3`
//! * `Omega(t)  = ∫₀ᵗ ω`
//! * `g(t) = e^{-Γ(t)} ∫₀ᵗ e^{Γ(t')} γ2(t')/2 dt'`
//!
//! `g` is never assembled from `e^{Γ}`; it is propagated segment by segment
//! with a local integrating factor, so only differences `Γ(b) - Γ(t')`
//! inside one segment are ever exponentiated.
//!
//! Rates may have isolated simple poles (declared in `singular_points`).
//! Integrals across a pole are taken as Cauchy principal values, which is
//! the continuation that keeps `e^{-Γ}` analytic through the pole.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
pub use crate::quadrature::QuadratureConfig;

pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PrimitiveFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Which of the four generator functions a value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateKind {
    Gamma1,
    Gamma2,
    Gamma3,
    Omega,
}

impl RateKind {
    pub const DECAY_RATES: [RateKind; 3] = [RateKind::Gamma1, RateKind::Gamma2, RateKind::Gamma3];

    pub fn name(self) -> &'static str {
        match self {
            RateKind::Gamma1 => "gamma1",
            RateKind::Gamma2 => "gamma2",
            RateKind::Gamma3 => "gamma3",
            RateKind::Omega => "omega",
        }
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One time-dependent function of the generator, optionally with a known
/// antiderivative `t ↦ ∫₀ᵗ`.
#[derive(Clone)]
pub struct Channel {
    rate: RateFn,
    primitive: Option<PrimitiveFn>,
    zero: bool,
}

impl Channel {
    pub fn new(rate: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rate: Arc::new(rate),
            primitive: None,
            zero: false,
        }
    }

    pub fn zero() -> Self {
        Self {
            rate: Arc::new(|_| 0.0),
            primitive: Some(Arc::new(|_| Ok(0.0))),
            zero: true,
        }
    }

    pub fn constant(value: f64) -> Self {
        if value == 0.0 {
            return Self::zero();
        }
        Self {
            rate: Arc::new(move |_| value),
            primitive: Some(Arc::new(move |t| Ok(value * t))),
            zero: false,
        }
    }

    /// Attach the antiderivative `∫₀ᵗ rate`. It must vanish at `t = 0`.
    pub fn with_primitive(
        mut self,
        primitive: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        self.primitive = Some(Arc::new(primitive));
        self
    }

    pub fn without_primitive(mut self) -> Self {
        if !self.zero {
            self.primitive = None;
        }
        self
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.rate)(t)
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn has_primitive(&self) -> bool {
        self.primitive.is_some()
    }

    fn primitive(&self, t: f64) -> Option<Result<f64>> {
        self.primitive.as_ref().map(|p| p(t))
    }

    /// Pointwise sum of two channels.
    pub fn sum(&self, other: &Channel) -> Channel {
        if self.zero {
            return other.clone();
        }
        if other.zero {
            return self.clone();
        }
        let (a, b) = (self.rate.clone(), other.rate.clone());
        let primitive: Option<PrimitiveFn> = match (&self.primitive, &other.primitive) {
            (Some(pa), Some(pb)) => {
                let (pa, pb) = (pa.clone(), pb.clone());
                Some(Arc::new(move |t| Ok(pa(t)? + pb(t)?)))
            }
            _ => None,
        };
        Channel {
            rate: Arc::new(move |t| a(t) + b(t)),
            primitive,
            zero: false,
        }
    }
}

impl fmt::Debug for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Channel")
            .field("zero", &self.zero)
            .field("primitive", &self.primitive.is_some())
            .finish()
    }
}

/// The time-dependent rates `γ1, γ2, γ3` and frequency shift `ω`.
#[derive(Clone, Debug)]
pub struct RateProfile {
    pub gamma1: Channel,
    pub gamma2: Channel,
    pub gamma3: Channel,
    pub omega: Channel,
    singular_points: Vec<f64>,
}

impl Default for RateProfile {
    fn default() -> Self {
        Self::zero()
    }
}

impl RateProfile {
    pub fn zero() -> Self {
        Self {
            gamma1: Channel::zero(),
            gamma2: Channel::zero(),
            gamma3: Channel::zero(),
            omega: Channel::zero(),
            singular_points: Vec::new(),
        }
    }

    pub fn constant(gamma1: f64, gamma2: f64, gamma3: f64, omega: f64) -> Self {
        Self {
            gamma1: Channel::constant(gamma1),
            gamma2: Channel::constant(gamma2),
            gamma3: Channel::constant(gamma3),
            omega: Channel::constant(omega),
            singular_points: Vec::new(),
        }
    }

    pub fn with_gamma1(mut self, c: Channel) -> Self {
        self.gamma1 = c;
        self
    }

    pub fn with_gamma2(mut self, c: Channel) -> Self {
        self.gamma2 = c;
        self
    }

    pub fn with_gamma3(mut self, c: Channel) -> Self {
        self.gamma3 = c;
        self
    }

    pub fn with_omega(mut self, c: Channel) -> Self {
        self.omega = c;
        self
    }

    /// Declare times where the rates may diverge. Negative and non-finite
    /// entries are rejected; the list is stored sorted and deduplicated.
    pub fn with_singular_points(mut self, mut points: Vec<f64>) -> Result<Self> {
        if let Some(bad) = points.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return invalid(format!("singular point {bad} must be finite and >= 0"));
        }
        points.extend_from_slice(&self.singular_points);
        points.sort_by(f64::total_cmp);
        points.dedup();
        self.singular_points = points;
        Ok(self)
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular_points
    }

    pub fn channel(&self, kind: RateKind) -> &Channel {
        match kind {
            RateKind::Gamma1 => &self.gamma1,
            RateKind::Gamma2 => &self.gamma2,
            RateKind::Gamma3 => &self.gamma3,
            RateKind::Omega => &self.omega,
        }
    }

    pub fn rate(&self, kind: RateKind, t: f64) -> f64 {
        self.channel(kind).eval(t)
    }

    /// `[γ1, γ2, γ3, ω]` at `t`.
    pub fn rates(&self, t: f64) -> [f64; 4] {
        [
            self.gamma1.eval(t),
            self.gamma2.eval(t),
            self.gamma3.eval(t),
            self.omega.eval(t),
        ]
    }

    /// Generator of independent environments acting together: rates add.
    pub fn superpose(&self, other: &RateProfile) -> RateProfile {
        let mut points = self.singular_points.clone();
        points.extend_from_slice(&other.singular_points);
        points.sort_by(f64::total_cmp);
        points.dedup();
        RateProfile {
            gamma1: self.gamma1.sum(&other.gamma1),
            gamma2: self.gamma2.sum(&other.gamma2),
            gamma3: self.gamma3.sum(&other.gamma3),
            omega: self.omega.sum(&other.omega),
            singular_points: points,
        }
    }

    /// Same rates with every known antiderivative dropped, forcing quadrature.
    pub fn without_primitives(&self) -> RateProfile {
        RateProfile {
            gamma1: self.gamma1.clone().without_primitive(),
            gamma2: self.gamma2.clone().without_primitive(),
            gamma3: self.gamma3.clone().without_primitive(),
            omega: self.omega.clone().without_primitive(),
            singular_points: self.singular_points.clone(),
        }
    }
}

/// Integrated coefficients at one time point.
///
/// `gamma` may be `+inf` where `e^{-Γ}` vanishes (zeros of a memory kernel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub t: f64,
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub omega: f64,
    pub g: f64,
}

impl CoefficientSet {
    pub fn zero(t: f64) -> Self {
        Self {
            t,
            gamma: 0.0,
            gamma_tilde: 0.0,
            omega: 0.0,
            g: 0.0,
        }
    }

    /// `λ3 = e^{-Γ}`.
    pub fn decay(&self) -> f64 {
        (-self.gamma).exp()
    }

    /// `|κ|² = e^{-Γ - 2Γ̃}`.
    pub fn coherence_modulus_sq(&self) -> f64 {
        (-self.gamma - 2.0 * self.gamma_tilde).exp()
    }

    /// `κ = e^{iΩ - Γ/2 - Γ̃}`, the factor multiplying the coherence.
    pub fn coherence_factor(&self) -> Complex64 {
        Complex64::from_polar((-0.5 * self.gamma - self.gamma_tilde).exp(), self.omega)
    }

    /// Population reached from `P1(0) = 1`: `e^{-Γ}(G + 1) = e^{-Γ} + g`.
    pub fn p_bar(&self) -> f64 {
        self.decay() + self.g
    }

    /// Population reached from `P1(0) = 0`: `e^{-Γ}G = g`.
    pub fn q_bar(&self) -> f64 {
        self.g
    }

    /// Add the dephasing exponent and phase of an independent pure-dephasing
    /// environment evaluated at the same time.
    pub fn with_dephasing(&self, dephaser: &CoefficientSet) -> Result<CoefficientSet> {
        if !same_time(self.t, dephaser.t) {
            return invalid(format!(
                "coefficient sets at different times: {} vs {}",
                self.t, dephaser.t
            ));
        }
        if dephaser.gamma != 0.0 || dephaser.g != 0.0 {
            return invalid("dephaser must not carry population dynamics (Gamma = g = 0)");
        }
        Ok(CoefficientSet {
            gamma_tilde: self.gamma_tilde + dephaser.gamma_tilde,
            omega: self.omega + dephaser.omega,
            ..*self
        })
    }

    /// Coefficients of the intermediate propagator `Λ_{t,s}` that takes the
    /// state at `earlier.t = s` to the state at `self.t = t`.
    ///
    /// Exponents subtract; the population offset follows from
    /// `g(t) = e^{-(Γ(t) - Γ(s))} g(s) + g_{t,s}`.
    pub fn propagator_from(&self, earlier: &CoefficientSet) -> Result<CoefficientSet> {
        if !(earlier.t <= self.t) {
            return invalid(format!(
                "propagator needs s <= t, got s = {} and t = {}",
                earlier.t, self.t
            ));
        }
        let gamma = self.gamma - earlier.gamma;
        if !gamma.is_finite() {
            return invalid("propagator undefined where e^{-Gamma} vanishes");
        }
        Ok(CoefficientSet {
            t: self.t - earlier.t,
            gamma,
            gamma_tilde: self.gamma_tilde - earlier.gamma_tilde,
            omega: self.omega - earlier.omega,
            g: self.g - (-gamma).exp() * earlier.g,
        })
    }
}

pub(crate) fn same_time(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Closed-form coefficients for constant rates.
pub fn markovian_coefficients(
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    omega: f64,
    t: f64,
) -> Result<CoefficientSet> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    for (name, v) in [
        ("gamma1", gamma1),
        ("gamma2", gamma2),
        ("gamma3", gamma3),
        ("omega", omega),
    ] {
        if !v.is_finite() {
            return invalid(format!("{name} must be finite, got {v}"));
        }
    }
    let gamma = 0.5 * (gamma1 + gamma2) * t;
    Ok(CoefficientSet {
        t,
        gamma,
        gamma_tilde: gamma3 * t,
        omega: omega * t,
        // γ2/(γ1+γ2) (1 - e^{-Γ}) written without the 0/0 at γ1 + γ2 = 0.
        g: 0.5 * gamma2 * t * one_minus_exp_ratio(gamma),
    })
}

/// `(1 - e^{-x}) / x`, equal to 1 at `x = 0`.
fn one_minus_exp_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Regular { a: f64, b: f64 },
    Fold { s: f64, r: f64 },
    Emit(f64),
}

/// Lay out the walk from 0 through `times`, bracketing every singular point
/// in `(0, last]` with a symmetric fold zone that contains no output time.
fn plan(times: &[f64], singular: &[f64]) -> Result<Vec<Step>> {
    if times.is_empty() {
        return Ok(Vec::new());
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t.is_finite() && t >= 0.0) {
            return invalid(format!("time {t} must be finite and >= 0"));
        }
        if i > 0 && t <= times[i - 1] {
            return invalid(format!(
                "times must be strictly increasing ({} then {t})",
                times[i - 1]
            ));
        }
    }
    let last = *times.last().expect("non-empty");
    let poles: Vec<f64> = singular.iter().copied().filter(|&s| s <= last).collect();
    if poles.first() == Some(&0.0) {
        return invalid("rate singular at t = 0; no right limit to integrate from");
    }
    let mut anchors: Vec<f64> = times.to_vec();
    anchors.push(0.0);
    anchors.extend_from_slice(&poles);
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();

    let mut events: Vec<(f64, Step)> = times.iter().map(|&t| (t, Step::Emit(t))).collect();
    for &s in &poles {
        if times.binary_search_by(|t| t.total_cmp(&s)).is_ok() {
            return invalid(format!(
                "requested time {s} coincides with a rate singularity"
            ));
        }
        let idx = anchors
            .binary_search_by(|a| a.total_cmp(&s))
            .expect("pole is an anchor");
        let gap_lo = s - anchors[idx - 1];
        let gap_hi = anchors.get(idx + 1).map_or(f64::INFINITY, |a| a - s);
        let r = 0.5 * gap_lo.min(gap_hi);
        events.push((s, Step::Fold { s, r }));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut steps = Vec::with_capacity(2 * events.len());
    let mut pos = 0.0;
    for (_, ev) in events {
        match ev {
            Step::Emit(t) => {
                if t > pos {
                    steps.push(Step::Regular { a: pos, b: t });
                }
                steps.push(Step::Emit(t));
                pos = t;
            }
            Step::Fold { s, r } => {
                if s - r > pos {
                    steps.push(Step::Regular { a: pos, b: s - r });
                }
                steps.push(Step::Fold { s, r });
                pos = s + r;
            }
            Step::Regular { .. } => unreachable!(),
        }
    }
    Ok(steps)
}

/// Tracks the first non-finite evaluation inside a quadrature closure.
struct Probe {
    bad: Cell<Option<f64>>,
}

impl Probe {
    fn new() -> Self {
        Self {
            bad: Cell::new(None),
        }
    }

    #[inline]
    fn check(&self, t: f64, v: f64) -> f64 {
        if v.is_finite() {
            v
        } else {
            if self.bad.get().is_none() {
                self.bad.set(Some(t));
            }
            0.0
        }
    }

    fn finish(&self, rate: &'static str) -> Result<()> {
        match self.bad.get() {
            Some(t) => Err(Error::NotEvaluable { rate, t }),
            None => Ok(()),
        }
    }
}

/// Relative half-width below which the folded integrand is extrapolated
/// instead of evaluated. Rounding noise in the folded sum grows like `1/u²`,
/// so evaluating too close to the pole costs more accuracy than the
/// extrapolation does.
const FOLD_CUT: f64 = 2e-3;

/// One scalar integrand: either a channel or `(γ1 + γ2)/2`.
#[derive(Clone, Copy)]
enum Integrand<'a> {
    One(&'a Channel),
    HalfSum(&'a Channel, &'a Channel),
}

impl Integrand<'_> {
    fn name(&self) -> &'static str {
        match self {
            Integrand::One(_) => "rate",
            Integrand::HalfSum(..) => "(gamma1+gamma2)/2",
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Integrand::One(c) => c.is_zero(),
            Integrand::HalfSum(a, b) => a.is_zero() && b.is_zero(),
        }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        match self {
            Integrand::One(c) => c.eval(t),
            Integrand::HalfSum(a, b) => {
                let mut v = 0.0;
                if !a.is_zero() {
                    v += a.eval(t);
                }
                if !b.is_zero() {
                    v += b.eval(t);
                }
                0.5 * v
            }
        }
    }

    fn primitive(&self, t: f64) -> Option<Result<f64>> {
        match self {
            Integrand::One(c) => c.primitive(t),
            Integrand::HalfSum(a, b) => match (a.primitive(t)?, b.primitive(t)?) {
                (Ok(x), Ok(y)) => Some(Ok(0.5 * (x + y))),
                (Err(e), _) | (_, Err(e)) => Some(Err(e)),
            },
        }
    }

    fn has_primitive(&self) -> bool {
        match self {
            Integrand::One(c) => c.has_primitive(),
            Integrand::HalfSum(a, b) => a.has_primitive() && b.has_primitive(),
        }
    }

    /// `∫_a^b` over a pole-free interval.
    fn regular(&self, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if self.is_zero() || a == b {
            return Ok(0.0);
        }
        if self.has_primitive() {
            let hi = self.primitive(b).expect("checked")?;
            let lo = self.primitive(a).expect("checked")?;
            return Ok(hi - lo);
        }
        let probe = Probe::new();
        let r = integrate(|t| probe.check(t, self.eval(t)), a, b, cfg);
        probe.finish(self.name())?;
        Ok(r?.value)
    }

    /// Principal value of `∫_{s-r}^{s+r}`, computed by folding the interval
    /// onto `[0, r]` so that the odd pole part cancels pointwise.
    fn fold(&self, s: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if self.has_primitive() {
            let hi = self.primitive(s + r).expect("checked")?;
            let lo = self.primitive(s - r).expect("checked")?;
            return Ok(hi - lo);
        }
        let probe = Probe::new();
        let folded = |u: f64| {
            // Snap the offset so that s + u and s - u are exactly symmetric.
            let u = (s + u) - s;
            probe.check(s + u, self.eval(s + u) + self.eval(s - u))
        };
        let cut = FOLD_CUT * r;
        let body = integrate(folded, cut, r, cfg);
        // The folded integrand is even in u; extrapolate a + b u² onto [0, cut].
        let (f1, f2) = (folded(cut), folded(2.0 * cut));
        let b = (f2 - f1) / (3.0 * cut * cut);
        let head = cut * (f1 - b * cut * cut + b * cut * cut / 3.0);
        probe.finish(self.name())?;
        Ok(body?.value + head)
    }
}

/// Ratio `γ2 / (γ1 + γ2)` near a pole, if both rates stay proportional there.
fn pole_ratio(profile: &RateProfile, s: f64, r: f64) -> Result<Option<f64>> {
    let mut ratio: Option<f64> = None;
    let mut all_zero = true;
    for frac in [1e-3, 0.1, 0.5, 1.0] {
        for t in [s - frac * r, s + frac * r] {
            let g1 = profile.gamma1.eval(t);
            let g2 = profile.gamma2.eval(t);
            if !(g1.is_finite() && g2.is_finite()) {
                return Err(Error::NotEvaluable {
                    rate: "gamma1/gamma2",
                    t,
                });
            }
            if g1 == 0.0 && g2 == 0.0 {
                continue;
            }
            all_zero = false;
            let here = g2 / (g1 + g2);
            match ratio {
                None => ratio = Some(here),
                Some(prev) if (prev - here).abs() <= 1e-9 * prev.abs().max(1.0) => {}
                Some(_) => {
                    return invalid(format!(
                        "gamma1 and gamma2 are not proportional around the singular point {s}; \
                         the population coefficient cannot be continued through it"
                    ))
                }
            }
        }
    }
    if all_zero {
        Ok(None)
    } else {
        Ok(ratio)
    }
}

/// Propagate `g` over a pole-free segment `[a, b]` on which `Γ` grows by
/// `delta_gamma`: `g(b) = e^{-ΔΓ} g(a) + ∫_a^b e^{-(Γ(b) - Γ(t'))} γ2(t')/2 dt'`.
fn propagate_g(
    profile: &RateProfile,
    a: f64,
    b: f64,
    g_a: f64,
    delta_gamma: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let carried = (-delta_gamma).exp() * g_a;
    if profile.gamma2.is_zero() || a == b {
        return Ok(carried);
    }
    let decay_rate = Integrand::HalfSum(&profile.gamma1, &profile.gamma2);
    let inner_err: Cell<Option<Error>> = Cell::new(None);
    let probe = Probe::new();
    let source = |t: f64| {
        let gamma2 = probe.check(t, profile.gamma2.eval(t));
        if gamma2 == 0.0 {
            return 0.0;
        }
        match decay_rate.regular(t, b, cfg) {
            Ok(rest) => (-rest).exp() * 0.5 * gamma2,
            Err(e) => {
                let prev = inner_err.take();
                inner_err.set(Some(prev.unwrap_or(e)));
                0.0
            }
        }
    };
    let r = integrate(source, a, b, cfg);
    if let Some(e) = inner_err.take() {
        return Err(e);
    }
    probe.finish("gamma2")?;
    Ok(carried + r?.value)
}

/// Integrate a profile to the coefficients `(Γ, Γ̃, Ω, g)` at each of `times`.
///
/// Coefficients accumulate along the walk, so each inter-sample segment is
/// integrated once.
pub fn integrate_profile(
    profile: &RateProfile,
    times: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<CoefficientSet>> {
    cfg.validate()?;
    let steps = plan(times, profile.singular_points())?;
    let decay_rate = Integrand::HalfSum(&profile.gamma1, &profile.gamma2);
    let dephasing = Integrand::One(&profile.gamma3);
    let phase = Integrand::One(&profile.omega);

    let mut acc = CoefficientSet::zero(0.0);
    let mut out = Vec::with_capacity(times.len());
    for step in steps {
        match step {
            Step::Emit(t) => out.push(CoefficientSet { t, ..acc }),
            Step::Regular { a, b } => {
                let dg = decay_rate.regular(a, b, cfg)?;
                acc.g = propagate_g(profile, a, b, acc.g, dg, cfg)?;
                acc.gamma += dg;
                acc.gamma_tilde += dephasing.regular(a, b, cfg)?;
                acc.omega += phase.regular(a, b, cfg)?;
            }
            Step::Fold { s, r } => {
                let dg = decay_rate.fold(s, r, cfg)?;
                let lambda = (-dg).exp();
                acc.g = match pole_ratio(profile, s, r)? {
                    Some(rho) => lambda * acc.g + rho * (1.0 - lambda),
                    None => acc.g,
                };
                acc.gamma += dg;
                acc.gamma_tilde += dephasing.fold(s, r, cfg)?;
                acc.omega += phase.fold(s, r, cfg)?;
            }
        }
    }
    Ok(out)
}

/// `(∫₀ᵗ γ1, ∫₀ᵗ γ2, ∫₀ᵗ γ3)`, the inputs of the weak-coupling sign tests.
pub fn weak_coupling_integrals(
    profile: &RateProfile,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64, f64)> {
    cfg.validate()?;
    let steps = plan(&[t], profile.singular_points())?;
    let mut sums = [0.0; 3];
    let channels = [&profile.gamma1, &profile.gamma2, &profile.gamma3];
    for step in steps {
        for (sum, ch) in sums.iter_mut().zip(channels) {
            let f = Integrand::One(ch);
            *sum += match step {
                Step::Regular { a, b } => f.regular(a, b, cfg)?,
                Step::Fold { s, r } => f.fold(s, r, cfg)?,
                Step::Emit(_) => 0.0,
            };
        }
    }
    Ok((sums[0], sums[1], sums[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn assert_rel(a: f64, b: f64, tol: f64) {
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
    }

    #[test]
    fn zero_profile_gives_zero_coefficients() {
        let c = integrate_profile(&RateProfile::zero(), &[0.0, 1.0, 7.5], &cfg()).unwrap();
        for s in c {
            assert_eq!((s.gamma, s.gamma_tilde, s.omega, s.g), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn constant_symmetric_rates_match_closed_form() {
        // γ1 = γ2 = γ: Γ = γt, g = (1 - e^{-γt})/2.
        let gamma = 0.7;
        let p = RateProfile::constant(gamma, gamma, 0.0, 0.0).without_primitives();
        let times = [0.0, 0.3, 1.0, 4.0, 20.0];
        for c in integrate_profile(&p, &times, &cfg()).unwrap() {
            assert_rel(c.gamma, gamma * c.t, 1e-12);
            assert_rel(c.g, 0.5 * (1.0 - (-gamma * c.t).exp()), 1e-10);
        }
    }

    #[test]
    fn markovian_limits() {
        let z = markovian_coefficients(0.0, 0.0, 0.0, 0.0, 3.0).unwrap();
        assert_eq!((z.gamma, z.gamma_tilde, z.omega, z.g), (0.0, 0.0, 0.0, 0.0));

        let gamma = 0.4;
        for t in [0.0, 0.5, 2.0, 10.0] {
            let c = markovian_coefficients(0.0, gamma, 0.0, 0.0, t).unwrap();
            assert_rel(c.g, 1.0 - (-gamma * t / 2.0).exp(), 1e-14);
        }

        let c = markovian_coefficients(0.3, 0.3, 0.0, 0.0, 500.0).unwrap();
        assert!((c.g - 0.5).abs() < 1e-15);

        // γ1 + γ2 = 0 removable singularity: g = γ2 t / 2.
        let c = markovian_coefficients(-0.2, 0.2, 0.0, 0.0, 3.0).unwrap();
        assert_rel(c.g, 0.3, 1e-15);
        assert!(markovian_coefficients(0.1, 0.1, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn rejects_non_monotone_times() {
        let p = RateProfile::zero();
        assert!(matches!(
            integrate_profile(&p, &[0.0, 2.0, 1.0], &cfg()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(integrate_profile(&p, &[1.0, 1.0], &cfg()).is_err());
        assert!(integrate_profile(&p, &[-1.0, 1.0], &cfg()).is_err());
    }

    #[test]
    fn non_finite_rate_is_reported() {
        let p =
            RateProfile::zero().with_gamma3(Channel::new(|t| if t > 1.0 { f64::NAN } else { 0.0 }));
        let err = integrate_profile(&p, &[0.0, 2.0], &cfg()).unwrap_err();
        assert!(matches!(err, Error::NotEvaluable { .. }), "{err:?}");
    }

    #[test]
    fn g_matches_direct_integrating_factor() {
        // Smooth, sign-changing rates with modest Γ so e^{Γ} stays small.
        let p = RateProfile::zero()
            .with_gamma1(Channel::new(|t: f64| 0.2 + 0.1 * (2.0 * t).sin()))
            .with_gamma2(Channel::new(|t: f64| 0.5 + 0.6 * (1.3 * t).cos()));
        let times: Vec<f64> = (0..=8).map(|i| i as f64).collect();
        let got = integrate_profile(&p, &times, &cfg()).unwrap();
        let c = cfg();
        let half_sum = |t: f64| 0.5 * (p.gamma1.eval(t) + p.gamma2.eval(t));
        let big_gamma = |t: f64| integrate(half_sum, 0.0, t, &c).unwrap().value;
        for s in got.iter().skip(1) {
            let gam = big_gamma(s.t);
            assert!(gam.exp() <= 1e6);
            let big_g = integrate(
                |u| big_gamma(u).exp() * 0.5 * p.gamma2.eval(u),
                0.0,
                s.t,
                &c,
            )
            .unwrap()
            .value;
            assert_rel(s.gamma, gam, 1e-10);
            assert_rel(s.g, (-gam).exp() * big_g, 1e-8);
        }
    }

    #[test]
    fn principal_value_through_simple_pole() {
        // ∫ 1/(t - 1) from 0 to 3 (PV) = ln 2.
        let p = RateProfile::zero()
            .with_gamma3(Channel::new(|t: f64| 1.0 / (t - 1.0)))
            .with_singular_points(vec![1.0])
            .unwrap();
        let c = integrate_profile(&p, &[0.0, 0.5, 3.0], &cfg()).unwrap();
        assert_rel(c[1].gamma_tilde, 0.5f64.ln(), 1e-9);
        assert_rel(c[2].gamma_tilde, 2.0f64.ln(), 1e-9);
    }

    #[test]
    fn time_on_pole_is_rejected() {
        let p = RateProfile::zero()
            .with_gamma3(Channel::new(|t: f64| 1.0 / (t - 1.0)))
            .with_singular_points(vec![1.0])
            .unwrap();
        assert!(integrate_profile(&p, &[0.0, 1.0], &cfg()).is_err());
    }

    #[test]
    fn weak_coupling_integrals_of_zero_and_constant() {
        assert_eq!(
            weak_coupling_integrals(&RateProfile::zero(), 4.0, &cfg()).unwrap(),
            (0.0, 0.0, 0.0)
        );
        let p = RateProfile::constant(0.1, 0.2, -0.3, 0.0).without_primitives();
        let (a, b, c) = weak_coupling_integrals(&p, 2.0, &cfg()).unwrap();
        assert_rel(a, 0.2, 1e-12);
        assert_rel(b, 0.4, 1e-12);
        assert_rel(c, -0.6, 1e-12);
    }

    #[test]
    fn superposed_dephasing_adds() {
        let a = RateProfile::zero().with_gamma3(Channel::new(|t: f64| t.cos().powi(2)));
        let b = RateProfile::zero().with_gamma3(Channel::new(|t: f64| (-t).exp()));
        let both = a.superpose(&b);
        let times = [0.0, 1.0, 5.0];
        let ca = integrate_profile(&a, &times, &cfg()).unwrap();
        let cb = integrate_profile(&b, &times, &cfg()).unwrap();
        let cab = integrate_profile(&both, &times, &cfg()).unwrap();
        for i in 0..times.len() {
            assert_rel(
                cab[i].gamma_tilde,
                ca[i].gamma_tilde + cb[i].gamma_tilde,
                1e-12,
            );
        }
    }

    #[test]
    fn propagator_of_semigroup_depends_on_elapsed_time() {
        let at = |t| markovian_coefficients(0.3, 0.9, 0.2, 1.5, t).unwrap();
        let prop = at(3.0).propagator_from(&at(1.0)).unwrap();
        let direct = at(2.0);
        for (a, b) in [
            (prop.gamma, direct.gamma),
            (prop.gamma_tilde, direct.gamma_tilde),
            (prop.omega, direct.omega),
            (prop.g, direct.g),
        ] {
            assert_rel(a, b, 1e-13);
        }
        assert!(at(1.0).propagator_from(&at(3.0)).is_err());
    }

    #[test]
    fn with_dephasing_checks_inputs() {
        let d = CoefficientSet {
            gamma: 0.4,
            g: 0.1,
            ..CoefficientSet::zero(1.0)
        };
        let ph = CoefficientSet {
            gamma_tilde: 0.3,
            omega: 0.2,
            ..CoefficientSet::zero(1.0)
        };
        let m = d.with_dephasing(&ph).unwrap();
        assert_eq!((m.gamma, m.g, m.gamma_tilde, m.omega), (0.4, 0.1, 0.3, 0.2));
        assert!(d.with_dephasing(&d).is_err());
        assert!(d.with_dephasing(&CoefficientSet::zero(2.0)).is_err());
    }
}
