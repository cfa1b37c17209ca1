//! Non-Markovianity as temporary negativity of a decay rate.
//!
//! A negative `γ_k` on any interval breaks CP-divisibility: the propagator
//! between two times inside that interval is not completely positive.
//! Detection is grid-then-bisect: each rate is sampled on a uniform grid,
//! and every sign change of `γ_k + tol` is refined by bisection.

use serde::{Deserialize, Serialize};

use crate::coeffs::{RateKind, RateProfile};
use crate::error::{invalid, Error, Result};

/// Bisection stops once the bracket is narrower than this (absolute time).
pub const CROSSING_ACCURACY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Markovian,
    NonMarkovian,
}

/// A maximal interval on which a rate is below `-tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmReport {
    pub window: (f64, f64),
    pub gamma1: Vec<Interval>,
    pub gamma2: Vec<Interval>,
    pub gamma3: Vec<Interval>,
    /// Declared singular points inside the window; never sampled.
    pub singular_points: Vec<f64>,
    pub verdict: Verdict,
    pub triggering_rates: Vec<RateKind>,
}

impl NmReport {
    pub fn intervals(&self, kind: RateKind) -> &[Interval] {
        match kind {
            RateKind::Gamma1 => &self.gamma1,
            RateKind::Gamma2 => &self.gamma2,
            RateKind::Gamma3 => &self.gamma3,
            RateKind::Omega => &[],
        }
    }

    /// Earliest start of any negative interval.
    pub fn first_negative_start(&self) -> Option<f64> {
        RateKind::DECAY_RATES
            .iter()
            .filter_map(|&k| self.intervals(k).first().map(|i| i.start))
            .min_by(f64::total_cmp)
    }
}

fn eval(profile: &RateProfile, kind: RateKind, t: f64) -> Result<f64> {
    let v = profile.rate(kind, t);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NotEvaluable {
            rate: kind.name(),
            t,
        })
    }
}

/// Locate where `rate + tol` changes sign inside `[lo, hi]`.
fn bisect(
    profile: &RateProfile,
    kind: RateKind,
    tol: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let lo_negative = eval(profile, kind, lo)? < -tol;
    while hi - lo > CROSSING_ACCURACY {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (eval(profile, kind, mid)? < -tol) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Negative intervals of one rate inside `[a, b]`, a window free of
/// singular points except possibly at its ends (`open_*`).
#[allow(clippy::too_many_arguments)]
fn scan_piece(
    profile: &RateProfile,
    kind: RateKind,
    (a, b): (f64, f64),
    (open_lo, open_hi): (bool, bool),
    origin: f64,
    resolution: f64,
    tol: f64,
    out: &mut Vec<Interval>,
) -> Result<()> {
    let nudge = |s: f64| 1e-9 * s.abs().max(1.0);
    let lo = if open_lo { a + nudge(a) } else { a };
    let hi = if open_hi { b - nudge(b) } else { b };
    if hi <= lo {
        return Ok(());
    }
    // Grid points are anchored at the window origin so that adjacent pieces
    // share one lattice.
    let mut samples = vec![lo];
    let k0 = ((lo - origin) / resolution).floor() as i64 + 1;
    let mut k = k0;
    loop {
        let t = origin + k as f64 * resolution;
        if t >= hi {
            break;
        }
        if t > lo {
            samples.push(t);
        }
        k += 1;
    }
    samples.push(hi);

    let mut prev_t = samples[0];
    let mut prev_neg = eval(profile, kind, prev_t)? < -tol;
    let mut start = prev_neg.then_some(a);
    for &t in &samples[1..] {
        let neg = eval(profile, kind, t)? < -tol;
        if neg != prev_neg {
            let crossing = bisect(profile, kind, tol, prev_t, t)?;
            if neg {
                start = Some(crossing);
            } else if let Some(s) = start.take() {
                out.push(Interval {
                    start: s,
                    end: crossing,
                });
            }
        }
        prev_t = t;
        prev_neg = neg;
    }
    if let Some(s) = start {
        out.push(Interval { start: s, end: b });
    }
    Ok(())
}

/// Scan every decay rate on `window` for intervals where it drops below `-tol`.
pub fn negative_intervals(
    profile: &RateProfile,
    window: (f64, f64),
    resolution: f64,
    tol: f64,
) -> Result<NmReport> {
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t0 >= 0.0 && t1 > t0) {
        return invalid(format!("invalid window [{t0}, {t1}]"));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return invalid(format!("resolution must be positive, got {resolution}"));
    }
    if !(tol >= 0.0) {
        return invalid(format!("tolerance must be >= 0, got {tol}"));
    }
    let singular: Vec<f64> = profile
        .singular_points()
        .iter()
        .copied()
        .filter(|&s| s >= t0 && s <= t1)
        .collect();
    let mut edges = vec![(t0, singular.first() == Some(&t0))];
    edges.extend(
        singular
            .iter()
            .filter(|&&s| s > t0 && s < t1)
            .map(|&s| (s, true)),
    );
    edges.push((t1, singular.last() == Some(&t1)));

    let mut per_rate: [Vec<Interval>; 3] = Default::default();
    for (kind, out) in RateKind::DECAY_RATES.into_iter().zip(per_rate.iter_mut()) {
        if profile.channel(kind).is_zero() {
            continue;
        }
        for pair in edges.windows(2) {
            let ((a, open_a), (b, open_b)) = (pair[0], pair[1]);
            scan_piece(
                profile,
                kind,
                (a, b),
                (open_a, open_b),
                t0,
                resolution,
                tol,
                out,
            )?;
        }
    }
    let triggering_rates: Vec<RateKind> = RateKind::DECAY_RATES
        .into_iter()
        .zip(per_rate.iter())
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, _)| k)
        .collect();
    let verdict = if triggering_rates.is_empty() {
        Verdict::Markovian
    } else {
        Verdict::NonMarkovian
    };
    let [gamma1, gamma2, gamma3] = per_rate;
    Ok(NmReport {
        window,
        gamma1,
        gamma2,
        gamma3,
        singular_points: singular,
        verdict,
        triggering_rates,
    })
}

/// Settings shared by every member of a crossover scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub window: (f64, f64),
    pub resolution: f64,
    pub tol: f64,
    /// Bracket width at which parameter bisection stops.
    pub refine_to: f64,
}

impl ScanSettings {
    /// Default resolution is `window / 2048`.
    pub fn new(window: (f64, f64), tol: f64, refine_to: f64) -> Self {
        Self {
            window,
            resolution: (window.1 - window.0) / 2048.0,
            tol,
            refine_to,
        }
    }
}

/// Markovian → non-Markovian threshold located within a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// Largest parameter known to be Markovian (`None` if the first grid value is not).
    pub lower: Option<f64>,
    /// Smallest parameter known to be non-Markovian.
    pub upper: f64,
    /// First non-Markovian value on the original grid.
    pub grid_value: f64,
}

impl Crossover {
    pub fn estimate(&self) -> f64 {
        match self.lower {
            Some(lo) => 0.5 * (lo + self.upper),
            None => self.upper,
        }
    }
}

/// Find the smallest grid parameter whose profile is non-Markovian on the
/// window, then bisect between it and its Markovian predecessor.
/// Returns `None` when every grid value is Markovian.
pub fn crossover_scan<F>(
    family: F,
    grid: &[f64],
    settings: &ScanSettings,
) -> Result<Option<Crossover>>
where
    F: Fn(f64) -> Result<RateProfile>,
{
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("parameter grid must be strictly increasing");
    }
    let verdict = |x: f64| -> Result<Verdict> {
        let profile = family(x)?;
        Ok(
            negative_intervals(&profile, settings.window, settings.resolution, settings.tol)?
                .verdict,
        )
    };
    let mut previous: Option<f64> = None;
    for &x in grid {
        if verdict(x)? == Verdict::NonMarkovian {
            let mut upper = x;
            if let Some(mut lower) = previous {
                while upper - lower > settings.refine_to {
                    let mid = 0.5 * (lower + upper);
                    if verdict(mid)? == Verdict::NonMarkovian {
                        upper = mid;
                    } else {
                        lower = mid;
                    }
                }
                previous = Some(lower);
            }
            return Ok(Some(Crossover {
                lower: previous,
                upper,
                grid_value: x,
            }));
        }
        previous = Some(x);
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::Channel;
    use crate::models::{
        memory_zeros, ohmic_profile, thermal_profile, Kernel, OhmicParams, ThermalParams,
    };
    use crate::quadrature::QuadratureConfig;

    const TOL: f64 = 1e-9;

    #[test]
    fn weak_thermal_is_markovian() {
        for n in [0.0, 1.0, 5.0] {
            let p = thermal_profile(ThermalParams::new(0.25, n).unwrap(), 10.0).unwrap();
            let r = negative_intervals(&p, (0.0, 10.0), 10.0 / 2048.0, TOL).unwrap();
            assert_eq!(r.verdict, Verdict::Markovian);
            assert!(r.first_negative_start().is_none());
        }
    }

    #[test]
    fn strong_thermal_negative_after_first_zero() {
        let p = thermal_profile(ThermalParams::new(10.0, 0.0).unwrap(), 3.0).unwrap();
        let r = negative_intervals(&p, (0.0, 3.0), 3.0 / 2048.0, TOL).unwrap();
        assert_eq!(r.verdict, Verdict::NonMarkovian);
        assert_eq!(r.triggering_rates, vec![RateKind::Gamma2]);
        let zero = memory_zeros(10.0, 3.0).unwrap()[0];
        assert_eq!(r.gamma2[0].start, zero);
        assert!((zero - 0.824).abs() < 1e-3);
        // f = -x'/x turns positive again where x has its local maximum
        assert!(r.gamma2[0].end > zero && r.gamma2[0].end < 3.0);
        assert_eq!(r.singular_points, memory_zeros(10.0, 3.0).unwrap());
    }

    #[test]
    fn heating_and_dissipation_trigger_together() {
        let p = thermal_profile(ThermalParams::new(10.0, 1.0).unwrap(), 3.0).unwrap();
        let r = negative_intervals(&p, (0.0, 3.0), 3.0 / 2048.0, TOL).unwrap();
        assert_eq!(r.triggering_rates, vec![RateKind::Gamma1, RateKind::Gamma2]);
        assert_eq!(r.gamma1, r.gamma2);
    }

    #[test]
    fn ohmic_thresholds() {
        let cfg = QuadratureConfig::default();
        let s05 = OhmicParams::new(0.1, 0.5, 1.0, 0.0, Kernel::Paper).unwrap();
        let r = negative_intervals(
            &ohmic_profile(s05, cfg).unwrap(),
            (0.0, 20.0),
            20.0 / 2048.0,
            TOL,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Markovian);
        let s3 = OhmicParams::new(0.1, 3.0, 1.0, 0.0, Kernel::Paper).unwrap();
        let r = negative_intervals(
            &ohmic_profile(s3, cfg).unwrap(),
            (0.0, 20.0),
            20.0 / 2048.0,
            TOL,
        )
        .unwrap();
        assert_eq!(r.triggering_rates, vec![RateKind::Gamma3]);
        assert!((r.gamma3[0].start - 1.0).abs() < 1e-7);
    }

    #[test]
    fn interval_endpoints_are_resolution_stable() {
        let p = RateProfile::zero().with_gamma3(Channel::new(|t: f64| (3.0 * t).sin() + 0.2));
        let coarse = negative_intervals(&p, (0.0, 10.0), 0.05, TOL).unwrap();
        let fine = negative_intervals(&p, (0.0, 10.0), 0.025, TOL).unwrap();
        assert_eq!(coarse.gamma3.len(), fine.gamma3.len());
        for (a, b) in coarse.gamma3.iter().zip(&fine.gamma3) {
            assert!((a.start - b.start).abs() < 0.05);
            assert!((a.end - b.end).abs() < 0.05);
        }
        // exact crossings of sin(3t) = -0.2
        let first = (std::f64::consts::PI + 0.2f64.asin()) / 3.0;
        assert!((fine.gamma3[0].start - first).abs() < 1e-9);
    }

    #[test]
    fn unevaluable_rate_is_an_error() {
        let p = RateProfile::zero()
            .with_gamma1(Channel::new(|t: f64| if t > 2.0 { f64::NAN } else { 1.0 }));
        assert!(negative_intervals(&p, (0.0, 5.0), 0.1, TOL).is_err());
        assert!(negative_intervals(&p, (1.0, 0.5), 0.1, TOL).is_err());
        assert!(negative_intervals(&p, (0.0, 1.0), 0.0, TOL).is_err());
    }

    #[test]
    fn crossover_on_constant_family() {
        // γ3 = 1 - x is negative iff x > 1
        let family = |x: f64| Ok(RateProfile::constant(0.0, 0.0, 1.0 - x, 0.0));
        let grid: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
        let c = crossover_scan(family, &grid, &ScanSettings::new((0.0, 1.0), 1e-12, 1e-6))
            .unwrap()
            .unwrap();
        assert_eq!(c.grid_value, 1.25);
        assert!((c.estimate() - 1.0).abs() < 1e-6);
        assert!(crossover_scan(
            family,
            &[0.0, 0.5],
            &ScanSettings::new((0.0, 1.0), 1e-12, 1e-6)
        )
        .unwrap()
        .is_none());
    }
}
