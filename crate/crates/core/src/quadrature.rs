//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate falls below `max(abs_tol, rel_tol * |result|)` or the subdivision
//! budget is exhausted.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return invalid(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return invalid(format!("abs_tol must be positive, got {}", self.abs_tol));
        }
        if self.max_subdivisions == 0 {
            return invalid("max_subdivisions must be at least 1");
        }
        Ok(())
    }
}

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_411_625_210,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single 21-point Kronrod rule on `[lo, hi]` with the embedded Gauss estimate.
fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut values = [(0.0, 0.0); 10];
    for (j, value) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        *value = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let abs_value = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrate `f` over `[lo, hi]` (with `lo <= hi` or `lo > hi`).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    if lo == hi {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    if lo > hi {
        let r = integrate(f, hi, lo, cfg)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return invalid(format!("integration bounds must be finite: [{lo}, {hi}]"));
    }

    let first = gauss_kronrod(&f, lo, hi);
    let mut evaluations = 21;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    let target = |v: f64| cfg.abs_tol.max(cfg.rel_tol * v.abs());
    let mut subdivisions = 1;
    while !(error <= target(value)) {
        if subdivisions >= cfg.max_subdivisions {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            break;
        }
        let left = gauss_kronrod(&f, worst.lo, mid);
        let right = gauss_kronrod(&f, mid, worst.hi);
        evaluations += 42;
        subdivisions += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !error.is_finite()
            || !value.is_finite()
            || subdivisions % 64 == 0
            || error <= target(value)
        {
            // Re-sum periodically so incremental rounding does not drift.
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }

    if !(error <= target(value)) || !value.is_finite() {
        let worst = heap.iter().max().copied().expect("heap is never empty");
        return Err(Error::Tolerance {
            lo: worst.lo,
            hi: worst.hi,
            error,
            requested: target(value),
        });
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}
