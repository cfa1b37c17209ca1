//! Fixed workloads shared by the criterion benchmarks.

use phasecov::models::{OhmicParams, ThermalParams};
use phasecov::Kernel;

/// Uniform grid of `steps + 1` points on `[0, t_max]`.
pub fn grid(t_max: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| t_max * i as f64 / steps as f64)
        .collect()
}

pub fn weak_thermal() -> ThermalParams {
    ThermalParams::new(0.25, 1.0).expect("valid parameters")
}

pub fn strong_thermal() -> ThermalParams {
    ThermalParams::new(10.0, 1.0).expect("valid parameters")
}

pub fn ohmic(s: f64, temperature: f64) -> OhmicParams {
    OhmicParams::new(0.1, s, 1.0, temperature, Kernel::Literature).expect("valid parameters")
}
