//! The rate model selected by a run configuration.

use std::path::Path;

use anyhow::Context;
use phasecov::models::{ohmic_profile, thermal_coefficients, thermal_profile};
use phasecov::{
    integrate_profile, markovian_coefficients, tabulated_profile, CoefficientSet, OhmicParams,
    RateProfile, ThermalParams,
};
use serde::Deserialize;

use crate::config::{ModelKind, RunConfig};
use crate::Failure;

pub enum Model {
    Thermal(ThermalParams),
    Ohmic(OhmicParams),
    Both(ThermalParams, OhmicParams),
    Constant([f64; 4]),
    Tabulated(RateProfile),
}

#[derive(Deserialize)]
struct TableRow {
    t: f64,
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    omega: f64,
}

fn read_table(path: &Path) -> Result<RateProfile, Failure> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open rate table {}", path.display()))
        .map_err(Failure::Io)?;
    let mut times = Vec::new();
    let mut rates = Vec::new();
    for row in reader.deserialize::<TableRow>() {
        let row = row
            .with_context(|| format!("malformed rate table {}", path.display()))
            .map_err(Failure::Usage)?;
        times.push(row.t);
        rates.push([row.gamma1, row.gamma2, row.gamma3, row.omega]);
    }
    Ok(tabulated_profile(&times, &rates)?)
}

impl Model {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, Failure> {
        Ok(match cfg.model {
            ModelKind::Thermal => Model::Thermal(cfg.thermal),
            ModelKind::Ohmic => Model::Ohmic(cfg.ohmic),
            ModelKind::Both => Model::Both(cfg.thermal, cfg.ohmic),
            ModelKind::Constant => Model::Constant(cfg.constant),
            ModelKind::Tabulated => {
                let path = cfg.table.as_deref().expect("validated by RunConfig");
                Model::Tabulated(read_table(path)?)
            }
        })
    }

    /// The rate functions, with singular points declared up to `t_max`.
    pub fn profile(&self, cfg: &RunConfig) -> phasecov::Result<RateProfile> {
        Ok(match self {
            Model::Thermal(p) => thermal_profile(*p, cfg.t_max)?,
            Model::Ohmic(p) => ohmic_profile(*p, cfg.quadrature)?,
            Model::Both(t, o) => {
                thermal_profile(*t, cfg.t_max)?.superpose(&ohmic_profile(*o, cfg.quadrature)?)
            }
            Model::Constant([g1, g2, g3, w]) => RateProfile::constant(*g1, *g2, *g3, *w),
            Model::Tabulated(p) => p.clone(),
        })
    }

    /// Integrated coefficients on `times`, in closed form where available.
    pub fn coefficients(
        &self,
        cfg: &RunConfig,
        times: &[f64],
    ) -> phasecov::Result<Vec<CoefficientSet>> {
        match self {
            Model::Thermal(p) => thermal_coefficients(*p, times),
            Model::Ohmic(_) | Model::Tabulated(_) => {
                integrate_profile(&self.profile(cfg)?, times, &cfg.quadrature)
            }
            Model::Both(t, o) => {
                let dephasing =
                    integrate_profile(&ohmic_profile(*o, cfg.quadrature)?, times, &cfg.quadrature)?;
                thermal_coefficients(*t, times)?
                    .iter()
                    .zip(&dephasing)
                    .map(|(d, c)| d.with_dephasing(c))
                    .collect()
            }
            Model::Constant([g1, g2, g3, w]) => times
                .iter()
                .map(|&t| markovian_coefficients(*g1, *g2, *g3, *w, t))
                .collect(),
        }
    }

    /// Long-time ground-state population, where the model determines it.
    pub fn stationary_p1(&self, p1_0: f64) -> Option<f64> {
        match self {
            Model::Thermal(p) | Model::Both(p, _) => Some(p.stationary_population()),
            Model::Ohmic(_) => Some(p1_0),
            Model::Constant([g1, g2, _, _]) => {
                let total = g1 + g2;
                if total > 0.0 {
                    Some(g2 / total)
                } else if total == 0.0 {
                    Some(p1_0)
                } else {
                    None
                }
            }
            Model::Tabulated(_) => None,
        }
    }
}
