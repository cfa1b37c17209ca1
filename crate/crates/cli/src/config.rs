//! Run configuration: command-line flags layered over an optional TOML file
//! layered over defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, ValueEnum};
use phasecov::{Complex64, Kernel, OhmicParams, QuadratureConfig, QubitState, ThermalParams};
use serde::Deserialize;

use crate::Failure;

/// Environment variable overriding the default CP tolerance.
pub const TOL_ENV: &str = "PHASECOV_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Heuristic thermal dissipator (closed form).
    Thermal,
    /// Ohmic pure dephasing.
    Ohmic,
    /// Thermal dissipator and Ohmic dephasing together.
    Both,
    /// Constant rates.
    Constant,
    /// Rates interpolated from a CSV table.
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Paper,
    Literature,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Paper => Kernel::Paper,
            KernelArg::Literature => Kernel::Literature,
        }
    }
}

/// Flags shared by every subcommand. Every value is optional so that the
/// config file and the defaults can fill the gaps.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelArgs {
    /// Rate model.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Thermal model: reservoir coupling ratio R.
    #[arg(long = "R", allow_negative_numbers = true)]
    #[serde(rename = "R")]
    pub r: Option<f64>,
    /// Thermal model: mean occupation number N.
    #[arg(long = "N", allow_negative_numbers = true)]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    /// Ohmic model: coupling strength.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Ohmic model: Ohmicity exponent.
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    /// Ohmic model: cutoff frequency.
    #[arg(long, allow_negative_numbers = true)]
    pub omega_c: Option<f64>,
    /// Ohmic model: temperature (k_B = ħ = 1).
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Ohmic model: spectral kernel.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Constant model: heating rate.
    #[arg(long, allow_negative_numbers = true)]
    pub g1: Option<f64>,
    /// Constant model: dissipation rate.
    #[arg(long, allow_negative_numbers = true)]
    pub g2: Option<f64>,
    /// Constant model: dephasing rate.
    #[arg(long, allow_negative_numbers = true)]
    pub g3: Option<f64>,
    /// Constant model: frequency shift.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Tabulated model: CSV with header t,gamma1,gamma2,gamma3,omega.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// End of the time grid.
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    /// Number of grid intervals (the grid has steps + 1 points).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial ground-state population.
    #[arg(long = "p1-0", allow_negative_numbers = true)]
    #[serde(rename = "p1-0")]
    pub p1_0: Option<f64>,
    /// Initial coherence, real part.
    #[arg(long = "re-alpha-0", allow_negative_numbers = true)]
    #[serde(rename = "re-alpha-0")]
    pub re_alpha_0: Option<f64>,
    /// Initial coherence, imaginary part.
    #[arg(long = "im-alpha-0", allow_negative_numbers = true)]
    #[serde(rename = "im-alpha-0")]
    pub im_alpha_0: Option<f64>,
    /// Quadrature relative tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    /// Quadrature absolute tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub abs_tol: Option<f64>,
    /// Tolerance for CP margins and rate negativity (default: $PHASECOV_TOL or 1e-9).
    #[arg(long, allow_negative_numbers = true)]
    pub cp_tol: Option<f64>,
}

impl ModelArgs {
    /// Fill every unset field from `lower`.
    fn or(self, lower: ModelArgs) -> ModelArgs {
        ModelArgs {
            model: self.model.or(lower.model),
            r: self.r.or(lower.r),
            n: self.n.or(lower.n),
            alpha: self.alpha.or(lower.alpha),
            s: self.s.or(lower.s),
            omega_c: self.omega_c.or(lower.omega_c),
            t: self.t.or(lower.t),
            kernel: self.kernel.or(lower.kernel),
            g1: self.g1.or(lower.g1),
            g2: self.g2.or(lower.g2),
            g3: self.g3.or(lower.g3),
            omega: self.omega.or(lower.omega),
            table: self.table.or(lower.table),
            t_max: self.t_max.or(lower.t_max),
            steps: self.steps.or(lower.steps),
            p1_0: self.p1_0.or(lower.p1_0),
            re_alpha_0: self.re_alpha_0.or(lower.re_alpha_0),
            im_alpha_0: self.im_alpha_0.or(lower.im_alpha_0),
            rel_tol: self.rel_tol.or(lower.rel_tol),
            abs_tol: self.abs_tol.or(lower.abs_tol),
            cp_tol: self.cp_tol.or(lower.cp_tol),
        }
    }

    /// Names of the model-specific flags that were given.
    fn given(&self) -> Vec<(&'static str, ModelGroup)> {
        let mut out = Vec::new();
        let mut push = |set: bool, name, group| {
            if set {
                out.push((name, group));
            }
        };
        push(self.r.is_some(), "R", ModelGroup::Thermal);
        push(self.n.is_some(), "N", ModelGroup::Thermal);
        push(self.alpha.is_some(), "alpha", ModelGroup::Ohmic);
        push(self.s.is_some(), "s", ModelGroup::Ohmic);
        push(self.omega_c.is_some(), "omega-c", ModelGroup::Ohmic);
        push(self.t.is_some(), "T", ModelGroup::Ohmic);
        push(self.kernel.is_some(), "kernel", ModelGroup::Ohmic);
        push(self.g1.is_some(), "g1", ModelGroup::Constant);
        push(self.g2.is_some(), "g2", ModelGroup::Constant);
        push(self.g3.is_some(), "g3", ModelGroup::Constant);
        push(self.omega.is_some(), "omega", ModelGroup::Constant);
        push(self.table.is_some(), "table", ModelGroup::Tabulated);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelGroup {
    Thermal,
    Ohmic,
    Constant,
    Tabulated,
}

impl ModelKind {
    fn accepts(self, group: ModelGroup) -> bool {
        match self {
            ModelKind::Thermal => group == ModelGroup::Thermal,
            ModelKind::Ohmic => group == ModelGroup::Ohmic,
            ModelKind::Both => matches!(group, ModelGroup::Thermal | ModelGroup::Ohmic),
            ModelKind::Constant => group == ModelGroup::Constant,
            ModelKind::Tabulated => group == ModelGroup::Tabulated,
        }
    }
}

/// A fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub thermal: ThermalParams,
    pub ohmic: OhmicParams,
    /// `[γ1, γ2, γ3, ω]` of the constant model.
    pub constant: [f64; 4],
    pub table: Option<PathBuf>,
    pub t_max: f64,
    pub steps: usize,
    pub initial: QubitState,
    pub quadrature: QuadratureConfig,
    pub cp_tol: f64,
}

fn defaults() -> ModelArgs {
    ModelArgs {
        model: Some(ModelKind::Thermal),
        r: Some(0.25),
        n: Some(0.0),
        alpha: Some(0.1),
        s: Some(1.0),
        omega_c: Some(1.0),
        t: Some(0.0),
        kernel: Some(KernelArg::Literature),
        g1: Some(0.0),
        g2: Some(0.0),
        g3: Some(0.0),
        omega: Some(0.0),
        table: None,
        t_max: Some(10.0),
        steps: Some(1000),
        p1_0: Some(0.0),
        re_alpha_0: Some(0.0),
        im_alpha_0: Some(0.0),
        rel_tol: Some(QuadratureConfig::default().rel_tol),
        abs_tol: Some(QuadratureConfig::default().abs_tol),
        cp_tol: None,
    }
}

pub fn read_config_file(path: &Path) -> Result<ModelArgs, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))
        .map_err(Failure::Io)?;
    toml::from_str(&text)
        .with_context(|| format!("invalid config file {}", path.display()))
        .map_err(Failure::Usage)
}

fn env_tolerance() -> anyhow::Result<Option<f64>> {
    match std::env::var(TOL_ENV) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .map(Some)
            .with_context(|| format!("{TOL_ENV}={v:?} is not a number")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow!("{TOL_ENV}: {e}")),
    }
}

impl RunConfig {
    /// Resolve flags over the config file over defaults, then validate.
    pub fn resolve(flags: ModelArgs, file: Option<ModelArgs>) -> anyhow::Result<Self> {
        let explicit = match file {
            Some(file) => flags.or(file),
            None => flags,
        };
        let model = explicit.model.unwrap_or(ModelKind::Thermal);
        for (name, group) in explicit.given() {
            if !model.accepts(group) {
                bail!("--{name} does not apply to --model {}", model_name(model));
            }
        }
        let a = explicit.or(defaults());
        let cp_tol = match a.cp_tol {
            Some(tol) => tol,
            None => env_tolerance()?.unwrap_or(phasecov::cptp::DEFAULT_TOL),
        };
        if !(cp_tol > 0.0 && cp_tol.is_finite()) {
            bail!("CP tolerance must be positive, got {cp_tol}");
        }
        let steps = a.steps.expect("defaulted");
        if steps < 2 {
            bail!("--steps must be at least 2, got {steps}");
        }
        let t_max = a.t_max.expect("defaulted");
        if !(t_max > 0.0 && t_max.is_finite()) {
            bail!("--t-max must be positive, got {t_max}");
        }
        let alpha0 = Complex64::new(
            a.re_alpha_0.expect("defaulted"),
            a.im_alpha_0.expect("defaulted"),
        );
        let initial =
            QubitState::new(a.p1_0.expect("defaulted"), alpha0).context("invalid initial state")?;
        if model == ModelKind::Tabulated && a.table.is_none() {
            bail!("--model tabulated needs --table");
        }
        Ok(RunConfig {
            model,
            thermal: ThermalParams::new(a.r.expect("defaulted"), a.n.expect("defaulted"))?,
            ohmic: OhmicParams::new(
                a.alpha.expect("defaulted"),
                a.s.expect("defaulted"),
                a.omega_c.expect("defaulted"),
                a.t.expect("defaulted"),
                a.kernel.expect("defaulted").into(),
            )?,
            constant: [a.g1, a.g2, a.g3, a.omega].map(|v| v.expect("defaulted")),
            table: a.table,
            t_max,
            steps,
            initial,
            quadrature: QuadratureConfig::new(
                a.rel_tol.expect("defaulted"),
                a.abs_tol.expect("defaulted"),
                QuadratureConfig::default().max_subdivisions,
            )?,
            cp_tol,
        })
    }

    /// `steps + 1` equally spaced times from 0 to `t_max`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|i| self.t_max * i as f64 / self.steps as f64)
            .collect()
    }
}

pub fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Thermal => "thermal",
        ModelKind::Ohmic => "ohmic",
        ModelKind::Both => "both",
        ModelKind::Constant => "constant",
        ModelKind::Tabulated => "tabulated",
    }
}
