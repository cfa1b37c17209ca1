//! The four subcommands. Each returns whether the run found a CP violation.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::ValueEnum;
use phasecov::cptp::cp_report;
use phasecov::{evolve_state, negative_intervals, OhmicParams, RateKind, ThermalParams, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::model::Model;
use crate::Failure;

/// Destination `None` or `-` means standard output.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let file = File::create(p)
                .with_context(|| format!("cannot write {}", p.display()))
                .map_err(Failure::Io)?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

fn io_failure(what: &str) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(anyhow!(e).context(format!("failed writing {what}")))
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Io(anyhow!(e).context("failed writing CSV"))
}

#[derive(Serialize)]
struct EvolveRow {
    t: f64,
    #[serde(rename = "P1")]
    p1: f64,
    #[serde(rename = "Re_alpha")]
    re_alpha: f64,
    #[serde(rename = "Im_alpha")]
    im_alpha: f64,
    #[serde(rename = "Gamma")]
    gamma: f64,
    #[serde(rename = "GammaTilde")]
    gamma_tilde: f64,
    #[serde(rename = "Omega")]
    omega: f64,
    g: f64,
}

pub fn evolve(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let model = Model::from_config(cfg)?;
    let coeffs = model.coefficients(cfg, &cfg.grid())?;
    let mut writer = csv::Writer::from_writer(open_output(out)?);
    for c in &coeffs {
        let s = evolve_state(&cfg.initial, c)?;
        // `+ 0.0` turns -0.0 into 0.0 so the CSV never shows a signed zero.
        writer
            .serialize(EvolveRow {
                t: c.t,
                p1: s.p1 + 0.0,
                re_alpha: s.alpha.re + 0.0,
                im_alpha: s.alpha.im + 0.0,
                gamma: c.gamma + 0.0,
                gamma_tilde: c.gamma_tilde + 0.0,
                omega: c.omega + 0.0,
                g: c.g + 0.0,
            })
            .map_err(csv_failure)?;
    }
    writer.flush().map_err(io_failure("CSV"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CpMethod {
    Paper,
    Choi,
    Both,
}

#[derive(Serialize)]
struct CpEntry {
    t: f64,
    cond_i: f64,
    cond_ii: f64,
    cond_iii: f64,
    cond_iv: f64,
    paper_verdict: bool,
    choi_min_eig: f64,
    choi_verdict: bool,
    agreement: bool,
}

#[derive(Serialize)]
struct CpCheckReport {
    model: &'static str,
    method: CpMethod,
    tolerance: f64,
    all_cp: bool,
    first_violation: Option<f64>,
    disagreements: usize,
    entries: Vec<CpEntry>,
}

/// Returns `true` when the map is CP (by `method`) at every grid time.
pub fn cp_check(cfg: &RunConfig, method: CpMethod, out: Option<&Path>) -> Result<bool, Failure> {
    let model = Model::from_config(cfg)?;
    let coeffs = model.coefficients(cfg, &cfg.grid())?;
    let mut entries = Vec::with_capacity(coeffs.len());
    let mut first_violation = None;
    for c in &coeffs {
        let r = cp_report(c, cfg.cp_tol)?;
        let cp = match method {
            CpMethod::Paper => r.paper_verdict,
            CpMethod::Choi => r.choi_verdict,
            CpMethod::Both => r.paper_verdict && r.choi_verdict,
        };
        if !cp && first_violation.is_none() {
            first_violation = Some(c.t);
        }
        entries.push(CpEntry {
            t: r.t,
            cond_i: r.conditions.cond_i.margin,
            cond_ii: r.conditions.cond_ii.margin,
            cond_iii: r.conditions.cond_iii.margin,
            cond_iv: r.conditions.cond_iv.margin,
            paper_verdict: r.paper_verdict,
            choi_min_eig: r.choi_min_eig,
            choi_verdict: r.choi_verdict,
            agreement: r.agreement,
        });
    }
    let report = CpCheckReport {
        model: crate::config::model_name(cfg.model),
        method,
        tolerance: cfg.cp_tol,
        all_cp: first_violation.is_none(),
        first_violation,
        disagreements: entries.iter().filter(|e| !e.agreement).count(),
        entries,
    };
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(|e| Failure::Io(anyhow!(e).context("failed writing JSON")))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(io_failure("JSON"))?;
    Ok(report.all_cp)
}

#[derive(Serialize)]
struct EmptyField {
    t: f64,
    columns: Vec<&'static str>,
}

#[derive(Serialize)]
struct RatesSidecar {
    /// Declared singularities of the rates in `[0, t_max]`.
    singular_points: Vec<f64>,
    /// Grid rows where a rate could not be evaluated.
    empty_fields: Vec<EmptyField>,
}

fn default_sidecar(out: Option<&Path>) -> Option<PathBuf> {
    let out = out.filter(|p| p.as_os_str() != "-")?;
    let mut name = out.as_os_str().to_owned();
    name.push(".singular.json");
    Some(PathBuf::from(name))
}

pub fn rates(cfg: &RunConfig, out: Option<&Path>, sidecar: Option<&Path>) -> Result<(), Failure> {
    let model = Model::from_config(cfg)?;
    let profile = model.profile(cfg)?;
    let singular = profile.singular_points().to_vec();
    let kinds = [
        RateKind::Gamma1,
        RateKind::Gamma2,
        RateKind::Gamma3,
        RateKind::Omega,
    ];
    let mut writer = csv::Writer::from_writer(open_output(out)?);
    writer
        .write_record(["t", "gamma1", "gamma2", "gamma3", "omega"])
        .map_err(csv_failure)?;
    let mut empty_fields = Vec::new();
    for t in cfg.grid() {
        let on_pole = singular.contains(&t);
        let values = profile.rates(t);
        let mut record = vec![t.to_string()];
        let mut columns = Vec::new();
        for (kind, v) in kinds.into_iter().zip(values) {
            if on_pole || !v.is_finite() {
                record.push(String::new());
                columns.push(kind.name());
            } else {
                record.push(v.to_string());
            }
        }
        if !columns.is_empty() {
            empty_fields.push(EmptyField { t, columns });
        }
        writer.write_record(&record).map_err(csv_failure)?;
    }
    writer.flush().map_err(io_failure("CSV"))?;
    let sidecar = sidecar
        .map(Path::to_path_buf)
        .or_else(|| default_sidecar(out));
    if let Some(path) = sidecar {
        let report = RatesSidecar {
            singular_points: singular,
            empty_fields,
        };
        let mut w = open_output(Some(&path))?;
        serde_json::to_writer_pretty(&mut w, &report)
            .map_err(|e| Failure::Io(anyhow!(e).context("failed writing sidecar JSON")))?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(io_failure("sidecar JSON"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanParam {
    #[value(name = "R")]
    R,
    #[value(name = "N")]
    N,
    #[value(name = "s")]
    S,
    #[value(name = "alpha")]
    Alpha,
    #[value(name = "omega_c", alias = "omega-c")]
    OmegaC,
    #[value(name = "T")]
    T,
}

impl ScanParam {
    fn name(self) -> &'static str {
        match self {
            ScanParam::R => "R",
            ScanParam::N => "N",
            ScanParam::S => "s",
            ScanParam::Alpha => "alpha",
            ScanParam::OmegaC => "omega_c",
            ScanParam::T => "T",
        }
    }

    fn is_thermal(self) -> bool {
        matches!(self, ScanParam::R | ScanParam::N)
    }

    /// Copy of `cfg` with this parameter set to `value`.
    fn apply(self, cfg: &RunConfig, value: f64) -> phasecov::Result<RunConfig> {
        let mut next = cfg.clone();
        let (t, o) = (cfg.thermal, cfg.ohmic);
        match self {
            ScanParam::R => next.thermal = ThermalParams::new(value, t.n)?,
            ScanParam::N => next.thermal = ThermalParams::new(t.r, value)?,
            ScanParam::S => {
                next.ohmic = OhmicParams::new(o.alpha, value, o.omega_c, o.temperature, o.kernel)?
            }
            ScanParam::Alpha => {
                next.ohmic = OhmicParams::new(value, o.s, o.omega_c, o.temperature, o.kernel)?
            }
            ScanParam::OmegaC => {
                next.ohmic = OhmicParams::new(o.alpha, o.s, value, o.temperature, o.kernel)?
            }
            ScanParam::T => {
                next.ohmic = OhmicParams::new(o.alpha, o.s, o.omega_c, value, o.kernel)?
            }
        }
        Ok(next)
    }
}

/// Largest fall of `p` from any time to a later one (zero if `p` never decreases).
pub fn oscillation_amplitude(p: &[f64]) -> f64 {
    let mut running_max = f64::NEG_INFINITY;
    let mut amplitude: f64 = 0.0;
    for &v in p {
        running_max = running_max.max(v);
        amplitude = amplitude.max(running_max - v);
    }
    amplitude
}

struct ScanRow {
    value: f64,
    stationary_p1: Option<f64>,
    final_p1: f64,
    amplitude: f64,
    verdict: Verdict,
    first_negative_start: Option<f64>,
    triggering_rates: Vec<RateKind>,
}

fn scan_one(cfg: &RunConfig, param: ScanParam, value: f64) -> Result<ScanRow, Failure> {
    let cfg = param.apply(cfg, value)?;
    let model = Model::from_config(&cfg)?;
    let p1: Vec<f64> = model
        .coefficients(&cfg, &cfg.grid())?
        .iter()
        .map(|c| evolve_state(&cfg.initial, c).map(|s| s.p1))
        .collect::<phasecov::Result<_>>()?;
    let resolution = cfg.t_max / (cfg.steps.max(2048) as f64);
    let nm = negative_intervals(
        &model.profile(&cfg)?,
        (0.0, cfg.t_max),
        resolution,
        cfg.cp_tol,
    )?;
    Ok(ScanRow {
        value,
        stationary_p1: model.stationary_p1(cfg.initial.p1),
        final_p1: *p1.last().expect("grid has at least three points"),
        amplitude: oscillation_amplitude(&p1),
        verdict: nm.verdict,
        first_negative_start: nm.first_negative_start(),
        triggering_rates: nm.triggering_rates,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn scan(
    cfg: &RunConfig,
    param: ScanParam,
    values: &[f64],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let applies = match cfg.model {
        ModelKind::Thermal => param.is_thermal(),
        ModelKind::Ohmic => !param.is_thermal(),
        ModelKind::Both => true,
        ModelKind::Constant | ModelKind::Tabulated => false,
    };
    if !applies {
        return Err(Failure::Usage(anyhow!(
            "parameter {} does not apply to --model {}",
            param.name(),
            crate::config::model_name(cfg.model)
        )));
    }
    if values.is_empty() {
        return Err(Failure::Usage(anyhow!("--values needs at least one value")));
    }
    // Independent tasks; collect keeps the input order.
    let rows: Vec<ScanRow> = values
        .par_iter()
        .map(|&v| scan_one(cfg, param, v))
        .collect::<Result<_, _>>()?;
    let mut writer = csv::Writer::from_writer(open_output(out)?);
    writer
        .write_record([
            "param",
            "value",
            "stationary_P1",
            "final_P1",
            "amplitude",
            "verdict",
            "first_negative_start",
            "triggering_rates",
        ])
        .map_err(csv_failure)?;
    for r in rows {
        let verdict = match r.verdict {
            Verdict::Markovian => "Markovian",
            Verdict::NonMarkovian => "NonMarkovian",
        };
        let triggers: Vec<&str> = r.triggering_rates.iter().map(|k| k.name()).collect();
        writer
            .write_record([
                param.name().to_string(),
                r.value.to_string(),
                opt(r.stationary_p1),
                r.final_p1.to_string(),
                r.amplitude.to_string(),
                verdict.to_string(),
                opt(r.first_negative_start),
                triggers.join(";"),
            ])
            .map_err(csv_failure)?;
    }
    writer.flush().map_err(io_failure("CSV"))
}
