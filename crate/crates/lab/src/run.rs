//! The `simulate`, `fluid`, `genfun` and `verify` run kinds.

use std::path::{Path, PathBuf};

use erlang_core::fluid::{fluid_moments_with, fluid_variance_with};
use erlang_core::genfun::{fluid_cgf, stationary_fluid_distribution, CgfMethod};
use erlang_core::ode::{uniform_grid, Rk4Settings};
use erlang_core::simulate::{ensemble_with, EnsembleConfig};
use erlang_core::verify::{
    check_fkg, check_mean_ordering, check_mgf_ordering, check_moment_ordering, check_nonstationary_sandwich,
    check_stationary_sandwich, OrderingReport,
};
use rayon::prelude::*;

use crate::config::{CheckKind, ExperimentConfig, RunKind};
use crate::error::{LabError, LabResult};
use crate::figures::run_figure;
use crate::output::{num, Table};
use crate::parallel::Rayon;

/// Files written by a run and the lines it wants printed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

pub fn run(kind: RunKind, cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    match kind {
        RunKind::Simulate => run_simulate(cfg, out),
        RunKind::Fluid => run_fluid(cfg, out),
        RunKind::Genfun => run_genfun(cfg, out),
        RunKind::Verify => run_verify(cfg, out),
        RunKind::Figure => {
            let id = cfg.figure.as_deref().ok_or_else(|| LabError::Config("`figure` is required for figure runs".into()))?;
            run_figure(id, cfg, out)
        }
    }
}

pub(crate) fn time_grid(cfg: &ExperimentConfig) -> LabResult<Vec<f64>> {
    Ok(uniform_grid(cfg.horizon, cfg.step)?)
}

pub(crate) fn rk4_settings(cfg: &ExperimentConfig) -> Rk4Settings {
    let mut settings = Rk4Settings::default();
    if let Some(h) = cfg.h_step {
        settings.step = h;
    }
    if let Some(tol) = cfg.tolerance {
        settings.tolerance = tol;
    }
    settings
}

pub(crate) fn ensemble_config(cfg: &ExperimentConfig) -> EnsembleConfig {
    EnsembleConfig::new(cfg.reps, cfg.seed)
}

fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let model = cfg.build_model()?;
    let grid = time_grid(cfg)?;
    let stats = ensemble_with(&model, cfg.q0, &grid, cfg.orders, &cfg.alphas, &ensemble_config(cfg), &Rayon)?;
    let mut table = Table::new(&["time", "order_or_alpha", "estimate", "halfwidth", "reps"]);
    for (i, &t) in grid.iter().enumerate() {
        for (j, order) in stats.orders.iter().enumerate() {
            let e = stats.moments[i][j];
            table.push(vec![num(t), format!("m={order}"), num(e.mean), num(e.halfwidth), stats.reps.to_string()]);
        }
        for (k, alpha) in stats.alphas.iter().enumerate() {
            let e = stats.mgf[i][k];
            table.push(vec![num(t), format!("alpha={}", num(*alpha)), num(e.mean), num(e.halfwidth), stats.reps.to_string()]);
        }
    }
    let mut lines = vec![format!(
        "{} replications, mean arrivals {} ± {}, max state {}",
        stats.reps,
        num(stats.arrivals.mean),
        num(stats.arrivals.halfwidth),
        stats.max_state
    )];
    if stats.mgf_variance_warning {
        lines.push("warning: alpha * max Q exceeds 30; MGF estimates are high-variance".into());
    }
    Ok(RunOutput { files: vec![table.write(out, "simulate.csv")?], lines })
}

fn run_fluid(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let model = cfg.build_model()?;
    let grid = time_grid(cfg)?;
    let settings = rk4_settings(cfg);
    let moments = fluid_moments_with(&model, cfg.q0 as f64, &grid, cfg.orders, &settings)?;
    let variance = fluid_variance_with(&model, cfg.q0 as f64, &grid, &settings)?;
    let mut header = vec!["time".to_string()];
    header.extend((1..=cfg.orders).map(|m| format!("m{m}")));
    header.push("var".into());
    let mut table = Table { header, rows: Vec::new() };
    for (i, &t) in grid.iter().enumerate() {
        let mut row = vec![num(t)];
        row.extend(moments.values[i].iter().map(|v| num(*v)));
        row.push(num(variance.values[i][1]));
        table.push(row);
    }
    let mut lines = vec![format!("rk4 step {} (last halving changed values by {:e})", num(moments.step), moments.error_estimate)];
    let violations = moments.variance_violations();
    if !violations.is_empty() {
        lines.push(format!("warning: M2 < M1^2 at {} grid points", violations.len()));
    }
    Ok(RunOutput { files: vec![table.write(out, "fluid.csv")?], lines })
}

fn run_genfun(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let model = cfg.build_model()?;
    if cfg.stationary {
        let d = stationary_fluid_distribution(&model)?;
        let mut table = Table::new(&["state", "mass", "cdf"]);
        let mut cdf = 0.0;
        for (k, mass) in d.masses.iter().enumerate() {
            cdf += mass;
            table.push(vec![num(d.support_point(k)), num(*mass), num(cdf)]);
        }
        let line = format!("shift {}, mean {}, truncated mass < {:e}", num(d.shift), num(d.mean()), d.trunc_mass_bound);
        return Ok(RunOutput { files: vec![table.write(out, "genfun_stationary.csv")?], lines: vec![line] });
    }
    let grid = time_grid(cfg)?;
    let table = cgf_surface(&model, cfg.q0 as f64, &grid, &cfg.alphas)?;
    Ok(RunOutput { files: vec![table.write(out, "genfun_surface.csv")?], lines: Vec::new() })
}

/// Fluid CGF and MGF over `times × alphas`, evaluated in parallel.
pub(crate) fn cgf_surface(model: &erlang_core::QueueModel, q0: f64, times: &[f64], alphas: &[f64]) -> LabResult<Table> {
    let points: Vec<(f64, f64)> = times.iter().flat_map(|&t| alphas.iter().map(move |&a| (t, a))).collect();
    let values = points.par_iter().map(|&(t, a)| fluid_cgf(model, q0, t, a)).collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["time", "alpha", "cgf", "mgf", "method"]);
    for (&(t, a), (g, method)) in points.iter().zip(values) {
        let method = match method {
            CgfMethod::ClosedForm => "closed-form",
            CgfMethod::Characteristics => "characteristics",
        };
        table.push(vec![num(t), num(a), num(g), num(g.exp()), method.into()]);
    }
    Ok(table)
}

/// `claim, series, regime, t, lhs, rhs, halfwidth, margin, pass` rows.
pub fn report_table(reports: &[OrderingReport]) -> Table {
    let mut table = Table::new(&["claim", "series", "regime", "t", "lhs", "rhs", "halfwidth", "margin", "pass"]);
    for r in reports {
        for p in &r.points {
            table.push(vec![
                r.claim.clone(),
                p.label.clone(),
                r.regime.clone(),
                num(p.t),
                num(p.lhs),
                num(p.rhs),
                num(p.halfwidth),
                num(p.margin),
                (!p.violated).to_string(),
            ]);
        }
    }
    table
}

fn run_verify(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let model = cfg.build_model()?;
    let grid = time_grid(cfg)?;
    let ens = ensemble_config(cfg);
    let mut reports = Vec::new();
    for check in &cfg.checks {
        match check {
            CheckKind::Mean => reports.push(check_mean_ordering(&model, cfg.q0, &grid, &ens, &Rayon)?),
            CheckKind::Moments => reports.extend(check_moment_ordering(&model, cfg.q0, &grid, cfg.orders, &ens, &Rayon)?),
            CheckKind::Mgf => reports.push(check_mgf_ordering(&model, cfg.q0, &grid, &cfg.alphas, &ens, &Rayon)?),
            CheckKind::StationarySandwich => reports.push(check_stationary_sandwich(&model, cfg.orders)?),
            CheckKind::NonstationarySandwich => {
                reports.push(check_nonstationary_sandwich(&model, cfg.q0, &grid, cfg.orders, &ens, &Rayon)?)
            }
            CheckKind::Fkg => {
                let alphas: Vec<f64> = cfg.alphas.iter().copied().filter(|a| *a >= 0.0).collect();
                reports.push(check_fkg(&model, cfg.q0, &grid, &alphas, &ens, &Rayon)?)
            }
        }
    }
    let lines = reports.iter().map(ToString::to_string).collect();
    Ok(RunOutput { files: vec![report_table(&reports).write(out, "verify.csv")?], lines })
}
