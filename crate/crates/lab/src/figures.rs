//! Figure reproductions. Each id carries its own parameter set; only the
//! seed, replication count and RK4 settings come from the config.

use std::path::Path;

use erlang_core::exact::stationary_distribution;
use erlang_core::fluid::{fluid_mean_with, fluid_moments_with};
use erlang_core::genfun::{
    at_regime_boundary, fluid_cgf, load_regime, shifted_mminf_representation, stationary_fluid_distribution, CgfMethod,
};
use erlang_core::ode::uniform_grid;
use erlang_core::simulate::ensemble_with;
use erlang_core::{DistributionVector, FourierRate, QueueModel};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{num, prepare_dir, tag, Table};
use crate::parallel::Rayon;
use crate::run::{ensemble_config, rk4_settings, RunOutput};

pub const FIGURE_IDS: [&str; 7] =
    ["fig1", "moments-small", "moments-large", "mgf-surfaces", "limdists", "single-server-limdists", "ns-sandwich"];

/// Abandonment rates on either side of `μ = 1`.
const THETAS: [f64; 2] = [0.5, 2.0];

/// Rejects unknown ids before anything touches the file system.
pub fn check_figure_id(id: &str) -> LabResult<()> {
    if FIGURE_IDS.contains(&id) {
        Ok(())
    } else {
        Err(LabError::UnknownFigure(id.to_string()))
    }
}

pub fn run_figure(id: &str, cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    check_figure_id(id)?;
    prepare_dir(out)?;
    match id {
        "fig1" => fig1(cfg, out),
        "moments-small" => moments(cfg, out, id, 1.0),
        "moments-large" => moments(cfg, out, id, 10.0),
        "mgf-surfaces" => mgf_surfaces(cfg, out),
        "limdists" => limdists(out),
        "single-server-limdists" => single_server_limdists(out),
        "ns-sandwich" => ns_sandwich(cfg, out),
        _ => unreachable!("checked above"),
    }
}

fn sinusoid_model(base: f64, amplitude: f64, c: u32, theta: f64) -> LabResult<QueueModel> {
    Ok(QueueModel::erlang_a(FourierRate::sinusoid(base, amplitude)?, c, 1.0, theta)?)
}

fn constant_model(lambda: f64, c: u32, theta: f64) -> LabResult<QueueModel> {
    Ok(QueueModel::erlang_a(FourierRate::constant(lambda)?, c, 1.0, theta)?)
}

fn alpha_grid() -> LabResult<Vec<f64>> {
    Ok(uniform_grid(0.5, 0.05)?)
}

fn fig1(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let grid = uniform_grid(20.0, 0.1)?;
    let mut result = RunOutput::default();
    for theta in THETAS {
        let model = sinusoid_model(10.0, 2.0, 10, theta)?;
        let sim = ensemble_with(&model, 0, &grid, 1, &[], &ensemble_config(cfg), &Rayon)?;
        let fluid = fluid_mean_with(&model, 0.0, &grid, &rk4_settings(cfg))?;
        let mut table = Table::new(&["time", "sim_mean", "sim_halfwidth", "fluid_mean"]);
        let mut above = 0;
        for (i, &t) in grid.iter().enumerate() {
            let e = sim.moments[i][0];
            above += usize::from(e.mean > fluid.values[i][0]);
            table.push(vec![num(t), num(e.mean), num(e.halfwidth), num(fluid.values[i][0])]);
        }
        result.files.push(table.write(out, &format!("fig1_{}.csv", tag("theta", theta)))?);
        result.lines.push(format!("theta = {theta}: simulated mean above fluid at {above} of {} times", grid.len()));
    }
    Ok(result)
}

fn moments(cfg: &ExperimentConfig, out: &Path, id: &str, eta: f64) -> LabResult<RunOutput> {
    let grid = uniform_grid(20.0, 0.25)?;
    let orders = 4;
    let mut result = RunOutput::default();
    for theta in THETAS {
        let model = sinusoid_model(10.0, 2.0, 10, theta)?.scale(eta)?;
        let sim = ensemble_with(&model, 0, &grid, orders, &[], &ensemble_config(cfg), &Rayon)?;
        let fluid = fluid_moments_with(&model, 0.0, &grid, orders, &rk4_settings(cfg))?;
        let mut table = Table::new(&["time", "order", "sim", "sim_halfwidth", "fluid"]);
        for (i, &t) in grid.iter().enumerate() {
            for j in 0..orders as usize {
                let e = sim.moments[i][j];
                table.push(vec![num(t), (j + 1).to_string(), num(e.mean), num(e.halfwidth), num(fluid.values[i][j])]);
            }
        }
        result.files.push(table.write(out, &format!("{id}_{}.csv", tag("theta", theta)))?);
    }
    Ok(result)
}

fn mgf_surfaces(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let times = uniform_grid(10.0, 0.5)?;
    let alphas = alpha_grid()?;
    let mut result = RunOutput::default();
    for (base, amplitude, c) in [(5.0, 1.0, 5), (10.0, 2.0, 10)] {
        for theta in THETAS {
            let model = sinusoid_model(base, amplitude, c, theta)?;
            let sim = ensemble_with(&model, 0, &times, 0, &alphas, &ensemble_config(cfg), &Rayon)?;
            let points: Vec<(usize, usize)> = (0..times.len()).flat_map(|i| (0..alphas.len()).map(move |k| (i, k))).collect();
            let fluid = points
                .par_iter()
                .map(|&(i, k)| fluid_cgf(&model, 0.0, times[i], alphas[k]))
                .collect::<Result<Vec<_>, _>>()?;
            let mut table =
                Table::new(&["time", "alpha", "sim_mgf", "sim_halfwidth", "fluid_mgf", "fluid_cgf", "method"]);
            for (&(i, k), (g, method)) in points.iter().zip(fluid) {
                let e = sim.mgf[i][k];
                let method = if method == CgfMethod::ClosedForm { "closed-form" } else { "characteristics" };
                table.push(vec![
                    num(times[i]),
                    num(alphas[k]),
                    num(e.mean),
                    num(e.halfwidth),
                    num(g.exp()),
                    num(g),
                    method.into(),
                ]);
            }
            let name = format!("mgf-surfaces_{}_{}.csv", tag("lambda", base), tag("theta", theta));
            result.files.push(table.write(out, &name)?);
        }
    }
    Ok(result)
}

fn distribution_rows(table: &mut Table, source: &str, d: &DistributionVector) {
    let mut cdf = 0.0;
    for (k, mass) in d.masses.iter().enumerate() {
        cdf += mass;
        table.push(vec![source.into(), num(d.support_point(k)), num(*mass), num(cdf)]);
    }
}

/// Exact stationary law against the fluid law, one file per model plus a
/// summary with total-variation distances.
fn limiting_distributions(out: &Path, prefix: &str, cases: &[(String, QueueModel)]) -> LabResult<RunOutput> {
    let mut result = RunOutput::default();
    let mut summary =
        Table::new(&["case", "lambda", "c", "theta", "regime", "boundary", "tv", "exact_mean", "fluid_mean"]);
    for (name, model) in cases {
        let exact = stationary_distribution(model, 1e-15)?;
        let fluid = stationary_fluid_distribution(model)?;
        let mut table = Table::new(&["source", "state", "mass", "cdf"]);
        distribution_rows(&mut table, "exact", &exact);
        distribution_rows(&mut table, "fluid", &fluid);
        result.files.push(table.write(out, &format!("{prefix}_{name}.csv"))?);
        let tv = exact.total_variation(&fluid);
        summary.push(vec![
            name.clone(),
            num(model.arrival().base()),
            model.servers().to_string(),
            num(model.abandon_rate()),
            load_regime(model)?.label().into(),
            at_regime_boundary(model)?.to_string(),
            num(tv),
            num(exact.mean()),
            num(fluid.mean()),
        ]);
        result.lines.push(format!("{prefix} {name}: total variation {tv:.4}"));
    }
    result.files.push(summary.write(out, &format!("{prefix}_summary.csv"))?);
    Ok(result)
}

fn limdists(out: &Path) -> LabResult<RunOutput> {
    let mut cases = Vec::new();
    for c in [15, 20, 25] {
        for theta in THETAS {
            cases.push((format!("{}_c{c}", tag("theta", theta)), constant_model(20.0, c, theta)?));
        }
    }
    limiting_distributions(out, "limdists", &cases)
}

fn single_server_limdists(out: &Path) -> LabResult<RunOutput> {
    let mut cases = Vec::new();
    for lambda in [0.8, 1.0, 1.2] {
        for theta in THETAS {
            cases.push((format!("{}_{}", tag("theta", theta), tag("lambda", lambda)), constant_model(lambda, 1, theta)?));
        }
    }
    limiting_distributions(out, "single-server-limdists", &cases)
}

fn ns_sandwich(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunOutput> {
    let grid = uniform_grid(10.0, 0.25)?;
    let alphas = alpha_grid()?;
    let orders = 4;
    let q0 = 6;
    let mut result = RunOutput::default();
    for theta in [1.1, 0.9] {
        let model = sinusoid_model(6.5, 1.0, 5, theta)?;
        let repr = shifted_mminf_representation(&model, q0 as f64)?;
        let sim = ensemble_with(&model, q0, &grid, orders, &alphas, &ensemble_config(cfg), &Rayon)?;
        let mut moments = Table::new(&["time", "order", "unshifted", "sim", "sim_halfwidth", "shifted"]);
        let mut mgf = Table::new(&["time", "alpha", "unshifted_mgf", "sim_mgf", "sim_halfwidth", "fluid_mgf"]);
        for (i, &t) in grid.iter().enumerate() {
            let unshifted = repr.raw_moments(t, orders, false);
            let shifted = repr.raw_moments(t, orders, true);
            for j in 1..=orders as usize {
                let e = sim.moments[i][j - 1];
                moments.push(vec![
                    num(t),
                    j.to_string(),
                    num(unshifted[j]),
                    num(e.mean),
                    num(e.halfwidth),
                    num(shifted[j]),
                ]);
            }
            for (k, &alpha) in alphas.iter().enumerate() {
                let e = sim.mgf[i][k];
                let fluid = repr.cgf(t, alpha)?;
                mgf.push(vec![
                    num(t),
                    num(alpha),
                    num((fluid - alpha * repr.shift).exp()),
                    num(e.mean),
                    num(e.halfwidth),
                    num(fluid.exp()),
                ]);
            }
        }
        result.files.push(moments.write(out, &format!("ns-sandwich_{}.csv", tag("theta", theta)))?);
        result.files.push(mgf.write(out, &format!("ns-sandwich-mgf_{}.csv", tag("theta", theta)))?);
    }
    Ok(result)
}
