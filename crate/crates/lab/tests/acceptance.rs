//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails. Every oracle below is computed
//! here, independently of the library code it checks.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use erlang_core::exact::{stationary_distribution, transient_distribution};
use erlang_core::fluid::{fluid_mean, fluid_moments};
use erlang_core::genfun::{infinite_server_mgf, nonstationary_fluid_cgf, nonstationary_fluid_mgf, stationary_fluid_distribution};
use erlang_core::ode::uniform_grid;
use erlang_core::simulate::{ensemble_with, EnsembleConfig};
use erlang_core::verify::{check_mean_ordering, check_moment_ordering, check_stationary_sandwich, OrderingReport};
use erlang_core::{FourierRate, QueueModel};
use erlang_lab::figures::FIGURE_IDS;
use erlang_lab::Rayon;

const SEED: u64 = 42;
const REPS: u64 = 10_000;

type Outcome = Result<(bool, String), String>;

fn erlang_a(base: f64, amplitude: f64, c: u32, theta: f64) -> QueueModel {
    QueueModel::erlang_a(FourierRate::sinusoid(base, amplitude).unwrap(), c, 1.0, theta).unwrap()
}

fn constant(lambda: f64, c: u32, theta: f64) -> QueueModel {
    QueueModel::erlang_a(FourierRate::constant(lambda).unwrap(), c, 1.0, theta).unwrap()
}

/// `∫_0^t (10 + 2 sin s) e^{−(t−s)} ds`.
fn psi(t: f64) -> f64 {
    10.0 * (1.0 - (-t).exp()) + t.sin() - t.cos() + (-t).exp()
}

/// `E[X^n]` for `X ~ Poisson(x)` as `Σ_k S(n, k) x^k`.
fn poisson_moment(n: usize, x: f64) -> f64 {
    let mut stirling = vec![vec![0.0f64; n + 1]; n + 1];
    stirling[0][0] = 1.0;
    for i in 1..=n {
        for k in 1..=i {
            stirling[i][k] = k as f64 * stirling[i - 1][k] + stirling[i - 1][k - 1];
        }
    }
    (0..=n).map(|k| stirling[n][k] * x.powi(k as i32)).sum()
}

/// `n` evenly spaced points from `a` to `b` inclusive.
fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Largest number of consecutive `true` entries.
fn longest_run(flags: impl IntoIterator<Item = bool>) -> usize {
    let (mut best, mut run) = (0, 0);
    for f in flags {
        run = if f { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

fn summary(reports: &[OrderingReport]) -> String {
    reports
        .iter()
        .map(|r| format!("{} {} ({} violated, {} gated)", r.claim, r.verdict.label(), r.violations, r.gated_violations))
        .collect::<Vec<_>>()
        .join("; ")
}

fn infinite_server_exactness() -> Outcome {
    let model = erlang_a(10.0, 2.0, 10, 1.0);
    let grid = uniform_grid(20.0, 0.1).map_err(|e| e.to_string())?;
    let mean = fluid_mean(&model, 0.0, &grid).map_err(|e| e.to_string())?;
    let moments = fluid_moments(&model, 0.0, &grid, 4).map_err(|e| e.to_string())?;
    let mut mean_err = 0.0f64;
    let mut moment_err = 0.0f64;
    for (i, &t) in grid.iter().enumerate() {
        mean_err = mean_err.max((mean.values[i][0] - psi(t)).abs());
        for n in 1..=4 {
            moment_err = moment_err.max((moments.values[i][n - 1] - poisson_moment(n, psi(t))).abs());
        }
    }
    let coarse = uniform_grid(20.0, 0.5).map_err(|e| e.to_string())?;
    let sim = ensemble_with(&model, 0, &coarse, 1, &[], &EnsembleConfig::new(REPS, SEED), &Rayon)
        .map_err(|e| e.to_string())?;
    let outside: Vec<bool> =
        coarse.iter().zip(&sim.moments).map(|(t, row)| (row[0].mean - psi(*t)).abs() > row[0].halfwidth).collect();
    let misses = outside.iter().filter(|v| **v).count();
    let pass = mean_err < 1e-6 && moment_err < 1e-6 && longest_run(outside) < 2;
    Ok((
        pass,
        format!(
            "max |q - psi| {mean_err:.2e}, max moment error {moment_err:.2e}, ensemble outside 3 sigma at {misses}/{} points",
            coarse.len()
        ),
    ))
}

fn mean_ordering() -> Outcome {
    let grid = uniform_grid(20.0, 0.1).map_err(|e| e.to_string())?;
    let cfg = EnsembleConfig::new(REPS, SEED);
    let reports = [0.5, 2.0]
        .into_iter()
        .map(|theta| check_mean_ordering(&erlang_a(10.0, 2.0, 10, theta), 0, &grid, &cfg, &Rayon))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok((reports.iter().all(OrderingReport::passed), format!("theta 0.5, 2: {}", summary(&reports))))
}

/// Mean of `|lhs − rhs| / max(|lhs|, |rhs|)` over points with `t ≥ 2`.
fn relative_gap(report: &OrderingReport) -> f64 {
    let gaps: Vec<f64> = report
        .points
        .iter()
        .filter(|p| p.t >= 2.0)
        .map(|p| (p.lhs - p.rhs).abs() / p.lhs.abs().max(p.rhs.abs()))
        .collect();
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

fn moment_ordering() -> Outcome {
    let grid = uniform_grid(20.0, 0.25).map_err(|e| e.to_string())?;
    let cfg = EnsembleConfig::new(REPS, SEED);
    let mut pass = true;
    let mut notes = Vec::new();
    for theta in [0.5, 2.0] {
        let base = erlang_a(10.0, 2.0, 10, theta);
        let scaled = base.scale(10.0).map_err(|e| e.to_string())?;
        let small = check_moment_ordering(&base, 0, &grid, 4, &cfg, &Rayon).map_err(|e| e.to_string())?;
        let large = check_moment_ordering(&scaled, 0, &grid, 4, &cfg, &Rayon).map_err(|e| e.to_string())?;
        let failed: Vec<String> =
            small.iter().chain(&large).filter(|r| !r.passed()).map(|r| r.claim.clone()).collect();
        let shrinks = small.iter().zip(&large).all(|(s, l)| relative_gap(l) < relative_gap(s));
        pass &= failed.is_empty() && shrinks;
        notes.push(format!(
            "theta {theta}: {} failing, relative gap m=1 {:.3e} -> {:.3e} at eta 10 (smaller at every order: {shrinks})",
            failed.len(),
            relative_gap(&small[0]),
            relative_gap(&large[0])
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn stationary_sandwich() -> Outcome {
    let report = check_stationary_sandwich(&constant(20.0, 15, 2.0), 3).map_err(|e| e.to_string())?;
    let mean = stationary_distribution(&constant(20.0, 25, 2.0), 1e-15).map_err(|e| e.to_string())?.mean();
    let inside = (10.0..=20.0).contains(&mean);
    Ok((report.passed() && inside, format!("c=15: {} ({} points); c=25 exact mean {mean:.6}", report.verdict.label(), report.points.len())))
}

/// Clamped fluid CGF by RK4 along the characteristics of
/// `G_t = λ(e^α − 1) + (e^{−α} − 1)(θG_α − (θ − μ)c)`, shooting on the
/// starting `α` by bisection.
fn characteristic_oracle(model: &QueueModel, q0: f64, t: f64, alpha: f64) -> f64 {
    let c = f64::from(model.servers());
    let (mu, theta) = (model.service_rate(), model.abandon_rate());
    let field = |s: f64, a: f64| -> (f64, f64) {
        let down = (-a).exp_m1();
        (-theta * down, model.arrival().eval(s) * a.exp_m1() - (theta - mu) * c * down)
    };
    let trace = |a0: f64| -> (f64, f64) {
        let n = (t / 4e-3).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let (mut a, mut g) = (a0, a0 * q0);
        for i in 0..n {
            let s = i as f64 * h;
            let k1 = field(s, a);
            let k2 = field(s + h / 2.0, a + h / 2.0 * k1.0);
            let k3 = field(s + h / 2.0, a + h / 2.0 * k2.0);
            let k4 = field(s + h, a + h * k3.0);
            a += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            g += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (a, g)
    };
    // |α| only grows forward in time, so the start lies between 0 and α
    let (mut lo, mut hi) = (alpha.min(0.0), alpha.max(0.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if trace(mid).0 < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    trace(0.5 * (lo + hi)).1
}

fn sandwich_models() -> [QueueModel; 2] {
    [erlang_a(6.5, 1.0, 5, 0.9), erlang_a(6.5, 1.0, 5, 1.1)]
}

fn closed_form_vs_characteristics() -> Outcome {
    let mut worst = 0.0f64;
    for model in sandwich_models() {
        for &t in &linspace(0.0, 5.0, 10) {
            for &a in &linspace(-0.5, 0.5, 10) {
                let closed = nonstationary_fluid_cgf(&model, 6.0, t, a).map_err(|e| e.to_string())?;
                worst = worst.max((closed - characteristic_oracle(&model, 6.0, t, a)).abs());
            }
        }
    }
    Ok((worst < 1e-6, format!("max |G_closed - G_rk4| {worst:.2e} over 2 x 10 x 10 points")))
}

fn representation_identity() -> Outcome {
    let mut worst = 0.0f64;
    for model in sandwich_models() {
        let gamma = 5.0 * (model.abandon_rate() - 1.0) / model.abandon_rate();
        for &t in &linspace(0.0, 5.0, 10) {
            for &a in &linspace(-0.5, 0.5, 10) {
                let shifted = infinite_server_mgf(model.arrival(), model.abandon_rate(), 6.0 - gamma, t, a)
                    .map_err(|e| e.to_string())?
                    * (a * gamma).exp();
                let fluid = nonstationary_fluid_cgf(&model, 6.0, t, a).map_err(|e| e.to_string())?.exp();
                worst = worst.max((shifted - fluid).abs() / fluid.abs());
            }
        }
    }
    Ok((worst < 1e-9, format!("max relative difference {worst:.2e}")))
}

/// Largest `|M_t − rhs(t, α, M, M_α)|` over interior grid points, with
/// central differences of step `1e-5`.
fn max_residual<M, R>(mgf: M, rhs: R) -> Result<f64, String>
where
    M: Fn(f64, f64) -> Result<f64, String>,
    R: Fn(f64, f64, f64, f64) -> f64,
{
    let h = 1e-5;
    let (times, alphas) = (linspace(0.0, 5.0, 10), linspace(-0.5, 0.5, 10));
    let mut worst = 0.0f64;
    for &t in &times[1..times.len() - 1] {
        for &a in &alphas[1..alphas.len() - 1] {
            let m_t = (mgf(t + h, a)? - mgf(t - h, a)?) / (2.0 * h);
            let m_a = (mgf(t, a + h)? - mgf(t, a - h)?) / (2.0 * h);
            worst = worst.max((m_t - rhs(t, a, mgf(t, a)?, m_a)).abs());
        }
    }
    Ok(worst)
}

fn pde_residuals() -> Outcome {
    let mut notes = Vec::new();
    let mut worst = 0.0f64;
    for model in sandwich_models() {
        let rate = model.arrival().clone();
        let (c, theta) = (5.0, model.abandon_rate());
        let lambda = |t: f64| rate.eval(t);
        let infinite = max_residual(
            |t, a| infinite_server_mgf(&rate, 1.0, 6.0, t, a).map_err(|e| e.to_string()),
            |t, a, m, m_a| lambda(t) * a.exp_m1() * m + (-a).exp_m1() * m_a,
        )?;
        let fluid = max_residual(
            |t, a| nonstationary_fluid_mgf(&model, 6.0, t, a).map_err(|e| e.to_string()),
            |t, a, m, m_a| lambda(t) * a.exp_m1() * m + (-a).exp_m1() * (theta * m_a - (theta - 1.0) * c * m),
        )?;
        worst = worst.max(infinite).max(fluid);
        notes.push(format!("theta {theta}: infinite-server {infinite:.2e}, fluid {fluid:.2e}"));
    }
    Ok((worst < 1e-5, notes.join("; ")))
}

fn limiting_distributions() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for theta in [0.5, 2.0] {
        for c in [15, 20, 25] {
            let model = constant(20.0, c, theta);
            let exact = stationary_distribution(&model, 1e-15).map_err(|e| e.to_string())?;
            let fluid = stationary_fluid_distribution(&model).map_err(|e| e.to_string())?;
            let tv = exact.total_variation(&fluid);
            let gated = c != 20;
            if gated {
                pass &= tv < 0.15;
            }
            notes.push(format!("theta {theta} c {c}: {tv:.4}{}", if gated { "" } else { " (reported)" }));
        }
    }
    Ok((pass, format!("TV {}", notes.join(", "))))
}

fn transient_cross_validation() -> Outcome {
    let times = [1.0, 5.0, 10.0];
    let mut pass = true;
    let mut notes = Vec::new();
    for theta in [0.5, 2.0] {
        let model = erlang_a(10.0, 2.0, 10, theta);
        let exact = transient_distribution(&model, 0, &times, 1e-10).map_err(|e| e.to_string())?.means();
        let sim = ensemble_with(&model, 0, &times, 1, &[], &EnsembleConfig::new(100_000, SEED), &Rayon)
            .map_err(|e| e.to_string())?;
        for (i, &t) in times.iter().enumerate() {
            let e = sim.moments[i][0];
            let inside = (e.mean - exact[i]).abs() <= e.halfwidth;
            pass &= inside;
            notes.push(format!("theta {theta} t {t}: |diff| {:.4} vs 3 sigma {:.4}", (e.mean - exact[i]).abs(), e.halfwidth));
        }
    }
    Ok((pass, notes.join("; ")))
}

fn files_of(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let bytes = fs::read(&path).map_err(|e| e.to_string())?;
        files.push((path.file_name().unwrap().to_string_lossy().into_owned(), bytes));
    }
    files.sort();
    Ok(files)
}

fn figure_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut differing = Vec::new();
    let mut count = 0;
    for id in FIGURE_IDS {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let dir = root.path().join(format!("{id}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_erlang-lab"))
                .args(["figure", id, "--seed", &SEED.to_string(), "--out"])
                .arg(&dir)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("figure {id} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(files_of(&dir)?);
        }
        count += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            differing.push(id);
        }
    }
    Ok((differing.is_empty(), format!("{count} CSV files from {} figures; differing: {differing:?}", FIGURE_IDS.len())))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, &str, u64, Check); 10] = [
        ("AC1", "infinite-server exactness", 60, infinite_server_exactness),
        ("AC2", "mean ordering", 120, mean_ordering),
        ("AC3", "moment ordering, orders 1-4 and eta 10", 600, moment_ordering),
        ("AC4", "stationary sandwich", 10, stationary_sandwich),
        ("AC5", "closed form vs characteristic RK4", 5, closed_form_vs_characteristics),
        ("AC6", "shifted infinite-server identity", 1, representation_identity),
        ("AC7", "PDE residuals", 5, pde_residuals),
        ("AC8", "limiting distributions", 30, limiting_distributions),
        ("AC9", "transient law vs 1e5-replication ensemble", 600, transient_cross_validation),
        ("AC10", "figure determinism", 600, figure_determinism),
    ];
    let mut failures = 0;
    for (id, title, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {title}: {detail} ({:.2} s, limit {limit} s)", elapsed.as_secs_f64());
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
