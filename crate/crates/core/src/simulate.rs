//! Exact simulation of the queue-length process and replicated estimators.
//!
//! Between events the process competes a departure clock of rate `δ(q)`
//! against candidate arrivals at the constant rate `λ_up = sup λ`; a
//! candidate at time `s` is kept with probability `λ(s)/λ_up` (thinning).
//! Both clocks are memoryless, so they are redrawn after every event.
//!
//! Replication `r` of a run with master seed `s` uses ChaCha8 stream `r`
//! under key `s`, so any replication can be regenerated on its own.
//! Replications are processed in fixed-size chunks whose statistics are
//! merged in chunk order; the estimates are therefore bit-identical under
//! any [`Replicator`].

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::QueueModel;

/// Replications per chunk.
pub const CHUNK: usize = 64;

/// Default normal quantile for confidence half-widths.
pub const DEFAULT_Z: f64 = 3.0;

/// `α·max Q` above which MGF estimates are flagged as high-variance.
pub const MGF_VARIANCE_LIMIT: f64 = 30.0;

/// The generator for replication `rep` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One realized trajectory. `states[i]` is the queue length just after
/// `event_times[i]`; only state-changing events are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub event_times: Vec<f64>,
    pub states: Vec<u64>,
    pub initial: u64,
    pub horizon: f64,
    /// Arrivals offered by the thinned arrival process, blocked ones included.
    pub arrivals: u64,
    /// Arrivals turned away by a full loss system.
    pub blocked: u64,
    pub abandonments: u64,
}

impl SamplePath {
    /// `Q(t)` for `0 ≤ t ≤ horizon` (right-continuous).
    pub fn state_at(&self, t: f64) -> u64 {
        let k = self.event_times.partition_point(|&e| e <= t);
        if k == 0 {
            self.initial
        } else {
            self.states[k - 1]
        }
    }

    /// Checks the ±1 step structure, time ordering and the loss-system cap.
    pub fn is_valid(&self, model: &QueueModel) -> bool {
        if self.event_times.len() != self.states.len() {
            return false;
        }
        let ordered = self.event_times.windows(2).all(|w| w[0] <= w[1])
            && self.event_times.iter().all(|&t| t >= 0.0 && t <= self.horizon);
        let mut prev = self.initial;
        let steps = self.states.iter().all(|&q| {
            let ok = q + 1 == prev || prev + 1 == q;
            prev = q;
            ok
        });
        let capped = model.capacity().is_none_or(|c| {
            self.initial <= u64::from(c) && self.states.iter().all(|&q| q <= u64::from(c))
        });
        ordered && steps && capped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Arrival,
    Blocked,
    Service,
    Abandonment,
}

/// Event generator shared by path recording and grid sampling.
struct Dynamics<'a> {
    model: &'a QueueModel,
    upper: f64,
    cap: Option<u64>,
    servers: u64,
}

impl<'a> Dynamics<'a> {
    fn new(model: &'a QueueModel, q0: u64) -> Result<Self> {
        let cap = model.capacity().map(u64::from);
        if let Some(c) = cap {
            if q0 > c {
                return Err(Error::InvalidArgument(format!("initial state {q0} exceeds the loss-system capacity {c}")));
            }
        }
        Ok(Self { model, upper: model.arrival().bounds().1, cap, servers: u64::from(model.servers()) })
    }

    /// Advances from `(t, q)` to the next event; `None` once past `horizon`.
    fn next<R: Rng>(&self, rng: &mut R, t: &mut f64, q: u64, horizon: f64) -> Option<Event> {
        loop {
            let death = self.model.departure_rate(q);
            let total = self.upper + death;
            if !(total > 0.0) {
                return None;
            }
            let draw: f64 = rng.random();
            *t += -(1.0 - draw).ln() / total;
            if *t > horizon {
                return None;
            }
            let split: f64 = rng.random::<f64>() * total;
            if split < death {
                let waiting = q.saturating_sub(self.servers) as f64;
                let abandon = self.model.abandon_rate() * waiting;
                if abandon > 0.0 && self.cap.is_none() && rng.random::<f64>() * death < abandon {
                    return Some(Event::Abandonment);
                }
                return Some(Event::Service);
            }
            if rng.random::<f64>() * self.upper < self.model.arrival().eval(*t) {
                return Some(if self.cap == Some(q) { Event::Blocked } else { Event::Arrival });
            }
        }
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive and finite")));
    }
    Ok(())
}

/// One trajectory on `[0, horizon]` using replication stream 0 of `seed`.
pub fn simulate_path(model: &QueueModel, q0: u64, horizon: f64, seed: u64) -> Result<SamplePath> {
    simulate_path_with(model, q0, horizon, &mut replication_rng(seed, 0))
}

pub fn simulate_path_with<R: Rng>(model: &QueueModel, q0: u64, horizon: f64, rng: &mut R) -> Result<SamplePath> {
    check_horizon(horizon)?;
    let dynamics = Dynamics::new(model, q0)?;
    let mut path = SamplePath {
        event_times: Vec::new(),
        states: Vec::new(),
        initial: q0,
        horizon,
        arrivals: 0,
        blocked: 0,
        abandonments: 0,
    };
    let (mut t, mut q) = (0.0, q0);
    while let Some(event) = dynamics.next(rng, &mut t, q, horizon) {
        match event {
            Event::Arrival => {
                path.arrivals += 1;
                q += 1;
            }
            Event::Blocked => {
                path.arrivals += 1;
                path.blocked += 1;
                continue;
            }
            Event::Service => q -= 1,
            Event::Abandonment => {
                path.abandonments += 1;
                q -= 1;
            }
        }
        path.event_times.push(t);
        path.states.push(q);
    }
    Ok(path)
}

/// What one replication reports to an ensemble observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication<'a> {
    /// `Q(t)` at each grid time.
    pub states: &'a [u64],
    pub arrivals: u64,
    pub abandonments: u64,
    /// Largest state visited on `[0, horizon]`.
    pub max_state: u64,
}

/// Runs one replication and writes `Q(grid[i])` into `out[i]`.
fn sample_on_grid<R: Rng>(dynamics: &Dynamics<'_>, q0: u64, grid: &[f64], rng: &mut R, out: &mut [u64]) -> (u64, u64, u64) {
    let horizon = grid[grid.len() - 1];
    let (mut t, mut q) = (0.0, q0);
    let (mut arrivals, mut abandonments, mut max_state) = (0, 0, q0);
    let mut next_point = 0;
    while let Some(event) = dynamics.next(rng, &mut t, q, horizon) {
        while next_point < grid.len() && grid[next_point] < t {
            out[next_point] = q;
            next_point += 1;
        }
        match event {
            Event::Arrival => {
                arrivals += 1;
                q += 1;
            }
            Event::Blocked => arrivals += 1,
            Event::Service => q -= 1,
            Event::Abandonment => {
                abandonments += 1;
                q -= 1;
            }
        }
        max_state = max_state.max(q);
    }
    out[next_point..].iter_mut().for_each(|s| *s = q);
    (arrivals, abandonments, max_state)
}

/// Streaming mean and variance, mergeable across chunks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two disjoint samples.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / n as f64);
        self.count = n;
    }

    /// Unbiased sample variance; 0 below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self, z: f64) -> Estimate {
        let halfwidth = if self.count == 0 { f64::INFINITY } else { z * (self.variance() / self.count as f64).sqrt() };
        Estimate { mean: self.mean, halfwidth }
    }
}

/// A sample mean with its confidence half-width `z·s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub halfwidth: f64,
}

/// Runs the chunks of an ensemble. Implementations may evaluate chunks in
/// any order or concurrently but must return results in chunk order.
pub trait Replicator {
    fn run_chunks<T, F>(&self, chunks: usize, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Evaluates chunks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Replicator for Sequential {
    fn run_chunks<T, F>(&self, chunks: usize, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..chunks).map(work).collect()
    }
}

/// Replication count, master seed and confidence quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub reps: u64,
    pub seed: u64,
    pub z: f64,
}

impl EnsembleConfig {
    pub fn new(reps: u64, seed: u64) -> Self {
        Self { reps, seed, z: DEFAULT_Z }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::InvalidArgument(format!("at least two replications are required (got {})", self.reps)));
        }
        if !(self.z > 0.0) {
            return Err(Error::InvalidArgument(format!("z = {} must be positive", self.z)));
        }
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("output grid is empty".into()));
    }
    if !(grid[0] >= 0.0) || grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("output grid must be finite, ascending and start at t >= 0".into()));
    }
    Ok(())
}

/// Accumulated observer statistics of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    /// `stats[i][k]` accumulates observable `k` at `grid[i]`.
    pub stats: Vec<Vec<Welford>>,
    /// Per-replication totals: arrivals, abandonments.
    pub arrivals: Welford,
    pub abandonments: Welford,
    /// Largest state seen in any replication.
    pub max_state: u64,
}

/// Runs `cfg.reps` replications and feeds each to `observe`, which writes
/// `width` values per grid time into `values[i·width + k]`.
pub fn ensemble_observe<P, F>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    width: usize,
    cfg: &EnsembleConfig,
    replicator: &P,
    observe: F,
) -> Result<Observations>
where
    P: Replicator,
    F: Fn(&Replication<'_>, &mut [f64]) + Sync + Send,
{
    cfg.validate()?;
    check_grid(grid)?;
    let dynamics = Dynamics::new(model, q0)?;
    let chunks = (cfg.reps as usize).div_ceil(CHUNK);
    let partials = replicator.run_chunks(chunks, |chunk| {
        let mut part = Observations {
            stats: alloc::vec![alloc::vec![Welford::default(); width]; grid.len()],
            arrivals: Welford::default(),
            abandonments: Welford::default(),
            max_state: 0,
        };
        let mut states = alloc::vec![0u64; grid.len()];
        let mut values = alloc::vec![0.0; grid.len() * width];
        let first = (chunk * CHUNK) as u64;
        let last = (first + CHUNK as u64).min(cfg.reps);
        for rep in first..last {
            let mut rng = replication_rng(cfg.seed, rep);
            let (arrivals, abandonments, max_state) = sample_on_grid(&dynamics, q0, grid, &mut rng, &mut states);
            let replication = Replication { states: &states, arrivals, abandonments, max_state };
            observe(&replication, &mut values);
            for (row, chunk_values) in part.stats.iter_mut().zip(values.chunks(width.max(1))) {
                for (acc, v) in row.iter_mut().zip(chunk_values) {
                    acc.push(*v);
                }
            }
            part.arrivals.push(arrivals as f64);
            part.abandonments.push(abandonments as f64);
            part.max_state = part.max_state.max(max_state);
        }
        part
    });
    let mut total = Observations {
        stats: alloc::vec![alloc::vec![Welford::default(); width]; grid.len()],
        arrivals: Welford::default(),
        abandonments: Welford::default(),
        max_state: 0,
    };
    for part in &partials {
        for (row, other) in total.stats.iter_mut().zip(&part.stats) {
            for (acc, o) in row.iter_mut().zip(other) {
                acc.merge(o);
            }
        }
        total.arrivals.merge(&part.arrivals);
        total.abandonments.merge(&part.abandonments);
        total.max_state = total.max_state.max(part.max_state);
    }
    Ok(total)
}

/// Ensemble estimates on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub grid: Vec<f64>,
    /// Orders `1..=m_max`; empty for MGF ensembles.
    pub orders: Vec<u32>,
    /// Empty for moment ensembles.
    pub alphas: Vec<f64>,
    /// `moments[i][j]` estimates `E[Q(grid[i])^{orders[j]}]`.
    pub moments: Vec<Vec<Estimate>>,
    /// `mgf[i][k]` estimates `E[e^{alphas[k]·Q(grid[i])}]`.
    pub mgf: Vec<Vec<Estimate>>,
    pub reps: u64,
    pub z: f64,
    /// Mean offered arrivals per replication over `[0, horizon]`.
    pub arrivals: Estimate,
    pub abandonments: Estimate,
    pub max_state: u64,
    /// Some `α·max Q` exceeded [`MGF_VARIANCE_LIMIT`].
    pub mgf_variance_warning: bool,
}

impl EnsembleStats {
    /// Estimates for one order across the grid.
    pub fn moment_column(&self, order: u32) -> Option<Vec<Estimate>> {
        let j = self.orders.iter().position(|&o| o == order)?;
        Some(self.moments.iter().map(|row| row[j]).collect())
    }

    pub fn mgf_column(&self, k: usize) -> Option<Vec<Estimate>> {
        (k < self.alphas.len()).then(|| self.mgf.iter().map(|row| row[k]).collect())
    }
}

fn finish(obs: Observations, grid: &[f64], orders: Vec<u32>, alphas: Vec<f64>, cfg: &EnsembleConfig) -> EnsembleStats {
    let n_orders = orders.len();
    let mut moments = Vec::with_capacity(grid.len());
    let mut mgf = Vec::with_capacity(grid.len());
    for row in &obs.stats {
        moments.push(row[..n_orders].iter().map(|w| w.estimate(cfg.z)).collect());
        mgf.push(row[n_orders..].iter().map(|w| w.estimate(cfg.z)).collect());
    }
    let warning = alphas.iter().any(|a| a * obs.max_state as f64 > MGF_VARIANCE_LIMIT);
    EnsembleStats {
        grid: grid.to_vec(),
        orders,
        alphas,
        moments,
        mgf,
        reps: cfg.reps,
        z: cfg.z,
        arrivals: obs.arrivals.estimate(cfg.z),
        abandonments: obs.abandonments.estimate(cfg.z),
        max_state: obs.max_state,
        mgf_variance_warning: warning,
    }
}

/// Raw moments of orders `1..=m_max` and MGF values at `alphas`, from one
/// set of replications.
pub fn ensemble_with<P: Replicator>(
    model: &QueueModel,
    q0: u64,
    grid: &[f64],
    m_max: u32,
    alphas: &[f64],
    cfg: &EnsembleConfig,
    replicator: &P,
) -> Result<EnsembleStats> {
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("alphas must be finite".into()));
    }
    let n_orders = m_max as usize;
    let width = n_orders + alphas.len();
    let obs = ensemble_observe(model, q0, grid, width, cfg, replicator, |rep, values| {
        for (i, &q) in rep.states.iter().enumerate() {
            let row = &mut values[i * width..(i + 1) * width];
            let x = q as f64;
            let mut power = 1.0;
            for slot in row[..n_orders].iter_mut() {
                power *= x;
                *slot = power;
            }
            for (slot, &a) in row[n_orders..].iter_mut().zip(alphas) {
                *slot = (a * x).exp();
            }
        }
    })?;
    Ok(finish(obs, grid, (1..=m_max).collect(), alphas.to_vec(), cfg))
}

/// Raw moments of orders `1..=m_max` at each grid time.
pub fn ensemble_moments(model: &QueueModel, q0: u64, grid: &[f64], m_max: u32, reps: u64, seed: u64) -> Result<EnsembleStats> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    ensemble_with(model, q0, grid, m_max, &[], &EnsembleConfig::new(reps, seed), &Sequential)
}

/// `E[e^{α·Q(t)}]` for each grid time and `α`.
pub fn ensemble_mgf(model: &QueueModel, q0: u64, grid: &[f64], alphas: &[f64], reps: u64, seed: u64) -> Result<EnsembleStats> {
    ensemble_with(model, q0, grid, 0, alphas, &EnsembleConfig::new(reps, seed), &Sequential)
}
