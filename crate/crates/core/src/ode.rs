//! Fixed-step classical Runge–Kutta integration with a step-halving
//! (Richardson) accuracy check.
//!
//! The right-hand sides met in this crate are Lipschitz but only piecewise
//! smooth (they contain `min(q, c)`). Callers describe each kink by a
//! switching function whose sign selects the branch; a step in which a
//! sign changes is split at the located crossing, so every RK4 step sees a
//! smooth right-hand side and the method keeps its fourth order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Step policy shared by the fluid and forward-equation solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk4Settings {
    /// Initial step size `h`.
    pub step: f64,
    /// Accepted change between the `h` and `h/2` solutions, relative to
    /// `max(|y|, 1)`.
    pub tolerance: f64,
    /// How many times the step may be halved before giving up.
    pub max_refinements: u32,
}

impl Default for Rk4Settings {
    fn default() -> Self {
        Self { step: 1e-3, tolerance: 1e-8, max_refinements: 4 }
    }
}

impl Rk4Settings {
    pub fn with_step(step: f64) -> Self {
        Self { step, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidArgument(format!("step {} must be positive", self.step)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be positive", self.tolerance)));
        }
        Ok(())
    }
}

/// States sampled on an output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub grid: Vec<f64>,
    /// `states[i]` is the state at `grid[i]`.
    pub states: Vec<Vec<f64>>,
    /// Step used for the accepted (finer) solution.
    pub step: f64,
    /// Largest relative change observed between the last two step sizes.
    pub error_estimate: f64,
}

/// Scratch space for one RK4 step.
pub(crate) struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub(crate) fn new(dim: usize) -> Self {
        Self { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    /// Advances `y` from `t` to `t + h` in place.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn step<F>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        rhs(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Bisection precision for switching times, relative to the step.
const SWITCH_PRECISION: f64 = 1e-13;
/// Crossings located within one step before the rest of it is taken as is.
const MAX_SPLITS: usize = 16;

/// Switching functions `s(t, y)`. Branch `i` is "below" while `s_i < 0`.
pub trait Switches {
    fn count(&self) -> usize;
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]);
}

/// No kinks: plain fixed-step RK4.
#[derive(Debug, Clone, Copy, Default)]
pub struct Smooth;

impl Switches for Smooth {
    fn count(&self) -> usize {
        0
    }

    fn eval(&mut self, _: f64, _: &[f64], _: &mut [f64]) {}
}

/// `count` switching functions computed by a closure.
pub struct SwitchFn<S> {
    pub count: usize,
    pub eval: S,
}

impl<W: Switches + ?Sized> Switches for &mut W {
    fn count(&self) -> usize {
        (**self).count()
    }

    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        (**self).eval(t, y, out)
    }
}

impl<S> Switches for SwitchFn<S>
where
    S: FnMut(f64, &[f64], &mut [f64]),
{
    fn count(&self) -> usize {
        self.count
    }

    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.eval)(t, y, out)
    }
}

fn set_modes(values: &[f64], modes: &mut [bool]) {
    for (m, v) in modes.iter_mut().zip(values) {
        *m = *v < 0.0;
    }
}

fn crossed(modes: &[bool], values: &[f64]) -> bool {
    modes.iter().zip(values).any(|(m, v)| *m != (*v < 0.0))
}

/// RK4 for piecewise-smooth right-hand sides `rhs(t, y, modes, dy)`.
///
/// Branch modes are frozen for every substep, so all four stages see the
/// same smooth branch. A substep whose end lands on the other side of a
/// switch is cut back to the located crossing, where the modes flip.
pub(crate) struct SwitchedStepper<W> {
    work: Rk4Workspace,
    switches: W,
    modes: Vec<bool>,
    values: Vec<f64>,
    trial: Vec<f64>,
}

impl<W: Switches> SwitchedStepper<W> {
    pub(crate) fn new(dim: usize, switches: W) -> Self {
        let n = switches.count();
        Self { work: Rk4Workspace::new(dim), switches, modes: vec![false; n], values: vec![0.0; n], trial: vec![0.0; dim] }
    }

    /// Advances `y` from `t` to `t + h` in place.
    pub(crate) fn step<F>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &[bool], &mut [f64]),
    {
        let Self { work, switches, modes, values, trial } = self;
        let modes_now = &mut *modes;
        switches.eval(t, y, values);
        set_modes(values, modes_now);
        let end = t + h;
        let mut now = t;
        for split in 0..=MAX_SPLITS {
            let rest = end - now;
            if rest <= 0.0 {
                return;
            }
            let frozen: &[bool] = modes_now;
            let mut branch = |s: f64, x: &[f64], dx: &mut [f64]| rhs(s, x, frozen, dx);
            trial.copy_from_slice(y);
            work.step(&mut branch, now, trial, rest);
            if frozen.is_empty() {
                y.copy_from_slice(trial);
                return;
            }
            switches.eval(end, trial, values);
            if split == MAX_SPLITS || !crossed(frozen, values) {
                y.copy_from_slice(trial);
                return;
            }
            // shortest substep on the frozen branch that reaches a crossing
            let (mut lo, mut hi) = (0.0, rest);
            while hi - lo > SWITCH_PRECISION * h {
                let mid = 0.5 * (lo + hi);
                trial.copy_from_slice(y);
                work.step(&mut branch, now, trial, mid);
                switches.eval(now + mid, trial, values);
                if crossed(frozen, values) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            work.step(&mut branch, now, y, hi);
            now = if hi >= rest { end } else { now + hi };
            switches.eval(now, y, values);
            set_modes(values, modes_now);
        }
    }
}

/// `0, step, 2·step, ...` up to and including `end` (the last point is
/// `end` itself when `end` is not a multiple of `step`).
pub fn uniform_grid(end: f64, step: f64) -> Result<Vec<f64>> {
    if !(end >= 0.0) || !end.is_finite() || !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("grid needs end >= 0 and step > 0 (end = {end}, step = {step})")));
    }
    let n = (end / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if end - grid[n] > 1e-9 * step {
        grid.push(end);
    } else {
        grid[n] = end;
    }
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("output grid is empty".into()));
    }
    if !(grid[0] >= 0.0) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("output grid must be finite and start at t >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("output grid must be ascending".into()));
    }
    Ok(())
}

/// Integrates `y' = rhs(t, y)` from `y(0) = y0` with step at most `h`,
/// recording the state at every grid time. Each grid interval is divided
/// into equal substeps so grid times are hit exactly.
pub fn integrate_fixed<F>(mut rhs: F, y0: &[f64], grid: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_switched(|t, y, _: &[bool], dy| rhs(t, y, dy), Smooth, y0, grid, h)
}

/// [`integrate_fixed`] for `rhs(t, y, modes, dy)`, where `modes[i]` is
/// `s_i < 0` for the switching functions, frozen within each substep.
pub fn integrate_switched<F, W>(mut rhs: F, switches: W, y0: &[f64], grid: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &[bool], &mut [f64]),
    W: Switches,
{
    check_grid(grid)?;
    let mut work = SwitchedStepper::new(y0.len(), switches);
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &target in grid {
        let span = target - t;
        if span > 0.0 {
            let n = ((span / h) - 1e-9).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for i in 0..n {
                work.step(&mut rhs, t + i as f64 * dt, &mut y, dt);
            }
            t = target;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("solution became non-finite before t = {target} (step {h})")));
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Largest change between two sampled solutions relative to `max(|fine|, 1)`.
fn relative_change(coarse: &[Vec<f64>], fine: &[Vec<f64>]) -> f64 {
    coarse
        .iter()
        .flatten()
        .zip(fine.iter().flatten())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// RK4 at `h` and `h/2`, halving further until the two agree to the
/// tolerance. Returns the finer of the last pair.
pub fn solve<F>(mut rhs: F, y0: &[f64], grid: &[f64], settings: &Rk4Settings) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    solve_switched(|t, y, _: &[bool], dy| rhs(t, y, dy), Smooth, y0, grid, settings)
}

/// [`solve`] for a piecewise-smooth `rhs(t, y, modes, dy)`; see
/// [`integrate_switched`].
pub fn solve_switched<F, W>(mut rhs: F, mut switches: W, y0: &[f64], grid: &[f64], settings: &Rk4Settings) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &[bool], &mut [f64]),
    W: Switches,
{
    settings.validate()?;
    let mut step = settings.step;
    let mut coarse = integrate_switched(&mut rhs, &mut switches, y0, grid, step)?;
    let mut error_estimate = f64::INFINITY;
    for _ in 0..=settings.max_refinements {
        let fine = integrate_switched(&mut rhs, &mut switches, y0, grid, step / 2.0)?;
        error_estimate = relative_change(&coarse, &fine);
        step /= 2.0;
        if error_estimate < settings.tolerance {
            return Ok(Solution { grid: grid.to_vec(), states: fine, step, error_estimate });
        }
        coarse = fine;
    }
    Err(Error::Numerical(format!(
        "step halving did not reach tolerance {}: last change {error_estimate:e} at step {step:e}",
        settings.tolerance
    )))
}
