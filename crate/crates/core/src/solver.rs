//! Plug-and-play ADMM inpainting.
//!
//! Solves
//!
//! ```text
//! min ‖y‖₁ + λ·Φ(z) + 1_S(x)   s.t.  y = F x,  z = x
//! ```
//!
//! where `F` is the framelet analysis operator, `S` is the set of signals
//! agreeing with the observation `g` on the observed patches, and the
//! proximal step of `Φ` is delegated to a [`Denoiser`]. Each step runs the
//! `y`, `z`, `x` updates followed by unit-step multiplier updates. The
//! `x` update has a closed form because `F*F = I`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::framelet::{analyze, coefficient_count, default_depth, synthesize, FrameletPyramid};
use crate::metrics::{quality, Quality};
use crate::partition::patch_count;
use crate::signal::SphericalSignal;

/// Floor on the denominator of the relative change.
const REL_CHANGE_FLOOR: f64 = 1e-12;

/// `sign(t)·max(|t| − tau, 0)`.
#[inline]
pub fn soft_shrink(t: f64, tau: f64) -> f64 {
    if t > tau {
        t - tau
    } else if t < -tau {
        t + tau
    } else {
        0.0
    }
}

/// Observed (`true`) or missing flag per leaf patch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    level: u32,
    flags: Vec<bool>,
}

impl Mask {
    pub fn new(level: u32, flags: Vec<bool>) -> Result<Mask> {
        if flags.len() != patch_count(level) {
            return Err(Error::Shape(format!(
                "mask has {} flags, level {level} needs {}",
                flags.len(),
                patch_count(level)
            )));
        }
        Ok(Mask { level, flags })
    }

    pub fn all_observed(level: u32) -> Mask {
        Mask {
            level,
            flags: vec![true; patch_count(level)],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn observed_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Zeroes missing entries, as in the degraded observation.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.flags)
            .map(|(&v, &f)| if f { v } else { 0.0 })
            .collect()
    }

    /// Replaces missing entries by the mean of the observed ones.
    pub fn mean_fill(&self, values: &[f64]) -> Result<Vec<f64>> {
        let observed = self.observed_count();
        if observed == 0 {
            return Err(Error::Domain("mask has no observed entries".into()));
        }
        let mean = values
            .iter()
            .zip(&self.flags)
            .filter(|(_, &f)| f)
            .map(|(v, _)| v)
            .sum::<f64>()
            / observed as f64;
        Ok(values
            .iter()
            .zip(&self.flags)
            .map(|(&v, &f)| if f { v } else { mean })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Framelet depth; `None` means `min(J, 3)`.
    pub depth: Option<u32>,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Weight on `‖y‖₁`; the `y` threshold is `l1_weight/β₁`.
    pub l1_weight: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            lambda: 1.0,
            beta1: 0.5,
            beta2: 2.0,
            depth: None,
            max_iters: 50,
            rel_tol: 1e-4,
            l1_weight: 1.0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} = {v} must be positive")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("beta1", self.beta1)?;
        positive("beta2", self.beta2)?;
        positive("l1_weight", self.l1_weight)?;
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::Domain(format!(
                "rel_tol = {} must be ≥ 0",
                self.rel_tol
            )));
        }
        Ok(())
    }

    /// Depth used on a level-`level` signal.
    pub fn depth_for(&self, level: u32) -> Result<u32> {
        let depth = self.depth.unwrap_or_else(|| default_depth(level));
        if depth == 0 || depth > level {
            return Err(Error::Domain(format!(
                "depth {depth} not in [1, {level}]; inpainting needs level ≥ 1"
            )));
        }
        Ok(depth)
    }

    /// Noise level handed to the denoiser, `√(λ/β₂)`.
    pub fn sigma(&self) -> f64 {
        (self.lambda / self.beta2).sqrt()
    }
}

/// The ADMM iterate for one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    level: u32,
    depth: u32,
    pub(crate) x: Vec<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) z: Vec<f64>,
    pub(crate) lambda1: Vec<f64>,
    pub(crate) lambda2: Vec<f64>,
    pub iter: usize,
    pub last_rel_change: f64,
}

impl SolverState {
    /// Mean-filled start: `x = z = g` with missing entries set to the
    /// observed mean, `y = F x`, zero multipliers.
    pub fn init(g: &SphericalSignal, mask: &Mask, params: &SolverParams) -> Result<SolverState> {
        let g = single_channel(g)?;
        check_mask(g, mask)?;
        let level = g.level();
        let depth = params.depth_for(level)?;
        let x = mask.mean_fill(g.channel(0))?;
        let y = analyze(&x, level, depth)?;
        let m = y.len();
        Ok(SolverState {
            level,
            depth,
            z: x.clone(),
            lambda1: vec![0.0; m],
            lambda2: vec![0.0; x.len()],
            x,
            y,
            iter: 0,
            last_rel_change: f64::INFINITY,
        })
    }

    /// Builds a state from explicit iterates.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        level: u32,
        depth: u32,
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
        lambda1: Vec<f64>,
        lambda2: Vec<f64>,
    ) -> Result<SolverState> {
        if depth == 0 || depth > level {
            return Err(Error::Domain(format!("depth {depth} not in [1, {level}]")));
        }
        let (n, m) = (patch_count(level), coefficient_count(level, depth));
        if x.len() != n || z.len() != n || lambda2.len() != n || y.len() != m || lambda1.len() != m
        {
            return Err(Error::Shape(
                "solver state shapes disagree with level and depth".into(),
            ));
        }
        Ok(SolverState {
            level,
            depth,
            x,
            y,
            z,
            lambda1,
            lambda2,
            iter: 0,
            last_rel_change: f64::INFINITY,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn lambda1(&self) -> &[f64] {
        &self.lambda1
    }

    pub fn lambda2(&self) -> &[f64] {
        &self.lambda2
    }

    pub fn x_signal(&self) -> SphericalSignal {
        SphericalSignal::from_values(self.level, self.x.clone()).expect("finite iterate")
    }

    pub fn y_pyramid(&self) -> FrameletPyramid {
        FrameletPyramid::from_channels(self.level, self.depth, vec![self.y.clone()])
            .expect("consistent layout")
    }

    /// `‖F x‖₁` of the current iterate.
    pub fn objective(&self) -> f64 {
        l1(&analyze(&self.x, self.level, self.depth).expect("consistent layout"))
    }
}

fn single_channel(g: &SphericalSignal) -> Result<&SphericalSignal> {
    if g.channel_count() != 1 {
        return Err(Error::Shape(format!(
            "solver steps take one channel, got {}",
            g.channel_count()
        )));
    }
    Ok(g)
}

fn check_mask(g: &SphericalSignal, mask: &Mask) -> Result<()> {
    if mask.level() != g.level() {
        return Err(Error::Shape(format!(
            "mask level {} does not match signal level {}",
            mask.level(),
            g.level()
        )));
    }
    Ok(())
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-iteration record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub iteration: usize,
    /// `‖F x‖₁` after the step.
    pub l1_fx: f64,
    pub rel_change: f64,
    /// `x` equals `g` bitwise on every observed patch.
    pub feasible: bool,
}

/// One ADMM iteration on a single-channel problem.
pub fn admm_step(
    state: &mut SolverState,
    params: &SolverParams,
    mask: &Mask,
    g: &SphericalSignal,
    denoiser: &dyn Denoiser,
) -> Result<StepRecord> {
    let g = single_channel(g)?;
    check_mask(g, mask)?;
    if g.level() != state.level {
        return Err(Error::Shape(
            "signal level does not match solver state".into(),
        ));
    }
    let (level, depth) = (state.level, state.depth);
    let (b1, b2) = (params.beta1, params.beta2);
    let iteration = state.iter + 1;
    let diverged = || Error::Divergence { iteration };

    // y: elementwise shrinkage of F x − Λ₁/β₁.
    let fx = analyze(&state.x, level, depth)?;
    let tau = params.l1_weight / b1;
    for ((y, &f), &l) in state.y.iter_mut().zip(&fx).zip(&state.lambda1) {
        *y = soft_shrink(f - l / b1, tau);
    }

    // z: denoise x − Λ₂/β₂ at noise level √(λ/β₂).
    let noisy: Vec<f64> = state
        .x
        .iter()
        .zip(&state.lambda2)
        .map(|(&x, &l)| x - l / b2)
        .collect();
    if noisy.iter().any(|v| !v.is_finite()) {
        return Err(diverged());
    }
    let noisy = SphericalSignal::from_values(level, noisy)?;
    let z = denoiser.denoise(&noisy, params.sigma())?;
    if !z.same_shape(&noisy) {
        return Err(Error::Shape("denoiser changed the signal shape".into()));
    }
    state.z.copy_from_slice(z.channel(0));

    // x: observed entries copied from g, the rest from the normal equations.
    let weighted: Vec<f64> = state
        .y
        .iter()
        .zip(&state.lambda1)
        .map(|(&y, &l)| b1 * y + l)
        .collect();
    let back = synthesize(&weighted, level, depth)?;
    let x_old = std::mem::take(&mut state.x);
    let gv = g.channel(0);
    state.x = (0..x_old.len())
        .map(|i| {
            if mask.is_observed(i) {
                gv[i]
            } else {
                (back[i] + b2 * state.z[i] + state.lambda2[i]) / (b1 + b2)
            }
        })
        .collect();

    // Multipliers, unit step.
    let fx_new = analyze(&state.x, level, depth)?;
    for ((l, &y), &f) in state.lambda1.iter_mut().zip(&state.y).zip(&fx_new) {
        *l += y - f;
    }
    for ((l, &z), &x) in state.lambda2.iter_mut().zip(&state.z).zip(&state.x) {
        *l += z - x;
    }

    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !(finite(&state.x) && finite(&state.lambda1) && finite(&state.lambda2) && finite(&state.y)) {
        return Err(diverged());
    }

    let diff: f64 = state
        .x
        .iter()
        .zip(&x_old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel_change = diff / norm(&x_old).max(REL_CHANGE_FLOOR);
    state.iter = iteration;
    state.last_rel_change = rel_change;
    let feasible = state
        .x
        .iter()
        .zip(gv)
        .zip(mask.flags())
        .all(|((x, g), &obs)| !obs || x.to_bits() == g.to_bits());
    Ok(StepRecord {
        iteration,
        l1_fx: l1(&fx_new),
        rel_change,
        feasible,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelReport {
    pub channel: usize,
    pub iterations: Vec<StepRecord>,
    /// Stopped because the relative change fell below `rel_tol`.
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub params: SolverParams,
    pub depth: u32,
    pub sigma: f64,
    pub level: u32,
    pub observed: usize,
    pub total: usize,
    pub channels: Vec<ChannelReport>,
    pub wall_time_s: f64,
    /// Quality against ground truth, when one was supplied.
    pub metrics: Option<Quality>,
}

/// Runs ADMM on one channel from the mean-filled start.
pub fn inpaint_channel(
    g: &SphericalSignal,
    mask: &Mask,
    params: &SolverParams,
    denoiser: &dyn Denoiser,
) -> Result<(SolverState, Vec<StepRecord>)> {
    let mut state = SolverState::init(g, mask, params)?;
    let mut records = Vec::with_capacity(params.max_iters);
    for _ in 0..params.max_iters {
        let record = admm_step(&mut state, params, mask, g, denoiser)?;
        records.push(record);
        if record.rel_change < params.rel_tol {
            break;
        }
    }
    Ok((state, records))
}

/// Restores the missing patches of `g`, solving each channel independently.
pub fn inpaint(
    g: &SphericalSignal,
    mask: &Mask,
    params: &SolverParams,
    denoiser: &dyn Denoiser,
) -> Result<(SphericalSignal, RunReport)> {
    params.validate()?;
    check_mask(g, mask)?;
    if mask.observed_count() == 0 {
        return Err(Error::Domain("mask has no observed entries".into()));
    }
    let depth = params.depth_for(g.level())?;
    let start = Instant::now();
    let solved = g
        .split_channels()
        .par_iter()
        .enumerate()
        .map(|(c, channel)| {
            let t = Instant::now();
            let (state, iterations) = inpaint_channel(channel, mask, params, denoiser)?;
            let converged = iterations
                .last()
                .is_some_and(|r| r.rel_change < params.rel_tol);
            let report = ChannelReport {
                channel: c,
                iterations,
                converged,
                wall_time_s: t.elapsed().as_secs_f64(),
            };
            Ok((state.x_signal(), report))
        })
        .collect::<Result<Vec<_>>>()?;
    let (parts, channels): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let out = SphericalSignal::merge_channels(parts)?;
    let report = RunReport {
        params: *params,
        depth,
        sigma: params.sigma(),
        level: g.level(),
        observed: mask.observed_count(),
        total: mask.flags().len(),
        channels,
        wall_time_s: start.elapsed().as_secs_f64(),
        metrics: None,
    };
    Ok((out, report))
}

/// `β₁ ∈ {0.1, …, 1.0}` and `β₂ ∈ {1, …, 5}`.
pub fn beta_grid() -> Vec<(f64, f64)> {
    (1..=10)
        .flat_map(|a| (1..=5).map(move |b| (a as f64 / 10.0, b as f64)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub beta1: f64,
    pub beta2: f64,
    /// `None` when the run diverged.
    pub quality: Option<Quality>,
    pub iterations: usize,
    pub diverged_at: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridReport {
    pub points: Vec<GridPoint>,
    pub best: GridPoint,
}

/// Runs [`inpaint`] over [`beta_grid`] and keeps the highest PSNR against
/// `truth` (first point wins ties). Diverging grid points are recorded and
/// skipped; other errors abort the sweep.
pub fn grid_search(
    g: &SphericalSignal,
    mask: &Mask,
    base: &SolverParams,
    denoiser: &dyn Denoiser,
    truth: &SphericalSignal,
) -> Result<(SphericalSignal, GridReport)> {
    if !truth.same_shape(g) {
        return Err(Error::Shape("ground truth shape differs from input".into()));
    }
    let truth_values: Vec<f64> = truth.iter().collect();
    let runs = beta_grid()
        .into_par_iter()
        .map(|(beta1, beta2)| {
            let params = SolverParams {
                beta1,
                beta2,
                ..*base
            };
            let point = |quality, iterations, diverged_at| GridPoint {
                beta1,
                beta2,
                quality,
                iterations,
                diverged_at,
            };
            match inpaint(g, mask, &params, denoiser) {
                Ok((out, report)) => {
                    let q = quality(&out.iter().collect::<Vec<_>>(), &truth_values)?;
                    let iterations = report
                        .channels
                        .iter()
                        .map(|c| c.iterations.len())
                        .max()
                        .unwrap_or(0);
                    Ok((Some(out), point(Some(q), iterations, None)))
                }
                Err(Error::Divergence { iteration }) => {
                    Ok((None, point(None, iteration, Some(iteration))))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let psnr_of = |p: &GridPoint| p.quality.map_or(f64::NEG_INFINITY, |q| q.psnr_db);
    let best = (0..runs.len())
        .filter(|&i| runs[i].0.is_some())
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if psnr_of(&runs[b].1) >= psnr_of(&runs[i].1) => Some(b),
            _ => Some(i),
        })
        .ok_or(Error::Divergence {
            iteration: base.max_iters,
        })?;
    let points: Vec<GridPoint> = runs.iter().map(|(_, p)| p.clone()).collect();
    let (out, best_point) = runs.into_iter().nth(best).expect("best index in range");
    Ok((
        out.expect("best run converged"),
        GridReport {
            points,
            best: best_point,
        },
    ))
}
