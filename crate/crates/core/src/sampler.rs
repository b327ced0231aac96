//! Brownian paths, occupation measures, smoothed Coulomb path energies, Monte
//! Carlo checks of exponential-moment bounds, and a Metropolis sampler for
//! the Coulomb-tilted path measure.
//!
//! Every stochastic routine takes an explicit seed. Independent paths or
//! chains use the ChaCha stream `index` of that seed, so results do not depend
//! on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::decompose::{peel, PeelParams};
use crate::error::{invalid, Error, Result};
use crate::family::{lambda_profile, metric_from_profiles, MetricParams};
use crate::grid::{Collection, DiscreteMeasure, GridSpec};
use crate::pekar::{profile_to_measure, RadialProfile};
use crate::rate::TestPotential;
use crate::stats::{logsumexp, mean_se, quantile};

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub dim: usize,
    pub dt: f64,
    /// Row-major `(N + 1) × dim`; the first row is the origin.
    pub points: Vec<f64>,
}

impl PathSample {
    pub fn from_points(dim: usize, dt: f64, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) || points.len() / dim < 3 {
            return invalid("a path needs at least 3 points of the given dimension");
        }
        if !(dt > 0.0) {
            return invalid("dt must be positive");
        }
        if points[..dim].iter().any(|x| *x != 0.0) {
            return invalid("paths start at the origin");
        }
        Ok(PathSample { dim, dt, points })
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.point(self.steps())
    }

    /// Same increments, every point moved by `a` (the first point included).
    pub fn translated(&self, a: &[f64]) -> PathSample {
        let mut points = self.points.clone();
        for (i, x) in points.iter_mut().enumerate() {
            *x += a[i % self.dim];
        }
        PathSample {
            dim: self.dim,
            dt: self.dt,
            points,
        }
    }
}

/// `W_{i+1} = W_i + √dt ξ_i` with iid standard normal `ξ_i`.
pub fn sample_path(dim: usize, steps: usize, dt: f64, seed: u64) -> Result<PathSample> {
    sample_path_stream(dim, steps, dt, seed, 0)
}

pub fn sample_path_stream(dim: usize, steps: usize, dt: f64, seed: u64, stream: u64) -> Result<PathSample> {
    if steps < 2 || !(dt > 0.0) || !(1..=3).contains(&dim) {
        return invalid("need steps >= 2, dt > 0 and dim in 1..=3");
    }
    let mut rng = stream_rng(seed, stream);
    Ok(brownian(&mut rng, dim, steps, dt))
}

fn brownian(rng: &mut ChaCha8Rng, dim: usize, steps: usize, dt: f64) -> PathSample {
    let sd = dt.sqrt();
    let mut points = vec![0.0; (steps + 1) * dim];
    for i in 1..=steps {
        for a in 0..dim {
            points[i * dim + a] = points[(i - 1) * dim + a] + sd * normal(rng);
        }
    }
    PathSample { dim, dt, points }
}

/// `L_t`: mass `1/N` in the cell of each of `W_1..W_N`, on `grid` extended as needed.
pub fn occupation_measure(p: &PathSample, grid: &GridSpec) -> Result<DiscreteMeasure> {
    grid.validate()?;
    if grid.dim != p.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: p.dim,
        });
    }
    let d = p.dim;
    let h = grid.spacing;
    let n = p.steps();
    let cells: Vec<Vec<i64>> = (1..=n)
        .map(|i| {
            (0..d)
                .map(|a| ((p.point(i)[a] - grid.origin[a]) / h).floor() as i64)
                .collect()
        })
        .collect();
    let mut lo = vec![0i64; d];
    let mut hi: Vec<i64> = grid.shape.iter().map(|&s| s as i64).collect();
    for c in &cells {
        for a in 0..d {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a] + 1);
        }
    }
    let ext = GridSpec::new(
        h,
        (0..d).map(|a| grid.origin[a] + lo[a] as f64 * h).collect(),
        (0..d).map(|a| (hi[a] - lo[a]) as usize).collect(),
    )?;
    let mut w = vec![0.0; ext.len()];
    let unit = 1.0 / n as f64;
    for c in &cells {
        let idx: Vec<usize> = (0..d).map(|a| (c[a] - lo[a]) as usize).collect();
        w[ext.flatten(&idx)] += unit;
    }
    DiscreteMeasure::new(ext, w)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn v_eps(r2: f64, eps: f64) -> f64 {
    1.0 / (eps * eps + r2).sqrt()
}

/// `(dt²/t) Σ_{i,j=1..N} V_ε(W_i - W_j)`, diagonal included.
pub fn energy_h(p: &PathSample, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::SingularKernel);
    }
    let n = p.steps();
    let rows: Vec<f64> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let wi = p.point(i);
            (i + 1..=n).map(|j| v_eps(dist2(wi, p.point(j)), eps)).sum::<f64>()
        })
        .collect();
    let off: f64 = rows.iter().sum();
    Ok(p.dt / n as f64 * (n as f64 / eps + 2.0 * off))
}

/// `max_y √y / (√(1+y²) (y + √(1+y²)))`, so that `1/r - V_ε(r) <= C √ε r^{-3/2}`.
pub fn y_eps_constant() -> f64 {
    let f = |ly: f64| {
        let y = ly.exp();
        let s = (1.0 + y * y).sqrt();
        y.sqrt() / (s * (y + s))
    };
    let (mut a, mut b) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    f(0.5 * (a + b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YEpsReport {
    pub remainder: f64,
    pub bound: f64,
    pub constant: f64,
}

/// Off-diagonal remainder `(dt²/t) Σ_{i≠j} [1/|W_i-W_j| - V_ε]` and its
/// `C √ε |·|^{-3/2}` bound. Coincident points use the bound at distance `√dt / 2`.
pub fn y_eps_energy(p: &PathSample, eps: f64) -> Result<YEpsReport> {
    if p.dim != 3 {
        return Err(Error::DimensionError(p.dim));
    }
    if !(eps > 0.0) {
        return Err(Error::SingularKernel);
    }
    let c = y_eps_constant();
    let scale = c * eps.sqrt();
    let floor = 0.5 * p.dt.sqrt();
    let n = p.steps();
    let rows: Vec<(f64, f64)> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let wi = p.point(i);
            let mut rem = 0.0;
            let mut bnd = 0.0;
            for j in i + 1..=n {
                let r = dist2(wi, p.point(j)).sqrt();
                if r == 0.0 {
                    let capped = scale * floor.powf(-1.5);
                    rem += capped;
                    bnd += capped;
                } else {
                    rem += 1.0 / r - v_eps(r * r, eps);
                    bnd += scale * r.powf(-1.5);
                }
            }
            (rem, bnd)
        })
        .collect();
    let k = 2.0 * p.dt / n as f64;
    Ok(YEpsReport {
        remainder: k * rows.iter().map(|r| r.0).sum::<f64>(),
        bound: k * rows.iter().map(|r| r.1).sum::<f64>(),
        constant: c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McReport {
    fn from_samples(xs: &[f64], seed: u64) -> Self {
        let (estimate, std_error) = mean_se(xs);
        McReport {
            estimate,
            std_error,
            n_samples: xs.len(),
            seed,
        }
    }
}

/// `E|Z|^{-p}` for a standard normal `Z` in three dimensions, `p < 3`.
pub fn inverse_moment_3d(p: f64) -> f64 {
    2f64.powf(-p / 2.0) * gamma((3.0 - p) / 2.0) / gamma(1.5)
}

/// Below this radius `|W_s|^{-3/2}` is replaced by its conditional mean given `|W_s| < h_min`.
pub const KHASMINSKII_H_MIN: f64 = 1e-3;
/// First node of the refined time grid.
const KHASMINSKII_S0: f64 = 1e-8;
/// Relative step growth near `s = 0`.
const KHASMINSKII_GROWTH: f64 = 0.05;

/// `E[|W_s|^{-3/2} | |W_s| < h]` for `W_s ~ N(0, s I_3)`:
/// `(2s)^{-3/4} γ(3/4, u) / γ(3/2, u)` with `u = h² / 2s`.
pub fn conditional_inverse_moment(s: f64, h: f64) -> f64 {
    let u = h * h / (2.0 * s);
    let ratio = if u > 1e-6 {
        gamma_lr(0.75, u) * gamma(0.75) / (gamma_lr(1.5, u) * gamma(1.5))
    } else {
        // Small-u limit of the incomplete gamma ratio.
        (u.powf(0.75) / 0.75) / (u.powf(1.5) / 1.5)
    };
    (2.0 * s).powf(-0.75) * ratio
}

fn singular_integrand(x: &[f64], capped: f64) -> f64 {
    let r = dist2(x, &[0.0; 3]).sqrt();
    if r < KHASMINSKII_H_MIN {
        capped
    } else {
        r.powf(-1.5)
    }
}

/// Nodes `0, s0, s0(1+κ), ...` growing geometrically until the step reaches `dt_max`, then uniform.
fn refined_time_grid(horizon: f64, dt_max: f64) -> Vec<f64> {
    let mut t = vec![0.0, KHASMINSKII_S0.min(horizon)];
    loop {
        let s = *t.last().unwrap();
        if s >= horizon {
            break;
        }
        let step = (s * KHASMINSKII_GROWTH).min(dt_max);
        t.push((s + step).min(horizon));
    }
    t
}

/// `∫_0^T |W_s|^{-3/2} ds` along one path from `x`, trapezoid on the refined
/// grid; from the origin the first interval contributes its mean `4c s0^{1/4}`.
fn singular_functional(rng: &mut ChaCha8Rng, x: &[f64], times: &[f64], capped: &[f64]) -> f64 {
    let mut w = x.to_vec();
    let at_origin = x.iter().all(|v| *v == 0.0);
    let mut acc = 0.0;
    let mut prev = if at_origin {
        0.0
    } else {
        singular_integrand(&w, capped[0])
    };
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let sd = dt.sqrt();
        for v in w.iter_mut() {
            *v += sd * normal(rng);
        }
        let f = singular_integrand(&w, capped[k]);
        if k == 1 && at_origin {
            acc += 4.0 * inverse_moment_3d(1.5) * times[1].powf(0.25);
        } else {
            acc += 0.5 * dt * (prev + f);
        }
        prev = f;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhasminskiiReport {
    pub lambda: f64,
    pub horizon: f64,
    /// `η̂ = λ max_x E^x ∫ |W|^{-3/2}`.
    pub eta: McReport,
    pub starts: Vec<Vec<f64>>,
    pub eta_by_start: Vec<McReport>,
    /// `E^0 exp(λ ∫ |W|^{-3/2})`.
    pub exp_moment: McReport,
    /// `E^0 ∫ |W|^{-3/2}` (without `λ`).
    pub anchor: McReport,
    /// `4 E|Z|^{-3/2} T^{1/4}`.
    pub anchor_exact: f64,
    /// `1 / (1 - η̂)`, infinite when `η̂ >= 1`.
    pub bound: f64,
    pub eta_too_large: bool,
}

impl KhasminskiiReport {
    pub fn bound_holds(&self) -> bool {
        !self.eta_too_large && self.exp_moment.estimate <= self.bound + 3.0 * self.exp_moment.std_error
    }

    pub fn anchor_z(&self) -> f64 {
        (self.anchor.estimate - self.anchor_exact) / self.anchor.std_error
    }
}

/// Monte Carlo check of the Khasminskii bound `E exp(A) <= 1/(1 - sup_x E^x A)`
/// for `A = λ ∫_0^T |W_s|^{-3/2} ds`, `T = steps · dt`.
pub fn khasminskii_check(n_paths: usize, steps: usize, dt: f64, lambda: f64, seed: u64) -> Result<KhasminskiiReport> {
    if n_paths < 2 || steps < 1 || !(dt > 0.0) || !(lambda >= 0.0) {
        return invalid("need n_paths >= 2, steps >= 1, dt > 0, lambda >= 0");
    }
    let horizon = steps as f64 * dt;
    let times = refined_time_grid(horizon, dt);
    // The origin-centered conditional mean is exact for the start at 0.
    let mut capped: Vec<f64> = times[1..]
        .iter()
        .map(|&s| conditional_inverse_moment(s, KHASMINSKII_H_MIN))
        .collect();
    capped.insert(0, 2.0 * KHASMINSKII_H_MIN.powf(-1.5));
    let starts = vec![vec![0.0; 3], vec![0.5, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
    let mut per_start = Vec::new();
    let mut origin_raw = Vec::new();
    for (s, x) in starts.iter().enumerate() {
        let raw: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, (s * n_paths + i) as u64);
                singular_functional(&mut rng, x, &times, &capped)
            })
            .collect();
        let scaled: Vec<f64> = raw.iter().map(|a| lambda * a).collect();
        per_start.push(McReport::from_samples(&scaled, seed));
        if s == 0 {
            origin_raw = raw;
        }
    }
    let best = per_start
        .iter()
        .cloned()
        .fold(None::<McReport>, |b, r| match b {
            Some(b) if b.estimate >= r.estimate => Some(b),
            _ => Some(r),
        })
        .unwrap();
    let exp: Vec<f64> = origin_raw.iter().map(|a| (lambda * a).exp()).collect();
    let eta_too_large = best.estimate >= 1.0;
    Ok(KhasminskiiReport {
        lambda,
        horizon,
        bound: if eta_too_large {
            f64::INFINITY
        } else {
            1.0 / (1.0 - best.estimate)
        },
        eta: best,
        starts,
        eta_by_start: per_start,
        exp_moment: McReport::from_samples(&exp, seed),
        anchor: McReport::from_samples(&origin_raw, seed),
        anchor_exact: 4.0 * inverse_moment_3d(1.5) * horizon.powf(0.25),
        eta_too_large,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkBoundReport {
    /// `E^0 exp ∫ (-½Δg/g)(W_s) ds`.
    pub estimate: McReport,
    /// `g(0) / c`.
    pub bound: f64,
    /// `E^0 [exp ∫ (-½Δg/g) · g(W_t)] / g(0)`, which is 1 for exact integration.
    pub martingale: McReport,
}

impl FkBoundReport {
    pub fn holds(&self) -> bool {
        self.estimate.estimate <= self.bound + 3.0 * self.estimate.std_error
    }
}

/// Monte Carlo check of `E^0 exp ∫_0^t (-½Δg/g)(W_s) ds <= g(0)/c` with a left Riemann sum.
pub fn fk_bound_check(
    g: &TestPotential,
    dim: usize,
    n_paths: usize,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<FkBoundReport> {
    g.validate(dim)?;
    if n_paths < 2 || steps < 1 || !(dt > 0.0) {
        return invalid("need n_paths >= 2, steps >= 1, dt > 0");
    }
    let origin = vec![0.0; dim];
    let g0 = g.eval(&origin);
    // Stencil step for the Laplacian, independent of the time step.
    let h = 1e-3;
    let sd = dt.sqrt();
    let pairs: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut w = origin.clone();
            let mut acc = 0.0;
            for _ in 0..steps {
                if !g.bumps.is_empty() {
                    acc += g.integrand(&w, h) * dt;
                }
                for v in w.iter_mut() {
                    *v += sd * normal(&mut rng);
                }
            }
            let e = acc.exp();
            (e, e * g.eval(&w) / g0)
        })
        .collect();
    let est: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mart: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(FkBoundReport {
        estimate: McReport::from_samples(&est, seed),
        bound: g0 / g.c,
        martingale: McReport::from_samples(&mart, seed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TiltConfig {
    pub eps: f64,
    pub beta: f64,
    /// Probability of a bridge-regrow move; the rest are endpoint pivots.
    pub bridge_weight: f64,
    pub pivot_weight: f64,
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for TiltConfig {
    fn default() -> Self {
        TiltConfig {
            eps: 0.1,
            beta: 1.0,
            bridge_weight: 0.8,
            pivot_weight: 0.2,
            n_sweeps: 400,
            burn_in: 100,
            thin: 50,
            seed: 0,
        }
    }
}

impl TiltConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::SingularKernel);
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return invalid("beta must be finite and nonnegative");
        }
        if self.bridge_weight < 0.0
            || self.pivot_weight < 0.0
            || (self.bridge_weight + self.pivot_weight - 1.0).abs() > 1e-12
        {
            return invalid("move weights must be nonnegative and sum to 1");
        }
        if self.thin == 0 || self.n_sweeps <= self.burn_in {
            return invalid("need thin >= 1 and n_sweeps > burn_in");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Bridge,
    Pivot,
}

/// Metropolis chain on paths pinned at the origin, stationary for
/// `exp(β H_ε) dP` with `P` the discretized Wiener measure.
pub struct TiltedChain {
    cfg: TiltConfig,
    path: PathSample,
    energy: f64,
    rng: ChaCha8Rng,
    max_len: usize,
    pub accepted: [u64; 2],
    pub proposed: [u64; 2],
}

impl TiltedChain {
    pub fn new(cfg: &TiltConfig, dim: usize, steps: usize, dt: f64, chain: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, chain);
        if steps < 3 || !(dt > 0.0) {
            return invalid("need steps >= 3 and dt > 0");
        }
        let path = brownian(&mut rng, dim, steps, dt);
        let energy = energy_h(&path, cfg.eps)?;
        Ok(TiltedChain {
            cfg: cfg.clone(),
            path,
            energy,
            rng,
            max_len: (steps / 4).max(2),
            accepted: [0; 2],
            proposed: [0; 2],
        })
    }

    pub fn path(&self) -> &PathSample {
        &self.path
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Moves per sweep, so that a sweep touches about `N` points.
    pub fn moves_per_sweep(&self) -> usize {
        let mean_len = (2 + self.max_len) as f64 / 2.0;
        ((self.path.steps() as f64 / mean_len).ceil() as usize).max(1)
    }

    /// Change of `H_ε` when the points `lo..hi` are replaced by `new`.
    fn delta_h(&self, lo: usize, hi: usize, new: &[f64]) -> f64 {
        let p = &self.path;
        let d = p.dim;
        let n = p.steps();
        let eps = self.cfg.eps;
        let mut acc = 0.0;
        for (k, i) in (lo..hi).enumerate() {
            let old_i = p.point(i);
            let new_i = &new[k * d..(k + 1) * d];
            for j in 1..=n {
                if j >= lo && j < hi {
                    continue;
                }
                let wj = p.point(j);
                acc += v_eps(dist2(new_i, wj), eps) - v_eps(dist2(old_i, wj), eps);
            }
            for (l, j) in (lo..hi).enumerate().skip(k + 1) {
                let new_j = &new[l * d..(l + 1) * d];
                acc += v_eps(dist2(new_i, new_j), eps) - v_eps(dist2(old_i, p.point(j)), eps);
            }
        }
        2.0 * p.dt / n as f64 * acc
    }

    fn propose(&mut self) -> (Move, usize, usize, Vec<f64>) {
        let n = self.path.steps();
        let d = self.path.dim;
        let sd = self.path.dt.sqrt();
        let len = self.rng.random_range(2..=self.max_len);
        let mv = if self.rng.random::<f64>() < self.cfg.bridge_weight {
            Move::Bridge
        } else {
            Move::Pivot
        };
        match mv {
            Move::Bridge => {
                let a = self.rng.random_range(0..=n - len);
                let b = a + len;
                let mut new = Vec::with_capacity((len - 1) * d);
                let mut prev = self.path.point(a).to_vec();
                let end = self.path.point(b).to_vec();
                for k in 1..len {
                    // Bridge from `prev` at step k-1 to `end` at step len.
                    let remaining = (len - k + 1) as f64;
                    let frac = 1.0 / remaining;
                    let var = (remaining - 1.0) / remaining;
                    for x in 0..d {
                        let mean = prev[x] + frac * (end[x] - prev[x]);
                        prev[x] = mean + sd * var.sqrt() * normal(&mut self.rng);
                    }
                    new.extend_from_slice(&prev);
                }
                (mv, a + 1, b, new)
            }
            Move::Pivot => {
                let a = n - len;
                let mut prev = self.path.point(a).to_vec();
                let mut new = Vec::with_capacity(len * d);
                for _ in 0..len {
                    for v in prev.iter_mut() {
                        *v += sd * normal(&mut self.rng);
                    }
                    new.extend_from_slice(&prev);
                }
                (mv, a + 1, n + 1, new)
            }
        }
    }

    /// One Metropolis step; returns whether the proposal was accepted.
    pub fn step(&mut self) -> bool {
        let (mv, lo, hi, new) = self.propose();
        let slot = mv as usize;
        self.proposed[slot] += 1;
        let dh = self.delta_h(lo, hi, &new);
        let log_alpha = self.cfg.beta * dh;
        let accept = log_alpha >= 0.0 || self.rng.random::<f64>() < log_alpha.exp();
        if accept {
            let d = self.path.dim;
            self.path.points[lo * d..hi * d].copy_from_slice(&new);
            self.energy += dh;
            self.accepted[slot] += 1;
        }
        accept
    }

    pub fn sweep(&mut self) {
        for _ in 0..self.moves_per_sweep() {
            self.step();
        }
    }

    /// Recompute the energy from scratch, removing accumulated rounding.
    pub fn refresh_energy(&mut self) {
        self.energy = energy_h(&self.path, self.cfg.eps).expect("eps validated");
    }

    pub fn acceptance_rates(&self) -> [f64; 2] {
        [0, 1].map(|k| {
            if self.proposed[k] == 0 {
                0.0
            } else {
                self.accepted[k] as f64 / self.proposed[k] as f64
            }
        })
    }
}

/// Metropolis acceptance probability for a prior-reversible proposal.
pub fn acceptance_probability(beta: f64, h_old: f64, h_new: f64) -> f64 {
    (beta * (h_new - h_old)).exp().min(1.0)
}

/// Log density of the Brownian bridge proposal for interior points of a segment.
pub fn bridge_log_density(start: &[f64], interior: &[f64], end: &[f64], dt: f64) -> f64 {
    let d = start.len();
    let len = interior.len() / d + 1;
    let mut prev = start.to_vec();
    let mut acc = 0.0;
    for k in 1..len {
        let remaining = (len - k + 1) as f64;
        let var = dt * (remaining - 1.0) / remaining;
        let cur = &interior[(k - 1) * d..k * d];
        for x in 0..d {
            let mean = prev[x] + (end[x] - prev[x]) / remaining;
            acc += -0.5 * (cur[x] - mean).powi(2) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        }
        prev = cur.to_vec();
    }
    acc
}

/// Log density of the discretized Wiener measure of a pinned path.
pub fn wiener_log_density(p: &PathSample) -> f64 {
    let d = p.dim;
    let mut acc = 0.0;
    for i in 1..=p.steps() {
        for x in 0..d {
            let z = p.point(i)[x] - p.point(i - 1)[x];
            acc += -0.5 * z * z / p.dt - 0.5 * (2.0 * std::f64::consts::PI * p.dt).ln();
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain: u64,
    pub samples: Vec<PathSample>,
    pub energies: Vec<f64>,
    pub acceptance: [f64; 2],
}

/// Run one chain, emitting the state every `thin` sweeps after `burn_in`.
pub fn run_chain(cfg: &TiltConfig, dim: usize, steps: usize, dt: f64, chain: u64) -> Result<ChainOutput> {
    let mut c = TiltedChain::new(cfg, dim, steps, dt, chain)?;
    let mut samples = Vec::new();
    let mut energies = Vec::new();
    for s in 1..=cfg.n_sweeps {
        c.sweep();
        if s > cfg.burn_in && (s - cfg.burn_in).is_multiple_of(cfg.thin) {
            c.refresh_energy();
            samples.push(c.path().clone());
            energies.push(c.energy());
        }
    }
    Ok(ChainOutput {
        chain,
        samples,
        energies,
        acceptance: c.acceptance_rates(),
    })
}

/// Independent chains `0..chains`, in chain order.
pub fn tilted_sampler(cfg: &TiltConfig, dim: usize, steps: usize, dt: f64, chains: usize) -> Result<Vec<ChainOutput>> {
    (0..chains as u64)
        .into_par_iter()
        .map(|c| run_chain(cfg, dim, steps, dt, c))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeRow {
    pub t: f64,
    pub steps: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean_energy: f64,
    pub distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeParams {
    pub dt: f64,
    pub chains: usize,
    pub grid_h: f64,
    pub metric: MetricParams,
    pub peel: PeelParams,
}

/// For each horizon, sample tilted paths, peel their occupation measures and
/// record the metric distance of the resulting collections to `{μ₀}`.
pub fn tube_experiment(
    cfg: &TiltConfig,
    t_list: &[f64],
    params: &TubeParams,
    profile: &RadialProfile,
) -> Result<Vec<TubeRow>> {
    if t_list.is_empty() || t_list.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("t_list must be nonempty and increasing");
    }
    let h = params.grid_h;
    // Cubes inscribing this ball lose well under the 1e-3 truncation limit.
    let half = (profile.mass_radius(1.0 - 1e-5) / h).ceil() as usize + 1;
    let (mu0, _) = profile_to_measure(profile, &GridSpec::centered(3, half, h)?)?;
    let target = lambda_profile(&Collection::singleton(mu0), 3, &params.metric)?;
    let base = GridSpec::centered(3, 1, h)?;
    let mut rows = Vec::new();
    for &t in t_list {
        let steps = (t / params.dt).round() as usize;
        let chains = tilted_sampler(cfg, 3, steps, params.dt, params.chains)?;
        let samples: Vec<(&PathSample, f64)> = chains
            .iter()
            .flat_map(|c| c.samples.iter().zip(c.energies.iter().copied()))
            .collect();
        let distances = samples
            .par_iter()
            .map(|(p, _)| {
                let occ = occupation_measure(p, &base)?;
                let xi = peel(&occ, &params.peel)?.collection()?;
                let prof = lambda_profile(&xi, 3, &params.metric)?;
                Ok(metric_from_profiles(&prof, &target, &params.metric).value)
            })
            .collect::<Result<Vec<f64>>>()?;
        let energies: Vec<f64> = samples.iter().map(|s| s.1).collect();
        rows.push(TubeRow {
            t,
            steps,
            n_samples: distances.len(),
            mean: mean_se(&distances).0,
            median: quantile(&distances, 0.5),
            q25: quantile(&distances, 0.25),
            q75: quantile(&distances, 0.75),
            mean_energy: mean_se(&energies).0,
            distances,
        });
    }
    Ok(rows)
}

/// `(1/t) log mean exp(β H_ε)` over independent Brownian paths, with a
/// delete-one-block jackknife error from 20 blocks.
pub fn free_energy_estimate(cfg: &TiltConfig, t: f64, dt: f64, n_paths: usize, seed: u64) -> Result<McReport> {
    cfg.validate()?;
    if !(t > 0.0) || !(dt > 0.0) || n_paths < 20 {
        return invalid("need t > 0, dt > 0 and at least 20 paths");
    }
    let steps = (t / dt).round() as usize;
    if cfg.beta == 0.0 {
        return Ok(McReport {
            estimate: 0.0,
            std_error: 0.0,
            n_samples: n_paths,
            seed,
        });
    }
    let logs = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let p = sample_path_stream(3, steps, dt, seed, i as u64)?;
            Ok(cfg.beta * energy_h(&p, cfg.eps)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let est = |xs: &[f64]| (logsumexp(xs) - (xs.len() as f64).ln()) / t;
    let full = est(&logs);
    let blocks = 20;
    let size = n_paths / blocks;
    let jack: Vec<f64> = (0..blocks)
        .map(|b| {
            let rest: Vec<f64> = logs
                .iter()
                .enumerate()
                .filter(|(i, _)| i / size != b || *i >= blocks * size)
                .map(|(_, x)| *x)
                .collect();
            est(&rest)
        })
        .collect();
    let jm = jack.iter().sum::<f64>() / blocks as f64;
    let var = (blocks as f64 - 1.0) / blocks as f64 * jack.iter().map(|x| (x - jm).powi(2)).sum::<f64>();
    Ok(McReport {
        estimate: full,
        std_error: var.sqrt(),
        n_samples: n_paths,
        seed,
    })
}
