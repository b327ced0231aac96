//! Radial solver for `sup { ∫∫ ψ²(x)ψ²(y)/|x-y| dx dy - ½‖∇ψ‖² : ‖ψ‖² = m }` in three dimensions.
//!
//! Profiles live on a uniform radial grid `r_i = i Δr` with Dirichlet
//! condition `ψ(r_N) = 0`. Radial integrals use trapezoid weights
//! `W_i = 4π r_i² w_i`. The Coulomb term uses the shell theorem, which on the
//! grid reads `D = Σ_ij W_i ρ_i W_j ρ_j / max(r_i, r_j)`. The kinetic term
//! uses staggered differences so that it is a positive-definite quadratic
//! form without an odd-even null space.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::grid::{DiscreteMeasure, GridSpec};

pub const DEFAULT_R_MAX: f64 = 20.0;
pub const DEFAULT_POINTS: usize = 2000;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub r_grid: Vec<f64>,
    pub psi: Vec<f64>,
    pub mass: f64,
}

impl RadialProfile {
    /// Uniform grid with `n + 1` nodes on `[0, r_max]`.
    pub fn from_fn(n: usize, r_max: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(r_max > 0.0) {
            return invalid("radial grid needs at least 3 nodes and positive extent");
        }
        let r_grid: Vec<f64> = (0..=n).map(|i| r_max * i as f64 / n as f64).collect();
        let psi: Vec<f64> = r_grid.iter().map(|&r| f(r)).collect();
        Self::new(r_grid, psi)
    }

    pub fn new(r_grid: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if r_grid.len() != psi.len() || r_grid.len() < 3 {
            return invalid("r_grid and psi must match and hold at least 3 nodes");
        }
        if r_grid[0] != 0.0 || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("r_grid must start at 0 and increase");
        }
        if psi.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return invalid("psi must be finite and nonnegative");
        }
        let mut p = RadialProfile { r_grid, psi, mass: 0.0 };
        p.mass = p.weights().iter().zip(&p.psi).map(|(w, x)| w * x * x).sum();
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    /// Trapezoid volume weights `4π r_i² w_i`.
    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.r_grid)
    }

    /// Same shape, rescaled to the requested mass.
    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        if !(self.mass > 0.0) {
            return invalid("cannot rescale the zero profile");
        }
        let c = (mass / self.mass).sqrt();
        Self::new(self.r_grid.clone(), self.psi.iter().map(|p| p * c).collect())
    }

    /// `ψ(r)` by linear interpolation, zero beyond the grid.
    pub fn value_at(&self, r: f64) -> f64 {
        let n = self.r_grid.len();
        if r >= self.r_grid[n - 1] {
            return 0.0;
        }
        let j = self.r_grid.partition_point(|&x| x <= r).max(1);
        let (r0, r1) = (self.r_grid[j - 1], self.r_grid[j]);
        let t = (r - r0) / (r1 - r0);
        self.psi[j - 1] + t * (self.psi[j] - self.psi[j - 1])
    }

    /// Smallest grid radius enclosing at least `frac` of the mass.
    pub fn mass_radius(&self, frac: f64) -> f64 {
        let mut acc = 0.0;
        for ((r, w), x) in self.r_grid.iter().zip(self.weights()).zip(&self.psi) {
            acc += w * x * x;
            if acc >= frac * self.mass {
                return *r;
            }
        }
        self.r_max()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,psi\n");
        for (r, p) in self.r_grid.iter().zip(&self.psi) {
            let _ = writeln!(s, "{r},{p}");
        }
        s
    }
}

fn trapezoid_weights(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { r[i] - r[i - 1] } else { 0.0 };
            let right = if i + 1 < n { r[i + 1] - r[i] } else { 0.0 };
            4.0 * PI * r[i] * r[i] * 0.5 * (left + right)
        })
        .collect()
}

/// Newtonian potential `Φ_i = Σ_j W_j ρ_j / max(r_i, r_j)` in O(N).
fn potential(r: &[f64], wts: &[f64], rho: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut inner = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += wts[i] * rho[i];
        inner[i] = acc;
    }
    let mut outer = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        outer[i] = acc;
        if r[i] > 0.0 {
            acc += wts[i] * rho[i] / r[i];
        }
    }
    (0..n)
        .map(|i| {
            if r[i] > 0.0 {
                inner[i] / r[i] + outer[i]
            } else {
                outer[i]
            }
        })
        .collect()
}

/// `∫∫ ψ²(x) ψ²(y) / |x - y| dx dy`.
pub fn coulomb_self_energy(p: &RadialProfile) -> f64 {
    let w = p.weights();
    let rho: Vec<f64> = p.psi.iter().map(|x| x * x).collect();
    let phi = potential(&p.r_grid, &w, &rho);
    (0..p.len()).map(|i| w[i] * rho[i] * phi[i]).sum()
}

/// `½ ‖∇ψ‖²` with midpoint differences `½ · 4π Σ ((ψ_{i+1}-ψ_i)/Δr_i)² r_{i+½}² Δr_i`.
pub fn kinetic_energy(p: &RadialProfile) -> f64 {
    let r = &p.r_grid;
    (0..p.len() - 1)
        .map(|i| {
            let dr = r[i + 1] - r[i];
            let mid = 0.5 * (r[i] + r[i + 1]);
            let d = (p.psi[i + 1] - p.psi[i]) / dr;
            2.0 * PI * d * d * mid * mid * dr
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PekarResult {
    pub mass: f64,
    pub energy: f64,
    pub coulomb_term: f64,
    pub kinetic_term: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Set when the monotone rearrangement had to be applied.
    pub rearranged: bool,
    pub r_grid: Vec<f64>,
    pub psi: Vec<f64>,
}

impl PekarResult {
    pub fn profile(&self) -> RadialProfile {
        RadialProfile::new(self.r_grid.clone(), self.psi.clone()).expect("solver output is a valid profile")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PekarParams {
    pub points: usize,
    pub r_max: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PekarParams {
    fn default() -> Self {
        PekarParams {
            points: DEFAULT_POINTS,
            r_max: DEFAULT_R_MAX,
            tol: 1e-6,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// Symmetric tridiagonal matrix stored by diagonals.
#[derive(Clone, Debug)]
struct Tridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiag {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Thomas algorithm; the matrix must be positive definite.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }
}

/// Problem data on the free nodes `0..N` (the last node is pinned to zero).
struct Problem {
    r: Vec<f64>,
    w: Vec<f64>,
    /// Stiffness `S` with `K = ½ ψᵀ S ψ`.
    stiff: Tridiag,
}

impl Problem {
    fn new(r_grid: &[f64]) -> Self {
        let w_full = trapezoid_weights(r_grid);
        let n = r_grid.len() - 1;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            // Edge (i, i+1); node i+1 may be the pinned boundary.
            let dr = r_grid[i + 1] - r_grid[i];
            let mid = 0.5 * (r_grid[i] + r_grid[i + 1]);
            let k = 4.0 * PI * mid * mid / dr;
            diag[i] += k;
            if i + 1 < n {
                diag[i + 1] += k;
                off[i] -= k;
            }
        }
        Problem {
            r: r_grid[..n].to_vec(),
            w: w_full[..n].to_vec(),
            stiff: Tridiag { diag, off },
        }
    }

    fn mass(&self, psi: &[f64]) -> f64 {
        self.w.iter().zip(psi).map(|(w, x)| w * x * x).sum()
    }

    fn phi(&self, psi: &[f64]) -> Vec<f64> {
        let rho: Vec<f64> = psi.iter().map(|x| x * x).collect();
        potential(&self.r, &self.w, &rho)
    }

    /// `(E, D, K, ∇E)`.
    fn energy_grad(&self, psi: &[f64]) -> (f64, f64, f64, Vec<f64>) {
        let phi = self.phi(psi);
        let d: f64 = (0..psi.len()).map(|i| self.w[i] * psi[i] * psi[i] * phi[i]).sum();
        let sp = self.stiff.apply(psi);
        let k = 0.5 * psi.iter().zip(&sp).map(|(a, b)| a * b).sum::<f64>();
        let grad = (0..psi.len())
            .map(|i| 4.0 * self.w[i] * phi[i] * psi[i] - sp[i])
            .collect();
        (d - k, d, k, grad)
    }

    fn precond(&self) -> Tridiag {
        let mut p = self.stiff.clone();
        for (d, w) in p.diag.iter_mut().zip(&self.w) {
            *d += w;
        }
        p
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rescale(psi: &mut [f64], current: f64, target: f64) {
    let c = (target / current).sqrt();
    psi.iter_mut().for_each(|x| *x *= c);
}

/// Enforce nonincreasing values after the first local maximum; returns whether anything changed.
fn monotone_rearrange(psi: &mut [f64]) -> bool {
    let peak = (1..psi.len()).find(|&i| psi[i] < psi[i - 1]).map_or(0, |i| i - 1);
    let mut changed = false;
    for i in peak + 1..psi.len() {
        if psi[i] > psi[i - 1] {
            psi[i] = psi[i - 1];
            changed = true;
        }
    }
    changed
}

/// Sobolev-preconditioned projected gradient ascent on the mass sphere.
///
/// The ascent direction is `P⁻¹∇E` projected onto the tangent space of
/// `ψᵀWψ = m` in the `P` metric, with `P = W + S`. Steps are retracted by
/// rescaling and accepted under an Armijo condition, so the energy sequence
/// is nondecreasing.
pub fn solve_pekar(mass: f64, params: &PekarParams) -> Result<PekarResult> {
    solve_pekar_traced(mass, params).map(|(r, _)| r)
}

/// [`solve_pekar`] plus the accepted energy after every iteration.
pub fn solve_pekar_traced(mass: f64, params: &PekarParams) -> Result<(PekarResult, Vec<f64>)> {
    if !(mass > 0.0 && mass <= 1.0) {
        return invalid("mass must lie in (0, 1]");
    }
    if params.points < 500 {
        return invalid("at least 500 radial points are required");
    }
    let init = RadialProfile::from_fn(params.points, params.r_max, |r| (-r * r / 2.0).exp())?;
    let prob = Problem::new(&init.r_grid);
    let pre = prob.precond();
    let n = prob.r.len();
    let mut psi = init.psi[..n].to_vec();
    let m0 = prob.mass(&psi);
    rescale(&mut psi, m0, mass);
    let (mut e, _, _, mut grad) = prob.energy_grad(&psi);
    let mut trace = vec![e];
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let wpsi: Vec<f64> = prob.w.iter().zip(&psi).map(|(w, x)| w * x).collect();
    let mut pinv_wpsi = pre.solve(&wpsi);
    let mut wpsi = wpsi;
    while iterations < params.max_iterations {
        let pg = pre.solve(&grad);
        let alpha = dot(&wpsi, &pg) / dot(&wpsi, &pinv_wpsi);
        let dir: Vec<f64> = pg.iter().zip(&pinv_wpsi).map(|(a, b)| a - alpha * b).collect();
        let slope = dot(&grad, &dir);
        residual = slope.max(0.0).sqrt() / e.abs().max(1e-300).sqrt();
        if residual < params.tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<f64> = psi.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            let mc = prob.mass(&cand);
            rescale(&mut cand, mc, mass);
            let (ec, _, _, gc) = prob.energy_grad(&cand);
            if ec >= e + 1e-4 * step * slope {
                psi = cand;
                e = ec;
                grad = gc;
                accepted = true;
                step = (step * 2.0).min(1e3);
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        trace.push(e);
        wpsi = prob.w.iter().zip(&psi).map(|(w, x)| w * x).collect();
        pinv_wpsi = pre.solve(&wpsi);
    }
    psi.iter_mut().for_each(|x| *x = x.abs());
    let rearranged = monotone_rearrange(&mut psi);
    if rearranged {
        let mc = prob.mass(&psi);
        rescale(&mut psi, mc, mass);
    }
    psi.push(0.0);
    let profile = RadialProfile::new(init.r_grid.clone(), psi)?;
    let coulomb_term = coulomb_self_energy(&profile);
    let kinetic_term = kinetic_energy(&profile);
    Ok((
        PekarResult {
            mass: profile.mass,
            energy: coulomb_term - kinetic_term,
            coulomb_term,
            kinetic_term,
            iterations,
            residual,
            converged,
            rearranged,
            r_grid: profile.r_grid,
            psi: profile.psi,
        },
        trace,
    ))
}

/// Euler-Lagrange fixed point: repeatedly replace `ψ` by the ground state of
/// `S - 4WΦ[ψ]` (generalized eigenproblem against `W`), damped by averaging.
/// Used as an independent cross-check of [`solve_pekar`].
pub fn solve_pekar_fixed_point(mass: f64, params: &PekarParams) -> Result<PekarResult> {
    if !(mass > 0.0 && mass <= 1.0) {
        return invalid("mass must lie in (0, 1]");
    }
    let init = RadialProfile::from_fn(params.points, params.r_max, |r| (-r * r / 2.0).exp())?;
    let prob = Problem::new(&init.r_grid);
    let n = prob.r.len();
    let mut psi = init.psi[..n].to_vec();
    let m0 = prob.mass(&psi);
    rescale(&mut psi, m0, mass);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        iterations += 1;
        let phi = prob.phi(&psi);
        let vmax = phi.iter().copied().fold(0.0, f64::max);
        let shift = -4.0 * vmax - 1.0;
        let mut op = prob.stiff.clone();
        for i in 0..n {
            op.diag[i] -= 4.0 * prob.w[i] * phi[i] + shift * prob.w[i];
        }
        let mut v = psi.clone();
        for _ in 0..500 {
            let rhs: Vec<f64> = prob.w.iter().zip(&v).map(|(w, x)| w * x).collect();
            let mut next = op.solve(&rhs);
            let mn = prob.mass(&next);
            rescale(&mut next, mn, mass);
            let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if diff < 1e-13 {
                break;
            }
        }
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let mut next: Vec<f64> = psi.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let mn = prob.mass(&next);
        rescale(&mut next, mn, mass);
        residual = next.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        psi = next;
        if residual < params.tol {
            converged = true;
            break;
        }
    }
    psi.iter_mut().for_each(|x| *x = x.abs());
    psi.push(0.0);
    let profile = RadialProfile::new(init.r_grid, psi)?;
    let coulomb_term = coulomb_self_energy(&profile);
    let kinetic_term = kinetic_energy(&profile);
    Ok(PekarResult {
        mass: profile.mass,
        energy: coulomb_term - kinetic_term,
        coulomb_term,
        kinetic_term,
        iterations,
        residual,
        converged,
        rearranged: false,
        r_grid: profile.r_grid,
        psi: profile.psi,
    })
}

/// Sample `ψ²` on a 3-d grid around its center; returns the measure
/// renormalized to the profile mass and the relative mass lost to truncation.
pub fn profile_to_measure(p: &RadialProfile, grid: &GridSpec) -> Result<(DiscreteMeasure, f64)> {
    grid.validate()?;
    if grid.dim != 3 {
        return Err(Error::DimensionError(grid.dim));
    }
    if !(p.mass > 0.0) {
        return invalid("profile has zero mass");
    }
    let center: Vec<f64> = (0..3)
        .map(|a| grid.origin[a] + 0.5 * grid.shape[a] as f64 * grid.spacing)
        .collect();
    let vol = grid.cell_volume();
    let mut w: Vec<f64> = (0..grid.len())
        .map(|flat| {
            let x = grid.cell_center(&grid.unflatten(flat));
            let r = x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let v = p.value_at(r);
            v * v * vol
        })
        .collect();
    let captured: f64 = w.iter().sum();
    let lost = 1.0 - captured / p.mass;
    if lost > 1e-3 {
        return Err(Error::GridTooSmall { lost });
    }
    let c = p.mass / captured;
    w.iter_mut().for_each(|x| *x *= c);
    Ok((DiscreteMeasure::new(grid.clone(), w)?, lost))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> PekarParams {
        PekarParams {
            points: 800,
            ..Default::default()
        }
    }

    #[test]
    fn gaussian_kinetic_energy() {
        // ψ² = N(0, I_3) density: ½‖∇ψ‖² = 3/8.
        let c = (2.0 * PI).powf(-0.75);
        let p = RadialProfile::from_fn(4000, 20.0, |r| c * (-r * r / 4.0).exp()).unwrap();
        assert!((p.mass - 1.0).abs() < 1e-6);
        assert!((kinetic_energy(&p) - 0.375).abs() / 0.375 < 0.01);
    }

    #[test]
    fn uniform_ball_coulomb_energy() {
        let (m, rad): (f64, f64) = (0.7, 2.0);
        let dens = (3.0 * m / (4.0 * PI * rad.powi(3))).sqrt();
        let p = RadialProfile::from_fn(2000, 4.0, |r| if r < rad { dens } else { 0.0 }).unwrap();
        let p = p.with_mass(m).unwrap();
        // Full double integral: E|X - Y|^{-1} = 6/(5R) for X, Y uniform in the ball.
        let exact = 1.2 * m * m / rad;
        let e = coulomb_self_energy(&p);
        assert!((e - exact).abs() / exact < 5e-3, "{e} vs {exact}");
    }

    #[test]
    fn uniform_ball_energy_against_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let rad: f64 = 1.5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut ball = || loop {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-rad..rad));
            if x.iter().map(|v| v * v).sum::<f64>() < rad * rad {
                return x;
            }
        };
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let (x, y) = (ball(), ball());
            let v = 1.0 / (0..3).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>().sqrt();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let dens = (3.0 / (4.0 * PI * rad.powi(3))).sqrt();
        let p = RadialProfile::from_fn(2000, 3.0, |r| if r < rad { dens } else { 0.0 }).unwrap();
        let p = p.with_mass(1.0).unwrap();
        let e = coulomb_self_energy(&p);
        assert!((e - mean).abs() < 4.0 * se + 5e-3 * mean, "{e} vs {mean} ± {se}");
    }

    #[test]
    fn dilation_scaling() {
        let base = |r: f64| (-r * r / 2.0).exp() * (1.0 + 0.3 * r);
        let p = RadialProfile::from_fn(4000, 30.0, base).unwrap();
        let sigma: f64 = 1.5;
        let q = RadialProfile::from_fn(4000, 30.0, |r| sigma.powf(1.5) * base(sigma * r)).unwrap();
        assert!((q.mass - p.mass).abs() / p.mass < 1e-6);
        let dc = coulomb_self_energy(&q) / coulomb_self_energy(&p);
        let dk = kinetic_energy(&q) / kinetic_energy(&p);
        assert!((dc - sigma).abs() / sigma < 1e-3);
        assert!((dk - sigma * sigma).abs() / (sigma * sigma) < 1e-3);
    }

    #[test]
    fn zero_profile() {
        let p = RadialProfile::from_fn(100, 5.0, |_| 0.0).unwrap();
        assert_eq!(coulomb_self_energy(&p), 0.0);
        assert_eq!(kinetic_energy(&p), 0.0);
    }

    #[test]
    fn solver_is_monotone_and_virial() {
        let (res, trace) = solve_pekar_traced(1.0, &quick()).unwrap();
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        assert!((res.coulomb_term / res.kinetic_term - 2.0).abs() < 0.02);
        assert!((res.energy - (res.coulomb_term - res.kinetic_term)).abs() < 1e-10);
        assert!(res.psi.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn fixed_point_agrees() {
        let a = solve_pekar(1.0, &quick()).unwrap();
        let b = solve_pekar_fixed_point(1.0, &PekarParams { tol: 1e-11, ..quick() }).unwrap();
        assert!(b.converged);
        assert!(
            (a.energy - b.energy).abs() / a.energy < 1e-4,
            "{} vs {}",
            a.energy,
            b.energy
        );
    }

    #[test]
    fn measure_round_trip() {
        let res = solve_pekar(1.0, &quick()).unwrap();
        let p = res.profile();
        let g = GridSpec::centered(3, 24, 0.5).unwrap();
        let (m, lost) = profile_to_measure(&p, &g).unwrap();
        assert!(lost.abs() < 1e-3);
        assert!((m.total_mass() - p.mass).abs() < 1e-6);
        let (_, idx) = m.concentration_argmax(2);
        assert_eq!(idx, vec![24, 24, 24]);
    }
}
