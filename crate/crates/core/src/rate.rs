//! Donsker-Varadhan rate functionals on grids, their dual lower bounds, the
//! IMS localization and subadditivity checks, and the Feynman-Kac test
//! potentials used to bound exponential moments of occupation measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{pair_energy, PairKernel};
use crate::grid::{gaussian_measure, mixture, Collection, DiscreteMeasure, GridSpec};

/// Cells below this weight never trigger the jump test.
pub const JUMP_MASS_FLOOR: f64 = 1e-12;
/// Adjacent-cell density ratio above which the rate is reported as infinite.
pub const JUMP_RATIO_CAP: f64 = 1e6;
/// Relative slack granted to dual lower bounds over the direct rate.
pub const DUAL_SLACK_REL: f64 = 0.02;
pub const DUAL_SLACK_ABS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Direct,
    Dual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub value: f64,
    pub infinite: bool,
    pub method: RateMethod,
    pub h: f64,
    pub slack: f64,
}

/// `I(μ) = ½ Σ |∇√ρ|² h^d` with `ρ = weight / h^d`, central differences
/// inside and one-sided differences on the boundary.
pub fn rate_i(m: &DiscreteMeasure) -> RateReport {
    let g = m.grid();
    let h = g.spacing;
    let vol = g.cell_volume();
    let w = m.weights();
    let root: Vec<f64> = w.iter().map(|x| (x / vol).sqrt()).collect();
    let strides = g.strides();
    let mut infinite = false;
    let mut total = 0.0;
    for a in 0..g.dim {
        let n = g.shape[a];
        let s = strides[a];
        if n < 2 {
            continue;
        }
        let mut axis_sum = 0.0;
        for flat in 0..w.len() {
            let i = (flat / s) % n;
            let (lo, hi, span) = if i == 0 {
                (flat, flat + s, h)
            } else if i == n - 1 {
                (flat - s, flat, h)
            } else {
                (flat - s, flat + s, 2.0 * h)
            };
            let d = (root[hi] - root[lo]) / span;
            axis_sum += d * d;
            if i + 1 < n {
                let (x, y) = (w[flat], w[flat + s]);
                if x > JUMP_MASS_FLOOR && y > JUMP_MASS_FLOOR && x.max(y) > JUMP_RATIO_CAP * x.min(y) {
                    infinite = true;
                }
            }
        }
        total += axis_sum;
    }
    RateReport {
        value: if infinite { f64::INFINITY } else { 0.5 * total * vol },
        infinite,
        method: RateMethod::Direct,
        h,
        slack: 0.0,
    }
}

/// `Ĩ(ξ) = Σ I(α)` over the components; zero for the empty collection.
pub fn rate_collection(xi: &Collection) -> f64 {
    xi.components().iter().map(|c| rate_i(c).value).sum()
}

/// `1` on `[0, 1]`, `0` on `[2, ∞)`, quintic smoothstep in between (C²).
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Derivative of [`cutoff`].
pub fn cutoff_deriv(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        -30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

/// `u(y) = A exp(-|y|²/(2w²)) φ(|y|/(2w))`, placed by `x -> x + shift`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    pub shift: Vec<f64>,
}

impl Bump {
    fn profile(&self, r: f64) -> f64 {
        let w = self.width;
        self.amplitude * (-r * r / (2.0 * w * w)).exp() * cutoff(r / (2.0 * w))
    }

    fn reach(&self) -> f64 {
        4.0 * self.width
    }
}

/// `g(x) = c + Σ u_i(x + a_i) φ(|x + a_i| / R)`; without `R` the outer cutoff is omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestPotential {
    pub c: f64,
    pub bumps: Vec<Bump>,
    pub cutoff_radius: Option<f64>,
}

impl TestPotential {
    pub fn constant(c: f64) -> Self {
        TestPotential {
            c,
            bumps: Vec::new(),
            cutoff_radius: None,
        }
    }

    /// Single bump centered at `center` (that is, shift `-center`).
    pub fn single(c: f64, amplitude: f64, width: f64, center: &[f64]) -> Self {
        TestPotential {
            c,
            bumps: vec![Bump {
                amplitude,
                width,
                shift: center.iter().map(|x| -x).collect(),
            }],
            cutoff_radius: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return invalid("c must be positive");
        }
        for b in &self.bumps {
            if !(b.amplitude >= 0.0) || !(b.width > 0.0) || !b.amplitude.is_finite() {
                return invalid("bumps need nonnegative amplitude and positive width");
            }
            if b.shift.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.shift.len(),
                });
            }
        }
        if let Some(r) = self.cutoff_radius {
            if !(r > 0.0) {
                return invalid("cutoff radius must be positive");
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut g = self.c;
        for b in &self.bumps {
            let r = x
                .iter()
                .zip(&b.shift)
                .map(|(xi, ai)| (xi + ai) * (xi + ai))
                .sum::<f64>()
                .sqrt();
            let outer = self.cutoff_radius.map_or(1.0, |rr| cutoff(r / rr));
            if outer != 0.0 {
                g += b.profile(r) * outer;
            }
        }
        g
    }

    /// `Δg` by the (2d+1)-point stencil with step `h`.
    pub fn laplacian(&self, x: &[f64], h: f64) -> f64 {
        let g0 = self.eval(x);
        let mut y = x.to_vec();
        let mut acc = 0.0;
        for a in 0..x.len() {
            y[a] = x[a] + h;
            let p = self.eval(&y);
            y[a] = x[a] - h;
            let q = self.eval(&y);
            y[a] = x[a];
            acc += p - 2.0 * g0 + q;
        }
        acc / (h * h)
    }

    /// `(-½Δg / g)(x)`.
    pub fn integrand(&self, x: &[f64], h: f64) -> f64 {
        -0.5 * self.laplacian(x, h) / self.eval(x)
    }

    fn with_shift(&self, i: usize, shift: &[f64]) -> TestPotential {
        TestPotential {
            c: self.c,
            bumps: vec![Bump {
                shift: shift.to_vec(),
                ..self.bumps[i].clone()
            }],
            cutoff_radius: self.cutoff_radius,
        }
    }
}

/// `Σ_x (-½Δg/g)(x) m(x)` with the stencil step equal to the grid spacing.
pub fn fk_functional(g: &TestPotential, m: &DiscreteMeasure) -> Result<f64> {
    g.validate(m.dim())?;
    if g.bumps.is_empty() {
        return Ok(0.0);
    }
    let grid = m.grid();
    let h = grid.spacing;
    let terms: Vec<f64> = m
        .weights()
        .par_iter()
        .enumerate()
        .map(|(flat, &w)| {
            if w == 0.0 {
                0.0
            } else {
                g.integrand(&grid.cell_center(&grid.unflatten(flat)), h) * w
            }
        })
        .collect();
    Ok(terms.iter().sum())
}

/// `max` of [`fk_functional`] over the candidates, as a lower bound on `I(m)`.
pub fn dual_rate(m: &DiscreteMeasure, candidates: &[TestPotential]) -> Result<(RateReport, usize)> {
    if candidates.is_empty() {
        return invalid("dual_rate needs at least one candidate");
    }
    let values = candidates
        .par_iter()
        .map(|g| fk_functional(g, m))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    let direct = rate_i(m).value;
    Ok((
        RateReport {
            value: best.0,
            infinite: false,
            method: RateMethod::Dual,
            h: m.grid().spacing,
            slack: DUAL_SLACK_REL * direct + DUAL_SLACK_ABS,
        },
        best.1,
    ))
}

/// Single-bump candidates over a logarithmic amplitude/width sweep, the given
/// centers, and `c ∈ {0.01, 0.1, 1}`.
pub fn dual_sweep(centers: &[Vec<f64>]) -> Vec<TestPotential> {
    let amplitudes: Vec<f64> = (0..=6).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
    let widths: Vec<f64> = (-2..=4).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let mut out = Vec::new();
    for b in centers {
        for &a in &amplitudes {
            for &w in &widths {
                for c in [0.01, 0.1, 1.0] {
                    out.push(TestPotential::single(c, a, w, b));
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImsReport {
    pub sum_local: f64,
    pub total: f64,
    /// `sum_local - total`.
    pub excess: f64,
    /// `½ Σ_j ∫ |∇φ_j|² dμ` for the full partition of unity, the localization error.
    pub ims_term: f64,
    /// `excess · r_n`.
    pub fitted_c: f64,
}

/// Localize `m` with `φ(|x - c_i| / r_n)²` around each center and compare the
/// summed local rates with the global one.
pub fn ims_localization_check(m: &DiscreteMeasure, centers: &[Vec<f64>], r_n: f64) -> Result<ImsReport> {
    if !(r_n > 0.0) {
        return invalid("r_n must be positive");
    }
    for (i, a) in centers.iter().enumerate() {
        if a.len() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                found: a.len(),
            });
        }
        for (j, b) in centers.iter().enumerate().skip(i + 1) {
            let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if d < 4.0 * r_n {
                return Err(Error::OverlapError { i, j });
            }
        }
    }
    let g = m.grid();
    let total = rate_i(m).value;
    let coords: Vec<Vec<f64>> = (0..g.len()).map(|f| g.cell_center(&g.unflatten(f))).collect();
    let dist = |x: &[f64], c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let mut sum_local = 0.0;
    let mut grad_sq = vec![0.0; g.len()];
    for c in centers {
        let mut w = m.weights().to_vec();
        for (flat, x) in coords.iter().enumerate() {
            let s = dist(x, c) / r_n;
            let phi = cutoff(s);
            w[flat] *= phi * phi;
            let dphi = cutoff_deriv(s) / r_n;
            let rest = 1.0 - phi * phi;
            grad_sq[flat] += dphi * dphi;
            if rest > 0.0 {
                grad_sq[flat] += (phi * dphi).powi(2) / rest;
            }
        }
        sum_local += rate_i(&DiscreteMeasure::new(g.clone(), w)?).value;
    }
    let ims_term = 0.5 * m.weights().iter().zip(&grad_sq).map(|(w, q)| w * q).sum::<f64>();
    let excess = sum_local - total;
    Ok(ImsReport {
        sum_local,
        total,
        excess,
        ims_term,
        fitted_c: excess * r_n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub mixture_rate: f64,
    pub bound: f64,
    pub components_rate: f64,
    pub filler_mass: f64,
    /// Discrete rate of the unit-mass filler.
    pub filler_rate: f64,
    /// `d / (8M)`.
    pub filler_closed_form: f64,
    pub slack: f64,
}

impl SubadditivityReport {
    pub fn holds(&self) -> bool {
        self.mixture_rate <= self.bound + self.slack
    }
}

/// Place the components of `xi` far apart on a common lattice, fill the
/// missing mass with a centered Gaussian of variance `variance`, and compare
/// the rate of the mixture with the sum of the parts.
pub fn subadditivity_check(xi: &Collection, variance: f64, spacing: f64, dim: usize) -> Result<SubadditivityReport> {
    if let Some(d) = xi.dim() {
        if d != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: d,
            });
        }
    }
    if !(variance > 0.0) || !(spacing > 0.0) {
        return invalid("variance and spacing must be positive");
    }
    for c in xi.components() {
        if (c.grid().spacing - spacing).abs() > 1e-12 * spacing {
            return Err(Error::GridMismatch(
                "component spacing differs from the filler spacing".into(),
            ));
        }
    }
    let gap = (8.0 * variance.sqrt() / spacing).ceil() as i64 + 10;
    let span: i64 = xi.components().iter().map(|c| c.grid().shape[0] as i64 + gap).sum();
    let mut cursor = -span / 2;
    let mut placed = Vec::new();
    for c in xi.components() {
        let shape = c.grid().shape.clone();
        let origin = (0..dim)
            .map(|a| {
                let k = if a == 0 { cursor } else { -(shape[a] as i64) / 2 };
                (k as f64 - 0.5) * spacing
            })
            .collect();
        cursor += shape[0] as i64 + gap;
        placed.push(DiscreteMeasure::new(
            GridSpec::new(spacing, origin, shape)?,
            c.weights().to_vec(),
        )?);
    }
    let p: f64 = xi.total_mass();
    let filler_mass = (1.0 - p).max(0.0);
    let half = (8.0 * variance.sqrt() / spacing).ceil() as usize;
    let (unit, _) = gaussian_measure(&GridSpec::centered(dim, half, spacing)?, &vec![0.0; dim], variance, 1.0)?;
    let filler_rate = rate_i(&unit).value;
    let mut terms: Vec<(f64, &DiscreteMeasure)> = placed.iter().map(|m| (1.0, m)).collect();
    if filler_mass > 1e-15 {
        terms.push((filler_mass, &unit));
    }
    let components_rate = rate_collection(xi);
    let mixture_rate = if terms.is_empty() {
        0.0
    } else {
        rate_i(&mixture(&terms)?).value
    };
    let bound = components_rate
        + if filler_mass > 1e-15 {
            filler_mass * filler_rate
        } else {
            0.0
        };
    Ok(SubadditivityReport {
        mixture_rate,
        bound,
        components_rate,
        filler_mass,
        filler_rate,
        filler_closed_form: dim as f64 / (8.0 * variance),
        slack: 1e-12 * bound.abs().max(1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSupReport {
    pub value: f64,
    /// Chosen shift per bump; `None` when parking the bump away from the support is optimal.
    pub shifts: Vec<Option<Vec<f64>>>,
    /// Lipschitz modulus of `-½Δg/g` estimated along a radial line.
    pub lipschitz: f64,
    /// `lipschitz · spacing · √d / 2 · mass · bumps`, the coarse-graining error.
    pub discretization_bound: f64,
    pub lattice_points: usize,
}

fn bump_lipschitz(g: &TestPotential, i: usize, dim: usize, h: f64) -> f64 {
    let single = g.with_shift(i, &vec![0.0; dim]);
    let reach = g.bumps[i]
        .reach()
        .min(g.cutoff_radius.map_or(f64::INFINITY, |r| 2.0 * r));
    let steps = 2000;
    let dr = reach / steps as f64;
    let mut x = vec![0.0; dim];
    let mut prev = single.integrand(&x, h);
    let mut lip = 0.0f64;
    for k in 1..=steps + 10 {
        x[0] = k as f64 * dr;
        let v = single.integrand(&x, h);
        lip = lip.max((v - prev).abs() / dr);
        prev = v;
    }
    lip
}

/// Coarse shift lattice `spacing · Z^d` clipped to the box `|a|_∞ <= half_extent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftLattice {
    pub spacing: f64,
    pub half_extent: f64,
}

/// `sup` of the Feynman-Kac functional over shift tuples on the lattice
/// with pairwise distances at least `4R`.
///
/// The bump supports are disjoint under the separation constraint, so the
/// functional is the sum of the single-bump values. Shifts whose bump cannot
/// reach the support of `m` contribute zero and are represented by parking.
pub fn fk_sup_over_shifts(
    template: &TestPotential,
    m: &DiscreteMeasure,
    lattice: &ShiftLattice,
    radius: f64,
) -> Result<ShiftSupReport> {
    let spacing = lattice.spacing;
    let d = m.dim();
    let mut g = template.clone();
    for b in &mut g.bumps {
        b.shift = vec![0.0; d];
    }
    g.cutoff_radius = Some(radius);
    if !(spacing > 0.0) || !(lattice.half_extent >= 0.0) {
        return invalid("shift lattice needs positive spacing and nonnegative extent");
    }
    if !(radius > 0.0) {
        return invalid("cutoff radius must be positive");
    }
    if !radius.is_finite() && g.bumps.len() > 1 {
        return Err(Error::EmptyAdmissibleSet);
    }
    g.validate(d)?;
    let k = g.bumps.len();
    if k == 0 || m.total_mass() == 0.0 {
        return Ok(ShiftSupReport {
            value: 0.0,
            shifts: vec![None; k],
            lipschitz: 0.0,
            discretization_bound: 0.0,
            lattice_points: 0,
        });
    }
    let support = m.crop();
    let sg = support.grid();
    let h = m.grid().spacing;
    let inflate = 2.0 * radius + h;
    // Bump center `-a` must lie in the inflated support box.
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|a| {
            let lo = sg.origin[a] - inflate;
            let hi = sg.origin[a] + sg.shape[a] as f64 * sg.spacing + inflate;
            let cap = (lattice.half_extent / spacing + 1e-9).floor() as i64;
            (
                ((-hi / spacing).ceil() as i64).max(-cap),
                ((-lo / spacing).floor() as i64).min(cap),
            )
        })
        .collect();
    let mut lattice: Vec<Vec<f64>> = vec![Vec::new()];
    for &(lo, hi) in &ranges {
        let mut next = Vec::new();
        for p in &lattice {
            for z in lo..=hi {
                let mut q = p.clone();
                q.push(z as f64 * spacing);
                next.push(q);
            }
        }
        lattice = next;
    }
    let table: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            lattice
                .par_iter()
                .map(|a| fk_functional(&g.with_shift(i, a), m))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let min_sep2 = 16.0 * radius * radius;
    let mut best = (0.0f64, vec![None; k]);
    let mut chosen: Vec<Option<usize>> = Vec::with_capacity(k);
    search(&table, &lattice, min_sep2, &mut chosen, 0.0, &mut best);
    let lipschitz = (0..k).map(|i| bump_lipschitz(&g, i, d, h)).fold(0.0, f64::max);
    Ok(ShiftSupReport {
        value: best.0,
        shifts: best.1.into_iter().map(|o| o.map(|j| lattice[j].clone())).collect(),
        lipschitz,
        discretization_bound: lipschitz * spacing * (d as f64).sqrt() / 2.0 * m.total_mass() * k as f64,
        lattice_points: lattice.len(),
    })
}

/// Depth-first search in lexicographic option order (parked first); strict
/// improvement keeps the first maximizer.
fn search(
    table: &[Vec<f64>],
    lattice: &[Vec<f64>],
    min_sep2: f64,
    chosen: &mut Vec<Option<usize>>,
    acc: f64,
    best: &mut (f64, Vec<Option<usize>>),
) {
    let i = chosen.len();
    if i == table.len() {
        if acc > best.0 {
            *best = (acc, chosen.clone());
        }
        return;
    }
    chosen.push(None);
    search(table, lattice, min_sep2, chosen, acc, best);
    chosen.pop();
    for (j, a) in lattice.iter().enumerate() {
        let ok = chosen
            .iter()
            .flatten()
            .all(|&l| lattice[l].iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum::<f64>() >= min_sep2 - 1e-9);
        if ok {
            chosen.push(Some(j));
            search(table, lattice, min_sep2, chosen, acc + table[i][j], best);
            chosen.pop();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedRate {
    pub value: f64,
    pub eps: f64,
}

/// `J̃(ξ) = ρ̃ - Σ_j [H_ε(α_j) - I(α_j)]` with the smoothed Coulomb kernel.
pub fn tilted_rate_j(xi: &Collection, rho_tilde: f64, eps: f64) -> Result<TiltedRate> {
    let k = PairKernel::Coulomb { eps };
    k.validate()?;
    let mut gain = 0.0;
    for c in xi.components() {
        gain += pair_energy(&k, c)? - rate_i(c).value;
    }
    Ok(TiltedRate {
        value: rho_tilde - gain,
        eps,
    })
}
