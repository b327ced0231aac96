//! Translation-invariant test functions, the functionals `Λ(f, μ)` and
//! `Λ(f, ξ)`, the metric `D` on collections of orbits, and pair energies.
//!
//! The test family is products of Gaussian bumps in the difference variables:
//!
//! ```text
//! f_r(x_1, ..., x_k) = prod_{i=2..k} exp(-|x_i - x_1 - b_{i-1}|^2 / (2 s_{i-1}^2))
//! ```
//!
//! Every member peaks at 1, so `||f_r||_inf = 1` and `Λ(f, μ) <= mass(μ)^k`.
//! Because the kernel factorizes over axes, `Λ` costs one separable
//! correlation per factor instead of a k-fold sum.

use serde::{Deserialize, Serialize};

use crate::conv::{correlate, correlate_separable, AxisKernel};
use crate::error::{invalid, Error, Result};
use crate::grid::{mixture, Collection, DiscreteMeasure, GridSpec};

/// Gaussian factors are dropped where they fall below `exp(-GAUSS_CUTOFF^2 / 2)`, about 1e-17.
const GAUSS_CUTOFF: f64 = 8.87;

const SCALES: [f64; 4] = [1.0, 0.5, 2.0, 4.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub r: u64,
    pub k: usize,
    pub offsets: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
}

impl TestFunctionSpec {
    pub fn sup_norm(&self) -> f64 {
        1.0
    }

    pub fn dim(&self) -> usize {
        self.offsets.first().map_or(0, |o| o.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return invalid("arity must be at least 2");
        }
        if self.offsets.len() != self.k - 1 || self.scales.len() != self.k - 1 {
            return invalid("need k - 1 offsets and scales");
        }
        let d = self.dim();
        if !(1..=3).contains(&d) || self.offsets.iter().any(|o| o.len() != d) {
            return invalid("offsets must share a dimension in 1..=3");
        }
        if self.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return invalid("scales must be positive");
        }
        if self.offsets.iter().flatten().any(|b| !b.is_finite()) {
            return invalid("offsets must be finite");
        }
        Ok(())
    }

    /// Evaluate at explicit points (used by brute-force checks).
    pub fn eval(&self, points: &[&[f64]]) -> f64 {
        let x1 = points[0];
        self.offsets
            .iter()
            .zip(&self.scales)
            .zip(&points[1..])
            .map(|((b, s), xi)| {
                let d2: f64 = (0..x1.len())
                    .map(|a| {
                        let z = xi[a] - x1[a] - b[a];
                        z * z
                    })
                    .sum();
                (-d2 / (2.0 * s * s)).exp()
            })
            .product()
    }
}

/// The `i`-th point of `Z^d`, ordered by squared norm then lexicographically.
fn lattice_point(dim: usize, i: usize) -> Vec<i64> {
    let mut radius = 1i64;
    loop {
        let mut pts = Vec::new();
        let side = 2 * radius + 1;
        let total = (side as usize).pow(dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut p = vec![0i64; dim];
            for a in (0..dim).rev() {
                p[a] = (rem % side as usize) as i64 - radius;
                rem /= side as usize;
            }
            let n2: i64 = p.iter().map(|x| x * x).sum();
            if n2 <= radius * radius {
                pts.push((n2, p));
            }
        }
        if pts.len() > i {
            pts.sort();
            return pts.swap_remove(i).1;
        }
        radius *= 2;
    }
}

fn cantor_unpair(m: u64) -> (u64, u64) {
    let mut w = (((8.0 * m as f64 + 1.0).sqrt() - 1.0) / 2.0).floor() as u64;
    while w * (w + 1) / 2 > m {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= m {
        w += 1;
    }
    let y = m - w * (w + 1) / 2;
    (w - y, y)
}

fn atom(dim: usize, a: u64) -> (Vec<f64>, f64) {
    let scale = SCALES[(a % 4) as usize];
    let p = lattice_point(dim, (a / 4) as usize);
    (p.into_iter().map(|x| x as f64 / 2.0).collect(), scale)
}

/// Deterministic enumeration `r -> (k, offsets, scales)`.
///
/// Odd `r` give pair kernels, even `r` triple kernels. Each (offset, scale)
/// slot is an "atom" index: the scale cycles through `{1, 1/2, 2, 4}` and the
/// offset walks the half-integer lattice by increasing norm. Triple kernels
/// split their index with the Cantor pairing.
pub fn enumerate_family(r: u64, dim: usize) -> Result<TestFunctionSpec> {
    if r == 0 {
        return invalid("family index starts at 1");
    }
    if !(1..=3).contains(&dim) {
        return invalid("dimension must be 1, 2 or 3");
    }
    let n = r - 1;
    let k = 2 + (n % 2) as usize;
    let m = n / 2;
    let atoms = if k == 2 {
        vec![m]
    } else {
        let (x, y) = cantor_unpair(m);
        vec![x, y]
    };
    let (offsets, scales) = atoms.into_iter().map(|a| atom(dim, a)).unzip();
    Ok(TestFunctionSpec { r, k, offsets, scales })
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

fn gaussian_axis_kernel(grid: &GridSpec, axis_offset: f64, scale: f64, n: usize) -> AxisKernel {
    let h = grid.spacing;
    let reach = GAUSS_CUTOFF * scale;
    let lo = (((axis_offset - reach) / h).floor() as i64).max(-(n as i64 - 1));
    let hi = (((axis_offset + reach) / h).ceil() as i64).min(n as i64 - 1);
    if lo > hi {
        return AxisKernel {
            lo: 0,
            values: Vec::new(),
        };
    }
    let values = (lo..=hi)
        .map(|o| {
            let z = o as f64 * h - axis_offset;
            (-z * z / (2.0 * scale * scale)).exp()
        })
        .collect();
    AxisKernel { lo, values }
}

/// `Λ(f, μ) = ∫ f dμ^{⊗k}` on the grid.
pub fn lambda_measure(f: &TestFunctionSpec, m: &DiscreteMeasure) -> Result<f64> {
    f.validate()?;
    check_dim(m.dim(), f.dim())?;
    let g = m.grid();
    let w = m.weights();
    let mut prod = w.to_vec();
    for (b, &s) in f.offsets.iter().zip(&f.scales) {
        let kernels: Vec<AxisKernel> = (0..g.dim)
            .map(|a| gaussian_axis_kernel(g, b[a], s, g.shape[a]))
            .collect();
        let field = correlate_separable(g, w, &kernels);
        for (p, v) in prod.iter_mut().zip(field) {
            *p *= v;
        }
    }
    Ok(prod.iter().sum())
}

/// `Λ(f, ξ) = sum over components`; zero for the empty collection.
pub fn lambda_collection(f: &TestFunctionSpec, xi: &Collection) -> Result<f64> {
    xi.components().iter().map(|c| lambda_measure(f, c)).sum()
}

/// `Λ` of a finite linear combination of family members.
pub fn lambda_combination(terms: &[(f64, TestFunctionSpec)], m: &DiscreteMeasure) -> Result<f64> {
    terms.iter().map(|(c, f)| lambda_measure(f, m).map(|v| c * v)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    pub r_max: u64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { r_max: 64 }
    }
}

impl MetricParams {
    pub fn new(r_max: u64) -> Result<Self> {
        if r_max == 0 {
            return invalid("r_max must be at least 1");
        }
        Ok(MetricParams { r_max })
    }

    /// Bound on the omitted tail `sum_{r > r_max}`.
    pub fn tail_bound(&self) -> f64 {
        2f64.powi(1 - self.r_max as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub value: f64,
    pub error_bound: f64,
    pub r_max: u64,
}

/// Values `Λ(f_r, ξ)` for `r = 1..=r_max`.
pub fn lambda_profile(xi: &Collection, dim: usize, params: &MetricParams) -> Result<Vec<f64>> {
    if let Some(d) = xi.dim() {
        check_dim(dim, d)?;
    }
    (1..=params.r_max)
        .map(|r| {
            let f = enumerate_family(r, dim)?;
            lambda_collection(&f, xi)
        })
        .collect()
}

/// Combine two `Λ` profiles into the truncated metric series.
pub fn metric_from_profiles(a: &[f64], b: &[f64], params: &MetricParams) -> MetricResult {
    let mut value = 0.0;
    for (r, (x, y)) in a.iter().zip(b).enumerate() {
        let weight = 0.5f64.powi(r as i32 + 1) / 2.0;
        value += weight * (x - y).abs();
    }
    MetricResult {
        value,
        error_bound: params.tail_bound(),
        r_max: params.r_max,
    }
}

/// Truncated `D(ξ1, ξ2)` with its tail bound.
pub fn metric_d(xi1: &Collection, xi2: &Collection, params: &MetricParams) -> Result<MetricResult> {
    let dim = match (xi1.dim(), xi2.dim()) {
        (Some(a), Some(b)) => {
            check_dim(a, b)?;
            a
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Ok(MetricResult {
                value: 0.0,
                error_bound: params.tail_bound(),
                r_max: params.r_max,
            })
        }
    };
    let a = lambda_profile(xi1, dim, params)?;
    let b = lambda_profile(xi2, dim, params)?;
    Ok(metric_from_profiles(&a, &b, params))
}

/// Radial pair potentials `V(x - y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairKernel {
    /// `(eps^2 + |x|^2)^{-1/2}`
    Coulomb { eps: f64 },
    /// `exp(-|x|^2 / (2 s^2))`
    Gaussian { scale: f64 },
    /// Piecewise-linear in `|x|`, zero past the last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

impl PairKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PairKernel::Coulomb { eps } if *eps == 0.0 => Err(Error::SingularKernel),
            PairKernel::Coulomb { eps } if !(*eps > 0.0) => invalid("eps must be positive"),
            PairKernel::Gaussian { scale } if !(*scale > 0.0) => invalid("scale must be positive"),
            PairKernel::Tabulated { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return invalid("tabulated kernel needs matching nonempty radii and values");
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
                    return invalid("radii must be increasing and nonnegative");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, dist: f64) -> f64 {
        match self {
            PairKernel::Coulomb { eps } => 1.0 / (eps * eps + dist * dist).sqrt(),
            PairKernel::Gaussian { scale } => (-dist * dist / (2.0 * scale * scale)).exp(),
            PairKernel::Tabulated { radii, values } => {
                if dist <= radii[0] {
                    return values[0];
                }
                let j = radii.partition_point(|&r| r < dist);
                if j >= radii.len() {
                    return 0.0;
                }
                let t = (dist - radii[j - 1]) / (radii[j] - radii[j - 1]);
                values[j - 1] + t * (values[j] - values[j - 1])
            }
        }
    }
}

/// `x -> sum_y V(x - y) m(y)` on the grid of `m`.
pub fn potential_field(kernel: &PairKernel, m: &DiscreteMeasure) -> Result<Vec<f64>> {
    kernel.validate()?;
    let h = m.grid().spacing;
    Ok(correlate(m.grid(), m.weights(), |o| {
        let d2: f64 = o.iter().map(|&z| (z as f64 * h).powi(2)).sum();
        kernel.eval(d2.sqrt())
    }))
}

/// `H(μ) = sum_{x,y} V(x - y) μ(x) μ(y)`, diagonal included.
pub fn pair_energy(kernel: &PairKernel, m: &DiscreteMeasure) -> Result<f64> {
    let field = potential_field(kernel, m)?;
    Ok(field.iter().zip(m.weights()).map(|(f, w)| f * w).sum())
}

/// `sum_{x,y} V(x - y) a(x) b(y)` for measures on aligned grids.
pub fn cross_energy(kernel: &PairKernel, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    kernel.validate()?;
    if a.total_mass() == 0.0 || b.total_mass() == 0.0 {
        return Ok(0.0);
    }
    let union = mixture(&[(0.0, a), (0.0, b)])?;
    let ua = a.embed(union.grid())?;
    let ub = b.embed(union.grid())?;
    let field = potential_field(kernel, &ub)?;
    Ok(field.iter().zip(ua.weights()).map(|(f, w)| f * w).sum())
}
