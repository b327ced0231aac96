//! Sub-probability measures on regular grids in dimension 1 to 3.
//!
//! A [`DiscreteMeasure`] stores one nonnegative weight per cell of a
//! [`GridSpec`]. Cells are indexed row-major (last axis fastest) and carry
//! their mass at the cell center `origin + (i + 1/2) h`. Translations by whole
//! cells only move the origin, so anything computed from weights and index
//! differences is bit-identical across a shift.
//!
//! Balls `B(x, r)` are `l∞` boxes of half-width `r` around cell centers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack on the `mass <= 1` constraint.
pub const MASS_TOL: f64 = 1e-12;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(spacing: f64, origin: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let g = GridSpec {
            dim: origin.len(),
            spacing,
            origin,
            shape,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid of `2 * half_cells + 1` cells per axis whose middle cell is centered at the origin.
    pub fn centered(dim: usize, half_cells: usize, spacing: f64) -> Result<Self> {
        let o = -(half_cells as f64 + 0.5) * spacing;
        Self::new(spacing, vec![o; dim], vec![2 * half_cells + 1; dim])
    }

    /// Grid with cells centered on the lattice `h Z^d` covering `[lo, hi]` on every axis.
    pub fn covering(dim: usize, lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        if !(hi > lo) {
            return invalid("covering: hi must exceed lo");
        }
        let first = (lo / spacing).floor() as i64;
        let last = (hi / spacing).ceil() as i64;
        let n = (last - first + 1) as usize;
        let o = (first as f64 - 0.5) * spacing;
        Self::new(spacing, vec![o; dim], vec![n; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return invalid(format!("dimension {} not in 1..=3", self.dim));
        }
        if self.origin.len() != self.dim || self.shape.len() != self.dim {
            return invalid("origin and shape must have length dim");
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return invalid("spacing must be positive and finite");
        }
        if self.shape.contains(&0) {
            return invalid("every shape entry must be >= 1");
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return invalid("origin must be finite");
        }
        let len = self.shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match len {
            Some(l) if l <= 1 << 28 => Ok(()),
            _ => invalid("grid has too many cells"),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim];
        for a in (0..self.dim.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center_axis(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64 + 0.5) * self.spacing
    }

    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.dim).map(|a| self.center_axis(a, idx[a])).collect()
    }

    /// Cell containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim);
        for a in 0..self.dim {
            let i = ((x[a] - self.origin[a]) / self.spacing).floor();
            if i < 0.0 || i >= self.shape[a] as f64 {
                return None;
            }
            idx.push(i as usize);
        }
        Some(idx)
    }

    /// Integer cell offset of `other`'s origin relative to this grid's origin.
    pub fn offset_of(&self, other: &GridSpec) -> Result<Vec<i64>> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if (other.spacing - self.spacing).abs() > ALIGN_TOL * self.spacing {
            return Err(Error::GridMismatch(format!(
                "spacing {} vs {}",
                self.spacing, other.spacing
            )));
        }
        let mut off = Vec::with_capacity(self.dim);
        for a in 0..self.dim {
            let q = (other.origin[a] - self.origin[a]) / self.spacing;
            let r = q.round();
            if (q - r).abs() > 1e-6 {
                return Err(Error::GridMismatch(format!(
                    "origins differ by {} cells on axis {a}",
                    q
                )));
            }
            off.push(r as i64);
        }
        Ok(off)
    }

    fn translated(&self, cells: &[i64]) -> GridSpec {
        let mut g = self.clone();
        for a in 0..self.dim {
            g.origin[a] += cells[a] as f64 * self.spacing;
        }
        g
    }

    /// Half-width in whole cells of an `l∞` box of radius `r`.
    pub fn radius_cells(&self, r: f64) -> usize {
        if r <= 0.0 {
            0
        } else {
            (r / self.spacing + ALIGN_TOL).floor() as usize
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    grid: GridSpec,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if weights.len() != grid.len() {
            return invalid(format!("{} weights for a grid of {} cells", weights.len(), grid.len()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return invalid(format!("weight {w} is not a finite nonnegative number"));
        }
        let m = DiscreteMeasure { grid, weights };
        let mass = m.total_mass();
        if mass > 1.0 + MASS_TOL {
            return Err(Error::MassOverflow { mass });
        }
        Ok(m)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        DiscreteMeasure {
            grid,
            weights: vec![0.0; n],
        }
    }

    pub fn point_mass(grid: GridSpec, idx: &[usize], p: f64) -> Result<Self> {
        let mut w = vec![0.0; grid.len()];
        w[grid.flatten(idx)] = p;
        Self::new(grid, w)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same weights, scaled by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.weights.iter().map(|w| w * c).collect())
    }

    /// Translation by a whole number of cells per axis.
    pub fn shift_cells(&self, cells: &[i64]) -> Self {
        DiscreteMeasure {
            grid: self.grid.translated(cells),
            weights: self.weights.clone(),
        }
    }

    /// Translation `m * delta_a`; `a` must be a multiple of the spacing on every axis.
    pub fn shift(&self, a: &[f64]) -> Result<Self> {
        self.check_dim(a.len())?;
        let mut cells = Vec::with_capacity(a.len());
        for &x in a {
            let q = x / self.grid.spacing;
            if (q - q.round()).abs() > 1e-6 {
                return invalid(format!("shift {x} is not a multiple of the spacing"));
            }
            cells.push(q.round() as i64);
        }
        Ok(self.shift_cells(&cells))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: d,
            })
        } else {
            Ok(())
        }
    }

    /// Split into the part inside the closed box `B(center, radius)` and the rest.
    pub fn restrict(&self, center: &[f64], radius: f64) -> Result<(Self, Self)> {
        self.check_dim(center.len())?;
        if radius < 0.0 {
            return invalid("radius must be nonnegative");
        }
        let tol = ALIGN_TOL * self.grid.spacing;
        let g = &self.grid;
        let mut inside = vec![0.0; self.weights.len()];
        let mut outside = self.weights.clone();
        for (flat, w) in self.weights.iter().enumerate() {
            let idx = g.unflatten(flat);
            let hit = (0..g.dim).all(|a| (g.center_axis(a, idx[a]) - center[a]).abs() <= radius + tol);
            if hit {
                inside[flat] = *w;
                outside[flat] = 0.0;
            }
        }
        Ok((
            DiscreteMeasure {
                grid: g.clone(),
                weights: inside,
            },
            DiscreteMeasure {
                grid: g.clone(),
                weights: outside,
            },
        ))
    }

    /// Mass of every box of half-width `half` (cells) centered on each cell.
    pub fn box_sums(&self, half: &[usize]) -> Vec<f64> {
        let g = &self.grid;
        let strides = g.strides();
        let mut cur = self.weights.clone();
        let mut prefix = Vec::new();
        for a in 0..g.dim {
            let n = g.shape[a];
            let s = strides[a];
            let w = half[a];
            let mut next = vec![0.0; cur.len()];
            for start in line_starts(g, a) {
                prefix.clear();
                prefix.push(0.0);
                let mut acc = 0.0;
                for i in 0..n {
                    acc += cur[start + i * s];
                    prefix.push(acc);
                }
                for i in 0..n {
                    let lo = i.saturating_sub(w);
                    let hi = (i + w + 1).min(n);
                    next[start + i * s] = (prefix[hi] - prefix[lo]).max(0.0);
                }
            }
            cur = next;
        }
        cur
    }

    /// Largest box mass and the (lexicographically first) cell attaining it.
    pub fn concentration_argmax(&self, half_cells: usize) -> (f64, Vec<usize>) {
        let sums = self.box_sums(&vec![half_cells; self.dim()]);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, &s) in sums.iter().enumerate() {
            if s > best.0 {
                best = (s, i);
            }
        }
        (best.0.max(0.0), self.grid.unflatten(best.1))
    }

    /// `q(r) = max_x m(B(x, r))` over cell centers `x`.
    pub fn concentration_function(&self, radius: f64) -> f64 {
        self.concentration_argmax(self.grid.radius_cells(radius)).0
    }

    /// Mass in the box of half-width `half` cells around cell `center`.
    pub fn box_mass(&self, center: &[usize], half: usize) -> f64 {
        let (lo, hi) = self.box_bounds(center, half);
        let mut acc = 0.0;
        for_each_in_box(&self.grid, &lo, &hi, |flat| acc += self.weights[flat]);
        acc
    }

    /// Inclusive-exclusive cell bounds of a box clipped to the grid.
    pub fn box_bounds(&self, center: &[usize], half: usize) -> (Vec<usize>, Vec<usize>) {
        let lo = center.iter().map(|&c| c.saturating_sub(half)).collect();
        let hi = center
            .iter()
            .zip(&self.grid.shape)
            .map(|(&c, &n)| (c + half + 1).min(n))
            .collect();
        (lo, hi)
    }

    /// Sub-measure on the cells `lo..hi`, keeping absolute coordinates.
    pub fn window(&self, lo: &[usize], hi: &[usize]) -> Self {
        let shape: Vec<usize> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
        let origin = (0..self.dim())
            .map(|a| self.grid.origin[a] + lo[a] as f64 * self.grid.spacing)
            .collect();
        let grid = GridSpec {
            dim: self.dim(),
            spacing: self.grid.spacing,
            origin,
            shape,
        };
        let mut weights = Vec::with_capacity(grid.len());
        for_each_in_box(&self.grid, lo, hi, |flat| weights.push(self.weights[flat]));
        DiscreteMeasure { grid, weights }
    }

    /// Crop to the bounding box of the cells with positive weight.
    pub fn crop(&self) -> Self {
        let g = &self.grid;
        let mut lo = g.shape.clone();
        let mut hi = vec![0; g.dim];
        for (flat, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                let idx = g.unflatten(flat);
                for a in 0..g.dim {
                    lo[a] = lo[a].min(idx[a]);
                    hi[a] = hi[a].max(idx[a] + 1);
                }
            }
        }
        if (0..g.dim).any(|a| lo[a] >= hi[a]) {
            let one = vec![0; g.dim];
            let top = vec![1; g.dim];
            return self.window(&one, &top).scaled_zero();
        }
        self.window(&lo, &hi)
    }

    fn scaled_zero(mut self) -> Self {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        self
    }

    /// Re-express on a larger aligned grid (zero padding).
    pub fn embed(&self, target: &GridSpec) -> Result<Self> {
        let off = target.offset_of(&self.grid)?;
        let mut w = vec![0.0; target.len()];
        let g = &self.grid;
        for (flat, &x) in self.weights.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let idx = g.unflatten(flat);
            let mut t = Vec::with_capacity(g.dim);
            for a in 0..g.dim {
                let j = idx[a] as i64 + off[a];
                if j < 0 || j >= target.shape[a] as i64 {
                    return Err(Error::GridMismatch("target grid does not contain the support".into()));
                }
                t.push(j as usize);
            }
            w[target.flatten(&t)] = x;
        }
        Ok(DiscreteMeasure {
            grid: target.clone(),
            weights: w,
        })
    }

    /// Gaussian smoothing with a normalized discrete kernel of standard deviation `width`.
    pub fn smooth_gaussian(&self, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return invalid("smoothing width must be positive");
        }
        let h = self.grid.spacing;
        let k = (4.0 * width / h).ceil() as usize;
        let kernel: Vec<f64> = {
            let raw: Vec<f64> = (0..=2 * k)
                .map(|i| {
                    let z = (i as f64 - k as f64) * h;
                    (-z * z / (2.0 * width * width)).exp()
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        };
        let mut grid = self.grid.clone();
        for a in 0..grid.dim {
            grid.origin[a] -= k as f64 * h;
            grid.shape[a] += 2 * k;
        }
        let mut cur = self.embed(&grid)?.weights;
        let strides = grid.strides();
        for a in 0..grid.dim {
            let n = grid.shape[a];
            let s = strides[a];
            let mut next = vec![0.0; cur.len()];
            for start in line_starts(&grid, a) {
                for i in 0..n {
                    let v = cur[start + i * s];
                    if v == 0.0 {
                        continue;
                    }
                    for (j, kv) in kernel.iter().enumerate() {
                        let t = i as i64 + j as i64 - k as i64;
                        if t >= 0 && (t as usize) < n {
                            next[start + t as usize * s] += v * kv;
                        }
                    }
                }
            }
            cur = next;
        }
        DiscreteMeasure::new(grid, cur)
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson {
            dim: self.grid.dim,
            spacing: self.grid.spacing,
            origin: self.grid.origin.clone(),
            shape: self.grid.shape.clone(),
            weights: self.weights.clone(),
            mass: self.total_mass(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: MeasureJson = serde_json::from_str(s)?;
        Self::try_from(j)
    }
}

/// Wire form: `{dim, spacing, origin, shape, weights (row-major), mass}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureJson {
    pub dim: usize,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub shape: Vec<usize>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub mass: f64,
}

impl TryFrom<MeasureJson> for DiscreteMeasure {
    type Error = Error;

    fn try_from(j: MeasureJson) -> Result<Self> {
        let grid = GridSpec {
            dim: j.dim,
            spacing: j.spacing,
            origin: j.origin,
            shape: j.shape,
        };
        DiscreteMeasure::new(grid, j.weights)
    }
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MeasureJson::deserialize(d)?;
        DiscreteMeasure::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// A finite collection of orbits; the empty collection is allowed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Collection {
    components: Vec<DiscreteMeasure>,
}

impl Collection {
    pub fn new(components: Vec<DiscreteMeasure>) -> Result<Self> {
        if let Some(first) = components.first() {
            let d = first.dim();
            if let Some(bad) = components.iter().find(|c| c.dim() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: bad.dim(),
                });
            }
        }
        let mass: f64 = components.iter().map(|c| c.total_mass()).sum();
        if mass > 1.0 + MASS_TOL {
            return Err(Error::MassOverflow { mass });
        }
        Ok(Collection { components })
    }

    pub fn empty() -> Self {
        Collection::default()
    }

    pub fn singleton(m: DiscreteMeasure) -> Self {
        Collection { components: vec![m] }
    }

    pub fn components(&self) -> &[DiscreteMeasure] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(|c| c.dim())
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.total_mass()).sum()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: CollectionJson = serde_json::from_str(s)?;
        let comps = j
            .components
            .into_iter()
            .map(DiscreteMeasure::try_from)
            .collect::<Result<Vec<_>>>()?;
        Collection::new(comps)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionJson {
    pub components: Vec<MeasureJson>,
}

impl Serialize for Collection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CollectionJson {
            components: self.components.iter().map(|c| c.to_json()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Collection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CollectionJson::deserialize(d)?;
        let comps = j
            .components
            .into_iter()
            .map(DiscreteMeasure::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Collection::new(comps).map_err(serde::de::Error::custom)
    }
}

/// `sum_i c_i m_i` on the union of the (aligned) grids.
pub fn mixture(terms: &[(f64, &DiscreteMeasure)]) -> Result<DiscreteMeasure> {
    let Some((_, first)) = terms.first() else {
        return invalid("mixture needs at least one term");
    };
    if let Some((c, _)) = terms.iter().find(|(c, _)| !(*c >= 0.0) || !c.is_finite()) {
        return invalid(format!("mixture coefficient {c} must be nonnegative"));
    }
    let reference = first.grid();
    let d = reference.dim;
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    let mut offsets = Vec::with_capacity(terms.len());
    for (_, m) in terms {
        let off = reference.offset_of(m.grid())?;
        for a in 0..d {
            lo[a] = lo[a].min(off[a]);
            hi[a] = hi[a].max(off[a] + m.grid().shape[a] as i64);
        }
        offsets.push(off);
    }
    let shape: Vec<usize> = (0..d).map(|a| (hi[a] - lo[a]) as usize).collect();
    let origin = (0..d)
        .map(|a| reference.origin[a] + lo[a] as f64 * reference.spacing)
        .collect();
    let grid = GridSpec::new(reference.spacing, origin, shape)?;
    let mut w = vec![0.0; grid.len()];
    for ((c, m), off) in terms.iter().zip(&offsets) {
        let g = m.grid();
        for (flat, &x) in m.weights().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let idx = g.unflatten(flat);
            let t: Vec<usize> = (0..d).map(|a| (idx[a] as i64 + off[a] - lo[a]) as usize).collect();
            w[grid.flatten(&t)] += c * x;
        }
    }
    let mass: f64 = w.iter().sum();
    if mass > 1.0 + MASS_TOL {
        return Err(Error::MassOverflow { mass });
    }
    DiscreteMeasure::new(grid, w)
}

/// Discretized `N(mean, variance Id)` with the requested mass. Returns the
/// measure and the mass lost to truncation at the grid boundary.
pub fn gaussian_measure(grid: &GridSpec, mean: &[f64], variance: f64, mass: f64) -> Result<(DiscreteMeasure, f64)> {
    grid.validate()?;
    if mean.len() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: mean.len(),
        });
    }
    if !(variance > 0.0) {
        return invalid("variance must be positive");
    }
    if !(0.0..=1.0 + MASS_TOL).contains(&mass) {
        return invalid("mass must lie in [0, 1]");
    }
    let norm = (2.0 * std::f64::consts::PI * variance).powf(-0.5);
    let h = grid.spacing;
    let axis: Vec<Vec<f64>> = (0..grid.dim)
        .map(|a| {
            (0..grid.shape[a])
                .map(|i| {
                    let z = grid.center_axis(a, i) - mean[a];
                    norm * (-z * z / (2.0 * variance)).exp() * h
                })
                .collect()
        })
        .collect();
    let mut w = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let idx = grid.unflatten(flat);
        let v: f64 = (0..grid.dim).map(|a| axis[a][idx[a]]).product();
        w.push(mass * v);
    }
    let captured: f64 = w.iter().sum();
    let lost = mass - captured;
    if lost > 0.01 * mass {
        return Err(Error::GridTooSmall { lost });
    }
    if captured > 1.0 {
        w.iter_mut().for_each(|x| *x /= captured);
    }
    Ok((DiscreteMeasure::new(grid.clone(), w)?, lost))
}

/// Flat start indices of every line along `axis`.
pub(crate) fn line_starts(g: &GridSpec, axis: usize) -> Vec<usize> {
    let strides = g.strides();
    let n = g.shape[axis];
    let s = strides[axis];
    (0..g.len()).filter(|flat| (flat / s).is_multiple_of(n)).collect()
}

pub(crate) fn for_each_in_box(g: &GridSpec, lo: &[usize], hi: &[usize], mut f: impl FnMut(usize)) {
    let d = g.dim;
    if (0..d).any(|a| lo[a] >= hi[a]) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        f(g.flatten(&idx));
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, h: f64) -> GridSpec {
        GridSpec::centered(1, n, h).unwrap()
    }

    #[test]
    fn total_mass_basics() {
        let g = line(50, 0.1);
        assert_eq!(DiscreteMeasure::zeros(g.clone()).total_mass(), 0.0);
        let n = g.len();
        let u = DiscreteMeasure::new(g.clone(), vec![1.0 / n as f64; n]).unwrap();
        assert!((u.total_mass() - 1.0).abs() < 1e-12);
        let mut w = vec![0.0; n];
        w[3] = 0.3;
        w[80] = 0.2;
        let two = DiscreteMeasure::new(g, w).unwrap();
        assert!((two.total_mass() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights() {
        let g = line(2, 1.0);
        assert!(DiscreteMeasure::new(g.clone(), vec![0.5, -0.1, 0.0, 0.0, 0.0]).is_err());
        assert!(matches!(
            DiscreteMeasure::new(g.clone(), vec![0.6, 0.6, 0.0, 0.0, 0.0]),
            Err(Error::MassOverflow { .. })
        ));
        assert!(DiscreteMeasure::new(g, vec![0.1; 4]).is_err());
    }

    #[test]
    fn shift_identities() {
        let g = line(10, 0.5);
        let p = DiscreteMeasure::point_mass(g, &[10], 1.0).unwrap();
        assert_eq!(p.shift(&[0.0]).unwrap(), p);
        let moved = p.shift(&[2.0]).unwrap();
        let idx = moved.grid().locate(&[2.0]).unwrap();
        assert_eq!(moved.weights()[moved.grid().flatten(&idx)], 1.0);
        let back = moved.shift(&[-2.0]).unwrap();
        assert_eq!(back.weights(), p.weights());
        assert!(p.shift(&[0.3]).is_err());
    }

    #[test]
    fn restrict_edge_cases() {
        let g = line(40, 0.25);
        let (m, _) = gaussian_measure(&g, &[0.0], 1.0, 1.0).unwrap();
        let (inside, outside) = m.restrict(&[0.0], 0.0).unwrap();
        assert_eq!(inside.weights().iter().filter(|w| **w > 0.0).count(), 1);
        for i in 0..m.weights().len() {
            assert_eq!(inside.weights()[i] + outside.weights()[i], m.weights()[i]);
        }
        let (all, none) = m.restrict(&[0.0], 100.0).unwrap();
        assert_eq!(all.weights(), m.weights());
        assert_eq!(none.total_mass(), 0.0);
    }

    #[test]
    fn restrict_unit_ball_matches_cell_sum() {
        let g = line(160, 0.05);
        let (m, _) = gaussian_measure(&g, &[0.0], 1.0, 1.0).unwrap();
        let (inside, _) = m.restrict(&[0.0], 1.0).unwrap();
        // Oracle: cells with |center| <= 1, summed directly.
        let direct: f64 = (0..g.len())
            .filter(|&i| g.center_axis(0, i).abs() <= 1.0 + 1e-9)
            .map(|i| m.weights()[i])
            .sum();
        assert!((inside.total_mass() - direct).abs() < 1e-14);
        // 41 cells of width 0.05 cover [-1.025, 1.025].
        assert!((direct - 0.694_637).abs() < 1e-4);
    }

    #[test]
    fn concentration_point_and_pair() {
        let g = line(100, 0.1);
        let p = DiscreteMeasure::point_mass(g.clone(), &[37], 0.7).unwrap();
        for r in [0.0, 0.5, 3.0, 100.0] {
            assert_eq!(p.concentration_function(r), 0.7);
        }
        let a = g.locate(&[-5.0]).unwrap()[0];
        let b = g.locate(&[5.0]).unwrap()[0];
        let mut w = vec![0.0; g.len()];
        w[a] = 0.5;
        w[b] = 0.5;
        let two = DiscreteMeasure::new(g, w).unwrap();
        assert_eq!(two.concentration_function(1.0), 0.5);
        assert_eq!(two.concentration_function(20.0), 1.0);
    }

    #[test]
    fn concentration_matches_exhaustive_window_scan() {
        let g = line(160, 0.05);
        let (m, _) = gaussian_measure(&g, &[0.3], 1.0, 1.0).unwrap();
        let w = g.radius_cells(1.0);
        let n = g.len();
        let mut brute = 0.0f64;
        for c in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if (j as i64 - c as i64).unsigned_abs() as usize <= w {
                    s += m.weights()[j];
                }
            }
            brute = brute.max(s);
        }
        assert!((m.concentration_function(1.0) - brute).abs() < 1e-14);
    }

    #[test]
    fn gaussian_mass_against_erf() {
        let g = GridSpec::covering(1, -8.0, 8.0, 0.05).unwrap();
        let (m, lost) = gaussian_measure(&g, &[0.0], 1.0, 1.0).unwrap();
        // Covered interval is [-8.025, 8.025]; erf oracle for the captured mass.
        let half = g.len() as f64 * g.spacing / 2.0;
        let expected = statrs::function::erf::erf(half / 2f64.sqrt());
        assert!((m.total_mass() - expected).abs() < 1e-6);
        assert!((m.total_mass() - 1.0).abs() < 1e-6);
        assert!(lost.abs() < 1e-6);
    }

    #[test]
    fn gaussian_translation_covariance() {
        let g = line(120, 0.1);
        let (m0, _) = gaussian_measure(&g, &[0.0], 1.0, 1.0).unwrap();
        let (m1, _) = gaussian_measure(&g, &[1.0], 1.0, 1.0).unwrap();
        let shifted = m0.shift(&[1.0]).unwrap();
        let off = g.offset_of(shifted.grid()).unwrap()[0];
        assert_eq!(off, 10);
        for i in 0..g.len() - 10 {
            assert!((shifted.weights()[i] - m1.weights()[i + 10]).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_too_wide() {
        let g = line(20, 0.1);
        assert!(matches!(
            gaussian_measure(&g, &[0.0], 100.0, 1.0),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn mixture_basics() {
        let g = line(60, 0.1);
        let (a, _) = gaussian_measure(&g, &[0.0], 1.0, 1.0).unwrap();
        let id = mixture(&[(1.0, &a)]).unwrap();
        assert_eq!(id.weights(), a.weights());
        let b = a.shift(&[20.0]).unwrap();
        let mix = mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert!((mix.total_mass() - 0.5 * a.total_mass() - 0.5 * b.total_mass()).abs() < 1e-14);
        assert_eq!(mix.grid().shape[0], g.len() + 200);
        assert!(matches!(
            mixture(&[(0.7, &a), (0.7, &b)]),
            Err(Error::MassOverflow { .. })
        ));
    }

    #[test]
    fn spreading_mixture_assembles() {
        let n = 10.0;
        let g = GridSpec::covering(1, -6.0 * n, 7.0 * n, 0.1).unwrap();
        let (a, _) = gaussian_measure(&g, &[0.0], 1.0, 1.0 / 3.0).unwrap();
        let (b, _) = gaussian_measure(&g, &[n], 1.0, 1.0 / 3.0).unwrap();
        let (c, _) = gaussian_measure(&g, &[0.0], n * n, 1.0 / 3.0).unwrap();
        let m = mixture(&[(1.0, &a), (1.0, &b), (1.0, &c)]).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = GridSpec::centered(2, 12, 0.37).unwrap();
        let (m, _) = gaussian_measure(&g, &[0.1, -0.2], 0.9, 0.8).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back = DiscreteMeasure::from_json_str(&s).unwrap();
        assert_eq!(back, m);
        let c = Collection::new(vec![m.clone(), m.scaled(0.2).unwrap()]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(Collection::from_json_str(&s).unwrap(), c);
        assert!(Collection::from_json_str("{\"components\":[]}").unwrap().is_empty());
    }

    #[test]
    fn smoothing_preserves_mass() {
        let g = GridSpec::centered(2, 4, 0.5).unwrap();
        let p = DiscreteMeasure::point_mass(g, &[4, 4], 1.0).unwrap();
        let s = p.smooth_gaussian(0.7).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
    }
}
