//! Peeling a measure into concentrated components plus dust, and finite-n
//! diagnostics for total disintegration and wide separation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::{cross_energy, lambda_measure, pair_energy, potential_field, PairKernel, TestFunctionSpec};
use crate::grid::{mixture, DiscreteMeasure};
use crate::stats::decreasing_tau;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeelParams {
    pub probe_radius: f64,
    pub dust_threshold: f64,
    pub annulus_gap: f64,
    pub max_components: usize,
    pub growth_factor: f64,
}

impl Default for PeelParams {
    fn default() -> Self {
        PeelParams {
            probe_radius: 2.0,
            dust_threshold: 0.02,
            annulus_gap: 0.05,
            max_components: 16,
            growth_factor: 1.5,
        }
    }
}

impl PeelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.probe_radius > 0.0) || !self.probe_radius.is_finite() {
            return invalid("probe_radius must be positive");
        }
        if !(self.dust_threshold > 0.0 && self.dust_threshold < 1.0) {
            return invalid("dust_threshold must lie in (0, 1)");
        }
        if !(self.annulus_gap > 0.0 && self.annulus_gap < 1.0) {
            return invalid("annulus_gap must lie in (0, 1)");
        }
        if self.max_components == 0 {
            return invalid("max_components must be at least 1");
        }
        if !(self.growth_factor > 1.0) || !self.growth_factor.is_finite() {
            return invalid("growth_factor must exceed 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Cropped to its support box, translated so the extraction center sits at the origin.
    pub measure: DiscreteMeasure,
    /// Same weights in the coordinates of the input measure.
    pub placed: DiscreteMeasure,
    pub center: Vec<f64>,
    pub radius_used: f64,
    /// Set when no annulus gap was found before the grid boundary.
    pub warning: bool,
}

impl Component {
    pub fn mass(&self) -> f64 {
        self.measure.total_mass()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Nonincreasing in mass.
    pub components: Vec<Component>,
    pub dust: DiscreteMeasure,
    /// `separation_matrix[i][j]`: l-infinity gap between the support boxes of components i and j.
    pub separation_matrix: Vec<Vec<f64>>,
}

impl Decomposition {
    pub fn component_masses(&self) -> Vec<f64> {
        self.components.iter().map(Component::mass).collect()
    }

    pub fn any_warning(&self) -> bool {
        self.components.iter().any(|c| c.warning)
    }

    /// Components as an orbit collection.
    pub fn collection(&self) -> Result<crate::grid::Collection> {
        crate::grid::Collection::new(self.components.iter().map(|c| c.measure.clone()).collect())
    }

    /// Sum of the placed components and the dust on the input grid.
    pub fn reassemble(&self) -> Result<DiscreteMeasure> {
        let mut terms: Vec<(f64, &DiscreteMeasure)> = vec![(1.0, &self.dust)];
        terms.extend(self.components.iter().map(|c| (1.0, &c.placed)));
        mixture(&terms)?.embed(self.dust.grid())
    }

    /// Report with pairwise cross energies under `kernel`.
    pub fn report(&self, kernel: &PairKernel) -> Result<PeelReport> {
        let n = self.components.len();
        let mut scores = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s = cross_energy(kernel, &self.components[i].placed, &self.components[j].placed)?;
                scores[i][j] = s;
                scores[j][i] = s;
            }
        }
        Ok(PeelReport {
            components: self
                .components
                .iter()
                .map(|c| ComponentReport {
                    mass: c.mass(),
                    center: c.center.clone(),
                    radius_used: c.radius_used,
                    warning: c.warning,
                })
                .collect(),
            dust_mass: self.dust.total_mass(),
            separation_matrix: self.separation_matrix.clone(),
            scores,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub mass: f64,
    pub center: Vec<f64>,
    pub radius_used: f64,
    pub warning: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeelReport {
    pub components: Vec<ComponentReport>,
    pub dust_mass: f64,
    pub separation_matrix: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
}

/// Support box of a measure in absolute coordinates (cell edges).
fn support_box(m: &DiscreteMeasure) -> (Vec<f64>, Vec<f64>) {
    let c = m.crop();
    let g = c.grid();
    let lo = g.origin.clone();
    let hi = (0..g.dim)
        .map(|a| g.origin[a] + g.shape[a] as f64 * g.spacing)
        .collect();
    (lo, hi)
}

fn box_gap(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    (0..a.0.len())
        .map(|k| (b.0[k] - a.1[k]).max(a.0[k] - b.1[k]).max(0.0))
        .fold(0.0, f64::max)
}

/// Iteratively extract the most concentrated box, sized by an annulus-gap rule.
///
/// The cut is placed at the smallest radius `R = r g^j` whose annulus
/// `B(a, gR) \ B(a, R)` holds less than `annulus_gap` times the mass of `B(a, R)`.
pub fn peel(m: &DiscreteMeasure, p: &PeelParams) -> Result<Decomposition> {
    p.validate()?;
    let g = m.grid().clone();
    let probe = g.radius_cells(p.probe_radius);
    let mut rest = m.clone();
    let mut comps = Vec::new();
    while comps.len() < p.max_components {
        let (q, idx) = rest.concentration_argmax(probe);
        if q < p.dust_threshold {
            break;
        }
        let mut radius = p.probe_radius;
        let mut warning = false;
        loop {
            let inner = rest.box_mass(&idx, g.radius_cells(radius));
            let outer_cells = g.radius_cells(radius * p.growth_factor);
            let outer = rest.box_mass(&idx, outer_cells);
            if outer - inner < p.annulus_gap * inner {
                break;
            }
            radius *= p.growth_factor;
            let clipped = (0..g.dim).any(|a| idx[a] < outer_cells || idx[a] + outer_cells >= g.shape[a]);
            if clipped {
                warning = true;
                break;
            }
        }
        let center = g.cell_center(&idx);
        let (inside, outside) = rest.restrict(&center, radius)?;
        let placed = inside.crop();
        let mut measure = placed.clone();
        let mut local = measure.grid().clone();
        for a in 0..g.dim {
            local.origin[a] -= center[a];
        }
        measure = DiscreteMeasure::new(local, measure.weights().to_vec())?;
        comps.push(Component {
            measure,
            placed,
            center,
            radius_used: radius,
            warning,
        });
        rest = outside;
    }
    comps.sort_by(|a, b| b.mass().total_cmp(&a.mass()));
    let boxes: Vec<_> = comps.iter().map(|c| support_box(&c.placed)).collect();
    let n = comps.len();
    let mut sep = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sep[i][j] = box_gap(&boxes[i], &boxes[j]);
            }
        }
    }
    Ok(Decomposition {
        components: comps,
        dust: rest,
        separation_matrix: sep,
    })
}

/// `(r, q_m(r))` for every requested radius.
pub fn disintegration_score(m: &DiscreteMeasure, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return invalid("radii must be nonempty and positive");
    }
    Ok(radii.iter().map(|&r| (r, m.concentration_function(r))).collect())
}

/// A sequence is disintegrating at level `tau` when every tested `q` of its last member is below `tau`.
pub fn is_disintegrating(scores: &[(f64, f64)], tau: f64) -> bool {
    scores.iter().all(|&(_, q)| q < tau)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub radius: f64,
    /// Pair energy `∫∫ V dμ dμ`.
    pub energy: Vec<f64>,
    /// Concentration `sup_x μ(B(x, r))`.
    pub concentration: Vec<f64>,
    /// Potential maximum `sup_x ∫ V(x - y) μ(dy)`.
    pub potential_sup: Vec<f64>,
    /// Pair energy again, for the kernel-independent formulation.
    pub energy_alt: Vec<f64>,
    /// `Λ(f, μ)`.
    pub lambda: Vec<f64>,
    /// Concordance of each sequence with decreasing index, in the order above.
    pub tau: [f64; 5],
}

impl EquivalenceReport {
    pub fn min_tau(&self) -> f64 {
        self.tau.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The five disintegration diagnostics evaluated along a sequence of measures.
pub fn equivalence_check_disintegration(
    seq: &[DiscreteMeasure],
    kernel: &PairKernel,
    f: &TestFunctionSpec,
    radius: f64,
) -> Result<EquivalenceReport> {
    if seq.is_empty() {
        return invalid("sequence must be nonempty");
    }
    kernel.validate()?;
    let mut rep = EquivalenceReport {
        radius,
        energy: Vec::new(),
        concentration: Vec::new(),
        potential_sup: Vec::new(),
        energy_alt: Vec::new(),
        lambda: Vec::new(),
        tau: [0.0; 5],
    };
    for m in seq {
        let e = pair_energy(kernel, m)?;
        rep.energy.push(e);
        rep.concentration.push(m.concentration_function(radius));
        let field = potential_field(kernel, m)?;
        rep.potential_sup.push(field.iter().copied().fold(0.0, f64::max));
        rep.energy_alt.push(e);
        rep.lambda.push(lambda_measure(f, m)?);
    }
    rep.tau = [
        decreasing_tau(&rep.energy),
        decreasing_tau(&rep.concentration),
        decreasing_tau(&rep.potential_sup),
        decreasing_tau(&rep.energy_alt),
        decreasing_tau(&rep.lambda),
    ];
    Ok(rep)
}

/// Cross energy `∫∫ V(x - y) a(dx) b(dy)`.
pub fn wide_separation_score(a: &DiscreteMeasure, b: &DiscreteMeasure, kernel: &PairKernel) -> Result<f64> {
    cross_energy(kernel, a, b)
}

/// `|Λ(f, a + b) - Λ(f, a) - Λ(f, b)|`, small when `a` and `b` are widely separated.
pub fn lambda_additivity_defect(f: &TestFunctionSpec, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    let ab = mixture(&[(1.0, a), (1.0, b)])?;
    let ua = a.embed(ab.grid())?;
    let ub = b.embed(ab.grid())?;
    Ok((lambda_measure(f, &ab)? - lambda_measure(f, &ua)? - lambda_measure(f, &ub)?).abs())
}
