//! Maximal, sharp maximal and fractional maximal operators, BMO^β and Morrey norms.
//!
//! "All cubes" suprema are realized as maxima over the `2^d` shifted lattices.
//! Maximal and fractional operators use every lattice cube meeting the root,
//! with the function or measure extended by zero. Oscillation-based operators
//! only use cubes lying inside the root, where `f` is known.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choquet::{sweep_cube_integrals, GridFunction, Sweep};
use crate::content::check_beta;
use crate::error::{HctError, Result};
use crate::grid::{CellSet, DyadicCube, Grid, Lattice, RootSpec};
use crate::riesz::{check_alpha, DiscreteMeasure};

/// Per-cell output of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorField {
    pub spec: RootSpec,
    pub values: Vec<f64>,
    pub provenance: String,
}

impl OperatorField {
    pub fn new(spec: &RootSpec, values: Vec<f64>, provenance: impl Into<String>) -> Self {
        OperatorField { spec: spec.clone(), values, provenance: provenance.into() }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_function(&self) -> Result<GridFunction> {
        GridFunction::new(&self.spec, self.values.clone())
    }
}

/// Candidate set for the inner minimization over `c`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Values and midpoints of consecutive values.
    #[default]
    AdjacentMidpoints,
    /// Values and midpoints of every pair of values; exact for step functions.
    AllPairwiseMidpoints,
}

impl Policy {
    pub fn exact() -> Self {
        Policy::AllPairwiseMidpoints
    }

    pub fn fast() -> Self {
        Policy::AdjacentMidpoints
    }
}

/// Minimizer of `c ↦ ∫_Q |f − c| dH` over the policy's candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestC {
    pub cube: DyadicCube,
    pub c: f64,
    pub value: f64,
}

fn candidates(distinct: &[f64], policy: Policy) -> Vec<f64> {
    let mut out = distinct.to_vec();
    match policy {
        Policy::AdjacentMidpoints => out.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1]))),
        Policy::AllPairwiseMidpoints => {
            for i in 0..distinct.len() {
                for j in i + 1..distinct.len() {
                    out.push(0.5 * (distinct[i] + distinct[j]));
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `∫_Q |f − c| dH` by a local sweep: cells sorted by `f` are consumed from
/// whichever end is farther from `c`, which yields `|f − c|` in decreasing order.
pub(crate) fn oscillation_at(sweep: &mut Sweep, node: usize, sorted: &[(f64, usize)], c: f64) -> f64 {
    sweep.reset();
    let (mut lo, mut hi) = (0usize, sorted.len());
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    while lo < hi {
        let gl = (sorted[lo].0 - c).abs();
        let gh = (sorted[hi - 1].0 - c).abs();
        let (g, cell) = if gl >= gh {
            lo += 1;
            (gl, sorted[lo - 1].1)
        } else {
            hi -= 1;
            (gh, sorted[hi].1)
        };
        if g <= 0.0 {
            break;
        }
        if let Some(p) = prev {
            if g < p {
                total += (p - g) * sweep.value[node];
            }
        }
        prev = Some(g);
        sweep.insert(cell, Some(node));
    }
    if let Some(p) = prev {
        total += p * sweep.value[node];
    }
    total
}

/// Minimizes the convex objective over the sorted candidate list by bisection.
pub(crate) fn best_c_node(lattice: &Lattice, values: &[f64], node: usize, policy: Policy, sweep: &mut Sweep) -> (f64, f64) {
    let mut sorted: Vec<(f64, usize)> = lattice.cells(node).into_iter().map(|c| (values[c], c)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut distinct: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    distinct.dedup();
    if distinct.len() == 1 {
        return (distinct[0], 0.0);
    }
    let cands = candidates(&distinct, policy);
    let mut eval = |c: f64| oscillation_at(sweep, node, &sorted, c);
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if eval(cands[mid]) <= eval(cands[mid + 1]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (cands[lo], eval(cands[lo]))
}

/// Best constant for a cube of the base tree or of any shifted lattice of `grid`.
pub fn best_constant_c_with(grid: &Grid, f: &GridFunction, cube: &DyadicCube, beta: f64, policy: Policy) -> Result<BestC> {
    check_beta(beta, f.spec().dim)?;
    if grid.spec() != f.spec() {
        return Err(HctError::SpecMismatch);
    }
    let (lattice, node) = grid.lattice_of(cube).ok_or_else(|| HctError::UnknownCube(cube.to_string()))?;
    if lattice.cell_count_of(node) == 0 {
        return Err(HctError::EmptyCube(cube.to_string()));
    }
    let values = f.quantized().0;
    let mut sweep = Sweep::new(lattice, beta);
    let (c, value) = best_c_node(lattice, &values, node, policy, &mut sweep);
    Ok(BestC { cube: cube.clone(), c, value })
}

/// `argmin_c ∫_Q |f − c| dH^{β,Q0}_∞` for a base cube `Q`.
pub fn best_constant_c(f: &GridFunction, cube: &DyadicCube, beta: f64, policy: Policy) -> Result<BestC> {
    best_constant_c_with(&Grid::with_margin(f.spec(), 0)?, f, cube, beta, policy)
}

/// Per-cell maximum of `score` over the lattice cubes containing the cell.
fn max_over_ancestors(lattice: &Lattice, score: &[f64]) -> Vec<f64> {
    let mut best = score.to_vec();
    for node in 0..lattice.node_count() {
        if let Some(p) = lattice.parent(node) {
            best[node] = best[node].max(best[p]);
        }
    }
    (0..lattice.spec().cell_count()).map(|c| best[lattice.leaf(c)]).collect()
}

fn pointwise_max(fields: impl IntoIterator<Item = Vec<f64>>, cells: usize) -> Vec<f64> {
    fields.into_iter().fold(vec![0.0; cells], |mut acc, v| {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a = a.max(b));
        acc
    })
}

fn averages(lattice: &Lattice, values: &[f64], beta: f64) -> Vec<f64> {
    let integrals = sweep_cube_integrals(lattice, values, beta);
    let weights = lattice.level_weights(beta);
    integrals.iter().enumerate().map(|(n, v)| v / weights[lattice.level_index(n)]).collect()
}

/// Dyadic maximal function over one lattice.
pub(crate) fn maximal_on(lattice: &Lattice, values: &[f64], beta: f64) -> Vec<f64> {
    max_over_ancestors(lattice, &averages(lattice, values, beta))
}

/// `M_{H^{β,Q0}} f(x) = max_{Q ∋ x} ∫_Q f dH / ℓ(Q)^β` over the base tree.
pub fn dyadic_maximal_with(grid: &Grid, f: &GridFunction, beta: f64) -> Result<OperatorField> {
    check_beta(beta, f.spec().dim)?;
    let values = maximal_on(grid.base(), &f.quantized().0, beta);
    Ok(OperatorField::new(f.spec(), values, format!("dyadic-maximal beta={beta}")))
}

pub fn dyadic_maximal(f: &GridFunction, beta: f64) -> Result<OperatorField> {
    dyadic_maximal_with(&Grid::with_margin(f.spec(), 0)?, f, beta)
}

/// Ball maximal proxy: max of the dyadic maximal functions of all shifted lattices.
pub fn beta_maximal_with(grid: &Grid, f: &GridFunction, beta: f64) -> Result<OperatorField> {
    check_beta(beta, f.spec().dim)?;
    let q = f.quantized().0;
    let fields: Vec<Vec<f64>> =
        std::iter::once(grid.base()).chain(grid.lattices()).collect::<Vec<_>>().par_iter().map(|lat| maximal_on(lat, &q, beta)).collect();
    Ok(OperatorField::new(f.spec(), pointwise_max(fields, q.len()), format!("beta-maximal beta={beta}")))
}

pub fn beta_maximal(f: &GridFunction, beta: f64) -> Result<OperatorField> {
    beta_maximal_with(&Grid::new(f.spec())?, f, beta)
}

/// Normalized best oscillation `BestC(Q)/ℓ(Q)^β` for every interior node; `None` elsewhere.
pub(crate) fn node_oscillations(lattice: &Lattice, values: &[f64], beta: f64, policy: Policy) -> Vec<Option<f64>> {
    let weights = lattice.level_weights(beta);
    (0..lattice.node_count())
        .into_par_iter()
        .map_init(
            || Sweep::new(lattice, beta),
            |sweep, node| {
                if !lattice.is_interior(node) || lattice.cell_count_of(node) == 0 {
                    return None;
                }
                let (_, v) = best_c_node(lattice, values, node, policy, sweep);
                Some(v / weights[lattice.level_index(node)])
            },
        )
        .collect()
}

fn sharp_on(lattice: &Lattice, values: &[f64], beta: f64, policy: Policy) -> Vec<f64> {
    let osc: Vec<f64> = node_oscillations(lattice, values, beta, policy).into_iter().map(|o| o.unwrap_or(0.0)).collect();
    max_over_ancestors(lattice, &osc)
}

/// `M^#_{β,Q0} f(x)`: max over base cubes `Q ∋ x` of the normalized best oscillation.
pub fn dyadic_sharp_maximal_with(grid: &Grid, f: &GridFunction, beta: f64, policy: Policy) -> Result<OperatorField> {
    check_beta(beta, f.spec().dim)?;
    let values = sharp_on(grid.base(), &f.quantized().0, beta, policy);
    Ok(OperatorField::new(f.spec(), values, format!("dyadic-sharp beta={beta} policy={policy:?}")))
}

pub fn dyadic_sharp_maximal(f: &GridFunction, beta: f64, policy: Policy) -> Result<OperatorField> {
    dyadic_sharp_maximal_with(&Grid::with_margin(f.spec(), 0)?, f, beta, policy)
}

/// `M^#_β f(x)`: max over the shifted lattices of the sharp field on interior cubes.
pub fn sharp_maximal_with(grid: &Grid, f: &GridFunction, beta: f64, policy: Policy) -> Result<OperatorField> {
    check_beta(beta, f.spec().dim)?;
    let q = f.quantized().0;
    let fields = grid.lattices().iter().map(|lat| sharp_on(lat, &q, beta, policy));
    Ok(OperatorField::new(f.spec(), pointwise_max(fields, q.len()), format!("sharp beta={beta} policy={policy:?}")))
}

pub fn sharp_maximal(f: &GridFunction, beta: f64, policy: Policy) -> Result<OperatorField> {
    sharp_maximal_with(&Grid::new(f.spec())?, f, beta, policy)
}

/// `M^{#,c}_β f(x)`: only shifted cubes whose center lies in the cell of `x`.
pub fn centered_sharp_maximal_with(grid: &Grid, f: &GridFunction, beta: f64, policy: Policy) -> Result<OperatorField> {
    check_beta(beta, f.spec().dim)?;
    let q = f.quantized().0;
    let mut field = vec![0.0; q.len()];
    for lat in grid.lattices() {
        let osc = node_oscillations(lat, &q, beta, policy);
        for (node, o) in osc.into_iter().enumerate() {
            if let (Some(v), Some(cell)) = (o, lat.center_cell(node)) {
                field[cell] = f64::max(field[cell], v);
            }
        }
    }
    Ok(OperatorField::new(f.spec(), field, format!("centered-sharp beta={beta} policy={policy:?}")))
}

pub fn centered_sharp_maximal(f: &GridFunction, beta: f64, policy: Policy) -> Result<OperatorField> {
    centered_sharp_maximal_with(&Grid::new(f.spec())?, f, beta, policy)
}

/// `μ(Q)` for every node of a lattice.
pub(crate) fn node_masses(lattice: &Lattice, cell_mass: &[f64]) -> Vec<f64> {
    let mut mass = vec![0.0; lattice.node_count()];
    for (c, &m) in cell_mass.iter().enumerate() {
        mass[lattice.leaf(c)] = m;
    }
    for node in (0..lattice.node_count()).rev() {
        if let Some(p) = lattice.parent(node) {
            mass[p] += mass[node];
        }
    }
    mass
}

/// `M_α μ(x) = max_{Q ∋ x} μ(Q)/ℓ(Q)^{d−α}` over all shifted lattices.
pub fn fractional_maximal_with(grid: &Grid, mu: &DiscreteMeasure, alpha: f64) -> Result<OperatorField> {
    let spec = mu.spec();
    check_alpha(alpha, spec.dim)?;
    let masses = mu.cell_totals();
    let exponent = spec.dim as f64 - alpha;
    let fields: Vec<Vec<f64>> = grid
        .lattices()
        .par_iter()
        .map(|lat| {
            let weights = lat.level_weights(exponent);
            let ratio: Vec<f64> = node_masses(lat, &masses).iter().enumerate().map(|(n, m)| m / weights[lat.level_index(n)]).collect();
            max_over_ancestors(lat, &ratio)
        })
        .collect();
    Ok(OperatorField::new(spec, pointwise_max(fields, masses.len()), format!("frac-maximal alpha={alpha}")))
}

pub fn fractional_maximal(mu: &DiscreteMeasure, alpha: f64) -> Result<OperatorField> {
    fractional_maximal_with(&Grid::new(mu.spec())?, mu, alpha)
}

/// Value and extremal cube of a BMO^β evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoReport {
    pub norm: f64,
    pub extremal: Option<DyadicCube>,
}

/// `sup_{Q ⊆ Ω} BestC(Q)/ℓ(Q)^β` over the shifted lattices.
pub fn bmo_beta_report(grid: &Grid, u: &GridFunction, omega: &CellSet, beta: f64, policy: Policy) -> Result<BmoReport> {
    check_beta(beta, u.spec().dim)?;
    if omega.spec() != u.spec() {
        return Err(HctError::SpecMismatch);
    }
    if omega.is_empty() {
        return Err(HctError::EmptyRegion);
    }
    let q = u.quantized().0;
    let mut best = BmoReport { norm: 0.0, extremal: None };
    for lat in grid.lattices() {
        let osc = node_oscillations(lat, &q, beta, policy);
        for (node, o) in osc.into_iter().enumerate() {
            let Some(v) = o else { continue };
            if (best.extremal.is_none() || v > best.norm) && lat.cells(node).iter().all(|&c| omega.contains(c)) {
                best = BmoReport { norm: v, extremal: Some(lat.cube(node)) };
            }
        }
    }
    Ok(best)
}

pub fn bmo_beta_norm(u: &GridFunction, omega: &CellSet, beta: f64, policy: Policy) -> Result<f64> {
    bmo_beta_report(&Grid::new(u.spec())?, u, omega, beta, policy).map(|r| r.norm)
}

/// Morrey supremum with its per-radius profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyReport {
    pub norm: f64,
    /// `(r, sup_x μ(B(x,r) ∩ Ω)/r^β)` for each dyadic radius, smallest first.
    pub profile: Vec<(f64, f64)>,
    /// Log-log slope of the profile over the smallest radii.
    pub small_scale_slope: f64,
    /// Set when the profile blows up toward the cell scale (slope below −1/2).
    pub diverging: bool,
}

/// d-dimensional inclusive prefix sums on a `(2^n + 1)^d` array.
struct PrefixSums {
    side: usize,
    dim: usize,
    sums: Vec<f64>,
}

impl PrefixSums {
    fn new(spec: &RootSpec, values: &[f64]) -> Self {
        let per_axis = spec.cells_per_axis();
        let side = per_axis + 1;
        let dim = spec.dim;
        let mut sums = vec![0.0; side.pow(dim as u32)];
        let index = |coords: &[usize]| coords.iter().fold(0usize, |acc, &c| acc * side + c);
        for (cell, &v) in values.iter().enumerate() {
            let coords: Vec<usize> = spec.cell_coords(cell).iter().map(|c| c + 1).collect();
            sums[index(&coords)] = v;
        }
        let mut stride = 1;
        for _ in 0..dim {
            for i in 0..sums.len() {
                if (i / stride) % side != 0 {
                    sums[i] += sums[i - stride];
                }
            }
            stride *= side;
        }
        PrefixSums { side, dim, sums }
    }

    /// Sum over the half-open box `[lo, hi)` of cell coordinates (clamped by the caller).
    fn box_sum(&self, lo: &[usize], hi: &[usize]) -> f64 {
        let mut total = 0.0;
        for corner in 0..1usize << self.dim {
            let mut idx = 0usize;
            let mut sign = 1.0;
            for axis in 0..self.dim {
                let c = if corner >> axis & 1 == 1 {
                    sign = -sign;
                    lo[axis]
                } else {
                    hi[axis]
                };
                idx = idx * self.side + c;
            }
            total += sign * self.sums[idx];
        }
        total
    }
}

/// `sup_{x ∈ Ω, r} μ(B(x,r) ∩ Ω)/r^β` with `B` the half-open ∞-ball `[x−r, x+r)`
/// around cell centers and `r = h·2^{j−1}`, `j = 0..=n+1`.
pub fn morrey_report(mu: &DiscreteMeasure, omega: &CellSet, beta: f64) -> Result<MorreyReport> {
    let spec = mu.spec();
    check_beta(beta, spec.dim)?;
    if omega.spec() != spec {
        return Err(HctError::SpecMismatch);
    }
    if omega.is_empty() {
        return Err(HctError::EmptyRegion);
    }
    let masses: Vec<f64> = mu.cell_totals().iter().zip(omega.mask()).map(|(&m, &o)| if o { m } else { 0.0 }).collect();
    let prefix = PrefixSums::new(spec, &masses);
    let per_axis = spec.cells_per_axis();
    let h = spec.cell_side();
    let members: Vec<usize> = omega.iter().collect();
    let profile: Vec<(f64, f64)> = (0..=spec.levels + 1)
        .into_par_iter()
        .map(|j| {
            let r = h * (j as f64 - 1.0).exp2();
            let (below, above) = if j == 0 { (0, 1) } else { (1usize << (j - 1), 1usize << (j - 1)) };
            let sup = members
                .iter()
                .map(|&cell| {
                    let coords = spec.cell_coords(cell);
                    let lo: Vec<usize> = coords.iter().map(|&c| c.saturating_sub(below)).collect();
                    let hi: Vec<usize> = coords.iter().map(|&c| (c + above).min(per_axis)).collect();
                    prefix.box_sum(&lo, &hi)
                })
                .fold(0.0, f64::max);
            (r, sup / r.powf(beta))
        })
        .collect();
    let norm = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    let small: Vec<(f64, f64)> = profile.iter().take(4).filter(|p| p.1 > 0.0).map(|&(r, v)| (r.ln(), v.ln())).collect();
    let slope = if small.len() >= 2 {
        let mx = small.iter().map(|p| p.0).sum::<f64>() / small.len() as f64;
        let my = small.iter().map(|p| p.1).sum::<f64>() / small.len() as f64;
        let sxy: f64 = small.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = small.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        0.0
    };
    Ok(MorreyReport { norm, profile, small_scale_slope: slope, diverging: slope < -0.5 })
}

pub fn morrey_norm(mu: &DiscreteMeasure, omega: &CellSet, beta: f64) -> Result<f64> {
    morrey_report(mu, omega, beta).map(|r| r.norm)
}
