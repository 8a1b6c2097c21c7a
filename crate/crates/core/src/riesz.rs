//! Riesz potentials: direct kernel summation and dyadic potentials on shifted lattices.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::content::{check_beta, lattice_content};
use crate::error::{HctError, Result};
use crate::grid::{build_root, shifted_lattices, CellSet, Grid, Lattice, RootSpec};
use crate::operators::{fractional_maximal_with, node_masses, OperatorField};

pub(crate) fn check_alpha(alpha: f64, dim: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < dim as f64) {
        return Err(HctError::AlphaOutOfRange { alpha, dim });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: Vec<f64>,
    pub mass: f64,
}

/// Nonnegative masses on cells plus point atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    spec: RootSpec,
    cell_mass: Vec<f64>,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(spec: &RootSpec, cell_mass: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if cell_mass.len() != spec.cell_count() {
            return Err(HctError::InvalidParameter(format!("measure has {} cell masses, grid has {} cells", cell_mass.len(), spec.cell_count())));
        }
        if let Some((cell, m)) = cell_mass.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m >= 0.0)) {
            return Err(HctError::InvalidParameter(format!("mass {m} at cell {cell} is not finite and nonnegative")));
        }
        for atom in &atoms {
            if !(atom.mass.is_finite() && atom.mass > 0.0) {
                return Err(HctError::InvalidParameter(format!("atom mass {} must be positive", atom.mass)));
            }
            if spec.locate(&atom.position).is_none() {
                return Err(HctError::InvalidParameter(format!("atom at {:?} lies outside the root", atom.position)));
            }
        }
        Ok(DiscreteMeasure { spec: spec.clone(), cell_mass, atoms })
    }

    pub fn from_cells(spec: &RootSpec, cell_mass: Vec<f64>) -> Result<Self> {
        Self::new(spec, cell_mass, Vec::new())
    }

    pub fn zero(spec: &RootSpec) -> Self {
        DiscreteMeasure { spec: spec.clone(), cell_mass: vec![0.0; spec.cell_count()], atoms: Vec::new() }
    }

    pub fn atom(spec: &RootSpec, position: Vec<f64>, mass: f64) -> Result<Self> {
        Self::new(spec, vec![0.0; spec.cell_count()], vec![Atom { position, mass }])
    }

    pub fn spec(&self) -> &RootSpec {
        &self.spec
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Cell masses with every atom added to the half-open cell containing it.
    pub fn cell_totals(&self) -> Vec<f64> {
        let mut totals = self.cell_mass.clone();
        for atom in &self.atoms {
            let cell = self.spec.locate(&atom.position).expect("atoms are validated");
            totals[cell] += atom.mass;
        }
        totals
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass.iter().sum::<f64>() + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.cell_mass.iter_mut().for_each(|m| *m *= c);
        out.atoms.iter_mut().for_each(|a| a.mass *= c);
        out.atoms.retain(|a| a.mass > 0.0);
        out
    }

    pub fn sum(&self, other: &DiscreteMeasure) -> Result<Self> {
        if self.spec != other.spec {
            return Err(HctError::SpecMismatch);
        }
        let cell_mass = self.cell_mass.iter().zip(&other.cell_mass).map(|(a, b)| a + b).collect();
        let atoms = self.atoms.iter().chain(&other.atoms).cloned().collect();
        Ok(DiscreteMeasure { spec: self.spec.clone(), cell_mass, atoms })
    }

    /// `μ` restricted to the cells of `region` (atoms kept when their cell is in the region).
    pub fn restrict(&self, region: &CellSet) -> Result<Self> {
        if region.spec() != &self.spec {
            return Err(HctError::SpecMismatch);
        }
        let cell_mass = self.cell_mass.iter().zip(region.mask()).map(|(&m, &r)| if r { m } else { 0.0 }).collect();
        let atoms = self.atoms.iter().filter(|a| region.contains(self.spec.locate(&a.position).expect("validated"))).cloned().collect();
        Ok(DiscreteMeasure { spec: self.spec.clone(), cell_mass, atoms })
    }
}

/// Order `α` and the level window of the dyadic sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszParams {
    pub alpha: f64,
    pub k_min: i32,
    pub k_max: i32,
}

impl RieszParams {
    /// Window from the root level to the finest level.
    pub fn new(alpha: f64, spec: &RootSpec) -> Self {
        RieszParams { alpha, k_min: 0, k_max: spec.levels as i32 }
    }

    pub fn validate(&self, spec: &RootSpec) -> Result<()> {
        check_alpha(self.alpha, spec.dim)?;
        if self.k_min > self.k_max {
            return Err(HctError::InvalidParameter(format!("k_min = {} exceeds k_max = {}", self.k_min, self.k_max)));
        }
        if self.k_max > spec.levels as i32 {
            return Err(HctError::InvalidParameter(format!("k_max = {} is finer than the grid ({} levels)", self.k_max, spec.levels)));
        }
        Ok(())
    }

    /// `γ(α) = π^{d/2} 2^α Γ(α/2) / Γ((d−α)/2)`.
    pub fn gamma(&self, dim: usize) -> f64 {
        riesz_gamma(self.alpha, dim)
    }
}

pub fn riesz_gamma(alpha: f64, dim: usize) -> f64 {
    let d = dim as f64;
    PI.powf(d / 2.0) * alpha.exp2() * gamma(alpha / 2.0) / gamma((d - alpha) / 2.0)
}

fn tensor_integral(rule: &GaussLegendre, lo: &[f64], side: f64, f: &impl Fn(&[f64]) -> f64) -> f64 {
    let pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    let d = lo.len();
    let k = pairs.len();
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    for flat in 0..k.pow(d as u32) {
        let mut rem = flat;
        let mut weight = 1.0;
        for axis in 0..d {
            let (x, w) = pairs[rem % k];
            rem /= k;
            point[axis] = lo[axis] + 0.5 * side * (x + 1.0);
            weight *= 0.5 * side * w;
        }
        total += weight * f(&point);
    }
    total
}

fn adaptive_integral(rule: &GaussLegendre, lo: &[f64], side: f64, f: &impl Fn(&[f64]) -> f64, depth: u32) -> f64 {
    let coarse = tensor_integral(rule, lo, side, f);
    let d = lo.len();
    let half = side / 2.0;
    let children: Vec<Vec<f64>> =
        (0..1usize << d).map(|mask| (0..d).map(|a| lo[a] + if mask >> a & 1 == 1 { half } else { 0.0 }).collect()).collect();
    let fine: f64 = children.iter().map(|c| tensor_integral(rule, c, half, f)).sum();
    if depth == 0 || (fine - coarse).abs() <= 1e-13 * fine.abs() {
        return fine;
    }
    children.iter().map(|c| adaptive_integral(rule, c, half, f, depth - 1)).sum()
}

/// Mean of `|z|^{α−d}` over the unit cube centered at the origin.
///
/// With `J = ∫_{[0,1]^d} |z|^{α−d}`, homogeneity gives `∫_{[0,1/2]^d} = 2^{−α} J`,
/// so `J` equals the integral over the shell `[0,1]^d \ [0,1/2]^d` (where the
/// kernel is smooth) divided by `1 − 2^{−α}`.
pub fn self_cell_mean(alpha: f64, dim: usize) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(10).unwrap());
    let exponent = alpha - dim as f64;
    let kernel = |z: &[f64]| z.iter().map(|x| x * x).sum::<f64>().sqrt().powf(exponent);
    let shell: f64 = (1..1usize << dim)
        .map(|mask| {
            let lo: Vec<f64> = (0..dim).map(|a| if mask >> a & 1 == 1 { 0.5 } else { 0.0 }).collect();
            adaptive_integral(&rule, &lo, 0.5, &kernel, 6)
        })
        .sum();
    let j = shell / (1.0 - (-alpha).exp2());
    (dim as f64).exp2() * (-alpha).exp2() * j
}

/// `I_α μ(x) = γ(α)^{-1} ∫ |x − y|^{α−d} dμ(y)` at every cell center.
///
/// Cell masses sit at cell centers; the evaluation cell's own mass (and atoms
/// inside it) use the cell-averaged kernel instead of the singular value.
pub fn riesz_potential(mu: &DiscreteMeasure, params: &RieszParams) -> Result<OperatorField> {
    let spec = mu.spec();
    check_alpha(params.alpha, spec.dim)?;
    let d = spec.dim;
    let h = spec.cell_side();
    let exponent = params.alpha - d as f64;
    let self_kernel = self_cell_mean(params.alpha, d) * h.powf(exponent);
    let per_axis = spec.cells_per_axis();

    // Kernel indexed by absolute per-axis offsets, row-major like cells.
    let table: Vec<f64> = (0..spec.cell_count())
        .map(|off| {
            let o = spec.cell_coords(off);
            if o.iter().all(|&x| x == 0) {
                self_kernel
            } else {
                (h * o.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt()).powf(exponent)
            }
        })
        .collect();
    let sources: Vec<(Vec<usize>, f64)> =
        mu.cell_mass().iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(c, &m)| (spec.cell_coords(c), m)).collect();
    let atom_cells: Vec<usize> = mu.atoms().iter().map(|a| spec.locate(&a.position).expect("validated")).collect();
    let norm = params.gamma(d);

    let values = (0..spec.cell_count())
        .into_par_iter()
        .map(|cell| {
            let x = spec.cell_coords(cell);
            let mut total = 0.0;
            for (y, m) in &sources {
                let off = x.iter().zip(y).fold(0usize, |acc, (&a, &b)| acc * per_axis + a.abs_diff(b));
                total += m * table[off];
            }
            let center = spec.cell_center(cell);
            for (atom, &ac) in mu.atoms().iter().zip(&atom_cells) {
                total += atom.mass
                    * if ac == cell {
                        self_kernel
                    } else {
                        center.iter().zip(&atom.position).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt().powf(exponent)
                    };
            }
            total / norm
        })
        .collect();
    Ok(OperatorField::new(spec, values, format!("riesz alpha={}", params.alpha)))
}

/// `I^D_α μ(x) = Σ_{Q ∋ x, k_min ≤ k ≤ k_max} μ(Q)/ℓ(Q)^{d−α}` on one lattice.
pub fn dyadic_riesz(mu: &DiscreteMeasure, params: &RieszParams, lattice: &Lattice) -> Result<OperatorField> {
    let spec = mu.spec();
    params.validate(spec)?;
    if lattice.spec() != spec {
        return Err(HctError::SpecMismatch);
    }
    if params.k_min < lattice.top_level() {
        return Err(HctError::InvalidParameter(format!("k_min = {} is coarser than the lattice's top level {}", params.k_min, lattice.top_level())));
    }
    let values = dyadic_riesz_values(lattice, &mu.cell_totals(), params);
    Ok(OperatorField::new(
        spec,
        values,
        format!("dyadic-riesz alpha={} shift={} k={}..{}", params.alpha, lattice.shift().0, params.k_min, params.k_max),
    ))
}

fn dyadic_riesz_values(lattice: &Lattice, masses: &[f64], params: &RieszParams) -> Vec<f64> {
    let exponent = lattice.spec().dim as f64 - params.alpha;
    let weights = lattice.level_weights(exponent);
    let mass = node_masses(lattice, masses);
    let mut acc = vec![0.0; lattice.node_count()];
    for node in 0..lattice.node_count() {
        let level = lattice.level_of(node);
        let own = if (params.k_min..=params.k_max).contains(&level) { mass[node] / weights[lattice.level_index(node)] } else { 0.0 };
        acc[node] = own + lattice.parent(node).map_or(0.0, |p| acc[p]);
    }
    (0..lattice.spec().cell_count()).map(|c| acc[lattice.leaf(c)]).collect()
}

/// Max and sum over the `2^d` shifted lattices of the dyadic potentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedRiesz {
    pub max: OperatorField,
    pub sum: OperatorField,
}

pub fn riesz_combined(mu: &DiscreteMeasure, params: &RieszParams) -> Result<CombinedRiesz> {
    let spec = mu.spec();
    params.validate(spec)?;
    let lattices = shifted_lattices(spec, params.k_min.min(0).unsigned_abs())?;
    let masses = mu.cell_totals();
    let fields: Vec<Vec<f64>> = lattices.par_iter().map(|lat| dyadic_riesz_values(lat, &masses, params)).collect();
    let cells = spec.cell_count();
    let max = (0..cells).map(|c| fields.iter().map(|f| f[c]).fold(0.0, f64::max)).collect();
    let sum = (0..cells).map(|c| fields.iter().map(|f| f[c]).sum()).collect();
    Ok(CombinedRiesz {
        max: OperatorField::new(spec, max, format!("riesz-combined-max alpha={}", params.alpha)),
        sum: OperatorField::new(spec, sum, format!("riesz-combined-sum alpha={}", params.alpha)),
    })
}

/// One evaluation of the exponential good-λ inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodLambdaRiesz {
    /// `H^{β,Q0}_∞({I^D_α μ > 2λ, M_α μ ≤ ελ})`.
    pub lhs: f64,
    /// `H^{β,Q0}_∞({I^D_α μ > λ})`.
    pub rhs: f64,
    /// `lhs / rhs`, zero when both vanish.
    pub ratio: f64,
    /// False when run outside `β ∈ (d−α, d]` with `force`.
    pub conforming: bool,
}

/// Precomputed fields for sweeping `λ` and `ε` without recomputing operators.
pub struct GoodLambdaRieszFields {
    tree: Lattice,
    beta: f64,
    pub dyadic: Vec<f64>,
    pub fractional: Vec<f64>,
    conforming: bool,
}

pub(crate) fn check_dimensional(alpha: f64, beta: f64, dim: usize) -> Result<()> {
    let lower = dim as f64 - alpha;
    if !(beta > lower && beta <= dim as f64) {
        return Err(HctError::DimensionalConstraint { alpha, beta, dim, lower });
    }
    Ok(())
}

impl GoodLambdaRieszFields {
    pub fn new(mu: &DiscreteMeasure, alpha: f64, beta: f64, lattice: &Lattice, force: bool) -> Result<Self> {
        let spec = mu.spec();
        check_alpha(alpha, spec.dim)?;
        check_beta(beta, spec.dim)?;
        let conforming = check_dimensional(alpha, beta, spec.dim).is_ok();
        if !conforming && !force {
            check_dimensional(alpha, beta, spec.dim)?;
        }
        let params = RieszParams { alpha, k_min: lattice.top_level(), k_max: spec.levels as i32 };
        let dyadic = dyadic_riesz(mu, &params, lattice)?.values;
        let fractional = fractional_maximal_with(&Grid::new(spec)?, mu, alpha)?.values;
        Ok(GoodLambdaRieszFields { tree: build_root(spec)?, beta, dyadic, fractional, conforming })
    }

    pub fn check(&self, lambda: f64, epsilon: f64) -> Result<GoodLambdaRiesz> {
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(HctError::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(HctError::InvalidParameter(format!("epsilon = {epsilon} must lie in (0, 1)")));
        }
        let high: Vec<bool> = self.dyadic.iter().zip(&self.fractional).map(|(&i, &m)| i > 2.0 * lambda && m <= epsilon * lambda).collect();
        let level: Vec<bool> = self.dyadic.iter().map(|&i| i > lambda).collect();
        let lhs = lattice_content(&self.tree, &high, self.beta);
        let rhs = lattice_content(&self.tree, &level, self.beta);
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        Ok(GoodLambdaRiesz { lhs, rhs, ratio, conforming: self.conforming })
    }
}

/// Both sides of `H({I^D μ > 2λ, M_α μ ≤ ελ}) ≤ C e^{−c/ε} H({I^D μ > λ})` (without the constant).
pub fn goodlambda_riesz_check(
    mu: &DiscreteMeasure,
    alpha: f64,
    beta: f64,
    lambda: f64,
    epsilon: f64,
    lattice: &Lattice,
    force: bool,
) -> Result<GoodLambdaRiesz> {
    GoodLambdaRieszFields::new(mu, alpha, beta, lattice, force)?.check(lambda, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, n: u32) -> RootSpec {
        RootSpec::unit(d, n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn gamma_values() {
        // d=2, α=1: π·2·Γ(1/2)/Γ(1/2) = 2π
        assert!(close(riesz_gamma(1.0, 2), 2.0 * PI, 1e-12));
        // d=3, α=2: π^{3/2}·4·Γ(1)/Γ(1/2) = 4π
        assert!(close(riesz_gamma(2.0, 3), 4.0 * PI, 1e-12));
    }

    #[test]
    fn self_mean_in_one_dimension() {
        // mean of |z|^{α−1} over [−1/2, 1/2] is (1/2)^{α−1}/α
        for alpha in [0.3, 0.5, 0.9] {
            let exact = 0.5f64.powf(alpha - 1.0) / alpha;
            assert!(close(self_cell_mean(alpha, 1), exact, 1e-10), "alpha {alpha}");
        }
    }

    #[test]
    fn self_mean_in_two_dimensions() {
        // 8 ∫_0^{π/4} ∫_0^{1/(2cosθ)} r^{α−1} dr dθ = (8/α) ∫_0^{π/4} (2cosθ)^{−α} dθ
        let alpha = 1.0;
        let steps = 20000;
        let hstep = PI / 4.0 / steps as f64;
        let g = |t: f64| (2.0 * t.cos()).powf(-alpha);
        let mut s = g(0.0) + g(PI / 4.0);
        for i in 1..steps {
            s += g(i as f64 * hstep) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let exact = 8.0 / alpha * s * hstep / 3.0;
        assert!(close(self_cell_mean(alpha, 2), exact, 1e-9));
    }

    #[test]
    fn atom_kernel_off_cell() {
        let s = spec(2, 3);
        let mu = DiscreteMeasure::atom(&s, vec![0.0625, 0.0625], 1.0).unwrap();
        let p = RieszParams::new(1.0, &s);
        let field = riesz_potential(&mu, &p).unwrap();
        let cell = s.cell_index(&[4, 6]);
        let x = s.cell_center(cell);
        let r = ((x[0] - 0.0625).powi(2) + (x[1] - 0.0625).powi(2)).sqrt();
        assert!(close(field.values[cell], r.powf(-1.0) / p.gamma(2), 1e-12));
        assert!(field.values[0].is_finite());
    }

    #[test]
    fn dyadic_atom_geometric_sum() {
        let s = spec(2, 4);
        let mu = DiscreteMeasure::atom(&s, vec![0.3, 0.7], 1.0).unwrap();
        let alpha = 1.3;
        let tree = build_root(&s).unwrap();
        let field = dyadic_riesz(&mu, &RieszParams::new(alpha, &s), &tree).unwrap();
        let r = 2f64.powf(2.0 - alpha);
        let expected = (r.powi(5) - 1.0) / (r - 1.0);
        let cell = s.locate(&[0.3, 0.7]).unwrap();
        assert!(close(field.values[cell], expected, 1e-12));
    }

    #[test]
    fn linearity_and_zero() {
        let s = spec(2, 3);
        let a = DiscreteMeasure::from_cells(&s, (0..64).map(|c| (c % 4) as f64).collect()).unwrap();
        let b = DiscreteMeasure::atom(&s, vec![0.5, 0.2], 2.0).unwrap();
        let p = RieszParams::new(0.7, &s);
        let fa = riesz_potential(&a, &p).unwrap();
        let fb = riesz_potential(&b, &p).unwrap();
        let fab = riesz_potential(&a.sum(&b).unwrap(), &p).unwrap();
        for c in 0..64 {
            assert!(close(fa.values[c] + fb.values[c], fab.values[c], 1e-12));
        }
        let zero = riesz_combined(&DiscreteMeasure::zero(&s), &p).unwrap();
        assert!(zero.max.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn combined_dominates_each_lattice() {
        let s = spec(2, 4);
        let mu = DiscreteMeasure::from_cells(&s, (0..256).map(|c| ((c * 7) % 5) as f64).collect()).unwrap();
        let p = RieszParams::new(1.0, &s);
        let comb = riesz_combined(&mu, &p).unwrap();
        for lat in shifted_lattices(&s, 0).unwrap() {
            let single = dyadic_riesz(&mu, &p, &lat).unwrap();
            assert!(single.values.iter().zip(&comb.max.values).all(|(a, b)| a <= b));
            assert!(comb.max.values.iter().zip(&comb.sum.values).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn dimensional_constraint() {
        let s = spec(2, 3);
        let mu = DiscreteMeasure::atom(&s, vec![0.5, 0.5], 1.0).unwrap();
        let tree = build_root(&s).unwrap();
        assert!(matches!(goodlambda_riesz_check(&mu, 1.0, 1.0, 1.0, 0.5, &tree, false), Err(HctError::DimensionalConstraint { .. })));
        let forced = goodlambda_riesz_check(&mu, 1.0, 1.0, 1.0, 0.5, &tree, true).unwrap();
        assert!(!forced.conforming);
        let near_one = goodlambda_riesz_check(&mu, 1.0, 1.5, 1e-6, 0.999, &tree, false).unwrap();
        assert!(near_one.lhs <= near_one.rhs);
    }
}
