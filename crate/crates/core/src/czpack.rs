//! Calderón–Zygmund decomposition for dyadic content, packing selection and the
//! sharp-maximal good-λ check.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::choquet::{integral, sweep_cube_integrals, GridFunction};
use crate::content::{check_beta, lattice_content};
use crate::error::{HctError, Result};
use crate::grid::{build_root, CellSet, DyadicCube, Grid, Lattice, RootSpec};
use crate::operators::{dyadic_maximal_with, dyadic_sharp_maximal_with, Policy};

/// Relative slack for comparisons between independently rounded quantities.
const ROUNDING: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzCube {
    pub cube: DyadicCube,
    /// `∫_Q |f| dH / ℓ(Q)^β`.
    pub average: f64,
}

/// Outcome of checking the four decomposition properties.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CzCertificate {
    pub non_overlapping: bool,
    pub union_is_superlevel_set: bool,
    pub maximal: bool,
    pub averages_bounded: bool,
    pub bounded_outside: bool,
    pub failures: Vec<String>,
}

impl CzCertificate {
    pub fn holds(&self) -> bool {
        self.non_overlapping && self.union_is_superlevel_set && self.maximal && self.averages_bounded && self.bounded_outside
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub beta: f64,
    pub cubes: Vec<CzCube>,
    pub certificate: CzCertificate,
}

/// Maximal base cubes inside `{M_{H^{β,Q0}} f > λ}`, with a certificate.
///
/// Refuses `λ` below the root average: the root would be a stopping cube and
/// the upper average bound needs its parent.
pub fn cz_decompose(f: &GridFunction, beta: f64, lambda: f64) -> Result<CzDecomposition> {
    check_beta(beta, f.spec().dim)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(HctError::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    let grid = Grid::with_margin(f.spec(), 0)?;
    let tree = grid.base();
    let values = f.quantized().0;
    let weights = tree.level_weights(beta);
    let integrals = sweep_cube_integrals(tree, &values, beta);
    let averages: Vec<f64> = (0..tree.node_count()).map(|n| integrals[n] / weights[tree.level_index(n)]).collect();
    if averages[0] > lambda {
        return Err(HctError::RootSaturated { root_average: averages[0], lambda });
    }
    let maximal = dyadic_maximal_with(&grid, f, beta)?;
    let superlevel: Vec<bool> = maximal.values.iter().map(|&m| m > lambda).collect();

    let mut inside = vec![true; tree.node_count()];
    for node in tree.level_nodes(tree.finest_level()) {
        inside[node] = superlevel[tree.leaf_cell(node)];
    }
    for node in (0..tree.node_count()).rev() {
        if let Some(p) = tree.parent(node) {
            inside[p] &= inside[node];
        }
    }
    if inside[0] {
        return Err(HctError::RootSaturated { root_average: averages[0], lambda });
    }
    let cubes: Vec<CzCube> = (1..tree.node_count())
        .filter(|&n| inside[n] && !inside[tree.parent(n).expect("non-root")])
        .map(|n| CzCube { cube: tree.cube(n), average: averages[n] })
        .collect();
    let certificate = certify_cz(f, tree, beta, lambda, &cubes, &superlevel)?;
    Ok(CzDecomposition { lambda, beta, cubes, certificate })
}

fn certify_cz(f: &GridFunction, tree: &Lattice, beta: f64, lambda: f64, cubes: &[CzCube], superlevel: &[bool]) -> Result<CzCertificate> {
    let spec = f.spec();
    let mut cert = CzCertificate {
        non_overlapping: true,
        union_is_superlevel_set: true,
        maximal: true,
        averages_bounded: true,
        bounded_outside: true,
        failures: Vec::new(),
    };
    let mut cover = vec![0u32; spec.cell_count()];
    for cz in cubes {
        let node = tree.node_of(&cz.cube).ok_or_else(|| HctError::UnknownCube(cz.cube.to_string()))?;
        let cells = tree.cells(node);
        for &c in &cells {
            cover[c] += 1;
        }
        if let Some(p) = tree.parent(node) {
            if tree.cells(p).iter().all(|&c| superlevel[c]) {
                cert.maximal = false;
                cert.failures.push(format!("parent of {} lies inside the superlevel set", cz.cube));
            }
        }
        // Independent route: the standalone region integral.
        let region = CellSet::from_cells(spec, cells);
        let avg = integral(f, &region, beta)? / tree.side(node).powf(beta);
        let upper = beta.exp2() * lambda;
        if !(avg > lambda && avg <= upper * (1.0 + ROUNDING)) {
            cert.averages_bounded = false;
            cert.failures.push(format!("average {avg} of {} outside ({lambda}, {upper}]", cz.cube));
        }
    }
    let (q, _) = f.quantized();
    for c in 0..spec.cell_count() {
        if cover[c] > 1 {
            cert.non_overlapping = false;
            cert.failures.push(format!("cell {c} covered {} times", cover[c]));
        }
        if (cover[c] > 0) != superlevel[c] {
            cert.union_is_superlevel_set = false;
            cert.failures.push(format!("cell {c}: covered = {}, in superlevel set = {}", cover[c] > 0, superlevel[c]));
        }
        if cover[c] == 0 && q[c] > lambda {
            cert.bounded_outside = false;
            cert.failures.push(format!("f = {} > λ at uncovered cell {c}", q[c]));
        }
    }
    Ok(cert)
}

/// Coverage, packing and ancestor bounds of a selection, checked exactly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PackingCertificate {
    /// Every family cube lies in a selected cube or an ancestor.
    pub coverage: bool,
    /// `max_Q Σ_{selected ⊆ Q} ℓ^β / ℓ(Q)^β` over every lattice cube; at most 2.
    pub packing_ratio: f64,
    pub packing: bool,
    /// `ℓ(Q̃)^β ≤ Σ_{selected ⊆ Q̃} ℓ^β` for every ancestor.
    pub ancestors_dominated: bool,
    /// `H(∪ family)`.
    pub union_content: f64,
    /// `Σ_{selected outside ancestors} ℓ^β + Σ_{ancestors} ℓ^β`.
    pub middle: f64,
    /// `Σ_{selected} ℓ^β`.
    pub selected_sum: f64,
    pub sandwich: bool,
    /// `Σ_{selected ⊆ Q} ℓ^β` for every cube touched by the selection.
    pub touched: Vec<(DyadicCube, f64)>,
}

impl PackingCertificate {
    pub fn holds(&self) -> bool {
        self.coverage && self.packing && self.ancestors_dominated && self.sandwich
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingSelection {
    pub beta: f64,
    pub family: Vec<DyadicCube>,
    pub selected: Vec<DyadicCube>,
    pub ancestors: Vec<DyadicCube>,
    pub certificate: PackingCertificate,
}

fn family_lattice(spec: &RootSpec, family: &[DyadicCube]) -> Result<Lattice> {
    let shift = family.first().map_or(crate::grid::ShiftId::BASE, |c| c.shift);
    if let Some(c) = family.iter().find(|c| c.shift != shift) {
        return Err(HctError::ForeignCube(c.to_string()));
    }
    let top = family.iter().map(|c| c.level).min().unwrap_or(0).min(0);
    Lattice::build(spec, shift, top.unsigned_abs(), crate::grid::DEFAULT_CELL_CAP)
}

fn family_nodes(lattice: &Lattice, family: &[DyadicCube]) -> Result<Vec<usize>> {
    let nodes = family.iter().map(|c| lattice.node_of(c).ok_or_else(|| HctError::ForeignCube(c.to_string()))).collect::<Result<Vec<_>>>()?;
    let mut owner: Vec<Option<usize>> = vec![None; lattice.node_count()];
    for (i, &n) in nodes.iter().enumerate() {
        if let Some(j) = owner[n] {
            return Err(HctError::Overlapping(family[j].to_string(), family[i].to_string()));
        }
        owner[n] = Some(i);
    }
    for (i, &n) in nodes.iter().enumerate() {
        for a in lattice.ancestor_nodes(n).into_iter().skip(1) {
            if let Some(j) = owner[a] {
                return Err(HctError::Overlapping(family[j].to_string(), family[i].to_string()));
            }
        }
    }
    Ok(nodes)
}

/// Greedy packing selection, coarse cubes first, ties by index.
///
/// A cube is accepted when every ancestor keeps `Σ ℓ^β ≤ 2ℓ(ancestor)^β`.
/// Otherwise the closest violating ancestor becomes a covering ancestor,
/// absorbing earlier ancestors inside it, and later cubes inside it are skipped.
pub fn packing_select(spec: &RootSpec, family: &[DyadicCube], beta: f64) -> Result<PackingSelection> {
    check_beta(beta, spec.dim)?;
    let lattice = family_lattice(spec, family)?;
    let nodes = family_nodes(&lattice, family)?;
    let weights = lattice.level_weights(beta);
    let w = |n: usize| weights[lattice.level_index(n)];

    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| family[a].level.cmp(&family[b].level).then(family[a].index.cmp(&family[b].index)));

    let mut sum = vec![0.0; lattice.node_count()];
    let mut is_ancestor = vec![false; lattice.node_count()];
    let mut selected = Vec::new();
    let mut ancestors: Vec<usize> = Vec::new();
    for i in order {
        let node = nodes[i];
        let chain = lattice.ancestor_nodes(node);
        if chain.iter().any(|&a| is_ancestor[a]) {
            continue;
        }
        let add = w(node);
        match chain.iter().copied().find(|&a| sum[a] + add > 2.0 * w(a)) {
            None => {
                for &a in &chain {
                    sum[a] += add;
                }
                selected.push(node);
            }
            Some(violating) => {
                ancestors.retain(|&q| {
                    let inside = lattice.ancestor_nodes(q).contains(&violating);
                    if inside {
                        is_ancestor[q] = false;
                    }
                    !inside
                });
                is_ancestor[violating] = true;
                ancestors.push(violating);
            }
        }
    }

    let certificate = certify_packing(&lattice, &nodes, &selected, &ancestors, beta);
    Ok(PackingSelection {
        beta,
        family: family.to_vec(),
        selected: selected.iter().map(|&n| lattice.cube(n)).collect(),
        ancestors: ancestors.iter().map(|&n| lattice.cube(n)).collect(),
        certificate,
    })
}

fn certify_packing(lattice: &Lattice, family: &[usize], selected: &[usize], ancestors: &[usize], beta: f64) -> PackingCertificate {
    let weights = lattice.level_weights(beta);
    let w = |n: usize| weights[lattice.level_index(n)];
    let spec = lattice.spec();

    let mut covered = vec![false; spec.cell_count()];
    for &n in selected.iter().chain(ancestors) {
        for c in lattice.cells(n) {
            covered[c] = true;
        }
    }
    let mut family_mask = vec![false; spec.cell_count()];
    for &n in family {
        for c in lattice.cells(n) {
            family_mask[c] = true;
        }
    }
    let coverage = family_mask.iter().zip(&covered).all(|(&f, &c)| !f || c);

    // Exhaustive packing sums: add each selected weight to all of its ancestors.
    let mut sums = vec![0.0; lattice.node_count()];
    for &s in selected {
        for a in lattice.ancestor_nodes(s) {
            sums[a] += w(s);
        }
    }
    let packing_ratio = (0..lattice.node_count()).map(|n| sums[n] / w(n)).fold(0.0, f64::max);
    let packing = packing_ratio <= 2.0 * (1.0 + ROUNDING);
    let ancestors_dominated = ancestors.iter().all(|&a| w(a) <= sums[a] * (1.0 + ROUNDING));

    let union_content = lattice_content(lattice, &family_mask, beta);
    let ancestor_set: HashSet<usize> = ancestors.iter().copied().collect();
    let outside: f64 = selected.iter().filter(|&&s| !lattice.ancestor_nodes(s).iter().any(|a| ancestor_set.contains(a))).map(|&s| w(s)).sum();
    let middle = outside + ancestors.iter().map(|&a| w(a)).sum::<f64>();
    let selected_sum: f64 = selected.iter().map(|&s| w(s)).sum();
    let slack = ROUNDING * (1.0 + selected_sum);
    let sandwich = union_content <= middle + slack && middle <= selected_sum + slack && selected_sum <= 2.0 * union_content + slack;

    let touched: BTreeMap<DyadicCube, f64> = (0..lattice.node_count()).filter(|&n| sums[n] > 0.0).map(|n| (lattice.cube(n), sums[n])).collect();
    PackingCertificate {
        coverage,
        packing_ratio,
        packing,
        ancestors_dominated,
        union_content,
        middle,
        selected_sum,
        sandwich,
        touched: touched.into_iter().collect(),
    }
}

/// Both sides of `Σ_k ∫_{Q_k} g dH ≤ 2 ∫_{∪Q_k} g dH` for the selected cubes.
pub fn packing_integral_check(selection: &PackingSelection, g: &GridFunction) -> Result<(f64, f64)> {
    let spec = g.spec();
    let lattice = family_lattice(spec, &selection.selected)?;
    let mut union = CellSet::empty(spec);
    let mut lhs = 0.0;
    for cube in &selection.selected {
        let node = lattice.node_of(cube).ok_or_else(|| HctError::ForeignCube(cube.to_string()))?;
        let region = CellSet::from_cells(spec, lattice.cells(node));
        lhs += integral(g, &region, selection.beta)?;
        union = union.union(&region)?;
    }
    Ok((lhs, 2.0 * integral(g, &union, selection.beta)?))
}

/// `μ(t) ≤ H({M^# f > t/A}) + K·μ(2^{−β−2} t)` evaluated for `K = 8/A` and `K = 16/A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodLambdaSharp {
    pub t: f64,
    pub a: f64,
    /// `μ(t) = H^{β,Q0}_∞({M f > t})`.
    pub lhs: f64,
    /// `H^{β,Q0}_∞({M^#_{β,Q0} f > t/A})`.
    pub sharp_term: f64,
    /// `μ(2^{−β−2} t)`.
    pub tail: f64,
    pub rhs_8: f64,
    pub rhs_16: f64,
    pub margin_8: f64,
    pub margin_16: f64,
}

/// Maximal and sharp fields of `f`, computed once for a sweep over `(t, A)`.
pub struct GoodLambdaSharpFields {
    tree: Lattice,
    beta: f64,
    pub maximal: Vec<f64>,
    pub sharp: Vec<f64>,
}

impl GoodLambdaSharpFields {
    pub fn new(f: &GridFunction, beta: f64, policy: Policy) -> Result<Self> {
        check_beta(beta, f.spec().dim)?;
        let grid = Grid::with_margin(f.spec(), 0)?;
        let maximal = dyadic_maximal_with(&grid, f, beta)?.values;
        let sharp = dyadic_sharp_maximal_with(&grid, f, beta, policy)?.values;
        Ok(GoodLambdaSharpFields { tree: build_root(f.spec())?, beta, maximal, sharp })
    }

    fn level_content(&self, field: &[f64], t: f64) -> f64 {
        let mask: Vec<bool> = field.iter().map(|&v| v > t).collect();
        lattice_content(&self.tree, &mask, self.beta)
    }

    pub fn check(&self, t: f64, a: f64) -> Result<GoodLambdaSharp> {
        if !(t > 0.0 && a > 0.0) {
            return Err(HctError::InvalidParameter(format!("t = {t} and A = {a} must be positive")));
        }
        let lhs = self.level_content(&self.maximal, t);
        let sharp_term = self.level_content(&self.sharp, t / a);
        let tail = self.level_content(&self.maximal, (-self.beta - 2.0).exp2() * t);
        let rhs_8 = sharp_term + 8.0 / a * tail;
        let rhs_16 = sharp_term + 16.0 / a * tail;
        Ok(GoodLambdaSharp { t, a, lhs, sharp_term, tail, rhs_8, rhs_16, margin_8: rhs_8 - lhs, margin_16: rhs_16 - lhs })
    }
}

/// Single `(t, A)` evaluation with the exact-policy dyadic sharp maximal function.
pub fn goodlambda_sharp_check(f: &GridFunction, beta: f64, t: f64, a: f64) -> Result<GoodLambdaSharp> {
    GoodLambdaSharpFields::new(f, beta, Policy::exact())?.check(t, a)
}
