//! Choquet integrals against dyadic content by the layer-cake formula.
//!
//! For a step function the layer cake is a finite sum over value slabs. The
//! content of the superlevel sets is maintained incrementally: cells are
//! inserted in decreasing value order and each insertion updates the min-cover
//! values along the ancestor chain, stopping as soon as a value is unchanged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{check_beta, lattice_values};
use crate::error::{HctError, Result};
use crate::grid::{build_root, CellSet, DyadicCube, Lattice, RootSpec};

/// How values are reduced to a finite set of layer-cake thresholds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantization {
    #[default]
    Exact,
    /// At most `V` representative values when the function has more than `V` distinct values.
    Levels(usize),
}

/// Nonnegative step function, one value per finest cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: RootSpec,
    values: Vec<f64>,
    quantization: Quantization,
}

impl GridFunction {
    pub fn new(spec: &RootSpec, values: Vec<f64>) -> Result<Self> {
        Self::with_quantization(spec, values, Quantization::Exact)
    }

    pub fn with_quantization(spec: &RootSpec, values: Vec<f64>, quantization: Quantization) -> Result<Self> {
        if values.len() != spec.cell_count() {
            return Err(HctError::InvalidParameter(format!("function has {} values, grid has {} cells", values.len(), spec.cell_count())));
        }
        if let Some((cell, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(HctError::InvalidParameter(format!("value {v} at cell {cell} is not finite and nonnegative")));
        }
        if let Quantization::Levels(v) = quantization {
            if v < 2 {
                return Err(HctError::QuantizationLevels(v));
            }
        }
        Ok(GridFunction { spec: spec.clone(), values, quantization })
    }

    pub fn constant(spec: &RootSpec, c: f64) -> Result<Self> {
        Self::new(spec, vec![c; spec.cell_count()])
    }

    pub fn indicator(set: &CellSet) -> Self {
        let values = set.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        GridFunction { spec: set.spec().clone(), values, quantization: Quantization::Exact }
    }

    pub fn spec(&self) -> &RootSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quantization(&self) -> Quantization {
        self.quantization
    }

    pub fn with_policy(mut self, quantization: Quantization) -> Result<Self> {
        if let Quantization::Levels(v) = quantization {
            if v < 2 {
                return Err(HctError::QuantizationLevels(v));
            }
        }
        self.quantization = quantization;
        Ok(self)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        Self::with_quantization(&self.spec, self.values.par_iter().map(|&v| op(v)).collect(), self.quantization)
    }

    pub fn zip(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.spec != other.spec {
            return Err(HctError::SpecMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Self::with_quantization(&self.spec, values, self.quantization)
    }

    /// `f·χ_region`.
    pub fn restrict(&self, region: &CellSet) -> Result<Self> {
        if region.spec() != &self.spec {
            return Err(HctError::SpecMismatch);
        }
        let values = self.values.iter().zip(region.mask()).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
        Ok(GridFunction { spec: self.spec.clone(), values, quantization: self.quantization })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn distinct_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Values after quantization, plus the largest downward deviation.
    pub fn quantized(&self) -> (Vec<f64>, f64) {
        let levels = match self.quantization {
            Quantization::Exact => return (self.values.clone(), 0.0),
            Quantization::Levels(v) => v,
        };
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() <= levels {
            return (self.values.clone(), 0.0);
        }
        let last = sorted.len() - 1;
        let mut reps: Vec<f64> = (0..levels).map(|j| sorted[((j * last) as f64 / (levels - 1) as f64).round() as usize]).collect();
        reps.dedup();
        let mut deviation = 0.0f64;
        let values = self
            .values
            .iter()
            .map(|&v| {
                let pos = reps.partition_point(|&r| r <= v);
                let q = reps[pos.saturating_sub(1)];
                deviation = deviation.max(v - q);
                q
            })
            .collect();
        (values, deviation)
    }
}

/// Incremental min-cover content of a growing cell set.
///
/// `child_sum[q]` is the sum of the children's current values and `value[q]`
/// is `min(ℓ(q)^β, child_sum[q])` (or the leaf weight). Inserting a leaf
/// propagates the change upward, optionally stopping at a given node.
pub(crate) struct Sweep<'a> {
    lattice: &'a Lattice,
    weights: Vec<f64>,
    pub(crate) value: Vec<f64>,
    child_sum: Vec<f64>,
    touched: Vec<u32>,
}

impl<'a> Sweep<'a> {
    pub(crate) fn new(lattice: &'a Lattice, beta: f64) -> Self {
        let n = lattice.node_count();
        Sweep { lattice, weights: lattice.level_weights(beta), value: vec![0.0; n], child_sum: vec![0.0; n], touched: Vec::new() }
    }

    pub(crate) fn weight(&self, node: usize) -> f64 {
        self.weights[self.lattice.level_index(node)]
    }

    /// Clears every node touched since the last reset.
    pub(crate) fn reset(&mut self) {
        for &n in &self.touched {
            self.value[n as usize] = 0.0;
            self.child_sum[n as usize] = 0.0;
        }
        self.touched.clear();
    }

    /// Inserts a cell and updates ancestors up to and including `stop`
    /// (or the top level when `stop` is `None`). Calls `on_change(node, old)`
    /// before each node's value changes.
    pub(crate) fn insert_with(&mut self, cell: usize, stop: Option<usize>, mut on_change: impl FnMut(usize, f64)) {
        let parents = self.lattice.parent_raw();
        let mut node = self.lattice.leaf(cell);
        let old = self.value[node];
        if old > 0.0 {
            return;
        }
        let w = self.weight(node);
        on_change(node, old);
        self.value[node] = w;
        self.touched.push(node as u32);
        let mut delta = w;
        while Some(node) != stop {
            let p = parents[node];
            if p == u32::MAX {
                break;
            }
            node = p as usize;
            if self.child_sum[node] == 0.0 && self.value[node] == 0.0 {
                self.touched.push(node as u32);
            }
            self.child_sum[node] += delta;
            let new = self.child_sum[node].min(self.weight(node));
            let old = self.value[node];
            if new == old {
                break;
            }
            on_change(node, old);
            self.value[node] = new;
            delta = new - old;
        }
    }

    pub(crate) fn insert(&mut self, cell: usize, stop: Option<usize>) {
        self.insert_with(cell, stop, |_, _| {});
    }
}

/// Groups of cells with equal positive value, in decreasing value order.
pub(crate) fn descending_groups(values: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&c| values[c] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for c in order {
        match groups.last_mut() {
            Some((v, cells)) if *v == values[c] => cells.push(c),
            _ => groups.push((values[c], vec![c])),
        }
    }
    groups
}

/// Layer-cake integral over the whole lattice with the incremental sweep.
pub(crate) fn sweep_integral(lattice: &Lattice, values: &[f64], beta: f64) -> f64 {
    let groups = descending_groups(values);
    let mut sweep = Sweep::new(lattice, beta);
    let tops = lattice.top_nodes();
    let mut total = 0.0;
    for (j, (t, cells)) in groups.iter().enumerate() {
        for &c in cells {
            sweep.insert(c, None);
        }
        let below = groups.get(j + 1).map_or(0.0, |g| g.0);
        let content: f64 = tops.clone().map(|n| sweep.value[n]).sum();
        total += (t - below) * content;
    }
    total
}

/// Integral over every node of the lattice at once.
pub(crate) fn sweep_cube_integrals(lattice: &Lattice, values: &[f64], beta: f64) -> Vec<f64> {
    let groups = descending_groups(values);
    let n = lattice.node_count();
    let mut acc = vec![0.0; n];
    let mut mark = vec![0.0; n];
    let mut sweep = Sweep::new(lattice, beta);
    for (t, cells) in &groups {
        for &c in cells {
            sweep.insert_with(c, None, |node, old| {
                if old > 0.0 {
                    acc[node] += old * (mark[node] - t);
                }
                mark[node] = *t;
            });
        }
    }
    for node in 0..n {
        acc[node] += sweep.value[node] * mark[node];
    }
    acc
}

/// Per-threshold route: one bottom-up DP pass for each superlevel set.
pub(crate) fn threshold_cube_integrals(lattice: &Lattice, values: &[f64], beta: f64) -> Vec<f64> {
    let mut levels: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let slabs: Vec<(f64, f64)> = levels.iter().enumerate().map(|(j, &t)| (if j == 0 { 0.0 } else { levels[j - 1] }, t)).collect();
    slabs
        .par_iter()
        .map(|&(lo, hi)| {
            let mask: Vec<bool> = values.iter().map(|&v| v > lo).collect();
            let mut layer = lattice_values(lattice, &mask, beta);
            layer.iter_mut().for_each(|x| *x *= hi - lo);
            layer
        })
        .reduce(
            || vec![0.0; lattice.node_count()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// An integral value with the quantization error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    pub value: f64,
    /// Upper bound on `exact − value`; zero in exact mode.
    pub error_bound: f64,
}

fn check_region(f: &GridFunction, region: &CellSet) -> Result<()> {
    if f.spec() != region.spec() {
        return Err(HctError::SpecMismatch);
    }
    Ok(())
}

/// `∫_region f dH^{β,Q0}_∞` with its quantization error bound.
pub fn integral_report(f: &GridFunction, region: &CellSet, beta: f64) -> Result<IntegralReport> {
    check_region(f, region)?;
    check_beta(beta, f.spec().dim)?;
    let tree = build_root(f.spec())?;
    let (q, deviation) = f.quantized();
    let masked: Vec<f64> = q.iter().zip(region.mask()).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    let value = sweep_integral(&tree, &masked, beta);
    let error_bound = if deviation > 0.0 {
        let support: Vec<bool> = f.values().iter().zip(region.mask()).map(|(&v, &m)| m && v > 0.0).collect();
        deviation * lattice_values(&tree, &support, beta)[0]
    } else {
        0.0
    };
    Ok(IntegralReport { value, error_bound })
}

/// `∫_region f dH^{β,Q0}_∞`.
pub fn integral(f: &GridFunction, region: &CellSet, beta: f64) -> Result<f64> {
    integral_report(f, region, beta).map(|r| r.value)
}

/// Integral over the whole root.
pub fn integral_root(f: &GridFunction, beta: f64) -> Result<f64> {
    integral(f, &CellSet::full(f.spec()), beta)
}

/// Same integral computed slab by slab with an independent DP pass per threshold.
pub fn integral_by_thresholds(f: &GridFunction, region: &CellSet, beta: f64) -> Result<f64> {
    check_region(f, region)?;
    check_beta(beta, f.spec().dim)?;
    let tree = build_root(f.spec())?;
    let masked: Vec<f64> = f.quantized().0.iter().zip(region.mask()).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    Ok(threshold_cube_integrals(&tree, &masked, beta)[0])
}

/// `∫_Q f dH^{β,Q0}_∞` for every cube of a lattice.
#[derive(Clone, Debug)]
pub struct CubeIntegralTree<'a> {
    lattice: &'a Lattice,
    beta: f64,
    values: Vec<f64>,
}

impl<'a> CubeIntegralTree<'a> {
    pub fn lattice(&self) -> &Lattice {
        self.lattice
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn value(&self, cube: &DyadicCube) -> Option<f64> {
        self.lattice.node_of(cube).map(|n| self.values[n])
    }

    /// `∫_Q f dH / ℓ(Q)^β`.
    pub fn average(&self, node: usize) -> f64 {
        self.values[node] / self.lattice.side(node).powf(self.beta)
    }
}

/// Cube integrals of `f` over every cube of `lattice`.
pub fn cube_integrals_on<'a>(f: &GridFunction, lattice: &'a Lattice, beta: f64) -> Result<CubeIntegralTree<'a>> {
    if f.spec() != lattice.spec() {
        return Err(HctError::SpecMismatch);
    }
    check_beta(beta, f.spec().dim)?;
    let values = sweep_cube_integrals(lattice, &f.quantized().0, beta);
    Ok(CubeIntegralTree { lattice, beta, values })
}

/// Cube integrals over the base tree.
pub fn cube_integrals<'a>(f: &GridFunction, tree: &'a Lattice, beta: f64) -> Result<CubeIntegralTree<'a>> {
    cube_integrals_on(f, tree, beta)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(HctError::InvalidParameter(format!("exponent p = {p} must be in (0, ∞)")));
    }
    Ok(())
}

/// `(∫ f^p dH^β)^{1/p}` over the root.
pub fn lp_norm(f: &GridFunction, p: f64, beta: f64) -> Result<f64> {
    check_exponent(p)?;
    check_beta(beta, f.spec().dim)?;
    let tree = build_root(f.spec())?;
    let powered: Vec<f64> = f.quantized().0.iter().map(|v| v.powf(p)).collect();
    Ok(sweep_integral(&tree, &powered, beta).powf(1.0 / p))
}

/// `sup_λ λ·H^β({f > λ})^{1/p}`, attained as `λ` increases to a value of `f`.
pub fn weak_lp_norm(f: &GridFunction, p: f64, beta: f64) -> Result<f64> {
    check_exponent(p)?;
    check_beta(beta, f.spec().dim)?;
    let tree = build_root(f.spec())?;
    Ok(weak_norm_on(&tree, &f.quantized().0, p, beta))
}

pub(crate) fn weak_norm_on(lattice: &Lattice, values: &[f64], p: f64, beta: f64) -> f64 {
    let mut sweep = Sweep::new(lattice, beta);
    let mut best = 0.0f64;
    for (t, cells) in descending_groups(values) {
        for c in cells {
            sweep.insert(c, None);
        }
        let content: f64 = lattice.top_nodes().map(|n| sweep.value[n]).sum();
        best = best.max(t * content.powf(1.0 / p));
    }
    best
}

/// `∫_region exp(γ f) dH^β`.
pub fn exp_functional(f: &GridFunction, gamma: f64, region: &CellSet, beta: f64) -> Result<f64> {
    check_region(f, region)?;
    check_beta(beta, f.spec().dim)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HctError::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let (q, _) = f.quantized();
    let mut g = vec![0.0; q.len()];
    for (cell, (&v, &m)) in q.iter().zip(region.mask()).enumerate() {
        if m {
            let e = (gamma * v).exp();
            if !e.is_finite() {
                return Err(HctError::Overflow { cell, value: f.values()[cell] });
            }
            g[cell] = e;
        }
    }
    let tree = build_root(f.spec())?;
    Ok(sweep_integral(&tree, &g, beta))
}

/// Both sides of `∫ f dH^β ≤ (β/α)(∫ f^{α/β} dH^α)^{β/α}`.
pub fn embedding_check(f: &GridFunction, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let d = f.spec().dim as f64;
    if !(alpha > 0.0 && alpha <= beta && beta <= d) {
        return Err(HctError::ParameterOrder { alpha, beta });
    }
    let tree = build_root(f.spec())?;
    let q = f.quantized().0;
    let lhs = sweep_integral(&tree, &q, beta);
    let powered: Vec<f64> = q.iter().map(|v| v.powf(alpha / beta)).collect();
    let rhs = beta / alpha * sweep_integral(&tree, &powered, alpha).powf(beta / alpha);
    Ok((lhs, rhs))
}
