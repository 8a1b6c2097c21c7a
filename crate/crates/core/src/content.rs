//! Dyadic Hausdorff content by min-cover dynamic programming.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{HctError, Result};
use crate::grid::{build_root, shifted_lattices, CellSet, DyadicCube, Lattice, RootSpec};

/// Largest instance accepted by [`brute_force_content`].
pub const BRUTE_FORCE_CELL_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    RawDyadic,
    BallNormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentParams {
    pub beta: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl ContentParams {
    pub fn new(beta: f64) -> Self {
        ContentParams { beta, normalization: Normalization::RawDyadic }
    }

    pub fn ball_normalized(beta: f64) -> Self {
        ContentParams { beta, normalization: Normalization::BallNormalized }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        check_beta(self.beta, dim)
    }

    /// Factor applied to reported values: 1, or `ω_β` in ball-normalized mode.
    pub fn scale(&self) -> f64 {
        match self.normalization {
            Normalization::RawDyadic => 1.0,
            Normalization::BallNormalized => omega(self.beta),
        }
    }
}

/// `ω_β = π^{β/2} / Γ(β/2 + 1)`.
pub fn omega(beta: f64) -> f64 {
    std::f64::consts::PI.powf(beta / 2.0) / gamma(beta / 2.0 + 1.0)
}

pub(crate) fn check_beta(beta: f64, dim: usize) -> Result<()> {
    if !(beta > 0.0 && beta <= dim as f64) {
        return Err(HctError::BetaOutOfRange { beta, dim });
    }
    Ok(())
}

/// Bottom-up min-cover values for every node of `lattice`:
/// `c(leaf) = ℓ^β·[cell ∈ E]`, `c(Q) = min(ℓ(Q)^β, Σ children)` when nonzero.
pub(crate) fn lattice_values(lattice: &Lattice, members: &[bool], beta: f64) -> Vec<f64> {
    let weights = lattice.level_weights(beta);
    let total = lattice.node_count();
    let leaves = lattice.level_nodes(lattice.finest_level());
    let mut values = vec![0.0; total];
    for node in leaves.clone() {
        if members[lattice.leaf_cell(node)] {
            values[node] = weights[lattice.level_index(node)];
        }
    }
    for node in (0..leaves.start).rev() {
        let sum: f64 = lattice.children(node).iter().map(|&c| values[c as usize]).sum();
        if sum > 0.0 {
            values[node] = sum.min(weights[lattice.level_index(node)]);
        }
    }
    values
}

/// Content of `E` measured with covers from one lattice: the sum over its top cubes.
pub(crate) fn lattice_content(lattice: &Lattice, members: &[bool], beta: f64) -> f64 {
    let values = lattice_values(lattice, members, beta);
    lattice.top_nodes().map(|n| values[n]).sum()
}

/// Exact dyadic content of `E ∩ Q` for every cube `Q` of a lattice.
#[derive(Clone, Debug)]
pub struct ContentTree<'a> {
    lattice: &'a Lattice,
    params: ContentParams,
    values: Vec<f64>,
}

impl<'a> ContentTree<'a> {
    pub fn build(lattice: &'a Lattice, set: &CellSet, params: ContentParams) -> Result<Self> {
        params.validate(lattice.spec().dim)?;
        if set.spec() != lattice.spec() {
            return Err(HctError::SpecMismatch);
        }
        let values = lattice_values(lattice, set.mask(), params.beta);
        Ok(ContentTree { lattice, params, values })
    }

    pub fn lattice(&self) -> &Lattice {
        self.lattice
    }

    pub fn params(&self) -> ContentParams {
        self.params
    }

    /// Raw (unnormalized) values indexed by lattice node.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, node: usize) -> f64 {
        self.values[node] * self.params.scale()
    }

    pub fn value(&self, cube: &DyadicCube) -> Option<f64> {
        self.lattice.node_of(cube).map(|n| self.node_value(n))
    }

    /// Content of the whole set under this lattice.
    pub fn total(&self) -> f64 {
        self.lattice.top_nodes().map(|n| self.values[n]).sum::<f64>() * self.params.scale()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicCube, f64)> + '_ {
        (0..self.values.len()).map(|n| (self.lattice.cube(n), self.node_value(n)))
    }

    /// Map from `"k:i1,...,id"` to value, in enumeration-stable key order.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, f64> = self.iter().map(|(c, v)| (c.to_string(), v)).collect();
        serde_json::to_value(map).expect("string keys serialize")
    }
}

/// Builds the content tree of `set` over `tree`.
pub fn content_tree<'a>(tree: &'a Lattice, set: &CellSet, params: ContentParams) -> Result<ContentTree<'a>> {
    ContentTree::build(tree, set, params)
}

/// `H^{β,Q0}_∞(E)`: the root value of the base-lattice content tree.
pub fn content(set: &CellSet, params: ContentParams) -> Result<f64> {
    params.validate(set.spec().dim)?;
    let tree = build_root(set.spec())?;
    Ok(lattice_content(&tree, set.mask(), params.beta) * params.scale())
}

/// Minimum over the `2^d` shifted lattices of the lattice content.
pub fn content_proxy(set: &CellSet, params: ContentParams) -> Result<f64> {
    params.validate(set.spec().dim)?;
    let lattices = shifted_lattices(set.spec(), 1)?;
    let best = lattices.iter().map(|lat| lattice_content(lat, set.mask(), params.beta)).fold(f64::INFINITY, f64::min);
    Ok(best * params.scale())
}

/// Morton (bit-interleaved) order of the cells, coarse bits first.
fn morton_order(spec: &RootSpec) -> Vec<usize> {
    let mut cells: Vec<(u64, usize)> = (0..spec.cell_count())
        .map(|c| {
            let coords = spec.cell_coords(c);
            let mut key = 0u64;
            for bit in (0..spec.levels).rev() {
                for &x in &coords {
                    key = key << 1 | ((x >> bit) & 1) as u64;
                }
            }
            (key, c)
        })
        .collect();
    cells.sort_unstable();
    cells.into_iter().map(|(_, c)| c).collect()
}

/// Exhaustive minimum of `Σ ℓ(Q_i)^β` over all families of base dyadic cubes
/// covering `E`, for grids of at most 64 cells.
///
/// Every cover contains a cube through the first uncovered cell, so the search
/// branches over the cubes containing that cell, memoized on the uncovered set,
/// with the best cost found so far used as a bound.
pub fn brute_force_content(set: &CellSet, params: ContentParams) -> Result<f64> {
    let spec = set.spec();
    params.validate(spec.dim)?;
    let cells = spec.cell_count();
    if cells > BRUTE_FORCE_CELL_LIMIT {
        return Err(HctError::InstanceTooLarge { cells, limit: BRUTE_FORCE_CELL_LIMIT });
    }
    let order = morton_order(spec);
    let mut rank = vec![0usize; cells];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }

    // Every base cube as a bitmask over Morton ranks, with its cost.
    let mut cubes: Vec<(u64, f64)> = Vec::new();
    for level in 0..=spec.levels {
        let per_axis = 1i64 << level;
        let count = (per_axis as usize).pow(spec.dim as u32);
        let weight = spec.cube_side(level as i32).powf(params.beta);
        for local in 0..count {
            let mut index = vec![0i64; spec.dim];
            let mut rem = local;
            for axis in (0..spec.dim).rev() {
                index[axis] = (rem % per_axis as usize) as i64;
                rem /= per_axis as usize;
            }
            let mask = spec.base_cube_cells(level, &index).iter().fold(0u64, |m, &c| m | 1u64 << rank[c]);
            cubes.push((mask, weight));
        }
    }

    let target = set.iter().fold(0u64, |m, c| m | 1u64 << rank[c]);
    let mut memo: HashMap<u64, f64> = HashMap::new();
    let best = search(target, &cubes, &mut memo, f64::INFINITY);
    Ok(best * params.scale())
}

fn search(uncovered: u64, cubes: &[(u64, f64)], memo: &mut HashMap<u64, f64>, bound: f64) -> f64 {
    if uncovered == 0 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&uncovered) {
        return v;
    }
    let first = 1u64 << uncovered.trailing_zeros();
    let mut best = f64::INFINITY;
    for &(mask, weight) in cubes.iter().filter(|(m, _)| m & first != 0) {
        let limit = best.min(bound);
        if weight >= limit {
            continue;
        }
        let rest = search(uncovered & !mask, cubes, memo, limit - weight);
        best = best.min(weight + rest);
    }
    // Below the bound the search is exact; above it the value is only a cutoff.
    if best < bound {
        memo.insert(uncovered, best);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, n: u32) -> RootSpec {
        RootSpec::unit(d, n).unwrap()
    }

    #[test]
    fn full_root_prefers_root_cover() {
        let s = spec(2, 4);
        let v = content(&CellSet::full(&s), ContentParams::new(1.5)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell() {
        let s = spec(2, 3);
        let v = content(&CellSet::from_cells(&s, [s.cell_index(&[3, 5])]), ContentParams::new(1.0)).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn opposite_corners() {
        let s = spec(2, 3);
        let set = CellSet::from_cells(&s, [s.cell_index(&[0, 0]), s.cell_index(&[7, 7])]);
        let v = content(&set, ContentParams::new(1.0)).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let oracle = brute_force_content(&set, ContentParams::new(1.0)).unwrap();
        assert!((oracle - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_of_four_dust() {
        let s = spec(2, 4);
        // keep children (0,0) and (1,1) at every level
        let cells = (0..s.cell_count()).filter(|&c| {
            let xy = s.cell_coords(c);
            (0..4).all(|b| (xy[0] >> b & 1) == (xy[1] >> b & 1))
        });
        let set = CellSet::from_cells(&s, cells);
        assert_eq!(set.len(), 16);
        let v = content(&set, ContentParams::new(1.5)).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_and_range_errors() {
        let s = spec(2, 2);
        assert_eq!(content(&CellSet::empty(&s), ContentParams::new(1.0)).unwrap(), 0.0);
        assert_eq!(content_proxy(&CellSet::empty(&s), ContentParams::new(1.0)).unwrap(), 0.0);
        assert_eq!(brute_force_content(&CellSet::empty(&s), ContentParams::new(1.0)).unwrap(), 0.0);
        assert!(matches!(content(&CellSet::full(&s), ContentParams::new(2.5)), Err(HctError::BetaOutOfRange { .. })));
        assert!(content(&CellSet::full(&s), ContentParams::new(0.0)).is_err());
    }

    #[test]
    fn brute_force_guard() {
        let s = spec(2, 4);
        assert!(matches!(brute_force_content(&CellSet::full(&s), ContentParams::new(1.0)), Err(HctError::InstanceTooLarge { .. })));
    }

    #[test]
    fn proxy_bounds() {
        let s = spec(2, 3);
        let single = CellSet::from_cells(&s, [9]);
        assert!(content_proxy(&single, ContentParams::new(1.0)).unwrap() <= 0.125 + 1e-15);
        let full = CellSet::full(&s);
        let p = content_proxy(&full, ContentParams::new(1.5)).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_normalization_scales() {
        let s = spec(2, 3);
        let set = CellSet::from_cells(&s, [0, 5, 17]);
        let raw = content(&set, ContentParams::new(1.0)).unwrap();
        let ball = content(&set, ContentParams::ball_normalized(1.0)).unwrap();
        assert!((ball - raw * 2.0).abs() < 1e-12, "ω_1 = 2");
        assert!((omega(2.0) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_reduction_exact() {
        let s = spec(2, 4);
        let set = CellSet::from_cells(&s, (0..256).filter(|c| c % 3 == 0 || c % 7 == 1));
        let v = content(&set, ContentParams::new(2.0)).unwrap();
        assert_eq!(v, set.len() as f64 * s.cell_volume());
    }

    #[test]
    fn tree_json_keys() {
        let s = spec(1, 1);
        let tree = build_root(&s).unwrap();
        let ct = content_tree(&tree, &CellSet::from_cells(&s, [1]), ContentParams::new(1.0)).unwrap();
        let json = ct.to_json();
        assert_eq!(json["0:0"], 0.5);
        assert_eq!(json["1:0"], 0.0);
        assert_eq!(json["1:1"], 0.5);
    }
}
