//! Dyadic geometry on a finite root cube.
//!
//! The root cube `Q0` of side `L` is split into `2^n` cells per axis. A
//! [`Lattice`] materializes every cube of one dyadic grid `D^i` that meets the
//! root, from a coarse top level (`-margin`) down to the finest level `n`.
//! The base grid is the lattice with shift id zero and no margin; the other
//! `2^d - 1` lattices are translated by one third of the side length, with the
//! direction alternating with the level parity so that the family stays nested.
//!
//! All geometry is done in scaled integers: one unit is a sixth of a finest
//! cell, which makes both dyadic and one-third offsets exact. Shifted cubes do
//! not align with cells; a cell belongs to the unique cube containing its
//! center. Cubes are half-open, closed at the low face.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HctError, Result};

/// Default upper bound on the number of finest cells.
pub const DEFAULT_CELL_CAP: usize = 1 << 24;

const NO_NODE: u32 = u32::MAX;

/// The root cube and its finest resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSpec {
    pub dim: usize,
    pub side: f64,
    pub origin: Vec<f64>,
    pub levels: u32,
}

impl RootSpec {
    /// Root at the origin.
    pub fn new(dim: usize, side: f64, levels: u32) -> Result<Self> {
        Self::with_origin(dim, side, vec![0.0; dim], levels)
    }

    pub fn with_origin(dim: usize, side: f64, origin: Vec<f64>, levels: u32) -> Result<Self> {
        let spec = RootSpec { dim, side, origin, levels };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit root `[0,1)^d`.
    pub fn unit(dim: usize, levels: u32) -> Result<Self> {
        Self::new(dim, 1.0, levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(HctError::InvalidSpec("dimension must be positive".into()));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(HctError::InvalidSpec(format!("side length {} must be positive", self.side)));
        }
        if self.origin.len() != self.dim {
            return Err(HctError::InvalidSpec(format!("origin has {} coordinates, dimension is {}", self.origin.len(), self.dim)));
        }
        if self.origin.iter().any(|x| !x.is_finite()) {
            return Err(HctError::InvalidSpec("origin must be finite".into()));
        }
        if self.dim as u64 * self.levels as u64 > 40 {
            return Err(HctError::Capacity { exponent: (self.dim as u64 * self.levels as u64).min(u32::MAX as u64) as u32, cap: DEFAULT_CELL_CAP });
        }
        Ok(())
    }

    pub fn check_capacity(&self, cap: usize) -> Result<()> {
        let exponent = self.dim as u32 * self.levels;
        if exponent >= usize::BITS - 1 || (1usize << exponent) > cap {
            return Err(HctError::Capacity { exponent, cap });
        }
        Ok(())
    }

    pub fn cells_per_axis(&self) -> usize {
        1 << self.levels
    }

    pub fn cell_count(&self) -> usize {
        1 << (self.dim as u32 * self.levels)
    }

    pub fn cell_side(&self) -> f64 {
        self.cube_side(self.levels as i32)
    }

    /// Nominal side length of a level-`k` cube (negative levels lie above the root).
    pub fn cube_side(&self, level: i32) -> f64 {
        self.side * (-(level as f64)).exp2()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_side().powi(self.dim as i32)
    }

    /// Row-major cell coordinates; axis 0 varies slowest.
    pub fn cell_coords(&self, index: usize) -> Vec<usize> {
        let n = self.levels;
        let mask = self.cells_per_axis() - 1;
        (0..self.dim).map(|axis| (index >> (n as usize * (self.dim - 1 - axis))) & mask).collect()
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0usize, |acc, &c| (acc << self.levels) | c)
    }

    pub fn cell_center(&self, index: usize) -> Vec<f64> {
        let h = self.cell_side();
        self.cell_coords(index).iter().zip(&self.origin).map(|(&c, &o)| o + (c as f64 + 0.5) * h).collect()
    }

    /// Cell containing `point`, using half-open cells. Points on the upper
    /// faces of the root are assigned to the last cell along that axis.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim {
            return None;
        }
        let per_axis = self.cells_per_axis();
        let mut coords = Vec::with_capacity(self.dim);
        for (x, o) in point.iter().zip(&self.origin) {
            let t = (x - o) / self.side;
            if !(0.0..=1.0).contains(&t) {
                return None;
            }
            let c = ((t * per_axis as f64).floor() as usize).min(per_axis - 1);
            coords.push(c);
        }
        Some(self.cell_index(&coords))
    }

    /// Iterates all finest cell indices of the cube at `level` with base index `index`.
    pub fn base_cube_cells(&self, level: u32, index: &[i64]) -> Vec<usize> {
        let span = 1usize << (self.levels - level);
        let ranges: Vec<(usize, usize)> = index.iter().map(|&m| (m as usize * span, (m as usize + 1) * span)).collect();
        product_cells(self, &ranges)
    }
}

fn product_cells(spec: &RootSpec, ranges: &[(usize, usize)]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut coords: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.0 >= r.1) {
        return out;
    }
    loop {
        out.push(spec.cell_index(&coords));
        let mut axis = ranges.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            coords[axis] += 1;
            if coords[axis] < ranges[axis].1 {
                break;
            }
            coords[axis] = ranges[axis].0;
        }
    }
}

/// Identifies the lattice `D^i`, `i ∈ {0, 1/3}^d`: bit `j` set means axis `j`
/// is shifted by one third.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShiftId(pub u32);

impl ShiftId {
    pub const BASE: ShiftId = ShiftId(0);

    pub fn is_base(self) -> bool {
        self.0 == 0
    }

    pub fn shifted(self, axis: usize) -> bool {
        self.0 >> axis & 1 == 1
    }

    pub fn all(dim: usize) -> impl Iterator<Item = ShiftId> {
        (0..1u32 << dim).map(ShiftId)
    }
}

/// A cube of one lattice: `side·2^{-k}([0,1)^d + m + (-1)^k i)` relative to the root origin.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
    pub shift: ShiftId,
}

impl DyadicCube {
    pub fn base(level: i32, index: Vec<i64>) -> Self {
        DyadicCube { level, index, shift: ShiftId::BASE }
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.level)?;
        for (j, m) in self.index.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        if !self.shift.is_base() {
            write!(f, "@{}", self.shift.0)?;
        }
        Ok(())
    }
}

/// Cells of one axis grouped by the lattice interval containing their centers.
#[derive(Clone, Debug)]
struct AxisPart {
    first_m: i64,
    lo: Vec<u32>,
    hi: Vec<u32>,
    interior: Vec<bool>,
    center_cell: Vec<u32>,
    of_cell: Vec<u32>,
}

#[derive(Clone, Debug)]
struct LevelInfo {
    level: i32,
    offset: usize,
    count: usize,
    axes: Vec<AxisPart>,
}

/// One dyadic lattice restricted to cubes that contain at least one cell center.
///
/// Nodes are numbered level-major (coarse first), lexicographically by index
/// within a level. Finest-level nodes are in bijection with the cells, in
/// row-major order.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: RootSpec,
    shift: ShiftId,
    levels: Vec<LevelInfo>,
    node_level: Vec<u16>,
    parent: Vec<u32>,
    child_start: Vec<u32>,
    children: Vec<u32>,
    intervals: Vec<u32>,
}

/// The base lattice `D(Q0)` from the root down to the finest level.
pub type DyadicTree = Lattice;

/// Builds the base dyadic tree with the default capacity cap.
pub fn build_root(spec: &RootSpec) -> Result<DyadicTree> {
    Lattice::build(spec, ShiftId::BASE, 0, DEFAULT_CELL_CAP)
}

/// The `2^d` lattices `D^i`, each with `depth_margin` extra coarse levels above the root.
pub fn shifted_lattices(spec: &RootSpec, depth_margin: u32) -> Result<Vec<Lattice>> {
    ShiftId::all(spec.dim).map(|s| Lattice::build(spec, s, depth_margin, DEFAULT_CELL_CAP)).collect()
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

impl Lattice {
    pub fn build(spec: &RootSpec, shift: ShiftId, margin: u32, cap: usize) -> Result<Self> {
        spec.validate()?;
        spec.check_capacity(cap)?;
        if shift.0 >> spec.dim != 0 {
            return Err(HctError::InvalidParameter(format!("shift id {} out of range", shift.0)));
        }
        let n = spec.levels as i32;
        let per_axis = spec.cells_per_axis();
        let extent = 6 * per_axis as i64;
        let top = -(margin as i32);

        let mut levels = Vec::new();
        let mut offset = 0usize;
        for level in top..=n {
            let span = 6i64 << (n - level);
            let sign = if level.rem_euclid(2) == 0 { 1 } else { -1 };
            let axes: Vec<AxisPart> = (0..spec.dim)
                .map(|axis| {
                    let off = if shift.shifted(axis) { sign * 2 * (1i64 << (n - level)) } else { 0 };
                    let mut part = AxisPart {
                        first_m: 0,
                        lo: Vec::new(),
                        hi: Vec::new(),
                        interior: Vec::new(),
                        center_cell: Vec::new(),
                        of_cell: vec![0; per_axis],
                    };
                    let mut current: Option<i64> = None;
                    for c in 0..per_axis {
                        let m = floor_div(6 * c as i64 + 3 - off, span);
                        if current != Some(m) {
                            if current.is_none() {
                                part.first_m = m;
                            }
                            current = Some(m);
                            let start = m * span + off;
                            let center = start + span / 2;
                            part.lo.push(c as u32);
                            part.hi.push(c as u32 + 1);
                            part.interior.push(start >= 0 && start + span <= extent);
                            part.center_cell.push(if (0..extent).contains(&center) { (center / 6) as u32 } else { NO_NODE });
                        } else {
                            *part.hi.last_mut().unwrap() = c as u32 + 1;
                        }
                        part.of_cell[c] = part.lo.len() as u32 - 1;
                    }
                    part
                })
                .collect();
            let count = axes.iter().map(|a| a.lo.len()).product();
            levels.push(LevelInfo { level, offset, count, axes });
            offset += count;
        }
        let total = offset;
        if total >= NO_NODE as usize {
            return Err(HctError::Capacity { exponent: spec.dim as u32 * spec.levels, cap });
        }

        let d = spec.dim;
        let mut node_level = vec![0u16; total];
        let mut intervals = vec![0u32; total * d];
        for (li, info) in levels.iter().enumerate() {
            let sizes: Vec<usize> = info.axes.iter().map(|a| a.lo.len()).collect();
            for local in 0..info.count {
                let node = info.offset + local;
                node_level[node] = li as u16;
                let mut rem = local;
                for axis in (0..d).rev() {
                    intervals[node * d + axis] = (rem % sizes[axis]) as u32;
                    rem /= sizes[axis];
                }
            }
        }

        let mut parent = vec![NO_NODE; total];
        let mut child_count = vec![0u32; total];
        for li in 1..levels.len() {
            let (upper, lower) = (&levels[li - 1], &levels[li]);
            let sizes: Vec<usize> = upper.axes.iter().map(|a| a.lo.len()).collect();
            for local in 0..lower.count {
                let node = lower.offset + local;
                let mut up_local = 0usize;
                for axis in 0..d {
                    let iv = intervals[node * d + axis] as usize;
                    let first_cell = lower.axes[axis].lo[iv] as usize;
                    let up_iv = upper.axes[axis].of_cell[first_cell] as usize;
                    debug_assert_eq!(up_iv, upper.axes[axis].of_cell[lower.axes[axis].hi[iv] as usize - 1] as usize, "lattice intervals must nest");
                    up_local = up_local * sizes[axis] + up_iv;
                }
                let p = upper.offset + up_local;
                parent[node] = p as u32;
                child_count[p] += 1;
            }
        }
        let mut child_start = vec![0u32; total + 1];
        for i in 0..total {
            child_start[i + 1] = child_start[i] + child_count[i];
        }
        let mut fill = child_start.clone();
        let mut children = vec![0u32; child_start[total] as usize];
        for (node, &p) in parent.iter().enumerate() {
            if p != NO_NODE {
                let slot = &mut fill[p as usize];
                children[*slot as usize] = node as u32;
                *slot += 1;
            }
        }

        Ok(Lattice { spec: spec.clone(), shift, levels, node_level, parent, child_start, children, intervals })
    }

    pub fn spec(&self) -> &RootSpec {
        &self.spec
    }

    pub fn shift(&self) -> ShiftId {
        self.shift
    }

    pub fn top_level(&self) -> i32 {
        self.levels[0].level
    }

    pub fn finest_level(&self) -> i32 {
        self.spec.levels as i32
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// Node-id range of the cubes at `level`.
    pub fn level_nodes(&self, level: i32) -> std::ops::Range<usize> {
        let li = (level - self.top_level()) as usize;
        let info = &self.levels[li];
        info.offset..info.offset + info.count
    }

    pub fn top_nodes(&self) -> std::ops::Range<usize> {
        self.level_nodes(self.top_level())
    }

    pub fn level_of(&self, node: usize) -> i32 {
        self.levels[self.node_level[node] as usize].level
    }

    /// Position of the node's level counted from the top (0 for top-level nodes).
    pub fn level_index(&self, node: usize) -> usize {
        self.node_level[node] as usize
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        let p = self.parent[node];
        (p != NO_NODE).then_some(p as usize)
    }

    pub(crate) fn parent_raw(&self) -> &[u32] {
        &self.parent
    }

    pub fn children(&self, node: usize) -> &[u32] {
        let (a, b) = (self.child_start[node] as usize, self.child_start[node + 1] as usize);
        &self.children[a..b]
    }

    /// Finest-level node of a cell.
    pub fn leaf(&self, cell: usize) -> usize {
        self.levels.last().unwrap().offset + cell
    }

    /// Cell of a finest-level node.
    pub fn leaf_cell(&self, node: usize) -> usize {
        node - self.levels.last().unwrap().offset
    }

    /// Half-open per-axis cell ranges covered by the node.
    pub fn cell_ranges(&self, node: usize) -> Vec<(usize, usize)> {
        let info = &self.levels[self.node_level[node] as usize];
        let d = self.spec.dim;
        (0..d)
            .map(|axis| {
                let iv = self.intervals[node * d + axis] as usize;
                (info.axes[axis].lo[iv] as usize, info.axes[axis].hi[iv] as usize)
            })
            .collect()
    }

    pub fn cells(&self, node: usize) -> Vec<usize> {
        product_cells(&self.spec, &self.cell_ranges(node))
    }

    pub fn cell_count_of(&self, node: usize) -> usize {
        self.cell_ranges(node).iter().map(|(a, b)| b - a).product()
    }

    /// True when the nominal cube lies inside the root (no clipping).
    pub fn is_interior(&self, node: usize) -> bool {
        let info = &self.levels[self.node_level[node] as usize];
        let d = self.spec.dim;
        (0..d).all(|axis| info.axes[axis].interior[self.intervals[node * d + axis] as usize])
    }

    /// Cell containing the nominal center of the cube, if that center lies in the root.
    pub fn center_cell(&self, node: usize) -> Option<usize> {
        let info = &self.levels[self.node_level[node] as usize];
        let d = self.spec.dim;
        let mut coords = Vec::with_capacity(d);
        for axis in 0..d {
            let c = info.axes[axis].center_cell[self.intervals[node * d + axis] as usize];
            if c == NO_NODE {
                return None;
            }
            coords.push(c as usize);
        }
        Some(self.spec.cell_index(&coords))
    }

    pub fn side(&self, node: usize) -> f64 {
        self.spec.cube_side(self.level_of(node))
    }

    pub fn cube(&self, node: usize) -> DyadicCube {
        let info = &self.levels[self.node_level[node] as usize];
        let d = self.spec.dim;
        DyadicCube {
            level: info.level,
            index: (0..d).map(|axis| info.axes[axis].first_m + self.intervals[node * d + axis] as i64).collect(),
            shift: self.shift,
        }
    }

    pub fn node_of(&self, cube: &DyadicCube) -> Option<usize> {
        if cube.shift != self.shift || cube.index.len() != self.spec.dim {
            return None;
        }
        if cube.level < self.top_level() || cube.level > self.finest_level() {
            return None;
        }
        let info = &self.levels[(cube.level - self.top_level()) as usize];
        let mut local = 0usize;
        for (axis, &m) in cube.index.iter().enumerate() {
            let part = &info.axes[axis];
            let iv = m - part.first_m;
            if iv < 0 || iv as usize >= part.lo.len() {
                return None;
            }
            local = local * part.lo.len() + iv as usize;
        }
        Some(info.offset + local)
    }

    /// Lattice cube at `level` containing the cell (by its center).
    pub fn node_containing(&self, cell: usize, level: i32) -> usize {
        let mut node = self.leaf(cell);
        while self.level_of(node) > level {
            node = self.parent[node] as usize;
        }
        node
    }

    /// Chain from `node` up to the top level, inclusive.
    pub fn ancestor_nodes(&self, node: usize) -> Vec<usize> {
        let mut chain = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            chain.push(p);
            cur = p;
        }
        chain
    }

    /// The cube, its parent, ..., up to the top level.
    pub fn ancestors(&self, cube: &DyadicCube) -> Result<Vec<DyadicCube>> {
        let node = self.node_of(cube).ok_or_else(|| HctError::UnknownCube(cube.to_string()))?;
        Ok(self.ancestor_nodes(node).into_iter().map(|a| self.cube(a)).collect())
    }

    /// All cubes, level-major then lexicographic by index.
    pub fn enumerate(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..self.node_count()).map(|n| self.cube(n))
    }

    /// `side^beta` for every level, indexed by [`Lattice::level_index`].
    pub fn level_weights(&self, beta: f64) -> Vec<f64> {
        let base = self.spec.side.powf(beta);
        self.levels.iter().map(|l| base * (-(l.level as f64) * beta).exp2()).collect()
    }
}

/// A subset of the finest cells of the root.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    spec: RootSpec,
    members: Vec<bool>,
}

impl CellSet {
    pub fn empty(spec: &RootSpec) -> Self {
        CellSet { spec: spec.clone(), members: vec![false; spec.cell_count()] }
    }

    pub fn full(spec: &RootSpec) -> Self {
        CellSet { spec: spec.clone(), members: vec![true; spec.cell_count()] }
    }

    pub fn from_mask(spec: &RootSpec, members: Vec<bool>) -> Result<Self> {
        if members.len() != spec.cell_count() {
            return Err(HctError::InvalidParameter(format!("mask has {} entries, grid has {} cells", members.len(), spec.cell_count())));
        }
        Ok(CellSet { spec: spec.clone(), members })
    }

    pub fn from_cells(spec: &RootSpec, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(spec);
        for c in cells {
            set.members[c] = true;
        }
        set
    }

    pub fn spec(&self) -> &RootSpec {
        &self.spec
    }

    pub fn mask(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.members[cell]
    }

    pub fn insert(&mut self, cell: usize) {
        self.members[cell] = true;
    }

    pub fn remove(&mut self, cell: usize) {
        self.members[cell] = false;
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter_map(|(i, &m)| m.then_some(i))
    }

    fn zip_with(&self, other: &CellSet, op: impl Fn(bool, bool) -> bool) -> Result<CellSet> {
        if self.spec != other.spec {
            return Err(HctError::SpecMismatch);
        }
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| op(a, b)).collect();
        Ok(CellSet { spec: self.spec.clone(), members })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> CellSet {
        CellSet { spec: self.spec.clone(), members: self.members.iter().map(|&m| !m).collect() }
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.spec == other.spec && self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    /// Cells of the lattice cube `node`.
    pub fn of_node(lattice: &Lattice, node: usize) -> CellSet {
        CellSet::from_cells(lattice.spec(), lattice.cells(node))
    }
}

/// Precomputed base tree plus the shifted lattices used for cube/ball suprema.
#[derive(Clone, Debug)]
pub struct Grid {
    spec: RootSpec,
    base: Lattice,
    lattices: Vec<Lattice>,
}

impl Grid {
    /// Base tree plus all `2^d` lattices with one coarse margin level, enough for a
    /// single top cube of every lattice to contain the whole root.
    pub fn new(spec: &RootSpec) -> Result<Self> {
        Self::with_margin(spec, 1)
    }

    pub fn with_margin(spec: &RootSpec, depth_margin: u32) -> Result<Self> {
        Ok(Grid { spec: spec.clone(), base: build_root(spec)?, lattices: shifted_lattices(spec, depth_margin)? })
    }

    pub fn spec(&self) -> &RootSpec {
        &self.spec
    }

    pub fn base(&self) -> &Lattice {
        &self.base
    }

    pub fn lattices(&self) -> &[Lattice] {
        &self.lattices
    }

    pub fn lattice(&self, shift: ShiftId) -> Option<&Lattice> {
        self.lattices.get(shift.0 as usize)
    }

    /// Lattice owning `cube`: the base tree for base cubes at or below the root.
    pub fn lattice_of(&self, cube: &DyadicCube) -> Option<(&Lattice, usize)> {
        if cube.shift.is_base() {
            if let Some(node) = self.base.node_of(cube) {
                return Some((&self.base, node));
            }
        }
        let lat = self.lattice(cube.shift)?;
        lat.node_of(cube).map(|n| (lat, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sizes() {
        let cases = [(2usize, 3u32, 85usize), (1, 0, 1), (3, 2, 73)];
        for (d, n, expected) in cases {
            let tree = build_root(&RootSpec::unit(d, n).unwrap()).unwrap();
            assert_eq!(tree.node_count(), expected, "d={d} n={n}");
        }
    }

    #[test]
    fn ancestor_chain_lengths() {
        let tree = build_root(&RootSpec::unit(2, 3).unwrap()).unwrap();
        let cell = DyadicCube::base(3, vec![5, 2]);
        assert_eq!(tree.ancestors(&cell).unwrap().len(), 4);
        assert_eq!(tree.ancestors(&DyadicCube::base(0, vec![0, 0])).unwrap().len(), 1);
        assert_eq!(tree.ancestors(&DyadicCube::base(1, vec![1, 0])).unwrap().len(), 2);
        let chain = tree.ancestors(&cell).unwrap();
        assert_eq!(chain[1], DyadicCube::base(2, vec![2, 1]));
        assert_eq!(chain[3], DyadicCube::base(0, vec![0, 0]));
    }

    #[test]
    fn unknown_cube_is_rejected() {
        let tree = build_root(&RootSpec::unit(2, 3).unwrap()).unwrap();
        assert!(tree.ancestors(&DyadicCube::base(2, vec![4, 0])).is_err());
        assert!(tree.ancestors(&DyadicCube::base(4, vec![0, 0])).is_err());
    }

    #[test]
    fn capacity_error() {
        let spec = RootSpec::unit(3, 10).unwrap();
        assert!(matches!(Lattice::build(&spec, ShiftId::BASE, 0, 1 << 20), Err(HctError::Capacity { .. })));
    }

    #[test]
    fn enumeration_is_level_major_lexicographic() {
        let tree = build_root(&RootSpec::unit(2, 2).unwrap()).unwrap();
        let cubes: Vec<DyadicCube> = tree.enumerate().collect();
        let mut sorted = cubes.clone();
        sorted.sort_by(|a, b| a.level.cmp(&b.level).then(a.index.cmp(&b.index)));
        assert_eq!(cubes, sorted);
        assert_eq!(cubes, tree.enumerate().collect::<Vec<_>>());
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(shifted_lattices(&RootSpec::unit(1, 3).unwrap(), 1).unwrap().len(), 2);
        assert_eq!(shifted_lattices(&RootSpec::unit(2, 3).unwrap(), 1).unwrap().len(), 4);
    }

    fn assert_nested_or_disjoint(lat: &Lattice) {
        let cells: Vec<Vec<usize>> = (0..lat.node_count()).map(|n| lat.cells(n)).collect();
        for a in 0..lat.node_count() {
            for b in 0..lat.node_count() {
                let inter: Vec<usize> = cells[a].iter().filter(|c| cells[b].contains(c)).copied().collect();
                let ok = inter.is_empty() || inter == cells[a] || inter == cells[b];
                assert!(ok, "cubes {} and {} overlap partially", lat.cube(a), lat.cube(b));
            }
        }
    }

    #[test]
    fn nesting_exhaustive_small() {
        for d in 1..=2 {
            for n in 0..=3 {
                let spec = RootSpec::unit(d, n).unwrap();
                for lat in shifted_lattices(&spec, 1).unwrap() {
                    assert_nested_or_disjoint(&lat);
                }
            }
        }
    }

    #[test]
    fn partition_per_level() {
        let spec = RootSpec::unit(2, 3).unwrap();
        for lat in shifted_lattices(&spec, 2).unwrap() {
            for level in lat.top_level()..=lat.finest_level() {
                let mut seen = vec![0u32; spec.cell_count()];
                for node in lat.level_nodes(level) {
                    for c in lat.cells(node) {
                        seen[c] += 1;
                    }
                }
                assert!(seen.iter().all(|&s| s == 1), "level {level} of shift {:?}", lat.shift());
            }
        }
    }

    /// Exact rational check: the point with scaled coordinate `x` (units of
    /// 1/6 cell) lies in `[m·S + off, (m+1)·S + off)` for exactly one `m`.
    #[test]
    fn points_lie_in_exactly_one_cube_per_level() {
        let spec = RootSpec::unit(1, 3).unwrap();
        let n = 3i32;
        for lat in shifted_lattices(&spec, 1).unwrap() {
            for level in lat.top_level()..=n {
                let span = 6i64 << (n - level);
                let sign = if level.rem_euclid(2) == 0 { 1 } else { -1 };
                let off = if lat.shift().shifted(0) { sign * 2 * (1i64 << (n - level)) } else { 0 };
                for x in 1..(6 * 8) {
                    let hits = (-4i64..12).filter(|m| m * span + off <= x && x < (m + 1) * span + off).count();
                    assert_eq!(hits, 1);
                }
            }
        }
    }

    #[test]
    fn shifted_top_cube_contains_root() {
        let spec = RootSpec::unit(2, 4).unwrap();
        for lat in shifted_lattices(&spec, 1).unwrap() {
            assert_eq!(lat.top_nodes().len(), 1, "shift {:?}", lat.shift());
        }
    }

    #[test]
    fn cube_node_roundtrip() {
        let spec = RootSpec::unit(2, 3).unwrap();
        for lat in shifted_lattices(&spec, 1).unwrap() {
            for node in 0..lat.node_count() {
                assert_eq!(lat.node_of(&lat.cube(node)), Some(node));
            }
        }
    }

    #[test]
    fn base_cube_geometry() {
        let spec = RootSpec::unit(2, 3).unwrap();
        let tree = build_root(&spec).unwrap();
        let node = tree.node_of(&DyadicCube::base(1, vec![1, 0])).unwrap();
        assert_eq!(tree.cell_ranges(node), vec![(4, 8), (0, 4)]);
        assert!(tree.is_interior(node));
        assert_eq!(tree.center_cell(node), Some(spec.cell_index(&[6, 2])));
        assert_eq!(tree.side(node), 0.5);
    }

    #[test]
    fn locate_is_half_open() {
        let spec = RootSpec::unit(1, 2).unwrap();
        assert_eq!(spec.locate(&[0.25]), Some(1));
        assert_eq!(spec.locate(&[0.2499]), Some(0));
        assert_eq!(spec.locate(&[1.0]), Some(3));
        assert_eq!(spec.locate(&[1.01]), None);
    }
}
