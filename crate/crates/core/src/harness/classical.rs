//! Lebesgue-measure reference implementations over the same cube families.
//!
//! Plain sums over cells, without contents or layer-cake integration; at
//! `β = d` the Choquet routes must agree with these.

use crate::grid::Lattice;

/// `Σ f · vol(cell)`.
pub fn riemann_sum(values: &[f64], cell_volume: f64) -> f64 {
    values.iter().sum::<f64>() * cell_volume
}

/// `(Σ f^p vol)^{1/p}`.
pub fn lp_norm(values: &[f64], p: f64, cell_volume: f64) -> f64 {
    (values.iter().map(|v| v.powf(p)).sum::<f64>() * cell_volume).powf(1.0 / p)
}

/// `sup_t t·|{f > t}|^{1/p}`, attained as `t` increases to a value.
pub fn weak_lp_norm(values: &[f64], p: f64, cell_volume: f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        if v > 0.0 {
            best = best.max(v * ((i + 1) as f64 * cell_volume).powf(1.0 / p));
        }
    }
    best
}

/// `sup_{Q ∋ x} |Q|^{-1} ∫_{Q ∩ root} f` over every cube of the lattices (zero extension).
pub fn maximal(lattices: &[&Lattice], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; values.len()];
    for lattice in lattices {
        let vol = lattice.spec().cell_volume();
        let dim = lattice.spec().dim as i32;
        for node in 0..lattice.node_count() {
            let cells = lattice.cells(node);
            let avg = cells.iter().map(|&c| values[c]).sum::<f64>() * vol / lattice.side(node).powi(dim);
            for c in cells {
                out[c] = out[c].max(avg);
            }
        }
    }
    out
}

/// `inf_c |Q|^{-1} ∫_Q |f − c|`, minimized at a median.
pub fn oscillation(cell_values: &mut [f64], cell_volume: f64, cube_volume: f64) -> f64 {
    cell_values.sort_by(f64::total_cmp);
    let median = cell_values[cell_values.len() / 2];
    cell_values.iter().map(|v| (v - median).abs()).sum::<f64>() * cell_volume / cube_volume
}

/// `sup` of [`oscillation`] over cubes inside the root containing each cell.
pub fn sharp_maximal(lattices: &[&Lattice], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; values.len()];
    for lattice in lattices {
        let vol = lattice.spec().cell_volume();
        let dim = lattice.spec().dim as i32;
        for node in (0..lattice.node_count()).filter(|&n| lattice.is_interior(n)) {
            let cells = lattice.cells(node);
            let mut local: Vec<f64> = cells.iter().map(|&c| values[c]).collect();
            let osc = oscillation(&mut local, vol, lattice.side(node).powi(dim));
            for c in cells {
                out[c] = out[c].max(osc);
            }
        }
    }
    out
}

/// `|{f > t}|` by counting cells.
pub fn level_measure(values: &[f64], t: f64, cell_volume: f64) -> f64 {
    values.iter().filter(|&&v| v > t).count() as f64 * cell_volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_root, RootSpec};

    #[test]
    fn constant_function() {
        let spec = RootSpec::unit(2, 2).unwrap();
        let tree = build_root(&spec).unwrap();
        let f = vec![3.0; 16];
        assert!(maximal(&[&tree], &f).iter().all(|&v| (v - 3.0).abs() < 1e-15));
        assert!(sharp_maximal(&[&tree], &f).iter().all(|&v| v == 0.0));
        assert_eq!(weak_lp_norm(&f, 2.0, 1.0 / 16.0), 3.0);
    }

    #[test]
    fn median_oscillation() {
        let mut v = vec![0.0, 0.0, 1.0, 5.0];
        // median 1: |−1|+|−1|+0+4 = 6, over |Q| = 4 cells
        assert_eq!(oscillation(&mut v, 1.0, 4.0), 1.5);
    }
}
