//! Least-squares fits with confidence intervals, and ratio summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Slope of a pooled fit `y = a_g + slope·x` with one intercept per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub standard_error: f64,
    /// Two-sided confidence interval at `level`.
    pub interval: (f64, f64),
    pub level: f64,
    pub points: usize,
    pub groups: usize,
}

/// Fits `groups` of `(x, y)` points sharing one slope; `None` without x-variation.
pub fn pooled_slope(groups: &[Vec<(f64, f64)>], level: f64) -> Option<SlopeFit> {
    let used: Vec<&Vec<(f64, f64)>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let points: usize = used.iter().map(|g| g.len()).sum();
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut centered = Vec::with_capacity(points);
    for g in &used {
        let n = g.len() as f64;
        let mx = g.iter().map(|p| p.0).sum::<f64>() / n;
        let my = g.iter().map(|p| p.1).sum::<f64>() / n;
        for &(x, y) in g.iter() {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
            centered.push((x - mx, y - my));
        }
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let dof = points as f64 - used.len() as f64 - 1.0;
    let sse: f64 = centered.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let (standard_error, half) = if dof >= 1.0 {
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.5 + level / 2.0);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Some(SlopeFit { slope, standard_error, interval: (slope - half, slope + half), level, points, groups: used.len() })
}

/// `|b/a − 1|`, the relative change used for refinement stability.
pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b / a - 1.0).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let g = vec![(0.0, 1.0), (1.0, 3.0), (2.0, 5.0), (3.0, 7.0)];
        let fit = pooled_slope(&[g], 0.95).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.standard_error < 1e-12);
    }

    #[test]
    fn per_group_intercepts() {
        let a = vec![(0.0, 0.0), (1.0, -1.0), (2.0, -2.1)];
        let b = vec![(0.0, 10.0), (1.0, 9.0), (2.0, 7.9)];
        let fit = pooled_slope(&[a, b], 0.95).unwrap();
        assert!((fit.slope + 1.05).abs() < 1e-12);
        assert!(fit.interval.1 < 0.0);
    }

    #[test]
    fn known_interval() {
        // y = x plus alternating noise; t_{0.975, 3} = 3.182446305
        let g = vec![(0.0, 0.1), (1.0, 0.9), (2.0, 2.1), (3.0, 2.9), (4.0, 4.1)];
        let fit = pooled_slope(&[g], 0.95).unwrap();
        let sxx = 10.0;
        let sse: f64 = [(0.0, 0.1), (1.0, 0.9), (2.0, 2.1), (3.0, 2.9), (4.0, 4.1)]
            .iter()
            .map(|&(x, y): &(f64, f64)| {
                let fitted = 0.02 + fit.slope * x;
                (y - fitted).powi(2)
            })
            .sum();
        let se = (sse / 3.0 / sxx).sqrt();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.interval.1 - fit.slope - 3.182446305 * se).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(pooled_slope(&[vec![(1.0, 2.0), (1.0, 3.0)]], 0.95).is_none());
        assert!(pooled_slope(&[], 0.95).is_none());
    }
}
