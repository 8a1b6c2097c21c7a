//! Seeded input generators.
//!
//! Every generator draws its features on the dyadic grid of depth `depth`
//! (default: the finest level), so the same seed on a finer grid yields the
//! refinement of the same object.

use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choquet::GridFunction;
use crate::error::{HctError, Result};
use crate::grid::{CellSet, RootSpec};
use crate::riesz::DiscreteMeasure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorKind {
    /// Keeps `branching` random children of every kept cube at each level.
    DyadicDust {
        branching: usize,
        #[serde(default)]
        depth: Option<u32>,
    },
    /// Step function with `levels` random values in `(0, 1]` on feature cells.
    RandomStep {
        levels: usize,
        #[serde(default)]
        depth: Option<u32>,
    },
    /// `count` unit-total blobs, each spread uniformly over one feature cell.
    AtomCloud {
        count: usize,
        #[serde(default)]
        depth: Option<u32>,
    },
    /// Unit mass spread along an axis-aligned affine plane of codimension 1.
    PlaneMeasure {
        #[serde(default)]
        depth: Option<u32>,
    },
    /// Unit mass spread uniformly over an ∞-ball aligned with feature cells.
    UniformBall {
        #[serde(default)]
        depth: Option<u32>,
    },
    /// `Σ_k χ_{Q_k}` over a random nested chain `Q_1 ⊃ … ⊃ Q_depth` of dyadic cubes.
    DyadicChain {
        #[serde(default)]
        depth: Option<u32>,
    },
}

impl GeneratorKind {
    pub fn depth(&self) -> Option<u32> {
        match self {
            GeneratorKind::DyadicDust { depth, .. }
            | GeneratorKind::RandomStep { depth, .. }
            | GeneratorKind::AtomCloud { depth, .. }
            | GeneratorKind::PlaneMeasure { depth }
            | GeneratorKind::UniformBall { depth }
            | GeneratorKind::DyadicChain { depth } => *depth,
        }
    }

    /// Same generator with the feature depth pinned (used for refinement pairs).
    pub fn with_depth(&self, d: u32) -> GeneratorKind {
        let mut out = self.clone();
        match &mut out {
            GeneratorKind::DyadicDust { depth, .. }
            | GeneratorKind::RandomStep { depth, .. }
            | GeneratorKind::AtomCloud { depth, .. }
            | GeneratorKind::PlaneMeasure { depth }
            | GeneratorKind::UniformBall { depth }
            | GeneratorKind::DyadicChain { depth } => *depth = Some(d),
        }
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::DyadicDust { .. } => "dyadic-dust",
            GeneratorKind::RandomStep { .. } => "random-step",
            GeneratorKind::AtomCloud { .. } => "atom-cloud",
            GeneratorKind::PlaneMeasure { .. } => "plane-measure",
            GeneratorKind::UniformBall { .. } => "uniform-ball",
            GeneratorKind::DyadicChain { .. } => "dyadic-chain",
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = HctError;

    /// `name` or `name:parameter`, e.g. `dyadic-dust:2`, `random-step:8`, `atom-cloud:5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let count = |default: usize| -> Result<usize> {
            param.map_or(Ok(default), |p| p.parse().map_err(|_| HctError::InvalidParameter(format!("bad generator parameter `{p}`"))))
        };
        Ok(match name {
            "dyadic-dust" => GeneratorKind::DyadicDust { branching: count(2)?, depth: None },
            "random-step" => GeneratorKind::RandomStep { levels: count(8)?, depth: None },
            "atom-cloud" => GeneratorKind::AtomCloud { count: count(4)?, depth: None },
            "plane-measure" => GeneratorKind::PlaneMeasure { depth: None },
            "uniform-ball" => GeneratorKind::UniformBall { depth: None },
            "dyadic-chain" => GeneratorKind::DyadicChain { depth: None },
            other => return Err(HctError::UnknownGenerator(other.to_string())),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generated {
    Function(GridFunction),
    Set(CellSet),
    Measure(DiscreteMeasure),
}

impl Generated {
    pub fn spec(&self) -> &RootSpec {
        match self {
            Generated::Function(f) => f.spec(),
            Generated::Set(s) => s.spec(),
            Generated::Measure(m) => m.spec(),
        }
    }

    /// Sets become indicators and measures their densities.
    pub fn to_function(&self) -> Result<GridFunction> {
        match self {
            Generated::Function(f) => Ok(f.clone()),
            Generated::Set(s) => Ok(GridFunction::indicator(s)),
            Generated::Measure(m) => {
                let vol = m.spec().cell_volume();
                GridFunction::new(m.spec(), m.cell_totals().iter().map(|&x| x / vol).collect())
            }
        }
    }

    /// Functions and sets become the measures `f dx`.
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        match self {
            Generated::Measure(m) => Ok(m.clone()),
            other => {
                let f = other.to_function()?;
                let vol = f.spec().cell_volume();
                DiscreteMeasure::from_cells(f.spec(), f.values().iter().map(|&x| x * vol).collect())
            }
        }
    }
}

fn feature_depth(kind: &GeneratorKind, spec: &RootSpec) -> Result<u32> {
    let depth = kind.depth().unwrap_or(spec.levels);
    if depth > spec.levels {
        return Err(HctError::InvalidParameter(format!("feature depth {depth} exceeds the finest level {}", spec.levels)));
    }
    Ok(depth)
}

/// Finest cells of the feature cell with multi-index `index` at `depth`.
fn feature_cells(spec: &RootSpec, depth: u32, index: &[i64]) -> Vec<usize> {
    spec.base_cube_cells(depth, index)
}

fn feature_index(spec: &RootSpec, depth: u32, k: usize) -> Vec<i64> {
    let side = 1usize << depth;
    let mut idx = vec![0i64; spec.dim];
    let mut rest = k;
    for axis in (0..spec.dim).rev() {
        idx[axis] = (rest % side) as i64;
        rest /= side;
    }
    idx
}

pub fn generate(kind: &GeneratorKind, spec: &RootSpec, seed: u64) -> Result<Generated> {
    spec.validate()?;
    let depth = feature_depth(kind, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = 1usize << (spec.dim as u32 * depth);
    match *kind {
        GeneratorKind::DyadicDust { branching, .. } => {
            let children = 1usize << spec.dim;
            if branching == 0 || branching > children {
                return Err(HctError::InvalidParameter(format!("branching {branching} outside 1..={children}")));
            }
            let mut kept: Vec<Vec<i64>> = vec![vec![0; spec.dim]];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(kept.len() * branching);
                for cube in &kept {
                    for child in sample(&mut rng, children, branching).into_vec() {
                        next.push((0..spec.dim).map(|a| 2 * cube[a] + ((child >> (spec.dim - 1 - a)) & 1) as i64).collect());
                    }
                }
                kept = next;
            }
            Ok(Generated::Set(CellSet::from_cells(spec, kept.iter().flat_map(|c| feature_cells(spec, depth, c)))))
        }
        GeneratorKind::RandomStep { levels, .. } => {
            if levels == 0 {
                return Err(HctError::InvalidParameter("random-step needs at least one level".into()));
            }
            let reps: Vec<f64> = (0..levels).map(|_| 1.0 - rng.random::<f64>()).collect();
            let mut values = vec![0.0; spec.cell_count()];
            for k in 0..features {
                let v = reps[rng.random_range(0..levels)];
                for c in feature_cells(spec, depth, &feature_index(spec, depth, k)) {
                    values[c] = v;
                }
            }
            Ok(Generated::Function(GridFunction::new(spec, values)?))
        }
        GeneratorKind::AtomCloud { count, .. } => {
            if count == 0 {
                return Err(HctError::InvalidParameter("atom-cloud needs at least one atom".into()));
            }
            let mut mass = vec![0.0; spec.cell_count()];
            for _ in 0..count {
                let cells = feature_cells(spec, depth, &feature_index(spec, depth, rng.random_range(0..features)));
                let share = 1.0 / (count * cells.len()) as f64;
                for c in cells {
                    mass[c] += share;
                }
            }
            Ok(Generated::Measure(DiscreteMeasure::from_cells(spec, mass)?))
        }
        GeneratorKind::PlaneMeasure { .. } => {
            // The plane {x_axis = origin + j·L·2^{−depth}} lies in the cell row starting there.
            let axis = rng.random_range(0..spec.dim);
            let row = rng.random_range(0..1usize << depth) << (spec.levels - depth);
            let per = spec.cells_per_axis();
            let members: Vec<usize> = (0..spec.cell_count()).filter(|&c| (c / per.pow((spec.dim - 1 - axis) as u32)) % per == row).collect();
            let share = 1.0 / members.len() as f64;
            let mut mass = vec![0.0; spec.cell_count()];
            for c in members {
                mass[c] = share;
            }
            Ok(Generated::Measure(DiscreteMeasure::from_cells(spec, mass)?))
        }
        GeneratorKind::UniformBall { .. } => {
            if depth == 0 {
                return Ok(Generated::Measure(DiscreteMeasure::from_cells(spec, vec![1.0 / spec.cell_count() as f64; spec.cell_count()])?));
            }
            // Center on a feature vertex, radius a whole number of feature cells.
            let side = 1i64 << depth;
            let radius = rng.random_range(1..=(side / 2).max(1));
            let center: Vec<i64> = (0..spec.dim).map(|_| rng.random_range(0..=side)).collect();
            let scale = 1i64 << (spec.levels - depth);
            let members: Vec<usize> = (0..spec.cell_count())
                .filter(|&c| {
                    spec.cell_coords(c).iter().zip(&center).all(|(&x, &m)| {
                        let x = x as i64;
                        x >= (m - radius) * scale && x < (m + radius) * scale
                    })
                })
                .collect();
            let share = 1.0 / members.len() as f64;
            let mut mass = vec![0.0; spec.cell_count()];
            for c in members {
                mass[c] = share;
            }
            Ok(Generated::Measure(DiscreteMeasure::from_cells(spec, mass)?))
        }
        GeneratorKind::DyadicChain { .. } => {
            let mut values = vec![0.0; spec.cell_count()];
            let mut index = vec![0i64; spec.dim];
            for level in 1..=depth {
                for x in index.iter_mut() {
                    *x = 2 * *x + rng.random_range(0..2);
                }
                for c in spec.base_cube_cells(level, &index) {
                    values[c] += 1.0;
                }
            }
            Ok(Generated::Function(GridFunction::new(spec, values)?))
        }
    }
}

/// The same object on the grid one level finer: cells split into `2^d` children.
pub fn refine(input: &Generated) -> Result<Generated> {
    let spec = input.spec();
    let fine = RootSpec::with_origin(spec.dim, spec.side, spec.origin.clone(), spec.levels + 1)?;
    let parent = |c: usize| spec.cell_index(&fine.cell_coords(c).iter().map(|x| x / 2).collect::<Vec<_>>());
    let children = (1usize << spec.dim) as f64;
    Ok(match input {
        Generated::Function(f) => Generated::Function(GridFunction::with_quantization(
            &fine,
            (0..fine.cell_count()).map(|c| f.values()[parent(c)]).collect(),
            f.quantization(),
        )?),
        Generated::Set(s) => Generated::Set(CellSet::from_cells(&fine, (0..fine.cell_count()).filter(|&c| s.contains(parent(c))))),
        Generated::Measure(m) => Generated::Measure(DiscreteMeasure::new(
            &fine,
            (0..fine.cell_count()).map(|c| m.cell_mass()[parent(c)] / children).collect(),
            m.atoms().to_vec(),
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, n: u32) -> RootSpec {
        RootSpec::unit(d, n).unwrap()
    }

    #[test]
    fn dust_cell_count() {
        let kind = GeneratorKind::DyadicDust { branching: 2, depth: None };
        match generate(&kind, &spec(2, 4), 7).unwrap() {
            Generated::Set(s) => assert_eq!(s.len(), 16),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let kinds = [
            GeneratorKind::DyadicDust { branching: 3, depth: None },
            GeneratorKind::RandomStep { levels: 5, depth: Some(3) },
            GeneratorKind::AtomCloud { count: 4, depth: None },
            GeneratorKind::PlaneMeasure { depth: None },
            GeneratorKind::UniformBall { depth: Some(2) },
        ];
        for kind in &kinds {
            assert_eq!(generate(kind, &spec(2, 4), 11).unwrap(), generate(kind, &spec(2, 4), 11).unwrap());
        }
    }

    #[test]
    fn measures_have_unit_mass() {
        for kind in [
            GeneratorKind::PlaneMeasure { depth: None },
            GeneratorKind::UniformBall { depth: None },
            GeneratorKind::AtomCloud { count: 3, depth: Some(2) },
        ] {
            for seed in 0..5 {
                let mu = generate(&kind, &spec(2, 5), seed).unwrap().to_measure().unwrap();
                assert!((mu.total_mass() - 1.0).abs() < 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn refinement_is_exact() {
        let kind = GeneratorKind::RandomStep { levels: 4, depth: Some(3) };
        let coarse = generate(&kind, &spec(2, 3), 5).unwrap().to_function().unwrap();
        let fine = generate(&kind, &spec(2, 4), 5).unwrap().to_function().unwrap();
        for c in 0..fine.spec().cell_count() {
            let x = fine.spec().cell_coords(c);
            assert_eq!(fine.values()[c], coarse.values()[coarse.spec().cell_index(&[x[0] / 2, x[1] / 2])]);
        }
    }

    #[test]
    fn subdivision_matches_feature_depth() {
        let kind = GeneratorKind::RandomStep { levels: 4, depth: Some(3) };
        let coarse = generate(&kind, &spec(2, 3), 9).unwrap();
        assert_eq!(refine(&coarse).unwrap(), generate(&kind, &spec(2, 4), 9).unwrap());
        let mu = generate(&GeneratorKind::UniformBall { depth: None }, &spec(2, 3), 2).unwrap();
        let fine = refine(&mu).unwrap().to_measure().unwrap();
        assert!((fine.total_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chain_values() {
        let f = generate(&GeneratorKind::DyadicChain { depth: None }, &spec(2, 4), 3).unwrap().to_function().unwrap();
        assert_eq!(f.max(), 4.0);
        assert_eq!(f.values().iter().filter(|&&v| v == 4.0).count(), 1);
        assert_eq!(f.values().iter().filter(|&&v| v >= 1.0).count(), 64);
    }

    #[test]
    fn config_names() {
        assert_eq!("dyadic-dust:3".parse::<GeneratorKind>().unwrap(), GeneratorKind::DyadicDust { branching: 3, depth: None });
        assert!(matches!("spiral".parse::<GeneratorKind>(), Err(HctError::UnknownGenerator(_))));
        let kind: GeneratorKind = serde_json::from_str(r#"{"kind":"dyadic-dust","branching":2}"#).unwrap();
        assert_eq!(kind, GeneratorKind::DyadicDust { branching: 2, depth: None });
        assert!(serde_json::from_str::<GeneratorKind>(r#"{"kind":"spiral"}"#).is_err());
    }
}
