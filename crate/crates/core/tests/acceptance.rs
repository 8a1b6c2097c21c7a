//! End-to-end acceptance criteria, each with its tolerance and time budget.
//! Prints one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use hct_core::choquet::{integral_root, lp_norm, GridFunction};
use hct_core::content::{brute_force_content, content, ContentParams};
use hct_core::czpack::{cz_decompose, packing_integral_check, packing_select, GoodLambdaSharpFields};
use hct_core::harness::{self, classical, generate, Experiment, ExperimentConfig, GeneratorKind, Report};
use hct_core::operators::{beta_maximal_with, dyadic_maximal, sharp_maximal_with, Policy};
use hct_core::{build_root, CellSet, DyadicCube, Grid, HctError, Lattice, RootSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn random_set(rng: &mut ChaCha8Rng, spec: &RootSpec, density: f64) -> CellSet {
    CellSet::from_mask(spec, (0..spec.cell_count()).map(|_| rng.random_bool(density)).collect()).unwrap()
}

/// Step function with `levels` values on dyadic blocks of side `2^{-depth}`.
fn random_step(rng: &mut ChaCha8Rng, spec: &RootSpec, levels: usize, depth: u32) -> GridFunction {
    let reps: Vec<f64> = (0..levels).map(|_| rng.random_range(0.0..4.0)).collect();
    let shift = spec.levels - depth;
    let block: Vec<f64> = (0..1usize << (spec.dim as u32 * depth)).map(|_| reps[rng.random_range(0..levels)]).collect();
    let values = (0..spec.cell_count())
        .map(|c| {
            let coords = spec.cell_coords(c);
            let k = coords.iter().fold(0usize, |acc, &x| (acc << depth) | (x >> shift));
            block[k]
        })
        .collect();
    GridFunction::new(spec, values).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_content() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    let line = RootSpec::unit(1, 3).unwrap();
    for mask in 0u32..256 {
        let set = CellSet::from_mask(&line, (0..8).map(|c| mask >> c & 1 == 1).collect()).unwrap();
        for beta in [0.5, 1.0, 1.5, 2.0] {
            let p = ContentParams::new(beta);
            match (content(&set, p), brute_force_content(&set, p)) {
                (Ok(a), Ok(b)) => {
                    worst = worst.max((a - b).abs());
                    checked += 1;
                }
                (Err(HctError::BetaOutOfRange { .. }), Err(HctError::BetaOutOfRange { .. })) if beta > 1.0 => rejected += 1,
                (a, b) => return outcome(false, format!("d=1 β={beta} mask {mask:08b}: {a:?} vs {b:?}")),
            }
        }
    }
    let plane = RootSpec::unit(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let density = rng.random_range(0.05..0.95);
        let set = random_set(&mut rng, &plane, density);
        for beta in [0.5, 1.0, 1.5, 2.0] {
            let p = ContentParams::new(beta);
            worst = worst.max((content(&set, p).unwrap() - brute_force_content(&set, p).unwrap()).abs());
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-12 && rejected == 512,
        format!("{checked} comparisons, max |DP − brute force| = {worst:.1e}; β > 1 on d=1 rejected by both routes ({rejected} sets)"),
    )
}

fn lebesgue_reduction() -> Outcome {
    let spec = RootSpec::unit(2, 6).unwrap();
    let vol = spec.cell_volume();
    let grid = Grid::new(&spec).unwrap();
    let base = build_root(&spec).unwrap();
    let all: Vec<&Lattice> = std::iter::once(grid.base()).chain(grid.lattices()).collect();
    let shifted: Vec<&Lattice> = grid.lattices().iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut content_err, mut integral_err, mut op_err, mut goodlambda_err): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..10 {
        let set = random_set(&mut rng, &spec, 0.3);
        content_err = content_err.max((content(&set, ContentParams::new(2.0)).unwrap() - set.len() as f64 * vol).abs());
        let levels = rng.random_range(2..6);
        let f = random_step(&mut rng, &spec, levels, 3);
        integral_err = integral_err.max((integral_root(&f, 2.0).unwrap() - classical::riemann_sum(f.values(), vol)).abs());

        let dyadic = dyadic_maximal(&f, 2.0).unwrap();
        op_err = op_err.max(max_abs_diff(&dyadic.values, &classical::maximal(&[&base], f.values())));
        let beta_max = beta_maximal_with(&grid, &f, 2.0).unwrap();
        op_err = op_err.max(max_abs_diff(&beta_max.values, &classical::maximal(&all, f.values())));
        let sharp = sharp_maximal_with(&grid, &f, 2.0, Policy::exact()).unwrap();
        op_err = op_err.max(max_abs_diff(&sharp.values, &classical::sharp_maximal(&shifted, f.values())));

        let fields = GoodLambdaSharpFields::new(&f, 2.0, Policy::exact()).unwrap();
        let (m, s) = (classical::maximal(&[&base], f.values()), classical::sharp_maximal(&[&base], f.values()));
        op_err = op_err.max(max_abs_diff(&fields.maximal, &m)).max(max_abs_diff(&fields.sharp, &s));
        for t in [0.5, 1.0, 2.0, 3.0] {
            let g = fields.check(t, 8.0).unwrap();
            goodlambda_err = goodlambda_err
                .max((g.lhs - classical::level_measure(&m, t, vol)).abs())
                .max((g.sharp_term - classical::level_measure(&s, t / 8.0, vol)).abs())
                .max((g.tail - classical::level_measure(&m, t / 16.0, vol)).abs());
        }
    }
    outcome(
        content_err == 0.0 && integral_err <= 1e-10 && op_err <= 1e-8 && goodlambda_err <= 1e-8,
        format!(
            "content error {content_err:.1e}, integral vs Riemann {integral_err:.1e}, operators vs classical {op_err:.1e}, good-λ level sets {goodlambda_err:.1e}"
        ),
    )
}

fn capacity_axioms() -> Outcome {
    let spec = RootSpec::unit(2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = [0usize; 3];
    for i in 0..1000 {
        let beta = [0.5, 1.0, 1.5, 2.0][i % 4];
        let p = ContentParams::new(beta);
        let tol = 1e-12;
        let (e, f) = (random_set(&mut rng, &spec, 0.2), random_set(&mut rng, &spec, 0.2));
        let (ce, cf) = (content(&e, p).unwrap(), content(&f, p).unwrap());
        let union = e.union(&f).unwrap();
        let cu = content(&union, p).unwrap();
        let ci = content(&e.intersection(&f).unwrap(), p).unwrap();
        violations[0] += usize::from(ce > cu + tol || ci > ce + tol);
        violations[1] += usize::from(cu > ce + cf + tol);
        violations[2] += usize::from(cu + ci > ce + cf + tol);
    }
    outcome(
        violations == [0, 0, 0],
        format!(
            "violations over 1000 pairs: monotonicity {}, subadditivity {}, strong subadditivity {}",
            violations[0], violations[1], violations[2]
        ),
    )
}

fn choquet_calculus() -> Outcome {
    let spec = RootSpec::unit(2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = [0usize; 4];
    for i in 0..500 {
        let beta = [0.5, 1.0, 1.5, 2.0][i % 4];
        let (f, g) = (random_step(&mut rng, &spec, 4, 3), random_step(&mut rng, &spec, 3, 4));
        let a = rng.random_range(0.0..10.0);
        let p = rng.random_range(1.1..6.0);
        let q = p / (p - 1.0);
        let (if_, ig) = (integral_root(&f, beta).unwrap(), integral_root(&g, beta).unwrap());
        let scaled = integral_root(&f.map(|v| a * v).unwrap(), beta).unwrap();
        violations[0] += usize::from((scaled - a * if_).abs() > 1e-10 * (a * if_).max(1.0));
        let sum = integral_root(&f.zip(&g, |x, y| x + y).unwrap(), beta).unwrap();
        let tol = 1e-12 * sum.max(1.0);
        violations[1] += usize::from(sum > 2.0 * (if_ + ig) + tol);
        let product = integral_root(&f.zip(&g, |x, y| x * y).unwrap(), beta).unwrap();
        let holder = 2.0 * lp_norm(&f, p, beta).unwrap() * lp_norm(&g, q, beta).unwrap();
        violations[2] += usize::from(product > holder + 1e-12 * holder.max(1.0));
        violations[3] += usize::from(sum > if_ + ig + tol);
    }
    outcome(
        violations == [0; 4],
        format!(
            "violations over 500 pairs: homogeneity {}, factor-2 sublinearity {}, factor-2 Hölder {}, strong-subadditivity bound {}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    )
}

fn cz_certificates() -> Outcome {
    let spec = RootSpec::unit(2, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut certified, mut rejected, mut wrong) = (0, 0, Vec::new());
    for i in 0..100 {
        let beta = [1.0, 1.5, 2.0][i % 3];
        let levels = rng.random_range(2..6);
        let depth = rng.random_range(2..5);
        let f = random_step(&mut rng, &spec, levels, depth);
        let root = integral_root(&f, beta).unwrap();
        let lambda = root * rng.random_range(0.5..6.0);
        match cz_decompose(&f, beta, lambda) {
            Ok(cz) if lambda >= root && cz.certificate.holds() => certified += 1,
            Err(HctError::RootSaturated { .. }) if lambda < root => rejected += 1,
            other => wrong.push(format!("case {i}: λ/root = {:.3}: {:?}", lambda / root, other.map(|c| c.certificate))),
        }
    }
    outcome(wrong.is_empty(), format!("{certified} certified, {rejected} root-saturated rejected, {} wrong {:?}", wrong.len(), wrong.first()))
}

fn packing_certificates() -> Outcome {
    let spec = RootSpec::unit(2, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for i in 0..100 {
        let beta = [0.5, 1.0, 1.5, 2.0][i % 4];
        // Random disjoint cubes: walk down from the root, stopping or splitting at random.
        let mut family = Vec::new();
        let mut stack = vec![DyadicCube::base(0, vec![0, 0])];
        while let Some(cube) = stack.pop() {
            let r: f64 = rng.random();
            if cube.level >= 1 && r < 0.25 {
                family.push(cube);
            } else if cube.level < 5 && r < 0.85 {
                for child in 0..4i64 {
                    stack.push(DyadicCube::base(cube.level + 1, vec![2 * cube.index[0] + (child >> 1), 2 * cube.index[1] + (child & 1)]));
                }
            }
        }
        if family.is_empty() {
            family.push(DyadicCube::base(5, vec![rng.random_range(0..32), rng.random_range(0..32)]));
        }
        let selection = packing_select(&spec, &family, beta).unwrap();
        let g = random_step(&mut rng, &spec, 3, 3);
        let (lhs, rhs) = packing_integral_check(&selection, &g).unwrap();
        if !selection.certificate.holds() || lhs > rhs + 1e-12 * rhs.max(1.0) {
            failures.push(format!("family {i} ({} cubes): {:?}, integral {lhs} vs {rhs}", family.len(), selection.certificate));
        }
    }
    outcome(failures.is_empty(), format!("{} of 100 families failed {:?}", failures.len(), failures.first()))
}

fn harness_outcome(report: &Report) -> Outcome {
    let asserted: Vec<_> = report.verdicts.iter().filter(|v| v.asserted).collect();
    let failed: Vec<_> = asserted.iter().filter(|v| !v.passed).collect();
    let mut detail = format!("{} cases, {}/{} asserted verdicts pass", report.cases.len(), asserted.len() - failed.len(), asserted.len());
    for v in failed.iter().take(3) {
        detail.push_str(&format!("; FAILED {}: {}", v.name, v.detail));
    }
    outcome(!asserted.is_empty() && failed.is_empty(), detail)
}

fn experiment(e: Experiment) -> ExperimentConfig {
    ExperimentConfig::new(e)
}

fn goodlambda_sharp() -> Outcome {
    let mut config = experiment(Experiment::GoodlambdaSharp);
    config.params.t_count = Some(20);
    config.params.a = vec![8.0, 32.0, 128.0];
    config.policy = Some(Policy::exact());
    let report = harness::run(&config).unwrap();
    let mut o = harness_outcome(&report);
    let checked = report.cases.iter().filter(|c| c.skipped.is_none()).count();
    let labelled = report.cases.iter().filter(|c| c.params.contains_key("certified_by")).count();
    let verdict = report.verdict("goodlambda-sharp").map(|v| v.detail.clone()).unwrap_or_default();
    o.passed &= checked == labelled && checked >= 50 * 3 && report.verdict("goodlambda-sharp").is_some_and(|v| v.passed);
    o.detail = format!("{}; {verdict}", o.detail);
    o
}

fn fefferman_stein() -> Outcome {
    let mut config = experiment(Experiment::FeffermanStein);
    config.params.beta = vec![1.25, 1.5, 2.0];
    config.params.p = vec![1.5, 2.0, 4.0];
    let report = harness::run(&config).unwrap();
    let mut o = harness_outcome(&report);
    let references = report.verdicts.iter().filter(|v| v.name.ends_with("classical reference")).count();
    o.passed &= references == 3;
    o
}

fn adams() -> Outcome {
    let mut config = experiment(Experiment::Adams);
    config.params.pairs = vec![(1.0, 1.25), (1.0, 1.5)];
    harness_outcome(&harness::run(&config).unwrap())
}

fn goodlambda_riesz() -> Outcome {
    let mut config = experiment(Experiment::GoodlambdaRiesz);
    config.params.epsilon = vec![0.5, 0.25, 0.125, 0.0625];
    let report = harness::run(&config).unwrap();
    let measures: std::collections::BTreeSet<_> = report.cases.iter().filter_map(|c| c.params.get("input")).map(|v| v.to_string()).collect();
    let mut o = harness_outcome(&report);
    o.passed &= measures.len() == 10;
    o
}

fn muckenhoupt_wheeden() -> Outcome {
    let mut config = experiment(Experiment::MuckenhouptWheeden);
    config.params.p = vec![1.0, 2.0, 4.0, 8.0];
    harness_outcome(&harness::run(&config).unwrap())
}

fn exp_integrability() -> Outcome {
    let mut config = experiment(Experiment::ExpIntegrability);
    config.params.balls = Some(5);
    let report = harness::run(&config).unwrap();
    let mut o = harness_outcome(&report);
    let balls = report.cases.iter().filter(|c| c.skipped.is_none()).count();
    let gamma = report.verdicts.iter().find(|v| v.asserted).and_then(|v| v.value).unwrap_or(0.0);
    o.passed &= balls == 5;
    o.detail = format!("{}; largest certified γ = {gamma:.6} over {balls} balls", o.detail);
    o
}

fn embedding() -> Outcome {
    let mut config = experiment(Experiment::Embedding);
    config.params.pairs = vec![(1.0, 1.5), (0.5, 2.0)];
    let report = harness::run(&config).unwrap();
    let mut o = harness_outcome(&report);
    let functions = report.cases.iter().filter(|c| c.skipped.is_none()).count();
    o.passed &= functions == 400;
    o
}

#[test]
fn acceptance() {
    // Sanity check the generators the harness criteria rely on.
    assert!(generate(&GeneratorKind::PlaneMeasure { depth: None }, &RootSpec::unit(2, 5).unwrap(), 0).is_ok());
    let criteria: Vec<Criterion> = vec![
        (1, "content equals brute-force oracle", 30, oracle_content),
        (2, "Lebesgue reduction at β = d", 60, lebesgue_reduction),
        (3, "capacity axioms", 30, capacity_axioms),
        (4, "Choquet calculus", 60, choquet_calculus),
        (5, "Calderón–Zygmund certificate", 60, cz_certificates),
        (6, "packing certificate", 30, packing_certificates),
        (7, "good-λ for the sharp maximal function", 600, goodlambda_sharp),
        (8, "Fefferman–Stein", 600, fefferman_stein),
        (9, "Adams pointwise equivalence", 300, adams),
        (10, "exponential good-λ for Riesz potentials", 300, goodlambda_riesz),
        (11, "Muckenhoupt–Wheeden", 600, muckenhoupt_wheeden),
        (12, "exponential integrability", 300, exp_integrability),
        (13, "embedding and sharp-function chain", 60, embedding),
    ];
    let mut failed = Vec::new();
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let mut o = check();
        let elapsed = start.elapsed();
        let within = elapsed <= Duration::from_secs(budget);
        if !within {
            o.detail.push_str(&format!("; over the {budget} s budget"));
        }
        let passed = o.passed && within;
        println!("{} criterion {n:2} {name} [{:.2}s / {budget}s]: {}", if passed { "PASS" } else { "FAIL" }, elapsed.as_secs_f64(), o.detail);
        if !passed {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
