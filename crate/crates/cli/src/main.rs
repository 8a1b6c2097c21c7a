use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hct_core::choquet::{exp_functional, integral_root, lp_norm, weak_lp_norm, GridFunction};
use hct_core::content::{content, content_proxy, content_tree, ContentParams};
use hct_core::czpack::{cz_decompose, packing_select};
use hct_core::harness::{self, emit, ExperimentConfig};
use hct_core::operators::{
    beta_maximal, bmo_beta_report, centered_sharp_maximal, dyadic_maximal, dyadic_sharp_maximal, fractional_maximal, morrey_report, sharp_maximal,
    OperatorField, Policy,
};
use hct_core::riesz::{dyadic_riesz, riesz_combined, riesz_potential, RieszParams};
use hct_core::{build_root, io, CellSet, Grid, ShiftId};

#[derive(Parser)]
#[command(name = "hct", version, about = "Hausdorff-content integrals, maximal operators and Riesz potentials on dyadic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Maximal,
    BetaMaximal,
    Sharp,
    DyadicSharp,
    CenteredSharp,
    FracMaximal,
    Bmo,
    Morrey,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Exact,
    Fast,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Exact => Policy::exact(),
            PolicyArg::Fast => Policy::fast(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Dyadic Hausdorff content of a cell set.
    Content {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Also report the shifted-lattice proxy for the ball-cover content.
        #[arg(long)]
        proxy: bool,
        /// Write the per-cube content tree as JSON.
        #[arg(long)]
        tree_out: Option<PathBuf>,
    },
    /// Choquet integral of a grid function over the root cube.
    Choquet {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        p: Option<f64>,
        /// Also report the weak L^p quasi-norm (needs --p).
        #[arg(long)]
        weak: bool,
        /// Exponential functional with this γ.
        #[arg(long)]
        exp: Option<f64>,
    },
    /// Maximal operators, BMO and Morrey norms.
    Op {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long = "fn", conflicts_with = "measure")]
        function: Option<PathBuf>,
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value = "fast")]
        policy: PolicyArg,
        /// Field output file; CSV to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calderón–Zygmund decomposition with its certificate.
    Cz {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        lambda: f64,
    },
    /// Packing selection from a family of dyadic cubes.
    Pack {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        beta: f64,
    },
    /// Riesz potential of a measure.
    Riesz {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Dyadic potential on one lattice instead of the continuous kernel.
        #[arg(long)]
        dyadic: bool,
        /// Lattice shift index for --dyadic; 0 is the standard lattice.
        #[arg(long, default_value_t = 0, requires = "dyadic")]
        shift: u32,
        /// Max and sum of the dyadic potentials over all shifted lattices.
        #[arg(long, conflicts_with = "dyadic")]
        combined: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config; exits nonzero unless every asserted verdict passes.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&serde_json::to_value(value)?)?);
    Ok(())
}

fn emit_field(field: &OperatorField, out: Option<&Path>) -> Result<()> {
    let f = field.to_function()?;
    match out {
        Some(path) => io::write_function(path, &f)?,
        None => print!("{}", io::format_function(&f)),
    }
    Ok(())
}

fn require<T: Copy>(value: Option<T>, flag: &str, which: &str) -> Result<T> {
    value.with_context(|| format!("--{flag} is required for {which}"))
}

fn op(
    which: Which,
    function: Option<PathBuf>,
    measure: Option<PathBuf>,
    beta: Option<f64>,
    alpha: Option<f64>,
    policy: Policy,
    out: Option<PathBuf>,
) -> Result<()> {
    let name = which.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let load_fn = || -> Result<GridFunction> {
        let path = function.as_ref().with_context(|| format!("--fn is required for {name}"))?;
        Ok(io::read_function(path)?)
    };
    let load_measure = || -> Result<_> {
        let path = measure.as_ref().with_context(|| format!("--measure is required for {name}"))?;
        Ok(io::read_measure(path)?)
    };
    let field = match which {
        Which::Maximal => dyadic_maximal(&load_fn()?, require(beta, "beta", &name)?)?,
        Which::BetaMaximal => beta_maximal(&load_fn()?, require(beta, "beta", &name)?)?,
        Which::Sharp => sharp_maximal(&load_fn()?, require(beta, "beta", &name)?, policy)?,
        Which::DyadicSharp => dyadic_sharp_maximal(&load_fn()?, require(beta, "beta", &name)?, policy)?,
        Which::CenteredSharp => centered_sharp_maximal(&load_fn()?, require(beta, "beta", &name)?, policy)?,
        Which::FracMaximal => fractional_maximal(&load_measure()?, require(alpha, "alpha", &name)?)?,
        Which::Bmo => {
            let u = load_fn()?;
            let beta = require(beta, "beta", &name)?;
            let report = bmo_beta_report(&Grid::new(u.spec())?, &u, &CellSet::full(u.spec()), beta, policy)?;
            let extremal = report.extremal.map(|c| c.to_string());
            return print_json(&json!({ "beta": beta, "norm": report.norm, "extremal": extremal }));
        }
        Which::Morrey => {
            let mu = load_measure()?;
            let beta = require(beta, "beta", &name)?;
            let report = morrey_report(&mu, &CellSet::full(mu.spec()), beta)?;
            return print_json(&report);
        }
    };
    emit_field(&field, out.as_deref())
}

fn verify(config: &Path, out: Option<&Path>, seed: Option<u64>, jobs: Option<usize>) -> Result<bool> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(seed) = seed {
        config = config.with_seed(seed);
    }
    let report = match jobs {
        Some(jobs) => harness::run_with_jobs(&config, jobs)?,
        None => harness::run(&config)?,
    };
    for v in &report.verdicts {
        let status = match (v.asserted, v.passed) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "info",
            (false, false) => "info-fail",
        };
        println!("{status:9} {}: {}", v.name, v.detail);
    }
    println!(
        "{} cases, {} verdicts, {:.2}s: {}",
        report.cases.len(),
        report.verdicts.len(),
        report.wall_clock_seconds,
        if report.passed() { "all asserted verdicts pass" } else { "FAILED" }
    );
    if let Some(dir) = out {
        emit::write_report(&report, dir)?;
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Content { set, beta, proxy, tree_out } => {
            let set = io::read_cellset(&set)?;
            let params = ContentParams::new(beta);
            let mut out = json!({ "beta": beta, "cells": set.len(), "content": content(&set, params)? });
            if proxy {
                out["proxy"] = json!(content_proxy(&set, params)?);
            }
            if let Some(path) = tree_out {
                let tree = build_root(set.spec())?;
                let json = content_tree(&tree, &set, params)?.to_json();
                std::fs::write(&path, serde_json::to_string_pretty(&json)?).with_context(|| format!("writing {}", path.display()))?;
            }
            print_json(&out)?;
        }
        Command::Choquet { function, beta, p, weak, exp } => {
            let f = io::read_function(&function)?;
            let mut out = json!({ "beta": beta, "integral": integral_root(&f, beta)? });
            if weak && p.is_none() {
                bail!("--weak needs --p");
            }
            if let Some(p) = p {
                out["p"] = json!(p);
                out["lp_norm"] = json!(lp_norm(&f, p, beta)?);
                if weak {
                    out["weak_lp_norm"] = json!(weak_lp_norm(&f, p, beta)?);
                }
            }
            if let Some(gamma) = exp {
                out["gamma"] = json!(gamma);
                out["exp_functional"] = json!(exp_functional(&f, gamma, &CellSet::full(f.spec()), beta)?);
            }
            print_json(&out)?;
        }
        Command::Op { which, function, measure, beta, alpha, policy, out } => {
            op(which, function, measure, beta, alpha, policy.into(), out)?;
        }
        Command::Cz { function, beta, lambda } => {
            let f = io::read_function(&function)?;
            print_json(&cz_decompose(&f, beta, lambda)?)?;
        }
        Command::Pack { family, beta } => {
            let (spec, family) = io::read_family(&family)?;
            print_json(&packing_select(&spec, &family, beta)?)?;
        }
        Command::Riesz { measure, alpha, dyadic, shift, combined, out } => {
            let mu = io::read_measure(&measure)?;
            let params = RieszParams::new(alpha, mu.spec());
            if combined {
                let both = riesz_combined(&mu, &params)?;
                match out {
                    Some(path) => {
                        let stem = path.with_extension("");
                        let ext = path.extension().map_or_else(|| "csv".into(), |e| e.to_string_lossy().into_owned());
                        emit_field(&both.max, Some(&PathBuf::from(format!("{}.max.{ext}", stem.display()))))?;
                        emit_field(&both.sum, Some(&PathBuf::from(format!("{}.sum.{ext}", stem.display()))))?;
                    }
                    None => {
                        println!("# max over shifted lattices");
                        emit_field(&both.max, None)?;
                        println!("# sum over shifted lattices");
                        emit_field(&both.sum, None)?;
                    }
                }
            } else if dyadic {
                let grid = Grid::new(mu.spec())?;
                let lattice =
                    grid.lattice(ShiftId(shift)).with_context(|| format!("no lattice with shift {shift} in dimension {}", mu.spec().dim))?;
                emit_field(&dyadic_riesz(&mu, &params, lattice)?, out.as_deref())?;
            } else {
                emit_field(&riesz_potential(&mu, &params)?, out.as_deref())?;
            }
        }
        Command::Verify { config, out, seed, jobs } => return verify(&config, out.as_deref(), seed, jobs),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
