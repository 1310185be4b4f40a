use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wasep::exact::Parts;
use wasep::harness::{
    exact_checks, format_report, oracle_gap, read_defect_csv, resolve_spec, residual_study, run_experiment,
    ExperimentConfig,
};
use wasep::kmc::{run_ensemble, scaling_check, ScalingPlan, ScalingRule};
use wasep::lattice::Torus;
use wasep::measures::{sample_product_with, DensityProfile, InitialProfile};
use wasep::pde::{burgers_solve, write_trajectory_csv, BurgersCoefficients, ContinuumField, SemidiscreteFlow};
use wasep::rates::{critical_roots, density_grid, einstein_check, validate_rate_spec, TransportCoefficients};

#[derive(Parser)]
#[command(name = "wasep", version, about = "Weakly asymmetric speed-change exclusion: simulation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate spec tools.
    Rates {
        #[command(subcommand)]
        command: RatesCommand,
    },
    /// Transport coefficients at the critical density (or at --alpha0).
    Coeffs {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        alpha0: Option<f64>,
    },
    /// Explicit expansion of L*1.
    Adjoint {
        #[command(subcommand)]
        command: AdjointCommand,
    },
    /// Continuum and semi-discrete solvers.
    Pde {
        #[command(subcommand)]
        command: PdeCommand,
    },
    /// Brute-force oracle checks on a small ring.
    Exact {
        #[command(subcommand)]
        command: ExactCommand,
    },
    /// Ensemble simulation from a perturbed product measure.
    Simulate(SimulateArgs),
    /// Configured experiments.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// `ssep`, `beta:<b>` or a spec file ending in `.toml`.
    #[arg(long, default_value = "ssep")]
    spec: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
}

impl SpecArgs {
    fn load(&self) -> Result<wasep::rates::RateSpec> {
        resolve_spec(&self.spec, self.d).with_context(|| format!("loading spec {}", self.spec))
    }
}

#[derive(Subcommand)]
enum RatesCommand {
    /// Gradient, mean-zero, pair-independence and Einstein checks.
    Validate {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Prints the rate spec as a TOML document that `--spec` accepts.
    Export {
        #[command(flatten)]
        spec: SpecArgs,
    },
}

#[derive(Subcommand)]
enum AdjointCommand {
    /// Formula versus matrix L*1 on `0.5 + amplitude cos(2 pi x / n)`.
    Check {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value = "n_pow:-0.5")]
        rule: ScalingRule,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
    },
    /// CSV `n,t,max_residual,bound` of the Burgers residual.
    Residual {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256, 512])]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1])]
        times: Vec<f64>,
        #[arg(long, default_value = "n_pow:-0.5")]
        rule: ScalingRule,
        #[arg(long, default_value = "cos_k:1", value_parser = parse_initial)]
        initial: InitialProfile,
        #[arg(long, default_value_t = 1024)]
        mesh: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PdeCommand {
    /// Trajectory CSV `t,site,value` of the Burgers or semi-discrete solution.
    Solve {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "cos_k:1", value_parser = parse_initial)]
        initial: InitialProfile,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1])]
        times: Vec<f64>,
        /// Mesh side for the continuum solver, lattice side with --semidiscrete.
        #[arg(long, default_value_t = 256)]
        mesh: usize,
        #[arg(long)]
        dt: Option<f64>,
        /// Integrate the lattice equation instead, with this scaling rule.
        #[arg(long)]
        semidiscrete: Option<ScalingRule>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExactCommand {
    /// Runs the oracle battery and prints one line per invariant.
    Check {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value = "n_pow:-0.5")]
        rule: ScalingRule,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value = "n_pow:-0.5")]
    rule: ScalingRule,
    /// Base density; the critical density when absent.
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long, default_value = "cos_k:1", value_parser = parse_initial)]
    initial: InitialProfile,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1])]
    times: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    replicas: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write `t,site,mean_occupancy` instead of per-replica rows.
    #[arg(long)]
    mean: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Runs the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Summarizes `defect.csv` of a finished run.
    Report {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        bands: f64,
    },
}

/// `const:<c>`, `cos_k:<k>`, `sin_k:<k>` or `bump:<center>,<width>`.
fn parse_initial(s: &str) -> Result<InitialProfile, String> {
    let (name, arg) = s.split_once(':').ok_or_else(|| format!("{s:?}: expected <name>:<params>"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let int = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{s:?}: {e}"));
    match name {
        "const" => Ok(InitialProfile::Const { value: num(arg)? }),
        "cos_k" => Ok(InitialProfile::CosK { k: int(arg)? }),
        "sin_k" => Ok(InitialProfile::SinK { k: int(arg)? }),
        "bump" => {
            let (c, w) = arg.split_once(',').ok_or_else(|| format!("{s:?}: bump needs <center>,<width>"))?;
            Ok(InitialProfile::Bump { center: num(c)?, width: num(w)? })
        }
        _ => Err(format!("unknown initial profile {name:?}")),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Rates { command: RatesCommand::Validate { spec } } => {
            // Files are parsed without validation so that every failing clause gets reported.
            let spec = if spec.spec.ends_with(".toml") {
                let text = std::fs::read_to_string(&spec.spec).with_context(|| format!("reading {}", spec.spec))?;
                wasep::rates::RateSpec::parse_toml(&text)?
            } else {
                spec.load()?
            };
            let report = validate_rate_spec(&spec);
            println!("{report}");
            let einstein = einstein_check(&spec, &density_grid(101));
            println!(
                "Einstein relation: max |sigma/chi - D| = {:.3e}, max off-diagonal = {:.3e}",
                einstein.max_deviation, einstein.max_off_diagonal
            );
            if !report.passed() || !einstein.passed() {
                bail!("spec {} is not a valid gradient spec", spec.name);
            }
        }
        Command::Rates { command: RatesCommand::Export { spec } } => {
            print!("{}", spec.load()?.to_toml()?);
        }
        Command::Coeffs { spec, alpha0 } => {
            let spec = spec.load()?;
            println!("# critical roots per direction: {:?}", critical_roots(&spec));
            let tc = match alpha0 {
                Some(a) => TransportCoefficients::at(&spec, a),
                None => TransportCoefficients::at_critical(&spec)?,
            };
            print!("{}", toml::to_string(&tc)?);
        }
        Command::Adjoint { command: AdjointCommand::Check { spec, n, rule, amplitude } } => {
            let spec = spec.load()?;
            let torus = Torus::new(spec.dim(), n)?;
            let plan = ScalingPlan::from_rule(spec.dim(), n, rule)?;
            let profile =
                DensityProfile::from_fn(torus, |t| 0.5 + amplitude * (std::f64::consts::TAU * t[0]).cos())?;
            let mut worst: f64 = 0.0;
            for parts in [Parts::Symmetric, Parts::Asymmetric, Parts::Both] {
                let gap = oracle_gap(&spec, &profile, &plan, parts)?;
                println!("{parts:?}: max deviation {gap:.3e}");
                worst = worst.max(gap);
            }
            if worst > 1e-10 {
                bail!("formula and matrix adjoints differ by {worst:.3e}");
            }
        }
        Command::Adjoint { command: AdjointCommand::Residual { spec, ns, times, rule, initial, mesh, out } } => {
            let spec = spec.load()?;
            let reports = residual_study(&spec, rule, &initial, &ns, &times, mesh)?;
            let mut w = csv::Writer::from_writer(sink(&out)?);
            w.write_record(["n", "t", "max_residual", "bound"])?;
            for r in reports {
                w.write_record([r.n.to_string(), r.t.to_string(), r.max_residual.to_string(), r.bound.to_string()])?;
            }
            w.flush()?;
        }
        Command::Pde { command: PdeCommand::Solve { spec, initial, times, mesh, dt, semidiscrete, out } } => {
            let spec = spec.load()?;
            let tc = TransportCoefficients::at_critical(&spec)?;
            let torus = Torus::new(spec.dim(), mesh)?;
            let fields: Vec<(f64, Vec<f64>)> = match semidiscrete {
                None => {
                    let coeffs = BurgersCoefficients::from_transport(&tc);
                    burgers_solve(&ContinuumField::from_initial(torus, &initial), &coeffs, &times, dt)?
                        .into_iter()
                        .map(|f| (f.t, f.values))
                        .collect()
                }
                Some(rule) => {
                    let plan = ScalingPlan::from_rule(spec.dim(), mesh, rule)?;
                    SemidiscreteFlow::new(&spec, &torus, tc.alpha0, &plan)?
                        .solve(&initial.sample(&torus), &times, dt)?
                        .into_iter()
                        .map(|f| (f.t, f.values))
                        .collect()
                }
            };
            write_trajectory_csv(sink(&out)?, fields.iter().map(|(t, v)| (*t, v.as_slice())))?;
        }
        Command::Exact { command: ExactCommand::Check { spec, n, rule } } => {
            let spec = spec.load()?;
            let plan = ScalingPlan::from_rule(spec.dim(), n, rule)?;
            let checks = exact_checks(&spec, n, &plan)?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                bail!("oracle battery failed");
            }
        }
        Command::Simulate(args) => {
            let spec = args.spec.load()?;
            let plan = ScalingPlan::from_rule(spec.dim(), args.n, args.rule)?;
            let report = scaling_check(&plan, 1.0);
            if !report.passed() {
                log::warn!(
                    "scaling check fails at n = {} (lower margin {:.3}, upper margin {:.3})",
                    args.n,
                    report.lower_margin,
                    report.upper_margin
                );
            }
            let alpha0 = match args.alpha0 {
                Some(a) => a,
                None => wasep::rates::find_alpha0(&spec)?,
            };
            let torus = Torus::new(spec.dim(), args.n)?;
            let start = DensityProfile::perturbed(torus, alpha0, plan.eps, args.initial.sample(&torus))?;
            let ensemble = run_ensemble(&spec, &plan, &args.times, args.replicas, args.seed, |rng| {
                sample_product_with(&start, rng)
            })?;
            log::info!("{} events", ensemble.events);
            if args.mean {
                ensemble.write_mean_csv(sink(&args.out)?)?;
            } else {
                ensemble.write_csv(sink(&args.out)?)?;
            }
        }
        Command::Experiment { command: ExperimentCommand::Run { config } } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let result = run_experiment(&cfg)?;
            print!("{}", format_report(&result.rows, 3.0));
            println!("outputs in {}", cfg.run_dir().display());
        }
        Command::Experiment { command: ExperimentCommand::Report { run_dir, bands } } => {
            if run_dir.join("FAILED").exists() {
                bail!("run failed: {}", std::fs::read_to_string(run_dir.join("FAILED"))?.trim());
            }
            let rows = read_defect_csv(&run_dir.join("defect.csv"))?;
            print!("{}", format_report(&rows, bands));
            let outside = rows.iter().filter(|r| !r.within(bands)).count();
            println!("{} of {} rows within {bands} standard errors", rows.len() - outside, rows.len());
        }
    }
    Ok(())
}
