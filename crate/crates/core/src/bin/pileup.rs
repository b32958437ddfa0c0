use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pileup::asymptotics::{
    bulk_profile, interaction_second_moment, predicted_strain_tail, zeta, BulkProfileParams, Regime,
};
use pileup::blayer::solve_bl;
use pileup::energetics::{renorm_energy, renorm_energy_split, sigma_inf, sigma_n};
use pileup::equilibrium::{solve_finite, HessianMode, SolverOptions};
use pileup::harness::acceptance::{Acceptance, CRITERIA};
use pileup::harness::experiment::{natural_rate_model, run_experiment_path};
use pileup::harness::fit::RateModel;
use pileup::harness::io::{boundary_layer_table, configuration_table, fmt_f64, read_strain_path, stress_table, Table};
use pileup::harness::sweep::{fit_probes, incremental_error, slope_spread, SweepPlan, DEFAULT_PROBES};
use pileup::{Error, PotentialSpec};

const EXIT_PARSE: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "pileup", version, about = "Equilibria and boundary layers of repulsive particle pile-ups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimise the finite energy for n + 1 particles on [0, 1].
    SolveFinite {
        #[arg(long)]
        potential: PotentialSpec,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tol: Option<f64>,
        /// auto, dense, or banded:<half-bandwidth>
        #[arg(long, default_value = "auto", value_parser = parse_hessian)]
        hessian: HessianMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the truncated boundary-layer system.
    SolveBl {
        #[arg(long)]
        potential: PotentialSpec,
        #[arg(long = "I")]
        free: usize,
        #[arg(long = "J")]
        trunc: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary stress sigma_n or sigma_inf.
    Stress {
        #[arg(long)]
        potential: PotentialSpec,
        /// Integer n, or `inf`.
        #[arg(long)]
        n: String,
        #[arg(long)]
        imax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renormalised energy of a strain field and its splitting.
    Energy {
        #[arg(long)]
        potential: PotentialSpec,
        /// CSV with an `eps` column (or strains in the last column).
        #[arg(long)]
        strain: PathBuf,
    },
    /// Closed-form predictions.
    Predict {
        #[arg(long)]
        potential: PotentialSpec,
        #[arg(long, value_enum)]
        what: Quantity,
        /// Bulk coordinate for `bulk`.
        #[arg(long)]
        s: Option<f64>,
        /// System size for `bulk`.
        #[arg(long)]
        n: Option<usize>,
        /// Particle index for `strain-tail`.
        #[arg(long)]
        i: Option<usize>,
        /// Offset constant for `bulk` at a >= 2.
        #[arg(long, default_value_t = 0.0)]
        p_tilde: f64,
        /// Comma-separated offsets p_1, p_2, ... for `bulk` at a > 2.
        #[arg(long, value_delimiter = ',')]
        p_k: Vec<f64>,
    },
    /// Incremental error over a sweep of n, with rate fits.
    Sweep {
        #[arg(long)]
        potential: PotentialSpec,
        #[arg(long, value_delimiter = ',', required = true)]
        n_values: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        probes: Vec<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance suite.
    Check {
        /// Only these criteria (comma-separated numbers).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Run an experiment described by a JSON config.
    #[command(alias = "experiment")]
    Run {
        config: PathBuf,
        /// Exit with status 3 if any of the experiment's checks fails.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Zeta,
    #[value(name = "Z")]
    Z,
    Bulk,
    StrainTail,
}

fn parse_hessian(s: &str) -> Result<HessianMode, String> {
    match s {
        "auto" => Ok(HessianMode::Auto),
        "dense" => Ok(HessianMode::Dense),
        _ => s
            .strip_prefix("banded:")
            .and_then(|m| m.parse().ok())
            .map(HessianMode::Banded)
            .ok_or_else(|| format!("expected auto, dense or banded:<m>, got `{s}`")),
    }
}

fn options(tol: Option<f64>) -> SolverOptions {
    tol.map_or_else(SolverOptions::default, SolverOptions::with_tol)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_PARSE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::NonConvergence { .. } => ExitCode::from(EXIT_NONCONVERGENCE),
                _ => ExitCode::from(EXIT_PARSE),
            }
        }
    }
}

fn run(cmd: Command) -> pileup::Result<u8> {
    match cmd {
        Command::SolveFinite { potential, n, tol, hessian, out } => {
            let opts = SolverOptions { hessian, ..options(tol) };
            let (c, rep) = solve_finite(&potential, n, &opts)?;
            configuration_table(&c).write_path(&out)?;
            println!(
                "n = {n}: {} iterations, residual {:.3e}, {:.3} s",
                rep.iterations, rep.residual_norm, rep.elapsed_seconds
            );
        }
        Command::SolveBl { potential, free, trunc, tol, out } => {
            let (sol, rep) = solve_bl(&potential, free, trunc, &options(tol))?;
            boundary_layer_table(&sol).write_path(&out)?;
            println!(
                "I = {free}, J = {trunc}: {} iterations, residual {:.3e}, eps_l(1) = {}",
                rep.iterations,
                rep.residual_norm,
                fmt_f64(sol.strains()[0])
            );
        }
        Command::Stress { potential, n, imax, out } => {
            let s = if n.trim() == "inf" {
                sigma_inf(&potential, imax, 1e-13)?
            } else {
                let n: usize =
                    n.trim().parse().map_err(|_| Error::Parse(format!("--n must be an integer or inf, got `{n}`")))?;
                sigma_n(&potential, n)?
            };
            stress_table(&s, imax).write_path(&out)?;
        }
        Command::Energy { potential, strain } => {
            let e = read_strain_path(&strain)?;
            let split = renorm_energy_split(&potential, &e);
            println!("direct {}", fmt_f64(renorm_energy(&potential, &e)));
            println!("q_part {}", fmt_f64(split.q_part));
            println!("linear_part {}", fmt_f64(split.linear_part));
        }
        Command::Predict { potential, what, s, n, i, p_tilde, p_k } => {
            let value = match what {
                Quantity::Zeta => {
                    if !potential.is_power_law() {
                        return Err(Error::Parameter("zeta needs a power-law exponent".into()));
                    }
                    zeta(potential.decay_exponent())?
                }
                Quantity::Z => interaction_second_moment(&potential, 1e-13)?,
                Quantity::StrainTail => {
                    predicted_strain_tail(&potential, i.ok_or_else(|| Error::Parameter("--i is required".into()))?)?
                }
                Quantity::Bulk => {
                    if !potential.is_power_law() {
                        return Err(Error::Parameter("bulk profiles are defined for power laws".into()));
                    }
                    let a = potential.decay_exponent();
                    let params = match Regime::of(a)? {
                        Regime::Sub2 => BulkProfileParams::sub2(a)?,
                        Regime::Exactly2 => BulkProfileParams::exactly2(p_tilde),
                        Regime::Super2 => BulkProfileParams::super2(a, p_k, p_tilde)?,
                    };
                    let s = s.ok_or_else(|| Error::Parameter("--s is required".into()))?;
                    let n = n.ok_or_else(|| Error::Parameter("--n is required".into()))?;
                    bulk_profile(&params, s, n)?
                }
            };
            println!("{value:.14e}");
        }
        Command::Sweep { potential, n_values, probes, tol, out } => {
            let top = n_values.last().copied().unwrap_or(0).div_ceil(2);
            let probes =
                if probes.is_empty() { DEFAULT_PROBES.iter().copied().filter(|&i| i <= top).collect() } else { probes };
            let plan = SweepPlan::new(potential, n_values, probes.clone(), options(tol))?;
            let table = incremental_error(&plan)?;
            let mut t = Table::new(&["n", "i", "dn"]);
            for r in &table.rows {
                t.push(vec![r.n.to_string(), r.i.to_string(), fmt_f64(r.dn)]);
            }
            t.write_path(&out)?;
            let model = natural_rate_model(&potential);
            for m in [RateModel::PurePower, RateModel::PowerTimesLog] {
                match fit_probes(&table, &probes, m) {
                    Ok(fits) => {
                        for f in &fits {
                            println!("{m:?} i = {}: slope {:.4}, r2 {:.5}", f.i, f.fit.slope, f.fit.r2);
                        }
                        if m == model {
                            println!("{m:?} slope spread {:.4}", slope_spread(&fits));
                        }
                    }
                    Err(e) => println!("{m:?}: {e}"),
                }
            }
        }
        Command::Check { only } => {
            let ids: Vec<u8> = if only.is_empty() { (1..=CRITERIA).collect() } else { only };
            let suite = Acceptance::new();
            let mut failed = 0;
            for id in ids {
                let o = suite.criterion(id)?;
                println!("{o}");
                failed += usize::from(!o.passed);
            }
            if failed > 0 {
                return Ok(EXIT_CHECK);
            }
        }
        Command::Run { config, check } => {
            let rep = run_experiment_path(&config)?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
            if check && !rep.all_checks_pass() {
                return Ok(EXIT_CHECK);
            }
        }
    }
    Ok(0)
}
