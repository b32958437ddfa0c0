//! Config-driven experiments writing CSV data and a JSON report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::predicted_strain_tail;
use crate::blayer::{
    default_decay_window, default_offset_window, default_truncation, extract_decay_constant, extract_p1,
    predictor_positions, solve_bl,
};
use crate::energetics::{decaying_strain_energies, illposedness_demo, stress_gap_l2};
use crate::equilibrium::{discrete_density, solve_finite, SolverOptions};
use crate::error::{parameter, Error, Result};
use crate::harness::fit::{fit_rate, RateModel};
use crate::harness::io::{boundary_layer_table, configuration_table, fmt_f64, Table};
use crate::harness::sweep::{fit_probes, incremental_error, slope_spread, SweepPlan, DEFAULT_PROBES};
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Incremental error `d^n(i)` over a sweep of `n`.
    FiniteSweep,
    /// Truncated boundary-layer solve with decay and offset fits.
    BoundaryLayer,
    /// `||sigma_inf - sigma_n||` against `n`.
    StressConvergence,
    /// Limit energies of slowly decaying strains.
    IllPosedness,
    /// Minimisers next to the boundary-layer predictor, one file per `n`.
    MinimiserProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_probes: Option<Vec<usize>>,
    #[serde(rename = "I", default, skip_serializing_if = "Option::is_none")]
    pub free: Option<usize>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let needs_n = !matches!(self.experiment, ExperimentKind::BoundaryLayer);
        if needs_n && self.n_values.is_empty() {
            return Err(Error::Parse("n_values is empty".into()));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse("n_values must be strictly increasing".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Parse("tol must be positive".into()));
            }
        }
        Ok(())
    }

    fn solver(&self) -> SolverOptions {
        self.tol.map_or_else(SolverOptions::default, SolverOptions::with_tol)
    }

    fn truncation(&self) -> (usize, usize) {
        let (i, j) = default_truncation(&self.potential);
        let free = self.free.unwrap_or(i);
        (free, self.trunc.unwrap_or(if self.free.is_some() { free + free / 10 + 1 } else { j }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub results: Value,
    pub checks: Vec<CheckResult>,
    pub files: Vec<PathBuf>,
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the experiment, writes its CSV files and `report.json` under
/// `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut files = Vec::new();
    let (results, checks) = match cfg.experiment {
        ExperimentKind::FiniteSweep => finite_sweep(cfg, &mut files)?,
        ExperimentKind::BoundaryLayer => boundary_layer(cfg, &mut files)?,
        ExperimentKind::StressConvergence => stress_convergence(cfg, &mut files)?,
        ExperimentKind::IllPosedness => ill_posedness(cfg, &mut files)?,
        ExperimentKind::MinimiserProfile => minimiser_profile(cfg, &mut files)?,
    };
    let report = ExperimentReport {
        config: cfg.clone(),
        results,
        checks,
        files,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    let path = cfg.out_dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

pub fn run_experiment_path(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    run_experiment(&ExperimentConfig::load(path)?)
}

type Outcome = (Value, Vec<CheckResult>);

fn write(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>, name: &str, t: &Table) -> Result<()> {
    let path = cfg.out_dir.join(name);
    t.write_path(&path)?;
    files.push(path);
    Ok(())
}

/// `n^-1 log n` at `a = 2`, a plain power otherwise.
pub fn natural_rate_model(p: &PotentialSpec) -> RateModel {
    if p.is_power_law() && p.decay_exponent() == 2.0 {
        RateModel::PowerTimesLog
    } else {
        RateModel::PurePower
    }
}

fn finite_sweep(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<Outcome> {
    let top = cfg.n_values.last().copied().unwrap_or(0).div_ceil(2);
    let probes = cfg.i_probes.clone().unwrap_or_else(|| DEFAULT_PROBES.iter().copied().filter(|&i| i <= top).collect());
    let plan = SweepPlan::new(cfg.potential, cfg.n_values.clone(), probes.clone(), cfg.solver())?;
    let table = incremental_error(&plan)?;

    let mut t = Table::new(&["n", "i", "dn"]);
    for r in &table.rows {
        t.push(vec![r.n.to_string(), r.i.to_string(), fmt_f64(r.dn)]);
    }
    write(cfg, files, "incremental_error.csv", &t)?;
    let mut s = Table::new(&["n", "iterations", "residual_norm", "reversal_error", "sum_error"]);
    for r in &table.solves {
        s.push(vec![
            r.n.to_string(),
            r.iterations.to_string(),
            fmt_f64(r.residual_norm),
            fmt_f64(r.reversal_error),
            fmt_f64(r.sum_error),
        ]);
    }
    write(cfg, files, "solves.csv", &s)?;

    let pure = fit_probes(&table, &probes, RateModel::PurePower)?;
    let logged = fit_probes(&table, &probes, RateModel::PowerTimesLog)?;
    let model = natural_rate_model(&cfg.potential);
    let chosen = if model == RateModel::PurePower { &pure } else { &logged };
    let spread = slope_spread(chosen);
    let mut checks: Vec<CheckResult> = chosen
        .iter()
        .map(|f| {
            CheckResult::new(
                &format!("slope_i{}", f.i),
                (-1.15..=-0.85).contains(&f.fit.slope) && f.fit.r2 >= 0.98,
                format!("{:?} slope {:.4}, r2 {:.5}", model, f.fit.slope, f.fit.r2),
            )
        })
        .collect();
    checks.push(CheckResult::new("probe_agreement", spread <= 0.1, format!("slope spread {spread:.4}")));
    let results = json!({
        "model": model,
        "fits_pure_power": pure,
        "fits_power_times_log": logged,
        "slope_spread": spread,
        "solves": table.solves,
    });
    Ok((results, checks))
}

fn boundary_layer(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<Outcome> {
    let p = &cfg.potential;
    let (free, trunc) = cfg.truncation();
    let (sol, rep) = solve_bl(p, free, trunc, &cfg.solver())?;
    write(cfg, files, "boundary_layer.csv", &boundary_layer_table(&sol))?;

    let window = default_decay_window(free);
    let offset = extract_p1(&sol, default_offset_window(free))?;
    let mut checks = vec![CheckResult::new(
        "residual",
        rep.residual_norm <= cfg.solver().residual_tol,
        format!("{:.3e} after {} iterations", rep.residual_norm, rep.iterations),
    )];
    let decay = if p.is_power_law() {
        let a = p.decay_exponent();
        let fit = extract_decay_constant(&sol, window.clone())?;
        let predicted_c = -predicted_strain_tail(p, 1)?;
        let rel = (fit.c - predicted_c).abs() / predicted_c;
        checks.push(CheckResult::new(
            "decay_exponent",
            (fit.q - (a - 1.0)).abs() <= 0.1 * (a - 1.0),
            format!("q {:.4}, predicted {}", fit.q, a - 1.0),
        ));
        checks.push(CheckResult::new(
            "decay_constant",
            rel <= 0.15,
            format!("C {:.6}, predicted {:.6} ({:.1}% off)", fit.c, predicted_c, 100.0 * rel),
        ));
        json!({ "window": [window.start(), window.end()], "fit": fit, "predicted_c": predicted_c })
    } else {
        Value::Null
    };
    let results = json!({
        "I": free,
        "J": trunc,
        "iterations": rep.iterations,
        "residual_norm": rep.residual_norm,
        "residual_history": rep.residual_history,
        "decay": decay,
        "offset_estimate": offset,
        "eps_l_1": sol.strains()[0],
    });
    Ok((results, checks))
}

fn stress_convergence(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<Outcome> {
    let p = &cfg.potential;
    if !p.is_power_law() {
        return Err(parameter("stress convergence rates are defined for power laws only"));
    }
    let mut t = Table::new(&["n", "l2_gap"]);
    let mut pts = Vec::new();
    for &n in &cfg.n_values {
        let g = stress_gap_l2(p, n)?;
        t.push(vec![n.to_string(), fmt_f64(g)]);
        pts.push((n as f64, g));
    }
    write(cfg, files, "stress_gap.csv", &t)?;
    let fit = fit_rate(&pts, RateModel::PurePower)?;
    let theory = -(p.decay_exponent() - 1.5);
    let checks = vec![CheckResult::new(
        "slope",
        (fit.slope - theory).abs() <= 0.1,
        format!("slope {:.4}, theory {theory}", fit.slope),
    )];
    Ok((json!({ "fit": fit, "theory_slope": theory }), checks))
}

const DEMO_B: f64 = 0.6;

fn ill_posedness(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<Outcome> {
    let p = &cfg.potential;
    let a = p.decay_exponent();
    let unbounded = p.is_power_law() && a < 1.5;
    let values = if unbounded {
        illposedness_demo(p, DEMO_B, &cfg.n_values)?
    } else {
        decaying_strain_energies(p, DEMO_B, &cfg.n_values)?
    };
    let mut t = Table::new(&["N", "energy"]);
    for (n, v) in cfg.n_values.iter().zip(&values) {
        t.push(vec![n.to_string(), fmt_f64(*v)]);
    }
    write(cfg, files, "energies.csv", &t)?;
    let check = if unbounded {
        let ok = values.windows(2).all(|w| w[1] < w[0]);
        CheckResult::new("strictly_decreasing", ok, format!("{values:?}"))
    } else {
        let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let ok = steps.windows(2).all(|w| w[1] < w[0]);
        CheckResult::new("settling", ok, format!("{values:?}"))
    };
    Ok((json!({ "b": DEMO_B, "energies": values }), vec![check]))
}

fn minimiser_profile(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<Outcome> {
    let p = &cfg.potential;
    let nmax = *cfg.n_values.last().expect("validated");
    let (free, trunc) = cfg.truncation();
    let free = free.max(nmax / 2);
    let trunc = trunc.max(free + 1);
    let (sol, _) = solve_bl(p, free, trunc, &cfg.solver())?;
    let mut gaps = Vec::new();
    for &n in &cfg.n_values {
        let (c, rep) = solve_finite(p, n, &cfg.solver())?;
        let pred = predictor_positions(&sol, n)?;
        let rho = discrete_density(&c)?;
        let rho_hat = discrete_density(&pred.configuration)?;
        let mut t = configuration_table(&c);
        t.header.extend(["x_pred".to_string(), "rho_pred".to_string()]);
        for (i, row) in t.rows.iter_mut().enumerate() {
            row.push(fmt_f64(pred.configuration.position(i)));
            row.push(if i >= 1 && i < n { fmt_f64(rho_hat[i - 1]) } else { String::new() });
        }
        write(cfg, files, &format!("profile_n{n}.csv"), &t)?;
        let gap = rho.iter().zip(&rho_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gaps.push(json!({
            "n": n,
            "density_gap": gap,
            "midpoint_correction": pred.midpoint_correction,
            "iterations": rep.iterations,
            "residual_norm": rep.residual_norm,
        }));
    }
    let series: Vec<f64> = gaps.iter().map(|g| g["density_gap"].as_f64().unwrap_or(f64::NAN)).collect();
    let ok = series.windows(2).all(|w| w[1] < w[0]);
    let checks = vec![CheckResult::new("density_gap_shrinks", ok, format!("{series:?}"))];
    Ok((json!({ "I": free, "J": trunc, "per_n": gaps }), checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"finite-sweep","potential":"powerlaw:a=2","n_values":[8,16],"out_dir":"x"}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::FiniteSweep);
        assert!(cfg.potential.is_power_law());
        let bad = [
            r#"{"experiment":"finite-sweep","potential":"powerlaw:a=2","n_values":[],"out_dir":"x"}"#,
            r#"{"experiment":"nope","potential":"wall","n_values":[8],"out_dir":"x"}"#,
            r#"{"experiment":"finite-sweep","potential":"powerlaw:a=0.5","n_values":[8],"out_dir":"x"}"#,
            r#"{"experiment":"finite-sweep","potential":"wall","n_values":[8],"out_dir":"x","extra":1}"#,
            "not json",
        ];
        for b in bad {
            assert!(matches!(ExperimentConfig::from_json(b), Err(Error::Parse(_))), "{b}");
        }
    }

    #[test]
    fn truncation_defaults() {
        let mut cfg =
            ExperimentConfig::from_json(r#"{"experiment":"boundary-layer","potential":"wall","out_dir":"x"}"#).unwrap();
        assert_eq!(cfg.truncation(), (200, 220));
        cfg.free = Some(50);
        assert_eq!(cfg.truncation(), (50, 56));
    }

    #[test]
    fn small_sweep_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::FiniteSweep,
            potential: PotentialSpec::wall(),
            n_values: vec![16, 32, 64],
            i_probes: Some(vec![1, 3]),
            free: None,
            trunc: None,
            tol: None,
            out_dir: dir.path().to_path_buf(),
        };
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.files.len(), 2);
        assert!(dir.path().join("report.json").exists());
        let csv = std::fs::read_to_string(dir.path().join("incremental_error.csv")).unwrap();
        assert!(csv.starts_with("n,i,dn\n16,1,"));
    }
}
