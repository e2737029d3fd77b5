//! Command-line front end: parses a TOML run configuration, dispatches one
//! subcommand, and persists CSV/JSON artifacts, with `manifest.json` written
//! last as the completed-run marker.
//!
//! Exit codes: 0 success, 2 domain outcome (no transition where one is
//! required, failed verify checks), 64 configuration or usage errors,
//! 70 internal numeric failures (including non-converged solves).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use bcs::analysis::{
    eigenvalue_curves, rotation_test, scaling_fit, weak_coupling_sector, PolarFunction, PolarGrid,
};
use bcs::config::{LoadedConfig, RunConfig};
use bcs::gap::{construct_state, gap_value_at, solve_gap, SolverOptions};
use bcs::output::{csv_document, fmt_f64, ArtifactWriter, RunMeta};
use bcs::potentials::{assemble_even_sectors, PotentialSpec, SectorKernel};
use bcs::spectral::{
    critical_report_for_kernels, lowest_eigenvalue, positivity_check, CriticalReport,
    DispersionParams,
};
use bcs::{BcsError, Result};

#[derive(Parser)]
#[command(name = "bcs", version, about = "BCS gap equation solver for radial pair interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's [output] block).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Rayon thread count; never changes emitted bytes.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Seed echoed into the manifest; only randomized harnesses consume it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical temperature per angular-momentum sector.
    Tc { config: PathBuf },
    /// Lowest-eigenvalue curves over the configured temperature mesh.
    Curves { config: PathBuf },
    /// Gap profile and Euler-Lagrange state at one temperature.
    Gap { config: PathBuf },
    /// Square-root scaling fit of the gap branch below the transition.
    Sweep { config: PathBuf },
    /// Invariant suite with a pass/fail report.
    Verify { config: PathBuf },
    /// Weak-coupling sector prediction from the Fermi-circle diagonal.
    Weakcoupling { config: PathBuf },
    /// Rotation sweep of the superfluid quadratic form on a polar grid.
    Rotationtest { config: PathBuf },
}

impl Command {
    fn parts(&self) -> (&'static str, &PathBuf) {
        match self {
            Command::Tc { config } => ("tc", config),
            Command::Curves { config } => ("curves", config),
            Command::Gap { config } => ("gap", config),
            Command::Sweep { config } => ("sweep", config),
            Command::Verify { config } => ("verify", config),
            Command::Weakcoupling { config } => ("weakcoupling", config),
            Command::Rotationtest { config } => ("rotationtest", config),
        }
    }
}

/// A command body always writes whatever artifacts it produced; a soft
/// failure still gets its manifest before the exit code is set.
enum Outcome {
    Success,
    SoftFailure(BcsError),
}

fn exit_code(err: &BcsError) -> u8 {
    match err {
        BcsError::Config(_) | BcsError::InvalidInput(_) => 64,
        BcsError::Domain(_) | BcsError::NoTransition { .. } => 2,
        _ => 70,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 for usage errors; remap to the config-error code,
            // keeping 0 for --help and --version.
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BcsError::Numeric(format!("thread pool: {e}")))?;
    }
    let (name, config_path) = cli.command.parts();
    let loaded = RunConfig::load(config_path)?;
    if let Some(expected) = &loaded.config.command {
        if expected != name {
            return Err(BcsError::Config(format!(
                "config is marked for command `{expected}`, invoked as `{name}`"
            )));
        }
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| loaded.config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut writer = ArtifactWriter::create(&out_dir)?;

    let outcome = match &cli.command {
        Command::Tc { .. } => cmd_tc(&loaded, &mut writer)?,
        Command::Curves { .. } => cmd_curves(&loaded, &mut writer)?,
        Command::Gap { .. } => cmd_gap(&loaded, &mut writer)?,
        Command::Sweep { .. } => cmd_sweep(&loaded, &mut writer)?,
        Command::Verify { .. } => cmd_verify(&loaded, &mut writer)?,
        Command::Weakcoupling { .. } => cmd_weakcoupling(&loaded, &mut writer)?,
        Command::Rotationtest { .. } => cmd_rotationtest(&loaded, &mut writer)?,
    };

    let meta = RunMeta {
        command: name.to_string(),
        config_text: loaded.text.clone(),
        config: serde_json::to_value(&loaded.config)
            .map_err(|e| BcsError::Numeric(format!("config echo: {e}")))?,
        seed: cli.seed,
        threads: cli.threads,
    };
    writer.finish(meta)?;
    match outcome {
        Outcome::Success => Ok(()),
        Outcome::SoftFailure(err) => Err(err),
    }
}

/// Kernels and the critical report for the configured run.
fn assemble(
    loaded: &LoadedConfig,
) -> Result<(PotentialSpec, Vec<SectorKernel>, CriticalReport)> {
    let cfg = &loaded.config;
    let spec = loaded.potential_spec()?;
    let grid = loaded.build_grid(&spec)?;
    let kernels = assemble_even_sectors(&spec, &grid, cfg.sectors.ell_max)?;
    let report = critical_report_for_kernels(&kernels, cfg.mu)?;
    Ok((spec, kernels, report))
}

/// The sector kernel the gap-profile commands act on: the configured
/// override, else the dominant sector, else the radial sector.
fn select_kernel<'k>(
    kernels: &'k [SectorKernel],
    choice: Option<i32>,
    report: &CriticalReport,
) -> Result<&'k SectorKernel> {
    let ell = choice.or(report.ell0).unwrap_or(0);
    kernels
        .iter()
        .find(|k| k.ell == ell)
        .ok_or_else(|| BcsError::Config(format!("sector {ell} is not assembled for this run")))
}

fn cmd_tc(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let (_, _, report) = assemble(loaded)?;
    let rows = report
        .tc_by_sector
        .iter()
        .map(|(ell, tc)| format!("{ell},{}", fmt_f64(*tc)));
    w.write_text("tc_by_sector.csv", &csv_document("ell,tc_ell", rows))?;
    w.write_json("tc_report.json", &report)?;
    Ok(Outcome::Success)
}

fn cmd_curves(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let cfg = &loaded.config;
    let mesh = cfg.temperature_spec()?.mesh()?;
    let spec = loaded.potential_spec()?;
    let grid = loaded.build_grid(&spec)?;
    let set = eigenvalue_curves(&spec, &grid, cfg.mu, cfg.sectors.ell_max, &mesh)?;

    let mut rows = Vec::with_capacity(set.temperatures.len() * set.tracks.len());
    for (ti, t) in set.temperatures.iter().enumerate() {
        for track in &set.tracks {
            rows.push(format!(
                "{},{},{},{}",
                fmt_f64(*t),
                track.ell,
                track.index,
                fmt_f64(track.values[ti])
            ));
        }
    }
    w.write_text("curves.csv", &csv_document("T,ell,index,eigenvalue", rows))?;

    let crossing_rows = set
        .crossings
        .iter()
        .map(|c| format!("{},{},{}", fmt_f64(c.temperature), c.ell, c.index));
    w.write_text("crossings.csv", &csv_document("T,ell,index", crossing_rows))?;
    Ok(Outcome::Success)
}

fn cmd_gap(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let cfg = &loaded.config;
    let t = cfg.temperature_spec()?.single()?;
    let (_, kernels, report) = assemble(loaded)?;
    let kernel = select_kernel(&kernels, cfg.gap.ell, &report)?;
    let params = DispersionParams::new(cfg.mu, t)?;
    let gap = solve_gap(kernel, &params, None, &cfg.solver_options())?;
    let state = construct_state(&gap, &params)?;

    let name = format!("gap_T{t}_l{}.csv", kernel.ell);
    let stem = name.trim_end_matches(".csv").to_string();
    w.record_convergence(&stem, gap.converged);
    let rows = kernel.grid.nodes.iter().enumerate().map(|(i, p)| {
        format!(
            "{},{},{},{}",
            fmt_f64(*p),
            fmt_f64(gap.values.values[i]),
            fmt_f64(state.gamma.values[i]),
            fmt_f64(state.sigma.values[i])
        )
    });
    w.write_text(&name, &csv_document("p,delta,gamma,sigma", rows))?;

    if !gap.converged {
        return Ok(Outcome::SoftFailure(BcsError::Numeric(format!(
            "gap solve did not converge: residual {} after {} iterations",
            gap.residual, gap.iterations
        ))));
    }
    Ok(Outcome::Success)
}

fn cmd_sweep(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let cfg = &loaded.config;
    let (spec, kernels, report) = assemble(loaded)?;
    let kernel = select_kernel(&kernels, cfg.sweep.ell, &report)?;
    let params = DispersionParams::new(cfg.mu, 1.0)?;
    let fit = scaling_fit(
        &spec,
        kernel,
        &params,
        cfg.sweep.k_min..=cfg.sweep.k_max,
        &cfg.solver_options(),
    )?;

    let rows = fit.points.iter().map(|pt| {
        format!(
            "{},{},{},{}",
            pt.k,
            fmt_f64(pt.temperature),
            fmt_f64(pt.gap_sup),
            fmt_f64(pt.pair_l2)
        )
    });
    w.write_text(
        "scaling_points.csv",
        &csv_document("k,T,gap_sup,pair_l2", rows),
    )?;
    w.write_json("scaling_fit.json", &fit)?;
    w.record_convergence("scaling_fit", true);
    Ok(Outcome::Success)
}

fn cmd_weakcoupling(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let cfg = &loaded.config;
    let spec = loaded.potential_spec()?;
    let report = weak_coupling_sector(
        &spec,
        cfg.mu,
        cfg.weak_coupling.lambda_scale,
        cfg.sectors.ell_max,
    )?;
    let rows = report
        .fermi_diagonal
        .iter()
        .map(|(ell, v)| format!("{ell},{}", fmt_f64(*v)));
    w.write_text("fermi_diagonal.csv", &csv_document("ell,value", rows))?;
    w.write_json("weakcoupling_report.json", &report)?;
    Ok(Outcome::Success)
}

fn cmd_rotationtest(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let cfg = &loaded.config;
    if cfg.dimension != 2 {
        return Err(BcsError::Config(
            "rotationtest requires dimension = 2".into(),
        ));
    }
    let t = cfg.temperature_spec()?.single()?;
    let (spec, kernels, report) = assemble(loaded)?;
    let kernel = select_kernel(&kernels, cfg.gap.ell, &report)?;
    let params = DispersionParams::new(cfg.mu, t)?;
    let gap = solve_gap(kernel, &params, None, &cfg.solver_options())?;
    w.record_convergence("gap", gap.converged);

    // Embed the sector profile as delta(p) cos(l phi); radial values off
    // the production grid come from Nystrom interpolation.
    let pgrid = PolarGrid::new(
        kernel.grid.p_max,
        cfg.rotation.n_radial,
        cfg.rotation.n_angles,
    )?;
    let radial: Vec<f64> = pgrid
        .radial_nodes
        .iter()
        .map(|&p| gap_value_at(&spec, kernel, &params, &gap, p))
        .collect::<Result<_>>()?;
    let angles = pgrid.angles();
    let mut values = Vec::with_capacity(pgrid.len());
    for r in &radial {
        for phi in &angles {
            values.push(r * (kernel.ell as f64 * phi).cos());
        }
    }
    let delta = PolarFunction::new(&pgrid, values)?;
    let rotation = rotation_test(&delta, &params, &spec)?;

    let rows = rotation.angles.iter().enumerate().map(|(j, a)| {
        format!(
            "{},{},{}",
            fmt_f64(*a),
            fmt_f64(rotation.form_values[j]),
            fmt_f64(rotation.kt_form_values[j])
        )
    });
    w.write_text(
        "rotation_sweep.csv",
        &csv_document("angle,total_form,kt_form", rows),
    )?;
    w.write_json("rotation_report.json", &rotation)?;

    if !gap.converged {
        return Ok(Outcome::SoftFailure(BcsError::Numeric(format!(
            "gap solve behind the rotation test did not converge: residual {}",
            gap.residual
        ))));
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct VerifyCheck {
    name: String,
    passed: bool,
    /// True when the check ran in a regime where failure is the documented
    /// expectation (temperatures below the second crossing); an expected
    /// failure counts as a pass.
    expected_fail: bool,
    details: String,
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<VerifyCheck>,
}

fn cmd_verify(loaded: &LoadedConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let cfg = &loaded.config;
    let opts = cfg.solver_options();
    let (spec, kernels, report) = assemble(loaded)?;
    let mut checks = Vec::new();

    positivity_checks(cfg, &spec, &kernels, &report, &opts, &mut checks)?;
    scaling_check(cfg, &spec, &kernels, &report, &opts, &mut checks)?;
    weak_coupling_check(cfg, &spec, &report, &mut checks)?;
    admissibility_check(cfg, &kernels, &report, &opts, &mut checks)?;
    monotonicity_check(cfg, &kernels, &report, &mut checks)?;

    let passed = checks.iter().all(|c| c.passed);
    let failed = checks.iter().filter(|c| !c.passed).count();
    let total = checks.len();
    w.write_json("verify_report.json", &VerifyReport { passed, checks })?;
    if passed {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::SoftFailure(BcsError::Domain(format!(
            "verify: {failed} of {total} checks failed"
        ))))
    }
}

/// Positivity of `K_T^Delta + V` across sectors: five window samples
/// between the second crossing and the transition, plus every configured
/// temperature. Below the second crossing a negative direction is the
/// documented expectation, recorded as such.
fn positivity_checks(
    cfg: &RunConfig,
    spec: &PotentialSpec,
    kernels: &[SectorKernel],
    report: &CriticalReport,
    opts: &SolverOptions,
    checks: &mut Vec<VerifyCheck>,
) -> Result<()> {
    if report.tc <= 0.0 || report.ell0.is_none() {
        checks.push(VerifyCheck {
            name: "positivity_window".into(),
            passed: true,
            expected_fail: false,
            details: "no transition; nothing to scan".into(),
        });
        return Ok(());
    }
    let kernel = select_kernel(kernels, None, report)?;
    let lower = report.t_tilde.unwrap_or(0.0).max(0.0);
    let mut scan: Vec<(String, f64, bool)> = (1..=5)
        .map(|j| {
            let t = lower + (report.tc - lower) * j as f64 / 6.0;
            (format!("positivity_window_{j}"), t, false)
        })
        .collect();
    if let Some(tspec) = &cfg.temperature {
        for t in tspec.mesh()? {
            let below_second_crossing = t < lower;
            scan.push((format!("positivity_config_T{t}"), t, below_second_crossing));
        }
    }
    for (name, t, expected_fail) in scan {
        let params = DispersionParams::new(cfg.mu, t)?;
        let gap = solve_gap(kernel, &params, None, opts)?;
        let pos = positivity_check(spec, kernels, &params, &gap.values)?;
        let worst = pos
            .per_sector
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .copied()
            .unwrap_or((kernel.ell, pos.min_eigenvalue));
        checks.push(VerifyCheck {
            name,
            passed: pos.pass || expected_fail,
            expected_fail,
            details: format!(
                "T = {t}: min eigenvalue {:.3e} in sector {} against threshold {:.3e}",
                pos.min_eigenvalue, worst.0, pos.threshold
            ),
        });
    }
    Ok(())
}

/// Square-root scaling of the gap branch: fitted exponent within
/// [0.4, 0.6] and r^2 at least 0.99 over the configured dyadic range.
fn scaling_check(
    cfg: &RunConfig,
    spec: &PotentialSpec,
    kernels: &[SectorKernel],
    report: &CriticalReport,
    opts: &SolverOptions,
    checks: &mut Vec<VerifyCheck>,
) -> Result<()> {
    if report.tc <= 0.0 {
        checks.push(VerifyCheck {
            name: "scaling_fit".into(),
            passed: true,
            expected_fail: false,
            details: "no transition; no branch to fit".into(),
        });
        return Ok(());
    }
    let kernel = select_kernel(kernels, cfg.sweep.ell, report)?;
    let params = DispersionParams::new(cfg.mu, 1.0)?;
    let fit = scaling_fit(
        spec,
        kernel,
        &params,
        cfg.sweep.k_min..=cfg.sweep.k_max,
        opts,
    )?;
    let passed = (0.4..=0.6).contains(&fit.slope) && fit.r_squared >= 0.99;
    checks.push(VerifyCheck {
        name: "scaling_fit".into(),
        passed,
        expected_fail: false,
        details: format!(
            "slope {} (want [0.4, 0.6]), r^2 {} (want >= 0.99), {} points, {} warnings",
            fit.slope,
            fit.r_squared,
            fit.points.len(),
            fit.warnings.len()
        ),
    });
    Ok(())
}

/// The weak-coupling prediction from the Fermi-circle diagonal against the
/// dominant sector of the full report.
fn weak_coupling_check(
    cfg: &RunConfig,
    spec: &PotentialSpec,
    report: &CriticalReport,
    checks: &mut Vec<VerifyCheck>,
) -> Result<()> {
    if cfg.mu <= 0.0 {
        checks.push(VerifyCheck {
            name: "weak_coupling".into(),
            passed: true,
            expected_fail: false,
            details: "mu <= 0: no Fermi circle, prediction undefined".into(),
        });
        return Ok(());
    }
    let wc = weak_coupling_sector(
        spec,
        cfg.mu,
        cfg.weak_coupling.lambda_scale,
        cfg.sectors.ell_max,
    )?;
    let (passed, details) = match report.ell0 {
        Some(ell0) => (
            wc.predicted == ell0,
            format!(
                "predicted sector {} vs dominant sector {ell0}{}",
                wc.predicted,
                if wc.tie_with.is_some() {
                    " (tied prediction)"
                } else {
                    ""
                }
            ),
        ),
        None => (
            true,
            format!(
                "predicted sector {}; no transition to compare against",
                wc.predicted
            ),
        ),
    };
    checks.push(VerifyCheck {
        name: "weak_coupling".into(),
        passed,
        expected_fail: false,
        details,
    });
    Ok(())
}

/// Admissibility of the Euler-Lagrange state at half the transition
/// temperature: occupation within [0, 1] and pairing within the Cauchy-
/// Schwarz bound, to rounding slack.
fn admissibility_check(
    cfg: &RunConfig,
    kernels: &[SectorKernel],
    report: &CriticalReport,
    opts: &SolverOptions,
    checks: &mut Vec<VerifyCheck>,
) -> Result<()> {
    if report.tc <= 0.0 {
        checks.push(VerifyCheck {
            name: "admissibility".into(),
            passed: true,
            expected_fail: false,
            details: "no transition; normal state is trivially admissible".into(),
        });
        return Ok(());
    }
    let kernel = select_kernel(kernels, None, report)?;
    let params = DispersionParams::new(cfg.mu, 0.5 * report.tc)?;
    let gap = solve_gap(kernel, &params, None, opts)?;
    let state = construct_state(&gap, &params)?;
    let mut gamma_excess = 0.0f64;
    let mut pairing_excess = 0.0f64;
    for i in 0..state.gamma.grid.len() {
        let g = state.gamma.values[i];
        let s = state.sigma.values[i];
        gamma_excess = gamma_excess.max(-g).max(g - 1.0);
        pairing_excess = pairing_excess.max(s * s - g * (1.0 - g));
    }
    let passed = gamma_excess <= 1e-12 && pairing_excess <= 1e-12;
    checks.push(VerifyCheck {
        name: "admissibility".into(),
        passed,
        expected_fail: false,
        details: format!(
            "T = {}: max gamma excess {gamma_excess:.3e}, max pairing excess {pairing_excess:.3e}",
            params.temperature
        ),
    });
    Ok(())
}

/// The lowest sector eigenvalue must be nondecreasing in temperature.
fn monotonicity_check(
    cfg: &RunConfig,
    kernels: &[SectorKernel],
    report: &CriticalReport,
    checks: &mut Vec<VerifyCheck>,
) -> Result<()> {
    let kernel = select_kernel(kernels, None, report)?;
    let (lo, hi) = if report.tc > 0.0 {
        (0.25 * report.tc, 2.0 * report.tc)
    } else {
        (0.1, 1.0)
    };
    let mut worst = 0.0f64;
    let mut prev = f64::NEG_INFINITY;
    for j in 0..8 {
        let t = lo + (hi - lo) * j as f64 / 7.0;
        let params = DispersionParams::new(cfg.mu, t)?;
        let val = lowest_eigenvalue(&params, kernel, None)?;
        worst = worst.max(prev - val);
        prev = val;
    }
    checks.push(VerifyCheck {
        name: "monotonicity".into(),
        passed: worst <= 1e-8,
        expected_fail: false,
        details: format!(
            "sector {}: worst decrease {worst:.3e} over [{lo}, {hi}]",
            kernel.ell
        ),
    });
    Ok(())
}
