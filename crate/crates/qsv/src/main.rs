//! Command line for the verification-game toolkit: certify single
//! configurations, sweep grids, evaluate distances on state or channel
//! files, and run the appendix constructions.
//!
//! Exit codes: 0 when every produced report has margin >= -1e-9, 1 when any
//! margin falls below, 2 on usage or evaluation errors.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use qsv_core::algebra::Matrix;
use qsv_core::attacks::{depolarized_attack_state, measurement_attack_construction};
use qsv_core::channels::{BlockState, Channel};
use qsv_core::metrics::{
    diamond_lower_estimate, fidelity, fvdg_bounds, helstrom, trace_distance_half,
};
use qsv_core::protocols::{AcceptanceTest, RoundDistribution, TargetSpec};
use qsv_core::tol;
use qsv_core::verifier::{
    emit_csv, eval_eps_dishonest_post, eval_eps_honest_post, run_sweep, theorem_bound,
    unital_weights, SweepConfig, SweepOutcome, TheoremTag, VerificationReport,
};

#[derive(Parser)]
#[command(name = "qsv", version, about = "Verification-game bound certification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for stochastic estimators.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Probe budget for stochastic estimators.
    #[arg(long, global = true, default_value_t = 200)]
    budget: usize,
    /// Worker threads for sweep evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify one configuration: one target, protocol, attack, theorem.
    Verify {
        #[arg(long, value_name = "JSON")]
        config: PathBuf,
    },
    /// Evaluate the full Cartesian grid of a configuration.
    Sweep {
        #[arg(long, value_name = "JSON")]
        config: PathBuf,
    },
    /// Distances between two states, or a diamond-distance lower estimate
    /// between two channels.
    Metrics {
        /// Two state files.
        #[arg(long, num_args = 2, value_name = "FILE")]
        states: Option<Vec<PathBuf>>,
        /// Two channel files in Kraus form.
        #[arg(long, num_args = 2, value_name = "FILE")]
        channels: Option<Vec<PathBuf>>,
    },
    /// The appendix constructions on their stock configurations.
    Appendix {
        #[arg(long, value_enum)]
        mode: AppendixMode,
        /// Tested rounds N.
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        /// Hilbert space dimension; measurement mode needs at least 3 (its
        /// default), the unital mode is fixed to a qubit.
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AppendixMode {
    /// Biased two-outcome measurement on a d >= 3 pure target.
    Measurement,
    /// Qubit dephasing after the game, depolarized source.
    Unital,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Verify { config } => {
            let sweep = config::load_config(config)?.to_sweep()?;
            ensure!(
                sweep.targets.len() == 1
                    && sweep.protocols.len() == 1
                    && sweep.attacks.len() == 1
                    && sweep.theorems.len() == 1,
                "verify expects exactly one target, one protocol, one attack, and one theorem; \
                 use sweep for grids"
            );
            let outcome = timed_sweep(&sweep, 1)?;
            if let Some(note) = outcome.skipped.first() {
                bail!("configuration not evaluable: {note}");
            }
            emit_reports(&outcome.reports, &cli)?;
            Ok(margins_hold(&outcome.reports))
        }
        Cmd::Sweep { config } => {
            let sweep = config::load_config(config)?.to_sweep()?;
            let outcome = timed_sweep(&sweep, cli.jobs)?;
            for note in &outcome.skipped {
                eprintln!("skipped {note}");
            }
            emit_reports(&outcome.reports, &cli)?;
            Ok(margins_hold(&outcome.reports))
        }
        Cmd::Metrics { states: Some(paths), channels: None } => {
            let a = config::load_state(&paths[0])?;
            let b = config::load_state(&paths[1])?;
            let (lo, hi) = fvdg_bounds(&a, &b)?;
            emit_table(
                &[
                    ("trace_distance_half", trace_distance_half(&a, &b)?),
                    ("fidelity", fidelity(&a, &b)?),
                    ("fvdg_lower", lo),
                    ("fvdg_upper", hi),
                    ("helstrom_advantage", helstrom(&a, &b)?.advantage()),
                ],
                &cli,
            )?;
            Ok(true)
        }
        Cmd::Metrics { states: None, channels: Some(paths) } => {
            let f = config::load_channel(&paths[0])?;
            let g = config::load_channel(&paths[1])?;
            let est = diamond_lower_estimate(&f, &g, cli.budget, cli.seed)?;
            emit_table(&[("diamond_lower_estimate", est)], &cli)?;
            Ok(true)
        }
        Cmd::Metrics { .. } => bail!("metrics needs either --states A B or --channels F G"),
        Cmd::Appendix { mode, rounds, dim } => {
            ensure!(*rounds >= 1, "need at least one tested round");
            let start = Instant::now();
            let mut report = match mode {
                AppendixMode::Measurement => appendix_measurement(*rounds, dim.unwrap_or(3))?,
                AppendixMode::Unital => {
                    ensure!(
                        dim.unwrap_or(2) == 2,
                        "the unital construction is a qubit game"
                    );
                    appendix_unital(*rounds)?
                }
            };
            report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let reports = [report];
            emit_reports(&reports, &cli)?;
            Ok(margins_hold(&reports))
        }
    }
}

fn margins_hold(reports: &[VerificationReport]) -> bool {
    reports.iter().all(|r| r.margin >= tol::MARGIN)
}

/// Runs every grid point as its own single-point sweep so each report gets
/// an individual wall-clock time, distributing points over `jobs` workers.
/// Ids and skip notes are renumbered to match the single-threaded grid
/// order, so the output is independent of `jobs`.
fn timed_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepOutcome> {
    let mut points = Vec::new();
    for t in &config.targets {
        for p in &config.protocols {
            for a in &config.attacks {
                for &tag in &config.theorems {
                    points.push(SweepConfig {
                        targets: vec![t.clone()],
                        protocols: vec![p.clone()],
                        attacks: vec![a.clone()],
                        theorems: vec![tag],
                    });
                }
            }
        }
    }
    let results = par_map(points.len(), jobs, |i| {
        let start = Instant::now();
        let outcome = run_sweep(&points[i]);
        (outcome, start.elapsed().as_secs_f64() * 1e3)
    });

    let mut merged = SweepOutcome::default();
    for (i, (res, ms)) in results.into_iter().enumerate() {
        let one = res?;
        for mut r in one.reports {
            r.config_id = renumber(&r.config_id, i);
            r.runtime_ms = ms;
            merged.reports.push(r);
        }
        for note in one.skipped {
            merged.skipped.push(renumber(&note, i));
        }
    }
    Ok(merged)
}

/// Single-point sweeps label everything `c0000-...`; rewrite to the point's
/// position in the full grid.
fn renumber(text: &str, idx: usize) -> String {
    match text.strip_prefix("c0000") {
        Some(rest) => format!("c{idx:04}{rest}"),
        None => String::from(text),
    }
}

fn par_map<T: Send>(count: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = jobs.clamp(1, count.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = f(i);
                *slots[i].lock().unwrap() = Some(value);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("slot filled")).collect()
}

/// Post-game measurement in the basis spanned by the biased vector, its
/// in-plane complement, and the rest of the space.
fn appendix_measurement(rounds: usize, d: usize) -> Result<VerificationReport> {
    ensure!(d >= 3, "measurement construction needs dimension at least 3");
    let mut amps = vec![Complex64::from(0.0); d];
    amps[0] = 1.0.into();
    let t = TargetSpec::new(vec![d], BlockState::pure(&amps)?, 0)?;
    let test = AcceptanceTest::default_for(&t)?;
    let dist = RoundDistribution::point_mass(rounds + 1, rounds)?;
    let n = dist.expected_tested();

    let atk = measurement_attack_construction(&t, n)?;
    let geo = atk.geometry().context("measurement attack carries its geometry")?;
    let theta = geo.theta();
    let xi = geo.xi().to_vec();
    let b1: Vec<Complex64> =
        xi.iter().zip(&amps).map(|(&x, &p)| (x - p * theta.cos()) / theta.sin()).collect();
    let xi_perp: Vec<Complex64> =
        amps.iter().zip(&b1).map(|(&p, &b)| p * theta.sin() - b * theta.cos()).collect();
    let p_xi = Matrix::projector(&xi)?;
    let p_perp = Matrix::projector(&xi_perp)?;
    let rest = Matrix::identity(d).sub(&p_xi)?.sub(&p_perp)?;
    let lambda = Channel::povm_channel(&[p_xi, p_perp, rest], true)?;

    let tests = core::slice::from_ref(&test);
    let eps_honest = eval_eps_honest_post(&t, &dist, tests, &lambda)?;
    let (eps_dishonest, q_star) = eval_eps_dishonest_post(&t, &dist, tests, &atk, &lambda)?;
    let cert = theorem_bound(TheoremTag::AppendixMeasurement, n, true, 1.0, 1.0)?;
    Ok(VerificationReport {
        config_id: format!("appendix-measurement-d{d}-n{rounds}"),
        theorem: TheoremTag::AppendixMeasurement,
        expected_rounds: n,
        dim: d,
        clients: 1,
        attack: atk.kind(),
        eps_honest,
        eps_dishonest,
        q_star,
        bound: cert.value(),
        margin: eps_honest + eps_dishonest - cert.value(),
        runtime_ms: 0.0,
    })
}

/// Qubit dephasing after the game against the depolarized source the
/// unital bound is stated for.
fn appendix_unital(rounds: usize) -> Result<VerificationReport> {
    let t = TargetSpec::new(vec![2], BlockState::pure(&[1.0.into(), 0.0.into()])?, 0)?;
    let test = AcceptanceTest::default_for(&t)?;
    let dist = RoundDistribution::point_mass(rounds + 1, rounds)?;
    let n = dist.expected_tested();

    let half = core::f64::consts::FRAC_1_SQRT_2;
    let lambda = Channel::from_kraus(&[
        Matrix::diag(&[half, half]),
        Matrix::diag(&[half, -half]),
    ])?;
    let (omega, omega_prime) = unital_weights(&t, &lambda)?;
    let atk = depolarized_attack_state(&t, (0.5 / (omega * n)).min(1.0))?;

    let tests = core::slice::from_ref(&test);
    let eps_honest = eval_eps_honest_post(&t, &dist, tests, &lambda)?;
    let (eps_dishonest, q_star) = eval_eps_dishonest_post(&t, &dist, tests, &atk, &lambda)?;
    let cert = theorem_bound(TheoremTag::AppendixUnital, n, t.is_pure(), omega, omega_prime)?;
    Ok(VerificationReport {
        config_id: format!("appendix-unital-n{rounds}"),
        theorem: TheoremTag::AppendixUnital,
        expected_rounds: n,
        dim: 2,
        clients: 1,
        attack: atk.kind(),
        eps_honest,
        eps_dishonest,
        q_star,
        bound: cert.value(),
        margin: eps_honest + eps_dishonest - cert.value(),
        runtime_ms: 0.0,
    })
}

fn emit_reports(reports: &[VerificationReport], cli: &Cli) -> Result<()> {
    let text = match cli.format {
        Format::Csv => emit_csv(reports),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            s
        }
    };
    write_out(&text, cli)
}

/// Named scalars, CSV `metric,value` or a flat JSON object. CSV floats use
/// the same 12-significant-digit rendering as report rows.
fn emit_table(rows: &[(&str, f64)], cli: &Cli) -> Result<()> {
    let text = match cli.format {
        Format::Csv => {
            let mut s = String::from("metric,value\n");
            for (name, value) in rows {
                let rendered =
                    if *value == 0.0 { String::from("0") } else { format!("{value:.11e}") };
                s.push_str(&format!("{name},{rendered}\n"));
            }
            s
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = rows
                .iter()
                .map(|&(name, value)| (String::from(name), serde_json::json!(value)))
                .collect();
            let mut s = serde_json::to_string_pretty(&map)?;
            s.push('\n');
            s
        }
    };
    write_out(&text, cli)
}

fn write_out(text: &str, cli: &Cli) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
