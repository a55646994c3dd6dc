//! `beamalign`: codebook-driven beamwidth optimization, Monte Carlo sweeps
//! and detector validation, driven by a JSON config.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use beamalign::codebook::Codebook;
use beamalign::phy;
use beamalign::sim;
use beamalign::waterfill::{self, PowerParams};
use beamalign::Error;

use config::RunConfig;

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

#[derive(Parser)]
#[command(
    name = "beamalign",
    about = "Water-filling beamwidth design and Monte Carlo evaluation of coded beam-alignment schemes",
    long_about = "Subcommands read a strict JSON config (see README for the schema) and write \
CSV/JSON artifacts. Sweeps vary the per-user rate target R_min, which moves both the average \
power and the spectral efficiency monotonically. All outputs are deterministic functions of \
(config, seed), independent of the thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path; with several codebooks the scheme label is inserted
    /// before the extension.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the water-filling allocation per codebook; write allocation
    /// CSVs and a summary JSON.
    Optimize(Common),
    /// Run the Monte Carlo rate sweep per codebook; write results CSVs.
    Sweep(Common),
    /// Check the slot detector's error rates and H0 statistic; write a
    /// report JSON.
    ValidateDetector(Common),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::CapacityRefused(_) => 2,
        Error::InfeasibleScenario(_) => 3,
        Error::NumericalFailure(_) => 4,
    }
}

fn fail(msg: &str, code: u8) -> ExitCode {
    eprintln!("beamalign: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Optimize(c) | Command::Sweep(c) | Command::ValidateDetector(c) => c,
    };
    if let Some(threads) = common.threads {
        // Ignored if a global pool already exists (tests in one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => return fail(&format!("cannot read {}: {e}", common.config.display()), 2),
    };
    let cfg = match config::load(&text) {
        Ok(c) => c,
        Err(msg) => return fail(&msg, 2),
    };
    let result = match &cli.command {
        Command::Optimize(c) => cmd_optimize(&cfg, c),
        Command::Sweep(c) => cmd_sweep(&cfg, c),
        Command::ValidateDetector(c) => cmd_validate_detector(&cfg, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.to_string(), exit_code(&e)),
    }
}

/// `out` with the scheme label inserted before the extension.
fn scheme_path(out: &Path, label: &str, multi: bool) -> PathBuf {
    if !multi {
        return out.to_path_buf();
    }
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("csv");
    out.with_extension(format!("{label}.{ext}"))
}

fn write_file(path: &Path, contents: &str) -> beamalign::Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

fn cmd_optimize(cfg: &RunConfig, common: &Common) -> beamalign::Result<()> {
    let scenarios = cfg.scenarios(common.seed)?;
    let multi = scenarios.len() > 1;
    let mut schemes = Map::new();
    for (label, scenario) in &scenarios {
        let cb = Codebook::build(scenario.codebook_kind)?;
        let params = match cfg.kappa {
            Some(kappa) => PowerParams::from_kappa(kappa, scenario.frame.t_fr)?,
            None => sim::build_point(scenario, 0)?.params,
        };
        let lambda = waterfill::solve_dual(&params, &cb)?;
        let alloc = waterfill::allocation_at(lambda, &params, &cb);
        let delta = waterfill::misalignment_tail(scenario.phy.p_e, cb.len_slots(), cb.epsilon())?;
        write_file(&scheme_path(&common.out, label, multi), &alloc.to_csv(&cb))?;
        schemes.insert(
            label.clone(),
            json!({
                "lambda_star": lambda,
                "kappa": params.kappa(),
                "p_success": params.p_success,
                "delta": delta,
                "sum_omega_rad2": alloc.total(),
                "objective_upper_W": waterfill::upper_objective(&alloc, &cb, &params)?,
                "avg_power_exact_W": waterfill::avg_power_exact(&alloc, &cb, &params, scenario.phy.p_e)?,
                "avg_power_upper_W": waterfill::avg_power_upper(&alloc, &cb, &params, scenario.phy.p_e)?,
                "gap_bound_W": waterfill::gap_bound(&params, delta),
            }),
        );
    }
    let summary = json!({ "schemes": Value::Object(schemes) });
    let summary_path = common.out.with_extension("summary.json");
    write_file(&summary_path, &format!("{:#}\n", summary))
}

fn cmd_sweep(cfg: &RunConfig, common: &Common) -> beamalign::Result<()> {
    let scenarios = cfg.scenarios(common.seed)?;
    let multi = scenarios.len() > 1;
    for (label, scenario) in &scenarios {
        let points = sim::run_sweep(scenario)?;
        let csv = sim::results_csv(label, &points, scenario.seed);
        write_file(&scheme_path(&common.out, label, multi), &csv)?;
    }
    Ok(())
}

fn cmd_validate_detector(cfg: &RunConfig, common: &Common) -> beamalign::Result<()> {
    let phy_params = cfg.phy_params()?;
    let kinds = cfg.codebook_kinds()?;
    let l = kinds[0].block_len();
    let beam = PI2 / l as f64;
    let p_k = cfg
        .p_k_override_w
        .unwrap_or_else(|| phy::alignment_power(beam, &phy_params));
    let slots = cfg.slots.unwrap_or(100_000);
    if slots == 0 {
        return Err(Error::invalid("slots must be >= 1"));
    }
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let d = phy_params.d_max;
    let tau_th = phy::detector_threshold(phy_params.p_e)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut missed = 0u64;
    let mut false_alarms = 0u64;
    let mut h0_stats = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        let s1 = phy::slot_statistic(&mut rng, true, p_k, beam, d, &phy_params);
        if s1 < tau_th {
            missed += 1;
        }
        let s0 = phy::slot_statistic(&mut rng, false, p_k, beam, d, &phy_params);
        if s0 >= tau_th {
            false_alarms += 1;
        }
        h0_stats.push(s0);
    }
    let n = slots as f64;
    let p_md = missed as f64 / n;
    let p_fa = false_alarms as f64 / n;
    // With zero slot power H1 collapses to H0 and the miss rate is the
    // complement of the false-alarm rate.
    let expected_p_md = if p_k > 0.0 {
        phy_params.p_e
    } else {
        1.0 - phy_params.p_e
    };
    let sigma = (phy_params.p_e * (1.0 - phy_params.p_e) / n).sqrt();

    h0_stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistic"));
    let mut ks = 0.0f64;
    for (i, &x) in h0_stats.iter().enumerate() {
        let f = 1.0 - (-x).exp();
        ks = ks
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    let ks_critical = 1.6276 / n.sqrt();

    let mut warnings = Vec::new();
    if phy_params.p_e == 0.5 {
        warnings.push(
            "p_e = 0.5 makes the derived phi_s zero; the alignment energy budget degenerates"
                .to_string(),
        );
    }
    if p_k == 0.0 {
        warnings.push("slot power is zero: H1 collapses to H0 and p_md ~= 1 - p_fa".to_string());
    }

    let pass_p_md = (p_md - expected_p_md).abs() <= 3.0 * sigma;
    let pass_p_fa = (p_fa - phy_params.p_e).abs() <= 3.0 * sigma;
    let pass_ks = ks < ks_critical;
    let report = json!({
        "p_e_target": phy_params.p_e,
        "slots": slots,
        "seed": seed,
        "beam_measure_rad2": beam,
        "p_k_W": p_k,
        "p_md_empirical": p_md,
        "p_md_expected": expected_p_md,
        "p_fa_empirical": p_fa,
        "binomial_3sigma": 3.0 * sigma,
        "ks_statistic": ks,
        "ks_critical_alpha_0_01": ks_critical,
        "pass_p_md": pass_p_md,
        "pass_p_fa": pass_p_fa,
        "pass_ks": pass_ks,
        "pass": pass_p_md && pass_p_fa && pass_ks,
        "warnings": warnings,
    });
    write_file(&common.out, &format!("{:#}\n", report))
}
