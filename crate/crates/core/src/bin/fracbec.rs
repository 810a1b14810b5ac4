use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use fracbec::asymptotics::{concentration_report, fit_power_law, predicted_profile, run_sweep, tail_window, SweepOutcome};
use fracbec::config::{parse_config, OutputFormat, RunConfig};
use fracbec::ground_state::{tail_exponent, DEFAULT_MOMENT_EXPONENTS};
use fracbec::minimizer::{energy_breakdown, first_eigenpair, minimize, CoupledState};
use fracbec::output::{resolve_output_dir, OutputDir};
use fracbec::potentials::flatness_analysis;
use fracbec::spectral::{spectral_rescale, SpectralGrid};
use fracbec::verification::{reference_for, run_all, Fixtures};
use fracbec::{Error, Result};

#[derive(Parser)]
#[command(name = "fracbec", version, about = "Half-Laplacian two-component condensates: ground states, minimizers, near-critical sweeps")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides FRACBEC_OUTPUT_DIR and the config).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Ground state Q, critical mass a* and the moments of Q.
    GroundState,
    /// First eigenpairs of √(-Δ) + V for both potentials.
    Eig,
    /// Coupled minimizer at the configured (a1, a2, beta).
    Minimize,
    /// Near-critical ladder with scaling fits.
    Sweep,
    /// Runs the full invariant suite; exits 4 on any failure.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Eig => "eig",
            Command::Minimize => "minimize",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => {
            log::info!("no config file given; using defaults throughout");
            RunConfig::default()
        }
    };
    let dir = resolve_output_dir(cli.output.as_deref(), &config.output.directory);
    let hash = config.hash();
    log::info!("config hash {hash}, output directory {}", dir.display());
    let mut out = OutputDir::create(&dir, hash)?;
    let start = Instant::now();
    match cli.command {
        Command::GroundState => ground_state(&config, &mut out)?,
        Command::Eig => eig(&config, &mut out)?,
        Command::Minimize => minimize_cmd(&config, &mut out)?,
        Command::Sweep => sweep(&config, &mut out)?,
        Command::Verify => {
            let failed = verify(&config, &mut out)?;
            out.manifest(cli.command.name(), start.elapsed().as_secs_f64())?;
            if failed > 0 {
                return Err(Error::Verification(format!("{failed} of 15 criteria failed")));
            }
            return Ok(());
        }
    }
    out.manifest(cli.command.name(), start.elapsed().as_secs_f64())?;
    Ok(())
}

fn ground_state(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let reference = reference_for(config)?;
    let base = &reference.base;
    let ex = &reference.extrapolation;
    let tail = tail_exponent(reference.q())?;
    let moments: Vec<_> = DEFAULT_MOMENT_EXPONENTS
        .iter()
        .map(|&p| reference.moment(p).map(|m| json!({ "p": p, "value": m })))
        .collect::<Result<_>>()?;
    log::info!(
        "a* = {:.10} (extrapolated), {:.10} on L = {}",
        reference.a_star(),
        base.a_star,
        base.grid().length()
    );
    if config.output.wants(OutputFormat::Json) {
        out.json(
            "ground_state.json",
            &json!({
                "a_star": reference.a_star(),
                "extrapolated": {
                    "a_star": ex.a_star,
                    "q4": ex.q4,
                    "seminorm": ex.seminorm,
                    "pohozaev_deviation": ex.pohozaev_deviation(),
                    "gn_quotient_at_q": ex.gn_quotient_at_q(),
                    "moments": moments,
                },
                "base": ex.base,
                "doubled": ex.doubled,
                "tail": tail,
            }),
        )?;
    }
    if config.output.wants(OutputFormat::Csv) {
        let g = base.grid();
        let rows: Vec<Vec<f64>> = g.nodes().iter().zip(base.q.values()).map(|(&x, &q)| vec![x, q]).collect();
        out.csv("ground_state.csv", &["x", "q"], &rows)?;
    }
    out.two_column("q_profile.dat", ("x", "q"), base.grid().nodes(), base.q.values())?;
    let iters: Vec<f64> = (0..base.trace.len()).map(|k| k as f64).collect();
    out.two_column("petviashvili_factor.dat", ("iteration", "stabilizing_factor"), &iters, &base.trace)?;
    Ok(())
}

fn eig(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let (v1, v2) = config.potentials()?;
    let grid = SpectralGrid::new(config.grid.length, config.grid.n_points)?;
    let e1 = first_eigenpair(&v1, &grid, config.eig.tolerance)?;
    let e2 = first_eigenpair(&v2, &grid, config.eig.tolerance)?;
    log::info!("lambda_11 = {:.12}, lambda_21 = {:.12}", e1.value, e2.value);
    if config.output.wants(OutputFormat::Json) {
        out.json(
            "eig.json",
            &json!({
                "lambda": [e1.value, e2.value],
                "sum": e1.value + e2.value,
                "residual": [e1.residual, e2.residual],
                "iterations": [e1.iterations, e2.iterations],
            }),
        )?;
    }
    if config.output.wants(OutputFormat::Csv) {
        let rows: Vec<Vec<f64>> = (0..grid.n_points())
            .map(|j| vec![grid.nodes()[j], e1.vector.values()[j], e2.vector.values()[j]])
            .collect();
        out.csv("eig.csv", &["x", "psi_1", "psi_2"], &rows)?;
    }
    Ok(())
}

fn minimize_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let (v1, v2) = config.potentials()?;
    let params = config.params()?;
    let reference = reference_for(config)?;
    let a_star = reference.a_star();
    if !params.in_existence_regime(a_star) {
        log::warn!(
            "(a1, a2, beta) = ({}, {}, {}) lies outside the existence regime for a* = {a_star:.8}",
            params.a1,
            params.a2,
            params.beta
        );
    }
    let grid = SpectralGrid::new(config.grid.length, config.grid.n_points)?;
    let center = config.params.init_center.unwrap_or(v1.zeros()[0].location);
    let init = CoupledState::gaussian(&grid, center, config.params.init_width)?;
    let r = minimize(&params, &v1, &v2, &init, &config.solver, a_star)?;
    let breakdown = energy_breakdown(&r.state, &params, &v1, &v2)?;
    log::info!(
        "energy {:.12e} after {} iterations, residual {:.2e}",
        r.energy,
        r.iterations,
        r.residual
    );
    if config.output.wants(OutputFormat::Json) {
        out.json(
            "minimize.json",
            &json!({
                "params": { "a1": params.a1, "a2": params.a2, "beta": params.beta },
                "a_star": a_star,
                "in_existence_regime": r.in_existence_regime,
                "energy": r.energy,
                "mu": r.mu,
                "l4": r.l4_norms,
                "max_points": r.max_points,
                "residual": r.residual,
                "iterations": r.iterations,
                "converged": r.converged,
                "scheme": r.scheme,
                "shift": r.shift,
                "breakdown": breakdown,
            }),
        )?;
    }
    if config.output.wants(OutputFormat::Csv) {
        let rows: Vec<Vec<f64>> = (0..grid.n_points())
            .map(|j| vec![grid.nodes()[j], r.state.u1.values()[j], r.state.u2.values()[j]])
            .collect();
        out.csv("minimize.csv", &["x", "u_1", "u_2"], &rows)?;
    }
    let iters: Vec<f64> = (0..r.energy_trace.len()).map(|k| k as f64).collect();
    out.two_column("energy_trace.dat", ("iteration", "energy"), &iters, &r.energy_trace)?;
    Ok(())
}

fn sweep(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let reference = reference_for(config)?;
    let (v1, v2) = config.potentials()?;
    let flatness = flatness_analysis(&v1, &v2)?;
    let sweep_config = config.sweep_config(reference.a_star(), flatness.p0)?;
    let outcome = run_sweep(&sweep_config, &reference)?;
    write_sweep(config, &outcome, &reference, out)
}

fn write_sweep(
    config: &RunConfig,
    outcome: &SweepOutcome,
    reference: &fracbec::ground_state::GroundStateReference,
    out: &mut OutputDir,
) -> Result<()> {
    let records = &outcome.records;
    let p0 = outcome.flatness.p0;
    let window = tail_window(records.len(), config.sweep.fit_window);
    let gaps = outcome.gaps();
    let fit_json = |ys: &[f64]| match fit_power_law(&gaps, ys, window.clone()) {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let concentration = match concentration_report(records, &outcome.flatness) {
        Ok(c) => json!(c),
        Err(e) => json!({ "error": e.to_string() }),
    };
    if config.output.wants(OutputFormat::Json) {
        out.json(
            "fits.json",
            &json!({
                "a_star": outcome.a_star,
                "lambda": outcome.lambda,
                "flatness": outcome.flatness,
                "site": outcome.site,
                "predicted": {
                    "energy_slope": p0 / (p0 + 1.0),
                    "l4_slope": -1.0 / (p0 + 1.0),
                    "eps_mu": -outcome.lambda,
                },
                "energy": fit_json(&outcome.energies()),
                "l4_1": fit_json(&outcome.l4(0)),
                "l4_2": fit_json(&outcome.l4(1)),
                "concentration": concentration,
                "cold_start": outcome.cold_start,
                "failures": outcome.failures,
                "records": records,
            }),
        )?;
    }
    if config.output.wants(OutputFormat::Csv) {
        let header = [
            "eps", "energy", "l4_1", "l4_2", "mu_1", "mu_2", "max_1", "max_2", "ratio_1", "ratio_2", "dist_l2_1",
            "dist_l2_2", "trial_upper", "gap", "dist_h_half_1", "dist_h_half_2", "single_1", "single_2", "coupling",
            "n_points", "iterations", "residual",
        ];
        let rows: Vec<Vec<f64>> = records
            .iter()
            .map(|r| {
                vec![
                    r.eps,
                    r.energy,
                    r.l4[0],
                    r.l4[1],
                    r.mu[0],
                    r.mu[1],
                    r.max_points[0],
                    r.max_points[1],
                    r.max_offset_ratio[0],
                    r.max_offset_ratio[1],
                    r.profile_distance[0].l2,
                    r.profile_distance[1].l2,
                    r.trial_upper,
                    r.gap,
                    r.profile_distance[0].h_half,
                    r.profile_distance[1].h_half,
                    r.single_energies[0],
                    r.single_energies[1],
                    r.coupling,
                    r.n_points as f64,
                    r.iterations as f64,
                    r.residual,
                ]
            })
            .collect();
        out.csv("sweep.csv", &header, &rows)?;
    }
    let eps: Vec<f64> = records.iter().map(|r| r.eps).collect();
    out.two_column("energy_vs_gap.dat", ("gap", "energy"), &gaps, &outcome.energies())?;
    out.two_column("l4_1_vs_gap.dat", ("gap", "l4_1"), &gaps, &outcome.l4(0))?;
    out.two_column("l4_2_vs_gap.dat", ("gap", "l4_2"), &gaps, &outcome.l4(1))?;
    let ratios: Vec<f64> = records.iter().map(|r| r.max_offset_ratio[0]).collect();
    out.two_column("offset_ratio_vs_eps.dat", ("eps", "ratio_1"), &eps, &ratios)?;
    let dists: Vec<f64> = records.iter().map(|r| r.profile_distance[0].l2).collect();
    out.two_column("profile_distance_vs_eps.dat", ("eps", "dist_l2_1"), &eps, &dists)?;
    if let (Some(state), Some(last)) = (&outcome.final_state, records.last()) {
        let pg = SpectralGrid::new(config.sweep.profile_length, config.sweep.profile_points)?;
        let w = spectral_rescale(&state.u1, last.eps, last.max_points[0], &pg)?.field;
        let predicted = predicted_profile(reference.q(), outcome.lambda, &pg)?;
        out.two_column("rescaled_profile.dat", ("y", "w_1"), pg.nodes(), w.values())?;
        out.two_column("predicted_profile.dat", ("y", "p"), pg.nodes(), predicted.values())?;
    }
    Ok(())
}

fn verify(config: &RunConfig, out: &mut OutputDir) -> Result<usize> {
    let fixtures = Fixtures::build(config)?;
    let outcomes = run_all(config, &fixtures);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    out.json("verify.json", &json!({ "passed": failed == 0, "criteria": outcomes }))?;
    Ok(failed)
}
