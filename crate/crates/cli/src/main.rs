//! `spinbath`: decoherence factors, environment fidelities, and objectivity
//! bounds for central-spin models, from the command line.
//!
//! Single-point queries (`gamma-pure`, `gamma-general`, `thermal`,
//! `short-time`) print key/value results; sweep commands (`ensemble`,
//! `sbs-bound`, `demo fig1`) write seeded, reproducible datasets plus a run
//! manifest. Exit codes: 0 success, 2 configuration error, 3 numerical or
//! runtime error, 4 I/O error.

mod config;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use spinbath::ensemble::{run_experiment, sample_couplings, EnsembleRun, RealizationSeries};
use spinbath::measurement::{
    gamma_general_from_state, gamma_pure, gamma_pure_modsq, gamma_pure_short_time,
};
use spinbath::sbs::{
    fidelity_short_time, fidelity_short_time_exact_info, gamma_short_time, macrofraction_fidelity,
    quantum_fisher_information, sbs_bound, sz_variance_thermal, total_decoherence_factor,
    EnvironmentSpec, MacrofractionLayout,
};
use spinbath::state::{spin_coherent_state, thermal_state_along_z, SpinState, SystemState};
use spinbath::thermal::gamma_and_fidelity;
use spinbath::{CoherentGammaParamsF64, ExperimentConfigF64, Spin, ThermalParamsF64};

use config::{
    load_raw, resolve_and_validate, Mode, OutputFormat, RawConfig, ScenarioConfig, StateFamily,
};
use output::{svg_line_chart, Report, Row, RunWriter, Series, Tag};

/// A failed run, classed by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration (exit 2): every problem, one line each.
    Config(Vec<String>),
    /// Numerical or internal error after validation (exit 3).
    Runtime(String),
    /// Filesystem error (exit 4).
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn lines(&self) -> Vec<String> {
        match self {
            Failure::Config(problems) => problems.clone(),
            Failure::Runtime(msg) | Failure::Io(msg) => vec![msg.clone()],
        }
    }
}

fn runtime(e: spinbath::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "spinbath",
    version,
    about = "Decoherence factors, environment fidelities, and objectivity bounds for central-spin models"
)]
struct Cli {
    /// TOML scenario config; command-line flags override file values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base RNG seed for coupling draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for datasets and the run manifest.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset encoding; also switches single-point output to JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Additionally render simple SVG line charts (sweep commands only).
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decoherence factor of one spin-coherent environment spin under the
    /// static (measurement-limit) coupling.
    GammaPure(GammaPureArgs),
    /// Decoherence factor of one environment spin in a configurable state
    /// under the static coupling.
    GammaGeneral(GammaGeneralArgs),
    /// Thermal decoherence factor and fidelity at one parameter point.
    Thermal(ThermalArgs),
    /// Disorder-averaged sweep over environment spin magnitudes.
    Ensemble(EnsembleArgs),
    /// Objectivity-bound time series for a configured central state.
    SbsBound(SbsBoundArgs),
    /// Thermal moments and short-time Gaussian envelopes.
    ShortTime(ShortTimeArgs),
    /// Pinned demonstration datasets.
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Reference scenario: one sample realization plus 100-realization
    /// averages of |Γ|, the macrofraction fidelity, and the bound.
    Fig1,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct GammaPureArgs {
    /// Environment spin magnitude j (half-integer).
    #[arg(long)]
    env_j: Option<f64>,
    /// Coherent-state polar angle θ in [0, π].
    #[arg(long)]
    theta: Option<f64>,
    /// Coupling g/Ω.
    #[arg(long)]
    g: Option<f64>,
    /// Time in units of 1/Ω.
    #[arg(long)]
    t: Option<f64>,
    /// Central level separation Δm = m - m'.
    #[arg(long)]
    delta_m: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct GammaGeneralArgs {
    /// Environment spin magnitude j (half-integer).
    #[arg(long)]
    env_j: Option<f64>,
    /// Environment state family.
    #[arg(long, value_enum)]
    state: Option<StateFamily>,
    /// Polar angle of the coherent state.
    #[arg(long)]
    theta: Option<f64>,
    /// Azimuth of the coherent state.
    #[arg(long)]
    phi: Option<f64>,
    /// Inverse temperature βΩ of the thermal-z state.
    #[arg(long)]
    beta_omega: Option<f64>,
    /// Coupling g/Ω.
    #[arg(long)]
    g: Option<f64>,
    /// Time in units of 1/Ω.
    #[arg(long)]
    t: Option<f64>,
    /// Central level separation Δm = m - m'.
    #[arg(long)]
    delta_m: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ThermalArgs {
    /// Environment spin magnitude j (half-integer).
    #[arg(long)]
    env_j: Option<f64>,
    /// Inverse temperature βΩ.
    #[arg(long)]
    beta_omega: Option<f64>,
    /// Coupling g/Ω.
    #[arg(long)]
    g: Option<f64>,
    /// Central level m.
    #[arg(long)]
    m: Option<f64>,
    /// Central level m'.
    #[arg(long)]
    m_prime: Option<f64>,
    /// Time in units of 1/Ω.
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ShortTimeArgs {
    /// Environment spin magnitude j (half-integer).
    #[arg(long)]
    env_j: Option<f64>,
    /// Inverse temperature βΩ.
    #[arg(long)]
    beta_omega: Option<f64>,
    /// Number of spins in the fraction.
    #[arg(long)]
    n_spins: Option<usize>,
    /// Mean squared coupling ⟨g²⟩ of the fraction.
    #[arg(long)]
    mean_g_sq: Option<f64>,
    /// Central level separation Δm = m - m'.
    #[arg(long)]
    delta_m: Option<f64>,
    /// Time in units of 1/Ω.
    #[arg(long)]
    t: Option<f64>,
    /// Use the large-j form of the |Γ| envelope.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    large_j: Option<bool>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EnsembleArgs {
    /// Environment spin magnitudes to sweep, comma-separated.
    #[arg(long, value_delimiter = ',')]
    j_list: Option<Vec<f64>>,
    /// Inverse temperature βΩ.
    #[arg(long)]
    beta_omega: Option<f64>,
    /// Central level m of the compared pair.
    #[arg(long)]
    m: Option<f64>,
    /// Central level m' of the compared pair.
    #[arg(long)]
    m_prime: Option<f64>,
    /// Number of unobserved environment spins.
    #[arg(long)]
    unobserved: Option<usize>,
    /// Macrofraction sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Lower bound of the uniform coupling distribution.
    #[arg(long)]
    low: Option<f64>,
    /// Upper bound of the uniform coupling distribution.
    #[arg(long)]
    high: Option<f64>,
    /// Number of coupling realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// First realization stream (for splitting runs across machines).
    #[arg(long)]
    realization_offset: Option<u64>,
    /// Start of the time grid.
    #[arg(long)]
    t_min: Option<f64>,
    /// End of the time grid.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SbsBoundArgs {
    /// Central spin magnitude j_S (half-integer).
    #[arg(long)]
    system_j: Option<f64>,
    /// Levels of the central equal superposition, comma-separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Populations of a dephased central state, comma-separated.
    #[arg(long, value_delimiter = ',')]
    populations: Option<Vec<f64>>,
    /// Level pair reported in the per-pair columns: m.
    #[arg(long)]
    m: Option<f64>,
    /// Level pair reported in the per-pair columns: m'.
    #[arg(long)]
    m_prime: Option<f64>,
    /// Environment spin magnitudes to sweep, comma-separated.
    #[arg(long, value_delimiter = ',')]
    j_list: Option<Vec<f64>>,
    /// Inverse temperature βΩ.
    #[arg(long)]
    beta_omega: Option<f64>,
    /// Number of unobserved environment spins.
    #[arg(long)]
    unobserved: Option<usize>,
    /// Macrofraction sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Lower bound of the uniform coupling distribution.
    #[arg(long)]
    low: Option<f64>,
    /// Upper bound of the uniform coupling distribution.
    #[arg(long)]
    high: Option<f64>,
    /// Start of the time grid.
    #[arg(long)]
    t_min: Option<f64>,
    /// End of the time grid.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    steps: Option<usize>,
}

fn main() {
    // Die silently on a closed pipe (`spinbath ... | head`) like any other
    // Unix filter instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(failure) = dispatch(cli) {
        for line in failure.lines() {
            eprintln!("error: {line}");
        }
        std::process::exit(failure.code());
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let mut raw = match &cli.config {
        Some(path) => load_raw(path).map_err(Failure::Config)?,
        None => RawConfig::default(),
    };
    if let Some(seed) = cli.seed {
        raw.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        raw.out = Some(out.clone());
    }
    if let Some(format) = cli.format {
        raw.format = Some(format);
    }

    match &cli.command {
        Command::GammaPure(args) => {
            args.merge(&mut raw);
            let cfg =
                resolve_and_validate(Mode::MeasurementLimit, &raw).map_err(Failure::Config)?;
            cmd_gamma_pure(&cfg)
        }
        Command::GammaGeneral(args) => {
            args.merge(&mut raw);
            let cfg =
                resolve_and_validate(Mode::MeasurementLimit, &raw).map_err(Failure::Config)?;
            cmd_gamma_general(&cfg)
        }
        Command::Thermal(args) => {
            args.merge(&mut raw);
            let cfg = resolve_and_validate(Mode::Thermal, &raw).map_err(Failure::Config)?;
            cmd_thermal(&cfg)
        }
        Command::ShortTime(args) => {
            args.merge(&mut raw);
            let cfg = resolve_and_validate(Mode::ShortTime, &raw).map_err(Failure::Config)?;
            cmd_short_time(&cfg)
        }
        Command::Ensemble(args) => {
            args.merge(&mut raw);
            let cfg = resolve_and_validate(Mode::Ensemble, &raw).map_err(Failure::Config)?;
            cmd_ensemble(&cfg, cli.svg)
        }
        Command::SbsBound(args) => {
            args.merge(&mut raw);
            let cfg = resolve_and_validate(Mode::SbsBound, &raw).map_err(Failure::Config)?;
            cmd_sbs_bound(&cfg, cli.svg)
        }
        Command::Demo(DemoCommand::Fig1) => {
            let cfg = resolve_and_validate(Mode::Ensemble, &raw).map_err(Failure::Config)?;
            cmd_demo_fig1(cfg, cli.svg)
        }
    }
}

// ---------------------------------------------------------------------------
// Flag merging: every subcommand flag lands on its config key.
// ---------------------------------------------------------------------------

fn set_env_j(raw: &mut RawConfig, j: Option<f64>) {
    if let Some(j) = j {
        raw.environment.get_or_insert_with(Default::default).j_list = Some(vec![j]);
    }
}

macro_rules! merge_fields {
    ($raw:expr, $section:ident, { $($field:ident : $value:expr),* $(,)? }) => {
        {
            $(
                if let Some(v) = $value {
                    $raw.$section.get_or_insert_with(Default::default).$field = Some(v);
                }
            )*
        }
    };
}

impl GammaPureArgs {
    fn merge(&self, raw: &mut RawConfig) {
        set_env_j(raw, self.env_j);
        merge_fields!(raw, single, {
            theta: self.theta,
            g: self.g,
            t: self.t,
            delta_m: self.delta_m,
        });
    }
}

impl GammaGeneralArgs {
    fn merge(&self, raw: &mut RawConfig) {
        set_env_j(raw, self.env_j);
        merge_fields!(raw, environment, { beta_omega: self.beta_omega });
        merge_fields!(raw, single, {
            state: self.state,
            theta: self.theta,
            phi: self.phi,
            g: self.g,
            t: self.t,
            delta_m: self.delta_m,
        });
    }
}

impl ThermalArgs {
    fn merge(&self, raw: &mut RawConfig) {
        set_env_j(raw, self.env_j);
        merge_fields!(raw, environment, { beta_omega: self.beta_omega });
        merge_fields!(raw, system, { m: self.m, m_prime: self.m_prime });
        merge_fields!(raw, single, { g: self.g, t: self.t });
    }
}

impl ShortTimeArgs {
    fn merge(&self, raw: &mut RawConfig) {
        set_env_j(raw, self.env_j);
        merge_fields!(raw, environment, { beta_omega: self.beta_omega });
        merge_fields!(raw, single, {
            n_spins: self.n_spins,
            mean_g_sq: self.mean_g_sq,
            delta_m: self.delta_m,
            t: self.t,
            large_j: self.large_j,
        });
    }
}

impl EnsembleArgs {
    fn merge(&self, raw: &mut RawConfig) {
        merge_fields!(raw, environment, {
            j_list: self.j_list.clone(),
            beta_omega: self.beta_omega,
        });
        merge_fields!(raw, system, { m: self.m, m_prime: self.m_prime });
        merge_fields!(raw, fractions, {
            unobserved: self.unobserved,
            sizes: self.sizes.clone(),
        });
        merge_fields!(raw, couplings, { low: self.low, high: self.high });
        merge_fields!(raw, ensemble, {
            realizations: self.realizations,
            realization_offset: self.realization_offset,
        });
        merge_fields!(raw, grid, {
            t_min: self.t_min,
            t_max: self.t_max,
            steps: self.steps,
        });
    }
}

impl SbsBoundArgs {
    fn merge(&self, raw: &mut RawConfig) {
        merge_fields!(raw, system, {
            j: self.system_j,
            levels: self.levels.clone(),
            populations: self.populations.clone(),
            m: self.m,
            m_prime: self.m_prime,
        });
        merge_fields!(raw, environment, {
            j_list: self.j_list.clone(),
            beta_omega: self.beta_omega,
        });
        merge_fields!(raw, fractions, {
            unobserved: self.unobserved,
            sizes: self.sizes.clone(),
        });
        merge_fields!(raw, couplings, { low: self.low, high: self.high });
        merge_fields!(raw, grid, {
            t_min: self.t_min,
            t_max: self.t_max,
            steps: self.steps,
        });
    }
}

// ---------------------------------------------------------------------------
// Single-point commands.
// ---------------------------------------------------------------------------

fn cmd_gamma_pure(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let spin = cfg.first_environment_spin();
    let p = CoherentGammaParamsF64 {
        spin,
        theta: cfg.single.theta,
        g: cfg.single.g,
        t: cfg.single.t,
        delta_m: cfg.single.delta_m,
    };
    let gamma = gamma_pure(&p);
    Report(vec![])
        .text("mode", cfg.mode.name())
        .num("env_j", spin.j::<f64>())
        .num("theta", p.theta)
        .num("g", p.g)
        .num("t", p.t)
        .num("delta_m", p.delta_m)
        .num("gamma_re", gamma.re)
        .num("gamma_im", gamma.im)
        .num("gamma_abs", gamma.norm())
        .num("gamma_modsq", gamma_pure_modsq(&p))
        .num("gaussian_envelope", gamma_pure_short_time(&p))
        .print(cfg.format);
    Ok(())
}

fn cmd_gamma_general(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let spin = cfg.first_environment_spin();
    let s = &cfg.single;
    let state = match s.state {
        StateFamily::Mixed => SpinState::maximally_mixed(spin),
        StateFamily::Coherent => spin_coherent_state(spin, s.theta, s.phi),
        StateFamily::ThermalZ => thermal_state_along_z(spin, cfg.environment.beta_omega),
    };
    let gamma = gamma_general_from_state(&state, s.g, s.t, s.delta_m).map_err(runtime)?;
    let mut report = Report(vec![])
        .text("mode", cfg.mode.name())
        .num("env_j", spin.j::<f64>())
        .text("state", s.state.name());
    report = match s.state {
        StateFamily::Mixed => report,
        StateFamily::Coherent => report.num("theta", s.theta).num("phi", s.phi),
        StateFamily::ThermalZ => report.num("beta_omega", cfg.environment.beta_omega),
    };
    report
        .num("g", s.g)
        .num("t", s.t)
        .num("delta_m", s.delta_m)
        .num("gamma_re", gamma.re)
        .num("gamma_im", gamma.im)
        .num("gamma_abs", gamma.norm())
        .print(cfg.format);
    Ok(())
}

fn cmd_thermal(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let spin = cfg.first_environment_spin();
    let p = ThermalParamsF64::new(
        spin,
        cfg.environment.beta_omega,
        cfg.single.g,
        cfg.system.m,
        cfg.system.m_prime,
        cfg.single.t,
    )
    .map_err(|e| Failure::Config(vec![e.to_string()]))?;
    let (gamma, fidelity) = gamma_and_fidelity(&p).map_err(runtime)?;
    Report(vec![])
        .text("mode", cfg.mode.name())
        .num("env_j", spin.j::<f64>())
        .num("beta_omega", p.beta_omega)
        .num("g", p.g_over_omega)
        .num("m", p.m)
        .num("m_prime", p.m_prime)
        .num("t", p.t)
        .num("gamma_re", gamma.re)
        .num("gamma_im", gamma.im)
        .num("gamma_abs", gamma.norm())
        .num("fidelity", fidelity)
        .print(cfg.format);
    Ok(())
}

fn cmd_short_time(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let spin = cfg.first_environment_spin();
    let b = cfg.environment.beta_omega;
    let s = &cfg.single;
    Report(vec![])
        .text("mode", cfg.mode.name())
        .num("env_j", spin.j::<f64>())
        .num("beta_omega", b)
        .num("n_spins", s.n_spins as f64)
        .num("mean_g_sq", s.mean_g_sq)
        .num("delta_m", s.delta_m)
        .num("t", s.t)
        .flag("large_j", s.large_j)
        .num("sz_variance", sz_variance_thermal(spin, b))
        .num(
            "quantum_fisher_information",
            quantum_fisher_information(spin, b),
        )
        .num(
            "gamma_envelope",
            gamma_short_time(s.n_spins, s.mean_g_sq, s.delta_m, s.t, spin, b, s.large_j),
        )
        .num(
            "fidelity_envelope",
            fidelity_short_time_exact_info(s.n_spins, s.mean_g_sq, s.delta_m, s.t, spin, b),
        )
        .num(
            "fidelity_envelope_large_j",
            fidelity_short_time(s.n_spins, s.mean_g_sq, s.delta_m, s.t, spin, b),
        )
        .print(cfg.format);
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweep commands.
// ---------------------------------------------------------------------------

/// Builds the library experiment from a resolved config.
fn to_experiment(cfg: &ScenarioConfig) -> Result<ExperimentConfigF64, Failure> {
    let expt = ExperimentConfigF64 {
        environment_spins: cfg
            .environment
            .j_list
            .iter()
            .map(|&j| Spin::from_float(j).expect("validated"))
            .collect(),
        beta_omega: cfg.environment.beta_omega,
        m: cfg.system.m,
        m_prime: cfg.system.m_prime,
        unobserved_size: cfg.fractions.unobserved,
        macrofraction_sizes: cfg.fractions.sizes.clone(),
        coupling: cfg.coupling_distribution(),
        realizations: cfg.ensemble.realizations,
        realization_offset: cfg.ensemble.realization_offset,
        time_grid: cfg.time_grid(),
    };
    expt.validate().map_err(|e| match e {
        spinbath::Error::InvalidConfig(problems) => Failure::Config(problems),
        other => Failure::Config(vec![other.to_string()]),
    })?;
    Ok(expt)
}

/// Rows of one realization (or the average) of one spin series.
fn series_rows(rows: &mut Vec<Row>, grid: &[f64], j: f64, tag: Tag, s: &RealizationSeries<f64>) {
    for (i, &t) in grid.iter().enumerate() {
        // For the two-level equal superposition the bound terms are |Γ| and
        // Σ_f F_f themselves (the α-weights are 1/2 each, doubled back).
        rows.push(Row {
            time: t,
            j,
            realization: tag,
            gamma_abs: s.gamma_abs[i],
            fidelity_mac: s.fidelity_mac[i],
            bound_decoherence: s.gamma_abs[i],
            bound_distinguishability: s.bound[i] - s.gamma_abs[i],
            bound_total: s.bound[i],
        });
    }
}

fn average_charts(run: &EnsembleRun<f64>, grid: &[f64]) -> (String, String) {
    let gamma_series: Vec<Series> = run
        .per_spin
        .iter()
        .map(|s| Series {
            label: format!("j = {}", s.spin),
            xs: grid,
            ys: &s.average.gamma_abs,
        })
        .collect();
    let fid_series: Vec<Series> = run
        .per_spin
        .iter()
        .map(|s| Series {
            label: format!("j = {}", s.spin),
            xs: grid,
            ys: &s.average.fidelity_mac,
        })
        .collect();
    (
        svg_line_chart("averaged |Γ|", "t [1/Ω]", "|Γ|", &gamma_series),
        svg_line_chart(
            "averaged macrofraction fidelity",
            "t [1/Ω]",
            "F",
            &fid_series,
        ),
    )
}

fn cmd_ensemble(cfg: &ScenarioConfig, svg: bool) -> Result<(), Failure> {
    let start = Instant::now();
    let expt = to_experiment(cfg)?;
    let run = run_experiment(&expt).map_err(runtime)?;
    let mut writer = RunWriter::new(&cfg.out, cfg.format)?;
    let result = write_ensemble(cfg, &run, svg, &mut writer, start);
    if result.is_err() {
        writer.discard();
    }
    result
}

fn write_ensemble(
    cfg: &ScenarioConfig,
    run: &EnsembleRun<f64>,
    svg: bool,
    writer: &mut RunWriter,
    start: Instant,
) -> Result<(), Failure> {
    let grid = &run.config.time_grid;
    let offset = run.config.realization_offset;
    let mut rows = Vec::new();
    for series in &run.per_spin {
        let j = series.spin.j::<f64>();
        for (r, realization) in series.realizations.iter().enumerate() {
            series_rows(
                &mut rows,
                grid,
                j,
                Tag::Realization(offset + r as u64),
                realization,
            );
        }
        series_rows(&mut rows, grid, j, Tag::Average, &series.average);
    }
    let mut outputs = vec![writer.write_table("ensemble", &rows)?];
    if svg {
        let (gamma_chart, fid_chart) = average_charts(run, grid);
        outputs.push(writer.write_svg("ensemble_gamma", &gamma_chart)?);
        outputs.push(writer.write_svg("ensemble_fidelity", &fid_chart)?);
    }
    outputs.push(writer.write_config(cfg)?);
    writer.write_manifest("ensemble", cfg, &outputs, start.elapsed().as_secs_f64())
}

fn cmd_demo_fig1(mut cfg: ScenarioConfig, svg: bool) -> Result<(), Failure> {
    let start = Instant::now();
    let expt = ExperimentConfigF64::reference_scenario(cfg.seed);

    // The demo pins the physics; record the effective values in the manifest.
    cfg.system.j = 0.5;
    cfg.system.m = expt.m;
    cfg.system.m_prime = expt.m_prime;
    cfg.system.levels = Some(vec![0.5, -0.5]);
    cfg.system.populations = None;
    cfg.environment.j_list = expt
        .environment_spins
        .iter()
        .map(|s| s.j::<f64>())
        .collect();
    cfg.environment.beta_omega = expt.beta_omega;
    cfg.couplings.low = expt.coupling.low;
    cfg.couplings.high = expt.coupling.high;
    cfg.fractions.unobserved = expt.unobserved_size;
    cfg.fractions.sizes = expt.macrofraction_sizes.clone();
    cfg.ensemble.realizations = expt.realizations;
    cfg.ensemble.realization_offset = expt.realization_offset;
    cfg.grid.t_min = expt.time_grid[0];
    cfg.grid.t_max = *expt.time_grid.last().unwrap();
    cfg.grid.steps = expt.time_grid.len();

    let run = run_experiment(&expt).map_err(runtime)?;
    let mut writer = RunWriter::new(&cfg.out, cfg.format)?;
    let result = write_demo(&cfg, &run, svg, &mut writer, start);
    if result.is_err() {
        writer.discard();
    }
    result
}

fn write_demo(
    cfg: &ScenarioConfig,
    run: &EnsembleRun<f64>,
    svg: bool,
    writer: &mut RunWriter,
    start: Instant,
) -> Result<(), Failure> {
    let grid = &run.config.time_grid;
    let offset = run.config.realization_offset;
    let mut sample = Vec::new();
    let mut average = Vec::new();
    for series in &run.per_spin {
        let j = series.spin.j::<f64>();
        series_rows(
            &mut sample,
            grid,
            j,
            Tag::Realization(offset),
            &series.realizations[0],
        );
        series_rows(&mut average, grid, j, Tag::Average, &series.average);
    }
    let mut outputs = vec![
        writer.write_table("fig1_sample", &sample)?,
        writer.write_table("fig1_average", &average)?,
    ];
    if svg {
        let (gamma_chart, fid_chart) = average_charts(run, grid);
        outputs.push(writer.write_svg("fig1_gamma", &gamma_chart)?);
        outputs.push(writer.write_svg("fig1_fidelity", &fid_chart)?);
    }
    outputs.push(writer.write_config(cfg)?);
    writer.write_manifest("demo fig1", cfg, &outputs, start.elapsed().as_secs_f64())
}

fn cmd_sbs_bound(cfg: &ScenarioConfig, svg: bool) -> Result<(), Failure> {
    let start = Instant::now();
    let system_spin = cfg.system_spin();
    let system = match &cfg.system.populations {
        Some(p) => SystemState::diagonal(system_spin, p),
        None => SystemState::equal_superposition(
            system_spin,
            cfg.system.levels.as_ref().expect("resolved"),
        ),
    }
    .map_err(|e| Failure::Config(vec![format!("system: {e}")]))?;

    let n_total = cfg.fractions.unobserved + cfg.fractions.sizes.iter().sum::<usize>();
    let couplings = sample_couplings(
        &cfg.coupling_distribution(),
        n_total,
        cfg.ensemble.realization_offset,
    );
    let layout =
        MacrofractionLayout::contiguous(cfg.fractions.unobserved, &cfg.fractions.sizes, couplings)
            .map_err(|e| Failure::Config(vec![e.to_string()]))?;

    let grid = cfg.time_grid();
    let mut rows = Vec::new();
    for &j in &cfg.environment.j_list {
        let spin = Spin::from_float(j).expect("validated");
        let env = EnvironmentSpec::new(spin, cfg.environment.beta_omega)
            .map_err(|e| Failure::Config(vec![e.to_string()]))?;
        for &t in &grid {
            let report = sbs_bound(&system, &layout, &env, t).map_err(runtime)?;
            let gamma =
                total_decoherence_factor(&layout, &env, cfg.system.m, cfg.system.m_prime, t)
                    .map_err(runtime)?;
            let fid = macrofraction_fidelity(&layout, &env, 0, cfg.system.m, cfg.system.m_prime, t)
                .map_err(runtime)?;
            rows.push(Row {
                time: t,
                j,
                realization: Tag::Single,
                gamma_abs: gamma.norm(),
                fidelity_mac: fid,
                bound_decoherence: report.decoherence,
                bound_distinguishability: report.distinguishability,
                bound_total: report.bound,
            });
        }
    }

    let mut writer = RunWriter::new(&cfg.out, cfg.format)?;
    let result = write_sbs_bound(cfg, &rows, &grid, svg, &mut writer, start);
    if result.is_err() {
        writer.discard();
    }
    result
}

fn write_sbs_bound(
    cfg: &ScenarioConfig,
    rows: &[Row],
    grid: &[f64],
    svg: bool,
    writer: &mut RunWriter,
    start: Instant,
) -> Result<(), Failure> {
    let mut outputs = vec![writer.write_table("sbs_bound", rows)?];
    if svg {
        let per_j: Vec<Vec<f64>> = cfg
            .environment
            .j_list
            .iter()
            .enumerate()
            .map(|(k, _)| {
                rows[k * grid.len()..(k + 1) * grid.len()]
                    .iter()
                    .map(|r| r.bound_total)
                    .collect()
            })
            .collect();
        let series: Vec<Series> = cfg
            .environment
            .j_list
            .iter()
            .enumerate()
            .map(|(k, &j)| Series {
                label: format!("j = {}", Spin::from_float(j).expect("validated")),
                xs: grid,
                ys: &per_j[k],
            })
            .collect();
        let chart = svg_line_chart("objectivity bound", "t [1/Ω]", "bound", &series);
        outputs.push(writer.write_svg("sbs_bound", &chart)?);
    }
    outputs.push(writer.write_config(cfg)?);
    writer.write_manifest("sbs-bound", cfg, &outputs, start.elapsed().as_secs_f64())
}
