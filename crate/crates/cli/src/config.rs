//! Scenario configuration: a TOML file plus flag overrides resolve into a
//! fully-defaulted, validated [`ScenarioConfig`].
//!
//! Parsing collects *all* problems, each tagged with its key path, instead
//! of stopping at the first; unknown keys are rejected by name. The
//! resolved config round-trips losslessly through the file format
//! ([`ScenarioConfig::to_raw`]).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinbath::ensemble::{CouplingDistribution, CouplingKind};
use spinbath::spin::twice_half_integer;
use spinbath::Spin;

/// What a run computes; implied by the subcommand and cross-checked against
/// the config file's `mode` key when that is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MeasurementLimit,
    Thermal,
    Ensemble,
    SbsBound,
    ShortTime,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::MeasurementLimit => "measurement_limit",
            Mode::Thermal => "thermal",
            Mode::Ensemble => "ensemble",
            Mode::SbsBound => "sbs_bound",
            Mode::ShortTime => "short_time",
        }
    }
}

/// Dataset encoding for table-producing commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

/// Environment state family for the static-coupling decoherence factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StateFamily {
    /// Maximally mixed.
    Mixed,
    /// Spin-coherent state at polar angle `theta`, azimuth `phi`.
    Coherent,
    /// Thermal along the dephasing axis at `environment.beta_omega`.
    ThermalZ,
}

impl StateFamily {
    pub fn name(self) -> &'static str {
        match self {
            StateFamily::Mixed => "mixed",
            StateFamily::Coherent => "coherent",
            StateFamily::ThermalZ => "thermal-z",
        }
    }
}

/// Coupling distribution family (config-file spelling).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingFamily {
    Uniform,
}

// ---------------------------------------------------------------------------
// Raw layer: what the file actually said. Every field optional; unknown keys
// rejected by serde with the offending name in the message.
// ---------------------------------------------------------------------------

macro_rules! opt {
    ($(#[$meta:meta])* pub struct $name:ident { $($(#[$fm:meta])* pub $field:ident : $ty:ty,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$fm])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

opt! {
    /// Top-level raw config.
    pub struct RawConfig {
        pub mode: Mode,
        pub seed: u64,
        pub out: PathBuf,
        pub format: OutputFormat,
        pub single: RawSingle,
        pub system: RawSystem,
        pub environment: RawEnvironment,
        pub couplings: RawCouplings,
        pub fractions: RawFractions,
        pub ensemble: RawEnsemble,
        pub grid: RawGrid,
    }
}

opt! {
    /// Single-point query parameters.
    pub struct RawSingle {
        pub theta: f64,
        pub phi: f64,
        pub g: f64,
        pub t: f64,
        pub delta_m: f64,
        pub state: StateFamily,
        pub n_spins: usize,
        pub mean_g_sq: f64,
        pub large_j: bool,
    }
}

opt! {
    /// Central system.
    pub struct RawSystem {
        pub j: f64,
        pub m: f64,
        pub m_prime: f64,
        pub levels: Vec<f64>,
        pub populations: Vec<f64>,
    }
}

opt! {
    /// Environment spins.
    pub struct RawEnvironment {
        pub j_list: Vec<f64>,
        pub beta_omega: f64,
    }
}

opt! {
    /// Coupling distribution.
    pub struct RawCouplings {
        pub kind: CouplingFamily,
        pub low: f64,
        pub high: f64,
    }
}

opt! {
    /// Environment partition sizes.
    pub struct RawFractions {
        pub unobserved: usize,
        pub sizes: Vec<usize>,
    }
}

opt! {
    /// Disorder-averaging controls.
    pub struct RawEnsemble {
        pub realizations: usize,
        pub realization_offset: u64,
    }
}

opt! {
    /// Time grid.
    pub struct RawGrid {
        pub t_min: f64,
        pub t_max: f64,
        pub steps: usize,
    }
}

/// Reads and parses a raw config file. A missing or malformed file is a
/// configuration error; TOML reports unknown keys by name and position.
pub fn load_raw(path: &Path) -> Result<RawConfig, Vec<String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| vec![format!("config: cannot read {}: {e}", path.display())])?;
    toml::from_str(&text).map_err(|e| vec![format!("config: {}: {e}", path.display())])
}

// ---------------------------------------------------------------------------
// Resolved layer: every field concrete, defaults applied, validated.
// ---------------------------------------------------------------------------

/// Fully resolved run configuration; serialized verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub single: SingleParams,
    pub system: SystemParams,
    pub environment: EnvironmentParams,
    pub couplings: CouplingParams,
    pub fractions: FractionParams,
    pub ensemble: EnsembleParams,
    pub grid: GridParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleParams {
    pub theta: f64,
    pub phi: f64,
    pub g: f64,
    pub t: f64,
    pub delta_m: f64,
    pub state: StateFamily,
    pub n_spins: usize,
    pub mean_g_sq: f64,
    pub large_j: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    pub j: f64,
    pub m: f64,
    pub m_prime: f64,
    /// Levels of the equal superposition; `None` when `populations` given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Populations of a fully dephased state, ordered `m = +j_S … -j_S`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentParams {
    pub j_list: Vec<f64>,
    pub beta_omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingParams {
    pub kind: CouplingFamily,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionParams {
    pub unobserved: usize,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleParams {
    pub realizations: usize,
    pub realization_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridParams {
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
}

impl ScenarioConfig {
    /// The raw (file-format) image of this config, with every key present.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            mode: Some(self.mode),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            format: Some(self.format),
            single: Some(RawSingle {
                theta: Some(self.single.theta),
                phi: Some(self.single.phi),
                g: Some(self.single.g),
                t: Some(self.single.t),
                delta_m: Some(self.single.delta_m),
                state: Some(self.single.state),
                n_spins: Some(self.single.n_spins),
                mean_g_sq: Some(self.single.mean_g_sq),
                large_j: Some(self.single.large_j),
            }),
            system: Some(RawSystem {
                j: Some(self.system.j),
                m: Some(self.system.m),
                m_prime: Some(self.system.m_prime),
                levels: self.system.levels.clone(),
                populations: self.system.populations.clone(),
            }),
            environment: Some(RawEnvironment {
                j_list: Some(self.environment.j_list.clone()),
                beta_omega: Some(self.environment.beta_omega),
            }),
            couplings: Some(RawCouplings {
                kind: Some(self.couplings.kind),
                low: Some(self.couplings.low),
                high: Some(self.couplings.high),
            }),
            fractions: Some(RawFractions {
                unobserved: Some(self.fractions.unobserved),
                sizes: Some(self.fractions.sizes.clone()),
            }),
            ensemble: Some(RawEnsemble {
                realizations: Some(self.ensemble.realizations),
                realization_offset: Some(self.ensemble.realization_offset),
            }),
            grid: Some(RawGrid {
                t_min: Some(self.grid.t_min),
                t_max: Some(self.grid.t_max),
                steps: Some(self.grid.steps),
            }),
        }
    }

    /// Environment spin used by single-point queries: the first of the list.
    pub fn first_environment_spin(&self) -> Spin {
        Spin::from_float(self.environment.j_list[0]).expect("validated")
    }

    /// System spin.
    pub fn system_spin(&self) -> Spin {
        Spin::from_float(self.system.j).expect("validated")
    }

    /// The coupling distribution seeded for this run.
    pub fn coupling_distribution(&self) -> CouplingDistribution<f64> {
        let CouplingFamily::Uniform = self.couplings.kind;
        CouplingDistribution {
            kind: CouplingKind::Uniform,
            low: self.couplings.low,
            high: self.couplings.high,
            seed: self.seed,
        }
    }

    /// The run's time grid.
    pub fn time_grid(&self) -> Vec<f64> {
        spinbath::ensemble::linspace(self.grid.t_min, self.grid.t_max, self.grid.steps)
    }
}

/// Applies defaults and resolves the raw config for the given mode.
///
/// The only cross-field default: `system.m`, `system.m_prime` default to
/// the extreme levels `∓ j_S`, and `system.levels` defaults to the full
/// ladder when neither `levels` nor `populations` is given.
pub fn resolve(mode: Mode, raw: &RawConfig) -> Result<ScenarioConfig, Vec<String>> {
    if let Some(file_mode) = raw.mode {
        if file_mode != mode {
            return Err(vec![format!(
                "mode: config file says {} but the subcommand implies {}",
                file_mode.name(),
                mode.name()
            )]);
        }
    }
    let single = raw.single.clone().unwrap_or_default();
    let system = raw.system.clone().unwrap_or_default();
    let environment = raw.environment.clone().unwrap_or_default();
    let couplings = raw.couplings.clone().unwrap_or_default();
    let fractions = raw.fractions.clone().unwrap_or_default();
    let ensemble = raw.ensemble.clone().unwrap_or_default();
    let grid = raw.grid.clone().unwrap_or_default();

    let j_s = system.j.unwrap_or(0.5);
    let levels = match (&system.levels, &system.populations) {
        (None, None) => Some(full_ladder(j_s)),
        (levels, _) => levels.clone(),
    };

    Ok(ScenarioConfig {
        mode,
        seed: raw.seed.unwrap_or(42),
        out: raw.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        format: raw.format.unwrap_or(OutputFormat::Csv),
        single: SingleParams {
            theta: single.theta.unwrap_or(std::f64::consts::FRAC_PI_4),
            phi: single.phi.unwrap_or(0.0),
            g: single.g.unwrap_or(2.0),
            t: single.t.unwrap_or(1.0),
            delta_m: single.delta_m.unwrap_or(1.0),
            state: single.state.unwrap_or(StateFamily::Mixed),
            n_spins: single.n_spins.unwrap_or(5),
            mean_g_sq: single.mean_g_sq.unwrap_or(100.0 / 3.0),
            large_j: single.large_j.unwrap_or(false),
        },
        system: SystemParams {
            j: j_s,
            m: system.m.unwrap_or(-j_s),
            m_prime: system.m_prime.unwrap_or(j_s),
            levels,
            populations: system.populations.clone(),
        },
        environment: EnvironmentParams {
            j_list: environment
                .j_list
                .unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5]),
            beta_omega: environment.beta_omega.unwrap_or(0.9),
        },
        couplings: CouplingParams {
            kind: couplings.kind.unwrap_or(CouplingFamily::Uniform),
            low: couplings.low.unwrap_or(0.0),
            high: couplings.high.unwrap_or(10.0),
        },
        fractions: FractionParams {
            unobserved: fractions.unobserved.unwrap_or(5),
            sizes: fractions.sizes.unwrap_or_else(|| vec![5]),
        },
        ensemble: EnsembleParams {
            realizations: ensemble.realizations.unwrap_or(100),
            realization_offset: ensemble.realization_offset.unwrap_or(0),
        },
        grid: GridParams {
            t_min: grid.t_min.unwrap_or(0.0),
            t_max: grid.t_max.unwrap_or(30.0),
            steps: grid.steps.unwrap_or(600),
        },
    })
}

fn full_ladder(j_s: f64) -> Vec<f64> {
    // Valid only when j_s itself validates; checked alongside everything else.
    match Spin::from_float(j_s) {
        Ok(s) => s.magnetic_numbers::<f64>(),
        Err(_) => vec![j_s],
    }
}

/// Validates every resolved field, returning all problems with key paths.
pub fn validate(cfg: &ScenarioConfig) -> Vec<String> {
    let mut problems = Vec::new();

    // Central system.
    let system_spin = match Spin::from_float(cfg.system.j) {
        Ok(s) => Some(s),
        Err(e) => {
            problems.push(format!("system.j: {e}"));
            None
        }
    };
    for (key, v) in [
        ("system.m", cfg.system.m),
        ("system.m_prime", cfg.system.m_prime),
    ] {
        if twice_half_integer(v).is_none() {
            problems.push(format!(
                "{key}: must be an exact integer or half-integer, got {v}"
            ));
        } else if let Some(s) = system_spin {
            if s.validate_magnetic(v).is_err() {
                problems.push(format!(
                    "{key}: {v} is not a level of a spin-{} system",
                    cfg.system.j
                ));
            }
        }
    }
    if cfg.system.levels.is_some() && cfg.system.populations.is_some() {
        problems.push("system.levels: give either levels or populations, not both".into());
    }
    if let (Some(levels), Some(s)) = (&cfg.system.levels, system_spin) {
        if levels.is_empty() {
            problems.push("system.levels: must not be empty".into());
        }
        let mut seen = Vec::new();
        for (i, &m) in levels.iter().enumerate() {
            if s.validate_magnetic(m).is_err() {
                problems.push(format!(
                    "system.levels[{i}]: {m} is not a level of a spin-{} system",
                    cfg.system.j
                ));
            } else if seen.contains(&m.to_bits()) {
                problems.push(format!("system.levels[{i}]: level {m} listed twice"));
            }
            seen.push(m.to_bits());
        }
    }
    if let (Some(pops), Some(s)) = (&cfg.system.populations, system_spin) {
        if pops.len() != s.dimension() {
            problems.push(format!(
                "system.populations: expected {} entries for spin-{}, got {}",
                s.dimension(),
                cfg.system.j,
                pops.len()
            ));
        }
        let mut total = 0.0;
        for (i, &p) in pops.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                problems.push(format!(
                    "system.populations[{i}]: must be finite and >= 0, got {p}"
                ));
            } else {
                total += p;
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            problems.push(format!("system.populations: sum to {total:.17e}, not 1"));
        }
    }

    // Environment.
    if cfg.environment.j_list.is_empty() {
        problems.push("environment.j_list: must not be empty".into());
    }
    for (i, &j) in cfg.environment.j_list.iter().enumerate() {
        if let Err(e) = Spin::from_float(j) {
            problems.push(format!("environment.j_list[{i}]: {e}"));
        }
    }
    if !(cfg.environment.beta_omega.is_finite() && cfg.environment.beta_omega >= 0.0) {
        problems.push(format!(
            "environment.beta_omega: must be finite and >= 0, got {}",
            cfg.environment.beta_omega
        ));
    }

    // Couplings: reuse the library's field checks under our key path.
    problems.extend(cfg.coupling_distribution().problems("couplings."));

    // Fractions.
    if cfg.fractions.unobserved == 0 {
        problems.push("fractions.unobserved: must be >= 1".into());
    }
    if cfg.fractions.sizes.is_empty() {
        problems.push("fractions.sizes: must not be empty".into());
    }
    for (i, &s) in cfg.fractions.sizes.iter().enumerate() {
        if s == 0 {
            problems.push(format!("fractions.sizes[{i}]: must be >= 1"));
        }
    }

    // Ensemble.
    if cfg.ensemble.realizations == 0 {
        problems.push("ensemble.realizations: must be >= 1".into());
    }

    // Grid.
    if cfg.grid.steps == 0 {
        problems.push("grid.steps: must be >= 1".into());
    }
    for (key, v) in [
        ("grid.t_min", cfg.grid.t_min),
        ("grid.t_max", cfg.grid.t_max),
    ] {
        if !v.is_finite() {
            problems.push(format!("{key}: must be finite, got {v}"));
        }
    }
    if cfg.grid.t_min.is_finite() && cfg.grid.t_max.is_finite() && cfg.grid.t_min > cfg.grid.t_max {
        problems.push("grid.t_min: must be <= grid.t_max".into());
    }

    // Single-point parameters.
    let s = &cfg.single;
    if !(s.theta.is_finite() && (0.0..=std::f64::consts::PI).contains(&s.theta)) {
        problems.push(format!(
            "single.theta: must lie in [0, pi], got {}",
            s.theta
        ));
    }
    if !s.phi.is_finite() {
        problems.push(format!("single.phi: must be finite, got {}", s.phi));
    }
    if !(s.g.is_finite() && s.g >= 0.0) {
        problems.push(format!("single.g: must be finite and >= 0, got {}", s.g));
    }
    if !s.t.is_finite() {
        problems.push(format!("single.t: must be finite, got {}", s.t));
    }
    if !s.delta_m.is_finite() {
        problems.push(format!("single.delta_m: must be finite, got {}", s.delta_m));
    }
    if s.n_spins == 0 {
        problems.push("single.n_spins: must be >= 1".into());
    }
    if !(s.mean_g_sq.is_finite() && s.mean_g_sq >= 0.0) {
        problems.push(format!(
            "single.mean_g_sq: must be finite and >= 0, got {}",
            s.mean_g_sq
        ));
    }

    problems
}

/// Convenience: resolve then validate, returning the full problem list.
pub fn resolve_and_validate(mode: Mode, raw: &RawConfig) -> Result<ScenarioConfig, Vec<String>> {
    let cfg = resolve(mode, raw)?;
    let problems = validate(&cfg);
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(problems)
    }
}
