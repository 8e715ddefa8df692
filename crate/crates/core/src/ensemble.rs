//! Ensembles of coupling realizations: seeded disorder draws, the sweep
//! over environment spin magnitudes, and deterministic (order-independent)
//! ensemble averaging of the resulting time series.

use nalgebra::ComplexField;
use rand::distributions::uniform::SampleUniform;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sbs::{
    macrofraction_fidelity, total_decoherence_factor, EnvironmentSpec, MacrofractionLayout,
};
use crate::spin::{twice_half_integer, Spin};

/// Families of coupling distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Uniform,
}

/// Distribution of the per-spin couplings `g_k/Ω`, with the base seed of
/// the ensemble. Realization `r` draws from an independent stream `r` of
/// the same seeded generator, so any subset of realizations can be
/// reproduced without generating the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingDistribution<T> {
    pub kind: CouplingKind,
    pub low: T,
    pub high: T,
    pub seed: u64,
}

impl<T: Real> CouplingDistribution<T> {
    /// Field-labeled validation problems (empty when valid).
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.low.is_finite() && self.low >= T::zero()) {
            out.push(format!(
                "{prefix}low: must be finite and >= 0, got {:?}",
                self.low.to_f64()
            ));
        }
        if !self.high.is_finite() {
            out.push(format!(
                "{prefix}high: must be finite, got {:?}",
                self.high.to_f64()
            ));
        }
        if self.low.is_finite() && self.high.is_finite() && self.low > self.high {
            out.push(format!("{prefix}low: must be <= high"));
        }
        out
    }
}

/// Draws the `n` couplings of realization `stream` (inclusive bounds).
pub fn sample_couplings<T: Real + SampleUniform>(
    dist: &CouplingDistribution<T>,
    n: usize,
    stream: u64,
) -> Vec<T> {
    debug_assert!(dist.problems("").is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    rng.set_stream(stream);
    let CouplingKind::Uniform = dist.kind;
    let u = Uniform::new_inclusive(dist.low, dist.high);
    (0..n).map(|_| u.sample(&mut rng)).collect()
}

/// A disorder-averaged experiment: sweep environment spin magnitudes,
/// redraw couplings per realization, evaluate `|Γ|`, the first
/// macrofraction fidelity, and the two-level objectivity bound on a
/// common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    /// Environment spin magnitudes to sweep (one series per entry).
    pub environment_spins: Vec<Spin>,
    pub beta_omega: T,
    /// Central levels whose branches are compared.
    pub m: T,
    pub m_prime: T,
    pub unobserved_size: usize,
    pub macrofraction_sizes: Vec<usize>,
    pub coupling: CouplingDistribution<T>,
    pub realizations: usize,
    /// First realization stream; lets a run be split into exact segments.
    pub realization_offset: u64,
    pub time_grid: Vec<T>,
}

impl<T: Real> ExperimentConfig<T> {
    /// Total number of environment spins per realization.
    pub fn n_total(&self) -> usize {
        self.unobserved_size + self.macrofraction_sizes.iter().sum::<usize>()
    }

    /// Checks every field, collecting all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.environment_spins.is_empty() {
            problems.push("environment_spins: must not be empty".into());
        }
        if !(self.beta_omega.is_finite() && self.beta_omega >= T::zero()) {
            problems.push(format!(
                "beta_omega: must be finite and >= 0, got {:?}",
                self.beta_omega.to_f64()
            ));
        }
        for (name, v) in [("m", self.m), ("m_prime", self.m_prime)] {
            if twice_half_integer(v).is_none() {
                problems.push(format!(
                    "{name}: must be an exact integer or half-integer, got {:?}",
                    v.to_f64()
                ));
            }
        }
        if self.unobserved_size == 0 {
            problems.push("unobserved_size: must be >= 1".into());
        }
        if self.macrofraction_sizes.is_empty() {
            problems.push("macrofraction_sizes: must not be empty".into());
        } else if self.macrofraction_sizes.contains(&0) {
            problems.push("macrofraction_sizes: every size must be >= 1".into());
        }
        problems.extend(self.coupling.problems("coupling."));
        if self.realizations == 0 {
            problems.push("realizations: must be >= 1".into());
        }
        if self.time_grid.is_empty() {
            problems.push("time_grid: must not be empty".into());
        } else {
            if self.time_grid.iter().any(|t| !t.is_finite()) {
                problems.push("time_grid: every time must be finite".into());
            }
            if self.time_grid.windows(2).any(|w| w[0] > w[1]) {
                problems.push("time_grid: times must be non-decreasing".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// The reference scenario: a spin-1/2 system split by `m = ∓1/2`
    /// against environments of 5 unobserved + 5 observed spins, couplings
    /// uniform on `[0, 10]`, `βΩ = 0.9`, sweeping `j = 1/2 … 5/2` over
    /// 100 realizations on `t ∈ [0, 30]`.
    pub fn reference_scenario(seed: u64) -> Self {
        Self {
            environment_spins: (1..=5).map(|tj| Spin::new(tj).unwrap()).collect(),
            beta_omega: crate::real::lit(0.9),
            m: crate::real::lit(-0.5),
            m_prime: crate::real::lit(0.5),
            unobserved_size: 5,
            macrofraction_sizes: vec![5],
            coupling: CouplingDistribution {
                kind: CouplingKind::Uniform,
                low: T::zero(),
                high: crate::real::lit(10.0),
                seed,
            },
            realizations: 100,
            realization_offset: 0,
            time_grid: linspace(T::zero(), crate::real::lit(30.0), 600),
        }
    }
}

/// `points` evenly spaced values from `start` to `end` inclusive.
pub fn linspace<T: Real>(start: T, end: T, points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => {
            let step = (end - start) / T::from_usize(n - 1).unwrap();
            let mut out: Vec<T> = (0..n)
                .map(|i| start + step * T::from_usize(i).unwrap())
                .collect();
            out[n - 1] = end;
            out
        }
    }
}

/// The three observables of one realization, each on the config's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSeries<T> {
    /// `|Γ(t)|` of the unobserved fraction.
    pub gamma_abs: Vec<T>,
    /// Fidelity of the first macrofraction.
    pub fidelity_mac: Vec<T>,
    /// Two-level equal-superposition bound: `|Γ| + Σ_f F_f`.
    pub bound: Vec<T>,
}

/// All realizations and their ensemble average for one spin magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSeries<T> {
    pub spin: Spin,
    pub realizations: Vec<RealizationSeries<T>>,
    pub average: RealizationSeries<T>,
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun<T> {
    pub config: ExperimentConfig<T>,
    pub per_spin: Vec<SpinSeries<T>>,
}

fn realize<T: Real + SampleUniform>(
    config: &ExperimentConfig<T>,
    r: u64,
) -> Result<Vec<RealizationSeries<T>>> {
    let couplings = sample_couplings(
        &config.coupling,
        config.n_total(),
        config.realization_offset + r,
    );
    let layout = MacrofractionLayout::contiguous(
        config.unobserved_size,
        &config.macrofraction_sizes,
        couplings,
    )?;
    config
        .environment_spins
        .iter()
        .map(|&spin| {
            let env = EnvironmentSpec::new(spin, config.beta_omega)?;
            let nt = config.time_grid.len();
            let mut series = RealizationSeries {
                gamma_abs: Vec::with_capacity(nt),
                fidelity_mac: Vec::with_capacity(nt),
                bound: Vec::with_capacity(nt),
            };
            for &t in &config.time_grid {
                let g =
                    total_decoherence_factor(&layout, &env, config.m, config.m_prime, t)?.modulus();
                let mut fidelity_sum = T::zero();
                let mut first = T::one();
                for f in 0..layout.fraction_count() {
                    let fv = macrofraction_fidelity(&layout, &env, f, config.m, config.m_prime, t)?;
                    if f == 0 {
                        first = fv;
                    }
                    fidelity_sum += fv;
                }
                series.gamma_abs.push(g);
                series.fidelity_mac.push(first);
                series.bound.push(g + fidelity_sum);
            }
            Ok(series)
        })
        .collect()
}

/// Sums with a fixed balanced tree, so the result is independent of how
/// the values were produced (and exactly splittable at the midpoint).
fn pairwise_sum<T: Real>(values: &[T]) -> T {
    match values.len() {
        0 => T::zero(),
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

fn average_series<T: Real>(
    realizations: &[RealizationSeries<T>],
    nt: usize,
) -> RealizationSeries<T> {
    let n = T::from_usize(realizations.len()).unwrap();
    let mut buf = vec![T::zero(); realizations.len()];
    let mut column = |field: fn(&RealizationSeries<T>) -> &Vec<T>| {
        let mut out = Vec::with_capacity(nt);
        for i in 0..nt {
            for (r, series) in realizations.iter().enumerate() {
                buf[r] = field(series)[i];
            }
            out.push(pairwise_sum(&buf) / n);
        }
        out
    };
    RealizationSeries {
        gamma_abs: column(|s| &s.gamma_abs),
        fidelity_mac: column(|s| &s.fidelity_mac),
        bound: column(|s| &s.bound),
    }
}

fn assemble<T: Real>(
    config: &ExperimentConfig<T>,
    rows: Vec<Vec<RealizationSeries<T>>>,
) -> EnsembleRun<T> {
    let mut per_spin: Vec<SpinSeries<T>> = config
        .environment_spins
        .iter()
        .map(|&spin| SpinSeries {
            spin,
            realizations: Vec::with_capacity(rows.len()),
            average: RealizationSeries {
                gamma_abs: Vec::new(),
                fidelity_mac: Vec::new(),
                bound: Vec::new(),
            },
        })
        .collect();
    for row in rows {
        for (s, series) in row.into_iter().enumerate() {
            per_spin[s].realizations.push(series);
        }
    }
    let nt = config.time_grid.len();
    for spin_series in &mut per_spin {
        spin_series.average = average_series(&spin_series.realizations, nt);
    }
    EnsembleRun {
        config: config.clone(),
        per_spin,
    }
}

/// Runs the experiment with realizations evaluated in parallel. The
/// output is bitwise identical to [`run_experiment_serial`].
pub fn run_experiment<T: Real + SampleUniform>(
    config: &ExperimentConfig<T>,
) -> Result<EnsembleRun<T>> {
    config.validate()?;
    let rows = (0..config.realizations as u64)
        .into_par_iter()
        .map(|r| realize(config, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(config, rows))
}

/// Single-threaded reference path for [`run_experiment`].
pub fn run_experiment_serial<T: Real + SampleUniform>(
    config: &ExperimentConfig<T>,
) -> Result<EnsembleRun<T>> {
    config.validate()?;
    let rows = (0..config.realizations as u64)
        .map(|r| realize(config, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(config, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(realizations: usize, offset: u64) -> ExperimentConfig<f64> {
        ExperimentConfig {
            environment_spins: vec![Spin::new(1).unwrap(), Spin::new(3).unwrap()],
            beta_omega: 0.9,
            m: -0.5,
            m_prime: 0.5,
            unobserved_size: 2,
            macrofraction_sizes: vec![2],
            coupling: CouplingDistribution {
                kind: CouplingKind::Uniform,
                low: 0.0,
                high: 10.0,
                seed: 7,
            },
            realizations,
            realization_offset: offset,
            time_grid: linspace(0.0, 5.0, 16),
        }
    }

    #[test]
    fn linspace_hits_both_endpoints() {
        let g = linspace(0.0, 30.0, 600);
        assert_eq!(g.len(), 600);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[599], 30.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(linspace(2.0, 9.0, 1), vec![2.0]);
        assert!(linspace::<f64>(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=103).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 103.0 * 104.0 / 2.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
        assert_eq!(pairwise_sum(&[4.25]), 4.25);
    }

    #[test]
    fn coupling_draws_are_stream_addressable() {
        let dist = CouplingDistribution {
            kind: CouplingKind::Uniform,
            low: 1.0,
            high: 4.0,
            seed: 11,
        };
        let a = sample_couplings(&dist, 1000, 0);
        let b = sample_couplings(&dist, 1000, 0);
        let c = sample_couplings(&dist, 1000, 1);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|g| (1.0..=4.0).contains(g)));
        // A different seed changes the draws.
        let other = CouplingDistribution { seed: 12, ..dist };
        assert_ne!(sample_couplings(&other, 1000, 0), a);
    }

    #[test]
    fn validation_collects_labeled_problems() {
        let config = ExperimentConfig::<f64> {
            environment_spins: vec![],
            beta_omega: -1.0,
            m: 0.3,
            m_prime: 0.5,
            unobserved_size: 0,
            macrofraction_sizes: vec![],
            coupling: CouplingDistribution {
                kind: CouplingKind::Uniform,
                low: 5.0,
                high: 2.0,
                seed: 0,
            },
            realizations: 0,
            realization_offset: 0,
            time_grid: vec![1.0, 0.5],
        };
        let Err(Error::InvalidConfig(problems)) = config.validate() else {
            panic!("expected InvalidConfig");
        };
        assert!(problems.len() >= 8, "{problems:?}");
        for needle in [
            "environment_spins",
            "beta_omega",
            "m:",
            "unobserved_size",
            "macrofraction_sizes",
            "coupling.low",
            "realizations",
            "time_grid",
        ] {
            assert!(
                problems.iter().any(|p| p.contains(needle)),
                "missing {needle}: {problems:?}"
            );
        }
    }

    #[test]
    fn reference_scenario_is_valid() {
        let config = ExperimentConfig::<f64>::reference_scenario(42);
        config.validate().unwrap();
        assert_eq!(config.n_total(), 10);
        assert_eq!(config.environment_spins.len(), 5);
        assert_eq!(config.time_grid.len(), 600);
    }

    #[test]
    fn runs_are_deterministic_and_parallel_matches_serial() {
        let config = small_config(6, 0);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a, b);
        let s = run_experiment_serial(&config).unwrap();
        assert_eq!(a, s);
        // Sanity on shapes and values.
        assert_eq!(a.per_spin.len(), 2);
        for spin_series in &a.per_spin {
            assert_eq!(spin_series.realizations.len(), 6);
            assert_eq!(spin_series.average.gamma_abs.len(), 16);
            assert_eq!(spin_series.average.gamma_abs[0], 1.0);
            assert!((spin_series.average.bound[0] - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn average_equals_elementwise_mean() {
        let run = run_experiment(&small_config(6, 3)).unwrap();
        for spin_series in &run.per_spin {
            for i in 0..16 {
                let naive: f64 = spin_series
                    .realizations
                    .iter()
                    .map(|r| r.bound[i])
                    .sum::<f64>()
                    / 6.0;
                assert!((spin_series.average.bound[i] - naive).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn averaging_is_linear_over_exact_halves() {
        let full = run_experiment(&small_config(8, 0)).unwrap();
        let first = run_experiment(&small_config(4, 0)).unwrap();
        let second = run_experiment(&small_config(4, 4)).unwrap();
        for s in 0..2 {
            // The halves see exactly the realizations of the full run.
            assert_eq!(
                full.per_spin[s].realizations[..4],
                first.per_spin[s].realizations[..]
            );
            assert_eq!(
                full.per_spin[s].realizations[4..],
                second.per_spin[s].realizations[..]
            );
            for i in 0..16 {
                let combo = 0.5
                    * (first.per_spin[s].average.gamma_abs[i]
                        + second.per_spin[s].average.gamma_abs[i]);
                assert!(
                    (full.per_spin[s].average.gamma_abs[i] - combo).abs() <= 1e-14,
                    "spin {s}, time {i}"
                );
            }
        }
    }

    #[test]
    fn degenerate_distribution_collapses_the_ensemble() {
        let mut config = small_config(8, 0);
        config.coupling.low = 3.0;
        config.coupling.high = 3.0;
        let run = run_experiment(&config).unwrap();
        for spin_series in &run.per_spin {
            for r in &spin_series.realizations {
                assert_eq!(r, &spin_series.realizations[0]);
            }
            // Eight identical realizations average to themselves exactly.
            assert_eq!(spin_series.average, spin_series.realizations[0]);
        }
    }
}
