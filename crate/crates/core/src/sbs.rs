//! Aggregation over many environment spins: the partition of the
//! environment into unobserved spins and observed macrofractions, the
//! objectivity bound built from decoherence and distinguishability terms,
//! and the short-time Gaussian envelopes with their variance/information
//! prefactors.

use nalgebra::ComplexField;

use crate::error::{Error, Result};
use crate::real::{lit, re, Real, C};
use crate::spin::{twice_half_integer, Spin};
use crate::state::SystemState;
use crate::thermal::{fidelity_thermal, gamma_thermal, ThermalParams};

/// Environment species shared by all spins: magnitude and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentSpec<T> {
    pub spin: Spin,
    pub beta_omega: T,
}

impl<T: Real> EnvironmentSpec<T> {
    pub fn new(spin: Spin, beta_omega: T) -> Result<Self> {
        if !(beta_omega.is_finite() && beta_omega >= T::zero()) {
            return Err(Error::InvalidConfig(vec![format!(
                "beta_omega: must be finite and >= 0, got {:?}",
                beta_omega.to_f64()
            )]));
        }
        Ok(Self { spin, beta_omega })
    }
}

/// Partition of `N` environment spins into the unobserved set and the
/// observed macrofractions, together with per-spin couplings `g_k/Ω` and
/// optional level-splitting multipliers `Ω_k/Ω` (default 1).
///
/// Index sets are pairwise disjoint, within range, and non-empty (an empty
/// macrofraction list is allowed for decoherence-only studies). Spins in
/// no set are simply idle.
#[derive(Debug, Clone, PartialEq)]
pub struct MacrofractionLayout<T> {
    n_total: usize,
    unobserved: Vec<usize>,
    macrofractions: Vec<Vec<usize>>,
    couplings: Vec<T>,
    splittings: Vec<T>,
}

impl<T: Real> MacrofractionLayout<T> {
    pub fn new(
        n_total: usize,
        unobserved: Vec<usize>,
        macrofractions: Vec<Vec<usize>>,
        couplings: Vec<T>,
        splittings: Option<Vec<T>>,
    ) -> Result<Self> {
        let splittings = splittings.unwrap_or_else(|| vec![T::one(); n_total]);
        let mut problems = Vec::new();

        if couplings.len() != n_total {
            problems.push(format!(
                "couplings: expected {n_total} entries, got {}",
                couplings.len()
            ));
        }
        if couplings
            .iter()
            .any(|g| !(g.is_finite() && *g >= T::zero()))
        {
            problems.push("couplings: every entry must be finite and >= 0".into());
        }
        if splittings.len() != n_total {
            problems.push(format!(
                "splittings: expected {n_total} entries, got {}",
                splittings.len()
            ));
        }
        if splittings
            .iter()
            .any(|w| !(w.is_finite() && *w > T::zero()))
        {
            problems.push("splittings: every entry must be finite and > 0".into());
        }

        if unobserved.is_empty() {
            problems.push("unobserved: must not be empty".into());
        }
        let mut seen = vec![false; n_total];
        let mut mark = |name: String, set: &[usize], problems: &mut Vec<String>| {
            for &k in set {
                if k >= n_total {
                    problems.push(format!("{name}: index {k} out of range 0..{n_total}"));
                } else if seen[k] {
                    problems.push(format!("{name}: index {k} appears in more than one set"));
                } else {
                    seen[k] = true;
                }
            }
        };
        mark("unobserved".into(), &unobserved, &mut problems);
        for (f, set) in macrofractions.iter().enumerate() {
            if set.is_empty() {
                problems.push(format!("macrofraction {f}: must not be empty"));
            }
            mark(format!("macrofraction {f}"), set, &mut problems);
        }

        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        Ok(Self {
            n_total,
            unobserved,
            macrofractions,
            couplings,
            splittings,
        })
    }

    /// Contiguous layout: spins `0..u` unobserved, then one block per
    /// macrofraction size, with unit splittings.
    pub fn contiguous(
        unobserved_size: usize,
        fraction_sizes: &[usize],
        couplings: Vec<T>,
    ) -> Result<Self> {
        let mut next = unobserved_size;
        let mut fractions = Vec::with_capacity(fraction_sizes.len());
        for &size in fraction_sizes {
            fractions.push((next..next + size).collect());
            next += size;
        }
        Self::new(
            next,
            (0..unobserved_size).collect(),
            fractions,
            couplings,
            None,
        )
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn unobserved(&self) -> &[usize] {
        &self.unobserved
    }

    pub fn fraction_count(&self) -> usize {
        self.macrofractions.len()
    }

    pub fn fraction(&self, f: usize) -> &[usize] {
        &self.macrofractions[f]
    }

    pub fn couplings(&self) -> &[T] {
        &self.couplings
    }

    pub fn splittings(&self) -> &[T] {
        &self.splittings
    }

    /// Empirical mean of `g²` over an index set; the prefactor the
    /// short-time envelopes share with the exact products.
    pub fn mean_coupling_sq(&self, indices: &[usize]) -> T {
        if indices.is_empty() {
            return T::zero();
        }
        let mut acc = T::zero();
        for &k in indices {
            acc += self.couplings[k] * self.couplings[k];
        }
        acc / T::from_usize(indices.len()).unwrap()
    }

    /// Single-spin parameters for spin `k`, with its splitting multiplier
    /// `w = Ω_k/Ω` folded into temperature, coupling and time.
    fn spin_params(
        &self,
        env: &EnvironmentSpec<T>,
        k: usize,
        m: T,
        m_prime: T,
        t: T,
    ) -> ThermalParams<T> {
        let w = self.splittings[k];
        ThermalParams {
            spin: env.spin,
            beta_omega: env.beta_omega * w,
            g_over_omega: self.couplings[k] / w,
            m,
            m_prime,
            t: t * w,
        }
    }
}

fn validate_levels<T: Real>(m: T, m_prime: T) -> Result<()> {
    for (name, v) in [("m", m), ("m_prime", m_prime)] {
        if twice_half_integer(v).is_none() {
            return Err(Error::InvalidConfig(vec![format!(
                "{name}: must be an exact integer or half-integer, got {:?}",
                v.to_f64()
            )]));
        }
    }
    Ok(())
}

/// Product of single-spin decoherence factors over an index set
/// (empty set → 1).
fn product_gamma<T: Real>(
    layout: &MacrofractionLayout<T>,
    env: &EnvironmentSpec<T>,
    indices: &[usize],
    m: T,
    m_prime: T,
    t: T,
) -> C<T> {
    let mut acc = re(T::one());
    for &k in indices {
        acc *= gamma_thermal(&layout.spin_params(env, k, m, m_prime, t));
    }
    acc
}

/// Product of single-spin fidelities over an index set (empty set → 1).
fn product_fidelity<T: Real>(
    layout: &MacrofractionLayout<T>,
    env: &EnvironmentSpec<T>,
    indices: &[usize],
    m: T,
    m_prime: T,
    t: T,
) -> Result<T> {
    let mut acc = T::one();
    for &k in indices {
        acc *= fidelity_thermal(&layout.spin_params(env, k, m, m_prime, t))?;
    }
    Ok(acc)
}

/// Joint decoherence factor `Γ_{m m'}(t)` of the unobserved fraction:
/// the product of single-spin factors over `layout.unobserved()`.
pub fn total_decoherence_factor<T: Real>(
    layout: &MacrofractionLayout<T>,
    env: &EnvironmentSpec<T>,
    m: T,
    m_prime: T,
    t: T,
) -> Result<C<T>> {
    validate_levels(m, m_prime)?;
    Ok(product_gamma(
        layout,
        env,
        layout.unobserved(),
        m,
        m_prime,
        t,
    ))
}

/// Distinguishability of macrofraction `f` between the branches `m`, `m'`:
/// the product of single-spin fidelities over that fraction.
pub fn macrofraction_fidelity<T: Real>(
    layout: &MacrofractionLayout<T>,
    env: &EnvironmentSpec<T>,
    f: usize,
    m: T,
    m_prime: T,
    t: T,
) -> Result<T> {
    validate_levels(m, m_prime)?;
    product_fidelity(layout, env, layout.fraction(f), m, m_prime, t)
}

/// Contribution of one unordered level pair to the bound; both orders of
/// the pair are already counted in the `weighted_*` fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm<T> {
    pub m: T,
    pub m_prime: T,
    /// `|Γ_{m m'}|` over the unobserved fraction.
    pub gamma_abs: T,
    /// `Σ_f F^{mac}_f` over the macrofractions.
    pub fidelity_sum: T,
    /// `2 |α_{m m'}| |Γ_{m m'}|`.
    pub weighted_decoherence: T,
    /// `2 sqrt(α_m α_{m'}) Σ_f F^{mac}_f`.
    pub weighted_distinguishability: T,
}

/// The objectivity bound at one time, with its per-pair breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct SbsBoundReport<T> {
    pub t: T,
    /// `Σ_{m ≠ m'} |α_{m m'}| |Γ_{m m'}|`.
    pub decoherence: T,
    /// `Σ_{m ≠ m'} sqrt(α_m α_{m'}) Σ_f F^{mac}_f`.
    pub distinguishability: T,
    /// Sum of the two terms: how far the evolved state can sit from the
    /// closest broadcast-structured state.
    pub bound: T,
    pub pairs: Vec<PairTerm<T>>,
}

/// Evaluates the objectivity bound for a central state `system` against a
/// partitioned environment at time `t`.
///
/// Both terms sum over ordered level pairs `m ≠ m'`; the report lists each
/// unordered pair once with the double-counting folded in. At `t = 0` an
/// equal two-level superposition with one macrofraction gives exactly 2;
/// a fully dephased `system` has zero decoherence term at all times.
pub fn sbs_bound<T: Real>(
    system: &SystemState<T>,
    layout: &MacrofractionLayout<T>,
    env: &EnvironmentSpec<T>,
    t: T,
) -> Result<SbsBoundReport<T>> {
    let d = system.spin().dimension();
    let two = T::one() + T::one();
    let mut decoherence = T::zero();
    let mut distinguishability = T::zero();
    let mut pairs = Vec::with_capacity(d * (d - 1) / 2);

    for i in 0..d {
        for k in (i + 1)..d {
            let m = system.spin().magnetic::<T>(i);
            let m_prime = system.spin().magnetic::<T>(k);
            let alpha_off = system.alpha()[(i, k)].modulus();
            let pop_w = (system.alpha()[(i, i)].re * system.alpha()[(k, k)].re)
                .max(T::zero())
                .sqrt();

            let gamma_abs =
                product_gamma(layout, env, layout.unobserved(), m, m_prime, t).modulus();
            let mut fidelity_sum = T::zero();
            for f in 0..layout.fraction_count() {
                fidelity_sum += product_fidelity(layout, env, layout.fraction(f), m, m_prime, t)?;
            }

            let wd = two * alpha_off * gamma_abs;
            let ws = two * pop_w * fidelity_sum;
            decoherence += wd;
            distinguishability += ws;
            pairs.push(PairTerm {
                m,
                m_prime,
                gamma_abs,
                fidelity_sum,
                weighted_decoherence: wd,
                weighted_distinguishability: ws,
            });
        }
    }

    Ok(SbsBoundReport {
        t,
        decoherence,
        distinguishability,
        bound: decoherence + distinguishability,
        pairs,
    })
}

/// Threshold below which `⟨S_z²⟩` and the information prefactor switch to
/// their small-argument series: `(2j+1) βΩ < 1e-2`. Near the threshold the
/// two branches agree to ~1e-11 relative; the series keeps `βΩ → 0` exact.
fn series_regime<T: Real>(spin: Spin, b: T) -> bool {
    T::from_usize(spin.dimension()).unwrap() * b < lit::<T>(1e-2)
}

/// Thermal variance `⟨S_z²⟩ = (1/4) coth(βΩ) [(2j+1) coth((2j+1) βΩ) -
/// coth(βΩ)]` of one environment spin (the mean `⟨S_z⟩` vanishes).
///
/// `βΩ → 0` gives `j(j+1)/3`; small arguments are evaluated by series to
/// dodge the `1/βΩ` cancellation.
pub fn sz_variance_thermal<T: Real>(spin: Spin, beta_omega: T) -> T {
    let b = beta_omega;
    let c = T::from_usize(spin.dimension()).unwrap();
    let quarter = T::one() / lit::<T>(4.0);
    if series_regime(spin, b) {
        let c2 = c * c;
        let b2 = b * b;
        let t0 = (c2 - T::one()) / lit::<T>(3.0);
        let t2 = (c2 - T::one()) / lit::<T>(9.0) - (c2 * c2 - T::one()) / lit::<T>(45.0);
        let t4 = (c2 * c2 * c2 - T::one()) * lit::<T>(2.0 / 945.0)
            - (c2 * c2 - T::one() + c2 - T::one()) / lit::<T>(135.0);
        quarter * (t0 + b2 * t2 + b2 * b2 * t4)
    } else {
        let coth_b = b.tanh().recip();
        quarter * coth_b * (c * (c * b).tanh().recip() - coth_b)
    }
}

/// Information prefactor of the fidelity decay for one environment spin:
/// `(2j+1) tanh(βΩ) coth((2j+1) βΩ) - 1`.
///
/// Equals `tanh²(βΩ)` at `j = 1/2`, tends to `2j` as `βΩ → ∞` and to 0 as
/// `βΩ → 0`; small arguments go through the series branch.
pub fn quantum_fisher_information<T: Real>(spin: Spin, beta_omega: T) -> T {
    let b = beta_omega;
    let c = T::from_usize(spin.dimension()).unwrap();
    if series_regime(spin, b) {
        let c2 = c * c;
        let b2 = b * b;
        let q2 = (c2 - T::one()) / lit::<T>(3.0);
        let q4 = c2 * c2 / lit::<T>(45.0) + c2 / lit::<T>(9.0) - lit::<T>(2.0 / 15.0);
        b2 * (q2 - b2 * q4)
    } else {
        c * b.tanh() * (c * b).tanh().recip() - T::one()
    }
}

/// Short-time Gaussian envelope of `|Γ|` for `n` unobserved spins with
/// empirical mean square coupling `mean_g_sq`:
///
/// * exact-variance form: `exp[-2 n ⟨g²⟩ Δm² t² ⟨S_z²⟩]`
/// * `large_j`: `exp[-(1/2) n (2j) ⟨g²⟩ Δm² t² coth(βΩ)]` (needs `βΩ > 0`)
pub fn gamma_short_time<T: Real>(
    n: usize,
    mean_g_sq: T,
    delta_m: T,
    t: T,
    spin: Spin,
    beta_omega: T,
    large_j: bool,
) -> T {
    if t == T::zero() {
        return T::one();
    }
    let nf = T::from_usize(n).unwrap();
    let common = nf * mean_g_sq * delta_m * delta_m * t * t;
    let exponent = if large_j {
        let half = T::one() / (T::one() + T::one());
        let tj = T::from_u32(spin.twice_j()).unwrap();
        half * tj * common * beta_omega.tanh().recip()
    } else {
        (T::one() + T::one()) * common * sz_variance_thermal(spin, beta_omega)
    };
    (-exponent).exp()
}

/// Short-time Gaussian envelope of a macrofraction fidelity in its
/// large-`j` form: `exp[-(1/2) n (2j) ⟨g²⟩ Δm² t² tanh(βΩ)]`.
pub fn fidelity_short_time<T: Real>(
    n: usize,
    mean_g_sq: T,
    delta_m: T,
    t: T,
    spin: Spin,
    beta_omega: T,
) -> T {
    let half = T::one() / (T::one() + T::one());
    let nf = T::from_usize(n).unwrap();
    let tj = T::from_u32(spin.twice_j()).unwrap();
    (-half * nf * tj * mean_g_sq * delta_m * delta_m * t * t * beta_omega.tanh()).exp()
}

/// Short-time Gaussian envelope of a macrofraction fidelity with the exact
/// information prefactor: `exp[-(1/2) n ⟨g²⟩ Δm² t² 𝓕(j, βΩ)]`. The
/// large-`j` form follows by `𝓕 → 2j tanh(βΩ)`.
pub fn fidelity_short_time_exact_info<T: Real>(
    n: usize,
    mean_g_sq: T,
    delta_m: T,
    t: T,
    spin: Spin,
    beta_omega: T,
) -> T {
    let half = T::one() / (T::one() + T::one());
    let nf = T::from_usize(n).unwrap();
    (-half
        * nf
        * mean_g_sq
        * delta_m
        * delta_m
        * t
        * t
        * quantum_fisher_information(spin, beta_omega))
    .exp()
}

/// Per-spin second-order fidelity: `1 - (1/2) g² Δm² t² 𝓕(j, βΩ)`; the
/// Taylor form behind [`fidelity_short_time_exact_info`].
pub fn fidelity_taylor_single<T: Real>(g: T, delta_m: T, t: T, spin: Spin, beta_omega: T) -> T {
    let half = T::one() / (T::one() + T::one());
    T::one()
        - half * g * g * delta_m * delta_m * t * t * quantum_fisher_information(spin, beta_omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::hermitian_eigen;
    use crate::spin::build_spin_operators;
    use crate::state::thermal_state;
    use crate::thermal::fidelity_thermal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn env(tj: u32, b: f64) -> EnvironmentSpec<f64> {
        EnvironmentSpec::new(Spin::new(tj).unwrap(), b).unwrap()
    }

    fn simple_layout(couplings: Vec<f64>) -> MacrofractionLayout<f64> {
        let n = couplings.len();
        assert!(n >= 2);
        MacrofractionLayout::contiguous(n / 2, &[n - n / 2], couplings).unwrap()
    }

    #[test]
    fn layout_validation_collects_all_problems() {
        // Overlapping sets, an out-of-range index, and a bad coupling at once.
        let err = MacrofractionLayout::<f64>::new(
            3,
            vec![0, 1],
            vec![vec![1], vec![], vec![9]],
            vec![1.0, -2.0, f64::NAN],
            Some(vec![1.0, 0.0, 1.0]),
        )
        .unwrap_err();
        match err {
            Error::InvalidConfig(problems) => {
                assert!(problems.len() >= 4, "{problems:?}");
            }
            other => panic!("unexpected error {other:?}"),
        }
        // Empty unobserved set is rejected.
        assert!(
            MacrofractionLayout::<f64>::new(2, vec![], vec![vec![0, 1]], vec![1.0, 1.0], None)
                .is_err()
        );
    }

    #[test]
    fn contiguous_layout_blocks() {
        let l = MacrofractionLayout::contiguous(2, &[3, 1], vec![1.0; 6]).unwrap();
        assert_eq!(l.n_total(), 6);
        assert_eq!(l.unobserved(), &[0, 1]);
        assert_eq!(l.fraction(0), &[2, 3, 4]);
        assert_eq!(l.fraction(1), &[5]);
        assert_eq!(l.mean_coupling_sq(l.fraction(0)), 1.0);
    }

    #[test]
    fn empty_index_set_gives_unit_products() {
        let layout = simple_layout(vec![2.0, 3.0, 4.0, 5.0]);
        let e = env(2, 0.9);
        let g = product_gamma(&layout, &e, &[], -0.5, 0.5, 1.7);
        assert_eq!(g, C::new(1.0, 0.0));
        assert_eq!(
            product_fidelity(&layout, &e, &[], -0.5, 0.5, 1.7).unwrap(),
            1.0
        );
    }

    #[test]
    fn products_factorize_over_spins() {
        let layout = simple_layout(vec![1.5, 7.2, 0.3, 4.4]);
        let e = env(3, 0.6);
        let (m, mp, t) = (-0.5, 0.5, 2.3);
        let joint = total_decoherence_factor(&layout, &e, m, mp, t).unwrap();
        let mut manual = C::new(1.0, 0.0);
        for &k in layout.unobserved() {
            let p =
                ThermalParams::new(e.spin, e.beta_omega, layout.couplings()[k], m, mp, t).unwrap();
            manual *= gamma_thermal(&p);
        }
        assert!((joint - manual).norm() <= 1e-14);

        let f = macrofraction_fidelity(&layout, &e, 0, m, mp, t).unwrap();
        let mut manual_f = 1.0;
        for &k in layout.fraction(0) {
            let p =
                ThermalParams::new(e.spin, e.beta_omega, layout.couplings()[k], m, mp, t).unwrap();
            manual_f *= fidelity_thermal(&p).unwrap();
        }
        assert!((f - manual_f).abs() <= 1e-13);
    }

    #[test]
    fn splitting_multipliers_rescale_single_spin_params() {
        // One spin with Ω_k = 2Ω must equal the unit-splitting kernel at
        // doubled temperature and time, halved g/Ω.
        let layout = MacrofractionLayout::new(
            2,
            vec![0],
            vec![vec![1]],
            vec![3.0, 3.0],
            Some(vec![2.0, 2.0]),
        )
        .unwrap();
        let e = env(2, 0.45);
        let g = total_decoherence_factor(&layout, &e, -0.5, 0.5, 1.1).unwrap();
        let manual = gamma_thermal(&ThermalParams::new(e.spin, 0.9, 1.5, -0.5, 0.5, 2.2).unwrap());
        assert!((g - manual).norm() <= 1e-14);
    }

    #[test]
    fn gamma_and_fidelity_lie_in_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let couplings: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..10.0)).collect();
            let layout = simple_layout(couplings);
            let e = env(rng.gen_range(1..=5), rng.gen_range(0.0..3.0));
            let t = rng.gen_range(0.0..20.0);
            let g = total_decoherence_factor(&layout, &e, -0.5, 0.5, t).unwrap();
            let f = macrofraction_fidelity(&layout, &e, 0, -0.5, 0.5, t).unwrap();
            assert!(g.norm() <= 1.0 + 1e-10);
            assert!((-1e-10..=1.0 + 1e-10).contains(&f));
        }
    }

    #[test]
    fn suppression_grows_with_spin_at_short_times() {
        // Fixed couplings, fixed small t: both |Γ| and F^mac are
        // non-increasing in j.
        let couplings = vec![4.0, 7.0, 1.0, 5.5, 2.2, 8.8];
        let (m, mp, t) = (-0.5, 0.5, 0.01);
        let mut prev_g = f64::INFINITY;
        let mut prev_f = f64::INFINITY;
        for tj in 1..=8u32 {
            let layout = simple_layout(couplings.clone());
            let e = env(tj, 0.9);
            let g = total_decoherence_factor(&layout, &e, m, mp, t)
                .unwrap()
                .norm();
            let f = macrofraction_fidelity(&layout, &e, 0, m, mp, t).unwrap();
            assert!(g <= prev_g + 1e-12, "2j={tj}");
            assert!(f <= prev_f + 1e-12, "2j={tj}");
            prev_g = g;
            prev_f = f;
        }
    }

    #[test]
    fn time_averaged_suppression_beats_single_spin() {
        // With several i.i.d. couplings the joint factor hugs zero far more
        // tightly than any single spin: compare time averages over a window
        // past the initial decay.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let couplings: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..10.0)).collect();
        let layout = MacrofractionLayout::contiguous(5, &[5], couplings.clone()).unwrap();
        let e = env(2, 0.9);
        let ts: Vec<f64> = (0..400).map(|i| 5.0 + 45.0 * i as f64 / 399.0).collect();
        let mut joint_avg = 0.0;
        let mut single_avg = 0.0;
        for &t in &ts {
            joint_avg += total_decoherence_factor(&layout, &e, -0.5, 0.5, t)
                .unwrap()
                .norm();
            let p = ThermalParams::new(e.spin, e.beta_omega, couplings[0], -0.5, 0.5, t).unwrap();
            single_avg += gamma_thermal(&p).norm();
        }
        assert!(joint_avg < single_avg * 0.5);
    }

    // Dense references for the variance and information prefactors.
    fn sz_variance_oracle(tj: u32, b: f64) -> f64 {
        let spin = Spin::new(tj).unwrap();
        let rho = thermal_state::<f64>(spin, b);
        let (_, _, sz) = build_spin_operators::<f64>(spin);
        (rho.rho() * sz.matrix() * sz.matrix()).trace().re
    }

    fn qfi_oracle(tj: u32, b: f64) -> f64 {
        let spin = Spin::new(tj).unwrap();
        let rho = thermal_state::<f64>(spin, b);
        let (_, _, sz) = build_spin_operators::<f64>(spin);
        let eig = hermitian_eigen(rho.rho()).unwrap();
        let d = spin.dimension();
        let mut acc = 0.0;
        for i in 0..d {
            for k in 0..d {
                let (pi, pk) = (eig.values[i], eig.values[k]);
                if pi + pk <= 1e-14 {
                    continue;
                }
                let vi = eig.vectors.column(i);
                let vk = eig.vectors.column(k);
                let elem = (vi.adjoint() * sz.matrix() * vk)[(0, 0)].norm_sqr();
                acc += 2.0 * (pi - pk) * (pi - pk) / (pi + pk) * elem;
            }
        }
        acc
    }

    #[test]
    fn variance_matches_trace_oracle() {
        for tj in 1..=6u32 {
            for &b in &[0.05, 0.1, 0.9, 3.0, 8.0] {
                let closed = sz_variance_thermal(Spin::new(tj).unwrap(), b);
                let orc = sz_variance_oracle(tj, b);
                assert!(((closed - orc) / orc).abs() <= 1e-10, "2j={tj}, b={b}");
            }
        }
        // βΩ = 0 limit: j(j+1)/3, exactly from the series branch.
        for tj in 1..=6u32 {
            let spin = Spin::new(tj).unwrap();
            let expect = spin.j_jp1::<f64>() / 3.0;
            assert!((sz_variance_thermal(spin, 0.0) - expect).abs() <= 1e-14);
        }
    }

    #[test]
    fn information_prefactor_matches_double_sum_oracle() {
        for tj in 1..=6u32 {
            for &b in &[0.05, 0.1, 0.9, 3.0] {
                let closed = quantum_fisher_information(Spin::new(tj).unwrap(), b);
                let orc = qfi_oracle(tj, b);
                assert!(((closed - orc) / orc).abs() <= 1e-9, "2j={tj}, b={b}");
            }
        }
        // j = 1/2 closed form is tanh².
        let spin = Spin::new(1).unwrap();
        for &b in &[0.2, 1.1, 2.7] {
            assert!((quantum_fisher_information(spin, b) - b.tanh().powi(2)).abs() <= 1e-13);
        }
        // Limits: 0 at βΩ = 0, 2j at βΩ → ∞.
        for tj in 1..=6u32 {
            let spin = Spin::new(tj).unwrap();
            assert_eq!(quantum_fisher_information(spin, 0.0), 0.0);
            assert!((quantum_fisher_information(spin, 50.0) - tj as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn series_and_direct_branches_agree_at_the_threshold() {
        for tj in 1..=8u32 {
            let spin = Spin::new(tj).unwrap();
            let c = spin.dimension() as f64;
            for &scale in &[0.5, 0.99, 1.01, 2.0] {
                let b = scale * 1e-2 / c;
                let direct_v = 0.25 / b.tanh() * (c / (c * b).tanh() - 1.0 / b.tanh());
                let v = sz_variance_thermal(spin, b);
                assert!(((v - direct_v) / direct_v).abs() <= 1e-9, "2j={tj} b={b}");
                let direct_q = c * b.tanh() / (c * b).tanh() - 1.0;
                let q = quantum_fisher_information(spin, b);
                assert!(((q - direct_q) / direct_q).abs() <= 1e-8, "2j={tj} b={b}");
            }
        }
    }

    #[test]
    fn taylor_fidelity_matches_exact_at_small_times() {
        for tj in 1..=5u32 {
            for &b in &[0.1, 0.9, 2.5] {
                let spin = Spin::new(tj).unwrap();
                let (g, dm, t): (f64, f64, f64) = (2.0, 1.0, 1e-3);
                let p = ThermalParams::new(spin, b, g, -0.5, 0.5, t).unwrap();
                let exact = fidelity_thermal(&p).unwrap();
                let taylor = fidelity_taylor_single(g, dm, t, spin, b);
                // Deficits are O(t²); they must agree to O(t⁴).
                assert!(
                    ((1.0 - exact) - (1.0 - taylor)).abs() <= 1e-4 * (1.0 - taylor).max(1e-12),
                    "2j={tj}, b={b}"
                );
            }
        }
    }

    #[test]
    fn gaussian_envelopes_track_exact_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let couplings: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..10.0)).collect();
        let layout = MacrofractionLayout::contiguous(5, &[5], couplings).unwrap();
        let (m, mp) = (-0.5, 0.5);
        let dm = m - mp;
        for tj in 1..=6u32 {
            let spin = Spin::new(tj).unwrap();
            for &b in &[0.1, 0.9, 3.0] {
                let e = env(tj, b);
                let g2u = layout.mean_coupling_sq(layout.unobserved());
                let g2m = layout.mean_coupling_sq(layout.fraction(0));

                // Probe each envelope at a time where its own exponent is
                // 0.02. The exponent must sit well inside the quadratic
                // regime: at βΩ = 0.1 the fidelity decay is so slow that
                // reaching even this exponent needs g t ≳ 1, where the
                // quartic corrections (not suppressed by the information
                // prefactor) already cost ~0.5% relative.
                let qfi = quantum_fisher_information(spin, b);
                let t_f = (0.02 / (0.5 * 5.0 * g2m * dm * dm * qfi)).sqrt();
                let exact_f = macrofraction_fidelity(&layout, &e, 0, m, mp, t_f).unwrap();
                let gauss_f = fidelity_short_time_exact_info(5, g2m, dm, t_f, spin, b);
                assert!(
                    ((gauss_f - exact_f) / exact_f).abs() <= 0.02,
                    "fidelity envelope 2j={tj}, b={b}"
                );

                let var = sz_variance_thermal(spin, b);
                let t_g = (0.02 / (2.0 * 5.0 * g2u * dm * dm * var)).sqrt();
                let exact_g = total_decoherence_factor(&layout, &e, m, mp, t_g)
                    .unwrap()
                    .norm();
                let gauss_g = gamma_short_time(5, g2u, dm, t_g, spin, b, false);
                assert!(
                    ((gauss_g - exact_g) / exact_g).abs() <= 0.02,
                    "decoherence envelope 2j={tj}, b={b}"
                );
            }
        }
    }

    #[test]
    fn large_j_forms_converge_from_the_exact_prefactors() {
        // The large-j envelope coefficients approach the exact ones as j
        // grows at fixed βΩ.
        let b = 0.9;
        let mut prev_gap_f = f64::INFINITY;
        let mut prev_gap_g = f64::INFINITY;
        for &tj in &[2u32, 6, 12, 24, 40] {
            let spin = Spin::new(tj).unwrap();
            let qfi = quantum_fisher_information(spin, b);
            let gap_f = ((tj as f64 * b.tanh()) - qfi).abs() / qfi;
            assert!(gap_f < prev_gap_f, "fidelity prefactor 2j={tj}");
            prev_gap_f = gap_f;

            let var = sz_variance_thermal(spin, b);
            let large = 0.25 * tj as f64 / b.tanh();
            let gap_g = (large - var).abs() / var;
            assert!(gap_g < prev_gap_g, "variance prefactor 2j={tj}");
            prev_gap_g = gap_g;
        }
    }

    #[test]
    fn bound_pins_its_anchor_values() {
        let layout = simple_layout(vec![3.0, 6.0, 1.0, 8.0]);
        let e = env(2, 0.9);
        let central = Spin::new(1).unwrap();
        let system = SystemState::equal_superposition(central, &[-0.5, 0.5]).unwrap();

        // t = 0: |Γ| = F = 1 and the equal superposition weights give 2.
        let report = sbs_bound(&system, &layout, &e, 0.0).unwrap();
        assert!((report.bound - 2.0).abs() <= 1e-12);
        assert!((report.decoherence - 1.0).abs() <= 1e-13);
        assert!((report.distinguishability - 1.0).abs() <= 1e-13);
        assert_eq!(report.pairs.len(), 1);

        // t > 0: two-level bound decomposes as |Γ| + Σ_f F_f.
        let t = 1.9;
        let report = sbs_bound(&system, &layout, &e, t).unwrap();
        let g = total_decoherence_factor(&layout, &e, 0.5, -0.5, t)
            .unwrap()
            .norm();
        let f = macrofraction_fidelity(&layout, &e, 0, 0.5, -0.5, t).unwrap();
        assert!((report.bound - (g + f)).abs() <= 1e-13);

        // A dephased central state has no decoherence term at any time.
        let dephased = SystemState::diagonal(central, &[0.3, 0.7]).unwrap();
        for &t in &[0.0, 0.8, 4.4] {
            let report = sbs_bound(&dephased, &layout, &e, t).unwrap();
            assert_eq!(report.decoherence, 0.0);
            assert!(report.distinguishability > 0.0);
        }
    }

    #[test]
    fn bound_handles_multiple_fractions_and_levels() {
        let layout =
            MacrofractionLayout::contiguous(2, &[2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
                .unwrap();
        let e = env(1, 0.5);
        let central = Spin::new(2).unwrap(); // three levels
        let system = SystemState::equal_superposition(central, &[1.0, 0.0, -1.0]).unwrap();
        let report = sbs_bound(&system, &layout, &e, 0.0).unwrap();
        // Three unordered pairs, each contributing 2(1/3) + 2(1/3)·2 fractions.
        assert_eq!(report.pairs.len(), 3);
        assert!((report.decoherence - 3.0 * 2.0 / 3.0).abs() <= 1e-12);
        assert!((report.distinguishability - 3.0 * 2.0 / 3.0 * 2.0).abs() <= 1e-12);
    }
}
