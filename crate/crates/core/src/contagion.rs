//! Fire-sale equilibrium under proportional liquidation.
//!
//! A shock `s_n ∈ [0, 1]` raises bank `n`'s liabilities to
//! `L_n = L_low + s_n·(L_high − L_low)`. A bank whose liabilities exceed the
//! capital threshold `θ` sells the fraction
//!
//! ```text
//! γ_n = clamp((L_n − θ) / (κ·V_n(p)), 0, 1),    V_n(p) = Σ_m a[n][m]·p_m
//! ```
//!
//! of every holding, and prices follow the inverse demand function applied to
//! the aggregate sales `ℓ_m = Σ_n a[n][m]·γ_n`. Falling prices shrink `V_n`,
//! so the map `γ ↦ Φ(γ)` is monotone; Picard iteration from `γ = 0` climbs to
//! its least fixed point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::idf::IdfSpec;

pub const DEFAULT_CAPITAL_THRESHOLD: f64 = 0.6;
pub const DEFAULT_LEVERAGE_SENSITIVITY: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Static balance-sheet data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankingSystem {
    /// `N×M` units of asset `m` held by bank `n`.
    holdings: Tensor,
    liability_low: Vec<f64>,
    liability_high: Vec<f64>,
    capital_threshold: f64,
    leverage_sensitivity: f64,
}

impl BankingSystem {
    pub fn new(
        holdings: Vec<Vec<f64>>,
        liability_low: Vec<f64>,
        liability_high: Vec<f64>,
        capital_threshold: f64,
        leverage_sensitivity: f64,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        let banks = holdings.len();
        let assets = holdings.first().map_or(0, Vec::len);
        if banks == 0 || assets == 0 {
            problems.push("system.holdings: need at least one bank and one asset".to_string());
        }
        if holdings.iter().any(|r| r.len() != assets) {
            problems.push("system.holdings: rows must have equal length".to_string());
        }
        if holdings.iter().flatten().any(|a| !(a.is_finite() && *a >= 0.0)) {
            problems.push("system.holdings: entries must be non-negative".to_string());
        }
        if problems.is_empty() {
            for m in 0..assets {
                if holdings.iter().map(|r| r[m]).sum::<f64>() <= 0.0 {
                    problems.push(format!("system.holdings: asset {m} has zero total supply"));
                }
            }
        }
        if liability_low.len() != banks || liability_high.len() != banks {
            problems.push(format!("system.liability_low/liability_high: expected {banks} entries"));
        } else {
            for n in 0..banks {
                if !(liability_low[n] < liability_high[n]) {
                    problems.push(format!(
                        "system.liability_low: bank {n} lower bound {} must be below liability_high {}",
                        liability_low[n], liability_high[n]
                    ));
                }
                if capital_threshold > liability_low[n] {
                    problems.push(format!(
                        "system.capital_threshold: {capital_threshold} exceeds bank {n}'s liability_low {}",
                        liability_low[n]
                    ));
                }
            }
        }
        if !capital_threshold.is_finite() {
            problems.push("system.capital_threshold: must be finite".to_string());
        }
        if !(leverage_sensitivity.is_finite() && leverage_sensitivity > 0.0) {
            problems.push("system.leverage_sensitivity: must be positive".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(BankingSystem {
            holdings: Tensor::from_rows(&holdings)?,
            liability_low,
            liability_high,
            capital_threshold,
            leverage_sensitivity,
        })
    }

    /// Identical liability range for every bank.
    pub fn uniform(
        holdings: Vec<Vec<f64>>,
        liability_range: (f64, f64),
        capital_threshold: f64,
        leverage_sensitivity: f64,
    ) -> Result<Self> {
        let n = holdings.len();
        Self::new(
            holdings,
            vec![liability_range.0; n],
            vec![liability_range.1; n],
            capital_threshold,
            leverage_sensitivity,
        )
    }

    /// Sensitivity at which the most exposed bank needs to sell exactly all of
    /// its holdings under the maximal shock, when every asset trades at its
    /// full-liquidation price. Smaller values saturate `γ = 1` over a whole
    /// region of shocks; larger values never reach full liquidation.
    pub fn full_liquidation_sensitivity(
        holdings: &[Vec<f64>],
        liability_high: &[f64],
        capital_threshold: f64,
        spec: &IdfSpec,
    ) -> Result<f64> {
        let p = spec.price(spec.supply())?;
        holdings
            .iter()
            .zip(liability_high)
            .map(|(row, high)| {
                let value: f64 = row.iter().zip(&p).map(|(a, p)| a * p).sum();
                (high - capital_threshold) / value
            })
            .filter(|k| k.is_finite())
            .reduce(f64::max)
            .filter(|k| *k > 0.0)
            .ok_or_else(|| Error::InvalidArgument("no bank has a positive shortfall at full shock".into()))
    }

    pub fn banks(&self) -> usize {
        self.holdings.shape()[0]
    }

    pub fn assets(&self) -> usize {
        self.holdings.shape()[1]
    }

    pub fn holdings(&self) -> &Tensor {
        &self.holdings
    }

    pub fn capital_threshold(&self) -> f64 {
        self.capital_threshold
    }

    pub fn leverage_sensitivity(&self) -> f64 {
        self.leverage_sensitivity
    }

    /// Total units of each asset in the system.
    pub fn supply(&self) -> Vec<f64> {
        let m = self.assets();
        (0..m)
            .map(|j| (0..self.banks()).map(|n| self.holdings.get2(n, j)).sum())
            .collect()
    }

    /// `L_n = L_low + s_n·(L_high − L_low)`.
    pub fn liabilities(&self, s: &ShockSample) -> Vec<f64> {
        s.0.iter()
            .zip(self.liability_low.iter().zip(&self.liability_high))
            .map(|(s, (lo, hi))| lo + s * (hi - lo))
            .collect()
    }

    /// `ℓ_m = Σ_n a[n][m]·γ_n` under proportional liquidation.
    pub fn aggregate_liquidation(&self, gamma: &[f64]) -> Vec<f64> {
        let m = self.assets();
        let mut ell = vec![0.0; m];
        for (n, g) in gamma.iter().enumerate() {
            for (j, e) in ell.iter_mut().enumerate() {
                *e += self.holdings.get2(n, j) * g;
            }
        }
        ell
    }

    fn portfolio_values(&self, prices: &[f64]) -> Vec<f64> {
        (0..self.banks())
            .map(|n| self.holdings.row(n).iter().zip(prices).map(|(a, p)| a * p).sum())
            .collect()
    }
}

/// Shock intensities, one per bank, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSample(Vec<f64>);

impl ShockSample {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some((n, v)) = s.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("shock {n} = {v} is outside [0, 1]")));
        }
        Ok(ShockSample(s))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// One solved fire-sale equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub s: Vec<f64>,
    /// Liquidation fraction per bank.
    pub gamma: Vec<f64>,
    /// `N×M` fraction of each holding sold, bank-major. Proportional
    /// liquidation makes every row constant.
    pub ell_bank: Vec<f64>,
    /// Aggregate units sold per asset.
    pub ell_agg: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// The best-response map `Φ`.
pub fn liquidation_map(sys: &BankingSystem, liabilities: &[f64], spec: &IdfSpec, gamma: &[f64]) -> Result<Vec<f64>> {
    let ell = sys.aggregate_liquidation(gamma);
    let p = spec.price(&ell)?;
    let values = sys.portfolio_values(&p);
    Ok(liabilities
        .iter()
        .zip(&values)
        .map(|(l, v)| {
            let shortfall = l - sys.capital_threshold;
            if shortfall <= 0.0 {
                0.0
            } else if *v <= 0.0 {
                1.0
            } else {
                (shortfall / (sys.leverage_sensitivity * v)).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// Picard iteration of `Φ` from `start`, returning every iterate including
/// the start. Used to check monotone convergence.
pub fn picard_iterates(
    sys: &BankingSystem,
    s: &ShockSample,
    spec: &IdfSpec,
    start: Vec<f64>,
    opts: SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let liabilities = sys.liabilities(s);
    let mut iterates = vec![start];
    for _ in 0..opts.max_iterations {
        let current = iterates.last().expect("non-empty");
        let next = liquidation_map(sys, &liabilities, spec, current)?;
        let residual = sup_distance(current, &next);
        iterates.push(next);
        if residual < opts.tolerance {
            return Ok(iterates);
        }
    }
    let last = iterates.pop().expect("non-empty");
    let residual = sup_distance(iterates.last().expect("non-empty"), &last);
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual,
        last_iterate: last,
    })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least fixed point of `Φ`, reached from `γ = 0`.
pub fn solve_equilibrium(sys: &BankingSystem, s: &ShockSample, spec: &IdfSpec) -> Result<EquilibriumRecord> {
    solve_equilibrium_from(sys, s, spec, vec![0.0; sys.banks()], SolverOptions::default())
}

pub fn solve_equilibrium_from(
    sys: &BankingSystem,
    s: &ShockSample,
    spec: &IdfSpec,
    start: Vec<f64>,
    opts: SolverOptions,
) -> Result<EquilibriumRecord> {
    check_compatible(sys, spec)?;
    if s.0.len() != sys.banks() {
        return Err(Error::shape(
            "solve_equilibrium",
            format!("{} shocks for {} banks", s.0.len(), sys.banks()),
        ));
    }
    if start.len() != sys.banks() {
        return Err(Error::shape("solve_equilibrium", "start iterate has wrong length"));
    }
    let liabilities = sys.liabilities(s);
    let mut gamma = start;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let next = liquidation_map(sys, &liabilities, spec, &gamma)?;
        residual = sup_distance(&gamma, &next);
        gamma = next;
        if residual < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            residual,
            last_iterate: gamma,
        });
    }
    let ell_agg = sys.aggregate_liquidation(&gamma);
    let p = spec.price(&ell_agg)?;
    let m = sys.assets();
    let ell_bank = gamma.iter().flat_map(|g| std::iter::repeat_n(*g, m)).collect();
    Ok(EquilibriumRecord {
        s: s.0.clone(),
        gamma,
        ell_bank,
        ell_agg,
        p,
    })
}

fn check_compatible(sys: &BankingSystem, spec: &IdfSpec) -> Result<()> {
    if spec.assets() != sys.assets() {
        return Err(Error::Contract(format!(
            "IDF covers {} assets but the system holds {}",
            spec.assets(),
            sys.assets()
        )));
    }
    let supply = sys.supply();
    if supply
        .iter()
        .zip(spec.supply())
        .any(|(a, b)| (a - b).abs() > 1e-12 * a.max(1.0))
    {
        return Err(Error::Contract(format!(
            "IDF admissible range {:?} differs from system supply {supply:?}",
            spec.supply()
        )));
    }
    Ok(())
}

/// Shocks for sample `index`: uniform on `[0,1]^N`, drawn from a ChaCha
/// stream keyed by `(seed, index)` so any subset can be regenerated alone.
pub fn sample_shock(banks: usize, seed: u64, index: u64) -> ShockSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    ShockSample((0..banks).map(|_| rng.random::<f64>()).collect())
}

/// Solves `count` independent equilibria. Output order and values do not
/// depend on the thread count.
pub fn generate_dataset(sys: &BankingSystem, spec: &IdfSpec, count: usize, seed: u64) -> Result<Vec<EquilibriumRecord>> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset size must be positive".into()));
    }
    check_compatible(sys, spec)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let s = sample_shock(sys.banks(), seed, i as u64);
            solve_equilibrium(sys, &s, spec).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn case1(kappa: f64) -> BankingSystem {
        BankingSystem::uniform(vec![vec![1.0], vec![1.0]], (0.6, 0.85), 0.6, kappa).unwrap()
    }

    fn shocks(s: &[f64]) -> ShockSample {
        ShockSample::new(s.to_vec()).unwrap()
    }

    fn case1_calibrated() -> (BankingSystem, IdfSpec) {
        let spec = IdfSpec::linear(vec![2.0]).unwrap();
        let holdings = vec![vec![1.0], vec![1.0]];
        let kappa = BankingSystem::full_liquidation_sensitivity(&holdings, &[0.85, 0.85], 0.6, &spec).unwrap();
        (case1(kappa), spec)
    }

    fn case2_cross() -> (BankingSystem, IdfSpec) {
        let spec = IdfSpec::linear_cross(vec![1.0, 1.0], vec![vec![0.15, 0.015], vec![0.015, 0.15]], vec![1.0, 1.0]).unwrap();
        let holdings = vec![vec![0.4, 0.6], vec![0.6, 0.4]];
        let kappa = BankingSystem::full_liquidation_sensitivity(&holdings, &[0.9, 0.9], 0.6, &spec).unwrap();
        (BankingSystem::uniform(holdings, (0.6, 0.9), 0.6, kappa).unwrap(), spec)
    }

    #[test]
    fn liabilities_interpolate_the_range() {
        let sys = case1(0.1);
        assert_eq!(sys.liabilities(&shocks(&[0.0, 1.0])), vec![0.6, 0.85]);
        let sys = BankingSystem::uniform(vec![vec![1.0]], (0.6, 0.9), 0.6, 0.1).unwrap();
        assert!((sys.liabilities(&shocks(&[0.5]))[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn validation_names_fields() {
        let err = BankingSystem::uniform(vec![vec![1.0]], (0.9, 0.6), 0.6, 0.1).unwrap_err();
        assert!(err.to_string().contains("liability_low"), "{err}");
        let err = BankingSystem::uniform(vec![vec![1.0]], (0.6, 0.9), 0.7, 0.1).unwrap_err();
        assert!(err.to_string().contains("capital_threshold"), "{err}");
        let err = BankingSystem::uniform(vec![vec![0.0]], (0.6, 0.9), 0.6, 0.0).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("zero total supply") && text.contains("leverage_sensitivity"), "{text}");
        assert!(ShockSample::new(vec![1.2]).is_err());
    }

    #[test]
    fn zero_shock_means_no_sales() {
        let spec = IdfSpec::linear(vec![2.0]).unwrap();
        let rec = solve_equilibrium(&case1(0.1), &shocks(&[0.0, 0.0]), &spec).unwrap();
        assert_eq!(rec.gamma, vec![0.0, 0.0]);
        assert_eq!(rec.ell_agg, vec![0.0]);
        assert_eq!(rec.p, vec![1.0]);
    }

    #[test]
    fn maximal_shock_clamps_at_full_liquidation() {
        // κ = 0.1: shortfall 0.25 exceeds κ·V_n ≤ 0.1 for every price level.
        let spec = IdfSpec::linear(vec![2.0]).unwrap();
        let rec = solve_equilibrium(&case1(0.1), &shocks(&[1.0, 1.0]), &spec).unwrap();
        assert_eq!(rec.gamma, vec![1.0, 1.0]);
        assert_eq!(rec.ell_agg, vec![2.0]);
        assert!((rec.p[0] - 0.7).abs() < 1e-15);

        let (sys, spec) = case1_calibrated();
        let rec = solve_equilibrium(&sys, &shocks(&[1.0, 1.0]), &spec).unwrap();
        assert!((rec.gamma[0] - 1.0).abs() < 1e-9 && (rec.gamma[1] - 1.0).abs() < 1e-9);
        assert!((rec.ell_agg[0] - 2.0).abs() < 1e-9);
        assert!((rec.p[0] - 0.7).abs() < 1e-9);
    }

    /// Symmetric banks share one fraction `g`; the equilibrium is the least
    /// root of `g = Φ(g)` on `[0, 1]`. Scan a fine grid for the first sign
    /// change, then bisect.
    fn symmetric_oracle(kappa: f64, s: f64, spec: &IdfSpec) -> f64 {
        let shortfall = 0.25 * s;
        let phi = |g: f64| {
            let p = spec.price(&[2.0 * g]).unwrap()[0];
            (shortfall / (kappa * p)).min(1.0)
        };
        let f = |g: f64| phi(g) - g;
        let steps = 100_000;
        let mut lo = 0.0;
        for k in 1..=steps {
            let hi = k as f64 / steps as f64;
            if f(hi) <= 0.0 {
                let mut hi = hi;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
            lo = hi;
        }
        1.0
    }

    #[test]
    fn interior_equilibrium_matches_bisection_oracle() {
        for (kappa, spec) in [
            (0.1, IdfSpec::linear(vec![2.0]).unwrap()),
            (0.357, IdfSpec::linear(vec![2.0]).unwrap()),
            (0.357, IdfSpec::exponential(vec![2.0]).unwrap()),
            (0.357, IdfSpec::arctangent(vec![2.0]).unwrap()),
        ] {
            for s in [0.1, 0.25, 0.5] {
                let rec = solve_equilibrium(&case1(kappa), &shocks(&[s, s]), &spec).unwrap();
                let g = symmetric_oracle(kappa, s, &spec);
                assert!((rec.gamma[0] - g).abs() < 1e-9, "κ={kappa} s={s}: {} vs {g}", rec.gamma[0]);
                assert!((rec.gamma[1] - g).abs() < 1e-9);
                let p = spec.price(&[2.0 * g]).unwrap()[0];
                assert!((rec.p[0] - p).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let (sys, spec) = case2_cross();
        let opts = SolverOptions {
            tolerance: 1e-12,
            max_iterations: 2,
        };
        let err = solve_equilibrium_from(&sys, &shocks(&[0.7, 0.4]), &spec, vec![0.0, 0.0], opts).unwrap_err();
        match err {
            Error::NonConvergence {
                iterations,
                residual,
                last_iterate,
            } => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
                assert_eq!(last_iterate.len(), 2);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_mismatched_idf() {
        let spec = IdfSpec::linear(vec![1.0]).unwrap();
        assert!(matches!(
            solve_equilibrium(&case1(0.1), &shocks(&[0.1, 0.1]), &spec),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn dataset_is_deterministic_and_consistent() {
        let (sys, spec) = case1_calibrated();
        let a = generate_dataset(&sys, &spec, 3, 7).unwrap();
        let b = generate_dataset(&sys, &spec, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(&sys, &spec, 3, 8).unwrap());
        // A sample does not depend on how many others were drawn.
        assert_eq!(generate_dataset(&sys, &spec, 1, 7).unwrap()[0], a[0]);
        assert!(generate_dataset(&sys, &spec, 0, 7).is_err());
    }

    #[test]
    fn large_case1_dataset_spans_the_supply() {
        let (sys, spec) = case1_calibrated();
        let data = generate_dataset(&sys, &spec, 10_000, 42).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for rec in &data {
            assert!((rec.p[0] - (1.0 - 0.15 * rec.ell_agg[0])).abs() < 1e-12);
            lo = lo.min(rec.ell_agg[0]);
            hi = hi.max(rec.ell_agg[0]);
        }
        assert!(lo < 0.05 * 2.0, "min liquidation {lo}");
        assert!(hi > 0.95 * 2.0, "max liquidation {hi}");
    }

    #[test]
    fn records_satisfy_structural_invariants() {
        let (sys, spec) = case2_cross();
        let supply = sys.supply();
        for rec in generate_dataset(&sys, &spec, 200, 1).unwrap() {
            for n in 0..2 {
                assert_eq!(rec.ell_bank[2 * n], rec.ell_bank[2 * n + 1]);
            }
            for m in 0..2 {
                let agg: f64 = (0..2).map(|n| sys.holdings().get2(n, m) * rec.ell_bank[2 * n + m]).sum();
                assert!((agg - rec.ell_agg[m]).abs() < 1e-15);
                assert!(rec.ell_agg[m] >= 0.0 && rec.ell_agg[m] <= supply[m] + 1e-12);
            }
            assert_eq!(rec.p, spec.price(&rec.ell_agg).unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn iterates_increase_monotonically(s1 in 0.0..=1.0f64, s2 in 0.0..=1.0f64) {
            let (sys, spec) = case2_cross();
            let iterates = picard_iterates(&sys, &shocks(&[s1, s2]), &spec, vec![0.0, 0.0], SolverOptions::default()).unwrap();
            for w in iterates.windows(2) {
                for n in 0..2 {
                    prop_assert!(w[1][n] >= w[0][n]);
                }
            }
        }

        #[test]
        fn equilibrium_is_comonotone_with_shocks(s1 in 0.0..=1.0f64, s2 in 0.0..=1.0f64, d1 in 0.0..=1.0f64, d2 in 0.0..=1.0f64) {
            let (sys, spec) = case2_cross();
            let lo = solve_equilibrium(&sys, &shocks(&[s1, s2]), &spec).unwrap();
            let hi = solve_equilibrium(&sys, &shocks(&[(s1 + d1).min(1.0), (s2 + d2).min(1.0)]), &spec).unwrap();
            for m in 0..2 {
                prop_assert!(lo.ell_agg[m] <= hi.ell_agg[m] + 1e-12);
                prop_assert!(lo.p[m] >= hi.p[m] - 1e-12);
            }
        }

        #[test]
        fn warm_start_reaches_same_point(s1 in 0.0..=1.0f64, s2 in 0.0..=1.0f64) {
            let (sys, spec) = case2_cross();
            let s = shocks(&[s1, s2]);
            let cold = solve_equilibrium(&sys, &s, &spec).unwrap();
            let start = liquidation_map(&sys, &sys.liabilities(&s), &spec, &[0.0, 0.0]).unwrap();
            let warm = solve_equilibrium_from(&sys, &s, &spec, start, SolverOptions::default()).unwrap();
            for n in 0..2 {
                prop_assert!((cold.gamma[n] - warm.gamma[n]).abs() < 1e-9);
            }
        }
    }
}
