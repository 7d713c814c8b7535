//! Held-out statistics: price MSE, liquidation correlation, min-max scaling
//! of the hidden liquidations, curve reconstruction and OLS cross-impact
//! regression with t-tests.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::dataset::{fmt17, Dataset};
use crate::error::{Error, Result};
use crate::idf::{IdfKind, IdfSpec};
use crate::net::DualModel;
use crate::stats::student_t_two_sided;
use crate::training::model_inputs;

pub const CURVE_POINTS: usize = 201;

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs two series of equal length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical(format!(
            "pearson: zero variance (var x = {:e}, var y = {:e})",
            sxx / n,
            syy / n
        )));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Affine map sending the observed prediction extrema onto balance-sheet
/// anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidationScale {
    pub pred_min: f64,
    pub pred_max: f64,
    pub anchor_min: f64,
    pub anchor_max: f64,
}

impl LiquidationScale {
    pub fn fit(ell_pred: &[f64], anchor_min: f64, anchor_max: f64) -> Result<Self> {
        if !(anchor_max > anchor_min) {
            return Err(Error::InvalidArgument(format!(
                "scaling anchors must satisfy max > min, got [{anchor_min}, {anchor_max}]"
            )));
        }
        let pred_min = ell_pred.iter().copied().fold(f64::INFINITY, f64::min);
        let pred_max = ell_pred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(pred_max > pred_min) {
            return Err(Error::Numerical(format!(
                "cannot scale constant liquidation predictions (all {pred_min})"
            )));
        }
        Ok(LiquidationScale {
            pred_min,
            pred_max,
            anchor_min,
            anchor_max,
        })
    }

    pub fn apply(&self, ell_hat: f64) -> f64 {
        (ell_hat - self.pred_min) * (self.anchor_max - self.anchor_min) / (self.pred_max - self.pred_min)
            + self.anchor_min
    }

    /// Network units for an asset-unit liquidation.
    pub fn invert(&self, ell: f64) -> f64 {
        (ell - self.anchor_min) * (self.pred_max - self.pred_min) / (self.anchor_max - self.anchor_min)
            + self.pred_min
    }
}

/// `ℓ* = (ℓ̂ − ℓ̂_min)(ℓ_max − ℓ_min)/(ℓ̂_max − ℓ̂_min) + ℓ_min`.
pub fn scale_liquidations(ell_pred: &[f64], ell_min: f64, ell_max: f64) -> Result<Vec<f64>> {
    let scale = LiquidationScale::fit(ell_pred, ell_min, ell_max)?;
    Ok(ell_pred.iter().map(|&v| scale.apply(v)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTest {
    pub null_values: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub dof: usize,
    pub residual_variance: f64,
    pub r_squared: f64,
}

/// Least squares via Householder QR. `x` is `n×k` row-major and must already
/// contain an intercept column if one is wanted.
pub fn ols(y: &[f64], x: &[Vec<f64>], names: &[&str]) -> Result<RegressionResult> {
    let n = y.len();
    let k = x.first().map_or(0, Vec::len);
    if x.len() != n || x.iter().any(|r| r.len() != k) || names.len() != k {
        return Err(Error::shape("ols", format!("{n} responses, {} rows, {k} regressors", x.len())));
    }
    if k == 0 || n < k + 1 {
        return Err(Error::InvalidArgument(format!("ols needs more rows than regressors ({n} vs {k})")));
    }
    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-10 * dmax) {
        return Err(Error::Numerical(format!(
            "ols: design matrix is rank deficient (R diagonal ratio {:e})",
            dmin / dmax
        )));
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("ols: singular triangular factor".into()))?;
    let resid = &yv - &xm * &beta;
    let rss = resid.norm_squared();
    let dof = n - k;
    let sigma2 = rss / dof as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numerical("ols: singular triangular factor".into()))?;
    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ, whose diagonal is the squared row norms of R⁻¹.
    let standard_errors = (0..k).map(|i| (sigma2 * r_inv.row(i).norm_squared()).sqrt()).collect();
    let ymean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ymean).powi(2)).sum();
    Ok(RegressionResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        estimates: beta.iter().copied().collect(),
        standard_errors,
        dof,
        residual_variance: sigma2,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

/// Two-sided t-tests of each coefficient against `null_values`.
pub fn t_test(result: &RegressionResult, null_values: &[f64]) -> Result<HypothesisTest> {
    if null_values.len() != result.estimates.len() {
        return Err(Error::shape(
            "t_test",
            format!("{} nulls for {} coefficients", null_values.len(), result.estimates.len()),
        ));
    }
    let t_values: Vec<f64> = result
        .estimates
        .iter()
        .zip(&result.standard_errors)
        .zip(null_values)
        .map(|((est, se), null)| {
            let diff = est - null;
            if diff == 0.0 {
                0.0
            } else {
                diff / se
            }
        })
        .collect();
    let p_values = t_values.iter().map(|&t| student_t_two_sided(t, result.dof as f64)).collect();
    Ok(HypothesisTest {
        null_values: null_values.to_vec(),
        t_values,
        p_values,
    })
}

/// Aggregate liquidations and prices for a test set, both `[K, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub ell_hat: Tensor,
    pub p_hat: Tensor,
}

/// Something evaluable: the trained model, or the ground truth itself.
pub trait Predictor {
    fn label(&self) -> String;
    fn predict(&self, test: &Dataset) -> Result<Predictions>;
    /// Prices for `[B, M]` liquidations in the predictor's own units.
    fn price_curve(&self, ell_hat: &Tensor) -> Result<Tensor>;
}

impl Predictor for DualModel {
    fn label(&self) -> String {
        self.variant().to_string()
    }

    fn predict(&self, test: &Dataset) -> Result<Predictions> {
        let batch = model_inputs(self, test)?;
        let out = self.forward(&batch.shocks, batch.true_liq.as_ref())?;
        Ok(Predictions {
            ell_hat: out.ell_hat,
            p_hat: out.p_hat,
        })
    }

    fn price_curve(&self, ell_hat: &Tensor) -> Result<Tensor> {
        self.predict_prices(ell_hat)
    }
}

/// Reports the dataset's own liquidations and prices.
pub struct Oracle<'a> {
    pub spec: &'a IdfSpec,
}

impl Predictor for Oracle<'_> {
    fn label(&self) -> String {
        "oracle".into()
    }

    fn predict(&self, test: &Dataset) -> Result<Predictions> {
        let ell_hat = test
            .ell_agg()
            .ok_or_else(|| Error::Contract("oracle needs a dataset with ell_agg columns".into()))?;
        Ok(Predictions {
            ell_hat,
            p_hat: test.prices(),
        })
    }

    fn price_curve(&self, ell_hat: &Tensor) -> Result<Tensor> {
        let (rows, cols) = ell_hat.dims2()?;
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let clipped: Vec<f64> = ell_hat
                .row(r)
                .iter()
                .zip(self.spec.supply())
                .map(|(v, s)| v.clamp(0.0, *s))
                .collect();
            out.extend(self.spec.price(&clipped)?);
        }
        Tensor::matrix(rows, cols, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub asset: usize,
    /// Asset units.
    pub ell: f64,
    /// The same liquidation in network units.
    pub ell_hat: f64,
    pub p_hat: f64,
    pub p_true: f64,
}

/// Sweeps each asset over `grid` (asset units, other assets held at zero),
/// mapping grid points to network units through `scales` when given.
pub fn reconstruct_idf(
    predictor: &dyn Predictor,
    grid: &[f64],
    spec: &IdfSpec,
    scales: Option<&[LiquidationScale]>,
) -> Result<Vec<CurvePoint>> {
    let m = spec.assets();
    if let Some(s) = scales {
        if s.len() != m {
            return Err(Error::shape("reconstruct_idf", format!("{} scales for {m} assets", s.len())));
        }
    }
    let mut points = Vec::with_capacity(m * grid.len());
    for asset in 0..m {
        let mut net_in = Vec::with_capacity(grid.len() * m);
        let mut truth = Vec::with_capacity(grid.len());
        for &ell in grid {
            let mut true_ell = vec![0.0; m];
            true_ell[asset] = ell;
            truth.push(spec.price(&true_ell)?[asset]);
            for j in 0..m {
                let v = true_ell[j];
                net_in.push(match scales {
                    Some(s) => s[j].invert(v),
                    None => v,
                });
            }
        }
        let input = Tensor::matrix(grid.len(), m, net_in)?;
        let prices = predictor.price_curve(&input)?;
        for (i, &ell) in grid.iter().enumerate() {
            points.push(CurvePoint {
                asset,
                ell,
                ell_hat: input.get2(i, asset),
                p_hat: prices.get2(i, asset),
                p_true: truth[i],
            });
        }
    }
    Ok(points)
}

/// `n` uniform points over `[0, supply]`.
pub fn uniform_grid(supply: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| supply * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionBlock {
    /// Regressors: scaled liquidations of every asset, then the intercept.
    pub result: RegressionResult,
    pub true_null: HypothesisTest,
    pub zero_null: HypothesisTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub samples: usize,
    pub mse_per_asset: Vec<f64>,
    pub mse_sum: f64,
    /// Per asset, `None` when the liquidation columns are absent.
    pub correlation: Option<Vec<f64>>,
    pub scales: Option<Vec<LiquidationScale>>,
    pub scaled_mae: Option<Vec<f64>>,
    pub scaled_max_error: Option<Vec<f64>>,
    pub regression: Option<RegressionBlock>,
    pub curve_max_error: f64,
    pub curve: Vec<CurvePoint>,
    pub notes: Vec<String>,
}

fn column(t: &Tensor, j: usize) -> Vec<f64> {
    let cols = t.shape()[1];
    t.data().iter().skip(j).step_by(cols).copied().collect()
}

/// Full statistics of `predictor` on `test`.
pub fn evaluate(predictor: &dyn Predictor, test: &Dataset, spec: &IdfSpec) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    if test.assets() != spec.assets() {
        return Err(Error::Contract(format!(
            "dataset has {} assets, inverse demand function {}",
            test.assets(),
            spec.assets()
        )));
    }
    let m = test.assets();
    let pred = predictor.predict(test)?;
    let prices = test.prices();
    let mse_per_asset: Vec<f64> = (0..m)
        .map(|j| {
            let (p, q) = (column(&pred.p_hat, j), column(&prices, j));
            p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64
        })
        .collect();
    let mse_sum = mse_per_asset.iter().sum();
    let mut notes = Vec::new();

    let anchors: Vec<(f64, f64)> = spec.supply().iter().map(|s| (0.0, *s)).collect();
    let scales: Option<Vec<LiquidationScale>> = (0..m)
        .map(|j| LiquidationScale::fit(&column(&pred.ell_hat, j), anchors[j].0, anchors[j].1))
        .collect::<Result<_>>()
        .map_err(|e| notes.push(format!("liquidation scaling skipped: {e}")))
        .ok();

    let mut correlation = None;
    let mut scaled_mae = None;
    let mut scaled_max_error = None;
    if let Some(truth) = test.ell_agg() {
        match (0..m)
            .map(|j| pearson(&column(&pred.ell_hat, j), &column(&truth, j)))
            .collect::<Result<Vec<_>>>()
        {
            Ok(c) => correlation = Some(c),
            Err(e) => notes.push(format!("correlation skipped: {e}")),
        }
        if let Some(sc) = &scales {
            let errs: Vec<Vec<f64>> = (0..m)
                .map(|j| {
                    column(&pred.ell_hat, j)
                        .iter()
                        .zip(column(&truth, j))
                        .map(|(p, t)| (sc[j].apply(*p) - t).abs())
                        .collect()
                })
                .collect();
            scaled_mae = Some(errs.iter().map(|e| e.iter().sum::<f64>() / e.len() as f64).collect());
            scaled_max_error = Some(errs.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect());
        }
    }

    let regression = match (&scales, spec.kind()) {
        (Some(sc), IdfKind::LinearCross) if m >= 2 => {
            let y = column(&pred.p_hat, 0);
            let x: Vec<Vec<f64>> = (0..test.len())
                .map(|i| {
                    let mut row: Vec<f64> = (0..m).map(|j| sc[j].apply(pred.ell_hat.get2(i, j))).collect();
                    row.push(1.0);
                    row
                })
                .collect();
            let names: Vec<String> = (1..=m)
                .map(|j| format!("scaled_liquidation_{j}"))
                .chain(["intercept".to_string()])
                .collect();
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            match ols(&y, &x, &names) {
                Ok(result) => {
                    let mut true_vals: Vec<f64> = (0..m).map(|j| -spec.impact(0, j)).collect();
                    true_vals.push(spec.base_price()[0]);
                    let true_null = t_test(&result, &true_vals)?;
                    let zero_null = t_test(&result, &vec![0.0; m + 1])?;
                    Some(RegressionBlock {
                        result,
                        true_null,
                        zero_null,
                    })
                }
                Err(e) => {
                    notes.push(format!("regression skipped: {e}"));
                    None
                }
            }
        }
        _ => None,
    };

    let grid_max = spec.supply().iter().copied().fold(0.0, f64::max);
    let grid: Vec<f64> = uniform_grid(grid_max, CURVE_POINTS);
    let curve: Vec<CurvePoint> = reconstruct_idf(predictor, &grid, spec, scales.as_deref())
        .or_else(|_| {
            // Assets with smaller supply than the widest one cannot follow the shared grid.
            let mut all = Vec::new();
            for j in 0..m {
                let g = uniform_grid(spec.supply()[j], CURVE_POINTS);
                let pts = reconstruct_idf(predictor, &g, spec, scales.as_deref())?;
                all.extend(pts.into_iter().filter(|p| p.asset == j));
            }
            Ok::<_, Error>(all)
        })?;
    let curve_max_error = curve.iter().map(|p| (p.p_hat - p.p_true).abs()).fold(0.0, f64::max);

    Ok(EvalReport {
        model: predictor.label(),
        samples: test.len(),
        mse_per_asset,
        mse_sum,
        correlation,
        scales,
        scaled_mae,
        scaled_max_error,
        regression,
        curve_max_error,
        curve,
        notes,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn write_curve_csv(&self, path: &Path) -> Result<()> {
        write_curve_csv(&self.curve, path)
    }

    /// One row per asset.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("model,asset,mse,correlation,scaled_mae,scaled_max_error\n");
        let opt = |v: &Option<Vec<f64>>, j: usize| v.as_ref().map_or(String::new(), |v| fmt17(v[j]));
        for j in 0..self.mse_per_asset.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.model,
                j + 1,
                fmt17(self.mse_per_asset[j]),
                opt(&self.correlation, j),
                opt(&self.scaled_mae, j),
                opt(&self.scaled_max_error, j),
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_regression_csv(&self, path: &Path) -> Result<()> {
        let Some(block) = &self.regression else {
            return Ok(());
        };
        let r = &block.result;
        let mut out = String::from("variable,estimate,standard_error,null,t_value,p_value\n");
        for test in [&block.true_null, &block.zero_null] {
            for k in 0..r.estimates.len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.names[k],
                    fmt17(r.estimates[k]),
                    fmt17(r.standard_errors[k]),
                    fmt17(test.null_values[k]),
                    fmt17(test.t_values[k]),
                    fmt17(test.p_values[k]),
                ));
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub fn write_curve_csv(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut out = String::from("asset,ell,ell_hat,p_hat,p_true\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.asset + 1,
            fmt17(p.ell),
            fmt17(p.ell_hat),
            fmt17(p.p_hat),
            fmt17(p.p_true)
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::contagion::{generate_dataset, BankingSystem};
    use crate::net::{Architecture, Variant};

    #[test]
    fn pearson_documented_values() {
        let x = [0.1, 0.5, 0.2, 0.9, 0.4];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let aff: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&x, &aff).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 5]).unwrap_err().is_numerical());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn scaling_endpoints_and_midpoint() {
        let pred = [3.0, 5.0, 4.0, 3.5];
        let s = scale_liquidations(&pred, 0.0, 2.0).unwrap();
        assert_eq!(s, vec![0.0, 2.0, 1.0, 0.5]);
        assert!(scale_liquidations(&[1.0, 1.0], 0.0, 2.0).is_err());
        let sc = LiquidationScale::fit(&pred, 0.0, 2.0).unwrap();
        for v in [3.0, 3.7, 5.0] {
            assert!((sc.invert(sc.apply(v)) - v).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            x in proptest::collection::vec(-10.0..10.0f64, 3..40),
            a in 0.1..10.0f64,
            b in -5.0..5.0f64,
        ) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + i as f64).collect();
            if let Ok(r) = pearson(&x, &y) {
                let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let r2 = pearson(&xt, &y).unwrap();
                prop_assert!((r - r2).abs() < 1e-9);
            }
        }

        #[test]
        fn scaling_preserves_order_and_ratios(x in proptest::collection::vec(-10.0..10.0f64, 3..40)) {
            if let Ok(s) = scale_liquidations(&x, 0.0, 2.0) {
                let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (i, j) in [(0, 1), (1, 2)] {
                    prop_assert_eq!(x[i] < x[j], s[i] < s[j] || x[i] == x[j]);
                    let want = (x[i] - x[j]) * 2.0 / (hi - lo);
                    prop_assert!((s[i] - s[j] - want).abs() < 1e-9);
                }
                prop_assert!(s.contains(&0.0));
                prop_assert!(s.iter().any(|v| (*v - 2.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn ols_exact_and_constant() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let design: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x, 1.0]).collect();
        let r = ols(&y, &design, &["x", "intercept"]).unwrap();
        assert!((r.estimates[0] - 2.0).abs() < 1e-12);
        assert!((r.estimates[1] - 1.0).abs() < 1e-12);
        assert!(r.standard_errors.iter().all(|s| *s < 1e-10));
        assert_eq!(r.dof, 18);

        let flat = ols(&[4.0; 20], &design, &["x", "intercept"]).unwrap();
        assert!(flat.estimates[0].abs() < 1e-12);
        assert!((flat.estimates[1] - 4.0).abs() < 1e-12);

        let collinear: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x, 2.0 * x, 1.0]).collect();
        assert!(ols(&y, &collinear, &["a", "b", "c"]).unwrap_err().is_numerical());
        assert!(ols(&y[..2], &design[..2], &["x", "intercept"]).is_err());
    }

    #[test]
    fn ols_recovers_coefficients_within_four_standard_errors() {
        let beta = [-0.15, -0.015, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut covered = 0;
        let trials = 500;
        for _ in 0..trials {
            let design: Vec<Vec<f64>> = (0..60)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), 1.0])
                .collect();
            let y: Vec<f64> = design
                .iter()
                .map(|r| {
                    // Irwin-Hall noise: approximately normal, sd 0.01.
                    let z: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
                    r.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>() + 0.01 * z
                })
                .collect();
            let r = ols(&y, &design, &["a", "b", "c"]).unwrap();
            if (0..3).all(|k| (r.estimates[k] - beta[k]).abs() <= 4.0 * r.standard_errors[k]) {
                covered += 1;
            }
        }
        assert!(covered as f64 >= 0.99 * trials as f64, "{covered}/{trials}");
    }

    #[test]
    fn t_test_documented_values() {
        let r = RegressionResult {
            names: vec!["a".into(), "b".into()],
            estimates: vec![1.0, 3.0],
            standard_errors: vec![0.5, 1e-3],
            dof: 10,
            residual_variance: 1.0,
            r_squared: 0.5,
        };
        let t = t_test(&r, &[0.0, 3.0]).unwrap();
        assert_eq!(t.t_values, vec![2.0, 0.0]);
        assert!((t.p_values[0] - 0.0734).abs() < 5e-5);
        assert_eq!(t.p_values[1], 1.0);
        assert!(t_test(&r, &[0.0]).is_err());
        let big = RegressionResult { dof: 1000, ..r };
        assert!(t_test(&big, &[0.0, 2.9]).unwrap().p_values[1] < 1e-10);
    }

    fn case1() -> (BankingSystem, IdfSpec, Dataset) {
        let spec = IdfSpec::linear(vec![2.0]).unwrap();
        let h = vec![vec![1.0], vec![1.0]];
        let k = BankingSystem::full_liquidation_sensitivity(&h, &[0.85, 0.85], 0.6, &spec).unwrap();
        let sys = BankingSystem::uniform(h, (0.6, 0.85), 0.6, k).unwrap();
        let data = Dataset::from_records(&generate_dataset(&sys, &spec, 300, 4).unwrap()).unwrap();
        (sys, spec, data)
    }

    #[test]
    fn oracle_is_perfect() {
        let (_, spec, data) = case1();
        let report = evaluate(&Oracle { spec: &spec }, &data, &spec).unwrap();
        assert_eq!(report.mse_sum, 0.0);
        assert!((report.correlation.unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(report.curve.len(), CURVE_POINTS);
        assert!(report.regression.is_none());
    }

    #[test]
    fn curve_pairs_truth_and_is_monotone() {
        let (sys, spec, data) = case1();
        let model = DualModel::new(Variant::Proposed, sys.holdings(), &Architecture::default(), 2).unwrap();
        let report = evaluate(&model, &data, &spec).unwrap();
        let c = &report.curve;
        assert_eq!(c[0].ell, 0.0);
        assert_eq!(c[0].p_true, 1.0);
        assert_eq!(c.last().unwrap().ell, 2.0);
        for w in c.windows(2) {
            assert!(w[1].p_hat <= w[0].p_hat);
        }
        let unscaled = reconstruct_idf(&model, &[0.0, 1.0], &spec, None).unwrap();
        let direct = model.predict_prices(&Tensor::from_rows(&[[0.0], [1.0]]).unwrap()).unwrap();
        assert_eq!(unscaled[1].p_hat, direct.data()[1]);
    }

    #[test]
    fn cross_impact_regression_block() {
        let spec = IdfSpec::linear_cross(vec![1.0, 1.0], vec![vec![0.15, 0.015], vec![0.015, 0.15]], vec![1.0, 1.0]).unwrap();
        let h = vec![vec![0.4, 0.6], vec![0.6, 0.4]];
        let k = BankingSystem::full_liquidation_sensitivity(&h, &[0.9, 0.9], 0.6, &spec).unwrap();
        let sys = BankingSystem::uniform(h, (0.6, 0.9), 0.6, k).unwrap();
        let data = Dataset::from_records(&generate_dataset(&sys, &spec, 200, 1).unwrap()).unwrap();
        let model = DualModel::new(Variant::Proposed, sys.holdings(), &Architecture::default(), 2).unwrap();
        let report = evaluate(&model, &data, &spec).unwrap();
        let block = report.regression.clone().expect("regression block");
        assert_eq!(block.result.estimates.len(), 3);
        assert_eq!(block.true_null.null_values, vec![-0.15, -0.015, 1.0]);
        assert_eq!(block.zero_null.null_values, vec![0.0; 3]);
        assert_eq!(report.curve.len(), 2 * CURVE_POINTS);
        assert_eq!(report.mse_per_asset.len(), 2);
        let back: EvalReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.mse_sum.to_bits(), report.mse_sum.to_bits());
    }

    #[test]
    fn empty_or_mismatched_test_sets_are_rejected() {
        let (_, spec, data) = case1();
        let two = IdfSpec::linear(vec![1.0, 1.0]).unwrap();
        assert!(evaluate(&Oracle { spec: &two }, &data, &two).is_err());
        assert!(evaluate(&Oracle { spec: &spec }, &data.slice(0..0), &spec).is_err());
    }
}
