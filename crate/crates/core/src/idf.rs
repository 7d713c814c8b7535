//! Ground-truth inverse demand functions: aggregate liquidation per asset in,
//! price per asset out.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_IMPACT: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdfKind {
    Linear,
    Exponential,
    Arctangent,
    LinearCross,
}

/// A parameterized inverse demand function over `M` assets.
///
/// * `Linear`: `p_m = b_m − c_m·ℓ_m`
/// * `Exponential`: `p_m = b_m·exp(−c_m·ℓ_m)`
/// * `Arctangent`: `p_m = b_m·(atan(−ℓ_m) + 2π)/(2π)`
/// * `LinearCross`: `p = b − D·ℓ`
///
/// Construction validates the parameters against the admissible liquidation range
/// `[0, supply_m]`, so evaluation only has to check its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IdfSpecRaw", into = "IdfSpecRaw")]
pub struct IdfSpec {
    kind: IdfKind,
    base_price: Vec<f64>,
    /// Per-asset impact for the separable kinds, row-major `M×M` for `LinearCross`.
    impact: Vec<f64>,
    supply: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IdfSpecRaw {
    kind: IdfKind,
    base_price: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    impact: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    cross_impact: Vec<Vec<f64>>,
    supply: Vec<f64>,
}

impl TryFrom<IdfSpecRaw> for IdfSpec {
    type Error = Error;

    fn try_from(raw: IdfSpecRaw) -> Result<Self> {
        match raw.kind {
            IdfKind::LinearCross => {
                IdfSpec::linear_cross(raw.base_price, raw.cross_impact, raw.supply)
            }
            kind => {
                let impact = if raw.impact.is_empty() {
                    let c = if kind == IdfKind::Arctangent { 0.0 } else { DEFAULT_IMPACT };
                    vec![c; raw.base_price.len()]
                } else {
                    raw.impact
                };
                IdfSpec::separable(kind, raw.base_price, impact, raw.supply)
            }
        }
    }
}

impl From<IdfSpec> for IdfSpecRaw {
    fn from(spec: IdfSpec) -> Self {
        let m = spec.assets();
        let (impact, cross_impact) = match spec.kind {
            IdfKind::LinearCross => (Vec::new(), spec.impact.chunks(m).map(<[f64]>::to_vec).collect()),
            IdfKind::Arctangent => (Vec::new(), Vec::new()),
            _ => (spec.impact, Vec::new()),
        };
        IdfSpecRaw {
            kind: spec.kind,
            base_price: spec.base_price,
            impact,
            cross_impact,
            supply: spec.supply,
        }
    }
}

impl IdfSpec {
    /// `p = 1 − 0.15ℓ` on every asset.
    pub fn linear(supply: Vec<f64>) -> Result<Self> {
        let m = supply.len();
        Self::separable(IdfKind::Linear, vec![1.0; m], vec![DEFAULT_IMPACT; m], supply)
    }

    /// `p = exp(−0.15ℓ)` on every asset.
    pub fn exponential(supply: Vec<f64>) -> Result<Self> {
        let m = supply.len();
        Self::separable(IdfKind::Exponential, vec![1.0; m], vec![DEFAULT_IMPACT; m], supply)
    }

    /// `p = (atan(−ℓ) + 2π)/(2π)` on every asset.
    pub fn arctangent(supply: Vec<f64>) -> Result<Self> {
        let m = supply.len();
        Self::separable(IdfKind::Arctangent, vec![1.0; m], vec![0.0; m], supply)
    }

    pub fn separable(kind: IdfKind, base_price: Vec<f64>, impact: Vec<f64>, supply: Vec<f64>) -> Result<Self> {
        if kind == IdfKind::LinearCross {
            return Err(Error::InvalidArgument("use IdfSpec::linear_cross for cross-impact IDFs".into()));
        }
        let m = supply.len();
        let mut problems = Vec::new();
        check_common(&base_price, &supply, &mut problems);
        if impact.len() != m {
            problems.push(format!("idf.impact: expected {m} entries, got {}", impact.len()));
        }
        if impact.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            problems.push("idf.impact: entries must be finite and non-negative".into());
        }
        let spec = IdfSpec {
            kind,
            base_price,
            impact,
            supply,
        };
        if problems.is_empty() && kind == IdfKind::Linear {
            spec.check_positive_at_supply(&mut problems);
        }
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// `p = base_price − D·ℓ`. `D` must be non-negative with each diagonal
    /// entry at least as large as the off-diagonal entries of its row.
    pub fn linear_cross(base_price: Vec<f64>, cross_impact: Vec<Vec<f64>>, supply: Vec<f64>) -> Result<Self> {
        let m = supply.len();
        let mut problems = Vec::new();
        check_common(&base_price, &supply, &mut problems);
        if cross_impact.len() != m || cross_impact.iter().any(|r| r.len() != m) {
            problems.push(format!("idf.cross_impact: expected a {m}x{m} matrix"));
        } else {
            for (i, row) in cross_impact.iter().enumerate() {
                if row.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                    problems.push(format!("idf.cross_impact: row {i} has negative or non-finite entries"));
                }
                if row.iter().enumerate().any(|(j, d)| j != i && *d > row[i]) {
                    problems.push(format!("idf.cross_impact: row {i} cross-impact exceeds own impact"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let spec = IdfSpec {
            kind: IdfKind::LinearCross,
            base_price,
            impact: cross_impact.concat(),
            supply,
        };
        spec.check_positive_at_supply(&mut problems);
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Linear prices are smallest at full liquidation, so positivity there
    /// covers the whole admissible box.
    fn check_positive_at_supply(&self, problems: &mut Vec<String>) {
        let p = self.eval_unchecked(&self.supply);
        for (m, v) in p.iter().enumerate() {
            if *v <= 0.0 {
                problems.push(format!(
                    "idf: price of asset {m} reaches {v} at full liquidation; must stay positive"
                ));
            }
        }
    }

    pub fn kind(&self) -> IdfKind {
        self.kind
    }

    pub fn assets(&self) -> usize {
        self.supply.len()
    }

    pub fn base_price(&self) -> &[f64] {
        &self.base_price
    }

    pub fn supply(&self) -> &[f64] {
        &self.supply
    }

    /// Entry `D[i][j]` of the impact matrix; separable kinds are diagonal.
    pub fn impact(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            IdfKind::LinearCross => self.impact[i * self.assets() + j],
            _ if i == j => self.impact[i],
            _ => 0.0,
        }
    }

    /// Prices for aggregate liquidation `ell`. Rejects liquidations outside
    /// `[0, supply]` (up to a relative slack of 1e-12 for round-off).
    pub fn price(&self, ell: &[f64]) -> Result<Vec<f64>> {
        if ell.len() != self.assets() {
            return Err(Error::shape(
                "idf",
                format!("expected {} liquidations, got {}", self.assets(), ell.len()),
            ));
        }
        for (m, (&l, &s)) in ell.iter().zip(&self.supply).enumerate() {
            let slack = 1e-12 * s.max(1.0);
            if !(l >= -slack && l <= s + slack) {
                return Err(Error::OutOfRange {
                    asset: m,
                    value: l,
                    max: s,
                });
            }
        }
        Ok(self.eval_unchecked(ell))
    }

    pub(crate) fn eval_unchecked(&self, ell: &[f64]) -> Vec<f64> {
        let m = self.assets();
        match self.kind {
            IdfKind::Linear => (0..m).map(|i| self.base_price[i] - self.impact[i] * ell[i]).collect(),
            IdfKind::Exponential => (0..m)
                .map(|i| self.base_price[i] * (-self.impact[i] * ell[i]).exp())
                .collect(),
            IdfKind::Arctangent => (0..m)
                .map(|i| self.base_price[i] * ((-ell[i]).atan() + 2.0 * PI) / (2.0 * PI))
                .collect(),
            IdfKind::LinearCross => (0..m)
                .map(|i| {
                    let row = &self.impact[i * m..(i + 1) * m];
                    self.base_price[i] - row.iter().zip(ell).map(|(d, l)| d * l).sum::<f64>()
                })
                .collect(),
        }
    }
}

fn check_common(base_price: &[f64], supply: &[f64], problems: &mut Vec<String>) {
    if supply.is_empty() {
        problems.push("idf.supply: at least one asset is required".into());
    }
    if base_price.len() != supply.len() {
        problems.push(format!(
            "idf.base_price: expected {} entries, got {}",
            supply.len(),
            base_price.len()
        ));
    }
    if base_price.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        problems.push("idf.base_price: entries must be positive".into());
    }
    if supply.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        problems.push("idf.supply: entries must be positive".into());
    }
}
