//! Single-population Lee–Carter fits, `log m(x,t) = α(x) + β(x)·κ(t) + ε`,
//! estimated by the leading singular triplet of the row-centred log-rate
//! matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Σβ = 1, Σκ = 0.
    Standard,
    /// κ rescaled so that the endpoint drift equals 1.
    UnitDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeeCarterFit {
    /// Age effect: mean log rate per age group.
    pub alpha: Vec<f64>,
    /// Age response to the period index.
    pub beta: Vec<f64>,
    /// Period index.
    pub kappa: Vec<f64>,
    /// Age × year residuals of the rank-1 fit.
    pub residuals: DMatrix<f64>,
    /// All singular values of the centred matrix, descending.
    pub singular_values: Vec<f64>,
    pub normalization: Normalization,
}

impl LeeCarterFit {
    /// α + β κᵀ, age × year.
    pub fn fitted(&self) -> DMatrix<f64> {
        let na = self.alpha.len();
        let ny = self.kappa.len();
        DMatrix::from_fn(na, ny, |x, t| self.alpha[x] + self.beta[x] * self.kappa[t])
    }

    /// Random-walk drift estimate `(κ_T − κ_1) / (T − 1)`.
    pub fn drift(&self) -> f64 {
        let t = self.kappa.len();
        (self.kappa[t - 1] - self.kappa[0]) / (t - 1) as f64
    }

    /// Share of centred variance captured by the first singular triplet.
    pub fn explained_fraction(&self) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        self.singular_values[0].powi(2) / total
    }
}

/// Fit on an age × year matrix of log central death rates.
pub fn fit_lee_carter(logm: &DMatrix<f64>) -> Result<LeeCarterFit> {
    let (na, ny) = logm.shape();
    if na < 2 || ny < 2 {
        return Err(Error::domain(format!(
            "Lee-Carter needs at least 2 ages and 2 years, got {na}x{ny}"
        )));
    }
    if logm.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("log-rate matrix has non-finite entries"));
    }

    let mut alpha: Vec<f64> = logm.row_iter().map(|r| r.mean()).collect();
    let centred = DMatrix::from_fn(na, ny, |x, t| logm[(x, t)] - alpha[x]);
    let scale = logm.amax().max(1.0);
    if centred.amax() <= 1e-12 * scale {
        return Err(Error::DegenerateFit(
            "log rates are constant in time".into(),
        ));
    }

    let svd = thin_svd(&centred);
    let (u, v_t) = (&svd.u, &svd.v_t);
    let s1 = svd.singular_values[0];
    let u1: DVector<f64> = u.column(0).into_owned();
    let v1: Vec<f64> = v_t.row(0).iter().copied().collect();

    let sum_u = u1.sum();
    if sum_u.abs() < 1e-10 {
        return Err(Error::DegenerateFit(
            "age loadings sum to zero; Σβ = 1 cannot be imposed".into(),
        ));
    }
    // Dividing by Σu also fixes the sign so that Σβ = 1 > 0.
    let beta: Vec<f64> = u1.iter().map(|b| b / sum_u).collect();
    let mut kappa: Vec<f64> = v1.iter().map(|k| k * s1 * sum_u).collect();

    let mean_k = kappa.iter().sum::<f64>() / ny as f64;
    for k in &mut kappa {
        *k -= mean_k;
    }
    for (a, b) in alpha.iter_mut().zip(&beta) {
        *a += b * mean_k;
    }

    let mut fit = LeeCarterFit {
        alpha,
        beta,
        kappa,
        residuals: DMatrix::zeros(na, ny),
        singular_values: svd.singular_values.iter().copied().collect(),
        normalization: Normalization::Standard,
    };
    fit.residuals = logm - fit.fitted();
    Ok(fit)
}

/// Reparameterise to unit drift: β' = β·c, κ' = κ/c with c the endpoint
/// drift. The fitted surface is unchanged.
pub fn rescale_unit_drift(fit: &LeeCarterFit) -> Result<LeeCarterFit> {
    let c = fit.drift();
    if c == 0.0 || !c.is_finite() {
        return Err(Error::DegenerateDrift);
    }
    Ok(LeeCarterFit {
        alpha: fit.alpha.clone(),
        beta: fit.beta.iter().map(|b| b * c).collect(),
        kappa: fit.kappa.iter().map(|k| k / c).collect(),
        residuals: fit.residuals.clone(),
        singular_values: fit.singular_values.clone(),
        normalization: Normalization::UnitDrift,
    })
}
