use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// B-spline basis on a clamped knot vector (boundary knots repeated
/// `degree + 1` times).
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// `n_basis − degree − 1` equally spaced interior knots on `[t_min, t_max]`.
    pub fn clamped_uniform(t_min: f64, t_max: f64, n_basis: usize, degree: usize) -> Result<Self> {
        if n_basis < degree + 1 {
            return Err(Error::domain(format!(
                "n_basis = {n_basis} below degree + 1 = {}",
                degree + 1
            )));
        }
        if !(t_max > t_min) {
            return Err(Error::domain("spline domain is empty"));
        }
        let interior = n_basis - degree - 1;
        let mut knots = vec![t_min; degree + 1];
        let step = (t_max - t_min) / (interior + 1) as f64;
        knots.extend((1..=interior).map(|i| t_min + step * i as f64));
        knots.extend(std::iter::repeat_n(t_max, degree + 1));
        Ok(BSplineBasis { degree, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Values of every basis function at `t` (Cox–de Boor). Points outside
    /// the domain are clamped to it; the right endpoint belongs to the last
    /// span.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let p = self.degree;
        let n = self.len();
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        // Span index s with knots[s] <= t < knots[s+1], p <= s < n.
        let span = if t >= hi {
            n - 1
        } else {
            let mut s = p;
            while s + 1 < n && self.knots[s + 1] <= t {
                s += 1;
            }
            s
        };

        // Triangular de Boor recursion over the p+1 nonzero functions.
        let mut local = vec![0.0; p + 1];
        local[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { local[r] / denom };
                local[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            local[j] = saved;
        }
        let mut values = vec![0.0; n];
        for (r, v) in local.into_iter().enumerate() {
            values[span - p + r] = v;
        }
        values
    }

    /// Observation × basis design matrix.
    pub fn design_matrix(&self, times: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(times.len(), self.len());
        for (i, &t) in times.iter().enumerate() {
            for (j, v) in self.evaluate(t).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub coefficients: Vec<f64>,
    pub basis: BSplineBasis,
}

impl SplineFit {
    pub fn domain(&self) -> (f64, f64) {
        self.basis.domain()
    }

    pub fn n_basis(&self) -> usize {
        self.basis.len()
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.basis
            .evaluate(t)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }
}

/// Least-squares B-spline fit of `values` observed at strictly increasing
/// `times`, on clamped uniform knots spanning the observation range.
pub fn fit_bspline(times: &[f64], values: &[f64], n_basis: usize, degree: usize) -> Result<SplineFit> {
    if times.len() != values.len() {
        return Err(Error::domain("times and values differ in length"));
    }
    if times.len() < n_basis {
        return Err(Error::Underdetermined {
            points: times.len(),
            basis: n_basis,
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("observation times must be strictly increasing"));
    }
    let basis = BSplineBasis::clamped_uniform(times[0], times[times.len() - 1], n_basis, degree)?;
    let design = basis.design_matrix(times);
    let y = DVector::from_column_slice(values);

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < n_basis {
        return Err(Error::Underdetermined {
            points: rank,
            basis: n_basis,
        });
    }
    let coef = svd
        .solve(&y, 1e-14 * smax)
        .map_err(|e| Error::domain(e.to_string()))?;
    Ok(SplineFit {
        coefficients: coef.iter().copied().collect(),
        basis,
    })
}
