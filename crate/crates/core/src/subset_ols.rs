//! Centered least squares over arbitrary covariate subsets, the exact
//! first-order decomposition of `beta_hat_S - beta_S`, uniform diagnostics
//! over a subset collection, and the non-asymptotic envelope formulas.
//!
//! Subsets and responses are 1-indexed columns of the dataset (or rows of a
//! population covariance over the same variables).

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, spd_solve, spectral_norm, subcolumn, submatrix};
use crate::stats;

fn zero_based(subset: &[usize]) -> Vec<usize> {
    subset.iter().map(|s| s - 1).collect()
}

fn check_subset(p: usize, n: usize, response: usize, subset: &[usize]) -> Result<()> {
    if response == 0 || response > p {
        return Err(Error::InvalidData(format!("response {response} outside 1..={p}")));
    }
    for (k, &s) in subset.iter().enumerate() {
        if s == 0 || s > p {
            return Err(Error::InvalidData(format!("covariate {s} outside 1..={p}")));
        }
        if s == response {
            return Err(Error::InvalidData(format!("response {response} is also a covariate")));
        }
        if subset[..k].contains(&s) {
            return Err(Error::InvalidData(format!("covariate {s} repeated")));
        }
    }
    if subset.len() >= n {
        return Err(Error::InvalidData(format!(
            "subset of size {} needs more than {n} observations",
            subset.len()
        )));
    }
    Ok(())
}

/// Result of regressing a centered response on a centered subset.
#[derive(Debug, Clone)]
pub struct SubsetFit {
    pub subset: Vec<usize>,
    pub beta_hat: DVector<f64>,
    pub sigma_hat_s: DMatrix<f64>,
    pub sigma_hat_sy: DVector<f64>,
}

/// Fits `beta_hat_S = Sigma_hat_S^{-1} Sigma_hat_{S,Y}` from data.
pub fn fit_subset(data: &Dataset, response: usize, subset: &[usize]) -> Result<SubsetFit> {
    check_subset(data.p(), data.n(), response, subset)?;
    let mut cols: Vec<usize> = subset.to_vec();
    cols.push(response);
    let local = data.select_columns(&cols)?.covariance();
    let k = subset.len();
    let local_subset: Vec<usize> = (1..=k).collect();
    let mut fit = fit_from_covariance(&local, k + 1, &local_subset)?;
    fit.subset = subset.to_vec();
    Ok(fit)
}

/// Same fit computed from a precomputed sample covariance (divisor `n`).
pub fn fit_from_covariance(cov: &DMatrix<f64>, response: usize, subset: &[usize]) -> Result<SubsetFit> {
    let idx = zero_based(subset);
    let sigma_hat_s = submatrix(cov, &idx, &idx);
    let sigma_hat_sy = subcolumn(cov, &idx, response - 1);
    let beta_hat = spd_solve(&sigma_hat_s, &sigma_hat_sy, "subset regression")?;
    Ok(SubsetFit {
        subset: subset.to_vec(),
        beta_hat,
        sigma_hat_s,
        sigma_hat_sy,
    })
}

/// Target parameter `beta_S = Sigma_S^{-1} Sigma_{S,Y}`.
pub fn population_beta(sigma: &DMatrix<f64>, response: usize, subset: &[usize]) -> Result<DVector<f64>> {
    let idx = zero_based(subset);
    spd_solve(
        &submatrix(sigma, &idx, &idx),
        &subcolumn(sigma, &idx, response - 1),
        "population regression",
    )
}

/// Coefficients `Sigma_{iS} Sigma_SS^{-1}` of the population residual
/// `R_{i|S} = X_i - mu_i - coeffs^T (X_S - mu_S)`.
pub fn population_residual_coeffs(sigma: &DMatrix<f64>, i: usize, subset: &[usize]) -> Result<DVector<f64>> {
    population_beta(sigma, i, subset)
}

/// The terms of `beta_hat_S - beta_S = psi_mean + t_term + r_term`.
#[derive(Debug, Clone)]
pub struct AleDecomposition {
    pub beta_hat: DVector<f64>,
    pub beta: DVector<f64>,
    /// Sample mean of the influence function `Psi_S(Z)`.
    pub psi_mean: DVector<f64>,
    pub t_term: DVector<f64>,
    pub r_term: DVector<f64>,
    pub sigma_hat_s: DMatrix<f64>,
    pub sigma_hat_sy: DVector<f64>,
    /// Second moments about the true means.
    pub sigma_tilde_s: DMatrix<f64>,
    pub sigma_tilde_sy: DVector<f64>,
    /// Outer products of the mean errors.
    pub gamma_hat_s: DMatrix<f64>,
    pub gamma_hat_sy: DVector<f64>,
}

impl AleDecomposition {
    /// Max-abs of `beta_hat - beta - (psi_mean + t_term + r_term)`.
    pub fn identity_error(&self) -> f64 {
        (&self.beta_hat - &self.beta - (&self.psi_mean + &self.t_term + &self.r_term)).amax()
    }
}

/// Computes every term of the decomposition from its definition.
pub fn decompose(
    data: &Dataset,
    response: usize,
    subset: &[usize],
    true_sigma: &DMatrix<f64>,
    true_means: &[f64],
) -> Result<AleDecomposition> {
    check_subset(data.p(), data.n(), response, subset)?;
    let fit = fit_subset(data, response, subset)?;
    let idx = zero_based(subset);
    let y = response - 1;
    let n = data.n() as f64;
    let x = data.matrix();
    let k = idx.len();

    let mut sigma_tilde_s = DMatrix::<f64>::zeros(k, k);
    let mut sigma_tilde_sy = DVector::<f64>::zeros(k);
    let mut xt = DVector::<f64>::zeros(k);
    for r in 0..data.n() {
        for (a, &ia) in idx.iter().enumerate() {
            xt[a] = x[(r, ia)] - true_means[ia];
        }
        let yt = x[(r, y)] - true_means[y];
        sigma_tilde_s.ger(1.0, &xt, &xt, 1.0);
        sigma_tilde_sy.axpy(yt, &xt, 1.0);
    }
    sigma_tilde_s /= n;
    sigma_tilde_sy /= n;

    let means = data.means();
    let dx = DVector::from_fn(k, |a, _| means[idx[a]] - true_means[idx[a]]);
    let dy = means[y] - true_means[y];
    let gamma_hat_s = &dx * dx.transpose();
    let gamma_hat_sy = &dx * dy;

    let sigma_s = submatrix(true_sigma, &idx, &idx);
    let sigma_s_inv = spd_inverse(&sigma_s, "population covariance")?;
    let beta = &sigma_s_inv * subcolumn(true_sigma, &idx, y);
    let sigma_hat_inv = spd_inverse(&fit.sigma_hat_s, "sample covariance")?;

    let score = &sigma_tilde_sy - &sigma_tilde_s * &beta;
    let psi_mean = &sigma_s_inv * &score;
    let t_term = (&sigma_hat_inv - &sigma_s_inv) * &score;
    let r_term = &sigma_hat_inv * (&gamma_hat_s * &beta - &gamma_hat_sy);

    Ok(AleDecomposition {
        beta_hat: fit.beta_hat,
        beta,
        psi_mean,
        t_term,
        r_term,
        sigma_hat_s: fit.sigma_hat_s,
        sigma_hat_sy: fit.sigma_hat_sy,
        sigma_tilde_s,
        sigma_tilde_sy,
        gamma_hat_s,
        gamma_hat_sy,
    })
}

/// Suprema over a subset collection of the decomposition terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformDiagnostics {
    /// `max |S| + ln(number of subsets)`.
    pub r_n: f64,
    pub sup_beta_err: f64,
    pub sup_psi_mean: f64,
    pub sup_remainder: f64,
    pub sup_sigma_dev: f64,
    pub sup_sigma_inv_dev: f64,
}

pub fn uniform_diagnostics(
    data: &Dataset,
    response: usize,
    subsets: &[Vec<usize>],
    true_sigma: &DMatrix<f64>,
    true_means: &[f64],
) -> Result<UniformDiagnostics> {
    if subsets.is_empty() {
        return Err(Error::InvalidData("empty subset collection".into()));
    }
    let q = subsets.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = UniformDiagnostics {
        r_n: q as f64 + (subsets.len() as f64).ln(),
        sup_beta_err: 0.0,
        sup_psi_mean: 0.0,
        sup_remainder: 0.0,
        sup_sigma_dev: 0.0,
        sup_sigma_inv_dev: 0.0,
    };
    for s in subsets {
        let d = decompose(data, response, s, true_sigma, true_means)?;
        let idx = zero_based(s);
        let sigma_s = submatrix(true_sigma, &idx, &idx);
        let inv_dev = spd_inverse(&d.sigma_hat_s, "sample covariance")?
            - spd_inverse(&sigma_s, "population covariance")?;
        out.sup_beta_err = out.sup_beta_err.max((&d.beta_hat - &d.beta).norm());
        out.sup_psi_mean = out.sup_psi_mean.max(d.psi_mean.norm());
        out.sup_remainder = out.sup_remainder.max((&d.t_term + &d.r_term).norm());
        out.sup_sigma_dev = out.sup_sigma_dev.max(spectral_norm(&(&d.sigma_hat_s - &sigma_s)));
        out.sup_sigma_inv_dev = out.sup_sigma_inv_dev.max(spectral_norm(&inv_dev));
    }
    Ok(out)
}

/// A linear functional `sum_S a_S^T beta_S` of several subset regressions.
#[derive(Debug, Clone)]
pub struct LinearFunctional {
    pub terms: Vec<(Vec<usize>, DVector<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalStatistic {
    pub estimate: f64,
    pub target: f64,
    /// Sample sd of the per-observation influence values.
    pub sigma_xi: f64,
    /// `sqrt(n) (estimate - target) / sigma_xi`.
    pub standardized: f64,
}

impl LinearFunctional {
    /// Evaluates the functional on data and standardizes with the plug-in
    /// influence values `xi_r = sum_S a_S^T Sigma_hat_S^{-1} x_S (y - x_S^T beta_hat_S)`
    /// on sample-centered data.
    pub fn statistic(&self, data: &Dataset, response: usize, true_sigma: &DMatrix<f64>) -> Result<FunctionalStatistic> {
        let n = data.n();
        let centered = data.centered();
        let cov = (centered.transpose() * &centered) / n as f64;
        let y = response - 1;
        let mut estimate = 0.0;
        let mut target = 0.0;
        let mut xi = vec![0.0; n];
        for (subset, a) in &self.terms {
            check_subset(data.p(), n, response, subset)?;
            let fit = fit_from_covariance(&cov, response, subset)?;
            let beta = population_beta(true_sigma, response, subset)?;
            estimate += a.dot(&fit.beta_hat);
            target += a.dot(&beta);
            let w = spd_solve(&fit.sigma_hat_s, a, "subset regression")?;
            let idx = zero_based(subset);
            for (r, v) in xi.iter_mut().enumerate() {
                let mut fitted = 0.0;
                let mut lin = 0.0;
                for (k, &c) in idx.iter().enumerate() {
                    fitted += centered[(r, c)] * fit.beta_hat[k];
                    lin += centered[(r, c)] * w[k];
                }
                *v += lin * (centered[(r, y)] - fitted);
            }
        }
        let sigma_xi = stats::sd(&xi);
        if !(sigma_xi > 0.0) {
            return Err(Error::DegenerateVariance("influence values have zero spread".into()));
        }
        Ok(FunctionalStatistic {
            estimate,
            target,
            sigma_xi,
            standardized: (n as f64).sqrt() * (estimate - target) / sigma_xi,
        })
    }
}

/// Constants of the non-asymptotic envelopes. All must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub k_s: f64,
    pub ktilde_s: f64,
    pub lambda_inf: f64,
    pub lambda_sup: f64,
    pub lambdatilde_inf: f64,
    pub lambdatilde_sup: f64,
    pub sigma_y: f64,
    pub sigma_x: f64,
    pub c: f64,
    pub c_star: f64,
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_s,
            self.ktilde_s,
            self.lambda_inf,
            self.lambda_sup,
            self.lambdatilde_inf,
            self.lambdatilde_sup,
            self.sigma_y,
            self.sigma_x,
            self.c,
            self.c_star,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("envelope constants must be positive".into()));
        }
        if self.lambda_inf > self.lambda_sup {
            return Err(Error::Config("lambda_inf exceeds lambda_sup".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub eps1: f64,
    pub eps2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub delta: f64,
    pub first_order_bound: f64,
    pub remainder_bound: f64,
}

/// `r_n = q_n + ln L_n`.
pub fn r_n(q_n: usize, l_n: f64) -> f64 {
    q_n as f64 + l_n.ln()
}

/// Evaluates the envelope formulas at sample size `n`, maximal subset size
/// `q_n` and collection size `l_n`.
pub fn envelope(params: &EnvelopeParams, n: usize, q_n: usize, l_n: f64) -> Envelope {
    let EnvelopeParams {
        k_s,
        ktilde_s,
        lambda_inf,
        lambda_sup,
        lambdatilde_sup,
        sigma_y,
        c,
        ..
    } = *params;
    let n = n as f64;
    let r = r_n(q_n, l_n);
    let rt = r + 1.0;
    let cb = c + 1.0;
    let k_star = 2.0 * k_s / (lambda_inf * lambda_inf);
    let eps1 = cb * k_s * ((r / n).sqrt() + r / n);
    let eps2 = cb * ktilde_s * ((rt / n).sqrt() + rt / n);
    let eta1 = 32.0 * cb * k_s * r / n + lambda_sup / n;
    let eta2 = 32.0 * cb * ktilde_s * rt / n + lambdatilde_sup / n;
    let delta = cb * k_star * ((r / n).sqrt() + 33.0 * r / n) + 2.0 * lambda_sup / (n * lambda_inf * lambda_inf);
    let c_s = std::f64::consts::SQRT_2 * sigma_y / lambda_inf.sqrt();
    let first_order_bound = (eps1 * c_s + eps2) / lambda_inf;
    let remainder_bound = delta * (eps1 * c_s + eps2) + (delta + 1.0 / lambda_inf) * (eta1 * c_s + eta2);
    Envelope {
        eps1,
        eps2,
        eta1,
        eta2,
        delta,
        first_order_bound,
        remainder_bound,
    }
}

/// Whether `(c* + 1) K_S (sqrt(r/n) + 33 r/n) + lambda_sup / n <= lambda_inf / 2`.
pub fn c_star_condition_holds(params: &EnvelopeParams, n: usize, q_n: usize, l_n: f64) -> bool {
    let n = n as f64;
    let r = r_n(q_n, l_n);
    (params.c_star + 1.0) * params.k_s * ((r / n).sqrt() + 33.0 * r / n) + params.lambda_sup / n
        <= params.lambda_inf / 2.0
}
