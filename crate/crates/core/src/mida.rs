//! The MIDA estimator of individual mediation effects over the Markov
//! equivalence class of a mediator CPDAG, with plug-in asymptotic variance.
//!
//! The mediator CPDAG has `p - 2` nodes; node `m` stands for `X_{m+1}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::{Cpdag, MecIndex, DEFAULT_MAX_COMPONENT_SIZE};
use crate::linalg::{spd_inverse, submatrix, subcolumn};
use crate::stats::{normal_quantile, two_sided_p};

/// One distinct parent set of `X_j` and its adjusted coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEntry {
    /// Parents of `X_j` as full-model labels (2..p-1).
    pub parents: Vec<usize>,
    pub multiplicity: u128,
    /// Coefficient of `X_j` regressing `X_p` on `(X_j, X_1, parents)`.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MidaResult {
    pub j: usize,
    pub n: usize,
    pub theta1j_hat: f64,
    pub theta_multiset: Vec<ThetaEntry>,
    pub aver_theta: f64,
    pub eta_hat: f64,
    pub avar_hat: f64,
    /// Plug-in asymptotic variance of `theta1j_hat` alone.
    pub theta1j_avar_hat: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub mec_size: u128,
}

pub const RESULT_HEADER: [&str; 11] = [
    "j",
    "theta1j_hat",
    "aver_theta",
    "eta_hat",
    "se",
    "t_stat",
    "p_value",
    "ci_low",
    "ci_high",
    "n_parent_sets",
    "mec_size",
];

impl MidaResult {
    /// Standard error `sqrt(avar / n)`.
    pub fn se(&self) -> f64 {
        (self.avar_hat / self.n as f64).sqrt()
    }

    /// Two-sided p-value for `theta_1j = 0`.
    pub fn theta1j_p_value(&self) -> f64 {
        if self.theta1j_avar_hat > 0.0 {
            two_sided_p((self.n as f64).sqrt() * self.theta1j_hat / self.theta1j_avar_hat.sqrt())
        } else {
            1.0
        }
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.j.to_string(),
            self.theta1j_hat.to_string(),
            self.aver_theta.to_string(),
            self.eta_hat.to_string(),
            self.se().to_string(),
            self.t_stat.to_string(),
            self.p_value.to_string(),
            self.ci_low.to_string(),
            self.ci_high.to_string(),
            self.theta_multiset.len().to_string(),
            self.mec_size.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inference {
    pub t_stat: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wald statistic `sqrt(n) eta / sqrt(avar)`, two-sided normal p-value and
/// the normal confidence interval at `level`.
pub fn infer(eta_hat: f64, avar_hat: f64, n: usize, level: f64) -> Result<Inference> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
    }
    if !(avar_hat > 0.0 && avar_hat.is_finite()) {
        return Err(Error::DegenerateVariance(format!("asymptotic variance is {avar_hat}")));
    }
    let nf = n as f64;
    let t = nf.sqrt() * eta_hat / avar_hat.sqrt();
    let half = normal_quantile(1.0 - (1.0 - level) / 2.0) * (avar_hat / nf).sqrt();
    Ok(Inference {
        t_stat: t,
        p_value: two_sided_p(t),
        ci_low: eta_hat - half,
        ci_high: eta_hat + half,
    })
}

/// Sample moments of one dataset, shared by the regressions for all mediators.
#[derive(Debug, Clone)]
pub struct MidaContext {
    n: usize,
    p: usize,
    centered: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl MidaContext {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.p() < 3 {
            return Err(Error::InvalidData(format!("need at least 3 columns, got {}", data.p())));
        }
        let centered = data.centered();
        let cov = (centered.transpose() * &centered) / data.n() as f64;
        if !(cov[(0, 0)] > 0.0) {
            return Err(Error::InvalidData("treatment column has zero sample variance".into()));
        }
        Ok(MidaContext {
            n: data.n(),
            p: data.p(),
            centered,
            cov,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Sample covariance (divisor `n`).
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Runs the estimator for mediator `X_j` given the equivalence class of
    /// the mediator CPDAG.
    pub fn estimate(&self, mec: &MecIndex, j: usize, level: f64) -> Result<MidaResult> {
        let p = self.p;
        if mec.node_count() + 2 != p {
            return Err(Error::InvalidGraph(format!(
                "mediator graph has {} nodes but the data has {p} columns",
                mec.node_count()
            )));
        }
        if j < 2 || j > p - 1 {
            return Err(Error::InvalidData(format!("mediator index {j} outside 2..={}", p - 1)));
        }
        let multiset = mec.parent_set_multiset(j - 1)?;
        let total = multiset.total() as f64;
        let (n, x, cov) = (self.n, &self.centered, &self.cov);
        let (c1, cj, cp) = (0, j - 1, p - 1);

        let s11 = cov[(c1, c1)];
        let theta = cov[(c1, cj)] / s11;

        // per observation: aver-independent part of the first term, and the
        // weighted sum over parent sets of e1' Sigma_S^{-1} x_S r_{p|S}
        let a: Vec<f64> = (0..n)
            .map(|r| x[(r, c1)] * (x[(r, cj)] - theta * x[(r, c1)]) / s11)
            .collect();
        let mut b = vec![0.0; n];
        let mut entries = Vec::with_capacity(multiset.entries.len());
        let mut aver = 0.0;
        for (pa_nodes, mult) in &multiset.entries {
            let parents: Vec<usize> = pa_nodes.iter().map(|m| m + 1).collect();
            let mut idx = vec![cj, c1];
            idx.extend(parents.iter().map(|v| v - 1));
            if idx.len() >= n {
                return Err(Error::InvalidData(format!(
                    "adjustment set of size {} needs more than {n} observations",
                    idx.len()
                )));
            }
            let inv = spd_inverse(&submatrix(cov, &idx, &idx), "MIDA adjustment regression")?;
            let beta_s = &inv * subcolumn(cov, &idx, cp);
            let g = inv.column(0).into_owned();
            let w = *mult as f64 / total;
            for (r, br) in b.iter_mut().enumerate() {
                let mut fitted = 0.0;
                let mut lin = 0.0;
                for (k, &c) in idx.iter().enumerate() {
                    fitted += x[(r, c)] * beta_s[k];
                    lin += x[(r, c)] * g[k];
                }
                *br += w * lin * (x[(r, cp)] - fitted);
            }
            aver += w * beta_s[0];
            entries.push(ThetaEntry {
                parents,
                multiplicity: *mult,
                beta: beta_s[0],
            });
        }
        let eta = theta * aver;
        let nf = n as f64;
        let avar = a
            .iter()
            .zip(&b)
            .map(|(ar, br)| {
                let v = aver * ar + theta * br;
                v * v
            })
            .sum::<f64>()
            / nf;
        let theta_avar = a.iter().map(|v| v * v).sum::<f64>() / nf;
        let inf = infer(eta, avar, n, level)?;
        Ok(MidaResult {
            j,
            n,
            theta1j_hat: theta,
            theta_multiset: entries,
            aver_theta: aver,
            eta_hat: eta,
            avar_hat: avar,
            theta1j_avar_hat: theta_avar,
            t_stat: inf.t_stat,
            p_value: inf.p_value,
            ci_low: inf.ci_low,
            ci_high: inf.ci_high,
            level,
            mec_size: mec.mec_size(),
        })
    }

    /// Estimates for every mediator `X_2..X_{p-1}`.
    pub fn estimate_all(&self, mec: &MecIndex, level: f64) -> Result<Vec<MidaResult>> {
        (2..self.p).map(|j| self.estimate(mec, j, level)).collect()
    }
}

fn check_cpdag(data: &Dataset, cpdag: &Cpdag) -> Result<()> {
    if cpdag.node_count() + 2 != data.p() {
        return Err(Error::InvalidGraph(format!(
            "mediator CPDAG has {} nodes but the data has {} columns",
            cpdag.node_count(),
            data.p()
        )));
    }
    Ok(())
}

/// Estimates the mediation effect of `X_j` from the original data and the
/// mediator CPDAG.
pub fn mida_estimate(data: &Dataset, cpdag_mediators: &Cpdag, j: usize, level: f64) -> Result<MidaResult> {
    check_cpdag(data, cpdag_mediators)?;
    let mec = MecIndex::new(cpdag_mediators, DEFAULT_MAX_COMPONENT_SIZE)?;
    MidaContext::new(data)?.estimate(&mec, j, level)
}

/// The plug-in asymptotic variance alone.
pub fn plug_in_avar(data: &Dataset, cpdag_mediators: &Cpdag, j: usize) -> Result<f64> {
    Ok(mida_estimate(data, cpdag_mediators, j, 0.95)?.avar_hat)
}

/// Population quantities of the identifiable target for one mediator.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTarget {
    pub j: usize,
    /// `beta_1j`, equal to `theta_1j` since `X_1` has no parents.
    pub theta1j: f64,
    /// Multiplicity-weighted mean of population adjusted coefficients.
    pub aver: f64,
    /// `theta1j * aver`.
    pub eta_cpdag: f64,
}

/// Population analog of the estimator over the MEC of the true mediator CPDAG.
pub fn population_target(sigma: &DMatrix<f64>, mec: &MecIndex, j: usize) -> Result<PopulationTarget> {
    let p = sigma.nrows();
    let theta = sigma[(0, j - 1)] / sigma[(0, 0)];
    let ms = mec.parent_set_multiset(j - 1)?;
    let total = ms.total() as f64;
    let mut aver = 0.0;
    for (pa_nodes, mult) in &ms.entries {
        let mut idx = vec![j - 1, 0];
        idx.extend(pa_nodes.iter().copied());
        let inv = spd_inverse(&submatrix(sigma, &idx, &idx), "population adjustment")?;
        let beta = (inv.row(0) * subcolumn(sigma, &idx, p - 1))[0];
        aver += *mult as f64 / total * beta;
    }
    Ok(PopulationTarget {
        j,
        theta1j: theta,
        aver,
        eta_cpdag: theta * aver,
    })
}

/// Per-observation influence values under known population moments.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSample {
    pub z_jp: Vec<f64>,
    pub z_1j: Vec<f64>,
}

/// `Z_jp = L^{-1} sum_l e1' Sigma_{S_l}^{-1} (X_{S_l} - mu) R_{p|S_l}` with
/// population residuals, and `Z_1j = (X_1 - mu_1) R_{j|1} / Sigma_11`.
pub fn influence_values(
    data: &Dataset,
    sigma: &DMatrix<f64>,
    means: &[f64],
    cpdag_true: &Cpdag,
    j: usize,
) -> Result<InfluenceSample> {
    check_cpdag(data, cpdag_true)?;
    let mec = MecIndex::new(cpdag_true, DEFAULT_MAX_COMPONENT_SIZE)?;
    let ms = mec.parent_set_multiset(j - 1)?;
    let total = ms.total() as f64;
    let (n, p) = (data.n(), data.p());
    let x = data.matrix();
    let dev = |r: usize, c: usize| x[(r, c)] - means[c];
    let theta = sigma[(0, j - 1)] / sigma[(0, 0)];
    let z_1j = (0..n)
        .map(|r| dev(r, 0) * (dev(r, j - 1) - theta * dev(r, 0)) / sigma[(0, 0)])
        .collect();
    let mut z_jp = vec![0.0; n];
    for (pa_nodes, mult) in &ms.entries {
        let mut idx = vec![j - 1, 0];
        idx.extend(pa_nodes.iter().copied());
        let inv = spd_inverse(&submatrix(sigma, &idx, &idx), "population adjustment")?;
        let coef: DVector<f64> = &inv * subcolumn(sigma, &idx, p - 1);
        let g = inv.column(0).into_owned();
        let w = *mult as f64 / total;
        for (r, z) in z_jp.iter_mut().enumerate() {
            let mut resid = dev(r, p - 1);
            let mut lin = 0.0;
            for (k, &c) in idx.iter().enumerate() {
                resid -= coef[k] * dev(r, c);
                lin += g[k] * dev(r, c);
            }
            *z += w * lin * resid;
        }
    }
    Ok(InfluenceSample { z_jp, z_1j })
}

/// Draws of `W = W1 W2 / sqrt(W1^2 + W2^2 + 2 rho W1 W2)` for standard
/// bivariate normal `(W1, W2)` with correlation `rho`.
pub fn sample_w<R: Rng + ?Sized>(rho: f64, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::Config(format!("rho must lie in (-1, 1), got {rho}")));
    }
    let s = (1.0 - rho * rho).sqrt();
    Ok((0..m)
        .map(|_| {
            let u: f64 = StandardNormal.sample(rng);
            let v: f64 = StandardNormal.sample(rng);
            w_transform(u, rho * u + s * v, rho)
        })
        .collect())
}

/// `w1 w2 / sqrt(w1^2 + w2^2 + 2 rho w1 w2)`, and 0 when the denominator
/// vanishes.
pub fn w_transform(w1: f64, w2: f64, rho: f64) -> f64 {
    let d = w1 * w1 + w2 * w2 + 2.0 * rho * w1 * w2;
    if d <= f64::MIN_POSITIVE {
        0.0
    } else {
        w1 * w2 / d.sqrt()
    }
}
