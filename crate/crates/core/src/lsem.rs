//! Linear structural equation models: specification, random generation,
//! exact covariance, sampling and path-method causal effects.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{default_labels, Dataset};
use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::linalg::{spd_solve, submatrix, subcolumn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorFamily {
    #[default]
    Gaussian,
    /// Uniform on `[-sqrt(3v), sqrt(3v)]`.
    UniformCentered,
    /// `+-sqrt(v)` with equal probability.
    RademacherScaled,
}

impl ErrorFamily {
    fn draw<R: Rng + ?Sized>(self, variance: f64, rng: &mut R) -> f64 {
        match self {
            ErrorFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                variance.sqrt() * z
            }
            ErrorFamily::UniformCentered => {
                let h = (3.0 * variance).sqrt();
                rng.random_range(-h..h)
            }
            ErrorFamily::RademacherScaled => {
                if rng.random::<bool>() {
                    variance.sqrt()
                } else {
                    -variance.sqrt()
                }
            }
        }
    }
}

/// A linear SEM `X - mu = B^T (X - mu) + eps` over a DAG.
///
/// `weights[(i, j)]` (0-based storage) is the coefficient of edge `i+1 -> j+1`
/// and is nonzero exactly on the DAG's edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct LsemSpec {
    dag: Dag,
    weights: DMatrix<f64>,
    error_variances: Vec<f64>,
    error_family: ErrorFamily,
    means: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeJson {
    from: usize,
    to: usize,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    p: usize,
    edges: Vec<EdgeJson>,
    error_variances: Vec<f64>,
    #[serde(default)]
    error_family: ErrorFamily,
    #[serde(default)]
    means: Option<Vec<f64>>,
}

impl TryFrom<SpecJson> for LsemSpec {
    type Error = Error;

    fn try_from(s: SpecJson) -> Result<Self> {
        let edges: Vec<(usize, usize, f64)> = s.edges.iter().map(|e| (e.from, e.to, e.weight)).collect();
        let means = s.means.unwrap_or_else(|| vec![0.0; s.p]);
        LsemSpec::from_weighted_edges(s.p, &edges, s.error_variances, s.error_family, means)
    }
}

impl From<LsemSpec> for SpecJson {
    fn from(s: LsemSpec) -> Self {
        SpecJson {
            p: s.p(),
            edges: s
                .weighted_edges()
                .into_iter()
                .map(|(from, to, weight)| EdgeJson { from, to, weight })
                .collect(),
            error_variances: s.error_variances,
            error_family: s.error_family,
            means: Some(s.means),
        }
    }
}

impl LsemSpec {
    pub fn new(
        dag: Dag,
        weights: DMatrix<f64>,
        error_variances: Vec<f64>,
        error_family: ErrorFamily,
        means: Vec<f64>,
    ) -> Result<Self> {
        let p = dag.node_count();
        if weights.shape() != (p, p) {
            return Err(Error::InvalidSpec(format!(
                "weight matrix is {:?}, expected {p}x{p}",
                weights.shape()
            )));
        }
        for i in 0..p {
            for j in 0..p {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::InvalidSpec(format!("weight {}->{} is not finite", i + 1, j + 1)));
                }
                if (w != 0.0) != dag.has_edge(i + 1, j + 1) {
                    return Err(Error::InvalidSpec(format!(
                        "weight pattern disagrees with the DAG at {}->{}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if error_variances.len() != p || error_variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidSpec("error variances must be p positive finite numbers".into()));
        }
        if means.len() != p || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec("means must be p finite numbers".into()));
        }
        Ok(LsemSpec {
            dag,
            weights,
            error_variances,
            error_family,
            means,
        })
    }

    /// Builds a spec from 1-indexed `(from, to, weight)` triples.
    pub fn from_weighted_edges(
        p: usize,
        edges: &[(usize, usize, f64)],
        error_variances: Vec<f64>,
        error_family: ErrorFamily,
        means: Vec<f64>,
    ) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let dag = Dag::from_edges(p, &pairs)?;
        let mut w = DMatrix::zeros(p, p);
        for &(i, j, b) in edges {
            if b == 0.0 {
                return Err(Error::InvalidSpec(format!("edge {i}->{j} has zero weight")));
            }
            w[(i - 1, j - 1)] = b;
        }
        LsemSpec::new(dag, w, error_variances, error_family, means)
    }

    pub fn p(&self) -> usize {
        self.dag.node_count()
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Weight of edge `i -> j` (1-indexed); 0 if absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i - 1, j - 1)]
    }

    pub fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        self.dag
            .edges()
            .into_iter()
            .map(|(i, j)| (i, j, self.weight(i, j)))
            .collect()
    }

    pub fn error_variances(&self) -> &[f64] {
        &self.error_variances
    }

    pub fn error_family(&self) -> ErrorFamily {
        self.error_family
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn with_error_family(mut self, family: ErrorFamily) -> Self {
        self.error_family = family;
        self
    }

    pub fn with_means(mut self, means: Vec<f64>) -> Result<Self> {
        if means.len() != self.p() || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec("means must be p finite numbers".into()));
        }
        self.means = means;
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `(I - B)^{-1}`, whose `(i, k)` entry is the sum over directed paths
/// `i -> ... -> k` of edge-weight products.
fn path_matrix(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = b.nrows();
    (DMatrix::identity(p, p) - b)
        .try_inverse()
        .ok_or_else(|| Error::InvalidSpec("I - B is singular".into()))
}

/// Population covariance `(I - B^T)^{-1} D (I - B)^{-1}`.
pub fn covariance_of(spec: &LsemSpec) -> Result<DMatrix<f64>> {
    let a = path_matrix(&spec.weights)?;
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.error_variances));
    let s = a.transpose() * d * &a;
    Ok((&s + s.transpose()) * 0.5)
}

/// Random SEM before standardization: Erdos-Renyi mediator DAG on
/// `X2..X_{p-1}` with mean degree `expected_degree`, treatment edges
/// `X1 -> Xj` with probability `p_treat`, response edges `Xj -> Xp`
/// (`j = 1..p-1`) with probability `p_resp`.
pub fn generate_random_lsem_raw<R: Rng + ?Sized>(
    p: usize,
    expected_degree: f64,
    p_treat: f64,
    p_resp: f64,
    rng: &mut R,
) -> Result<LsemSpec> {
    if p < 3 {
        return Err(Error::InvalidSpec(format!("need p >= 3, got {p}")));
    }
    let m = p - 2;
    let pair_prob = if m < 2 {
        0.0
    } else {
        expected_degree / (m - 1) as f64
    };
    if !(0.0..=1.0).contains(&pair_prob) || !(0.0..=1.0).contains(&p_treat) || !(0.0..=1.0).contains(&p_resp) {
        return Err(Error::InvalidSpec(format!(
            "edge probabilities out of range (degree {expected_degree}, p = {p})"
        )));
    }
    let mut edges = Vec::new();
    for i in 2..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < pair_prob {
                edges.push((i, j));
            }
        }
    }
    for j in 2..p {
        if rng.random::<f64>() < p_treat {
            edges.push((1, j));
        }
    }
    for j in 1..p {
        if rng.random::<f64>() < p_resp {
            edges.push((j, p));
        }
    }
    edges.sort_unstable();
    let weighted: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(i, j)| {
            let mag = rng.random_range(0.5..=1.0);
            let w = if rng.random::<bool>() { mag } else { -mag };
            (i, j, w)
        })
        .collect();
    let variances = (0..p).map(|_| rng.random_range(0.5..=1.0)).collect();
    LsemSpec::from_weighted_edges(p, &weighted, variances, ErrorFamily::Gaussian, vec![0.0; p])
}

/// Rescales every variable to unit population variance: `X'_i = X_i / s_i`,
/// so `B'_ik = B_ik s_i / s_k`, `D'_k = D_k / s_k^2`, `mu'_k = mu_k / s_k`.
pub fn standardize(spec: &LsemSpec) -> Result<LsemSpec> {
    let sigma = covariance_of(spec)?;
    let p = spec.p();
    let s: Vec<f64> = (0..p).map(|i| sigma[(i, i)].sqrt()).collect();
    let w = DMatrix::from_fn(p, p, |i, k| spec.weights[(i, k)] * s[i] / s[k]);
    let d = (0..p).map(|k| spec.error_variances[k] / (s[k] * s[k])).collect();
    let mu = (0..p).map(|k| spec.means[k] / s[k]).collect();
    LsemSpec::new(spec.dag.clone(), w, d, spec.error_family, mu)
}

/// Random standardized SEM following the simulation protocol.
pub fn generate_random_lsem<R: Rng + ?Sized>(
    p: usize,
    expected_degree: f64,
    p_treat: f64,
    p_resp: f64,
    rng: &mut R,
) -> Result<LsemSpec> {
    standardize(&generate_random_lsem_raw(p, expected_degree, p_treat, p_resp, rng)?)
}

/// Draws `n` i.i.d. rows, generating variables in topological order.
pub fn sample<R: Rng + ?Sized>(spec: &LsemSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    let p = spec.p();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let parents: Vec<Vec<usize>> = (1..=p).map(|v| spec.dag.parents(v)).collect();
    let order = spec.dag.topological_order();
    for r in 0..n {
        for &v in &order {
            let k = v - 1;
            let mut val = spec.error_family.draw(spec.error_variances[k], rng);
            for &u in &parents[k] {
                val += spec.weights[(u - 1, k)] * (x[(r, u - 1)] - spec.means[u - 1]);
            }
            x[(r, k)] = val + spec.means[k];
        }
    }
    Dataset::new(x, default_labels(p))
}

/// Sum over directed paths `source -> ... -> target` avoiding `held_fixed` of
/// the product of edge weights. Computed as an entry of `(I - B_H)^{-1}` where
/// `B_H` has the edges into `held_fixed` removed.
pub fn total_effect(spec: &LsemSpec, source: usize, target: usize, held_fixed: &[usize]) -> f64 {
    if source == target {
        return 1.0;
    }
    let mut b = spec.weights.clone();
    for &h in held_fixed {
        b.column_mut(h - 1).fill(0.0);
    }
    let a = path_matrix(&b).expect("I - B is invertible for a DAG");
    a[(source - 1, target - 1)]
}

/// `theta_1j * theta_jp`.
pub fn mediation_effect(spec: &LsemSpec, j: usize) -> f64 {
    let p = spec.p();
    total_effect(spec, 1, j, &[]) * total_effect(spec, j, p, &[])
}

/// Coefficient of `X_i` in the population regression of `X_k` on
/// `(X_i, X_adjust)`.
pub fn adjustment_effect(sigma: &DMatrix<f64>, i: usize, k: usize, adjust: &[usize]) -> Result<f64> {
    let mut idx = vec![i - 1];
    idx.extend(adjust.iter().map(|a| a - 1));
    let s = submatrix(sigma, &idx, &idx);
    let c = subcolumn(sigma, &idx, k - 1);
    let beta = spd_solve(&s, &c, "adjustment regression")?;
    Ok(beta[0])
}
