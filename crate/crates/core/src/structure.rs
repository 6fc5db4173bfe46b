//! Residualization of mediators on the treatment and PC-style estimation of
//! the mediator CPDAG.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::{dag_to_cpdag, Cpdag, Dag, Pdag};
use crate::linalg::{spd_inverse, submatrix};
use crate::stats::two_sided_p;

/// Residuals of each mediator `X_2..X_{p-1}` on `X_1` (with intercept).
/// The returned dataset has `p - 2` columns; column `m` holds `X_{m+1}`.
pub fn residualize_on_treatment(data: &Dataset) -> Result<Dataset> {
    let (n, p) = (data.n(), data.p());
    if n < 3 {
        return Err(Error::InvalidData(format!("need at least 3 rows, got {n}")));
    }
    if p < 3 {
        return Err(Error::InvalidData(format!("need at least 3 columns, got {p}")));
    }
    let x = data.matrix();
    let x1 = x.column(0);
    let m1 = x1.mean();
    let c1 = x1.add_scalar(-m1);
    let v1 = c1.dot(&c1);
    if !(v1 > 0.0) || v1 <= 1e-24 * n as f64 * (m1 * m1).max(1.0) {
        return Err(Error::InvalidData("treatment column has zero sample variance".into()));
    }
    let mut out = DMatrix::zeros(n, p - 2);
    for j in 1..(p - 1) {
        let xj = x.column(j);
        let cj = xj.add_scalar(-xj.mean());
        let b = c1.dot(&cj) / v1;
        out.set_column(j - 1, &(cj - &c1 * b));
    }
    Dataset::new(out, data.labels()[1..p - 1].to_vec())
}

/// Population covariance of the mediator residuals on `X_1`:
/// `Sigma_ab - Sigma_a1 Sigma_1b / Sigma_11` for mediators `a, b`.
pub fn residualized_covariance(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let p = sigma.nrows();
    DMatrix::from_fn(p - 2, p - 2, |a, b| {
        sigma[(a + 1, b + 1)] - sigma[(a + 1, 0)] * sigma[(0, b + 1)] / sigma[(0, 0)]
    })
}

/// Partial correlation of variables `i` and `k` given `cond` (1-indexed)
/// from a covariance or correlation matrix.
pub fn partial_correlation(cov: &DMatrix<f64>, i: usize, k: usize, cond: &[usize]) -> Result<f64> {
    let idx: Vec<usize> = [i, k].iter().chain(cond).map(|v| v - 1).collect();
    partial_correlation0(cov, &idx)
}

/// `idx = [i, k, cond...]`, 0-based.
fn partial_correlation0(cov: &DMatrix<f64>, idx: &[usize]) -> Result<f64> {
    let (i, k) = (idx[0], idx[1]);
    match idx.len() {
        2 => Ok(cov[(i, k)] / (cov[(i, i)] * cov[(k, k)]).sqrt()),
        3 => {
            let s = idx[2];
            let r = |a: usize, b: usize| cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt();
            let (rik, ris, rks) = (r(i, k), r(i, s), r(k, s));
            let denom = ((1.0 - ris * ris) * (1.0 - rks * rks)).sqrt();
            if !(denom > 0.0) {
                return Err(Error::Singular {
                    context: "partial correlation".into(),
                    condition: f64::INFINITY,
                });
            }
            Ok((rik - ris * rks) / denom)
        }
        _ => {
            let prec = spd_inverse(&submatrix(cov, idx, idx), "partial correlation")?;
            Ok(-prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherZ {
    pub z: f64,
    pub p_value: f64,
    /// Set when `|r| >= 1`; the p-value is then 0.
    pub saturated: bool,
}

/// Two-sided Fisher z test of a zero partial correlation.
pub fn fisher_z_pvalue(r: f64, n: usize, cond_size: usize) -> Result<FisherZ> {
    if n < cond_size + 4 {
        return Err(Error::InvalidData(format!(
            "Fisher z test needs n >= {} for {cond_size} conditioning variables, got {n}",
            cond_size + 4
        )));
    }
    if r.is_nan() {
        return Err(Error::InvalidData("partial correlation is NaN".into()));
    }
    if r.abs() >= 1.0 {
        return Ok(FisherZ {
            z: f64::INFINITY.copysign(r),
            p_value: 0.0,
            saturated: true,
        });
    }
    let z = ((n - cond_size - 3) as f64).sqrt() * r.atanh();
    Ok(FisherZ {
        z,
        p_value: two_sided_p(z),
        saturated: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcConfig {
    pub alpha: f64,
    pub max_cond_size: usize,
    pub stable_variant: bool,
}

impl Default for PcConfig {
    fn default() -> Self {
        PcConfig {
            alpha: 0.01,
            max_cond_size: 3,
            stable_variant: true,
        }
    }
}

impl PcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Counters describing one PC run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PcDiagnostics {
    pub tests: usize,
    /// Edges proposed in both directions by different v-structures.
    pub conflicts: usize,
    /// Runs whose oriented PDAG had no consistent extension.
    pub repairs: usize,
}

/// Estimates the CPDAG of the columns of `data`.
pub fn estimate_cpdag(data: &Dataset, config: &PcConfig) -> Result<Cpdag> {
    Ok(estimate_cpdag_with_diagnostics(data, config)?.0)
}

pub fn estimate_cpdag_with_diagnostics(data: &Dataset, config: &PcConfig) -> Result<(Cpdag, PcDiagnostics)> {
    config.validate()?;
    let n = data.n();
    if n <= config.max_cond_size + 3 {
        return Err(Error::InvalidData(format!(
            "PC needs n > max_cond_size + 3 = {}, got {n}",
            config.max_cond_size + 3
        )));
    }
    pc_from_covariance(&data.covariance(), n, config)
}

/// PC on a covariance matrix estimated from `n` observations.
pub fn pc_from_covariance(cov: &DMatrix<f64>, n: usize, config: &PcConfig) -> Result<(Cpdag, PcDiagnostics)> {
    config.validate()?;
    let m = cov.nrows();
    let mut diag = PcDiagnostics::default();
    let mut adj = vec![vec![true; m]; m];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = false;
    }
    let mut sepsets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();

    let mut level = 0;
    while level <= config.max_cond_size {
        let snapshot = adj.clone();
        let mut any_candidate = false;
        for i in 0..m {
            for j in (i + 1)..m {
                let cur = if config.stable_variant { &snapshot } else { &adj };
                if !cur[i][j] {
                    continue;
                }
                let pools: [Vec<usize>; 2] = [
                    (0..m).filter(|&k| k != j && cur[i][k]).collect(),
                    (0..m).filter(|&k| k != i && cur[j][k]).collect(),
                ];
                let mut best: Option<(f64, Vec<usize>)> = None;
                'pools: for pool in &pools {
                    if pool.len() < level {
                        continue;
                    }
                    any_candidate = true;
                    for s in combinations(pool, level) {
                        let mut idx = vec![i, j];
                        idx.extend_from_slice(&s);
                        let r = partial_correlation0(cov, &idx)?;
                        let pv = fisher_z_pvalue(r, n, level)?.p_value;
                        diag.tests += 1;
                        if pv > config.alpha {
                            let better = best.as_ref().is_none_or(|(bp, _)| pv > *bp);
                            if better {
                                best = Some((pv, s));
                            }
                            if !config.stable_variant {
                                break 'pools;
                            }
                        }
                    }
                }
                if let Some((_, s)) = best {
                    adj[i][j] = false;
                    adj[j][i] = false;
                    sepsets.insert((i, j), s);
                }
            }
        }
        if !any_candidate {
            break;
        }
        level += 1;
    }

    let mut g = Pdag::empty(m);
    for i in 0..m {
        for j in (i + 1)..m {
            if adj[i][j] {
                g.set_undir(i, j);
            }
        }
    }
    let mut proposals: Vec<(usize, usize)> = Vec::new();
    for k in 0..m {
        for i in 0..m {
            for j in (i + 1)..m {
                if i == k || j == k || !adj[i][k] || !adj[j][k] || adj[i][j] {
                    continue;
                }
                let sep = sepsets.get(&(i, j)).map(Vec::as_slice).unwrap_or(&[]);
                if !sep.contains(&k) {
                    proposals.push((i, k));
                    proposals.push((j, k));
                }
            }
        }
    }
    if config.stable_variant {
        let conflicting = |a: usize, b: usize| proposals.contains(&(b, a));
        for &(a, b) in &proposals {
            if conflicting(a, b) {
                continue;
            }
            g.set_dir(a, b);
        }
        diag.conflicts = proposals.iter().filter(|&&(a, b)| conflicting(a, b)).count() / 2;
    } else {
        for &(a, b) in &proposals {
            if g.dir(b, a) {
                diag.conflicts += 1;
            }
            g.set_dir(a, b);
        }
    }
    g.apply_meek_rules();
    let dag = match g.consistent_extension() {
        Some(d) => d,
        None => {
            diag.repairs += 1;
            repair_extension(&g)
        }
    };
    Ok((dag_to_cpdag(&dag), diag))
}

/// A DAG on the skeleton of `g`, keeping its directed edges when they are
/// acyclic and orienting the rest along a topological order.
fn repair_extension(g: &Pdag) -> Dag {
    let m = g.node_count();
    let order = g
        .directed_topological_order()
        .unwrap_or_else(|| (0..m).collect());
    let mut pos = vec![0; m];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if g.adj(i, j) {
                if pos[i] < pos[j] {
                    edges.push((i + 1, j + 1));
                } else {
                    edges.push((j + 1, i + 1));
                }
            }
        }
    }
    Dag::from_edges(m, &edges).expect("orientation along a total order is acyclic")
}

/// All `k`-subsets of `pool`, in lexicographic order.
fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(pool: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for t in start..pool.len() {
            if pool.len() - t < k - cur.len() {
                break;
            }
            cur.push(pool[t]);
            rec(pool, k, t + 1, cur, out);
            cur.pop();
        }
    }
    rec(pool, k, 0, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_z_values() {
        let r = fisher_z_pvalue(0.0, 50, 0).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = fisher_z_pvalue(0.5, 103, 0).unwrap();
        assert!((r.z - 5.493_061_443_340_549).abs() < 1e-12);
        assert!((r.p_value - 3.95e-8).abs() < 0.01e-8);
        let s = fisher_z_pvalue(1.0, 103, 0).unwrap();
        assert!(s.saturated && s.p_value == 0.0);
        assert!(fisher_z_pvalue(0.1, 5, 2).is_err());
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(&[1, 2, 3, 4], 2).len(), 6);
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }

    #[test]
    fn partial_correlation_paths_agree() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.5, 0.3, 1.0, 0.2, 0.5, 0.2, 1.5]);
        let rec = partial_correlation(&a, 1, 2, &[3]).unwrap();
        let prec = spd_inverse(&a, "t").unwrap();
        let direct = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
        assert!((rec - direct).abs() < 1e-14);
    }
}
