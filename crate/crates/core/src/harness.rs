//! Monte-Carlo experiments: coverage tables, precision-recall and F-scores,
//! FDR with and without screening, SE calibration and concentration rates.
//!
//! Every replication draws from its own generator keyed by
//! `(seed, tag, dag, n, replication)`, and results are collected in input
//! order, so outputs do not depend on the number of worker threads.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::{dag_to_cpdag, Cpdag, Dag, MecIndex};
use crate::lsem::{covariance_of, generate_random_lsem, mediation_effect, sample, LsemSpec};
use crate::mida::{population_target, sample_w, MidaContext, MidaResult};
use crate::stats::{mean, median, ols_slope, sd};
use crate::structure::{estimate_cpdag, residualize_on_treatment, PcConfig};
use crate::subset_ols::uniform_diagnostics;

/// Effects smaller than this in absolute value count as zero.
pub const ZERO_EFFECT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// Mediator CPDAG estimated by PC on the residualized mediators.
    Estimated,
    TrueCpdag,
    /// The true mediator DAG; the class is a single DAG.
    TrueDag,
    /// No edges among mediators.
    Empty,
}

impl std::str::FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimated" => Ok(GraphMode::Estimated),
            "true_cpdag" => Ok(GraphMode::TrueCpdag),
            "true_dag" => Ok(GraphMode::TrueDag),
            "empty" => Ok(GraphMode::Empty),
            other => Err(Error::Config(format!(
                "unknown graph mode '{other}' (expected estimated, true_cpdag, true_dag or empty)"
            ))),
        }
    }
}

fn default_max_cond_size() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_max_component_size() -> usize {
    16
}
fn default_p_treat() -> f64 {
    0.2
}
fn default_p_resp() -> f64 {
    0.1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    /// Expected degree of the mediator DAG.
    pub d: f64,
    /// Number of random DAGs.
    pub r: usize,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub alpha_pc: f64,
    pub level: f64,
    pub seed: u64,
    pub graph_mode: GraphMode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_max_cond_size")]
    pub max_cond_size: usize,
    #[serde(default = "default_true")]
    pub pc_stable: bool,
    #[serde(default = "default_max_component_size")]
    pub max_component_size: usize,
    #[serde(default = "default_p_treat")]
    pub p_treat: f64,
    #[serde(default = "default_p_resp")]
    pub p_resp: f64,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.p < 5 {
            return fail(format!("p must be at least 5, got {}", self.p));
        }
        if self.r == 0 {
            return fail("r must be at least 1".into());
        }
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.n_list.is_empty() {
            return fail("n_list must not be empty".into());
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < self.p + 2) {
            return fail(format!("sample size {n} is too small for p = {}", self.p));
        }
        if !(self.d >= 0.0 && self.d < (self.p - 3) as f64) {
            return fail(format!("d must lie in [0, p - 3), got {}", self.d));
        }
        if !(self.alpha_pc > 0.0 && self.alpha_pc < 1.0) {
            return fail(format!("alpha_pc must lie in (0, 1), got {}", self.alpha_pc));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("level must lie in (0, 1), got {}", self.level));
        }
        for (name, v) in [("p_treat", self.p_treat), ("p_resp", self.p_resp)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }

    pub fn pc_config(&self) -> PcConfig {
        PcConfig {
            alpha: self.alpha_pc,
            max_cond_size: self.max_cond_size,
            stable_variant: self.pc_stable,
        }
    }
}

const TAG_SPEC: u64 = 1;
const TAG_DATA: u64 = 2;
const TAG_W: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for the given key path.
pub fn stream_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k));
    }
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(h.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Population quantities of one mediator in one DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct MediatorTruth {
    pub j: usize,
    pub theta1j: f64,
    /// Average over the true CPDAG's class of the adjusted coefficients.
    pub aver: f64,
    /// `theta1j * aver`, the identifiable target.
    pub eta_cpdag: f64,
    /// `theta_1j * theta_jp`.
    pub eta: f64,
}

impl MediatorTruth {
    /// Grouping magnitude `max(|theta_1j|, |aver|)`.
    pub fn magnitude(&self) -> f64 {
        self.theta1j.abs().max(self.aver.abs())
    }
}

/// One random SEM with its true graphs and per-mediator truths.
#[derive(Debug, Clone)]
pub struct DagSetting {
    pub spec: LsemSpec,
    pub sigma: DMatrix<f64>,
    pub mediator_dag: Dag,
    pub true_cpdag: Cpdag,
    pub true_mec: MecIndex,
    pub truths: Vec<MediatorTruth>,
}

impl DagSetting {
    pub fn new(spec: LsemSpec, max_component_size: usize) -> Result<Self> {
        let p = spec.p();
        let sigma = covariance_of(&spec)?;
        let mediators: Vec<usize> = (2..p).collect();
        let mediator_dag = spec.dag().induced_subgraph(&mediators);
        let true_cpdag = dag_to_cpdag(&mediator_dag);
        let true_mec = MecIndex::new(&true_cpdag, max_component_size)?;
        let truths = (2..p)
            .map(|j| {
                let t = population_target(&sigma, &true_mec, j)?;
                Ok(MediatorTruth {
                    j,
                    theta1j: t.theta1j,
                    aver: t.aver,
                    eta_cpdag: t.eta_cpdag,
                    eta: mediation_effect(&spec, j),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DagSetting {
            spec,
            sigma,
            mediator_dag,
            true_cpdag,
            true_mec,
            truths,
        })
    }
}

/// The `r` random settings of a config, each from its own stream.
pub fn build_settings(config: &ExperimentConfig) -> Result<Vec<DagSetting>> {
    config.validate()?;
    (0..config.r)
        .map(|t| {
            let mut rng = stream_rng(config.seed, &[TAG_SPEC, t as u64]);
            let spec = generate_random_lsem(config.p, config.d, config.p_treat, config.p_resp, &mut rng)?;
            DagSetting::new(spec, config.max_component_size)
        })
        .collect()
}

/// Per-mediator estimates of one replication; `None` marks a failure.
type ReplicationResults = std::result::Result<Vec<Option<MidaResult>>, String>;

fn run_replication(config: &ExperimentConfig, setting: &DagSetting, t: usize, n: usize, k: usize) -> ReplicationResults {
    let mut rng = stream_rng(config.seed, &[TAG_DATA, t as u64, n as u64, k as u64]);
    let data = sample(&setting.spec, n, &mut rng).map_err(|e| e.to_string())?;
    replicate_on_data(config, setting, &data).map_err(|e| e.to_string())
}

fn replicate_on_data(config: &ExperimentConfig, setting: &DagSetting, data: &Dataset) -> Result<Vec<Option<MidaResult>>> {
    let estimated;
    let mec = match config.graph_mode {
        GraphMode::TrueCpdag => &setting.true_mec,
        GraphMode::TrueDag => {
            estimated = MecIndex::from_dag(&setting.mediator_dag);
            &estimated
        }
        GraphMode::Empty => {
            estimated = MecIndex::new(&Cpdag::empty(config.p - 2), config.max_component_size)?;
            &estimated
        }
        GraphMode::Estimated => {
            let resid = residualize_on_treatment(data)?;
            let cpdag = estimate_cpdag(&resid, &config.pc_config())?;
            estimated = MecIndex::new(&cpdag, config.max_component_size)?;
            &estimated
        }
    };
    let ctx = MidaContext::new(data)?;
    Ok((2..config.p)
        .map(|j| match ctx.estimate(mec, j, config.level) {
            Ok(r) => Some(r),
            Err(e) => {
                log::debug!("mediator {j} failed: {e}");
                None
            }
        })
        .collect())
}

/// Results for every `(dag, replication)` at sample size `n`, indexed
/// `[t][k]`.
fn run_grid(config: &ExperimentConfig, settings: &[DagSetting], n: usize) -> Vec<Vec<ReplicationResults>> {
    let reps = config.replications;
    let flat: Vec<ReplicationResults> = (0..settings.len() * reps)
        .into_par_iter()
        .map(|idx| {
            let (t, k) = (idx / reps, idx % reps);
            let out = run_replication(config, &settings[t], t, n, k);
            if let Err(e) = &out {
                log::warn!("dag {t}, n {n}, replication {k} failed: {e}");
            }
            out
        })
        .collect();
    let mut grid: Vec<Vec<ReplicationResults>> = Vec::with_capacity(settings.len());
    let mut it = flat.into_iter();
    for _ in 0..settings.len() {
        grid.push(it.by_ref().take(reps).collect());
    }
    grid
}

/// Assigns each unit a group 0 (low), 1 (medium) or 2 (high) by its rank in
/// `keys`; group sizes differ by at most one.
pub fn three_groups(keys: &[f64]) -> Vec<usize> {
    let u = keys.len();
    let mut order: Vec<usize> = (0..u).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let mut group = vec![0; u];
    for (rank, &i) in order.iter().enumerate() {
        group[i] = 3 * rank / u;
    }
    group
}

pub const GROUP_NAMES: [&str; 3] = ["low", "medium", "high"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub p: usize,
    pub n: usize,
    pub group: String,
    pub median_coverage: f64,
    pub mean_coverage: f64,
    pub coverage_sd: f64,
    pub avg_length: f64,
    pub count: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Coverage of the identifiable target `eta(C0')`.
    pub rows: Vec<CoverageRow>,
    /// Coverage of the mediation effect `eta_j`.
    pub rows_eta: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn row(&self, n: usize, group: &str) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.n == n && r.group == group)
    }
}

#[derive(Default, Clone)]
struct UnitTally {
    hits: usize,
    hits_eta: usize,
    trials: usize,
    length: f64,
    excluded: usize,
}

/// Confidence-interval coverage grouped by effect magnitude.
pub fn run_coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    let settings = build_settings(config)?;
    let m = config.p - 2;
    let keys: Vec<f64> = settings
        .iter()
        .flat_map(|s| s.truths.iter().map(MediatorTruth::magnitude))
        .collect();
    let groups = three_groups(&keys);
    let mut rows = Vec::new();
    let mut rows_eta = Vec::new();
    for &n in &config.n_list {
        log::info!("coverage: n = {n}");
        let grid = run_grid(config, &settings, n);
        let mut tallies = vec![UnitTally::default(); settings.len() * m];
        for (t, reps) in grid.iter().enumerate() {
            for rep in reps {
                for (jj, truth) in settings[t].truths.iter().enumerate() {
                    let tally = &mut tallies[t * m + jj];
                    let res = match rep {
                        Ok(v) => v[jj].as_ref(),
                        Err(_) => None,
                    };
                    let Some(res) = res else {
                        tally.excluded += 1;
                        continue;
                    };
                    tally.trials += 1;
                    tally.length += res.ci_high - res.ci_low;
                    if res.ci_low <= truth.eta_cpdag && truth.eta_cpdag <= res.ci_high {
                        tally.hits += 1;
                    }
                    if res.ci_low <= truth.eta && truth.eta <= res.ci_high {
                        tally.hits_eta += 1;
                    }
                }
            }
        }
        for (g, name) in GROUP_NAMES.iter().enumerate() {
            let units: Vec<usize> = (0..tallies.len()).filter(|&u| groups[u] == g).collect();
            let mut per_dag = Vec::new();
            let mut per_dag_eta = Vec::new();
            for t in 0..settings.len() {
                let (mut hits, mut hits_eta, mut trials) = (0, 0, 0);
                for &u in units.iter().filter(|&&u| u / m == t) {
                    hits += tallies[u].hits;
                    hits_eta += tallies[u].hits_eta;
                    trials += tallies[u].trials;
                }
                if trials > 0 {
                    per_dag.push(100.0 * hits as f64 / trials as f64);
                    per_dag_eta.push(100.0 * hits_eta as f64 / trials as f64);
                }
            }
            let trials: usize = units.iter().map(|&u| tallies[u].trials).sum();
            let length: f64 = units.iter().map(|&u| tallies[u].length).sum();
            let excluded = units.iter().map(|&u| tallies[u].excluded).sum();
            let row = |cov: &[f64]| CoverageRow {
                p: config.p,
                n,
                group: name.to_string(),
                median_coverage: median(cov),
                mean_coverage: if cov.is_empty() { f64::NAN } else { mean(cov) },
                coverage_sd: sd(cov),
                avg_length: if trials > 0 { length / trials as f64 } else { f64::NAN },
                count: units.len(),
                excluded,
            };
            rows.push(row(&per_dag));
            rows_eta.push(row(&per_dag_eta));
        }
    }
    Ok(CoverageReport { rows, rows_eta })
}

/// Monte-Carlo check of the plug-in standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct SeCalibration {
    /// `sqrt(sum_j sd_j^2 / sum_j (mean sqrt avar_j)^2)` over mediators with
    /// a nonzero identifiable effect.
    pub ratio: f64,
    pub mediators: usize,
    /// `(dag, j, Monte-Carlo sd of sqrt(n)(eta_hat - eta), mean sqrt avar)`.
    pub per_mediator: Vec<(usize, usize, f64, f64)>,
}

/// SE calibration at the first sample size of the config.
pub fn run_se_calibration(config: &ExperimentConfig) -> Result<SeCalibration> {
    let settings = build_settings(config)?;
    let n = config.n_list[0];
    let grid = run_grid(config, &settings, n);
    let mut per_mediator = Vec::new();
    for (t, reps) in grid.iter().enumerate() {
        for (jj, truth) in settings[t].truths.iter().enumerate() {
            if truth.eta_cpdag.abs() <= ZERO_EFFECT {
                continue;
            }
            let mut dev = Vec::new();
            let mut se = Vec::new();
            for rep in reps.iter().flatten() {
                if let Some(r) = &rep[jj] {
                    dev.push((n as f64).sqrt() * (r.eta_hat - truth.eta_cpdag));
                    se.push(r.avar_hat.sqrt());
                }
            }
            if dev.len() >= 2 {
                per_mediator.push((t, truth.j, sd(&dev), mean(&se)));
            }
        }
    }
    if per_mediator.is_empty() {
        return Err(Error::Config("no mediator has a nonzero effect".into()));
    }
    let num: f64 = per_mediator.iter().map(|x| x.2 * x.2).sum();
    let den: f64 = per_mediator.iter().map(|x| x.3 * x.3).sum();
    Ok(SeCalibration {
        ratio: (num / den).sqrt(),
        mediators: per_mediator.len(),
        per_mediator,
    })
}

/// Benjamini-Hochberg step-up: indices of the `k` smallest p-values for the
/// largest `k` with `p_(k) <= k alpha / m`, ascending.
pub fn bh_select(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut k = 0;
    for (rank, &i) in order.iter().enumerate() {
        if pvalues[i] <= (rank + 1) as f64 * alpha / m as f64 {
            k = rank + 1;
        }
    }
    let mut sel: Vec<usize> = order[..k].to_vec();
    sel.sort_unstable();
    sel
}

/// One pooled hypothesis: a mediator of one DAG in one replication.
#[derive(Debug, Clone, Copy)]
struct Unit {
    eta_hat: f64,
    p_value: f64,
    theta_p_value: f64,
    target: bool,
    target_cpdag: bool,
}

/// Units pooled over DAGs for replication `k`; failed estimates are dropped.
fn pooled_units(settings: &[DagSetting], grid: &[Vec<ReplicationResults>], k: usize) -> (Vec<Unit>, usize, usize) {
    let mut units = Vec::new();
    let mut targets = 0;
    let mut targets_cpdag = 0;
    for (t, reps) in grid.iter().enumerate() {
        for (jj, truth) in settings[t].truths.iter().enumerate() {
            let target = truth.eta.abs() > ZERO_EFFECT;
            let target_cpdag = truth.eta_cpdag.abs() > ZERO_EFFECT;
            targets += target as usize;
            targets_cpdag += target_cpdag as usize;
            if let Ok(v) = &reps[k] {
                if let Some(r) = &v[jj] {
                    units.push(Unit {
                        eta_hat: r.eta_hat,
                        p_value: r.p_value,
                        theta_p_value: r.theta1j_p_value(),
                        target,
                        target_cpdag,
                    });
                }
            }
        }
    }
    (units, targets, targets_cpdag)
}

fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Precision and recall of a selection; precision 1 when nothing is
/// selected, recall 1 when there is nothing to find.
fn precision_recall(selected_true: usize, selected: usize, targets: usize) -> (f64, f64) {
    let precision = if selected == 0 {
        1.0
    } else {
        selected_true as f64 / selected as f64
    };
    let recall = if targets == 0 {
        1.0
    } else {
        selected_true as f64 / targets as f64
    };
    (precision, recall)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrRow {
    pub setting: String,
    pub k: usize,
    pub method: String,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FscoreRow {
    pub p: usize,
    pub n: usize,
    pub threshold: f64,
    pub target_size: f64,
    pub est_size: f64,
    pub recall: f64,
    pub precision: f64,
    pub fscore: f64,
    pub optimal_fscore: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrReport {
    pub pr: Vec<PrRow>,
    pub fscore: Vec<FscoreRow>,
}

pub const PR_METHODS: [&str; 2] = ["estimate", "pvalue"];

/// Precision-recall curves of the top-k rankings by `|eta_hat|` and by
/// p-value, and selection by p-value thresholds, for the target
/// `{j : eta_j != 0}` pooled over DAGs and averaged over replications.
///
/// `optimal_fscore` is the replication mean of the best F-score along the
/// p-value ranking.
pub fn run_pr_fscore(config: &ExperimentConfig, thresholds: &[f64]) -> Result<PrReport> {
    let settings = build_settings(config)?;
    let mut pr = Vec::new();
    let mut fscore = Vec::new();
    for &n in &config.n_list {
        log::info!("pr: n = {n}");
        let grid = run_grid(config, &settings, n);
        let setting_name = format!("p{}_n{}", config.p, n);
        let total = settings.len() * (config.p - 2);
        let mut prec = vec![vec![0.0; total]; 2];
        let mut rec = vec![vec![0.0; total]; 2];
        let mut best_f = Vec::new();
        let mut thr_stats = vec![(0.0, 0.0, 0.0, 0.0, 0.0); thresholds.len()];
        let mut target_sizes = Vec::new();
        for k in 0..config.replications {
            let (units, targets, _) = pooled_units(&settings, &grid, k);
            target_sizes.push(targets as f64);
            for (mi, _) in PR_METHODS.iter().enumerate() {
                let mut order: Vec<usize> = (0..units.len()).collect();
                if mi == 0 {
                    order.sort_by(|&a, &b| units[b].eta_hat.abs().total_cmp(&units[a].eta_hat.abs()).then(a.cmp(&b)));
                } else {
                    order.sort_by(|&a, &b| units[a].p_value.total_cmp(&units[b].p_value).then(a.cmp(&b)));
                }
                let mut hits = 0;
                let mut best: f64 = 0.0;
                for kk in 0..total {
                    if let Some(&u) = order.get(kk) {
                        hits += units[u].target as usize;
                    }
                    let size = (kk + 1).min(units.len());
                    let (pp, rr) = precision_recall(hits, size, targets);
                    prec[mi][kk] += pp;
                    rec[mi][kk] += rr;
                    best = best.max(f_score(pp, rr));
                }
                if mi == 1 {
                    best_f.push(best);
                }
            }
            for (ti, &thr) in thresholds.iter().enumerate() {
                let sel: Vec<&Unit> = units.iter().filter(|u| u.p_value < thr).collect();
                let hits = sel.iter().filter(|u| u.target).count();
                let (pp, rr) = precision_recall(hits, sel.len(), targets);
                let s = &mut thr_stats[ti];
                s.0 += sel.len() as f64;
                s.1 += rr;
                s.2 += pp;
                s.3 += f_score(pp, rr);
                s.4 += 1.0;
            }
        }
        let reps = config.replications as f64;
        for (mi, method) in PR_METHODS.iter().enumerate() {
            for kk in 0..total {
                pr.push(PrRow {
                    setting: setting_name.clone(),
                    k: kk + 1,
                    method: method.to_string(),
                    precision: prec[mi][kk] / reps,
                    recall: rec[mi][kk] / reps,
                });
            }
        }
        let optimal = mean(&best_f);
        for (ti, &thr) in thresholds.iter().enumerate() {
            let s = thr_stats[ti];
            fscore.push(FscoreRow {
                p: config.p,
                n,
                threshold: thr,
                target_size: mean(&target_sizes),
                est_size: s.0 / s.4,
                recall: s.1 / s.4,
                precision: s.2 / s.4,
                fscore: s.3 / s.4,
                optimal_fscore: optimal,
            });
        }
    }
    Ok(PrReport { pr, fscore })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrRow {
    pub p: usize,
    pub n: usize,
    pub alpha: f64,
    pub pipeline: String,
    pub target: String,
    pub empirical_fdr: f64,
    pub power: f64,
}

/// Empirical FDR and power of BH on the mediation p-values, directly
/// (`bh`) and after screening on the `theta_1j = 0` test at `screen_level`
/// (`screened`), against `eta_j != 0` (`target`) and
/// `theta_1j aver != 0` (`target_cpdag`). Zero discoveries count as FDR 0.
pub fn run_fdr(config: &ExperimentConfig, bh_alphas: &[f64], screen_level: f64) -> Result<Vec<FdrRow>> {
    if !(screen_level > 0.0 && screen_level < 1.0) {
        return Err(Error::Config(format!("screen level must lie in (0, 1), got {screen_level}")));
    }
    let settings = build_settings(config)?;
    let mut rows = Vec::new();
    for &n in &config.n_list {
        log::info!("fdr: n = {n}");
        let grid = run_grid(config, &settings, n);
        // [alpha][pipeline][target] -> (fdr sum, power sum)
        let mut acc = vec![[[(0.0, 0.0); 2]; 2]; bh_alphas.len()];
        for k in 0..config.replications {
            let (units, targets, targets_cpdag) = pooled_units(&settings, &grid, k);
            let survivors: Vec<usize> = (0..units.len()).filter(|&u| units[u].theta_p_value < screen_level).collect();
            for (ai, &alpha) in bh_alphas.iter().enumerate() {
                let all_p: Vec<f64> = units.iter().map(|u| u.p_value).collect();
                let direct = bh_select(&all_p, alpha);
                let surv_p: Vec<f64> = survivors.iter().map(|&u| units[u].p_value).collect();
                let screened: Vec<usize> = bh_select(&surv_p, alpha).into_iter().map(|i| survivors[i]).collect();
                for (pi, sel) in [&direct, &screened].into_iter().enumerate() {
                    for (ti, (is_target, size)) in [
                        (&(|u: &Unit| u.target) as &dyn Fn(&Unit) -> bool, targets),
                        (&|u: &Unit| u.target_cpdag, targets_cpdag),
                    ]
                    .into_iter()
                    .enumerate()
                    {
                        let true_sel = sel.iter().filter(|&&u| is_target(&units[u])).count();
                        let fdr = if sel.is_empty() {
                            0.0
                        } else {
                            (sel.len() - true_sel) as f64 / sel.len() as f64
                        };
                        let power = if size == 0 { 1.0 } else { true_sel as f64 / size as f64 };
                        acc[ai][pi][ti].0 += fdr;
                        acc[ai][pi][ti].1 += power;
                    }
                }
            }
        }
        let reps = config.replications as f64;
        for (ai, &alpha) in bh_alphas.iter().enumerate() {
            for (pi, pipeline) in ["bh", "screened"].iter().enumerate() {
                for (ti, target) in ["target", "target_cpdag"].iter().enumerate() {
                    rows.push(FdrRow {
                        p: config.p,
                        n,
                        alpha,
                        pipeline: pipeline.to_string(),
                        target: target.to_string(),
                        empirical_fdr: acc[ai][pi][ti].0 / reps,
                        power: acc[ai][pi][ti].1 / reps,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub q_n: usize,
    #[serde(rename = "L_n")]
    pub l_n: usize,
    pub stat: String,
    pub median_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub n: usize,
    pub q_n: usize,
    #[serde(rename = "L_n")]
    pub l_n: usize,
    pub sup_beta_err: f64,
    pub sup_psi_mean: f64,
    pub sup_remainder: f64,
    pub sup_sigma_dev: f64,
    pub sup_sigma_inv_dev: f64,
    pub replication: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub diagnostics: Vec<DiagnosticsRow>,
    /// Log-log slope of the median `sup_psi_mean` against `n`.
    pub slope_psi_mean: f64,
    /// Log-log slope of the median `sup_remainder` against `n`.
    pub slope_remainder: f64,
}

pub const RATE_STATS: [&str; 5] = [
    "sup_beta_err",
    "sup_psi_mean",
    "sup_remainder",
    "sup_sigma_dev",
    "sup_sigma_inv_dev",
];

/// The adjustment sets `(j, 1, Pa)` used by the estimator for every mediator
/// of `setting`, as covariate subsets for the response `X_p`, deduplicated.
pub fn estimator_subsets(setting: &DagSetting) -> Result<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for j in 2..setting.spec.p() {
        for (pa, _) in setting.true_mec.parent_set_multiset(j - 1)?.entries {
            let mut s = vec![j, 1];
            s.extend(pa.iter().map(|m| m + 1));
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Concentration rates on the first DAG of the config, using at most
/// `subsets_per_n` estimator subsets (0 keeps all).
pub fn run_rate_check(config: &ExperimentConfig, subsets_per_n: usize) -> Result<RateReport> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, &[TAG_SPEC, 0]);
    let spec = generate_random_lsem(config.p, config.d, config.p_treat, config.p_resp, &mut rng)?;
    let setting = DagSetting::new(spec, config.max_component_size)?;
    let mut subsets = estimator_subsets(&setting)?;
    if subsets_per_n > 0 {
        subsets.truncate(subsets_per_n);
    }
    let q_n = subsets.iter().map(Vec::len).max().unwrap_or(0);
    let l_n = subsets.len();
    let p = config.p;
    let means = setting.spec.means().to_vec();
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut log_n = Vec::new();
    let mut log_psi = Vec::new();
    let mut log_rem = Vec::new();
    for &n in &config.n_list {
        log::info!("rates: n = {n}");
        let diag: Vec<Result<DiagnosticsRow>> = (0..config.replications)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(config.seed, &[TAG_DATA, 0, n as u64, k as u64]);
                let data = sample(&setting.spec, n, &mut rng)?;
                let u = uniform_diagnostics(&data, p, &subsets, &setting.sigma, &means)?;
                Ok(DiagnosticsRow {
                    n,
                    q_n,
                    l_n,
                    sup_beta_err: u.sup_beta_err,
                    sup_psi_mean: u.sup_psi_mean,
                    sup_remainder: u.sup_remainder,
                    sup_sigma_dev: u.sup_sigma_dev,
                    sup_sigma_inv_dev: u.sup_sigma_inv_dev,
                    replication: k,
                    seed: config.seed,
                })
            })
            .collect();
        let diag: Vec<DiagnosticsRow> = diag.into_iter().collect::<Result<_>>()?;
        let columns: [Vec<f64>; 5] = [
            diag.iter().map(|d| d.sup_beta_err).collect(),
            diag.iter().map(|d| d.sup_psi_mean).collect(),
            diag.iter().map(|d| d.sup_remainder).collect(),
            diag.iter().map(|d| d.sup_sigma_dev).collect(),
            diag.iter().map(|d| d.sup_sigma_inv_dev).collect(),
        ];
        for (stat, col) in RATE_STATS.iter().zip(&columns) {
            rows.push(RateRow {
                n,
                q_n,
                l_n,
                stat: stat.to_string(),
                median_value: median(col),
            });
        }
        log_n.push((n as f64).ln());
        log_psi.push(median(&columns[1]).ln());
        log_rem.push(median(&columns[2]).ln());
        diagnostics.extend(diag);
    }
    Ok(RateReport {
        rows,
        diagnostics,
        slope_psi_mean: ols_slope(&log_n, &log_psi),
        slope_remainder: ols_slope(&log_n, &log_rem),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WRow {
    pub rho: f64,
    pub w: f64,
}

/// `m` draws of `W` for each correlation in `rhos`.
pub fn run_wdensity(rhos: &[f64], m: usize, seed: u64) -> Result<Vec<WRow>> {
    let mut rows = Vec::with_capacity(rhos.len() * m);
    for (i, &rho) in rhos.iter().enumerate() {
        let mut rng = stream_rng(seed, &[TAG_W, i as u64]);
        rows.extend(sample_w(rho, m, &mut rng)?.into_iter().map(|w| WRow { rho, w }));
    }
    Ok(rows)
}

/// Writes serializable rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    wr.write_record(header)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub const COVERAGE_HEADER: [&str; 9] = [
    "p",
    "n",
    "group",
    "median_coverage",
    "mean_coverage",
    "coverage_sd",
    "avg_length",
    "count",
    "excluded",
];
pub const PR_HEADER: [&str; 5] = ["setting", "k", "method", "precision", "recall"];
pub const FSCORE_HEADER: [&str; 9] = [
    "p",
    "n",
    "threshold",
    "target_size",
    "est_size",
    "recall",
    "precision",
    "fscore",
    "optimal_fscore",
];
pub const FDR_HEADER: [&str; 7] = ["p", "n", "alpha", "pipeline", "target", "empirical_fdr", "power"];
pub const RATES_HEADER: [&str; 5] = ["n", "q_n", "L_n", "stat", "median_value"];
pub const DIAGNOSTICS_HEADER: [&str; 10] = [
    "n",
    "q_n",
    "L_n",
    "sup_beta_err",
    "sup_psi_mean",
    "sup_remainder",
    "sup_sigma_dev",
    "sup_sigma_inv_dev",
    "replication",
    "seed",
];
pub const WDENSITY_HEADER: [&str; 2] = ["rho", "w"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bh_examples() {
        assert_eq!(bh_select(&[0.01, 0.02, 0.9], 0.05), vec![0, 1]);
        assert!(bh_select(&[1.0, 1.0, 1.0], 0.05).is_empty());
        assert_eq!(bh_select(&[0.01], 0.05), vec![0]);
        assert!(bh_select(&[], 0.05).is_empty());
    }

    #[test]
    fn groups_are_balanced() {
        for u in 1..40 {
            let keys: Vec<f64> = (0..u).map(|i| ((i * 7919) % 13) as f64).collect();
            let g = three_groups(&keys);
            let sizes: Vec<usize> = (0..3).map(|k| g.iter().filter(|&&x| x == k).count()).collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1, "u = {u}: {sizes:?}");
        }
        let g = three_groups(&[3.0, 1.0, 2.0]);
        assert_eq!(g, vec![2, 0, 1]);
    }

    #[test]
    fn streams_differ_by_key() {
        use rand::Rng;
        let a: u64 = stream_rng(1, &[2, 3]).random();
        let b: u64 = stream_rng(1, &[3, 2]).random();
        let c: u64 = stream_rng(1, &[2, 3]).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn config_validation() {
        let json = r#"{"p":10,"d":2,"r":1,"n_list":[100],"replications":2,"alpha_pc":0.01,
                       "level":0.95,"seed":1,"graph_mode":"true_cpdag"}"#;
        let c = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(c.max_cond_size, 3);
        assert!(ExperimentConfig::from_json(&json.replace("\"p\":10", "\"p\":4")).is_err());
        assert!(ExperimentConfig::from_json(&json.replace("\"seed\":1", "\"seed\":1,\"bogus\":2")).is_err());
        assert!(ExperimentConfig::from_json(&json.replace("true_cpdag", "guess")).is_err());
    }

    #[test]
    fn precision_conventions() {
        assert_eq!(precision_recall(0, 0, 5), (1.0, 0.0));
        assert_eq!(precision_recall(0, 0, 0), (1.0, 1.0));
        assert_eq!(f_score(0.0, 0.0), 0.0);
    }
}
