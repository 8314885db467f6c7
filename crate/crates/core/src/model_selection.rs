//! Grid search and nested cross-validation.
//!
//! Outer folds estimate generalization; inside each outer-train portion a
//! stratified inner split scores every grid combination by mean accuracy.
//! The winner is refit on the whole outer-train portion and evaluated on the
//! outer-test fold. Standardization is always fit on the rows a model is
//! trained on.
//!
//! Every task derives its own seed from the run seed and its position, and
//! results are merged by index, so serial and parallel runs agree bit for
//! bit.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dataset::{
    augment_negatives_with, source_subject, stratified_kfold, AugmentRule, Label, LabeledDataset, Matrix,
    Standardizer,
};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestModel, ForestParams};
use crate::linear::{fit_logistic, LogisticModel, LogisticParams};
use crate::metrics::{accuracy, roc_auc, roc_curve, RocCurve};
use crate::numfmt::g17;
use crate::svm::{fit_svm, KernelKind, KernelSpec, SvmModel, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classifier {
    Lr,
    Rf,
    Svm,
}

impl Classifier {
    pub const ALL: [Classifier; 3] = [Classifier::Lr, Classifier::Rf, Classifier::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            Classifier::Lr => "LR",
            Classifier::Rf => "RF",
            Classifier::Svm => "SVM",
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classifier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LR" => Ok(Classifier::Lr),
            "RF" => Ok(Classifier::Rf),
            "SVM" => Ok(Classifier::Svm),
            other => Err(format!("unknown classifier `{other}` (expected LR, RF or SVM)")),
        }
    }
}

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSet {
    Lr(LogisticParams),
    Rf(ForestParams),
    Svm(SvmParams),
}

impl ParamSet {
    pub fn classifier(&self) -> Classifier {
        match self {
            ParamSet::Lr(_) => Classifier::Lr,
            ParamSet::Rf(_) => Classifier::Rf,
            ParamSet::Svm(_) => Classifier::Svm,
        }
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSet::Lr(p) => write!(f, "reg_strength={};tolerance={}", p.reg_strength, p.tolerance),
            ParamSet::Rf(p) => write!(f, "n_estimators={};max_depth={}", p.n_estimators, p.max_depth),
            ParamSet::Svm(p) => {
                write!(f, "kernel={};C={}", p.kernel.kind(), p.c)?;
                if let Some(g) = p.kernel.gamma() {
                    write!(f, ";gamma={g}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AxisValues {
    Real(Vec<f64>),
    Int(Vec<usize>),
    Kernel(Vec<KernelKind>),
}

impl AxisValues {
    fn len(&self) -> usize {
        match self {
            AxisValues::Real(v) => v.len(),
            AxisValues::Int(v) => v.len(),
            AxisValues::Kernel(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AxisValue {
    Real(f64),
    Int(usize),
    Kernel(KernelKind),
}

impl AxisValues {
    fn get(&self, i: usize) -> AxisValue {
        match self {
            AxisValues::Real(v) => AxisValue::Real(v[i]),
            AxisValues::Int(v) => AxisValue::Int(v[i]),
            AxisValues::Kernel(v) => AxisValue::Kernel(v[i]),
        }
    }
}

/// Hyperparameter axes for one classifier, iterated with the first axis
/// outermost.
///
/// Axis names: LR `reg_strength`, `tolerance`; RF `n_estimators`,
/// `max_depth`; SVM `kernel`, `C`, `gamma`. Combinations that build the same
/// model (the linear kernel ignores `gamma`) are kept once, at their first
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub classifier: Classifier,
    pub axes: Vec<(String, AxisValues)>,
}

pub fn default_grid(classifier: Classifier) -> HyperGrid {
    let decades = vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let axes = match classifier {
        Classifier::Lr => vec![
            ("reg_strength".to_string(), AxisValues::Real(decades.clone())),
            ("tolerance".to_string(), AxisValues::Real(decades)),
        ],
        Classifier::Rf => vec![
            ("n_estimators".to_string(), AxisValues::Int(vec![5, 10, 15, 20, 25])),
            ("max_depth".to_string(), AxisValues::Int((2..=10).collect())),
        ],
        Classifier::Svm => vec![
            ("kernel".to_string(), AxisValues::Kernel(vec![KernelKind::Linear, KernelKind::Rbf, KernelKind::Poly])),
            ("C".to_string(), AxisValues::Real(vec![0.1, 1.0, 10.0, 100.0, 1000.0])),
            ("gamma".to_string(), AxisValues::Real(vec![10.0, 1.0, 1e-1, 1e-2, 1e-3, 1e-4])),
        ],
    };
    HyperGrid { classifier, axes }
}

impl HyperGrid {
    /// Grid with one value per axis.
    pub fn single(params: ParamSet) -> Self {
        let axes = match params {
            ParamSet::Lr(p) => vec![
                ("reg_strength".into(), AxisValues::Real(vec![p.reg_strength])),
                ("tolerance".into(), AxisValues::Real(vec![p.tolerance])),
            ],
            ParamSet::Rf(p) => vec![
                ("n_estimators".into(), AxisValues::Int(vec![p.n_estimators])),
                ("max_depth".into(), AxisValues::Int(vec![p.max_depth])),
            ],
            ParamSet::Svm(p) => {
                let mut axes = vec![
                    ("kernel".into(), AxisValues::Kernel(vec![p.kernel.kind()])),
                    ("C".into(), AxisValues::Real(vec![p.c])),
                ];
                if let Some(g) = p.kernel.gamma() {
                    axes.push(("gamma".into(), AxisValues::Real(vec![g])));
                }
                axes
            }
        };
        HyperGrid { classifier: params.classifier(), axes }
    }

    /// All distinct combinations in grid order.
    pub fn combinations(&self) -> Result<Vec<ParamSet>> {
        if self.axes.is_empty() || self.axes.iter().any(|(_, v)| v.len() == 0) {
            return Err(Error::Grid("every grid needs at least one non-empty axis".into()));
        }
        let allowed: &[&str] = match self.classifier {
            Classifier::Lr => &["reg_strength", "tolerance", "max_iter"],
            Classifier::Rf => &["n_estimators", "max_depth", "feature_subsample"],
            Classifier::Svm => &["kernel", "C", "gamma", "tol", "max_passes"],
        };
        for (name, _) in &self.axes {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::Grid(format!("axis `{name}` does not apply to {}", self.classifier)));
            }
        }
        let sizes: Vec<usize> = self.axes.iter().map(|(_, v)| v.len()).collect();
        let total: usize = sizes.iter().product();
        let mut out: Vec<ParamSet> = Vec::new();
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..total {
            let point: Vec<(&str, AxisValue)> =
                self.axes.iter().zip(&idx).map(|((n, v), &i)| (n.as_str(), v.get(i))).collect();
            let p = self.build(&point)?;
            if !out.contains(&p) {
                out.push(p);
            }
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < sizes[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(out)
    }

    fn build(&self, point: &[(&str, AxisValue)]) -> Result<ParamSet> {
        let real = |name: &str| -> Result<Option<f64>> {
            match point.iter().find(|(n, _)| *n == name) {
                None => Ok(None),
                Some((_, AxisValue::Real(v))) => Ok(Some(*v)),
                Some((_, AxisValue::Int(v))) => Ok(Some(*v as f64)),
                Some(_) => Err(Error::Grid(format!("axis `{name}` must be numeric"))),
            }
        };
        let int = |name: &str| -> Result<Option<usize>> {
            match point.iter().find(|(n, _)| *n == name) {
                None => Ok(None),
                Some((_, AxisValue::Int(v))) => Ok(Some(*v)),
                Some((_, AxisValue::Real(v))) if v.fract() == 0.0 && *v >= 0.0 => Ok(Some(*v as usize)),
                Some(_) => Err(Error::Grid(format!("axis `{name}` must hold non-negative integers"))),
            }
        };
        Ok(match self.classifier {
            Classifier::Lr => {
                let d = LogisticParams::default();
                ParamSet::Lr(LogisticParams {
                    reg_strength: real("reg_strength")?.unwrap_or(d.reg_strength),
                    tolerance: real("tolerance")?.unwrap_or(d.tolerance),
                    max_iter: int("max_iter")?.unwrap_or(d.max_iter),
                })
            }
            Classifier::Rf => {
                let mut p = ForestParams::new(int("n_estimators")?.unwrap_or(10), int("max_depth")?.unwrap_or(5));
                p.feature_subsample = int("feature_subsample")?;
                ParamSet::Rf(p)
            }
            Classifier::Svm => {
                let kind = match point.iter().find(|(n, _)| *n == "kernel") {
                    None => KernelKind::Rbf,
                    Some((_, AxisValue::Kernel(k))) => *k,
                    Some(_) => return Err(Error::Grid("axis `kernel` must hold kernel names".into())),
                };
                let gamma = real("gamma")?;
                let kernel = match (kind, gamma) {
                    (KernelKind::Linear, _) => KernelSpec::Linear,
                    (KernelKind::Rbf, Some(g)) => KernelSpec::rbf(g),
                    (KernelKind::Poly, Some(g)) => KernelSpec::poly(g),
                    (k, None) => return Err(Error::Grid(format!("kernel `{k}` needs a gamma axis"))),
                };
                let mut p = SvmParams::new(real("C")?.unwrap_or(1.0), kernel);
                if let Some(t) = real("tol")? {
                    p.tol = t;
                }
                if let Some(m) = int("max_passes")? {
                    p.max_passes = m;
                }
                ParamSet::Svm(p)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Svm(SvmModel),
}

impl TrainedModel {
    /// ROC score: PD probability (LR), PD vote fraction (RF), decision value (SVM).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            TrainedModel::Logistic(m) => m.predict_proba(x)?,
            TrainedModel::Forest(m) => m.predict_vote_fraction(x)?,
            TrainedModel::Svm(m) => m.decision_function(x)?,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(match self {
            TrainedModel::Logistic(m) => m.predict(x)?,
            TrainedModel::Forest(m) => m.predict(x)?,
            TrainedModel::Svm(m) => m.predict(x)?,
        })
    }
}

/// Standardizer plus model, both fit on the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub standardizer: Standardizer,
    pub model: TrainedModel,
}

pub fn fit_model(params: &ParamSet, x: &Matrix, y: &[Label], seed: u64) -> Result<TrainedModel> {
    Ok(match params {
        ParamSet::Lr(p) => TrainedModel::Logistic(fit_logistic(x, y, p)?),
        ParamSet::Rf(p) => TrainedModel::Forest(fit_forest(x, y, p, seed)?),
        ParamSet::Svm(p) => TrainedModel::Svm(fit_svm(x, y, p)?),
    })
}

pub fn fit_pipeline(params: &ParamSet, train: &LabeledDataset, seed: u64) -> Result<FittedPipeline> {
    let standardizer = Standardizer::fit(train.features());
    let x = standardizer.transform(train.features());
    let model = fit_model(params, &x, train.labels(), seed)?;
    Ok(FittedPipeline { standardizer, model })
}

impl FittedPipeline {
    /// `(predictions, scores)` for every row of `x` (raw, unstandardized).
    pub fn evaluate(&self, x: &Matrix) -> Result<(Vec<Label>, Vec<f64>)> {
        let z = self.standardizer.transform(x);
        let mut preds = Vec::with_capacity(z.rows());
        let mut scores = Vec::with_capacity(z.rows());
        for r in z.iter_rows() {
            preds.push(self.model.predict(r)?);
            scores.push(self.model.score(r)?);
        }
        Ok((preds, scores))
    }
}

/// Serial or rayon-pool execution of independent tasks.
#[derive(Clone, Default)]
pub enum Execution {
    #[default]
    Serial,
    Parallel(Arc<rayon::ThreadPool>),
}

impl fmt::Debug for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Execution::Serial => f.write_str("Serial"),
            Execution::Parallel(p) => write!(f, "Parallel({})", p.current_num_threads()),
        }
    }
}

impl Execution {
    /// A dedicated pool with `threads` workers; `threads <= 1` runs serially.
    pub fn with_threads(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Execution::Serial);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Execution::Parallel(Arc::new(pool)))
    }

    /// Runs `f(0..n)` and returns the results in index order.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Execution::Serial => (0..n).map(f).collect(),
            Execution::Parallel(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        }
    }
}

/// Mixes task coordinates into a seed (SplitMix64 finalizer per step).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in path {
        h = h.wrapping_add(p.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best: ParamSet,
    pub combinations: Vec<ParamSet>,
    /// Mean inner-fold test accuracy per combination.
    pub inner_scores: Vec<f64>,
}

/// Scores every combination by mean accuracy over one stratified
/// `inner_k`-fold split of `train`. Ties go to the earlier combination.
pub fn grid_search(
    train: &LabeledDataset,
    grid: &HyperGrid,
    inner_k: usize,
    seed: u64,
    exec: &Execution,
) -> Result<GridSearchResult> {
    grid_search_with(train, grid, inner_k, seed, None, exec)
}

fn grid_search_with(
    train: &LabeledDataset,
    grid: &HyperGrid,
    inner_k: usize,
    seed: u64,
    augment_inside: Option<AugmentRule>,
    exec: &Execution,
) -> Result<GridSearchResult> {
    let combinations = grid.combinations()?;
    let folds = stratified_kfold(train, inner_k, seed)?;
    let splits: Vec<(LabeledDataset, LabeledDataset)> = (0..inner_k)
        .map(|f| {
            let mut tr = train.subset(&folds.train_indices(f));
            if let Some(rule) = augment_inside {
                tr = augment_negatives_with(&tr, rule)?;
            }
            Ok((tr, train.subset(&folds.test_indices(f))))
        })
        .collect::<Result<_>>()?;

    let n_tasks = combinations.len() * inner_k;
    let results: Vec<Result<f64>> = exec.map(n_tasks, |t| {
        let (c, f) = (t / inner_k, t % inner_k);
        let (tr, te) = &splits[f];
        let pipe = fit_pipeline(&combinations[c], tr, derive_seed(seed, &[c as u64, f as u64]))?;
        let (pred, _) = pipe.evaluate(te.features())?;
        Ok(accuracy(&pred, te.labels())?)
    });
    let results: Vec<f64> = results.into_iter().collect::<Result<_>>()?;

    let inner_scores: Vec<f64> = results
        .chunks(inner_k)
        .map(|accs| accs.iter().sum::<f64>() / inner_k as f64)
        .collect();
    let mut best_index = 0;
    for (i, &s) in inner_scores.iter().enumerate() {
        if s > inner_scores[best_index] {
            best_index = i;
        }
    }
    Ok(GridSearchResult { best_index, best: combinations[best_index], combinations, inner_scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeakageMode {
    /// Augment the whole dataset, then assign folds (augmented twins can
    /// land on the other side of a split).
    #[default]
    PaperOrder,
    /// Assign folds on the original rows and augment training portions only.
    LeakageSafe,
}

impl LeakageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LeakageMode::PaperOrder => "paper-order",
            LeakageMode::LeakageSafe => "leakage-safe",
        }
    }
}

impl fmt::Display for LeakageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LeakageMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "paper-order" | "paper" => Ok(LeakageMode::PaperOrder),
            "leakage-safe" | "safe" => Ok(LeakageMode::LeakageSafe),
            other => Err(format!("unknown leakage mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedCvConfig {
    pub outer_k: usize,
    pub inner_k: usize,
    pub seed: u64,
    pub leakage_mode: LeakageMode,
    /// Negative-class augmentation; `None` disables it.
    pub augment: Option<AugmentRule>,
}

impl Default for NestedCvConfig {
    fn default() -> Self {
        Self { outer_k: 10, inner_k: 5, seed: 0, leakage_mode: LeakageMode::PaperOrder, augment: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub chosen_params: ParamSet,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub auc: f64,
    pub n_train: usize,
    pub test_pd: usize,
    pub test_hc: usize,
    pub test_subjects: Vec<String>,
    pub test_labels: Vec<Label>,
    pub test_scores: Vec<f64>,
    pub train_subjects: Vec<String>,
}

impl FoldResult {
    pub fn n_test(&self) -> usize {
        self.test_pd + self.test_hc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub classifier: Classifier,
    pub per_outer_fold: Vec<FoldResult>,
    pub mean_train_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub mean_auc: f64,
    pub seed: u64,
    pub leakage_mode: LeakageMode,
    pub augment: Option<AugmentRule>,
    /// Class counts of the input dataset and of the rows folds were drawn from.
    pub input_counts: [usize; 2],
    pub working_counts: [usize; 2],
}

pub fn nested_cv(ds: &LabeledDataset, grid: &HyperGrid, config: &NestedCvConfig, exec: &Execution) -> Result<CvReport> {
    if config.outer_k < 2 || config.inner_k < 2 {
        return Err(Error::Config("outer_k and inner_k must both be at least 2".into()));
    }
    grid.combinations()?;
    let (work, safe_rule) = match (config.augment, config.leakage_mode) {
        (Some(rule), LeakageMode::PaperOrder) => (augment_negatives_with(ds, rule)?, None),
        (Some(rule), LeakageMode::LeakageSafe) => (ds.clone(), Some(rule)),
        (None, _) => (ds.clone(), None),
    };
    let folds = stratified_kfold(&work, config.outer_k, config.seed)?;

    let results: Vec<Result<FoldResult>> = exec.map(config.outer_k, |f| {
        let train_idx = folds.train_indices(f);
        let test_idx = folds.test_indices(f);
        let train_raw = work.subset(&train_idx);
        let test = work.subset(&test_idx);
        let inner_seed = derive_seed(config.seed, &[f as u64]);
        let search = grid_search_with(&train_raw, grid, config.inner_k, inner_seed, safe_rule, exec)?;
        let train = match safe_rule {
            Some(rule) => augment_negatives_with(&train_raw, rule)?,
            None => train_raw,
        };
        let pipe = fit_pipeline(&search.best, &train, derive_seed(inner_seed, &[search.best_index as u64, u64::MAX]))?;
        let (train_pred, _) = pipe.evaluate(train.features())?;
        let (test_pred, test_scores) = pipe.evaluate(test.features())?;
        Ok(FoldResult {
            fold: f,
            chosen_params: search.best,
            train_accuracy: accuracy(&train_pred, train.labels())?,
            test_accuracy: accuracy(&test_pred, test.labels())?,
            auc: roc_auc(&test_scores, test.labels())?,
            n_train: train.n_rows(),
            test_pd: test.count(Label::Pd),
            test_hc: test.count(Label::Hc),
            test_subjects: test.subject_ids().to_vec(),
            test_labels: test.labels().to_vec(),
            test_scores,
            train_subjects: train.subject_ids().to_vec(),
        })
    });
    let per_outer_fold: Vec<FoldResult> = results.into_iter().collect::<Result<_>>()?;
    let k = per_outer_fold.len() as f64;
    let mean = |f: fn(&FoldResult) -> f64| per_outer_fold.iter().map(f).sum::<f64>() / k;
    Ok(CvReport {
        classifier: grid.classifier,
        mean_train_accuracy: mean(|r| r.train_accuracy),
        mean_test_accuracy: mean(|r| r.test_accuracy),
        mean_auc: mean(|r| r.auc),
        per_outer_fold,
        seed: config.seed,
        leakage_mode: config.leakage_mode,
        augment: config.augment,
        input_counts: [ds.count(Label::Hc), ds.count(Label::Pd)],
        working_counts: [work.count(Label::Hc), work.count(Label::Pd)],
    })
}

impl CvReport {
    /// ROC over the outer-test scores of all folds pooled together.
    pub fn pooled_roc(&self) -> Result<RocCurve> {
        let scores: Vec<f64> = self.per_outer_fold.iter().flat_map(|f| f.test_scores.iter().copied()).collect();
        let labels: Vec<Label> = self.per_outer_fold.iter().flat_map(|f| f.test_labels.iter().copied()).collect();
        Ok(roc_curve(&scores, &labels)?)
    }

    /// Test subjects whose augmented twin (or source) is in the same fold's
    /// training rows.
    pub fn twin_leaks(&self) -> usize {
        self.per_outer_fold
            .iter()
            .map(|f| {
                let train: std::collections::HashSet<&str> =
                    f.train_subjects.iter().map(|s| source_subject(s)).collect();
                f.test_subjects.iter().filter(|s| train.contains(source_subject(s))).count()
            })
            .sum()
    }

    pub const FOLD_CSV_HEADER: &'static str =
        "classifier,with_age_sex,fold,n_train,n_test,test_pd,test_hc,params,train_acc,test_acc,auc";

    /// Per-fold rows plus a `mean` row, without the header line.
    pub fn fold_csv_rows(&self, with_age_sex: bool) -> String {
        let mut out = String::new();
        for f in &self.per_outer_fold {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                self.classifier,
                with_age_sex,
                f.fold,
                f.n_train,
                f.n_test(),
                f.test_pd,
                f.test_hc,
                f.chosen_params,
                g17(f.train_accuracy),
                g17(f.test_accuracy),
                g17(f.auc)
            ));
        }
        out.push_str(&format!(
            "{},{},mean,,,,,,{},{},{}\n",
            self.classifier,
            with_age_sex,
            g17(self.mean_train_accuracy),
            g17(self.mean_test_accuracy),
            g17(self.mean_auc)
        ));
        out
    }
}
