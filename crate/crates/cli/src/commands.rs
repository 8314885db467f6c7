//! The five subcommands. Each computes everything first and then writes
//! through an [`Outputs`] guard, so a failure leaves no partial files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pdvol_core::dataset::{augment_negatives_with, AugmentRule, Label, LabeledDataset};
use pdvol_core::ingest::{
    assemble_cohort_with, parse_demographics, parse_exclusion_list, parse_volume_stats_with, read_dataset_csv,
    CohortManifest, CohortOptions, RegionVolumeTable,
};
use pdvol_core::model_selection::{default_grid, nested_cv, CvReport, Execution, LeakageMode, NestedCvConfig};
use pdvol_core::numfmt::g17;
use pdvol_core::synth::{analytic_bayes_accuracy, generate_cohort};

use crate::config::{AgeSex, InputSource, RunConfig};
use crate::output::Outputs;
use crate::plot;

pub const REPORT_HEADER: &str = "classifier,with_age_sex,mean_train_acc,mean_test_acc,mean_auc";
const DEMOGRAPHIC_COLUMNS: [&str; 2] = ["age", "sex"];

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// A loaded dataset and, for stats-directory input, the cohort manifest.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: LabeledDataset,
    pub manifest: Option<CohortManifest>,
    /// One-line description of where the rows came from.
    pub source: String,
}

/// Parses every `*.<extension>` file of `dir` in file-name order. Files that
/// fail to parse become hard failures named by file stem; unreadable files
/// are errors.
pub fn read_stats_dir(
    dir: &Path,
    extension: &str,
    format: &pdvol_core::ingest::FormatDescriptor,
) -> Result<(Vec<RegionVolumeTable>, Vec<String>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read stats directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()).with_context(|| format!("cannot list {}", dir.display())))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == extension));
    paths.sort();
    if paths.is_empty() {
        bail!("no *.{extension} files in stats directory {}", dir.display());
    }
    let mut tables = Vec::new();
    let mut hard = Vec::new();
    for path in paths {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match parse_volume_stats_with(&read(&path)?, format) {
            Ok(mut t) => {
                if t.subject_id.is_empty() {
                    t.subject_id = stem;
                }
                tables.push(t);
            }
            Err(e) => {
                eprintln!("warning: {}: {e}; subject {stem} recorded as a hard failure", path.display());
                hard.push(stem);
            }
        }
    }
    Ok((tables, hard))
}

pub fn load_input(cfg: &RunConfig) -> Result<Loaded> {
    match &cfg.input {
        InputSource::StatsDir { dir, demographics, exclusions, format, extension } => {
            let (tables, hard_failures) = read_stats_dir(dir, extension, format)?;
            let demo = parse_demographics(&read(demographics)?)
                .with_context(|| format!("in demographics file {}", demographics.display()))?;
            let soft_failures = match exclusions {
                Some(p) => parse_exclusion_list(&read(p)?),
                None => Default::default(),
            };
            let opts = CohortOptions { include_age_sex: cfg.age_sex != AgeSex::Without, hard_failures, soft_failures };
            let (dataset, manifest) = assemble_cohort_with(&tables, &demo, &opts)
                .with_context(|| format!("assembling cohort from {}", dir.display()))?;
            Ok(Loaded { dataset, manifest: Some(manifest), source: format!("stats_dir {}", dir.display()) })
        }
        InputSource::Dataset(path) => {
            let dataset = read_dataset_csv(&read(path)?).with_context(|| format!("in dataset {}", path.display()))?;
            Ok(Loaded { dataset, manifest: None, source: format!("dataset {}", path.display()) })
        }
        InputSource::Synth { preset, spec } => {
            let dataset = generate_cohort(spec)?;
            let source = format!(
                "synth preset={preset} seed={} n_pd={} n_hc={} n_features={} age_sex={}",
                spec.seed, spec.n_pd, spec.n_hc, spec.n_features, spec.include_age_sex
            );
            Ok(Loaded { dataset, manifest: None, source })
        }
    }
}

/// `ingest`: dataset CSV plus manifest from a stats directory.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if !matches!(cfg.input, InputSource::StatsDir { .. }) {
        bail!("ingest needs a stats_dir input");
    }
    let loaded = load_input(cfg)?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("dataset.csv", &loaded.dataset.to_csv())?;
    out.write("manifest.csv", &loaded.manifest.expect("stats input has a manifest").to_csv())?;
    Ok(out.commit())
}

/// `synth`: a synthetic cohort in the interchange format, with its spec and
/// Bayes accuracy as leading comments.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let InputSource::Synth { preset, spec } = &cfg.input else {
        bail!("synth needs a synth input (synth = ppmi | balanced)");
    };
    let ds = generate_cohort(spec)?;
    let informative: Vec<String> = spec.informative.iter().map(|(j, e)| format!("{j}:{}", g17(*e))).collect();
    let mut text = format!(
        "# synthetic cohort preset={preset} seed={} n_pd={} n_hc={} n_features={}\n# informative={}\n# analytic_bayes_accuracy={}\n",
        spec.seed,
        spec.n_pd,
        spec.n_hc,
        spec.n_features,
        informative.join(";"),
        g17(analytic_bayes_accuracy(spec)?)
    );
    text.push_str(&ds.to_csv());
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("dataset.csv", &text)?;
    Ok(out.commit())
}

/// `augment`: the input dataset with one appended HC row per original HC row.
pub fn cmd_augment(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let Some(rule) = cfg.augment else {
        bail!("augment = none leaves nothing to do");
    };
    let loaded = load_input(cfg)?;
    let ds = &loaded.dataset;
    let aug = augment_negatives_with(ds, rule)?;
    let mut text = format!(
        "# augmentation {}: input PD={} HC={}; output PD={} HC={}\n",
        rule_name(rule),
        ds.count(Label::Pd),
        ds.count(Label::Hc),
        aug.count(Label::Pd),
        aug.count(Label::Hc)
    );
    text.push_str(&aug.to_csv());
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("augmented.csv", &text)?;
    Ok(out.commit())
}

fn rule_name(rule: AugmentRule) -> &'static str {
    match rule {
        AugmentRule::SubtractMean => "subtract (x - mean of the original HC rows)",
        AugmentRule::Reflect => "reflect (2 * mean of the original HC rows - x)",
    }
}

/// The age/sex settings `run` evaluates for this dataset.
pub fn age_sex_settings(mode: AgeSex, ds: &LabeledDataset) -> Result<Vec<bool>> {
    let has = DEMOGRAPHIC_COLUMNS.iter().all(|c| ds.feature_index(c).is_ok());
    let need = |v: Vec<bool>| {
        if has {
            Ok(v)
        } else {
            bail!("age_sex = {mode:?} needs `age` and `sex` columns, which the dataset lacks")
        }
    };
    match mode {
        AgeSex::Auto if has => Ok(vec![false, true]),
        AgeSex::Auto | AgeSex::Without => Ok(vec![false]),
        AgeSex::With => need(vec![true]),
        AgeSex::Both => need(vec![false, true]),
    }
}

/// Nested CV results for every (age/sex setting, classifier) pair, in
/// report order.
pub fn run_reports(cfg: &RunConfig, ds: &LabeledDataset, exec: &Execution) -> Result<Vec<(bool, CvReport)>> {
    let cv = NestedCvConfig {
        outer_k: cfg.outer_k,
        inner_k: cfg.inner_k,
        seed: cfg.seed,
        leakage_mode: cfg.leakage_mode,
        augment: cfg.augment,
    };
    let mut out = Vec::new();
    for with in age_sex_settings(cfg.age_sex, ds)? {
        let view = if with { ds.clone() } else { ds.without_features(&DEMOGRAPHIC_COLUMNS) };
        if view.n_features() == 0 {
            bail!("no feature columns left once age and sex are removed");
        }
        for &c in &cfg.classifiers {
            let report = nested_cv(&view, &default_grid(c), &cv, exec)
                .with_context(|| format!("nested cross-validation of {c} (with_age_sex={with})"))?;
            out.push((with, report));
        }
    }
    Ok(out)
}

fn protocol_lines(cfg: &RunConfig, source: &str, reports: &[(bool, CvReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# input: {source}");
    let _ = writeln!(
        s,
        "# protocol: outer_k={} inner_k={} seed={} leakage_mode={} selection=mean inner-fold accuracy",
        cfg.outer_k, cfg.inner_k, cfg.seed, cfg.leakage_mode
    );
    let Some((_, first)) = reports.first() else {
        return s;
    };
    let [hc, pd] = first.input_counts;
    match cfg.augment {
        None => {
            let _ = writeln!(s, "# augmentation: none; PD={pd} HC={hc} ({} rows)", pd + hc);
        }
        Some(rule) => {
            let _ = writeln!(s, "# augmentation: {}, one appended HC row per original HC row", rule_name(rule));
            match cfg.leakage_mode {
                LeakageMode::PaperOrder => {
                    let [whc, wpd] = first.working_counts;
                    let _ = writeln!(
                        s,
                        "# counts: input PD={pd} HC={hc}; augmented before fold assignment to PD={wpd} HC={whc} ({} rows)",
                        wpd + whc
                    );
                }
                LeakageMode::LeakageSafe => {
                    let _ = writeln!(
                        s,
                        "# counts: input PD={pd} HC={hc}; folds drawn from the original rows, augmentation applied inside each training portion only"
                    );
                }
            }
            let _ = writeln!(
                s,
                "# note: this rule keeps PD fixed and exactly doubles HC, so 340 PD / 167 HC becomes 340 PD / 334 HC; a 341 PD / 332 HC split is not reachable from that input"
            );
            for (with, r) in reports {
                let _ = writeln!(
                    s,
                    "# twin_leaks {} with_age_sex={with}: {} test rows share a source subject with a training row",
                    r.classifier,
                    r.twin_leaks()
                );
            }
        }
    }
    s
}

/// The aggregate report: commented protocol header, then one row per
/// (classifier, age/sex setting).
pub fn render_report(cfg: &RunConfig, source: &str, reports: &[(bool, CvReport)]) -> String {
    let mut s = String::from("# pdvol nested cross-validation report\n");
    s.push_str(&protocol_lines(cfg, source, reports));
    s.push_str(REPORT_HEADER);
    s.push('\n');
    for (with, r) in reports {
        let _ = writeln!(
            s,
            "{},{with},{},{},{}",
            r.classifier,
            g17(r.mean_train_accuracy),
            g17(r.mean_test_accuracy),
            g17(r.mean_auc)
        );
    }
    s
}

pub fn render_folds(reports: &[(bool, CvReport)]) -> String {
    let mut s = String::from(CvReport::FOLD_CSV_HEADER);
    s.push('\n');
    for (with, r) in reports {
        s.push_str(&r.fold_csv_rows(*with));
    }
    s
}

pub fn roc_file_name(r: &CvReport, with: bool) -> String {
    format!("roc_{}_{}_age_sex.csv", r.classifier.as_str().to_ascii_lowercase(), if with { "with" } else { "without" })
}

pub fn execution(cfg: &RunConfig) -> Result<Execution> {
    let threads = cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(Execution::with_threads(threads)?)
}

/// `run`: report.csv, folds.csv, pooled ROC CSVs and, for stats input, the
/// manifest.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let loaded = load_input(cfg)?;
    let reports = run_reports(cfg, &loaded.dataset, &execution(cfg)?)?;
    let mut files = vec![
        ("report.csv".to_string(), render_report(cfg, &loaded.source, &reports)),
        ("folds.csv".to_string(), render_folds(&reports)),
    ];
    for (with, r) in &reports {
        files.push((roc_file_name(r, *with), r.pooled_roc()?.to_csv()));
    }
    if let Some(m) = &loaded.manifest {
        files.push(("manifest.csv".into(), m.to_csv()));
    }
    let mut out = Outputs::new(&cfg.output_dir)?;
    for (name, text) in &files {
        out.write(name, text)?;
    }
    Ok(out.commit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    FeatureDist,
    PairScatter,
    Roc,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "feature-dist" | "featuredist" => Ok(PlotKind::FeatureDist),
            "pair-scatter" | "pairscatter" => Ok(PlotKind::PairScatter),
            "roc" => Ok(PlotKind::Roc),
            other => Err(format!("unknown plot kind `{other}` (feature-dist, pair-scatter, roc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRequest {
    pub kind: PlotKind,
    /// One feature for `FeatureDist`, two for `PairScatter`.
    pub features: Vec<String>,
    /// ROC CSV for `Roc`.
    pub roc: Option<PathBuf>,
    /// Output file; defaults to a name derived from the request inside the
    /// output directory.
    pub out: Option<PathBuf>,
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// `plot`: one SVG file. Histogram and scatter plots read the dataset named
/// by `cfg`; ROC plots need no input source.
pub fn cmd_plot(req: &PlotRequest, cfg: Option<&RunConfig>, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let dataset = || match cfg {
        Some(c) => Ok(load_input(c)?.dataset),
        None => bail!("{:?} plot needs an input source (stats_dir, dataset or synth)", req.kind),
    };
    let (name, svg) = match req.kind {
        PlotKind::Roc => {
            let Some(path) = &req.roc else {
                bail!("roc plot needs a ROC CSV (--roc)");
            };
            let curve = plot::read_roc_csv(&read(path)?).with_context(|| format!("in ROC file {}", path.display()))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "roc".into());
            (format!("{}.svg", file_safe(&stem)), plot::roc(&curve, &format!("ROC {stem}")))
        }
        PlotKind::FeatureDist => {
            let [f] = req.features.as_slice() else {
                bail!("feature-dist needs exactly one feature, got {}", req.features.len());
            };
            let ds = dataset()?;
            (format!("feature_dist_{}.svg", file_safe(f)), plot::feature_distribution(&ds, f)?)
        }
        PlotKind::PairScatter => {
            let [a, b] = req.features.as_slice() else {
                bail!("pair-scatter needs exactly two features, got {}", req.features.len());
            };
            let ds = dataset()?;
            (format!("pair_{}_{}.svg", file_safe(a), file_safe(b)), plot::pair_scatter(&ds, a, b)?)
        }
    };
    let path = req.out.clone().unwrap_or_else(|| output_dir.join(name));
    let mut out = Outputs::new(path.parent().unwrap_or(Path::new("")))?;
    out.write_path(&path, &svg)?;
    Ok(out.commit())
}
