//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any failed.
//!
//! `cargo test --test acceptance -- 4 7` runs only criteria 4 and 7.
//! `PDVOL_BLESS=1` rewrites the golden files instead of comparing.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::PathBuf;
use std::time::Instant;

use pdvol_cli::commands::{load_input, render_folds, render_report, run_reports};
use pdvol_cli::config::{AgeSex, InputSource, RunConfig};
use pdvol_core::dataset::{augment_negatives, AugmentRule};
use pdvol_core::forest::best_split;
use pdvol_core::linear::{gradient, objective};
use pdvol_core::metrics::roc_auc;
use pdvol_core::model_selection::{
    default_grid, nested_cv, Classifier, CvReport, Execution, LeakageMode, NestedCvConfig,
};
use pdvol_core::svm::{fit_svm_detailed, kernel_matrix, KernelSpec, SvmParams};
use pdvol_core::synth::{analytic_bayes_accuracy, generate_cohort, CohortSpec};
use pdvol_core::{Label, LabeledDataset, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cv(outer_k: usize, inner_k: usize, seed: u64, mode: LeakageMode, augment: Option<AugmentRule>) -> NestedCvConfig {
    NestedCvConfig { outer_k, inner_k, seed, leakage_mode: mode, augment }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn protocol_shape() -> Outcome {
    let spec = CohortSpec { n_pd: 341, n_hc: 332, ..CohortSpec::ppmi_like(1) };
    let ds = generate_cohort(&spec).map_err(|e| e.to_string())?;
    if ds.n_rows() != 673 {
        return Err(format!("cohort has {} rows", ds.n_rows()));
    }
    let start = Instant::now();
    let report = nested_cv(&ds, &default_grid(Classifier::Lr), &cv(10, 5, 1, LeakageMode::LeakageSafe, None), &Execution::Serial)
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let folds = &report.per_outer_fold;
    let sizes: Vec<usize> = folds.iter().map(|f| f.n_test()).collect();
    let pd: Vec<usize> = folds.iter().map(|f| f.test_pd).collect();
    let hc: Vec<usize> = folds.iter().map(|f| f.test_hc).collect();
    let ok = folds.len() == 10
        && sizes.iter().all(|n| (67..=68).contains(n))
        && pd.iter().all(|n| (33..=35).contains(n))
        && hc.iter().all(|n| (32..=34).contains(n))
        && secs < 60.0;
    check(ok, format!("fold sizes {sizes:?}, PD {pd:?}, HC {hc:?}; LR grid {secs:.1} s single-threaded"))
}

fn oracle_accuracy() -> Outcome {
    let exec = Execution::with_threads(4.min(cores())).map_err(|e| e.to_string())?;
    let mut sums = [0.0; 3];
    let mut bayes = 0.0;
    let mut slowest: f64 = 0.0;
    for seed in 0..3 {
        let spec = CohortSpec::balanced(300, 300, 5, 1.0, seed);
        bayes = analytic_bayes_accuracy(&spec).map_err(|e| e.to_string())?;
        let ds = generate_cohort(&spec).map_err(|e| e.to_string())?;
        let start = Instant::now();
        for (i, c) in Classifier::ALL.into_iter().enumerate() {
            let r = nested_cv(&ds, &default_grid(c), &cv(10, 5, seed, LeakageMode::LeakageSafe, None), &exec)
                .map_err(|e| e.to_string())?;
            sums[i] += r.mean_test_accuracy;
        }
        slowest = slowest.max(start.elapsed().as_secs_f64());
    }
    let means = sums.map(|s| s / 3.0);
    let ok = means.iter().all(|m| (m - bayes).abs() <= 0.05) && slowest < 600.0;
    check(
        ok,
        format!(
            "Bayes {bayes:.4}; LR {:.4}, RF {:.4}, SVM {:.4}; slowest three-classifier run {slowest:.0} s on {} thread(s)",
            means[0],
            means[1],
            means[2],
            exec_threads(&exec)
        ),
    )
}

fn exec_threads(exec: &Execution) -> usize {
    match exec {
        Execution::Serial => 1,
        Execution::Parallel(pool) => pool.current_num_threads(),
    }
}

fn null_safety() -> Outcome {
    let exec = Execution::with_threads(4.min(cores())).map_err(|e| e.to_string())?;
    let ds = generate_cohort(&CohortSpec::balanced(200, 200, 5, 0.0, 7)).map_err(|e| e.to_string())?;
    let run = |mode| -> Result<Vec<CvReport>, String> {
        Classifier::ALL
            .into_iter()
            .map(|c| {
                nested_cv(&ds, &default_grid(c), &cv(10, 5, 7, mode, Some(AugmentRule::SubtractMean)), &exec)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let safe = run(LeakageMode::LeakageSafe)?;
    let before = run(LeakageMode::PaperOrder)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, b) in safe.iter().zip(&before) {
        let inside = |v: f64| (0.40..=0.60).contains(&v);
        ok &= inside(s.mean_test_accuracy) && inside(s.mean_auc);
        parts.push(format!(
            "{} acc {:.3} auc {:.3} (augmenting before folds: acc {:+.3}, auc {:+.3}, {} twin leaks)",
            s.classifier,
            s.mean_test_accuracy,
            s.mean_auc,
            b.mean_test_accuracy - s.mean_test_accuracy,
            b.mean_auc - s.mean_auc,
            b.twin_leaks()
        ));
    }
    check(ok, parts.join("; "))
}

fn auc_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut tied = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=200);
        let levels = [3u32, 10, 50, 1_000_000][rng.random_range(0..4)];
        let mut labels: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.5) { Label::Pd } else { Label::Hc }).collect();
        labels[0] = Label::Pd;
        labels[1] = Label::Hc;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            tied += 1;
        }
        let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracles::mann_whitney_auc(&scores, &labels)).abs());
    }
    check(worst <= 1e-12, format!("max |trapezoid - pairwise| = {worst:.1e} over 1000 instances, {tied} with ties"))
}

fn lr_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    let x = Matrix::new(20, 5, data).map_err(|e| e.to_string())?;
    let y: Vec<Label> = (0..20).map(|i| if i % 3 == 0 { Label::Pd } else { Label::Hc }).collect();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let reg = if i % 2 == 0 { 0.0 } else { 0.1 };
        let p: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let (gw, gb) = gradient(&x, &y, &p[..5], p[5], reg).map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = gw.into_iter().chain([gb]).collect();
        let numeric = oracles::central_difference(|q| objective(&x, &y, &q[..5], q[5], reg).unwrap(), &p, 1e-5);
        let err = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = analytic.iter().map(|a| a.abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    check(worst <= 1e-5, format!("max relative error {worst:.1e} at 10 points on 20x5"))
}

fn svm_instance(rng: &mut ChaCha8Rng, max_n: usize, dims: usize) -> (Matrix, Vec<Label>, Vec<f64>) {
    let n = rng.random_range(4..=max_n);
    let shift = rng.random_range(0.0..2.0);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Pd } else { Label::Hc };
        rows.push((0..dims).map(|_| label.sign() * shift + rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>());
        y.push(label);
    }
    let signs = y.iter().map(|l| l.sign()).collect();
    (Matrix::from_rows(&rows).unwrap(), y, signs)
}

fn svm_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..40 {
        let (x, y, ys) = svm_instance(&mut rng, 12, 2);
        let c = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let params = SvmParams { tol: 1e-6, max_passes: 10_000, ..SvmParams::new(c, KernelSpec::Linear) };
        let (_, sol) = fit_svm_detailed(&x, &y, &params, None).map_err(|e| e.to_string())?;
        let k = kernel_matrix(&KernelSpec::Linear, &x);
        let smo = oracles::dual_value(&k, &ys, &sol.alpha);
        let (_, best) = oracles::dual_qp(&k, &ys, c, 20_000);
        worst_gap = worst_gap.max((smo - best).abs() / best.abs().max(1.0));
    }

    let kernels = [KernelSpec::Linear, KernelSpec::rbf(0.5), KernelSpec::poly(0.3)];
    let (mut fits, mut converged, mut violations) = (0, 0, 0);
    for round in 0..60 {
        let (x, y, ys) = svm_instance(&mut rng, 30, 3);
        let c = [0.5, 5.0, 50.0][rng.random_range(0..3)];
        let tol = 1e-3;
        let (model, sol) = fit_svm_detailed(&x, &y, &SvmParams::new(c, kernels[round % 3]), None).map_err(|e| e.to_string())?;
        fits += 1;
        if !sol.converged {
            continue;
        }
        converged += 1;
        for (i, a) in sol.alpha.iter().enumerate() {
            let margin = ys[i] * model.decision_function(x.row(i)).map_err(|e| e.to_string())?;
            let ok = if *a <= 0.0 {
                margin >= 1.0 - tol
            } else if *a >= c {
                margin <= 1.0 + tol
            } else {
                (margin - 1.0).abs() <= tol
            };
            violations += usize::from(!ok);
        }
    }

    let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let y = [Label::Hc, Label::Hc, Label::Pd, Label::Pd];
    let (model, _) = fit_svm_detailed(&x, &y, &SvmParams::new(1000.0, KernelSpec::rbf(1.0)), None).map_err(|e| e.to_string())?;
    let correct = (0..4).filter(|&i| model.predict(x.row(i)).ok() == Some(y[i])).count();
    let xor_acc = correct as f64 / 4.0;

    check(
        worst_gap <= 1e-3 && violations == 0 && converged > 0 && xor_acc == 1.0,
        format!(
            "dual gap vs QP oracle {worst_gap:.1e} (40 instances); {violations} KKT violations over {converged}/{fits} converged fits; XOR train accuracy {xor_acc}"
        ),
    )
}

fn tree_split() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let all: Vec<usize> = (0..12).collect();
    let features = [0, 1, 2];
    let mut matched = 0;
    for _ in 0..100 {
        let levels = rng.random_range(2..8);
        let data = (0..36).map(|_| rng.random_range(0..levels) as f64).collect();
        let y: Vec<Label> = (0..12).map(|_| if rng.random_bool(0.5) { Label::Pd } else { Label::Hc }).collect();
        let x = Matrix::new(12, 3, data).unwrap();
        let same = match (best_split(&x, &y, &all, &features), oracles::exhaustive_gini_split(&x, &y, &all, &features)) {
            (None, None) => true,
            (Some(g), Some(w)) => {
                g.feature == w.feature
                    && g.threshold == (w.left_max + w.right_min) / 2.0
                    && oracles::weighted_gini(&oracles::side_counts(&x, &y, &all, g.feature, g.threshold)) == w.impurity
            }
            _ => false,
        };
        matched += usize::from(same);
    }
    check(matched == 100, format!("{matched}/100 splits identical to exhaustive Gini enumeration"))
}

fn augmentation() -> Outcome {
    let spec = CohortSpec { n_pd: 340, n_hc: 167, ..CohortSpec::ppmi_like(8) };
    let ds = generate_cohort(&spec).map_err(|e| e.to_string())?;
    let out = augment_negatives(&ds).map_err(|e| e.to_string())?;
    let counts = (out.count(Label::Pd), out.count(Label::Hc));

    let hc: Vec<&[f64]> = (0..ds.n_rows()).filter(|&i| ds.labels()[i] == Label::Hc).map(|i| ds.features().row(i)).collect();
    let mu: Vec<f64> = (0..ds.n_features())
        .map(|j| {
            let mut s = 0.0;
            for r in &hc {
                s += r[j];
            }
            s / hc.len() as f64
        })
        .collect();
    let mut mismatches = 0;
    for (k, r) in hc.iter().enumerate() {
        let appended = out.features().row(ds.n_rows() + k);
        let want: Vec<u64> = r.iter().zip(&mu).map(|(x, m)| (x - m).to_bits()).collect();
        let got: Vec<u64> = appended.iter().map(|v| v.to_bits()).collect();
        mismatches += usize::from(want != got || out.labels()[ds.n_rows() + k] != Label::Hc);
    }

    let cfg = RunConfig {
        input: InputSource::Synth { preset: "ppmi".into(), spec: CohortSpec { n_features: 3, informative: vec![(0, 0.5)], ..spec } },
        age_sex: AgeSex::Without,
        classifiers: vec![Classifier::Lr],
        outer_k: 3,
        inner_k: 2,
        seed: 8,
        leakage_mode: LeakageMode::PaperOrder,
        augment: Some(AugmentRule::SubtractMean),
        output_dir: PathBuf::from("unused"),
        threads: Some(1),
    };
    let loaded = load_input(&cfg).map_err(|e| format!("{e:#}"))?;
    let reports = run_reports(&cfg, &loaded.dataset, &Execution::Serial).map_err(|e| format!("{e:#}"))?;
    let report = render_report(&cfg, &loaded.source, &reports);
    let header: Vec<&str> = report.lines().filter(|l| l.starts_with('#')).collect();
    let documented = header.iter().any(|l| l.contains("PD=340 HC=334"))
        && header.iter().any(|l| l.contains("340 PD / 334 HC") && l.contains("341 PD / 332 HC"));

    check(
        counts == (340, 334) && mismatches == 0 && documented,
        format!(
            "340 PD / 167 HC -> {} PD / {} HC; {mismatches} appended rows differ from x - mean; report header documents the 341/332 gap: {documented}",
            counts.0, counts.1
        ),
    )
}

fn golden_config() -> RunConfig {
    RunConfig {
        input: InputSource::Synth { preset: "balanced".into(), spec: CohortSpec::balanced(40, 30, 4, 0.8, 11) },
        age_sex: AgeSex::Auto,
        classifiers: Classifier::ALL.to_vec(),
        outer_k: 5,
        inner_k: 3,
        seed: 11,
        leakage_mode: LeakageMode::PaperOrder,
        augment: Some(AugmentRule::SubtractMean),
        output_dir: PathBuf::from("unused"),
        threads: None,
    }
}

fn render(cfg: &RunConfig, ds: &LabeledDataset, source: &str, exec: &Execution) -> Result<(String, String), String> {
    let reports = run_reports(cfg, ds, exec).map_err(|e| format!("{e:#}"))?;
    Ok((render_report(cfg, source, &reports), render_folds(&reports)))
}

fn determinism() -> Outcome {
    let cfg = golden_config();
    let loaded = load_input(&cfg).map_err(|e| format!("{e:#}"))?;
    let serial = render(&cfg, &loaded.dataset, &loaded.source, &Execution::Serial)?;
    let parallel = render(&cfg, &loaded.dataset, &loaded.source, &Execution::with_threads(4).map_err(|e| e.to_string())?)?;
    let rerun = render(&cfg, &loaded.dataset, &loaded.source, &Execution::with_threads(2).map_err(|e| e.to_string())?)?;

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let files = [("report.csv", &serial.0), ("folds.csv", &serial.1)];
    let mut golden = Vec::new();
    if std::env::var_os("PDVOL_BLESS").is_some() {
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for (name, text) in files {
            std::fs::write(dir.join(name), text).map_err(|e| e.to_string())?;
        }
    }
    for (name, text) in files {
        let path = dir.join(name);
        let stored = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        golden.push(stored == *text);
    }
    let identical = serial == parallel && serial == rerun;
    check(
        identical && golden.iter().all(|g| *g),
        format!(
            "serial vs 4 and 2 threads byte-identical: {identical}; golden report.csv {} folds.csv {}",
            if golden[0] { "matches" } else { "DIFFERS" },
            if golden[1] { "matches" } else { "DIFFERS" }
        ),
    )
}

fn grid_fidelity() -> Outcome {
    let mut sizes = Vec::new();
    for c in Classifier::ALL {
        let combos = default_grid(c).combinations().map_err(|e| e.to_string())?;
        let labels: std::collections::BTreeSet<String> = combos.iter().map(|p| p.to_string()).collect();
        if labels.len() != combos.len() {
            return Err(format!("{c} grid has duplicate combinations"));
        }
        sizes.push(combos.len());
    }
    check(sizes == [25, 45, 65], format!("LR {}, RF {}, SVM {} distinct combinations", sizes[0], sizes[1], sizes[2]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("protocol shape", protocol_shape),
        ("oracle accuracy", oracle_accuracy),
        ("null safety", null_safety),
        ("AUC correctness", auc_correctness),
        ("LR gradient check", lr_gradient),
        ("SVM optimality", svm_optimality),
        ("tree split optimality", tree_split),
        ("augmentation arithmetic", augmentation),
        ("determinism", determinism),
        ("grid fidelity", grid_fidelity),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
