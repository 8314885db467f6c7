use pdvol_core::synth::{analytic_bayes_accuracy, generate_cohort, standard_normal_cdf, CohortSpec, AGE_BANDS};
use pdvol_core::Label;

#[test]
fn planted_shift_is_recovered_within_three_standard_errors() {
    let mut spec = CohortSpec::balanced(1000, 1000, 6, 0.0, 21);
    spec.informative = vec![(0, 0.5), (2, -1.0), (5, 2.0)];
    let ds = generate_cohort(&spec).unwrap();
    let n = 2000.0f64;
    for j in 0..6 {
        let col = ds.features().column(j);
        let mean_of = |l: Label| {
            let v: Vec<f64> = col.iter().zip(ds.labels()).filter(|(_, y)| **y == l).map(|(v, _)| *v).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var.sqrt())
        };
        let (pd, sd_pd) = mean_of(Label::Pd);
        let (hc, sd_hc) = mean_of(Label::Hc);
        let sd = 0.5 * (sd_pd + sd_hc);
        let shift = (pd - hc) / sd;
        let want = spec.informative.iter().find(|(k, _)| *k == j).map_or(0.0, |(_, e)| *e);
        // a difference of two n/2-row means has standard error 2 / sqrt(n)
        let se = 2.0 / n.sqrt();
        assert!((shift - want).abs() <= 3.0 * se, "feature {j}: {shift} vs {want}");
    }
}

#[test]
fn counts_match_the_spec() {
    let spec = CohortSpec { n_pd: 120, n_hc: 80, sex_ratio: 0.3, ..CohortSpec::ppmi_like(5) };
    let ds = generate_cohort(&spec).unwrap();
    assert_eq!((ds.count(Label::Pd), ds.count(Label::Hc)), (120, 80));
    let males = ds.features().column(ds.feature_index("sex").unwrap()).iter().filter(|&&s| s == 1.0).count();
    assert_eq!(males, 60);
    let ages = ds.features().column(ds.feature_index("age").unwrap());
    let mut bands = [0; 3];
    for a in ages {
        bands[AGE_BANDS.iter().position(|(lo, hi)| a >= *lo && a < *hi).unwrap()] += 1;
    }
    assert_eq!(bands, spec.age_band_counts());
    assert_eq!(bands.iter().sum::<usize>(), 200);
}

#[test]
fn bayes_accuracy_from_the_cdf() {
    let spec = CohortSpec::balanced(300, 300, 5, 1.0, 0);
    let d = (5.0f64).sqrt();
    assert_eq!(analytic_bayes_accuracy(&spec).unwrap(), standard_normal_cdf(d / 2.0));
    assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-16);
    assert!((standard_normal_cdf(-1.0) + standard_normal_cdf(1.0) - 1.0).abs() < 1e-15);
}
