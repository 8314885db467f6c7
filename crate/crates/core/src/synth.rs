//! Synthetic cohorts with a planted PD effect.
//!
//! Each region volume is `mean_j + sd_j * (z + shift_j)` with `z ~ N(0, 1)`
//! drawn independently, and `shift_j = effect_j` for PD rows on informative
//! features (zero otherwise). With equal class priors the best achievable
//! accuracy is `Phi(d / 2)`, `d = sqrt(sum effect_j^2)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dataset::{Label, LabeledDataset, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
}

/// Age bands sampled uniformly: `[25, 50)`, `[50, 75)`, `[75, 100)`.
pub const AGE_BANDS: [(f64, f64); 3] = [(25.0, 50.0), (50.0, 75.0), (75.0, 100.0)];

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub n_pd: usize,
    pub n_hc: usize,
    pub n_features: usize,
    /// `(feature index, standardized mean shift of PD over HC)`.
    pub informative: Vec<(usize, f64)>,
    pub age_band_weights: [f64; 3],
    /// Fraction of male subjects.
    pub sex_ratio: f64,
    /// Append `age` and `sex` columns after the region volumes.
    pub include_age_sex: bool,
    pub seed: u64,
}

impl CohortSpec {
    /// Cohort shaped like the PPMI baseline sample: 411 PD / 187 HC, age
    /// bands 81 / 472 / 45, 381 of 598 male, 139 region volumes of which a
    /// handful carry a modest shift.
    pub fn ppmi_like(seed: u64) -> Self {
        Self {
            n_pd: 411,
            n_hc: 187,
            n_features: 139,
            informative: vec![(0, 0.4), (3, 0.3), (7, 0.3), (12, -0.3), (20, 0.25)],
            age_band_weights: [81.0 / 598.0, 472.0 / 598.0, 45.0 / 598.0],
            sex_ratio: 381.0 / 598.0,
            include_age_sex: true,
            seed,
        }
    }

    /// `n_features` informative features with the same effect each and no
    /// demographic columns.
    pub fn balanced(n_pd: usize, n_hc: usize, n_features: usize, effect: f64, seed: u64) -> Self {
        Self {
            n_pd,
            n_hc,
            n_features,
            informative: (0..n_features).map(|j| (j, effect)).collect(),
            age_band_weights: [81.0 / 598.0, 472.0 / 598.0, 45.0 / 598.0],
            sex_ratio: 0.5,
            include_age_sex: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_pd + self.n_hc == 0 {
            return bad("cohort has no subjects".into());
        }
        if self.n_features == 0 && !self.include_age_sex {
            return bad("cohort has no features".into());
        }
        let mut seen = vec![false; self.n_features];
        for &(j, e) in &self.informative {
            if j >= self.n_features {
                return bad(format!("informative index {j} >= n_features {}", self.n_features));
            }
            if std::mem::replace(&mut seen[j], true) {
                return bad(format!("informative index {j} listed twice"));
            }
            if !e.is_finite() {
                return bad(format!("effect size for feature {j} is not finite"));
            }
        }
        let w = &self.age_band_weights;
        if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("age band weights {w:?} must be non-negative and sum to 1"));
        }
        if !(0.0..=1.0).contains(&self.sex_ratio) {
            return bad(format!("sex ratio {} outside [0, 1]", self.sex_ratio));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_pd + self.n_hc
    }

    /// Subjects per age band, by largest remainder.
    pub fn age_band_counts(&self) -> [usize; 3] {
        let total = self.total();
        let exact: Vec<f64> = self.age_band_weights.iter().map(|w| w * total as f64).collect();
        let mut counts = [0usize; 3];
        for b in 0..3 {
            counts[b] = exact[b].floor() as usize;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let mut left = total - counts.iter().sum::<usize>();
        for &b in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[b] += 1;
            left -= 1;
        }
        counts
    }

    pub fn male_count(&self) -> usize {
        (self.sex_ratio * self.total() as f64).round() as usize
    }
}

const REGION_NAMES: [&str; 40] = [
    "Left-Lateral-Ventricle", "Left-Inf-Lat-Vent", "Left-Cerebellum-White-Matter",
    "Left-Cerebellum-Cortex", "Left-Thalamus", "Left-Caudate", "Left-Putamen", "Left-Pallidum",
    "3rd-Ventricle", "4th-Ventricle", "Brain-Stem", "Left-Hippocampus", "Left-Amygdala", "CSF",
    "Left-Accumbens-area", "Left-VentralDC", "Left-vessel", "Left-choroid-plexus",
    "Right-Lateral-Ventricle", "Right-Inf-Lat-Vent", "Right-Cerebellum-White-Matter",
    "Right-Cerebellum-Cortex", "Right-Thalamus", "Right-Caudate", "Right-Putamen",
    "Right-Pallidum", "Right-Hippocampus", "Right-Amygdala", "Right-Accumbens-area",
    "Right-VentralDC", "Right-vessel", "Right-choroid-plexus", "WM-hypointensities",
    "Optic-Chiasm", "CC_Posterior", "CC_Mid_Posterior", "CC_Central", "CC_Mid_Anterior",
    "CC_Anterior", "EstimatedTotalIntraCranialVol",
];

pub fn feature_name(j: usize) -> String {
    REGION_NAMES.get(j).map_or_else(|| format!("Region-{j:03}"), |s| s.to_string())
}

/// Baseline mean and spread of region `j`, in mm³.
fn region_scale(j: usize) -> (f64, f64) {
    let mean = 500.0 + 750.0 * ((j * 7) % 19) as f64;
    (mean, 0.1 * mean)
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<LabeledDataset, SynthError> {
    spec.validate()?;
    let total = spec.total();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut shift = vec![0.0; spec.n_features];
    for &(j, e) in &spec.informative {
        shift[j] = e;
    }
    let labels: Vec<Label> = std::iter::repeat_n(Label::Pd, spec.n_pd)
        .chain(std::iter::repeat_n(Label::Hc, spec.n_hc))
        .collect();

    let mut bands: Vec<usize> = spec
        .age_band_counts()
        .iter()
        .enumerate()
        .flat_map(|(b, &c)| std::iter::repeat_n(b, c))
        .collect();
    bands.shuffle(&mut rng);
    let n_male = spec.male_count();
    let mut sexes: Vec<f64> = (0..total).map(|i| if i < n_male { 1.0 } else { 0.0 }).collect();
    sexes.shuffle(&mut rng);

    let width = spec.n_features + if spec.include_age_sex { 2 } else { 0 };
    let mut data = Vec::with_capacity(total * width);
    for (i, label) in labels.iter().enumerate() {
        for (j, s) in shift.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let (mean, sd) = region_scale(j);
            let planted = if label.is_positive() { *s } else { 0.0 };
            data.push(mean + sd * (z + planted));
        }
        if spec.include_age_sex {
            let (lo, hi) = AGE_BANDS[bands[i]];
            data.push(rng.random_range(lo..hi));
            data.push(sexes[i]);
        }
    }

    let mut names: Vec<String> = (0..spec.n_features).map(feature_name).collect();
    if spec.include_age_sex {
        names.push("age".into());
        names.push("sex".into());
    }
    let ids = (0..total).map(|i| format!("SYN{:05}", i + 1)).collect();
    let features = Matrix::new(total, width, data).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    LabeledDataset::new(features, labels, names, ids).map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

/// Mahalanobis separation `sqrt(sum effect^2)` between the class means.
pub fn separation(spec: &CohortSpec) -> f64 {
    spec.informative.iter().map(|(_, e)| e * e).sum::<f64>().sqrt()
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Bayes accuracy `Phi(d / 2)` of the equal-prior two-Gaussian problem.
pub fn analytic_bayes_accuracy(spec: &CohortSpec) -> Result<f64, SynthError> {
    spec.validate()?;
    Ok(standard_normal_cdf(separation(spec) / 2.0))
}
