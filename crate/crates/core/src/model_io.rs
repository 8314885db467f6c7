//! Line-oriented text format for fitted models.
//!
//! ```text
//! model <logistic|forest|svm>
//! features <n>
//! feature <name>            (n lines)
//! <key> <value>             (model fields)
//! ...
//! end
//! ```
//!
//! Reals are written with 17 significant digits and read back exactly. The
//! standardizer fit alongside the model is stored under `standardizer`.

use thiserror::Error;

use crate::dataset::{Matrix, Standardizer};
use crate::forest::{DecisionTree, ForestModel, Node};
use crate::linear::LogisticModel;
use crate::model_selection::{FittedPipeline, TrainedModel};
use crate::numfmt::g17;
use crate::svm::{KernelSpec, SvmModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelIoError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unexpected end of model text")]
    Truncated,
    #[error("feature name `{0}` contains whitespace")]
    BadFeatureName(String),
}

struct Writer(String);

impl Writer {
    fn kv(&mut self, key: &str, value: impl AsRef<str>) {
        self.0.push_str(key);
        self.0.push(' ');
        self.0.push_str(value.as_ref());
        self.0.push('\n');
    }

    fn reals(&mut self, key: &str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| g17(*v)).collect();
        self.kv(key, joined.join(" "));
    }
}

fn write_kernel(w: &mut Writer, k: &KernelSpec) {
    match *k {
        KernelSpec::Linear => w.kv("kernel", "linear"),
        KernelSpec::Rbf { gamma } => w.kv("kernel", format!("rbf {}", g17(gamma))),
        KernelSpec::Poly { gamma, degree, coef0 } => {
            w.kv("kernel", format!("poly {} {} {}", g17(gamma), degree, g17(coef0)))
        }
    }
}

pub fn write_pipeline(pipe: &FittedPipeline, feature_names: &[String]) -> Result<String, ModelIoError> {
    let mut w = Writer(String::new());
    let kind = match &pipe.model {
        TrainedModel::Logistic(_) => "logistic",
        TrainedModel::Forest(_) => "forest",
        TrainedModel::Svm(_) => "svm",
    };
    w.kv("model", kind);
    w.kv("features", feature_names.len().to_string());
    for name in feature_names {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(ModelIoError::BadFeatureName(name.clone()));
        }
        w.kv("feature", name);
    }
    w.reals("standardizer_mean", pipe.standardizer.mean());
    w.reals("standardizer_stddev", pipe.standardizer.stddev());
    match &pipe.model {
        TrainedModel::Logistic(m) => {
            w.kv("reg_strength", g17(m.reg_strength));
            w.kv("tolerance", g17(m.tolerance));
            w.kv("iterations_run", m.iterations_run.to_string());
            w.kv("converged", m.converged.to_string());
            w.kv("bias", g17(m.bias));
            w.reals("weights", &m.weights);
        }
        TrainedModel::Forest(m) => {
            w.kv("n_estimators", m.n_estimators.to_string());
            w.kv("max_depth", m.max_depth.to_string());
            w.kv("seed", m.seed.to_string());
            w.kv("feature_subsample", m.feature_subsample.to_string());
            for t in &m.trees {
                w.kv("tree", format!("{} {} {}", t.nodes.len(), t.max_depth, t.n_features));
                for n in &t.nodes {
                    match n {
                        Node::Split { feature, threshold, left, right } => {
                            w.kv("split", format!("{feature} {} {left} {right}", g17(*threshold)))
                        }
                        Node::Leaf { counts } => w.kv("leaf", format!("{} {}", counts[0], counts[1])),
                    }
                }
            }
        }
        TrainedModel::Svm(m) => {
            write_kernel(&mut w, &m.kernel);
            w.kv("C", g17(m.c));
            w.kv("converged", m.converged.to_string());
            w.kv("iterations", m.iterations.to_string());
            w.kv("bias", g17(m.bias));
            w.kv("support_vectors", format!("{} {}", m.support_vectors.rows(), m.support_vectors.cols()));
            for (row, coef) in m.support_vectors.iter_rows().zip(&m.dual_coef) {
                let mut vals = vec![*coef];
                vals.extend_from_slice(row);
                w.reals("sv", &vals);
            }
        }
    }
    w.0.push_str("end\n");
    Ok(w.0)
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn err(&self, reason: impl Into<String>) -> ModelIoError {
        let line = self.lines.get(self.pos.saturating_sub(1)).map_or(0, |l| l.0);
        ModelIoError::Parse { line, reason: reason.into() }
    }

    fn next(&mut self, key: &str) -> Result<&'a str, ModelIoError> {
        let (_, line) = *self.lines.get(self.pos).ok_or(ModelIoError::Truncated)?;
        self.pos += 1;
        let (k, v) = line.split_once(' ').unwrap_or((line, ""));
        if k != key {
            return Err(self.err(format!("expected `{key}`, found `{k}`")));
        }
        Ok(v.trim())
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelIoError> {
        let v = self.next(key)?;
        v.parse().map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn words<T: std::str::FromStr>(&self, v: &str, n: Option<usize>) -> Result<Vec<T>, ModelIoError> {
        let out = v
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| self.err(format!("bad value `{w}`"))))
            .collect::<Result<Vec<T>, _>>()?;
        if let Some(n) = n {
            if out.len() != n {
                return Err(self.err(format!("expected {n} values, found {}", out.len())));
            }
        }
        Ok(out)
    }

    fn reals(&mut self, key: &str, n: usize) -> Result<Vec<f64>, ModelIoError> {
        let v = self.next(key)?;
        self.words(v, Some(n))
    }
}

/// Parses [`write_pipeline`] output into the pipeline and its feature names.
pub fn read_pipeline(text: &str) -> Result<(FittedPipeline, Vec<String>), ModelIoError> {
    let mut r = Reader::new(text);
    let kind = r.next("model")?.to_string();
    let n: usize = r.parse("features")?;
    let names = (0..n).map(|_| r.next("feature").map(str::to_string)).collect::<Result<Vec<_>, _>>()?;
    let mean = r.reals("standardizer_mean", n)?;
    let stddev = r.reals("standardizer_stddev", n)?;
    let standardizer = Standardizer::from_parts(mean, stddev);
    let model = match kind.as_str() {
        "logistic" => {
            let reg_strength = r.parse("reg_strength")?;
            let tolerance = r.parse("tolerance")?;
            let iterations_run = r.parse("iterations_run")?;
            let converged = r.parse("converged")?;
            let bias = r.parse("bias")?;
            let weights = r.reals("weights", n)?;
            TrainedModel::Logistic(LogisticModel { weights, bias, reg_strength, tolerance, iterations_run, converged })
        }
        "forest" => {
            let n_estimators: usize = r.parse("n_estimators")?;
            let max_depth = r.parse("max_depth")?;
            let seed = r.parse("seed")?;
            let feature_subsample = r.parse("feature_subsample")?;
            let mut trees = Vec::with_capacity(n_estimators);
            for _ in 0..n_estimators {
                let v = r.next("tree")?;
                let head: Vec<usize> = r.words(v, Some(3))?;
                let mut nodes = Vec::with_capacity(head[0]);
                for _ in 0..head[0] {
                    let (_, line) = *r.lines.get(r.pos).ok_or(ModelIoError::Truncated)?;
                    if line.starts_with("leaf") {
                        let v = r.next("leaf")?;
                        let c: Vec<usize> = r.words(v, Some(2))?;
                        nodes.push(Node::Leaf { counts: [c[0], c[1]] });
                    } else {
                        let v: Vec<&str> = r.next("split")?.split_whitespace().collect();
                        if v.len() != 4 {
                            return Err(r.err("split needs 4 fields"));
                        }
                        let num = |s: &str| s.parse::<usize>().map_err(|_| r.err(format!("bad index `{s}`")));
                        let threshold = v[1].parse::<f64>().map_err(|_| r.err(format!("bad threshold `{}`", v[1])))?;
                        let (feature, left, right) = (num(v[0])?, num(v[2])?, num(v[3])?);
                        if left >= head[0] || right >= head[0] || feature >= head[2] {
                            return Err(r.err("split index out of range"));
                        }
                        nodes.push(Node::Split { feature, threshold, left, right });
                    }
                }
                trees.push(DecisionTree { nodes, max_depth: head[1], n_features: head[2] });
            }
            TrainedModel::Forest(ForestModel { trees, n_estimators, max_depth, seed, feature_subsample })
        }
        "svm" => {
            let kv = r.next("kernel")?;
            let parts: Vec<&str> = kv.split_whitespace().collect();
            let bad_kernel = || r.err(format!("bad kernel `{kv}`"));
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad_kernel());
            let kernel = match parts.as_slice() {
                ["linear"] => KernelSpec::Linear,
                ["rbf", g] => KernelSpec::Rbf { gamma: real(g)? },
                ["poly", g, d, c] => KernelSpec::Poly {
                    gamma: real(g)?,
                    degree: d.parse().map_err(|_| bad_kernel())?,
                    coef0: real(c)?,
                },
                _ => return Err(bad_kernel()),
            };
            let c = r.parse("C")?;
            let converged = r.parse("converged")?;
            let iterations = r.parse("iterations")?;
            let bias = r.parse("bias")?;
            let v = r.next("support_vectors")?;
            let shape: Vec<usize> = r.words(v, Some(2))?;
            let mut data = Vec::with_capacity(shape[0] * shape[1]);
            let mut dual_coef = Vec::with_capacity(shape[0]);
            for _ in 0..shape[0] {
                let v = r.reals("sv", shape[1] + 1)?;
                dual_coef.push(v[0]);
                data.extend_from_slice(&v[1..]);
            }
            let support_vectors = Matrix::new(shape[0], shape[1], data).map_err(|e| r.err(e.to_string()))?;
            TrainedModel::Svm(SvmModel { support_vectors, dual_coef, bias, kernel, c, converged, iterations })
        }
        other => return Err(r.err(format!("unknown model kind `{other}`"))),
    };
    r.next("end")?;
    Ok((FittedPipeline { standardizer, model }, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestParams;
    use crate::linear::LogisticParams;
    use crate::model_selection::{fit_pipeline, ParamSet};
    use crate::svm::SvmParams;
    use crate::synth::{generate_cohort, CohortSpec};

    #[test]
    fn every_model_kind_round_trips() {
        let ds = generate_cohort(&CohortSpec::balanced(20, 20, 3, 1.0, 5)).unwrap();
        for params in [
            ParamSet::Lr(LogisticParams::new(0.01, 1e-4)),
            ParamSet::Rf(ForestParams::new(4, 3)),
            ParamSet::Svm(SvmParams::new(10.0, KernelSpec::poly(0.1))),
            ParamSet::Svm(SvmParams::new(1.0, KernelSpec::rbf(0.5))),
            ParamSet::Svm(SvmParams::new(1.0, KernelSpec::Linear)),
        ] {
            let pipe = fit_pipeline(&params, &ds, 3).unwrap();
            let text = write_pipeline(&pipe, ds.feature_names()).unwrap();
            let (back, names) = read_pipeline(&text).unwrap();
            assert_eq!(names, ds.feature_names());
            assert_eq!(back, pipe, "{params}");
            assert_eq!(write_pipeline(&back, &names).unwrap(), text);
        }
    }

    #[test]
    fn malformed_text() {
        assert_eq!(read_pipeline(""), Err(ModelIoError::Truncated));
        assert!(matches!(read_pipeline("model logistic\nfeatures x\n"), Err(ModelIoError::Parse { line: 2, .. })));
        let ds = generate_cohort(&CohortSpec::balanced(5, 5, 2, 1.0, 1)).unwrap();
        let pipe = fit_pipeline(&ParamSet::Lr(LogisticParams::default()), &ds, 0).unwrap();
        let bad_names = vec!["a b".to_string(), "c".to_string()];
        assert_eq!(write_pipeline(&pipe, &bad_names), Err(ModelIoError::BadFeatureName("a b".into())));
    }
}
