//! Run configuration: a `key = value` text file plus overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pdvol_core::dataset::AugmentRule;
use pdvol_core::ingest::{Delimiter, FormatDescriptor};
use pdvol_core::model_selection::{Classifier, LeakageMode};
use pdvol_core::synth::CohortSpec;

/// Environment variable naming the output directory when neither the config
/// nor a flag sets one.
pub const OUTPUT_DIR_ENV: &str = "PDVOL_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "pdvol-out";

const KEYS: &[&str] = &[
    "stats_dir",
    "stats_format",
    "stats_name_column",
    "stats_volume_column",
    "stats_extension",
    "demographics",
    "exclusions",
    "dataset",
    "synth",
    "synth.n_pd",
    "synth.n_hc",
    "synth.n_features",
    "synth.effect",
    "synth.n_informative",
    "synth.informative",
    "synth.age_weights",
    "synth.sex_ratio",
    "synth.age_sex",
    "synth.seed",
    "age_sex",
    "classifiers",
    "outer_k",
    "inner_k",
    "seed",
    "leakage_mode",
    "augment",
    "output_dir",
    "threads",
];

/// Ordered key-value pairs. Later inserts win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{}`", i + 1, raw.trim()))?;
            kv.set(k.trim(), v.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown config key `{key}`");
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("override `{pair}` is not key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn remove(&mut self, key: &str) {
        self.0.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("bad value `{v}` for `{key}`: {e}")))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    StatsDir {
        dir: PathBuf,
        demographics: PathBuf,
        exclusions: Option<PathBuf>,
        format: FormatDescriptor,
        extension: String,
    },
    Dataset(PathBuf),
    Synth { preset: String, spec: CohortSpec },
}

/// Which age/sex settings `run` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgeSex {
    /// Both settings when the dataset carries `age` and `sex`, else without.
    Auto,
    With,
    Without,
    Both,
}

impl std::str::FromStr for AgeSex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(AgeSex::Auto),
            "with" | "true" => Ok(AgeSex::With),
            "without" | "false" => Ok(AgeSex::Without),
            "both" => Ok(AgeSex::Both),
            other => Err(format!("expected auto, with, without or both, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    pub age_sex: AgeSex,
    pub classifiers: Vec<Classifier>,
    pub outer_k: usize,
    pub inner_k: usize,
    pub seed: u64,
    pub leakage_mode: LeakageMode,
    pub augment: Option<AugmentRule>,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("bad value `{v}` for `{key}`: expected true or false"),
    }
}

fn parse_augment(v: &str) -> Result<Option<AugmentRule>> {
    if v.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    v.parse::<AugmentRule>().map(Some).map_err(|e| anyhow!("bad value for `augment`: {e}"))
}

fn parse_classifiers(v: &str) -> Result<Vec<Classifier>> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let c: Classifier = part.parse().map_err(|e| anyhow!("bad value for `classifiers`: {e}"))?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        bail!("`classifiers` is empty");
    }
    out.sort_by_key(|c| Classifier::ALL.iter().position(|a| a == c));
    Ok(out)
}

fn parse_informative(v: &str) -> Result<Vec<(usize, f64)>> {
    v.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (j, e) = p.split_once(':').ok_or_else(|| anyhow!("informative entry `{p}` is not index:effect"))?;
            let j = j.trim().parse().map_err(|_| anyhow!("bad feature index in `{p}`"))?;
            let e = e.trim().parse().map_err(|_| anyhow!("bad effect size in `{p}`"))?;
            Ok((j, e))
        })
        .collect()
}

fn synth_spec(kv: &KeyValues, preset: &str, seed: u64) -> Result<CohortSpec> {
    let seed = kv.parsed("synth.seed")?.unwrap_or(seed);
    let mut spec = match preset {
        "ppmi" => CohortSpec::ppmi_like(seed),
        "balanced" => CohortSpec::balanced(300, 300, 5, 1.0, seed),
        other => bail!("bad value `{other}` for `synth`: expected ppmi or balanced"),
    };
    if let Some(n) = kv.parsed("synth.n_pd")? {
        spec.n_pd = n;
    }
    if let Some(n) = kv.parsed("synth.n_hc")? {
        spec.n_hc = n;
    }
    if let Some(n) = kv.parsed::<usize>("synth.n_features")? {
        spec.n_features = n;
        spec.informative.retain(|&(j, _)| j < n);
    }
    let effect: Option<f64> = kv.parsed("synth.effect")?;
    let n_inf: Option<usize> = kv.parsed("synth.n_informative")?;
    if effect.is_some() || n_inf.is_some() {
        let e = effect.unwrap_or(1.0);
        let m = n_inf.unwrap_or(spec.n_features);
        spec.informative = (0..m).map(|j| (j, e)).collect();
    }
    if let Some(v) = kv.get("synth.informative") {
        spec.informative = parse_informative(v)?;
    }
    if let Some(v) = kv.get("synth.age_weights") {
        let w: Vec<f64> = v
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| anyhow!("bad value `{v}` for `synth.age_weights`"))?;
        if w.len() != 3 {
            bail!("`synth.age_weights` needs three weights, got {}", w.len());
        }
        spec.age_band_weights = [w[0], w[1], w[2]];
    }
    if let Some(r) = kv.parsed("synth.sex_ratio")? {
        spec.sex_ratio = r;
    }
    if let Some(v) = kv.get("synth.age_sex") {
        spec.include_age_sex = parse_bool("synth.age_sex", v)?;
    }
    spec.validate()?;
    Ok(spec)
}

impl RunConfig {
    /// Builds a config from merged key-values. `env_output_dir` is the value
    /// of [`OUTPUT_DIR_ENV`], if set.
    pub fn from_key_values(kv: &KeyValues, env_output_dir: Option<&str>) -> Result<Self> {
        let seed = kv.parsed("seed")?.unwrap_or(0);
        let sources: Vec<&str> =
            ["stats_dir", "dataset", "synth"].into_iter().filter(|k| kv.get(k).is_some()).collect();
        let input = match sources.as_slice() {
            ["stats_dir"] => {
                let mut format = match kv.get("stats_format").unwrap_or("aseg") {
                    "aseg" => FormatDescriptor::aseg(),
                    "csv" => FormatDescriptor::csv(),
                    other => bail!("bad value `{other}` for `stats_format`: expected aseg or csv"),
                };
                if let Some(c) = kv.parsed("stats_name_column")? {
                    format.name_column = c;
                }
                if let Some(c) = kv.parsed("stats_volume_column")? {
                    format.volume_column = c;
                }
                let default_ext = if format.delimiter == Delimiter::Comma { "csv" } else { "stats" };
                InputSource::StatsDir {
                    dir: kv.get("stats_dir").unwrap().into(),
                    demographics: kv
                        .get("demographics")
                        .ok_or_else(|| anyhow!("`stats_dir` input needs `demographics`"))?
                        .into(),
                    exclusions: kv.get("exclusions").map(PathBuf::from),
                    format,
                    extension: kv.get("stats_extension").unwrap_or(default_ext).to_string(),
                }
            }
            ["dataset"] => InputSource::Dataset(kv.get("dataset").unwrap().into()),
            ["synth"] => {
                let preset = kv.get("synth").unwrap().to_ascii_lowercase();
                let spec = synth_spec(kv, &preset, seed)?;
                InputSource::Synth { preset, spec }
            }
            [] => bail!("no input: set one of stats_dir, dataset or synth"),
            many => bail!("exactly one input source may be set, got {}", many.join(", ")),
        };
        if !matches!(input, InputSource::Synth { .. }) {
            if let Some(k) = KEYS.iter().find(|k| k.starts_with("synth.") && kv.get(k).is_some()) {
                bail!("`{k}` is set but the input is not `synth`");
            }
        }

        let outer_k = kv.parsed("outer_k")?.unwrap_or(10);
        let inner_k = kv.parsed("inner_k")?.unwrap_or(5);
        if outer_k < 2 || inner_k < 2 {
            bail!("outer_k and inner_k must be at least 2 (got {outer_k} and {inner_k})");
        }
        let threads = match kv.parsed::<usize>("threads")? {
            Some(0) => bail!("`threads` must be at least 1"),
            t => t,
        };
        let output_dir = kv
            .get("output_dir")
            .or(env_output_dir.filter(|s| !s.is_empty()))
            .unwrap_or(DEFAULT_OUTPUT_DIR)
            .into();
        Ok(RunConfig {
            input,
            age_sex: kv.parsed("age_sex")?.unwrap_or(AgeSex::Auto),
            classifiers: match kv.get("classifiers") {
                Some(v) => parse_classifiers(v)?,
                None => Classifier::ALL.to_vec(),
            },
            outer_k,
            inner_k,
            seed,
            leakage_mode: kv.parsed("leakage_mode")?.unwrap_or(LeakageMode::PaperOrder),
            augment: match kv.get("augment") {
                Some(v) => parse_augment(v)?,
                None => Some(AugmentRule::SubtractMean),
            },
            output_dir,
            threads,
        })
    }
}
