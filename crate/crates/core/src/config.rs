//! Run inputs: manifests, score files and run configuration.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{Frontend, FrontendParams};
use crate::fusion::{ensemble_lm_weight, DecodeConfig, FusionWeights, LM_WEIGHT_PER_MODEL};
use crate::metrics::ScoreUnit;
use crate::scoring::TokenUnit;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub audio: PathBuf,
    pub transcript: Option<String>,
}

/// Utterance list. One record per line: `id<TAB>audio_path[<TAB>transcript]`.
/// Blank lines and lines starting with `#` are skipped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Relative audio paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let bad = |line: usize, reason: String| {
            Error::malformed("manifest", format!("line {line}: {reason}"))
        };
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() < 2 {
                return Err(bad(
                    k + 1,
                    "expected id<TAB>audio_path[<TAB>transcript]".into(),
                ));
            }
            let id = fields[0].trim();
            let audio = fields[1].trim();
            if id.is_empty() || audio.is_empty() {
                return Err(bad(k + 1, "empty id or audio path".into()));
            }
            if !seen.insert(id.to_string()) {
                return Err(bad(k + 1, format!("duplicate id {id:?}")));
            }
            let audio = Path::new(audio);
            entries.push(ManifestEntry {
                id: id.to_string(),
                audio: if audio.is_absolute() {
                    audio.to_path_buf()
                } else {
                    base.join(audio)
                },
                transcript: fields.get(2).map(|t| t.trim().to_string()),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `id text...` per line; the text may be empty.
pub fn parse_score_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (id, rest) = match line.split_once(char::is_whitespace) {
            Some((id, rest)) => (id, rest.trim()),
            None => (line, ""),
        };
        if !seen.insert(id.to_string()) {
            return Err(Error::malformed(
                "score file",
                format!("line {}: duplicate id {id:?}", k + 1),
            ));
        }
        out.push((id.to_string(), rest.to_string()));
    }
    Ok(out)
}

/// Parses JSON, naming the offending field on failure.
pub fn from_json_with_path<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::InvalidConfig(if path == "." {
            e.into_inner().to_string()
        } else {
            format!("{path}: {}", e.into_inner())
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    Uniform,
    ValidationWeighted,
}

/// Fusion weights as written in a config: a rule name or an explicit
/// `M x 2` matrix of `[attention, ctc]` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Rule(AlphaRule),
    Matrix(Vec<[f64; 2]>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        Self::Rule(AlphaRule::Uniform)
    }
}

impl std::str::FromStr for AlphaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Rule(AlphaRule::Uniform)),
            "validation_weighted" => Ok(Self::Rule(AlphaRule::ValidationWeighted)),
            _ => from_json_with_path::<Vec<[f64; 2]>>(s)
                .map(Self::Matrix)
                .map_err(|_| {
                    Error::InvalidConfig(format!(
                        "alpha {s:?}: expected uniform, validation_weighted or [[att, ctc], ...]"
                    ))
                }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

/// `"auto"` or an explicit non-negative weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LmWeightSpec {
    Auto(Auto),
    Value(f64),
}

impl Default for LmWeightSpec {
    fn default() -> Self {
        Self::Auto(Auto::Auto)
    }
}

impl std::str::FromStr for LmWeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::Auto(Auto::Auto));
        }
        s.parse().map(Self::Value).map_err(|_| {
            Error::InvalidConfig(format!("lm_weight {s:?}: expected auto or a number"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Defaults to the file stem of `path`.
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    pub frontend: Frontend,
    #[serde(default)]
    pub frontend_params: FrontendParams,
    /// Global normalization statistics JSON applied before encoding.
    #[serde(default)]
    pub normalization: Option<PathBuf>,
    /// Development-set error used by `validation_weighted`.
    #[serde(default)]
    pub dev_error: Option<f64>,
}

impl ModelSpec {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.path.display().to_string())
        })
    }
}

fn default_ctc_weight() -> f64 {
    crate::fusion::DEFAULT_CTC_WEIGHT
}

/// Everything a decode, ablation or diversity run reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub lm: Option<PathBuf>,
    #[serde(default)]
    pub alpha: AlphaSpec,
    #[serde(default)]
    pub lm_weight: LmWeightSpec,
    #[serde(default = "default_beam")]
    pub beam_size: usize,
    #[serde(default)]
    pub pre_beam_size: Option<usize>,
    #[serde(default = "default_maxlen_ratio")]
    pub maxlen_ratio: f64,
    #[serde(default = "default_subsample")]
    pub subsample_factor: usize,
    #[serde(default)]
    pub minlen: usize,
    #[serde(default)]
    pub nbest: Option<usize>,
    #[serde(default)]
    pub token_unit: TokenUnit,
    #[serde(default)]
    pub score_unit: ScoreUnit,
    /// CTC weight of the teacher-forced step score in diversity runs.
    #[serde(default = "default_ctc_weight")]
    pub teacher_forcing_ctc_weight: f64,
    /// Model order for incremental gains; defaults to config order.
    #[serde(default)]
    pub model_order: Option<Vec<usize>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_beam() -> usize {
    DecodeConfig::default().beam_size
}

fn default_maxlen_ratio() -> f64 {
    DecodeConfig::default().maxlen_ratio
}

fn default_subsample() -> usize {
    DecodeConfig::default().subsample_factor
}

impl Default for RunConfig {
    fn default() -> Self {
        from_json_with_path("{}").expect("empty config uses defaults")
    }
}

/// Rounds away binary noise such as `0.6 * 3 = 1.7999999999999998`.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        from_json_with_path(text)
    }

    /// Loads a config, resolving relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.manifest.as_mut() {
            fix(p);
        }
        if let Some(p) = self.lm.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output_dir.as_mut() {
            fix(p);
        }
        for m in &mut self.models {
            fix(&mut m.path);
            if let Some(p) = m.normalization.as_mut() {
                fix(p);
            }
        }
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            beam_size: self.beam_size,
            pre_beam_size: self.pre_beam_size,
            maxlen_ratio: self.maxlen_ratio,
            subsample_factor: self.subsample_factor,
            minlen: self.minlen,
            nbest: self.nbest,
        }
    }

    /// LM weight for an ensemble of `num_models`; zero without an LM.
    pub fn resolved_lm_weight(&self, num_models: usize) -> Result<f64> {
        if self.lm.is_none() {
            return Ok(0.0);
        }
        match self.lm_weight {
            LmWeightSpec::Auto(_) => Ok(tidy(ensemble_lm_weight(num_models, LM_WEIGHT_PER_MODEL))),
            LmWeightSpec::Value(v) if v.is_finite() && v >= 0.0 => Ok(v),
            LmWeightSpec::Value(v) => {
                Err(Error::InvalidConfig(format!("lm_weight: {v} must be >= 0")))
            }
        }
    }

    /// Fusion weights for the first `num_models` models.
    pub fn weights(&self, num_models: usize) -> Result<FusionWeights> {
        let lm_weight = self.resolved_lm_weight(num_models)?;
        let field = |e: Error| Error::InvalidConfig(format!("alpha: {e}"));
        match &self.alpha {
            AlphaSpec::Rule(AlphaRule::Uniform) => {
                FusionWeights::uniform(num_models, lm_weight).map_err(field)
            }
            AlphaSpec::Rule(AlphaRule::ValidationWeighted) => {
                let errs = self
                    .models
                    .iter()
                    .take(num_models)
                    .enumerate()
                    .map(|(i, m)| {
                        m.dev_error.ok_or_else(|| {
                            Error::InvalidConfig(format!(
                                "models[{i}].dev_error: required by validation_weighted"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                FusionWeights::validation_weighted(&errs, lm_weight).map_err(field)
            }
            AlphaSpec::Matrix(rows) => {
                if rows.len() != num_models {
                    return Err(Error::InvalidConfig(format!(
                        "alpha: {} rows for {num_models} models",
                        rows.len()
                    )));
                }
                FusionWeights::new(rows.clone(), lm_weight).map_err(field)
            }
        }
    }

    pub fn model_order(&self) -> Vec<usize> {
        self.model_order
            .clone()
            .unwrap_or_else(|| (0..self.models.len()).collect())
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        self.decode_config()
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("decode: {e}")))?;
        if !(0.0..=1.0).contains(&self.teacher_forcing_ctc_weight) {
            return Err(Error::InvalidConfig(format!(
                "teacher_forcing_ctc_weight: {} not in [0, 1]",
                self.teacher_forcing_ctc_weight
            )));
        }
        if !self.models.is_empty() {
            self.weights(self.models.len())?;
        }
        Ok(())
    }

    /// The config with defaults and derived values written out.
    pub fn resolved(&self) -> Result<ResolvedRun> {
        let m = self.models.len();
        let (alpha, lm_weight) = if m == 0 {
            (Vec::new(), self.resolved_lm_weight(1)?)
        } else {
            let w = self.weights(m)?;
            (w.alpha().to_vec(), w.lm_weight())
        };
        Ok(ResolvedRun {
            manifest: self.manifest.clone(),
            models: self
                .models
                .iter()
                .map(|s| ModelSpec {
                    name: Some(s.display_name()),
                    ..s.clone()
                })
                .collect(),
            lm: self.lm.clone(),
            alpha,
            lm_weight,
            decode: self.decode_config().resolved(),
            token_unit: self.token_unit,
            score_unit: self.score_unit,
            teacher_forcing_ctc_weight: self.teacher_forcing_ctc_weight,
            model_order: self.model_order(),
            seed: self.seed,
        })
    }
}

/// Echo of a run's effective settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub manifest: Option<PathBuf>,
    pub models: Vec<ModelSpec>,
    pub lm: Option<PathBuf>,
    pub alpha: Vec<[f64; 2]>,
    pub lm_weight: f64,
    pub decode: DecodeConfig,
    pub token_unit: TokenUnit,
    pub score_unit: ScoreUnit,
    pub teacher_forcing_ctc_weight: f64,
    pub model_order: Vec<usize>,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parsing() {
        let text = "# comment\nu1\ta.wav\thello world\n\nu2\t/abs/b.wav\nu3\tc.wav\t\n";
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.entries[0].audio, PathBuf::from("/data/a.wav"));
        assert_eq!(m.entries[0].transcript.as_deref(), Some("hello world"));
        assert_eq!(m.entries[1].audio, PathBuf::from("/abs/b.wav"));
        assert_eq!(m.entries[1].transcript, None);
        assert_eq!(m.entries[2].transcript.as_deref(), Some(""));
        assert!(Manifest::parse("u1\ta\nu1\tb\n", Path::new("")).is_err());
        assert!(Manifest::parse("u1 a.wav\n", Path::new("")).is_err());
        assert!(Manifest::parse("", Path::new("")).unwrap().is_empty());
    }

    #[test]
    fn score_files() {
        let s = parse_score_file("u1 hello world\nu2\n\nu3\tx  y\n").unwrap();
        assert_eq!(s[0], ("u1".into(), "hello world".into()));
        assert_eq!(s[1], ("u2".into(), String::new()));
        assert_eq!(s[2], ("u3".into(), "x  y".into()));
        assert!(parse_score_file("a x\na y\n").is_err());
    }

    fn two_models(extra: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"models": [{{"path": "a.json", "frontend": "MEL", "dev_error": 2.0}},
                           {{"path": "b.json", "frontend": "modgd", "dev_error": 4.0}}],
                "lm": "lm.arpa" {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn weights_resolution() {
        let c = two_models("");
        let r = c.resolved().unwrap();
        assert_eq!(r.alpha, vec![[0.35, 0.15], [0.35, 0.15]]);
        assert_eq!(r.lm_weight, 1.2);
        assert_eq!(r.decode.pre_beam_size, Some(8));
        assert_eq!(r.models[1].name.as_deref(), Some("b"));
        let c = two_models(r#", "alpha": "validation_weighted", "lm_weight": 0.25"#);
        let w = c.weights(2).unwrap();
        assert!((w.alpha()[0][0] - 0.7 * 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(w.lm_weight(), 0.25);
        let c = two_models(r#", "alpha": [[0.5, 0.5]]"#);
        assert!(c.weights(2).is_err());
        assert!(c.weights(1).is_ok());
    }

    #[test]
    fn auto_lm_weight_is_tidy() {
        let mut c = two_models("");
        c.models.push(c.models[0].clone());
        assert_eq!(c.resolved().unwrap().lm_weight, 1.8);
        c.lm = None;
        assert_eq!(c.resolved().unwrap().lm_weight, 0.0);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_json(r#"{"beam_size": "five"}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("beam_size"), "{e}");
        let e = RunConfig::from_json(r#"{"models": [{"path": "a", "frontend": "XYZ"}]}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("models[0].frontend"), "{e}");
        let e = RunConfig::from_json(r#"{"beems": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("beems"), "{e}");
        let c = RunConfig::from_json(r#"{"beam_size": 4, "pre_beam_size": 2}"#).unwrap();
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("pre_beam_size"));
    }

    #[test]
    fn flag_parsing() {
        assert_eq!(
            "uniform".parse::<AlphaSpec>().unwrap(),
            AlphaSpec::Rule(AlphaRule::Uniform)
        );
        assert_eq!(
            "[[0.7,0.3]]".parse::<AlphaSpec>().unwrap(),
            AlphaSpec::Matrix(vec![[0.7, 0.3]])
        );
        assert!("mean".parse::<AlphaSpec>().is_err());
        assert_eq!(
            "auto".parse::<LmWeightSpec>().unwrap(),
            LmWeightSpec::default()
        );
        assert_eq!(
            "0.5".parse::<LmWeightSpec>().unwrap(),
            LmWeightSpec::Value(0.5)
        );
    }

    #[test]
    fn relative_paths() {
        let mut c = two_models(r#", "manifest": "m.tsv""#);
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.models[0].path, PathBuf::from("/cfg/a.json"));
        assert_eq!(c.manifest, Some(PathBuf::from("/cfg/m.tsv")));
    }
}
