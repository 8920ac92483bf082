//! Audio-to-text over whole corpora: ensembles of toy models, decoding,
//! ablation over model prefixes and teacher-forced outcome collection.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ManifestEntry, RunConfig};
use crate::diversity::{teacher_forced_predict, TokenOutcomeMatrix};
use crate::error::{Error, Result};
use crate::frontend::{
    apply_normalization, extract, read_wav, AudioBuffer, FeatureMatrix, Frontend, FrontendParams,
    NormalizationStats,
};
use crate::fusion::{
    ensemble_beam_search, DecodeConfig, DecodeResult, FusionWeights, ModelInput, ScoreBreakdown,
};
use crate::metrics::{ScoreUnit, ScoringReport};
use crate::scoring::{
    CtcPosteriorGrid, EncodedUtterance, LmScorer, NGramLm, TokenId, TokenUnit, ToyModel, Vocabulary,
};

/// A model together with the frontend that feeds it.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub name: String,
    pub model: ToyModel,
    pub frontend: Frontend,
    pub params: FrontendParams,
    pub normalization: Option<NormalizationStats>,
}

/// Encoder output for one member and one utterance.
#[derive(Clone, Debug)]
pub struct PreparedInput {
    pub encoded: EncodedUtterance,
    pub grid: CtcPosteriorGrid,
    pub speech_frames: usize,
}

impl EnsembleMember {
    pub fn features(&self, audio: &AudioBuffer) -> Result<FeatureMatrix> {
        let f = extract(self.frontend, audio, &self.params)?;
        let f = match &self.normalization {
            Some(stats) => apply_normalization(&f, stats)?,
            None => f,
        };
        if f.dim() != self.model.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} features of dimension {} for a model expecting {}",
                self.name,
                self.frontend,
                f.dim(),
                self.model.input_dim()
            )));
        }
        Ok(f)
    }

    pub fn prepare(&self, audio: &AudioBuffer) -> Result<PreparedInput> {
        let f = self.features(audio)?;
        let (encoded, grid) = self.model.encode(&f)?;
        Ok(PreparedInput {
            encoded,
            grid,
            speech_frames: f.num_frames(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub members: Vec<EnsembleMember>,
    pub lm: Option<NGramLm>,
    pub weights: FusionWeights,
    pub decode: DecodeConfig,
    pub token_unit: TokenUnit,
}

impl Ensemble {
    pub fn new(
        members: Vec<EnsembleMember>,
        lm: Option<NGramLm>,
        weights: FusionWeights,
        decode: DecodeConfig,
        token_unit: TokenUnit,
    ) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Empty("ensemble has no models".into()))?;
        for m in &members[1..] {
            if m.model.vocab != first.model.vocab {
                return Err(Error::InvalidConfig(format!(
                    "model {} uses a different vocabulary from {}",
                    m.name, first.name
                )));
            }
        }
        if weights.num_models() != members.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weight rows for {} models",
                weights.num_models(),
                members.len()
            )));
        }
        decode.validate()?;
        Ok(Self {
            members,
            lm,
            weights,
            decode,
            token_unit,
        })
    }

    /// Loads models, normalization statistics and the LM named by `cfg`.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        if cfg.models.is_empty() {
            return Err(Error::InvalidConfig(
                "models: at least one model is required".into(),
            ));
        }
        cfg.validate()?;
        let members = cfg
            .models
            .iter()
            .map(|spec| {
                let normalization = match &spec.normalization {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                        Some(NormalizationStats::from_json(&text)?)
                    }
                    None => None,
                };
                Ok(EnsembleMember {
                    name: spec.display_name(),
                    model: ToyModel::load(&spec.path)?,
                    frontend: spec.frontend,
                    params: spec.frontend_params.clone(),
                    normalization,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lm = match &cfg.lm {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Some(NGramLm::from_arpa(&text)?)
            }
            None => None,
        };
        Self::new(
            members,
            lm,
            cfg.weights(cfg.models.len())?,
            cfg.decode_config(),
            cfg.token_unit,
        )
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.members[0].model.vocab
    }

    pub fn prepare(&self, audio: &AudioBuffer) -> Result<Vec<PreparedInput>> {
        self.members.iter().map(|m| m.prepare(audio)).collect()
    }

    /// Decodes with the first `prepared.len()` members under `weights`.
    pub fn decode_prepared(
        &self,
        prepared: &[PreparedInput],
        weights: &FusionWeights,
    ) -> Result<DecodeResult> {
        if prepared.is_empty() || prepared.len() > self.members.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} prepared inputs for {} models",
                prepared.len(),
                self.members.len()
            )));
        }
        let bound = self
            .members
            .iter()
            .zip(prepared)
            .map(|(m, p)| m.model.attention(&p.encoded))
            .collect::<Result<Vec<_>>>()?;
        let inputs: Vec<ModelInput> = bound
            .iter()
            .zip(prepared)
            .map(|(b, p)| ModelInput {
                attention: b,
                grid: &p.grid,
                speech_frames: p.speech_frames,
            })
            .collect();
        let lm = self.lm.as_ref().map(|lm| LmScorer::new(lm, self.vocab()));
        ensemble_beam_search(&inputs, lm.as_ref(), self.vocab(), weights, &self.decode)
    }

    pub fn decode_audio(&self, audio: &AudioBuffer) -> Result<DecodeResult> {
        self.decode_prepared(&self.prepare(audio)?, &self.weights)
    }

    /// Teacher-forced predictions of every member for `reference`.
    pub fn teacher_forced(
        &self,
        audio: &AudioBuffer,
        reference: &[TokenId],
        ctc_weight: f64,
    ) -> Result<Vec<Vec<TokenId>>> {
        self.members
            .iter()
            .map(|m| {
                let p = m.prepare(audio)?;
                let att = m.model.attention(&p.encoded)?;
                teacher_forced_predict(&att, &p.grid, self.vocab(), reference, ctc_weight)
            })
            .collect()
    }

    pub fn text(&self, tokens: &[TokenId]) -> String {
        self.vocab().decode_tokens(tokens, self.token_unit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NBestRecord {
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub score: f64,
}

/// One JSON-lines result record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtteranceRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyp: Option<String>,
    #[serde(rename = "ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combined_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_scorer_scores: Option<ScoreBreakdown>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n_best: Vec<NBestRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl UtteranceRecord {
    fn failed(id: &str, reference: Option<String>, e: &Error) -> Self {
        Self {
            id: id.to_string(),
            hyp: None,
            reference,
            combined_score: None,
            per_scorer_scores: None,
            n_best: Vec::new(),
            error: Some(e.to_string()),
        }
    }

    fn decoded(id: &str, reference: Option<String>, res: &DecodeResult, ens: &Ensemble) -> Self {
        let best = res.best();
        Self {
            id: id.to_string(),
            hyp: best.map(|b| ens.text(&b.tokens)),
            reference,
            combined_score: best.map(|b| b.score),
            per_scorer_scores: best.map(|b| b.breakdown.clone()),
            n_best: res
                .nbest
                .iter()
                .map(|e| NBestRecord {
                    tokens: e.tokens.clone(),
                    text: ens.text(&e.tokens),
                    score: e.score,
                })
                .collect(),
            error: None,
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusResult {
    pub records: Vec<UtteranceRecord>,
    /// Over decoded utterances with a reference; `None` if there are none.
    pub report: Option<ScoringReport>,
}

impl CorpusResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.is_error()).count()
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

fn score(records: &[UtteranceRecord], unit: ScoreUnit) -> Option<ScoringReport> {
    let (refs, hyps): (Vec<&str>, Vec<&str>) = records
        .iter()
        .filter_map(|r| Some((r.reference.as_deref()?, r.hyp.as_deref()?)))
        .unzip();
    if refs.is_empty() {
        return None;
    }
    ScoringReport::compute(&refs, &hyps, unit).ok()
}

/// Decodes every entry in parallel; results keep manifest order and a
/// failing utterance does not stop the others.
pub fn decode_corpus(
    entries: &[ManifestEntry],
    ensemble: &Ensemble,
    unit: ScoreUnit,
) -> CorpusResult {
    let records: Vec<UtteranceRecord> = entries
        .par_iter()
        .map(
            |e| match read_wav(&e.audio).and_then(|a| ensemble.decode_audio(&a)) {
                Ok(res) => UtteranceRecord::decoded(&e.id, e.transcript.clone(), &res, ensemble),
                Err(err) => UtteranceRecord::failed(&e.id, e.transcript.clone(), &err),
            },
        )
        .collect();
    let report = score(&records, unit);
    CorpusResult { records, report }
}

/// Metrics of the ensemble of the first `k` members.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub models: Vec<String>,
    pub alpha: Vec<[f64; 2]>,
    pub lm_weight: f64,
    pub report: Option<ScoringReport>,
    pub failures: usize,
}

/// Decodes the corpus with every prefix ensemble. `weights_for(k)` gives
/// the weights of the first `k` members.
pub fn ablation(
    entries: &[ManifestEntry],
    ensemble: &Ensemble,
    unit: ScoreUnit,
    weights_for: impl Fn(usize) -> Result<FusionWeights> + Sync,
) -> Result<Vec<AblationRow>> {
    let m = ensemble.members.len();
    let weights = (1..=m).map(&weights_for).collect::<Result<Vec<_>>>()?;
    // one feature pass per utterance, reused by every prefix
    let per_utt: Vec<Vec<UtteranceRecord>> = entries
        .par_iter()
        .map(|e| {
            let prepared = read_wav(&e.audio).and_then(|a| ensemble.prepare(&a));
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let res = prepared
                        .as_ref()
                        .map_err(|err| Error::InvalidAudio(err.to_string()))
                        .and_then(|p| ensemble.decode_prepared(&p[..=k], w));
                    match res {
                        Ok(r) => {
                            UtteranceRecord::decoded(&e.id, e.transcript.clone(), &r, ensemble)
                        }
                        Err(err) => UtteranceRecord::failed(&e.id, e.transcript.clone(), &err),
                    }
                })
                .collect()
        })
        .collect();
    Ok(weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let records: Vec<UtteranceRecord> = per_utt.iter().map(|u| u[k].clone()).collect();
            AblationRow {
                models: ensemble.members[..=k]
                    .iter()
                    .map(|m| m.name.clone())
                    .collect(),
                alpha: w.alpha().to_vec(),
                lm_weight: w.lm_weight(),
                report: score(&records, unit),
                failures: records.iter().filter(|r| r.is_error()).count(),
            }
        })
        .collect())
}

/// Teacher-forced outcome matrix over a corpus plus per-utterance failures.
pub fn teacher_forced_outcomes(
    entries: &[ManifestEntry],
    ensemble: &Ensemble,
    ctc_weight: f64,
) -> (TokenOutcomeMatrix, Vec<(String, String)>) {
    let results: Vec<Result<(Vec<TokenId>, Vec<Vec<TokenId>>)>> = entries
        .par_iter()
        .map(|e| {
            let text = e.transcript.as_deref().ok_or_else(|| {
                Error::InvalidConfig(format!("utterance {} has no reference", e.id))
            })?;
            let reference = ensemble.vocab().encode_text(text, ensemble.token_unit)?;
            let audio = read_wav(&e.audio)?;
            let preds = ensemble.teacher_forced(&audio, &reference, ctc_weight)?;
            Ok((reference, preds))
        })
        .collect();
    let names = ensemble.members.iter().map(|m| m.name.clone()).collect();
    let mut matrix = TokenOutcomeMatrix::new(names).expect("ensemble is non-empty");
    let mut failures = Vec::new();
    for (e, r) in entries.iter().zip(results) {
        match r.and_then(|(reference, preds)| matrix.push_utterance(&e.id, &reference, &preds)) {
            Ok(()) => {}
            Err(err) => failures.push((e.id.clone(), err.to_string())),
        }
    }
    (matrix, failures)
}
