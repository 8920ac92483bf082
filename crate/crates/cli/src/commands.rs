use std::collections::HashMap;
use std::path::{Path, PathBuf};

use fusebeam_core::config::{from_json_with_path, parse_score_file, Manifest, RunConfig};
use fusebeam_core::diversity::{
    difficulty_measure, gain_csv, incremental_gain, oracle_error_floor,
};
use fusebeam_core::frontend::{
    apply_normalization, encode_feat1, extract, fit_global_normalization, read_wav, spec_mask,
    FeatureMatrix, FrontendParams, MaskSpec, NormalizationStats,
};
use fusebeam_core::fusion::FusionWeights;
use fusebeam_core::metrics::ScoringReport;
use fusebeam_core::pipeline::{
    ablation as run_ablation, decode_corpus, teacher_forced_outcomes, Ensemble,
};
use fusebeam_core::{Error, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::output::{create_dir, json_pretty, write_atomic};
use crate::{DiversityArgs, FeaturesArgs, RunArgs, ScoreArgs};

pub fn parse_mask(s: &str) -> std::result::Result<MaskSpec, String> {
    let (c, w) = s
        .split_once('x')
        .ok_or_else(|| format!("{s:?}: expected COUNTxWIDTH"))?;
    let num = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| format!("{s:?}: expected COUNTxWIDTH"))
    };
    Ok(MaskSpec {
        count: num(c)?,
        width: num(w)?,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidConfig(_) => e,
        other => Error::InvalidConfig(other.to_string()),
    }
}

/// Utterance ids become file names, so they must not leave the directory.
fn safe_stem(id: &str) -> Result<&str> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
        return Err(Error::InvalidConfig(format!(
            "utterance id {id:?} is not usable as a file name"
        )));
    }
    Ok(id)
}

fn report_failures<'a>(failures: impl IntoIterator<Item = (&'a str, &'a str)>) -> usize {
    let mut n = 0;
    for (id, e) in failures {
        eprintln!("{id}: {e}");
        n += 1;
    }
    n
}

pub fn features(a: &FeaturesArgs) -> Result<usize> {
    let manifest = Manifest::load(&a.manifest).map_err(config_error)?;
    let params: FrontendParams = match &a.params {
        Some(p) => from_json_with_path(&read_text(p)?)?,
        None => FrontendParams::default(),
    };
    let stats = match &a.normalize {
        Some(p) => Some(NormalizationStats::from_json(&read_text(p)?).map_err(config_error)?),
        None => None,
    };
    create_dir(&a.out_dir)?;

    let extracted: Vec<Result<(FeatureMatrix, FeatureMatrix)>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(k, e)| {
            safe_stem(&e.id)?;
            let raw = extract(a.frontend, &read_wav(&e.audio)?, &params)?;
            let mut out = match &stats {
                Some(s) => apply_normalization(&raw, s)?,
                None => raw.clone(),
            };
            if a.mask_time.is_some() || a.mask_freq.is_some() {
                let seed = a.seed.wrapping_add(k as u64);
                out = spec_mask(
                    &out,
                    seed,
                    a.mask_time.unwrap_or_default(),
                    a.mask_freq.unwrap_or_default(),
                )?;
            }
            Ok((raw, out))
        })
        .collect();

    let mut failures = Vec::new();
    let mut raws = Vec::new();
    for (e, r) in manifest.entries.iter().zip(extracted) {
        match r {
            Ok((raw, out)) => {
                write_atomic(
                    &a.out_dir.join(format!("{}.feat", e.id)),
                    &encode_feat1(&out),
                )?;
                raws.push(raw);
            }
            Err(err) => failures.push((e.id.as_str(), err.to_string())),
        }
    }
    if let Some(p) = &a.stats_out {
        if !raws.is_empty() {
            write_atomic(p, fit_global_normalization(&raws)?.to_json().as_bytes())?;
        }
    }
    let echo = json!({
        "manifest": a.manifest,
        "frontend": a.frontend,
        "params": params,
        "normalize": a.normalize,
        "stats_out": a.stats_out,
        "mask_time": a.mask_time,
        "mask_freq": a.mask_freq,
        "seed": a.seed,
    });
    write_atomic(&a.out_dir.join("features_config.json"), &json_pretty(&echo))?;
    eprintln!(
        "fusebeam features: {} of {} utterances written",
        raws.len(),
        manifest.len()
    );
    Ok(report_failures(
        failures.iter().map(|(i, e)| (*i, e.as_str())),
    ))
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &a.manifest {
        cfg.manifest = Some(v.clone());
    }
    if let Some(v) = &a.output_dir {
        cfg.output_dir = Some(v.clone());
    }
    if let Some(v) = &a.alpha {
        cfg.alpha = v.clone();
    }
    if let Some(v) = a.lm_weight {
        cfg.lm_weight = v;
    }
    if let Some(v) = &a.lm {
        cfg.lm = Some(v.clone());
    }
    if let Some(v) = a.beam_size {
        cfg.beam_size = v;
    }
    if let Some(v) = a.pre_beam_size {
        cfg.pre_beam_size = Some(v);
    }
    if let Some(v) = a.maxlen_ratio {
        cfg.maxlen_ratio = v;
    }
    if let Some(v) = a.subsample_factor {
        cfg.subsample_factor = v;
    }
    if let Some(v) = a.minlen {
        cfg.minlen = v;
    }
    if let Some(v) = a.nbest {
        cfg.nbest = Some(v);
    }
    if let Some(v) = a.score_unit {
        cfg.score_unit = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Prepared {
    cfg: RunConfig,
    manifest: Manifest,
    ensemble: Ensemble,
    out_dir: PathBuf,
}

fn prepare(cfg: RunConfig, command: &str) -> Result<Prepared> {
    let manifest_path = cfg
        .manifest
        .clone()
        .ok_or_else(|| Error::InvalidConfig("manifest: required".into()))?;
    let out_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Error::InvalidConfig("output_dir: required".into()))?;
    let manifest = Manifest::load(&manifest_path).map_err(config_error)?;
    let ensemble = Ensemble::from_config(&cfg).map_err(config_error)?;
    let resolved = cfg.resolved()?;
    eprintln!(
        "fusebeam {command}: {}",
        serde_json::to_string(&resolved).expect("config serializes")
    );
    create_dir(&out_dir)?;
    write_atomic(
        &out_dir.join("resolved_config.json"),
        &json_pretty(&resolved),
    )?;
    Ok(Prepared {
        cfg,
        manifest,
        ensemble,
        out_dir,
    })
}

pub fn decode(a: &RunArgs) -> Result<usize> {
    let p = prepare(run_config(a)?, "decode")?;
    let result = decode_corpus(&p.manifest.entries, &p.ensemble, p.cfg.score_unit);
    write_atomic(
        &p.out_dir.join("results.jsonl"),
        result.to_jsonl().as_bytes(),
    )?;
    if let Some(r) = &result.report {
        write_atomic(&p.out_dir.join("report.json"), &json_pretty(r))?;
        write_atomic(&p.out_dir.join("report.txt"), r.summary().as_bytes())?;
        print!("{}", r.summary());
    }
    Ok(report_failures(result.records.iter().filter_map(|r| {
        Some((r.id.as_str(), r.error.as_deref()?))
    })))
}

pub fn ablation(a: &RunArgs) -> Result<usize> {
    let cfg = run_config(a)?;
    if cfg.models.len() < 2 {
        return Err(Error::InvalidConfig(
            "models: ablation needs at least two models".into(),
        ));
    }
    let p = prepare(cfg, "ablation")?;
    let weights_for = |k: usize| FusionWeights::uniform(k, p.cfg.resolved_lm_weight(k)?);
    let rows = run_ablation(
        &p.manifest.entries,
        &p.ensemble,
        p.cfg.score_unit,
        weights_for,
    )?;

    let mut csv = String::from("k,models,wer,cer,S,D,I,N,failures\n");
    for (k, r) in rows.iter().enumerate() {
        let (wer, cer, s, d, i, n) = match &r.report {
            Some(x) => (
                format!("{:.2}", x.wer),
                format!("{:.2}", x.cer),
                x.s,
                x.d,
                x.i,
                x.n,
            ),
            None => (String::new(), String::new(), 0, 0, 0, 0),
        };
        csv += &format!(
            "{},{},{wer},{cer},{s},{d},{i},{n},{}\n",
            k + 1,
            r.models.join("+"),
            r.failures
        );
    }
    write_atomic(&p.out_dir.join("ablation.csv"), csv.as_bytes())?;
    write_atomic(&p.out_dir.join("ablation.json"), &json_pretty(&rows))?;
    print!("{csv}");
    Ok(rows.iter().map(|r| r.failures).max().unwrap_or(0))
}

pub fn diversity(a: &DiversityArgs) -> Result<usize> {
    let mut cfg = run_config(&a.run)?;
    if let Some(order) = &a.model_order {
        cfg.model_order = Some(order.clone());
    }
    if let Some(w) = a.ctc_weight {
        cfg.teacher_forcing_ctc_weight = w;
    }
    cfg.validate()?;
    let order = cfg.model_order();
    let p = prepare(cfg, "diversity")?;
    let (matrix, failures) = teacher_forced_outcomes(
        &p.manifest.entries,
        &p.ensemble,
        p.cfg.teacher_forcing_ctc_weight,
    );
    // checked before any report is written
    if !matrix.rows.is_empty() {
        incremental_gain(&matrix, &order).map_err(config_error)?;
    }
    write_atomic(
        &p.out_dir.join("outcomes.csv"),
        matrix.to_csv_string().as_bytes(),
    )?;
    if !matrix.rows.is_empty() {
        let hist = difficulty_measure(&matrix)?;
        let gains = incremental_gain(&matrix, &order)?;
        let floor = oracle_error_floor(&matrix)?;
        write_atomic(
            &p.out_dir.join("difficulty.csv"),
            hist.to_csv_string().as_bytes(),
        )?;
        let gain_table = gain_csv(&matrix, &order)?;
        write_atomic(&p.out_dir.join("gains.csv"), gain_table.as_bytes())?;
        let summary = json!({
            "models": matrix.models,
            "tokens": matrix.rows.len(),
            "accuracies": matrix.accuracies()?,
            "difficulty": hist.buckets,
            "model_order": order,
            "gains": gains,
            "oracle_error_floor": floor,
        });
        write_atomic(&p.out_dir.join("diversity.json"), &json_pretty(&summary))?;
        println!("{gain_table}oracle error floor {:.1}%", 100.0 * floor);
    }
    Ok(report_failures(
        failures.iter().map(|(i, e)| (i.as_str(), e.as_str())),
    ))
}

pub fn score(a: &ScoreArgs) -> Result<usize> {
    let refs = parse_score_file(&read_text(&a.reference)?).map_err(config_error)?;
    let hyps = parse_score_file(&read_text(&a.hyp)?).map_err(config_error)?;
    let mut by_id: HashMap<&str, &str> =
        hyps.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
    let mut ordered = Vec::with_capacity(refs.len());
    for (id, _) in &refs {
        let h = by_id
            .remove(id.as_str())
            .ok_or_else(|| Error::InvalidConfig(format!("hypothesis missing for id {id:?}")))?;
        ordered.push(h);
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::InvalidConfig(format!(
            "hypothesis id {extra:?} has no reference"
        )));
    }
    let texts: Vec<&str> = refs.iter().map(|(_, t)| t.as_str()).collect();
    let report = ScoringReport::compute(&texts, &ordered, a.unit)?;
    if let Some(p) = &a.output {
        write_atomic(p, &json_pretty(&report))?;
    }
    print!("{}", report.summary());
    Ok(0)
}
