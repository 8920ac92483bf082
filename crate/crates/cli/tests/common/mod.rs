#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fusebeam_core::scoring::{ToyModel, Vocabulary};
use fusebeam_core::tensor::{ParameterSet, Tensor};

pub const SR: u32 = 16_000;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fusebeam"));
    c.env_remove("FUSEBEAM_JOBS");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Sum of sines, 16-bit mono.
pub fn write_wav(path: &Path, freqs: &[f64], secs: f64) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SR,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    let n = (secs * SR as f64) as usize;
    for i in 0..n {
        let t = i as f64 / SR as f64;
        let v: f64 = freqs
            .iter()
            .map(|f| (2.0 * std::f64::consts::PI * f * t).sin())
            .sum::<f64>()
            / freqs.len().max(1) as f64;
        w.write_sample((0.5 * v * 32767.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

pub fn vocab() -> Vocabulary {
    let t = ["<blank>", "<sos/eos>", "a", "b", "c", "d", "<space>"]
        .map(String::from)
        .to_vec();
    Vocabulary::new(t, 0, 1, 1).unwrap()
}

pub fn random_model(input_dim: usize, seed: u64) -> ToyModel {
    ToyModel::random(vocab(), input_dim, 4, 4, 0.3, seed).unwrap()
}

/// Ignores its input and spells `text` (characters) whatever the audio.
/// Contexts outside the script lean towards `fallback`.
pub fn scripted_model(input_dim: usize, text: &str, fallback: char) -> ToyModel {
    let v = vocab();
    let n = v.len();
    let ids = v
        .encode_text(text, fusebeam_core::scoring::TokenUnit::Char)
        .unwrap();
    let mut p = ParameterSet::new();
    p.insert("encoder".into(), Tensor::zeros(vec![input_dim, n]));
    let mut enc_bias = vec![0.0; n];
    enc_bias[0] = 2.0;
    p.insert("encoder_bias".into(), Tensor::vector(enc_bias));
    let mut emb = vec![0.0; n * n];
    for i in 0..n {
        emb[i * n + i] = 1.0;
    }
    p.insert("embedding".into(), Tensor::matrix(n, n, emb).unwrap());
    p.insert("context".into(), Tensor::zeros(vec![n, n]));
    let mut out = vec![0.0; 2 * n * n];
    let mut prev = v.sos();
    for &t in ids.iter().chain(std::iter::once(&v.eos())) {
        out[prev * n + t] = 20.0;
        prev = t;
    }
    p.insert("output".into(), Tensor::matrix(2 * n, n, out).unwrap());
    let mut bias = vec![0.0; n];
    bias[v.id(&fallback.to_string()).unwrap()] = 5.0;
    p.insert("bias".into(), Tensor::vector(bias));
    ToyModel::from_parts(v, p, 4).unwrap()
}

/// Small-dimension frontend parameters keep tests fast.
pub fn small_params() -> serde_json::Value {
    serde_json::json!({
        "mel": {"kind": "mel_triangular", "num_filters": 12, "f_min": 20.0, "f_max": null},
        "gammatone": {"kind": "gammatone_erb", "order": 4, "num_filters": 12, "f_min": 50.0, "f_max": null},
        "cqt": {"kind": "cqt_log", "bins_per_octave": 4, "num_filters": 12, "f_min": 100.0, "f_max": null},
        "modgd": {"gamma": 0.9, "alpha": 0.4, "lifter_len": 8, "num_coeffs": 12},
        "symlet": {"wavelet_order": 4, "depth": 3},
        "num_ceps": 12
    })
}

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
}

/// `n` short tones with transcripts drawn from a fixed list.
pub fn corpus(n: usize) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let refs = ["ab", "ba", "cab", "dd", "a b", "cd"];
    let mut text = String::new();
    for i in 0..n {
        let wav = format!("u{i}.wav");
        write_wav(
            &dir.path().join(&wav),
            &[220.0 * (i + 1) as f64, 330.0],
            0.5,
        );
        text += &format!("u{i}\t{wav}\t{}\n", refs[i % refs.len()]);
    }
    let manifest = dir.path().join("manifest.tsv");
    std::fs::write(&manifest, text).unwrap();
    Corpus { dir, manifest }
}

/// Writes models and a run config; returns the config path.
pub fn write_config(
    dir: &Path,
    models: &[(&str, &str, &ToyModel)],
    extra: serde_json::Value,
) -> PathBuf {
    let mut specs = Vec::new();
    for (name, frontend, model) in models {
        let path = dir.join(format!("{name}.toym1.json"));
        model.save(&path).unwrap();
        specs.push(serde_json::json!({
            "name": name,
            "path": path,
            "frontend": frontend,
            "frontend_params": small_params(),
        }));
    }
    let mut cfg = serde_json::json!({
        "manifest": dir.join("manifest.tsv"),
        "models": specs,
    });
    if let serde_json::Value::Object(extra) = extra {
        for (k, v) in extra {
            cfg[k] = v;
        }
    }
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Feature dimension of each frontend under `small_params`.
pub fn dim(frontend: &str) -> usize {
    match frontend {
        "SYMLET" => 8,
        _ => 12,
    }
}

pub fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}
