#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::fusion::{ensemble_beam_search, DecodeConfig, FusionWeights, ModelInput};
use fusebeam_core::scoring::{BigramAttention, CtcPosteriorGrid, Vocabulary};

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = x.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + m;
    x.iter().map(|v| v - z).collect()
}

// header: vocab size, model count, frames, beam; then logits as bytes
fuzz_target!(|data: &[u8]| {
    if data.len() < 5 {
        return;
    }
    let n = 3 + data[0] as usize % 6;
    let m = 1 + data[1] as usize % 2;
    let t = 1 + data[2] as usize % 12;
    let beam = 1 + data[3] as usize % 6;
    let mut bytes = data[4..].iter().cycle().map(|&b| b as f64 / 32.0 - 4.0);
    let mut row = || log_softmax(&(0..n).map(|_| bytes.next().unwrap()).collect::<Vec<_>>());
    let mut atts = Vec::new();
    let mut grids = Vec::new();
    for _ in 0..m {
        atts.push(BigramAttention { rows: (0..n).map(|_| row()).collect() });
        grids.push(CtcPosteriorGrid::new((0..t).map(|_| row()).collect(), 0).unwrap());
    }
    let mut tokens = vec!["<blank>".to_string(), "<eos>".to_string()];
    tokens.extend((2..n).map(|i| format!("t{i}")));
    let vocab = Vocabulary::new(tokens, 0, 1, 1).unwrap();
    let inputs: Vec<ModelInput> = (0..m)
        .map(|i| ModelInput { attention: &atts[i], grid: &grids[i], speech_frames: 4 * t })
        .collect();
    let w = FusionWeights::uniform(m, 0.0).unwrap();
    let res = ensemble_beam_search(&inputs, None, &vocab, &w, &DecodeConfig::with_beam(beam)).unwrap();
    assert!(!res.nbest.is_empty());
    assert!(res.nbest.windows(2).all(|p| p[0].score >= p[1].score));
    assert!(res.nbest.iter().all(|h| h.tokens.len() <= res.maxlen));
});
