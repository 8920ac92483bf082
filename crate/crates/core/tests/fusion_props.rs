use fusebeam_core::fusion::{ensemble_beam_search, DecodeConfig, FusionWeights, ModelInput};
use fusebeam_core::scoring::{BigramAttention, CtcPosteriorGrid, Vocabulary};
use proptest::prelude::*;

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = x.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + m;
    x.iter().map(|v| v - z).collect()
}

const N: usize = 5;

fn rows(len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, N), len)
        .prop_map(|r| r.iter().map(|x| log_softmax(x)).collect())
}

fn model() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, [f64; 2])> {
    (
        rows(N),
        (1usize..8).prop_flat_map(rows),
        (0.05f64..1.0, 0.05f64..1.0),
    )
        .prop_map(|(a, g, (x, y))| (a, g, [x, y]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn model_order_does_not_matter(models in prop::collection::vec(model(), 2..=3), shift in 1usize..3) {
        let v = Vocabulary::new(["<b>", "<e>", "a", "b", "c"].map(String::from).to_vec(), 0, 1, 1).unwrap();
        let atts: Vec<BigramAttention> = models.iter().map(|m| BigramAttention { rows: m.0.clone() }).collect();
        let grids: Vec<CtcPosteriorGrid> = models.iter().map(|m| CtcPosteriorGrid::new(m.1.clone(), 0).unwrap()).collect();
        let total: f64 = models.iter().map(|m| m.2[0] + m.2[1]).sum();
        let alpha: Vec<[f64; 2]> = models.iter().map(|m| [m.2[0] / total, m.2[1] / total]).collect();
        let cfg = DecodeConfig { beam_size: 4, ..DecodeConfig::default() };
        let run = |order: &[usize]| {
            let inputs: Vec<ModelInput> = order.iter().map(|&i| ModelInput { attention: &atts[i], grid: &grids[i], speech_frames: 24 }).collect();
            let w = FusionWeights::new(order.iter().map(|&i| alpha[i]).collect(), 0.0).unwrap();
            ensemble_beam_search(&inputs, None, &v, &w, &cfg).unwrap()
        };
        let m = models.len();
        let base: Vec<usize> = (0..m).collect();
        let rotated: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
        let (a, b) = (run(&base), run(&rotated));
        prop_assert_eq!(a.nbest.len(), b.nbest.len());
        for (x, y) in a.nbest.iter().zip(&b.nbest) {
            prop_assert!((x.score - y.score).abs() < 1e-9);
        }
        let (x, y) = (a.best().unwrap(), b.best().unwrap());
        // ties within rounding could reorder; only compare a clear winner
        if a.nbest.len() < 2 || (a.nbest[0].score - a.nbest[1].score).abs() > 1e-9 {
            prop_assert_eq!(&x.tokens, &y.tokens);
        }
    }
}
