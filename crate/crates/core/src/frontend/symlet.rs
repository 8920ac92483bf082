//! Symlet wavelet-packet subband energies with Shannon-entropy best basis.

use serde::{Deserialize, Serialize};

use super::framing::frame_signal;
use super::{AudioBuffer, FeatureMatrix, FrameConfig, Frontend};
use crate::error::{Error, Result};
use crate::math::floored_ln;

// Decomposition low-pass filters of the least-asymmetric Daubechies family.
const SYM_DEC_LO: [&[f64]; 9] = [
    &[
        -0.12940952255092145,
        0.22414386804185735,
        0.836516303737469,
        0.48296291314469025,
    ],
    &[
        0.035226291882100656,
        -0.08544127388224149,
        -0.13501102001039084,
        0.4598775021193313,
        0.8068915093133388,
        0.3326705529509569,
    ],
    &[
        -0.07576571478927333,
        -0.02963552764599851,
        0.49761866763201545,
        0.8037387518059161,
        0.29785779560527736,
        -0.09921954357684722,
        -0.012603967262037833,
        0.0322231006040427,
    ],
    &[
        0.027333068345077982,
        0.029519490925774643,
        -0.039134249302383094,
        0.1993975339773936,
        0.7234076904024206,
        0.6339789634582119,
        0.01660210576452232,
        -0.17532808990845047,
        -0.021101834024758855,
        0.019538882735286728,
    ],
    &[
        0.015404109327027373,
        0.0034907120842174702,
        -0.11799011114819057,
        -0.048311742585633,
        0.4910559419267466,
        0.787641141030194,
        0.3379294217276218,
        -0.07263752278646252,
        -0.021060292512300564,
        0.04472490177066578,
        0.0017677118642428036,
        -0.007800708325034148,
    ],
    &[
        0.002681814568257878,
        -0.0010473848886829163,
        -0.01263630340325193,
        0.03051551316596357,
        0.0678926935013727,
        -0.049552834937127255,
        0.017441255086855827,
        0.5361019170917628,
        0.767764317003164,
        0.2886296317515146,
        -0.14004724044296152,
        -0.10780823770381774,
        0.004010244871533663,
        0.010268176708511255,
    ],
    &[
        -0.0033824159510061256,
        -0.0005421323317911481,
        0.03169508781149298,
        0.007607487324917605,
        -0.1432942383508097,
        -0.061273359067658524,
        0.4813596512583722,
        0.7771857517005235,
        0.3644418948353314,
        -0.05194583810770904,
        -0.027219029917056003,
        0.049137179673607506,
        0.003808752013890615,
        -0.01495225833704823,
        -0.0003029205147213668,
        0.0018899503327594609,
    ],
    &[
        0.0014009155259146807,
        0.0006197808889855868,
        -0.013271967781817119,
        -0.01152821020767923,
        0.03022487885827568,
        0.0005834627461258068,
        -0.05456895843083407,
        0.238760914607303,
        0.717897082764412,
        0.6173384491409358,
        0.035272488035271894,
        -0.19155083129728512,
        -0.018233770779395985,
        0.06207778930288603,
        0.008859267493400484,
        -0.010264064027633142,
        -0.0004731544986800831,
        0.0010694900329086053,
    ],
    &[
        0.0007701598091144901,
        9.563267072289475e-05,
        -0.008641299277022422,
        -0.0014653825813050513,
        0.0459272392310922,
        0.011609893903711381,
        -0.15949427888491757,
        -0.07088053578324385,
        0.47169066693843925,
        0.7695100370211071,
        0.38382676106708546,
        -0.03553674047381755,
        -0.0319900568824278,
        0.04999497207737669,
        0.005764912033581909,
        -0.02035493981231129,
        -0.0008043589320165449,
        0.004593173585311828,
        5.7036083618494284e-05,
        -0.0004593294210046588,
    ],
];

/// Orthogonal two-channel filter pair used as correlation filters over a
/// periodic signal.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletFilter {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

/// Symlet of the given order (2..=10).
pub fn symlet_filter(order: usize) -> Result<WaveletFilter> {
    let dec_lo = order
        .checked_sub(2)
        .and_then(|i| SYM_DEC_LO.get(i))
        .ok_or_else(|| Error::InvalidConfig(format!("symlet order {order} not in 2..=10")))?;
    let lowpass: Vec<f64> = dec_lo.iter().rev().copied().collect();
    let len = lowpass.len();
    let highpass = (0..len)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * lowpass[len - 1 - k]
        })
        .collect();
    Ok(WaveletFilter { lowpass, highpass })
}

impl WaveletFilter {
    /// One periodized analysis step. `x.len()` must be even.
    pub fn analyze(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let half = n / 2;
        let mut approx = vec![0.0; half];
        let mut detail = vec![0.0; half];
        for i in 0..half {
            for (k, (h, g)) in self.lowpass.iter().zip(&self.highpass).enumerate() {
                let v = x[(2 * i + k) % n];
                approx[i] += h * v;
                detail[i] += g * v;
            }
        }
        (approx, detail)
    }

    /// Inverse of [`WaveletFilter::analyze`].
    pub fn synthesize(&self, approx: &[f64], detail: &[f64]) -> Vec<f64> {
        let n = approx.len() * 2;
        let mut out = vec![0.0; n];
        for i in 0..approx.len() {
            for (k, (h, g)) in self.lowpass.iter().zip(&self.highpass).enumerate() {
                out[(2 * i + k) % n] += h * approx[i] + g * detail[i];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymletParams {
    pub wavelet_order: usize,
    pub depth: usize,
}

impl Default for SymletParams {
    fn default() -> Self {
        Self {
            wavelet_order: 8,
            depth: 6,
        }
    }
}

/// A node of the packet tree: `index` counts nodes left to right at `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PacketNode {
    pub level: usize,
    pub index: usize,
}

/// Coefficients of every node, level by level; `tree[l]` holds `2^l` nodes.
fn packet_tree(filter: &WaveletFilter, signal: &[f64], depth: usize) -> Vec<Vec<Vec<f64>>> {
    let mut tree = vec![vec![signal.to_vec()]];
    for _ in 0..depth {
        let next = tree
            .last()
            .unwrap()
            .iter()
            .flat_map(|node| {
                let (a, d) = filter.analyze(node);
                [a, d]
            })
            .collect();
        tree.push(next);
    }
    tree
}

fn padded(frame: &[f64], depth: usize) -> Result<Vec<f64>> {
    let block = 1usize << depth;
    if frame.len() < block {
        return Err(Error::InvalidConfig(format!(
            "frame of {} samples is too short for depth {depth}",
            frame.len()
        )));
    }
    let mut out = frame.to_vec();
    out.resize(frame.len().div_ceil(block) * block, 0.0);
    Ok(out)
}

/// Energies of the `2^depth` terminal subbands in natural (tree) order.
pub fn wavelet_packet_energies(
    filter: &WaveletFilter,
    frame: &[f64],
    depth: usize,
) -> Result<Vec<f64>> {
    let signal = padded(frame, depth)?;
    let tree = packet_tree(filter, &signal, depth);
    Ok(tree[depth]
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect())
}

fn shannon_cost(coeffs: &[f64], total_energy: f64) -> f64 {
    if total_energy <= 0.0 {
        return 0.0;
    }
    coeffs
        .iter()
        .map(|c| {
            let p = c * c / total_energy;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// Shannon-entropy best basis of the full packet tree (Coifman-Wickerhauser
/// bottom-up pruning). Leaves are returned left to right.
pub fn best_basis(filter: &WaveletFilter, frame: &[f64], depth: usize) -> Result<Vec<PacketNode>> {
    let signal = padded(frame, depth)?;
    let energy: f64 = signal.iter().map(|v| v * v).sum();
    let tree = packet_tree(filter, &signal, depth);
    let mut best: Vec<(f64, Vec<PacketNode>)> = tree[depth]
        .iter()
        .enumerate()
        .map(|(index, c)| {
            (
                shannon_cost(c, energy),
                vec![PacketNode {
                    level: depth,
                    index,
                }],
            )
        })
        .collect();
    for level in (0..depth).rev() {
        best = tree[level]
            .iter()
            .enumerate()
            .map(|(index, c)| {
                let own = shannon_cost(c, energy);
                let (left, right) = (&best[2 * index], &best[2 * index + 1]);
                let split = left.0 + right.0;
                if own <= split {
                    (own, vec![PacketNode { level, index }])
                } else {
                    let mut nodes = left.1.clone();
                    nodes.extend_from_slice(&right.1);
                    (split, nodes)
                }
            })
            .collect();
    }
    Ok(best.pop().map(|(_, nodes)| nodes).unwrap_or_default())
}

/// Log subband energies of the full packet tree per frame, plus each frame's
/// best-basis leaves.
pub fn symlet_features(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
    params: &SymletParams,
) -> Result<(FeatureMatrix, Vec<Vec<PacketNode>>)> {
    let filter = symlet_filter(params.wavelet_order)?;
    if params.depth == 0 {
        return Err(Error::InvalidConfig("symlet depth must be >= 1".into()));
    }
    let frames = frame_signal(audio, cfg)?;
    let mut rows = Vec::with_capacity(frames.len());
    let mut bases = Vec::with_capacity(frames.len());
    for frame in &frames.frames {
        let energies = wavelet_packet_energies(&filter, frame, params.depth)?;
        rows.push(energies.into_iter().map(floored_ln).collect());
        bases.push(best_basis(&filter, frame, params.depth)?);
    }
    let features = FeatureMatrix::from_rows(rows, Frontend::Symlet, *cfg, audio.sample_rate())?;
    Ok((features, bases))
}
