//! Log-domain helpers shared by the scorers and the decoder.

/// Stand-in for `-inf` so that log-domain arithmetic stays total.
pub const NEG_INF: f64 = -1e30;

/// Floor applied before every logarithm of an energy or magnitude.
pub const LOG_FLOOR: f64 = 1e-10;

/// True when `x` carries the impossible-event sentinel (or anything below it).
pub fn is_impossible(x: f64) -> bool {
    x <= NEG_INF * 0.5
}

/// `log(exp(a) + exp(b))`, saturating at [`NEG_INF`].
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if is_impossible(hi) {
        return NEG_INF;
    }
    if is_impossible(lo) {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || is_impossible(max) {
        return NEG_INF;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Numerically stable log-softmax. Outputs are clamped to [`NEG_INF`].
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&x| (x - lse).max(NEG_INF)).collect()
}

/// Natural log with the energy floor applied.
pub fn floored_ln(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}
