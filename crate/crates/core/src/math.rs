//! Small numerical helpers shared by the discrete and continuous solvers.

/// `log(sum(exp(x)))`, stable for large magnitudes. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalises log-weights into probabilities. `None` when all weights are
/// `-inf` (nothing to normalise). Shifting by the maximum and dividing by the
/// sum keeps ties exactly equal.
pub fn softmax(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / sum).collect())
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF draw from a sparse distribution given a uniform `u` in [0, 1).
/// Falls back to the last supported entry if rounding leaves `u` uncovered.
pub fn sample_sparse(row: &[(usize, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    for &(j, p) in row {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|&(j, _)| j)
        .expect("sampling from an empty distribution")
}
