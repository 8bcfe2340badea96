/// Histogram range over `|θ|`.
pub const HIST_MIN: f64 = 1e-8;
pub const HIST_MAX: f64 = 10.0;
/// Log-spaced bins between [`HIST_MIN`] and [`HIST_MAX`]; the histogram also carries an
/// underflow bin in front and an overflow bin at the end.
pub const HIST_BINS: usize = 64;

/// Fraction of coordinates with `|θ_i| < threshold` across the given tensors.
pub fn prune_sparsity(tensors: &[&[f64]], threshold: f64) -> f64 {
    let total: usize = tensors.iter().map(|t| t.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let below = tensors
        .iter()
        .flat_map(|t| t.iter())
        .filter(|x| x.abs() < threshold)
        .count();
    below as f64 / total as f64
}

/// `HIST_BINS + 1` edges from [`HIST_MIN`] to [`HIST_MAX`].
pub fn histogram_edges() -> Vec<f64> {
    let decades = (HIST_MAX / HIST_MIN).log10();
    (0..=HIST_BINS)
        .map(|i| HIST_MIN * 10f64.powf(decades * i as f64 / HIST_BINS as f64))
        .collect()
}

/// Counts of `|θ|` values: `[underflow, bins..., overflow]`, `HIST_BINS + 2` entries.
pub fn histogram(magnitudes: impl Iterator<Item = f64>) -> Vec<u64> {
    let decades = (HIST_MAX / HIST_MIN).log10();
    let mut counts = vec![0u64; HIST_BINS + 2];
    for a in magnitudes {
        let a = a.abs();
        let slot = if a.is_nan() || a >= HIST_MAX {
            HIST_BINS + 1
        } else if a < HIST_MIN {
            0
        } else {
            let pos = (a / HIST_MIN).log10() / decades * HIST_BINS as f64;
            1 + (pos as usize).min(HIST_BINS - 1)
        };
        counts[slot] += 1;
    }
    counts
}
