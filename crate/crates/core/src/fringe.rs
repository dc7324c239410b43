//! Peak finding on sampled curves.

/// Indices of interior samples that are strict-left, weak-right local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

/// Sub-sample offset of a peak from the parabola through three samples, in
/// units of the sample step. Lies in `[-0.5, 0.5]` for a genuine maximum.
pub fn quadratic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Refined abscissae of every interior maximum of `values` sampled on a uniform grid.
pub fn refined_maxima(xs: &[f64], values: &[f64]) -> Vec<f64> {
    if xs.len() < 3 {
        return Vec::new();
    }
    let step = xs[1] - xs[0];
    local_maxima(values)
        .into_iter()
        .map(|i| xs[i] + step * quadratic_offset(values[i - 1], values[i], values[i + 1]))
        .collect()
}

/// `(max - min) / (max + min)`.
pub fn contrast(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min == 0.0 {
        0.0
    } else {
        ((max - min) / (max + min)).clamp(0.0, 1.0)
    }
}

/// Abscissa of the global maximum on a periodic uniform grid, refined quadratically.
pub fn periodic_peak(xs: &[f64], values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 3 || xs.len() != n {
        return None;
    }
    let (i, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let left = values[(i + n - 1) % n];
    let right = values[(i + 1) % n];
    Some(xs[i] + (xs[1] - xs[0]) * quadratic_offset(left, values[i], right))
}

/// First Fourier component of samples taken at `2 pi k / n`, `k = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic {
    pub mean: f64,
    /// Half peak-to-peak swing of the fitted sinusoid.
    pub amplitude: f64,
    /// Phase of the sinusoid's maximum.
    pub peak: f64,
    /// Largest sample deviation from `mean + amplitude cos(x - peak)`.
    pub residual: f64,
}

/// Fit `mean + amplitude cos(x - peak)` to a full uniform period. Exact for
/// any `n >= 3` when the samples are a degree-one trigonometric polynomial.
pub fn first_harmonic(values: &[f64]) -> Option<Harmonic> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let x = |k: usize| std::f64::consts::TAU * k as f64 / n as f64;
    let mean = values.iter().sum::<f64>() / n as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        re += v * x(k).cos();
        im += v * x(k).sin();
    }
    let (re, im) = (2.0 * re / n as f64, 2.0 * im / n as f64);
    let amplitude = re.hypot(im);
    let peak = im.atan2(re);
    let residual = values
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mean - amplitude * (x(k) - peak).cos()).abs())
        .fold(0.0, f64::max);
    Some(Harmonic { mean, amplitude, peak, residual })
}
