//! Small fitting helpers for time series produced by the simulator.

/// Result of a log-linear least-squares fit v(t) ~ amplitude * exp(-rate t).
#[derive(Debug, Clone, Copy)]
pub struct ExpFit {
    pub rate: f64,
    pub amplitude: f64,
    pub samples_used: usize,
}

/// Fits ln v against t over the samples with v > floor.
///
/// A series that never rises above the floor carries no rate information and
/// is reported as instantaneous decay: rate +inf, amplitude 0. Same for a
/// single usable sample.
pub fn fit_exponential_decay(series: &[(f64, f64)], floor: f64) -> ExpFit {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, v)| *v > floor && v.is_finite())
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return ExpFit { rate: f64::INFINITY, amplitude: 0.0, samples_used: pts.len() };
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in &pts {
        num += (t - t_mean) * (y - y_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den == 0.0 {
        return ExpFit { rate: f64::INFINITY, amplitude: 0.0, samples_used: pts.len() };
    }
    let slope = num / den;
    ExpFit {
        rate: -slope,
        amplitude: (y_mean - slope * t_mean).exp(),
        samples_used: pts.len(),
    }
}

/// Maximum value over the trailing `fraction` of the series (at least one
/// sample). Used as the empirical stand-in for a limit superior.
pub fn tail_max(values: &[f64], fraction: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let keep = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    values[values.len() - keep..]
        .iter()
        .fold(f64::NEG_INFINITY, |a, &v| a.max(v))
}
