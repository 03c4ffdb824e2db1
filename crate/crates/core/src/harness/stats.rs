use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trailing moving average. Point `i` averages `series[i + 1 - w ..= i]`,
/// or the whole prefix while fewer than `w` points exist.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        // Recomputing the window sum every so often keeps the running sum
        // from drifting on long series.
        if i >= window && i % 4096 == 0 {
            sum = series[i + 1 - window..=i].iter().sum();
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 when `n = 1`.
    pub std: f64,
    /// `std / √n`.
    pub stderr: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Summary {
        n,
        mean,
        std,
        stderr: std / (n as f64).sqrt(),
    })
}
