use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DspError;

/// Analysis window shape. All shapes are the symmetric (`n - 1` denominator) variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
    Hamming,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Result<Vec<f64>, DspError> {
        if n < 2 {
            return Err(DspError::InvalidLength(n));
        }
        let denom = (n - 1) as f64;
        let w = (0..n).map(|k| {
            let c = (2.0 * PI * k as f64 / denom).cos();
            match self {
                Window::Rect => 1.0,
                Window::Hann => 0.5 - 0.5 * c,
                Window::Hamming => 0.54 - 0.46 * c,
            }
        });
        Ok(w.collect())
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rect => "rect",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
        })
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rect),
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            other => Err(format!("unknown window '{other}'")),
        }
    }
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2πk/(n-1))`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>, DspError> {
    Window::Hamming.coefficients(n)
}
