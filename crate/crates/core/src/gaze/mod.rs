//! Conditioning of raw webcam gaze traces: trailing moving average, then
//! uniform resampling with linear interpolation.

mod io;

pub use io::{read_trace, write_trace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SMOOTH_WINDOW: usize = 50;
pub const DEFAULT_RATE_HZ: f64 = 20.0;

/// One gaze estimate in screen pixels, `t` in milliseconds since session start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl GazeSample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        GazeSample { t, x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeTrace {
    pub session_id: String,
    pub samples: Vec<GazeSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
}

impl GazeTrace {
    pub fn new(session_id: impl Into<String>, samples: Vec<GazeSample>) -> Result<Self> {
        let trace = GazeTrace { session_id: session_id.into(), samples, rate_hz: None };
        trace.validate()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_t(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn last_t(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() || s.t < 0.0 {
                return Err(Error::Trace(format!("sample {i}: timestamp {} must be finite and >= 0", s.t)));
            }
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::Trace(format!("sample {i}: coordinates must be finite")));
            }
            if i > 0 && s.t <= self.samples[i - 1].t {
                return Err(Error::Trace(format!(
                    "sample {i}: timestamp {} not after {}",
                    s.t,
                    self.samples[i - 1].t
                )));
            }
        }
        if let Some(rate) = self.rate_hz {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::Trace(format!("declared rate {rate} must be positive")));
            }
            let step = 1000.0 / rate;
            for w in self.samples.windows(2) {
                if ((w[1].t - w[0].t) - step).abs() > 1e-6 {
                    return Err(Error::Trace(format!(
                        "gap {} ms at t={} does not match declared rate {rate} Hz",
                        w[1].t - w[0].t,
                        w[0].t
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Trailing moving average: sample `i` becomes the mean of samples
/// `max(0, i - window + 1) ..= i`. Timestamps are kept; the declared rate is
/// cleared.
pub fn smooth(trace: &GazeTrace, window: usize) -> Result<GazeTrace> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be >= 1".into()));
    }
    if trace.is_empty() {
        return Err(Error::Trace("cannot smooth an empty trace".into()));
    }
    let mut out = Vec::with_capacity(trace.len());
    let (mut sum_x, mut sum_y) = (0.0, 0.0);
    for (i, s) in trace.samples.iter().enumerate() {
        sum_x += s.x;
        sum_y += s.y;
        if i >= window {
            let old = &trace.samples[i - window];
            sum_x -= old.x;
            sum_y -= old.y;
        }
        let n = (i + 1).min(window) as f64;
        out.push(GazeSample::new(s.t, sum_x / n, sum_y / n));
    }
    Ok(GazeTrace { session_id: trace.session_id.clone(), samples: out, rate_hz: None })
}

/// Resamples onto the grid `t_first + k * 1000 / rate_hz` up to the last raw
/// sample, linearly interpolating between the bracketing raw samples.
pub fn resample(trace: &GazeTrace, rate_hz: f64) -> Result<GazeTrace> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("rate {rate_hz} Hz must be positive")));
    }
    if trace.len() < 2 {
        return Err(Error::Trace(format!("resampling needs >= 2 samples, got {}", trace.len())));
    }
    let step = 1000.0 / rate_hz;
    let raw = &trace.samples;
    let t0 = raw[0].t;
    let t_last = raw[raw.len() - 1].t;
    // Tolerate grid points that overshoot the last sample by rounding only.
    let n_out = ((t_last - t0) / step + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_out);
    let mut j = 0;
    for k in 0..n_out {
        let t = t0 + k as f64 * step;
        while j + 2 < raw.len() && raw[j + 1].t <= t {
            j += 1;
        }
        let (a, b) = (&raw[j], &raw[j + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        out.push(GazeSample::new(t, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)));
    }
    Ok(GazeTrace { session_id: trace.session_id.clone(), samples: out, rate_hz: Some(rate_hz) })
}

/// `smooth` followed by `resample`, the order the conditioning pipeline uses.
pub fn condition(trace: &GazeTrace, window: usize, rate_hz: f64) -> Result<GazeTrace> {
    resample(&smooth(trace, window)?, rate_hz)
}
