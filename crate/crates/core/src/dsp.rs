//! Frequency response → impulse response → power delay profile → multipath
//! components.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::SoundingConfig;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("non-finite sample at tone {0}")]
    NonFinite(usize),
    #[error("need at least {min} samples, got {got}")]
    TooShort { min: usize, got: usize },
}

/// Sounded response of one snapshot, one complex value per tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub snapshot_time: f64,
    pub samples: Vec<Complex64>,
}

/// Channel impulse response on a uniform delay grid `n·resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cir {
    pub snapshot_time: f64,
    pub taps: Vec<Complex64>,
    /// Delay-grid spacing [s].
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdp {
    pub snapshot_time: f64,
    pub bins: Vec<f64>,
    pub resolution: f64,
}

impl Pdp {
    pub fn delay_of(&self, bin: f64) -> f64 {
        bin * self.resolution
    }
}

/// One extracted multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    /// [s]
    pub delay: f64,
    /// Magnitude at the peak bin [linear].
    pub amplitude: f64,
    /// `amplitude²`.
    pub power: f64,
    pub snapshot_time: f64,
}

impl Mpc {
    pub fn new(delay: f64, amplitude: f64, snapshot_time: f64) -> Self {
        Mpc {
            delay,
            amplitude,
            power: amplitude * amplitude,
            snapshot_time,
        }
    }

    /// Component with a given power, `amplitude = sqrt(power)`.
    pub fn with_power(delay: f64, power: f64, snapshot_time: f64) -> Self {
        let amplitude = power.sqrt();
        Mpc {
            delay,
            amplitude,
            power,
            snapshot_time,
        }
    }
}

/// Taper applied across the tones before inversion. Normalised to unit mean,
/// so an on-grid path keeps its peak magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
    /// 4-term Blackman–Harris, −92 dB sidelobes.
    BlackmanHarris,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let m = (n.max(2) - 1) as f64;
        let raw: Vec<f64> = (0..n)
            .map(|k| {
                let x = 2.0 * std::f64::consts::PI * k as f64 / m;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::BlackmanHarris => {
                        0.35875 - 0.48829 * x.cos() + 0.14128 * (2.0 * x).cos()
                            - 0.01168 * (3.0 * x).cos()
                    }
                }
            })
            .collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        raw.into_iter().map(|w| w / mean).collect()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn check_finite(samples: &[Complex64]) -> Result<(), DspError> {
    match samples
        .iter()
        .position(|h| !h.re.is_finite() || !h.im.is_finite())
    {
        Some(k) => Err(DspError::NonFinite(k)),
        None => Ok(()),
    }
}

/// Unitary inverse DFT of the tone samples:
/// `h_n = N^{-1/2} Σ_k H_k exp(+j2π kn/N)`.
pub fn to_cir(fr: &FrequencyResponse, sounding: &SoundingConfig) -> Result<Cir, DspError> {
    to_cir_windowed(fr, sounding, Window::Rectangular)
}

/// [`to_cir`] with a tone taper applied first.
pub fn to_cir_windowed(
    fr: &FrequencyResponse,
    sounding: &SoundingConfig,
    window: Window,
) -> Result<Cir, DspError> {
    let n = fr.samples.len();
    if n < 2 {
        return Err(DspError::TooShort { min: 2, got: n });
    }
    check_finite(&fr.samples)?;
    let mut buf = fr.samples.clone();
    if window != Window::Rectangular {
        for (h, w) in buf.iter_mut().zip(window.coefficients(n)) {
            *h *= w;
        }
    }
    plan(n, true).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|h| *h *= scale);
    Ok(Cir {
        snapshot_time: fr.snapshot_time,
        taps: buf,
        resolution: 1.0 / (n as f64 * sounding.tone_spacing()),
    })
}

/// Unitary forward DFT, the inverse of [`to_cir`].
pub fn to_frequency_response(cir: &Cir) -> FrequencyResponse {
    let n = cir.taps.len();
    let mut buf = cir.taps.clone();
    if n > 0 {
        plan(n, false).process(&mut buf);
        let scale = 1.0 / (n as f64).sqrt();
        buf.iter_mut().for_each(|h| *h *= scale);
    }
    FrequencyResponse {
        snapshot_time: cir.snapshot_time,
        samples: buf,
    }
}

/// `PDP(t, τ) = |h(t, τ)|²`, bin by bin.
pub fn to_pdp(cir: &Cir) -> Pdp {
    Pdp {
        snapshot_time: cir.snapshot_time,
        bins: cir.taps.iter().map(|h| h.norm_sqr()).collect(),
        resolution: cir.resolution,
    }
}

pub const DEFAULT_NOISE_MARGIN_DB: f64 = 6.0;

/// Median bin power raised by `margin_db`.
pub fn estimate_noise_floor(pdp: &Pdp, margin_db: f64) -> Result<f64, DspError> {
    let n = pdp.bins.len();
    if n < 8 {
        return Err(DspError::TooShort { min: 8, got: n });
    }
    let mut v = pdp.bins.clone();
    let mid = n / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    };
    Ok(median * 10f64.powf(margin_db / 10.0))
}

/// Local maxima of the PDP strictly above `floor`, sorted by delay.
///
/// With `interpolate`, a peak whose two neighbours are also above the floor is
/// refined by a parabola through the three log-powers. Amplitudes are the CIR
/// magnitudes at the peak bins.
pub fn extract_mpcs(pdp: &Pdp, cir: &Cir, floor: f64, interpolate: bool) -> Vec<Mpc> {
    let b = &pdp.bins;
    let n = b.len();
    let mut out = Vec::new();
    for i in 0..n {
        let p = b[i];
        if !(p > floor) {
            continue;
        }
        let left = if i > 0 { Some(b[i - 1]) } else { None };
        let right = if i + 1 < n { Some(b[i + 1]) } else { None };
        let is_peak = left.map_or(true, |l| p > l) && right.map_or(true, |r| p >= r);
        if !is_peak {
            continue;
        }
        let mut bin = i as f64;
        if interpolate {
            if let (Some(l), Some(r)) = (left, right) {
                if l > floor && r > floor {
                    let (a, c, g) = (10.0 * l.log10(), 10.0 * p.log10(), 10.0 * r.log10());
                    let denom = a - 2.0 * c + g;
                    if denom < 0.0 {
                        bin += (0.5 * (a - g) / denom).clamp(-0.5, 0.5);
                    }
                }
            }
        }
        let amplitude = cir.taps[i].norm();
        out.push(Mpc::new(
            pdp.delay_of(bin).max(0.0),
            amplitude,
            pdp.snapshot_time,
        ));
    }
    out
}

/// Number of local maxima in the PDP, regardless of level.
pub fn count_local_maxima(pdp: &Pdp) -> usize {
    let b = &pdp.bins;
    (0..b.len())
        .filter(|&i| (i == 0 || b[i] > b[i - 1]) && (i + 1 == b.len() || b[i] >= b[i + 1]))
        .count()
}
