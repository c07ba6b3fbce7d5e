//! Per-second request count traces: loading, scaling and synthetic generation.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceWorkload {
    /// Requests arriving in each one-second slot.
    pub counts: Vec<u64>,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_factor: Option<u64>,
}

impl TraceWorkload {
    pub fn new(counts: Vec<u64>, label: impl Into<String>) -> Self {
        Self {
            counts,
            label: label.into(),
            scale_factor: None,
        }
    }

    pub fn duration_secs(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn total_requests(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn peak_per_second(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_per_second(&self) -> f64 {
        if self.counts.is_empty() {
            0.0
        } else {
            self.total_requests() as f64 / self.counts.len() as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.is_empty() {
            return Err(Error::EmptyTrace);
        }
        Ok(())
    }

    /// One count per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::with_capacity(self.counts.len() * 4);
        for c in &self.counts {
            let _ = writeln!(out, "{c}");
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_lines()).map_err(|e| Error::io(path, e))
    }
}

/// Maps a raw count through the load-time scale: `max(0, round(c / s))`.
fn scale_count(c: i64, scale: u64) -> u64 {
    (c as f64 / scale as f64).round().max(0.0) as u64
}

/// Parses a trace: either one integer per line, or `second,count` rows with
/// an optional header. Blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str, source: &str, scale_factor: Option<u64>) -> Result<TraceWorkload> {
    let scale = match scale_factor {
        Some(0) => return Err(Error::domain("scale factor must be >= 1")),
        Some(s) => s,
        None => 1,
    };
    let err = |line: usize, message: String| Error::TraceParse {
        path: source.to_string(),
        line,
        message,
    };
    let mut counts = Vec::new();
    let mut expected_second: Option<i64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let count_field = match line.split_once(',') {
            None => line,
            Some((second, count)) => {
                let (second, count) = (second.trim(), count.trim());
                if counts.is_empty() && expected_second.is_none() && second.parse::<i64>().is_err() {
                    // header row
                    continue;
                }
                let second: i64 = second
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid second `{second}`")))?;
                if let Some(expected) = expected_second {
                    if second != expected {
                        return Err(err(lineno, format!("expected second {expected}, found {second}")));
                    }
                }
                expected_second = Some(second + 1);
                count
            }
        };
        let count: i64 = count_field
            .parse()
            .map_err(|_| err(lineno, format!("invalid count `{count_field}`")))?;
        if count < 0 {
            return Err(err(lineno, format!("negative count {count}")));
        }
        counts.push(scale_count(count, scale));
    }
    if counts.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(TraceWorkload {
        counts,
        label: source.to_string(),
        scale_factor,
    })
}

pub fn load_trace(path: impl AsRef<Path>, scale_factor: Option<u64>) -> Result<TraceWorkload> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut trace = parse_trace(&text, &path.display().to_string(), scale_factor)?;
    trace.label = label;
    Ok(trace)
}

/// Random load spikes layered on a sinusoidal base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeParams {
    /// Chance that a spike starts in any given second.
    pub probability: f64,
    /// Mean spike height as a multiple of the base mean rate.
    pub height: f64,
    /// Longest spike, seconds. Durations are uniform in `1..=max_duration`.
    pub max_duration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    Constant {
        rate: u64,
    },
    Step {
        low: u64,
        high: u64,
        switch_at: usize,
    },
    /// Poisson counts around `mean - amplitude * cos(2 pi t / period)`, so
    /// the trace opens at its trough.
    Diurnal {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// Diurnal base plus seeded spikes.
    Bursty {
        mean: f64,
        amplitude: f64,
        period: f64,
        spikes: SpikeParams,
    },
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Constant { .. } => "constant",
            TraceKind::Step { .. } => "step",
            TraceKind::Diurnal { .. } => "diurnal",
            TraceKind::Bursty { .. } => "bursty",
        }
    }

    fn validate(&self) -> Result<()> {
        let sinusoid = |mean: f64, amplitude: f64, period: f64| {
            if !(mean >= 0.0 && amplitude >= 0.0 && amplitude <= mean) {
                return Err(Error::domain("need 0 <= amplitude <= mean"));
            }
            if !(period > 0.0) {
                return Err(Error::domain("period must be > 0"));
            }
            Ok(())
        };
        match *self {
            TraceKind::Constant { .. } | TraceKind::Step { .. } => Ok(()),
            TraceKind::Diurnal {
                mean,
                amplitude,
                period,
            } => sinusoid(mean, amplitude, period),
            TraceKind::Bursty {
                mean,
                amplitude,
                period,
                spikes,
            } => {
                sinusoid(mean, amplitude, period)?;
                if !(0.0..=1.0).contains(&spikes.probability) {
                    return Err(Error::domain("spike probability must lie in [0, 1]"));
                }
                if !(spikes.height >= 0.0) || spikes.max_duration == 0 {
                    return Err(Error::domain("spike height must be >= 0 and max_duration >= 1"));
                }
                Ok(())
            }
        }
    }
}

fn diurnal_rate(t: f64, mean: f64, amplitude: f64, period: f64) -> f64 {
    mean - amplitude * (2.0 * PI * t / period).cos()
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// Generates `len` seconds of synthetic load. Output depends only on
/// `(kind, len, seed)`.
pub fn gen_trace(kind: TraceKind, len: usize, seed: u64) -> Result<TraceWorkload> {
    if len == 0 {
        return Err(Error::domain("trace length must be >= 1"));
    }
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = match kind {
        TraceKind::Constant { rate } => vec![rate; len],
        TraceKind::Step { low, high, switch_at } => (0..len).map(|t| if t < switch_at { low } else { high }).collect(),
        TraceKind::Diurnal {
            mean,
            amplitude,
            period,
        } => (0..len)
            .map(|t| poisson(&mut rng, diurnal_rate(t as f64, mean, amplitude, period)))
            .collect(),
        TraceKind::Bursty {
            mean,
            amplitude,
            period,
            spikes,
        } => {
            let mut extra = vec![0.0f64; len];
            for t in 0..len {
                if rng.random::<f64>() < spikes.probability {
                    let height = spikes.height * mean * rng.random_range(0.5..1.5);
                    let duration = rng.random_range(1..=spikes.max_duration) as usize;
                    for slot in extra.iter_mut().skip(t).take(duration) {
                        *slot += height;
                    }
                }
            }
            (0..len)
                .map(|t| poisson(&mut rng, diurnal_rate(t as f64, mean, amplitude, period) + extra[t]))
                .collect()
        }
    };
    Ok(TraceWorkload::new(counts, format!("{}-seed{seed}", kind.name())))
}
