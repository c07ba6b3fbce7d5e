//! EWMA tracking of per-epoch request counts.
//!
//! `avg` follows the counts with weight `alpha`; `std` is an exponentially
//! weighted absolute deviation with weight `beta`, measured against the
//! freshly updated `avg`. The very first epoch seeds `avg` with its count and
//! `std` with zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Seconds per epoch.
    pub epoch_length: f64,
    /// Estimates are reported every this many epochs.
    pub report_every_k: u64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.2,
            epoch_length: 1.0,
            report_every_k: 300,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!(
                "alpha and beta must lie in [0, 1] (got {} and {})",
                self.alpha, self.beta
            )));
        }
        if !(self.epoch_length > 0.0 && self.epoch_length.is_finite()) {
            return Err(Error::config("epoch_length must be > 0"));
        }
        if self.report_every_k == 0 {
            return Err(Error::config("report_every_k must be >= 1"));
        }
        Ok(())
    }
}

/// Smoothed request count and deviation, both in requests per epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficEstimate {
    pub avg: f64,
    pub std: f64,
    pub epochs_observed: u64,
}

impl TrafficEstimate {
    /// Converts the per-epoch estimate to requests per second.
    pub fn per_second(&self, epoch_length: f64) -> (f64, f64) {
        (self.avg / epoch_length, self.std / epoch_length)
    }
}

/// Folds one epoch's request count into the estimate.
pub fn record_epoch(count: f64, state: TrafficEstimate, cfg: &MonitorConfig) -> Result<TrafficEstimate> {
    if !(count >= 0.0 && count.is_finite()) {
        return Err(Error::domain(format!("epoch request count must be >= 0, got {count}")));
    }
    if state.epochs_observed == 0 {
        return Ok(TrafficEstimate {
            avg: count,
            std: 0.0,
            epochs_observed: 1,
        });
    }
    // (1 - a) * x + a * y, written so that x == y is an exact fixed point.
    let avg = state.avg + cfg.alpha * (count - state.avg);
    let std = state.std + cfg.beta * ((count - avg).abs() - state.std);
    Ok(TrafficEstimate {
        avg,
        std,
        epochs_observed: state.epochs_observed + 1,
    })
}

/// True iff `epochs_observed` is a positive multiple of K.
pub fn should_report(epochs_observed: u64, cfg: &MonitorConfig) -> bool {
    epochs_observed > 0 && epochs_observed.is_multiple_of(cfg.report_every_k)
}

/// Single-owner wrapper that advances an estimate epoch by epoch.
#[derive(Debug, Clone)]
pub struct TrafficMonitor {
    cfg: MonitorConfig,
    estimate: TrafficEstimate,
}

impl TrafficMonitor {
    pub fn new(cfg: MonitorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            estimate: TrafficEstimate::default(),
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn estimate(&self) -> TrafficEstimate {
        self.estimate
    }

    /// Records an epoch; returns the estimate when a report is due.
    pub fn observe(&mut self, count: f64) -> Result<Option<TrafficEstimate>> {
        self.estimate = record_epoch(count, self.estimate, &self.cfg)?;
        Ok(should_report(self.estimate.epochs_observed, &self.cfg).then_some(self.estimate))
    }
}

/// One point of the traffic estimate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatePoint {
    /// End of the epoch, seconds.
    pub t: f64,
    pub count: f64,
    pub avg: f64,
    pub std: f64,
}

/// Runs the monitor over per-epoch counts and returns the estimate after
/// every epoch.
pub fn estimate_series(counts: &[u64], cfg: &MonitorConfig) -> Result<Vec<EstimatePoint>> {
    cfg.validate()?;
    let mut state = TrafficEstimate::default();
    let mut out = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        state = record_epoch(c as f64, state, cfg)?;
        out.push(EstimatePoint {
            t: (i + 1) as f64 * cfg.epoch_length,
            count: c as f64,
            avg: state.avg,
            std: state.std,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, k: u64) -> MonitorConfig {
        MonitorConfig {
            alpha,
            beta: alpha,
            epoch_length: 1.0,
            report_every_k: k,
        }
    }

    fn seeded(avg: f64, std: f64) -> TrafficEstimate {
        TrafficEstimate {
            avg,
            std,
            epochs_observed: 5,
        }
    }

    #[test]
    fn ewma_step() {
        let next = record_epoch(20.0, seeded(10.0, 0.0), &cfg(0.2, 1)).unwrap();
        assert!((next.avg - 12.0).abs() < 1e-12);
        // deviation is measured against the updated avg: 0.2 * |20 - 12|
        assert!((next.std - 1.6).abs() < 1e-12);
        assert_eq!(next.epochs_observed, 6);
    }

    #[test]
    fn fixed_point() {
        let next = record_epoch(7.0, seeded(7.0, 0.0), &cfg(0.2, 1)).unwrap();
        assert_eq!(next.avg, 7.0);
        assert_eq!(next.std, 0.0);
    }

    #[test]
    fn first_epoch_seeds_estimate() {
        let first = record_epoch(42.0, TrafficEstimate::default(), &cfg(0.2, 1)).unwrap();
        assert_eq!(
            first,
            TrafficEstimate {
                avg: 42.0,
                std: 0.0,
                epochs_observed: 1
            }
        );
    }

    #[test]
    fn constant_stream_converges() {
        // From avg = 0 the gap shrinks by (1 - alpha) per epoch: 0.8^50 ~ 1.4e-5.
        let c = 100.0;
        let mut est = seeded(0.0, 0.0);
        let mut prev_gap = f64::INFINITY;
        for _ in 0..50 {
            est = record_epoch(c, est, &cfg(0.2, 1)).unwrap();
            let gap = (c - est.avg).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!((est.avg - c).abs() < 1e-4 * c);
    }

    #[test]
    fn degenerate_weights() {
        let latest = record_epoch(3.0, seeded(10.0, 1.0), &cfg(1.0, 1)).unwrap();
        assert_eq!(latest.avg, 3.0);
        let frozen = record_epoch(3.0, seeded(10.0, 1.0), &cfg(0.0, 1)).unwrap();
        assert_eq!(frozen.avg, 10.0);
        assert_eq!(frozen.std, 1.0);
    }

    #[test]
    fn negative_count_rejected() {
        assert!(record_epoch(-1.0, seeded(1.0, 0.0), &cfg(0.2, 1)).is_err());
        assert!(record_epoch(f64::NAN, seeded(1.0, 0.0), &cfg(0.2, 1)).is_err());
    }

    #[test]
    fn report_cadence() {
        let every = cfg(0.2, 1);
        assert!((1..10).all(|e| should_report(e, &every)));
        let k300 = cfg(0.2, 300);
        assert!(should_report(300, &k300));
        assert!(!should_report(299, &k300));
        assert!(should_report(600, &k300));
        assert!(!should_report(0, &k300));
    }

    #[test]
    fn monitor_reports_every_k() {
        let mut tm = TrafficMonitor::new(cfg(0.2, 3)).unwrap();
        let reports: Vec<bool> = (0..7).map(|_| tm.observe(5.0).unwrap().is_some()).collect();
        assert_eq!(reports, [false, false, true, false, false, true, false]);
    }

    #[test]
    fn config_validation() {
        assert!(MonitorConfig {
            alpha: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MonitorConfig {
            report_every_k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MonitorConfig {
            epoch_length: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        MonitorConfig::default().validate().unwrap();
    }
}
