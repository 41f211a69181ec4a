//! Loss measurement and sending-rate adaptation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Loss fraction over one period; an empty period reads as no loss.
pub fn loss_sample(sent: u64, lost: u64) -> f64 {
    if sent == 0 {
        0.0
    } else {
        lost as f64 / sent as f64
    }
}

/// The two most recent loss samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementHistory {
    samples: VecDeque<f64>,
}

impl MeasurementHistory {
    pub fn push(&mut self, sample: f64) {
        if self.samples.len() == 2 {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    /// `(previous, latest)` once two samples exist.
    pub fn last_two(&self) -> Option<(f64, f64)> {
        match (self.samples.front(), self.samples.back()) {
            (Some(&a), Some(&b)) if self.samples.len() == 2 => Some((a, b)),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub beta: f64,
    pub rate_min: f64,
    /// Seconds between measurements.
    pub measurement_period: f64,
}

/// New rate from the loss slope, or `None` while fewer than two samples
/// exist. A rising loss cuts the rate multiplicatively; otherwise it grows
/// by one packet per second.
pub fn rate_update(history: &MeasurementHistory, rate: f64, params: &RateParams) -> Option<f64> {
    let (prev, latest) = history.last_two()?;
    let slope = (latest - prev) / params.measurement_period;
    Some(if slope > 0.0 {
        (rate * (1.0 - params.beta * slope)).max(params.rate_min)
    } else {
        rate + 1.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(v: &[f64]) -> MeasurementHistory {
        let mut h = MeasurementHistory::default();
        for &s in v {
            h.push(s);
        }
        h
    }

    const P: RateParams = RateParams {
        beta: 0.5,
        rate_min: 1.0,
        measurement_period: 1.0,
    };

    #[test]
    fn rising_loss_cuts_rate() {
        let r = rate_update(&hist(&[0.1, 0.3]), 100.0, &P).unwrap();
        assert!((r - 90.0).abs() < 1e-9);
    }

    #[test]
    fn falling_loss_adds_one() {
        assert_eq!(rate_update(&hist(&[0.3, 0.1]), 100.0, &P), Some(101.0));
        assert_eq!(rate_update(&hist(&[0.2, 0.2]), 100.0, &P), Some(101.0));
    }

    #[test]
    fn needs_two_samples() {
        assert_eq!(rate_update(&hist(&[]), 100.0, &P), None);
        assert_eq!(rate_update(&hist(&[0.5]), 100.0, &P), None);
        let h = hist(&[0.9, 0.1, 0.4]);
        assert_eq!(h.last_two(), Some((0.1, 0.4)));
    }

    #[test]
    fn floor_holds() {
        assert_eq!(rate_update(&hist(&[0.0, 1.0]), 3.0, &P), Some(1.5));
        assert_eq!(rate_update(&hist(&[0.0, 1.0]), 1.5, &P), Some(1.0));
        let steep = RateParams { beta: 2.0, ..P };
        assert_eq!(rate_update(&hist(&[0.0, 1.0]), 10.0, &steep), Some(1.0));
    }

    #[test]
    fn samples() {
        assert_eq!(loss_sample(0, 0), 0.0);
        assert_eq!(loss_sample(10, 2), 0.2);
    }
}
