//! Homogeneous Poisson baseline for spawn timing.

use super::sequence::{SpawnSequence, TrainingWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub spawn_id: usize,
    /// Events per frame.
    pub rate: f64,
}

/// Maximum-likelihood rate: event count over observed horizon.
pub fn fit_poisson(seq: &SpawnSequence) -> PoissonModel {
    let rate = if seq.horizon > 0.0 {
        seq.len() as f64 / seq.horizon
    } else {
        0.0
    };
    PoissonModel {
        spawn_id: seq.spawn_id,
        rate,
    }
}

/// Exponential inter-event times with the fitted rate, truncated at `length`.
pub fn sample_poisson(model: &PoissonModel, length: f64, seed: u64) -> SpawnSequence {
    let mut times = Vec::new();
    if model.rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / model.rate;
            if t >= length {
                break;
            }
            times.push(t);
        }
    }
    SpawnSequence::new(model.spawn_id, times, length)
}

/// Window NLL under a homogeneous Poisson process: with n events in a window
/// of length w the exponential-gap terms and the survival tail collapse to
/// `rate * w - n * ln(rate)`.
pub fn poisson_window_nll(rate: f64, window: &TrainingWindow) -> f64 {
    let n = window.events.len();
    if rate <= 0.0 {
        return if n == 0 { 0.0 } else { f64::INFINITY };
    }
    rate * window.len - n as f64 * rate.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mle_rate_is_count_over_horizon() {
        let seq = SpawnSequence::new(0, (1..=10).map(|i| i as f64 * 9.0).collect(), 100.0);
        let m = fit_poisson(&seq);
        assert!((m.rate - 0.1).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence_has_zero_rate() {
        let seq = SpawnSequence::new(0, vec![], 100.0);
        assert_eq!(fit_poisson(&seq).rate, 0.0);
        let sampled = sample_poisson(&fit_poisson(&seq), 1000.0, 3);
        assert!(sampled.is_empty());
    }

    #[test]
    fn sampled_times_strictly_increasing_within_length() {
        let m = PoissonModel {
            spawn_id: 0,
            rate: 0.2,
        };
        let seq = sample_poisson(&m, 500.0, 11);
        assert!(!seq.is_empty());
        assert!(seq.times.windows(2).all(|w| w[0] < w[1]));
        assert!(seq.times.iter().all(|&t| t > 0.0 && t < 500.0));
    }

    #[test]
    fn sample_count_matches_rate_across_seeds() {
        let m = PoissonModel {
            spawn_id: 0,
            rate: 0.1,
        };
        let mut total = 0usize;
        let seeds = 20;
        for s in 0..seeds {
            total += sample_poisson(&m, 10_000.0, s).len();
        }
        let mean = total as f64 / seeds as f64;
        // Poisson(1000): 3 sigma of the mean over 20 seeds
        let tol = 3.0 * (1000.0f64 / seeds as f64).sqrt();
        assert!((mean - 1000.0).abs() < tol, "mean count {mean}");
    }

    #[test]
    fn window_nll_closed_form() {
        let w = TrainingWindow {
            start: 0.0,
            len: 50.0,
            events: vec![10.0, 20.0, 45.0],
        };
        let rate: f64 = 0.08;
        let direct = {
            // sum of exponential log-pdfs + survival of the tail
            let (deltas, tail) = w.deltas();
            let mut nll = 0.0;
            for d in deltas {
                nll -= rate.ln() - rate * d;
            }
            nll += rate * tail;
            nll
        };
        let got = poisson_window_nll(rate, &w);
        assert!((got - direct).abs() < 1e-12);
        assert_eq!(poisson_window_nll(0.0, &w), f64::INFINITY);
    }
}
