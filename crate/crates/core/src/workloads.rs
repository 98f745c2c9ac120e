//! Seeded spike-event generators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{SimTime, SUBTICKS_PER_UNIT};
use crate::rng::SimRng;

/// One neuron request entering the arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Spike {
    pub t: SimTime,
    pub neuron: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadKind {
    /// One uniformly chosen neuron per trial, trials spaced far enough apart
    /// that the arbiter drains between them.
    Sparse { trials: u64 },
    /// Every neuron fires once at a time uniform in `[0, window]` units.
    Burst {
        #[serde(default)]
        window: u64,
    },
    /// Exponential inter-arrivals at `rate` events per unit over `duration` units.
    Poisson { rate: f64, duration: u64 },
    /// Neurons `[cluster_id * size, (cluster_id + 1) * size)` all fire at t=0.
    LocalizedBurst { cluster_id: u32, size: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    #[serde(flatten)]
    pub kind: WorkloadKind,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("neuron count must be at least 1")]
    NoNeurons,
    #[error("poisson rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("cluster {cluster_id} of size {size} does not fit in {n} neurons")]
    BadCluster { cluster_id: u32, size: u32, n: u32 },
}

impl Workload {
    pub fn new(kind: WorkloadKind, seed: u64) -> Self {
        Workload { kind, seed }
    }

    pub fn sparse(trials: u64, seed: u64) -> Self {
        Self::new(WorkloadKind::Sparse { trials }, seed)
    }

    pub fn burst(seed: u64) -> Self {
        Self::new(WorkloadKind::Burst { window: 0 }, seed)
    }

    /// Time between sparse trials for `n` neurons. Exceeds the single-event
    /// latency of every modelled architecture, so each trial starts drained.
    pub fn sparse_spacing(n: u32) -> SimTime {
        SimTime::from_units(2 * n as u64 + 64)
    }

    pub fn validate(&self, n: u32) -> Result<(), WorkloadError> {
        if n == 0 {
            return Err(WorkloadError::NoNeurons);
        }
        match self.kind {
            WorkloadKind::Poisson { rate, .. } if !(rate > 0.0 && rate.is_finite()) => {
                Err(WorkloadError::BadRate(rate))
            }
            WorkloadKind::LocalizedBurst { cluster_id, size }
                if size == 0 || (cluster_id as u64 + 1) * size as u64 > n as u64 =>
            {
                Err(WorkloadError::BadCluster {
                    cluster_id,
                    size,
                    n,
                })
            }
            _ => Ok(()),
        }
    }

    /// Time-ordered spikes for `n` neurons; ties are ordered by neuron id.
    pub fn generate(&self, n: u32) -> Result<Vec<Spike>, WorkloadError> {
        self.validate(n)?;
        let mut rng = SimRng::new(self.seed);
        let mut out = match self.kind {
            WorkloadKind::Sparse { trials } => {
                let spacing = Self::sparse_spacing(n).0;
                (0..trials)
                    .map(|k| Spike {
                        t: SimTime(k * spacing),
                        neuron: rng.below(n as u64) as u32,
                    })
                    .collect()
            }
            WorkloadKind::Burst { window } => {
                let span = window * SUBTICKS_PER_UNIT;
                (0..n)
                    .map(|neuron| Spike {
                        t: SimTime(if span == 0 { 0 } else { rng.below(span + 1) }),
                        neuron,
                    })
                    .collect::<Vec<_>>()
            }
            WorkloadKind::Poisson { rate, duration } => {
                let end = duration as f64;
                let mut t = 0.0;
                let mut v = Vec::new();
                loop {
                    t += rng.exponential(rate);
                    if t >= end {
                        break;
                    }
                    v.push(Spike {
                        t: SimTime((t * SUBTICKS_PER_UNIT as f64) as u64),
                        neuron: rng.below(n as u64) as u32,
                    });
                }
                v
            }
            WorkloadKind::LocalizedBurst { cluster_id, size } => (cluster_id * size
                ..(cluster_id + 1) * size)
                .map(|neuron| Spike {
                    t: SimTime::ZERO,
                    neuron,
                })
                .collect(),
        };
        out.sort();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_window_zero_fires_everyone_at_zero() {
        let s = Workload::burst(1).generate(4).unwrap();
        assert_eq!(
            s,
            (0..4)
                .map(|neuron| Spike {
                    t: SimTime::ZERO,
                    neuron
                })
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn sparse_is_repeatable() {
        let w = Workload::sparse(3, 77);
        let a = w.generate(64).unwrap();
        assert_eq!(a, w.generate(64).unwrap());
        assert_eq!(a.len(), 3);
        assert!(a.windows(2).all(|p| p[0].t < p[1].t));
    }

    #[test]
    fn poisson_count_matches_rate() {
        // lambda*T = 1000; three standard deviations is 3*sqrt(1000) ~ 94.9.
        let w = Workload::new(
            WorkloadKind::Poisson {
                rate: 0.1,
                duration: 10_000,
            },
            5,
        );
        let n = w.generate(64).unwrap().len() as f64;
        assert!((n - 1000.0).abs() <= 3.0 * 1000f64.sqrt(), "count {n}");
    }

    #[test]
    fn localized_burst_covers_cluster() {
        let w = Workload::new(
            WorkloadKind::LocalizedBurst {
                cluster_id: 2,
                size: 4,
            },
            0,
        );
        let ids: Vec<u32> = w.generate(64).unwrap().iter().map(|s| s.neuron).collect();
        assert_eq!(ids, vec![8, 9, 10, 11]);
        let bad = Workload::new(
            WorkloadKind::LocalizedBurst {
                cluster_id: 16,
                size: 4,
            },
            0,
        );
        assert!(matches!(
            bad.generate(64),
            Err(WorkloadError::BadCluster { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let w: Workload =
            serde_json::from_str(r#"{"variant":"burst","window":0,"seed":42}"#).unwrap();
        assert_eq!(w, Workload::new(WorkloadKind::Burst { window: 0 }, 42));
        assert!(serde_json::from_str::<Workload>(r#"{"variant":"bursty","seed":1}"#).is_err());
    }

    #[test]
    fn nonpositive_rate_rejected() {
        let w = Workload::new(
            WorkloadKind::Poisson {
                rate: 0.0,
                duration: 10,
            },
            0,
        );
        assert_eq!(w.generate(4), Err(WorkloadError::BadRate(0.0)));
    }

    proptest::proptest! {
        #[test]
        fn output_sorted_and_in_range(seed in 0u64..1000, n in 1u32..300, window in 0u64..50) {
            for kind in [
                WorkloadKind::Sparse { trials: 20 },
                WorkloadKind::Burst { window },
                WorkloadKind::Poisson { rate: 0.5, duration: 100 },
            ] {
                let s = Workload::new(kind, seed).generate(n).unwrap();
                proptest::prop_assert!(s.windows(2).all(|p| p[0] <= p[1]));
                proptest::prop_assert!(s.iter().all(|x| x.neuron < n));
            }
        }
    }
}
