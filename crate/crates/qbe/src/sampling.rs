//! Seeded random profiles: sums of Gaussian bumps in `|p|` with log-uniform
//! amplitudes and widths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::Result;
use crate::grid::{DistributionState, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureProfile {
    pub bumps: Vec<Bump>,
    /// overall factor, used for scaled pairs
    pub scale: f64,
}

impl MixtureProfile {
    pub fn eval(&self, u: f64) -> f64 {
        self.scale
            * self
                .bumps
                .iter()
                .map(|b| b.amplitude * (-((u - b.center) / b.width).powi(2)).exp())
                .sum::<f64>()
    }

    pub fn sample(&self, grid: Arc<RadialGrid>) -> Result<DistributionState> {
        DistributionState::from_fn(grid, |u| self.eval(u))
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random mixture of 1 to 3 bumps supported well inside `[0, u_max]`.
pub fn random_mixture(rng: &mut ChaCha8Rng, u_max: f64) -> MixtureProfile {
    let k = rng.gen_range(1..=3);
    let bumps = (0..k)
        .map(|_| Bump {
            amplitude: log_uniform(rng, 1e-2, 1.0),
            center: rng.gen_range(0.15..0.55) * u_max,
            width: log_uniform(rng, 0.06, 0.15) * u_max,
        })
        .collect();
    MixtureProfile { bumps, scale: 1.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// independent draws
    Independent,
    /// `g = (1 + eps) f` with `eps` log-uniform in `[1e-6, 1e-1]`
    Scaled,
    /// alternate the two
    #[default]
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSampler {
    pub seed: u64,
    pub u_max: f64,
    pub mode: PairMode,
}

impl PairSampler {
    pub fn new(seed: u64, u_max: f64) -> Self {
        PairSampler {
            seed,
            u_max,
            mode: PairMode::Mixed,
        }
    }

    pub fn pairs(&self, count: usize) -> Vec<(MixtureProfile, MixtureProfile)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|i| {
                let f = random_mixture(&mut rng, self.u_max);
                let scaled = match self.mode {
                    PairMode::Independent => false,
                    PairMode::Scaled => true,
                    PairMode::Mixed => i % 2 == 1,
                };
                let g = if scaled {
                    let mut g = f.clone();
                    g.scale = 1.0 + log_uniform(&mut rng, 1e-6, 1e-1);
                    g
                } else {
                    random_mixture(&mut rng, self.u_max)
                };
                (f, g)
            })
            .collect()
    }
}

/// `count` seeded random profiles.
pub fn random_profiles(seed: u64, u_max: f64, count: usize) -> Vec<MixtureProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_mixture(&mut rng, u_max)).collect()
}
