use rand::Rng;
use rand_distr::StandardNormal;

use super::NoiseConfig;
use crate::error::Result;

/// Exploration process added to the actor's logits. The OU variant carries state across
/// steps and is reset at the start of each episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationNoise {
    config: NoiseConfig,
    state: Vec<f64>,
}

impl ExplorationNoise {
    pub fn new(config: NoiseConfig, dims: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: vec![0.0; dims],
        })
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        match self.config {
            NoiseConfig::OrnsteinUhlenbeck { theta, sigma, dt } => {
                for n in &mut self.state {
                    let eps: f64 = rng.sample(StandardNormal);
                    *n += theta * (0.0 - *n) * dt + sigma * dt.sqrt() * eps;
                }
                self.state.clone()
            }
            NoiseConfig::Gaussian { sigma } => self
                .state
                .iter()
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }
}
