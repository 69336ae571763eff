//! The learned governor: wraps a Q-network behind the `Governor` trait.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{encode_step, EncodedState, EncoderConfig, StateLayout};
use crate::governor::Governor;
use crate::power::{FreqLevel, FrequencyTable};
use crate::rl::net::{select_action, QNet};
use crate::sim::Observation;

/// Frequency governor driven by a trained Q-network.
///
/// The governor accumulates its own temporal state between decisions and is
/// bound to the frequency table it was trained on; running it against a
/// table with different operating points fails the episode with a protocol
/// error.
#[derive(Debug, Clone)]
pub struct RlGovernor {
    net: QNet,
    cfg: EncoderConfig,
    layout: StateLayout,
    actions_norm: Vec<f64>,
    /// Probability of taking a uniformly random action instead of the
    /// greedy one; 0 for evaluation.
    p_random: f64,
    seed: u64,
    rng: ChaCha8Rng,
    state: EncodedState,
}

impl RlGovernor {
    /// Exploring policy for training rollouts.
    pub fn explore(
        net: QNet,
        cfg: EncoderConfig,
        layout: StateLayout,
        p_random: f64,
        seed: u64,
    ) -> Self {
        let actions_norm = (0..cfg.table.len())
            .map(|i| cfg.table.freq_normalized(i))
            .collect();
        let state = EncodedState::zero(&cfg);
        Self {
            net,
            cfg,
            layout,
            actions_norm,
            p_random,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state,
        }
    }

    /// Purely greedy policy for evaluation and deployment.
    pub fn greedy(net: QNet, cfg: EncoderConfig, layout: StateLayout) -> Self {
        Self::explore(net, cfg, layout, 0.0, 0)
    }

    pub fn net(&self) -> &QNet {
        &self.net
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    fn decide(&mut self) -> FreqLevel {
        let flat = crate::encoder::flatten(&self.state, self.layout, &self.cfg);
        let idx = select_action(
            &self.net,
            &flat,
            &self.actions_norm,
            self.p_random,
            &mut self.rng,
        )
        .expect("network input width does not match the state layout");
        self.cfg.table.level(idx)
    }
}

impl Governor for RlGovernor {
    fn name(&self) -> &str {
        "rl"
    }

    fn start(&mut self, _table: &FrequencyTable) -> FreqLevel {
        self.decide()
    }

    fn next(&mut self, obs: &Observation, _table: &FrequencyTable) -> FreqLevel {
        // Past the deadline the encoding is frozen: decisions in overtime
        // keep seeing the state as of the deadline, which is the region the
        // network was trained on.
        if self.state.elapsed_frac < 1.0 {
            self.state = encode_step(&self.state, obs, &self.cfg)
                .expect("observation frequency is not in the governor's table");
        }
        self.decide()
    }

    fn reset(&mut self) {
        self.state = EncodedState::zero(&self.cfg);
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }
}
