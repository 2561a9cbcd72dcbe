//! Multi-layer EEG encoding head.
//!
//! Each stage output is global-average-pooled and mapped to 128 units with
//! ReLU. The four codes are concatenated (V1, V2, V4, IT) into a 512-wide
//! vector and projected linearly to the EEG dimension.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::params::ParamSet;

pub const STAGE_CODE_WIDTH: usize = 128;
pub const VISUAL_CODE_WIDTH: usize = 4 * STAGE_CODE_WIDTH;
/// Multiplier on the He bound of the EEG output layer, so initial
/// predictions sit near the scale of recorded amplitudes instead of two
/// orders of magnitude above it.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct EncodingHead {
    stage_channels: [usize; 4],
    eeg_dim: usize,
    params: ParamSet,
}

impl EncodingHead {
    pub fn new(stage_channels: [usize; 4], eeg_dim: usize, seed: u64) -> Result<Self> {
        if eeg_dim == 0 || stage_channels.contains(&0) {
            return Err(Error::invalid(format!(
                "encoding head needs positive sizes, got channels {stage_channels:?} and D={eeg_dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (s, &c) in stage_channels.iter().enumerate() {
            let name = super::Stage::ALL[s].name();
            params.push_he(
                format!("head.{name}.weight"),
                "head",
                &[STAGE_CODE_WIDTH, c],
                c,
                &mut rng,
            );
            params.push(
                format!("head.{name}.bias"),
                "head",
                Tensor::zeros(&[STAGE_CODE_WIDTH]),
            );
        }
        let out = params.push_he(
            "head.eeg.weight".into(),
            "head",
            &[eeg_dim, VISUAL_CODE_WIDTH],
            VISUAL_CODE_WIDTH,
            &mut rng,
        );
        for v in params.values_mut()[out].data_mut() {
            *v *= OUTPUT_INIT_SCALE;
        }
        params.push("head.eeg.bias".into(), "head", Tensor::zeros(&[eeg_dim]));
        Ok(EncodingHead {
            stage_channels,
            eeg_dim,
            params,
        })
    }

    pub fn eeg_dim(&self) -> usize {
        self.eeg_dim
    }

    pub fn stage_channels(&self) -> [usize; 4] {
        self.stage_channels
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Generated EEG, `N × D`, from the four stage outputs.
    pub fn forward(&self, g: &mut Graph, p: &[NodeId], stages: &[NodeId]) -> Result<NodeId> {
        if stages.len() != 4 {
            return Err(Error::shape(
                "encoding_head",
                format!("expected 4 stage outputs, got {}", stages.len()),
            ));
        }
        let mut codes = Vec::with_capacity(4);
        for (s, &x) in stages.iter().enumerate() {
            let pooled = g.global_avg_pool(x)?;
            let h = g.dense(pooled, p[2 * s], p[2 * s + 1])?;
            codes.push(g.relu(h)?);
        }
        let visual = g.concat(&codes, 1)?;
        debug_assert_eq!(g.value(visual).shape()[1], VISUAL_CODE_WIDTH);
        g.dense(visual, p[8], p[9])
    }
}
