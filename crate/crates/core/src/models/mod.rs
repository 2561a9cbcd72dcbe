//! The vision backbone, the EEG encoding head and their checkpoint format.

mod backbone;
mod checkpoint;
mod head;
mod params;

pub use backbone::{
    BackboneSpec, MiniCor, Stage, StageFeatures, StageOutputs, RESIDUAL_INIT_SCALE,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_INDEX, CHECKPOINT_TENSORS};
pub use head::{EncodingHead, OUTPUT_INIT_SCALE, STAGE_CODE_WIDTH, VISUAL_CODE_WIDTH};
pub use params::ParamSet;

use crate::diffcore::{Graph, NodeId};
use crate::error::Result;
use crate::tensor::Tensor;

/// Seed offset separating head initialization from the backbone's.
const HEAD_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Backbone plus EEG encoding head.
#[derive(Debug, Clone)]
pub struct AlignedModel {
    pub backbone: MiniCor,
    pub head: EncodingHead,
}

/// Node handles from [`AlignedModel::forward`].
#[derive(Debug, Clone)]
pub struct AlignedOutputs {
    pub stages: [NodeId; 4],
    pub logits: NodeId,
    pub generated: NodeId,
    pub backbone_params: Vec<NodeId>,
    pub head_params: Vec<NodeId>,
}

impl AlignedModel {
    /// Seeded construction. The backbone draws from `seed` alone, so two
    /// models with the same seed and spec share an identical backbone
    /// regardless of the EEG dimension.
    pub fn new(spec: BackboneSpec, eeg_dim: usize, seed: u64) -> Result<Self> {
        let backbone = MiniCor::new(spec, seed)?;
        let channels = backbone.spec().widths;
        let head = EncodingHead::new(channels, eeg_dim, seed ^ HEAD_SEED_SALT)?;
        Ok(AlignedModel { backbone, head })
    }

    pub fn spec(&self) -> &BackboneSpec {
        self.backbone.spec()
    }

    /// One forward pass feeding both the classifier and the EEG head.
    pub fn forward(
        &self,
        g: &mut Graph,
        images: NodeId,
        trainable: bool,
    ) -> Result<AlignedOutputs> {
        let backbone_params = self.backbone.params().bind(g, trainable);
        let head_params = self.head.params().bind(g, trainable);
        let out = self.backbone.forward(g, &backbone_params, images)?;
        let generated = self.head.forward(g, &head_params, &out.stages)?;
        Ok(AlignedOutputs {
            stages: out.stages,
            logits: out.logits,
            generated,
            backbone_params,
            head_params,
        })
    }

    /// Generated EEG for a batch of images, without gradients.
    pub fn generate(&self, images: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.input(images.clone());
        let out = self.forward(&mut g, x, false)?;
        Ok(g.value(out.generated).clone())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn batch(n: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::uniform(&[n, 3, 32, 32], 0.0, 1.0, &mut rng)
    }

    #[test]
    fn head_widths_and_output_shape() {
        let m = AlignedModel::new(BackboneSpec::default(), 340, 0).unwrap();
        assert_eq!(
            m.head.params().get("head.V1.weight").unwrap().shape(),
            &[128, 16]
        );
        assert_eq!(
            m.head.params().get("head.eeg.weight").unwrap().shape(),
            &[340, 512]
        );
        let out = m.generate(&batch(3, 1)).unwrap();
        assert_eq!(out.shape(), &[3, 340]);
    }

    #[test]
    fn zero_features_give_zero_eeg() {
        let m = AlignedModel::new(BackboneSpec::default(), 340, 0).unwrap();
        let out = m.generate(&Tensor::zeros(&[1, 3, 32, 32])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_stage_is_an_error() {
        let m = AlignedModel::new(BackboneSpec::default(), 10, 0).unwrap();
        let mut g = Graph::new();
        let p = m.head.params().bind(&mut g, false);
        let x = g.input(Tensor::zeros(&[1, 16, 8, 8]));
        assert!(m.head.forward(&mut g, &p, &[x, x, x]).is_err());
    }

    #[test]
    fn eeg_gradient_reaches_every_stage() {
        let m = AlignedModel::new(BackboneSpec::default(), 340, 5).unwrap();
        let mut g = Graph::new();
        let x = g.input(batch(2, 6));
        let out = m.forward(&mut g, x, true).unwrap();
        let loss = g.sum(out.generated).unwrap();
        let grads = g.backward(loss).unwrap();
        for stage in Stage::ALL {
            let norm: f64 = m
                .backbone
                .params()
                .groups()
                .iter()
                .zip(&out.backbone_params)
                .filter(|(grp, _)| grp.as_str() == stage.name())
                .map(|(_, id)| grads.get(*id).map_or(0.0, |t| t.norm()))
                .sum();
            assert!(norm > 0.0, "no EEG gradient reaches {}", stage.name());
        }
    }

    #[test]
    fn teacher_logits_reproducible() {
        let x = batch(2, 3);
        let a = MiniCor::new(BackboneSpec::default(), 11).unwrap();
        let b = MiniCor::new(BackboneSpec::default(), 11).unwrap();
        let la = a.features(&x).unwrap().logits;
        let lb = b.features(&x).unwrap().logits;
        assert_eq!(la, lb);
    }
}
