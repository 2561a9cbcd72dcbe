//! MiniCor: a miniature four-stage recurrent convolutional backbone.
//!
//! Structure per stage:
//!
//! * **V1**: 3×3 conv (stride 2) → ReLU → 3×3 max-pool (stride 2) → 3×3 conv → ReLU.
//! * **V2, V4, IT**: a 1×1 input conv, then a bottleneck block
//!   (1×1 expand → 3×3 → 1×1 project, residual add, ReLU) applied
//!   `recurrences[stage]` times with shared weights. The first pass
//!   downsamples with stride 2 and routes the residual through a strided
//!   1×1 skip conv; later passes use the identity skip.
//!
//! The full-size reference network uses a 7×7 stride-2 V1 conv on 224×224
//! inputs and a bottleneck expansion of 4; the defaults here keep the
//! topology but shrink it to 32×32 inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::params::ParamSet;

/// The four visual stages, in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    V1,
    V2,
    V4,
    It,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::V1, Stage::V2, Stage::V4, Stage::It];

    pub fn name(self) -> &'static str {
        match self {
            Stage::V1 => "V1",
            Stage::V2 => "V2",
            Stage::V4 => "V4",
            Stage::It => "IT",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneSpec {
    /// `[channels, height, width]` of input images.
    pub input: [usize; 3],
    /// Output channels of V1, V2, V4, IT.
    pub widths: [usize; 4],
    /// Passes through each stage. V1 is not recurrent and must be 1.
    pub recurrences: [usize; 4],
    /// Channel multiplier inside the bottleneck.
    pub expansion: usize,
    pub classes: usize,
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec {
            input: [3, 32, 32],
            widths: [16, 32, 64, 128],
            recurrences: [1, 2, 4, 2],
            expansion: 2,
            classes: 16,
        }
    }
}

impl BackboneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.recurrences[0] != 1 {
            return Err(Error::invalid("V1 is not recurrent; its count must be 1"));
        }
        if self.recurrences.contains(&0) || self.widths.contains(&0) || self.expansion == 0 {
            return Err(Error::invalid(format!(
                "widths, recurrences and expansion must be positive: {self:?}"
            )));
        }
        if self.input.contains(&0) {
            return Err(Error::invalid(format!("bad input size {:?}", self.input)));
        }
        Ok(())
    }

    /// `[C, H, W]` of each stage output.
    pub fn stage_shapes(&self) -> [[usize; 3]; 4] {
        let down = |s: usize| (s - 1) / 2 + 1; // k=3 p=1 s=2, or k=1 p=0 s=2
        let [_, mut h, mut w] = self.input;
        let mut out = [[0; 3]; 4];
        // V1: conv s2 then pool s2
        h = down(down(h));
        w = down(down(w));
        out[0] = [self.widths[0], h, w];
        for s in 1..4 {
            h = down(h);
            w = down(w);
            out[s] = [self.widths[s], h, w];
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvRef {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct BlockLayout {
    conv_input: ConvRef,
    skip: ConvRef,
    conv1: ConvRef,
    conv2: ConvRef,
    conv3: ConvRef,
}

#[derive(Debug, Clone)]
struct Layout {
    v1_conv1: ConvRef,
    v1_conv2: ConvRef,
    blocks: [BlockLayout; 3],
    fc: ConvRef,
}

/// Node handles for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct StageOutputs {
    pub stages: [NodeId; 4],
    pub logits: NodeId,
}

/// Concrete values of one forward pass.
#[derive(Debug, Clone)]
pub struct StageFeatures {
    /// `[N, C, H, W]` output of each stage.
    pub stages: [Tensor; 4],
    pub logits: Tensor,
}

/// Multiplier on the He bound of each block's last conv. Without
/// normalization layers, full-scale residual branches make activations grow
/// by roughly an order of magnitude per recurrent stage.
pub const RESIDUAL_INIT_SCALE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct MiniCor {
    spec: BackboneSpec,
    params: ParamSet,
    layout: Layout,
}

impl MiniCor {
    /// Builds a backbone with He-uniform weights and zero biases drawn
    /// from a generator seeded with `seed`. Residual branch outputs start
    /// at [`RESIDUAL_INIT_SCALE`] of that.
    pub fn new(spec: BackboneSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let conv = |params: &mut ParamSet,
                    rng: &mut ChaCha8Rng,
                    name: String,
                    group: &str,
                    out: usize,
                    inp: usize,
                    k: usize| {
            let w = params.push_he(
                format!("{name}.weight"),
                group,
                &[out, inp, k, k],
                inp * k * k,
                rng,
            );
            let b = params.push(format!("{name}.bias"), group, Tensor::zeros(&[out]));
            ConvRef { w, b }
        };

        let [c_in, _, _] = spec.input;
        let w0 = spec.widths[0];
        let v1_conv1 = conv(&mut params, &mut rng, "V1.conv1".into(), "V1", w0, c_in, 3);
        let v1_conv2 = conv(&mut params, &mut rng, "V1.conv2".into(), "V1", w0, w0, 3);

        let mut blocks = Vec::with_capacity(3);
        for s in 1..4 {
            let group = Stage::ALL[s].name();
            let (inp, out) = (spec.widths[s - 1], spec.widths[s]);
            let mid = out * spec.expansion;
            let mut c = |name: &str, o, i, k| {
                conv(
                    &mut params,
                    &mut rng,
                    format!("{group}.{name}"),
                    group,
                    o,
                    i,
                    k,
                )
            };
            blocks.push(BlockLayout {
                conv_input: c("conv_input", out, inp, 1),
                skip: c("skip", out, out, 1),
                conv1: c("conv1", mid, out, 1),
                conv2: c("conv2", mid, mid, 3),
                conv3: c("conv3", out, mid, 1),
            });
            let conv3 = blocks[s - 1].conv3.w;
            for v in params.values_mut()[conv3].data_mut() {
                *v *= RESIDUAL_INIT_SCALE;
            }
        }

        let it = spec.widths[3];
        let fc_w = params.push_he(
            "decoder.weight".into(),
            "decoder",
            &[spec.classes, it],
            it,
            &mut rng,
        );
        let fc_b = params.push(
            "decoder.bias".into(),
            "decoder",
            Tensor::zeros(&[spec.classes]),
        );

        Ok(MiniCor {
            spec,
            params,
            layout: Layout {
                v1_conv1,
                v1_conv2,
                blocks: [blocks[0], blocks[1], blocks[2]],
                fc: ConvRef { w: fc_w, b: fc_b },
            },
        })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Records the forward pass on `g` using parameter nodes from
    /// [`ParamSet::bind`].
    pub fn forward(&self, g: &mut Graph, p: &[NodeId], images: NodeId) -> Result<StageOutputs> {
        let shape = g.value(images).shape();
        if shape.len() != 4 || shape[1..] != self.spec.input {
            return Err(Error::shape(
                "minicor",
                format!("images must be N x {:?}, got {:?}", self.spec.input, shape),
            ));
        }
        let conv =
            |g: &mut Graph, x, c: ConvRef, stride, pad| g.conv2d(x, p[c.w], p[c.b], stride, pad);

        let l = &self.layout;
        let x = conv(g, images, l.v1_conv1, 2, 1)?;
        let x = g.relu(x)?;
        let x = g.maxpool2d(x, 3, 2, 1)?;
        let x = conv(g, x, l.v1_conv2, 1, 1)?;
        let v1 = g.relu(x)?;

        let mut stages = [v1; 4];
        let mut x = v1;
        for (s, block) in l.blocks.iter().enumerate() {
            x = conv(g, x, block.conv_input, 1, 0)?;
            for t in 0..self.spec.recurrences[s + 1] {
                let (skip, stride) = if t == 0 {
                    (conv(g, x, block.skip, 2, 0)?, 2)
                } else {
                    (x, 1)
                };
                let h = conv(g, x, block.conv1, 1, 0)?;
                let h = g.relu(h)?;
                let h = conv(g, h, block.conv2, stride, 1)?;
                let h = g.relu(h)?;
                let h = conv(g, h, block.conv3, 1, 0)?;
                let h = g.add(h, skip)?;
                x = g.relu(h)?;
            }
            stages[s + 1] = x;
        }

        let pooled = g.global_avg_pool(x)?;
        let logits = g.dense(pooled, p[l.fc.w], p[l.fc.b])?;
        Ok(StageOutputs { stages, logits })
    }

    /// Evaluates all stage outputs and logits without tracking gradients.
    /// Images are processed in chunks; results do not depend on chunking.
    pub fn features(&self, images: &Tensor) -> Result<StageFeatures> {
        const CHUNK: usize = 32;
        let n = images.shape().first().copied().unwrap_or(0);
        let mut stage_data: [Vec<f64>; 4] = Default::default();
        let mut logit_data = Vec::new();
        let mut shapes: Option<[Vec<usize>; 4]> = None;
        let mut start = 0;
        while start < n {
            let rows: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
            let batch = images.select_rows(&rows)?;
            let mut g = Graph::new();
            let p = self.params.bind(&mut g, false);
            let x = g.input(batch);
            let out = self.forward(&mut g, &p, x)?;
            for (k, id) in out.stages.iter().enumerate() {
                stage_data[k].extend_from_slice(g.value(*id).data());
            }
            logit_data.extend_from_slice(g.value(out.logits).data());
            shapes.get_or_insert_with(|| out.stages.map(|id| g.value(id).shape().to_vec()));
            start += CHUNK;
        }
        let shapes = shapes.ok_or_else(|| Error::invalid("features() on an empty image batch"))?;
        let stages = [0, 1, 2, 3].map(|k| {
            let mut s = shapes[k].clone();
            s[0] = n;
            Tensor::new(s, std::mem::take(&mut stage_data[k]))
        });
        let [a, b, c, d] = stages;
        Ok(StageFeatures {
            stages: [a?, b?, c?, d?],
            logits: Tensor::new(vec![n, self.spec.classes], logit_data)?,
        })
    }
}
