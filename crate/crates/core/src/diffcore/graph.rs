use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::kernels::{self, Cache};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The operation that produced a node.
///
/// Shapes never broadcast: every op checks its operands and fails with
/// [`Error::Shape`] naming the op when they disagree.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// A value inserted directly (input or parameter).
    Leaf,
    /// `x[N,I] · w[O,I]ᵀ (+ b[O])`.
    Dense,
    /// `x[N,C,H,W] ⋆ w[O,C,KH,KW] (+ b[O])`, zero padding.
    Conv2d {
        stride: usize,
        pad: usize,
    },
    Relu,
    /// Square-window max pooling; padding never wins a window.
    MaxPool2d {
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    /// `[N,C,H,W] -> [N,C]` spatial mean.
    GlobalAvgPool,
    Concat {
        axis: usize,
    },
    Reshape {
        shape: Vec<usize>,
    },
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddScalar(f64),
    /// Sum of all elements, shape `[1]`.
    Sum,
    /// Mean of all elements, shape `[1]`.
    Mean,
    /// Batch-mean of `-log softmax(logits)[label]`.
    SoftmaxCrossEntropy {
        labels: Vec<usize>,
    },
    /// Mean of squared differences over all elements.
    Mse,
    /// `[N,D] x [M,D] -> [N,M]` Pearson correlations between rows.
    PearsonMatrix {
        eps: f64,
    },
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Dense => "dense",
            OpKind::Conv2d { .. } => "conv2d",
            OpKind::Relu => "relu",
            OpKind::MaxPool2d { .. } => "maxpool2d",
            OpKind::GlobalAvgPool => "global_avg_pool",
            OpKind::Concat { .. } => "concat",
            OpKind::Reshape { .. } => "reshape",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Scale(_) => "scale",
            OpKind::AddScalar(_) => "add_scalar",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            OpKind::Mse => "mse",
            OpKind::PearsonMatrix { .. } => "pearson_matrix",
        }
    }

    fn arity(&self) -> (usize, usize) {
        match self {
            OpKind::Leaf => (0, 0),
            OpKind::Dense | OpKind::Conv2d { .. } => (2, 3),
            OpKind::Concat { .. } => (1, usize::MAX),
            OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::Mse
            | OpKind::PearsonMatrix { .. } => (2, 2),
            _ => (1, 1),
        }
    }
}

#[derive(Debug)]
struct Node {
    kind: OpKind,
    inputs: Vec<NodeId>,
    value: Tensor,
    requires_grad: bool,
    cache: Cache,
}

/// A tape of tensor operations in topological (insertion) order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node that requires one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Moves a gradient out, leaving `None` behind.
    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant: gradients never flow into it.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(OpKind::Leaf, Vec::new(), value, false, Cache::None)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(OpKind::Leaf, Vec::new(), value, true, Cache::None)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn kind(&self, id: NodeId) -> &OpKind {
        &self.nodes[id.0].kind
    }

    fn push(
        &mut self,
        kind: OpKind,
        inputs: Vec<NodeId>,
        value: Tensor,
        requires_grad: bool,
        cache: Cache,
    ) -> NodeId {
        self.nodes.push(Node {
            kind,
            inputs,
            value,
            requires_grad,
            cache,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Records `kind` applied to `inputs` and returns the new node.
    pub fn apply(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        let (lo, hi) = kind.arity();
        if inputs.len() < lo || inputs.len() > hi {
            return Err(Error::shape(
                kind.name(),
                format!("expects {lo}..={hi} inputs, got {}", inputs.len()),
            ));
        }
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::invalid(format!("unknown node {}", bad.0)));
        }
        let vals: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let (value, cache) = eval(&kind, &vals)?;
        let requires_grad = inputs.iter().any(|id| self.nodes[id.0].requires_grad);
        Ok(self.push(kind, inputs.to_vec(), value, requires_grad, cache))
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Dense, &[x, w, b])
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        self.apply(OpKind::Conv2d { stride, pad }, &[x, w, b])
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Relu, &[x])
    }

    pub fn maxpool2d(
        &mut self,
        x: NodeId,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        self.apply(
            OpKind::MaxPool2d {
                kernel,
                stride,
                pad,
            },
            &[x],
        )
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::GlobalAvgPool, &[x])
    }

    pub fn concat(&mut self, xs: &[NodeId], axis: usize) -> Result<NodeId> {
        self.apply(OpKind::Concat { axis }, xs)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.apply(
            OpKind::Reshape {
                shape: shape.to_vec(),
            },
            &[x],
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.apply(OpKind::Scale(factor), &[x])
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.apply(OpKind::AddScalar(c), &[x])
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sum, &[x])
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mean, &[x])
    }

    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        self.apply(
            OpKind::SoftmaxCrossEntropy {
                labels: labels.to_vec(),
            },
            &[logits],
        )
    }

    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mse, &[a, b])
    }

    pub fn pearson_matrix(&mut self, a: NodeId, b: NodeId, eps: f64) -> Result<NodeId> {
        self.apply(OpKind::PearsonMatrix { eps }, &[a, b])
    }

    /// Reverse-mode sweep from a one-element `loss` node.
    ///
    /// Every node that requires a gradient and lies on a path to `loss`
    /// receives one with the node's shape; the loss itself receives 1.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let root = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::invalid(format!("unknown node {}", loss.0)))?;
        if root.value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", root.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(root.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if node.inputs.is_empty() || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|id| self.nodes[id.0].requires_grad)
                .collect();
            let vals: Vec<&Tensor> = node
                .inputs
                .iter()
                .map(|id| &self.nodes[id.0].value)
                .collect();
            let input_grads = backprop(&node.kind, &vals, &node.value, &node.cache, &g, &needs);
            grads[idx] = Some(g);
            for ((id, need), ig) in node.inputs.iter().zip(needs).zip(input_grads) {
                if !need {
                    continue;
                }
                let Some(ig) = ig else { continue };
                match &mut grads[id.0] {
                    Some(acc) => {
                        for (a, v) in acc.data_mut().iter_mut().zip(ig.data()) {
                            *a += v;
                        }
                    }
                    slot @ None => *slot = Some(ig),
                }
            }
        }
        // Drop gradients of constants that were seeded by the root itself.
        for (idx, g) in grads.iter_mut().enumerate() {
            if !self.nodes[idx].requires_grad && idx != loss.0 {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }
}

/// Evaluates one op outside any graph.
pub fn forward(kind: OpKind, inputs: &[Tensor]) -> Result<Tensor> {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().cloned().map(|t| g.input(t)).collect();
    let out = g.apply(kind, &ids)?;
    Ok(g.nodes.swap_remove(out.0).value)
}

fn eval(kind: &OpKind, x: &[&Tensor]) -> Result<(Tensor, Cache)> {
    let plain = |t: Tensor| (t, Cache::None);
    Ok(match kind {
        OpKind::Leaf => {
            return Err(Error::invalid(
                "leaf nodes are created with input()/param()",
            ))
        }
        OpKind::Dense => plain(kernels::dense(x[0], x[1], x.get(2).copied())?),
        OpKind::Conv2d { stride, pad } => {
            let (y, cols) = kernels::conv2d(x[0], x[1], x.get(2).copied(), *stride, *pad)?;
            (y, Cache::Cols(cols))
        }
        OpKind::Relu => plain(x[0].map(|v| v.max(0.0))),
        OpKind::MaxPool2d {
            kernel,
            stride,
            pad,
        } => {
            let (y, arg) = kernels::maxpool2d(x[0], *kernel, *stride, *pad)?;
            (y, Cache::Argmax(arg))
        }
        OpKind::GlobalAvgPool => plain(kernels::global_avg_pool(x[0])?),
        OpKind::Concat { axis } => plain(kernels::concat(x, *axis)?),
        OpKind::Reshape { shape } => plain(x[0].clone().reshape(shape)?),
        OpKind::Add => plain(kernels::zip_with("add", x[0], x[1], |a, b| a + b)?),
        OpKind::Sub => plain(kernels::zip_with("sub", x[0], x[1], |a, b| a - b)?),
        OpKind::Mul => plain(kernels::zip_with("mul", x[0], x[1], |a, b| a * b)?),
        OpKind::Scale(c) => plain(x[0].map(|v| v * c)),
        OpKind::AddScalar(c) => plain(x[0].map(|v| v + c)),
        OpKind::Sum => plain(Tensor::scalar(x[0].sum())),
        OpKind::Mean => plain(Tensor::scalar(x[0].sum() / x[0].numel() as f64)),
        OpKind::SoftmaxCrossEntropy { labels } => {
            let (loss, probs) = kernels::softmax_cross_entropy(x[0], labels)?;
            (loss, Cache::Probs(probs))
        }
        OpKind::Mse => plain(kernels::mse(x[0], x[1])?),
        OpKind::PearsonMatrix { eps } => kernels::pearson_matrix(x[0], x[1], *eps)?,
    })
}

fn backprop(
    kind: &OpKind,
    x: &[&Tensor],
    out: &Tensor,
    cache: &Cache,
    g: &Tensor,
    needs: &[bool],
) -> Vec<Option<Tensor>> {
    let gscalar = || g.data()[0];
    match kind {
        OpKind::Leaf => Vec::new(),
        OpKind::Dense => {
            let (gx, gw, gb) = kernels::dense_backward(x[0], x[1], x.len() == 3, g);
            vec![Some(gx), Some(gw), gb]
        }
        OpKind::Conv2d { stride, pad } => {
            let Cache::Cols(cols) = cache else {
                unreachable!("conv cache missing")
            };
            let (gx, gw, gb) =
                kernels::conv2d_backward(x[0], x[1], x.len() == 3, *stride, *pad, cols, g);
            vec![needs[0].then_some(gx), Some(gw), gb]
        }
        OpKind::Relu => vec![Some(kernels::relu_backward(x[0], g))],
        OpKind::MaxPool2d { .. } => {
            let Cache::Argmax(arg) = cache else {
                unreachable!("maxpool cache missing")
            };
            vec![Some(kernels::maxpool2d_backward(x[0], arg, g))]
        }
        OpKind::GlobalAvgPool => vec![Some(kernels::global_avg_pool_backward(x[0], g))],
        OpKind::Concat { axis } => kernels::concat_backward(x, *axis, g)
            .into_iter()
            .map(Some)
            .collect(),
        OpKind::Reshape { .. } => vec![Some(
            g.clone()
                .reshape(x[0].shape())
                .expect("reshape gradient keeps numel"),
        )],
        OpKind::Add => vec![Some(g.clone()), Some(g.clone())],
        OpKind::Sub => vec![Some(g.clone()), Some(g.map(|v| -v))],
        OpKind::Mul => {
            let ga = kernels::zip_with("mul", g, x[1], |a, b| a * b).expect("same shape");
            let gb = kernels::zip_with("mul", g, x[0], |a, b| a * b).expect("same shape");
            vec![Some(ga), Some(gb)]
        }
        OpKind::Scale(c) => vec![Some(g.map(|v| v * c))],
        OpKind::AddScalar(_) => vec![Some(g.clone())],
        OpKind::Sum => vec![Some(Tensor::full(x[0].shape(), gscalar()))],
        OpKind::Mean => vec![Some(Tensor::full(
            x[0].shape(),
            gscalar() / x[0].numel() as f64,
        ))],
        OpKind::SoftmaxCrossEntropy { labels } => {
            let Cache::Probs(probs) = cache else {
                unreachable!("softmax cache missing")
            };
            vec![Some(kernels::softmax_cross_entropy_backward(
                x[0],
                labels,
                probs,
                gscalar(),
            ))]
        }
        OpKind::Mse => {
            let (ga, gb) = kernels::mse_backward(x[0], x[1], gscalar());
            vec![Some(ga), Some(gb)]
        }
        OpKind::PearsonMatrix { eps } => {
            let (ga, gb) = kernels::pearson_matrix_backward(x[0], x[1], out, cache, g, *eps);
            vec![Some(ga), Some(gb)]
        }
    }
}
