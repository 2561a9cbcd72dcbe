//! Central finite-difference gradient checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::Tensor;

use super::{forward, Graph, NodeId, OpKind};

/// Worst elementwise disagreement between analytic and numeric gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Compares `backward` against central differences with step `h` for
/// every element of every input.
///
/// `build` receives a fresh graph and one parameter node per input and
/// must return a scalar loss node.
pub fn finite_difference_check<F>(inputs: &[Tensor], h: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let eval = |vals: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = vals.iter().cloned().map(|v| g.param(v)).collect();
        let loss = build(&mut g, &ids)?;
        g.value(loss).item()
    };

    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().cloned().map(|v| g.param(v)).collect();
    let loss = build(&mut g, &ids)?;
    let grads = g.backward(loss)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    let mut work = inputs.to_vec();
    for (k, id) in ids.iter().enumerate() {
        let analytic = grads
            .get(*id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        for e in 0..inputs[k].numel() {
            let orig = inputs[k].data()[e];
            work[k].data_mut()[e] = orig + h;
            let up = eval(&work)?;
            work[k].data_mut()[e] = orig - h;
            let down = eval(&work)?;
            work[k].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[e];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(1e-6);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

/// A random instance of one op kind, for gradient checks.
pub struct OpCase {
    pub name: &'static str,
    pub kind: OpKind,
    pub inputs: Vec<Tensor>,
    /// Random cotangent that the op output is contracted with.
    pub weight: Tensor,
}

fn away_from_zero(t: Tensor) -> Tensor {
    t.map(|v| {
        if v.abs() < 0.05 {
            v.signum() * 0.05 + v
        } else {
            v
        }
    })
}

/// One random instance of every differentiable op kind.
pub fn op_cases(seed: u64) -> Vec<OpCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |shape: &[usize]| Tensor::uniform(shape, -1.0, 1.0, &mut rng);
    let mut cases = vec![
        (
            "dense",
            OpKind::Dense,
            vec![u(&[3, 4]), u(&[5, 4]), u(&[5])],
        ),
        (
            "conv2d_s1_p1",
            OpKind::Conv2d { stride: 1, pad: 1 },
            vec![u(&[2, 2, 5, 5]), u(&[3, 2, 3, 3]), u(&[3])],
        ),
        (
            "conv2d_s2_p1",
            OpKind::Conv2d { stride: 2, pad: 1 },
            vec![u(&[1, 3, 6, 6]), u(&[2, 3, 3, 3]), u(&[2])],
        ),
        (
            "conv2d_1x1_s2",
            OpKind::Conv2d { stride: 2, pad: 0 },
            vec![u(&[2, 3, 4, 4]), u(&[4, 3, 1, 1])],
        ),
        ("relu", OpKind::Relu, vec![away_from_zero(u(&[4, 5]))]),
        (
            "maxpool2d",
            OpKind::MaxPool2d {
                kernel: 3,
                stride: 2,
                pad: 1,
            },
            vec![u(&[1, 2, 6, 6])],
        ),
        (
            "global_avg_pool",
            OpKind::GlobalAvgPool,
            vec![u(&[2, 3, 4, 4])],
        ),
        (
            "concat",
            OpKind::Concat { axis: 1 },
            vec![u(&[2, 3]), u(&[2, 4])],
        ),
        (
            "reshape",
            OpKind::Reshape { shape: vec![3, 4] },
            vec![u(&[2, 3, 2])],
        ),
        ("add", OpKind::Add, vec![u(&[3, 4]), u(&[3, 4])]),
        ("sub", OpKind::Sub, vec![u(&[3, 4]), u(&[3, 4])]),
        ("mul", OpKind::Mul, vec![u(&[3, 4]), u(&[3, 4])]),
        ("scale", OpKind::Scale(-2.5), vec![u(&[6])]),
        ("add_scalar", OpKind::AddScalar(0.7), vec![u(&[6])]),
        ("sum", OpKind::Sum, vec![u(&[2, 5])]),
        ("mean", OpKind::Mean, vec![u(&[2, 5])]),
        ("mse", OpKind::Mse, vec![u(&[3, 6]), u(&[3, 6])]),
        (
            "pearson_matrix",
            OpKind::PearsonMatrix { eps: 1e-8 },
            vec![u(&[3, 8]), u(&[4, 8])],
        ),
    ];
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
    cases.push((
        "softmax_cross_entropy",
        OpKind::SoftmaxCrossEntropy { labels },
        vec![Tensor::uniform(&[4, 5], -2.0, 2.0, &mut rng)],
    ));

    cases
        .into_iter()
        .map(|(name, kind, inputs)| {
            let out = forward(kind.clone(), &inputs).expect("case shapes are valid");
            let weight = Tensor::uniform(out.shape(), -1.0, 1.0, &mut rng);
            OpCase {
                name,
                kind,
                inputs,
                weight,
            }
        })
        .collect()
}
