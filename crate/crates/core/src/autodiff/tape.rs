use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine { x: Var, w: Var, b: Var, sign: f64 },
    Relu(Var),
    MixedRelu { x: Var, split: usize },
    Neg(Var),
    Concat(Var, Var),
    Aggregate { x: Var, holdings: Tensor },
    Mse { pred: Var, target: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of primitive applications. Parents always precede
/// their children, so a single reverse sweep visits every node once.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.affine_signed(x, w, b, 1.0)
    }

    pub fn affine_signed(&mut self, x: Var, w: Var, b: Var, sign: f64) -> Result<Var> {
        let y = tensor::affine_signed(self.value(x), self.value(w), self.value(b), sign)?;
        Ok(self.push(y, Op::Affine { x, w, b, sign }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = tensor::relu(self.value(x));
        self.push(y, Op::Relu(x))
    }

    pub fn mixed_relu(&mut self, x: Var, split: usize) -> Result<Var> {
        let y = tensor::mixed_relu(self.value(x), split)?;
        Ok(self.push(y, Op::MixedRelu { x, split }))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let y = tensor::neg(self.value(x));
        self.push(y, Op::Neg(x))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = tensor::concat(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::Concat(a, b)))
    }

    /// Holdings are constants: no gradient flows into them.
    pub fn aggregate(&mut self, holdings: &Tensor, x: Var) -> Result<Var> {
        let y = tensor::aggregate(holdings, self.value(x))?;
        Ok(self.push(
            y,
            Op::Aggregate {
                x,
                holdings: holdings.clone(),
            },
        ))
    }

    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let loss = tensor::mse(self.value(pred), target)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.clone(),
            },
        ))
    }

    /// Reverse sweep from a scalar node. Every node that the loss depends on
    /// receives a gradient, parameters and plain inputs alike.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, node {} has shape {:?}",
                loss.0,
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Affine { x, w, b, sign } => {
                    let (dx, dw, db) =
                        tensor::affine_backward(self.value(*x), self.value(*w), *sign, &g);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *b, db);
                }
                Op::Relu(x) => {
                    // Subgradient at exactly zero is taken as 0.
                    let mut dx = g.clone();
                    for (d, &v) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MixedRelu { x, split } => {
                    let xv = self.value(*x);
                    let cols = xv.dims2()?.1;
                    let mut dx = g.clone();
                    for (k, (d, &v)) in dx.data_mut().iter_mut().zip(xv.data()).enumerate() {
                        let active = if k % cols < *split { v > 0.0 } else { v < 0.0 };
                        if !active {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Neg(x) => accumulate(&mut grads, *x, tensor::neg(&g)),
                Op::Concat(a, b) => {
                    let (rows, ca) = self.value(*a).dims2()?;
                    let cb = self.value(*b).dims2()?.1;
                    let mut da = Vec::with_capacity(rows * ca);
                    let mut db = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        let row = &g.data()[r * (ca + cb)..(r + 1) * (ca + cb)];
                        da.extend_from_slice(&row[..ca]);
                        db.extend_from_slice(&row[ca..]);
                    }
                    accumulate(&mut grads, *a, Tensor::new(self.value(*a).shape().to_vec(), da)?);
                    accumulate(&mut grads, *b, Tensor::new(self.value(*b).shape().to_vec(), db)?);
                }
                Op::Aggregate { x, holdings } => {
                    let dx = tensor::aggregate_backward(holdings, self.value(*x), &g);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Mse { pred, target } => {
                    let p = self.value(*pred);
                    let scale = 2.0 * g.data()[0] / p.len() as f64;
                    let data = p
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(p, t)| scale * (p - t))
                        .collect();
                    accumulate(&mut grads, *pred, Tensor::new(p.shape().to_vec(), data)?);
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Output of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`, or `None` when the loss does not
    /// depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but materializes zeros for unreached nodes.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }
}
