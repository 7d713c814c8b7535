use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::shape(
                    "tensor",
                    format!("row {i} has {} entries, expected {cols}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(rows, cols)` view: a vector is one row, a matrix is itself.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [n] => Ok((1, *n)),
            [r, c] => Ok((*r, *c)),
            other => Err(Error::shape("dims", format!("expected rank 1 or 2, got {other:?}"))),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let cols = *self.shape.last().unwrap_or(&0);
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        let cols = *self.shape.last().unwrap_or(&0);
        self.data[r * cols + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Result shape for a batch of `rows` outputs with `cols` features,
    /// preserving vector-ness of the input.
    fn batch_shape(like: &Tensor, cols: usize) -> Vec<usize> {
        if like.shape.len() == 1 {
            vec![cols]
        } else {
            vec![like.shape[0], cols]
        }
    }
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    let (batch, input) = x.dims2()?;
    let (out, w_in) = match w.shape() {
        [o, i] => (*o, *i),
        other => return Err(Error::shape("affine", format!("weight must be a matrix, got {other:?}"))),
    };
    if w_in != input {
        return Err(Error::shape(
            "affine",
            format!("input has {input} features but weight is {out}x{w_in}"),
        ));
    }
    if b.shape() != [out] {
        return Err(Error::shape(
            "affine",
            format!("bias shape {:?} does not match {out} outputs", b.shape()),
        ));
    }
    Ok((batch, input, out))
}

/// `x·Wᵀ + b` for each row of `x`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    affine_signed(x, w, b, 1.0)
}

/// `sign·(x·Wᵀ) + b`. A sign of −1 gives a layer that is non-increasing in its
/// input whenever `W` is non-negative.
pub fn affine_signed(x: &Tensor, w: &Tensor, b: &Tensor, sign: f64) -> Result<Tensor> {
    let (batch, input, out) = check_affine(x, w, b)?;
    // Wᵀ so the inner loop is a contiguous axpy over outputs.
    let mut wt = vec![0.0; input * out];
    for o in 0..out {
        for i in 0..input {
            wt[i * out + o] = sign * w.data[o * input + i];
        }
    }
    let mut data = Vec::with_capacity(batch * out);
    for r in 0..batch {
        data.extend_from_slice(&b.data);
        let acc = &mut data[r * out..(r + 1) * out];
        for (i, &xi) in x.data[r * input..(r + 1) * input].iter().enumerate() {
            if xi != 0.0 {
                axpy(acc, xi, &wt[i * out..(i + 1) * out]);
            }
        }
    }
    Ok(Tensor {
        shape: Tensor::batch_shape(x, out),
        data,
    })
}

/// Gradients of `affine_signed` w.r.t. `(x, w, b)` given the upstream gradient.
pub(crate) fn affine_backward(
    x: &Tensor,
    w: &Tensor,
    sign: f64,
    upstream: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (batch, input) = x.dims2().expect("checked in forward");
    let out = w.shape[0];
    let mut dx = vec![0.0; batch * input];
    let mut dw = vec![0.0; out * input];
    let mut db = vec![0.0; out];
    for r in 0..batch {
        let g = &upstream.data[r * out..(r + 1) * out];
        let xr = &x.data[r * input..(r + 1) * input];
        let dxr = &mut dx[r * input..(r + 1) * input];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            db[o] += go;
            let sg = sign * go;
            axpy(dxr, sg, &w.data[o * input..(o + 1) * input]);
            axpy(&mut dw[o * input..(o + 1) * input], sg, xr);
        }
    }
    (
        Tensor {
            shape: x.shape.clone(),
            data: dx,
        },
        Tensor {
            shape: w.shape.clone(),
            data: dw,
        },
        Tensor {
            shape: vec![out],
            data: db,
        },
    )
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// ReLU on feature columns `< split`, its point reflection `min(0, x)` on the
/// rest. Both halves are non-decreasing, so the layer stays monotone while the
/// reflected units supply concave kinks that plain ReLU cannot.
pub fn mixed_relu(x: &Tensor, split: usize) -> Result<Tensor> {
    let (_, cols) = x.dims2()?;
    if split > cols {
        return Err(Error::shape("mixed_relu", format!("split {split} exceeds {cols} features")));
    }
    let mut y = x.clone();
    for (k, v) in y.data.iter_mut().enumerate() {
        *v = if k % cols < split { v.max(0.0) } else { v.min(0.0) };
    }
    Ok(y)
}

pub fn neg(x: &Tensor) -> Tensor {
    x.map(|v| -v)
}

/// Concatenates two batches along the feature axis.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ra, ca) = a.dims2()?;
    let (rb, cb) = b.dims2()?;
    if ra != rb || a.shape.len() != b.shape.len() {
        return Err(Error::shape(
            "concat",
            format!("cannot join {:?} with {:?}", a.shape, b.shape),
        ));
    }
    let mut data = Vec::with_capacity(ra * (ca + cb));
    for r in 0..ra {
        data.extend_from_slice(&a.data[r * ca..(r + 1) * ca]);
        data.extend_from_slice(&b.data[r * cb..(r + 1) * cb]);
    }
    Ok(Tensor {
        shape: Tensor::batch_shape(a, ca + cb),
        data,
    })
}

fn check_aggregate(holdings: &Tensor, x: &Tensor) -> Result<(usize, usize, usize)> {
    let (banks, assets) = match holdings.shape() {
        [n, m] => (*n, *m),
        other => {
            return Err(Error::shape(
                "aggregate",
                format!("holdings must be an NxM matrix, got {other:?}"),
            ))
        }
    };
    let (batch, cols) = x.dims2()?;
    if cols != banks * assets {
        return Err(Error::shape(
            "aggregate",
            format!("expected {} per-bank liquidations ({banks}x{assets}), got {cols}", banks * assets),
        ));
    }
    Ok((batch, banks, assets))
}

/// Market-wide liquidation per asset: `out[m] = Σ_n a[n][m]·x[n·M + m]`, where
/// `x` holds per-bank liquidations flattened bank-major.
pub fn aggregate(holdings: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (batch, banks, assets) = check_aggregate(holdings, x)?;
    let k = banks * assets;
    let mut data = vec![0.0; batch * assets];
    for r in 0..batch {
        let xr = &x.data[r * k..(r + 1) * k];
        let out = &mut data[r * assets..(r + 1) * assets];
        for n in 0..banks {
            for m in 0..assets {
                out[m] += holdings.data[n * assets + m] * xr[n * assets + m];
            }
        }
    }
    Ok(Tensor {
        shape: Tensor::batch_shape(x, assets),
        data,
    })
}

pub(crate) fn aggregate_backward(holdings: &Tensor, x: &Tensor, upstream: &Tensor) -> Tensor {
    let assets = holdings.shape[1];
    let k = holdings.len();
    let batch = x.len() / k;
    let mut dx = vec![0.0; x.len()];
    for r in 0..batch {
        for (j, d) in dx[r * k..(r + 1) * k].iter_mut().enumerate() {
            *d = holdings.data[j] * upstream.data[r * assets + j % assets];
        }
    }
    Tensor {
        shape: x.shape.clone(),
        data: dx,
    }
}

/// Mean of squared differences over every entry.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape != target.shape {
        return Err(Error::shape(
            "mse",
            format!("prediction {:?} vs target {:?}", pred.shape, target.shape),
        ));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mse of an empty tensor".into()));
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}
