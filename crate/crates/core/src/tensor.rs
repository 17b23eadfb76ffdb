//! Dense order-d tensors over coordinate spaces, multi-index arithmetic,
//! matricization, mode contractions and weighted entrywise p-norms.
//!
//! Conventions fixed here and relied on everywhere else:
//! * coefficients are stored row-major, last index fastest;
//! * matricization in mode `mu` puts mode `mu` on rows and flattens the
//!   remaining modes in ascending mode order, row-major.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("tensor order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("mode {mode} has size 0")]
    ZeroDim { mode: usize },
    #[error("data length {got} does not match shape volume {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("entry at flat index {0} is not finite")]
    NonFinite(usize),
    #[error("mode {mode} out of range for order {order}")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("matrix has {cols} columns, mode {mode} has size {dim}")]
    ContractionMismatch { cols: usize, mode: usize, dim: usize },
    #[error("elementary tensor needs at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("vector for mode {mode} is empty")]
    EmptyVector { mode: usize },
    #[error("norm exponent must satisfy 1 < p < inf, got {0}")]
    InvalidExponent(f64),
    #[error("weights must be positive")]
    NonPositiveWeight,
    #[error("weight vector length {got} does not match mode size {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("ambient norm requires one exponent shared by all modes, got {0} and {1}")]
    MixedExponents(f64, f64),
    #[error("norm has {got} mode entries, tensor has order {expected}")]
    NormOrderMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed tensor file: {0}")]
    Format(String),
}

/// Mode sizes (n_1,...,n_d) of an order-d tensor, d >= 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self, TensorError> {
        if dims.len() < 2 {
            return Err(TensorError::OrderTooSmall(dims.len()));
        }
        for (mode, &n) in dims.iter().enumerate() {
            if n == 0 {
                return Err(TensorError::ZeroDim { mode });
            }
        }
        Ok(Shape(dims))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.0[mode]
    }

    /// Total number of coefficients.
    pub fn volume(&self) -> usize {
        self.0.iter().product()
    }

    /// Volume of all modes except `mu`.
    pub fn covolume(&self, mu: usize) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mu)
            .map(|(_, &n)| n)
            .product()
    }

    pub fn check_mode(&self, mode: usize) -> Result<(), TensorError> {
        if mode >= self.order() {
            Err(TensorError::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }

    /// Iterate over all multi-indices in row-major order (last index fastest).
    pub fn indices(&self) -> IndexIter {
        IndexIter {
            dims: self.0.clone(),
            next: Some(vec![0; self.0.len()]),
        }
    }
}

pub struct IndexIter {
    dims: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for IndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.clone()?;
        let mut bump = current.clone();
        let mut done = true;
        for m in (0..self.dims.len()).rev() {
            bump[m] += 1;
            if bump[m] < self.dims[m] {
                done = false;
                break;
            }
            bump[m] = 0;
        }
        self.next = if done { None } else { Some(bump) };
        Some(current)
    }
}

/// Order-d array of real coefficients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != shape.volume() {
            return Err(TensorError::DataLength {
                expected: shape.volume(),
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite(k));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.volume();
        DenseTensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order());
        let dims = self.shape.dims();
        let mut flat = 0;
        for m in 0..dims.len() {
            debug_assert!(idx[m] < dims[m]);
            flat = flat * dims[m] + idx[m];
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = self.flat_index(idx);
        self.data[k] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    /// Euclidean (Frobenius) norm of the coefficients.
    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// self + c * other; shapes must agree.
    pub fn add_scaled(&self, c: f64, other: &DenseTensor) -> DenseTensor {
        assert_eq!(self.shape, other.shape, "shape mismatch in add_scaled");
        DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &DenseTensor) -> DenseTensor {
        self.add_scaled(-1.0, other)
    }

    /// Flatten mode `mu` onto rows; remaining modes, in ascending order,
    /// are flattened row-major onto columns.
    pub fn matricize(&self, mu: usize) -> Result<DMatrix<f64>, TensorError> {
        self.shape.check_mode(mu)?;
        let rows = self.shape.dim(mu);
        let cols = self.shape.covolume(mu);
        let mut m = DMatrix::zeros(rows, cols);
        for idx in self.shape.indices() {
            let col = matricize_column(&idx, self.shape.dims(), mu);
            m[(idx[mu], col)] = self.get(&idx);
        }
        Ok(m)
    }

    /// Contract mode `mu` with the matrix `m` (rows become the new mode size):
    /// the mode-`mu` matricization of the result is `m * matricize(self, mu)`.
    pub fn mode_contract(&self, mu: usize, m: &DMatrix<f64>) -> Result<DenseTensor, TensorError> {
        self.shape.check_mode(mu)?;
        if m.ncols() != self.shape.dim(mu) {
            return Err(TensorError::ContractionMismatch {
                cols: m.ncols(),
                mode: mu,
                dim: self.shape.dim(mu),
            });
        }
        let product = m * self.matricize(mu)?;
        let mut dims = self.shape.dims().to_vec();
        dims[mu] = m.nrows();
        dematricize(&product, mu, &Shape::new(dims)?)
    }
}

/// Position of a multi-index in the column flattening of `matricize`.
fn matricize_column(idx: &[usize], dims: &[usize], mu: usize) -> usize {
    let mut col = 0;
    for m in 0..dims.len() {
        if m == mu {
            continue;
        }
        col = col * dims[m] + idx[m];
    }
    col
}

/// Inverse of `matricize`: rebuild the tensor of shape `shape` whose
/// mode-`mu` matricization is `m`.
pub fn dematricize(m: &DMatrix<f64>, mu: usize, shape: &Shape) -> Result<DenseTensor, TensorError> {
    shape.check_mode(mu)?;
    if m.nrows() != shape.dim(mu) || m.ncols() != shape.covolume(mu) {
        return Err(TensorError::ShapeMismatch(
            vec![m.nrows(), m.ncols()],
            vec![shape.dim(mu), shape.covolume(mu)],
        ));
    }
    let mut t = DenseTensor::zeros(shape.clone());
    for idx in shape.indices() {
        let col = matricize_column(&idx, shape.dims(), mu);
        let v = m[(idx[mu], col)];
        t.set(&idx, v);
    }
    Ok(t)
}

/// Outer product of one vector per mode.
pub fn elementary_tensor(vectors: &[Vec<f64>]) -> Result<DenseTensor, TensorError> {
    if vectors.len() < 2 {
        return Err(TensorError::TooFewVectors(vectors.len()));
    }
    for (mode, v) in vectors.iter().enumerate() {
        if v.is_empty() {
            return Err(TensorError::EmptyVector { mode });
        }
    }
    let shape = Shape::new(vectors.iter().map(|v| v.len()).collect())?;
    let mut t = DenseTensor::zeros(shape);
    let indices: Vec<Vec<usize>> = t.shape.indices().collect();
    for idx in indices {
        let prod: f64 = idx.iter().zip(vectors).map(|(&i, v)| v[i]).product();
        t.set(&idx, prod);
    }
    Ok(t)
}

/// Euclidean inner product of coefficients. On elementary tensors this
/// factorizes as the product of the per-mode inner products.
pub fn inner(t: &DenseTensor, s: &DenseTensor) -> Result<f64, TensorError> {
    if t.shape != s.shape {
        return Err(TensorError::ShapeMismatch(
            t.shape.dims().to_vec(),
            s.shape.dims().to_vec(),
        ));
    }
    Ok(t.data.iter().zip(&s.data).map(|(a, b)| a * b).sum())
}

/// Weighted l^p norm on one mode, 1 < p < inf.
#[derive(Debug, Clone)]
pub struct ModeNorm {
    p: f64,
    weights: Vec<f64>,
}

impl ModeNorm {
    pub fn new(p: f64, weights: Vec<f64>) -> Result<Self, TensorError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(TensorError::InvalidExponent(p));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(TensorError::NonPositiveWeight);
        }
        Ok(ModeNorm { p, weights })
    }

    pub fn uniform(p: f64, n: usize) -> Result<Self, TensorError> {
        ModeNorm::new(p, vec![1.0; n])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.weights.len(), "mode norm length mismatch");
        v.iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x.abs().powf(self.p))
            .sum::<f64>()
            .powf(1.0 / self.p)
    }
}

/// Entrywise weighted l^p norm on the whole coefficient array, with the
/// weight of an entry being the product of its per-mode weights. This is a
/// crossnorm for the given mode norms: on an elementary tensor the sum
/// factorizes mode by mode.
#[derive(Debug, Clone)]
pub struct AmbientNorm {
    mode_norms: Vec<ModeNorm>,
}

impl AmbientNorm {
    pub fn new(mode_norms: Vec<ModeNorm>) -> Result<Self, TensorError> {
        if mode_norms.len() < 2 {
            return Err(TensorError::OrderTooSmall(mode_norms.len()));
        }
        let p = mode_norms[0].p;
        for m in &mode_norms[1..] {
            if m.p != p {
                return Err(TensorError::MixedExponents(p, m.p));
            }
        }
        Ok(AmbientNorm { mode_norms })
    }

    pub fn uniform(p: f64, shape: &Shape) -> Result<Self, TensorError> {
        let mode_norms = shape
            .dims()
            .iter()
            .map(|&n| ModeNorm::uniform(p, n))
            .collect::<Result<Vec<_>, _>>()?;
        AmbientNorm::new(mode_norms)
    }

    pub fn p(&self) -> f64 {
        self.mode_norms[0].p
    }

    /// Dual exponent q = p / (p - 1).
    pub fn q(&self) -> f64 {
        let p = self.p();
        p / (p - 1.0)
    }

    pub fn mode_norms(&self) -> &[ModeNorm] {
        &self.mode_norms
    }

    pub fn mode_norm(&self, mode: usize) -> &ModeNorm {
        &self.mode_norms[mode]
    }

    pub fn check_shape(&self, shape: &Shape) -> Result<(), TensorError> {
        if self.mode_norms.len() != shape.order() {
            return Err(TensorError::NormOrderMismatch {
                expected: shape.order(),
                got: self.mode_norms.len(),
            });
        }
        for (mode, m) in self.mode_norms.iter().enumerate() {
            if m.len() != shape.dim(mode) {
                return Err(TensorError::WeightLength {
                    expected: shape.dim(mode),
                    got: m.len(),
                });
            }
        }
        Ok(())
    }

    /// Product of per-mode weights at a multi-index.
    pub fn weight_at(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .zip(&self.mode_norms)
            .map(|(&i, m)| m.weights[i])
            .product()
    }

    pub fn eval(&self, t: &DenseTensor) -> Result<f64, TensorError> {
        self.check_shape(t.shape())?;
        let p = self.p();
        let mut sum = 0.0;
        for idx in t.shape().indices() {
            sum += self.weight_at(&idx) * t.get(&idx).abs().powf(p);
        }
        Ok(sum.powf(1.0 / p))
    }
}

/// On-disk tensor format: `{"dims": [...], "data": [...]}`, data row-major.
#[derive(Serialize, Deserialize)]
struct TensorFile {
    dims: Vec<usize>,
    data: Vec<f64>,
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor, TensorError> {
    let text = std::fs::read_to_string(path)?;
    parse_tensor(&text)
}

pub fn parse_tensor(text: &str) -> Result<DenseTensor, TensorError> {
    let file: TensorFile =
        serde_json::from_str(text).map_err(|e| TensorError::Format(e.to_string()))?;
    let shape = Shape::new(file.dims).map_err(|e| TensorError::Format(e.to_string()))?;
    DenseTensor::new(shape, file.data).map_err(|e| TensorError::Format(e.to_string()))
}

pub fn write_tensor(t: &DenseTensor, path: impl AsRef<Path>) -> Result<(), TensorError> {
    std::fs::write(path, tensor_to_json(t))?;
    Ok(())
}

pub fn tensor_to_json(t: &DenseTensor) -> String {
    let file = TensorFile {
        dims: t.shape().dims().to_vec(),
        data: t.data().to_vec(),
    };
    // serde_json emits shortest round-trip doubles, so read-back is bit-exact
    serde_json::to_string(&file).expect("tensor serialization cannot fail")
}

/// Matrix object used inside JSON formats: column-major data.
#[derive(Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>, TensorError> {
        if self.data.len() != self.rows * self.cols {
            return Err(TensorError::Format(format!(
                "matrix data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_column_slice(
            self.rows,
            self.cols,
            &self.data,
        ))
    }
}
