//! Helpers shared by the integration suites: seeded random fixtures and a
//! matrix-exponential oracle independent of the integrators under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tdf_core::tensor::{DenseTensor, Shape};
use tdf_core::tucker::{Rank, TuckerTensor};

pub fn random_dense(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let data = (0..shape.volume())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    DenseTensor::new(shape, data).unwrap()
}

pub fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

/// Random minimal Tucker tensor with orthonormal factors, built through the
/// public construction path.
pub fn random_minimal(dims: &[usize], ranks: &[usize], rng: &mut ChaCha8Rng) -> TuckerTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let rank = Rank::new(ranks.to_vec(), &shape).unwrap();
    loop {
        let factors: Vec<DMatrix<f64>> = dims
            .iter()
            .zip(rank.dims())
            .map(|(&n, &r)| {
                let m = DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
                m.qr().q().columns(0, r).into_owned()
            })
            .collect();
        let core_shape = Shape::new(rank.dims().to_vec()).unwrap();
        let data = (0..core_shape.volume())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let core = DenseTensor::new(core_shape, data).unwrap();
        if let Ok(u) = TuckerTensor::new(core, factors) {
            if tdf_core::tucker::is_minimal(&u, 1e-6) {
                return u;
            }
        }
    }
}

/// Matrix exponential by scaling and squaring on a Taylor series.
pub fn matexp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = m.norm();
    let squarings = norm.log2().ceil().max(0.0) as usize + 1;
    let scaled = m / 2.0_f64.powi(squarings as i32);
    let n = m.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.norm() < 1e-18 * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
