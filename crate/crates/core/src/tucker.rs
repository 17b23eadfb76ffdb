//! Tucker representation with fixed rank: alpha-ranks, minimal subspaces,
//! the full-row-rank core condition, higher-order SVD and dense conversion.

use crate::tensor::{DenseTensor, MatrixJson, Shape, TensorError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Default relative singular-value cliff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum TuckerError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("operation requires a nonzero tensor")]
    ZeroTensor,
    #[error("rank {0:?} is not admissible for shape {1:?}")]
    InadmissibleRank(Vec<usize>, Vec<usize>),
    #[error("factor for mode {mode} is {rows}x{cols}, expected {n}x{r}")]
    FactorShape {
        mode: usize,
        rows: usize,
        cols: usize,
        n: usize,
        r: usize,
    },
    #[error("factor for mode {mode} has dependent columns")]
    DependentFactor { mode: usize },
    #[error("core matricization in mode {mode} is rank deficient")]
    CoreRankDeficient { mode: usize },
    #[error("requested rank {r} in mode {mode} exceeds the detected rank")]
    RankUnreachable { mode: usize, r: usize },
    #[error("malformed tucker file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-mode ranks (r_1,...,r_d).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rank(Vec<usize>);

impl Rank {
    /// Admissibility in finite dimension: r_a <= n_a and
    /// r_a <= prod_{b != a} r_b for every mode a.
    pub fn new(r: Vec<usize>, shape: &Shape) -> Result<Self, TuckerError> {
        if r.len() != shape.order() {
            return Err(TuckerError::InadmissibleRank(r, shape.dims().to_vec()));
        }
        for mu in 0..r.len() {
            let coproduct: usize = r
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != mu)
                .map(|(_, &x)| x)
                .product();
            if r[mu] > shape.dim(mu) || r[mu] > coproduct {
                return Err(TuckerError::InadmissibleRank(r, shape.dims().to_vec()));
            }
        }
        Ok(Rank(r))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.0[mode]
    }
}

/// Core tensor plus one factor matrix per mode; factor `a` is n_a x r_a
/// with independent columns.
#[derive(Debug, Clone)]
pub struct TuckerTensor {
    core: DenseTensor,
    factors: Vec<DMatrix<f64>>,
}

impl TuckerTensor {
    pub fn new(core: DenseTensor, factors: Vec<DMatrix<f64>>) -> Result<Self, TuckerError> {
        if factors.len() != core.order() {
            return Err(TuckerError::Format(format!(
                "{} factors for a core of order {}",
                factors.len(),
                core.order()
            )));
        }
        for (mode, f) in factors.iter().enumerate() {
            let r = core.shape().dim(mode);
            if f.ncols() != r {
                return Err(TuckerError::FactorShape {
                    mode,
                    rows: f.nrows(),
                    cols: f.ncols(),
                    n: f.nrows(),
                    r,
                });
            }
            if f.nrows() < f.ncols() {
                return Err(TuckerError::FactorShape {
                    mode,
                    rows: f.nrows(),
                    cols: f.ncols(),
                    n: f.ncols(),
                    r,
                });
            }
            if relative_min_singular_value(f) <= DEFAULT_RANK_TOL {
                return Err(TuckerError::DependentFactor { mode });
            }
        }
        Ok(TuckerTensor { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        &self.factors[mode]
    }

    pub fn order(&self) -> usize {
        self.core.order()
    }

    pub fn rank(&self) -> Rank {
        Rank(self.core.shape().dims().to_vec())
    }

    /// Shape of the represented dense tensor.
    pub fn ambient_shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|f| f.nrows()).collect())
            .expect("factor list is non-empty by construction")
    }
}

/// Smallest singular value divided by the largest; 0 for a zero matrix.
pub fn relative_min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    // full row/column rank needs min(nrows, ncols) nonzero values
    sv.min() / max
}

/// Number of singular values of the mode-`mu` matricization above
/// `tol * sigma_max`; 0 for the zero tensor.
pub fn alpha_rank(t: &DenseTensor, mu: usize, tol: f64) -> Result<usize, TuckerError> {
    t.shape().check_mode(mu)?;
    let sv = t.matricize(mu)?.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * max).count())
}

/// Orthonormal basis of the mode-`mu` column space of `t`.
#[derive(Debug, Clone)]
pub struct MinimalSubspace {
    pub mode: usize,
    pub basis: DMatrix<f64>,
}

impl MinimalSubspace {
    /// Euclidean-orthogonal projector onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Make the largest-magnitude entry of every column positive. Ties resolve
/// to the first occurrence, so the output is deterministic.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0;
        for i in 1..m.nrows() {
            if m[(i, j)].abs() > m[(best, j)].abs() {
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Left singular vectors of the mode-`mu` matricization at tolerance `tol`,
/// sign-fixed.
pub fn minimal_subspace(
    t: &DenseTensor,
    mu: usize,
    tol: f64,
) -> Result<MinimalSubspace, TuckerError> {
    t.shape().check_mode(mu)?;
    if t.is_zero() {
        return Err(TuckerError::ZeroTensor);
    }
    let m = t.matricize(mu)?;
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let max = svd.singular_values.max();
    let r = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol * max)
        .count();
    let mut basis = u.columns(0, r).into_owned();
    fix_column_signs(&mut basis);
    Ok(MinimalSubspace { mode: mu, basis })
}

/// Contract every mode of `t` with the transpose of the matching factor.
fn contract_all_transposed(
    t: &DenseTensor,
    factors: &[DMatrix<f64>],
) -> Result<DenseTensor, TuckerError> {
    let mut out = t.clone();
    for (mu, f) in factors.iter().enumerate() {
        out = out.mode_contract(mu, &f.transpose())?;
    }
    Ok(out)
}

/// Higher-order SVD at tolerance `tol`: minimal orthonormal factors and the
/// core obtained by contracting with the factor transposes.
pub fn to_tucker(t: &DenseTensor, tol: f64) -> Result<TuckerTensor, TuckerError> {
    if t.is_zero() {
        return Err(TuckerError::ZeroTensor);
    }
    let factors: Vec<DMatrix<f64>> = (0..t.order())
        .map(|mu| minimal_subspace(t, mu, tol).map(|s| s.basis))
        .collect::<Result<_, _>>()?;
    let core = contract_all_transposed(t, &factors)?;
    TuckerTensor::new(core, factors)
}

/// Higher-order SVD truncated to a fixed target rank. Returns the truncated
/// representation and, per mode, the ratio sigma_{r_a} / sigma_max seen at
/// the cut (1 when the mode is not truncated below the detected rank).
pub fn hosvd_truncate(
    t: &DenseTensor,
    rank: &Rank,
) -> Result<(TuckerTensor, Vec<f64>), TuckerError> {
    if t.is_zero() {
        return Err(TuckerError::ZeroTensor);
    }
    if rank.dims().len() != t.order() {
        return Err(TuckerError::InadmissibleRank(
            rank.dims().to_vec(),
            t.shape().dims().to_vec(),
        ));
    }
    let mut factors = Vec::with_capacity(t.order());
    let mut cut_ratios = Vec::with_capacity(t.order());
    for mu in 0..t.order() {
        let r = rank.dim(mu);
        let m = t.matricize(mu)?;
        let svd = m.svd(true, false);
        let u = svd.u.as_ref().expect("left singular vectors requested");
        if r > u.ncols() {
            return Err(TuckerError::RankUnreachable { mode: mu, r });
        }
        let max = svd.singular_values.max();
        if max == 0.0 || svd.singular_values[r - 1] <= DEFAULT_RANK_TOL * max {
            return Err(TuckerError::RankUnreachable { mode: mu, r });
        }
        cut_ratios.push(svd.singular_values[r - 1] / max);
        let mut basis = u.columns(0, r).into_owned();
        fix_column_signs(&mut basis);
        factors.push(basis);
    }
    let core = contract_all_transposed(t, &factors)?;
    Ok((TuckerTensor::new(core, factors)?, cut_ratios))
}

/// Expand the representation: contract the core with every factor.
pub fn tucker_to_dense(u: &TuckerTensor) -> Result<DenseTensor, TuckerError> {
    let mut out = u.core.clone();
    for (mu, f) in u.factors.iter().enumerate() {
        out = out.mode_contract(mu, f)?;
    }
    Ok(out)
}

/// True iff every factor has independent columns and every core
/// matricization has full row rank at the relative tolerance `tol`.
pub fn is_minimal(u: &TuckerTensor, tol: f64) -> bool {
    for f in &u.factors {
        if relative_min_singular_value(f) <= tol {
            return false;
        }
    }
    for mu in 0..u.order() {
        let m = match u.core.matricize(mu) {
            Ok(m) => m,
            Err(_) => return false,
        };
        if m.nrows() > m.ncols() {
            return false;
        }
        if relative_min_singular_value(&m) <= tol {
            return false;
        }
    }
    true
}

/// On-disk format: `{"core": tensor-object, "factors": [matrix-objects]}`,
/// matrices column-major.
#[derive(Serialize, Deserialize)]
struct TuckerFile {
    core: TensorPart,
    factors: Vec<MatrixJson>,
}

#[derive(Serialize, Deserialize)]
struct TensorPart {
    dims: Vec<usize>,
    data: Vec<f64>,
}

pub fn read_tucker(path: impl AsRef<Path>) -> Result<TuckerTensor, TuckerError> {
    let text = std::fs::read_to_string(path)?;
    parse_tucker(&text)
}

pub fn parse_tucker(text: &str) -> Result<TuckerTensor, TuckerError> {
    let file: TuckerFile =
        serde_json::from_str(text).map_err(|e| TuckerError::Format(e.to_string()))?;
    let shape = Shape::new(file.core.dims).map_err(|e| TuckerError::Format(e.to_string()))?;
    let core =
        DenseTensor::new(shape, file.core.data).map_err(|e| TuckerError::Format(e.to_string()))?;
    let factors = file
        .factors
        .iter()
        .map(|m| m.to_matrix())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TuckerError::Format(e.to_string()))?;
    TuckerTensor::new(core, factors)
}

pub fn write_tucker(u: &TuckerTensor, path: impl AsRef<Path>) -> Result<(), TuckerError> {
    std::fs::write(path, tucker_to_json(u))?;
    Ok(())
}

pub fn tucker_to_json(u: &TuckerTensor) -> String {
    let file = TuckerFile {
        core: TensorPart {
            dims: u.core.shape().dims().to_vec(),
            data: u.core.data().to_vec(),
        },
        factors: u.factors.iter().map(MatrixJson::from_matrix).collect(),
    };
    serde_json::to_string(&file).expect("tucker serialization cannot fail")
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::Rng;

    /// Random minimal Tucker tensor with orthonormal factors.
    pub fn random_minimal(
        dims: &[usize],
        ranks: &[usize],
        rng: &mut impl Rng,
    ) -> TuckerTensor {
        let shape = Shape::new(dims.to_vec()).unwrap();
        let rank = Rank::new(ranks.to_vec(), &shape).unwrap();
        loop {
            let factors: Vec<DMatrix<f64>> = dims
                .iter()
                .zip(rank.dims())
                .map(|(&n, &r)| {
                    let m = DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
                    let qr = m.qr();
                    let mut q = qr.q().columns(0, r).into_owned();
                    fix_column_signs(&mut q);
                    q
                })
                .collect();
            let core_shape = Shape::new(rank.dims().to_vec()).unwrap();
            let data = (0..core_shape.volume())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let core = DenseTensor::new(core_shape, data).unwrap();
            let candidate = match TuckerTensor::new(core, factors) {
                Ok(u) => u,
                Err(_) => continue,
            };
            // random cores are full-rank with probability one, retry otherwise
            if is_minimal(&candidate, 1e-6) {
                return candidate;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::random_minimal;
    use super::*;
    use crate::tensor::elementary_tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_rank_of_elementary_tensor_is_one() {
        let t = elementary_tensor(&[vec![1.0, 2.0], vec![3.0, -1.0, 0.5], vec![1.0, 1.0]]).unwrap();
        for mu in 0..3 {
            assert_eq!(alpha_rank(&t, mu, 1e-10).unwrap(), 1);
        }
    }

    #[test]
    fn alpha_rank_of_zero_tensor_is_zero() {
        let t = DenseTensor::zeros(Shape::new(vec![2, 2, 2]).unwrap());
        for mu in 0..3 {
            assert_eq!(alpha_rank(&t, mu, 1e-10).unwrap(), 0);
        }
    }

    #[test]
    fn alpha_rank_detects_construction_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let u = random_minimal(&[4, 5, 3], &[2, 3, 2], &mut rng);
        let t = tucker_to_dense(&u).unwrap();
        assert_eq!(alpha_rank(&t, 0, 1e-10).unwrap(), 2);
        assert_eq!(alpha_rank(&t, 1, 1e-10).unwrap(), 3);
        assert_eq!(alpha_rank(&t, 2, 1e-10).unwrap(), 2);
    }

    #[test]
    fn minimal_subspace_of_elementary_tensor() {
        let v = vec![3.0, 4.0];
        let t = elementary_tensor(&[v.clone(), vec![1.0, 1.0]]).unwrap();
        let s = minimal_subspace(&t, 0, 1e-10).unwrap();
        assert_eq!(s.basis.ncols(), 1);
        // span{v}: basis is +-v/|v|, sign fixed to positive max entry
        assert!((s.basis[(0, 0)] - 0.6).abs() < 1e-12);
        assert!((s.basis[(1, 0)] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn minimal_subspace_of_identity_matricization_is_full() {
        let mut t = DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap());
        t.set(&[0, 0], 1.0);
        t.set(&[1, 1], 1.0);
        for mu in 0..2 {
            let s = minimal_subspace(&t, mu, 1e-10).unwrap();
            assert_eq!(s.basis.ncols(), 2);
            let p = s.projector();
            assert!((p - DMatrix::identity(2, 2)).norm() < 1e-12);
        }
    }

    #[test]
    fn minimal_subspace_matches_factor_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_minimal(&[5, 4, 4], &[2, 2, 3], &mut rng);
        let t = tucker_to_dense(&u).unwrap();
        for mu in 0..3 {
            let s = minimal_subspace(&t, mu, 1e-10).unwrap();
            let p_min = s.projector();
            let f = u.factor(mu);
            let p_factor = f * f.transpose();
            assert!((p_min - p_factor).norm() < 1e-10);
        }
    }

    #[test]
    fn minimal_subspace_rejects_zero_tensor() {
        let t = DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap());
        assert!(matches!(
            minimal_subspace(&t, 0, 1e-10),
            Err(TuckerError::ZeroTensor)
        ));
    }

    #[test]
    fn hosvd_of_elementary_tensor() {
        let v = vec![vec![1.0, 2.0], vec![0.0, -3.0], vec![2.0, 2.0, 1.0]];
        let t = elementary_tensor(&v).unwrap();
        let u = to_tucker(&t, 1e-10).unwrap();
        assert_eq!(u.rank().dims(), &[1, 1, 1]);
        let norms: f64 = v
            .iter()
            .map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt())
            .product();
        assert!((u.core().data()[0].abs() - norms).abs() < 1e-12);
    }

    #[test]
    fn hosvd_roundtrip_preserves_ranks_and_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let u = random_minimal(&[4, 3, 5], &[2, 2, 2], &mut rng);
        let t = tucker_to_dense(&u).unwrap();
        let u2 = to_tucker(&t, 1e-10).unwrap();
        assert_eq!(u2.rank().dims(), &[2, 2, 2]);
        let t2 = tucker_to_dense(&u2).unwrap();
        let rel = t.sub(&t2).norm2() / t.norm2();
        assert!(rel <= 1e-10, "relative error {rel}");
    }

    #[test]
    fn hosvd_of_two_term_diagonal_has_full_rank() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let t = elementary_tensor(&[e1.clone(), e1.clone(), e1.clone()])
            .unwrap()
            .add_scaled(
                1.0,
                &elementary_tensor(&[e2.clone(), e2.clone(), e2]).unwrap(),
            );
        let u = to_tucker(&t, 1e-10).unwrap();
        assert_eq!(u.rank().dims(), &[2, 2, 2]);
    }

    #[test]
    fn dense_identity_core_with_identity_factors() {
        let core = {
            let mut c = DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap());
            c.set(&[0, 0], 1.0);
            c.set(&[1, 1], 1.0);
            c
        };
        let u = TuckerTensor::new(core, vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)])
            .unwrap();
        let t = tucker_to_dense(&u).unwrap();
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn dense_rank_one_is_scaled_elementary() {
        let core = DenseTensor::new(Shape::new(vec![1, 1]).unwrap(), vec![2.5]).unwrap();
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let w = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, -1.0]);
        let u = TuckerTensor::new(core, vec![v, w]).unwrap();
        let t = tucker_to_dense(&u).unwrap();
        let expected = elementary_tensor(&[vec![1.0, 2.0], vec![0.0, 1.0, -1.0]])
            .unwrap()
            .scale(2.5);
        for (a, b) in t.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_matches_naive_multi_index_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let u = random_minimal(&[3, 4, 2], &[2, 2, 2], &mut rng);
        let t = tucker_to_dense(&u).unwrap();
        // naive oracle: sum over core entries of elementary tensors of columns
        let mut oracle = DenseTensor::zeros(t.shape().clone());
        for cidx in u.core().shape().indices() {
            let c = u.core().get(&cidx);
            let cols: Vec<Vec<f64>> = cidx
                .iter()
                .enumerate()
                .map(|(mu, &i)| u.factor(mu).column(i).iter().copied().collect())
                .collect();
            let elem = elementary_tensor(&cols).unwrap();
            oracle = oracle.add_scaled(c, &elem);
        }
        for (a, b) in t.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn all_ones_core_is_not_minimal() {
        let core = DenseTensor::new(
            Shape::new(vec![2, 2, 2]).unwrap(),
            vec![1.0; 8],
        )
        .unwrap();
        let factors = vec![
            DMatrix::identity(3, 2),
            DMatrix::identity(3, 2),
            DMatrix::identity(3, 2),
        ];
        let u = TuckerTensor::new(core, factors).unwrap();
        assert!(!is_minimal(&u, 1e-10));
    }

    #[test]
    fn superdiagonal_core_is_minimal() {
        let mut core = DenseTensor::zeros(Shape::new(vec![2, 2, 2]).unwrap());
        core.set(&[0, 0, 0], 1.0);
        core.set(&[1, 1, 1], 1.0);
        let factors = vec![
            DMatrix::identity(3, 2),
            DMatrix::identity(3, 2),
            DMatrix::identity(3, 2),
        ];
        let u = TuckerTensor::new(core, factors).unwrap();
        assert!(is_minimal(&u, 1e-10));
    }

    #[test]
    fn scalar_core_rank_one_is_minimal() {
        let core = DenseTensor::new(Shape::new(vec![1, 1]).unwrap(), vec![-0.3]).unwrap();
        let u = TuckerTensor::new(
            core,
            vec![
                DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
                DMatrix::from_column_slice(2, 1, &[0.6, 0.8]),
            ],
        )
        .unwrap();
        assert!(is_minimal(&u, 1e-10));
    }

    #[test]
    fn core_recomputation_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_minimal(&[4, 4, 3], &[2, 3, 2], &mut rng);
        let t = tucker_to_dense(&u).unwrap();
        let recomputed = contract_all_transposed(&t, u.factors()).unwrap();
        for (a, b) in recomputed.data().iter().zip(u.core().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_constructions_have_exact_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        for _ in 0..100 {
            let d = rng.gen_range(2..=4);
            let dims: Vec<usize> = (0..d).map(|_| rng.gen_range(2..=6)).collect();
            let ranks: Vec<usize> = dims.iter().map(|&n| rng.gen_range(1..=n.min(3))).collect();
            let shape = Shape::new(dims.clone()).unwrap();
            if Rank::new(ranks.clone(), &shape).is_err() {
                continue;
            }
            let u = random_minimal(&dims, &ranks, &mut rng);
            let t = tucker_to_dense(&u).unwrap();
            for mu in 0..d {
                assert_eq!(
                    alpha_rank(&t, mu, 1e-10).unwrap(),
                    ranks[mu],
                    "dims {dims:?} ranks {ranks:?} mode {mu}"
                );
            }
        }
    }

    #[test]
    fn minimal_subspace_contained_in_factor_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let u = random_minimal(&[5, 4, 3], &[2, 2, 2], &mut rng);
            let t = tucker_to_dense(&u).unwrap();
            for mu in 0..3 {
                let s = minimal_subspace(&t, mu, 1e-10).unwrap();
                let f = u.factor(mu);
                // principal angles: singular values of F^T B are all 1
                let overlap = f.transpose() * &s.basis;
                let sv = overlap.singular_values();
                for v in sv.iter() {
                    assert!((v - 1.0).abs() <= 1e-8, "principal angle too large");
                }
            }
        }
    }

    #[test]
    fn admissibility_rejects_oversized_ranks() {
        let shape = Shape::new(vec![4, 4, 4]).unwrap();
        assert!(Rank::new(vec![5, 1, 1], &shape).is_err());
        assert!(Rank::new(vec![2, 1, 1], &shape).is_err());
        assert!(Rank::new(vec![1, 1, 1], &shape).is_ok());
        assert!(Rank::new(vec![2, 2, 4], &shape).is_ok());
        assert!(Rank::new(vec![0, 0, 0], &shape).is_ok());
        assert!(Rank::new(vec![0, 1, 1], &shape).is_err());
    }

    #[test]
    fn hosvd_truncation_reports_cut_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let u = random_minimal(&[4, 4, 4], &[3, 3, 3], &mut rng);
        let t = tucker_to_dense(&u).unwrap();
        let shape = t.shape().clone();
        let rank = Rank::new(vec![2, 2, 2], &shape).unwrap();
        let (trunc, ratios) = hosvd_truncate(&t, &rank).unwrap();
        assert_eq!(trunc.rank().dims(), &[2, 2, 2]);
        for r in ratios {
            assert!(r > 0.0 && r <= 1.0);
        }
        // requesting more than the detected rank fails
        let too_big = Rank::new(vec![4, 4, 4], &shape).unwrap();
        assert!(matches!(
            hosvd_truncate(&t, &too_big),
            Err(TuckerError::RankUnreachable { .. })
        ));
    }

    #[test]
    fn tucker_file_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let u = random_minimal(&[3, 4, 2], &[2, 2, 2], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.json");
        write_tucker(&u, &path).unwrap();
        let v = read_tucker(&path).unwrap();
        assert_eq!(u.core().data(), v.core().data());
        for (a, b) in u.factors().iter().zip(v.factors()) {
            assert_eq!(a, b);
        }
    }
}
