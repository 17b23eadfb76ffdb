//! Charts on the fixed-rank Tucker set, retraction and chart inversion,
//! transition maps, tangent vectors with their embedding into the ambient
//! space, and orthonormal tangent bases.
//!
//! A chart is anchored at a base point whose factors are orthonormal; the
//! per-mode complement is the Euclidean orthogonal complement of the factor
//! span, so the subspace decomposition projectors are self-adjoint and the
//! tangent blocks are mutually orthogonal.

use crate::tensor::{dematricize, DenseTensor, ModeNorm, Shape, TensorError};
use crate::tucker::{
    fix_column_signs, is_minimal, relative_min_singular_value, TuckerError, TuckerTensor,
    DEFAULT_RANK_TOL,
};
use nalgebra::DMatrix;
use thiserror::Error;

/// Condition-number cliff for the chart-domain and core Gram tests.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tucker(#[from] TuckerError),
    #[error("base point requires a minimal Tucker representation")]
    NonMinimal,
    #[error("incompatible shapes or ranks: {0}")]
    Incompatible(String),
    #[error("core fails the full-row-rank condition in mode {mode}")]
    CoreCondition { mode: usize },
    #[error("subspaces share no common complement in mode {mode} (tensor outside the chart domain)")]
    CommonComplementViolation { mode: usize },
    #[error("tensor is not in the tangent space: relative re-embedding residual {residual}")]
    NotInTangentSpace { residual: f64 },
    #[error("core Gram matrix in mode {mode} is numerically singular")]
    SingularCore { mode: usize },
    #[error("tangent gauge violated in mode {mode}: factor^T dU has norm {violation}")]
    GaugeViolation { mode: usize, violation: f64 },
}

/// A minimal Tucker tensor with orthonormal factors together with an
/// orthonormal basis of each mode's orthogonal complement.
#[derive(Debug, Clone)]
pub struct BasePoint {
    v: TuckerTensor,
    complements: Vec<DMatrix<f64>>,
}

impl BasePoint {
    pub fn tucker(&self) -> &TuckerTensor {
        &self.v
    }

    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        self.v.factor(mode)
    }

    pub fn complement(&self, mode: usize) -> &DMatrix<f64> {
        &self.complements[mode]
    }

    pub fn order(&self) -> usize {
        self.v.order()
    }

    pub fn ambient_shape(&self) -> Shape {
        self.v.ambient_shape()
    }

    pub fn rank_dims(&self) -> &[usize] {
        self.v.core().shape().dims()
    }

    /// dim Z = prod r_a + sum_a (n_a - r_a) r_a.
    pub fn tangent_dim(&self) -> usize {
        let r: usize = self.rank_dims().iter().product();
        let mixed: usize = (0..self.order())
            .map(|mu| {
                let n = self.factor(mu).nrows();
                let ra = self.rank_dims()[mu];
                (n - ra) * ra
            })
            .sum();
        r + mixed
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of `f`,
/// obtained from the eigenvectors of the complementary projector.
fn orthogonal_complement(f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    let r = f.ncols();
    if n == r {
        return DMatrix::zeros(n, 0);
    }
    let projector = DMatrix::identity(n, n) - f * f.transpose();
    let eig = nalgebra::SymmetricEigen::new(projector);
    let mut cols: Vec<(f64, Vec<f64>)> = Vec::new();
    for j in 0..n {
        if eig.eigenvalues[j] > 0.5 {
            cols.push((
                eig.eigenvalues[j],
                eig.eigenvectors.column(j).iter().copied().collect(),
            ));
        }
    }
    debug_assert_eq!(cols.len(), n - r);
    let mut w = DMatrix::from_fn(n, cols.len(), |i, j| cols[j].1[i]);
    fix_column_signs(&mut w);
    w
}

/// Anchor a chart at `v`. The factor gauge is orthonormalized first (a QR
/// pass absorbed into the core), which does not change the represented
/// tensor; complements are the Euclidean orthogonal ones.
pub fn make_base(v: &TuckerTensor) -> Result<BasePoint, GeometryError> {
    if !is_minimal(v, DEFAULT_RANK_TOL) {
        return Err(GeometryError::NonMinimal);
    }
    let mut core = v.core().clone();
    let mut factors = Vec::with_capacity(v.order());
    for (mu, f) in v.factors().iter().enumerate() {
        let r = f.ncols();
        let qr = f.clone().qr();
        let mut q = qr.q().columns(0, r).into_owned();
        let mut rr = qr.r().rows(0, r).into_owned();
        // sign-fix Q and push the sign flips into R
        let before = q.clone();
        fix_column_signs(&mut q);
        for j in 0..r {
            if (q.column(j) - before.column(j)).norm() > 0.0 {
                for k in 0..rr.ncols() {
                    rr[(j, k)] = -rr[(j, k)];
                }
            }
        }
        core = core.mode_contract(mu, &rr).map_err(GeometryError::Tensor)?;
        factors.push(q);
    }
    let complements = factors.iter().map(orthogonal_complement).collect();
    let v = TuckerTensor::new(core, factors)?;
    Ok(BasePoint { v, complements })
}

/// Chart coordinates relative to a base point: per mode the matrix of the
/// complement-valued map on the factor basis, plus a core with full-row-rank
/// matricizations.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    /// l[a] is (n_a - r_a) x r_a; column i holds the complement coordinates
    /// of the image of factor column i.
    pub l: Vec<DMatrix<f64>>,
    pub core: DenseTensor,
}

impl ChartPoint {
    /// The origin of the chart at `b`, whose retraction is the base tensor.
    pub fn origin(b: &BasePoint) -> ChartPoint {
        let l = (0..b.order())
            .map(|mu| {
                let n = b.factor(mu).nrows();
                let r = b.rank_dims()[mu];
                DMatrix::zeros(n - r, r)
            })
            .collect();
        ChartPoint {
            l,
            core: b.tucker().core().clone(),
        }
    }
}

fn check_chart_shapes(b: &BasePoint, c: &ChartPoint) -> Result<(), GeometryError> {
    if c.l.len() != b.order() || c.core.order() != b.order() {
        return Err(GeometryError::Incompatible(format!(
            "chart point order {} vs base order {}",
            c.l.len(),
            b.order()
        )));
    }
    for mu in 0..b.order() {
        let n = b.factor(mu).nrows();
        let r = b.rank_dims()[mu];
        if c.l[mu].nrows() != n - r || c.l[mu].ncols() != r || c.core.shape().dim(mu) != r {
            return Err(GeometryError::Incompatible(format!(
                "chart matrices in mode {mu} do not match the base rank"
            )));
        }
    }
    Ok(())
}

/// Map chart coordinates back to the manifold: mode a factor becomes
/// factor_a + W_a L_a and the core becomes E. Requires E to satisfy the
/// full-row-rank core condition.
pub fn retract(b: &BasePoint, c: &ChartPoint) -> Result<TuckerTensor, GeometryError> {
    check_chart_shapes(b, c)?;
    for mu in 0..b.order() {
        let m = c.core.matricize(mu)?;
        if m.nrows() > m.ncols() || relative_min_singular_value(&m) <= DEFAULT_RANK_TOL {
            return Err(GeometryError::CoreCondition { mode: mu });
        }
    }
    let factors = (0..b.order())
        .map(|mu| b.factor(mu) + b.complement(mu) * &c.l[mu])
        .collect();
    Ok(TuckerTensor::new(c.core.clone(), factors)?)
}

/// Chart coordinates of `w` in the chart anchored at `b`. Fails with
/// `CommonComplementViolation` when some factor span of `w` cannot be
/// projected isomorphically onto the base factor span along the complement.
pub fn invert_chart(b: &BasePoint, w: &TuckerTensor) -> Result<ChartPoint, GeometryError> {
    if w.order() != b.order()
        || w.ambient_shape() != b.ambient_shape()
        || w.core().shape() != b.tucker().core().shape()
    {
        return Err(GeometryError::Incompatible(
            "tensor rank or shape differs from the base point".into(),
        ));
    }
    let mut l = Vec::with_capacity(b.order());
    let mut core = w.core().clone();
    for mu in 0..b.order() {
        let a = b.factor(mu).transpose() * w.factor(mu);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax == 0.0 || smin <= smax / CONDITION_LIMIT {
            return Err(GeometryError::CommonComplementViolation { mode: mu });
        }
        let r = a.nrows();
        let a_inv = svd
            .solve(&DMatrix::identity(r, r), 0.0)
            .map_err(|_| GeometryError::CommonComplementViolation { mode: mu })?;
        l.push(b.complement(mu).transpose() * w.factor(mu) * &a_inv);
        core = core.mode_contract(mu, &a)?;
    }
    Ok(ChartPoint { l, core })
}

/// Overlap map between two charts: express a point given in the chart at
/// `b1` in the chart at `b2`.
pub fn transition(
    b1: &BasePoint,
    b2: &BasePoint,
    c1: &ChartPoint,
) -> Result<ChartPoint, GeometryError> {
    let w = retract(b1, c1)?;
    invert_chart(b2, &w)
}

/// Tangent direction at a base point: an unconstrained core direction and
/// per mode a factor direction whose columns lie in the complement
/// (factor^T dU = 0, the gauge condition).
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub d_core: DenseTensor,
    pub d_factors: Vec<DMatrix<f64>>,
}

impl TangentVector {
    pub fn zero(b: &BasePoint) -> TangentVector {
        TangentVector {
            d_core: DenseTensor::zeros(b.tucker().core().shape().clone()),
            d_factors: (0..b.order())
                .map(|mu| DMatrix::zeros(b.factor(mu).nrows(), b.rank_dims()[mu]))
                .collect(),
        }
    }

    /// Check the gauge condition |factor^T dU| <= tol |dU| per mode. Blocks
    /// at roundoff level relative to the whole vector are treated as zero.
    pub fn check_gauge(&self, b: &BasePoint, tol: f64) -> Result<(), GeometryError> {
        let total = self.d_core.norm2()
            + self
                .d_factors
                .iter()
                .map(|m| m.norm())
                .sum::<f64>();
        for mu in 0..b.order() {
            let du = &self.d_factors[mu];
            let residual = (b.factor(mu).transpose() * du).norm();
            let scale = du.norm();
            if residual > tol * scale + 1e-14 * total {
                return Err(GeometryError::GaugeViolation {
                    mode: mu,
                    violation: residual / scale.max(f64::MIN_POSITIVE),
                });
            }
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> TangentVector {
        TangentVector {
            d_core: self.d_core.scale(c),
            d_factors: self.d_factors.iter().map(|m| m.scale(c)).collect(),
        }
    }

    pub fn add(&self, other: &TangentVector) -> TangentVector {
        TangentVector {
            d_core: self.d_core.add_scaled(1.0, &other.d_core),
            d_factors: self
                .d_factors
                .iter()
                .zip(&other.d_factors)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Contract a core against one matrix per mode without any rank validation.
fn expand(core: &DenseTensor, mats: &[DMatrix<f64>]) -> Result<DenseTensor, TensorError> {
    let mut out = core.clone();
    for (mu, m) in mats.iter().enumerate() {
        out = out.mode_contract(mu, m)?;
    }
    Ok(out)
}

/// Embed a tangent vector into the ambient space: the core-direction term
/// plus, per mode, the expansion with that mode's factor replaced by the
/// factor direction.
pub fn embed_tangent(b: &BasePoint, tv: &TangentVector) -> Result<DenseTensor, GeometryError> {
    tv.check_gauge(b, 1e-10)?;
    let factors = b.tucker().factors();
    let mut out = expand(&tv.d_core, factors)?;
    for mu in 0..b.order() {
        let mut mats: Vec<DMatrix<f64>> = factors.to_vec();
        mats[mu] = tv.d_factors[mu].clone();
        out = out.add_scaled(1.0, &expand(b.tucker().core(), &mats)?);
    }
    Ok(out)
}

/// Core direction and factor directions of the orthogonal tangent
/// projection of `w` (no membership test; see `extract_tangent`).
pub(crate) fn tangent_components(
    b: &BasePoint,
    w: &DenseTensor,
) -> Result<TangentVector, GeometryError> {
    if *w.shape() != b.ambient_shape() {
        return Err(GeometryError::Incompatible(
            "ambient tensor shape differs from the base point".into(),
        ));
    }
    let factors = b.tucker().factors();
    let transposed: Vec<DMatrix<f64>> = factors.iter().map(|f| f.transpose()).collect();
    let d_core = expand(w, &transposed)?;

    let mut d_factors = Vec::with_capacity(b.order());
    for mu in 0..b.order() {
        let n = factors[mu].nrows();
        let r = b.rank_dims()[mu];
        if n == r {
            // complement is trivial, the whole mode block vanishes
            d_factors.push(DMatrix::zeros(n, r));
            continue;
        }
        // contract every other mode with the factor transpose
        let mut partial = w.clone();
        for nu in 0..b.order() {
            if nu != mu {
                partial = partial.mode_contract(nu, &transposed[nu])?;
            }
        }
        let a = partial.matricize(mu)?;
        let m_core = b.tucker().core().matricize(mu)?;
        let gram = &m_core * m_core.transpose();
        let svd = gram.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax == 0.0 || smin <= smax / CONDITION_LIMIT {
            return Err(GeometryError::SingularCore { mode: mu });
        }
        let rhs = (&a * m_core.transpose()).transpose();
        let solved = svd
            .solve(&rhs, 0.0)
            .map_err(|_| GeometryError::SingularCore { mode: mu })?;
        let unconstrained = solved.transpose();
        let f = &factors[mu];
        // second pass removes roundoff left in the factor span when the
        // unconstrained solution is much larger than its projection
        let once = &unconstrained - f * (f.transpose() * &unconstrained);
        let du = &once - f * (f.transpose() * &once);
        d_factors.push(du);
    }
    Ok(TangentVector { d_core, d_factors })
}

/// Invert the tangent embedding. Requires `w` to lie in the tangent space:
/// the residual after re-embedding must stay below `tol` relative to |w|.
pub fn extract_tangent(
    b: &BasePoint,
    w: &DenseTensor,
    tol: f64,
) -> Result<TangentVector, GeometryError> {
    let tv = tangent_components(b, w)?;
    let back = embed_tangent(b, &tv)?;
    let scale = w.norm2();
    let residual = back.sub(w).norm2();
    if scale > 0.0 && residual > tol * scale {
        return Err(GeometryError::NotInTangentSpace {
            residual: residual / scale,
        });
    }
    Ok(tv)
}

/// Orthonormal spanning set of the tangent space at `b`, ordered as the
/// core block (all factor-column elementary tensors, core multi-index
/// row-major) followed by one block per mode (complement column major,
/// then the orthonormalized coefficient side).
pub fn tangent_basis(b: &BasePoint) -> Result<Vec<DenseTensor>, GeometryError> {
    let factors = b.tucker().factors();
    let mut basis = Vec::with_capacity(b.tangent_dim());
    let core_shape = b.tucker().core().shape().clone();

    for idx in core_shape.indices() {
        let mut unit = DenseTensor::zeros(core_shape.clone());
        unit.set(&idx, 1.0);
        basis.push(expand(&unit, factors)?);
    }

    for mu in 0..b.order() {
        let w = b.complement(mu);
        if w.ncols() == 0 {
            continue;
        }
        let r = b.rank_dims()[mu];
        let m_core = b.tucker().core().matricize(mu)?;
        // orthonormal basis of the row space of the core matricization
        let qr = m_core.transpose().qr();
        let q = qr.q().columns(0, r).into_owned();
        let mut reduced_dims = core_shape.dims().to_vec();
        reduced_dims[mu] = 1;
        let reduced_shape = Shape::new(reduced_dims)?;
        for k in 0..r {
            let row = DMatrix::from_fn(1, q.nrows(), |_, j| q[(j, k)]);
            let coefficient_core = dematricize(&row, mu, &reduced_shape)?;
            for j in 0..w.ncols() {
                let mut mats: Vec<DMatrix<f64>> = factors.to_vec();
                mats[mu] = DMatrix::from_column_slice(w.nrows(), 1, w.column(j).as_slice());
                basis.push(expand(&coefficient_core, &mats)?);
            }
        }
    }
    Ok(basis)
}

/// Operator norm of the mode-a factor direction seen as a map from the
/// factor span to the complement, with both sides carrying the mode norm.
/// Exact for p = 2 with unit weights; otherwise estimated by projected
/// gradient ascent on the Euclidean unit sphere with multiple starts.
pub fn factor_direction_operator_norm(
    du: &DMatrix<f64>,
    f: &DMatrix<f64>,
    mode_norm: &ModeNorm,
    starts: usize,
) -> f64 {
    let r = f.ncols();
    if r == 0 || du.norm() == 0.0 {
        return 0.0;
    }
    let p = mode_norm.p();
    let unit_weights = mode_norm.weights().iter().all(|&w| w == 1.0);
    if p == 2.0 && unit_weights {
        return du.clone().singular_values().max();
    }

    let eval = |v: &nalgebra::DVector<f64>| -> f64 { mode_norm.eval(v.as_slice()) };
    // gradient of the norm away from zero
    let grad = |v: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        let norm = eval(v);
        if norm == 0.0 {
            return nalgebra::DVector::zeros(v.len());
        }
        nalgebra::DVector::from_fn(v.len(), |i, _| {
            let w = mode_norm.weights()[i];
            let x: f64 = v[i];
            norm.powf(1.0 - p) * w * x.abs().powf(p - 1.0) * x.signum()
        })
    };
    let ratio = |c: &nalgebra::DVector<f64>| -> f64 {
        let num = eval(&(du * c));
        let den = eval(&(f * c));
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    };

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7a6e67656e74);
    let mut best = 0.0_f64;
    let mut starting_points: Vec<nalgebra::DVector<f64>> = (0..r)
        .map(|i| {
            let mut e = nalgebra::DVector::zeros(r);
            e[i] = 1.0;
            e
        })
        .collect();
    for _ in 0..starts {
        let v = nalgebra::DVector::from_fn(r, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 0.0 {
            starting_points.push(v.normalize());
        }
    }
    for mut c in starting_points {
        let mut step = 0.5;
        let mut value = ratio(&c);
        for _ in 0..200 {
            let num_vec = du * &c;
            let den_vec = f * &c;
            let num = eval(&num_vec);
            let den = eval(&den_vec);
            if num == 0.0 || den == 0.0 {
                break;
            }
            // ascent direction of log(num/den)
            let g = du.transpose() * grad(&num_vec) / num - f.transpose() * grad(&den_vec) / den;
            if g.norm() < 1e-14 {
                break;
            }
            let mut improved = false;
            while step > 1e-12 {
                let candidate = (&c + &g * step).normalize();
                let cv = ratio(&candidate);
                if cv > value {
                    c = candidate;
                    value = cv;
                    improved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.max(value);
    }
    best
}

/// Product norm of a tangent vector: Frobenius norm of the core direction
/// plus the sum of the per-mode operator norms of the factor directions.
pub fn tangent_norm(
    b: &BasePoint,
    tv: &TangentVector,
    mode_norms: &[ModeNorm],
    starts: usize,
) -> f64 {
    let mut total = tv.d_core.norm2();
    for mu in 0..b.order() {
        total += factor_direction_operator_norm(
            &tv.d_factors[mu],
            b.factor(mu),
            &mode_norms[mu],
            starts,
        );
    }
    total
}
