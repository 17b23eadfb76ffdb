//! Projections of ambient tensors onto the tangent space at a base point:
//! the Hilbert orthogonal projection in closed form, the l^p metric and
//! generalized projections by convex first-order descent over an orthonormal
//! tangent basis, the normalized duality mapping, and a certified lower
//! bound for the injective norm.

use crate::geometry::{
    embed_tangent, tangent_basis, tangent_components, BasePoint, GeometryError, TangentVector,
};
use crate::tensor::{
    inner, AmbientNorm, DenseTensor, MatrixJson, ModeNorm, Shape, TensorError,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("operation requires a nonzero tensor")]
    ZeroTensor,
    #[error(
        "solver stopped after {} iterations with duality residual {} above tolerance {tol}",
        report.iterations,
        report.duality_residual
    )]
    MaxIterationsExceeded {
        report: Box<ProjectionReport>,
        tol: f64,
    },
}

/// Element of the dual space produced by the duality mapping; `q` is the
/// dual exponent p / (p - 1).
#[derive(Debug, Clone)]
pub struct DualVector {
    pub coefficients: DenseTensor,
    pub q: f64,
}

/// Normalized duality mapping for the weighted entrywise l^p norm:
/// J(x)_i = |x|_p^{2-p} w_i |x_i|^{p-1} sign(x_i), J(0) = 0. It satisfies
/// <x, J(x)> = |x|^2 and |J(x)|_* = |x|.
pub fn duality_map(x: &DenseTensor, nrm: &AmbientNorm) -> Result<DualVector, ProjectionError> {
    nrm.check_shape(x.shape())?;
    let p = nrm.p();
    let norm = nrm.eval(x)?;
    let mut coefficients = DenseTensor::zeros(x.shape().clone());
    if norm > 0.0 {
        let prefactor = norm.powf(2.0 - p);
        for idx in x.shape().indices() {
            let v = x.get(&idx);
            if v != 0.0 {
                let w = nrm.weight_at(&idx);
                coefficients.set(&idx, prefactor * w * v.abs().powf(p - 1.0) * v.signum());
            }
        }
    }
    Ok(DualVector {
        coefficients,
        q: nrm.q(),
    })
}

/// Norm of a dual-space element: (sum w^(1-q) |f|^q)^(1/q) with the product
/// weights of `nrm`; this is the dual of the ambient norm under the
/// unweighted pairing.
pub fn dual_norm(f: &DenseTensor, nrm: &AmbientNorm) -> Result<f64, ProjectionError> {
    nrm.check_shape(f.shape())?;
    let q = nrm.q();
    let mut sum = 0.0;
    for idx in f.shape().indices() {
        let w = nrm.weight_at(&idx);
        sum += w.powf(1.0 - q) * f.get(&idx).abs().powf(q);
    }
    Ok(sum.powf(1.0 / q))
}

/// Outcome of a tangent-space projection.
#[derive(Debug, Clone)]
pub struct ProjectionReport {
    pub tangent: TangentVector,
    pub objective: f64,
    pub duality_residual: f64,
    pub iterations: usize,
}

impl ProjectionReport {
    pub fn to_json(&self) -> String {
        let tangent = serde_json::json!({
            "d_core": {
                "dims": self.tangent.d_core.shape().dims(),
                "data": self.tangent.d_core.data(),
            },
            "d_factors": self
                .tangent
                .d_factors
                .iter()
                .map(MatrixJson::from_matrix)
                .map(|m| serde_json::json!({"rows": m.rows, "cols": m.cols, "data": m.data}))
                .collect::<Vec<_>>(),
        });
        serde_json::json!({
            "objective": self.objective,
            "duality_residual": self.duality_residual,
            "iterations": self.iterations,
            "tangent": tangent,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

/// Orthogonal projection onto the tangent space: closed form through the
/// factor contractions and per-mode Gram solves. The residual g - w is
/// Euclidean-orthogonal to the tangent space.
pub fn project_hilbert(b: &BasePoint, g: &DenseTensor) -> Result<ProjectionReport, ProjectionError> {
    let tangent = tangent_components(b, g)?;
    let embedded = embed_tangent(b, &tangent)?;
    let residual = embedded.sub(g);
    let basis = tangent_basis(b)?;
    let nrm = AmbientNorm::uniform(2.0, g.shape())?;
    let duality_residual = metric_residual(&basis, &residual.scale(-1.0), g, &nrm)?;
    Ok(ProjectionReport {
        tangent,
        objective: residual.norm2(),
        duality_residual,
        iterations: 0,
    })
}

/// max_k |<z_k, J(r)>| / (|z_k| |r| |g|) with 0/0 -> 0; all norms ambient.
fn metric_residual(
    basis: &[DenseTensor],
    r: &DenseTensor,
    g: &DenseTensor,
    nrm: &AmbientNorm,
) -> Result<f64, ProjectionError> {
    let r_norm = nrm.eval(r)?;
    let g_norm = nrm.eval(g)?;
    // a residual at roundoff level has no resolvable direction
    if g_norm == 0.0 || r_norm <= 1e-13 * g_norm {
        return Ok(0.0);
    }
    let jr = duality_map(r, nrm)?;
    let mut worst = 0.0_f64;
    for z in basis {
        let z_norm = nrm.eval(z)?;
        if z_norm == 0.0 {
            continue;
        }
        let num = inner(z, &jr.coefficients)?.abs();
        worst = worst.max(num / (z_norm * r_norm * g_norm));
    }
    Ok(worst)
}

/// max_k |<z_k, s>| / (|z_k| |s|_* |g|) with s = J(g) - J(w), 0/0 -> 0.
fn generalized_residual(
    basis: &[DenseTensor],
    s: &DenseTensor,
    g: &DenseTensor,
    nrm: &AmbientNorm,
) -> Result<f64, ProjectionError> {
    let s_norm = dual_norm(s, nrm)?;
    let g_norm = nrm.eval(g)?;
    if g_norm == 0.0 || s_norm <= 1e-13 * g_norm {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for z in basis {
        let z_norm = nrm.eval(z)?;
        if z_norm == 0.0 {
            continue;
        }
        let num = inner(z, s)?.abs();
        worst = worst.max(num / (z_norm * s_norm * g_norm));
    }
    Ok(worst)
}

/// Lyapunov-type functional phi(u, v) = |u|^2 - 2 <u, J(v)> + |v|^2.
pub fn phi_functional(
    u: &DenseTensor,
    v: &DenseTensor,
    nrm: &AmbientNorm,
) -> Result<f64, ProjectionError> {
    let ju = duality_map(v, nrm)?;
    Ok(nrm.eval(u)?.powi(2) - 2.0 * inner(u, &ju.coefficients)? + nrm.eval(v)?.powi(2))
}

struct TangentLeastSquares {
    basis: Vec<DenseTensor>,
    matrix: DMatrix<f64>,
    g_vec: DVector<f64>,
    weights: DVector<f64>,
    shape: Shape,
}

impl TangentLeastSquares {
    fn assemble(
        b: &BasePoint,
        g: &DenseTensor,
        nrm: &AmbientNorm,
    ) -> Result<Self, ProjectionError> {
        nrm.check_shape(g.shape())?;
        let basis = tangent_basis(b)?;
        let n = g.data().len();
        let matrix = DMatrix::from_fn(n, basis.len(), |i, j| basis[j].data()[i]);
        let g_vec = DVector::from_column_slice(g.data());
        let mut weights = DVector::zeros(n);
        for idx in g.shape().indices() {
            let flat = g.flat_index(&idx);
            weights[flat] = nrm.weight_at(&idx);
        }
        Ok(TangentLeastSquares {
            basis,
            matrix,
            g_vec,
            weights,
            shape: g.shape().clone(),
        })
    }

    fn to_tensor(&self, v: &DVector<f64>) -> DenseTensor {
        let mut t = DenseTensor::zeros(self.shape.clone());
        t.data_mut().copy_from_slice(v.as_slice());
        t
    }

    fn embedded(&self, x: &DVector<f64>) -> DenseTensor {
        self.to_tensor(&(&self.matrix * x))
    }
}

enum Objective<'a> {
    /// |Bx - g|_p^p for p >= 2, |Bx - g|_p for p < 2 (same minimizer).
    Metric,
    /// phi(Bx, g) with J(g) precomputed.
    Generalized { jg: &'a DVector<f64> },
}

/// Value and gradient of the descent objective at x.
fn objective_eval(
    ls: &TangentLeastSquares,
    nrm: &AmbientNorm,
    obj: &Objective,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let p = nrm.p();
    match obj {
        Objective::Metric => {
            let r = &ls.matrix * x - &ls.g_vec;
            let mut fp = 0.0;
            let mut grad_r = DVector::zeros(r.len());
            for i in 0..r.len() {
                let a: f64 = r[i].abs();
                if a < 1e-150 {
                    continue; // safeguard at the kink of |.|^(p-1)
                }
                fp += ls.weights[i] * a.powf(p);
                grad_r[i] = ls.weights[i] * a.powf(p - 1.0) * r[i].signum();
            }
            if p >= 2.0 {
                (fp, ls.matrix.transpose() * grad_r * p)
            } else {
                let norm = fp.powf(1.0 / p);
                if norm == 0.0 {
                    (0.0, DVector::zeros(x.len()))
                } else {
                    let scale = norm.powf(1.0 - p);
                    (norm, ls.matrix.transpose() * grad_r * scale)
                }
            }
        }
        Objective::Generalized { jg } => {
            let u = &ls.matrix * x;
            let ut = ls.to_tensor(&u);
            let u_norm = nrm.eval(&ut).expect("shape checked at assembly");
            let g_norm_sq = {
                let gt = ls.to_tensor(&ls.g_vec);
                nrm.eval(&gt).expect("shape checked at assembly").powi(2)
            };
            let value = u_norm * u_norm - 2.0 * u.dot(jg) + g_norm_sq;
            // gradient of |u|^2 is 2 J(u)
            let ju = duality_coeffs(&u, &ls.weights, p, u_norm);
            let grad = ls.matrix.transpose() * (ju - *jg) * 2.0;
            (value, grad)
        }
    }
}

/// Coefficients of J(u) for a flat vector with per-entry weights.
fn duality_coeffs(u: &DVector<f64>, weights: &DVector<f64>, p: f64, u_norm: f64) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    if u_norm == 0.0 {
        return out;
    }
    let prefactor = u_norm.powf(2.0 - p);
    for i in 0..u.len() {
        let a: f64 = u[i].abs();
        if a >= 1e-150 {
            out[i] = prefactor * weights[i] * a.powf(p - 1.0) * u[i].signum();
        }
    }
    out
}

enum Optimality {
    Metric,
    Generalized,
}

/// Accelerated projected-coefficient descent with backtracking line search
/// and monotone restarts. The optimality test is the duality residual of
/// the selected projection notion.
#[allow(clippy::too_many_arguments)]
fn solve_descent(
    b: &BasePoint,
    g: &DenseTensor,
    nrm: &AmbientNorm,
    opts: &SolveOptions,
    which: Optimality,
) -> Result<ProjectionReport, ProjectionError> {
    let ls = TangentLeastSquares::assemble(b, g, nrm)?;
    let jg_tensor = duality_map(g, nrm)?;
    let jg = DVector::from_column_slice(jg_tensor.coefficients.data());
    let objective = match which {
        Optimality::Metric => Objective::Metric,
        Optimality::Generalized => Objective::Generalized { jg: &jg },
    };

    // warm start at the Euclidean projection (exact for p = 2)
    let warm = tangent_components(b, g)?;
    let warm_dense = embed_tangent(b, &warm)?;
    let coeffs: Vec<f64> = ls
        .basis
        .iter()
        .map(|z| inner(z, &warm_dense).expect("shapes agree"))
        .collect();
    let mut x = DVector::from_vec(coeffs);

    let residual_of = |x: &DVector<f64>| -> Result<(f64, DenseTensor), ProjectionError> {
        let w = ls.embedded(x);
        match which {
            Optimality::Metric => {
                let r = g.sub(&w);
                Ok((metric_residual(&ls.basis, &r, g, nrm)?, w))
            }
            Optimality::Generalized => {
                let jw = duality_map(&w, nrm)?;
                let s = jg_tensor.coefficients.sub(&jw.coefficients);
                Ok((generalized_residual(&ls.basis, &s, g, nrm)?, w))
            }
        }
    };

    let report_for = |x: &DVector<f64>,
                      residual: f64,
                      w: &DenseTensor,
                      iterations: usize|
     -> Result<ProjectionReport, ProjectionError> {
        let _ = x;
        let tangent = tangent_components(b, w)?;
        let objective = match which {
            Optimality::Metric => nrm.eval(&g.sub(w))?,
            Optimality::Generalized => phi_functional(w, g, nrm)?,
        };
        Ok(ProjectionReport {
            tangent,
            objective,
            duality_residual: residual,
            iterations,
        })
    };

    let (mut best_residual, w0) = residual_of(&x)?;
    if best_residual <= opts.tol {
        return report_for(&x, best_residual, &w0, 0);
    }
    let mut best_x = x.clone();

    let (mut fx, mut grad) = objective_eval(&ls, nrm, &objective, &x);
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut step = 1.0 / (1.0 + grad.norm());
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (fy, gy) = objective_eval(&ls, nrm, &objective, &y);
        // Armijo backtracking from y
        let mut accepted = None;
        let g2 = gy.norm_squared();
        for _ in 0..60 {
            let candidate = &y - &gy * step;
            let (fc, _) = objective_eval(&ls, nrm, &objective, &candidate);
            if fc <= fy - 1e-4 * step * g2 {
                accepted = Some((candidate, fc));
                break;
            }
            step *= 0.5;
        }
        let (x_new, f_new) = match accepted {
            Some(v) => v,
            None => break, // stalled at numerical precision
        };
        if f_new > fx {
            // restart the momentum from the current point
            y = x.clone();
            momentum = 1.0;
            continue;
        }
        let momentum_new = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        y = &x_new + (&x_new - &x) * ((momentum - 1.0) / momentum_new);
        x = x_new;
        fx = f_new;
        momentum = momentum_new;
        step *= 1.25;

        if iterations % 5 == 0 || iterations < 10 {
            let (res, w) = residual_of(&x)?;
            if res < best_residual {
                best_residual = res;
                best_x = x.clone();
            }
            if res <= opts.tol {
                return report_for(&x, res, &w, iterations);
            }
        }
        grad = gy;
        let _ = &grad;
    }

    let (res, w) = residual_of(&best_x)?;
    let final_residual = res.min(best_residual);
    let report = report_for(&best_x, final_residual, &w, iterations)?;
    Err(ProjectionError::MaxIterationsExceeded {
        report: Box::new(report),
        tol: opts.tol,
    })
}

/// Best approximation of `g` in the tangent space in the weighted l^p norm.
/// Success requires the metric-projection duality residual to fall below
/// `opts.tol`; for p = 2 this coincides with `project_hilbert`.
pub fn project_metric_lp(
    b: &BasePoint,
    g: &DenseTensor,
    nrm: &AmbientNorm,
    opts: &SolveOptions,
) -> Result<ProjectionReport, ProjectionError> {
    solve_descent(b, g, nrm, opts, Optimality::Metric)
}

/// Minimizer of phi(., g) over the tangent space. On a linear subspace the
/// variational inequality collapses to the equality <z, J(g) - J(w)> = 0
/// for every basis element, which is what the residual reports.
pub fn project_generalized_lp(
    b: &BasePoint,
    g: &DenseTensor,
    nrm: &AmbientNorm,
    opts: &SolveOptions,
) -> Result<ProjectionReport, ProjectionError> {
    solve_descent(b, g, nrm, opts, Optimality::Generalized)
}

#[derive(Debug, Clone, Copy)]
pub struct InjectiveOptions {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for InjectiveOptions {
    fn default() -> Self {
        InjectiveOptions {
            restarts: 20,
            max_sweeps: 200,
            seed: 0,
        }
    }
}

/// Certified lower bound of the injective norm together with the dual unit
/// vectors achieving it. Alternating maximization over the modes: each
/// update replaces one dual vector by the norming functional of the
/// corresponding mode contraction. For d = 2, p = 2 the exact value is the
/// largest singular value of the weighted matricization.
pub fn injective_norm(
    t: &DenseTensor,
    nrm: &AmbientNorm,
    opts: &InjectiveOptions,
) -> Result<(f64, Vec<Vec<f64>>), ProjectionError> {
    nrm.check_shape(t.shape())?;
    if t.is_zero() {
        return Err(ProjectionError::ZeroTensor);
    }
    if t.order() == 2 && nrm.p() == 2.0 {
        return injective_norm_svd(t, nrm);
    }

    let d = t.order();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_value = 0.0_f64;
    let mut best_duals: Option<Vec<Vec<f64>>> = None;

    for _ in 0..opts.restarts.max(1) {
        let mut duals: Vec<Vec<f64>> = (0..d)
            .map(|mu| {
                let n = t.shape().dim(mu);
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                normalize_dual(v, nrm.mode_norm(mu))
            })
            .collect();
        let mut value = 0.0_f64;
        for _ in 0..opts.max_sweeps {
            let mut sweep_value = value;
            let mut dead = false;
            for mu in 0..d {
                let c = contract_except(t, &duals, mu)?;
                let mode = nrm.mode_norm(mu);
                let c_norm = mode.eval(&c);
                if c_norm == 0.0 {
                    dead = true;
                    break;
                }
                duals[mu] = mode_duality(&c, mode, c_norm)
                    .iter()
                    .map(|x| x / c_norm)
                    .collect();
                sweep_value = c_norm;
            }
            if dead {
                break;
            }
            if sweep_value <= value * (1.0 + 1e-13) {
                value = sweep_value.max(value);
                break;
            }
            value = sweep_value;
        }
        if value > best_value {
            best_value = value;
            best_duals = Some(duals);
        }
    }

    let duals = best_duals.unwrap_or_else(|| {
        (0..d)
            .map(|mu| {
                let n = t.shape().dim(mu);
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                normalize_dual(v, nrm.mode_norm(mu))
            })
            .collect()
    });
    Ok((best_value, duals))
}

fn injective_norm_svd(
    t: &DenseTensor,
    nrm: &AmbientNorm,
) -> Result<(f64, Vec<Vec<f64>>), ProjectionError> {
    // weighted l^2 mode norms reduce to an SVD of D1^(1/2) T D2^(1/2)
    let m = t.matricize(0)?;
    let w0: Vec<f64> = nrm.mode_norm(0).weights().to_vec();
    let w1: Vec<f64> = nrm.mode_norm(1).weights().to_vec();
    let d0 = DMatrix::from_diagonal(&DVector::from_iterator(
        w0.len(),
        w0.iter().map(|w| w.sqrt()),
    ));
    let d1 = DMatrix::from_diagonal(&DVector::from_iterator(
        w1.len(),
        w1.iter().map(|w| w.sqrt()),
    ));
    let scaled = &d0 * m * &d1;
    let svd = scaled.svd(true, true);
    let sigma = svd.singular_values.max();
    let k = svd
        .singular_values
        .iter()
        .position(|&s| s == sigma)
        .unwrap_or(0);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let phi0: Vec<f64> = (0..w0.len()).map(|i| w0[i].sqrt() * u[(i, k)]).collect();
    let phi1: Vec<f64> = (0..w1.len()).map(|j| w1[j].sqrt() * vt[(k, j)]).collect();
    Ok((sigma, vec![phi0, phi1]))
}

/// Contract every mode but `mu` with the matching dual vector; returns the
/// remaining mode-`mu` fiber.
pub fn contract_except(
    t: &DenseTensor,
    duals: &[Vec<f64>],
    mu: usize,
) -> Result<Vec<f64>, ProjectionError> {
    let n = t.shape().dim(mu);
    let mut out = vec![0.0; n];
    for idx in t.shape().indices() {
        let mut prod = t.get(&idx);
        if prod == 0.0 {
            continue;
        }
        for (nu, phi) in duals.iter().enumerate() {
            if nu != mu {
                prod *= phi[idx[nu]];
            }
        }
        out[idx[mu]] += prod;
    }
    Ok(out)
}

/// Pairing of an elementary dual tensor with t.
pub fn pair_with_duals(t: &DenseTensor, duals: &[Vec<f64>]) -> Result<f64, ProjectionError> {
    let c = contract_except(t, duals, 0)?;
    Ok(c.iter().zip(&duals[0]).map(|(a, b)| a * b).sum())
}

fn mode_duality(c: &[f64], mode: &ModeNorm, c_norm: f64) -> Vec<f64> {
    let p = mode.p();
    let prefactor = c_norm.powf(2.0 - p);
    c.iter()
        .zip(mode.weights())
        .map(|(&x, &w)| {
            if x == 0.0 {
                0.0
            } else {
                prefactor * w * x.abs().powf(p - 1.0) * x.signum()
            }
        })
        .collect()
}

/// Scale a dual-space vector to unit dual norm (returns zero vector as-is).
fn normalize_dual(v: Vec<f64>, mode: &ModeNorm) -> Vec<f64> {
    let n = mode_dual_norm(&v, mode);
    if n == 0.0 {
        v
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// Dual norm of a mode functional: (sum w^(1-q) |f|^q)^(1/q).
pub fn mode_dual_norm(v: &[f64], mode: &ModeNorm) -> f64 {
    let p = mode.p();
    let q = p / (p - 1.0);
    v.iter()
        .zip(mode.weights())
        .map(|(x, w)| w.powf(1.0 - q) * x.abs().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}
