//! Flow generators as Kronecker sums, the reduced-order integrator on the
//! fixed-rank set driven by tangent-space projections, the time-dependent
//! Hartree integrator for rank (1,...,1) with its closed-form scale factor,
//! and a full-space reference solver.

use crate::geometry::{embed_tangent, make_base, GeometryError};
use crate::projection::{
    project_generalized_lp, project_hilbert, project_metric_lp, ProjectionError, SolveOptions,
};
use crate::tensor::{
    elementary_tensor, AmbientNorm, DenseTensor, MatrixJson, TensorError,
};
use crate::tucker::{
    hosvd_truncate, relative_min_singular_value, tucker_to_dense, Rank, TuckerError, TuckerTensor,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Dense state-space cap for the full-space reference solver.
pub const REFERENCE_VOLUME_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tucker(#[from] TuckerError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("operator term {term} has {got} matrices, expected {expected}")]
    TermArity {
        term: usize,
        expected: usize,
        got: usize,
    },
    #[error("operator matrix in term {term}, mode {mode} is {rows}x{cols}, expected square of size {n}")]
    TermShape {
        term: usize,
        mode: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("operator has no terms")]
    EmptyOperator,
    #[error("factor in mode {mode} has norm {norm}, expected 1")]
    NonUnitFactor { mode: usize, norm: f64 },
    #[error("time step and horizon must be positive, got dt = {dt}, T = {t_final}")]
    InvalidTimeGrid { dt: f64, t_final: f64 },
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("rank degeneracy at step {step}: mode {mode} lost rank")]
    RankDegeneracy { step: usize, mode: usize },
    #[error("projection solver failed at step {step}: residual {residual} above tolerance")]
    ProjectorFailure { step: usize, residual: f64 },
    #[error("state volume {volume} exceeds the reference cap {cap}")]
    DimensionCap { volume: usize, cap: usize },
    #[error("initial value is not minimal at the requested rank")]
    BadInitialValue,
    #[error("malformed operator file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Finite sum of elementary Kronecker operators: one square matrix per mode
/// and term.
#[derive(Debug, Clone)]
pub struct KroneckerSumOperator {
    terms: Vec<Vec<DMatrix<f64>>>,
}

impl KroneckerSumOperator {
    pub fn new(terms: Vec<Vec<DMatrix<f64>>>) -> Result<Self, DynamicsError> {
        if terms.is_empty() {
            return Err(DynamicsError::EmptyOperator);
        }
        let d = terms[0].len();
        if d < 2 {
            return Err(DynamicsError::TermArity {
                term: 0,
                expected: 2,
                got: d,
            });
        }
        for (k, term) in terms.iter().enumerate() {
            if term.len() != d {
                return Err(DynamicsError::TermArity {
                    term: k,
                    expected: d,
                    got: term.len(),
                });
            }
            for (mode, m) in term.iter().enumerate() {
                let n = terms[0][mode].nrows();
                if m.nrows() != m.ncols() || m.nrows() != n {
                    return Err(DynamicsError::TermShape {
                        term: k,
                        mode,
                        rows: m.nrows(),
                        cols: m.ncols(),
                        n,
                    });
                }
            }
        }
        Ok(KroneckerSumOperator { terms })
    }

    /// Identity operator on the given mode sizes.
    pub fn identity(dims: &[usize]) -> Result<Self, DynamicsError> {
        KroneckerSumOperator::new(vec![dims
            .iter()
            .map(|&n| DMatrix::identity(n, n))
            .collect()])
    }

    /// Kronecker sum of per-mode matrices: sum_a I x ... x A_a x ... x I.
    pub fn kronecker_sum(mats: Vec<DMatrix<f64>>) -> Result<Self, DynamicsError> {
        let d = mats.len();
        let dims: Vec<usize> = mats.iter().map(|m| m.nrows()).collect();
        let terms = (0..d)
            .map(|alpha| {
                (0..d)
                    .map(|mode| {
                        if mode == alpha {
                            mats[alpha].clone()
                        } else {
                            DMatrix::identity(dims[mode], dims[mode])
                        }
                    })
                    .collect()
            })
            .collect();
        KroneckerSumOperator::new(terms)
    }

    pub fn terms(&self) -> &[Vec<DMatrix<f64>>] {
        &self.terms
    }

    pub fn order(&self) -> usize {
        self.terms[0].len()
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.terms[0].iter().map(|m| m.nrows()).collect()
    }
}

/// Apply the operator: sum over terms of the per-mode contraction chain.
pub fn apply_operator(
    a: &KroneckerSumOperator,
    t: &DenseTensor,
) -> Result<DenseTensor, DynamicsError> {
    if a.mode_dims() != t.shape().dims() {
        return Err(DynamicsError::Tensor(TensorError::ShapeMismatch(
            a.mode_dims(),
            t.shape().dims().to_vec(),
        )));
    }
    let mut out = DenseTensor::zeros(t.shape().clone());
    for term in &a.terms {
        let mut partial = t.clone();
        for (mode, m) in term.iter().enumerate() {
            partial = partial.mode_contract(mode, m)?;
        }
        out = out.add_scaled(1.0, &partial);
    }
    Ok(out)
}

fn quadratic_form(m: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (m * x).dot(y)
}

/// Mean-field matrix of mode `alpha` without the unit-norm guard.
fn mean_field_unchecked(
    a: &KroneckerSumOperator,
    factors: &[DVector<f64>],
    alpha: usize,
) -> DMatrix<f64> {
    let n = a.mode_dims()[alpha];
    let mut out = DMatrix::zeros(n, n);
    for term in &a.terms {
        let mut weight = 1.0;
        for (beta, v) in factors.iter().enumerate() {
            if beta != alpha {
                weight *= quadratic_form(&term[beta], v, v);
            }
        }
        out += &term[alpha] * weight;
    }
    out
}

/// Single-mode operator realizing the bilinear form
/// a_alpha(z, y) = <A(z x rest), y x rest> for unit factors.
pub fn mean_field(
    a: &KroneckerSumOperator,
    factors: &[DVector<f64>],
    alpha: usize,
) -> Result<DMatrix<f64>, DynamicsError> {
    for (mode, v) in factors.iter().enumerate() {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(DynamicsError::NonUnitFactor { mode, norm });
        }
    }
    Ok(mean_field_unchecked(a, factors, alpha))
}

/// Rayleigh quotient <A(x v), x v> for unit factors, computed mode by mode.
pub fn rayleigh_quotient(a: &KroneckerSumOperator, factors: &[DVector<f64>]) -> f64 {
    a.terms
        .iter()
        .map(|term| {
            term.iter()
                .zip(factors)
                .map(|(m, v)| quadratic_form(m, v, v))
                .product::<f64>()
        })
        .sum()
}

/// Rank-(1,...,1) state: scale factor and one unit vector per mode.
#[derive(Debug, Clone)]
pub struct HartreeState {
    pub lambda: f64,
    pub factors: Vec<DVector<f64>>,
}

impl HartreeState {
    pub fn new(lambda: f64, factors: Vec<DVector<f64>>) -> Result<Self, DynamicsError> {
        for (mode, v) in factors.iter().enumerate() {
            let norm = v.norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(DynamicsError::NonUnitFactor { mode, norm });
            }
        }
        Ok(HartreeState { lambda, factors })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Ambient reconstruction lambda * (x v_a).
    pub fn to_dense(&self) -> Result<DenseTensor, DynamicsError> {
        let vectors: Vec<Vec<f64>> = self
            .factors
            .iter()
            .map(|v| v.iter().copied().collect())
            .collect();
        Ok(elementary_tensor(&vectors)?.scale(self.lambda))
    }

    fn is_finite(&self) -> bool {
        self.lambda.is_finite() && self.factors.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Time derivative of a Hartree state under the reduced flow: the scale
/// factor grows with the Rayleigh quotient, each factor moves by the
/// sphere-projected mean field. Factors are normalized internally so the
/// formulas extend smoothly to the slightly off-sphere stage states of a
/// Runge-Kutta sweep.
pub fn hartree_rhs(
    a: &KroneckerSumOperator,
    state: &HartreeState,
) -> Result<(f64, Vec<DVector<f64>>), DynamicsError> {
    let unit: Vec<DVector<f64>> = state
        .factors
        .iter()
        .enumerate()
        .map(|(mode, v)| {
            let norm = v.norm();
            if (norm - 1.0).abs() > 0.5 {
                Err(DynamicsError::NonUnitFactor { mode, norm })
            } else {
                Ok(v / norm)
            }
        })
        .collect::<Result<_, _>>()?;
    let d_lambda = rayleigh_quotient(a, &unit) * state.lambda;
    let d_factors = (0..state.order())
        .map(|alpha| {
            let m = mean_field_unchecked(a, &unit, alpha);
            let v = &unit[alpha];
            let mv = &m * v;
            &mv - v * mv.dot(v)
        })
        .collect();
    Ok((d_lambda, d_factors))
}

/// Per-step integration diagnostics; fields that do not apply to a given
/// integrator are zero.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub time: f64,
    pub lambda: f64,
    pub rayleigh: f64,
    pub renorm_drift: f64,
    pub projection_residual: f64,
    pub min_core_sv_rel: f64,
    pub reference_error: Option<f64>,
}

impl StepDiagnostics {
    fn blank(time: f64) -> Self {
        StepDiagnostics {
            time,
            lambda: 0.0,
            rayleigh: 0.0,
            renorm_drift: 0.0,
            projection_residual: 0.0,
            min_core_sv_rel: 0.0,
            reference_error: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrajectoryStates {
    Hartree(Vec<HartreeState>),
    Tucker(Vec<TuckerTensor>),
    Dense(Vec<DenseTensor>),
}

/// Time grid, the state after every step (including the initial one), and
/// one diagnostics row per accepted step.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: TrajectoryStates,
    pub steps: Vec<StepDiagnostics>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Dense reconstruction of the state at index `i`.
    pub fn dense_state(&self, i: usize) -> Result<DenseTensor, DynamicsError> {
        match &self.states {
            TrajectoryStates::Hartree(s) => s[i].to_dense(),
            TrajectoryStates::Tucker(s) => Ok(tucker_to_dense(&s[i])?),
            TrajectoryStates::Dense(s) => Ok(s[i].clone()),
        }
    }

    pub fn terminal_dense(&self) -> Result<DenseTensor, DynamicsError> {
        self.dense_state(self.len() - 1)
    }

    /// Fill the per-step ambient error against a reference trajectory on
    /// the same time grid.
    pub fn attach_reference_errors(
        &mut self,
        reference: &TrajectoryRecord,
    ) -> Result<(), DynamicsError> {
        for (k, step) in self.steps.iter_mut().enumerate() {
            let own = match &self.states {
                TrajectoryStates::Hartree(s) => s[k + 1].to_dense()?,
                TrajectoryStates::Tucker(s) => tucker_to_dense(&s[k + 1])?,
                TrajectoryStates::Dense(s) => s[k + 1].clone(),
            };
            let other = reference.dense_state(k + 1)?;
            step.reference_error = Some(own.sub(&other).norm2());
        }
        Ok(())
    }

    /// CSV with one row per step. Floats use the shortest round-trip form,
    /// so rerunning an identical configuration yields identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "step,t,lambda,rayleigh,renorm_drift,projection_residual,min_core_sv_rel,reference_error\n",
        );
        for (k, s) in self.steps.iter().enumerate() {
            let reference = s
                .reference_error
                .map(|e| format!("{e:?}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
                k + 1,
                s.time,
                s.lambda,
                s.rayleigh,
                s.renorm_drift,
                s.projection_residual,
                s.min_core_sv_rel,
                reference
            ));
        }
        out
    }

    /// Full states as JSON.
    pub fn states_to_json(&self) -> String {
        let states: Vec<serde_json::Value> = match &self.states {
            TrajectoryStates::Hartree(s) => s
                .iter()
                .map(|h| {
                    serde_json::json!({
                        "lambda": h.lambda,
                        "factors": h.factors.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>(),
                    })
                })
                .collect(),
            TrajectoryStates::Tucker(s) => s
                .iter()
                .map(|u| {
                    serde_json::json!({
                        "core": {"dims": u.core().shape().dims(), "data": u.core().data()},
                        "factors": u
                            .factors()
                            .iter()
                            .map(|f| {
                                let m = MatrixJson::from_matrix(f);
                                serde_json::json!({"rows": m.rows, "cols": m.cols, "data": m.data})
                            })
                            .collect::<Vec<_>>(),
                    })
                })
                .collect(),
            TrajectoryStates::Dense(s) => s
                .iter()
                .map(|t| serde_json::json!({"dims": t.shape().dims(), "data": t.data()}))
                .collect(),
        };
        serde_json::json!({"times": self.times, "states": states}).to_string()
    }
}

fn time_grid(t_final: f64, dt: f64) -> Result<usize, DynamicsError> {
    if !(dt > 0.0) || !(t_final >= 0.0) || !dt.is_finite() || !t_final.is_finite() {
        return Err(DynamicsError::InvalidTimeGrid { dt, t_final });
    }
    Ok((t_final / dt).round() as usize)
}

/// Classical RK4 on (lambda, v_1,...,v_d) with factor renormalization after
/// every step; the drift removed by renormalization is recorded, as is the
/// Rayleigh quotient used by the closed-form scale-factor check.
pub fn integrate_hartree(
    a: &KroneckerSumOperator,
    s0: &HartreeState,
    t_final: f64,
    dt: f64,
) -> Result<TrajectoryRecord, DynamicsError> {
    let steps = time_grid(t_final, dt)?;
    let mut states = vec![s0.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    let mut times = vec![0.0];
    let mut current = s0.clone();

    for step in 0..steps {
        let k1 = hartree_rhs(a, &current)?;
        let s2 = advance_hartree(&current, &k1, dt / 2.0);
        let k2 = hartree_rhs(a, &s2)?;
        let s3 = advance_hartree(&current, &k2, dt / 2.0);
        let k3 = hartree_rhs(a, &s3)?;
        let s4 = advance_hartree(&current, &k3, dt);
        let k4 = hartree_rhs(a, &s4)?;

        let lambda = current.lambda
            + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        let mut factors = Vec::with_capacity(current.order());
        let mut drift = 0.0_f64;
        for mode in 0..current.order() {
            let v = &current.factors[mode]
                + (&k1.1[mode] + (&k2.1[mode] + &k3.1[mode]) * 2.0 + &k4.1[mode]) * (dt / 6.0);
            let norm = v.norm();
            drift = drift.max((norm - 1.0).abs());
            factors.push(v / norm);
        }
        let next = HartreeState { lambda, factors };
        if !next.is_finite() {
            return Err(DynamicsError::NonFiniteState { step });
        }
        let t = (step + 1) as f64 * dt;
        let mut diag = StepDiagnostics::blank(t);
        diag.lambda = next.lambda;
        diag.rayleigh = rayleigh_quotient(a, &next.factors);
        diag.renorm_drift = drift;
        diag.min_core_sv_rel = 1.0;
        diagnostics.push(diag);
        times.push(t);
        states.push(next.clone());
        current = next;
    }

    Ok(TrajectoryRecord {
        times,
        states: TrajectoryStates::Hartree(states),
        steps: diagnostics,
    })
}

fn advance_hartree(
    s: &HartreeState,
    rhs: &(f64, Vec<DVector<f64>>),
    h: f64,
) -> HartreeState {
    HartreeState {
        lambda: s.lambda + h * rhs.0,
        factors: s
            .factors
            .iter()
            .zip(&rhs.1)
            .map(|(v, dv)| v + dv * h)
            .collect(),
    }
}

/// Scale factor predicted by the closed-form exponential of the trapezoid
/// quadrature of the recorded Rayleigh quotients; returns the relative
/// deviation of the integrated scale factor from it.
pub fn hartree_lambda_consistency(
    a: &KroneckerSumOperator,
    record: &TrajectoryRecord,
) -> Result<f64, DynamicsError> {
    let states = match &record.states {
        TrajectoryStates::Hartree(s) => s,
        _ => return Ok(0.0),
    };
    if states.len() < 2 {
        return Ok(0.0);
    }
    let mut integral = 0.0;
    for k in 0..states.len() - 1 {
        let r0 = rayleigh_quotient(a, &states[k].factors);
        let r1 = rayleigh_quotient(a, &states[k + 1].factors);
        integral += 0.5 * (r0 + r1) * (record.times[k + 1] - record.times[k]);
    }
    let predicted = states[0].lambda * integral.exp();
    let actual = states[states.len() - 1].lambda;
    Ok((actual - predicted).abs() / actual.abs().max(f64::MIN_POSITIVE))
}

/// A time-dependent vector field on dense tensors.
pub trait Flow {
    fn eval(&self, t: f64, u: &DenseTensor) -> Result<DenseTensor, DynamicsError>;
}

impl Flow for KroneckerSumOperator {
    fn eval(&self, _t: f64, u: &DenseTensor) -> Result<DenseTensor, DynamicsError> {
        apply_operator(self, u)
    }
}

impl<F> Flow for F
where
    F: Fn(f64, &DenseTensor) -> Result<DenseTensor, DynamicsError>,
{
    fn eval(&self, t: f64, u: &DenseTensor) -> Result<DenseTensor, DynamicsError> {
        self(t, u)
    }
}

/// Tangent-space projection rule used inside the reduced integrator.
#[derive(Debug, Clone)]
pub enum TangentProjector {
    Hilbert,
    Metric { nrm: AmbientNorm, opts: SolveOptions },
    Generalized { nrm: AmbientNorm, opts: SolveOptions },
}

impl TangentProjector {
    fn project(
        &self,
        b: &crate::geometry::BasePoint,
        g: &DenseTensor,
        step: usize,
    ) -> Result<crate::projection::ProjectionReport, DynamicsError> {
        let mapped = |e: ProjectionError| -> DynamicsError {
            match e {
                ProjectionError::MaxIterationsExceeded { report, .. } => {
                    DynamicsError::ProjectorFailure {
                        step,
                        residual: report.duality_residual,
                    }
                }
                ProjectionError::Geometry(GeometryError::SingularCore { mode }) => {
                    DynamicsError::RankDegeneracy { step, mode }
                }
                ProjectionError::Geometry(g) => DynamicsError::Geometry(g),
                ProjectionError::Tensor(t) => DynamicsError::Tensor(t),
                ProjectionError::ZeroTensor => DynamicsError::ProjectorFailure {
                    step,
                    residual: f64::NAN,
                },
            }
        };
        match self {
            TangentProjector::Hilbert => project_hilbert(b, g).map_err(mapped),
            TangentProjector::Metric { nrm, opts } => {
                project_metric_lp(b, g, nrm, opts).map_err(mapped)
            }
            TangentProjector::Generalized { nrm, opts } => {
                project_generalized_lp(b, g, nrm, opts).map_err(mapped)
            }
        }
    }
}

fn truncate_or_degenerate(
    y: &DenseTensor,
    rank: &Rank,
    step: usize,
) -> Result<TuckerTensor, DynamicsError> {
    match hosvd_truncate(y, rank) {
        Ok((u, _)) => Ok(u),
        Err(TuckerError::RankUnreachable { mode, .. }) => {
            Err(DynamicsError::RankDegeneracy { step, mode })
        }
        Err(TuckerError::ZeroTensor) => Err(DynamicsError::RankDegeneracy { step, mode: 0 }),
        Err(e) => Err(DynamicsError::Tucker(e)),
    }
}

/// Projected Runge-Kutta on the fixed-rank set: every stage projects the
/// vector field onto the tangent space at the stage state, the dense update
/// moves along the embedded tangent combination, and the step ends with a
/// rank-r higher-order SVD truncation. Per step the worst stage projection
/// residual and the smallest relative singular value over the core
/// matricizations are recorded.
pub fn integrate_tucker_dlra(
    flow: &dyn Flow,
    v0: &TuckerTensor,
    t_final: f64,
    dt: f64,
    projector: &TangentProjector,
) -> Result<TrajectoryRecord, DynamicsError> {
    let rank = Rank::new(
        v0.core().shape().dims().to_vec(),
        &v0.ambient_shape(),
    )
    .map_err(|_| DynamicsError::BadInitialValue)?;
    if !crate::tucker::is_minimal(v0, crate::tucker::DEFAULT_RANK_TOL) {
        return Err(DynamicsError::BadInitialValue);
    }
    let steps = time_grid(t_final, dt)?;
    let mut states = vec![v0.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    let mut times = vec![0.0];
    let mut current = v0.clone();
    let mut current_dense = tucker_to_dense(&current)?;

    for step in 0..steps {
        let t = step as f64 * dt;
        let mut worst_residual = 0.0_f64;
        let mut stage = |y: &DenseTensor, ts: f64| -> Result<DenseTensor, DynamicsError> {
            let anchored = truncate_or_degenerate(y, &rank, step)?;
            let b = make_base(&anchored)?;
            let g = flow.eval(ts, y)?;
            let report = projector.project(&b, &g, step)?;
            worst_residual = worst_residual.max(report.duality_residual);
            Ok(embed_tangent(&b, &report.tangent)?)
        };
        let k1 = stage(&current_dense, t)?;
        let k2 = stage(&current_dense.add_scaled(dt / 2.0, &k1), t + dt / 2.0)?;
        let k3 = stage(&current_dense.add_scaled(dt / 2.0, &k2), t + dt / 2.0)?;
        let k4 = stage(&current_dense.add_scaled(dt, &k3), t + dt)?;
        let mut update = k1.clone();
        update = update.add_scaled(2.0, &k2);
        update = update.add_scaled(2.0, &k3);
        update = update.add_scaled(1.0, &k4);
        let proposal = current_dense.add_scaled(dt / 6.0, &update);
        if proposal.data().iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonFiniteState { step });
        }
        let next = truncate_or_degenerate(&proposal, &rank, step)?;
        let min_sv = (0..next.order())
            .map(|mu| {
                next.core()
                    .matricize(mu)
                    .map(|m| relative_min_singular_value(&m))
                    .unwrap_or(0.0)
            })
            .fold(f64::INFINITY, f64::min);
        current_dense = tucker_to_dense(&next)?;
        current = next;

        let t_end = (step + 1) as f64 * dt;
        let mut diag = StepDiagnostics::blank(t_end);
        diag.projection_residual = worst_residual;
        diag.min_core_sv_rel = min_sv;
        diagnostics.push(diag);
        times.push(t_end);
        states.push(current.clone());
    }

    Ok(TrajectoryRecord {
        times,
        states: TrajectoryStates::Tucker(states),
        steps: diagnostics,
    })
}

/// RK4 on the full dense state. A zero-length grid returns the initial
/// value unchanged.
pub fn reference_solve(
    flow: &dyn Flow,
    u0: &DenseTensor,
    t_final: f64,
    dt: f64,
) -> Result<TrajectoryRecord, DynamicsError> {
    let volume = u0.shape().volume();
    if volume > REFERENCE_VOLUME_CAP {
        return Err(DynamicsError::DimensionCap {
            volume,
            cap: REFERENCE_VOLUME_CAP,
        });
    }
    let steps = time_grid(t_final, dt)?;
    let mut states = vec![u0.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    let mut times = vec![0.0];
    let mut current = u0.clone();
    for step in 0..steps {
        let t = step as f64 * dt;
        let k1 = flow.eval(t, &current)?;
        let k2 = flow.eval(t + dt / 2.0, &current.add_scaled(dt / 2.0, &k1))?;
        let k3 = flow.eval(t + dt / 2.0, &current.add_scaled(dt / 2.0, &k2))?;
        let k4 = flow.eval(t + dt, &current.add_scaled(dt, &k3))?;
        let mut update = k1.clone();
        update = update.add_scaled(2.0, &k2);
        update = update.add_scaled(2.0, &k3);
        update = update.add_scaled(1.0, &k4);
        current = current.add_scaled(dt / 6.0, &update);
        if current.data().iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonFiniteState { step });
        }
        let t_end = (step + 1) as f64 * dt;
        let mut diag = StepDiagnostics::blank(t_end);
        diag.min_core_sv_rel = 1.0;
        diagnostics.push(diag);
        times.push(t_end);
        states.push(current.clone());
    }
    Ok(TrajectoryRecord {
        times,
        states: TrajectoryStates::Dense(states),
        steps: diagnostics,
    })
}

/// On-disk operator format: `{"terms": [[matrix-objects]]}`.
#[derive(Serialize, Deserialize)]
struct OperatorFile {
    terms: Vec<Vec<MatrixJson>>,
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<KroneckerSumOperator, DynamicsError> {
    let text = std::fs::read_to_string(path)?;
    parse_operator(&text)
}

pub fn parse_operator(text: &str) -> Result<KroneckerSumOperator, DynamicsError> {
    let file: OperatorFile =
        serde_json::from_str(text).map_err(|e| DynamicsError::Format(e.to_string()))?;
    let terms = file
        .terms
        .iter()
        .map(|term| {
            term.iter()
                .map(|m| m.to_matrix())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| DynamicsError::Format(e.to_string()))?;
    KroneckerSumOperator::new(terms)
}

pub fn operator_to_json(a: &KroneckerSumOperator) -> String {
    let file = OperatorFile {
        terms: a
            .terms
            .iter()
            .map(|term| term.iter().map(MatrixJson::from_matrix).collect())
            .collect(),
    };
    serde_json::to_string(&file).expect("operator serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{inner, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_operator(dims: &[usize], terms: usize, seed: u64) -> KroneckerSumOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = (0..terms)
            .map(|_| {
                dims.iter()
                    .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        KroneckerSumOperator::new(t).unwrap()
    }

    fn random_dense(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::new(dims.to_vec()).unwrap();
        let data = (0..shape.volume())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        DenseTensor::new(shape, data).unwrap()
    }

    fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        loop {
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if v.norm() > 1e-3 {
                return v.normalize();
            }
        }
    }

    /// Assemble the full matrix of the operator acting on row-major vec.
    fn assemble(a: &KroneckerSumOperator) -> DMatrix<f64> {
        let volume: usize = a.mode_dims().iter().product();
        let mut out = DMatrix::zeros(volume, volume);
        for term in a.terms() {
            let mut kron = term[0].clone();
            for m in &term[1..] {
                kron = kron.kronecker(m);
            }
            out += kron;
        }
        out
    }

    /// Matrix exponential by scaling and squaring on a Taylor series.
    fn matexp(m: &DMatrix<f64>) -> DMatrix<f64> {
        let norm = m.norm();
        let squarings = norm.log2().ceil().max(0.0) as usize + 1;
        let scaled = m / 2.0_f64.powi(squarings as i32);
        let n = m.nrows();
        let mut result = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..30 {
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

    #[test]
    fn identity_operator_acts_as_identity() {
        let t = random_dense(&[3, 2, 2], 1);
        let a = KroneckerSumOperator::identity(&[3, 2, 2]).unwrap();
        let s = apply_operator(&a, &t).unwrap();
        assert!(s.sub(&t).norm2() < 1e-14);
    }

    #[test]
    fn single_mode_term_acts_on_one_factor() {
        let v = vec![1.0, -0.5];
        let w = vec![2.0, 0.0, 1.0];
        let t = elementary_tensor(&[v.clone(), w.clone()]).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = KroneckerSumOperator::new(vec![vec![m.clone(), DMatrix::identity(3, 3)]]).unwrap();
        let s = apply_operator(&a, &t).unwrap();
        let expected = elementary_tensor(&[vec![-0.5, 1.0], w]).unwrap();
        assert!(s.sub(&expected).norm2() < 1e-14);
    }

    #[test]
    fn apply_matches_assembled_matrix() {
        let dims = [3usize, 2, 4];
        let a = random_operator(&dims, 3, 2);
        let t = random_dense(&dims, 3);
        let s = apply_operator(&a, &t).unwrap();
        let full = assemble(&a);
        let vec_t = DVector::from_column_slice(t.data());
        let oracle = &full * vec_t;
        for (x, y) in s.data().iter().zip(oracle.iter()) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn apply_is_linear() {
        let dims = [2usize, 3, 2];
        let a = random_operator(&dims, 2, 4);
        let t = random_dense(&dims, 5);
        let s = random_dense(&dims, 6);
        let lhs = apply_operator(&a, &t.add_scaled(0.7, &s)).unwrap();
        let rhs = apply_operator(&a, &t)
            .unwrap()
            .add_scaled(0.7, &apply_operator(&a, &s).unwrap());
        assert!(lhs.sub(&rhs).norm2() < 1e-12);
    }

    #[test]
    fn mean_field_of_identity_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = KroneckerSumOperator::identity(&[3, 4, 2]).unwrap();
        let factors = vec![
            random_unit(3, &mut rng),
            random_unit(4, &mut rng),
            random_unit(2, &mut rng),
        ];
        for alpha in 0..3 {
            let m = mean_field(&a, &factors, alpha).unwrap();
            let n = m.nrows();
            assert!((m - DMatrix::identity(n, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_term_mean_field_is_the_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a1 = DMatrix::from_fn(3, 3, |i, j| (i + j) as f64 * 0.3 - 0.5);
        let a = KroneckerSumOperator::new(vec![vec![
            a1.clone(),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        ]])
        .unwrap();
        let factors = vec![
            random_unit(3, &mut rng),
            random_unit(2, &mut rng),
            random_unit(2, &mut rng),
        ];
        let m = mean_field(&a, &factors, 0).unwrap();
        assert!((m - a1).norm() < 1e-12);
    }

    #[test]
    fn mean_field_realizes_bilinear_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dims = [3usize, 2, 3];
        let a = random_operator(&dims, 3, 10);
        let factors = vec![
            random_unit(3, &mut rng),
            random_unit(2, &mut rng),
            random_unit(3, &mut rng),
        ];
        for alpha in 0..3 {
            let m = mean_field(&a, &factors, alpha).unwrap();
            for _ in 0..20 {
                let z = DVector::from_fn(dims[alpha], |_, _| rng.gen_range(-1.0..1.0));
                let y = DVector::from_fn(dims[alpha], |_, _| rng.gen_range(-1.0..1.0));
                // oracle: full contraction <A(z x rest), y x rest>
                let mut zf: Vec<Vec<f64>> = factors
                    .iter()
                    .map(|v| v.iter().copied().collect())
                    .collect();
                zf[alpha] = z.iter().copied().collect();
                let mut yf = zf.clone();
                yf[alpha] = y.iter().copied().collect();
                let az = apply_operator(&a, &elementary_tensor(&zf).unwrap()).unwrap();
                let oracle = inner(&az, &elementary_tensor(&yf).unwrap()).unwrap();
                let form = (&m * &z).dot(&y);
                assert!((form - oracle).abs() < 1e-11, "alpha {alpha}");
            }
        }
    }

    #[test]
    fn mean_field_rejects_non_unit_factors() {
        let a = KroneckerSumOperator::identity(&[2, 2]).unwrap();
        let factors = vec![
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.9, 0.0]),
        ];
        assert!(matches!(
            mean_field(&a, &factors, 0),
            Err(DynamicsError::NonUnitFactor { mode: 1, .. })
        ));
    }

    #[test]
    fn hartree_rhs_for_identity_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = KroneckerSumOperator::identity(&[3, 3]).unwrap();
        let s = HartreeState::new(
            2.0,
            vec![random_unit(3, &mut rng), random_unit(3, &mut rng)],
        )
        .unwrap();
        let (dl, dv) = hartree_rhs(&a, &s).unwrap();
        assert!((dl - 2.0).abs() < 1e-12);
        for v in dv {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn hartree_rhs_single_mode_term_moves_one_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a1 = DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64).sin());
        let a = KroneckerSumOperator::new(vec![vec![
            a1,
            DMatrix::identity(2, 2),
            DMatrix::identity(4, 4),
        ]])
        .unwrap();
        let s = HartreeState::new(
            1.0,
            vec![
                random_unit(3, &mut rng),
                random_unit(2, &mut rng),
                random_unit(4, &mut rng),
            ],
        )
        .unwrap();
        let (_, dv) = hartree_rhs(&a, &s).unwrap();
        assert!(dv[1].norm() < 1e-12);
        assert!(dv[2].norm() < 1e-12);
    }

    #[test]
    fn hartree_rhs_is_tangent_to_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..20 {
            let dims = [3usize, 2, 3];
            let a = random_operator(&dims, 2, 100 + trial);
            let s = HartreeState::new(
                rng.gen_range(0.5..2.0),
                dims.iter().map(|&n| random_unit(n, &mut rng)).collect(),
            )
            .unwrap();
            let (_, dv) = hartree_rhs(&a, &s).unwrap();
            for (alpha, d) in dv.iter().enumerate() {
                let t = d.dot(&s.factors[alpha]);
                assert!(t.abs() <= 1e-12, "trial {trial} mode {alpha}: {t}");
            }
        }
    }

    #[test]
    fn identity_flow_grows_lambda_exponentially() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = KroneckerSumOperator::identity(&[3, 3]).unwrap();
        let s0 = HartreeState::new(
            1.0,
            vec![random_unit(3, &mut rng), random_unit(3, &mut rng)],
        )
        .unwrap();
        let dt = 0.01;
        let record = integrate_hartree(&a, &s0, 1.0, dt).unwrap();
        let states = match &record.states {
            TrajectoryStates::Hartree(s) => s,
            _ => unreachable!(),
        };
        let terminal = states.last().unwrap();
        let exact = 1.0_f64.exp();
        assert!(
            (terminal.lambda - exact).abs() <= 10.0 * dt.powi(4) * exact,
            "lambda {} vs e {}",
            terminal.lambda,
            exact
        );
        // factors stay put
        for (v, v0) in terminal.factors.iter().zip(&s0.factors) {
            assert!((v - v0).norm() < 1e-12);
        }
    }

    #[test]
    fn kronecker_sum_flow_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let dims = [4usize, 3, 4];
        let mats: Vec<DMatrix<f64>> = dims
            .iter()
            .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5)))
            .collect();
        let a = KroneckerSumOperator::kronecker_sum(mats.clone()).unwrap();
        let s0 = HartreeState::new(
            1.0,
            dims.iter().map(|&n| random_unit(n, &mut rng)).collect(),
        )
        .unwrap();
        let t_final = 1.0;
        let record = integrate_hartree(&a, &s0, t_final, 1e-3).unwrap();
        let reconstruction = record.terminal_dense().unwrap();
        // oracle: per-mode matrix exponentials applied to the initial factors
        let cols: Vec<Vec<f64>> = mats
            .iter()
            .zip(&s0.factors)
            .map(|(m, v)| (matexp(&(m * t_final)) * v).iter().copied().collect())
            .collect();
        let exact = elementary_tensor(&cols).unwrap();
        let err = reconstruction.sub(&exact).norm2();
        assert!(err <= 1e-6, "terminal error {err}");
    }

    #[test]
    fn hartree_halving_dt_shows_fourth_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let dims = [3usize, 3];
        let mats: Vec<DMatrix<f64>> = dims
            .iter()
            .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let a = KroneckerSumOperator::kronecker_sum(mats.clone()).unwrap();
        let s0 = HartreeState::new(
            1.0,
            dims.iter().map(|&n| random_unit(n, &mut rng)).collect(),
        )
        .unwrap();
        let exact = {
            let cols: Vec<Vec<f64>> = mats
                .iter()
                .zip(&s0.factors)
                .map(|(m, v)| (matexp(m) * v).iter().copied().collect())
                .collect();
            elementary_tensor(&cols).unwrap()
        };
        let error_at = |dt: f64| -> f64 {
            let record = integrate_hartree(&a, &s0, 1.0, dt).unwrap();
            record.terminal_dense().unwrap().sub(&exact).norm2()
        };
        let e1 = error_at(0.02);
        let e2 = error_at(0.01);
        let order = (e1 / e2).log2();
        assert!(order >= 3.7, "observed order {order} (e1={e1}, e2={e2})");
    }

    #[test]
    fn lambda_matches_closed_form_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dims = [3usize, 3];
        let a = random_operator(&dims, 2, 18);
        // symmetrize for a well-behaved flow
        let sym_terms: Vec<Vec<DMatrix<f64>>> = a
            .terms()
            .iter()
            .map(|t| t.iter().map(|m| (m + m.transpose()) * 0.5).collect())
            .collect();
        let a = KroneckerSumOperator::new(sym_terms).unwrap();
        let s0 = HartreeState::new(
            1.0,
            dims.iter().map(|&n| random_unit(n, &mut rng)).collect(),
        )
        .unwrap();
        let dt = 0.01;
        let record = integrate_hartree(&a, &s0, 1.0, dt).unwrap();
        let dev = hartree_lambda_consistency(&a, &record).unwrap();
        assert!(dev <= 10.0 * dt * dt, "deviation {dev}");
    }

    #[test]
    fn zero_flow_keeps_dlra_trajectory_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let v0 = crate::tucker::testing::random_minimal(&[3, 3], &[2, 2], &mut rng);
        let zero = |_: f64, u: &DenseTensor| -> Result<DenseTensor, DynamicsError> {
            Ok(DenseTensor::zeros(u.shape().clone()))
        };
        let record =
            integrate_tucker_dlra(&zero, &v0, 0.5, 0.1, &TangentProjector::Hilbert).unwrap();
        let first = record.dense_state(0).unwrap();
        let last = record.terminal_dense().unwrap();
        assert!(first.sub(&last).norm2() < 1e-12);
    }

    #[test]
    fn full_rank_dlra_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let dims = [3usize, 3];
        let sym = {
            let m = DMatrix::from_fn(9, 9, |_, _| rng.gen_range(-0.5..0.5));
            (&m + m.transpose()) * 0.5
        };
        // build a random symmetric Kronecker-sum style operator on each mode
        let m0 = sym.view((0, 0), (3, 3)).into_owned();
        let m1 = sym.view((3, 3), (3, 3)).into_owned();
        let a = KroneckerSumOperator::kronecker_sum(vec![m0, m1]).unwrap();
        let u0 = random_dense(&dims, 21);
        let v0 = crate::tucker::to_tucker(&u0, 1e-12).unwrap();
        assert_eq!(v0.rank().dims(), &[3, 3]);
        let dt = 0.01;
        let reduced =
            integrate_tucker_dlra(&a, &v0, 0.5, dt, &TangentProjector::Hilbert).unwrap();
        let reference = reference_solve(&a, &u0, 0.5, dt).unwrap();
        let err = reduced
            .terminal_dense()
            .unwrap()
            .sub(&reference.terminal_dense().unwrap())
            .norm2();
        assert!(err <= 1e-10, "full-rank deviation {err}");
    }

    #[test]
    fn rank_one_dlra_matches_hartree() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let dims = [4usize, 3, 4];
        let mats: Vec<DMatrix<f64>> = dims
            .iter()
            .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5)))
            .collect();
        let a = KroneckerSumOperator::kronecker_sum(mats).unwrap();
        let s0 = HartreeState::new(
            1.0,
            dims.iter().map(|&n| random_unit(n, &mut rng)).collect(),
        )
        .unwrap();
        let v0 = crate::tucker::to_tucker(&s0.to_dense().unwrap(), 1e-12).unwrap();
        let dt = 1e-3;
        let t_final = 1.0;
        let hartree = integrate_hartree(&a, &s0, t_final, dt).unwrap();
        let dlra =
            integrate_tucker_dlra(&a, &v0, t_final, dt, &TangentProjector::Hilbert).unwrap();
        let err = hartree
            .terminal_dense()
            .unwrap()
            .sub(&dlra.terminal_dense().unwrap())
            .norm2();
        assert!(err <= 1e-8, "cross-integrator deviation {err}");
    }

    #[test]
    fn reference_zero_flow_is_constant() {
        let u0 = random_dense(&[3, 3], 23);
        let zero = |_: f64, u: &DenseTensor| -> Result<DenseTensor, DynamicsError> {
            Ok(DenseTensor::zeros(u.shape().clone()))
        };
        let record = reference_solve(&zero, &u0, 1.0, 0.25).unwrap();
        assert!(record.terminal_dense().unwrap().sub(&u0).norm2() == 0.0);
    }

    #[test]
    fn reference_single_mode_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let a =
            KroneckerSumOperator::new(vec![vec![m.clone(), DMatrix::identity(2, 2)]]).unwrap();
        let u0 = random_dense(&[3, 2], 25);
        let record = reference_solve(&a, &u0, 1.0, 1e-3).unwrap();
        let full = m.kronecker(&DMatrix::identity(2, 2));
        let exact = matexp(&full) * DVector::from_column_slice(u0.data());
        let got = record.terminal_dense().unwrap();
        let err: f64 = got
            .data()
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8, "terminal error {err}");
    }

    #[test]
    fn reference_zero_length_returns_initial_bitwise() {
        let u0 = random_dense(&[3, 2], 26);
        let a = KroneckerSumOperator::identity(&[3, 2]).unwrap();
        let record = reference_solve(&a, &u0, 0.0, 0.1).unwrap();
        assert_eq!(record.len(), 1);
        let back = record.terminal_dense().unwrap();
        for (x, y) in back.data().iter().zip(u0.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn reference_flow_has_semigroup_property() {
        let dims = [3usize, 3];
        let a = random_operator(&dims, 2, 27);
        let u0 = random_dense(&dims, 28);
        let dt = 1e-3;
        let full = reference_solve(&a, &u0, 0.6, dt).unwrap();
        let first = reference_solve(&a, &u0, 0.2, dt).unwrap();
        let second =
            reference_solve(&a, &first.terminal_dense().unwrap(), 0.4, dt).unwrap();
        let err = full
            .terminal_dense()
            .unwrap()
            .sub(&second.terminal_dense().unwrap())
            .norm2();
        assert!(err <= 1e-10, "semigroup deviation {err}");
    }

    #[test]
    fn reference_dimension_cap_is_enforced() {
        let dims = vec![50usize, 50, 50];
        let shape = Shape::new(dims).unwrap();
        let u0 = DenseTensor::zeros(shape);
        let a = KroneckerSumOperator::identity(&[50, 50, 50]).unwrap();
        assert!(matches!(
            reference_solve(&a, &u0, 1.0, 0.1),
            Err(DynamicsError::DimensionCap { .. })
        ));
    }

    #[test]
    fn dlra_detects_rank_degeneracy() {
        // contraction flow toward a rank-1 target starting at rank 2
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let v0 = crate::tucker::testing::random_minimal(&[3, 3], &[2, 2], &mut rng);
        let target = elementary_tensor(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let flow = move |_: f64, u: &DenseTensor| -> Result<DenseTensor, DynamicsError> {
            Ok(target.add_scaled(-1.0, u).scale(40.0))
        };
        match integrate_tucker_dlra(&flow, &v0, 2.0, 0.05, &TangentProjector::Hilbert) {
            Err(DynamicsError::RankDegeneracy { .. }) => {}
            Ok(record) => {
                // if integration survives, the core must stay well conditioned
                for s in &record.steps {
                    assert!(s.min_core_sv_rel > 1e-10);
                }
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn operator_file_roundtrip() {
        let a = random_operator(&[3, 2], 2, 30);
        let text = operator_to_json(&a);
        let b = parse_operator(&text).unwrap();
        for (ta, tb) in a.terms().iter().zip(b.terms()) {
            for (ma, mb) in ta.iter().zip(tb) {
                assert_eq!(ma, mb);
            }
        }
    }

    #[test]
    fn csv_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = KroneckerSumOperator::identity(&[3, 3]).unwrap();
        let s0 = HartreeState::new(
            1.0,
            vec![random_unit(3, &mut rng), random_unit(3, &mut rng)],
        )
        .unwrap();
        let r1 = integrate_hartree(&a, &s0, 0.2, 0.05).unwrap();
        let r2 = integrate_hartree(&a, &s0, 0.2, 0.05).unwrap();
        assert_eq!(r1.to_csv(), r2.to_csv());
        assert!(r1.to_csv().lines().count() == 5); // header + 4 steps
    }
}
