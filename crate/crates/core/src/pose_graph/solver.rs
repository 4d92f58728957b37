//! Sparse Levenberg–Marquardt over the stacked pose-graph residuals.

use serde::{Deserialize, Serialize};

use super::edges::{
    distance_error, distance_jacobians, prior_error, prior_jacobian, relative_pose_error, relative_pose_jacobians,
    Constraint,
};
use super::mat3::{self, Mat3, Vec3};
use super::pose::Pose2;
use super::problem::PoseGraphProblem;
use super::sparse::{BlockMatrix, SymbolicFactor};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Damping above which the solver gives up.
pub const LAMBDA_MAX: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct LmOptions<T> {
    pub max_iterations: usize,
    pub lambda_init: T,
    pub lambda_factor: T,
    pub chi2_rel_tol: T,
    pub step_tol: T,
    /// Huber width (meters) applied to distance edges; `None` disables it.
    pub distance_huber: Option<T>,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            lambda_init: T::lit(1e-4),
            lambda_factor: T::lit(10.0),
            chi2_rel_tol: T::lit(1e-4),
            step_tol: T::lit(1e-9),
            distance_huber: None,
        }
    }
}

impl<T: Real> LmOptions<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_init", self.lambda_init),
            ("lambda_factor", self.lambda_factor),
            ("chi2_rel_tol", self.chi2_rel_tol),
            ("step_tol", self.step_tol),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be > 0".into()));
        }
        if self.lambda_factor <= T::one() {
            return Err(Error::Config("lambda_factor must be > 1".into()));
        }
        if let Some(h) = self.distance_huber {
            if !(h > T::zero()) {
                return Err(Error::Config("distance_huber width must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The initial estimate already has zero error.
    ZeroError,
    /// Relative decrease of the objective fell below `chi2_rel_tol`.
    RelativeDecrease,
    /// The proposed step fell below `step_tol`.
    SmallStep,
    MaxIterations,
    /// Damping exceeded [`LAMBDA_MAX`] without finding a descent step.
    LambdaOverflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub iterations: usize,
    pub initial_chi2: f64,
    pub final_chi2: f64,
    pub converged: bool,
    pub termination: Termination,
    /// Objective after the start and after each accepted step.
    pub accepted_chi2: Vec<f64>,
    /// Distance-edge linearisations that fell back to the fixed direction.
    pub degenerate_linearizations: usize,
}

#[derive(Clone, Debug)]
pub struct Optimized<T> {
    pub poses: Vec<Pose2<T>>,
    pub report: OptimizeReport,
}

/// Minimises the weighted squared error of all constraints.
///
/// The objective is the plain chi-square unless `distance_huber` is set, in
/// which case distance edges use the Huber cost.
pub fn optimize<T: Real>(problem: &PoseGraphProblem<T>, options: &LmOptions<T>) -> Result<Optimized<T>> {
    options.validate()?;
    if !problem.is_gauge_fixed() {
        return Err(Error::Data(
            "cannot optimise a problem without prior or fixed node".into(),
        ));
    }
    let n = problem.len();
    let sym = SymbolicFactor::new(
        n,
        problem
            .endpoints()
            .iter()
            .filter_map(|&(a, b)| b.map(|b| (a, b)))
            .filter(|&(a, b)| !problem.is_fixed(a) && !problem.is_fixed(b)),
    );

    let mut poses = problem.initial().to_vec();
    let mut chi2 = objective(problem, &poses, options.distance_huber);
    let initial_chi2 = chi2;
    let mut report = OptimizeReport {
        iterations: 0,
        initial_chi2: initial_chi2.as_f64(),
        final_chi2: initial_chi2.as_f64(),
        converged: false,
        termination: Termination::MaxIterations,
        accepted_chi2: vec![initial_chi2.as_f64()],
        degenerate_linearizations: 0,
    };
    if chi2 == T::zero() {
        report.converged = true;
        report.termination = Termination::ZeroError;
        return Ok(Optimized { poses, report });
    }

    let mut lambda = options.lambda_init;
    let lambda_max = T::lit(LAMBDA_MAX);
    'outer: for iter in 1..=options.max_iterations {
        report.iterations = iter;
        let (hessian, gradient, degenerate) = linearize(problem, &sym, &poses, options.distance_huber);
        report.degenerate_linearizations += degenerate;
        let rhs: Vec<Vec3<T>> = gradient.iter().map(|g| [-g[0], -g[1], -g[2]]).collect();
        let x_norm = poses
            .iter()
            .flat_map(|p| p.to_array())
            .fold(T::zero(), |acc, v| acc + v * v)
            .sqrt();

        loop {
            let mut damped = hessian.clone();
            damped.add_to_diagonal(lambda);
            if damped.factorize(&sym).is_ok() {
                let step = damped.solve(&sym, &rhs);
                let step_norm = step.iter().flatten().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
                if step_norm <= options.step_tol * (x_norm + options.step_tol) {
                    report.converged = true;
                    report.termination = Termination::SmallStep;
                    break 'outer;
                }
                let candidate: Vec<Pose2<T>> = poses.iter().zip(&step).map(|(p, d)| p.oplus(d)).collect();
                let new_chi2 = objective(problem, &candidate, options.distance_huber);
                if new_chi2 < chi2 {
                    let rel = (chi2 - new_chi2) / chi2;
                    poses = candidate;
                    chi2 = new_chi2;
                    report.accepted_chi2.push(chi2.as_f64());
                    lambda = (lambda / options.lambda_factor).max(T::lit(1e-15));
                    if rel < options.chi2_rel_tol || chi2 == T::zero() {
                        report.converged = true;
                        report.termination = Termination::RelativeDecrease;
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            lambda *= options.lambda_factor;
            if lambda > lambda_max {
                report.termination = Termination::LambdaOverflow;
                break 'outer;
            }
        }
    }
    report.final_chi2 = chi2.as_f64();
    Ok(Optimized { poses, report })
}

/// Objective minimised by [`optimize`].
pub fn objective<T: Real>(problem: &PoseGraphProblem<T>, poses: &[Pose2<T>], huber: Option<T>) -> T {
    problem
        .constraints()
        .iter()
        .zip(problem.endpoints())
        .map(|(c, &(a, b))| match (c, huber) {
            (Constraint::Distance { d, w, .. }, Some(delta)) => {
                let e = distance_error(&poses[a], &poses[b.expect("binary edge")], *d).abs();
                if e <= delta {
                    *w * e * e
                } else {
                    *w * (T::lit(2.0) * delta * e - delta * delta)
                }
            }
            _ => c.chi2(&poses[a], b.map(|b| &poses[b])),
        })
        .fold(T::zero(), |acc, v| acc + v)
}

/// Gauss–Newton normal equations `H = J^T Ω J`, `g = J^T Ω e`.
fn linearize<T: Real>(
    problem: &PoseGraphProblem<T>,
    sym: &SymbolicFactor,
    poses: &[Pose2<T>],
    huber: Option<T>,
) -> (BlockMatrix<T>, Vec<Vec3<T>>, usize) {
    let n = problem.len();
    let mut h = BlockMatrix::zeros(sym);
    let mut g = vec![[T::zero(); 3]; n];
    let mut degenerate = 0;
    let zero3 = mat3::zeros::<T>();

    for (c, &(a, b)) in problem.constraints().iter().zip(problem.endpoints()) {
        let (e, ji, jj, omega): (Vec3<T>, Mat3<T>, Mat3<T>, Mat3<T>) = match c {
            Constraint::RelativePose { z, info, .. } => {
                let xb = &poses[b.expect("binary edge")];
                let (ji, jj) = relative_pose_jacobians(&poses[a], xb, z);
                (relative_pose_error(&poses[a], xb, z), ji, jj, *info)
            }
            Constraint::Distance { d, w, .. } => {
                let xb = &poses[b.expect("binary edge")];
                let err = distance_error(&poses[a], xb, *d);
                let (ri, rj, deg) = distance_jacobians(&poses[a], xb);
                degenerate += deg as usize;
                let weight = match huber {
                    Some(delta) if err.abs() > delta => *w * delta / err.abs(),
                    _ => *w,
                };
                let mut ji = zero3;
                let mut jj = zero3;
                ji[0] = ri;
                jj[0] = rj;
                let mut omega = zero3;
                omega[0][0] = weight;
                ([err, T::zero(), T::zero()], ji, jj, omega)
            }
            Constraint::PosePrior { z, info, .. } => (prior_error(&poses[a], z), prior_jacobian(z), zero3, *info),
        };

        let ji_t_omega = mat3::tmul(&ji, &omega);
        let a_free = !problem.is_fixed(a);
        if a_free {
            h.add_diag(sym, a, &mat3::mul(&ji_t_omega, &ji));
            add3(&mut g[a], &mat3::mul_vec(&ji_t_omega, &e));
        }
        if let Some(b) = b {
            if problem.is_fixed(b) {
                continue;
            }
            let jj_t_omega = mat3::tmul(&jj, &omega);
            h.add_diag(sym, b, &mat3::mul(&jj_t_omega, &jj));
            add3(&mut g[b], &mat3::mul_vec(&jj_t_omega, &e));
            if a_free && a != b {
                h.add_offdiag(sym, a, b, &mat3::mul(&ji_t_omega, &jj));
            }
        }
    }
    let id = mat3::identity();
    for k in 0..n {
        if problem.is_fixed(k) {
            h.add_diag(sym, k, &id);
        }
    }
    (h, g, degenerate)
}

fn add3<T: Real>(acc: &mut Vec3<T>, v: &Vec3<T>) {
    for k in 0..3 {
        acc[k] += v[k];
    }
}
