use std::time::Instant;

use super::{finish, kkt_from_product, project_in_place, ContactSolution, Method, ObstacleProblem, SolverConfig, TraceRow};
use crate::error::{invalid, Error, Result};
use crate::mesh::{NodalField, SpdSolver};

/// Lower limit of the safeguard shift `θ`.
pub const THETA_FLOOR: f64 = 1e-12;
const SCHEDULE_FACTOR: f64 = 0.9;

/// Barrier weight `µ` and safeguard shift `θ` of `−µ Σ log(u − h + θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub mu: f64,
    pub theta: f64,
}

impl BarrierParams {
    /// One step of the geometric schedule.
    pub fn next(self) -> Self {
        Self {
            mu: SCHEDULE_FACTOR * self.mu,
            theta: (SCHEDULE_FACTOR * self.theta).max(THETA_FLOOR),
        }
    }
}

/// Gradient `Au − f − µ/(u−h+θ)` and barrier curvature `µ/(u−h+θ)²` on free
/// nodes; both zero on the boundary.
pub(crate) fn barrier_terms(
    p: &ObstacleProblem,
    u: &[f64],
    au: &[f64],
    params: BarrierParams,
) -> (Vec<f64>, Vec<f64>) {
    let f = p.load().values();
    let h = p.obstacle().values();
    let dim = u.len();
    let mut g = vec![0.0; dim];
    let mut curv = vec![0.0; dim];
    for k in 0..dim {
        if p.grid().is_boundary(k) {
            continue;
        }
        let s = u[k] - h[k] + params.theta;
        g[k] = au[k] - f[k] - params.mu / s;
        curv[k] = params.mu / (s * s);
    }
    (g, curv)
}

/// `½uᵀAu − fᵀu − µ Σ log(u−h+θ)` over free nodes; `+∞` outside the domain.
pub(crate) fn barrier_energy(p: &ObstacleProblem, u: &[f64], au: &[f64], params: BarrierParams) -> f64 {
    let f = p.load().values();
    let h = p.obstacle().values();
    let mut e = 0.0;
    for k in 0..u.len() {
        e += 0.5 * u[k] * au[k] - f[k] * u[k];
        if !p.grid().is_boundary(k) {
            let s = u[k] - h[k] + params.theta;
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            e -= params.mu * s.ln();
        }
    }
    e
}

/// Log-barrier method with damped projected Newton steps
/// `u ← P(u − τ ∇²J_b⁻¹ ∇J_b)` and the schedule `µ ← 0.9µ`, `θ ← max(0.9θ, 1e−12)`.
/// Convergence is judged on the KKT residual of the original problem.
pub fn solve_barrier(p: &ObstacleProblem, cfg: &SolverConfig) -> Result<ContactSolution> {
    if cfg.method != Method::Barrier {
        return Err(invalid("solve_barrier called with a non-barrier configuration"));
    }
    cfg.validate()?;
    let clock = Instant::now();
    let tau = cfg.tau.unwrap_or(0.1);
    let a = p.stiffness();
    let h = p.obstacle().values();
    let dim = a.dim();

    let mut params = BarrierParams {
        mu: cfg.mu0,
        theta: cfg.theta0,
    };
    let mut u = vec![0.0; dim];
    project_in_place(&mut u, h);
    for k in 0..dim {
        if p.grid().is_boundary(k) {
            u[k] = 0.0;
        } else {
            u[k] += params.theta;
        }
    }
    let mut au = a.apply(&u);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last_dir: Option<Vec<f64>> = None;

    for k in 0..=cfg.max_iter {
        let kkt = kkt_from_product(p, &u, &au);
        let e: f64 = u
            .iter()
            .zip(&au)
            .zip(p.load().values())
            .map(|((x, y), b)| 0.5 * x * y - b * x)
            .sum();
        trace.push(TraceRow {
            iter: k,
            kkt_residual: kkt,
            energy: e,
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
        if kkt < cfg.kkt_tol {
            converged = true;
            break;
        }
        if k == cfg.max_iter {
            break;
        }
        let (g, curv) = barrier_terms(p, &u, &au, params);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InfeasibleIterate { iteration: k });
        }
        let hess = a.with_added_diagonal(&curv);
        let solver = SpdSolver::new(&hess)
            .map_err(|e| Error::NumericalFailure(format!("barrier Hessian at iteration {k}: {e}")))?;
        let d = solver
            .solve_from(&g, last_dir.as_deref())
            .map_err(|e| Error::NumericalFailure(format!("barrier Newton step at iteration {k}: {e}")))?;
        for i in 0..dim {
            u[i] -= tau * d[i];
        }
        project_in_place(&mut u, h);
        a.apply_into(&u, &mut au);
        last_dir = Some(d);
        params = params.next();
    }
    let u = NodalField::from_vec_unchecked(p.grid().n(), u);
    Ok(finish(p, cfg, u, trace, converged, clock, tau, Some(params)))
}
