use super::{Measurement, ResidualMode};
use crate::error::{invalid, Error, Result};
use crate::forward::{barrier_energy, barrier_terms, solve_barrier, solve_npg, BarrierParams, Method, ObstacleProblem, SolverConfig};
use crate::mesh::assembly::{coefficient_contraction, stiffness_apply};
use crate::mesh::{NodalField, SpdSolver};

/// Outer-iteration cap of the schedule run that fixes `(µ, θ)`.
const SCHEDULE_MAX_ITER: usize = 400;
const MAX_NEWTON: usize = 200;
const ARMIJO: f64 = 1e-4;

/// Minimizer `ũ` of the barrier functional at frozen `(µ, θ)` over `u ≥ h`,
/// with the factorized reduced Hessian at `ũ`.
#[derive(Debug, Clone)]
pub struct BarrierState {
    problem: ObstacleProblem,
    params: BarrierParams,
    u: NodalField,
    // false on boundary rows and on nodes held at the obstacle
    free: Vec<bool>,
    hessian: SpdSolver,
    newton_steps: usize,
}

impl BarrierState {
    /// Run the barrier schedule at `a` and freeze its final parameters.
    pub fn from_schedule(m: &Measurement, a: &NodalField) -> Result<Self> {
        let p = problem_for(m, a)?;
        let cfg = SolverConfig {
            max_iter: SCHEDULE_MAX_ITER,
            ..SolverConfig::with_method(Method::Barrier)
        };
        let sol = solve_barrier(&p, &cfg)?;
        let params = sol.barrier.expect("barrier solver reports its parameters");
        Self::solve(p, params, sol.u.values().to_vec())
    }

    /// Barrier minimizer for coefficient `a` at fixed parameters, Newton from `warm`.
    pub fn new(m: &Measurement, a: &NodalField, params: BarrierParams, warm: Option<&NodalField>) -> Result<Self> {
        if !(params.mu > 0.0 && params.theta > 0.0) {
            return Err(invalid("frozen barrier parameters must be positive"));
        }
        let p = problem_for(m, a)?;
        let start = match warm {
            Some(w) => {
                w.check_grid(m.grid(), "warm start")?;
                w.values().to_vec()
            }
            None => vec![0.0; m.grid().node_count()],
        };
        Self::solve(p, params, start)
    }

    fn solve(p: ObstacleProblem, params: BarrierParams, start: Vec<f64>) -> Result<Self> {
        let (u, newton_steps) = frozen_minimizer(&p, params, start)?;
        let au = p.stiffness().apply(&u);
        let (g, curv) = barrier_terms(&p, &u, &au, params);
        let free = free_rows(&p, &u, &g);
        let mut hess = p.stiffness().with_added_diagonal(&curv);
        hess.eliminate(&held_rows(&free));
        let hessian = SpdSolver::new(&hess)?;
        let n = p.grid().n();
        Ok(Self {
            problem: p,
            params,
            u: NodalField::from_vec_unchecked(n, u),
            free,
            hessian,
            newton_steps,
        })
    }

    pub fn solution(&self) -> &NodalField {
        &self.u
    }
    pub fn params(&self) -> BarrierParams {
        self.params
    }
    pub fn coefficient(&self) -> &NodalField {
        self.problem.coefficient()
    }
    pub fn problem(&self) -> &ObstacleProblem {
        &self.problem
    }
    /// Newton steps taken to reach the minimizer.
    pub fn newton_steps(&self) -> usize {
        self.newton_steps
    }
    /// Nodes where the minimizer sits on the obstacle with an outward gradient.
    pub fn held_nodes(&self) -> Vec<usize> {
        held_rows(&self.free)
            .into_iter()
            .filter(|&k| !self.problem.grid().is_boundary(k))
            .collect()
    }

    fn solve_free(&self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        for (r, &f) in rhs.iter_mut().zip(&self.free) {
            if !f {
                *r = 0.0;
            }
        }
        self.hessian.solve(&rhs)
    }
}

fn problem_for(m: &Measurement, a: &NodalField) -> Result<ObstacleProblem> {
    ObstacleProblem::new(m.grid(), a.clone(), m.load_density().clone(), m.obstacle().clone())
}

fn free_rows(p: &ObstacleProblem, u: &[f64], g: &[f64]) -> Vec<bool> {
    let h = p.obstacle().values();
    (0..u.len())
        .map(|k| !p.grid().is_boundary(k) && !(u[k] <= h[k] && g[k] > 0.0))
        .collect()
}

fn held_rows(free: &[bool]) -> Vec<usize> {
    free.iter().enumerate().filter_map(|(k, &f)| (!f).then_some(k)).collect()
}

/// Projected Newton with backtracking on the barrier functional; the
/// parameters stay fixed, so the result is a well-defined function of `a`.
fn frozen_minimizer(p: &ObstacleProblem, params: BarrierParams, mut u: Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let a = p.stiffness();
    let h = p.obstacle().values();
    let grid = p.grid();
    for k in 0..u.len() {
        u[k] = if grid.is_boundary(k) { 0.0 } else { u[k].max(h[k]) };
    }
    let mut au = a.apply(&u);
    let mut energy = barrier_energy(p, &u, &au, params);
    let load_scale = p.load().max_abs();
    for it in 0..MAX_NEWTON {
        let (g, curv) = barrier_terms(p, &u, &au, params);
        let free = free_rows(p, &u, &g);
        let scale = load_scale.max(au.iter().zip(&free).filter(|(_, &f)| f).map(|(v, _)| v.abs()).fold(0.0, f64::max));
        let gmax = g.iter().zip(&free).filter(|(_, &f)| f).map(|(v, _)| v.abs()).fold(0.0, f64::max);
        if !gmax.is_finite() {
            return Err(Error::InfeasibleIterate { iteration: it });
        }
        // a gap next to the obstacle is only resolved to an ulp of u, which
        // the barrier curvature amplifies
        let floor = 1e-13 * scale.max(f64::MIN_POSITIVE);
        if (0..u.len()).all(|k| !free[k] || g[k].abs() <= floor + 8.0 * f64::EPSILON * u[k].abs() * curv[k]) {
            return Ok((u, it));
        }
        let mut hess = a.with_added_diagonal(&curv);
        hess.eliminate(&held_rows(&free));
        let rhs: Vec<f64> = g.iter().zip(&free).map(|(v, &f)| if f { -v } else { 0.0 }).collect();
        let d = SpdSolver::new(&hess)
            .and_then(|s| s.solve(&rhs))
            .map_err(|e| Error::NumericalFailure(format!("frozen barrier Newton step {it}: {e}")))?;

        // stay inside the barrier domain before projecting
        let mut alpha: f64 = 1.0;
        for k in 0..u.len() {
            if free[k] && d[k] < 0.0 {
                let s = u[k] - h[k] + params.theta;
                alpha = alpha.min(0.995 * s / -d[k]);
            }
        }
        let slack = 1e-14 * (1.0 + energy.abs());
        let mut accepted = false;
        let mut trial = vec![0.0; u.len()];
        let mut atrial = vec![0.0; u.len()];
        for _ in 0..60 {
            for k in 0..u.len() {
                trial[k] = if free[k] { (u[k] + alpha * d[k]).max(h[k]) } else { u[k] };
            }
            a.apply_into(&trial, &mut atrial);
            let e = barrier_energy(p, &trial, &atrial, params);
            let decrease: f64 = (0..u.len()).map(|k| g[k] * (trial[k] - u[k])).sum();
            if e <= energy + ARMIJO * decrease + slack {
                energy = e;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if gmax <= 1e-8 * scale {
                // roundoff-limited; the iterate is as good as the energy can tell
                return Ok((u, it));
            }
            return Err(Error::NumericalFailure(format!(
                "frozen barrier line search failed at Newton step {it} (gradient {gmax:e})"
            )));
        }
        let step = (0..u.len()).map(|k| (trial[k] - u[k]).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut au, &mut atrial);
        if step <= 1e-16 * (1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Ok((u, it + 1));
        }
    }
    Err(Error::NumericalFailure(format!(
        "frozen barrier Newton did not converge in {MAX_NEWTON} steps"
    )))
}

/// Observed state for coefficient `a`: the barrier minimizer after a full
/// schedule, or the accelerated projected gradient solution.
pub fn forward_observe(a: &NodalField, m: &Measurement, mode: ResidualMode) -> Result<Vec<f64>> {
    a.check_grid(m.grid(), "coefficient")?;
    match mode {
        ResidualMode::Barrier => {
            let s = BarrierState::from_schedule(m, a)?;
            Ok(m.observe(s.solution().values()))
        }
        ResidualMode::Exact => {
            let p = problem_for(m, a)?;
            let sol = solve_npg(&p, &SolverConfig::with_method(Method::Npg))?;
            Ok(m.observe(sol.u.values()))
        }
    }
}

/// Observed part of `ũ'(a)b = −H⁻¹ A(b) ũ`. Boundary entries of `b` are ignored.
pub fn derivative_apply(state: &BarrierState, b: &NodalField, m: &Measurement) -> Result<Vec<f64>> {
    let grid = state.problem.grid();
    b.check_grid(grid, "coefficient direction")?;
    let mut bv = b.values().to_vec();
    for k in grid.boundary_nodes() {
        bv[k] = 0.0;
    }
    let rhs: Vec<f64> = stiffness_apply(grid, &bv, state.u.values()).into_iter().map(|v| -v).collect();
    let w = state.solve_free(rhs)?;
    Ok(m.observe(&w))
}

/// `ũ'(a)*r`: `g_k = −ũᵀ A(e_k) H⁻¹ Bᵀr`, zero on the boundary.
pub fn adjoint_apply(state: &BarrierState, r: &[f64], m: &Measurement) -> Result<NodalField> {
    if r.len() != m.mask().count() {
        return Err(invalid(format!(
            "adjoint input has {} entries, {} nodes are observed",
            r.len(),
            m.mask().count()
        )));
    }
    let grid = state.problem.grid();
    let w = state.solve_free(m.embed(r))?;
    let mut g = coefficient_contraction(grid, state.u.values(), &w);
    for (k, v) in g.iter_mut().enumerate() {
        *v = if grid.is_boundary(k) { 0.0 } else { -*v };
    }
    Ok(NodalField::from_vec_unchecked(grid.n(), g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid;

    fn setup(n: usize) -> (Measurement, NodalField) {
        let g = Grid::new(n).unwrap();
        let h = g.sample(|x, y| if (x - 0.5).abs() <= 0.2 && (y - 0.5).abs() <= 0.2 { 0.3 } else { -1e-3 });
        let f = NodalField::constant(&g, 1.0);
        let mask = g.mask(|_, _| true);
        let m = Measurement::new(&g, f, h, mask.clone(), vec![0.0; mask.count()], None).unwrap();
        let a = g.sample(|x, y| 1.0 + 0.3 * x * y);
        (m, a)
    }

    #[test]
    fn inactive_full_mask_center_value() {
        let g = Grid::new(3).unwrap();
        let m = Measurement::new(
            &g,
            NodalField::constant(&g, 1.0),
            NodalField::constant(&g, -1e6),
            g.mask(|_, _| true),
            vec![0.0; 9],
            None,
        )
        .unwrap();
        let y = forward_observe(&NodalField::constant(&g, 1.0), &m, ResidualMode::Barrier).unwrap();
        assert!((y[4] - 0.0625).abs() < 1e-6);
        let empty = Measurement::new(&g, m.load_density().clone(), m.obstacle().clone(), g.mask(|_, _| false), vec![], None).unwrap();
        assert!(forward_observe(&NodalField::constant(&g, 1.0), &empty, ResidualMode::Exact).unwrap().is_empty());
    }

    #[test]
    fn frozen_state_is_stationary() {
        let (m, a) = setup(10);
        let s = BarrierState::from_schedule(&m, &a).unwrap();
        let p = s.problem();
        let au = p.stiffness().apply(s.solution().values());
        let (g, _) = barrier_terms(p, s.solution().values(), &au, s.params());
        let (u, h) = (s.solution(), p.obstacle());
        for k in p.grid().free_nodes() {
            // the gap u − h is only known to an ulp of u
            let gap = u[k] - h[k] + s.params().theta;
            let tol = 1e-12 + 8.0 * f64::EPSILON * u[k].abs() * s.params().mu / (gap * gap);
            assert!(g[k].abs() <= tol, "node {k}: {} > {tol}", g[k]);
        }
        // re-solving from the state itself takes no step
        let again = BarrierState::new(&m, &a, s.params(), Some(s.solution())).unwrap();
        assert_eq!(again.newton_steps(), 0);
    }

    #[test]
    fn derivative_is_linear_and_zero_at_zero() {
        let (m, a) = setup(8);
        let s = BarrierState::from_schedule(&m, &a).unwrap();
        let g = m.grid();
        let b = g.sample(|x, y| (3.0 * x).sin() * y);
        let d1 = derivative_apply(&s, &b, &m).unwrap();
        let d2 = derivative_apply(&s, &b.scale(2.0), &m).unwrap();
        for (x, y) in d1.iter().zip(&d2) {
            assert!((2.0 * x - y).abs() <= 1e-15 * (1.0 + y.abs()));
        }
        assert!(derivative_apply(&s, &NodalField::zeros(g), &m).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(adjoint_apply(&s, &vec![0.0; m.mask().count()], &m).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn adjoint_rejects_wrong_length() {
        let (m, a) = setup(5);
        let s = BarrierState::from_schedule(&m, &a).unwrap();
        assert!(adjoint_apply(&s, &[1.0], &m).is_err());
    }
}
