use std::time::Instant;

use super::{finish, kkt_from_product, project_in_place, ContactSolution, Method, ObstacleProblem, SolverConfig, TraceRow};
use crate::error::{invalid, Error, Result};
use crate::mesh::NodalField;

/// Consecutive energy increases that count as divergence.
const DIVERGENCE_WINDOW: usize = 50;

/// `t₀ = 1`, `t_{k+1} = ½(1 + √(1 + 4t_k²))`.
pub fn nesterov_t_sequence(len: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(len);
    let mut cur = 1.0_f64;
    for _ in 0..len {
        t.push(cur);
        cur = 0.5 * (1.0 + (1.0 + 4.0 * cur * cur).sqrt());
    }
    t
}

fn gradient_tau(p: &ObstacleProblem, cfg: &SolverConfig) -> f64 {
    cfg.tau
        .unwrap_or_else(|| 0.1 / p.stiffness().norm_estimate(cfg.norm_iterations))
}

struct DivergenceGuard {
    initial: f64,
    last: f64,
    streak: usize,
}

impl DivergenceGuard {
    fn new(e0: f64) -> Self {
        Self {
            initial: e0,
            last: e0,
            streak: 0,
        }
    }

    fn check(&mut self, energy: f64, iteration: usize) -> Result<()> {
        if !energy.is_finite() {
            return Err(Error::StepsizeTooLarge {
                iteration,
                window: self.streak + 1,
            });
        }
        if energy > self.last + 1e-12 * (1.0 + self.last.abs()) {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.last = energy;
        // momentum makes short increasing runs normal; a divergent run also
        // climbs above the starting energy
        if self.streak >= DIVERGENCE_WINDOW && energy > self.initial {
            return Err(Error::StepsizeTooLarge {
                iteration,
                window: DIVERGENCE_WINDOW,
            });
        }
        Ok(())
    }
}

/// Projected gradient: `u ← P(u − τ(Au − f))` from `u₀ = P(0)`.
pub fn solve_pg(p: &ObstacleProblem, cfg: &SolverConfig) -> Result<ContactSolution> {
    if cfg.method != Method::Pg {
        return Err(invalid("solve_pg called with a non-PG configuration"));
    }
    run_gradient(p, cfg, false)
}

/// Nesterov-accelerated projected gradient.
pub fn solve_npg(p: &ObstacleProblem, cfg: &SolverConfig) -> Result<ContactSolution> {
    if cfg.method != Method::Npg {
        return Err(invalid("solve_npg called with a non-NPG configuration"));
    }
    run_gradient(p, cfg, true)
}

/// Shared loop; `start` overrides the initial guess (it is projected first).
pub(crate) fn run_gradient_from(
    p: &ObstacleProblem,
    cfg: &SolverConfig,
    accelerated: bool,
    start: Option<&NodalField>,
) -> Result<ContactSolution> {
    cfg.validate()?;
    let clock = Instant::now();
    let tau = gradient_tau(p, cfg);
    let a = p.stiffness();
    let f = p.load().values();
    let h = p.obstacle().values();
    let dim = a.dim();
    let boundary = p.boundary_condition().nodes();

    let mut u = match start {
        Some(s) => s.values().to_vec(),
        None => vec![0.0; dim],
    };
    project_in_place(&mut u, h);
    for &k in boundary {
        u[k] = 0.0;
    }
    let mut u_prev = u.clone();
    let mut z = u.clone();
    let mut t = 1.0_f64;

    let mut au = a.apply(&u);
    let mut az = au.clone();
    let energy = |u: &[f64], au: &[f64]| -> f64 {
        u.iter().zip(au).zip(f).map(|((x, y), b)| 0.5 * x * y - b * x).sum()
    };
    let mut guard = DivergenceGuard::new(energy(&u, &au));
    let mut trace = Vec::new();
    let mut converged = false;

    for k in 0..=cfg.max_iter {
        let kkt = kkt_from_product(p, &u, &au);
        let e = energy(&u, &au);
        trace.push(TraceRow {
            iter: k,
            kkt_residual: kkt,
            energy: e,
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
        if k > 0 {
            guard.check(e, k)?;
        }
        if kkt < cfg.kkt_tol {
            converged = true;
            break;
        }
        if k == cfg.max_iter {
            break;
        }
        // gradient step from z (z = u for plain PG)
        let (base, abase) = if accelerated { (&z, &az) } else { (&u, &au) };
        let mut next: Vec<f64> = (0..dim).map(|i| base[i] - tau * (abase[i] - f[i])).collect();
        project_in_place(&mut next, h);
        std::mem::swap(&mut u_prev, &mut u);
        u = next;
        au = a.apply(&u);
        if accelerated {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            t = t_next;
            for i in 0..dim {
                z[i] = u[i] + beta * (u[i] - u_prev[i]);
            }
            a.apply_into(&z, &mut az);
        }
    }
    let u = NodalField::from_vec_unchecked(p.grid().n(), u);
    Ok(finish(p, cfg, u, trace, converged, clock, tau, None))
}

fn run_gradient(p: &ObstacleProblem, cfg: &SolverConfig, accelerated: bool) -> Result<ContactSolution> {
    run_gradient_from(p, cfg, accelerated, None)
}
