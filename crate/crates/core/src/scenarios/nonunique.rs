use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{contact_set, solve, ContactSolution, Method, ObstacleProblem, SolverConfig};
use crate::mesh::{Grid, NodalField, NodeMask};

/// Contact detection tolerance of the checks.
pub const CONTACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NonuniquenessKind {
    ContactPerturb,
    ComponentScale,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Added to the coefficient; must vanish off the eroded contact set.
    Additive(NodalField),
    /// Multiply the coefficient on the non-contact component containing `seed_node`.
    Scale { seed_node: usize, factor: f64 },
}

#[derive(Debug, Clone)]
pub struct NonuniquenessReport {
    pub u_diff_linf: f64,
    /// Nodes whose coefficient was changed.
    pub changed_nodes: usize,
    pub base: ContactSolution,
    pub perturbed: ContactSolution,
}

/// Tight NPG solve used by the checks.
pub fn tight_solver() -> SolverConfig {
    SolverConfig {
        kkt_tol: 1e-11,
        max_iter: 200_000,
        ..SolverConfig::with_method(Method::Npg)
    }
}

/// Contact set of `sol` with one node ring removed.
pub fn contact_interior(p: &ObstacleProblem, sol: &ContactSolution) -> NodeMask {
    contact_set(p.grid(), &sol.u, p.obstacle(), CONTACT_TOL).eroded(p.grid())
}

/// Gaussian bump `amplitude·exp(−width·|x − c|²)` cut to `support`.
pub fn truncated_bump(grid: &Grid, support: &NodeMask, center: (f64, f64), amplitude: f64, width: f64) -> NodalField {
    let mut b = grid.sample(|x, y| amplitude * (-width * ((x - center.0).powi(2) + (y - center.1).powi(2))).exp());
    for (k, v) in b.values_mut().iter_mut().enumerate() {
        if !support.get(k) {
            *v = 0.0;
        }
    }
    b
}

/// Change the coefficient as `perturbation` prescribes, re-solve and compare.
pub fn nonuniqueness_check(
    kind: NonuniquenessKind,
    problem: &ObstacleProblem,
    perturbation: &Perturbation,
    solver: &SolverConfig,
) -> Result<NonuniquenessReport> {
    let grid = problem.grid();
    let base = solve(problem, solver)?;
    let (a_new, changed) = match (kind, perturbation) {
        (NonuniquenessKind::ContactPerturb, Perturbation::Additive(delta)) => {
            delta.check_grid(grid, "perturbation")?;
            let interior = contact_interior(problem, &base);
            let outside = (0..grid.node_count()).filter(|&k| delta[k] != 0.0 && !interior.get(k)).count();
            if outside > 0 {
                return Err(Error::InvalidPerturbation(format!(
                    "{outside} nodes of the perturbation lie outside the eroded contact set"
                )));
            }
            let changed = delta.values().iter().filter(|v| **v != 0.0).count();
            (problem.coefficient().add(delta), changed)
        }
        (NonuniquenessKind::ComponentScale, &Perturbation::Scale { seed_node, factor }) => {
            if problem.load_density().max_abs() != 0.0 {
                return Err(Error::InvalidPerturbation("component scaling needs f = 0".into()));
            }
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(Error::InvalidPerturbation(format!("scale factor must be positive, got {factor}")));
            }
            let contact = contact_set(grid, &base.u, problem.obstacle(), CONTACT_TOL);
            let region = component_with_rim(grid, &contact, seed_node)?;
            let mut a = problem.coefficient().clone();
            for &k in &region {
                a[k] *= factor;
            }
            (a, region.len())
        }
        _ => {
            return Err(Error::InvalidPerturbation(format!(
                "{kind:?} does not accept this perturbation"
            )))
        }
    };
    let perturbed = solve(&problem.with_coefficient(a_new)?, solver)?;
    Ok(NonuniquenessReport {
        u_diff_linf: perturbed.u.sub(&base.u).max_abs(),
        changed_nodes: changed,
        base,
        perturbed,
    })
}

/// Response of the solution to an unchecked additive change of the coefficient.
pub fn perturbation_response(problem: &ObstacleProblem, delta: &NodalField, solver: &SolverConfig) -> Result<f64> {
    delta.check_grid(problem.grid(), "perturbation")?;
    let base = solve(problem, solver)?;
    let moved = solve(&problem.with_coefficient(problem.coefficient().add(delta))?, solver)?;
    Ok(moved.u.sub(&base.u).max_abs())
}

/// Non-contact nodes connected to `seed` through element edges (boundary
/// nodes included), plus every contact node sharing an element with them.
fn component_with_rim(grid: &Grid, contact: &NodeMask, seed: usize) -> Result<Vec<usize>> {
    if seed >= grid.node_count() || contact.get(seed) {
        return Err(Error::InvalidPerturbation(format!(
            "seed node {seed} is not a non-contact node"
        )));
    }
    let neighbours = node_neighbours(grid);
    let mut in_region = vec![false; grid.node_count()];
    let mut queue = VecDeque::from([seed]);
    in_region[seed] = true;
    while let Some(k) = queue.pop_front() {
        for &j in &neighbours[k] {
            if in_region[j] {
                continue;
            }
            in_region[j] = true;
            if !contact.get(j) {
                queue.push_back(j);
            }
        }
    }
    Ok((0..grid.node_count()).filter(|&k| in_region[k]).collect())
}

fn node_neighbours(grid: &Grid) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); grid.node_count()];
    for t in grid.triangles() {
        for &a in t {
            for &b in t {
                if a != b && !nb[a].contains(&b) {
                    nb[a].push(b);
                }
            }
        }
    }
    nb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::make_testcase1;

    #[test]
    fn rim_component_on_small_grid() {
        let g = Grid::new(5).unwrap();
        let mut contact = NodeMask::empty(&g);
        contact.set(g.index(2, 2), true);
        let region = component_with_rim(&g, &contact, 0).unwrap();
        assert_eq!(region.len(), 25);
        assert!(component_with_rim(&g, &contact, g.index(2, 2)).is_err());
    }

    #[test]
    fn zero_perturbation_is_accepted() {
        let p = make_testcase1(12).unwrap();
        let zero = NodalField::zeros(p.grid());
        let r = nonuniqueness_check(
            NonuniquenessKind::ContactPerturb,
            &p,
            &Perturbation::Additive(zero),
            &tight_solver(),
        )
        .unwrap();
        assert_eq!(r.u_diff_linf, 0.0);
        assert_eq!(r.changed_nodes, 0);
    }

    #[test]
    fn mismatched_kind_is_rejected() {
        let p = make_testcase1(8).unwrap();
        let e = nonuniqueness_check(
            NonuniquenessKind::ComponentScale,
            &p,
            &Perturbation::Additive(NodalField::zeros(p.grid())),
            &tight_solver(),
        );
        assert!(matches!(e, Err(Error::InvalidPerturbation(_))));
    }
}
