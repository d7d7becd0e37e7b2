//! P1 finite elements on a uniform triangulation of the unit square.

pub mod assembly;
mod grid;
pub mod io;
pub mod solve;
mod sparse;

pub use assembly::{assemble_load, assemble_stiffness};
pub use grid::{BoundaryCondition, Grid, NodalField, NodeMask};
pub use solve::{solve_spd, SpdSolver};
pub use sparse::{apply_dirichlet, SparseSymOperator};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub linf: f64,
    pub l2: f64,
    pub h1_semi: f64,
}

/// Max norm, plain Euclidean norm of the nodal vector, and the H¹ seminorm
/// `sqrt(vᵀ K v)` with the unit-coefficient stiffness (no boundary elimination).
pub fn norms(grid: &Grid, field: &NodalField) -> Result<Norms> {
    field.check_grid(grid, "field")?;
    let v = field.values();
    Ok(Norms {
        linf: field.max_abs(),
        l2: v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        h1_semi: h1_seminorm(grid, v),
    })
}

pub fn h1_seminorm(grid: &Grid, v: &[f64]) -> f64 {
    assembly::dirichlet_energy_where(grid, v, |_, _| true).max(0.0).sqrt()
}

/// H¹ seminorm over the triangles whose centroid satisfies `region`.
pub fn h1_seminorm_in(grid: &Grid, v: &[f64], region: impl Fn(f64, f64) -> bool) -> f64 {
    assembly::dirichlet_energy_where(grid, v, |_, tri| {
        let (x, y) = grid.centroid(*tri);
        region(x, y)
    })
    .max(0.0)
    .sqrt()
}

/// Sample a fine-grid field at the nodes it shares with a nested coarse grid.
pub fn restrict(fine: &NodalField, fine_grid: &Grid, coarse_grid: &Grid) -> Result<NodalField> {
    fine.check_grid(fine_grid, "fine field")?;
    let ratio = nesting_ratio(fine_grid, coarse_grid)?;
    let nc = coarse_grid.n();
    let values = (0..coarse_grid.node_count())
        .map(|k| {
            let (i, j) = (k % nc, k / nc);
            fine[fine_grid.index(i * ratio, j * ratio)]
        })
        .collect();
    NodalField::new(coarse_grid, values)
}

/// P1 interpolation of a coarse field onto a nested fine grid.
pub fn prolong(coarse: &NodalField, coarse_grid: &Grid, fine_grid: &Grid) -> Result<NodalField> {
    coarse.check_grid(coarse_grid, "coarse field")?;
    let ratio = nesting_ratio(fine_grid, coarse_grid)?;
    let nc = coarse_grid.n();
    let r = ratio as f64;
    let values = (0..fine_grid.node_count())
        .map(|k| {
            let (i, j) = fine_grid.ij(k);
            let (ci, cj) = ((i / ratio).min(nc - 2), (j / ratio).min(nc - 2));
            let (s, t) = ((i - ci * ratio) as f64 / r, (j - cj * ratio) as f64 / r);
            let c = |di: usize, dj: usize| coarse[coarse_grid.index(ci + di, cj + dj)];
            // the cell splits along s = t; each half is affine
            if s >= t {
                c(0, 0) + s * (c(1, 0) - c(0, 0)) + t * (c(1, 1) - c(1, 0))
            } else {
                c(0, 0) + t * (c(0, 1) - c(0, 0)) + s * (c(1, 1) - c(0, 1))
            }
        })
        .collect();
    NodalField::new(fine_grid, values)
}

fn nesting_ratio(fine: &Grid, coarse: &Grid) -> Result<usize> {
    let (nf, nc) = (fine.n() - 1, coarse.n() - 1);
    if nf % nc != 0 {
        return Err(invalid(format!(
            "grids are not nested: n_fine={} n_coarse={}",
            fine.n(),
            coarse.n()
        )));
    }
    Ok(nf / nc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_simple_fields() {
        let g = Grid::new(3).unwrap();
        let z = norms(&g, &NodalField::zeros(&g)).unwrap();
        assert_eq!((z.linf, z.l2, z.h1_semi), (0.0, 0.0, 0.0));
        let one = norms(&g, &NodalField::constant(&g, 1.0)).unwrap();
        assert_eq!(one.linf, 1.0);
        assert_eq!(one.l2, 3.0);
        assert!(one.h1_semi.abs() < 1e-12);
    }

    #[test]
    fn h1_of_linear_is_exact() {
        for n in [2, 3, 7, 20] {
            let g = Grid::new(n).unwrap();
            let x1 = g.sample(|x, _| x);
            let h = norms(&g, &x1).unwrap().h1_semi;
            assert!((h * h - 1.0).abs() < 1e-12, "n={n}: {}", h * h);
        }
    }

    #[test]
    fn restrict_identity_and_subsampling() {
        let g5 = Grid::new(5).unwrap();
        let g3 = Grid::new(3).unwrap();
        let f = g5.sample(|x, y| x + 10.0 * y);
        assert_eq!(restrict(&f, &g5, &g5).unwrap(), f);
        let r = restrict(&f, &g5, &g3).unwrap();
        assert_eq!(r, g3.sample(|x, y| x + 10.0 * y));
        assert_eq!(r[g3.index(1, 1)], f[g5.index(2, 2)]);
    }

    #[test]
    fn restrict_rejects_non_nested() {
        let g6 = Grid::new(6).unwrap();
        let g4 = Grid::new(4).unwrap();
        assert!(restrict(&NodalField::zeros(&g6), &g6, &g4).is_err());
    }

    #[test]
    fn prolong_reproduces_p1_functions() {
        let gc = Grid::new(4).unwrap();
        let gf = Grid::new(10).unwrap();
        let lin = |x: f64, y: f64| 2.0 * x - y + 0.5;
        let p = prolong(&gc.sample(lin), &gc, &gf).unwrap();
        let want = gf.sample(lin);
        for (a, b) in p.values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let back = restrict(&p, &gf, &gc).unwrap();
        assert_eq!(back, gc.sample(lin));
    }
}
