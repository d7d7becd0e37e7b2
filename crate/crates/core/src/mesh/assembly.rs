use super::grid::{Grid, NodalField};
use super::sparse::SparseSymOperator;
use crate::error::{invalid, Result};

/// Element stiffness `∫_T ∇φ_p·∇φ_q` of the two congruent triangle shapes.
///
/// The values are independent of the mesh spacing in two dimensions.
const LOCAL_LOWER: [[f64; 3]; 3] = [[0.5, -0.5, 0.0], [-0.5, 1.0, -0.5], [0.0, -0.5, 0.5]];
const LOCAL_UPPER: [[f64; 3]; 3] = [[0.5, 0.0, -0.5], [0.0, 0.5, -0.5], [-0.5, -0.5, 1.0]];

/// Unit-coefficient element stiffness of triangle number `t`.
#[inline]
pub fn local_stiffness(t: usize) -> &'static [[f64; 3]; 3] {
    // Grid::new pushes (v00, v10, v11) then (v00, v11, v01) for every cell.
    if t % 2 == 0 {
        &LOCAL_LOWER
    } else {
        &LOCAL_UPPER
    }
}

#[inline]
fn element_mean(a: &[f64], tri: &[usize; 3]) -> f64 {
    (a[tri[0]] + a[tri[1]] + a[tri[2]]) / 3.0
}

/// Stiffness matrix of `-div(a ∇u)` with the element coefficient taken as the
/// mean of the three vertex values. No boundary handling is applied.
pub fn assemble_stiffness(grid: &Grid, a: &NodalField) -> Result<SparseSymOperator> {
    a.check_grid(grid, "coefficient")?;
    if let Some(k) = a.values().iter().position(|&v| v <= 0.0) {
        return Err(invalid(format!(
            "coefficient must be positive, got {} at node {k}",
            a[k]
        )));
    }
    Ok(assemble_stiffness_unchecked(grid, a.values()))
}

/// Assembly for arbitrary (also signed) coefficient vectors. Used for the
/// directional pieces `A(b)` of the linear map `a ↦ A(a)`.
pub fn assemble_stiffness_unchecked(grid: &Grid, a: &[f64]) -> SparseSymOperator {
    let mut op = SparseSymOperator::with_grid_pattern(grid);
    for (t, tri) in grid.triangles().iter().enumerate() {
        let abar = element_mean(a, tri);
        let k = local_stiffness(t);
        for p in 0..3 {
            op.add_sym(tri[p], tri[p], abar * k[p][p]);
            for q in p + 1..3 {
                op.add_sym(tri[p], tri[q], abar * k[p][q]);
            }
        }
    }
    op
}

/// Lumped-mass load vector: every triangle hands a third of its area to each vertex.
pub fn assemble_load(grid: &Grid, f: &NodalField) -> Result<NodalField> {
    f.check_grid(grid, "load density")?;
    let mut incident = vec![0u32; grid.node_count()];
    for tri in grid.triangles() {
        for &v in tri {
            incident[v] += 1;
        }
    }
    let h2 = grid.spacing() * grid.spacing();
    let values = incident
        .iter()
        .zip(f.values())
        .map(|(&c, &fv)| fv * (c as f64 * h2 / 6.0))
        .collect();
    NodalField::new(grid, values)
}

/// Matrix-free `A(b)·u`.
pub fn stiffness_apply(grid: &Grid, b: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    for (t, tri) in grid.triangles().iter().enumerate() {
        let bbar = element_mean(b, tri);
        if bbar == 0.0 {
            continue;
        }
        let k = local_stiffness(t);
        for p in 0..3 {
            let mut acc = 0.0;
            for q in 0..3 {
                acc += k[p][q] * u[tri[q]];
            }
            out[tri[p]] += bbar * acc;
        }
    }
    out
}

/// `c_k = uᵀ A(e_k) w` for every node `k`, the transpose of `b ↦ A(b)u` tested against `w`.
pub fn coefficient_contraction(grid: &Grid, u: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    for (t, tri) in grid.triangles().iter().enumerate() {
        let k = local_stiffness(t);
        let mut c = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                c += u[tri[p]] * k[p][q] * w[tri[q]];
            }
        }
        let share = c / 3.0;
        for &v in tri {
            out[v] += share;
        }
    }
    out
}

/// `∫ |∇v|²` over the triangles selected by `keep` (P1-exact).
pub fn dirichlet_energy_where(grid: &Grid, v: &[f64], keep: impl Fn(usize, &[usize; 3]) -> bool) -> f64 {
    let mut e = 0.0;
    for (t, tri) in grid.triangles().iter().enumerate() {
        if !keep(t, tri) {
            continue;
        }
        let k = local_stiffness(t);
        for p in 0..3 {
            for q in 0..3 {
                e += v[tri[p]] * k[p][q] * v[tri[q]];
            }
        }
    }
    e
}
