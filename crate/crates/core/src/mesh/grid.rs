use crate::error::{invalid, Result};

/// Uniform triangulation of the unit square.
///
/// Node `(i, j)` sits at `(i·spacing, j·spacing)` and has index `j·n + i`.
/// Every cell is split along the diagonal from `(i, j)` to `(i+1, j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    spacing: f64,
    triangles: Vec<[usize; 3]>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 nodes per axis, got {n}")));
        }
        let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let v00 = j * n + i;
                let v10 = v00 + 1;
                let v01 = v00 + n;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Self {
            n,
            spacing: 1.0 / (n - 1) as f64,
            triangles,
        })
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (i as f64 * self.spacing, j as f64 * self.spacing)
    }

    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| self.is_boundary(k)).collect()
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| !self.is_boundary(k)).collect()
    }

    /// Twice the signed area of a triangle.
    pub fn signed_area2(&self, tri: [usize; 3]) -> f64 {
        let (x0, y0) = self.coords(tri[0]);
        let (x1, y1) = self.coords(tri[1]);
        let (x2, y2) = self.coords(tri[2]);
        (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    }

    pub fn centroid(&self, tri: [usize; 3]) -> (f64, f64) {
        let mut c = (0.0, 0.0);
        for &v in &tri {
            let (x, y) = self.coords(v);
            c.0 += x;
            c.1 += y;
        }
        (c.0 / 3.0, c.1 / 3.0)
    }

    /// Sample a function of the node coordinates.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> NodalField {
        let values = (0..self.node_count())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect();
        NodalField { n: self.n, values }
    }

    pub fn mask(&self, f: impl Fn(f64, f64) -> bool) -> NodeMask {
        let values = (0..self.node_count())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect();
        NodeMask { n: self.n, values }
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        BoundaryCondition {
            n: self.n,
            nodes: self.boundary_nodes(),
        }
    }
}

/// Real values at the nodes of a grid with `n` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    n: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(invalid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite field value at node {k}")));
        }
        Ok(Self { n: grid.n(), values })
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            n: grid.n(),
            values: vec![c; grid.node_count()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub(crate) fn from_vec_unchecked(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        Self { n, values }
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.n == grid.n()
    }

    pub(crate) fn check_grid(&self, grid: &Grid, what: &str) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(invalid(format!(
                "{what} lives on an n={} grid, expected n={}",
                self.n,
                grid.n()
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.n, other.n, "fields on different grids");
        Self {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for NodalField {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl std::ops::IndexMut<usize> for NodalField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Boolean per-node flags (contact sets, observation regions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    n: usize,
    values: Vec<bool>,
}

impl NodeMask {
    pub fn new(grid: &Grid, values: Vec<bool>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(invalid(format!(
                "mask has {} entries, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { n: grid.n(), values })
    }

    pub fn full(grid: &Grid) -> Self {
        Self {
            n: grid.n(),
            values: vec![true; grid.node_count()],
        }
    }

    pub fn empty(grid: &Grid) -> Self {
        Self {
            n: grid.n(),
            values: vec![false; grid.node_count()],
        }
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, k: usize) -> bool {
        self.values[k]
    }

    pub fn set(&mut self, k: usize, v: bool) {
        self.values[k] = v;
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    /// Indices of the set entries, ascending.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&k| self.values[k]).collect()
    }

    pub fn to_field(&self) -> NodalField {
        NodalField {
            n: self.n,
            values: self.values.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Remove every node that has an unset axis or diagonal neighbour.
    pub fn eroded(&self, grid: &Grid) -> NodeMask {
        let n = grid.n() as isize;
        let values = (0..self.values.len())
            .map(|k| {
                if !self.values[k] {
                    return false;
                }
                let (i, j) = grid.ij(k);
                let (i, j) = (i as isize, j as isize);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (ii, jj) = (i + di, j + dj);
                        if ii < 0 || jj < 0 || ii >= n || jj >= n {
                            return false;
                        }
                        if !self.values[(jj * n + ii) as usize] {
                            return false;
                        }
                    }
                }
                true
            })
            .collect();
        NodeMask { n: self.n, values }
    }
}

/// Homogeneous Dirichlet data on the listed nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryCondition {
    n: usize,
    nodes: Vec<usize>,
}

impl BoundaryCondition {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }
}
