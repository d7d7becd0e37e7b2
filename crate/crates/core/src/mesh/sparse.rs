use super::grid::{BoundaryCondition, Grid, NodalField};

/// Symmetric sparse matrix in CSR layout with sorted column indices.
///
/// The pattern is the P1 connectivity of a [`Grid`]. Rows listed in
/// `eliminated` carry a unit diagonal and no off-diagonal coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    eliminated: Vec<bool>,
}

impl SparseSymOperator {
    /// Zero matrix with the node connectivity pattern of `grid`.
    pub(crate) fn with_grid_pattern(grid: &Grid) -> Self {
        let n = grid.n() as isize;
        let dim = grid.node_count();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::with_capacity(7 * dim);
        row_ptr.push(0);
        // Neighbours under the (i,j)-(i+1,j+1) split, in ascending index order.
        const OFFSETS: [(isize, isize); 7] = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (0, 1), (1, 1)];
        for k in 0..dim {
            let (i, j) = grid.ij(k);
            let (i, j) = (i as isize, j as isize);
            for (di, dj) in OFFSETS {
                let (ii, jj) = (i + di, j + dj);
                if ii >= 0 && jj >= 0 && ii < n && jj < n {
                    col_idx.push((jj * n + ii) as usize);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            dim,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
            eliminated: vec![false; dim],
        }
    }

    /// Identity of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
            eliminated: vec![false; dim],
        }
    }

    /// Build from a dense symmetric matrix (row-major), dropping exact zeros.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), dim * dim);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                let v = dense[r * dim + c];
                if v != 0.0 || r == c {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
            eliminated: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn eliminated_rows(&self) -> Vec<usize> {
        (0..self.dim).filter(|&k| self.eliminated[k]).collect()
    }

    pub fn is_eliminated(&self, row: usize) -> bool {
        self.eliminated[row]
    }

    #[inline]
    pub(crate) fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi].binary_search(&col).ok().map(|p| lo + p)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |s| self.values[s])
    }

    /// Add `v` to entry `(row, col)` and, off the diagonal, to its mirror.
    pub(crate) fn add_sym(&mut self, row: usize, col: usize, v: f64) {
        let s = self.slot(row, col).expect("entry outside sparsity pattern");
        self.values[s] += v;
        if row != col {
            let t = self.slot(col, row).expect("entry outside sparsity pattern");
            self.values[t] += v;
        }
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.get(k, k)).collect()
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    b = b.max(r.abs_diff(c));
                }
            }
        }
        b
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let mut acc = 0.0;
            for s in lo..hi {
                acc += self.values[s] * x[self.col_idx[s]];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_field(&self, x: &NodalField) -> NodalField {
        NodalField::from_vec_unchecked(x.grid_n(), self.apply(x.values()))
    }

    /// `xᵀ · self · x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Copy with `d` added to the diagonal of every row that is not eliminated.
    pub fn with_added_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim);
        let mut out = self.clone();
        for k in 0..self.dim {
            if !out.eliminated[k] {
                let s = out.slot(k, k).expect("missing diagonal");
                out.values[s] += d[k];
            }
        }
        out
    }

    /// Entrywise linear combination on identical patterns.
    pub fn axpby(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.col_idx, other.col_idx, "patterns differ");
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o = alpha * *o + beta * v;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Replace the listed rows and columns by identity rows.
    pub fn eliminate(&mut self, rows: &[usize]) {
        let mut mark = vec![false; self.dim];
        for &r in rows {
            mark[r] = true;
        }
        for r in 0..self.dim {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            for s in lo..hi {
                let c = self.col_idx[s];
                if mark[r] || mark[c] {
                    self.values[s] = if r == c { 1.0 } else { 0.0 };
                }
            }
            if mark[r] {
                self.eliminated[r] = true;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim * self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                d[r * self.dim + c] = v;
            }
        }
        d
    }

    /// True when every stored entry equals its mirror bit for bit.
    pub fn is_exactly_symmetric(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| self.get(c, r).to_bits() == v.to_bits()))
    }

    /// Power-iteration estimate of the spectral norm (largest eigenvalue for SPD).
    pub fn norm_estimate(&self, iterations: usize) -> f64 {
        let mut x: Vec<f64> = (0..self.dim)
            .map(|k| {
                // deterministic, sign-alternating and non-smooth start
                let h = (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * (0.5 + h as f64 / (1u64 << 24) as f64)
            })
            .collect();
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let nx = norm2(&x);
            if nx == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.apply(&x);
            lambda = norm2(&y);
            x = y;
        }
        lambda
    }
}

/// Symmetric Dirichlet elimination; homogeneous data so the rhs entries are zeroed.
pub fn apply_dirichlet(
    op: &SparseSymOperator,
    rhs: &NodalField,
    bc: &BoundaryCondition,
) -> (SparseSymOperator, NodalField) {
    let mut op = op.clone();
    op.eliminate(bc.nodes());
    let mut rhs = rhs.clone();
    for &k in bc.nodes() {
        rhs[k] = 0.0;
    }
    (op, rhs)
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
