use super::grid::NodalField;
use super::sparse::{dot, norm2, SparseSymOperator};
use crate::error::{Error, Result};

/// Relative residual target of every SPD solve.
pub const SOLVE_RTOL: f64 = 1e-10;

/// Above this many flops (`dim · bandwidth²`) the banded factorization is
/// replaced by Jacobi-preconditioned conjugate gradients.
const DIRECT_FLOP_LIMIT: f64 = 6e7;

/// Dense-band Cholesky factor `L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    band: usize,
    // row i holds L[i][i-band..=i]
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(op: &SparseSymOperator) -> Result<Self> {
        let dim = op.dim();
        let band = op.bandwidth();
        let w = band + 1;
        let mut l = vec![0.0; dim * w];
        for r in 0..dim {
            for (c, v) in op.row(r) {
                if c <= r && v != 0.0 {
                    l[r * w + (c + band - r)] = v;
                }
            }
        }
        for i in 0..dim {
            let j0 = i.saturating_sub(band);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(band));
                let mut s = l[i * w + (j + band - i)];
                for k in k0..j {
                    s -= l[i * w + (k + band - i)] * l[j * w + (k + band - j)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NumericalFailure(format!(
                            "matrix not positive definite: pivot {s:e} at row {i}"
                        )));
                    }
                    l[i * w + band] = s.sqrt();
                } else {
                    l[i * w + (j + band - i)] = s / l[j * w + band];
                }
            }
        }
        Ok(Self { dim, band, l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (dim, band, w) = (self.dim, self.band, self.band + 1);
        let mut y = rhs.to_vec();
        for i in 0..dim {
            let mut s = y[i];
            for k in i.saturating_sub(band)..i {
                s -= self.l[i * w + (k + band - i)] * y[k];
            }
            y[i] = s / self.l[i * w + band];
        }
        for i in (0..dim).rev() {
            let mut s = y[i];
            for k in i + 1..(i + band + 1).min(dim) {
                s -= self.l[k * w + (i + band - k)] * y[k];
            }
            y[i] = s / self.l[i * w + band];
        }
        y
    }
}

/// A reusable solver for one SPD operator.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct {
        op: SparseSymOperator,
        factor: BandedCholesky,
    },
    Iterative {
        op: SparseSymOperator,
        inv_diag: Vec<f64>,
    },
}

impl SpdSolver {
    pub fn new(op: &SparseSymOperator) -> Result<Self> {
        let b = op.bandwidth() as f64;
        if op.dim() as f64 * b * b <= DIRECT_FLOP_LIMIT {
            Ok(Self::Direct {
                factor: BandedCholesky::factor(op)?,
                op: op.clone(),
            })
        } else {
            let diag = op.diagonal();
            if let Some(k) = diag.iter().position(|&d| !(d > 0.0)) {
                return Err(Error::NumericalFailure(format!(
                    "non-positive diagonal {:e} at row {k}",
                    diag[k]
                )));
            }
            Ok(Self::Iterative {
                inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
                op: op.clone(),
            })
        }
    }

    pub fn operator(&self) -> &SparseSymOperator {
        match self {
            Self::Direct { op, .. } | Self::Iterative { op, .. } => op,
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_from(rhs, None)
    }

    /// Solve with an optional starting guess (only used by the iterative path).
    pub fn solve_from(&self, rhs: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let target = SOLVE_RTOL * (1.0 + norm2(rhs));
        match self {
            Self::Direct { op, factor } => {
                let mut x = factor.solve(rhs);
                // two rounds of refinement are plenty for the condition numbers seen here
                for _ in 0..2 {
                    let r = residual(op, &x, rhs);
                    if norm2(&r) <= target {
                        break;
                    }
                    let dx = factor.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                }
                let res = norm2(&residual(op, &x, rhs));
                if !(res <= target) {
                    return Err(Error::NumericalFailure(format!(
                        "direct solve residual {res:e} above {target:e}"
                    )));
                }
                Ok(x)
            }
            Self::Iterative { op, inv_diag } => pcg(op, inv_diag, rhs, guess, target),
        }
    }
}

fn residual(op: &SparseSymOperator, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let ax = op.apply(x);
    rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

fn pcg(
    op: &SparseSymOperator,
    inv_diag: &[f64],
    rhs: &[f64],
    guess: Option<&[f64]>,
    target: f64,
) -> Result<Vec<f64>> {
    let dim = op.dim();
    let mut x = guess.map_or_else(|| vec![0.0; dim], <[f64]>::to_vec);
    let mut r = residual(op, &x, rhs);
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; dim];
    let max_iter = 20 * dim + 100;
    for it in 0..max_iter {
        let rn = norm2(&r);
        if rn <= target {
            return Ok(x);
        }
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NumericalFailure(format!(
                "conjugate gradient breakdown at iteration {it}: pᵀAp = {pap:e}, residual {rn:e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // periodic true-residual replacement keeps the recurrence honest
        if it % 200 == 199 {
            r = residual(op, &x, rhs);
        }
        for i in 0..dim {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = norm2(&residual(op, &x, rhs));
    if rn <= target {
        Ok(x)
    } else {
        Err(Error::NumericalFailure(format!(
            "conjugate gradient did not converge in {max_iter} iterations: residual {rn:e}, target {target:e}"
        )))
    }
}

/// Solve `op · x = rhs` for an operator that is SPD on its free rows.
pub fn solve_spd(op: &SparseSymOperator, rhs: &NodalField) -> Result<NodalField> {
    if rhs.len() != op.dim() {
        return Err(crate::error::invalid(format!(
            "rhs length {} does not match operator dimension {}",
            rhs.len(),
            op.dim()
        )));
    }
    let x = SpdSolver::new(op)?.solve(rhs.values())?;
    Ok(NodalField::from_vec_unchecked(rhs.grid_n(), x))
}
