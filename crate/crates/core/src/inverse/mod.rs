//! Coefficient identification from (partial) observations of contact states.

mod iteration;
mod state;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use iteration::{reconstruct, InversionRun, InversionTraceRow, StopReason};
pub use state::{adjoint_apply, derivative_apply, forward_observe, BarrierState};

use crate::error::{invalid, Error, Result};
use crate::mesh::{h1_seminorm, h1_seminorm_in, norms, Grid, NodalField, NodeMask, SpdSolver};

/// Load, obstacle, observed nodes and the (possibly noisy) data there.
#[derive(Debug, Clone)]
pub struct Measurement {
    grid: Grid,
    f: NodalField,
    h: NodalField,
    mask: NodeMask,
    data: Vec<f64>,
    noise_norm: Option<f64>,
}

impl Measurement {
    /// `data` lists the observed values in increasing node order.
    pub fn new(
        grid: &Grid,
        f: NodalField,
        h: NodalField,
        mask: NodeMask,
        data: Vec<f64>,
        noise_norm: Option<f64>,
    ) -> Result<Self> {
        f.check_grid(grid, "load density")?;
        h.check_grid(grid, "obstacle")?;
        if mask.grid_n() != grid.n() {
            return Err(invalid(format!(
                "observation mask is for n = {}, grid has n = {}",
                mask.grid_n(),
                grid.n()
            )));
        }
        if data.len() != mask.count() {
            return Err(invalid(format!(
                "{} data values for {} observed nodes",
                data.len(),
                mask.count()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite data value {v}")));
        }
        if let Some(s) = noise_norm {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid(format!("noise norm must be finite and non-negative, got {s}")));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            f,
            h,
            mask,
            data,
            noise_norm,
        })
    }

    /// Same setup with replaced data.
    pub fn with_data(&self, data: Vec<f64>, noise_norm: Option<f64>) -> Result<Self> {
        Self::new(&self.grid, self.f.clone(), self.h.clone(), self.mask.clone(), data, noise_norm)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn load_density(&self) -> &NodalField {
        &self.f
    }
    pub fn obstacle(&self) -> &NodalField {
        &self.h
    }
    pub fn mask(&self) -> &NodeMask {
        &self.mask
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn noise_norm(&self) -> Option<f64> {
        self.noise_norm
    }

    /// `‖y^δ − y‖ / ‖y^δ‖`, the relative noise level implied by the stored norm.
    pub fn noise_level(&self) -> Option<f64> {
        let d = self.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.noise_norm.map(|s| if d > 0.0 { s / d } else { 0.0 })
    }

    /// Restrict a nodal vector to the observed nodes.
    pub fn observe(&self, u: &[f64]) -> Vec<f64> {
        self.mask
            .values()
            .iter()
            .zip(u)
            .filter_map(|(&m, &v)| m.then_some(v))
            .collect()
    }

    /// Zero-extend observed values to a nodal vector.
    pub fn embed(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.node_count()];
        for (k, &v) in self.mask.indices().iter().zip(r) {
            out[*k] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InversionMethod {
    Landweber,
    Nesterov,
}

impl InversionMethod {
    pub fn label(self) -> &'static str {
        match self {
            Self::Landweber => "LANDWEBER",
            Self::Nesterov => "NESTEROV",
        }
    }
}

/// How `F(a)` in the residual is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResidualMode {
    /// Smoothed operator at the frozen barrier parameters.
    Barrier,
    /// Contact solution from the accelerated projected gradient method.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PreconditionerKind {
    /// Riesz map of `H¹₀`: solve with the unit-coefficient Dirichlet stiffness.
    H01,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    pub method: InversionMethod,
    /// `None`: `1/L̂` with `L̂` a power-iteration estimate of the preconditioned normal operator at `a0`.
    pub tau: Option<f64>,
    pub max_iter: usize,
    pub discrepancy_factor: f64,
    pub clip_bounds: [f64; 2],
    pub residual_operator: ResidualMode,
    pub preconditioner: PreconditionerKind,
    /// Stop at the first iterate meeting the discrepancy principle. When false
    /// the run continues to `max_iter` and only records that index.
    pub stop_at_discrepancy: bool,
    /// Keep every `snapshot_every`-th iterate (0 keeps none). Not part of the
    /// serialized form; the CLI takes it from its output section.
    #[serde(skip)]
    pub snapshot_every: usize,
    pub power_iterations: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            method: InversionMethod::Nesterov,
            tau: None,
            max_iter: 3000,
            discrepancy_factor: 1.01,
            clip_bounds: [0.1, 10.0],
            residual_operator: ResidualMode::Barrier,
            preconditioner: PreconditionerKind::H01,
            stop_at_discrepancy: true,
            snapshot_every: 0,
            power_iterations: 10,
        }
    }
}

impl InversionConfig {
    pub fn with_method(method: InversionMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("inversion stepsize must be positive, got {t}")));
            }
        }
        let [lo, hi] = self.clip_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(invalid(format!("clip bounds must satisfy 0 < c1 < c2, got [{lo}, {hi}]")));
        }
        if !(self.discrepancy_factor > 0.0) {
            return Err(invalid("discrepancy factor must be positive"));
        }
        if self.power_iterations == 0 && self.tau.is_none() {
            return Err(invalid("power_iterations must be positive when tau is automatic"));
        }
        Ok(())
    }
}

/// Reusable gradient preconditioner.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    solver: Option<SpdSolver>,
    boundary: Vec<usize>,
}

impl Preconditioner {
    pub fn new(grid: &Grid, kind: PreconditionerKind) -> Result<Self> {
        let solver = match kind {
            PreconditionerKind::L2 => None,
            PreconditionerKind::H01 => {
                let mut k = crate::mesh::assemble_stiffness(grid, &NodalField::constant(grid, 1.0))?;
                k.eliminate(&grid.boundary_nodes());
                Some(SpdSolver::new(&k)?)
            }
        };
        Ok(Self {
            kind,
            solver,
            boundary: grid.boundary_nodes(),
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn apply(&self, g: &NodalField) -> Result<NodalField> {
        let Some(solver) = &self.solver else {
            return Ok(g.clone());
        };
        let mut rhs = g.values().to_vec();
        for &k in &self.boundary {
            rhs[k] = 0.0;
        }
        let z = solver.solve(&rhs)?;
        Ok(NodalField::from_vec_unchecked(g.grid_n(), z))
    }
}

/// One-shot form of [`Preconditioner::apply`].
pub fn precondition(g: &NodalField, kind: PreconditionerKind) -> Result<NodalField> {
    let grid = Grid::new(g.grid_n())?;
    Preconditioner::new(&grid, kind)?.apply(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub relative_error: f64,
    pub discrepancy_factor: f64,
}

/// `‖a_k − a†‖_{H¹} / ‖a† − 1‖_{H¹}` (seminorms) and `residual / noise_norm`.
pub fn metrics(a_k: &NodalField, a_dagger: &NodalField, residual: f64, noise_norm: f64) -> Result<Metrics> {
    let grid = Grid::new(a_dagger.grid_n())?;
    a_k.check_grid(&grid, "iterate")?;
    let relative_error = relative_error(&grid, a_k, a_dagger)?;
    if !(noise_norm > 0.0) {
        return Err(Error::UndefinedMetric(format!(
            "discrepancy factor needs a positive noise norm, got {noise_norm}"
        )));
    }
    Ok(Metrics {
        relative_error,
        discrepancy_factor: residual / noise_norm,
    })
}

pub(crate) fn relative_error(grid: &Grid, a_k: &NodalField, a_dagger: &NodalField) -> Result<f64> {
    let denom = truth_scale(grid, a_dagger)?;
    Ok(h1_seminorm(grid, a_k.sub(a_dagger).values()) / denom)
}

/// [`metrics`]' relative error with both seminorms taken over the triangles
/// whose centroid satisfies `region`.
pub fn relative_error_in(
    a_k: &NodalField,
    a_dagger: &NodalField,
    region: impl Fn(f64, f64) -> bool + Copy,
) -> Result<f64> {
    let grid = Grid::new(a_dagger.grid_n())?;
    a_k.check_grid(&grid, "iterate")?;
    let denom = h1_seminorm_in(&grid, a_dagger.map(|v| v - 1.0).values(), region);
    if !(denom > 0.0) {
        return Err(Error::UndefinedMetric(
            "ground truth equals 1 throughout the region".into(),
        ));
    }
    Ok(h1_seminorm_in(&grid, a_k.sub(a_dagger).values(), region) / denom)
}

/// `‖a† − 1‖_{H¹}`, rejecting a vanishing value.
pub(crate) fn truth_scale(grid: &Grid, a_dagger: &NodalField) -> Result<f64> {
    let d = norms(grid, &a_dagger.map(|v| v - 1.0))?.h1_semi;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::UndefinedMetric(
            "ground truth has zero H1 seminorm distance to 1".into(),
        ))
    }
}

/// Uniform noise on `[−1, 1]` scaled so that `‖y^δ − y‖ = delta_rel·‖y‖` exactly.
/// Returns the noisy data and the noise norm.
pub fn add_noise(y: &[f64], delta_rel: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(delta_rel >= 0.0 && delta_rel.is_finite()) {
        return Err(invalid(format!("noise level must be non-negative, got {delta_rel}")));
    }
    if delta_rel == 0.0 {
        return Ok((y.to_vec(), 0.0));
    }
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(ynorm > 0.0) {
        return Err(invalid("cannot scale relative noise for zero data"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let enorm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(enorm > 0.0) {
        return Err(Error::NumericalFailure("degenerate noise draw".into()));
    }
    let noise_norm = delta_rel * ynorm;
    let c = noise_norm / enorm;
    Ok((y.iter().zip(&e).map(|(v, n)| v + c * n).collect(), noise_norm))
}
