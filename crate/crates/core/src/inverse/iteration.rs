use std::time::Instant;

use super::state::{adjoint_apply, derivative_apply, forward_observe, BarrierState};
use super::{relative_error, truth_scale, InversionConfig, InversionMethod, Measurement, Preconditioner, ResidualMode};
use crate::error::{invalid, Error, Result};
use crate::forward::BarrierParams;
use crate::mesh::{Grid, NodalField};

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    NonFinite,
    ForwardFailure(String),
}

impl StopReason {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Discrepancy => "discrepancy",
            Self::MaxIter => "max_iter",
            Self::NonFinite => "non_finite",
            Self::ForwardFailure(_) => "forward_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionTraceRow {
    pub iter: usize,
    pub residual_norm: f64,
    pub discrepancy_factor: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InversionRun {
    pub method: InversionMethod,
    /// One row per iterate `a_0, …, a_{k_stop}`.
    pub trace: Vec<InversionTraceRow>,
    pub snapshots: Vec<(usize, NodalField)>,
    pub stop: StopReason,
    pub k_stop: usize,
    /// First index meeting the discrepancy principle.
    pub k_disc: Option<usize>,
    /// Index of the smallest relative error (ground truth runs only).
    pub k_opt: Option<usize>,
    pub a_final: NodalField,
    pub a_disc: Option<NodalField>,
    pub a_opt: Option<NodalField>,
    pub tau: f64,
    /// Joint noise norm over all measurements, when known.
    pub noise_norm: Option<f64>,
    pub wall_time: f64,
}

impl InversionRun {
    pub fn trace_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        let mut s = String::from("iter,residual_norm,discrepancy_factor,relative_error\n");
        for r in &self.trace {
            s.push_str(&format!(
                "{},{:e},{},{}\n",
                r.iter,
                r.residual_norm,
                opt(r.discrepancy_factor),
                opt(r.relative_error)
            ));
        }
        s
    }

    pub fn row(&self, k: usize) -> Option<&InversionTraceRow> {
        self.trace.get(k)
    }

    /// Converged in the exit-code sense: stopped by the discrepancy principle.
    pub fn stopped_by_discrepancy(&self) -> bool {
        self.stop == StopReason::Discrepancy
    }
}

/// Run the per-measurement closure, concurrently when there is more than one.
fn per_measurement<T: Send>(
    ms: &[Measurement],
    f: impl Fn(usize, &Measurement) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let wrap = |i: usize, m: &Measurement| {
        f(i, m).map_err(|e| Error::Measurement {
            index: i,
            source: Box::new(e),
        })
    };
    if ms.len() <= 1 {
        return ms.iter().enumerate().map(|(i, m)| wrap(i, m)).collect();
    }
    let wrap = &wrap;
    std::thread::scope(|s| {
        let handles: Vec<_> = ms
            .iter()
            .enumerate()
            .map(|(i, m)| s.spawn(move || wrap(i, m)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("measurement worker panicked"))
            .collect()
    })
}

fn states_at(ms: &[Measurement], a: &NodalField, params: &[BarrierParams], warm: &[BarrierState]) -> Result<Vec<BarrierState>> {
    per_measurement(ms, |i, m| BarrierState::new(m, a, params[i], Some(warm[i].solution())))
}

fn residuals(ms: &[Measurement], a: &NodalField, states: &[BarrierState], mode: ResidualMode) -> Result<Vec<Vec<f64>>> {
    per_measurement(ms, |i, m| {
        let y = match mode {
            ResidualMode::Barrier => m.observe(states[i].solution().values()),
            ResidualMode::Exact => forward_observe(a, m, ResidualMode::Exact)?,
        };
        Ok(y.iter().zip(m.data()).map(|(f, d)| f - d).collect())
    })
}

fn stacked_norm(r: &[Vec<f64>]) -> f64 {
    r.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn gradient(ms: &[Measurement], states: &[BarrierState], res: &[Vec<f64>]) -> Result<NodalField> {
    let parts = per_measurement(ms, |i, m| adjoint_apply(&states[i], &res[i], m))?;
    let mut g = parts[0].clone();
    for p in &parts[1..] {
        g = g.add(p);
    }
    Ok(g)
}

/// `1/L̂` with `L̂` from power iteration on `v ↦ P Σ F'*F' v`.
fn estimate_tau(ms: &[Measurement], states: &[BarrierState], pre: &Preconditioner, iters: usize) -> Result<f64> {
    let grid = ms[0].grid();
    let mut v = grid.sample(|_, _| 1.0);
    for k in grid.boundary_nodes() {
        v[k] = 0.0;
    }
    let norm = |x: &NodalField| x.values().iter().map(|t| t * t).sum::<f64>().sqrt();
    v = v.scale(1.0 / norm(&v));
    let mut lam = 0.0;
    for _ in 0..iters {
        let parts = per_measurement(ms, |i, m| {
            let d = derivative_apply(&states[i], &v, m)?;
            adjoint_apply(&states[i], &d, m)
        })?;
        let mut w = parts[0].clone();
        for p in &parts[1..] {
            w = w.add(p);
        }
        let w = pre.apply(&w)?;
        lam = norm(&w);
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "stepsize estimate degenerate: power iteration norm {lam:e}"
            )));
        }
        v = w.scale(1.0 / lam);
    }
    Ok(1.0 / lam)
}

fn clip_pinned(a: &NodalField, bounds: [f64; 2], boundary: &[(usize, f64)]) -> NodalField {
    let mut out = a.map(|v| v.clamp(bounds[0], bounds[1]));
    for &(k, v) in boundary {
        out[k] = v;
    }
    out
}

/// Landweber or Nesterov-accelerated Landweber iteration from `a0`.
///
/// The barrier parameters are fixed per measurement by a schedule run at
/// `a0`; every later forward evaluation is the barrier minimizer at those
/// parameters. The boundary values of `a0` are kept on ∂Ω.
pub fn reconstruct(
    a0: &NodalField,
    measurements: &[Measurement],
    cfg: &InversionConfig,
    ground_truth: Option<&NodalField>,
) -> Result<InversionRun> {
    cfg.validate()?;
    let clock = Instant::now();
    let Some(first) = measurements.first() else {
        return Err(invalid("at least one measurement is required"));
    };
    let grid: Grid = first.grid().clone();
    a0.check_grid(&grid, "initial coefficient")?;
    for (i, m) in measurements.iter().enumerate() {
        if m.grid().n() != grid.n() {
            return Err(invalid(format!("measurement {i} is on a different grid")));
        }
    }
    let [lo, hi] = cfg.clip_bounds;
    if a0.values().iter().any(|&v| !(v >= lo && v <= hi)) {
        return Err(invalid(format!("initial coefficient leaves the bounds [{lo}, {hi}]")));
    }
    let noise_norm = measurements
        .iter()
        .map(|m| m.noise_norm())
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().map(|s| s * s).sum::<f64>().sqrt());
    if cfg.stop_at_discrepancy && noise_norm.is_none() {
        return Err(invalid("discrepancy stopping requires the noise norm of every measurement"));
    }
    let truth = match ground_truth {
        Some(t) => {
            t.check_grid(&grid, "ground truth")?;
            truth_scale(&grid, t)?;
            Some(t)
        }
        None => None,
    };
    let boundary: Vec<(usize, f64)> = grid.boundary_nodes().into_iter().map(|k| (k, a0[k])).collect();
    let pre = Preconditioner::new(&grid, cfg.preconditioner)?;

    let mut states = per_measurement(measurements, |_, m| BarrierState::from_schedule(m, a0))?;
    let params: Vec<BarrierParams> = states.iter().map(|s| s.params()).collect();
    let tau = match cfg.tau {
        Some(t) => t,
        None => estimate_tau(measurements, &states, &pre, cfg.power_iterations)?,
    };
    let threshold = noise_norm.map(|s| cfg.discrepancy_factor * s);

    let mut a = a0.clone();
    let mut a_prev = a0.clone();
    let mut trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut k_disc = None;
    let mut a_disc = None;
    let mut best: Option<(usize, f64, NodalField)> = None;
    let mut res = residuals(measurements, &a, &states, cfg.residual_operator)?;
    let mut k = 0;
    let stop = loop {
        let rn = stacked_norm(&res);
        let rel = match truth {
            Some(t) => Some(relative_error(&grid, &a, t)?),
            None => None,
        };
        trace.push(InversionTraceRow {
            iter: k,
            residual_norm: rn,
            discrepancy_factor: noise_norm.filter(|&s| s > 0.0).map(|s| rn / s),
            relative_error: rel,
        });
        if cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0 {
            snapshots.push((k, a.clone()));
        }
        if !rn.is_finite() || rel.is_some_and(|r| !r.is_finite()) {
            break StopReason::NonFinite;
        }
        if let Some(r) = rel {
            if best.as_ref().is_none_or(|(_, e, _)| r < *e) {
                best = Some((k, r, a.clone()));
            }
        }
        if k_disc.is_none() && threshold.is_some_and(|t| rn <= t) {
            k_disc = Some(k);
            a_disc = Some(a.clone());
            if cfg.stop_at_discrepancy {
                break StopReason::Discrepancy;
            }
        }
        if k == cfg.max_iter {
            break StopReason::MaxIter;
        }

        let step = (|| -> Result<(NodalField, Vec<BarrierState>)> {
            let (grad_states, grad_res);
            let b_states;
            let b_res;
            match cfg.method {
                InversionMethod::Landweber => {
                    grad_states = &states;
                    grad_res = &res;
                }
                InversionMethod::Nesterov => {
                    let beta = (k as f64 - 1.0) / (k as f64 + 2.0);
                    let b = clip_pinned(&a.add(&a.sub(&a_prev).scale(beta)), cfg.clip_bounds, &boundary);
                    b_states = states_at(measurements, &b, &params, &states)?;
                    b_res = residuals(measurements, &b, &b_states, cfg.residual_operator)?;
                    grad_states = &b_states;
                    grad_res = &b_res;
                }
            }
            let base = grad_states[0].coefficient().clone();
            let dir = pre.apply(&gradient(measurements, grad_states, grad_res)?)?;
            let next = clip_pinned(&base.sub(&dir.scale(tau)), cfg.clip_bounds, &boundary);
            let next_states = states_at(measurements, &next, &params, grad_states)?;
            Ok((next, next_states))
        })();
        match step {
            Ok((next, next_states)) => {
                if next.values().iter().any(|v| !v.is_finite()) {
                    break StopReason::NonFinite;
                }
                match residuals(measurements, &next, &next_states, cfg.residual_operator) {
                    Ok(r) => res = r,
                    Err(e) => break StopReason::ForwardFailure(e.to_string()),
                }
                a_prev = std::mem::replace(&mut a, next);
                states = next_states;
                k += 1;
            }
            Err(e) => break StopReason::ForwardFailure(e.to_string()),
        }
    };

    let (k_opt, a_opt) = match best {
        Some((kb, _, ab)) => (Some(kb), Some(ab)),
        None => (None, None),
    };
    Ok(InversionRun {
        method: cfg.method,
        k_stop: trace.last().map_or(0, |r| r.iter),
        trace,
        snapshots,
        stop,
        k_disc,
        k_opt,
        a_final: a,
        a_disc,
        a_opt,
        tau,
        noise_norm,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}
