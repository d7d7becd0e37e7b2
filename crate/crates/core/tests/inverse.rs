use membrane_id::inverse::{
    add_noise, adjoint_apply, derivative_apply, forward_observe, reconstruct, BarrierState, InversionConfig,
    InversionMethod, Measurement, ResidualMode, StopReason,
};
use membrane_id::mesh::{Grid, NodalField, NodeMask};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Square indenter in the middle, unit load pushing up, observation on `mask`.
fn contact_measurement(n: usize, mask: NodeMask) -> Measurement {
    let g = Grid::new(n).unwrap();
    let h = g.sample(|x, y| if (x - 0.5).abs() <= 0.2 && (y - 0.5).abs() <= 0.2 { 0.05 } else { -1e-3 });
    let f = g.sample(|x, _| 1.0 + x);
    let count = mask.count();
    Measurement::new(&g, f, h, mask, vec![0.0; count], None).unwrap()
}

fn bumpy(grid: &Grid) -> NodalField {
    grid.sample(|x, y| 1.0 + 0.3 * (-20.0 * ((x - 0.3).powi(2) + (y - 0.6).powi(2))).exp())
}

fn random_direction(grid: &Grid, rng: &mut ChaCha8Rng) -> NodalField {
    let v = (0..grid.node_count()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    NodalField::new(grid, v).unwrap()
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [6, 10] {
        let g = Grid::new(n).unwrap();
        for mask in [g.mask(|_, _| true), g.mask(|x, _| x <= 0.5)] {
            let m = contact_measurement(n, mask);
            let state = BarrierState::from_schedule(&m, &bumpy(&g)).unwrap();
            for _ in 0..20 {
                let b = random_direction(&g, &mut rng);
                let r: Vec<f64> = (0..m.mask().count()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let lhs = dot(&derivative_apply(&state, &b, &m).unwrap(), &r);
                let rhs = dot(b.values(), adjoint_apply(&state, &r, &m).unwrap().values());
                assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()), "n={n}: {lhs} vs {rhs}");
            }
        }
    }
}

/// Relative error of central differences of the frozen barrier map against the derivative.
fn fd_errors(n: usize, eps: &[f64]) -> Vec<f64> {
    let g = Grid::new(n).unwrap();
    let m = contact_measurement(n, g.mask(|_, _| true));
    let a = bumpy(&g);
    let state = BarrierState::from_schedule(&m, &a).unwrap();
    let b = g.sample(|x, y| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin() * (1.0 + x));
    let d = derivative_apply(&state, &b, &m).unwrap();
    let at = |s: f64| {
        let st = BarrierState::new(&m, &a.add(&b.scale(s)), state.params(), Some(state.solution())).unwrap();
        m.observe(st.solution().values())
    };
    eps.iter()
        .map(|&e| {
            let (p, q) = (at(e), at(-e));
            let fd: Vec<f64> = p.iter().zip(&q).zip(&d).map(|((x, y), dv)| (x - y) / (2.0 * e) - dv).collect();
            norm(&fd) / norm(&d)
        })
        .collect()
}

#[test]
fn derivative_matches_frozen_finite_differences() {
    let eps = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
    let err = fd_errors(12, &eps);
    assert!(err[2] <= 1e-3, "{err:?}");
    let bottom = err.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(err[..=bottom].windows(2).all(|w| w[1] <= w[0]), "{err:?}");
    assert!(err[bottom..].windows(2).all(|w| w[1] >= w[0]), "{err:?}");
    assert!(bottom > 0 && bottom < eps.len() - 1, "{err:?}");
}

#[test]
fn derivative_scales_linearly() {
    let g = Grid::new(8).unwrap();
    let m = contact_measurement(8, g.mask(|_, _| true));
    let state = BarrierState::from_schedule(&m, &bumpy(&g)).unwrap();
    let b = g.sample(|x, y| x - y * y);
    let d1 = derivative_apply(&state, &b, &m).unwrap();
    let d2 = derivative_apply(&state, &b.scale(2.0), &m).unwrap();
    for (x, y) in d1.iter().zip(&d2) {
        assert!((2.0 * x - y).abs() <= 1e-15 * (1.0 + y.abs()));
    }
    let zero = adjoint_apply(&state, &vec![0.0; m.mask().count()], &m).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
}

#[test]
fn adjoint_of_a_point_residual_is_local() {
    let g = Grid::new(61).unwrap();
    let mask = g.mask(|_, _| true);
    let m = Measurement::new(
        &g,
        NodalField::constant(&g, 1.0),
        NodalField::constant(&g, -1e6),
        mask.clone(),
        vec![0.0; mask.count()],
        None,
    )
    .unwrap();
    let state = BarrierState::from_schedule(&m, &NodalField::constant(&g, 1.0)).unwrap();
    let node = g.index(15, 30);
    let (cx, cy) = g.coords(node);
    let mut r = vec![0.0; mask.count()];
    r[mask.indices().iter().position(|&k| k == node).unwrap()] = 1.0;
    let grad = adjoint_apply(&state, &r, &m).unwrap();
    let max_where = |keep: &dyn Fn(f64) -> bool| {
        (0..g.node_count())
            .filter(|&k| {
                let (x, y) = g.coords(k);
                keep(((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
            })
            .map(|k| grad[k].abs())
            .fold(0.0, f64::max)
    };
    // the gradient cancels at the node itself, so compare its one-ring
    let near = max_where(&|d| d <= 0.05);
    let far = max_where(&|d| d >= 0.5);
    assert!(near >= 10.0 * far, "near {near}, far {far}");
}

proptest! {
    #[test]
    fn noise_has_the_requested_relative_size(
        y in prop::collection::vec(-10.0f64..10.0, 1..200),
        delta in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let ny = norm(&y);
        prop_assume!(ny > 1e-3);
        let (yd, s) = add_noise(&y, delta, seed).unwrap();
        let diff: Vec<f64> = yd.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!((norm(&diff) / ny - delta).abs() <= 1e-12);
        prop_assert!((s - delta * ny).abs() <= 1e-12 * (1.0 + s));
        let (again, _) = add_noise(&y, delta, seed).unwrap();
        prop_assert_eq!(yd, again);
    }
}

fn synthetic(n: usize, truth: &NodalField, h: NodalField) -> Measurement {
    let g = Grid::new(n).unwrap();
    let mask = g.mask(|_, _| true);
    let empty = Measurement::new(&g, g.sample(|x, _| 1.0 + x), h, mask, vec![0.0; g.node_count()], None).unwrap();
    let y = forward_observe(truth, &empty, ResidualMode::Exact).unwrap();
    empty.with_data(y, None).unwrap()
}

/// Smooth truth with the same boundary values as the start.
fn pinned_start(grid: &Grid, truth: &NodalField) -> NodalField {
    let mut a0 = NodalField::constant(grid, 1.0);
    for k in grid.boundary_nodes() {
        a0[k] = truth[k];
    }
    a0
}

#[test]
fn iterates_keep_the_boundary_values() {
    let n = 10;
    let g = Grid::new(n).unwrap();
    let truth = bumpy(&g);
    let m = synthetic(n, &truth, NodalField::constant(&g, -1e6));
    let a0 = pinned_start(&g, &truth);
    let cfg = InversionConfig {
        max_iter: 30,
        stop_at_discrepancy: false,
        snapshot_every: 1,
        ..InversionConfig::default()
    };
    let run = reconstruct(&a0, &[m], &cfg, Some(&truth)).unwrap();
    assert_eq!(run.snapshots.len(), 31);
    for (_, a) in &run.snapshots {
        for k in g.boundary_nodes() {
            assert_eq!(a[k].to_bits(), a0[k].to_bits());
        }
    }
}

#[test]
fn exact_data_at_the_truth_stops_immediately() {
    let n = 8;
    let g = Grid::new(n).unwrap();
    let truth = bumpy(&g);
    let m = contact_measurement(n, g.mask(|_, _| true));
    let y = forward_observe(&truth, &m, ResidualMode::Barrier).unwrap();
    let m = m.with_data(y, Some(0.0)).unwrap();
    let run = reconstruct(&truth, &[m], &InversionConfig::default(), None).unwrap();
    assert_eq!(run.stop, StopReason::Discrepancy);
    assert_eq!(run.k_stop, 0);
    assert_eq!(run.trace.len(), 1);
}

#[test]
fn discrepancy_needs_a_noise_norm() {
    let g = Grid::new(6).unwrap();
    let m = contact_measurement(6, g.mask(|_, _| true));
    assert!(reconstruct(&NodalField::constant(&g, 1.0), &[m], &InversionConfig::default(), None).is_err());
}

#[test]
fn inactive_obstacle_identification_makes_progress() {
    let n = 15;
    let g = Grid::new(n).unwrap();
    let truth = g.sample(|x, y| 1.0 + 0.5 * (-10.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp());
    let m = synthetic(n, &truth, NodalField::constant(&g, -1e6));
    let a0 = pinned_start(&g, &truth);
    let cfg = InversionConfig {
        method: InversionMethod::Nesterov,
        max_iter: 500,
        stop_at_discrepancy: false,
        ..InversionConfig::default()
    };
    let run = reconstruct(&a0, &[m], &cfg, Some(&truth)).unwrap();
    let first = run.trace[0].relative_error.unwrap();
    let last = run.trace.last().unwrap().relative_error.unwrap();
    assert!(last < 0.5 * first, "{first} -> {last}");
}
