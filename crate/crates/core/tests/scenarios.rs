use membrane_id::inverse::{relative_error_in, InversionConfig};
use membrane_id::mesh::NodeMask;
use membrane_id::scenarios::{
    contact_interior, make_experiment1, make_testcase1, nonuniqueness_check, perturbation_response, results_csv,
    run_one, run_table1, tight_solver, truncated_bump, Experiment, NonuniquenessKind, Perturbation, ResultRow,
    Scenario, ScenarioSpec, Table1Options, TestCase,
};
use membrane_id::forward::solve;

#[test]
fn coefficient_is_invisible_inside_contact_and_up_to_scale_outside() {
    let p = make_testcase1(16).unwrap();
    let solver = tight_solver();
    let base = solve(&p, &solver).unwrap();
    let interior = contact_interior(&p, &base);
    assert!(interior.count() > 0);
    let bump = truncated_bump(p.grid(), &interior, (0.5, 0.5), 0.1, 50.0);
    let r = nonuniqueness_check(NonuniquenessKind::ContactPerturb, &p, &Perturbation::Additive(bump), &solver).unwrap();
    assert!(r.changed_nodes > 0);
    assert!(r.u_diff_linf <= 1e-6, "{}", r.u_diff_linf);

    let scale = Perturbation::Scale { seed_node: 0, factor: 3.0 };
    let r = nonuniqueness_check(NonuniquenessKind::ComponentScale, &p, &scale, &solver).unwrap();
    assert!(r.u_diff_linf <= 1e-6, "{}", r.u_diff_linf);

    let everywhere = NodeMask::full(p.grid());
    let control = truncated_bump(p.grid(), &everywhere, (0.2, 0.2), 0.1, 50.0);
    assert!(perturbation_response(&p, &control, &solver).unwrap() > 1e-4);
}

#[test]
fn perturbation_outside_contact_is_rejected() {
    let p = make_testcase1(12).unwrap();
    let bump = truncated_bump(p.grid(), &NodeMask::full(p.grid()), (0.2, 0.2), 0.1, 50.0);
    assert!(nonuniqueness_check(NonuniquenessKind::ContactPerturb, &p, &Perturbation::Additive(bump), &tight_solver())
        .is_err());
}

#[test]
fn barrier_error_shrinks_under_refinement() {
    // n = 9, 17, 33 all see the same discrete square, so only the reference would refine
    let rows = run_table1(&[20, 40], TestCase::Testcase1, &Table1Options::default());
    let bm: Vec<f64> = rows.iter().filter(|r| r.method == "BM").map(|r| r.log10_err_inf.unwrap()).collect();
    assert_eq!(bm.len(), 2);
    assert!(bm.windows(2).all(|w| w[1] < w[0]), "{bm:?}");
}

fn strip_time(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn same_spec_and_seed_reproduce_rows() {
    let cfg = InversionConfig {
        max_iter: 40,
        stop_at_discrepancy: false,
        ..InversionConfig::default()
    };
    let rows = |seed| {
        let e = make_experiment1(10, 0.25, 0.01, seed).unwrap();
        let row = run_one(&e, &cfg).row;
        (e, results_csv(&[ResultRow::Inversion(row)]).unwrap())
    };
    let (e1, a) = rows(5);
    let (e2, b) = rows(5);
    assert_eq!(strip_time(&a), strip_time(&b));
    for (m1, m2) in e1.measurements.iter().zip(&e2.measurements) {
        assert!(m1.data().iter().zip(m2.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let (e3, _) = rows(6);
    assert_ne!(e1.measurements[0].data(), e3.measurements[0].data());
}

fn disk_error(measurements: Vec<usize>) -> f64 {
    let n = 20;
    let spec = ScenarioSpec {
        // nested data: the coarse model reproduces it up to the noise
        reference_n: n,
        ..ScenarioSpec::new(Scenario::Exp3 { measurements }, n, 0.001, 0)
    };
    let e = Experiment::build(&spec).unwrap();
    let cfg = InversionConfig {
        max_iter: 600,
        stop_at_discrepancy: false,
        ..InversionConfig::default()
    };
    let run = run_one(&e, &cfg).run.unwrap();
    let covered = |x: f64, y: f64| (x - 0.25).powi(2) + (y - 0.5).powi(2) <= 0.0625;
    relative_error_in(run.a_opt.as_ref().unwrap(), &e.a_dagger, covered).unwrap()
}

#[test]
fn more_indenter_positions_recover_the_covered_bump() {
    let single = disk_error(vec![0]);
    let all = disk_error(vec![0, 1, 2]);
    assert!(all < 0.5, "three measurements: {all}");
    assert!(single > 2.0 * all, "single {single}, three {all}");
}
