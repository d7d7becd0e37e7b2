//! Batch driver behind the `membrane-id` binary: JSON run configs, the
//! `forward`, `invert` and `experiment` commands, and their output files.

mod config;

use std::path::{Path, PathBuf};

pub use config::{GridConfig, IngestMeasurement, OutputConfig, Overrides, ProblemConfig, RunConfig};

use crate::error::{invalid, Error, Result};
use crate::forward::{solve, ObstacleProblem};
use crate::inverse::{reconstruct, InversionConfig, InversionRun, Measurement, StopReason};
use crate::mesh::io::{read_field_csv, write_field_csv, write_field_pgm};
use crate::mesh::{Grid, NodalField, NodeMask};
use crate::scenarios::{
    results_csv, run_inversion_experiment, run_table1, Experiment, InversionCell, ResultRow, Scenario, ScenarioSpec,
    Table1Options,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Invert,
    Experiment,
}

/// Parse `config_text`, run `cmd` and map the outcome to an exit code.
/// Diagnostics go to stderr.
pub fn run(cmd: Command, config_text: &str, overrides: &Overrides) -> i32 {
    let outcome = RunConfig::from_json(config_text).and_then(|cfg| execute(cmd, cfg.materialize(overrides)));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Run an already materialized config; returns the exit code.
pub fn execute(cmd: Command, cfg: RunConfig) -> Result<i32> {
    let out = Output::create(&cfg.output)?;
    out.text("config.echo.json", &cfg.to_json())?;
    match cmd {
        Command::Forward => cmd_forward(&cfg, &out),
        Command::Invert => cmd_invert(&cfg, &out),
        Command::Experiment => cmd_experiment(&cfg, &out),
    }
}

struct Output {
    dir: PathBuf,
    images: bool,
}

impl Output {
    fn create(cfg: &OutputConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.dir)?;
        Ok(Self {
            dir: cfg.dir.clone(),
            images: cfg.images,
        })
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        Ok(())
    }

    fn field(&self, name: &str, f: &NodalField) -> Result<()> {
        write_field_csv(&self.dir.join(format!("{name}.csv")), f)?;
        if self.images {
            write_field_pgm(&self.dir.join(format!("{name}.pgm")), f)?;
        }
        Ok(())
    }
}

fn scenario_of(problem: &ProblemConfig, experiment: bool) -> Option<Vec<(Scenario, f64)>> {
    Some(match problem {
        ProblemConfig::Exp1 { radius, delta } => {
            let radii = radius.map_or_else(|| if experiment { vec![0.1, 0.25, 0.5] } else { vec![0.1] }, |r| vec![r]);
            let deltas = delta.map_or_else(|| if experiment { vec![0.001, 0.01, 0.1] } else { vec![0.001] }, |d| vec![d]);
            radii
                .iter()
                .flat_map(|&radius| deltas.iter().map(move |&d| (Scenario::Exp1 { radius }, d)))
                .collect()
        }
        ProblemConfig::Exp2 { region, truth, delta } => {
            let regions = match region {
                Some(r) => vec![*r],
                None if experiment => vec![
                    crate::scenarios::ObservationRegion::Left,
                    crate::scenarios::ObservationRegion::Right,
                    crate::scenarios::ObservationRegion::Full,
                ],
                None => vec![crate::scenarios::ObservationRegion::Full],
            };
            regions
                .into_iter()
                .map(|region| (Scenario::Exp2 { region, truth: *truth }, *delta))
                .collect()
        }
        ProblemConfig::Exp3 { measurements, delta } => vec![(
            Scenario::Exp3 {
                measurements: measurements.clone(),
            },
            *delta,
        )],
        ProblemConfig::Custom {
            coefficient,
            load,
            indenters,
            region,
            delta,
        } => vec![(
            Scenario::Custom {
                coefficient: *coefficient,
                load: *load,
                indenters: indenters.clone(),
                region: *region,
            },
            *delta,
        )],
        _ => return None,
    })
}

fn spec_for(cfg: &RunConfig, scenario: Scenario, delta: f64) -> ScenarioSpec {
    let n = cfg.n();
    let mut spec = ScenarioSpec::new(scenario, n, delta, cfg.seed);
    if let Some(rn) = cfg.grid.reference_n {
        spec.reference_n = rn;
    }
    spec
}

fn forward_problem(cfg: &RunConfig) -> Result<ObstacleProblem> {
    let grid = Grid::new(cfg.n())?;
    let n = Some(grid.n());
    match &cfg.problem {
        ProblemConfig::Testcase1 => crate::scenarios::make_testcase1(grid.n()),
        ProblemConfig::Testcase2 => crate::scenarios::make_testcase2(grid.n()),
        ProblemConfig::Files {
            coefficient,
            load,
            obstacle,
        } => ObstacleProblem::new(
            &grid,
            read_field_csv(coefficient, n)?,
            read_field_csv(load, n)?,
            read_field_csv(obstacle, n)?,
        ),
        other => {
            let Some(list) = scenario_of(other, false) else {
                return Err(invalid("forward needs TESTCASE1, TESTCASE2, FILES or an experiment scenario"));
            };
            // first indenter of the scenario, at the true coefficient
            let (scenario, _) = list.into_iter().next().expect("one scenario");
            let setup = crate::scenarios::setups_of(&scenario)?
                .into_iter()
                .next()
                .expect("validated non-empty");
            setup.realize(&grid)
        }
    }
}

fn cmd_forward(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let problem = forward_problem(cfg)?;
    let sol = solve(&problem, &cfg.solver)?;
    out.text("trace.csv", &sol.trace_csv())?;
    out.field("u", &sol.u)?;
    out.field("lambda", &sol.lambda)?;
    out.field("contact", &sol.contact_mask.to_field())?;
    eprintln!(
        "{}: {} iterations, kkt residual {:e}, {}",
        cfg.solver.method.label(),
        sol.iterations,
        sol.final_kkt(),
        if sol.converged { "converged" } else { "budget exhausted" }
    );
    Ok(if sol.converged { EXIT_OK } else { EXIT_BUDGET })
}

fn inversion_config(cfg: &RunConfig) -> InversionConfig {
    InversionConfig {
        snapshot_every: cfg.output.snapshot_every,
        ..cfg.inversion.clone()
    }
}

fn ingest(
    cfg: &RunConfig,
    list: &[IngestMeasurement],
    a0: Option<&Path>,
    truth: Option<&Path>,
) -> Result<(NodalField, Vec<Measurement>, Option<NodalField>)> {
    let grid = Grid::new(cfg.n())?;
    let n = Some(grid.n());
    let measurements = list
        .iter()
        .map(|m| {
            let mask = match &m.mask {
                Some(p) => {
                    let f = read_field_csv(p, n)?;
                    NodeMask::new(&grid, f.values().iter().map(|&v| v != 0.0).collect())?
                }
                None => NodeMask::full(&grid),
            };
            let data = read_field_csv(&m.data, n)?;
            let observed = mask.indices().into_iter().map(|k| data[k]).collect();
            Measurement::new(
                &grid,
                read_field_csv(&m.load, n)?,
                read_field_csv(&m.obstacle, n)?,
                mask,
                observed,
                m.noise_norm,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let a0 = match a0 {
        Some(p) => read_field_csv(p, n)?,
        None => NodalField::constant(&grid, 1.0),
    };
    let truth = truth.map(|p| read_field_csv(p, n)).transpose()?;
    Ok((a0, measurements, truth))
}

fn write_run(out: &Output, run: &InversionRun, prefix: &str) -> Result<()> {
    out.field(&format!("{prefix}a_final"), &run.a_final)?;
    if let Some(a) = &run.a_opt {
        out.field(&format!("{prefix}a_opt"), a)?;
    }
    if let Some(a) = &run.a_disc {
        out.field(&format!("{prefix}a_disc"), a)?;
    }
    for (k, a) in &run.snapshots {
        out.field(&format!("{prefix}a_{k:05}"), a)?;
    }
    Ok(())
}

fn cmd_invert(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let icfg = inversion_config(cfg);
    let run = match &cfg.problem {
        ProblemConfig::Ingest {
            measurements,
            a0,
            ground_truth,
        } => {
            let (a0, ms, truth) = ingest(cfg, measurements, a0.as_deref(), ground_truth.as_deref())?;
            reconstruct(&a0, &ms, &icfg, truth.as_ref())?
        }
        other => {
            let Some(list) = scenario_of(other, false) else {
                return Err(invalid("invert needs INGEST or an experiment scenario"));
            };
            let (scenario, delta) = list.into_iter().next().expect("one scenario");
            let exp = Experiment::build(&spec_for(cfg, scenario, delta))?;
            out.field("a_dagger", &exp.a_dagger)?;
            out.field("indenters", &exp.indenter_union())?;
            let cell = crate::scenarios::run_one(&exp, &icfg);
            out.text("results.csv", &results_csv(&[ResultRow::Inversion(cell.row.clone())])?)?;
            match cell.run {
                Some(run) => run,
                None => return Err(Error::NumericalFailure(cell.row.error.unwrap_or_default())),
            }
        }
    };
    out.text("trace.csv", &run.trace_csv())?;
    write_run(out, &run, "")?;
    eprintln!(
        "{}: stopped by {} at k = {}",
        run.method.label(),
        run.stop.label(),
        run.k_stop
    );
    Ok(match run.stop {
        StopReason::Discrepancy => EXIT_OK,
        StopReason::MaxIter => EXIT_BUDGET,
        StopReason::NonFinite | StopReason::ForwardFailure(_) => EXIT_ERROR,
    })
}

/// File-name prefix for one setup of a sweep, e.g. `r0.1_d0.001_`.
fn setup_prefix(spec: &ScenarioSpec) -> String {
    let s = match &spec.scenario {
        Scenario::Exp1 { radius } => format!("r{radius}_d{}", spec.delta),
        Scenario::Exp2 { region, .. } => format!("{}_d{}", region.label().to_lowercase(), spec.delta),
        _ => format!("d{}", spec.delta),
    };
    format!("{s}_")
}

fn cmd_experiment(cfg: &RunConfig, out: &Output) -> Result<i32> {
    if let ProblemConfig::Table1 { n_list, testcases } = &cfg.problem {
        let opts = Table1Options {
            reference: cfg.reference_scale(),
            solver: cfg.solver.clone(),
            compute_errors: true,
        };
        let rows: Vec<ResultRow> = testcases
            .iter()
            .flat_map(|&tc| run_table1(n_list, tc, &opts))
            .map(ResultRow::Forward)
            .collect();
        out.text("results.csv", &results_csv(&rows)?)?;
        let failed = rows.iter().any(|r| matches!(r, ResultRow::Forward(f) if f.error.is_some()));
        return Ok(if failed { EXIT_ERROR } else { EXIT_OK });
    }
    let Some(list) = scenario_of(&cfg.problem, true) else {
        return Err(invalid("experiment needs TABLE1, EXP1, EXP2, EXP3 or CUSTOM"));
    };
    let single = list.len() == 1;
    let icfg = inversion_config(cfg);
    let mut rows = Vec::new();
    let mut built: Option<Experiment> = None;
    for (scenario, delta) in list {
        let spec = spec_for(cfg, scenario, delta);
        // sweeps over the noise level reuse the reference solve
        let exp = match built.take() {
            Some(e) if e.spec.scenario == spec.scenario => e.renoised(delta, spec.seed)?,
            _ => Experiment::build(&spec)?,
        };
        let prefix = if single { String::new() } else { setup_prefix(&spec) };
        out.field(&format!("{prefix}a_dagger"), &exp.a_dagger)?;
        out.field(&format!("{prefix}indenters"), &exp.indenter_union())?;
        let cells: Vec<InversionCell> = run_inversion_experiment(&exp, &icfg);
        for cell in &cells {
            if let Some(run) = &cell.run {
                let method = cell.row.method.to_lowercase();
                out.text(&format!("{prefix}trace_{method}.csv"), &run.trace_csv())?;
                // snapshots of the accelerated run only
                if cell.row.method == "NESTEROV" {
                    write_run(out, run, &prefix)?;
                }
            }
            rows.push(ResultRow::Inversion(cell.row.clone()));
        }
        built = Some(exp);
    }
    out.text("results.csv", &results_csv(&rows)?)?;
    let failed = rows.iter().any(|r| matches!(r, ResultRow::Inversion(i) if i.error.is_some()));
    Ok(if failed { EXIT_ERROR } else { EXIT_OK })
}
