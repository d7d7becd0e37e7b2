use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiments::{check_nesting, default_reference_n, paper_reference_n, reference_solution, Experiment};
use super::problems::ContinuousSetup;
use crate::error::{invalid, Result};
use crate::forward::{solve, Method, SolverConfig};
use crate::inverse::{reconstruct, InversionConfig, InversionMethod, InversionRun};
use crate::mesh::{Grid, NodalField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestCase {
    Testcase1,
    Testcase2,
}

impl TestCase {
    pub fn setup(self) -> ContinuousSetup {
        match self {
            Self::Testcase1 => ContinuousSetup::testcase1(),
            Self::Testcase2 => ContinuousSetup::testcase2(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Testcase1 => "TESTCASE1",
            Self::Testcase2 => "TESTCASE2",
        }
    }
}

/// How the reference grid is chosen for a calculation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReferenceScale {
    /// `4(n − 1) + 1`
    Desk,
    /// Smallest nested grid with at least 500 nodes per axis.
    Paper,
}

impl ReferenceScale {
    pub fn reference_n(self, grid_n: usize) -> usize {
        match self {
            Self::Desk => default_reference_n(grid_n),
            Self::Paper => paper_reference_n(grid_n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Options {
    pub reference: ReferenceScale,
    /// Shared by all three methods; the method field is overwritten.
    pub solver: SolverConfig,
    /// Skip the reference solves and leave the error columns empty.
    pub compute_errors: bool,
}

impl Default for Table1Options {
    fn default() -> Self {
        Self {
            reference: ReferenceScale::Desk,
            solver: SolverConfig::default(),
            compute_errors: true,
        }
    }
}

/// One cell of the forward-solver comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRow {
    pub testcase: String,
    pub n: usize,
    pub method: String,
    pub log10_err_inf: Option<f64>,
    pub log10_err_l2: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
    pub cpu_seconds: f64,
}

/// One method's outcome on one inverse problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionRow {
    pub experiment: String,
    pub setup: String,
    pub method: String,
    pub relative_error_opt: Option<f64>,
    pub relative_error_disc: Option<f64>,
    pub discrepancy_at_opt: Option<f64>,
    pub k_opt: Option<usize>,
    pub k_disc: Option<usize>,
    pub iterations: usize,
    pub stop: String,
    pub error: Option<String>,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultRow {
    Forward(ForwardRow),
    Inversion(InversionRow),
}

pub const FORWARD_HEADER: &str = "testcase,n,method,log10_err_inf,log10_err_l2,iterations,converged,error,cpu_seconds";
pub const INVERSION_HEADER: &str = "experiment,setup,method,relative_error_opt,relative_error_disc,discrepancy_at_opt,k_opt,k_disc,iterations,stop,error,cpu_seconds";

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

// labels and messages may contain commas
fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultRow {
    fn csv_line(&self) -> String {
        match self {
            Self::Forward(r) => format!(
                "{},{},{},{},{},{},{},{},{:.6}",
                quote(&r.testcase),
                r.n,
                r.method,
                cell(r.log10_err_inf),
                cell(r.log10_err_l2),
                r.iterations,
                r.converged,
                quote(r.error.as_deref().unwrap_or("")),
                r.cpu_seconds
            ),
            Self::Inversion(r) => format!(
                "{},{},{},{},{},{},{},{},{},{},{},{:.6}",
                quote(&r.experiment),
                quote(&r.setup),
                r.method,
                cell(r.relative_error_opt),
                cell(r.relative_error_disc),
                cell(r.discrepancy_at_opt),
                cell(r.k_opt),
                cell(r.k_disc),
                r.iterations,
                r.stop,
                quote(r.error.as_deref().unwrap_or("")),
                r.cpu_seconds
            ),
        }
    }
}

/// Results table; all rows must be of one kind. Wall time is the last column.
pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    let header = match rows.first() {
        None | Some(ResultRow::Forward(_)) => FORWARD_HEADER,
        Some(ResultRow::Inversion(_)) => INVERSION_HEADER,
    };
    let mut out = format!("{header}\n");
    for r in rows {
        if std::mem::discriminant(r) != std::mem::discriminant(&rows[0]) {
            return Err(invalid("a results table cannot mix forward and inversion rows"));
        }
        writeln!(out, "{}", r.csv_line()).expect("writing to a String");
    }
    Ok(out)
}

const TABLE1_METHODS: [Method; 3] = [Method::Barrier, Method::Npg, Method::Pg];

/// For each `n`: solve with BM, NPG and PG and compare with the restricted
/// reference solution. Solver failures are recorded in the row.
pub fn run_table1(n_list: &[usize], testcase: TestCase, opts: &Table1Options) -> Vec<ForwardRow> {
    let setup = testcase.setup();
    let mut rows = Vec::with_capacity(3 * n_list.len());
    for &n in n_list {
        let reference = if opts.compute_errors {
            let rn = if n >= 2 { opts.reference.reference_n(n) } else { n };
            Some(check_nesting(n, rn).and_then(|_| reference_solution(&setup, n, rn)))
        } else {
            None
        };
        let problem = Grid::new(n).and_then(|g| setup.realize(&g));
        for method in TABLE1_METHODS {
            let mut row = ForwardRow {
                testcase: testcase.label().into(),
                n,
                method: method.label().into(),
                log10_err_inf: None,
                log10_err_l2: None,
                iterations: 0,
                converged: false,
                error: None,
                cpu_seconds: 0.0,
            };
            let cfg = SolverConfig {
                method,
                ..opts.solver.clone()
            };
            let outcome = problem.as_ref().map_err(|e| e.to_string()).and_then(|p| {
                solve(p, &cfg).map_err(|e| e.to_string())
            });
            match outcome {
                Ok(sol) => {
                    row.iterations = sol.iterations;
                    row.converged = sol.converged;
                    row.cpu_seconds = sol.wall_time;
                    match &reference {
                        Some(Ok(u_ref)) => {
                            let (inf, l2) = errors(&sol.u, u_ref);
                            row.log10_err_inf = Some(inf.log10());
                            row.log10_err_l2 = Some(l2.log10());
                        }
                        Some(Err(e)) => row.error = Some(format!("reference: {e}")),
                        None => {}
                    }
                }
                Err(e) => row.error = Some(e),
            }
            rows.push(row);
        }
    }
    rows
}

/// `(‖u − v‖_∞, ‖u − v‖_ℓ₂)` over all nodes.
pub fn errors(u: &NodalField, v: &NodalField) -> (f64, f64) {
    let mut inf: f64 = 0.0;
    let mut sq = 0.0;
    for (a, b) in u.values().iter().zip(v.values()) {
        let d = (a - b).abs();
        inf = inf.max(d);
        sq += d * d;
    }
    (inf, sq.sqrt())
}

/// A row together with the run it summarizes (absent if the run failed).
#[derive(Debug, Clone)]
pub struct InversionCell {
    pub row: InversionRow,
    pub run: Option<InversionRun>,
}

/// Nesterov and Landweber on the same data, each run for the full budget so
/// that the optimal index is found even past the discrepancy index.
pub fn run_inversion_experiment(exp: &Experiment, cfg: &InversionConfig) -> Vec<InversionCell> {
    [InversionMethod::Nesterov, InversionMethod::Landweber]
        .into_iter()
        .map(|method| {
            let cfg = InversionConfig {
                method,
                stop_at_discrepancy: false,
                ..cfg.clone()
            };
            run_one(exp, &cfg)
        })
        .collect()
}

/// Single run with `cfg` as given.
pub fn run_one(exp: &Experiment, cfg: &InversionConfig) -> InversionCell {
    let mut row = InversionRow {
        experiment: exp.label().into(),
        setup: exp.setup_label(),
        method: cfg.method.label().into(),
        relative_error_opt: None,
        relative_error_disc: None,
        discrepancy_at_opt: None,
        k_opt: None,
        k_disc: None,
        iterations: 0,
        stop: String::new(),
        error: None,
        cpu_seconds: 0.0,
    };
    match reconstruct(&exp.a0, &exp.measurements, cfg, Some(&exp.a_dagger)) {
        Ok(run) => {
            row.iterations = run.k_stop;
            row.stop = run.stop.label().into();
            row.cpu_seconds = run.wall_time;
            row.k_opt = run.k_opt;
            row.k_disc = run.k_disc;
            if let Some(r) = run.k_opt.and_then(|k| run.row(k)) {
                row.relative_error_opt = r.relative_error;
                row.discrepancy_at_opt = r.discrepancy_factor;
            }
            row.relative_error_disc = run.k_disc.and_then(|k| run.row(k)).and_then(|r| r.relative_error);
            InversionCell { row, run: Some(run) }
        }
        Err(e) => {
            row.stop = "error".into();
            row.error = Some(e.to_string());
            InversionCell { row, run: None }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_shape_without_reference() {
        let opts = Table1Options {
            compute_errors: false,
            ..Table1Options::default()
        };
        let rows = run_table1(&[6, 8], TestCase::Testcase1, &opts);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].method, "NPG");
        assert!(rows.iter().all(|r| r.log10_err_inf.is_none() && r.error.is_none()));
    }

    #[test]
    fn table1_records_bad_grid() {
        let rows = run_table1(&[1], TestCase::Testcase2, &Table1Options::default());
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn csv_layout() {
        let row = ForwardRow {
            testcase: "TESTCASE1".into(),
            n: 20,
            method: "BM".into(),
            log10_err_inf: Some(-2.5),
            log10_err_l2: None,
            iterations: 313,
            converged: true,
            error: Some("a, b".into()),
            cpu_seconds: 0.25,
        };
        let csv = results_csv(&[ResultRow::Forward(row)]).unwrap();
        assert_eq!(
            csv,
            format!("{FORWARD_HEADER}\nTESTCASE1,20,BM,-2.5,,313,true,\"a, b\",0.250000\n")
        );
        assert_eq!(results_csv(&[]).unwrap(), format!("{FORWARD_HEADER}\n"));
    }
}
