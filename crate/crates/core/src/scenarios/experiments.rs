use serde::{Deserialize, Serialize};

use super::problems::{
    CoefficientField, ContinuousSetup, Exp2Truth, Indenter, IndenterHeight, LoadField, EXP3_CENTERS,
};
use crate::error::{invalid, Result};
use crate::forward::{solve_npg, SolverConfig};
use crate::inverse::{add_noise, Measurement};
use crate::mesh::{restrict, Grid, NodalField, NodeMask};

/// Grid size of the paper-scale reference solutions.
pub const PAPER_REFERENCE_N: usize = 500;

/// Tolerance and budget of the fine-grid reference solves.
pub const REFERENCE_KKT_TOL: f64 = 1e-9;
pub const REFERENCE_MAX_ITER: usize = 20_000;

/// `4(n − 1) + 1`: the desk-scale reference grid.
pub fn default_reference_n(grid_n: usize) -> usize {
    4 * (grid_n - 1) + 1
}

/// Smallest nested grid with at least [`PAPER_REFERENCE_N`] nodes per axis.
pub fn paper_reference_n(grid_n: usize) -> usize {
    let m = (PAPER_REFERENCE_N - 1).div_ceil(grid_n - 1);
    m * (grid_n - 1) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObservationRegion {
    /// `x ≤ 0.5`
    Left,
    /// `x ≥ 0.5`
    Right,
    Full,
}

impl ObservationRegion {
    pub fn mask(self, grid: &Grid) -> NodeMask {
        const EPS: f64 = 1e-12;
        match self {
            Self::Left => grid.mask(|x, _| x <= 0.5 + EPS),
            Self::Right => grid.mask(|x, _| x >= 0.5 - EPS),
            Self::Full => NodeMask::full(grid),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Left => "LEFT",
            Self::Right => "RIGHT",
            Self::Full => "FULL",
        }
    }
}

/// A placed indenter with its height profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndenterSpec {
    pub indenter: Indenter,
    #[serde(default = "unit_height")]
    pub height: IndenterHeight,
}

fn unit_height() -> IndenterHeight {
    IndenterHeight::Constant { value: 1.0 }
}

impl IndenterSpec {
    pub fn unit(indenter: Indenter) -> Self {
        Self {
            indenter,
            height: unit_height(),
        }
    }
}

/// Which experiment to build, with its name-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Scenario {
    /// Single disk indenter of the given radius at the centre, `f = 0`.
    Exp1 { radius: f64 },
    /// Thin vertical rectangle, quadratic load, partial observations.
    Exp2 {
        region: ObservationRegion,
        #[serde(default = "default_exp2_truth")]
        truth: Exp2Truth,
    },
    /// Three disks applied one per measurement; `measurements` selects a subset.
    Exp3 {
        #[serde(default = "all_three")]
        measurements: Vec<usize>,
    },
    Custom {
        coefficient: CoefficientField,
        load: LoadField,
        indenters: Vec<IndenterSpec>,
        region: ObservationRegion,
    },
}

fn default_exp2_truth() -> Exp2Truth {
    Exp2Truth::Printed
}

fn all_three() -> Vec<usize> {
    vec![0, 1, 2]
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Exp1 { .. } => "EXP1",
            Self::Exp2 { .. } => "EXP2",
            Self::Exp3 { .. } => "EXP3",
            Self::Custom { .. } => "CUSTOM",
        }
    }

    /// Short description of the parameters, used as the setup column.
    pub fn setup_label(&self) -> String {
        match self {
            Self::Exp1 { radius } => format!("r={radius}"),
            Self::Exp2 { region, truth } => match truth {
                Exp2Truth::Printed => region.label().to_string(),
                Exp2Truth::OppositeSigns => format!("{}/opposite", region.label()),
            },
            Self::Exp3 { measurements } => {
                let ids: Vec<String> = measurements.iter().map(|i| (i + 1).to_string()).collect();
                format!("indenters={}", ids.join("+"))
            }
            Self::Custom { indenters, region, .. } => format!("{}x{}", indenters.len(), region.label()),
        }
    }

    pub fn coefficient(&self) -> CoefficientField {
        match self {
            Self::Exp1 { .. } => CoefficientField::GaussianSine,
            Self::Exp2 { truth, .. } => CoefficientField::Exp2 { variant: *truth },
            Self::Exp3 { .. } => CoefficientField::ThreeGaussians,
            Self::Custom { coefficient, .. } => *coefficient,
        }
    }

    fn load(&self) -> LoadField {
        match self {
            Self::Exp1 { .. } => LoadField::Zero,
            Self::Exp2 { .. } | Self::Exp3 { .. } => LoadField::Quadratic,
            Self::Custom { load, .. } => *load,
        }
    }

    fn region(&self) -> ObservationRegion {
        match self {
            Self::Exp2 { region, .. } | Self::Custom { region, .. } => *region,
            Self::Exp1 { .. } | Self::Exp3 { .. } => ObservationRegion::Full,
        }
    }

    fn indenters(&self) -> Result<Vec<IndenterSpec>> {
        Ok(match self {
            Self::Exp1 { radius } => {
                if !(*radius > 0.0) {
                    return Err(invalid(format!("indenter radius must be positive, got {radius}")));
                }
                vec![IndenterSpec::unit(Indenter::Disk {
                    cx: 0.5,
                    cy: 0.5,
                    r: *radius,
                })]
            }
            Self::Exp2 { .. } => vec![IndenterSpec::unit(Indenter::Rect {
                x0: 0.45,
                x1: 0.55,
                y0: 0.1,
                y1: 0.9,
            })],
            Self::Exp3 { measurements } => {
                if measurements.is_empty() {
                    return Err(invalid("experiment 3 needs at least one indenter"));
                }
                measurements
                    .iter()
                    .map(|&i| {
                        let &(cx, cy) = EXP3_CENTERS
                            .get(i)
                            .ok_or_else(|| invalid(format!("experiment 3 has indenters 0..3, got {i}")))?;
                        Ok(IndenterSpec::unit(Indenter::Disk { cx, cy, r: 0.25 }))
                    })
                    .collect::<Result<_>>()?
            }
            Self::Custom { indenters, .. } => {
                if indenters.is_empty() {
                    return Err(invalid("a custom scenario needs at least one indenter"));
                }
                indenters.clone()
            }
        })
    }
}

/// Grids, noise and seed for one experiment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub grid_n: usize,
    /// Fine grid for the synthetic data; `(reference_n − 1)` must be a multiple of `(grid_n − 1)`.
    pub reference_n: usize,
    pub delta: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, grid_n: usize, delta: f64, seed: u64) -> Self {
        Self {
            scenario,
            grid_n,
            reference_n: default_reference_n(grid_n.max(2)),
            delta,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid_n)?;
        check_nesting(self.grid_n, self.reference_n)?;
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("noise level must be non-negative, got {}", self.delta)));
        }
        Ok(())
    }
}

pub(crate) fn check_nesting(grid_n: usize, reference_n: usize) -> Result<()> {
    Grid::new(grid_n)?;
    if reference_n < grid_n || (reference_n - 1) % (grid_n - 1) != 0 {
        return Err(invalid(format!(
            "reference grid n = {reference_n} does not nest grid n = {grid_n}"
        )));
    }
    Ok(())
}

/// One forward setup per measurement of `scenario`.
pub fn setups_of(scenario: &Scenario) -> Result<Vec<ContinuousSetup>> {
    let coefficient = scenario.coefficient();
    let load = scenario.load();
    Ok(scenario
        .indenters()?
        .into_iter()
        .map(|s| ContinuousSetup {
            coefficient,
            load,
            indenter: s.indenter,
            height: s.height,
        })
        .collect())
}

/// Fine-grid solution of `setup`, computed at `reference_n` and sampled at the
/// nodes of the `grid_n` grid.
pub fn reference_solution(setup: &ContinuousSetup, grid_n: usize, reference_n: usize) -> Result<NodalField> {
    check_nesting(grid_n, reference_n)?;
    let coarse = Grid::new(grid_n)?;
    let fine = Grid::new(reference_n)?;
    let cfg = SolverConfig {
        kkt_tol: REFERENCE_KKT_TOL,
        max_iter: REFERENCE_MAX_ITER,
        ..SolverConfig::with_method(crate::forward::Method::Npg)
    };
    let sol = solve_npg(&setup.realize(&fine)?, &cfg)?;
    restrict(&sol.u, &fine, &coarse)
}

/// Noise-free observations of one measurement: reference solution restricted
/// to the calculation grid and to the observed nodes.
pub fn reference_data(spec: &ScenarioSpec, setup: &ContinuousSetup, region: ObservationRegion) -> Result<Vec<f64>> {
    let grid = Grid::new(spec.grid_n)?;
    let u = reference_solution(setup, spec.grid_n, spec.reference_n)?;
    let mask = region.mask(&grid);
    Ok(mask.indices().into_iter().map(|k| u[k]).collect())
}

/// A built inverse problem: truth, initial guess and noisy measurements.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: ScenarioSpec,
    pub grid: Grid,
    pub a_dagger: NodalField,
    /// `1` in the interior, the truth's values on the boundary.
    pub a0: NodalField,
    pub setups: Vec<ContinuousSetup>,
    pub region: ObservationRegion,
    /// Noise-free data per measurement.
    pub clean: Vec<Vec<f64>>,
    pub measurements: Vec<Measurement>,
}

impl Experiment {
    pub fn build(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let grid = Grid::new(spec.grid_n)?;
        let coefficient = spec.scenario.coefficient();
        let region = spec.scenario.region();
        let setups = setups_of(&spec.scenario)?;
        let clean = setups
            .iter()
            .map(|s| reference_data(spec, s, region))
            .collect::<Result<Vec<_>>>()?;
        let a_dagger = grid.sample(|x, y| coefficient.eval(x, y));
        let mut a0 = NodalField::constant(&grid, 1.0);
        for k in grid.boundary_nodes() {
            a0[k] = a_dagger[k];
        }
        let mut exp = Self {
            spec: spec.clone(),
            grid,
            a_dagger,
            a0,
            setups,
            region,
            clean,
            measurements: Vec::new(),
        };
        exp.measurements = exp.noisy_measurements(spec.delta, spec.seed)?;
        Ok(exp)
    }

    /// Measurement `i` gets noise seed `seed + i`.
    fn noisy_measurements(&self, delta: f64, seed: u64) -> Result<Vec<Measurement>> {
        let mask = self.region.mask(&self.grid);
        self.setups
            .iter()
            .zip(&self.clean)
            .enumerate()
            .map(|(i, (setup, y))| {
                let (data, noise) = add_noise(y, delta, seed.wrapping_add(i as u64))?;
                Measurement::new(
                    &self.grid,
                    self.grid.sample(|x, y| setup.load.eval(x, y)),
                    setup.obstacle(&self.grid),
                    mask.clone(),
                    data,
                    Some(noise),
                )
            })
            .collect()
    }

    /// Same clean data under a different noise level or seed.
    pub fn renoised(&self, delta: f64, seed: u64) -> Result<Self> {
        let mut out = self.clone();
        out.spec.delta = delta;
        out.spec.seed = seed;
        out.measurements = out.noisy_measurements(delta, seed)?;
        Ok(out)
    }

    pub fn label(&self) -> &'static str {
        self.spec.scenario.label()
    }

    /// Setup column of the result tables.
    pub fn setup_label(&self) -> String {
        format!("{},delta={}", self.spec.scenario.setup_label(), self.spec.delta)
    }

    /// Union of the indenter footprints as a 0/1 field.
    pub fn indenter_union(&self) -> NodalField {
        self.grid.sample(|x, y| {
            let hit = self.setups.iter().any(|s| s.indenter.contains(x, y));
            if hit {
                1.0
            } else {
                0.0
            }
        })
    }
}

pub fn make_experiment1(n: usize, radius: f64, delta_rel: f64, seed: u64) -> Result<Experiment> {
    Experiment::build(&ScenarioSpec::new(Scenario::Exp1 { radius }, n, delta_rel, seed))
}

pub fn make_experiment2(n: usize, region: ObservationRegion, delta_rel: f64, seed: u64) -> Result<Experiment> {
    let scenario = Scenario::Exp2 {
        region,
        truth: Exp2Truth::Printed,
    };
    Experiment::build(&ScenarioSpec::new(scenario, n, delta_rel, seed))
}

pub fn make_experiment3(n: usize, delta_rel: f64, seed: u64) -> Result<Experiment> {
    let scenario = Scenario::Exp3 {
        measurements: all_three(),
    };
    Experiment::build(&ScenarioSpec::new(scenario, n, delta_rel, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sizes() {
        assert_eq!(default_reference_n(30), 117);
        assert_eq!(paper_reference_n(20), 514);
        assert_eq!(paper_reference_n(50), 540);
        assert_eq!(paper_reference_n(2), 500);
        assert!(check_nesting(30, 117).is_ok());
        assert!(check_nesting(30, 118).is_err());
        assert!(check_nesting(30, 20).is_err());
    }

    #[test]
    fn regions() {
        let g = Grid::new(5).unwrap();
        let left = ObservationRegion::Left.mask(&g);
        assert!(!left.get(g.index(3, 2)));
        assert!(left.get(g.index(2, 2)));
        assert!(ObservationRegion::Right.mask(&g).get(g.index(2, 2)));
        assert_eq!(ObservationRegion::Full.mask(&g).count(), 25);
    }

    #[test]
    fn degenerate_nesting_matches_coarse_solve() {
        let spec = ScenarioSpec {
            reference_n: 9,
            ..ScenarioSpec::new(Scenario::Exp1 { radius: 0.25 }, 9, 0.0, 0)
        };
        let setup = ContinuousSetup {
            coefficient: CoefficientField::GaussianSine,
            load: LoadField::Zero,
            indenter: Indenter::Disk {
                cx: 0.5,
                cy: 0.5,
                r: 0.25,
            },
            height: IndenterHeight::Constant { value: 1.0 },
        };
        let data = reference_data(&spec, &setup, ObservationRegion::Full).unwrap();
        let cfg = SolverConfig {
            kkt_tol: REFERENCE_KKT_TOL,
            max_iter: REFERENCE_MAX_ITER,
            ..SolverConfig::with_method(crate::forward::Method::Npg)
        };
        let direct = solve_npg(&setup.realize(&Grid::new(9).unwrap()).unwrap(), &cfg).unwrap();
        assert_eq!(data, direct.u.values());
    }

    #[test]
    fn experiment_shapes() {
        let e = Experiment::build(&ScenarioSpec {
            reference_n: 9,
            ..ScenarioSpec::new(Scenario::Exp3 { measurements: all_three() }, 9, 0.001, 3)
        })
        .unwrap();
        assert_eq!(e.measurements.len(), 3);
        for k in e.grid.boundary_nodes() {
            assert_eq!(e.a0[k], e.a_dagger[k]);
        }
        let interior = e.grid.index(4, 4);
        assert_eq!(e.a0[interior], 1.0);
        for (m, y) in e.measurements.iter().zip(&e.clean) {
            let d: f64 = m.data().iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let yn: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((d / yn - 0.001).abs() < 1e-12);
        }
        // distinct seeds per measurement
        assert_ne!(e.measurements[0].data()[40] - e.clean[0][40], e.measurements[1].data()[40] - e.clean[1][40]);
        let again = e.renoised(0.001, 3).unwrap();
        assert_eq!(again.measurements[2].data(), e.measurements[2].data());
        assert!(Experiment::build(&ScenarioSpec::new(Scenario::Exp3 { measurements: vec![3] }, 9, 0.0, 0)).is_err());
    }
}
