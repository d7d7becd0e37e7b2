use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forward::ObstacleProblem;
use crate::mesh::{Grid, NodalField};

/// Obstacle value away from the indenter: slightly below the zero boundary data
/// so the constraint never binds there.
pub const OFF_INDENTER: f64 = -1e-3;

// node coordinates like 7/20 are not exactly 0.35
const GEOM_EPS: f64 = 1e-12;

/// Indenter footprints used by the test problems and experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Indenter {
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl Indenter {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Indenter::Rect { x0, x1, y0, y1 } => {
                x >= x0 - GEOM_EPS && x <= x1 + GEOM_EPS && y >= y0 - GEOM_EPS && y <= y1 + GEOM_EPS
            }
            Indenter::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r + GEOM_EPS,
        }
    }

    /// Nodal obstacle: `height(x, y)` on interior nodes inside the footprint,
    /// [`OFF_INDENTER`] elsewhere (including the whole boundary).
    pub fn obstacle(&self, grid: &Grid, height: impl Fn(f64, f64) -> f64) -> NodalField {
        let mut h = grid.sample(|x, y| if self.contains(x, y) { height(x, y) } else { OFF_INDENTER });
        for k in grid.boundary_nodes() {
            h[k] = h[k].min(OFF_INDENTER);
        }
        h
    }

    pub fn indicator(&self, grid: &Grid) -> NodalField {
        self.obstacle(grid, |_, _| 1.0)
    }
}

/// `1 + ½ exp(−20((x−0.4)² + (y−0.5)²)) sin(2πx)`
pub fn gaussian_sine(x: f64, y: f64) -> f64 {
    1.0 + 0.5 * (-20.0 * ((x - 0.4).powi(2) + (y - 0.5).powi(2))).exp() * (2.0 * PI * x).sin()
}

/// `6(x(1−x) + y(1−y))`
pub fn quadratic_load(x: f64, y: f64) -> f64 {
    6.0 * (x * (1.0 - x) + y * (1.0 - y))
}

pub fn testcase1_indenter() -> Indenter {
    Indenter::Rect {
        x0: 0.35,
        x1: 0.65,
        y0: 0.35,
        y1: 0.65,
    }
}

pub fn testcase2_indenter() -> Indenter {
    Indenter::Disk {
        cx: 0.5,
        cy: 0.5,
        r: 0.25,
    }
}

/// Laplace equation (`a = 1`, `f = 0`) lifted by a unit-height square indenter on `[0.35, 0.65]²`.
pub fn make_testcase1(n: usize) -> Result<ObstacleProblem> {
    ContinuousSetup::testcase1().realize(&Grid::new(n)?)
}

pub fn testcase2_obstacle(grid: &Grid) -> NodalField {
    ContinuousSetup::testcase2().obstacle(grid)
}

/// Disk indenter of radius 0.25 cut off by the plane `g = x`, with
/// `f = −10 sin(πx) sin(2πy)` and a Gaussian-modulated coefficient.
pub fn make_testcase2(n: usize) -> Result<ObstacleProblem> {
    ContinuousSetup::testcase2().realize(&Grid::new(n)?)
}

fn bump(x: f64, y: f64, cx: f64, cy: f64, width: f64) -> f64 {
    (-width * ((x - cx).powi(2) + (y - cy).powi(2))).exp()
}

/// Ground truth of the single-indenter identification experiment (same as TestCase 2's coefficient).
pub fn experiment1_truth(x: f64, y: f64) -> f64 {
    gaussian_sine(x, y)
}

/// Ground truth of the partial-observation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Exp2Truth {
    /// Two equal Gaussian halves at `(0.25, 0.5)`, i.e. `1 + exp(−20 r²)`.
    Printed,
    /// `+½` at `(0.25, 0.5)` and `−½` at `(0.75, 0.5)`.
    OppositeSigns,
}

impl Exp2Truth {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Self::Printed => 1.0 + 0.5 * bump(x, y, 0.25, 0.5, 20.0) + 0.5 * bump(x, y, 0.25, 0.5, 20.0),
            Self::OppositeSigns => 1.0 + 0.5 * bump(x, y, 0.25, 0.5, 20.0) - 0.5 * bump(x, y, 0.75, 0.5, 20.0),
        }
    }
}

pub const EXP3_CENTERS: [(f64, f64); 3] = [(0.25, 0.5), (0.75, 0.2), (0.75, 0.8)];

/// Three Gaussians of height ½ and exponent −50 at [`EXP3_CENTERS`].
pub fn experiment3_truth(x: f64, y: f64) -> f64 {
    1.0 + EXP3_CENTERS.iter().map(|&(cx, cy)| 0.5 * bump(x, y, cx, cy, 50.0)).sum::<f64>()
}

/// Resolution-independent coefficient description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum CoefficientField {
    Constant { value: f64 },
    GaussianSine,
    Exp2 { variant: Exp2Truth },
    ThreeGaussians,
}

impl CoefficientField {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::GaussianSine => gaussian_sine(x, y),
            Self::Exp2 { variant } => variant.eval(x, y),
            Self::ThreeGaussians => experiment3_truth(x, y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum LoadField {
    Zero,
    Constant { value: f64 },
    Quadratic,
    /// `−10 sin(πx) sin(2πy)`
    SineProduct,
}

impl LoadField {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value,
            Self::Quadratic => quadratic_load(x, y),
            Self::SineProduct => -10.0 * (PI * x).sin() * (2.0 * PI * y).sin(),
        }
    }
}

/// Obstacle height over an indenter footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum IndenterHeight {
    Constant { value: f64 },
    /// `min(value, x)`
    CappedX { value: f64 },
}

impl IndenterHeight {
    pub fn eval(&self, x: f64, _y: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::CappedX { value } => x.min(value),
        }
    }
}

/// A contact problem described independently of the grid, so it can be
/// realized at the computation and at the reference resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousSetup {
    pub coefficient: CoefficientField,
    pub load: LoadField,
    pub indenter: Indenter,
    pub height: IndenterHeight,
}

impl ContinuousSetup {
    pub fn testcase1() -> Self {
        Self {
            coefficient: CoefficientField::Constant { value: 1.0 },
            load: LoadField::Zero,
            indenter: testcase1_indenter(),
            height: IndenterHeight::Constant { value: 1.0 },
        }
    }

    pub fn testcase2() -> Self {
        Self {
            coefficient: CoefficientField::GaussianSine,
            load: LoadField::SineProduct,
            indenter: testcase2_indenter(),
            height: IndenterHeight::CappedX { value: 1.0 },
        }
    }

    pub fn obstacle(&self, grid: &Grid) -> NodalField {
        let height = self.height;
        self.indenter.obstacle(grid, move |x, y| height.eval(x, y))
    }

    pub fn realize(&self, grid: &Grid) -> Result<ObstacleProblem> {
        ObstacleProblem::new(
            grid,
            grid.sample(|x, y| self.coefficient.eval(x, y)),
            grid.sample(|x, y| self.load.eval(x, y)),
            self.obstacle(grid),
        )
    }
}
