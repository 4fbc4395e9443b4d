use std::fmt::Write as _;

use super::ScenarioOutcome;
use crate::analysis::{DriftClass, DriverRegime};
use crate::integrators::StepperKind;
use crate::model::SystemId;

/// The reference classification, rows in [`StepperKind::BENCHMARK`] order,
/// columns (ε = 0, oscillating), (ε = 0, rotating), (ε ≠ 0, oscillating),
/// (ε ≠ 0, rotating); symbols are driver energy, passenger energy, latitude.
pub const REFERENCE_TABLE: [[&str; 4]; 5] = [
    ["●●●", "●●●", "●●●", "○○○"],
    ["○●○", "○●○", "○●○", "○○○"],
    ["●●●", "●●●", "●●●", "○○○"],
    ["●●●", "●●●", "●●●", "●●●"],
    ["○○○", "○○○", "○○○", "○○○"],
];

const COLUMNS: [(bool, DriverRegime); 4] = [
    (false, DriverRegime::Oscillating),
    (false, DriverRegime::Rotating),
    (true, DriverRegime::Oscillating),
    (true, DriverRegime::Rotating),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Pending,
    /// The run stopped with an error.
    Failed(String),
    Done {
        driver: DriftClass,
        passenger: DriftClass,
        latitude: Option<DriftClass>,
    },
}

impl Cell {
    pub fn symbols(&self) -> String {
        match self {
            Cell::Pending => "???".into(),
            Cell::Failed(_) => "×××".into(),
            Cell::Done { driver, passenger, latitude } => {
                let mut s = String::new();
                s.push(driver.symbol());
                s.push(passenger.symbol());
                s.push(latitude.map_or('–', DriftClass::symbol));
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub methods: Vec<StepperKind>,
    /// `cells[method][column]`.
    pub cells: Vec<[Cell; 4]>,
}

impl SummaryTable {
    /// `(method, column, produced, reference)` for every differing cell.
    pub fn mismatches(&self) -> Vec<(StepperKind, usize, String, &'static str)> {
        let mut out = Vec::new();
        for (i, m) in self.methods.iter().enumerate() {
            let Some(row) = StepperKind::BENCHMARK.iter().position(|b| b == m) else { continue };
            for (c, (cell, &want)) in self.cells[i].iter().zip(&REFERENCE_TABLE[row]).enumerate() {
                let got = cell.symbols();
                if got != want {
                    out.push((*m, c, got, want));
                }
            }
        }
        out
    }

    pub fn matches_reference(&self) -> bool {
        self.methods == StepperKind::BENCHMARK && self.mismatches().is_empty()
    }

    /// Number of agreeing symbols out of 60.
    pub fn matching_symbols(&self) -> usize {
        let mut n = 0;
        for (i, m) in self.methods.iter().enumerate() {
            let Some(row) = StepperKind::BENCHMARK.iter().position(|b| b == m) else { continue };
            for (cell, want) in self.cells[i].iter().zip(&REFERENCE_TABLE[row]) {
                n += cell.symbols().chars().zip(want.chars()).filter(|(a, b)| a == b).count();
            }
        }
        n
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:^13} {:^13} {:^13} {:^13}", "", "ε=0", "ε=0", "ε≠0", "ε≠0");
        let _ = writeln!(
            out,
            "{:<8} {:^13} {:^13} {:^13} {:^13}",
            "", "oscillating", "rotating", "oscillating", "rotating"
        );
        for (m, row) in self.methods.iter().zip(&self.cells) {
            let _ = write!(out, "{:<8}", m.name());
            for cell in row {
                let _ = write!(out, " {:^13}", cell.symbols());
            }
            out.push('\n');
        }
        out
    }
}

/// Collect the CVT outcomes into the 5×4 table; cells without a run stay
/// pending.
pub fn summary_table(outcomes: &[&ScenarioOutcome]) -> SummaryTable {
    let methods = StepperKind::BENCHMARK.to_vec();
    let mut cells: Vec<[Cell; 4]> = methods.iter().map(|_| std::array::from_fn(|_| Cell::Pending)).collect();
    for o in outcomes {
        let sc = &o.scenario;
        if sc.system != SystemId::CvtPendulum {
            continue;
        }
        let Some(regime) = sc.regime else { continue };
        let Some(col) = COLUMNS.iter().position(|&(pert, r)| pert == (sc.epsilon != 0.0) && r == regime) else {
            continue;
        };
        let Some(row) = methods.iter().position(|m| *m == sc.method) else { continue };
        cells[row][col] = match (&o.failure, o.classification("h"), o.classification("E")) {
            (Some(e), _, _) => Cell::Failed(e.to_string()),
            (None, Some(driver), Some(passenger)) => {
                Cell::Done { driver, passenger, latitude: o.classification("latitude") }
            }
            _ => Cell::Pending,
        };
    }
    SummaryTable { methods, cells }
}
