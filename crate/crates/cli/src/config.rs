use serde::{Deserialize, Serialize};

use porohom::cell_problems::TableOptions;
use porohom::convergence::{InitialData, SweepProblem, TensorSuiteSpec};
use porohom::diagnostics::PositivityPolicy;
use porohom::fem::{CoefficientDescriptor, Mat2};
use porohom::geometry::{InclusionSpec, RectDomain};
use porohom::kinetics::ValidationGrid;
use porohom::micro_solver::Scaling;
use porohom::{Error, Result};

/// One JSON document drives every subcommand; each reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: Option<Geometry>,
    #[serde(default)]
    pub coefficients: Coefficients,
    #[serde(default = "zero_kinetics")]
    pub kinetics: String,
    #[serde(default)]
    pub validation: ValidationGrid,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub table: TableSection,
    #[serde(default = "zero_initial")]
    pub initial: [InitialData; 3],
    #[serde(default)]
    pub sweep: Option<SweepProblem>,
    #[serde(default)]
    pub suite: Option<TensorSuiteSpec>,
    #[serde(default)]
    pub output: OutputSection,
    /// Recorded for provenance; no stage of the pipeline is random.
    #[serde(default)]
    pub seed: u64,
}

fn zero_kinetics() -> String {
    "zero".into()
}

fn zero_initial() -> [InitialData; 3] {
    [InitialData::Zero; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub inclusion: InclusionSpec,
    /// Cell mesh size in unit-cell coordinates.
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "RectDomain::unit_square")]
    pub domain: RectDomain,
    #[serde(default = "default_h_macro")]
    pub h_macro: f64,
    /// Period of the perforated domain; needed by `micro` and optional for `mesh`.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_h() -> f64 {
    0.05
}

fn default_h_macro() -> f64 {
    1.0 / 32.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    /// Coefficient of the single-field cell problem (`cell-tensor`).
    #[serde(default)]
    pub d: Option<CoefficientDescriptor>,
    #[serde(default)]
    pub d1: Option<CoefficientDescriptor>,
    #[serde(default)]
    pub d2: Option<CoefficientDescriptor>,
    #[serde(default)]
    pub d3: Option<CoefficientDescriptor>,
}

/// How the `macro` command obtains its coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MacroModel {
    /// Dispersion table and effective diffusion from cell problems.
    #[default]
    Table,
    /// Prescribed constant tensors; no cell problems are solved.
    Forced { dispersion: Mat2, d0: Mat2 },
    /// Three fields with independent effective tensors and interface exchange.
    ThreeField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub positivity: PositivityPolicy,
    #[serde(default = "default_pos_tol")]
    pub pos_tol: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub model: MacroModel,
}

fn one() -> f64 {
    1.0
}

fn default_pos_tol() -> f64 {
    1e-10
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub s_max: f64,
    pub points: usize,
    pub tol: f64,
    pub max_rounds: usize,
}

impl Default for TableSection {
    fn default() -> Self {
        let o = TableOptions::default();
        TableSection { s_max: 2.0, points: 9, tol: o.tol, max_rounds: o.max_rounds }
    }
}

impl TableSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.s_max > 0.0) {
            return Err(Error::InvalidConfig("table needs s_max > 0 and at least 2 points".into()));
        }
        Ok((0..self.points).map(|i| self.s_max * i as f64 / (self.points - 1) as f64).collect())
    }

    pub fn options(&self) -> TableOptions {
        TableOptions { tol: self.tol, max_rounds: self.max_rounds }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also write the final nodal fields.
    #[serde(default)]
    pub fields: bool,
}

impl RunConfig {
    /// Parses a config file, or the `config` of a manifest written by an earlier run.
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let value = match value {
            serde_json::Value::Object(mut m) if m.contains_key("command") && m.contains_key("config") => {
                m.remove("config").expect("checked")
            }
            v => v,
        };
        serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn geometry(&self) -> Result<&Geometry> {
        self.geometry.as_ref().ok_or_else(|| missing("geometry"))
    }

    pub fn solver(&self) -> Result<&SolverSection> {
        self.solver.as_ref().ok_or_else(|| missing("solver"))
    }
}

pub fn missing(what: &str) -> Error {
    Error::InvalidConfig(format!("config section `{what}` is required by this command"))
}

pub fn coefficient<'a>(c: &'a Option<CoefficientDescriptor>, name: &str) -> Result<&'a CoefficientDescriptor> {
    c.as_ref().ok_or_else(|| missing(&format!("coefficients.{name}")))
}
