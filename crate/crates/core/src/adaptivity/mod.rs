//! Marking strategies and the adaptive Solve-Estimate-Mark-Refine loops.

mod approximation;
mod marking;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::benchmarks::{exact_errors, Problem, ProblemError};
use crate::estimators::{self, EstimatorReport};
use crate::fem::{assemble, ls_functional, solve_with, DofMap, FemError, Solution, SolverKind};
use crate::mesh::{MeshError, RefineMode, Triangulation};
use crate::runner::RunRecord;

pub use approximation::{approximation_algorithm, AaStats, AaThreshold};
pub use marking::{dorfler_mark, separate_mark, Case, Marking, MarkingDecision};

#[derive(Debug, Error)]
pub enum AdaptivityError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("data approximation needs {leaves} elements, more than the budget of {limit}")]
    Budget { leaves: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<AdaptivityError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Dörfler marking on the built-in estimator `eta_NAT`.
    Nalsfem,
    /// Dörfler marking on `eta_COL`.
    Calsfem,
    /// Separate marking: Dörfler on `eta_SEP` or data approximation.
    Salsfem,
    /// Every leaf refined with bisec3 on every level.
    Uniform,
}

impl Algorithm {
    pub fn default_refine_mode(self) -> RefineMode {
        match self {
            Algorithm::Nalsfem | Algorithm::Uniform => RefineMode::Bisec3,
            Algorithm::Calsfem | Algorithm::Salsfem => RefineMode::RefinementEdge,
        }
    }
}

/// Parameters of one adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParams {
    pub algorithm: Algorithm,
    /// Bulk parameter in `(0, 1]`; `1` means uniform refinement.
    pub theta: f64,
    /// Separation parameter `> 0`.
    pub kappa: f64,
    /// Data reduction factor in `(0, 1)`.
    pub rho: f64,
    /// Marking factor of the approximation algorithm.
    pub varrho: f64,
    pub max_ndof: usize,
    pub time_budget: Duration,
    /// Overrides [`Algorithm::default_refine_mode`].
    pub refine_mode: Option<RefineMode>,
    pub aa_threshold: AaThreshold,
    pub solver: SolverKind,
}

impl AdaptiveParams {
    pub fn new(algorithm: Algorithm) -> Self {
        AdaptiveParams {
            algorithm,
            theta: 0.3,
            kappa: 1.0,
            rho: 0.8,
            varrho: 1.0 - 1e-6,
            max_ndof: 1_000_000,
            time_budget: Duration::from_secs(1800),
            refine_mode: None,
            aa_threshold: AaThreshold::MuMax,
            solver: SolverKind::Cholesky,
        }
    }

    pub fn validate(&self) -> Result<(), AdaptivityError> {
        let bad = |m: &str| Err(AdaptivityError::Parameter(m.to_string()));
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta must lie in (0, 1]");
        }
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.varrho > 0.0 && self.varrho <= 1.0) {
            return bad("varrho must lie in (0, 1]");
        }
        Ok(())
    }

    /// Uniform refinement is used for the uniform algorithm and for `theta = 1`.
    pub fn is_uniform(&self) -> bool {
        self.algorithm == Algorithm::Uniform || self.theta >= 1.0
    }

    fn refine_mode(&self) -> RefineMode {
        if self.is_uniform() {
            RefineMode::Bisec3
        } else {
            self.refine_mode.unwrap_or(self.algorithm.default_refine_mode())
        }
    }
}

/// Label of the refinement step taken on a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelCase {
    A,
    B,
    Uniform,
}

impl LevelCase {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelCase::A => "A",
            LevelCase::B => "B",
            LevelCase::Uniform => "uniform",
        }
    }
}

/// Everything computed on one level, handed to the observer before refinement.
pub struct LevelState<'a> {
    pub mesh: &'a Triangulation,
    pub dofs: &'a DofMap,
    pub solution: &'a Solution,
    pub record: &'a RunRecord,
    pub n_marked: usize,
}

/// Runs the adaptive loop and returns one record per level.
pub fn adaptive_loop(problem: &Problem, params: &AdaptiveParams) -> Result<Vec<RunRecord>, AdaptivityError> {
    adaptive_loop_with(problem, params, |_| Ok(()))
}

/// As [`adaptive_loop`], calling `observe` after every level.
pub fn adaptive_loop_with(
    problem: &Problem,
    params: &AdaptiveParams,
    mut observe: impl FnMut(&LevelState) -> std::io::Result<()>,
) -> Result<Vec<RunRecord>, AdaptivityError> {
    params.validate()?;
    let start = Instant::now();
    let mut mesh = problem.initial_mesh();
    let mut records = Vec::new();
    for level in 0.. {
        let at = |e: AdaptivityError| AdaptivityError::AtLevel { level, source: Box::new(e) };
        let step = run_level(problem, params, &mut mesh, level).map_err(at)?;
        let state = LevelState {
            mesh: &mesh,
            dofs: &step.dofs,
            solution: &step.solution,
            record: &step.record,
            n_marked: step.n_marked(),
        };
        observe(&state).map_err(|e| at(AdaptivityError::Parameter(format!("output failed: {e}"))))?;
        let done = step.record.ndof >= params.max_ndof
            || start.elapsed() >= params.time_budget
            || matches!(step.action, Action::Stop);
        let LevelStep { mut record, action, .. } = step;
        let mut exhausted = false;
        if !done {
            let t = Instant::now();
            exhausted = !apply(&mut mesh, params, action).map_err(at)?;
            record.t_refine = t.elapsed().as_secs_f64();
        }
        records.push(record);
        if done || exhausted {
            break;
        }
    }
    Ok(records)
}

enum Action {
    Refine(Vec<usize>),
    Approximate(f64),
    Stop,
}

struct LevelStep {
    dofs: DofMap,
    solution: Solution,
    record: RunRecord,
    action: Action,
}

impl LevelStep {
    fn n_marked(&self) -> usize {
        match &self.action {
            Action::Refine(m) => m.len(),
            _ => 0,
        }
    }
}

fn run_level(problem: &Problem, params: &AdaptiveParams, mesh: &mut Triangulation, level: usize) -> Result<LevelStep, AdaptivityError> {
    let t = Instant::now();
    let dofs = DofMap::new(mesh);
    let system = assemble(mesh, &dofs)?;
    let x = solve_with(&system, params.solver)?;
    let solution = Solution::from_coeffs(&dofs, x)?;
    let t_solve = t.elapsed().as_secs_f64();

    // Only the estimator driving the algorithm is timed.
    let t = Instant::now();
    let (nat, sep, mu) = match params.algorithm {
        _ if params.is_uniform() => (Some(estimators::eta_nat(mesh, &dofs, &solution)), None, None),
        Algorithm::Nalsfem => (Some(estimators::eta_nat(mesh, &dofs, &solution)), None, None),
        Algorithm::Calsfem | Algorithm::Salsfem | Algorithm::Uniform => {
            (None, Some(estimators::eta_sep(mesh, &dofs, &solution)), Some(estimators::mu(mesh)))
        }
    };
    let osc_report = (params.algorithm == Algorithm::Calsfem && !params.is_uniform()).then(|| estimators::osc(mesh));
    let col = osc_report.as_ref().map(|o| estimators::combine_col(sep.as_ref().unwrap(), o));
    let t_estimate = t.elapsed().as_secs_f64();

    let nat = nat.unwrap_or_else(|| estimators::eta_nat(mesh, &dofs, &solution));
    let sep = sep.unwrap_or_else(|| estimators::eta_sep(mesh, &dofs, &solution));
    let mu = mu.unwrap_or_else(|| estimators::mu(mesh));
    let osc = osc_report.unwrap_or_else(|| estimators::osc(mesh));
    let col = col.unwrap_or_else(|| estimators::combine_col(&sep, &osc));

    let t = Instant::now();
    let (case, action) = mark(params, &nat, &sep, &col, &mu);
    let t_mark = t.elapsed().as_secs_f64();

    let ls_value = ls_functional(mesh, &dofs, &solution).total();
    let errors = if problem.has_exact_solution() { Some(exact_errors(problem, mesh, &dofs, &solution)?) } else { None };
    let record = RunRecord {
        level,
        case: case.as_str().to_string(),
        n_triangles: mesh.n_leaves(),
        ndof: dofs.ndof(),
        eta_nat: nat.total(),
        eta_sep: sep.total(),
        eta_col: col.total(),
        mu: mu.total(),
        osc: osc.total(),
        ls_value,
        err_grad: errors.map(|e| e.grad),
        err_flux_l2: errors.map(|e| e.flux_l2),
        err_flux_div: errors.map(|e| e.flux_div),
        t_solve,
        t_estimate,
        t_mark,
        t_refine: 0.0,
        timing_spread: None,
    };
    Ok(LevelStep { dofs, solution, record, action })
}

fn mark(
    params: &AdaptiveParams,
    nat: &EstimatorReport,
    sep: &EstimatorReport,
    col: &EstimatorReport,
    mu: &EstimatorReport,
) -> (LevelCase, Action) {
    if params.is_uniform() {
        return (LevelCase::Uniform, Action::Refine((0..nat.per_triangle.len()).collect()));
    }
    let leaves = |v: Vec<usize>| if v.is_empty() { Action::Stop } else { Action::Refine(v) };
    match params.algorithm {
        Algorithm::Nalsfem => (LevelCase::A, leaves(dorfler_mark(&nat.per_triangle, params.theta))),
        Algorithm::Calsfem => (LevelCase::A, leaves(dorfler_mark(&col.per_triangle, params.theta))),
        Algorithm::Salsfem => {
            let d = separate_mark(mu, sep, params.theta, params.kappa, params.rho);
            match d.marking {
                Marking::Leaves(v) => (LevelCase::A, leaves(v)),
                Marking::Tolerance(tol) => (LevelCase::B, Action::Approximate(tol)),
            }
        }
        Algorithm::Uniform => unreachable!("handled above"),
    }
}

/// Returns `false` when data approximation would exceed the ndof budget, which ends the run.
fn apply(mesh: &mut Triangulation, params: &AdaptiveParams, action: Action) -> Result<bool, AdaptivityError> {
    match action {
        Action::Refine(leaf_indices) => {
            let ids: Vec<usize> = leaf_indices.iter().map(|&i| mesh.leaves()[i]).collect();
            mesh.refine(&ids, params.refine_mode())?;
        }
        Action::Approximate(tol) => {
            match approximation_algorithm(mesh, tol, params.varrho, params.aa_threshold, params.max_ndof) {
                Err(AdaptivityError::Budget { .. }) => return Ok(false),
                other => {
                    other?;
                }
            }
        }
        Action::Stop => {}
    }
    Ok(true)
}
