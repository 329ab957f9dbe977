//! Balanced transportation problem between two discrete measures.
//!
//! The linear program is never built explicitly. A basis of the m×n problem is
//! a spanning tree on the bipartite graph of sources and sinks, and the solver
//! in [`simplex`] pivots on that tree directly.

mod certificate;
mod northwest;
mod oracle;
mod simplex;

pub use certificate::{verify_optimality, verify_optimality_with, CertificateReport, Tolerances};
pub use northwest::{northwest_corner, BasicCell};
pub use oracle::{oracle_permutation, oracle_solve, oracle_solve_problem, ORACLE_MAX_CELLS};
pub use simplex::solve;

use crate::measures::BalancedPair;
use crate::{Error, Result};

/// Squared Euclidean ground costs, row-major, `rows` sources by `cols` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::LengthMismatch(entries.len(), rows * cols));
        }
        if entries.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidOptions("cost matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// `c_ij = (x_i - x'_j)² + (y_i - y'_j)²`.
pub fn build_cost_matrix(pair: &BalancedPair) -> CostMatrix {
    let src = pair.source().points();
    let dst = pair.target().points();
    let mut entries = Vec::with_capacity(src.len() * dst.len());
    for p in src {
        entries.extend(dst.iter().map(|q| p.squared_distance(q)));
    }
    CostMatrix {
        rows: src.len(),
        cols: dst.len(),
        entries,
    }
}

/// Supplies, demands and costs: everything the solver needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    pub cost: CostMatrix,
    pub supplies: Vec<f64>,
    pub demands: Vec<f64>,
}

impl TransportProblem {
    pub fn new(cost: CostMatrix, supplies: Vec<f64>, demands: Vec<f64>) -> Result<Self> {
        if supplies.len() != cost.rows() {
            return Err(Error::LengthMismatch(supplies.len(), cost.rows()));
        }
        if demands.len() != cost.cols() {
            return Err(Error::LengthMismatch(demands.len(), cost.cols()));
        }
        if supplies.is_empty() || demands.is_empty() {
            return Err(Error::InvalidMeasure("empty supply or demand vector".into()));
        }
        if supplies.iter().chain(&demands).any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("masses must be finite and nonnegative".into()));
        }
        Ok(Self {
            cost,
            supplies,
            demands,
        })
    }

    pub fn from_pair(pair: &BalancedPair) -> Self {
        Self {
            cost: build_cost_matrix(pair),
            supplies: pair.source().masses().to_vec(),
            demands: pair.target().masses().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.supplies.len()
    }

    pub fn cols(&self) -> usize {
        self.demands.len()
    }
}

/// How the entering cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PivotRule {
    /// Dantzig: most negative reduced cost over all cells.
    MostNegative,
    /// First cell in row-major order with negative reduced cost.
    Bland,
    /// Most negative reduced cost within the first block of about √(mn)
    /// consecutive cells that contains a candidate, scanning cyclically.
    BlockSearch,
}

impl std::str::FromStr for PivotRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mostnegative" | "dantzig" => Ok(PivotRule::MostNegative),
            "bland" => Ok(PivotRule::Bland),
            "block" | "blocksearch" => Ok(PivotRule::BlockSearch),
            other => Err(Error::Config(format!("unknown pivot rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub pivot_rule: PivotRule,
    /// `None` means `50·(m+n)·max(m,n)`.
    pub max_iterations: Option<usize>,
    pub dual_tol: f64,
    pub marginal_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pivot_rule: PivotRule::MostNegative,
            max_iterations: None,
            dual_tol: 1e-9,
            marginal_tol: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn with_pivot_rule(mut self, rule: PivotRule) -> Self {
        self.pivot_rule = rule;
        self
    }

    pub fn with_max_iterations(mut self, max: usize) -> Self {
        self.max_iterations = Some(max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidOptions("max_iterations must be at least 1".into()));
        }
        for (name, tol) in [("dual_tol", self.dual_tol), ("marginal_tol", self.marginal_tol)] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidOptions(format!("{name} must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    pub fn iteration_cap(&self, m: usize, n: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| 50 * (m + n) * m.max(n)).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
}

/// A positive entry of the transport plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flow {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Strictly positive flows, sorted by `(i, j)`.
    pub flows: Vec<Flow>,
    /// The `m + n - 1` basic cells of the final basis, including zero-flow ones.
    pub basis: Vec<(usize, usize)>,
    pub objective: f64,
    pub duals_u: Vec<f64>,
    pub duals_v: Vec<f64>,
    pub iterations: usize,
    pub degenerate_pivots: usize,
    pub status: SolveStatus,
}

impl TransportPlan {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn rows(&self) -> usize {
        self.duals_u.len()
    }

    pub fn cols(&self) -> usize {
        self.duals_v.len()
    }

    /// Dense `m×n` copy of the plan.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols()]; self.rows()];
        for f in &self.flows {
            out[f.i][f.j] += f.mass;
        }
        out
    }

    /// Σ_j π_ij for each i.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for f in &self.flows {
            out[f.i] += f.mass;
        }
        out
    }

    /// Σ_i π_ij for each j.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for f in &self.flows {
            out[f.j] += f.mass;
        }
        out
    }
}

/// Optimal plan between the two sides of a balanced pair.
pub fn solve_transport(pair: &BalancedPair, opts: &SolverOptions) -> Result<TransportPlan> {
    solve(&TransportProblem::from_pair(pair), opts)
}

/// `sqrt` of the optimal squared-distance cost. Meant for unit-mass pairs.
pub fn wasserstein2(pair: &BalancedPair, opts: &SolverOptions) -> Result<f64> {
    let plan = solve_transport(pair, opts)?;
    if !plan.is_optimal() {
        return Err(Error::IterationLimit {
            iterations: plan.iterations,
        });
    }
    Ok(plan.objective.max(0.0).sqrt())
}
