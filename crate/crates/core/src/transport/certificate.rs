use super::{TransportPlan, TransportProblem};

/// Thresholds a certificate must meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub dual: f64,
    pub marginal: f64,
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            dual: 1e-9,
            marginal: 1e-9,
            gap: 1e-9,
        }
    }
}

/// Residuals of the primal-dual optimality conditions for a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    /// max over all cells of `u_i + v_j - c_ij`, floored at zero.
    pub max_dual_violation: f64,
    /// max over positive flows of `|c_ij - u_i - v_j|`.
    pub max_slackness_residual: f64,
    /// max absolute deviation of a row or column sum from its marginal.
    pub max_marginal_residual: f64,
    /// `|Σ c π - (Σ u f + Σ v g)|`.
    pub duality_gap: f64,
    /// Smallest flow entry; negative means the plan is infeasible.
    pub min_flow: f64,
    pub passed: bool,
}

pub fn verify_optimality(plan: &TransportPlan, problem: &TransportProblem) -> CertificateReport {
    verify_optimality_with(plan, problem, Tolerances::default())
}

pub fn verify_optimality_with(plan: &TransportPlan, problem: &TransportProblem, tol: Tolerances) -> CertificateReport {
    let (m, n) = (problem.rows(), problem.cols());
    let cost = &problem.cost;
    let (u, v) = (&plan.duals_u, &plan.duals_v);
    let shape_ok = u.len() == m && v.len() == n;

    let mut max_dual_violation = 0.0f64;
    if shape_ok {
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                max_dual_violation = max_dual_violation.max(ui + vj - cost.get(i, j));
            }
        }
    }

    let mut max_slackness_residual = 0.0f64;
    let mut min_flow = 0.0f64;
    let mut rows = vec![0.0; m];
    let mut cols = vec![0.0; n];
    let mut primal = 0.0;
    let mut in_range = true;
    for f in &plan.flows {
        if f.i >= m || f.j >= n {
            in_range = false;
            continue;
        }
        min_flow = min_flow.min(f.mass);
        rows[f.i] += f.mass;
        cols[f.j] += f.mass;
        let c = cost.get(f.i, f.j);
        primal += c * f.mass;
        if f.mass > 0.0 && shape_ok {
            max_slackness_residual = max_slackness_residual.max((c - u[f.i] - v[f.j]).abs());
        }
    }
    let max_marginal_residual = rows
        .iter()
        .zip(&problem.supplies)
        .chain(cols.iter().zip(&problem.demands))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let dual: f64 = if shape_ok {
        u.iter().zip(&problem.supplies).map(|(a, b)| a * b).sum::<f64>()
            + v.iter().zip(&problem.demands).map(|(a, b)| a * b).sum::<f64>()
    } else {
        f64::NAN
    };
    let duality_gap = (primal - dual).abs();

    let passed = shape_ok
        && in_range
        && min_flow >= 0.0
        && max_dual_violation <= tol.dual
        && max_slackness_residual <= tol.dual
        && max_marginal_residual <= tol.marginal
        && duality_gap <= tol.gap;

    CertificateReport {
        max_dual_violation,
        max_slackness_residual,
        max_marginal_residual,
        duality_gap,
        min_flow,
        passed,
    }
}
