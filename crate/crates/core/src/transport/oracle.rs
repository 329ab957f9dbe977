//! Exhaustive reference solver for tiny instances.
//!
//! Every basis of the transportation polytope is a spanning tree of the
//! complete bipartite graph K(m, n). Enumerating all of them, solving each for
//! its basic flows and keeping the cheapest nonnegative one gives the exact
//! optimum without any pivoting.

use super::TransportProblem;
use crate::measures::BalancedPair;
use crate::{Error, Result};

/// Largest `m·n` accepted by the enumeration oracles.
pub const ORACLE_MAX_CELLS: usize = 20;

const FEASIBILITY_SLACK: f64 = 1e-12;

pub fn oracle_solve(pair: &BalancedPair) -> Result<f64> {
    oracle_solve_problem(&TransportProblem::from_pair(pair))
}

pub fn oracle_solve_problem(problem: &TransportProblem) -> Result<f64> {
    let (m, n) = (problem.rows(), problem.cols());
    if m * n > ORACLE_MAX_CELLS {
        return Err(Error::TooLarge { m, n });
    }
    let supply: f64 = problem.supplies.iter().sum();
    let demand: f64 = problem.demands.iter().sum();
    if (supply - demand).abs() > crate::measures::BALANCE_TOL * supply.max(1.0) {
        return Err(Error::UnbalancedProblem { supply, demand });
    }

    let edges: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let dsu: Vec<usize> = (0..m + n).collect();
    enumerate_trees(&edges, 0, m, m + n - 1, &dsu, &mut chosen, &mut |tree| {
        if let Some(cost) = basic_solution_cost(problem, tree) {
            best = best.min(cost);
        }
    });
    Ok(best)
}

/// Minimum over all perfect matchings; applies when `m = n` and every mass is equal.
/// Returns `None` when the instance does not have that shape.
pub fn oracle_permutation(problem: &TransportProblem) -> Result<Option<f64>> {
    let (m, n) = (problem.rows(), problem.cols());
    if m * n > ORACLE_MAX_CELLS {
        return Err(Error::TooLarge { m, n });
    }
    let w = problem.supplies[0];
    let all_equal = problem
        .supplies
        .iter()
        .chain(&problem.demands)
        .all(|&x| (x - w).abs() <= 1e-15 * w.abs().max(1.0));
    if m != n || !all_equal {
        return Ok(None);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permutations(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| problem.cost.get(i, j)).sum();
        best = best.min(c * w);
    });
    Ok(Some(best))
}

fn find(dsu: &[usize], mut x: usize) -> usize {
    while dsu[x] != x {
        x = dsu[x];
    }
    x
}

type TreeVisitor<'a> = dyn FnMut(&[(usize, usize)]) + 'a;

fn enumerate_trees(
    edges: &[(usize, usize)],
    start: usize,
    m: usize,
    need: usize,
    dsu: &[usize],
    chosen: &mut Vec<(usize, usize)>,
    visit: &mut TreeVisitor<'_>,
) {
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    let remaining = need - chosen.len();
    for k in start..edges.len() {
        if edges.len() - k < remaining {
            break;
        }
        let (i, j) = edges[k];
        let (ri, rj) = (find(dsu, i), find(dsu, m + j));
        if ri == rj {
            continue;
        }
        let mut next = dsu.to_vec();
        next[ri] = rj;
        chosen.push((i, j));
        enumerate_trees(edges, k + 1, m, need, &next, chosen, visit);
        chosen.pop();
    }
}

/// Flows forced by the tree, found by repeatedly clearing a degree-one node.
fn basic_solution_cost(problem: &TransportProblem, tree: &[(usize, usize)]) -> Option<f64> {
    let m = problem.rows();
    let nodes = m + problem.cols();
    let mut residual: Vec<f64> = problem.supplies.iter().chain(&problem.demands).copied().collect();
    let mut degree = vec![0usize; nodes];
    for &(i, j) in tree {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut alive = vec![true; tree.len()];
    let mut cost = 0.0;
    for _ in 0..tree.len() {
        let (k, leaf) = tree
            .iter()
            .enumerate()
            .filter(|(k, _)| alive[*k])
            .find_map(|(k, &(i, j))| {
                if degree[i] == 1 {
                    Some((k, i))
                } else if degree[m + j] == 1 {
                    Some((k, m + j))
                } else {
                    None
                }
            })?;
        let (i, j) = tree[k];
        let other = if leaf == i { m + j } else { i };
        let flow = residual[leaf];
        if flow < -FEASIBILITY_SLACK {
            return None;
        }
        residual[leaf] = 0.0;
        residual[other] -= flow;
        degree[i] -= 1;
        degree[m + j] -= 1;
        alive[k] = false;
        cost += problem.cost.get(i, j) * flow.max(0.0);
    }
    if residual.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(cost)
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for t in k..p.len() {
        p.swap(k, t);
        permutations(p, k + 1, visit);
        p.swap(k, t);
    }
}
