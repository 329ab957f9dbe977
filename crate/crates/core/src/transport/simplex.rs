//! Transportation simplex on the spanning-tree basis.
//!
//! Nodes `0..m` are sources, `m..m+n` are sinks. Each basic cell `(i, j)` is a
//! tree edge between node `i` and node `m + j`. Node potentials hold the duals
//! (`u_i` on sources, `v_j` on sinks) with the root `u_0 = 0`, so that
//! `u_i + v_j = c_ij` on every tree edge.

use super::{
    northwest_corner, BasicCell, Flow, PivotRule, SolveStatus, SolverOptions, TransportPlan, TransportProblem,
};
use crate::Result;

const NONE: usize = usize::MAX;

/// Solve a balanced transportation problem starting from the northwest corner basis.
pub fn solve(problem: &TransportProblem, opts: &SolverOptions) -> Result<TransportPlan> {
    opts.validate()?;
    let cells = northwest_corner(&problem.supplies, &problem.demands)?;
    let mut tree = BasisTree::new(problem, cells);
    let (m, n) = (problem.rows(), problem.cols());
    let cap = opts.iteration_cap(m, n);
    // Pricing threshold sits below the certificate tolerance so that the
    // final reduced costs are comfortably within it.
    let price_tol = opts.dual_tol * 0.1;
    let bland_after = 3 * (m + n);

    let mut iterations = 0;
    let mut degenerate_pivots = 0;
    let mut degenerate_run = 0;
    let mut cursor = 0;
    let block = ((m * n) as f64).sqrt().ceil().max(10.0) as usize;
    let status = loop {
        let rule = if degenerate_run >= bland_after {
            PivotRule::Bland
        } else {
            opts.pivot_rule
        };
        let entering = match rule {
            PivotRule::MostNegative => tree.price_most_negative(price_tol),
            PivotRule::Bland => tree.price_bland(price_tol),
            PivotRule::BlockSearch => tree.price_block(price_tol, block, &mut cursor),
        };
        let Some((i, j)) = entering else {
            break SolveStatus::Optimal;
        };
        if iterations == cap {
            break SolveStatus::IterationLimit;
        }
        let theta = tree.pivot(i, j);
        iterations += 1;
        if theta == 0.0 {
            degenerate_pivots += 1;
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    };

    Ok(tree.into_plan(problem, iterations, degenerate_pivots, status))
}

struct BasisTree<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    cells: Vec<BasicCell>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    adj: Vec<Vec<usize>>,
    // scratch for cycle search
    up_from_sink: Vec<usize>,
    up_from_source: Vec<usize>,
    stack: Vec<(usize, usize, usize)>,
}

impl<'a> BasisTree<'a> {
    fn new(problem: &'a TransportProblem, cells: Vec<BasicCell>) -> Self {
        let (m, n) = (problem.rows(), problem.cols());
        let nodes = m + n;
        let mut adj = vec![Vec::new(); nodes];
        for (k, c) in cells.iter().enumerate() {
            adj[c.i].push(k);
            adj[m + c.j].push(k);
        }
        let mut tree = Self {
            m,
            n,
            cost: problem.cost.entries(),
            cells,
            parent: vec![NONE; nodes],
            parent_cell: vec![NONE; nodes],
            depth: vec![0; nodes],
            potential: vec![0.0; nodes],
            adj,
            up_from_sink: Vec::new(),
            up_from_source: Vec::new(),
            stack: Vec::new(),
        };
        // Hang everything below source 0.
        let root_edges: Vec<usize> = tree.adj[0].clone();
        for k in root_edges {
            let child = tree.other_end(k, 0);
            tree.attach_subtree(child, 0, k);
        }
        tree
    }

    #[inline]
    fn cell_cost(&self, k: usize) -> f64 {
        let c = self.cells[k];
        self.cost[c.i * self.n + c.j]
    }

    #[inline]
    fn other_end(&self, k: usize, node: usize) -> usize {
        let c = self.cells[k];
        if node == c.i {
            self.m + c.j
        } else {
            c.i
        }
    }

    /// Hang `root` (and everything reachable from it not through `edge`) below `parent`.
    fn attach_subtree(&mut self, root: usize, parent: usize, edge: usize) {
        let mut stack = std::mem::take(&mut self.stack);
        stack.clear();
        stack.push((root, parent, edge));
        while let Some((x, p, e)) = stack.pop() {
            self.parent[x] = p;
            self.parent_cell[x] = e;
            self.depth[x] = self.depth[p] + 1;
            self.potential[x] = self.cell_cost(e) - self.potential[p];
            for &f in &self.adj[x] {
                if f != e {
                    stack.push((self.other_end(f, x), x, f));
                }
            }
        }
        self.stack = stack;
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j] - self.potential[i] - self.potential[self.m + j]
    }

    fn price_most_negative(&self, tol: f64) -> Option<(usize, usize)> {
        let (m, n) = (self.m, self.n);
        let v = &self.potential[m..];
        let mut best = -tol;
        let mut arg = None;
        for i in 0..m {
            let ui = self.potential[i];
            let row = &self.cost[i * n..(i + 1) * n];
            for (j, (&c, &vj)) in row.iter().zip(v).enumerate() {
                let rc = c - ui - vj;
                if rc < best {
                    best = rc;
                    arg = Some((i, j));
                }
            }
        }
        arg
    }

    fn price_bland(&self, tol: f64) -> Option<(usize, usize)> {
        (0..self.m)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .find(|&(i, j)| self.reduced_cost(i, j) < -tol)
    }

    fn price_block(&self, tol: f64, block: usize, cursor: &mut usize) -> Option<(usize, usize)> {
        let (m, n) = (self.m, self.n);
        let total = m * n;
        let v = &self.potential[m..];
        let mut best = -tol;
        let mut arg = usize::MAX;
        let mut k = *cursor;
        let mut remaining = total;
        let mut in_block = 0;
        while remaining > 0 {
            let (i, j0) = (k / n, k % n);
            let len = (n - j0).min(remaining).min(block - in_block);
            let ui = self.potential[i];
            let row = &self.cost[k..k + len];
            for (t, (&c, &vj)) in row.iter().zip(&v[j0..j0 + len]).enumerate() {
                let rc = c - ui - vj;
                if rc < best {
                    best = rc;
                    arg = k + t;
                }
            }
            k += len;
            if k == total {
                k = 0;
            }
            remaining -= len;
            in_block += len;
            if in_block == block {
                if arg != usize::MAX {
                    break;
                }
                in_block = 0;
            }
        }
        *cursor = k;
        (arg != usize::MAX).then(|| (arg / n, arg % n))
    }

    /// Bring cell `(i, j)` into the basis; returns the step length θ.
    fn pivot(&mut self, i: usize, j: usize) -> f64 {
        let m = self.m;
        let (a, b) = (i, m + j);

        // Tree path b -> lca -> a, recorded as the child node of each edge.
        let mut from_sink = std::mem::take(&mut self.up_from_sink);
        let mut from_source = std::mem::take(&mut self.up_from_source);
        from_sink.clear();
        from_source.clear();
        let (mut x, mut y) = (b, a);
        while self.depth[x] > self.depth[y] {
            from_sink.push(x);
            x = self.parent[x];
        }
        while self.depth[y] > self.depth[x] {
            from_source.push(y);
            y = self.parent[y];
        }
        while x != y {
            from_sink.push(x);
            x = self.parent[x];
            from_source.push(y);
            y = self.parent[y];
        }

        // Along the cycle, flow decreases on edges entered from a sink when
        // walking b -> a. On the sink side that is a sink child, on the
        // source side a source child.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<(usize, bool)> = None; // (child node, on sink side)
        let candidates = from_sink
            .iter()
            .filter(|&&c| c >= m)
            .map(|&c| (c, true))
            .chain(from_source.iter().filter(|&&c| c < m).map(|&c| (c, false)));
        for (child, sink_side) in candidates {
            let cell = self.cells[self.parent_cell[child]];
            let better = match leaving {
                None => true,
                Some((cur, _)) => {
                    let cur_cell = self.cells[self.parent_cell[cur]];
                    cell.flow < theta || (cell.flow == theta && (cell.i, cell.j) < (cur_cell.i, cur_cell.j))
                }
            };
            if better {
                theta = cell.flow;
                leaving = Some((child, sink_side));
            }
        }
        let (leave_child, sink_side) = leaving.expect("cycle always has a decreasing edge");

        if theta > 0.0 {
            for &c in &from_sink {
                let k = self.parent_cell[c];
                if c >= m {
                    self.cells[k].flow -= theta;
                } else {
                    self.cells[k].flow += theta;
                }
            }
            for &c in &from_source {
                let k = self.parent_cell[c];
                if c < m {
                    self.cells[k].flow -= theta;
                } else {
                    self.cells[k].flow += theta;
                }
            }
        }

        // Swap the leaving cell for the entering one, reusing its slot.
        let slot = self.parent_cell[leave_child];
        let leave_parent = self.parent[leave_child];
        remove_edge(&mut self.adj[leave_parent], slot);
        remove_edge(&mut self.adj[leave_child], slot);
        self.cells[slot] = BasicCell { i, j, flow: theta };
        self.adj[a].push(slot);
        self.adj[b].push(slot);

        // The side containing the leaving edge is cut off and re-hung from
        // the entering edge.
        if sink_side {
            self.attach_subtree(b, a, slot);
        } else {
            self.attach_subtree(a, b, slot);
        }

        self.up_from_sink = from_sink;
        self.up_from_source = from_source;
        theta
    }

    /// Basic solution of the current tree, recomputed from the marginals by
    /// peeling leaves, so rounding from the pivots does not accumulate.
    fn recompute_flows(&mut self, supplies: &[f64], demands: &[f64]) {
        let m = self.m;
        let nodes = m + self.n;
        let mut order = Vec::with_capacity(nodes);
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let x = order[head];
            head += 1;
            for &k in &self.adj[x] {
                let y = self.other_end(k, x);
                if self.parent[y] == x && self.parent_cell[y] == k {
                    order.push(y);
                }
            }
        }
        let mut residual: Vec<f64> = supplies.iter().chain(demands).copied().collect();
        for &x in order.iter().skip(1).rev() {
            let k = self.parent_cell[x];
            let flow = residual[x].max(0.0);
            self.cells[k].flow = flow;
            residual[self.parent[x]] -= flow;
        }
    }

    fn into_plan(
        mut self,
        problem: &TransportProblem,
        iterations: usize,
        degenerate_pivots: usize,
        status: SolveStatus,
    ) -> TransportPlan {
        self.recompute_flows(&problem.supplies, &problem.demands);
        let mut flows: Vec<Flow> = self
            .cells
            .iter()
            .filter(|c| c.flow > 0.0)
            .map(|c| Flow {
                i: c.i,
                j: c.j,
                mass: c.flow,
            })
            .collect();
        flows.sort_by_key(|f| (f.i, f.j));
        let objective = flows.iter().map(|f| self.cost[f.i * self.n + f.j] * f.mass).sum();
        let mut basis: Vec<(usize, usize)> = self.cells.iter().map(|c| (c.i, c.j)).collect();
        basis.sort_unstable();
        TransportPlan {
            flows,
            basis,
            objective,
            duals_u: self.potential[..self.m].to_vec(),
            duals_v: self.potential[self.m..].to_vec(),
            iterations,
            degenerate_pivots,
            status,
        }
    }
}

fn remove_edge(list: &mut Vec<usize>, k: usize) {
    if let Some(pos) = list.iter().position(|&e| e == k) {
        list.swap_remove(pos);
    }
}
