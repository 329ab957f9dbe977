use crate::measures::BALANCE_TOL;
use crate::{Error, Result};

/// A basic cell of a transportation basis. `flow` may be zero for degenerate cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicCell {
    pub i: usize,
    pub j: usize,
    pub flow: f64,
}

/// Initial basic feasible plan by the northwest corner rule.
///
/// Always returns exactly `m + n - 1` cells forming a staircase from `(0, 0)`
/// to `(m-1, n-1)`. When a supply and a demand run out together the walk steps
/// down, and the next cell is kept in the basis with zero flow.
pub fn northwest_corner(supplies: &[f64], demands: &[f64]) -> Result<Vec<BasicCell>> {
    let (m, n) = (supplies.len(), demands.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidMeasure("empty supply or demand vector".into()));
    }
    let supply: f64 = supplies.iter().sum();
    let demand: f64 = demands.iter().sum();
    if (supply - demand).abs() > BALANCE_TOL * supply.max(1.0) {
        return Err(Error::UnbalancedProblem { supply, demand });
    }

    let mut s = supplies.to_vec();
    let mut d = demands.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let q = s[i].min(d[j]).max(0.0);
        cells.push(BasicCell { i, j, flow: q });
        s[i] -= q;
        d[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(cells)
}
