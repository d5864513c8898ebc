//! Exact Kantorovich solver via the transportation simplex.
//!
//! Start from the north-west-corner basis, price with row/column potentials,
//! and pivot around the unique basis cycle. Entering and leaving cells are
//! chosen by Bland's rule (lowest row-major index), which rules out cycling on
//! degenerate bases. Intended as a small-instance oracle.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1};

use super::types::{validate_mass, CostMatrix, TransportPlan};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest side the oracle accepts.
pub const EXACT_MAX_SIDE: usize = 64;

const MASS_TOL: f64 = 1e-9;

pub fn exact_transport<T: Scalar>(
    a: ArrayView1<'_, T>,
    b: ArrayView1<'_, T>,
    cost: &CostMatrix<T>,
) -> Result<TransportPlan<T>> {
    let (n, m) = cost.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::Shape(format!(
            "masses have lengths ({}, {}) but cost matrix is {n}x{m}",
            a.len(),
            b.len()
        )));
    }
    if n > EXACT_MAX_SIDE || m > EXACT_MAX_SIDE {
        return Err(Error::Input(format!(
            "exact oracle limited to {EXACT_MAX_SIDE} points per side, got {n}x{m}"
        )));
    }
    validate_mass(a, "a")?;
    validate_mass(b, "b")?;
    let (sa, sb) = (a.sum(), b.sum());
    if (sa - sb).abs() > T::lit(MASS_TOL) {
        return Err(Error::Infeasible(format!("total masses differ: {sa} vs {sb}")));
    }

    let mut tableau = Tableau::north_west(a, b);
    let d = cost.view();
    let scale = d.iter().fold(T::one(), |acc, c| acc.max(c.abs()));
    let price_tol = T::epsilon() * T::lit(64.0) * scale;
    let pivot_cap = 50 * (n + m) * (n + m) + 100;

    let mut pivots = 0;
    loop {
        let (u, v) = tableau.potentials(|i, j| d[(i, j)]);
        // Bland: first improving cell in row-major order.
        let entering = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .find(|&(i, j)| !tableau.is_basic(i, j) && d[(i, j)] - u[i] - v[j] < -price_tol);
        let Some((p, q)) = entering else { break };
        tableau.pivot(p, q);
        pivots += 1;
        if pivots > pivot_cap {
            return Err(Error::numerical(pivots, "transportation simplex failed to terminate"));
        }
    }

    let mut coupling = Array2::zeros((n, m));
    for &(i, j) in &tableau.basis {
        coupling[(i, j)] = tableau.flow[(i, j)].max(T::zero());
    }
    TransportPlan::from_coupling(coupling, cost, pivots, true)
}

struct Tableau<T> {
    n: usize,
    m: usize,
    /// Basic cells; always a spanning tree over the n row and m column nodes.
    basis: Vec<(usize, usize)>,
    in_basis: Array2<bool>,
    flow: Array2<T>,
}

impl<T: Scalar> Tableau<T> {
    fn north_west(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut supply = a.to_vec();
        let mut demand = b.to_vec();
        let mut basis = Vec::with_capacity(n + m - 1);
        let mut in_basis = Array2::from_elem((n, m), false);
        let mut flow = Array2::zeros((n, m));
        let (mut i, mut j) = (0, 0);
        loop {
            let x = supply[i].min(demand[j]);
            flow[(i, j)] = x;
            supply[i] -= x;
            demand[j] -= x;
            basis.push((i, j));
            in_basis[(i, j)] = true;
            if i == n - 1 && j == m - 1 {
                break;
            }
            // Ties move down so the staircase always has n + m - 1 cells.
            if j == m - 1 || (i < n - 1 && supply[i] <= demand[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self {
            n,
            m,
            basis,
            in_basis,
            flow,
        }
    }

    fn is_basic(&self, i: usize, j: usize) -> bool {
        self.in_basis[(i, j)]
    }

    /// Node ids: rows are `0..n`, columns are `n..n+m`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for &(i, j) in &self.basis {
            adj[i].push(self.n + j);
            adj[self.n + j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Solve `u_i + v_j = c_ij` over basic cells with `u_0 = 0`.
    fn potentials(&self, c: impl Fn(usize, usize) -> T) -> (Vec<T>, Vec<T>) {
        let adj = self.adjacency();
        let mut u = vec![T::zero(); self.n];
        let mut v = vec![T::zero(); self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < self.n {
                    let j = next - self.n;
                    v[j] = c(node, j) - u[node];
                } else {
                    let j = node - self.n;
                    u[next] = c(next, j) - v[j];
                }
                queue.push_back(next);
            }
        }
        (u, v)
    }

    /// Path of cells from row node `p` to column node `q` through the basis tree.
    fn tree_path(&self, p: usize, q: usize) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let target = self.n + q;
        let mut parent = vec![usize::MAX; self.n + self.m];
        let mut queue = VecDeque::from([p]);
        parent[p] = p;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != p {
            let prev = parent[node];
            let cell = if node < self.n {
                (node, prev - self.n)
            } else {
                (prev, node - self.n)
            };
            cells.push(cell);
            node = prev;
        }
        // Ordered from column q back to row p.
        cells
    }

    fn pivot(&mut self, p: usize, q: usize) {
        // Cycle: (p,q) gains, then cells alternate losing/gaining walking from q back to p.
        let path = self.tree_path(p, q);
        let losing: Vec<(usize, usize)> = path.iter().copied().step_by(2).collect();
        let gaining: Vec<(usize, usize)> = path.iter().copied().skip(1).step_by(2).collect();

        let theta = losing
            .iter()
            .map(|&(i, j)| self.flow[(i, j)])
            .fold(T::infinity(), T::min);
        let leaving = losing
            .iter()
            .copied()
            .filter(|&(i, j)| self.flow[(i, j)] <= theta)
            .min()
            .expect("cycle has at least one losing cell");

        self.flow[(p, q)] = theta;
        for &(i, j) in &losing {
            self.flow[(i, j)] -= theta;
        }
        for &(i, j) in &gaining {
            self.flow[(i, j)] += theta;
        }
        self.flow[leaving] = T::zero();
        self.in_basis[leaving] = false;
        self.in_basis[(p, q)] = true;
        let slot = self
            .basis
            .iter()
            .position(|&c| c == leaving)
            .expect("leaving cell is basic");
        self.basis[slot] = (p, q);
    }
}
