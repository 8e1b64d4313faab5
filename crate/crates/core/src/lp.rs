//! Small dense linear programs solved by exhaustive vertex enumeration.
//!
//! Every index set of `n - rank(A_eq)` inequality rows is stacked under the
//! equality rows; when the stack has full column rank its solution is a
//! candidate corner, kept if it satisfies all constraints. Planning problems
//! have four variables and at most ten inequalities, so the enumeration is
//! at most a few hundred tiny solves and the result is exactly reproducible.

use std::cmp::Ordering;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpTolerances {
    /// Singular values below `rank_cutoff * sigma_max` count as zero.
    pub rank_cutoff: f64,
    pub feasibility: f64,
    pub duplicate: f64,
    /// Relative objective difference treated as a tie.
    pub tie: f64,
}

impl Default for LpTolerances {
    fn default() -> Self {
        Self {
            rank_cutoff: 1e-10,
            feasibility: 1e-9,
            duplicate: 1e-9,
            tie: 1e-12,
        }
    }
}

/// `{x : A x <= b, A_eq x = b_eq}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        if n == 0 {
            return Err(Error::invalid("polytope needs at least one variable"));
        }
        if a.nrows() != b.len() {
            return Err(Error::invalid("inequality matrix and bound lengths differ"));
        }
        if a_eq.ncols() != n || a_eq.nrows() != b_eq.len() {
            return Err(Error::invalid("equality system has inconsistent dimensions"));
        }
        Ok(Self { a, b, a_eq, b_eq })
    }

    /// Builds from row slices; `eq_rows` may be empty.
    pub fn from_rows(
        n: usize,
        rows: &[(Vec<f64>, f64)],
        eq_rows: &[(Vec<f64>, f64)],
    ) -> Result<Self> {
        let to_parts = |rs: &[(Vec<f64>, f64)]| -> Result<(DMatrix<f64>, DVector<f64>)> {
            if rs.iter().any(|(r, _)| r.len() != n) {
                return Err(Error::invalid(format!("every constraint row needs {n} entries")));
            }
            let m = DMatrix::from_fn(rs.len(), n, |i, j| rs[i].0[j]);
            let v = DVector::from_iterator(rs.len(), rs.iter().map(|(_, rhs)| *rhs));
            Ok((m, v))
        };
        let (a, b) = to_parts(rows)?;
        let (a_eq, b_eq) = to_parts(eq_rows)?;
        Self::new(a, b, a_eq, b_eq)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_inequalities(&self) -> usize {
        self.a.nrows()
    }

    /// A copy with one more inequality row `row . x <= rhs`.
    pub fn with_inequality(&self, row: &[f64], rhs: f64) -> Result<Self> {
        if row.len() != self.dim() {
            return Err(Error::invalid("appended row has the wrong length"));
        }
        let m = self.a.nrows();
        let mut a = self.a.clone().insert_row(m, 0.0);
        for (j, &v) in row.iter().enumerate() {
            a[(m, j)] = v;
        }
        let b = self.b.clone().push(rhs);
        Self::new(a, b, self.a_eq.clone(), self.b_eq.clone())
    }

    /// Largest violation of any constraint at `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let residual = |m: &DMatrix<f64>, rhs: &DVector<f64>, i: usize| {
            x.iter().enumerate().map(|(j, v)| m[(i, j)] * v).sum::<f64>() - rhs[i]
        };
        let ineq = (0..self.a.nrows()).fold(0.0f64, |m, i| m.max(residual(&self.a, &self.b, i)));
        (0..self.a_eq.nrows()).fold(ineq, |m, i| m.max(residual(&self.a_eq, &self.b_eq, i).abs()))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub x: Vec<f64>,
    /// Indices of inequality rows tight at `x`.
    pub active_set: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredVertex {
    pub vertex: Vertex,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub optimal: Vertex,
    pub objective_value: f64,
    /// Every vertex with its objective value, best first.
    pub all_vertices: Vec<ScoredVertex>,
}

fn rank(m: &DMatrix<f64>, cutoff: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > cutoff * max).count()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub fn enumerate_vertices(p: &Polytope) -> Vec<Vertex> {
    enumerate_vertices_with(p, &LpTolerances::default())
}

pub fn enumerate_vertices_with(p: &Polytope, tol: &LpTolerances) -> Vec<Vertex> {
    let n = p.dim();
    let m = p.num_inequalities();
    let eq_rows = p.a_eq.nrows();
    let free = n - rank(&p.a_eq, tol.rank_cutoff).min(n);
    if free > m {
        return Vec::new();
    }

    let mut found: Vec<Vec<f64>> = Vec::new();
    for subset in (0..m).combinations(free) {
        let rows = eq_rows + subset.len();
        let stacked = DMatrix::from_fn(rows, n, |i, j| {
            if i < eq_rows {
                p.a_eq[(i, j)]
            } else {
                p.a[(subset[i - eq_rows], j)]
            }
        });
        if rank(&stacked, tol.rank_cutoff) < n {
            continue;
        }
        let rhs = DVector::from_fn(rows, |i, _| {
            if i < eq_rows {
                p.b_eq[i]
            } else {
                p.b[subset[i - eq_rows]]
            }
        });
        // square stacks solve exactly for the small integer systems used here
        let solved = if rows == n {
            stacked.clone().lu().solve(&rhs)
        } else {
            None
        };
        let x = match solved {
            Some(x) => x,
            None => match stacked.svd(true, true).solve(&rhs, 0.0) {
                Ok(x) => x,
                Err(_) => continue,
            },
        };
        let x: Vec<f64> = x.iter().map(|&v| if v.abs() < 1e-15 { 0.0 } else { v }).collect();
        if !p.contains(&x, tol.feasibility) {
            continue;
        }
        let duplicate = found.iter().any(|v| {
            v.iter().zip(&x).all(|(a, b)| (a - b).abs() <= tol.duplicate)
        });
        if !duplicate {
            found.push(x);
        }
    }

    found.sort_by(|a, b| lex_cmp(a, b));
    found
        .into_iter()
        .map(|x| {
            let xv = DVector::from_column_slice(&x);
            let lhs = &p.a * xv;
            let active_set = (0..m)
                .filter(|&i| (lhs[i] - p.b[i]).abs() <= tol.feasibility)
                .collect();
            Vertex { x, active_set }
        })
        .collect()
}

pub fn solve_lp(p: &Polytope, objective: &[f64], sense: Sense) -> Result<LpSolution> {
    solve_lp_with(p, objective, sense, &LpTolerances::default())
}

/// Evaluates the objective at every vertex and returns the best one.
///
/// Ties (relative difference below `tol.tie`) go to the lexicographically
/// largest vertex, which keeps earlier schemes in use at region boundaries.
pub fn solve_lp_with(
    p: &Polytope,
    objective: &[f64],
    sense: Sense,
    tol: &LpTolerances,
) -> Result<LpSolution> {
    if objective.len() != p.dim() {
        return Err(Error::invalid(format!(
            "objective has {} entries for {} variables",
            objective.len(),
            p.dim()
        )));
    }
    let vertices = enumerate_vertices_with(p, tol);
    if vertices.is_empty() {
        return Err(Error::Infeasible("no vertices found (polytope is empty)".into()));
    }
    let sign = match sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut scored: Vec<ScoredVertex> = vertices
        .into_iter()
        .map(|vertex| {
            let objective = vertex.x.iter().zip(objective).map(|(x, c)| x * c).sum();
            ScoredVertex { vertex, objective }
        })
        .collect();

    let best = scored
        .iter()
        .map(|s| sign * s.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    let tie = tol.tie * (1.0 + best.abs());
    scored.sort_by(|a, b| {
        let (va, vb) = (sign * a.objective, sign * b.objective);
        if (va - vb).abs() <= tie {
            lex_cmp(&b.vertex.x, &a.vertex.x)
        } else {
            vb.total_cmp(&va)
        }
    });
    // Sorting with a tolerance is not transitive; pick the optimum explicitly.
    let optimal = scored
        .iter()
        .filter(|s| best - sign * s.objective <= tie)
        .max_by(|a, b| lex_cmp(&a.vertex.x, &b.vertex.x))
        .expect("at least one vertex attains the best value")
        .clone();

    Ok(LpSolution {
        objective_value: optimal.objective,
        optimal: optimal.vertex,
        all_vertices: scored,
    })
}
