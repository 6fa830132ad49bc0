//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Solves `max cᵀx` subject to rows `aᵢᵀx {≤,≥,=} bᵢ` and `x ≥ 0`. Meant for
//! problems with a handful of variables and constraints; the tableau is a
//! plain `Vec<f64>` and every pivot touches all of it.

use thiserror::Error;

/// Pivot entries below this magnitude are treated as zero.
const PIVOT_EPS: f64 = 1e-11;
/// Reduced costs above this are considered improving.
const COST_EPS: f64 = 1e-11;
/// Phase-one objective above this means the program is infeasible.
const FEAS_EPS: f64 = 1e-9;
/// Tie tolerance for reporting alternative optima and degenerate vertices.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximisation problem over nonnegative variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimplexError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded its iteration limit")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Some nonbasic column prices out at zero or some basic variable sits at
    /// zero, so the optimal vertex (or its active set) may not be unique.
    pub degenerate: bool,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> Result<Optimum, SimplexError> {
        Tableau::build(self).run(self)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    /// rows × (cols + 1); the last column is the right-hand side.
    cells: Vec<f64>,
    rows: usize,
    cols: usize,
    kinds: Vec<ColKind>,
    basis: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let rows = lp.constraints.len();
        // Normalise every row to a nonnegative right-hand side first.
        let normalised: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();

        let mut kinds = vec![ColKind::Structural; n];
        let mut slack_col = vec![None; rows];
        let mut art_col = vec![None; rows];
        for (i, (_, rel, _)) in normalised.iter().enumerate() {
            if matches!(rel, Relation::Le | Relation::Ge) {
                slack_col[i] = Some(kinds.len());
                kinds.push(ColKind::Slack);
            }
        }
        for (i, (_, rel, _)) in normalised.iter().enumerate() {
            if matches!(rel, Relation::Ge | Relation::Eq) {
                art_col[i] = Some(kinds.len());
                kinds.push(ColKind::Artificial);
            }
        }
        let cols = kinds.len();
        let width = cols + 1;
        let mut cells = vec![0.0; rows * width];
        let mut basis = vec![0; rows];
        for (i, (coeffs, rel, rhs)) in normalised.iter().enumerate() {
            let row = &mut cells[i * width..(i + 1) * width];
            row[..n].copy_from_slice(coeffs);
            row[cols] = *rhs;
            match rel {
                Relation::Le => {
                    let s = slack_col[i].expect("slack");
                    row[s] = 1.0;
                    basis[i] = s;
                }
                Relation::Ge => {
                    row[slack_col[i].expect("surplus")] = -1.0;
                    let a = art_col[i].expect("artificial");
                    row[a] = 1.0;
                    basis[i] = a;
                }
                Relation::Eq => {
                    let a = art_col[i].expect("artificial");
                    row[a] = 1.0;
                    basis[i] = a;
                }
            }
        }
        Self {
            cells,
            rows,
            cols,
            kinds,
            basis,
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.at(r, c);
        for j in 0..w {
            self.cells[r * w + j] /= p;
        }
        self.cells[r * w + c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                let v = self.cells[r * w + j];
                self.cells[i * w + j] -= f * v;
            }
            self.cells[i * w + c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced costs `c_j − c_Bᵀ B⁻¹ a_j` for a maximisation objective.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (j, r) in rc.iter_mut().enumerate() {
                *r -= cb * self.at(i, j);
            }
        }
        rc
    }

    /// Runs Bland-rule simplex on `cost` restricted to `allowed` columns.
    fn optimise(
        &mut self,
        cost: &[f64],
        allowed: &dyn Fn(usize) -> bool,
    ) -> Result<(), SimplexError> {
        let limit = 50 * (self.rows + self.cols + 10);
        for _ in 0..limit {
            let rc = self.reduced_costs(cost);
            let entering = (0..self.cols).find(|&j| allowed(j) && rc[j] > COST_EPS);
            let Some(c) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14
                                || ((ratio - br).abs() <= 1e-14 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(SimplexError::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(SimplexError::IterationLimit)
    }

    fn run(mut self, lp: &LinearProgram) -> Result<Optimum, SimplexError> {
        let has_artificial = self.kinds.contains(&ColKind::Artificial);
        if has_artificial {
            let phase_one: Vec<f64> = self
                .kinds
                .iter()
                .map(|k| if *k == ColKind::Artificial { -1.0 } else { 0.0 })
                .collect();
            self.optimise(&phase_one, &|_| true)?;
            let infeasibility: f64 = (0..self.rows)
                .filter(|&i| self.kinds[self.basis[i]] == ColKind::Artificial)
                .map(|i| self.rhs(i))
                .sum();
            if infeasibility > FEAS_EPS {
                return Err(SimplexError::Infeasible);
            }
            // Drive artificials at level zero out of the basis where possible.
            for i in 0..self.rows {
                if self.kinds[self.basis[i]] != ColKind::Artificial {
                    continue;
                }
                let replacement = (0..self.cols)
                    .find(|&j| self.kinds[j] != ColKind::Artificial && self.at(i, j).abs() > 1e-9);
                if let Some(j) = replacement {
                    self.pivot(i, j);
                }
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..lp.num_vars()].copy_from_slice(&lp.objective);
        // Artificials left in the basis belong to redundant rows; they stay at
        // zero and are never allowed to re-enter.
        let kinds = self.kinds.clone();
        self.optimise(&cost, &|j| kinds[j] != ColKind::Artificial)?;

        let n = lp.num_vars();
        let mut x = vec![0.0; n];
        let mut degenerate = false;
        for i in 0..self.rows {
            let b = self.basis[i];
            let v = self.rhs(i);
            if b < n {
                x[b] = v.max(0.0);
            }
            if self.kinds[b] != ColKind::Artificial && v.abs() <= DEGENERACY_TOL {
                degenerate = true;
            }
        }
        let rc = self.reduced_costs(&cost);
        for j in 0..self.cols {
            if self.kinds[j] == ColKind::Artificial || self.basis.contains(&j) {
                continue;
            }
            if rc[j].abs() <= DEGENERACY_TOL {
                degenerate = true;
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(Optimum {
            x,
            value,
            degenerate,
        })
    }
}
