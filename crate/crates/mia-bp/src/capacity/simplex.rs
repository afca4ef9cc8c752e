//! Dense two-phase simplex over exact rationals.
//!
//! Bland's smallest-index rule for both the entering and leaving choice, so
//! the method terminates on degenerate instances. All variables are
//! implicitly nonnegative; free variables must be split by the caller. The
//! instances this crate builds are desk-scale (at most a few hundred rows),
//! so the tableau is dense and reduced costs are recomputed per iteration
//! rather than carried.

use num::{One, Signed, Zero};

use crate::rational::Rat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    /// Maximizer found; `solution` holds one optimal assignment of the
    /// structural variables.
    Optimal { objective: Rat, solution: Vec<Rat> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

#[derive(Debug, Clone)]
pub struct LpBuilder {
    n_vars: usize,
    objective: Vec<Rat>,
    rows: Vec<(Vec<Rat>, Cmp, Rat)>,
}

impl LpBuilder {
    pub fn new(n_vars: usize) -> Self {
        LpBuilder {
            n_vars,
            objective: vec![Rat::zero(); n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Sets the maximization coefficient of one variable.
    pub fn objective(&mut self, var: usize, coeff: Rat) {
        assert!(var < self.n_vars, "objective variable out of range");
        self.objective[var] = coeff;
    }

    /// Adds `sum(coeff * x_var) cmp rhs`. Repeated variables accumulate.
    pub fn constraint(&mut self, coeffs: &[(usize, Rat)], cmp: Cmp, rhs: Rat) {
        let mut row = vec![Rat::zero(); self.n_vars];
        for (var, c) in coeffs {
            assert!(*var < self.n_vars, "constraint variable out of range");
            row[*var] += c;
        }
        self.rows.push((row, cmp, rhs));
    }

    /// Two-phase simplex maximization.
    pub fn solve(&self) -> LpOutcome {
        let n = self.n_vars;
        let m = self.rows.len();

        // Normalize right-hand sides to be nonnegative, then lay out columns
        // as [structural | slack/surplus | artificial].
        let mut rows: Vec<(Vec<Rat>, Cmp, Rat)> = self.rows.clone();
        for (row, cmp, rhs) in &mut rows {
            if rhs.is_negative() {
                for c in row.iter_mut() {
                    *c = -c.clone();
                }
                *rhs = -rhs.clone();
                *cmp = match *cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
            }
        }

        let n_slack = rows.iter().filter(|(_, c, _)| *c != Cmp::Eq).count();
        let n_art = rows.iter().filter(|(_, c, _)| *c != Cmp::Le).count();
        let total = n + n_slack + n_art;

        let mut t: Vec<Vec<Rat>> = Vec::with_capacity(m);
        let mut rhs: Vec<Rat> = Vec::with_capacity(m);
        let mut basis: Vec<usize> = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = n + n_slack;
        for (row, cmp, b) in rows {
            let mut full = vec![Rat::zero(); total];
            full[..n].clone_from_slice(&row);
            match cmp {
                Cmp::Le => {
                    full[next_slack] = Rat::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Cmp::Ge => {
                    full[next_slack] = -Rat::one();
                    next_slack += 1;
                    full[next_art] = Rat::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Cmp::Eq => {
                    full[next_art] = Rat::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            t.push(full);
            rhs.push(b);
        }

        // Phase 1: maximize minus the sum of artificials.
        if n_art > 0 {
            let mut phase1 = vec![Rat::zero(); total];
            for c in phase1.iter_mut().skip(n + n_slack) {
                *c = -Rat::one();
            }
            if run_simplex(&mut t, &mut rhs, &mut basis, &phase1).is_err() {
                unreachable!("phase-1 objective is bounded above by zero");
            }
            let w: Rat = basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= n + n_slack)
                .map(|(i, _)| rhs[i].clone())
                .sum();
            if !w.is_zero() {
                return LpOutcome::Infeasible;
            }
            // Pivot leftover artificials out of the basis; a row where no
            // genuine column can enter is redundant and is dropped.
            let mut i = 0;
            while i < t.len() {
                if basis[i] >= n + n_slack {
                    match (0..n + n_slack).find(|&j| !t[i][j].is_zero()) {
                        Some(j) => pivot(&mut t, &mut rhs, &mut basis, i, j),
                        None => {
                            t.remove(i);
                            rhs.remove(i);
                            basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
            // Artificial columns must never re-enter; drop them.
            for row in &mut t {
                row.truncate(n + n_slack);
            }
        }

        // Phase 2: the real objective.
        let mut costs = vec![Rat::zero(); n + n_slack];
        costs[..n].clone_from_slice(&self.objective);
        if run_simplex(&mut t, &mut rhs, &mut basis, &costs).is_err() {
            return LpOutcome::Unbounded;
        }

        let mut solution = vec![Rat::zero(); n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                solution[b] = rhs[i].clone();
            }
        }
        let objective = self
            .objective
            .iter()
            .zip(&solution)
            .map(|(c, x)| c * x)
            .sum();
        LpOutcome::Optimal {
            objective,
            solution,
        }
    }
}

struct Unbounded;

/// Runs Bland-rule simplex to optimality on a tableau already in canonical
/// form for `basis`. Errors when the objective is unbounded above.
fn run_simplex(
    t: &mut [Vec<Rat>],
    rhs: &mut [Rat],
    basis: &mut [usize],
    costs: &[Rat],
) -> Result<(), Unbounded> {
    let width = t.first().map(|r| r.len()).unwrap_or(0);
    loop {
        // Entering column: smallest index with positive reduced cost.
        let mut entering = None;
        for j in 0..width {
            if basis.contains(&j) {
                continue;
            }
            let mut reduced = costs[j].clone();
            for (i, row) in t.iter().enumerate() {
                if !row[j].is_zero() {
                    reduced -= &costs[basis[i]] * &row[j];
                }
            }
            if reduced.is_positive() {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            // No rows at all: any positive cost is unbounded (x free to grow).
            if t.is_empty() && costs.iter().any(|c| c.is_positive()) {
                return Err(Unbounded);
            }
            return Ok(());
        };

        // Leaving row: minimum ratio, ties by smallest basis index.
        let mut leaving: Option<(usize, Rat)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[j].is_positive() {
                let ratio = &rhs[i] / &row[j];
                let better = match &leaving {
                    None => true,
                    Some((li, best)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*li])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((i, _)) = leaving else {
            return Err(Unbounded);
        };
        pivot(t, rhs, basis, i, j);
    }
}

fn pivot(t: &mut [Vec<Rat>], rhs: &mut [Rat], basis: &mut [usize], pr: usize, pc: usize) {
    let p = t[pr][pc].clone();
    for c in t[pr].iter_mut() {
        *c /= &p;
    }
    rhs[pr] /= &p;
    for i in 0..t.len() {
        if i == pr || t[i][pc].is_zero() {
            continue;
        }
        let factor = t[i][pc].clone();
        let pivot_row = t[pr].clone();
        for (c, pv) in t[i].iter_mut().zip(&pivot_row) {
            *c -= &factor * pv;
        }
        let delta = &factor * &rhs[pr];
        rhs[i] -= delta;
    }
    basis[pr] = pc;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn optimal(outcome: LpOutcome) -> (Rat, Vec<Rat>) {
        match outcome {
            LpOutcome::Optimal {
                objective,
                solution,
            } => (objective, solution),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn single_upper_bound() {
        let mut lp = LpBuilder::new(1);
        lp.objective(0, rat(1, 1));
        lp.constraint(&[(0, rat(1, 1))], Cmp::Le, rat(3, 1));
        let (obj, x) = optimal(lp.solve());
        assert_eq!(obj, rat(3, 1));
        assert_eq!(x[0], rat(3, 1));
    }

    #[test]
    fn two_variable_vertex() {
        // max x + y, x + 2y <= 4, 3x + y <= 6: optimum at (8/5, 6/5).
        let mut lp = LpBuilder::new(2);
        lp.objective(0, rat(1, 1));
        lp.objective(1, rat(1, 1));
        lp.constraint(&[(0, rat(1, 1)), (1, rat(2, 1))], Cmp::Le, rat(4, 1));
        lp.constraint(&[(0, rat(3, 1)), (1, rat(1, 1))], Cmp::Le, rat(6, 1));
        let (obj, x) = optimal(lp.solve());
        assert_eq!(obj, rat(14, 5));
        assert_eq!(x, vec![rat(8, 5), rat(6, 5)]);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LpBuilder::new(1);
        lp.constraint(&[(0, rat(1, 1))], Cmp::Le, rat(-1, 1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LpBuilder::new(1);
        lp.objective(0, rat(1, 1));
        lp.constraint(&[(0, rat(1, 1))], Cmp::Ge, rat(1, 1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn unconstrained_positive_cost_is_unbounded() {
        let mut lp = LpBuilder::new(2);
        lp.objective(1, rat(1, 1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_constraints() {
        // max y subject to x + y = 2, x - y = 0.
        let mut lp = LpBuilder::new(2);
        lp.objective(1, rat(1, 1));
        lp.constraint(&[(0, rat(1, 1)), (1, rat(1, 1))], Cmp::Eq, rat(2, 1));
        lp.constraint(&[(0, rat(1, 1)), (1, rat(-1, 1))], Cmp::Eq, rat(0, 1));
        let (obj, x) = optimal(lp.solve());
        assert_eq!(obj, rat(1, 1));
        assert_eq!(x, vec![rat(1, 1), rat(1, 1)]);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LpBuilder::new(2);
        lp.objective(0, rat(1, 1));
        for _ in 0..2 {
            lp.constraint(&[(0, rat(1, 1)), (1, rat(1, 1))], Cmp::Eq, rat(1, 1));
        }
        let (obj, _) = optimal(lp.solve());
        assert_eq!(obj, rat(1, 1));
    }

    #[test]
    fn beale_degenerate_instance_terminates() {
        // Beale's classic cycling example; Bland's rule must reach the
        // optimum 1/20 at x = (1/25, 0, 1, 0).
        let mut lp = LpBuilder::new(4);
        lp.objective(0, rat(3, 4));
        lp.objective(1, rat(-150, 1));
        lp.objective(2, rat(1, 50));
        lp.objective(3, rat(-6, 1));
        lp.constraint(
            &[
                (0, rat(1, 4)),
                (1, rat(-60, 1)),
                (2, rat(-1, 25)),
                (3, rat(9, 1)),
            ],
            Cmp::Le,
            rat(0, 1),
        );
        lp.constraint(
            &[
                (0, rat(1, 2)),
                (1, rat(-90, 1)),
                (2, rat(-1, 50)),
                (3, rat(3, 1)),
            ],
            Cmp::Le,
            rat(0, 1),
        );
        lp.constraint(&[(2, rat(1, 1))], Cmp::Le, rat(1, 1));
        let (obj, x) = optimal(lp.solve());
        assert_eq!(obj, rat(1, 20));
        assert_eq!(x, vec![rat(1, 25), rat(0, 1), rat(1, 1), rat(0, 1)]);
    }

    #[test]
    fn duplicate_variables_in_a_row_accumulate() {
        let mut lp = LpBuilder::new(1);
        lp.objective(0, rat(1, 1));
        lp.constraint(&[(0, rat(1, 2)), (0, rat(1, 2))], Cmp::Le, rat(5, 1));
        let (obj, _) = optimal(lp.solve());
        assert_eq!(obj, rat(5, 1));
    }

    #[test]
    fn mixed_senses_with_negative_rhs() {
        // max x subject to -x <= -2 (i.e. x >= 2) and x <= 5.
        let mut lp = LpBuilder::new(1);
        lp.objective(0, rat(1, 1));
        lp.constraint(&[(0, rat(-1, 1))], Cmp::Le, rat(-2, 1));
        lp.constraint(&[(0, rat(1, 1))], Cmp::Le, rat(5, 1));
        let (obj, x) = optimal(lp.solve());
        assert_eq!(obj, rat(5, 1));
        assert_eq!(x[0], rat(5, 1));
    }
}
