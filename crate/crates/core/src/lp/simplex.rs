//! Two-phase primal simplex over exact rationals.
//!
//! Variables live in `[0, upper]` with the upper bound handled implicitly
//! (no extra rows). Entering and leaving variables follow Bland's rule, so
//! a given problem always pivots the same way and never cycles.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num::{One, Signed, Zero};

use crate::lp::problem::{Cmp, LinearProblem, Sense};
use crate::ratio::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the problem's own sense (already un-negated for
    /// maximization problems).
    pub objective: Rat,
    /// One value per problem variable.
    pub values: Vec<Rat>,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    /// Dense rows over all columns (structural + slack + artificial).
    rows: Vec<Vec<Rat>>,
    /// Current value of the basic variable of each row.
    value: Vec<Rat>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<Option<Rat>>,
    num_cols: usize,
    iterations: usize,
}

impl Tableau {
    /// Pivots for the given costs until optimal or unbounded; returns
    /// false on unboundedness. Pricing picks the steepest eligible reduced
    /// cost with lowest-index ties; after a run of degenerate pivots it
    /// switches to Bland's least-index rule, which cannot cycle, and back
    /// once the objective moves again. Fully deterministic either way.
    fn optimize(&mut self, costs: &[Rat]) -> bool {
        let mut degenerate_streak = 0usize;
        loop {
            self.iterations += 1;
            let bland = degenerate_streak > 40;
            // reduced costs need c_B * T per column; compute row prices once
            let price: Vec<&Rat> = self.basis.iter().map(|&b| &costs[b]).collect();
            let mut entering: Option<(usize, Rat)> = None;
            for j in 0..self.num_cols {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) {
                    continue;
                }
                if self.upper[j].as_ref().is_some_and(|u| u.is_zero()) {
                    continue; // fixed variable
                }
                let mut d = costs[j].clone();
                for (i, row) in self.rows.iter().enumerate() {
                    if !row[j].is_zero() && !price[i].is_zero() {
                        d -= &*price[i] * &row[j];
                    }
                }
                let gain = match st {
                    VarState::AtLower => -d,
                    VarState::AtUpper => d,
                    VarState::Basic(_) => unreachable!(),
                };
                if gain.is_positive() {
                    if bland {
                        entering = Some((j, gain));
                        break;
                    }
                    match &entering {
                        Some((_, g)) if *g >= gain => {}
                        _ => entering = Some((j, gain)),
                    }
                }
            }
            let Some((j, _)) = entering else {
                return true;
            };
            // moving x_j by t >= 0 toward the opposite bound changes basic i
            // by -dir * T[i][j] * t
            let dir_up = self.state[j] == VarState::AtLower;
            let mut best: Option<(Rat, usize, usize)> = None; // (t, basis var, row)
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[j];
                if a.is_zero() {
                    continue;
                }
                let delta_neg = if dir_up { a.is_positive() } else { a.is_negative() };
                let limit = if delta_neg {
                    // basic decreases toward 0
                    &self.value[i] / a.abs()
                } else {
                    // basic increases toward its upper bound
                    match &self.upper[self.basis[i]] {
                        Some(u) => (u - &self.value[i]) / a.abs(),
                        None => continue,
                    }
                };
                let replace = match &best {
                    None => true,
                    Some((t, bvar, _)) => {
                        limit < *t || (limit == *t && self.basis[i] < *bvar)
                    }
                };
                if replace {
                    best = Some((limit, self.basis[i], i));
                }
            }
            let own = self.upper[j].clone();
            match (own, best) {
                (Some(u), Some((t, _, _))) if u <= t => {
                    if u.is_zero() {
                        degenerate_streak += 1;
                    } else {
                        degenerate_streak = 0;
                    }
                    self.flip(j, &u, dir_up)
                }
                (Some(u), None) => {
                    degenerate_streak = 0;
                    self.flip(j, &u, dir_up)
                }
                (_, Some((t, _, row))) => {
                    if t.is_zero() {
                        degenerate_streak += 1;
                    } else {
                        degenerate_streak = 0;
                    }
                    self.pivot(row, j, &t, dir_up)
                }
                (None, None) => return false, // unbounded ray
            }
        }
    }

    /// Nonbasic variable jumps to its other bound.
    fn flip(&mut self, j: usize, dist: &Rat, dir_up: bool) {
        for i in 0..self.rows.len() {
            let a = &self.rows[i][j];
            if a.is_zero() {
                continue;
            }
            let change = if dir_up { -(a * dist) } else { a * dist };
            self.value[i] += change;
        }
        self.state[j] = if dir_up { VarState::AtUpper } else { VarState::AtLower };
    }

    fn pivot(&mut self, row: usize, j: usize, t: &Rat, dir_up: bool) {
        // update basic values for the move of size t
        for i in 0..self.rows.len() {
            let a = &self.rows[i][j];
            if a.is_zero() {
                continue;
            }
            let change = if dir_up { -(a * t) } else { a * t };
            self.value[i] += change;
        }
        let leaving = self.basis[row];
        // leaving variable sits at whichever bound it hit
        self.state[leaving] = if self.value[row].is_zero() {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        let entering_value = match self.state[j] {
            VarState::AtLower => t.clone(),
            VarState::AtUpper => self.upper[j].clone().expect("at-upper needs bound") - t,
            VarState::Basic(_) => unreachable!("entering variable was basic"),
        };
        self.basis[row] = j;
        self.state[j] = VarState::Basic(row);
        self.value[row] = entering_value;
        // row reduction
        let piv = self.rows[row][j].clone();
        if !piv.is_one() {
            for x in self.rows[row].iter_mut() {
                if !x.is_zero() {
                    *x /= &piv;
                }
            }
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][j].clone();
            if factor.is_zero() {
                continue;
            }
            let (target, source) = {
                // split borrows
                let (a, b) = if i < row {
                    let (lo, hi) = self.rows.split_at_mut(row);
                    (&mut lo[i], &hi[0])
                } else {
                    let (lo, hi) = self.rows.split_at_mut(i);
                    (&mut hi[0], &lo[row])
                };
                (a, b)
            };
            for (x, s) in target.iter_mut().zip(source.iter()) {
                if !s.is_zero() {
                    *x -= &factor * s;
                }
            }
        }
    }
}

/// Solves the LP relaxation of `problem` (binary variables treated as
/// continuous in `[0, 1]`).
pub fn solve_relaxation(problem: &LinearProblem) -> LpSolution {
    let n = problem.variables.len();
    let minimize = problem.sense == Sense::Minimize;

    // row normalization: rhs >= 0
    struct Row {
        coeffs: Vec<(usize, Rat)>,
        cmp: Cmp,
        rhs: Rat,
    }
    let rows: Vec<Row> = problem
        .constraints
        .iter()
        .map(|c| {
            if c.rhs.is_negative() {
                Row {
                    coeffs: c.terms.iter().map(|(v, a)| (*v, -a)).collect(),
                    cmp: match c.cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    },
                    rhs: -&c.rhs,
                }
            } else {
                Row {
                    coeffs: c.terms.clone(),
                    cmp: c.cmp,
                    rhs: c.rhs.clone(),
                }
            }
        })
        .collect();

    let m = rows.len();
    let num_slack = rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
    let num_art = rows.iter().filter(|r| r.cmp != Cmp::Le).count();
    let num_cols = n + num_slack + num_art;

    let mut tab = Tableau {
        rows: vec![vec![Rat::zero(); num_cols]; m],
        value: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        state: vec![VarState::AtLower; num_cols],
        upper: Vec::with_capacity(num_cols),
        num_cols,
        iterations: 0,
    };
    for v in &problem.variables {
        tab.upper.push(v.upper_bound());
    }
    tab.upper.resize(num_cols, None);

    let mut phase1 = vec![Rat::zero(); num_cols];
    let mut slack_at = n;
    let mut art_at = n + num_slack;
    for (i, r) in rows.iter().enumerate() {
        for (v, a) in &r.coeffs {
            tab.rows[i][*v] += a; // accumulate duplicate terms
        }
        match r.cmp {
            Cmp::Le => {
                tab.rows[i][slack_at] = Rat::one();
                tab.basis.push(slack_at);
                tab.state[slack_at] = VarState::Basic(i);
                slack_at += 1;
            }
            Cmp::Ge => {
                tab.rows[i][slack_at] = -Rat::one();
                slack_at += 1;
                tab.rows[i][art_at] = Rat::one();
                phase1[art_at] = Rat::one();
                tab.basis.push(art_at);
                tab.state[art_at] = VarState::Basic(i);
                art_at += 1;
            }
            Cmp::Eq => {
                tab.rows[i][art_at] = Rat::one();
                phase1[art_at] = Rat::one();
                tab.basis.push(art_at);
                tab.state[art_at] = VarState::Basic(i);
                art_at += 1;
            }
        }
        tab.value.push(r.rhs.clone());
    }

    if num_art > 0 {
        if !tab.optimize(&phase1) {
            unreachable!("phase 1 objective is bounded below by zero");
        }
        let infeas: Rat = tab
            .basis
            .iter()
            .zip(&tab.value)
            .filter(|(b, _)| **b >= n + num_slack)
            .map(|(_, v)| v.clone())
            .sum();
        if !infeas.is_zero() {
            return LpSolution {
                status: LpStatus::Infeasible,
                objective: Rat::zero(),
                values: vec![Rat::zero(); n],
                iterations: tab.iterations,
            };
        }
        for j in (n + num_slack)..num_cols {
            tab.upper[j] = Some(Rat::zero());
        }
    }

    let mut costs = vec![Rat::zero(); num_cols];
    for (v, a) in &problem.objective {
        costs[*v] += if minimize { a.clone() } else { -a };
    }
    if !tab.optimize(&costs) {
        return LpSolution {
            status: LpStatus::Unbounded,
            objective: Rat::zero(),
            values: vec![Rat::zero(); n],
            iterations: tab.iterations,
        };
    }

    let mut values = vec![Rat::zero(); n];
    for j in 0..n {
        values[j] = match tab.state[j] {
            VarState::Basic(i) => tab.value[i].clone(),
            VarState::AtLower => Rat::zero(),
            VarState::AtUpper => tab.upper[j].clone().expect("at-upper needs bound"),
        };
    }
    let mut obj = problem.objective_offset.clone();
    for (v, a) in &problem.objective {
        obj += a * &values[*v];
    }
    LpSolution {
        status: LpStatus::Optimal,
        objective: obj,
        values,
        iterations: tab.iterations,
    }
}

/// One-line summary for solver logs.
pub fn describe(sol: &LpSolution) -> String {
    format!(
        "status={:?} iterations={} objective={}",
        sol.status,
        sol.iterations,
        crate::ratio::display(&sol.objective)
    )
}
