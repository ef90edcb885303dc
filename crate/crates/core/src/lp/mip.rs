//! Branch and bound over the binary variables of a [`LinearProblem`].
//!
//! Nodes substitute fixed binaries into a reduced LP, so the simplex only
//! ever sees variables with lower bound zero. Search order is depth first
//! with most-fractional branching, ties broken on the lowest variable
//! index; together with Bland's rule in the simplex this makes the whole
//! solve deterministic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num::{One, Signed, Zero};

use crate::lp::problem::{LinearProblem, Sense, VarKind, Variable};
use crate::lp::simplex::{solve_relaxation, LpStatus};
use crate::ratio::{display, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node budget exhausted before proving optimality.
    NodeLimit,
}

/// Result of [`solve`]: status, objective in the problem's sense, one value
/// per variable, and a short log of what the solver did.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Rat,
    pub values: Vec<Rat>,
    pub log: String,
}

const DEFAULT_NODE_LIMIT: usize = 500_000;

/// Exact optimum of an LP or small MILP.
pub fn solve(problem: &LinearProblem) -> Solution {
    solve_with_limit(problem, DEFAULT_NODE_LIMIT)
}

pub fn solve_with_limit(problem: &LinearProblem, node_limit: usize) -> Solution {
    let binaries = problem.binary_indices();
    if binaries.is_empty() {
        let relax = solve_relaxation(problem);
        let log = format!("lp {}", crate::lp::simplex::describe(&relax));
        return Solution {
            status: match relax.status {
                LpStatus::Optimal => SolveStatus::Optimal,
                LpStatus::Infeasible => SolveStatus::Infeasible,
                LpStatus::Unbounded => SolveStatus::Unbounded,
            },
            objective: relax.objective.clone(),
            values: relax.values,
            log,
        };
    }

    // canonicalize to minimization
    let minimize = problem.sense == Sense::Minimize;
    let sign = |x: &Rat| if minimize { x.clone() } else { -x };

    let mut best: Option<(Rat, Vec<Rat>)> = None;
    let mut stack: Vec<BTreeMap<usize, bool>> = alloc::vec![BTreeMap::new()];
    let mut nodes = 0usize;
    let mut truncated = false;

    while let Some(assign) = stack.pop() {
        if nodes >= node_limit {
            truncated = true;
            break;
        }
        nodes += 1;
        let (sub, back) = substitute(problem, &assign);
        let relax = solve_relaxation(&sub);
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // with all binaries bounded this means the continuous part
                // is unbounded regardless of the integer assignment
                return Solution {
                    status: SolveStatus::Unbounded,
                    objective: Rat::zero(),
                    values: alloc::vec![Rat::zero(); problem.variables.len()],
                    log: format!("unbounded after {nodes} nodes"),
                };
            }
            LpStatus::Optimal => {}
        }
        let bound = sign(&relax.objective);
        if let Some((incumbent, _)) = &best {
            let effective = if problem.integral_objective {
                bound.ceil()
            } else {
                bound.clone()
            };
            if effective >= *incumbent {
                continue;
            }
        }
        // find the most fractional free binary
        let mut branch: Option<(usize, Rat)> = None;
        let half = Rat::new(1.into(), 2.into());
        for &b in &binaries {
            if assign.contains_key(&b) {
                continue;
            }
            let v = &relax.values[back[b].expect("free binary kept")];
            if v.is_zero() || v.is_one() {
                continue;
            }
            let dist = (v - &half).abs();
            match &branch {
                Some((_, d)) if *d <= dist => {}
                _ => branch = Some((b, dist)),
            }
        }
        match branch {
            None => {
                // integral: candidate incumbent
                let full = reconstruct(problem, &assign, &back, &relax.values);
                let obj = bound;
                if best.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                    best = Some((obj, full));
                }
            }
            Some((b, _)) => {
                let v = &relax.values[back[b].expect("free binary kept")];
                let near = v >= &half;
                let mut far_assign = assign.clone();
                far_assign.insert(b, !near);
                let mut near_assign = assign;
                near_assign.insert(b, near);
                stack.push(far_assign);
                stack.push(near_assign); // explored first
            }
        }
    }

    match best {
        Some((obj, values)) => {
            let objective = if minimize { obj } else { -obj };
            Solution {
                log: format!(
                    "branch-and-bound nodes={nodes} objective={}{}",
                    display(&objective),
                    if truncated { " (node limit hit)" } else { "" }
                ),
                status: if truncated {
                    SolveStatus::NodeLimit
                } else {
                    SolveStatus::Optimal
                },
                objective,
                values,
            }
        }
        None => Solution {
            status: if truncated {
                SolveStatus::NodeLimit
            } else {
                SolveStatus::Infeasible
            },
            objective: Rat::zero(),
            values: alloc::vec![Rat::zero(); problem.variables.len()],
            log: format!("no integral solution after {nodes} nodes"),
        },
    }
}

/// Builds the sub-LP with the given binaries fixed, returning it together
/// with the old-index to new-index map.
fn substitute(
    problem: &LinearProblem,
    assign: &BTreeMap<usize, bool>,
) -> (LinearProblem, Vec<Option<usize>>) {
    let mut sub = LinearProblem::new(&problem.name, problem.sense);
    sub.integral_objective = problem.integral_objective;
    let mut back: Vec<Option<usize>> = alloc::vec![None; problem.variables.len()];
    for (i, v) in problem.variables.iter().enumerate() {
        if assign.contains_key(&i) {
            continue;
        }
        // free binaries relax to [0, 1]
        let kept = Variable {
            name: v.name.clone(),
            kind: VarKind::Continuous,
            upper: v.upper_bound(),
        };
        back[i] = Some(sub.add_variable(kept));
    }
    let value_of = |i: usize| -> Rat {
        if assign[&i] {
            Rat::one()
        } else {
            Rat::zero()
        }
    };
    for c in &problem.constraints {
        let mut terms = Vec::new();
        let mut rhs = c.rhs.clone();
        for (v, a) in &c.terms {
            match back[*v] {
                Some(nv) => terms.push((nv, a.clone())),
                None => rhs -= a * value_of(*v),
            }
        }
        sub.add_constraint(c.name.clone(), terms, c.cmp, rhs);
    }
    let mut obj = Vec::new();
    let mut offset = problem.objective_offset.clone();
    for (v, a) in &problem.objective {
        match back[*v] {
            Some(nv) => obj.push((nv, a.clone())),
            None => offset += a * value_of(*v),
        }
    }
    sub.set_objective(obj, offset);
    (sub, back)
}

fn reconstruct(
    problem: &LinearProblem,
    assign: &BTreeMap<usize, bool>,
    back: &[Option<usize>],
    sub_values: &[Rat],
) -> Vec<Rat> {
    (0..problem.variables.len())
        .map(|i| match back[i] {
            Some(nv) => sub_values[nv].clone(),
            None => {
                if assign[&i] {
                    Rat::one()
                } else {
                    Rat::zero()
                }
            }
        })
        .collect()
}
