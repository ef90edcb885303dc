//! Linear/integer problem description shared by the embedded solver and the
//! interchange-format writer.

use alloc::string::String;
use alloc::vec::Vec;

use num::One;

use crate::ratio::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Continuous in `[0, upper]` (upper optional).
    Continuous,
    /// Binary `{0, 1}`; relaxed to `[0, 1]` inside the simplex.
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    /// Display name, also used in the interchange format. Typically tags
    /// the `(instruction, resource)` pair the variable stands for.
    pub name: String,
    pub kind: VarKind,
    /// Upper bound; `None` means unbounded above. The lower bound is
    /// always zero.
    pub upper: Option<Rat>,
}

impl Variable {
    pub fn continuous(name: String, upper: Option<Rat>) -> Self {
        Self {
            name,
            kind: VarKind::Continuous,
            upper,
        }
    }

    pub fn binary(name: String) -> Self {
        Self {
            name,
            kind: VarKind::Binary,
            upper: Some(Rat::one()),
        }
    }

    pub fn upper_bound(&self) -> Option<Rat> {
        match self.kind {
            VarKind::Binary => Some(Rat::one()),
            VarKind::Continuous => self.upper.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, Rat)>,
    pub cmp: Cmp,
    pub rhs: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, Rat)>,
    pub objective_offset: Rat,
    pub sense: Sense,
    /// True when every feasible integral point has an integer objective,
    /// enabling ceiling-based pruning in branch and bound.
    pub integral_objective: bool,
}

impl LinearProblem {
    pub fn new(name: &str, sense: Sense) -> Self {
        Self {
            name: String::from(name),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_offset: Rat::from_integer(0.into()),
            sense,
            integral_objective: false,
        }
    }

    pub fn add_variable(&mut self, var: Variable) -> usize {
        self.variables.push(var);
        self.variables.len() - 1
    }

    pub fn add_constraint(&mut self, name: String, terms: Vec<(usize, Rat)>, cmp: Cmp, rhs: Rat) {
        self.constraints.push(Constraint {
            name,
            terms,
            cmp,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, Rat)>, offset: Rat) {
        self.objective = terms;
        self.objective_offset = offset;
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
            .collect()
    }
}
