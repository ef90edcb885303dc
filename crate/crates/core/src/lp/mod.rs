//! Linear-programming layer: an embedded exact solver plus the encodings of
//! the shape ILP, the Bipartite Weight Problem, and the per-instruction
//! completion problem.

pub mod format;
pub mod mip;
pub mod problem;
pub mod simplex;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num::bigint::BigInt;
use num::{One, Signed, Zero};

use crate::model::Microkernel;
use crate::ratio::{display, Rat};

pub use format::to_lp_format;
pub use mip::{solve, solve_with_limit, Solution, SolveStatus};
pub use problem::{Cmp, Constraint, LinearProblem, Sense, VarKind, Variable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    /// No shape with at most `r_max` resources satisfies the constraints.
    InfeasibleShape { r_max: usize },
    Infeasible(String),
    Unbounded(String),
    BadInput(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::InfeasibleShape { r_max } => {
                write!(f, "no mapping shape with at most {r_max} resources")
            }
            LpError::Infeasible(s) => write!(f, "infeasible problem: {s}"),
            LpError::Unbounded(s) => write!(f, "unbounded problem: {s}"),
            LpError::BadInput(s) => write!(f, "bad solver input: {s}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LpError {}

/// A measured microkernel: realized (integer) multiplicities and the IPC
/// recorded for exactly that kernel.
#[derive(Debug, Clone)]
pub struct KernelObs {
    pub kernel: Microkernel,
    pub key: String,
    pub ipc: Rat,
}

impl KernelObs {
    pub fn new(kernel: Microkernel, ipc: Rat) -> Self {
        let key = kernel.canonical_key().expect("measured kernels are integral");
        Self { kernel, key, ipc }
    }

    /// Measured execution time `|K| / ipc(K)`.
    pub fn cycles(&self) -> Rat {
        self.kernel.size() / &self.ipc
    }
}

/// Everything the shape problem needs to know.
#[derive(Debug, Clone)]
pub struct ShapeInput {
    /// The basic instructions, sorted; instruction indices below refer to
    /// this ordering.
    pub instructions: Vec<String>,
    pub very_basic: Vec<String>,
    pub most_greedy: Vec<String>,
    /// For each most-greedy instruction, the basic instructions it is
    /// *not* pairwise IPC-additive with.
    pub contended: BTreeMap<String, BTreeSet<String>>,
    pub kernels: Vec<KernelObs>,
    pub solo_ipc: BTreeMap<String, Rat>,
    pub r_max: usize,
    /// Relative tolerance for the `cycles(i^a) = cycles(k)` saturation test.
    pub tol: Rat,
}

/// Boolean edge support of the core mapping: one user set per resource, in
/// canonical order (resources named `R0..`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeResult {
    pub instructions: Vec<String>,
    pub columns: Vec<BTreeSet<usize>>,
}

impl ShapeResult {
    pub fn num_resources(&self) -> usize {
        self.columns.len()
    }

    pub fn has_edge(&self, inst_idx: usize, col: usize) -> bool {
        self.columns[col].contains(&inst_idx)
    }

    pub fn instruction_index(&self, name: &str) -> Option<usize> {
        self.instructions.iter().position(|n| n == name)
    }

    /// The support as a set of user-name sets, for renaming-insensitive
    /// comparisons.
    pub fn support_sets(&self) -> BTreeSet<BTreeSet<String>> {
        self.columns
            .iter()
            .map(|col| {
                col.iter()
                    .map(|i| self.instructions[*i].clone())
                    .collect()
            })
            .collect()
    }
}

/// One disjunctive constraint over shape columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ShapeReq {
    /// Some resource is used by every listed instruction.
    Cover(BTreeSet<usize>),
    /// Some resource is used by `inst` and by none of `from`.
    Separate { inst: usize, from: BTreeSet<usize> },
}

/// Translates measurements into shape requirements, mirroring the four
/// constraint families of the shape ILP.
pub fn derive_requirements(input: &ShapeInput) -> Result<Vec<ShapeReq>, LpError> {
    let idx: BTreeMap<&str, usize> = input
        .instructions
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let of = |name: &str| -> Result<usize, LpError> {
        idx.get(name)
            .copied()
            .ok_or_else(|| LpError::BadInput(format!("`{name}` is not a basic instruction")))
    };
    let mut reqs = BTreeSet::new();
    for vb in &input.very_basic {
        let i = of(vb)?;
        let from: BTreeSet<usize> = input
            .very_basic
            .iter()
            .filter(|o| *o != vb)
            .map(|o| of(o))
            .collect::<Result<_, _>>()?;
        reqs.insert(ShapeReq::Separate { inst: i, from });
    }
    for mf in &input.most_greedy {
        let i = of(mf)?;
        let mut s: BTreeSet<usize> = match input.contended.get(mf) {
            Some(set) => set.iter().map(|o| of(o)).collect::<Result<_, _>>()?,
            None => BTreeSet::new(),
        };
        s.insert(i);
        reqs.insert(ShapeReq::Cover(s));
    }
    for obs in &input.kernels {
        let t = obs.cycles();
        let mut support = BTreeSet::new();
        let mut saturating = Vec::new();
        for (name, mult) in obs.kernel.terms() {
            let i = of(name)?;
            support.insert(i);
            let solo = input
                .solo_ipc
                .get(name)
                .ok_or_else(|| LpError::BadInput(format!("missing solo ipc for `{name}`")))?;
            let part = mult / solo;
            if (&part - &t).abs() <= &input.tol * &t {
                saturating.push(i);
            }
        }
        if saturating.is_empty() {
            reqs.insert(ShapeReq::Cover(support));
        } else {
            for i in saturating {
                let mut from = support.clone();
                from.remove(&i);
                reqs.insert(ShapeReq::Separate { inst: i, from });
            }
        }
    }
    // Keep only the strongest separation requirements (a witness avoiding a
    // superset also avoids the subset). Covers are NOT collapsed into their
    // supersets even though satisfaction-wise they could be: distinct cover
    // sets are the material the search unions into intermediate resources.
    let all: Vec<ShapeReq> = reqs.into_iter().collect();
    let implied = |a: &ShapeReq, b: &ShapeReq| -> bool {
        // does satisfying b imply satisfying a?
        match (a, b) {
            (
                ShapeReq::Separate { inst: i1, from: f1 },
                ShapeReq::Separate { inst: i2, from: f2 },
            ) => i1 == i2 && f1 != f2 && f1.is_subset(f2),
            (ShapeReq::Cover(s1), ShapeReq::Separate { inst, .. }) => {
                s1.len() == 1 && s1.contains(inst)
            }
            _ => false,
        }
    };
    Ok(all
        .iter()
        .filter(|a| !all.iter().any(|b| implied(a, b)))
        .cloned()
        .collect())
}

fn req_required(req: &ShapeReq) -> BTreeSet<usize> {
    match req {
        ShapeReq::Cover(s) => s.clone(),
        ShapeReq::Separate { inst, .. } => [*inst].into_iter().collect(),
    }
}

fn req_forbidden(req: &ShapeReq) -> BTreeSet<usize> {
    match req {
        ShapeReq::Cover(_) => BTreeSet::new(),
        ShapeReq::Separate { from, .. } => from.clone(),
    }
}

fn canonicalize_columns(n: usize, mut columns: Vec<BTreeSet<usize>>) -> Vec<BTreeSet<usize>> {
    columns.retain(|c| !c.is_empty());
    columns.sort_by(|a, b| {
        let vec_of = |c: &BTreeSet<usize>| -> Vec<bool> { (0..n).map(|i| c.contains(&i)).collect() };
        vec_of(b).cmp(&vec_of(a)).then_with(|| a.cmp(b))
    });
    columns.dedup();
    columns
}

/// Exact minimum-resource shapes. Two requirements can share a resource
/// exactly when neither forbids an instruction the other needs, so the
/// fewest-resources question is a minimum graph coloring of the conflict
/// graph, solved by branch and bound with a greedy clique seed. Each color
/// class becomes one resource whose user set is the union of the class's
/// required instructions.
///
/// Several optimal colorings can induce different (equally small) edge
/// supports; this returns up to `max_candidates` distinct supports, minimal
/// resource counts first, deterministically ordered. The caller screens
/// them with the weight problem.
pub fn shape_candidates(
    input: &ShapeInput,
    max_candidates: usize,
) -> Result<Vec<ShapeResult>, LpError> {
    let reqs = derive_requirements(input)?;
    let n = input.instructions.len();
    if reqs.is_empty() {
        return Ok(alloc::vec![ShapeResult {
            instructions: input.instructions.clone(),
            columns: Vec::new(),
        }]);
    }
    let n_req = reqs.len();
    let required: Vec<BTreeSet<usize>> = reqs.iter().map(req_required).collect();
    let forbidden: Vec<BTreeSet<usize>> = reqs.iter().map(req_forbidden).collect();
    let conflicts = |a: usize, b: usize| -> bool {
        required[a].intersection(&forbidden[b]).next().is_some()
            || required[b].intersection(&forbidden[a]).next().is_some()
    };
    let mut adj = alloc::vec![alloc::vec![false; n_req]; n_req];
    let mut degree = alloc::vec![0usize; n_req];
    for a in 0..n_req {
        for b in (a + 1)..n_req {
            if conflicts(a, b) {
                adj[a][b] = true;
                adj[b][a] = true;
                degree[a] += 1;
                degree[b] += 1;
            }
        }
    }

    // vertex order: greedy clique first (pinned to distinct colors, which
    // breaks the color-permutation symmetry), then descending degree
    let mut by_degree: Vec<usize> = (0..n_req).collect();
    by_degree.sort_by(|a, b| degree[*b].cmp(&degree[*a]).then(a.cmp(b)));
    let mut clique: Vec<usize> = Vec::new();
    for &v in &by_degree {
        if clique.iter().all(|&u| adj[u][v]) {
            clique.push(v);
        }
    }
    let mut order = clique.clone();
    for &v in &by_degree {
        if !order.contains(&v) {
            order.push(v);
        }
    }

    if n > 64 {
        return Err(LpError::BadInput("more than 64 instructions".into()));
    }
    let mask = |s: &BTreeSet<usize>| -> u64 { s.iter().fold(0u64, |m, i| m | (1 << i)) };
    let req_mask: Vec<u64> = required.iter().map(&mask).collect();
    let forb_mask: Vec<u64> = forbidden.iter().map(&mask).collect();

    // a class admits a requirement iff their masks do not clash, so only
    // the (required, forbidden) union signature of each class matters;
    // states with equal signature multisets at the same depth complete to
    // the same families, which the memo exploits
    struct Search<'a> {
        order: &'a [usize],
        req_mask: &'a [u64],
        forb_mask: &'a [u64],
        clique_len: usize,
        color_cap: usize,
        families: Vec<Vec<u64>>,
        seen_families: BTreeSet<Vec<u64>>,
        memo: BTreeSet<(usize, Vec<(u64, u64)>)>,
        collect_cap: usize,
        nodes: usize,
        node_budget: usize,
    }
    impl Search<'_> {
        fn dfs(&mut self, idx: usize, sigs: &mut Vec<(u64, u64)>) {
            if self.families.len() >= self.collect_cap || self.nodes >= self.node_budget {
                return;
            }
            self.nodes += 1;
            if idx == self.order.len() {
                let mut family: Vec<u64> = sigs.iter().map(|(r, _)| *r).collect();
                family.sort_unstable();
                family.dedup();
                if self.seen_families.insert(family.clone()) {
                    self.families.push(family);
                }
                return;
            }
            let mut key: Vec<(u64, u64)> = sigs.clone();
            key.sort_unstable();
            if !self.memo.insert((idx, key)) {
                return;
            }
            let v = self.order[idx];
            let vm = (self.req_mask[v], self.forb_mask[v]);
            if idx < self.clique_len {
                debug_assert_eq!(sigs.len(), idx);
                sigs.push(vm);
                self.dfs(idx + 1, sigs);
                sigs.pop();
                return;
            }
            for c in 0..sigs.len() {
                let (req, forb) = sigs[c];
                if vm.0 & forb == 0 && vm.1 & req == 0 {
                    sigs[c] = (req | vm.0, forb | vm.1);
                    self.dfs(idx + 1, sigs);
                    sigs[c] = (req, forb);
                }
            }
            if sigs.len() < self.color_cap {
                sigs.push(vm);
                self.dfs(idx + 1, sigs);
                sigs.pop();
            }
        }
    }

    let mut out: Vec<ShapeResult> = Vec::new();
    let mut seen_families = BTreeSet::new();
    for color_cap in clique.len()..=input.r_max {
        let mut search = Search {
            order: &order,
            req_mask: &req_mask,
            forb_mask: &forb_mask,
            clique_len: clique.len(),
            color_cap,
            families: Vec::new(),
            seen_families: core::mem::take(&mut seen_families),
            memo: BTreeSet::new(),
            collect_cap: 512,
            nodes: 0,
            node_budget: 500_000,
        };
        let mut sigs = Vec::new();
        search.dfs(0, &mut sigs);
        seen_families = search.seen_families;
        // richer supports first: extra edges only add freedom to the
        // weight problem, so they are the more promising explanations
        let mut level: Vec<Vec<u64>> = search.families;
        level.sort_by(|a, b| {
            let edges = |f: &Vec<u64>| -> u32 { f.iter().map(|m| m.count_ones()).sum() };
            edges(b).cmp(&edges(a)).then_with(|| a.cmp(b))
        });
        for family in level {
            let columns: Vec<BTreeSet<usize>> = family
                .iter()
                .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
                .collect();
            out.push(ShapeResult {
                instructions: input.instructions.clone(),
                columns: canonicalize_columns(n, columns),
            });
            if out.len() >= max_candidates {
                break;
            }
        }
        if out.len() >= max_candidates {
            break;
        }
    }
    if out.is_empty() {
        return Err(LpError::InfeasibleShape { r_max: input.r_max });
    }
    Ok(out)
}

/// The minimum-resource shape (first candidate of [`shape_candidates`]).
pub fn solve_shape(input: &ShapeInput) -> Result<ShapeResult, LpError> {
    Ok(shape_candidates(input, 1)?.remove(0))
}

/// The shape problem as a generic ILP: binary edge variables, one witness
/// block per requirement, indicator variables counting used resources, and
/// lexicographic column ordering to break resource-permutation symmetry.
pub fn build_lp1(input: &ShapeInput) -> Result<LinearProblem, LpError> {
    let reqs = derive_requirements(input)?;
    let n = input.instructions.len();
    let r_max = input.r_max;
    let mut p = LinearProblem::new("shape", Sense::Minimize);
    p.integral_objective = true;
    let mut edge = alloc::vec![alloc::vec![0usize; r_max]; n];
    for (i, inst) in input.instructions.iter().enumerate() {
        for r in 0..r_max {
            edge[i][r] = p.add_variable(Variable::binary(format!("rho[{inst}][R{r}]")));
        }
    }
    // z variables certify the witnessing resource of each requirement; at
    // binary edge values they can only be positive on a valid witness, so
    // they stay continuous
    for (qi, req) in reqs.iter().enumerate() {
        let mut zs = Vec::new();
        for r in 0..r_max {
            let z = p.add_variable(Variable::continuous(
                format!("z[{qi}][R{r}]"),
                Some(Rat::one()),
            ));
            zs.push(z);
            match req {
                ShapeReq::Cover(s) => {
                    for &i in s {
                        p.add_constraint(
                            format!("cov{qi}_R{r}_{i}"),
                            alloc::vec![(z, Rat::one()), (edge[i][r], -Rat::one())],
                            Cmp::Le,
                            Rat::zero(),
                        );
                    }
                }
                ShapeReq::Separate { inst, from } => {
                    p.add_constraint(
                        format!("sep{qi}_R{r}_self"),
                        alloc::vec![(z, Rat::one()), (edge[*inst][r], -Rat::one())],
                        Cmp::Le,
                        Rat::zero(),
                    );
                    for &j in from {
                        p.add_constraint(
                            format!("sep{qi}_R{r}_{j}"),
                            alloc::vec![(z, Rat::one()), (edge[j][r], Rat::one())],
                            Cmp::Le,
                            Rat::one(),
                        );
                    }
                }
            }
        }
        p.add_constraint(
            format!("witness{qi}"),
            zs.into_iter().map(|z| (z, Rat::one())).collect(),
            Cmp::Ge,
            Rat::one(),
        );
    }
    // used-resource indicators and per-instruction degree maxima
    let mut objective = Vec::new();
    let weight = Rat::from_integer(BigInt::from(n as i64 + 1));
    for r in 0..r_max {
        let used = p.add_variable(Variable::continuous(format!("used[R{r}]"), Some(Rat::one())));
        for i in 0..n {
            p.add_constraint(
                format!("used_R{r}_{i}"),
                alloc::vec![(used, -Rat::one()), (edge[i][r], Rat::one())],
                Cmp::Le,
                Rat::zero(),
            );
        }
        objective.push((used, weight.clone()));
    }
    for i in 0..n {
        let deg = p.add_variable(Variable::continuous(
            format!("maxdeg[{}]", input.instructions[i]),
            Some(Rat::one()),
        ));
        for r in 0..r_max {
            p.add_constraint(
                format!("deg_{i}_R{r}"),
                alloc::vec![(deg, -Rat::one()), (edge[i][r], Rat::one())],
                Cmp::Le,
                Rat::zero(),
            );
        }
        objective.push((deg, Rat::one()));
    }
    // lexicographically non-increasing columns
    for r in 0..r_max.saturating_sub(1) {
        let mut terms = Vec::new();
        for i in 0..n {
            let w = Rat::from_integer(BigInt::one() << (n - 1 - i));
            terms.push((edge[i][r], -w.clone()));
            terms.push((edge[i][r + 1], w));
        }
        p.add_constraint(format!("lex_R{r}"), terms, Cmp::Le, Rat::zero());
    }
    p.set_objective(objective, Rat::zero());
    Ok(p)
}

/// Reads the boolean edge set out of a solved shape ILP.
pub fn shape_from_solution(input: &ShapeInput, sol: &Solution) -> ShapeResult {
    let n = input.instructions.len();
    let r_max = input.r_max;
    let mut columns = Vec::new();
    for r in 0..r_max {
        let mut col = BTreeSet::new();
        for i in 0..n {
            if sol.values[i * r_max + r].is_one() {
                col.insert(i);
            }
        }
        if !col.is_empty() {
            columns.push(col);
        }
    }
    columns.sort_by(|a, b| {
        let vec_of = |c: &BTreeSet<usize>| -> Vec<bool> { (0..n).map(|i| c.contains(&i)).collect() };
        vec_of(b).cmp(&vec_of(a)).then_with(|| a.cmp(b))
    });
    columns.dedup();
    ShapeResult {
        instructions: input.instructions.clone(),
        columns,
    }
}

/// Input of the Bipartite Weight Problem and of the completion problem.
#[derive(Debug, Clone)]
pub struct BwpInput {
    /// Names of instructions whose rows are free variables.
    pub free: Vec<String>,
    /// Allowed columns per free instruction (the shape support).
    pub support: BTreeMap<String, Vec<usize>>,
    /// Instructions with frozen rows (the core mapping during completion).
    pub frozen: BTreeMap<String, Vec<(usize, Rat)>>,
    /// Free instructions whose weights may exceed 1 (low-IPC completion).
    pub uncapped: BTreeSet<String>,
    pub num_columns: usize,
    pub kernels: Vec<KernelObs>,
    /// Initial guess of the saturating column per kernel.
    pub pattern_hint: Option<Vec<usize>>,
}

/// Weights, per-kernel saturation levels and the objective of a BWP solve.
#[derive(Debug, Clone)]
pub struct WeightResult {
    /// Rows of the free instructions, sorted positive edges per column.
    pub rows: BTreeMap<String, Vec<(usize, Rat)>>,
    /// `(kernel key, S_K)` in input order.
    pub saturation: Vec<(String, Rat)>,
    /// `sum_K (1 - S_K)`.
    pub objective: Rat,
    /// True when the solver proved global optimality (always the case at
    /// objective zero).
    pub certified: bool,
    pub log: String,
}

/// One linear expression `rho_{K,c}` = terms over free weights + constant
/// from frozen rows.
struct KernelLoad {
    terms: Vec<(usize, Rat)>,
    constant: Rat,
}

struct BwpSpace {
    /// Variable index per (free instruction position, column).
    var_of: BTreeMap<(usize, usize), usize>,
    /// `loads[k][c]` for every kernel and column; `None` when untouched.
    loads: Vec<Vec<Option<KernelLoad>>>,
    num_vars: usize,
}

fn build_space(input: &BwpInput) -> Result<BwpSpace, LpError> {
    let free_pos: BTreeMap<&str, usize> = input
        .free
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut var_of = BTreeMap::new();
    let mut num_vars = 0;
    for (fi, name) in input.free.iter().enumerate() {
        let cols = input
            .support
            .get(name)
            .ok_or_else(|| LpError::BadInput(format!("no support for `{name}`")))?;
        for &c in cols {
            var_of.insert((fi, c), num_vars);
            num_vars += 1;
        }
    }
    let mut loads = Vec::with_capacity(input.kernels.len());
    for obs in &input.kernels {
        let scale = &obs.ipc / obs.kernel.size(); // ipc(K) / |K|
        let mut per_col: Vec<Option<KernelLoad>> = (0..input.num_columns).map(|_| None).collect();
        for (name, mult) in obs.kernel.terms() {
            let coeff = mult * &scale;
            if let Some(&fi) = free_pos.get(name) {
                for &c in &input.support[name] {
                    let entry = per_col[c].get_or_insert_with(|| KernelLoad {
                        terms: Vec::new(),
                        constant: Rat::zero(),
                    });
                    entry.terms.push((var_of[&(fi, c)], coeff.clone()));
                }
            } else if let Some(row) = input.frozen.get(name) {
                for (c, w) in row {
                    let entry = per_col[*c].get_or_insert_with(|| KernelLoad {
                        terms: Vec::new(),
                        constant: Rat::zero(),
                    });
                    entry.constant += &coeff * w;
                }
            } else {
                return Err(LpError::BadInput(format!(
                    "kernel `{}` uses unknown instruction `{name}`",
                    obs.key
                )));
            }
        }
        if per_col.iter().all(Option::is_none) {
            return Err(LpError::BadInput(format!(
                "kernel `{}` touches no resource",
                obs.key
            )));
        }
        loads.push(per_col);
    }
    Ok(BwpSpace {
        var_of,
        loads,
        num_vars,
    })
}

/// Shared skeleton: weight variables plus the `rho_{K,r} <= 1` capacity
/// rows. Returns the number of rows whose frozen part alone exceeded the
/// capacity and had to be relaxed (noisy measurements only).
fn base_problem(input: &BwpInput, space: &BwpSpace) -> (LinearProblem, usize) {
    let mut relaxed = 0usize;
    let mut p = LinearProblem::new("bwp", Sense::Maximize);
    let mut names = alloc::vec![String::new(); space.num_vars];
    for ((fi, c), v) in &space.var_of {
        names[*v] = format!("rho[{}][R{c}]", input.free[*fi]);
    }
    for ((fi, _), v) in &space.var_of {
        debug_assert_eq!(*v, p.variables.len());
        let cap = if input.uncapped.contains(&input.free[*fi]) {
            None
        } else {
            Some(Rat::one())
        };
        p.add_variable(Variable::continuous(names[*v].clone(), cap));
    }
    // many kernels induce proportional load rows (scaled multiplicities);
    // deduplicate them to keep the tableau small. Zero-rhs rows scale by
    // their leading coefficient instead and must never collide with
    // positive-rhs rows.
    let mut emitted: BTreeSet<(bool, Vec<(usize, Rat)>)> = BTreeSet::new();
    for (k, per_col) in space.loads.iter().enumerate() {
        for (c, load) in per_col.iter().enumerate() {
            let Some(load) = load else { continue };
            let mut rhs = Rat::one() - &load.constant;
            if rhs.is_negative() {
                // frozen rows alone overload this resource (possible with
                // noisy measurements); keep the problem feasible
                rhs = Rat::zero();
                relaxed += 1;
            }
            if load.terms.is_empty() {
                continue;
            }
            let canon: (bool, Vec<(usize, Rat)>) = if rhs.is_zero() {
                let lead = load.terms[0].1.clone();
                (true, load.terms.iter().map(|(v, a)| (*v, a / &lead)).collect())
            } else {
                (
                    false,
                    load.terms.iter().map(|(v, a)| (*v, a / &rhs)).collect(),
                )
            };
            if !emitted.insert(canon) {
                continue;
            }
            p.add_constraint(
                format!("cap_k{k}_R{c}"),
                load.terms.clone(),
                Cmp::Le,
                rhs,
            );
        }
    }
    (p, relaxed)
}

fn eval_saturation(
    input: &BwpInput,
    space: &BwpSpace,
    values: &[Rat],
) -> (Vec<Rat>, Vec<usize>) {
    let mut sat = Vec::with_capacity(input.kernels.len());
    let mut argmax = Vec::with_capacity(input.kernels.len());
    for per_col in &space.loads {
        let mut best = Rat::zero();
        let mut best_c = usize::MAX;
        for (c, load) in per_col.iter().enumerate() {
            let Some(load) = load else { continue };
            let mut v = load.constant.clone();
            for (var, coeff) in &load.terms {
                v += coeff * &values[*var];
            }
            if best_c == usize::MAX || v > best {
                best = v;
                best_c = c;
            }
        }
        sat.push(best);
        argmax.push(best_c);
    }
    (sat, argmax)
}

/// Static estimate of the saturating column per kernel. Each instruction's
/// weight is assumed to concentrate on its smallest containing column and
/// to dilute inversely with column size elsewhere, which matches how
/// combined resources behave; solo kernels in the input calibrate the
/// scale. A bad guess only costs extra refinement rounds.
fn initial_pattern(input: &BwpInput, space: &BwpSpace) -> Vec<usize> {
    if let Some(hint) = &input.pattern_hint {
        return hint.clone();
    }
    let mut cols_of: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (name, cols) in &input.support {
        cols_of.insert(name.as_str(), cols.clone());
    }
    for (name, row) in &input.frozen {
        cols_of.insert(name.as_str(), row.iter().map(|(c, _)| *c).collect());
    }
    let mut size = alloc::vec![0u64; input.num_columns];
    for cols in cols_of.values() {
        for &c in cols {
            size[c] += 1;
        }
    }
    let minsize: BTreeMap<&str, u64> = cols_of
        .iter()
        .map(|(n, cols)| (*n, cols.iter().map(|&c| size[c]).min().unwrap_or(1)))
        .collect();
    let mut solo: BTreeMap<&str, Rat> = BTreeMap::new();
    for obs in &input.kernels {
        if obs.kernel.num_distinct() == 1 {
            let name = obs.kernel.names().next().expect("nonempty");
            solo.entry(name).or_insert_with(|| obs.ipc.clone());
        }
    }
    input
        .kernels
        .iter()
        .zip(&space.loads)
        .map(|(obs, per_col)| {
            let mut best_c = usize::MAX;
            let mut best = Rat::from_integer((-1).into());
            for (c, load) in per_col.iter().enumerate() {
                if load.is_none() {
                    continue;
                }
                let mut score = Rat::zero();
                for (name, mult) in obs.kernel.terms() {
                    let Some(cols) = cols_of.get(name) else { continue };
                    if !cols.contains(&c) {
                        continue;
                    }
                    let ipc = solo.get(name).cloned().unwrap_or_else(Rat::one);
                    let scale = Rat::new(minsize[name].into(), (size[c].max(1)).into());
                    score += mult * scale / ipc;
                }
                if score > best {
                    best = score;
                    best_c = c;
                }
            }
            best_c
        })
        .collect()
}

const PATTERN_ROUNDS: usize = 25;
const MILP_FALLBACK_BINARIES: usize = 120;
const MILP_FALLBACK_NODES: usize = 4_000;

/// Solves the BWP: weights in `[0,1]` on the given support maximizing the
/// summed kernel saturation `sum_K S_K`, `S_K = max_r rho_{K,r} <= 1`.
///
/// The solver iterates plain LPs over a guessed saturating resource per
/// kernel; any fixpoint with objective zero is globally optimal. Otherwise
/// it falls back to the exact MILP when the instance is small enough, and
/// keeps the iterated solution (flagged uncertified) when it is not.
pub fn solve_bwp(input: &BwpInput) -> Result<WeightResult, LpError> {
    let space = build_space(input)?;
    let (mut problem, relaxed_rows) = base_problem(input, &space);
    let mut pattern = initial_pattern(input, &space);
    let mut log = String::new();
    if relaxed_rows > 0 {
        log.push_str(&format!("relaxed {relaxed_rows} overloaded frozen rows\n"));
    }

    let mut best_values: Option<Vec<Rat>> = None;
    let mut best_total = -Rat::one();
    for round in 0..PATTERN_ROUNDS {
        let mut objective = Vec::new();
        let mut offset = Rat::zero();
        for (k, &c) in pattern.iter().enumerate() {
            let load = space.loads[k][c]
                .as_ref()
                .ok_or_else(|| LpError::BadInput("pattern selects untouched column".into()))?;
            offset += &load.constant;
            for (var, coeff) in &load.terms {
                objective.push((*var, coeff.clone()));
            }
        }
        problem.set_objective(objective, offset);
        let relax = simplex::solve_relaxation(&problem);
        if relax.status != simplex::LpStatus::Optimal {
            return Err(LpError::Infeasible(format!(
                "bwp pattern LP came back {:?}",
                relax.status
            )));
        }
        let (sat, argmax) = eval_saturation(input, &space, &relax.values);
        let total: Rat = sat.iter().sum();
        log.push_str(&format!(
            "round {round}: pattern objective {}, true saturation {}\n",
            display(&relax.objective),
            display(&total)
        ));
        if total > best_total {
            best_total = total.clone();
            best_values = Some(relax.values.clone());
        }
        // switch each kernel to its actual bottleneck; keep the current
        // choice when it already attains the maximum
        if total > relax.objective {
            for (k, &c) in argmax.iter().enumerate() {
                let cur = pattern[k];
                let cur_val = space.loads[k][cur].as_ref().map(|l| {
                    let mut v = l.constant.clone();
                    for (var, coeff) in &l.terms {
                        v += coeff * &relax.values[*var];
                    }
                    v
                });
                if cur_val.as_ref() != Some(&sat[k]) {
                    pattern[k] = c;
                }
            }
        } else {
            break;
        }
    }

    let mut final_values = best_values.expect("at least one round ran");
    let n_kernels = Rat::from_integer((input.kernels.len() as i64).into());
    let mut certified = (&n_kernels - &best_total).is_zero();

    // the pattern fixpoint can park a few kernels below saturation; try
    // re-routing each such kernel through its alternative columns
    if !certified {
        let mut repairs = 0usize;
        'repair: while repairs < 60 {
            let (sat, _) = eval_saturation(input, &space, &final_values);
            let bad: Vec<usize> = sat
                .iter()
                .enumerate()
                .filter(|(_, s)| **s < Rat::one())
                .map(|(k, _)| k)
                .collect();
            if bad.is_empty() {
                certified = true;
                break;
            }
            for &k in &bad {
                let current = pattern[k];
                for (c, load) in space.loads[k].iter().enumerate() {
                    if c == current || load.is_none() {
                        continue;
                    }
                    repairs += 1;
                    let saved = pattern[k];
                    pattern[k] = c;
                    let mut objective = Vec::new();
                    let mut offset = Rat::zero();
                    for (kk, &cc) in pattern.iter().enumerate() {
                        let l = space.loads[kk][cc].as_ref().expect("pattern stays touched");
                        offset += &l.constant;
                        for (var, coeff) in &l.terms {
                            objective.push((*var, coeff.clone()));
                        }
                    }
                    problem.set_objective(objective, offset);
                    let relax = simplex::solve_relaxation(&problem);
                    let mut improved = false;
                    if relax.status == simplex::LpStatus::Optimal {
                        let (s2, _) = eval_saturation(input, &space, &relax.values);
                        let total: Rat = s2.iter().sum();
                        if total > best_total {
                            best_total = total;
                            final_values = relax.values;
                            improved = true;
                        }
                    }
                    if improved {
                        log.push_str(&format!(
                            "repair: kernel {k} rerouted, saturation {}\n",
                            display(&best_total)
                        ));
                        continue 'repair;
                    }
                    pattern[k] = saved;
                    if repairs >= 60 {
                        break 'repair;
                    }
                }
            }
            break; // no alternative improved anything
        }
        certified = certified || (&n_kernels - &best_total).is_zero();
    }

    let mut objective = &n_kernels - &best_total;

    // exact branch and bound restricted to the selectors of the still
    // unsaturated kernels; everyone else keeps its pattern column
    if !certified {
        let (sat, _) = eval_saturation(input, &space, &final_values);
        let bad: Vec<usize> = sat
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < Rat::one())
            .map(|(k, _)| k)
            .collect();
        let selectors: usize = bad
            .iter()
            .map(|&k| space.loads[k].iter().filter(|l| l.is_some()).count())
            .sum();
        if selectors <= MILP_FALLBACK_BINARIES {
            let milp = build_bwp_milp(input, &space, &bad, &pattern);
            let sol = mip::solve_with_limit(&milp, MILP_FALLBACK_NODES);
            match sol.status {
                SolveStatus::Optimal | SolveStatus::NodeLimit => {
                    let milp_values = sol.values[..space.num_vars].to_vec();
                    let (s2, _) = eval_saturation(input, &space, &milp_values);
                    let total: Rat = s2.iter().sum();
                    log.push_str(&format!("restricted milp: {}\n", sol.log));
                    if total > best_total {
                        best_total = total;
                        final_values = milp_values;
                        objective = &n_kernels - &best_total;
                    }
                    certified = objective.is_zero();
                }
                _ => log.push_str(&format!("restricted milp unusable: {}\n", sol.log)),
            }
        } else {
            log.push_str(&format!(
                "too many unsaturated selectors ({selectors}); keeping iterated solution\n"
            ));
        }
    }
    finish(input, &space, final_values, objective, certified, log)
}

fn finish(
    input: &BwpInput,
    space: &BwpSpace,
    values: Vec<Rat>,
    objective: Rat,
    certified: bool,
    log: String,
) -> Result<WeightResult, LpError> {
    let (sat, _) = eval_saturation(input, space, &values);
    let saturation = input
        .kernels
        .iter()
        .zip(sat)
        .map(|(obs, s)| (obs.key.clone(), s.min(Rat::one())))
        .collect();
    let mut rows = BTreeMap::new();
    for (fi, name) in input.free.iter().enumerate() {
        let mut row = Vec::new();
        for &c in &input.support[name] {
            let v = values[space.var_of[&(fi, c)]].clone();
            if !v.is_zero() {
                row.push((c, v));
            }
        }
        rows.insert(name.clone(), row);
    }
    Ok(WeightResult {
        rows,
        saturation,
        objective,
        certified,
        log,
    })
}

/// The BWP saturation maxima as the spec'd MILP encoding, restricted to the
/// kernels in `branch`: those get a saturation variable tied to their
/// maximum load through binary selectors, everyone else contributes the
/// load of its fixed pattern column to the objective.
fn build_bwp_milp(
    input: &BwpInput,
    space: &BwpSpace,
    branch: &[usize],
    pattern: &[usize],
) -> LinearProblem {
    let (mut p, _) = base_problem(input, space);
    let branch_set: BTreeSet<usize> = branch.iter().copied().collect();
    let mut objective = Vec::new();
    let mut offset = Rat::zero();
    for (k, per_col) in space.loads.iter().enumerate() {
        if !branch_set.contains(&k) {
            let load = per_col[pattern[k]].as_ref().expect("pattern stays touched");
            offset += &load.constant;
            for (var, coeff) in &load.terms {
                objective.push((*var, coeff.clone()));
            }
            continue;
        }
        let s_k = p.add_variable(Variable::continuous(format!("S[k{k}]"), Some(Rat::one())));
        objective.push((s_k, Rat::one()));
        let big_m = input.kernels[k].kernel.size() + Rat::one();
        let mut selectors = Vec::new();
        for (c, load) in per_col.iter().enumerate() {
            let Some(load) = load else { continue };
            // S_K >= rho_{K,c}
            let mut ge = alloc::vec![(s_k, Rat::one())];
            for (var, coeff) in &load.terms {
                ge.push((*var, -coeff));
            }
            p.add_constraint(format!("satlo_k{k}_R{c}"), ge, Cmp::Ge, load.constant.clone());
            // S_K <= rho_{K,c} + M (1 - y_{K,c})
            let y = p.add_variable(Variable::binary(format!("y[k{k}][R{c}]")));
            selectors.push(y);
            let mut le = alloc::vec![(s_k, Rat::one()), (y, big_m.clone())];
            for (var, coeff) in &load.terms {
                le.push((*var, -coeff));
            }
            p.add_constraint(
                format!("sathi_k{k}_R{c}"),
                le,
                Cmp::Le,
                &load.constant + &big_m,
            );
        }
        p.add_constraint(
            format!("pick_k{k}"),
            selectors.into_iter().map(|y| (y, Rat::one())).collect(),
            Cmp::Eq,
            Rat::one(),
        );
    }
    // maximize saturation, i.e. minimize sum (1 - S_K)
    p.set_objective(objective, offset);
    p
}

/// Completion problem: the core rows are frozen, only `inst`'s row is free,
/// nonnegative and not capped at 1. The saturating-kernel construction
/// makes the intended bottleneck of each kernel known, which seeds the
/// pattern.
pub fn solve_aux(
    inst: &str,
    num_columns: usize,
    core_rows: &BTreeMap<String, Vec<(usize, Rat)>>,
    kernels: Vec<KernelObs>,
    designed: Vec<usize>,
) -> Result<WeightResult, LpError> {
    let input = BwpInput {
        free: alloc::vec![inst.to_string()],
        support: [(inst.to_string(), (0..num_columns).collect())]
            .into_iter()
            .collect(),
        frozen: core_rows.clone(),
        uncapped: [inst.to_string()].into_iter().collect(),
        num_columns,
        kernels,
        pattern_hint: Some(designed),
    };
    solve_bwp(&input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{rat, ratio};

    #[test]
    fn minimize_with_lower_bound_row() {
        // min x s.t. x >= 3
        let mut p = LinearProblem::new("toy", Sense::Minimize);
        let x = p.add_variable(Variable::continuous("x".into(), None));
        p.add_constraint("lb".into(), alloc::vec![(x, rat(1))], Cmp::Ge, rat(3));
        p.set_objective(alloc::vec![(x, rat(1))], Rat::zero());
        let sol = solve(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, rat(3));
        assert_eq!(sol.values[x], rat(3));
    }

    #[test]
    fn statuses_are_reported() {
        let mut p = LinearProblem::new("unbounded", Sense::Maximize);
        let x = p.add_variable(Variable::continuous("x".into(), None));
        p.set_objective(alloc::vec![(x, rat(1))], Rat::zero());
        assert_eq!(solve(&p).status, SolveStatus::Unbounded);

        let mut p = LinearProblem::new("infeasible", Sense::Minimize);
        let x = p.add_variable(Variable::continuous("x".into(), Some(rat(1))));
        p.add_constraint("hi".into(), alloc::vec![(x, rat(1))], Cmp::Ge, rat(2));
        p.set_objective(alloc::vec![(x, rat(1))], Rat::zero());
        assert_eq!(solve(&p).status, SolveStatus::Infeasible);
    }

    /// Weighted binary cover toy checked against all four assignments.
    #[test]
    fn binary_cover_matches_enumeration() {
        // min 3a + 2b  s.t.  a + b >= 1, a + 2b >= 2, binaries
        let build = || {
            let mut p = LinearProblem::new("cover", Sense::Minimize);
            let a = p.add_variable(Variable::binary("a".into()));
            let b = p.add_variable(Variable::binary("b".into()));
            p.add_constraint("c1".into(), alloc::vec![(a, rat(1)), (b, rat(1))], Cmp::Ge, rat(1));
            p.add_constraint("c2".into(), alloc::vec![(a, rat(1)), (b, rat(2))], Cmp::Ge, rat(2));
            p.set_objective(alloc::vec![(a, rat(3)), (b, rat(2))], Rat::zero());
            p
        };
        let mut best = None;
        for a in 0..2i64 {
            for b in 0..2i64 {
                if a + b >= 1 && a + 2 * b >= 2 {
                    let obj = 3 * a + 2 * b;
                    if best.is_none_or(|x| obj < x) {
                        best = Some(obj);
                    }
                }
            }
        }
        let sol = solve(&build());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, rat(best.unwrap()));
        // determinism: identical problems yield identical assignments
        let again = solve(&build());
        assert_eq!(sol.values, again.values);
    }

    fn toy_shape_input() -> ShapeInput {
        // two disjoint very-basic instructions, kernels {a, b, a b}
        let solo: BTreeMap<String, Rat> =
            [("a".to_string(), rat(1)), ("b".to_string(), rat(1))].into();
        let kernels = alloc::vec![
            KernelObs::new(Microkernel::of(&[("a", 1)]), rat(1)),
            KernelObs::new(Microkernel::of(&[("b", 1)]), rat(1)),
            KernelObs::new(Microkernel::of(&[("a", 1), ("b", 1)]), rat(2)),
        ];
        ShapeInput {
            instructions: alloc::vec!["a".into(), "b".into()],
            very_basic: alloc::vec!["a".into(), "b".into()],
            most_greedy: alloc::vec![],
            contended: BTreeMap::new(),
            kernels,
            solo_ipc: solo,
            r_max: 2,
            tol: ratio(1, 1_000_000_000),
        }
    }

    #[test]
    fn disjoint_pair_needs_two_private_resources() {
        let input = toy_shape_input();
        let shape = solve_shape(&input).unwrap();
        assert_eq!(shape.num_resources(), 2);
        let sets = shape.support_sets();
        let expected: BTreeSet<BTreeSet<String>> = [
            ["a".to_string()].into_iter().collect(),
            ["b".to_string()].into_iter().collect(),
        ]
        .into_iter()
        .collect();
        assert_eq!(sets, expected);
        // the generic ILP encoding agrees
        let milp = build_lp1(&input).unwrap();
        let sol = solve(&milp);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(shape_from_solution(&input, &sol).support_sets(), expected);
        // LP relaxation bounds the ILP optimum from below
        let mut relaxed = milp.clone();
        for v in relaxed.variables.iter_mut() {
            if v.kind == VarKind::Binary {
                v.kind = VarKind::Continuous;
                v.upper = Some(Rat::one());
            }
        }
        let bound = solve(&relaxed);
        assert!(bound.objective <= sol.objective);
    }

    #[test]
    fn lone_instruction_single_resource() {
        let solo: BTreeMap<String, Rat> = [("a".to_string(), rat(1))].into();
        let input = ShapeInput {
            instructions: alloc::vec!["a".into()],
            very_basic: alloc::vec!["a".into()],
            most_greedy: alloc::vec![],
            contended: BTreeMap::new(),
            kernels: alloc::vec![KernelObs::new(Microkernel::of(&[("a", 1)]), rat(1))],
            solo_ipc: solo,
            r_max: 1,
            tol: ratio(1, 1_000_000_000),
        };
        let shape = solve_shape(&input).unwrap();
        assert_eq!(shape.num_resources(), 1);
        assert!(shape.has_edge(0, 0));
    }

    /// Independent validity check of a candidate shape against the raw
    /// measurements, used as the enumeration oracle.
    fn shape_is_valid(input: &ShapeInput, columns: &[BTreeSet<usize>]) -> bool {
        let idx = |n: &str| input.instructions.iter().position(|x| x == n).unwrap();
        for vb in &input.very_basic {
            let i = idx(vb);
            let ok = columns.iter().any(|c| {
                c.contains(&i)
                    && input
                        .very_basic
                        .iter()
                        .all(|o| o == vb || !c.contains(&idx(o)))
            });
            if !ok {
                return false;
            }
        }
        for mf in &input.most_greedy {
            let i = idx(mf);
            let need: BTreeSet<usize> = input.contended[mf].iter().map(|o| idx(o)).collect();
            let ok = columns
                .iter()
                .any(|c| c.contains(&i) && need.iter().all(|j| c.contains(j)));
            if !ok {
                return false;
            }
        }
        for obs in &input.kernels {
            let t = obs.cycles();
            let mut saturating = Vec::new();
            let mut support = BTreeSet::new();
            for (name, mult) in obs.kernel.terms() {
                let i = idx(name);
                support.insert(i);
                let part = mult / &input.solo_ipc[name];
                if (&part - &t).abs() <= &input.tol * &t {
                    saturating.push(i);
                }
            }
            if saturating.is_empty() {
                if !columns.iter().any(|c| support.is_subset(c)) {
                    return false;
                }
            } else {
                for i in saturating {
                    let ok = columns.iter().any(|c| {
                        c.contains(&i) && support.iter().all(|j| *j == i || !c.contains(j))
                    });
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Resource counts match brute force on instances small enough to
    /// enumerate every binary edge matrix.
    #[test]
    fn shape_minimality_against_enumeration() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for trial in 0..60 {
            let n = 2 + (rng.next_u64() as usize) % 3; // 2..=4 instructions
            let names: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
            let solo: BTreeMap<String, Rat> =
                names.iter().map(|x| (x.clone(), rat(1))).collect();
            // random saturation structure through synthetic kernels
            let mut kernels = Vec::new();
            for (i, a) in names.iter().enumerate() {
                kernels.push(KernelObs::new(Microkernel::of(&[(a, 1)]), rat(1)));
                for b in &names[i + 1..] {
                    // randomly disjoint (additive) or fully contended
                    if rng.next_u64() % 2 == 0 {
                        kernels.push(KernelObs::new(
                            Microkernel::of(&[(a, 1), (b, 1)]),
                            rat(2),
                        ));
                    } else {
                        kernels.push(KernelObs::new(
                            Microkernel::of(&[(a, 1), (b, 1)]),
                            rat(1),
                        ));
                    }
                }
            }
            let input = ShapeInput {
                instructions: names.clone(),
                very_basic: alloc::vec![],
                most_greedy: alloc::vec![],
                contended: BTreeMap::new(),
                kernels,
                solo_ipc: solo,
                r_max: 3,
                tol: ratio(1, 1_000_000_000),
            };
            // brute-force minimum over all column families with <= 3 columns
            let all_cols: Vec<BTreeSet<usize>> = (1u32..(1 << n))
                .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
                .collect();
            let mut brute: Option<usize> = None;
            'outer: for r in 1..=3usize {
                let mut picks = alloc::vec![0usize; r];
                loop {
                    let cols: Vec<BTreeSet<usize>> =
                        picks.iter().map(|&p| all_cols[p].clone()).collect();
                    if shape_is_valid(&input, &cols) {
                        brute = Some(r);
                        break 'outer;
                    }
                    // odometer
                    let mut k = r;
                    loop {
                        if k == 0 {
                            break;
                        }
                        k -= 1;
                        picks[k] += 1;
                        if picks[k] < all_cols.len() {
                            break;
                        }
                        picks[k] = 0;
                        if k == 0 {
                            break;
                        }
                    }
                    if picks.iter().all(|&p| p == 0) {
                        break;
                    }
                }
            }
            match (brute, solve_shape(&input)) {
                (Some(b), Ok(shape)) => {
                    assert_eq!(
                        shape.num_resources(),
                        b,
                        "trial {trial}: solver found {} resources, enumeration {b}",
                        shape.num_resources()
                    );
                    assert!(shape_is_valid(
                        &input,
                        &shape.columns.iter().cloned().collect::<Vec<_>>()
                    ));
                }
                (None, Err(LpError::InfeasibleShape { .. })) => {}
                (b, s) => panic!("trial {trial}: enumeration {b:?} vs solver {s:?}"),
            }
        }
    }

    #[test]
    fn bwp_single_instruction_single_resource() {
        let input = BwpInput {
            free: alloc::vec!["a".into()],
            support: [("a".to_string(), alloc::vec![0usize])].into(),
            frozen: BTreeMap::new(),
            uncapped: BTreeSet::new(),
            num_columns: 1,
            kernels: alloc::vec![KernelObs::new(Microkernel::of(&[("a", 1)]), rat(1))],
            pattern_hint: None,
        };
        let out = solve_bwp(&input).unwrap();
        assert_eq!(out.objective, rat(0));
        assert!(out.certified);
        assert_eq!(out.rows["a"], alloc::vec![(0usize, rat(1))]);
        assert_eq!(out.saturation[0].1, rat(1));
    }

    #[test]
    fn bwp_detects_missing_edge_as_subsaturation() {
        // two contended instructions forced onto private resources: the
        // pair kernel (ipc 1) cannot saturate anything
        let input = BwpInput {
            free: alloc::vec!["a".into(), "b".into()],
            support: [
                ("a".to_string(), alloc::vec![0usize]),
                ("b".to_string(), alloc::vec![1usize]),
            ]
            .into(),
            frozen: BTreeMap::new(),
            uncapped: BTreeSet::new(),
            num_columns: 2,
            kernels: alloc::vec![
                KernelObs::new(Microkernel::of(&[("a", 1)]), rat(1)),
                KernelObs::new(Microkernel::of(&[("b", 1)]), rat(1)),
                // shared bottleneck in truth: ipc 1, not 2
                KernelObs::new(Microkernel::of(&[("a", 1), ("b", 1)]), rat(1)),
            ],
            pattern_hint: None,
        };
        let out = solve_bwp(&input).unwrap();
        assert!(out.objective > rat(0), "objective {:?}", out.objective);
    }

    #[test]
    fn lp_format_writes_exact_comments() {
        let mut p = LinearProblem::new("fmt", Sense::Minimize);
        let x = p.add_variable(Variable::continuous("x".into(), Some(rat(1))));
        let y = p.add_variable(Variable::binary("y".into()));
        p.add_constraint(
            "third".into(),
            alloc::vec![(x, ratio(1, 3)), (y, rat(1))],
            Cmp::Le,
            rat(1),
        );
        p.set_objective(alloc::vec![(x, ratio(1, 2))], Rat::zero());
        let text = to_lp_format(&p);
        assert!(text.contains("Minimize"), "{text}");
        assert!(text.contains(" obj: 0.5 x_0\n"), "{text}");
        assert!(text.contains("\\ exact third_0: 1/3 x_0 + 1 y_1 <= 1"), "{text}");
        assert!(text.contains("Binary"), "{text}");
        // serialization is deterministic
        assert_eq!(text, to_lp_format(&p));
    }
}
