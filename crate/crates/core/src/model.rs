//! Domain types for both mapping representations, throughput computation,
//! normalization, and the extended form with back edges.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num::{One, Signed, Zero};

use crate::ratio::{display, Rat};

/// A named opcode together with the ISA extension class it belongs to
/// (e.g. "base", "sse", "avx"). Kernels never mix extension classes when
/// they are materialized as benchmarks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instruction {
    pub name: String,
    pub extension_class: String,
}

impl Instruction {
    pub fn new(name: &str, extension_class: &str) -> Self {
        Self {
            name: name.to_string(),
            extension_class: extension_class.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    UnknownInstruction(String),
    UnknownResource(String),
    EmptyKernel,
    InvalidMultiplicity(String),
    DuplicateName(String),
    NonPositiveThroughput(String),
    InstructionWithoutEdges(String),
    NotNormalized,
    CyclicBackEdges,
    /// The reduced weight of an edge went negative while building the
    /// extended form; the mapping does not decompose.
    NonDecomposable { instruction: String, resource: String },
    NonIntegralKernel(String),
    ParseKernel(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnknownInstruction(n) => write!(f, "unknown instruction `{n}` in kernel"),
            ModelError::UnknownResource(n) => write!(f, "unknown resource `{n}`"),
            ModelError::EmptyKernel => write!(f, "kernel has no instructions"),
            ModelError::InvalidMultiplicity(n) => {
                write!(f, "multiplicity of `{n}` must be positive")
            }
            ModelError::DuplicateName(n) => write!(f, "duplicate name `{n}`"),
            ModelError::NonPositiveThroughput(r) => {
                write!(f, "resource `{r}` has nonpositive throughput")
            }
            ModelError::InstructionWithoutEdges(n) => {
                write!(f, "instruction `{n}` uses no resource")
            }
            ModelError::NotNormalized => write!(f, "mapping must be normalized"),
            ModelError::CyclicBackEdges => write!(f, "back-edge relation is cyclic"),
            ModelError::NonDecomposable {
                instruction,
                resource,
            } => write!(
                f,
                "extended form does not exist: reduced weight of ({instruction}, {resource}) is negative"
            ),
            ModelError::NonIntegralKernel(k) => {
                write!(f, "kernel `{k}` has non-integer multiplicities")
            }
            ModelError::ParseKernel(s) => write!(f, "cannot parse kernel term `{s}`"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}

/// A finite multiset of instructions with positive rational repetition
/// counts; the unit of both measurement and prediction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Microkernel {
    terms: BTreeMap<String, Rat>,
}

impl Microkernel {
    pub fn new(terms: impl IntoIterator<Item = (String, Rat)>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (name, mult) in terms {
            if !mult.is_positive() {
                return Err(ModelError::InvalidMultiplicity(name));
            }
            if map.insert(name.clone(), mult).is_some() {
                return Err(ModelError::DuplicateName(name));
            }
        }
        if map.is_empty() {
            return Err(ModelError::EmptyKernel);
        }
        Ok(Self { terms: map })
    }

    /// Kernel with integer multiplicities, e.g. `of(&[("ADDSS", 2), ("BSR", 1)])`.
    pub fn of(terms: &[(&str, u64)]) -> Self {
        Self::new(
            terms
                .iter()
                .map(|(n, m)| (n.to_string(), Rat::from_integer((*m).into()))),
        )
        .expect("literal kernel")
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &Rat)> {
        self.terms.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn multiplicity(&self, name: &str) -> Option<&Rat> {
        self.terms.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn num_distinct(&self) -> usize {
        self.terms.len()
    }

    /// `|K|`, the number of instructions executed per loop iteration.
    pub fn size(&self) -> Rat {
        self.terms.values().sum()
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|m| m.denom().is_one())
    }

    /// Canonical form for persisted benchmarks: terms sorted by name,
    /// rendered `NAME^mult` and joined by single spaces. Only defined for
    /// integer multiplicities.
    pub fn canonical_key(&self) -> Result<String, ModelError> {
        if !self.is_integral() {
            let mut repr = String::new();
            for (n, m) in &self.terms {
                repr.push_str(n);
                repr.push('^');
                repr.push_str(&display(m));
                repr.push(' ');
            }
            return Err(ModelError::NonIntegralKernel(repr.trim_end().to_string()));
        }
        let mut out = String::new();
        for (i, (n, m)) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(n);
            out.push('^');
            out.push_str(&m.numer().to_string());
        }
        Ok(out)
    }

    /// Parses the `NAME^k` space-separated syntax; `^k` defaults to 1.
    /// Repeated names accumulate.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut terms: BTreeMap<String, Rat> = BTreeMap::new();
        for token in text.split_whitespace() {
            let (name, mult) = match token.split_once('^') {
                Some((n, k)) => {
                    let k: u64 = k
                        .parse()
                        .map_err(|_| ModelError::ParseKernel(token.to_string()))?;
                    if k == 0 {
                        return Err(ModelError::InvalidMultiplicity(n.to_string()));
                    }
                    (n, k)
                }
                None => (token, 1),
            };
            if name.is_empty() {
                return Err(ModelError::ParseKernel(token.to_string()));
            }
            *terms.entry(name.to_string()).or_insert_with(Rat::zero) +=
                Rat::from_integer(mult.into());
        }
        Self::new(terms)
    }

    /// Pointwise sum of two multisets.
    pub fn merged(&self, other: &Microkernel) -> Microkernel {
        let mut terms = self.terms.clone();
        for (n, m) in &other.terms {
            *terms.entry(n.clone()).or_insert_with(Rat::zero) += m;
        }
        Microkernel { terms }
    }

    /// Multiplies every multiplicity by `factor`.
    pub fn scaled(&self, factor: &Rat) -> Result<Microkernel, ModelError> {
        Microkernel::new(self.terms.iter().map(|(n, m)| (n.clone(), m * factor)))
    }
}

/// One instruction row of a ground-truth disjunctive mapping: the set of
/// ports its µOP may execute on, plus an integer usage weight for
/// instructions issuing several µOPs onto the same compatibility set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatRow {
    pub extension_class: String,
    /// Indices into `DisjunctiveMapping::ports`.
    pub compat: BTreeSet<usize>,
    pub weight: u64,
}

/// Ground-truth bipartite instruction-to-port compatibility graph with
/// unit-throughput ports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjunctiveMapping {
    ports: Vec<String>,
    rows: BTreeMap<String, CompatRow>,
}

impl DisjunctiveMapping {
    pub fn new(
        ports: Vec<String>,
        rows: impl IntoIterator<Item = (String, CompatRow)>,
    ) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for p in &ports {
            if !seen.insert(p.clone()) {
                return Err(ModelError::DuplicateName(p.clone()));
            }
        }
        let mut map = BTreeMap::new();
        for (name, row) in rows {
            if name.is_empty() {
                return Err(ModelError::DuplicateName(name));
            }
            if row.compat.is_empty() || row.compat.iter().any(|&i| i >= ports.len()) {
                return Err(ModelError::UnknownResource(name));
            }
            if row.weight == 0 {
                return Err(ModelError::InvalidMultiplicity(name));
            }
            if map.insert(name.clone(), row).is_some() {
                return Err(ModelError::DuplicateName(name));
            }
        }
        Ok(Self { ports: ports, rows: map })
    }

    pub fn ports(&self) -> &[String] {
        &self.ports
    }

    pub fn num_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &CompatRow)> {
        self.rows.iter().map(|(n, r)| (n.as_str(), r))
    }

    pub fn row(&self, name: &str) -> Option<&CompatRow> {
        self.rows.get(name)
    }

    pub fn instruction_names(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn num_instructions(&self) -> usize {
        self.rows.len()
    }

    pub fn extension_class(&self, name: &str) -> Option<&str> {
        self.rows.get(name).map(|r| r.extension_class.as_str())
    }
}

/// A named abstract resource with its throughput (cycles of work it can
/// absorb per cycle).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub name: String,
    pub throughput: Rat,
}

/// Weighted bipartite instruction-to-resource graph. In the normalized form
/// every resource has throughput 1 and `raw_throughput` keeps the
/// pre-normalization capacities, which the extended form needs to order
/// resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjunctiveMapping {
    resources: Vec<Resource>,
    raw_throughput: Vec<Rat>,
    res_index: BTreeMap<String, usize>,
    instructions: BTreeMap<String, String>,
    /// Per instruction, sorted positive edges `(resource index, weight)`.
    edges: BTreeMap<String, Vec<(usize, Rat)>>,
    normalized: bool,
}

/// Result of a throughput query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Throughput {
    /// Cycles per loop iteration.
    pub time: Rat,
    pub ipc: Rat,
    /// Resources attaining the maximum load.
    pub bottlenecks: BTreeSet<String>,
}

impl ConjunctiveMapping {
    pub fn new(
        resources: Vec<Resource>,
        instructions: Vec<Instruction>,
        edges: Vec<(String, String, Rat)>,
        normalized: bool,
    ) -> Result<Self, ModelError> {
        let mut res_index = BTreeMap::new();
        for (i, r) in resources.iter().enumerate() {
            if !r.throughput.is_positive() {
                return Err(ModelError::NonPositiveThroughput(r.name.clone()));
            }
            if normalized && !r.throughput.is_one() {
                return Err(ModelError::NotNormalized);
            }
            if res_index.insert(r.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName(r.name.clone()));
            }
        }
        let mut inst_map = BTreeMap::new();
        for inst in instructions {
            if inst.name.is_empty() {
                return Err(ModelError::DuplicateName(inst.name));
            }
            if inst_map
                .insert(inst.name.clone(), inst.extension_class)
                .is_some()
            {
                return Err(ModelError::DuplicateName(inst.name));
            }
        }
        let mut edge_map: BTreeMap<String, Vec<(usize, Rat)>> = BTreeMap::new();
        for (inst, res, w) in edges {
            if !inst_map.contains_key(&inst) {
                return Err(ModelError::UnknownInstruction(inst));
            }
            let &ri = res_index
                .get(&res)
                .ok_or(ModelError::UnknownResource(res))?;
            if w.is_zero() {
                continue; // zero weight means the edge is absent
            }
            if w.is_negative() {
                return Err(ModelError::InvalidMultiplicity(inst));
            }
            edge_map.entry(inst).or_default().push((ri, w));
        }
        for (name, _) in &inst_map {
            match edge_map.get_mut(name) {
                Some(list) => list.sort_by_key(|(ri, _)| *ri),
                None => return Err(ModelError::InstructionWithoutEdges(name.clone())),
            }
        }
        let raw = resources.iter().map(|r| r.throughput.clone()).collect();
        Ok(Self {
            resources,
            raw_throughput: raw,
            res_index,
            instructions: inst_map,
            edges: edge_map,
            normalized,
        })
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    /// Pre-normalization throughput of resource `ri`; equals the current
    /// throughput on mappings that were never normalized.
    pub fn raw_throughput(&self, ri: usize) -> &Rat {
        &self.raw_throughput[ri]
    }

    pub fn resource_index(&self, name: &str) -> Option<usize> {
        self.res_index.get(name).copied()
    }

    pub fn instructions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.instructions.iter().map(|(n, c)| (n.as_str(), c.as_str()))
    }

    pub fn contains_instruction(&self, name: &str) -> bool {
        self.instructions.contains_key(name)
    }

    pub fn extension_class(&self, name: &str) -> Option<&str> {
        self.instructions.get(name).map(String::as_str)
    }

    pub fn row(&self, inst: &str) -> Option<&[(usize, Rat)]> {
        self.edges.get(inst).map(Vec::as_slice)
    }

    /// Weight of edge `(inst, res)`, zero when absent.
    pub fn edge(&self, inst: &str, res: &str) -> Rat {
        match (self.edges.get(inst), self.res_index.get(res)) {
            (Some(row), Some(&ri)) => row
                .iter()
                .find(|(i, _)| *i == ri)
                .map(|(_, w)| w.clone())
                .unwrap_or_else(Rat::zero),
            _ => Rat::zero(),
        }
    }

    /// Per-resource load of one iteration of `k`, each divided by the
    /// resource throughput so that the execution time is their maximum.
    pub fn loads(&self, k: &Microkernel) -> Result<Vec<Rat>, ModelError> {
        let mut loads = alloc::vec![Rat::zero(); self.resources.len()];
        for (name, mult) in k.terms() {
            let row = self
                .edges
                .get(name)
                .ok_or_else(|| ModelError::UnknownInstruction(name.to_string()))?;
            for (ri, w) in row {
                loads[*ri] += mult * w;
            }
        }
        for (ri, l) in loads.iter_mut().enumerate() {
            if !self.resources[ri].throughput.is_one() {
                *l /= &self.resources[ri].throughput;
            }
        }
        Ok(loads)
    }

    /// Execution time, IPC and bottleneck set of a kernel:
    /// `t(K) = max_r sum_i sigma_i * rho_{i,r} / rho(r)`.
    pub fn throughput(&self, k: &Microkernel) -> Result<Throughput, ModelError> {
        let loads = self.loads(k)?;
        let time = loads
            .iter()
            .max()
            .cloned()
            .ok_or(ModelError::EmptyKernel)?;
        if !time.is_positive() {
            // every instruction has at least one positive edge, so this
            // would need an empty kernel
            return Err(ModelError::EmptyKernel);
        }
        let bottlenecks = loads
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == time)
            .map(|(ri, _)| self.resources[ri].name.clone())
            .collect();
        Ok(Throughput {
            ipc: k.size() / &time,
            time,
            bottlenecks,
        })
    }

    /// Divides every edge by its resource throughput and sets all
    /// throughputs to 1; kernel throughput is invariant under this.
    pub fn normalize(&self) -> Result<ConjunctiveMapping, ModelError> {
        if self.normalized {
            return Ok(self.clone());
        }
        for r in &self.resources {
            if !r.throughput.is_positive() {
                return Err(ModelError::NonPositiveThroughput(r.name.clone()));
            }
        }
        let mut out = self.clone();
        for row in out.edges.values_mut() {
            for (ri, w) in row.iter_mut() {
                *w /= &self.resources[*ri].throughput;
            }
        }
        for r in out.resources.iter_mut() {
            r.throughput = Rat::one();
        }
        // raw_throughput keeps the original capacities
        out.normalized = true;
        Ok(out)
    }

    /// Splits combined-resource usage into direct uses plus back-edge
    /// propagation. Requires a normalized mapping whose raw throughputs are
    /// still known.
    pub fn to_extended(&self) -> Result<ExtendedMapping, ModelError> {
        if !self.normalized {
            return Err(ModelError::NotNormalized);
        }
        let n = self.resources.len();
        // raw edge weight in µOP units
        let raw_w = |inst: &str, ri: usize| -> Rat {
            self.edges
                .get(inst)
                .and_then(|row| row.iter().find(|(i, _)| *i == ri))
                .map(|(_, w)| w * &self.raw_throughput[ri])
                .unwrap_or_else(Rat::zero)
        };
        // back edge (r, r') iff every instruction uses r' at least as much
        // as r and the raw throughput strictly increases
        let mut back: Vec<Vec<usize>> = alloc::vec![Vec::new(); n]; // incoming, per target
        let mut back_pairs = Vec::new();
        for src in 0..n {
            for dst in 0..n {
                if src == dst || self.raw_throughput[dst] <= self.raw_throughput[src] {
                    continue;
                }
                let dominated = self
                    .instructions
                    .keys()
                    .all(|i| raw_w(i, dst) >= raw_w(i, src));
                if dominated {
                    back[dst].push(src);
                    back_pairs.push((src, dst));
                }
            }
        }
        // strict throughput increase along edges rules cycles out; keep the
        // check so a logic regression cannot pass silently
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| {
            self.raw_throughput[*a]
                .cmp(&self.raw_throughput[*b])
                .then(a.cmp(b))
        });
        for (src, dst) in &back_pairs {
            let pos = |x: &usize| order.iter().position(|o| o == x).unwrap();
            if pos(src) >= pos(dst) {
                return Err(ModelError::CyclicBackEdges);
            }
        }
        // reduced raw weights, in ascending raw-throughput order
        let mut reduced: BTreeMap<String, Vec<(usize, Rat)>> = BTreeMap::new();
        for inst in self.instructions.keys() {
            let mut w_prime = alloc::vec![Rat::zero(); n];
            for &ri in &order {
                let base = raw_w(inst, ri);
                if base.is_zero() && back[ri].iter().all(|s| w_prime[*s].is_zero()) {
                    continue;
                }
                let carried: Rat = back[ri].iter().map(|s| w_prime[*s].clone()).sum();
                let w = base - carried;
                if w.is_negative() {
                    return Err(ModelError::NonDecomposable {
                        instruction: inst.clone(),
                        resource: self.resources[ri].name.clone(),
                    });
                }
                w_prime[ri] = w;
            }
            reduced.insert(
                inst.clone(),
                w_prime
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| !w.is_zero())
                    .collect(),
            );
        }
        Ok(ExtendedMapping {
            base: self.clone(),
            back_edges: back_pairs,
            incoming: back,
            reduced,
        })
    }
}

/// Extended form of a normalized conjunctive mapping: direct (reduced)
/// edges plus back edges carrying load from narrow resources into the
/// combined resources containing them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedMapping {
    base: ConjunctiveMapping,
    /// `(source, target)` resource-index pairs, raw weight 1 each.
    back_edges: Vec<(usize, usize)>,
    /// Incoming back-edge sources per target resource.
    incoming: Vec<Vec<usize>>,
    /// Reduced direct weights in raw µOP units.
    reduced: BTreeMap<String, Vec<(usize, Rat)>>,
}

impl ExtendedMapping {
    pub fn base(&self) -> &ConjunctiveMapping {
        &self.base
    }

    pub fn back_edges(&self) -> &[(usize, usize)] {
        &self.back_edges
    }

    /// Normalized weight of a back edge into `dst`: `1 / rho_raw(dst)`.
    pub fn normalized_back_weight(&self, dst: usize) -> Rat {
        Rat::one() / self.base.raw_throughput(dst)
    }

    /// Reduced direct weight of `(inst, ri)` in raw µOP units.
    pub fn reduced_weight(&self, inst: &str, ri: usize) -> Rat {
        self.reduced
            .get(inst)
            .and_then(|row| row.iter().find(|(i, _)| *i == ri))
            .map(|(_, w)| w.clone())
            .unwrap_or_else(Rat::zero)
    }

    pub fn reduced_row(&self, inst: &str) -> Option<&[(usize, Rat)]> {
        self.reduced.get(inst).map(Vec::as_slice)
    }

    /// Normalized load of every resource for one iteration of `k` executed
    /// in `t_end` cycles: direct reduced uses plus one hop of back-edge
    /// propagation.
    pub fn load(&self, k: &Microkernel, t_end: &Rat) -> Result<Vec<Rat>, ModelError> {
        if !t_end.is_positive() {
            return Err(ModelError::EmptyKernel);
        }
        let n = self.base.resources().len();
        let mut usage = alloc::vec![Rat::zero(); n]; // raw reduced usage w'_{K,r}
        for (name, mult) in k.terms() {
            let row = self
                .reduced
                .get(name)
                .ok_or_else(|| ModelError::UnknownInstruction(name.to_string()))?;
            for (ri, w) in row {
                usage[*ri] += mult * w;
            }
        }
        let mut loads = alloc::vec![Rat::zero(); n];
        for ri in 0..n {
            let carried: Rat = self.incoming[ri].iter().map(|s| usage[*s].clone()).sum();
            loads[ri] = (&usage[ri] + carried) / (self.base.raw_throughput(ri) * t_end);
        }
        Ok(loads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{rat, ratio};

    /// Normalized mapping of the six-instruction SKL port-0/1/6 subset.
    pub(crate) fn skl_subset_normalized() -> ConjunctiveMapping {
        let res = |name: &str, tp: i64| Resource {
            name: name.to_string(),
            throughput: rat(tp),
        };
        let raw = ConjunctiveMapping::new(
            alloc::vec![
                res("r0", 1),
                res("r1", 1),
                res("r6", 1),
                res("r01", 2),
                res("r06", 2),
                res("r016", 3),
            ],
            alloc::vec![
                Instruction::new("DIVPS", "sse"),
                Instruction::new("BSR", "base"),
                Instruction::new("JMP", "base"),
                Instruction::new("JNLE", "base"),
                Instruction::new("ADDSS", "sse"),
                Instruction::new("VCVTT", "sse"),
            ],
            alloc::vec![
                ("DIVPS".into(), "r0".into(), rat(1)),
                ("DIVPS".into(), "r01".into(), rat(1)),
                ("DIVPS".into(), "r06".into(), rat(1)),
                ("DIVPS".into(), "r016".into(), rat(1)),
                ("BSR".into(), "r1".into(), rat(1)),
                ("BSR".into(), "r01".into(), rat(1)),
                ("BSR".into(), "r016".into(), rat(1)),
                ("JMP".into(), "r6".into(), rat(1)),
                ("JMP".into(), "r06".into(), rat(1)),
                ("JMP".into(), "r016".into(), rat(1)),
                ("JNLE".into(), "r06".into(), rat(1)),
                ("JNLE".into(), "r016".into(), rat(1)),
                ("ADDSS".into(), "r01".into(), rat(1)),
                ("ADDSS".into(), "r016".into(), rat(1)),
                ("VCVTT".into(), "r01".into(), rat(2)),
                ("VCVTT".into(), "r016".into(), rat(2)),
            ],
            false,
        )
        .unwrap();
        raw.normalize().unwrap()
    }

    #[test]
    fn throughput_of_worked_examples() {
        let m = skl_subset_normalized();
        let k = Microkernel::of(&[("ADDSS", 2), ("BSR", 1)]);
        let t = m.throughput(&k).unwrap();
        assert_eq!(t.time, ratio(3, 2));
        assert_eq!(t.ipc, rat(2));
        assert!(t.bottlenecks.contains("r01"));

        let k2 = Microkernel::of(&[("ADDSS", 1), ("BSR", 2)]);
        let t2 = m.throughput(&k2).unwrap();
        assert_eq!(t2.time, rat(2));
        assert_eq!(t2.ipc, ratio(3, 2));
        assert!(t2.bottlenecks.contains("r1"));
    }

    #[test]
    fn throughput_identity_case() {
        let m = ConjunctiveMapping::new(
            alloc::vec![Resource {
                name: "R0".into(),
                throughput: rat(1)
            }],
            alloc::vec![Instruction::new("i", "base")],
            alloc::vec![("i".into(), "R0".into(), rat(1))],
            true,
        )
        .unwrap();
        let t = m.throughput(&Microkernel::of(&[("i", 1)])).unwrap();
        assert_eq!(t.time, rat(1));
        assert_eq!(t.ipc, rat(1));
    }

    #[test]
    fn throughput_rejects_unknown_instruction() {
        let m = skl_subset_normalized();
        let err = m
            .throughput(&Microkernel::of(&[("NOPE", 1)]))
            .unwrap_err();
        assert_eq!(err, ModelError::UnknownInstruction("NOPE".into()));
    }

    #[test]
    fn normalize_matches_figure_values() {
        let m = skl_subset_normalized();
        // VCVTT uses r01 twice with throughput 2
        assert_eq!(m.edge("VCVTT", "r01"), rat(1));
        assert_eq!(m.edge("ADDSS", "r016"), ratio(1, 3));
        assert_eq!(m.edge("ADDSS", "r01"), ratio(1, 2));
        // already normalized: returned unchanged
        assert_eq!(m.normalize().unwrap(), m);
    }

    #[test]
    fn normalize_rejects_nonpositive_throughput() {
        let err = ConjunctiveMapping::new(
            alloc::vec![Resource {
                name: "R0".into(),
                throughput: rat(0)
            }],
            alloc::vec![Instruction::new("i", "base")],
            alloc::vec![("i".into(), "R0".into(), rat(1))],
            false,
        )
        .unwrap_err();
        assert_eq!(err, ModelError::NonPositiveThroughput("R0".into()));
    }

    #[test]
    fn extended_form_back_edges_of_skl_subset() {
        let m = skl_subset_normalized();
        let ext = m.to_extended().unwrap();
        let ri = |n: &str| m.resource_index(n).unwrap();
        let has = |a: &str, b: &str| ext.back_edges().contains(&(ri(a), ri(b)));
        // chain r0 -> r01 -> r016 plus the remaining containments
        assert!(has("r0", "r01") && has("r01", "r016") && has("r0", "r016"));
        assert!(has("r1", "r01") && has("r1", "r016"));
        assert!(has("r6", "r06") && has("r6", "r016"));
        assert!(has("r0", "r06") && has("r06", "r016"));
        assert!(!has("r1", "r06") && !has("r6", "r01"));
        assert_eq!(ext.back_edges().len(), 9);
        // normalized back-edge weights within (0, 1/2]
        for (_, dst) in ext.back_edges() {
            let w = ext.normalized_back_weight(*dst);
            assert!(w.is_positive() && w <= ratio(1, 2));
        }
        // reduced edges collapse to a single direct resource per instruction
        assert_eq!(ext.reduced_weight("DIVPS", ri("r0")), rat(1));
        assert_eq!(ext.reduced_weight("DIVPS", ri("r01")), rat(0));
        assert_eq!(ext.reduced_weight("ADDSS", ri("r01")), rat(1));
        assert_eq!(ext.reduced_weight("ADDSS", ri("r016")), rat(0));
        assert_eq!(ext.reduced_weight("VCVTT", ri("r01")), rat(2));
    }

    #[test]
    fn extended_form_of_disjoint_instructions_is_the_base() {
        let m = ConjunctiveMapping::new(
            alloc::vec![
                Resource {
                    name: "R0".into(),
                    throughput: rat(1)
                },
                Resource {
                    name: "R1".into(),
                    throughput: rat(1)
                },
            ],
            alloc::vec![
                Instruction::new("a", "base"),
                Instruction::new("b", "base")
            ],
            alloc::vec![
                ("a".into(), "R0".into(), rat(1)),
                ("b".into(), "R1".into(), rat(1)),
            ],
            true,
        )
        .unwrap();
        let ext = m.to_extended().unwrap();
        assert!(ext.back_edges().is_empty());
        assert_eq!(ext.reduced_weight("a", 0), rat(1));
        assert_eq!(ext.reduced_weight("b", 1), rat(1));
    }

    #[test]
    fn load_of_worked_example() {
        let m = skl_subset_normalized();
        let ext = m.to_extended().unwrap();
        let k = Microkernel::of(&[("ADDSS", 2), ("BSR", 1)]);
        let t_end = ratio(3, 2);
        let loads = ext.load(&k, &t_end).unwrap();
        let ri = |n: &str| m.resource_index(n).unwrap();
        assert_eq!(loads[ri("r01")], rat(1));
        // untouched resource has load zero
        assert_eq!(loads[ri("r06")], rat(0));
        // doubling t_end halves every load
        let halved = ext.load(&k, &rat(3)).unwrap();
        for (l, h) in loads.iter().zip(&halved) {
            assert_eq!(l.clone(), h * rat(2));
        }
        // and the propagated loads equal the base-mapping loads
        let base_loads = m.loads(&k).unwrap();
        for (ri, l) in base_loads.iter().enumerate() {
            assert_eq!(loads[ri], l / &t_end);
        }
    }
}
