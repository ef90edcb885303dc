//! Basic-instruction selection: low-IPC filtering, equivalence classes over
//! the quadratic benchmarks, the very-basic clique of pairwise-disjoint
//! instructions, and the greedier pre-order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num::{Signed, Zero};

use crate::ratio::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionError {
    MissingSolo(String),
    MissingPair(String, String),
    /// Requested basic-set size is smaller than the very-basic clique.
    TargetTooSmall { requested: usize, very_basic: usize },
}

impl fmt::Display for SelectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionError::MissingSolo(a) => write!(f, "no solo measurement for `{a}`"),
            SelectionError::MissingPair(a, b) => {
                write!(f, "no pair measurement for `{a}`/`{b}`")
            }
            SelectionError::TargetTooSmall {
                requested,
                very_basic,
            } => write!(
                f,
                "target basic-set size {requested} is below the very-basic clique size {very_basic}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SelectionError {}

/// Solo and pairwise IPC measurements over the filtered candidates. The
/// pair entry for `(a, b)` is the IPC of the kernel `a^ipc(a) b^ipc(b)`
/// with ε-rounded multiplicities; it is symmetric by construction.
#[derive(Debug, Clone, Default)]
pub struct QuadraticTable {
    classes: BTreeMap<String, String>,
    solo: BTreeMap<String, Rat>,
    pair: BTreeMap<(String, String), Rat>,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl QuadraticTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_solo(&mut self, name: &str, class: &str, ipc: Rat) {
        self.classes.insert(name.to_string(), class.to_string());
        self.solo.insert(name.to_string(), ipc);
    }

    pub fn insert_pair(&mut self, a: &str, b: &str, ipc: Rat) {
        self.pair.insert(pair_key(a, b), ipc);
    }

    pub fn solo(&self, name: &str) -> Result<&Rat, SelectionError> {
        self.solo
            .get(name)
            .ok_or_else(|| SelectionError::MissingSolo(name.to_string()))
    }

    pub fn pair(&self, a: &str, b: &str) -> Result<&Rat, SelectionError> {
        self.pair
            .get(&pair_key(a, b))
            .ok_or_else(|| SelectionError::MissingPair(a.to_string(), b.to_string()))
    }

    pub fn class(&self, name: &str) -> &str {
        self.classes.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.solo.keys().map(String::as_str)
    }

    /// IPC of the probing kernel of `x` against `p`; probing an instruction
    /// with itself degenerates to its solo kernel.
    fn probe(&self, x: &str, p: &str) -> Result<Rat, SelectionError> {
        if x == p {
            self.solo(x).cloned()
        } else {
            self.pair(x, p).cloned()
        }
    }

    fn same_class(&self, a: &str, b: &str) -> bool {
        self.class(a) == self.class(b)
    }
}

/// Outcome of the low-IPC filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    /// Candidates for the basic set.
    pub candidates: Vec<String>,
    /// Below the basic-candidate bar but still mapped during completion.
    pub completion_only: Vec<String>,
    /// IPC too low to be of any use; dropped entirely.
    pub discarded: Vec<String>,
}

/// Removes `a` from basic candidacy when `ipc(a) <= 1 - eps_low` and drops
/// instructions with `ipc < discard_below` outright.
pub fn filter_low_ipc(
    solos: &BTreeMap<String, Rat>,
    eps_low: &Rat,
    discard_below: &Rat,
) -> FilterOutcome {
    let bar = Rat::from_integer(1.into()) - eps_low;
    let mut out = FilterOutcome {
        candidates: Vec::new(),
        completion_only: Vec::new(),
        discarded: Vec::new(),
    };
    for (name, ipc) in solos {
        if ipc < discard_below {
            out.discarded.push(name.clone());
        } else if *ipc <= bar {
            out.completion_only.push(name.clone());
        } else {
            out.candidates.push(name.clone());
        }
    }
    out
}

/// Distance between two same-class instructions: the largest gap between
/// their probing-kernel IPCs over every candidate probe.
fn distance(table: &QuadraticTable, members: &[String], a: &str, b: &str) -> Result<Rat, SelectionError> {
    let mut worst = Rat::zero();
    for p in members {
        let da = table.probe(a, p)?;
        let db = table.probe(b, p)?;
        let gap = (da - db).abs();
        if gap > worst {
            worst = gap;
        }
    }
    Ok(worst)
}

/// Complete-linkage agglomerative clustering of the candidates, cut at
/// `tol`; instructions of different extension classes never merge. Returns
/// the classes keyed by their representative (lexicographically smallest
/// member).
pub fn equivalence_classes(
    table: &QuadraticTable,
    candidates: &[String],
    tol: &Rat,
) -> Result<BTreeMap<String, Vec<String>>, SelectionError> {
    let mut result = BTreeMap::new();
    let mut by_class: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for c in candidates {
        by_class.entry(table.class(c)).or_default().push(c.clone());
    }
    for (_, members) in by_class {
        // pairwise distances within the class
        let n = members.len();
        let mut dist = alloc::vec![alloc::vec![Rat::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(table, &members, &members[i], &members[j])?;
                dist[i][j] = d.clone();
                dist[j][i] = d;
            }
        }
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| alloc::vec![i]).collect();
        loop {
            let mut best: Option<(Rat, usize, usize)> = None;
            for ci in 0..clusters.len() {
                for cj in (ci + 1)..clusters.len() {
                    let mut link = Rat::zero();
                    for i in &clusters[ci] {
                        for j in &clusters[cj] {
                            if dist[*i][*j] > link {
                                link = dist[*i][*j].clone();
                            }
                        }
                    }
                    if link <= *tol && best.as_ref().is_none_or(|(b, _, _)| link < *b) {
                        best = Some((link, ci, cj));
                    }
                }
            }
            match best {
                Some((_, ci, cj)) => {
                    let merged = clusters.remove(cj);
                    clusters[ci].extend(merged);
                }
                None => break,
            }
        }
        for cluster in clusters {
            let mut names: Vec<String> = cluster.into_iter().map(|i| members[i].clone()).collect();
            names.sort();
            result.insert(names[0].clone(), names);
        }
    }
    Ok(result)
}

/// `b` is disjoint from `a` when their pair kernel is IPC-additive.
fn disjoint(table: &QuadraticTable, a: &str, b: &str, tol: &Rat) -> Result<bool, SelectionError> {
    let sum = table.solo(a)?.clone() + table.solo(b)?;
    let pair = table.pair(a, b)?;
    Ok((pair - &sum).abs() <= tol * &sum)
}

/// Disjointness neighbourhoods over the class representatives; edges only
/// connect instructions of the same extension class (cross-class kernels
/// are never measured).
pub fn disjointness_graph(
    table: &QuadraticTable,
    reps: &[String],
    tol: &Rat,
) -> Result<BTreeMap<String, BTreeSet<String>>, SelectionError> {
    let mut dj: BTreeMap<String, BTreeSet<String>> =
        reps.iter().map(|r| (r.clone(), BTreeSet::new())).collect();
    for (i, a) in reps.iter().enumerate() {
        for b in &reps[i + 1..] {
            if !table.same_class(a, b) {
                continue;
            }
            if disjoint(table, a, b, tol)? {
                dj.get_mut(a).unwrap().insert(b.clone());
                dj.get_mut(b).unwrap().insert(a.clone());
            }
        }
    }
    Ok(dj)
}

/// Greedy clique of pairwise-disjoint representatives, scanned in the
/// order: larger disjointness degree, then larger solo IPC, then name.
/// Multi-class instruction sets contribute one clique per class.
pub fn select_very_basic(
    table: &QuadraticTable,
    reps: &[String],
    dj: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Vec<String>, SelectionError> {
    let mut classes: BTreeSet<&str> = reps.iter().map(|r| table.class(r)).collect();
    let mut clique = Vec::new();
    while let Some(class) = classes.iter().next().copied() {
        classes.remove(class);
        let mut members: Vec<&String> = reps.iter().filter(|r| table.class(r) == class).collect();
        members.sort_by(|a, b| {
            let deg = |x: &String| dj.get(x).map(BTreeSet::len).unwrap_or(0);
            deg(b)
                .cmp(&deg(a))
                .then_with(|| {
                    let sa = table.solo(a).cloned().unwrap_or_else(|_| Rat::zero());
                    let sb = table.solo(b).cloned().unwrap_or_else(|_| Rat::zero());
                    sb.cmp(&sa)
                })
                .then_with(|| a.cmp(b))
        });
        let mut class_clique: Vec<String> = Vec::new();
        for cand in members {
            let ok = class_clique
                .iter()
                .all(|m| dj.get(cand).is_some_and(|set| set.contains(m)));
            if ok {
                class_clique.push(cand.clone());
            }
        }
        clique.extend(class_clique);
    }
    Ok(clique)
}

/// Ranks the remaining representatives by how much their pair kernels slow
/// every probe down (lower pair IPC = greedier, the default), and fills the
/// basic set until `n` instructions. `n == 0` selects everything.
pub fn select_most_greedy(
    table: &QuadraticTable,
    reps: &[String],
    already: &[String],
    n: usize,
    greedier_high_ipc: bool,
) -> Result<Vec<String>, SelectionError> {
    if n != 0 && n < already.len() {
        return Err(SelectionError::TargetTooSmall {
            requested: n,
            very_basic: already.len(),
        });
    }
    let taken: BTreeSet<&String> = already.iter().collect();
    let mut candidates: Vec<(&String, Rat)> = Vec::new();
    for r in reps {
        if taken.contains(r) {
            continue;
        }
        // total slowdown across same-class probes linearizes the greedier
        // pre-order; incomparable elements fall back to it anyway
        let probes: Vec<&String> = reps.iter().filter(|p| table.same_class(r, p)).collect();
        let mut total = Rat::zero();
        for p in &probes {
            total += table.probe(r, p)?;
        }
        let count = Rat::from_integer((probes.len().max(1) as u64).into());
        candidates.push((r, total / count));
    }
    candidates.sort_by(|(a, sa), (b, sb)| {
        let ord = if greedier_high_ipc {
            sb.cmp(sa)
        } else {
            sa.cmp(sb)
        };
        ord.then_with(|| a.cmp(b))
    });
    let budget = if n == 0 {
        candidates.len()
    } else {
        n - already.len()
    };
    Ok(candidates
        .into_iter()
        .take(budget)
        .map(|(r, _)| r.clone())
        .collect())
}

/// The assembled basic-instruction selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicInstructionSet {
    pub very_basic: Vec<String>,
    pub most_greedy: Vec<String>,
    /// Union of the two, sorted.
    pub all: Vec<String>,
    pub classes: BTreeMap<String, Vec<String>>,
    pub dj: BTreeMap<String, BTreeSet<String>>,
    /// Same-class representatives each basic instruction is *not*
    /// IPC-additive with.
    pub contended: BTreeMap<String, BTreeSet<String>>,
}

/// Runs the whole selection over a measured quadratic table.
pub fn select_basic(
    table: &QuadraticTable,
    candidates: &[String],
    n_basic: usize,
    tol: &Rat,
    greedier_high_ipc: bool,
) -> Result<BasicInstructionSet, SelectionError> {
    let classes = equivalence_classes(table, candidates, tol)?;
    let reps: Vec<String> = classes.keys().cloned().collect();
    let dj = disjointness_graph(table, &reps, tol)?;
    let very_basic = select_very_basic(table, &reps, &dj)?;
    let most_greedy = select_most_greedy(table, &reps, &very_basic, n_basic, greedier_high_ipc)?;
    let mut all: Vec<String> = very_basic.iter().chain(&most_greedy).cloned().collect();
    all.sort();
    let mut contended = BTreeMap::new();
    for r in &all {
        let set: BTreeSet<String> = all
            .iter()
            .filter(|o| {
                *o != r
                    && table.same_class(r, o)
                    && !dj.get(r).is_some_and(|s| s.contains(*o))
            })
            .cloned()
            .collect();
        contended.insert(r.clone(), set);
    }
    Ok(BasicInstructionSet {
        very_basic,
        most_greedy,
        all,
        classes,
        dj,
        contended,
    })
}
