//! Conversion from a disjunctive port mapping to its conjunctive dual:
//! combined resources indexed by port subsets, plus the practical reduced
//! resource set built by union closure.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;


use crate::model::{
    ConjunctiveMapping, DisjunctiveMapping, Instruction, ModelError, Resource,
};
use crate::ratio::Rat;

/// Canonical resource name for a port subset, e.g. `r{0,1,6}`.
pub fn resource_name(subset: &BTreeSet<usize>) -> String {
    let mut s = String::from("r{");
    for (k, p) in subset.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        s.push_str(&p.to_string());
    }
    s.push('}');
    s
}

/// The r-dual: one resource per subset `J` with throughput `|J|`, an edge
/// `(v, r_J)` whenever `compat(v)` fits inside `J`, normalized so that the
/// edge weight is the µOP weight of `v` divided by `|J|`.
///
/// Errors if some instruction's compatibility set fits in none of the
/// subsets (it would end up with no resource at all).
pub fn r_dual(
    g: &DisjunctiveMapping,
    r_sets: &BTreeSet<BTreeSet<usize>>,
) -> Result<ConjunctiveMapping, ModelError> {
    let mut resources = Vec::new();
    for subset in r_sets {
        resources.push(Resource {
            name: resource_name(subset),
            throughput: Rat::from_integer((subset.len() as u64).into()),
        });
    }
    let instructions: Vec<Instruction> = g
        .rows()
        .map(|(n, r)| Instruction::new(n, &r.extension_class))
        .collect();
    let mut edges = Vec::new();
    for (name, row) in g.rows() {
        for subset in r_sets {
            if row.compat.is_subset(subset) {
                edges.push((
                    name.to_string(),
                    resource_name(subset),
                    Rat::from_integer(row.weight.into()),
                ));
            }
        }
    }
    let raw = ConjunctiveMapping::new(resources, instructions, edges, false)?;
    raw.normalize()
}

/// Starts from the compatibility sets and repeatedly adds the union of any
/// two intersecting members until fixpoint.
pub fn union_closure(g: &DisjunctiveMapping) -> BTreeSet<BTreeSet<usize>> {
    let mut sets: BTreeSet<BTreeSet<usize>> = g.rows().map(|(_, r)| r.compat.clone()).collect();
    loop {
        let mut added = Vec::new();
        let all: Vec<&BTreeSet<usize>> = sets.iter().collect();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if a.intersection(b).next().is_some() {
                    let union: BTreeSet<usize> = a.union(b).copied().collect();
                    if !sets.contains(&union) {
                        added.push(union);
                    }
                }
            }
        }
        if added.is_empty() {
            return sets;
        }
        sets.extend(added);
    }
}

/// Every nonempty port subset; only for equivalence testing at small port
/// counts.
pub fn powerset(g: &DisjunctiveMapping) -> BTreeSet<BTreeSet<usize>> {
    let n = g.num_ports();
    assert!(n <= 20, "powerset of {n} ports");
    let mut sets = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        sets.insert((0..n).filter(|p| mask & (1 << p) != 0).collect());
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Microkernel;
    use crate::oracle::{
        assignment_throughput_lp, generate_truth, skl_port016_preset, TruthGen,
    };
    use crate::ratio::{rat, ratio};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn set(ports: &[usize]) -> BTreeSet<usize> {
        ports.iter().copied().collect()
    }

    #[test]
    fn union_closure_of_preset_has_six_sets() {
        let g = skl_port016_preset();
        let closure = union_closure(&g);
        let expected: BTreeSet<BTreeSet<usize>> = [
            set(&[0]),
            set(&[1]),
            set(&[2]),
            set(&[0, 1]),
            set(&[0, 2]),
            set(&[0, 1, 2]),
        ]
        .into_iter()
        .collect();
        // note r{1,6} is absent: {1} and {6} do not intersect
        assert_eq!(closure, expected);
    }

    #[test]
    fn union_closure_of_disjoint_rows_is_the_rows() {
        let g = generate_truth(&TruthGen {
            ports: 4,
            instructions: 4,
            max_compat: 1,
            ..TruthGen::default()
        });
        let closure = union_closure(&g);
        let rows: BTreeSet<BTreeSet<usize>> = g.rows().map(|(_, r)| r.compat.clone()).collect();
        assert_eq!(closure, rows);
    }

    #[test]
    fn preset_dual_matches_figure() {
        let g = skl_port016_preset();
        let dual = r_dual(&g, &union_closure(&g)).unwrap();
        assert_eq!(dual.resources().len(), 6);
        let tp = |name: &str| {
            let ri = dual.resource_index(name).unwrap();
            dual.raw_throughput(ri).clone()
        };
        assert_eq!(tp("r{0,1}"), rat(2));
        assert_eq!(tp("r{0,1,2}"), rat(3));
        // normalized per-edge weights: µOP weight over |J|
        assert_eq!(dual.edge("VCVTT", "r{0,1}"), rat(1));
        assert_eq!(dual.edge("ADDSS", "r{0,1,2}"), ratio(1, 3));
        assert_eq!(dual.edge("ADDSS", "r{0,1}"), ratio(1, 2));
        assert_eq!(dual.edge("JNLE", "r{0,1}"), rat(0));
    }

    #[test]
    fn singleton_all_ports_dual() {
        let g = skl_port016_preset();
        let sets: BTreeSet<BTreeSet<usize>> = [set(&[0, 1, 2])].into_iter().collect();
        let dual = r_dual(&g, &sets).unwrap();
        assert_eq!(dual.resources().len(), 1);
        assert_eq!(dual.raw_throughput(0), &rat(3));
        for (name, _) in g.rows() {
            assert!(dual.edge(name, "r{0,1,2}") > rat(0));
        }
    }

    fn random_kernel(g: &DisjunctiveMapping, rng: &mut ChaCha20Rng) -> Microkernel {
        let names: Vec<&str> = g.instruction_names().collect();
        let count = 1 + (rng.next_u64() as usize) % 3.min(names.len());
        let mut picks = BTreeSet::new();
        while picks.len() < count {
            picks.insert(names[(rng.next_u64() as usize) % names.len()]);
        }
        Microkernel::new(
            picks
                .into_iter()
                .map(|n| (n.to_string(), rat(1 + (rng.next_u64() % 4) as i64))),
        )
        .unwrap()
    }

    /// Dual throughput never beats the assignment LP, the powerset dual
    /// matches it exactly, and the union closure already suffices.
    #[test]
    fn dual_equivalence_on_random_mappings() {
        for seed in 0..30u64 {
            let g = generate_truth(&TruthGen {
                ports: 2 + (seed as usize) % 4,
                instructions: 7,
                seed,
                max_compat: 3,
                max_weight: 2,
                cover_ports: false,
                ..TruthGen::default()
            });
            let power = r_dual(&g, &powerset(&g)).unwrap();
            let closure = r_dual(&g, &union_closure(&g)).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xbeef);
            for _ in 0..6 {
                let k = random_kernel(&g, &mut rng);
                let t_true = assignment_throughput_lp(&g, &k).unwrap();
                let t_power = power.throughput(&k).unwrap().time;
                let t_closure = closure.throughput(&k).unwrap().time;
                assert_eq!(t_power, t_true, "powerset dual is exact");
                assert_eq!(t_closure, t_true, "union closure suffices");
                // any smaller family can only under-estimate the time
                let single: BTreeSet<BTreeSet<usize>> =
                    [(0..g.num_ports()).collect()].into_iter().collect();
                let coarse = r_dual(&g, &single).unwrap();
                assert!(coarse.throughput(&k).unwrap().time <= t_true);
            }
            assert!(union_closure(&g).len() <= (1 << g.num_ports()) - 1);
        }
    }
}
