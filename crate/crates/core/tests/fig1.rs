//! End-to-end inference on the three-port Skylake-subset preset: selection,
//! core mapping, saturating kernels, completion, and prediction must all
//! reproduce the reference dual exactly.

use std::collections::{BTreeMap, BTreeSet};

use resmap_core::dualize::{r_dual, union_closure};
use resmap_core::model::Microkernel;
use resmap_core::oracle::{measure, skl_port016_preset, BenchmarkDb, MeasurementConfig};
use resmap_core::pipeline::{
    assemble_mapping, complete_instruction, core_fixpoint, run_measure, run_select, Bench,
    PipelineConfig,
};
use resmap_core::ratio::{rat, ratio, Rat};
use resmap_core::selection::select_basic;

fn preset_bench() -> Bench {
    Bench::simulated(skl_port016_preset(), MeasurementConfig::exact(0))
}

fn preset_instructions() -> Vec<(String, String)> {
    skl_port016_preset()
        .rows()
        .map(|(n, r)| (n.to_string(), r.extension_class.clone()))
        .collect()
}

/// The paper-facing configuration: five basic instructions, greedier =
/// higher pair IPC, which reproduces the published basic set.
fn paper_cfg() -> PipelineConfig {
    PipelineConfig {
        n_basic: 5,
        greedier_high_ipc: true,
        ..PipelineConfig::default()
    }
}

#[test]
fn selection_keeps_all_preset_instructions() {
    let mut bench = preset_bench();
    let (_, filter) = run_measure(&mut bench, &preset_instructions(), &paper_cfg()).unwrap();
    assert_eq!(filter.candidates.len(), 6);
    assert!(filter.completion_only.is_empty());
    assert!(filter.discarded.is_empty());
}

#[test]
fn very_basic_clique_is_the_single_port_triple() {
    let mut bench = preset_bench();
    let (table, filter, _) = run_select(&mut bench, &preset_instructions(), &paper_cfg()).unwrap();
    let tol = paper_cfg().tolerance(&bench.meas);
    let basic = select_basic(&table, &filter.candidates, 0, &tol, true).unwrap();
    assert_eq!(basic.classes.len(), 6);
    let clique: BTreeSet<&str> = basic.very_basic.iter().map(String::as_str).collect();
    assert_eq!(clique, ["BSR", "DIVPS", "JMP"].into_iter().collect());
    // the published five-instruction basic set
    let five = select_basic(&table, &filter.candidates, 5, &tol, true).unwrap();
    let all: BTreeSet<&str> = five.all.iter().map(String::as_str).collect();
    assert_eq!(
        all,
        ["ADDSS", "BSR", "DIVPS", "JMP", "JNLE"].into_iter().collect()
    );
}

#[test]
fn duplicate_instruction_lands_in_the_same_class() {
    use resmap_core::model::{CompatRow, DisjunctiveMapping};
    // preset extended with an exact copy of ADDSS
    let base = skl_port016_preset();
    let mut rows: Vec<(String, CompatRow)> = base
        .rows()
        .map(|(n, r)| (n.to_string(), r.clone()))
        .collect();
    rows.push((
        "ADDSS2".to_string(),
        CompatRow {
            extension_class: "base".into(),
            compat: [0, 1].into_iter().collect(),
            weight: 1,
        },
    ));
    let g = DisjunctiveMapping::new(base.ports().to_vec(), rows).unwrap();
    let insts: Vec<(String, String)> = g
        .rows()
        .map(|(n, r)| (n.to_string(), r.extension_class.clone()))
        .collect();
    let mut bench = Bench::simulated(g, MeasurementConfig::exact(0));
    let (_, _, basic) = run_select(&mut bench, &insts, &PipelineConfig::default()).unwrap();
    assert_eq!(basic.classes.len(), 6, "{:?}", basic.classes);
    assert_eq!(
        basic.classes.get("ADDSS").map(Vec::as_slice),
        Some(["ADDSS".to_string(), "ADDSS2".to_string()].as_slice())
    );
}

#[test]
fn core_mapping_recovers_the_reference_dual() {
    let cfg = paper_cfg();
    let mut bench = preset_bench();
    let (table, _, basic) = run_select(&mut bench, &preset_instructions(), &cfg).unwrap();
    assert_eq!(
        basic.all,
        ["ADDSS", "BSR", "DIVPS", "JMP", "JNLE"]
            .map(String::from)
            .to_vec()
    );
    let state = core_fixpoint(&basic, &table, &mut bench, &cfg).unwrap();
    assert_eq!(state.objective, rat(0), "log:\n{}", state.log);
    assert!(state.warnings.is_empty(), "{:?}", state.warnings);

    // shape support is the reference dual's, up to renaming
    let sets = state.shape.support_sets();
    let expect: BTreeSet<BTreeSet<String>> = [
        vec!["DIVPS"],
        vec!["BSR"],
        vec!["JMP"],
        vec!["ADDSS", "BSR", "DIVPS"],
        vec!["DIVPS", "JMP", "JNLE"],
        vec!["ADDSS", "BSR", "DIVPS", "JMP", "JNLE"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    assert_eq!(sets, expect);

    // weights equal the normalized dual weights edge by edge
    let truth = skl_port016_preset();
    let dual = r_dual(&truth, &union_closure(&truth)).unwrap();
    let col_users = |c: usize| -> BTreeSet<String> {
        state.shape.columns[c]
            .iter()
            .map(|i| state.shape.instructions[*i].clone())
            .collect()
    };
    let dual_res_by_users: BTreeMap<BTreeSet<String>, String> = dual
        .resources()
        .iter()
        .map(|r| {
            let users: BTreeSet<String> = dual
                .instructions()
                .filter(|(n, _)| {
                    state.instructions.contains(&n.to_string())
                        && dual.edge(n, &r.name) > rat(0)
                })
                .map(|(n, _)| n.to_string())
                .collect();
            (users, r.name.clone())
        })
        .collect();
    for (inst, row) in &state.weights {
        for (c, w) in row {
            let users = col_users(*c);
            let dual_name = dual_res_by_users
                .get(&users)
                .unwrap_or_else(|| panic!("no dual resource with users {users:?}"));
            assert_eq!(
                *w,
                dual.edge(inst, dual_name),
                "weight of ({inst}, {dual_name})"
            );
        }
    }

    // saturating kernels as published: ADDSS alone saturates the combined
    // port-0/1 resource, the ADDSS/JNLE mix saturates the full resource
    let find_col = |users: &[&str]| -> usize {
        let want: BTreeSet<String> = users.iter().map(|s| s.to_string()).collect();
        (0..state.shape.num_resources())
            .find(|c| col_users(*c) == want)
            .expect("column exists")
    };
    let r01 = find_col(&["ADDSS", "BSR", "DIVPS"]);
    assert_eq!(
        state.sat[&r01].canonical_key().unwrap(),
        "ADDSS^1",
        "sat[r01]"
    );
    let r016 = find_col(&["ADDSS", "BSR", "DIVPS", "JMP", "JNLE"]);
    let sat016: BTreeSet<&str> = state.sat[&r016].names().collect();
    assert_eq!(sat016, ["ADDSS", "JNLE"].into_iter().collect(), "sat[r016]");
    let r0 = find_col(&["DIVPS"]);
    assert_eq!(state.sat[&r0].canonical_key().unwrap(), "DIVPS^1");

    // completing the held-out double-µOP instruction finds its full row
    let comp = complete_instruction("VCVTT", &state, &mut bench, &cfg).unwrap();
    assert_eq!(comp.objective, rat(0));
    assert!(comp.undetermined.is_empty());
    let row: BTreeMap<usize, Rat> = comp.row.iter().cloned().collect();
    assert_eq!(row.get(&r01), Some(&rat(1)), "normalized VCVTT weight on r01");
    assert_eq!(row.get(&r016), Some(&ratio(2, 3)));
    assert_eq!(row.len(), 2);

    // completing a core instruction recovers its core row
    let again = complete_instruction("ADDSS", &state, &mut bench, &cfg).unwrap();
    assert_eq!(again.objective, rat(0));
    let expect_row: BTreeMap<usize, Rat> = state.weights["ADDSS"].iter().cloned().collect();
    let got: BTreeMap<usize, Rat> = again.row.iter().cloned().collect();
    assert_eq!(got, expect_row);

    // the assembled mapping predicts the oracle exactly on the worked
    // examples and on random held-out kernels
    let class_of: BTreeMap<String, String> = preset_instructions().into_iter().collect();
    let mapping = assemble_mapping(&state, &[comp], &class_of).unwrap();
    let t = mapping
        .throughput(&Microkernel::of(&[("ADDSS", 2), ("BSR", 1)]))
        .unwrap();
    assert_eq!(t.ipc, rat(2));
    let t = mapping
        .throughput(&Microkernel::of(&[("ADDSS", 1), ("BSR", 2)]))
        .unwrap();
    assert_eq!(t.ipc, ratio(3, 2));

    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
    let names = ["ADDSS", "BSR", "DIVPS", "JMP", "JNLE", "VCVTT"];
    let exact = MeasurementConfig::exact(0);
    let mut db = BenchmarkDb::new(exact.fingerprint());
    for _ in 0..100 {
        let count = 1 + (rng.next_u64() as usize) % 4;
        let mut picks = BTreeSet::new();
        while picks.len() < count {
            picks.insert(names[(rng.next_u64() as usize) % names.len()]);
        }
        let kernel = Microkernel::new(
            picks
                .into_iter()
                .map(|n| (n.to_string(), rat(1 + (rng.next_u64() % 3) as i64))),
        )
        .unwrap();
        let native = measure(&truth, &kernel, &exact, &mut db).unwrap();
        let predicted = mapping.throughput(&kernel).unwrap().ipc;
        assert_eq!(predicted, native, "kernel {}", kernel.canonical_key().unwrap());
    }
}
