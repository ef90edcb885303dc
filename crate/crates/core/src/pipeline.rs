//! Orchestration of the inference pipeline: benchmark materialization, the
//! core-mapping fixpoint with kernel enrichment and saturating-kernel
//! selection, and per-instruction completion against the frozen core.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num::bigint::BigInt;
use num::{Integer, One, Signed, Zero};

use crate::lp::{self, BwpInput, KernelObs, LpError, ShapeInput, ShapeResult, WeightResult};
use crate::model::{
    ConjunctiveMapping, DisjunctiveMapping, Instruction, Microkernel, ModelError, Resource,
};
use crate::oracle::{measure, BenchmarkDb, MeasurementConfig, OracleError};
use crate::ratio::{from_f64, round_to_grid, Rat};
use crate::selection::{
    filter_low_ipc, select_basic, BasicInstructionSet, FilterOutcome, QuadraticTable,
    SelectionError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    Oracle(OracleError),
    Selection(SelectionError),
    Lp(LpError),
    Model(ModelError),
    /// The fixpoint loop hit its round cap before converging.
    IterationCap { rounds: usize },
    MissingStage(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Oracle(e) => write!(f, "{e}"),
            PipelineError::Selection(e) => write!(f, "{e}"),
            PipelineError::Lp(e) => write!(f, "{e}"),
            PipelineError::Model(e) => write!(f, "{e}"),
            PipelineError::IterationCap { rounds } => {
                write!(f, "core mapping did not converge within {rounds} rounds")
            }
            PipelineError::MissingStage(s) => write!(f, "missing upstream artifact: {s}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PipelineError {}

impl From<OracleError> for PipelineError {
    fn from(e: OracleError) -> Self {
        PipelineError::Oracle(e)
    }
}
impl From<SelectionError> for PipelineError {
    fn from(e: SelectionError) -> Self {
        PipelineError::Selection(e)
    }
}
impl From<LpError> for PipelineError {
    fn from(e: LpError) -> Self {
        PipelineError::Lp(e)
    }
}
impl From<ModelError> for PipelineError {
    fn from(e: ModelError) -> Self {
        PipelineError::Model(e)
    }
}

/// Tunables of the whole pipeline, all recorded into run manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Exponent of the `a^M b` seed kernels.
    pub m_exponent: u64,
    /// Exponent scale of the saturating kernels during completion.
    pub l_exponent: u64,
    /// Grid for benchmark-coefficient rounding.
    pub eps_round: Rat,
    /// Basic-candidate bar: drop when `ipc <= 1 - eps_low`.
    pub eps_low: Rat,
    /// Instructions below this IPC are discarded outright.
    pub discard_below: Rat,
    /// Edge threshold when building enrichment kernels.
    pub eps_new: Rat,
    /// Target basic-set size per extension class; 0 keeps every
    /// representative.
    pub n_basic: usize,
    /// Cap on shape/enrichment rounds.
    pub max_rounds: usize,
    /// Flips the greedier pre-order direction.
    pub greedier_high_ipc: bool,
    /// IPC-equality tolerance override; derived from the noise level when
    /// absent.
    pub tol: Option<Rat>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let twentieth = Rat::new(BigInt::one(), 20.into());
        Self {
            m_exponent: 4,
            l_exponent: 4,
            eps_round: twentieth.clone(),
            eps_low: twentieth.clone(),
            discard_below: twentieth.clone(),
            eps_new: twentieth,
            n_basic: 0,
            max_rounds: 20,
            greedier_high_ipc: false,
            tol: None,
        }
    }
}

impl PipelineConfig {
    /// Tolerance for IPC equality tests: `2 * noise + 0.02`, floored at
    /// `1e-9` so that exact measurements compare exactly.
    pub fn tolerance(&self, meas: &MeasurementConfig) -> Rat {
        if let Some(t) = &self.tol {
            return t.clone();
        }
        if meas.is_exact() {
            Rat::new(BigInt::one(), BigInt::from(1_000_000_000u64))
        } else {
            from_f64(2.0 * meas.noise_rel_sd + 0.02).expect("finite tolerance")
        }
    }
}

/// Where measurements come from: the simulated CPU, or replay of a
/// persisted database with no oracle behind it.
#[derive(Debug, Clone)]
pub enum Backend {
    Simulated(DisjunctiveMapping),
    Replay,
}

/// A measurement session: backend, noise configuration and the database
/// all measured kernels land in.
#[derive(Debug, Clone)]
pub struct Bench {
    pub backend: Backend,
    pub meas: MeasurementConfig,
    pub db: BenchmarkDb,
}

impl Bench {
    pub fn simulated(truth: DisjunctiveMapping, meas: MeasurementConfig) -> Self {
        let db = BenchmarkDb::new(meas.fingerprint());
        Self {
            backend: Backend::Simulated(truth),
            meas,
            db,
        }
    }

    pub fn replay(db: BenchmarkDb) -> Self {
        Self {
            backend: Backend::Replay,
            meas: MeasurementConfig::default(),
            db,
        }
    }

    pub fn measure_kernel(&mut self, k: &Microkernel) -> Result<Rat, PipelineError> {
        match &self.backend {
            Backend::Simulated(truth) => Ok(measure(truth, k, &self.meas, &mut self.db)?),
            Backend::Replay => {
                let key = k
                    .canonical_key()
                    .map_err(|e| PipelineError::Oracle(OracleError::NonIntegralKernel(e.to_string())))?;
                match self.db.get(&key) {
                    Some(v) => Ok(v.as_rat()),
                    None => Err(PipelineError::Oracle(OracleError::MissingMeasurement(key))),
                }
            }
        }
    }
}

/// Turns ideal rational exponents into a benchmark: each coefficient is
/// rounded to the `eps` grid (at least one step), scaled to integers, and
/// reduced. `ipc(a)=0.06, ipc(b)=1` comes out as `a^1 b^20`.
pub fn materialize(
    terms: &[(String, Rat)],
    eps: &Rat,
) -> Result<Microkernel, ModelError> {
    let mut steps: Vec<(String, BigInt)> = Vec::with_capacity(terms.len());
    for (name, ideal) in terms {
        let snapped = round_to_grid(ideal, eps);
        let snapped = if snapped.is_positive() {
            snapped
        } else {
            eps.clone()
        };
        let count = snapped / eps;
        debug_assert!(count.denom().is_one());
        steps.push((name.clone(), count.numer().clone()));
    }
    let gcd = steps
        .iter()
        .fold(BigInt::zero(), |acc, (_, n)| acc.gcd(n));
    let gcd = if gcd.is_zero() { BigInt::one() } else { gcd };
    Microkernel::new(
        steps
            .into_iter()
            .map(|(name, n)| (name, Rat::from_integer(n / &gcd))),
    )
}

/// Measures solo kernels for every instruction, applies the low-IPC
/// filter, and fills the quadratic table over the surviving candidates.
pub fn run_measure(
    bench: &mut Bench,
    insts: &[(String, String)],
    cfg: &PipelineConfig,
) -> Result<(QuadraticTable, FilterOutcome), PipelineError> {
    let mut solos = BTreeMap::new();
    let mut table = QuadraticTable::new();
    for (name, class) in insts {
        let solo = bench.measure_kernel(&Microkernel::of(&[(name, 1)]))?;
        table.insert_solo(name, class, solo.clone());
        solos.insert(name.clone(), solo);
    }
    let filter = filter_low_ipc(&solos, &cfg.eps_low, &cfg.discard_below);
    let class_of: BTreeMap<&str, &str> = insts
        .iter()
        .map(|(n, c)| (n.as_str(), c.as_str()))
        .collect();
    for (i, a) in filter.candidates.iter().enumerate() {
        for b in &filter.candidates[i + 1..] {
            if class_of[a.as_str()] != class_of[b.as_str()] {
                continue;
            }
            let kernel = materialize(
                &[
                    (a.clone(), solos[a].clone()),
                    (b.clone(), solos[b].clone()),
                ],
                &cfg.eps_round,
            )?;
            let ipc = bench.measure_kernel(&kernel)?;
            table.insert_pair(a, b, ipc);
        }
    }
    Ok((table, filter))
}

/// Pure function of the database: re-derives the table and runs selection.
pub fn run_select(
    bench: &mut Bench,
    insts: &[(String, String)],
    cfg: &PipelineConfig,
) -> Result<(QuadraticTable, FilterOutcome, BasicInstructionSet), PipelineError> {
    let (table, filter) = run_measure(bench, insts, cfg)?;
    let tol = cfg.tolerance(&bench.meas);
    let basic = select_basic(
        &table,
        &filter.candidates,
        cfg.n_basic,
        &tol,
        cfg.greedier_high_ipc,
    )?;
    Ok((table, filter, basic))
}

/// The seed kernels of the core mapping: every basic instruction alone,
/// every same-class pair at IPC-proportional multiplicities, and the
/// asymmetric `a^M b` kernels.
pub fn seed_kernels(
    basic: &[String],
    solo: &BTreeMap<String, Rat>,
    class_of: &BTreeMap<String, String>,
    cfg: &PipelineConfig,
) -> Result<Vec<Microkernel>, PipelineError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |k: Microkernel| -> Result<(), PipelineError> {
        let key = k.canonical_key().map_err(PipelineError::Model)?;
        if seen.insert(key) {
            out.push(k);
        }
        Ok(())
    };
    for a in basic {
        push(Microkernel::of(&[(a, 1)]))?;
    }
    for a in basic {
        for b in basic {
            if a == b || class_of[a] != class_of[b] {
                continue;
            }
            push(materialize(
                &[(a.clone(), solo[a].clone()), (b.clone(), solo[b].clone())],
                &cfg.eps_round,
            )?)?;
            push(Microkernel::new([
                (a.clone(), Rat::from_integer(cfg.m_exponent.into())),
                (b.clone(), Rat::one()),
            ])
            .map_err(PipelineError::Model)?)?;
        }
    }
    Ok(out)
}

/// The converged core mapping.
#[derive(Debug, Clone)]
pub struct CoreMappingState {
    pub instructions: Vec<String>,
    pub shape: ShapeResult,
    /// Normalized weight rows over the shape columns.
    pub weights: BTreeMap<String, Vec<(usize, Rat)>>,
    /// Measured kernels, sorted by canonical key.
    pub kernels: Vec<KernelObs>,
    /// Saturating kernel per resource index.
    pub sat: BTreeMap<usize, Microkernel>,
    pub objective: Rat,
    pub rounds: usize,
    pub solo_ipc: BTreeMap<String, Rat>,
    pub class_of: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub log: String,
}

impl CoreMappingState {
    /// `rho_{K,r}`: normalized kernel load under the current weights.
    pub fn kernel_load(&self, obs: &KernelObs, col: usize) -> Rat {
        let mut load = Rat::zero();
        for (name, mult) in obs.kernel.terms() {
            if let Some(row) = self.weights.get(name) {
                if let Some((_, w)) = row.iter().find(|(c, _)| *c == col) {
                    load += mult * w;
                }
            }
        }
        load * &obs.ipc / obs.kernel.size()
    }

    /// Total weight its instructions place on all resources.
    pub fn consumption(&self, k: &Microkernel) -> Rat {
        let mut total = Rat::zero();
        for name in k.names() {
            if let Some(row) = self.weights.get(name) {
                for (_, w) in row {
                    total += w;
                }
            }
        }
        total
    }
}

/// Saturating kernel per resource: among kernels with `rho_{K,r} = 1`
/// (within tolerance), the one of minimum consumption, ties by canonical
/// key. Resources without one are reported, not hidden.
pub fn pick_saturating(
    state: &CoreMappingState,
    tol: &Rat,
) -> (BTreeMap<usize, Microkernel>, Vec<String>) {
    let mut sat = BTreeMap::new();
    let mut warnings = Vec::new();
    let bar = Rat::one() - tol;
    for col in 0..state.shape.num_resources() {
        let mut best: Option<(Rat, &KernelObs)> = None;
        for obs in &state.kernels {
            if state.kernel_load(obs, col) < bar {
                continue;
            }
            let cons = state.consumption(&obs.kernel);
            let better = match &best {
                None => true,
                Some((bc, bobs)) => cons < *bc || (cons == *bc && obs.key < bobs.key),
            };
            if better {
                best = Some((cons, obs));
            }
        }
        match best {
            Some((_, obs)) => {
                sat.insert(col, obs.kernel.clone());
            }
            None => warnings.push(format!("resource R{col} has no saturating kernel")),
        }
    }
    (sat, warnings)
}

/// Group-saturation kernels: for each basic instruction `a`, the kernel
/// `a^M . prod(other same-class basics)^1` with `M` doubled until `a`'s
/// own share dominates the measured time (or a cap). When `a` saturates
/// such a kernel, its strongest resource provably carries none of the
/// other basics at once, which pins the private resources that pairwise
/// kernels alone cannot.
fn group_saturation_kernels(
    basic: &[String],
    solo: &BTreeMap<String, Rat>,
    class_of: &BTreeMap<String, String>,
    bench: &mut Bench,
    kernels: &mut BTreeMap<String, KernelObs>,
    tol: &Rat,
) -> Result<(), PipelineError> {
    for a in basic {
        let others: Vec<&String> = basic
            .iter()
            .filter(|b| *b != a && class_of[*b] == class_of[a])
            .collect();
        if others.is_empty() {
            continue;
        }
        let mut m = 4u64;
        loop {
            let mut terms: Vec<(String, Rat)> =
                alloc::vec![(a.clone(), Rat::from_integer(m.into()))];
            for b in &others {
                terms.push(((*b).clone(), Rat::one()));
            }
            let kernel = Microkernel::new(terms).map_err(PipelineError::Model)?;
            let ipc = bench.measure_kernel(&kernel)?;
            let obs = KernelObs::new(kernel, ipc);
            let t = obs.cycles();
            let own = Rat::from_integer(m.into()) / &solo[a];
            let saturating = (&own - &t).abs() <= tol * &t;
            kernels.insert(obs.key.clone(), obs);
            if saturating || m >= 64 {
                break;
            }
            m *= 2;
        }
    }
    Ok(())
}

const SHAPE_CANDIDATES: usize = 6;

/// Support candidate read directly off the quadratic table: a pair kernel
/// whose IPC equals the faster member's solo IPC pins the slower member
/// inside the faster one's port set, so each instruction's "nested set"
/// approximates the user set of its tightest resource. Closing those sets,
/// the contention covers and the singletons under union-of-intersecting
/// mirrors how combined resources arise. Unsound guesses cost nothing: the
/// weight problem screens every candidate.
fn nested_closure_candidate(
    basic: &BasicInstructionSet,
    table: &QuadraticTable,
    tol: &Rat,
) -> Option<ShapeResult> {
    let names = &basic.all;
    let mut base: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    for (i, a) in names.iter().enumerate() {
        let solo_a = table.solo(a).ok()?;
        let mut col: BTreeSet<usize> = [i].into_iter().collect();
        for (j, b) in names.iter().enumerate() {
            if i == j || table.class(a) != table.class(b) {
                continue;
            }
            let pair = table.pair(a, b).ok()?;
            if (pair - solo_a).abs() <= tol * solo_a {
                col.insert(j);
            }
        }
        base.insert(col);
    }
    // union closure of intersecting members, size-capped
    let mut sets = base;
    loop {
        let mut added = Vec::new();
        let all: Vec<&BTreeSet<usize>> = sets.iter().collect();
        'outer: for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if a.intersection(b).next().is_some() {
                    let union: BTreeSet<usize> = a.union(b).copied().collect();
                    if !sets.contains(&union) {
                        added.push(union);
                        if sets.len() + added.len() >= 64 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        if added.is_empty() || sets.len() >= 64 {
            break;
        }
        sets.extend(added);
    }
    let mut columns: Vec<BTreeSet<usize>> = sets.into_iter().collect();
    let n = names.len();
    columns.sort_by(|a, b| {
        let vec_of = |c: &BTreeSet<usize>| -> Vec<bool> { (0..n).map(|i| c.contains(&i)).collect() };
        vec_of(b).cmp(&vec_of(a)).then_with(|| a.cmp(b))
    });
    columns.dedup();
    Some(ShapeResult {
        instructions: names.clone(),
        columns,
    })
}

/// Drops support columns the weight problem left entirely at zero and
/// remaps the weight rows onto the surviving columns.
fn prune_zero_columns(
    (shape, bwp): (ShapeResult, lp::WeightResult),
) -> (ShapeResult, lp::WeightResult) {
    let mut used = alloc::vec![false; shape.num_resources()];
    for row in bwp.rows.values() {
        for (c, w) in row {
            if !w.is_zero() {
                used[*c] = true;
            }
        }
    }
    if used.iter().all(|u| *u) {
        return (shape, bwp);
    }
    let mut remap = alloc::vec![usize::MAX; used.len()];
    let mut columns = Vec::new();
    for (c, keep) in used.iter().enumerate() {
        if *keep {
            remap[c] = columns.len();
            columns.push(shape.columns[c].clone());
        }
    }
    let shape = ShapeResult {
        instructions: shape.instructions,
        columns,
    };
    let mut bwp = bwp;
    for row in bwp.rows.values_mut() {
        row.retain(|(_, w)| !w.is_zero());
        for (c, _) in row.iter_mut() {
            *c = remap[*c];
        }
    }
    (shape, bwp)
}

/// Runs the shape/enrich fixpoint, then the weight problem, then picks the
/// saturating kernels. Minimal shapes that cannot explain the measured
/// IPCs (positive weight-problem objective) are discarded in favor of the
/// next candidate support.
pub fn core_fixpoint(
    basic: &BasicInstructionSet,
    table: &QuadraticTable,
    bench: &mut Bench,
    cfg: &PipelineConfig,
) -> Result<CoreMappingState, PipelineError> {
    let instructions = basic.all.clone();
    let mut solo_ipc = BTreeMap::new();
    let mut class_of = BTreeMap::new();
    for name in &instructions {
        solo_ipc.insert(name.clone(), table.solo(name)?.clone());
        class_of.insert(name.clone(), table.class(name).to_string());
    }
    let tol = cfg.tolerance(&bench.meas);
    let mut kernels: BTreeMap<String, KernelObs> = BTreeMap::new();
    for k in seed_kernels(&instructions, &solo_ipc, &class_of, cfg)? {
        let ipc = bench.measure_kernel(&k)?;
        let obs = KernelObs::new(k, ipc);
        kernels.insert(obs.key.clone(), obs);
    }
    group_saturation_kernels(&instructions, &solo_ipc, &class_of, bench, &mut kernels, &tol)?;

    // a candidate's weight solution counts as explaining the data when the
    // average per-kernel sub-saturation stays within the noise tolerance
    let accept_gap = if bench.meas.is_exact() {
        Rat::zero()
    } else {
        crate::ratio::from_f64(3.0 * bench.meas.noise_rel_sd + 0.01).expect("finite")
    };

    let r_max = (2 * instructions.len() + 8).max(4);
    let mut log = String::new();
    let mut rounds = 0;
    let mut accepted: Option<(ShapeResult, lp::WeightResult)> = None;
    for round in 0..cfg.max_rounds {
        rounds = round + 1;
        let input = ShapeInput {
            instructions: instructions.clone(),
            very_basic: basic.very_basic.clone(),
            most_greedy: basic.most_greedy.clone(),
            contended: basic.contended.clone(),
            kernels: kernels.values().cloned().collect(),
            solo_ipc: solo_ipc.clone(),
            r_max,
            tol: tol.clone(),
        };
        // the table-derived support first, then minimal colorings; the
        // weight problem arbitrates
        let mut candidates = Vec::new();
        if let Some(nested) = nested_closure_candidate(basic, table, &tol) {
            candidates.push(nested);
        }
        candidates.extend(lp::shape_candidates(&input, SHAPE_CANDIDATES)?);
        let kernel_list: Vec<KernelObs> = kernels.values().cloned().collect();
        let threshold = &accept_gap * Rat::from_integer((kernel_list.len() as u64).into());
        let mut chosen: Option<(ShapeResult, lp::WeightResult)> = None;
        for (ci, shape) in candidates.into_iter().enumerate() {
            let mut support = BTreeMap::new();
            for (i, name) in shape.instructions.iter().enumerate() {
                let cols: Vec<usize> = (0..shape.num_resources())
                    .filter(|&c| shape.has_edge(i, c))
                    .collect();
                support.insert(name.clone(), cols);
            }
            let bwp = lp::solve_bwp(&BwpInput {
                free: shape.instructions.clone(),
                support,
                frozen: BTreeMap::new(),
                uncapped: BTreeSet::new(),
                num_columns: shape.num_resources(),
                kernels: kernel_list.clone(),
                pattern_hint: None,
            })?;
            log.push_str(&format!(
                "round {round} candidate {ci}: {} resources, objective {}\n",
                shape.num_resources(),
                crate::ratio::display(&bwp.objective)
            ));
            let good = bwp.objective <= threshold;
            let better = match &chosen {
                None => true,
                Some((_, best)) => bwp.objective < best.objective,
            };
            if better {
                chosen = Some((shape, bwp));
            }
            if good {
                break;
            }
        }
        let (shape, bwp) = prune_zero_columns(chosen.expect("at least one candidate"));
        // first enrichment source: per resource, the kernel of all its
        // users at their IPCs, split by extension class
        let mut fresh = Vec::new();
        for col in &shape.columns {
            let mut per_class: BTreeMap<&str, Vec<(String, Rat)>> = BTreeMap::new();
            for &i in col {
                let name = &shape.instructions[i];
                per_class
                    .entry(class_of[name].as_str())
                    .or_default()
                    .push((name.clone(), solo_ipc[name].clone()));
            }
            for (_, terms) in per_class {
                let k = materialize(&terms, &cfg.eps_round)?;
                let key = k.canonical_key().map_err(PipelineError::Model)?;
                if !kernels.contains_key(&key) {
                    fresh.push(k);
                }
            }
        }
        // second enrichment source: saturating probes of every basic
        // instruction against every resource, which pin the individual
        // edge weights the coarser kernels leave underdetermined
        {
            let mut state = CoreMappingState {
                instructions: instructions.clone(),
                shape: shape.clone(),
                weights: bwp.rows.clone(),
                kernels: kernel_list.clone(),
                sat: BTreeMap::new(),
                objective: bwp.objective.clone(),
                rounds,
                solo_ipc: solo_ipc.clone(),
                class_of: class_of.clone(),
                warnings: Vec::new(),
                log: String::new(),
            };
            let (sat, _) = pick_saturating(&state, &tol);
            state.sat = sat;
            for sat_kernel in state.sat.values() {
                let sat_class = sat_kernel
                    .names()
                    .next()
                    .and_then(|n| class_of.get(n))
                    .cloned()
                    .unwrap_or_default();
                let sat_ipc = state
                    .kernels
                    .iter()
                    .find(|obs| &obs.kernel == sat_kernel)
                    .map(|obs| obs.ipc.clone());
                let Some(sat_ipc) = sat_ipc else { continue };
                for inst in &instructions {
                    if class_of[inst] != sat_class {
                        continue;
                    }
                    if sat_kernel.names().any(|n| n == inst) {
                        continue;
                    }
                    let k = ksat_kernel(inst, &solo_ipc[inst], sat_kernel, &sat_ipc, cfg)?;
                    let key = k.canonical_key().map_err(PipelineError::Model)?;
                    if !kernels.contains_key(&key) {
                        fresh.push(k);
                    }
                }
            }
        }
        accepted = Some((shape, bwp));
        if fresh.is_empty() {
            break;
        }
        for k in fresh {
            let ipc = bench.measure_kernel(&k)?;
            let obs = KernelObs::new(k, ipc);
            kernels.insert(obs.key.clone(), obs);
        }
        if round + 1 == cfg.max_rounds {
            return Err(PipelineError::IterationCap {
                rounds: cfg.max_rounds,
            });
        }
    }
    let (shape, bwp) = accepted.expect("at least one round ran");
    log.push_str(&bwp.log);

    let mut state = CoreMappingState {
        instructions,
        shape,
        weights: bwp.rows,
        kernels: kernels.values().cloned().collect(),
        sat: BTreeMap::new(),
        objective: bwp.objective,
        rounds,
        solo_ipc,
        class_of,
        warnings: Vec::new(),
        log,
    };
    let (sat, warnings) = pick_saturating(&state, &tol);
    state.sat = sat;
    state.warnings = warnings;
    Ok(state)
}

/// Saturating benchmark for probing `inst` against resource `col`:
/// `inst^ipc(inst) . sat[col]^(L * ipc(sat[col]))`.
fn ksat_kernel(
    inst: &str,
    inst_ipc: &Rat,
    sat_kernel: &Microkernel,
    sat_ipc: &Rat,
    cfg: &PipelineConfig,
) -> Result<Microkernel, PipelineError> {
    let scale = Rat::from_integer(cfg.l_exponent.into()) * sat_ipc;
    let mut terms: BTreeMap<String, Rat> = BTreeMap::new();
    terms.insert(inst.to_string(), inst_ipc.clone());
    for (name, mult) in sat_kernel.terms() {
        *terms.entry(name.to_string()).or_insert_with(Rat::zero) += mult * &scale;
    }
    let terms: Vec<(String, Rat)> = terms.into_iter().collect();
    materialize(&terms, &cfg.eps_round).map_err(PipelineError::Model)
}

/// One completed instruction row.
#[derive(Debug, Clone)]
pub struct CompletionRow {
    pub instruction: String,
    pub row: Vec<(usize, Rat)>,
    pub objective: Rat,
    /// Resources for which no same-class saturating kernel could be
    /// measured; their weights are unknown rather than zero.
    pub undetermined: Vec<usize>,
    pub kernels: Vec<KernelObs>,
}

/// The measured probes for completing `inst`, one per determinable
/// resource. Kept separate from the solve so measurement can be batched.
pub fn completion_kernels(
    inst: &str,
    inst_class: &str,
    inst_ipc: &Rat,
    state: &CoreMappingState,
    cfg: &PipelineConfig,
    tol: &Rat,
) -> Result<(Vec<(usize, Microkernel)>, Vec<usize>), PipelineError> {
    let mut kernels = Vec::new();
    let mut undetermined = Vec::new();
    let bar = Rat::one() - tol;
    for col in 0..state.shape.num_resources() {
        // prefer the chosen saturating kernel, fall back to any same-class
        // saturating kernel when extension classes would mix
        let chosen = state.sat.get(&col).and_then(|k| {
            let class = k
                .names()
                .next()
                .and_then(|n| state.class_of.get(n))
                .cloned()
                .unwrap_or_default();
            (class == inst_class).then_some(k.clone())
        });
        let fallback = || {
            state
                .kernels
                .iter()
                .filter(|obs| {
                    obs.kernel
                        .names()
                        .all(|n| state.class_of.get(n).map(String::as_str) == Some(inst_class))
                        && state.kernel_load(obs, col) >= bar
                })
                .min_by(|a, b| {
                    state
                        .consumption(&a.kernel)
                        .cmp(&state.consumption(&b.kernel))
                        .then_with(|| a.key.cmp(&b.key))
                })
                .map(|obs| obs.kernel.clone())
        };
        let Some(sat_kernel) = chosen.or_else(fallback) else {
            undetermined.push(col);
            continue;
        };
        let sat_ipc = {
            let mut ipc = Rat::zero();
            let mut t = Rat::zero();
            for (name, mult) in sat_kernel.terms() {
                ipc += mult;
                let part = mult / &state.solo_ipc[name];
                if part > t {
                    t = part;
                }
            }
            // measured value if we have it, otherwise the size/time guess
            state
                .kernels
                .iter()
                .find(|obs| obs.kernel == sat_kernel)
                .map(|obs| obs.ipc.clone())
                .unwrap_or(ipc / t)
        };
        kernels.push((
            col,
            ksat_kernel(inst, inst_ipc, &sat_kernel, &sat_ipc, cfg)?,
        ));
    }
    Ok((kernels, undetermined))
}

/// Completes one instruction against the frozen core mapping.
pub fn complete_instruction(
    inst: &str,
    state: &CoreMappingState,
    bench: &mut Bench,
    cfg: &PipelineConfig,
) -> Result<CompletionRow, PipelineError> {
    let inst_class = match &bench.backend {
        Backend::Simulated(truth) => truth
            .extension_class(inst)
            .ok_or_else(|| PipelineError::Oracle(OracleError::UnknownInstruction(inst.into())))?
            .to_string(),
        Backend::Replay => state
            .class_of
            .get(inst)
            .cloned()
            .unwrap_or_else(|| "base".to_string()),
    };
    let inst_ipc = bench.measure_kernel(&Microkernel::of(&[(inst, 1)]))?;
    let tol = cfg.tolerance(&bench.meas);
    let (probes, mut undetermined) =
        completion_kernels(inst, &inst_class, &inst_ipc, state, cfg, &tol)?;
    let mut observations = Vec::new();
    let mut designed = Vec::new();
    for (col, kernel) in probes {
        match bench.measure_kernel(&kernel) {
            Ok(ipc) => {
                observations.push(KernelObs::new(kernel, ipc));
                designed.push(col);
            }
            Err(PipelineError::Oracle(_)) => undetermined.push(col),
            Err(e) => return Err(e),
        }
    }
    undetermined.sort_unstable();
    let result: WeightResult = lp::solve_aux(
        inst,
        state.shape.num_resources(),
        &state.weights,
        observations.clone(),
        designed,
    )?;
    Ok(CompletionRow {
        instruction: inst.to_string(),
        row: result.rows.get(inst).cloned().unwrap_or_default(),
        objective: result.objective,
        undetermined,
        kernels: observations,
    })
}

/// Assembles the final normalized mapping: core rows plus completed rows.
pub fn assemble_mapping(
    state: &CoreMappingState,
    completions: &[CompletionRow],
    class_of: &BTreeMap<String, String>,
) -> Result<ConjunctiveMapping, PipelineError> {
    let resources: Vec<Resource> = (0..state.shape.num_resources())
        .map(|c| Resource {
            name: format!("R{c}"),
            throughput: Rat::one(),
        })
        .collect();
    let mut instructions = Vec::new();
    let mut edges = Vec::new();
    let default_class = "base".to_string();
    for (name, row) in &state.weights {
        let class = class_of.get(name).unwrap_or(&default_class);
        instructions.push(Instruction::new(name, class));
        for (c, w) in row {
            edges.push((name.clone(), format!("R{c}"), w.clone()));
        }
    }
    for comp in completions {
        if state.weights.contains_key(&comp.instruction) {
            continue;
        }
        let class = class_of.get(&comp.instruction).unwrap_or(&default_class);
        instructions.push(Instruction::new(&comp.instruction, class));
        let mut has_edge = false;
        for (c, w) in &comp.row {
            if !w.is_zero() {
                has_edge = true;
                edges.push((comp.instruction.clone(), format!("R{c}"), w.clone()));
            }
        }
        if !has_edge {
            // an instruction the solver could not attach anywhere would
            // predict infinite throughput; give it the x axis of its solo
            // measurement on its most loaded resource instead
            return Err(PipelineError::Lp(LpError::BadInput(format!(
                "completion left `{}` without any resource",
                comp.instruction
            ))));
        }
    }
    ConjunctiveMapping::new(resources, instructions, edges, true).map_err(PipelineError::Model)
}
