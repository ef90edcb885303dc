//! Simulated CPU: true optimal-assignment throughput of microkernels under
//! a ground-truth disjunctive mapping, optional measurement noise, and the
//! benchmark database the rest of the pipeline treats as "measurements".

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::lp::{self, Cmp, LinearProblem, Sense, SolveStatus, Variable};
use crate::model::{CompatRow, DisjunctiveMapping, Microkernel};
use crate::ratio::{display, from_f64, to_f64, Rat};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    UnknownInstruction(String),
    /// Kernel mixes instructions of different extension classes.
    MixedExtensions(Vec<String>),
    PortLimitExceeded(usize),
    NonIntegralKernel(String),
    /// Replay-only database has no entry for the kernel.
    MissingMeasurement(String),
    InvalidConfig(String),
    Solver(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::UnknownInstruction(n) => {
                write!(f, "instruction `{n}` is not in the ground truth")
            }
            OracleError::MixedExtensions(cs) => write!(
                f,
                "benchmark combines different extensions: {}",
                cs.join(", ")
            ),
            OracleError::PortLimitExceeded(n) => {
                write!(f, "{n} ports exceed the tight-set enumeration bound")
            }
            OracleError::NonIntegralKernel(k) => {
                write!(f, "kernel `{k}` cannot be materialized as a benchmark")
            }
            OracleError::MissingMeasurement(k) => {
                write!(f, "benchmark database has no entry for `{k}`")
            }
            OracleError::InvalidConfig(s) => write!(f, "invalid measurement config: {s}"),
            OracleError::Solver(s) => write!(f, "assignment LP failed: {s}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OracleError {}

/// How measurements are produced: exact or with multiplicative Gaussian
/// noise, optionally capped by a front-end decode width.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementConfig {
    /// Relative standard deviation of the noise on IPC; zero means exact.
    pub noise_rel_sd: f64,
    pub seed: u64,
    /// Models the decode-width bottleneck as an extra resource every
    /// instruction uses `1/cap` of.
    pub frontend_ipc_cap: Option<Rat>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            noise_rel_sd: 0.0,
            seed: 0,
            frontend_ipc_cap: None,
        }
    }
}

impl MeasurementConfig {
    pub fn exact(seed: u64) -> Self {
        Self {
            noise_rel_sd: 0.0,
            seed,
            frontend_ipc_cap: None,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.noise_rel_sd >= 0.0 && self.noise_rel_sd < 0.5) {
            return Err(OracleError::InvalidConfig(format!(
                "noise_rel_sd {} outside [0, 0.5)",
                self.noise_rel_sd
            )));
        }
        if let Some(cap) = &self.frontend_ipc_cap {
            if !cap.is_positive() {
                return Err(OracleError::InvalidConfig("nonpositive ipc cap".into()));
            }
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        self.noise_rel_sd == 0.0
    }

    /// Stable identity string stored in benchmark databases.
    pub fn fingerprint(&self) -> String {
        let cap = match &self.frontend_ipc_cap {
            Some(c) => display(c),
            None => "none".into(),
        };
        format!(
            "noise={};seed={};cap={cap}",
            self.noise_rel_sd, self.seed
        )
    }
}

/// A recorded IPC: exact rational in exact mode, decimal in noisy mode.
#[derive(Debug, Clone, PartialEq)]
pub enum IpcValue {
    Exact(Rat),
    Noisy(f64),
}

impl IpcValue {
    /// Rational view; floats convert exactly (they are dyadic rationals).
    pub fn as_rat(&self) -> Rat {
        match self {
            IpcValue::Exact(r) => r.clone(),
            IpcValue::Noisy(x) => from_f64(*x).expect("measured ipc is finite"),
        }
    }
}

/// Persisted map from canonical kernel strings to measured IPC values.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkDb {
    pub fingerprint: String,
    entries: BTreeMap<String, IpcValue>,
}

impl BenchmarkDb {
    pub fn new(fingerprint: String) -> Self {
        Self {
            fingerprint,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&IpcValue> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: String, value: IpcValue) {
        self.entries.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IpcValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

fn kernel_loads(
    g: &DisjunctiveMapping,
    k: &Microkernel,
) -> Result<Vec<(BTreeSet<usize>, Rat)>, OracleError> {
    k.terms()
        .map(|(name, mult)| {
            let row = g
                .row(name)
                .ok_or_else(|| OracleError::UnknownInstruction(name.to_string()))?;
            Ok((
                row.compat.clone(),
                mult * Rat::from_integer(row.weight.into()),
            ))
        })
        .collect()
}

/// Minimal execution time over all fractional port assignments, solved as
/// an exact LP: one flow variable per compatible (instruction, port) pair.
pub fn assignment_throughput_lp(
    g: &DisjunctiveMapping,
    k: &Microkernel,
) -> Result<Rat, OracleError> {
    let loads = kernel_loads(g, k)?;
    let mut p = LinearProblem::new("assignment", Sense::Minimize);
    let t = p.add_variable(Variable::continuous("t".into(), None));
    let mut per_port: Vec<Vec<(usize, Rat)>> = alloc::vec![Vec::new(); g.num_ports()];
    for (idx, (compat, load)) in loads.iter().enumerate() {
        let mut row = Vec::new();
        for &port in compat {
            let x = p.add_variable(Variable::continuous(format!("x{idx}_p{port}"), None));
            row.push((x, Rat::one()));
            per_port[port].push((x, Rat::one()));
        }
        p.add_constraint(format!("demand{idx}"), row, Cmp::Eq, load.clone());
    }
    for (port, mut terms) in per_port.into_iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        terms.push((t, -Rat::one()));
        p.add_constraint(format!("port{port}"), terms, Cmp::Le, Rat::zero());
    }
    p.set_objective(alloc::vec![(t, Rat::one())], Rat::zero());
    let sol = lp::solve(&p);
    if sol.status != SolveStatus::Optimal {
        return Err(OracleError::Solver(format!("status {:?}", sol.status)));
    }
    Ok(sol.objective)
}

/// Same quantity through the tight-set formula:
/// `t = max over nonempty J of (sum of loads confined to J) / |J|`.
pub fn assignment_throughput_tightset(
    g: &DisjunctiveMapping,
    k: &Microkernel,
) -> Result<Rat, OracleError> {
    if g.num_ports() > 20 {
        return Err(OracleError::PortLimitExceeded(g.num_ports()));
    }
    let loads: Vec<(u32, Rat)> = kernel_loads(g, k)?
        .into_iter()
        .map(|(compat, load)| {
            let mask = compat.iter().fold(0u32, |m, &p| m | (1 << p));
            (mask, load)
        })
        .collect();
    let mut best = Rat::zero();
    for subset in 1u32..(1 << g.num_ports()) {
        let mut confined = Rat::zero();
        for (mask, load) in &loads {
            if mask & !subset == 0 {
                confined += load;
            }
        }
        if confined.is_zero() {
            continue;
        }
        let value = confined / Rat::from_integer(subset.count_ones().into());
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// Extension-class purity check shared by every benchmark producer.
pub fn kernel_class(g: &DisjunctiveMapping, k: &Microkernel) -> Result<String, OracleError> {
    let mut classes = BTreeSet::new();
    for name in k.names() {
        let class = g
            .extension_class(name)
            .ok_or_else(|| OracleError::UnknownInstruction(name.to_string()))?;
        classes.insert(class.to_string());
    }
    if classes.len() > 1 {
        return Err(OracleError::MixedExtensions(classes.into_iter().collect()));
    }
    Ok(classes.into_iter().next().unwrap_or_default())
}

/// Truncated (±3σ) standard Gaussian, deterministic in the rng stream.
fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let bits53 = |x: u64| (x >> 11) as f64 / (1u64 << 53) as f64;
        let u1 = 1.0 - bits53(rng.next_u64()); // (0, 1]
        let u2 = bits53(rng.next_u64());
        let z = libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2);
        if z.abs() <= 3.0 {
            return z;
        }
    }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn noise_factor(cfg: &MeasurementConfig, key: &str) -> f64 {
    let kh = fnv64(key.as_bytes());
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&cfg.seed.to_le_bytes());
    seed[8..16].copy_from_slice(&kh.to_le_bytes());
    seed[16..24].copy_from_slice(&(kh ^ 0x9e3779b97f4a7c15).to_le_bytes());
    seed[24..32].copy_from_slice(&(cfg.seed ^ kh.rotate_left(17)).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(seed);
    1.0 + cfg.noise_rel_sd * gaussian(&mut rng)
}

/// Measures a kernel: IPC from the tight-set throughput, capped by the
/// front-end width, perturbed by seeded noise, and stored in the database.
/// Re-measuring an existing key returns the stored value.
pub fn measure(
    g: &DisjunctiveMapping,
    k: &Microkernel,
    cfg: &MeasurementConfig,
    db: &mut BenchmarkDb,
) -> Result<Rat, OracleError> {
    cfg.validate()?;
    kernel_class(g, k)?;
    let key = k
        .canonical_key()
        .map_err(|e| OracleError::NonIntegralKernel(e.to_string()))?;
    if let Some(v) = db.get(&key) {
        return Ok(v.as_rat());
    }
    let t = assignment_throughput_tightset(g, k)?;
    let mut ipc = k.size() / t;
    if let Some(cap) = &cfg.frontend_ipc_cap {
        if ipc > *cap {
            ipc = cap.clone();
        }
    }
    let value = if cfg.is_exact() {
        IpcValue::Exact(ipc)
    } else {
        IpcValue::Noisy(to_f64(&ipc) * noise_factor(cfg, &key))
    };
    let out = value.as_rat();
    db.insert(key, value);
    Ok(out)
}

/// Parameters of the random ground-truth generator.
#[derive(Debug, Clone)]
pub struct TruthGen {
    pub ports: usize,
    pub instructions: usize,
    pub seed: u64,
    /// Largest compatibility-set size drawn (clamped to the port count).
    pub max_compat: usize,
    /// Largest per-instruction µOP weight; 1 keeps every instruction at
    /// full throughput.
    pub max_weight: u64,
    /// Guarantee a dedicated single-port, weight-1 instruction per port.
    pub cover_ports: bool,
    pub extension_class: String,
}

impl Default for TruthGen {
    fn default() -> Self {
        Self {
            ports: 3,
            instructions: 8,
            seed: 0,
            max_compat: 3,
            max_weight: 1,
            cover_ports: true,
            extension_class: "base".into(),
        }
    }
}

/// Draws a random disjunctive mapping. Deterministic in the seed.
pub fn generate_truth(gen: &TruthGen) -> DisjunctiveMapping {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&gen.seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(gen.seed ^ 0xa076_1d64_78bd_642f).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(seed);
    let ports: Vec<String> = (0..gen.ports).map(|i| format!("p{i}")).collect();
    let mut rows: Vec<(String, CompatRow)> = Vec::new();
    let mut count = 0usize;
    if gen.cover_ports {
        for p in 0..gen.ports.min(gen.instructions) {
            rows.push((
                format!("I{count:02}"),
                CompatRow {
                    extension_class: gen.extension_class.clone(),
                    compat: [p].into_iter().collect(),
                    weight: 1,
                },
            ));
            count += 1;
        }
    }
    let max_compat = gen.max_compat.clamp(1, gen.ports);
    while count < gen.instructions {
        let size = 1 + (rng.next_u64() as usize) % max_compat;
        let mut compat = BTreeSet::new();
        while compat.len() < size {
            compat.insert((rng.next_u64() as usize) % gen.ports);
        }
        let weight = 1 + rng.next_u64() % gen.max_weight.max(1);
        rows.push((
            format!("I{count:02}"),
            CompatRow {
                extension_class: gen.extension_class.clone(),
                compat,
                weight,
            },
        ));
        count += 1;
    }
    DisjunctiveMapping::new(ports, rows).expect("generated mapping is well-formed")
}

/// The worked-example preset: the Skylake subset restricted to ports 0, 1
/// and 6. The double-µOP `VCVTT` is modeled as usage weight 2 on its
/// compatibility row.
pub fn skl_port016_preset() -> DisjunctiveMapping {
    let row = |class: &str, compat: &[usize], weight: u64| CompatRow {
        extension_class: class.to_string(),
        compat: compat.iter().copied().collect(),
        weight,
    };
    DisjunctiveMapping::new(
        alloc::vec!["p0".into(), "p1".into(), "p6".into()],
        alloc::vec![
            ("DIVPS".to_string(), row("base", &[0], 1)),
            ("BSR".to_string(), row("base", &[1], 1)),
            ("JMP".to_string(), row("base", &[2], 1)),
            ("JNLE".to_string(), row("base", &[0, 2], 1)),
            ("ADDSS".to_string(), row("base", &[0, 1], 1)),
            ("VCVTT".to_string(), row("base", &[0, 1], 2)),
        ],
    )
    .expect("preset is well-formed")
}
