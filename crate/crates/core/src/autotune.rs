//! Exhaustive search over kernel work-distribution parameters, ranked by
//! device-model cost. Every configuration must reproduce the host oracle
//! before it is ranked.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::{CostWeights, Device, LaunchOptions, MemStats};
use crate::discretization::{Discretization, DiscretizationOptions};
use crate::error::{Error, Result};
use crate::kernels::oracle::{reference_diff, reference_gather, reference_lift};
use crate::kernels::{
    diff_shape, gather_shape, lift_shape, KernelConfig, MatrixStorage, OperatorConfig, Pipeline, Strategy, ThreadOrder,
};
use crate::maxwell::{MaxwellLaw, NUM_FIELDS};
use crate::mesh::Mesh;

/// Relative tolerance of the equivalence gate.
pub const GATE_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneKernel {
    Diff,
    Lift,
    Gather,
}

impl TuneKernel {
    pub fn name(self) -> &'static str {
        match self {
            TuneKernel::Diff => "diff",
            TuneKernel::Lift => "lift",
            TuneKernel::Gather => "gather",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    #[default]
    Model,
    /// Host seconds of the emulated launch; not reproducible.
    WallClock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Matrix,
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageName {
    Segmented,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreadOrderName {
    Interleaved,
    Conventional,
}

/// Candidate values per parameter. An empty `k_m` list means the padding
/// heuristic's choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSpace {
    pub kernel: TuneKernel,
    #[serde(default = "one")]
    pub w_p: Vec<usize>,
    #[serde(default = "one")]
    pub w_i: Vec<usize>,
    #[serde(default = "one")]
    pub w_s: Vec<usize>,
    #[serde(default)]
    pub k_m: Vec<usize>,
    #[serde(default = "one")]
    pub m_b: Vec<usize>,
    #[serde(default = "field_only")]
    pub strategy: Vec<StrategyName>,
    #[serde(default = "sixteen")]
    pub n_r: Vec<usize>,
    #[serde(default = "segmented")]
    pub storage: Vec<StorageName>,
    #[serde(default = "interleaved")]
    pub thread_order: Vec<ThreadOrderName>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub cost: CostMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Weights {
    fn default() -> Self {
        let w = CostWeights::default();
        Weights { alpha: w.alpha, beta: w.beta }
    }
}

fn one() -> Vec<usize> {
    vec![1]
}
fn sixteen() -> Vec<usize> {
    vec![16]
}
fn field_only() -> Vec<StrategyName> {
    vec![StrategyName::Field]
}
fn segmented() -> Vec<StorageName> {
    vec![StorageName::Segmented]
}
fn interleaved() -> Vec<ThreadOrderName> {
    vec![ThreadOrderName::Interleaved]
}

impl TuneSpace {
    pub fn new(kernel: TuneKernel) -> Self {
        TuneSpace {
            kernel,
            w_p: one(),
            w_i: one(),
            w_s: one(),
            k_m: Vec::new(),
            m_b: one(),
            strategy: field_only(),
            n_r: sixteen(),
            storage: segmented(),
            thread_order: interleaved(),
            weights: Weights::default(),
            cost: CostMode::Model,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: TuneSpace = toml::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let empty = [
            ("w_p", self.w_p.is_empty()),
            ("w_i", self.w_i.is_empty()),
            ("w_s", self.w_s.is_empty()),
            ("m_b", self.m_b.is_empty()),
            ("strategy", self.strategy.is_empty()),
            ("n_r", self.n_r.is_empty()),
            ("storage", self.storage.is_empty()),
            ("thread_order", self.thread_order.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|e| e.1) {
            return Err(Error::InvalidConfig(format!("tuning range '{name}' is empty")));
        }
        Ok(())
    }
}

/// Mesh, order and seed shared by every evaluation.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub mesh: Mesh,
    pub order: usize,
    pub seed: u64,
}

/// One point of the search space together with its microblocking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub k_m: usize,
    pub config: KernelConfig,
}

/// Parameters a kernel ignores are pinned so duplicates collapse.
fn normalize(kernel: TuneKernel, mut c: KernelConfig) -> KernelConfig {
    let d = KernelConfig::default();
    match kernel {
        TuneKernel::Lift => {
            c.w_s = d.w_s;
            c.strategy = Strategy::FieldInShared;
            c.n_r = d.n_r;
            c.storage = d.storage;
            c.m_b = d.m_b;
        }
        TuneKernel::Gather => {
            c.w_i = d.w_i;
            c.w_s = d.w_s;
            c.strategy = d.strategy;
            c.n_r = d.n_r;
            c.storage = d.storage;
            c.thread_order = d.thread_order;
        }
        TuneKernel::Diff => {
            c.m_b = d.m_b;
            match c.strategy {
                Strategy::FieldInShared => {
                    c.w_s = d.w_s;
                    c.n_r = d.n_r;
                    c.storage = d.storage;
                }
                Strategy::MatrixInShared => {
                    c.thread_order = d.thread_order;
                    if c.storage == MatrixStorage::Full {
                        c.n_r = d.n_r;
                    }
                }
            }
        }
    }
    c
}

/// Discretization for one `(K_M, M_B)` pair of the fixture.
pub fn fixture_discretization(fixture: &Fixture, k_m: Option<usize>, m_b: usize) -> Result<Discretization> {
    Discretization::new(fixture.mesh.clone(), fixture.order, DiscretizationOptions { k_m, m_b, ..Default::default() })
}

fn check_feasible(kernel: TuneKernel, disc: &Discretization, c: &KernelConfig, dev: &Device) -> Result<()> {
    match kernel {
        TuneKernel::Lift => lift_shape(disc, c, dev).map(|_| ()),
        TuneKernel::Diff => diff_shape(disc, c, dev).map(|_| ()),
        TuneKernel::Gather => gather_shape(disc, c, dev, NUM_FIELDS).map(|_| ()),
    }
}

/// All feasible configurations, in a fixed nested order
/// (K_M, M_B, strategy, storage, N_R, thread order, w_p, w_i, w_s).
pub fn enumerate_configs(space: &TuneSpace, fixture: &Fixture) -> Result<Vec<Candidate>> {
    space.check()?;
    let dev = Device::default();
    let k_ms: Vec<Option<usize>> = if space.k_m.is_empty() { vec![None] } else { space.k_m.iter().map(|&k| Some(k)).collect() };
    let m_bs: Vec<usize> = if space.kernel == TuneKernel::Gather { space.m_b.clone() } else { vec![1] };
    let mut out: Vec<Candidate> = Vec::new();
    for &k_m in &k_ms {
        for &m_b in &m_bs {
            let disc = match fixture_discretization(fixture, k_m, m_b) {
                Ok(d) => d,
                // Microblock or descriptor-budget choices that cannot be laid out.
                Err(Error::InvalidArgument(_)) | Err(Error::DescriptorBudget { .. }) => continue,
                Err(e) => return Err(e),
            };
            for &strategy in &space.strategy {
                for &storage in &space.storage {
                    for &n_r in &space.n_r {
                        for &order in &space.thread_order {
                            for &w_p in &space.w_p {
                                for &w_i in &space.w_i {
                                    for &w_s in &space.w_s {
                                        let raw = KernelConfig {
                                            w_p,
                                            w_i,
                                            w_s,
                                            m_b,
                                            strategy: match strategy {
                                                StrategyName::Matrix => Strategy::MatrixInShared,
                                                StrategyName::Field => Strategy::FieldInShared,
                                            },
                                            n_r,
                                            storage: match storage {
                                                StorageName::Segmented => MatrixStorage::Segmented,
                                                StorageName::Full => MatrixStorage::Full,
                                            },
                                            thread_order: match order {
                                                ThreadOrderName::Interleaved => ThreadOrder::Interleaved,
                                                ThreadOrderName::Conventional => ThreadOrder::Conventional,
                                            },
                                        };
                                        let config = normalize(space.kernel, raw);
                                        let cand = Candidate { k_m: disc.layout.k_m, config };
                                        if out.contains(&cand) || check_feasible(space.kernel, &disc, &config, &dev).is_err() {
                                            continue;
                                        }
                                        out.push(cand);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyTuneSpace);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub candidate: Candidate,
    pub stats: MemStats,
    pub cost: f64,
    pub valid: bool,
    /// Oracle mismatch or launch error.
    pub diagnostic: Option<String>,
}

fn random_fields(len: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Runs one configuration on the fixture, checks its output against the
/// host oracle, and prices the traced counters.
pub fn evaluate_config(kernel: TuneKernel, candidate: &Candidate, fixture: &Fixture, weights: Weights, cost: CostMode) -> Result<Evaluation> {
    let disc = Arc::new(fixture_discretization(fixture, Some(candidate.k_m), candidate.config.m_b)?);
    let c = candidate.config;
    let base = OperatorConfig {
        diff: KernelConfig::default(),
        gather: KernelConfig { m_b: c.m_b, ..Default::default() },
        lift: KernelConfig::default(),
    };
    let config = match kernel {
        TuneKernel::Diff => OperatorConfig { diff: c, ..base },
        TuneKernel::Lift => OperatorConfig { lift: c, ..base },
        TuneKernel::Gather => OperatorConfig { gather: c, ..base },
    };
    let mut p = Pipeline::new(disc.clone(), config, Device::default())?;
    p.options = LaunchOptions::traced();
    let l = &disc.layout;
    let np = disc.elem.num_nodes;
    let started = Instant::now();
    let (stats, err) = match kernel {
        TuneKernel::Diff => {
            let u = random_fields(disc.num_elements() * np, 1, fixture.seed).remove(0);
            let ub = p.upload("u", l.scatter(&u));
            let out = [0, 1, 2].map(|i| p.zeros(&format!("d{i}"), l.field_len()));
            let s = p.diff(ub, out)?;
            let want = reference_diff(&disc, &u);
            let err = (0..3).map(|nu| rel_err(&l.gather(&p.download(out[nu])), &want[nu])).fold(0.0, f64::max);
            (s, err)
        }
        TuneKernel::Lift => {
            let nf = disc.elem.num_face_dofs();
            let f = random_fields(disc.num_elements() * nf, 1, fixture.seed).remove(0);
            let mut padded = vec![0.0; l.flux_len()];
            for k in 0..disc.num_elements() {
                for face in 0..4 {
                    let nfp = disc.elem.num_face_nodes;
                    let b = l.face_base(k, face);
                    padded[b..b + nfp].copy_from_slice(&f[(k * 4 + face) * nfp..(k * 4 + face + 1) * nfp]);
                }
            }
            let fb = p.upload("flux", padded);
            let out = p.zeros("out", l.field_len());
            let s = p.lift(fb, out)?;
            (s, rel_err(&l.gather(&p.download(out)), &reference_lift(&disc, &f)))
        }
        TuneKernel::Gather => {
            let law = MaxwellLaw::default();
            let fields = random_fields(disc.num_elements() * np, NUM_FIELDS, fixture.seed);
            let ins: Vec<_> = fields.iter().enumerate().map(|(i, f)| p.upload(&format!("u{i}"), l.scatter(f))).collect();
            let outs: Vec<_> = (0..NUM_FIELDS).map(|i| p.zeros(&format!("f{i}"), l.flux_len())).collect();
            let s = p.gather(&law, &ins, &outs)?;
            let want = reference_gather(&disc, &law, &fields);
            let nfp = disc.elem.num_face_nodes;
            let mut err: f64 = 0.0;
            for (c, &ob) in outs.iter().enumerate() {
                let got = p.download(ob);
                let mut flat = vec![0.0; want[c].len()];
                for k in 0..disc.num_elements() {
                    for face in 0..4 {
                        let b = l.face_base(k, face);
                        flat[(k * 4 + face) * nfp..(k * 4 + face + 1) * nfp].copy_from_slice(&got[b..b + nfp]);
                    }
                }
                err = err.max(rel_err(&flat, &want[c]));
            }
            (s, err)
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    let valid = err <= GATE_TOLERANCE;
    let cost = match cost {
        CostMode::Model => stats.weighted_cost(CostWeights { alpha: weights.alpha, beta: weights.beta }),
        CostMode::WallClock => elapsed,
    };
    Ok(Evaluation {
        candidate: *candidate,
        stats,
        cost,
        valid,
        diagnostic: (!valid).then(|| format!("oracle mismatch: relative error {err:.3e} exceeds {GATE_TOLERANCE:e}")),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneReport {
    pub kernel: TuneKernel,
    pub order: usize,
    pub rows: Vec<Evaluation>,
    /// Index into `rows`.
    pub best: usize,
}

/// Lexicographic ranking key: cost, then the smaller work distribution.
fn rank_key(e: &Evaluation) -> (f64, usize, usize, usize) {
    let c = e.candidate.config;
    (e.cost, c.w_p, c.w_i, c.w_s)
}

pub fn tune(space: &TuneSpace, fixture: &Fixture) -> Result<TuneReport> {
    let cands = enumerate_configs(space, fixture)?;
    let mut rows = Vec::with_capacity(cands.len());
    for c in &cands {
        rows.push(match evaluate_config(space.kernel, c, fixture, space.weights, space.cost) {
            Ok(e) => e,
            Err(err) => Evaluation { candidate: *c, stats: MemStats::default(), cost: f64::INFINITY, valid: false, diagnostic: Some(err.to_string()) },
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, e)| e.valid)
        .min_by(|a, b| rank_key(a.1).partial_cmp(&rank_key(b.1)).expect("costs are finite"))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidConfig("no configuration passed the oracle gate".into()))?;
    Ok(TuneReport { kernel: space.kernel, order: fixture.order, rows, best })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    kernel: &'a str,
    order: usize,
    k_m: usize,
    m_b: usize,
    strategy: &'a str,
    storage: &'a str,
    n_r: usize,
    thread_order: &'a str,
    w_p: usize,
    w_i: usize,
    w_s: usize,
    valid: bool,
    best: bool,
    cost: f64,
    blocks: u64,
    shared_requests: u64,
    shared_cycles: u64,
    shared_max_degree: u64,
    global_transactions: u64,
    texture_transactions: u64,
}

impl TuneReport {
    pub fn best(&self) -> &Evaluation {
        &self.rows[self.best]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (i, e) in self.rows.iter().enumerate() {
            let c = e.candidate.config;
            w.serialize(CsvRow {
                kernel: self.kernel.name(),
                order: self.order,
                k_m: e.candidate.k_m,
                m_b: c.m_b,
                strategy: match c.strategy {
                    Strategy::MatrixInShared => "matrix",
                    Strategy::FieldInShared => "field",
                },
                storage: match c.storage {
                    MatrixStorage::Segmented => "segmented",
                    MatrixStorage::Full => "full",
                },
                n_r: c.n_r,
                thread_order: match c.thread_order {
                    ThreadOrder::Interleaved => "interleaved",
                    ThreadOrder::Conventional => "conventional",
                },
                w_p: c.w_p,
                w_i: c.w_i,
                w_s: c.w_s,
                valid: e.valid,
                best: i == self.best,
                cost: e.cost,
                blocks: e.stats.blocks,
                shared_requests: e.stats.shared_requests,
                shared_cycles: e.stats.shared_cycles,
                shared_max_degree: e.stats.shared_max_degree,
                global_transactions: e.stats.global_transactions,
                texture_transactions: e.stats.texture_transactions,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    fn fixture(order: usize) -> Fixture {
        Fixture { mesh: generate_box_mesh([1.0; 3], [2, 2, 1]).unwrap(), order, seed: 5 }
    }

    #[test]
    fn single_point_space() {
        let f = fixture(2);
        let space = TuneSpace::new(TuneKernel::Lift);
        let cands = enumerate_configs(&space, &f).unwrap();
        assert_eq!(cands.len(), 1);
        let r = tune(&space, &f).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.rows.len(), 1);
    }

    #[test]
    fn infeasible_only_space_is_an_error() {
        let f = fixture(4);
        let mut space = TuneSpace::new(TuneKernel::Lift);
        space.w_p = vec![100];
        space.w_i = vec![8];
        assert_eq!(enumerate_configs(&space, &f).unwrap_err().kind(), "empty_tune_space");
    }

    #[test]
    fn lift_space_respects_thread_limit() {
        let f = fixture(4);
        let mut space = TuneSpace::new(TuneKernel::Lift);
        space.k_m = vec![4];
        space.w_p = (1..=40).collect();
        space.w_i = vec![1, 2];
        let cands = enumerate_configs(&space, &f).unwrap();
        assert!(!cands.is_empty());
        for c in &cands {
            // N_pM = 144 for N = 4, K_M = 4.
            assert!(16 * c.config.w_p * (144 / 16) <= 512, "{c:?}");
        }
        assert!(cands.iter().any(|c| c.config.w_p == 3));
        assert!(!cands.iter().any(|c| c.config.w_p == 4));
    }

    #[test]
    fn evaluation_is_deterministic_and_gate_passes() {
        let f = fixture(3);
        let c = Candidate { k_m: 4, config: KernelConfig::matrix(2, 2, 1, 16) };
        let a = evaluate_config(TuneKernel::Diff, &c, &f, Weights::default(), CostMode::Model).unwrap();
        let b = evaluate_config(TuneKernel::Diff, &c, &f, Weights::default(), CostMode::Model).unwrap();
        assert!(a.valid, "{:?}", a.diagnostic);
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn w_s_sweep_keeps_global_traffic_and_divides_blocks() {
        let f = Fixture { mesh: generate_box_mesh([1.0; 3], [2, 2, 2]).unwrap(), order: 3, seed: 1 };
        let mut rows = Vec::new();
        for w_s in [1, 2, 4] {
            let c = Candidate { k_m: 4, config: KernelConfig::matrix(2, 1, w_s, 16) };
            rows.push(evaluate_config(TuneKernel::Diff, &c, &f, Weights::default(), CostMode::Model).unwrap());
        }
        let disc = fixture_discretization(&f, Some(4), 1).unwrap();
        let segments = disc.layout.n_pm.div_ceil(16) as u64;
        for (e, w_s) in rows.iter().zip([1usize, 2, 4]) {
            assert!(e.valid);
            assert_eq!(e.stats.global_transactions, rows[0].stats.global_transactions);
            // One block row per w_p * w_s microblocks (rounded up).
            assert_eq!(e.stats.blocks, segments * disc.layout.n_m.div_ceil(2 * w_s) as u64);
        }
    }

    #[test]
    fn best_is_argmin_with_tie_break() {
        let f = fixture(4);
        let mut space = TuneSpace::new(TuneKernel::Diff);
        space.strategy = vec![StrategyName::Matrix, StrategyName::Field];
        space.w_p = vec![1, 2, 3];
        space.w_i = vec![1, 2];
        space.w_s = vec![1, 2];
        let r = tune(&space, &f).unwrap();
        assert_eq!(r.rows.len(), enumerate_configs(&space, &f).unwrap().len());
        let best = r.best();
        for e in r.rows.iter().filter(|e| e.valid) {
            assert!(best.cost <= e.cost);
            if e.cost == best.cost {
                assert!(rank_key(best) <= rank_key(e));
            }
        }
        let csv = r.to_csv().unwrap();
        assert_eq!(csv.lines().count(), r.rows.len() + 1);
        assert!(r.to_json().unwrap().contains("\"best\""));
    }

    #[test]
    fn space_parses_from_toml() {
        let s = TuneSpace::from_toml(
            r#"
kernel = "diff"
w_p = [1, 2]
strategy = ["matrix", "field"]
[weights]
alpha = 1.0
beta = 2.0
"#,
        )
        .unwrap();
        assert_eq!(s.kernel, TuneKernel::Diff);
        assert_eq!(s.w_i, vec![1]);
        assert_eq!(s.weights.beta, 2.0);
        assert!(TuneSpace::from_toml("kernel = \"lift\"\nw_p = []").is_err());
        assert!(TuneSpace::from_toml("kernel = \"lift\"\nbogus = 1").is_err());
    }
}
