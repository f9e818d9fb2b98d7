//! Instance sampling and generation of labelled solution pairs.
//!
//! Pair `i` of a dataset is fully determined by `(master seed, first_index + i)`,
//! so datasets built with different worker counts are byte-identical, and
//! two datasets with disjoint index ranges never share an instance.

use crate::cvrp::{Customer, CvrpError, Instance, Point, SolutionFile};
use crate::init::random_solution;
use crate::io::{content_hash, write_atomic};
use crate::neighborhood::{Boa, BoaError, CycleBudget};
use crate::par::{map_indexed, Parallelism};
use crate::ranker::LabeledPair;
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};

pub const MIN_CAPACITY: u32 = 9;
pub const MAX_DEMAND: u32 = 9;
pub const DEFAULT_EPS: f64 = 0.01;

/// Index at which held-out datasets start by default. Training sets use
/// indices from zero, so the two never overlap for any realistic count.
pub const TEST_FIRST_INDEX: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preset {
    pub customers: usize,
    pub capacity: u32,
}

pub const CVRP20: Preset = Preset { customers: 20, capacity: 30 };
pub const CVRP50: Preset = Preset { customers: 50, capacity: 40 };
pub const CVRP100: Preset = Preset { customers: 100, capacity: 50 };

impl Preset {
    /// The standard capacity for 20, 50 or 100 customers.
    pub fn standard(customers: usize) -> Option<Preset> {
        [CVRP20, CVRP50, CVRP100].into_iter().find(|p| p.customers == customers)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("customer count must be at least 1")]
    NoCustomers,
    #[error("capacity {0} is below the largest possible demand {MAX_DEMAND}")]
    Capacity(u32),
    #[error("margin must be positive, got {0}")]
    Eps(f64),
    #[error("count must be at least 1")]
    EmptyCount,
    #[error(transparent)]
    Instance(#[from] CvrpError),
    #[error(transparent)]
    Boa(#[from] BoaError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
}

/// Depot and customers uniform on the unit square, demands uniform on `1..=9`.
pub fn sample_instance(n: usize, capacity: u32, seed: u64) -> Result<Instance, DatagenError> {
    if n == 0 {
        return Err(DatagenError::NoCustomers);
    }
    if capacity < MIN_CAPACITY {
        return Err(DatagenError::Capacity(capacity));
    }
    let mut rng = seed::rng(seed);
    let depot = Point::new(rng.random(), rng.random());
    let customers = (0..n)
        .map(|_| Customer { x: rng.random(), y: rng.random(), demand: rng.random_range(1..=MAX_DEMAND) })
        .collect();
    Ok(Instance::new(depot, customers, capacity, seed)?)
}

/// Label of a pair with final distances `a` and `b`: `Some(1)` if `a` is
/// better, `Some(0)` if `b` is, `None` when they differ by less than `eps`.
pub fn label(final_a: f64, final_b: f64, eps: f64) -> Option<u8> {
    if (final_a - final_b).abs() < eps {
        None
    } else {
        Some(u8::from(final_a < final_b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairOutcome {
    Stored(LabeledPair),
    Discarded { final_a: f64, final_b: f64 },
}

impl PairOutcome {
    pub fn pair(self) -> Option<LabeledPair> {
        match self {
            PairOutcome::Stored(p) => Some(p),
            PairOutcome::Discarded { .. } => None,
        }
    }
}

/// Two random initial solutions drawn from sub-seeds of `seed`, improved
/// with the given budget and labelled.
pub fn generate_pair(
    instance: &Instance,
    cycles: CycleBudget,
    eps: f64,
    seed: u64,
) -> Result<PairOutcome, DatagenError> {
    generate_pair_from_seeds(instance, cycles, eps, seed::derive(seed, 0), seed::derive(seed, 1))
}

pub fn generate_pair_from_seeds(
    instance: &Instance,
    cycles: CycleBudget,
    eps: f64,
    seed_a: u64,
    seed_b: u64,
) -> Result<PairOutcome, DatagenError> {
    if !(eps > 0.0) {
        return Err(DatagenError::Eps(eps));
    }
    let matrix = instance.distance_matrix();
    let boa = Boa::new(instance, &matrix);
    let a = random_solution(instance, &matrix, seed_a);
    let b = random_solution(instance, &matrix, seed_b);
    let final_a = boa.improve(&a, cycles)?.solution.distance();
    let final_b = boa.improve(&b, cycles)?.solution.distance();
    Ok(match label(final_a, final_b, eps) {
        Some(label) => PairOutcome::Stored(LabeledPair {
            instance: instance.clone(),
            a,
            b,
            final_a,
            final_b,
            label,
        }),
        None => PairOutcome::Discarded { final_a, final_b },
    })
}

/// What to generate. `count` pairs are attempted; pairs inside the margin
/// are dropped rather than retried.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub preset: Preset,
    pub count: u64,
    pub eps: f64,
    pub cycles: CycleBudget,
    pub master_seed: u64,
    pub first_index: u64,
}

impl DatasetSpec {
    pub fn new(preset: Preset, count: u64, master_seed: u64) -> Self {
        Self { preset, count, eps: DEFAULT_EPS, cycles: CycleBudget::Unbounded, master_seed, first_index: 0 }
    }

    /// Seed of the instance at absolute index `index`.
    pub fn instance_seed(&self, index: u64) -> u64 {
        seed::derive(self.master_seed, index)
    }

    fn validate(&self) -> Result<(), DatagenError> {
        if self.count == 0 {
            return Err(DatagenError::EmptyCount);
        }
        if !(self.eps > 0.0) {
            return Err(DatagenError::Eps(self.eps));
        }
        if self.preset.customers == 0 {
            return Err(DatagenError::NoCustomers);
        }
        if self.preset.capacity < MIN_CAPACITY {
            return Err(DatagenError::Capacity(self.preset.capacity));
        }
        Ok(())
    }
}

/// Generates the pair at absolute index `index`.
pub fn pair_at(spec: &DatasetSpec, index: u64) -> Result<PairOutcome, DatagenError> {
    let s = spec.instance_seed(index);
    let instance = sample_instance(spec.preset.customers, spec.preset.capacity, seed::derive(s, 0))?;
    generate_pair(&instance, spec.cycles, spec.eps, seed::derive(s, 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub preset: Preset,
    pub eps: f64,
    pub cycles: CycleBudget,
    pub master_seed: u64,
    pub first_index: u64,
    pub attempted: u64,
    pub stored: u64,
    pub discarded: u64,
    pub discard_rate: f64,
    /// SHA-256 of the dataset file framed as `blob <len>\0<bytes>`.
    pub content_hash: String,
}

/// A generated dataset: stored pairs with their absolute indices.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub indices: Vec<u64>,
    pub pairs: Vec<LabeledPair>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn labels(&self) -> Vec<u8> {
        self.pairs.iter().map(|p| p.label).collect()
    }
}

/// Generates all pairs of `spec`, in index order regardless of `par`.
pub fn build_dataset(spec: &DatasetSpec, par: Parallelism) -> Result<Dataset, DatagenError> {
    spec.validate()?;
    let outcomes = map_indexed(spec.count as usize, par, |i| pair_at(spec, spec.first_index + i as u64));
    let mut indices = Vec::new();
    let mut pairs = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        if let Some(p) = outcome?.pair() {
            indices.push(spec.first_index + i as u64);
            pairs.push(p);
        }
    }
    let bytes = encode_dataset(&indices, &pairs)?;
    let stored = pairs.len() as u64;
    let manifest = Manifest {
        schema_version: DATASET_VERSION,
        preset: spec.preset,
        eps: spec.eps,
        cycles: spec.cycles,
        master_seed: spec.master_seed,
        first_index: spec.first_index,
        attempted: spec.count,
        stored,
        discarded: spec.count - stored,
        discard_rate: (spec.count - stored) as f64 / spec.count as f64,
        content_hash: content_hash(&bytes),
    };
    Ok(Dataset { indices, pairs, manifest })
}

/// Leading bytes of a dataset file.
pub const DATASET_MAGIC: &[u8; 8] = b"RLPAIRS\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Record {
    index: u64,
    instance: Instance,
    a: SolutionFile,
    b: SolutionFile,
    final_a: f64,
    final_b: f64,
    label: u8,
}

/// Magic, little-endian `u32` version, then one record per pair: a
/// little-endian `u32` byte length followed by that many bytes of JSON.
pub fn encode_dataset(indices: &[u64], pairs: &[LabeledPair]) -> Result<Vec<u8>, DatagenError> {
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    for (&index, p) in indices.iter().zip(pairs) {
        let rec = Record {
            index,
            instance: p.instance.clone(),
            a: SolutionFile::from(&p.a),
            b: SolutionFile::from(&p.b),
            final_a: p.final_a,
            final_b: p.final_b,
            label: p.label,
        };
        let json = serde_json::to_vec(&rec)?;
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
    }
    Ok(out)
}

pub fn decode_dataset(mut bytes: &[u8]) -> Result<(Vec<u64>, Vec<LabeledPair>), DatagenError> {
    let mut head = [0u8; 12];
    bytes.read_exact(&mut head).map_err(|_| DatagenError::Format("truncated header".into()))?;
    if &head[..8] != DATASET_MAGIC {
        return Err(DatagenError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(head[8..].try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(DatagenError::Format(format!("unsupported version {version}")));
    }
    let mut indices = Vec::new();
    let mut pairs = Vec::new();
    while !bytes.is_empty() {
        let mut len = [0u8; 4];
        bytes.read_exact(&mut len).map_err(|_| DatagenError::Format("truncated length".into()))?;
        let len = u32::from_le_bytes(len) as usize;
        if bytes.len() < len {
            return Err(DatagenError::Format(format!("record {} truncated", pairs.len())));
        }
        let rec: Record = serde_json::from_slice(&bytes[..len])?;
        bytes = &bytes[len..];
        let matrix = rec.instance.distance_matrix();
        let a = rec.a.into_solution(&matrix)?;
        let b = rec.b.into_solution(&matrix)?;
        if rec.label > 1 {
            return Err(DatagenError::Format(format!("record {}: label {}", rec.index, rec.label)));
        }
        indices.push(rec.index);
        pairs.push(LabeledPair {
            instance: rec.instance,
            a,
            b,
            final_a: rec.final_a,
            final_b: rec.final_b,
            label: rec.label,
        });
    }
    Ok((indices, pairs))
}

/// Path of the manifest that accompanies `dataset`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the dataset file and its manifest next to it.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), DatagenError> {
    write_atomic(path, &encode_dataset(&dataset.indices, &dataset.pairs)?)?;
    let mut manifest = serde_json::to_vec_pretty(&dataset.manifest)?;
    manifest.push(b'\n');
    write_atomic(&manifest_path(path), &manifest)?;
    Ok(())
}

/// Reads a dataset file and its manifest, checking the content hash.
pub fn read_dataset(path: &Path) -> Result<Dataset, DatagenError> {
    let bytes = std::fs::read(path)?;
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(manifest_path(path))?)?;
    let hash = content_hash(&bytes);
    if hash != manifest.content_hash {
        return Err(DatagenError::Format(format!(
            "content hash {hash} does not match manifest {}",
            manifest.content_hash
        )));
    }
    let (indices, pairs) = decode_dataset(&bytes)?;
    Ok(Dataset { indices, pairs, manifest })
}
