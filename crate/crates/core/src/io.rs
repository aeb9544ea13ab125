//! Versioned JSON artifacts.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::certificate::{CertifyOutcome, DualSolution};
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::instance::Instance;
use crate::lp::{LpSolution, RecoveryVerdict, SolveStatus};

pub const FORMAT_VERSION: u32 = 1;

/// Entries at or below this magnitude are omitted from sparse lists.
pub const SPARSE_CUTOFF: f64 = 1e-9;

/// A payload with its `"format"` field alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub format: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            format: FORMAT_VERSION,
            body,
        }
    }
}

/// `(row, column, value)` triple of a sparse `n × n` matrix.
pub type Entry = (usize, usize, f64);

pub fn sparse(values: &[f64], n: usize) -> Vec<Entry> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SPARSE_CUTOFF)
        .map(|(i, &v)| (i / n, i % n, v))
        .collect()
}

pub fn dense(entries: &[Entry], n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n * n];
    for &(p, q, v) in entries {
        if p >= n || q >= n {
            return Err(Error::Config(format!("entry ({p}, {q}) outside a {n} x {n} matrix")));
        }
        out[p * n + q] = v;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualRecord {
    pub alpha: Vec<f64>,
    pub omega: f64,
    pub beta: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub n: usize,
    pub k: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: usize,
    pub y: Vec<f64>,
    /// Assignment entries `(p, q, z_pq)`: point `q` served by `p`.
    pub z: Vec<Entry>,
    pub dual: DualRecord,
    #[serde(default)]
    pub verdict: Option<RecoveryVerdict>,
}

impl SolutionRecord {
    pub fn new(k: usize, sol: &LpSolution, dual: &DualSolution, verdict: Option<RecoveryVerdict>) -> Self {
        SolutionRecord {
            n: sol.n,
            k,
            status: sol.status,
            objective: sol.objective,
            iterations: sol.iterations,
            y: sol.y.clone(),
            z: sparse(&sol.z, sol.n),
            dual: DualRecord {
                alpha: dual.alpha.clone(),
                omega: dual.omega,
                beta: sparse(&dual.beta, sol.n),
            },
            verdict,
        }
    }

    pub fn solution(&self) -> Result<LpSolution> {
        Ok(LpSolution {
            n: self.n,
            y: self.y.clone(),
            z: dense(&self.z, self.n)?,
            objective: self.objective,
            status: self.status,
            iterations: self.iterations,
        })
    }

    pub fn dual(&self) -> Result<DualSolution> {
        Ok(DualSolution {
            alpha: self.dual.alpha.clone(),
            beta: dense(&self.dual.beta, self.n)?,
            omega: self.dual.omega,
        })
    }
}

pub type InstanceFile = Versioned<Instance>;
pub type SolutionFile = Versioned<SolutionRecord>;
pub type CertificateFile = Versioned<CertifyOutcome>;
pub type ConfigFile = Versioned<ExperimentConfig>;

pub fn to_json<T: Serialize>(body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned::new(body)).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let v: Versioned<T> = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed file: {e}")))?;
    if v.format != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported format {} (expected {FORMAT_VERSION})",
            v.format
        )));
    }
    Ok(v.body)
}

pub fn write_json<T: Serialize>(path: &Path, body: &T) -> Result<()> {
    std::fs::write(path, to_json(body)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

/// Reads and validates an instance file.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let inst: Instance = read_json(path)?;
    inst.validate()?;
    Ok(inst)
}
