//! Request and response bodies for the HTTP service, and the operations
//! behind them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{decode_envelope, CodecError, Envelope};
use crate::cis::{cfi_stats, profile_source, CfiStats, CisProfile, Fingerprint, ParseError, ProfileOptions};
use crate::detection::Verdict;
use crate::sim::{Scenario, ScenarioError, ScenarioOutcome, TamperPatch};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{name}: {source}")]
    Parse {
        name: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("bad hex: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl ApiError {
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::Parse { .. } => "parse",
            ApiError::Scenario(_) => "scenario",
            ApiError::Hex(_) => "hex",
            ApiError::Codec(_) => "codec",
        }
    }
}

/// Error body returned with any non-2xx status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub error: String,
}

impl From<&ApiError> for ErrorBody {
    fn from(e: &ApiError) -> Self {
        Self {
            kind: e.kind().to_string(),
            error: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

impl Health {
    pub fn ok() -> Self {
        Self {
            status: "ok".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

fn default_process_id() -> String {
    "process".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRequest {
    pub source: String,
    #[serde(default = "default_process_id")]
    pub process_id: String,
    #[serde(default)]
    pub include_operands: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResponse {
    pub process_id: String,
    pub stats: CfiStats,
    pub cis: CisProfile,
    pub fingerprint: Fingerprint,
}

pub fn profile(req: &ProfileRequest) -> Result<ProfileResponse, ApiError> {
    let opts = ProfileOptions {
        include_operands: req.include_operands,
    };
    let (program, cis, fingerprint) = profile_source(&req.source, &req.process_id, opts)
        .map_err(|source| ApiError::Parse {
            name: req.process_id.clone(),
            source,
        })?;
    Ok(ProfileResponse {
        process_id: req.process_id.clone(),
        stats: cfi_stats(&program),
        cis,
        fingerprint,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedSource {
    pub name: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRequest {
    pub files: Vec<NamedSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileStats {
    pub name: String,
    pub stats: CfiStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub files: Vec<FileStats>,
    /// Counts summed over all files, fractions recomputed from the sums.
    pub pooled: CfiStats,
}

pub fn stats(req: &StatsRequest) -> Result<StatsResponse, ApiError> {
    let mut files = Vec::with_capacity(req.files.len());
    for f in &req.files {
        let program = crate::cis::parse_assembly(&f.source, &f.name).map_err(|source| ApiError::Parse {
            name: f.name.clone(),
            source,
        })?;
        files.push(FileStats {
            name: f.name.clone(),
            stats: cfi_stats(&program),
        });
    }
    let pooled = CfiStats::pooled(files.iter().map(|f| &f.stats));
    Ok(StatsResponse { files, pooled })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffRequest {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub include_operands: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub a: usize,
    pub b: usize,
    pub delta: i64,
}

impl ClassDelta {
    fn new(a: usize, b: usize) -> Self {
        Self {
            a,
            b,
            delta: b as i64 - a as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffResponse {
    /// Safe when the two listings fingerprint identically.
    pub verdict: Verdict,
    pub a: Fingerprint,
    pub b: Fingerprint,
    pub jumps: ClassDelta,
    pub calls: ClassDelta,
    pub returns: ClassDelta,
}

pub fn diff(req: &DiffRequest) -> Result<DiffResponse, ApiError> {
    let opts = ProfileOptions {
        include_operands: req.include_operands,
    };
    let one = |name: &str, text: &str| {
        profile_source(text, "diff", opts).map_err(|source| ApiError::Parse {
            name: name.to_string(),
            source,
        })
    };
    let (_, ca, fa) = one("a", &req.a)?;
    let (_, cb, fb) = one("b", &req.b)?;
    let verdict = if fa.combined == fb.combined {
        Verdict::Safe
    } else {
        Verdict::Unsafe
    };
    Ok(DiffResponse {
        verdict,
        jumps: ClassDelta::new(ca.jumps.len(), cb.jumps.len()),
        calls: ClassDelta::new(ca.calls.len(), cb.calls.len()),
        returns: ClassDelta::new(ca.returns.len(), cb.returns.len()),
        a: fa,
        b: fb,
    })
}

/// Sources must be inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub scenario: Scenario,
}

pub type RunResponse = ScenarioOutcome;

pub fn run(req: &RunRequest) -> Result<RunResponse, ApiError> {
    Ok(req.scenario.run()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectRequest {
    pub scenario: Scenario,
    pub patch: TamperPatch,
}

/// The scenario with the patch appended, after checking it applies.
pub fn inject(req: &InjectRequest) -> Result<Scenario, ApiError> {
    let mut scenario = req.scenario.clone();
    scenario.patches.push(req.patch.clone());
    scenario.build()?;
    Ok(scenario)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub hex: String,
}

pub fn decode(req: &DecodeRequest) -> Result<Envelope, ApiError> {
    let bytes = hex::decode(req.hex.trim())?;
    Ok(decode_envelope(&bytes)?)
}
