//! Experiment configuration and artifact persistence.
//!
//! Artifacts are diff-able text: trajectory tables are delimited columns in
//! a fixed order, and structured documents (configs, models, reports,
//! manifests) are TOML. All writes are atomic (write to a temp file in the
//! same directory, then rename). Every run leaves a manifest recording the
//! fully resolved configuration, the artifacts it wrote with checksums, and
//! the readings of conventions the underlying method leaves open.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::PipelineConfig;
use crate::optimize::OptimizerConfig;
use crate::plant::{PlantModel, SwimmerConfig, Trajectory};
use crate::se2::Pose;
use crate::waveform::{recommended_dt, ParamBox, WaveformFamily};

/// Environment variable that redirects relative artifact paths.
pub const ARTIFACT_ROOT_VAR: &str = "SOFTGAIT_ARTIFACT_ROOT";

/// Resolves a possibly relative artifact path against the artifact root:
/// the `SOFTGAIT_ARTIFACT_ROOT` environment variable when set, otherwise
/// the current directory.
pub fn resolve_artifact_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(ARTIFACT_ROOT_VAR) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// Where cycles are sampled from and how runs are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub family: WaveformFamily,
    /// Lower parameter bounds, in the family's parameter order.
    pub lo: Vec<f64>,
    /// Upper parameter bounds.
    pub hi: Vec<f64>,
    pub runs: usize,
    pub cycles_per_run: usize,
    pub warmup_cycles: usize,
    /// Sample-rate target; `dt` overrides when set.
    pub steps_per_cycle: usize,
    /// Explicit sample interval. Left unset, the interval is derived from
    /// the box so the fastest cycle keeps `steps_per_cycle` samples.
    pub dt: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            family: WaveformFamily::Symmetric,
            lo: vec![-1.0, 0.5, 8.0, 0.25],
            hi: vec![-0.5, 1.0, 16.0, 1.0],
            runs: 10,
            cycles_per_run: 10,
            warmup_cycles: 2,
            steps_per_cycle: 300,
            dt: None,
        }
    }
}

impl SamplingConfig {
    pub fn to_box(&self) -> Result<ParamBox> {
        ParamBox::new(self.family, self.lo.clone(), self.hi.clone())
    }

    /// The sample interval this configuration resolves to.
    pub fn resolve_dt(&self) -> Result<f64> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "dt must be positive, got {dt}"
                )));
            }
            return Ok(dt);
        }
        Ok(recommended_dt(&self.to_box()?, self.steps_per_cycle))
    }

    pub fn validate(&self) -> Result<()> {
        self.to_box()?;
        self.resolve_dt()?;
        if self.runs == 0 || self.cycles_per_run == 0 {
            return Err(Error::InvalidConfig(
                "runs and cycles_per_run must be at least 1".into(),
            ));
        }
        if self.steps_per_cycle < 32 {
            return Err(Error::InvalidConfig(format!(
                "steps_per_cycle must be at least 32, got {}",
                self.steps_per_cycle
            )));
        }
        Ok(())
    }
}

/// Root experiment configuration. Any omitted field takes its default and
/// is written back fully resolved into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; stage seeds are derived from it by name.
    pub seed: u64,
    pub plant: PlantModel,
    pub sampling: SamplingConfig,
    pub pipeline: PipelineConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            plant: PlantModel::Swimmer(SwimmerConfig::default()),
            sampling: SamplingConfig::default(),
            pipeline: PipelineConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.sampling.validate()?;
        self.pipeline.validate()?;
        self.optimizer.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = load_toml(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes `content` to `path` atomically.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a document to TOML and writes it atomically.
pub fn save_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize {}: {e}", path.display())))?;
    write_atomic(path, text.as_bytes())
}

/// Loads a TOML document, mapping a missing file to a missing-artifact
/// error and a syntax or unknown-key problem to a parse error naming it.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_artifact(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Reads a text artifact, mapping a missing file to `MissingArtifact`.
pub fn read_artifact(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingArtifact(path.display().to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(sha256_hex(&bytes))
}

fn fmt_value(v: f64) -> String {
    format!("{v:.17e}")
}

/// Writes a trajectory as a delimited table with the fixed column order
/// `t, u, r…, rdot…, xi1, xi2, xi3, x, y, theta, phi`.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let d = traj.shape_dim();
    let mut header = vec!["t".to_string(), "u".to_string()];
    header.extend((1..=d).map(|j| format!("r{j}")));
    header.extend((1..=d).map(|j| format!("rdot{j}")));
    header.extend((1..=3).map(|j| format!("xi{j}")));
    header.extend(["x", "y", "theta", "phi"].map(str::to_string));
    let mut out = String::with_capacity(traj.len() * 24 * header.len());
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..traj.len() {
        let mut row = Vec::with_capacity(header.len());
        row.push(fmt_value(i as f64 * traj.dt));
        row.push(fmt_value(traj.u[i]));
        for j in 0..d {
            row.push(fmt_value(traj.r[(i, j)]));
        }
        for j in 0..d {
            row.push(fmt_value(traj.r_dot[(i, j)]));
        }
        for j in 0..3 {
            row.push(fmt_value(traj.xi[(i, j)]));
        }
        row.push(fmt_value(traj.pose[i].x));
        row.push(fmt_value(traj.pose[i].y));
        row.push(fmt_value(traj.pose[i].theta));
        row.push(fmt_value(traj.phi[i]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a trajectory table written by `write_trajectory`.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = read_artifact(path)?;
    let parse_err = |detail: String| Error::Parse {
        path: path.display().to_string(),
        detail,
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| parse_err("empty trajectory table".into()))?
        .split(',')
        .collect();
    let cols = header.len();
    if cols < 11 || (cols - 9) % 2 != 0 {
        return Err(parse_err(format!("unexpected column count {cols}")));
    }
    let d = (cols - 9) / 2;
    let expected_tail = ["x", "y", "theta", "phi"];
    if header[0] != "t"
        || header[1] != "u"
        || header[cols - 4..] != expected_tail
        || (0..d).any(|j| header[2 + j] != format!("r{}", j + 1))
        || (0..d).any(|j| header[2 + d + j] != format!("rdot{}", j + 1))
        || (0..3).any(|j| header[2 + 2 * d + j] != format!("xi{}", j + 1))
    {
        return Err(parse_err(format!("unexpected column order: {header:?}")));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", ln + 2)))?;
        if vals.len() != cols {
            return Err(parse_err(format!(
                "row {} has {} values, expected {cols}",
                ln + 2,
                vals.len()
            )));
        }
        rows.push(vals);
    }
    if rows.len() < 2 {
        return Err(parse_err("trajectory needs at least 2 samples".into()));
    }
    let n = rows.len();
    let dt = rows[1][0];
    if !(dt > 0.0) {
        return Err(parse_err(format!("nonpositive sample interval {dt}")));
    }
    let mut traj = Trajectory {
        dt,
        u: Vec::with_capacity(n),
        r: DMatrix::zeros(n, d),
        r_dot: DMatrix::zeros(n, d),
        xi: DMatrix::zeros(n, 3),
        pose: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
    };
    for (i, row) in rows.iter().enumerate() {
        traj.u.push(row[1]);
        for j in 0..d {
            traj.r[(i, j)] = row[2 + j];
            traj.r_dot[(i, j)] = row[2 + d + j];
        }
        for j in 0..3 {
            traj.xi[(i, j)] = row[2 + 2 * d + j];
        }
        traj.pose.push(Pose::new(
            row[cols - 4],
            row[cols - 3],
            row[cols - 2],
        ));
        traj.phi.push(row[cols - 1]);
    }
    Ok(traj)
}

/// One artifact a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Record of one CLI run: the fully resolved configuration, what was
/// written, and the convention readings baked into the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub package_version: String,
    pub format_version: u32,
    pub wallclock_seconds: f64,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactRef>,
}

pub const FORMAT_VERSION: u32 = 1;

/// Convention readings recorded in every manifest.
pub fn convention_notes() -> Vec<String> {
    vec![
        "prediction-time phase is driven by the commanded clock (2*pi per cycle)".into(),
        "improvement metric uses the per-sample Euclidean norm".into(),
        "data phase is aligned to the clock by the circular mean offset over training samples".into(),
        "shrink mode reduce_by: new width = (1 - factor) * old width, clipped inside the current box".into(),
        "refinement shrinks about the plant-verified incumbent, the best verified point so far".into(),
        "window-fit ridge engages on normal-equation condition numbers above 1e8".into(),
        "iterations with non-positive cross-validated skill search the mean-cycle model and flag the fallback".into(),
    ]
}

impl RunManifest {
    pub fn new(command: &str, config: ExperimentConfig) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION,
            wallclock_seconds: 0.0,
            notes: convention_notes(),
            config,
            artifacts: Vec::new(),
        }
    }

    /// Registers a written artifact by checksumming it on disk.
    pub fn record(&mut self, role: &str, path: &Path) -> Result<()> {
        self.artifacts.push(ArtifactRef {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_toml(path, self)
    }
}

/// Index of a simulated dataset: one row per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub seed: u64,
    pub dt: f64,
    pub runs: Vec<DatasetRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRun {
    pub trajectory: String,
    pub schedule: String,
}
