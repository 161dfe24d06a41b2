//! Run configuration documents (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{validate_params, SimParams, ValidatedParams};
use crate::profile::InitialProfile;
use crate::solver::SpatialGrid;

pub const DEFAULT_SWEEP_CAP: usize = 1024;

/// Initial data as written in a config: an inline profile or a file of samples.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Inline(InitialProfile),
    /// Whitespace- or comma-separated values, one per grid point.
    File(PathBuf),
}

impl<'de> Deserialize<'de> for ProfileSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = toml::Value::deserialize(d)?;
        let is_file = v.get("kind").and_then(|k| k.as_str()) == Some("file");
        if is_file {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct FileSpec {
                #[allow(dead_code)]
                kind: String,
                path: PathBuf,
            }
            let f = FileSpec::deserialize(v).map_err(D::Error::custom)?;
            Ok(ProfileSpec::File(f.path))
        } else {
            InitialProfile::deserialize(v)
                .map(ProfileSpec::Inline)
                .map_err(D::Error::custom)
        }
    }
}

impl ProfileSpec {
    /// Resolve to a profile on `grid`. File paths are relative to `base_dir`.
    pub fn resolve(&self, grid: &SpatialGrid, base_dir: &Path) -> Result<InitialProfile> {
        match self {
            ProfileSpec::Inline(p) => Ok(p.clone()),
            ProfileSpec::File(path) => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                let values = text
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| {
                            Error::Profile(format!("{}: cannot parse {t:?}", full.display()))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() != grid.nx {
                    return Err(Error::Profile(format!(
                        "{}: {} values for a grid of {} points",
                        full.display(),
                        values.len(),
                        grid.nx
                    )));
                }
                Ok(InitialProfile::Sampled {
                    x0: grid.start(),
                    dx: grid.dx,
                    values,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u0: ProfileSpec,
    pub u1: ProfileSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub a: f64,
    #[serde(rename = "T_prime")]
    pub t_prime: f64,
}

/// Knobs for the analysis commands.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Also run the Duhamel solver in `simulate` (1-D only).
    pub cross_validate: bool,
    /// Fraction of `T̂` compared against the Duhamel solution.
    pub cross_validate_fraction: f64,
    /// Length of the similarity-time window analysed by `energy`.
    pub s_span: f64,
    pub s_samples: usize,
    pub ball_nodes: usize,
    pub lower_bound_slack: f64,
    /// `criterion` follows up with a run to `T'`.
    pub follow_up: bool,
    /// Write the full-field trajectory in `simulate`.
    pub write_trajectory: bool,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            cross_validate: false,
            cross_validate_fraction: 0.8,
            s_span: 5.0,
            s_samples: 251,
            ball_nodes: 201,
            lower_bound_slack: crate::diagnostics::DEFAULT_LOWER_BOUND_SLACK,
            follow_up: true,
            write_trajectory: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted key path into the run document, e.g. `initial_data.u1.value`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_parallel() -> usize {
    1
}
fn default_cap() -> usize {
    DEFAULT_SWEEP_CAP
}
fn default_outputs() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: SimParams,
    initial_data: InitialData,
    #[serde(default)]
    frame: Option<FrameSpec>,
    #[serde(default = "default_outputs")]
    outputs: PathBuf,
    #[serde(default)]
    seed: u64,
    /// Relative amplitude jitter applied per sweep run.
    #[serde(default)]
    jitter: f64,
    #[serde(default)]
    analysis: AnalysisSpec,
}

/// A parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SimParams,
    pub initial_data: InitialData,
    pub frame: Option<FrameSpec>,
    pub outputs: PathBuf,
    pub seed: u64,
    pub jitter: f64,
    pub analysis: AnalysisSpec,
    /// Multiplies both initial profiles; set per run by sweep jitter.
    pub amplitude_factor: f64,
    /// Directory that relative paths in the document refer to.
    pub base_dir: PathBuf,
    /// The document as read, for copying into run directories.
    pub source: String,
    pub validated: ValidatedParams,
}

/// Base configuration plus the grid to sweep over.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: toml::Value,
    pub base_dir: PathBuf,
    pub axes: Vec<SweepAxis>,
    pub max_parallel: usize,
    pub cap: usize,
}

fn config_error(origin: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{origin}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| config_error(&origin, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut value: toml::Value =
            toml::from_str(&text).map_err(|e| config_error(&origin, e))?;
        if let Some(t) = value.as_table_mut() {
            t.remove("sweep");
        }
        Self::from_value(value, text, base_dir, &origin)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| config_error("<string>", e))?;
        Self::from_value(value, text.to_string(), base_dir.to_path_buf(), "<string>")
    }

    pub fn from_value(value: toml::Value, source: String, base_dir: PathBuf, origin: &str) -> Result<Self> {
        let raw = RawConfig::deserialize(value).map_err(|e| config_error(origin, e))?;
        let validated = validate_params(&raw.params).map_err(|errs| {
            let msgs: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
            config_error(origin, msgs.join("; "))
        })?;
        let a = &raw.analysis;
        if !(a.s_span > 0.0 && a.s_span.is_finite()) {
            return Err(config_error(origin, "analysis.s_span must be positive"));
        }
        if a.s_samples < 3 || a.ball_nodes < 3 {
            return Err(config_error(origin, "analysis.s_samples and analysis.ball_nodes must be at least 3"));
        }
        if !(a.cross_validate_fraction > 0.0 && a.cross_validate_fraction <= 1.0) {
            return Err(config_error(origin, "analysis.cross_validate_fraction must lie in (0, 1]"));
        }
        if !(a.lower_bound_slack >= 0.0 && a.lower_bound_slack < 1.0) {
            return Err(config_error(origin, "analysis.lower_bound_slack must lie in [0, 1)"));
        }
        if !(raw.jitter >= 0.0 && raw.jitter < 1.0) {
            return Err(config_error(origin, "jitter must lie in [0, 1)"));
        }
        if let Some(f) = raw.frame {
            if !(f.t_prime > 0.0 && f.t_prime.is_finite() && f.a.is_finite()) {
                return Err(config_error(origin, "frame.T_prime must be positive and frame.a finite"));
            }
        }
        Ok(Self {
            params: raw.params,
            initial_data: raw.initial_data,
            frame: raw.frame,
            outputs: raw.outputs,
            seed: raw.seed,
            jitter: raw.jitter,
            analysis: raw.analysis,
            amplitude_factor: 1.0,
            base_dir,
            source,
            validated,
        })
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::from_params(&self.params)
    }

    /// `(u0, u1)` resolved on the run grid.
    pub fn profiles(&self) -> Result<(InitialProfile, InitialProfile)> {
        let grid = self.grid()?;
        let mut u0 = self.initial_data.u0.resolve(&grid, &self.base_dir)?;
        let mut u1 = self.initial_data.u1.resolve(&grid, &self.base_dir)?;
        if self.amplitude_factor != 1.0 {
            u0.scale(self.amplitude_factor);
            u1.scale(self.amplitude_factor);
        }
        Ok((u0, u1))
    }

    /// Command-line frame flags override the document; both halves must be
    /// known in the end.
    pub fn frame_with(&self, a: Option<f64>, t_prime: Option<f64>) -> Option<FrameSpec> {
        match (self.frame, a, t_prime) {
            (_, Some(a), Some(t)) => Some(FrameSpec { a, t_prime: t }),
            (Some(f), a, t) => Some(FrameSpec {
                a: a.unwrap_or(f.a),
                t_prime: t.unwrap_or(f.t_prime),
            }),
            (None, None, Some(t)) => Some(FrameSpec { a: 0.0, t_prime: t }),
            _ => None,
        }
    }
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| config_error(&origin, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_in(&text, base_dir, &origin)
    }

    pub fn from_str_in(text: &str, base_dir: PathBuf, origin: &str) -> Result<Self> {
        let mut base: toml::Value = toml::from_str(text).map_err(|e| config_error(origin, e))?;
        let sweep = base
            .as_table_mut()
            .and_then(|t| t.remove("sweep"))
            .ok_or_else(|| config_error(origin, "missing [sweep] table"))?;
        let table = SweepTable::deserialize(sweep).map_err(|e| config_error(origin, e))?;
        let spec = Self {
            base,
            base_dir,
            axes: table.axes,
            max_parallel: table.max_parallel,
            cap: table.cap,
        };
        if spec.max_parallel == 0 {
            return Err(config_error(origin, "sweep.max_parallel must be positive"));
        }
        if spec.axes.iter().any(|a| a.values.is_empty()) {
            return Err(config_error(origin, "every sweep axis needs at least one value"));
        }
        let size = spec.size();
        if size > spec.cap {
            return Err(config_error(
                origin,
                format!("sweep has {size} runs, above the cap of {}", spec.cap),
            ));
        }
        // Fail early on a base document that cannot run at all.
        for k in 0..size {
            spec.point(k)?;
        }
        Ok(spec)
    }

    /// Cartesian product size.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values of run `k`, last axis varying fastest.
    pub fn coordinates(&self, mut k: usize) -> Vec<&toml::Value> {
        let mut out = vec![&self.axes[0].values[0]; self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[i] = &axis.values[k % n];
            k /= n;
        }
        out
    }

    /// Document of run `k`.
    pub fn point(&self, k: usize) -> Result<toml::Value> {
        let mut doc = self.base.clone();
        for (axis, value) in self.axes.iter().zip(self.coordinates(k)) {
            set_path(&mut doc, &axis.path, value.clone())?;
        }
        Ok(doc)
    }
}

/// Set a dotted key, creating intermediate tables as needed.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("malformed key path {path:?}")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{path}: {key} is not inside a table")))?;
        node = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("{path}: parent is not a table")))?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7

[params]
p = 2.0
domain_radius = 2.0
nx = 101
cfl = 0.5
t_end = 0.1
alpha = 3.0
boundary = "periodic"

[initial_data.u0]
kind = "constant"
value = 0.0

[initial_data.u1]
kind = "gaussian"
amplitude = 1.0
width = 0.5
"#;

    #[test]
    fn parses_defaults() {
        let cfg = RunConfig::parse(BASE, Path::new(".")).unwrap();
        assert_eq!(cfg.params.dim, 1);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.analysis, AnalysisSpec::default());
        assert!(cfg.frame.is_none());
        assert_eq!(cfg.outputs, PathBuf::from("runs"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_params() {
        let bad = BASE.replace("seed = 7", "seed = 7\nbogus = 1");
        assert!(matches!(RunConfig::parse(&bad, Path::new(".")), Err(Error::Config(_))));
        let bad = BASE.replace("p = 2.0", "p = 1.0");
        let err = RunConfig::parse(&bad, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("p = 1"), "{err}");
    }

    #[test]
    fn file_profile_checks_length_and_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("u1.txt"), "1 2 3\n4, 5").unwrap();
        let text = BASE.replace(
            "kind = \"gaussian\"\namplitude = 1.0\nwidth = 0.5",
            "kind = \"file\"\npath = \"u1.txt\"",
        );
        let cfg = RunConfig::parse(&text, dir.path()).unwrap();
        let err = cfg.profiles().unwrap_err();
        assert!(matches!(err, Error::Profile(_)));
        assert!(err.to_string().contains("u1.txt"), "{err}");

        let values: Vec<String> = (0..101).map(|i| format!("{}", i as f64 * 0.01)).collect();
        std::fs::write(dir.path().join("u1.txt"), values.join("\n")).unwrap();
        let (_, u1) = cfg.profiles().unwrap();
        assert!((u1.eval(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_flags_override() {
        let text = format!("{BASE}\n[frame]\na = 0.5\nT_prime = 1.0\n");
        let cfg = RunConfig::parse(&text, Path::new(".")).unwrap();
        let f = cfg.frame_with(None, Some(2.0)).unwrap();
        assert_eq!((f.a, f.t_prime), (0.5, 2.0));
        let cfg = RunConfig::parse(BASE, Path::new(".")).unwrap();
        assert!(cfg.frame_with(Some(0.1), None).is_none());
        assert_eq!(cfg.frame_with(None, Some(3.0)).unwrap().a, 0.0);
    }

    #[test]
    fn sweep_product_and_ordering() {
        let text = format!(
            "{BASE}\n[sweep]\nmax_parallel = 2\n[[sweep.axes]]\npath = \"params.p\"\nvalues = [1.5, 2.0]\n\
             [[sweep.axes]]\npath = \"initial_data.u1.amplitude\"\nvalues = [0.5, 1.0, 2.0]\n"
        );
        let spec = SweepSpec::from_str_in(&text, PathBuf::from("."), "t").unwrap();
        assert_eq!(spec.size(), 6);
        let c = spec.coordinates(4);
        assert_eq!(c[0].as_float(), Some(2.0));
        assert_eq!(c[1].as_float(), Some(1.0));
        let doc = spec.point(4).unwrap();
        assert_eq!(doc["initial_data"]["u1"]["amplitude"].as_float(), Some(1.0));
        assert!(doc.get("sweep").is_none());
    }

    #[test]
    fn sweep_cap_is_enforced() {
        let vals: Vec<String> = (0..40).map(|i| format!("{}.0", i + 2)).collect();
        let text = format!(
            "{BASE}\n[sweep]\ncap = 1000\n[[sweep.axes]]\npath = \"params.p\"\nvalues = [{}]\n\
             [[sweep.axes]]\npath = \"seed\"\nvalues = [{}]\n",
            vals.join(", "),
            (0..30).map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
        );
        let err = SweepSpec::from_str_in(&text, PathBuf::from("."), "t").unwrap_err();
        assert!(err.to_string().contains("cap"), "{err}");
    }
}
