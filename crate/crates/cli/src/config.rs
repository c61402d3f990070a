//! Run configuration: JSON schema, validation with source line numbers, and
//! conversion into an ensemble configuration.

use std::path::Path;

use dg_core::ensemble::{EnsembleConfig, InitialState};
use dg_core::lattice::LatticeGeometry;
use dg_core::model::ModelParams;
use dg_core::sse::{DriftScheme, Schedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub lattice: LatticeGeometry,
    pub integration: Integration,
    #[serde(default)]
    pub initial: InitialState,
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integration {
    pub dt: f64,
    pub t_final: f64,
    pub sample_interval: f64,
    #[serde(default)]
    pub milstein: bool,
    #[serde(default)]
    pub scheme: DriftScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_traj: u64,
    pub master_seed: u64,
    /// Per-trajectory macroscopic histories written to traces.csv.
    #[serde(default)]
    pub keep_traces: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Time window over which center-pair products are averaged for the
    /// correlation map. Defaults to the second half of the run.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Start of the late-time average for steady-state values. Defaults to
    /// the window start.
    #[serde(default)]
    pub steady_state_start: Option<f64>,
    /// Correlation fit threshold. Defaults to 3× the outer-ring median
    /// standard error of the map.
    #[serde(default)]
    pub noise_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    /// Write accumulator.json so `dg analyze` can redo the analysis.
    #[serde(default = "yes")]
    pub accumulator: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_directory(), accumulator: true }
    }
}

fn default_directory() -> String {
    "dg-out".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<f64>,
    /// Keep `delta` equal to `j_hop` while sweeping `j_hop`.
    #[serde(default = "yes")]
    pub slave_delta: bool,
}

/// Config fields a sweep may vary.
pub const SWEEP_AXES: [&str; 7] = ["j_hop", "delta", "u", "g2", "gamma1", "gamma2", "dt"];

/// A validated configuration together with its source and non-fatal notes.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&raw, &path.display().to_string())
}

/// Parses, normalizes and validates config text. `origin` prefixes messages.
pub fn parse(raw: &str, origin: &str) -> Result<Loaded, CliError> {
    let config: RunConfig = serde_json::from_str(raw).map_err(|e| {
        let msg = e.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg);
        CliError::Config(format!("{origin}:{}:{}: {msg}", e.line(), e.column()))
    })?;
    let config = config.normalized();
    let (errors, warnings) = config.review();
    if !errors.is_empty() {
        let lines: Vec<String> = errors
            .iter()
            .map(|(section, msg)| match locate(raw, section, msg) {
                Some(line) => format!("{origin}:{line}: {section}: {msg}"),
                None => format!("{origin}: {section}: {msg}"),
            })
            .collect();
        return Err(CliError::Config(lines.join("\n")));
    }
    Ok(Loaded { config, warnings })
}

impl RunConfig {
    /// Fills every defaulted analysis field so the emitted config is explicit.
    pub fn normalized(mut self) -> Self {
        let t = self.integration.t_final;
        let window = *self.analysis.window.get_or_insert([t / 2.0, t]);
        self.analysis.steady_state_start.get_or_insert(window[0]);
        self
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            dt: self.integration.dt,
            t_final: self.integration.t_final,
            sample_interval: self.integration.sample_interval,
        }
    }

    /// Center-pair statistics need a lattice with an exact center.
    pub fn tracks_center(&self) -> bool {
        self.lattice.extent % 2 == 1
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        let mut cfg = EnsembleConfig::new(
            self.model,
            self.lattice.clone(),
            self.schedule(),
            self.ensemble.n_traj,
            self.ensemble.master_seed,
        );
        cfg.milstein = self.integration.milstein;
        cfg.scheme = self.integration.scheme;
        cfg.initial = self.initial.clone();
        cfg.track_center = self.tracks_center();
        cfg.window = self.analysis.window.map(|[a, b]| (a, b));
        cfg.keep_traces = self.ensemble.keep_traces;
        cfg
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// SHA-256 of the compact normalized config.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(compact.as_bytes()))
    }

    /// Sets a numeric field by sweep-axis name.
    pub fn set_axis(&mut self, axis: &str, value: f64, slave_delta: bool) -> Result<(), CliError> {
        let m = &mut self.model;
        match axis {
            "j_hop" => {
                m.j_hop = value;
                if slave_delta {
                    m.delta = value;
                }
            }
            "delta" => m.delta = value,
            "u" => m.u = value,
            "g2" => m.g2 = value,
            "gamma1" => m.gamma1 = value,
            "gamma2" => m.gamma2 = value,
            "dt" => self.integration.dt = value,
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep axis {other:?}; expected one of {}",
                    SWEEP_AXES.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// `(section, message)` errors and free-form warnings.
    pub fn review(&self) -> (Vec<(&'static str, String)>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        let mut add = |section: &'static str, v: Vec<String>| errors.extend(v.into_iter().map(|m| (section, m)));

        add("model", self.model.violations());
        add("lattice", self.lattice.violations());
        let schedule = self.schedule();
        add("integration", schedule.violations());
        add("initial", self.initial.violations(self.lattice.num_sites()));
        if self.ensemble.n_traj < 1 {
            add("ensemble", vec!["n_traj must be >= 1".into()]);
        }

        let t = self.integration.t_final;
        if let Some([a, b]) = self.analysis.window {
            if !(0.0 <= a && a <= b && b <= t + 1e-9) {
                add("analysis", vec![format!("window [{a}, {b}] must lie inside [0, {t}]")]);
            }
        }
        if let Some(s) = self.analysis.steady_state_start {
            if !(0.0..=t + 1e-9).contains(&s) {
                add("analysis", vec![format!("steady_state_start {s} must lie inside [0, {t}]")]);
            }
        }
        if let Some(f) = self.analysis.noise_floor {
            if !(f >= 0.0 && f.is_finite()) {
                add("analysis", vec![format!("noise_floor must be finite and >= 0, got {f}")]);
            }
        }
        if self.output.directory.is_empty() {
            add("output", vec!["directory must not be empty".into()]);
        }
        if let Some(sw) = &self.sweep {
            if !SWEEP_AXES.contains(&sw.axis.as_str()) {
                add("sweep", vec![format!("axis {:?} is not one of {}", sw.axis, SWEEP_AXES.join(", "))]);
            }
            if sw.values.is_empty() {
                add("sweep", vec!["values must not be empty".into()]);
            }
            if sw.values.iter().any(|v| !v.is_finite()) {
                add("sweep", vec!["values must be finite".into()]);
            }
            if sw.axis == "j_hop" && !sw.slave_delta {
                warnings.push("sweep varies j_hop with delta held fixed".into());
            }
        }

        if self.model.delta != self.model.j_hop {
            warnings.push(format!(
                "delta = {} differs from j_hop = {}; the reference regime uses delta = j_hop",
                self.model.delta, self.model.j_hop
            ));
        }
        if !self.tracks_center() {
            warnings.push(format!(
                "lattice extent {} is even: no center site, correlation map and fits are skipped",
                self.lattice.extent
            ));
        }
        (errors, warnings)
    }
}

const SECTION_FIELDS: [(&str, &[&str]); 8] = [
    ("model", &["delta", "u", "g2", "j_hop", "gamma1", "gamma2", "cutoff"]),
    ("lattice", &["kind", "extent", "boundary"]),
    ("integration", &["dt", "t_final", "sample_interval", "milstein", "scheme"]),
    ("initial", &["amplitudes", "amplitude", "kind"]),
    ("ensemble", &["n_traj", "master_seed", "keep_traces"]),
    ("analysis", &["window", "steady_state_start", "noise_floor"]),
    ("output", &["directory", "accumulator"]),
    ("sweep", &["axis", "values", "slave_delta"]),
];

/// 1-based line of the field a message is about, falling back to the
/// section's own line.
fn locate(raw: &str, section: &str, msg: &str) -> Option<usize> {
    let lines: Vec<&str> = raw.lines().collect();
    let start = lines.iter().position(|l| l.contains(&format!("\"{section}\"")))?;
    let fields = SECTION_FIELDS.iter().find(|(s, _)| *s == section).map(|(_, f)| *f).unwrap_or(&[]);
    let words: Vec<&str> = msg
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    let field = words.iter().find(|w| fields.contains(w));
    if let Some(field) = field {
        let key = format!("\"{field}\"");
        if let Some(off) = lines[start..].iter().position(|l| l.contains(&key)) {
            return Some(start + off + 1);
        }
    }
    Some(start + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
  "model": {"delta": 0.0, "u": 10.0, "g2": 4.0, "j_hop": 0.0, "gamma1": 1.0, "gamma2": 1.0, "cutoff": 8},
  "lattice": {"kind": "chain1d", "extent": 1},
  "integration": {"dt": 0.002, "t_final": 1.0, "sample_interval": 0.1},
  "ensemble": {"n_traj": 16, "master_seed": 7}
}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL, "c.json").unwrap().config;
        assert_eq!(cfg.analysis.window, Some([0.5, 1.0]));
        assert_eq!(cfg.analysis.steady_state_start, Some(0.5));
        assert_eq!(cfg.integration.scheme, DriftScheme::ExactDiagonal);
        assert_eq!(cfg.output.directory, "dg-out");
        assert!(cfg.tracks_center());
    }

    #[test]
    fn emit_then_load_is_idempotent() {
        let once = parse(MINIMAL, "c.json").unwrap().config;
        let text = once.to_json();
        let twice = parse(&text, "c.json").unwrap().config;
        assert_eq!(once, twice);
        assert_eq!(text, twice.to_json());
        assert_eq!(once.hash(), twice.hash());
    }

    #[test]
    fn unknown_field_reports_its_line() {
        let raw = MINIMAL.replace("\"cutoff\": 8}", "\"cutoff\": 8, \"kerr\": 1}");
        let CliError::Config(msg) = parse(&raw, "c.json").unwrap_err() else { panic!() };
        assert!(msg.starts_with("c.json:2:"), "{msg}");
        assert!(msg.contains("kerr"), "{msg}");
    }

    #[test]
    fn every_violation_is_reported_with_a_line() {
        let raw = MINIMAL
            .replace("\"gamma1\": 1.0", "\"gamma1\": -1.0")
            .replace("\"n_traj\": 16", "\"n_traj\": 0")
            .replace("\"dt\": 0.002", "\"dt\": 0.003");
        let CliError::Config(msg) = parse(&raw, "c.json").unwrap_err() else { panic!() };
        let lines: Vec<&str> = msg.lines().collect();
        assert_eq!(lines.len(), 3, "{msg}");
        assert!(lines[0].starts_with("c.json:2: model: gamma1"), "{msg}");
        assert!(lines[1].starts_with("c.json:4: integration:"), "{msg}");
        assert!(lines[2].starts_with("c.json:5: ensemble: n_traj"), "{msg}");
    }

    #[test]
    fn unslaved_delta_only_warns() {
        let raw = MINIMAL.replace("\"delta\": 0.0", "\"delta\": 0.5");
        let loaded = parse(&raw, "c.json").unwrap();
        assert!(loaded.warnings.iter().any(|w| w.contains("delta")));
    }

    #[test]
    fn axis_setter() {
        let mut cfg = parse(MINIMAL, "c.json").unwrap().config;
        cfg.set_axis("j_hop", 0.7, true).unwrap();
        assert_eq!((cfg.model.j_hop, cfg.model.delta), (0.7, 0.7));
        cfg.set_axis("j_hop", 0.2, false).unwrap();
        assert_eq!((cfg.model.j_hop, cfg.model.delta), (0.2, 0.7));
        assert!(cfg.set_axis("cutoff", 3.0, true).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse(MINIMAL, "c.json").unwrap().config;
        let mut b = a.clone();
        b.ensemble.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
