//! Text formats: times in units of π, grids, run configurations, CSV tables
//! and canonical JSON with per-file manifests.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::SweepRecord;
use crate::geometry::{SingularLaw, SphereCoord};
use crate::model::{preparation_initial, preparation_target, BlochVector, Channel, SystemSpec};
use crate::optimize::{Scenario, SearchOptions};
use crate::pmp::{DEFAULT_TOL_HC, DEFAULT_TOL_PHI};
use crate::propagate::{ControlSchedule, CostKind, CostateTrajectory, Trajectory};

/// Parses `<number>`, `<number>pi` or `pi`, with `π` accepted for `pi`.
pub fn parse_time(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = || Error::Parse(format!("bad time {s:?} (expected e.g. 1.3, 0.42pi or 0.42π)"));
    let (num, scale) = if let Some(head) = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        (head.trim(), PI)
    } else {
        (t, 1.0)
    };
    let value = if num.is_empty() && scale == PI {
        1.0
    } else {
        if num.ends_with(['e', 'E', '+', '-']) {
            return Err(bad());
        }
        num.parse::<f64>().map_err(|_| bad())?
    };
    let v = value * scale;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Formats a time in units of π.
pub fn format_time(t: f64) -> String {
    format!("{}pi", t / PI)
}

/// Parses `lo:hi:n` (inclusive, `n` points) or a comma-separated list of
/// times. The result must be ascending and non-negative.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (parse_time(lo)?, parse_time(hi)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad point count {n:?}")))?;
            if n == 0 || n > 100_000 {
                return Err(Error::Parse(format!("point count must be in 1..=100000, got {n}")));
            }
            if n > 1 && !(hi > lo) {
                return Err(Error::Parse(format!("grid needs hi > lo, got {s:?}")));
            }
            crate::experiments::linear_grid(lo, hi, n)
        }
        [list] => list.split(',').map(parse_time).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Parse(format!("bad grid {s:?} (expected lo:hi:n or a list)"))),
    };
    crate::experiments::check_grid(&grid)?;
    Ok(grid)
}

/// Parses a Bloch vector `x,y,z` inside the unit ball.
pub fn parse_bloch(s: &str) -> Result<BlochVector> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad component {p:?}"))))
        .collect::<Result<_>>()?;
    let [x, y, z] = v[..] else {
        return Err(Error::Parse(format!("expected three components, got {s:?}")));
    };
    let b = BlochVector::new(x, y, z);
    if v.iter().all(|c| c.is_finite()) && b.is_physical() {
        Ok(b)
    } else {
        Err(Error::InvalidState(format!("{s:?} lies outside the Bloch ball")))
    }
}

/// Reads a schedule from inline JSON, or from a file when the argument
/// starts with `@`.
pub fn read_schedule(arg: &str) -> Result<ControlSchedule> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    parse_schedule_json(&text)
}

pub fn parse_schedule_json(text: &str) -> Result<ControlSchedule> {
    let s: ControlSchedule = serde_json::from_str(text)?;
    s.validate()?;
    Ok(s)
}

/// A time given as a number or as a string accepted by [`parse_time`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TimeValue(pub f64);

impl<'de> Deserialize<'de> for TimeValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(TimeValue(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("non-finite time {v}"))),
            Raw::Text(s) => parse_time(&s).map(TimeValue).map_err(serde::de::Error::custom),
        }
    }
}

/// Grid given as a list of times or as a `lo:hi:n` string.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GridValue(pub Vec<f64>);

impl<'de> Deserialize<'de> for GridValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<TimeValue>),
            Text(String),
        }
        let grid = match Raw::deserialize(d)? {
            Raw::List(v) => v.into_iter().map(|t| t.0).collect(),
            Raw::Text(s) => parse_grid(&s).map_err(serde::de::Error::custom)?,
        };
        crate::experiments::check_grid(&grid).map_err(serde::de::Error::custom)?;
        Ok(GridValue(grid))
    }
}

/// Which initial and target states a run uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSelector {
    #[default]
    Prepare,
    Retain,
    Custom { initial: BlochVector, target: BlochVector },
}

/// Everything a CLI run depends on. Loaded from JSON; command-line flags
/// override individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spec: SystemSpec,
    pub scenario: ScenarioSelector,
    pub cost: CostKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tf: Option<TimeValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridValue>,
    /// Structure labels; `None` means the default catalog.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<Vec<String>>,
    /// Sample count of gradient runs.
    pub samples: usize,
    pub tol_hc: f64,
    pub tol_phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ControlSchedule>,
    pub search: SearchOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: SystemSpec::dissipative(0.2, Channel::X, 0.1).expect("valid default spec"),
            scenario: ScenarioSelector::Prepare,
            cost: CostKind::Overlap,
            tf: None,
            grid: None,
            catalog: None,
            samples: 500,
            tol_hc: DEFAULT_TOL_HC,
            tol_phi: DEFAULT_TOL_PHI,
            out: None,
            seed: 0,
            schedule: None,
            search: SearchOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol_hc", self.tol_hc), ("tol_phi", self.tol_phi)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parse(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(TimeValue(t)) = self.tf {
            if !(t > 0.0) {
                return Err(Error::Parse(format!("tf must be > 0, got {t}")));
            }
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        self.catalog()?;
        self.scenario()?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let (initial, target) = match self.scenario {
            ScenarioSelector::Prepare => (preparation_initial(), preparation_target()),
            ScenarioSelector::Retain => (preparation_initial(), preparation_initial()),
            ScenarioSelector::Custom { initial, target } => (initial, target),
        };
        Scenario::new(initial, target, self.spec, self.cost)
    }

    pub fn catalog(&self) -> Result<Vec<crate::optimize::ProtocolStructure>> {
        match &self.catalog {
            None => Ok(crate::optimize::ProtocolStructure::default_catalog()),
            Some(labels) if labels.is_empty() => Err(Error::Parse("empty catalog".into())),
            Some(labels) => labels.iter().map(|l| l.parse()).collect(),
        }
    }

    /// Search options with the run's seed and tolerances.
    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            seed: self.seed,
            tol_hc: self.tol_hc,
            tol_phi: self.tol_phi,
            ..self.search.clone()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(canonical_json(self)?.as_bytes()))
    }
}

/// JSON with object keys sorted at every level, pretty-printed, with a
/// trailing newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Companion record of an emitted file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub file: String,
    pub file_sha256: String,
    pub config_hash: String,
    pub config: RunConfig,
}

/// Path of the manifest written next to `file`.
pub fn manifest_path(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}

/// Writes `contents` to `path` and its manifest next to it.
pub fn write_with_manifest(path: &Path, contents: &[u8], command: &str, config: &RunConfig) -> Result<()> {
    std::fs::write(path, contents)?;
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        file_sha256: sha256_hex(contents),
        config_hash: config.hash()?,
        config: config.clone(),
    };
    std::fs::write(manifest_path(path), canonical_json(&m)?)?;
    Ok(())
}

// shortest representation that round-trips, in exponent form when tiny or huge
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `t,u,rx,ry,rz` per node, plus `lx,ly,lz` when costates are given.
pub fn trajectory_csv(traj: &Trajectory, costates: Option<&CostateTrajectory>) -> Result<Vec<u8>> {
    if let Some(c) = costates {
        if c.costates.len() != traj.states.len() {
            return Err(Error::GridMismatch("costates and states differ in length".into()));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t", "u", "rx", "ry", "rz"];
    if costates.is_some() {
        header.extend(["lx", "ly", "lz"]);
    }
    w.write_record(&header)?;
    for (k, (t, r)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![num(*t), num(traj.controls[k]), num(r.x()), num(r.y()), num(r.z())];
        if let Some(c) = costates {
            let l = &c.costates[k];
            row.extend([num(l.x()), num(l.y()), num(l.z())]);
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// `tf,overlap,structure,hc_sign,switch_times,verified` with the durations
/// as a JSON array.
pub fn sweep_csv(records: &[SweepRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tf", "overlap", "structure", "hc_sign", "switch_times", "verified"])?;
    for r in records {
        w.write_record([
            num(r.t_f),
            num(r.overlap),
            r.structure.clone(),
            serde_json::to_value(r.hc_sign)?.as_str().unwrap_or_default().to_string(),
            serde_json::to_string(&r.switch_times)?,
            r.verified.to_string(),
        ])?;
    }
    finish(w)
}

/// `t,u` with `t` the start of each hold cell.
pub fn controls_csv(tf: f64, u: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "u"])?;
    let cell = tf / u.len().max(1) as f64;
    for (k, v) in u.iter().enumerate() {
        w.write_record([num(k as f64 * cell), num(*v)])?;
    }
    finish(w)
}

/// `theta,phi,rx,ry,rz,u_sing` along a curve; `u_sing` is left empty where
/// the feedback is undefined.
pub fn singular_arc_csv(points: &[SphereCoord], law: &SingularLaw) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta", "phi", "rx", "ry", "rz", "u_sing"])?;
    for p in points {
        let r = p.to_bloch();
        let u = law.evaluate(&r.0).map(|e| num(e.u_raw)).unwrap_or_default();
        w.write_record([num(p.theta), num(p.phi), num(r.x()), num(r.y()), num(r.z()), u])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes bytes to a file with its manifest, or to stdout without one.
pub fn emit(out: Option<&Path>, contents: &[u8], command: &str, config: &RunConfig) -> Result<()> {
    match out {
        Some(p) => write_with_manifest(p, contents, command, config),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(contents)?;
            so.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmp::HcSign;

    #[test]
    fn times() {
        assert_eq!(parse_time("1.5").unwrap(), 1.5);
        assert!((parse_time("0.42pi").unwrap() - 0.42 * PI).abs() < 1e-15);
        assert!((parse_time(" 2π ").unwrap() - 2.0 * PI).abs() < 1e-15);
        assert_eq!(parse_time("pi").unwrap(), PI);
        assert_eq!(parse_time("1e-3pi").unwrap(), 1e-3 * PI);
        for bad in ["", "pipi", "x", "1e", "nan", "inf", "0.4 p i"] {
            assert!(parse_time(bad).is_err(), "{bad}");
        }
        assert!((parse_time(&format_time(1.234)).unwrap() - 1.234).abs() < 1e-15);
    }

    #[test]
    fn grids() {
        let g = parse_grid("0.1pi:0.3pi:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 0.2 * PI).abs() < 1e-15);
        assert_eq!(parse_grid("1,2,3.5").unwrap(), vec![1.0, 2.0, 3.5]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        for bad in ["3,2", "1:2", "1:2:0", "2:1:3", "1,,2", "-1,1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bloch_parsing() {
        assert_eq!(parse_bloch("0.6, 0, -0.8").unwrap(), BlochVector::new(0.6, 0.0, -0.8));
        assert!(parse_bloch("1,1,0").is_err());
        assert!(parse_bloch("1,0").is_err());
    }

    #[test]
    fn config_round_trip_and_hash() {
        let text = r#"{"spec": {"xi": 0.8, "channel": "x", "gamma": 0.1},
                       "tf": "0.73pi", "grid": "0.1pi:pi:4", "catalog": ["XSY", "YSXY"],
                       "scenario": {"kind": "custom", "initial": [0,0,1], "target": [0,0,-1]}}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert!((c.tf.unwrap().0 - 0.73 * PI).abs() < 1e-15);
        assert_eq!(c.grid.as_ref().unwrap().0.len(), 4);
        assert_eq!(c.catalog().unwrap().len(), 2);
        assert_eq!(c.scenario().unwrap().target, BlochVector::new(0.0, 0.0, -1.0));
        let back = RunConfig::from_json(&canonical_json(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        let mut other = c.clone();
        other.seed = 1;
        assert_ne!(other.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn config_rejects_bad_input() {
        for bad in [
            r#"{"unknown": 1}"#,
            r#"{"tf": -1}"#,
            r#"{"tol_hc": 0}"#,
            r#"{"catalog": ["XQ"]}"#,
            r#"{"scenario": {"kind": "custom", "initial": [2,0,0], "target": [0,0,1]}}"#,
            r#"{"spec": {"xi": 0.2, "channel": "x", "gamma": -1}}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let s = canonical_json(&serde_json::json!({"b": 1, "a": {"d": 2, "c": 3}})).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.find("\"c\"").unwrap() < s.find("\"d\"").unwrap());
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn sweep_table() {
        let r = SweepRecord {
            t_f: 0.5,
            overlap: 0.25,
            cost: -0.25,
            structure: "XSY".into(),
            switch_times: vec![0.1, 0.3, 0.1],
            hc_sign: HcSign::NearZero,
            hc_mean: 0.0,
            hc_drift: 0.0,
            bang_violations: 0,
            singular_residual: 0.0,
            verified: true,
        };
        let text = String::from_utf8(sweep_csv(&[r]).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "tf,overlap,structure,hc_sign,switch_times,verified");
        assert_eq!(lines.next().unwrap(), "0.5,0.25,XSY,near_zero,\"[0.1,0.3,0.1]\",true");
    }

    #[test]
    fn controls_table() {
        let text = String::from_utf8(controls_csv(1.0, &[-1.0, 0.5]).unwrap()).unwrap();
        assert_eq!(text, "t,u\n0.0,-1.0\n0.5,0.5\n");
    }

    #[test]
    fn manifest_next_to_file() {
        let dir = std::env::temp_dir().join(format!("tocq-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("out.csv");
        let cfg = RunConfig::default();
        write_with_manifest(&p, b"t,u\n", "grad", &cfg).unwrap();
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(&p)).unwrap()).unwrap();
        assert_eq!(m.file, "out.csv");
        assert_eq!(m.config_hash, cfg.hash().unwrap());
        assert_eq!(m.file_sha256, sha256_hex(b"t,u\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
