//! Config ingestion and output emission.
//!
//! Configs are strict JSON with optional `toy`, `innovation` and `simulation`
//! sections. The hash recorded in a run manifest is taken over the canonical
//! re-serialization of the parsed config, so an echoed config hashes the same
//! as the file it came from.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::innovation_model::InnoPathPoint;
use crate::params::{InnovationParams, RegimePath, ToyParams};
use crate::toy_model::{self, BubbleDecomposition, ToyError, ToyPathPoint};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read config {path}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}")]
    ParseConfig {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("config has no `{0}` section")]
    MissingSection(&'static str),
    #[error("writing {path}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_horizon() -> usize {
    100
}
fn default_replications() -> u64 {
    1000
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_event_window() -> usize {
    10
}
fn default_split() -> f64 {
    1.0
}

/// Run controls shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    /// Follow the all-unbalanced path instead of drawing a collapse date.
    #[serde(default)]
    pub deterministic: bool,
    /// Tail-bound tolerance for fundamental values.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_event_window")]
    pub event_window: usize,
    /// Share of the aggregate bubble carried by land when a second asset exists.
    #[serde(default = "default_split")]
    pub bubble_split: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            horizon: default_horizon(),
            seed: 0,
            replications: default_replications(),
            deterministic: false,
            tolerance: default_tolerance(),
            event_window: default_event_window(),
            bubble_split: default_split(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation: Option<InnovationParams>,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

impl RunConfig {
    pub fn toy(&self) -> Result<&ToyParams, IoError> {
        self.toy.as_ref().ok_or(IoError::MissingSection("toy"))
    }

    pub fn innovation(&self) -> Result<&InnovationParams, IoError> {
        self.innovation.as_ref().ok_or(IoError::MissingSection("innovation"))
    }

    /// Canonical JSON: every default filled in, fixed key order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::ParseConfig {
        path: origin.to_path_buf(),
        source,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

/// Decimal with 12 significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV row of the land economy.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyRow {
    pub point: ToyPathPoint,
    /// Absent for the two-asset economy, where the land fundamental is not split out.
    pub decomposition: Option<BubbleDecomposition>,
}

/// Path plus per-date decomposition. The second asset, when configured, switches
/// to the aggregated two-asset solution.
pub fn toy_rows(params: &ToyParams, path: &RegimePath, sim: &SimulationConfig) -> Result<Vec<ToyRow>, ToyError> {
    if params.second_asset.is_some() {
        let points = toy_model::multi_asset_path(params, path, sim.bubble_split)?;
        return Ok(points
            .into_iter()
            .map(|point| ToyRow {
                point,
                decomposition: None,
            })
            .collect());
    }
    toy_model::toy_path(params, path)
        .into_iter()
        .map(|point| {
            let d = toy_model::decompose_within(params, point.t, point.regime, sim.tolerance, 10_000_000)?;
            Ok(ToyRow {
                point,
                decomposition: Some(d),
            })
        })
        .collect()
}

pub fn write_toy_csv<W: Write>(out: W, rows: &[ToyRow]) -> Result<(), IoError> {
    let two_asset = rows.iter().any(|r| r.point.second_asset_r.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t", "regime", "e", "D", "P", "R", "C", "price_rent", "V", "B", "tail_bound"];
    if two_asset {
        header.extend(["Q", "r"]);
    }
    w.write_record(&header)?;
    for row in rows {
        let p = &row.point;
        let mut rec = vec![
            p.t.to_string(),
            p.regime.label().to_string(),
            format_sig(p.e),
            format_sig(p.d),
            format_sig(p.p),
            format_sig(p.r),
            format_sig(p.c),
            format_sig(p.price_rent),
        ];
        match &row.decomposition {
            Some(d) => rec.extend([format_sig(d.fundamental), format_sig(d.bubble), format_sig(d.tail_bound)]),
            None => rec.extend([String::new(), String::new(), String::new()]),
        }
        if two_asset {
            rec.push(p.second_asset_q.map(format_sig).unwrap_or_default());
            rec.push(p.second_asset_r.map(format_sig).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn write_innovation_csv<W: Write>(out: W, rows: &[InnoPathPoint]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "regime",
        "n",
        "tau",
        "G_n",
        "Y",
        "w_H",
        "w_L",
        "D",
        "P",
        "p",
        "d",
        "R",
        "GDP",
        "price_div_ratio",
    ])?;
    for p in rows {
        let mut rec = vec![p.t.to_string(), p.regime.label().to_string()];
        rec.extend(
            [
                p.n,
                p.tau,
                p.g_n,
                p.y,
                p.w_h,
                p.w_l,
                p.dividend,
                p.price,
                p.p,
                p.d,
                p.r,
                p.gdp,
                p.price_div_ratio,
            ]
            .map(format_sig),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn csv_string<F>(write: F) -> Result<String, IoError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), IoError>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Pretty JSON with shortest round-trip numbers.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Regime path for a run: all-unbalanced in deterministic mode, else drawn from the seed.
pub fn run_path(pi: f64, sim: &SimulationConfig) -> RegimePath {
    if sim.deterministic {
        RegimePath::all_unbalanced(sim.horizon)
    } else {
        crate::params::draw_regime_path(pi, sim.horizon, sim.seed)
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; the only time-dependent field of a run.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, outputs: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash: config.hash(),
            seed: config.simulation.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Writes data files, the config echo and the manifest into `dir`.
/// Returns the paths written.
pub fn write_run(dir: &Path, command: &str, config: &RunConfig, files: &[(String, String)]) -> Result<Vec<PathBuf>, IoError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IoError::Write { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        names.push(name.clone());
        written.push(path);
    }
    let echo = dir.join("config.json");
    fs::write(&echo, to_json(config)?).map_err(io_err(&echo))?;
    written.push(echo);
    names.push("config.json".into());
    let manifest = RunManifest::new(command, config, names);
    let path = dir.join("manifest.json");
    fs::write(&path, to_json(&manifest)?).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(1.325), "1.325");
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(123_456_789.123_456), "123456789.123");
        assert_eq!(format_sig(2f64.powi(200)), "1.60693804426e60");
        assert_eq!(format_sig(-1.5e-9), "-1.5e-9");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn strict_parsing_rejects_unknown_keys() {
        let err = parse_config(r#"{"toy": {"pi": 0.5, "bogus": 1}}"#, Path::new("x.json")).unwrap_err();
        assert!(err.to_string().contains("x.json"));
        assert!(parse_config(r#"{"other": {}}"#, Path::new("y")).is_err());
    }

    #[test]
    fn echo_round_trip_preserves_hash() {
        let cfg = RunConfig {
            toy: Some(ToyParams::default()),
            innovation: Some(InnovationParams::default()),
            simulation: SimulationConfig {
                seed: 7,
                ..SimulationConfig::default()
            },
        };
        let echo = to_json(&cfg).unwrap();
        let back = parse_config(&echo, Path::new("echo")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = parse_config(r#"{"simulation": {"seed": 3}}"#, Path::new("z")).unwrap();
        assert_eq!(cfg.simulation.horizon, 100);
        assert!(matches!(cfg.toy(), Err(IoError::MissingSection("toy"))));
    }

    #[test]
    fn toy_csv_layout() {
        let p = ToyParams::default();
        let sim = SimulationConfig {
            horizon: 3,
            deterministic: true,
            ..SimulationConfig::default()
        };
        let rows = toy_rows(&p, &run_path(p.pi, &sim), &sim).unwrap();
        let text = csv_string(|b| write_toy_csv(b, &rows)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,regime,e,D,P,R,C,price_rent,V,B,tail_bound");
        assert_eq!(lines.count(), 4);
    }
}
