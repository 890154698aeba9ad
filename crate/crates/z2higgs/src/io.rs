//! Configuration loading with a strict TOML schema, deterministic
//! provenance stamping, and the stable on-disk formats (JSON-lines and
//! CSV) shared by all modules.
//!
//! Bitstring convention, stated in every file header: integers encode
//! measured bitstrings little-endian, bit q of the integer is qubit q,
//! bit value 0 means Z = +1.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::correction::{compute_syndrome, decode};
use crate::experiments::{
    config_hash, CalibrationMode, ExperimentConfig, Observable, ShotAccounting, TimeSeries,
    Toggles,
};
use crate::lattice::{Lattice, LatticeKind};
use crate::mitigation::{DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use crate::sim::{NoiseModel, ShotTable};
use crate::{Error, Result};

/// Default shot count when the config omits it.
pub const DEFAULT_SHOTS: usize = 10_000;

/// Statement embedded in every emitted file header.
pub const BIT_CONVENTION: &str =
    "little-endian: bit q of the integer is qubit q; 0 means Z=+1";

/// TOML schema. Physics parameters (m, g, lambda, dt) and the time grid
/// have no defaults; statistics knobs do. Unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lattice: LatticeKind,
    m: f64,
    g: f64,
    lambda: f64,
    dt: f64,
    times: Vec<f64>,
    #[serde(default)]
    initial_strings: Vec<Vec<usize>>,
    observables: Vec<Observable>,
    #[serde(default = "NoiseModel::noiseless")]
    noise: NoiseModel,
    #[serde(default = "default_shots")]
    shots: usize,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    toggles: Toggles,
    #[serde(default = "default_calibration")]
    calibration: CalibrationMode,
    #[serde(default = "default_randomizations")]
    randomizations: usize,
    /// Defaults to shots / 10 (the paper's retention threshold ratio).
    min_keep: Option<usize>,
    #[serde(default = "default_resamples")]
    resamples: usize,
    #[serde(default = "default_level")]
    level: f64,
}

fn default_shots() -> usize {
    DEFAULT_SHOTS
}

fn default_calibration() -> CalibrationMode {
    CalibrationMode::Mirror
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

fn default_randomizations() -> usize {
    1
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

/// Parse and validate a TOML experiment config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let config = ExperimentConfig {
        lattice: raw.lattice,
        m: raw.m,
        g: raw.g,
        lambda: raw.lambda,
        dt: raw.dt,
        times: raw.times,
        initial_strings: raw.initial_strings,
        observables: raw.observables,
        noise: raw.noise,
        shots: raw.shots,
        master_seed: raw.master_seed,
        toggles: raw.toggles,
        calibration: raw.calibration,
        randomizations: raw.randomizations,
        min_keep: raw.min_keep.unwrap_or(raw.shots / 10),
        resamples: raw.resamples,
        level: raw.level,
    };
    config.validate()?;
    Ok(config)
}

/// Load and validate a TOML experiment config from disk.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Fixed-width float encoding for CSV: 17 significant digits, enough to
/// round-trip any f64 exactly.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize with sorted object keys (serde_json's default map is
/// ordered), one value per line.
fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

/// Run provenance: hashes, seeds, wall-clock, and per-stage shot
/// accounting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub master_seed: u64,
    /// Unix timestamp (seconds) when the manifest was stamped.
    pub created_unix: u64,
    pub bit_convention: String,
    pub accounting: Vec<ShotAccounting>,
}

impl RunManifest {
    pub fn from_series(config: &ExperimentConfig, series: &TimeSeries) -> Result<RunManifest> {
        for acc in &series.accounting {
            if !(acc.used <= acc.post_selected && acc.post_selected <= acc.generated) {
                return Err(Error::Config(format!(
                    "inconsistent shot accounting: used {} / post-selected {} / generated {}",
                    acc.used, acc.post_selected, acc.generated
                )));
            }
        }
        Ok(RunManifest {
            config_hash: config_hash(config),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            bit_convention: BIT_CONVENTION.to_string(),
            accounting: series.accounting.clone(),
        })
    }
}

/// Write a time series as JSON lines: a header object carrying the
/// provenance, then one object per time point. Byte-stable for fixed
/// inputs.
pub fn emit_time_series_jsonl(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    let header = serde_json::json!({
        "format": "time_series",
        "config_hash": series.config_hash,
        "version": series.version,
        "bit_convention": BIT_CONVENTION,
        "observables": series.observables,
    });
    writeln!(out, "{}", to_sorted_json(&header)?)?;
    for (i, &time) in series.times.iter().enumerate() {
        let row = serde_json::json!({
            "time": time,
            "estimates": series.estimates[i],
            "accounting": series.accounting[i],
        });
        writeln!(out, "{}", to_sorted_json(&row)?)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read back a JSON-lines time series.
pub fn load_time_series_jsonl(path: impl AsRef<Path>) -> Result<TimeSeries> {
    #[derive(Deserialize)]
    struct Header {
        config_hash: String,
        version: String,
        observables: Vec<String>,
    }
    #[derive(Deserialize)]
    struct Row {
        time: f64,
        estimates: Vec<crate::mitigation::Estimate>,
        accounting: ShotAccounting,
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Header = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::Config("empty time series file".into()))?,
    )?;
    let mut series = TimeSeries {
        times: Vec::new(),
        observables: header.observables,
        estimates: Vec::new(),
        accounting: Vec::new(),
        config_hash: header.config_hash,
        version: header.version,
    };
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(line)?;
        series.times.push(row.time);
        series.estimates.push(row.estimates);
        series.accounting.push(row.accounting);
    }
    Ok(series)
}

/// Write a time series as a CSV matrix (rows = times, three columns per
/// observable) for plotting. Provenance rides in `#`-prefixed comment
/// lines; floats carry 17 significant digits.
pub fn emit_time_series_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# config_hash={}", series.config_hash)?;
    writeln!(out, "# version={}", series.version)?;
    writeln!(out, "# bit_convention={BIT_CONVENTION}")?;
    let mut header = vec!["time".to_string()];
    for obs in &series.observables {
        header.push(format!("{obs}:mean"));
        header.push(format!("{obs}:ci_low"));
        header.push(format!("{obs}:ci_high"));
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, &time) in series.times.iter().enumerate() {
        let mut row = vec![fmt_float(time)];
        for est in &series.estimates[i] {
            row.push(fmt_float(est.mean));
            row.push(fmt_float(est.ci_low));
            row.push(fmt_float(est.ci_high));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read back the numeric matrix of a CSV time series (comments and
/// header skipped): rows of (time, flattened estimate columns).
pub fn load_time_series_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|line| {
            line.split(',')
                .map(|cell| {
                    cell.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad CSV float {cell:?}: {e}")))
                })
                .collect()
        })
        .collect()
}

/// Write a shot table as JSON lines with a provenance header.
pub fn emit_shot_table(
    table: &ShotTable,
    config_hash: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = Vec::new();
    let header = serde_json::json!({
        "format": "shot_table",
        "config_hash": config_hash,
        "bit_convention": BIT_CONVENTION,
        "n_qubits": table.n_qubits,
        "master_seed": table.master_seed,
        "shots": table.len(),
    });
    writeln!(out, "{}", to_sorted_json(&header)?)?;
    for shot in &table.shots {
        writeln!(out, "{}", to_sorted_json(shot)?)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read back a JSON-lines shot table, returning the stored config hash
/// alongside it.
pub fn load_shot_table(path: impl AsRef<Path>) -> Result<(ShotTable, String)> {
    #[derive(Deserialize)]
    struct Header {
        config_hash: String,
        n_qubits: usize,
        master_seed: u64,
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Header = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::Config("empty shot table file".into()))?,
    )?;
    let mut table = ShotTable {
        n_qubits: header.n_qubits,
        master_seed: header.master_seed,
        shots: Vec::new(),
    };
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        table.shots.push(serde_json::from_str(line)?);
    }
    Ok((table, header.config_hash))
}

/// Per-shot decoder outcome plus the aggregate flip-count histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecoderReport {
    pub config_hash: String,
    /// histogram[k] = number of shots with k decoded flips.
    pub histogram: Vec<usize>,
    pub mean_flips: f64,
    pub shots: Vec<DecodedShot>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodedShot {
    pub shot_index: u64,
    pub defects: Vec<usize>,
    pub flips: Vec<usize>,
    pub weight: usize,
}

/// Decode every shot and build the report structure.
pub fn decoder_report(
    table: &ShotTable,
    lattice: &Lattice,
    config_hash: &str,
) -> Result<DecoderReport> {
    let mut shots = Vec::with_capacity(table.len());
    let mut histogram: Vec<usize> = Vec::new();
    let mut total = 0usize;
    for shot in &table.shots {
        let syndrome = compute_syndrome(shot.bits, lattice)?;
        let correction = decode(&syndrome, lattice);
        let weight = correction.weight();
        let mut flips: Vec<usize> = correction
            .matter_flips
            .iter()
            .map(|&n| lattice.matter_qubit(n))
            .collect();
        flips.extend(correction.gauge_flips.iter().map(|&e| lattice.gauge_qubit(e)));
        flips.sort_unstable();
        if histogram.len() <= weight {
            histogram.resize(weight + 1, 0);
        }
        histogram[weight] += 1;
        total += weight;
        shots.push(DecodedShot {
            shot_index: shot.shot_index,
            defects: syndrome.defects.iter().copied().collect(),
            flips,
            weight,
        });
    }
    Ok(DecoderReport {
        config_hash: config_hash.to_string(),
        histogram,
        mean_flips: total as f64 / table.len().max(1) as f64,
        shots,
    })
}

/// Write a decoder report as JSON lines (header with the histogram,
/// then one line per shot).
pub fn emit_decoder_report(report: &DecoderReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    let header = serde_json::json!({
        "format": "decoder_report",
        "config_hash": report.config_hash,
        "bit_convention": BIT_CONVENTION,
        "histogram": report.histogram,
        "mean_flips": report.mean_flips,
    });
    writeln!(out, "{}", to_sorted_json(&header)?)?;
    for shot in &report.shots {
        writeln!(out, "{}", to_sorted_json(shot)?)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a run manifest as a single sorted-key JSON object.
pub fn emit_manifest(manifest: &RunManifest, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_sorted_json(manifest)? + "\n")?;
    Ok(())
}

/// Combine labeled sweep outputs, refusing any series whose embedded
/// config hash disagrees with its manifest (a mismatched comparison).
pub fn aggregate_sweep(
    runs: &[(String, TimeSeries, RunManifest)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = Vec::new();
    for (label, series, manifest) in runs {
        if series.config_hash != manifest.config_hash {
            return Err(Error::Config(format!(
                "sweep point {label:?}: series hash {} does not match manifest hash {}",
                series.config_hash, manifest.config_hash
            )));
        }
        let row = serde_json::json!({
            "label": label,
            "series": series,
            "manifest": manifest,
        });
        writeln!(out, "{}", to_sorted_json(&row)?)?;
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run_quench;
    use crate::sim::{run_trajectories, NoiseModel};

    const MINIMAL: &str = r#"
        m = 0.0
        g = 0.0
        lambda = 1.0
        dt = 0.25
        times = [0.5, 1.0]

        [lattice]
        kind = "flake"
        radius = 0

        [[observables]]
        kind = "occupation"
        node = 0
    "#;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.shots, 10_000);
        assert_eq!(config.resamples, 1000);
        assert_eq!(config.level, 0.70);
        assert_eq!(config.min_keep, 1000);
        assert_eq!(config.calibration, CalibrationMode::Mirror);
        assert_eq!(config.toggles, Toggles::default());
        assert_eq!(config.noise.p1, 0.0);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let misspelled = MINIMAL.replace("[lattice]", "latice = 1\n[lattice]");
        let err = parse_config(&misspelled).unwrap_err();
        assert!(err.to_string().contains("latice"), "{err}");
        let zero_shots = format!("{MINIMAL}\nshots = 0\n");
        assert!(parse_config(&zero_shots).is_err());
        // Physics parameters have no silent defaults.
        let missing_dt = MINIMAL.replace("dt = 0.25", "");
        assert!(parse_config(&missing_dt).is_err());
        // Parse errors carry location info from the TOML parser.
        let broken = MINIMAL.replace("dt = 0.25", "dt = ");
        let msg = parse_config(&broken).unwrap_err().to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    fn small_series() -> (ExperimentConfig, TimeSeries) {
        let mut config = parse_config(MINIMAL).unwrap();
        config.shots = 120;
        config.min_keep = 12;
        config.resamples = 120;
        let series = run_quench(&config).unwrap();
        (config, series)
    }

    #[test]
    fn jsonl_round_trip_and_byte_stability() {
        let dir = tempfile::tempdir().unwrap();
        let (_, series) = small_series();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        emit_time_series_jsonl(&series, &p1).unwrap();
        emit_time_series_jsonl(&series, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        let loaded = load_time_series_jsonl(&p1).unwrap();
        assert_eq!(
            serde_json::to_value(&loaded).unwrap(),
            serde_json::to_value(&series).unwrap()
        );
    }

    #[test]
    fn csv_matches_jsonl_values() {
        let dir = tempfile::tempdir().unwrap();
        let (_, series) = small_series();
        let path = dir.path().join("series.csv");
        emit_time_series_csv(&series, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("# config_hash={}", series.config_hash)));
        let matrix = load_time_series_csv(&path).unwrap();
        assert_eq!(matrix.len(), series.times.len());
        for (i, row) in matrix.iter().enumerate() {
            assert_eq!(row[0], series.times[i]);
            for (j, est) in series.estimates[i].iter().enumerate() {
                assert_eq!(row[1 + 3 * j], est.mean);
                assert_eq!(row[2 + 3 * j], est.ci_low);
                assert_eq!(row[3 + 3 * j], est.ci_high);
            }
        }
    }

    #[test]
    fn shot_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::flake(0);
        let params = crate::analytics::QuenchParams {
            m: 0.0,
            g: 0.0,
            lambda: 1.0,
            t: 0.5,
            dt: 0.25,
        };
        let circuit = crate::compiler::trotter_circuit(
            &lat,
            &params,
            &crate::compiler::CompileOptions::default(),
        )
        .unwrap();
        let initial = crate::model::BasisConfig::zeros(lat.num_qubits());
        let table = run_trajectories(
            &circuit,
            &initial,
            &NoiseModel::depolarizing(0.0, 0.01, 0.01),
            50,
            3,
        )
        .unwrap();
        let path = dir.path().join("shots.jsonl");
        emit_shot_table(&table, "deadbeef", &path).unwrap();
        let (loaded, hash) = load_shot_table(&path).unwrap();
        assert_eq!(hash, "deadbeef");
        assert_eq!(loaded.n_qubits, table.n_qubits);
        assert_eq!(loaded.master_seed, table.master_seed);
        assert_eq!(
            serde_json::to_value(&loaded.shots).unwrap(),
            serde_json::to_value(&table.shots).unwrap()
        );

        // Decoder report over the same table.
        let report = decoder_report(&table, &lat, "deadbeef").unwrap();
        assert_eq!(report.shots.len(), table.len());
        assert_eq!(report.histogram.iter().sum::<usize>(), table.len());
        let rpath = dir.path().join("report.jsonl");
        emit_decoder_report(&report, &rpath).unwrap();
        assert!(fs::read_to_string(&rpath).unwrap().contains("histogram"));
    }

    #[test]
    fn manifest_accounting_and_sweep_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let (config, series) = small_series();
        let manifest = RunManifest::from_series(&config, &series).unwrap();
        assert_eq!(manifest.config_hash, series.config_hash);
        emit_manifest(&manifest, dir.path().join("manifest.json")).unwrap();

        // Consistent hashes aggregate fine.
        let runs = vec![("base".to_string(), series.clone(), manifest.clone())];
        aggregate_sweep(&runs, dir.path().join("sweep.jsonl")).unwrap();

        // A tampered series is refused.
        let mut tampered = series.clone();
        tampered.config_hash = "0".repeat(64);
        let bad = vec![("base".to_string(), tampered, manifest.clone())];
        assert!(aggregate_sweep(&bad, dir.path().join("bad.jsonl")).is_err());

        // Broken accounting is refused at manifest construction.
        let mut broken = series;
        broken.accounting[0].used = broken.accounting[0].generated + 1;
        assert!(RunManifest::from_series(&config, &broken).is_err());
    }
}
