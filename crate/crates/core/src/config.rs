//! Run configuration in a flat TOML document.
//!
//! Sections are `[grating]`, `[pulse]`, `[grid]`, `[measurement]` and
//! `[output]`. Every key is optional; a missing key takes its default.
//! Unknown sections and keys are rejected with the line they appear on.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{GratingParams, GridParams, MeasurementParams, PulseParams, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    /// Directory receiving CSV, JSON and plot scripts.
    pub dir: PathBuf,
    /// Field snapshots written by `simulate` (evenly spaced in time).
    pub snapshots: usize,
    pub plot_script: bool,
}

impl Default for OutputParams {
    fn default() -> Self {
        OutputParams {
            dir: PathBuf::from("fbgsq-out"),
            snapshots: 5,
            plot_script: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grating: GratingParams,
    pub pulse: PulseParams,
    pub grid: GridParams,
    pub measurement: MeasurementParams,
    pub output: OutputParams,
}

/// (section, key, unit or meaning) for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("grating", "kappa0", "coupling at the grating start, cm^-1"),
    ("grating", "delta", "detuning, cm^-1"),
    ("grating", "gamma", "Kerr coefficient, cm/GW"),
    ("grating", "length", "grating length, cm"),
    ("grating", "alpha", "apodization slope, cm^-2 (kappa = kappa0 + alpha z)"),
    ("pulse", "fwhm_ps", "input intensity FWHM, ps"),
    ("pulse", "peak_intensity", "input peak intensity, GW/cm^2"),
    ("pulse", "carrier_detune", "envelope carrier, cm^-1 (auto: delta)"),
    ("grid", "dz", "spatial step, cm"),
    ("grid", "v_g", "group velocity, cm/ps"),
    ("grid", "pad_left", "fiber before the grating, cm (auto: 24 sech widths)"),
    ("grid", "pad_right", "fiber after the grating, cm"),
    ("grid", "splitting", "lie | strang"),
    ("grid", "checkpoint_stride", "steps between checkpoints (auto: sqrt of step count)"),
    ("grid", "max_time_ps", "limit on simulated time, ps (auto from the window)"),
    ("grid", "total_time_ps", "fixed simulated time, ps (auto: stop on settled output)"),
    ("grid", "stop_tolerance", "relative growth of transmitted energy counted as settled"),
    ("grid", "stop_margin", "extra time after settling, fraction of elapsed time"),
    ("grid", "record_every", "steps between observable rows"),
    ("measurement", "kind", "photon_number | homodyne"),
    ("measurement", "lo_phase", "local oscillator phase, rad"),
    ("measurement", "gated", "detect only the leading transmitted pulse"),
    ("measurement", "gate_threshold", "gate edge as a fraction of the pulse peak"),
    ("measurement", "gate_prominence", "smallest peak, relative to the largest, that counts as a pulse"),
    ("output", "dir", "output directory"),
    ("output", "snapshots", "field snapshots written by simulate"),
    ("output", "plot_script", "emit a gnuplot script next to each table"),
];

const SECTIONS: &[&str] = &["grating", "pulse", "grid", "measurement", "output"];

impl RunConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            grating: self.grating,
            pulse: self.pulse,
            grid: self.grid,
            measurement: self.measurement,
        }
    }

    pub fn from_scenario(scenario: Scenario, output: OutputParams) -> Self {
        RunConfig {
            grating: scenario.grating,
            pulse: scenario.pulse,
            grid: scenario.grid,
            measurement: scenario.measurement,
            output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::invalid("dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(text, &e))?;
    check_keys(text, &table)?;
    let config: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Parses `text` after applying `section.key=value` overrides. Values are
/// TOML literals; anything that is not one is taken as a string.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    if overrides.is_empty() {
        return parse_config(text);
    }
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(text, &e))?;
    check_keys(text, &table)?;
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::invalid("set", format!("`{item}` is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::invalid("set", format!("`{path}` is not section.key")))?;
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::invalid("set", format!("`{section}` is not a section")))?
            .insert(key.to_string(), value);
    }
    let merged = toml::to_string(&table).expect("table serializes");
    parse_config(&merged).map_err(|e| match e {
        Error::Parse { message, .. } => Error::invalid("set", message),
        other => other,
    })
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
    Error::Parse {
        line,
        message: e.message().trim().to_string(),
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (or of the section header when `key`
/// is `None`). Returns 0 when not found.
fn locate(text: &str, section: &str, key: Option<&str>) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            if key.is_none() && current == section {
                return i + 1;
            }
            continue;
        }
        let Some(key) = key else {
            // Dotted or inline tables at the top level.
            if current.is_empty() && line.split(['=', '.']).next().map(str::trim) == Some(section) {
                return i + 1;
            }
            continue;
        };
        if current == section {
            let lhs = line.split('=').next().unwrap_or("").trim().trim_matches('"');
            if lhs == key {
                return i + 1;
            }
        }
    }
    0
}

fn suggestion(word: &str, candidates: impl Iterator<Item = &'static str>) -> String {
    candidates
        .map(|c| (strsim::jaro_winkler(word, c), c))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| format!("; did you mean `{c}`?"))
        .unwrap_or_default()
}

fn check_keys(text: &str, table: &toml::Table) -> Result<()> {
    for (section, value) in table {
        if !SECTIONS.contains(&section.as_str()) {
            return Err(Error::Parse {
                line: locate(text, section, None),
                message: format!(
                    "unknown section `{section}`{}",
                    suggestion(section, SECTIONS.iter().copied())
                ),
            });
        }
        let Some(inner) = value.as_table() else {
            return Err(Error::Parse {
                line: locate(text, section, None),
                message: format!("`{section}` must be a section"),
            });
        };
        for key in inner.keys() {
            let known = KEYS.iter().filter(|(s, _, _)| s == section).map(|(_, k, _)| *k);
            if !known.clone().any(|k| k == key) {
                return Err(Error::Parse {
                    line: locate(text, section, Some(key)),
                    message: format!("unknown key `{section}.{key}`{}", suggestion(key, known)),
                });
            }
        }
    }
    Ok(())
}

/// Every key with its default value, for help output.
pub fn defaults_help() -> String {
    let defaults: toml::Table = toml::from_str(&RunConfig::default().to_toml()).expect("default config parses");
    let mut out = String::new();
    let mut last = "";
    for (section, key, meaning) in KEYS {
        if *section != last {
            out.push_str(&format!("[{section}]\n"));
            last = section;
        }
        let value = defaults
            .get(*section)
            .and_then(|s| s.get(*key))
            .map(|v| v.to_string())
            .unwrap_or_else(|| "auto".to_string());
        out.push_str(&format!("  {key} = {value}    # {meaning}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grating.kappa0, 10.0);
        assert_eq!(c.grating.delta, 15.0);
        assert_eq!(c.grating.gamma, 0.018);
        assert_eq!(c.grating.length, 50.0);
        assert_eq!(c.pulse.fwhm_ps, 60.0);
        assert_eq!(c.pulse.peak_intensity, 4.5);
    }

    #[test]
    fn negative_kappa_names_the_key() {
        let err = parse_config("[grating]\nkappa0 = -1\n").unwrap_err();
        match err {
            Error::Validation { key, .. } => assert_eq!(key, "kappa0"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn misspelled_key_is_rejected_with_suggestion() {
        let err = parse_config("# comment\n[grating]\nlength = 30\nkapa0 = 10\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("kapa0"), "{message}");
                assert!(message.contains("did you mean `kappa0`"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = parse_config("[grid]\ndz = 0.01\n\n[pulses]\nfwhm_ps = 3\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("did you mean `pulse`"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn syntax_error_carries_line() {
        let err = parse_config("[grating]\nkappa0 = 10\ndelta = = 3\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn type_error_carries_line() {
        let err = parse_config("[pulse]\n\nfwhm_ps = \"wide\"\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn integers_are_accepted_for_reals() {
        let c = parse_config("[grating]\nlength = 70\nalpha = -0.04\n").unwrap();
        assert_eq!(c.grating.length, 70.0);
        assert_eq!(c.grating.alpha, -0.04);
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let doc = "[grating]\nkappa0 = 9\ndelta = 14\ngamma = 0.02\nlength = 20\nalpha = 0.01\n\
                   [pulse]\nfwhm_ps = 50\npeak_intensity = 4\ncarrier_detune = 14.5\n\
                   [grid]\ndz = 0.02\nv_g = 0.02\npad_left = 40\npad_right = 20\nsplitting = \"strang\"\n\
                   checkpoint_stride = 30\nmax_time_ps = 9000\ntotal_time_ps = 3000\nstop_tolerance = 0.01\n\
                   stop_margin = 0.2\nrecord_every = 10\n\
                   [measurement]\nkind = \"homodyne\"\nlo_phase = 0.3\ngated = false\ngate_threshold = 0.01\n\
                   gate_prominence = 0.1\n\
                   [output]\ndir = \"x\"\nsnapshots = 2\nplot_script = false\n";
        let c = parse_config(doc).unwrap();
        assert_eq!(c.grid.pad_left, Some(40.0));
        assert_eq!(c.pulse.carrier_detune, Some(14.5));
        assert_eq!(c.grid.checkpoint_stride, Some(30));
        let listed = doc.lines().filter(|l| l.contains('=')).count();
        assert_eq!(listed, KEYS.len());
    }

    #[test]
    fn overrides_replace_and_extend() {
        let c = parse_with_overrides(
            "[grating]\nlength = 30\n",
            &["grating.length=70".into(), "grid.splitting=strang".into(), "output.dir = runs/a".into()],
        )
        .unwrap();
        assert_eq!(c.grating.length, 70.0);
        assert_eq!(c.grid.splitting, crate::solver::Splitting::Strang);
        assert_eq!(c.output.dir, PathBuf::from("runs/a"));
        let err = parse_with_overrides("", &["grating.kapa0=3".into()]).unwrap_err();
        assert!(err.to_string().contains("did you mean `kappa0`"), "{err}");
        assert!(parse_with_overrides("", &["length=3".into()]).is_err());
    }

    #[test]
    fn help_lists_defaults() {
        let h = defaults_help();
        assert!(h.contains("kappa0 = 10.0"));
        assert!(h.contains("pad_left = auto"));
        assert!(h.contains("splitting = \"lie\""));
    }
}
