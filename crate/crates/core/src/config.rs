//! Experiment configuration files.
//!
//! The format is flat `key = value` text. `#` starts a comment. Keys before the
//! first `[run NAME]` header are defaults; every `[run NAME]` section starts
//! from those defaults, overrides what it lists and becomes one experiment. A
//! file without sections describes a single experiment.
//!
//! ```text
//! schema_version = 1
//! order = 64
//! plan = address:3,2          # single | address:P,.. | qos:B,.. | lookup:FILE
//! schedule = round-robin      # round-robin | weighted:W,..
//! snr_mode = databit          # symbol | databit
//! snr_start_db = 0
//! snr_stop_db = 20
//! snr_step_db = 2
//! noiseless = false
//! min_symbols = 200000
//! min_errors = 200
//! max_symbols = 10000000
//! seed = 1
//! workers = 0
//! modulator_groups = 1
//! fft_size = 256
//! subcarriers = 12
//! symbols_per_slot = 14
//! subcarrier_offset = 16
//! cp_length = 32
//! ```
//!
//! `lookup:` paths are resolved against the directory of the config file.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, PlanSpec, ScheduleSpec};
use crate::mapping::parse_lookup_table;

pub const SCHEMA_VERSION: u32 = 1;

const KEYS: &[&str] = &[
    "schema_version",
    "name",
    "order",
    "plan",
    "schedule",
    "snr_mode",
    "snr_start_db",
    "snr_stop_db",
    "snr_step_db",
    "noiseless",
    "min_symbols",
    "min_errors",
    "max_symbols",
    "seed",
    "workers",
    "modulator_groups",
    "fft_size",
    "subcarriers",
    "symbols_per_slot",
    "subcarrier_offset",
    "cp_length",
];

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| {
        parse_err(
            e.line,
            format!("invalid value `{}` for `{}`", e.value, e.key),
        )
    })
}

fn parse_list_str(s: &str, line: usize, key: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|p| {
            p.trim().parse().map_err(|_| {
                parse_err(line, format!("invalid list item `{}` in `{key}`", p.trim()))
            })
        })
        .collect()
}

/// Parses a plan description such as `address:3,2` or `lookup:table1.map`.
pub fn parse_plan_spec(s: &str, base_dir: &Path) -> std::result::Result<PlanSpec, String> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (s.trim(), None),
    };
    let list = |a: Option<&str>| -> std::result::Result<Vec<u32>, String> {
        let a = a.ok_or_else(|| format!("`{kind}` needs a comma-separated list"))?;
        parse_list_str(a, 0, "plan").map_err(|_| format!("invalid list `{a}`"))
    };
    match kind {
        "single" if arg.is_none() => Ok(PlanSpec::Single),
        "address" => Ok(PlanSpec::AddressBit {
            positions: list(arg)?,
        }),
        "qos" => Ok(PlanSpec::Qos { bits: list(arg)? }),
        "lookup" => {
            let file = arg
                .filter(|a| !a.is_empty())
                .ok_or("`lookup` needs a file name")?;
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let rows = parse_lookup_table(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            Ok(PlanSpec::Lookup {
                source: file.to_string(),
                rows,
            })
        }
        other => Err(format!(
            "unknown plan `{other}` (expected single, address:.., qos:.. or lookup:..)"
        )),
    }
}

fn parse_schedule(e: &Entry) -> Result<ScheduleSpec> {
    match e.value.split_once(':') {
        None if e.value == "round-robin" => Ok(ScheduleSpec::RoundRobin),
        Some(("weighted", w)) => Ok(ScheduleSpec::Weighted(parse_list_str(w, e.line, &e.key)?)),
        _ => Err(parse_err(
            e.line,
            format!(
                "invalid schedule `{}` (expected round-robin or weighted:W,..)",
                e.value
            ),
        )),
    }
}

fn apply(config: &mut ExperimentConfig, e: &Entry, base_dir: &Path) -> Result<()> {
    match e.key.as_str() {
        "schema_version" => {}
        "name" => config.name = e.value.clone(),
        "order" => config.order = parse_value(e)?,
        "plan" => {
            config.plan = parse_plan_spec(&e.value, base_dir).map_err(|m| parse_err(e.line, m))?
        }
        "schedule" => config.schedule = parse_schedule(e)?,
        "snr_mode" => {
            config.sweep.mode = e
                .value
                .parse()
                .map_err(|err: Error| parse_err(e.line, err.to_string()))?
        }
        "snr_start_db" => config.sweep.start_db = parse_value(e)?,
        "snr_stop_db" => config.sweep.stop_db = parse_value(e)?,
        "snr_step_db" => config.sweep.step_db = parse_value(e)?,
        "noiseless" => config.noiseless = parse_value(e)?,
        "min_symbols" => config.stop.min_symbols = parse_value(e)?,
        "min_errors" => config.stop.min_errors = parse_value(e)?,
        "max_symbols" => config.stop.max_symbols = parse_value(e)?,
        "seed" => config.seed = parse_value(e)?,
        "workers" => config.workers = parse_value(e)?,
        "modulator_groups" => config.modulator_groups = parse_value(e)?,
        "fft_size" => config.geometry.fft_size = parse_value(e)?,
        "subcarriers" => config.geometry.subcarriers = parse_value(e)?,
        "symbols_per_slot" => config.geometry.symbols_per_slot = parse_value(e)?,
        "subcarrier_offset" => config.geometry.subcarrier_offset = parse_value(e)?,
        "cp_length" => config.geometry.cp_length = parse_value(e)?,
        _ => unreachable!("keys are checked while reading"),
    }
    Ok(())
}

fn read_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section {
        name: None,
        line: 1,
        entries: Vec::new(),
    }];
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let inner = header
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?;
            let name = inner
                .strip_prefix("run")
                .map(str::trim)
                .filter(|n| !n.is_empty() && inner.starts_with("run "))
                .ok_or_else(|| parse_err(line, "section headers look like `[run NAME]`"))?;
            if sections.iter().any(|s| s.name.as_deref() == Some(name)) {
                return Err(parse_err(line, format!("run `{name}` defined twice")));
            }
            sections.push(Section {
                name: Some(name.to_string()),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(parse_err(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(parse_err(line, format!("`{key}` has no value")));
        }
        let section = sections.last_mut().expect("top-level section exists");
        if section.entries.iter().any(|e| e.key == key) {
            return Err(parse_err(line, format!("duplicate key `{key}`")));
        }
        if key == "schema_version" && section.name.is_some() {
            return Err(parse_err(
                line,
                "`schema_version` belongs at the top of the file",
            ));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(sections)
}

/// Parses a configuration file's text into one or more validated experiments.
///
/// Every error carries the line it was found on; checks spanning several keys
/// point at the section header (line 1 for files without sections).
pub fn parse_config(text: &str, base_dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let sections = read_sections(text)?;
    let top = &sections[0];
    let version = top
        .entries
        .iter()
        .find(|e| e.key == "schema_version")
        .ok_or_else(|| parse_err(1, "missing `schema_version`"))?;
    let v: u32 = parse_value(version)?;
    if v != SCHEMA_VERSION {
        return Err(parse_err(
            version.line,
            format!("unsupported schema_version {v} (this build reads {SCHEMA_VERSION})"),
        ));
    }

    let mut defaults = ExperimentConfig::default();
    for e in &top.entries {
        apply(&mut defaults, e, base_dir)?;
    }

    let runs: Vec<&Section> = if sections.len() == 1 {
        vec![top]
    } else {
        sections[1..].iter().collect()
    };
    runs.into_iter()
        .map(|section| {
            let mut config = defaults.clone();
            if let Some(name) = &section.name {
                config.name = name.clone();
            }
            for e in &section.entries {
                apply(&mut config, e, base_dir)?;
            }
            config
                .prepare()
                .map_err(|err| parse_err(section.line, err.to_string()))?;
            Ok(config)
        })
        .collect()
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}
