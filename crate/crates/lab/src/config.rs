//! Scenario files: a flat TOML table over the default scenario, plus
//! `key=value` overrides from the command line.
//!
//! Keys: `n`, `m`, `S`, `v`, `q`, `u`, `L`, `E`, `radii`, `R1`, `M`, `seed`.
//! Long names (`nodes`, `stations`, `area`, `speed`, `transmit_prob`,
//! `station_capacity`, `battery`, `max_units`, `charging_range`,
//! `resolution`) are accepted as aliases. Without `radii`, the bands are
//! `R1·(E−k+1)/E` for `k = 1..E`.

use std::path::Path;

use toml::{Table, Value};
use wcs_core::model::{default_radii, DEFAULT_CHARGING_RANGE};
use wcs_core::NetworkConfig;

use crate::error::LabError;

const KEYS: &[(&str, &str)] = &[
    ("n", "nodes"),
    ("m", "stations"),
    ("S", "area"),
    ("v", "speed"),
    ("q", "transmit_prob"),
    ("u", "station_capacity"),
    ("L", "battery"),
    ("E", "max_units"),
    ("radii", "radii"),
    ("R1", "charging_range"),
    ("M", "resolution"),
    ("seed", "seed"),
];

/// Short key for `name`, which may be either form.
pub fn canonical_key(name: &str) -> Option<&'static str> {
    KEYS.iter()
        .find(|(short, long)| *short == name || *long == name)
        .map(|(short, _)| *short)
}

fn invalid(field: &str, reason: impl Into<String>) -> LabError {
    LabError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn as_count(field: &str, v: &Value) -> Result<usize, LabError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Integer(_) => Err(invalid(field, "must be non-negative")),
        _ => Err(invalid(field, format!("expected an integer, got {}", v.type_str()))),
    }
}

fn as_real(field: &str, v: &Value) -> Result<f64, LabError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(field, format!("expected a number, got {}", v.type_str()))),
    }
}

/// Parses one `key=value` override. The value uses TOML syntax.
pub fn parse_override(text: &str) -> Result<(String, Value), LabError> {
    let Some((key, value)) = text.split_once('=') else {
        return Err(invalid(text, "override must look like key=value"));
    };
    let key = key.trim();
    let doc = format!("x = {}", value.trim());
    let mut table: Table = doc
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse value `{}`", value.trim())))?;
    Ok((key.to_string(), table.remove("x").expect("parsed key")))
}

/// Default scenario with the entries of `table` applied, then validated.
pub fn from_table(table: &Table) -> Result<NetworkConfig, LabError> {
    let mut cfg = NetworkConfig::default_scenario();
    let mut charging_range = None;
    let mut radii = None;
    let mut max_units = None;
    let mut seen = Vec::new();
    for (name, value) in table {
        let key = canonical_key(name).ok_or_else(|| invalid(name, "unknown key"))?;
        if seen.contains(&key) {
            return Err(invalid(name, "given twice under different names"));
        }
        seen.push(key);
        match key {
            "n" => cfg.nodes = as_count(key, value)?,
            "m" => cfg.stations = as_count(key, value)?,
            "S" => cfg.area = as_real(key, value)?,
            "v" => cfg.speed = as_real(key, value)?,
            "q" => cfg.transmit_prob = as_real(key, value)?,
            "u" => cfg.station_capacity = as_count(key, value)?,
            "L" => cfg.battery = as_count(key, value)?,
            "E" => max_units = Some(as_count(key, value)?),
            "R1" => charging_range = Some(as_real(key, value)?),
            "M" => cfg.resolution = Some(as_count(key, value)?),
            "seed" => cfg.seed = as_count(key, value)? as u64,
            "radii" => {
                let Value::Array(items) = value else {
                    return Err(invalid(key, "expected an array of numbers"));
                };
                let r = items.iter().map(|x| as_real(key, x)).collect::<Result<Vec<_>, _>>()?;
                radii = Some(r);
            }
            _ => unreachable!(),
        }
    }
    match radii {
        Some(r) => {
            if charging_range.is_some_and(|r1| r.first() != Some(&r1)) {
                return Err(invalid("R1", "disagrees with the first entry of radii"));
            }
            cfg.max_units = max_units.unwrap_or(r.len());
            cfg.radii = r;
        }
        None => {
            let e = max_units.unwrap_or(cfg.max_units);
            if e == 0 {
                return Err(invalid("E", "must be at least 1"));
            }
            cfg.max_units = e;
            cfg.radii = default_radii(charging_range.unwrap_or(DEFAULT_CHARGING_RANGE), e);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

// Key on the line containing byte `offset`, for syntax errors.
fn key_at(text: &str, offset: usize) -> Option<&str> {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let key = line.split('=').next()?.trim();
    (!key.is_empty() && line.contains('=')).then_some(key)
}

/// Reads `path` (if any), applies `overrides` in order and validates.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<NetworkConfig, LabError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LabError::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            text.parse::<Table>().map_err(|e| {
                let field = e.span().and_then(|s| key_at(&text, s.start));
                invalid(field.unwrap_or("config"), e.message().to_string())
            })?
        }
        None => Table::new(),
    };
    for text in overrides {
        let (key, value) = parse_override(text)?;
        let short = canonical_key(&key).ok_or_else(|| invalid(&key, "unknown key"))?;
        // a later alias replaces an earlier spelling of the same key
        table.retain(|k, _| canonical_key(k) != Some(short));
        table.insert(short.to_string(), value);
    }
    from_table(&table)
}

/// The scenario as a TOML table using the short keys.
pub fn to_table(cfg: &NetworkConfig) -> Table {
    let mut t = Table::new();
    t.insert("n".into(), Value::Integer(cfg.nodes as i64));
    t.insert("m".into(), Value::Integer(cfg.stations as i64));
    t.insert("S".into(), Value::Float(cfg.area));
    t.insert("v".into(), Value::Float(cfg.speed));
    t.insert("q".into(), Value::Float(cfg.transmit_prob));
    t.insert("u".into(), Value::Integer(cfg.station_capacity as i64));
    t.insert("L".into(), Value::Integer(cfg.battery as i64));
    t.insert("E".into(), Value::Integer(cfg.max_units as i64));
    t.insert("radii".into(), Value::Array(cfg.radii.iter().map(|&r| Value::Float(r)).collect()));
    if let Some(m) = cfg.resolution {
        t.insert("M".into(), Value::Integer(m as i64));
    }
    t.insert("seed".into(), Value::Integer(cfg.seed as i64));
    t
}
