//! `section.key=value` assignments on top of a parsed config.

use anyhow::{anyhow, bail, Context, Result};
use risee::RawConfig;
use toml::{Table, Value};

fn parse_value(text: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Sets one key. The value is read as a TOML literal when it parses as one
/// and as a bare string otherwise; integers written to float keys are widened.
pub fn apply_set(raw: &RawConfig, assignment: &str) -> Result<RawConfig> {
    let (path, text) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form section.key=value"))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| anyhow!("override key `{path}` is not of the form section.key"))?;
    let mut table: Table = toml::from_str(&raw.to_toml_string()).context("config round trip")?;
    let sec = table
        .get_mut(section)
        .and_then(Value::as_table_mut)
        .ok_or_else(|| anyhow!("unknown config section `{section}`"))?;
    let mut value = parse_value(text.trim());
    if let (Some(Value::Float(_)), Value::Integer(i)) = (sec.get(key), &value) {
        value = Value::Float(*i as f64);
    }
    if sec.insert(key.to_string(), value).is_none() {
        bail!("unknown config key `{section}.{key}`");
    }
    let text = toml::to_string(&table).context("serialize config")?;
    RawConfig::from_toml_str(&text).with_context(|| format!("override `{assignment}`"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use risee::config::SopBound;

    #[test]
    fn integer_widens_to_float() {
        let raw = apply_set(&RawConfig::default(), "system.p_max_dbm=5").unwrap();
        assert_eq!(raw.system.p_max_dbm, 5.0);
    }

    #[test]
    fn lists_and_strings() {
        let raw = apply_set(&RawConfig::default(), "system.sop_bound=[0.1, 0.2]").unwrap();
        assert_eq!(raw.system.sop_bound, SopBound::PerUser(vec![0.1, 0.2]));
        let raw = apply_set(&RawConfig::default(), "solver.phase_init=random").unwrap();
        assert_eq!(raw.solver.phase_init, risee::config::PhaseInit::Random);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(apply_set(&RawConfig::default(), "system.n_antenas=4").is_err());
        assert!(apply_set(&RawConfig::default(), "sytem.n_antennas=4").is_err());
        assert!(apply_set(&RawConfig::default(), "n_antennas=4").is_err());
        assert!(apply_set(&RawConfig::default(), "system.n_antennas").is_err());
    }

    #[test]
    fn wrong_type_rejected() {
        assert!(apply_set(&RawConfig::default(), "system.n_antennas=many").is_err());
    }
}
