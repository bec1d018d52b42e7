//! `key = value` configuration for the backtest.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use dnt_core::market::Barriers;
use dnt_core::simulate::{strike_grid, BacktestConfig, HestonParams};

const KEYS: &[&str] = &[
    "s0",
    "sigma0",
    "kappa",
    "theta",
    "xi",
    "rho",
    "maturity",
    "lower_barrier",
    "upper_barrier",
    "strike_center",
    "strike_step",
    "strikes_each_side",
    "paths",
    "steps_per_day",
    "days_per_year",
    "option_cost",
    "spot_cost",
    "stop_cost",
    "utility_alpha",
    "pricing_paths",
    "pricing_dt",
    "seed",
];

/// The shipped default: Heston USD/JPY dynamics with the 1.95/2.05 corridor.
pub const DEFAULT_CONFIG: &str = "\
# Heston dynamics; sigma0 is the initial volatility, v0 = sigma0^2
s0 = 2.006
sigma0 = 0.025
kappa = 0.559
theta = 0.02
xi = 0.26
rho = 0.076
maturity = 0.5
lower_barrier = 1.95
upper_barrier = 2.05
# quoted strikes: center +- k * step for k = 0..=strikes_each_side
strike_center = 2
strike_step = 0.0636
strikes_each_side = 5
paths = 10000
steps_per_day = 4
days_per_year = 252
option_cost = 0.01
spot_cost = 0.0002
stop_cost = 0.02
utility_alpha = 1
pricing_paths = 200000
pricing_dt = 0.001
seed = 20240601
";

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            bail!("line {}: unknown config key `{k}`", i + 1);
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate config key `{k}`", i + 1);
        }
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let raw = map.get(key).ok_or_else(|| anyhow!("missing config key `{key}`"))?;
    raw.parse().with_context(|| format!("config key `{key}`: cannot parse {raw:?}"))
}

/// Parses a complete backtest configuration. Every key is required.
pub fn parse_backtest(text: &str) -> Result<BacktestConfig> {
    let m = parse_pairs(text)?;
    let sigma0: f64 = get(&m, "sigma0")?;
    let params = HestonParams::new(
        get(&m, "s0")?,
        sigma0 * sigma0,
        get(&m, "kappa")?,
        get(&m, "theta")?,
        get(&m, "xi")?,
        get(&m, "rho")?,
    )?;
    Ok(BacktestConfig {
        params,
        maturity: get(&m, "maturity")?,
        barriers: Barriers::new(get(&m, "lower_barrier")?, get(&m, "upper_barrier")?)?,
        strikes: strike_grid(get(&m, "strike_center")?, get(&m, "strike_step")?, get(&m, "strikes_each_side")?),
        paths: get(&m, "paths")?,
        steps_per_day: get(&m, "steps_per_day")?,
        days_per_year: get(&m, "days_per_year")?,
        option_cost: get(&m, "option_cost")?,
        spot_cost: get(&m, "spot_cost")?,
        stop_cost: get(&m, "stop_cost")?,
        utility_alpha: get(&m, "utility_alpha")?,
        pricing_paths: get(&m, "pricing_paths")?,
        pricing_dt: get(&m, "pricing_dt")?,
        seed: get(&m, "seed")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_matches_library_default() {
        assert_eq!(parse_backtest(DEFAULT_CONFIG).unwrap(), BacktestConfig::default());
    }

    #[test]
    fn missing_key_is_named() {
        let text = DEFAULT_CONFIG.replace("xi = 0.26\n", "");
        let err = parse_backtest(&text).unwrap_err().to_string();
        assert_eq!(err, "missing config key `xi`");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(parse_backtest(&format!("{DEFAULT_CONFIG}volatility = 3\n")).is_err());
        assert!(parse_backtest(&format!("{DEFAULT_CONFIG}seed = 3\n")).is_err());
        let err = parse_backtest(&DEFAULT_CONFIG.replace("paths = 10000", "paths = many")).unwrap_err();
        assert!(format!("{err:#}").contains("`paths`"));
    }
}
