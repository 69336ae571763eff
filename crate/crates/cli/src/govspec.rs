//! Governor construction from a name plus the config's tuning knobs.

use std::path::Path;

use govlab::encoder::EncoderConfig;
use govlab::governor::{
    Conservative, ConservativeConfig, Governor, Ondemand, OndemandConfig, SchedutilLike,
    StaticGovernor,
};
use govlab::power::FrequencyTable;
use govlab::quant::{load_quantized, QuantGovernor};
use govlab::rl::model;
use govlab::rl::policy::RlGovernor;

use crate::config::GovernorSection;
use crate::error::{CliError, Result};

pub const GOVERNOR_NAMES: &[&str] = &[
    "performance",
    "powersave",
    "pinned",
    "ondemand",
    "conservative",
    "schedutil",
    "rl",
];

/// Reject unknown names before any work happens; the name usually comes
/// straight from the command line.
pub fn validate_name(name: &str) -> Result<()> {
    if GOVERNOR_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "unknown governor {name:?}; expected one of {}",
            GOVERNOR_NAMES.join(", ")
        )))
    }
}

/// Build a governor for `table`, deployed against `deadline_s`.
///
/// `name_override` (typically a command-line flag) wins over the config
/// section's `name`.
pub fn build(
    section: &GovernorSection,
    name_override: Option<&str>,
    table: &FrequencyTable,
    deadline_s: f64,
) -> Result<Box<dyn Governor>> {
    let name = name_override.unwrap_or(&section.name);
    validate_name(name)?;
    Ok(match name {
        "performance" => Box::new(StaticGovernor::performance()),
        "powersave" => Box::new(StaticGovernor::powersave()),
        "pinned" => {
            let idx = section.pinned_level.ok_or_else(|| {
                CliError::Config("governor \"pinned\" needs [governor] pinned_level".into())
            })?;
            if idx >= table.len() {
                return Err(CliError::Config(format!(
                    "pinned_level {idx} out of range; table has {} levels",
                    table.len()
                )));
            }
            Box::new(StaticGovernor::pinned(idx))
        }
        "ondemand" => {
            let mut cfg = OndemandConfig::default();
            if let Some(t) = section.up_threshold {
                cfg.up_threshold = t;
            }
            if let Some(b) = section.powersave_bias {
                cfg.powersave_bias = b;
            }
            Box::new(Ondemand::new(cfg))
        }
        "conservative" => {
            let mut cfg = ConservativeConfig::default();
            if let Some(t) = section.up_threshold {
                cfg.up_threshold = t;
            }
            Box::new(Conservative::new(cfg))
        }
        "schedutil" => Box::new(SchedutilLike::default()),
        "rl" => {
            let path = section.model.as_ref().ok_or_else(|| {
                CliError::Config(
                    "governor \"rl\" needs a model file ([governor] model = \"...\" \
                     or --model)"
                        .into(),
                )
            })?;
            build_rl(path, table, deadline_s)?
        }
        _ => unreachable!("validate_name admits only the names above"),
    })
}

/// Learned governor from a model file: `.qgov` runs the integer engine,
/// anything else is read as a JSON model and runs the float network. Both
/// loaders refuse models whose table fingerprint differs from the active
/// table. The state encoder is re-normalized against `deadline_s`, so a
/// model may be deployed under a deadline other than the one it was
/// trained for.
fn build_rl(
    path: &Path,
    table: &FrequencyTable,
    deadline_s: f64,
) -> Result<Box<dyn Governor>> {
    if path.extension().is_some_and(|e| e == "qgov") {
        let qnet = load_quantized(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let gov = QuantGovernor::new(qnet, table, deadline_s)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(Box::new(gov));
    }
    let (net, trained_encoder, layout) = model::load(path, table)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let encoder = EncoderConfig::with_intervals(
        table.clone(),
        trained_encoder.interval_uppers,
        deadline_s,
    )
    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Box::new(RlGovernor::greedy(net, encoder, layout)))
}
