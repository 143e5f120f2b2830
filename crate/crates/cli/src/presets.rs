//! Embedded figure presets.

use std::path::Path;

use crate::scenario::Scenario;
use crate::{CliError, CliResult};

pub const PRESET_NAMES: [&str; 6] = ["fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b"];

/// Raw TOML of an embedded preset.
pub fn preset_toml(name: &str) -> Option<&'static str> {
    match name {
        "fig1a" => Some(include_str!("../presets/fig1a.toml")),
        "fig1b" => Some(include_str!("../presets/fig1b.toml")),
        "fig2a" => Some(include_str!("../presets/fig2a.toml")),
        "fig2b" => Some(include_str!("../presets/fig2b.toml")),
        "fig3a" => Some(include_str!("../presets/fig3a.toml")),
        "fig3b" => Some(include_str!("../presets/fig3b.toml")),
        _ => None,
    }
}

pub fn load_preset(name: &str) -> CliResult<Scenario> {
    let text = preset_toml(name).ok_or_else(|| {
        CliError::Input(format!(
            "unknown preset {name:?} (available: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    Scenario::from_toml(text).map_err(|e| e.with_context(&format!("preset {name}")))
}

/// Interpret a CLI scenario argument: an existing file path wins, a
/// preset name otherwise.
pub fn resolve_input(arg: &str) -> CliResult<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        Scenario::load(path)
    } else if let Some(text) = preset_toml(arg) {
        Scenario::from_toml(text).map_err(|e| e.with_context(&format!("preset {arg}")))
    } else {
        Err(CliError::Input(format!(
            "{arg:?} is neither a scenario file nor a preset (available presets: {})",
            PRESET_NAMES.join(", ")
        )))
    }
}
