use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lineage_core::Panel;

/// Environment variable naming a directory of `NAME.json` panel files.
pub const PRESET_DIR_ENV: &str = "LINEAGE_PRESET_DIR";

/// Resolve a panel argument: a built-in preset key, a path to a panel file, or a file
/// `NAME.json` in `preset_dir`.
pub fn resolve_panel(name: &str, preset_dir: Option<&Path>) -> Result<Panel> {
    if let Some(panel) = Panel::preset(name) {
        return Ok(panel);
    }
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return load(&direct);
    }
    if let Some(dir) = preset_dir {
        let candidate = dir.join(format!("{name}.json"));
        if candidate.is_file() {
            return load(&candidate);
        }
    }
    let keys: Vec<&str> = lineage_core::model::PRESETS.iter().map(|p| p.key).collect();
    bail!(
        "unknown panel `{name}`: not a preset ({}), not a file{}",
        keys.join(", "),
        match preset_dir {
            Some(d) => format!(", and no {name}.json in {}", d.display()),
            None => String::new(),
        }
    )
}

fn load(path: &Path) -> Result<Panel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Panel::from_json(&text).with_context(|| format!("parsing panel file {}", path.display()))
}
