//! Built-in panels carrying published profile mutation rates.
//!
//! Only panel totals are published, so per-locus rates are an equal split of the total.
//! Mitogenomes are represented by abstract segments whose combined rate is the profile
//! rate; individual sites are not modelled.

use super::{uniform_split, LocusSpec, Panel};

#[derive(Debug, Clone, Copy)]
pub struct PresetInfo {
    pub key: &'static str,
    pub description: &'static str,
    /// Profile mutation rate per generation used by the preset.
    pub total_rate: f64,
    /// Published range when the rate is reported as an interval.
    pub rate_range: Option<(f64, f64)>,
}

const MITO_RATE: f64 = 1.0 / 70.0;
const MITO_SEGMENTS: usize = 50;

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        key: "powerplex-y",
        description: "PowerPlex Y, 12 Y-STR loci",
        total_rate: 0.025,
        rate_range: None,
    },
    PresetInfo {
        key: "yfiler",
        description: "Yfiler, 17 Y-STR loci",
        total_rate: 0.044,
        rate_range: None,
    },
    PresetInfo {
        key: "powerplex-y23",
        description: "PowerPlex Y23, 23 Y-STR loci",
        total_rate: 0.083,
        rate_range: None,
    },
    PresetInfo {
        key: "yfiler-plus",
        description: "Yfiler Plus, 27 Y-STR loci",
        total_rate: 0.135,
        rate_range: None,
    },
    PresetInfo {
        key: "mito-16070",
        description: "mitogenome, 16,070 sites (50 abstract segments, ~1 mutation per 70 generations)",
        total_rate: MITO_RATE,
        rate_range: Some((0.003, 0.019)),
    },
    PresetInfo {
        key: "mito-16494",
        description: "mitogenome, 16,494 sites (50 abstract segments, ~1 mutation per 70 generations)",
        total_rate: MITO_RATE,
        rate_range: Some((0.004, 0.023)),
    },
    PresetInfo {
        key: "nested-y",
        description: "Yfiler Plus loci ordered so that the first 12, 17 and 23 loci carry the \
                      PowerPlex Y, Yfiler and PowerPlex Y23 profile rates",
        total_rate: 0.135,
        rate_range: None,
    },
];

/// Prefix sizes of the `nested-y` preset and the profile rate of each prefix.
pub const NESTED_Y_BLOCKS: [(usize, f64); 4] = [(12, 0.025), (17, 0.044), (23, 0.083), (27, 0.135)];

type Loc = (&'static str, Option<&'static str>);

const POWERPLEX_Y: &[Loc] = &[
    ("DYS19", None),
    ("DYS385a", Some("DYS385")),
    ("DYS385b", Some("DYS385")),
    ("DYS389I", None),
    ("DYS389II", None),
    ("DYS390", None),
    ("DYS391", None),
    ("DYS392", None),
    ("DYS393", None),
    ("DYS437", None),
    ("DYS438", None),
    ("DYS439", None),
];

const YFILER_EXTRA: &[Loc] = &[
    ("DYS448", None),
    ("DYS456", None),
    ("DYS458", None),
    ("DYS635", None),
    ("YGATAH4", None),
];

const Y23_EXTRA: &[Loc] = &[
    ("DYS481", None),
    ("DYS533", None),
    ("DYS549", None),
    ("DYS570", None),
    ("DYS576", None),
    ("DYS643", None),
];

const YFILER_PLUS: &[Loc] = &[
    ("DYS576", None),
    ("DYS389I", None),
    ("DYS635", None),
    ("DYS389II", None),
    ("DYS627", None),
    ("DYS460", None),
    ("DYS458", None),
    ("DYS19", None),
    ("YGATAH4", None),
    ("DYS448", None),
    ("DYS391", None),
    ("DYS456", None),
    ("DYS390", None),
    ("DYS438", None),
    ("DYS392", None),
    ("DYS518", None),
    ("DYS570", None),
    ("DYS437", None),
    ("DYS385a", Some("DYS385")),
    ("DYS385b", Some("DYS385")),
    ("DYS449", None),
    ("DYS393", None),
    ("DYS439", None),
    ("DYS481", None),
    ("DYF387S1a", Some("DYF387S1")),
    ("DYF387S1b", Some("DYF387S1")),
    ("DYS533", None),
];

// Yfiler Plus loci reordered into nested blocks: PowerPlex Y, Yfiler additions, six further
// Yfiler Plus loci standing in for the PowerPlex Y23 block, then the remainder.
const NESTED_Y_TAIL: &[Loc] = &[
    ("DYS481", None),
    ("DYS533", None),
    ("DYS570", None),
    ("DYS576", None),
    ("DYS449", None),
    ("DYS460", None),
    ("DYS518", None),
    ("DYS627", None),
    ("DYF387S1a", Some("DYF387S1")),
    ("DYF387S1b", Some("DYF387S1")),
];

pub(super) fn build(key: &str) -> Option<Panel> {
    let info = PRESETS.iter().find(|p| p.key == key)?;
    let panel = match key {
        "powerplex-y" => Panel::uniform("PowerPlex Y", POWERPLEX_Y, info.total_rate),
        "yfiler" => {
            let loci: Vec<Loc> = POWERPLEX_Y.iter().chain(YFILER_EXTRA).copied().collect();
            Panel::uniform("Yfiler", &loci, info.total_rate)
        }
        "powerplex-y23" => {
            let loci: Vec<Loc> = POWERPLEX_Y
                .iter()
                .chain(YFILER_EXTRA)
                .chain(Y23_EXTRA)
                .copied()
                .collect();
            Panel::uniform("PowerPlex Y23", &loci, info.total_rate)
        }
        "yfiler-plus" => Panel::uniform("Yfiler Plus", YFILER_PLUS, info.total_rate),
        "mito-16070" | "mito-16494" => {
            let mu = uniform_split(info.total_rate, MITO_SEGMENTS);
            let loci = (1..=MITO_SEGMENTS)
                .map(|i| LocusSpec::new(format!("mt{i:02}"), mu))
                .collect();
            Panel::new(key, loci)
        }
        "nested-y" => nested_y(),
        _ => return None,
    };
    Some(panel.expect("built-in presets are valid"))
}

fn nested_y() -> crate::Result<Panel> {
    let loci: Vec<Loc> = POWERPLEX_Y
        .iter()
        .chain(YFILER_EXTRA)
        .chain(NESTED_Y_TAIL)
        .copied()
        .collect();
    let mut specs = Vec::with_capacity(loci.len());
    let mut prev_len = 0;
    let mut prev_rate = 0.0;
    for (len, rate) in NESTED_Y_BLOCKS {
        // survival of the block = (1 - rate) / (1 - prev_rate), split evenly inside it
        let block_rate = 1.0 - (1.0 - rate) / (1.0 - prev_rate);
        let mu = uniform_split(block_rate, len - prev_len);
        for &(name, group) in &loci[prev_len..len] {
            specs.push(LocusSpec {
                name: name.to_string(),
                mu,
                duplicate_group: group.map(str::to_string),
            });
        }
        prev_len = len;
        prev_rate = rate;
    }
    Panel::new("nested Y (12/17/23/27)", specs)
}
