use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ItemId, Scale};
use crate::error::{Error, Result};

/// Where the instrument's data came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_uri: String,
    pub collection_date: String,
}

/// Procedure and principle metadata describing how an instrument's data
/// was collected. Stored verbatim and echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentManifest {
    pub name: String,
    pub scale: Scale,
    pub guidelines: String,
    pub procedure_notes: String,
    pub principle_notes: String,
    /// Pairs whose repeated appearances are calibration checks. The first
    /// appearance is an ordinary item; later ones are flagged as controls.
    pub control_items: Vec<ItemId>,
    /// Pairs that legitimately appear more than once and are all kept as
    /// ordinary items.
    pub repeated_items: Vec<ItemId>,
    pub provenance: Provenance,
}

/// On-disk layout: flat `key = "value"` pairs, multi-line text in
/// triple-quoted strings, control items as `"left,right"` strings.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    name: String,
    scale_min: f64,
    scale_max: f64,
    #[serde(default)]
    guidelines: String,
    #[serde(default)]
    procedure_notes: String,
    #[serde(default)]
    principle_notes: String,
    #[serde(default)]
    control_items: Vec<String>,
    #[serde(default)]
    repeated_items: Vec<String>,
    #[serde(default)]
    source_uri: String,
    #[serde(default)]
    collection_date: String,
}

impl InstrumentManifest {
    pub fn new(name: impl Into<String>, scale: Scale) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Manifest("name must be non-empty".into()));
        }
        Ok(InstrumentManifest {
            name,
            scale: Scale::new(scale.min, scale.max)?,
            guidelines: String::new(),
            procedure_notes: String::new(),
            principle_notes: String::new(),
            control_items: Vec::new(),
            repeated_items: Vec::new(),
            provenance: Provenance::default(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: ManifestFile =
            toml::from_str(text).map_err(|e| Error::Manifest(e.message().to_string()))?;
        let mut manifest =
            InstrumentManifest::new(raw.name, Scale::new(raw.scale_min, raw.scale_max)?)?;
        manifest.guidelines = raw.guidelines;
        manifest.procedure_notes = raw.procedure_notes;
        manifest.principle_notes = raw.principle_notes;
        manifest.control_items = parse_items(&raw.control_items)?;
        manifest.repeated_items = parse_items(&raw.repeated_items)?;
        manifest.provenance = Provenance {
            source_uri: raw.source_uri,
            collection_date: raw.collection_date,
        };
        Ok(manifest)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = ManifestFile {
            name: self.name.clone(),
            scale_min: self.scale.min,
            scale_max: self.scale.max,
            guidelines: self.guidelines.clone(),
            procedure_notes: self.procedure_notes.clone(),
            principle_notes: self.principle_notes.clone(),
            control_items: format_items(&self.control_items),
            repeated_items: format_items(&self.repeated_items),
            source_uri: self.provenance.source_uri.clone(),
            collection_date: self.provenance.collection_date.clone(),
        };
        toml::to_string(&raw).expect("manifest fields are always serializable")
    }

    pub fn is_declared_control(&self, item: &ItemId) -> bool {
        self.control_items
            .iter()
            .any(|c| c.pair_key() == item.pair_key())
    }

    /// Whether the data may contain `item` more than once.
    pub fn allows_repeat(&self, item: &ItemId) -> bool {
        self.is_declared_control(item)
            || self
                .repeated_items
                .iter()
                .any(|c| c.pair_key() == item.pair_key())
    }
}

fn parse_items(raw: &[String]) -> Result<Vec<ItemId>> {
    raw.iter()
        .map(|s| ItemId::parse(s))
        .collect::<Result<_>>()
        .map_err(|e| Error::Manifest(e.to_string()))
}

fn format_items(items: &[ItemId]) -> Vec<String> {
    items
        .iter()
        .map(|it| format!("{},{}", it.left(), it.right()))
        .collect()
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<InstrumentManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    InstrumentManifest::parse(&text).map_err(|e| match e {
        Error::Manifest(msg) => Error::Manifest(format!("{}: {msg}", path.display())),
        other => other,
    })
}
