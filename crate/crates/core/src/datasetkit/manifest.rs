//! JSON manifest describing dataset sources, their items and box
//! annotations.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Video,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub instance_id: i64,
    pub category_id: u32,
    pub frame: usize,
    /// `[x0, y0, x1, y1]` in pixels.
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    /// Number of frames (1 for still images).
    pub frames: usize,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub name: String,
    pub kind: SourceKind,
    pub weight: f64,
    #[serde(default)]
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub categories: Vec<Category>,
    pub sources: Vec<Source>,
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        location: location.into(),
        message: message.into(),
    }
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for (i, c) in self.categories.iter().enumerate() {
            if !ids.insert(c.id) {
                return Err(invalid(format!("categories[{i}]"), format!("duplicate id {}", c.id)));
            }
        }
        if self.sources.is_empty() {
            return Err(invalid("sources", "no sources"));
        }
        let mut total = 0.0;
        for (s, src) in self.sources.iter().enumerate() {
            let here = format!("sources[{s}]");
            if !(src.weight.is_finite() && src.weight >= 0.0) {
                return Err(invalid(&here, format!("weight {} must be finite and >= 0", src.weight)));
            }
            total += src.weight;
            for (i, item) in src.items.iter().enumerate() {
                let here = format!("{here}.items[{i}]");
                if item.frames == 0 {
                    return Err(invalid(&here, "item has no frames"));
                }
                if src.kind == SourceKind::Image && item.frames != 1 {
                    return Err(invalid(&here, "image items have exactly one frame"));
                }
                for (a, ann) in item.annotations.iter().enumerate() {
                    let here = format!("{here}.annotations[{a}]");
                    if !ids.contains(&ann.category_id) {
                        return Err(invalid(&here, format!("unknown category id {}", ann.category_id)));
                    }
                    if ann.frame >= item.frames {
                        return Err(invalid(&here, format!("frame {} of {}", ann.frame, item.frames)));
                    }
                    let [x0, y0, x1, y1] = ann.bbox;
                    if !ann.bbox.iter().all(|v| v.is_finite()) || x0 > x1 || y0 > y1 {
                        return Err(invalid(&here, format!("malformed bbox {:?}", ann.bbox)));
                    }
                }
            }
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid("sources", format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
