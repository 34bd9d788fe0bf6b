//! Merging category taxonomies of several datasets into one label space.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a taxonomy takes part in a merge. Primary taxonomies define merged
/// categories; auxiliary ones only map into categories that already exist
/// and have the rest dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyRole {
    Primary,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub name: String,
    pub role: TaxonomyRole,
    /// Category names in id order.
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMergeRule {
    pub sources: Vec<String>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedCategory {
    pub taxonomy: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedTaxonomy {
    /// Merged category names; the merged id is the position.
    pub categories: Vec<String>,
    /// For each input taxonomy, the merged id of each of its categories
    /// (`None` when dropped).
    pub remap: Vec<Vec<Option<usize>>>,
    pub dropped: Vec<DroppedCategory>,
}

impl MergedTaxonomy {
    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        let name = normalize(name);
        self.categories.iter().position(|c| *c == name)
    }

    pub fn kept(&self, taxonomy: usize) -> usize {
        self.remap[taxonomy].iter().flatten().count()
    }
}

/// Lowercase with spaces and hyphens folded to underscores, so that
/// "tennis racket" and "tennis_racket" coincide.
pub fn normalize(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

pub fn merge_category_maps(
    taxonomies: &[Taxonomy],
    rules: &[CategoryMergeRule],
) -> Result<MergedTaxonomy> {
    let mut target_of: HashMap<String, String> = HashMap::new();
    let known: std::collections::HashSet<String> = taxonomies
        .iter()
        .flat_map(|t| t.categories.iter().map(|c| normalize(c)))
        .collect();
    for rule in rules {
        let target = normalize(&rule.target);
        if target.is_empty() {
            return Err(Error::Rule("merge rule with empty target".into()));
        }
        if rule.sources.is_empty() {
            return Err(Error::Rule(format!("merge rule for '{target}' has no sources")));
        }
        for source in &rule.sources {
            let source = normalize(source);
            if !known.contains(&source) {
                return Err(Error::Rule(format!(
                    "rule source '{source}' is not in any taxonomy"
                )));
            }
            if let Some(prev) = target_of.insert(source.clone(), target.clone()) {
                return Err(Error::Rule(format!(
                    "'{source}' is claimed by both '{prev}' and '{target}'"
                )));
            }
        }
    }
    let resolve = |name: &str| {
        let n = normalize(name);
        target_of.get(&n).cloned().unwrap_or(n)
    };

    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut categories = Vec::new();
    for tax in taxonomies.iter().filter(|t| t.role == TaxonomyRole::Primary) {
        for c in &tax.categories {
            let merged = resolve(c);
            if !ids.contains_key(&merged) {
                ids.insert(merged.clone(), categories.len());
                categories.push(merged);
            }
        }
    }
    let mut remap = Vec::with_capacity(taxonomies.len());
    let mut dropped = Vec::new();
    for tax in taxonomies {
        let table: Vec<Option<usize>> = tax
            .categories
            .iter()
            .map(|c| {
                let id = ids.get(&resolve(c)).copied();
                if id.is_none() {
                    dropped.push(DroppedCategory {
                        taxonomy: tax.name.clone(),
                        name: c.clone(),
                    });
                }
                id
            })
            .collect();
        remap.push(table);
    }
    Ok(MergedTaxonomy {
        categories,
        remap,
        dropped,
    })
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// The YouTube-VIS 2021 training categories.
pub fn ytvis21() -> Taxonomy {
    Taxonomy {
        name: "ytvis21".into(),
        role: TaxonomyRole::Primary,
        categories: names(&[
            "airplane", "bear", "bird", "boat", "car", "cat", "cow", "deer", "dog", "duck",
            "earless_seal", "elephant", "fish", "flying_disc", "fox", "frog", "giant_panda",
            "giraffe", "horse", "leopard", "lizard", "monkey", "motorbike", "mouse", "parrot",
            "person", "rabbit", "shark", "skateboard", "snake", "snowboard", "squirrel",
            "surfboard", "tennis_racket", "tiger", "train", "truck", "turtle", "whale", "zebra",
        ]),
    }
}

/// The OVIS categories.
pub fn ovis() -> Taxonomy {
    Taxonomy {
        name: "ovis".into(),
        role: TaxonomyRole::Primary,
        categories: names(&[
            "person", "bird", "cat", "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra",
            "giraffe", "poultry", "giant_panda", "lizard", "parrot", "monkey", "rabbit", "tiger",
            "fish", "turtle", "bicycle", "motorcycle", "vehicle", "airplane", "boat",
        ]),
    }
}

/// The 80 COCO detection categories, used as an auxiliary image source.
pub fn coco() -> Taxonomy {
    Taxonomy {
        name: "coco".into(),
        role: TaxonomyRole::Auxiliary,
        categories: names(&[
            "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
            "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat",
            "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack",
            "umbrella", "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard",
            "sports ball", "kite", "baseball bat", "baseball glove", "skateboard", "surfboard",
            "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon", "bowl",
            "banana", "apple", "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza",
            "donut", "cake", "chair", "couch", "potted plant", "bed", "dining table", "toilet",
            "tv", "laptop", "mouse", "remote", "keyboard", "cell phone", "microwave", "oven",
            "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors", "teddy bear",
            "hair drier", "toothbrush",
        ]),
    }
}

/// Super-category rules reconciling the three taxonomies above.
pub fn default_rules() -> Vec<CategoryMergeRule> {
    let rule = |sources: &[&str], target: &str| CategoryMergeRule {
        sources: names(sources),
        target: target.into(),
    };
    vec![
        rule(&["car", "truck", "bus"], "vehicle"),
        rule(&["motorcycle", "bicycle"], "motorbike"),
        rule(&["poultry"], "duck"),
        rule(&["frisbee"], "flying_disc"),
    ]
}
