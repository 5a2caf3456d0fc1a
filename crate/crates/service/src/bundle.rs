//! Task bundles: the items shown to participants and their precomputed
//! explanation assets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ardent_core::Dims;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskItem {
    pub id: String,
    /// Path of the item's image or text, relative to the bundle directory.
    pub asset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub support_prediction: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_confidence: Option<f64>,
}

/// How items map to propensity contexts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextBucketing {
    /// One shared context: learns a person's explainer preferences overall.
    #[default]
    Global,
    /// One context per predicted class.
    BySupportPrediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskBundle {
    pub id: String,
    pub items: Vec<TaskItem>,
    pub action_labels: Vec<String>,
    pub explainer_labels: Vec<String>,
    /// Item id to one asset path per explainer, indexed by explainer id.
    pub assets: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub context_bucketing: ContextBucketing,
}

impl TaskBundle {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ServiceError::InvalidBundle(m));
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id == "." || self.id == ".." {
            return bad(format!("bundle id {:?} is not a plain name", self.id));
        }
        if self.items.is_empty() {
            return bad("bundle has no items".into());
        }
        if self.action_labels.len() < 2 {
            return bad("need at least two actions".into());
        }
        if self.explainer_labels.is_empty() {
            return bad("need at least one explainer".into());
        }
        let mut seen = std::collections::HashSet::new();
        for item in &self.items {
            if !seen.insert(item.id.as_str()) {
                return bad(format!("duplicate item id {:?}", item.id));
            }
            if item.support_prediction >= self.action_labels.len() {
                return bad(format!("item {:?} predicts unknown action {}", item.id, item.support_prediction));
            }
            if item.label.is_some_and(|l| l >= self.action_labels.len()) {
                return bad(format!("item {:?} has an unknown label", item.id));
            }
            if item.support_confidence.is_some_and(|c| !(0.0..=1.0).contains(&c)) {
                return bad(format!("item {:?} confidence outside [0, 1]", item.id));
            }
            match self.assets.get(&item.id) {
                Some(list) if list.len() == self.explainer_labels.len() => {}
                Some(list) => {
                    return bad(format!(
                        "item {:?} has {} explanation assets, expected {}",
                        item.id,
                        list.len(),
                        self.explainer_labels.len()
                    ))
                }
                None => return bad(format!("item {:?} has no explanation assets", item.id)),
            }
        }
        if let Some(extra) = self.assets.keys().find(|k| !seen.contains(k.as_str())) {
            return bad(format!("assets listed for unknown item {extra:?}"));
        }
        for path in self.asset_paths() {
            if !is_relative_inside(path) {
                return bad(format!("asset path {path:?} escapes the bundle directory"));
            }
        }
        self.dims()?;
        Ok(())
    }

    fn asset_paths(&self) -> impl Iterator<Item = &str> {
        self.items
            .iter()
            .map(|i| i.asset.as_str())
            .chain(self.assets.values().flatten().map(String::as_str))
    }

    pub fn dims(&self) -> Result<Dims> {
        let a = self.action_labels.len();
        let x = match self.context_bucketing {
            ContextBucketing::Global => 1,
            ContextBucketing::BySupportPrediction => a,
        };
        Ok(Dims::new(self.explainer_labels.len(), x, a)?)
    }

    pub fn n_explainers(&self) -> usize {
        self.explainer_labels.len()
    }

    pub fn context_of(&self, item: &TaskItem) -> usize {
        match self.context_bucketing {
            ContextBucketing::Global => 0,
            ContextBucketing::BySupportPrediction => item.support_prediction,
        }
    }

    pub fn explanation_asset(&self, item: &TaskItem, explainer: usize) -> &str {
        &self.assets[&item.id][explainer]
    }

    /// Reads `bundle.json` from `dir` and checks that every asset file exists.
    pub fn load(dir: &Path) -> Result<LoadedBundle> {
        let path = dir.join(BUNDLE_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ServiceError::InvalidBundle(format!("{}: {e}", path.display())))?;
        let bundle: TaskBundle = serde_json::from_str(&text)?;
        bundle.validate()?;
        for asset in bundle.asset_paths() {
            if !dir.join(asset).is_file() {
                return Err(ServiceError::InvalidBundle(format!("missing asset file {asset}")));
            }
        }
        Ok(LoadedBundle {
            bundle,
            root: dir.to_path_buf(),
        })
    }
}

fn is_relative_inside(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty()
        && p.components()
            .all(|c| matches!(c, std::path::Component::Normal(_) | std::path::Component::CurDir))
}

/// A validated bundle together with the directory its assets live in.
#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub bundle: TaskBundle,
    pub root: PathBuf,
}
