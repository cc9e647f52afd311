use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The sixteen job categories used by default, in vocabulary order.
pub const DEFAULT_CATEGORIES: [&str; 16] = [
    "Technology",
    "Product",
    "Supply Chain",
    "Logistics",
    "Content",
    "Customer Experience",
    "Marketing",
    "Advertising",
    "Data",
    "Gaming",
    "General",
    "Design",
    "Operations",
    "Sales",
    "Project management",
    "Risk management",
];

/// Ordered category names with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CategoryVocab {
    names: Vec<String>,
    index: IndexMap<String, usize>,
}

impl Default for CategoryVocab {
    fn default() -> Self {
        Self::new(DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect()).expect("default vocab is valid")
    }
}

impl TryFrom<Vec<String>> for CategoryVocab {
    type Error = Error;
    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::new(names)
    }
}

impl From<CategoryVocab> for Vec<String> {
    fn from(v: CategoryVocab) -> Self {
        v.names
    }
}

impl CategoryVocab {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("category vocabulary is empty".into()));
        }
        let mut index = IndexMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate category `{n}`")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Lowercase, underscore-separated form used in file names.
    pub fn slug(name: &str) -> String {
        name.to_lowercase().split_whitespace().collect::<Vec<_>>().join("_")
    }
}
