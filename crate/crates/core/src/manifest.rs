//! Corpus manifest schema shared by the corpus generator, the site index,
//! and the CLI. The manifest is the ground truth about each fixture site:
//! its identity, its facts, and whether search-style retrieval may index it.

use serde::{Deserialize, Serialize};

/// One fixture site of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteManifest {
    /// Stable site id (also the directory name), e.g. `s03`.
    pub id: String,
    /// Theme the site was generated from, e.g. `photography`.
    pub category: String,
    /// Page title.
    pub title: String,
    /// The person/company the site is about.
    pub entity: String,
    /// The site's subject matter (used in indirect queries).
    pub topic: String,
    /// Path of the page relative to the corpus root, e.g. `sites/s03/index.html`.
    pub page_path: String,
    /// URL path the corpus server exposes, e.g. `/sites/s03/index.html`.
    pub url_path: String,
    /// Whether retrieval may index the site. Real-homepage analogs are
    /// always indexable; fictitious sites can be toggled off to model
    /// pages search engines never picked up.
    pub indexable: bool,
    /// True for the fixtures that stand in for real, already-indexed
    /// homepages.
    pub real_homepage_analog: bool,
    /// Sentence-level facts that appear verbatim in the page's
    /// human-visible text.
    pub facts: Vec<String>,
}

/// The whole corpus: generation parameters plus per-site manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    /// Seed the corpus was generated from.
    pub seed: u64,
    pub sites: Vec<SiteManifest>,
}

impl CorpusManifest {
    pub fn site(&self, id: &str) -> Option<&SiteManifest> {
        self.sites.iter().find(|s| s.id == id)
    }
}
