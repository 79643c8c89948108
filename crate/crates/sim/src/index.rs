//! Keyword retrieval over the fixture corpus: the stand-in for the search
//! step a retrieval-enabled assistant performs before reading a page.

use std::collections::BTreeSet;
use std::path::Path;

use arshield_core::manifest::{CorpusManifest, SiteManifest};
use arshield_core::text::tokenize;
use arshield_core::RawHtml;

use crate::error::SimError;

/// Minimum keyword overlap between query and site before the site is
/// considered retrieved at all.
pub const DEFAULT_OVERLAP_THRESHOLD: usize = 1;

/// Function words ignored on both sides of the match, so incidental "the"
/// or "about" overlaps never decide retrieval.
const STOPWORDS: [&str; 24] = [
    "the", "and", "for", "from", "with", "about", "what", "who", "how", "does", "can", "could",
    "you", "your", "its", "this", "that", "are", "was", "has", "have", "had", "please", "tell",
];

/// One indexed site: its ground truth, the page a retriever would fetch,
/// and the keywords it is findable under.
#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub manifest: SiteManifest,
    pub page: RawHtml,
    keywords: BTreeSet<String>,
}

impl IndexEntry {
    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }
}

/// The retrieval index over a corpus.
#[derive(Debug, Clone)]
pub struct SiteIndex {
    entries: Vec<IndexEntry>,
    pub overlap_threshold: usize,
}

/// Keywords a site is indexed under: contentful tokens of its id, title,
/// entity, topic, and category. Page URLs contribute nothing — their
/// generic pieces (`http`, `sites`, `index`, `html`) would match every
/// site — but the site id inside a URL tokenizes to the id keyword.
pub fn index_keywords(manifest: &SiteManifest) -> BTreeSet<String> {
    let source = format!(
        "{} {} {} {} {}",
        manifest.id, manifest.title, manifest.entity, manifest.topic, manifest.category
    );
    content_tokens(&source).collect()
}

fn content_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    tokenize(text)
        .into_iter()
        .filter(|t| t.len() >= 3 && !STOPWORDS.contains(&t.as_str()))
}

impl SiteIndex {
    /// Index a set of sites in the given order; earlier sites win ties.
    pub fn build(sites: Vec<(SiteManifest, RawHtml)>) -> SiteIndex {
        let entries = sites
            .into_iter()
            .map(|(manifest, page)| {
                let keywords = index_keywords(&manifest);
                IndexEntry { manifest, page, keywords }
            })
            .collect();
        SiteIndex { entries, overlap_threshold: DEFAULT_OVERLAP_THRESHOLD }
    }

    /// Load a corpus directory (`manifest.json` + site pages) into an index.
    pub fn from_corpus_dir(dir: &Path) -> Result<SiteIndex, SimError> {
        let manifest: CorpusManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut sites = Vec::with_capacity(manifest.sites.len());
        for site in manifest.sites {
            let html = std::fs::read_to_string(dir.join(&site.page_path))?;
            let page = RawHtml::new(html)
                .map_err(|e| SimError::Retrieval(format!("page for {}: {e}", site.id)))?;
            sites.push((site, page));
        }
        Ok(SiteIndex::build(sites))
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn entry(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.manifest.id == id)
    }

    /// Replace a site's page (e.g. after injecting a policy). Returns false
    /// when the id is unknown.
    pub fn set_page(&mut self, id: &str, page: RawHtml) -> bool {
        match self.entries.iter_mut().find(|e| e.manifest.id == id) {
            Some(entry) => {
                entry.page = page;
                true
            }
            None => false,
        }
    }

    /// Retrieve the best-matching indexable site for a query: the entry
    /// with the largest keyword overlap at or above the threshold. Ties go
    /// to the earliest indexed site, so retrieval is deterministic.
    pub fn retrieve(&self, query: &str) -> Option<&IndexEntry> {
        let query_tokens: BTreeSet<String> = content_tokens(query).collect();
        let mut best: Option<(&IndexEntry, usize)> = None;
        for entry in &self.entries {
            if !entry.manifest.indexable {
                continue;
            }
            let overlap = entry.keywords.intersection(&query_tokens).count();
            if overlap >= self.overlap_threshold
                && best.is_none_or(|(_, best_overlap)| overlap > best_overlap)
            {
                best = Some((entry, overlap));
            }
        }
        best.map(|(entry, _)| entry)
    }
}
