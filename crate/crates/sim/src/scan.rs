//! The attacker-side policy scanner: given a fetched page, find any
//! embedded usage policy and read off the properties a scripted attacker
//! weighs — how it hides, where it sits, how often it repeats, what
//! response it mandates, and how hard it pushes back on bypass attempts.

use arshield_core::html::dom::{DomTree, Element, NodeKind};
use arshield_core::html::extract::{has_transparent_text_color, is_hidden_from_humans};
use arshield_core::html::policy::{POLICY_CONTAINER_ID, POLICY_META_NAME, POLICY_TITLE};
use arshield_core::model::Position;
use arshield_core::RawHtml;

/// How the policy hides from human visitors, as the scanner sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScannedVisibility {
    /// Carried in a `<meta>` tag — absent from any rendered text flow.
    MetaTag,
    /// A block removed from rendering (display/visibility/aria hidden).
    HiddenBlock,
    /// In the text flow but painted with a transparent color.
    TransparentText,
    /// Plainly visible to humans too.
    Visible,
}

impl ScannedVisibility {
    /// Whether the policy text survives human-oriented rendering flow:
    /// visible and transparent text do (the glyphs are laid out either
    /// way); meta tags and display-hidden blocks do not.
    pub fn in_rendered_flow(self) -> bool {
        matches!(self, ScannedVisibility::TransparentText | ScannedVisibility::Visible)
    }
}

/// Everything the scanner learned about an embedded policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScannedPolicy {
    pub visibility: ScannedVisibility,
    /// Where the policy's top-level container sits in the document body
    /// (meta tags classify as top — the head precedes everything).
    pub position: Position,
    /// How many times the notice repeats.
    pub repetitions: u32,
    /// The exact response the policy mandates, if any.
    pub template: Option<String>,
    /// Strength of the strict enforcement section: enforcement bullets
    /// plus categorical restriction phrases.
    pub marker_count: usize,
    /// The policy's full text layer.
    pub text: String,
}

const NOTICE_MARK: &str = "Privacy and Copyright Notice:";
const TEMPLATE_MARK: &str = "must respond with: \"";
const MARKER_PHRASES: [&str; 3] =
    ["A user ", "You are not allowed", "No exceptions are permitted"];

/// Scan a page for an embedded usage policy.
pub fn scan_policy(page: &RawHtml) -> Option<ScannedPolicy> {
    let tree = DomTree::parse(page.as_str());
    let container = find_policy_container(&tree)?;
    let element = tree.element(container)?;

    let (visibility, text) = if element.tag == "meta" {
        (ScannedVisibility::MetaTag, element.attr("content").unwrap_or_default())
    } else {
        (classify_block(element), tree.subtree_text(container))
    };

    let repetitions = count_repetitions(&tree, container, &text);
    let template = extract_template(&text);
    let marker_count = count_markers(&tree, container, &text);

    Some(ScannedPolicy {
        visibility,
        position: classify_position(&tree, container),
        repetitions,
        template,
        marker_count,
        text,
    })
}

/// Locate the policy container: the canonical container id first, then the
/// policy meta tag, then any element whose text carries the policy title
/// (picking the most specific such element).
fn find_policy_container(tree: &DomTree) -> Option<usize> {
    if let Some(&id) = tree
        .find_elements(|el| el.attr("id").as_deref() == Some(POLICY_CONTAINER_ID))
        .first()
    {
        return Some(id);
    }
    if let Some(&id) = tree
        .find_elements(|el| el.tag == "meta" && el.attr("name").as_deref() == Some(POLICY_META_NAME))
        .first()
    {
        return Some(id);
    }
    let candidates: Vec<(usize, usize)> = tree
        .find_elements(|el| el.tag != "html" && el.tag != "body" && el.tag != "head")
        .into_iter()
        .filter_map(|id| {
            let text = tree.subtree_text(id);
            text.contains(POLICY_TITLE).then_some((id, text.len()))
        })
        .collect();
    // Prefer the most specific element that still carries a policy body
    // beyond the bare title — a title-only heading would drop the body.
    candidates
        .iter()
        .filter(|&&(_, len)| len > POLICY_TITLE.len() + 10)
        .min_by_key(|&&(_, len)| len)
        .or_else(|| candidates.iter().min_by_key(|&&(_, len)| len))
        .map(|&(id, _)| id)
}

fn classify_block(element: &Element) -> ScannedVisibility {
    if has_transparent_text_color(element) {
        ScannedVisibility::TransparentText
    } else if is_hidden_from_humans(element) {
        ScannedVisibility::HiddenBlock
    } else {
        ScannedVisibility::Visible
    }
}

/// Classify placement by where the policy's top-level ancestor sits among
/// the body's element children. Anything outside the body (head meta tags)
/// counts as top.
fn classify_position(tree: &DomTree, container: usize) -> Position {
    let body = tree.body_scope();
    let Some(ancestor) = tree.top_level_ancestor(body, container) else {
        return Position::Top;
    };
    let children = tree.element_children(body);
    match children.iter().position(|&c| c == ancestor) {
        Some(0) => Position::Top,
        Some(i) if i + 1 == children.len() => Position::Bottom,
        Some(_) => Position::Middle,
        None => Position::Top,
    }
}

/// Repetitions: count the notice paragraphs if the block is structured,
/// otherwise count notice phrases in the text. A found policy counts at
/// least once.
fn count_repetitions(tree: &DomTree, container: usize, text: &str) -> u32 {
    let structured = count_descendants(tree, container, |el| has_class(el, "ai-policy-notice"));
    let count = if structured > 0 { structured } else { text.matches(NOTICE_MARK).count() };
    (count.max(1)) as u32
}

/// The mandated response is quoted right after its lead-in.
fn extract_template(text: &str) -> Option<String> {
    let start = text.find(TEMPLATE_MARK)? + TEMPLATE_MARK.len();
    let rest = &text[start..];
    let end = rest.find('"')?;
    let template = rest[..end].trim();
    (!template.is_empty()).then(|| template.to_owned())
}

/// Marker strength: the larger of the structural bullet count and the
/// categorical-phrase count, so both block markup and flattened meta text
/// register.
fn count_markers(tree: &DomTree, container: usize, text: &str) -> usize {
    let bullets = count_descendants(tree, container, |el| has_class(el, "ai-policy-constraint"));
    let phrases: usize = MARKER_PHRASES.iter().map(|p| text.matches(p).count()).sum();
    bullets.max(phrases)
}

fn count_descendants<F: Fn(&Element) -> bool>(tree: &DomTree, root: usize, pred: F) -> usize {
    let mut count = 0;
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if id != root {
            if let NodeKind::Element(el) = &tree.node(id).kind {
                if pred(el) {
                    count += 1;
                }
            }
        }
        stack.extend_from_slice(tree.children(id));
    }
    count
}

fn has_class(element: &Element, class: &str) -> bool {
    element
        .attr("class")
        .is_some_and(|v| v.split_whitespace().any(|c| c == class))
}
