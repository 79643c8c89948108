//! Policy injection into pages, and the invariance check that proves the
//! human-visible rendering did not move.

use crate::error::CoreError;
use crate::html::dom::{DomTree, NodeId};
use crate::html::extract::{extract_from_tree, has_transparent_text_color, ViewProfile};
use crate::html::policy::{render_policy_as, POLICY_CONTAINER_ID};
use crate::model::{DefensePolicy, Position, RawHtml, Visibility};

/// Result of an injection: the new page plus any warnings (e.g. the
/// transparent-text ambiguity guard).
#[derive(Debug, Clone)]
pub struct InjectionOutcome {
    pub page: RawHtml,
    pub warnings: Vec<String>,
}

/// Embed `policy` into `page` at the policy's position/visibility.
///
/// Placement: block fragments go into the body — top (before the first
/// element), middle (after the ⌈n/2⌉-th element child), or bottom (after
/// the last). Meta-tag fragments go into the document head at the
/// analogous spot; they never touch the body, and block fragments never
/// touch the head.
///
/// Ambiguity guard: if the page already uses transparent-colored text,
/// transparent-text mode is rejected and the fragment falls back to a
/// hidden block; the outcome carries a warning instead of failing.
pub fn inject(page: &RawHtml, policy: &DefensePolicy) -> Result<InjectionOutcome, CoreError> {
    let mut tree = DomTree::parse(page.as_str());
    let mut warnings = Vec::new();

    let mut visibility = policy.injection.visibility;
    if visibility == Visibility::TransparentText && page_uses_transparent_text(&tree) {
        warnings.push(
            "page already contains transparent-colored text; transparent-text mode was \
             rejected and the policy was embedded as a hidden block instead"
                .to_owned(),
        );
        visibility = Visibility::HiddenBlock;
    }

    let fragment = render_policy_as(policy, visibility);
    let fragment_tree = DomTree::parse(&fragment.html);

    let scope = match visibility {
        Visibility::MetaTag => tree.head_scope(),
        _ => tree.body_scope(),
    };
    let index = insertion_index(&tree, scope, policy.injection.position);
    tree.insert_fragment(scope, index, &fragment_tree);

    let page = RawHtml::new(tree.serialize())
        .map_err(|e| CoreError::Injection(format!("serialized page was unusable: {e}")))?;
    Ok(InjectionOutcome { page, warnings })
}

/// Child index for a fragment among `scope`'s children.
fn insertion_index(tree: &DomTree, scope: NodeId, position: Position) -> usize {
    let children = tree.children(scope);
    let elements = tree.element_children(scope);
    match position {
        // Before the first element child (skipping leading text/comments).
        Position::Top => elements
            .first()
            .and_then(|first| children.iter().position(|c| c == first))
            .unwrap_or(0),
        // After the ⌈n/2⌉-th element child (1-based).
        Position::Middle => {
            let n = elements.len();
            if n == 0 {
                return children.len();
            }
            let k = n.div_ceil(2);
            let anchor = elements[k - 1];
            children.iter().position(|c| *c == anchor).expect("anchor is a child") + 1
        }
        Position::Bottom => children.len(),
    }
}

/// True when any element outside a policy container colors its text fully
/// transparent — the signal the ambiguity guard watches for.
fn page_uses_transparent_text(tree: &DomTree) -> bool {
    tree.find_elements(has_transparent_text_color)
        .into_iter()
        .any(|id| !inside_policy_container(tree, id))
}

fn inside_policy_container(tree: &DomTree, mut id: NodeId) -> bool {
    loop {
        if tree
            .element(id)
            .and_then(|el| el.attr("id"))
            .is_some_and(|v| v == POLICY_CONTAINER_ID)
        {
            return true;
        }
        match tree.node(id).parent {
            Some(parent) => id = parent,
            None => return false,
        }
    }
}

/// Outcome of comparing the human-visible rendering of two pages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvarianceCheck {
    /// The pages render identically for a human visitor.
    Preserved,
    /// They differ; the excerpts show the first divergence.
    Diff {
        /// Word offset of the first mismatching token.
        word_offset: usize,
        before_excerpt: String,
        after_excerpt: String,
    },
}

impl InvarianceCheck {
    pub fn is_preserved(&self) -> bool {
        matches!(self, InvarianceCheck::Preserved)
    }
}

/// Compare the human-visible extraction of two pages; localize the first
/// mismatch when they differ.
pub fn verify_invariance(before: &RawHtml, after: &RawHtml) -> InvarianceCheck {
    let before_text = crate::html::extract::extract_visible(before, ViewProfile::HumanView).text;
    let after_text = crate::html::extract::extract_visible(after, ViewProfile::HumanView).text;
    diff_texts(&before_text, &after_text)
}

/// Invariance check over an already-parsed "after" tree.
pub fn verify_invariance_tree(before: &RawHtml, after: &DomTree) -> InvarianceCheck {
    let before_text = crate::html::extract::extract_visible(before, ViewProfile::HumanView).text;
    let after_text = extract_from_tree(after, ViewProfile::HumanView).text;
    diff_texts(&before_text, &after_text)
}

fn diff_texts(before_text: &str, after_text: &str) -> InvarianceCheck {
    if before_text == after_text {
        return InvarianceCheck::Preserved;
    }
    let before_words: Vec<&str> = before_text.split(' ').collect();
    let after_words: Vec<&str> = after_text.split(' ').collect();
    let mut offset = 0;
    while offset < before_words.len()
        && offset < after_words.len()
        && before_words[offset] == after_words[offset]
    {
        offset += 1;
    }
    InvarianceCheck::Diff {
        word_offset: offset,
        before_excerpt: excerpt(&before_words, offset),
        after_excerpt: excerpt(&after_words, offset),
    }
}

fn excerpt(words: &[&str], around: usize) -> String {
    let start = around.saturating_sub(4);
    let end = (around + 5).min(words.len());
    let mut text = words[start..end].join(" ");
    if start > 0 {
        text.insert_str(0, "… ");
    }
    if end < words.len() {
        text.push_str(" …");
    }
    if text.is_empty() {
        "(end of text)".to_owned()
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::extract::extract_visible;
    use crate::html::policy::{baseline_notice, REFUSAL_TEMPLATE};
    use crate::model::{DefenseGoal, InjectionSpec, Stage, Visibility};

    fn sample_page() -> RawHtml {
        RawHtml::new(
            "<html><head><title>Shop</title></head><body>\
             <header><h1>Map Shop</h1></header>\
             <section><p>The shop opened in 1998.</p></section>\
             <section><p>It sells rare maps.</p></section>\
             <footer><p>Open weekdays only now.</p></footer>\
             </body></html>",
        )
        .unwrap()
    }

    fn policy(stage: Stage, position: Position, visibility: Visibility) -> DefensePolicy {
        let goal = DefenseGoal::Refusal;
        let (template, reps, markers) = match stage {
            Stage::Baseline => (None, 1, vec![]),
            Stage::Iteration2 => (Some(REFUSAL_TEMPLATE.to_owned()), 1, vec![]),
            Stage::Iteration3 => (
                Some(REFUSAL_TEMPLATE.to_owned()),
                3,
                crate::html::policy::default_strict_markers(),
            ),
        };
        DefensePolicy::new(
            goal.clone(),
            stage,
            baseline_notice(&goal),
            template,
            reps,
            markers,
            InjectionSpec { position, visibility },
        )
        .unwrap()
    }

    #[test]
    fn injection_preserves_the_human_view_everywhere() {
        let page = sample_page();
        for stage in Stage::ALL {
            for position in Position::ALL {
                for visibility in Visibility::ALL {
                    let outcome = inject(&page, &policy(stage, position, visibility)).unwrap();
                    assert!(
                        verify_invariance(&page, &outcome.page).is_preserved(),
                        "{stage} {position} {visibility}"
                    );
                    assert!(outcome.warnings.is_empty());
                }
            }
        }
    }

    #[test]
    fn injected_policy_reaches_the_machine_view() {
        let page = sample_page();
        let p = policy(Stage::Baseline, Position::Top, Visibility::HiddenBlock);
        let outcome = inject(&page, &p).unwrap();
        let machine = extract_visible(&outcome.page, ViewProfile::MachineView);
        assert!(machine.text.contains("AI systems are not permitted"));
    }

    #[test]
    fn double_injection_doubles_the_machine_text_but_not_the_human_view() {
        let page = sample_page();
        let p = policy(Stage::Baseline, Position::Top, Visibility::HiddenBlock);
        let once = inject(&page, &p).unwrap().page;
        let twice = inject(&once, &p).unwrap().page;
        let machine = extract_visible(&twice, ViewProfile::MachineView);
        assert_eq!(machine.text.matches("AI systems are not permitted").count(), 2);
        assert!(verify_invariance(&page, &twice).is_preserved());
    }

    #[test]
    fn top_places_the_block_before_existing_body_content() {
        let page = sample_page();
        let outcome =
            inject(&page, &policy(Stage::Baseline, Position::Top, Visibility::HiddenBlock))
                .unwrap();
        let html = outcome.page.as_str();
        let policy_at = html.find(POLICY_CONTAINER_ID).unwrap();
        let header_at = html.find("<header>").unwrap();
        assert!(policy_at < header_at);
    }

    #[test]
    fn middle_places_the_block_after_half_the_body_elements() {
        let page = sample_page();
        let outcome =
            inject(&page, &policy(Stage::Baseline, Position::Middle, Visibility::HiddenBlock))
                .unwrap();
        let tree = DomTree::parse(outcome.page.as_str());
        let body = tree.body_scope();
        let elements = tree.element_children(body);
        // 4 original elements → fragment lands after the 2nd, i.e. index 2.
        let tags: Vec<&str> =
            elements.iter().map(|&id| tree.element(id).unwrap().tag.as_str()).collect();
        assert_eq!(tags, vec!["header", "section", "div", "section", "footer"]);
    }

    #[test]
    fn bottom_places_the_block_last() {
        let page = sample_page();
        let outcome =
            inject(&page, &policy(Stage::Baseline, Position::Bottom, Visibility::HiddenBlock))
                .unwrap();
        let html = outcome.page.as_str();
        let policy_at = html.find(POLICY_CONTAINER_ID).unwrap();
        let footer_at = html.find("</footer>").unwrap();
        assert!(policy_at > footer_at);
    }

    #[test]
    fn meta_fragments_go_into_the_head_and_never_the_body() {
        let page = sample_page();
        for position in Position::ALL {
            let outcome =
                inject(&page, &policy(Stage::Iteration3, position, Visibility::MetaTag)).unwrap();
            let tree = DomTree::parse(outcome.page.as_str());
            let head = tree.first_element("head").unwrap();
            let metas_in_head = tree
                .element_children(head)
                .into_iter()
                .filter(|&id| tree.element(id).unwrap().tag == "meta")
                .count();
            assert!(metas_in_head >= 4, "{position}"); // policy meta + 3 enforcement metas
            let body = tree.first_element("body").unwrap();
            let body_metas = tree
                .find_elements(|el| el.tag == "meta")
                .into_iter()
                .filter(|&id| tree.top_level_ancestor(body, id).is_some())
                .count();
            assert_eq!(body_metas, 0, "{position}");
        }
    }

    #[test]
    fn block_fragments_never_change_the_head() {
        let page = sample_page();
        for position in Position::ALL {
            let outcome =
                inject(&page, &policy(Stage::Iteration3, position, Visibility::HiddenBlock))
                    .unwrap();
            let tree = DomTree::parse(outcome.page.as_str());
            let head = tree.first_element("head").unwrap();
            assert_eq!(tree.subtree_text(head), "Shop");
            assert_eq!(tree.element_children(head).len(), 1, "{position}");
        }
    }

    #[test]
    fn transparent_text_ambiguity_falls_back_to_a_hidden_block_with_a_warning() {
        let page = RawHtml::new(
            "<body><p style=\"color: transparent\">already ghosted</p><p>Visible text here.</p></body>",
        )
        .unwrap();
        let p = policy(Stage::Baseline, Position::Top, Visibility::TransparentText);
        let outcome = inject(&page, &p).unwrap();
        assert_eq!(outcome.warnings.len(), 1);
        assert!(outcome.page.as_str().contains("display: none"));
        assert!(verify_invariance(&page, &outcome.page).is_preserved());
        // The policy text still reaches machines.
        let machine = extract_visible(&outcome.page, ViewProfile::MachineView);
        assert!(machine.text.contains("AI systems are not permitted"));
    }

    #[test]
    fn manual_hidden_block_edit_passes_verification() {
        let page = sample_page();
        let edited = RawHtml::new(page.as_str().replace(
            "<body>",
            "<body><div style=\"display: none; position: absolute; visibility: hidden;\" \
             aria-hidden=\"true\">hand-written policy text</div>",
        ))
        .unwrap();
        assert!(verify_invariance(&page, &edited).is_preserved());
    }

    #[test]
    fn visible_edits_are_localized_by_the_diff() {
        let page = sample_page();
        let edited = RawHtml::new(
            page.as_str().replace("It sells rare maps.", "It sells common maps."),
        )
        .unwrap();
        match verify_invariance(&page, &edited) {
            InvarianceCheck::Diff { word_offset, before_excerpt, after_excerpt } => {
                assert!(before_excerpt.contains("rare"));
                assert!(after_excerpt.contains("common"));
                assert!(word_offset > 0);
            }
            InvarianceCheck::Preserved => panic!("visible edit must be detected"),
        }
    }

    #[test]
    fn fragment_documents_without_body_still_take_injections() {
        let page = RawHtml::new("<p>Loose fragment one.</p><p>And fragment two.</p>").unwrap();
        for visibility in Visibility::ALL {
            let p = policy(Stage::Baseline, Position::Middle, visibility);
            let outcome = inject(&page, &p).unwrap();
            assert!(verify_invariance(&page, &outcome.page).is_preserved(), "{visibility}");
            let machine = extract_visible(&outcome.page, ViewProfile::MachineView);
            assert!(machine.text.contains("AI systems are not permitted"), "{visibility}");
        }
    }
}
