//! Text extraction under two reader profiles: what a human visitor sees in a
//! browser, and what a page-reading machine ingests.

use serde::{Deserialize, Serialize};

use crate::html::dom::{decode_entities, is_non_text_element, DomTree, Element, NodeId, NodeKind};
use crate::model::RawHtml;
use crate::text::RenderedText;

/// Which reader the extraction models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewProfile {
    /// Browser-rendered text only: head content, scripts, styles, comments,
    /// hidden elements (`display: none`, `visibility: hidden`,
    /// `aria-hidden="true"`), and fully transparent text are all excluded.
    HumanView,
    /// Everything a source-reading parser ingests: all element text
    /// (including hidden and transparent blocks) plus `<meta>` `content`
    /// attributes. Script/style/comment bodies stay excluded — they are
    /// code, not page text.
    MachineView,
}

/// Extract the text of `page` as seen by `profile`.
pub fn extract_visible(page: &RawHtml, profile: ViewProfile) -> RenderedText {
    let tree = DomTree::parse(page.as_str());
    extract_from_tree(&tree, profile)
}

/// Extraction over an already-parsed tree.
pub fn extract_from_tree(tree: &DomTree, profile: ViewProfile) -> RenderedText {
    let mut buf = String::new();
    collect(tree, DomTree::ROOT, profile, &mut buf);
    RenderedText::from_raw(&buf)
}

fn collect(tree: &DomTree, id: NodeId, profile: ViewProfile, buf: &mut String) {
    match &tree.node(id).kind {
        NodeKind::Text(raw) => {
            buf.push(' ');
            buf.push_str(&decode_entities(raw));
        }
        NodeKind::Comment(_) | NodeKind::Declaration(_) => {}
        NodeKind::Document => {
            for &child in tree.children(id) {
                collect(tree, child, profile, buf);
            }
        }
        NodeKind::Element(el) => {
            if is_non_text_element(&el.tag) {
                return;
            }
            match profile {
                ViewProfile::HumanView => {
                    if el.tag == "head" || el.tag == "meta" || is_hidden_from_humans(el) {
                        return;
                    }
                }
                ViewProfile::MachineView => {
                    if el.tag == "meta" {
                        if let Some(content) = el.attr("content") {
                            buf.push(' ');
                            buf.push_str(&content);
                        }
                        return;
                    }
                }
            }
            for &child in tree.children(id) {
                collect(tree, child, profile, buf);
            }
        }
    }
}

/// True when the element (and so its subtree) is invisible to a human
/// visitor: `display: none`, `visibility: hidden`, `aria-hidden="true"`, or
/// a fully transparent text color.
pub fn is_hidden_from_humans(el: &Element) -> bool {
    if el
        .attr("aria-hidden")
        .is_some_and(|v| v.trim().eq_ignore_ascii_case("true"))
    {
        return true;
    }
    let Some(style) = el.attr("style") else {
        return false;
    };
    for (prop, value) in style_props(&style) {
        let hidden = match prop.as_str() {
            "display" => value == "none",
            "visibility" => value == "hidden",
            "color" => is_fully_transparent(&value),
            _ => false,
        };
        if hidden {
            return true;
        }
    }
    false
}

/// True when the element carries a fully transparent text color — the
/// marker of transparent-text policy blocks.
pub fn has_transparent_text_color(el: &Element) -> bool {
    el.attr("style").is_some_and(|style| {
        style_props(&style)
            .iter()
            .any(|(prop, value)| prop == "color" && is_fully_transparent(value))
    })
}

/// Parse an inline style attribute into lowercased (property, value) pairs.
pub fn style_props(style: &str) -> Vec<(String, String)> {
    style
        .split(';')
        .filter_map(|decl| {
            let (prop, value) = decl.split_once(':')?;
            let prop = prop.trim().to_ascii_lowercase();
            let value = value.trim().to_ascii_lowercase();
            (!prop.is_empty() && !value.is_empty()).then_some((prop, value))
        })
        .collect()
}

/// Recognize color values with zero alpha: `transparent`, `rgba`/`hsla`
/// with a 0 alpha component, and 4/8-digit hex with a zero alpha channel.
fn is_fully_transparent(value: &str) -> bool {
    let value = value.trim();
    if value == "transparent" {
        return true;
    }
    if let Some(hex) = value.strip_prefix('#') {
        let alpha = match hex.len() {
            4 => hex.get(3..4),
            8 => hex.get(6..8),
            _ => None,
        };
        return alpha.is_some_and(|a| a.chars().all(|c| c == '0'));
    }
    if (value.starts_with("rgba(") || value.starts_with("hsla(")) && value.ends_with(')') {
        let inner = &value[5..value.len() - 1];
        let last = inner
            .rsplit(|c| c == ',' || c == '/')
            .next()
            .map(str::trim)
            .unwrap_or("");
        return matches!(last.parse::<f64>(), Ok(alpha) if alpha == 0.0)
            || last == "0%";
    }
    false
}
