//! A small recovery HTML parser. Any input yields a document tree: unclosed
//! tags close implicitly, stray close tags are ignored, and attribute syntax
//! is tolerated loosely. The tree supports child insertion and deterministic
//! re-serialization, which is what policy injection needs.

use crate::text::normalize;

/// Index of a node inside its [`DomTree`] arena.
pub type NodeId = usize;

/// Elements that never take children.
const VOID_ELEMENTS: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param",
    "source", "track", "wbr",
];

/// Elements whose content is raw text until the matching close tag.
const RAW_TEXT_ELEMENTS: [&str; 2] = ["script", "style"];

/// Elements whose text never reaches any extracted view.
const NON_TEXT_ELEMENTS: [&str; 4] = ["script", "style", "noscript", "template"];

pub fn is_void_element(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

pub fn is_raw_text_element(tag: &str) -> bool {
    RAW_TEXT_ELEMENTS.contains(&tag)
}

/// True for elements whose textual content is never treated as page text
/// (scripts, styles, and their kin).
pub fn is_non_text_element(tag: &str) -> bool {
    NON_TEXT_ELEMENTS.contains(&tag)
}

/// An element tag with its attributes (names lowercased, values stored as
/// written, i.e. entities undecoded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
}

impl Element {
    /// Raw (undecoded) value of an attribute, if present.
    pub fn attr_raw(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    /// Entity-decoded value of an attribute, if present.
    pub fn attr(&self, name: &str) -> Option<String> {
        self.attr_raw(name).map(decode_entities)
    }
}

/// Node payload variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Synthetic document root.
    Document,
    Element(Element),
    /// Raw text as written (entities undecoded).
    Text(String),
    /// Comment body, without the `<!--`/`-->` fences.
    Comment(String),
    /// Declaration body, without the `<!`/`>` fences (doctype and kin).
    Declaration(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub kind: NodeKind,
}

/// Arena-backed document tree.
#[derive(Debug, Clone)]
pub struct DomTree {
    nodes: Vec<Node>,
}

impl DomTree {
    pub const ROOT: NodeId = 0;

    /// Parse any input into a tree; never fails.
    pub fn parse(input: &str) -> DomTree {
        Parser::new(input).run()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn element(&self, id: NodeId) -> Option<&Element> {
        match &self.nodes[id].kind {
            NodeKind::Element(el) => Some(el),
            _ => None,
        }
    }

    fn push_node(&mut self, parent: NodeId, kind: NodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), children: Vec::new(), kind });
        self.nodes[parent].children.push(id);
        id
    }

    /// Depth-first pre-order walk of the whole document.
    pub fn walk(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            order.push(id);
            for &child in self.nodes[id].children.iter().rev() {
                stack.push(child);
            }
        }
        order
    }

    /// All element nodes satisfying `pred`, in document order.
    pub fn find_elements<F: Fn(&Element) -> bool>(&self, pred: F) -> Vec<NodeId> {
        self.walk()
            .into_iter()
            .filter(|&id| self.element(id).is_some_and(&pred))
            .collect()
    }

    /// First element with the given tag, in document order.
    pub fn first_element(&self, tag: &str) -> Option<NodeId> {
        self.find_elements(|el| el.tag == tag).into_iter().next()
    }

    /// The node that plays the role of `<body>`: the body element if the
    /// document has one, otherwise the document root (fragment documents).
    pub fn body_scope(&self) -> NodeId {
        self.first_element("body").unwrap_or(Self::ROOT)
    }

    /// The node that receives `<meta>` fragments: the head element if
    /// present, otherwise the document root.
    pub fn head_scope(&self) -> NodeId {
        self.first_element("head").unwrap_or(Self::ROOT)
    }

    /// Element children of a node, in order.
    pub fn element_children(&self, id: NodeId) -> Vec<NodeId> {
        self.children(id)
            .iter()
            .copied()
            .filter(|&c| self.element(c).is_some())
            .collect()
    }

    /// The ancestor of `id` that is a direct child of `scope`, if any.
    pub fn top_level_ancestor(&self, scope: NodeId, id: NodeId) -> Option<NodeId> {
        let mut current = id;
        while let Some(parent) = self.nodes[current].parent {
            if parent == scope {
                return Some(current);
            }
            current = parent;
        }
        None
    }

    /// Insert the top-level nodes of `fragment` as children of `parent` at
    /// child index `index` (clamped to the child count).
    pub fn insert_fragment(&mut self, parent: NodeId, index: usize, fragment: &DomTree) {
        let mapped = self.adopt(fragment, DomTree::ROOT, parent);
        let child_count = self.nodes[parent].children.len();
        let index = index.min(child_count - mapped);
        // adopt() appended the new ids; move them to the requested slot.
        let appended = self.nodes[parent].children.split_off(child_count - mapped);
        for (offset, id) in appended.into_iter().enumerate() {
            self.nodes[parent].children.insert(index + offset, id);
        }
    }

    /// Copy the children of `src_parent` in `other` under `dst_parent` here;
    /// returns how many top-level nodes were adopted.
    fn adopt(&mut self, other: &DomTree, src_parent: NodeId, dst_parent: NodeId) -> usize {
        let child_ids: Vec<NodeId> = other.children(src_parent).to_vec();
        for src in &child_ids {
            self.adopt_node(other, *src, dst_parent);
        }
        child_ids.len()
    }

    fn adopt_node(&mut self, other: &DomTree, src: NodeId, dst_parent: NodeId) {
        let id = self.push_node(dst_parent, other.nodes[src].kind.clone());
        for child in other.children(src).to_vec() {
            self.adopt_node(other, child, id);
        }
        let _ = id;
    }

    /// Serialize the document back to HTML.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for &child in self.children(Self::ROOT) {
            self.serialize_node(child, &mut out);
        }
        out
    }

    fn serialize_node(&self, id: NodeId, out: &mut String) {
        match &self.nodes[id].kind {
            NodeKind::Document => {}
            NodeKind::Text(raw) => out.push_str(raw),
            NodeKind::Comment(raw) => {
                out.push_str("<!--");
                out.push_str(raw);
                out.push_str("-->");
            }
            NodeKind::Declaration(raw) => {
                out.push_str("<!");
                out.push_str(raw);
                out.push('>');
            }
            NodeKind::Element(el) => {
                out.push('<');
                out.push_str(&el.tag);
                for (name, value) in &el.attrs {
                    out.push(' ');
                    out.push_str(name);
                    out.push_str("=\"");
                    if value.contains('"') {
                        out.push_str(&value.replace('"', "&quot;"));
                    } else {
                        out.push_str(value);
                    }
                    out.push('"');
                }
                out.push('>');
                if is_void_element(&el.tag) {
                    return;
                }
                for &child in self.children(id) {
                    self.serialize_node(child, out);
                }
                out.push_str("</");
                out.push_str(&el.tag);
                out.push('>');
            }
        }
    }

    /// Normalized, entity-decoded text of a subtree, ignoring script/style
    /// content. Visibility is NOT considered — this is the raw DOM text.
    pub fn subtree_text(&self, id: NodeId) -> String {
        let mut buf = String::new();
        self.collect_text(id, &mut buf);
        normalize(&buf)
    }

    fn collect_text(&self, id: NodeId, buf: &mut String) {
        match &self.nodes[id].kind {
            NodeKind::Text(raw) => {
                buf.push(' ');
                buf.push_str(&decode_entities(raw));
            }
            NodeKind::Element(el) if is_non_text_element(&el.tag) => {}
            NodeKind::Comment(_) | NodeKind::Declaration(_) => {}
            _ => {
                for &child in self.children(id) {
                    self.collect_text(child, buf);
                }
            }
        }
    }
}

/// Decode the common named entities plus numeric character references.
/// Unknown sequences pass through literally.
pub fn decode_entities(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < raw.len() {
        if bytes[i] != b'&' {
            let ch = raw[i..].chars().next().expect("in-bounds char");
            out.push(ch);
            i += ch.len_utf8();
            continue;
        }
        let rest = &raw[i..];
        let semi = match rest.find(';') {
            Some(p) if p <= 10 => p,
            _ => {
                out.push('&');
                i += 1;
                continue;
            }
        };
        let name = &rest[1..semi];
        let decoded = match name {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some('\u{a0}'),
            _ => decode_numeric_entity(name),
        };
        match decoded {
            Some(ch) => {
                out.push(ch);
                i += semi + 1;
            }
            None => {
                out.push('&');
                i += 1;
            }
        }
    }
    out
}

fn decode_numeric_entity(name: &str) -> Option<char> {
    let code = if let Some(hex) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
        u32::from_str_radix(hex, 16).ok()?
    } else if let Some(dec) = name.strip_prefix('#') {
        dec.parse::<u32>().ok()?
    } else {
        return None;
    };
    char::from_u32(code)
}

/// Escape text for use inside a double-quoted attribute value.
pub fn escape_attr(value: &str) -> String {
    value
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('"', "&quot;")
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
    tree: DomTree,
    /// Open element stack (element NodeIds).
    stack: Vec<NodeId>,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Parser {
            input,
            pos: 0,
            tree: DomTree {
                nodes: vec![Node { parent: None, children: Vec::new(), kind: NodeKind::Document }],
            },
            stack: Vec::new(),
        }
    }

    fn current_parent(&self) -> NodeId {
        *self.stack.last().unwrap_or(&DomTree::ROOT)
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn run(mut self) -> DomTree {
        while self.pos < self.input.len() {
            match self.rest().find('<') {
                None => {
                    self.push_text(self.pos, self.input.len());
                    break;
                }
                Some(offset) => {
                    self.push_text(self.pos, self.pos + offset);
                    self.pos += offset;
                    self.consume_markup();
                }
            }
        }
        self.tree
    }

    fn push_text(&mut self, start: usize, end: usize) {
        if end > start {
            let parent = self.current_parent();
            self.tree.push_node(parent, NodeKind::Text(self.input[start..end].to_owned()));
        }
    }

    /// Consume one construct starting at `<`.
    fn consume_markup(&mut self) {
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix("<!--") {
            let (content, consumed) = match body.find("-->") {
                Some(p) => (&body[..p], 4 + p + 3),
                None => (body, rest.len()),
            };
            let parent = self.current_parent();
            self.tree.push_node(parent, NodeKind::Comment(content.to_owned()));
            self.pos += consumed;
        } else if rest.starts_with("<!") {
            let (content, consumed) = match rest.find('>') {
                Some(p) => (&rest[2..p], p + 1),
                None => (&rest[2..], rest.len()),
            };
            let parent = self.current_parent();
            self.tree.push_node(parent, NodeKind::Declaration(content.to_owned()));
            self.pos += consumed;
        } else if let Some(body) = rest.strip_prefix("</") {
            self.consume_close_tag(body);
        } else if rest[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
            self.consume_open_tag();
        } else {
            // A lone `<` (e.g. `< 5`); treat it as literal text.
            let parent = self.current_parent();
            self.tree.push_node(parent, NodeKind::Text("<".to_owned()));
            self.pos += 1;
        }
    }

    fn consume_close_tag(&mut self, body: &str) {
        let name: String = body
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == ':')
            .collect::<String>()
            .to_ascii_lowercase();
        let consumed = match body.find('>') {
            Some(p) => 2 + p + 1,
            None => self.rest().len(),
        };
        self.pos += consumed;
        if name.is_empty() {
            return;
        }
        // Close through the nearest matching open element; ignore strays.
        if let Some(depth) = self
            .stack
            .iter()
            .rposition(|&id| self.tree.element(id).is_some_and(|el| el.tag == name))
        {
            self.stack.truncate(depth);
        }
    }

    fn consume_open_tag(&mut self) {
        let rest = self.rest();
        let mut chars = rest[1..].char_indices();
        let mut name_end = 1;
        for (i, c) in chars.by_ref() {
            if c.is_ascii_alphanumeric() || c == '-' || c == ':' {
                name_end = 1 + i + c.len_utf8();
            } else {
                break;
            }
        }
        let tag = rest[1..name_end].to_ascii_lowercase();
        let mut cursor = name_end;
        let mut attrs = Vec::new();
        let mut self_closing = false;
        loop {
            cursor += leading_ws(&rest[cursor..]);
            if cursor >= rest.len() {
                break;
            }
            if rest[cursor..].starts_with("/>") {
                self_closing = true;
                cursor += 2;
                break;
            }
            if rest[cursor..].starts_with('>') {
                cursor += 1;
                break;
            }
            if rest[cursor..].starts_with('/') {
                cursor += 1;
                continue;
            }
            let (attr, used) = parse_attr(&rest[cursor..]);
            if used == 0 {
                cursor += 1; // skip junk byte
                continue;
            }
            if let Some(attr) = attr {
                attrs.push(attr);
            }
            cursor += used;
        }
        self.pos += cursor;

        let parent = self.current_parent();
        let id = self.tree.push_node(parent, NodeKind::Element(Element { tag: tag.clone(), attrs }));
        if self_closing || is_void_element(&tag) {
            return;
        }
        if is_raw_text_element(&tag) {
            self.consume_raw_text(id, &tag);
            return;
        }
        self.stack.push(id);
    }

    /// Raw-text content runs to the matching close tag (case-insensitive).
    fn consume_raw_text(&mut self, element: NodeId, tag: &str) {
        let rest = self.rest();
        let needle = format!("</{tag}");
        let lower = rest.to_ascii_lowercase();
        match lower.find(&needle) {
            Some(p) => {
                if p > 0 {
                    self.tree.push_node(element, NodeKind::Text(rest[..p].to_owned()));
                }
                let after = &rest[p..];
                let consumed = after.find('>').map_or(after.len(), |q| q + 1);
                self.pos += p + consumed;
            }
            None => {
                if !rest.is_empty() {
                    self.tree.push_node(element, NodeKind::Text(rest.to_owned()));
                }
                self.pos = self.input.len();
            }
        }
    }
}

fn leading_ws(s: &str) -> usize {
    s.len() - s.trim_start().len()
}

/// Parse one attribute at the start of `s`; returns (attribute, bytes used).
fn parse_attr(s: &str) -> (Option<(String, String)>, usize) {
    let name_len = s
        .find(|c: char| c.is_whitespace() || c == '=' || c == '>' || c == '/')
        .unwrap_or(s.len());
    if name_len == 0 {
        return (None, 0);
    }
    let name = s[..name_len].to_ascii_lowercase();
    let mut cursor = name_len;
    cursor += leading_ws(&s[cursor..]);
    if !s[cursor..].starts_with('=') {
        return (Some((name, String::new())), name_len);
    }
    cursor += 1;
    cursor += leading_ws(&s[cursor..]);
    let value_part = &s[cursor..];
    if let Some(quote) = value_part.chars().next().filter(|c| *c == '"' || *c == '\'') {
        let inner = &value_part[1..];
        match inner.find(quote) {
            Some(end) => (Some((name, inner[..end].to_owned())), cursor + 1 + end + 1),
            None => (Some((name, inner.to_owned())), s.len()),
        }
    } else {
        let end = value_part
            .find(|c: char| c.is_whitespace() || c == '>')
            .unwrap_or(value_part.len());
        (Some((name, value_part[..end].to_owned())), cursor + end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_simple_document() {
        let tree = DomTree::parse("<html><body><p>Hello <b>world</b></p></body></html>");
        let body = tree.first_element("body").unwrap();
        assert_eq!(tree.element_children(body).len(), 1);
        assert_eq!(tree.subtree_text(body), "Hello world");
    }

    #[test]
    fn recovers_from_unclosed_and_stray_tags() {
        let tree = DomTree::parse("<div><p>one<p>two</missing></div>after");
        assert_eq!(tree.subtree_text(DomTree::ROOT), "one two after");
        // Unclosed <p> is closed implicitly; stray </missing> is ignored.
        let div = tree.first_element("div").unwrap();
        assert_eq!(tree.subtree_text(div), "one two");
    }

    #[test]
    fn handles_attribute_syntax_variants() {
        let tree = DomTree::parse(r#"<div id=main class="a b" data-x='q' hidden>x</div>"#);
        let el = tree.element(tree.first_element("div").unwrap()).unwrap();
        assert_eq!(el.attr_raw("id"), Some("main"));
        assert_eq!(el.attr_raw("class"), Some("a b"));
        assert_eq!(el.attr_raw("data-x"), Some("q"));
        assert_eq!(el.attr_raw("hidden"), Some(""));
    }

    #[test]
    fn script_and_style_bodies_are_raw_and_excluded_from_text() {
        let html = "<script>if (a < b) { run('</div>'); }</script><p>seen</p>";
        // The `</div>` inside the string does not break out of the script.
        let tree = DomTree::parse(html);
        assert_eq!(tree.subtree_text(DomTree::ROOT), "seen");
        assert!(tree.serialize().contains("if (a < b)"));
    }

    #[test]
    fn comments_and_doctype_round_trip_but_carry_no_text() {
        let html = "<!doctype html><!-- secret note --><p>visible</p>";
        let tree = DomTree::parse(html);
        assert_eq!(tree.subtree_text(DomTree::ROOT), "visible");
        let out = tree.serialize();
        assert!(out.contains("<!doctype html>"));
        assert!(out.contains("<!-- secret note -->"));
    }

    #[test]
    fn void_elements_take_no_children() {
        let tree = DomTree::parse(r#"<meta name="a" content="b"><p>text</p>"#);
        let meta = tree.first_element("meta").unwrap();
        assert!(tree.children(meta).is_empty());
        assert_eq!(tree.subtree_text(DomTree::ROOT), "text");
    }

    #[test]
    fn entities_decode_in_text_and_attributes() {
        let tree = DomTree::parse(r#"<p title="a &amp; b">x &lt; y&#33;</p>"#);
        assert_eq!(tree.subtree_text(DomTree::ROOT), "x < y!");
        let p = tree.element(tree.first_element("p").unwrap()).unwrap();
        assert_eq!(p.attr("title").unwrap(), "a & b");
    }

    #[test]
    fn serialization_is_stable_after_one_round_trip() {
        let messy = "<div class=box><p>one<p>two &amp; three<br></div>";
        let once = DomTree::parse(messy).serialize();
        let twice = DomTree::parse(&once).serialize();
        assert_eq!(once, twice);
    }

    #[test]
    fn insert_fragment_places_nodes_at_the_requested_child_index() {
        let mut tree = DomTree::parse("<body><p>a</p><p>b</p></body>");
        let fragment = DomTree::parse("<div>mid</div>");
        let body = tree.first_element("body").unwrap();
        tree.insert_fragment(body, 1, &fragment);
        assert_eq!(tree.subtree_text(body), "a mid b");
        let serialized = tree.serialize();
        assert!(serialized.contains("<p>a</p><div>mid</div><p>b</p>"));
    }

    #[test]
    fn body_scope_falls_back_to_the_root_for_fragments() {
        let tree = DomTree::parse("<p>loose fragment</p>");
        assert_eq!(tree.body_scope(), DomTree::ROOT);
        let full = DomTree::parse("<html><body><p>x</p></body></html>");
        assert_eq!(full.body_scope(), full.first_element("body").unwrap());
    }

    #[test]
    fn top_level_ancestor_resolves_nesting() {
        let tree = DomTree::parse("<body><div><p><em>deep</em></p></div><p>flat</p></body>");
        let body = tree.first_element("body").unwrap();
        let em = tree.first_element("em").unwrap();
        let anchor = tree.top_level_ancestor(body, em).unwrap();
        assert_eq!(tree.element(anchor).unwrap().tag, "div");
    }
}
