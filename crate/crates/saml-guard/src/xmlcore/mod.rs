//! Secure XML parsing into an immutable, namespace-aware document model.
//!
//! The model keeps stable node identities (document-order integers), separates
//! namespace declarations from ordinary attributes, and carries an explicit
//! Id-attribute registry so fragment references are never resolved by
//! scanning. Parsing never performs I/O beyond the provided input and rejects
//! DTDs, external entities and oversized or over-nested input outright.

mod edit;
mod parser;

pub(crate) use edit::{EditId, TreeEditor};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Namespace URI implicitly bound to the `xml` prefix.
pub const XML_NAMESPACE: &str = "http://www.w3.org/XML/1998/namespace";
/// Namespace URI reserved for namespace declarations themselves.
pub const XMLNS_NAMESPACE: &str = "http://www.w3.org/2000/xmlns/";

/// Expanded element or attribute name.
///
/// Equality, ordering and hashing consider `(namespace_uri, local_name)`
/// only; the prefix is kept for serialization but never participates in
/// comparisons.
#[derive(Clone, Debug, Default)]
pub struct QName {
    pub namespace_uri: String,
    pub local_name: String,
    pub prefix: String,
}

impl QName {
    pub fn new(namespace_uri: impl Into<String>, local_name: impl Into<String>) -> Self {
        QName {
            namespace_uri: namespace_uri.into(),
            local_name: local_name.into(),
            prefix: String::new(),
        }
    }

    pub fn prefixed(
        namespace_uri: impl Into<String>,
        local_name: impl Into<String>,
        prefix: impl Into<String>,
    ) -> Self {
        QName {
            namespace_uri: namespace_uri.into(),
            local_name: local_name.into(),
            prefix: prefix.into(),
        }
    }

    /// Name in no namespace.
    pub fn local(local_name: impl Into<String>) -> Self {
        QName::new("", local_name)
    }

    fn key(&self) -> (&str, &str) {
        (&self.namespace_uri, &self.local_name)
    }
}

impl PartialEq for QName {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for QName {}

impl PartialOrd for QName {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QName {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl std::hash::Hash for QName {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace_uri.is_empty() {
            write!(f, "{}", self.local_name)
        } else {
            write!(f, "{{{}}}{}", self.namespace_uri, self.local_name)
        }
    }
}

/// Stable, document-scoped node identifier assigned in document order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub(crate) fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attribute {
    pub name: QName,
    pub value: String,
}

/// Node payload; elements carry attributes and the namespace declarations
/// written on their start tag.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Element {
        name: QName,
        attributes: Vec<Attribute>,
        /// `(prefix, uri)` pairs; the default declaration uses an empty
        /// prefix, and `xmlns=""` is recorded as an empty uri.
        namespace_declarations: Vec<(String, String)>,
    },
    Text(String),
    Comment(String),
    ProcessingInstruction {
        target: String,
        data: String,
    },
}

#[derive(Clone, Debug)]
pub struct XmlNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl XmlNode {
    pub fn is_element(&self) -> bool {
        matches!(self.kind, NodeKind::Element { .. })
    }

    pub fn name(&self) -> Option<&QName> {
        match &self.kind {
            NodeKind::Element { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn attributes(&self) -> &[Attribute] {
        match &self.kind {
            NodeKind::Element { attributes, .. } => attributes,
            _ => &[],
        }
    }

    pub fn namespace_declarations(&self) -> &[(String, String)] {
        match &self.kind {
            NodeKind::Element {
                namespace_declarations,
                ..
            } => namespace_declarations,
            _ => &[],
        }
    }

    pub fn attribute(&self, name: &QName) -> Option<&str> {
        self.attributes()
            .iter()
            .find(|a| &a.name == name)
            .map(|a| a.value.as_str())
    }
}

/// Parser limits and hardening switches.
#[derive(Clone)]
pub struct ParseOptions {
    /// Reject any DOCTYPE declaration.
    pub forbid_dtd: bool,
    /// Reject external entity and external DTD subset constructs.
    pub forbid_external_entities: bool,
    pub max_depth: usize,
    pub max_input_bytes: usize,
    pub max_attribute_count_per_element: usize,
    /// Invoked if the parser ever attempted to resolve an external resource.
    /// The parser never calls it; tests install a hook that fails the test.
    pub resolver_probe: Option<Arc<dyn Fn(&str) + Send + Sync>>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            forbid_dtd: true,
            forbid_external_entities: true,
            max_depth: 100,
            max_input_bytes: 10_000_000,
            max_attribute_count_per_element: 256,
            resolver_probe: None,
        }
    }
}

impl fmt::Debug for ParseOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParseOptions")
            .field("forbid_dtd", &self.forbid_dtd)
            .field("forbid_external_entities", &self.forbid_external_entities)
            .field("max_depth", &self.max_depth)
            .field("max_input_bytes", &self.max_input_bytes)
            .field(
                "max_attribute_count_per_element",
                &self.max_attribute_count_per_element,
            )
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum XmlError {
    #[error("malformed XML at {line}:{column}: {message}")]
    MalformedXml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("DOCTYPE declarations are forbidden (at {line}:{column})")]
    DtdForbidden { line: usize, column: usize },
    #[error("external entity constructs are forbidden (at {line}:{column})")]
    ExternalEntityForbidden { line: usize, column: usize },
    #[error("element nesting exceeds the configured depth limit of {limit}")]
    DepthLimitExceeded { limit: usize },
    #[error("input of {actual} bytes exceeds the configured limit of {limit}")]
    SizeLimitExceeded { actual: usize, limit: usize },
    #[error(
        "element carries more than {limit} attributes (at {line}:{column})"
    )]
    AttributeLimitExceeded {
        limit: usize,
        line: usize,
        column: usize,
    },
    #[error("undeclared namespace prefix '{prefix}' at {line}:{column}")]
    UndeclaredPrefix {
        prefix: String,
        line: usize,
        column: usize,
    },
    #[error("duplicate Id value '{value}' on {first} and {second}")]
    DuplicateIdValue {
        value: String,
        first: NodeId,
        second: NodeId,
    },
    #[error("empty Id value on {node}")]
    InvalidIdValue { node: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Immutable namespace-aware document.
///
/// All operations are pure; [`XmlDocument::register_id_attribute`] returns a
/// new document value rather than mutating in place, so documents can be
/// shared freely across threads.
#[derive(Clone, Debug)]
pub struct XmlDocument {
    nodes: Arc<Vec<XmlNode>>,
    root: NodeId,
    prolog: Vec<NodeId>,
    epilog: Vec<NodeId>,
    id_registry: BTreeMap<String, NodeId>,
    source_bytes_length: usize,
}

/// Parse a byte sequence into a document under the given limits.
pub fn parse(input: &[u8], options: &ParseOptions) -> Result<XmlDocument, XmlError> {
    parser::parse_document(input, options)
}

impl XmlDocument {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &XmlNode {
        &self.nodes[id.index()]
    }

    pub fn get(&self, id: NodeId) -> Option<&XmlNode> {
        self.nodes.get(id.index())
    }

    pub fn source_bytes_length(&self) -> usize {
        self.source_bytes_length
    }

    pub fn id_registry(&self) -> &BTreeMap<String, NodeId> {
        &self.id_registry
    }

    pub fn lookup_id(&self, value: &str) -> Option<NodeId> {
        self.id_registry.get(value).copied()
    }

    /// Document-order iterator over the subtree rooted at `node`.
    pub fn descendants(&self, node: NodeId) -> Descendants<'_> {
        Descendants {
            doc: self,
            stack: vec![node],
        }
    }

    /// In-scope namespace bindings at `node`, computed by walking ancestors.
    /// The returned map includes the implicit `xml` binding and maps the
    /// empty prefix to the default namespace (absent when undeclared).
    pub fn in_scope_namespaces(&self, node: NodeId) -> BTreeMap<String, String> {
        let mut chain = Vec::new();
        let mut cur = Some(node);
        while let Some(id) = cur {
            chain.push(id);
            cur = self.node(id).parent;
        }
        let mut scope = BTreeMap::new();
        scope.insert("xml".to_string(), XML_NAMESPACE.to_string());
        for id in chain.into_iter().rev() {
            for (prefix, uri) in self.node(id).namespace_declarations() {
                if prefix.is_empty() && uri.is_empty() {
                    scope.remove("");
                } else {
                    scope.insert(prefix.clone(), uri.clone());
                }
            }
        }
        scope
    }

    /// All elements matching `name`, in document order. This exists solely
    /// for the naive demonstration mode; the secure pipeline never calls it.
    pub fn find_by_tag_name(&self, name: &QName) -> Vec<NodeId> {
        self.descendants(self.root)
            .filter(|&id| self.node(id).name() == Some(name))
            .collect()
    }

    /// Register every element carrying attribute `attr` into the Id
    /// registry, keyed by the attribute value. Clears any previous entries;
    /// duplicate values are a hard error (possible Id-collision attack).
    pub fn register_id_attribute(
        &self,
        attr: &QName,
    ) -> Result<(XmlDocument, usize), XmlError> {
        let mut entries = Vec::new();
        for id in self.descendants(self.root) {
            if let Some(value) = self.node(id).attribute(attr) {
                entries.push((value.to_string(), id));
            }
        }
        let count = entries.len();
        let doc = self.with_id_entries(entries)?;
        Ok((doc, count))
    }

    /// Replace the registry with the given `(value, node)` entries.
    /// Duplicate values and empty values are rejected.
    pub(crate) fn with_id_entries(
        &self,
        entries: Vec<(String, NodeId)>,
    ) -> Result<XmlDocument, XmlError> {
        let mut registry = BTreeMap::new();
        for (value, node) in entries {
            if value.is_empty() {
                return Err(XmlError::InvalidIdValue { node });
            }
            if let Some(&first) = registry.get(&value) {
                if first != node {
                    return Err(XmlError::DuplicateIdValue {
                        value,
                        first,
                        second: node,
                    });
                }
                continue;
            }
            registry.insert(value, node);
        }
        let mut doc = self.clone();
        doc.id_registry = registry;
        Ok(doc)
    }

    /// Non-canonical UTF-8 serialization of the subtree rooted at `node`,
    /// preserving prefixes and attribute order as parsed.
    pub fn serialize(&self, node: NodeId) -> Result<Vec<u8>, XmlError> {
        if self.get(node).is_none() {
            return Err(XmlError::UnknownNode(node));
        }
        let mut out = Vec::new();
        self.write_node(node, &mut out);
        Ok(out)
    }

    /// Whole-document serialization including prolog and epilog nodes.
    pub fn serialize_document(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for &id in &self.prolog {
            self.write_node(id, &mut out);
            out.push(b'\n');
        }
        self.write_node(self.root, &mut out);
        for &id in &self.epilog {
            out.push(b'\n');
            self.write_node(id, &mut out);
        }
        out
    }

    fn write_node(&self, id: NodeId, out: &mut Vec<u8>) {
        let node = self.node(id);
        match &node.kind {
            NodeKind::Element {
                name,
                attributes,
                namespace_declarations,
            } => {
                out.push(b'<');
                out.extend_from_slice(tag_name(name).as_bytes());
                for (prefix, uri) in namespace_declarations {
                    if prefix.is_empty() {
                        out.extend_from_slice(b" xmlns=\"");
                    } else {
                        out.extend_from_slice(b" xmlns:");
                        out.extend_from_slice(prefix.as_bytes());
                        out.extend_from_slice(b"=\"");
                    }
                    escape_attr_into(uri, out);
                    out.push(b'"');
                }
                for attr in attributes {
                    out.push(b' ');
                    out.extend_from_slice(tag_name(&attr.name).as_bytes());
                    out.extend_from_slice(b"=\"");
                    escape_attr_into(&attr.value, out);
                    out.push(b'"');
                }
                if node.children.is_empty() {
                    out.extend_from_slice(b"/>");
                } else {
                    out.push(b'>');
                    for &child in &node.children {
                        self.write_node(child, out);
                    }
                    out.extend_from_slice(b"</");
                    out.extend_from_slice(tag_name(name).as_bytes());
                    out.push(b'>');
                }
            }
            NodeKind::Text(text) => escape_text_into(text, out),
            NodeKind::Comment(text) => {
                out.extend_from_slice(b"<!--");
                out.extend_from_slice(text.as_bytes());
                out.extend_from_slice(b"-->");
            }
            NodeKind::ProcessingInstruction { target, data } => {
                out.extend_from_slice(b"<?");
                out.extend_from_slice(target.as_bytes());
                if !data.is_empty() {
                    out.push(b' ');
                    out.extend_from_slice(data.as_bytes());
                }
                out.extend_from_slice(b"?>");
            }
        }
    }

    pub(crate) fn resolve_index_path(&self, path: &[usize]) -> Option<NodeId> {
        let mut cur = self.root;
        for &idx in path {
            cur = *self.node(cur).children.get(idx)?;
        }
        Some(cur)
    }

    /// Human-readable element path like `/Envelope[1]/Body[1]`, with
    /// positions counted among same-named element siblings.
    pub fn element_path(&self, node: NodeId) -> String {
        let mut segments = Vec::new();
        let mut cur = node;
        loop {
            let n = self.node(cur);
            let name = match n.name() {
                Some(name) => name.clone(),
                None => break,
            };
            let position = match n.parent {
                Some(parent) => {
                    self.node(parent)
                        .children
                        .iter()
                        .filter(|&&c| self.node(c).name() == Some(&name))
                        .position(|&c| c == cur)
                        .unwrap_or(0)
                        + 1
                }
                None => 1,
            };
            segments.push(format!("{}[{}]", name.local_name, position));
            match n.parent {
                Some(parent) if self.node(parent).is_element() => cur = parent,
                _ => break,
            }
        }
        segments.reverse();
        format!("/{}", segments.join("/"))
    }

    pub(crate) fn from_parts(
        nodes: Vec<XmlNode>,
        root: NodeId,
        prolog: Vec<NodeId>,
        epilog: Vec<NodeId>,
        source_bytes_length: usize,
    ) -> XmlDocument {
        XmlDocument {
            nodes: Arc::new(nodes),
            root,
            prolog,
            epilog,
            id_registry: BTreeMap::new(),
            source_bytes_length,
        }
    }

    pub(crate) fn prolog(&self) -> &[NodeId] {
        &self.prolog
    }

    pub(crate) fn epilog(&self) -> &[NodeId] {
        &self.epilog
    }
}

pub struct Descendants<'a> {
    doc: &'a XmlDocument,
    stack: Vec<NodeId>,
}

impl Iterator for Descendants<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.stack.pop()?;
        let node = self.doc.node(id);
        self.stack.extend(node.children.iter().rev());
        Some(id)
    }
}

fn tag_name(name: &QName) -> String {
    if name.prefix.is_empty() {
        name.local_name.clone()
    } else {
        format!("{}:{}", name.prefix, name.local_name)
    }
}

fn escape_text_into(text: &str, out: &mut Vec<u8>) {
    for b in text.bytes() {
        match b {
            b'&' => out.extend_from_slice(b"&amp;"),
            b'<' => out.extend_from_slice(b"&lt;"),
            b'>' => out.extend_from_slice(b"&gt;"),
            b'\r' => out.extend_from_slice(b"&#xD;"),
            _ => out.push(b),
        }
    }
}

fn escape_attr_into(value: &str, out: &mut Vec<u8>) {
    for b in value.bytes() {
        match b {
            b'&' => out.extend_from_slice(b"&amp;"),
            b'<' => out.extend_from_slice(b"&lt;"),
            b'"' => out.extend_from_slice(b"&quot;"),
            b'\t' => out.extend_from_slice(b"&#x9;"),
            b'\n' => out.extend_from_slice(b"&#xA;"),
            b'\r' => out.extend_from_slice(b"&#xD;"),
            _ => out.push(b),
        }
    }
}

/// Structural equality ignoring node identities: compares kind, names,
/// attribute lists (ordered) and namespace declarations (ordered).
pub fn tree_equal(a: &XmlDocument, b: &XmlDocument) -> bool {
    fn node_equal(a: &XmlDocument, an: NodeId, b: &XmlDocument, bn: NodeId) -> bool {
        let (na, nb) = (a.node(an), b.node(bn));
        if na.kind != nb.kind || na.children.len() != nb.children.len() {
            return false;
        }
        na.children
            .iter()
            .zip(nb.children.iter())
            .all(|(&ca, &cb)| node_equal(a, ca, b, cb))
    }
    node_equal(a, a.root(), b, b.root())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(input: &str) -> XmlDocument {
        parse(input.as_bytes(), &ParseOptions::default()).expect("parse")
    }

    #[test]
    fn namespace_inheritance() {
        let doc = parse_ok("<a xmlns=\"urn:x\"><b/></a>");
        let root = doc.node(doc.root());
        assert_eq!(root.name(), Some(&QName::new("urn:x", "a")));
        let child = doc.node(root.children[0]);
        assert_eq!(child.name(), Some(&QName::new("urn:x", "b")));
    }

    #[test]
    fn dtd_rejected_by_default() {
        let err = parse(
            b"<!DOCTYPE foo [<!ENTITY x \"y\">]><foo/>",
            &ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, XmlError::DtdForbidden { .. }), "{err}");
    }

    #[test]
    fn depth_limit_enforced() {
        let mut input = String::new();
        for i in 0..101 {
            input.push_str(&format!("<e{i}>"));
        }
        for i in (0..101).rev() {
            input.push_str(&format!("</e{i}>"));
        }
        let err = parse(input.as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, XmlError::DepthLimitExceeded { limit: 100 }));

        let mut ok = ParseOptions::default();
        ok.max_depth = 101;
        parse(input.as_bytes(), &ok).expect("within raised limit");
    }

    #[test]
    fn size_limit_enforced() {
        let mut opts = ParseOptions::default();
        opts.max_input_bytes = 10;
        let err = parse(b"<aaaaaaaaaaaaaaaa/>", &opts).unwrap_err();
        assert!(matches!(err, XmlError::SizeLimitExceeded { .. }));
    }

    #[test]
    fn register_id_attribute_counts_and_maps() {
        let wsu = "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-utility-1.0.xsd";
        let doc = parse_ok(&format!(
            "<e xmlns:wsu=\"{wsu}\"><b wsu:Id=\"body-1\"/></e>"
        ));
        let attr = QName::new(wsu, "Id");
        let (doc, count) = doc.register_id_attribute(&attr).unwrap();
        assert_eq!(count, 1);
        let body = doc.lookup_id("body-1").unwrap();
        assert_eq!(doc.node(body).name().unwrap().local_name, "b");
    }

    #[test]
    fn register_id_attribute_empty_when_absent() {
        let doc = parse_ok("<e><b/></e>");
        let (doc, count) = doc.register_id_attribute(&QName::local("Id")).unwrap();
        assert_eq!(count, 0);
        assert!(doc.id_registry().is_empty());
    }

    #[test]
    fn register_id_attribute_rejects_duplicates() {
        let doc = parse_ok("<e><a Id=\"x\"/><b Id=\"x\"/></e>");
        let err = doc.register_id_attribute(&QName::local("Id")).unwrap_err();
        assert!(matches!(err, XmlError::DuplicateIdValue { .. }));
    }

    #[test]
    fn register_id_attribute_idempotent() {
        let doc = parse_ok("<e><a Id=\"x\"/><b Id=\"y\"/></e>");
        let attr = QName::local("Id");
        let (once, c1) = doc.register_id_attribute(&attr).unwrap();
        let (twice, c2) = once.register_id_attribute(&attr).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(once.id_registry(), twice.id_registry());
    }

    #[test]
    fn find_by_tag_name_document_order() {
        let doc = parse_ok(
            "<r xmlns:s=\"urn:s\"><w><s:A n=\"1\"/></w><s:A n=\"2\"/></r>",
        );
        let hits = doc.find_by_tag_name(&QName::new("urn:s", "A"));
        assert_eq!(hits.len(), 2);
        assert_eq!(doc.node(hits[0]).attribute(&QName::local("n")), Some("1"));
        assert_eq!(doc.node(hits[1]).attribute(&QName::local("n")), Some("2"));
        assert!(hits[0] < hits[1], "document order");
    }

    #[test]
    fn find_by_tag_name_absent() {
        let doc = parse_ok("<r/>");
        assert!(doc.find_by_tag_name(&QName::local("x")).is_empty());
    }

    #[test]
    fn serialize_round_trips() {
        let input = "<r xmlns:p=\"urn:p\" a=\"1\"><!--c--><p:x>t &amp; u</p:x><?pi data?></r>";
        let doc = parse_ok(input);
        let bytes = doc.serialize(doc.root()).unwrap();
        let again = parse(&bytes, &ParseOptions::default()).unwrap();
        assert!(tree_equal(&doc, &again));
    }

    #[test]
    fn serialize_deterministic() {
        let doc = parse_ok("<r><a b=\"1\">text</a></r>");
        let one = doc.serialize(doc.root()).unwrap();
        let two = doc.serialize(doc.root()).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn serialize_text_child_escapes() {
        let doc = parse_ok("<r>a &lt; b &amp; c</r>");
        let text_id = doc.node(doc.root()).children[0];
        let bytes = doc.serialize(text_id).unwrap();
        assert_eq!(bytes, b"a &lt; b &amp; c");
    }

    #[test]
    fn serialize_unknown_node() {
        let doc = parse_ok("<r/>");
        assert!(matches!(
            doc.serialize(NodeId(999)),
            Err(XmlError::UnknownNode(_))
        ));
    }

    #[test]
    fn in_scope_namespaces_matches_ancestor_walk() {
        let doc = parse_ok(
            "<a xmlns=\"urn:d\" xmlns:p=\"urn:1\"><b xmlns:p=\"urn:2\"><c xmlns=\"\"/></b></a>",
        );
        let b = doc.node(doc.root()).children[0];
        let c = doc.node(b).children[0];
        let scope = doc.in_scope_namespaces(c);
        assert_eq!(scope.get("p").map(String::as_str), Some("urn:2"));
        assert_eq!(scope.get(""), None, "default undeclared by xmlns=\"\"");
        assert_eq!(scope.get("xml").map(String::as_str), Some(XML_NAMESPACE));
    }

    #[test]
    fn element_path_positions() {
        let doc = parse_ok("<r><a/><b/><a><x/></a></r>");
        let second_a = doc.node(doc.root()).children[2];
        assert_eq!(doc.element_path(second_a), "/r[1]/a[2]");
        let x = doc.node(second_a).children[0];
        assert_eq!(doc.element_path(x), "/r[1]/a[2]/x[1]");
    }
}
