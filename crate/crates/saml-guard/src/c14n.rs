//! Canonical XML 1.0 and Exclusive XML Canonicalization 1.0 over document
//! subtrees, each with or without comments. Output is the byte stream that
//! digests and signatures are computed over, so every rule here (attribute
//! ordering, namespace emission, escaping, empty-element expansion) must be
//! byte-exact.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::xmlcore::{NodeId, NodeKind, QName, XmlDocument, XML_NAMESPACE};

/// Canonicalization algorithm URIs accepted at the signature boundary.
pub mod uri {
    pub const INCLUSIVE_1_0: &str = "http://www.w3.org/TR/2001/REC-xml-c14n-20010315";
    pub const INCLUSIVE_1_0_WITH_COMMENTS: &str =
        "http://www.w3.org/TR/2001/REC-xml-c14n-20010315#WithComments";
    pub const EXCLUSIVE_1_0: &str = "http://www.w3.org/2001/10/xml-exc-c14n#";
    pub const EXCLUSIVE_1_0_WITH_COMMENTS: &str =
        "http://www.w3.org/2001/10/xml-exc-c14n#WithComments";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C14nAlgorithm {
    InclusiveC14n10,
    ExclusiveC14n10,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct C14nMethod {
    pub algorithm: C14nAlgorithm,
    pub with_comments: bool,
    /// Prefixes treated inclusively in exclusive mode (the `PrefixList`);
    /// `#default` names the default namespace. Must be empty in inclusive
    /// mode.
    pub inclusive_prefixes: Vec<String>,
}

impl C14nMethod {
    pub fn inclusive() -> Self {
        C14nMethod {
            algorithm: C14nAlgorithm::InclusiveC14n10,
            with_comments: false,
            inclusive_prefixes: Vec::new(),
        }
    }

    pub fn exclusive() -> Self {
        C14nMethod {
            algorithm: C14nAlgorithm::ExclusiveC14n10,
            with_comments: false,
            inclusive_prefixes: Vec::new(),
        }
    }

    pub fn with_comments(mut self) -> Self {
        self.with_comments = true;
        self
    }

    /// Maps an algorithm URI to a method; unknown URIs (including Canonical
    /// XML 1.1) are not accepted.
    pub fn from_uri(algorithm_uri: &str) -> Option<Self> {
        match algorithm_uri {
            uri::INCLUSIVE_1_0 => Some(Self::inclusive()),
            uri::INCLUSIVE_1_0_WITH_COMMENTS => Some(Self::inclusive().with_comments()),
            uri::EXCLUSIVE_1_0 => Some(Self::exclusive()),
            uri::EXCLUSIVE_1_0_WITH_COMMENTS => Some(Self::exclusive().with_comments()),
            _ => None,
        }
    }

    pub fn uri(&self) -> &'static str {
        match (self.algorithm, self.with_comments) {
            (C14nAlgorithm::InclusiveC14n10, false) => uri::INCLUSIVE_1_0,
            (C14nAlgorithm::InclusiveC14n10, true) => uri::INCLUSIVE_1_0_WITH_COMMENTS,
            (C14nAlgorithm::ExclusiveC14n10, false) => uri::EXCLUSIVE_1_0,
            (C14nAlgorithm::ExclusiveC14n10, true) => uri::EXCLUSIVE_1_0_WITH_COMMENTS,
        }
    }
}

#[derive(Debug, Error)]
pub enum C14nError {
    #[error("canonicalization requires an element subtree, got {0}")]
    NonElementSubtree(NodeId),
    #[error("inclusive_prefixes are only valid for exclusive canonicalization")]
    InvalidPrefixList,
}

/// Canonicalize the subtree rooted at `subtree` per `method`.
pub fn canonicalize(
    doc: &XmlDocument,
    subtree: NodeId,
    method: &C14nMethod,
) -> Result<Vec<u8>, C14nError> {
    canonicalize_excluding(doc, subtree, method, &HashSet::new())
}

/// Same as [`canonicalize`] but skipping the listed subtrees entirely; used
/// for the enveloped-signature transform (the signature's own subtree is
/// excluded before digesting).
pub(crate) fn canonicalize_excluding(
    doc: &XmlDocument,
    subtree: NodeId,
    method: &C14nMethod,
    omit: &HashSet<NodeId>,
) -> Result<Vec<u8>, C14nError> {
    if !doc.node(subtree).is_element() {
        return Err(C14nError::NonElementSubtree(subtree));
    }
    if method.algorithm == C14nAlgorithm::InclusiveC14n10 && !method.inclusive_prefixes.is_empty()
    {
        return Err(C14nError::InvalidPrefixList);
    }
    let mut out = Vec::new();
    let mut writer = Writer {
        doc,
        method,
        omit,
        out: &mut out,
    };
    // Rendered-namespace state of the (virtual) output parent: only the
    // empty default namespace is considered declared.
    let mut rendered = BTreeMap::new();
    rendered.insert(String::new(), String::new());
    writer.element(subtree, &rendered, true);
    let _ = rendered;
    Ok(out)
}

struct Writer<'a> {
    doc: &'a XmlDocument,
    method: &'a C14nMethod,
    omit: &'a HashSet<NodeId>,
    out: &'a mut Vec<u8>,
}

impl Writer<'_> {
    fn element(
        &mut self,
        id: NodeId,
        rendered: &BTreeMap<String, String>,
        is_subset_root: bool,
    ) {
        let node = self.doc.node(id);
        let (name, attributes) = match &node.kind {
            NodeKind::Element {
                name, attributes, ..
            } => (name, attributes),
            _ => unreachable!("element() called on non-element"),
        };

        let in_scope = self.doc.in_scope_namespaces(id);

        // Decide which namespace declarations this element renders.
        let mut to_render: BTreeMap<String, String> = BTreeMap::new();
        match self.method.algorithm {
            C14nAlgorithm::InclusiveC14n10 => {
                for (prefix, uri) in &in_scope {
                    if prefix == "xml" && uri == XML_NAMESPACE {
                        continue;
                    }
                    if rendered.get(prefix) != Some(uri) {
                        to_render.insert(prefix.clone(), uri.clone());
                    }
                }
                // An element with no default namespace in scope renders
                // xmlns="" only when an output ancestor rendered a default.
                if !in_scope.contains_key("")
                    && rendered.get("").map(String::as_str).unwrap_or("") != ""
                {
                    to_render.insert(String::new(), String::new());
                }
            }
            C14nAlgorithm::ExclusiveC14n10 => {
                let mut utilized: BTreeSet<String> = BTreeSet::new();
                utilized.insert(name.prefix.clone());
                for attr in attributes {
                    if !attr.name.prefix.is_empty() {
                        utilized.insert(attr.name.prefix.clone());
                    }
                }
                for prefix in &self.method.inclusive_prefixes {
                    if prefix == "#default" {
                        utilized.insert(String::new());
                    } else {
                        utilized.insert(prefix.clone());
                    }
                }
                for prefix in utilized {
                    if prefix == "xml" {
                        continue;
                    }
                    let uri = in_scope
                        .get(&prefix)
                        .cloned()
                        .unwrap_or_default();
                    if prefix.is_empty() && uri.is_empty() {
                        // Render xmlns="" only to undo an ancestor default.
                        if rendered.get("").map(String::as_str).unwrap_or("") != "" {
                            to_render.insert(prefix, uri);
                        }
                        continue;
                    }
                    if rendered.get(&prefix) != Some(&uri) {
                        to_render.insert(prefix, uri);
                    }
                }
            }
        }

        // Attribute list, expanded with inherited xml:* attributes when this
        // is the root of an inclusive document subset.
        let mut attrs: Vec<(QName, String)> = attributes
            .iter()
            .map(|a| (a.name.clone(), a.value.clone()))
            .collect();
        if is_subset_root && self.method.algorithm == C14nAlgorithm::InclusiveC14n10 {
            for (qname, value) in self.inherited_xml_attributes(id) {
                if !attrs.iter().any(|(n, _)| *n == qname) {
                    attrs.push((qname, value));
                }
            }
        }
        attrs.sort_by(|(a, _), (b, _)| {
            (&a.namespace_uri, &a.local_name).cmp(&(&b.namespace_uri, &b.local_name))
        });

        self.out.push(b'<');
        self.out.extend_from_slice(qname_text(name).as_bytes());
        for (prefix, uri) in &to_render {
            if prefix.is_empty() {
                self.out.extend_from_slice(b" xmlns=\"");
            } else {
                self.out.extend_from_slice(b" xmlns:");
                self.out.extend_from_slice(prefix.as_bytes());
                self.out.extend_from_slice(b"=\"");
            }
            escape_attr(uri, self.out);
            self.out.push(b'"');
        }
        for (qname, value) in &attrs {
            self.out.push(b' ');
            self.out.extend_from_slice(qname_text(qname).as_bytes());
            self.out.extend_from_slice(b"=\"");
            escape_attr(value, self.out);
            self.out.push(b'"');
        }
        self.out.push(b'>');

        let mut child_rendered = rendered.clone();
        child_rendered.extend(to_render);
        for &child in &node.children {
            if self.omit.contains(&child) {
                continue;
            }
            match &self.doc.node(child).kind {
                NodeKind::Element { .. } => self.element(child, &child_rendered, false),
                NodeKind::Text(text) => escape_text(text, self.out),
                NodeKind::Comment(text) => {
                    if self.method.with_comments {
                        self.out.extend_from_slice(b"<!--");
                        self.out.extend_from_slice(text.as_bytes());
                        self.out.extend_from_slice(b"-->");
                    }
                }
                NodeKind::ProcessingInstruction { target, data } => {
                    self.out.extend_from_slice(b"<?");
                    self.out.extend_from_slice(target.as_bytes());
                    if !data.is_empty() {
                        self.out.push(b' ');
                        self.out.extend_from_slice(data.as_bytes());
                    }
                    self.out.extend_from_slice(b"?>");
                }
            }
        }

        self.out.extend_from_slice(b"</");
        self.out.extend_from_slice(qname_text(name).as_bytes());
        self.out.push(b'>');
    }

    /// Nearest-ancestor values of xml:lang, xml:space and xml:base for the
    /// root of a document subset (Canonical XML 1.0 attribute inheritance).
    fn inherited_xml_attributes(&self, id: NodeId) -> Vec<(QName, String)> {
        const INHERITED: [&str; 3] = ["base", "lang", "space"];
        let mut found: BTreeMap<String, String> = BTreeMap::new();
        let mut cur = self.doc.node(id).parent;
        while let Some(ancestor) = cur {
            let node = self.doc.node(ancestor);
            for attr in node.attributes() {
                if attr.name.namespace_uri == XML_NAMESPACE
                    && INHERITED.contains(&attr.name.local_name.as_str())
                    && !found.contains_key(&attr.name.local_name)
                {
                    found.insert(attr.name.local_name.clone(), attr.value.clone());
                }
            }
            cur = node.parent;
        }
        found
            .into_iter()
            .map(|(local, value)| {
                (
                    QName::prefixed(XML_NAMESPACE, local, "xml"),
                    value,
                )
            })
            .collect()
    }
}

fn qname_text(name: &QName) -> String {
    if name.prefix.is_empty() {
        name.local_name.clone()
    } else {
        format!("{}:{}", name.prefix, name.local_name)
    }
}

fn escape_text(text: &str, out: &mut Vec<u8>) {
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

fn escape_attr(value: &str, out: &mut Vec<u8>) {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xmlcore::{parse, ParseOptions};

    fn doc(input: &str) -> XmlDocument {
        parse(input.as_bytes(), &ParseOptions::default()).expect("parse")
    }

    fn c14n(input: &str, method: &C14nMethod) -> String {
        let d = doc(input);
        String::from_utf8(canonicalize(&d, d.root(), method).unwrap()).unwrap()
    }

    #[test]
    fn empty_element_expansion() {
        assert_eq!(c14n("<a/>", &C14nMethod::inclusive()), "<a></a>");
    }

    #[test]
    fn attribute_sorting() {
        assert_eq!(
            c14n("<a b=\"2\" a=\"1\"/>", &C14nMethod::inclusive()),
            "<a a=\"1\" b=\"2\"></a>"
        );
    }

    #[test]
    fn unused_namespace_pruned_in_exclusive_only() {
        let input = "<x xmlns:unused=\"urn:u\"><y/></x>";
        assert_eq!(
            c14n(input, &C14nMethod::exclusive()),
            "<x><y></y></x>"
        );
        assert_eq!(
            c14n(input, &C14nMethod::inclusive()),
            "<x xmlns:unused=\"urn:u\"><y></y></x>"
        );
    }

    #[test]
    fn comments_dropped_unless_requested() {
        let input = "<a><!--hi--></a>";
        assert_eq!(c14n(input, &C14nMethod::inclusive()), "<a></a>");
        assert_eq!(
            c14n(input, &C14nMethod::inclusive().with_comments()),
            "<a><!--hi--></a>"
        );
    }

    #[test]
    fn inclusive_prefix_list_forces_rendering() {
        let input = "<x xmlns:keep=\"urn:k\"><y/></x>";
        let mut method = C14nMethod::exclusive();
        method.inclusive_prefixes.push("keep".into());
        assert_eq!(
            c14n(input, &method),
            "<x xmlns:keep=\"urn:k\"><y></y></x>"
        );
    }

    #[test]
    fn prefix_list_rejected_for_inclusive() {
        let d = doc("<a/>");
        let mut method = C14nMethod::inclusive();
        method.inclusive_prefixes.push("p".into());
        assert!(matches!(
            canonicalize(&d, d.root(), &method),
            Err(C14nError::InvalidPrefixList)
        ));
    }

    #[test]
    fn non_element_subtree_rejected() {
        let d = doc("<a>text</a>");
        let text = d.node(d.root()).children[0];
        assert!(matches!(
            canonicalize(&d, text, &C14nMethod::inclusive()),
            Err(C14nError::NonElementSubtree(_))
        ));
    }

    #[test]
    fn algorithm_uri_round_trip() {
        for u in [
            uri::INCLUSIVE_1_0,
            uri::INCLUSIVE_1_0_WITH_COMMENTS,
            uri::EXCLUSIVE_1_0,
            uri::EXCLUSIVE_1_0_WITH_COMMENTS,
        ] {
            assert_eq!(C14nMethod::from_uri(u).unwrap().uri(), u);
        }
        assert!(C14nMethod::from_uri("http://www.w3.org/2006/12/xml-c14n11").is_none());
    }

    #[test]
    fn subtree_exclusion_for_enveloped_content() {
        let d = doc("<a><keep/><sig><inner/></sig><keep2/></a>");
        let sig = d.node(d.root()).children[1];
        let mut omit = HashSet::new();
        omit.insert(sig);
        let bytes =
            canonicalize_excluding(&d, d.root(), &C14nMethod::exclusive(), &omit).unwrap();
        assert_eq!(bytes, b"<a><keep></keep><keep2></keep2></a>");
    }
}
