//! Internal mutable tree used to derive new document values (signing,
//! attack-corpus generation). Documents themselves stay immutable: an editor
//! is loaded from a document, mutated, and finished back into a fresh
//! document by serializing and reparsing, which renumbers node identities in
//! document order and revalidates well-formedness.

use super::{
    parse, Attribute, NodeId, NodeKind, ParseOptions, QName, XmlDocument, XmlError,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) struct EditId(usize);

struct EditNode {
    kind: NodeKind,
    parent: Option<EditId>,
    children: Vec<EditId>,
}

pub(crate) struct TreeEditor {
    nodes: Vec<EditNode>,
    root: EditId,
    prolog: Vec<EditId>,
    epilog: Vec<EditId>,
}

impl TreeEditor {
    pub fn new(doc: &XmlDocument) -> (TreeEditor, impl Fn(NodeId) -> EditId) {
        let mut editor = TreeEditor {
            nodes: Vec::new(),
            root: EditId(0),
            prolog: Vec::new(),
            epilog: Vec::new(),
        };
        // Document node ids are dense indices; copy preserving them so the
        // mapping from NodeId to EditId is the identity at load time.
        for node in doc.nodes.iter() {
            editor.nodes.push(EditNode {
                kind: node.kind.clone(),
                parent: node.parent.map(|p| EditId(p.index())),
                children: node.children.iter().map(|c| EditId(c.index())).collect(),
            });
        }
        editor.root = EditId(doc.root().index());
        editor.prolog = doc.prolog().iter().map(|p| EditId(p.index())).collect();
        editor.epilog = doc.epilog().iter().map(|p| EditId(p.index())).collect();
        (editor, |id: NodeId| EditId(id.index()))
    }

    pub fn root(&self) -> EditId {
        self.root
    }

    pub fn children(&self, node: EditId) -> Vec<EditId> {
        self.nodes[node.0].children.clone()
    }

    pub fn parent(&self, node: EditId) -> Option<EditId> {
        self.nodes[node.0].parent
    }

    pub fn name(&self, node: EditId) -> Option<QName> {
        match &self.nodes[node.0].kind {
            NodeKind::Element { name, .. } => Some(name.clone()),
            _ => None,
        }
    }

    pub fn attribute(&self, node: EditId, name: &QName) -> Option<String> {
        match &self.nodes[node.0].kind {
            NodeKind::Element { attributes, .. } => attributes
                .iter()
                .find(|a| &a.name == name)
                .map(|a| a.value.clone()),
            _ => None,
        }
    }

    pub fn new_element(&mut self, name: QName) -> EditId {
        self.push(EditNode {
            kind: NodeKind::Element {
                name,
                attributes: Vec::new(),
                namespace_declarations: Vec::new(),
            },
            parent: None,
            children: Vec::new(),
        })
    }

    pub fn new_text(&mut self, value: impl Into<String>) -> EditId {
        self.push(EditNode {
            kind: NodeKind::Text(value.into()),
            parent: None,
            children: Vec::new(),
        })
    }

    /// Deep copy of a subtree; the copy is detached.
    pub fn deep_copy(&mut self, node: EditId) -> EditId {
        let kind = self.nodes[node.0].kind.clone();
        let children = self.nodes[node.0].children.clone();
        let copy = self.push(EditNode {
            kind,
            parent: None,
            children: Vec::new(),
        });
        for child in children {
            let child_copy = self.deep_copy(child);
            self.attach(copy, usize::MAX, child_copy);
        }
        copy
    }

    /// Insert `child` under `parent`; `index` beyond the child count appends.
    pub fn attach(&mut self, parent: EditId, index: usize, child: EditId) {
        debug_assert!(self.nodes[child.0].parent.is_none(), "attach of detached node");
        let len = self.nodes[parent.0].children.len();
        let at = index.min(len);
        self.nodes[parent.0].children.insert(at, child);
        self.nodes[child.0].parent = Some(parent);
    }

    /// Detach a subtree from its parent, returning its former child index.
    pub fn detach(&mut self, node: EditId) -> usize {
        let parent = self.nodes[node.0].parent.expect("detach of root");
        let idx = self.nodes[parent.0]
            .children
            .iter()
            .position(|&c| c == node)
            .expect("child listed under parent");
        self.nodes[parent.0].children.remove(idx);
        self.nodes[node.0].parent = None;
        idx
    }

    /// True when `node` is `ancestor` or a descendant of it.
    pub fn contains(&self, ancestor: EditId, node: EditId) -> bool {
        let mut cur = Some(node);
        while let Some(id) = cur {
            if id == ancestor {
                return true;
            }
            cur = self.nodes[id.0].parent;
        }
        false
    }

    pub fn child_index(&self, node: EditId) -> usize {
        let parent = self.nodes[node.0].parent.expect("node has a parent");
        self.nodes[parent.0]
            .children
            .iter()
            .position(|&c| c == node)
            .expect("child listed under parent")
    }

    pub fn set_attribute(&mut self, node: EditId, name: QName, value: impl Into<String>) {
        if let NodeKind::Element { attributes, .. } = &mut self.nodes[node.0].kind {
            let value = value.into();
            if let Some(attr) = attributes.iter_mut().find(|a| a.name == name) {
                attr.value = value;
            } else {
                attributes.push(Attribute { name, value });
            }
        }
    }

    pub fn declare_namespace(&mut self, node: EditId, prefix: &str, uri: &str) {
        if let NodeKind::Element {
            namespace_declarations,
            ..
        } = &mut self.nodes[node.0].kind
        {
            if !namespace_declarations.iter().any(|(p, _)| p == prefix) {
                namespace_declarations.push((prefix.to_string(), uri.to_string()));
            }
        }
    }

    /// Replace an element's children with a single text node.
    pub fn set_text_content(&mut self, node: EditId, value: impl Into<String>) {
        for child in self.nodes[node.0].children.clone() {
            self.nodes[child.0].parent = None;
        }
        self.nodes[node.0].children.clear();
        let text = self.new_text(value);
        self.attach(node, 0, text);
    }

    pub fn text_content(&self, node: EditId) -> String {
        let mut out = String::new();
        self.collect_text(node, &mut out);
        out
    }

    fn collect_text(&self, node: EditId, out: &mut String) {
        match &self.nodes[node.0].kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Element { .. } => {
                for &c in &self.nodes[node.0].children {
                    self.collect_text(c, out);
                }
            }
            _ => {}
        }
    }

    /// First descendant element (document order, self included) whose local
    /// name matches.
    pub fn find_local_name(&self, from: EditId, local: &str) -> Option<EditId> {
        if let NodeKind::Element { name, .. } = &self.nodes[from.0].kind {
            if name.local_name == local {
                return Some(from);
            }
        }
        for &child in &self.nodes[from.0].children {
            if let Some(found) = self.find_local_name(child, local) {
                return Some(found);
            }
        }
        None
    }

    fn push(&mut self, node: EditNode) -> EditId {
        let id = EditId(self.nodes.len());
        self.nodes.push(node);
        id
    }

    fn write(&self, node: EditId, out: &mut Vec<u8>) {
        match &self.nodes[node.0].kind {
            NodeKind::Element {
                name,
                attributes,
                namespace_declarations,
            } => {
                out.push(b'<');
                out.extend_from_slice(raw_name(name).as_bytes());
                for (prefix, uri) in namespace_declarations {
                    if prefix.is_empty() {
                        out.extend_from_slice(b" xmlns=\"");
                    } else {
                        out.extend_from_slice(b" xmlns:");
                        out.extend_from_slice(prefix.as_bytes());
                        out.extend_from_slice(b"=\"");
                    }
                    super::escape_attr_into(uri, out);
                    out.push(b'"');
                }
                for attr in attributes {
                    out.push(b' ');
                    out.extend_from_slice(raw_name(&attr.name).as_bytes());
                    out.extend_from_slice(b"=\"");
                    super::escape_attr_into(&attr.value, out);
                    out.push(b'"');
                }
                out.push(b'>');
                for &child in &self.nodes[node.0].children {
                    self.write(child, out);
                }
                out.extend_from_slice(b"</");
                out.extend_from_slice(raw_name(name).as_bytes());
                out.push(b'>');
            }
            NodeKind::Text(t) => super::escape_text_into(t, out),
            NodeKind::Comment(t) => {
                out.extend_from_slice(b"<!--");
                out.extend_from_slice(t.as_bytes());
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

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for &id in &self.prolog {
            self.write(id, &mut out);
            out.push(b'\n');
        }
        self.write(self.root, &mut out);
        for &id in &self.epilog {
            out.push(b'\n');
            self.write(id, &mut out);
        }
        out
    }

    /// Serialize and reparse into a fresh immutable document.
    pub fn finish(&self) -> Result<XmlDocument, XmlError> {
        parse(&self.to_bytes(), &ParseOptions::default())
    }

    /// Child-index path from the root, resolvable in the finished document.
    pub fn index_path(&self, node: EditId) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(parent) = self.nodes[cur.0].parent {
            path.push(self.child_index(cur));
            cur = parent;
        }
        path.reverse();
        path
    }
}

fn raw_name(name: &QName) -> String {
    if name.prefix.is_empty() {
        name.local_name.clone()
    } else {
        format!("{}:{}", name.prefix, name.local_name)
    }
}
