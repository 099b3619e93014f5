//! Structural validation of a parsed document against a compiled schema:
//! element names, order and occurrence bounds, attribute presence, and
//! wildcard rules (strict wildcards demand a declaration, lax validates when
//! the declaration is known, skip passes the subtree unexamined).

use super::{
    ComplexType, ContentModel, DiscoveredId, ElementParticle, Occurs, ParticleKind,
    ParticleModel, ProcessContents, Schema, TypeRef, ValidationReport, Violation,
};
use crate::ns::XSD;
use crate::xmlcore::{NodeId, NodeKind, QName, XmlDocument, XML_NAMESPACE};

pub fn validate_document(schema: &Schema, doc: &XmlDocument) -> ValidationReport {
    let mut v = Validator {
        schema,
        doc,
        violations: Vec::new(),
        id_attributes: Vec::new(),
    };
    let root = doc.root();
    let root_name = doc.node(root).name().expect("root is an element").clone();
    match schema.element_decls.get(&root_name) {
        Some(decl) => {
            let type_ref = decl.type_ref.clone();
            v.validate_element(root, &type_ref);
        }
        None => v.violation(
            root,
            "no declaration for root element",
            format!("root element {root_name} is not declared by the schema"),
        ),
    }
    v.violations.sort_by_key(|(node, seq, _)| (*node, *seq));
    let violations: Vec<Violation> = v.violations.into_iter().map(|(_, _, v)| v).collect();
    ValidationReport {
        valid: violations.is_empty(),
        violations,
        id_attributes: v.id_attributes,
    }
}

struct Validator<'a> {
    schema: &'a Schema,
    doc: &'a XmlDocument,
    /// (anchor node, emission sequence, violation); sorted into document
    /// order before reporting.
    violations: Vec<(NodeId, usize, Violation)>,
    id_attributes: Vec<DiscoveredId>,
}

/// How a child element got matched by the content model.
#[derive(Clone, Debug)]
enum ChildMatch {
    Declared(TypeRef),
    Wildcard(ProcessContents),
    /// Strict wildcard matched the namespace but no declaration exists.
    StrictUndeclared,
}

impl Validator<'_> {
    fn violation(&mut self, node: NodeId, rule: &str, message: String) {
        let seq = self.violations.len();
        self.violations.push((
            node,
            seq,
            Violation {
                node_path: self.doc.element_path_or_parent(node),
                rule: rule.to_string(),
                message,
            },
        ));
    }

    fn validate_element(&mut self, node: NodeId, type_ref: &TypeRef) {
        match self.resolve_type(type_ref) {
            ResolvedType::Text => self.validate_text_element(node),
            ResolvedType::Complex(ty) => {
                // Clone keeps the borrow checker out of the recursion; types
                // are small.
                let ty = ty.clone();
                self.validate_attributes(node, &ty);
                self.validate_content(node, &ty);
            }
        }
    }

    fn validate_text_element(&mut self, node: NodeId) {
        for attr in self.doc.node(node).attributes() {
            if attr.name.namespace_uri == XML_NAMESPACE {
                continue;
            }
            let name = attr.name.clone();
            self.violation(
                node,
                "undeclared attribute",
                format!("attribute {name} is not allowed on a simple-typed element"),
            );
        }
        for &child in &self.doc.node(node).children {
            if self.doc.node(child).is_element() {
                let name = self.doc.node(child).name().unwrap().clone();
                self.violation(
                    node,
                    "element content not allowed",
                    format!("simple-typed element cannot contain element {name}"),
                );
            }
        }
    }

    fn validate_attributes(&mut self, node: NodeId, ty: &ComplexType) {
        let attrs: Vec<_> = self.doc.node(node).attributes().to_vec();
        for attr in &attrs {
            if attr.name.namespace_uri == XML_NAMESPACE {
                continue;
            }
            match ty.attribute_uses.iter().find(|u| u.name == attr.name) {
                Some(use_) => {
                    if use_.is_id {
                        self.id_attributes.push(DiscoveredId {
                            node,
                            attribute: attr.name.clone(),
                            value: attr.value.clone(),
                        });
                    }
                }
                None => match &ty.attribute_wildcard {
                    Some(w) if w.admits(&attr.name.namespace_uri) => {
                        match w.process_contents {
                            ProcessContents::Skip => {}
                            ProcessContents::Lax | ProcessContents::Strict => {
                                let known = self.schema.attribute_decls.get(&attr.name);
                                match (known, w.process_contents) {
                                    (Some(decl), _) => {
                                        if decl.is_id {
                                            self.id_attributes.push(DiscoveredId {
                                                node,
                                                attribute: attr.name.clone(),
                                                value: attr.value.clone(),
                                            });
                                        }
                                    }
                                    (None, ProcessContents::Strict) => {
                                        let name = attr.name.clone();
                                        self.violation(
                                            node,
                                            "strict wildcard without declaration",
                                            format!("no declaration for attribute {name}"),
                                        );
                                    }
                                    (None, _) => {}
                                }
                            }
                        }
                    }
                    _ => {
                        let name = attr.name.clone();
                        self.violation(
                            node,
                            "undeclared attribute",
                            format!("attribute {name} is not declared and no wildcard admits it"),
                        );
                    }
                },
            }
        }
        for use_ in &ty.attribute_uses {
            if use_.required && !attrs.iter().any(|a| a.name == use_.name) {
                let name = use_.name.clone();
                self.violation(
                    node,
                    "missing required attribute",
                    format!("required attribute {name} is absent"),
                );
            }
        }
    }

    fn validate_content(&mut self, node: NodeId, ty: &ComplexType) {
        let mut element_children = Vec::new();
        for &child in &self.doc.node(node).children {
            match &self.doc.node(child).kind {
                NodeKind::Element { .. } => element_children.push(child),
                NodeKind::Text(text) if !text.trim().is_empty() => {
                    self.violation(
                        node,
                        "text content not allowed",
                        "non-whitespace text in element-only content".to_string(),
                    );
                }
                _ => {}
            }
        }

        let particle = match &ty.content {
            ContentModel::ElementOnly(p) => p,
            ContentModel::Empty => {
                for &child in &element_children {
                    let name = self.doc.node(child).name().unwrap().clone();
                    self.violation(
                        child,
                        "unexpected element",
                        format!("element {name} not allowed in empty content"),
                    );
                }
                return;
            }
        };

        let names: Vec<QName> = element_children
            .iter()
            .map(|&c| self.doc.node(c).name().unwrap().clone())
            .collect();
        let mut hwm = 0usize;
        match match_particle(self.schema, particle, &names, 0, &mut hwm) {
            Some((end, assignment)) if end == names.len() => {
                for (idx, m) in assignment {
                    let child = element_children[idx];
                    match m {
                        ChildMatch::Declared(type_ref) => self.validate_element(child, &type_ref),
                        ChildMatch::Wildcard(ProcessContents::Skip) => {}
                        ChildMatch::Wildcard(_) => {
                            // Lax: validate when the declaration is known.
                            let name = self.doc.node(child).name().unwrap().clone();
                            if let Some(decl) = self.schema.element_decls.get(&name) {
                                let type_ref = decl.type_ref.clone();
                                self.validate_element(child, &type_ref);
                            }
                        }
                        ChildMatch::StrictUndeclared => {
                            let name = self.doc.node(child).name().unwrap().clone();
                            self.violation(
                                child,
                                "strict wildcard without declaration",
                                format!("no declaration for element {name}"),
                            );
                        }
                    }
                }
            }
            outcome => {
                let matched = match outcome {
                    Some((end, _)) => end.max(hwm),
                    None => hwm,
                };
                if matched < names.len() {
                    let child = element_children[matched];
                    let name = names[matched].clone();
                    if particle_mentions(particle, &name) {
                        self.violation(
                            child,
                            "occurrence bound exceeded",
                            format!("element {name} exceeds its occurrence bounds"),
                        );
                    } else {
                        self.violation(
                            child,
                            "unexpected element",
                            format!("element {name} is not allowed here"),
                        );
                    }
                } else {
                    self.violation(
                        node,
                        "missing required element",
                        "content model is incomplete".to_string(),
                    );
                }
                // The assignment is unusable; still check children that have
                // global declarations so nested problems get reported.
                for &child in &element_children {
                    let name = self.doc.node(child).name().unwrap().clone();
                    if let Some(decl) = self.schema.element_decls.get(&name) {
                        let type_ref = decl.type_ref.clone();
                        self.validate_element(child, &type_ref);
                    }
                }
            }
        }
    }

    fn resolve_type(&self, type_ref: &TypeRef) -> ResolvedType<'_> {
        match type_ref {
            TypeRef::Inline(idx) => ResolvedType::Complex(&self.schema.types[*idx]),
            TypeRef::Named(name) if name.namespace_uri == XSD => ResolvedType::Text,
            TypeRef::Named(name) => match self.schema.named_types.get(name) {
                Some(&idx) => ResolvedType::Complex(&self.schema.types[idx]),
                // Dangling references are rejected at compile time.
                None => unreachable!("unresolved type {name}"),
            },
        }
    }
}

enum ResolvedType<'a> {
    Text,
    Complex(&'a ComplexType),
}

type Assignment = Vec<(usize, ChildMatch)>;

/// Backtracking matcher: first full match of `particle` against
/// `names[pos..]`, returning the end position and per-child assignments.
/// Content models here are small, so the search stays cheap.
fn match_particle(
    schema: &Schema,
    particle: &ParticleModel,
    names: &[QName],
    pos: usize,
    hwm: &mut usize,
) -> Option<(usize, Assignment)> {
    let mut results = match_particle_all(schema, particle, names, pos, hwm);
    results.sort_by_key(|(end, _)| std::cmp::Reverse(*end));
    results.into_iter().next()
}

/// All distinct end positions (with one representative assignment each) for
/// matching `particle` at `pos`.
fn match_particle_all(
    schema: &Schema,
    particle: &ParticleModel,
    names: &[QName],
    pos: usize,
    hwm: &mut usize,
) -> Vec<(usize, Assignment)> {
    let mut outcomes: Vec<(usize, Assignment)> = Vec::new();
    // Occurrence loop over the particle's own bounds.
    let mut frontier: Vec<(usize, Assignment)> = vec![(pos, Vec::new())];
    let mut count: u32 = 0;
    if particle.min_occurs == 0 {
        outcomes.push((pos, Vec::new()));
    }
    loop {
        if !particle.max_occurs.admits(count + 1) {
            break;
        }
        let mut next_frontier: Vec<(usize, Assignment)> = Vec::new();
        for (at, assignment) in &frontier {
            for (end, extra) in match_once(schema, &particle.kind, names, *at, hwm) {
                if end == *at && matches!(particle.max_occurs, Occurs::Unbounded) && count >= 1 {
                    // Zero-width repetition: stop instead of looping.
                    continue;
                }
                let mut combined = assignment.clone();
                combined.extend(extra);
                if !next_frontier.iter().any(|(e, _)| *e == end) {
                    next_frontier.push((end, combined));
                }
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        count += 1;
        if count >= particle.min_occurs {
            for (end, assignment) in &next_frontier {
                if !outcomes.iter().any(|(e, _)| e == end) {
                    outcomes.push((*end, assignment.clone()));
                }
            }
        }
        frontier = next_frontier;
        if matches!(particle.max_occurs, Occurs::Bounded(m) if count >= m) {
            break;
        }
        // Unbounded: keep iterating while progress is possible; the
        // zero-width guard above prevents infinite loops.
        if matches!(particle.max_occurs, Occurs::Unbounded) && count > names.len() as u32 {
            break;
        }
    }
    outcomes
}

/// Match exactly one occurrence of a particle kind.
fn match_once(
    schema: &Schema,
    kind: &ParticleKind,
    names: &[QName],
    pos: usize,
    hwm: &mut usize,
) -> Vec<(usize, Assignment)> {
    match kind {
        ParticleKind::Element(ep) => {
            let (decl_name, type_ref) = match ep {
                ElementParticle::Ref(name) => {
                    let decl = &schema.element_decls[name];
                    (name.clone(), decl.type_ref.clone())
                }
                ElementParticle::Local { name, type_ref } => (name.clone(), type_ref.clone()),
            };
            if names.get(pos) == Some(&decl_name) {
                *hwm = (*hwm).max(pos + 1);
                vec![(pos + 1, vec![(pos, ChildMatch::Declared(type_ref))])]
            } else {
                Vec::new()
            }
        }
        ParticleKind::Wildcard(w) => match names.get(pos) {
            Some(name) if w.admits(&name.namespace_uri) => {
                let m = match w.process_contents {
                    ProcessContents::Strict => match schema.element_decls.get(name) {
                        Some(decl) => ChildMatch::Declared(decl.type_ref.clone()),
                        None => ChildMatch::StrictUndeclared,
                    },
                    other => ChildMatch::Wildcard(other),
                };
                *hwm = (*hwm).max(pos + 1);
                vec![(pos + 1, vec![(pos, m)])]
            }
            _ => Vec::new(),
        },
        ParticleKind::Sequence(children) => {
            let mut states: Vec<(usize, Assignment)> = vec![(pos, Vec::new())];
            for child in children {
                let mut next: Vec<(usize, Assignment)> = Vec::new();
                for (at, assignment) in &states {
                    for (end, extra) in match_particle_all(schema, child, names, *at, hwm) {
                        if !next.iter().any(|(e, _)| *e == end) {
                            let mut combined = assignment.clone();
                            combined.extend(extra);
                            next.push((end, combined));
                        }
                    }
                }
                states = next;
                if states.is_empty() {
                    break;
                }
            }
            states
        }
        ParticleKind::Choice(children) => {
            let mut outcomes: Vec<(usize, Assignment)> = Vec::new();
            for child in children {
                for (end, assignment) in match_particle_all(schema, child, names, pos, hwm) {
                    if !outcomes.iter().any(|(e, _)| *e == end) {
                        outcomes.push((end, assignment));
                    }
                }
            }
            outcomes
        }
        ParticleKind::All(children) => {
            // Each member matches 0/1 times in any order.
            fn all_match(
                schema: &Schema,
                children: &[ParticleModel],
                used: &mut Vec<bool>,
                names: &[QName],
                pos: usize,
                hwm: &mut usize,
            ) -> Option<(usize, Assignment)> {
                let mut satisfied = true;
                for (i, child) in children.iter().enumerate() {
                    if !used[i] && child.min_occurs > 0 {
                        satisfied = false;
                    }
                    if used[i] {
                        continue;
                    }
                    for (end, assignment) in match_once(schema, &child.kind, names, pos, hwm) {
                        used[i] = true;
                        if let Some((final_end, mut rest)) =
                            all_match(schema, children, used, names, end, hwm)
                        {
                            let mut combined = assignment.clone();
                            combined.append(&mut rest);
                            used[i] = false;
                            return Some((final_end, combined));
                        }
                        used[i] = false;
                    }
                }
                if satisfied {
                    Some((pos, Vec::new()))
                } else {
                    None
                }
            }
            let mut used = vec![false; children.len()];
            all_match(schema, children, &mut used, names, pos, hwm)
                .into_iter()
                .collect()
        }
    }
}

fn particle_mentions(particle: &ParticleModel, name: &QName) -> bool {
    match &particle.kind {
        ParticleKind::Sequence(c) | ParticleKind::Choice(c) | ParticleKind::All(c) => {
            c.iter().any(|p| particle_mentions(p, name))
        }
        ParticleKind::Element(ElementParticle::Ref(n)) => n == name,
        ParticleKind::Element(ElementParticle::Local { name: n, .. }) => n == name,
        ParticleKind::Wildcard(_) => false,
    }
}

impl XmlDocument {
    /// Element path for diagnostics; text violations anchor to the parent.
    fn element_path_or_parent(&self, node: NodeId) -> String {
        if self.node(node).is_element() {
            self.element_path(node)
        } else {
            match self.node(node).parent {
                Some(parent) => self.element_path(parent),
                None => "/".to_string(),
            }
        }
    }
}
