//! XSD-subset compiler. Imports and includes resolve exclusively through
//! the catalog; any construct outside the supported subset fails loudly
//! with the feature named.

use std::collections::BTreeMap;

use super::{
    AttributeUse, ComplexType, ContentModel, ElementDecl, ElementParticle, GlobalAttributeDecl,
    NamespaceConstraint, Occurs, ParticleKind, ParticleModel, ProcessContents, Schema,
    SchemaCatalog, SchemaError, TypeRef, WildcardDecl,
};
use crate::ns::XSD;
use crate::xmlcore::{parse, NodeId, ParseOptions, QName, XmlDocument};

pub(super) fn compile(
    root_identifier: &str,
    catalog: &SchemaCatalog,
) -> Result<Schema, SchemaError> {
    let mut compiler = Compiler {
        catalog,
        schema: Schema {
            target_namespace: String::new(),
            element_decls: BTreeMap::new(),
            attribute_decls: BTreeMap::new(),
            named_types: BTreeMap::new(),
            types: Vec::new(),
            wildcards: Vec::new(),
        },
        loaded: Vec::new(),
    };
    compiler.load(root_identifier, None)?;
    compiler.schema.target_namespace = compiler.loaded[0].1.clone();
    compiler.check_references()?;
    Ok(compiler.schema)
}

struct Compiler<'a> {
    catalog: &'a SchemaCatalog,
    schema: Schema,
    /// (identifier, target namespace) of every schema document loaded.
    loaded: Vec<(String, String)>,
}

/// Per-document context while compiling one schema file.
struct DocCtx {
    identifier: String,
    target_namespace: String,
    qualified_elements: bool,
    qualified_attributes: bool,
}

impl Compiler<'_> {
    fn load(
        &mut self,
        identifier: &str,
        expected_namespace: Option<&str>,
    ) -> Result<(), SchemaError> {
        if self.loaded.iter().any(|(id, _)| id == identifier) {
            return Ok(());
        }
        let bytes = self.catalog.resolve(identifier)?;
        let doc = parse(&bytes, &ParseOptions::default())?;
        let root = doc.node(doc.root());
        let root_name = root.name().expect("root is an element");
        if root_name.namespace_uri != XSD || root_name.local_name != "schema" {
            return Err(SchemaError::SchemaSyntaxError {
                location: identifier.to_string(),
                message: format!("root element is {root_name}, expected xs:schema"),
            });
        }
        let tns = root
            .attribute(&QName::local("targetNamespace"))
            .unwrap_or("")
            .to_string();
        if let Some(expected) = expected_namespace {
            if expected != tns {
                return Err(SchemaError::SchemaSyntaxError {
                    location: identifier.to_string(),
                    message: format!(
                        "imported schema declares targetNamespace '{tns}', expected '{expected}'"
                    ),
                });
            }
        }
        self.loaded.push((identifier.to_string(), tns.clone()));

        let ctx = DocCtx {
            identifier: identifier.to_string(),
            target_namespace: tns,
            qualified_elements: root
                .attribute(&QName::local("elementFormDefault"))
                .map(|v| v == "qualified")
                .unwrap_or(false),
            qualified_attributes: root
                .attribute(&QName::local("attributeFormDefault"))
                .map(|v| v == "qualified")
                .unwrap_or(false),
        };

        for &child in &doc.node(doc.root()).children.clone() {
            let node = doc.node(child);
            let name = match node.name() {
                Some(n) if n.namespace_uri == XSD => n.local_name.clone(),
                Some(n) => {
                    return Err(self.syntax(&ctx, format!("unexpected top-level element {n}")))
                }
                None => continue,
            };
            match name.as_str() {
                "annotation" => {}
                "import" => {
                    let ns = node.attribute(&QName::local("namespace")).unwrap_or("");
                    let location = node
                        .attribute(&QName::local("schemaLocation"))
                        .unwrap_or(ns);
                    if location.is_empty() {
                        return Err(self.syntax(&ctx, "import without namespace or schemaLocation".into()));
                    }
                    let location = location.to_string();
                    let ns = ns.to_string();
                    self.load(&location, if ns.is_empty() { None } else { Some(&ns) })?;
                }
                "include" => {
                    let location = node
                        .attribute(&QName::local("schemaLocation"))
                        .ok_or_else(|| self.syntax(&ctx, "include without schemaLocation".into()))?
                        .to_string();
                    let tns = ctx.target_namespace.clone();
                    self.load(&location, Some(&tns))?;
                }
                "element" => self.global_element(&ctx, &doc, child)?,
                "attribute" => self.global_attribute(&ctx, &doc, child)?,
                "complexType" => self.global_complex_type(&ctx, &doc, child)?,
                other => return Err(self.unsupported(&ctx, format!("xs:{other}"))),
            }
        }
        Ok(())
    }

    fn global_element(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<(), SchemaError> {
        let node = doc.node(node_id);
        self.reject_unsupported_attrs(
            ctx,
            doc,
            node_id,
            &["name", "type", "id"],
            "xs:element",
        )?;
        let local = node
            .attribute(&QName::local("name"))
            .ok_or_else(|| self.syntax(ctx, "global element without name".into()))?
            .to_string();
        let name = QName::new(ctx.target_namespace.clone(), local);
        let type_ref = self.element_type(ctx, doc, node_id, &name)?;
        if self
            .schema
            .element_decls
            .insert(name.clone(), ElementDecl { name: name.clone(), type_ref })
            .is_some()
        {
            return Err(self.syntax(ctx, format!("duplicate global element declaration {name}")));
        }
        Ok(())
    }

    fn element_type(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
        context: &QName,
    ) -> Result<TypeRef, SchemaError> {
        let node = doc.node(node_id);
        let named = node.attribute(&QName::local("type")).map(str::to_string);
        let inline: Vec<NodeId> = element_children(doc, node_id)
            .into_iter()
            .filter(|&c| {
                let n = doc.node(c).name().unwrap();
                !(n.namespace_uri == XSD && n.local_name == "annotation")
            })
            .collect();
        match (named, inline.as_slice()) {
            (Some(qname), []) => Ok(TypeRef::Named(self.resolve_qname(ctx, doc, node_id, &qname)?)),
            (None, [only]) => {
                let n = doc.node(*only).name().unwrap();
                if n.namespace_uri == XSD && n.local_name == "complexType" {
                    let idx = self.complex_type(ctx, doc, *only, None, context)?;
                    Ok(TypeRef::Inline(idx))
                } else if n.namespace_uri == XSD && n.local_name == "simpleType" {
                    Err(self.unsupported(ctx, "xs:simpleType".into()))
                } else {
                    Err(self.syntax(ctx, format!("unexpected child {n} of xs:element")))
                }
            }
            (None, []) => Err(self.unsupported(ctx, "element without explicit type".into())),
            _ => Err(self.syntax(
                ctx,
                format!("element {context} has both a type attribute and inline content"),
            )),
        }
    }

    fn global_attribute(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<(), SchemaError> {
        let node = doc.node(node_id);
        let local = node
            .attribute(&QName::local("name"))
            .ok_or_else(|| self.syntax(ctx, "global attribute without name".into()))?
            .to_string();
        let name = QName::new(ctx.target_namespace.clone(), local);
        let is_id = self.attr_type_is_id(ctx, doc, node_id)?;
        if self
            .schema
            .attribute_decls
            .insert(name.clone(), GlobalAttributeDecl { name: name.clone(), is_id })
            .is_some()
        {
            return Err(self.syntax(ctx, format!("duplicate global attribute declaration {name}")));
        }
        Ok(())
    }

    fn attr_type_is_id(
        &self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<bool, SchemaError> {
        if !element_children(doc, node_id).iter().all(|&c| {
            let n = doc.node(c).name().unwrap();
            n.namespace_uri == XSD && n.local_name == "annotation"
        }) {
            return Err(self.unsupported(ctx, "non-builtin attribute type".into()));
        }
        match doc.node(node_id).attribute(&QName::local("type")) {
            None => Ok(false),
            Some(qname) => {
                let resolved = self.resolve_qname(ctx, doc, node_id, qname)?;
                if resolved.namespace_uri != XSD {
                    return Err(self.unsupported(ctx, "non-builtin attribute type".into()));
                }
                Ok(resolved.local_name == "ID")
            }
        }
    }

    fn global_complex_type(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<(), SchemaError> {
        let node = doc.node(node_id);
        let local = node
            .attribute(&QName::local("name"))
            .ok_or_else(|| self.syntax(ctx, "global complexType without name".into()))?
            .to_string();
        let name = QName::new(ctx.target_namespace.clone(), local);
        let idx = self.complex_type(ctx, doc, node_id, Some(name.clone()), &name)?;
        if self.schema.named_types.insert(name.clone(), idx).is_some() {
            return Err(self.syntax(ctx, format!("duplicate type definition {name}")));
        }
        Ok(())
    }

    fn complex_type(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
        name: Option<QName>,
        context: &QName,
    ) -> Result<usize, SchemaError> {
        if doc
            .node(node_id)
            .attribute(&QName::local("mixed"))
            .map(|v| v == "true" || v == "1")
            .unwrap_or(false)
        {
            return Err(self.unsupported(ctx, "mixed content".into()));
        }
        let mut content = ContentModel::Empty;
        let mut attribute_uses = Vec::new();
        let mut attribute_wildcard = None;
        for child in element_children(doc, node_id) {
            let n = doc.node(child).name().unwrap().clone();
            if n.namespace_uri != XSD {
                return Err(self.syntax(ctx, format!("unexpected element {n} in complexType")));
            }
            match n.local_name.as_str() {
                "annotation" => {}
                "sequence" | "choice" | "all" => {
                    if !matches!(content, ContentModel::Empty) {
                        return Err(self.syntax(ctx, "multiple content models in one type".into()));
                    }
                    content =
                        ContentModel::ElementOnly(self.compositor(ctx, doc, child, context)?);
                }
                "attribute" => {
                    attribute_uses.push(self.attribute_use(ctx, doc, child)?);
                }
                "anyAttribute" => {
                    attribute_wildcard =
                        Some(self.wildcard(ctx, doc, child, context, true)?);
                }
                other => return Err(self.unsupported(ctx, format!("xs:{other}"))),
            }
        }
        let idx = self.schema.types.len();
        self.schema.types.push(ComplexType {
            name,
            content,
            attribute_uses,
            attribute_wildcard,
        });
        Ok(idx)
    }

    fn compositor(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
        context: &QName,
    ) -> Result<ParticleModel, SchemaError> {
        let node = doc.node(node_id);
        let kind_name = node.name().unwrap().local_name.clone();
        let (min_occurs, max_occurs) = self.occurs(ctx, doc, node_id)?;
        let mut children = Vec::new();
        for child in element_children(doc, node_id) {
            let n = doc.node(child).name().unwrap().clone();
            if n.namespace_uri != XSD {
                return Err(self.syntax(ctx, format!("unexpected element {n} in {kind_name}")));
            }
            match n.local_name.as_str() {
                "annotation" => {}
                "element" => children.push(self.element_particle(ctx, doc, child)?),
                "sequence" | "choice" => {
                    if kind_name == "all" {
                        return Err(self.syntax(ctx, "xs:all may contain only elements".into()));
                    }
                    children.push(self.compositor(ctx, doc, child, context)?);
                }
                "any" => {
                    let (min, max) = self.occurs(ctx, doc, child)?;
                    let wildcard = self.wildcard(ctx, doc, child, context, false)?;
                    children.push(ParticleModel {
                        kind: ParticleKind::Wildcard(wildcard),
                        min_occurs: min,
                        max_occurs: max,
                    });
                }
                other => return Err(self.unsupported(ctx, format!("xs:{other}"))),
            }
        }
        let kind = match kind_name.as_str() {
            "sequence" => ParticleKind::Sequence(children),
            "choice" => ParticleKind::Choice(children),
            "all" => ParticleKind::All(children),
            _ => unreachable!(),
        };
        Ok(ParticleModel {
            kind,
            min_occurs,
            max_occurs,
        })
    }

    fn element_particle(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<ParticleModel, SchemaError> {
        let node = doc.node(node_id);
        self.reject_unsupported_attrs(
            ctx,
            doc,
            node_id,
            &["name", "type", "ref", "minOccurs", "maxOccurs", "id", "form"],
            "xs:element",
        )?;
        let (min_occurs, max_occurs) = self.occurs(ctx, doc, node_id)?;
        if let Some(reference) = node.attribute(&QName::local("ref")) {
            let target = self.resolve_qname(ctx, doc, node_id, reference)?;
            return Ok(ParticleModel {
                kind: ParticleKind::Element(ElementParticle::Ref(target)),
                min_occurs,
                max_occurs,
            });
        }
        let local = node
            .attribute(&QName::local("name"))
            .ok_or_else(|| self.syntax(ctx, "element particle without name or ref".into()))?
            .to_string();
        if node.attribute(&QName::local("form")).is_some() {
            return Err(self.unsupported(ctx, "per-element form override".into()));
        }
        let namespace = if ctx.qualified_elements {
            ctx.target_namespace.clone()
        } else {
            String::new()
        };
        let name = QName::new(namespace, local);
        let type_ref = self.element_type(ctx, doc, node_id, &name)?;
        Ok(ParticleModel {
            kind: ParticleKind::Element(ElementParticle::Local { name, type_ref }),
            min_occurs,
            max_occurs,
        })
    }

    fn attribute_use(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<AttributeUse, SchemaError> {
        let node = doc.node(node_id);
        let required = match node.attribute(&QName::local("use")) {
            None | Some("optional") => false,
            Some("required") => true,
            Some(other) => {
                return Err(self.unsupported(ctx, format!("attribute use=\"{other}\"")))
            }
        };
        if let Some(reference) = node.attribute(&QName::local("ref")) {
            let target = self.resolve_qname(ctx, doc, node_id, reference)?;
            // Resolution against the global table happens in check_references;
            // record the use with a placeholder ID flag for now.
            return Ok(AttributeUse {
                name: target,
                required,
                is_id: false,
            });
        }
        let local = node
            .attribute(&QName::local("name"))
            .ok_or_else(|| self.syntax(ctx, "attribute without name or ref".into()))?
            .to_string();
        let namespace = if ctx.qualified_attributes {
            ctx.target_namespace.clone()
        } else {
            String::new()
        };
        let is_id = self.attr_type_is_id(ctx, doc, node_id)?;
        Ok(AttributeUse {
            name: QName::new(namespace, local),
            required,
            is_id,
        })
    }

    fn wildcard(
        &mut self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
        context: &QName,
        is_attribute: bool,
    ) -> Result<WildcardDecl, SchemaError> {
        let node = doc.node(node_id);
        let namespace_constraint = match node
            .attribute(&QName::local("namespace"))
            .unwrap_or("##any")
        {
            "##any" => NamespaceConstraint::Any,
            "##other" => NamespaceConstraint::Other,
            list => NamespaceConstraint::List(
                list.split_ascii_whitespace()
                    .map(|token| match token {
                        "##targetNamespace" => ctx.target_namespace.clone(),
                        "##local" => String::new(),
                        uri => uri.to_string(),
                    })
                    .collect(),
            ),
        };
        let process_contents = match node
            .attribute(&QName::local("processContents"))
            .unwrap_or("strict")
        {
            "strict" => ProcessContents::Strict,
            "lax" => ProcessContents::Lax,
            "skip" => ProcessContents::Skip,
            other => {
                return Err(self.syntax(ctx, format!("invalid processContents '{other}'")))
            }
        };
        let decl = WildcardDecl {
            namespace_constraint,
            process_contents,
            schema_location: ctx.identifier.clone(),
            context: context.clone(),
            is_attribute,
            declaring_namespace: ctx.target_namespace.clone(),
        };
        self.schema.wildcards.push(decl.clone());
        Ok(decl)
    }

    fn occurs(
        &self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
    ) -> Result<(u32, Occurs), SchemaError> {
        let node = doc.node(node_id);
        let min = match node.attribute(&QName::local("minOccurs")) {
            None => 1,
            Some(v) => v
                .parse::<u32>()
                .map_err(|_| self.syntax(ctx, format!("invalid minOccurs '{v}'")))?,
        };
        let max = match node.attribute(&QName::local("maxOccurs")) {
            None => Occurs::Bounded(1),
            Some("unbounded") => Occurs::Unbounded,
            Some(v) => Occurs::Bounded(
                v.parse::<u32>()
                    .map_err(|_| self.syntax(ctx, format!("invalid maxOccurs '{v}'")))?,
            ),
        };
        if let Occurs::Bounded(m) = max {
            if min > m {
                return Err(self.syntax(ctx, format!("minOccurs {min} exceeds maxOccurs {m}")));
            }
        }
        Ok((min, max))
    }

    /// Resolve a lexical QName in a schema document against the in-scope
    /// namespace declarations at the node.
    fn resolve_qname(
        &self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
        lexical: &str,
    ) -> Result<QName, SchemaError> {
        let scope = doc.in_scope_namespaces(node_id);
        match lexical.split_once(':') {
            Some((prefix, local)) => {
                let uri = scope.get(prefix).ok_or_else(|| {
                    self.syntax(ctx, format!("undeclared prefix '{prefix}' in '{lexical}'"))
                })?;
                Ok(QName::new(uri.clone(), local))
            }
            None => {
                let uri = scope.get("").cloned().unwrap_or_default();
                Ok(QName::new(uri, lexical))
            }
        }
    }

    fn reject_unsupported_attrs(
        &self,
        ctx: &DocCtx,
        doc: &XmlDocument,
        node_id: NodeId,
        allowed: &[&str],
        what: &str,
    ) -> Result<(), SchemaError> {
        for attr in doc.node(node_id).attributes() {
            if attr.name.namespace_uri.is_empty()
                && !allowed.contains(&attr.name.local_name.as_str())
            {
                return Err(self.unsupported(
                    ctx,
                    format!("{what} attribute '{}'", attr.name.local_name),
                ));
            }
        }
        Ok(())
    }

    /// After all documents load, every reference must resolve and attribute
    /// refs pick up their ID typing from the global declarations.
    fn check_references(&mut self) -> Result<(), SchemaError> {
        let root_location = self.loaded[0].0.clone();
        let dangling = |what: String| SchemaError::SchemaSyntaxError {
            location: root_location.clone(),
            message: what,
        };

        let mut type_refs: Vec<QName> = Vec::new();
        let mut element_refs: Vec<QName> = Vec::new();
        for decl in self.schema.element_decls.values() {
            if let TypeRef::Named(name) = &decl.type_ref {
                type_refs.push(name.clone());
            }
        }
        fn walk(p: &ParticleModel, type_refs: &mut Vec<QName>, element_refs: &mut Vec<QName>) {
            match &p.kind {
                ParticleKind::Sequence(c) | ParticleKind::Choice(c) | ParticleKind::All(c) => {
                    c.iter().for_each(|x| walk(x, type_refs, element_refs));
                }
                ParticleKind::Element(ElementParticle::Ref(name)) => {
                    element_refs.push(name.clone())
                }
                ParticleKind::Element(ElementParticle::Local { type_ref, .. }) => {
                    if let TypeRef::Named(name) = type_ref {
                        type_refs.push(name.clone());
                    }
                }
                ParticleKind::Wildcard(_) => {}
            }
        }
        for ty in &self.schema.types {
            if let ContentModel::ElementOnly(p) = &ty.content {
                walk(p, &mut type_refs, &mut element_refs);
            }
        }

        for name in &type_refs {
            if name.namespace_uri != XSD && !self.schema.named_types.contains_key(name) {
                return Err(dangling(format!("dangling type reference {name}")));
            }
        }
        for name in &element_refs {
            if !self.schema.element_decls.contains_key(name) {
                return Err(dangling(format!("dangling element reference {name}")));
            }
        }

        // Attribute refs: fill in ID typing from the global declaration.
        let attribute_decls = self.schema.attribute_decls.clone();
        for ty in &mut self.schema.types {
            for use_ in &mut ty.attribute_uses {
                if !use_.name.namespace_uri.is_empty() {
                    match attribute_decls.get(&use_.name) {
                        Some(global) => use_.is_id = global.is_id,
                        None => {
                            return Err(dangling(format!(
                                "dangling attribute reference {}",
                                use_.name
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn syntax(&self, ctx: &DocCtx, message: String) -> SchemaError {
        SchemaError::SchemaSyntaxError {
            location: ctx.identifier.clone(),
            message,
        }
    }

    fn unsupported(&self, ctx: &DocCtx, feature: String) -> SchemaError {
        SchemaError::UnsupportedXsdFeature {
            location: ctx.identifier.clone(),
            feature,
        }
    }
}

fn element_children(doc: &XmlDocument, node_id: NodeId) -> Vec<NodeId> {
    doc.node(node_id)
        .children
        .iter()
        .copied()
        .filter(|&c| doc.node(c).is_element())
        .collect()
}
