//! Local-catalog schema resolution, XSD-subset compilation, structural
//! document validation and schema-hardening audit.
//!
//! Schemas are only ever read from a local catalog: identifiers that do not
//! resolve fail with [`SchemaError::UnknownSchemaIdentifier`], which is the
//! enforced replacement for automatic download. The supported XSD subset is
//! what structural anti-wrapping validation needs — element declarations,
//! sequence/choice/all compositors with occurrence bounds, attribute uses
//! with ID-type detection, and wildcards — everything else is rejected by
//! name.

mod compile;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::xmlcore::{NodeId, QName, XmlError};

pub use validate::validate_document;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("catalog parse error at {path}:{line}: {message}")]
    CatalogParseError {
        path: String,
        line: usize,
        message: String,
    },
    #[error("catalog entry '{identifier}' maps to non-local target '{target}'")]
    NonLocalTarget { identifier: String, target: String },
    #[error("catalog entry '{identifier}' maps to missing file '{path}'")]
    MissingSchemaFile { identifier: String, path: String },
    #[error("no trusted schema for identifier '{0}' (automatic download is never attempted)")]
    UnknownSchemaIdentifier(String),
    #[error("schema syntax error in '{location}': {message}")]
    SchemaSyntaxError { location: String, message: String },
    #[error("unsupported XSD feature in '{location}': {feature}")]
    UnsupportedXsdFeature { location: String, feature: String },
    #[error("failed to read '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema document is not well-formed XML: {0}")]
    Xml(#[from] XmlError),
}

/// Mapping from schema identifiers (namespace URIs or systemId-style URLs)
/// to local trusted schema files. Only file targets are representable.
#[derive(Clone, Debug)]
pub struct SchemaCatalog {
    /// identifier → absolute local path, in declaration order (last wins).
    entries: Vec<(String, PathBuf)>,
}

/// Load a catalog file: one `identifier<TAB>path` entry per line, `#`
/// comments, UTF-8. Relative paths resolve against the catalog's directory.
pub fn load_catalog(path: &Path) -> Result<SchemaCatalog, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (identifier, target) =
            trimmed
                .split_once('\t')
                .ok_or_else(|| SchemaError::CatalogParseError {
                    path: path.display().to_string(),
                    line: line_no,
                    message: "expected '<identifier><TAB><local path>'".to_string(),
                })?;
        let identifier = identifier.trim();
        let target = target.trim();
        if identifier.is_empty() || target.is_empty() {
            return Err(SchemaError::CatalogParseError {
                path: path.display().to_string(),
                line: line_no,
                message: "empty identifier or target".to_string(),
            });
        }
        if target.contains("://") {
            return Err(SchemaError::NonLocalTarget {
                identifier: identifier.to_string(),
                target: target.to_string(),
            });
        }
        let resolved = if Path::new(target).is_absolute() {
            PathBuf::from(target)
        } else {
            base.join(target)
        };
        if !resolved.is_file() {
            return Err(SchemaError::MissingSchemaFile {
                identifier: identifier.to_string(),
                path: resolved.display().to_string(),
            });
        }
        entries.push((identifier.to_string(), resolved));
    }
    Ok(SchemaCatalog { entries })
}

impl SchemaCatalog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Resolve an identifier to the mapped local file's bytes. Matching is
    /// exact first, then the longest catalog key that is a suffix of the
    /// identifier (the `endsWith` pattern); among equal keys the last entry
    /// wins. Never touches the network regardless of identifier shape.
    pub fn resolve(&self, identifier: &str) -> Result<Vec<u8>, SchemaError> {
        let path = self.resolve_path(identifier)?;
        std::fs::read(&path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn resolve_path(&self, identifier: &str) -> Result<PathBuf, SchemaError> {
        if let Some((_, path)) = self
            .entries
            .iter()
            .rev()
            .find(|(key, _)| key == identifier)
        {
            return Ok(path.clone());
        }
        let best = self
            .entries
            .iter()
            .rev()
            .filter(|(key, _)| identifier.ends_with(key.as_str()))
            .max_by_key(|(key, _)| key.len());
        match best {
            Some((_, path)) => Ok(path.clone()),
            None => Err(SchemaError::UnknownSchemaIdentifier(identifier.to_string())),
        }
    }
}

/// Occurrence upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occurs {
    Bounded(u32),
    Unbounded,
}

impl Occurs {
    pub fn admits(&self, count: u32) -> bool {
        match self {
            Occurs::Bounded(max) => count <= *max,
            Occurs::Unbounded => true,
        }
    }
}

impl fmt::Display for Occurs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Occurs::Bounded(n) => write!(f, "{n}"),
            Occurs::Unbounded => write!(f, "unbounded"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NamespaceConstraint {
    Any,
    /// Any namespace other than the declaring schema's target namespace;
    /// excludes unqualified names.
    Other,
    List(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcessContents {
    Strict,
    Lax,
    Skip,
}

/// A wildcard as written in a schema, kept for validation and audit.
#[derive(Clone, Debug)]
pub struct WildcardDecl {
    pub namespace_constraint: NamespaceConstraint,
    pub process_contents: ProcessContents,
    /// Identifier of the schema document that declared the wildcard.
    pub schema_location: String,
    /// QName of the enclosing type (or element, for anonymous types).
    pub context: QName,
    pub is_attribute: bool,
    /// Target namespace the constraint is interpreted against.
    pub declaring_namespace: String,
}

impl WildcardDecl {
    pub fn admits(&self, namespace: &str) -> bool {
        match &self.namespace_constraint {
            NamespaceConstraint::Any => true,
            NamespaceConstraint::Other => {
                !namespace.is_empty() && namespace != self.declaring_namespace
            }
            NamespaceConstraint::List(list) => list.iter().any(|n| n == namespace),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParticleModel {
    pub kind: ParticleKind,
    pub min_occurs: u32,
    pub max_occurs: Occurs,
}

#[derive(Clone, Debug)]
pub enum ParticleKind {
    Sequence(Vec<ParticleModel>),
    Choice(Vec<ParticleModel>),
    All(Vec<ParticleModel>),
    Element(ElementParticle),
    Wildcard(WildcardDecl),
}

#[derive(Clone, Debug)]
pub enum ElementParticle {
    /// Reference to a global element declaration.
    Ref(QName),
    /// Locally declared element.
    Local { name: QName, type_ref: TypeRef },
}

#[derive(Clone, Debug)]
pub enum TypeRef {
    /// Named type: either a built-in `xs:*` simple type (treated as opaque
    /// text, with `xs:ID` recognised) or a named complex type.
    Named(QName),
    /// Anonymous complex type, by index into the schema's type arena.
    Inline(usize),
}

#[derive(Clone, Debug)]
pub struct AttributeUse {
    pub name: QName,
    pub required: bool,
    pub is_id: bool,
}

#[derive(Clone, Debug)]
pub struct ComplexType {
    pub name: Option<QName>,
    pub content: ContentModel,
    pub attribute_uses: Vec<AttributeUse>,
    pub attribute_wildcard: Option<WildcardDecl>,
}

#[derive(Clone, Debug)]
pub enum ContentModel {
    ElementOnly(ParticleModel),
    Empty,
}

#[derive(Clone, Debug)]
pub struct ElementDecl {
    pub name: QName,
    pub type_ref: TypeRef,
}

#[derive(Clone, Debug)]
pub struct GlobalAttributeDecl {
    pub name: QName,
    pub is_id: bool,
}

/// Compiled schema: global symbol tables plus a type arena. Immutable after
/// compilation.
#[derive(Clone, Debug)]
pub struct Schema {
    pub target_namespace: String,
    pub(crate) element_decls: BTreeMap<QName, ElementDecl>,
    pub(crate) attribute_decls: BTreeMap<QName, GlobalAttributeDecl>,
    pub(crate) named_types: BTreeMap<QName, usize>,
    pub(crate) types: Vec<ComplexType>,
    pub(crate) wildcards: Vec<WildcardDecl>,
}

impl Schema {
    pub fn element_decl(&self, name: &QName) -> Option<&ElementDecl> {
        self.element_decls.get(name)
    }

    pub fn global_attribute(&self, name: &QName) -> Option<&GlobalAttributeDecl> {
        self.attribute_decls.get(name)
    }

    pub fn element_names(&self) -> impl Iterator<Item = &QName> {
        self.element_decls.keys()
    }

    pub fn wildcards(&self) -> &[WildcardDecl] {
        &self.wildcards
    }

    /// Every element QName declared anywhere in the schema, global or local.
    pub fn declared_element_names(&self) -> Vec<QName> {
        let mut names: Vec<QName> = self.element_decls.keys().cloned().collect();
        fn walk(p: &ParticleModel, names: &mut Vec<QName>) {
            match &p.kind {
                ParticleKind::Sequence(children)
                | ParticleKind::Choice(children)
                | ParticleKind::All(children) => {
                    children.iter().for_each(|c| walk(c, names));
                }
                ParticleKind::Element(ElementParticle::Local { name, .. }) => {
                    names.push(name.clone());
                }
                _ => {}
            }
        }
        for ty in &self.types {
            if let ContentModel::ElementOnly(p) = &ty.content {
                walk(p, &mut names);
            }
        }
        names.sort();
        names.dedup();
        names
    }
}

/// Compile the schema reachable from `root_identifier`, resolving every
/// import and include exclusively through the catalog.
pub fn compile_schema(
    root_identifier: &str,
    catalog: &SchemaCatalog,
) -> Result<Schema, SchemaError> {
    compile::compile(root_identifier, catalog)
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub node_path: String,
    pub rule: String,
    pub message: String,
}

/// An attribute instance whose declaration is ID-typed, discovered during
/// validation so Id registration can be automatic.
#[derive(Clone, Debug)]
pub struct DiscoveredId {
    pub node: NodeId,
    pub attribute: QName,
    pub value: String,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub id_attributes: Vec<DiscoveredId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum AuditKind {
    AnyElement,
    AnyAttribute,
    LaxProcessing,
    SkipProcessing,
    AnyNamespace,
    OtherNamespace,
}

impl fmt::Display for AuditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditFinding {
    pub schema_location: String,
    pub kind: AuditKind,
    pub context: QName,
}

/// Report every wildcard construct in the schema: one finding per dangerous
/// facet (element/attribute wildcard, lax/skip processing, ##any/##other
/// namespace). An empty result means the schema is hardened with respect to
/// these constructs.
pub fn audit_schema(schema: &Schema) -> Vec<AuditFinding> {
    let mut findings = Vec::new();
    for w in &schema.wildcards {
        let mut kinds = vec![if w.is_attribute {
            AuditKind::AnyAttribute
        } else {
            AuditKind::AnyElement
        }];
        match w.process_contents {
            ProcessContents::Lax => kinds.push(AuditKind::LaxProcessing),
            ProcessContents::Skip => kinds.push(AuditKind::SkipProcessing),
            ProcessContents::Strict => {}
        }
        match w.namespace_constraint {
            NamespaceConstraint::Any => kinds.push(AuditKind::AnyNamespace),
            NamespaceConstraint::Other => kinds.push(AuditKind::OtherNamespace),
            NamespaceConstraint::List(_) => {}
        }
        for kind in kinds {
            findings.push(AuditFinding {
                schema_location: w.schema_location.clone(),
                kind,
                context: w.context.clone(),
            });
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn catalog_loads_and_resolves_by_suffix() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "secext.xsd", "<schema/>");
        let catalog_path = write_file(
            dir.path(),
            "catalog.txt",
            "# trusted schemas\noasis-200401-wss-wssecurity-secext-1.0.xsd\tsecext.xsd\n",
        );
        let catalog = load_catalog(&catalog_path).unwrap();
        let bytes = catalog
            .resolve("http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-secext-1.0.xsd")
            .unwrap();
        assert_eq!(bytes, b"<schema/>");
    }

    #[test]
    fn catalog_rejects_network_targets() {
        let dir = tempfile::tempdir().unwrap();
        let catalog_path = write_file(
            dir.path(),
            "catalog.txt",
            "something\thttp://example.com/x.xsd\n",
        );
        let err = load_catalog(&catalog_path).unwrap_err();
        assert!(matches!(err, SchemaError::NonLocalTarget { .. }));
    }

    #[test]
    fn catalog_rejects_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let catalog_path = write_file(dir.path(), "catalog.txt", "x\tnot-there.xsd\n");
        let err = load_catalog(&catalog_path).unwrap_err();
        assert!(matches!(err, SchemaError::MissingSchemaFile { .. }));
    }

    #[test]
    fn empty_catalog_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let catalog_path = write_file(dir.path(), "catalog.txt", "# nothing\n\n");
        let catalog = load_catalog(&catalog_path).unwrap();
        assert!(catalog.is_empty());
        assert!(matches!(
            catalog.resolve("http://www.w3.org/2003/05/soap-envelope"),
            Err(SchemaError::UnknownSchemaIdentifier(_))
        ));
    }

    #[test]
    fn unknown_identifier_never_downloads() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "a.xsd", "x");
        let catalog_path = write_file(dir.path(), "catalog.txt", "a.xsd\ta.xsd\n");
        let catalog = load_catalog(&catalog_path).unwrap();
        let err = catalog
            .resolve("http://www.w3.org/2003/05/soap-envelope")
            .unwrap_err();
        assert!(matches!(err, SchemaError::UnknownSchemaIdentifier(_)));
    }

    #[test]
    fn duplicate_identifier_last_entry_wins() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "one.xsd", "one");
        write_file(dir.path(), "two.xsd", "two");
        let catalog_path = write_file(
            dir.path(),
            "catalog.txt",
            "same-id\tone.xsd\nsame-id\ttwo.xsd\n",
        );
        let catalog = load_catalog(&catalog_path).unwrap();
        assert_eq!(catalog.resolve("same-id").unwrap(), b"two");
    }

    #[test]
    fn longest_suffix_wins() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "short.xsd", "short");
        write_file(dir.path(), "long.xsd", "long");
        let catalog_path = write_file(
            dir.path(),
            "catalog.txt",
            "envelope.xsd\tshort.xsd\nsoap-envelope.xsd\tlong.xsd\n",
        );
        let catalog = load_catalog(&catalog_path).unwrap();
        assert_eq!(
            catalog.resolve("http://x/y/soap-envelope.xsd").unwrap(),
            b"long"
        );
    }
}
