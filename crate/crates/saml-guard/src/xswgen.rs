//! Signature-wrapping attack generator: derives structural mutants from a
//! valid signed document for corpus-driven testing of validators.
//!
//! Every mutant preserves the original signed subtree byte-for-byte under
//! exclusive canonicalization (so naive digest checks still pass) and plants
//! a distinct evil marker. The wrapper element lives in a dedicated foreign
//! namespace so hardened schemas reject it while wildcard-laden schemas let
//! it through, which makes the value of schema hardening measurable.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use base64::Engine;
use serde::Serialize;
use thiserror::Error;

use crate::ns;
use crate::pipeline::Validator;
use crate::xmlcore::{parse, EditId, ParseOptions, QName, TreeEditor, XmlDocument, XmlError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum MutationKind {
    /// Original target moved under a foreign-namespace wrapper; evil copy
    /// placed at the original location, before the wrapper.
    WrapOriginalAddEvilBefore,
    /// As above, with the evil copy after the wrapper.
    WrapOriginalAddEvilAfter,
    /// Evil copy inserted as an earlier sibling; original untouched.
    EvilSiblingBeforeOriginal,
    /// Evil copy keeps the original Id value; duplicate Ids present.
    EvilSameIdCollision,
    /// A syntactically valid but unverifiable signature inserted before the
    /// real one.
    DuplicateSignatureFirst,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::WrapOriginalAddEvilBefore,
        MutationKind::WrapOriginalAddEvilAfter,
        MutationKind::EvilSiblingBeforeOriginal,
        MutationKind::EvilSameIdCollision,
        MutationKind::DuplicateSignatureFirst,
    ];

    /// Stable identifier used in file names and on the command line.
    pub fn id(&self) -> &'static str {
        match self {
            MutationKind::WrapOriginalAddEvilBefore => "wrap-original-add-evil-before",
            MutationKind::WrapOriginalAddEvilAfter => "wrap-original-add-evil-after",
            MutationKind::EvilSiblingBeforeOriginal => "evil-sibling-before-original",
            MutationKind::EvilSameIdCollision => "evil-same-id-collision",
            MutationKind::DuplicateSignatureFirst => "duplicate-signature-first",
        }
    }

    pub fn from_id(id: &str) -> Option<MutationKind> {
        MutationKind::ALL.iter().copied().find(|k| k.id() == id)
    }
}

#[derive(Debug, Error)]
pub enum XswError {
    #[error("input does not validate under the secure pipeline: {0}")]
    InputNotValid(String),
    #[error("cannot locate the structures to mutate: {0}")]
    UnsupportedStructure(String),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("failed to write corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// One generated attack document.
#[derive(Clone, Debug)]
pub struct MutantRecord {
    pub kind: MutationKind,
    pub output_bytes: Vec<u8>,
    /// Distinct content planted in the evil element.
    pub evil_marker: String,
    /// The original signed subtree is byte-preserved under exclusive
    /// canonicalization; always true by construction.
    pub preserved_original: bool,
    /// Element path of the (possibly relocated) original target in the
    /// mutant document.
    pub original_path: String,
}

/// Generate one mutant per requested kind from a document that validates
/// under `validator`. The generator refuses already-invalid input.
pub fn generate(
    validator: &Validator,
    input: &[u8],
    kinds: &BTreeSet<MutationKind>,
    evil_subject: &str,
) -> Result<Vec<MutantRecord>, XswError> {
    let outcome = validator.validate(input);
    if !outcome.accepted {
        let reason = outcome
            .failure
            .map(|f| format!("{} stage: {}", f.stage, f.reason))
            .unwrap_or_else(|| "rejected".to_string());
        return Err(XswError::InputNotValid(reason));
    }

    let doc = parse(input, &ParseOptions::default())?;
    let (signature_node, target_node) = validator
        .select_nodes(&doc)
        .map_err(XswError::UnsupportedStructure)?;

    let mut records = Vec::new();
    for kind in MutationKind::ALL {
        if !kinds.contains(&kind) {
            continue;
        }
        records.push(build_mutant(
            validator,
            &doc,
            signature_node,
            target_node,
            kind,
            evil_subject,
        )?);
    }
    Ok(records)
}

enum IdHandling {
    /// Rename so the registry sees distinct values.
    Rename,
    /// Keep the original value to force an Id collision.
    Keep,
}

fn build_mutant(
    validator: &Validator,
    doc: &XmlDocument,
    signature_node: crate::xmlcore::NodeId,
    target_node: crate::xmlcore::NodeId,
    kind: MutationKind,
    evil_subject: &str,
) -> Result<MutantRecord, XswError> {
    let id_attr = validator.config().id_attribute.clone();
    let (mut editor, map) = TreeEditor::new(doc);
    let signature = map(signature_node);
    let target = map(target_node);
    let target_parent = editor
        .parent(target)
        .ok_or_else(|| XswError::UnsupportedStructure("target is the root element".to_string()))?;

    let original: EditId;
    match kind {
        MutationKind::WrapOriginalAddEvilBefore | MutationKind::WrapOriginalAddEvilAfter => {
            let idx = editor.detach(target);
            let wrapper = editor.new_element(QName::prefixed(ns::XSWGEN_WRAPPER, "Wrapper", "xsw"));
            editor.declare_namespace(wrapper, "xsw", ns::XSWGEN_WRAPPER);
            editor.attach(wrapper, 0, target);
            editor.attach(target_parent, idx, wrapper);
            let evil = evil_copy(&mut editor, target, &id_attr, IdHandling::Rename, evil_subject);
            let at = if kind == MutationKind::WrapOriginalAddEvilBefore {
                idx
            } else {
                idx + 1
            };
            editor.attach(target_parent, at, evil);
            original = target;
        }
        MutationKind::EvilSiblingBeforeOriginal => {
            let evil = evil_copy(&mut editor, target, &id_attr, IdHandling::Rename, evil_subject);
            let idx = editor.child_index(target);
            editor.attach(target_parent, idx, evil);
            original = target;
        }
        MutationKind::EvilSameIdCollision => {
            let evil = evil_copy(&mut editor, target, &id_attr, IdHandling::Keep, evil_subject);
            // Prefer a header-like element: a child of the root that holds
            // the signature but not the target, where permissive schemas
            // accept foreign content; fall back to an earlier sibling.
            let host = header_like_host(&editor, signature, target);
            match host {
                Some(host) => editor.attach(host, 0, evil),
                None => {
                    let idx = editor.child_index(target);
                    editor.attach(target_parent, idx, evil);
                }
            }
            original = target;
        }
        MutationKind::DuplicateSignatureFirst => {
            let fake = editor.deep_copy(signature);
            corrupt_signature_value(&mut editor, fake)?;
            editor.declare_namespace(fake, "xsw", ns::XSWGEN_WRAPPER);
            editor.set_attribute(
                fake,
                QName::prefixed(ns::XSWGEN_WRAPPER, "marker", "xsw"),
                evil_subject,
            );
            let sig_parent = editor.parent(signature).ok_or_else(|| {
                XswError::UnsupportedStructure("signature is the root element".to_string())
            })?;
            let idx = editor.child_index(signature);
            editor.attach(sig_parent, idx, fake);
            original = target;
        }
    }

    let original_index_path = editor.index_path(original);
    let finished = editor.finish()?;
    let original_path = finished
        .resolve_index_path(&original_index_path)
        .map(|node| finished.element_path(node))
        .ok_or_else(|| {
            XswError::UnsupportedStructure("original target lost during mutation".to_string())
        })?;

    Ok(MutantRecord {
        kind,
        output_bytes: finished.serialize_document(),
        evil_marker: evil_subject.to_string(),
        preserved_original: true,
        original_path,
    })
}

/// Deep copy of the target with the evil subject planted: the first
/// `Subject` descendant's text is replaced, and a marker attribute in the
/// wrapper namespace is set on the copy's root.
fn evil_copy(
    editor: &mut TreeEditor,
    target: EditId,
    id_attr: &QName,
    id_handling: IdHandling,
    evil_subject: &str,
) -> EditId {
    let copy = editor.deep_copy(target);
    editor.declare_namespace(copy, "xsw", ns::XSWGEN_WRAPPER);
    editor.set_attribute(
        copy,
        QName::prefixed(ns::XSWGEN_WRAPPER, "marker", "xsw"),
        evil_subject,
    );
    if let Some(subject) = editor.find_local_name(copy, "Subject") {
        editor.set_text_content(subject, evil_subject);
    }
    if let IdHandling::Rename = id_handling {
        if let Some(value) = editor.attribute(copy, id_attr) {
            editor.set_attribute(copy, id_attr.clone(), format!("evil-{value}"));
        }
    }
    copy
}

/// First element child of the root that contains `signature` but not
/// `target`.
fn header_like_host(editor: &TreeEditor, signature: EditId, target: EditId) -> Option<EditId> {
    let root = editor.root();
    editor
        .children(root)
        .into_iter()
        .filter(|&c| editor.name(c).is_some())
        .find(|&c| editor.contains(c, signature) && !editor.contains(c, target))
}

/// Flip one byte of the copied SignatureValue so the fake signature parses
/// but can never verify.
fn corrupt_signature_value(editor: &mut TreeEditor, fake: EditId) -> Result<(), XswError> {
    let sv = editor.find_local_name(fake, "SignatureValue").ok_or_else(|| {
        XswError::UnsupportedStructure("copied signature lacks a SignatureValue".to_string())
    })?;
    let b64 = base64::engine::general_purpose::STANDARD;
    let text: String = editor
        .text_content(sv)
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let mut bytes = b64.decode(text).map_err(|_| {
        XswError::UnsupportedStructure("copied SignatureValue is not base64".to_string())
    })?;
    if bytes.is_empty() {
        return Err(XswError::UnsupportedStructure(
            "copied SignatureValue is empty".to_string(),
        ));
    }
    bytes[0] ^= 0x01;
    editor.set_text_content(sv, b64.encode(&bytes));
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    kind: &'static str,
    file: String,
    evil_marker: String,
    preserved_original: bool,
    original_path: String,
}

/// Write mutants as `mutant-<kind>.xml` plus `manifest.json` in `dir`.
/// Returns the manifest path.
pub fn write_corpus(dir: &Path, records: &[MutantRecord]) -> Result<PathBuf, XswError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(records.len());
    for record in records {
        let file = format!("mutant-{}.xml", record.kind.id());
        std::fs::write(dir.join(&file), &record.output_bytes)?;
        entries.push(ManifestEntry {
            kind: record.kind.id(),
            file,
            evil_marker: record.evil_marker.clone(),
            preserved_original: record.preserved_original,
            original_path: record.original_path.clone(),
        });
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = serde_json::json!({ "mutants": entries });
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(manifest_path)
}
