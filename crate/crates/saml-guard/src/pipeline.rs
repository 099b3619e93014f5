//! The validator pipeline: secure parse → schema validation → Id
//! registration → hardened-XPath selection → key selection → core
//! validation → target-coverage check, returning only the signed subtree.
//!
//! The target-coverage check compares node identity, not content: the node
//! the signature's reference dereferences to must BE the node the hardened
//! target XPath selected. Wrapping attacks preserve content, so a content
//! comparison would re-admit them.
//!
//! A deliberately naive mode reproduces the vulnerable first-match pattern
//! (tag-name scan, no schema validation, Id lookup by scan, no coverage
//! check) for demonstration and corpus testing. Its output is loudly
//! labeled.

use std::collections::HashSet;
use std::path::PathBuf;

use base64::Engine;
use rsa::RsaPublicKey;
use serde::Serialize;
use thiserror::Error;

use crate::c14n::{self, C14nMethod};
use crate::dsig::{self, keys, CoreValidationReport, SignatureSpec};
use crate::ns;
use crate::schema::{self, Schema, SchemaCatalog};
use crate::xmlcore::{parse, NodeId, ParseOptions, QName, XmlDocument};
use crate::xpath::{self, XPathExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidationMode {
    Secure,
    NaiveDemo,
}

/// Validator configuration: the trusted certificate, schema, the two
/// selection XPaths and the Id attribute.
#[derive(Clone, Debug)]
pub struct ValidatorConfig {
    pub trusted_certificate_path: PathBuf,
    pub schema_root_identifier: String,
    pub catalog_path: PathBuf,
    pub signature_xpath: String,
    pub target_xpath: String,
    pub id_attribute: QName,
    pub mode: ValidationMode,
    pub allow_legacy_sha1: bool,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{parameter}: {message}")]
    Config { parameter: String, message: String },
    #[error("naive mode is not enabled for this validator")]
    NaiveModeDisabled,
}

/// Pipeline checkpoints, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Stage {
    ParseOk,
    SchemaOk,
    SelectOk,
    CoreOk,
    TargetCoveredOk,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct StageFailure {
    /// The stage that failed: parse, schema, register-ids, select,
    /// signature-parse, core-validation or target-coverage.
    pub stage: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct SignedSubtree {
    /// Exclusive-canonicalization bytes of exactly the covered element.
    pub canonical_bytes: Vec<u8>,
    pub node_path: String,
}

/// Staged validation result. `accepted` implies the final checkpoint was
/// reached and the signed subtree is present; downstream logic must consume
/// only `signed_subtree`, never the surrounding document.
#[derive(Clone, Debug)]
pub struct ValidationOutcome {
    pub accepted: bool,
    /// Last checkpoint reached; `None` when parsing itself failed.
    pub stage: Option<Stage>,
    pub failure: Option<StageFailure>,
    pub report: Option<CoreValidationReport>,
    pub signed_subtree: Option<SignedSubtree>,
    pub mode: ValidationMode,
    pub warning: Option<String>,
}

impl ValidationOutcome {
    fn failed(
        mode: ValidationMode,
        stage: Option<Stage>,
        failed_stage: &str,
        reason: String,
        report: Option<CoreValidationReport>,
        warning: Option<String>,
    ) -> ValidationOutcome {
        ValidationOutcome {
            accepted: false,
            stage,
            failure: Some(StageFailure {
                stage: failed_stage.to_string(),
                reason,
            }),
            report,
            signed_subtree: None,
            mode,
            warning,
        }
    }

    /// Stable JSON rendering: identical outcomes serialize to identical
    /// bytes (no timestamps, declaration-ordered keys).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct OutcomeJson<'a> {
            accepted: bool,
            mode: &'a str,
            stage: Option<Stage>,
            failure: &'a Option<StageFailure>,
            references: Option<&'a [dsig::ReferenceResult]>,
            signature_valid: Option<bool>,
            signed_subtree_b64: Option<String>,
            signed_subtree_path: Option<&'a str>,
            warning: &'a Option<String>,
        }
        let b64 = base64::engine::general_purpose::STANDARD;
        let json = OutcomeJson {
            accepted: self.accepted,
            mode: match self.mode {
                ValidationMode::Secure => "secure",
                ValidationMode::NaiveDemo => "naive-demo",
            },
            stage: self.stage,
            failure: &self.failure,
            references: self.report.as_ref().map(|r| r.reference_results.as_slice()),
            signature_valid: self.report.as_ref().map(|r| r.signature_valid),
            signed_subtree_b64: self
                .signed_subtree
                .as_ref()
                .map(|s| b64.encode(&s.canonical_bytes)),
            signed_subtree_path: self.signed_subtree.as_ref().map(|s| s.node_path.as_str()),
            warning: &self.warning,
        };
        serde_json::to_string_pretty(&json).expect("outcome serializes")
    }
}

/// Immutable validator: compiled schema, parsed certificate and parsed
/// XPath expressions. Safe to share across threads.
pub struct Validator {
    config: ValidatorConfig,
    catalog: SchemaCatalog,
    schema: Schema,
    certificate_der: Vec<u8>,
    public_key: RsaPublicKey,
    signature_expr: XPathExpr,
    target_expr: XPathExpr,
    warnings: Vec<String>,
}

impl Validator {
    pub fn new(config: ValidatorConfig) -> Result<Validator, PipelineError> {
        let wrap = |parameter: &str, message: String| PipelineError::Config {
            parameter: parameter.to_string(),
            message,
        };
        let catalog = schema::load_catalog(&config.catalog_path)
            .map_err(|e| wrap("catalog_path", e.to_string()))?;
        let schema = schema::compile_schema(&config.schema_root_identifier, &catalog)
            .map_err(|e| wrap("schema_root_identifier", e.to_string()))?;
        let certificate_der = keys::load_certificate_der(&config.trusted_certificate_path)
            .map_err(|e| wrap("trusted_certificate_path", e.to_string()))?;
        let public_key = keys::public_key_from_certificate(&certificate_der)
            .map_err(|e| wrap("trusted_certificate_path", e.to_string()))?;
        let signature_expr = xpath::parse_xpath(&config.signature_xpath)
            .map_err(|e| wrap("signature_xpath", e.to_string()))?;
        let target_expr = xpath::parse_xpath(&config.target_xpath)
            .map_err(|e| wrap("target_xpath", e.to_string()))?;
        let mut warnings = Vec::new();
        if config.allow_legacy_sha1 && config.mode == ValidationMode::Secure {
            warnings.push(
                "allow_legacy_sha1 is enabled on a secure-mode validator; \
SHA-1 signatures will be accepted"
                    .to_string(),
            );
        }
        Ok(Validator {
            config,
            catalog,
            schema,
            certificate_der,
            public_key,
            signature_expr,
            target_expr,
            warnings,
        })
    }

    pub fn config(&self) -> &ValidatorConfig {
        &self.config
    }

    pub fn catalog(&self) -> &SchemaCatalog {
        &self.catalog
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn trusted_certificate_der(&self) -> &[u8] {
        &self.certificate_der
    }

    pub fn construction_warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Secure staged validation. Failures are encoded in the outcome, never
    /// thrown; stages run strictly in order and stop at the first failure.
    pub fn validate(&self, input: &[u8]) -> ValidationOutcome {
        let mode = ValidationMode::Secure;
        let warning = None;

        // Stage 1: secure parse.
        let doc = match parse(input, &ParseOptions::default()) {
            Ok(doc) => doc,
            Err(e) => {
                return ValidationOutcome::failed(mode, None, "parse", e.to_string(), None, warning)
            }
        };

        // Stage 2: schema validation; any violation is terminal.
        let report = schema::validate_document(&self.schema, &doc);
        if !report.valid {
            let first = &report.violations[0];
            return ValidationOutcome::failed(
                mode,
                Some(Stage::ParseOk),
                "schema",
                format!(
                    "{} violation(s); first: {} at {}: {}",
                    report.violations.len(),
                    first.rule,
                    first.node_path,
                    first.message
                ),
                None,
                warning,
            );
        }

        // Stage 3: Id registration — the configured attribute always
        // applies; schema-discovered ID-typed attributes join it. Duplicate
        // values are treated as an Id-collision attack.
        let mut entries: Vec<(String, NodeId)> = Vec::new();
        for id in doc.descendants(doc.root()) {
            if let Some(value) = doc.node(id).attribute(&self.config.id_attribute) {
                entries.push((value.to_string(), id));
            }
        }
        for discovered in &report.id_attributes {
            entries.push((discovered.value.clone(), discovered.node));
        }
        let doc = match doc.with_id_entries(entries) {
            Ok(doc) => doc,
            Err(e) => {
                return ValidationOutcome::failed(
                    mode,
                    Some(Stage::SchemaOk),
                    "register-ids",
                    e.to_string(),
                    None,
                    warning,
                )
            }
        };

        // Stage 4: hardened-XPath selection; each path must select exactly
        // one node.
        let (signature_node, target_node) = match self.select_nodes(&doc) {
            Ok(pair) => pair,
            Err(reason) => {
                return ValidationOutcome::failed(
                    mode,
                    Some(Stage::SchemaOk),
                    "select",
                    reason,
                    None,
                    warning,
                )
            }
        };

        // Stage 5: parse the signature; the key comes from the static
        // selector configured at construction, KeyInfo is ignored.
        let spec = match dsig::parse_signature(&doc, signature_node, self.config.allow_legacy_sha1)
        {
            Ok(spec) => spec,
            Err(e) => {
                return ValidationOutcome::failed(
                    mode,
                    Some(Stage::SelectOk),
                    "signature-parse",
                    e.to_string(),
                    None,
                    warning,
                )
            }
        };

        // Stage 6: core validation.
        let core = match dsig::validate_signature(&doc, &spec, &self.public_key) {
            Ok(core) => core,
            Err(e) => {
                return ValidationOutcome::failed(
                    mode,
                    Some(Stage::SelectOk),
                    "core-validation",
                    e.to_string(),
                    None,
                    warning,
                )
            }
        };
        if !core.core_valid {
            let reason = if !core.signature_valid {
                "signature cryptographic verification failed".to_string()
            } else {
                let bad = core
                    .reference_results
                    .iter()
                    .find(|r| !r.matched)
                    .expect("some reference mismatched");
                format!("reference digest mismatch for '#{}'", bad.uri_fragment)
            };
            return ValidationOutcome::failed(
                mode,
                Some(Stage::SelectOk),
                "core-validation",
                reason,
                Some(core),
                warning,
            );
        }

        // Stage 7: target coverage — the decisive anti-wrapping check. The
        // dereferenced node must BE the selected target (node identity).
        let covered = spec.references.len() == 1
            && core.reference_results[0].dereferenced_node == target_node;
        if !covered {
            let reason = if spec.references.len() != 1 {
                format!(
                    "signature must cover exactly the selected target, found {} references",
                    spec.references.len()
                )
            } else {
                format!(
                    "signature covers {} but the target XPath selected {}",
                    core.reference_results[0].dereferenced_path,
                    doc.element_path(target_node)
                )
            };
            return ValidationOutcome::failed(
                mode,
                Some(Stage::CoreOk),
                "target-coverage",
                reason,
                Some(core),
                warning,
            );
        }

        // Stage 8: emit only the signed subtree (see-what-is-signed).
        let signed_subtree = self.emit_subtree(&doc, target_node, signature_node);
        ValidationOutcome {
            accepted: true,
            stage: Some(Stage::TargetCoveredOk),
            failure: None,
            report: Some(core),
            signed_subtree: Some(signed_subtree),
            mode,
            warning,
        }
    }

    /// Demonstration-only path reproducing the vulnerable first-match
    /// pattern: no schema validation, tag-name scans, Id dereferencing by
    /// scan, no coverage check. Requires a NaiveDemo-mode validator.
    pub fn naive_validate(&self, input: &[u8]) -> Result<ValidationOutcome, PipelineError> {
        if self.config.mode != ValidationMode::NaiveDemo {
            return Err(PipelineError::NaiveModeDisabled);
        }
        let mode = ValidationMode::NaiveDemo;
        let warning = Some(
            "naive demonstration mode: first-match selection, no schema validation, \
no target-coverage check; this path exists to reproduce vulnerabilities"
                .to_string(),
        );

        let doc = match parse(input, &ParseOptions::default()) {
            Ok(doc) => doc,
            Err(e) => {
                return Ok(ValidationOutcome::failed(
                    mode,
                    None,
                    "parse",
                    e.to_string(),
                    None,
                    warning,
                ))
            }
        };

        // First Signature by tag-name scan, mirroring the documented
        // anti-pattern and its single sanity check.
        let signatures = doc.find_by_tag_name(&QName::new(ns::XMLDSIG, "Signature"));
        let Some(&signature_node) = signatures.first() else {
            return Ok(ValidationOutcome::failed(
                mode,
                Some(Stage::ParseOk),
                "select",
                "Cannot find Signature element".to_string(),
                None,
                warning,
            ));
        };

        // First target by tag-name scan (item 0).
        let bindings = match xpath::bindings_from_document(&doc) {
            Ok(b) => b,
            Err(e) => {
                return Ok(ValidationOutcome::failed(
                    mode,
                    Some(Stage::ParseOk),
                    "select",
                    e.to_string(),
                    None,
                    warning,
                ))
            }
        };
        let target_step = self.target_expr.steps.last().expect("parsed path is nonempty");
        let target_name = match xpath::step_qname(target_step, &bindings) {
            Ok(name) => name,
            Err(e) => {
                return Ok(ValidationOutcome::failed(
                    mode,
                    Some(Stage::ParseOk),
                    "select",
                    e.to_string(),
                    None,
                    warning,
                ))
            }
        };
        let targets = doc.find_by_tag_name(&target_name);
        let Some(&target_node) = targets.first() else {
            return Ok(ValidationOutcome::failed(
                mode,
                Some(Stage::ParseOk),
                "select",
                format!("no {} element found", target_name.local_name),
                None,
                warning,
            ));
        };

        let spec = match dsig::parse_signature(&doc, signature_node, self.config.allow_legacy_sha1)
        {
            Ok(spec) => spec,
            Err(e) => {
                return Ok(ValidationOutcome::failed(
                    mode,
                    Some(Stage::SelectOk),
                    "signature-parse",
                    e.to_string(),
                    None,
                    warning,
                ))
            }
        };

        // Reference dereferencing by scanning for the first element whose
        // Id attribute matches — no registry, no duplicate check.
        let core = match self.naive_core(&doc, &spec) {
            Ok(core) => core,
            Err(reason) => {
                return Ok(ValidationOutcome::failed(
                    mode,
                    Some(Stage::SelectOk),
                    "core-validation",
                    reason,
                    None,
                    warning,
                ))
            }
        };
        if !core.core_valid {
            return Ok(ValidationOutcome::failed(
                mode,
                Some(Stage::SelectOk),
                "core-validation",
                "core validation failed".to_string(),
                Some(core),
                warning,
            ));
        }

        // Accepted on cryptography alone; the naive mode hands back whatever
        // element its scan selected first.
        let signed_subtree = self.emit_subtree(&doc, target_node, signature_node);
        Ok(ValidationOutcome {
            accepted: true,
            stage: Some(Stage::CoreOk),
            failure: None,
            report: Some(core),
            signed_subtree: Some(signed_subtree),
            mode,
            warning,
        })
    }

    fn naive_core(
        &self,
        doc: &XmlDocument,
        spec: &SignatureSpec,
    ) -> Result<CoreValidationReport, String> {
        let signed_info = c14n::canonicalize(doc, spec.signed_info_node, &spec.c14n_method)
            .map_err(|e| e.to_string())?;
        let signature_valid = dsig::verify_detached(
            &self.public_key,
            spec.signature_method,
            &signed_info,
            &spec.signature_value,
        );
        let mut reference_results = Vec::new();
        for reference in &spec.references {
            let target = doc
                .descendants(doc.root())
                .find(|&id| {
                    doc.node(id).attribute(&self.config.id_attribute)
                        == Some(reference.uri_fragment.as_str())
                })
                .ok_or_else(|| {
                    format!("no element with Id '{}' found", reference.uri_fragment)
                })?;
            let result =
                dsig::digest_reference_at(doc, reference, spec.signature_node, target)
                    .map_err(|e| e.to_string())?;
            reference_results.push(result);
        }
        let core_valid = signature_valid && reference_results.iter().all(|r| r.matched);
        Ok(CoreValidationReport {
            signature_valid,
            reference_results,
            core_valid,
        })
    }

    fn emit_subtree(
        &self,
        doc: &XmlDocument,
        target_node: NodeId,
        signature_node: NodeId,
    ) -> SignedSubtree {
        let mut omit = HashSet::new();
        omit.insert(signature_node);
        let canonical_bytes =
            c14n::canonicalize_excluding(doc, target_node, &C14nMethod::exclusive(), &omit)
                .expect("target is an element");
        SignedSubtree {
            canonical_bytes,
            node_path: doc.element_path(target_node),
        }
    }

    /// Harden both configured XPaths against the document's bindings and
    /// evaluate them; used by the secure path and the attack generator.
    pub(crate) fn select_nodes(&self, doc: &XmlDocument) -> Result<(NodeId, NodeId), String> {
        let bindings = xpath::bindings_from_document(doc).map_err(|e| e.to_string())?;
        let signature_hardened = xpath::harden(&self.signature_expr, &bindings)
            .map_err(|e| format!("signature XPath: {e}"))?;
        let target_hardened = xpath::harden(&self.target_expr, &bindings)
            .map_err(|e| format!("target XPath: {e}"))?;
        let signature_node = xpath::evaluate(&signature_hardened, doc)
            .ok_or_else(|| "signature XPath selected no node".to_string())?;
        let target_node = xpath::evaluate(&target_hardened, doc)
            .ok_or_else(|| "target XPath selected no node".to_string())?;
        Ok((signature_node, target_node))
    }
}
