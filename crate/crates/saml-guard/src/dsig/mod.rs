//! XML-Signature parsing and core validation (reference validation plus
//! signature validation) against explicitly trusted keys, and a signer for
//! producing test fixtures.
//!
//! Trust is never taken from the document: a [`KeySelector::Static`] ignores
//! KeyInfo outright, and a trust store matches certificates by exact DER
//! bytes only. References are resolved through the document's Id registry,
//! never by scanning.

pub mod keys;
mod sign;

use std::collections::HashSet;

use rsa::RsaPublicKey;
use sha1::Sha1;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::c14n::{self, C14nMethod};
use crate::ns::{EXC_C14N, XMLDSIG};
use crate::xmlcore::{NodeId, NodeKind, QName, XmlDocument, XmlError};

pub use sign::{sign, SignOptions};

/// Signature algorithm URIs accepted at the parsing boundary.
pub mod uri {
    pub const RSA_SHA256: &str = "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256";
    pub const RSA_SHA1: &str = "http://www.w3.org/2000/09/xmldsig#rsa-sha1";
    pub const SHA256: &str = "http://www.w3.org/2001/04/xmlenc#sha256";
    pub const SHA1: &str = "http://www.w3.org/2000/09/xmldsig#sha1";
    pub const ENVELOPED_SIGNATURE: &str =
        "http://www.w3.org/2000/09/xmldsig#enveloped-signature";
}

#[derive(Debug, Error)]
pub enum DsigError {
    #[error("unsupported algorithm '{0}'")]
    UnsupportedAlgorithm(String),
    #[error("reference URI '{0}' is not a same-document fragment")]
    NonFragmentReference(String),
    #[error("malformed signature: {0}")]
    MalformedSignature(String),
    #[error("base64 decoding failed in {0}")]
    Base64Decode(String),
    #[error("reference '#{0}' does not resolve through the Id registry")]
    UnresolvedReference(String),
    #[error("no trusted key matches the signature")]
    NoTrustedKey,
    #[error("certificate error: {0}")]
    CertificateParse(String),
    #[error("failed to read '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    C14n(#[from] c14n::C14nError),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignatureAlgorithm {
    RsaSha256,
    /// Disabled unless the legacy gate is explicitly set.
    RsaSha1,
}

impl SignatureAlgorithm {
    pub fn uri(&self) -> &'static str {
        match self {
            SignatureAlgorithm::RsaSha256 => uri::RSA_SHA256,
            SignatureAlgorithm::RsaSha1 => uri::RSA_SHA1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DigestAlgorithm {
    Sha256,
    /// Disabled unless the legacy gate is explicitly set.
    Sha1,
}

impl DigestAlgorithm {
    pub fn uri(&self) -> &'static str {
        match self {
            DigestAlgorithm::Sha256 => uri::SHA256,
            DigestAlgorithm::Sha1 => uri::SHA1,
        }
    }

    fn digest(&self, data: &[u8]) -> Vec<u8> {
        match self {
            DigestAlgorithm::Sha256 => Sha256::digest(data).to_vec(),
            DigestAlgorithm::Sha1 => Sha1::digest(data).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transform {
    EnvelopedSignature,
    InclusiveC14n { with_comments: bool },
    ExclusiveC14n {
        with_comments: bool,
        inclusive_prefixes: Vec<String>,
    },
}

/// One ds:Reference: a same-document fragment, its transforms and digest.
#[derive(Clone, Debug)]
pub struct Reference {
    /// The id after `#`; never empty.
    pub uri_fragment: String,
    pub transforms: Vec<Transform>,
    pub digest_method: DigestAlgorithm,
    pub digest_value: Vec<u8>,
}

/// Parsed but NEVER a trust source by itself.
#[derive(Clone, Debug, Default)]
pub struct KeyInfoData {
    pub certificates: Vec<Vec<u8>>,
    pub raw_key_values: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SignatureSpec {
    pub signature_node: NodeId,
    pub signed_info_node: NodeId,
    pub c14n_method: C14nMethod,
    pub signature_method: SignatureAlgorithm,
    pub references: Vec<Reference>,
    pub signature_value: Vec<u8>,
    pub key_info: Option<KeyInfoData>,
}

/// Trust policy for selecting the verification key.
#[derive(Clone, Debug)]
pub enum KeySelector {
    /// Exactly one pre-configured certificate; KeyInfo is ignored entirely.
    Static { certificate_der: Vec<u8> },
    /// Nonempty set of trusted certificates; a key is returned only when a
    /// KeyInfo certificate is byte-identical to a store entry.
    TrustStore { certificates_der: Vec<Vec<u8>> },
}

impl KeySelector {
    pub fn static_from_der(certificate_der: Vec<u8>) -> Result<KeySelector, DsigError> {
        keys::public_key_from_certificate(&certificate_der)?;
        Ok(KeySelector::Static { certificate_der })
    }

    pub fn trust_store(certificates_der: Vec<Vec<u8>>) -> Result<KeySelector, DsigError> {
        if certificates_der.is_empty() {
            return Err(DsigError::NoTrustedKey);
        }
        for der in &certificates_der {
            keys::public_key_from_certificate(der)?;
        }
        Ok(KeySelector::TrustStore { certificates_der })
    }
}

/// Select the verification key per the trust policy. Static selectors
/// return the configured certificate's key unconditionally; trust stores
/// require a KeyInfo certificate byte-identical to a store entry (never a
/// subject-name match).
pub fn select_key(
    selector: &KeySelector,
    key_info: Option<&KeyInfoData>,
) -> Result<RsaPublicKey, DsigError> {
    match selector {
        KeySelector::Static { certificate_der } => {
            keys::public_key_from_certificate(certificate_der)
        }
        KeySelector::TrustStore { certificates_der } => {
            let key_info = key_info.ok_or(DsigError::NoTrustedKey)?;
            for candidate in &key_info.certificates {
                if certificates_der.iter().any(|trusted| trusted == candidate) {
                    return keys::public_key_from_certificate(candidate);
                }
            }
            Err(DsigError::NoTrustedKey)
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ReferenceResult {
    pub uri_fragment: String,
    #[serde(serialize_with = "hex_bytes")]
    pub computed_digest: Vec<u8>,
    #[serde(serialize_with = "hex_bytes")]
    pub expected_digest: Vec<u8>,
    #[serde(rename = "match")]
    pub matched: bool,
    #[serde(skip)]
    pub dereferenced_node: NodeId,
    pub dereferenced_path: String,
}

fn hex_bytes<S: serde::Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    s.serialize_str(&out)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CoreValidationReport {
    pub signature_valid: bool,
    pub reference_results: Vec<ReferenceResult>,
    pub core_valid: bool,
}

const SIGNATURE_PARTS: [&str; 3] = ["SignedInfo", "SignatureValue", "KeyInfo"];

/// Parse a ds:Signature element into a [`SignatureSpec`], decoding base64
/// fields and mapping algorithm URIs onto the closed enumerations.
pub fn parse_signature(
    doc: &XmlDocument,
    signature_node: NodeId,
    allow_legacy_sha1: bool,
) -> Result<SignatureSpec, DsigError> {
    let name = doc
        .node(signature_node)
        .name()
        .cloned()
        .ok_or_else(|| DsigError::MalformedSignature("signature node is not an element".into()))?;
    if name != QName::new(XMLDSIG, "Signature") {
        return Err(DsigError::MalformedSignature(format!(
            "expected ds:Signature, found {name}"
        )));
    }
    for child in ds_children(doc, signature_node) {
        let local = doc.node(child).name().unwrap().local_name.clone();
        if !SIGNATURE_PARTS.contains(&local.as_str()) && local != "Object" {
            return Err(DsigError::MalformedSignature(format!(
                "unexpected ds:{local} in Signature"
            )));
        }
    }

    let signed_info_node = required_child(doc, signature_node, "SignedInfo")?;

    let c14n_node = required_child(doc, signed_info_node, "CanonicalizationMethod")?;
    let c14n_uri = algorithm_attr(doc, c14n_node)?;
    let mut c14n_method = C14nMethod::from_uri(&c14n_uri)
        .ok_or_else(|| DsigError::UnsupportedAlgorithm(c14n_uri.clone()))?;
    c14n_method.inclusive_prefixes = inclusive_prefixes(doc, c14n_node);

    let method_node = required_child(doc, signed_info_node, "SignatureMethod")?;
    let method_uri = algorithm_attr(doc, method_node)?;
    let signature_method = match method_uri.as_str() {
        uri::RSA_SHA256 => SignatureAlgorithm::RsaSha256,
        uri::RSA_SHA1 if allow_legacy_sha1 => SignatureAlgorithm::RsaSha1,
        other => return Err(DsigError::UnsupportedAlgorithm(other.to_string())),
    };

    let reference_nodes = children_named(doc, signed_info_node, "Reference");
    if reference_nodes.is_empty() {
        return Err(DsigError::MalformedSignature(
            "SignedInfo carries no Reference".into(),
        ));
    }
    let references = reference_nodes
        .into_iter()
        .map(|node| parse_reference(doc, node, allow_legacy_sha1))
        .collect::<Result<Vec<_>, _>>()?;

    let signature_value_node = required_child(doc, signature_node, "SignatureValue")?;
    let signature_value = decode_base64(&text_content(doc, signature_value_node), "SignatureValue")?;
    if signature_value.is_empty() {
        return Err(DsigError::MalformedSignature("empty SignatureValue".into()));
    }

    let key_info = children_named(doc, signature_node, "KeyInfo")
        .first()
        .map(|&node| parse_key_info(doc, node))
        .transpose()?;

    Ok(SignatureSpec {
        signature_node,
        signed_info_node,
        c14n_method,
        signature_method,
        references,
        signature_value,
        key_info,
    })
}

fn parse_reference(
    doc: &XmlDocument,
    node: NodeId,
    allow_legacy_sha1: bool,
) -> Result<Reference, DsigError> {
    let uri_attr = doc
        .node(node)
        .attribute(&QName::local("URI"))
        .ok_or_else(|| DsigError::MalformedSignature("Reference without URI".into()))?
        .to_string();
    let uri_fragment = match uri_attr.strip_prefix('#') {
        Some(id) if !id.is_empty() => id.to_string(),
        // Remote and whole-document references are rejected by policy.
        _ => return Err(DsigError::NonFragmentReference(uri_attr)),
    };

    let mut transforms = Vec::new();
    if let Some(transforms_node) = children_named(doc, node, "Transforms").first() {
        for t in children_named(doc, *transforms_node, "Transform") {
            let alg = algorithm_attr(doc, t)?;
            let transform = match alg.as_str() {
                uri::ENVELOPED_SIGNATURE => Transform::EnvelopedSignature,
                _ => match C14nMethod::from_uri(&alg) {
                    Some(method) => match method.algorithm {
                        c14n::C14nAlgorithm::InclusiveC14n10 => Transform::InclusiveC14n {
                            with_comments: method.with_comments,
                        },
                        c14n::C14nAlgorithm::ExclusiveC14n10 => Transform::ExclusiveC14n {
                            with_comments: method.with_comments,
                            inclusive_prefixes: inclusive_prefixes(doc, t),
                        },
                    },
                    None => return Err(DsigError::UnsupportedAlgorithm(alg)),
                },
            };
            transforms.push(transform);
        }
    }
    let enveloped_count = transforms
        .iter()
        .filter(|t| matches!(t, Transform::EnvelopedSignature))
        .count();
    if enveloped_count > 1 {
        return Err(DsigError::MalformedSignature(
            "multiple enveloped-signature transforms".into(),
        ));
    }
    if enveloped_count == 1 && !matches!(transforms.first(), Some(Transform::EnvelopedSignature)) {
        return Err(DsigError::MalformedSignature(
            "enveloped-signature transform must come first".into(),
        ));
    }
    let c14n_positions: Vec<usize> = transforms
        .iter()
        .enumerate()
        .filter(|(_, t)| !matches!(t, Transform::EnvelopedSignature))
        .map(|(i, _)| i)
        .collect();
    if c14n_positions.len() > 1
        || c14n_positions
            .first()
            .is_some_and(|&i| i + 1 != transforms.len())
    {
        return Err(DsigError::MalformedSignature(
            "at most one canonicalization transform, in final position".into(),
        ));
    }

    let digest_method_node = required_child(doc, node, "DigestMethod")?;
    let digest_uri = algorithm_attr(doc, digest_method_node)?;
    let digest_method = match digest_uri.as_str() {
        uri::SHA256 => DigestAlgorithm::Sha256,
        uri::SHA1 if allow_legacy_sha1 => DigestAlgorithm::Sha1,
        other => return Err(DsigError::UnsupportedAlgorithm(other.to_string())),
    };
    let digest_value_node = required_child(doc, node, "DigestValue")?;
    let digest_value = decode_base64(&text_content(doc, digest_value_node), "DigestValue")?;

    Ok(Reference {
        uri_fragment,
        transforms,
        digest_method,
        digest_value,
    })
}

fn parse_key_info(doc: &XmlDocument, node: NodeId) -> Result<KeyInfoData, DsigError> {
    let mut data = KeyInfoData::default();
    for id in doc.descendants(node) {
        match doc.node(id).name() {
            Some(name) if name.namespace_uri == XMLDSIG => match name.local_name.as_str() {
                "X509Certificate" => {
                    data.certificates
                        .push(decode_base64(&text_content(doc, id), "X509Certificate")?);
                }
                "KeyValue" => data.raw_key_values.push(text_content(doc, id)),
                _ => {}
            },
            _ => {}
        }
    }
    Ok(data)
}

/// Validate one reference: dereference the fragment through the Id registry
/// only, apply the enveloped-signature exclusion and the reference's
/// canonicalization (inclusive C14N 1.0 when none is listed), then compare
/// digests.
pub fn validate_reference(
    doc: &XmlDocument,
    reference: &Reference,
    signature_node: NodeId,
) -> Result<ReferenceResult, DsigError> {
    let target = doc
        .lookup_id(&reference.uri_fragment)
        .ok_or_else(|| DsigError::UnresolvedReference(reference.uri_fragment.clone()))?;
    digest_reference_at(doc, reference, signature_node, target)
}

/// Digest a reference against an explicitly chosen node. The secure path
/// always goes through [`validate_reference`]; this entry point exists for
/// the naive demonstration mode, which dereferences by scanning.
pub(crate) fn digest_reference_at(
    doc: &XmlDocument,
    reference: &Reference,
    signature_node: NodeId,
    target: NodeId,
) -> Result<ReferenceResult, DsigError> {
    let mut omit = HashSet::new();
    let mut method = C14nMethod::inclusive();
    for transform in &reference.transforms {
        match transform {
            Transform::EnvelopedSignature => {
                omit.insert(signature_node);
            }
            Transform::InclusiveC14n { with_comments } => {
                method = C14nMethod::inclusive();
                method.with_comments = *with_comments;
            }
            Transform::ExclusiveC14n {
                with_comments,
                inclusive_prefixes,
            } => {
                method = C14nMethod::exclusive();
                method.with_comments = *with_comments;
                method.inclusive_prefixes = inclusive_prefixes.clone();
            }
        }
    }

    let bytes = c14n::canonicalize_excluding(doc, target, &method, &omit)?;
    let computed = reference.digest_method.digest(&bytes);
    let matched = computed == reference.digest_value;
    Ok(ReferenceResult {
        uri_fragment: reference.uri_fragment.clone(),
        computed_digest: computed,
        expected_digest: reference.digest_value.clone(),
        matched,
        dereferenced_node: target,
        dereferenced_path: doc.element_path(target),
    })
}

/// Core validation: verify the signature over canonicalized SignedInfo and
/// every reference digest. Cryptographic mismatch is a `false` verdict, not
/// an error.
pub fn validate_signature(
    doc: &XmlDocument,
    spec: &SignatureSpec,
    key: &RsaPublicKey,
) -> Result<CoreValidationReport, DsigError> {
    let signed_info = c14n::canonicalize(doc, spec.signed_info_node, &spec.c14n_method)?;
    let signature_valid = verify_detached(
        key,
        spec.signature_method,
        &signed_info,
        &spec.signature_value,
    );
    let mut reference_results = Vec::with_capacity(spec.references.len());
    for reference in &spec.references {
        reference_results.push(validate_reference(doc, reference, spec.signature_node)?);
    }
    let core_valid = signature_valid && reference_results.iter().all(|r| r.matched);
    Ok(CoreValidationReport {
        signature_valid,
        reference_results,
        core_valid,
    })
}

pub(crate) fn verify_detached(
    key: &RsaPublicKey,
    algorithm: SignatureAlgorithm,
    message: &[u8],
    signature: &[u8],
) -> bool {
    use rsa::signature::Verifier;
    match algorithm {
        SignatureAlgorithm::RsaSha256 => {
            let verifying = rsa::pkcs1v15::VerifyingKey::<Sha256>::new(key.clone());
            match rsa::pkcs1v15::Signature::try_from(signature) {
                Ok(sig) => verifying.verify(message, &sig).is_ok(),
                Err(_) => false,
            }
        }
        SignatureAlgorithm::RsaSha1 => {
            let verifying = rsa::pkcs1v15::VerifyingKey::<Sha1>::new(key.clone());
            match rsa::pkcs1v15::Signature::try_from(signature) {
                Ok(sig) => verifying.verify(message, &sig).is_ok(),
                Err(_) => false,
            }
        }
    }
}

pub(crate) fn sign_rsa(
    key: &rsa::RsaPrivateKey,
    algorithm: SignatureAlgorithm,
    message: &[u8],
) -> Vec<u8> {
    use rsa::signature::{SignatureEncoding, Signer};
    match algorithm {
        SignatureAlgorithm::RsaSha256 => {
            let signing = rsa::pkcs1v15::SigningKey::<Sha256>::new(key.clone());
            signing.sign(message).to_vec()
        }
        SignatureAlgorithm::RsaSha1 => {
            let signing = rsa::pkcs1v15::SigningKey::<Sha1>::new(key.clone());
            signing.sign(message).to_vec()
        }
    }
}

// -- ds: tree navigation helpers -------------------------------------------

fn ds_children(doc: &XmlDocument, node: NodeId) -> Vec<NodeId> {
    doc.node(node)
        .children
        .iter()
        .copied()
        .filter(|&c| {
            doc.node(c)
                .name()
                .is_some_and(|n| n.namespace_uri == XMLDSIG)
        })
        .collect()
}

fn children_named(doc: &XmlDocument, node: NodeId, local: &str) -> Vec<NodeId> {
    let want = QName::new(XMLDSIG, local);
    doc.node(node)
        .children
        .iter()
        .copied()
        .filter(|&c| doc.node(c).name() == Some(&want))
        .collect()
}

fn required_child(doc: &XmlDocument, node: NodeId, local: &str) -> Result<NodeId, DsigError> {
    children_named(doc, node, local)
        .first()
        .copied()
        .ok_or_else(|| DsigError::MalformedSignature(format!("missing ds:{local}")))
}

fn algorithm_attr(doc: &XmlDocument, node: NodeId) -> Result<String, DsigError> {
    doc.node(node)
        .attribute(&QName::local("Algorithm"))
        .map(str::to_string)
        .ok_or_else(|| {
            let name = doc.node(node).name().cloned().unwrap_or_default();
            DsigError::MalformedSignature(format!("{name} without Algorithm attribute"))
        })
}

fn inclusive_prefixes(doc: &XmlDocument, node: NodeId) -> Vec<String> {
    let want = QName::new(EXC_C14N, "InclusiveNamespaces");
    for &child in &doc.node(node).children {
        if doc.node(child).name() == Some(&want) {
            if let Some(list) = doc.node(child).attribute(&QName::local("PrefixList")) {
                return list.split_ascii_whitespace().map(str::to_string).collect();
            }
        }
    }
    Vec::new()
}

fn text_content(doc: &XmlDocument, node: NodeId) -> String {
    let mut out = String::new();
    for id in doc.descendants(node) {
        if let NodeKind::Text(t) = &doc.node(id).kind {
            out.push_str(t);
        }
    }
    out
}

fn decode_base64(text: &str, field: &str) -> Result<Vec<u8>, DsigError> {
    use base64::Engine;
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    base64::engine::general_purpose::STANDARD
        .decode(compact)
        .map_err(|_| DsigError::Base64Decode(field.to_string()))
}
