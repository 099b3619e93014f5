//! Fixture factories: the signed SOAP-envelope document the test suite,
//! examples and attack-corpus demos are built around, plus paths to the
//! bundled schema catalog.

use std::path::PathBuf;

use rsa::RsaPrivateKey;

use crate::dsig::{self, keys, SignOptions};
use crate::ns;
use crate::xmlcore::{parse, ParseOptions, QName, XmlDocument};
use crate::xpath;

/// Id value carried by the envelope Body.
pub const BODY_ID: &str = "body-1";
/// XPath selecting the signature, as configured in the validator.
pub const SIGNATURE_XPATH: &str = "/soape:Envelope/soape:Header/wsse:Security/ds:Signature";
/// XPath selecting the validated business element.
pub const TARGET_XPATH: &str = "/soape:Envelope/soape:Body";
/// Schema identifier for the permissive bundled envelope schema.
pub const SCHEMA_ID: &str = "soap-envelope.xsd";
/// Schema identifier for the hardened bundled envelope schema.
pub const HARDENED_SCHEMA_ID: &str = "soap-envelope-hardened.xsd";

/// The wsu:Id attribute the validator registers.
pub fn id_attribute() -> QName {
    QName::new(ns::WSU, "Id")
}

/// Directory holding the bundled schemas, catalog and canonicalization
/// corpus.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn catalog_path() -> PathBuf {
    fixture_dir().join("catalog.txt")
}

/// Unsigned SOAP envelope: Security header awaiting a signature, Body
/// carrying a minimal SAML-style assertion for `subject`.
pub fn unsigned_envelope(subject: &str, statement: &str) -> String {
    format!(
        r#"<soape:Envelope xmlns:soape="{soap}">
  <soape:Header>
    <wsse:Security xmlns:wsse="{wsse}"></wsse:Security>
  </soape:Header>
  <soape:Body xmlns:wsu="{wsu}" wsu:Id="{id}">
    <saml:Assertion xmlns:saml="{saml}">
      <saml:Issuer>idp.example.org</saml:Issuer>
      <saml:Subject>{subject}</saml:Subject>
      <saml:Statement>{statement}</saml:Statement>
    </saml:Assertion>
  </soape:Body>
</soape:Envelope>"#,
        soap = ns::SOAP_ENVELOPE,
        wsse = ns::WSSE,
        wsu = ns::WSU,
        saml = ns::SAML_ASSERTION,
        id = BODY_ID,
    )
}

/// An RSA-2048 signer identity with a self-signed certificate.
pub struct Signer {
    pub key: RsaPrivateKey,
    pub certificate_der: Vec<u8>,
}

impl Signer {
    pub fn generate(common_name: &str) -> Signer {
        let (key, certificate_der) =
            keys::generate_self_signed(common_name).expect("key generation");
        Signer {
            key,
            certificate_der,
        }
    }
}

/// Sign the Body of an envelope document, inserting the signature into the
/// Security header, and return the serialized result.
pub fn sign_envelope_bytes(envelope: &str, signer: &Signer) -> Vec<u8> {
    let doc = parse(envelope.as_bytes(), &ParseOptions::default()).expect("fixture parses");
    let (doc, _) = doc
        .register_id_attribute(&id_attribute())
        .expect("fixture ids are unique");
    let security = locate(&doc, "/soape:Envelope/soape:Header/wsse:Security");
    let signed = dsig::sign(
        &doc,
        BODY_ID,
        &signer.key,
        &signer.certificate_der,
        &SignOptions::default(),
        security,
    )
    .expect("fixture signs");
    signed.serialize_document()
}

/// The standard valid signed fixture for `subject` "Alice".
pub fn signed_envelope(signer: &Signer) -> Vec<u8> {
    sign_envelope_bytes(
        &unsigned_envelope("Alice", "Alice is authorised to use Secret service"),
        signer,
    )
}

fn locate(doc: &XmlDocument, path: &str) -> crate::xmlcore::NodeId {
    let expr = xpath::parse_xpath(path).expect("fixture xpath parses");
    let bindings = xpath::bindings_from_document(doc).expect("fixture bindings");
    let hardened = xpath::harden(&expr, &bindings).expect("fixture xpath hardens");
    xpath::evaluate(&hardened, doc).expect("fixture element present")
}
