//! Hardened XML-Signature / SAML-assertion validation toolkit.
//!
//! The crate implements a secure validation pipeline — schema validation
//! against local trusted schemas, hardened absolute-XPath element selection,
//! and canonicalization-based signature core validation against explicitly
//! trusted keys — together with a signature-wrapping attack generator and a
//! deliberately naive validation mode that reproduces the vulnerable
//! first-match pattern those attacks exploit.

pub mod c14n;
pub mod dsig;
pub mod fixture;
pub mod pipeline;
pub mod schema;
pub mod xmlcore;
pub mod xswgen;
pub mod xpath;

/// Well-known namespace URIs used throughout the toolkit.
pub mod ns {
    pub const SOAP_ENVELOPE: &str = "http://schemas.xmlsoap.org/soap/envelope/";
    pub const XMLDSIG: &str = "http://www.w3.org/2000/09/xmldsig#";
    pub const EXC_C14N: &str = "http://www.w3.org/2001/10/xml-exc-c14n#";
    pub const WSSE: &str =
        "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-secext-1.0.xsd";
    pub const WSU: &str =
        "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-utility-1.0.xsd";
    pub const SAML_ASSERTION: &str = "urn:oasis:names:tc:SAML:2.0:assertion";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema";
    /// Foreign namespace used for wrapper elements in generated attack
    /// documents, so hardened schemas reject them while wildcard-laden
    /// schemas let them through.
    pub const XSWGEN_WRAPPER: &str = "urn:xswgen:wrapper";
}
