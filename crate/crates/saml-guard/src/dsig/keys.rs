//! Certificate and key handling: DER/PEM loading, public-key extraction,
//! and self-signed certificate generation for fixtures and tests.
//!
//! Trust decisions never look at certificate contents beyond the key:
//! selectors compare exact DER bytes.

use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rsa::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePublicKey};
use rsa::{RsaPrivateKey, RsaPublicKey};
use sha2::Sha256;
use x509_cert::builder::{Builder, CertificateBuilder, Profile};
use x509_cert::der::{Decode, Encode};
use x509_cert::name::Name;
use x509_cert::serial_number::SerialNumber;
use x509_cert::spki::SubjectPublicKeyInfoOwned;
use x509_cert::time::Validity;
use x509_cert::Certificate;

use super::DsigError;

const CERT_PEM_LABEL: &str = "CERTIFICATE";
const KEY_PEM_LABEL: &str = "PRIVATE KEY";

/// Decode a PEM block with the given label into its DER bytes.
fn pem_to_der(text: &str, label: &str) -> Option<Vec<u8>> {
    let begin = format!("-----BEGIN {label}-----");
    let end = format!("-----END {label}-----");
    let start = text.find(&begin)? + begin.len();
    let stop = text.find(&end)?;
    let body: String = text[start..stop]
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.decode(body).ok()
}

/// Accepts a certificate in DER or PEM encoding and returns its DER bytes,
/// parsed once to prove they really are a certificate.
pub fn certificate_to_der(bytes: &[u8]) -> Result<Vec<u8>, DsigError> {
    let der = match std::str::from_utf8(bytes) {
        Ok(text) if text.contains("-----BEGIN") => pem_to_der(text, CERT_PEM_LABEL)
            .ok_or_else(|| DsigError::CertificateParse("invalid PEM certificate".into()))?,
        _ => bytes.to_vec(),
    };
    Certificate::from_der(&der)
        .map_err(|e| DsigError::CertificateParse(format!("invalid DER certificate: {e}")))?;
    Ok(der)
}

pub fn load_certificate_der(path: &Path) -> Result<Vec<u8>, DsigError> {
    let bytes = std::fs::read(path).map_err(|e| DsigError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    certificate_to_der(&bytes)
}

/// Extract the RSA public key from certificate DER bytes.
pub fn public_key_from_certificate(der: &[u8]) -> Result<RsaPublicKey, DsigError> {
    let cert = Certificate::from_der(der)
        .map_err(|e| DsigError::CertificateParse(format!("invalid DER certificate: {e}")))?;
    let spki = cert
        .tbs_certificate
        .subject_public_key_info
        .to_der()
        .map_err(|e| DsigError::CertificateParse(format!("unreadable public key: {e}")))?;
    RsaPublicKey::from_public_key_der(&spki)
        .map_err(|e| DsigError::CertificateParse(format!("certificate key is not RSA: {e}")))
}

/// Load a PKCS#8 private key from PEM or DER.
pub fn load_private_key(path: &Path) -> Result<RsaPrivateKey, DsigError> {
    let bytes = std::fs::read(path).map_err(|e| DsigError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    private_key_from_bytes(&bytes)
}

pub fn private_key_from_bytes(bytes: &[u8]) -> Result<RsaPrivateKey, DsigError> {
    let der = match std::str::from_utf8(bytes) {
        Ok(text) if text.contains("-----BEGIN") => pem_to_der(text, KEY_PEM_LABEL)
            .ok_or_else(|| DsigError::CertificateParse("invalid PEM private key".into()))?,
        _ => bytes.to_vec(),
    };
    RsaPrivateKey::from_pkcs8_der(&der)
        .map_err(|e| DsigError::CertificateParse(format!("invalid PKCS#8 private key: {e}")))
}

/// Generate an RSA-2048 key pair with a self-signed certificate; used for
/// fixture generation and tests.
pub fn generate_self_signed(common_name: &str) -> Result<(RsaPrivateKey, Vec<u8>), DsigError> {
    let mut rng = rand::thread_rng();
    let key = RsaPrivateKey::new(&mut rng, 2048)
        .map_err(|e| DsigError::CertificateParse(format!("key generation failed: {e}")))?;
    let cert_der = self_sign(&key, common_name)?;
    Ok((key, cert_der))
}

fn self_sign(key: &RsaPrivateKey, common_name: &str) -> Result<Vec<u8>, DsigError> {
    let bad = |what: &str, e: &dyn std::fmt::Display| {
        DsigError::CertificateParse(format!("{what}: {e}"))
    };
    let signer = rsa::pkcs1v15::SigningKey::<Sha256>::new(key.clone());
    let spki_der = key
        .to_public_key()
        .to_public_key_der()
        .map_err(|e| bad("public key encoding failed", &e))?;
    let spki = SubjectPublicKeyInfoOwned::from_der(spki_der.as_bytes())
        .map_err(|e| bad("public key encoding failed", &e))?;
    let subject = Name::from_str(&format!("CN={common_name}"))
        .map_err(|e| bad("invalid subject name", &e))?;
    let builder = CertificateBuilder::new(
        Profile::Root,
        SerialNumber::from(1u32),
        Validity::from_now(Duration::from_secs(10 * 365 * 24 * 3600))
            .map_err(|e| bad("validity window", &e))?,
        subject,
        spki,
        &signer,
    )
    .map_err(|e| bad("certificate builder", &e))?;
    let cert = builder
        .build::<rsa::pkcs1v15::Signature>()
        .map_err(|e| bad("certificate signing", &e))?;
    cert.to_der().map_err(|e| bad("certificate encoding", &e))
}

/// Serialize a certificate DER to PEM text.
pub fn der_to_pem(der: &[u8]) -> String {
    use base64::Engine;
    let b64 = base64::engine::general_purpose::STANDARD.encode(der);
    let mut out = String::from("-----BEGIN CERTIFICATE-----\n");
    for chunk in b64.as_bytes().chunks(64) {
        out.push_str(std::str::from_utf8(chunk).expect("base64 is ascii"));
        out.push('\n');
    }
    out.push_str("-----END CERTIFICATE-----\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_signed_round_trip() {
        let (key, cert_der) = generate_self_signed("test-signer").unwrap();
        let public = public_key_from_certificate(&cert_der).unwrap();
        assert_eq!(public, key.to_public_key());

        let pem = der_to_pem(&cert_der);
        let back = certificate_to_der(pem.as_bytes()).unwrap();
        assert_eq!(back, cert_der, "PEM decodes to identical DER");
    }

    #[test]
    fn garbage_certificate_rejected() {
        assert!(matches!(
            certificate_to_der(b"not a certificate"),
            Err(DsigError::CertificateParse(_))
        ));
    }
}
