//! Shared setup for integration tests: one signer identity per test
//! process, its certificate on disk, and validator constructors for the
//! bundled fixture configuration.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use saml_guard::fixture::{self, Signer};
use saml_guard::pipeline::{ValidationMode, Validator, ValidatorConfig};

pub struct TestContext {
    pub signer: Signer,
    pub attacker: Signer,
    pub cert_path: PathBuf,
    pub attacker_cert_path: PathBuf,
    pub signed_fixture: Vec<u8>,
    _dir: tempfile::TempDir,
}

pub fn context() -> &'static TestContext {
    static CONTEXT: OnceLock<TestContext> = OnceLock::new();
    CONTEXT.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let signer = Signer::generate("signer1");
        let attacker = Signer::generate("attacker");
        let cert_path = dir.path().join("signer1.der");
        std::fs::write(&cert_path, &signer.certificate_der).expect("write cert");
        let attacker_cert_path = dir.path().join("attacker.der");
        std::fs::write(&attacker_cert_path, &attacker.certificate_der).expect("write cert");
        let signed_fixture = fixture::signed_envelope(&signer);
        TestContext {
            signer,
            attacker,
            cert_path,
            attacker_cert_path,
            signed_fixture,
            _dir: dir,
        }
    })
}

pub fn validator_config(mode: ValidationMode, schema_id: &str) -> ValidatorConfig {
    let ctx = context();
    ValidatorConfig {
        trusted_certificate_path: ctx.cert_path.clone(),
        schema_root_identifier: schema_id.to_string(),
        catalog_path: fixture::catalog_path(),
        signature_xpath: fixture::SIGNATURE_XPATH.to_string(),
        target_xpath: fixture::TARGET_XPATH.to_string(),
        id_attribute: fixture::id_attribute(),
        mode,
        allow_legacy_sha1: false,
    }
}

pub fn secure_validator() -> Validator {
    Validator::new(validator_config(ValidationMode::Secure, fixture::SCHEMA_ID))
        .expect("validator constructs")
}

pub fn naive_validator() -> Validator {
    Validator::new(validator_config(ValidationMode::NaiveDemo, fixture::SCHEMA_ID))
        .expect("validator constructs")
}

pub fn hardened_validator() -> Validator {
    Validator::new(validator_config(
        ValidationMode::Secure,
        fixture::HARDENED_SCHEMA_ID,
    ))
    .expect("validator constructs")
}
