//! Enveloped-signature producer for fixture generation: builds a
//! ds:Signature over a registered Id target and inserts it into the
//! document. RSA PKCS#1 v1.5 is deterministic, so identical inputs produce
//! identical fixtures.

use base64::Engine;
use rsa::RsaPrivateKey;

use super::{sign_rsa, DigestAlgorithm, DsigError, SignatureAlgorithm};
use crate::c14n::{self, C14nMethod};
use crate::ns::XMLDSIG;
use crate::xmlcore::{NodeId, QName, TreeEditor, XmlDocument};

#[derive(Clone, Debug)]
pub struct SignOptions {
    pub signature_method: SignatureAlgorithm,
    pub digest_method: DigestAlgorithm,
    pub c14n: C14nMethod,
    pub allow_legacy_sha1: bool,
}

impl Default for SignOptions {
    fn default() -> Self {
        SignOptions {
            signature_method: SignatureAlgorithm::RsaSha256,
            digest_method: DigestAlgorithm::Sha256,
            c14n: C14nMethod::exclusive(),
            allow_legacy_sha1: false,
        }
    }
}

/// Sign the element registered under `target_id` and insert the enveloped
/// ds:Signature (reference `#target_id` with enveloped + canonicalization
/// transforms, computed digest and signature, KeyInfo carrying the signer
/// certificate) as the last child of `insert_at`. Returns a new document.
pub fn sign(
    doc: &XmlDocument,
    target_id: &str,
    key: &RsaPrivateKey,
    certificate_der: &[u8],
    options: &SignOptions,
    insert_at: NodeId,
) -> Result<XmlDocument, DsigError> {
    if !options.allow_legacy_sha1
        && (options.signature_method == SignatureAlgorithm::RsaSha1
            || options.digest_method == DigestAlgorithm::Sha1)
    {
        return Err(DsigError::UnsupportedAlgorithm(
            if options.signature_method == SignatureAlgorithm::RsaSha1 {
                super::uri::RSA_SHA1
            } else {
                super::uri::SHA1
            }
            .to_string(),
        ));
    }
    let target = doc
        .lookup_id(target_id)
        .ok_or_else(|| DsigError::UnresolvedReference(target_id.to_string()))?;

    // The reference digest covers the target with the signature subtree
    // excluded; computing it before insertion is equivalent.
    let digest_input = c14n::canonicalize(doc, target, &options.c14n)?;
    let digest = options.digest_method.digest(&digest_input);
    let b64 = base64::engine::general_purpose::STANDARD;

    let (mut editor, map) = TreeEditor::new(doc);
    let ds = |local: &str| QName::prefixed(XMLDSIG, local, "ds");

    let signature = editor.new_element(ds("Signature"));
    editor.declare_namespace(signature, "ds", XMLDSIG);

    let signed_info = editor.new_element(ds("SignedInfo"));
    editor.attach(signature, usize::MAX, signed_info);

    let c14n_method_el = editor.new_element(ds("CanonicalizationMethod"));
    editor.set_attribute(c14n_method_el, QName::local("Algorithm"), options.c14n.uri());
    editor.attach(signed_info, usize::MAX, c14n_method_el);

    let signature_method_el = editor.new_element(ds("SignatureMethod"));
    editor.set_attribute(
        signature_method_el,
        QName::local("Algorithm"),
        options.signature_method.uri(),
    );
    editor.attach(signed_info, usize::MAX, signature_method_el);

    let reference = editor.new_element(ds("Reference"));
    editor.set_attribute(reference, QName::local("URI"), format!("#{target_id}"));
    editor.attach(signed_info, usize::MAX, reference);

    let transforms = editor.new_element(ds("Transforms"));
    editor.attach(reference, usize::MAX, transforms);
    let enveloped = editor.new_element(ds("Transform"));
    editor.set_attribute(
        enveloped,
        QName::local("Algorithm"),
        super::uri::ENVELOPED_SIGNATURE,
    );
    editor.attach(transforms, usize::MAX, enveloped);
    let c14n_transform = editor.new_element(ds("Transform"));
    editor.set_attribute(c14n_transform, QName::local("Algorithm"), options.c14n.uri());
    editor.attach(transforms, usize::MAX, c14n_transform);

    let digest_method_el = editor.new_element(ds("DigestMethod"));
    editor.set_attribute(
        digest_method_el,
        QName::local("Algorithm"),
        options.digest_method.uri(),
    );
    editor.attach(reference, usize::MAX, digest_method_el);

    let digest_value = editor.new_element(ds("DigestValue"));
    editor.set_text_content(digest_value, b64.encode(&digest));
    editor.attach(reference, usize::MAX, digest_value);

    let signature_value = editor.new_element(ds("SignatureValue"));
    editor.attach(signature, usize::MAX, signature_value);

    let key_info = editor.new_element(ds("KeyInfo"));
    let x509_data = editor.new_element(ds("X509Data"));
    let x509_cert = editor.new_element(ds("X509Certificate"));
    editor.set_text_content(x509_cert, b64.encode(certificate_der));
    editor.attach(x509_data, usize::MAX, x509_cert);
    editor.attach(key_info, usize::MAX, x509_data);
    editor.attach(signature, usize::MAX, key_info);

    editor.attach(map(insert_at), usize::MAX, signature);

    let signed_info_path = editor.index_path(signed_info);
    let signature_value_path = editor.index_path(signature_value);
    let inserted = editor.finish()?;

    // Sign the canonicalized SignedInfo as it sits in the final document;
    // filling SignatureValue afterwards cannot change those bytes.
    let signed_info_node = inserted
        .resolve_index_path(&signed_info_path)
        .expect("SignedInfo survives reparse");
    let to_sign = c14n::canonicalize(&inserted, signed_info_node, &options.c14n)?;
    let signature_bytes = sign_rsa(key, options.signature_method, &to_sign);

    let (mut editor, _) = TreeEditor::new(&inserted);
    let sv = editor
        .resolve_index_path(&signature_value_path)
        .expect("SignatureValue survives reparse");
    editor.set_text_content(sv, b64.encode(&signature_bytes));
    Ok(editor.finish()?)
}

impl TreeEditor {
    fn resolve_index_path(&self, path: &[usize]) -> Option<crate::xmlcore::EditId> {
        let mut cur = self.root();
        for &idx in path {
            cur = *self.children(cur).get(idx)?;
        }
        Some(cur)
    }
}
