//! The validator pipeline against the signature-wrapping corpus: the secure
//! path must kill every mutant at the expected stage, and the naive path
//! must reproduce the vulnerability.

mod common;

use std::collections::{BTreeSet, HashSet};

use common::{context, hardened_validator, naive_validator, secure_validator};
use saml_guard::c14n::{self, C14nMethod};
use saml_guard::fixture;
use saml_guard::pipeline::Stage;
use saml_guard::xmlcore::{parse, ParseOptions};
use saml_guard::xpath;
use saml_guard::xswgen::{generate, MutantRecord, MutationKind};

fn all_kinds() -> BTreeSet<MutationKind> {
    MutationKind::ALL.iter().copied().collect()
}

fn corpus() -> Vec<MutantRecord> {
    let validator = secure_validator();
    generate(&validator, &context().signed_fixture, &all_kinds(), "Eve").expect("corpus generates")
}

#[test]
fn valid_fixture_is_accepted() {
    let validator = secure_validator();
    let outcome = validator.validate(&context().signed_fixture);
    assert!(outcome.accepted, "failure: {:?}", outcome.failure);
    assert_eq!(outcome.stage, Some(Stage::TargetCoveredOk));
    assert!(outcome.failure.is_none());
    let report = outcome.report.expect("report present");
    assert!(report.core_valid);
    let subtree = outcome.signed_subtree.expect("signed subtree present");
    assert!(subtree.node_path.ends_with("/Body[1]"));
    let text = String::from_utf8(subtree.canonical_bytes).unwrap();
    assert!(text.contains("Alice"));
}

#[test]
fn rejects_every_mutant_at_the_expected_stage() {
    let validator = secure_validator();
    let mutants = corpus();
    assert_eq!(mutants.len(), 5);
    for mutant in &mutants {
        let outcome = validator.validate(&mutant.output_bytes);
        assert!(
            !outcome.accepted,
            "{} must be rejected",
            mutant.kind.id()
        );
        let failure = outcome.failure.expect("rejection carries a failure");
        let expected_stage = match mutant.kind {
            MutationKind::EvilSameIdCollision => "register-ids",
            MutationKind::WrapOriginalAddEvilBefore => "target-coverage",
            MutationKind::WrapOriginalAddEvilAfter => "schema",
            MutationKind::EvilSiblingBeforeOriginal => "schema",
            MutationKind::DuplicateSignatureFirst => "core-validation",
        };
        assert_eq!(
            failure.stage,
            expected_stage,
            "{}: {}",
            mutant.kind.id(),
            failure.reason
        );
        if mutant.kind == MutationKind::EvilSameIdCollision {
            assert!(
                failure.reason.contains("duplicate Id"),
                "Id collision must be named: {}",
                failure.reason
            );
        }
    }
}

#[test]
fn naive_mode_reproduces_the_wrapping_vulnerability() {
    let validator = naive_validator();
    let mutants = corpus();

    let mut accepted = Vec::new();
    let mut evil_selected = Vec::new();
    for mutant in &mutants {
        let outcome = validator
            .naive_validate(&mutant.output_bytes)
            .expect("naive mode enabled");
        if outcome.accepted {
            accepted.push(mutant.kind);
            let subtree = outcome.signed_subtree.expect("naive acceptance emits subtree");
            let text = String::from_utf8_lossy(&subtree.canonical_bytes).to_string();
            if text.contains("<saml:Subject>Eve</saml:Subject>") {
                evil_selected.push(mutant.kind);
            }
        }
    }
    assert!(
        accepted.len() >= 2,
        "naive mode must accept at least two mutants, got {accepted:?}"
    );
    assert!(
        accepted.contains(&MutationKind::WrapOriginalAddEvilBefore),
        "the classic wrapping mutant must be accepted: {accepted:?}"
    );
    assert!(
        evil_selected.contains(&MutationKind::WrapOriginalAddEvilBefore),
        "naive mode must hand back the evil subject as the selected assertion"
    );
}

#[test]
fn naive_mode_accepts_the_valid_fixture() {
    let validator = naive_validator();
    let outcome = validator
        .naive_validate(&context().signed_fixture)
        .expect("naive mode enabled");
    assert!(outcome.accepted);
    assert!(outcome.warning.is_some(), "output is loudly labeled");
}

#[test]
fn naive_mode_requires_naive_configuration() {
    let validator = secure_validator();
    assert!(validator.naive_validate(&context().signed_fixture).is_err());
}

#[test]
fn naive_mode_without_signature_names_the_missing_element() {
    let validator = naive_validator();
    let unsigned = fixture::unsigned_envelope("Alice", "statement");
    let outcome = validator.naive_validate(unsigned.as_bytes()).unwrap();
    assert!(!outcome.accepted);
    assert_eq!(
        outcome.failure.unwrap().reason,
        "Cannot find Signature element"
    );
}

#[test]
fn unsigned_document_fails_at_selection() {
    let validator = secure_validator();
    let unsigned = fixture::unsigned_envelope("Alice", "statement");
    let outcome = validator.validate(unsigned.as_bytes());
    assert!(!outcome.accepted);
    assert_eq!(outcome.stage, Some(Stage::SchemaOk));
    let failure = outcome.failure.unwrap();
    assert_eq!(failure.stage, "select");
    assert!(failure.reason.contains("signature XPath"));
}

#[test]
fn mutants_preserve_the_original_subtree_bytes() {
    let input = &context().signed_fixture;
    let validator = secure_validator();
    let doc = parse(input, &ParseOptions::default()).unwrap();
    let bindings = xpath::bindings_from_document(&doc).unwrap();
    let target_expr = xpath::parse_xpath(fixture::TARGET_XPATH).unwrap();
    let hardened = xpath::harden(&target_expr, &bindings).unwrap();
    let original_node = xpath::evaluate(&hardened, &doc).unwrap();
    let original_bytes =
        c14n::canonicalize(&doc, original_node, &C14nMethod::exclusive()).unwrap();

    for mutant in generate(&validator, input, &all_kinds(), "Eve").unwrap() {
        assert!(mutant.preserved_original);
        let mdoc = parse(&mutant.output_bytes, &ParseOptions::default()).unwrap();
        // Locate the preserved original via the recorded path: walk the
        // mutant document for the element whose path matches.
        let relocated = mdoc
            .descendants(mdoc.root())
            .find(|&id| mdoc.node(id).is_element() && mdoc.element_path(id) == mutant.original_path)
            .unwrap_or_else(|| {
                panic!(
                    "{}: original not found at {}",
                    mutant.kind.id(),
                    mutant.original_path
                )
            });
        let relocated_bytes =
            c14n::canonicalize(&mdoc, relocated, &C14nMethod::exclusive()).unwrap();
        assert_eq!(
            relocated_bytes,
            original_bytes,
            "{}: relocated original must canonicalize identically",
            mutant.kind.id()
        );
    }
}

#[test]
fn mutants_carry_the_marker_and_input_does_not() {
    let input = &context().signed_fixture;
    assert!(!String::from_utf8_lossy(input).contains("Eve"));
    for mutant in corpus() {
        let text = String::from_utf8_lossy(&mutant.output_bytes).to_string();
        assert!(
            text.contains("Eve"),
            "{} must contain the evil marker",
            mutant.kind.id()
        );
    }
}

#[test]
fn mutant_generation_is_deterministic() {
    let one = corpus();
    let two = corpus();
    for (a, b) in one.iter().zip(two.iter()) {
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.output_bytes, b.output_bytes);
        assert_eq!(a.original_path, b.original_path);
    }
}

#[test]
fn generator_refuses_invalid_input() {
    let validator = secure_validator();
    let unsigned = fixture::unsigned_envelope("Alice", "statement");
    let err = generate(&validator, unsigned.as_bytes(), &all_kinds(), "Eve").unwrap_err();
    assert!(matches!(err, saml_guard::xswgen::XswError::InputNotValid(_)));
}

#[test]
fn same_id_collision_trips_duplicate_registration() {
    let validator = secure_validator();
    let kinds: BTreeSet<MutationKind> = [MutationKind::EvilSameIdCollision].into_iter().collect();
    let mutant = &generate(&validator, &context().signed_fixture, &kinds, "Eve").unwrap()[0];
    let doc = parse(&mutant.output_bytes, &ParseOptions::default()).unwrap();
    let err = doc
        .register_id_attribute(&fixture::id_attribute())
        .unwrap_err();
    assert!(matches!(
        err,
        saml_guard::xmlcore::XmlError::DuplicateIdValue { ref value, .. } if value == fixture::BODY_ID
    ));
}

#[test]
fn hardened_schema_accepts_fixture_and_kills_wrappers_at_schema_stage() {
    let validator = hardened_validator();
    let outcome = validator.validate(&context().signed_fixture);
    assert!(
        outcome.accepted,
        "hardened schema must accept the clean fixture: {:?}",
        outcome.failure
    );

    for mutant in corpus() {
        let outcome = validator.validate(&mutant.output_bytes);
        assert!(!outcome.accepted, "{}", mutant.kind.id());
        if matches!(
            mutant.kind,
            MutationKind::WrapOriginalAddEvilBefore | MutationKind::WrapOriginalAddEvilAfter
        ) {
            assert_eq!(
                outcome.failure.unwrap().stage,
                "schema",
                "{}: wrapper must die at the schema stage under the hardened schema",
                mutant.kind.id()
            );
        }
    }
}

#[test]
fn outcome_json_is_stable_and_pure() {
    let validator = secure_validator();
    let one = validator.validate(&context().signed_fixture).to_json();
    let two = validator.validate(&context().signed_fixture).to_json();
    assert_eq!(one, two, "identical inputs produce byte-identical JSON");
    for key in [
        "\"accepted\"",
        "\"stage\"",
        "\"failure\"",
        "\"references\"",
        "\"signed_subtree_b64\"",
        "\"signed_subtree_path\"",
    ] {
        assert!(one.contains(key), "JSON must carry {key}: {one}");
    }
}

#[test]
fn see_what_is_signed_matches_independent_canonicalization() {
    let validator = secure_validator();
    let outcome = validator.validate(&context().signed_fixture);
    let subtree = outcome.signed_subtree.expect("accepted");

    let doc = parse(&context().signed_fixture, &ParseOptions::default()).unwrap();
    let bindings = xpath::bindings_from_document(&doc).unwrap();
    let target = xpath::evaluate(
        &xpath::harden(&xpath::parse_xpath(fixture::TARGET_XPATH).unwrap(), &bindings).unwrap(),
        &doc,
    )
    .unwrap();
    let signature = xpath::evaluate(
        &xpath::harden(
            &xpath::parse_xpath(fixture::SIGNATURE_XPATH).unwrap(),
            &bindings,
        )
        .unwrap(),
        &doc,
    )
    .unwrap();
    let _ = signature;
    let mut omit = HashSet::new();
    omit.insert(signature);
    // The configured signature sits outside the Body, so plain exclusive
    // canonicalization of the covered node must reproduce the bytes.
    let independent = c14n::canonicalize(&doc, target, &C14nMethod::exclusive()).unwrap();
    assert_eq!(subtree.canonical_bytes, independent);
}

#[test]
fn construction_errors_name_the_failing_parameter() {
    use saml_guard::pipeline::{ValidationMode, Validator};
    let mut config = common::validator_config(ValidationMode::Secure, fixture::SCHEMA_ID);
    config.trusted_certificate_path = "/nonexistent/cert.der".into();
    let err = match Validator::new(config) {
        Err(e) => e,
        Ok(_) => panic!("construction must fail"),
    };
    assert!(err.to_string().starts_with("trusted_certificate_path:"));

    let mut config = common::validator_config(ValidationMode::Secure, fixture::SCHEMA_ID);
    config.target_xpath = "//Body".to_string();
    let err = match Validator::new(config) {
        Err(e) => e,
        Ok(_) => panic!("construction must fail"),
    };
    let text = err.to_string();
    assert!(text.starts_with("target_xpath:"), "{text}");
    assert!(text.contains("absolute"), "{text}");
}
