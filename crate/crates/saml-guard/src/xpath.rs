//! Absolute child-axis XPath parsing, hardening and evaluation.
//!
//! The grammar is deliberately tiny: `/p:name[k]` steps only. Descendant
//! axes, wildcards, attributes and functions are rejected at parse time, so
//! ambiguous selection is unrepresentable. Hardening eliminates prefixes by
//! rewriting each step to `*[local-name()='N' and namespace-uri()='U'][k]`
//! with the position defaulting to 1, which makes "first and only" explicit.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::xmlcore::{NodeId, QName, XmlDocument};

/// Prefix to namespace-URI map collected from a document.
pub type NamespaceBindings = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub prefix: String,
    pub local_name: String,
    pub position: Option<usize>,
}

/// Parsed absolute child-axis path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XPathExpr {
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardenedStep {
    pub namespace_uri: String,
    pub local_name: String,
    pub position: usize,
}

/// Prefix-free path with explicit positions; `rendered` is the textual
/// `local-name()`/`namespace-uri()` form and parses back to an equal value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardenedXPath {
    pub steps: Vec<HardenedStep>,
    pub rendered: String,
}

#[derive(Debug, Error)]
pub enum XPathError {
    #[error("expression must be an absolute path starting with a single '/'")]
    NotAbsolute,
    #[error("unsupported axis in step '{0}'; only the child axis is supported")]
    UnsupportedAxis(String),
    #[error("unsupported function or predicate '{0}'")]
    UnsupportedFunction(String),
    #[error("XPath syntax error: {0}")]
    Syntax(String),
    #[error("prefix '{prefix}' is not bound to a namespace")]
    UnboundPrefix { prefix: String },
    #[error("prefix '{prefix}' bound to both '{first}' and '{second}' on one element")]
    ConflictingPrefix {
        prefix: String,
        first: String,
        second: String,
    },
}

/// Parse an absolute child-axis expression: `/p:name`, `/name`, optional
/// `[k]` positional predicates.
pub fn parse_xpath(text: &str) -> Result<XPathExpr, XPathError> {
    if text.starts_with("//") {
        return Err(XPathError::NotAbsolute);
    }
    let rest = text.strip_prefix('/').ok_or(XPathError::NotAbsolute)?;
    if rest.is_empty() {
        return Err(XPathError::Syntax("empty path".into()));
    }
    let mut steps = Vec::new();
    for raw in rest.split('/') {
        if raw.is_empty() {
            return Err(XPathError::UnsupportedAxis("//".into()));
        }
        steps.push(parse_step(raw)?);
    }
    Ok(XPathExpr { steps })
}

fn parse_step(raw: &str) -> Result<Step, XPathError> {
    let (name_part, position) = match raw.find('[') {
        Some(idx) => {
            let pred = raw[idx..]
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(']'))
                .ok_or_else(|| XPathError::Syntax(format!("malformed predicate in '{raw}'")))?;
            let k: usize = pred
                .parse()
                .map_err(|_| XPathError::UnsupportedFunction(pred.to_string()))?;
            if k == 0 {
                return Err(XPathError::Syntax("positions are 1-based".into()));
            }
            (&raw[..idx], Some(k))
        }
        None => (raw, None),
    };
    if name_part.contains("::") {
        return Err(XPathError::UnsupportedAxis(name_part.to_string()));
    }
    if name_part.contains('(') {
        return Err(XPathError::UnsupportedFunction(name_part.to_string()));
    }
    if name_part == "*" || name_part.contains('@') || name_part.starts_with('.') {
        return Err(XPathError::Syntax(format!("unsupported step '{name_part}'")));
    }
    let (prefix, local) = match name_part.split_once(':') {
        Some((p, l)) => (p.to_string(), l.to_string()),
        None => (String::new(), name_part.to_string()),
    };
    if local.is_empty() || !is_ncname(&local) || (!prefix.is_empty() && !is_ncname(&prefix)) {
        return Err(XPathError::Syntax(format!("invalid step name '{name_part}'")));
    }
    Ok(Step {
        prefix,
        local_name: local,
        position,
    })
}

fn is_ncname(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
}

/// Collect prefixed namespace declarations by a document-order walk; the
/// first declaration of a prefix wins.
pub fn bindings_from_document(doc: &XmlDocument) -> Result<NamespaceBindings, XPathError> {
    let mut bindings = NamespaceBindings::new();
    for id in doc.descendants(doc.root()) {
        let mut seen_here: BTreeMap<&str, &str> = BTreeMap::new();
        for (prefix, uri) in doc.node(id).namespace_declarations() {
            if prefix.is_empty() || uri.is_empty() {
                continue;
            }
            if let Some(&first) = seen_here.get(prefix.as_str()) {
                if first != uri {
                    return Err(XPathError::ConflictingPrefix {
                        prefix: prefix.clone(),
                        first: first.to_string(),
                        second: uri.clone(),
                    });
                }
            }
            seen_here.insert(prefix, uri);
            bindings.entry(prefix.clone()).or_insert_with(|| uri.clone());
        }
    }
    Ok(bindings)
}

/// Rewrite a prefixed path into the prefix-free hardened form. Unprefixed
/// steps take the empty namespace; missing positions default to 1.
pub fn harden(expr: &XPathExpr, bindings: &NamespaceBindings) -> Result<HardenedXPath, XPathError> {
    let mut steps = Vec::with_capacity(expr.steps.len());
    for step in &expr.steps {
        let namespace_uri = if step.prefix.is_empty() {
            String::new()
        } else {
            bindings
                .get(&step.prefix)
                .cloned()
                .ok_or_else(|| XPathError::UnboundPrefix {
                    prefix: step.prefix.clone(),
                })?
        };
        steps.push(HardenedStep {
            namespace_uri,
            local_name: step.local_name.clone(),
            position: step.position.unwrap_or(1),
        });
    }
    let rendered = render(&steps);
    Ok(HardenedXPath { steps, rendered })
}

fn render(steps: &[HardenedStep]) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str(&format!(
            "/*[local-name()='{}' and namespace-uri()='{}'][{}]",
            step.local_name, step.namespace_uri, step.position
        ));
    }
    out
}

/// Parse the rendered hardened form back into a value; inverse of the
/// rendering performed by [`harden`].
pub fn parse_hardened(text: &str) -> Result<HardenedXPath, XPathError> {
    let mut steps = Vec::new();
    let mut rest = text;
    if rest.is_empty() {
        return Err(XPathError::Syntax("empty path".into()));
    }
    while !rest.is_empty() {
        let after = rest
            .strip_prefix("/*[local-name()='")
            .ok_or_else(|| XPathError::Syntax("expected hardened step".into()))?;
        let (local, after) = after
            .split_once("' and namespace-uri()='")
            .ok_or_else(|| XPathError::Syntax("expected namespace-uri clause".into()))?;
        let (uri, after) = after
            .split_once("'][")
            .ok_or_else(|| XPathError::Syntax("expected position predicate".into()))?;
        let (pos, after) = after
            .split_once(']')
            .ok_or_else(|| XPathError::Syntax("unterminated position predicate".into()))?;
        let position: usize = pos
            .parse()
            .map_err(|_| XPathError::Syntax(format!("invalid position '{pos}'")))?;
        if position == 0 {
            return Err(XPathError::Syntax("positions are 1-based".into()));
        }
        steps.push(HardenedStep {
            namespace_uri: uri.to_string(),
            local_name: local.to_string(),
            position,
        });
        rest = after;
    }
    let rendered = render(&steps);
    Ok(HardenedXPath { steps, rendered })
}

/// Evaluate a hardened path: the first step matches the root element, each
/// further step selects the k-th matching element child in document order.
/// Returns at most one node and never scans descendants.
pub fn evaluate(hardened: &HardenedXPath, doc: &XmlDocument) -> Option<NodeId> {
    let mut steps = hardened.steps.iter();
    let first = steps.next()?;
    let root = doc.root();
    if !step_matches(doc, root, first) || first.position != 1 {
        return None;
    }
    let mut current = root;
    for step in steps {
        let mut seen = 0;
        let mut found = None;
        for &child in &doc.node(current).children {
            if step_matches(doc, child, step) {
                seen += 1;
                if seen == step.position {
                    found = Some(child);
                    break;
                }
            }
        }
        current = found?;
    }
    Some(current)
}

fn step_matches(doc: &XmlDocument, id: NodeId, step: &HardenedStep) -> bool {
    match doc.node(id).name() {
        Some(name) => {
            name.local_name == step.local_name && name.namespace_uri == step.namespace_uri
        }
        None => false,
    }
}

/// Convenience: the QName a step selects under the given bindings (used by
/// the naive demonstration mode for its tag-name scan).
pub fn step_qname(step: &Step, bindings: &NamespaceBindings) -> Result<QName, XPathError> {
    let uri = if step.prefix.is_empty() {
        String::new()
    } else {
        bindings
            .get(&step.prefix)
            .cloned()
            .ok_or_else(|| XPathError::UnboundPrefix {
                prefix: step.prefix.clone(),
            })?
    };
    Ok(QName::new(uri, step.local_name.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xmlcore::{parse, ParseOptions};

    const SOAP_NS: &str = "http://schemas.xmlsoap.org/soap/envelope/";

    fn doc(input: &str) -> XmlDocument {
        parse(input.as_bytes(), &ParseOptions::default()).unwrap()
    }

    #[test]
    fn parses_prefixed_steps() {
        let expr = parse_xpath("/soape:Envelope/soape:Body").unwrap();
        assert_eq!(expr.steps.len(), 2);
        assert_eq!(expr.steps[0].prefix, "soape");
        assert_eq!(expr.steps[0].local_name, "Envelope");
        assert!(expr.steps.iter().all(|s| s.position.is_none()));
    }

    #[test]
    fn rejects_descendant_axis() {
        assert!(matches!(
            parse_xpath("//ds:Signature"),
            Err(XPathError::NotAbsolute)
        ));
        assert!(matches!(
            parse_xpath("/a//b"),
            Err(XPathError::UnsupportedAxis(_))
        ));
    }

    #[test]
    fn rejects_axes_functions_wildcards() {
        assert!(matches!(
            parse_xpath("/child::a"),
            Err(XPathError::UnsupportedAxis(_))
        ));
        assert!(matches!(
            parse_xpath("/a[last()]"),
            Err(XPathError::UnsupportedFunction(_))
        ));
        assert!(parse_xpath("/*").is_err());
        assert!(parse_xpath("/a/@b").is_err());
        assert!(parse_xpath("a/b").is_err());
    }

    #[test]
    fn positional_predicates() {
        let expr = parse_xpath("/a/b[2]").unwrap();
        assert_eq!(expr.steps[0].position, None);
        assert_eq!(expr.steps[1].position, Some(2));
    }

    #[test]
    fn hardens_the_soap_body_path() {
        let expr = parse_xpath("/soape:Envelope/soape:Body").unwrap();
        let mut bindings = NamespaceBindings::new();
        bindings.insert("soape".into(), SOAP_NS.into());
        let hardened = harden(&expr, &bindings).unwrap();
        assert_eq!(
            hardened.rendered,
            "/*[local-name()='Envelope' and namespace-uri()='http://schemas.xmlsoap.org/soap/envelope/'][1]\
/*[local-name()='Body' and namespace-uri()='http://schemas.xmlsoap.org/soap/envelope/'][1]"
        );
    }

    #[test]
    fn hardens_single_step() {
        let expr = parse_xpath("/ds:Signature").unwrap();
        let mut bindings = NamespaceBindings::new();
        bindings.insert("ds".into(), "http://www.w3.org/2000/09/xmldsig#".into());
        let hardened = harden(&expr, &bindings).unwrap();
        assert_eq!(hardened.steps.len(), 1);
        assert_eq!(hardened.steps[0].position, 1);
    }

    #[test]
    fn positions_preserved_and_defaulted() {
        let expr = parse_xpath("/a/b[2]").unwrap();
        let hardened = harden(&expr, &NamespaceBindings::new()).unwrap();
        assert_eq!(hardened.steps[0].position, 1);
        assert_eq!(hardened.steps[1].position, 2);
        assert_eq!(hardened.steps[1].namespace_uri, "");
    }

    #[test]
    fn unbound_prefix_errors() {
        let expr = parse_xpath("/p:a").unwrap();
        assert!(matches!(
            harden(&expr, &NamespaceBindings::new()),
            Err(XPathError::UnboundPrefix { .. })
        ));
    }

    #[test]
    fn rendered_round_trips() {
        let expr = parse_xpath("/a/b[2]/c").unwrap();
        let hardened = harden(&expr, &NamespaceBindings::new()).unwrap();
        let back = parse_hardened(&hardened.rendered).unwrap();
        assert_eq!(hardened, back);
    }

    #[test]
    fn bindings_first_declaration_wins() {
        let d = doc("<r xmlns:p=\"urn:1\"><c xmlns:p=\"urn:2\"/><d xmlns:q=\"urn:3\"/></r>");
        let b = bindings_from_document(&d).unwrap();
        assert_eq!(b.get("p").map(String::as_str), Some("urn:1"));
        assert_eq!(b.get("q").map(String::as_str), Some("urn:3"));
    }

    #[test]
    fn bindings_empty_without_prefixed_declarations() {
        let d = doc("<r xmlns=\"urn:default\"><c/></r>");
        assert!(bindings_from_document(&d).unwrap().is_empty());
    }

    #[test]
    fn nested_same_redeclaration_is_fine() {
        let d = doc("<r xmlns:p=\"urn:1\"><c xmlns:p=\"urn:1\"/></r>");
        let b = bindings_from_document(&d).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn evaluate_selects_the_body() {
        let d = doc(&format!(
            "<s:Envelope xmlns:s=\"{SOAP_NS}\"><s:Header/><s:Body id=\"b\"/></s:Envelope>"
        ));
        let expr = parse_xpath("/s:Envelope/s:Body").unwrap();
        let bindings = bindings_from_document(&d).unwrap();
        let hardened = harden(&expr, &bindings).unwrap();
        let hit = evaluate(&hardened, &d).unwrap();
        assert_eq!(d.node(hit).name().unwrap().local_name, "Body");
    }

    #[test]
    fn evaluate_misses_wrapped_body() {
        let d = doc(&format!(
            "<s:Envelope xmlns:s=\"{SOAP_NS}\" xmlns:w=\"urn:w\"><s:Header/>\
<w:Wrapper><s:Body id=\"b\"/></w:Wrapper></s:Envelope>"
        ));
        let expr = parse_xpath("/s:Envelope/s:Body").unwrap();
        let bindings = bindings_from_document(&d).unwrap();
        let hardened = harden(&expr, &bindings).unwrap();
        assert_eq!(evaluate(&hardened, &d), None, "never scans descendants");
    }

    #[test]
    fn evaluate_root_mismatch() {
        let d = doc("<NotEnvelope/>");
        let expr = parse_xpath("/Envelope").unwrap();
        let hardened = harden(&expr, &NamespaceBindings::new()).unwrap();
        assert_eq!(evaluate(&hardened, &d), None);
    }

    #[test]
    fn empty_namespace_means_no_namespace() {
        let d = doc("<r xmlns=\"urn:x\"/>");
        let expr = parse_xpath("/r").unwrap();
        let hardened = harden(&expr, &NamespaceBindings::new()).unwrap();
        assert_eq!(
            evaluate(&hardened, &d),
            None,
            "empty uri must not match a namespaced element"
        );

        let d2 = doc("<r/>");
        assert!(evaluate(&hardened, &d2).is_some());
    }

    #[test]
    fn positional_selection_is_document_order() {
        let d = doc("<r><a n=\"1\"/><b/><a n=\"2\"/></r>");
        let hardened = harden(&parse_xpath("/r/a[2]").unwrap(), &NamespaceBindings::new()).unwrap();
        let hit = evaluate(&hardened, &d).unwrap();
        assert_eq!(
            d.node(hit).attribute(&QName::local("n")),
            Some("2")
        );
    }
}
