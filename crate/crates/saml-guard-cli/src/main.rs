//! saml-guard: hardened XML-Signature / SAML-assertion validation from the
//! command line.
//!
//! Exit codes: 0 accepted (or success), 1 rejected / findings present,
//! 2 operational error (bad arguments, unreadable inputs, compile failures).

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use saml_guard::dsig::{self, keys, SignOptions};
use saml_guard::pipeline::{ValidationMode, Validator, ValidatorConfig};
use saml_guard::schema::{audit_schema, compile_schema, load_catalog};
use saml_guard::xmlcore::{parse, ParseOptions, QName};
use saml_guard::xpath;
use saml_guard::xswgen::{self, MutationKind};

#[derive(Parser)]
#[command(
    name = "saml-guard",
    version,
    about = "Validate, sign and attack XML-Signature / SAML documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the secure validation pipeline over a document
    Validate(ValidateArgs),
    /// Sign an element carrying a registered Id attribute
    Sign(SignArgs),
    /// Generate signature-wrapping mutants from a valid signed document
    GenAttacks(GenAttacksArgs),
    /// Print the hardened form of an absolute XPath expression
    HardenXpath(HardenXpathArgs),
    /// Report wildcard constructs in a schema
    AuditSchema(AuditSchemaArgs),
}

#[derive(Args, Clone)]
struct ValidatorFlags {
    /// Trusted signer certificate (DER or PEM)
    #[arg(long)]
    cert: PathBuf,
    /// Schema identifier resolved through the catalog
    #[arg(long)]
    schema: String,
    /// Trusted schema catalog file (flag wins over the environment)
    #[arg(long, env = "SAML_GUARD_CATALOG")]
    catalog: PathBuf,
    /// Absolute XPath selecting the signature element
    #[arg(long)]
    signature_xpath: String,
    /// Absolute XPath selecting the validated element
    #[arg(long)]
    target_xpath: String,
    /// Namespace URI of the Id attribute
    #[arg(long)]
    id_ns: String,
    /// Local name of the Id attribute
    #[arg(long)]
    id_name: String,
    /// Accept SHA-1 algorithms (never set this on production validators)
    #[arg(long)]
    allow_legacy_sha1: bool,
}

impl ValidatorFlags {
    fn build(&self, mode: ValidationMode) -> Result<Validator, String> {
        let config = ValidatorConfig {
            trusted_certificate_path: self.cert.clone(),
            schema_root_identifier: self.schema.clone(),
            catalog_path: self.catalog.clone(),
            signature_xpath: self.signature_xpath.clone(),
            target_xpath: self.target_xpath.clone(),
            id_attribute: QName::new(self.id_ns.clone(), self.id_name.clone()),
            mode,
            allow_legacy_sha1: self.allow_legacy_sha1,
        };
        let validator = Validator::new(config).map_err(|e| e.to_string())?;
        for warning in validator.construction_warnings() {
            eprintln!("warning: {warning}");
        }
        Ok(validator)
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    flags: ValidatorFlags,
    /// Use the deliberately naive demonstration mode (INSECURE)
    #[arg(long)]
    naive: bool,
    /// Print the machine-readable outcome instead of a summary
    #[arg(long)]
    json: bool,
    /// Document to validate
    document: PathBuf,
}

#[derive(Args)]
struct SignArgs {
    /// PKCS#8 private key (PEM or DER)
    #[arg(long)]
    key: PathBuf,
    /// Signer certificate embedded into KeyInfo (DER or PEM)
    #[arg(long)]
    cert: PathBuf,
    /// Id value of the element to sign
    #[arg(long)]
    target_id: String,
    /// Namespace URI of the Id attribute
    #[arg(long)]
    id_ns: String,
    /// Local name of the Id attribute
    #[arg(long)]
    id_name: String,
    /// Absolute XPath naming the element the signature is inserted under
    /// (defaults to the document root)
    #[arg(long)]
    insert_under: Option<String>,
    /// Accept SHA-1 algorithms
    #[arg(long)]
    allow_legacy_sha1: bool,
    /// Write the signed document here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Document to sign
    document: PathBuf,
}

#[derive(Args)]
struct GenAttacksArgs {
    #[command(flatten)]
    flags: ValidatorFlags,
    /// Comma-separated mutation kinds, or "all"
    #[arg(long, default_value = "all")]
    kinds: String,
    /// Subject string planted in the evil elements
    #[arg(long, default_value = "Eve")]
    evil_subject: String,
    /// Directory receiving mutant files and manifest.json
    #[arg(long)]
    out_dir: PathBuf,
    /// Valid signed document to mutate
    document: PathBuf,
}

#[derive(Args)]
struct HardenXpathArgs {
    /// Prefix binding, repeatable: --ns prefix=uri
    #[arg(long = "ns", value_name = "PREFIX=URI")]
    bindings: Vec<String>,
    /// Absolute XPath expression
    expression: String,
}

#[derive(Args)]
struct AuditSchemaArgs {
    /// Trusted schema catalog file (flag wins over the environment)
    #[arg(long, env = "SAML_GUARD_CATALOG")]
    catalog: PathBuf,
    /// Schema identifier to compile and audit
    identifier: String,
}

const EXIT_REJECTED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Sign(args) => cmd_sign(args),
        Command::GenAttacks(args) => cmd_gen_attacks(args),
        Command::HardenXpath(args) => cmd_harden_xpath(args),
        Command::AuditSchema(args) => cmd_audit_schema(args),
    }
}

fn read_document(path: &PathBuf) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, String> {
    let mode = if args.naive {
        ValidationMode::NaiveDemo
    } else {
        ValidationMode::Secure
    };
    let validator = args.flags.build(mode)?;
    let input = read_document(&args.document)?;
    let outcome = if args.naive {
        let outcome = validator.naive_validate(&input).map_err(|e| e.to_string())?;
        eprintln!("warning: naive demonstration mode, do not use for real validation");
        outcome
    } else {
        validator.validate(&input)
    };

    if args.json {
        println!("{}", outcome.to_json());
    } else if outcome.accepted {
        let subtree = outcome.signed_subtree.as_ref().expect("accepted outcome");
        println!("accepted: signed subtree at {}", subtree.node_path);
    } else {
        let failure = outcome.failure.as_ref().expect("rejected outcome");
        println!("rejected at {} stage: {}", failure.stage, failure.reason);
    }
    Ok(if outcome.accepted { 0 } else { EXIT_REJECTED })
}

fn cmd_sign(args: SignArgs) -> Result<u8, String> {
    let key = keys::load_private_key(&args.key).map_err(|e| e.to_string())?;
    let cert = keys::load_certificate_der(&args.cert).map_err(|e| e.to_string())?;
    let input = read_document(&args.document)?;
    let doc = parse(&input, &ParseOptions::default()).map_err(|e| e.to_string())?;
    let id_attribute = QName::new(args.id_ns.clone(), args.id_name.clone());
    let (doc, count) = doc
        .register_id_attribute(&id_attribute)
        .map_err(|e| e.to_string())?;
    if count == 0 {
        return Err(format!(
            "no element carries the Id attribute {{{}}}{}",
            args.id_ns, args.id_name
        ));
    }

    let insert_at = match &args.insert_under {
        None => doc.root(),
        Some(expr_text) => {
            let expr = xpath::parse_xpath(expr_text).map_err(|e| e.to_string())?;
            let bindings = xpath::bindings_from_document(&doc).map_err(|e| e.to_string())?;
            let hardened = xpath::harden(&expr, &bindings).map_err(|e| e.to_string())?;
            xpath::evaluate(&hardened, &doc)
                .ok_or_else(|| format!("--insert-under selects no node: {expr_text}"))?
        }
    };

    let options = SignOptions {
        allow_legacy_sha1: args.allow_legacy_sha1,
        ..SignOptions::default()
    };
    let signed = dsig::sign(&doc, &args.target_id, &key, &cert, &options, insert_at)
        .map_err(|e| e.to_string())?;
    let bytes = signed.serialize_document();
    match &args.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| e.to_string())?;
        }
    }
    Ok(0)
}

fn cmd_gen_attacks(args: GenAttacksArgs) -> Result<u8, String> {
    let validator = args.flags.build(ValidationMode::Secure)?;
    let input = read_document(&args.document)?;

    let kinds: BTreeSet<MutationKind> = if args.kinds == "all" {
        MutationKind::ALL.into_iter().collect()
    } else {
        args.kinds
            .split(',')
            .map(|token| {
                MutationKind::from_id(token.trim())
                    .ok_or_else(|| format!("unknown mutation kind '{token}'"))
            })
            .collect::<Result<_, _>>()?
    };

    let records = xswgen::generate(&validator, &input, &kinds, &args.evil_subject)
        .map_err(|e| e.to_string())?;
    let manifest = xswgen::write_corpus(&args.out_dir, &records).map_err(|e| e.to_string())?;
    println!(
        "wrote {} mutants and {}",
        records.len(),
        manifest.display()
    );
    Ok(0)
}

fn cmd_harden_xpath(args: HardenXpathArgs) -> Result<u8, String> {
    let mut bindings = xpath::NamespaceBindings::new();
    for binding in &args.bindings {
        let (prefix, uri) = binding
            .split_once('=')
            .ok_or_else(|| format!("--ns expects PREFIX=URI, got '{binding}'"))?;
        bindings.insert(prefix.to_string(), uri.to_string());
    }
    let expr = xpath::parse_xpath(&args.expression).map_err(|e| e.to_string())?;
    let hardened = xpath::harden(&expr, &bindings).map_err(|e| e.to_string())?;
    println!("{}", hardened.rendered);
    Ok(0)
}

fn cmd_audit_schema(args: AuditSchemaArgs) -> Result<u8, String> {
    let catalog = load_catalog(&args.catalog).map_err(|e| e.to_string())?;
    let schema = compile_schema(&args.identifier, &catalog).map_err(|e| e.to_string())?;
    let findings = audit_schema(&schema);
    if findings.is_empty() {
        println!("hardened: no wildcard constructs found");
        return Ok(0);
    }
    println!("{:<44} {:<16} context", "location", "kind");
    for finding in &findings {
        println!(
            "{:<44} {:<16} {}",
            finding.schema_location, finding.kind, finding.context
        );
    }
    Ok(EXIT_REJECTED)
}
