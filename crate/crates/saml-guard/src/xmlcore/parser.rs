//! Hand-rolled namespace-aware XML parser for the hardened subset:
//! no DTD processing, no entity definitions, no external resources.

use std::collections::HashMap;

use super::{
    Attribute, NodeId, NodeKind, ParseOptions, QName, XmlDocument, XmlError, XmlNode,
    XMLNS_NAMESPACE, XML_NAMESPACE,
};

pub(super) fn parse_document(
    input: &[u8],
    options: &ParseOptions,
) -> Result<XmlDocument, XmlError> {
    if input.len() > options.max_input_bytes {
        return Err(XmlError::SizeLimitExceeded {
            actual: input.len(),
            limit: options.max_input_bytes,
        });
    }
    let text = decode(input)?;
    let mut parser = Parser {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        options,
        nodes: Vec::new(),
        scopes: vec![HashMap::new()],
        source_len: input.len(),
    };
    parser.parse()
}

fn decode(input: &[u8]) -> Result<String, XmlError> {
    let bad_encoding = |message: &str| XmlError::MalformedXml {
        line: 1,
        column: 1,
        message: message.to_string(),
    };
    let text = if input.starts_with(&[0xFE, 0xFF]) {
        decode_utf16(&input[2..], true).ok_or_else(|| bad_encoding("invalid UTF-16BE input"))?
    } else if input.starts_with(&[0xFF, 0xFE]) {
        decode_utf16(&input[2..], false).ok_or_else(|| bad_encoding("invalid UTF-16LE input"))?
    } else {
        let bytes = input.strip_prefix(&[0xEF, 0xBB, 0xBF]).unwrap_or(input);
        std::str::from_utf8(bytes)
            .map_err(|e| bad_encoding(&format!("invalid UTF-8 input: {e}")))?
            .to_string()
    };
    // XML 1.0 end-of-line handling: \r\n and lone \r become \n.
    Ok(text.replace("\r\n", "\n").replace('\r', "\n"))
}

fn decode_utf16(bytes: &[u8], big_endian: bool) -> Option<String> {
    if bytes.len() % 2 != 0 {
        return None;
    }
    let units: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|c| {
            if big_endian {
                u16::from_be_bytes([c[0], c[1]])
            } else {
                u16::from_le_bytes([c[0], c[1]])
            }
        })
        .collect();
    String::from_utf16(&units).ok()
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    options: &'a ParseOptions,
    nodes: Vec<XmlNode>,
    /// Namespace declarations per open element; prefix "" is the default
    /// namespace, an empty uri means "undeclared".
    scopes: Vec<HashMap<String, String>>,
    source_len: usize,
}

impl Parser<'_> {
    fn parse(&mut self) -> Result<XmlDocument, XmlError> {
        if self.looking_at("<?xml")
            && matches!(self.peek_at(5), Some(c) if c.is_whitespace() || c == '?')
        {
            self.parse_xml_declaration()?;
        }

        let mut prolog = Vec::new();
        let mut root = None;
        let mut epilog = Vec::new();

        loop {
            self.skip_whitespace();
            if self.at_end() {
                break;
            }
            if self.looking_at("<!--") {
                let id = self.parse_comment(None)?;
                if root.is_none() {
                    prolog.push(id);
                } else {
                    epilog.push(id);
                }
            } else if self.looking_at("<?") {
                let id = self.parse_pi(None)?;
                if root.is_none() {
                    prolog.push(id);
                } else {
                    epilog.push(id);
                }
            } else if self.looking_at("<!DOCTYPE") {
                if root.is_some() {
                    return Err(self.malformed("DOCTYPE after root element"));
                }
                self.handle_doctype()?;
            } else if self.looking_at("<") {
                if root.is_some() {
                    return Err(self.malformed("multiple root elements"));
                }
                root = Some(self.parse_element(None, 1)?);
            } else {
                return Err(self.malformed("content outside the root element"));
            }
        }

        let root = root.ok_or_else(|| self.malformed("missing root element"))?;
        Ok(XmlDocument::from_parts(
            std::mem::take(&mut self.nodes),
            root,
            prolog,
            epilog,
            self.source_len,
        ))
    }

    fn parse_xml_declaration(&mut self) -> Result<(), XmlError> {
        self.expect_str("<?xml")?;
        let decl_start = self.pos;
        while !self.at_end() && !self.looking_at("?>") {
            self.advance();
        }
        let decl: String = self.chars[decl_start..self.pos].iter().collect();
        self.expect_str("?>")?;
        if let Some(enc) = extract_pseudo_attr(&decl, "encoding") {
            let enc = enc.to_ascii_lowercase();
            if enc != "utf-8" && enc != "utf-16" {
                return Err(self.malformed(&format!("unsupported encoding '{enc}'")));
            }
        }
        Ok(())
    }

    fn handle_doctype(&mut self) -> Result<(), XmlError> {
        let (line, column) = (self.line, self.column);
        if self.options.forbid_dtd {
            return Err(XmlError::DtdForbidden { line, column });
        }
        // Tolerated but never processed: skip to the matching '>', rejecting
        // external identifiers on the way.
        self.expect_str("<!DOCTYPE")?;
        let mut bracket = 0usize;
        let mut scanned = String::new();
        loop {
            let c = self.next_char()?;
            match c {
                '[' => bracket += 1,
                ']' => bracket = bracket.saturating_sub(1),
                '>' if bracket == 0 => break,
                _ => {}
            }
            scanned.push(c);
        }
        if self.options.forbid_external_entities
            && (scanned.contains("SYSTEM") || scanned.contains("PUBLIC"))
        {
            if let Some(probe) = &self.options.resolver_probe {
                probe("doctype-external-id");
            }
            return Err(XmlError::ExternalEntityForbidden { line, column });
        }
        Ok(())
    }

    fn parse_element(
        &mut self,
        parent: Option<NodeId>,
        depth: usize,
    ) -> Result<NodeId, XmlError> {
        if depth > self.options.max_depth {
            return Err(XmlError::DepthLimitExceeded {
                limit: self.options.max_depth,
            });
        }
        let (tag_line, tag_column) = (self.line, self.column);
        self.expect_char('<')?;
        let raw_name = self.parse_raw_name()?;

        let mut raw_attrs: Vec<(String, String, usize, usize)> = Vec::new();
        let mut declarations: Vec<(String, String)> = Vec::new();
        let self_closing;
        loop {
            let had_space = self.skip_whitespace();
            match self.peek() {
                Some('>') => {
                    self.advance();
                    self_closing = false;
                    break;
                }
                Some('/') => {
                    self.advance();
                    self.expect_char('>')?;
                    self_closing = true;
                    break;
                }
                Some(_) => {
                    if !had_space {
                        return Err(self.malformed("expected whitespace before attribute"));
                    }
                    let (aline, acol) = (self.line, self.column);
                    let name = self.parse_raw_name()?;
                    self.skip_whitespace();
                    self.expect_char('=')?;
                    self.skip_whitespace();
                    let value = self.parse_attr_value()?;
                    if raw_attrs.len() + declarations.len()
                        >= self.options.max_attribute_count_per_element
                    {
                        return Err(XmlError::AttributeLimitExceeded {
                            limit: self.options.max_attribute_count_per_element,
                            line: aline,
                            column: acol,
                        });
                    }
                    if name == "xmlns" || name.starts_with("xmlns:") {
                        let prefix = name.strip_prefix("xmlns:").unwrap_or("").to_string();
                        self.check_ns_declaration(&prefix, &value, aline, acol)?;
                        if declarations.iter().any(|(p, _)| *p == prefix) {
                            return Err(self.malformed_at(
                                aline,
                                acol,
                                &format!("duplicate namespace declaration '{name}'"),
                            ));
                        }
                        declarations.push((prefix, value));
                    } else {
                        if raw_attrs.iter().any(|(n, _, _, _)| *n == name) {
                            return Err(self.malformed_at(
                                aline,
                                acol,
                                &format!("duplicate attribute '{name}'"),
                            ));
                        }
                        raw_attrs.push((name, value, aline, acol));
                    }
                }
                None => return Err(self.malformed("unexpected end of input in start tag")),
            }
        }

        let mut scope = self.scopes.last().expect("scope stack nonempty").clone();
        for (prefix, uri) in &declarations {
            scope.insert(prefix.clone(), uri.clone());
        }
        self.scopes.push(scope);

        let name = self.resolve_name(&raw_name, true, tag_line, tag_column)?;
        let mut attributes = Vec::with_capacity(raw_attrs.len());
        for (raw, value, aline, acol) in raw_attrs {
            let qname = self.resolve_name(&raw, false, aline, acol)?;
            if attributes.iter().any(|a: &Attribute| a.name == qname) {
                return Err(self.malformed_at(
                    aline,
                    acol,
                    &format!("duplicate attribute '{qname}' after namespace resolution"),
                ));
            }
            attributes.push(Attribute {
                name: qname,
                value,
            });
        }

        let id = self.push_node(
            NodeKind::Element {
                name,
                attributes,
                namespace_declarations: declarations,
            },
            parent,
        );

        if !self_closing {
            self.parse_content(id, &raw_name, depth)?;
        }
        self.scopes.pop();
        Ok(id)
    }

    fn parse_content(
        &mut self,
        element: NodeId,
        raw_name: &str,
        depth: usize,
    ) -> Result<(), XmlError> {
        let mut text = String::new();
        loop {
            if self.at_end() {
                return Err(self.malformed(&format!("unclosed element '{raw_name}'")));
            }
            if self.looking_at("</") {
                self.flush_text(&mut text, element);
                self.expect_str("</")?;
                let close = self.parse_raw_name()?;
                if close != raw_name {
                    return Err(self.malformed(&format!(
                        "mismatched end tag: expected '</{raw_name}>', found '</{close}>'"
                    )));
                }
                self.skip_whitespace();
                self.expect_char('>')?;
                return Ok(());
            } else if self.looking_at("<!--") {
                self.flush_text(&mut text, element);
                self.parse_comment(Some(element))?;
            } else if self.looking_at("<![CDATA[") {
                self.expect_str("<![CDATA[")?;
                let start = self.pos;
                while !self.at_end() && !self.looking_at("]]>") {
                    self.advance();
                }
                if self.at_end() {
                    return Err(self.malformed("unterminated CDATA section"));
                }
                text.extend(&self.chars[start..self.pos]);
                self.expect_str("]]>")?;
            } else if self.looking_at("<?") {
                self.flush_text(&mut text, element);
                self.parse_pi(Some(element))?;
            } else if self.looking_at("<!") {
                return Err(if self.looking_at("<!DOCTYPE") {
                    XmlError::DtdForbidden {
                        line: self.line,
                        column: self.column,
                    }
                } else {
                    self.malformed("unexpected markup declaration in content")
                });
            } else if self.looking_at("<") {
                self.flush_text(&mut text, element);
                self.parse_element(Some(element), depth + 1)?;
            } else if self.looking_at("]]>") {
                return Err(self.malformed("']]>' is not allowed in character content"));
            } else if self.peek() == Some('&') {
                text.push_str(&self.parse_reference()?);
            } else {
                let c = self.next_char()?;
                self.check_char(c)?;
                text.push(c);
            }
        }
    }

    fn flush_text(&mut self, text: &mut String, parent: NodeId) {
        if text.is_empty() {
            return;
        }
        let value = std::mem::take(text);
        // Merge with a preceding text sibling so the model never holds
        // adjacent text nodes.
        if let Some(&last) = self.nodes[parent.index()].children.last() {
            if let NodeKind::Text(existing) = &mut self.nodes[last.index()].kind {
                existing.push_str(&value);
                return;
            }
        }
        self.push_node(NodeKind::Text(value), Some(parent));
    }

    fn parse_comment(&mut self, parent: Option<NodeId>) -> Result<NodeId, XmlError> {
        self.expect_str("<!--")?;
        let start = self.pos;
        while !self.at_end() && !self.looking_at("--") {
            self.advance();
        }
        let data: String = self.chars[start..self.pos].iter().collect();
        self.expect_str("-->")
            .map_err(|_| self.malformed("'--' is not allowed inside comments"))?;
        Ok(self.push_node(NodeKind::Comment(data), parent))
    }

    fn parse_pi(&mut self, parent: Option<NodeId>) -> Result<NodeId, XmlError> {
        self.expect_str("<?")?;
        let target = self.parse_raw_name()?;
        if target.eq_ignore_ascii_case("xml") {
            return Err(self.malformed("processing instruction target 'xml' is reserved"));
        }
        let mut data = String::new();
        if !self.looking_at("?>") {
            if !self.skip_whitespace() {
                return Err(self.malformed("expected whitespace after PI target"));
            }
            let start = self.pos;
            while !self.at_end() && !self.looking_at("?>") {
                self.advance();
            }
            data = self.chars[start..self.pos].iter().collect();
        }
        self.expect_str("?>")?;
        Ok(self.push_node(
            NodeKind::ProcessingInstruction { target, data },
            parent,
        ))
    }

    fn parse_attr_value(&mut self) -> Result<String, XmlError> {
        let quote = self.next_char()?;
        if quote != '"' && quote != '\'' {
            return Err(self.malformed("attribute value must be quoted"));
        }
        let mut value = String::new();
        loop {
            match self.peek() {
                None => return Err(self.malformed("unterminated attribute value")),
                Some(c) if c == quote => {
                    self.advance();
                    break;
                }
                Some('<') => return Err(self.malformed("'<' is not allowed in attribute values")),
                Some('&') => value.push_str(&self.parse_reference()?),
                Some('\t') | Some('\n') => {
                    // Attribute-value normalization: raw whitespace becomes a
                    // space; characters that arrive via references do not.
                    self.advance();
                    value.push(' ');
                }
                Some(c) => {
                    self.check_char(c)?;
                    self.advance();
                    value.push(c);
                }
            }
        }
        Ok(value)
    }

    fn parse_reference(&mut self) -> Result<String, XmlError> {
        let (line, column) = (self.line, self.column);
        self.expect_char('&')?;
        if self.peek() == Some('#') {
            self.advance();
            let (digits, radix) = if self.peek() == Some('x') {
                self.advance();
                (self.take_while(|c| c.is_ascii_hexdigit()), 16)
            } else {
                (self.take_while(|c| c.is_ascii_digit()), 10)
            };
            self.expect_char(';')?;
            let code = u32::from_str_radix(&digits, radix)
                .map_err(|_| self.malformed_at(line, column, "invalid character reference"))?;
            let c = char::from_u32(code)
                .filter(|&c| is_xml_char(c))
                .ok_or_else(|| {
                    self.malformed_at(line, column, "character reference to invalid XML character")
                })?;
            return Ok(c.to_string());
        }
        let name = self.take_while(|c| c.is_ascii_alphanumeric());
        self.expect_char(';')?;
        let expansion = match name.as_str() {
            "amp" => "&",
            "lt" => "<",
            "gt" => ">",
            "quot" => "\"",
            "apos" => "'",
            _ => {
                // No entity declarations exist in this parser; treat unknown
                // references as hostile input.
                if let Some(probe) = &self.options.resolver_probe {
                    probe(&name);
                }
                return Err(self.malformed_at(
                    line,
                    column,
                    &format!("reference to undeclared entity '&{name};'"),
                ));
            }
        };
        Ok(expansion.to_string())
    }

    fn check_ns_declaration(
        &self,
        prefix: &str,
        uri: &str,
        line: usize,
        column: usize,
    ) -> Result<(), XmlError> {
        if prefix == "xmlns" {
            return Err(self.malformed_at(line, column, "the 'xmlns' prefix cannot be declared"));
        }
        if prefix == "xml" && uri != XML_NAMESPACE {
            return Err(self.malformed_at(
                line,
                column,
                "the 'xml' prefix cannot be rebound",
            ));
        }
        if prefix != "xml" && uri == XML_NAMESPACE {
            return Err(self.malformed_at(
                line,
                column,
                "the XML namespace cannot be bound to another prefix",
            ));
        }
        if uri == XMLNS_NAMESPACE {
            return Err(self.malformed_at(line, column, "the xmlns namespace cannot be declared"));
        }
        if !prefix.is_empty() && uri.is_empty() {
            return Err(self.malformed_at(
                line,
                column,
                "namespace prefix cannot be undeclared in XML 1.0",
            ));
        }
        Ok(())
    }

    fn resolve_name(
        &self,
        raw: &str,
        is_element: bool,
        line: usize,
        column: usize,
    ) -> Result<QName, XmlError> {
        let scope = self.scopes.last().expect("scope stack nonempty");
        match raw.split_once(':') {
            Some((prefix, local)) => {
                if prefix.is_empty() || local.is_empty() || local.contains(':') {
                    return Err(self.malformed_at(line, column, &format!("invalid name '{raw}'")));
                }
                let uri = if prefix == "xml" {
                    XML_NAMESPACE
                } else {
                    scope
                        .get(prefix)
                        .map(String::as_str)
                        .filter(|u| !u.is_empty())
                        .ok_or_else(|| XmlError::UndeclaredPrefix {
                            prefix: prefix.to_string(),
                            line,
                            column,
                        })?
                };
                Ok(QName::prefixed(uri, local, prefix))
            }
            None => {
                let uri = if is_element {
                    scope.get("").map(String::as_str).unwrap_or("")
                } else {
                    // Unprefixed attributes are in no namespace.
                    ""
                };
                Ok(QName::new(uri, raw))
            }
        }
    }

    fn parse_raw_name(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        match self.peek() {
            Some(c) if is_name_start(c) => self.advance(),
            _ => return Err(self.malformed("expected a name")),
        }
        while matches!(self.peek(), Some(c) if is_name_char(c)) {
            self.advance();
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn push_node(&mut self, kind: NodeKind, parent: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(XmlNode {
            id,
            kind,
            parent,
            children: Vec::new(),
        });
        if let Some(parent) = parent {
            self.nodes[parent.index()].children.push(id);
        }
        id
    }

    fn check_char(&self, c: char) -> Result<(), XmlError> {
        if is_xml_char(c) {
            Ok(())
        } else {
            Err(self.malformed(&format!("invalid XML character U+{:04X}", c as u32)))
        }
    }

    // -- low-level input handling ------------------------------------------

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn looking_at(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(i, c)| self.peek_at(i) == Some(c))
    }

    fn advance(&mut self) {
        if let Some(c) = self.peek() {
            if c == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
            self.pos += 1;
        }
    }

    fn next_char(&mut self) -> Result<char, XmlError> {
        let c = self
            .peek()
            .ok_or_else(|| self.malformed("unexpected end of input"))?;
        self.advance();
        Ok(c)
    }

    fn skip_whitespace(&mut self) -> bool {
        let mut skipped = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.advance();
            skipped = true;
        }
        skipped
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if pred(c)) {
            self.advance();
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn expect_char(&mut self, expected: char) -> Result<(), XmlError> {
        match self.peek() {
            Some(c) if c == expected => {
                self.advance();
                Ok(())
            }
            Some(c) => Err(self.malformed(&format!("expected '{expected}', found '{c}'"))),
            None => Err(self.malformed(&format!("expected '{expected}', found end of input"))),
        }
    }

    fn expect_str(&mut self, expected: &str) -> Result<(), XmlError> {
        if self.looking_at(expected) {
            for _ in expected.chars() {
                self.advance();
            }
            Ok(())
        } else {
            Err(self.malformed(&format!("expected '{expected}'")))
        }
    }

    fn malformed(&self, message: &str) -> XmlError {
        self.malformed_at(self.line, self.column, message)
    }

    fn malformed_at(&self, line: usize, column: usize, message: &str) -> XmlError {
        XmlError::MalformedXml {
            line,
            column,
            message: message.to_string(),
        }
    }
}

fn extract_pseudo_attr(decl: &str, name: &str) -> Option<String> {
    let idx = decl.find(name)?;
    let rest = &decl[idx + name.len()..];
    let rest = rest.trim_start().strip_prefix('=')?.trim_start();
    let quote = rest.chars().next()?;
    if quote != '"' && quote != '\'' {
        return None;
    }
    rest[1..].split(quote).next().map(str::to_string)
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == ':' || ('\u{C0}'..='\u{2FF}').contains(&c)
        || ('\u{370}'..='\u{1FFF}').contains(&c)
        || ('\u{2070}'..='\u{218F}').contains(&c)
        || ('\u{2C00}'..='\u{2FEF}').contains(&c)
        || ('\u{3001}'..='\u{D7FF}').contains(&c)
        || ('\u{F900}'..='\u{FDCF}').contains(&c)
        || ('\u{10000}'..='\u{EFFFF}').contains(&c)
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_ascii_digit() || c == '-' || c == '.' || c == '\u{B7}'
}

fn is_xml_char(c: char) -> bool {
    matches!(c,
        '\u{9}' | '\u{A}' | '\u{D}'
        | '\u{20}'..='\u{D7FF}'
        | '\u{E000}'..='\u{FFFD}'
        | '\u{10000}'..='\u{10FFFF}')
}
