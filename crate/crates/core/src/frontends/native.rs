//! The native description format.
//!
//! ```text
//! # comment
//! type Server {
//!     provides s: IService
//!     attribute nom: string
//!     artifact "server-impl"
//! }
//! instance srv: Server @ site1 { nom = "the-server" }
//! bind cli.s -> srv.s
//! contain parent child as name
//! ```
//!
//! Whitespace (newlines included) only separates tokens. Interface
//! signatures are declared by their first use in a port.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use super::{DiagnosticCode, LocationMap, ParseDiagnostic, ParseResult};
use crate::model::{
    Binding, ComponentType, Configuration, Containment, Direction, ElementRef, Instance, Literal,
    PortDecl, ValueKind, DEFAULT_SITE,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    LBrace,
    RBrace,
    Colon,
    At,
    Dot,
    Arrow,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(_) => "integer literal".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::Colon => "':'".into(),
            Tok::At => "'@'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Eq => "'='".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    /// Second character of lookahead.
    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn tokenize(mut self) -> Result<Vec<Token>, (usize, usize, String)> {
        let mut tokens = Vec::new();
        while let Some(c) = self.peek() {
            let (line, column) = (self.line, self.column);
            let tok = match c {
                c if c.is_whitespace() => {
                    self.bump();
                    continue;
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                ':' => {
                    self.bump();
                    Tok::Colon
                }
                '@' => {
                    self.bump();
                    Tok::At
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '=' => {
                    self.bump();
                    Tok::Eq
                }
                '-' if self.peek2() == Some('>') => {
                    self.bump();
                    self.bump();
                    Tok::Arrow
                }
                '-' | '0'..='9' => self.integer(line, column)?,
                '"' => self.string(line, column)?,
                c if is_ident_start(c) => {
                    let mut ident = String::new();
                    while let Some(c) = self.peek() {
                        if !is_ident_continue(c) || (c == '-' && self.peek2() == Some('>')) {
                            break;
                        }
                        ident.push(c);
                        self.bump();
                    }
                    Tok::Ident(ident)
                }
                other => return Err((line, column, format!("unexpected character '{other}'"))),
            };
            tokens.push(Token { tok, line, column });
        }
        Ok(tokens)
    }

    fn integer(&mut self, line: usize, column: usize) -> Result<Tok, (usize, usize, String)> {
        let mut digits = String::new();
        if self.peek() == Some('-') {
            digits.push('-');
            self.bump();
        }
        while let Some(c) = self.peek() {
            if !c.is_ascii_digit() {
                break;
            }
            digits.push(c);
            self.bump();
        }
        if let Some(c) = self.peek() {
            if is_ident_continue(c) {
                return Err((
                    line,
                    column,
                    format!("malformed integer literal near '{c}'"),
                ));
            }
        }
        digits
            .parse()
            .map(Tok::Int)
            .map_err(|_| (line, column, format!("invalid integer literal '{digits}'")))
    }

    fn string(&mut self, line: usize, column: usize) -> Result<Tok, (usize, usize, String)> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err((line, column, "unterminated string literal".into()));
                }
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    other => {
                        let shown = other.map(String::from).unwrap_or_default();
                        return Err((
                            self.line,
                            self.column.saturating_sub(1),
                            format!("unknown escape '\\{shown}'"),
                        ));
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    locations: LocationMap,
    config: Configuration,
    semantic: Vec<ParseDiagnostic>,
    /// Position just past the last token, for end-of-input errors.
    end: (usize, usize),
}

type Step<T> = Result<T, ParseDiagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, line: usize, column: usize, message: String) -> ParseDiagnostic {
        ParseDiagnostic {
            location: self.locations.at(line, column),
            code: DiagnosticCode::Syntax,
            message,
        }
    }

    fn unexpected(&self, token: Option<&Token>, expected: &str) -> ParseDiagnostic {
        match token {
            Some(t) => self.syntax(
                t.line,
                t.column,
                format!("expected {expected}, found {}", t.tok.describe()),
            ),
            None => self.syntax(
                self.end.0,
                self.end.1,
                format!("expected {expected}, found end of input"),
            ),
        }
    }

    fn duplicate(&mut self, token: &Token, message: String) {
        self.semantic.push(ParseDiagnostic {
            location: self.locations.at(token.line, token.column),
            code: DiagnosticCode::Duplicate,
            message,
        });
    }

    fn expect(&mut self, want: Tok) -> Step<Token> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t),
            other => Err(self.unexpected(other.as_ref(), &want.describe())),
        }
    }

    fn ident(&mut self, what: &str) -> Step<(String, Token)> {
        match self.next() {
            Some(t) => match &t.tok {
                Tok::Ident(s) => Ok((s.clone(), t.clone())),
                _ => Err(self.unexpected(Some(&t), what)),
            },
            None => Err(self.unexpected(None, what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Step<Token> {
        match self.next() {
            Some(t) if t.tok == Tok::Ident(kw.to_string()) => Ok(t),
            other => Err(self.unexpected(other.as_ref(), &format!("'{kw}'"))),
        }
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek().map(|t| &t.tok == tok).unwrap_or(false)
    }

    fn run(&mut self) -> Step<()> {
        while let Some(t) = self.peek().cloned() {
            match &t.tok {
                Tok::Ident(kw) if kw == "type" => self.type_decl()?,
                Tok::Ident(kw) if kw == "instance" => self.instance_decl()?,
                Tok::Ident(kw) if kw == "bind" => self.bind_decl()?,
                Tok::Ident(kw) if kw == "contain" => self.contain_decl()?,
                _ => {
                    return Err(self.unexpected(Some(&t), "'type', 'instance', 'bind' or 'contain'"))
                }
            }
        }
        Ok(())
    }

    fn type_decl(&mut self) -> Step<()> {
        self.next();
        let (name, name_tok) = self.ident("type name")?;
        self.expect(Tok::LBrace)?;
        let mut ty = ComponentType::new(name.clone());
        let mut artifact_seen = false;
        loop {
            let Some(t) = self.next() else {
                return Err(self.unexpected(None, "'}'"));
            };
            let Tok::Ident(member) = &t.tok else {
                if t.tok == Tok::RBrace {
                    break;
                }
                return Err(self.unexpected(Some(&t), "type member or '}'"));
            };
            match member.as_str() {
                "provides" | "requires" => {
                    let direction = if member == "provides" {
                        Direction::Provided
                    } else {
                        Direction::Required
                    };
                    let (port, port_tok) = self.ident("port name")?;
                    self.expect(Tok::Colon)?;
                    let (interface, _) = self.ident("interface name")?;
                    if ty.port(&port).is_some() {
                        self.duplicate(
                            &port_tok,
                            format!("port '{port}' declared more than once on '{name}'"),
                        );
                        continue;
                    }
                    self.locations.record(
                        ElementRef::Port {
                            type_name: name.clone(),
                            port: port.clone(),
                        },
                        port_tok.line,
                        port_tok.column,
                    );
                    self.config.declare_interface(&interface);
                    self.locations.record(
                        ElementRef::Interface(interface.clone()),
                        port_tok.line,
                        port_tok.column,
                    );
                    ty.ports.push(PortDecl {
                        name: port,
                        direction,
                        interface,
                    });
                }
                "attribute" => {
                    let (attr, attr_tok) = self.ident("attribute name")?;
                    self.expect(Tok::Colon)?;
                    let (kind_name, kind_tok) = self.ident("value kind")?;
                    let Some(kind) = ValueKind::parse(&kind_name) else {
                        return Err(self.syntax(
                            kind_tok.line,
                            kind_tok.column,
                            format!(
                                "unknown value kind '{kind_name}', expected string, integer or boolean"
                            ),
                        ));
                    };
                    if ty.attributes.contains_key(&attr) {
                        self.duplicate(
                            &attr_tok,
                            format!("attribute '{attr}' declared more than once on '{name}'"),
                        );
                        continue;
                    }
                    self.locations.record(
                        ElementRef::TypeAttribute {
                            type_name: name.clone(),
                            name: attr.clone(),
                        },
                        attr_tok.line,
                        attr_tok.column,
                    );
                    ty.attributes.insert(attr, kind);
                }
                "artifact" => {
                    let t = self.next();
                    let (artifact, tok) = match t {
                        Some(Token {
                            tok: Tok::Str(ref s),
                            ..
                        }) => (s.clone(), t.clone().unwrap()),
                        other => return Err(self.unexpected(other.as_ref(), "artifact string")),
                    };
                    if artifact_seen {
                        self.duplicate(&tok, format!("artifact declared twice on '{name}'"));
                    }
                    artifact_seen = true;
                    ty.artifact = artifact;
                }
                _ => return Err(self.unexpected(Some(&t), "type member or '}'")),
            }
        }
        if self.config.component_type(&name).is_some() {
            self.duplicate(&name_tok, format!("type '{name}' declared more than once"));
            return Ok(());
        }
        self.locations
            .record(ElementRef::Type(name), name_tok.line, name_tok.column);
        self.config.types.push(ty);
        Ok(())
    }

    fn literal(&mut self) -> Step<Literal> {
        let t = self.next();
        match t.as_ref().map(|t| &t.tok) {
            Some(Tok::Str(s)) => Ok(Literal::String(s.clone())),
            Some(Tok::Int(i)) => Ok(Literal::Integer(*i)),
            Some(Tok::Ident(b)) if b == "true" => Ok(Literal::Boolean(true)),
            Some(Tok::Ident(b)) if b == "false" => Ok(Literal::Boolean(false)),
            _ => Err(self.unexpected(t.as_ref(), "literal")),
        }
    }

    fn instance_decl(&mut self) -> Step<()> {
        self.next();
        let (id, id_tok) = self.ident("instance id")?;
        self.expect(Tok::Colon)?;
        let (type_name, _) = self.ident("type name")?;
        let mut instance = Instance::new(id.clone(), type_name);
        if self.at(&Tok::At) {
            self.next();
            instance.site = self.ident("site label")?.0;
        }
        let mut values = BTreeMap::new();
        if self.at(&Tok::LBrace) {
            self.next();
            loop {
                if self.at(&Tok::RBrace) {
                    self.next();
                    break;
                }
                let (attr, attr_tok) = self.ident("attribute name or '}'")?;
                self.expect(Tok::Eq)?;
                let value = self.literal()?;
                if values.contains_key(&attr) {
                    self.duplicate(
                        &attr_tok,
                        format!("attribute '{attr}' assigned more than once on '{id}'"),
                    );
                    continue;
                }
                self.locations.record(
                    ElementRef::AttributeValue {
                        instance: id.clone(),
                        name: attr.clone(),
                    },
                    attr_tok.line,
                    attr_tok.column,
                );
                values.insert(attr, value);
            }
        }
        instance.attribute_values = values;
        if self.config.instance(&id).is_some() {
            self.duplicate(&id_tok, format!("instance '{id}' declared more than once"));
            return Ok(());
        }
        self.locations
            .record(ElementRef::Instance(id), id_tok.line, id_tok.column);
        self.config.instances.push(instance);
        Ok(())
    }

    fn endpoint(&mut self) -> Step<(String, String)> {
        let (instance, _) = self.ident("instance id")?;
        self.expect(Tok::Dot)?;
        let (port, _) = self.ident("port name")?;
        Ok((instance, port))
    }

    fn bind_decl(&mut self) -> Step<()> {
        let kw = self.next().expect("peeked");
        let (client, client_port) = self.endpoint()?;
        self.expect(Tok::Arrow)?;
        let (server, server_port) = self.endpoint()?;
        self.locations.record(
            ElementRef::Binding {
                client: client.clone(),
                port: client_port.clone(),
            },
            kw.line,
            kw.column,
        );
        self.config.bindings.push(Binding {
            client_instance: client,
            client_port,
            server_instance: server,
            server_port,
        });
        Ok(())
    }

    fn contain_decl(&mut self) -> Step<()> {
        let kw = self.next().expect("peeked");
        let (parent, _) = self.ident("parent instance id")?;
        let (child, _) = self.ident("child instance id")?;
        self.keyword("as")?;
        let (child_name, _) = self.ident("child name")?;
        self.locations.record(
            ElementRef::Containment {
                parent: parent.clone(),
                child: child.clone(),
            },
            kw.line,
            kw.column,
        );
        self.config.containments.push(Containment {
            parent,
            child,
            child_name,
        });
        Ok(())
    }
}

/// Parses native-format text. Diagnostics refer to the file `<input>`.
pub fn parse_native(text: &str) -> ParseResult {
    parse_native_from("<input>", text)
}

/// Parses native-format text read from `file`.
pub fn parse_native_from(file: impl Into<PathBuf>, text: &str) -> ParseResult {
    let locations = LocationMap::new(file.into());
    let tokens = match Lexer::new(text).tokenize() {
        Ok(tokens) => tokens,
        Err((line, column, message)) => {
            return Err(vec![ParseDiagnostic {
                location: locations.at(line, column),
                code: DiagnosticCode::Syntax,
                message,
            }])
        }
    };
    let end = tokens.last().map(|t| (t.line, t.column)).unwrap_or((1, 1));
    let mut parser = Parser {
        tokens,
        pos: 0,
        locations,
        config: Configuration::default(),
        semantic: Vec::new(),
        end,
    };
    if let Err(diag) = parser.run() {
        return Err(vec![diag]);
    }
    if !parser.semantic.is_empty() {
        return Err(parser.semantic);
    }
    parser.locations.check(parser.config)
}

/// Renders `config` in native format with every list in canonical
/// (identifier) order. An empty configuration yields an empty document.
pub fn emit_native(config: &Configuration) -> String {
    let config = config.canonical();
    let mut out = String::new();
    for ty in &config.types {
        writeln!(out, "type {} {{", ty.name).unwrap();
        for port in &ty.ports {
            let kw = match port.direction {
                Direction::Provided => "provides",
                Direction::Required => "requires",
            };
            writeln!(out, "    {kw} {}: {}", port.name, port.interface).unwrap();
        }
        for (name, kind) in &ty.attributes {
            writeln!(out, "    attribute {name}: {kind}").unwrap();
        }
        writeln!(out, "    artifact {}", Literal::String(ty.artifact.clone())).unwrap();
        out.push_str("}\n\n");
    }
    for inst in &config.instances {
        write!(out, "instance {}: {}", inst.id, inst.type_name).unwrap();
        if inst.site != DEFAULT_SITE {
            write!(out, " @ {}", inst.site).unwrap();
        }
        if inst.attribute_values.is_empty() {
            out.push('\n');
        } else {
            out.push_str(" {\n");
            for (name, value) in &inst.attribute_values {
                writeln!(out, "    {name} = {value}").unwrap();
            }
            out.push_str("}\n");
        }
    }
    if !config.instances.is_empty()
        && !(config.bindings.is_empty() && config.containments.is_empty())
    {
        out.push('\n');
    }
    for b in &config.bindings {
        writeln!(
            out,
            "bind {}.{} -> {}.{}",
            b.client_instance, b.client_port, b.server_instance, b.server_port
        )
        .unwrap();
    }
    for c in &config.containments {
        writeln!(out, "contain {} {} as {}", c.parent, c.child, c.child_name).unwrap();
    }
    out
}
