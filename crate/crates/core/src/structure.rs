//! A lightweight structural recognizer for Java-like sources.
//!
//! The tokenizer honors string, char and text-block literals plus line and
//! block comments; braces are matched to find the extent of type and method
//! declarations. Nothing beyond that is parsed: lambdas, anonymous classes,
//! initializer blocks and everything inside a method body are opaque brace
//! groups owned by the enclosing declaration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{split_lines, FineHistory, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseFailureReason {
    UnbalancedBraces,
    UnterminatedLiteral,
    UnterminatedComment,
}

impl fmt::Display for ParseFailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseFailureReason::UnbalancedBraces => "unbalanced-braces",
            ParseFailureReason::UnterminatedLiteral => "unterminated-literal",
            ParseFailureReason::UnterminatedComment => "unterminated-comment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{reason} at line {line}")]
pub struct ParseFailure {
    pub reason: ParseFailureReason,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Ident,
    Punct(char),
    Literal,
    Number,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    kind: TokenKind,
    text: &'a str,
    line: usize,
}

impl Token<'_> {
    fn is_punct(&self, c: char) -> bool {
        self.kind == TokenKind::Punct(c)
    }

    fn is_ident(&self, word: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == word
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

fn tokenize(src: &str) -> Result<Vec<Token<'_>>, ParseFailure> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map(|&(o, _)| o).unwrap_or(src.len());
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);

    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut i = 0usize;
    while let Some(c) = at(i) {
        let start = i;
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '/' if at(i + 1) == Some('/') => {
                while at(i).is_some_and(|c| c != '\n') {
                    i += 1;
                }
            }
            '/' if at(i + 1) == Some('*') => {
                let open_line = line;
                i += 2;
                loop {
                    match at(i) {
                        None => {
                            return Err(ParseFailure {
                                reason: ParseFailureReason::UnterminatedComment,
                                line: open_line,
                            })
                        }
                        Some('*') if at(i + 1) == Some('/') => {
                            i += 2;
                            break;
                        }
                        Some('\n') => {
                            line += 1;
                            i += 1;
                        }
                        Some(_) => i += 1,
                    }
                }
            }
            '"' if at(i + 1) == Some('"') && at(i + 2) == Some('"') => {
                let open_line = line;
                i += 3;
                loop {
                    match at(i) {
                        None => {
                            return Err(ParseFailure {
                                reason: ParseFailureReason::UnterminatedLiteral,
                                line: open_line,
                            })
                        }
                        Some('\\') => i += 2,
                        Some('"') if at(i + 1) == Some('"') && at(i + 2) == Some('"') => {
                            i += 3;
                            break;
                        }
                        Some('\n') => {
                            line += 1;
                            i += 1;
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Literal,
                    text: &src[end_of(start)..end_of(i)],
                    line: open_line,
                });
            }
            '"' | '\'' => {
                let quote = c;
                i += 1;
                loop {
                    match at(i) {
                        None | Some('\n') => {
                            return Err(ParseFailure {
                                reason: ParseFailureReason::UnterminatedLiteral,
                                line,
                            })
                        }
                        Some('\\') => {
                            if at(i + 1) == Some('\n') || at(i + 1).is_none() {
                                return Err(ParseFailure {
                                    reason: ParseFailureReason::UnterminatedLiteral,
                                    line,
                                });
                            }
                            i += 2;
                        }
                        Some(q) if q == quote => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Literal,
                    text: &src[end_of(start)..end_of(i)],
                    line,
                });
            }
            c if is_ident_start(c) => {
                while at(i).is_some_and(is_ident_part) {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident,
                    text: &src[end_of(start)..end_of(i)],
                    line,
                });
            }
            c if c.is_ascii_digit() => {
                while at(i).is_some_and(|c| is_ident_part(c) || c == '.') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Number,
                    text: &src[end_of(start)..end_of(i)],
                    line,
                });
            }
            c => {
                i += 1;
                tokens.push(Token {
                    kind: TokenKind::Punct(c),
                    text: &src[end_of(start)..end_of(i)],
                    line,
                });
            }
        }
    }
    Ok(tokens)
}

/// Brace nesting depth at the end of every line, computed by the
/// tokenizer (braces in literals and comments do not count).
pub fn line_end_depths(text: &str) -> Result<Vec<usize>, ParseFailure> {
    let tokens = tokenize(text)?;
    let line_count = split_lines(text).len();
    let mut depths = Vec::with_capacity(line_count);
    let mut depth = 0usize;
    let mut tokens = tokens.iter().peekable();
    for line in 1..=line_count {
        while let Some(tok) = tokens.next_if(|t| t.line <= line) {
            match tok.kind {
                TokenKind::Punct('{') => depth += 1,
                TokenKind::Punct('}') => {
                    depth = depth.checked_sub(1).ok_or(ParseFailure {
                        reason: ParseFailureReason::UnbalancedBraces,
                        line: tok.line,
                    })?
                }
                _ => {}
            }
        }
        depths.push(depth);
    }
    Ok(depths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    ClassLike,
    Method,
}

/// One recognized declaration; `start_line..=end_line` runs from the first
/// token of the declaration header to its closing brace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub kind: DeclKind,
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub parent: Option<usize>,
}

impl Declaration {
    pub fn contains(&self, line: usize) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStructure {
    pub package: Option<String>,
    pub decls: Vec<Declaration>,
}

impl FileStructure {
    pub fn find(&self, name: &str) -> Option<&Declaration> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// Innermost class-like and method declarations containing `line`.
    pub fn locate(&self, line: usize) -> Location {
        let mut loc = Location::default();
        for decl in self.decls.iter().filter(|d| d.contains(line)) {
            match decl.kind {
                DeclKind::ClassLike => loc.class = Some(decl.name.clone()),
                DeclKind::Method => loc.method = Some(decl.name.clone()),
            }
        }
        if let (Some(class), Some(method)) = (&loc.class, &loc.method) {
            // A nested class inside the method's class can't be inside the method.
            if !method.starts_with(&format!("{class}.")) {
                loc.method = None;
            }
        }
        loc
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub class: Option<String>,
    pub method: Option<String>,
}

const TYPE_KEYWORDS: [&str; 4] = ["class", "interface", "enum", "record"];
const CONTROL_KEYWORDS: [&str; 13] = [
    "if",
    "while",
    "for",
    "switch",
    "catch",
    "synchronized",
    "do",
    "try",
    "new",
    "return",
    "else",
    "finally",
    "throw",
];

enum Frame {
    Decl(usize),
    Opaque,
}

/// Recognizes type and method declarations in one source file.
pub fn parse_structure(text: &str) -> Result<FileStructure, ParseFailure> {
    let tokens = tokenize(text)?;
    let mut structure = FileStructure::default();
    let mut stack: Vec<(Frame, usize)> = Vec::new();
    let mut prefix: Vec<Token> = Vec::new();

    for tok in &tokens {
        match tok.kind {
            TokenKind::Punct('{') => {
                let enclosing_class = match stack.last() {
                    None => Some(None),
                    Some((Frame::Decl(i), _)) if structure.decls[*i].kind == DeclKind::ClassLike => {
                        Some(Some(*i))
                    }
                    _ => None,
                };
                let start_line = prefix.first().map_or(tok.line, |t| t.line);
                let frame = match enclosing_class {
                    Some(parent) => {
                        let owner = parent.map(|p| structure.decls[p].name.clone());
                        if let Some(name) = type_name(&prefix) {
                            let qualified = match (&owner, &structure.package) {
                                (Some(o), _) => format!("{o}.{name}"),
                                (None, Some(pkg)) => format!("{pkg}.{name}"),
                                (None, None) => name.to_string(),
                            };
                            Frame::Decl(push_decl(
                                &mut structure,
                                DeclKind::ClassLike,
                                qualified,
                                start_line,
                                parent,
                            ))
                        } else if let (Some(owner), Some(sig)) = (owner, method_signature(&prefix)) {
                            Frame::Decl(push_decl(
                                &mut structure,
                                DeclKind::Method,
                                format!("{owner}.{sig}"),
                                start_line,
                                parent,
                            ))
                        } else {
                            Frame::Opaque
                        }
                    }
                    None => Frame::Opaque,
                };
                stack.push((frame, tok.line));
                prefix.clear();
            }
            TokenKind::Punct('}') => {
                let (frame, _) = stack.pop().ok_or(ParseFailure {
                    reason: ParseFailureReason::UnbalancedBraces,
                    line: tok.line,
                })?;
                if let Frame::Decl(i) = frame {
                    structure.decls[i].end_line = tok.line;
                }
                prefix.clear();
            }
            TokenKind::Punct(';') => {
                if stack.is_empty() && prefix.first().is_some_and(|t| t.is_ident("package")) {
                    let name: String = prefix[1..].iter().map(|t| t.text).collect();
                    structure.package = Some(name);
                }
                prefix.clear();
            }
            _ => {
                let collecting = match stack.last() {
                    None => true,
                    Some((Frame::Decl(i), _)) => structure.decls[*i].kind == DeclKind::ClassLike,
                    Some((Frame::Opaque, _)) => false,
                };
                if collecting {
                    prefix.push(*tok);
                }
            }
        }
    }
    if let Some((_, line)) = stack.last() {
        return Err(ParseFailure {
            reason: ParseFailureReason::UnbalancedBraces,
            line: *line,
        });
    }
    Ok(structure)
}

fn push_decl(
    structure: &mut FileStructure,
    kind: DeclKind,
    name: String,
    start_line: usize,
    parent: Option<usize>,
) -> usize {
    structure.decls.push(Declaration {
        kind,
        name,
        start_line,
        end_line: start_line,
        parent,
    });
    structure.decls.len() - 1
}

fn type_name<'a>(prefix: &[Token<'a>]) -> Option<&'a str> {
    if prefix.iter().any(|t| t.is_punct('=') || t.is_ident("new")) {
        return None;
    }
    prefix.windows(2).enumerate().find_map(|(i, w)| {
        let keyword = w[0].kind == TokenKind::Ident && TYPE_KEYWORDS.contains(&w[0].text);
        let after_dot = i > 0 && prefix[i - 1].is_punct('.');
        (keyword && !after_dot && w[1].kind == TokenKind::Ident).then_some(w[1].text)
    })
}

/// Balanced top-level `( … )` groups as (open, close) indices.
fn paren_groups(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut open = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_punct('(') {
            if depth == 0 {
                open = i;
            }
            depth += 1;
        } else if t.is_punct(')') && depth > 0 {
            depth -= 1;
            if depth == 0 {
                groups.push((open, i));
            }
        }
    }
    groups
}

fn method_signature(prefix: &[Token]) -> Option<String> {
    let groups = paren_groups(prefix);
    let &(open, close) = groups.last()?;

    let mut depth = 0i32;
    for (i, t) in prefix.iter().enumerate() {
        match t.kind {
            TokenKind::Punct('(') => depth += 1,
            TokenKind::Punct(')') => depth -= 1,
            TokenKind::Punct('=') if depth <= 0 => return None,
            TokenKind::Punct('-') if prefix.get(i + 1).is_some_and(|n| n.is_punct('>')) => {
                return None
            }
            TokenKind::Ident if depth <= 0 && CONTROL_KEYWORDS.contains(&t.text) => return None,
            _ => {}
        }
    }

    let name = prefix.get(open.checked_sub(1)?)?;
    if name.kind != TokenKind::Ident || CONTROL_KEYWORDS.contains(&name.text) {
        return None;
    }
    if open >= 2 && (prefix[open - 2].is_punct('@') || prefix[open - 2].is_punct('.')) {
        return None;
    }
    let params = parameter_types(&prefix[open + 1..close]);
    Some(format!("{}({})", name.text, params.join(",")))
}

fn parameter_types(tokens: &[Token]) -> Vec<String> {
    let mut params: Vec<Vec<Token>> = vec![Vec::new()];
    let (mut parens, mut angles) = (0i32, 0i32);
    for t in tokens {
        match t.kind {
            TokenKind::Punct('(') => parens += 1,
            TokenKind::Punct(')') => parens -= 1,
            TokenKind::Punct('<') => angles += 1,
            TokenKind::Punct('>') => angles -= 1,
            TokenKind::Punct(',') if parens == 0 && angles == 0 => {
                params.push(Vec::new());
                continue;
            }
            _ => {}
        }
        params.last_mut().expect("non-empty").push(*t);
    }

    params
        .into_iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let kept = strip_annotations(&p);
            let last_ident = kept.iter().rposition(|t| t.kind == TokenKind::Ident);
            kept.iter()
                .enumerate()
                .filter(|(i, t)| Some(*i) != last_ident && !t.is_ident("final"))
                .map(|(_, t)| t.text)
                .collect::<String>()
        })
        .collect()
}

fn strip_annotations<'a>(tokens: &[Token<'a>]) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is_punct('@') {
            i += 1;
            while i < tokens.len() && tokens[i].kind == TokenKind::Ident {
                i += 1;
                if i + 1 < tokens.len() && tokens[i].is_punct('.') && tokens[i + 1].kind == TokenKind::Ident {
                    i += 1;
                } else {
                    break;
                }
            }
            if i < tokens.len() && tokens[i].is_punct('(') {
                let mut depth = 0;
                while i < tokens.len() {
                    if tokens[i].is_punct('(') {
                        depth += 1;
                    } else if tokens[i].is_punct(')') {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    i += 1;
                }
            }
            continue;
        }
        out.push(tokens[i]);
        i += 1;
    }
    out
}

/// Structure of every file in a snapshot, keyed by path.
pub type StructuralMap = BTreeMap<String, FileStructure>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("no structural information for file {0}")]
    UnknownFile(String),
    #[error("{file}: {failure}")]
    Parse { file: String, failure: ParseFailure },
    #[error("bead seq {seq}: {file}: {failure}")]
    BeadParse {
        seq: usize,
        file: String,
        failure: ParseFailure,
    },
    #[error("replay failed: {0}")]
    Replay(String),
}

/// Parses every file of a snapshot.
pub fn parse_snapshot(snapshot: &Snapshot) -> Result<StructuralMap, StructureError> {
    snapshot
        .files
        .iter()
        .map(|(path, text)| {
            parse_structure(text)
                .map(|s| (path.clone(), s))
                .map_err(|failure| StructureError::Parse {
                    file: path.clone(),
                    failure,
                })
        })
        .collect()
}

/// Whether every file of a snapshot parses.
pub fn snapshot_parses(snapshot: &Snapshot) -> bool {
    snapshot.files.values().all(|text| tokenize_balanced(text))
}

fn tokenize_balanced(text: &str) -> bool {
    line_end_depths(text).is_ok_and(|d| d.last().copied().unwrap_or(0) == 0)
}

pub fn locate(map: &StructuralMap, file: &str, line: usize) -> Result<Location, StructureError> {
    map.get(file)
        .map(|s| s.locate(line))
        .ok_or_else(|| StructureError::UnknownFile(file.to_string()))
}

/// Sets each bead's enclosing class and method from its first hunk, located
/// in the snapshot just before the bead.
pub fn annotate_beads(history: &FineHistory) -> Result<FineHistory, StructureError> {
    let states = history
        .replay()
        .map_err(|e| StructureError::Replay(e.to_string()))?;
    let mut out = history.clone();
    for (bead, pre) in out.beads.iter_mut().zip(&states) {
        let Some(hunk) = bead.hunks.first() else {
            continue;
        };
        let location = match pre.get(&hunk.file) {
            Some(text) => parse_structure(text)
                .map_err(|failure| StructureError::BeadParse {
                    seq: bead.seq,
                    file: hunk.file.clone(),
                    failure,
                })?
                .locate(hunk.start),
            None => Location::default(),
        };
        bead.enclosing_class = location.class;
        bead.enclosing_method = location.method;
    }
    Ok(out)
}
