//! Line-based netlist format, the human-writable program source.
//!
//! ```text
//! # two-node chain
//! node 0 CONST param=5
//! node 1 PASS output
//! in 1 <- 0:1
//! ```
//!
//! `node <id> <OPCODE> [param=<int>] [output]` declares one core;
//! `in <id> <- <src>:<w> ...` appends weighted connections. Every
//! diagnostic carries a line and column.

use std::fmt;

use thiserror::Error;

use crate::model::{AddressTable, ConnectionEntry, NodeId, NodeProgram, Opcode, MAX_FAN_IN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown opcode '{0}'")]
    UnknownOpcode(String),
    #[error("node id {0} exceeds the 16-bit address space")]
    IdOutOfRange(i64),
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("reference to undeclared node {0}")]
    UnresolvedReference(NodeId),
    #[error("weight {0} outside signed 8-bit range [-128, 127]")]
    WeightOutOfRange(i64),
    #[error("param {0} outside signed 16-bit range")]
    ParamOutOfRange(i64),
    #[error("node {id}: fan-in {fan_in} exceeds {MAX_FAN_IN}")]
    FanInExceeded { id: NodeId, fan_in: usize },
    #[error("node {id}: source {source_id} connected more than once")]
    DuplicateSource { id: NodeId, source_id: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: {}", self.line, self.col, self.kind)
    }
}

impl std::error::Error for ParseError {}

/// One declared node with its resolved connections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetNode {
    pub id: NodeId,
    pub opcode: Opcode,
    pub param: i16,
    pub is_output: bool,
    pub inputs: Vec<ConnectionEntry>,
}

/// A parsed netlist with all references resolved, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetlistDoc {
    pub nodes: Vec<NetNode>,
}

impl NetlistDoc {
    pub fn to_programs(&self) -> Vec<NodeProgram> {
        self.nodes
            .iter()
            .map(|n| NodeProgram {
                id: n.id,
                opcode: n.opcode,
                param: n.param,
                table: AddressTable::new(n.inputs.clone()),
                is_output: n.is_output,
            })
            .collect()
    }

    pub fn from_programs(programs: &[NodeProgram]) -> Self {
        Self {
            nodes: programs
                .iter()
                .map(|p| NetNode {
                    id: p.id,
                    opcode: p.opcode,
                    param: p.param,
                    is_output: p.is_output,
                    inputs: p.table.entries().to_vec(),
                })
                .collect(),
        }
    }

    /// Canonical pretty-print: node lines ascending by id, then `in`
    /// lines ascending by target, sources in table order. Parsing the
    /// output reproduces the document.
    pub fn emit(&self) -> String {
        let mut nodes: Vec<&NetNode> = self.nodes.iter().collect();
        nodes.sort_by_key(|n| n.id);
        let mut out = String::new();
        for node in &nodes {
            out.push_str(&format!("node {} {}", node.id, node.opcode));
            if node.param != 0 {
                out.push_str(&format!(" param={}", node.param));
            }
            if node.is_output {
                out.push_str(" output");
            }
            out.push('\n');
        }
        for node in &nodes {
            if node.inputs.is_empty() {
                continue;
            }
            let mut entries = node.inputs.clone();
            entries.sort_by_key(|e| e.source);
            out.push_str(&format!("in {} <-", node.id));
            for entry in entries {
                out.push_str(&format!(" {}:{}", entry.source, entry.weight));
            }
            out.push('\n');
        }
        out
    }
}

struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &line[s..i],
                    col: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            col: s + 1,
        });
    }
    tokens
}

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

fn parse_node_id(tok: &Token<'_>, line: usize) -> Result<NodeId, ParseError> {
    let raw: i64 = tok.text.parse().map_err(|_| {
        err(
            line,
            tok.col,
            ParseErrorKind::Syntax(format!("expected node id, found '{}'", tok.text)),
        )
    })?;
    if !(0..=0xFFFF).contains(&raw) {
        return Err(err(line, tok.col, ParseErrorKind::IdOutOfRange(raw)));
    }
    Ok(NodeId(raw as u16))
}

/// Parses netlist text into a resolved document.
pub fn parse_netlist(text: &str) -> Result<NetlistDoc, ParseError> {
    // First pass: declarations, so `in` lines may reference forward.
    let mut declared: Vec<(NodeId, usize)> = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let tokens = tokenize(strip_comment(raw_line));
        if tokens.is_empty() {
            continue;
        }
        if tokens[0].text == "node" {
            let id_tok = tokens.get(1).ok_or_else(|| {
                err(
                    line,
                    tokens[0].col,
                    ParseErrorKind::Syntax("node line needs an id".into()),
                )
            })?;
            let id = parse_node_id(id_tok, line)?;
            if declared.iter().any(|&(d, _)| d == id) {
                return Err(err(line, id_tok.col, ParseErrorKind::DuplicateId(id)));
            }
            declared.push((id, line));
        }
    }
    let is_declared = |id: NodeId| declared.iter().any(|&(d, _)| d == id);

    let mut doc = NetlistDoc::default();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let tokens = tokenize(strip_comment(raw_line));
        if tokens.is_empty() {
            continue;
        }
        match tokens[0].text {
            "node" => {
                let id = parse_node_id(&tokens[1], line)?;
                let op_tok = tokens.get(2).ok_or_else(|| {
                    err(
                        line,
                        tokens[1].col,
                        ParseErrorKind::Syntax("node line needs an opcode".into()),
                    )
                })?;
                let opcode = Opcode::from_name(op_tok.text).ok_or_else(|| {
                    err(
                        line,
                        op_tok.col,
                        ParseErrorKind::UnknownOpcode(op_tok.text.into()),
                    )
                })?;
                let mut param: i16 = 0;
                let mut is_output = false;
                for tok in &tokens[3..] {
                    if let Some(value) = tok.text.strip_prefix("param=") {
                        let raw: i64 = value.parse().map_err(|_| {
                            err(
                                line,
                                tok.col,
                                ParseErrorKind::Syntax(format!("bad param '{value}'")),
                            )
                        })?;
                        param = i16::try_from(raw).map_err(|_| {
                            err(line, tok.col, ParseErrorKind::ParamOutOfRange(raw))
                        })?;
                    } else if tok.text == "output" {
                        is_output = true;
                    } else {
                        return Err(err(
                            line,
                            tok.col,
                            ParseErrorKind::Syntax(format!("unexpected token '{}'", tok.text)),
                        ));
                    }
                }
                doc.nodes.push(NetNode {
                    id,
                    opcode,
                    param,
                    is_output,
                    inputs: Vec::new(),
                });
            }
            "in" => {
                let id_tok = tokens.get(1).ok_or_else(|| {
                    err(
                        line,
                        tokens[0].col,
                        ParseErrorKind::Syntax("in line needs a target id".into()),
                    )
                })?;
                let target = parse_node_id(id_tok, line)?;
                if !is_declared(target) {
                    return Err(err(
                        line,
                        id_tok.col,
                        ParseErrorKind::UnresolvedReference(target),
                    ));
                }
                let arrow = tokens.get(2).ok_or_else(|| {
                    err(
                        line,
                        id_tok.col,
                        ParseErrorKind::Syntax("expected '<-'".into()),
                    )
                })?;
                if arrow.text != "<-" {
                    return Err(err(
                        line,
                        arrow.col,
                        ParseErrorKind::Syntax(format!("expected '<-', found '{}'", arrow.text)),
                    ));
                }
                let node = doc
                    .nodes
                    .iter_mut()
                    .find(|n| n.id == target)
                    .expect("declared targets exist after first pass");
                for tok in &tokens[3..] {
                    let (src_text, w_text) = tok.text.split_once(':').ok_or_else(|| {
                        err(
                            line,
                            tok.col,
                            ParseErrorKind::Syntax(format!(
                                "expected <src>:<w>, found '{}'",
                                tok.text
                            )),
                        )
                    })?;
                    let source = parse_node_id(
                        &Token {
                            text: src_text,
                            col: tok.col,
                        },
                        line,
                    )?;
                    if !is_declared(source) {
                        return Err(err(
                            line,
                            tok.col,
                            ParseErrorKind::UnresolvedReference(source),
                        ));
                    }
                    let raw_w: i64 = w_text.parse().map_err(|_| {
                        err(
                            line,
                            tok.col,
                            ParseErrorKind::Syntax(format!("bad weight '{w_text}'")),
                        )
                    })?;
                    let weight = i8::try_from(raw_w)
                        .map_err(|_| err(line, tok.col, ParseErrorKind::WeightOutOfRange(raw_w)))?;
                    if node.inputs.iter().any(|e| e.source == source) {
                        return Err(err(
                            line,
                            tok.col,
                            ParseErrorKind::DuplicateSource {
                                id: target,
                                source_id: source,
                            },
                        ));
                    }
                    node.inputs.push(ConnectionEntry { source, weight });
                    if node.inputs.len() > MAX_FAN_IN {
                        return Err(err(
                            line,
                            tok.col,
                            ParseErrorKind::FanInExceeded {
                                id: target,
                                fan_in: node.inputs.len(),
                            },
                        ));
                    }
                }
            }
            other => {
                return Err(err(
                    line,
                    tokens[0].col,
                    ParseErrorKind::Syntax(format!("expected 'node' or 'in', found '{other}'")),
                ));
            }
        }
    }
    Ok(doc)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}
