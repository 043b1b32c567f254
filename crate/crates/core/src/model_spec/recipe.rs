//! Line-oriented model recipe language.
//!
//! ```text
//! # comments run to end of line
//! control x : continuous center=mean powers=2
//! control occ : categorical encode=onehot ref=auto
//! control treated_before : binary
//! interact x * occ
//! hermite z degree=5 offset=0.3
//! ```

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlKind {
    Continuous,
    Binary,
    Categorical,
}

/// Transform applied to a continuous baseline before powers and interactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Centering {
    None,
    Mean,
    /// Lower median.
    Median,
    Range01,
    Range11,
    /// Subtract a fixed constant.
    Offset(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reference {
    /// First level in sorted order.
    Auto,
    Level(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingOption {
    OneHot,
    Sums,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlClause {
    pub name: String,
    pub kind: ControlKind,
    pub center: Option<Centering>,
    pub powers: Option<u32>,
    pub reference: Option<Reference>,
    pub encode: Option<EncodingOption>,
}

impl ControlClause {
    pub fn new(name: impl Into<String>, kind: ControlKind) -> Self {
        Self {
            name: name.into(),
            kind,
            center: None,
            powers: None,
            reference: None,
            encode: None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.powers.unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteClause {
    pub name: String,
    pub degree: u32,
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Clause {
    Control(ControlClause),
    Interact(Vec<String>),
    Hermite(HermiteClause),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Recipe {
    pub clauses: Vec<Clause>,
}

impl Recipe {
    pub fn controls(&self) -> impl Iterator<Item = &ControlClause> {
        self.clauses.iter().filter_map(|c| match c {
            Clause::Control(cc) => Some(cc),
            _ => None,
        })
    }

    pub fn hermites(&self) -> impl Iterator<Item = &HermiteClause> {
        self.clauses.iter().filter_map(|c| match c {
            Clause::Hermite(h) => Some(h),
            _ => None,
        })
    }

    pub fn control(&self, name: &str) -> Option<&ControlClause> {
        self.controls().find(|c| c.name == name)
    }

    /// Checks name uniqueness, option ranges and interaction references.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for clause in &self.clauses {
            let name = match clause {
                Clause::Control(c) => &c.name,
                Clause::Hermite(h) => &h.name,
                Clause::Interact(_) => continue,
            };
            if !seen.insert(name.clone()) {
                return Err(Error::input(format!("duplicate name `{name}`")));
            }
        }
        for clause in &self.clauses {
            match clause {
                Clause::Control(c) => {
                    if c.powers == Some(0) {
                        return Err(Error::input(format!("`{}`: powers must be at least 1", c.name)));
                    }
                    if let Some(Centering::Offset(l)) = c.center {
                        if !l.is_finite() {
                            return Err(Error::input(format!("`{}`: offset must be finite", c.name)));
                        }
                    }
                }
                Clause::Hermite(h) => {
                    if h.degree == 0 {
                        return Err(Error::input(format!("`{}`: hermite degree must be at least 1", h.name)));
                    }
                    if h.offset.is_some_and(|l| !l.is_finite()) {
                        return Err(Error::input(format!("`{}`: offset must be finite", h.name)));
                    }
                }
                Clause::Interact(names) => {
                    if names.len() < 2 {
                        return Err(Error::input("interaction needs at least two factors"));
                    }
                    for n in names {
                        if self.control(n).is_none() {
                            return Err(Error::input(format!(
                                "interaction factor `{n}` is not a declared control"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn fmt_float(v: f64) -> String {
    // `{:?}` always round-trips and keeps a decimal point
    format!("{v:?}")
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '"' || c == '#' || c == '\\')
}

fn quote(s: &str) -> String {
    if needs_quotes(s) {
        let escaped = s.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{escaped}\"")
    } else {
        s.to_string()
    }
}

impl fmt::Display for Centering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Centering::None => write!(f, "none"),
            Centering::Mean => write!(f, "mean"),
            Centering::Median => write!(f, "median"),
            Centering::Range01 => write!(f, "range01"),
            Centering::Range11 => write!(f, "range11"),
            Centering::Offset(l) => write!(f, "offset:{}", fmt_float(*l)),
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for clause in &self.clauses {
            match clause {
                Clause::Control(c) => {
                    let kind = match c.kind {
                        ControlKind::Continuous => "continuous",
                        ControlKind::Binary => "binary",
                        ControlKind::Categorical => "categorical",
                    };
                    write!(f, "control {} : {kind}", c.name)?;
                    if let Some(center) = c.center {
                        write!(f, " center={center}")?;
                    }
                    if let Some(p) = c.powers {
                        write!(f, " powers={p}")?;
                    }
                    if let Some(e) = c.encode {
                        let e = match e {
                            EncodingOption::OneHot => "onehot",
                            EncodingOption::Sums => "sums",
                        };
                        write!(f, " encode={e}")?;
                    }
                    match &c.reference {
                        Some(Reference::Auto) => write!(f, " ref=auto")?,
                        Some(Reference::Level(l)) if l == "auto" => write!(f, " ref=\"auto\"")?,
                        Some(Reference::Level(l)) => write!(f, " ref={}", quote(l))?,
                        None => {}
                    }
                    writeln!(f)?;
                }
                Clause::Interact(names) => writeln!(f, "interact {}", names.join(" * "))?,
                Clause::Hermite(h) => {
                    write!(f, "hermite {} degree={}", h.name, h.degree)?;
                    if let Some(l) = h.offset {
                        write!(f, " offset={}", fmt_float(l))?;
                    }
                    writeln!(f)?;
                }
            }
        }
        Ok(())
    }
}

struct Token {
    text: String,
    quoted: bool,
    column: usize,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let column = i + 1;
        let mut text = String::new();
        let mut quoted = false;
        while i < chars.len() {
            let (_, c) = chars[i];
            if c.is_whitespace() || c == '#' {
                break;
            }
            if c == '"' {
                quoted = true;
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    let (_, c) = chars[i];
                    if c == '\\' && i + 1 < chars.len() {
                        text.push(chars[i + 1].1);
                        i += 2;
                        continue;
                    }
                    if c == '"' {
                        closed = true;
                        i += 1;
                        break;
                    }
                    text.push(c);
                    i += 1;
                }
                if !closed {
                    return Err(Error::Parse {
                        line: line_no,
                        column,
                        message: "unterminated string".into(),
                    });
                }
                continue;
            }
            text.push(c);
            i += 1;
        }
        tokens.push(Token { text, quoted, column });
    }
    Ok(tokens)
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '.')
}

struct LineParser {
    line: usize,
    tokens: Vec<Token>,
    pos: usize,
    end_column: usize,
}

impl LineParser {
    fn err<T>(&self, column: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            column,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn expect_name(&mut self, what: &str) -> Result<String> {
        let end = self.end_column;
        match self.next() {
            Some(t) if !t.quoted && is_name(&t.text) => Ok(t.text.clone()),
            Some(t) => {
                let (c, s) = (t.column, t.text.clone());
                self.err(c, format!("expected {what}, found `{s}`"))
            }
            None => self.err(end, format!("expected {what}")),
        }
    }

    fn remaining(&mut self) -> Vec<&Token> {
        let rest = self.tokens[self.pos.min(self.tokens.len())..].iter().collect();
        self.pos = self.tokens.len();
        rest
    }
}

fn split_option(t: &Token) -> Option<(&str, &str)> {
    t.text.split_once('=')
}

fn parse_float(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_control(p: &mut LineParser) -> Result<ControlClause> {
    // `control NAME : KIND`, with `NAME:` accepted as well
    let end = p.end_column;
    let name_tok = match p.next() {
        Some(t) => (t.text.clone(), t.column, t.quoted),
        None => return p.err(end, "expected control name"),
    };
    let (name, colon_attached) = match name_tok.0.strip_suffix(':') {
        Some(stripped) => (stripped.to_string(), true),
        None => (name_tok.0.clone(), false),
    };
    if name_tok.2 || !is_name(&name) {
        return p.err(name_tok.1, format!("invalid control name `{}`", name_tok.0));
    }
    if !colon_attached {
        match p.next() {
            Some(t) if t.text == ":" => {}
            Some(t) => {
                let c = t.column;
                return p.err(c, "expected `:` after control name");
            }
            None => return p.err(end, "expected `:` after control name"),
        }
    }
    let kind = match p.next() {
        Some(t) => match t.text.as_str() {
            "continuous" => ControlKind::Continuous,
            "binary" => ControlKind::Binary,
            "categorical" => ControlKind::Categorical,
            other => {
                let (c, o) = (t.column, other.to_string());
                return p.err(c, format!("unknown control kind `{o}`"));
            }
        },
        None => return p.err(end, "expected control kind"),
    };
    let mut clause = ControlClause::new(name, kind);
    let line = p.line;
    for t in p.remaining() {
        let err = |message: String| Error::Parse {
            line,
            column: t.column,
            message,
        };
        let Some((key, value)) = split_option(t) else {
            return Err(err(format!("expected option, found `{}`", t.text)));
        };
        let applicable = match key {
            "center" | "powers" => kind == ControlKind::Continuous,
            "ref" | "encode" => kind == ControlKind::Categorical,
            _ => return Err(err(format!("unknown option `{key}`"))),
        };
        if !applicable {
            return Err(err(format!("option `{key}` does not apply to this control kind")));
        }
        let duplicate = match key {
            "center" => clause.center.is_some(),
            "powers" => clause.powers.is_some(),
            "ref" => clause.reference.is_some(),
            _ => clause.encode.is_some(),
        };
        if duplicate {
            return Err(err(format!("option `{key}` given twice")));
        }
        match key {
            "center" => {
                let c = match value {
                    "none" => Centering::None,
                    "mean" => Centering::Mean,
                    "median" => Centering::Median,
                    "range01" => Centering::Range01,
                    "range11" => Centering::Range11,
                    v => match v.strip_prefix("offset:").and_then(parse_float) {
                        Some(l) => Centering::Offset(l),
                        None => return Err(err(format!("unknown centering `{v}`"))),
                    },
                };
                clause.center = Some(c);
            }
            "powers" => match value.parse::<u32>() {
                Ok(d) if d >= 1 => clause.powers = Some(d),
                _ => return Err(err(format!("powers must be a positive integer, found `{value}`"))),
            },
            "encode" => {
                clause.encode = Some(match value {
                    "onehot" => EncodingOption::OneHot,
                    "sums" => EncodingOption::Sums,
                    v => return Err(err(format!("unknown encoding `{v}`"))),
                })
            }
            _ => {
                // the value part of a quoted token keeps its quoted content verbatim
                clause.reference = Some(if value == "auto" && !t.quoted {
                    Reference::Auto
                } else {
                    Reference::Level(value.to_string())
                });
            }
        }
    }
    Ok(clause)
}

fn parse_interact(p: &mut LineParser) -> Result<Vec<String>> {
    let end = p.end_column;
    let first_col = p.tokens.get(p.pos).map(|t| t.column).unwrap_or(end);
    let joined: String = p.remaining().iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("");
    let names: Vec<String> = joined.split('*').map(str::to_string).collect();
    if names.iter().any(|n| !is_name(n)) {
        return p.err(first_col, format!("malformed interaction `{joined}`"));
    }
    if names.len() < 2 {
        return p.err(first_col, "interaction needs at least two factors joined by `*`");
    }
    Ok(names)
}

fn parse_hermite(p: &mut LineParser) -> Result<HermiteClause> {
    let name = p.expect_name("variable name")?;
    let mut degree = None;
    let mut offset = None;
    let line = p.line;
    let end = p.end_column;
    for t in p.remaining() {
        let err = |message: String| Error::Parse {
            line,
            column: t.column,
            message,
        };
        match split_option(t) {
            Some(("degree", v)) if degree.is_none() => match v.parse::<u32>() {
                Ok(d) if d >= 1 => degree = Some(d),
                _ => return Err(err(format!("degree must be a positive integer, found `{v}`"))),
            },
            Some(("offset", v)) if offset.is_none() => match parse_float(v) {
                Some(l) => offset = Some(l),
                None => return Err(err(format!("offset must be a finite number, found `{v}`"))),
            },
            Some((k @ ("degree" | "offset"), _)) => return Err(err(format!("option `{k}` given twice"))),
            Some((k, _)) => return Err(err(format!("unknown option `{k}`"))),
            None => return Err(err(format!("expected option, found `{}`", t.text))),
        }
    }
    let Some(degree) = degree else {
        return Err(Error::Parse {
            line,
            column: end,
            message: "hermite clause requires degree=".into(),
        });
    };
    Ok(HermiteClause { name, degree, offset })
}

/// Parses recipe text. Errors carry 1-based line and column.
pub fn parse_recipe(text: &str) -> Result<Recipe> {
    let mut clauses = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw, line)?;
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser {
            line,
            tokens,
            pos: 0,
            end_column: raw.chars().count() + 1,
        };
        let head = p.next().map(|t| (t.text.clone(), t.column)).unwrap();
        let clause = match head.0.as_str() {
            "control" => Clause::Control(parse_control(&mut p)?),
            "interact" => Clause::Interact(parse_interact(&mut p)?),
            "hermite" => Clause::Hermite(parse_hermite(&mut p)?),
            other => return p.err(head.1, format!("unknown clause `{other}`")),
        };
        clauses.push((line, clause));
    }
    let recipe = Recipe {
        clauses: clauses.iter().map(|(_, c)| c.clone()).collect(),
    };
    // attach a line number to semantic errors
    if let Err(Error::Input(msg)) = recipe.validate() {
        let line = clauses
            .iter()
            .find(|(_, c)| match c {
                Clause::Control(cc) => msg.contains(&format!("`{}`", cc.name)),
                Clause::Hermite(h) => msg.contains(&format!("`{}`", h.name)),
                Clause::Interact(names) => names.iter().any(|n| msg.contains(&format!("`{n}`"))),
            })
            .map(|(l, _)| *l)
            .unwrap_or(1);
        let line = if msg.starts_with("duplicate") {
            // report the second occurrence
            clauses
                .iter()
                .filter(|(_, c)| match c {
                    Clause::Control(cc) => msg.contains(&format!("`{}`", cc.name)),
                    Clause::Hermite(h) => msg.contains(&format!("`{}`", h.name)),
                    _ => false,
                })
                .nth(1)
                .map(|(l, _)| *l)
                .unwrap_or(line)
        } else {
            line
        };
        return Err(Error::Parse {
            line,
            column: 1,
            message: msg,
        });
    }
    Ok(recipe)
}
