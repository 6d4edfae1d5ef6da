//! Terms over the signature `{i/2, n/1, k/2, a/2, constants, functions}` and
//! their two concrete syntaxes.
//!
//! The functional syntax is the one used in problem files (`i(x,i(y,x))`,
//! optionally wrapped as `P(...)`). The Polish syntax is the prefix notation
//! used for the classical axiom list (`CpCqp`), where `C`, `N`, `K` and `A`
//! stand for `i`, `n`, `k` and `a`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use thiserror::Error;

/// An interned function or constant symbol. Identity is the pair
/// `(name, arity)`, so the constant `a` and the binary Polish connective `a`
/// are distinct symbols.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

struct Interner {
    entries: Vec<(&'static str, usize)>,
    lookup: HashMap<(&'static str, usize), u32>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        let entries: Vec<(&'static str, usize)> = vec![("i", 2), ("n", 1), ("k", 2), ("a", 2)];
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(id, &entry)| (entry, id as u32))
            .collect();
        RwLock::new(Interner { entries, lookup })
    })
}

fn valid_symbol_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Variables are identifiers starting with `u`..`z`.
pub(crate) fn is_variable_name(name: &str) -> bool {
    matches!(name.as_bytes().first(), Some(b'u'..=b'z'))
}

impl Symbol {
    /// Implication, `i/2` (Polish `C`).
    pub const IMP: Symbol = Symbol(0);
    /// Negation, `n/1` (Polish `N`).
    pub const NEG: Symbol = Symbol(1);
    /// The `k/2` connective (Polish `K`), evaluated as `max`.
    pub const CONJ: Symbol = Symbol(2);
    /// The `a/2` connective (Polish `A`), evaluated as `min`.
    pub const DISJ: Symbol = Symbol(3);

    pub fn new(name: &str, arity: usize) -> Result<Symbol, SymbolError> {
        if !valid_symbol_name(name) {
            return Err(SymbolError::InvalidName(name.to_string()));
        }
        let fixed = match name {
            "i" => Some(2),
            "n" => Some(1),
            _ => None,
        };
        if let Some(expected) = fixed {
            if expected != arity {
                return Err(SymbolError::ArityMismatch {
                    name: name.to_string(),
                    expected,
                    found: arity,
                });
            }
        }
        if let Some(&id) = interner()
            .read()
            .expect("symbol table poisoned")
            .lookup
            .get(&(name, arity))
        {
            return Ok(Symbol(id));
        }
        let mut table = interner().write().expect("symbol table poisoned");
        if let Some(&id) = table.lookup.get(&(name, arity)) {
            return Ok(Symbol(id));
        }
        let leaked: &'static str = Box::leak(name.to_string().into_boxed_str());
        let id = table.entries.len() as u32;
        table.entries.push((leaked, arity));
        table.lookup.insert((leaked, arity), id);
        Ok(Symbol(id))
    }

    pub fn name(self) -> &'static str {
        interner().read().expect("symbol table poisoned").entries[self.0 as usize].0
    }

    pub fn arity(self) -> usize {
        match self {
            Symbol::IMP | Symbol::CONJ | Symbol::DISJ => 2,
            Symbol::NEG => 1,
            _ => interner().read().expect("symbol table poisoned").entries[self.0 as usize].1,
        }
    }

    fn polish_letter(self) -> Option<char> {
        match self {
            Symbol::IMP => Some('C'),
            Symbol::NEG => Some('N'),
            Symbol::CONJ => Some('K'),
            Symbol::DISJ => Some('A'),
            _ => None,
        }
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name(), self.arity())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("invalid symbol name `{0}`")]
    InvalidName(String),
    #[error("symbol `{name}` has arity {expected}, used with {found} arguments")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

/// A first-order term. Terms are immutable; argument lists are shared.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u32),
    App(Symbol, Arc<[Term]>),
}

impl Term {
    pub fn var(index: u32) -> Term {
        Term::Var(index)
    }

    pub fn app(symbol: Symbol, args: Vec<Term>) -> Result<Term, SymbolError> {
        if symbol.arity() != args.len() {
            return Err(SymbolError::ArityMismatch {
                name: symbol.name().to_string(),
                expected: symbol.arity(),
                found: args.len(),
            });
        }
        Ok(Term::App(symbol, args.into()))
    }

    pub fn constant(name: &str) -> Result<Term, SymbolError> {
        Ok(Term::App(Symbol::new(name, 0)?, Arc::from([])))
    }

    pub fn imp(antecedent: Term, consequent: Term) -> Term {
        Term::App(Symbol::IMP, Arc::from([antecedent, consequent]))
    }

    pub fn neg(arg: Term) -> Term {
        Term::App(Symbol::NEG, Arc::from([arg]))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn root(&self) -> Option<Symbol> {
        match self {
            Term::Var(_) => None,
            Term::App(symbol, _) => Some(*symbol),
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Var(_) => &[],
            Term::App(_, args) => args,
        }
    }

    /// Splits `i(s,t)` into `(s, t)`.
    pub fn as_implication(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::App(Symbol::IMP, args) => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    /// Total number of nodes, variables and applications alike.
    pub fn symbol_count(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::symbol_count).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn max_var(&self) -> Option<u32> {
        match self {
            Term::Var(v) => Some(*v),
            Term::App(_, args) => args.iter().filter_map(Term::max_var).max(),
        }
    }

    /// Distinct variables in first-occurrence (pre-order) order.
    pub fn variables(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<u32>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn occurs(&self, var: u32) -> bool {
        match self {
            Term::Var(v) => *v == var,
            Term::App(_, args) => args.iter().any(|a| a.occurs(var)),
        }
    }

    pub fn contains_constant(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(symbol, args) => {
                symbol.arity() == 0 || args.iter().any(Term::contains_constant)
            }
        }
    }

    pub fn map_vars(&self, f: &mut impl FnMut(u32) -> Term) -> Term {
        match self {
            Term::Var(v) => f(*v),
            Term::App(symbol, args) if args.is_empty() => Term::App(*symbol, args.clone()),
            Term::App(symbol, args) => {
                Term::App(*symbol, args.iter().map(|a| a.map_vars(f)).collect())
            }
        }
    }

    pub fn shift_vars(&self, offset: u32) -> Term {
        if offset == 0 {
            return self.clone();
        }
        self.map_vars(&mut |v| Term::Var(v + offset))
    }

    /// Renumbers variables `0..k` by first occurrence in pre-order.
    pub fn normalize_variables(&self) -> Term {
        let mut seen: Vec<u32> = Vec::new();
        self.map_vars(&mut |v| {
            let index = match seen.iter().position(|&s| s == v) {
                Some(index) => index,
                None => {
                    seen.push(v);
                    seen.len() - 1
                }
            };
            Term::Var(index as u32)
        })
    }

    pub fn is_normalized(&self) -> bool {
        fn walk(t: &Term, next: &mut u32) -> bool {
            match t {
                Term::Var(v) if *v < *next => true,
                Term::Var(v) if *v == *next => {
                    *next += 1;
                    true
                }
                Term::Var(_) => false,
                Term::App(_, args) => args.iter().all(|a| walk(a, next)),
            }
        }
        walk(self, &mut 0)
    }

    pub fn to_notation(&self, notation: Notation) -> Result<String, PrintError> {
        print_term(self, notation)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(&variable_name(*v)),
            Term::App(symbol, args) => {
                f.write_str(symbol.name())?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (k, arg) in args.iter().enumerate() {
                        if k > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{arg}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "Var{v}"),
            Term::App(symbol, args) if args.is_empty() => write!(f, "{}", symbol.name()),
            Term::App(symbol, args) => {
                write!(f, "{}(", symbol.name())?;
                for (k, arg) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{arg:?}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// `x, y, z, u, v, w, x7, x8, ...`
pub fn variable_name(index: u32) -> String {
    const FIRST: [&str; 6] = ["x", "y", "z", "u", "v", "w"];
    match FIRST.get(index as usize) {
        Some(name) => name.to_string(),
        None => format!("x{}", index + 1),
    }
}

const POLISH_VARIABLES: &[u8; 26] = b"pqrstuvwxyzabcdefghijklmno";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Notation {
    Functional,
    Polish,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrintError {
    #[error("symbol `{0}` has no Polish rendering")]
    UnsupportedNotation(String),
    #[error("too many variables for Polish notation ({0}, at most 26)")]
    TooManyVariables(usize),
}

pub fn print_term(term: &Term, notation: Notation) -> Result<String, PrintError> {
    match notation {
        Notation::Functional => Ok(term.to_string()),
        Notation::Polish => {
            let mut out = String::new();
            let mut names: Vec<u32> = Vec::new();
            write_polish(term, &mut names, &mut out)?;
            Ok(out)
        }
    }
}

fn write_polish(term: &Term, names: &mut Vec<u32>, out: &mut String) -> Result<(), PrintError> {
    match term {
        Term::Var(v) => {
            let slot = match names.iter().position(|n| n == v) {
                Some(slot) => slot,
                None => {
                    names.push(*v);
                    names.len() - 1
                }
            };
            let letter = POLISH_VARIABLES
                .get(slot)
                .ok_or(PrintError::TooManyVariables(slot + 1))?;
            out.push(*letter as char);
        }
        Term::App(symbol, args) => {
            let letter = symbol
                .polish_letter()
                .ok_or_else(|| PrintError::UnsupportedNotation(symbol.name().to_string()))?;
            out.push(letter);
            for arg in args.iter() {
                write_polish(arg, names, out)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("symbol `{name}` expects {expected} arguments, found {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected a term")]
    ExpectedTerm,
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("variable `{0}` cannot take arguments")]
    VariableWithArguments(String),
    #[error("truncated input, missing operand")]
    Truncated,
    #[error("trailing input")]
    TrailingInput,
}

impl ParseError {
    fn new(offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }
}

/// Parses the functional syntax. A top-level `P(...)` wrapper is accepted and
/// stripped. Variables are numbered by first occurrence, so the result is
/// already normalized.
pub fn parse_functional(text: &str) -> Result<Term, ParseError> {
    parse_functional_with(text, &mut Vec::new())
}

/// Parses the literals of one clause with a shared variable namespace.
pub fn parse_functional_group(parts: &[&str]) -> Result<Vec<Term>, ParseError> {
    let mut variables = Vec::new();
    parts
        .iter()
        .map(|part| parse_functional_with(part, &mut variables))
        .collect()
}

fn parse_functional_with(text: &str, variables: &mut Vec<String>) -> Result<Term, ParseError> {
    let mut parser = FunctionalParser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        variables,
    };
    parser.skip_ws();
    if parser.pos == parser.bytes.len() {
        return Err(ParseError::new(parser.pos, ParseErrorKind::Empty));
    }
    let term = parser.parse_top()?;
    parser.skip_ws();
    if parser.pos < parser.bytes.len() {
        let kind = if parser.bytes[parser.pos] == b')' {
            ParseErrorKind::Unbalanced
        } else {
            ParseErrorKind::TrailingInput
        };
        return Err(ParseError::new(parser.pos, kind));
    }
    Ok(term)
}

struct FunctionalParser<'a, 'v> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    variables: &'v mut Vec<String>,
}

impl<'a> FunctionalParser<'a, '_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn identifier(&mut self) -> Result<(usize, &'a str), ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.peek() {
                None => ParseError::new(start, ParseErrorKind::Unbalanced),
                Some(b')') | Some(b',') => ParseError::new(start, ParseErrorKind::ExpectedTerm),
                Some(_) => {
                    let ch = self.text[start..].chars().next().unwrap_or('?');
                    ParseError::new(start, ParseErrorKind::UnexpectedChar(ch))
                }
            });
        }
        Ok((start, &self.text[start..self.pos]))
    }

    fn parse_top(&mut self) -> Result<Term, ParseError> {
        let save = self.pos;
        let (_, name) = self.identifier()?;
        if name == "P" {
            self.skip_ws();
            if self.peek() == Some(b'(') {
                self.pos += 1;
                let inner = self.parse_term()?;
                self.skip_ws();
                return match self.peek() {
                    Some(b')') => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some(b',') => Err(ParseError::new(
                        self.pos,
                        ParseErrorKind::ArityMismatch {
                            name: "P".into(),
                            expected: 1,
                            found: 2,
                        },
                    )),
                    None => Err(ParseError::new(self.pos, ParseErrorKind::Unbalanced)),
                    Some(_) => Err(self.unexpected()),
                };
            }
        }
        self.pos = save;
        self.parse_term()
    }

    fn unexpected(&self) -> ParseError {
        let ch = self.text[self.pos..].chars().next().unwrap_or('?');
        ParseError::new(self.pos, ParseErrorKind::UnexpectedChar(ch))
    }

    fn parse_term(&mut self) -> Result<Term, ParseError> {
        let (start, name) = self.identifier()?;
        self.skip_ws();
        let has_args = self.peek() == Some(b'(');
        if is_variable_name(name) {
            if has_args {
                return Err(ParseError::new(
                    start,
                    ParseErrorKind::VariableWithArguments(name.to_string()),
                ));
            }
            let index = match self.variables.iter().position(|v| *v == name) {
                Some(index) => index,
                None => {
                    self.variables.push(name.to_string());
                    self.variables.len() - 1
                }
            };
            return Ok(Term::Var(index as u32));
        }
        if !valid_symbol_name(name) {
            return Err(ParseError::new(
                start,
                ParseErrorKind::InvalidIdentifier(name.to_string()),
            ));
        }
        let mut args = Vec::new();
        if has_args {
            self.pos += 1;
            loop {
                args.push(self.parse_term()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    None => return Err(ParseError::new(self.pos, ParseErrorKind::Unbalanced)),
                    Some(_) => return Err(self.unexpected()),
                }
            }
        }
        let symbol = Symbol::new(name, args.len()).map_err(|err| match err {
            SymbolError::ArityMismatch {
                name,
                expected,
                found,
            } => ParseError::new(
                start,
                ParseErrorKind::ArityMismatch {
                    name,
                    expected,
                    found,
                },
            ),
            SymbolError::InvalidName(name) => {
                ParseError::new(start, ParseErrorKind::InvalidIdentifier(name))
            }
        })?;
        Ok(Term::App(symbol, args.into()))
    }
}

/// Parses Polish (prefix) notation over `C`, `N`, `K`, `A` and lowercase
/// single-letter variables. Whitespace is ignored.
pub fn parse_polish(text: &str) -> Result<Term, ParseError> {
    let tokens: Vec<(usize, char)> = text
        .char_indices()
        .filter(|(_, c)| !c.is_whitespace())
        .collect();
    if tokens.is_empty() {
        return Err(ParseError::new(0, ParseErrorKind::Empty));
    }
    let mut pos = 0;
    let mut variables: Vec<char> = Vec::new();
    let term = polish_term(&tokens, &mut pos, &mut variables, text.len())?;
    if pos < tokens.len() {
        return Err(ParseError::new(tokens[pos].0, ParseErrorKind::TrailingInput));
    }
    Ok(term)
}

fn polish_term(
    tokens: &[(usize, char)],
    pos: &mut usize,
    variables: &mut Vec<char>,
    end: usize,
) -> Result<Term, ParseError> {
    let Some(&(offset, c)) = tokens.get(*pos) else {
        return Err(ParseError::new(end, ParseErrorKind::Truncated));
    };
    *pos += 1;
    let symbol = match c {
        'C' => Symbol::IMP,
        'N' => Symbol::NEG,
        'K' => Symbol::CONJ,
        'A' => Symbol::DISJ,
        c if c.is_ascii_lowercase() => {
            let index = match variables.iter().position(|v| *v == c) {
                Some(index) => index,
                None => {
                    variables.push(c);
                    variables.len() - 1
                }
            };
            return Ok(Term::Var(index as u32));
        }
        other => return Err(ParseError::new(offset, ParseErrorKind::UnexpectedChar(other))),
    };
    let args = (0..symbol.arity())
        .map(|_| polish_term(tokens, pos, variables, end))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Term::App(symbol, args.into()))
}
