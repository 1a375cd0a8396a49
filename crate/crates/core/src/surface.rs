//! Surface syntax: lexer, parsers, and the canonical printer.
//!
//! Grammar sketch (precedence from loosest to tightest):
//!
//! ```text
//! formula  ::= 'forall' binders '.' formula | 'exists' binders '.' formula
//!            | disj ('->' '[' term ']' formula)?          (right associative)
//! disj     ::= conj ('|' conj)*                           (left associative)
//! conj     ::= unary ('&' unary)*                         (left associative)
//! unary    ::= '!' unary | '(' formula ')' | 'true' | 'false'
//!            | term ('says' '[' term ']' unary)?          (atom or says)
//! term     ::= ident ('(' term (',' term)* ')')?
//! gp       ::= '<' term? '>' ('.' '[' term ':' term ']')*
//! belief   ::= formula '@' gp
//! sequent  ::= (belief (',' belief)*)? '|-' belief
//! proof    ::= '(' ident ('[' param (',' param)* ']')? proof* ')'
//! ```
//!
//! `!a` is sugar for `a ->[l] false` with the theory's default ground label
//! `l`; the printer never emits `!`. An empty ground principal `<>` denotes
//! the default ground label. Identifiers are `[A-Za-z_][A-Za-z0-9_']*` and
//! `//` starts a line comment.
//!
//! Theory files are statement lists: `sort S`, `func f(S1, S2) : S`,
//! `func c : S`, `rel R(S1)`, `rel R`, `default_ground_label term`, and
//! `axiom name : belief`. Axiom names are unique and axioms in declaration
//! order form the theory context.
//! Proof files carry a `sequent` statement and a `proof` s-expression.
//!
//! All printers are canonical: parsing a printed artifact and printing it
//! again reproduces the same bytes.

use std::fmt;

use crate::formula::{fresh_name, Formula};
use crate::kernel::{Proof, RawParam, RawProof, RuleSpec};
use crate::sequent::{check_sequent_wf, Belief, Context, GenPrincipal, Sequent};
use crate::signature::{FuncDecl, RelDecl, Signature, Sort};
use crate::term::Term;

/// A parsed theory: a signature plus an ordered, named axiom context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theory {
    pub signature: Signature,
    pub axioms: Context,
    /// One name per axiom, parallel to `axioms`; unique within the theory.
    pub axiom_names: Vec<String>,
}

impl Theory {
    /// The sequent `axioms |- goal`.
    pub fn sequent(&self, goal: Belief) -> Sequent {
        Sequent::new(self.axioms.clone(), goal)
    }

    /// Index of a named axiom, if present.
    pub fn axiom_index(&self, name: &str) -> Option<usize> {
        self.axiom_names.iter().position(|n| n == name)
    }
}

/// A syntax error with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Dot,
    Comma,
    Colon,
    Pipe,
    Amp,
    Bang,
    At,
    Arrow,
    Turnstile,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Pipe => write!(f, "`|`"),
            Tok::Amp => write!(f, "`&`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::At => write!(f, "`@`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Turnstile => write!(f, "`|-`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '/' {
            bump(&mut chars);
            if chars.peek() == Some(&'/') {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
                continue;
            }
            return Err(ParseError {
                line: tl,
                col: tc,
                msg: "unexpected character `/` (comments start with `//`)".into(),
            });
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_alphanumeric() || n == '_' || n == '\'' {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            let n: usize = s.parse().map_err(|_| ParseError {
                line: tl,
                col: tc,
                msg: format!("number `{s}` is too large"),
            })?;
            toks.push(Token {
                tok: Tok::Num(n),
                line: tl,
                col: tc,
            });
            continue;
        }
        let tok = match c {
            '(' => {
                bump(&mut chars);
                Tok::LParen
            }
            ')' => {
                bump(&mut chars);
                Tok::RParen
            }
            '[' => {
                bump(&mut chars);
                Tok::LBracket
            }
            ']' => {
                bump(&mut chars);
                Tok::RBracket
            }
            '<' => {
                bump(&mut chars);
                Tok::Lt
            }
            '>' => {
                bump(&mut chars);
                Tok::Gt
            }
            '.' => {
                bump(&mut chars);
                Tok::Dot
            }
            ',' => {
                bump(&mut chars);
                Tok::Comma
            }
            ':' => {
                bump(&mut chars);
                Tok::Colon
            }
            '&' => {
                bump(&mut chars);
                Tok::Amp
            }
            '!' => {
                bump(&mut chars);
                Tok::Bang
            }
            '@' => {
                bump(&mut chars);
                Tok::At
            }
            '|' => {
                bump(&mut chars);
                if chars.peek() == Some(&'-') {
                    bump(&mut chars);
                    Tok::Turnstile
                } else {
                    Tok::Pipe
                }
            }
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    Tok::Arrow
                } else {
                    return Err(ParseError {
                        line: tl,
                        col: tc,
                        msg: "unexpected character `-` (did you mean `->`?)".into(),
                    });
                }
            }
            other => {
                return Err(ParseError {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        toks.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

const MAX_DEPTH: usize = 512;

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    sig: Option<&'a Signature>,
    /// Binder scope: name and sort of quantified variables, innermost last.
    scope: Vec<(String, Sort)>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &str, sig: Option<&'a Signature>) -> Result<Parser<'a>, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            sig,
            scope: Vec::new(),
            depth: 0,
        })
    }

    fn sig(&self) -> &Signature {
        self.sig.expect("parser entry point requires a signature")
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {want}, found {}", self.peek()))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected `{kw}`, found {other}")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.err(format!("expected {what}, found {other}")),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.err("nesting too deep")
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    // -- terms --------------------------------------------------------------

    /// Parse a term. Identifiers resolve to binder variables, to declared
    /// constants, or to free variables with an unknown sort (refined later
    /// from the position they appear in).
    fn term(&mut self) -> Result<Term, ParseError> {
        self.enter()?;
        let name = self.ident("a term")?;
        let t = if self.peek() == &Tok::LParen {
            self.next();
            let mut args = vec![self.term()?];
            while self.peek() == &Tok::Comma {
                self.next();
                args.push(self.term()?);
            }
            self.eat(&Tok::RParen)?;
            // The head may name a function or (when this "term" is really a
            // relational atom, resolved by the caller) a relation.
            let want = self
                .sig()
                .func(&name)
                .map(|d| d.args.len())
                .or_else(|| self.sig().rel(&name).map(|d| d.args.len()));
            match want {
                Some(want) if want != args.len() => {
                    self.leave();
                    return self.err(format!(
                        "{name} expects {want} argument(s), found {}",
                        args.len()
                    ));
                }
                Some(_) => {}
                None => {
                    self.leave();
                    return self.err(format!("unknown function or relation {name}"));
                }
            }
            Term::App(name, args)
        } else if let Some(sort) = self
            .scope
            .iter()
            .rev()
            .find(|(n, _)| n == &name)
            .map(|(_, s)| s.clone())
        {
            Term::Var(name.clone(), sort)
        } else if let Some(want) = self.sig().func(&name).map(|d| d.args.len()) {
            if want != 0 {
                self.leave();
                return self.err(format!("function {name} expects {want} argument(s)"));
            }
            Term::constant(&name)
        } else {
            Term::Var(name, Sort::unknown())
        };
        self.leave();
        Ok(coerce(self.sig(), &t, None))
    }

    // -- formulas -----------------------------------------------------------

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.enter()?;
        let f = match self.peek().clone() {
            Tok::Ident(kw) if kw == "forall" || kw == "exists" => {
                self.next();
                let mut binders = Vec::new();
                loop {
                    let name = self.ident("a binder name")?;
                    if self.sig().func(&name).is_some() {
                        self.leave();
                        return self
                            .err(format!("binder {name} shadows a declared function symbol"));
                    }
                    self.eat(&Tok::Colon)?;
                    let sname = self.ident("a sort name")?;
                    let sort = Sort(sname.clone());
                    if !self.sig().has_sort(&sort) {
                        self.leave();
                        return self.err(format!("unknown sort {sname}"));
                    }
                    binders.push((name, sort));
                    if self.peek() == &Tok::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
                self.eat(&Tok::Dot)?;
                for b in &binders {
                    self.scope.push(b.clone());
                }
                let body = self.formula()?;
                self.scope.truncate(self.scope.len() - binders.len());
                let mut f = body;
                for (name, sort) in binders.into_iter().rev() {
                    f = if kw == "forall" {
                        Formula::forall(&name, sort, f)
                    } else {
                        Formula::exists(&name, sort, f)
                    };
                }
                f
            }
            _ => {
                let lhs = self.disj()?;
                if self.peek() == &Tok::Arrow {
                    self.next();
                    self.eat(&Tok::LBracket)?;
                    let l = self.label_term()?;
                    self.eat(&Tok::RBracket)?;
                    let rhs = self.formula()?;
                    Formula::implies(lhs, l, rhs)
                } else {
                    lhs
                }
            }
        };
        self.leave();
        Ok(f)
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.conj()?;
        while self.peek() == &Tok::Pipe {
            self.next();
            let r = self.conj()?;
            f = Formula::or(f, r);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.unary()?;
        while self.peek() == &Tok::Amp {
            self.next();
            let r = self.unary()?;
            f = Formula::and(f, r);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        self.enter()?;
        let f = match self.peek().clone() {
            Tok::Bang => {
                self.next();
                let inner = self.unary()?;
                let Some(l) = self.sig().ground_label().cloned() else {
                    self.leave();
                    return self.err(
                        "negation requires a default_ground_label declaration in the theory",
                    );
                };
                Formula::not(inner, l)
            }
            Tok::LParen => {
                self.next();
                let inner = self.formula()?;
                self.eat(&Tok::RParen)?;
                inner
            }
            Tok::Ident(kw) if kw == "true" => {
                self.next();
                Formula::True
            }
            Tok::Ident(kw) if kw == "false" => {
                self.next();
                Formula::False
            }
            Tok::Ident(_) => {
                let t = self.term()?;
                if matches!(self.peek(), Tok::Ident(k) if k == "says") {
                    self.next();
                    self.eat(&Tok::LBracket)?;
                    let l = self.label_term()?;
                    self.eat(&Tok::RBracket)?;
                    let body = self.unary()?;
                    let p = coerce(self.sig(), &t, Some(&Sort::principal()));
                    Formula::says(p, l, body)
                } else {
                    self.atom_from_term(t)?
                }
            }
            other => {
                self.leave();
                return self.err(format!("expected a formula, found {other}"));
            }
        };
        self.leave();
        Ok(f)
    }

    /// Reinterpret a parsed term as a relational atom.
    fn atom_from_term(&mut self, t: Term) -> Result<Formula, ParseError> {
        let (name, args) = match t {
            Term::App(n, a) => (n, a),
            Term::Var(n, _) => (n, vec![]),
            Term::Bound(_) => return self.err("expected a relational atom"),
        };
        let Some(decl) = self.sig().rel(&name).cloned() else {
            return self.err(format!("unknown relation {name}"));
        };
        if decl.args.len() != args.len() {
            return self.err(format!(
                "relation {name} expects {} argument(s), found {}",
                decl.args.len(),
                args.len()
            ));
        }
        let coerced = args
            .iter()
            .zip(decl.args.iter())
            .map(|(a, s)| coerce(self.sig(), a, Some(s)))
            .collect();
        Ok(Formula::Rel(name, coerced))
    }

    fn label_term(&mut self) -> Result<Term, ParseError> {
        let t = self.term()?;
        Ok(coerce(self.sig(), &t, Some(&Sort::label())))
    }

    // -- beliefs, principals, sequents ---------------------------------------

    fn gen_principal(&mut self) -> Result<GenPrincipal, ParseError> {
        self.eat(&Tok::Lt)?;
        let ground = if self.peek() == &Tok::Gt {
            match self.sig().ground_label().cloned() {
                Some(l) => l,
                None => {
                    return self.err(
                        "`<>` requires a default_ground_label declaration in the theory",
                    )
                }
            }
        } else {
            self.label_term()?
        };
        self.eat(&Tok::Gt)?;
        let mut gp = GenPrincipal::ground_only(ground);
        while self.peek() == &Tok::Dot {
            self.next();
            self.eat(&Tok::LBracket)?;
            let p = self.term()?;
            let p = coerce(self.sig(), &p, Some(&Sort::principal()));
            self.eat(&Tok::Colon)?;
            let l = self.label_term()?;
            self.eat(&Tok::RBracket)?;
            gp = gp.push(p, l);
        }
        Ok(gp)
    }

    fn belief(&mut self) -> Result<Belief, ParseError> {
        let f = self.formula()?;
        self.eat(&Tok::At)?;
        let gp = self.gen_principal()?;
        Ok(Belief::new(f, gp))
    }

    fn sequent(&mut self) -> Result<Sequent, ParseError> {
        let mut ctx = Vec::new();
        if self.peek() != &Tok::Turnstile {
            ctx.push(self.belief()?);
            while self.peek() == &Tok::Comma {
                self.next();
                ctx.push(self.belief()?);
            }
        }
        self.eat(&Tok::Turnstile)?;
        let goal = self.belief()?;
        Ok(Sequent::new(ctx, goal))
    }

    // -- proofs ---------------------------------------------------------------

    fn raw_proof(&mut self) -> Result<RawProof, ParseError> {
        self.enter()?;
        self.eat(&Tok::LParen)?;
        let name = self.ident("a rule name")?;
        let mut params = Vec::new();
        if self.peek() == &Tok::LBracket {
            self.next();
            if self.peek() != &Tok::RBracket {
                params.push(self.raw_param()?);
                while self.peek() == &Tok::Comma {
                    self.next();
                    params.push(self.raw_param()?);
                }
            }
            self.eat(&Tok::RBracket)?;
        }
        let mut children = Vec::new();
        while self.peek() == &Tok::LParen {
            children.push(self.raw_proof()?);
        }
        self.eat(&Tok::RParen)?;
        self.leave();
        Ok(RawProof {
            name,
            params,
            children,
        })
    }

    fn raw_param(&mut self) -> Result<RawParam, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.next();
                Ok(RawParam::Index(n))
            }
            Tok::Ident(_) => {
                let t = self.raw_term()?;
                match t {
                    Term::Var(n, s) if s.is_unknown() => Ok(RawParam::Symbol(n)),
                    other => Ok(RawParam::Term(other)),
                }
            }
            other => self.err(format!(
                "expected a rule parameter (index, name, or term), found {other}"
            )),
        }
    }

    /// A term in a proof parameter: no signature lookups, placeholder sorts.
    fn raw_term(&mut self) -> Result<Term, ParseError> {
        self.enter()?;
        let name = self.ident("a term")?;
        let t = if self.peek() == &Tok::LParen {
            self.next();
            let mut args = vec![self.raw_term()?];
            while self.peek() == &Tok::Comma {
                self.next();
                args.push(self.raw_term()?);
            }
            self.eat(&Tok::RParen)?;
            Term::App(name, args)
        } else {
            Term::Var(name, Sort::unknown())
        };
        self.leave();
        Ok(t)
    }

    // -- theories ---------------------------------------------------------------

    fn sort_name(&mut self) -> Result<Sort, ParseError> {
        let name = self.ident("a sort name")?;
        let sort = Sort(name.clone());
        if !self.sig().has_sort(&sort) {
            return self.err(format!("unknown sort {name}"));
        }
        Ok(sort)
    }
}

/// Refine placeholder sorts: resolve nullary functions to constants, push
/// declared argument sorts into applications, and give a still-unknown
/// top-level variable the expected sort.
fn coerce(sig: &Signature, t: &Term, expected: Option<&Sort>) -> Term {
    match t {
        Term::Var(n, s) if s.is_unknown() => {
            if let Some(f) = sig.func(n) {
                if f.args.is_empty() {
                    return Term::constant(n);
                }
            }
            match expected {
                Some(e) => Term::Var(n.clone(), e.clone()),
                None => t.clone(),
            }
        }
        Term::Var(_, _) | Term::Bound(_) => t.clone(),
        Term::App(f, args) => {
            let decl = sig.func(f).cloned();
            let resolved = args
                .iter()
                .enumerate()
                .map(|(k, a)| coerce(sig, a, decl.as_ref().and_then(|d| d.args.get(k))))
                .collect();
            Term::App(f.clone(), resolved)
        }
    }
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

fn finish<T>(p: &mut Parser, value: T) -> Result<T, ParseError> {
    if p.at_eof() {
        Ok(value)
    } else {
        p.err(format!("unexpected trailing input: {}", p.peek()))
    }
}

/// Parse a term against a signature.
pub fn parse_term(sig: &Signature, src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src, Some(sig))?;
    let t = p.term()?;
    finish(&mut p, t)
}

/// Parse a formula against a signature.
pub fn parse_formula(sig: &Signature, src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src, Some(sig))?;
    let f = p.formula()?;
    finish(&mut p, f)
}

/// Parse a belief (`formula @ gp`) against a signature.
pub fn parse_belief(sig: &Signature, src: &str) -> Result<Belief, ParseError> {
    let mut p = Parser::new(src, Some(sig))?;
    let b = p.belief()?;
    finish(&mut p, b)
}

/// Parse a sequent against a signature.
pub fn parse_sequent(sig: &Signature, src: &str) -> Result<Sequent, ParseError> {
    let mut p = Parser::new(src, Some(sig))?;
    let s = p.sequent()?;
    finish(&mut p, s)
}

/// Parse a bare proof s-expression (no signature required; term parameters
/// carry placeholder sorts until elaboration).
pub fn parse_raw_proof(src: &str) -> Result<RawProof, ParseError> {
    let mut p = Parser::new(src, None)?;
    let r = p.raw_proof()?;
    finish(&mut p, r)
}

/// Parse a theory file: declarations followed by axioms.
pub fn parse_theory(src: &str) -> Result<Theory, ParseError> {
    let toks = lex(src)?;
    let mut sig = Signature::new();
    let mut axioms: Context = Vec::new();
    let mut axiom_names: Vec<String> = Vec::new();
    let mut pos = 0usize;
    loop {
        let tok = toks[pos].clone();
        let perr = |msg: String| ParseError {
            line: tok.line,
            col: tok.col,
            msg,
        };
        match &tok.tok {
            Tok::Eof => break,
            Tok::Ident(kw) => {
                // Re-lex the remainder through a Parser so nested productions
                // share the signature built so far.
                let mut p = Parser {
                    toks: toks.clone(),
                    pos: pos + 1,
                    sig: Some(&sig),
                    scope: Vec::new(),
                    depth: 0,
                };
                match kw.as_str() {
                    "sort" => {
                        let name = p.ident("a sort name")?;
                        pos = p.pos;
                        sig.add_sort(&name).map_err(|e| perr(e.to_string()))?;
                    }
                    "func" => {
                        let name = p.ident("a function name")?;
                        let mut args = Vec::new();
                        if p.peek() == &Tok::LParen {
                            p.next();
                            args.push(p.sort_name()?);
                            while p.peek() == &Tok::Comma {
                                p.next();
                                args.push(p.sort_name()?);
                            }
                            p.eat(&Tok::RParen)?;
                        }
                        p.eat(&Tok::Colon)?;
                        let result = p.sort_name()?;
                        pos = p.pos;
                        sig.add_func(FuncDecl { name, args, result })
                            .map_err(|e| perr(e.to_string()))?;
                    }
                    "rel" => {
                        let name = p.ident("a relation name")?;
                        let mut args = Vec::new();
                        if p.peek() == &Tok::LParen {
                            p.next();
                            args.push(p.sort_name()?);
                            while p.peek() == &Tok::Comma {
                                p.next();
                                args.push(p.sort_name()?);
                            }
                            p.eat(&Tok::RParen)?;
                        }
                        pos = p.pos;
                        sig.add_rel(RelDecl { name, args }).map_err(|e| perr(e.to_string()))?;
                    }
                    "default_ground_label" => {
                        let t = p.term()?;
                        let t = coerce(&sig, &t, Some(&Sort::label()));
                        pos = p.pos;
                        let mut env = std::collections::BTreeMap::new();
                        let found = crate::term::sort_check(&sig, &mut env, &t)
                            .map_err(|e| perr(e.to_string()))?;
                        if found != Sort::label() {
                            return Err(perr(format!(
                                "default_ground_label must be a Label term, {t} has sort {found}"
                            )));
                        }
                        sig.default_ground_label = Some(t);
                    }
                    "axiom" => {
                        let name = p.ident("an axiom name")?;
                        p.eat(&Tok::Colon)?;
                        let b = p.belief()?;
                        pos = p.pos;
                        if axiom_names.contains(&name) {
                            return Err(perr(format!("duplicate axiom name `{name}`")));
                        }
                        let Sequent { context: _, goal } = Sequent::new(vec![], b);
                        let probe = Sequent::new(vec![goal.clone()], goal.clone());
                        check_sequent_wf(&sig, &probe).map_err(|e| perr(e.to_string()))?;
                        axioms.push(goal);
                        axiom_names.push(name);
                    }
                    other => {
                        return Err(perr(format!(
                            "expected a declaration (sort, func, rel, default_ground_label, \
                             axiom), found `{other}`"
                        )))
                    }
                }
            }
            other => {
                return Err(perr(format!(
                    "expected a declaration keyword, found {other}"
                )))
            }
        }
    }
    Ok(Theory {
        signature: sig,
        axioms,
        axiom_names,
    })
}

/// Parse a proof file (`sequent ... proof (...)`) against a theory signature.
pub fn parse_proof_file(
    sig: &Signature,
    src: &str,
) -> Result<(Sequent, RawProof), ParseError> {
    let mut p = Parser::new(src, Some(sig))?;
    p.eat_keyword("sequent")?;
    let seq = p.sequent()?;
    p.eat_keyword("proof")?;
    let raw = p.raw_proof()?;
    finish(&mut p, (seq, raw))
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

/// Precedence levels: 0 formula (implication, quantifiers), 1 disjunction,
/// 2 conjunction, 3 unary (atoms, says).
fn fmt_formula_prec(phi: &Formula, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = |need: bool, f: &mut fmt::Formatter<'_>, inner: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
        if need {
            write!(f, "(")?;
            inner(f)?;
            write!(f, ")")
        } else {
            inner(f)
        }
    };
    match phi {
        Formula::True => write!(f, "true"),
        Formula::False => write!(f, "false"),
        Formula::Rel(r, args) => {
            write!(f, "{r}")?;
            if !args.is_empty() {
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::And(a, b) => paren(prec > 2, f, &|f| {
            fmt_formula_prec(a, 2, f)?;
            write!(f, " & ")?;
            fmt_formula_prec(b, 3, f)
        }),
        Formula::Or(a, b) => paren(prec > 1, f, &|f| {
            fmt_formula_prec(a, 1, f)?;
            write!(f, " | ")?;
            fmt_formula_prec(b, 2, f)
        }),
        Formula::Implies(a, l, b) => paren(prec > 0, f, &|f| {
            fmt_formula_prec(a, 1, f)?;
            write!(f, " ->[{l}] ")?;
            fmt_formula_prec(b, 0, f)
        }),
        Formula::Says(p, l, body) => paren(prec > 3, f, &|f| {
            write!(f, "{p} says[{l}] ")?;
            fmt_formula_prec(body, 4, f)
        }),
        Formula::Forall(bi, body) | Formula::Exists(bi, body) => paren(prec > 0, f, &|f| {
            let kw = if matches!(phi, Formula::Forall(_, _)) {
                "forall"
            } else {
                "exists"
            };
            let mut avoid = std::collections::BTreeSet::new();
            let mut fv = std::collections::BTreeSet::new();
            body.free_vars(&mut fv);
            for (n, _) in fv {
                avoid.insert(n);
            }
            let hint = if bi.hint.is_empty() { "x" } else { &bi.hint };
            let name = fresh_name(hint, &avoid);
            let opened = body.open(&Term::Var(name.clone(), bi.sort.clone()));
            write!(f, "{kw} {name} : {} . ", bi.sort)?;
            fmt_formula_prec(&opened, 0, f)
        }),
    }
}

/// Canonical formula printer; `Display for Formula` delegates here.
pub fn fmt_formula(phi: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    fmt_formula_prec(phi, 0, f)
}

/// Convert a checked proof back to its surface skeleton.
pub fn proof_to_raw(p: &Proof) -> RawProof {
    let params = match &p.spec {
        RuleSpec::Ax { i }
        | RuleSpec::Weakening { i }
        | RuleSpec::Contraction { i }
        | RuleSpec::Exchange { i }
        | RuleSpec::FalseL { i }
        | RuleSpec::AndL { i }
        | RuleSpec::OrL { i }
        | RuleSpec::ImpL { i }
        | RuleSpec::SaysL { i } => vec![RawParam::Index(*i)],
        RuleSpec::TrueR
        | RuleSpec::AndR
        | RuleSpec::OrR1
        | RuleSpec::OrR2
        | RuleSpec::ImpR
        | RuleSpec::SaysR
        | RuleSpec::FlowsToRefl => vec![],
        RuleSpec::ForallL { i, t } => vec![RawParam::Index(*i), term_param(t)],
        RuleSpec::ForallR { eigen } => vec![RawParam::Symbol(eigen.clone())],
        RuleSpec::ExistsL { i, eigen } => {
            vec![RawParam::Index(*i), RawParam::Symbol(eigen.clone())]
        }
        RuleSpec::ExistsR { t } => vec![term_param(t)],
        RuleSpec::SelfLIntro { i, pos } | RuleSpec::SelfLElim { i, pos } => {
            vec![RawParam::Index(*i), RawParam::Index(*pos)]
        }
        RuleSpec::SelfRIntro { pos } | RuleSpec::SelfRElim { pos } => {
            vec![RawParam::Index(*pos)]
        }
        RuleSpec::VarL { i, pos, l2 } => {
            vec![RawParam::Index(*i), RawParam::Index(*pos), term_param(l2)]
        }
        RuleSpec::VarR { pos, l2 } => vec![RawParam::Index(*pos), term_param(l2)],
        RuleSpec::FwdL { i, pos, q } => {
            vec![RawParam::Index(*i), RawParam::Index(*pos), term_param(q)]
        }
        RuleSpec::FwdR { pos, p: pr } => vec![RawParam::Index(*pos), term_param(pr)],
        RuleSpec::FlowsToTrans { mid } => vec![term_param(mid)],
        RuleSpec::CRVar { via } => vec![term_param(via)],
        RuleSpec::CWVar { via } => vec![term_param(via)],
        RuleSpec::Unknown { .. } | RuleSpec::Malformed { .. } => vec![],
    };
    RawProof {
        name: p.spec.name(),
        params,
        children: p.children.iter().map(proof_to_raw).collect(),
    }
}

fn term_param(t: &Term) -> RawParam {
    match t {
        Term::Var(n, _) => RawParam::Symbol(n.clone()),
        Term::App(n, args) if args.is_empty() => RawParam::Symbol(n.clone()),
        other => RawParam::Term(other.clone()),
    }
}

fn fmt_raw_proof(raw: &RawProof, indent: usize, out: &mut String) {
    out.push('(');
    out.push_str(&raw.name);
    if !raw.params.is_empty() {
        out.push_str(" [");
        for (i, p) in raw.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&p.to_string());
        }
        out.push(']');
    }
    for c in &raw.children {
        out.push('\n');
        for _ in 0..indent + 2 {
            out.push(' ');
        }
        fmt_raw_proof(c, indent + 2, out);
    }
    out.push(')');
}

/// Canonical rendering of a proof skeleton.
pub fn format_raw_proof(raw: &RawProof) -> String {
    let mut out = String::new();
    fmt_raw_proof(raw, 0, &mut out);
    out
}

/// Canonical rendering of a proof file.
pub fn format_proof_file(seq: &Sequent, raw: &RawProof) -> String {
    let mut out = String::new();
    out.push_str("sequent\n");
    if seq.context.is_empty() {
        out.push_str(&format!("  |- {}\n", seq.goal));
    } else {
        for (i, b) in seq.context.iter().enumerate() {
            let sep = if i + 1 == seq.context.len() { "" } else { "," };
            out.push_str(&format!("  {b}{sep}\n"));
        }
        out.push_str(&format!("  |- {}\n", seq.goal));
    }
    out.push_str("\nproof\n");
    out.push_str(&format_raw_proof(raw));
    out.push('\n');
    out
}

/// Canonical rendering of a theory file.
pub fn format_theory(th: &Theory) -> String {
    let mut out = String::new();
    for s in th.signature.sorts() {
        if *s == Sort::principal() || *s == Sort::label() {
            continue;
        }
        out.push_str(&format!("sort {s}\n"));
    }
    for f in th.signature.funcs() {
        if f.args.is_empty() {
            out.push_str(&format!("func {} : {}\n", f.name, f.result));
        } else {
            let args: Vec<String> = f.args.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!(
                "func {}({}) : {}\n",
                f.name,
                args.join(", "),
                f.result
            ));
        }
    }
    for r in th.signature.rels() {
        if r.name == crate::signature::FLOWS
            || r.name == crate::signature::CANREAD
            || r.name == crate::signature::CANWRITE
        {
            continue;
        }
        if r.args.is_empty() {
            out.push_str(&format!("rel {}\n", r.name));
        } else {
            let args: Vec<String> = r.args.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("rel {}({})\n", r.name, args.join(", ")));
        }
    }
    if let Some(l) = &th.signature.default_ground_label {
        out.push_str(&format!("default_ground_label {l}\n"));
    }
    for (name, a) in th.axiom_names.iter().zip(th.axioms.iter()) {
        out.push_str(&format!("axiom {name} : {a}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theory() -> Theory {
        parse_theory(
            "sort Value\n\
             func Pub : Label\n\
             func Sec : Label\n\
             func P : Principal\n\
             func Q : Principal\n\
             func f(Principal) : Label\n\
             rel A\n\
             rel B(Value)\n\
             default_ground_label Pub\n\
             axiom base : A @ <Pub>.[P:Sec]\n",
        )
        .unwrap()
    }

    #[test]
    fn parse_and_print_formula_round_trip() {
        let th = theory();
        let sig = &th.signature;
        for src in [
            "A",
            "A & A | A",
            "A ->[Sec] A | A",
            "P says[f(P)] (A & A)",
            "forall x : Principal . canread(x, Pub) ->[Pub] false",
            "exists v : Value . B(v)",
            "flows(Pub, Sec) & A",
            "(A ->[Pub] A) ->[Pub] A",
        ] {
            let f1 = parse_formula(sig, src).unwrap();
            let printed = f1.to_string();
            let f2 = parse_formula(sig, &printed).unwrap();
            assert_eq!(f1, f2, "round trip failed for {src}: printed as {printed}");
            assert_eq!(printed, f2.to_string());
        }
    }

    #[test]
    fn negation_desugars_and_prints_expanded() {
        let th = theory();
        let f = parse_formula(&th.signature, "!A").unwrap();
        assert_eq!(f.to_string(), "A ->[Pub] false");
        let again = parse_formula(&th.signature, &f.to_string()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn precedence_matches_expectations() {
        let th = theory();
        let sig = &th.signature;
        let f = parse_formula(sig, "A & A | A ->[Pub] A").unwrap();
        // ((A & A) | A) ->[Pub] A
        assert_eq!(
            f,
            Formula::implies(
                Formula::or(
                    Formula::and(Formula::rel("A", vec![]), Formula::rel("A", vec![])),
                    Formula::rel("A", vec![])
                ),
                Term::constant("Pub"),
                Formula::rel("A", vec![])
            )
        );
        let says = parse_formula(sig, "P says[Pub] A & A").unwrap();
        assert_eq!(
            says,
            Formula::and(
                Formula::says(
                    Term::constant("P"),
                    Term::constant("Pub"),
                    Formula::rel("A", vec![])
                ),
                Formula::rel("A", vec![])
            )
        );
    }

    #[test]
    fn sequent_and_gp_round_trip() {
        let th = theory();
        let sig = &th.signature;
        for src in [
            "|- A @ <Pub>",
            "A @ <Pub> |- A @ <Pub>",
            "A @ <Pub>.[P:Sec].[Q:Pub], A @ <Sec> |- flows(Pub, Sec) @ <Pub>",
        ] {
            let s = parse_sequent(sig, src).unwrap();
            let printed = s.to_string();
            let s2 = parse_sequent(sig, &printed).unwrap();
            assert_eq!(s, s2);
            assert_eq!(printed, s2.to_string());
        }
        let empty = parse_sequent(sig, "|- A @ <>").unwrap();
        assert_eq!(empty.goal.gp.ground, Term::constant("Pub"));
    }

    #[test]
    fn proof_sexpr_round_trip() {
        let src = "(OrL [0]\n  (Ax [0])\n  (FwdL [1, 1, Bob]\n    (SelfLIntro [1, 0]\n      (Ax [1]))\n    (Ax [2])\n    (SelfRIntro [0]\n      (Ax [0]))))";
        let raw = parse_raw_proof(src).unwrap();
        assert_eq!(raw.name, "OrL");
        assert_eq!(format_raw_proof(&raw), src);
    }

    #[test]
    fn primed_rule_names_lex_as_idents() {
        let raw = parse_raw_proof("(ImpR' (Ax [0]))").unwrap();
        assert_eq!(raw.name, "ImpR'");
    }

    #[test]
    fn theory_round_trip_is_canonical() {
        let th = theory();
        let printed = format_theory(&th);
        let th2 = parse_theory(&printed).unwrap();
        assert_eq!(format_theory(&th2), printed);
        assert_eq!(th2.axioms, th.axioms);
    }

    #[test]
    fn errors_carry_positions() {
        let th = theory();
        let err = parse_formula(&th.signature, "A &&").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.col > 1);
        assert!(parse_theory("sort Principal").is_err());
        assert!(parse_theory("rel flows(Label, Label)").is_err());
    }
}
