//! Parser and printer for the textual integer-transition-system format used
//! by the termination competition: `(GOAL COMPLEXITY)`, a start term, a
//! variable declaration and guarded rewrite rules
//!
//! ```text
//! l1(x, y) -> l2(x + 1, y) :|: x > 0 && (y < 3 || y > 5)
//! ```
//!
//! Disjunction (`||`) and disequality (`!=`) are accepted as extensions.
//! Rule right-hand sides may be wrapped in `Com_1(..)`; other `Com_k` and
//! rule costs are rejected with a clear message. Variables that occur in a
//! rule without being bound by its left-hand side are temporaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use thiserror::Error;

use crate::ir::{Formula, Polynomial, Program, ProgramBuilder, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ItsError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Semantic(String),
}

impl ItsError {
    fn at(tok: &Token, msg: impl Into<String>) -> ItsError {
        ItsError::Syntax {
            line: tok.line,
            col: tok.col,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Arrow,      // ->
    GuardSep,   // :|:
    AndAnd,
    OrOr,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    Plus,
    Minus,
    Star,
    Caret,
    Int(BigInt),
    Ident(String),
    EndOfInput,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ItsError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let n = chars.len();
    while i < n {
        let (l, c) = (line, col);
        let ch = chars[i];
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize, by: usize| {
            for k in 0..by {
                if chars[*i + k] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += by;
        };
        let two = if i + 1 < n { Some((chars[i], chars[i + 1])) } else { None };
        let three = if i + 2 < n {
            Some((chars[i], chars[i + 1], chars[i + 2]))
        } else {
            None
        };
        let push = |out: &mut Vec<Token>, tok: Tok| out.push(Token { tok, line: l, col: c });
        match ch {
            ' ' | '\t' | '\r' | '\n' => advance(&mut i, &mut line, &mut col, 1),
            '#' => {
                // comment to end of line
                while i < n && chars[i] != '\n' {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '(' => {
                push(&mut out, Tok::LParen);
                advance(&mut i, &mut line, &mut col, 1);
            }
            ')' => {
                push(&mut out, Tok::RParen);
                advance(&mut i, &mut line, &mut col, 1);
            }
            ',' => {
                push(&mut out, Tok::Comma);
                advance(&mut i, &mut line, &mut col, 1);
            }
            '+' => {
                push(&mut out, Tok::Plus);
                advance(&mut i, &mut line, &mut col, 1);
            }
            '*' => {
                push(&mut out, Tok::Star);
                advance(&mut i, &mut line, &mut col, 1);
            }
            '^' => {
                push(&mut out, Tok::Caret);
                advance(&mut i, &mut line, &mut col, 1);
            }
            '-' => {
                if two == Some(('-', '>')) {
                    push(&mut out, Tok::Arrow);
                    advance(&mut i, &mut line, &mut col, 2);
                } else if two == Some(('-', '{')) {
                    return Err(ItsError::Syntax {
                        line: l,
                        col: c,
                        msg: "rule costs are not supported; remove the '-{..}->' annotation"
                            .into(),
                    });
                } else {
                    push(&mut out, Tok::Minus);
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            ':' => {
                if three == Some((':', '|', ':')) {
                    push(&mut out, Tok::GuardSep);
                    advance(&mut i, &mut line, &mut col, 3);
                } else {
                    return Err(ItsError::Syntax {
                        line: l,
                        col: c,
                        msg: "expected ':|:'".into(),
                    });
                }
            }
            '&' => {
                if two == Some(('&', '&')) {
                    push(&mut out, Tok::AndAnd);
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    return Err(ItsError::Syntax {
                        line: l,
                        col: c,
                        msg: "expected '&&'".into(),
                    });
                }
            }
            '|' => {
                if two == Some(('|', '|')) {
                    push(&mut out, Tok::OrOr);
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    return Err(ItsError::Syntax {
                        line: l,
                        col: c,
                        msg: "expected '||'".into(),
                    });
                }
            }
            '<' => {
                if two == Some(('<', '=')) {
                    push(&mut out, Tok::Le);
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    push(&mut out, Tok::Lt);
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '>' => {
                if two == Some(('>', '=')) {
                    push(&mut out, Tok::Ge);
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    push(&mut out, Tok::Gt);
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '=' => {
                if two == Some(('=', '=')) {
                    push(&mut out, Tok::Eq);
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    push(&mut out, Tok::Eq);
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            '!' => {
                if two == Some(('!', '=')) {
                    push(&mut out, Tok::Ne);
                    advance(&mut i, &mut line, &mut col, 2);
                } else {
                    return Err(ItsError::Syntax {
                        line: l,
                        col: c,
                        msg: "expected '!='".into(),
                    });
                }
            }
            d if d.is_ascii_digit() => {
                let mut s = String::new();
                while i < n && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    advance(&mut i, &mut line, &mut col, 1);
                }
                push(&mut out, Tok::Int(s.parse().unwrap()));
            }
            a if a.is_ascii_alphabetic() || a == '_' || a == '\'' || a == '.' => {
                let mut s = String::new();
                while i < n
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '_'
                        || chars[i] == '\''
                        || chars[i] == '.')
                {
                    s.push(chars[i]);
                    advance(&mut i, &mut line, &mut col, 1);
                }
                push(&mut out, Tok::Ident(s));
            }
            other => {
                return Err(ItsError::Syntax {
                    line: l,
                    col: c,
                    msg: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::EndOfInput,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ItsError> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(ItsError::at(&t, format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), ItsError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            _ => Err(ItsError::at(&t, format!("expected {what}"))),
        }
    }
}

/// A raw rule before name resolution.
struct RawRule {
    lhs_loc: String,
    lhs_args: Vec<(String, Token)>,
    rhs_loc: String,
    rhs_terms: Vec<Expr>,
    guard: Option<BExpr>,
    token: Token,
}

/// Untyped arithmetic expression.
enum Expr {
    Int(BigInt),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

enum BExpr {
    Cmp(Expr, CmpOp, Expr),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
}

/// How disequalities are desugared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeMode {
    /// `p != q` becomes the in-guard disjunction `p < q || p > q`.
    #[default]
    InGuard,
    /// A rule with conjunctive `!=` atoms is split into one rule per sign,
    /// keeping every guard a conjunction of strict comparisons.
    SplitRules,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub ne_mode: NeMode,
}

/// Parse the textual format into a program with the default options.
pub fn parse_its(text: &str) -> Result<Program, ItsError> {
    parse_its_with(text, ParseOptions::default())
}

/// Parse the textual format into a program.
pub fn parse_its_with(text: &str, options: ParseOptions) -> Result<Program, ItsError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut goal_seen = false;
    let mut start: Option<String> = None;
    let mut declared_vars: Option<Vec<String>> = None;
    #[allow(unused_mut)]
    let mut rules: Vec<RawRule> = Vec::new();

    while p.peek().tok != Tok::EndOfInput {
        p.expect(Tok::LParen, "'('")?;
        let (section, tok) = p.ident("a section name")?;
        match section.as_str() {
            "GOAL" => {
                let _ = p.ident("a goal")?;
                p.expect(Tok::RParen, "')'")?;
                goal_seen = true;
            }
            "STARTTERM" => {
                p.expect(Tok::LParen, "'('")?;
                let (kw, kwtok) = p.ident("FUNCTIONSYMBOLS")?;
                if kw != "FUNCTIONSYMBOLS" {
                    return Err(ItsError::at(&kwtok, "expected FUNCTIONSYMBOLS"));
                }
                let (loc, _) = p.ident("a start location")?;
                start = Some(loc);
                p.expect(Tok::RParen, "')'")?;
                p.expect(Tok::RParen, "')'")?;
            }
            "VAR" => {
                let mut vars = Vec::new();
                while let Tok::Ident(_) = p.peek().tok {
                    vars.push(p.ident("a variable")?.0);
                }
                p.expect(Tok::RParen, "')'")?;
                declared_vars = Some(vars);
            }
            "RULES" => {
                while p.peek().tok != Tok::RParen && p.peek().tok != Tok::EndOfInput {
                    rules.push(parse_rule(&mut p)?);
                }
                p.expect(Tok::RParen, "')'")?;
            }
            other => return Err(ItsError::at(&tok, format!("unknown section '{other}'"))),
        }
    }
    let _ = goal_seen;

    let Some(start) = start else {
        return Err(ItsError::Semantic("missing (STARTTERM ...)".into()));
    };
    if rules.is_empty() {
        return Err(ItsError::Semantic("no rules".into()));
    }
    if options.ne_mode == NeMode::SplitRules {
        rules = rules
            .into_iter()
            .flat_map(|r| {
                let RawRule { lhs_loc, lhs_args, rhs_loc, rhs_terms, guard, token } = r;
                match guard {
                    None => vec![RawRule { lhs_loc, lhs_args, rhs_loc, rhs_terms, guard: None, token }],
                    Some(g) => split_disequalities(g)
                        .into_iter()
                        .map(|g| RawRule {
                            lhs_loc: lhs_loc.clone(),
                            lhs_args: lhs_args.clone(),
                            rhs_loc: rhs_loc.clone(),
                            rhs_terms: rhs_terms.iter().map(clone_expr).collect(),
                            guard: Some(g),
                            token: token.clone(),
                        })
                        .collect(),
                }
            })
            .collect();
    }
    build_program(start, declared_vars, rules)
}

/// Expand conjunctive `!=` atoms into one copy per strict order, capped so
/// pathological guards stay a single in-guard disjunction. Disequalities
/// under `||` are left alone.
fn split_disequalities(g: BExpr) -> Vec<BExpr> {
    const CAP: usize = 16;
    fn go(g: BExpr, cap: usize) -> Vec<BExpr> {
        match g {
            BExpr::Cmp(l, CmpOp::Ne, r) => {
                vec![
                    BExpr::Cmp(clone_expr(&l), CmpOp::Lt, clone_expr(&r)),
                    BExpr::Cmp(l, CmpOp::Gt, r),
                ]
            }
            BExpr::And(a, b) => {
                let left = go(*a, cap);
                let right = go(*b, cap);
                if left.len() * right.len() > cap {
                    // Too many combinations: keep the conjunction whole.
                    return vec![BExpr::And(
                        Box::new(rejoin(left)),
                        Box::new(rejoin(right)),
                    )];
                }
                let mut out = Vec::new();
                for l in &left {
                    for r in &right {
                        out.push(BExpr::And(Box::new(clone_bexpr(l)), Box::new(clone_bexpr(r))));
                    }
                }
                out
            }
            other => vec![other],
        }
    }
    fn rejoin(mut parts: Vec<BExpr>) -> BExpr {
        let mut out = parts.pop().expect("non-empty");
        while let Some(p) = parts.pop() {
            out = BExpr::Or(Box::new(p), Box::new(out));
        }
        out
    }
    go(g, CAP)
}

fn clone_expr(e: &Expr) -> Expr {
    match e {
        Expr::Int(v) => Expr::Int(v.clone()),
        Expr::Var(s) => Expr::Var(s.clone()),
        Expr::Neg(a) => Expr::Neg(Box::new(clone_expr(a))),
        Expr::Add(a, b) => Expr::Add(Box::new(clone_expr(a)), Box::new(clone_expr(b))),
        Expr::Sub(a, b) => Expr::Sub(Box::new(clone_expr(a)), Box::new(clone_expr(b))),
        Expr::Mul(a, b) => Expr::Mul(Box::new(clone_expr(a)), Box::new(clone_expr(b))),
        Expr::Pow(a, k) => Expr::Pow(Box::new(clone_expr(a)), *k),
    }
}

fn clone_bexpr(e: &BExpr) -> BExpr {
    match e {
        BExpr::Cmp(l, op, r) => BExpr::Cmp(
            clone_expr(l),
            match op {
                CmpOp::Lt => CmpOp::Lt,
                CmpOp::Le => CmpOp::Le,
                CmpOp::Eq => CmpOp::Eq,
                CmpOp::Ne => CmpOp::Ne,
                CmpOp::Ge => CmpOp::Ge,
                CmpOp::Gt => CmpOp::Gt,
            },
            clone_expr(r),
        ),
        BExpr::And(a, b) => BExpr::And(Box::new(clone_bexpr(a)), Box::new(clone_bexpr(b))),
        BExpr::Or(a, b) => BExpr::Or(Box::new(clone_bexpr(a)), Box::new(clone_bexpr(b))),
    }
}

fn parse_rule(p: &mut Parser) -> Result<RawRule, ItsError> {
    let (lhs_loc, token) = p.ident("a rule")?;
    p.expect(Tok::LParen, "'('")?;
    let mut lhs_args = Vec::new();
    if p.peek().tok != Tok::RParen {
        loop {
            let (name, tok) = p.ident("a variable")?;
            lhs_args.push((name, tok));
            if p.peek().tok == Tok::Comma {
                p.next();
            } else {
                break;
            }
        }
    }
    p.expect(Tok::RParen, "')'")?;
    p.expect(Tok::Arrow, "'->'")?;

    // Optional Com_1 wrapper.
    let (mut rhs_loc, rhs_tok) = p.ident("a target location")?;
    let mut wrapped = false;
    if rhs_loc.starts_with("Com_") {
        if rhs_loc != "Com_1" {
            return Err(ItsError::at(
                &rhs_tok,
                format!("only Com_1 right-hand sides are supported, found {rhs_loc}"),
            ));
        }
        wrapped = true;
        p.expect(Tok::LParen, "'('")?;
        rhs_loc = p.ident("a target location")?.0;
    }
    p.expect(Tok::LParen, "'('")?;
    let mut rhs_terms = Vec::new();
    if p.peek().tok != Tok::RParen {
        loop {
            rhs_terms.push(parse_expr(p)?);
            if p.peek().tok == Tok::Comma {
                p.next();
            } else {
                break;
            }
        }
    }
    p.expect(Tok::RParen, "')'")?;
    if wrapped {
        p.expect(Tok::RParen, "')'")?;
    }
    let guard = if p.peek().tok == Tok::GuardSep {
        p.next();
        Some(parse_bexpr(p)?)
    } else {
        None
    };
    Ok(RawRule {
        lhs_loc,
        lhs_args,
        rhs_loc,
        rhs_terms,
        guard,
        token,
    })
}

fn parse_bexpr(p: &mut Parser) -> Result<BExpr, ItsError> {
    let mut lhs = parse_bterm(p)?;
    while p.peek().tok == Tok::OrOr {
        p.next();
        let rhs = parse_bterm(p)?;
        lhs = BExpr::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_bterm(p: &mut Parser) -> Result<BExpr, ItsError> {
    let mut lhs = parse_batom(p)?;
    while p.peek().tok == Tok::AndAnd {
        p.next();
        let rhs = parse_batom(p)?;
        lhs = BExpr::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_batom(p: &mut Parser) -> Result<BExpr, ItsError> {
    // Parenthesized boolean expression vs. arithmetic comparison: decide by
    // scanning for a comparator before the matching ')' at depth 0.
    if p.peek().tok == Tok::LParen && parens_hold_bexpr(p) {
        p.next();
        let inner = parse_bexpr(p)?;
        p.expect(Tok::RParen, "')'")?;
        return Ok(inner);
    }
    let lhs = parse_expr(p)?;
    let op = match p.next() {
        Token { tok: Tok::Lt, .. } => CmpOp::Lt,
        Token { tok: Tok::Le, .. } => CmpOp::Le,
        Token { tok: Tok::Eq, .. } => CmpOp::Eq,
        Token { tok: Tok::Ne, .. } => CmpOp::Ne,
        Token { tok: Tok::Ge, .. } => CmpOp::Ge,
        Token { tok: Tok::Gt, .. } => CmpOp::Gt,
        t => return Err(ItsError::at(&t, "expected a comparison operator")),
    };
    let rhs = parse_expr(p)?;
    Ok(BExpr::Cmp(lhs, op, rhs))
}

/// Look ahead: does the parenthesized group starting here contain a
/// boolean operator or comparator at depth 1?
fn parens_hold_bexpr(p: &Parser) -> bool {
    let mut depth = 0usize;
    for t in &p.tokens[p.pos..] {
        match t.tok {
            Tok::LParen => depth += 1,
            Tok::RParen => {
                if depth <= 1 {
                    return false;
                }
                depth -= 1;
            }
            Tok::AndAnd
            | Tok::OrOr
            | Tok::Lt
            | Tok::Le
            | Tok::Eq
            | Tok::Ne
            | Tok::Ge
            | Tok::Gt
                if depth == 1 =>
            {
                return true;
            }
            Tok::EndOfInput => return false,
            _ => {}
        }
    }
    false
}

fn parse_expr(p: &mut Parser) -> Result<Expr, ItsError> {
    let mut lhs = parse_term(p)?;
    loop {
        match p.peek().tok {
            Tok::Plus => {
                p.next();
                lhs = Expr::Add(Box::new(lhs), Box::new(parse_term(p)?));
            }
            Tok::Minus => {
                p.next();
                lhs = Expr::Sub(Box::new(lhs), Box::new(parse_term(p)?));
            }
            _ => return Ok(lhs),
        }
    }
}

fn parse_term(p: &mut Parser) -> Result<Expr, ItsError> {
    let mut lhs = parse_factor(p)?;
    while p.peek().tok == Tok::Star {
        p.next();
        lhs = Expr::Mul(Box::new(lhs), Box::new(parse_factor(p)?));
    }
    Ok(lhs)
}

fn parse_factor(p: &mut Parser) -> Result<Expr, ItsError> {
    if p.peek().tok == Tok::Minus {
        p.next();
        return Ok(Expr::Neg(Box::new(parse_factor(p)?)));
    }
    let mut base = match p.next() {
        Token { tok: Tok::Int(v), .. } => Expr::Int(v),
        Token { tok: Tok::Ident(s), .. } => Expr::Var(s),
        Token { tok: Tok::LParen, .. } => {
            let inner = parse_expr(p)?;
            p.expect(Tok::RParen, "')'")?;
            inner
        }
        t => return Err(ItsError::at(&t, "expected an arithmetic term")),
    };
    while p.peek().tok == Tok::Caret {
        p.next();
        let t = p.next();
        let Tok::Int(e) = &t.tok else {
            return Err(ItsError::at(&t, "expected a natural exponent"));
        };
        let e: u32 = num_traits::ToPrimitive::to_u32(e)
            .ok_or_else(|| ItsError::at(&t, "exponent too large"))?;
        base = Expr::Pow(Box::new(base), e);
    }
    Ok(base)
}

fn build_program(
    start: String,
    declared_vars: Option<Vec<String>>,
    rules: Vec<RawRule>,
) -> Result<Program, ItsError> {
    let mut b = ProgramBuilder::new();
    // Program variables: the declared list, or the first rule's lhs.
    let pv_names: Vec<String> = match &declared_vars {
        Some(vars) if !vars.is_empty() => vars.clone(),
        _ => rules[0].lhs_args.iter().map(|(n, _)| n.clone()).collect(),
    };
    {
        let mut seen = std::collections::BTreeSet::new();
        for v in &pv_names {
            if !seen.insert(v.clone()) {
                return Err(ItsError::Semantic(format!("duplicate variable {v}")));
            }
            b.program_var(v);
        }
    }
    let start_loc = b.location(&start);
    b.initial(start_loc);

    let arity = rules[0].lhs_args.len();
    let known_lhs: std::collections::BTreeSet<&str> =
        rules.iter().map(|r| r.lhs_loc.as_str()).collect();
    if !known_lhs.contains(start.as_str()) {
        return Err(ItsError::Semantic(format!(
            "start location {start} has no rules"
        )));
    }

    for (i, rule) in rules.iter().enumerate() {
        if rule.lhs_args.len() != arity {
            return Err(ItsError::at(
                &rule.token,
                format!(
                    "arity mismatch: {} takes {} arguments, expected {arity}",
                    rule.lhs_loc,
                    rule.lhs_args.len()
                ),
            ));
        }
        if rule.rhs_terms.len() != arity {
            return Err(ItsError::at(
                &rule.token,
                format!(
                    "arity mismatch: {} is applied to {} arguments, expected {arity}",
                    rule.rhs_loc,
                    rule.rhs_terms.len()
                ),
            ));
        }
        // Positional binding: the rule's lhs names map to the canonical
        // program variables.
        let mut binding: BTreeMap<String, VarId> = BTreeMap::new();
        for (pos, (name, tok)) in rule.lhs_args.iter().enumerate() {
            if binding
                .insert(name.clone(), b.program_var(&pv_names[pos]))
                .is_some()
            {
                return Err(ItsError::at(tok, format!("duplicate lhs variable {name}")));
            }
        }
        let src = b.location(&rule.lhs_loc);
        let tgt = b.location(&rule.rhs_loc);
        let mut resolve = |b: &mut ProgramBuilder, name: &str| -> VarId {
            if let Some(v) = binding.get(name) {
                *v
            } else {
                // Unbound in this rule: a temporary (fresh each step).
                b.temp_var(&format!("{name}?"))
            }
        };
        let mut update = BTreeMap::new();
        for (pos, term) in rule.rhs_terms.iter().enumerate() {
            let poly = expr_to_poly(term, &mut b, &mut resolve);
            let v = b.program_var(&pv_names[pos]);
            if poly.as_var() != Some(v) {
                update.insert(v, poly);
            }
        }
        let guard = match &rule.guard {
            None => Formula::tt(),
            Some(g) => bexpr_to_formula(g, &mut b, &mut resolve),
        };
        b.transition(&format!("t{i}"), src, tgt, guard, update);
    }
    b.build().map_err(|e| ItsError::Semantic(e.to_string()))
}

fn expr_to_poly(
    e: &Expr,
    b: &mut ProgramBuilder,
    resolve: &mut dyn FnMut(&mut ProgramBuilder, &str) -> VarId,
) -> Polynomial {
    match e {
        Expr::Int(v) => Polynomial::from_bigint(v.clone()),
        Expr::Var(name) => Polynomial::var(resolve(b, name)),
        Expr::Neg(inner) => expr_to_poly(inner, b, resolve).neg(),
        Expr::Add(l, r) => expr_to_poly(l, b, resolve).add(&expr_to_poly(r, b, resolve)),
        Expr::Sub(l, r) => expr_to_poly(l, b, resolve).sub(&expr_to_poly(r, b, resolve)),
        Expr::Mul(l, r) => expr_to_poly(l, b, resolve).mul(&expr_to_poly(r, b, resolve)),
        Expr::Pow(inner, k) => expr_to_poly(inner, b, resolve).pow(*k),
    }
}

fn bexpr_to_formula(
    e: &BExpr,
    b: &mut ProgramBuilder,
    resolve: &mut dyn FnMut(&mut ProgramBuilder, &str) -> VarId,
) -> Formula {
    match e {
        BExpr::Cmp(l, op, r) => {
            let lp = expr_to_poly(l, b, resolve);
            let rp = expr_to_poly(r, b, resolve);
            match op {
                CmpOp::Lt => Formula::lt(lp, rp),
                CmpOp::Le => Formula::le(lp, rp),
                CmpOp::Eq => Formula::eq(lp, rp),
                CmpOp::Ne => Formula::ne(lp, rp),
                CmpOp::Ge => Formula::ge(lp, rp),
                CmpOp::Gt => Formula::gt(lp, rp),
            }
        }
        BExpr::And(l, r) => Formula::and(vec![
            bexpr_to_formula(l, b, resolve),
            bexpr_to_formula(r, b, resolve),
        ]),
        BExpr::Or(l, r) => Formula::or(vec![
            bexpr_to_formula(l, b, resolve),
            bexpr_to_formula(r, b, resolve),
        ]),
    }
}

/// Print a program back into the textual format. Guards are emitted in the
/// normalized `0 < p` form, which parses back to the identical structure.
pub fn print_its(program: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(GOAL COMPLEXITY)");
    let _ = writeln!(
        out,
        "(STARTTERM (FUNCTIONSYMBOLS {}))",
        program.loc_name(program.initial)
    );
    let pv_names: Vec<String> = program
        .pv()
        .iter()
        .map(|v| program.var_name(*v).to_string())
        .collect();
    let _ = writeln!(out, "(VAR {})", pv_names.join(" "));
    let _ = writeln!(out, "(RULES");
    let names = program.namer();
    for t in &program.transitions {
        let args = pv_names.join(", ");
        let rhs: Vec<String> = program
            .pv()
            .iter()
            .map(|v| format!("{}", t.update_of(*v).display(&names)))
            .collect();
        let mut line = format!(
            "  {}({}) -> {}({})",
            program.loc_name(t.src),
            args,
            program.loc_name(t.tgt),
            rhs.join(", ")
        );
        if t.guard != Formula::True {
            let _ = write!(line, " :|: {}", t.guard.display(&names));
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, ")");
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ir::{State, TransId};

    pub(crate) const FIGURE_ONE: &str = r#"
(GOAL COMPLEXITY)
(STARTTERM (FUNCTIONSYMBOLS l0))
(VAR x1 x2 x3 x4 x5)
(RULES
  l0(x1, x2, x3, x4, x5) -> l1(x1, x2, x3, x4, x5)
  l1(x1, x2, x3, x4, x5) -> l3(x4, x5, x3, x4, x5) :|: x3 > 0 && x4 > 0
  l3(x1, x2, x3, x4, x5) -> l1(x1, x2, x3, x4 - 1, x5)
  l1(x1, x2, x3, x4, x5) -> l2(x1, x2, x3, x4, x5) :|: -5 <= x3 && x3 <= 5
  l2(x1, x2, x3, x4, x5) -> l3(x4, x5, x3, x4, x5) :|: x4 > 0
  l3(x1, x2, x3, x4, x5) -> l3(-2*x1, 3*x2 - 2*x3^3, x3, x4, x5) :|: x1^2 + x3^5 < x2 && (x1 < 0 || x1 > 0)
)
"#;

    #[test]
    fn parses_the_running_example() {
        let p = parse_its(FIGURE_ONE).unwrap();
        assert_eq!(p.pv().len(), 5);
        assert_eq!(p.transitions.len(), 6);
        assert_eq!(p.loc_name(p.initial), "l0");
        // The nonlinear self-loop's guard evaluates as expected.
        let t5 = p.transition(TransId(5));
        let v = |n: &str| p.var_by_name(n).unwrap();
        let st = State::from([
            (v("x1"), 1.into()),
            (v("x2"), 3.into()),
            (v("x3"), 1.into()),
            (v("x4"), 1.into()),
            (v("x5"), 3.into()),
        ]);
        assert!(t5.guard.holds(&st));
        let st0 = State::from([
            (v("x1"), 0.into()),
            (v("x2"), 3.into()),
            (v("x3"), 1.into()),
            (v("x4"), 1.into()),
            (v("x5"), 3.into()),
        ]);
        assert!(!t5.guard.holds(&st0));
        // Update of t5: x1 <- -2*x1, x2 <- 3*x2 - 2*x3^3.
        assert_eq!(
            t5.update[&v("x1")],
            Polynomial::from_int(-2).mul(&Polynomial::var(v("x1")))
        );
    }

    #[test]
    fn round_trip_is_structural_identity() {
        let p = parse_its(FIGURE_ONE).unwrap();
        let printed = print_its(&p);
        let q = parse_its(&printed).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn missing_rules_is_an_error() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n)\n";
        assert!(matches!(parse_its(text), Err(ItsError::Semantic(_))));
    }

    #[test]
    fn rule_into_start_location_is_rejected() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -> l1(x)\n  l1(x) -> l0(x)\n)\n";
        let err = parse_its(text).unwrap_err();
        assert!(matches!(err, ItsError::Semantic(msg) if msg.contains("initial")));
    }

    #[test]
    fn unbound_rhs_variables_are_temporaries() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -> l1(nondet)\n)\n";
        let p = parse_its(text).unwrap();
        let t = p.transition(TransId(0));
        assert_eq!(t.temp_vars(&p).len(), 1);
    }

    #[test]
    fn costs_are_rejected_with_a_message() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -{3}-> l1(x)\n)\n";
        let err = parse_its(text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("costs"), "unexpected message: {msg}");
    }

    #[test]
    fn com_one_wrappers_are_stripped() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -> Com_1(l1(x + 1)) :|: x > 0\n)\n";
        let p = parse_its(text).unwrap();
        assert_eq!(p.transitions.len(), 1);
        assert_eq!(p.loc_name(p.transition(TransId(0)).tgt), "l1");
    }

    #[test]
    fn com_two_is_rejected() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -> Com_2(l1(x), l2(x))\n)\n";
        assert!(parse_its(text).is_err());
    }

    #[test]
    fn arity_mismatch_is_flagged() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x y)\n(RULES\n  l0(x, y) -> l1(x)\n)\n";
        let err = parse_its(text).unwrap_err();
        assert!(format!("{err}").contains("arity"));
    }

    #[test]
    fn disequality_split_mode() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -> l1(x)\n  l1(x) -> l1(-2*x) :|: x != 0 && x < 9\n)\n";
        let split = parse_its_with(
            text,
            ParseOptions {
                ne_mode: NeMode::SplitRules,
            },
        )
        .unwrap();
        // The looping rule becomes two rules with strict orders.
        assert_eq!(split.transitions.len(), 3);
        let in_guard = parse_its(text).unwrap();
        assert_eq!(in_guard.transitions.len(), 2);
        // Same semantics: identical enabledness on every small state.
        let x = split.var_by_name("x").unwrap();
        for v in -4i64..=4 {
            let st = State::from([(x, v.into())]);
            let split_enabled = split
                .transitions
                .iter()
                .skip(1)
                .any(|t| t.guard.holds(&st));
            let guard_enabled = in_guard.transition(TransId(1)).guard.holds(&st);
            assert_eq!(split_enabled, guard_enabled, "at x={v}");
        }
    }

    #[test]
    fn positional_renaming_per_rule() {
        // A rule may name its lhs arguments differently; binding is
        // positional.
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x y)\n(RULES\n  l0(x, y) -> l1(y, x)\n  l1(a, b) -> l1(a - 1, b) :|: a > 0\n)\n";
        let p = parse_its(text).unwrap();
        let x = p.var_by_name("x").unwrap();
        let t1 = p.transition(TransId(1));
        assert_eq!(
            t1.update[&x],
            Polynomial::var(x).sub(&Polynomial::one())
        );
        assert!(t1.guard.holds(&State::from([(x, 1.into()), (p.var_by_name("y").unwrap(), 0.into())])));
    }
}
