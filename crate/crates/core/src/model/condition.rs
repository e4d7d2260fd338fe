//! The condition-expression language used by Function nodes, attribute
//! assignments and sub-dialogue starting conditions.
//!
//! ```text
//! expr  := or
//! or    := and ("||" and)*
//! and   := unary ("&&" unary)*
//! unary := "!" unary | cmp
//! cmp   := term (COP term)?
//! term  := literal | ref | call | "(" expr ")"
//! ref   := SCOPE "." IDENT
//! SCOPE := "turn" | "session" | "user" | "community"
//! ```
//!
//! `and`, `or` and `not` are accepted as keyword spellings of `&&`, `||`
//! and `!`. Positions in [`ConditionError`] are 1-based character columns;
//! an error at end of input points one past the last character.

use std::fmt;

use thiserror::Error;

use super::{AttributeRef, Scope};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Abstract syntax tree of a condition expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Ref(AttributeRef),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at position {position}")]
pub struct ConditionError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("type mismatch: `{op}` cannot be applied to {left} and {right}")]
    TypeMismatch {
        op: String,
        left: &'static str,
        right: &'static str,
    },
    #[error("unknown built-in `{0}`")]
    UnknownBuiltin(String),
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("condition evaluated to {0}, expected boolean")]
    NotBoolean(&'static str),
}

/// Read access to attribute values during evaluation. Unset attributes read
/// as [`Value::Null`].
pub trait AttributeView {
    fn get(&self, reference: &AttributeRef) -> Value;
}

impl<F> AttributeView for F
where
    F: Fn(&AttributeRef) -> Value,
{
    fn get(&self, reference: &AttributeRef) -> Value {
        self(reference)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ConditionError> {
        parse_condition(text)
    }

    /// Every attribute reference appearing in the expression, in source order.
    pub fn references(&self) -> Vec<&AttributeRef> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a AttributeRef>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Ref(r) => out.push(r),
            Expr::Not(e) => e.collect_refs(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Compare(_, a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    pub fn is_literal_true(&self) -> bool {
        matches!(self, Expr::Literal(Value::Bool(true)))
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Decimal(f64),
    Str(String),
    AndAnd,
    OrOr,
    Bang,
    Cmp(CmpOp),
    LParen,
    RParen,
    Comma,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Decimal(d) => format!("`{d}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn err(position: usize, message: impl Into<String>) -> ConditionError {
    ConditionError {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ConditionError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two = |a: char, b: char| c == a && chars.get(i + 1) == Some(&b);
        let (tok, len) = if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else if two('=', '=') {
            (Tok::Cmp(CmpOp::Eq), 2)
        } else if two('!', '=') {
            (Tok::Cmp(CmpOp::Ne), 2)
        } else if two('<', '=') {
            (Tok::Cmp(CmpOp::Le), 2)
        } else if two('>', '=') {
            (Tok::Cmp(CmpOp::Ge), 2)
        } else {
            match c {
                '!' => (Tok::Bang, 1),
                '<' => (Tok::Cmp(CmpOp::Lt), 1),
                '>' => (Tok::Cmp(CmpOp::Gt), 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                '"' => {
                    let (s, len) = lex_string(&chars, i)?;
                    (Tok::Str(s), len)
                }
                c if c.is_ascii_digit()
                    || (c == '-' && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())) =>
                {
                    lex_number(&chars, i)?
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    let word: String = chars[i..j].iter().collect();
                    let tok = match word.as_str() {
                        "and" => Tok::AndAnd,
                        "or" => Tok::OrOr,
                        "not" => Tok::Bang,
                        _ => Tok::Ident(word),
                    };
                    (tok, j - i)
                }
                other => return Err(err(pos, format!("unexpected character `{other}`"))),
            }
        };
        toks.push((tok, pos));
        i += len;
    }
    toks.push((Tok::Eof, chars.len() + 1));
    Ok(toks)
}

fn lex_string(chars: &[char], start: usize) -> Result<(String, usize), ConditionError> {
    let mut out = String::new();
    let mut j = start + 1;
    while j < chars.len() {
        match chars[j] {
            '"' => return Ok((out, j + 1 - start)),
            '\\' => {
                let esc = chars
                    .get(j + 1)
                    .ok_or_else(|| err(j + 2, "unterminated escape"))?;
                out.push(match esc {
                    'n' => '\n',
                    't' => '\t',
                    '"' => '"',
                    '\\' => '\\',
                    other => return Err(err(j + 2, format!("unknown escape `\\{other}`"))),
                });
                j += 2;
            }
            c => {
                out.push(c);
                j += 1;
            }
        }
    }
    Err(err(start + 1, "unterminated string literal"))
}

fn lex_number(chars: &[char], start: usize) -> Result<(Tok, usize), ConditionError> {
    let mut j = start;
    if chars[j] == '-' {
        j += 1;
    }
    let digits = |j: &mut usize| {
        while *j < chars.len() && chars[*j].is_ascii_digit() {
            *j += 1;
        }
    };
    digits(&mut j);
    let mut decimal = false;
    if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
        decimal = true;
        j += 1;
        digits(&mut j);
    }
    if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
        let mut k = j + 1;
        if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
            k += 1;
        }
        if k < chars.len() && chars[k].is_ascii_digit() {
            decimal = true;
            j = k;
            digits(&mut j);
        }
    }
    let text: String = chars[start..j].iter().collect();
    let tok = if decimal {
        Tok::Decimal(
            text.parse()
                .map_err(|_| err(start + 1, format!("invalid number `{text}`")))?,
        )
    } else {
        Tok::Int(
            text.parse()
                .map_err(|_| err(start + 1, format!("integer `{text}` out of range")))?,
        )
    };
    Ok((tok, j - start))
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        tok
    }

    fn expect(&mut self, want: Tok) -> Result<(), ConditionError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(err(
                self.pos(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn or(&mut self) -> Result<Expr, ConditionError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ConditionError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ConditionError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, ConditionError> {
        let lhs = self.term()?;
        if let Tok::Cmp(op) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            return Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ConditionError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Int(i) => Ok(Expr::Literal(Value::Int(i))),
            Tok::Decimal(d) => Ok(Expr::Literal(Value::Decimal(d))),
            Tok::Str(s) => Ok(Expr::Literal(Value::Str(s))),
            Tok::LParen => {
                let inner = self.or()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => Ok(Expr::Literal(Value::Bool(true))),
                "false" => Ok(Expr::Literal(Value::Bool(false))),
                "null" => Ok(Expr::Literal(Value::Null)),
                _ => {
                    if *self.peek() == Tok::LParen {
                        self.bump();
                        let mut args = Vec::new();
                        if *self.peek() != Tok::RParen {
                            loop {
                                args.push(self.or()?);
                                if *self.peek() == Tok::Comma {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                        }
                        self.expect(Tok::RParen)?;
                        return Ok(Expr::Call(word, args));
                    }
                    let Some(scope) = Scope::from_keyword(&word) else {
                        return Err(err(pos, format!("unknown identifier `{word}`")));
                    };
                    self.expect(Tok::Dot)?;
                    let name_pos = self.pos();
                    match self.bump() {
                        Tok::Ident(name) => Ok(Expr::Ref(AttributeRef { scope, name })),
                        other => Err(err(
                            name_pos,
                            format!("expected attribute name, found {}", other.describe()),
                        )),
                    }
                }
            },
            other => Err(err(pos, format!("expected a term, found {}", other.describe()))),
        }
    }
}

/// Parses a condition expression.
pub fn parse_condition(text: &str) -> Result<Expr, ConditionError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, at: 0 };
    let expr = parser.or()?;
    if *parser.peek() != Tok::Eof {
        return Err(err(
            parser.pos(),
            format!("unexpected {}", parser.peek().describe()),
        ));
    }
    Ok(expr)
}

// ---------------------------------------------------------------------------
// Printing

fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Or(..) => 1,
        Expr::And(..) => 2,
        Expr::Not(_) => 3,
        Expr::Compare(..) => 4,
        _ => 5,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, expr: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(expr) < min_prec {
        write!(f, "({expr})")
    } else {
        write!(f, "{expr}")
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, value: &Value) -> fmt::Result {
    match value {
        Value::Null => f.write_str("null"),
        Value::Bool(b) => write!(f, "{b}"),
        Value::Int(i) => write!(f, "{i}"),
        Value::Decimal(d) => write!(f, "{d:?}"),
        Value::Str(s) => {
            f.write_str("\"")?;
            for c in s.chars() {
                match c {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    '\n' => f.write_str("\\n")?,
                    '\t' => f.write_str("\\t")?,
                    c => write!(f, "{c}")?,
                }
            }
            f.write_str("\"")
        }
        // Only produced programmatically; printed as JSON for diagnostics.
        other => write!(f, "{}", other.to_json()),
    }
}

/// Prints source text that parses back to a structurally identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => write_literal(f, v),
            Expr::Ref(r) => write!(f, "{r}"),
            Expr::Not(e) => {
                f.write_str("!")?;
                write_operand(f, e, 3)
            }
            Expr::And(a, b) => {
                write_operand(f, a, 2)?;
                f.write_str(" && ")?;
                write_operand(f, b, 3)
            }
            Expr::Or(a, b) => {
                write_operand(f, a, 1)?;
                f.write_str(" || ")?;
                write_operand(f, b, 2)
            }
            Expr::Compare(op, a, b) => {
                write_operand(f, a, 5)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b, 5)
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn mismatch(op: &str, left: &Value, right: &Value) -> EvalError {
    EvalError::TypeMismatch {
        op: op.to_string(),
        left: left.type_name(),
        right: right.type_name(),
    }
}

fn values_equal(op: &str, left: &Value, right: &Value) -> Result<bool, EvalError> {
    match (left, right) {
        (Value::Null, _) | (_, Value::Null) => Ok(left.is_null() && right.is_null()),
        (Value::Int(a), Value::Int(b)) => Ok(a == b),
        (Value::Int(_) | Value::Decimal(_), Value::Int(_) | Value::Decimal(_)) => {
            Ok(left.as_f64() == right.as_f64())
        }
        (Value::Bool(a), Value::Bool(b)) => Ok(a == b),
        (Value::Str(a), Value::Str(b)) => Ok(a == b),
        (Value::List(a), Value::List(b)) => Ok(a == b),
        (Value::Map(a), Value::Map(b)) => Ok(a == b),
        _ => Err(mismatch(op, left, right)),
    }
}

fn order(op: CmpOp, left: &Value, right: &Value) -> Result<bool, EvalError> {
    let ordering = match (left, right) {
        (Value::Int(a), Value::Int(b)) => a.partial_cmp(b),
        (Value::Int(_) | Value::Decimal(_), Value::Int(_) | Value::Decimal(_)) => {
            left.as_f64().partial_cmp(&right.as_f64())
        }
        (Value::Str(a), Value::Str(b)) => a.partial_cmp(b),
        _ => return Err(mismatch(op.symbol(), left, right)),
    };
    let Some(ordering) = ordering else {
        return Ok(false);
    };
    Ok(match op {
        CmpOp::Lt => ordering.is_lt(),
        CmpOp::Le => ordering.is_le(),
        CmpOp::Gt => ordering.is_gt(),
        CmpOp::Ge => ordering.is_ge(),
        CmpOp::Eq | CmpOp::Ne => unreachable!("equality handled separately"),
    })
}

fn expect_bool(op: &str, value: Value) -> Result<bool, EvalError> {
    match value {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch {
            op: op.to_string(),
            left: other.type_name(),
            right: "boolean",
        }),
    }
}

fn call_builtin(name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
    let arity = |expected: usize| {
        if args.len() == expected {
            Ok(())
        } else {
            Err(EvalError::Arity {
                name: name.to_string(),
                expected,
                got: args.len(),
            })
        }
    };
    match name {
        "defined" => {
            arity(1)?;
            Ok(Value::Bool(!args[0].is_null()))
        }
        "len" => {
            arity(1)?;
            match &args[0] {
                Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                Value::List(items) => Ok(Value::Int(items.len() as i64)),
                Value::Map(map) => Ok(Value::Int(map.len() as i64)),
                other => Err(mismatch("len", other, &Value::Null)),
            }
        }
        "contains" => {
            arity(2)?;
            match (&args[0], &args[1]) {
                (Value::Str(h), Value::Str(n)) => Ok(Value::Bool(h.contains(n.as_str()))),
                (Value::List(items), needle) => Ok(Value::Bool(
                    items
                        .iter()
                        .any(|item| values_equal("contains", item, needle).unwrap_or(false)),
                )),
                (Value::Map(map), Value::Str(key)) => Ok(Value::Bool(map.contains_key(key))),
                (h, n) => Err(mismatch("contains", h, n)),
            }
        }
        other => Err(EvalError::UnknownBuiltin(other.to_string())),
    }
}

/// Evaluates an expression against attribute values. Pure and total: every
/// tree terminates, and type errors are reported rather than coerced.
pub fn eval_condition(expr: &Expr, ctx: &dyn AttributeView) -> Result<Value, EvalError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Ref(r) => Ok(ctx.get(r)),
        Expr::Not(e) => Ok(Value::Bool(!expect_bool("!", eval_condition(e, ctx)?)?)),
        Expr::And(a, b) => {
            if !expect_bool("&&", eval_condition(a, ctx)?)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(expect_bool("&&", eval_condition(b, ctx)?)?))
        }
        Expr::Or(a, b) => {
            if expect_bool("||", eval_condition(a, ctx)?)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(expect_bool("||", eval_condition(b, ctx)?)?))
        }
        Expr::Compare(op, a, b) => {
            let left = eval_condition(a, ctx)?;
            let right = eval_condition(b, ctx)?;
            let result = match op {
                CmpOp::Eq => values_equal("==", &left, &right)?,
                CmpOp::Ne => !values_equal("!=", &left, &right)?,
                _ => order(*op, &left, &right)?,
            };
            Ok(Value::Bool(result))
        }
        Expr::Call(name, args) => {
            let values = args
                .iter()
                .map(|a| eval_condition(a, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            call_builtin(name, values)
        }
    }
}

/// Evaluates an expression that must produce a boolean (guards and starting
/// conditions).
pub fn eval_predicate(expr: &Expr, ctx: &dyn AttributeView) -> Result<bool, EvalError> {
    match eval_condition(expr, ctx)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::NotBoolean(other.type_name())),
    }
}
