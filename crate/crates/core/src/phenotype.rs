//! Arithmetic expression trees compiled from derived phenotypes, and their
//! column-wise evaluation over a feature matrix.
//!
//! The surface syntax is the numpy style produced by the bundled grammars:
//! `x[:,k]` for feature columns, `pdiv`, `psqrt`, `plog`, `np.sin`,
//! `np.tanh`, `np.exp`, infix `+ - *` and decimal literals. Infix operators
//! follow Python precedence (`*` binds tighter than `+`/`-`, all left
//! associative), so a formula means the same thing here as when pasted into a
//! numpy session.

use std::fmt;

use thiserror::Error;

use crate::data::FeatureMatrix;
use crate::grammar::DerivationTree;

/// Denominators with magnitude at or below this make `pdiv` return 1.
pub const PDIV_EPSILON: f64 = 1e-9;
/// `np.exp` arguments above this saturate and mark the prediction non-finite.
pub const EXP_SATURATION: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhenotypeError {
    #[error("malformed expression at byte {position}: {message}")]
    MalformedExpression { position: usize, message: String },
    #[error("feature x{index} referenced but the matrix has {available} columns")]
    FeatureOutOfRange { index: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    ProtectedDiv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    ProtectedSqrt,
    ProtectedLog,
    Sin,
    Tanh,
    Exp,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::ProtectedSqrt => "psqrt",
            UnaryOp::ProtectedLog => "plog",
            UnaryOp::Sin => "np.sin",
            UnaryOp::Tanh => "np.tanh",
            UnaryOp::Exp => "np.exp",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "psqrt" => UnaryOp::ProtectedSqrt,
            "plog" => UnaryOp::ProtectedLog,
            "np.sin" => UnaryOp::Sin,
            "np.tanh" => UnaryOp::Tanh,
            "np.exp" => UnaryOp::Exp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Feature(usize),
    Constant(f64),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    pub fn feature(index: usize) -> Self {
        Node::Feature(index)
    }

    pub fn constant(value: f64) -> Self {
        Node::Constant(value)
    }

    pub fn unary(op: UnaryOp, arg: Node) -> Self {
        Node::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, left: Node, right: Node) -> Self {
        Node::Binary(op, Box::new(left), Box::new(right))
    }

    fn count(&self) -> usize {
        match self {
            Node::Feature(_) | Node::Constant(_) => 1,
            Node::Unary(_, a) => 1 + a.count(),
            Node::Binary(_, a, b) => 1 + a.count() + b.count(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Feature(_) | Node::Constant(_) => 1,
            Node::Unary(_, a) => 1 + a.depth(),
            Node::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Feature(k) => Some(*k),
            Node::Constant(_) => None,
            Node::Unary(_, a) => a.max_feature(),
            Node::Binary(_, a, b) => a.max_feature().max(b.max_feature()),
        }
    }
}

/// An immutable expression with cached structural statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    node_count: usize,
    depth: usize,
}

impl Expression {
    pub fn new(root: Node) -> Self {
        let node_count = root.count();
        let depth = root.depth();
        Self {
            root,
            node_count,
            depth,
        }
    }

    /// Parses the surface syntax.
    pub fn parse(text: &str) -> Result<Self, PhenotypeError> {
        let mut parser = Parser { text, pos: 0 };
        let root = parser.expression()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Self::new(root))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Leaves have depth 1.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Highest feature column the expression reads, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.root.max_feature()
    }

    pub fn evaluate(&self, features: &FeatureMatrix) -> Result<PredictionVector, PhenotypeError> {
        evaluate(self, features)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root)
    }
}

/// Turns a complete derivation into an evaluable expression by reading its
/// terminal string with the surface-syntax parser.
pub fn compile(tree: &DerivationTree<'_>) -> Result<Expression, PhenotypeError> {
    Expression::parse(&tree.serialize())
}

/// Predicted scores, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    pub values: Vec<f64>,
    /// False when any intermediate value was non-finite or `np.exp`
    /// saturated.
    pub finite: bool,
}

pub fn evaluate(expr: &Expression, features: &FeatureMatrix) -> Result<PredictionVector, PhenotypeError> {
    if let Some(k) = expr.max_feature() {
        if k >= features.n_cols() {
            return Err(PhenotypeError::FeatureOutOfRange {
                index: k,
                available: features.n_cols(),
            });
        }
    }
    let mut finite = true;
    let values = eval_node(&expr.root, features, &mut finite);
    Ok(PredictionVector { values, finite })
}

fn eval_node(node: &Node, features: &FeatureMatrix, finite: &mut bool) -> Vec<f64> {
    let out = match node {
        Node::Feature(k) => return features.column(*k).to_vec(),
        Node::Constant(c) => return vec![*c; features.n_rows()],
        Node::Unary(op, arg) => {
            let mut v = eval_node(arg, features, finite);
            for x in &mut v {
                *x = match op {
                    UnaryOp::ProtectedSqrt => x.abs().sqrt(),
                    UnaryOp::ProtectedLog => x.abs().ln_1p(),
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Tanh => x.tanh(),
                    UnaryOp::Exp => {
                        if *x > EXP_SATURATION {
                            *finite = false;
                            f64::MAX
                        } else {
                            x.exp()
                        }
                    }
                };
            }
            v
        }
        Node::Binary(op, a, b) => {
            let mut left = eval_node(a, features, finite);
            let right = eval_node(b, features, finite);
            for (x, &y) in left.iter_mut().zip(&right) {
                *x = match op {
                    BinaryOp::Add => *x + y,
                    BinaryOp::Sub => *x - y,
                    BinaryOp::Mul => *x * y,
                    BinaryOp::ProtectedDiv => protected_div(*x, y),
                };
            }
            left
        }
    };
    if *finite && out.iter().any(|x| !x.is_finite()) {
        *finite = false;
    }
    out
}

pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() <= PDIV_EPSILON {
        1.0
    } else {
        a / b
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Feature(k) => write!(f, "x[:,{k}]"),
        Node::Constant(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "({c:?})"),
        Node::Constant(c) => write!(f, "{c:?}"),
        Node::Unary(op, arg) => {
            write!(f, "{}(", op.name())?;
            write_node(f, arg)?;
            f.write_str(")")
        }
        Node::Binary(BinaryOp::ProtectedDiv, a, b) => {
            f.write_str("pdiv(")?;
            write_node(f, a)?;
            f.write_str(",")?;
            write_node(f, b)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            let symbol = match op {
                BinaryOp::Add => "+",
                BinaryOp::Sub => "-",
                BinaryOp::Mul => "*",
                BinaryOp::ProtectedDiv => unreachable!(),
            };
            let is_sum = |n: &Node| matches!(n, Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..));
            let is_infix = |n: &Node| matches!(n, Node::Binary(BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul, ..));
            let (wrap_left, wrap_right) = match op {
                BinaryOp::Mul => (is_sum(a), is_infix(b)),
                _ => (false, is_sum(b)),
            };
            write_wrapped(f, a, wrap_left)?;
            f.write_str(symbol)?;
            write_wrapped(f, b, wrap_right)
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, node: &Node, wrap: bool) -> fmt::Result {
    if wrap {
        f.write_str("(")?;
        write_node(f, node)?;
        f.write_str(")")
    } else {
        write_node(f, node)
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> PhenotypeError {
        PhenotypeError::MalformedExpression {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), PhenotypeError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{token}`")))
        }
    }

    fn expression(&mut self) -> Result<Node, PhenotypeError> {
        let mut left = self.term()?;
        loop {
            let op = if self.eat("+") {
                BinaryOp::Add
            } else if self.eat("-") {
                BinaryOp::Sub
            } else {
                return Ok(left);
            };
            let right = self.term()?;
            left = Node::binary(op, left, right);
        }
    }

    fn term(&mut self) -> Result<Node, PhenotypeError> {
        let mut left = self.factor()?;
        while self.eat("*") {
            let right = self.factor()?;
            left = Node::binary(BinaryOp::Mul, left, right);
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<Node, PhenotypeError> {
        self.skip_ws();
        if self.eat("(") {
            let inner = self.expression()?;
            self.expect(")")?;
            return Ok(inner);
        }
        let rest = self.rest();
        if rest.starts_with('-') || rest.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
            return self.number();
        }
        let ident_len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
            .unwrap_or(rest.len());
        let ident = &rest[..ident_len];
        if ident.is_empty() {
            return Err(self.error("expected an operand"));
        }
        if ident == "x" && rest[1..].trim_start().starts_with('[') {
            self.pos += 1;
            return self.indexed_feature();
        }
        if let Some(k) = ident
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        {
            let index = k.parse().map_err(|_| self.error("feature index out of range"))?;
            self.pos += ident_len;
            return Ok(Node::Feature(index));
        }
        self.pos += ident_len;
        if ident == "pdiv" {
            self.expect("(")?;
            let a = self.expression()?;
            self.expect(",")?;
            let b = self.expression()?;
            self.expect(")")?;
            return Ok(Node::binary(BinaryOp::ProtectedDiv, a, b));
        }
        if let Some(op) = UnaryOp::from_name(ident) {
            self.expect("(")?;
            let a = self.expression()?;
            self.expect(")")?;
            return Ok(Node::unary(op, a));
        }
        self.pos -= ident_len;
        Err(self.error(&format!("unknown identifier `{ident}`")))
    }

    /// `[:,k]` after an `x`.
    fn indexed_feature(&mut self) -> Result<Node, PhenotypeError> {
        self.expect("[")?;
        self.expect(":")?;
        self.expect(",")?;
        self.skip_ws();
        let digits = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(self.error("expected a column index"));
        }
        let index = self.rest()[..digits]
            .parse()
            .map_err(|_| self.error("feature index out of range"))?;
        self.pos += digits;
        self.expect("]")?;
        Ok(Node::Feature(index))
    }

    fn number(&mut self) -> Result<Node, PhenotypeError> {
        let start = self.pos;
        let rest = self.rest();
        let mut len = 0;
        let bytes = rest.as_bytes();
        if bytes.first() == Some(&b'-') {
            len += 1;
        }
        while len < bytes.len() && (bytes[len].is_ascii_digit() || bytes[len] == b'.') {
            len += 1;
        }
        if len < bytes.len() && (bytes[len] == b'e' || bytes[len] == b'E') {
            len += 1;
            if len < bytes.len() && (bytes[len] == b'+' || bytes[len] == b'-') {
                len += 1;
            }
            while len < bytes.len() && bytes[len].is_ascii_digit() {
                len += 1;
            }
        }
        let literal = &rest[..len];
        let value: f64 = literal.parse().map_err(|_| PhenotypeError::MalformedExpression {
            position: start,
            message: format!("bad numeric literal `{literal}`"),
        })?;
        self.pos += len;
        Ok(Node::Constant(value))
    }
}
