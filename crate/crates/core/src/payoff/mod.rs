//! Scalar payoff expressions over path increments.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' INTEGER)?
//! primary := NUMBER | VAR | CALL | '(' expr ')'
//! CALL    := ('abs' | 'max' | 'min' | 'pow' | 'exp') '(' expr (',' expr)* ')'
//! VAR     := 'x' INDEX            (INDEX >= 1)
//! ```
//!
//! `exp` is only admitted when [`ParseOptions::allow_exp`] is set, keeping
//! payoffs in the polynomial-growth class by default.

mod lipschitz;
mod parse;

use std::fmt;

pub use lipschitz::{check_lip_poly, LipschitzCertificate, LipschitzOptions, SampleBox};
pub use parse::ParseOptions;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Max,
    Min,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Max => "max",
            Func::Min => "min",
            Func::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// One-based variable index.
    Var(usize),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Call(Func, Vec<Node>),
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_ADD,
            Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_MUL,
            Node::Neg(_) => PREC_NEG,
            Node::Pow(..) => 4,
            Node::Const(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
        }
    }

    fn max_var(&self) -> usize {
        match self {
            Node::Const(_) => 0,
            Node::Var(i) => *i,
            Node::Neg(a) | Node::Pow(a, _) => a.max_var(),
            Node::Binary(_, a, b) => a.max_var().max(b.max_var()),
            Node::Call(_, args) => args.iter().map(Node::max_var).max().unwrap_or(0),
        }
    }

    fn uses_exp(&self) -> bool {
        match self {
            Node::Const(_) | Node::Var(_) => false,
            Node::Neg(a) | Node::Pow(a, _) => a.uses_exp(),
            Node::Binary(_, a, b) => a.uses_exp() || b.uses_exp(),
            Node::Call(f, args) => *f == Func::Exp || args.iter().any(Node::uses_exp),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Node::Const(c) => *c,
            Node::Var(i) => x[*i - 1],
            Node::Neg(a) => -a.eval(x)?,
            Node::Binary(op, a, b) => {
                let (l, r) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l * r,
                    BinaryOp::Div => {
                        if r == 0.0 {
                            return Err(Error::DivisionByZero(self.to_string()));
                        }
                        l / r
                    }
                }
            }
            Node::Pow(a, n) => a.eval(x)?.powi(*n as i32),
            Node::Call(f, args) => {
                let mut vals = args.iter().map(|a| a.eval(x));
                match f {
                    Func::Abs => vals.next().unwrap()?.abs(),
                    Func::Exp => vals.next().unwrap()?.exp(),
                    Func::Max => vals.try_fold(f64::NEG_INFINITY, |m, v| v.map(|v| m.max(v)))?,
                    Func::Min => vals.try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))?,
                }
            }
        })
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => write!(f, "x{i}"),
            Node::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, PREC_NEG)
            }
            Node::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinaryOp::Add => ("+", PREC_ADD),
                    BinaryOp::Sub => ("-", PREC_ADD),
                    BinaryOp::Mul => ("*", PREC_MUL),
                    BinaryOp::Div => ("/", PREC_MUL),
                };
                a.write_child(f, prec)?;
                write!(f, " {sym} ")?;
                b.write_child(f, prec + 1)
            }
            Node::Pow(a, n) => {
                a.write_child(f, PREC_ATOM)?;
                write!(f, "^{n}")
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A parsed payoff `phi(x1, ..., xm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffExpr {
    root: Node,
    arity: usize,
}

impl PayoffExpr {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &ParseOptions::default())
    }

    pub fn parse_with(text: &str, options: &ParseOptions) -> Result<Self> {
        let root = parse::parse(text, options)?;
        if root.uses_exp() {
            log::warn!("payoff `{text}` uses exp(); outside the polynomial-growth class");
        }
        Ok(Self::from_node(root))
    }

    pub fn from_node(root: Node) -> Self {
        let arity = root.max_var().max(1);
        Self { root, arity }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Number of input variables (at least the highest index used, at least one).
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Widen the declared arity so the expression can sit in a higher-dimensional functional.
    /// Highest variable index used; 0 for constant expressions.
    pub fn max_var(&self) -> usize {
        self.root.max_var()
    }

    pub fn with_arity(mut self, arity: usize) -> Result<Self> {
        if arity < self.root.max_var() || arity == 0 {
            return Err(Error::Arity {
                needed: self.root.max_var(),
                got: arity,
            });
        }
        self.arity = arity;
        Ok(self)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.root.max_var() {
            return Err(Error::Arity {
                needed: self.root.max_var(),
                got: x.len(),
            });
        }
        self.root.eval(x)
    }

    /// `-phi`
    pub fn negated(&self) -> Self {
        Self {
            root: Node::Neg(Box::new(self.root.clone())),
            arity: self.arity,
        }
    }
}

impl fmt::Display for PayoffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for PayoffExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Parse payoff text with default options.
pub fn parse(text: &str) -> Result<PayoffExpr> {
    PayoffExpr::parse(text)
}

/// Evaluate a payoff on an increment vector.
pub fn eval(expr: &PayoffExpr, increments: &[f64]) -> Result<f64> {
    expr.eval(increments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var(i: usize) -> Box<Node> {
        Box::new(Node::Var(i))
    }

    #[test]
    fn parses_square() {
        let e = parse("x1^2").unwrap();
        assert_eq!(e.root(), &Node::Pow(var(1), 2));
        assert_eq!(e.arity(), 1);
    }

    #[test]
    fn parses_call_payoff() {
        let e = parse("max(x1 - 0.5, 0)").unwrap();
        assert_eq!(
            e.root(),
            &Node::Call(
                Func::Max,
                vec![
                    Node::Binary(BinaryOp::Sub, var(1), Box::new(Node::Const(0.5))),
                    Node::Const(0.0)
                ]
            )
        );
    }

    #[test]
    fn parses_two_variables() {
        let e = parse("x1*x2 - abs(x1)").unwrap();
        assert_eq!(e.arity(), 2);
        assert_eq!(
            e.root(),
            &Node::Binary(
                BinaryOp::Sub,
                Box::new(Node::Binary(BinaryOp::Mul, var(1), var(2))),
                Box::new(Node::Call(Func::Abs, vec![Node::Var(1)]))
            )
        );
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let a = parse("-x1^2").unwrap();
        let b = parse("-(x1^2)").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.eval(&[3.0]).unwrap(), -9.0);
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(eval(&parse("x1^2").unwrap(), &[3.0]).unwrap(), 9.0);
        assert_eq!(eval(&parse("max(x1-0.5,0)").unwrap(), &[0.2]).unwrap(), 0.0);
        assert_eq!(eval(&parse("x1*x2").unwrap(), &[2.0, -1.5]).unwrap(), -3.0);
        assert_eq!(eval(&parse("pow(x1, 3)").unwrap(), &[-2.0]).unwrap(), -8.0);
        assert_eq!(eval(&parse("min(x1, x2, 0.5)").unwrap(), &[2.0, 1.0]).unwrap(), 0.5);
        assert_eq!(eval(&parse("7").unwrap(), &[0.0]).unwrap(), 7.0);
        assert_eq!(eval(&parse("1e-3 * 2").unwrap(), &[0.0]).unwrap(), 0.002);
    }

    #[test]
    fn division_by_zero_names_subexpression() {
        let e = parse("1 + 1/(x1 - 2)").unwrap();
        match e.eval(&[2.0]) {
            Err(Error::DivisionByZero(sub)) => assert_eq!(sub, "1 / (x1 - 2)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!((e.eval(&[3.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn short_input_is_an_arity_error() {
        let e = parse("x1 + x3").unwrap();
        assert_eq!(e.arity(), 3);
        assert!(matches!(e.eval(&[1.0, 2.0]), Err(Error::Arity { needed: 3, got: 2 })));
    }

    #[test]
    fn widening_arity() {
        let e = parse("x1").unwrap().with_arity(3).unwrap();
        assert_eq!(e.arity(), 3);
        assert!(parse("x2").unwrap().with_arity(1).is_err());
    }

    /// Hand-evaluated corpus.
    #[test]
    fn corpus_matches_hand_evaluation() {
        let x = [1.5, -2.0, 0.25];
        let (a, b, c) = (x[0], x[1], x[2]);
        let corpus: Vec<(&str, f64)> = vec![
            ("x1", a),
            ("-x2", -b),
            ("x1 + x2 * x3", a + b * c),
            ("(x1 + x2) * x3", (a + b) * c),
            ("x1 - x2 - x3", a - b - c),
            ("x1 - (x2 - x3)", a - (b - c)),
            ("x1 / x2 / x3", a / b / c),
            ("x1 / (x2 / x3)", a / (b / c)),
            ("x1^3", a * a * a),
            ("(x1 + x2)^2", (a + b) * (a + b)),
            ("-x2^2", -(b * b)),
            ("(-x2)^2", b * b),
            ("abs(x2)", b.abs()),
            ("max(x1 - 0.5, 0)", (a - 0.5f64).max(0.0)),
            ("min(x1, x2)", a.min(b)),
            ("max(x1, x2, x3)", a),
            ("pow(x2, 4)", b.powi(4)),
            ("x1 * x2 - abs(x1)", a * b - a.abs()),
            ("2 * x1^2 - 3 * x1 + 1", 2.0 * a * a - 3.0 * a + 1.0),
            ("--x1", a),
        ];
        assert_eq!(corpus.len(), 20);
        for (text, want) in corpus {
            let got = parse(text).unwrap().eval(&x).unwrap();
            assert_eq!(got, want, "{text}");
        }
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|c| Node::Const(c as f64 / 8.0)),
            (1usize..4).prop_map(Node::Var),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                (inner.clone(), inner.clone(), 0usize..4).prop_map(|(a, b, op)| {
                    let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div][op];
                    Node::Binary(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), 0u32..5).prop_map(|(a, n)| Node::Pow(Box::new(a), n)),
                inner.clone().prop_map(|a| Node::Call(Func::Abs, vec![a])),
                prop::collection::vec(inner, 2..4).prop_map(|args| Node::Call(Func::Max, args)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(node in arb_node()) {
            let expr = PayoffExpr::from_node(node);
            let printed = expr.to_string();
            let reparsed = PayoffExpr::parse(&printed).unwrap();
            prop_assert_eq!(reparsed.root(), expr.root(), "{}", printed);
        }
    }
}
