use crate::minic;
use crate::trace::EventKind;
use crate::value::Cast;

/// A parsed rule file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

/// `[WITHIN f] assertion SAY(..)* [ONFAIL SAY(..)+] ;`
#[derive(Debug, Clone)]
pub struct Rule {
    /// Function named by the enclosing `WITHIN` group.
    pub scope: Option<String>,
    pub body: Expr,
    /// One entry per `SAY(..)` clause emitted when the assertion holds.
    pub say: Vec<Vec<Expr>>,
    /// One entry per `SAY(..)` clause emitted when it fails.
    pub onfail: Vec<Vec<Expr>>,
    /// Line of the rule's first token.
    pub line: u32,
}

/// Equality ignores the source line so that reprinted rules compare equal.
impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.scope == other.scope && self.body == other.body && self.say == other.say && self.onfail == other.onfail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }
}

/// Assertions and trace expressions share one syntax.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Bool(bool),
    Int(i64),
    Str(String),
    /// A metavariable, evaluating to the event it is bound to.
    Var(String),
    Value(ValueAt),
    SourceText(String),
    Card(Box<Aggregate>),
    List(Box<Aggregate>),
    Quant(Box<Quantified>),
    Satisfies(Box<Expr>, PathExpr),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// `VALUE(cast)(AT M expr)`: the probe value recorded at the end of the
/// event bound to `M`.
#[derive(Debug, Clone)]
pub struct ValueAt {
    pub cast: Cast,
    pub metavar: String,
    pub expr: minic::Expr,
    /// Canonical rendering of `expr`; the key under which the probe is recorded.
    pub text: String,
}

impl PartialEq for ValueAt {
    fn eq(&self, other: &Self) -> bool {
        self.cast == other.cast && self.metavar == other.metavar && self.text == other.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Program,
    Metavar(String),
}

/// `kind [IS literal] [& context]`
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub kind: EventKind,
    /// Whitespace-normalized name the event must carry.
    pub is: Option<String>,
    pub context: Option<Box<Expr>>,
}

/// `[ALL] [M:] pattern FROM scope`, shared by quantifiers and aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub all: bool,
    pub metavar: Option<String>,
    pub pattern: Pattern,
    pub from: Scope,
}

/// `[ selection [APPLY expr] ]`
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub selection: Selection,
    pub apply: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    Foreach,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Exists => "EXISTS",
            Quantifier::Foreach => "FOREACH",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantified {
    pub quantifier: Quantifier,
    pub selection: Selection,
    /// Absent means the body is `TRUE`.
    pub body: Option<Expr>,
}

/// A regular expression whose letters are event patterns.
#[derive(Debug, Clone, PartialEq)]
pub enum PathExpr {
    Leaf(PathLeaf),
    Seq(Vec<PathExpr>),
    Alt(Vec<PathExpr>),
    Star(Box<PathExpr>),
    Plus(Box<PathExpr>),
    Opt(Box<PathExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathLeaf {
    pub metavar: Option<String>,
    pub pattern: Pattern,
}

impl Expr {
    /// Calls `f` on this expression and every sub-expression, including
    /// pattern contexts, APPLY clauses, quantifier bodies and path leaves.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Bool(_) | Expr::Int(_) | Expr::Str(_) | Expr::Var(_) | Expr::Value(_) | Expr::SourceText(_) => {}
            Expr::Card(agg) | Expr::List(agg) => agg.walk(f),
            Expr::Quant(q) => {
                q.selection.walk(f);
                if let Some(b) = &q.body {
                    b.walk(f);
                }
            }
            Expr::Satisfies(list, path) => {
                list.walk(f);
                path.walk(f);
            }
            Expr::Not(e) | Expr::Neg(e) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }
}

impl Selection {
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        if let Some(c) = &self.pattern.context {
            c.walk(f);
        }
    }
}

impl Aggregate {
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        self.selection.walk(f);
        if let Some(a) = &self.apply {
            a.walk(f);
        }
    }
}

impl PathExpr {
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        match self {
            PathExpr::Leaf(leaf) => {
                if let Some(c) = &leaf.pattern.context {
                    c.walk(f);
                }
            }
            PathExpr::Seq(items) | PathExpr::Alt(items) => items.iter().for_each(|p| p.walk(f)),
            PathExpr::Star(p) | PathExpr::Plus(p) | PathExpr::Opt(p) => p.walk(f),
        }
    }

    pub fn leaves(&self) -> Vec<&PathLeaf> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a PathExpr, out: &mut Vec<&'a PathLeaf>) {
            match p {
                PathExpr::Leaf(l) => out.push(l),
                PathExpr::Seq(items) | PathExpr::Alt(items) => items.iter().for_each(|p| go(p, out)),
                PathExpr::Star(p) | PathExpr::Plus(p) | PathExpr::Opt(p) => go(p, out),
            }
        }
        go(self, &mut out);
        out
    }
}
