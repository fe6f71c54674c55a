use std::collections::HashMap;

use super::Span;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// `&&` and `||` fix the order of their operands; every other operator
    /// leaves it unspecified.
    pub fn is_sequencing(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "!",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    /// Source text with whitespace runs collapsed; used as the event name.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Str(String),
    Bool(bool),
    Var(String),
    Assign(String, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Call(String, Vec<Expr>),
    Comma(Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Whether evaluating this node records an expression event. Plain
    /// variable reads do not.
    pub fn emits_event(&self) -> bool {
        !matches!(self.kind, ExprKind::Var(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Expr(Expr),
    VarDecl(String, Option<Expr>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    While(Expr, Box<Stmt>),
    Return(Option<Expr>),
    Break,
    Labeled { label: String, label_span: Span, body: Box<Stmt> },
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Global {
    pub name: String,
    pub init: Option<Value>,
    pub span: Span,
}

/// A parsed and checked MiniC program.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniProgram {
    pub name: String,
    pub source: String,
    pub globals: Vec<Global>,
    pub functions: Vec<FunctionDef>,
    index: HashMap<String, usize>,
}

impl MiniProgram {
    pub(crate) fn new(name: String, source: String, globals: Vec<Global>, functions: Vec<FunctionDef>) -> MiniProgram {
        let index = functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        MiniProgram { name, source, globals, functions, index }
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.index.get(name).map(|&i| &self.functions[i])
    }

    pub fn main(&self) -> &FunctionDef {
        self.function("main").expect("checked programs have main")
    }

    /// Exact source text of a node and its 1-based line.
    pub fn node_source(&self, span: Span) -> (&str, u32) {
        (&self.source[span.start..span.end], span.line)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.globals.iter().any(|g| g.name == name)
    }
}

/// Names of the built-in functions with their arity (`None` is variadic).
pub const BUILTINS: [(&str, Option<usize>); 6] = [
    ("print", None),
    ("strlen", Some(1)),
    ("getline", Some(0)),
    ("substr", Some(3)),
    ("char_at", Some(2)),
    ("to_str", Some(1)),
];

pub fn builtin_arity(name: &str) -> Option<Option<usize>> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|&(_, a)| a)
}
