use serde::{Deserialize, Serialize};

use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Pragma(Span),
    Import(Span),
    Contract(Contract),
    /// A definition outside any contract (free function, constant, struct, ...).
    Part(Part),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractKind {
    Contract,
    AbstractContract,
    Interface,
    Library,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub kind: ContractKind,
    pub name: String,
    pub span: Span,
    pub bases: Vec<String>,
    pub parts: Vec<Part>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub span: Span,
    pub kind: PartKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartKind {
    Function(FunctionInfo),
    Modifier(ModifierInfo),
    StateVar(StateVarInfo),
    Event(EventInfo),
    /// Structs, enums, errors, `using` directives, user-defined value types.
    Other { keyword: String, name: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierInvocation {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub type_text: String,
    pub name: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionInfo {
    pub kind: FunctionKind,
    /// Declared name; `constructor`, `fallback` or `receive` for the special
    /// functions, and the empty string for a pre-0.6 unnamed fallback.
    pub name: String,
    /// Enclosing contract, `None` for free functions.
    pub contract: Option<String>,
    pub span: Span,
    /// From the leading keyword through the last header token.
    pub header_span: Span,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub visibility: Option<Visibility>,
    pub mutability: Option<String>,
    pub modifiers: Vec<ModifierInvocation>,
    pub body: Option<Block>,
}

impl FunctionInfo {
    pub fn is_constructor(&self) -> bool {
        self.kind == FunctionKind::Constructor
    }

    /// Span of the body including braces; empty (at the `;`) without a body.
    pub fn body_span(&self) -> Span {
        match &self.body {
            Some(b) => b.span,
            None => Span::empty(self.span.end),
        }
    }

    pub fn signature_text<'a>(&self, src: &'a str) -> &'a str {
        self.header_span.slice(src)
    }

    pub fn modifier_names(&self) -> impl Iterator<Item = &str> {
        self.modifiers.iter().map(|m| m.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierInfo {
    pub name: String,
    pub contract: Option<String>,
    pub span: Span,
    pub header_span: Span,
    pub body: Option<Block>,
}

impl ModifierInfo {
    pub fn body_span(&self) -> Span {
        match &self.body {
            Some(b) => b.span,
            None => Span::empty(self.span.end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVarInfo {
    pub name: String,
    pub type_text: String,
    pub contract: Option<String>,
    pub declaration_span: Span,
    pub constant: bool,
    pub initializer: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventInfo {
    pub name: String,
    pub contract: Option<String>,
    pub declaration_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub span: Span,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Block(Block),
    Unchecked(Block),
    Expr(Expr),
    VarDecl { names: Vec<Option<String>>, init: Option<Expr> },
    If { cond: Expr, then: Box<Stmt>, otherwise: Option<Box<Stmt>> },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, post: Option<Expr>, body: Box<Stmt> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    Return(Option<Expr>),
    Emit(Expr),
    Revert(Expr),
    Throw,
    Break,
    Continue,
    /// The `_;` placeholder inside modifier bodies.
    Placeholder,
    /// Inline assembly, kept as an opaque span.
    Assembly,
    Try { expr: Expr, body: Block, catches: Vec<Block> },
}

impl Stmt {
    /// Pre-order traversal over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::Block(b) | StmtKind::Unchecked(b) => b.stmts.iter().for_each(|s| s.walk(f)),
            StmtKind::If { then, otherwise, .. } => {
                then.walk(f);
                if let Some(o) = otherwise {
                    o.walk(f);
                }
            }
            StmtKind::For { init, body, .. } => {
                if let Some(i) = init {
                    i.walk(f);
                }
                body.walk(f);
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => body.walk(f),
            StmtKind::Try { body, catches, .. } => {
                body.stmts.iter().for_each(|s| s.walk(f));
                for c in catches {
                    c.stmts.iter().for_each(|s| s.walk(f));
                }
            }
            _ => {}
        }
    }

    /// Expressions owned directly by this statement (not by nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Expr(e) | StmtKind::Emit(e) | StmtKind::Revert(e) => vec![e],
            StmtKind::VarDecl { init, .. } => init.iter().collect(),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => vec![cond],
            StmtKind::For { cond, post, .. } => cond.iter().chain(post.iter()).collect(),
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Try { expr, .. } => vec![expr],
            _ => Vec::new(),
        }
    }

    /// Whether control never falls through the end of this statement.
    pub fn always_exits(&self) -> bool {
        match &self.kind {
            StmtKind::Return(_) | StmtKind::Throw | StmtKind::Revert(_) => true,
            StmtKind::Expr(e) => e.is_revert_call(),
            StmtKind::Block(b) | StmtKind::Unchecked(b) => b.always_exits(),
            StmtKind::If { then, otherwise: Some(o), .. } => then.always_exits() && o.always_exits(),
            _ => false,
        }
    }
}

impl Block {
    pub fn always_exits(&self) -> bool {
        self.stmts.iter().any(Stmt::always_exits)
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        self.stmts.iter().for_each(|s| s.walk(f));
    }

    /// Every expression in the block, nested sub-expressions included.
    pub fn walk_exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        self.walk(&mut |s| {
            for e in s.own_exprs() {
                e.walk(f);
            }
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Ident(String),
    Number { text: String, unit: Option<String> },
    Bool(bool),
    /// Raw literal text including quotes (and `hex`/`unicode` prefixes).
    Str(String),
    Member { base: Box<Expr>, member: String },
    Index { base: Box<Expr>, index: Option<Box<Expr>> },
    Slice { base: Box<Expr>, from: Option<Box<Expr>>, to: Option<Box<Expr>> },
    Call { callee: Box<Expr>, args: Vec<Expr>, names: Vec<String> },
    CallOptions { callee: Box<Expr>, options: Vec<(String, Expr)> },
    Unary { op: String, operand: Box<Expr>, prefix: bool },
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Assign { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Paren(Box<Expr>),
    Tuple(Vec<Option<Expr>>),
    Array(Vec<Expr>),
    New(String),
}

impl Expr {
    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Member { base, .. } => base.walk(f),
            ExprKind::Index { base, index } => {
                base.walk(f);
                if let Some(i) = index {
                    i.walk(f);
                }
            }
            ExprKind::Slice { base, from, to } => {
                base.walk(f);
                from.iter().chain(to.iter()).for_each(|e| e.walk(f));
            }
            ExprKind::Call { callee, args, .. } => {
                callee.walk(f);
                args.iter().for_each(|a| a.walk(f));
            }
            ExprKind::CallOptions { callee, options } => {
                callee.walk(f);
                options.iter().for_each(|(_, e)| e.walk(f));
            }
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Ternary { cond, then, otherwise } => {
                cond.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
            ExprKind::Paren(e) => e.walk(f),
            ExprKind::Tuple(items) => items.iter().flatten().for_each(|e| e.walk(f)),
            ExprKind::Array(items) => items.iter().for_each(|e| e.walk(f)),
            ExprKind::Ident(_) | ExprKind::Number { .. } | ExprKind::Bool(_) | ExprKind::Str(_) | ExprKind::New(_) => {}
        }
    }

    pub fn as_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(name) => Some(name),
            _ => None,
        }
    }

    /// Strips any number of enclosing parentheses.
    pub fn unparen(&self) -> &Expr {
        match &self.kind {
            ExprKind::Paren(inner) => inner.unparen(),
            _ => self,
        }
    }

    /// A call of the built-in `revert(...)`.
    pub fn is_revert_call(&self) -> bool {
        matches!(&self.kind, ExprKind::Call { callee, .. } if callee.as_ident() == Some("revert"))
    }
}
