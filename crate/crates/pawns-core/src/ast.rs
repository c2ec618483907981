//! Abstract syntax. Every statement and expression carries a span and a
//! `NodeId`; node ids key the side tables built by later passes (types,
//! sharing snapshots, the runtime alias oracle).

use crate::span::{NodeId, Span};

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Program {
    pub data_decls: Vec<DataDecl>,
    pub type_aliases: Vec<TypeAlias>,
    pub signatures: Vec<Signature>,
    pub state_vars: Vec<StateVarDecl>,
    pub renamings: Vec<RenamingDecl>,
    pub defs: Vec<FunctionDef>,
}

impl Program {
    pub fn signature(&self, name: &str) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.name == name)
    }

    pub fn def(&self, name: &str) -> Option<&FunctionDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVarDecl> {
        self.state_vars.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct DataDecl {
    pub name: String,
    pub params: Vec<String>,
    pub ctors: Vec<CtorDecl>,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct CtorDecl {
    pub name: String,
    pub args: Vec<TypeAst>,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TypeAlias {
    pub name: String,
    pub params: Vec<String>,
    pub body: TypeAst,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct StateVarDecl {
    pub name: String,
    pub ty: TypeAst,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Signature {
    pub name: String,
    pub ty: TypeAst,
    pub sharing: Option<SharingClause>,
    pub implicits: Vec<(String, Mode, Span)>,
    pub span: Span,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Ro,
    Wo,
    Rw,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ro => "ro",
            Mode::Wo => "wo",
            Mode::Rw => "rw",
        }
    }
}

/// `sharing f !a b = r` plus `pre`/`post` specs.
#[derive(Clone, PartialEq, Debug)]
pub struct SharingClause {
    pub fn_name: String,
    pub args: Vec<ShareArg>,
    pub result: String,
    pub pre: ShareSpec,
    pub post: ShareSpec,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ShareArg {
    pub name: String,
    pub mutable: bool,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub enum ShareSpec {
    NoSharing,
    /// Only valid in `post` position.
    Inferred,
    Equations(Vec<ShareEq>),
}

#[derive(Clone, PartialEq, Debug)]
pub struct ShareEq {
    pub lhs: String,
    pub rhs: ShareTerm,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub enum ShareTerm {
    Var(String),
    Deref(String),
    Abstract,
    Ctor(String, Vec<ShareTerm>),
}

#[derive(Clone, PartialEq, Debug)]
pub struct RenamingDecl {
    /// newName -> oldName definitions to create.
    pub bindings: Vec<(String, String, Span)>,
    /// calleeNew -> calleeOld call substitutions inside the copies.
    pub with_bindings: Vec<(String, String, Span)>,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<(String, Span)>,
    /// Always an `ExprKind::Block`.
    pub body: Expr,
    pub span: Span,
    pub id: NodeId,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TypeAst {
    pub kind: TypeAstKind,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub enum TypeAstKind {
    /// Lowercase identifier: a type variable.
    Var(String),
    /// Type constructor application (`Int`, `List a`, `Ref BST`, aliases).
    App(String, Vec<TypeAst>),
    Unit,
    /// `arg -> ret`, optionally carrying a sharing clause when written
    /// parenthesized inside a signature (higher-order contracts).
    Fun(Box<TypeAst>, Box<TypeAst>, Option<Box<SharingClause>>),
}

#[derive(Clone, PartialEq, Debug)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub id: NodeId,
}

#[derive(Clone, PartialEq, Debug)]
pub enum StmtKind {
    /// `x = e`
    Let { name: String, name_span: Span, value: Expr },
    /// `*x = e` — allocate a fresh cell, bind `x` to a ref to it. When `x`
    /// is a state variable this initialises its slot instead.
    RefBind { name: String, name_span: Span, value: Expr },
    /// `*!x := e !a1 ... !an`
    Update { target: String, target_span: Span, value: Expr, annots: Vec<Annot> },
    Expr(Expr),
}

#[derive(Clone, PartialEq, Debug)]
pub struct Annot {
    pub name: String,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    pub id: NodeId,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Arg {
    pub expr: Expr,
    pub marked: bool,
    pub mark_span: Option<Span>,
}

#[derive(Clone, PartialEq, Debug)]
pub enum ExprKind {
    Var(String),
    IntLit(i64),
    Unit,
    /// Constructor application, fully saturated.
    Ctor { name: String, args: Vec<Expr> },
    /// Function application; `state_call` when written `!f args`.
    Call { callee: Box<Expr>, args: Vec<Arg>, annots: Vec<Annot>, state_call: bool },
    Binop { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    If { cond: Box<Expr>, then_branch: Box<Expr>, else_branch: Box<Expr> },
    Case { scrutinee: Box<Expr>, arms: Vec<Arm> },
    /// `*x`
    Deref(String),
    Cast { expr: Box<Expr>, ty: TypeAst },
    Block(Vec<Stmt>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl BinOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Le => "<=",
            BinOp::Lt => "<",
            BinOp::Eq => "==",
            BinOp::Ge => ">=",
            BinOp::Gt => ">",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Le | BinOp::Lt | BinOp::Eq | BinOp::Ge | BinOp::Gt)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Arm {
    pub ctor: String,
    pub ctor_span: Span,
    pub binders: Vec<Binder>,
    /// Always an `ExprKind::Block`.
    pub body: Expr,
    pub span: Span,
}

#[derive(Clone, PartialEq, Debug)]
pub enum Binder {
    Var(String, Span),
    Wild(Span),
    /// `*x` — binds a ref to the matched constructor-argument cell.
    Deref(String, Span),
}

impl Binder {
    pub fn name(&self) -> Option<&str> {
        match self {
            Binder::Var(n, _) | Binder::Deref(n, _) => Some(n),
            Binder::Wild(_) => None,
        }
    }
}

impl Expr {
    /// Statements of a block body; panics if not a block (parser invariant).
    pub fn block_stmts(&self) -> &[Stmt] {
        match &self.kind {
            ExprKind::Block(stmts) => stmts,
            _ => panic!("expected block"),
        }
    }
}

/// Sets all spans and node ids to defaults; used by structural-equality
/// tests (parse/print round trips).
pub fn strip_spans(program: &mut Program) {
    for d in &mut program.data_decls {
        d.span = Span::default();
        for c in &mut d.ctors {
            c.span = Span::default();
            for a in &mut c.args {
                strip_type(a);
            }
        }
    }
    for a in &mut program.type_aliases {
        a.span = Span::default();
        strip_type(&mut a.body);
    }
    for s in &mut program.signatures {
        s.span = Span::default();
        strip_type(&mut s.ty);
        if let Some(cl) = &mut s.sharing {
            strip_clause(cl);
        }
        for (_, _, sp) in &mut s.implicits {
            *sp = Span::default();
        }
    }
    for s in &mut program.state_vars {
        s.span = Span::default();
        strip_type(&mut s.ty);
    }
    for r in &mut program.renamings {
        r.span = Span::default();
        for (_, _, sp) in &mut r.bindings {
            *sp = Span::default();
        }
        for (_, _, sp) in &mut r.with_bindings {
            *sp = Span::default();
        }
    }
    for d in &mut program.defs {
        d.span = Span::default();
        d.id = NodeId::default();
        for (_, sp) in &mut d.params {
            *sp = Span::default();
        }
        strip_expr(&mut d.body);
    }
}

fn strip_clause(cl: &mut SharingClause) {
    cl.span = Span::default();
    for a in &mut cl.args {
        a.span = Span::default();
    }
    strip_spec(&mut cl.pre);
    strip_spec(&mut cl.post);
}

fn strip_spec(spec: &mut ShareSpec) {
    if let ShareSpec::Equations(eqs) = spec {
        for eq in eqs {
            eq.span = Span::default();
        }
    }
}

fn strip_type(t: &mut TypeAst) {
    t.span = Span::default();
    match &mut t.kind {
        TypeAstKind::App(_, args) => args.iter_mut().for_each(strip_type),
        TypeAstKind::Fun(a, r, cl) => {
            strip_type(a);
            strip_type(r);
            if let Some(cl) = cl {
                strip_clause(cl);
            }
        }
        _ => {}
    }
}

fn strip_stmt(s: &mut Stmt) {
    s.span = Span::default();
    s.id = NodeId::default();
    match &mut s.kind {
        StmtKind::Let { name_span, value, .. } | StmtKind::RefBind { name_span, value, .. } => {
            *name_span = Span::default();
            strip_expr(value);
        }
        StmtKind::Update { target_span, value, annots, .. } => {
            *target_span = Span::default();
            strip_expr(value);
            for a in annots {
                a.span = Span::default();
            }
        }
        StmtKind::Expr(e) => strip_expr(e),
    }
}

fn strip_expr(e: &mut Expr) {
    e.span = Span::default();
    e.id = NodeId::default();
    match &mut e.kind {
        ExprKind::Ctor { args, .. } => args.iter_mut().for_each(strip_expr),
        ExprKind::Call { callee, args, annots, .. } => {
            strip_expr(callee);
            for a in args {
                strip_expr(&mut a.expr);
                a.mark_span = None;
            }
            for a in annots {
                a.span = Span::default();
            }
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            strip_expr(lhs);
            strip_expr(rhs);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            strip_expr(cond);
            strip_expr(then_branch);
            strip_expr(else_branch);
        }
        ExprKind::Case { scrutinee, arms } => {
            strip_expr(scrutinee);
            for arm in arms {
                arm.span = Span::default();
                arm.ctor_span = Span::default();
                for b in &mut arm.binders {
                    match b {
                        Binder::Var(_, sp) | Binder::Deref(_, sp) | Binder::Wild(sp) => {
                            *sp = Span::default()
                        }
                    }
                }
                strip_expr(&mut arm.body);
            }
        }
        ExprKind::Cast { expr, ty } => {
            strip_expr(expr);
            strip_type(ty);
        }
        ExprKind::Block(stmts) => stmts.iter_mut().for_each(strip_stmt),
        _ => {}
    }
}
