//! Recursive-descent parser for the layout-free concrete syntax.
//!
//! Grammar notes (the syntax this implementation fixes):
//! - function definition bodies are always brace blocks: `f x = { ... }`;
//! - case arms are introduced by `|`; an arm body is a single statement or
//!   a brace block;
//! - constructor applications consume exactly the constructor's declared
//!   arity, so data/type declarations must precede signatures and sharing
//!   clauses that mention their constructors;
//! - `!x` inside an application argument list marks a mutable argument;
//!   a `!x ...` suffix after a parenthesized call (or after an update's
//!   right-hand side) is a trailing annotation list;
//! - a `*` at operand position is a dereference; after a complete operand
//!   a tight `*` (no space, followed by an identifier, `!` or `(`)
//!   continues the application with a dereference argument, while a
//!   spaced `*` is multiplication.

use crate::ast::*;
use crate::diag::{Code, Diagnostic};
use crate::lexer::tokenize;
use crate::span::{NodeId, Span};
use crate::token::{Kw, TokKind, Token};
use std::collections::HashMap;

pub struct ParseResult {
    pub program: Program,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse(source: &str) -> ParseResult {
    let tokens = match tokenize(source) {
        Ok(t) => t,
        Err(d) => {
            return ParseResult { program: Program::default(), diagnostics: vec![d] };
        }
    };
    let mut p = Parser::new(tokens);
    let program = p.parse_program();
    ParseResult { program, diagnostics: p.diags }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    next_id: u32,
    type_arities: HashMap<String, usize>,
    ctor_arities: HashMap<String, usize>,
}

type PResult<T> = Result<T, ()>;

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        let mut type_arities = HashMap::new();
        for (name, n) in [("Int", 0), ("Bool", 0), ("List", 1), ("Ref", 1), ("Io", 0)] {
            type_arities.insert(name.to_string(), n);
        }
        let mut ctor_arities = HashMap::new();
        for (name, n) in [("Nil", 0), ("Cons", 2), ("True", 0), ("False", 0)] {
            ctor_arities.insert(name.to_string(), n);
        }
        Parser { toks, pos: 0, diags: Vec::new(), next_id: 0, type_arities, ctor_arities }
    }

    fn fresh_id(&mut self) -> NodeId {
        self.next_id += 1;
        NodeId(self.next_id)
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn peek_kind(&self) -> Option<&TokKind> {
        self.peek().map(|t| &t.kind)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn last_span(&self) -> Span {
        if self.toks.is_empty() {
            Span::default()
        } else if self.pos < self.toks.len() {
            self.toks[self.pos].span
        } else {
            self.toks[self.toks.len() - 1].span
        }
    }

    fn error_here(&mut self, msg: impl Into<String>) {
        let span = self.last_span();
        self.diags.push(Diagnostic::error(Code::E001, span, msg.into()));
    }

    fn expect(&mut self, kind: &TokKind, what: &str) -> PResult<Span> {
        match self.peek() {
            Some(t) if &t.kind == kind => Ok(self.advance().unwrap().span),
            Some(t) => {
                let found = t.kind.to_string();
                self.error_here(format!("expected {}, found `{}`", what, found));
                Err(())
            }
            None => {
                self.error_here(format!("expected {}, found end of input", what));
                Err(())
            }
        }
    }

    fn expect_star(&mut self, what: &str) -> PResult<Span> {
        match self.peek() {
            Some(Token { kind: TokKind::Star { .. }, .. }) => Ok(self.advance().unwrap().span),
            _ => {
                self.error_here(format!("expected {}", what));
                Err(())
            }
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Token { kind: TokKind::Ident(s), span }) => {
                let out = (s.clone(), *span);
                self.advance();
                Ok(out)
            }
            Some(t) => {
                let found = t.kind.to_string();
                self.error_here(format!("expected {}, found `{}`", what, found));
                Err(())
            }
            None => {
                self.error_here(format!("expected {}, found end of input", what));
                Err(())
            }
        }
    }

    fn expect_ctor_name(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Token { kind: TokKind::CtorName(s), span }) => {
                let out = (s.clone(), *span);
                self.advance();
                Ok(out)
            }
            _ => {
                self.error_here(format!("expected {}", what));
                Err(())
            }
        }
    }

    fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: Kw) -> bool {
        self.eat(&TokKind::Kw(kw))
    }

    // ---- program ----

    fn parse_program(&mut self) -> Program {
        let mut program = Program::default();
        while !self.at_eof() {
            let before = self.pos;
            if self.parse_top_decl(&mut program).is_err() {
                self.recover_to_decl_boundary();
            }
            if self.pos == before {
                // Defensive: always make progress.
                self.advance();
            }
        }
        program
    }

    fn parse_top_decl(&mut self, program: &mut Program) -> PResult<()> {
        match self.peek_kind() {
            Some(TokKind::Kw(Kw::Data)) => {
                let d = self.parse_data_decl()?;
                program.data_decls.push(d);
                Ok(())
            }
            Some(TokKind::Kw(Kw::Type)) => {
                let a = self.parse_type_alias()?;
                program.type_aliases.push(a);
                Ok(())
            }
            Some(TokKind::Kw(Kw::Renaming)) => {
                let r = self.parse_renaming()?;
                program.renamings.push(r);
                Ok(())
            }
            Some(TokKind::Bang) => {
                let d = self.parse_state_var_decl()?;
                program.state_vars.push(d);
                Ok(())
            }
            Some(TokKind::Ident(_)) => {
                if matches!(self.peek_at(1).map(|t| &t.kind), Some(TokKind::DoubleColon)) {
                    let s = self.parse_signature()?;
                    program.signatures.push(s);
                } else {
                    let d = self.parse_function_def()?;
                    program.defs.push(d);
                }
                Ok(())
            }
            Some(other) => {
                let found = other.to_string();
                self.error_here(format!("expected a declaration, found `{}`", found));
                Err(())
            }
            None => Ok(()),
        }
    }

    fn recover_to_decl_boundary(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match &t.kind {
                TokKind::LBrace => depth += 1,
                TokKind::RBrace => {
                    depth = depth.saturating_sub(1);
                    self.advance();
                    if depth == 0 {
                        return;
                    }
                    continue;
                }
                TokKind::Kw(Kw::Data) | TokKind::Kw(Kw::Type) | TokKind::Kw(Kw::Renaming)
                    if depth == 0 =>
                {
                    return;
                }
                TokKind::Bang if depth == 0 => {
                    if matches!(self.peek_at(1).map(|t| &t.kind), Some(TokKind::Ident(_)))
                        && matches!(self.peek_at(2).map(|t| &t.kind), Some(TokKind::DoubleColon))
                    {
                        return;
                    }
                }
                TokKind::Ident(_) if depth == 0 => {
                    if matches!(self.peek_at(1).map(|t| &t.kind), Some(TokKind::DoubleColon)) {
                        return;
                    }
                }
                _ => {}
            }
            self.advance();
        }
    }

    // ---- declarations ----

    fn parse_data_decl(&mut self) -> PResult<DataDecl> {
        let start = self.expect(&TokKind::Kw(Kw::Data), "`data`")?;
        let (name, _) = self.expect_ctor_name("a type name after `data`")?;
        let mut params = Vec::new();
        while let Some(TokKind::Ident(_)) = self.peek_kind() {
            let (p, _) = self.expect_ident("type parameter")?;
            params.push(p);
        }
        // Register the head before the constructors so recursion works.
        self.type_arities.insert(name.clone(), params.len());
        self.expect(&TokKind::Equals, "`=` in data declaration")?;
        let mut ctors = Vec::new();
        loop {
            let ctor = self.parse_ctor_decl(&params)?;
            self.ctor_arities.insert(ctor.name.clone(), ctor.args.len());
            ctors.push(ctor);
            if !self.eat(&TokKind::Pipe) {
                break;
            }
        }
        let span = start.merge(ctors.last().map(|c| c.span).unwrap_or(start));
        Ok(DataDecl { name, params, ctors, span })
    }

    fn parse_ctor_decl(&mut self, params: &[String]) -> PResult<CtorDecl> {
        let (name, name_span) = self.expect_ctor_name("a constructor name")?;
        let mut args = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokKind::CtorName(_)) => {
                    let (n, sp) = self.expect_ctor_name("type")?;
                    args.push(TypeAst { kind: TypeAstKind::App(n, Vec::new()), span: sp });
                }
                // A lowercase identifier is a type variable only if it is a
                // declared head parameter; anything else starts the next
                // top-level declaration.
                Some(TokKind::Ident(id)) if params.iter().any(|p| p == id) => {
                    let (n, sp) = self.expect_ident("type variable")?;
                    args.push(TypeAst { kind: TypeAstKind::Var(n), span: sp });
                }
                Some(TokKind::LParen) => {
                    let t = self.parse_paren_type()?;
                    args.push(t);
                }
                _ => break,
            }
        }
        let span = name_span.merge(args.last().map(|a| a.span).unwrap_or(name_span));
        Ok(CtorDecl { name, args, span })
    }

    fn parse_type_alias(&mut self) -> PResult<TypeAlias> {
        let start = self.expect(&TokKind::Kw(Kw::Type), "`type`")?;
        let (name, _) = self.expect_ctor_name("an alias name after `type`")?;
        let mut params = Vec::new();
        while let Some(TokKind::Ident(_)) = self.peek_kind() {
            let (p, _) = self.expect_ident("type parameter")?;
            params.push(p);
        }
        self.type_arities.insert(name.clone(), params.len());
        self.expect(&TokKind::Equals, "`=` in type alias")?;
        let body = self.parse_type()?;
        let span = start.merge(body.span);
        Ok(TypeAlias { name, params, body, span })
    }

    fn parse_state_var_decl(&mut self) -> PResult<StateVarDecl> {
        let start = self.expect(&TokKind::Bang, "`!`")?;
        let (name, _) = self.expect_ident("a state variable name")?;
        self.expect(&TokKind::DoubleColon, "`::`")?;
        let ty = self.parse_type()?;
        let span = start.merge(ty.span);
        Ok(StateVarDecl { name, ty, span })
    }

    fn parse_signature(&mut self) -> PResult<Signature> {
        let (name, start) = self.expect_ident("a function name")?;
        self.expect(&TokKind::DoubleColon, "`::`")?;
        let ty = self.parse_type()?;
        let sharing = if matches!(self.peek_kind(), Some(TokKind::Kw(Kw::Sharing))) {
            Some(self.parse_sharing_clause()?)
        } else {
            None
        };
        let mut implicits = Vec::new();
        while self.eat_kw(Kw::Implicit) {
            let mode = match self.peek_kind() {
                Some(TokKind::Kw(Kw::Ro)) => Mode::Ro,
                Some(TokKind::Kw(Kw::Wo)) => Mode::Wo,
                Some(TokKind::Kw(Kw::Rw)) => Mode::Rw,
                _ => {
                    self.error_here("expected `ro`, `wo` or `rw` after `implicit`");
                    return Err(());
                }
            };
            self.advance();
            let (sv, sv_span) = self.expect_ident("a state variable name")?;
            implicits.push((sv, mode, sv_span));
        }
        let span = start.merge(ty.span);
        Ok(Signature { name, ty, sharing, implicits, span })
    }

    fn parse_sharing_clause(&mut self) -> PResult<SharingClause> {
        let start = self.expect(&TokKind::Kw(Kw::Sharing), "`sharing`")?;
        let (fn_name, _) = self.expect_ident("the function name in the sharing pattern")?;
        let mut args = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokKind::Bang) => {
                    let bang = self.advance().unwrap().span;
                    let (n, sp) = self.expect_ident("an argument name after `!`")?;
                    args.push(ShareArg { name: n, mutable: true, span: bang.merge(sp) });
                }
                Some(TokKind::Ident(_)) => {
                    let (n, sp) = self.expect_ident("an argument name")?;
                    args.push(ShareArg { name: n, mutable: false, span: sp });
                }
                _ => break,
            }
        }
        self.expect(&TokKind::Equals, "`=` in sharing pattern")?;
        let (result, _) = self.expect_ident("the result name in the sharing pattern")?;
        self.expect(&TokKind::Kw(Kw::Pre), "`pre`")?;
        let pre = self.parse_share_spec(false)?;
        self.expect(&TokKind::Kw(Kw::Post), "`post`")?;
        let post = self.parse_share_spec(true)?;
        Ok(SharingClause { fn_name, args, result, pre, post, span: start })
    }

    fn parse_share_spec(&mut self, is_post: bool) -> PResult<ShareSpec> {
        match self.peek_kind() {
            Some(TokKind::Kw(Kw::Nosharing)) => {
                self.advance();
                Ok(ShareSpec::NoSharing)
            }
            Some(TokKind::Kw(Kw::Inferred)) => {
                if !is_post {
                    self.error_here("`inferred` is only valid as a postcondition");
                    return Err(());
                }
                self.advance();
                Ok(ShareSpec::Inferred)
            }
            _ => {
                let mut eqs = Vec::new();
                loop {
                    let (lhs, lhs_span) = self.expect_ident("a variable name in sharing equation")?;
                    self.expect(&TokKind::Equals, "`=` in sharing equation")?;
                    if is_post && matches!(self.peek_kind(), Some(TokKind::Kw(Kw::Inferred))) {
                        self.advance();
                        if !eqs.is_empty() {
                            self.error_here("`inferred` cannot be mixed with equations");
                            return Err(());
                        }
                        // `post r = inferred` is the same as `post inferred`.
                        return Ok(ShareSpec::Inferred);
                    }
                    let rhs = self.parse_share_term()?;
                    eqs.push(ShareEq { lhs, rhs, span: lhs_span });
                    if !self.eat(&TokKind::Comma) {
                        break;
                    }
                }
                Ok(ShareSpec::Equations(eqs))
            }
        }
    }

    fn parse_share_term(&mut self) -> PResult<ShareTerm> {
        match self.peek_kind() {
            Some(TokKind::Kw(Kw::Abstract)) => {
                self.advance();
                Ok(ShareTerm::Abstract)
            }
            Some(TokKind::Star { .. }) => {
                self.advance();
                let (n, _) = self.expect_ident("a variable after `*`")?;
                Ok(ShareTerm::Deref(n))
            }
            Some(TokKind::Ident(_)) => {
                let (n, _) = self.expect_ident("a variable")?;
                Ok(ShareTerm::Var(n))
            }
            Some(TokKind::CtorName(_)) => {
                let (name, _) = self.expect_ctor_name("a constructor")?;
                let arity = match self.ctor_arities.get(&name) {
                    Some(a) => *a,
                    None => {
                        self.error_here(format!(
                            "unknown constructor `{}` in sharing declaration",
                            name
                        ));
                        return Err(());
                    }
                };
                let mut args = Vec::new();
                for _ in 0..arity {
                    args.push(self.parse_share_atom()?);
                }
                Ok(ShareTerm::Ctor(name, args))
            }
            _ => {
                self.error_here("expected a sharing term");
                Err(())
            }
        }
    }

    fn parse_share_atom(&mut self) -> PResult<ShareTerm> {
        match self.peek_kind() {
            Some(TokKind::LParen) => {
                self.advance();
                let t = self.parse_share_term()?;
                self.expect(&TokKind::RParen, "`)`")?;
                Ok(t)
            }
            _ => self.parse_share_term_simple(),
        }
    }

    fn parse_share_term_simple(&mut self) -> PResult<ShareTerm> {
        match self.peek_kind() {
            Some(TokKind::Kw(Kw::Abstract)) => {
                self.advance();
                Ok(ShareTerm::Abstract)
            }
            Some(TokKind::Star { .. }) => {
                self.advance();
                let (n, _) = self.expect_ident("a variable after `*`")?;
                Ok(ShareTerm::Deref(n))
            }
            Some(TokKind::Ident(_)) => {
                let (n, _) = self.expect_ident("a variable")?;
                Ok(ShareTerm::Var(n))
            }
            Some(TokKind::CtorName(_)) => {
                // Nullary constructor in atom position.
                let (name, _) = self.expect_ctor_name("a constructor")?;
                match self.ctor_arities.get(&name) {
                    Some(0) => Ok(ShareTerm::Ctor(name, Vec::new())),
                    Some(_) => {
                        self.error_here(format!(
                            "constructor `{}` takes arguments and must be parenthesized here",
                            name
                        ));
                        Err(())
                    }
                    None => {
                        self.error_here(format!("unknown constructor `{}`", name));
                        Err(())
                    }
                }
            }
            _ => {
                self.error_here("expected a sharing term");
                Err(())
            }
        }
    }

    fn parse_renaming(&mut self) -> PResult<RenamingDecl> {
        let start = self.expect(&TokKind::Kw(Kw::Renaming), "`renaming`")?;
        let bindings = self.parse_renaming_bindings()?;
        if bindings.is_empty() {
            self.error_here("a `renaming` declaration needs at least one binding");
            return Err(());
        }
        let with_bindings = if self.eat_kw(Kw::With) {
            let ws = self.parse_renaming_bindings()?;
            if ws.is_empty() {
                self.error_here("`with` needs at least one binding");
                return Err(());
            }
            ws
        } else {
            Vec::new()
        };
        Ok(RenamingDecl { bindings, with_bindings, span: start })
    }

    fn parse_renaming_bindings(&mut self) -> PResult<Vec<(String, String, Span)>> {
        let mut out = Vec::new();
        loop {
            // A binding is `new = old` where old is an identifier; a nullary
            // definition `f = {` must not be consumed.
            let is_binding = matches!(self.peek_kind(), Some(TokKind::Ident(_)))
                && matches!(self.peek_at(1).map(|t| &t.kind), Some(TokKind::Equals))
                && matches!(self.peek_at(2).map(|t| &t.kind), Some(TokKind::Ident(_)));
            if !is_binding {
                break;
            }
            let (new, sp) = self.expect_ident("a new name")?;
            self.expect(&TokKind::Equals, "`=`")?;
            let (old, _) = self.expect_ident("an existing name")?;
            out.push((new, old, sp));
        }
        Ok(out)
    }

    fn parse_function_def(&mut self) -> PResult<FunctionDef> {
        let (name, start) = self.expect_ident("a function name")?;
        let mut params = Vec::new();
        while let Some(TokKind::Ident(_)) = self.peek_kind() {
            let (p, sp) = self.expect_ident("a parameter")?;
            params.push((p, sp));
        }
        self.expect(&TokKind::Equals, "`=` in function definition")?;
        let body = self.parse_block()?;
        let id = self.fresh_id();
        let span = start.merge(body.span);
        Ok(FunctionDef { name, params, body, span, id })
    }

    // ---- types ----

    fn parse_type(&mut self) -> PResult<TypeAst> {
        let lhs = self.parse_btype()?;
        if self.eat(&TokKind::Arrow) {
            let rhs = self.parse_type()?;
            let span = lhs.span.merge(rhs.span);
            Ok(TypeAst { kind: TypeAstKind::Fun(Box::new(lhs), Box::new(rhs), None), span })
        } else {
            Ok(lhs)
        }
    }

    fn parse_btype(&mut self) -> PResult<TypeAst> {
        match self.peek_kind() {
            Some(TokKind::CtorName(name)) => {
                let name = name.clone();
                let arity = match self.type_arities.get(&name) {
                    Some(a) => *a,
                    None => {
                        self.error_here(format!(
                            "unknown type `{}` (types must be declared before use in signatures)",
                            name
                        ));
                        return Err(());
                    }
                };
                let (_, name_span) = self.expect_ctor_name("type")?;
                let mut args = Vec::new();
                for _ in 0..arity {
                    args.push(self.parse_atype()?);
                }
                let span = name_span.merge(args.last().map(|a| a.span).unwrap_or(name_span));
                Ok(TypeAst { kind: TypeAstKind::App(name, args), span })
            }
            _ => self.parse_atype(),
        }
    }

    fn parse_atype(&mut self) -> PResult<TypeAst> {
        match self.peek_kind() {
            Some(TokKind::Ident(_)) => {
                let (n, sp) = self.expect_ident("type variable")?;
                Ok(TypeAst { kind: TypeAstKind::Var(n), span: sp })
            }
            Some(TokKind::CtorName(name)) => {
                let name = name.clone();
                match self.type_arities.get(&name) {
                    Some(0) => {
                        let (_, sp) = self.expect_ctor_name("type")?;
                        Ok(TypeAst { kind: TypeAstKind::App(name, Vec::new()), span: sp })
                    }
                    Some(n) => {
                        let arity = *n;
                        self.error_here(format!(
                            "type `{}` expects {} argument(s); parenthesize the application",
                            name, arity
                        ));
                        Err(())
                    }
                    None => {
                        self.error_here(format!("unknown type `{}`", name));
                        Err(())
                    }
                }
            }
            Some(TokKind::LParen) => self.parse_paren_type(),
            _ => {
                self.error_here("expected a type");
                Err(())
            }
        }
    }

    fn parse_paren_type(&mut self) -> PResult<TypeAst> {
        let start = self.expect(&TokKind::LParen, "`(`")?;
        if let Some(TokKind::RParen) = self.peek_kind() {
            let end = self.advance().unwrap().span;
            return Ok(TypeAst { kind: TypeAstKind::Unit, span: start.merge(end) });
        }
        let mut ty = self.parse_type()?;
        if matches!(self.peek_kind(), Some(TokKind::Kw(Kw::Sharing))) {
            let clause = self.parse_sharing_clause()?;
            match &mut ty.kind {
                TypeAstKind::Fun(_, _, annot) => *annot = Some(Box::new(clause)),
                _ => {
                    self.error_here("a sharing clause here requires a function type");
                    return Err(());
                }
            }
        }
        let end = self.expect(&TokKind::RParen, "`)`")?;
        ty.span = start.merge(end);
        Ok(ty)
    }

    // ---- statements and expressions ----

    fn parse_block(&mut self) -> PResult<Expr> {
        let start = self.expect(&TokKind::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        if !matches!(self.peek_kind(), Some(TokKind::RBrace)) {
            loop {
                let stmt = self.parse_stmt()?;
                stmts.push(stmt);
                if !self.eat(&TokKind::Semi) {
                    break;
                }
            }
        }
        let end = self.expect(&TokKind::RBrace, "`}` or `;`")?;
        let id = self.fresh_id();
        Ok(Expr { kind: ExprKind::Block(stmts), span: start.merge(end), id })
    }

    fn parse_stmt(&mut self) -> PResult<Stmt> {
        match self.peek_kind() {
            Some(TokKind::Star { .. }) => {
                match self.peek_at(1).map(|t| &t.kind) {
                    Some(TokKind::Bang) => self.parse_update_stmt(),
                    Some(TokKind::Ident(_))
                        if matches!(self.peek_at(2).map(|t| &t.kind), Some(TokKind::Equals)) =>
                    {
                        // *x = e
                        let star = self.expect_star("`*`")?;
                        let (name, name_span) = self.expect_ident("a variable")?;
                        self.expect(&TokKind::Equals, "`=`")?;
                        let value = self.parse_expr()?;
                        let id = self.fresh_id();
                        let span = star.merge(value.span);
                        Ok(Stmt { kind: StmtKind::RefBind { name, name_span, value }, span, id })
                    }
                    _ => {
                        let e = self.parse_expr()?;
                        let id = self.fresh_id();
                        let span = e.span;
                        Ok(Stmt { kind: StmtKind::Expr(e), span, id })
                    }
                }
            }
            Some(TokKind::Ident(_))
                if matches!(self.peek_at(1).map(|t| &t.kind), Some(TokKind::Equals)) =>
            {
                let (name, name_span) = self.expect_ident("a variable")?;
                self.expect(&TokKind::Equals, "`=`")?;
                let value = self.parse_expr()?;
                let id = self.fresh_id();
                let span = name_span.merge(value.span);
                Ok(Stmt { kind: StmtKind::Let { name, name_span, value }, span, id })
            }
            _ => {
                let e = self.parse_expr()?;
                let id = self.fresh_id();
                let span = e.span;
                Ok(Stmt { kind: StmtKind::Expr(e), span, id })
            }
        }
    }

    fn parse_update_stmt(&mut self) -> PResult<Stmt> {
        let star = self.expect_star("`*`")?;
        self.expect(&TokKind::Bang, "`!`")?;
        let (target, target_span) = self.expect_ident("a reference variable")?;
        self.expect(&TokKind::Assign, "`:=`")?;
        let value = self.parse_expr_no_marks()?;
        let annots = self.parse_annots()?;
        let id = self.fresh_id();
        let span = star.merge(annots.last().map(|a| a.span).unwrap_or(value.span));
        Ok(Stmt { kind: StmtKind::Update { target, target_span, value, annots }, span, id })
    }

    fn parse_annots(&mut self) -> PResult<Vec<Annot>> {
        let mut out = Vec::new();
        while matches!(self.peek_kind(), Some(TokKind::Bang)) {
            let bang = self.advance().unwrap().span;
            let (name, sp) = self.expect_ident("a variable after `!`")?;
            out.push(Annot { name, span: bang.merge(sp) });
        }
        Ok(out)
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        self.parse_expr_inner(true)
    }

    /// Update right-hand sides: application arguments may not carry `!`
    /// marks, so a `!` ends the expression and starts the annotation list.
    fn parse_expr_no_marks(&mut self) -> PResult<Expr> {
        self.parse_expr_inner(false)
    }

    fn parse_expr_inner(&mut self, marks: bool) -> PResult<Expr> {
        match self.peek_kind() {
            Some(TokKind::Kw(Kw::If)) => self.parse_if(),
            Some(TokKind::Kw(Kw::Case)) => self.parse_case(),
            Some(TokKind::Bang) => self.parse_state_call(),
            _ => self.parse_cast_expr(marks),
        }
    }

    fn parse_if(&mut self) -> PResult<Expr> {
        let start = self.expect(&TokKind::Kw(Kw::If), "`if`")?;
        let cond = self.parse_expr()?;
        self.expect(&TokKind::Kw(Kw::Then), "`then`")?;
        let then_branch = self.parse_branch()?;
        self.expect(&TokKind::Kw(Kw::Else), "`else`")?;
        let else_branch = self.parse_branch()?;
        let id = self.fresh_id();
        let span = start.merge(else_branch.span);
        Ok(Expr {
            kind: ExprKind::If {
                cond: Box::new(cond),
                then_branch: Box::new(then_branch),
                else_branch: Box::new(else_branch),
            },
            span,
            id,
        })
    }

    fn parse_branch(&mut self) -> PResult<Expr> {
        if matches!(self.peek_kind(), Some(TokKind::LBrace)) {
            self.parse_block()
        } else {
            self.parse_expr()
        }
    }

    fn parse_case(&mut self) -> PResult<Expr> {
        let start = self.expect(&TokKind::Kw(Kw::Case), "`case`")?;
        let scrutinee = self.parse_expr()?;
        self.expect(&TokKind::Kw(Kw::Of), "`of`")?;
        let mut arms = Vec::new();
        while self.eat(&TokKind::Pipe) {
            arms.push(self.parse_arm()?);
        }
        if arms.is_empty() {
            self.error_here("`case` needs at least one `|` arm");
            return Err(());
        }
        let id = self.fresh_id();
        let span = start.merge(arms.last().unwrap().span);
        Ok(Expr { kind: ExprKind::Case { scrutinee: Box::new(scrutinee), arms }, span, id })
    }

    fn parse_arm(&mut self) -> PResult<Arm> {
        let parenthesized = self.eat(&TokKind::LParen);
        let (ctor, ctor_span) = self.expect_ctor_name("a constructor pattern")?;
        let arity = match self.ctor_arities.get(&ctor) {
            Some(a) => *a,
            None => {
                self.diags.push(Diagnostic::error(
                    Code::E001,
                    ctor_span,
                    format!("unknown constructor `{}` in pattern", ctor),
                ));
                return Err(());
            }
        };
        let mut binders = Vec::new();
        for _ in 0..arity {
            match self.peek_kind() {
                Some(TokKind::Underscore) => {
                    let sp = self.advance().unwrap().span;
                    binders.push(Binder::Wild(sp));
                }
                Some(TokKind::Star { .. }) => {
                    let star = self.advance().unwrap().span;
                    let (n, sp) = self.expect_ident("a variable after `*` in pattern")?;
                    binders.push(Binder::Deref(n, star.merge(sp)));
                }
                Some(TokKind::Ident(_)) => {
                    let (n, sp) = self.expect_ident("a pattern variable")?;
                    binders.push(Binder::Var(n, sp));
                }
                _ => {
                    self.error_here(format!(
                        "constructor `{}` expects {} pattern binder(s)",
                        ctor, arity
                    ));
                    return Err(());
                }
            }
        }
        // Binder names within one pattern must be distinct.
        for i in 0..binders.len() {
            for j in (i + 1)..binders.len() {
                if let (Some(a), Some(b)) = (binders[i].name(), binders[j].name()) {
                    if a == b {
                        self.diags.push(Diagnostic::error(
                            Code::E001,
                            ctor_span,
                            format!("pattern binds `{}` more than once", a),
                        ));
                        return Err(());
                    }
                }
            }
        }
        if parenthesized {
            self.expect(&TokKind::RParen, "`)` after pattern")?;
        }
        self.expect(&TokKind::Arrow, "`->` after pattern")?;
        let body = if matches!(self.peek_kind(), Some(TokKind::LBrace)) {
            self.parse_block()?
        } else {
            let stmt = self.parse_stmt()?;
            let id = self.fresh_id();
            let span = stmt.span;
            Expr { kind: ExprKind::Block(vec![stmt]), span, id }
        };
        let span = ctor_span.merge(body.span);
        Ok(Arm { ctor, ctor_span, binders, body, span })
    }

    fn parse_state_call(&mut self) -> PResult<Expr> {
        let start = self.expect(&TokKind::Bang, "`!`")?;
        let (name, name_span) = self.expect_ident("a function name after `!`")?;
        let callee = Expr {
            kind: ExprKind::Var(name),
            span: name_span,
            id: self.fresh_id(),
        };
        let args = self.parse_app_args(true, false)?;
        let id = self.fresh_id();
        let span = start.merge(args.last().map(|a| a.expr.span).unwrap_or(name_span));
        Ok(Expr {
            kind: ExprKind::Call { callee: Box::new(callee), args, annots: Vec::new(), state_call: true },
            span,
            id,
        })
    }

    fn parse_cast_expr(&mut self, marks: bool) -> PResult<Expr> {
        let e = self.parse_cmp_expr(marks)?;
        if self.eat(&TokKind::DoubleColon) {
            let ty = self.parse_type()?;
            let id = self.fresh_id();
            let span = e.span.merge(ty.span);
            Ok(Expr { kind: ExprKind::Cast { expr: Box::new(e), ty }, span, id })
        } else {
            Ok(e)
        }
    }

    fn parse_cmp_expr(&mut self, marks: bool) -> PResult<Expr> {
        let lhs = self.parse_add_expr(marks)?;
        let op = match self.peek_kind() {
            Some(TokKind::Le) => Some(BinOp::Le),
            Some(TokKind::Lt) => Some(BinOp::Lt),
            Some(TokKind::EqEq) => Some(BinOp::Eq),
            Some(TokKind::Ge) => Some(BinOp::Ge),
            Some(TokKind::Gt) => Some(BinOp::Gt),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let rhs = self.parse_add_expr(marks)?;
            let id = self.fresh_id();
            let span = lhs.span.merge(rhs.span);
            Ok(Expr { kind: ExprKind::Binop { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span, id })
        } else {
            Ok(lhs)
        }
    }

    fn parse_add_expr(&mut self, marks: bool) -> PResult<Expr> {
        let mut lhs = self.parse_mul_expr(marks)?;
        loop {
            let op = match self.peek_kind() {
                Some(TokKind::Plus) => BinOp::Add,
                Some(TokKind::Minus) => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_mul_expr(marks)?;
            let id = self.fresh_id();
            let span = lhs.span.merge(rhs.span);
            lhs = Expr { kind: ExprKind::Binop { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span, id };
        }
        Ok(lhs)
    }

    fn parse_mul_expr(&mut self, marks: bool) -> PResult<Expr> {
        let mut lhs = self.parse_app_expr(marks)?;
        loop {
            let op = match self.peek_kind() {
                Some(TokKind::Star { tight: false }) => BinOp::Mul,
                Some(TokKind::Ident(id)) if id == "div" => BinOp::Div,
                Some(TokKind::Ident(id)) if id == "mod" => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_app_expr(marks)?;
            let id = self.fresh_id();
            let span = lhs.span.merge(rhs.span);
            lhs = Expr { kind: ExprKind::Binop { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span, id };
        }
        Ok(lhs)
    }

    /// Application: `head arg*`. Constructor heads consume exactly their
    /// arity. A head followed by no arguments stays an atom.
    fn parse_app_expr(&mut self, marks: bool) -> PResult<Expr> {
        if let Some(TokKind::CtorName(_)) = self.peek_kind() {
            return self.parse_ctor_app();
        }
        let head_parenthesized = matches!(self.peek_kind(), Some(TokKind::LParen));
        let head = self.parse_atom()?;
        let args = self.parse_app_args(marks, head_parenthesized)?;
        // Trailing annotations attach to a parenthesized call.
        let annots = if head_parenthesized && args.is_empty() && self.bang_run_is_trailing() {
            self.parse_annots()?
        } else {
            Vec::new()
        };
        if args.is_empty() && annots.is_empty() {
            return Ok(head);
        }
        if !annots.is_empty() {
            // `(f a) !x !y` — annotations on the inner call.
            if let ExprKind::Call { .. } = &head.kind {
                let mut call = head;
                if let ExprKind::Call { annots: a, .. } = &mut call.kind {
                    *a = annots;
                }
                return Ok(call);
            }
            self.diags.push(Diagnostic::error(
                Code::E001,
                head.span,
                "trailing `!` annotations require a function call",
            ));
            return Err(());
        }
        let id = self.fresh_id();
        let span = head.span.merge(args.last().map(|a| a.expr.span).unwrap_or(head.span));
        Ok(Expr {
            kind: ExprKind::Call { callee: Box::new(head), args, annots: Vec::new(), state_call: false },
            span,
            id,
        })
    }

    /// True when the upcoming `!x !y ...` run is not followed by another
    /// argument atom (then it is an annotation list, not marked arguments).
    fn bang_run_is_trailing(&self) -> bool {
        if !matches!(self.peek_kind(), Some(TokKind::Bang)) {
            return false;
        }
        let mut i = self.pos;
        while matches!(self.toks.get(i).map(|t| &t.kind), Some(TokKind::Bang))
            && matches!(self.toks.get(i + 1).map(|t| &t.kind), Some(TokKind::Ident(_)))
        {
            i += 2;
        }
        !matches!(
            self.toks.get(i).map(|t| &t.kind),
            Some(
                TokKind::Ident(_)
                    | TokKind::IntLit(_)
                    | TokKind::CtorName(_)
                    | TokKind::LParen
                    | TokKind::Star { tight: true }
            )
        )
    }

    fn parse_ctor_app(&mut self) -> PResult<Expr> {
        let (name, name_span) = self.expect_ctor_name("a constructor")?;
        let arity = self.ctor_arities.get(&name).copied();
        let mut args = Vec::new();
        match arity {
            Some(n) => {
                for _ in 0..n {
                    let a = self.parse_arg_atom()?;
                    args.push(a);
                }
            }
            None => {
                // Unknown constructor: leave argument-less; the type checker
                // reports it.
            }
        }
        let id = self.fresh_id();
        let span = name_span.merge(args.last().map(|a: &Expr| a.span).unwrap_or(name_span));
        Ok(Expr { kind: ExprKind::Ctor { name, args }, span, id })
    }

    fn parse_app_args(&mut self, marks: bool, head_parenthesized: bool) -> PResult<Vec<Arg>> {
        let mut args = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokKind::Bang) if marks => {
                    // After a parenthesized head a trailing `!x ...` run is
                    // an annotation list, left for the caller.
                    if head_parenthesized && self.bang_run_is_trailing() {
                        break;
                    }
                    let bang = self.advance().unwrap().span;
                    let e = self.parse_arg_atom()?;
                    args.push(Arg { expr: e, marked: true, mark_span: Some(bang) });
                }
                Some(TokKind::Ident(id)) if id == "div" || id == "mod" => break,
                Some(
                    TokKind::Ident(_)
                    | TokKind::IntLit(_)
                    | TokKind::CtorName(_)
                    | TokKind::LParen,
                ) => {
                    let e = self.parse_arg_atom()?;
                    args.push(Arg { expr: e, marked: false, mark_span: None });
                }
                Some(TokKind::Star { tight: true }) => {
                    let e = self.parse_arg_atom()?;
                    args.push(Arg { expr: e, marked: false, mark_span: None });
                }
                _ => break,
            }
        }
        Ok(args)
    }

    fn parse_arg_atom(&mut self) -> PResult<Expr> {
        match self.peek_kind() {
            Some(TokKind::CtorName(_)) => {
                let (name, sp) = self.expect_ctor_name("a constructor")?;
                match self.ctor_arities.get(&name).copied() {
                    Some(0) | None => {
                        let id = self.fresh_id();
                        Ok(Expr { kind: ExprKind::Ctor { name, args: Vec::new() }, span: sp, id })
                    }
                    Some(_) => {
                        // Applied constructors as arguments read better
                        // parenthesized, but exact arity keeps this
                        // unambiguous, so allow it.
                        self.pos -= 1;
                        self.parse_ctor_app()
                    }
                }
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_atom(&mut self) -> PResult<Expr> {
        match self.peek_kind().cloned() {
            Some(TokKind::IntLit(n)) => {
                let sp = self.advance().unwrap().span;
                let id = self.fresh_id();
                Ok(Expr { kind: ExprKind::IntLit(n), span: sp, id })
            }
            Some(TokKind::Ident(name)) => {
                let sp = self.advance().unwrap().span;
                let id = self.fresh_id();
                Ok(Expr { kind: ExprKind::Var(name), span: sp, id })
            }
            Some(TokKind::CtorName(_)) => self.parse_ctor_app(),
            Some(TokKind::Star { .. }) => {
                let star = self.advance().unwrap().span;
                let (n, sp) = self.expect_ident("a variable after `*`")?;
                let id = self.fresh_id();
                Ok(Expr { kind: ExprKind::Deref(n), span: star.merge(sp), id })
            }
            Some(TokKind::LParen) => {
                let start = self.advance().unwrap().span;
                if let Some(TokKind::RParen) = self.peek_kind() {
                    let end = self.advance().unwrap().span;
                    let id = self.fresh_id();
                    return Ok(Expr { kind: ExprKind::Unit, span: start.merge(end), id });
                }
                let mut e = self.parse_expr()?;
                let end = self.expect(&TokKind::RParen, "`)`")?;
                e.span = start.merge(end);
                Ok(e)
            }
            Some(other) => {
                self.error_here(format!("expected an expression, found `{}`", other));
                Err(())
            }
            None => {
                self.error_here("expected an expression, found end of input");
                Err(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> Program {
        let r = parse(src);
        assert!(r.diagnostics.is_empty(), "unexpected diagnostics: {:?}", r.diagnostics);
        r.program
    }

    #[test]
    fn fig2_body_statement_shapes() {
        let src = "main w = {\n    x = 42;\n    *xp = x;\n    yp = xp;\n    y = *yp;\n    *!xp := 43 !yp;\n    z = *yp\n}\n";
        let p = parse_ok(src);
        let def = p.def("main").unwrap();
        let stmts = def.body.block_stmts();
        assert_eq!(stmts.len(), 6);
        assert!(matches!(stmts[0].kind, StmtKind::Let { .. }));
        assert!(matches!(stmts[1].kind, StmtKind::RefBind { .. }));
        assert!(matches!(stmts[2].kind, StmtKind::Let { .. }));
        assert!(matches!(stmts[3].kind, StmtKind::Let { .. }));
        match &stmts[4].kind {
            StmtKind::Update { target, annots, .. } => {
                assert_eq!(target, "xp");
                assert_eq!(annots.len(), 1);
                assert_eq!(annots[0].name, "yp");
            }
            other => panic!("expected update, got {:?}", other),
        }
        assert!(matches!(stmts[5].kind, StmtKind::Let { .. }));
    }

    #[test]
    fn state_var_decl() {
        let p = parse_ok("!nsum:: Ref Int\n");
        assert_eq!(p.state_vars.len(), 1);
        assert_eq!(p.state_vars[0].name, "nsum");
        match &p.state_vars[0].ty.kind {
            TypeAstKind::App(n, args) => {
                assert_eq!(n, "Ref");
                assert!(matches!(&args[0].kind, TypeAstKind::App(i, _) if i == "Int"));
            }
            other => panic!("expected Ref Int, got {:?}", other),
        }
    }

    #[test]
    fn renaming_with_empty_with_block() {
        let p = parse_ok("renaming foldlBST = foldl\n");
        assert_eq!(p.renamings.len(), 1);
        assert_eq!(p.renamings[0].bindings, vec![(
            "foldlBST".to_string(),
            "foldl".to_string(),
            p.renamings[0].bindings[0].2
        )]);
        assert!(p.renamings[0].with_bindings.is_empty());
    }

    #[test]
    fn renaming_with_with_block() {
        let src = "renaming\n    list_bst_concrete = list_bst_pure\n    bst_insert_concrete = bst_insert_pure\n    with\n    foldlBST = foldl\n";
        let p = parse_ok(src);
        assert_eq!(p.renamings[0].bindings.len(), 2);
        assert_eq!(p.renamings[0].with_bindings.len(), 1);
    }

    #[test]
    fn marked_args_and_trailing_annotations() {
        let src = "f tp x = {\n    (g !tp x) !yp!zp\n}\n";
        let p = parse_ok(src);
        let stmts = p.def("f").unwrap().body.block_stmts();
        match &stmts[0].kind {
            StmtKind::Expr(Expr { kind: ExprKind::Call { args, annots, .. }, .. }) => {
                assert_eq!(args.len(), 2);
                assert!(args[0].marked);
                assert!(!args[1].marked);
                let names: Vec<_> = annots.iter().map(|a| a.name.as_str()).collect();
                assert_eq!(names, vec!["yp", "zp"]);
            }
            other => panic!("expected call, got {:?}", other),
        }
    }

    #[test]
    fn trailing_marked_arg_on_bare_call() {
        let src = "f xc = {\n    g !xc\n}\n";
        let p = parse_ok(src);
        let stmts = p.def("f").unwrap().body.block_stmts();
        match &stmts[0].kind {
            StmtKind::Expr(Expr { kind: ExprKind::Call { args, annots, .. }, .. }) => {
                assert_eq!(args.len(), 1);
                assert!(args[0].marked);
                assert!(annots.is_empty());
            }
            other => panic!("expected call, got {:?}", other),
        }
    }

    #[test]
    fn case_with_deref_binders() {
        let src = "f tp x = {\n    case *tp of\n    | Empty -> 0\n    | (Node *lp n *rp) -> 1\n}\ndata BST = Empty | Node BST Int BST\n";
        // Data decl after use in a pattern fails (arity unknown): declare first.
        let src2 = "data BST = Empty | Node BST Int BST\nf tp x = {\n    case *tp of\n    | Empty -> 0\n    | (Node *lp n *rp) -> 1\n}\n";
        assert!(!parse(src).diagnostics.is_empty());
        let p = parse_ok(src2);
        let stmts = p.def("f").unwrap().body.block_stmts();
        match &stmts[0].kind {
            StmtKind::Expr(Expr { kind: ExprKind::Case { arms, .. }, .. }) => {
                assert_eq!(arms.len(), 2);
                assert!(matches!(arms[1].binders[0], Binder::Deref(..)));
                assert!(matches!(arms[1].binders[1], Binder::Var(..)));
            }
            other => panic!("expected case, got {:?}", other),
        }
    }

    #[test]
    fn multiplication_vs_deref() {
        let p = parse_ok("f a b = {\n    a * b\n}\n");
        let stmts = p.def("f").unwrap().body.block_stmts();
        assert!(matches!(
            &stmts[0].kind,
            StmtKind::Expr(Expr { kind: ExprKind::Binop { op: BinOp::Mul, .. }, .. })
        ));
        let p = parse_ok("g f b = {\n    f *b\n}\n");
        let stmts = p.def("g").unwrap().body.block_stmts();
        match &stmts[0].kind {
            StmtKind::Expr(Expr { kind: ExprKind::Call { args, .. }, .. }) => {
                assert!(matches!(&args[0].expr.kind, ExprKind::Deref(n) if n == "b"));
            }
            other => panic!("expected call with deref arg, got {:?}", other),
        }
    }

    #[test]
    fn sharing_clause_on_signature() {
        let src = "data Cord = Leaf (List Int) | Branch Cord Cord\ncord_list_a:: Cord -> Ref (List Int) -> Ref (List Int)\n    sharing cord_list_a !xc !np0 = np\n    pre xc = Leaf *np0\n    post np = np0\n";
        let p = parse_ok(src);
        let sig = p.signature("cord_list_a").unwrap();
        let cl = sig.sharing.as_ref().unwrap();
        assert!(cl.args[0].mutable && cl.args[1].mutable);
        assert_eq!(cl.result, "np");
        match &cl.pre {
            ShareSpec::Equations(eqs) => {
                assert_eq!(eqs.len(), 1);
                assert_eq!(eqs[0].lhs, "xc");
                assert!(matches!(&eqs[0].rhs, ShareTerm::Ctor(n, args)
                    if n == "Leaf" && matches!(&args[0], ShareTerm::Deref(d) if d == "np0")));
            }
            other => panic!("expected equations, got {:?}", other),
        }
    }

    #[test]
    fn post_inferred() {
        let src = "data Cord = Leaf (List Int) | Branch Cord Cord\ncord_app_list:: Cord -> List Int -> Cord\n    sharing cord_app_list xc xs = xc1\n    pre nosharing\n    post xc1 = inferred\n";
        let p = parse_ok(src);
        let sig = p.signature("cord_app_list").unwrap();
        assert!(matches!(sig.sharing.as_ref().unwrap().post, ShareSpec::Inferred));
    }

    #[test]
    fn higher_order_signature_with_embedded_clause() {
        let src = "foldl_du:: (Ref Int -> Int -> ()\n        sharing f !xtp x = v\n        pre nosharing\n        post nosharing\n    ) -> Ref Int -> List Int -> ()\n    sharing foldl_du f !xtp1 xs = v\n    pre nosharing\n    post nosharing\n";
        let p = parse_ok(src);
        let sig = p.signature("foldl_du").unwrap();
        match &sig.ty.kind {
            TypeAstKind::Fun(arg, _, _) => match &arg.kind {
                TypeAstKind::Fun(_, _, annot) => assert!(annot.is_some()),
                other => panic!("expected annotated function type, got {:?}", other),
            },
            other => panic!("expected function type, got {:?}", other),
        }
    }

    #[test]
    fn state_call_stmt() {
        let p = parse_ok("f t = {\n    !init_nsum 0;\n    !bst_sum_sv t;\n    *nsum\n}\n");
        let stmts = p.def("f").unwrap().body.block_stmts();
        assert!(matches!(
            &stmts[0].kind,
            StmtKind::Expr(Expr { kind: ExprKind::Call { state_call: true, .. }, .. })
        ));
        assert!(matches!(&stmts[2].kind, StmtKind::Expr(Expr { kind: ExprKind::Deref(_), .. })));
    }

    #[test]
    fn empty_program_parses() {
        let p = parse_ok("");
        assert!(p.defs.is_empty());
    }

    #[test]
    fn error_has_expected_token_message() {
        let r = parse("data = X\n");
        assert!(!r.diagnostics.is_empty());
        assert_eq!(r.diagnostics[0].code, Code::E001);
        assert!(r.diagnostics[0].message.contains("expected"));
    }
}
