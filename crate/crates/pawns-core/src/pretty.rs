//! Canonical source-form printer. Printing a parsed program and re-parsing
//! it yields a structurally identical AST (span-ignoring).

use crate::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.data_decls {
        out.push_str(&print_data_decl(d));
        out.push('\n');
    }
    for a in &p.type_aliases {
        out.push_str(&format!("type {}{} = {}\n", a.name, params_str(&a.params), print_type(&a.body)));
    }
    for sv in &p.state_vars {
        out.push_str(&format!("!{}:: {}\n", sv.name, print_type(&sv.ty)));
    }
    for s in &p.signatures {
        out.push_str(&print_signature(s));
    }
    for r in &p.renamings {
        out.push_str("renaming\n");
        for (new, old, _) in &r.bindings {
            out.push_str(&format!("    {} = {}\n", new, old));
        }
        if !r.with_bindings.is_empty() {
            out.push_str("    with\n");
            for (new, old, _) in &r.with_bindings {
                out.push_str(&format!("    {} = {}\n", new, old));
            }
        }
    }
    for d in &p.defs {
        out.push_str(&print_def(d));
        out.push('\n');
    }
    out
}

fn params_str(params: &[String]) -> String {
    params.iter().map(|p| format!(" {}", p)).collect()
}

fn print_data_decl(d: &DataDecl) -> String {
    let ctors: Vec<String> = d
        .ctors
        .iter()
        .map(|c| {
            let args: String = c.args.iter().map(|a| format!(" {}", print_atype(a))).collect();
            format!("{}{}", c.name, args)
        })
        .collect();
    format!("data {}{} = {}", d.name, params_str(&d.params), ctors.join(" | "))
}

fn print_signature(s: &Signature) -> String {
    let mut out = format!("{}:: {}\n", s.name, print_type(&s.ty));
    if let Some(cl) = &s.sharing {
        out.push_str(&print_clause(cl, 4));
    }
    for (sv, mode, _) in &s.implicits {
        out.push_str(&format!("    implicit {} {}\n", mode.as_str(), sv));
    }
    out
}

fn print_clause(cl: &SharingClause, indent: usize) -> String {
    let pad = " ".repeat(indent);
    let args: String = cl
        .args
        .iter()
        .map(|a| format!(" {}{}", if a.mutable { "!" } else { "" }, a.name))
        .collect();
    let mut out = format!("{}sharing {}{} = {}\n", pad, cl.fn_name, args, cl.result);
    out.push_str(&format!("{}pre {}\n", pad, print_spec(&cl.pre)));
    out.push_str(&format!("{}post {}\n", pad, print_spec(&cl.post)));
    out
}

fn print_spec(spec: &ShareSpec) -> String {
    match spec {
        ShareSpec::NoSharing => "nosharing".to_string(),
        ShareSpec::Inferred => "inferred".to_string(),
        ShareSpec::Equations(eqs) => eqs
            .iter()
            .map(|eq| format!("{} = {}", eq.lhs, print_share_term(&eq.rhs)))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn print_share_term(t: &ShareTerm) -> String {
    match t {
        ShareTerm::Var(v) => v.clone(),
        ShareTerm::Deref(v) => format!("*{}", v),
        ShareTerm::Abstract => "abstract".to_string(),
        ShareTerm::Ctor(name, args) => {
            let parts: Vec<String> = args
                .iter()
                .map(|a| match a {
                    ShareTerm::Ctor(_, inner) if !inner.is_empty() => {
                        format!("({})", print_share_term(a))
                    }
                    _ => print_share_term(a),
                })
                .collect();
            if parts.is_empty() {
                name.clone()
            } else {
                format!("{} {}", name, parts.join(" "))
            }
        }
    }
}

pub fn print_type(t: &TypeAst) -> String {
    match &t.kind {
        TypeAstKind::Var(v) => v.clone(),
        TypeAstKind::Unit => "()".to_string(),
        TypeAstKind::App(name, args) => {
            if args.is_empty() {
                name.clone()
            } else {
                let parts: Vec<String> = args.iter().map(print_atype).collect();
                format!("{} {}", name, parts.join(" "))
            }
        }
        TypeAstKind::Fun(a, r, annot) => {
            let lhs = match &a.kind {
                TypeAstKind::Fun(..) => format!("({})", print_type(a)),
                _ => print_type(a),
            };
            let body = format!("{} -> {}", lhs, print_type(r));
            match annot {
                Some(cl) => format!("({}\n{})", body, print_clause(cl, 8)),
                None => body,
            }
        }
    }
}

fn print_atype(t: &TypeAst) -> String {
    match &t.kind {
        TypeAstKind::App(_, args) if !args.is_empty() => format!("({})", print_type(t)),
        TypeAstKind::Fun(..) => format!("({})", print_type(t)),
        _ => print_type(t),
    }
}

fn print_def(d: &FunctionDef) -> String {
    let params: String = d.params.iter().map(|(p, _)| format!(" {}", p)).collect();
    format!("{}{} = {}", d.name, params, print_block(&d.body, 0))
}

fn print_block(e: &Expr, indent: usize) -> String {
    let stmts = e.block_stmts();
    let pad = " ".repeat(indent + 4);
    let mut out = "{\n".to_string();
    let lines: Vec<String> = stmts.iter().map(|s| format!("{}{}", pad, print_stmt(s, indent + 4))).collect();
    out.push_str(&lines.join(";\n"));
    out.push('\n');
    out.push_str(&format!("{}}}", " ".repeat(indent)));
    out
}

fn print_stmt(s: &Stmt, indent: usize) -> String {
    match &s.kind {
        StmtKind::Let { name, value, .. } => format!("{} = {}", name, print_expr(value, indent)),
        StmtKind::RefBind { name, value, .. } => format!("*{} = {}", name, print_expr(value, indent)),
        StmtKind::Update { target, value, annots, .. } => {
            let ann: String = annots.iter().map(|a| format!(" !{}", a.name)).collect();
            format!("*!{} := {}{}", target, print_expr(value, indent), ann)
        }
        StmtKind::Expr(e) => print_expr(e, indent),
    }
}

fn print_expr(e: &Expr, indent: usize) -> String {
    match &e.kind {
        ExprKind::Var(v) => v.clone(),
        ExprKind::IntLit(n) => n.to_string(),
        ExprKind::Unit => "()".to_string(),
        ExprKind::Deref(v) => format!("*{}", v),
        ExprKind::Ctor { name, args } => {
            if args.is_empty() {
                name.clone()
            } else {
                let parts: Vec<String> = args.iter().map(|a| print_operand(a, indent)).collect();
                format!("{} {}", name, parts.join(" "))
            }
        }
        ExprKind::Call { callee, args, annots, state_call } => {
            let head = match &callee.kind {
                ExprKind::Var(v) => {
                    if *state_call {
                        format!("!{}", v)
                    } else {
                        v.clone()
                    }
                }
                _ => format!("({})", print_expr(callee, indent)),
            };
            let parts: Vec<String> = args
                .iter()
                .map(|a| {
                    let inner = print_operand(&a.expr, indent);
                    if a.marked {
                        format!("!{}", inner)
                    } else {
                        inner
                    }
                })
                .collect();
            let call = if parts.is_empty() {
                head
            } else {
                format!("{} {}", head, parts.join(" "))
            };
            if annots.is_empty() {
                call
            } else {
                let ann: String = annots.iter().map(|a| format!(" !{}", a.name)).collect();
                format!("({}){}", call, ann)
            }
        }
        ExprKind::Binop { op, lhs, rhs } => {
            format!("{} {} {}", print_operand(lhs, indent), op.as_str(), print_operand(rhs, indent))
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            let t = print_branch(then_branch, indent);
            let f = print_branch(else_branch, indent);
            format!("if {} then {} else {}", print_expr(cond, indent), t, f)
        }
        ExprKind::Case { scrutinee, arms } => {
            let pad = " ".repeat(indent + 4);
            let mut out = format!("case {} of", print_expr(scrutinee, indent));
            for arm in arms {
                let binders: String = arm
                    .binders
                    .iter()
                    .map(|b| match b {
                        Binder::Var(n, _) => format!(" {}", n),
                        Binder::Wild(_) => " _".to_string(),
                        Binder::Deref(n, _) => format!(" *{}", n),
                    })
                    .collect();
                let pat = if arm.binders.is_empty() {
                    arm.ctor.clone()
                } else {
                    format!("({}{})", arm.ctor, binders)
                };
                out.push_str(&format!("\n{}| {} -> {}", pad, pat, print_arm_body(&arm.body, indent + 4)));
            }
            out
        }
        ExprKind::Cast { expr, ty } => {
            format!("{} :: {}", print_operand(expr, indent), print_type(ty))
        }
        ExprKind::Block(_) => print_block(e, indent),
    }
}

/// Single-statement arm bodies print bare; the parser re-wraps them.
fn print_arm_body(e: &Expr, indent: usize) -> String {
    let stmts = e.block_stmts();
    if stmts.len() == 1 {
        print_stmt(&stmts[0], indent)
    } else {
        print_block(e, indent)
    }
}

fn print_branch(e: &Expr, indent: usize) -> String {
    match &e.kind {
        ExprKind::Block(_) => print_block(e, indent),
        // Nested open forms need parens to bind correctly when re-parsed.
        ExprKind::If { .. } | ExprKind::Case { .. } => format!("({})", print_expr(e, indent)),
        _ => print_expr(e, indent),
    }
}

/// Operand position: parenthesize anything that is not atomic.
fn print_operand(e: &Expr, indent: usize) -> String {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::IntLit(_) | ExprKind::Unit | ExprKind::Deref(_) => {
            print_expr(e, indent)
        }
        ExprKind::Ctor { args, .. } if args.is_empty() => print_expr(e, indent),
        _ => format!("({})", print_expr(e, indent)),
    }
}
