//! Renaming expansion (`renaming new = old [with calleeNew = calleeOld]`):
//! duplicates existing definitions under new names, substituting calls, so
//! more specific signatures can be attached. Purely syntactic, performed
//! before type checking. Consumed declarations are removed, so expanding
//! an already-expanded program is the identity.

use crate::ast::*;
use crate::diag::{Code, Diagnostic};
use crate::span::NodeId;
use std::collections::{BTreeMap, BTreeSet};

pub fn expand_renamings(program: &mut Program, diags: &mut Vec<Diagnostic>) {
    if program.renamings.is_empty() {
        return;
    }
    let mut next_id = max_node_id(program) + 1;
    let renamings = std::mem::take(&mut program.renamings);
    for decl in renamings {
        // Call substitution: group bindings and with-bindings both map
        // old names to new names inside the copies. with-bindings do not
        // define anything themselves.
        let mut subst: BTreeMap<String, String> = BTreeMap::new();
        for (new, old, _) in decl.bindings.iter().chain(decl.with_bindings.iter()) {
            subst.insert(old.clone(), new.clone());
        }
        for (new, old, span) in &decl.bindings {
            let Some(original) = program.def(old).cloned() else {
                diags.push(Diagnostic::error(
                    Code::E001,
                    *span,
                    format!("renaming refers to `{}`, which is not defined", old),
                ));
                continue;
            };
            if program.def(new).is_some() {
                diags.push(Diagnostic::error(
                    Code::E001,
                    *span,
                    format!("renaming target `{}` is already defined", new),
                ));
                continue;
            }
            let mut copy = original;
            copy.name = new.clone();
            let params: BTreeSet<String> =
                copy.params.iter().map(|(p, _)| p.clone()).collect();
            substitute_expr(&mut copy.body, &subst, &params);
            renumber_expr(&mut copy.body, &mut next_id);
            copy.id = NodeId(next_id);
            next_id += 1;
            program.defs.push(copy);
        }
    }
}

/// Rewrites references to top-level functions; locally bound names shadow.
fn substitute_expr(e: &mut Expr, subst: &BTreeMap<String, String>, shadowed: &BTreeSet<String>) {
    match &mut e.kind {
        ExprKind::Var(n) => {
            if !shadowed.contains(n) {
                if let Some(new) = subst.get(n) {
                    *n = new.clone();
                }
            }
        }
        ExprKind::IntLit(_) | ExprKind::Unit | ExprKind::Deref(_) => {}
        ExprKind::Ctor { args, .. } => {
            for a in args {
                substitute_expr(a, subst, shadowed);
            }
        }
        ExprKind::Call { callee, args, .. } => {
            substitute_expr(callee, subst, shadowed);
            for a in args {
                substitute_expr(&mut a.expr, subst, shadowed);
            }
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            substitute_expr(lhs, subst, shadowed);
            substitute_expr(rhs, subst, shadowed);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            substitute_expr(cond, subst, shadowed);
            substitute_expr(then_branch, subst, shadowed);
            substitute_expr(else_branch, subst, shadowed);
        }
        ExprKind::Case { scrutinee, arms } => {
            substitute_expr(scrutinee, subst, shadowed);
            for arm in arms {
                let mut inner = shadowed.clone();
                for b in &arm.binders {
                    if let Some(n) = b.name() {
                        inner.insert(n.to_string());
                    }
                }
                substitute_expr(&mut arm.body, subst, &inner);
            }
        }
        ExprKind::Cast { expr, .. } => substitute_expr(expr, subst, shadowed),
        ExprKind::Block(stmts) => {
            let mut inner = shadowed.clone();
            for s in stmts {
                match &mut s.kind {
                    StmtKind::Let { name, value, .. } | StmtKind::RefBind { name, value, .. } => {
                        substitute_expr(value, subst, &inner);
                        inner.insert(name.clone());
                    }
                    StmtKind::Update { value, .. } => substitute_expr(value, subst, &inner),
                    StmtKind::Expr(e) => substitute_expr(e, subst, &inner),
                }
            }
        }
    }
}

fn max_node_id(program: &Program) -> u32 {
    let mut max = 0u32;
    for d in &program.defs {
        max = max.max(d.id.0);
        max_expr(&d.body, &mut max);
    }
    max
}

fn max_expr(e: &Expr, max: &mut u32) {
    *max = (*max).max(e.id.0);
    match &e.kind {
        ExprKind::Ctor { args, .. } => args.iter().for_each(|a| max_expr(a, max)),
        ExprKind::Call { callee, args, .. } => {
            max_expr(callee, max);
            args.iter().for_each(|a| max_expr(&a.expr, max));
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            max_expr(lhs, max);
            max_expr(rhs, max);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            max_expr(cond, max);
            max_expr(then_branch, max);
            max_expr(else_branch, max);
        }
        ExprKind::Case { scrutinee, arms } => {
            max_expr(scrutinee, max);
            arms.iter().for_each(|a| max_expr(&a.body, max));
        }
        ExprKind::Cast { expr, .. } => max_expr(expr, max),
        ExprKind::Block(stmts) => {
            for s in stmts {
                *max = (*max).max(s.id.0);
                match &s.kind {
                    StmtKind::Let { value, .. }
                    | StmtKind::RefBind { value, .. }
                    | StmtKind::Update { value, .. } => max_expr(value, max),
                    StmtKind::Expr(e) => max_expr(e, max),
                }
            }
        }
        _ => {}
    }
}

fn renumber_expr(e: &mut Expr, next: &mut u32) {
    e.id = NodeId(*next);
    *next += 1;
    match &mut e.kind {
        ExprKind::Ctor { args, .. } => args.iter_mut().for_each(|a| renumber_expr(a, next)),
        ExprKind::Call { callee, args, .. } => {
            renumber_expr(callee, next);
            args.iter_mut().for_each(|a| renumber_expr(&mut a.expr, next));
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            renumber_expr(lhs, next);
            renumber_expr(rhs, next);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            renumber_expr(cond, next);
            renumber_expr(then_branch, next);
            renumber_expr(else_branch, next);
        }
        ExprKind::Case { scrutinee, arms } => {
            renumber_expr(scrutinee, next);
            arms.iter_mut().for_each(|a| renumber_expr(&mut a.body, next));
        }
        ExprKind::Cast { expr, .. } => renumber_expr(expr, next),
        ExprKind::Block(stmts) => {
            for s in stmts {
                s.id = NodeId(*next);
                *next += 1;
                match &mut s.kind {
                    StmtKind::Let { value, .. }
                    | StmtKind::RefBind { value, .. }
                    | StmtKind::Update { value, .. } => renumber_expr(value, next),
                    StmtKind::Expr(e) => renumber_expr(e, next),
                }
            }
        }
        _ => {}
    }
}

/// Program-level name validation, run after expansion.
pub fn validate_names(program: &Program, diags: &mut Vec<Diagnostic>) {
    let mut seen_defs: BTreeSet<&str> = BTreeSet::new();
    for d in &program.defs {
        if !seen_defs.insert(&d.name) {
            diags.push(Diagnostic::error(
                Code::E001,
                d.span,
                format!("function `{}` is defined more than once", d.name),
            ));
        }
    }
    let mut seen_sigs: BTreeSet<&str> = BTreeSet::new();
    for s in &program.signatures {
        if !seen_sigs.insert(&s.name) {
            diags.push(Diagnostic::error(
                Code::E001,
                s.span,
                format!("function `{}` has more than one signature", s.name),
            ));
        }
        if program.def(&s.name).is_none() {
            diags.push(Diagnostic::error(
                Code::E001,
                s.span,
                format!("signature for `{}`, which is not defined", s.name),
            ));
        }
        if let Some(clause) = &s.sharing {
            if clause.fn_name != s.name {
                diags.push(Diagnostic::error(
                    Code::E001,
                    clause.span,
                    format!(
                        "sharing pattern names `{}` but the signature is for `{}`",
                        clause.fn_name, s.name
                    ),
                ));
            }
        }
    }
    for sv in &program.state_vars {
        if program.def(&sv.name).is_some() {
            diags.push(Diagnostic::error(
                Code::E001,
                sv.span,
                format!("state variable `{}` clashes with a function of the same name", sv.name),
            ));
        }
        if sv.name == "io" {
            diags.push(Diagnostic::error(
                Code::E001,
                sv.span,
                "state variable `io` is built in and cannot be redeclared".to_string(),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn expansion_copies_and_substitutes() {
        let src = "\
f x = {\n    g x\n}\ng x = {\n    x\n}\nrenaming\n    f2 = f\n    with\n    g2 = g\nrenaming\n    g2 = g\n";
        let r = parse(src);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        let mut p = r.program;
        let mut diags = Vec::new();
        expand_renamings(&mut p, &mut diags);
        assert!(diags.is_empty(), "{:?}", diags);
        let f2 = p.def("f2").expect("f2 defined");
        match &f2.body.block_stmts()[0].kind {
            StmtKind::Expr(Expr { kind: ExprKind::Call { callee, .. }, .. }) => {
                assert!(matches!(&callee.kind, ExprKind::Var(n) if n == "g2"));
            }
            other => panic!("unexpected body {:?}", other),
        }
        assert!(p.def("g2").is_some());
        // Ids were renumbered: no collisions with the originals.
        let mut ids = std::collections::BTreeSet::new();
        for d in &p.defs {
            collect_ids(&d.body, &mut ids);
        }
        let total: usize = p.defs.iter().map(|d| count_nodes(&d.body)).sum();
        assert_eq!(ids.len(), total);
        // Idempotence: no renamings remain.
        assert!(p.renamings.is_empty());
        let before = p.clone();
        expand_renamings(&mut p, &mut diags);
        assert_eq!(before, p);
    }

    #[test]
    fn renaming_unknown_old_name_is_an_error() {
        let r = parse("renaming f2 = missing\n");
        let mut p = r.program;
        let mut diags = Vec::new();
        expand_renamings(&mut p, &mut diags);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, Code::E001);
        assert!(diags[0].message.contains("missing"));
    }

    fn collect_ids(e: &Expr, out: &mut std::collections::BTreeSet<u32>) {
        out.insert(e.id.0);
        match &e.kind {
            ExprKind::Call { callee, args, .. } => {
                collect_ids(callee, out);
                args.iter().for_each(|a| collect_ids(&a.expr, out));
            }
            ExprKind::Block(stmts) => {
                for s in stmts {
                    out.insert(s.id.0);
                    if let StmtKind::Expr(e) = &s.kind {
                        collect_ids(e, out);
                    }
                }
            }
            _ => {}
        }
    }

    fn count_nodes(e: &Expr) -> usize {
        let mut n = 1;
        match &e.kind {
            ExprKind::Call { callee, args, .. } => {
                n += count_nodes(callee);
                n += args.iter().map(|a| count_nodes(&a.expr)).sum::<usize>();
            }
            ExprKind::Block(stmts) => {
                for s in stmts {
                    n += 1;
                    if let StmtKind::Expr(e) = &s.kind {
                        n += count_nodes(e);
                    }
                }
            }
            _ => {}
        }
        n
    }
}
