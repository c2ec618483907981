//! State-variable discipline (E301/E302): every call to a function with
//! implicit state variables must be `!`-prefixed; a state variable can
//! only be used after a write-only function has bound it or in functions
//! declaring it implicit; write-only variables must be bound on every
//! path before returning; callers and callees must agree on modes.

use crate::ast::*;
use crate::diag::{Code, Diagnostic};
use crate::span::Span;
use std::collections::{BTreeMap, BTreeSet};

pub fn check_state_vars(program: &Program, diags: &mut Vec<Diagnostic>) {
    let mut state_names: BTreeSet<String> = BTreeSet::new();
    state_names.insert("io".to_string());
    for sv in &program.state_vars {
        state_names.insert(sv.name.clone());
    }
    // implicit declarations per function (builtins included).
    let mut implicits: BTreeMap<String, Vec<(String, Mode)>> = BTreeMap::new();
    implicits.insert("print_int".to_string(), vec![("io".to_string(), Mode::Rw)]);
    for sig in &program.signatures {
        implicits.insert(
            sig.name.clone(),
            sig.implicits.iter().map(|(n, m, _)| (n.clone(), *m)).collect(),
        );
    }
    for def in &program.defs {
        let own: BTreeMap<String, Mode> = implicits
            .get(&def.name)
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_default();
        for (sv, _, span) in program
            .signature(&def.name)
            .map(|s| s.implicits.as_slice())
            .unwrap_or(&[])
        {
            if !state_names.contains(sv) {
                diags.push(Diagnostic::error(
                    Code::E301,
                    *span,
                    format!("`{}` is declared implicit but is not a state variable", sv),
                ));
            }
        }
        let mut cx = Cx {
            state_names: &state_names,
            implicits: &implicits,
            own: &own,
            fn_name: &def.name,
            diags,
        };
        // ro/rw variables are bound at entry; wo ones must be bound here.
        let mut bound: BTreeSet<String> = own
            .iter()
            .filter(|(_, m)| !matches!(m, Mode::Wo))
            .map(|(n, _)| n.clone())
            .collect();
        check_expr(&def.body, &mut bound, &mut cx);
        for (sv, mode) in &own {
            if matches!(mode, Mode::Wo) && !bound.contains(sv) {
                cx.diags.push(Diagnostic::error(
                    Code::E301,
                    def.span,
                    format!(
                        "write-only state variable `{}` is not bound on every path through `{}`",
                        sv, def.name
                    ),
                ));
            }
        }
    }
}

struct Cx<'a> {
    state_names: &'a BTreeSet<String>,
    implicits: &'a BTreeMap<String, Vec<(String, Mode)>>,
    own: &'a BTreeMap<String, Mode>,
    fn_name: &'a str,
    diags: &'a mut Vec<Diagnostic>,
}

impl Cx<'_> {
    fn is_state(&self, name: &str) -> bool {
        self.state_names.contains(name)
    }

    /// A read of state variable `v` at this point.
    fn check_read(&mut self, v: &str, bound: &BTreeSet<String>, span: Span) {
        if !bound.contains(v) {
            let why = if self.own.contains_key(v) {
                "it is declared write-only and has not been bound yet"
            } else {
                "it is not declared implicit here and no write-only call has bound it"
            };
            self.diags.push(Diagnostic::error(
                Code::E301,
                span,
                format!("state variable `{}` is used before it is bound: {}", v, why),
            ));
        }
    }

    /// A destructive update of state variable `v`.
    fn check_write(&mut self, v: &str, bound: &BTreeSet<String>, span: Span) {
        if let Some(Mode::Ro) = self.own.get(v) {
            self.diags.push(Diagnostic::error(
                Code::E301,
                span,
                format!(
                    "state variable `{}` is declared read-only in `{}` and cannot be updated",
                    v, self.fn_name
                ),
            ));
            return;
        }
        self.check_read(v, bound, span);
    }
}

fn check_stmt(stmt: &Stmt, bound: &mut BTreeSet<String>, cx: &mut Cx) {
    match &stmt.kind {
        StmtKind::Let { name, name_span, value } => {
            check_expr(value, bound, cx);
            if cx.is_state(name) {
                cx.diags.push(Diagnostic::error(
                    Code::E301,
                    *name_span,
                    format!("cannot rebind state variable `{}` as a local", name),
                ));
            }
        }
        StmtKind::RefBind { name, name_span, value } => {
            check_expr(value, bound, cx);
            if cx.is_state(name) {
                // Initializes the slot; only meaningful where this
                // function owns a fresh slot (declared write-only).
                match cx.own.get(name) {
                    Some(Mode::Wo) => {
                        bound.insert(name.clone());
                    }
                    Some(_) => {
                        cx.diags.push(Diagnostic::error(
                            Code::E301,
                            *name_span,
                            format!(
                                "state variable `{}` can only be initialized with `*{} = ...` where it is declared `wo`",
                                name, name
                            ),
                        ));
                    }
                    None => {
                        cx.diags.push(Diagnostic::error(
                            Code::E301,
                            *name_span,
                            format!(
                                "`{}` does not declare state variable `{}` and cannot initialize it",
                                cx.fn_name, name
                            ),
                        ));
                    }
                }
            }
        }
        StmtKind::Update { target, target_span, value, .. } => {
            check_expr(value, bound, cx);
            if cx.is_state(target) {
                cx.check_write(target, bound, *target_span);
            }
        }
        StmtKind::Expr(e) => check_expr(e, bound, cx),
    }
}

fn check_expr(e: &Expr, bound: &mut BTreeSet<String>, cx: &mut Cx) {
    match &e.kind {
        ExprKind::Var(n) | ExprKind::Deref(n) => {
            if cx.is_state(n) {
                cx.check_read(n, bound, e.span);
            }
        }
        ExprKind::IntLit(_) | ExprKind::Unit => {}
        ExprKind::Ctor { args, .. } => {
            for a in args {
                check_expr(a, bound, cx);
            }
        }
        ExprKind::Call { callee, args, state_call, .. } => {
            check_expr(callee, bound, cx);
            for a in args {
                check_expr(&a.expr, bound, cx);
            }
            if let ExprKind::Var(g) = &callee.kind {
                let callee_implicits = cx.implicits.get(g).cloned().unwrap_or_default();
                if !callee_implicits.is_empty() && !*state_call {
                    cx.diags.push(Diagnostic::error(
                        Code::E302,
                        e.span,
                        format!(
                            "call to `{}` uses implicit state variable(s) and must be prefixed with `!`",
                            g
                        ),
                    ));
                }
                for (v, mode) in &callee_implicits {
                    match mode {
                        Mode::Ro => cx.check_read(v, bound, e.span),
                        Mode::Rw => cx.check_write(v, bound, e.span),
                        Mode::Wo => {
                            // Rebinding: forbidden for callers that see the
                            // variable as ro or rw (the fresh binding would
                            // leak past their return).
                            match cx.own.get(v) {
                                Some(Mode::Ro) | Some(Mode::Rw) => {
                                    cx.diags.push(Diagnostic::error(
                                        Code::E301,
                                        e.span,
                                        format!(
                                            "`{}` declares `{} {}` and may not call `{}`, which rebinds it (`wo`)",
                                            cx.fn_name,
                                            cx.own.get(v).map(|m| m.as_str()).unwrap_or(""),
                                            v,
                                            g
                                        ),
                                    ));
                                }
                                _ => {
                                    bound.insert(v.clone());
                                }
                            }
                        }
                    }
                }
            }
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            check_expr(lhs, bound, cx);
            check_expr(rhs, bound, cx);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            check_expr(cond, bound, cx);
            let mut b1 = bound.clone();
            check_expr(then_branch, &mut b1, cx);
            let mut b2 = bound.clone();
            check_expr(else_branch, &mut b2, cx);
            *bound = &b1 & &b2;
        }
        ExprKind::Case { scrutinee, arms } => {
            check_expr(scrutinee, bound, cx);
            let mut joined: Option<BTreeSet<String>> = None;
            for arm in arms {
                for b in &arm.binders {
                    if let Some(n) = b.name() {
                        if cx.is_state(n) {
                            cx.diags.push(Diagnostic::error(
                                Code::E301,
                                arm.ctor_span,
                                format!("cannot rebind state variable `{}` in a pattern", n),
                            ));
                        }
                    }
                }
                let mut b = bound.clone();
                check_expr(&arm.body, &mut b, cx);
                joined = Some(match joined {
                    None => b,
                    Some(j) => &j & &b,
                });
            }
            if let Some(j) = joined {
                *bound = j;
            }
        }
        ExprKind::Cast { expr, .. } => check_expr(expr, bound, cx),
        ExprKind::Block(stmts) => {
            for s in stmts {
                check_stmt(s, bound, cx);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn check(src: &str) -> Vec<Diagnostic> {
        let r = parse(src);
        assert!(r.diagnostics.is_empty(), "parse: {:?}", r.diagnostics);
        let mut diags = Vec::new();
        check_state_vars(&r.program, &mut diags);
        diags
    }

    const FIG6_CORE: &str = "\
data BST = Empty | Node BST Int BST
!nsum:: Ref Int
bst_sum:: BST -> Int
bst_sum t = {
    !init_nsum 0;
    !bst_sum_sv t;
    *nsum
}
init_nsum:: Int -> ()
    implicit wo nsum
init_nsum n = {
    *nsum = n
}
bst_sum_sv:: BST -> ()
    implicit rw nsum
bst_sum_sv t = {
    case t of
    | Empty -> ()
    | (Node l n r) -> {
        *!nsum := *nsum + n;
        !bst_sum_sv l;
        *!nsum := *nsum + (bst_sum r)
    }
}
";

    #[test]
    fn fig6_discipline_is_accepted() {
        let diags = check(FIG6_CORE);
        assert!(diags.is_empty(), "{:?}", diags);
    }

    #[test]
    fn missing_bang_on_implicit_call_is_e302() {
        let src = FIG6_CORE.replace("!bst_sum_sv t;", "bst_sum_sv t;");
        let diags = check(&src);
        assert_eq!(diags.len(), 1, "{:?}", diags);
        assert_eq!(diags[0].code, Code::E302);
    }

    #[test]
    fn read_before_binding_is_e301() {
        let src = "\
!nsum:: Ref Int
init_nsum:: Int -> ()
    implicit wo nsum
init_nsum n = {
    *nsum = n
}
f w = {
    *nsum
}
";
        let diags = check(src);
        assert_eq!(diags.len(), 1, "{:?}", diags);
        assert_eq!(diags[0].code, Code::E301);
        assert!(diags[0].message.contains("before it is bound"));
    }

    #[test]
    fn wo_must_bind_on_every_path() {
        let src = "\
!nsum:: Ref Int
data Bool2 = T2 | F2
init2:: Bool2 -> ()
    implicit wo nsum
init2 b = {
    case b of
    | T2 -> *nsum = 1
    | F2 -> ()
}
";
        let diags = check(src);
        assert_eq!(diags.len(), 1, "{:?}", diags);
        assert_eq!(diags[0].code, Code::E301);
        assert!(diags[0].message.contains("not bound on every path"));
    }

    #[test]
    fn ro_caller_cannot_call_wo_callee() {
        let src = "\
!nsum:: Ref Int
init_nsum:: Int -> ()
    implicit wo nsum
init_nsum n = {
    *nsum = n
}
reader:: () -> Int
    implicit ro nsum
reader w = {
    !init_nsum 0;
    *nsum
}
";
        let diags = check(src);
        assert_eq!(diags.len(), 1, "{:?}", diags);
        assert_eq!(diags[0].code, Code::E301);
        assert!(diags[0].message.contains("rebinds"));
    }

    #[test]
    fn ro_cannot_update() {
        let src = "\
!nsum:: Ref Int
peek:: () -> ()
    implicit ro nsum
peek w = {
    *!nsum := 1
}
";
        let diags = check(src);
        assert_eq!(diags.len(), 1, "{:?}", diags);
        assert_eq!(diags[0].code, Code::E301);
        assert!(diags[0].message.contains("read-only"));
    }

    #[test]
    fn print_int_requires_bang_and_io() {
        let diags = check("main:: () -> ()\n    implicit rw io\nmain w = {\n    print_int 1\n}\n");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, Code::E302);
        // And io must be declared to call it at all.
        let diags = check("main:: () -> ()\nmain w = {\n    !print_int 1\n}\n");
        assert_eq!(diags.len(), 1, "{:?}", diags);
        assert_eq!(diags[0].code, Code::E301);
    }
}
