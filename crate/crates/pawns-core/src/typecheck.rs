//! Hindley-Milner type checking with the update-instantiation rule:
//! unifications caused by update positions (`!`-marked arguments, `:=`
//! targets) may instantiate the types of other live variables; each visible
//! change is reported as W101 unless introduced by an explicit cast.

use crate::ast::*;
use crate::diag::{Code, Diagnostic};
use crate::span::{NodeId, Span};
use crate::types::{DataEnv, Type, TypeScheme};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub struct TypeckResult {
    pub expr_types: HashMap<NodeId, Type>,
    pub def_schemes: BTreeMap<String, TypeScheme>,
    /// Per definition: variables created with polymorphic types, treated
    /// as live for the whole function by the sharing analysis.
    pub poly_live: BTreeMap<String, BTreeSet<String>>,
    pub diagnostics: Vec<Diagnostic>,
    /// Definitions whose bodies failed to check; later passes skip them.
    pub poisoned: BTreeSet<String>,
}

pub fn check_types(program: &Program, data_env: &DataEnv) -> TypeckResult {
    let mut cx = Checker::new(program, data_env);
    cx.build_global_env();
    cx.check_all_defs();
    TypeckResult {
        expr_types: cx.expr_types,
        def_schemes: cx.schemes,
        poly_live: cx.poly_live,
        diagnostics: cx.diags,
        poisoned: cx.poisoned,
    }
}

struct Checker<'a> {
    program: &'a Program,
    env: &'a DataEnv,
    subst: Vec<Option<Type>>,
    next_var: u32,
    schemes: BTreeMap<String, TypeScheme>,
    state_var_types: BTreeMap<String, Type>,
    expr_types: HashMap<NodeId, Type>,
    poly_live: BTreeMap<String, BTreeSet<String>>,
    diags: Vec<Diagnostic>,
    poisoned: BTreeSet<String>,
    warn_seq: u32,
    /// Warnings are only recorded during the final per-def pass.
    record: bool,
}

type TResult<T> = Result<T, ()>;

/// Lexical scope: a stack of (name, type) bindings.
#[derive(Default)]
struct Scope {
    vars: Vec<(String, Type)>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<&Type> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn bind(&mut self, name: &str, ty: Type) {
        self.vars.push((name.to_string(), ty));
    }
}

impl<'a> Checker<'a> {
    fn new(program: &'a Program, env: &'a DataEnv) -> Self {
        let mut state_var_types = BTreeMap::new();
        let mut diags = Vec::new();
        // io is builtin.
        state_var_types.insert("io".to_string(), Type::reference(Type::App("Io".into(), vec![])));
        for sv in &program.state_vars {
            match env.resolve(&sv.ty) {
                Ok(t) => {
                    if t.ref_target().is_none() {
                        diags.push(Diagnostic::error(
                            Code::E101,
                            sv.span,
                            format!("state variable `{}` must have a Ref type", sv.name),
                        ));
                    }
                    state_var_types.insert(sv.name.clone(), t);
                }
                Err(d) => diags.push(d),
            }
        }
        Checker {
            program,
            env,
            subst: Vec::new(),
            next_var: 0,
            schemes: BTreeMap::new(),
            state_var_types,
            expr_types: HashMap::new(),
            poly_live: BTreeMap::new(),
            diags,
            poisoned: BTreeSet::new(),
            warn_seq: 0,
            record: false,
        }
    }

    // ---- unification ----

    fn fresh(&mut self) -> Type {
        let v = self.next_var;
        self.next_var += 1;
        self.subst.push(None);
        Type::Var(v)
    }

    fn zonk(&self, t: &Type) -> Type {
        match t {
            Type::Var(v) => match self.subst.get(*v as usize).and_then(|s| s.clone()) {
                Some(inner) => self.zonk(&inner),
                None => t.clone(),
            },
            Type::Rigid(_) => t.clone(),
            Type::App(n, args) => {
                Type::App(n.clone(), args.iter().map(|a| self.zonk(a)).collect())
            }
            Type::Fun(a, r) => Type::Fun(Box::new(self.zonk(a)), Box::new(self.zonk(r))),
        }
    }

    fn occurs(&self, v: u32, t: &Type) -> bool {
        match t {
            Type::Var(w) => *w == v,
            Type::Rigid(_) => false,
            Type::App(_, args) => args.iter().any(|a| self.occurs(v, a)),
            Type::Fun(a, r) => self.occurs(v, a) || self.occurs(v, r),
        }
    }

    fn unify(&mut self, t1: &Type, t2: &Type, span: Span) -> TResult<()> {
        let a = self.zonk(t1);
        let b = self.zonk(t2);
        match (&a, &b) {
            _ if a == b => Ok(()),
            (Type::Var(v), _) => {
                if self.occurs(*v, &b) {
                    self.diags.push(Diagnostic::error(
                        Code::E101,
                        span,
                        format!("cannot construct the infinite type `{}` = `{}`", a, b),
                    ));
                    return Err(());
                }
                self.subst[*v as usize] = Some(b);
                Ok(())
            }
            (_, Type::Var(_)) => self.unify(&b, &a, span),
            (Type::App(n1, a1), Type::App(n2, a2)) if n1 == n2 && a1.len() == a2.len() => {
                for (x, y) in a1.iter().zip(a2.iter()) {
                    self.unify(x, y, span)?;
                }
                Ok(())
            }
            (Type::Fun(a1, r1), Type::Fun(a2, r2)) => {
                self.unify(a1, a2, span)?;
                self.unify(r1, r2, span)
            }
            _ => {
                self.diags.push(Diagnostic::error(
                    Code::E101,
                    span,
                    format!("type mismatch: expected `{}`, found `{}`", a, b),
                ));
                Err(())
            }
        }
    }

    fn instantiate(&mut self, scheme: &TypeScheme) -> Type {
        let map: BTreeMap<String, Type> =
            scheme.vars.iter().map(|v| (v.clone(), self.fresh())).collect();
        instantiate_rigids(&scheme.ty, &map)
    }

    // ---- global environment ----

    fn build_global_env(&mut self) {
        // Declared signatures first.
        for sig in &self.program.signatures {
            match self.env.resolve(&sig.ty) {
                Ok(t) => {
                    let mut vars = Vec::new();
                    collect_rigid_names(&t, &mut vars);
                    self.schemes.insert(sig.name.clone(), TypeScheme { vars, ty: t });
                }
                Err(d) => {
                    self.diags.push(d);
                    self.poisoned.insert(sig.name.clone());
                }
            }
        }
        // print_int is builtin.
        self.schemes
            .entry("print_int".to_string())
            .or_insert_with(|| TypeScheme::mono(Type::Fun(Box::new(Type::int()), Box::new(Type::unit()))));

        // Infer signature-less definitions in dependency order.
        let unsigned: Vec<&FunctionDef> = self
            .program
            .defs
            .iter()
            .filter(|d| !self.schemes.contains_key(&d.name))
            .collect();
        let sccs = dependency_sccs(&unsigned);
        for group in sccs {
            self.infer_scc(&group);
        }
    }

    fn infer_scc(&mut self, group: &[&FunctionDef]) {
        // Monomorphic recursion: members see each other at fresh monotypes.
        let mut placeholders = BTreeMap::new();
        for def in group {
            let t = self.fresh();
            placeholders.insert(def.name.clone(), t.clone());
            self.schemes.insert(def.name.clone(), TypeScheme::mono(t));
        }
        // Diagnostics from this pass are dropped; the recording pass
        // re-checks every body and reports them once.
        let mark = self.diags.len();
        for def in group {
            let fn_ty = placeholders[&def.name].clone();
            let _ = self.check_def_against(def, &fn_ty);
        }
        self.diags.truncate(mark);
        // Generalize what remains free.
        for def in group {
            let zonked = self.zonk(&placeholders[&def.name]);
            let scheme = self.generalize(zonked);
            self.schemes.insert(def.name.clone(), scheme);
        }
    }

    fn generalize(&mut self, ty: Type) -> TypeScheme {
        let mut free = Vec::new();
        collect_free_vars(&ty, &mut free);
        let names: Vec<String> = (0..free.len()).map(|i| gen_var_name(i)).collect();
        let map: BTreeMap<u32, Type> = free
            .iter()
            .copied()
            .zip(names.iter().map(|n| Type::Rigid(n.clone())))
            .collect();
        let gty = replace_vars(&ty, &map);
        TypeScheme { vars: names, ty: gty }
    }

    // ---- per-definition checking ----

    fn check_all_defs(&mut self) {
        self.record = true;
        for def in &self.program.defs {
            let scheme = match self.schemes.get(&def.name) {
                Some(s) => s.clone(),
                None => continue,
            };
            // Skolem check: rigid variables stay rigid, so the definition
            // must be at least as general as its signature.
            if self.check_def_against(def, &scheme.ty.clone()).is_err() {
                self.poisoned.insert(def.name.clone());
            }
        }
        // Zonk the recorded types.
        let ids: Vec<NodeId> = self.expr_types.keys().copied().collect();
        for id in ids {
            let t = self.expr_types[&id].clone();
            let z = self.zonk(&t);
            self.expr_types.insert(id, z);
        }
    }

    fn check_def_against(&mut self, def: &FunctionDef, fn_ty: &Type) -> TResult<()> {
        let mut scope = Scope::default();
        let mut remaining = self.zonk(fn_ty);
        let mut poly = BTreeSet::new();
        for (param, span) in &def.params {
            let arg = self.fresh();
            let res = self.fresh();
            let expected = Type::Fun(Box::new(arg.clone()), Box::new(res.clone()));
            if self.unify(&remaining, &expected, *span).is_err() {
                self.diags.push(Diagnostic::error(
                    Code::E101,
                    *span,
                    format!(
                        "definition of `{}` has more parameters than its type `{}`",
                        def.name,
                        self.zonk(fn_ty)
                    ),
                ));
                return Err(());
            }
            let arg_z = self.zonk(&arg);
            if arg_z.contains_type_var() {
                poly.insert(param.clone());
            }
            scope.bind(param, arg_z);
            remaining = self.zonk(&res);
        }
        let mut ctx = DefCtx { def_name: def.name.clone(), poly };
        let body_t = self.infer_expr(&def.body, &mut scope, &mut ctx)?;
        self.unify(&remaining, &body_t, def.span)?;
        if self.record {
            self.poly_live.insert(def.name.clone(), ctx.poly);
        }
        Ok(())
    }

    fn record_type(&mut self, id: NodeId, t: &Type) {
        if self.record {
            self.expr_types.insert(id, t.clone());
        }
    }

    fn lookup_var(&mut self, name: &str, span: Span, scope: &Scope) -> TResult<Type> {
        if let Some(t) = scope.lookup(name) {
            return Ok(t.clone());
        }
        if let Some(t) = self.state_var_types.get(name) {
            return Ok(t.clone());
        }
        if let Some(s) = self.schemes.get(name).cloned() {
            return Ok(self.instantiate(&s));
        }
        self.diags.push(Diagnostic::error(
            Code::E101,
            span,
            format!("unknown name `{}`", name),
        ));
        Err(())
    }

    fn infer_expr(&mut self, e: &Expr, scope: &mut Scope, ctx: &mut DefCtx) -> TResult<Type> {
        let t = self.infer_expr_inner(e, scope, ctx)?;
        self.record_type(e.id, &t);
        Ok(t)
    }

    fn infer_expr_inner(&mut self, e: &Expr, scope: &mut Scope, ctx: &mut DefCtx) -> TResult<Type> {
        match &e.kind {
            ExprKind::IntLit(_) => Ok(Type::int()),
            ExprKind::Unit => Ok(Type::unit()),
            ExprKind::Var(name) => self.lookup_var(name, e.span, scope),
            ExprKind::Deref(name) => {
                let t = self.lookup_var(name, e.span, scope)?;
                let inner = self.fresh();
                self.unify(&t, &Type::reference(inner.clone()), e.span)?;
                Ok(self.zonk(&inner))
            }
            ExprKind::Ctor { name, args } => {
                let info = match self.env.ctors.get(name) {
                    Some(i) => i.clone(),
                    None => {
                        self.diags.push(Diagnostic::error(
                            Code::E101,
                            e.span,
                            format!("unknown constructor `{}`", name),
                        ));
                        return Err(());
                    }
                };
                let dt = self.env.datatypes.get(&info.datatype).cloned().expect("ctor datatype");
                let inst: BTreeMap<String, Type> =
                    dt.params.iter().map(|p| (p.clone(), self.fresh())).collect();
                let result =
                    Type::App(dt.name.clone(), dt.params.iter().map(|p| inst[p].clone()).collect());
                if args.len() != info.args.len() {
                    self.diags.push(Diagnostic::error(
                        Code::E101,
                        e.span,
                        format!(
                            "constructor `{}` expects {} argument(s), found {}",
                            name,
                            info.args.len(),
                            args.len()
                        ),
                    ));
                    return Err(());
                }
                for (arg, decl) in args.iter().zip(info.args.iter()) {
                    let want = instantiate_rigids(decl, &inst);
                    let got = self.infer_expr(arg, scope, ctx)?;
                    self.unify(&want, &got, arg.span)?;
                }
                Ok(self.zonk(&result))
            }
            ExprKind::Call { callee, args, .. } => {
                let mut fn_t = self.infer_expr(callee, scope, ctx)?;
                for arg in args {
                    let expected = self.fresh();
                    let res = self.fresh();
                    self.unify(
                        &fn_t,
                        &Type::Fun(Box::new(expected.clone()), Box::new(res.clone())),
                        arg.expr.span,
                    )?;
                    let got = self.infer_expr(&arg.expr, scope, ctx)?;
                    if arg.marked {
                        // Update position: instantiation may ripple into
                        // other variables' types.
                        self.unify_update(&expected, &got, arg.expr.span, scope)?;
                    } else {
                        self.unify(&expected, &got, arg.expr.span)?;
                    }
                    fn_t = self.zonk(&res);
                }
                Ok(fn_t)
            }
            ExprKind::Binop { op, lhs, rhs } => {
                let lt = self.infer_expr(lhs, scope, ctx)?;
                let rt = self.infer_expr(rhs, scope, ctx)?;
                self.unify(&lt, &Type::int(), lhs.span)?;
                self.unify(&rt, &Type::int(), rhs.span)?;
                if op.is_comparison() {
                    Ok(Type::bool_ty())
                } else {
                    Ok(Type::int())
                }
            }
            ExprKind::If { cond, then_branch, else_branch } => {
                let ct = self.infer_expr(cond, scope, ctx)?;
                self.unify(&ct, &Type::bool_ty(), cond.span)?;
                let tt = self.infer_expr(then_branch, scope, ctx)?;
                let et = self.infer_expr(else_branch, scope, ctx)?;
                self.unify(&tt, &et, else_branch.span)?;
                Ok(self.zonk(&tt))
            }
            ExprKind::Case { scrutinee, arms } => {
                let st = self.infer_expr(scrutinee, scope, ctx)?;
                let result = self.fresh();
                for arm in arms {
                    let info = match self.env.ctors.get(&arm.ctor) {
                        Some(i) => i.clone(),
                        None => {
                            self.diags.push(Diagnostic::error(
                                Code::E101,
                                arm.ctor_span,
                                format!("unknown constructor `{}`", arm.ctor),
                            ));
                            return Err(());
                        }
                    };
                    let dt = self.env.datatypes.get(&info.datatype).cloned().unwrap();
                    let inst: BTreeMap<String, Type> =
                        dt.params.iter().map(|p| (p.clone(), self.fresh())).collect();
                    let scrut_ty = Type::App(
                        dt.name.clone(),
                        dt.params.iter().map(|p| inst[p].clone()).collect(),
                    );
                    self.unify(&st, &scrut_ty, arm.ctor_span)?;
                    let depth = scope.vars.len();
                    for (binder, decl) in arm.binders.iter().zip(info.args.iter()) {
                        let cell_t = instantiate_rigids(decl, &inst);
                        match binder {
                            Binder::Var(n, _) => {
                                let z = self.zonk(&cell_t);
                                if z.contains_type_var() {
                                    ctx.poly.insert(n.clone());
                                }
                                scope.bind(n, z);
                            }
                            Binder::Deref(n, _) => {
                                let z = self.zonk(&Type::reference(cell_t));
                                if z.contains_type_var() {
                                    ctx.poly.insert(n.clone());
                                }
                                scope.bind(n, z);
                            }
                            Binder::Wild(_) => {}
                        }
                    }
                    let bt = self.infer_expr(&arm.body, scope, ctx)?;
                    self.unify(&result, &bt, arm.span)?;
                    scope.vars.truncate(depth);
                }
                Ok(self.zonk(&result))
            }
            ExprKind::Cast { expr, ty } => {
                let et = self.infer_expr(expr, scope, ctx)?;
                let target = match self.env.resolve(ty) {
                    Ok(t) => t,
                    Err(d) => {
                        self.diags.push(d);
                        return Err(());
                    }
                };
                // Cast type variables not bound by the signature become
                // fresh unification variables.
                let mut rigid_names = Vec::new();
                collect_rigid_names(&target, &mut rigid_names);
                let map: BTreeMap<String, Type> = rigid_names
                    .into_iter()
                    .filter(|n| !ctx_has_skolem(n))
                    .map(|n| (n.clone(), self.fresh()))
                    .collect();
                let target = instantiate_rigids(&target, &map);
                let before = self.diags.len();
                if self.unify(&et, &target, e.span).is_err() {
                    // Reclassify as a cast error.
                    let shown = self.zonk_display(&target);
                    for d in &mut self.diags[before..] {
                        d.code = Code::E102;
                        d.message = format!(
                            "cast target `{}` does not match the inferred type: {}",
                            shown, d.message
                        );
                    }
                    return Err(());
                }
                Ok(self.zonk(&target))
            }
            ExprKind::Block(stmts) => {
                let depth = scope.vars.len();
                let mut last = Type::unit();
                for (i, stmt) in stmts.iter().enumerate() {
                    last = self.infer_stmt(stmt, scope, ctx)?;
                    if i + 1 != stmts.len() {
                        last = Type::unit();
                    }
                }
                scope.vars.truncate(depth);
                Ok(last)
            }
        }
    }

    fn zonk_display(&self, t: &Type) -> String {
        format!("{}", self.zonk(t))
    }

    fn infer_stmt(&mut self, stmt: &Stmt, scope: &mut Scope, ctx: &mut DefCtx) -> TResult<Type> {
        match &stmt.kind {
            StmtKind::Let { name, name_span, value } => {
                let t = self.infer_expr(value, scope, ctx)?;
                let z = self.zonk(&t);
                if z.contains_type_var() {
                    ctx.poly.insert(name.clone());
                }
                scope.bind(name, z);
                let _ = name_span;
                Ok(Type::unit())
            }
            StmtKind::RefBind { name, name_span, value } => {
                let t = self.infer_expr(value, scope, ctx)?;
                if scope.lookup(name).is_none() && self.state_var_types.contains_key(name) {
                    // Initializes a state-variable slot.
                    let declared = self.state_var_types[name].clone();
                    self.unify(&declared, &Type::reference(t), *name_span)?;
                } else {
                    let z = self.zonk(&Type::reference(t));
                    if z.contains_type_var() {
                        ctx.poly.insert(name.clone());
                    }
                    scope.bind(name, z);
                }
                Ok(Type::unit())
            }
            StmtKind::Update { target, target_span, value, .. } => {
                let rt = self.lookup_var(target, *target_span, scope)?;
                let cell = self.fresh();
                self.unify_update(&rt, &Type::reference(cell.clone()), *target_span, scope)?;
                let vt = self.infer_expr(value, scope, ctx)?;
                self.unify_update(&cell, &vt, value.span, scope)?;
                Ok(Type::unit())
            }
            StmtKind::Expr(e) => self.infer_expr(e, scope, ctx),
        }
    }

    /// A unification caused by an update position. Every in-scope variable
    /// whose visible type changes is reported with W101.
    fn unify_update(
        &mut self,
        expected: &Type,
        got: &Type,
        span: Span,
        scope: &Scope,
    ) -> TResult<()> {
        let before: Vec<(String, Type)> = scope
            .vars
            .iter()
            .map(|(n, t)| (n.clone(), self.zonk(t)))
            .collect();
        self.unify(expected, got, span)?;
        if self.record {
            let mut changed: Vec<(String, Type, Type)> = Vec::new();
            for (name, old) in &before {
                let new = self.zonk(old);
                if &new != old {
                    if !changed.iter().any(|(n, _, _)| n == name) {
                        changed.push((name.clone(), old.clone(), new));
                    }
                }
            }
            changed.sort_by(|a, b| a.0.cmp(&b.0));
            for (name, old, new) in changed {
                self.warn_seq += 1;
                let (old, new) = display_types_compact(&old, &new);
                let mut w = Diagnostic::warning(
                    Code::W101,
                    span,
                    format!(
                        "type of `{}` instantiated from `{}` to `{}` by this update",
                        name, old, new
                    ),
                );
                w.seq = self.warn_seq;
                self.diags.push(w);
            }
        }
        Ok(())
    }
}

struct DefCtx {
    #[allow(dead_code)]
    def_name: String,
    poly: BTreeSet<String>,
}

// Cast type variables are never signature skolems in practice; keeping the
// hook explicit for clarity.
fn ctx_has_skolem(_name: &str) -> bool {
    false
}

fn instantiate_rigids(t: &Type, map: &BTreeMap<String, Type>) -> Type {
    match t {
        Type::Rigid(n) => map.get(n).cloned().unwrap_or_else(|| t.clone()),
        Type::Var(_) => t.clone(),
        Type::App(n, args) => {
            Type::App(n.clone(), args.iter().map(|a| instantiate_rigids(a, map)).collect())
        }
        Type::Fun(a, r) => Type::Fun(
            Box::new(instantiate_rigids(a, map)),
            Box::new(instantiate_rigids(r, map)),
        ),
    }
}

fn collect_rigid_names(t: &Type, out: &mut Vec<String>) {
    match t {
        Type::Rigid(n) => {
            if !out.contains(n) {
                out.push(n.clone());
            }
        }
        Type::Var(_) => {}
        Type::App(_, args) => args.iter().for_each(|a| collect_rigid_names(a, out)),
        Type::Fun(a, r) => {
            collect_rigid_names(a, out);
            collect_rigid_names(r, out);
        }
    }
}

fn collect_free_vars(t: &Type, out: &mut Vec<u32>) {
    match t {
        Type::Var(v) => {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        Type::Rigid(_) => {}
        Type::App(_, args) => args.iter().for_each(|a| collect_free_vars(a, out)),
        Type::Fun(a, r) => {
            collect_free_vars(a, out);
            collect_free_vars(r, out);
        }
    }
}

fn replace_vars(t: &Type, map: &BTreeMap<u32, Type>) -> Type {
    match t {
        Type::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
        Type::Rigid(_) => t.clone(),
        Type::App(n, args) => {
            Type::App(n.clone(), args.iter().map(|a| replace_vars(a, map)).collect())
        }
        Type::Fun(a, r) => {
            Type::Fun(Box::new(replace_vars(a, map)), Box::new(replace_vars(r, map)))
        }
    }
}

fn gen_var_name(i: usize) -> String {
    let c = (b'a' + (i % 26) as u8) as char;
    if i < 26 {
        c.to_string()
    } else {
        format!("{}{}", c, i / 26)
    }
}

/// Renders two related types with unification variables renamed compactly
/// and consistently (t, t1, t2, ...).
fn display_types_compact(a: &Type, b: &Type) -> (String, String) {
    let mut order = Vec::new();
    collect_free_vars(a, &mut order);
    collect_free_vars(b, &mut order);
    let map: BTreeMap<u32, Type> = order
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let name = if i == 0 { "t".to_string() } else { format!("t{}", i) };
            (*v, Type::Rigid(name))
        })
        .collect();
    (format!("{}", replace_vars(a, &map)), format!("{}", replace_vars(b, &map)))
}

/// Strongly connected components of the call graph among the given defs,
/// in dependency order (callees first).
fn dependency_sccs<'d>(defs: &[&'d FunctionDef]) -> Vec<Vec<&'d FunctionDef>> {
    let names: BTreeMap<&str, usize> =
        defs.iter().enumerate().map(|(i, d)| (d.name.as_str(), i)).collect();
    let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); defs.len()];
    for (i, def) in defs.iter().enumerate() {
        let mut mentioned = BTreeSet::new();
        collect_mentions_expr(&def.body, &mut mentioned);
        for m in mentioned {
            if let Some(&j) = names.get(m.as_str()) {
                if j != i {
                    edges[i].insert(j);
                }
            }
        }
    }
    // Tarjan's algorithm, iterative enough for small programs (recursive is
    // fine here).
    struct T<'x> {
        edges: &'x [BTreeSet<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        counter: usize,
        out: Vec<Vec<usize>>,
    }
    impl<'x> T<'x> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.counter);
            self.low[v] = self.counter;
            self.counter += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            let succs: Vec<usize> = self.edges[v].iter().copied().collect();
            for w in succs {
                if self.index[w].is_none() {
                    self.visit(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                } else if self.on_stack[w] {
                    self.low[v] = self.low[v].min(self.index[w].unwrap());
                }
            }
            if self.low[v] == self.index[v].unwrap() {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().unwrap();
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                self.out.push(comp);
            }
        }
    }
    let mut t = T {
        edges: &edges,
        index: vec![None; defs.len()],
        low: vec![0; defs.len()],
        on_stack: vec![false; defs.len()],
        stack: Vec::new(),
        counter: 0,
        out: Vec::new(),
    };
    for v in 0..defs.len() {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    // Tarjan emits components in reverse topological order of the
    // condensation; callees come out first, which is what we want.
    t.out.into_iter().map(|comp| comp.into_iter().map(|i| defs[i]).collect()).collect()
}

fn collect_mentions_expr(e: &Expr, out: &mut BTreeSet<String>) {
    match &e.kind {
        ExprKind::Var(n) => {
            out.insert(n.clone());
        }
        ExprKind::Deref(n) => {
            out.insert(n.clone());
        }
        ExprKind::Ctor { args, .. } => args.iter().for_each(|a| collect_mentions_expr(a, out)),
        ExprKind::Call { callee, args, .. } => {
            collect_mentions_expr(callee, out);
            for a in args {
                collect_mentions_expr(&a.expr, out);
            }
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            collect_mentions_expr(lhs, out);
            collect_mentions_expr(rhs, out);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            collect_mentions_expr(cond, out);
            collect_mentions_expr(then_branch, out);
            collect_mentions_expr(else_branch, out);
        }
        ExprKind::Case { scrutinee, arms } => {
            collect_mentions_expr(scrutinee, out);
            for arm in arms {
                collect_mentions_expr(&arm.body, out);
            }
        }
        ExprKind::Cast { expr, .. } => collect_mentions_expr(expr, out),
        ExprKind::Block(stmts) => {
            for s in stmts {
                match &s.kind {
                    StmtKind::Let { value, .. } | StmtKind::RefBind { value, .. } => {
                        collect_mentions_expr(value, out)
                    }
                    StmtKind::Update { target, value, .. } => {
                        out.insert(target.clone());
                        collect_mentions_expr(value, out);
                    }
                    StmtKind::Expr(e) => collect_mentions_expr(e, out),
                }
            }
        }
        _ => {}
    }
}
