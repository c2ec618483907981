//! Forward abstract interpretation of function bodies over sharing
//! relations: enforces `!` annotations (E201), preconditions (E202),
//! postconditions (E203), the abstract/concrete discipline (E204) and
//! state-variable escapes (E301); infers postconditions for pure,
//! call-free definitions.
//!
//! Each function body is interpreted exactly once, statement by statement;
//! recursion is mediated by declared pre/postconditions, so no fixpoint
//! iteration happens.

use crate::ast::*;
use crate::components::{alias_compatible, Component, GraphCache, Step};
use crate::contracts::{ContractEnv, FnContract, SpecKind};
use crate::diag::{Code, Diagnostic};
use crate::rel::{Owner, Pair, SharingRel};
use crate::span::{NodeId, Span};
use crate::typecheck::TypeckResult;
use crate::types::{DataEnv, Type};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

pub struct AnalysisResult {
    pub diagnostics: Vec<Diagnostic>,
    /// Sharing relation after each statement (temporaries removed).
    pub snapshots: HashMap<(String, NodeId), SharingRel>,
    /// Statements of each analyzed function in execution order.
    pub stmt_order: BTreeMap<String, Vec<(NodeId, Span)>>,
    /// Variables live after each statement.
    pub live_after: HashMap<(String, NodeId), BTreeSet<String>>,
    /// Variables treated as live for the whole function.
    pub whole_live: BTreeMap<String, BTreeSet<String>>,
    /// Statement visit counts per function (each statement exactly once).
    pub stmt_visits: BTreeMap<String, (usize, usize)>,
    /// Postconditions inferred for `post = inferred` signatures, in
    /// declaration space.
    pub inferred_posts: BTreeMap<String, SharingRel>,
}

/// Spec-level entailment: every non-self pair of `computed` appears in the
/// saturated `declared` relation.
pub fn entails(computed: &SharingRel, declared: &SharingRel) -> bool {
    let mut target = declared.clone();
    target.saturate();
    computed.iter().filter(|p| !p.is_self()).all(|p| target.contains(p))
}

pub fn analyze_program(
    program: &Program,
    env: &DataEnv,
    typeck: &TypeckResult,
) -> AnalysisResult {
    let mut diags = Vec::new();
    let contracts = ContractEnv::build(program, env, &typeck.def_schemes, &mut diags);
    let mut analyzer = Analyzer {
        program,
        env,
        cache: GraphCache::new(),
        contracts,
        typeck,
        diags,
        snapshots: HashMap::new(),
        stmt_order: BTreeMap::new(),
        live_after: HashMap::new(),
        whole_live: BTreeMap::new(),
        stmt_visits: BTreeMap::new(),
        inferred_posts: BTreeMap::new(),
    };
    analyzer.resolve_inferred_posts();
    for def in &program.defs {
        if typeck.poisoned.contains(&def.name) {
            continue;
        }
        analyzer.analyze_function(def);
    }
    AnalysisResult {
        diagnostics: analyzer.diags,
        snapshots: analyzer.snapshots,
        stmt_order: analyzer.stmt_order,
        live_after: analyzer.live_after,
        whole_live: analyzer.whole_live,
        stmt_visits: analyzer.stmt_visits,
        inferred_posts: analyzer.inferred_posts,
    }
}

struct Analyzer<'a> {
    program: &'a Program,
    env: &'a DataEnv,
    cache: GraphCache,
    contracts: ContractEnv,
    typeck: &'a TypeckResult,
    diags: Vec<Diagnostic>,
    snapshots: HashMap<(String, NodeId), SharingRel>,
    stmt_order: BTreeMap<String, Vec<(NodeId, Span)>>,
    live_after: HashMap<(String, NodeId), BTreeSet<String>>,
    whole_live: BTreeMap<String, BTreeSet<String>>,
    stmt_visits: BTreeMap<String, (usize, usize)>,
    inferred_posts: BTreeMap<String, SharingRel>,
}

#[derive(Clone)]
struct ClosureRef {
    contract: Rc<FnContract>,
    supplied: usize,
}

struct FnCtx {
    fn_name: String,
    rel: SharingRel,
    owner_types: BTreeMap<Owner, Type>,
    live_after: HashMap<NodeId, BTreeSet<String>>,
    whole_live: BTreeSet<String>,
    temp_counter: u32,
    visits: usize,
    closures: HashMap<String, ClosureRef>,
    /// The statement currently being executed (for liveness queries).
    current_stmt: NodeId,
    /// Suppress diagnostics (postcondition inference runs).
    quiet: bool,
    record: bool,
}

impl FnCtx {
    fn fresh_temp(&mut self) -> Owner {
        self.temp_counter += 1;
        Owner::Temp(self.temp_counter)
    }

    fn required_live(&self, stmt: NodeId) -> BTreeSet<String> {
        let mut out = self.whole_live.clone();
        if let Some(l) = self.live_after.get(&stmt) {
            out.extend(l.iter().cloned());
        }
        out
    }
}

impl<'a> Analyzer<'a> {
    fn comps(&self, ty: &Type) -> Vec<Component> {
        self.cache.components_of(ty, self.env)
    }

    fn abstract_owner(&self, ty: &Type) -> Owner {
        Owner::Abstract(ty.key())
    }

    fn expr_type(&self, e: &Expr) -> Type {
        self.typeck.expr_types.get(&e.id).cloned().unwrap_or_else(Type::unit)
    }

    // ---- declaration elaboration ----

    /// Elaborates a pre/post specification over concrete owners. The owner
    /// map takes pattern names to (owner, actual type). `result` names the
    /// pattern result when elaborating postconditions.
    fn elaborate_spec(
        &self,
        spec: &SpecKind,
        owners: &BTreeMap<String, (Owner, Type)>,
        contract: &FnContract,
        with_default_abstract: bool,
    ) -> SharingRel {
        let mut rel = SharingRel::new();
        // Existence self-pairs for every named owner.
        for (_, (owner, ty)) in owners {
            for c in self.comps(ty) {
                rel.add_self((owner.clone(), c));
            }
        }
        match spec {
            SpecKind::NoSharing => {}
            SpecKind::DefaultMaximal => {
                // Maximal possible sharing: everything compatible,
                // including abstract.
                let list: Vec<(Owner, Type)> = owners.values().cloned().collect();
                for (i, (o1, t1)) in list.iter().enumerate() {
                    let c1 = self.comps(t1);
                    for (o2, t2) in list.iter().skip(i) {
                        let c2 = self.comps(t2);
                        for a in &c1 {
                            for b in &c2 {
                                if (o1, a) == (o2, b) {
                                    continue;
                                }
                                rel.add((o1.clone(), a.clone()), (o2.clone(), b.clone()));
                            }
                        }
                    }
                    self.add_abstract_pairs(&mut rel, o1, t1);
                }
            }
            SpecKind::Equations(eqs) => {
                for eq in eqs {
                    self.elaborate_equation(&mut rel, eq, owners);
                }
            }
            SpecKind::Rel(stored) => {
                // Stored in declaration space over declared types; re-map
                // owners and re-resolve component paths on actual graphs.
                for Pair(a, b) in stored.iter() {
                    let (Some((oa, ta)), Some((ob, tb))) = (
                        owners.get(&owner_name(&a.0)),
                        owners.get(&owner_name(&b.0)),
                    ) else {
                        // Abstract endpoints survive as-is.
                        if a.0.is_abstract() || b.0.is_abstract() {
                            let mapped_a = self.remap_end(a, owners);
                            let mapped_b = self.remap_end(b, owners);
                            for x in &mapped_a {
                                for y in &mapped_b {
                                    rel.add(x.clone(), y.clone());
                                }
                            }
                        }
                        continue;
                    };
                    let ca = self.remap_comp(&a.1, ta);
                    let cb = self.remap_comp(&b.1, tb);
                    for x in &ca {
                        for y in &cb {
                            rel.add((oa.clone(), x.clone()), (ob.clone(), y.clone()));
                        }
                    }
                }
            }
            SpecKind::Inferred => {
                // Resolved before analysis; reaching here means the
                // inference failed, so leave the spec empty.
            }
        }
        if with_default_abstract {
            // Arguments not marked mutable may always carry unknown
            // (abstract) sharing.
            for (i, name) in contract.arg_names.iter().enumerate() {
                if contract.marked.get(i).copied().unwrap_or(false) {
                    continue;
                }
                if let Some((owner, ty)) = owners.get(name) {
                    self.add_abstract_pairs(&mut rel, owner, ty);
                }
            }
        }
        rel
    }

    fn remap_end(
        &self,
        end: &(Owner, Component),
        owners: &BTreeMap<String, (Owner, Type)>,
    ) -> Vec<(Owner, Component)> {
        if end.0.is_abstract() {
            return vec![end.clone()];
        }
        match owners.get(&owner_name(&end.0)) {
            Some((o, t)) => self
                .remap_comp(&end.1, t)
                .into_iter()
                .map(|c| (o.clone(), c))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Re-resolves a declared component path on an actual type's graph.
    fn remap_comp(&self, c: &Component, actual: &Type) -> Vec<Component> {
        match actual {
            Type::Var(_) | Type::Rigid(_) => {
                vec![Component { path: vec![crate::components::opaque_step(actual)], cell_type: actual.clone() }]
            }
            _ => self.cache.graph(actual, self.env).map_under(&[], &c.path),
        }
    }

    /// Unknown-structure sharing: the owner's cells may coincide with any
    /// compatible cell of the abstract pseudo-variable for its type.
    fn add_abstract_pairs(&self, rel: &mut SharingRel, owner: &Owner, ty: &Type) {
        let ab = self.abstract_owner(ty);
        let comps = self.comps(ty);
        for c in &comps {
            rel.add_self((ab.clone(), c.clone()));
        }
        for c in &comps {
            for d in &comps {
                rel.add((owner.clone(), c.clone()), (ab.clone(), d.clone()));
            }
        }
    }

    /// One sharing equation `lhs = term`: each position of the term
    /// may-coincides with the lhs value at the corresponding folded path,
    /// so all alias-compatible cell pairs between the two sides are
    /// related.
    fn elaborate_equation(
        &self,
        rel: &mut SharingRel,
        eq: &ShareEq,
        owners: &BTreeMap<String, (Owner, Type)>,
    ) {
        let Some((lhs_owner, lhs_ty)) = owners.get(&eq.lhs).cloned() else { return };
        self.elab_term_at(rel, &lhs_owner, &lhs_ty, &[], &eq.rhs, owners);
    }

    fn elab_term_at(
        &self,
        rel: &mut SharingRel,
        lhs_owner: &Owner,
        lhs_ty: &Type,
        prefix: &[Step],
        term: &ShareTerm,
        owners: &BTreeMap<String, (Owner, Type)>,
    ) {
        match term {
            ShareTerm::Var(v) | ShareTerm::Deref(v) => {
                let Some((o, vt)) = owners.get(v) else { return };
                let rhs: Vec<(Owner, Component)> =
                    self.comps(vt).into_iter().map(|c| (o.clone(), c)).collect();
                self.cross_pairs(rel, lhs_owner, lhs_ty, prefix, &rhs);
            }
            ShareTerm::Abstract => {
                let ab = self.abstract_owner(lhs_ty);
                let rhs: Vec<(Owner, Component)> = self
                    .comps(lhs_ty)
                    .into_iter()
                    .map(|c| {
                        rel.add_self((ab.clone(), c.clone()));
                        (ab.clone(), c)
                    })
                    .collect();
                self.cross_pairs(rel, lhs_owner, lhs_ty, prefix, &rhs);
            }
            ShareTerm::Ctor(name, args) => {
                if matches!(lhs_ty, Type::Var(_) | Type::Rigid(_)) {
                    return;
                }
                let g = self.cache.graph(lhs_ty, self.env);
                for (i, arg) in args.iter().enumerate() {
                    let mut child = prefix.to_vec();
                    child.push(Step::Ctor(name.clone(), i));
                    let Some(cell) = g.resolve_path(&child) else { continue };
                    rel.add_self((lhs_owner.clone(), cell.clone()));
                    self.elab_term_at(rel, lhs_owner, lhs_ty, &cell.path, arg, owners);
                }
            }
        }
    }

    /// All alias-compatible pairs between the lhs cells at/below `prefix`
    /// and the given cells.
    fn cross_pairs(
        &self,
        rel: &mut SharingRel,
        lhs_owner: &Owner,
        lhs_ty: &Type,
        prefix: &[Step],
        rhs: &[(Owner, Component)],
    ) {
        let lhs_cells: Vec<Component> = match lhs_ty {
            Type::Var(_) | Type::Rigid(_) => self.comps(lhs_ty),
            _ => self.cache.graph(lhs_ty, self.env).at_or_below(prefix),
        };
        for lc in &lhs_cells {
            for (ro, rc) in rhs {
                if (lhs_owner, lc) == (ro, rc) {
                    continue;
                }
                rel.add((lhs_owner.clone(), lc.clone()), (ro.clone(), rc.clone()));
            }
        }
    }

    // ---- postcondition inference ----

    fn resolve_inferred_posts(&mut self) {
        let names: Vec<String> = self
            .contracts
            .by_name
            .iter()
            .filter(|(_, c)| matches!(c.post, SpecKind::Inferred))
            .map(|(n, _)| n.clone())
            .collect();
        for name in names {
            if self.typeck.poisoned.contains(&name) {
                continue;
            }
            let Some(def) = self.program.def(&name) else { continue };
            if let Some(rel) = self.infer_postcondition(def) {
                self.inferred_posts.insert(name.clone(), rel.clone());
                let mut c = (*self.contracts.by_name[&name]).clone();
                c.post = SpecKind::Rel(rel);
                self.contracts.by_name.insert(name, Rc::new(c));
            } else {
                let span = self
                    .program
                    .signature(&name)
                    .map(|s| s.span)
                    .unwrap_or_default();
                self.diags.push(Diagnostic::error(
                    Code::E203,
                    span,
                    format!(
                        "postcondition of `{}` cannot be inferred: the definition must be pure and contain no function calls",
                        name
                    ),
                ));
                let mut c = (*self.contracts.by_name[&name]).clone();
                c.post = SpecKind::NoSharing;
                self.contracts.by_name.insert(name, Rc::new(c));
            }
        }
    }

    /// The least declaration entailed by the body, for definitions that
    /// are pure and contain no function calls. Declaration space, over
    /// pattern names.
    pub fn infer_postcondition(&mut self, def: &FunctionDef) -> Option<SharingRel> {
        if body_has_calls_or_updates(&def.body) {
            return None;
        }
        let contract = self.contracts.get(&def.name)?;
        let mut ctx = self.entry_ctx(def, &contract, false, true);
        let result = self.exec_block(&def.body, &mut ctx)?;
        // Rename into declaration space and keep only formals + result.
        let mut rename: BTreeMap<Owner, Owner> = BTreeMap::new();
        for (i, (p, _)) in def.params.iter().enumerate() {
            if let Some(pat) = contract.arg_names.get(i) {
                rename.insert(Owner::Var(p.clone()), Owner::Var(pat.clone()));
            }
        }
        rename.insert(result.clone(), Owner::Var(contract.result_name.clone()));
        let computed = ctx.rel.map_owners(|o| {
            if let Some(mapped) = rename.get(o) {
                Some(mapped.clone())
            } else if o.is_abstract() {
                Some(o.clone())
            } else {
                None
            }
        });
        Some(computed)
    }

    // ---- function analysis ----

    fn entry_ctx(&mut self, def: &FunctionDef, contract: &FnContract, record: bool, quiet: bool) -> FnCtx {
        let mut owner_types = BTreeMap::new();
        let mut owners = BTreeMap::new();
        for (i, (p, _)) in def.params.iter().enumerate() {
            let ty = contract
                .arg_types
                .get(i)
                .cloned()
                .unwrap_or_else(Type::unit);
            owner_types.insert(Owner::Var(p.clone()), ty.clone());
            if let Some(pat) = contract.arg_names.get(i) {
                owners.insert(pat.clone(), (Owner::Var(p.clone()), ty));
            }
        }
        let mut rel = self.elaborate_spec(&contract.pre, &owners, contract, !quiet);
        rel.saturate();
        // Implicit state variables: ro/rw are bound at entry; wo is not.
        for (sv, mode) in &contract.implicits {
            if let Some(ty) = self.state_var_type(sv) {
                owner_types.insert(Owner::State(sv.clone()), ty.clone());
                if !matches!(mode, Mode::Wo) {
                    for c in self.comps(&ty) {
                        rel.add_self((Owner::State(sv.clone()), c));
                    }
                }
            }
        }
        let mut whole_live: BTreeSet<String> = self
            .typeck
            .poly_live
            .get(&def.name)
            .cloned()
            .unwrap_or_default();
        for (i, (p, _)) in def.params.iter().enumerate() {
            if contract.marked.get(i).copied().unwrap_or(false) {
                whole_live.insert(p.clone());
            }
        }
        let mut live_after = HashMap::new();
        let mut live = BTreeSet::new();
        liveness_expr(&def.body, &mut live, &mut live_after);
        // Closures visible at entry: formals with function types.
        let mut closures = HashMap::new();
        for (i, (p, _)) in def.params.iter().enumerate() {
            if let Some(t @ Type::Fun(..)) = contract.arg_types.get(i) {
                let c = self
                    .contracts
                    .ho_args
                    .get(&(def.name.clone(), i))
                    .cloned()
                    .unwrap_or_else(|| {
                        Rc::new(FnContract::default_for(p, t, Vec::new(), def.span))
                    });
                closures.insert(p.clone(), ClosureRef { contract: c, supplied: 0 });
            }
        }
        FnCtx {
            fn_name: def.name.clone(),
            rel,
            owner_types,
            live_after,
            whole_live,
            temp_counter: 0,
            visits: 0,
            closures,
            current_stmt: NodeId::default(),
            quiet,
            record,
        }
    }

    fn state_var_type(&self, name: &str) -> Option<Type> {
        if name == "io" {
            return Some(Type::reference(Type::App("Io".into(), vec![])));
        }
        let decl = self.program.state_var(name)?;
        self.env.resolve(&decl.ty).ok()
    }

    pub fn analyze_function(&mut self, def: &FunctionDef) {
        let Some(contract) = self.contracts.get(&def.name) else { return };
        let mut ctx = self.entry_ctx(def, &contract, true, false);
        self.whole_live.insert(def.name.clone(), ctx.whole_live.clone());
        // Entry snapshot under the body's node id.
        self.snapshots
            .insert((def.name.clone(), def.body.id), ctx.rel.restrict(|o| !o.is_temp()));
        self.stmt_order
            .entry(def.name.clone())
            .or_default()
            .push((def.body.id, def.span));
        for (id, l) in &ctx.live_after {
            self.live_after.insert((def.name.clone(), *id), l.clone());
        }
        let result = match self.exec_block(&def.body, &mut ctx) {
            Some(r) => r,
            None => return,
        };
        self.check_return(def, &contract, &mut ctx, result);
        let total = count_stmts(&def.body);
        self.stmt_visits.insert(def.name.clone(), (ctx.visits, total));
        debug_assert_eq!(ctx.visits, total, "{} visited statements", def.name);
    }

    fn check_return(
        &mut self,
        def: &FunctionDef,
        contract: &FnContract,
        ctx: &mut FnCtx,
        result: Owner,
    ) {
        // State-variable escape through the result (E301).
        let declared: BTreeSet<&String> = contract.implicits.iter().map(|(n, _)| n).collect();
        let mut escaped: BTreeSet<String> = BTreeSet::new();
        for p in ctx.rel.pairs_of_owner(&result) {
            for end in [&p.0, &p.1] {
                if let Owner::State(sv) = &end.0 {
                    if !declared.contains(sv) {
                        escaped.insert(sv.clone());
                    }
                }
            }
        }
        for sv in escaped {
            self.diags.push(Diagnostic::error(
                Code::E301,
                def.span,
                format!(
                    "state variable `{}` (or an alias of it) is returned from `{}`, which does not declare it implicit",
                    sv, def.name
                ),
            ));
        }
        // Postcondition entailment (E203).
        if matches!(contract.post, SpecKind::DefaultMaximal) {
            return;
        }
        let mut rename: BTreeMap<Owner, Owner> = BTreeMap::new();
        let mut owners: BTreeMap<String, (Owner, Type)> = BTreeMap::new();
        for (i, (p, _)) in def.params.iter().enumerate() {
            if let (Some(pat), Some(ty)) = (contract.arg_names.get(i), contract.arg_types.get(i)) {
                rename.insert(Owner::Var(p.clone()), Owner::Var(pat.clone()));
                owners.insert(pat.clone(), (Owner::Var(pat.clone()), ty.clone()));
            }
        }
        rename.insert(result.clone(), Owner::Var(contract.result_name.clone()));
        owners.insert(
            contract.result_name.clone(),
            (Owner::Var(contract.result_name.clone()), contract.result_type.clone()),
        );
        let computed = ctx.rel.map_owners(|o| match o {
            o if rename.contains_key(o) => Some(rename[o].clone()),
            Owner::Abstract(_) | Owner::State(_) => Some(o.clone()),
            _ => None,
        });
        let mut target = self.elaborate_spec(&contract.pre, &owners, contract, true);
        let post_rel = self.elaborate_spec(&contract.post, &owners, contract, true);
        target.union_with(&post_rel);
        // Declared state variables keep their own cells.
        for (sv, _) in &contract.implicits {
            if let Some(ty) = self.state_var_type(sv) {
                for c in self.comps(&ty) {
                    target.add_self((Owner::State(sv.clone()), c));
                }
            }
        }
        target.saturate();
        let mut offending: Vec<&Pair> =
            computed.iter().filter(|p| !p.is_self() && !target.contains(p)).collect();
        offending.sort();
        if let Some(first) = offending.first() {
            self.diags.push(Diagnostic::error(
                Code::E203,
                def.span,
                format!(
                    "postcondition of `{}` is not satisfied: computed sharing `{}` exceeds the declaration",
                    def.name, first
                ),
            ));
        }
    }

    // ---- statement execution ----

    fn exec_block(&mut self, block: &Expr, ctx: &mut FnCtx) -> Option<Owner> {
        let stmts = block.block_stmts();
        let mut last: Option<Owner> = None;
        for (i, stmt) in stmts.iter().enumerate() {
            let value = self.exec_stmt(stmt, ctx)?;
            if i + 1 == stmts.len() {
                last = Some(value);
            } else {
                self.drop_temps(ctx, &[]);
            }
        }
        let result = match last {
            Some(v) => v,
            None => ctx.fresh_temp(),
        };
        Some(result)
    }

    fn exec_stmt(&mut self, stmt: &Stmt, ctx: &mut FnCtx) -> Option<Owner> {
        ctx.visits += 1;
        let saved_stmt = ctx.current_stmt;
        ctx.current_stmt = stmt.id;
        let result = match &stmt.kind {
            StmtKind::Let { name, value, .. } => {
                let (theta, ty) = self.eval_expr(value, ctx)?;
                let owner = Owner::Var(name.clone());
                ctx.rel.kill_owner(&owner);
                ctx.rel.rename_owner(&theta, &owner);
                ctx.owner_types.insert(owner.clone(), ty);
                // Closure bookkeeping for partial applications.
                self.track_closure(name, value, ctx);
                // A binding statement has unit value.
                Some(ctx.fresh_temp())
            }
            StmtKind::RefBind { name, value, .. } => {
                let (theta, _) = self.eval_expr(value, ctx)?;
                let is_state = self.state_var_type(name).is_some();
                let owner = if is_state {
                    Owner::State(name.clone())
                } else {
                    Owner::Var(name.clone())
                };
                let ref_ty = if is_state {
                    self.state_var_type(name).unwrap()
                } else {
                    Type::reference(self.expr_type(value))
                };
                ctx.rel.kill_owner(&owner);
                ctx.owner_types.insert(owner.clone(), ref_ty.clone());
                let g = self.cache.graph(&ref_ty, self.env);
                let mut batch = Vec::new();
                if let Some(rt) = g.resolve_path(&[Step::RefTarget]) {
                    batch.push(Pair::new((owner.clone(), rt.clone()), (owner.clone(), rt)));
                }
                // Contents of the fresh cell are the evaluated value.
                let theta_pairs: Vec<Pair> = ctx.rel.pairs_of_owner(&theta).cloned().collect();
                for p in theta_pairs {
                    self.map_content_pairs(&mut batch, &p, &theta, &owner, &g, &[Step::RefTarget]);
                }
                plain_add(&mut ctx.rel, batch);
                self.drop_temps(ctx, &[]);
                Some(ctx.fresh_temp())
            }
            StmtKind::Update { target, target_span, value, annots } => {
                self.exec_update(stmt, target, *target_span, value, annots, ctx)?;
                Some(ctx.fresh_temp())
            }
            StmtKind::Expr(e) => {
                let (theta, _) = self.eval_expr(e, ctx)?;
                Some(theta)
            }
        };
        if ctx.record {
            let snap = ctx.rel.restrict(|o| !o.is_temp());
            self.snapshots.insert((ctx.fn_name.clone(), stmt.id), snap);
            self.stmt_order
                .entry(ctx.fn_name.clone())
                .or_default()
                .push((stmt.id, stmt.span));
        }
        ctx.current_stmt = saved_stmt;
        result
    }

    /// Maps every pair of `src` (a value owner) into `target` under the
    /// given prefix: the value is stored in the cell(s) at that prefix.
    fn map_content_pairs(
        &self,
        batch: &mut Vec<Pair>,
        p: &Pair,
        src: &Owner,
        target: &Owner,
        target_graph: &crate::components::FoldedGraph,
        prefix: &[Step],
    ) {
        let (mine, other) = if &p.0 .0 == src { (&p.0, &p.1) } else { (&p.1, &p.0) };
        if &mine.0 != src {
            return;
        }
        let mapped = target_graph.map_under(prefix, &mine.1.path);
        for m in mapped {
            if p.is_self() {
                batch.push(Pair::new((target.clone(), m.clone()), (target.clone(), m.clone())));
            } else {
                batch.push(Pair::new((target.clone(), m), other.clone()));
            }
        }
    }

    fn track_closure(&mut self, name: &str, value: &Expr, ctx: &mut FnCtx) {
        ctx.closures.remove(name);
        match &value.kind {
            ExprKind::Var(v) => {
                if let Some(cr) = ctx.closures.get(v).cloned() {
                    ctx.closures.insert(name.to_string(), cr);
                } else if let Some(c) = self.contracts.get(v) {
                    ctx.closures.insert(name.to_string(), ClosureRef { contract: c, supplied: 0 });
                }
            }
            ExprKind::Call { callee, args, state_call: false, .. } => {
                if let ExprKind::Var(v) = &callee.kind {
                    let base = ctx
                        .closures
                        .get(v)
                        .cloned()
                        .or_else(|| self.contracts.get(v).map(|c| ClosureRef { contract: c, supplied: 0 }));
                    if let Some(cr) = base {
                        let total = cr.contract.arg_names.len();
                        let now = cr.supplied + args.len();
                        if now < total {
                            ctx.closures.insert(
                                name.to_string(),
                                ClosureRef { contract: cr.contract, supplied: now },
                            );
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn exec_update(
        &mut self,
        stmt: &Stmt,
        target: &str,
        target_span: Span,
        value: &Expr,
        annots: &[Annot],
        ctx: &mut FnCtx,
    ) -> Option<()> {
        let (theta, _) = self.eval_expr(value, ctx)?;
        let is_state = ctx.owner_types.contains_key(&Owner::State(target.to_string()))
            || self.state_var_type(target).is_some();
        let owner = if is_state {
            Owner::State(target.to_string())
        } else {
            Owner::Var(target.to_string())
        };
        let Some(ref_ty) = ctx
            .owner_types
            .get(&owner)
            .cloned()
            .or_else(|| self.state_var_type(target))
        else {
            return Some(());
        };
        let g = self.cache.graph(&ref_ty, self.env);
        let Some(rt) = g.resolve_path(&[Step::RefTarget]) else { return Some(()) };
        // Every cell the target's ref may address: its own target plus all
        // aliases of it. Abstract sharing is reported by the affected-set
        // check below; no content pairs are tracked for it.
        let mut prefixes: Vec<(Owner, Vec<Step>, Type)> =
            vec![(owner.clone(), rt.path.clone(), ref_ty.clone())];
        let rt_oc = (owner.clone(), rt.clone());
        for (o, c) in ctx.rel.aliases_of(&rt_oc).cloned().collect::<Vec<_>>() {
            let t = ctx.owner_types.get(&o).cloned().or_else(|| match &o {
                Owner::State(sv) => self.state_var_type(sv),
                _ => None,
            });
            if let Some(t) = t {
                prefixes.push((o, c.path, t));
            }
        }
        // New contents flow into every addressed cell.
        let theta_pairs: Vec<Pair> = ctx.rel.pairs_of_owner(&theta).cloned().collect();
        let mut batch = Vec::new();
        let mut targets_by_comp: BTreeMap<Vec<Step>, Vec<(Owner, Component)>> = BTreeMap::new();
        for (o, prefix, t) in &prefixes {
            let og = self.cache.graph(t, self.env);
            for p in &theta_pairs {
                self.map_content_pairs(&mut batch, p, &theta, o, &og, prefix);
            }
            for p in &theta_pairs {
                let (mine, _) = if p.0 .0 == theta { (&p.0, &p.1) } else { (&p.1, &p.0) };
                if mine.0 != theta {
                    continue;
                }
                for m in og.map_under(prefix, &mine.1.path) {
                    targets_by_comp.entry(mine.1.path.clone()).or_default().push((o.clone(), m));
                }
            }
        }
        // Cells reached through different prefixes may be the same cell.
        for (_, targets) in &targets_by_comp {
            for i in 0..targets.len() {
                for j in (i + 1)..targets.len() {
                    batch.push(Pair::new(
                        (targets[i].0.clone(), targets[i].1.clone()),
                        (targets[j].0.clone(), targets[j].1.clone()),
                    ));
                }
            }
        }
        plain_add(&mut ctx.rel, batch);
        // Affected set: every live owner aliasing the post-update reach of
        // the target.
        let annotated: BTreeSet<String> = annots
            .iter()
            .map(|a| a.name.clone())
            .chain([target.to_string()])
            .collect();
        self.check_affected(
            stmt.id,
            stmt.span,
            &[owner.clone()],
            &annotated,
            ctx,
            "update",
        );
        let _ = target_span;
        self.drop_temps(ctx, &[]);
        Some(())
    }

    /// E201/E204: every live owner sharing any component of the updated
    /// roots must be annotated; abstract sharing is an error.
    fn check_affected(
        &mut self,
        stmt: NodeId,
        span: Span,
        roots: &[Owner],
        annotated: &BTreeSet<String>,
        ctx: &mut FnCtx,
        what: &str,
    ) {
        if ctx.quiet {
            return;
        }
        let required_live = ctx.required_live(stmt);
        let mut missing: BTreeSet<String> = BTreeSet::new();
        let mut hit_abstract = false;
        for root in roots {
            let pairs: Vec<Pair> = ctx.rel.pairs_of_owner(root).cloned().collect();
            for p in pairs {
                for end in [&p.0, &p.1] {
                    if &end.0 == root {
                        continue;
                    }
                    match &end.0 {
                        Owner::Abstract(_) => hit_abstract = true,
                        Owner::Var(n) => {
                            if !annotated.contains(n)
                                && required_live.contains(n)
                                && !roots.contains(&end.0)
                            {
                                missing.insert(n.clone());
                            }
                        }
                        Owner::State(n) => {
                            if !annotated.contains(n) && !roots.contains(&end.0) {
                                missing.insert(n.clone());
                            }
                        }
                        Owner::Temp(_) => {}
                    }
                }
            }
        }
        if hit_abstract {
            self.diags.push(Diagnostic::error(
                Code::E204,
                span,
                format!(
                    "this {} may modify a value that shares with `abstract`; only concrete data structures can be updated",
                    what
                ),
            ));
        }
        if !missing.is_empty() {
            let names: Vec<String> = missing.iter().map(|n| format!("`{}`", n)).collect();
            let hint: Vec<String> = missing.iter().map(|n| format!("!{}", n)).collect();
            self.diags.push(Diagnostic::error(
                Code::E201,
                span,
                format!(
                    "this {} may affect {}, which must be annotated here ({})",
                    what,
                    names.join(", "),
                    hint.join(" ")
                ),
            ));
        }
    }

    fn drop_temps(&mut self, ctx: &mut FnCtx, keep: &[Owner]) {
        let temps: Vec<Owner> = ctx
            .owner_types
            .keys()
            .filter(|o| o.is_temp() && !keep.contains(o))
            .cloned()
            .collect();
        for t in temps {
            ctx.rel.kill_owner(&t);
            ctx.owner_types.remove(&t);
        }
        // Relation pairs of temps not in owner_types (value temps).
        let stray: Vec<Owner> = ctx
            .rel
            .iter()
            .flat_map(|p| [p.0 .0.clone(), p.1 .0.clone()])
            .filter(|o| o.is_temp() && !keep.contains(o))
            .collect();
        for t in stray {
            ctx.rel.kill_owner(&t);
        }
    }

    // ---- expression evaluation ----

    fn eval_expr(&mut self, e: &Expr, ctx: &mut FnCtx) -> Option<(Owner, Type)> {
        let ty = self.expr_type(e);
        match &e.kind {
            ExprKind::IntLit(_) | ExprKind::Unit => {
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                Some((theta, ty))
            }
            ExprKind::Var(name) => {
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                let src = self.source_owner(name, ctx);
                if let Some(src) = src {
                    self.copy_owner(&theta, &src, &ty, ctx);
                }
                Some((theta, ty))
            }
            ExprKind::Deref(name) => {
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                if let Some(src) = self.source_owner(name, ctx) {
                    let src_ty = ctx.owner_types.get(&src).cloned();
                    if let Some(src_ty) = src_ty {
                        let g = self.cache.graph(&src_ty, self.env);
                        let mut batch = Vec::new();
                        for c in self.comps(&ty) {
                            for m in g.map_under(&[Step::RefTarget], &c.path) {
                                let src_oc = (src.clone(), m);
                                if ctx.rel.exists(&src_oc) {
                                    batch.push(Pair::new((theta.clone(), c.clone()), (theta.clone(), c.clone())));
                                    batch.push(Pair::new((theta.clone(), c.clone()), src_oc.clone()));
                                    for al in ctx.rel.aliases_of(&src_oc) {
                                        batch.push(Pair::new((theta.clone(), c.clone()), al.clone()));
                                    }
                                }
                            }
                        }
                        plain_add(&mut ctx.rel, batch);
                    }
                }
                Some((theta, ty))
            }
            ExprKind::Ctor { name, args } => {
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                if matches!(ty, Type::Var(_) | Type::Rigid(_)) {
                    return Some((theta, ty));
                }
                let g = self.cache.graph(&ty, self.env);
                let mut batch = Vec::new();
                for (i, arg) in args.iter().enumerate() {
                    let step = Step::Ctor(name.clone(), i);
                    let Some(cell) = g.resolve_path(&[step.clone()]) else { continue };
                    // Fresh argument cell exists.
                    batch.push(Pair::new((theta.clone(), cell.clone()), (theta.clone(), cell.clone())));
                    let (atheta, _) = self.eval_expr(arg, ctx)?;
                    let apairs: Vec<Pair> = ctx.rel.pairs_of_owner(&atheta).cloned().collect();
                    for p in &apairs {
                        self.map_content_pairs(&mut batch, p, &atheta, &theta, &g, &[step.clone()]);
                    }
                }
                plain_add(&mut ctx.rel, batch);
                Some((theta, ty))
            }
            ExprKind::Binop { lhs, rhs, .. } => {
                self.eval_expr(lhs, ctx)?;
                self.eval_expr(rhs, ctx)?;
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                Some((theta, ty))
            }
            ExprKind::Cast { expr, .. } => self.eval_expr(expr, ctx),
            ExprKind::If { cond, then_branch, else_branch } => {
                self.eval_expr(cond, ctx)?;
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                let saved = ctx.rel.clone();
                let (t1, _) = self.eval_branch(then_branch, ctx)?;
                ctx.rel.rename_owner(&t1, &theta);
                let after_then = ctx.rel.clone();
                ctx.rel = saved;
                let (t2, _) = self.eval_branch(else_branch, ctx)?;
                ctx.rel.rename_owner(&t2, &theta);
                ctx.rel.union_with(&after_then);
                Some((theta, ty))
            }
            ExprKind::Case { scrutinee, arms } => {
                let (stheta, sty) = self.eval_expr(scrutinee, ctx)?;
                let theta = ctx.fresh_temp();
                ctx.owner_types.insert(theta.clone(), ty.clone());
                let base = ctx.rel.clone();
                let mut joined: Option<SharingRel> = None;
                for arm in arms {
                    if !self.arm_reachable(arm, &stheta, &sty, &base) {
                        continue;
                    }
                    ctx.rel = base.clone();
                    self.bind_arm(arm, &stheta, &sty, ctx);
                    let Some((at, _)) = self.eval_branch(&arm.body, ctx) else { continue };
                    ctx.rel.rename_owner(&at, &theta);
                    // Arm binders go out of scope.
                    for b in &arm.binders {
                        if let Some(n) = b.name() {
                            ctx.rel.kill_owner(&Owner::Var(n.to_string()));
                            ctx.owner_types.remove(&Owner::Var(n.to_string()));
                        }
                    }
                    match &mut joined {
                        None => joined = Some(ctx.rel.clone()),
                        Some(j) => j.union_with(&ctx.rel),
                    }
                }
                ctx.rel = joined.unwrap_or(base);
                Some((theta, ty))
            }
            ExprKind::Block(_) => {
                let r = self.exec_block(e, ctx)?;
                let t = ctx
                    .owner_types
                    .get(&r)
                    .cloned()
                    .unwrap_or_else(|| self.expr_type(e));
                Some((r, t))
            }
            ExprKind::Call { .. } => self.eval_call(e, ctx),
        }
    }

    fn eval_branch(&mut self, e: &Expr, ctx: &mut FnCtx) -> Option<(Owner, Type)> {
        self.eval_expr(e, ctx)
    }

    /// An arm with argument cells is unreachable when the scrutinee is
    /// known not to have those cells (e.g. a list known to be Nil has no
    /// components).
    fn arm_reachable(&self, arm: &Arm, stheta: &Owner, sty: &Type, rel: &SharingRel) -> bool {
        if matches!(sty, Type::Var(_) | Type::Rigid(_)) {
            return true;
        }
        let Some(info) = self.env.ctors.get(&arm.ctor) else { return true };
        if info.args.is_empty() {
            return true;
        }
        let g = self.cache.graph(sty, self.env);
        (0..info.args.len()).all(|i| {
            match g.resolve_path(&[Step::Ctor(arm.ctor.clone(), i)]) {
                Some(c) => rel.exists(&(stheta.clone(), c)),
                None => true,
            }
        })
    }

    fn bind_arm(&mut self, arm: &Arm, stheta: &Owner, sty: &Type, ctx: &mut FnCtx) {
        if matches!(sty, Type::Var(_) | Type::Rigid(_)) {
            return;
        }
        let g = self.cache.graph(sty, self.env);
        let Some(arg_types) = self.env.ctor_arg_types(&arm.ctor, sty) else { return };
        for (i, binder) in arm.binders.iter().enumerate() {
            let step = Step::Ctor(arm.ctor.clone(), i);
            let Some(cell) = g.resolve_path(&[step.clone()]) else { continue };
            let cell_oc = (stheta.clone(), cell.clone());
            match binder {
                Binder::Wild(_) => {}
                Binder::Var(n, _) => {
                    let owner = Owner::Var(n.clone());
                    ctx.rel.kill_owner(&owner);
                    let bty = arg_types[i].clone();
                    ctx.owner_types.insert(owner.clone(), bty.clone());
                    // The binder receives the cell's value: its components
                    // are the scrutinee's components под the cell.
                    let mut batch = Vec::new();
                    for c in self.comps(&bty) {
                        for m in g.map_under(&[step.clone()], &c.path) {
                            let src_oc = (stheta.clone(), m);
                            if ctx.rel.exists(&src_oc) {
                                batch.push(Pair::new((owner.clone(), c.clone()), (owner.clone(), c.clone())));
                                batch.push(Pair::new((owner.clone(), c.clone()), src_oc.clone()));
                                for al in ctx.rel.aliases_of(&src_oc) {
                                    batch.push(Pair::new((owner.clone(), c.clone()), al.clone()));
                                }
                            }
                        }
                    }
                    plain_add(&mut ctx.rel, batch);
                }
                Binder::Deref(n, _) => {
                    let owner = Owner::Var(n.clone());
                    ctx.rel.kill_owner(&owner);
                    let bty = Type::reference(arg_types[i].clone());
                    ctx.owner_types.insert(owner.clone(), bty.clone());
                    let bg = self.cache.graph(&bty, self.env);
                    let Some(rt) = bg.resolve_path(&[Step::RefTarget]) else { continue };
                    let mut batch = Vec::new();
                    // The ref addresses the constructor-argument cell
                    // itself; no allocation.
                    batch.push(Pair::new((owner.clone(), rt.clone()), (owner.clone(), rt.clone())));
                    batch.push(Pair::new((owner.clone(), rt.clone()), cell_oc.clone()));
                    for al in ctx.rel.aliases_of(&cell_oc) {
                        batch.push(Pair::new((owner.clone(), rt.clone()), al.clone()));
                    }
                    // Sub-components under the ref target mirror the
                    // scrutinee's components under the cell.
                    for c in self.comps(&arg_types[i]) {
                        let mine = bg.map_under(&[Step::RefTarget], &c.path);
                        let theirs = g.map_under(&[step.clone()], &c.path);
                        for m in &mine {
                            for t in &theirs {
                                let src_oc = (stheta.clone(), t.clone());
                                if ctx.rel.exists(&src_oc) {
                                    batch.push(Pair::new(
                                        (owner.clone(), m.clone()),
                                        (owner.clone(), m.clone()),
                                    ));
                                    batch.push(Pair::new((owner.clone(), m.clone()), src_oc.clone()));
                                    for al in ctx.rel.aliases_of(&src_oc) {
                                        batch.push(Pair::new((owner.clone(), m.clone()), al.clone()));
                                    }
                                }
                            }
                        }
                    }
                    plain_add(&mut ctx.rel, batch);
                }
            }
        }
    }

    fn source_owner(&self, name: &str, ctx: &FnCtx) -> Option<Owner> {
        let var = Owner::Var(name.to_string());
        if ctx.owner_types.contains_key(&var) {
            return Some(var);
        }
        let sv = Owner::State(name.to_string());
        if ctx.owner_types.contains_key(&sv) || self.state_var_type(name).is_some() {
            return Some(sv);
        }
        None
    }

    fn copy_owner(&self, theta: &Owner, src: &Owner, ty: &Type, ctx: &mut FnCtx) {
        let mut batch = Vec::new();
        for c in self.comps(ty) {
            let src_oc = (src.clone(), c.clone());
            if ctx.rel.exists(&src_oc) {
                batch.push(Pair::new((theta.clone(), c.clone()), (theta.clone(), c.clone())));
                batch.push(Pair::new((theta.clone(), c.clone()), src_oc.clone()));
                for al in ctx.rel.aliases_of(&src_oc) {
                    batch.push(Pair::new((theta.clone(), c.clone()), al.clone()));
                }
            }
        }
        plain_add(&mut ctx.rel, batch);
    }

    // ---- calls ----

    fn eval_call(&mut self, e: &Expr, ctx: &mut FnCtx) -> Option<(Owner, Type)> {
        let ExprKind::Call { callee, args, annots, state_call } = &e.kind else { return None };
        let contract = self.resolve_contract(callee, ctx);
        let result_ty = self.expr_type(e);

        // Evaluate arguments left to right.
        let mut arg_thetas = Vec::new();
        for arg in args {
            let (t, ty) = self.eval_expr(&arg.expr, ctx)?;
            arg_thetas.push((t, ty, arg));
        }

        let Some(contract) = contract else {
            // Unknown callee shape: be maximally conservative about the
            // result.
            let theta = ctx.fresh_temp();
            ctx.owner_types.insert(theta.clone(), result_ty.clone());
            let mut batch = Vec::new();
            let ab = self.abstract_owner(&result_ty);
            for c in self.comps(&result_ty) {
                batch.push(Pair::new((theta.clone(), c.clone()), (theta.clone(), c.clone())));
                batch.push(Pair::new((ab.clone(), c.clone()), (ab.clone(), c.clone())));
                batch.push(Pair::new((theta.clone(), c.clone()), (ab.clone(), c.clone())));
            }
            close_add(&mut ctx.rel, batch, Some(&theta));
            return Some((theta, result_ty));
        };

        let arity = contract.arg_names.len();
        if args.len() < arity {
            // Partial application: a closure value. Captured mutable data
            // is conservatively poisoned.
            let theta = ctx.fresh_temp();
            ctx.owner_types.insert(theta.clone(), result_ty.clone());
            for (i, (_, ty, arg)) in arg_thetas.iter().enumerate() {
                if contract.marked.get(i).copied().unwrap_or(false) {
                    if let ExprKind::Var(n) = &arg.expr.kind {
                        if let Some(owner) = self.source_owner(n, ctx) {
                            let mut batch = Vec::new();
                            let ab = self.abstract_owner(ty);
                            for c in self.comps(ty) {
                                batch.push(Pair::new((ab.clone(), c.clone()), (ab.clone(), c.clone())));
                                batch.push(Pair::new((owner.clone(), c.clone()), (ab.clone(), c.clone())));
                            }
                            plain_add(&mut ctx.rel, batch);
                        }
                    }
                }
            }
            return Some((theta, result_ty));
        }

        // (E302, the `!` prefix on calls with implicits, is checked by the
        // state-variable pass.)
        let _ = state_call;

        // Higher-order compatibility of function-typed actuals.
        for (i, (_, _, arg)) in arg_thetas.iter().enumerate() {
            if let Some(expected) = self.contracts.ho_args.get(&(contract.name.clone(), i)).cloned()
            {
                if let ExprKind::Var(n) = &arg.expr.kind {
                    let actual = ctx
                        .closures
                        .get(n)
                        .map(|c| c.contract.clone())
                        .or_else(|| self.contracts.get(n));
                    if let Some(actual) = actual {
                        self.check_ho_compat(&actual, &expected, arg.expr.span, ctx);
                    }
                }
            }
        }

        // Precondition check (E202).
        self.check_precondition(e.span, &contract, &arg_thetas, ctx);

        // E301: arguments aliasing state variables the callee does not
        // declare.
        if !ctx.quiet {
            let declared: BTreeSet<&String> = contract.implicits.iter().map(|(n, _)| n).collect();
            let mut escaped = BTreeSet::new();
            for (t, _, _) in &arg_thetas {
                for p in ctx.rel.pairs_of_owner(t) {
                    for end in [&p.0, &p.1] {
                        if let Owner::State(sv) = &end.0 {
                            if !declared.contains(sv) {
                                escaped.insert(sv.clone());
                            }
                        }
                    }
                }
            }
            for sv in escaped {
                self.diags.push(Diagnostic::error(
                    Code::E301,
                    e.span,
                    format!(
                        "state variable `{}` (or an alias of it) is passed to `{}`, which does not declare it implicit",
                        sv, contract.name
                    ),
                ));
            }
        }

        // State-variable effects.
        let mut updated_roots: Vec<Owner> = Vec::new();
        for (sv, mode) in &contract.implicits {
            let owner = Owner::State(sv.clone());
            if let Some(ty) = self.state_var_type(sv) {
                ctx.owner_types.insert(owner.clone(), ty.clone());
                match mode {
                    Mode::Wo => {
                        ctx.rel.kill_owner(&owner);
                        let mut batch = Vec::new();
                        for c in self.comps(&ty) {
                            batch.push(Pair::new((owner.clone(), c.clone()), (owner.clone(), c.clone())));
                        }
                        plain_add(&mut ctx.rel, batch);
                    }
                    Mode::Rw => {
                        let mut batch = Vec::new();
                        for c in self.comps(&ty) {
                            batch.push(Pair::new((owner.clone(), c.clone()), (owner.clone(), c.clone())));
                        }
                        // Distinct updatable state variables of the callee
                        // may come to share with each other.
                        for (sv2, mode2) in &contract.implicits {
                            if sv2 == sv || matches!(mode2, Mode::Ro) {
                                continue;
                            }
                            if let Some(ty2) = self.state_var_type(sv2) {
                                let o2 = Owner::State(sv2.clone());
                                for c in self.comps(&ty) {
                                    for c2 in self.comps(&ty2) {
                                        batch.push(Pair::new(
                                            (owner.clone(), c.clone()),
                                            (o2.clone(), c2.clone()),
                                        ));
                                    }
                                }
                            }
                        }
                        plain_add(&mut ctx.rel, batch);
                        updated_roots.push(owner.clone());
                    }
                    Mode::Ro => {}
                }
            }
        }

        // Marked arguments: cells may be updated and created by the callee.
        for (i, (_, ty, arg)) in arg_thetas.iter().enumerate() {
            let marked_in_sig = contract.marked.get(i).copied().unwrap_or(false);
            if marked_in_sig {
                if let ExprKind::Var(n) = &arg.expr.kind {
                    if let Some(owner) = self.source_owner(n, ctx) {
                        let mut batch = Vec::new();
                        for c in self.comps(ty) {
                            batch.push(Pair::new((owner.clone(), c.clone()), (owner.clone(), c.clone())));
                        }
                        plain_add(&mut ctx.rel, batch);
                        updated_roots.push(owner);
                    }
                }
                if !arg.marked && !ctx.quiet {
                    let name = match &arg.expr.kind {
                        ExprKind::Var(n) => n.clone(),
                        _ => format!("argument {}", i + 1),
                    };
                    self.diags.push(Diagnostic::error(
                        Code::E201,
                        arg.expr.span,
                        format!(
                            "`{}` may be updated by `{}` and must be marked `!{}` at this call",
                            name, contract.name, name
                        ),
                    ));
                }
            } else if arg.marked && !ctx.quiet {
                // A `!` mark on an argument the callee does not update is
                // accepted silently (a declaration of possibility).
            }
        }

        // Postcondition application.
        let theta = ctx.fresh_temp();
        ctx.owner_types.insert(theta.clone(), result_ty.clone());
        let mut owners: BTreeMap<String, (Owner, Type)> = BTreeMap::new();
        for (i, name) in contract.arg_names.iter().enumerate() {
            if let Some((t, ty, arg)) = arg_thetas.get(i) {
                let owner = match &arg.expr.kind {
                    ExprKind::Var(n) => self.source_owner(n, ctx).unwrap_or_else(|| t.clone()),
                    _ => t.clone(),
                };
                owners.insert(name.clone(), (owner, ty.clone()));
            }
        }
        owners.insert(contract.result_name.clone(), (theta.clone(), result_ty.clone()));
        let mut batch: Vec<Pair> = if matches!(contract.post, SpecKind::DefaultMaximal) {
            // Results of declaration-free functions may share with the
            // arguments and with abstract, but calls cannot introduce new
            // sharing between the arguments themselves.
            let mut b = Vec::new();
            let ab = self.abstract_owner(&result_ty);
            let rcomps = self.comps(&result_ty);
            for c in &rcomps {
                b.push(Pair::new((ab.clone(), c.clone()), (ab.clone(), c.clone())));
                b.push(Pair::new((theta.clone(), c.clone()), (ab.clone(), c.clone())));
            }
            for (i, _) in contract.arg_names.iter().enumerate() {
                if let Some((t, ty, arg)) = arg_thetas.get(i) {
                    let owner = match &arg.expr.kind {
                        ExprKind::Var(n) => self.source_owner(n, ctx).unwrap_or_else(|| t.clone()),
                        _ => t.clone(),
                    };
                    for c in &rcomps {
                        for d in self.comps(ty) {
                            if alias_compatible(c, &d) {
                                b.push(Pair::new((theta.clone(), c.clone()), (owner.clone(), d)));
                            }
                        }
                    }
                }
            }
            b
        } else {
            let post_rel = self.elaborate_spec(&contract.post, &owners, &contract, false);
            post_rel.iter().cloned().collect()
        };
        // The result may exist in full.
        for c in self.comps(&result_ty) {
            batch.push(Pair::new((theta.clone(), c.clone()), (theta.clone(), c.clone())));
        }
        close_add(&mut ctx.rel, batch, Some(&theta));

        // Annotation check for everything the callee may update.
        if !updated_roots.is_empty() {
            let mut annotated: BTreeSet<String> = annots.iter().map(|a| a.name.clone()).collect();
            for (i, (_, _, arg)) in arg_thetas.iter().enumerate() {
                if contract.marked.get(i).copied().unwrap_or(false) || arg.marked {
                    if let ExprKind::Var(n) = &arg.expr.kind {
                        annotated.insert(n.clone());
                    }
                }
            }
            for (sv, _) in &contract.implicits {
                annotated.insert(sv.clone());
            }
            let stmt = ctx.current_stmt;
            self.check_affected(stmt, e.span, &updated_roots, &annotated, ctx, "call");
        }

        // Over-application: apply the result to the rest.
        if args.len() > arity {
            // The remaining arguments are applied to the returned closure;
            // treat conservatively via the default contract of its type.
            let theta2 = ctx.fresh_temp();
            ctx.owner_types.insert(theta2.clone(), result_ty.clone());
            return Some((theta2, result_ty));
        }
        Some((theta, result_ty))
    }

    fn resolve_contract(&self, callee: &Expr, ctx: &FnCtx) -> Option<Rc<FnContract>> {
        match &callee.kind {
            ExprKind::Var(name) => {
                if let Some(cr) = ctx.closures.get(name) {
                    if cr.supplied == 0 {
                        return Some(cr.contract.clone());
                    }
                    return Some(Rc::new(derive_partial(&cr.contract, cr.supplied)));
                }
                if ctx.owner_types.contains_key(&Owner::Var(name.clone())) {
                    // A local of function type without closure info: use
                    // its type's default contract.
                    let ty = ctx.owner_types[&Owner::Var(name.clone())].clone();
                    return Some(Rc::new(FnContract::default_for(name, &ty, Vec::new(), callee.span)));
                }
                self.contracts.get(name)
            }
            _ => None,
        }
    }

    /// §9.2 compatibility for function-typed arguments: the actual may
    /// have fewer marked arguments, weaker postconditions, stronger
    /// preconditions allowed, and `ro` where `rw` is declared.
    fn check_ho_compat(
        &mut self,
        actual: &FnContract,
        expected: &FnContract,
        span: Span,
        ctx: &FnCtx,
    ) {
        if ctx.quiet {
            return;
        }
        if actual.arg_names.len() != expected.arg_names.len() {
            return;
        }
        // Less destructive update: actual marks must be a subset.
        for i in 0..actual.marked.len().min(expected.marked.len()) {
            if actual.marked[i] && !expected.marked[i] {
                self.diags.push(Diagnostic::error(
                    Code::E202,
                    span,
                    format!(
                        "function argument `{}` updates its argument {} but the expected function type does not allow it",
                        actual.name,
                        i + 1
                    ),
                ));
                return;
            }
        }
        // State variables: ro is acceptable where rw is declared; anything
        // the actual uses must be declared by the expectation.
        for (sv, mode) in &actual.implicits {
            let ok = expected.implicits.iter().any(|(sv2, mode2)| {
                sv2 == sv
                    && match (mode, mode2) {
                        (Mode::Ro, Mode::Ro | Mode::Rw) => true,
                        (m, m2) => m == m2,
                    }
            });
            if !ok {
                self.diags.push(Diagnostic::error(
                    Code::E202,
                    span,
                    format!(
                        "function argument `{}` uses state variable `{}` not permitted by the expected function type",
                        actual.name, sv
                    ),
                ));
                return;
            }
        }
        // Sharing clauses: expected-pre must entail actual-pre (more
        // pre-sharing allowed), actual-post must entail into expected-post
        // (less sharing in postconditions).
        let mut owners: BTreeMap<String, (Owner, Type)> = BTreeMap::new();
        for (i, n) in expected.arg_names.iter().enumerate() {
            if let Some(t) = expected.arg_types.get(i) {
                owners.insert(n.clone(), (Owner::Var(n.clone()), t.clone()));
            }
        }
        owners.insert(
            expected.result_name.clone(),
            (Owner::Var(expected.result_name.clone()), expected.result_type.clone()),
        );
        // Rename actual's pattern names to expected's positionally.
        let mut actual_owners: BTreeMap<String, (Owner, Type)> = BTreeMap::new();
        for (i, n) in actual.arg_names.iter().enumerate() {
            if let (Some(en), Some(t)) = (expected.arg_names.get(i), actual.arg_types.get(i)) {
                actual_owners.insert(n.clone(), (Owner::Var(en.clone()), t.clone()));
            }
        }
        actual_owners.insert(
            actual.result_name.clone(),
            (Owner::Var(expected.result_name.clone()), actual.result_type.clone()),
        );
        let expected_pre = self.elaborate_spec(&expected.pre, &owners, expected, true);
        let actual_pre = self.elaborate_spec(&actual.pre, &actual_owners, actual, true);
        if !entails(&expected_pre, &actual_pre) {
            self.diags.push(Diagnostic::error(
                Code::E202,
                span,
                format!(
                    "precondition of function argument `{}` is stronger than the expected function type allows",
                    actual.name
                ),
            ));
            return;
        }
        if matches!(expected.post, SpecKind::DefaultMaximal) {
            return;
        }
        let expected_post = {
            let mut t = self.elaborate_spec(&expected.post, &owners, expected, true);
            t.union_with(&expected_pre);
            t
        };
        let actual_post = self.elaborate_spec(&actual.post, &actual_owners, actual, true);
        if !entails(&actual_post, &expected_post) {
            self.diags.push(Diagnostic::error(
                Code::E202,
                span,
                format!(
                    "postcondition of function argument `{}` allows more sharing than the expected function type",
                    actual.name
                ),
            ));
        }
    }

    fn check_precondition(
        &mut self,
        span: Span,
        contract: &FnContract,
        arg_thetas: &[(Owner, Type, &Arg)],
        ctx: &mut FnCtx,
    ) {
        if ctx.quiet || matches!(contract.pre, SpecKind::DefaultMaximal) {
            return;
        }
        // Allowed sharing among the formals, elaborated over the argument
        // temporaries (distinct per position even when the same variable
        // is passed twice).
        let mut owners: BTreeMap<String, (Owner, Type)> = BTreeMap::new();
        for (i, name) in contract.arg_names.iter().enumerate() {
            if let Some((t, ty, _)) = arg_thetas.get(i) {
                owners.insert(name.clone(), (t.clone(), ty.clone()));
            }
        }
        let mut allowed = self.elaborate_spec(&contract.pre, &owners, contract, true);
        allowed.saturate();
        let theta_set: BTreeSet<&Owner> = arg_thetas.iter().map(|(t, _, _)| t).collect();
        let computed = ctx.rel.restrict(|o| theta_set.contains(o) || o.is_abstract());
        let mut offending: Vec<&Pair> = computed
            .iter()
            .filter(|p| {
                !p.is_self()
                    && !(p.0 .0.is_abstract() && p.1 .0.is_abstract())
                    && !allowed.contains(p)
            })
            .collect();
        offending.sort();
        if let Some(first) = offending.first() {
            // Render with pattern names.
            let display = |oc: &(Owner, Component)| -> String {
                for (name, (o, _)) in &owners {
                    if o == &oc.0 {
                        return format!("{}.{}", name, oc.1);
                    }
                }
                format!("{}.{}", oc.0, oc.1)
            };
            self.diags.push(Diagnostic::error(
                Code::E202,
                span,
                format!(
                    "precondition of `{}` is violated at this call: `{}` may share with `{}`",
                    contract.name,
                    display(&first.0),
                    display(&first.1)
                ),
            ));
        }
    }
}

fn owner_name(o: &Owner) -> String {
    match o {
        Owner::Var(n) | Owner::State(n) => n.clone(),
        Owner::Abstract(k) => format!("abstract<{}>", k),
        Owner::Temp(n) => format!("$t{}", n),
    }
}

fn plain_add(rel: &mut SharingRel, batch: Vec<Pair>) {
    for Pair(a, b) in batch {
        rel.add(a, b);
    }
}

/// Adds pairs with composition through the batch (see `SharingRel::
/// add_closed`), except that two pairs never compose through the given
/// owner (the freshly created result, whose cells being possibly-X and
/// possibly-Y does not make X and Y alias).
fn close_add(rel: &mut SharingRel, batch: Vec<Pair>, forbidden_middle: Option<&Owner>) {
    let mut work = batch;
    while let Some(p) = work.pop() {
        if p.0 != p.1 && !alias_compatible(&p.0 .1, &p.1 .1) {
            continue;
        }
        let inserted = rel.add(p.0.clone(), p.1.clone());
        if !inserted || p.is_self() {
            continue;
        }
        let Pair(a, b) = &p;
        let mut derived = Vec::new();
        for q in rel.iter() {
            if q.is_self() {
                continue;
            }
            for (x, y) in [(a, b), (b, a)] {
                if Some(&x.0) == forbidden_middle {
                    continue;
                }
                if let Some(c) = q.other(x) {
                    if c != y && alias_compatible(&y.1, &c.1) {
                        derived.push(Pair::new(y.clone(), c.clone()));
                    }
                }
            }
        }
        for d in derived {
            if !rel.contains(&d) {
                work.push(d);
            }
        }
    }
}

/// Contract of a closure built by partial application: the remaining
/// arguments keep their names, types and marks; declarations that mention
/// a captured argument degrade to the maximal default.
fn derive_partial(base: &FnContract, supplied: usize) -> FnContract {
    let dropped: Vec<&str> = base.arg_names.iter().take(supplied).map(|s| s.as_str()).collect();
    let degrade = |spec: &SpecKind| -> SpecKind {
        match spec {
            SpecKind::Equations(eqs)
                if eqs.iter().any(|eq| equation_mentions(eq, &dropped)) =>
            {
                SpecKind::DefaultMaximal
            }
            other => other.clone(),
        }
    };
    FnContract {
        name: format!("{} (partially applied)", base.name),
        arg_names: base.arg_names.iter().skip(supplied).cloned().collect(),
        arg_types: base.arg_types.iter().skip(supplied).cloned().collect(),
        result_type: base.result_type.clone(),
        marked: base.marked.iter().skip(supplied).copied().collect(),
        result_name: base.result_name.clone(),
        pre: degrade(&base.pre),
        post: degrade(&base.post),
        implicits: base.implicits.clone(),
        span: base.span,
    }
}

fn equation_mentions(eq: &ShareEq, names: &[&str]) -> bool {
    fn term_mentions(t: &ShareTerm, names: &[&str]) -> bool {
        match t {
            ShareTerm::Var(v) | ShareTerm::Deref(v) => names.contains(&v.as_str()),
            ShareTerm::Abstract => false,
            ShareTerm::Ctor(_, args) => args.iter().any(|a| term_mentions(a, names)),
        }
    }
    names.contains(&eq.lhs.as_str()) || term_mentions(&eq.rhs, names)
}

fn body_has_calls_or_updates(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Call { .. } => true,
        ExprKind::Var(_) | ExprKind::IntLit(_) | ExprKind::Unit | ExprKind::Deref(_) => false,
        ExprKind::Ctor { args, .. } => args.iter().any(body_has_calls_or_updates),
        ExprKind::Binop { lhs, rhs, .. } => {
            body_has_calls_or_updates(lhs) || body_has_calls_or_updates(rhs)
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            body_has_calls_or_updates(cond)
                || body_has_calls_or_updates(then_branch)
                || body_has_calls_or_updates(else_branch)
        }
        ExprKind::Case { scrutinee, arms } => {
            body_has_calls_or_updates(scrutinee)
                || arms.iter().any(|a| body_has_calls_or_updates(&a.body))
        }
        ExprKind::Cast { expr, .. } => body_has_calls_or_updates(expr),
        ExprKind::Block(stmts) => stmts.iter().any(|s| match &s.kind {
            StmtKind::Update { .. } => true,
            StmtKind::Let { value, .. } | StmtKind::RefBind { value, .. } => {
                body_has_calls_or_updates(value)
            }
            StmtKind::Expr(e) => body_has_calls_or_updates(e),
        }),
    }
}

fn count_stmts(e: &Expr) -> usize {
    match &e.kind {
        ExprKind::Block(stmts) => stmts
            .iter()
            .map(|s| {
                1 + match &s.kind {
                    StmtKind::Let { value, .. }
                    | StmtKind::RefBind { value, .. }
                    | StmtKind::Update { value, .. } => count_stmts(value),
                    StmtKind::Expr(e) => count_stmts(e),
                }
            })
            .sum(),
        ExprKind::If { cond, then_branch, else_branch } => {
            count_stmts(cond) + count_stmts(then_branch) + count_stmts(else_branch)
        }
        ExprKind::Case { scrutinee, arms } => {
            count_stmts(scrutinee) + arms.iter().map(|a| count_stmts(&a.body)).sum::<usize>()
        }
        ExprKind::Ctor { args, .. } => args.iter().map(count_stmts).sum(),
        ExprKind::Call { callee, args, .. } => {
            count_stmts(callee) + args.iter().map(|a| count_stmts(&a.expr)).sum::<usize>()
        }
        ExprKind::Binop { lhs, rhs, .. } => count_stmts(lhs) + count_stmts(rhs),
        ExprKind::Cast { expr, .. } => count_stmts(expr),
        _ => 0,
    }
}

// ---- liveness ----

/// Backward liveness: `live` flows in as the set live after the node;
/// returns with the set live before it. `after` records the live-after
/// set per statement.
fn liveness_expr(
    e: &Expr,
    live: &mut BTreeSet<String>,
    after: &mut HashMap<NodeId, BTreeSet<String>>,
) {
    match &e.kind {
        ExprKind::Block(stmts) => {
            for s in stmts.iter().rev() {
                after.insert(s.id, live.clone());
                liveness_stmt(s, live, after);
            }
        }
        ExprKind::Var(n) | ExprKind::Deref(n) => {
            live.insert(n.clone());
        }
        ExprKind::Ctor { args, .. } => {
            for a in args.iter().rev() {
                liveness_expr(a, live, after);
            }
        }
        ExprKind::Call { callee, args, annots, .. } => {
            for a in annots {
                live.insert(a.name.clone());
            }
            for a in args.iter().rev() {
                liveness_expr(&a.expr, live, after);
            }
            liveness_expr(callee, live, after);
        }
        ExprKind::Binop { lhs, rhs, .. } => {
            liveness_expr(rhs, live, after);
            liveness_expr(lhs, live, after);
        }
        ExprKind::If { cond, then_branch, else_branch } => {
            let mut l1 = live.clone();
            liveness_expr(then_branch, &mut l1, after);
            let mut l2 = live.clone();
            liveness_expr(else_branch, &mut l2, after);
            *live = &l1 | &l2;
            liveness_expr(cond, live, after);
        }
        ExprKind::Case { scrutinee, arms } => {
            let base = live.clone();
            let mut joined = BTreeSet::new();
            for arm in arms {
                let mut l = base.clone();
                liveness_expr(&arm.body, &mut l, after);
                for b in &arm.binders {
                    if let Some(n) = b.name() {
                        l.remove(n);
                    }
                }
                joined.extend(l);
            }
            *live = joined;
            liveness_expr(scrutinee, live, after);
        }
        ExprKind::Cast { expr, .. } => liveness_expr(expr, live, after),
        _ => {}
    }
}

fn liveness_stmt(
    s: &Stmt,
    live: &mut BTreeSet<String>,
    after: &mut HashMap<NodeId, BTreeSet<String>>,
) {
    match &s.kind {
        StmtKind::Let { name, value, .. } => {
            live.remove(name);
            liveness_expr(value, live, after);
        }
        StmtKind::RefBind { name, value, .. } => {
            live.remove(name);
            liveness_expr(value, live, after);
        }
        StmtKind::Update { target, value, annots, .. } => {
            live.insert(target.to_string());
            for a in annots {
                live.insert(a.name.clone());
            }
            liveness_expr(value, live, after);
        }
        StmtKind::Expr(e) => liveness_expr(e, live, after),
    }
}
