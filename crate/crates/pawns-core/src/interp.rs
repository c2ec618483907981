//! Strict tree-walking interpreter over a heap of constructor cells.
//! Constructor arguments live in heap cells; refs address single cells;
//! dereference patterns bind refs to the matched constructor's argument
//! cells without allocating. Addresses are never reused within a run.

use crate::ast::*;
use crate::span::{NodeId, Span};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub type Addr = usize;

#[derive(Clone, PartialEq, Debug)]
pub enum Value {
    Int(i64),
    Unit,
    /// Constructor value: tag plus the addresses of its argument cells.
    /// Zero-argument constructors carry no addresses.
    Ctor { name: String, args: Vec<Addr> },
    /// There are no null refs.
    Ref(Addr),
    Closure { def: String, captured: Vec<Value> },
}

#[derive(Default)]
pub struct Heap {
    cells: Vec<Value>,
    /// Total cell allocations.
    pub cell_allocs: u64,
    /// Constructor applications by constructor name.
    pub ctor_allocs: BTreeMap<String, u64>,
}

impl Heap {
    pub fn alloc(&mut self, v: Value) -> Addr {
        self.cell_allocs += 1;
        self.cells.push(v);
        self.cells.len() - 1
    }

    pub fn read(&self, a: Addr) -> &Value {
        &self.cells[a]
    }

    pub fn write(&mut self, a: Addr, v: Value) {
        self.cells[a] = v;
    }
}

#[derive(Clone, Debug)]
pub struct RuntimeError {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "runtime error: {}", self.message)
    }
}

type RValue = Result<Value, RuntimeError>;

/// One dynamic sharing observation: after executing `stmt` in an
/// activation of `fn_name`, each listed pair of live variables reached at
/// least one common heap cell.
#[derive(Clone, Debug)]
pub struct OracleEvent {
    pub fn_name: String,
    pub stmt: NodeId,
    pub pairs: Vec<(String, String)>,
}

/// Static liveness tables driving the oracle's live-variable filter.
#[derive(Default, Clone)]
pub struct OracleConfig {
    pub live_after: HashMap<(String, NodeId), BTreeSet<String>>,
    pub whole_live: BTreeMap<String, BTreeSet<String>>,
}

pub struct Interp<'a> {
    program: &'a Program,
    pub heap: Heap,
    /// Per state variable: a stack of slots; the top is current. `None`
    /// means pushed but not yet bound.
    state_slots: BTreeMap<String, Vec<Option<Addr>>>,
    state_names: BTreeSet<String>,
    implicits: BTreeMap<String, Vec<(String, Mode)>>,
    pub stdout: String,
    oracle: Option<OracleConfig>,
    pub events: Vec<OracleEvent>,
    depth: usize,
}

impl<'a> Interp<'a> {
    pub fn new(program: &'a Program, oracle: Option<OracleConfig>) -> Self {
        let mut state_names: BTreeSet<String> = BTreeSet::new();
        state_names.insert("io".to_string());
        for sv in &program.state_vars {
            state_names.insert(sv.name.clone());
        }
        let mut implicits: BTreeMap<String, Vec<(String, Mode)>> = BTreeMap::new();
        implicits.insert("print_int".to_string(), vec![("io".to_string(), Mode::Rw)]);
        for sig in &program.signatures {
            implicits.insert(
                sig.name.clone(),
                sig.implicits.iter().map(|(n, m, _)| (n.clone(), *m)).collect(),
            );
        }
        let mut interp = Interp {
            program,
            heap: Heap::default(),
            state_slots: BTreeMap::new(),
            state_names,
            implicits,
            stdout: String::new(),
            oracle,
            events: Vec::new(),
            depth: 0,
        };
        // io is bound before main is called.
        let io_cell = interp.heap.alloc(Value::Unit);
        interp.state_slots.insert("io".to_string(), vec![Some(io_cell)]);
        interp
    }

    pub fn call_by_name(&mut self, name: &str, args: Vec<Value>, span: Span) -> RValue {
        if name == "print_int" {
            let [v] = args.as_slice() else {
                return Err(self.error("print_int takes one argument", span));
            };
            match v {
                Value::Int(n) => {
                    self.stdout.push_str(&format!("{}\n", n));
                    Ok(Value::Unit)
                }
                _ => Err(self.error("print_int takes an Int", span)),
            }
        } else if let Some(def) = self.program.def(name) {
            self.call_def(&def.clone(), args, span)
        } else {
            Err(self.error(format!("unknown function `{}`", name), span))
        }
    }

    fn call_def(&mut self, def: &FunctionDef, args: Vec<Value>, span: Span) -> RValue {
        if args.len() < def.params.len() {
            return Ok(Value::Closure { def: def.name.clone(), captured: args });
        }
        self.depth += 1;
        if self.depth > 10_000 {
            self.depth -= 1;
            return Err(self.error("call depth limit exceeded", span));
        }
        let (now, rest) = args.split_at(def.params.len());
        // State-slot bookkeeping: record entry depths, push fresh unbound
        // slots for write-only implicits.
        let entry_depths: BTreeMap<String, usize> = self
            .state_names
            .iter()
            .map(|v| (v.clone(), self.state_slots.get(v).map(|s| s.len()).unwrap_or(0)))
            .collect();
        let own = self.implicits.get(&def.name).cloned().unwrap_or_default();
        for (v, mode) in &own {
            if matches!(mode, Mode::Wo) {
                self.state_slots.entry(v.clone()).or_default().push(None);
            }
        }
        let mut env: BTreeMap<String, Value> = BTreeMap::new();
        for ((p, _), v) in def.params.iter().zip(now.iter()) {
            env.insert(p.clone(), v.clone());
        }
        let result = self.eval_expr(&def.body, &mut env, &def.name);
        // Bindings created during this activation pop unless this function
        // declares the variable implicit (then they are handed back).
        let declared: BTreeSet<&String> = own.iter().map(|(v, _)| v).collect();
        for (v, d) in &entry_depths {
            if !declared.contains(v) {
                if let Some(stack) = self.state_slots.get_mut(v) {
                    stack.truncate(*d);
                }
            }
        }
        self.depth -= 1;
        let result = result?;
        if rest.is_empty() {
            Ok(result)
        } else {
            self.apply(result, rest.to_vec(), span)
        }
    }

    fn apply(&mut self, f: Value, mut args: Vec<Value>, span: Span) -> RValue {
        match f {
            Value::Closure { def, mut captured } => {
                captured.append(&mut args);
                let Some(d) = self.program.def(&def).cloned() else {
                    return Err(self.error(format!("unknown function `{}`", def), span));
                };
                self.call_def(&d, captured, span)
            }
            _ => Err(self.error("cannot apply a non-function value", span)),
        }
    }

    fn error(&self, msg: impl Into<String>, span: Span) -> RuntimeError {
        RuntimeError { message: msg.into(), span }
    }

    fn state_addr(&self, name: &str, span: Span) -> Result<Addr, RuntimeError> {
        self.state_slots
            .get(name)
            .and_then(|s| s.last())
            .and_then(|s| *s)
            .ok_or_else(|| self.error(format!("state variable `{}` is not bound", name), span))
    }

    fn eval_expr(&mut self, e: &Expr, env: &mut BTreeMap<String, Value>, fn_name: &str) -> RValue {
        match &e.kind {
            ExprKind::IntLit(n) => Ok(Value::Int(*n)),
            ExprKind::Unit => Ok(Value::Unit),
            ExprKind::Var(n) => {
                if let Some(v) = env.get(n) {
                    Ok(v.clone())
                } else if self.state_names.contains(n) {
                    Ok(Value::Ref(self.state_addr(n, e.span)?))
                } else if self.program.def(n).is_some() || n == "print_int" {
                    Ok(Value::Closure { def: n.clone(), captured: Vec::new() })
                } else {
                    Err(self.error(format!("unbound variable `{}`", n), e.span))
                }
            }
            ExprKind::Deref(n) => {
                let v = if let Some(v) = env.get(n) {
                    v.clone()
                } else if self.state_names.contains(n) {
                    Value::Ref(self.state_addr(n, e.span)?)
                } else {
                    return Err(self.error(format!("unbound variable `{}`", n), e.span));
                };
                match v {
                    Value::Ref(a) => Ok(self.heap.read(a).clone()),
                    _ => Err(self.error(format!("`*{}` dereferences a non-ref", n), e.span)),
                }
            }
            ExprKind::Ctor { name, args } => {
                let mut addrs = Vec::with_capacity(args.len());
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval_expr(a, env, fn_name)?);
                }
                for v in vals {
                    addrs.push(self.heap.alloc(v));
                }
                *self.heap.ctor_allocs.entry(name.clone()).or_insert(0) += 1;
                Ok(Value::Ctor { name: name.clone(), args: addrs })
            }
            ExprKind::Call { callee, args, .. } => {
                let mut arg_vals = Vec::with_capacity(args.len());
                let callee_val = match &callee.kind {
                    ExprKind::Var(n) if !env.contains_key(n) => None,
                    _ => Some(self.eval_expr(callee, env, fn_name)?),
                };
                for a in args {
                    arg_vals.push(self.eval_expr(&a.expr, env, fn_name)?);
                }
                match callee_val {
                    None => {
                        let ExprKind::Var(n) = &callee.kind else { unreachable!() };
                        self.call_by_name(n, arg_vals, e.span)
                    }
                    Some(f) => self.apply(f, arg_vals, e.span),
                }
            }
            ExprKind::Binop { op, lhs, rhs } => {
                let l = self.eval_expr(lhs, env, fn_name)?;
                let r = self.eval_expr(rhs, env, fn_name)?;
                let (Value::Int(a), Value::Int(b)) = (&l, &r) else {
                    return Err(self.error("arithmetic on non-integers", e.span));
                };
                let (a, b) = (*a, *b);
                let bool_val = |t: bool| Value::Ctor {
                    name: if t { "True" } else { "False" }.to_string(),
                    args: Vec::new(),
                };
                Ok(match op {
                    BinOp::Add => Value::Int(a.wrapping_add(b)),
                    BinOp::Sub => Value::Int(a.wrapping_sub(b)),
                    BinOp::Mul => Value::Int(a.wrapping_mul(b)),
                    BinOp::Div => {
                        if b == 0 {
                            return Err(self.error("division by zero", e.span));
                        }
                        Value::Int(a.wrapping_div(b))
                    }
                    BinOp::Mod => {
                        if b == 0 {
                            return Err(self.error("division by zero", e.span));
                        }
                        Value::Int(a.wrapping_rem(b))
                    }
                    BinOp::Le => bool_val(a <= b),
                    BinOp::Lt => bool_val(a < b),
                    BinOp::Eq => bool_val(a == b),
                    BinOp::Ge => bool_val(a >= b),
                    BinOp::Gt => bool_val(a > b),
                })
            }
            ExprKind::If { cond, then_branch, else_branch } => {
                let c = self.eval_expr(cond, env, fn_name)?;
                match c {
                    Value::Ctor { ref name, .. } if name == "True" => {
                        self.eval_expr(then_branch, env, fn_name)
                    }
                    Value::Ctor { ref name, .. } if name == "False" => {
                        self.eval_expr(else_branch, env, fn_name)
                    }
                    _ => Err(self.error("condition is not a Bool", cond.span)),
                }
            }
            ExprKind::Case { scrutinee, arms } => {
                let v = self.eval_expr(scrutinee, env, fn_name)?;
                for arm in arms {
                    if let Some(bindings) = match_pattern(arm, &v, &self.heap) {
                        let saved: Vec<(String, Option<Value>)> = bindings
                            .iter()
                            .map(|(n, _)| (n.clone(), env.get(n).cloned()))
                            .collect();
                        for (n, bv) in bindings {
                            env.insert(n, bv);
                        }
                        let result = self.eval_expr(&arm.body, env, fn_name);
                        for (n, old) in saved {
                            match old {
                                Some(v) => {
                                    env.insert(n, v);
                                }
                                None => {
                                    env.remove(&n);
                                }
                            }
                        }
                        return result;
                    }
                }
                let got = match &v {
                    Value::Ctor { name, .. } => name.clone(),
                    other => format!("{:?}", other),
                };
                Err(self.error(
                    format!("non-exhaustive case: no arm matches constructor `{}`", got),
                    e.span,
                ))
            }
            ExprKind::Cast { expr, .. } => self.eval_expr(expr, env, fn_name),
            ExprKind::Block(stmts) => {
                let mut last = Value::Unit;
                for (i, s) in stmts.iter().enumerate() {
                    let v = self.exec_stmt(s, env, fn_name)?;
                    if i + 1 == stmts.len() {
                        last = v;
                    }
                    self.oracle_snapshot(s.id, env, fn_name);
                }
                Ok(last)
            }
        }
    }

    fn exec_stmt(
        &mut self,
        s: &Stmt,
        env: &mut BTreeMap<String, Value>,
        fn_name: &str,
    ) -> RValue {
        match &s.kind {
            StmtKind::Let { name, value, .. } => {
                let v = self.eval_expr(value, env, fn_name)?;
                env.insert(name.clone(), v);
                Ok(Value::Unit)
            }
            StmtKind::RefBind { name, value, .. } => {
                let v = self.eval_expr(value, env, fn_name)?;
                let addr = self.heap.alloc(v);
                if self.state_names.contains(name) && !env.contains_key(name) {
                    // Initializes the state variable's current slot.
                    let slot = self
                        .state_slots
                        .entry(name.clone())
                        .or_insert_with(|| vec![None]);
                    if let Some(top) = slot.last_mut() {
                        *top = Some(addr);
                    }
                } else {
                    env.insert(name.clone(), Value::Ref(addr));
                }
                Ok(Value::Unit)
            }
            StmtKind::Update { target, target_span, value, .. } => {
                let v = self.eval_expr(value, env, fn_name)?;
                let r = if let Some(rv) = env.get(target) {
                    rv.clone()
                } else if self.state_names.contains(target) {
                    Value::Ref(self.state_addr(target, *target_span)?)
                } else {
                    return Err(self.error(format!("unbound variable `{}`", target), *target_span));
                };
                match r {
                    Value::Ref(a) => {
                        self.heap.write(a, v);
                        Ok(Value::Unit)
                    }
                    _ => Err(self.error(format!("`*!{}` updates a non-ref", target), *target_span)),
                }
            }
            StmtKind::Expr(e) => self.eval_expr(e, env, fn_name),
        }
    }

    // ---- dynamic alias oracle ----

    fn oracle_snapshot(&mut self, stmt: NodeId, env: &BTreeMap<String, Value>, fn_name: &str) {
        let Some(cfg) = &self.oracle else { return };
        let key = (fn_name.to_string(), stmt);
        let empty = BTreeSet::new();
        let live = cfg.live_after.get(&key).unwrap_or(&empty);
        let whole = cfg.whole_live.get(fn_name).cloned().unwrap_or_default();
        let mut names: Vec<&String> = env
            .keys()
            .filter(|n| live.contains(*n) || whole.contains(*n))
            .collect();
        // Bound state variables participate as owners.
        let mut state_reaches: Vec<(String, BTreeSet<Addr>)> = Vec::new();
        for (sv, stack) in &self.state_slots {
            if sv == "io" {
                continue;
            }
            if let Some(Some(addr)) = stack.last() {
                let mut reach = BTreeSet::new();
                reach.insert(*addr);
                collect_reach(self.heap.read(*addr), &self.heap, &mut reach);
                state_reaches.push((sv.clone(), reach));
            }
        }
        names.sort();
        let mut reaches: Vec<(String, BTreeSet<Addr>)> = names
            .into_iter()
            .map(|n| {
                let mut reach = BTreeSet::new();
                collect_reach(&env[n], &self.heap, &mut reach);
                (n.clone(), reach)
            })
            .collect();
        reaches.extend(state_reaches);
        let mut pairs = Vec::new();
        for i in 0..reaches.len() {
            for j in (i + 1)..reaches.len() {
                if !reaches[i].1.is_disjoint(&reaches[j].1) {
                    pairs.push((reaches[i].0.clone(), reaches[j].0.clone()));
                }
            }
        }
        if !pairs.is_empty() {
            self.events.push(OracleEvent { fn_name: fn_name.to_string(), stmt, pairs });
        }
    }
}

/// Tag match: plain binders receive the argument cells' values;
/// dereference binders receive refs addressing the cells themselves (no
/// allocation).
pub fn match_pattern(arm: &Arm, v: &Value, heap: &Heap) -> Option<Vec<(String, Value)>> {
    let Value::Ctor { name, args } = v else { return None };
    if name != &arm.ctor {
        return None;
    }
    let mut out = Vec::new();
    for (binder, addr) in arm.binders.iter().zip(args.iter()) {
        match binder {
            Binder::Wild(_) => {}
            Binder::Var(n, _) => out.push((n.clone(), heap.read(*addr).clone())),
            Binder::Deref(n, _) => out.push((n.clone(), Value::Ref(*addr))),
        }
    }
    Some(out)
}

/// All heap addresses transitively reachable from a value. Never mutates
/// the heap.
pub fn collect_reach(v: &Value, heap: &Heap, out: &mut BTreeSet<Addr>) {
    match v {
        Value::Int(_) | Value::Unit => {}
        Value::Ref(a) => {
            if out.insert(*a) {
                collect_reach(heap.read(*a), heap, out);
            }
        }
        Value::Ctor { args, .. } => {
            for a in args {
                if out.insert(*a) {
                    collect_reach(heap.read(*a), heap, out);
                }
            }
        }
        Value::Closure { captured, .. } => {
            for c in captured {
                collect_reach(c, heap, out);
            }
        }
    }
}

/// Host-side value notation for building arguments and inspecting results
/// in tests and drivers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum HostValue {
    Int(i64),
    Unit,
    Ctor(String, Vec<HostValue>),
    Ref(Box<HostValue>),
    Opaque(String),
}

impl HostValue {
    pub fn list(items: &[i64]) -> HostValue {
        let mut v = HostValue::Ctor("Nil".into(), Vec::new());
        for n in items.iter().rev() {
            v = HostValue::Ctor("Cons".into(), vec![HostValue::Int(*n), v]);
        }
        v
    }
}

pub fn materialize(v: &HostValue, heap: &mut Heap) -> Value {
    match v {
        HostValue::Int(n) => Value::Int(*n),
        HostValue::Unit => Value::Unit,
        HostValue::Ctor(name, args) => {
            let addrs: Vec<Addr> = args
                .iter()
                .map(|a| {
                    let v = materialize(a, heap);
                    heap.alloc(v)
                })
                .collect();
            *heap.ctor_allocs.entry(name.clone()).or_insert(0) += 1;
            Value::Ctor { name: name.clone(), args: addrs }
        }
        HostValue::Ref(inner) => {
            let v = materialize(inner, heap);
            let a = heap.alloc(v);
            Value::Ref(a)
        }
        HostValue::Opaque(_) => Value::Unit,
    }
}

pub fn read_back(v: &Value, heap: &Heap) -> HostValue {
    match v {
        Value::Int(n) => HostValue::Int(*n),
        Value::Unit => HostValue::Unit,
        Value::Ctor { name, args } => HostValue::Ctor(
            name.clone(),
            args.iter().map(|a| read_back(heap.read(*a), heap)).collect(),
        ),
        Value::Ref(a) => HostValue::Ref(Box::new(read_back(heap.read(*a), heap))),
        Value::Closure { def, .. } => HostValue::Opaque(format!("closure:{}", def)),
    }
}

/// Turns a runtime error into a renderable transcript line.
pub fn runtime_error_line(err: &RuntimeError, file: &str) -> String {
    format!("{}: {}:{}:{}\n", err, file, err.span.line, err.span.col)
}
