//! Whole-program driver: parse, expand renamings, check types, check
//! state variables, run the sharing analysis, and (on clean programs)
//! interpret.

use crate::ast::Program;
use crate::diag::{sort_diagnostics, Diagnostic};
use crate::expand::{expand_renamings, validate_names};
use crate::interp::{
    materialize, read_back, HostValue, Interp, OracleConfig, OracleEvent, RuntimeError, Value,
};
use crate::parser::parse;
use crate::sharing::{analyze_program, AnalysisResult};
use crate::span::Span;
use crate::statevars::check_state_vars;
use crate::typecheck::{check_types, TypeckResult};
use crate::types::DataEnv;
use std::collections::BTreeMap;

pub struct CheckedProgram {
    pub program: Program,
    pub data_env: DataEnv,
    pub typeck: Option<TypeckResult>,
    pub analysis: Option<AnalysisResult>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CheckedProgram {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.is_error())
    }

    pub fn has_warnings(&self) -> bool {
        self.diagnostics.iter().any(|d| !d.is_error())
    }
}

/// Runs the full pipeline: parse -> expand renamings -> type check ->
/// state-variable check -> sharing analysis. Later passes run only when
/// the earlier ones leave the program well-formed enough.
pub fn check_source(source: &str) -> CheckedProgram {
    let parsed = parse(source);
    let mut program = parsed.program;
    let mut diagnostics = parsed.diagnostics;
    let parse_failed = diagnostics.iter().any(|d| d.is_error());
    let mut data_env = DataEnv::with_builtins();
    let mut typeck = None;
    let mut analysis = None;
    if !parse_failed {
        expand_renamings(&mut program, &mut diagnostics);
        validate_names(&program, &mut diagnostics);
        data_env.load(&program, &mut diagnostics);
        if !diagnostics.iter().any(|d| d.is_error()) {
            let tck = check_types(&program, &data_env);
            diagnostics.extend(tck.diagnostics.iter().cloned());
            check_state_vars(&program, &mut diagnostics);
            let ana = analyze_program(&program, &data_env, &tck);
            diagnostics.extend(ana.diagnostics.iter().cloned());
            typeck = Some(tck);
            analysis = Some(ana);
        }
    }
    sort_diagnostics(&mut diagnostics);
    CheckedProgram { program, data_env, typeck, analysis, diagnostics }
}

pub struct RunStats {
    pub stdout: String,
    pub cell_allocs: u64,
    pub ctor_allocs: BTreeMap<String, u64>,
    pub events: Vec<OracleEvent>,
}

/// Executes `main ()`. The program must have checked without errors.
pub fn run_main(checked: &CheckedProgram, oracle: bool) -> Result<RunStats, RuntimeError> {
    let cfg = oracle_config(checked, oracle);
    let mut interp = Interp::new(&checked.program, cfg);
    let span = checked.program.def("main").map(|d| d.span).unwrap_or_default();
    interp.call_by_name("main", vec![Value::Unit], span)?;
    Ok(RunStats {
        stdout: interp.stdout,
        cell_allocs: interp.heap.cell_allocs,
        ctor_allocs: interp.heap.ctor_allocs,
        events: interp.events,
    })
}

fn oracle_config(checked: &CheckedProgram, oracle: bool) -> Option<OracleConfig> {
    if !oracle {
        return None;
    }
    let analysis = checked.analysis.as_ref()?;
    Some(OracleConfig {
        live_after: analysis.live_after.clone(),
        whole_live: analysis.whole_live.clone(),
    })
}

/// A loaded, checked program plus helpers to call individual functions
/// with host-constructed values.
pub struct Session {
    pub checked: CheckedProgram,
}

pub struct CallOutcome {
    pub value: HostValue,
    pub stdout: String,
    pub cell_allocs: u64,
    pub ctor_allocs: BTreeMap<String, u64>,
    pub events: Vec<OracleEvent>,
}

impl Session {
    pub fn load(source: &str) -> Result<Session, Vec<Diagnostic>> {
        let checked = check_source(source);
        if checked.has_errors() {
            return Err(checked.diagnostics);
        }
        Ok(Session { checked })
    }

    /// Calls a top-level function on materialized host values in a fresh
    /// heap and evaluation context.
    pub fn call(&self, name: &str, args: &[HostValue]) -> Result<CallOutcome, RuntimeError> {
        self.call_inner(name, args, false)
    }

    pub fn call_with_oracle(
        &self,
        name: &str,
        args: &[HostValue],
    ) -> Result<CallOutcome, RuntimeError> {
        self.call_inner(name, args, true)
    }

    fn call_inner(
        &self,
        name: &str,
        args: &[HostValue],
        oracle: bool,
    ) -> Result<CallOutcome, RuntimeError> {
        let cfg = oracle_config(&self.checked, oracle);
        let mut interp = Interp::new(&self.checked.program, cfg);
        let vals: Vec<Value> = args.iter().map(|a| materialize(a, &mut interp.heap)).collect();
        // Setup allocations are not attributed to the call.
        let setup_cells = interp.heap.cell_allocs;
        let setup_ctors = interp.heap.ctor_allocs.clone();
        let span = self.checked.program.def(name).map(|d| d.span).unwrap_or(Span::default());
        let result = interp.call_by_name(name, vals, span)?;
        let value = read_back(&result, &interp.heap);
        let mut ctor_allocs = interp.heap.ctor_allocs.clone();
        for (k, v) in setup_ctors {
            let e = ctor_allocs.entry(k).or_insert(0);
            *e -= v.min(*e);
        }
        Ok(CallOutcome {
            value,
            stdout: interp.stdout,
            cell_allocs: interp.heap.cell_allocs - setup_cells,
            ctor_allocs,
            events: interp.events,
        })
    }
}
