//! Resolved function contracts for the sharing analysis: the sharing
//! pattern, mutability marks, pre/postconditions and implicit state
//! variables of every callable thing, with §6's defaults applied where
//! nothing is declared.

use crate::ast::{Mode, Program, ShareEq, ShareSpec, SharingClause, TypeAstKind};
use crate::diag::{Code, Diagnostic};
use crate::rel::SharingRel;
use crate::span::Span;
use crate::types::{DataEnv, Type};
use std::collections::BTreeMap;
use std::rc::Rc;

#[derive(Clone, Debug)]
pub enum SpecKind {
    NoSharing,
    /// No declaration: maximal possible sharing, including abstract.
    DefaultMaximal,
    Equations(Vec<ShareEq>),
    /// Inferred postconditions and elaborated declarations, in pattern
    /// space.
    Rel(SharingRel),
    /// `post ... = inferred`, awaiting inference.
    Inferred,
}

#[derive(Clone, Debug)]
pub struct FnContract {
    pub name: String,
    pub arg_names: Vec<String>,
    pub arg_types: Vec<Type>,
    pub result_type: Type,
    pub marked: Vec<bool>,
    pub result_name: String,
    pub pre: SpecKind,
    pub post: SpecKind,
    pub implicits: Vec<(String, Mode)>,
    pub span: Span,
}

impl FnContract {
    pub fn is_default(&self) -> bool {
        matches!(self.pre, SpecKind::DefaultMaximal) && self.implicits.is_empty() && !self.marked.iter().any(|m| *m)
    }

    /// Default contract for a function type: nothing marked, maximal
    /// sharing both ways.
    pub fn default_for(name: &str, ty: &Type, implicits: Vec<(String, Mode)>, span: Span) -> FnContract {
        let (args, result) = ty.fun_parts();
        FnContract {
            name: name.to_string(),
            arg_names: (1..=args.len()).map(|i| format!("arg{}", i)).collect(),
            arg_types: args.into_iter().cloned().collect(),
            result_type: result.clone(),
            marked: vec![false; ty.fun_parts().0.len()],
            result_name: "result".to_string(),
            pre: SpecKind::DefaultMaximal,
            post: SpecKind::DefaultMaximal,
            implicits,
            span,
        }
    }

    pub fn from_clause(
        name: &str,
        ty: &Type,
        clause: &SharingClause,
        implicits: Vec<(String, Mode)>,
        diags: &mut Vec<Diagnostic>,
    ) -> FnContract {
        let (args, result) = ty.fun_parts();
        let arg_types: Vec<Type> = args.into_iter().cloned().collect();
        if clause.args.len() != arg_types.len() {
            diags.push(Diagnostic::error(
                Code::E001,
                clause.span,
                format!(
                    "sharing pattern of `{}` names {} argument(s) but the type has {}",
                    name,
                    clause.args.len(),
                    arg_types.len()
                ),
            ));
        }
        let spec = |s: &ShareSpec| match s {
            ShareSpec::NoSharing => SpecKind::NoSharing,
            ShareSpec::Inferred => SpecKind::Inferred,
            ShareSpec::Equations(eqs) => SpecKind::Equations(eqs.clone()),
        };
        FnContract {
            name: name.to_string(),
            arg_names: clause.args.iter().map(|a| a.name.clone()).collect(),
            arg_types,
            result_type: result.clone(),
            marked: clause.args.iter().map(|a| a.mutable).collect(),
            result_name: clause.result.clone(),
            pre: spec(&clause.pre),
            post: spec(&clause.post),
            implicits,
            span: clause.span,
        }
    }
}

#[derive(Default)]
pub struct ContractEnv {
    pub by_name: BTreeMap<String, Rc<FnContract>>,
    /// Contracts embedded in higher-order argument positions of
    /// signatures: (function, argument index) -> contract for that formal.
    pub ho_args: BTreeMap<(String, usize), Rc<FnContract>>,
}

impl ContractEnv {
    pub fn build(
        program: &Program,
        env: &DataEnv,
        schemes: &BTreeMap<String, crate::types::TypeScheme>,
        diags: &mut Vec<Diagnostic>,
    ) -> ContractEnv {
        let mut out = ContractEnv::default();
        for def in &program.defs {
            let sig = program.signature(&def.name);
            let scheme = match schemes.get(&def.name) {
                Some(s) => s,
                None => continue,
            };
            let implicits: Vec<(String, Mode)> = sig
                .map(|s| s.implicits.iter().map(|(n, m, _)| (n.clone(), *m)).collect())
                .unwrap_or_default();
            let contract = match sig.and_then(|s| s.sharing.as_ref()) {
                Some(clause) => {
                    let c = FnContract::from_clause(&def.name, &scheme.ty, clause, implicits, diags);
                    validate_marks(&c, env, diags);
                    c
                }
                None => FnContract::default_for(
                    &def.name,
                    &scheme.ty,
                    implicits,
                    sig.map(|s| s.span).unwrap_or(def.span),
                ),
            };
            out.by_name.insert(def.name.clone(), Rc::new(contract));
        }
        // Builtin print_int.
        let print_ty = Type::Fun(Box::new(Type::int()), Box::new(Type::unit()));
        out.by_name.insert(
            "print_int".to_string(),
            Rc::new(FnContract {
                name: "print_int".into(),
                arg_names: vec!["n".into()],
                arg_types: vec![Type::int()],
                result_type: Type::unit(),
                marked: vec![false],
                result_name: "u".into(),
                pre: SpecKind::NoSharing,
                post: SpecKind::NoSharing,
                implicits: vec![("io".to_string(), Mode::Rw)],
                span: Span::default(),
            }),
        );
        let _ = print_ty;
        // Contracts embedded in higher-order argument positions.
        for sig in &program.signatures {
            let resolved = match env.resolve(&sig.ty) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let (arg_types, _) = resolved.fun_parts();
            let mut idx = 0usize;
            let mut cur = &sig.ty.kind;
            while let TypeAstKind::Fun(a, r, _) = cur {
                if let TypeAstKind::Fun(_, _, Some(clause)) = &a.kind {
                    if let Some(arg_ty) = arg_types.get(idx) {
                        let c = FnContract::from_clause(
                            &format!("{} (argument {})", sig.name, idx + 1),
                            arg_ty,
                            clause,
                            Vec::new(),
                            diags,
                        );
                        validate_marks(&c, env, diags);
                        out.ho_args.insert((sig.name.clone(), idx), Rc::new(c));
                    }
                }
                idx += 1;
                cur = &r.kind;
            }
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<Rc<FnContract>> {
        self.by_name.get(name).cloned()
    }
}

fn validate_marks(c: &FnContract, env: &DataEnv, diags: &mut Vec<Diagnostic>) {
    let cache = crate::components::GraphCache::new();
    for (i, marked) in c.marked.iter().enumerate() {
        if !marked {
            continue;
        }
        if let Some(t) = c.arg_types.get(i) {
            let concrete = !matches!(t, Type::Var(_) | Type::Rigid(_) | Type::Fun(..))
                && !cache.components_of(t, env).is_empty();
            if !concrete {
                diags.push(Diagnostic::error(
                    Code::E101,
                    c.span,
                    format!(
                        "argument `{}` of `{}` is marked `!` but its type `{}` is not updatable",
                        c.arg_names.get(i).cloned().unwrap_or_default(),
                        c.name,
                        t
                    ),
                ));
            }
        }
    }
}
