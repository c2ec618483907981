//! Normalized semantic types, the data-constructor environment, and alias
//! expansion.

use crate::ast::{self, TypeAst, TypeAstKind};
use crate::diag::{Code, Diagnostic};
use std::collections::BTreeMap;
use std::fmt;

pub const UNIT: &str = "()";

#[derive(Clone, PartialEq, Eq, Debug, PartialOrd, Ord, Hash)]
pub enum Type {
    /// Unification variable.
    Var(u32),
    /// Universally quantified (or skolemized signature) variable.
    Rigid(String),
    /// Type constructor application; `()`, `Int`, `Bool`, `List t`,
    /// `Ref t` and user data types.
    App(String, Vec<Type>),
    Fun(Box<Type>, Box<Type>),
}

impl Type {
    pub fn unit() -> Type {
        Type::App(UNIT.to_string(), Vec::new())
    }

    pub fn int() -> Type {
        Type::App("Int".to_string(), Vec::new())
    }

    pub fn bool_ty() -> Type {
        Type::App("Bool".to_string(), Vec::new())
    }

    pub fn reference(t: Type) -> Type {
        Type::App("Ref".to_string(), vec![t])
    }

    pub fn ref_target(&self) -> Option<&Type> {
        match self {
            Type::App(n, args) if n == "Ref" && args.len() == 1 => Some(&args[0]),
            _ => None,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Type::App(n, _) if n == "Int" || n == "Bool" || n == UNIT)
    }

    pub fn contains_type_var(&self) -> bool {
        match self {
            Type::Var(_) | Type::Rigid(_) => true,
            Type::App(_, args) => args.iter().any(|t| t.contains_type_var()),
            Type::Fun(a, r) => a.contains_type_var() || r.contains_type_var(),
        }
    }

    /// Flattens `a -> b -> c` into (args, result).
    pub fn fun_parts(&self) -> (Vec<&Type>, &Type) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Type::Fun(a, r) = cur {
            args.push(a.as_ref());
            cur = r;
        }
        (args, cur)
    }

    /// Canonical string form, keyed by structure; used to identify folded
    /// type graphs and abstract pseudo-variables.
    pub fn key(&self) -> String {
        format!("{}", self)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Var(n) => {
                if *n == 0 {
                    write!(f, "t")
                } else {
                    write!(f, "t{}", n)
                }
            }
            Type::Rigid(n) => write!(f, "{}", n),
            Type::App(n, args) => {
                write!(f, "{}", n)?;
                for a in args {
                    match a {
                        Type::App(_, inner) if !inner.is_empty() => write!(f, " ({})", a)?,
                        Type::Fun(..) => write!(f, " ({})", a)?,
                        _ => write!(f, " {}", a)?,
                    }
                }
                Ok(())
            }
            Type::Fun(a, r) => {
                match a.as_ref() {
                    Type::Fun(..) => write!(f, "({}) -> {}", a, r),
                    _ => write!(f, "{} -> {}", a, r),
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TypeScheme {
    /// Quantified variable names (rendered as `Rigid` in `ty`).
    pub vars: Vec<String>,
    pub ty: Type,
}

impl TypeScheme {
    pub fn mono(ty: Type) -> TypeScheme {
        TypeScheme { vars: Vec::new(), ty }
    }
}

#[derive(Clone, Debug)]
pub struct CtorInfo {
    pub name: String,
    pub datatype: String,
    pub tag: usize,
    /// Argument types over `Rigid` datatype parameters.
    pub args: Vec<Type>,
}

#[derive(Clone, Debug)]
pub struct DataInfo {
    pub name: String,
    pub params: Vec<String>,
    pub ctors: Vec<String>,
}

/// Datatype and alias environment, with builtins preloaded.
#[derive(Clone, Debug, Default)]
pub struct DataEnv {
    pub datatypes: BTreeMap<String, DataInfo>,
    pub ctors: BTreeMap<String, CtorInfo>,
    aliases: BTreeMap<String, (Vec<String>, TypeAst)>,
}

impl DataEnv {
    pub fn with_builtins() -> DataEnv {
        let mut env = DataEnv::default();
        env.add_datatype(
            "List",
            &["t"],
            &[("Nil", vec![]), ("Cons", vec![
                Type::Rigid("t".into()),
                Type::App("List".into(), vec![Type::Rigid("t".into())]),
            ])],
        );
        env.add_datatype("Bool", &[], &[("False", vec![]), ("True", vec![])]);
        // The hidden io world type; has no user-visible constructors.
        env.datatypes.insert(
            "Io".into(),
            DataInfo { name: "Io".into(), params: Vec::new(), ctors: Vec::new() },
        );
        env
    }

    fn add_datatype(&mut self, name: &str, params: &[&str], ctors: &[(&str, Vec<Type>)]) {
        let info = DataInfo {
            name: name.to_string(),
            params: params.iter().map(|s| s.to_string()).collect(),
            ctors: ctors.iter().map(|(c, _)| c.to_string()).collect(),
        };
        self.datatypes.insert(name.to_string(), info);
        for (tag, (cname, args)) in ctors.iter().enumerate() {
            self.ctors.insert(
                cname.to_string(),
                CtorInfo {
                    name: cname.to_string(),
                    datatype: name.to_string(),
                    tag,
                    args: args.clone(),
                },
            );
        }
    }

    /// Loads user declarations; reports duplicate constructors/types.
    pub fn load(&mut self, program: &ast::Program, diags: &mut Vec<Diagnostic>) {
        for alias in &program.type_aliases {
            if self.aliases.contains_key(&alias.name) || self.datatypes.contains_key(&alias.name) {
                diags.push(Diagnostic::error(
                    Code::E001,
                    alias.span,
                    format!("type `{}` is declared more than once", alias.name),
                ));
                continue;
            }
            self.aliases.insert(alias.name.clone(), (alias.params.clone(), alias.body.clone()));
        }
        for d in &program.data_decls {
            if self.datatypes.contains_key(&d.name) || self.aliases.contains_key(&d.name) {
                diags.push(Diagnostic::error(
                    Code::E001,
                    d.span,
                    format!("type `{}` is declared more than once", d.name),
                ));
                continue;
            }
            let info = DataInfo {
                name: d.name.clone(),
                params: d.params.clone(),
                ctors: d.ctors.iter().map(|c| c.name.clone()).collect(),
            };
            self.datatypes.insert(d.name.clone(), info);
        }
        // Constructor argument types are resolved after all datatype heads
        // are known (mutual recursion).
        for d in &program.data_decls {
            for (tag, c) in d.ctors.iter().enumerate() {
                if self.ctors.contains_key(&c.name) {
                    diags.push(Diagnostic::error(
                        Code::E001,
                        c.span,
                        format!("constructor `{}` is declared more than once", c.name),
                    ));
                    continue;
                }
                let mut args = Vec::new();
                let mut ok = true;
                for a in &c.args {
                    match self.resolve(a) {
                        Ok(t) => args.push(t),
                        Err(d2) => {
                            diags.push(d2);
                            ok = false;
                        }
                    }
                }
                if ok {
                    self.ctors.insert(
                        c.name.clone(),
                        CtorInfo { name: c.name.clone(), datatype: d.name.clone(), tag, args },
                    );
                }
            }
        }
    }

    /// Resolves a syntactic type: expands aliases, checks arities. Named
    /// variables become `Rigid`.
    pub fn resolve(&self, t: &TypeAst) -> Result<Type, Diagnostic> {
        self.resolve_depth(t, 0)
    }

    fn resolve_depth(&self, t: &TypeAst, depth: usize) -> Result<Type, Diagnostic> {
        if depth > 64 {
            return Err(Diagnostic::error(Code::E001, t.span, "type alias expansion is cyclic"));
        }
        match &t.kind {
            TypeAstKind::Var(v) => Ok(Type::Rigid(v.clone())),
            TypeAstKind::Unit => Ok(Type::unit()),
            TypeAstKind::Fun(a, r, _) => Ok(Type::Fun(
                Box::new(self.resolve_depth(a, depth)?),
                Box::new(self.resolve_depth(r, depth)?),
            )),
            TypeAstKind::App(name, args) => {
                let resolved: Vec<Type> = args
                    .iter()
                    .map(|a| self.resolve_depth(a, depth))
                    .collect::<Result<_, _>>()?;
                if let Some((params, body)) = self.aliases.get(name) {
                    if params.len() != resolved.len() {
                        return Err(Diagnostic::error(
                            Code::E001,
                            t.span,
                            format!("alias `{}` expects {} argument(s)", name, params.len()),
                        ));
                    }
                    let expanded = self.resolve_depth(body, depth + 1)?;
                    let map: BTreeMap<&str, &Type> =
                        params.iter().map(|p| p.as_str()).zip(resolved.iter()).collect();
                    return Ok(substitute_rigid(&expanded, &map));
                }
                if name == "Int" || name == "Ref" || name == UNIT {
                    let arity = if name == "Ref" { 1 } else { 0 };
                    if resolved.len() != arity {
                        return Err(Diagnostic::error(
                            Code::E001,
                            t.span,
                            format!("type `{}` expects {} argument(s)", name, arity),
                        ));
                    }
                    return Ok(Type::App(name.clone(), resolved));
                }
                match self.datatypes.get(name) {
                    Some(info) => {
                        if info.params.len() != resolved.len() {
                            return Err(Diagnostic::error(
                                Code::E001,
                                t.span,
                                format!(
                                    "type `{}` expects {} argument(s)",
                                    name,
                                    info.params.len()
                                ),
                            ));
                        }
                        Ok(Type::App(name.clone(), resolved))
                    }
                    None => Err(Diagnostic::error(
                        Code::E001,
                        t.span,
                        format!("unknown type `{}`", name),
                    )),
                }
            }
        }
    }

    /// Instantiated argument types of `ctor` for a value of type `ty`.
    pub fn ctor_arg_types(&self, ctor: &str, ty: &Type) -> Option<Vec<Type>> {
        let info = self.ctors.get(ctor)?;
        let args = match ty {
            Type::App(name, args) if name == &info.datatype => args,
            _ => return None,
        };
        let dt = self.datatypes.get(&info.datatype)?;
        let map: BTreeMap<&str, &Type> =
            dt.params.iter().map(|p| p.as_str()).zip(args.iter()).collect();
        Some(info.args.iter().map(|t| substitute_rigid(t, &map)).collect())
    }
}

pub fn substitute_rigid(t: &Type, map: &BTreeMap<&str, &Type>) -> Type {
    match t {
        Type::Rigid(n) => match map.get(n.as_str()) {
            Some(ty) => (*ty).clone(),
            None => t.clone(),
        },
        Type::Var(_) => t.clone(),
        Type::App(n, args) => {
            Type::App(n.clone(), args.iter().map(|a| substitute_rigid(a, map)).collect())
        }
        Type::Fun(a, r) => Type::Fun(
            Box::new(substitute_rigid(a, map)),
            Box::new(substitute_rigid(r, map)),
        ),
    }
}

/// Renders a scheme with quantified variables renamed a, b, c, ... in first
/// occurrence order.
pub fn display_scheme(scheme: &TypeScheme) -> String {
    let mut order = Vec::new();
    collect_rigids(&scheme.ty, &mut order);
    let names: Vec<String> = (0..order.len())
        .map(|i| {
            let c = (b'a' + (i % 26) as u8) as char;
            if i < 26 {
                c.to_string()
            } else {
                format!("{}{}", c, i / 26)
            }
        })
        .collect();
    let map: BTreeMap<&str, Type> = order
        .iter()
        .map(|s| s.as_str())
        .zip(names.iter().map(|n| Type::Rigid(n.clone())))
        .collect();
    let map_ref: BTreeMap<&str, &Type> = map.iter().map(|(k, v)| (*k, v)).collect();
    format!("{}", substitute_rigid(&scheme.ty, &map_ref))
}

fn collect_rigids(t: &Type, out: &mut Vec<String>) {
    match t {
        Type::Rigid(n) => {
            if !out.contains(n) {
                out.push(n.clone());
            }
        }
        Type::Var(_) => {}
        Type::App(_, args) => args.iter().for_each(|a| collect_rigids(a, out)),
        Type::Fun(a, r) => {
            collect_rigids(a, out);
            collect_rigids(r, out);
        }
    }
}

/// Alpha-equivalence of two types up to consistent renaming of rigid
/// variables (used by tests and signature comparisons).
pub fn alpha_equivalent(a: &Type, b: &Type) -> bool {
    fn go(a: &Type, b: &Type, map: &mut BTreeMap<String, String>, rev: &mut BTreeMap<String, String>) -> bool {
        match (a, b) {
            (Type::Rigid(x), Type::Rigid(y)) => {
                let fwd = map.entry(x.clone()).or_insert_with(|| y.clone());
                let bwd = rev.entry(y.clone()).or_insert_with(|| x.clone());
                fwd == y && bwd == x
            }
            (Type::Var(x), Type::Var(y)) => x == y,
            (Type::App(n1, a1), Type::App(n2, a2)) => {
                n1 == n2
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(x, y)| go(x, y, map, rev))
            }
            (Type::Fun(a1, r1), Type::Fun(a2, r2)) => {
                go(a1, a2, map, rev) && go(r1, r2, map, rev)
            }
            _ => false,
        }
    }
    go(a, b, &mut BTreeMap::new(), &mut BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::span::Span;

    #[test]
    fn alias_expansion() {
        let r = parse("type Ints = List Int\ndata BST = Empty | Node BST Int BST\n");
        let mut env = DataEnv::with_builtins();
        let mut diags = Vec::new();
        env.load(&r.program, &mut diags);
        assert!(diags.is_empty());
        let t = env
            .resolve(&TypeAst {
                kind: TypeAstKind::App("Ints".into(), vec![]),
                span: Span::default(),
            })
            .unwrap();
        assert_eq!(t, Type::App("List".into(), vec![Type::int()]));
    }

    #[test]
    fn ctor_arg_instantiation() {
        let env = DataEnv::with_builtins();
        let list_int = Type::App("List".into(), vec![Type::int()]);
        let args = env.ctor_arg_types("Cons", &list_int).unwrap();
        assert_eq!(args, vec![Type::int(), list_int.clone()]);
    }

    #[test]
    fn display_forms() {
        let t = Type::Fun(
            Box::new(Type::Fun(Box::new(Type::Rigid("b".into())), Box::new(Type::Rigid("a".into())))),
            Box::new(Type::App("List".into(), vec![Type::Rigid("a".into())])),
        );
        assert_eq!(format!("{}", t), "(b -> a) -> List a");
        assert_eq!(format!("{}", Type::reference(Type::App("List".into(), vec![Type::int()]))), "Ref (List Int)");
    }

    #[test]
    fn alpha_equivalence_is_consistent() {
        let a = Type::Fun(Box::new(Type::Rigid("a".into())), Box::new(Type::Rigid("a".into())));
        let b = Type::Fun(Box::new(Type::Rigid("x".into())), Box::new(Type::Rigid("x".into())));
        let c = Type::Fun(Box::new(Type::Rigid("x".into())), Box::new(Type::Rigid("y".into())));
        assert!(alpha_equivalent(&a, &b));
        assert!(!alpha_equivalent(&a, &c));
    }
}
