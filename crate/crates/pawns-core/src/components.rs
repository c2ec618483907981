//! The finite per-type domain of memory-cell classes ("components"),
//! produced by type folding: the first repeated (type constructor,
//! instantiation) occurrence along any path folds back to its earlier
//! node, so every type has finitely many components.

use crate::types::{DataEnv, Type};
use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Step {
    /// Argument cell of a data constructor (0-based index; printed 1-based).
    Ctor(String, usize),
    /// The cell a `Ref` points at.
    RefTarget,
    /// The unknown cells of a type-variable-typed value (root only).
    Opaque(String),
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Ctor(name, i) => write!(f, "{}/{}", name, i + 1),
            Step::RefTarget => write!(f, "*"),
            Step::Opaque(v) => write!(f, "?{}", v),
        }
    }
}

/// A memory-cell class of a type: the canonical folded path from the root
/// plus the type of value the cell holds.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Component {
    pub path: Vec<Step>,
    pub cell_type: Type,
}

impl Component {
    pub fn terminal(&self) -> &Step {
        self.path.last().expect("component paths are non-empty")
    }

    pub fn is_ref_target(&self) -> bool {
        matches!(self.terminal(), Step::RefTarget)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.path.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Two components may alias only if their cell types are equal and, unless
/// one of them is a pointer target, they have the same enclosing data
/// constructor and argument.
pub fn alias_compatible(c1: &Component, c2: &Component) -> bool {
    if c1.cell_type != c2.cell_type {
        return false;
    }
    c1.is_ref_target() || c2.is_ref_target() || c1.terminal() == c2.terminal()
}

#[derive(Debug)]
struct Node {
    ty: Type,
    /// Outgoing edges in declaration order: (step, edge index).
    edges: Vec<usize>,
}

#[derive(Debug)]
struct Edge {
    step: Step,
    #[allow(dead_code)]
    from: usize,
    to: usize,
    cell_type: Type,
    canonical: Vec<Step>,
}

/// Folded graph of one type over a data environment.
#[derive(Debug)]
pub struct FoldedGraph {
    pub root_type: Type,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl FoldedGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All components, sorted by canonical path.
    pub fn components(&self) -> Vec<Component> {
        let mut out: Vec<Component> = self
            .edges
            .iter()
            .map(|e| Component { path: e.canonical.clone(), cell_type: e.cell_type.clone() })
            .collect();
        out.sort();
        out
    }

    /// Follows `steps` from the root; returns the component of the final
    /// edge. Folding means the result path may differ from `steps`.
    pub fn resolve_path(&self, steps: &[Step]) -> Option<Component> {
        self.resolve_from(0, steps)
    }

    fn resolve_from(&self, start: usize, steps: &[Step]) -> Option<Component> {
        let mut cur = start;
        let mut last_edge: Option<&Edge> = None;
        for step in steps {
            let node = &self.nodes[cur];
            let edge = node
                .edges
                .iter()
                .map(|&ei| &self.edges[ei])
                .find(|e| &e.step == step)?;
            cur = edge.to;
            last_edge = Some(edge);
        }
        last_edge.map(|e| Component { path: e.canonical.clone(), cell_type: e.cell_type.clone() })
    }

    /// Node reached by a component's canonical path (the cell's contents).
    fn node_of(&self, steps: &[Step]) -> Option<usize> {
        let mut cur = 0usize;
        for step in steps {
            let node = &self.nodes[cur];
            let edge = node
                .edges
                .iter()
                .map(|&ei| &self.edges[ei])
                .find(|e| &e.step == step)?;
            cur = edge.to;
        }
        Some(cur)
    }

    /// Maps a component of `inner` (the type held at `prefix`'s cell) into
    /// this graph: the cells of a value stored at `prefix`. An `Opaque`
    /// step over a concretely instantiated type expands to every component
    /// below the prefix.
    pub fn map_under(&self, prefix: &[Step], inner_path: &[Step]) -> Vec<Component> {
        let Some(start) = self.node_of(prefix) else { return Vec::new() };
        if let [Step::Opaque(_)] = inner_path {
            if self
                .nodes[start]
                .edges
                .iter()
                .any(|&ei| matches!(self.edges[ei].step, Step::Opaque(_)))
            {
                // Matching opaque edge exists; fall through to the walk.
            } else {
                return self.components_below(start);
            }
        }
        match self.resolve_from(start, inner_path) {
            Some(c) => vec![c],
            None => Vec::new(),
        }
    }

    /// The cell at `prefix` (if any) plus every component reachable below
    /// it: the cell-set of the value stored there.
    pub fn at_or_below(&self, prefix: &[Step]) -> Vec<Component> {
        let mut out = Vec::new();
        if prefix.is_empty() {
            return self.components();
        }
        let Some(cell) = self.resolve_path(prefix) else { return out };
        out.push(cell);
        if let Some(node) = self.node_of(prefix) {
            out.extend(self.components_below(node));
        }
        out.sort();
        out.dedup();
        out
    }

    /// All components reachable from a node (inclusive of its own edges).
    fn components_below(&self, start: usize) -> Vec<Component> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(n) = stack.pop() {
            if seen[n] {
                continue;
            }
            seen[n] = true;
            for &ei in &self.nodes[n].edges {
                let e = &self.edges[ei];
                out.push(Component { path: e.canonical.clone(), cell_type: e.cell_type.clone() });
                stack.push(e.to);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Builds folded graphs, memoized per type key. Safe to treat as computed
/// once per type.
#[derive(Default)]
pub struct GraphCache {
    env_graphs: RefCell<HashMap<String, Rc<FoldedGraph>>>,
}

impl GraphCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn graph(&self, ty: &Type, env: &DataEnv) -> Rc<FoldedGraph> {
        let key = ty.key();
        if let Some(g) = self.env_graphs.borrow().get(&key) {
            return Rc::clone(g);
        }
        let g = Rc::new(build_graph(ty, env));
        self.env_graphs.borrow_mut().insert(key, Rc::clone(&g));
        g
    }

    pub fn components_of(&self, ty: &Type, env: &DataEnv) -> Vec<Component> {
        match ty {
            Type::Var(_) | Type::Rigid(_) => {
                vec![Component { path: vec![opaque_step(ty)], cell_type: ty.clone() }]
            }
            _ => self.graph(ty, env).components(),
        }
    }
}

pub fn opaque_step(ty: &Type) -> Step {
    Step::Opaque(format!("{}", ty))
}

fn build_graph(root: &Type, env: &DataEnv) -> FoldedGraph {
    let mut g = FoldedGraph {
        root_type: root.clone(),
        nodes: vec![Node { ty: root.clone(), edges: Vec::new() }],
        edges: Vec::new(),
    };
    // Ancestor stack: (type key, node index).
    let mut stack: Vec<(String, usize)> = vec![(root.key(), 0)];
    expand(&mut g, 0, env, &mut stack, Vec::new());
    g
}

fn expand(
    g: &mut FoldedGraph,
    node: usize,
    env: &DataEnv,
    stack: &mut Vec<(String, usize)>,
    path: Vec<Step>,
) {
    let ty = g.nodes[node].ty.clone();
    let successors: Vec<(Step, Type)> = match &ty {
        Type::App(name, args) if name == "Ref" && args.len() == 1 => {
            vec![(Step::RefTarget, args[0].clone())]
        }
        Type::App(name, _) => match env.datatypes.get(name) {
            Some(info) => {
                let mut out = Vec::new();
                for cname in &info.ctors {
                    if let Some(arg_types) = env.ctor_arg_types(cname, &ty) {
                        for (i, at) in arg_types.into_iter().enumerate() {
                            out.push((Step::Ctor(cname.clone(), i), at));
                        }
                    }
                }
                out
            }
            None => Vec::new(), // Int, (), unknowns: atomic
        },
        Type::Var(_) | Type::Rigid(_) | Type::Fun(..) => Vec::new(),
    };
    for (step, target_ty) in successors {
        let key = target_ty.key();
        let mut canon = path.clone();
        canon.push(step.clone());
        if let Some(&(_, existing)) = stack.iter().find(|(k, _)| k == &key) {
            // Fold back to the first occurrence along this path.
            let ei = g.edges.len();
            g.edges.push(Edge {
                step,
                from: node,
                to: existing,
                cell_type: target_ty,
                canonical: canon,
            });
            g.nodes[node].edges.push(ei);
        } else if stack.len() >= 64 {
            // Non-regular type recursion: fold to the nearest ancestor with
            // the same head constructor as a safety net.
            let head = type_head(&target_ty);
            let fallback = stack
                .iter()
                .rev()
                .find(|(k, _)| k.starts_with(&head))
                .map(|&(_, n)| n)
                .unwrap_or(0);
            let ei = g.edges.len();
            g.edges.push(Edge {
                step,
                from: node,
                to: fallback,
                cell_type: target_ty,
                canonical: canon,
            });
            g.nodes[node].edges.push(ei);
        } else {
            let new_node = g.nodes.len();
            g.nodes.push(Node { ty: target_ty.clone(), edges: Vec::new() });
            let ei = g.edges.len();
            g.edges.push(Edge {
                step,
                from: node,
                to: new_node,
                cell_type: target_ty.clone(),
                canonical: canon.clone(),
            });
            g.nodes[node].edges.push(ei);
            stack.push((target_ty.key(), new_node));
            expand(g, new_node, env, stack, canon);
            stack.pop();
        }
    }
}

fn type_head(t: &Type) -> String {
    match t {
        Type::App(n, _) => n.clone(),
        other => format!("{}", other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn env_with(src: &str) -> DataEnv {
        let r = parse(src);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        let mut env = DataEnv::with_builtins();
        let mut diags = Vec::new();
        env.load(&r.program, &mut diags);
        assert!(diags.is_empty(), "{:?}", diags);
        env
    }

    fn paths(comps: &[Component]) -> Vec<String> {
        comps.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn cord_has_five_components() {
        let env = env_with("type Ints = List Int\ndata Cord = Leaf Ints | Branch Cord Cord\n");
        let cache = GraphCache::new();
        let cord = Type::App("Cord".into(), vec![]);
        let comps = cache.components_of(&cord, &env);
        assert_eq!(
            paths(&comps),
            vec!["Branch/1", "Branch/2", "Leaf/1", "Leaf/1.Cons/1", "Leaf/1.Cons/2"]
        );
    }

    #[test]
    fn generic_list_has_two_components() {
        let env = DataEnv::with_builtins();
        let cache = GraphCache::new();
        let list_t = Type::App("List".into(), vec![Type::Rigid("t".into())]);
        let comps = cache.components_of(&list_t, &env);
        assert_eq!(paths(&comps), vec!["Cons/1", "Cons/2"]);
    }

    #[test]
    fn atomic_types_have_no_components() {
        let env = DataEnv::with_builtins();
        let cache = GraphCache::new();
        assert!(cache.components_of(&Type::int(), &env).is_empty());
        assert!(cache.components_of(&Type::unit(), &env).is_empty());
    }

    #[test]
    fn bst_components_fold_to_root() {
        let env = env_with("data BST = Empty | Node BST Int BST\n");
        let cache = GraphCache::new();
        let bst = Type::App("BST".into(), vec![]);
        let comps = cache.components_of(&bst, &env);
        assert_eq!(paths(&comps), vec!["Node/1", "Node/2", "Node/3"]);
        // Node/1 and Node/3 fold back: resolving a nested path lands on the
        // same component.
        let g = cache.graph(&bst, &env);
        let nested = g
            .resolve_path(&[Step::Ctor("Node".into(), 0), Step::Ctor("Node".into(), 2)])
            .unwrap();
        assert_eq!(nested.to_string(), "Node/3");
    }

    #[test]
    fn ref_ints_has_three_components() {
        let env = env_with("type Ints = List Int\n");
        let cache = GraphCache::new();
        let t = Type::reference(Type::App("List".into(), vec![Type::int()]));
        let comps = cache.components_of(&t, &env);
        assert_eq!(paths(&comps), vec!["*", "*.Cons/1", "*.Cons/2"]);
    }

    #[test]
    fn alias_compatibility_rules() {
        let env = env_with("type Ints = List Int\ndata Cord = Leaf Ints | Branch Cord Cord\n");
        let cache = GraphCache::new();
        let cord = Type::App("Cord".into(), vec![]);
        let comps = cache.components_of(&cord, &env);
        let leaf1 = comps.iter().find(|c| c.to_string() == "Leaf/1").unwrap();
        let cons2 = comps.iter().find(|c| c.to_string() == "Leaf/1.Cons/2").unwrap();
        // Same cell type (Ints) but different enclosing constructor.
        assert_eq!(leaf1.cell_type, cons2.cell_type);
        assert!(!alias_compatible(leaf1, cons2));
        // A ref target of matching cell type is compatible with either.
        let ref_ints = Type::reference(Type::App("List".into(), vec![Type::int()]));
        let rt = cache
            .components_of(&ref_ints, &env)
            .into_iter()
            .find(|c| c.is_ref_target() && c.path.len() == 1)
            .unwrap();
        assert!(alias_compatible(&rt, leaf1));
        assert!(alias_compatible(&rt, cons2));
        // Reflexive.
        assert!(alias_compatible(leaf1, leaf1));
        // Different cell types never alias.
        let node2 = Component {
            path: vec![Step::Ctor("Node".into(), 1)],
            cell_type: Type::int(),
        };
        assert!(!alias_compatible(leaf1, &node2));
    }

    #[test]
    fn folding_is_idempotent_and_bounded() {
        let env = env_with("data Tree = Tip | Fork Tree (List Int) Tree\n");
        let cache = GraphCache::new();
        let t = Type::App("Tree".into(), vec![]);
        let g1 = cache.graph(&t, &env);
        let g2 = cache.graph(&t, &env);
        assert!(Rc::ptr_eq(&g1, &g2));
        // node count <= reachable constructor arguments + 1
        assert!(g1.node_count() <= 5 + 1);
        // Resolving any component's own path yields itself.
        for c in g1.components() {
            let r = g1.resolve_path(&c.path).unwrap();
            assert_eq!(r, c);
        }
    }

    #[test]
    fn mutually_recursive_types_fold() {
        let env = env_with("data A = MkA B | NoA\ndata B = MkB A\n");
        let cache = GraphCache::new();
        let a = Type::App("A".into(), vec![]);
        let comps = cache.components_of(&a, &env);
        assert_eq!(paths(&comps), vec!["MkA/1", "MkA/1.MkB/1"]);
    }
}
