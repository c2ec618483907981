//! Core of the Pawns language toolchain: lexer, parser, type checker,
//! sharing analysis, renaming expansion, state-variable checking, and a
//! strict interpreter with a dynamic alias oracle.

pub mod ast;
pub mod components;
pub mod contracts;
pub mod rel;
pub mod sharing;
pub mod diag;
pub mod expand;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod pipeline;
pub mod pretty;
pub mod span;
pub mod statevars;
pub mod token;
pub mod typecheck;
pub mod types;

pub use diag::{Code, Diagnostic};
pub use parser::parse;
pub use pipeline::{check_source, run_main, CheckedProgram, Session};
