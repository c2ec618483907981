//! Diagnostics: stable codes, spans, deterministic text rendering.

use crate::span::Span;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Code {
    /// Syntax / lexical / name-resolution error.
    E001,
    /// Type error.
    E101,
    /// Bad cast.
    E102,
    /// Missing `!` annotation on an affected variable.
    E201,
    /// Precondition violation at a call.
    E202,
    /// Postcondition not satisfied (or invalid `inferred` request).
    E203,
    /// Update of a value that may share with `abstract`.
    E204,
    /// State-variable misuse (escape, mode violation, unbound use).
    E301,
    /// Call to a function with implicit state variables missing `!`.
    E302,
    /// Type instantiated by an update.
    W101,
}

impl Code {
    pub fn is_warning(self) -> bool {
        matches!(self, Code::W101)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Code::E001 => "E001",
            Code::E101 => "E101",
            Code::E102 => "E102",
            Code::E201 => "E201",
            Code::E202 => "E202",
            Code::E203 => "E203",
            Code::E204 => "E204",
            Code::E301 => "E301",
            Code::E302 => "E302",
            Code::W101 => "W101",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Diagnostic {
    pub code: Code,
    pub span: Span,
    pub message: String,
    pub related: Vec<(Span, String)>,
    /// Tie-break for diagnostics sharing a span, set at creation.
    pub seq: u32,
}

impl Diagnostic {
    pub fn error(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { code, span, message: message.into(), related: Vec::new(), seq: 0 }
    }

    pub fn warning(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { code, span, message: message.into(), related: Vec::new(), seq: 0 }
    }

    pub fn with_related(mut self, span: Span, note: impl Into<String>) -> Self {
        self.related.push((span, note.into()));
        self
    }

    pub fn is_error(&self) -> bool {
        !self.code.is_warning()
    }
}

/// Sort key used everywhere diagnostics are emitted.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (a.span.line, a.span.col, a.code, a.seq, &a.message).cmp(&(
            b.span.line,
            b.span.col,
            b.code,
            b.seq,
            &b.message,
        ))
    });
}

/// Renders one diagnostic against its source. Deterministic; golden-tested.
pub fn render_diagnostic(d: &Diagnostic, file: &str, source: &str) -> String {
    let severity = if d.code.is_warning() { "warning" } else { "error" };
    let mut out = String::new();
    out.push_str(&format!("{}[{}]: {}\n", severity, d.code, d.message));
    out.push_str(&format!("  --> {}:{}:{}\n", file, d.span.line, d.span.col));
    render_excerpt(&mut out, d.span, source);
    for (span, note) in &d.related {
        out.push_str(&format!("  note: {} ({}:{}:{})\n", note, file, span.line, span.col));
    }
    out
}

fn render_excerpt(out: &mut String, span: Span, source: &str) {
    let line_text = match source.lines().nth(span.line.saturating_sub(1) as usize) {
        Some(l) => l,
        None => return,
    };
    let gutter = span.line.to_string();
    let pad = " ".repeat(gutter.len());
    out.push_str(&format!("{} |\n", pad));
    out.push_str(&format!("{} | {}\n", gutter, line_text));
    let col = span.col.saturating_sub(1) as usize;
    let width = (span.len.max(1) as usize).min(line_text.chars().count().saturating_sub(col).max(1));
    out.push_str(&format!("{} | {}{}\n", pad, " ".repeat(col), "^".repeat(width)));
}

/// Renders a batch, sorted, in the standard transcript form.
pub fn render_all(diags: &[Diagnostic], file: &str, source: &str) -> String {
    let mut sorted = diags.to_vec();
    sort_diagnostics(&mut sorted);
    let mut out = String::new();
    for d in &sorted {
        out.push_str(&render_diagnostic(d, file, source));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excerpt_shows_first_line() {
        let src = "first line here\nsecond";
        let d = Diagnostic::error(Code::E001, Span::new(1, 1, 0, 5), "boom");
        let text = render_diagnostic(&d, "t.pawns", src);
        assert!(text.contains("error[E001]: boom"));
        assert!(text.contains("t.pawns:1:1"));
        assert!(text.contains("first line here"));
        assert!(text.contains("^^^^^"));
    }

    #[test]
    fn sorted_by_span_then_code() {
        let mut ds = vec![
            Diagnostic::error(Code::E101, Span::new(2, 1, 0, 1), "b"),
            Diagnostic::error(Code::E001, Span::new(1, 5, 0, 1), "a"),
        ];
        sort_diagnostics(&mut ds);
        assert_eq!(ds[0].message, "a");
    }
}
