//! Source positions. Lines and columns are 1-based; `offset`/`len` are byte
//! ranges into the original source, used for lexeme recovery and round-trips.

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub offset: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, offset: u32, len: u32) -> Self {
        Span { line, col, offset, len }
    }

    /// Smallest span covering both.
    pub fn merge(self, other: Span) -> Span {
        let (a, b) = if self.offset <= other.offset { (self, other) } else { (other, self) };
        let end = (b.offset + b.len).max(a.offset + a.len);
        Span { line: a.line, col: a.col, offset: a.offset, len: end - a.offset }
    }

    pub fn end_offset(self) -> u32 {
        self.offset + self.len
    }
}

/// Identifies an AST node; assigned densely by the parser.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NodeId(pub u32);
