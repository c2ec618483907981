use crate::span::Span;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Kw {
    Data,
    Type,
    Case,
    Of,
    If,
    Then,
    Else,
    Sharing,
    Pre,
    Post,
    Nosharing,
    Implicit,
    Ro,
    Wo,
    Rw,
    Renaming,
    With,
    Abstract,
    Inferred,
}

impl Kw {
    pub fn as_str(self) -> &'static str {
        match self {
            Kw::Data => "data",
            Kw::Type => "type",
            Kw::Case => "case",
            Kw::Of => "of",
            Kw::If => "if",
            Kw::Then => "then",
            Kw::Else => "else",
            Kw::Sharing => "sharing",
            Kw::Pre => "pre",
            Kw::Post => "post",
            Kw::Nosharing => "nosharing",
            Kw::Implicit => "implicit",
            Kw::Ro => "ro",
            Kw::Wo => "wo",
            Kw::Rw => "rw",
            Kw::Renaming => "renaming",
            Kw::With => "with",
            Kw::Abstract => "abstract",
            Kw::Inferred => "inferred",
        }
    }

    pub fn from_str(s: &str) -> Option<Kw> {
        Some(match s {
            "data" => Kw::Data,
            "type" => Kw::Type,
            "case" => Kw::Case,
            "of" => Kw::Of,
            "if" => Kw::If,
            "then" => Kw::Then,
            "else" => Kw::Else,
            "sharing" => Kw::Sharing,
            "pre" => Kw::Pre,
            "post" => Kw::Post,
            "nosharing" => Kw::Nosharing,
            "implicit" => Kw::Implicit,
            "ro" => Kw::Ro,
            "wo" => Kw::Wo,
            "rw" => Kw::Rw,
            "renaming" => Kw::Renaming,
            "with" => Kw::With,
            "abstract" => Kw::Abstract,
            "inferred" => Kw::Inferred,
            _ => return None,
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TokKind {
    /// Lowercase-initial identifier.
    Ident(String),
    /// Uppercase-initial name: data constructor or type constructor.
    CtorName(String),
    IntLit(i64),
    Kw(Kw),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Underscore,
    Bang,
    /// `*`. `tight` is set when the star is immediately followed (no
    /// whitespace) by an identifier, `!` or `(`; the parser uses this to
    /// tell a dereference argument from multiplication.
    Star { tight: bool },
    /// `:=`
    Assign,
    /// `=`
    Equals,
    /// `::`
    DoubleColon,
    /// `->`
    Arrow,
    /// `|`
    Pipe,
    Plus,
    Minus,
    Lt,
    Le,
    EqEq,
    Ge,
    Gt,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Ident(s) => write!(f, "{}", s),
            TokKind::CtorName(s) => write!(f, "{}", s),
            TokKind::IntLit(n) => write!(f, "{}", n),
            TokKind::Kw(k) => write!(f, "{}", k.as_str()),
            TokKind::LParen => write!(f, "("),
            TokKind::RParen => write!(f, ")"),
            TokKind::LBrace => write!(f, "{{"),
            TokKind::RBrace => write!(f, "}}"),
            TokKind::Semi => write!(f, ";"),
            TokKind::Comma => write!(f, ","),
            TokKind::Underscore => write!(f, "_"),
            TokKind::Bang => write!(f, "!"),
            TokKind::Star { .. } => write!(f, "*"),
            TokKind::Assign => write!(f, ":="),
            TokKind::Equals => write!(f, "="),
            TokKind::DoubleColon => write!(f, "::"),
            TokKind::Arrow => write!(f, "->"),
            TokKind::Pipe => write!(f, "|"),
            TokKind::Plus => write!(f, "+"),
            TokKind::Minus => write!(f, "-"),
            TokKind::Lt => write!(f, "<"),
            TokKind::Le => write!(f, "<="),
            TokKind::EqEq => write!(f, "=="),
            TokKind::Ge => write!(f, ">="),
            TokKind::Gt => write!(f, ">"),
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Token {
    pub kind: TokKind,
    pub span: Span,
}

impl Token {
    pub fn is_ident(&self) -> bool {
        matches!(self.kind, TokKind::Ident(_))
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokKind::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn ctor_name(&self) -> Option<&str> {
        match &self.kind {
            TokKind::CtorName(s) => Some(s),
            _ => None,
        }
    }
}
