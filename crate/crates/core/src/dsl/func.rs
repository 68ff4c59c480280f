//! Function components and their total semantics.
//!
//! Out-of-range and no-match cases follow the usual SMT-LIB string theory
//! conventions so that every well-sorted application has a value. String
//! positions and lengths count Unicode scalar values.

use std::fmt;

use super::value::{Sort, ValRef, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Concat,
    Replace,
    At,
    Substr,
    IntToStr,
    Plus,
    Minus,
    Len,
    StrToInt,
    IndexOf,
    StrEq,
    IntLe,
    PrefixOf,
    SuffixOf,
    Contains,
}

use Sort::{Bool as B, Int as I, String as S};

impl Func {
    pub const ALL: [Func; 15] = [
        Func::Concat,
        Func::Replace,
        Func::At,
        Func::Substr,
        Func::IntToStr,
        Func::Plus,
        Func::Minus,
        Func::Len,
        Func::StrToInt,
        Func::IndexOf,
        Func::StrEq,
        Func::IntLe,
        Func::PrefixOf,
        Func::SuffixOf,
        Func::Contains,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Concat => "concat",
            Func::Replace => "replace",
            Func::At => "at",
            Func::Substr => "substr",
            Func::IntToStr => "int_to_str",
            Func::Plus => "+",
            Func::Minus => "-",
            Func::Len => "len",
            Func::StrToInt => "str_to_int",
            Func::IndexOf => "indexof",
            Func::StrEq => "=",
            Func::IntLe => "<=",
            Func::PrefixOf => "prefixof",
            Func::SuffixOf => "suffixof",
            Func::Contains => "contains",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arg_sorts(self) -> &'static [Sort] {
        match self {
            Func::Concat => &[S, S],
            Func::Replace => &[S, S, S],
            Func::At => &[S, I],
            Func::Substr => &[S, I, I],
            Func::IntToStr => &[I],
            Func::Plus | Func::Minus => &[I, I],
            Func::Len | Func::StrToInt => &[S],
            Func::IndexOf => &[S, S, I],
            Func::StrEq => &[S, S],
            Func::IntLe => &[I, I],
            Func::PrefixOf | Func::SuffixOf | Func::Contains => &[S, S],
        }
    }

    pub fn arity(self) -> usize {
        self.arg_sorts().len()
    }

    pub fn result_sort(self) -> Sort {
        match self {
            Func::Concat | Func::Replace | Func::At | Func::Substr | Func::IntToStr => S,
            Func::Plus | Func::Minus | Func::Len | Func::StrToInt | Func::IndexOf => I,
            Func::StrEq | Func::IntLe | Func::PrefixOf | Func::SuffixOf | Func::Contains => B,
        }
    }

    /// Applies the function to already-evaluated arguments.
    ///
    /// Panics on ill-sorted arguments; expressions are sort-checked at
    /// construction so this only fires on internal bugs.
    pub fn apply(self, args: &[ValRef<'_>]) -> Value {
        match self {
            Func::Concat => {
                let (a, b) = (s(args[0]), s(args[1]));
                let mut out = String::with_capacity(a.len() + b.len());
                out.push_str(a);
                out.push_str(b);
                Value::Str(out)
            }
            Func::Replace => Value::Str(replace_first(s(args[0]), s(args[1]), s(args[2]))),
            Func::At => Value::Str(substr(s(args[0]), i(args[1]), 1).to_owned()),
            Func::Substr => Value::Str(substr(s(args[0]), i(args[1]), i(args[2])).to_owned()),
            Func::IntToStr => {
                let n = i(args[0]);
                Value::Str(if n >= 0 { n.to_string() } else { String::new() })
            }
            Func::Plus => Value::Int(i(args[0]).wrapping_add(i(args[1]))),
            Func::Minus => Value::Int(i(args[0]).wrapping_sub(i(args[1]))),
            Func::Len => Value::Int(char_len(s(args[0])) as i64),
            Func::StrToInt => Value::Int(str_to_int(s(args[0]))),
            Func::IndexOf => Value::Int(index_of(s(args[0]), s(args[1]), i(args[2]))),
            Func::StrEq => Value::Bool(s(args[0]) == s(args[1])),
            Func::IntLe => Value::Bool(i(args[0]) <= i(args[1])),
            Func::PrefixOf => Value::Bool(s(args[1]).starts_with(s(args[0]))),
            Func::SuffixOf => Value::Bool(s(args[1]).ends_with(s(args[0]))),
            Func::Contains => Value::Bool(s(args[0]).contains(s(args[1]))),
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn s<'a>(v: ValRef<'a>) -> &'a str {
    match v {
        ValRef::Str(x) => x,
        other => panic!("expected a string argument, got {other:?}"),
    }
}

fn i(v: ValRef<'_>) -> i64 {
    match v {
        ValRef::Int(x) => x,
        other => panic!("expected an integer argument, got {other:?}"),
    }
}

pub(crate) fn char_len(s: &str) -> usize {
    if s.is_ascii() {
        s.len()
    } else {
        s.chars().count()
    }
}

/// Byte offset of char position `pos` (which may equal the char length).
fn byte_offset(s: &str, pos: usize) -> usize {
    if s.is_ascii() {
        return pos;
    }
    s.char_indices().nth(pos).map_or(s.len(), |(b, _)| b)
}

/// `substr(s, start, len)`: empty when `start` is outside `[0, |s|)` or
/// `len <= 0`; otherwise clipped to the end of `s`.
pub(crate) fn substr(s: &str, start: i64, len: i64) -> &str {
    let n = char_len(s) as i64;
    if start < 0 || start >= n || len <= 0 {
        return "";
    }
    let end = start.saturating_add(len).min(n);
    let (b0, b1) = (byte_offset(s, start as usize), byte_offset(s, end as usize));
    &s[b0..b1]
}

/// First position `>= start` where `t` occurs in `s`, or -1. An empty `t`
/// matches at `start` whenever `0 <= start <= |s|`.
pub(crate) fn index_of(s: &str, t: &str, start: i64) -> i64 {
    let n = char_len(s) as i64;
    if start < 0 || start > n {
        return -1;
    }
    let b0 = byte_offset(s, start as usize);
    match s[b0..].find(t) {
        Some(b) if s.is_ascii() => (b0 + b) as i64,
        Some(b) => start + s[b0..b0 + b].chars().count() as i64,
        None => -1,
    }
}

/// Replaces the first occurrence of `pat`; an empty pattern inserts `with`
/// at position 0.
pub(crate) fn replace_first(s: &str, pat: &str, with: &str) -> String {
    if pat.is_empty() {
        let mut out = String::with_capacity(s.len() + with.len());
        out.push_str(with);
        out.push_str(s);
        return out;
    }
    s.replacen(pat, with, 1)
}

/// Decimal digits only; anything else (including "") is -1. Saturates on
/// overflow.
pub(crate) fn str_to_int(s: &str) -> i64 {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return -1;
    }
    s.bytes().fold(0i64, |acc, b| acc.saturating_mul(10).saturating_add(i64::from(b - b'0')))
}
