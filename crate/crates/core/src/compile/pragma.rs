use std::fmt;

use semver::Version;

use crate::lexer::{self, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Comparator {
    op: Op,
    version: Version,
}

impl Comparator {
    fn matches(&self, v: &Version) -> bool {
        match self.op {
            Op::Lt => v < &self.version,
            Op::Le => v <= &self.version,
            Op::Gt => v > &self.version,
            Op::Ge => v >= &self.version,
        }
    }
}

/// A `pragma solidity` constraint: a disjunction of comparator conjunctions.
/// Several directives in one source are intersected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionConstraint {
    text: String,
    /// Every inner list must have one satisfied alternative.
    all_of: Vec<Vec<Vec<Comparator>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid version constraint `{text}`: {reason}")]
pub struct PragmaError {
    pub text: String,
    pub reason: String,
}

impl VersionConstraint {
    pub fn parse(text: &str) -> Result<Self, PragmaError> {
        Ok(Self {
            text: text.trim().to_string(),
            all_of: vec![parse_range(text)?],
        })
    }

    pub fn matches(&self, v: &Version) -> bool {
        self.all_of
            .iter()
            .all(|alts| alts.iter().any(|conj| conj.iter().all(|c| c.matches(v))))
    }

    pub fn intersect(mut self, other: VersionConstraint) -> Self {
        self.text = format!("{} and {}", self.text, other.text);
        self.all_of.extend(other.all_of);
        self
    }

    /// Highest version in `candidates` satisfying the constraint.
    pub fn best_match<'a>(&self, candidates: impl IntoIterator<Item = &'a Version>) -> Option<&'a Version> {
        candidates.into_iter().filter(|v| self.matches(v)).max()
    }
}

impl fmt::Display for VersionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Collects every `pragma solidity` directive of `source` into one
/// constraint. `Ok(None)` when the source has none.
pub fn source_constraint(source: &str) -> Result<Option<VersionConstraint>, PragmaError> {
    let mut out: Option<VersionConstraint> = None;
    for t in lexer::tokenize_lossy(source) {
        if t.kind != TokenKind::Pragma {
            continue;
        }
        let text = t.text(source).trim_end_matches(';');
        let mut words = text.trim_start_matches("pragma").trim_start().splitn(2, char::is_whitespace);
        if words.next() != Some("solidity") {
            continue;
        }
        let c = VersionConstraint::parse(words.next().unwrap_or_default())?;
        out = Some(match out {
            Some(prev) => prev.intersect(c),
            None => c,
        });
    }
    Ok(out)
}

/// Parses a compiler metadata string such as `v0.4.26+commit.4563c3fc`.
pub fn parse_metadata_version(text: &str) -> Option<Version> {
    let t = text.trim().trim_start_matches('v');
    let core = t.split(['+', '-']).next()?;
    Version::parse(core).ok()
}

fn parse_range(text: &str) -> Result<Vec<Vec<Comparator>>, PragmaError> {
    let err = |reason: &str| PragmaError {
        text: text.trim().to_string(),
        reason: reason.to_string(),
    };
    let mut alts = Vec::new();
    for alt in text.split("||") {
        let words = join_operators(alt);
        if words.is_empty() {
            return Err(err("empty range"));
        }
        let mut conj = Vec::new();
        let mut i = 0;
        while i < words.len() {
            if words.get(i + 1).map(String::as_str) == Some("-") {
                let lo = partial(&words[i]).ok_or_else(|| err("bad version"))?;
                let hi = partial(words.get(i + 2).ok_or_else(|| err("open hyphen range"))?)
                    .ok_or_else(|| err("bad version"))?;
                conj.push(Comparator { op: Op::Ge, version: lo.floor() });
                conj.extend(hi.upper_inclusive());
                i += 3;
                continue;
            }
            conj.extend(comparators(&words[i]).ok_or_else(|| err(&format!("cannot read `{}`", words[i])))?);
            i += 1;
        }
        alts.push(conj);
    }
    Ok(alts)
}

/// Splits on whitespace, gluing a lone operator to the version after it.
fn join_operators(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut pending = String::new();
    for w in text.split_whitespace() {
        if w != "-" && w.chars().all(|c| "<>=^~".contains(c)) {
            pending.push_str(w);
            continue;
        }
        out.push(format!("{pending}{w}"));
        pending.clear();
    }
    out
}

/// A version with possibly missing or wildcard minor/patch parts.
#[derive(Debug, Clone, Copy)]
struct Partial {
    major: u64,
    minor: Option<u64>,
    patch: Option<u64>,
}

impl Partial {
    fn floor(&self) -> Version {
        Version::new(self.major, self.minor.unwrap_or(0), self.patch.unwrap_or(0))
    }

    /// First version above everything the partial names.
    fn ceiling(&self) -> Option<Version> {
        match (self.minor, self.patch) {
            (None, _) => Some(Version::new(self.major + 1, 0, 0)),
            (Some(m), None) => Some(Version::new(self.major, m + 1, 0)),
            (Some(_), Some(_)) => None,
        }
    }

    fn upper_inclusive(&self) -> Vec<Comparator> {
        match self.ceiling() {
            Some(c) => vec![Comparator { op: Op::Lt, version: c }],
            None => vec![Comparator { op: Op::Le, version: self.floor() }],
        }
    }
}

fn partial(text: &str) -> Option<Partial> {
    let text = text.trim_start_matches('v');
    let mut parts = text.split('.');
    let num = |s: Option<&str>| -> Option<Option<u64>> {
        match s {
            None | Some("x") | Some("X") | Some("*") => Some(None),
            Some(s) => s.parse().ok().map(Some),
        }
    };
    let major = parts.next()?.parse().ok()?;
    let minor = num(parts.next())?;
    let patch = if minor.is_some() { num(parts.next())? } else { None };
    if parts.next().is_some() {
        return None;
    }
    Some(Partial { major, minor, patch })
}

fn comparators(word: &str) -> Option<Vec<Comparator>> {
    if word == "*" {
        return Some(Vec::new());
    }
    let split = word.find(|c: char| c.is_ascii_digit() || c == 'v' || c == '*')?;
    let (op, rest) = word.split_at(split);
    let p = partial(rest)?;
    let lo = p.floor();
    let ge = |version| Comparator { op: Op::Ge, version };
    let lt = |version| Comparator { op: Op::Lt, version };
    Some(match op {
        "^" => {
            let hi = match (p.major, p.minor, p.patch) {
                (0, Some(0), Some(z)) => Version::new(0, 0, z + 1),
                (0, Some(m), _) => Version::new(0, m + 1, 0),
                (0, None, _) => Version::new(1, 0, 0),
                (x, _, _) => Version::new(x + 1, 0, 0),
            };
            vec![ge(lo), lt(hi)]
        }
        "~" => {
            let hi = match p.minor {
                Some(m) => Version::new(p.major, m + 1, 0),
                None => Version::new(p.major + 1, 0, 0),
            };
            vec![ge(lo), lt(hi)]
        }
        "" | "=" => {
            let mut v = vec![ge(lo)];
            v.extend(p.upper_inclusive());
            v
        }
        ">=" => vec![ge(lo)],
        "<" => vec![lt(lo)],
        "<=" => p.upper_inclusive(),
        ">" => match p.ceiling() {
            Some(c) => vec![ge(c)],
            None => vec![Comparator { op: Op::Gt, version: lo }],
        },
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Version {
        Version::parse(s).unwrap()
    }

    fn ok(c: &str, yes: &[&str], no: &[&str]) {
        let c = VersionConstraint::parse(c).unwrap();
        for y in yes {
            assert!(c.matches(&v(y)), "{c} should accept {y}");
        }
        for n in no {
            assert!(!c.matches(&v(n)), "{c} should reject {n}");
        }
    }

    #[test]
    fn operators() {
        ok("^0.4.19", &["0.4.19", "0.4.26"], &["0.4.18", "0.5.0"]);
        ok("^0.8", &["0.8.0", "0.8.19"], &["0.9.0"]);
        ok("~0.5.2", &["0.5.2", "0.5.17"], &["0.6.0"]);
        ok("0.4.24", &["0.4.24"], &["0.4.25", "0.4.23"]);
        ok("=0.6.12", &["0.6.12"], &["0.6.11"]);
        ok(">=0.4.21 <0.9.0", &["0.4.21", "0.8.19"], &["0.9.0", "0.4.20"]);
        ok(">= 0.5.0 < 0.7.0", &["0.6.12"], &["0.7.0"]);
        ok(">0.4.99 <=0.6", &["0.5.0", "0.6.12"], &["0.4.99", "0.7.0"]);
        ok("^0.5.0 || ^0.8.0", &["0.5.17", "0.8.19"], &["0.6.12", "0.7.6"]);
        ok("0.7.x", &["0.7.6"], &["0.8.0"]);
        ok("0.5.0 - 0.6", &["0.5.0", "0.6.12"], &["0.7.0"]);
        assert!(VersionConstraint::parse("^banana").is_err());
        assert!(VersionConstraint::parse("").is_err());
    }

    #[test]
    fn directives_intersect() {
        let src = "pragma solidity >=0.4.0;\npragma experimental ABIEncoderV2;\ncontract A {}\npragma solidity <0.6.0;";
        let c = source_constraint(src).unwrap().unwrap();
        assert!(c.matches(&v("0.5.17")));
        assert!(!c.matches(&v("0.6.12")));
        assert!(source_constraint("contract A {}").unwrap().is_none());
    }

    #[test]
    fn metadata_strings() {
        assert_eq!(parse_metadata_version("v0.4.26+commit.4563c3fc"), Some(v("0.4.26")));
        assert_eq!(parse_metadata_version("0.8.10"), Some(v("0.8.10")));
        assert_eq!(parse_metadata_version("v0.5.17-nightly.2020.3.10"), Some(v("0.5.17")));
        assert_eq!(parse_metadata_version("vyper:0.3.7"), None);
    }
}
