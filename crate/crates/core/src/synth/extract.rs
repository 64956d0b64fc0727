use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{parse_expression, Expr, ExprKind};
use crate::lexer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("malformed completion: {0}")]
    MalformedCompletion(String),
    #[error("empty completion")]
    EmptyCompletion,
}

/// Pulls the predicate out of a raw infill completion for `require(<FILL_ME>);`.
///
/// The predicate ends at the first `)`, `;` or `,` outside any bracket, or at
/// the end of the text. What follows may only close the call: an optional
/// message argument, `)`, `;` and whitespace. Declarations, blocks and further
/// statements make the whole completion malformed.
pub fn extract_predicate(completion: &str) -> Result<String, ExtractError> {
    let malformed = |why: &str| ExtractError::MalformedCompletion(why.to_string());
    let mut text = completion.trim_start();
    if let Some(rest) = text.strip_prefix("require") {
        if let Some(rest) = rest.trim_start().strip_prefix('(') {
            text = rest;
        }
    }
    let tokens = lexer::tokenize(text).map_err(|e| malformed(&e.message))?;
    let mut depth = 0usize;
    let mut end = None;
    for (i, t) in tokens.iter().enumerate() {
        match t.text(text) {
            "function" | "contract" | "modifier" | "event" => return Err(malformed("declaration inside completion")),
            "{" | "}" if depth == 0 => return Err(malformed("block inside completion")),
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" if depth > 0 => depth -= 1,
            ")" | ";" | "," if depth == 0 => {
                end = Some(i);
                break;
            }
            "]" => return Err(malformed("unbalanced `]`")),
            _ => {}
        }
    }
    if depth > 0 {
        return Err(malformed("unbalanced brackets"));
    }
    let (pred_end, tail) = match end {
        Some(i) => (tokens[i].span.start, &tokens[i..]),
        None => (text.len(), &tokens[tokens.len()..]),
    };
    check_tail(text, tail)?;
    let predicate = text[..pred_end].trim();
    if predicate.is_empty() {
        return Err(ExtractError::EmptyCompletion);
    }
    parse_expression(predicate).map_err(|e| malformed(&e.message))?;
    Ok(predicate.to_string())
}

fn check_tail(text: &str, tail: &[lexer::Token]) -> Result<(), ExtractError> {
    let malformed = |why: &str| Err(ExtractError::MalformedCompletion(why.to_string()));
    let mut i = 0;
    if tail.first().is_some_and(|t| t.text(text) == ",") {
        i = 1;
        let mut depth = 0usize;
        while let Some(t) = tail.get(i) {
            match t.text(text) {
                "function" | "{" | "}" | ";" => return malformed("statement inside the message argument"),
                "(" | "[" => depth += 1,
                ")" | "]" if depth > 0 => depth -= 1,
                ")" => break,
                _ => {}
            }
            i += 1;
        }
        if i == 1 {
            return malformed("empty message argument");
        }
    }
    let rest: Vec<&str> = tail[i..].iter().map(|t| t.text(text)).collect();
    match rest.as_slice() {
        [] | [")"] | [";"] | [")", ";"] => Ok(()),
        _ => malformed("trailing code after the predicate"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Triviality {
    No,
    AlwaysTrue,
    AlwaysFalse,
}

/// Flags predicates that fold to a boolean constant.
pub fn is_trivial(predicate: &str) -> Triviality {
    match parse_expression(predicate).ok().as_ref().and_then(fold) {
        Some(Const::Bool(true)) => Triviality::AlwaysTrue,
        Some(Const::Bool(false)) => Triviality::AlwaysFalse,
        _ => Triviality::No,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Const {
    Bool(bool),
    Int(i128),
}

fn fold(e: &Expr) -> Option<Const> {
    match &e.kind {
        ExprKind::Bool(b) => Some(Const::Bool(*b)),
        ExprKind::Number { text, unit: None } => {
            let t = text.replace('_', "");
            let v = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                Some(h) => i128::from_str_radix(h, 16).ok()?,
                None => t.parse().ok()?,
            };
            Some(Const::Int(v))
        }
        ExprKind::Paren(inner) => fold(inner),
        ExprKind::Unary { op, operand, prefix: true } => match (op.as_str(), fold(operand)?) {
            ("!", Const::Bool(b)) => Some(Const::Bool(!b)),
            ("-", Const::Int(v)) => Some(Const::Int(v.checked_neg()?)),
            _ => None,
        },
        ExprKind::Binary { op, lhs, rhs } => {
            let (l, r) = (fold(lhs), fold(rhs));
            match op.as_str() {
                "&&" => match (l, r) {
                    (Some(Const::Bool(false)), _) | (_, Some(Const::Bool(false))) => Some(Const::Bool(false)),
                    (Some(Const::Bool(true)), Some(Const::Bool(true))) => Some(Const::Bool(true)),
                    _ => None,
                },
                "||" => match (l, r) {
                    (Some(Const::Bool(true)), _) | (_, Some(Const::Bool(true))) => Some(Const::Bool(true)),
                    (Some(Const::Bool(false)), Some(Const::Bool(false))) => Some(Const::Bool(false)),
                    _ => None,
                },
                _ => binary(op, l?, r?),
            }
        }
        _ => None,
    }
}

fn binary(op: &str, l: Const, r: Const) -> Option<Const> {
    use Const::*;
    Some(match (l, r) {
        (Int(a), Int(b)) => match op {
            "==" => Bool(a == b),
            "!=" => Bool(a != b),
            "<" => Bool(a < b),
            "<=" => Bool(a <= b),
            ">" => Bool(a > b),
            ">=" => Bool(a >= b),
            "+" => Int(a.checked_add(b)?),
            "-" => Int(a.checked_sub(b)?),
            "*" => Int(a.checked_mul(b)?),
            "/" => Int(a.checked_div(b)?),
            "%" => Int(a.checked_rem(b)?),
            _ => return None,
        },
        (Bool(a), Bool(b)) => match op {
            "==" => Bool(a == b),
            "!=" => Bool(a != b),
            _ => return None,
        },
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closes_at_matching_paren() {
        assert_eq!(extract_predicate("amount <= balances[msg.sender]);").unwrap(), "amount <= balances[msg.sender]");
        assert_eq!(extract_predicate("f(a, b) > 0)").unwrap(), "f(a, b) > 0");
        assert_eq!(extract_predicate("  x > 0  ").unwrap(), "x > 0");
        assert_eq!(extract_predicate("x > 0, \"too small\");").unwrap(), "x > 0");
        assert_eq!(extract_predicate("require(x > 0);").unwrap(), "x > 0");
        assert_eq!(extract_predicate("s == \"a)\");").unwrap(), "s == \"a)\"");
    }

    #[test]
    fn rejects_trailing_statements() {
        for bad in [
            "x > 0);\n    function _safeSub(uint256 a, uint256 b) internal pure returns (uint256) { return a - b; }",
            "x > 0); y = 1;",
            "x > 0);;",
            "x > 0) {",
            "function f(){",
            "x > (0",
        ] {
            assert!(matches!(extract_predicate(bad), Err(ExtractError::MalformedCompletion(_))), "{bad:?}");
        }
        assert_eq!(extract_predicate(");"), Err(ExtractError::EmptyCompletion));
        assert_eq!(extract_predicate(""), Err(ExtractError::EmptyCompletion));
    }

    #[test]
    fn trivial_folding() {
        assert_eq!(is_trivial("true"), Triviality::AlwaysTrue);
        assert_eq!(is_trivial("false"), Triviality::AlwaysFalse);
        assert_eq!(is_trivial("1==1"), Triviality::AlwaysTrue);
        assert_eq!(is_trivial("!false"), Triviality::AlwaysTrue);
        assert_eq!(is_trivial("2 > 3 || false"), Triviality::AlwaysFalse);
        assert_eq!(is_trivial("x > 0 || true"), Triviality::AlwaysTrue);
        assert_eq!(is_trivial("x>0"), Triviality::No);
        assert_eq!(is_trivial("1 ether > 0"), Triviality::No);
    }
}
