use super::*;

const BEAUTYCHAIN: &str = include_str!("../../tests/fixtures/contracts/beautychain.sol");
const APEMAGA: &str = include_str!("../../tests/fixtures/contracts/apemaga.sol");
const ETHER_VAULT: &str = include_str!("../../tests/fixtures/contracts/ether_vault.sol");

#[test]
fn single_state_variable() {
    let ast = Ast::parse("contract A { uint x; }").unwrap();
    assert_eq!(ast.contracts().count(), 1);
    let vars: Vec<_> = ast.state_vars().map(|v| v.name.as_str()).collect();
    assert_eq!(vars, ["x"]);
}

#[test]
fn malformed_parameter_list_reports_position() {
    let src = "contract A { function f( }";
    let err = Ast::parse(src).unwrap_err();
    assert_eq!(err.line, 1);
    assert_eq!(err.offset, src.find('}').unwrap());
    assert_eq!(err.column, err.offset + 1);
}

#[test]
fn beautychain_batch_transfer() {
    let ast = Ast::parse(BEAUTYCHAIN).unwrap();
    let f = ast.function("batchTransfer").unwrap();
    assert_eq!(f.contract.as_deref(), Some("PausableToken"));
    assert_eq!(f.modifier_names().collect::<Vec<_>>(), ["whenNotPaused"]);
    assert_eq!(f.visibility, Some(Visibility::Public));
    let sites: Vec<_> = ast
        .require_sites("bec")
        .into_iter()
        .filter(|s| s.function_name == "batchTransfer")
        .map(|s| s.predicate_text)
        .collect();
    assert_eq!(sites, ["cnt > 0 && cnt <= 20", "_value > 0 && balances[msg.sender] >= amount"]);
}

#[test]
fn modifier_requires_are_flagged() {
    let ast = Ast::parse(BEAUTYCHAIN).unwrap();
    let sites = ast.require_sites("bec");
    let m: Vec<_> = sites.iter().filter(|s| s.in_modifier).collect();
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].function_name, "whenNotPaused");
    assert_eq!(m[0].predicate_text, "!paused");
}

#[test]
fn require_message_is_separate() {
    let ast = Ast::parse("contract A { function f(bool ok) public { require(ok, \"msg\"); } }").unwrap();
    let sites = ast.require_sites("a");
    assert_eq!(sites.len(), 1);
    assert_eq!(sites[0].predicate_text, "ok");
    assert_eq!(sites[0].message_text.as_deref(), Some("\"msg\""));
}

#[test]
fn apemaga_callers_of_internal_burn() {
    let ast = Ast::parse(APEMAGA).unwrap();
    let callers: Vec<_> = ast.callers_of("_approve_").unwrap().iter().map(|f| f.name.as_str()).collect();
    assert_eq!(callers, ["family"]);
}

#[test]
fn two_callers_in_source_order() {
    let src = "contract A {
        function t() internal {}
        function b() public { t(); }
        function c() public { uint x = 1; if (x > 0) { this.t(); } }
        function d() public { other.t(); }
    }";
    let ast = Ast::parse(src).unwrap();
    let callers: Vec<_> = ast.callers_of("t").unwrap().iter().map(|f| f.name.as_str()).collect();
    assert_eq!(callers, ["b", "c"]);
}

#[test]
fn uncalled_function_and_unknown_target() {
    let ast = Ast::parse("contract A { function f() public {} }").unwrap();
    assert!(ast.callers_of("f").unwrap().is_empty());
    assert!(matches!(ast.callers_of("g"), Err(AstError::UnknownFunction(_))));
}

#[test]
fn old_style_constructor_and_fallback() {
    let ast = Ast::parse(ETHER_VAULT).unwrap();
    let ctor = ast.function("ETH_VAULT").unwrap();
    assert!(ctor.is_constructor());
    assert!(ast.functions().any(|f| f.kind == FunctionKind::Fallback && f.name.is_empty()));
    assert_eq!(ast.events().count(), 0);
}

#[test]
fn modern_syntax_parses() {
    let src = r#"
        // SPDX-License-Identifier: MIT
        pragma solidity ^0.8.4;
        import "./x.sol";
        type Price is uint128;
        error Unauthorized(address who);
        uint256 constant LIMIT = 10;
        function freeFn(uint a) pure returns (uint) { return a * 2; }
        abstract contract B { function v() public virtual returns (uint); }
        contract A is B {
            using SafeMath for uint256;
            struct S { uint a; mapping(address => uint) m; }
            enum E { X, Y }
            mapping(address => mapping(uint => bool)) public seen;
            uint[] public arr;
            address payable immutable owner;
            event Log(uint indexed a, string b) anonymous;
            modifier only() virtual { require(msg.sender == owner, "no"); _; }
            constructor() { owner = payable(msg.sender); }
            receive() external payable {}
            fallback() external {}
            function v() public override returns (uint) {
                unchecked { arr.push(1); }
                (bool ok, bytes memory data) = owner.call{value: 1 ether, gas: 5000}("");
                (uint x, , uint z) = (1, 2, 3);
                if (!ok) revert Unauthorized(msg.sender);
                try this.v() returns (uint r) { x = r; } catch Error(string memory) { } catch { }
                assembly { let y := add(1, 2) }
                uint k = type(uint256).max / (x == 0 ? 1 : x);
                delete seen[msg.sender][k];
                bytes memory s = data[1:];
                return x ** 2 + z + k + s.length;
            }
        }
    "#;
    let ast = Ast::parse(src).unwrap();
    assert_eq!(ast.contracts().count(), 2);
    assert_eq!(ast.function("v").unwrap().contract.as_deref(), Some("A"));
    assert!(ast.function("B.v").unwrap().body.is_none());
    assert_eq!(ast.require_sites("m").len(), 1);
}

#[test]
fn legacy_syntax_parses() {
    let src = r#"
        pragma solidity ^0.4.11;
        contract Old {
            address owner;
            function Old() { owner = msg.sender; }
            function kill() constant returns (bool) {
                if (msg.sender != owner) throw;
                var x = 10;
                var (a, b) = (1, 2);
                suicide(owner);
                return x > a + b;
            }
            function () payable { }
        }
    "#;
    Ast::parse(src).unwrap();
}

#[test]
fn spans_round_trip_to_source_slices() {
    let ast = Ast::parse(APEMAGA).unwrap();
    for f in ast.functions() {
        let text = f.span.slice(ast.source());
        assert!(text.starts_with("function") || text.starts_with("constructor") || text.starts_with("receive"));
        if let Some(b) = &f.body {
            assert!(f.span.contains(b.span));
            assert!(b.span.slice(ast.source()).starts_with('{'));
            assert!(b.span.slice(ast.source()).ends_with('}'));
            for pair in b.stmts.windows(2) {
                assert!(pair[0].span.end <= pair[1].span.start);
            }
        }
    }
    for site in ast.require_sites("x") {
        assert_eq!(site.predicate_span.slice(ast.source()), site.predicate_text);
    }
}

#[test]
fn expression_precedence() {
    let e = parse_expression("a || b && c == d + e * f ** g").unwrap();
    let ExprKind::Binary { op, rhs, .. } = &e.kind else { panic!() };
    assert_eq!(op, "||");
    let ExprKind::Binary { op, .. } = &rhs.kind else { panic!() };
    assert_eq!(op, "&&");
    assert!(parse_expression("x +").is_err());
    assert!(parse_expression("x y").is_err());
}

#[test]
fn splice_laws() {
    let s = "require(ok);";
    let span = Span::new(8, 10);
    assert_eq!(splice(s, span, "ok").unwrap(), s);
    let out = splice(s, span, "ok2").unwrap();
    assert_eq!(out, "require(ok2);");
    assert_eq!(out.len(), s.len() - span.len() + 3);
    assert!(matches!(
        splice(s, Span::new(8, 40), "x"),
        Err(AstError::SpanOutOfBounds { .. })
    ));
}

#[test]
fn splice_rejects_split_characters() {
    let s = "a é b";
    assert!(splice(s, Span::new(3, 4), "x").is_err());
}
