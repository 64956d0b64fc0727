mod common;

use std::time::Duration;

use common::{fixture, read_fixture, MockServer, Reply};
use flames_core::ast::{splice, Ast};
use flames_core::corpus::{
    self, decompose, deduplicate, fetch_verified_source, jaccard, mine_requires, ApiConfig, CorpusError,
    FetchError, Language, RawContractRecord, SolidityFile, TokenSet,
};
use proptest::prelude::*;

const ADDR: &str = "0xc5d105e63711398af9bbff092d4b6769c82f793d";

fn record(payload: &str) -> RawContractRecord {
    RawContractRecord {
        address: ADDR.into(),
        contract_name: "Token".into(),
        language: Language::Solidity,
        source_payload: payload.into(),
        compiler_version: "v0.8.19+commit.7dd6d404".into(),
        license: "MIT".into(),
        optimization: false,
        abi: None,
    }
}

fn file(content: &str) -> SolidityFile {
    SolidityFile::new("f.sol", content)
}

#[test]
fn multi_file_payload_splits_per_entry() {
    let a = "contract A {}";
    let b = "contract B {}";
    let payload = serde_json::json!({"A.sol": {"content": a}, "B.sol": {"content": b}}).to_string();
    let files = decompose(&record(&payload)).unwrap();
    let paths: Vec<_> = files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(paths, ["A.sol", "B.sol"]);
    assert_eq!(files[0].content, a);
    assert!(files.iter().all(|f| f.origin_address == ADDR && f.license == "MIT"));
    assert!(files.iter().all(|f| f.compiler_version == "v0.8.19+commit.7dd6d404"));
}

#[test]
fn double_braced_standard_json_payload() {
    let body = read_fixture("explorer/multi_file.json");
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    let payload = v["result"][0]["SourceCode"].as_str().unwrap();
    assert!(payload.starts_with("{{"));
    let files = decompose(&record(payload)).unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(files[0].path, "contracts/SafeMath.sol");
    let inner: serde_json::Value = serde_json::from_str(&payload[1..payload.len() - 1]).unwrap();
    for f in &files {
        assert_eq!(inner["sources"][&f.path]["content"].as_str().unwrap(), f.content);
    }
}

#[test]
fn flattened_payload_is_one_file_named_after_contract() {
    let files = decompose(&record("pragma solidity ^0.8.0;\ncontract Token {}\n")).unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(files[0].path, "Token.sol");
    assert_eq!(files[0].id, corpus::content_id(&files[0].content));
}

#[test]
fn garbage_payload_is_malformed() {
    for bad in ["{not json, not solidity", "hello world", "", "contract A {"] {
        assert!(
            matches!(decompose(&record(bad)), Err(CorpusError::MalformedPayload { .. })),
            "{bad:?}"
        );
    }
    let mut r = record("contract A {}");
    r.language = Language::Vyper;
    assert!(matches!(decompose(&r), Err(CorpusError::UnsupportedLanguage { .. })));
    r.language = Language::Solidity;
    r.address = "0x12".into();
    assert!(matches!(decompose(&r), Err(CorpusError::InvalidAddress { .. })));
}

#[test]
fn corpus_line_has_exact_fields() {
    let f = file("contract A {}");
    let v = serde_json::to_value(&f).unwrap();
    let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["compiler_version", "content", "id", "license", "origin_address", "path"]);
}

#[test]
fn jaccard_fixtures() {
    let s = |v: &[&str]| v.iter().copied().collect::<TokenSet>();
    assert_eq!(jaccard(&s(&["x", "y"]), &s(&["y", "x"])), 1.0);
    assert_eq!(jaccard(&s(&["x"]), &s(&["y", "z"])), 0.0);
    assert_eq!(jaccard(&s(&["a", "b", "c"]), &s(&["a", "b", "d"])), 0.5);
}

#[test]
fn byte_identical_files_collapse() {
    let files = vec![file("contract A { uint x; }"), file("contract B { bool y; }"), file("contract A { uint x; }")];
    let out = deduplicate(files, 0.9);
    assert_eq!(out.files.len(), 2);
    assert_eq!(out.stats.files_decomposed, 3);
    assert_eq!(out.stats.files_unique, 2);
    assert!((out.stats.duplicate_ratio - 1.0 / 3.0).abs() < 1e-12);
}

fn planted_pair() -> (SolidityFile, SolidityFile) {
    let shared: Vec<String> = (0..19).map(|i| format!("t{i}")).collect();
    let a = format!("{} only_a", shared.join(" "));
    let b = format!("{} only_b", shared.join(" "));
    (file(&a), file(&b))
}

#[test]
fn planted_pair_threshold_behaviour() {
    let (a, b) = planted_pair();
    let (sa, sb) = (TokenSet::from_source(&a.content), TokenSet::from_source(&b.content));
    assert_eq!((sa.len(), sb.len()), (20, 20));
    let j = jaccard(&sa, &sb);
    assert!((j - 19.0 / 21.0).abs() < 1e-12);
    let merged = deduplicate(vec![a.clone(), b.clone()], 0.90);
    assert_eq!(merged.files, vec![a.clone()]);
    let kept = deduplicate(vec![a.clone(), b.clone()], 1.0);
    assert_eq!(kept.files, vec![a, b]);
}

#[test]
fn chain_of_near_duplicates_is_one_cluster() {
    // a~b and b~c pass, a~c does not: transitive closure keeps only a.
    let base: Vec<String> = (0..18).map(|i| format!("w{i}")).collect();
    let a = file(&format!("{} p q", base.join(" ")));
    let b = file(&format!("{} q r", base.join(" ")));
    let c = file(&format!("{} r s", base.join(" ")));
    let sa = TokenSet::from_source(&a.content);
    let sc = TokenSet::from_source(&c.content);
    assert!(jaccard(&sa, &sc) < 0.85);
    let out = deduplicate(vec![a.clone(), b, c], 0.85);
    assert_eq!(out.files, vec![a]);
}

fn brute_force_keep(files: &[SolidityFile], t: f64) -> Vec<usize> {
    let sets: Vec<_> = files.iter().map(|f| TokenSet::from_source(&f.content)).collect();
    let n = files.len();
    let mut comp: Vec<usize> = (0..n).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..n {
                if jaccard(&sets[i], &sets[j]) >= t && comp[j] > comp[i] {
                    comp[j] = comp[i];
                    changed = true;
                }
            }
        }
    }
    (0..n).filter(|&i| comp[i] == i).collect()
}

fn arb_files() -> impl Strategy<Value = Vec<SolidityFile>> {
    let vocab = prop::sample::subsequence((0..12).map(|i| format!("k{i}")).collect::<Vec<_>>(), 0..12);
    prop::collection::vec(vocab, 0..14).prop_map(|docs| docs.into_iter().map(|d| file(&d.join(" "))).collect())
}

proptest! {
    #[test]
    fn dedup_matches_transitive_closure(files in arb_files(), t in prop::sample::select(vec![0.3, 0.5, 0.75, 0.9, 1.0])) {
        let want: Vec<SolidityFile> = brute_force_keep(&files, t).into_iter().map(|i| files[i].clone()).collect();
        let got = deduplicate(files, t).files;
        prop_assert_eq!(&got, &want);
        let again = deduplicate(got.clone(), t).files;
        prop_assert_eq!(again, got);
    }

    #[test]
    fn jaccard_symmetric_and_one_iff_equal(a in prop::collection::btree_set("[a-e]", 0..5), b in prop::collection::btree_set("[a-e]", 0..5)) {
        let sa: TokenSet = a.iter().cloned().collect();
        let sb: TokenSet = b.iter().cloned().collect();
        prop_assert_eq!(jaccard(&sa, &sb), jaccard(&sb, &sa));
        prop_assert_eq!(jaccard(&sa, &sb) == 1.0, a == b);
        prop_assert!((0.0..=1.0).contains(&jaccard(&sa, &sb)));
    }
}

#[test]
fn mines_beautychain_requires() {
    let f = file(&read_fixture("contracts/beautychain.sol"));
    let sites = mine_requires(&f).unwrap();
    let in_fn: Vec<_> = sites
        .iter()
        .filter(|s| s.function_name == "batchTransfer")
        .map(|s| s.predicate_text.as_str())
        .collect();
    assert_eq!(in_fn, ["cnt > 0 && cnt <= 20", "_value > 0 && balances[msg.sender] >= amount"]);
    assert!(sites.windows(2).all(|w| w[0].call_span.start < w[1].call_span.start));
    assert!(sites.iter().all(|s| s.file_id == f.id));
}

#[test]
fn no_requires_and_parse_failure() {
    assert!(mine_requires(&file("contract A { function f() public {} }")).unwrap().is_empty());
    assert!(matches!(mine_requires(&file("contract A { function f( }")), Err(CorpusError::Parse { .. })));
}

#[test]
fn mined_sites_round_trip_over_fixture_corpus() {
    let dir = fixture("contracts");
    let mut checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "sol") {
            continue;
        }
        let f = file(&std::fs::read_to_string(&path).unwrap());
        for s in mine_requires(&f).unwrap() {
            assert_eq!(splice(&f.content, s.predicate_span, &s.predicate_text).unwrap(), f.content);
            let masked = splice(&f.content, s.predicate_span, "true").unwrap();
            Ast::parse(masked).unwrap();
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn build_reports_stats() {
    let src = read_fixture("contracts/vault.sol");
    let records = vec![record(&src), record(&src), record("{not json")];
    let built = corpus::build(&records, 0.9);
    assert_eq!(built.stats.records_in, 3);
    assert_eq!(built.stats.files_decomposed, 2);
    assert_eq!(built.stats.files_unique, 1);
    assert_eq!(built.stats.requires_mined, built.sites.len());
    assert_eq!(built.rejected.len(), 1);
    let doc = serde_json::to_value(&built.stats).unwrap();
    assert_eq!(doc["duplicate_ratio"], 0.5);
}

fn api(url: &str) -> ApiConfig {
    let mut cfg = ApiConfig::new(format!("{url}/api"), "KEY");
    cfg.min_interval = Duration::ZERO;
    cfg
}

#[test]
fn fetch_parses_recorded_response() {
    let server = MockServer::start(vec![Reply::ok(read_fixture("explorer/flattened.json"))]);
    let rec = fetch_verified_source(ADDR, &api(&server.url)).unwrap();
    assert_eq!(rec.contract_name, "PausableToken");
    assert_eq!(rec.compiler_version, "v0.4.26+commit.4563c3fc");
    assert_eq!(rec.source_payload, read_fixture("contracts/beautychain.sol"));
    assert!(!rec.optimization);
    let req = &server.requests()[0];
    assert_eq!(req.method, "GET");
    for q in ["module=contract", "action=getsourcecode", &format!("address={ADDR}"), "apikey=KEY"] {
        assert!(req.target.contains(q), "{}", req.target);
    }
    assert_eq!(decompose(&rec).unwrap().len(), 1);
}

#[test]
fn fetch_multi_file_record() {
    let server = MockServer::start(vec![Reply::ok(read_fixture("explorer/multi_file.json"))]);
    let rec = fetch_verified_source(ADDR, &api(&server.url)).unwrap();
    assert!(rec.optimization);
    assert_eq!(rec.license, "MIT");
    assert_eq!(decompose(&rec).unwrap().len(), 2);
}

#[test]
fn fetch_not_verified() {
    let server = MockServer::start(vec![Reply::ok(read_fixture("explorer/not_verified.json"))]);
    assert!(matches!(fetch_verified_source(ADDR, &api(&server.url)), Err(FetchError::NotVerified { .. })));
}

#[test]
fn fetch_rate_limit_payload() {
    let server = MockServer::start(vec![Reply::ok(read_fixture("explorer/rate_limited.json"))]);
    assert!(matches!(fetch_verified_source(ADDR, &api(&server.url)), Err(FetchError::RateLimited { .. })));
}

#[test]
fn fetch_429_reports_retry_after() {
    let mut reply = Reply::status(429, "slow down");
    reply.headers.push(("Retry-After", "7".into()));
    let server = MockServer::start(vec![reply]);
    let mut cfg = api(&server.url);
    cfg.max_retries = 0;
    match fetch_verified_source(ADDR, &cfg) {
        Err(FetchError::RateLimited { retry_after }) => assert_eq!(retry_after, Some(Duration::from_secs(7))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fetch_429_is_retried_after_waiting() {
    let mut reply = Reply::status(429, "");
    reply.headers.push(("Retry-After", "0".into()));
    let server = MockServer::start(vec![reply, Reply::ok(read_fixture("explorer/flattened.json"))]);
    let rec = fetch_verified_source(ADDR, &api(&server.url)).unwrap();
    assert_eq!(rec.contract_name, "PausableToken");
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn fetch_cache_replays_offline() {
    let cache = tempfile::tempdir().unwrap();
    let server = MockServer::start(vec![Reply::ok(read_fixture("explorer/flattened.json"))]);
    let mut cfg = api(&server.url);
    cfg.cache_dir = Some(cache.path().to_path_buf());
    let online = fetch_verified_source(ADDR, &cfg).unwrap();
    cfg.offline = true;
    cfg.endpoint = "http://127.0.0.1:9/api".into();
    let replayed = fetch_verified_source(ADDR, &cfg).unwrap();
    assert_eq!(online, replayed);
    assert_eq!(server.requests().len(), 1);
    let other = "0x0000000000000000000000000000000000000001";
    assert!(matches!(fetch_verified_source(other, &cfg), Err(FetchError::TransportError(_))));
}

#[test]
fn fetch_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    assert!(matches!(fetch_verified_source(ADDR, &api(&url)), Err(FetchError::TransportError(_))));
}
