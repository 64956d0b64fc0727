mod common;

use std::path::Path;
use std::time::Duration;

use common::{fixture, read_fixture, MockServer, Reply};
use flames_core::ast::splice;
use flames_core::compile::{
    resolve_compiler, CompileError, CompileSettings, Compiler, CompilerCache, ReleaseSource,
};
use flames_core::corpus::{mine_requires, SolidityFile};
use flames_core::fim::PLACEHOLDER;
use semver::Version;
use sha2::{Digest, Sha256};

fn v(s: &str) -> Version {
    Version::parse(s).unwrap()
}

fn compiler() -> Compiler {
    let c = Compiler::new(CompilerCache::from_env());
    assert!(
        !c.cache.installed().is_empty(),
        "no compilers under {}; run scripts/install-solcjs.sh",
        c.cache.root.display()
    );
    c
}

fn roundtrip_files() -> Vec<SolidityFile> {
    let mut paths: Vec<_> = std::fs::read_dir(fixture("roundtrip"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| SolidityFile::new(p.file_name().unwrap().to_string_lossy(), std::fs::read_to_string(p).unwrap()))
        .collect()
}

#[test]
fn empty_contract_compiles_on_every_installed_version() {
    let c = compiler();
    for version in c.cache.installed() {
        let src = format!("pragma solidity {version};\ncontract A {{}}\n");
        let r = c.compile_auto("A.sol", &src, None, CompileSettings::default()).unwrap();
        assert!(r.success, "{version}: {:?}", r.diagnostics);
        assert!(r.artifacts_present);
        assert_eq!(r.compiler_version, version.to_string());
    }
}

#[test]
fn pragma_picks_highest_installed_release() {
    let c = compiler();
    let installed = c.cache.installed();
    let v04 = installed.iter().filter(|x| x.minor == 4).max().cloned().unwrap();
    assert_eq!(c.resolve("pragma solidity ^0.4.19;", None).unwrap(), v04);
    assert_eq!(c.resolve(&read_fixture("contracts/beautychain.sol"), None).unwrap(), *installed.iter().max().unwrap());
    assert!(matches!(
        resolve_compiler("pragma solidity 0.4.24;", None, &[]),
        Err(CompileError::NoMatchingCompiler { .. })
    ));
}

#[test]
fn nested_function_completion_fails_with_parser_error() {
    let c = compiler();
    let src = "pragma solidity ^0.8.0;\ncontract V {\n    mapping(address => uint256) balances;\n    function withdraw(uint256 amount) public {\n        require(amount > 0);\n    function _safeSub(uint256 a, uint256 b) internal pure returns (uint256) { return a - b; }\n        balances[msg.sender] -= amount;\n    }\n}\n";
    let r = c.compile_auto("V.sol", src, None, CompileSettings::default()).unwrap();
    assert!(!r.success);
    let err = r.errors().next().unwrap();
    assert!(err.message.contains("Expected") || err.message.contains("Parser"), "{err:?}");
    assert!(err.location.is_some());
}

#[test]
fn type_errors_are_failures() {
    let c = compiler();
    let r = c
        .compile_auto("T.sol", "pragma solidity ^0.8.0;\ncontract T { function f() public { x = 1; } }\n", None, CompileSettings::default())
        .unwrap();
    assert!(!r.success);
    assert!(r.first_error().unwrap().contains("Undeclared identifier"));
}

#[test]
fn compile_is_deterministic_and_honours_optimizer_flag() {
    let c = compiler();
    let src = read_fixture("contracts/vault.sol");
    let a = c.compile_auto("vault.sol", &src, None, CompileSettings::default()).unwrap();
    let b = c.compile_auto("vault.sol", &src, None, CompileSettings::default()).unwrap();
    let o = c.compile_auto("vault.sol", &src, None, CompileSettings { optimization: true }).unwrap();
    assert_eq!(a, b);
    assert!(a.success && o.success);
}

#[test]
fn fixture_contracts_compile() {
    let c = compiler();
    for name in ["beautychain.sol", "apemaga.sol", "simple_token.sol", "vault.sol", "ether_vault.sol"] {
        let r = c
            .compile_auto(name, &read_fixture(&format!("contracts/{name}")), None, CompileSettings::default())
            .unwrap();
        assert!(r.success, "{name}: {:?}", r.diagnostics);
    }
}

#[test]
fn masked_and_respliced_predicates_compile() {
    let c = compiler();
    let files = roundtrip_files();
    assert!(files.len() >= 25);
    let versions: std::collections::BTreeSet<u64> = files
        .iter()
        .map(|f| c.resolve(&f.content, None).unwrap().minor)
        .collect();
    assert_eq!(versions.into_iter().collect::<Vec<_>>(), [4, 5, 6, 7, 8]);
    for f in &files {
        let site = mine_requires(f).unwrap().into_iter().find(|s| !s.in_modifier).unwrap();
        let masked = splice(&f.content, site.predicate_span, PLACEHOLDER).unwrap();
        let restored = masked.replacen(PLACEHOLDER, &site.predicate_text, 1);
        assert_eq!(restored, f.content);
        let r = c.compile_auto(&f.path, &restored, None, CompileSettings::default()).unwrap();
        assert!(r.success, "{}: {:?}", f.path, r.first_error());
    }
}

fn write_script(dir: &Path, version: &str, body: &str) {
    let d = dir.join(version);
    std::fs::create_dir_all(&d).unwrap();
    let p = d.join("solc");
    std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
}

#[test]
fn slow_compiler_times_out() {
    let dir = tempfile::tempdir().unwrap();
    write_script(dir.path(), "0.8.1", "sleep 5");
    let mut c = Compiler::new(CompilerCache::new(dir.path()));
    c.timeout = Duration::from_millis(200);
    let started = std::time::Instant::now();
    let err = c.compile("A.sol", "contract A {}", &v("0.8.1"), CompileSettings::default()).unwrap_err();
    assert!(matches!(err, CompileError::Timeout(_)), "{err}");
    assert!(started.elapsed() < Duration::from_secs(4));
}

#[test]
fn crashing_compiler_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_script(dir.path(), "0.8.1", "cat >/dev/null; echo 'segfault' >&2; exit 139");
    let c = Compiler::new(CompilerCache::new(dir.path()));
    match c.compile("A.sol", "contract A {}", &v("0.8.1"), CompileSettings::default()) {
        Err(CompileError::CompilerCrash { status: Some(139), stderr }) => assert!(stderr.contains("segfault")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn compiler_sees_standard_json_on_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("input.json");
    write_script(
        dir.path(),
        "0.7.6",
        &format!("cat > {}; echo 'banner'; echo '{{\"contracts\":{{\"A.sol\":{{\"A\":{{}}}}}}}}'", log.display()),
    );
    let c = Compiler::new(CompilerCache::new(dir.path()));
    let r = c.compile("A.sol", "contract A {}", &v("0.7.6"), CompileSettings { optimization: true }).unwrap();
    assert!(r.success);
    let input: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert_eq!(input["language"], "Solidity");
    assert_eq!(input["sources"]["A.sol"]["content"], "contract A {}");
    assert_eq!(input["settings"]["optimizer"]["enabled"], true);
}

#[test]
fn installed_lists_only_versions_with_binaries() {
    let dir = tempfile::tempdir().unwrap();
    write_script(dir.path(), "0.5.17", "true");
    write_script(dir.path(), "0.4.26", "true");
    std::fs::create_dir_all(dir.path().join("0.6.0")).unwrap();
    std::fs::create_dir_all(dir.path().join("junk")).unwrap();
    assert_eq!(CompilerCache::new(dir.path()).installed(), [v("0.4.26"), v("0.5.17")]);
    assert!(matches!(
        CompilerCache::new(dir.path()).ensure(&v("0.6.0")),
        Err(CompileError::NotInstalled(_))
    ));
}

const FAKE_SOLC: &str = "#!/bin/sh\ncat >/dev/null\necho '{\"contracts\":{\"A.sol\":{\"A\":{}}}}'\n";

fn release_server(binary: &'static str, checksum: String) -> MockServer {
    MockServer::start_with(move |seen, _| {
        if seen.target.ends_with("/list.json") {
            Reply::ok(format!(
                r#"{{"builds":[{{"path":"solc-linux-amd64-v0.8.2+commit.661d1103","version":"0.8.2","sha256":"0x{checksum}"}},
                    {{"path":"nightly","version":"0.8.2","prerelease":"nightly.2021","sha256":"0x00"}}],
                   "releases":{{"0.8.2":"solc-linux-amd64-v0.8.2+commit.661d1103"}}}}"#
            ))
        } else if seen.target.ends_with("/solc-linux-amd64-v0.8.2+commit.661d1103") {
            Reply::ok(binary)
        } else {
            Reply::status(404, "")
        }
    })
}

#[test]
fn missing_compiler_is_fetched_and_verified() {
    let checksum = hex::encode(Sha256::digest(FAKE_SOLC.as_bytes()));
    let server = release_server(FAKE_SOLC, checksum);
    let dir = tempfile::tempdir().unwrap();
    let cache = CompilerCache::new(dir.path()).online(ReleaseSource::new(format!("{}/linux-amd64/", server.url)));
    let threads: Vec<_> = (0..4)
        .map(|_| {
            let cache = cache.clone();
            std::thread::spawn(move || cache.ensure(&v("0.8.2")).unwrap())
        })
        .collect();
    for t in threads {
        assert_eq!(t.join().unwrap(), dir.path().join("0.8.2/solc"));
    }
    let downloads = server.seen.lock().unwrap().iter().filter(|s| s.target.contains("commit")).count();
    assert_eq!(downloads, 1);
    assert_eq!(cache.installed(), [v("0.8.2")]);
    let r = Compiler::new(cache).compile("A.sol", "contract A {}", &v("0.8.2"), CompileSettings::default()).unwrap();
    assert!(r.success);
}

#[test]
fn checksum_mismatch_is_rejected() {
    let server = release_server(FAKE_SOLC, "ab".repeat(32));
    let dir = tempfile::tempdir().unwrap();
    let cache = CompilerCache::new(dir.path()).online(ReleaseSource::new(format!("{}/linux-amd64", server.url)));
    let err = cache.ensure(&v("0.8.2")).unwrap_err();
    assert!(err.to_string().contains("checksum mismatch"), "{err}");
    assert!(cache.installed().is_empty());
    assert!(matches!(cache.ensure(&v("0.8.3")), Err(CompileError::Fetch(_))));
}
