mod common;

use polydeploy::backends::{deploy, MockRuntime, RuntimeKind};
use polydeploy::engine::{EngineConfig, Outcome};
use polydeploy::frontends::parse_native;
use polydeploy::planner::compile;

use common::runtime_model::{directed_error_codes, drive, driver_types, DOCUMENTED_ERROR_CODES};
use common::{generate, read_fixture, GenOptions};

#[test]
fn random_call_sequences_match_the_model() {
    let types = driver_types();
    let mut calls = 0;
    let mut started_rejections = 0;
    for seed in 0..24 {
        let kind = if seed % 2 == 0 {
            RuntimeKind::Hierarchical
        } else {
            RuntimeKind::Flat
        };
        let stats = drive(seed, kind, &types, 500).unwrap_or_else(|e| panic!("{e}"));
        calls += stats.calls;
        started_rejections += stats.started_mutations_rejected;
    }
    assert!(calls >= 10_000);
    assert!(started_rejections > 0);
}

#[test]
fn random_call_sequences_on_generated_types() {
    for seed in 0..10 {
        let config = generate(seed, GenOptions { hierarchy: false });
        drive(seed, RuntimeKind::Hierarchical, &config, 300).unwrap_or_else(|e| panic!("{e}"));
    }
}

#[test]
fn every_documented_error_is_reachable() {
    let codes = directed_error_codes();
    for code in DOCUMENTED_ERROR_CODES {
        assert!(codes.contains(code), "{code} never triggered");
    }
}

#[test]
fn client_server_snapshot() {
    let config = parse_native(&read_fixture("client_server.native")).unwrap();
    let graph = compile(&config, &RuntimeKind::Flat.capabilities()).unwrap();
    let rt = MockRuntime::flat(&config);
    assert_eq!(
        deploy(&graph, &rt, &EngineConfig::new(1)).outcome,
        Outcome::Completed
    );
    assert_eq!(
        rt.snapshot().to_text(),
        "attribute cli.nom = \"the-client\"\n\
         attribute srv.nom = \"the-server\"\n\
         factory Client@local\n\
         factory Server@local\n\
         instance cli type=Client site=local\n\
         instance srv type=Server site=local\n\
         link cli.s -> srv.s\n\
         started cli\n\
         started srv\n"
    );
}

#[test]
fn fresh_snapshot_is_empty_and_reads_are_pure() {
    let rt = MockRuntime::hierarchical(&driver_types());
    assert_eq!(rt.snapshot().to_text(), "");
    rt.install("Server", "local").unwrap();
    assert_eq!(rt.snapshot(), rt.snapshot());
}

#[test]
fn flat_and_hierarchical_agree_without_containment() {
    for seed in 0..40 {
        let config = generate(seed, GenOptions { hierarchy: false });
        let graph = compile(&config, &RuntimeKind::Flat.capabilities()).unwrap();
        let flat = MockRuntime::flat(&config);
        let hier = MockRuntime::hierarchical(&config);
        deploy(&graph, &flat, &EngineConfig::new(2));
        deploy(&graph, &hier, &EngineConfig::new(3));
        assert_eq!(flat.snapshot(), hier.snapshot().without_containment());
    }
}

#[test]
fn concurrent_callers_see_a_consistent_runtime() {
    let rt = MockRuntime::hierarchical(&driver_types());
    let f = rt.install("Server", "local").unwrap();
    std::thread::scope(|s| {
        for t in 0..8 {
            let rt = &rt;
            s.spawn(move || {
                for i in 0..50 {
                    let inst = rt.instantiate(f, &format!("t{t}-{i}")).unwrap();
                    let a = rt.get_binding(inst, "s").unwrap();
                    assert_eq!(rt.get_binding(inst, "s").unwrap(), a);
                    rt.start(inst).unwrap();
                }
            });
        }
    });
    assert_eq!(rt.snapshot().instances.len(), 400);
    assert!(rt.snapshot().instances.values().all(|i| i.started));
}
