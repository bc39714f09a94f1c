use schflow::verify::{run_all, VerifyConfig, DEFAULT_SEED};

#[test]
fn default_seed_passes_every_suite() {
    let cfg = VerifyConfig { jobs: 4, ..VerifyConfig::default() };
    assert_eq!(cfg.seed, DEFAULT_SEED);
    for r in run_all(&cfg).unwrap() {
        assert!(r.passed, "{}: {:?}", r.suite, r.families.iter().filter(|f| f.failed > 0).collect::<Vec<_>>());
    }
}
