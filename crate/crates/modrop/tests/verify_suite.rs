use std::collections::HashSet;

use modrop::verify::{
    convergence_series, registry, run_suite, select, RelationReport, RunConfig, RunReport, Suite, Summary, REPORT_SCHEMA,
};
use modrop::{Error, RelationClass};

fn fast() -> Vec<RelationReport> {
    run_suite(&RunConfig::default()).expect("fast suite runs")
}

#[test]
fn fast_suite_passes_and_verdicts_follow_residuals() {
    let reports = fast();
    let expected: Vec<&str> = registry().iter().filter(|r| r.suite == Suite::Fast).map(|r| r.id).collect();
    let got: Vec<&str> = reports.iter().map(|r| r.relation_id.as_str()).collect();
    assert_eq!(got, expected, "reports come back in registry order");
    for r in &reports {
        let residual = r.residual.unwrap_or_else(|| panic!("{} has no residual: {:?}", r.relation_id, r.outcome));
        assert_eq!(r.pass, residual <= r.tolerance, "{}", r.relation_id);
        assert!(r.pass, "{} residual {residual:e} above {:e}", r.relation_id, r.tolerance);
        assert!(r.wall_time_ms >= 0.0);
    }
    assert!(Summary::of(&reports).all_passed());
}

#[test]
fn registry_ids_are_unique_and_anchored() {
    let mut seen = HashSet::new();
    for r in registry() {
        assert!(seen.insert(r.id), "duplicate id {}", r.id);
        assert!(!r.anchor.trim().is_empty(), "{} has no anchor", r.id);
    }
}

#[test]
fn exact_relations_report_zero() {
    let ids: Vec<String> =
        registry().iter().filter(|r| r.class == RelationClass::Exact && r.suite == Suite::Fast).map(|r| r.id.into()).collect();
    let cfg = RunConfig { relations: Some(ids.clone()), ..RunConfig::default() };
    let reports = run_suite(&cfg).unwrap();
    assert_eq!(reports.len(), ids.len());
    for r in reports {
        assert_eq!(r.residual, Some(0.0), "{}", r.relation_id);
        assert_eq!(r.tolerance, 0.0);
    }
}

#[test]
fn unknown_or_empty_selection_lists_valid_ids() {
    for ids in [vec!["nosuch".to_string()], Vec::new()] {
        match select(&ids) {
            Err(Error::UnknownRelation { valid, .. }) => assert!(valid.contains("YB1")),
            other => panic!("expected an unknown-relation error, got {other:?}"),
        }
    }
    let cfg = RunConfig { relations: Some(vec!["nosuch".into()]), ..RunConfig::default() };
    assert!(cfg.validate().is_err());
}

#[test]
fn tolerance_overrides_flip_verdicts() {
    let mut cfg = RunConfig { relations: Some(vec!["refl".into()]), ..RunConfig::default() };
    cfg.tolerances.insert(RelationClass::Scalar, 0.0);
    let r = &run_suite(&cfg).unwrap()[0];
    assert_eq!(r.tolerance, 0.0);
    assert!(!r.pass, "a roundoff-level residual cannot meet a zero tolerance");
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        RunConfig { b: -1.0, ..RunConfig::default() },
        RunConfig { grid: modrop::verify::GridConfig { l: 4.0, n: 100 }, ..RunConfig::default() },
    ];
    for cfg in bad {
        assert!(run_suite(&cfg).is_err(), "{cfg:?}");
    }
    let text = r#"{"b": 0.8, "frobnicate": 1}"#;
    assert!(serde_json::from_str::<RunConfig>(text).is_err());
}

#[test]
fn report_round_trips_through_json() {
    let cfg = RunConfig { relations: Some(vec!["Dev".into(), "f1".into()]), ..RunConfig::default() };
    let report = RunReport::new(&cfg, run_suite(&cfg).unwrap());
    assert_eq!(report.schema, REPORT_SCHEMA);
    assert_eq!(report.config, cfg);
    let text = serde_json::to_string(&report).unwrap();
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["schema"], 1);
    assert_eq!(value["reports"][0]["relation_id"], "Dev");
    assert_eq!(value["reports"][0]["outcome"]["status"], "passed");
}

#[test]
fn convergence_rejects_bad_requests() {
    let cfg = RunConfig::default();
    assert!(matches!(convergence_series(&cfg, "refl", &[1.0]), Err(Error::Unsupported(_))));
    assert!(matches!(convergence_series(&cfg, "YB1", &[]), Err(Error::Domain(_))));
    assert!(convergence_series(&cfg, "YB1", &[31.5]).is_err());
}

#[test]
fn yang_baxter_residual_shrinks_with_the_grid() {
    let t = convergence_series(&RunConfig::default(), "YB1", &[24.0, 32.0, 48.0]).unwrap();
    assert_eq!(t.parameter, "N");
    assert_eq!(t.rows.len(), 3);
    assert!(t.non_increasing, "{:?}", t.rows);
    assert!(t.rows[1].residual <= 1e-2);
}
