use isofol_core::linalg::RVec;
use isofol_core::scenarios::{
    builtin, emit_leaves, list_scenarios, parse_scenario, run, Overrides, RunOptions, REPORT_SCHEMA,
};

fn quick(samples: usize, seed: u64) -> RunOptions {
    RunOptions {
        samples,
        seed,
        roundtrip_samples: 4,
        ..RunOptions::default()
    }
}

#[test]
fn catalog_listing() {
    let text = list_scenarios();
    assert!(text.contains("hopf"));
    assert!(text.contains("jacobi-r3"));
    assert!(text.lines().count() >= 5);
}

#[test]
fn report_json_layout() {
    let s = builtin("hopf", &Overrides::default()).unwrap();
    let report = run(&s, &quick(4, 7)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["schema"], REPORT_SCHEMA);
    assert_eq!(v["scenario"], "hopf");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["pass"], true);
    for c in v["checks"].as_array().unwrap() {
        for key in ["name", "anchor", "samples", "max", "mean", "tol", "pass"] {
            assert!(c.get(key).is_some(), "missing {key} in {c}");
        }
        assert!(!c["anchor"].as_str().unwrap().is_empty());
    }
    let sigma = report.check("zero_section").unwrap();
    assert!(sigma.pass && sigma.max.unwrap() <= 1e-8);
}

#[test]
fn reports_depend_on_seed_only() {
    let s = builtin("hopf-translated", &Overrides::default()).unwrap();
    let a = run(&s, &quick(6, 3)).unwrap().to_json();
    let b = run(&s, &quick(6, 3)).unwrap().to_json();
    let c = run(&s, &quick(6, 4)).unwrap().to_json();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn tolerance_override_flips_verdict() {
    let s = builtin("hopf", &Overrides::default()).unwrap();
    let mut opts = quick(3, 1);
    opts.tol_overrides.insert("omega_constancy".into(), 1e-14);
    let report = run(&s, &opts).unwrap();
    assert!(!report.pass);
    let rec = report.check("omega_constancy").unwrap();
    assert_eq!(rec.tol, 1e-14);
    assert!(!rec.pass);
    assert_eq!(report.metadata.tol_overrides.get("omega_constancy"), Some(&1e-14));
}

#[test]
fn twist_fails_constancy() {
    let s = builtin("negative-twist", &Overrides::default()).unwrap();
    let report = run(&s, &quick(6, 1)).unwrap();
    assert!(!report.pass);
    let rec = report.check("omega_constancy").unwrap();
    assert!(!rec.pass && rec.max.unwrap() > 1e-3);
    // every submersion-induced structure has vanishing mixed Nijenhuis tensor
    assert!(report.check("mixed_nijenhuis").unwrap().max.unwrap() <= 1e-6);
}

#[test]
fn conjugate_section_fails_holomorphy() {
    let s = builtin("negative-conj", &Overrides::default()).unwrap();
    let report = run(&s, &quick(6, 1)).unwrap();
    let rec = report.check("section_holomorphy").unwrap();
    assert!(!rec.pass && rec.max.unwrap() > 1e-2);
    assert!(!report.check("cr_sigma").unwrap().pass);
}

#[test]
fn jacobi_leaves_are_distinct_and_skew() {
    let s = builtin("jacobi-r3", &Overrides::default()).unwrap();
    let leaves = emit_leaves(&s, 10, 0.5).unwrap();
    assert_eq!(leaves.len(), 10);
    let dirs: Vec<RVec> = leaves
        .iter()
        .map(|l| (&l.points[2] - &l.points[1]).normalize())
        .collect();
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            assert!(dirs[i].cross(&dirs[j]).norm() > 1e-6, "leaves {i} and {j} are parallel");
        }
    }
}

#[test]
fn inline_file_runs() {
    let text = r#"{
        "schema": "isofol-scenario/1",
        "name": "lines-through-axis",
        "description": "lines of a holomorphic sphere map with a linear section",
        "m": 3, "n": 1,
        "chart": {"lower": [-1, -1], "upper": [1, 1]},
        "u": {"lower": [-0.4, -0.4, -0.3], "upper": [0.4, 0.4, 0.3]},
        "xi": {"type": "sphere", "epsilon": 0.3},
        "section": [{"exponents": [1], "coefficients": [[0.4, 0], [0, -0.4], [0, 0]]}],
        "solver": {"seed_resolution": 4}
    }"#;
    let s = parse_scenario(text).unwrap();
    assert_eq!(s.solver.seed_resolution, 4);
    let report = run(&s, &quick(3, 2)).unwrap();
    assert_eq!(report.scenario, "lines-through-axis");
    assert!(report.pass, "{}", report.summary());
}

#[test]
fn unknown_fields_are_rejected() {
    let err = parse_scenario(r#"{"schema": "isofol-scenario/1", "name": "x", "builtin": "hopf", "colour": 1}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("colour"), "{err}");
    let err = parse_scenario(
        r#"{"schema": "isofol-scenario/1", "name": "x", "builtin": "hopf", "overrides": {"solver": {"tol": "small"}}}"#,
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("line 1"), "{err}");
}
