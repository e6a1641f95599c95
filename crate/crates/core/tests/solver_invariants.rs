//! System-level solver invariants: determinism, node accounting,
//! enclosure soundness, and elimination safety.

use sepbnb_core::*;

fn all_labels(p: &ObjectiveProgram) -> Vec<String> {
    p.separator_marks()
        .iter()
        .map(|m| m.label.clone())
        .collect()
}

fn config(domain: &IntervalVector) -> SolverConfig {
    let mut cfg = SolverConfig::defaults_for(domain);
    cfg.record_trace = true;
    cfg
}

#[test]
fn identical_configs_yield_identical_reports() {
    let p = make(BenchmarkId::Shubert, 2).unwrap();
    let d = p.default_box().clone();
    let mut cfg = config(&d);
    cfg.min_width = 1e-3;
    cfg.f_tolerance = 1e-4;
    let labels = all_labels(&p);
    let a = solve(&p, &d, &labels, &cfg).unwrap();
    let b = solve(&p, &d, &labels, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn counts_sum_and_match_trace_length() {
    for (id, n, sep) in [
        (BenchmarkId::Exponential, 3, true),
        (BenchmarkId::Exponential, 3, false),
        (BenchmarkId::StyblinskiTang, 2, true),
        (BenchmarkId::Salomon, 2, false),
        (BenchmarkId::RecursiveExponential, 2, true),
    ] {
        let p = make(id, n).unwrap();
        let d = p.default_box().clone();
        let mut cfg = config(&d);
        cfg.separation = sep;
        let labels = if sep { all_labels(&p) } else { vec![] };
        let r = solve(&p, &d, &labels, &cfg).unwrap();
        assert_eq!(
            r.counts.generated,
            r.counts.settled(),
            "{id:?} sep={sep}: every generated box must have a fate"
        );
        assert_eq!(
            r.counts.generated,
            r.trace.as_ref().unwrap().len() as u64,
            "{id:?} sep={sep}: trace covers every generated box"
        );
        // statuses partition the trace
        let trace = r.trace.as_ref().unwrap();
        let count_status = |s: TraceStatus| trace.iter().filter(|t| t.status == s).count() as u64;
        assert_eq!(
            count_status(TraceStatus::ValueEliminated),
            r.counts.value_eliminated
        );
        assert_eq!(
            count_status(TraceStatus::OptimalityEliminated),
            r.counts.optimality_eliminated
        );
        assert_eq!(
            count_status(TraceStatus::BoundaryFixed),
            r.counts.boundary_fixed
        );
        assert_eq!(count_status(TraceStatus::Separated), r.counts.separated);
        assert_eq!(
            count_status(TraceStatus::Active),
            r.counts.bisected + r.counts.active_at_exit
        );
    }
}

/// Value elimination must never remove a box strictly containing a
/// global minimizer: the enclosure of such a box cannot lie above the
/// incumbent.
#[test]
fn no_wrongful_value_elimination_2d() {
    let st_argmin = -2.903534027771178; // refined in the acceptance oracle
    let cases: Vec<(BenchmarkId, Vec<Vec<f64>>)> = vec![
        (BenchmarkId::Exponential, vec![vec![0.0, 0.0]]),
        (BenchmarkId::Salomon, vec![vec![0.0, 0.0]]),
        (
            BenchmarkId::StyblinskiTang,
            vec![vec![st_argmin, st_argmin]],
        ),
        (BenchmarkId::RecursiveExponential, vec![vec![0.0, 0.0]]),
    ];
    for (id, minimizers) in cases {
        let p = make(id, 2).unwrap();
        let d = p.default_box().clone();
        let mut cfg = config(&d);
        cfg.min_width = 1e-4 * d.width();
        let labels = all_labels(&p);
        let r = solve(&p, &d, &labels, &cfg).unwrap();
        for row in r.trace.as_ref().unwrap() {
            if row.status != TraceStatus::ValueEliminated {
                continue;
            }
            for m in &minimizers {
                let strictly_inside = row
                    .bounds
                    .iter()
                    .zip(m)
                    .all(|((lo, hi), &x)| *lo < x && x < *hi);
                assert!(
                    !strictly_inside,
                    "{id:?}: value check removed a box strictly containing {m:?}"
                );
            }
        }
    }
}

#[test]
fn enclosure_brackets_known_minima() {
    // (benchmark, n, known minimum, separation)
    let cases = [
        (BenchmarkId::Exponential, 3, -1.0, false),
        (BenchmarkId::Exponential, 3, -1.0, true),
        (BenchmarkId::RecursiveExponential, 2, 1.0, false),
        (BenchmarkId::Salomon, 2, 0.0, true),
    ];
    for (id, n, minimum, sep) in cases {
        let p = make(id, n).unwrap();
        let d = p.default_box().clone();
        let mut cfg = config(&d);
        cfg.separation = sep;
        cfg.record_trace = false;
        let labels = if sep { all_labels(&p) } else { vec![] };
        let r = solve(&p, &d, &labels, &cfg).unwrap();
        let inc = r.incumbent.as_ref().unwrap();
        assert!(
            inc.value + 1e-12 >= minimum,
            "{id:?}: incumbent below minimum"
        );
        assert!(
            inc.value <= minimum + cfg.f_tolerance,
            "{id:?}: incumbent {} too far above {minimum}",
            inc.value
        );
        // separation substitutes inner argmin points, so its lower
        // bound is exact up to the inner-solve gap
        let slack = if sep { cfg.f_tolerance } else { 1e-12 };
        assert!(
            r.best_value.lo() <= minimum + slack,
            "{id:?}: lower bound {} above minimum {minimum}",
            r.best_value.lo()
        );
        assert!(r.best_value.hi() >= minimum - 1e-12);
        assert!(r.best_value.lo() <= r.best_value.hi());
    }
}

#[test]
fn styblinski_2d_incumbent_matches_reference() {
    let p = make(BenchmarkId::StyblinskiTang, 2).unwrap();
    let d = p.default_box().clone();
    let mut cfg = config(&d);
    cfg.record_trace = false;
    cfg.min_width = 2e-9 * d.width();
    let r = solve(&p, &d, &all_labels(&p), &cfg).unwrap();
    let inc = r.incumbent.unwrap();
    assert!((inc.value - -78.33233140754284).abs() < 1e-5);
    for &x in &inc.point {
        assert!((x - -2.9035).abs() < 1e-3);
    }
}

#[test]
fn budget_exhaustion_returns_partial_report() {
    let p = make(BenchmarkId::Exponential, 4).unwrap();
    let d = p.default_box().clone();
    let mut cfg = config(&d);
    cfg.max_nodes = 5;
    let err = solve(&p, &d, &[], &cfg).unwrap_err();
    match err {
        SolverError::BudgetExhausted { report } => {
            assert_eq!(report.counts.generated, 5);
            assert_eq!(report.counts.generated, report.counts.settled());
            assert_eq!(report.trace.as_ref().unwrap().len(), 5);
        }
        other => panic!("expected BudgetExhausted, got {other}"),
    }
}

#[test]
fn unknown_separator_label_is_an_error() {
    let p = make(BenchmarkId::Exponential, 2).unwrap();
    let d = p.default_box().clone();
    let cfg = SolverConfig::defaults_for(&d);
    let err = solve(&p, &d, &["zz".to_string()], &cfg).unwrap_err();
    assert!(matches!(err, SolverError::UnknownSeparator(l) if l == "zz"));
}

#[test]
fn invalid_configs_are_rejected() {
    let p = make(BenchmarkId::Exponential, 2).unwrap();
    let d = p.default_box().clone();
    let base = SolverConfig::defaults_for(&d);

    let mut cfg = base.clone();
    cfg.min_width = 0.0;
    assert!(matches!(
        solve(&p, &d, &[], &cfg),
        Err(SolverError::InvalidConfig(_))
    ));

    let mut cfg = base.clone();
    cfg.f_tolerance = -1.0;
    assert!(matches!(
        solve(&p, &d, &[], &cfg),
        Err(SolverError::InvalidConfig(_))
    ));

    let mut cfg = base.clone();
    cfg.workers = 0;
    assert!(matches!(
        solve(&p, &d, &[], &cfg),
        Err(SolverError::InvalidConfig(_))
    ));

    let wrong = IntervalVector::uniform(3, -1.0, 1.0).unwrap();
    assert!(matches!(
        solve(&p, &wrong, &[], &base),
        Err(SolverError::DimensionMismatch { .. })
    ));
}

#[test]
fn depth_first_exploration_terminates_and_brackets() {
    let p = make(BenchmarkId::Exponential, 2).unwrap();
    let d = p.default_box().clone();
    let mut cfg = config(&d);
    cfg.exploration = Exploration::DepthFirst;
    cfg.record_trace = false;
    let r = solve(&p, &d, &[], &cfg).unwrap();
    assert!(r.best_value.contains(-1.0));
    assert_eq!(r.incumbent.unwrap().value, -1.0);
}

#[test]
fn multi_worker_run_agrees_with_single_worker() {
    let p = make(BenchmarkId::StyblinskiTang, 3).unwrap();
    let d = p.default_box().clone();
    let mut cfg = config(&d);
    cfg.record_trace = false;
    cfg.min_width = 1e-6 * d.width();
    let labels = all_labels(&p);
    let single = solve(&p, &d, &labels, &cfg).unwrap();
    cfg.workers = 4;
    let multi = solve(&p, &d, &labels, &cfg).unwrap();
    let s = single.incumbent.unwrap().value;
    let m = multi.incumbent.unwrap().value;
    assert!((s - m).abs() <= cfg.f_tolerance);
    assert!((single.best_value.lo() - multi.best_value.lo()).abs() <= 2.0 * cfg.f_tolerance);
}

/// Separation on the 2-D exponential pins both coordinates in one step:
/// the trace shows the separated root and the fully reduced slice.
#[test]
fn exponential_separation_reduces_root_to_origin_slice() {
    let p = make(BenchmarkId::Exponential, 2).unwrap();
    let d = p.default_box().clone();
    let cfg = config(&d);
    let r = solve(&p, &d, &all_labels(&p), &cfg).unwrap();
    assert_eq!(r.counts.separated, 1);
    let trace = r.trace.as_ref().unwrap();
    // the root's own row comes after its inner-solve rows
    let root_row = trace
        .iter()
        .find(|row| row.bounds == vec![(-1.0, 1.0), (-1.0, 1.0)])
        .expect("root box in trace");
    assert_eq!(root_row.status, TraceStatus::Separated);
    // the reduced slice is the degenerate origin box
    let slice = trace
        .iter()
        .find(|row| row.bounds.iter().all(|(lo, hi)| lo == hi))
        .expect("reduced slice in trace");
    for (lo, hi) in &slice.bounds {
        assert_eq!(lo, hi);
        assert!(lo.abs() < 1e-12);
    }
    assert_eq!(r.incumbent.unwrap().value, -1.0);
}

/// The recursive exponential's chained separators resolve the leading
/// dimensions to the inner argmin near zero, leaving only the last
/// dimension for the outer search.
#[test]
fn recursive_exponential_separation_pins_leading_dims() {
    let p = sepbnb_core::functions::recursive_exponential_wide(2);
    let d = p.default_box().clone();
    let cfg = config(&d);
    let r = solve(&p, &d, &["y1".to_string()], &cfg).unwrap();
    assert!(r.counts.separated >= 1);
    let trace = r.trace.as_ref().unwrap();
    let slice = trace
        .iter()
        .find(|row| {
            let (lo0, hi0) = row.bounds[0];
            let (lo1, hi1) = row.bounds[1];
            lo0 == hi0 && hi1 - lo1 > 1.0
        })
        .expect("reduced slice with x0 pinned");
    let x0 = slice.bounds[0].0;
    assert!(x0.abs() < 1e-2, "x0 pinned at {x0}, expected near 0");
    assert!((r.incumbent.unwrap().value - 1.0).abs() <= cfg.f_tolerance);
}

#[test]
fn report_json_round_trips() {
    let p = make(BenchmarkId::Shubert, 2).unwrap();
    let d = p.default_box().clone();
    let mut cfg = config(&d);
    cfg.min_width = 0.05 * d.width();
    cfg.f_tolerance = 0.05;
    let r = solve(&p, &d, &all_labels(&p), &cfg).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: SolveReport = serde_json::from_str(&json).unwrap();
    assert_eq!(r, back);
}
