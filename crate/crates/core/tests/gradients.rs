use ccinfer::adversarial::gradient_suite;
use ccinfer::neural::GradcheckConfig;

#[test]
fn every_coordinate_matches_central_differences() {
    let reports = gradient_suite(0, GradcheckConfig::default()).unwrap();
    assert_eq!(reports.len(), 5);
    for r in &reports {
        assert!(r.checked() > 0, "{}", r.label);
        assert!(
            r.max_rel_error() < 1e-3,
            "{}: {:.3e}",
            r.label,
            r.max_rel_error()
        );
    }
}
