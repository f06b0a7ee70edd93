mod common;

use common::{chance_bar, memorize, real_vs_confounded_accuracy};

#[test]
fn memorization_lowers_ce_and_separates_confounders() {
    let m = memorize(3);
    let ce: Vec<f64> = m.summaries.iter().map(|s| s.mean_ce).collect();
    assert!(ce.iter().all(|x| x.is_finite()));
    assert!(ce[2] < ce[0], "{ce:?}");
    let (acc, n) = real_vs_confounded_accuracy(&m);
    assert!(acc > chance_bar(n), "accuracy {acc} over {n} items");
}
