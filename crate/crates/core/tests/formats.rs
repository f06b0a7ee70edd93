mod common;

use common::formats::cases;

#[test]
fn rendered_examples_match_committed_fixtures() {
    for (name, source, target, want_source, want_target) in cases() {
        assert_eq!(source, want_source, "{name} source");
        assert_eq!(target, want_target, "{name} target");
    }
}

#[test]
fn paracomet_suffix_and_glucose_hint_shapes() {
    let all = cases();
    assert!(all[0].1.ends_with(" <|sent5|> <|xEffect|>"));
    assert!(all[1].1.starts_with("7: "));
    assert!(all[1]
        .1
        .contains(" hint: (<|specific|><|subj|> the red team scores the final goal)"));
}
