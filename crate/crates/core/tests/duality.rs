mod support;

#[test]
fn thousand_random_oracles() {
    let fully = support::duality::check(1000, 42);
    assert!(fully > 0 && fully < 1000);
}
