use mideu_bench::cases;

#[test]
fn every_case_evaluates() {
    let cs = cases();
    assert_eq!(cs.iter().map(|c| c.name).collect::<Vec<_>>(), ["ex1", "ex2"]);
    for c in &cs {
        let trace = mideu::symbolic_eu(&c.model.mid, &c.policy).unwrap();
        assert!(trace.expected_utility().is_some(), "{}", c.name);
    }
}
