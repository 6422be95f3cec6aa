use mideu::expr::parse_polynomial;
use mideu::fixtures::ex1;
use mideu::symbolic_eu;

const B5: &str = include_str!("data/b5_eu1.txt");

#[test]
fn scalar_polynomial_matches_reference_output() {
    let m = ex1();
    let names = m.mid.name_table();
    let reference = parse_polynomial(B5, &|n| names.get(n).cloned()).unwrap();
    let trace = symbolic_eu(&m.mid, m.policy("b5").unwrap()).unwrap();
    let eu = trace.stage(1).unwrap();
    assert_eq!(eu.entries.len(), 1);
    assert_eq!(eu.entries[0], reference);
}

#[test]
fn reference_output_differs_under_other_policies() {
    let m = ex1();
    let names = m.mid.name_table();
    let reference = parse_polynomial(B5, &|n| names.get(n).cloned()).unwrap();
    for name in ["p1", "asym"] {
        let trace = symbolic_eu(&m.mid, m.policy(name).unwrap()).unwrap();
        assert_ne!(trace.stage(1).unwrap().entries[0], reference, "{name}");
    }
}
