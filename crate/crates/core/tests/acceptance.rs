//! One line per acceptance criterion. Runs without the libtest harness so the
//! lines always reach stdout; exits non-zero when the set of failing criteria
//! differs from the documented deviations.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::{additive, candidate_steps, eu_by_labels, fig2_right, random_mid, random_spec, rng, Shape};
use mideu::asymmetry::{apply_asymmetries, symbolic_eu_asymmetric, Asymmetry, Relation};
use mideu::eu::OpKind;
use mideu::expr::parse_polynomial;
use mideu::fixtures::{ex1, ex2};
use mideu::oracle::{joint_eu_numeric, NumericSpec};
use mideu::policy::{enumerate_policies, policy_count};
use mideu::rational::{format_decimal, parse_rational};
use mideu::sensitivity::{apply_spec, preferred_action_table};
use mideu::structure::{check_structure, multiplication_count, predicted_structure};
use mideu::transforms::{
    apply_step, apply_sufficiency, remove_barren, reverse_arc, sufficiency_removable, TransformLog, TransformStep,
};
use mideu::{symbolic_eu, Indeterminate, Mid, Model, Polynomial, Policy, Rational};
use num_bigint::BigUint;
use rand::Rng;

type Check = Result<String, String>;

/// Criteria expected to fail, with the reason.
const KNOWN_DEVIATIONS: &[(&str, &str)] = &[
    (
        "complete-elicitation",
        "the stated second value 0.375544 disagrees with exact arithmetic (0.375504); the rounded values agree",
    ),
    (
        "transform-preservation",
        "the stated root histogram after reversal equals the original one, which contradicts the structure theorem for the reversed diagram",
    ),
    ("asymmetry", "the stated stage-3 entry lists 9 monomials; the asymmetric evaluation keeps 11"),
];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn poly(m: &Model, text: &str) -> Polynomial {
    let names = m.mid.name_table();
    parse_polynomial(text, &|s| names.get(s).cloned()).expect("test polynomial parses")
}

fn dec(s: &str) -> Rational {
    parse_rational(s).expect("decimal literal")
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn fixture_combinatorics() -> Check {
    let start = Instant::now();
    let m = ex1();
    let mid = &m.mid;
    let names = |ps: Vec<usize>| ps.iter().map(|&p| mid.label(p)).collect::<Vec<_>>();
    ensure(names(mid.comp_j()) == [3, 5, 6], || format!("J = {:?}", names(mid.comp_j())))?;
    ensure(names(mid.comp_b(5)) == [3, 4], || format!("B5 = {:?}", names(mid.comp_b(5))))?;
    ensure(names(mid.comp_b(4)) == [3], || format!("B4 = {:?}", names(mid.comp_b(4))))?;
    let ds = mid.format_ds(&mid.decision_sequence().map_err(err)?);
    ensure(ds == "(Y1,Y2,Y3,U1,Y4,Y5,U2,Y6,U3)", || format!("DS = {ds}"))?;
    ensure(mid.is_extensive_form(), || "EX1 not extensive".into())?;
    ensure(!ex2().mid.is_extensive_form(), || "EX2 reported extensive".into())?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("J={{3,5,6}} B5={{3,4}} B4={{3}} DS={ds}"))
}

fn stage5_symbolic() -> Check {
    let m = ex1();
    let trace = symbolic_eu(&m.mid, m.policy("p1").map_err(err)?).map_err(err)?;
    let u5 = trace.stage(5).ok_or("no stage 5")?;
    ensure(u5.entries.len() == 4, || format!("{} entries", u5.entries.len()))?;
    for y3 in 0..2 {
        for y4 in 0..2 {
            let t = |s: &str| s.replace("{y3}", &y3.to_string()).replace("{y4}", &y4.to_string());
            let first = t("k2*(psi21*p51{y4}{y3} + psi20*p50{y4}{y3})");
            let second = t("k3*(psi31{y4}*p611{y4} + psi30{y4}*p601{y4})*p51{y4}{y3} \
                 + k3*(psi31{y4}*p610{y4} + psi30{y4}*p600{y4})*p50{y4}{y3}");
            let third = t("h*k2*k3*((psi31{y4}*p610{y4} + psi30{y4}*p600{y4})*psi20*p50{y4}{y3} \
                 + (psi31{y4}*p611{y4} + psi30{y4}*p601{y4})*psi21*p51{y4}{y3})");
            let want = &(&poly(&m, &first) + &poly(&m, &second)) + &poly(&m, &third);
            let got = u5.entry_at(&m.mid, &[y3, y4]);
            ensure(got == &want, || format!("entry (y3={y3}, y4={y4}) differs: {got}"))?;
            let s = got.structure_summary();
            ensure(s.to_string() == "{3:2, 4:4, 7:4}" && got.is_square_free(), || format!("structure {s}"))?;
        }
    }
    Ok("4 entries equal the three-term sum; {3:2, 4:4, 7:4}, square-free".into())
}

fn ex2_root_structure() -> Check {
    let start = Instant::now();
    let m = ex2();
    let trace = symbolic_eu(&m.mid, &Policy::constant(&m.mid, 1)).map_err(err)?;
    let root = trace.expected_utility().ok_or("no root")?;
    let s = root.structure_summary().to_string();
    ensure(s == "{4:4, 5:8, 6:16, 8:8, 9:32, 12:16*}", || format!("root {s}"))?;
    ensure(root.len() == 84, || format!("{} monomials", root.len()))?;
    let zero: BTreeMap<Indeterminate, Polynomial> =
        [(Indeterminate::Interaction, Polynomial::zero())].into_iter().collect();
    let h0 = root.substitute(&zero).map_err(err)?;
    let s0 = h0.structure_summary().to_string();
    ensure(h0.len() == 28 && h0.is_square_free() && s0 == "{4:4, 5:8, 6:16}", || format!("h=0 gives {s0}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{s} (84); h=0 {s0} (28)"))
}

fn conforms(mid: &Mid, additive: bool) -> Result<(), String> {
    let trace = symbolic_eu(mid, &Policy::constant(mid, 0)).map_err(err)?;
    for i in 1..=mid.n() + 1 {
        let pred = predicted_structure(mid, i, additive).map_err(err)?;
        let c = check_structure(trace.stage(i).ok_or("missing stage")?, &pred);
        ensure(c.passed(), || c.to_string())?;
    }
    Ok(())
}

fn structure_conformance() -> Check {
    let start = Instant::now();
    let mut r = rng(0x7e0);
    let mut stages = 0;
    for case in 0..200 {
        let mid = random_mid(&mut r, Shape::binary(7, 3));
        conforms(&mid, false).map_err(|e| format!("case {case}: {e}"))?;
        conforms(&additive(&mid), true).map_err(|e| format!("case {case} additive: {e}"))?;
        stages += 2 * (mid.n() + 1);
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("200 diagrams, {stages} stages, 0 mismatches"))
}

fn oracle_equivalence() -> Check {
    let mut r = rng(0x0_ac1e);
    let mut checked = 0usize;
    let mut case = 0;
    while case < 100 {
        let mid = random_mid(&mut r, Shape::binary(6, 3));
        if policy_count(&mid) > BigUint::from(1024u32) {
            continue;
        }
        let specs: Vec<NumericSpec> = (0..3).map(|_| random_spec(&mut r, &mid)).collect();
        for policy in enumerate_policies(&mid, 1024).map_err(err)? {
            let eu = symbolic_eu(&mid, &policy).map_err(err)?.expected_utility().cloned().ok_or("no root")?;
            for spec in &specs {
                let a = eu.eval_map(&spec.values).map_err(err)?;
                let b = joint_eu_numeric(&mid, spec, &policy).map_err(err)?;
                ensure(a == b, || format!("case {case}: {a} != {b}"))?;
                checked += 1;
            }
        }
        case += 1;
    }
    Ok(format!("{checked} (diagram, policy, spec) triples, 0 mismatches"))
}

fn complete_elicitation() -> Check {
    let m = ex1();
    let trace = symbolic_eu(&m.mid, m.policy("p1").map_err(err)?).map_err(err)?;
    let v = apply_spec(&m.mid, trace.stage(5).ok_or("no stage 5")?, m.spec("complete").map_err(err)?).map_err(err)?;
    let got: Vec<Rational> = v.entries.iter().map(|p| p.as_constant().ok_or("not numeric")).collect::<Result<_, _>>()?;
    let rounded: Vec<String> = got.iter().map(|x| format_decimal(x, 4)).collect();
    ensure(rounded == ["0.3074", "0.3755", "0.4465", "0.4460"], || format!("rounded {rounded:?}"))?;
    for (g, p) in got.iter().zip(["0.3074", "0.3755", "0.4465", "0.4460"]) {
        let diff = mideu::rational::to_f64(&(g - dec(p))).abs();
        ensure(diff <= 5e-5, || format!("{g} vs {p}"))?;
    }
    let rows = preferred_action_table(&m.mid, m.spec("complete").map_err(err)?, m.policy("p1").map_err(err)?, 4)
        .map_err(err)?;
    let best: BTreeMap<usize, usize> = rows.iter().map(|r| (r.observed[0].1, r.best)).collect();
    ensure(best == BTreeMap::from([(0, 1), (1, 0)]), || format!("preferred {best:?}"))?;
    let exact: Vec<String> = got.iter().map(mideu::rational::format_rational).collect();
    let stated: Vec<Rational> = ["0.307424", "0.375544", "0.446464", "0.446016"].iter().map(|s| dec(s)).collect();
    ensure(got == stated, || {
        format!("exact {exact:?}; stated second value 0.375544; rounded values and preferred actions agree")
    })?;
    Ok(format!("{exact:?}"))
}

fn partial_elicitation() -> Check {
    let m = ex1();
    let trace = symbolic_eu(&m.mid, m.policy("p1").map_err(err)?).map_err(err)?;
    let v = apply_spec(&m.mid, trace.stage(5).ok_or("no stage 5")?, m.spec("partial").map_err(err)?).map_err(err)?;
    let want = poly(&m, "0.2*(1 - p5111) + 0.4*psi301*p5111^2 + 0.472*psi301*p6001*(1 - p5111)");
    let got = v.entry_at(&m.mid, &[1, 1]);
    ensure(got == &want, || format!("got {got}"))?;
    Ok(format!("{got}"))
}

fn transform_preservation() -> Check {
    let m = ex2();
    let (rev, _) = reverse_arc(&m.mid, 2, 3).map_err(err)?;
    let reduced = remove_barren(&rev, 2).map_err(err)?;
    ensure(reduced.same_graph(&fig2_right()), || "reduced diagram differs".into())?;
    let policy = |mid: &Mid| Policy::from_fn(mid, |_, _, v| v.last().copied().unwrap_or(1));
    let root = |mid: &Mid| -> Result<String, String> {
        let t = symbolic_eu(mid, &policy(mid)).map_err(err)?;
        Ok(t.stage(1).ok_or("no root")?.summaries()[0].to_string())
    };
    let tr = symbolic_eu(&rev, &policy(&rev)).map_err(err)?;
    let u3r: BTreeSet<String> = tr.stage(3).ok_or("no stage 3")?.summaries().iter().map(|s| s.to_string()).collect();
    ensure(u3r == BTreeSet::from(["{4:4, 5:8, 8:8}".to_string()]), || format!("reversed stage 3 {u3r:?}"))?;
    let u1b = root(&reduced)?;
    ensure(u1b == "{3:2, 4:4, 5:8, 7:4, 8:16, 11:8*}", || format!("reduced root {u1b}"))?;

    let mut r = rng(0x7a5f);
    let shape = Shape { extensive: false, ..Shape::binary(6, 3) };
    let mut applied = 0;
    for case in 0..50 {
        let mid = random_mid(&mut r, if case % 2 == 0 { shape } else { Shape::binary(6, 3) });
        let spec = random_spec(&mut r, &mid);
        for step in candidate_steps(&mid) {
            let Ok((out, bindings)) = apply_step(&mid, step) else { continue };
            let resolved = TransformLog { steps: vec![TransformStep { kind: step, bindings }] }.resolve(&spec).map_err(err)?;
            for seed in 0..4 {
                let (a, b) = (eu_by_labels(&out, &mid, &spec, seed), eu_by_labels(&out, &out, &resolved, seed));
                ensure(a == b, || format!("case {case} {step}: {a} != {b}"))?;
            }
            applied += 1;
        }
    }
    let u1 = root(&m.mid)?;
    let u1r = root(&rev)?;
    ensure(u1r == u1, || {
        format!(
            "reversed root {u1r} vs stated {u1}; stage-3 and reduced histograms match, {applied} random steps preserve EU"
        )
    })?;
    Ok(format!("{applied} random steps preserve EU"))
}

fn sufficiency() -> Check {
    let m = ex1();
    let removable: Vec<usize> = sufficiency_removable(&m.mid, 4).map_err(err)?.into_iter().collect();
    ensure(removable == [2], || format!("removable {removable:?}"))?;
    let (out, _) = apply_sufficiency(&m.mid, 2, 4).map_err(err)?;
    let (rev, _) = reverse_arc(&ex2().mid, 2, 3).map_err(err)?;
    let reduced = remove_barren(&rev, 2).map_err(err)?;
    ensure(out.same_graph(&reduced), || "sufficiency output differs from reverse+remove".into())?;
    Ok("removable {Y2}; output equals reverse+remove".into())
}

fn asymmetry() -> Check {
    let m = ex1();
    let policy = m.policy("asym").map_err(err)?;
    let t = symbolic_eu_asymmetric(&m.mid, policy, &m.asymmetries).map_err(err)?;
    let u6 = t.stage(6).ok_or("no stage 6")?;
    ensure(u6.entry_at(&m.mid, &[1, 1]).to_string() == "k3*psi311*p6111", || "stage 6 (1,1)".into())?;
    ensure(u6.entry_at(&m.mid, &[1, 0]).is_zero(), || "stage 6 (1,0) not empty".into())?;
    let u5 = t.stage(5).ok_or("no stage 5")?;
    for y3 in 0..2 {
        let n = u5.entry_at(&m.mid, &[y3, 1]).len();
        ensure(n == 3, || format!("stage 5 (y3={y3}, y4=1) has {n} monomials"))?;
    }
    let mut r = rng(0xa5);
    for case in 0..100 {
        let mid = random_mid(&mut r, Shape::binary(6, 3));
        let n = mid.n();
        let i = r.gen_range(1..=n);
        let j = loop {
            let j = r.gen_range(1..=n);
            if j != i {
                break j;
            }
        };
        let rel = if r.gen_bool(0.5) { Relation::MustEqual } else { Relation::MustNotEqual };
        let asy = vec![Asymmetry::new(vec![(i, r.gen_range(0..2))], j, rel, r.gen_range(0..2))];
        for p in enumerate_policies(&mid, u64::MAX).map_err(err)?.take(4) {
            let during = symbolic_eu_asymmetric(&mid, &p, &asy).map_err(err)?;
            let after = apply_asymmetries(&mid, &symbolic_eu(&mid, &p).map_err(err)?, &asy);
            ensure(during.vectors == after.vectors, || format!("case {case}: pruning differs"))?;
        }
    }
    let n3 = t.stage(3).ok_or("no stage 3")?.entry_at(&m.mid, &[1, 1]).len();
    ensure(n3 == 9, || {
        format!("designated stage-3 entry has {n3} monomials, stated 9; stage 6, stage 5 and 100 random pairs agree")
    })?;
    Ok("stage 6, stage 5, stage 3 and 100 random pairs agree".into())
}

fn cost_formulas() -> Check {
    let m = ex1();
    let mut seen = Vec::new();
    for name in ["p1", "b5", "asym"] {
        let trace = symbolic_eu(&m.mid, m.policy(name).map_err(err)?).map_err(err)?;
        for step in &trace.steps {
            let want = multiplication_count(&m.mid, step.stage, step.op, false).map_err(err)?;
            ensure(step.multiplications == want, || {
                format!("stage {} {}: logged {} vs closed form {want}", step.stage, step.op, step.multiplications)
            })?;
            if step.op == OpKind::Maximize {
                ensure(want == 0, || format!("maximization at {} costs {want}", step.stage))?;
            }
            if name == "p1" {
                seen.push((step.stage, step.op, want));
            }
        }
    }
    let find = |stage: usize, f: fn(&OpKind) -> bool| seen.iter().find(|s| s.0 == stage && f(&s.1)).map(|s| s.2);
    let hand = [
        (find(5, |o| matches!(o, OpKind::MultiSum(_))), 17),
        (find(5, |o| *o == OpKind::Marginalize), 72),
        (find(3, |o| *o == OpKind::Marginalize), 200),
    ];
    for (got, want) in hand {
        ensure(got == Some(want), || format!("hand count {want}, got {got:?}"))?;
    }
    Ok(format!("{} logged operations match; hand counts 17/72/200", seen.len()))
}

fn evaluation_smoke() -> Check {
    let start = Instant::now();
    for m in [ex1(), ex2()] {
        for p in enumerate_policies(&m.mid, 64).map_err(err)? {
            symbolic_eu(&m.mid, &p).map_err(err)?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("every policy of EX1 and EX2 evaluated in {elapsed:.2?}"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("fixture-combinatorics", fixture_combinatorics),
        ("stage5-symbolic", stage5_symbolic),
        ("ex2-root-structure", ex2_root_structure),
        ("structure-conformance", structure_conformance),
        ("oracle-equivalence", oracle_equivalence),
        ("complete-elicitation", complete_elicitation),
        ("partial-elicitation", partial_elicitation),
        ("transform-preservation", transform_preservation),
        ("sufficiency", sufficiency),
        ("asymmetry", asymmetry),
        ("cost-formulas", cost_formulas),
        ("evaluation-smoke", evaluation_smoke),
    ];
    let known: BTreeMap<&str, &str> = KNOWN_DEVIATIONS.iter().copied().collect();
    let mut failed = BTreeSet::new();
    for (id, check) in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:<24} {secs:>7.2}s  {detail}"),
            Err(detail) => {
                let note = known.get(id).map(|r| format!(" [known deviation: {r}]")).unwrap_or_default();
                println!("FAIL {id:<24} {secs:>7.2}s  {detail}{note}");
                failed.insert(*id);
            }
        }
    }
    let expected: BTreeSet<&str> = known.keys().copied().collect();
    let passed = criteria.len() - failed.len();
    println!("{passed}/{} criteria pass; {} known deviations", criteria.len(), expected.len());
    if failed != expected {
        let unexpected: Vec<_> = failed.difference(&expected).collect();
        let fixed: Vec<_> = expected.difference(&failed).collect();
        println!("unexpected failures: {unexpected:?}; deviations that now pass: {fixed:?}");
        std::process::exit(1);
    }
}
