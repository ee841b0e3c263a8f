use std::path::PathBuf;
use std::time::Instant;

use cosmoplan_core::automata::{
    equivalent, equivalent_role, included, sync_product, word, Alphabet, Dfa, Inclusion, Role,
};
use cosmoplan_core::mission::{
    decompose, insert_coordination, learn_assumption, verify_rule, verify_rule_with_stats,
    CoordinationRequest, LearnOutcome, RuleVerdict,
};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn warehouse() -> (Dfa, Vec<Alphabet>) {
    let g = Dfa::load(&data("warehouse/global.json")).unwrap();
    let raw: Vec<Vec<String>> =
        serde_json::from_str(&std::fs::read_to_string(data("warehouse/alphabets.json")).unwrap()).unwrap();
    (g, raw.iter().map(|a| Alphabet::new(a).unwrap()).collect())
}

fn ab(events: &[&str]) -> Alphabet {
    Alphabet::new(events).unwrap()
}

#[test]
fn warehouse_decomposes_into_the_expected_chains() {
    let (g, al) = warehouse();
    let t = Instant::now();
    let locals = decompose(&g, &al).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.0);
    for (i, k) in locals.iter().enumerate() {
        let want = Dfa::load(&data(&format!("warehouse/expected/k{}.json", i + 1))).unwrap();
        assert!(included(k, &want).holds() && included(&want, k).holds(), "K{}", i + 1);
        assert!(equivalent_role(k, &want, Role::Marked));
    }
}

#[test]
fn assumption_for_robot_one_is_robot_two_chain() {
    let (g, al) = warehouse();
    let locals = decompose(&g, &al).unwrap();
    let t = Instant::now();
    let (out, stats) = learn_assumption(&locals[0], &g, &locals[1], None).unwrap();
    assert!(t.elapsed().as_secs_f64() < 5.0);
    assert!(stats.membership_queries <= 30, "{} queries", stats.membership_queries);
    let LearnOutcome::Assumption(a) = out else { panic!("unexpected violation") };
    let want = Dfa::chain(&word(&["R2pO2", "R2dO2aW2", "r2"]), &al[1]).unwrap();
    assert!(equivalent(&a, &want));
    let (v, _) = verify_rule_with_stats(&locals, &g).unwrap();
    assert!(v.holds());
}

#[test]
fn coordinated_missions_match_and_still_compose() {
    let (g, al) = warehouse();
    let locals = decompose(&g, &al).unwrap();
    let req = CoordinationRequest { requester: 1, responder: 2, object: 2 };
    let out = insert_coordination(&locals, &req, "R2pO2").unwrap();
    for (i, k) in out.iter().enumerate() {
        let want = Dfa::load(&data(&format!("warehouse/expected/k{}_coordinated.json", i + 1))).unwrap();
        assert!(equivalent(k, &want), "coordinated K{}", i + 1);
    }
    assert!(verify_rule(&out, &g).unwrap().holds());
}

#[test]
fn single_module_rule_is_inclusion() {
    let (g, _) = warehouse();
    assert!(verify_rule(&[g.clone()], &g).unwrap().holds());
}

#[test]
fn inseparable_spec_yields_counterexample() {
    let a = Dfa::chain(&word(&["a"]), &ab(&["a"])).unwrap();
    let b = Dfa::chain(&word(&["b"]), &ab(&["b"])).unwrap();
    let p = Dfa::chain(&word(&["a", "b"]), &ab(&["a", "b"])).unwrap();
    match verify_rule(&[a.clone(), b.clone()], &p).unwrap() {
        RuleVerdict::Fails { counterexample } => {
            assert!(counterexample == word(&["b"]) || counterexample == word(&["b", "a"]));
            let prod = sync_product(&[a, b]).unwrap();
            assert!(prod.generates(&counterexample) && !p.generates(&counterexample));
        }
        RuleVerdict::Holds { .. } => panic!("pref(a)||pref(b) escapes pref(ab)"),
    }
}

#[test]
fn universal_property_gives_universal_assumption() {
    let s1 = ab(&["a"]);
    let s2 = ab(&["b", "c"]);
    let m = Dfa::chain(&word(&["a"]), &s1).unwrap();
    let env = Dfa::chain(&word(&["b", "c"]), &s2).unwrap();
    let p = Dfa::universal(&ab(&["a", "b", "c"]));
    let (out, stats) = learn_assumption(&m, &p, &env, None).unwrap();
    let LearnOutcome::Assumption(a) = out else { panic!() };
    assert!(equivalent(&a, &Dfa::universal(&s2)));
    assert_eq!(stats.equivalence_queries, 1);
}

#[test]
fn interleaving_escape_is_a_violation() {
    // Property demands a before b; the environment may emit b first.
    let m = Dfa::chain(&word(&["a"]), &ab(&["a"])).unwrap();
    let env = Dfa::chain(&word(&["b"]), &ab(&["b"])).unwrap();
    let p = Dfa::chain(&word(&["a", "b"]), &ab(&["a", "b"])).unwrap();
    let (out, _) = learn_assumption(&m, &p, &env, None).unwrap();
    let LearnOutcome::Violation(w) = out else { panic!("expected violation") };
    let prod = sync_product(&[m, env]).unwrap();
    assert!(prod.generates(&w));
    assert!(matches!(included(&Dfa::chain(&w, &ab(&["a", "b"])).unwrap(), &p), Inclusion::Fails(_)));
}

#[test]
fn room_missions_compose() {
    let raw = |i: usize| Dfa::load(&data(&format!("room10/missions/k{i}.json"))).unwrap();
    let locals: Vec<Dfa> = (1..=4).map(raw).collect();
    let g = sync_product(&locals).unwrap();
    let al: Vec<Alphabet> = locals.iter().map(|d| d.alphabet().clone()).collect();
    let back = decompose(&g, &al).unwrap();
    for (k, d) in back.iter().zip(&locals) {
        assert!(equivalent(k, d));
    }
}
