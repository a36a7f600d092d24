use std::collections::BTreeSet;
use std::sync::OnceLock;

use cdmon_core::automaton::{compile, Automaton};
use cdmon_core::model::{DataValue, Event, TimedDataWord};
use cdmon_core::monitor::{run, Session};
use cdmon_core::oracle::{
    latency_check, naive_match, naive_match_with_defs, witnessed_valuations, Valuation,
};
use cdmon_core::specdsl::{
    parse_spec, resolve, Comparator, ExprNode, FieldType, Guard, GuardOp, Operand, Signature,
    SpecAst, VarDecl,
};
use proptest::prelude::*;

const SPEC_5MIN: &str = include_str!("../specs/failed_5min.symon");

fn spec_automaton(bound: u64) -> &'static Automaton {
    static A300: OnceLock<Automaton> = OnceLock::new();
    static A600: OnceLock<Automaton> = OnceLock::new();
    let cell = match bound {
        300 => &A300,
        600 => &A600,
        _ => unreachable!(),
    };
    cell.get_or_init(|| {
        let ast = parse_spec(SPEC_5MIN).unwrap().with_bound(bound);
        compile(&resolve(&ast), &ast).unwrap()
    })
}

/// Create/fetch logs over 4 names and 4 tags. Gaps are mostly short so that
/// windows close on both sides of the bounds, with occasional long pauses.
fn log() -> impl Strategy<Value = TimedDataWord> {
    let gap = prop_oneof![3 => 0i64..60, 1 => 0i64..700];
    prop::collection::vec((any::<bool>(), 0usize..4, 0usize..4, gap), 0..=200).prop_map(|rows| {
        let mut ts = 0;
        let events = rows
            .into_iter()
            .map(|(create, n, t, gap)| {
                ts += gap;
                let label = if create { "create" } else { "fetch" };
                Event::text(label, &[&format!("n{n}"), &format!("t{t}")], ts).unwrap()
            })
            .collect();
        TimedDataWord::from_events(events).unwrap()
    })
}

fn lines(r: &[cdmon_core::MatchReport]) -> Vec<String> {
    r.iter().map(ToString::to_string).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// The compiled specification and the direct latency check report the
    /// same lines on random create/fetch logs.
    #[test]
    fn monitor_matches_latency_oracle(word in log()) {
        for bound in [300, 600] {
            let got = run(spec_automaton(bound), &word).unwrap();
            let want = latency_check(&word, bound).unwrap();
            if got != want {
                prop_assert_eq!(lines(&got), lines(&want), "bound {}", bound);
            }
        }
    }
}

fn small_spec(main: ExprNode) -> SpecAst {
    SpecAst {
        vars: vec![VarDecl {
            name: "p".into(),
            ty: FieldType::String,
        }],
        signatures: ["a", "b"]
            .iter()
            .map(|n| Signature {
                name: n.to_string(),
                fields: vec![VarDecl {
                    name: "v".into(),
                    ty: FieldType::String,
                }],
            })
            .collect(),
        exprs: vec![],
        main,
    }
}

fn small_guard() -> impl Strategy<Value = Guard> {
    let ident = |s: &str| Operand::Ident(s.to_string());
    let lit = |s: &str| Operand::Literal(s.to_string());
    let leaf = (0..3, any::<bool>()).prop_map(move |(k, eq)| {
        let op = if eq { GuardOp::Eq } else { GuardOp::Neq };
        match k {
            0 => Guard::cmp(ident("x"), op, ident("p")),
            1 => Guard::cmp(ident("x"), op, lit("v0")),
            _ => Guard::cmp(lit("v1"), op, ident("p")),
        }
    });
    leaf.prop_recursive(2, 4, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
        ]
    })
}

fn small_expr() -> impl Strategy<Value = ExprNode> {
    let atom = (
        prop_oneof![Just("a"), Just("b")],
        prop::option::of(small_guard()),
    )
        .prop_map(|(s, g)| ExprNode::atom(s, &["x"], g));
    let cmp = prop_oneof![
        Just(Comparator::Gt),
        Just(Comparator::Ge),
        Just(Comparator::Lt),
        Just(Comparator::Le),
        Just(Comparator::Eq),
    ];
    atom.prop_recursive(4, 12, 3, move |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(ExprNode::Seq),
            prop::collection::vec(inner.clone(), 2..3).prop_map(ExprNode::OneOf),
            inner.clone().prop_map(ExprNode::star),
            (
                cmp.clone(),
                prop_oneof![Just(0u64), Just(150), Just(300), Just(301)],
                inner
            )
                .prop_map(|(c, b, e)| ExprNode::within(c, b, e)),
        ]
    })
}

fn small_word() -> impl Strategy<Value = TimedDataWord> {
    prop::collection::vec(
        (
            prop_oneof![Just("a"), Just("b")],
            prop_oneof![Just("v0"), Just("v1")],
            0usize..4,
        ),
        0..=5,
    )
    .prop_map(|mut rows| {
        const TIMES: [i64; 4] = [0, 150, 301, 650];
        rows.sort_by_key(|r| r.2);
        TimedDataWord::from_events(
            rows.into_iter()
                .map(|(l, v, t)| Event::text(l, &[v], TIMES[t]).unwrap())
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// Automaton plus monitor accepts exactly the prefixes the recursive
    /// matcher accepts, for every valuation of the parameter.
    #[test]
    fn automaton_matches_naive(expr in small_expr(), word in small_word()) {
        let spec = small_spec(expr.clone());
        let automaton = compile(&expr, &spec).unwrap();
        let reports = run(&automaton, &word).unwrap();
        for p in ["v0", "v1", "v9"] {
            let value = [DataValue::text(p)];
            let got: BTreeSet<usize> = reports
                .iter()
                .filter(|r| r.constraint.satisfied_by(&value))
                .map(|r| r.time_point)
                .collect();
            let valuation = Valuation::from([("p".to_string(), DataValue::text(p))]);
            let want = naive_match(&expr, &word, &valuation).unwrap();
            prop_assert_eq!(got, want, "p = {}", p);
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    /// Reports on a prefix are exactly the reports of the full run up to it.
    #[test]
    fn online_reports_are_prefix_closed(word in log(), cut in 0usize..200) {
        let a = spec_automaton(300);
        let full = run(a, &word).unwrap();
        let cut = cut.min(word.len());
        let prefix = TimedDataWord::from_events(word.events()[..cut].to_vec()).unwrap();
        let expected: Vec<_> = full.iter().filter(|r| r.time_point < cut).cloned().collect();
        prop_assert_eq!(run(a, &prefix).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Named expressions behave like their inlined bodies.
    #[test]
    fn inlining_preserves_matches(word in log().prop_map(|w| {
        TimedDataWord::from_events(w.into_events().into_iter().take(7).collect()).unwrap()
    })) {
        let ast = parse_spec(SPEC_5MIN).unwrap();
        let inlined = resolve(&ast);
        let globals: Vec<String> = ast.vars.iter().map(|v| v.name.clone()).collect();
        for valuation in witnessed_valuations(&globals, &word) {
            prop_assert_eq!(
                naive_match_with_defs(&ast.main, &ast, &word, &valuation).unwrap(),
                naive_match(&inlined, &word, &valuation).unwrap()
            );
        }
    }

    /// Every report's witness valuation is a valuation under which the
    /// reported prefix is accepted.
    #[test]
    fn report_witnesses_are_sound(word in log().prop_map(|w| {
        TimedDataWord::from_events(w.into_events().into_iter().take(30).collect()).unwrap()
    })) {
        let ast = parse_spec(SPEC_5MIN).unwrap();
        let expr = resolve(&ast);
        for r in run(spec_automaton(300), &word).unwrap() {
            let w = r.constraint.witness(2);
            let valuation = Valuation::from([
                ("current_name".to_string(), w[0].clone()),
                ("current_tag".to_string(), w[1].clone()),
            ]);
            prop_assert!(naive_match(&expr, &word, &valuation).unwrap().contains(&r.time_point));
        }
    }

    /// Live configurations stay proportional to the creates still waiting
    /// for their fetch.
    #[test]
    fn configuration_count_is_bounded(word in log()) {
        let a = spec_automaton(300);
        let mut s = Session::new(a);
        let mut pending: Vec<(DataValue, DataValue)> = Vec::new();
        for e in word.events() {
            s.step(e).unwrap();
            let pair = (e.fields[0].clone(), e.fields[1].clone());
            if e.label == "create" {
                pending.push(pair);
            } else {
                pending.retain(|p| *p != pair);
            }
            prop_assert!(
                s.live_configurations() <= 3 + 5 * pending.len(),
                "{} configurations for {} pending creates",
                s.live_configurations(),
                pending.len()
            );
        }
    }
}

#[test]
fn compilation_and_runs_are_deterministic() {
    let ast = parse_spec(SPEC_5MIN).unwrap();
    let a = compile(&resolve(&ast), &ast).unwrap();
    let b = compile(&resolve(&ast), &ast).unwrap();
    assert_eq!(cdmon_core::describe(&a), cdmon_core::describe(&b));
    let word =
        cdmon_core::generator::generate(&cdmon_core::generator::preset_scenario(5, 11)).unwrap();
    assert_eq!(run(&a, &word).unwrap(), run(&b, &word).unwrap());
}

#[test]
fn generated_logs_satisfy_generator_invariants() {
    use cdmon_core::generator::{generate, preset_scenario};
    for days in [5, 10, 15] {
        let s = preset_scenario(days, 2);
        let w = generate(&s).unwrap();
        let ev = w.events();
        assert!(ev.windows(2).all(|p| p[0].timestamp <= p[1].timestamp));
        for p in &s.pushes {
            let visible =
                s.start + p.time + s.delays.iter().find(|d| d.0 == p.tag).map_or(0, |d| d.1);
            let first = ev
                .iter()
                .find(|e| e.label == "fetch" && e.fields[1].as_text() == Some(p.tag.as_str()))
                .expect("every push is eventually fetched")
                .timestamp;
            assert!(first >= visible);
            assert!(
                first - visible <= s.poll_interval + s.jitter.1,
                "{} {}",
                first,
                visible
            );
        }
    }
}

#[test]
fn preset_logs_report_only_delayed_tags_at_five_minutes() {
    use cdmon_core::generator::{generate, preset_scenario};
    let w = generate(&preset_scenario(5, 1)).unwrap();
    let at300 = run(spec_automaton(300), &w).unwrap();
    let at600 = run(spec_automaton(600), &w).unwrap();
    assert!(!at300.is_empty());
    assert!(at600.is_empty());
    assert_eq!(lines(&at300), lines(&latency_check(&w, 300).unwrap()));
}
