use cdmon_core::model::{Conjunction, DataValue, ParamAtom, ParamConstraint};
use cdmon_core::specdsl::{
    parse_spec, pretty, Comparator, ExprDef, ExprNode, FieldType, Guard, GuardOp, Operand,
    Signature, SpecAst, VarDecl,
};
use proptest::prelude::*;

const VALUES: [&str; 3] = ["a", "b", "c"];

fn atom() -> impl Strategy<Value = ParamAtom> {
    (0usize..2, 0usize..3, any::<bool>()).prop_map(|(p, v, eq)| {
        if eq {
            ParamAtom::eq(p, VALUES[v])
        } else {
            ParamAtom::neq(p, VALUES[v])
        }
    })
}

fn constraint() -> impl Strategy<Value = ParamConstraint> {
    prop::collection::vec(prop::collection::vec(atom(), 0..4), 0..4)
        .prop_map(|sets| ParamConstraint::from_atom_sets(sets).unwrap())
}

/// Every valuation of two parameters over the literals plus one fresh value.
fn all_valuations() -> Vec<Vec<DataValue>> {
    let domain = ["a", "b", "c", "fresh"];
    domain
        .iter()
        .flat_map(|x| {
            domain
                .iter()
                .map(move |y| vec![DataValue::text(x), DataValue::text(y)])
        })
        .collect()
}

fn same_models(l: &ParamConstraint, r: &ParamConstraint) -> bool {
    all_valuations()
        .iter()
        .all(|v| l.satisfied_by(v) == r.satisfied_by(v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn conjoin_is_commutative(a in constraint(), b in constraint()) {
        prop_assert_eq!(a.conjoin(&b).unwrap(), b.conjoin(&a).unwrap());
    }

    #[test]
    fn conjoin_is_associative(a in constraint(), b in constraint(), c in constraint()) {
        let l = a.conjoin(&b).unwrap().conjoin(&c).unwrap();
        let r = a.conjoin(&b.conjoin(&c).unwrap()).unwrap();
        prop_assert!(same_models(&l, &r));
        prop_assert_eq!(l, r);
    }

    #[test]
    fn conjoin_and_disjoin_are_semantic(a in constraint(), b in constraint()) {
        let and = a.conjoin(&b).unwrap();
        let or = a.disjoin(&b);
        for v in all_valuations() {
            prop_assert_eq!(and.satisfied_by(&v), a.satisfied_by(&v) && b.satisfied_by(&v));
            prop_assert_eq!(or.satisfied_by(&v), a.satisfied_by(&v) || b.satisfied_by(&v));
        }
    }

    #[test]
    fn pruning_is_sound(xs in prop::collection::vec(atom(), 0..6)) {
        match Conjunction::from_atoms(xs.clone()).unwrap() {
            Some(c) => {
                let w = c.witness(2);
                for a in &xs {
                    let holds = match a.op {
                        cdmon_core::model::AtomOp::Eq => w[a.param] == a.value,
                        cdmon_core::model::AtomOp::Neq => w[a.param] != a.value,
                    };
                    prop_assert!(holds, "witness {:?} violates {:?}", w, a);
                }
            }
            None => {
                let c = ParamConstraint::from_atom_sets(vec![xs]).unwrap();
                prop_assert!(!c.is_satisfiable());
            }
        }
    }

    #[test]
    fn disjuncts_are_satisfiable_and_irredundant(a in constraint()) {
        let ds = a.disjuncts();
        for (i, x) in ds.iter().enumerate() {
            prop_assert!(x.satisfied_by(&x.witness(2)));
            for (j, y) in ds.iter().enumerate() {
                prop_assert!(i == j || !x.implies(y));
            }
        }
    }
}

const TOKENS: &[&str] = &[
    "var",
    "signature",
    "expr",
    "one_of",
    "or",
    "zero_or_more",
    "within",
    "{",
    "}",
    "(",
    ")",
    ";",
    ":",
    ",",
    "|",
    "==",
    "!=",
    "&&",
    "||",
    ">",
    ">=",
    "<",
    "<=",
    "=",
    "string",
    "number",
    "a",
    "x",
    "p",
    "\"v\"",
    "300",
    "//c\n",
    "\n",
    "#!x\n",
    "@",
    "\"",
    "-1",
    "99999999999999999999",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn parser_is_total(toks in prop::collection::vec(0..TOKENS.len(), 0..40)) {
        let src: Vec<&str> = toks.iter().map(|&i| TOKENS[i]).collect();
        let _ = parse_spec(&src.join(" "));
    }

    #[test]
    fn parser_is_total_on_bytes(src in "\\PC{0,80}") {
        let _ = parse_spec(&src);
    }
}

fn guard() -> impl Strategy<Value = Guard> {
    let operand = prop_oneof![
        Just(Operand::Ident("x".into())),
        Just(Operand::Ident("p".into())),
        Just(Operand::Ident("q".into())),
    ];
    let leaf = (
        operand,
        any::<bool>(),
        prop_oneof![Just("v0"), Just("v 1"), Just("q\"t")],
    )
        .prop_map(|(lhs, eq, lit)| {
            let op = if eq { GuardOp::Eq } else { GuardOp::Neq };
            match lhs {
                Operand::Ident(ref n) if n == "x" => {
                    Guard::cmp(lhs, op, Operand::Ident("p".into()))
                }
                _ => Guard::cmp(lhs, op, Operand::Literal(lit.into())),
            }
        });
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
        ]
    })
}

fn expr(refs: Vec<String>) -> impl Strategy<Value = ExprNode> {
    let atom = (prop_oneof![Just("a"), Just("b")], prop::option::of(guard()))
        .prop_map(|(s, g)| ExprNode::atom(s, &["x"], g));
    let leaf: BoxedStrategy<ExprNode> = if refs.is_empty() {
        atom.boxed()
    } else {
        prop_oneof![atom, prop::sample::select(refs).prop_map(ExprNode::Ref)].boxed()
    };
    let cmp = prop_oneof![
        Just(Comparator::Gt),
        Just(Comparator::Ge),
        Just(Comparator::Lt),
        Just(Comparator::Le),
        Just(Comparator::Eq),
    ];
    leaf.prop_recursive(4, 16, 3, move |inner| {
        // Sequences never directly contain sequences: the parser flattens them.
        let non_seq = inner
            .clone()
            .prop_filter("nested seq", |e| !matches!(e, ExprNode::Seq(_)));
        prop_oneof![
            prop::collection::vec(non_seq, 2..4).prop_map(ExprNode::Seq),
            prop::collection::vec(inner.clone(), 2..4).prop_map(ExprNode::OneOf),
            inner.clone().prop_map(ExprNode::star),
            (cmp.clone(), 0u64..1000, inner).prop_map(|(c, b, e)| ExprNode::within(c, b, e)),
        ]
    })
}

fn spec() -> impl Strategy<Value = SpecAst> {
    (expr(vec![]), expr(vec!["first".into()])).prop_map(|(first, main)| SpecAst {
        vars: vec![
            VarDecl {
                name: "p".into(),
                ty: FieldType::String,
            },
            VarDecl {
                name: "q".into(),
                ty: FieldType::String,
            },
        ],
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
        exprs: vec![ExprDef {
            name: "first".into(),
            body: first,
        }],
        main,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pretty_round_trips(ast in spec()) {
        let text = pretty(&ast);
        let back = parse_spec(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &ast);
        prop_assert_eq!(pretty(&back), text);
    }
}

#[test]
fn bundled_spec_round_trips() {
    let src = include_str!("../specs/failed_5min.symon");
    let ast = parse_spec(src).unwrap();
    assert_eq!(parse_spec(&pretty(&ast)).unwrap(), ast);
}

proptest! {
    #[test]
    fn text_order_matches_serialization(
        a in prop::collection::vec(atom_wide(), 0..4),
        b in prop::collection::vec(atom_wide(), 0..4),
    ) {
        if let (Some(x), Some(y)) = (
            Conjunction::from_atoms(a).unwrap(),
            Conjunction::from_atoms(b).unwrap(),
        ) {
            prop_assert_eq!(x.text_cmp(&y), x.to_string().cmp(&y.to_string()));
        }
    }
}

/// Atoms over parameters with multi-digit indices and values that sort
/// around the tab separator.
fn atom_wide() -> impl Strategy<Value = ParamAtom> {
    (
        prop_oneof![Just(0usize), Just(1), Just(2), Just(10), Just(11)],
        "[\u{1}-\u{b}a-c]{0,3}",
        any::<bool>(),
    )
        .prop_map(|(p, v, eq)| {
            if eq {
                ParamAtom::eq(p, v.as_str())
            } else {
                ParamAtom::neq(p, v.as_str())
            }
        })
}
