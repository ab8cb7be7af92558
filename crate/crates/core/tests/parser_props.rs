use proptest::prelude::*;

use sqlalign::template::{normalize_whitespace, parse_sql, templatize, SqlQuery};

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_map(|s| format!("x_{s}"))
}

fn operand() -> impl Strategy<Value = String> {
    prop_oneof![
        ident(),
        (ident(), ident()).prop_map(|(t, c)| format!("{t}.{c}")),
        (0u32..10_000).prop_map(|n| n.to_string()),
        "[a-z ]{0,8}".prop_map(|s| format!("'{s}'")),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = operand();
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop::sample::select(vec!["=", "<", ">=", "<>", "+", "*", "AND", "OR"]),
                inner.clone()
            )
                .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            inner.clone().prop_map(|e| format!("({e})")),
            (
                prop::sample::select(vec!["COUNT", "SUM", "MAX", "LOWER"]),
                inner.clone()
            )
                .prop_map(|(f, e)| format!("{f}({e})")),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| format!("CASE WHEN {a} THEN {b} ELSE 0 END")),
            inner.clone().prop_map(|e| format!("CAST({e} AS REAL)")),
            (inner.clone(), ident()).prop_map(|(e, t)| format!("{e} IN (SELECT x FROM {t})")),
        ]
    })
}

fn query() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(expr(), 1..4),
        ident(),
        prop::option::of(expr()),
        prop::option::of(ident()),
        prop::option::of(1u32..100),
    )
        .prop_map(|(items, table, cond, order, limit)| {
            let mut q = format!("SELECT {} FROM {table}", items.join(", "));
            if let Some(c) = cond {
                q += &format!(" WHERE {c}");
            }
            if let Some(o) = order {
                q += &format!(" ORDER BY {o} DESC");
            }
            if let Some(l) = limit {
                q += &format!(" LIMIT {l}");
            }
            q
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_queries_parse_and_serialize_back(q in query()) {
        let tree = parse_sql(&SqlQuery::new(q.clone()).unwrap()).unwrap();
        prop_assert_eq!(tree.serialize(), normalize_whitespace(&q).unwrap());
    }

    #[test]
    fn templates_hold_no_identifiers_or_literals(q in query()) {
        let t = templatize(&q).unwrap();
        for tok in t.tokens() {
            prop_assert!(!tok.starts_with("X_") && !tok.starts_with('\''), "{} in {}", tok, t);
            prop_assert!(tok.parse::<f64>().is_err(), "number {} in {}", tok, t);
        }
        prop_assert_eq!(t.tokens()[0].as_str(), "SELECT");
    }

    #[test]
    fn case_and_spacing_do_not_matter(q in query()) {
        let shouted = q.to_uppercase();
        let spaced = q.replace(' ', "   ").replace('(', " ( ");
        let t = templatize(&q).unwrap();
        prop_assert_eq!(&t, &templatize(&shouted).unwrap());
        prop_assert_eq!(&t, &templatize(&spaced).unwrap());
    }

    /// Arbitrary text may fail to parse but must never panic.
    #[test]
    fn arbitrary_input_never_panics(s in "\\PC{0,80}") {
        let _ = templatize(&s);
    }

    #[test]
    fn sql_flavoured_noise_never_panics(
        parts in prop::collection::vec(
            prop::sample::select(vec![
                "SELECT", "FROM", "WHERE", "(", ")", ",", "*", "'a'", "x", "=", "AND", "CASE",
                "WHEN", "END", "CAST", "AS", "IN", "NOT", "JOIN", "ON", "GROUP", "BY", ".", "1",
                "UNION", "WITH", "OVER", "\"q\"", "--", "/*", ";", "?", "::",
            ]),
            0..30,
        )
    ) {
        let _ = templatize(&parts.join(" "));
    }
}

#[test]
fn deep_nesting_is_an_error_not_a_crash() {
    let deep = format!("SELECT {}1{} FROM t", "(".repeat(5000), ")".repeat(5000));
    assert!(templatize(&deep).is_err());
    let ok = format!("SELECT {}1{} FROM t", "(".repeat(50), ")".repeat(50));
    assert!(templatize(&ok).is_ok());
}
