mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::sync::Arc;

use bdi_core::executor::{eval_ucq, eval_walk, Bindings, WrapperBinding};
use bdi_core::query::parse_omq;
use bdi_core::rewriter::rewrite_query;
use bdi_core::running_example as rx;
use bdi_core::source_model::{AttrRef, JoinCondition};
use bdi_core::{
    apply_release, validate_ontology, vocab, well_formed_rewrite, Dataset, Iri, Quad, QuadPattern, Triple, Ucq,
    Walk, WrapperSchema,
};
use common::{oracle, random_instance, random_release, signature, StreamState, Universe};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const TERMS: [&str; 8] = [
    "http://example.org/a",
    "http://example.org/b#frag",
    "http://example.org/c.d",
    "http://example.org/%20e",
    "urn:x:f",
    "http://example.org/ünï",
    "http://example.org/g/",
    "http://example.org/h_1",
];

fn term(i: usize) -> Iri {
    Iri::new(TERMS[i % TERMS.len()]).unwrap()
}

fn quad_strategy() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (0..4usize, 0..8usize, 0..4usize, 0..8usize)
}

fn build(quads: &[(usize, usize, usize, usize)]) -> Dataset {
    let mut ds = Dataset::new();
    ds.add_prefix("ex", "http://example.org/");
    for &(g, s, p, o) in quads {
        ds.insert(Quad::new(term(g), term(s), term(p), term(o)));
    }
    ds
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pattern_matching_agrees_with_scan(
        quads in prop::collection::vec(quad_strategy(), 0..40),
        mask in 0u8..16,
        probe in quad_strategy(),
    ) {
        let ds = build(&quads);
        let (g, s, p, o) = (term(probe.0), term(probe.1), term(probe.2), term(probe.3));
        let pick = |bit: u8, x: &Iri| if mask & bit != 0 { Some(x.clone()) } else { None };
        let (pg, ps, pp, po) = (pick(1, &g), pick(2, &s), pick(4, &p), pick(8, &o));
        let pattern = QuadPattern::new(pg.as_ref(), ps.as_ref(), pp.as_ref(), po.as_ref());
        let got: BTreeSet<Quad> = ds.match_pattern(&pattern).into_iter().collect();
        let want: BTreeSet<Quad> = ds.iter().filter(|q| pattern.matches(q)).collect();
        prop_assert_eq!(got.len(), ds.match_pattern(&pattern).len());
        prop_assert_eq!(got, want);
    }

    #[test]
    fn insert_remove_is_set_semantics(quads in prop::collection::vec(quad_strategy(), 0..40), drop in prop::collection::vec(quad_strategy(), 0..10)) {
        let mut ds = build(&quads);
        let mut model: BTreeSet<Quad> = quads.iter().map(|&(g, s, p, o)| Quad::new(term(g), term(s), term(p), term(o))).collect();
        for &(g, s, p, o) in &drop {
            let q = Quad::new(term(g), term(s), term(p), term(o));
            prop_assert_eq!(ds.remove(&q), model.remove(&q));
        }
        prop_assert_eq!(ds.len(), model.len());
        prop_assert_eq!(ds.iter().collect::<BTreeSet<_>>(), model);
    }

    #[test]
    fn subclass_closure_is_reachability(edges in prop::collection::vec((0..8usize, 0..8usize), 0..20), later in (0..8usize, 0..8usize)) {
        let v = vocab();
        let mut ds = Dataset::new();
        let add = |ds: &mut Dataset, a: usize, b: usize| ds.insert(Quad::new(v.global_graph.clone(), term(a), v.sub_class_of.clone(), term(b)));
        for &(a, b) in &edges {
            add(&mut ds, a, b);
        }
        let check = |ds: &Dataset, edges: &[(usize, usize)]| -> Result<(), TestCaseError> {
            let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
            for &(a, b) in edges {
                adj.entry(a % TERMS.len()).or_default().push(b % TERMS.len());
            }
            for a in 0..TERMS.len() {
                let mut seen = BTreeSet::from([a]);
                let mut queue = VecDeque::from([a]);
                while let Some(n) = queue.pop_front() {
                    for &m in adj.get(&n).into_iter().flatten() {
                        if seen.insert(m) {
                            queue.push_back(m);
                        }
                    }
                }
                for b in 0..TERMS.len() {
                    prop_assert_eq!(ds.is_subclass_of(&term(a), &term(b)), seen.contains(&b), "{} ⊑ {}", a, b);
                }
            }
            Ok(())
        };
        check(&ds, &edges)?;
        add(&mut ds, later.0, later.1);
        let mut more = edges.clone();
        more.push(later);
        check(&ds, &more)?;
    }

    #[test]
    fn save_load_is_identity(quads in prop::collection::vec(quad_strategy(), 0..40)) {
        let ds = build(&quads);
        let back = Dataset::read_from(ds.to_quad_string().as_bytes()).unwrap();
        prop_assert_eq!(back.iter().collect::<Vec<_>>(), ds.iter().collect::<Vec<_>>());
        prop_assert_eq!(back.prefixes().get("ex"), Some("http://example.org/"));
    }

    #[test]
    fn rewriting_matches_oracle(seed in any::<u64>()) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed));
        let want = oracle(&inst.ds, &inst.query);
        let got = match rewrite_query(&inst.query, &inst.ds) {
            Ok(r) => Some(r.ucq.walks().map(signature).collect::<BTreeSet<_>>()),
            Err(bdi_core::RewriteError::Query(_)) => None,
            Err(_) => Some(BTreeSet::new()),
        };
        prop_assert_eq!(got, want);
    }

    #[test]
    fn rewritten_walks_are_connected_covering_and_distinct(seed in any::<u64>()) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed));
        if let Ok(r) = rewrite_query(&inst.query, &inst.ds) {
            let wf = well_formed_rewrite(&inst.ds, &inst.query).unwrap();
            let mut sigs = BTreeSet::new();
            for c in &r.ucq.conjuncts {
                prop_assert!(c.walk.is_connected());
                prop_assert!(c.walk.validate().is_ok());
                prop_assert!(c.walk.has_distinct_sources());
                let ws: Vec<Iri> = c.walk.wrappers().cloned().collect();
                prop_assert!(common::covering_minimal(&inst.ds, &ws, &wf.phi));
                prop_assert_eq!(c.columns.len(), wf.pi.len());
                prop_assert!(sigs.insert(signature(&c.walk)));
            }
        }
    }

    #[test]
    fn query_render_parse_round_trip(seed in any::<u64>()) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed));
        let text = inst.query.render(inst.ds.prefixes());
        let q = parse_omq(&text, &inst.ds).unwrap();
        prop_assert_eq!(&q.pi, &inst.query.pi);
        prop_assert_eq!(&q.phi, &inst.query.phi);
    }

    #[test]
    fn well_formedness_is_idempotent(seed in any::<u64>(), project_concept in any::<bool>()) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed));
        let mut q = inst.query.clone();
        if project_concept {
            q.pi.push(inst.universe.concepts[0].clone());
        }
        let once = well_formed_rewrite(&inst.ds, &q).unwrap();
        prop_assert_eq!(well_formed_rewrite(&inst.ds, &once).unwrap(), once.clone());
        let v = vocab();
        for p in &once.pi {
            prop_assert!(inst.ds.has_type(&v.global_graph, p, &v.feature));
        }
        prop_assert!(once.phi.is_superset(&q.phi));
    }

    #[test]
    fn releases_keep_ontology_valid_and_bounded(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = StdRng::seed_from_u64(seed);
        let k = rng.gen_range(1..=4);
        let extra = rng.gen_range(0..=6);
        let u = Universe::random(&mut rng, k, extra);
        let mut ds = u.global();
        let g = vocab().global_graph.clone();
        let global = ds.graph_len(&g);
        let mut st = StreamState::default();
        for _ in 0..n {
            let known: BTreeSet<String> = st.sources.keys().cloned().collect();
            let r = random_release(&mut rng, &u, &mut st);
            let before = ds.len();
            let stats = apply_release(&mut ds, &r).unwrap();
            prop_assert_eq!(ds.len() - before, stats.total());
            let k = r.wrapper.attributes().count();
            if known.contains(&r.wrapper.source.name) {
                prop_assert!(stats.total() <= r.growth_bound());
                prop_assert_eq!(stats.source, 0);
            } else {
                prop_assert_eq!(stats.total(), 4 + 2 * k + r.subgraph.len() + r.feature_map.len());
            }
            prop_assert_eq!(ds.graph_len(&g), global);
        }
        prop_assert!(validate_ontology(&ds).is_ok());

        let snapshot: Vec<Quad> = ds.iter().collect();
        let mut bad = random_release(&mut rng, &u, &mut st);
        bad.subgraph.insert(Triple::new(u.concepts[0].clone(), common::ex("missing"), u.concepts[0].clone()));
        prop_assert!(apply_release(&mut ds, &bad).is_err());
        prop_assert_eq!(ds.iter().collect::<Vec<_>>(), snapshot);
    }
}

fn csv(header: &str, rows: &[(u8, u8)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in rows {
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}

fn multiset(rows: Vec<Vec<String>>) -> BTreeMap<Vec<String>, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r).or_insert(0) += 1;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn join_agrees_with_nested_loop(
        left in prop::collection::vec((0u8..5, 0u8..9), 0..12),
        right in prop::collection::vec((0u8..5, 0u8..9), 0..12),
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let a = Arc::new(WrapperSchema::new("a", "A", ["k"], ["x"]).unwrap());
        let b = Arc::new(WrapperSchema::new("b", "B", ["r"], ["y"]).unwrap());
        fs::write(tmp.path().join("a.csv"), csv("k,x", &left)).unwrap();
        fs::write(tmp.path().join("b.csv"), csv("r,y", &right)).unwrap();
        let bindings: Bindings = BTreeMap::from([
            (a.iri(), WrapperBinding::new(a.clone(), tmp.path().join("a.csv"))),
            (b.iri(), WrapperBinding::new(b.clone(), tmp.path().join("b.csv"))),
        ]);
        let mut w = Walk::single(a.clone(), ["x"]);
        w.add_wrapper(b.clone());
        w.project(&b.iri(), "y".into());
        w.add_join(JoinCondition::new(AttrRef::new(a.iri(), "k"), AttrRef::new(b.iri(), "r")));
        let rel = eval_walk(&w, &bindings).unwrap();
        let cols: Vec<usize> = ["a.k", "a.x", "b.r", "b.y"].iter().map(|c| rel.column_index(c).unwrap()).collect();
        let got = multiset(rel.rows.iter().map(|r| cols.iter().map(|&i| r[i].clone()).collect()).collect());
        let mut want = Vec::new();
        for (k, x) in &left {
            for (r, y) in &right {
                if k == r {
                    want.push(vec![k.to_string(), x.to_string(), r.to_string(), y.to_string()]);
                }
            }
        }
        prop_assert_eq!(got, multiset(want));
    }

    #[test]
    fn union_is_order_invariant(
        w1 in prop::collection::vec((0u8..4, 0u8..6), 0..8),
        w3 in prop::collection::vec((0u8..4, 0u8..4), 0..6),
        w4 in prop::collection::vec((0u8..4, 0u8..6), 0..8),
    ) {
        let ds = rx::evolved_dataset();
        let r = bdi_core::rewrite(rx::LAG_RATIO_QUERY, &ds).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("w1.csv"), csv("VoDmonitorId,lagRatio", &w1)).unwrap();
        let w3_rows: Vec<String> = w3.iter().map(|(app, m)| format!("{app},{m},0")).collect();
        fs::write(tmp.path().join("w3.csv"), format!("TargetApp,MonitorId,FeedbackId\n{}\n", w3_rows.join("\n"))).unwrap();
        fs::write(tmp.path().join("w4.csv"), csv("VoDmonitorId,bufferingRatio", &w4)).unwrap();
        let files: BTreeMap<String, std::path::PathBuf> =
            ["w1", "w3", "w4"].iter().map(|w| (w.to_string(), tmp.path().join(format!("{w}.csv")))).collect();
        let bindings = bdi_core::executor::bindings_from_files(&ds, &files);

        let forward = eval_ucq(&r.ucq, &bindings).unwrap();
        let mut reversed = r.ucq.clone();
        reversed.conjuncts.reverse();
        let backward = eval_ucq(&reversed, &bindings).unwrap();
        prop_assert_eq!(&forward.rows, &backward.rows);

        let mut expected: BTreeSet<Vec<String>> = BTreeSet::new();
        for c in &r.ucq.conjuncts {
            let single = Ucq { output_features: r.ucq.output_features.clone(), conjuncts: vec![c.clone()] };
            expected.extend(eval_ucq(&single, &bindings).unwrap().rows);
        }
        prop_assert_eq!(forward.rows.iter().cloned().collect::<BTreeSet<_>>(), expected);
    }
}
