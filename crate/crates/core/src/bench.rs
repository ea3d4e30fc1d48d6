//! Synthetic workloads: the worst case for walk generation and a stream of
//! schema releases for growth accounting.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::iri::Iri;
use crate::quadstore::{Dataset, Triple};
use crate::query::OmqQuery;
use crate::release::{apply_release, GrowthStats, Release, ReleaseDescriptor, ReleaseError};
use crate::rewriter::{generate_walks, RewriteError};
use crate::source_model::WrapperSchema;
use crate::vocab::vocab;

pub const BENCH_NS: &str = "http://example.org/bench/";

fn term(local: &str) -> Iri {
    Iri::new(format!("{BENCH_NS}{local}")).expect("bench iri")
}

/// A chain of `concepts` concepts, each served by `wrappers` wrappers from
/// pairwise-distinct sources. Every wrapper of concept `i > 0` also carries
/// the edge from concept `i - 1` and that concept's identifier, so each
/// consecutive pair joins inside one wrapper. The query asks for one non-ID
/// feature per concept.
pub fn worst_case(concepts: usize, wrappers: usize) -> (Dataset, OmqQuery) {
    let v = vocab();
    let mut ds = Dataset::new();
    ds.add_prefix("b", BENCH_NS);
    let c = |i: usize| term(&format!("C{i}"));
    let id = |i: usize| term(&format!("C{i}_id"));
    let val = |i: usize| term(&format!("C{i}_val"));
    let next = term("next");
    let g = v.global_graph.clone();
    let mut global = Vec::new();
    for i in 0..concepts {
        global.push(Triple::new(c(i), v.rdf_type.clone(), v.concept.clone()));
        for f in [id(i), val(i)] {
            global.push(Triple::new(f.clone(), v.rdf_type.clone(), v.feature.clone()));
            global.push(Triple::new(c(i), v.has_feature.clone(), f));
        }
        global.push(Triple::new(id(i), v.sub_class_of.clone(), v.identifier.clone()));
        if i > 0 {
            global.push(Triple::new(c(i - 1), next.clone(), c(i)));
        }
    }
    for t in global {
        ds.insert(t.in_graph(&g));
    }

    for i in 0..concepts {
        for j in 0..wrappers {
            let mut ids = vec!["id".to_string()];
            let mut subgraph = BTreeSet::from([
                Triple::new(c(i), v.has_feature.clone(), id(i)),
                Triple::new(c(i), v.has_feature.clone(), val(i)),
            ]);
            let mut feature_map = BTreeMap::from([("id".to_string(), id(i)), ("val".to_string(), val(i))]);
            if i > 0 {
                ids.push("prev".into());
                subgraph.insert(Triple::new(c(i - 1), next.clone(), c(i)));
                subgraph.insert(Triple::new(c(i - 1), v.has_feature.clone(), id(i - 1)));
                feature_map.insert("prev".into(), id(i - 1));
            }
            let wrapper = WrapperSchema::new(format!("w{i}_{j}"), format!("D{i}_{j}"), ids, ["val"])
                .expect("valid synthetic wrapper");
            apply_release(&mut ds, &Release { wrapper, subgraph, feature_map }).expect("valid synthetic release");
        }
    }

    let mut phi = BTreeSet::new();
    for i in 0..concepts {
        phi.insert(Triple::new(c(i), v.has_feature.clone(), val(i)));
        if i > 0 {
            phi.insert(Triple::new(c(i - 1), next.clone(), c(i)));
        }
    }
    let q = OmqQuery { pi: (0..concepts).map(val).collect(), phi };
    (ds, q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkBenchRow {
    pub concepts: usize,
    pub wrappers: usize,
    pub walks: usize,
    /// Fastest of the timed runs.
    pub elapsed: Duration,
    pub runs: usize,
}

impl WalkBenchRow {
    pub const HEADER: &'static str = "concepts,wrappers,walks,elapsed_ms,runs";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.3},{}",
            self.concepts,
            self.wrappers,
            self.walks,
            self.elapsed.as_secs_f64() * 1e3,
            self.runs
        )
    }
}

/// Times walk generation for one worst-case instance. Runs at least
/// `min_runs` times and until `budget` is spent, keeping the fastest run.
pub fn time_walks(concepts: usize, wrappers: usize, min_runs: usize, budget: Duration) -> Result<WalkBenchRow, RewriteError> {
    let (ds, q) = worst_case(concepts, wrappers);
    let started = Instant::now();
    let mut best = Duration::MAX;
    let mut walks = 0;
    let mut runs = 0;
    while runs < min_runs.max(1) || started.elapsed() < budget {
        let t = Instant::now();
        walks = generate_walks(&q, &ds)?.len();
        best = best.min(t.elapsed());
        runs += 1;
    }
    Ok(WalkBenchRow { concepts, wrappers, walks, elapsed: best, runs })
}

/// `W = 1..=max_wrappers` for a fixed number of concepts.
pub fn sweep_walks(concepts: usize, max_wrappers: usize, min_runs: usize, budget: Duration) -> Result<Vec<WalkBenchRow>, RewriteError> {
    (1..=max_wrappers).map(|w| time_walks(concepts, w, min_runs, budget)).collect()
}

/// A release stream over a single evolving source: the descriptors plus the
/// Global graph they refer to.
#[derive(Debug, Clone)]
pub struct ReleaseStream {
    pub global: Dataset,
    pub releases: Vec<ReleaseDescriptor>,
    /// Kind of each release: `initial`, `major` or `minor`.
    pub kinds: Vec<&'static str>,
}

/// One initial release of a new source followed by `majors` major and
/// `minors` minor releases. Major releases rename, add and drop several
/// attributes at once; minor releases make one change each, cycling through
/// add, rename and drop.
pub fn release_stream(majors: usize, minors: usize, seed: u64) -> ReleaseStream {
    let v = vocab();
    let mut rng = StdRng::seed_from_u64(seed);
    let total_features = 40 + 8 * majors + 2 * minors;
    let mut ds = Dataset::new();
    ds.add_prefix("b", BENCH_NS);
    let concept = term("Post");
    let feat = |i: usize| term(&format!("f{i}"));
    let id_feat = term("postId");
    let g = v.global_graph.clone();
    ds.insert(Triple::new(concept.clone(), v.rdf_type.clone(), v.concept.clone()).in_graph(&g));
    ds.insert(Triple::new(id_feat.clone(), v.rdf_type.clone(), v.feature.clone()).in_graph(&g));
    ds.insert(Triple::new(id_feat.clone(), v.sub_class_of.clone(), v.identifier.clone()).in_graph(&g));
    ds.insert(Triple::new(concept.clone(), v.has_feature.clone(), id_feat.clone()).in_graph(&g));
    for i in 0..total_features {
        ds.insert(Triple::new(feat(i), v.rdf_type.clone(), v.feature.clone()).in_graph(&g));
        ds.insert(Triple::new(concept.clone(), v.has_feature.clone(), feat(i)).in_graph(&g));
    }

    // attribute name → feature index
    let mut attrs: BTreeMap<String, usize> = BTreeMap::new();
    let mut next_feature = 0;
    let mut next_name = 0;
    let mut fresh = |attrs: &mut BTreeMap<String, usize>, f: usize| {
        attrs.insert(format!("a{next_name}"), f);
        next_name += 1;
    };
    for _ in 0..12 {
        fresh(&mut attrs, next_feature);
        next_feature += 1;
    }

    let mut releases = Vec::new();
    let mut kinds = Vec::new();
    let snapshot = |attrs: &BTreeMap<String, usize>, version: usize| {
        let mut subgraph = BTreeSet::from([Triple::new(concept.clone(), v.has_feature.clone(), id_feat.clone())]);
        let mut feature_map = BTreeMap::from([("id".to_string(), id_feat.clone())]);
        for (a, f) in attrs {
            subgraph.insert(Triple::new(concept.clone(), v.has_feature.clone(), feat(*f)));
            feature_map.insert(a.clone(), feat(*f));
        }
        let wrapper = WrapperSchema::new(format!("v{version}"), "api", ["id"], attrs.keys().cloned())
            .expect("valid stream wrapper");
        ReleaseDescriptor::describe(&Release { wrapper, subgraph, feature_map }, &ds, Some(format!("v{version}.csv")))
    };
    releases.push(snapshot(&attrs, 1));
    kinds.push("initial");

    let mut plan: Vec<&'static str> = vec!["major"; majors];
    plan.extend(std::iter::repeat_n("minor", minors));
    for (n, kind) in plan.into_iter().enumerate() {
        let changes = if kind == "major" { 6 + rng.gen_range(0..4) } else { 1 };
        for k in 0..changes {
            let op = if kind == "major" { rng.gen_range(0..3) } else { (n + k) % 3 };
            match op {
                0 => {
                    fresh(&mut attrs, next_feature);
                    next_feature += 1;
                }
                1 if !attrs.is_empty() => {
                    let victim = attrs.keys().nth(rng.gen_range(0..attrs.len())).cloned().expect("non-empty");
                    let f = attrs.remove(&victim).expect("present");
                    fresh(&mut attrs, f);
                }
                _ if attrs.len() > 1 => {
                    let victim = attrs.keys().nth(rng.gen_range(0..attrs.len())).cloned().expect("non-empty");
                    attrs.remove(&victim);
                }
                _ => {
                    fresh(&mut attrs, next_feature);
                    next_feature += 1;
                }
            }
        }
        releases.push(snapshot(&attrs, n + 2));
        kinds.push(kind);
    }
    assert!(next_feature <= total_features, "feature pool exhausted");
    ReleaseStream { global: ds, releases, kinds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub index: usize,
    pub name: String,
    pub stats: GrowthStats,
    pub bound: usize,
    pub new_source: bool,
    pub cumulative: usize,
    pub global_quads: usize,
}

impl GrowthRow {
    pub const HEADER: &'static str = "release,name,new_source,added,bound,cumulative,global_quads";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.index,
            self.name,
            self.new_source,
            self.stats.total(),
            self.bound,
            self.cumulative,
            self.global_quads
        )
    }
}

/// Applies descriptors in order, recording per-release growth.
pub fn replay(ds: &mut Dataset, releases: &[ReleaseDescriptor]) -> Result<Vec<GrowthRow>, ReleaseError> {
    let g = vocab().global_graph.clone();
    let mut cumulative = 0;
    let mut rows = Vec::with_capacity(releases.len());
    for (i, d) in releases.iter().enumerate() {
        let r = d.resolve(ds)?;
        let stats = apply_release(ds, &r)?;
        cumulative += stats.total();
        rows.push(GrowthRow {
            index: i + 1,
            name: r.wrapper.name.clone(),
            stats,
            bound: r.growth_bound(),
            new_source: stats.source > 0,
            cumulative,
            global_quads: ds.graph_len(&g),
        });
    }
    Ok(rows)
}

/// Least-squares line through the points: `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
