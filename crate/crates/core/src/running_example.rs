//! The SUPERSEDE running example: VoD monitors, feedback gathering tools and
//! the applications they observe, served by wrappers w1..w3 and, after the
//! monitoring API evolves, w4.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use crate::quadstore::Dataset;
use crate::release::{apply_release, GrowthStats, ReleaseDescriptor, ReleaseError, WrapperDescriptor};

pub const SUP: &str = "http://www.supersede.eu/ontology/";

/// For each application, the lag ratio of its monitors.
pub const LAG_RATIO_QUERY: &str = "\
SELECT ?x ?y
FROM G:
WHERE {
  VALUES (?x ?y) { (sup:applicationId sup:lagRatio) }
  sc:SoftwareApplication G:hasFeature sup:applicationId .
  sc:SoftwareApplication sup:hasMonitor sup:Monitor .
  sup:Monitor sup:generatesQoS sup:InfoMonitor .
  sup:InfoMonitor G:hasFeature sup:lagRatio
}
";

/// Projects concepts instead of features.
pub const CONCEPTS_QUERY: &str = "\
SELECT ?x, ?y, ?z
FROM G:
WHERE {
  VALUES (?x ?y ?z) {
    (sc:SoftwareApplication sup:Monitor sup:FeedbackGathering)
  }
  sc:SoftwareApplication sup:hasMonitor sup:Monitor .
  sc:SoftwareApplication sup:hasFGTool sup:FeedbackGathering
}
";

const GLOBAL: &[(&str, &str, &str)] = &[
    ("sc:SoftwareApplication", "rdf:type", "G:Concept"),
    ("sup:Monitor", "rdf:type", "G:Concept"),
    ("sup:InfoMonitor", "rdf:type", "G:Concept"),
    ("sup:FeedbackGathering", "rdf:type", "G:Concept"),
    ("sup:UserFeedback", "rdf:type", "G:Concept"),
    ("sup:applicationId", "rdf:type", "G:Feature"),
    ("sup:monitorId", "rdf:type", "G:Feature"),
    ("sup:feedbackGatheringId", "rdf:type", "G:Feature"),
    ("sup:lagRatio", "rdf:type", "G:Feature"),
    ("sup:description", "rdf:type", "G:Feature"),
    ("sup:applicationId", "rdfs:subClassOf", "sc:identifier"),
    ("sup:monitorId", "rdfs:subClassOf", "sc:identifier"),
    ("sup:feedbackGatheringId", "rdfs:subClassOf", "sc:identifier"),
    ("sc:SoftwareApplication", "G:hasFeature", "sup:applicationId"),
    ("sup:Monitor", "G:hasFeature", "sup:monitorId"),
    ("sup:FeedbackGathering", "G:hasFeature", "sup:feedbackGatheringId"),
    ("sup:InfoMonitor", "G:hasFeature", "sup:lagRatio"),
    ("sup:UserFeedback", "G:hasFeature", "sup:description"),
    ("sc:SoftwareApplication", "sup:hasMonitor", "sup:Monitor"),
    ("sc:SoftwareApplication", "sup:hasFGTool", "sup:FeedbackGathering"),
    ("sup:Monitor", "sup:generatesQoS", "sup:InfoMonitor"),
    ("sup:FeedbackGathering", "sup:generatesOpinion", "sup:UserFeedback"),
    ("xsd:string", "rdf:type", "rdfs:Datatype"),
    ("xsd:integer", "rdf:type", "rdfs:Datatype"),
    ("xsd:double", "rdf:type", "rdfs:Datatype"),
    ("sup:applicationId", "G:hasDataType", "xsd:string"),
    ("sup:monitorId", "G:hasDataType", "xsd:integer"),
    ("sup:feedbackGatheringId", "G:hasDataType", "xsd:integer"),
    ("sup:lagRatio", "G:hasDataType", "xsd:double"),
    ("sup:description", "G:hasDataType", "xsd:string"),
];

/// The Global graph alone, with the `sup` prefix registered.
pub fn global_graph() -> Dataset {
    let mut ds = Dataset::new();
    ds.add_prefix("sup", SUP);
    for (s, p, o) in GLOBAL {
        ds.insert_terms("G:", s, p, o).expect("static terms resolve");
    }
    ds
}

fn descriptor(
    name: &str,
    source: &str,
    ids: &[&str],
    non_ids: &[&str],
    subgraph: &[(&str, &str, &str)],
    map: &[(&str, &str)],
) -> ReleaseDescriptor {
    let owned = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
    ReleaseDescriptor {
        prefixes: BTreeMap::from([("sup".to_string(), SUP.to_string())]),
        wrapper: WrapperDescriptor {
            name: name.into(),
            source: source.into(),
            id_attributes: owned(ids),
            non_id_attributes: owned(non_ids),
            data_file: Some(format!("{name}.csv")),
        },
        subgraph: subgraph.iter().map(|(s, p, o)| [s.to_string(), p.to_string(), o.to_string()]).collect(),
        feature_map: map.iter().map(|(a, f)| (a.to_string(), f.to_string())).collect(),
    }
}

pub fn w1() -> ReleaseDescriptor {
    descriptor(
        "w1",
        "D1",
        &["VoDmonitorId"],
        &["lagRatio"],
        &[
            ("sup:Monitor", "G:hasFeature", "sup:monitorId"),
            ("sup:Monitor", "sup:generatesQoS", "sup:InfoMonitor"),
            ("sup:InfoMonitor", "G:hasFeature", "sup:lagRatio"),
        ],
        &[("VoDmonitorId", "sup:monitorId"), ("lagRatio", "sup:lagRatio")],
    )
}

pub fn w2() -> ReleaseDescriptor {
    descriptor(
        "w2",
        "D2",
        &["FGId"],
        &["tweet"],
        &[
            ("sup:FeedbackGathering", "G:hasFeature", "sup:feedbackGatheringId"),
            ("sup:FeedbackGathering", "sup:generatesOpinion", "sup:UserFeedback"),
            ("sup:UserFeedback", "G:hasFeature", "sup:description"),
        ],
        &[("FGId", "sup:feedbackGatheringId"), ("tweet", "sup:description")],
    )
}

pub fn w3() -> ReleaseDescriptor {
    descriptor(
        "w3",
        "D3",
        &["TargetApp", "MonitorId", "FeedbackId"],
        &[],
        &[
            ("sc:SoftwareApplication", "G:hasFeature", "sup:applicationId"),
            ("sc:SoftwareApplication", "sup:hasMonitor", "sup:Monitor"),
            ("sup:Monitor", "G:hasFeature", "sup:monitorId"),
            ("sc:SoftwareApplication", "sup:hasFGTool", "sup:FeedbackGathering"),
            ("sup:FeedbackGathering", "G:hasFeature", "sup:feedbackGatheringId"),
        ],
        &[
            ("TargetApp", "sup:applicationId"),
            ("MonitorId", "sup:monitorId"),
            ("FeedbackId", "sup:feedbackGatheringId"),
        ],
    )
}

/// The monitoring API renames `lagRatio` to `bufferingRatio`.
pub fn w4() -> ReleaseDescriptor {
    descriptor(
        "w4",
        "D1",
        &["VoDmonitorId"],
        &["bufferingRatio"],
        &[
            ("sup:InfoMonitor", "G:hasFeature", "sup:lagRatio"),
            ("sup:Monitor", "sup:generatesQoS", "sup:InfoMonitor"),
            ("sup:Monitor", "G:hasFeature", "sup:monitorId"),
        ],
        &[("VoDmonitorId", "sup:monitorId"), ("bufferingRatio", "sup:lagRatio")],
    )
}

pub const W1_CSV: &str = "VoDmonitorId,lagRatio\n12,0.75\n12,0.90\n18,0.1\n";
pub const W2_CSV: &str = "FGId,tweet\n77,I continuously see the loading symbol\n45,Your video player is great!\n";
pub const W3_CSV: &str = "TargetApp,MonitorId,FeedbackId\n1,12,77\n2,18,45\n";
/// Replays w1's rows under the new name plus one new measurement.
pub const W4_CSV: &str = "VoDmonitorId,bufferingRatio\n12,0.75\n12,0.90\n18,0.1\n18,0.3\n";

/// Expected answer of [`LAG_RATIO_QUERY`] over w1..w3.
pub const EXPECTED_ROWS: [(&str, &str); 3] = [("1", "0.75"), ("1", "0.90"), ("2", "0.1")];

/// Applies the given releases in order to the Global graph.
pub fn build(releases: &[ReleaseDescriptor]) -> Result<(Dataset, Vec<GrowthStats>), ReleaseError> {
    let mut ds = global_graph();
    let mut stats = Vec::new();
    for d in releases {
        let r = d.resolve(&mut ds)?;
        stats.push(apply_release(&mut ds, &r)?);
    }
    Ok((ds, stats))
}

/// The pre-evolution dataset (w1, w2, w3).
pub fn dataset() -> Dataset {
    build(&[w1(), w2(), w3()]).expect("running example releases apply").0
}

/// The post-evolution dataset (w1..w4).
pub fn evolved_dataset() -> Dataset {
    build(&[w1(), w2(), w3(), w4()]).expect("running example releases apply").0
}

pub fn data_files() -> [(&'static str, &'static str); 4] {
    [("w1.csv", W1_CSV), ("w2.csv", W2_CSV), ("w3.csv", W3_CSV), ("w4.csv", W4_CSV)]
}

/// Writes `global.quads`, the four release descriptors, their data files and
/// the two example queries into `dir`.
pub fn write_to_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("global.quads"), global_graph().to_quad_string())?;
    for (name, d) in [("w1", w1()), ("w2", w2()), ("w3", w3()), ("w4", w4())] {
        fs::write(dir.join(format!("{name}.json")), d.to_json() + "\n")?;
    }
    for (name, body) in data_files() {
        fs::write(dir.join(name), body)?;
    }
    fs::write(dir.join("lag_ratio.rq"), LAG_RATIO_QUERY)?;
    fs::write(dir.join("concepts.rq"), CONCEPTS_QUERY)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_ontology;

    #[test]
    fn datasets_are_valid() {
        for ds in [global_graph(), dataset(), evolved_dataset()] {
            let r = validate_ontology(&ds);
            assert!(r.is_ok(), "{}", r.render(ds.prefixes()));
        }
    }

    #[test]
    fn releases_survive_json() {
        for d in [w1(), w2(), w3(), w4()] {
            assert_eq!(ReleaseDescriptor::from_json(&d.to_json()).unwrap(), d);
        }
    }
}
