use proptest::prelude::*;

use ptrgraph::dot::{to_dot, Highlight};
use ptrgraph::json::{
    decode, graph_from_json, graph_to_json, FormatError, GraphDocument, SessionSnapshot, TraceDocument,
};
use ptrgraph_core::constraints::ConstraintCatalog;
use ptrgraph_core::pointer_model::{build_start_graph, required_addresses, textbook_declarations};
use ptrgraph_core::simulator::run;
use ptrgraph_core::{isomorphic, IsoOptions, Session, SessionConfig};

const PROGRAM: &str = "s=*age;\nagep=age;\nagep=&age[3];\n*maxp=t;\n";

fn textbook(pool: usize) -> ptrgraph_core::InstanceGraph {
    let d = textbook_declarations();
    build_start_graph(&d, required_addresses(&d) + pool).unwrap()
}

#[test]
fn start_graph_dot_is_golden() {
    let golden = include_str!("data/start.dot");
    assert_eq!(to_dot(&textbook(2), &Highlight::new()), golden);
}

#[test]
fn trace_round_trips() {
    let out = run(
        &textbook_declarations(),
        PROGRAM,
        &[],
        SessionConfig {
            free_pool: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let doc = TraceDocument::from_session(&out.session, None);
    let text = serde_json::to_string(&doc).unwrap();
    let back: TraceDocument = decode(&text).unwrap();
    assert_eq!(back, doc);
    for (step, state) in back.steps.iter().zip(&out.session.states()[1..]) {
        assert_eq!(&step.graph.to_graph().unwrap(), *state);
    }
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = 2.into();
    assert!(matches!(
        decode::<TraceDocument>(&v.to_string()),
        Err(FormatError::UnsupportedVersion(2))
    ));
}

#[test]
fn witnesses_are_dotted_red() {
    let mut g = textbook(1);
    let p = g
        .nodes_of_type("Pointer")
        .find(|p| g.successors(*p, "ref").next().is_none())
        .unwrap();
    let free = g.nodes_of_type("Address").last().unwrap();
    g.add_edge(p, "ref", free).unwrap();
    let cc = ConstraintCatalog::standard();
    let reports = cc.check_referential_integrity(&g);
    let dot = to_dot(&g, &Highlight::new().witnesses(&reports));
    let styled: Vec<&str> = dot.lines().filter(|l| l.contains("style=dotted")).collect();
    assert!(styled.iter().any(|l| l.starts_with(&format!("  {p} "))), "{dot}");
    assert!(styled.iter().any(|l| l.starts_with(&format!("  {free} "))), "{dot}");
    assert!(styled.iter().any(|l| l.contains(&format!("{p} -> {free}"))), "{dot}");
}

#[test]
fn snapshot_restores_what_ifs_with_params() {
    let mut s = Session::new(&textbook_declarations(), SessionConfig::default()).unwrap();
    s.step("agep=age;").unwrap();
    let params = [("value".to_string(), ptrgraph_core::Value::Int(11))]
        .into_iter()
        .collect();
    s.apply_what_if("ext:assignInt", 0, &params).unwrap();
    let snap = SessionSnapshot::capture("abc", &s, 7);
    let back: SessionSnapshot = decode(&serde_json::to_string(&snap).unwrap()).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.restore().unwrap().state(), s.state());
}

fn session_states(seed: u64) -> Vec<ptrgraph_core::InstanceGraph> {
    let stmts = [
        "s=*age;",
        "agep=age;",
        "agep=&age[2];",
        "*agep=s;",
        "maxp=agep;",
        "t=*maxp;",
        "*maxp=7;",
        "agep=&age[0];",
    ];
    let mut s = Session::new(
        &textbook_declarations(),
        SessionConfig {
            free_pool: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let mut x = seed;
    for _ in 0..6 {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let _ = s.step(stmts[(x >> 33) as usize % stmts.len()]);
    }
    s.states().into_iter().cloned().collect()
}

proptest! {
    #[test]
    fn graph_json_round_trip_preserves_everything(seed in any::<u64>()) {
        for g in session_states(seed) {
            let back = graph_from_json(&graph_to_json(&g)).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert!(isomorphic(&back, &g, IsoOptions::default()).is_some());
            let doc = GraphDocument::from_graph(&g);
            prop_assert_eq!(GraphDocument::from_graph(&back), doc);
        }
    }

    #[test]
    fn dot_is_deterministic(seed in any::<u64>()) {
        for g in session_states(seed) {
            let again = graph_from_json(&graph_to_json(&g)).unwrap();
            prop_assert_eq!(to_dot(&g, &Highlight::new()), to_dot(&again, &Highlight::new()));
        }
    }
}
