use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use ptrgraph::json::{GraphDocument, TraceDocument};
use ptrgraph::service::{router, AppState, ServiceConfig, OPENAPI, ROUTES};
use ptrgraph_core::iso::signature;
use ptrgraph_core::pointer_model::{build_start_graph, required_addresses, textbook_declarations};
use ptrgraph_core::simulator::run;
use ptrgraph_core::{isomorphic, IsoOptions, SessionConfig};

const DECLS: &str = "int s = 0, t = 0;\nint age[] = { 30, 65, 41, 23 };\nint *agep, *maxp;";
const PROGRAM: [&str; 4] = ["s=*age;", "agep=age;", "agep=&age[3];", "*maxp=t;"];

async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
    if_match: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(v) = if_match {
        req = req.header("if-match", v);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

async fn create(app: &Router, pool: usize) -> String {
    let (st, v) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"decls": DECLS, "config": {"freePool": pool}})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    v["sessionId"].as_str().unwrap().to_string()
}

fn app() -> (Arc<AppState>, Router) {
    let state = AppState::new(ServiceConfig::default());
    (state.clone(), router(state))
}

#[tokio::test]
async fn create_returns_the_start_graph() {
    let (_, app) = app();
    let (st, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"decls": DECLS, "config": {"freePool": 2}})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    let doc: GraphDocument = serde_json::from_value(v["graph"].clone()).unwrap();
    let decls = textbook_declarations();
    let expected = build_start_graph(&decls, required_addresses(&decls) + 2).unwrap();
    assert_eq!(doc.nodes.len(), 16);
    assert_eq!(doc.nodes.len(), expected.node_count());
    assert!(isomorphic(&doc.to_graph().unwrap(), &expected, IsoOptions::default()).is_some());
    assert!(v["reports"].as_array().unwrap().iter().all(|r| r["holds"] == true));
}

#[tokio::test]
async fn statements_report_rules_and_domain_errors() {
    let (_, app) = app();
    let id = create(&app, 2).await;
    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/statements"),
        Some(json!({"text": "agep=age;"})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["rule"], "nullPointerReferent");
    assert_eq!(v["kind"], "statement");
    assert_eq!(v["historyLength"], 1);
    assert_eq!(v["diff"]["createdEdges"].as_array().unwrap().len(), 1);

    let id = create(&app, 2).await;
    let before = call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await.1;
    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/statements"),
        Some(json!({"text": "s=*agep;"})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["kind"], "NullDereference");
    assert_eq!(
        call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await.1,
        before
    );

    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/statements"),
        Some(json!({"text": "s = = 1;"})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["kind"], "SyntaxError");
    assert_eq!(v["position"]["line"], 1);
}

#[tokio::test]
async fn error_statuses() {
    let (_, app) = app();
    let missing = "0123456789abcdef0123456789abcdef";
    assert_eq!(
        call(&app, "GET", &format!("/sessions/{missing}/graph"), None, None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, "GET", "/sessions/../../etc/graph", None, None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(call(&app, "GET", "/nowhere", None, None).await.0, StatusCode::NOT_FOUND);

    let (st, v) = call(&app, "POST", "/sessions", Some(json!({"declarations": DECLS})), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["kind"], "MalformedBody");
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({"decls": "int s; int s;"})), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let id = create(&app, 2).await;
    let uri = format!("/sessions/{id}/statements");
    let req = Request::builder()
        .method("POST")
        .uri(&uri)
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(
        app.clone().oneshot(req).await.unwrap().status(),
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        call(&app, "POST", &uri, Some(json!({"txt": "s=1;"})), None).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        call(&app, "GET", &format!("/sessions/{id}/matches"), None, None)
            .await
            .0,
        StatusCode::BAD_REQUEST
    );

    let (st, v) = call(
        &app,
        "GET",
        &format!("/sessions/{id}/matches?rule=noSuchRule"),
        None,
        None,
    )
    .await;
    assert_eq!(
        (st, v["kind"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("UnknownRule"))
    );
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/undo"), None, None).await;
    assert_eq!(
        (st, v["kind"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("EmptyHistory"))
    );

    assert_eq!(
        call(&app, "POST", &uri, Some(json!({"text": "s=1;"})), Some("0"))
            .await
            .0,
        StatusCode::OK
    );
    let (st, v) = call(&app, "POST", &uri, Some(json!({"text": "s=2;"})), Some("0")).await;
    assert_eq!((st, v["kind"].as_str()), (StatusCode::CONFLICT, Some("Conflict")));
    assert_eq!(
        call(&app, "POST", &uri, Some(json!({"text": "s=2;"})), Some("\"1\""))
            .await
            .0,
        StatusCode::OK
    );
    assert_eq!(
        call(&app, "POST", &uri, Some(json!({"text": "s=2;"})), Some("x"))
            .await
            .0,
        StatusCode::BAD_REQUEST
    );

    assert_eq!(
        call(&app, "DELETE", &format!("/sessions/{id}"), None, None).await.0,
        StatusCode::NO_CONTENT
    );
    assert_eq!(
        call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn what_if_matches_apply_and_undo() {
    let (_, app) = app();
    let id = create(&app, 2).await;
    let (st, v) = call(
        &app,
        "GET",
        &format!("/sessions/{id}/matches?rule=pointerArray"),
        None,
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    let ms = v.as_array().unwrap();
    assert_eq!(ms.len(), 2);
    let targets: BTreeSet<&str> = ms
        .iter()
        .flat_map(|m| m["bindings"].as_array().unwrap())
        .filter(|b| b["role"] == "pointer")
        .map(|b| b["label"].as_str().unwrap())
        .collect();
    assert_eq!(targets, BTreeSet::from(["agep", "maxp"]));
    let (_, v) = call(
        &app,
        "GET",
        &format!("/sessions/{id}/matches?rule=copyReferent"),
        None,
        None,
    )
    .await;
    assert_eq!(v.as_array().unwrap().len(), 2);

    let (_, rules) = call(&app, "GET", &format!("/sessions/{id}/rules"), None, None).await;
    let names: Vec<&str> = rules
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"pointerArray") && names.contains(&"newPointer"));
    assert!(rules
        .as_array()
        .unwrap()
        .iter()
        .all(|r| !r["description"].as_str().unwrap().is_empty()));

    let before = call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await.1;
    let nodes = before["graph"]["nodes"].as_array().unwrap().len();
    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/apply"),
        Some(json!({"rule": "newPointer", "matchIndex": 0})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["kind"], "whatIf");
    assert_eq!(v["graph"]["nodes"].as_array().unwrap().len(), nodes + 1);
    let created = v["diff"]["createdNodes"].clone();

    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/apply"),
        Some(json!({"rule": "newPointer", "matchIndex": 5})),
        None,
    )
    .await;
    assert_eq!(
        (st, v["kind"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("BadIndex"))
    );

    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/undo"), None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["kind"], "undo");
    assert_eq!(v["diff"]["deletedNodes"], created);
    assert_eq!(v["historyLength"], 0);
    assert_eq!(v["graph"], before["graph"]);
}

#[tokio::test]
async fn api_trace_matches_batch_run() {
    let (_, app) = app();
    let id = create(&app, 2).await;
    for st in PROGRAM {
        let (code, _) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/statements"),
            Some(json!({"text": st})),
            None,
        )
        .await;
        assert_eq!(code, StatusCode::OK);
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/trace"), None, None).await;
    let api: TraceDocument = serde_json::from_value(v).unwrap();
    let batch = run(
        &textbook_declarations(),
        &PROGRAM.join("\n"),
        &[],
        SessionConfig {
            free_pool: 2,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(batch.error.is_none());
    assert_eq!(api.steps.len(), 4);
    let batch_states = batch.session.states();
    let api_states: Vec<_> = std::iter::once(&api.start)
        .chain(api.steps.iter().map(|s| &s.graph))
        .map(|d| d.to_graph().unwrap())
        .collect();
    for (a, b) in api_states.iter().zip(batch_states) {
        assert!(isomorphic(a, b, IsoOptions::default()).is_some());
        assert_eq!(signature(a, IsoOptions::default()), signature(b, IsoOptions::default()));
    }
    let rules: Vec<_> = api.steps.iter().map(|s| s.rule.clone().unwrap()).collect();
    assert_eq!(
        rules,
        [
            "copyReferent",
            "nullPointerReferent",
            "pointerAssignedNewAddress",
            "nullPointerInt"
        ]
    );

    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/check"),
        Some(json!({"formula": "G (! notRIrefTofree & ! notRIrefWOcont)"})),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["holds"], true);
    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/check"),
        Some(json!({"formula": "G (("})),
        None,
    )
    .await;
    assert_eq!(
        (st, v["kind"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("SyntaxError"))
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_are_linearized() {
    let (_, app) = app();
    let id = create(&app, 2).await;
    let uri = format!("/sessions/{id}/statements");
    let mut tasks = Vec::new();
    for i in 0..24 {
        let app = app.clone();
        let uri = uri.clone();
        tasks.push(tokio::spawn(async move {
            call(&app, "POST", &uri, Some(json!({"text": format!("s={i};")})), None).await
        }));
    }
    let mut lengths = BTreeSet::new();
    for t in tasks {
        let (st, v) = t.await.unwrap();
        assert_eq!(st, StatusCode::OK);
        lengths.insert(v["historyLength"].as_u64().unwrap());
    }
    assert_eq!(lengths, (1..=24).collect());

    // interleaved undo and step: every success is reflected in the final length
    let mut tasks = Vec::new();
    for i in 0..20 {
        let app = app.clone();
        let id = id.clone();
        tasks.push(tokio::spawn(async move {
            if i % 2 == 0 {
                (
                    true,
                    call(&app, "POST", &format!("/sessions/{id}/undo"), None, None).await.0,
                )
            } else {
                (
                    false,
                    call(
                        &app,
                        "POST",
                        &format!("/sessions/{id}/statements"),
                        Some(json!({"text": "t=1;"})),
                        None,
                    )
                    .await
                    .0,
                )
            }
        }));
    }
    let mut expected = 24i64;
    for t in tasks {
        let (is_undo, st) = t.await.unwrap();
        assert_eq!(st, StatusCode::OK);
        expected += if is_undo { -1 } else { 1 };
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await;
    assert_eq!(v["historyLength"].as_i64().unwrap(), expected);

    // competing writers with the same precondition: exactly one wins
    let mut tasks = Vec::new();
    let at = expected.to_string();
    for _ in 0..8 {
        let app = app.clone();
        let uri = uri.clone();
        let at = at.clone();
        tasks.push(tokio::spawn(async move {
            call(&app, "POST", &uri, Some(json!({"text": "s=7;"})), Some(&at))
                .await
                .0
        }));
    }
    let mut codes = Vec::new();
    for t in tasks {
        codes.push(t.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::OK).count(), 1);
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CONFLICT).count(), 7);
}

#[tokio::test]
async fn sessions_are_independent() {
    let (_, app) = app();
    let a = create(&app, 2).await;
    let b = create(&app, 2).await;
    assert_ne!(a, b);
    call(
        &app,
        "POST",
        &format!("/sessions/{a}/statements"),
        Some(json!({"text": "s=*age;"})),
        None,
    )
    .await;
    let (_, v) = call(&app, "GET", &format!("/sessions/{b}/graph"), None, None).await;
    assert_eq!(v["historyLength"], 0);
}

#[tokio::test]
async fn persisted_sessions_survive_restart_and_eviction() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ttl: Duration::from_secs(60),
    };
    let first = AppState::new(config.clone());
    let app = router(first.clone());
    let id = create(&app, 2).await;
    for st in ["agep=age;", "s=*agep;"] {
        call(
            &app,
            "POST",
            &format!("/sessions/{id}/statements"),
            Some(json!({"text": st})),
            None,
        )
        .await;
    }
    call(
        &app,
        "POST",
        &format!("/sessions/{id}/apply"),
        Some(json!({"rule": "newInt", "matchIndex": 0})),
        None,
    )
    .await;
    let before = call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await.1;
    assert!(dir.path().join(format!("{id}.json")).exists());

    let restarted = router(AppState::new(config.clone()));
    let after = call(&restarted, "GET", &format!("/sessions/{id}/graph"), None, None)
        .await
        .1;
    assert_eq!(after, before);
    assert_eq!(after["historyLength"], 3);

    assert_eq!(first.evict(Instant::now() + Duration::from_secs(120)), 1);
    assert_eq!(first.session_count(), 0);
    let reloaded = call(&app, "GET", &format!("/sessions/{id}/graph"), None, None).await.1;
    assert_eq!(reloaded, before);
    assert_eq!(first.session_count(), 1);
}

#[tokio::test]
async fn idle_sessions_are_evicted() {
    let state = AppState::new(ServiceConfig {
        data_dir: None,
        ttl: Duration::from_secs(30),
    });
    let app = router(state.clone());
    let old = create(&app, 0).await;
    assert_eq!(state.evict(Instant::now() + Duration::from_secs(10)), 0);
    assert_eq!(state.evict(Instant::now() + Duration::from_secs(31)), 1);
    assert_eq!(
        call(&app, "GET", &format!("/sessions/{old}/graph"), None, None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[test]
fn openapi_lists_exactly_the_routes() {
    let doc: Value = serde_json::from_str(OPENAPI).unwrap();
    let mut documented = BTreeSet::new();
    for (path, ops) in doc["paths"].as_object().unwrap() {
        for method in ops.as_object().unwrap().keys() {
            documented.insert((method.clone(), path.clone()));
        }
    }
    let routed: BTreeSet<(String, String)> = ROUTES.iter().map(|(m, p)| (m.to_string(), p.to_string())).collect();
    assert_eq!(documented, routed);
}

#[tokio::test]
async fn openapi_is_served() {
    let (_, app) = app();
    let (st, v) = call(&app, "GET", "/openapi.json", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["openapi"], "3.0.3");
}
