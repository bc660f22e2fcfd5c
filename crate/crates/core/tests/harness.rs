mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use common::{Reply, Stub};
use deskloop::agent::{digest_hex, AgentConfig};
use deskloop::bench::{
    augment_task, load_tasks, materialize, replay_trace, report_table, run_suite, run_task, validate_task,
    write_outputs, AugmentRequest, Category, FamilyDoc, GtPlan, HarnessError, HttpProvider, RunReport, SuiteOptions,
    TaskKind, TraceFile,
};
use deskloop::gateway::{
    ChatBackend, ChatRequest, GatewayConfig, GatewayError, HttpBackend, Message, Part, RoleTag, Speaker,
};
use deskloop::sim::EnvState;

/// Copy of one family manifest and the scenarios, laid out like the bundle.
fn scratch_family(family: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scenarios");
    std::fs::create_dir(&scen).unwrap();
    for e in std::fs::read_dir(common::assets().join("scenarios")).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, scen.join(p.file_name().unwrap())).unwrap();
    }
    std::fs::create_dir(dir.path().join("tasks")).unwrap();
    let file = dir.path().join("tasks").join(format!("{family}.json"));
    std::fs::copy(common::assets().join(format!("tasks/{family}.json")), &file).unwrap();
    (dir, file)
}

#[test]
fn bundled_corpus_has_five_families_with_variants() {
    let tasks = common::all_tasks();
    let metas: Vec<_> = tasks.iter().filter(|t| t.kind.is_meta()).collect();
    assert!(metas.len() >= 5);
    for m in &metas {
        let variants: Vec<_> = tasks.iter().filter(|t| t.parent.as_deref() == Some(m.id.as_str())).collect();
        assert!(variants.len() >= 3, "{} has {} variants", m.id, variants.len());
        assert!(variants.iter().all(|v| v.family == m.family && v.category == m.category));
    }
    let kinds: std::collections::BTreeSet<_> = tasks.iter().map(|t| t.kind).collect();
    assert_eq!(kinds.len(), 4);
    let cats: std::collections::BTreeSet<_> = tasks.iter().map(|t| t.category).collect();
    assert!(cats.contains(&Category::Office) && cats.contains(&Category::WinUsage) && cats.contains(&Category::Web));
}

#[test]
fn every_gt_plan_validates() {
    for t in common::all_tasks() {
        let v = validate_task(&t).unwrap();
        assert_eq!(v.reward, 1, "{}", t.id);
        assert_ne!(v.initial_digest, v.final_digest, "{}", t.id);
    }
}

#[test]
fn manifest_errors_name_the_task_and_field() {
    let (dir, file) = scratch_family("excel_merge");
    let mut doc = FamilyDoc::read(&file).unwrap();
    doc.tasks[1].parent = None;
    doc.write(&file).unwrap();
    let err = load_tasks(&file).unwrap_err();
    assert_eq!((err.task.as_deref(), err.field.as_str()), (Some("excel_merge_add_data_tab"), "parent"));

    let mut doc = FamilyDoc::read(&file).unwrap();
    doc.tasks[1].parent = Some("excel_merge_meta".into());
    doc.tasks[0].gt_plan.0[0].subtasks[1].action = "click(412)".into();
    doc.write(&file).unwrap();
    let err = load_tasks(&file).unwrap_err();
    assert_eq!(err.field, "gt_plan[0].subtasks[1].action");

    let text = std::fs::read_to_string(common::assets().join("tasks/excel_merge.json")).unwrap();
    std::fs::write(&file, text.replace("\"difficulty\": \"simple\"", "\"difficulty\": \"trivial\"")).unwrap();
    let err = load_tasks(&file).unwrap_err();
    assert_eq!(err.field, "difficulty");

    std::fs::copy(common::assets().join("tasks/excel_merge.json"), &file).unwrap();
    std::fs::copy(&file, dir.path().join("tasks/copy.json")).unwrap();
    let err = load_tasks(&dir.path().join("tasks")).unwrap_err();
    assert_eq!(err.message, "duplicate task id");

    let empty = tempfile::tempdir().unwrap();
    assert!(load_tasks(empty.path()).unwrap().is_empty());
}

#[test]
fn materialized_states_reflect_pre_actions() {
    let meta = common::task("excel_merge_meta");
    let scenario = deskloop::bench::load_scenario_file(&meta.scenario_ref).unwrap();
    assert_eq!(materialize(&meta).unwrap().digest(), EnvState::initial(&scenario, &BTreeMap::new()).digest());

    let selected = |st: &EnvState, row: u8| {
        ('A'..='K').filter(|c| st.widget(&format!("cell_{c}{row}")).unwrap().selected).count()
    };
    let adjust = materialize(&common::task("excel_merge_adjust_wrong_row")).unwrap();
    assert_eq!((selected(&adjust, 1), selected(&adjust, 2)), (0, 11));
    let trim = materialize(&common::task("excel_merge_trim_selected")).unwrap();
    assert_eq!((selected(&trim, 1), selected(&trim, 2)), (11, 0));
    let add = materialize(&common::task("excel_merge_add_data_tab")).unwrap();
    assert!(add.widget("tab_data").unwrap().selected);
    assert!(!add.widget("tab_home").unwrap().selected);
}

#[test]
fn augment_appends_a_validated_variant() {
    let (_dir, file) = scratch_family("excel_merge");
    let before = load_tasks(&file).unwrap().len();
    let parent = common::task("excel_merge_meta");
    let merge_only = GtPlan(vec![deskloop::bench::GtMilestone {
        title: "Merge the first row".into(),
        subtasks: vec![parent.gt_plan.0[0].subtasks[1].clone()],
    }]);
    let req = AugmentRequest {
        parent: "excel_merge_meta".into(),
        kind: TaskKind::TrimStep,
        pre_actions: "moveTo(110, 255)\ndragTo(1110, 255, 1)".into(),
        id: None,
        gt_plan: Some(merge_only.clone()),
    };
    let id = augment_task(&file, &req).unwrap();
    assert_eq!(id, "excel_merge_meta_trim_1");
    let tasks = load_tasks(&file).unwrap();
    assert_eq!(tasks.len(), before + 1);
    let added = tasks.iter().find(|t| t.id == id).unwrap();
    assert_eq!((added.kind, added.parent.as_deref()), (TaskKind::TrimStep, Some("excel_merge_meta")));
    assert_eq!(augment_task(&file, &req).unwrap(), "excel_merge_meta_trim_2");

    // Merging the wrong row must not validate, and the file stays untouched.
    let snapshot = std::fs::read_to_string(&file).unwrap();
    let bad = AugmentRequest {
        kind: TaskKind::AdjustStep,
        pre_actions: "moveTo(110, 285)\ndragTo(1110, 285, 1)".into(),
        ..req.clone()
    };
    assert!(matches!(augment_task(&file, &bad), Err(HarnessError::Task { .. })));
    assert_eq!(std::fs::read_to_string(&file).unwrap(), snapshot);

    let meta = AugmentRequest { kind: TaskKind::Meta, ..req.clone() };
    assert!(matches!(augment_task(&file, &meta), Err(HarnessError::Config(_))));
    let orphan = AugmentRequest { parent: "nope".into(), ..req };
    assert!(matches!(augment_task(&file, &orphan), Err(HarnessError::Config(_))));
}

fn oracle_trace(id: &str) -> TraceFile {
    let run = run_task(&common::task(id), &common::oracle_provider(), &SuiteOptions::default());
    assert_eq!(run.row.reward, 1, "{id}: {:?}", run.row.error);
    run.trace.unwrap()
}

#[test]
fn replay_detects_tampering() {
    let trace = oracle_trace("excel_merge_adjust_wrong_row");
    let back = TraceFile::from_jsonl(&trace.to_jsonl()).unwrap();
    assert_eq!(back, trace);
    let ok = replay_trace(&back, Path::new(".")).unwrap();
    assert_eq!(ok.actions, trace.entries.iter().filter(|e| e.action.is_some()).count());
    // The oracle acts out the GT plan, so both end in the same state.
    let gt = validate_task(&common::task("excel_merge_adjust_wrong_row")).unwrap();
    assert_eq!(ok.final_digest, gt.final_digest);

    let acted = trace.entries.iter().position(|e| e.action.is_some()).unwrap();
    let mut t = trace.clone();
    t.entries[acted].digest_after = Some(digest_hex(0));
    assert!(matches!(
        replay_trace(&t, Path::new(".")),
        Err(HarnessError::ReplayMismatch { entry, field: "digest_after", .. }) if entry == acted
    ));

    let mut t = trace.clone();
    t.entries[acted].action = Some("click(5, 5)".into());
    assert!(matches!(replay_trace(&t, Path::new(".")), Err(HarnessError::ReplayMismatch { .. })));

    let mut t = trace.clone();
    t.header.pre_actions = String::new();
    assert!(matches!(
        replay_trace(&t, Path::new(".")),
        Err(HarnessError::ReplayMismatch { field: "initial digest", .. })
    ));

    let bumped = trace.to_jsonl().replacen("\"schema_version\":1", "\"schema_version\":99", 1);
    assert_ne!(bumped, trace.to_jsonl());
    assert!(TraceFile::from_jsonl(&bumped).is_err());
}

#[test]
fn parallel_runs_match_sequential_runs() {
    let tasks = common::all_tasks();
    let provider = common::oracle_provider();
    let seq = run_suite(&tasks, &provider, &SuiteOptions::default()).unwrap();
    let par = run_suite(&tasks, &provider, &SuiteOptions { parallel: 4, ..SuiteOptions::default() }).unwrap();
    assert_eq!(seq.0.to_json(), par.0.to_json());
    let ids: Vec<_> = par.0.rows.iter().map(|r| r.id.clone()).collect();
    assert_eq!(ids, tasks.iter().map(|t| t.id.clone()).collect::<Vec<_>>());
    for (a, b) in seq.1.iter().zip(&par.1) {
        assert_eq!(a.trace.as_ref().unwrap().to_jsonl(), b.trace.as_ref().unwrap().to_jsonl());
    }
}

#[test]
fn outputs_round_trip_through_disk() {
    let tasks = common::subset(&["web_form_meta".into(), "web_form_popup_cookie".into()]);
    let (report, runs) = common::run(&tasks, &common::oracle_provider(), AgentConfig::default());
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &report, &runs).unwrap();
    assert_eq!(RunReport::load(dir.path()).unwrap(), report);
    for t in &tasks {
        let text = std::fs::read_to_string(dir.path().join(format!("traces/{}.jsonl", t.id))).unwrap();
        let tf = TraceFile::from_jsonl(&text).unwrap();
        assert_eq!(tf.header.task_id, t.id);
        replay_trace(&tf, Path::new(".")).unwrap();
    }
    let timings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("timings.json")).unwrap()).unwrap();
    assert!(timings.is_object());
    assert_eq!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap(), report.table() + "\n");
}

#[test]
fn empty_suite_reports_not_applicable() {
    let (report, runs) = run_suite(&[], &common::oracle_provider(), &SuiteOptions::default()).unwrap();
    assert!(runs.is_empty());
    assert_eq!(report.overall().sr_text(), "n/a");
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["overall"]["sr"], "n/a");
    assert_eq!(json["categories"]["office"]["meta"]["attempts"], 0);
    let table = report_table(&report);
    assert!(table.contains("--"));
    assert!(!table.contains("NaN"));
}

#[test]
fn missing_scripted_rules_are_a_task_error() {
    let empty = tempfile::tempdir().unwrap();
    let provider = deskloop::bench::ScriptedProvider::new(vec![empty.path().to_path_buf()]);
    let run = run_task(&common::task("excel_merge_meta"), &provider, &SuiteOptions::default());
    assert_eq!(run.row.reward, 0);
    assert!(run.row.error.as_deref().is_some_and(|e| e.contains("no scripted rules")));
}

fn ping() -> ChatRequest {
    ChatRequest {
        role_tag: RoleTag::Planner,
        messages: vec![
            Message { speaker: Speaker::System, parts: vec![Part::Text("sys".into())] },
            Message { speaker: Speaker::User, parts: vec![Part::Text("hello".into())] },
        ],
        max_tokens: 16,
        temperature: 0.0,
    }
}

fn http(url: &str, timeout_secs: u64) -> HttpBackend {
    HttpBackend::new(GatewayConfig {
        endpoint: url.into(),
        model: "stub-model".into(),
        api_key: Some("k1".into()),
        timeout_secs,
    })
}

#[test]
fn http_backend_sends_the_wire_shape_and_reads_the_reply() {
    let stub = Stub::start(|_| Reply::Text("pong".into()));
    assert_eq!(http(&stub.url, 5).complete(&ping()).unwrap(), "pong");
    let seen = stub.bodies();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer k1"));
    assert_eq!(common::check_wire_shape(&seen[0].body, "stub-model"), Ok(0));
}

#[test]
fn http_errors_surface_as_gateway_errors() {
    let stub = Stub::start(|_| Reply::Status(500, "{\"error\":\"boom\"}".into()));
    match http(&stub.url, 5).complete(&ping()) {
        Err(GatewayError::Http { status: 500, body }) => assert!(body.contains("boom")),
        other => panic!("{other:?}"),
    }
    let run = run_task(
        &common::task("excel_merge_meta"),
        &HttpProvider(http(&stub.url, 5)),
        &SuiteOptions::default(),
    );
    assert_eq!(run.row.reward, 0);
    assert!(run.row.error.as_deref().is_some_and(|e| e.contains("500")), "{:?}", run.row.error);

    let slow = Stub::start(|_| Reply::Hang(Duration::from_millis(2500)));
    assert!(matches!(http(&slow.url, 1).complete(&ping()), Err(GatewayError::Timeout)));

    let garbage = Stub::start(|_| Reply::Status(200, "not json".into()));
    assert!(matches!(http(&garbage.url, 5).complete(&ping()), Err(GatewayError::Protocol(_))));
}
