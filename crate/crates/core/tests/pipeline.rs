use capkit_core::abstraction::{cell_name, holds};
use capkit_core::agents::{AgentHandle, AgentKind};
use capkit_core::domains::{bundled_world, Bundled};
use capkit_core::experiment::{
    discover, read_evidence, scaled_traces, write_artifacts, ExperimentError, RunConfig,
    DEFAULT_SEED, DEFAULT_TRACES, EVIDENCE_FILE, MODEL_FILE, QUERY_LOG_FILE, STATS_FILE,
    TRANSCRIPT_FILE,
};
use capkit_core::harvest::{generate_tasks, harvest_and_abstract};
use capkit_core::io::{export_model, export_stats, parse_model, STATS_COLUMNS};
use capkit_core::oracle::{check_consistency, check_local_connectivity, coverage_curve};
use capkit_core::query::QUERY_PLAN_BOUND;
use capkit_core::{abstract_state, ObjStatus, World};

fn zelda3() -> World {
    bundled_world("zelda3", 0).unwrap()
}

/// Start state of the 3×3 fixture with Ganon gone and Link on the cell
/// below Ganon's, facing it.
fn ganon_defeated(w: &World) -> capkit_core::ConcreteState {
    let mut goal = w.initial.clone();
    let ObjStatus::At(p) = goal.objects[0] else {
        panic!("ganon placed")
    };
    goal.objects[0] = ObjStatus::Gone;
    goal.agent = capkit_core::dsl::GridPos::new(p.row + 1, p.col);
    goal.facing = capkit_core::dsl::Direction::North;
    goal
}

#[test]
fn both_agents_defeat_ganon_with_a_final_interact() {
    let w = zelda3();
    let goal = ganon_defeated(&w);
    for mut agent in [AgentHandle::search(), AgentHandle::policy()] {
        let trace = agent.solve_task(&w, &w.initial, &goal).expect("solvable");
        assert_eq!(trace.last(), Some(&goal));
        let before = &trace[trace.len() - 2];
        assert!(matches!(before.objects[0], ObjStatus::At(_)));
        assert_eq!(before.agent, goal.agent);
    }
}

#[test]
fn defeat_step_changes_exactly_the_expected_atoms() {
    let w = zelda3();
    let u = &w.universe;
    let goal = ganon_defeated(&w);
    let trace = AgentHandle::search()
        .solve_task(&w, &w.initial, &goal)
        .unwrap();
    let a = abstract_state(&w, &trace[trace.len() - 2]);
    let b = abstract_state(&w, &trace[trace.len() - 1]);
    let ObjStatus::At(p) = w.initial.objects[0] else {
        unreachable!()
    };
    let cell = cell_name(p, w.cols);
    let mut added: Vec<String> = b.minus(&a).iter().map(|x| u.atom_to_string(x)).collect();
    let mut deleted: Vec<String> = a.minus(&b).iter().map(|x| u.atom_to_string(x)).collect();
    added.sort();
    deleted.sort();
    assert_eq!(added, vec![format!("(clear {cell})")]);
    assert_eq!(
        deleted,
        vec![
            "(alive ganon)".to_string(),
            format!("(at ganon {cell})"),
            "(next_to ganon)".to_string()
        ]
    );
}

#[test]
fn reachability_plans_replay_exactly() {
    let w = zelda3();
    let goal = ganon_defeated(&w);
    let mut agent = AgentHandle::search();
    let r = agent.answer_reachability(&w, &w.initial, &goal);
    assert!(r.success);
    assert_eq!(w.replay(&w.initial, r.plan.as_ref().unwrap()), goal);
    // Defeated monsters stay defeated.
    let back = agent.answer_reachability(&w, &goal, &w.initial);
    assert!(!back.success);
    assert_eq!(agent.counters().reachability_queries, 2);
    assert_eq!(agent.counters().successes, 1);
}

#[test]
fn gold_models_explain_their_own_harvest() {
    for b in Bundled::ALL {
        let w = bundled_world(&format!("{}5", b.name()), DEFAULT_SEED).unwrap();
        let tasks = generate_tasks(&w, DEFAULT_TRACES, DEFAULT_SEED).unwrap();
        let h = harvest_and_abstract(&mut AgentHandle::search(), &w, &tasks);
        let gold = b.gold(&w.universe);
        let r = check_consistency(&w.universe, &gold, &h.transitions());
        assert!(r.passed, "{}: {r}", b.name());
    }
}

#[test]
fn sampled_goals_differ_from_their_start_on_the_literal() {
    let w = bundled_world("pasta5", 3).unwrap();
    for t in generate_tasks(&w, 12, 3).unwrap() {
        assert_ne!(holds(&w, &t.literal, &t.start), t.positive);
        assert_eq!(holds(&w, &t.literal, &t.goal), t.positive);
    }
}

#[test]
fn small_zelda_is_locally_connected() {
    let r = check_local_connectivity(&zelda3(), 100_000);
    assert!(r.passed && !r.partial, "{r}");
}

#[test]
fn coverage_at_budget_zero_is_zero() {
    let w = zelda3();
    let gold = Bundled::Zelda.gold(&w.universe);
    let c = coverage_curve(&w, &mut AgentHandle::search(), &gold, &[0], 1).unwrap();
    assert_eq!(c, vec![(0, 0.0)]);
}

// Frozen from the first run of the reference configuration; the capability
// count is checked independently against the gold model in the acceptance
// suite.
#[test]
fn reference_zelda_run_is_stable() {
    let w = bundled_world("zelda5", DEFAULT_SEED).unwrap();
    let run = discover(
        &w,
        &mut AgentHandle::search(),
        DEFAULT_TRACES,
        DEFAULT_SEED,
        QUERY_PLAN_BOUND,
    )
    .unwrap();
    assert_eq!(run.stats.capabilities, 6);
    assert_eq!(run.stats.query_plans, 19);
    assert_eq!(run.stats.unresolved, 0);
    assert!(run.is_resolved());
}

#[test]
fn traces_scale_with_area() {
    // 9 per 25 cells, rounded up: 81/25*9 = 29.16.
    assert_eq!(
        [5, 7, 9].map(|s| scaled_traces(DEFAULT_TRACES, s)),
        [9, 18, 30]
    );
    assert_eq!(scaled_traces(1, 2), 1);
}

#[test]
fn stats_header_lists_every_column() {
    let text = export_stats(&[]);
    assert_eq!(
        text.trim_end().split('\t').collect::<Vec<_>>(),
        STATS_COLUMNS.to_vec()
    );
}

#[test]
fn artifacts_are_written_and_evidence_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let w = bundled_world("zelda4", DEFAULT_SEED).unwrap();
    let run = discover(&w, &mut AgentHandle::policy(), 6, 5, QUERY_PLAN_BOUND).unwrap();
    write_artifacts(&run, &w, Some(&Bundled::Zelda.templates()), dir.path()).unwrap();
    for f in [
        MODEL_FILE,
        TRANSCRIPT_FILE,
        QUERY_LOG_FILE,
        STATS_FILE,
        EVIDENCE_FILE,
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(
        read_evidence(&dir.path().join(EVIDENCE_FILE)).unwrap(),
        run.evidence
    );
    let text = std::fs::read_to_string(dir.path().join(MODEL_FILE)).unwrap();
    let back = parse_model(&w.universe, &text).unwrap().1;
    assert_eq!(export_model(&w.universe, "zelda", &back), text);
    let stats = std::fs::read_to_string(dir.path().join(STATS_FILE)).unwrap();
    assert!(stats
        .lines()
        .nth(1)
        .unwrap()
        .contains("\tpolicy\t5\t1\t6\t"));
}

#[test]
fn run_configs_parse_and_validate() {
    let c = RunConfig::parse("domain = \"zelda\"\nseed = 4\n").unwrap();
    assert_eq!(
        (c.grid, c.traces, c.agent_kind().unwrap()),
        (5, DEFAULT_TRACES, AgentKind::Search)
    );
    assert!(matches!(
        RunConfig::parse("domain = \"zelda\"\nseed = 4\ncolour = 1\n"),
        Err(ExperimentError::Config(_))
    ));
    assert!(matches!(
        RunConfig::parse("domain = \"zelda\"\nseed = 4\nagent = \"gold\"\n"),
        Err(ExperimentError::Config(_))
    ));
    assert!(matches!(
        RunConfig::parse("domain = \"zelda\"\nseed = 4\ntraces = 0\n"),
        Err(ExperimentError::Config(_))
    ));
    assert!(matches!(
        RunConfig::parse("domain = \"zelda\"\nseed = 4\nobstacle_fraction = 1.5\n"),
        Err(ExperimentError::Config(_))
    ));
}

#[test]
fn config_paths_are_relative_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("z.inst"),
        Bundled::Zelda.generate(4, 2).unwrap().to_string(),
    )
    .unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "domain = \"zelda\"\nseed = 1\ninstance = \"z.inst\"\nout = \"o\"\n",
    )
    .unwrap();
    let c = RunConfig::load(&path).unwrap();
    assert_eq!(
        c.instance.as_deref(),
        Some(dir.path().join("z.inst").as_path())
    );
    assert_eq!(c.out, dir.path().join("o"));
    assert_eq!(c.load_world().unwrap().rows, 6);
}

#[test]
fn unknown_world_names_are_errors() {
    assert!(bundled_world("chess5", 0).is_err());
    assert!(bundled_world("zelda", 0).is_err());
    let mut c = RunConfig::new("nowhere.domain", 5, 0);
    c.grid = 5;
    assert!(matches!(c.load_world(), Err(ExperimentError::File { .. })));
}
