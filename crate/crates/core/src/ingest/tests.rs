use super::*;
use crate::conservation::{ChannelAllocation, PhaseTimes, VerdictKind};
use crate::error::Error;
use crate::exec::Execution;
use crate::simulator::{run_simulation, trace_to_ledger};
use crate::window::{TaskInformation, TaskOutcome};

fn scenario() -> ScenarioConfig {
    ScenarioConfig::from_toml(DEFAULT_SCENARIO).unwrap()
}

#[test]
fn default_scenario_loads_in_canonical_units() {
    let s = scenario();
    let m = s.density_model();
    assert_eq!(m.rho_in_max, 72_000.0);
    assert_eq!(m.rho_out_max, 144_000.0);
    let c = s.sim_config().unwrap();
    assert_eq!(c.seed, 7);
    assert_eq!(c.templates.len(), 2);
    assert_eq!(s.instance(None).unwrap().nodes.len(), 8);
    assert!(s.instance(Some("nope")).is_err());
}

#[test]
fn scenario_round_trips_through_toml() {
    let s = scenario();
    assert_eq!(ScenarioConfig::from_toml(&s.to_toml()).unwrap(), s);
}

#[test]
fn version_is_mandatory_and_checked() {
    let without = DEFAULT_SCENARIO.replacen("version = 1\n", "", 1);
    assert!(matches!(ScenarioConfig::from_toml(&without), Err(Error::Parse { .. })));
    let later = DEFAULT_SCENARIO.replacen("version = 1", "version = 2", 1);
    assert!(matches!(ScenarioConfig::from_toml(&later), Err(Error::Config(_))));
}

#[test]
fn unknown_fields_are_rejected_with_a_line() {
    let text = DEFAULT_SCENARIO.replacen("horizon = 200.0", "horizon = 200.0\nhorizn = 3", 1);
    let expected = text.lines().position(|l| l.starts_with("horizn")).unwrap() + 1;
    match ScenarioConfig::from_toml(&text) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, expected);
            assert!(message.contains("horizn"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn units_are_validated() {
    for (from, to) in [
        ("rate = \"bits_per_sec\"", "rate = \"baud\""),
        ("time = \"hours\"", "time = \"days\""),
        ("information = \"bits\"", "information = \"bytes\""),
    ] {
        let text = DEFAULT_SCENARIO.replacen(from, to, 1);
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::Config(_))), "{to}");
    }
    let per_hour = DEFAULT_SCENARIO
        .replacen("rate = \"bits_per_sec\"", "rate = \"bits_per_hour\"", 1)
        .replace("rho_in_max = 20.0", "rho_in_max = 72000.0")
        .replace("rho_out_max = 40.0", "rho_out_max = 144000.0")
        .replace("rho_min = 5.0, rho_max = 10.0", "rho_min = 18000.0, rho_max = 36000.0")
        .replace("rho_min = 10.0, rho_max = 16.0", "rho_min = 36000.0, rho_max = 57600.0");
    let a = ScenarioConfig::from_toml(&per_hour).unwrap().density_model();
    assert_eq!(a, scenario().density_model());
}

#[test]
fn bad_instances_and_windows_are_config_errors() {
    let cyclic = DEFAULT_SCENARIO.replacen("id = \"schema\"", "id = \"schema\"\ndeps = [\"client\"]", 1);
    assert!(matches!(ScenarioConfig::from_toml(&cyclic), Err(Error::Config(_))));
    let empty = DEFAULT_SCENARIO.replacen("t1 = 8.0", "t1 = 0.0", 1);
    assert!(matches!(ScenarioConfig::from_toml(&empty), Err(Error::Config(_))));
}

fn simulated() -> Vec<TaskOutcome> {
    trace_to_ledger(&run_simulation(&scenario().sim_config().unwrap()).unwrap()).unwrap()
}

#[test]
fn report_on_simulated_ledger_respects_ceilings() {
    let s = scenario();
    let ledger = simulated();
    let r = build_report(&ledger, Some(&s), &[]).unwrap();
    assert_eq!(r.tasks.len(), ledger.len());
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    for t in &r.tasks {
        let (l, max) = (t.l_task.unwrap(), t.l_max.unwrap());
        assert!(l <= max, "{t:?}");
        assert_ne!(t.conservation.unwrap().kind, VerdictKind::Violated);
    }
    assert_eq!(r.windows.len(), 2);
    assert!(r.windows.iter().all(|w| w.result.is_some()));
}

#[test]
fn density_series_is_monotone_in_alpha() {
    let p = plot_series(&scenario()).unwrap();
    assert_eq!(p.density.len(), 2 * ALPHA_POINTS);
    for curve in p.density.chunks(ALPHA_POINTS) {
        assert_eq!(curve[0].alpha, 0.0);
        assert_eq!(curve[ALPHA_POINTS - 1].alpha, 1.0);
        // Input is the slower direction here, so more input share is slower.
        assert!(curve.windows(2).all(|w| w[1].rho_eff <= w[0].rho_eff));
    }
    assert!(p.phases.windows(2).all(|w| w[1].t_review <= w[0].t_review));
    assert!(p.phases.iter().all(|x| x.t_planning >= x.planning_floor));
}

#[test]
fn violated_conservation_is_a_warning() {
    let mut o = TaskOutcome::new(
        "short",
        2.0,
        PhaseTimes {
            t_planning: 0.5,
            t_interrupts: vec![],
            t_review: 0.5,
        },
        1.0,
        3.0,
    );
    o.information = Some(TaskInformation {
        i_task: 100.0,
        i_novel: 10.0,
        channels: ChannelAllocation {
            i_planning: 40.0,
            i_interrupts: vec![],
            i_review: 20.0,
        },
    });
    let r = build_report(&[o], None, &[(0.0, 5.0)]).unwrap();
    assert_eq!(r.tasks[0].conservation.unwrap().kind, VerdictKind::Violated);
    assert_eq!(r.warnings.len(), 1);
    assert!(render_text(&Artifact::Report(r)).contains("warning:"));
}

#[test]
fn empty_window_is_reported_not_fatal() {
    let r = build_report(&simulated(), None, &[(-10.0, -5.0)]).unwrap();
    assert!(r.windows[0].result.is_none());
    assert_eq!(r.warnings.len(), 1);
}

#[test]
fn scheduling_the_scenario_matches_the_oracle() {
    let doc = schedule_scenario(&scenario(), Some("release"), None, true).unwrap();
    assert_eq!(Some(doc.schedule.objective), doc.oracle_objective);
    assert!(doc.schedule.objective > 0.0);
}

#[test]
fn artifacts_round_trip_as_json() {
    let s = scenario();
    let report = Artifact::Report(build_report(&simulated(), Some(&s), &[]).unwrap());
    let sched = Artifact::Schedule(schedule_scenario(&s, None, Some(3.0), false).unwrap());
    let mut small = s.clone();
    if let Some(a) = small.experiments.asymmetry.as_mut() {
        a.replicas = 2;
        a.repetitions = 2;
    }
    let exp = Artifact::Experiment(run_scenario_experiments(&small, Execution::Sequential).unwrap());
    for a in [report, sched, exp] {
        let json = a.to_json();
        assert_eq!(Artifact::from_json(&json).unwrap(), a);
        for table in csv_tables(&a) {
            let csv = render_csv(&a, Some(table)).unwrap();
            assert!(csv.lines().count() >= 2, "{table}");
        }
        assert!(render_csv(&a, Some("nope")).is_err());
        assert!(!render_text(&a).is_empty());
    }
}
