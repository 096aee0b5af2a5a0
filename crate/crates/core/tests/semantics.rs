use sfverify::chart::{parse_chart, ChartDef};
use sfverify::expr::Value;
use sfverify::sem::*;

fn chart(name: &str) -> ChartDef {
    parse_chart(&std::fs::read_to_string(format!("{}/corpus/{name}.sfc", env!("CARGO_MANIFEST_DIR"))).unwrap()).unwrap()
}

fn ints(name: &str, vs: &[i64]) -> Vec<StepInput> {
    vs.iter().map(|v| StepInput::with_inputs([(name, Value::Int(*v))])).collect()
}

fn outputs(c: &ChartDef, trace: &[StepInput], y: &str) -> Vec<i64> {
    run_trace(c, trace).unwrap().iter().map(|r| r.outputs[y].as_i64()).collect()
}

#[test]
fn absolute_value_trace() {
    let c = chart("absolute_value");
    assert_eq!(outputs(&c, &ints("u", &[5, 5, -3, -3]), "y"), [0, 5, 3, 3]);
    assert!(run_trace(&c, &[]).unwrap().is_empty());
}

#[test]
fn broadcast_that_keeps_the_sender_active_returns_normally() {
    let c = chart("broadcast");
    // Wait is active; a broadcast of `fire` from Wait triggers nothing there
    let mut s = run_trace(&c, &ints("u", &[0])).unwrap().pop().unwrap().state;
    assert!(s.is_active("s_Wait"));
    assert_eq!(broadcast(&c, &mut s, "fire", "s_Wait").unwrap(), BroadcastOutcome::Normal);
    assert!(s.is_active("s_Wait"));
}

#[test]
fn broadcast_that_exits_the_sender_returns_early() {
    let c = chart("broadcast");
    let res = run_trace(&c, &ints("u", &[0, 1, 0])).unwrap();
    let last = res.last().unwrap();
    assert!(last.state.is_active("s_Fired"));
    // entry of Fired ran; the tail of Armed's during (y := 5) did not
    assert_eq!(last.outputs["y"], Value::Int(3));
    assert!(last.trace.iter().any(|e| matches!(e, TraceEvent::EarlyReturn { .. })));

    let mut s = res[1].state.clone();
    assert_eq!(broadcast(&c, &mut s, "fire", "s_Armed").unwrap(), BroadcastOutcome::EarlyReturn);
    assert!(s.is_active("s_Fired") && !s.is_active("s_Armed"));
}

#[test]
fn history_reenters_the_last_active_child() {
    let c = chart("history");
    // Park, Drive/Low, Drive/High, pause to Park, back into Drive
    let res = run_trace(&c, &ints("u", &[0, 1, 5, 0, 1])).unwrap();
    let g: Vec<i64> = res.iter().map(|r| r.outputs["g"].as_i64()).collect();
    assert_eq!(g, [0, 1, 2, 0, 2]);
    assert_eq!(res[3].state.history.get("s_Drive").map(String::as_str), Some("s_High"));
    // a junction branch that loops back runs its condition action
    let res = run_trace(&c, &ints("u", &[0, 9])).unwrap();
    assert_eq!(res[1].outputs["g"], Value::Int(0));
    assert!(res[1].state.is_active("s_Park"));
}

#[test]
fn parallel_regions_share_activity() {
    let c = chart("parallel");
    let res = run_trace(&c, &ints("t", &[0, -5, 0, 0, 5, 0])).unwrap();
    for r in &res {
        check_invariants(&c, &r.state).unwrap();
        assert_eq!(r.state.is_active("s_Heater"), r.state.is_active("s_Fan"));
    }
    let h: Vec<i64> = res.iter().map(|r| r.outputs["h"].as_i64()).collect();
    assert_eq!(h, [0, 1, 1, 1, 0, 0]);
    // the fan sees the heater's output from the same step, in child order
    assert!(res[1].state.is_active("s_Spin"));
    assert!(res[4].state.is_active("s_Idle"));
}

#[test]
fn three_levels_of_hierarchy() {
    let c = chart("hierarchy");
    let mut trace = ints("u", &[0; 7]);
    trace[6].events.push("tick".into());
    let res = run_trace(&c, &trace).unwrap();
    let y: Vec<i64> = res.iter().map(|r| r.outputs["y"].as_i64()).collect();
    // the guard of c_flip is tested before Up's during action runs
    assert_eq!(y, [0, 1, 2, 3, 3, 2, 0]);
    assert!(res[4].state.is_active("s_Down"));
    assert!(res[6].state.is_active("s_Hold") && !res[6].state.is_active("s_Cycle"));
    let res = run_trace(&c, &ints("u", &[0, -6, 6])).unwrap();
    assert_eq!(res[1].outputs["y"], Value::Int(-1));
    assert!(res[2].state.is_active("s_Up"));
}
