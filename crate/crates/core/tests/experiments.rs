use grw_lab::experiments::*;
use grw_lab::GrwError;

#[test]
fn deviation_sweep_is_linear() {
    let r = run_deviation_sweep(&DeviationSweep::default()).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    assert!(r.get("d_at_zero").unwrap().value <= 1e-10);
    let s = r.get("slope").unwrap().value;
    assert!((0.8..=1.2).contains(&s), "slope {s}");
}

#[test]
fn collapse_detection_small_sample() {
    let r = run_collapse_detection(&CollapseDetection { m: 20_000, ..CollapseDetection::default() }).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    assert!(r.pass);
}

#[test]
fn overlapping_packets_are_rejected() {
    let cfg = CollapseDetection { here: 3, there: 4, sigma: 1.0, ..CollapseDetection::default() };
    assert!(matches!(run_collapse_detection(&cfg), Err(GrwError::PacketOverlap(_))));
}

#[test]
fn two_pointer_small_sample() {
    let r = run_two_pointer(&TwoPointer { m: 2000, ..TwoPointer::default() }).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    assert!(r.pass);
}

#[test]
fn consecutive_small_sample() {
    let r = run_consecutive(&Consecutive { m: 5000, ..Consecutive::default() }).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    assert!(r.pass);
}

#[test]
fn warming_small_sample() {
    let r = run_warming(&Warming { m: 2000, points: 4, ..Warming::default() }).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    assert!(r.pass);
}
