//! Kept in its own target so no other test competes for the CPU.

use cdmon_cli::bench;
use cdmon_core::generator::{generate, preset_scenario};
use cdmon_core::{parse_spec, EngineConfig, EngineRegistry};

#[test]
fn identical_logs_bench_alike() {
    let spec = parse_spec(include_str!("../../core/specs/failed_5min.symon")).unwrap();
    let engine = EngineRegistry::with_builtins()
        .create("symbolic", &EngineConfig::new(spec))
        .unwrap();
    let word = generate(&preset_scenario(15, 1)).unwrap();
    let copy = word.clone();
    engine.run(&word).unwrap();
    // Alternate the two logs so load drift hits both alike.
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..15 {
        a.push(bench(engine.as_ref(), &word, 5).unwrap());
        b.push(bench(engine.as_ref(), &copy, 5).unwrap());
    }
    assert_eq!((a[0].entries, a[0].reports), (b[0].entries, b[0].reports));
    let median = |rows: &[cdmon_cli::BenchRow]| {
        let mut ms: Vec<f64> = rows.iter().map(|r| r.millis).collect();
        ms.sort_by(f64::total_cmp);
        ms[ms.len() / 2]
    };
    let (a, b) = (median(&a), median(&b));
    let spread = (a - b).abs() / a.min(b);
    assert!(spread <= 0.2, "{a:.2} ms vs {b:.2} ms");
}
