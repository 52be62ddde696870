use ptap_core::bench::{
    compare_algorithms, read_csv, read_json, run_benchmark, write_csv, write_json, write_table, BenchConfig,
    ProblemSpec, RunReport, VerifyStatus,
};
use ptap_core::problems::GridSpec;
use ptap_core::{Algorithm, CachePolicy, Error};

fn grid(n: usize) -> ProblemSpec {
    ProblemSpec::Grid(GridSpec::cube(n).unwrap())
}

fn without_times(mut r: RunReport) -> RunReport {
    r.row.time_sym_s = 0.0;
    r.row.time_num_s = 0.0;
    r.row.time_total_s = 0.0;
    r.timing_rank = 0;
    r
}

#[test]
fn outer_product_runs_store_no_auxiliaries() {
    for alg in [Algorithm::AllAtOnce, Algorithm::MergedAllAtOnce] {
        let cfg = BenchConfig::new(alg, grid(8), 4);
        let out = run_benchmark(&cfg).unwrap();
        assert_eq!(out.report.row.mem_aux, 0, "{alg}");
        assert_eq!(out.report.row.repeats, 11);
        assert_eq!(out.report.stats.symbolic_passes, 4);
        assert_eq!(out.report.stats.numeric_passes, 44);
    }
}

#[test]
fn two_step_aux_exceeds_output() {
    let out = run_benchmark(&BenchConfig::new(Algorithm::TwoStep, grid(8), 4)).unwrap();
    let row = &out.report.row;
    assert!(row.mem_aux > 0);
    assert!(row.mem_aux >= row.mem_output, "{} < {}", row.mem_aux, row.mem_output);
}

#[test]
fn small_run_verifies() {
    let mut cfg = BenchConfig::new(Algorithm::MergedAllAtOnce, grid(4), 1);
    cfg.verify = true;
    let out = run_benchmark(&cfg).unwrap();
    assert_eq!(out.report.row.verified, VerifyStatus::Match);
    assert_eq!(out.report.verification.unwrap().to_string(), "match ≤ 1e-12");
}

#[test]
fn oracle_refuses_large_problems() {
    let mut cfg = BenchConfig::new(Algorithm::AllAtOnce, grid(8), 2);
    cfg.verify = true;
    let err = run_benchmark(&cfg).unwrap_err();
    assert!(matches!(err, Error::OracleCap(_)), "{err}");
    assert!(err.to_string().contains("2000"));
}

#[test]
fn csv_and_json_round_trip() {
    let mut cfg = BenchConfig::new(Algorithm::TwoStep, ProblemSpec::parse_random("40,12,0.2,3").unwrap(), 3);
    cfg.verify = true;
    cfg.repeats = 2;
    let reports: Vec<RunReport> = Algorithm::ALL
        .iter()
        .map(|&alg| {
            let c = BenchConfig { algorithm: alg, ..cfg.clone() };
            run_benchmark(&c).unwrap().report
        })
        .collect();
    let mut buf = Vec::new();
    write_csv(&reports, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(
        "np,algorithm,mem_input,mem_output,mem_aux,mem_transient_peak,mem_plan,time_sym_s,time_num_s,time_total_s,repeats,verified\n"
    ));
    assert!(text.contains(",two-step,") && text.contains(",allatonce,") && text.contains(",merged,"));
    let rows = read_csv(&buf[..]).unwrap();
    assert_eq!(rows, reports.iter().map(|r| r.row.clone()).collect::<Vec<_>>());

    let mut js = Vec::new();
    write_json(&reports, &mut js).unwrap();
    assert_eq!(read_json(&js[..]).unwrap(), reports);
    let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
    assert!(v[0]["mem_avg"]["mem_plan"].is_number());
    assert_eq!(v[0]["mem_aux"], v[0]["mem_aux"]);
    assert!(v[0]["verified"] == "match");

    let mut tab = Vec::new();
    write_table(&reports, &mut tab).unwrap();
    let tab = String::from_utf8(tab).unwrap();
    for col in ["np", "Algorithm", "Mem", "Time_sym", "Time_num", "Time", "aux", "transient", "plan"] {
        assert!(tab.lines().next().unwrap().split_whitespace().any(|c| c == col), "{col}");
    }
}

#[test]
fn sequential_reports_are_reproducible() {
    let cfg = BenchConfig::new(Algorithm::AllAtOnce, ProblemSpec::parse_random("60,20,0.2,9").unwrap(), 5);
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&cfg).unwrap();
    assert_eq!(without_times(a.report), without_times(b.report));
    assert!(a.c.bit_eq(&b.c));
    assert_eq!(a.trace, b.trace);
}

#[test]
fn free_policy_reruns_the_symbolic_phase() {
    let mut cfg = BenchConfig::new(Algorithm::TwoStep, grid(3), 2);
    cfg.cache = CachePolicy::FreeAfterSolve;
    cfg.repeats = 3;
    let free = run_benchmark(&cfg).unwrap();
    assert_eq!(free.report.stats.symbolic_passes, 6);
    cfg.cache = CachePolicy::CacheIntermediate;
    let keep = run_benchmark(&cfg).unwrap();
    assert_eq!(keep.report.stats.symbolic_passes, 2);
    assert!(free.c.bit_eq(&keep.c));
}

#[test]
fn comparison_reports_the_memory_ratio() {
    let cfg = BenchConfig {
        repeats: 1,
        ..BenchConfig::new(Algorithm::TwoStep, grid(8), 4)
    };
    let cmp = compare_algorithms(&cfg).unwrap();
    assert_eq!(cmp.reports.len(), 3);
    assert!(cmp.agreement.passed(), "{}", cmp.agreement);
    assert!(cmp.memory_ratio >= 1.0);
}

#[test]
fn memory_per_rank_shrinks_with_more_ranks() {
    for alg in Algorithm::ALL {
        let mem = |np| {
            let cfg = BenchConfig {
                repeats: 1,
                ..BenchConfig::new(alg, grid(8), np)
            };
            let r = run_benchmark(&cfg).unwrap().report.row;
            (r.mem_input + r.triple_product_memory()) as f64
        };
        let m: Vec<f64> = [1, 2, 4, 8].into_iter().map(mem).collect();
        for w in m.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{alg}: {m:?}");
        }
    }
}

#[test]
fn numeric_time_accumulates_over_repeats() {
    let cfg = |repeats| BenchConfig {
        repeats,
        ..BenchConfig::new(Algorithm::MergedAllAtOnce, grid(6), 2)
    };
    let single = (0..5)
        .map(|_| run_benchmark(&cfg(1)).unwrap().report.row.time_num_s)
        .fold(f64::INFINITY, f64::min);
    let eleven = run_benchmark(&cfg(11)).unwrap().report.row;
    assert!(eleven.time_num_s >= 10.0 * single, "{} vs {}", eleven.time_num_s, single);
    assert!(eleven.time_sym_s + eleven.time_num_s <= eleven.time_total_s * (1.0 + 1e-9));
}
