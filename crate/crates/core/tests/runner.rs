use ctap_core::dynamics::DEFAULT_SAMPLE_INTERVALS;
use ctap_core::observables::finalize;
use ctap_core::runner::{
    accumulate_range, emit_outputs, parse_config, read_table, run, OutputPaths, RunStatus, TABLE_COLUMNS,
};
use ctap_core::{
    Error, Estimate, InitialStateSpec, IntegrationConfig, ModelParams, Representation, RunConfig, TimeSeries,
};

fn config(rep: Representation, chi: f64, initial: InitialStateSpec, n: u64, batches: usize) -> RunConfig {
    let model = ModelParams::reference().with_chi(chi);
    let mut cfg = RunConfig::new(model, rep, initial, n, 7).unwrap();
    if rep.is_stochastic() {
        cfg.integration = IntegrationConfig::new(&cfg.model, rep, Some(0.02), DEFAULT_SAMPLE_INTERVALS).unwrap();
        cfg.n_batches = batches;
    }
    cfg.workers = Some(2);
    cfg.revalidate().unwrap();
    cfg
}

fn estimates(ts: &TimeSeries) -> Vec<Estimate> {
    ts.populations.iter().flatten().chain(&ts.xi13).copied().collect()
}

fn assert_close(a: &TimeSeries, b: &TimeSeries, rel: f64) {
    assert_eq!(a.times, b.times);
    for (x, y) in estimates(a).iter().zip(estimates(b)) {
        for (u, v) in [(x.value, y.value), (x.stderr, y.stderr)] {
            let scale = u.abs().max(v.abs());
            assert!((u - v).abs() <= rel * scale, "{u} vs {v}");
        }
    }
}

#[test]
fn split_ranges_merge_to_the_single_range_result() {
    for rep in [Representation::Wigner, Representation::PositiveP] {
        let cfg = config(rep, 1e-4, InitialStateSpec::coherent_in_first(200.0), 100, 4);
        let whole = accumulate_range(&cfg, 0..100).unwrap();
        let mut parts = accumulate_range(&cfg, 0..25).unwrap();
        for k in 1..4 {
            parts = parts.merge(accumulate_range(&cfg, k * 25..(k + 1) * 25).unwrap()).unwrap();
        }
        assert_close(&finalize(&whole.moments).unwrap(), &finalize(&parts.moments).unwrap(), 1e-12);
    }
}

#[test]
fn table_is_independent_of_worker_count() {
    let mut tables = Vec::new();
    for workers in [1, 3] {
        let mut cfg = config(Representation::Wigner, 1e-3, InitialStateSpec::fock_in_first(200), 300, 10);
        cfg.workers = Some(workers);
        let (ts, report) = run(&cfg).unwrap();
        tables.push(ctap_core::runner::write_table(&ts, &report, "test").unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

fn rms_stderr(ts: &TimeSeries) -> [f64; 4] {
    let curves = [&ts.populations[0], &ts.populations[1], &ts.populations[2], &ts.xi13];
    curves.map(|c| (c.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / c.len() as f64).sqrt())
}

#[test]
fn quadrupling_trajectories_halves_the_stderr() {
    for (rep, n) in [(Representation::Wigner, 2_000u64), (Representation::PositiveP, 1_000)] {
        let small = run(&config(rep, 1e-4, InitialStateSpec::coherent_in_first(200.0), n, 100)).unwrap().0;
        let large = run(&config(rep, 1e-4, InitialStateSpec::coherent_in_first(200.0), 4 * n, 100)).unwrap().0;
        for (a, b) in rms_stderr(&small).iter().zip(rms_stderr(&large)) {
            let ratio = a / b;
            assert!((1.6..=2.4).contains(&ratio), "{rep}: stderr ratio {ratio}");
        }
    }
}

#[test]
fn gpe_ignores_state_variance() {
    let coherent = run(&config(Representation::Gpe, 1e-3, InitialStateSpec::coherent_in_first(200.0), 1, 1)).unwrap();
    let fock = run(&config(Representation::Gpe, 1e-3, InitialStateSpec::fock_in_first(200), 1, 1)).unwrap();
    assert_eq!(coherent.0, fock.0);
    assert!(estimates(&coherent.0).iter().all(|e| e.stderr == 0.0));
}

#[test]
fn table_round_trip_and_header() {
    let cfg = config(Representation::Gpe, 1e-3, InitialStateSpec::coherent_in_first(200.0), 1, 1);
    let (ts, report) = run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = OutputPaths {
        dir: dir.path().join("nested/out"),
        ..OutputPaths::default()
    };
    let written = emit_outputs(&ts, &report, &paths, "v0-test").unwrap();
    assert_eq!(written.len(), 3);

    let text = std::fs::read_to_string(paths.table_path()).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split('\t').collect::<Vec<_>>(), TABLE_COLUMNS);
    assert!(text.lines().any(|l| l == "# provenance: v0-test"));

    let back = read_table(&paths.table_path()).unwrap();
    assert_eq!(back.representation, Representation::Gpe);
    assert_close(&ts, &back, 0.0);

    // initial-condition echo
    assert!((back.populations[0][0].value - 200.0).abs() < 1e-12);
    assert_eq!(back.populations[1][0].value, 0.0);
    assert_eq!(back.populations[2][0].value, 0.0);
    assert_eq!(back.xi13[0].value, 0.0);

    let report_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(paths.report_path()).unwrap()).unwrap();
    assert_eq!(report_json["divergence_count"], 0);
    assert_eq!(report_json["converged"], true);
}

#[test]
fn read_table_reports_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    std::fs::write(&path, format!("# representation: wigner\n{}\n1\t2\n", TABLE_COLUMNS.join("\t"))).unwrap();
    assert!(matches!(read_table(&path), Err(Error::Table { .. })));
    assert!(matches!(read_table(&dir.path().join("missing.tsv")), Err(Error::Io { .. })));
}

#[test]
fn config_text_runs_end_to_end() {
    let text = r#"
[model]
omega = 10.0
t_p = 40.0
chi = 1e-3

[state.well1]
kind = "coherent"
mean_number = 200.0

[integration]
dt = 0.02

[run]
representation = "wigner"
trajectories = 200
batches = 10
seed = 3
workers = 1
"#;
    let cfg = parse_config(text).unwrap();
    let (ts, report) = run(&cfg).unwrap();
    assert_eq!(report.status, RunStatus::Converged);
    assert_eq!(report.trajectories_completed, 200);
    let last = ts.len() - 1;
    assert!(ts.populations[2][last].value > 190.0);
}

#[test]
fn positive_p_outside_the_window_reports_divergence() {
    let mut cfg = config(Representation::PositiveP, 1e-2, InitialStateSpec::coherent_in_first(200.0), 200, 10);
    cfg.revalidate().unwrap();
    assert!(!cfg.warnings.is_empty());
    match run(&cfg) {
        Ok((ts, report)) => {
            assert!(report.divergence_count > 100, "{} diverged", report.divergence_count);
            assert_eq!(report.status, RunStatus::DivergenceInvalidated);
            assert!(*ts.divergence_fraction.last().unwrap() > 0.5);
        }
        Err(e) => assert!(matches!(e, Error::AllDiverged(200))),
    }
    cfg.model.chi = 0.5;
    assert!(matches!(run(&cfg), Err(Error::AllDiverged(200))));
}
