use std::fs;
use std::path::Path;

use selfcal::config::ScenarioConfig;
use selfcal::export::{FilterExport, Summary};
use selfcal::harness::{self, HarnessError, INCOMPLETE_MARKER};
use selfcal_core::array::ImpairmentEnsemble;
use selfcal_core::calibration::calibrate_array;
use selfcal_core::experiment;
use selfcal_core::nullform::to_db;

fn paper_sim() -> ScenarioConfig {
    ScenarioConfig::preset("paper-sim").unwrap()
}

fn read_summary(dir: &Path) -> Summary {
    harness::read_json(&dir.join("summary.json")).unwrap()
}

#[test]
fn rerun_gives_byte_identical_summary() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    harness::run_scenario(&paper_sim(), a.path()).unwrap();
    harness::run_scenario(&paper_sim(), b.path()).unwrap();
    for f in ["summary.json", "filters.json", "capture.acal", "q_per_bin.csv", "run.log"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(!a.path().join(INCOMPLETE_MARKER).exists());
}

#[test]
fn run_directory_is_complete_and_reproducible_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run_scenario(&paper_sim(), dir.path()).unwrap();
    for f in [
        "config.toml",
        "ensemble.json",
        "capture.acal",
        "estimates.json",
        "filters.json",
        "report.json",
        "q_per_bin.csv",
        "beampattern_pre.csv",
        "beampattern_post.csv",
        "beampattern_onestage.csv",
        "summary.json",
        "run.log",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let snapshot = ScenarioConfig::load(&dir.path().join("config.toml")).unwrap();
    let again = tempfile::tempdir().unwrap();
    let rerun = harness::run_scenario(&snapshot, again.path()).unwrap();
    assert_eq!(rerun.summary, out.summary);
}

#[test]
fn run_matches_core_experiment() {
    let cfg = paper_sim();
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run_scenario(&cfg, dir.path()).unwrap();
    let core = experiment::run(&cfg.scenario().unwrap()).unwrap();
    assert_eq!(out.pre, core.pre);
    assert_eq!(out.post, core.post);
    assert_eq!(out.onestage, core.onestage_report);
}

#[test]
fn calibrate_from_file_equals_in_memory_pipeline() {
    for preset in ["paper-sim", "paper-experiment"] {
        let cfg = ScenarioConfig::preset(preset).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (scenario, ensemble, captures) = harness::simulate(&cfg).unwrap();
        harness::write_simulation(dir.path(), &cfg, &ensemble, &captures, false).unwrap();

        let from_file = harness::calibrate_from_file(&dir.path().join("capture.acal"), &cfg).unwrap();
        let pilot = scenario.pilot().unwrap();
        let in_memory = calibrate_array(&captures, &pilot, &scenario.calibration).unwrap();
        assert_eq!(from_file.calibrations, in_memory, "{preset}");

        let ens: ImpairmentEnsemble = harness::read_json(&dir.path().join("ensemble.json")).unwrap();
        assert_eq!(ens, ensemble);
    }
}

#[test]
fn filter_export_round_trips_and_reproduces_post_score() {
    for preset in ["paper-sim", "paper-experiment"] {
        let cfg = ScenarioConfig::preset(preset).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = harness::run_scenario(&cfg, dir.path()).unwrap();
        let filters: FilterExport = harness::read_json(&dir.path().join("filters.json")).unwrap();
        let ensemble: ImpairmentEnsemble = harness::read_json(&dir.path().join("ensemble.json")).unwrap();
        let eval = harness::evaluate_filters(&cfg, &ensemble, &filters).unwrap();
        assert_eq!(eval.pre, out.pre);
        assert!((eval.post.q_avg_db - out.post.q_avg_db).abs() < 1e-6, "{preset}");
    }
}

#[test]
fn summary_is_recomputable_from_per_bin_csv() {
    let dir = tempfile::tempdir().unwrap();
    harness::run_scenario(&paper_sim(), dir.path()).unwrap();
    let summary = read_summary(dir.path());
    let text = fs::read_to_string(dir.path().join("q_per_bin.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "bin,q_pre_db,q_post_db,q_onestage_db");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), summary.bins_evaluated);

    let stats = |col: usize| {
        let q: Vec<f64> = rows.iter().map(|r| 10f64.powf(r[col] / 10.0)).collect();
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        let var = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / q.len() as f64;
        (to_db(mean), to_db(var.sqrt()))
    };
    let onestage = summary.onestage.unwrap();
    for (col, s) in [(1, summary.pre), (2, summary.post), (3, onestage)] {
        let (avg, std) = stats(col);
        assert!((avg - s.q_avg_db).abs() < 1e-9, "col {col}: {avg} vs {}", s.q_avg_db);
        assert!((std - s.q_std_db).abs() < 1e-9, "col {col}: {std} vs {}", s.q_std_db);
    }
}

#[test]
fn ideal_preset_nulls_perfectly_with_zero_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run_scenario(&ScenarioConfig::preset("ideal").unwrap(), dir.path()).unwrap();
    assert!(out.summary.post.q_avg_db <= -200.0, "{}", out.summary.post.q_avg_db);
    for c in &out.calibrations {
        assert_eq!(c.estimate.ell, 0);
        assert!(c.estimate.tau.abs() < 1e-9 && c.estimate.phi.abs() < 1e-9);
    }
}

#[test]
fn default_sweep_has_seven_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run_noise_sweep(&paper_sim(), &harness::default_sweep(), Some(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let sigmas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(sigmas.len(), 7);
    assert!(sigmas.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(out.rows.len(), 7);
}

#[test]
fn unsorted_sweep_input_is_sorted() {
    let out = harness::run_noise_sweep(&paper_sim(), &[1e-3, 1e-7, 1e-5], None).unwrap();
    let s: Vec<f64> = out.rows.iter().map(|r| r.sigma2).collect();
    assert_eq!(s, vec![1e-7, 1e-5, 1e-3]);
}

#[test]
fn single_point_sweep_matches_run() {
    let mut cfg = paper_sim();
    cfg.noise.sigma2 = 1e-4;
    let sweep = harness::run_noise_sweep(&cfg, &[1e-4], None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = harness::run_scenario(&cfg, dir.path()).unwrap();
    let row = &sweep.rows[0];
    assert_eq!(row.q_pre_db, run.summary.pre.q_avg_db);
    assert_eq!(row.q_post_db, run.summary.post.q_avg_db);
    assert_eq!(row.q_onestage_db, run.summary.onestage.map(|o| o.q_avg_db));
}

#[test]
fn negative_sweep_power_is_a_config_error() {
    let err = harness::run_noise_sweep(&paper_sim(), &[1e-6, -1.0], None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn failed_run_leaves_incomplete_marker_with_stage() {
    let mut cfg = ScenarioConfig::preset("paper-experiment").unwrap();
    cfg.calibration.mode = selfcal_core::calibration::CompensationMode::Fir;
    let dir = tempfile::tempdir().unwrap();
    let err = harness::run_scenario(&cfg, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let marker = fs::read_to_string(dir.path().join(INCOMPLETE_MARKER)).unwrap();
    assert!(marker.contains("calibrate") && marker.contains("channel 0"), "{marker}");
    assert!(dir.path().join("capture.acal").exists());
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn channel_count_mismatch_is_named() {
    let cfg = paper_sim();
    let dir = tempfile::tempdir().unwrap();
    let (_, ensemble, captures) = harness::simulate(&cfg).unwrap();
    harness::write_simulation(dir.path(), &cfg, &ensemble, &captures, false).unwrap();
    let mut other = cfg.clone();
    other.array.channels = 7;
    let err = harness::calibrate_from_file(&dir.path().join("capture.acal"), &other).unwrap_err();
    assert!(matches!(err, HarnessError::Data(_)));
    assert!(err.to_string().contains("8 channels") && err.to_string().contains("expects 7"));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn corrupt_capture_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.acal");
    fs::write(&path, b"ACAL\x01\x00").unwrap();
    let err = harness::calibrate_from_file(&path, &paper_sim()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("truncated"), "{err}");
}

#[test]
fn checks_apply_preset_thresholds() {
    let cfg = paper_sim();
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run_scenario(&cfg, dir.path()).unwrap();
    let lines = harness::check_summary(&out.summary, cfg.check.as_ref().unwrap());
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.passed), "{lines:?}");

    let mut strict = cfg.check.clone().unwrap();
    strict.max_post_db = Some(-300.0);
    let lines = harness::check_summary(&out.summary, &strict);
    assert_eq!(lines.iter().filter(|l| !l.passed).count(), 1);
}
