use std::fs;

use rdw_core::campaign::{self, CampaignConfig};
use rdw_core::metrics::{self, metrics_csv_row};
use rdw_core::simulation::frames_from_csv;
use rdw_core::{builtin_pair, BuiltinPair};
use serde_json::Value;

fn small(which: BuiltinPair) -> CampaignConfig {
    let mut c = CampaignConfig::desk(builtin_pair(which), which.label(), 3);
    c.n_paths = 4;
    c.n_waypoints = 6;
    c
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    campaign::run_campaign_to_dir(&small(BuiltinPair::B), dir.path()).unwrap();
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["complete"], Value::Bool(true));
    let files = manifest["files"].as_array().unwrap();
    // config, complexity, summary, 4 paths, and per controller 4 trials + 4 tables
    assert_eq!(files.len(), 3 + 4 + 3 * (4 + 4));
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let bytes = fs::read(dir.path().join(rel)).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len(), "{rel}");
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            campaign::sha256_hex(&bytes),
            "{rel}"
        );
    }
}

#[test]
fn stored_trials_replay_to_the_stored_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(BuiltinPair::C);
    let outcome = campaign::run_campaign_to_dir(&config, dir.path()).unwrap();
    for c in &outcome.controllers {
        let table =
            fs::read_to_string(dir.path().join(format!("metrics/{}.csv", c.kind.slug()))).unwrap();
        let rows: Vec<&str> = table.lines().skip(1).collect();
        assert_eq!(rows.len(), config.n_paths);
        for (i, t) in c.trials.iter().enumerate() {
            let text = fs::read_to_string(
                dir.path()
                    .join(format!("trials/{}/path_{i:03}.csv", c.kind.slug())),
            )
            .unwrap();
            assert_eq!(campaign::sha256_hex(text.as_bytes()), t.csv_sha256);
            assert_eq!(rows[i], metrics_csv_row(i, &t.metrics));
            let (frames, resets) = frames_from_csv(&text).unwrap();
            let replayed =
                metrics::metrics_from_frames(&frames, resets.len(), config.sim.walk_speed).unwrap();
            assert_eq!(replayed.resets, t.metrics.resets);
            assert!((replayed.total_distance - t.metrics.total_distance).abs() < 1e-3);
            assert!((replayed.mean_alignment - t.metrics.mean_alignment).abs() < 1e-5);
        }
    }
}

#[test]
fn failed_campaign_leaves_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(BuiltinPair::A);
    config.controllers.clear();
    assert!(campaign::run_campaign_to_dir(&config, dir.path()).is_err());
    assert!(dir.path().join("FAILED").exists());
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn summary_has_a_row_per_metric_and_pair() {
    let outcome = campaign::run_campaign(&small(BuiltinPair::A), false).unwrap();
    let csv = outcome.summary_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "environment,metric,contrast,psi_hat,ci_low,ci_high,n"
    );
    assert_eq!(lines.len(), 1 + 5 * 3);
    assert!(lines[1..]
        .iter()
        .all(|l| l.starts_with("A,") && l.ends_with(",4")));
}
