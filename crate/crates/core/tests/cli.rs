use std::path::Path;
use std::process::{Command, Output};

use parclust::io::{self, read_assignments, read_merges, LoadOptions};
use parclust::synth::{generate_synthetic, BlobSpec};

fn parclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parclust")).args(args).output().expect("spawn parclust")
}

fn text(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = parclust(&["generate", "--n", "500", "--d", "3", "--clusters", "4", "--seed", "11", "--output", s(path)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(text(&a), text(&b));
    assert_eq!(text(&dir.path().join("a.csv.labels.csv")), text(&dir.path().join("b.csv.labels.csv")));
}

#[test]
fn large_generated_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let synthetic = generate_synthetic(&BlobSpec { n: 100_000, d: 25, clusters: 7, spread: 3.0, seed: 5 }).unwrap();
    let path = dir.path().join("big.csv");
    io::write_dataset(&synthetic.dataset, &path).unwrap();
    let back = io::load_dataset(&path, &LoadOptions::default()).unwrap();
    assert_eq!((back.len(), back.dim()), (100_000, 25));
    assert!(back.values().iter().zip(synthetic.dataset.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn cluster_outputs_replay() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.csv");
    let out_dir = dir.path().join("out");
    assert!(parclust(&["generate", "--n", "400", "--d", "2", "--seed", "2", "--output", s(&input)]).status.success());
    let out = parclust(&[
        "cluster", "--input", s(&input), "--out-dir", s(&out_dir), "--pairs-per-batch", "16", "--kl2", "60",
        "--managers", "2", "--workers-per-manager", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dataset = io::load_dataset(&input, &LoadOptions::default()).unwrap();
    let merges = read_merges(out_dir.join("merges.csv"), &dataset).unwrap();
    let assignments = read_assignments(out_dir.join("assignments.csv"), &dataset).unwrap();
    assert!(!merges.is_empty());
    assert_eq!(merges.replay(dataset.len(), merges.len()).unwrap(), assignments);

    let stats: serde_json::Value = serde_json::from_str(&text(&out_dir.join("stats.json"))).unwrap();
    assert_eq!(stats["merges"], merges.len());
    assert_eq!(stats["config"]["pairs_per_batch"], 16);
    assert!(stats["skips"]["kl2"].is_u64());
    assert!(stats["stop_reason"].is_string());
    assert!(stats["utilization_percent"].is_number());
}

#[test]
fn oracle_subcommand_matches_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.csv");
    assert!(parclust(&["generate", "--n", "300", "--d", "3", "--seed", "4", "--output", s(&input)]).status.success());
    let engine_dir = dir.path().join("engine");
    let oracle_dir = dir.path().join("oracle");
    for (cmd, out) in [("cluster", &engine_dir), ("oracle", &oracle_dir)] {
        let o = parclust(&[cmd, "--input", s(&input), "--out-dir", s(out), "--kl3", "50", "--metric", "manhattan"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(text(&engine_dir.join("assignments.csv")), text(&oracle_dir.join("assignments.csv")));
    let strip_rounds = |p: &Path| -> Vec<String> {
        text(p).lines().map(|l| l.split(',').enumerate().filter(|(k, _)| *k != 1).map(|(_, f)| f).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(strip_rounds(&engine_dir.join("merges.csv")), strip_rounds(&oracle_dir.join("merges.csv")));
}

#[test]
fn zero_merge_run_writes_headers_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ids.csv");
    std::fs::write(&input, "name,x\na,0\nb,10\nc,20\n").unwrap();
    let out_dir = dir.path().join("out");
    let o = parclust(&["cluster", "--input", s(&input), "--id-column", "name", "--dmax", "1", "--out-dir", s(&out_dir)]);
    assert!(o.status.success());
    assert_eq!(text(&out_dir.join("merges.csv")), "step,round,root_a,root_b,distance,new_size\n");
    assert_eq!(text(&out_dir.join("assignments.csv")), "id,cluster\na,a\nb,b\nc,c\n");
}

#[test]
fn euclidean_distances_are_true_units() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    std::fs::write(&input, "0,0\n3,4\n").unwrap();
    let out_dir = dir.path().join("out");
    assert!(parclust(&["cluster", "--input", s(&input), "--out-dir", s(&out_dir)]).status.success());
    assert_eq!(text(&out_dir.join("merges.csv")).lines().nth(1), Some("1,1,0,1,5,2"));
}

#[test]
fn flags_override_settings_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    assert!(parclust(&["generate", "--n", "200", "--output", s(&input)]).status.success());
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!("# test settings\ninput = {}\npairs-per-batch = 8\nkl2 = 30\nmetric = chebyshev\n", s(&input)),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let o = parclust(&["cluster", "--config", s(&config), "--pairs-per-batch", "32", "--out-dir", s(&out_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value = serde_json::from_str(&text(&out_dir.join("stats.json"))).unwrap();
    assert_eq!(stats["config"]["pairs_per_batch"], 32);
    assert_eq!(stats["config"]["constraints"]["kl2"], 30);
    assert_eq!(stats["config"]["metric"], "chebyshev");
    assert_eq!(stats["config"]["pipeline"]["buffers_per_worker"], 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,4\n5,NaN\n").unwrap();
    let o = parclust(&["cluster", "--input", s(&bad), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "colour = red\n").unwrap();
    assert_eq!(parclust(&["cluster", "--config", s(&conf)]).status.code(), Some(1));
    assert_eq!(parclust(&["cluster", "--bogus-flag"]).status.code(), Some(1));
    let good = dir.path().join("good.csv");
    std::fs::write(&good, "1,2\n3,4\n").unwrap();
    assert_eq!(parclust(&["cluster", "--input", s(&good), "--kl2", "4", "--kl3", "2"]).status.code(), Some(1));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = parclust(&["cluster", "--input", s(&good), "--out-dir", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_subcommand_reports_table() {
    let o = parclust(&["bench", "--sizes", "300", "--workers", "1,2", "--trials", "1", "--pairs-per-batch", "16"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("speedup"));
    assert!(out.lines().count() >= 3);
}
