use std::path::Path;
use std::process::{Command, Output};

fn simcache(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simcache"))
        .args(args)
        .env("SIMCACHE_OUT", out_root)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

const SWEEP: &str = r#"
kind = "tandem-sweep"
name = "sweep"
workers = 2

[grid]
side = 10
k = 5
repository_cost = 50
sigmas = [5, 1.25]
h = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
algorithms = ["greedy", "localswap", "continuous", "netduel"]

[netduel]
window = 50
requests = 3000
"#;

#[test]
fn sweep_has_one_row_per_point_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SWEEP);
    let o = simcache(&dir.path().join("a"), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = dir.path().join("a/sweep/sweep.csv");
    let table = rows(&first);
    assert_eq!(table.len(), 88);
    let hash = &table[0][5];
    assert!(table.iter().all(|r| &r[5] == hash && r[3] == "1"));

    let o = simcache(&dir.path().join("b"), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = dir.path().join("b/sweep/sweep.csv");
    assert_eq!(std::fs::read(first).unwrap(), std::fs::read(again).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/sweep/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "tandem-sweep");
    assert_eq!(manifest["points"].as_array().unwrap().len(), 88);
    assert!(manifest["config_hash"].as_str().unwrap().starts_with(hash.as_str()));
    assert!(manifest["notes"][0].as_str().unwrap().contains("k = 5"));
}

#[test]
fn allocation_dump_writes_one_file_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "dump.toml",
        r#"
kind = "allocation-dump"
[grid]
side = 10
k = 5
repository_cost = 50
sigmas = [1.25]
h = [3]
[netduel]
window = 50
requests = 3000
"#,
    );
    let o = simcache(dir.path(), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("dump");
    for m in ["greedy", "localswap", "continuous", "netduel"] {
        let t = rows(&out.join(format!("allocation_{m}_sigma1.25_h3_seed1.csv")));
        assert_eq!(t.len(), 100);
        assert!(t.iter().all(|r| ["leaf", "parent", "repository"].contains(&r[4].as_str())));
    }
}

#[test]
fn analytic_comparison_pairs_every_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "uni.toml",
        r#"
kind = "analytic-vs-localswap"
[uniform]
ball_radius = 2
gammas = [0.5, 1, 2]
points = 5
"#,
    );
    let o = simcache(dir.path(), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = rows(&dir.path().join("uni/curve.csv"));
    assert_eq!(curve.len(), 15);
    for g in ["0.5", "1", "2"] {
        assert_eq!(curve.iter().filter(|r| r[0] == g).count(), 5);
    }
    assert_eq!(rows(&dir.path().join("uni/onset.csv")).len(), 3);
}

#[test]
fn failed_point_is_recorded_and_the_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "con.toml",
        r#"
kind = "constrained-study"
[embedding]
items = 300
events = 3000
k_leaf = 5
k_parent = 5
d_star = [0.0, 5.0]
"#,
    );
    let o = simcache(dir.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("con/manifest.json")).unwrap()).unwrap();
    let points = manifest["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    assert_eq!(points.iter().filter(|p| p["ok"] == false).count(), 1);
    assert!(points[1]["error"].as_str().unwrap().contains("admits only"));
    let t = rows(&dir.path().join("con/constrained.csv"));
    assert_eq!(t.len(), 2);
    assert_eq!(t[0][0], "none");
}

#[test]
fn validate_reports_each_problem_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", SWEEP);
    let o = simcache(dir.path(), &["validate", &good]);
    assert!(o.status.success(), "{}", stderr(&o));

    let bad = write(
        dir.path(),
        "bad.toml",
        r#"kind = "tandem-sweep"
colour = 3
[grid]
sigmas = [1]
shape = "round"
[embedding]
items_file = "gone.csv"
"#,
    );
    let o = simcache(dir.path(), &["validate", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:2: unknown key `colour`"), "{err}");
    assert!(err.contains("bad.toml:5: unknown key `grid.shape`"), "{err}");
    assert!(err.contains("missing sweep grid `grid.h`"), "{err}");
    assert!(err.contains("`embedding.items_file` refers to a missing file"), "{err}");
    // nothing was written
    assert!(!dir.path().join("bad").exists());
}

const INSTANCE: &str = r#"
[space]
kind = "points"
metric = "norm1"
gamma = 1.0
coords = [[0], [1], [2], [3], [4]]

[topology]
kind = "chain"
capacities = [1, 1, "repository"]
edges = [1.0, 5.0]

[demand]
kind = "rates"
rates = [1, 2, 3, 2, 1]
ingress = 0

[repositories]
node = 2
"#;

#[test]
fn place_writes_allocation_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.toml", INSTANCE);
    let mut costs = Vec::new();
    for alg in ["greedy", "localswap", "cascade", "bruteforce"] {
        let out = dir.path().join(alg);
        let o = simcache(
            dir.path(),
            &["place", alg, "--instance", &inst, "--seed", "3", "--out", out.to_str().unwrap()],
        );
        assert!(o.status.success(), "{alg}: {}", stderr(&o));
        assert_eq!(rows(&out.join("allocation.csv")).len(), 2);
        let log: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("run.json")).unwrap()).unwrap();
        costs.push(log["cost"].as_f64().unwrap());
    }
    // exhaustive search is never beaten
    assert!(costs.iter().all(|&c| c >= costs[3] - 1e-12), "{costs:?}");

    let out = dir.path().join("split");
    let o = simcache(
        dir.path(),
        &["place", "cascade", "--instance", &inst, "--constraint-d-star", "1.5", "--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    // barycenter is 2: the leaf may only hold objects 1..=3, the parent the rest
    for r in rows(&out.join("allocation.csv")) {
        let (o, n): (i32, u32) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert_eq!((o - 2).abs() < 2, n == 0, "{r:?}");
    }
}

#[test]
fn place_rejects_bad_input_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = simcache(dir.path(), &["place", "greedy", "--instance", "nowhere.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.toml"));

    let broken = write(dir.path(), "broken.toml", &INSTANCE.replace("gamma = 1.0", "gamma = 1.0\nflavour = 2"));
    let o = simcache(dir.path(), &["place", "greedy", "--instance", &broken]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("flavour"));
}

#[test]
fn cont_solves_each_model() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write(dir.path(), "p.csv", "region_id,rate\n0,5\n1,3\n2,1\n3,0.5\n");
    let run = |args: &[&str]| -> serde_json::Value {
        let mut full = vec!["cont"];
        full.extend_from_slice(args);
        full.extend_from_slice(&["--profile", &profile]);
        let o = simcache(dir.path(), &full);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let single = run(&["single", "--k", "10"]);
    let slots: f64 = single["solution"]["slots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((slots - 10.0).abs() < 1e-9);

    let chain = run(&["chain", "--k", "2,2,inf", "--h", "0,1,10"]);
    assert_eq!(chain["k"][2], "inf");
    let weights = chain["solution"]["weights"].as_array().unwrap();
    assert_eq!(weights.len(), 4);
    for w in weights {
        let sum: f64 = w.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    let tree = run(&["tree", "--k", "2,inf", "--h", "0,3", "--leaf-scales", "1,0.5"]);
    let leaf: Vec<f64> = tree["solution"]["leaf_costs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((leaf[0] - 2.0 * leaf[1]).abs() < 1e-9 * leaf[0]);

    let tandem = run(&["tandem", "--k", "2,2", "--h", "1", "--beta-parent", "1"]);
    assert_eq!(tandem["solution"]["converged"], true);

    let o = simcache(dir.path(), &["cont", "chain", "--profile", &profile, "--k", "2,2", "--h", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn netduel_replays_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.toml", INSTANCE);
    let mut trace = String::from("timestamp,item_id,ingress_node\n");
    for i in 0..3000 {
        trace.push_str(&format!("{i},{},0\n", [2, 1, 3, 2, 0, 4, 2, 1, 3][i % 9]));
    }
    let trace = write(dir.path(), "trace.csv", &trace);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = simcache(
            dir.path(),
            &[
                "online", "netduel", "--instance", &inst, "--trace", &trace, "--window", "50", "--margin", "0.05",
                "--seed", "1", "--out", out.to_str().unwrap(),
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let series = rows(&out.join("series.csv"));
        assert!(!series.is_empty());
        assert_eq!(rows(&out.join("allocation.csv")).len(), 2);
        outputs.push(std::fs::read(out.join("series.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
