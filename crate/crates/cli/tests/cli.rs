use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PLANTED: &str = "A01,A02,A03,A04,A05,B01,B02,B03,B04,B05,C01,C02,C03,C04,C05";

fn mortclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mortclust"))
        .args(args)
        .env_remove("MORTCLUST_DATA")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mortclust(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    mortclust(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic corpus plus an ingested panel under `<tmp>/out`.
fn workspace() -> (TempDir, PathBuf, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    ok(&["synth", "--out", s(&data)]);
    ok(&["ingest", "--data-dir", s(&data), "--countries", PLANTED, "--out", s(&out)]);
    (tmp, data, out)
}

fn count(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn ingest_fixture_dir_lists_two_countries() {
    let tmp = TempDir::new().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/hmd");
    ok(&["ingest", "--data-dir", s(&fixtures), "--countries", "A01,B01", "--out", s(tmp.path())]);
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["countries"].as_array().unwrap().len(), 2);
    assert_eq!(m["years"].as_array().unwrap().len(), 51);
    assert_eq!(m["age_groups"].as_array().unwrap().len(), 24);
    let csv = fs::read(tmp.path().join("panel.csv")).unwrap();
    assert_eq!(m["checksum_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 2 * 51 * 24);
}

#[test]
fn missing_country_exits_2_with_report() {
    let tmp = TempDir::new().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/hmd");
    let out = mortclust(&["ingest", "--data-dir", s(&fixtures), "--countries", "A01,B01,ITA", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ITA"));
    assert!(!tmp.path().join("panel.csv").exists());
}

#[test]
fn parse_error_exits_3() {
    let tmp = TempDir::new().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/hmd");
    // 1958 carries a "." placeholder.
    assert_eq!(
        code(&["ingest", "--data-dir", s(&fixtures), "--countries", "A01,B01", "--years", "1958:2010", "--out", s(tmp.path())]),
        3
    );
    let bad = tmp.path().join("bad");
    fs::create_dir_all(&bad).unwrap();
    fs::write(bad.join("XXX.bltper_5x1.txt"), "not a life table\n").unwrap();
    assert_eq!(code(&["ingest", "--data-dir", s(&bad), "--countries", "XXX", "--out", s(tmp.path())]), 3);
}

#[test]
fn usage_errors_exit_2() {
    let (_tmp, _data, out) = workspace();
    assert_eq!(code(&["cluster", "--pipeline", "KMEANS", "--out", s(&out)]), 2);
    assert_eq!(code(&["sweep", "--pipeline", "ILC_KMEANS", "--kmax", "15", "--out", s(&out)]), 2);
    assert_eq!(code(&["consensus", "--out", s(&out)]), 2);
    assert_eq!(code(&["cluster", "--pipeline", "ILC_KMEANS", "--out", s(&out.join("nowhere"))]), 2);
    assert_eq!(code(&["ingest", "--countries", "A01", "--out", s(&out)]), 2);

    let cfg = out.join("bad.toml");
    fs::write(&cfg, "[pipelines.ILC_KMEANS]\nclusters = 2\n").unwrap();
    assert_eq!(code(&["--config", s(&cfg), "cluster", "--pipeline", "ILC_KMEANS", "--out", s(&out)]), 2);
}

#[test]
fn numerical_failure_exits_4_and_leaves_no_partial_output() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    ok(&["synth", "--out", s(&data), "--groups", "2", "--per-group", "1"]);
    fs::copy(data.join("A01.bltper_5x1.txt"), data.join("A02.bltper_5x1.txt")).unwrap();
    ok(&["ingest", "--data-dir", s(&data), "--countries", "A01,A02,B01", "--out", s(&out)]);
    assert_eq!(code(&["cluster", "--pipeline", "ILC_KMEANS", "--k", "3", "--out", s(&out)]), 4);
    let left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left.len(), 2, "{left:?}");
}

#[test]
fn cluster_writes_partition_report_and_figures() {
    let (_tmp, _data, out) = workspace();
    ok(&["cluster", "--pipeline", "HELLINGER_WARD", "--k", "3", "--out", s(&out)]);
    let dir = out.join("hellinger_ward_k3");
    let partition = fs::read_to_string(dir.join("partition.csv")).unwrap();
    assert_eq!(partition.lines().next(), Some("country,name,cluster"));
    assert_eq!(partition.lines().count(), 16);
    let report = json(&dir.join("report.json"));
    assert_eq!(report["k"], 3);
    assert_eq!(report["clusters"][0].as_array().unwrap().len(), 5);
    assert!(report["metrics"]["silhouette"].as_f64().unwrap() > 0.5);
    let dendro = fs::read_to_string(dir.join("dendrogram.svg")).unwrap();
    assert_eq!(count(&dendro, "class=\"leaf\""), 15);
    assert_eq!(count(&dendro, "class=\"merge\""), 14);
    let bands = fs::read_to_string(dir.join("dstar_bands.svg")).unwrap();
    assert_eq!(count(&bands, "class=\"median\""), 3);
    assert!(fs::read_to_string(dir.join("dendrogram.newick")).unwrap().ends_with(";\n"));

    ok(&["cluster", "--pipeline", "PCA_FUZZY", "--k", "3", "--out", s(&out)]);
    let dir = out.join("pca_fuzzy_k3");
    let partition = fs::read_to_string(dir.join("partition.csv")).unwrap();
    assert_eq!(partition.lines().next(), Some("country,name,cluster,membership_1,membership_2,membership_3"));
    let bars = fs::read_to_string(dir.join("membership.svg")).unwrap();
    assert_eq!(count(&bars, "class=\"bar\""), 15);
    let report = json(&dir.join("report.json"));
    assert!(report["metrics"].get("partition_coefficient").is_some());
    assert!(report["metrics"].get("silhouette").is_none());

    ok(&["cluster", "--pipeline", "ILC_KMEANS", "--k", "3", "--out", s(&out)]);
    let beta = fs::read_to_string(out.join("ilc_kmeans_k3/beta.svg")).unwrap();
    assert_eq!(count(&beta, "class=\"country-line\""), 15);
}

#[test]
fn single_cluster_run_has_no_silhouette() {
    let (_tmp, _data, out) = workspace();
    ok(&["cluster", "--pipeline", "FUNC_KMEANS", "--k", "1", "--out", s(&out)]);
    let dir = out.join("func_kmeans_k1");
    let report = json(&dir.join("report.json"));
    assert_eq!(report["k"], 1);
    assert!(report["metrics"].as_object().unwrap().is_empty());
    assert!(dir.join("e0.svg").exists());
}

#[test]
fn sweep_writes_indices_and_decreasing_wss() {
    let (_tmp, _data, out) = workspace();
    let stdout = ok(&["sweep", "--pipeline", "FUNC_KMEANS", "--kmin", "2", "--kmax", "8", "--out", s(&out)]);
    assert!(stdout.contains("silhouette: k = 3"));
    let dir = out.join("sweep_func_kmeans");
    let sweep = json(&dir.join("sweep.json"));
    let wss: Vec<f64> = sweep["objective"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(wss.len(), 7);
    assert!(wss.windows(2).all(|w| w[1] <= w[0]));
    for f in ["silhouette.svg", "calinski_harabasz.svg", "point_biserial.svg", "objective.svg", "sweep.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let svg = fs::read_to_string(dir.join("silhouette.svg")).unwrap();
    assert_eq!(count(&svg, "class=\"point\""), 6);
    assert_eq!(count(&svg, "class=\"selected\""), 1);
}

#[test]
fn consensus_counts_co_clustering() {
    let (_tmp, _data, out) = workspace();
    let mut reports = Vec::new();
    for p in ["HELLINGER_WARD", "ILC_KMEANS", "PCA_FUZZY", "FUNC_KMEANS"] {
        ok(&["cluster", "--pipeline", p, "--k", "3", "--out", s(&out)]);
        reports.push(out.join(format!("{}_k3/report.json", p.to_lowercase())));
    }
    let mut args = vec!["consensus", "--out"];
    args.push(s(&out));
    args.extend(reports.iter().map(|p| s(p)));
    ok(&args);
    let g = json(&out.join("consensus/consensus.json"));
    let edges = g["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 3 * 10);
    assert!(edges.iter().all(|e| e["weight"] == 4));
    let graphml = fs::read_to_string(out.join("consensus/consensus.graphml")).unwrap();
    assert_eq!(count(&graphml, "<node "), 15);
    assert_eq!(count(&graphml, "<edge "), 30);
    let svg = fs::read_to_string(out.join("consensus/consensus.svg")).unwrap();
    assert_eq!(count(&svg, "class=\"node\""), 15);
    assert_eq!(count(&svg, "class=\"node-label\""), 15);

    ok(&["consensus", "--out", s(&out), s(&reports[0])]);
    let g = json(&out.join("consensus/consensus.json"));
    assert!(g["edges"].as_array().unwrap().iter().all(|e| e["weight"] == 1));

    let other = out.join("other");
    let data = out.join("../data");
    ok(&["ingest", "--data-dir", s(&data), "--countries", "A01,A02,B01,B02", "--out", s(&other)]);
    ok(&["cluster", "--pipeline", "ILC_KMEANS", "--k", "2", "--out", s(&other)]);
    let mismatch = other.join("ilc_kmeans_k2/report.json");
    assert_eq!(code(&["consensus", "--out", s(&out), s(&reports[0]), s(&mismatch)]), 2);
}

#[test]
fn config_overrides_pipeline_defaults_and_is_checksummed() {
    let (_tmp, _data, out) = workspace();
    let cfg = out.join("run.toml");
    fs::write(&cfg, "[pipelines.ILC_KMEANS]\nk = 3\nrestarts = 10\n").unwrap();
    ok(&["--config", s(&cfg), "cluster", "--pipeline", "ILC_KMEANS", "--out", s(&out)]);
    let report = json(&out.join("ilc_kmeans_k3/report.json"));
    assert_eq!(report["spec"]["restarts"], 10);
    assert_eq!(report["config_checksum_sha256"].as_str().unwrap().len(), 64);
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data)]);
    let run = |name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args: Vec<&str> = extra.to_vec();
        args.extend(["replicate", "--data-dir", s(&data), "--countries", PLANTED, "--kmax", "5", "--out", s(&out)]);
        ok(&args);
        out
    };
    let a = tree(&run("a", &[]));
    let b = tree(&run("b", &["--sequential"]));
    assert_eq!(a.len(), b.len());
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        if pa.ends_with("manifest.json") {
            let strip = |v: &[u8]| {
                let mut j: serde_json::Value = serde_json::from_slice(v).unwrap();
                j.as_object_mut().unwrap().remove("created_unix");
                j
            };
            assert_eq!(strip(ba), strip(bb));
        } else {
            assert!(ba == bb, "{} differs", pa.display());
        }
    }
}
