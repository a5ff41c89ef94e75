use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn atlanta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlanta"))
        .args(args)
        .env_remove("ATLANTA_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = atlanta(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn golden_lines(name: &str) -> Vec<String> {
    golden(name).lines().map(str::to_string).collect()
}

/// Keys of a pretty-printed JSON object at the given indent, in output order.
fn keys_at(text: &str, indent: usize) -> Vec<String> {
    let prefix = format!("{}\"", " ".repeat(indent));
    text.lines()
        .filter_map(|l| l.strip_prefix(&prefix))
        .filter_map(|l| l.split_once("\":").map(|(k, _)| k.to_string()))
        .collect()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["synth", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

fn truth(data: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(data.with_extension("truth.json")).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn synth_flags_outliers_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &["--n", "500", "--rho", "0.4", "--seed", "9"]);
    let b = synth(dir.path(), "b.csv", &["--n", "500", "--rho", "0.4", "--seed", "9"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(a.with_extension("truth.json")).unwrap(),
        fs::read(b.with_extension("truth.json")).unwrap()
    );
    let t = truth(&a);
    assert_eq!(t["outlier_rows"].as_array().unwrap().len(), 200);
    let data_rows = fs::read_to_string(&a).unwrap().lines().count() - 1;
    assert_eq!(data_rows, 500);
    for row in t["outlier_rows"].as_array().unwrap() {
        let j = row.as_u64().unwrap() as usize;
        assert_eq!(t["labels"][j]["class"], "outlier");
    }
}

#[test]
fn zero_noise_gets_the_threshold_floor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.csv");
    let out = atlanta(&["synth", "--kappa", "0", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("floor"));
    let t = truth(&path);
    assert_eq!(t["recommended_tau_deg"].as_f64().unwrap(), 0.1);
    assert_eq!(t["tau_floored"], true);
}

#[test]
fn noiseless_estimates_agree_across_methods() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "s.csv", &["--n", "300", "--rho", "0.4", "--kappa", "0", "--seed", "3"]);
    let input = data.to_str().unwrap();
    let mut counts = Vec::new();
    for method in ["rot", "exp", "ste-circle", "ste-square", "scs"] {
        let text = ok(&[
            "estimate", "--input", input, "--tau-deg", "2", "--method", method, "--max-iter", "20000000",
            "--cull-rotation-ball",
        ]);
        let row: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(row["certified"], true, "{method}");
        assert_eq!(row["gap"], 0, "{method}");
        // every direction within about tau of the truth keeps all inliers, so
        // the certified maximizer can sit anywhere in that region
        assert!(row["error_deg"].as_f64().unwrap() <= 2.0, "{method}: {row}");
        counts.push(row["inliers"].as_u64().unwrap());
    }
    assert!(counts.iter().all(|&c| c == counts[0]), "{counts:?}");
    assert!(counts[0] >= 180);
}

#[test]
fn estimate_schemas_match_the_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "s.csv", &["--n", "200", "--world", "manhattan", "--seed", "4"]);
    let input = data.to_str().unwrap();
    let json = ok(&["estimate", "--input", input]);
    assert_eq!(keys_at(&json, 2), golden_lines("estimate_keys.txt"));
    let row: Value = serde_json::from_str(&json).unwrap();
    assert!(row["error_m_deg"].is_number());
    assert_eq!(row["kappa"].as_f64(), Some(0.01));

    let csv_text = ok(&["estimate", "--input", input, "--output", "csv"]);
    let mut lines = csv_text.lines();
    assert_eq!(lines.next().unwrap(), golden("estimate_header.csv").trim_end());
    assert_eq!(lines.count(), 1);
}

#[test]
fn ransac_completes_without_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "s.csv", &["--n", "300", "--seed", "5"]);
    let row: Value = serde_json::from_str(&ok(&["estimate", "--input", data.to_str().unwrap(), "--method", "ransac"])).unwrap();
    assert_eq!(row["method"], "ransac");
    assert_eq!(row["certified"], false);
    // ceil(ln 0.01 / ln(1 - 0.6^2)) for the sidecar's rho = 0.4
    assert_eq!(row["iterations"], 11);
}

#[test]
fn unterminated_search_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "s.csv", &["--n", "300", "--seed", "6"]);
    let out = atlanta(&["estimate", "--input", data.to_str().unwrap(), "--method", "rot", "--max-iter", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let row: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(row["certified"], false);
    assert!(row["gap"].as_u64().unwrap() >= 1);
}

#[test]
fn bad_input_exits_with_one_and_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "nx,ny,nz\n0,0,1\n1,0\n").unwrap();
    let out = atlanta(&["estimate", "--input", bad.to_str().unwrap(), "--tau-deg", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    // no sidecar and no threshold
    let good = dir.path().join("good.csv");
    fs::write(&good, "0,0,1\n1,0,0\n").unwrap();
    let out = atlanta(&["estimate", "--input", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    let out = atlanta(&["estimate", "--input", good.to_str().unwrap(), "--tau-deg", "2", "--method", "sphere"]);
    assert_eq!(out.status.code(), Some(1), "usage errors are not an unterminated search");
    assert!(out.stdout.is_empty());
}

#[test]
fn manhattan_scene_has_two_orthogonal_walls() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "m.csv", &["--n", "500", "--rho", "0.2", "--kappa", "0.005", "--world", "manhattan", "--seed", "1"]);
    let json = ok(&["atlanta", "--input", data.to_str().unwrap()]);
    assert_eq!(keys_at(&json, 2), golden_lines("atlanta_keys.txt"));
    let mut horizontal_keys = keys_at(&json, 6);
    horizontal_keys.truncate(3);
    assert_eq!(horizontal_keys, golden_lines("horizontal_keys.txt"));
    let report: Value = serde_json::from_str(&json).unwrap();
    let hs = report["horizontals"].as_array().unwrap();
    assert_eq!(hs.len(), 2);
    let dir_of = |h: &Value| -> Vec<f64> { h["direction"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    let (a, b) = (dir_of(&hs[0]), dir_of(&hs[1]));
    let cos = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs();
    assert!((cos.acos().to_degrees() - 90.0).abs() <= 1.0);
    let az_gap = (hs[0]["azimuth_deg"].as_f64().unwrap() - hs[1]["azimuth_deg"].as_f64().unwrap()).abs();
    assert!((az_gap - 90.0).abs() <= 1.0);
    assert!(report["error_m_deg"].as_f64().unwrap() <= 1.0);
}

#[test]
fn four_wall_scene_has_four_horizontals() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "w.csv", &["--n", "800", "--rho", "0.2", "--kappa", "0.005", "--world", "atlanta:4", "--seed", "2"]);
    let report: Value = serde_json::from_str(&ok(&["atlanta", "--input", data.to_str().unwrap(), "--method", "ste-square"])).unwrap();
    assert_eq!(report["horizontals"].as_array().unwrap().len(), 4);
    assert!(report["error_m_deg"].is_null());
}

#[test]
fn vertical_only_input_has_no_horizontals() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    let rows: String = (0..40).map(|i| if i % 2 == 0 { "0,0,1\n" } else { "0,0,-1\n" }).collect();
    fs::write(&path, rows).unwrap();
    let report: Value = serde_json::from_str(&ok(&["atlanta", "--input", path.to_str().unwrap(), "--tau-deg", "2"])).unwrap();
    assert_eq!(report["vertical_inliers"], 40);
    assert!(report["horizontals"].as_array().unwrap().is_empty());
}

#[test]
fn point_clouds_are_accepted_with_estimated_normals() {
    // floor and two walls of a box, as an ASCII PLY without normals
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("room.ply");
    let mut pts = Vec::new();
    for i in 0..30 {
        for j in 0..30 {
            let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
            pts.push([u, v, 0.0]);
            pts.push([u, 0.0, v + 0.05]);
            pts.push([0.0, u + 0.05, v + 0.05]);
        }
    }
    let mut text = format!("ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n", pts.len());
    for p in &pts {
        text += &format!("{} {} {}\n", p[0], p[1], p[2]);
    }
    fs::write(&path, text).unwrap();
    let input = path.to_str().unwrap();
    let row: Value = serde_json::from_str(&ok(&[
        "estimate", "--input", input, "--tau-deg", "2", "--grid-step", "0.15", "--estimate-normals", "8",
    ]))
    .unwrap();
    assert_eq!(row["certified"], true);
    // each of the three planes is parallel or perpendicular to any axis
    let v: Vec<f64> = ["vx", "vy", "vz"].iter().map(|k| row[k].as_f64().unwrap()).collect();
    assert!(v.iter().any(|c| c.abs() > 0.999), "{v:?}");

    let out = atlanta(&["estimate", "--input", input, "--tau-deg", "2"]);
    assert_eq!(out.status.code(), Some(1), "PLY without normals needs --estimate-normals");
}

#[test]
fn bench_rows_cover_the_grid_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    ok(&["bench", "--grid", "controlled", "--trials", "1", "--out", out.to_str().unwrap(), "--workers", "3"]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), golden("record_header.csv").trim_end());
    let rows = csv_rows(&text);
    let methods = ["exp", "ste-circle", "ste-square", "scs", "ransac"];
    assert_eq!(rows.len(), 18 * methods.len());
    let mut cells = Vec::new();
    for group in rows.chunks(methods.len()) {
        let names: Vec<&str> = group.iter().map(|r| r["method"].as_str()).collect();
        assert_eq!(names, methods);
        let key = (group[0]["kappa"].clone(), group[0]["rho"].clone());
        assert!(group.iter().all(|r| (r["kappa"].clone(), r["rho"].clone()) == key));
        cells.push(key.clone());
        // the certified strategies agree; RANSAC never beats them
        let bnb: Vec<u64> = group[..4].iter().map(|r| r["inliers"].parse().unwrap()).collect();
        assert!(bnb.iter().all(|&c| c == bnb[0]), "{key:?}: {bnb:?}");
        assert!(group[..4].iter().all(|r| r["certified"] == "true"));
        assert!(group[4]["inliers"].parse::<u64>().unwrap() <= bnb[0]);
        // the median error column is computable downstream
        assert!(group.iter().all(|r| r["error_deg"].parse::<f64>().is_ok()));
    }
    let expected: Vec<(String, String)> = ["0.005", "0.01", "0.02"]
        .iter()
        .flat_map(|k| ["0.1", "0.2", "0.3", "0.4", "0.5", "0.6"].map(|r| (k.to_string(), r.to_string())))
        .collect();
    assert_eq!(cells, expected);
}

#[test]
fn bench_output_does_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let out = dir.path().join(format!("b{workers}.csv"));
        ok(&[
            "bench", "--grid", "manhattan", "--trials", "2", "--n", "200", "--methods", "exp,ransac", "--seed", "11",
            "--workers", workers, "--out", out.to_str().unwrap(),
        ]);
        // runtime is the only column allowed to differ
        csv_rows(&fs::read_to_string(out).unwrap())
            .into_iter()
            .map(|mut r| {
                r.remove("runtime_ms");
                r
            })
            .collect::<Vec<_>>()
    };
    let one = run("1");
    assert_eq!(one.len(), 18 * 2 * 2);
    assert!(one.iter().filter(|r| r["method"] == "exp").all(|r| r["error_m_deg"].parse::<f64>().is_ok()));
    assert_eq!(one, run("4"));
}

#[test]
fn bench_worker_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_atlanta"))
        .args(["bench", "--grid", "high-outlier", "--trials", "1", "--n", "100", "--methods", "ransac"])
        .args(["--out", out.to_str().unwrap()])
        .env("ATLANTA_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(csv_rows(&fs::read_to_string(out).unwrap()).len(), 18);

    let bad = atlanta(&["bench", "--grid", "controlled", "--workers", "many"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(atlanta(&["--help"]).status.success());
}

#[test]
fn sidecar_schema_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "t.csv", &["--n", "50", "--world", "manhattan"]);
    let text = fs::read_to_string(data.with_extension("truth.json")).unwrap();
    assert_eq!(keys_at(&text, 2), golden_lines("truth_keys.txt"));
    let t: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(t["world"], "manhattan");
    assert_eq!(t["r_gt"].as_array().unwrap().len(), 3);
}
