use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use mercat::io::{self, RunManifest};
use mercat::{SphereEmbedding, SpherePoint};
use tempfile::TempDir;

fn mercat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mercat"))
        .args(args)
        .env("MERCAT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mercat(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn generate(dir: &TempDir, kind: &str, n: Option<&str>, seed: &str) -> String {
    let out = path(dir, &format!("{kind}-{seed}.csv"));
    let mut args = vec!["generate", "--kind", kind, "--seed", seed, "--out", &out];
    if let Some(n) = n {
        args.extend(["--n", n]);
    }
    ok(&args);
    out
}

fn key_values(stdout: &str) -> Vec<(String, String)> {
    stdout
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn value(kv: &[(String, String)], key: &str) -> f64 {
    kv.iter()
        .find(|(k, _)| k == key)
        .unwrap()
        .1
        .parse()
        .unwrap()
}

#[test]
fn generate_shapes() {
    let dir = TempDir::new().unwrap();
    let x = io::read_data_csv(Path::new(&generate(&dir, "circle", Some("900"), "0"))).unwrap();
    assert_eq!((x.n(), x.d()), (900, 2));
    let s = io::read_data_csv(Path::new(&generate(&dir, "gauss5_s", None, "1"))).unwrap();
    assert_eq!(s.n(), 750);
    assert!(s.labels().is_some());
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = mercat(&[
        "generate",
        "--kind",
        "spiral",
        "--out",
        &path(&dir, "x.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_csv_round_trip() {
    let dir = TempDir::new().unwrap();
    let first = generate(&dir, "gauss5", None, "2");
    let x = io::read_data_csv(Path::new(&first)).unwrap();
    let second = path(&dir, "copy.csv");
    io::write_data_csv(Path::new(&second), &x).unwrap();
    let y = io::read_data_csv(Path::new(&second)).unwrap();
    assert_eq!(x.values(), y.values());
    assert_eq!(x.labels(), y.labels());
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
}

#[test]
fn malformed_cell_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.csv");
    std::fs::write(&bad, "x0,x1\n1,2\n3,x\n5,6\n").unwrap();
    let out = mercat(&["embed", "--input", &bad, "--out", &path(&dir, "e.csv")]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 2, column 2"), "{stderr}");
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = mercat(&[
        "embed",
        "--input",
        &path(&dir, "absent.csv"),
        "--out",
        &path(&dir, "e.csv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_iterations_keep_the_initialisation() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "circle", Some("200"), "0");
    let a = path(&dir, "a.csv");
    let b = path(&dir, "b.csv");
    ok(&[
        "embed", "--input", &data, "--out", &a, "--rank", "2", "--iters", "0", "--seed", "5",
    ]);
    ok(&[
        "embed", "--input", &data, "--out", &b, "--rank", "2", "--iters", "0", "--seed", "5",
        "--lr", "0.5",
    ]);
    // the learning rate never acts without a step
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let trace = std::fs::read_to_string(format!("{a}.loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    let (y, _) = io::read_embedding_csv(Path::new(&a)).unwrap();
    assert_eq!(y.len(), 200);
}

#[test]
fn embed_and_metrics_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "circle", Some("300"), "3");
    let emb = path(&dir, "emb.csv");
    ok(&[
        "embed", "--input", &data, "--out", &emb, "--rank", "2", "--iters", "40",
    ]);
    let report = path(&dir, "metrics.txt");
    let stdout = ok(&[
        "metrics",
        "--data",
        &data,
        "--embedding",
        &emb,
        "--rank",
        "2",
        "--out",
        &report,
    ]);
    let kv = key_values(&stdout);
    for key in [
        "angle_preservation",
        "distance_preservation",
        "neighborhood_preservation",
        "density_preservation",
    ] {
        let v = value(&kv, key);
        assert!((-1.0..=1.0).contains(&v), "{key}={v}");
    }
    assert!(value(&kv, "angle_preservation") > 0.9);
    assert!(value(&kv, "neighborhood_preservation") > 0.5);
    assert_eq!(std::fs::read_to_string(&report).unwrap(), stdout);
    assert!(Path::new(&format!("{report}.csv")).exists());
    assert!(io::manifest_path(Path::new(&report)).exists());

    // the loss trace trends down: compare the mean of the first and last quarter
    let trace = std::fs::read_to_string(format!("{emb}.loss.csv")).unwrap();
    let losses: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 40);
    let head = losses[..10].iter().sum::<f64>();
    let tail = losses[30..].iter().sum::<f64>();
    assert!(tail < head, "head {head} tail {tail}");
}

#[test]
fn shuffled_rows_lose_angle_preservation() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "gauss5", None, "4");
    let x = io::read_data_csv(Path::new(&data)).unwrap();
    let emb = path(&dir, "emb.csv");
    ok(&[
        "embed", "--input", &data, "--out", &emb, "--rank", "4", "--iters", "10",
    ]);

    // a fixed permutation with no structure relative to the clusters
    let n = x.n();
    let perm: Vec<usize> = (0..n).map(|i| (i * 337 + 11) % n).collect();
    let rows: Vec<Vec<f64>> = perm.iter().map(|&i| x.row(i).to_vec()).collect();
    let shuffled = mercat::DataMatrix::from_rows(&rows).unwrap();
    let shuffled_path = path(&dir, "shuffled.csv");
    io::write_data_csv(Path::new(&shuffled_path), &shuffled).unwrap();

    let kv = key_values(&ok(&[
        "metrics",
        "--data",
        &shuffled_path,
        "--embedding",
        &emb,
        "--rank",
        "4",
    ]));
    let angle = value(&kv, "angle_preservation");
    assert!(angle.abs() < 0.2, "angle {angle}");
}

#[test]
fn metrics_reject_k_at_least_n() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "circle", Some("30"), "0");
    let emb = path(&dir, "emb.csv");
    ok(&[
        "embed", "--input", &data, "--out", &emb, "--rank", "2", "--iters", "1",
    ]);
    let out = mercat(&["metrics", "--data", &data, "--embedding", &emb, "--k", "30"]);
    assert_eq!(out.status.code(), Some(2));
}

fn equatorial_band(n: usize) -> SphereEmbedding {
    let points = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            SpherePoint::new(PI / 2.0 + 0.01 * (7.0 * t * PI).sin(), 2.0 * PI * t - PI)
        })
        .collect();
    SphereEmbedding::new(points).unwrap()
}

#[test]
fn project_keeps_an_equatorial_band_flat() {
    let dir = TempDir::new().unwrap();
    let emb = path(&dir, "band.csv");
    io::write_embedding_csv(Path::new(&emb), &equatorial_band(120), None).unwrap();
    let out = path(&dir, "band.xy.csv");
    ok(&[
        "project",
        "--embedding",
        &emb,
        "--out",
        &out,
        "--format",
        "csv",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let ys: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ys.len(), 120);
    let spread = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    assert!(spread < 0.05, "max |y| = {spread}");
    assert!(io::manifest_path(Path::new(&out)).exists());
}

#[test]
fn project_svg_is_well_formed() {
    let dir = TempDir::new().unwrap();
    let emb = path(&dir, "band.csv");
    let labels: Vec<String> = (0..60)
        .map(|i| {
            if i % 2 == 0 {
                "a&b".into()
            } else {
                "<c>".into()
            }
        })
        .collect();
    io::write_embedding_csv(Path::new(&emb), &equatorial_band(60), Some(&labels)).unwrap();
    let out = path(&dir, "band.svg");
    ok(&[
        "project",
        "--embedding",
        &emb,
        "--out",
        &out,
        "--color-by-label",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("valid xml");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let circles = doc
        .descendants()
        .filter(|n| n.has_tag_name("circle"))
        .count();
    // one marker per point plus one legend swatch per label
    assert_eq!(circles, 62);
    let legend: Vec<&str> = doc
        .descendants()
        .filter(|n| n.has_tag_name("text"))
        .filter_map(|n| n.text())
        .collect();
    assert_eq!(legend, ["a&b", "<c>"]);
}

#[test]
fn spiked_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.json");
    let b = path(&dir, "b.json");
    let args = |out: &str| {
        vec![
            "spiked".to_string(),
            "--n".into(),
            "60".into(),
            "--d".into(),
            "60".into(),
            "--triples".into(),
            "50".into(),
            "--seeds".into(),
            "0,1".into(),
            "--out".into(),
            out.to_string(),
        ]
    };
    let run = |out: &str| ok(&args(out).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(run(&a), run(&b));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(io::manifest_path(Path::new(&a)).exists());
}

#[test]
fn spiked_rejects_zero_spikes() {
    let out = mercat(&["spiked", "--r", "0", "--n", "40", "--d", "40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn effective_rank_of_planar_data() {
    let dir = TempDir::new().unwrap();
    // points in a 2-plane of 10 dimensions
    let rows: Vec<Vec<f64>> = (0..80)
        .map(|i| {
            let (u, v) = ((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos() * 2.0);
            (0..10)
                .map(|j| u * (j as f64 + 1.0) + v * (10.0 - j as f64))
                .collect()
        })
        .collect();
    let data = path(&dir, "plane.csv");
    io::write_data_csv(
        Path::new(&data),
        &mercat::DataMatrix::from_rows(&rows).unwrap(),
    )
    .unwrap();
    let out = path(&dir, "er.csv");
    let run = mercat(&[
        "effective-rank",
        "--data",
        &data,
        "--rank",
        "2",
        "--anchors",
        "500",
        "--out",
        &out,
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("clipped to n = 80"), "{stderr}");
    let kv = key_values(&String::from_utf8(run.stdout).unwrap());
    assert_eq!(value(&kv, "anchors"), 80.0);
    assert!(value(&kv, "max_effective_rank") <= 3.5);

    let hist = std::fs::read_to_string(format!("{out}.hist.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 80);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 81);
}

#[test]
fn generate_replays_from_manifest() {
    let dir = TempDir::new().unwrap();
    let first = generate(&dir, "smiley", Some("400"), "9");
    let manifest = io::manifest_path(Path::new(&first));
    let recorded = RunManifest::read(&manifest).unwrap();
    assert_eq!(recorded.command, "generate");
    assert_eq!(recorded.seed, 9);
    let before = std::fs::read(&first).unwrap();
    std::fs::remove_file(&first).unwrap();
    ok(&["--from-manifest", &manifest.display().to_string()]);
    assert_eq!(std::fs::read(&first).unwrap(), before);
}
