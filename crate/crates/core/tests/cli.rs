use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use genregraph::audio::{encode_wav_pcm16, AudioClip};
use genregraph::nn::load_weights;
use genregraph::recommend::{build_catalog, recommend, PreparedData};
use genregraph::store::FeatureStore;
use genregraph::train::TrainConfig;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genregraph")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn full_desk_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    ok(&["--seed", "4", "synth", "--out", &s(&data)]);
    let manifest = std::fs::read_to_string(data.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().next().unwrap(), "path,genre,split");
    assert_eq!(manifest.lines().count(), 401);
    let wavs = walk(&data).into_iter().filter(|p| p.extension().is_some_and(|e| e == "wav")).count();
    assert_eq!(wavs, 400);

    ok(&["--seed", "4", "extract", "--manifest", &s(&data.join("manifest.csv")), "--out", &s(root)]);
    let store_path = root.join("features.grmf");
    let store = FeatureStore::load(&store_path).unwrap();
    assert_eq!(store.len(), 400);

    let start = Instant::now();
    let models = root.join("models");
    ok(&["--seed", "4", "train", "--store", &s(&store_path), "--out", &s(&models)]);
    assert!(start.elapsed().as_secs() < 300);
    for v in ["plain", "sage", "gcn"] {
        assert!(models.join(format!("{v}.grmw")).is_file());
        let csv = std::fs::read_to_string(models.join(format!("{v}_loss.csv"))).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "epoch,train_loss,eval_loss");
        assert_eq!(csv.lines().count(), 51);
    }

    let weights: Vec<String> = ["plain", "sage", "gcn"].iter().map(|v| s(&models.join(format!("{v}.grmw")))).collect();
    let store_arg = s(&store_path);
    let mut args = vec!["--seed", "4", "evaluate", "--store", &store_arg];
    args.push("--weights");
    args.extend(weights.iter().map(String::as_str));
    let report_dir = s(&root.join("report"));
    let mut oracle_args = args.clone();
    oracle_args.extend(["--out", report_dir.as_str()]);
    let text = ok(&oracle_args);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1].split_whitespace().last(), Some("GCN"));
    for row in &lines[2..10] {
        assert_eq!(row.split_whitespace().last(), Some("100.00"), "{row}");
    }
    assert!(lines[10].starts_with("Average"));
    assert_eq!(lines.len(), 11);
    let json = std::fs::read_to_string(root.join("report/report.json")).unwrap();
    assert!(json.contains("\"attachment\": \"oracle\""));

    let mut knn_args = args.clone();
    knn_args.extend(["--attachment", "feature-knn", "--knn-k", "5"]);
    let knn_text = ok(&knn_args);
    assert!(knn_text.contains("attachment: feature_knn"));

    // Recommendation for a training song matches the library's list.
    let model = load_weights(models.join("gcn.grmw")).unwrap();
    let data = PreparedData::new(&store, 4).unwrap();
    let cfg = TrainConfig::default().with_seed(4).with_variant(model.variant);
    let catalog = build_catalog(&model, &data, &cfg).unwrap();
    let song = data.graph.node_ids()[3].clone();
    let want = recommend(&song, catalog.get(&song).unwrap(), &catalog, 10).unwrap();
    let gcn_weights = s(&models.join("gcn.grmw"));
    let out = ok(&["--seed", "4", "recommend", "--store", &store_arg, "--weights", &gcn_weights, "--song", &song]);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 10);
    for (i, (row, item)) in rows.iter().zip(&want.items).enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
        assert_eq!(row[1], item.song_id);
        assert_eq!(row[3], format!("{:.6}", item.distance));
        assert_ne!(row[1], song);
    }
    // Rank 1 is the nearest other song in embedding space.
    let nearest = catalog
        .ids()
        .iter()
        .filter(|id| **id != song)
        .min_by(|a, b| {
            let da = genregraph::matrix::euclidean(catalog.get(a).unwrap(), catalog.get(&song).unwrap());
            let db = genregraph::matrix::euclidean(catalog.get(b).unwrap(), catalog.get(&song).unwrap());
            da.total_cmp(&db).then(a.cmp(b))
        })
        .unwrap();
    assert_eq!(rows[0][1], nearest);

    // A held-out song and an audio file work as queries too.
    let held = data.held_out_ids[0].clone();
    let out = ok(&["--seed", "4", "recommend", "--store", &store_arg, "--weights", &gcn_weights, "--song", &held]);
    assert_eq!(out.lines().count(), 11);
    let wav = s(&data_path(&data_dir(root), &held));
    let out = ok(&[
        "--seed", "4", "recommend", "--store", &store_arg, "--weights", &gcn_weights, "--audio", &wav,
        "--attachment", "feature-knn",
    ]);
    assert_eq!(out.lines().count(), 11);

    let bad = bin(&["--seed", "4", "recommend", "--store", &store_arg, "--weights", &gcn_weights, "--song", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown song id"));

    // Weights trained on another store are rejected.
    let other = root.join("other");
    ok(&["--seed", "4", "synth", "--out", &s(&other.join("data")), "--genres", "2", "--songs-per-genre", "4"]);
    ok(&["--seed", "4", "extract", "--manifest", &s(&other.join("data/manifest.csv")), "--out", &s(&other)]);
    let mismatch = bin(&[
        "--seed", "4", "evaluate", "--store", &s(&other.join("features.grmf")), "--weights", &gcn_weights,
    ]);
    assert_eq!(mismatch.status.code(), Some(2));
}

fn data_dir(root: &Path) -> PathBuf {
    root.join("data")
}

fn data_path(data: &Path, id: &str) -> PathBuf {
    data.join(format!("{id}.wav"))
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn short_file_is_a_named_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let clip = AudioClip::new(vec![0.1; 3 * 22_050], 22_050).unwrap();
    std::fs::write(dir.path().join("short.wav"), encode_wav_pcm16(&clip)).unwrap();
    std::fs::write(dir.path().join("manifest.csv"), "path,genre,split\nshort.wav,Rock,\n").unwrap();
    let out = bin(&["extract", "--manifest", &s(&dir.path().join("manifest.csv")), "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("short.wav"), "{err}");
    assert!(!dir.path().join("features.grmf").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin(&["train", "--store", "x", "--variant", "gat", "--out", "y"]).status.code(), Some(2));
    assert_eq!(bin(&["dance"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "{\"nope\": 1}").unwrap();
    assert_eq!(bin(&["--config", &s(&cfg), "synth", "--out", &s(dir.path())]).status.code(), Some(2));
    assert_eq!(bin(&["synth", "--out", &s(dir.path()), "--songs-per-genre", "1"]).status.code(), Some(2));
}
