//! Dataset fixtures, evaluation and short end-to-end training runs.

use std::path::PathBuf;

use photomesh::data::{load_csv, split_default, Dataset, Schema};
use photomesh::model::{build_benchmark_model, load_checkpoint, save_checkpoint, Encoding, Model, Stage};
use photomesh::trainer::{evaluate, train, TrainConfig};
use photomesh::{Batch, MeshKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(format!("{name}.csv"))
}

#[test]
fn bundled_fixtures_have_expected_shapes() {
    let digits = load_csv(&fixture("digits"), &Schema::digits()).unwrap();
    assert_eq!((digits.len(), digits.width(), digits.num_classes), (1797, 64, 10));
    assert!(digits.features.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    let iris = load_csv(&fixture("iris"), &Schema::iris()).unwrap();
    assert_eq!((iris.len(), iris.width(), iris.num_classes), (150, 4, 3));
    assert!(iris.features.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(load_csv(&fixture("iris"), &Schema::iris()).unwrap(), iris);
}

#[test]
fn short_rows_are_reported_with_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut text = String::from("label");
    for i in 0..64 {
        text.push_str(&format!(",f{i}"));
    }
    text.push('\n');
    text.push_str(&format!("3{}\n", ",1".repeat(64)));
    text.push_str(&format!("4{}\n", ",1".repeat(63)));
    std::fs::write(&path, text).unwrap();
    let err = load_csv(&path, &Schema::digits()).unwrap_err().to_string();
    assert!(err.contains("bad.csv:3:"), "{err}");
}

#[test]
fn random_logits_give_chance_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1000;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..10).map(|_| rng.gen::<f64>()).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    let data = Dataset::new("noise", Batch::from_rows(&rows).unwrap(), labels, 10).unwrap();
    let model = Model::new(10, vec![Stage::Bias(vec![0.0; 10])], Encoding::Raw).unwrap();
    let all: Vec<usize> = (0..n).collect();
    let acc = evaluate(&model, &data, &all).unwrap();
    assert!((acc - 0.1).abs() <= 0.05, "{acc}");
}

#[test]
fn checkpoint_file_round_trip_preserves_predictions() {
    let iris = load_csv(&fixture("iris"), &Schema::iris()).unwrap();
    let splits = split_default(iris.len(), 2).unwrap();
    let cfg = TrainConfig { epochs: 5, seed: 2, ..TrainConfig::iris() };
    let model = build_benchmark_model(MeshKind::Clements, 4, 4, 3, 2).unwrap();
    let trained = train(model, &iris, &splits, &cfg).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&trained, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, trained);
    let (x, _) = iris.gather(&splits.test);
    assert_eq!(back.logits(&x).unwrap(), trained.logits(&x).unwrap());
}

#[test]
fn short_iris_run_learns() {
    let iris = load_csv(&fixture("iris"), &Schema::iris()).unwrap();
    let splits = split_default(iris.len(), 0).unwrap();
    let cfg = TrainConfig { epochs: 60, ..TrainConfig::iris() };
    let model = build_benchmark_model(MeshKind::Fldzhyan, 4, 4, 3, 0).unwrap();
    let out = train(model, &iris, &splits, &cfg).unwrap();
    let first = out.metrics.first().unwrap().train_loss;
    let last = out.metrics.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
    assert!(out.metrics.iter().all(|m| (0.0..=1.0).contains(&m.val_acc)));
    assert!(evaluate(&out.model, &iris, &splits.test).unwrap() > 0.5);
}
