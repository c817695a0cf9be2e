#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;
use tangent_subspace::io::{self, Dtype, EmbeddingFile};
use tangent_subspace::linalg;
use tangent_subspace::sphere::{self, UnitVector};
use tangent_subspace::LabeledEmbeddingSet;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/small.emb");
/// Top-2 eigenvalue sums for class c1 at λ = 0.5 on the fixture; the core
/// crate's golden test recomputes these with the brute-force oracle.
const GOLDEN_SPHERE: f64 = 7.463788846291566e-2;
const GOLDEN_EUCLIDEAN: f64 = 6.938398214716263e-2;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_subspace")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
    stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text.trim()).unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["gen-synth", "--output", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.pss1");
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["fit"]).0, 3);
    assert_eq!(run(&["nonsense"]).0, 3);
    assert_eq!(run(&["fit", "--input", FIXTURE, "--target", "c0", "--k", "0", "--output", s(&out)]).0, 3);
    assert_eq!(run(&["fit", "--input", FIXTURE, "--target", "c0", "--lambda", "1.5", "--output", s(&out)]).0, 3);
    assert_eq!(run(&["fit", "--input", FIXTURE, "--target", "nope", "--output", s(&out)]).0, 3);
    assert_eq!(run(&["fit", "--input", FIXTURE, "--target", "c0", "--k", "8", "--output", s(&out)]).0, 3);
    assert_eq!(run(&["fit", "--input", "/nonexistent.emb", "--target", "c0", "--output", s(&out)]).0, 1);
    assert_eq!(run(&["compare", "--input", FIXTURE, "--target", "c0", "--k", "1", "--methods", "fkt"]).0, 3);
    assert_eq!(run(&["gen-synth", "--classes", "3", "--n", "5", "--d", "6", "--kappa", "1", "--planted-k", "2", "--output", s(&out)]).0, 3);
    assert!(!out.exists());
}

#[test]
fn fit_matches_golden_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for (geometry, golden) in [("sphere", GOLDEN_SPHERE), ("euclidean", GOLDEN_EUCLIDEAN)] {
        let a = dir.path().join(format!("{geometry}_a.pss1"));
        let b = dir.path().join(format!("{geometry}_b.pss1"));
        let fit = |p: &Path| ok(&["fit", "--input", FIXTURE, "--target", "c1", "--k", "2", "--geometry", geometry, "--output", s(p)]);
        let report = json(&fit(&a));
        fit(&b);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let sum = report["eigenvalue_sum"].as_f64().unwrap();
        assert!((sum - golden).abs() < 1e-9, "{geometry}: {sum} vs {golden}");
        assert_eq!(report["k"], 2);
        assert_eq!(report["class_name"], "c1");
        let sub = io::read_subspace(&a).unwrap();
        assert_eq!(sub.k(), 2);
        assert_eq!(sub.base_point().is_some(), geometry == "sphere");
    }
}

#[test]
fn theme_fit_uses_file_stem() {
    let dir = tempfile::tempdir().unwrap();
    let set = io::read_labeled(FIXTURE).unwrap();
    let theme = dir.path().join("warm.emb");
    io::write_embeddings(&EmbeddingFile::unlabeled(set.class_matrix(2), Dtype::F64), &theme).unwrap();
    let out = dir.path().join("warm.pss1");
    let report = json(&ok(&["fit", "--input", FIXTURE, "--theme", s(&theme), "--k", "2", "--output", s(&out)]));
    assert_eq!(report["class_name"], "warm");
    assert_eq!(io::read_subspace(&out).unwrap().class_name(), "warm");
}

#[test]
fn projection_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let sub_path = dir.path().join("s.pss1");
    ok(&["fit", "--input", FIXTURE, "--target", "c0", "--k", "2", "--output", s(&sub_path)]);
    let sub = io::read_subspace(&sub_path).unwrap();
    let mu = sub.base_point().unwrap().clone();

    let once = dir.path().join("once.emb");
    let twice = dir.path().join("twice.emb");
    ok(&["project", "--subspace", s(&sub_path), "--input", FIXTURE, "--output", s(&once)]);
    ok(&["project", "--subspace", s(&sub_path), "--input", s(&once), "--output", s(&twice)]);
    let a = io::read_labeled(&once).unwrap();
    let b = io::read_labeled(&twice).unwrap();
    assert!((a.points() - b.points()).amax() < 1e-8);
    assert_eq!(a.labels(), io::read_labeled(FIXTURE).unwrap().labels());

    let comp = dir.path().join("comp.emb");
    ok(&["project", "--subspace", s(&sub_path), "--input", FIXTURE, "--complement", "--output", s(&comp)]);
    for x in io::read_labeled(&comp).unwrap().points().column_iter() {
        let v = sphere::log_map(&mu, &UnitVector::new(x.into_owned()).unwrap()).unwrap();
        assert!((sub.basis().transpose() * v.vec()).amax() < 1e-8);
    }

    let copies = dir.path().join("mu.emb");
    let m = DMatrix::from_columns(&[mu.as_vector().clone(), mu.as_vector().clone(), mu.as_vector().clone()]);
    io::write_embeddings(&EmbeddingFile::unlabeled(m, Dtype::F64), &copies).unwrap();
    let out = dir.path().join("mu_out.emb");
    ok(&["project", "--subspace", s(&sub_path), "--input", s(&copies), "--output", s(&out)]);
    for x in io::read_embeddings(&out).unwrap().points.column_iter() {
        assert!((x - mu.as_vector()).amax() < 1e-12);
    }
}

#[test]
fn mean_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pair.emb");
    let out = dir.path().join("mean.emb");
    io::write_embeddings(&EmbeddingFile::unlabeled(DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), Dtype::F64), &input)
        .unwrap();
    ok(&["mean", "--input", s(&input), "--output", s(&out)]);
    let m = io::read_embeddings(&out).unwrap().points;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert_eq!(m.shape(), (3, 1));
    assert!((m.column(0) - DVector::from_vec(vec![h, h, 0.0])).amax() < 1e-9);

    let single = dir.path().join("one.emb");
    io::write_embeddings(&EmbeddingFile::unlabeled(DMatrix::from_column_slice(2, 1, &[0.6, 0.8]), Dtype::F64), &single).unwrap();
    ok(&["mean", "--input", s(&single), "--output", s(&out)]);
    assert_eq!(io::read_embeddings(&out).unwrap().points.as_slice(), &[0.6, 0.8]);
}

#[test]
fn gen_synth_reproducible_and_recoverable() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--classes", "3", "--n", "500", "--d", "32", "--kappa", "50", "--planted-k", "2", "--seed", "9"];
    let a = synth(dir.path(), "a.emb", &args);
    let b = synth(dir.path(), "b.emb", &args);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    for c in ["c0", "c1", "c2"] {
        let side_a = dir.path().join(format!("a.{c}.pss1"));
        assert_eq!(std::fs::read(&side_a).unwrap(), std::fs::read(dir.path().join(format!("b.{c}.pss1"))).unwrap());
        let fit = dir.path().join(format!("fit.{c}.pss1"));
        ok(&["fit", "--input", s(&a), "--target", c, "--k", "2", "--output", s(&fit)]);
        let angle = linalg::max_principal_angle(io::read_subspace(&fit).unwrap().basis(), io::read_subspace(&side_a).unwrap().basis());
        assert!(angle < 0.05, "{c}: {angle}");
    }
    let other = synth(dir.path(), "c.emb", &["--classes", "3", "--n", "500", "--d", "32", "--kappa", "50", "--planted-k", "2", "--seed", "10"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&other).unwrap());

    let one = synth(dir.path(), "one.emb", &["--classes", "1", "--n", "20", "--d", "4", "--kappa", "5", "--planted-k", "3"]);
    let set = io::read_labeled(&one).unwrap();
    assert_eq!(set.classes().len(), 1);
    assert_eq!(set.len(), 20);
}

#[test]
fn invariance_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let subs: Vec<PathBuf> = ["c0", "c1", "c2"]
        .iter()
        .map(|c| {
            let p = dir.path().join(format!("{c}.pss1"));
            ok(&["fit", "--input", FIXTURE, "--target", c, "--k", "2", "--output", s(&p)]);
            p
        })
        .collect();
    let mut args = vec!["invariance", "--input", FIXTURE, "--subspaces"];
    args.extend(subs.iter().map(|p| s(p)));
    let csv = ok(&args);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("subspace,c0,c1,c2"));
    assert_eq!(lines.count(), 3);
    args.extend(["--row-normalize", "--format", "json"]);
    let v = json(&ok(&args));
    for row in v["values"].as_array().unwrap() {
        let max = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).fold(f64::MIN, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }
}

#[test]
fn classify_self_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let set = io::read_labeled(FIXTURE).unwrap();
    let one_each: Vec<(String, DMatrix<f64>)> =
        (0..3).map(|i| (set.classes()[i].clone(), set.class_matrix(i).columns(0, 1).into_owned())).collect();
    let images = LabeledEmbeddingSet::from_class_matrices(one_each).unwrap();
    let path = dir.path().join("anchors.emb");
    io::write_embeddings(&EmbeddingFile::from_labeled(&images, Dtype::F64), &path).unwrap();
    let report = json(&ok(&["classify", "--images", s(&path), "--labels", s(&path), "--softmax"]));
    assert_eq!(report["top1"], 1.0);
    assert_eq!(report["n_samples"], 3);
    assert_eq!(report["dataset_name"], "anchors");
    assert_eq!(report["probabilities"].as_array().unwrap().len(), 3);

    let missing = dir.path().join("missing.emb");
    assert_eq!(run(&["classify", "--images", s(&path), "--labels", s(&missing)]).0, 1);
}

#[test]
fn compare_reduces_to_pca() {
    let report = json(&ok(&[
        "compare", "--input", FIXTURE, "--target", "c1", "--k", "2", "--methods", "ours,pca,pca", "--lambda", "0", "--geometry",
        "euclidean",
    ]));
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 2);
    let angles = report["principal_angles"].as_array().unwrap();
    assert_eq!(angles.len(), 1);
    assert!(angles[0]["max_angle"].as_f64().unwrap() < 1e-7);

    let full = json(&ok(&["compare", "--input", FIXTURE, "--target", "c1", "--k", "2", "--methods", "ours,pga,fda"]));
    let objective = |name: &str| {
        full["methods"].as_array().unwrap().iter().find(|m| m["method"] == name).unwrap()["objective"].as_f64().unwrap()
    };
    assert!((objective("ours") - GOLDEN_SPHERE).abs() < 1e-9);
    assert!(objective("ours") >= objective("pga") - 1e-12);
    let fda = full["methods"].as_array().unwrap().iter().find(|m| m["method"] == "fda").unwrap();
    assert_eq!(fda["k"], 2);
}

#[test]
fn dedupe_lists() {
    let dir = tempfile::tempdir().unwrap();
    let noun = dir.path().join("noun.txt");
    let verb = dir.path().join("verb.txt");
    std::fs::write(&noun, "run\nDog\ncat\ndog\n").unwrap();
    std::fs::write(&verb, "Run\njump\n").unwrap();
    let out = dir.path().join("out");
    ok(&["dedupe", "--lists", s(&noun), s(&verb), "--output-dir", s(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("noun.txt")).unwrap(), "Dog\ncat\n");
    assert_eq!(std::fs::read_to_string(out.join("verb.txt")).unwrap(), "jump\n");
}
