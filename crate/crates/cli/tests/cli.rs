use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use pixalign::corpus::{load_manifest, save_landmarks, save_pgm, GrayImage};
use pixalign::fisher::load_model;
use pixalign::matcher::{channel_sums, project_face};
use pixalign::pipeline::Preprocessor;
use pixalign::synthetic::canonical_landmarks;
use pixalign::warp::{load_aligned_face, load_reference, save_reference, ReferenceContour};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pixalign"))
        .args(args)
        .env_remove("PIXALIGN_THREADS")
        .output()
        .expect("spawn pixalign")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small synthetic corpus plus its reference, shared by the tests.
struct Fixture {
    _dir: tempfile::TempDir,
    manifest: PathBuf,
    reference: PathBuf,
    root: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = root.join("corpus");
        let out = run(&["synth", "--out", p(&corpus), "--subjects", "5", "--expressions", "3", "--seed", "9"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let reference = root.join("ref.txt");
        let manifest = corpus.join("manifest.csv");
        let out = run(&["reference", "--manifest", p(&manifest), "--neutral-tag", "neutral", "--out", p(&reference)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Fixture {
            _dir: dir,
            manifest,
            reference,
            root,
        }
    })
}

#[test]
fn help_lists_paper_defaults() {
    for (cmd, needles) in [
        ("train", &["[default: 80]", "[default: 30]", "[default: 140x120]"][..]),
        ("score", &["[default: 0.2]"][..]),
        ("eval", &["[default: 5]", "[default: 80]", "[default: 30]", "[default: 0.2]", "[default: 140x120]"][..]),
        ("reference", &["[default: 140x120]"][..]),
    ] {
        let out = run(&[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8_lossy(&out.stdout);
        for n in needles {
            assert!(text.contains(n), "{cmd} --help lacks {n}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ev");
    for args in [
        vec!["train", "--manifest", p(&f.manifest), "--out", "m.bin", "--bogus"],
        vec!["eval", "--manifest", p(&f.manifest), "--out", p(&out_dir)],
        vec!["eval", "--manifest", p(&f.manifest), "--seed", "1", "--folds", "1", "--out", p(&out_dir)],
        vec!["eval", "--manifest", p(&f.manifest), "--seed", "1", "--far", "1.5", "--out", p(&out_dir)],
        vec!["reference", "--manifest", p(&f.manifest), "--grid", "140by120", "--out", "r.txt"],
        vec!["score", "--model", "m", "--gallery-manifest", "g", "--probe-manifest", "p", "--w", "-1", "--out", "s.csv"],
        vec!["train", "--manifest", p(&f.manifest), "--out", "m.bin"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!out_dir.exists());
}

#[test]
fn reference_matches_library_and_reports_data_errors() {
    let f = fixture();
    let r = load_reference(&f.reference).unwrap();
    assert_eq!(r.grid(), (140, 120));
    assert_eq!(r.source_count(), 5);
    let (a, b) = r.landmarks().eye_centers();
    assert!((a.x - 35.0).abs() < 1e-9 && (a.y - 55.0).abs() < 1e-9);
    assert!((b.x - 85.0).abs() < 1e-9 && (b.y - 55.0).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reference", "--manifest", p(&dir.path().join("none.csv")), "--out", p(&dir.path().join("r.txt"))]);
    assert_eq!(code(&out), 3);
    assert!(!dir.path().join("r.txt").exists());
    // a tag no record carries leaves nothing to average
    let out = run(&["reference", "--manifest", p(&f.manifest), "--neutral-tag", "absent", "--out", p(&dir.path().join("r.txt"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn identity_warp_reproduces_masked_input() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("canonical.txt");
    save_reference(&reference, &ReferenceContour::new(canonical_landmarks(), (140, 120), 1).unwrap()).unwrap();
    let img = GrayImage::from_fn(140, 120, |r, c| ((r * 7 + c * 13) % 251) as f64 / 255.0);
    save_pgm(dir.path().join("face.pgm"), &img).unwrap();
    save_landmarks(dir.path().join("face.pts"), &canonical_landmarks()).unwrap();
    let prefix = dir.path().join("out/face");
    let out = run(&[
        "warp",
        "--image",
        p(&dir.path().join("face.pgm")),
        "--landmarks",
        p(&dir.path().join("face.pts")),
        "--reference",
        p(&reference),
        "--out-prefix",
        p(&prefix),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for suffix in ["_intensity.png", "_dx.png", "_dy.png"] {
        assert!(dir.path().join(format!("out/face{suffix}")).is_file());
    }
    let face = load_aligned_face(dir.path().join("out/face.pxf")).unwrap();
    let mut inside = 0;
    for row in 0..120 {
        for col in 0..140 {
            if face.mask[(row, col)] {
                inside += 1;
                assert!((face.intensity[(row, col)] - img.at(row, col)).abs() < 1e-9);
            }
        }
    }
    assert!(inside > 5000);

    let out = run(&[
        "warp",
        "--image",
        p(&dir.path().join("face.pgm")),
        "--landmarks",
        p(&dir.path().join("missing.pts")),
        "--reference",
        p(&reference),
        "--out-prefix",
        p(&dir.path().join("bad")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(!dir.path().join("bad.pxf").exists());
}

#[test]
fn train_writes_three_subspaces_per_patch_deterministically() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for out_path in [&a, &b] {
        let out = run(&["train", "--manifest", p(&f.manifest), "--reference", p(&f.reference), "--seed", "4", "--out", p(out_path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let model = load_model(&a).unwrap();
    assert_eq!(model.subspace_count(), 3 * 80);
    assert_eq!(model.layout.patches.len(), 80);
    assert!(model.layout.patches.iter().all(|q| q.size == 30));

    let single = dir.path().join("single.csv");
    let text = fs::read_to_string(&f.manifest).unwrap();
    let mut lines = text.lines();
    let mut body = format!("{}\n", lines.next().unwrap());
    for l in lines.filter(|l| l.starts_with("s01,")) {
        let mut cols: Vec<String> = l.split(',').map(str::to_string).collect();
        for c in &mut cols[1..3] {
            *c = f.root.join("corpus").join(&*c).to_string_lossy().into_owned();
        }
        body.push_str(&cols.join(","));
        body.push('\n');
    }
    fs::write(&single, body).unwrap();
    let out = run(&["train", "--manifest", p(&single), "--reference", p(&f.reference), "--out", p(&dir.path().join("c.bin"))]);
    assert_eq!(code(&out), 3);
    assert!(!dir.path().join("c.bin").exists());
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn score_with_zero_weight_is_intensity_only() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("m.bin");
    let out = run(&[
        "train", "--manifest", p(&f.manifest), "--reference", p(&f.reference), "--patches", "12", "--out", p(&model_path),
    ]);
    assert_eq!(code(&out), 0);
    let csv = dir.path().join("scores.csv");
    let out = run(&[
        "score", "--model", p(&model_path), "--gallery-manifest", p(&f.manifest), "--probe-manifest", p(&f.manifest), "--w", "0",
        "--out", p(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let got = read_matrix(&csv);
    let genuine = read_matrix(&dir.path().join("scores.genuine.csv"));

    let model = load_model(&model_path).unwrap();
    let m = load_manifest(&f.manifest).unwrap();
    let pre = Preprocessor::pixel(model.reference.clone().unwrap(), model.eye_targets).unwrap();
    let proj: Vec<_> = (0..m.records.len())
        .map(|i| project_face(&model, &pre.prepare_record(&m, i).unwrap()).unwrap())
        .collect();
    assert_eq!(got.len(), proj.len());
    for (i, row) in got.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            let expected = channel_sums(&proj[i], &proj[j]).unwrap().intensity;
            assert!((s - expected).abs() <= 1e-12 * expected.abs().max(1.0), "({i},{j}) {s} vs {expected}");
            let same = m.records[i].subject_id == m.records[j].subject_id;
            assert_eq!(genuine[i][j], if same { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn eval_is_deterministic_and_notes_unreachable_far() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for o in &outs {
        let out = run(&[
            "eval", "--manifest", p(&f.manifest), "--mode", "eye_aligned", "--folds", "2", "--seed", "11", "--patches", "20",
            "--far", "0.001", "--far", "0.1", "--out", p(o), "--svg",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("unreachable"));
    }
    for name in ["pooled.csv", "report.csv", "report.txt", "fold_1.csv", "fold_2.csv"] {
        assert_eq!(fs::read(outs[0].join(name)).unwrap(), fs::read(outs[1].join(name)).unwrap(), "{name}");
    }
    assert!(outs[0].join("roc.svg").is_file());
    let report = fs::read_to_string(outs[0].join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows[0], "mode,far_target,vr,n_genuine,n_impostor,seed");
    assert!(rows[1].starts_with("eye_aligned,0.001,NA,"), "{}", rows[1]);
    assert!(rows[2].starts_with("eye_aligned,0.1,"));
    assert!(rows[2].ends_with(",11"));
}

#[test]
fn eval_failure_leaves_no_outputs() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.csv");
    let text = fs::read_to_string(&f.manifest).unwrap();
    let corpus = f.root.join("corpus");
    let body: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let mut cols: Vec<String> = l.split(',').map(str::to_string).collect();
            for c in &mut cols[1..3] {
                *c = corpus.join(&*c).to_string_lossy().into_owned();
            }
            if i == 4 {
                cols[1] = corpus.join("nowhere.pgm").to_string_lossy().into_owned();
            }
            format!("{}\n", cols.join(","))
        })
        .collect();
    fs::write(&broken, body).unwrap();
    let out_dir = dir.path().join("ev");
    let out = run(&["eval", "--manifest", p(&broken), "--seed", "1", "--folds", "2", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 3);
    assert!(!out_dir.exists());
}

#[test]
fn thread_override_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pixalign"))
        .args(["synth", "--out", p(dir.path()), "--subjects", "2", "--expressions", "2"])
        .env("PIXALIGN_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("manifest.csv").is_file());
    let bad = Command::new(env!("CARGO_BIN_EXE_pixalign"))
        .args(["synth", "--out", p(dir.path())])
        .env("PIXALIGN_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}
