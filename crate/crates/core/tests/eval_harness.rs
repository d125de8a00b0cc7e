mod common;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use pixalign::eval::{
    make_subject_folds, prepare_faces, roc_from_pairs, run_experiment, run_folds, vr_at_far, Dataset, EvalError,
    ExperimentConfig, Mode,
};
use pixalign::fisher::{LabeledSamples, Ridge};
use pixalign::synthetic::{generate, SynthConfig};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

use common::{oracle_directions, rng};

fn small_data() -> Dataset {
    generate(&SynthConfig {
        subjects: 6,
        expressions: 4,
        ..SynthConfig::default()
    })
    .dataset()
}

fn small_cfg(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        folds: 2,
        patch_count: 10,
        seed: 3,
        mode,
        far_targets: vec![0.01, 0.1, 0.5],
        ..ExperimentConfig::default()
    }
}

#[test]
fn roc_of_random_scores_follows_the_diagonal() {
    let mut r = rng(31);
    let n = Normal::new(0.0, 1.0).unwrap();
    let pairs: Vec<(f64, bool)> = (0..10_000).map(|i| (n.sample(&mut r), i % 3 == 0)).collect();
    let curve = roc_from_pairs(&pairs).unwrap();
    assert!((curve.auc() - 0.5).abs() <= 0.02);
    for far in [0.05, 0.2, 0.5, 0.8] {
        assert!((vr_at_far(&curve, far).unwrap() - far).abs() < 0.03);
    }
}

#[test]
fn roc_is_monotone_and_ends_at_one() {
    let mut r = rng(32);
    let n = Normal::new(0.0, 1.0).unwrap();
    let pairs: Vec<(f64, bool)> = (0..500).map(|i| ((i % 2) as f64 + n.sample(&mut r), i % 2 == 1)).collect();
    let c = roc_from_pairs(&pairs).unwrap();
    for w in c.points.windows(2) {
        assert!(w[0].threshold > w[1].threshold);
        assert!(w[0].far <= w[1].far && w[0].vr <= w[1].vr);
    }
    let last = c.points.last().unwrap();
    assert_eq!((last.far, last.vr), (1.0, 1.0));
    assert!(c.auc() > 0.7);
}

#[test]
fn unreachable_far_reports_floor() {
    let c = roc_from_pairs(&[(0.9, true), (0.1, false), (0.2, false)]).unwrap();
    match vr_at_far(&c, 0.1) {
        Err(EvalError::FarUnreachable { target, floor }) => {
            assert_eq!(target, 0.1);
            assert_eq!(floor, 0.5);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(roc_from_pairs(&[(0.1, false)]), Err(EvalError::NoGenuinePairs)));
    assert!(matches!(roc_from_pairs(&[(0.1, true)]), Err(EvalError::NoImpostorPairs)));
}

proptest! {
    #[test]
    fn folds_partition_records_by_subject(
        counts in prop::collection::vec(1usize..6, 2..12),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let subjects: Vec<String> = counts
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| std::iter::repeat_n(format!("s{s}"), n))
            .collect();
        let plan = make_subject_folds(&subjects, k, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        let n = subjects.len();
        let singles: BTreeSet<usize> = (0..n).filter(|&i| counts[i_subject(&subjects[i])] == 1).collect();
        let mut tested = BTreeSet::new();
        for f in &plan.folds {
            let train: BTreeSet<usize> = f.train.iter().copied().collect();
            let test: BTreeSet<usize> = f.test.iter().copied().collect();
            prop_assert!(train.is_disjoint(&test));
            prop_assert_eq!(train.len() + test.len(), n);
            prop_assert!(singles.is_subset(&train));
            for &i in &test {
                prop_assert!(tested.insert(i));
            }
        }
        let testable: BTreeSet<usize> = (0..n).filter(|i| !singles.contains(i)).collect();
        prop_assert_eq!(tested, testable);
        prop_assert_eq!(plan.untestable.len(), counts.iter().filter(|&&c| c == 1).count());
        // every multi-image subject spreads over at least two folds
        let mut folds_of: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (fi, f) in plan.folds.iter().enumerate() {
            for &i in &f.test {
                folds_of.entry(subjects[i].as_str()).or_default().insert(fi);
            }
        }
        prop_assert!(folds_of.values().all(|s| s.len() >= 2));
        prop_assert_eq!(make_subject_folds(&subjects, k, seed).unwrap(), plan);
    }
}

fn i_subject(s: &str) -> usize {
    s[1..].parse().unwrap()
}

#[test]
fn experiments_are_reproducible() {
    let data = small_data();
    let cfg = small_cfg(Mode::PixelAligned);
    let reference = data.reference(&cfg.eye_targets()).unwrap();
    let a = run_experiment(&cfg, &data, Some(&reference)).unwrap();
    let b = run_experiment(&cfg, &data, Some(&reference)).unwrap();
    assert_eq!(a.pooled.to_csv(), b.pooled.to_csv());
    assert_eq!(a.report.to_csv(), b.report.to_csv());
    assert_eq!(a.report.n_genuine + a.report.n_impostor, 2 * (12 * 11 / 2));
}

#[test]
fn pixel_mode_needs_a_reference() {
    let data = small_data();
    assert!(matches!(
        run_experiment(&small_cfg(Mode::PixelAligned), &data, None),
        Err(EvalError::MissingReference)
    ));
    assert!(run_experiment(&small_cfg(Mode::EyeAligned), &data, None).is_ok());
}

#[test]
fn invalid_configs_are_rejected() {
    let data = small_data();
    let bad_folds = ExperimentConfig { folds: 1, ..small_cfg(Mode::EyeAligned) };
    assert!(matches!(run_experiment(&bad_folds, &data, None), Err(EvalError::InvalidFolds(1))));
    let bad_far = ExperimentConfig { far_targets: vec![0.0], ..small_cfg(Mode::EyeAligned) };
    assert!(matches!(run_experiment(&bad_far, &data, None), Err(EvalError::InvalidFarTarget(_))));
}

/// Plain Fisherface: PCA about the mean of class means keeping `N − C`
/// components (Householder QR of the centered data, then SVD of the small
/// triangular factor), the general-eigenproblem LDA oracle on top, and
/// cosine similarity of the projections.
fn fisherface_scores(train: &[DVector<f64>], labels: &[usize], test: &[DVector<f64>]) -> Vec<f64> {
    let classes: BTreeSet<usize> = labels.iter().copied().collect();
    let d = train[0].len();
    let mut mu = DVector::zeros(d);
    for &c in &classes {
        let members: Vec<&DVector<f64>> = train.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
        mu += members.iter().fold(DVector::zeros(d), |a, v| a + *v) / members.len() as f64;
    }
    mu /= classes.len() as f64;
    let qr = DMatrix::from_columns(&train.iter().map(|v| v - &mu).collect::<Vec<_>>()).qr();
    let svd = qr.r().svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let q = train.len() - classes.len();
    let (qm, u) = (qr.q(), svd.u.unwrap());
    let pca = DMatrix::from_columns(&order[..q].iter().map(|&i| &qm * u.column(i)).collect::<Vec<_>>());
    let reduced: Vec<Vec<f64>> = train.iter().map(|v| (pca.transpose() * (v - &mu)).as_slice().to_vec()).collect();
    let dirs = oracle_directions(&LabeledSamples::new(reduced, labels.to_vec()).unwrap());
    let w = DMatrix::from_columns(&dirs);
    let proj: Vec<DVector<f64>> = test.iter().map(|v| w.transpose() * (pca.transpose() * (v - &mu))).collect();
    let mut out = Vec::new();
    for i in 0..test.len() {
        for j in i + 1..test.len() {
            out.push(proj[i].dot(&proj[j]) / (proj[i].norm() * proj[j].norm()));
        }
    }
    out
}

#[test]
fn whole_face_without_geometry_matches_direct_fisherface() {
    let data = small_data();
    let cfg = ExperimentConfig {
        w: 0.0,
        ridge: Ridge::None,
        ..small_cfg(Mode::WholeFace)
    };
    let reference = data.reference(&cfg.eye_targets()).unwrap();
    let faces = prepare_faces(&cfg, &data, Some(&reference)).unwrap();
    let subjects: Vec<&str> = data.ids.iter().map(|f| f.subject.as_str()).collect();
    let plan = make_subject_folds(&subjects, cfg.folds, cfg.seed).unwrap();
    let result = run_folds(&cfg, &data, &faces, &plan).unwrap();

    let patch = cfg.layout().unwrap().patches[0];
    let vector = |i: usize| {
        let g = &faces[i].intensity;
        DVector::from_iterator(
            patch.size * patch.size,
            (patch.y0..patch.y0 + patch.size).flat_map(|r| g.row(r)[patch.x0..patch.x0 + patch.size].to_vec()),
        )
    };
    let label = |i: usize| i_subject(&data.ids[i].subject);
    for (fold, curve) in plan.folds.iter().zip(&result.fold_curves) {
        let train: Vec<DVector<f64>> = fold.train.iter().map(|&i| vector(i)).collect();
        let labels: Vec<usize> = fold.train.iter().map(|&i| label(i)).collect();
        let test: Vec<DVector<f64>> = fold.test.iter().map(|&i| vector(i)).collect();
        let mut expected = fisherface_scores(&train, &labels, &test);
        expected.sort_by(|a, b| b.total_cmp(a));
        let got: Vec<f64> = curve.points.iter().map(|p| p.threshold).collect();
        assert_eq!(got.len(), expected.len(), "distinct score count");
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-9, "{g} vs {e}");
        }
    }
}

#[test]
fn outputs_are_written() {
    let data = small_data();
    let cfg = small_cfg(Mode::EyeAligned);
    let result = run_experiment(&cfg, &data, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    result.write_outputs(dir.path(), true).unwrap();
    for name in ["fold_1.csv", "fold_2.csv", "pooled.csv", "report.txt", "report.csv", "roc.svg"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("mode,far_target,vr,n_genuine,n_impostor,seed"));
    assert!(lines.next().unwrap().starts_with("eye_aligned,0.01,"));
    let svg = std::fs::read_to_string(dir.path().join("roc.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}
