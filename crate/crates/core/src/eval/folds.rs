use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Manifest;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    /// Subjects with a single image: always trained on, never tested.
    pub untestable: Vec<String>,
}

/// Subject-stratified k-fold split over record indices. Records are shuffled
/// with `seed`, then dealt round-robin into folds subject by subject; the
/// dealing position carries over between subjects so fold sizes stay
/// balanced. Indices in every train/test list are ascending.
pub fn make_subject_folds<S: AsRef<str>>(subjects: &[S], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    if subjects.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        by_subject.entry(subjects[i].as_ref()).or_default().push(i);
    }
    let mut assignment: Vec<Option<usize>> = vec![None; subjects.len()];
    let mut untestable = Vec::new();
    let mut next = 0;
    for (subject, idxs) in &by_subject {
        if idxs.len() < 2 {
            log::warn!("subject {subject} has a single image; it is excluded from test folds");
            untestable.push(subject.to_string());
            continue;
        }
        if idxs.len() < k {
            log::info!("subject {subject} has {} images and appears in fewer than {k} test folds", idxs.len());
        }
        for &i in idxs {
            assignment[i] = Some(next % k);
            next += 1;
        }
    }
    let folds = (0..k)
        .map(|f| Fold {
            train: (0..subjects.len()).filter(|&i| assignment[i] != Some(f)).collect(),
            test: (0..subjects.len()).filter(|&i| assignment[i] == Some(f)).collect(),
        })
        .collect();
    Ok(FoldPlan { folds, untestable })
}

pub fn make_folds(manifest: &Manifest, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    let subjects: Vec<&str> = manifest.records.iter().map(|r| r.subject_id.as_str()).collect();
    make_subject_folds(&subjects, k, seed)
}
