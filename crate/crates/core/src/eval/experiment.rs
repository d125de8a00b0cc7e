use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{self, EyeTargets, GrayImage, LandmarkSet, Manifest};
use crate::fisher::{train_model, Ridge, TrainConfig};
use crate::geom::Point2;
use crate::matcher::{project_all, score_projected, FaceId, FusionConfig};
use crate::patches::{generate_layout, whole_face_layout, PatchLayout, DEFAULT_PATCH_COUNT, DEFAULT_PATCH_SIZE};
use crate::pipeline::{eye_registered_landmarks, Alignment, PipelineError, Preprocessor};
use crate::warp::{compute_reference_contour, AlignedFace, Channel, ReferenceContour, DEFAULT_GRID};

use super::folds::{make_subject_folds, FoldPlan};
use super::roc::{roc_from_pairs, vr_at_far, RocCurve};
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Warped faces, patch ensemble over intensity and both geometry channels.
    PixelAligned,
    /// Eye-registered faces, patch ensemble over intensity only.
    EyeAligned,
    /// Warped faces, one grid-sized patch.
    WholeFace,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::PixelAligned, Mode::EyeAligned, Mode::WholeFace];

    pub fn name(self) -> &'static str {
        match self {
            Mode::PixelAligned => "pixel_aligned",
            Mode::EyeAligned => "eye_aligned",
            Mode::WholeFace => "whole_face",
        }
    }

    pub fn alignment(self) -> Alignment {
        match self {
            Mode::EyeAligned => Alignment::Eye,
            _ => Alignment::Pixel,
        }
    }

    pub fn channels(self) -> Vec<Channel> {
        match self {
            Mode::EyeAligned => vec![Channel::Intensity],
            _ => Channel::ALL.to_vec(),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected pixel_aligned, eye_aligned or whole_face)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub patch_count: usize,
    pub patch_size: usize,
    pub w: f64,
    pub grid: (usize, usize),
    /// Eye-center targets on the grid.
    pub eyes: (Point2, Point2),
    pub seed: u64,
    pub mode: Mode,
    pub far_targets: Vec<f64>,
    pub ridge: Ridge,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = EyeTargets::default();
        Self {
            folds: 5,
            patch_count: DEFAULT_PATCH_COUNT,
            patch_size: DEFAULT_PATCH_SIZE,
            w: 0.2,
            grid: DEFAULT_GRID,
            eyes: (t.eye_a, t.eye_b),
            seed: 0,
            mode: Mode::PixelAligned,
            far_targets: vec![0.001, 0.01, 0.1],
            ridge: Ridge::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn eye_targets(&self) -> EyeTargets {
        EyeTargets {
            eye_a: self.eyes.0,
            eye_b: self.eyes.1,
            width: self.grid.0,
            height: self.grid.1,
        }
    }

    /// Patch layout for the configured mode; shared by all folds.
    pub fn layout(&self) -> Result<PatchLayout, EvalError> {
        Ok(match self.mode {
            Mode::WholeFace => whole_face_layout(self.grid, self.seed)?,
            _ => generate_layout(self.grid, self.patch_count, self.patch_size, self.seed)?,
        })
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.folds < 2 {
            return Err(EvalError::InvalidFolds(self.folds));
        }
        FusionConfig::new(self.w)?;
        if let Some(&f) = self.far_targets.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(EvalError::InvalidFarTarget(f));
        }
        Ok(())
    }
}

/// Images, landmarks and identities held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<GrayImage>,
    pub landmarks: Vec<LandmarkSet>,
    pub ids: Vec<FaceId>,
    /// Records eligible for the reference contour.
    pub neutral: Vec<bool>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Loads every record. With `neutral_tag`, only records carrying that
    /// expression tag are marked neutral; without it all are.
    pub fn from_manifest(m: &Manifest, neutral_tag: Option<&str>) -> Result<Self, EvalError> {
        let loaded = m
            .records
            .par_iter()
            .map(|r| {
                let img = corpus::load_image(m.resolve(&r.image_path))?;
                let lm = corpus::load_landmarks(m.resolve(&r.landmark_path))?;
                Ok((img, lm))
            })
            .collect::<Result<Vec<_>, corpus::CorpusError>>()?;
        let (images, landmarks) = loaded.into_iter().unzip();
        Ok(Self {
            images,
            landmarks,
            ids: m.records.iter().map(|r| FaceId::new(r.display_id(), r.subject_id.clone())).collect(),
            neutral: m
                .records
                .iter()
                .map(|r| neutral_tag.is_none_or(|t| r.expression_tag.as_deref() == Some(t)))
                .collect(),
        })
    }

    /// Mean eye-registered geometry of the neutral records (all records if
    /// none is marked neutral).
    pub fn reference(&self, targets: &EyeTargets) -> Result<ReferenceContour, EvalError> {
        let pick: Vec<usize> = if self.neutral.iter().any(|&n| n) {
            (0..self.len()).filter(|&i| self.neutral[i]).collect()
        } else {
            (0..self.len()).collect()
        };
        let sets = pick
            .iter()
            .map(|&i| eye_registered_landmarks(&self.landmarks[i], targets))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(compute_reference_contour(&sets, (targets.width, targets.height))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VrOutcome {
    Reached(f64),
    Unreachable { floor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub far_target: f64,
    pub vr: VrOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub seed: u64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub auc: f64,
    pub rows: Vec<ReportRow>,
    pub inert_subspaces: Vec<usize>,
    pub untestable_subjects: Vec<String>,
}

impl ExperimentReport {
    pub fn vr(&self, far_target: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.far_target == far_target).and_then(|r| match r.vr {
            VrOutcome::Reached(v) => Some(v),
            VrOutcome::Unreachable { .. } => None,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,far_target,vr,n_genuine,n_impostor,seed\n");
        for r in &self.rows {
            let vr = match r.vr {
                VrOutcome::Reached(v) => v.to_string(),
                VrOutcome::Unreachable { .. } => "NA".into(),
            };
            writeln!(out, "{},{},{},{},{},{}", self.mode, r.far_target, vr, self.n_genuine, self.n_impostor, self.seed)
                .expect("String write");
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "mode: {}", self.mode).ok();
        writeln!(w, "seed: {}", self.seed).ok();
        writeln!(w, "pairs: {} genuine, {} impostor", self.n_genuine, self.n_impostor).ok();
        writeln!(w, "auc: {:.4}", self.auc).ok();
        writeln!(w, "{:>10}  {:>8}", "FAR", "VR").ok();
        for r in &self.rows {
            match r.vr {
                VrOutcome::Reached(v) => writeln!(w, "{:>10}  {:>7.2}%", r.far_target, 100.0 * v).ok(),
                VrOutcome::Unreachable { floor } => {
                    writeln!(w, "{:>10}  unreachable (smallest FAR is {floor:.3e})", r.far_target).ok()
                }
            };
        }
        let inert: usize = self.inert_subspaces.iter().sum();
        if inert > 0 {
            writeln!(w, "inert subspaces per fold: {:?}", self.inert_subspaces).ok();
        }
        if !self.untestable_subjects.is_empty() {
            writeln!(w, "subjects with one image (not tested): {}", self.untestable_subjects.join(", ")).ok();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub fold_curves: Vec<RocCurve>,
    pub pooled: RocCurve,
    pub report: ExperimentReport,
}

impl ExperimentResult {
    /// Writes `fold_<i>.csv`, `pooled.csv`, `report.txt` and `report.csv`
    /// (plus `roc.svg` when `svg` is set) into `dir`.
    pub fn write_outputs(&self, dir: &Path, svg: bool) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, text: &str| crate::fsutil::write_atomic(&dir.join(name), text.as_bytes());
        for (i, c) in self.fold_curves.iter().enumerate() {
            write(&format!("fold_{}.csv", i + 1), &c.to_csv())?;
        }
        write("pooled.csv", &self.pooled.to_csv())?;
        write("report.txt", &self.report.to_text())?;
        write("report.csv", &self.report.to_csv())?;
        if svg {
            write("roc.svg", &super::plot::roc_svg(&[(self.report.mode.name(), &self.pooled)]))?;
        }
        Ok(())
    }
}

/// Aligns every face once for the configured mode.
pub fn prepare_faces(
    cfg: &ExperimentConfig,
    data: &Dataset,
    reference: Option<&ReferenceContour>,
) -> Result<Vec<AlignedFace>, EvalError> {
    let pre = match cfg.mode.alignment() {
        Alignment::Eye => Preprocessor::eye(cfg.eye_targets()),
        Alignment::Pixel => {
            let r = reference.ok_or(EvalError::MissingReference)?;
            Preprocessor::pixel(r.clone(), cfg.eye_targets())?
        }
    };
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            pre.prepare(&data.images[i], &data.landmarks[i]).map_err(|e| PipelineError::Record {
                record: data.ids[i].id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()
        .map_err(EvalError::from)
}

/// Cross-validated verification: per fold, train on the training split and
/// score all pairs within the test split; the pooled curve uses every
/// fold's pairs.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: &Dataset,
    reference: Option<&ReferenceContour>,
) -> Result<ExperimentResult, EvalError> {
    cfg.validate()?;
    let faces = prepare_faces(cfg, data, reference)?;
    let subjects: Vec<&str> = data.ids.iter().map(|f| f.subject.as_str()).collect();
    let plan = make_subject_folds(&subjects, cfg.folds, cfg.seed)?;
    run_folds(cfg, data, &faces, &plan)
}

pub fn run_folds(
    cfg: &ExperimentConfig,
    data: &Dataset,
    faces: &[AlignedFace],
    plan: &FoldPlan,
) -> Result<ExperimentResult, EvalError> {
    let layout = cfg.layout()?;
    let fusion = FusionConfig::new(cfg.w)?;
    let train_cfg = TrainConfig {
        channels: cfg.mode.channels(),
        ridge: cfg.ridge,
        alignment: cfg.mode.alignment(),
        eye_targets: cfg.eye_targets(),
        reference: None,
    };
    let mut label_of = std::collections::BTreeMap::new();
    for id in &data.ids {
        let n = label_of.len();
        label_of.entry(id.subject.as_str()).or_insert(n);
    }
    let mut fold_curves = Vec::new();
    let mut pooled_pairs = Vec::new();
    let mut inert = Vec::new();
    for (fi, fold) in plan.folds.iter().enumerate() {
        let run = || -> Result<(Vec<(f64, bool)>, usize), EvalError> {
            let train_faces: Vec<AlignedFace> = fold.train.iter().map(|&i| faces[i].clone()).collect();
            let labels: Vec<usize> = fold.train.iter().map(|&i| label_of[data.ids[i].subject.as_str()]).collect();
            let model = train_model(&train_faces, &labels, &layout, &train_cfg)?;
            let test_faces: Vec<AlignedFace> = fold.test.iter().map(|&i| faces[i].clone()).collect();
            let ids: Vec<FaceId> = fold.test.iter().map(|&i| data.ids[i].clone()).collect();
            let projected = project_all(&model, &test_faces)?;
            let scores = score_projected(&projected, &ids, &projected, &ids, &fusion)?;
            Ok((scores.pairs(), model.inert_count()))
        };
        let (pairs, n_inert) = run().map_err(|e| EvalError::Fold {
            index: fi + 1,
            source: Box::new(e),
        })?;
        log::info!("fold {}: {} test pairs", fi + 1, pairs.len());
        let curve = roc_from_pairs(&pairs).map_err(|e| EvalError::Fold {
            index: fi + 1,
            source: Box::new(e),
        })?;
        fold_curves.push(curve);
        pooled_pairs.extend(pairs);
        inert.push(n_inert);
    }
    let pooled = roc_from_pairs(&pooled_pairs)?;
    let rows = cfg
        .far_targets
        .iter()
        .map(|&t| ReportRow {
            far_target: t,
            vr: match vr_at_far(&pooled, t) {
                Ok(v) => VrOutcome::Reached(v),
                Err(EvalError::FarUnreachable { floor, .. }) => VrOutcome::Unreachable { floor },
                Err(_) => unreachable!("targets validated"),
            },
        })
        .collect();
    let report = ExperimentReport {
        mode: cfg.mode,
        seed: cfg.seed,
        n_genuine: pooled.n_genuine,
        n_impostor: pooled.n_impostor,
        auc: pooled.auc(),
        rows,
        inert_subspaces: inert,
        untestable_subjects: plan.untestable.clone(),
    };
    Ok(ExperimentResult {
        fold_curves,
        pooled,
        report,
    })
}
