//! Cosine similarity per (patch, channel) and weighted decision fusion.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::fisher::{DiscriminativeModel, LdaError};
use crate::patches::{self, PatchError};
use crate::warp::{AlignedFace, Channel};

/// Projected vectors shorter than this carry no direction and are skipped.
pub const MIN_PROJECTED_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("zero-length vector")]
    ZeroVector,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("face grid {found:?} does not match model grid {expected:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("projected faces come from different models")]
    SlotMismatch,
    #[error("geometry weight must be finite and non-negative, got {0}")]
    InvalidWeight(f64),
    #[error("gallery or probe set is empty")]
    EmptySet,
    #[error("{faces} faces but {ids} ids")]
    IdMismatch { faces: usize, ids: usize },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// `⟨u,v⟩ / (‖u‖‖v‖)`, clamped to `[−1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MatchError> {
    if u.len() != v.len() {
        return Err(MatchError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if !(nu > 1e-300 && nv > 1e-300) {
        return Err(MatchError::ZeroVector);
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight of each geometry channel; intensity has weight 1.
    pub w: f64,
}

impl FusionConfig {
    pub fn new(w: f64) -> Result<Self, MatchError> {
        if !w.is_finite() || w < 0.0 {
            return Err(MatchError::InvalidWeight(w));
        }
        Ok(Self { w })
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { w: 0.2 }
    }
}

/// Per-channel sums of patch similarities for one face pair.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelSums {
    pub intensity: f64,
    pub dx: f64,
    pub dy: f64,
}

impl ChannelSums {
    pub fn fuse(&self, cfg: &FusionConfig) -> f64 {
        self.intensity + cfg.w * self.dx + cfg.w * self.dy
    }

    fn add(&mut self, ch: Channel, s: f64) {
        match ch {
            Channel::Intensity => self.intensity += s,
            Channel::Dx => self.dx += s,
            Channel::Dy => self.dy += s,
        }
    }
}

/// A face projected into every subspace of a model. Inert slots and
/// near-zero projections are stored as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedFace {
    slots: Vec<(Channel, Option<Vec<f64>>)>,
}

impl ProjectedFace {
    pub fn from_slots(slots: Vec<(Channel, Option<Vec<f64>>)>) -> Self {
        Self { slots }
    }

    pub fn slots(&self) -> &[(Channel, Option<Vec<f64>>)] {
        &self.slots
    }
}

pub fn project_face(model: &DiscriminativeModel, face: &AlignedFace) -> Result<ProjectedFace, MatchError> {
    if face.dims() != model.grid() {
        return Err(MatchError::GridMismatch {
            expected: model.grid(),
            found: face.dims(),
        });
    }
    let nc = model.channels.len();
    let slots = model
        .slots
        .iter()
        .enumerate()
        .map(|(i, slot)| {
            let ch = model.channels[i % nc];
            let Some(proj) = slot.projector() else {
                return Ok((ch, None));
            };
            let v = proj.project(&patches::extract_channel(face, &model.layout, i / nc, ch)?)?;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            Ok((ch, (norm >= MIN_PROJECTED_NORM).then_some(v)))
        })
        .collect::<Result<_, MatchError>>()?;
    Ok(ProjectedFace { slots })
}

pub fn channel_sums(a: &ProjectedFace, b: &ProjectedFace) -> Result<ChannelSums, MatchError> {
    if a.slots.len() != b.slots.len() {
        return Err(MatchError::SlotMismatch);
    }
    let mut sums = ChannelSums::default();
    for ((ca, u), (cb, v)) in a.slots.iter().zip(&b.slots) {
        if ca != cb {
            return Err(MatchError::SlotMismatch);
        }
        if let (Some(u), Some(v)) = (u, v) {
            sums.add(*ca, cosine(u, v)?);
        }
    }
    Ok(sums)
}

/// `Σ_p sim_I + w·sim_dx + w·sim_dy` over the model's patches.
pub fn pair_score(
    model: &DiscriminativeModel,
    a: &AlignedFace,
    b: &AlignedFace,
    cfg: &FusionConfig,
) -> Result<f64, MatchError> {
    Ok(channel_sums(&project_face(model, a)?, &project_face(model, b)?)?.fuse(cfg))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceId {
    pub id: String,
    pub subject: String,
}

impl FaceId {
    pub fn new(id: impl Into<String>, subject: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            subject: subject.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub gallery: Vec<FaceId>,
    pub probes: Vec<FaceId>,
    /// Row-major, `gallery.len() × probes.len()`.
    pub scores: Vec<f64>,
    pub genuine: Vec<bool>,
}

impl ScoreMatrix {
    pub fn rows(&self) -> usize {
        self.gallery.len()
    }

    pub fn cols(&self) -> usize {
        self.probes.len()
    }

    pub fn score(&self, g: usize, p: usize) -> f64 {
        self.scores[g * self.cols() + p]
    }

    pub fn is_genuine(&self, g: usize, p: usize) -> bool {
        self.genuine[g * self.cols() + p]
    }

    /// Gallery and probe lists are the same faces in the same order.
    pub fn is_self_comparison(&self) -> bool {
        self.gallery == self.probes
    }

    /// `(score, genuine)` for every pair used in verification statistics.
    /// In a self-comparison each unordered pair counts once and self-pairs
    /// are dropped.
    pub fn pairs(&self) -> Vec<(f64, bool)> {
        let same = self.is_self_comparison();
        let mut out = Vec::new();
        for g in 0..self.rows() {
            let start = if same { g + 1 } else { 0 };
            for p in start..self.cols() {
                out.push((self.score(g, p), self.is_genuine(g, p)));
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, MatchError> {
        self.write_csv(|g, p| format!("{}", self.score(g, p)))
    }

    pub fn genuine_csv(&self) -> Result<String, MatchError> {
        self.write_csv(|g, p| if self.is_genuine(g, p) { "1".into() } else { "0".into() })
    }

    fn write_csv(&self, cell: impl Fn(usize, usize) -> String) -> Result<String, MatchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("gallery").chain(self.probes.iter().map(|f| f.id.as_str())))?;
        for g in 0..self.rows() {
            let row: Vec<String> = std::iter::once(self.gallery[g].id.clone())
                .chain((0..self.cols()).map(|p| cell(g, p)))
                .collect();
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| MatchError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 strings"))
    }

    pub fn save_csv(&self, scores: &Path, genuine: &Path) -> Result<(), MatchError> {
        crate::fsutil::write_atomic(scores, self.to_csv()?.as_bytes())?;
        crate::fsutil::write_atomic(genuine, self.genuine_csv()?.as_bytes())?;
        Ok(())
    }
}

/// All gallery × probe fused scores from already projected faces.
pub fn score_projected(
    gallery: &[ProjectedFace],
    gallery_ids: &[FaceId],
    probes: &[ProjectedFace],
    probe_ids: &[FaceId],
    cfg: &FusionConfig,
) -> Result<ScoreMatrix, MatchError> {
    if gallery.is_empty() || probes.is_empty() {
        return Err(MatchError::EmptySet);
    }
    for (faces, ids) in [(gallery.len(), gallery_ids.len()), (probes.len(), probe_ids.len())] {
        if faces != ids {
            return Err(MatchError::IdMismatch { faces, ids });
        }
    }
    let rows = gallery
        .par_iter()
        .map(|g| probes.iter().map(|p| Ok(channel_sums(g, p)?.fuse(cfg))).collect::<Result<Vec<_>, MatchError>>())
        .collect::<Result<Vec<_>, _>>()?;
    let genuine = gallery_ids
        .iter()
        .flat_map(|g| probe_ids.iter().map(move |p| g.subject == p.subject))
        .collect();
    Ok(ScoreMatrix {
        gallery: gallery_ids.to_vec(),
        probes: probe_ids.to_vec(),
        scores: rows.concat(),
        genuine,
    })
}

pub fn project_all(model: &DiscriminativeModel, faces: &[AlignedFace]) -> Result<Vec<ProjectedFace>, MatchError> {
    faces.par_iter().map(|f| project_face(model, f)).collect()
}

pub fn score_all(
    model: &DiscriminativeModel,
    gallery: &[AlignedFace],
    gallery_ids: &[FaceId],
    probes: &[AlignedFace],
    probe_ids: &[FaceId],
    cfg: &FusionConfig,
) -> Result<ScoreMatrix, MatchError> {
    if gallery.is_empty() || probes.is_empty() {
        return Err(MatchError::EmptySet);
    }
    let g = project_all(model, gallery)?;
    let p = project_all(model, probes)?;
    score_projected(&g, gallery_ids, &p, probe_ids, cfg)
}
