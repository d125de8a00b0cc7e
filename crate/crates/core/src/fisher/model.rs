use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::EyeTargets;
use crate::geom::Point2;
use crate::patches::{self, PatchError, PatchLayout};
use crate::pipeline::Alignment;
use crate::warp::{self, AlignedFace, Channel, ReferenceContour, WarpError};

use super::scatter::LabeledSamples;
use super::subspace::{fit_subspace, DiscriminativeSubspace, Ridge};
use super::LdaError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least two classes in the training set, found {0}")]
    InsufficientClasses(usize),
    #[error("{faces} faces but {labels} labels")]
    LabelMismatch { faces: usize, labels: usize },
    #[error("no channels selected")]
    NoChannels,
    #[error("training patch {patch}, channel {channel}")]
    Training {
        patch: usize,
        channel: &'static str,
        #[source]
        source: LdaError,
    },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// What a trained (patch, channel) slot needs at scoring time: the training
/// mean and the discriminant directions in input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    mean: Vec<f64>,
    /// `d × r`
    directions: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    pca_dim: usize,
}

impl Projector {
    pub fn from_subspace(s: &DiscriminativeSubspace) -> Self {
        Self {
            mean: s.mean.as_slice().to_vec(),
            directions: s.directions().clone(),
            eigenvalues: s.eigenvalues.clone(),
            pca_dim: s.pca_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn pca_dim(&self) -> usize {
        self.pca_dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, LdaError> {
        if v.len() != self.input_dim() {
            return Err(LdaError::DimensionMismatch {
                expected: self.input_dim(),
                found: v.len(),
            });
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok((0..self.output_dim())
            .map(|j| {
                self.directions
                    .column(j)
                    .iter()
                    .zip(&centered)
                    .map(|(w, x)| w * x)
                    .sum()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Trained(Projector),
    /// Untrainable on this data; contributes nothing to scores.
    Inert(String),
}

impl Slot {
    pub fn projector(&self) -> Option<&Projector> {
        match self {
            Slot::Trained(p) => Some(p),
            Slot::Inert(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub channels: Vec<Channel>,
    pub ridge: Ridge,
    pub alignment: Alignment,
    pub eye_targets: EyeTargets,
    pub reference: Option<ReferenceContour>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            channels: Channel::ALL.to_vec(),
            ridge: Ridge::default(),
            alignment: Alignment::Pixel,
            eye_targets: EyeTargets::default(),
            reference: None,
        }
    }
}

/// Patch layout plus one subspace slot per (patch, channel), patch-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativeModel {
    pub layout: PatchLayout,
    pub channels: Vec<Channel>,
    pub slots: Vec<Slot>,
    pub ridge: Ridge,
    pub alignment: Alignment,
    pub eye_targets: EyeTargets,
    pub reference: Option<ReferenceContour>,
}

impl DiscriminativeModel {
    pub fn grid(&self) -> (usize, usize) {
        self.layout.grid
    }

    pub fn slot(&self, patch: usize, channel: Channel) -> Option<&Slot> {
        let k = self.channels.iter().position(|&c| c == channel)?;
        self.slots.get(patch * self.channels.len() + k)
    }

    pub fn subspace_count(&self) -> usize {
        self.slots.len()
    }

    pub fn inert_count(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::Inert(_))).count()
    }
}

/// Fits one subspace per (patch, channel). Slots whose data has no
/// discriminant direction (for example a constant channel) are marked inert
/// instead of failing the whole model.
pub fn train_model(
    faces: &[AlignedFace],
    labels: &[usize],
    layout: &PatchLayout,
    cfg: &TrainConfig,
) -> Result<DiscriminativeModel, ModelError> {
    if faces.len() != labels.len() {
        return Err(ModelError::LabelMismatch {
            faces: faces.len(),
            labels: labels.len(),
        });
    }
    if cfg.channels.is_empty() {
        return Err(ModelError::NoChannels);
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ModelError::InsufficientClasses(classes.len()));
    }
    let nc = cfg.channels.len();
    let slots = (0..layout.len() * nc)
        .into_par_iter()
        .map(|i| {
            let (patch, channel) = (i / nc, cfg.channels[i % nc]);
            let vectors = faces
                .iter()
                .map(|f| patches::extract_channel(f, layout, patch, channel))
                .collect::<Result<Vec<_>, _>>()?;
            let samples = LabeledSamples::new(vectors, labels.to_vec())?;
            match fit_subspace(&samples, cfg.ridge) {
                Ok(s) => Ok(Slot::Trained(Projector::from_subspace(&s))),
                Err(e @ (LdaError::ZeroDiscriminant | LdaError::NumericalFailure(_))) => {
                    log::debug!("patch {patch} channel {} inert: {e}", channel.name());
                    Ok(Slot::Inert(e.to_string()))
                }
                Err(source) => Err(ModelError::Training {
                    patch,
                    channel: channel.name(),
                    source,
                }),
            }
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let model = DiscriminativeModel {
        layout: layout.clone(),
        channels: cfg.channels.clone(),
        slots,
        ridge: cfg.ridge,
        alignment: cfg.alignment,
        eye_targets: cfg.eye_targets,
        reference: cfg.reference.clone(),
    };
    if model.inert_count() > 0 {
        log::info!("{} of {} subspaces are inert", model.inert_count(), model.subspace_count());
    }
    Ok(model)
}

// Binary container, little endian:
//   "PXALMODL", version u32, grid w u32, h u32, layout fingerprint u64,
//   channel count u32 + codes (u8 each), alignment u8, ridge kind u8 + f64,
//   eye targets (4 × f64), layout text, reference text (empty if none),
//   slot count u32, then per slot: tag u8 (0 inert: reason text;
//   1 trained: d, q, r as u32, mean d×f64, directions column-major d·r×f64,
//   eigenvalues r×f64). Texts are u64 length + UTF-8 bytes.
const MAGIC: &[u8; 8] = b"PXALMODL";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn text(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Corrupt("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| ModelError::Corrupt("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn text(&mut self) -> Result<String, ModelError> {
        let n = self.u64()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ModelError::Corrupt("invalid utf-8".into()))
    }
}

pub fn encode_model(m: &DiscriminativeModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(m.layout.grid.0);
    w.u32(m.layout.grid.1);
    w.u64(m.layout.fingerprint());
    w.u32(m.channels.len());
    for c in &m.channels {
        w.u8(c.code());
    }
    w.u8(m.alignment.code());
    let (kind, value) = match m.ridge {
        Ridge::None => (0, 0.0),
        Ridge::Absolute(a) => (1, a),
        Ridge::RelativeTrace(s) => (2, s),
    };
    w.u8(kind);
    w.f64s(&[value]);
    let t = &m.eye_targets;
    w.f64s(&[t.eye_a.x, t.eye_a.y, t.eye_b.x, t.eye_b.y]);
    w.u32(t.width);
    w.u32(t.height);
    w.text(&patches::format_layout(&m.layout));
    w.text(&m.reference.as_ref().map(warp::format_reference).unwrap_or_default());
    w.u32(m.slots.len());
    for slot in &m.slots {
        match slot {
            Slot::Inert(reason) => {
                w.u8(0);
                w.text(reason);
            }
            Slot::Trained(p) => {
                w.u8(1);
                w.u32(p.input_dim());
                w.u32(p.pca_dim);
                w.u32(p.output_dim());
                w.f64s(&p.mean);
                w.f64s(p.directions.as_slice());
                w.f64s(&p.eigenvalues);
            }
        }
    }
    w.0
}

pub fn decode_model(bytes: &[u8]) -> Result<DiscriminativeModel, ModelError> {
    let corrupt = |m: &str| ModelError::Corrupt(m.to_string());
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).ok() != Some(&MAGIC[..]) {
        return Err(corrupt("bad magic"));
    }
    if r.u32()? != VERSION as usize {
        return Err(corrupt("unsupported version"));
    }
    let grid = (r.u32()?, r.u32()?);
    let fingerprint = r.u64()?;
    let nc = r.u32()?;
    let channels = (0..nc)
        .map(|_| r.u8().and_then(|c| Channel::from_code(c).ok_or_else(|| corrupt("unknown channel"))))
        .collect::<Result<Vec<_>, _>>()?;
    let alignment = Alignment::from_code(r.u8()?).ok_or_else(|| corrupt("unknown alignment"))?;
    let kind = r.u8()?;
    let value = r.f64s(1)?[0];
    let ridge = match kind {
        0 => Ridge::None,
        1 => Ridge::Absolute(value),
        2 => Ridge::RelativeTrace(value),
        _ => return Err(corrupt("unknown ridge kind")),
    };
    let e = r.f64s(4)?;
    let eye_targets = EyeTargets {
        eye_a: Point2::new(e[0], e[1]),
        eye_b: Point2::new(e[2], e[3]),
        width: r.u32()?,
        height: r.u32()?,
    };
    let layout = patches::parse_layout(&r.text()?)?;
    if layout.grid != grid || layout.fingerprint() != fingerprint {
        return Err(corrupt("layout does not match header"));
    }
    let reference_text = r.text()?;
    let reference = if reference_text.is_empty() {
        None
    } else {
        Some(warp::parse_reference(&reference_text)?)
    };
    let n = r.u32()?;
    if n != layout.len() * channels.len() {
        return Err(corrupt("slot count does not match layout"));
    }
    let mut slots = Vec::with_capacity(n);
    for _ in 0..n {
        slots.push(match r.u8()? {
            0 => Slot::Inert(r.text()?),
            1 => {
                let (d, q, k) = (r.u32()?, r.u32()?, r.u32()?);
                let mean = r.f64s(d)?;
                let directions = DMatrix::from_vec(d, k, r.f64s(d * k)?);
                let eigenvalues = r.f64s(k)?;
                Slot::Trained(Projector {
                    mean,
                    directions,
                    eigenvalues,
                    pca_dim: q,
                })
            }
            _ => return Err(corrupt("unknown slot tag")),
        });
    }
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(DiscriminativeModel {
        layout,
        channels,
        slots,
        ridge,
        alignment,
        eye_targets,
        reference,
    })
}

pub fn save_model(path: impl AsRef<Path>, m: &DiscriminativeModel) -> Result<(), ModelError> {
    let path = path.as_ref();
    crate::fsutil::write_atomic(path, &encode_model(m)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DiscriminativeModel, ModelError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => ModelError::NotFound(path.to_path_buf()),
        _ => ModelError::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    decode_model(&bytes)
}
