//! Synthetic face corpus: textured "subjects" under known smooth expression
//! deformations, random pose and noise, with exact 68-point landmarks.
//!
//! Every subject is a random texture painted on a common face layout plus a
//! small subject-specific shape offset. Expressions are displacement fields
//! (sums of Gaussian bumps) shared by all subjects, so the dominant nuisance
//! is non-rigid geometry that eye registration cannot undo.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{self, CorpusError, FaceRecord, GrayImage, LandmarkSet, Manifest};
use crate::eval::Dataset;
use crate::geom::{Point2, Similarity};
use crate::matcher::FaceId;

/// Expression tag given to the undeformed image of each subject.
pub const NEUTRAL_TAG: &str = "neutral";
/// Number of built-in expressions, neutral included.
pub const EXPRESSION_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    /// At most [`EXPRESSION_COUNT`].
    pub expressions: usize,
    pub seed: u64,
    pub image_size: (usize, usize),
    /// Standard deviation of additive intensity noise.
    pub noise: f64,
    /// Standard deviation of landmark jitter in pixels.
    pub landmark_noise: f64,
    /// Amplitude of the per-subject shape offsets in pixels.
    pub shape_variation: f64,
    /// Scale of the per-expression strength jitter (0 = exact expressions).
    pub expression_jitter: f64,
    /// Contrast of the subject-specific texture.
    pub identity_contrast: f64,
    /// Contrast of the texture shared by all subjects.
    pub shared_contrast: f64,
    /// Wavelength range of the texture waves in pixels.
    pub wavelengths: (f64, f64),
    /// Amplitude in pixels of the random per-image facial deformation added
    /// on top of the expression.
    pub deformation: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 10,
            expressions: EXPRESSION_COUNT,
            seed: 2024,
            image_size: (170, 150),
            noise: 0.12,
            landmark_noise: 0.3,
            shape_variation: 2.0,
            expression_jitter: 0.15,
            identity_contrast: 0.03,
            shared_contrast: 0.15,
            wavelengths: (4.0, 10.0),
            deformation: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub images: Vec<GrayImage>,
    pub landmarks: Vec<LandmarkSet>,
    pub ids: Vec<FaceId>,
    pub expressions: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    center: Point2,
    sigma: f64,
    disp: Point2,
}

fn bump(cx: f64, cy: f64, sigma: f64, dx: f64, dy: f64) -> Bump {
    Bump {
        center: Point2::new(cx, cy),
        sigma,
        disp: Point2::new(dx, dy),
    }
}

fn field(bumps: &[Bump], p: Point2) -> Point2 {
    let mut out = Point2::new(0.0, 0.0);
    for b in bumps {
        let d2 = (p - b.center).norm().powi(2);
        let s2 = b.sigma * b.sigma;
        if d2 < 18.0 * s2 {
            out = out + b.disp * (-d2 / (2.0 * s2)).exp();
        }
    }
    out
}

/// Displacement bumps of each expression, in canonical coordinates.
fn expression_bumps(k: usize) -> Vec<Bump> {
    match k {
        // smile
        1 => vec![
            bump(43.0, 96.0, 8.0, -4.0, -5.0),
            bump(77.0, 96.0, 8.0, 4.0, -5.0),
            bump(35.0, 84.0, 10.0, 0.0, -3.0),
            bump(85.0, 84.0, 10.0, 0.0, -3.0),
        ],
        // jaw drop
        2 => vec![bump(60.0, 106.0, 16.0, 0.0, 9.0), bump(60.0, 90.0, 6.0, 0.0, -1.5)],
        // brow raise
        3 => vec![
            bump(34.0, 42.0, 11.0, 0.0, -6.0),
            bump(86.0, 42.0, 11.0, 0.0, -6.0),
            bump(60.0, 45.0, 12.0, 0.0, -3.0),
        ],
        // frown
        4 => vec![
            bump(44.0, 44.0, 9.0, 4.0, 3.0),
            bump(76.0, 44.0, 9.0, -4.0, 3.0),
            bump(43.0, 96.0, 7.0, -1.0, 4.0),
            bump(77.0, 96.0, 7.0, 1.0, 4.0),
        ],
        // surprise
        5 => vec![
            bump(34.0, 42.0, 11.0, 0.0, -5.0),
            bump(86.0, 42.0, 11.0, 0.0, -5.0),
            bump(60.0, 106.0, 14.0, 0.0, 7.0),
            bump(43.0, 96.0, 7.0, 3.0, 0.0),
            bump(77.0, 96.0, 7.0, -3.0, 0.0),
        ],
        // one-sided smirk
        6 => vec![
            bump(77.0, 96.0, 10.0, 5.0, -5.0),
            bump(86.0, 42.0, 10.0, 0.0, -3.0),
            bump(60.0, 100.0, 18.0, 3.0, 0.0),
        ],
        // puffed cheeks
        7 => vec![
            bump(30.0, 85.0, 14.0, -5.0, 0.0),
            bump(90.0, 85.0, 14.0, 5.0, 0.0),
            bump(60.0, 96.0, 10.0, 0.0, 2.0),
        ],
        _ => Vec::new(),
    }
}

fn expression_tag(k: usize) -> String {
    match k {
        0 => NEUTRAL_TAG.into(),
        _ => format!("expr{k}"),
    }
}

/// Mean face layout on the default 140×120 canvas, with eye centers at
/// (35, 55) and (85, 55).
pub fn canonical_landmarks() -> LandmarkSet {
    let mut p = Vec::with_capacity(68);
    for i in 0..17 {
        let t = PI * i as f64 / 16.0;
        p.push(Point2::new(60.0 - 48.0 * t.cos(), 50.0 + 58.0 * t.sin()));
    }
    for x0 in [18.0, 70.0] {
        for k in 0..5 {
            p.push(Point2::new(x0 + 8.0 * k as f64, 42.0 - 4.0 * (PI * k as f64 / 4.0).sin()));
        }
    }
    for k in 0..4 {
        p.push(Point2::new(60.0, 57.0 + 7.0 * k as f64));
    }
    for (k, y) in [84.0, 86.0, 87.0, 86.0, 84.0].into_iter().enumerate() {
        p.push(Point2::new(50.0 + 5.0 * k as f64, y));
    }
    for cx in [35.0, 85.0] {
        for (dx, dy) in [(-9.0, 0.0), (-4.5, -3.5), (4.5, -3.5), (9.0, 0.0), (4.5, 3.5), (-4.5, 3.5)] {
            p.push(Point2::new(cx + dx, 55.0 + dy));
        }
    }
    for k in 0..12 {
        let t = PI * k as f64 / 6.0;
        p.push(Point2::new(60.0 - 17.0 * t.cos(), 96.0 - 6.0 * t.sin()));
    }
    for k in 0..8 {
        let t = PI * k as f64 / 4.0;
        p.push(Point2::new(60.0 - 12.0 * t.cos(), 96.0 - 2.5 * t.sin()));
    }
    LandmarkSet::new(p).expect("68 finite points")
}

struct Wave {
    k: Point2,
    phase: f64,
    amp: f64,
}

/// Random band-limited pattern: plane waves plus a few soft blobs, roughly
/// unit variance.
struct Texture {
    waves: Vec<Wave>,
    blobs: Vec<(Point2, f64, f64)>,
    norm: f64,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng, wavelengths: (f64, f64), blob_count: usize) -> Self {
        let waves: Vec<Wave> = (0..8)
            .map(|_| {
                let lambda = rng.random_range(wavelengths.0..wavelengths.1);
                let theta = rng.random_range(0.0..PI);
                Wave {
                    k: Point2::new(theta.cos(), theta.sin()) * (TAU / lambda),
                    phase: rng.random_range(0.0..TAU),
                    amp: rng.random_range(0.5..1.0),
                }
            })
            .collect();
        let blobs = (0..blob_count)
            .map(|_| {
                (
                    Point2::new(rng.random_range(20.0..100.0), rng.random_range(40.0..105.0)),
                    rng.random_range(4.0..9.0),
                    rng.random_range(-1.5..1.5),
                )
            })
            .collect();
        let norm = (waves.iter().map(|w| w.amp * w.amp).sum::<f64>() / 2.0).sqrt();
        Self { waves, blobs, norm }
    }

    fn at(&self, p: Point2) -> f64 {
        let mut t = 0.0;
        for w in &self.waves {
            t += w.amp * (w.k.x * p.x + w.k.y * p.y + w.phase).sin();
        }
        t /= self.norm;
        for (c, s, a) in &self.blobs {
            t += a * (-(p - *c).norm().powi(2) / (2.0 * s * s)).exp();
        }
        t
    }
}

struct Subject {
    texture: Texture,
    shape: Vec<Bump>,
}

impl Subject {
    fn random(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Self {
        let texture = Texture::random(rng, cfg.wavelengths, 0);
        let shape_noise = Normal::new(0.0, cfg.shape_variation.max(0.0)).expect("valid sigma");
        let shape = (0..6)
            .map(|_| {
                let c = Point2::new(rng.random_range(20.0..100.0), rng.random_range(45.0..105.0));
                let sigma = rng.random_range(10.0..18.0);
                Bump {
                    center: c,
                    sigma,
                    disp: Point2::new(shape_noise.sample(rng), shape_noise.sample(rng)),
                }
            })
            .collect();
        Self { texture, shape }
    }
}

/// Intensity at canonical position `p` of a face with identity texture
/// `own` over the population texture `shared`.
fn shade(p: Point2, own: &Texture, shared: &Texture, cfg: &SynthConfig) -> f64 {
    // facial shading common to everyone: darker eyes, brows and mouth
    let dip = |c: Point2, sx: f64, sy: f64| {
        let d = p - c;
        (-(d.x * d.x) / (2.0 * sx * sx) - (d.y * d.y) / (2.0 * sy * sy)).exp()
    };
    let common = -dip(Point2::new(35.0, 55.0), 6.0, 3.5)
        - dip(Point2::new(85.0, 55.0), 6.0, 3.5)
        - 0.6 * dip(Point2::new(34.0, 41.0), 10.0, 2.5)
        - 0.6 * dip(Point2::new(86.0, 41.0), 10.0, 2.5)
        - 0.8 * dip(Point2::new(60.0, 96.0), 14.0, 3.0);
    // soft face window: texture fades to a flat background
    let e = ((p.x - 60.0) / 52.0).powi(2) + ((p.y - 72.0) / 42.0).powi(2);
    let window = 1.0 / (1.0 + ((e - 1.0) * 12.0).exp());
    0.5 + window * (cfg.identity_contrast * own.at(p) + cfg.shared_contrast * shared.at(p) + 0.2 * common)
}

/// Renders the corpus. Image `i` belongs to subject `i / expressions` and
/// shows expression `i % expressions`.
pub fn generate(cfg: &SynthConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shared = Texture::random(&mut rng, cfg.wavelengths, 5);
    let subjects: Vec<Subject> = (0..cfg.subjects).map(|_| Subject::random(&mut rng, cfg)).collect();
    let canonical = canonical_landmarks();
    let n_expr = cfg.expressions.min(EXPRESSION_COUNT);
    let (iw, ih) = cfg.image_size;
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid sigma");
    let deform = Normal::new(0.0, cfg.deformation.max(0.0)).expect("valid sigma");
    let lm_noise = Normal::new(0.0, cfg.landmark_noise.max(0.0)).expect("valid sigma");

    let mut out = SyntheticCorpus {
        images: Vec::new(),
        landmarks: Vec::new(),
        ids: Vec::new(),
        expressions: Vec::new(),
    };
    for (s, subject) in subjects.iter().enumerate() {
        for e in 0..n_expr {
            let strength = 1.0 + cfg.expression_jitter * rng.random_range(-1.0..1.0);
            let mut bumps: Vec<Bump> = expression_bumps(e)
                .into_iter()
                .map(|b| Bump {
                    disp: b.disp * strength,
                    ..b
                })
                .collect();
            bumps.extend_from_slice(&subject.shape);
            for _ in 0..4 {
                bumps.push(Bump {
                    center: Point2::new(rng.random_range(25.0..95.0), rng.random_range(45.0..105.0)),
                    sigma: rng.random_range(12.0..22.0),
                    disp: Point2::new(deform.sample(&mut rng), deform.sample(&mut rng)),
                });
            }
            let angle = rng.random_range(-8.0f64..8.0).to_radians();
            let scale = rng.random_range(0.92..1.08);
            let shift = Point2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let center = Point2::new(iw as f64 / 2.0, ih as f64 / 2.0) + shift;
            // canonical → image: rotate/scale about the canonical face center
            let (a, b) = (scale * angle.cos(), scale * angle.sin());
            let pose = Similarity {
                a,
                b,
                tx: center.x - (a * 60.0 - b * 72.0),
                ty: center.y - (b * 60.0 + a * 72.0),
            };
            let inverse = pose.inverse().expect("non-zero scale");
            let img = GrayImage::from_fn(iw, ih, |row, col| {
                let target = inverse.apply(Point2::new(col as f64, row as f64));
                // invert p ↦ p + F(p) by fixed-point iteration (F is a contraction)
                let mut p = target;
                for _ in 0..10 {
                    p = target - field(&bumps, p);
                }
                shade(p, &subject.texture, &shared, cfg) + noise.sample(&mut rng)
            });
            let points = canonical
                .points()
                .iter()
                .map(|&q| {
                    let moved = pose.apply(q + field(&bumps, q));
                    Point2::new(moved.x + lm_noise.sample(&mut rng), moved.y + lm_noise.sample(&mut rng))
                })
                .collect();
            let lm = LandmarkSet::new(points).expect("68 finite points");
            let subject_id = format!("s{:02}", s + 1);
            out.ids.push(FaceId::new(format!("{subject_id}/{}.pgm", expression_tag(e)), subject_id));
            out.images.push(img);
            out.landmarks.push(lm);
            out.expressions.push(e);
        }
    }
    out
}

impl SyntheticCorpus {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dataset(&self) -> Dataset {
        Dataset {
            images: self.images.clone(),
            landmarks: self.landmarks.clone(),
            ids: self.ids.clone(),
            neutral: self.expressions.iter().map(|&e| e == 0).collect(),
        }
    }

    /// Writes `<subject>/<tag>.pgm`, `<subject>/<tag>.pts` and a
    /// `manifest.csv` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Manifest, CorpusError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        let mut records = Vec::new();
        for i in 0..self.len() {
            let id = &self.ids[i];
            let tag = expression_tag(self.expressions[i]);
            let sub = dir.join(&id.subject);
            std::fs::create_dir_all(&sub).map_err(io(&sub))?;
            let image_path = format!("{}/{tag}.pgm", id.subject);
            let landmark_path = format!("{}/{tag}.pts", id.subject);
            corpus::save_pgm(dir.join(&image_path), &self.images[i])?;
            corpus::save_landmarks(dir.join(&landmark_path), &self.landmarks[i])?;
            records.push(FaceRecord {
                subject_id: id.subject.clone(),
                image_path,
                landmark_path,
                expression_tag: Some(tag),
            });
        }
        let manifest = Manifest::new(records, dir)?;
        let path = dir.join("manifest.csv");
        crate::fsutil::write_atomic(&path, corpus::format_manifest(&manifest).as_bytes()).map_err(io(&path))?;
        Ok(manifest)
    }
}
