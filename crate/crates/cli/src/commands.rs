use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pixalign::corpus::{load_image, load_landmarks, load_manifest, EyeTargets, Manifest};
use pixalign::eval::{run_experiment, Dataset, ExperimentConfig, Mode};
use pixalign::fisher::{load_model, save_model, train_model, TrainConfig};
use pixalign::fsutil::write_atomic;
use pixalign::geom::Point2;
use pixalign::matcher::{score_all, FaceId, FusionConfig};
use pixalign::patches::{generate_layout, whole_face_layout};
use pixalign::pipeline::{reference_from_manifest, Alignment, Preprocessor};
use pixalign::synthetic::{generate, SynthConfig, EXPRESSION_COUNT};
use pixalign::warp::{delta_png, encode_aligned_face, intensity_png, load_reference, save_reference, ReferenceContour};
use pixalign::AlignedFace;
use rayon::prelude::*;

use crate::{usage, EvalArgs, ReferenceArgs, ScoreArgs, SynthArgs, TrainArgs, WarpArgs};

fn targets(eyes: (Point2, Point2), grid: (usize, usize)) -> Result<EyeTargets> {
    let (w, h) = grid;
    for p in [eyes.0, eyes.1] {
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= (w - 1) as f64 && p.y <= (h - 1) as f64) {
            return Err(usage(format!("eye target ({}, {}) lies outside the {w}x{h} grid", p.x, p.y)));
        }
    }
    if eyes.0.distance(eyes.1) == 0.0 {
        return Err(usage("eye targets coincide"));
    }
    Ok(EyeTargets {
        eye_a: eyes.0,
        eye_b: eyes.1,
        width: w,
        height: h,
    })
}

fn check_weight(w: f64) -> Result<()> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(usage(format!("--w must be a finite non-negative number, got {w}")));
    }
    Ok(())
}

fn check_patches(count: usize, size: usize, grid: (usize, usize)) -> Result<()> {
    if count == 0 {
        return Err(usage("--patches must be at least 1"));
    }
    if size == 0 || size > grid.0.min(grid.1) {
        return Err(usage(format!("--patch-size must lie in 1..={}", grid.0.min(grid.1))));
    }
    Ok(())
}

/// Creates the directory that will hold `path`.
fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn manifest(path: &Path) -> Result<Manifest> {
    load_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn reference_file(path: &Path) -> Result<ReferenceContour> {
    load_reference(path).with_context(|| format!("reading reference {}", path.display()))
}

/// Aligns every manifest record in parallel.
fn prepare_all(pre: &Preprocessor, m: &Manifest) -> Result<Vec<AlignedFace>> {
    Ok((0..m.records.len())
        .into_par_iter()
        .map(|i| pre.prepare_record(m, i))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn reference(a: ReferenceArgs) -> Result<()> {
    let t = targets(a.canvas.eyes, a.canvas.grid)?;
    let m = manifest(&a.manifest)?;
    let r = reference_from_manifest(&m, a.neutral_tag.as_deref(), &t)?;
    ensure_parent(&a.out)?;
    save_reference(&a.out, &r)?;
    log::info!("reference from {} landmark sets written to {}", r.source_count(), a.out.display());
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn warp(a: WarpArgs) -> Result<()> {
    let r = reference_file(&a.reference)?;
    let t = targets(a.eyes, r.grid())?;
    let img = load_image(&a.image)?;
    let lm = load_landmarks(&a.landmarks)?;
    let face = Preprocessor::pixel(r, t)?.prepare(&img, &lm)?;
    let (dx, dy) = (face.dx.as_ref().context("no dx map")?, face.dy.as_ref().context("no dy map")?);
    let outputs = [
        (with_suffix(&a.out_prefix, ".pxf"), encode_aligned_face(&face)),
        (with_suffix(&a.out_prefix, "_intensity.png"), intensity_png(&face)),
        (with_suffix(&a.out_prefix, "_dx.png"), delta_png(dx, &face.mask)),
        (with_suffix(&a.out_prefix, "_dy.png"), delta_png(dy, &face.mask)),
    ];
    for (path, bytes) in &outputs {
        ensure_parent(path)?;
        write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    if face.clamped_samples > 0 {
        log::warn!("{} samples fell outside the source image and were clamped", face.clamped_samples);
    }
    Ok(())
}

fn subject_labels(m: &Manifest) -> Vec<usize> {
    let mut ids = BTreeMap::new();
    for r in &m.records {
        let n = ids.len();
        ids.entry(r.subject_id.as_str()).or_insert(n);
    }
    m.records.iter().map(|r| ids[r.subject_id.as_str()]).collect()
}

pub fn train(a: TrainArgs) -> Result<()> {
    let reference = match (a.mode.alignment(), &a.reference) {
        (Alignment::Pixel, None) => return Err(usage(format!("--reference is required for --mode {}", a.mode))),
        (Alignment::Pixel, Some(p)) => Some(reference_file(p)?),
        (Alignment::Eye, _) => None,
    };
    let grid = reference.as_ref().map_or(a.grid, |r| r.grid());
    let t = targets(a.eyes, grid)?;
    if a.mode != Mode::WholeFace {
        check_patches(a.patches, a.patch_size, grid)?;
    }
    let m = manifest(&a.manifest)?;
    let pre = match &reference {
        Some(r) => Preprocessor::pixel(r.clone(), t)?,
        None => Preprocessor::eye(t),
    };
    let faces = prepare_all(&pre, &m)?;
    let layout = match a.mode {
        Mode::WholeFace => whole_face_layout(grid, a.seed)?,
        _ => generate_layout(grid, a.patches, a.patch_size, a.seed)?,
    };
    let cfg = TrainConfig {
        channels: a.mode.channels(),
        alignment: a.mode.alignment(),
        eye_targets: t,
        reference,
        ..TrainConfig::default()
    };
    let model = train_model(&faces, &subject_labels(&m), &layout, &cfg)?;
    ensure_parent(&a.out)?;
    save_model(&a.out, &model)?;
    log::info!(
        "model with {} subspaces ({} inert) written to {}",
        model.subspace_count(),
        model.inert_count(),
        a.out.display()
    );
    Ok(())
}

fn face_ids(m: &Manifest) -> Vec<FaceId> {
    m.records.iter().map(|r| FaceId::new(r.display_id(), r.subject_id.clone())).collect()
}

pub fn score(a: ScoreArgs) -> Result<()> {
    check_weight(a.w)?;
    let fusion = FusionConfig::new(a.w)?;
    let model = load_model(&a.model).with_context(|| format!("reading model {}", a.model.display()))?;
    let pre = match model.alignment {
        Alignment::Eye => Preprocessor::eye(model.eye_targets),
        Alignment::Pixel => {
            let r = model.reference.clone().context("pixel-aligned model carries no reference contour")?;
            Preprocessor::pixel(r, model.eye_targets)?
        }
    };
    let gallery = manifest(&a.gallery_manifest)?;
    let probes = manifest(&a.probe_manifest)?;
    let g = prepare_all(&pre, &gallery)?;
    let p = prepare_all(&pre, &probes)?;
    let scores = score_all(&model, &g, &face_ids(&gallery), &p, &face_ids(&probes), &fusion)?;
    let genuine = a.genuine_out.unwrap_or_else(|| a.out.with_extension("genuine.csv"));
    ensure_parent(&a.out)?;
    ensure_parent(&genuine)?;
    scores.save_csv(&a.out, &genuine)?;
    log::info!("{}x{} scores written to {}", scores.rows(), scores.cols(), a.out.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    if a.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    if let Some(f) = a.far.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(usage(format!("--far values must lie in (0, 1], got {f}")));
    }
    check_weight(a.w)?;
    let supplied = a.reference.as_deref().map(reference_file).transpose()?;
    let grid = supplied.as_ref().map_or(a.canvas.grid, |r| r.grid());
    targets(a.canvas.eyes, grid)?;
    if a.mode != Mode::WholeFace {
        check_patches(a.patches, a.patch_size, grid)?;
    }
    let cfg = ExperimentConfig {
        folds: a.folds,
        patch_count: a.patches,
        patch_size: a.patch_size,
        w: a.w,
        grid,
        eyes: a.canvas.eyes,
        seed: a.seed,
        mode: a.mode,
        far_targets: a.far.clone(),
        ..ExperimentConfig::default()
    };
    let m = manifest(&a.manifest)?;
    m.check_recognition_ready()?;
    let data = Dataset::from_manifest(&m, a.neutral_tag.as_deref())?;
    let reference = match (a.mode.alignment(), supplied) {
        (Alignment::Eye, _) => None,
        (Alignment::Pixel, Some(r)) => Some(r),
        (Alignment::Pixel, None) => Some(data.reference(&cfg.eye_targets())?),
    };
    let result = run_experiment(&cfg, &data, reference.as_ref())?;
    result.write_outputs(&a.out, a.svg)?;
    print!("{}", result.report.to_text());
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    if a.subjects < 2 {
        return Err(usage("--subjects must be at least 2"));
    }
    if !(1..=EXPRESSION_COUNT).contains(&a.expressions) {
        return Err(usage(format!("--expressions must lie in 1..={EXPRESSION_COUNT}")));
    }
    let corpus = generate(&SynthConfig {
        subjects: a.subjects,
        expressions: a.expressions,
        seed: a.seed,
        ..SynthConfig::default()
    });
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    corpus.write_to_dir(&a.out)?;
    log::info!("{} images written under {}", corpus.len(), a.out.display());
    Ok(())
}
