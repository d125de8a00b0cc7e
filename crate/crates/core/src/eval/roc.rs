use std::fmt::Write as _;

use crate::matcher::ScoreMatrix;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub vr: f64,
}

/// Operating points at every distinct score, in descending threshold order.
/// A pair is accepted at threshold `t` when its score is `≥ t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

pub fn roc(scores: &ScoreMatrix) -> Result<RocCurve, EvalError> {
    roc_from_pairs(&scores.pairs())
}

/// ROC from `(score, is_genuine)` pairs.
pub fn roc_from_pairs(pairs: &[(f64, bool)]) -> Result<RocCurve, EvalError> {
    if let Some((s, _)) = pairs.iter().find(|(s, _)| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(*s));
    }
    let n_genuine = pairs.iter().filter(|p| p.1).count();
    let n_impostor = pairs.len() - n_genuine;
    if n_genuine == 0 {
        return Err(EvalError::NoGenuinePairs);
    }
    if n_impostor == 0 {
        return Err(EvalError::NoImpostorPairs);
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            far: fp as f64 / n_impostor as f64,
            vr: tp as f64 / n_genuine as f64,
        });
    }
    Ok(RocCurve {
        points,
        n_genuine,
        n_impostor,
    })
}

impl RocCurve {
    /// Trapezoidal area under the (far, vr) curve starting from (0, 0).
    pub fn auc(&self) -> f64 {
        let mut prev = (0.0, 0.0);
        let mut area = 0.0;
        for p in &self.points {
            area += (p.far - prev.0) * (p.vr + prev.1) * 0.5;
            prev = (p.far, p.vr);
        }
        area
    }

    /// Smallest non-zero false acceptance rate the impostor count can express.
    pub fn far_floor(&self) -> f64 {
        1.0 / self.n_impostor as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,far,vr\n");
        for p in &self.points {
            writeln!(out, "{},{},{}", p.threshold, p.far, p.vr).expect("String write");
        }
        out
    }
}

pub fn auc(curve: &RocCurve) -> f64 {
    curve.auc()
}

/// Verification rate at the largest achieved false acceptance rate not above
/// `far_target` (a step function; no interpolation between operating points).
pub fn vr_at_far(curve: &RocCurve, far_target: f64) -> Result<f64, EvalError> {
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(EvalError::InvalidFarTarget(far_target));
    }
    if (curve.n_impostor as f64) * far_target < 1.0 {
        return Err(EvalError::FarUnreachable {
            target: far_target,
            floor: curve.far_floor(),
        });
    }
    Ok(curve
        .points
        .iter()
        .take_while(|p| p.far <= far_target)
        .last()
        .map_or(0.0, |p| p.vr))
}
