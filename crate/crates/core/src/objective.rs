//! The angle-reconstruction loss and its gradient with respect to the
//! spherical coordinates of every point in a batch.
//!
//! Sphere angles are evaluated through the normals of the planes spanned by
//! the anchor and each context point (`A x B`), so the whole computation is
//! cross and dot products. The optimized quantity is the mean of squared
//! differences; [`LossValue::value`] reports its square root.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{for_each_pair, AnchorSample, AngleBatch};
use crate::error::{MercatError, Result};
use crate::geometry::{SphereEmbedding, SpherePoint, DEGENERACY_EPS};

/// Sphere neighbours closer than this (chord) to the anchor are skipped.
pub const MIN_CHORD: f64 = 1e-9;

/// Floor on `sin(angle)` when differentiating `arccos`.
const MIN_SIN: f64 = 1e-8;

/// Unit normal of plane OAB, its pre-normalisation length, and B.
type PlaneNormal = (Vector3<f64>, f64, Vector3<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSpace {
    /// Differences of cosines (arc-cosine dropped).
    #[default]
    Cosine,
    /// Differences of angles in radians.
    Angle,
}

impl std::str::FromStr for LossSpace {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "angle" => Ok(Self::Angle),
            other => Err(format!(
                "unknown loss space '{other}' (expected cosine or angle)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossValue {
    /// Root mean square difference over all aggregated triples.
    pub value: f64,
    /// Mean squared difference; the quantity that is differentiated.
    pub mean_square: f64,
    pub triple_count: usize,
    /// Triples dropped as degenerate, in the data or on the sphere.
    pub dropped: usize,
}

/// Dense gradient of the mean squared loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub d_phi: Vec<f64>,
    pub d_theta: Vec<f64>,
    /// Sorted indices of every point that entered a valid triple.
    pub touched: Vec<usize>,
}

impl GradientField {
    pub fn norm(&self) -> f64 {
        self.d_phi
            .iter()
            .chain(&self.d_theta)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

struct AnchorTerms {
    sum_sq: f64,
    triples: usize,
    dropped: usize,
    /// (point index, d/dphi, d/dtheta) of the unnormalized sum
    grads: Vec<(usize, f64, f64)>,
}

fn tangent_basis(p: SpherePoint) -> (Vector3<f64>, Vector3<f64>) {
    let (sp, cp) = p.phi.sin_cos();
    let (st, ct) = p.theta.sin_cos();
    (
        Vector3::new(cp * ct, cp * st, -sp),
        Vector3::new(-sp * st, sp * ct, 0.0),
    )
}

fn residual(space: LossSpace, predicted: f64, target: f64) -> (f64, f64) {
    match space {
        LossSpace::Cosine => {
            let e = predicted - target;
            (e * e, 2.0 * e)
        }
        LossSpace::Angle => {
            let c = predicted.clamp(-1.0, 1.0);
            let e = c.acos() - target.clamp(-1.0, 1.0).acos();
            let sin = (1.0 - c * c).sqrt().max(MIN_SIN);
            (e * e, -2.0 * e / sin)
        }
    }
}

fn anchor_terms(
    sample: &AnchorSample,
    y: &SphereEmbedding,
    space: LossSpace,
    with_grad: bool,
) -> AnchorTerms {
    let anchor = y.points[sample.anchor];
    let a = anchor.to_unit_vector();
    let m = sample.context.len();

    // per-context normal of plane OAB; None when degenerate on the sphere
    let mut normals: Vec<Option<PlaneNormal>> = Vec::with_capacity(m);
    for &j in &sample.context {
        let b = y.points[j].to_unit_vector();
        let u = a.cross(&b);
        let norm = u.norm();
        if (a - b).norm() < MIN_CHORD || norm <= DEGENERACY_EPS {
            normals.push(None);
        } else {
            normals.push(Some((u / norm, norm, b)));
        }
    }

    let mut sum_sq = 0.0;
    let mut triples = 0;
    let mut dropped = 0;
    let mut g_normal = vec![Vector3::zeros(); if with_grad { m } else { 0 }];
    let mut t = 0;
    for_each_pair(m, |ia, ib| {
        let target = sample.target_cos[t];
        t += 1;
        let (Some((na, _, _)), Some((nb, _, _))) = (&normals[ia], &normals[ib]) else {
            dropped += 1;
            return;
        };
        let c = na.dot(nb);
        let (sq, dsq_dc) = residual(space, c, target);
        sum_sq += sq;
        triples += 1;
        if with_grad {
            g_normal[ia] += dsq_dc * nb;
            g_normal[ib] += dsq_dc * na;
        }
    });

    let mut grads = Vec::new();
    if with_grad && triples > 0 {
        let mut g_anchor = Vector3::zeros();
        for (pos, entry) in normals.iter().enumerate() {
            let Some((n, norm, b)) = entry else { continue };
            let g = g_normal[pos];
            // derivative through the normalization u / |u|
            let g_u = (g - n * n.dot(&g)) / *norm;
            if g_u == Vector3::zeros() {
                continue;
            }
            g_anchor += b.cross(&g_u);
            let g_b = g_u.cross(&a);
            let (e_phi, e_theta) = tangent_basis(y.points[sample.context[pos]]);
            grads.push((sample.context[pos], g_b.dot(&e_phi), g_b.dot(&e_theta)));
        }
        let (e_phi, e_theta) = tangent_basis(anchor);
        grads.push((sample.anchor, g_anchor.dot(&e_phi), g_anchor.dot(&e_theta)));
    }
    AnchorTerms {
        sum_sq,
        triples,
        dropped,
        grads,
    }
}

fn check_indices(batch: &AngleBatch, y: &SphereEmbedding) -> Result<()> {
    let n = y.len();
    for s in &batch.samples {
        if s.anchor >= n || s.context.iter().any(|&j| j >= n) {
            return Err(MercatError::InvalidInput(format!(
                "batch references a point outside the {n}-point embedding"
            )));
        }
        if s.target_cos.len() != crate::angles::pair_count(s.context.len()) {
            return Err(MercatError::InvalidInput(format!(
                "anchor {} has {} targets for {} contexts",
                s.anchor,
                s.target_cos.len(),
                s.context.len()
            )));
        }
    }
    Ok(())
}

fn evaluate(
    batch: &AngleBatch,
    y: &SphereEmbedding,
    space: LossSpace,
    with_grad: bool,
) -> Result<(LossValue, Option<GradientField>)> {
    check_indices(batch, y)?;
    // each anchor is independent; the reduction below runs in anchor order
    let terms: Vec<AnchorTerms> = batch
        .samples
        .par_iter()
        .map(|s| anchor_terms(s, y, space, with_grad))
        .collect();

    let mut sum_sq = 0.0;
    let mut triples = 0;
    let mut dropped = batch.dropped();
    for t in &terms {
        sum_sq += t.sum_sq;
        triples += t.triples;
        dropped += t.dropped;
    }
    if triples == 0 {
        return Err(MercatError::EmptyBatch);
    }
    let mean_square = sum_sq / triples as f64;
    let loss = LossValue {
        value: mean_square.sqrt(),
        mean_square,
        triple_count: triples,
        dropped,
    };
    if !with_grad {
        return Ok((loss, None));
    }

    let n = y.len();
    let scale = 1.0 / triples as f64;
    let mut d_phi = vec![0.0; n];
    let mut d_theta = vec![0.0; n];
    let mut hit = vec![false; n];
    for t in &terms {
        for &(i, gp, gt) in &t.grads {
            d_phi[i] += gp * scale;
            d_theta[i] += gt * scale;
            hit[i] = true;
        }
    }
    let touched = (0..n).filter(|&i| hit[i]).collect();
    Ok((
        loss,
        Some(GradientField {
            d_phi,
            d_theta,
            touched,
        }),
    ))
}

pub fn loss(batch: &AngleBatch, y: &SphereEmbedding, space: LossSpace) -> Result<LossValue> {
    evaluate(batch, y, space, false).map(|(l, _)| l)
}

pub fn loss_gradient(
    batch: &AngleBatch,
    y: &SphereEmbedding,
    space: LossSpace,
) -> Result<(LossValue, GradientField)> {
    evaluate(batch, y, space, true).map(|(l, g)| (l, g.expect("gradient requested")))
}
