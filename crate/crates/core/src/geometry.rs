//! Points on the unit 2-sphere, spherical distances and angles, global
//! rotations, and the Mercator map used for 2D figures.
//!
//! A point is parameterized by colatitude `phi` (measured from the north
//! pole) and azimuth `theta`. With that convention the squared chord
//! between two points is exactly `2 - 2 cos(gamma)` with `gamma` the
//! enclosed central angle.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix3, Vector3};

use crate::error::{MercatError, Result};

/// Floor applied to cross-product norms and trig denominators.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Default latitude clamp of the Mercator projection (85 degrees).
pub const DEFAULT_LAT_CLAMP: f64 = 85.0 * PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    /// Colatitude in `[0, pi]`.
    pub phi: f64,
    /// Azimuth in `[0, 2pi)`.
    pub theta: f64,
}

impl SpherePoint {
    pub fn new(phi: f64, theta: f64) -> Self {
        Self { phi, theta }
    }

    /// Recovers spherical coordinates from a (not necessarily normalized)
    /// nonzero 3-vector.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let rho = (v.x * v.x + v.y * v.y).sqrt();
        let phi = rho.atan2(v.z);
        let theta = wrap_azimuth(v.y.atan2(v.x));
        Self { phi, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.theta.is_finite()
    }

    pub fn to_unit_vector(&self) -> Vector3<f64> {
        to_unit_vector(*self)
    }

    /// Brings the coordinates back into canonical range without moving the
    /// represented point: colatitude is reflected at the poles (shifting the
    /// azimuth by pi) and azimuth is reduced mod 2pi.
    pub fn wrapped(&self) -> Self {
        let mut phi = self.phi.rem_euclid(TAU);
        let mut theta = self.theta;
        if phi > PI {
            phi = TAU - phi;
            theta += PI;
        }
        Self {
            phi,
            theta: wrap_azimuth(theta),
        }
    }
}

fn wrap_azimuth(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// An ordered set of sphere points, index-aligned with the rows of the
/// source data.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereEmbedding {
    pub points: Vec<SpherePoint>,
}

impl SphereEmbedding {
    pub fn new(points: Vec<SpherePoint>) -> Result<Self> {
        if points.len() < 3 {
            return Err(MercatError::BadDims(format!(
                "an embedding needs at least 3 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(MercatError::InvalidInput(format!(
                "point {i} has non-finite coordinates"
            )));
        }
        Ok(Self { points })
    }

    pub fn from_vectors(vectors: &[Vector3<f64>]) -> Result<Self> {
        Self::new(vectors.iter().map(SpherePoint::from_vector).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn unit_vectors(&self) -> Vec<Vector3<f64>> {
        self.points.iter().map(|p| p.to_unit_vector()).collect()
    }
}

/// `(sin phi cos theta, sin phi sin theta, cos phi)`.
pub fn to_unit_vector(p: SpherePoint) -> Vector3<f64> {
    let (sp, cp) = p.phi.sin_cos();
    let (st, ct) = p.theta.sin_cos();
    Vector3::new(sp * ct, sp * st, cp)
}

/// Straight-line distance through the ball, evaluated with the
/// vertex-to-side formula `sqrt(2 - 2 [sin phi_i sin phi_j cos(theta_i - theta_j) + cos phi_i cos phi_j])`.
pub fn chord_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    let cos_gamma =
        p.phi.sin() * q.phi.sin() * (p.theta - q.theta).cos() + p.phi.cos() * q.phi.cos();
    (2.0 - 2.0 * cos_gamma.clamp(-1.0, 1.0)).max(0.0).sqrt()
}

/// Great-circle distance in radians.
pub fn arc_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    arc_between(&to_unit_vector(p), &to_unit_vector(q))
}

/// Great-circle distance between two unit vectors. Uses `atan2` of the
/// cross and dot products, which stays accurate for nearly coincident or
/// nearly antipodal points.
pub fn arc_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Cosine of the geodesic angle at `a` between the great-circle arcs to `b`
/// and `c`, computed as the dot product of the unit normals of the planes
/// `OAB` and `OAC`.
pub fn geodesic_angle_cos(a: SpherePoint, b: SpherePoint, c: SpherePoint) -> Result<f64> {
    geodesic_angle_cos_vec(&to_unit_vector(a), &to_unit_vector(b), &to_unit_vector(c))
}

pub fn geodesic_angle_cos_vec(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Result<f64> {
    let (n1, n2) = plane_normals(a, b, c)?;
    Ok((n1.dot(&n2) / (n1.norm() * n2.norm())).clamp(-1.0, 1.0))
}

/// The geodesic angle at `a` in radians, via `atan2` of the normals so the
/// result stays accurate near 0 and pi.
pub fn geodesic_angle_vec(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Result<f64> {
    let (n1, n2) = plane_normals(a, b, c)?;
    Ok(n1.cross(&n2).norm().atan2(n1.dot(&n2)))
}

fn plane_normals(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let n1 = a.cross(b);
    if n1.norm() <= DEGENERACY_EPS {
        return Err(MercatError::DegenerateTriangle(
            "first neighbour coincides with or opposes the vertex",
        ));
    }
    let n2 = a.cross(c);
    if n2.norm() <= DEGENERACY_EPS {
        return Err(MercatError::DegenerateTriangle(
            "second neighbour coincides with or opposes the vertex",
        ));
    }
    Ok((n1, n2))
}

/// Side-to-angle formula: the angle opposite side `a` in a spherical triangle
/// with sides `a`, `b`, `c` (all in radians).
pub fn spherical_law_of_cosines(a: f64, b: f64, c: f64) -> Result<f64> {
    let denom = b.sin() * c.sin();
    if denom < DEGENERACY_EPS {
        return Err(MercatError::DegenerateTriangle(
            "adjacent side has zero or pi length",
        ));
    }
    let cos_alpha = (a.cos() - b.cos() * c.cos()) / denom;
    Ok(cos_alpha.clamp(-1.0, 1.0).acos())
}

/// Rotation `R_alpha * R_beta`: first about the z axis by `beta`, then about
/// the y axis by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    pub alpha: f64,
    pub beta: f64,
    pub matrix: Matrix3<f64>,
}

impl Rotation3 {
    pub fn new(alpha: f64, beta: f64) -> Self {
        let (sa, ca) = alpha.sin_cos();
        let (sb, cb) = beta.sin_cos();
        #[rustfmt::skip]
        let r_alpha = Matrix3::new(
            ca, 0.0, -sa,
            0.0, 1.0, 0.0,
            sa, 0.0, ca,
        );
        #[rustfmt::skip]
        let r_beta = Matrix3::new(
            cb, -sb, 0.0,
            sb, cb, 0.0,
            0.0, 0.0, 1.0,
        );
        Self {
            alpha,
            beta,
            matrix: r_alpha * r_beta,
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.matrix * v
    }
}

pub fn apply_rotation(e: &SphereEmbedding, r: &Rotation3) -> SphereEmbedding {
    apply_matrix(e, &r.matrix)
}

/// Applies an arbitrary rotation matrix to every point (as a column vector).
pub fn apply_matrix(e: &SphereEmbedding, m: &Matrix3<f64>) -> SphereEmbedding {
    SphereEmbedding {
        points: e
            .points
            .iter()
            .map(|p| SpherePoint::from_vector(&(m * p.to_unit_vector())))
            .collect(),
    }
}

/// Sum over points of the squared latitude `(|arccos z - pi/2|)^2` after
/// rotating by `r`.
pub fn equator_penalty(vectors: &[Vector3<f64>], r: &Rotation3) -> f64 {
    vectors
        .iter()
        .map(|v| {
            let z = r.rotate(v).z.clamp(-1.0, 1.0);
            let lat = z.acos() - FRAC_PI_2;
            lat * lat
        })
        .sum()
}

/// Grid values of the search: `alpha` over `[-pi/2, pi/2]` and `beta` over
/// `[0, pi]`, both in steps of `pi / granularity`.
pub fn rotation_grid(granularity: usize) -> impl Iterator<Item = (f64, f64)> {
    let g = granularity.max(1);
    (0..=g).flat_map(move |i| {
        // (2i - g) pi / 2g keeps the centre value exactly zero
        let alpha = (2.0 * i as f64 - g as f64) * PI / (2.0 * g as f64);
        (0..=g).map(move |j| (alpha, j as f64 * PI / g as f64))
    })
}

/// Grid search for the rotation that pulls the embedding closest to the
/// equator. Ties resolve to the lexicographically smallest `(alpha, beta)`.
pub fn equator_rotation_search(e: &SphereEmbedding, granularity: usize) -> Rotation3 {
    let vectors = e.unit_vectors();
    let mut best = Rotation3::identity();
    let mut best_penalty = f64::INFINITY;
    for (alpha, beta) in rotation_grid(granularity) {
        let r = Rotation3::new(alpha, beta);
        let penalty = equator_penalty(&vectors, &r);
        if penalty < best_penalty {
            best_penalty = penalty;
            best = r;
        }
    }
    best
}

/// Mercator coordinates `(theta, ln tan(pi/4 + lat/2))` with latitude
/// `pi/2 - phi` clamped to `+-lat_clamp`.
pub fn mercator_project(e: &SphereEmbedding, lat_clamp: f64) -> Vec<(f64, f64)> {
    let clamp = lat_clamp.abs().min(FRAC_PI_2 - 1e-9);
    e.points
        .iter()
        .map(|p| {
            let lat = (FRAC_PI_2 - p.phi).clamp(-clamp, clamp);
            (p.theta, (FRAC_PI_4 + lat / 2.0).tan().ln())
        })
        .collect()
}
