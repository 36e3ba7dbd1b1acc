//! Surface models: the unit sphere and flat rectangular tori, with
//! distances, exponential/logarithm maps, orthonormal tangent frames and
//! parallel transport. Quadrature grids and spectral tables are built once
//! at model construction; all per-point operations are pure.

use crate::error::GeometryError;
use crate::linalg::Vec3;
use crate::quadrature::Quadrature;
use crate::scalar::{r64, Real};
use crate::spectral::SpectralBasis;

/// Distance below which two points are treated as coincident: past this,
/// log d has no double-precision meaning.
pub const COINCIDENT_GUARD: f64 = 1e-13;

/// Which surface a model describes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceKind<R> {
    UnitSphere,
    FlatTorus { a: R, b: R },
}

/// A point on a surface: unit 3-vector on the sphere, fundamental-domain
/// coordinates on the torus.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub enum SurfacePoint<R> {
    Sphere(Vec3<R>),
    Torus { x: R, y: R },
}

/// A tangent vector at some base point: ambient 3-vector orthogonal to the
/// base point on the sphere, plane vector on the torus.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub enum TangentVec<R> {
    Sphere(Vec3<R>),
    Torus { x: R, y: R },
}

impl<R: Real> TangentVec<R> {
    pub fn zero_like(p: &SurfacePoint<R>) -> Self {
        match p {
            SurfacePoint::Sphere(_) => TangentVec::Sphere(Vec3::zero()),
            SurfacePoint::Torus { .. } => TangentVec::Torus {
                x: R::zero(),
                y: R::zero(),
            },
        }
    }

    pub fn norm(&self) -> R {
        match self {
            TangentVec::Sphere(v) => v.norm(),
            TangentVec::Torus { x, y } => (*x * *x + *y * *y).sqrt(),
        }
    }

    pub fn dot(&self, other: &Self) -> R {
        match (self, other) {
            (TangentVec::Sphere(u), TangentVec::Sphere(v)) => u.dot(*v),
            (TangentVec::Torus { x: ux, y: uy }, TangentVec::Torus { x: vx, y: vy }) => {
                *ux * *vx + *uy * *vy
            }
            _ => panic!("tangent vectors live on different surfaces"),
        }
    }

    pub fn scale(&self, s: R) -> Self {
        match self {
            TangentVec::Sphere(v) => TangentVec::Sphere(v.scale(s)),
            TangentVec::Torus { x, y } => TangentVec::Torus { x: *x * s, y: *y * s },
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (TangentVec::Sphere(u), TangentVec::Sphere(v)) => TangentVec::Sphere(u.add(*v)),
            (TangentVec::Torus { x: ux, y: uy }, TangentVec::Torus { x: vx, y: vy }) => {
                TangentVec::Torus {
                    x: *ux + *vx,
                    y: *uy + *vy,
                }
            }
            _ => panic!("tangent vectors live on different surfaces"),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-R::one()))
    }
}

/// Grid resolution and spectral truncation for a model.
#[derive(Clone, Copy, Debug)]
pub struct Resolution {
    /// Latitude rows (sphere) or x-samples (torus).
    pub n_u: usize,
    /// Longitude columns (sphere) or y-samples (torus).
    pub n_v: usize,
    /// Spectral truncation: max spherical-harmonic degree, or max Fourier
    /// index per axis on the torus.
    pub degree: usize,
}

impl Resolution {
    pub fn sphere_default() -> Self {
        Resolution {
            n_u: 128,
            n_v: 256,
            degree: 127,
        }
    }

    pub fn torus_default() -> Self {
        Resolution {
            n_u: 256,
            n_v: 256,
            degree: 127,
        }
    }

    /// One refinement step: double the grid (used by topology-stability and
    /// quadrature-convergence checks).
    pub fn refined(&self) -> Self {
        Resolution {
            n_u: self.n_u * 2,
            n_v: self.n_v * 2,
            degree: self.degree,
        }
    }
}

/// A closed surface with its precomputed quadrature and spectral tables.
pub struct SurfaceModel<R: Real> {
    kind: SurfaceKind<R>,
    resolution: Resolution,
    quadrature: Quadrature<R>,
    spectral: SpectralBasis<R>,
    green: crate::green::GreenTables<R>,
}

impl<R: Real> SurfaceModel<R> {
    pub fn unit_sphere(resolution: Resolution) -> Self {
        let kind = SurfaceKind::UnitSphere;
        let quadrature = Quadrature::build(&kind, &resolution);
        let spectral = SpectralBasis::build(&kind, &resolution);
        let green = crate::green::GreenTables::build(&kind);
        SurfaceModel {
            kind,
            resolution,
            quadrature,
            spectral,
            green,
        }
    }

    pub fn flat_torus(a: R, b: R, resolution: Resolution) -> Self {
        assert!(a > R::zero() && b > R::zero(), "torus periods must be positive");
        let kind = SurfaceKind::FlatTorus { a, b };
        let quadrature = Quadrature::build(&kind, &resolution);
        let spectral = SpectralBasis::build(&kind, &resolution);
        let green = crate::green::GreenTables::build(&kind);
        SurfaceModel {
            kind,
            resolution,
            quadrature,
            spectral,
            green,
        }
    }

    pub fn unit_sphere_default() -> Self {
        Self::unit_sphere(Resolution::sphere_default())
    }

    pub fn flat_torus_default(a: R, b: R) -> Self {
        Self::flat_torus(a, b, Resolution::torus_default())
    }

    pub fn kind(&self) -> SurfaceKind<R> {
        self.kind
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn quadrature(&self) -> &Quadrature<R> {
        &self.quadrature
    }

    pub fn spectral(&self) -> &SpectralBasis<R> {
        &self.spectral
    }

    pub(crate) fn green_tables(&self) -> &crate::green::GreenTables<R> {
        &self.green
    }

    /// Same surface, refined grid (spectral truncation kept).
    pub fn refined(&self) -> Self {
        match self.kind {
            SurfaceKind::UnitSphere => Self::unit_sphere(self.resolution.refined()),
            SurfaceKind::FlatTorus { a, b } => Self::flat_torus(a, b, self.resolution.refined()),
        }
    }

    pub fn area(&self) -> R {
        match self.kind {
            SurfaceKind::UnitSphere => R::four_pi(),
            SurfaceKind::FlatTorus { a, b } => a * b,
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        match self.kind {
            SurfaceKind::UnitSphere => 2,
            SurfaceKind::FlatTorus { .. } => 0,
        }
    }

    /// Constant geodesic curvature of the background metric: 1 on the unit
    /// sphere, 0 on flat tori.
    pub fn kappa(&self) -> R {
        match self.kind {
            SurfaceKind::UnitSphere => R::one(),
            SurfaceKind::FlatTorus { .. } => R::zero(),
        }
    }

    pub fn injectivity_radius(&self) -> R {
        match self.kind {
            SurfaceKind::UnitSphere => R::pi(),
            SurfaceKind::FlatTorus { a, b } => a.min(b) * r64(0.5),
        }
    }

    /// Construct a point from chart coordinates: (longitude, colatitude) in
    /// radians on the sphere, fundamental-domain (x, y) on the torus.
    pub fn point_from_chart(&self, u: R, v: R) -> SurfacePoint<R> {
        match self.kind {
            SurfaceKind::UnitSphere => {
                let (lon, colat) = (u, v);
                let st = colat.sin();
                SurfacePoint::Sphere(Vec3([st * lon.cos(), st * lon.sin(), colat.cos()]))
            }
            SurfaceKind::FlatTorus { a, b } => SurfacePoint::Torus {
                x: wrap(u, a),
                y: wrap(v, b),
            },
        }
    }

    /// Chart coordinates of a point (inverse of [`Self::point_from_chart`]).
    pub fn chart_of_point(&self, p: &SurfacePoint<R>) -> (R, R) {
        match (self.kind, p) {
            (SurfaceKind::UnitSphere, SurfacePoint::Sphere(v)) => {
                let lon = v.0[1].atan2(v.0[0]);
                let lon = if lon < R::zero() { lon + R::two_pi() } else { lon };
                let colat = v.0[2].min(R::one()).max(-R::one()).acos();
                (lon, colat)
            }
            (SurfaceKind::FlatTorus { .. }, SurfacePoint::Torus { x, y }) => (*x, *y),
            _ => panic!("point does not belong to this surface model"),
        }
    }

    /// Normalise raw coordinates into a valid point: renormalises sphere
    /// vectors to unit length, reduces torus coordinates modulo the periods.
    pub fn normalize_point(&self, p: &SurfacePoint<R>) -> SurfacePoint<R> {
        match (self.kind, p) {
            (SurfaceKind::UnitSphere, SurfacePoint::Sphere(v)) => {
                SurfacePoint::Sphere(v.normalized())
            }
            (SurfaceKind::FlatTorus { a, b }, SurfacePoint::Torus { x, y }) => {
                SurfacePoint::Torus {
                    x: wrap(*x, a),
                    y: wrap(*y, b),
                }
            }
            _ => panic!("point does not belong to this surface model"),
        }
    }

    /// Geodesic distance.
    pub fn distance(&self, p: &SurfacePoint<R>, q: &SurfacePoint<R>) -> R {
        match (self.kind, p, q) {
            (SurfaceKind::UnitSphere, SurfacePoint::Sphere(u), SurfacePoint::Sphere(v)) => {
                let c = u.dot(*v).min(R::one()).max(-R::one());
                c.acos()
            }
            (
                SurfaceKind::FlatTorus { a, b },
                SurfacePoint::Torus { x: x1, y: y1 },
                SurfacePoint::Torus { x: x2, y: y2 },
            ) => {
                // Minimum over the 8 neighbouring lattice translates (and the
                // identity) of the Euclidean offset.
                let dx0 = wrap(*x1 - *x2, a);
                let dy0 = wrap(*y1 - *y2, b);
                let mut best = R::infinity();
                for i in [-1i32, 0, 1] {
                    for j in [-1i32, 0, 1] {
                        let dx = dx0 + r64::<R>(i as f64) * a;
                        let dy = dy0 + r64::<R>(j as f64) * b;
                        let d2 = dx * dx + dy * dy;
                        if d2 < best {
                            best = d2;
                        }
                    }
                }
                best.sqrt()
            }
            _ => panic!("points do not belong to this surface model"),
        }
    }

    /// Minimum-image offset q - p on the torus, components in [-a/2, a/2) x
    /// [-b/2, b/2).
    pub fn torus_offset(&self, p: &SurfacePoint<R>, q: &SurfacePoint<R>) -> (R, R) {
        match (self.kind, p, q) {
            (
                SurfaceKind::FlatTorus { a, b },
                SurfacePoint::Torus { x: x1, y: y1 },
                SurfacePoint::Torus { x: x2, y: y2 },
            ) => (min_image(*x2 - *x1, a), min_image(*y2 - *y1, b)),
            _ => panic!("torus_offset requires torus points"),
        }
    }

    /// Exponential map: follow the geodesic from `p` with initial velocity
    /// `v` for unit time.
    pub fn exp_map(
        &self,
        p: &SurfacePoint<R>,
        v: &TangentVec<R>,
    ) -> Result<SurfacePoint<R>, GeometryError> {
        let len = v.norm();
        let bound = self.injectivity_radius();
        if len >= bound {
            return Err(GeometryError::StepTooLarge {
                len: len.to_f64().unwrap_or(f64::NAN),
                bound: bound.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(match (self.kind, p, v) {
            (SurfaceKind::UnitSphere, SurfacePoint::Sphere(x), TangentVec::Sphere(w)) => {
                if len == R::zero() {
                    SurfacePoint::Sphere(*x)
                } else {
                    let dir = w.scale(len.recip());
                    SurfacePoint::Sphere(x.scale(len.cos()).add(dir.scale(len.sin())).normalized())
                }
            }
            (
                SurfaceKind::FlatTorus { a, b },
                SurfacePoint::Torus { x, y },
                TangentVec::Torus { x: vx, y: vy },
            ) => SurfacePoint::Torus {
                x: wrap(*x + *vx, a),
                y: wrap(*y + *vy, b),
            },
            _ => panic!("point/vector do not belong to this surface model"),
        })
    }

    /// Logarithm map: the tangent vector at `p` whose exponential is `q`.
    /// Fails when `q` is at or beyond the injectivity radius.
    pub fn log_map(
        &self,
        p: &SurfacePoint<R>,
        q: &SurfacePoint<R>,
    ) -> Result<TangentVec<R>, GeometryError> {
        let d = self.distance(p, q);
        let bound = self.injectivity_radius();
        if d >= bound - r64(1e-12) {
            return Err(GeometryError::StepTooLarge {
                len: d.to_f64().unwrap_or(f64::NAN),
                bound: bound.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(match (self.kind, p, q) {
            (SurfaceKind::UnitSphere, SurfacePoint::Sphere(x), SurfacePoint::Sphere(y)) => {
                if d < r64(1e-15) {
                    TangentVec::Sphere(Vec3::zero())
                } else {
                    // Tangential projection of y at x has length sin d;
                    // rescale to geodesic length d.
                    let u = y.sub(x.scale(x.dot(*y)));
                    TangentVec::Sphere(u.scale(d / u.norm()))
                }
            }
            (SurfaceKind::FlatTorus { .. }, _, _) => {
                let (dx, dy) = self.torus_offset(p, q);
                TangentVec::Torus { x: dx, y: dy }
            }
            _ => panic!("points do not belong to this surface model"),
        })
    }

    /// Orthonormal tangent frame at `p`, deterministic per point. On the
    /// sphere a two-chart atlas is used: the frame is built from the z-axis
    /// away from the poles and from the x-axis near them.
    pub fn frame(&self, p: &SurfacePoint<R>) -> [TangentVec<R>; 2] {
        match (self.kind, p) {
            (SurfaceKind::UnitSphere, SurfacePoint::Sphere(x)) => {
                let pole = Vec3([R::zero(), R::zero(), R::one()]);
                let alt = Vec3([R::one(), R::zero(), R::zero()]);
                let reference = if x.0[2].abs() <= r64(0.9) { pole } else { alt };
                let e1 = reference.cross(*x).normalized();
                let e2 = x.cross(e1);
                [TangentVec::Sphere(e1), TangentVec::Sphere(e2)]
            }
            (SurfaceKind::FlatTorus { .. }, SurfacePoint::Torus { .. }) => [
                TangentVec::Torus {
                    x: R::one(),
                    y: R::zero(),
                },
                TangentVec::Torus {
                    x: R::zero(),
                    y: R::one(),
                },
            ],
            _ => panic!("point does not belong to this surface model"),
        }
    }

    /// Parallel transport of `v` (tangent at `p`) to `q` along the
    /// minimizing geodesic.
    pub fn parallel_transport(
        &self,
        p: &SurfacePoint<R>,
        q: &SurfacePoint<R>,
        v: &TangentVec<R>,
    ) -> TangentVec<R> {
        match (self.kind, p, q, v) {
            (
                SurfaceKind::UnitSphere,
                SurfacePoint::Sphere(x),
                SurfacePoint::Sphere(y),
                TangentVec::Sphere(w),
            ) => {
                let c = x.dot(*y).min(R::one()).max(-R::one());
                let theta = c.acos();
                if theta < r64(1e-14) {
                    return TangentVec::Sphere(*w);
                }
                let u = y.sub(x.scale(c)).normalized(); // unit initial direction
                let v_par = w.dot(u);
                let end_dir = x.scale(-theta.sin()).add(u.scale(theta.cos())); // geodesic tangent at q
                TangentVec::Sphere(w.sub(u.scale(v_par)).add(end_dir.scale(v_par)))
            }
            (SurfaceKind::FlatTorus { .. }, _, _, TangentVec::Torus { x, y }) => {
                TangentVec::Torus { x: *x, y: *y }
            }
            _ => panic!("transport arguments do not belong to this surface model"),
        }
    }
}

/// Reduce a coordinate into [0, period).
pub fn wrap<R: Real>(x: R, period: R) -> R {
    let y = x - period * (x / period).floor();
    // Guard the boundary case where rounding puts y exactly at the period.
    if y >= period {
        y - period
    } else {
        y
    }
}

/// Reduce an offset into [-period/2, period/2).
pub fn min_image<R: Real>(dx: R, period: R) -> R {
    dx - period * (dx / period + r64(0.5)).floor()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> SurfaceModel<f64> {
        SurfaceModel::unit_sphere(Resolution {
            n_u: 16,
            n_v: 32,
            degree: 15,
        })
    }

    fn torus_unit() -> SurfaceModel<f64> {
        SurfaceModel::flat_torus(
            1.0,
            1.0,
            Resolution {
                n_u: 32,
                n_v: 32,
                degree: 15,
            },
        )
    }

    #[test]
    fn antipodal_distance_is_pi() {
        let s = sphere();
        let n = SurfacePoint::Sphere(Vec3([0.0, 0.0, 1.0]));
        let sp = SurfacePoint::Sphere(Vec3([0.0, 0.0, -1.0]));
        assert!((s.distance(&n, &sp) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(s.distance(&n, &n), 0.0);
    }

    #[test]
    fn torus_wraparound_distance() {
        let t = torus_unit();
        let p = SurfacePoint::Torus { x: 0.1, y: 0.1 };
        let q = SurfacePoint::Torus { x: 0.9, y: 0.9 };
        // Brute-force oracle over a 5x5 block of lattice translates.
        let mut best = f64::INFINITY;
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                let dx = 0.9 - 0.1 + i as f64;
                let dy = 0.9 - 0.1 + j as f64;
                best = best.min((dx * dx + dy * dy).sqrt());
            }
        }
        let d = t.distance(&p, &q);
        assert!((d - best).abs() < 1e-15);
        assert!((d - 0.08f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_symmetry_property() {
        let t = torus_unit();
        let s = sphere();
        let cases = [
            (0.13, 0.77, 0.52, 0.08),
            (0.99, 0.01, 0.45, 0.97),
            (0.3, 0.3, 0.3, 0.3),
        ];
        for (x1, y1, x2, y2) in cases {
            let p = SurfacePoint::Torus { x: x1, y: y1 };
            let q = SurfacePoint::Torus { x: x2, y: y2 };
            assert!((t.distance(&p, &q) - t.distance(&q, &p)).abs() < 1e-15);
            let sp = s.point_from_chart(x1 * 6.0, y1 * 3.0);
            let sq = s.point_from_chart(x2 * 6.0, y2 * 3.0);
            assert!((s.distance(&sp, &sq) - s.distance(&sq, &sp)).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_log_roundtrip_sphere() {
        let s = sphere();
        let p = s.point_from_chart(1.1, 0.7);
        let [e1, e2] = s.frame(&p);
        for (a, b) in [(0.3, -0.2), (0.0, 0.0), (1.2, 0.4), (-0.9, 0.9)] {
            let v = e1.scale(a).add(&e2.scale(b));
            let q = s.exp_map(&p, &v).unwrap();
            assert!((s.distance(&p, &q) - v.norm()).abs() < 1e-12, "unit-speed geodesic");
            let back = s.log_map(&p, &q).unwrap();
            assert!(back.sub(&v).norm() < 1e-10);
        }
    }

    #[test]
    fn exp_log_roundtrip_torus() {
        let t = torus_unit();
        let p = SurfacePoint::Torus { x: 0.95, y: 0.02 };
        let v = TangentVec::Torus { x: 0.2, y: -0.3 };
        let q = t.exp_map(&p, &v).unwrap();
        let back = t.log_map(&p, &q).unwrap();
        assert!(back.sub(&v).norm() < 1e-14);
    }

    #[test]
    fn oversized_step_rejected() {
        let s = sphere();
        let p = s.point_from_chart(0.0, 1.0);
        let [e1, _] = s.frame(&p);
        let v = e1.scale(3.2);
        assert!(matches!(
            s.exp_map(&p, &v),
            Err(GeometryError::StepTooLarge { .. })
        ));
        let t = torus_unit();
        let tp = SurfacePoint::Torus { x: 0.0, y: 0.0 };
        let tv = TangentVec::Torus { x: 0.6, y: 0.0 };
        assert!(t.exp_map(&tp, &tv).is_err());
    }

    #[test]
    fn frames_are_orthonormal_even_near_poles() {
        let s = sphere();
        for (lon, colat) in [(0.3, 1.2), (2.0, 0.01), (4.0, 3.13), (1.0, 1.57)] {
            let p = s.point_from_chart(lon, colat);
            let [e1, e2] = s.frame(&p);
            assert!((e1.norm() - 1.0).abs() < 1e-14);
            assert!((e2.norm() - 1.0).abs() < 1e-14);
            assert!(e1.dot(&e2).abs() < 1e-14);
            if let (SurfacePoint::Sphere(x), TangentVec::Sphere(v1), TangentVec::Sphere(v2)) =
                (&p, &e1, &e2)
            {
                assert!(x.dot(*v1).abs() < 1e-14);
                assert!(x.dot(*v2).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transport_preserves_norm_and_identity() {
        let s = sphere();
        let p = s.point_from_chart(0.4, 1.0);
        let q = s.point_from_chart(1.9, 2.2);
        let [e1, e2] = s.frame(&p);
        let v = e1.scale(0.37).add(&e2.scale(-1.2));
        let w = s.parallel_transport(&p, &q, &v);
        assert!((w.norm() - v.norm()).abs() < 1e-13);
        let back = s.parallel_transport(&q, &p, &w);
        assert!(back.sub(&v).norm() < 1e-12, "transport along the same geodesic inverts");
    }

    #[test]
    fn chart_roundtrip() {
        let s = sphere();
        let p = s.point_from_chart(5.9, 2.8);
        let (lon, colat) = s.chart_of_point(&p);
        let p2 = s.point_from_chart(lon, colat);
        assert!(s.distance(&p, &p2) < 1e-12);
    }
}
