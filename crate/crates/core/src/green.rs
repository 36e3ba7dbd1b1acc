//! Green's function of -Δ_g on the built-in surfaces, normalised to zero
//! mean: -Δ_g G(·,p) = δ_p - 1/|Σ|, ∫ G(·,p) dV = 0.
//!
//! Sphere: closed form G = -(1/2π) log(2 sin(d/2)) + c₀ with
//! c₀ = (2 log 2 - 1)/(4π) fixed by the zero-mean condition.
//!
//! Torus: Ewald splitting. A Gaussian screen of width σ turns the periodic
//! logarithmic kernel into a fast real-space image sum of E₁ plus a fast
//! Fourier tail:
//!
//!   G(r) = Σ_R (1/4π) E₁(|r-R|²/σ²)
//!        + Σ_{k≠0} e^{-σ²k²/4}/(|Σ| k²) cos(k·r)  -  σ²/(4|Σ|),
//!
//! with σ chosen so both truncation tails sit below 1e-12. The slow
//! reference [`torus_green_direct`] evaluates the same potential with a
//! large screen width and no Fourier part at all, so the two routes share
//! no truncation parameters.

use crate::error::GeometryError;
use crate::geometry::{min_image, SurfaceKind, SurfaceModel, SurfacePoint, TangentVec};
use crate::scalar::{euler_gamma, r64, Real};
use crate::special::exp_int_e1;

/// Regular-part constant on the unit sphere: h(p,p) = (2 log 2 - 1)/(4π).
pub fn sphere_c0<R: Real>() -> R {
    (r64::<R>(2.0) * r64::<R>(std::f64::consts::LN_2) - R::one()) / R::four_pi()
}

pub(crate) enum GreenTables<R> {
    Sphere,
    Torus(EwaldTables<R>),
}

impl<R: Real> GreenTables<R> {
    pub(crate) fn build(kind: &SurfaceKind<R>) -> Self {
        match *kind {
            SurfaceKind::UnitSphere => GreenTables::Sphere,
            SurfaceKind::FlatTorus { a, b } => GreenTables::Torus(EwaldTables::build(a, b)),
        }
    }
}

pub(crate) struct EwaldTables<R> {
    a: R,
    b: R,
    sigma: R,
    /// Real-space image index ranges per axis.
    img_x: i32,
    img_y: i32,
    /// Squared real-space cutoff (arguments of E₁ beyond this are dropped).
    r2_cut: R,
    /// (kx, ky, weight) triples; weight already includes the symmetry factor
    /// two for the half-spectrum enumeration.
    kterms: Vec<(R, R, R)>,
    /// -σ²/(4|Σ|), the zero-mean correction.
    const_term: R,
    /// Diagonal regular part h(p,p) (translation invariant).
    diag: R,
}

impl<R: Real> EwaldTables<R> {
    fn build(a: R, b: R) -> Self {
        let sigma = a.min(b) / r64(4.5);
        // E₁(36) ≈ 4e-18: real-space tail below 1e-16.
        let r_cut = sigma * r64(6.0);
        let r2_cut = r_cut * r_cut;
        let img_x = ((r_cut / a + r64(0.5)).to_f64().unwrap()).ceil() as i32;
        let img_y = ((r_cut / b + r64(0.5)).to_f64().unwrap()).ceil() as i32;
        // exp(-σ²k²/4) ≤ 1e-16 once σ|k|/2 ≥ 6.1.
        let k_cut = r64::<R>(12.2) / sigma;
        let area = a * b;
        let mx = ((k_cut * a / R::two_pi()).to_f64().unwrap()).ceil() as i32;
        let my = ((k_cut * b / R::two_pi()).to_f64().unwrap()).ceil() as i32;
        let mut kterms = Vec::new();
        for m in 0..=mx {
            let n_lo = if m == 0 { 1 } else { -my };
            for n in n_lo..=my {
                let kx = R::two_pi() * r64::<R>(m as f64) / a;
                let ky = R::two_pi() * r64::<R>(n as f64) / b;
                let k2 = kx * kx + ky * ky;
                if k2 > k_cut * k_cut || k2 == R::zero() {
                    continue;
                }
                let w = (-(sigma * sigma) * k2 * r64(0.25)).exp() / (area * k2);
                // m ranges over the half spectrum; cos pairs double.
                kterms.push((kx, ky, w * r64(2.0)));
            }
        }
        let const_term = -(sigma * sigma) / (r64::<R>(4.0) * area);
        // Diagonal: the R = 0 term of the image sum degenerates into
        // (1/2π) log σ - γ/(4π); the rest is evaluated at r = 0.
        let mut diag = sigma.ln() / R::two_pi() - euler_gamma::<R>() / R::four_pi();
        for i in -img_x..=img_x {
            for j in -img_y..=img_y {
                if i == 0 && j == 0 {
                    continue;
                }
                let rx = r64::<R>(i as f64) * a;
                let ry = r64::<R>(j as f64) * b;
                let s2 = rx * rx + ry * ry;
                if s2 <= r2_cut {
                    diag += exp_int_e1(s2 / (sigma * sigma)) / R::four_pi();
                }
            }
        }
        for &(_, _, w) in &kterms {
            diag += w;
        }
        diag += const_term;
        EwaldTables {
            a,
            b,
            sigma,
            img_x,
            img_y,
            r2_cut,
            kterms,
            const_term,
            diag,
        }
    }

    /// G evaluated at a minimum-image offset.
    fn value(&self, dx: R, dy: R) -> R {
        let s2sigma = self.sigma * self.sigma;
        let mut acc = self.const_term;
        for i in -self.img_x..=self.img_x {
            for j in -self.img_y..=self.img_y {
                let rx = dx - r64::<R>(i as f64) * self.a;
                let ry = dy - r64::<R>(j as f64) * self.b;
                let s2 = rx * rx + ry * ry;
                if s2 <= self.r2_cut && s2 > R::zero() {
                    acc += exp_int_e1(s2 / s2sigma) / R::four_pi();
                }
            }
        }
        for &(kx, ky, w) in &self.kterms {
            acc += w * (kx * dx + ky * dy).cos();
        }
        acc
    }

    /// ∂G/∂(dx), ∂G/∂(dy) at a minimum-image offset.
    fn gradient(&self, dx: R, dy: R) -> (R, R) {
        let s2sigma = self.sigma * self.sigma;
        let mut gx = R::zero();
        let mut gy = R::zero();
        for i in -self.img_x..=self.img_x {
            for j in -self.img_y..=self.img_y {
                let rx = dx - r64::<R>(i as f64) * self.a;
                let ry = dy - r64::<R>(j as f64) * self.b;
                let s2 = rx * rx + ry * ry;
                if s2 <= self.r2_cut && s2 > R::zero() {
                    // d/dr of (1/4π)E₁(r²/σ²) = -(1/2π) e^{-r²/σ²} / r.
                    let f = -(-(s2 / s2sigma)).exp() / (R::two_pi() * s2);
                    gx += f * rx;
                    gy += f * ry;
                }
            }
        }
        for &(kx, ky, w) in &self.kterms {
            let s = (kx * dx + ky * dy).sin();
            gx -= w * s * kx;
            gy -= w * s * ky;
        }
        (gx, gy)
    }
}

/// Slow validation reference for the torus Green's function: the same
/// screened potential with screen width 2·max(a,b) — wide enough that the
/// entire Fourier tail is below 1e-16 and can be dropped — summed directly
/// over all lattice translates within `cutoff_periods` periods.
pub fn torus_green_direct<R: Real>(a: R, b: R, dx: R, dy: R, cutoff_periods: i32) -> R {
    let sigma = a.max(b) * r64(2.0);
    let s2sigma = sigma * sigma;
    let dx = min_image(dx, a);
    let dy = min_image(dy, b);
    let mut acc = -(sigma * sigma) / (r64::<R>(4.0) * a * b);
    for i in -cutoff_periods..=cutoff_periods {
        for j in -cutoff_periods..=cutoff_periods {
            let rx = dx - r64::<R>(i as f64) * a;
            let ry = dy - r64::<R>(j as f64) * b;
            let s2 = rx * rx + ry * ry;
            if s2 > R::zero() {
                let z = s2 / s2sigma;
                if z < r64(700.0) {
                    acc += exp_int_e1(z) / R::four_pi();
                }
            }
        }
    }
    acc
}

impl<R: Real> SurfaceModel<R> {
    fn coincident_check(&self, x: &SurfacePoint<R>, p: &SurfacePoint<R>) -> Result<R, GeometryError> {
        let d = self.distance(x, p);
        let guard = r64::<R>(crate::geometry::COINCIDENT_GUARD);
        if d < guard {
            return Err(GeometryError::CoincidentPoints {
                dist: d.to_f64().unwrap_or(f64::NAN),
                guard: crate::geometry::COINCIDENT_GUARD,
            });
        }
        Ok(d)
    }

    /// G(x, p), the zero-mean Green's function.
    pub fn green(&self, x: &SurfacePoint<R>, p: &SurfacePoint<R>) -> Result<R, GeometryError> {
        let d = self.coincident_check(x, p)?;
        Ok(match self.green_tables() {
            GreenTables::Sphere => {
                -(r64::<R>(2.0) * (d * r64(0.5)).sin()).ln() / R::two_pi() + sphere_c0::<R>()
            }
            GreenTables::Torus(tables) => {
                let (dx, dy) = self.torus_offset(p, x);
                tables.value(dx, dy)
            }
        })
    }

    /// Regular part h(x, p) = G(x,p) - (1/2π) log(1/d), continuously
    /// extended across the diagonal.
    pub fn green_regular(&self, x: &SurfacePoint<R>, p: &SurfacePoint<R>) -> R {
        let d = self.distance(x, p);
        match self.green_tables() {
            GreenTables::Sphere => {
                if d < r64(1e-4) {
                    // Series of -(1/2π) log(2 sin(d/2)/d) to avoid cancellation.
                    sphere_c0::<R>()
                        + (d * d / r64(24.0) + d * d * d * d / r64(2880.0)) / R::two_pi()
                } else {
                    -((r64::<R>(2.0) * (d * r64(0.5)).sin() / d).ln()) / R::two_pi()
                        + sphere_c0::<R>()
                }
            }
            GreenTables::Torus(tables) => {
                if d < r64(1e-9) {
                    // h is C¹; below this the closed-form diagonal is exact
                    // to machine precision.
                    tables.diag
                } else {
                    let (dx, dy) = self.torus_offset(p, x);
                    tables.value(dx, dy) + d.ln() / R::two_pi()
                }
            }
        }
    }

    /// h(p, p), constant on both built-in surfaces.
    pub fn green_regular_diag(&self) -> R {
        match self.green_tables() {
            GreenTables::Sphere => sphere_c0::<R>(),
            GreenTables::Torus(tables) => tables.diag,
        }
    }

    /// Riemannian gradient of G(·, p) at x.
    pub fn grad_green(
        &self,
        x: &SurfacePoint<R>,
        p: &SurfacePoint<R>,
    ) -> Result<TangentVec<R>, GeometryError> {
        self.coincident_check(x, p)?;
        Ok(match (self.green_tables(), x, p) {
            (GreenTables::Sphere, SurfacePoint::Sphere(xv), SurfacePoint::Sphere(pv)) => {
                // ∇_x G = (1/4π) (p - (x·p)x) / (1 - x·p).
                let c = xv.dot(*pv);
                let tangential = pv.sub(xv.scale(c));
                TangentVec::Sphere(tangential.scale((R::four_pi() * (R::one() - c)).recip()))
            }
            (GreenTables::Torus(tables), _, _) => {
                let (dx, dy) = self.torus_offset(p, x);
                let (gx, gy) = tables.gradient(dx, dy);
                TangentVec::Torus { x: gx, y: gy }
            }
            _ => unreachable!("tables always match the surface kind"),
        })
    }
}
