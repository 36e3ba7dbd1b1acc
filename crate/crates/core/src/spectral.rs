//! Spectral machinery: fully-normalised spherical harmonics on the sphere,
//! Fourier modes on the torus. Provides analysis/synthesis between grid
//! samples and coefficients, pointwise evaluation with gradients and
//! Laplacians, and the zero-mean Poisson solver for -Δ_g u = f.

use num_complex::Complex;

use crate::error::SpectralError;
use crate::geometry::{Resolution, SurfaceKind, SurfaceModel, SurfacePoint, TangentVec};
use crate::linalg::Vec3;
use crate::scalar::{r64, rus, Real};

/// Spectral tables for one surface model.
pub enum SpectralBasis<R> {
    Sphere(SphereBasis<R>),
    Torus(TorusBasis<R>),
}

impl<R: Real> SpectralBasis<R> {
    pub(crate) fn build(kind: &SurfaceKind<R>, res: &Resolution) -> Self {
        match *kind {
            SurfaceKind::UnitSphere => SpectralBasis::Sphere(SphereBasis::build(res)),
            SurfaceKind::FlatTorus { a, b } => SpectralBasis::Torus(TorusBasis::build(a, b, res)),
        }
    }
}

/// Coefficients of a field in the model's basis.
#[derive(Clone, Debug)]
pub enum Coeffs<R> {
    /// Packed real spherical-harmonic coefficients.
    Sphere { c: Vec<R>, s: Vec<R>, lmax: usize },
    /// Full complex Fourier grid, row-major over (kx, ky).
    Torus(Vec<Complex<R>>),
}

/// A scalar field known by its grid samples and spectral coefficients.
#[derive(Clone, Debug)]
pub struct GridField<R> {
    pub samples: Vec<R>,
    pub coeffs: Coeffs<R>,
}

// ---------------------------------------------------------------------------
// Sphere basis
// ---------------------------------------------------------------------------

/// Packed index over (m, l) pairs with 0 ≤ m ≤ l ≤ lmax: all l for m = 0,
/// then all l for m = 1, ...
#[inline]
fn pack(lmax: usize, m: usize, l: usize) -> usize {
    debug_assert!(m <= l && l <= lmax);
    m * (lmax + 1) - m * (m + 1) / 2 + m + (l - m)
}

#[inline]
fn packed_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

pub struct SphereBasis<R> {
    pub lmax: usize,
    pub n_lat: usize,
    pub n_lon: usize,
    thetas: Vec<R>,
    row_weight: Vec<R>,
    /// P̄_lm(θ_i), packed per row.
    plm: Vec<R>,
    /// ∂_θ P̄_lm(θ_i), packed per row.
    dplm: Vec<R>,
    /// cos(m φ_j), sin(m φ_j) tables, row-major over m.
    cos_tab: Vec<R>,
    sin_tab: Vec<R>,
}

/// Fully-normalised associated Legendre values (and θ-derivatives) at one
/// colatitude, for all 0 ≤ m ≤ l ≤ lmax: ∫_{S²} (P̄_lm trig(mφ))² scaled so
/// the real harmonics below are orthonormal.
fn legendre_packed<R: Real>(lmax: usize, theta: R, out_p: &mut [R], out_dp: &mut [R]) {
    let (st, ct) = (theta.sin(), theta.cos());
    let mut pmm = r64::<R>(1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    let mut dpmm = R::zero();
    for m in 0..=lmax {
        let base = pack(lmax, m, m);
        out_p[base] = pmm;
        out_dp[base] = dpmm;
        if m + 1 <= lmax {
            // P̄_{m+1,m} = sqrt(2m+3) cosθ P̄_mm
            let f = rus::<R>(2 * m + 3).sqrt();
            let p1 = f * ct * pmm;
            let dp1 = f * (-st * pmm + ct * dpmm);
            out_p[base + 1] = p1;
            out_dp[base + 1] = dp1;
            let mut pl2 = pmm;
            let mut dpl2 = dpmm;
            let mut pl1 = p1;
            let mut dpl1 = dp1;
            for l in (m + 2)..=lmax {
                let lf = rus::<R>(l);
                let mf = rus::<R>(m);
                let a = ((r64::<R>(4.0) * lf * lf - R::one()) / (lf * lf - mf * mf)).sqrt();
                let lm1 = lf - R::one();
                let b = (((lm1 * lm1) - mf * mf) / (r64::<R>(4.0) * lm1 * lm1 - R::one())).sqrt();
                let p = a * (ct * pl1 - b * pl2);
                let dp = a * (-st * pl1 + ct * dpl1 - b * dpl2);
                out_p[base + (l - m)] = p;
                out_dp[base + (l - m)] = dp;
                pl2 = pl1;
                dpl2 = dpl1;
                pl1 = p;
                dpl1 = dp;
            }
        }
        if m < lmax {
            // P̄_{m+1,m+1} = sqrt((2m+3)/(2m+2)) sinθ P̄_mm
            let f = (rus::<R>(2 * m + 3) / rus::<R>(2 * m + 2)).sqrt();
            let new_p = f * st * pmm;
            dpmm = f * (ct * pmm + st * dpmm);
            pmm = new_p;
        }
    }
}

impl<R: Real> SphereBasis<R> {
    fn build(res: &Resolution) -> Self {
        assert!(res.degree < res.n_u, "spectral degree must stay below the latitude count");
        assert!(
            2 * res.degree < res.n_v,
            "spectral degree must stay below the longitude Nyquist limit"
        );
        let lmax = res.degree;
        let (t, w) = crate::special::gauss_legendre::<R>(res.n_u);
        let mut thetas = Vec::with_capacity(res.n_u);
        let mut row_weight = Vec::with_capacity(res.n_u);
        for i in (0..res.n_u).rev() {
            thetas.push(t[i].min(R::one()).max(-R::one()).acos());
            row_weight.push(w[i]);
        }
        let len = packed_len(lmax);
        let mut plm = vec![R::zero(); res.n_u * len];
        let mut dplm = vec![R::zero(); res.n_u * len];
        for (i, &theta) in thetas.iter().enumerate() {
            legendre_packed(
                lmax,
                theta,
                &mut plm[i * len..(i + 1) * len],
                &mut dplm[i * len..(i + 1) * len],
            );
        }
        let mut cos_tab = vec![R::zero(); (lmax + 1) * res.n_v];
        let mut sin_tab = vec![R::zero(); (lmax + 1) * res.n_v];
        for m in 0..=lmax {
            for j in 0..res.n_v {
                let ang = rus::<R>(m) * R::two_pi() * rus::<R>(j) / rus::<R>(res.n_v);
                cos_tab[m * res.n_v + j] = ang.cos();
                sin_tab[m * res.n_v + j] = ang.sin();
            }
        }
        SphereBasis {
            lmax,
            n_lat: res.n_u,
            n_lon: res.n_v,
            thetas,
            row_weight,
            plm,
            dplm,
            cos_tab,
            sin_tab,
        }
    }

    fn analyze(&self, samples: &[R]) -> (Vec<R>, Vec<R>) {
        assert_eq!(samples.len(), self.n_lat * self.n_lon);
        let len = packed_len(self.lmax);
        let dphi = R::two_pi() / rus(self.n_lon);
        let sqrt2 = r64::<R>(2.0).sqrt();
        let mut c = vec![R::zero(); len];
        let mut s = vec![R::zero(); len];
        // Longitude transform per row, then Legendre transform per order.
        let mut fc = vec![R::zero(); self.n_lat * (self.lmax + 1)];
        let mut fs = vec![R::zero(); self.n_lat * (self.lmax + 1)];
        for i in 0..self.n_lat {
            let row = &samples[i * self.n_lon..(i + 1) * self.n_lon];
            for m in 0..=self.lmax {
                let ct = &self.cos_tab[m * self.n_lon..(m + 1) * self.n_lon];
                let st = &self.sin_tab[m * self.n_lon..(m + 1) * self.n_lon];
                let mut ac = R::zero();
                let mut as_ = R::zero();
                for j in 0..self.n_lon {
                    ac += row[j] * ct[j];
                    as_ += row[j] * st[j];
                }
                fc[i * (self.lmax + 1) + m] = ac * dphi;
                fs[i * (self.lmax + 1) + m] = as_ * dphi;
            }
        }
        for m in 0..=self.lmax {
            let norm = if m == 0 { R::one() } else { sqrt2 };
            for l in m..=self.lmax {
                let idx = pack(self.lmax, m, l);
                let mut acc_c = R::zero();
                let mut acc_s = R::zero();
                for i in 0..self.n_lat {
                    let p = self.plm[i * len + idx];
                    let w = self.row_weight[i];
                    acc_c += w * p * fc[i * (self.lmax + 1) + m];
                    acc_s += w * p * fs[i * (self.lmax + 1) + m];
                }
                c[idx] = norm * acc_c;
                if m > 0 {
                    s[idx] = norm * acc_s;
                }
            }
        }
        (c, s)
    }

    fn synthesize_grid(&self, c: &[R], s: &[R]) -> Vec<R> {
        let len = packed_len(self.lmax);
        let sqrt2 = r64::<R>(2.0).sqrt();
        let mut out = vec![R::zero(); self.n_lat * self.n_lon];
        for i in 0..self.n_lat {
            // Per-order Legendre sums at this latitude.
            let mut am = vec![R::zero(); self.lmax + 1];
            let mut bm = vec![R::zero(); self.lmax + 1];
            for m in 0..=self.lmax {
                let norm = if m == 0 { R::one() } else { sqrt2 };
                let mut ac = R::zero();
                let mut bc = R::zero();
                for l in m..=self.lmax {
                    let idx = pack(self.lmax, m, l);
                    let p = self.plm[i * len + idx];
                    ac += c[idx] * p;
                    if m > 0 {
                        bc += s[idx] * p;
                    }
                }
                am[m] = norm * ac;
                bm[m] = norm * bc;
            }
            for j in 0..self.n_lon {
                let mut v = R::zero();
                for m in 0..=self.lmax {
                    v += am[m] * self.cos_tab[m * self.n_lon + j];
                    if m > 0 {
                        v += bm[m] * self.sin_tab[m * self.n_lon + j];
                    }
                }
                out[i * self.n_lon + j] = v;
            }
        }
        out
    }

    /// Value, gradient (ambient tangent 3-vector) and Laplacian at an
    /// arbitrary point from coefficients.
    fn eval_point(&self, c: &[R], s: &[R], lon: R, colat: R) -> (R, Vec3<R>, R) {
        let len = packed_len(self.lmax);
        let mut p = vec![R::zero(); len];
        let mut dp = vec![R::zero(); len];
        // Keep the evaluation off the exact poles so the e_φ frame below
        // stays defined; band-limited fields lose nothing measurable.
        let eps = r64::<R>(1e-9);
        let colat = colat.max(eps).min(R::pi() - eps);
        legendre_packed(self.lmax, colat, &mut p, &mut dp);
        let sqrt2 = r64::<R>(2.0).sqrt();
        let mut value = R::zero();
        let mut dtheta = R::zero();
        let mut dphi = R::zero();
        let mut lap = R::zero();
        for m in 0..=self.lmax {
            let norm = if m == 0 { R::one() } else { sqrt2 };
            let (cm, sm) = ((rus::<R>(m) * lon).cos(), (rus::<R>(m) * lon).sin());
            let mf = rus::<R>(m);
            for l in m..=self.lmax {
                let idx = pack(self.lmax, m, l);
                let lf = rus::<R>(l);
                let eig = lf * (lf + R::one());
                let (pc, pd) = (p[idx], dp[idx]);
                let trig = c[idx] * cm + if m > 0 { s[idx] * sm } else { R::zero() };
                let dtrig = -c[idx] * sm * mf + if m > 0 { s[idx] * cm * mf } else { R::zero() };
                value += norm * pc * trig;
                dtheta += norm * pd * trig;
                dphi += norm * pc * dtrig;
                lap -= eig * norm * pc * trig;
            }
        }
        let (st, ct) = (colat.sin(), colat.cos());
        let (cl, sl) = (lon.cos(), lon.sin());
        let e_theta = Vec3([ct * cl, ct * sl, -st]);
        let e_phi = Vec3([-sl, cl, R::zero()]);
        let grad = e_theta.scale(dtheta).add(e_phi.scale(dphi / st));
        (value, grad, lap)
    }
}

// ---------------------------------------------------------------------------
// Torus basis
// ---------------------------------------------------------------------------

pub struct TorusBasis<R> {
    pub nx: usize,
    pub ny: usize,
    pub a: R,
    pub b: R,
    /// Per-axis truncation: coefficients with |frequency| > kmax are zeroed.
    pub kmax: usize,
    /// Forward twiddles e^{-2πi jk/n} per axis.
    tw_x: Vec<Complex<R>>,
    tw_y: Vec<Complex<R>>,
}

impl<R: Real> TorusBasis<R> {
    fn build(a: R, b: R, res: &Resolution) -> Self {
        let kmax = res.degree.min(res.n_u / 2 - 1).min(res.n_v / 2 - 1);
        let tw = |n: usize| -> Vec<Complex<R>> {
            (0..n)
                .map(|k| {
                    let ang = -R::two_pi() * rus::<R>(k) / rus::<R>(n);
                    Complex::new(ang.cos(), ang.sin())
                })
                .collect()
        };
        TorusBasis {
            nx: res.n_u,
            ny: res.n_v,
            a,
            b,
            kmax,
            tw_x: tw(res.n_u),
            tw_y: tw(res.n_v),
        }
    }

    /// Signed frequency of row/column index.
    #[inline]
    fn freq(idx: usize, n: usize) -> i64 {
        if idx <= n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    fn wavevector(&self, kx: usize, ky: usize) -> (R, R) {
        let m = Self::freq(kx, self.nx);
        let n = Self::freq(ky, self.ny);
        (
            R::two_pi() * r64::<R>(m as f64) / self.a,
            R::two_pi() * r64::<R>(n as f64) / self.b,
        )
    }

    fn in_band(&self, kx: usize, ky: usize) -> bool {
        Self::freq(kx, self.nx).unsigned_abs() as usize <= self.kmax
            && Self::freq(ky, self.ny).unsigned_abs() as usize <= self.kmax
    }

    fn analyze(&self, samples: &[R]) -> Vec<Complex<R>> {
        assert_eq!(samples.len(), self.nx * self.ny);
        let (nx, ny) = (self.nx, self.ny);
        // DFT along y for each x-row.
        let mut stage = vec![Complex::new(R::zero(), R::zero()); nx * ny];
        for i in 0..nx {
            for ky in 0..ny {
                let mut acc = Complex::new(R::zero(), R::zero());
                for j in 0..ny {
                    let tw = self.tw_y[(ky * j) % ny];
                    acc = acc + tw.scale(samples[i * ny + j]);
                }
                stage[i * ny + ky] = acc;
            }
        }
        // DFT along x for each ky-column.
        let scale = (rus::<R>(nx) * rus::<R>(ny)).recip();
        let mut coeffs = vec![Complex::new(R::zero(), R::zero()); nx * ny];
        for ky in 0..ny {
            for kx in 0..nx {
                let mut acc = Complex::new(R::zero(), R::zero());
                for i in 0..nx {
                    acc = acc + self.tw_x[(kx * i) % nx] * stage[i * ny + ky];
                }
                coeffs[kx * ny + ky] = if self.in_band(kx, ky) {
                    acc.scale(scale)
                } else {
                    Complex::new(R::zero(), R::zero())
                };
            }
        }
        coeffs
    }

    fn synthesize_grid(&self, coeffs: &[Complex<R>]) -> Vec<R> {
        let (nx, ny) = (self.nx, self.ny);
        // Inverse DFT along x, then along y (conjugate twiddles).
        let mut stage = vec![Complex::new(R::zero(), R::zero()); nx * ny];
        for ky in 0..ny {
            for i in 0..nx {
                let mut acc = Complex::new(R::zero(), R::zero());
                for kx in 0..nx {
                    acc = acc + self.tw_x[(kx * i) % nx].conj() * coeffs[kx * ny + ky];
                }
                stage[i * ny + ky] = acc;
            }
        }
        let mut out = vec![R::zero(); nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                let mut acc = Complex::new(R::zero(), R::zero());
                for ky in 0..ny {
                    acc = acc + self.tw_y[(ky * j) % ny].conj() * stage[i * ny + ky];
                }
                out[i * ny + j] = acc.re;
            }
        }
        out
    }

    fn eval_point(&self, coeffs: &[Complex<R>], x: R, y: R) -> (R, R, R, R) {
        // Returns (value, d/dx, d/dy, laplacian).
        let mut value = R::zero();
        let mut dx = R::zero();
        let mut dy = R::zero();
        let mut lap = R::zero();
        // Phase tables per axis, band-limited.
        let phases = |n: usize, period: R, coord: R| -> Vec<Complex<R>> {
            (0..n)
                .map(|k| {
                    let m = r64::<R>(Self::freq(k, n) as f64);
                    let ang = R::two_pi() * m * coord / period;
                    Complex::new(ang.cos(), ang.sin())
                })
                .collect()
        };
        let px = phases(self.nx, self.a, x);
        let py = phases(self.ny, self.b, y);
        for kx in 0..self.nx {
            for ky in 0..self.ny {
                let cf = coeffs[kx * self.ny + ky];
                if cf.re == R::zero() && cf.im == R::zero() {
                    continue;
                }
                let (wx, wy) = self.wavevector(kx, ky);
                let e = px[kx] * py[ky];
                let term = cf * e;
                value += term.re;
                // d/dx multiplies by i wx.
                dx += -term.im * wx;
                dy += -term.im * wy;
                lap -= (wx * wx + wy * wy) * term.re;
            }
        }
        (value, dx, dy, lap)
    }
}

// ---------------------------------------------------------------------------
// GridField: the sampled representation of a scalar field
// ---------------------------------------------------------------------------

impl<R: Real> GridField<R> {
    pub fn from_samples(model: &SurfaceModel<R>, samples: Vec<R>) -> Self {
        let coeffs = match model.spectral() {
            SpectralBasis::Sphere(basis) => {
                let (c, s) = basis.analyze(&samples);
                Coeffs::Sphere {
                    c,
                    s,
                    lmax: basis.lmax,
                }
            }
            SpectralBasis::Torus(basis) => Coeffs::Torus(basis.analyze(&samples)),
        };
        GridField { samples, coeffs }
    }

    pub fn from_fn(model: &SurfaceModel<R>, f: impl Fn(&SurfacePoint<R>) -> R) -> Self {
        let samples: Vec<R> = model.quadrature().nodes.iter().map(|p| f(p)).collect();
        Self::from_samples(model, samples)
    }

    pub fn from_coeffs(model: &SurfaceModel<R>, coeffs: Coeffs<R>) -> Self {
        let samples = match (model.spectral(), &coeffs) {
            (SpectralBasis::Sphere(basis), Coeffs::Sphere { c, s, .. }) => {
                basis.synthesize_grid(c, s)
            }
            (SpectralBasis::Torus(basis), Coeffs::Torus(cf)) => basis.synthesize_grid(cf),
            _ => panic!("coefficient kind does not match the surface model"),
        };
        GridField { samples, coeffs }
    }

    pub fn zero(model: &SurfaceModel<R>) -> Self {
        let n = model.quadrature().len();
        let coeffs = match model.spectral() {
            SpectralBasis::Sphere(basis) => Coeffs::Sphere {
                c: vec![R::zero(); packed_len(basis.lmax)],
                s: vec![R::zero(); packed_len(basis.lmax)],
                lmax: basis.lmax,
            },
            SpectralBasis::Torus(basis) => {
                Coeffs::Torus(vec![Complex::new(R::zero(), R::zero()); basis.nx * basis.ny])
            }
        };
        GridField {
            samples: vec![R::zero(); n],
            coeffs,
        }
    }

    pub fn integral(&self, model: &SurfaceModel<R>) -> R {
        model.integrate_samples(&self.samples)
    }

    pub fn max_abs(&self) -> R {
        self.samples
            .iter()
            .fold(R::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn value_at(&self, model: &SurfaceModel<R>, p: &SurfacePoint<R>) -> R {
        self.eval_all(model, p).0
    }

    pub fn gradient_at(&self, model: &SurfaceModel<R>, p: &SurfacePoint<R>) -> TangentVec<R> {
        self.eval_all(model, p).1
    }

    pub fn laplacian_at(&self, model: &SurfaceModel<R>, p: &SurfacePoint<R>) -> R {
        self.eval_all(model, p).2
    }

    /// (value, gradient, laplacian) in one basis sweep.
    pub fn eval_all(
        &self,
        model: &SurfaceModel<R>,
        p: &SurfacePoint<R>,
    ) -> (R, TangentVec<R>, R) {
        match (model.spectral(), &self.coeffs, p) {
            (SpectralBasis::Sphere(basis), Coeffs::Sphere { c, s, .. }, _) => {
                let (lon, colat) = model.chart_of_point(p);
                let (v, g, lap) = basis.eval_point(c, s, lon, colat);
                // Project onto the tangent plane to remove rounding drift.
                if let SurfacePoint::Sphere(x) = p {
                    let g_t = g.sub(x.scale(g.dot(*x)));
                    (v, TangentVec::Sphere(g_t), lap)
                } else {
                    unreachable!()
                }
            }
            (SpectralBasis::Torus(basis), Coeffs::Torus(cf), SurfacePoint::Torus { x, y }) => {
                let (v, dx, dy, lap) = basis.eval_point(cf, *x, *y);
                (v, TangentVec::Torus { x: dx, y: dy }, lap)
            }
            _ => panic!("field/model mismatch"),
        }
    }

    /// Spectral Laplacian as a new grid field.
    pub fn laplacian_field(&self, model: &SurfaceModel<R>) -> GridField<R> {
        let coeffs = match &self.coeffs {
            Coeffs::Sphere { c, s, lmax } => {
                let mut c2 = c.clone();
                let mut s2 = s.clone();
                for m in 0..=*lmax {
                    for l in m..=*lmax {
                        let idx = pack(*lmax, m, l);
                        let eig = -rus::<R>(l) * (rus::<R>(l) + R::one());
                        c2[idx] *= eig;
                        s2[idx] *= eig;
                    }
                }
                Coeffs::Sphere {
                    c: c2,
                    s: s2,
                    lmax: *lmax,
                }
            }
            Coeffs::Torus(cf) => {
                if let SpectralBasis::Torus(basis) = model.spectral() {
                    let mut out = cf.clone();
                    for kx in 0..basis.nx {
                        for ky in 0..basis.ny {
                            let (wx, wy) = basis.wavevector(kx, ky);
                            out[kx * basis.ny + ky] =
                                out[kx * basis.ny + ky].scale(-(wx * wx + wy * wy));
                        }
                    }
                    Coeffs::Torus(out)
                } else {
                    panic!("field/model mismatch")
                }
            }
        };
        GridField::from_coeffs(model, coeffs)
    }

    /// Gradient magnitude sampled on the whole grid, via the derivative
    /// tables (sphere) or spectral derivative fields (torus).
    pub fn gradient_magnitude_grid(&self, model: &SurfaceModel<R>) -> Vec<R> {
        match (model.spectral(), &self.coeffs) {
            (SpectralBasis::Sphere(basis), Coeffs::Sphere { c, s, .. }) => {
                let len = packed_len(basis.lmax);
                let sqrt2 = r64::<R>(2.0).sqrt();
                let mut out = vec![R::zero(); basis.n_lat * basis.n_lon];
                for i in 0..basis.n_lat {
                    let st = basis.thetas[i].sin();
                    let mut am = vec![R::zero(); basis.lmax + 1];
                    let mut bm = vec![R::zero(); basis.lmax + 1];
                    let mut dam = vec![R::zero(); basis.lmax + 1];
                    let mut dbm = vec![R::zero(); basis.lmax + 1];
                    for m in 0..=basis.lmax {
                        let norm = if m == 0 { R::one() } else { sqrt2 };
                        for l in m..=basis.lmax {
                            let idx = pack(basis.lmax, m, l);
                            let p = basis.plm[i * len + idx];
                            let dp = basis.dplm[i * len + idx];
                            am[m] += norm * c[idx] * p;
                            dam[m] += norm * c[idx] * dp;
                            if m > 0 {
                                bm[m] += norm * s[idx] * p;
                                dbm[m] += norm * s[idx] * dp;
                            }
                        }
                    }
                    for j in 0..basis.n_lon {
                        let mut dtheta = R::zero();
                        let mut dphi = R::zero();
                        for m in 0..=basis.lmax {
                            let cj = basis.cos_tab[m * basis.n_lon + j];
                            let sj = basis.sin_tab[m * basis.n_lon + j];
                            dtheta += dam[m] * cj + dbm[m] * sj;
                            let mf = rus::<R>(m);
                            dphi += mf * (bm[m] * cj - am[m] * sj);
                        }
                        let gphi = dphi / st;
                        out[i * basis.n_lon + j] = (dtheta * dtheta + gphi * gphi).sqrt();
                    }
                }
                out
            }
            (SpectralBasis::Torus(basis), Coeffs::Torus(cf)) => {
                let mut dx_c = cf.clone();
                let mut dy_c = cf.clone();
                for kx in 0..basis.nx {
                    for ky in 0..basis.ny {
                        let (wx, wy) = basis.wavevector(kx, ky);
                        let idx = kx * basis.ny + ky;
                        let i_unit = Complex::new(R::zero(), R::one());
                        dx_c[idx] = cf[idx] * i_unit.scale(wx);
                        dy_c[idx] = cf[idx] * i_unit.scale(wy);
                    }
                }
                let gx = basis.synthesize_grid(&dx_c);
                let gy = basis.synthesize_grid(&dy_c);
                gx.iter()
                    .zip(&gy)
                    .map(|(&a, &b)| (a * a + b * b).sqrt())
                    .collect()
            }
            _ => panic!("field/model mismatch"),
        }
    }

    /// Squared H¹ seminorm ∫ |∇f|² dV from coefficients.
    pub fn grad_norm_sq(&self, model: &SurfaceModel<R>) -> R {
        match &self.coeffs {
            Coeffs::Sphere { c, s, lmax } => {
                let mut acc = R::zero();
                for m in 0..=*lmax {
                    for l in m..=*lmax {
                        let idx = pack(*lmax, m, l);
                        let eig = rus::<R>(l) * (rus::<R>(l) + R::one());
                        acc += eig * (c[idx] * c[idx] + s[idx] * s[idx]);
                    }
                }
                acc
            }
            Coeffs::Torus(cf) => {
                if let SpectralBasis::Torus(basis) = model.spectral() {
                    let area = basis.a * basis.b;
                    let mut acc = R::zero();
                    for kx in 0..basis.nx {
                        for ky in 0..basis.ny {
                            let (wx, wy) = basis.wavevector(kx, ky);
                            acc += (wx * wx + wy * wy) * cf[kx * basis.ny + ky].norm_sqr();
                        }
                    }
                    acc * area
                } else {
                    panic!("field/model mismatch")
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Poisson solver
// ---------------------------------------------------------------------------

/// Zero-mean solution of -Δ_g u = rhs in the Laplacian eigenbasis.
///
/// The compatibility precondition ∫ rhs = 0 (within 1e-8 · area) is
/// enforced; the mean mode is dropped and every other coefficient divided
/// by its eigenvalue.
pub fn solve_poisson<R: Real>(
    model: &SurfaceModel<R>,
    rhs: &GridField<R>,
) -> Result<GridField<R>, SpectralError> {
    let mean_tol = r64::<R>(1e-8) * model.area();
    let total = rhs.integral(model);
    if total.abs() > mean_tol {
        return Err(SpectralError::NonZeroMean {
            mean: (total / model.area()).to_f64().unwrap_or(f64::NAN),
            tol: (mean_tol / model.area()).to_f64().unwrap_or(f64::NAN),
        });
    }
    let coeffs = match &rhs.coeffs {
        Coeffs::Sphere { c, s, lmax } => {
            let mut c2 = c.clone();
            let mut s2 = s.clone();
            // Mean mode (l = 0) is dropped: the solution is zero-mean.
            c2[pack(*lmax, 0, 0)] = R::zero();
            for m in 0..=*lmax {
                for l in m.max(1)..=*lmax {
                    let idx = pack(*lmax, m, l);
                    let eig = rus::<R>(l) * (rus::<R>(l) + R::one());
                    c2[idx] /= eig;
                    s2[idx] /= eig;
                }
            }
            Coeffs::Sphere {
                c: c2,
                s: s2,
                lmax: *lmax,
            }
        }
        Coeffs::Torus(cf) => {
            if let SpectralBasis::Torus(basis) = model.spectral() {
                let mut out = cf.clone();
                for kx in 0..basis.nx {
                    for ky in 0..basis.ny {
                        let (wx, wy) = basis.wavevector(kx, ky);
                        let k2 = wx * wx + wy * wy;
                        let idx = kx * basis.ny + ky;
                        out[idx] = if k2 == R::zero() {
                            Complex::new(R::zero(), R::zero())
                        } else {
                            out[idx].scale(k2.recip())
                        };
                    }
                }
                Coeffs::Torus(out)
            } else {
                panic!("field/model mismatch")
            }
        }
    };
    Ok(GridField::from_coeffs(model, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Resolution;

    fn small_sphere() -> SurfaceModel<f64> {
        SurfaceModel::unit_sphere(Resolution {
            n_u: 24,
            n_v: 48,
            degree: 23,
        })
    }

    fn small_torus() -> SurfaceModel<f64> {
        SurfaceModel::flat_torus(
            1.0,
            2.0,
            Resolution {
                n_u: 32,
                n_v: 64,
                degree: 15,
            },
        )
    }

    #[test]
    fn sphere_roundtrip_band_limited() {
        let s = small_sphere();
        // f = Y-ish combination: z plus a degree-3 piece.
        let f = GridField::from_fn(&s, |p| match p {
            SurfacePoint::Sphere(x) => {
                let z = x.0[2];
                z + 0.5 * (2.5 * z * z * z - 1.5 * z) + 0.3 * x.0[0]
            }
            _ => unreachable!(),
        });
        let f2 = GridField::from_samples(&s, f.samples.clone());
        let resynth = match (&f2.coeffs, s.spectral()) {
            (Coeffs::Sphere { c, s: ss, .. }, SpectralBasis::Sphere(basis)) => {
                basis.synthesize_grid(c, ss)
            }
            _ => unreachable!(),
        };
        for (a, b) in f.samples.iter().zip(&resynth) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_eigenfunction_laplacian() {
        let s = small_sphere();
        // z is a degree-1 harmonic: Δ z = -2 z.
        let f = GridField::from_fn(&s, |p| match p {
            SurfacePoint::Sphere(x) => x.0[2],
            _ => unreachable!(),
        });
        let lap = f.laplacian_field(&s);
        for (l, v) in lap.samples.iter().zip(&f.samples) {
            assert!((l + 2.0 * v).abs() < 1e-10);
        }
        let p = s.point_from_chart(1.2, 0.8);
        let (v, g, l) = f.eval_all(&s, &p);
        assert!((v - 0.8f64.cos()).abs() < 1e-10);
        assert!((l + 2.0 * v).abs() < 1e-8);
        // Gradient of z is the tangential projection of e_z.
        if let (SurfacePoint::Sphere(x), TangentVec::Sphere(gv)) = (&p, &g) {
            let expect = Vec3([0.0, 0.0, 1.0]).sub(x.scale(x.0[2]));
            assert!(gv.sub(expect).norm() < 1e-9);
        }
    }

    #[test]
    fn sphere_poisson_eigen_relation() {
        let s = small_sphere();
        let y = GridField::from_fn(&s, |p| match p {
            SurfacePoint::Sphere(x) => x.0[2],
            _ => unreachable!(),
        });
        // -Δ u = Y with Y degree-1 (eigenvalue 2) → u = Y/2.
        let u = solve_poisson(&s, &y).unwrap();
        for (uu, yy) in u.samples.iter().zip(&y.samples) {
            assert!((uu - yy / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let s = small_sphere();
        let one = GridField::from_fn(&s, |_| 1.0);
        assert!(matches!(
            solve_poisson(&s, &one),
            Err(SpectralError::NonZeroMean { .. })
        ));
    }

    #[test]
    fn poisson_roundtrip_random_band_limited() {
        let s = small_sphere();
        // Build u from a handful of fixed coefficients, then check
        // solve_poisson(-Δ u) = u.
        let f = GridField::from_fn(&s, |p| match p {
            SurfacePoint::Sphere(x) => {
                let (x0, y0, z0) = (x.0[0], x.0[1], x.0[2]);
                0.7 * z0 + 0.2 * x0 * y0 + 0.1 * (z0 * z0 - 1.0 / 3.0)
            }
            _ => unreachable!(),
        });
        let neg_lap = {
            let mut l = f.laplacian_field(&s);
            for v in &mut l.samples {
                *v = -*v;
            }
            GridField::from_samples(&s, l.samples)
        };
        let u = solve_poisson(&s, &neg_lap).unwrap();
        for (a, b) in u.samples.iter().zip(&f.samples) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn torus_fourier_eigenfunction() {
        let t = small_torus();
        let (a, _b) = (1.0, 2.0);
        let f = GridField::from_fn(&t, |p| match p {
            SurfacePoint::Torus { x, .. } => (2.0 * std::f64::consts::PI * x / a).sin(),
            _ => unreachable!(),
        });
        let lap = f.laplacian_field(&t);
        let k2 = (2.0 * std::f64::consts::PI / a).powi(2);
        for (l, v) in lap.samples.iter().zip(&f.samples) {
            assert!((l + k2 * v).abs() < 1e-9);
        }
        let p = SurfacePoint::Torus { x: 0.3, y: 1.7 };
        let (v, g, l) = f.eval_all(&t, &p);
        assert!((v - (2.0 * std::f64::consts::PI * 0.3).sin()).abs() < 1e-11);
        assert!((l + k2 * v).abs() < 1e-9);
        if let TangentVec::Torus { x: gx, y: gy } = g {
            let expect = 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * 0.3).cos();
            assert!((gx - expect).abs() < 1e-9);
            assert!(gy.abs() < 1e-10);
        }
    }

    #[test]
    fn torus_poisson_roundtrip() {
        let t = small_torus();
        let pi = std::f64::consts::PI;
        let f = GridField::from_fn(&t, |p| match p {
            SurfacePoint::Torus { x, y } => {
                (2.0 * pi * x).sin() * (pi * y).cos() + 0.4 * (4.0 * pi * x).cos()
            }
            _ => unreachable!(),
        });
        let neg_lap = {
            let mut l = f.laplacian_field(&t);
            for v in &mut l.samples {
                *v = -*v;
            }
            GridField::from_samples(&t, l.samples)
        };
        let u = solve_poisson(&t, &neg_lap).unwrap();
        for (a, b) in u.samples.iter().zip(&f.samples) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature_kills_nonconstant_eigenfunctions() {
        let s = small_sphere();
        let y = GridField::from_fn(&s, |p| match p {
            SurfacePoint::Sphere(x) => x.0[0] * x.0[2],
            _ => unreachable!(),
        });
        assert!(y.integral(&s).abs() < 1e-8);
    }
}
