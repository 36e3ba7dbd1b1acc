//! Problem data: the prescribed curvature K, the conical points p_i with
//! orders α_i, and the number N of concentration points, together with the
//! derived scalars (generalized Euler characteristic, ρ_geo, the quantized
//! level set Γ, f_g) and the weighted curvature K̃.

use std::sync::Arc;

use crate::error::ProblemError;
use crate::geometry::{SurfaceKind, SurfaceModel, SurfacePoint, TangentVec};
use crate::scalar::{r64, rus, Real};
use crate::spectral::{solve_poisson, GridField};

/// Conical singularities: points p_i with orders α_i > -1, α_i ≠ 0.
#[derive(Clone, Debug)]
pub struct SingularData<R> {
    points: Vec<SurfacePoint<R>>,
    orders: Vec<R>,
}

impl<R: Real> SingularData<R> {
    pub fn new(
        model: &SurfaceModel<R>,
        points: Vec<SurfacePoint<R>>,
        orders: Vec<R>,
    ) -> Result<Self, ProblemError> {
        assert_eq!(points.len(), orders.len());
        for (i, &alpha) in orders.iter().enumerate() {
            if !(alpha > -R::one()) {
                return Err(ProblemError::OrderOutOfRange {
                    index: i,
                    alpha: alpha.to_f64().unwrap_or(f64::NAN),
                });
            }
            if alpha == R::zero() {
                return Err(ProblemError::ZeroOrder { index: i });
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d = model.distance(&points[i], &points[j]);
                if d < r64(1e-10) {
                    return Err(ProblemError::DuplicateSingularPoints {
                        i,
                        j,
                        dist: d.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(SingularData { points, orders })
    }

    pub fn empty() -> Self {
        SingularData {
            points: Vec::new(),
            orders: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SurfacePoint<R>] {
        &self.points
    }

    pub fn orders(&self) -> &[R] {
        &self.orders
    }

    pub fn order_sum(&self) -> R {
        self.orders.iter().copied().sum()
    }
}

/// A localized well/peak added to log K: amplitude · exp(-d²(x, center)/width²).
#[derive(Clone, Debug)]
pub struct LogBump<R> {
    pub center: SurfacePoint<R>,
    pub amplitude: R,
    pub width: R,
}

/// Built-in prescribed-curvature families with analytic gradient and
/// Laplacian. Products and sums compose; sampled fields go through the
/// spectral representation.
#[derive(Clone, Debug)]
pub enum CurvatureField<R: Real> {
    Constant(R),
    /// K = cos(colatitude); sphere only.
    CosPolar,
    /// K = Π_k exp(c_k · d²(x, q_k)).
    RadialGaussian { terms: Vec<(SurfacePoint<R>, R)> },
    /// K = base · exp(Σ_k bump_k), bumps acting additively on log K.
    LogBumps { base: R, bumps: Vec<LogBump<R>> },
    Product(Vec<CurvatureField<R>>),
    Sum(Vec<CurvatureField<R>>),
    /// Band-limited sampled field with spectral differentiation.
    Grid(Arc<GridField<R>>),
}

/// Value, gradient and Laplacian bundled: products/sums combine these by
/// the Leibniz rules.
#[derive(Clone, Copy, Debug)]
pub struct Jet<R> {
    pub value: R,
    pub gradient: TangentVec<R>,
    pub laplacian: R,
}

/// d², ∇d² = -2 log_x(q) and Δd² at x for the squared distance to q.
/// At the cut locus d² loses smoothness; the gradient falls back to zero
/// there (the families keep their mass well inside the injectivity radius).
fn dist_sq_jet<R: Real>(model: &SurfaceModel<R>, x: &SurfacePoint<R>, q: &SurfacePoint<R>) -> Jet<R> {
    let d = model.distance(x, q);
    let grad = match model.log_map(x, q) {
        Ok(log) => log.scale(r64(-2.0)),
        Err(_) => TangentVec::zero_like(x),
    };
    let lap = match model.kind() {
        SurfaceKind::UnitSphere => {
            // Δ d² = 2 (1 + d cot d), with the series near d = 0.
            if d < r64(1e-4) {
                r64::<R>(4.0) - d * d * r64(2.0 / 3.0)
            } else {
                r64::<R>(2.0) * (R::one() + d * d.cos() / d.sin())
            }
        }
        SurfaceKind::FlatTorus { .. } => r64(4.0),
    };
    Jet {
        value: d * d,
        gradient: grad,
        laplacian: lap,
    }
}

fn jet_product<R: Real>(a: Jet<R>, b: Jet<R>) -> Jet<R> {
    Jet {
        value: a.value * b.value,
        gradient: a.gradient.scale(b.value).add(&b.gradient.scale(a.value)),
        laplacian: a.value * b.laplacian
            + b.value * a.laplacian
            + r64::<R>(2.0) * a.gradient.dot(&b.gradient),
    }
}

impl<R: Real> CurvatureField<R> {
    /// Check the family is usable on this surface.
    pub fn validate(&self, model: &SurfaceModel<R>) -> Result<(), ProblemError> {
        match self {
            CurvatureField::CosPolar => match model.kind() {
                SurfaceKind::UnitSphere => Ok(()),
                _ => Err(ProblemError::SurfaceMismatch {
                    family: "cos_polar",
                    surface: "unit sphere",
                }),
            },
            CurvatureField::Product(fs) | CurvatureField::Sum(fs) => {
                fs.iter().try_for_each(|f| f.validate(model))
            }
            _ => Ok(()),
        }
    }

    pub fn jet(&self, model: &SurfaceModel<R>, x: &SurfacePoint<R>) -> Jet<R> {
        match self {
            CurvatureField::Constant(c) => Jet {
                value: *c,
                gradient: TangentVec::zero_like(x),
                laplacian: R::zero(),
            },
            CurvatureField::CosPolar => {
                // K = z, a degree-1 eigenfunction: ∇K = e_z - z x, ΔK = -2z.
                match x {
                    SurfacePoint::Sphere(v) => {
                        let z = v.0[2];
                        let ez = crate::linalg::Vec3([R::zero(), R::zero(), R::one()]);
                        Jet {
                            value: z,
                            gradient: TangentVec::Sphere(ez.sub(v.scale(z))),
                            laplacian: r64::<R>(-2.0) * z,
                        }
                    }
                    _ => panic!("cos_polar curvature is sphere-only"),
                }
            }
            CurvatureField::RadialGaussian { terms } => {
                // log K = Σ c_k d²_k.
                let mut log_val = R::zero();
                let mut log_grad = TangentVec::zero_like(x);
                let mut log_lap = R::zero();
                for (q, c) in terms {
                    let d2 = dist_sq_jet(model, x, q);
                    log_val += *c * d2.value;
                    log_grad = log_grad.add(&d2.gradient.scale(*c));
                    log_lap += *c * d2.laplacian;
                }
                let v = log_val.exp();
                Jet {
                    value: v,
                    gradient: log_grad.scale(v),
                    laplacian: v * (log_lap + log_grad.dot(&log_grad)),
                }
            }
            CurvatureField::LogBumps { base, bumps } => {
                let mut log_grad = TangentVec::zero_like(x);
                let mut log_lap = R::zero();
                let mut log_val = base.ln();
                for bump in bumps {
                    let d2 = dist_sq_jet(model, x, &bump.center);
                    let w2 = bump.width * bump.width;
                    let phi = (-d2.value / w2).exp();
                    let g = bump.amplitude * phi;
                    log_val += g;
                    // ∇g = -g/w² ∇d², Δg = g (d²·4/w⁴... ) via φ', φ''.
                    log_grad = log_grad.add(&d2.gradient.scale(-g / w2));
                    log_lap += g * (r64::<R>(4.0) * d2.value / (w2 * w2) - d2.laplacian / w2);
                }
                let v = log_val.exp();
                Jet {
                    value: v,
                    gradient: log_grad.scale(v),
                    laplacian: v * (log_lap + log_grad.dot(&log_grad)),
                }
            }
            CurvatureField::Product(fs) => {
                let mut acc = Jet {
                    value: R::one(),
                    gradient: TangentVec::zero_like(x),
                    laplacian: R::zero(),
                };
                for f in fs {
                    acc = jet_product(acc, f.jet(model, x));
                }
                acc
            }
            CurvatureField::Sum(fs) => {
                let mut acc = Jet {
                    value: R::zero(),
                    gradient: TangentVec::zero_like(x),
                    laplacian: R::zero(),
                };
                for f in fs {
                    let j = f.jet(model, x);
                    acc.value += j.value;
                    acc.gradient = acc.gradient.add(&j.gradient);
                    acc.laplacian += j.laplacian;
                }
                acc
            }
            CurvatureField::Grid(field) => {
                let (value, gradient, laplacian) = field.eval_all(model, x);
                Jet {
                    value,
                    gradient,
                    laplacian,
                }
            }
        }
    }

    pub fn value(&self, model: &SurfaceModel<R>, x: &SurfacePoint<R>) -> R {
        match self {
            CurvatureField::Constant(c) => *c,
            CurvatureField::CosPolar => match x {
                SurfacePoint::Sphere(v) => v.0[2],
                _ => panic!("cos_polar curvature is sphere-only"),
            },
            CurvatureField::RadialGaussian { terms } => {
                let mut log_val = R::zero();
                for (q, c) in terms {
                    let d = model.distance(x, q);
                    log_val += *c * d * d;
                }
                log_val.exp()
            }
            CurvatureField::LogBumps { base, bumps } => {
                let mut log_val = base.ln();
                for bump in bumps {
                    let d = model.distance(x, &bump.center);
                    log_val += bump.amplitude * (-d * d / (bump.width * bump.width)).exp();
                }
                log_val.exp()
            }
            CurvatureField::Product(fs) => fs.iter().map(|f| f.value(model, x)).product(),
            CurvatureField::Sum(fs) => fs.iter().map(|f| f.value(model, x)).sum(),
            CurvatureField::Grid(field) => field.value_at(model, x),
        }
    }

    pub fn gradient(&self, model: &SurfaceModel<R>, x: &SurfacePoint<R>) -> TangentVec<R> {
        self.jet(model, x).gradient
    }

    pub fn laplacian(&self, model: &SurfaceModel<R>, x: &SurfacePoint<R>) -> R {
        self.jet(model, x).laplacian
    }

    /// Δ_g log K at x. Exact (sum of exponent Laplacians) for the
    /// exponential families; ΔK/K - |∇K|²/K² otherwise. Meaningful where
    /// K(x) ≠ 0; equals Δ_g log |K| on {K < 0}.
    pub fn log_laplacian(&self, model: &SurfaceModel<R>, x: &SurfacePoint<R>) -> R {
        match self {
            CurvatureField::Constant(_) => R::zero(),
            CurvatureField::RadialGaussian { terms } => {
                let mut log_lap = R::zero();
                for (q, c) in terms {
                    log_lap += *c * dist_sq_jet(model, x, q).laplacian;
                }
                log_lap
            }
            CurvatureField::LogBumps { bumps, .. } => {
                let mut log_lap = R::zero();
                for bump in bumps {
                    let d2 = dist_sq_jet(model, x, &bump.center);
                    let w2 = bump.width * bump.width;
                    let g = bump.amplitude * (-d2.value / w2).exp();
                    log_lap += g * (r64::<R>(4.0) * d2.value / (w2 * w2) - d2.laplacian / w2);
                }
                log_lap
            }
            CurvatureField::Product(fs) => {
                fs.iter().map(|f| f.log_laplacian(model, x)).sum()
            }
            _ => {
                let j = self.jet(model, x);
                j.laplacian / j.value - j.gradient.dot(&j.gradient) / (j.value * j.value)
            }
        }
    }
}

/// The full problem instance: surface, curvature, singular set and the
/// number N of concentration points, with the derived quantities cached.
pub struct ProblemData<R: Real> {
    surface: Arc<SurfaceModel<R>>,
    curvature: CurvatureField<R>,
    singular: SingularData<R>,
    n_points: usize,
    ell: usize,
    f_g: GridField<R>,
    f_g_is_zero: bool,
    k_samples: Vec<R>,
    nodal_points: Vec<SurfacePoint<R>>,
}

impl<R: Real> ProblemData<R> {
    pub fn new(
        surface: Arc<SurfaceModel<R>>,
        curvature: CurvatureField<R>,
        singular: SingularData<R>,
        n_points: usize,
    ) -> Result<Self, ProblemError> {
        assert!(n_points >= 1, "the configuration needs at least one point");
        curvature.validate(&surface)?;
        // f_g solves -Δ f_g = 4πχ/|Σ| - 2κ_g with zero mean; on both
        // built-in surfaces the right-hand side vanishes identically, but
        // the honest pipeline is kept so the residual is checkable.
        let chi = r64::<R>(surface.euler_characteristic() as f64);
        let rhs_value = R::four_pi() * chi / surface.area() - r64::<R>(2.0) * surface.kappa();
        let rhs = GridField::from_fn(&surface, |_| rhs_value);
        let f_g = solve_poisson(&surface, &rhs).expect("constant-curvature rhs has zero mean");
        let f_g_is_zero = f_g.max_abs() < r64(1e-13);
        let k_samples: Vec<R> = surface
            .quadrature()
            .nodes
            .iter()
            .map(|p| curvature.value(&surface, p))
            .collect();
        let nodal_points = nodal_crossings(&surface, &k_samples);
        // Reorder singular points so those in Σ⁺ come first.
        let mut idx: Vec<usize> = (0..singular.len()).collect();
        idx.sort_by_key(|&i| {
            let positive = curvature.value(&surface, &singular.points[i]) > R::zero();
            (!positive, i)
        });
        let singular = SingularData {
            points: idx.iter().map(|&i| singular.points[i]).collect(),
            orders: idx.iter().map(|&i| singular.orders[i]).collect(),
        };
        let ell = singular
            .points
            .iter()
            .take_while(|p| curvature.value(&surface, p) > R::zero())
            .count();
        Ok(ProblemData {
            surface,
            curvature,
            singular,
            n_points,
            ell,
            f_g,
            f_g_is_zero,
            k_samples,
            nodal_points,
        })
    }

    pub fn surface(&self) -> &SurfaceModel<R> {
        &self.surface
    }

    pub fn surface_arc(&self) -> Arc<SurfaceModel<R>> {
        Arc::clone(&self.surface)
    }

    pub fn curvature(&self) -> &CurvatureField<R> {
        &self.curvature
    }

    pub fn singular(&self) -> &SingularData<R> {
        &self.singular
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Count ℓ of singular points inside Σ⁺ (they are ordered first).
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn k_samples(&self) -> &[R] {
        &self.k_samples
    }

    pub fn nodal_points(&self) -> &[SurfacePoint<R>] {
        &self.nodal_points
    }

    /// The sampled zero-mean solution f_g (identically zero on the
    /// built-in surfaces, kept as an honest solve).
    pub fn f_g(&self) -> &GridField<R> {
        &self.f_g
    }

    pub fn f_g_at(&self, x: &SurfacePoint<R>) -> R {
        if self.f_g_is_zero {
            R::zero()
        } else {
            self.f_g.value_at(&self.surface, x)
        }
    }

    /// Generalized Euler characteristic χ(Σ, α) = χ(Σ) + Σ α_i.
    pub fn chi_alpha(&self) -> R {
        r64::<R>(self.surface.euler_characteristic() as f64) + self.singular.order_sum()
    }

    /// ρ_geo = 4π χ(Σ, α).
    pub fn rho_geo(&self) -> R {
        R::four_pi() * self.chi_alpha()
    }

    /// Validated split: errors when a singular point sits on the sampled
    /// nodal line of K; otherwise returns ℓ (points already reordered).
    pub fn split_ell(&self) -> Result<usize, ProblemError> {
        let tol = self.surface.quadrature().max_spacing * r64(2.0);
        for (i, p) in self.singular.points.iter().enumerate() {
            let mut dmin = R::infinity();
            for q in &self.nodal_points {
                dmin = dmin.min(self.surface.distance(p, q));
            }
            if dmin < tol {
                return Err(ProblemError::OnNodalLine {
                    index: i,
                    dist: dmin.to_f64().unwrap_or(f64::NAN),
                    tol: tol.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(self.ell)
    }

    /// K̃(x) = K(x) exp(f_g(x) - 4π Σ α_i G(x, p_i)).
    pub fn k_tilde(&self, x: &SurfacePoint<R>) -> Result<R, ProblemError> {
        Ok(self.k_weight_log(x)?.exp() * self.curvature.value(&self.surface, x))
    }

    /// log K̃ for K(x) > 0, computed directly as
    /// log K + f_g - 4π Σ α_i G(x, p_i).
    pub fn log_k_tilde(&self, x: &SurfacePoint<R>) -> Result<R, ProblemError> {
        let k = self.curvature.value(&self.surface, x);
        assert!(
            k > R::zero(),
            "log K-tilde requires positive curvature at the evaluation point"
        );
        Ok(k.ln() + self.k_weight_log(x)?)
    }

    /// The exponent f_g(x) - 4π Σ α_i G(x, p_i).
    pub fn k_weight_log(&self, x: &SurfacePoint<R>) -> Result<R, ProblemError> {
        let mut acc = self.f_g_at(x);
        for (i, (p, &alpha)) in self
            .singular
            .points
            .iter()
            .zip(&self.singular.orders)
            .enumerate()
        {
            let g = self
                .surface
                .green(x, p)
                .map_err(|_| ProblemError::AtSingularPoint { index: i })?;
            acc -= R::four_pi() * alpha * g;
        }
        Ok(acc)
    }

    /// All values of Γ(α) up to `cap`, sorted and deduplicated.
    pub fn gamma_set(&self, cap: R) -> Vec<R> {
        assert!(cap > R::zero());
        let m = self.singular.len();
        assert!(m <= 20, "subset enumeration of Γ is capped at 20 orders");
        let eight_pi = r64::<R>(2.0) * R::four_pi();
        let mut subset_sums = Vec::with_capacity(1 << m);
        for mask in 0u32..(1 << m) {
            let mut s = R::zero();
            for (i, &alpha) in self.singular.orders.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s += R::one() + alpha;
                }
            }
            subset_sums.push(s);
        }
        let mut values = Vec::new();
        let mut n = 0usize;
        loop {
            let base = eight_pi * rus::<R>(n);
            if base > cap {
                break;
            }
            for &s in &subset_sums {
                let v = base + eight_pi * s;
                if v <= cap && v >= R::zero() {
                    values.push(v);
                }
            }
            n += 1;
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        values.dedup_by(|a, b| (*a - *b).abs() < r64(1e-12));
        values
    }

    /// Is `rho` in Γ(α) within `tol`?
    pub fn gamma_contains(&self, rho: R, tol: R) -> bool {
        if rho < -tol {
            return false;
        }
        self.gamma_set(rho.abs() + R::one() + tol)
            .iter()
            .any(|&v| (v - rho).abs() <= tol)
    }
}

/// max{n ∈ ℤ : n < α}, the left-limit integer part [α]⁻.
pub fn bracket_minus<R: Real>(alpha: R) -> i64 {
    let f = alpha.floor();
    let fi = f.to_f64().expect("finite order") as i64;
    if f == alpha {
        fi - 1
    } else {
        fi
    }
}

/// Marching-squares crossings of {K = 0} on the quadrature grid: one
/// linearly-interpolated point per sign-changing cell edge.
pub fn nodal_crossings<R: Real>(
    model: &SurfaceModel<R>,
    samples: &[R],
) -> Vec<SurfacePoint<R>> {
    let q = model.quadrature();
    assert_eq!(samples.len(), q.len());
    let (nu, nv) = (q.n_u, q.n_v);
    let wrap_rows = matches!(model.kind(), SurfaceKind::FlatTorus { .. });
    let mut out = Vec::new();
    let mut push_crossing = |i1: usize, j1: usize, i2: usize, j2: usize| {
        let a = samples[i1 * nv + j1];
        let b = samples[i2 * nv + j2];
        if (a > R::zero()) != (b > R::zero()) && a != b {
            let t = a / (a - b);
            let (u1, v1) = model.chart_of_point(q.node(i1, j1));
            let (u2, v2) = model.chart_of_point(q.node(i2, j2));
            // Interpolate in chart coordinates, minding the periodic seam.
            let (pu, pv) = interpolate_chart(model, (u1, v1), (u2, v2), t);
            out.push(model.point_from_chart(pu, pv));
        }
    };
    for i in 0..nu {
        for j in 0..nv {
            // Column neighbour (always periodic in j).
            push_crossing(i, j, i, (j + 1) % nv);
            // Row neighbour.
            if i + 1 < nu {
                push_crossing(i, j, i + 1, j);
            } else if wrap_rows {
                push_crossing(i, j, 0, j);
            }
        }
    }
    out
}

fn interpolate_chart<R: Real>(
    model: &SurfaceModel<R>,
    (u1, v1): (R, R),
    (u2, v2): (R, R),
    t: R,
) -> (R, R) {
    let (pu, pv) = match model.kind() {
        SurfaceKind::UnitSphere => {
            // Longitude is periodic: interpolate the short way around.
            let mut du = u2 - u1;
            if du > R::pi() {
                du -= R::two_pi();
            }
            if du < -R::pi() {
                du += R::two_pi();
            }
            (u1 + t * du, v1 + t * (v2 - v1))
        }
        SurfaceKind::FlatTorus { a, b } => {
            let du = crate::geometry::min_image(u2 - u1, a);
            let dv = crate::geometry::min_image(v2 - v1, b);
            (u1 + t * du, v1 + t * dv)
        }
    };
    (pu, pv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Resolution;

    fn sphere() -> Arc<SurfaceModel<f64>> {
        Arc::new(SurfaceModel::unit_sphere(Resolution {
            n_u: 48,
            n_v: 96,
            degree: 47,
        }))
    }

    #[test]
    fn order_constraints_enforced() {
        let s = sphere();
        let p = s.point_from_chart(0.0, 1.0);
        assert!(matches!(
            SingularData::new(&s, vec![p], vec![-1.2]),
            Err(ProblemError::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            SingularData::new(&s, vec![p], vec![0.0]),
            Err(ProblemError::ZeroOrder { .. })
        ));
        let q = s.point_from_chart(0.0, 1.0);
        assert!(matches!(
            SingularData::new(&s, vec![p, q], vec![0.5, 0.5]),
            Err(ProblemError::DuplicateSingularPoints { .. })
        ));
    }

    #[test]
    fn chi_and_rho_arithmetic() {
        let s = sphere();
        let p = s.point_from_chart(0.3, 0.4);
        let sing = SingularData::new(&s, vec![p], vec![2.0]).unwrap();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), sing, 1).unwrap();
        assert_eq!(data.chi_alpha(), 4.0);
        assert!((data.rho_geo() - 16.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rho_matches_blowup_parametrization() {
        // Σα = 2N - 2 - ε/4π on the sphere gives ρ_geo = 8πN - ε.
        let s = sphere();
        let n = 3usize;
        let eps = 0.037;
        let alpha = 2.0 * n as f64 - 2.0 - eps / (4.0 * std::f64::consts::PI);
        let p = s.point_from_chart(0.3, 2.0);
        let sing = SingularData::new(&s, vec![p], vec![alpha]).unwrap();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), sing, n).unwrap();
        let expect = 8.0 * std::f64::consts::PI * n as f64 - eps;
        assert!((data.rho_geo() - expect).abs() < 1e-12);
    }

    #[test]
    fn split_reorders_by_sign() {
        // K = cos φ: north positive, south negative.
        let s = sphere();
        let north_pt = s.point_from_chart(1.0, 0.4);
        let south_pt = s.point_from_chart(2.0, 2.8);
        let sing = SingularData::new(&s, vec![south_pt, north_pt], vec![0.5, 0.7]).unwrap();
        let data = ProblemData::new(s, CurvatureField::CosPolar, sing, 1).unwrap();
        assert_eq!(data.split_ell().unwrap(), 1);
        // The Σ⁺ point now comes first with its order.
        assert!((data.singular().orders()[0] - 0.7).abs() < 1e-15);
        assert!((data.singular().orders()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn split_mixed_four_points() {
        let s = sphere();
        let pts = vec![
            s.point_from_chart(0.0, 0.5),  // +
            s.point_from_chart(1.0, 2.6),  // −
            s.point_from_chart(2.0, 0.9),  // +
            s.point_from_chart(3.0, 2.2),  // −
        ];
        let sing = SingularData::new(&s, pts, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let data = ProblemData::new(s, CurvatureField::CosPolar, sing, 1).unwrap();
        assert_eq!(data.split_ell().unwrap(), 2);
        assert_eq!(data.singular().orders(), &[0.1, 0.3, 0.2, 0.4]);
        // Idempotence: ℓ and ordering are construction invariants.
        assert_eq!(data.ell(), 2);
    }

    #[test]
    fn split_rejects_point_on_nodal_line() {
        let s = sphere();
        let equator = s.point_from_chart(0.7, std::f64::consts::FRAC_PI_2);
        let sing = SingularData::new(&s, vec![equator], vec![0.5]).unwrap();
        let data = ProblemData::new(s, CurvatureField::CosPolar, sing, 1).unwrap();
        assert!(matches!(
            data.split_ell(),
            Err(ProblemError::OnNodalLine { .. })
        ));
    }

    #[test]
    fn k_all_positive_gives_ell_m() {
        let s = sphere();
        let pts = vec![s.point_from_chart(0.3, 1.0), s.point_from_chart(2.0, 2.0)];
        let sing = SingularData::new(&s, pts, vec![0.5, -0.5]).unwrap();
        let data = ProblemData::new(s, CurvatureField::Constant(2.0), sing, 1).unwrap();
        assert_eq!(data.split_ell().unwrap(), 2);
    }

    #[test]
    fn f_g_vanishes_on_builtins() {
        let s = sphere();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), SingularData::empty(), 1)
            .unwrap();
        assert!(data.f_g().max_abs() < 1e-12);
        let t = Arc::new(SurfaceModel::flat_torus(
            1.0,
            1.3,
            Resolution {
                n_u: 32,
                n_v: 32,
                degree: 15,
            },
        ));
        let tdata = ProblemData::new(t, CurvatureField::Constant(1.0), SingularData::empty(), 1)
            .unwrap();
        assert!(tdata.f_g().max_abs() < 1e-12);
    }

    #[test]
    fn gamma_set_small_case() {
        // m=1, α=0.5, cap 20π → {0, 8π, 12π, 16π, 20π}.
        let s = sphere();
        let p = s.point_from_chart(0.3, 1.2);
        let sing = SingularData::new(&s, vec![p], vec![0.5]).unwrap();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), sing, 1).unwrap();
        let pi = std::f64::consts::PI;
        let got = data.gamma_set(20.0 * pi + 1e-9);
        let expect = [0.0, 8.0 * pi, 12.0 * pi, 16.0 * pi, 20.0 * pi];
        assert_eq!(got.len(), expect.len());
        for (a, b) in got.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_set_no_singularities() {
        let s = sphere();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), SingularData::empty(), 1)
            .unwrap();
        let pi = std::f64::consts::PI;
        let got = data.gamma_set(25.0 * pi);
        let expect = [0.0, 8.0 * pi, 16.0 * pi, 24.0 * pi];
        assert_eq!(got.len(), expect.len());
        for (a, b) in got.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rho_slightly_below_quantized_is_not_member() {
        let s = sphere();
        let p = s.point_from_chart(0.3, 1.2);
        let sing = SingularData::new(&s, vec![p], vec![0.5]).unwrap();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), sing, 2).unwrap();
        let pi = std::f64::consts::PI;
        assert!(!data.gamma_contains(16.0 * pi - 1e-3, 1e-9));
        assert!(data.gamma_contains(16.0 * pi, 1e-9));
        // Γ is closed under +8π and contains 8π(1+α_i):
        assert!(data.gamma_contains(8.0 * pi * 1.5, 1e-9));
        assert!(data.gamma_contains(8.0 * pi * 1.5 + 8.0 * pi, 1e-9));
    }

    #[test]
    fn k_tilde_reduces_to_k_without_singularities() {
        let s = sphere();
        let data = ProblemData::new(s, CurvatureField::Constant(2.5), SingularData::empty(), 1)
            .unwrap();
        let x = data.surface().point_from_chart(0.8, 1.1);
        assert!((data.k_tilde(&x).unwrap() - 2.5).abs() < 1e-13);
    }

    #[test]
    fn k_tilde_sign_matches_k() {
        let s = sphere();
        let p = s.point_from_chart(0.0, 0.2);
        let sing = SingularData::new(&s, vec![p], vec![0.8]).unwrap();
        let data = ProblemData::new(s, CurvatureField::CosPolar, sing, 1).unwrap();
        for (lon, colat) in [(0.5, 0.7), (1.2, 1.9), (3.0, 2.9), (2.2, 1.3)] {
            let x = data.surface().point_from_chart(lon, colat);
            let k = data.curvature().value(data.surface(), &x);
            let kt = data.k_tilde(&x).unwrap();
            assert_eq!(k > 0.0, kt > 0.0, "sign flip at ({lon}, {colat})");
        }
    }

    #[test]
    fn k_tilde_local_exponent() {
        // log |K̃| ≈ 2α log d + C near a singular point: fit the slope over
        // d ∈ {1e-2, 1e-3, 1e-4} and compare with 2α within 2%.
        let s = sphere();
        let p = s.point_from_chart(1.0, 1.2);
        let alpha = 0.6;
        let sing = SingularData::new(&s, vec![p], vec![alpha]).unwrap();
        let data = ProblemData::new(s.clone(), CurvatureField::Constant(1.0), sing, 1).unwrap();
        let [e1, _] = s.frame(&p);
        let mut logs = Vec::new();
        let mut logd = Vec::new();
        for d in [1e-2, 1e-3, 1e-4] {
            let x = s.exp_map(&p, &e1.scale(d)).unwrap();
            logs.push(data.k_tilde(&x).unwrap().abs().ln());
            logd.push(d.ln());
        }
        let slope = crate::linalg::fit_slope(&logd, &logs);
        assert!(
            (slope - 2.0 * alpha).abs() < 0.02 * 2.0 * alpha,
            "fitted exponent {slope} vs {}",
            2.0 * alpha
        );
    }

    #[test]
    fn at_singular_point_rejected() {
        let s = sphere();
        let p = s.point_from_chart(1.0, 1.2);
        let sing = SingularData::new(&s, vec![p], vec![0.6]).unwrap();
        let data = ProblemData::new(s, CurvatureField::Constant(1.0), sing, 1).unwrap();
        assert!(matches!(
            data.k_tilde(&p),
            Err(ProblemError::AtSingularPoint { index: 0 })
        ));
    }

    #[test]
    fn bracket_minus_rules() {
        assert_eq!(bracket_minus(2.0), 1);
        assert_eq!(bracket_minus(1.5), 1);
        assert_eq!(bracket_minus(-0.3), -1);
        assert_eq!(bracket_minus(0.5), 0);
        assert_eq!(bracket_minus(3.0), 2);
        assert_eq!(bracket_minus(-1.0 + 1e-9), -1);
    }

    #[test]
    fn curvature_jets_match_finite_differences() {
        let s = sphere();
        let q1 = s.point_from_chart(0.4, 1.1);
        let q2 = s.point_from_chart(2.4, 2.0);
        let fields: Vec<CurvatureField<f64>> = vec![
            CurvatureField::CosPolar,
            CurvatureField::RadialGaussian {
                terms: vec![(q1, -0.7), (q2, 0.4)],
            },
            CurvatureField::LogBumps {
                base: 2.0,
                bumps: vec![
                    LogBump {
                        center: q1,
                        amplitude: -1.1,
                        width: 0.6,
                    },
                    LogBump {
                        center: q2,
                        amplitude: 0.5,
                        width: 0.4,
                    },
                ],
            },
            CurvatureField::Sum(vec![
                CurvatureField::Product(vec![CurvatureField::CosPolar, CurvatureField::CosPolar]),
                CurvatureField::Constant(-0.25),
            ]),
        ];
        let x = s.point_from_chart(1.9, 0.9);
        let h = 1e-5;
        for field in &fields {
            let jet = field.jet(&s, &x);
            let [e1, e2] = s.frame(&x);
            // Gradient vs central differences along both frame legs.
            for e in [&e1, &e2] {
                let plus = s.exp_map(&x, &e.scale(h)).unwrap();
                let minus = s.exp_map(&x, &e.scale(-h)).unwrap();
                let fd = (field.value(&s, &plus) - field.value(&s, &minus)) / (2.0 * h);
                assert!(
                    (jet.gradient.dot(e) - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                    "gradient mismatch for {field:?}"
                );
            }
            // Laplacian vs 5-point geodesic stencil.
            let mut lap_fd = -4.0 * field.value(&s, &x);
            for e in [
                e1.clone(),
                e1.scale(-1.0),
                e2.clone(),
                e2.scale(-1.0),
            ] {
                let p = s.exp_map(&x, &e.scale(h)).unwrap();
                lap_fd += field.value(&s, &p);
            }
            lap_fd /= h * h;
            assert!(
                (jet.laplacian - lap_fd).abs() < 1e-3 * (1.0 + jet.laplacian.abs()),
                "laplacian mismatch for {field:?}: jet {} fd {}",
                jet.laplacian,
                lap_fd
            );
            // log-Laplacian consistency with the generic formula.
            let direct = field.log_laplacian(&s, &x);
            let generic =
                jet.laplacian / jet.value - jet.gradient.dot(&jet.gradient) / (jet.value * jet.value);
            assert!(
                (direct - generic).abs() < 1e-9 * (1.0 + generic.abs()),
                "log-laplacian mismatch for {field:?}"
            );
        }
    }

    #[test]
    fn cos_polar_log_laplacian_profile() {
        // Δ log cos θ = -1 - 1/z² on the upper hemisphere; its sup over Σ⁺
        // is -2, attained at the pole.
        let s = sphere();
        let data = ProblemData::new(
            s.clone(),
            CurvatureField::CosPolar,
            SingularData::empty(),
            1,
        )
        .unwrap();
        for colat in [0.1, 0.5, 1.0, 1.4] {
            let x = s.point_from_chart(0.3, colat);
            let z = colat.cos();
            let expect = -1.0 - 1.0 / (z * z);
            let got = data.curvature().log_laplacian(&s, &x);
            assert!(
                (got - expect).abs() < 1e-9 * (1.0 + expect.abs()),
                "colat {colat}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn nodal_crossings_on_equator() {
        let s = sphere();
        let samples: Vec<f64> = s
            .quadrature()
            .nodes
            .iter()
            .map(|p| match p {
                SurfacePoint::Sphere(v) => v.0[2],
                _ => unreachable!(),
            })
            .collect();
        let crossings = nodal_crossings(&s, &samples);
        assert!(!crossings.is_empty());
        for c in &crossings {
            let (_, colat) = s.chart_of_point(c);
            assert!(
                (colat - std::f64::consts::FRAC_PI_2).abs() < 0.05,
                "crossing off the equator at colat {colat}"
            );
        }
    }
}
