//! Hypothesis certification: the sign/regularity assumptions on K, the
//! topology of the positivity region Σ⁺ (component count, contractibility
//! through the Euler characteristic of the grid-triangulated patch), the
//! concavity bound β, and the structural verdicts for each existence
//! theorem.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::ProblemError;
use crate::geometry::{SurfaceKind, SurfaceModel, SurfacePoint};
use crate::problem::{bracket_minus, ProblemData};
use crate::quadrature::Quadrature;
use crate::scalar::{r64, Real};

/// Per-component summary of Σ⁺.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct ComponentReport<R> {
    pub node_count: usize,
    pub area: R,
    /// V - E + F of the triangulated patch; 1 ⟺ disk.
    pub euler_char: Option<i64>,
    pub contractible: Option<bool>,
    /// Indices (into the reordered singular set) of sources inside.
    pub sources_inside: Vec<usize>,
}

/// Structural verdict for one existence theorem.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremVerdict {
    pub applies: bool,
    /// Failure reasons; empty when the verdict applies.
    pub reasons: Vec<String>,
    pub note: Option<String>,
}

impl TheoremVerdict {
    fn from_reasons(reasons: Vec<String>, note: Option<String>) -> Self {
        TheoremVerdict {
            applies: reasons.is_empty(),
            reasons,
            note,
        }
    }
}

/// Everything the hypothesis checker can certify about a problem instance.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct HypothesisReport<R> {
    /// (H1) K is sign-changing.
    pub h1_sign_changing: bool,
    /// (H2) K is C²; true by construction for the analytic families and
    /// for band-limited sampled fields.
    pub h2_c2: bool,
    /// (H3) ∇K does not vanish on the sampled nodal set.
    pub h3_pass: bool,
    pub h3_min_grad_on_nodal: Option<R>,
    pub h3_threshold: R,
    /// (H4) no singular point on the nodal set (margin in distance).
    pub h4_pass: bool,
    pub h4_min_margin: Option<R>,
    pub ell: usize,
    /// Number of connected components of the sampled Σ⁺.
    pub component_count: usize,
    pub components: Vec<ComponentReport<R>>,
    /// β = -sup_{Σ⁺} Δ_g log K, reported when positive.
    pub beta: Option<R>,
    pub sup_log_laplacian: R,
    /// α_i > 0 for all i ≤ ℓ.
    pub alpha_positive_ok: bool,
    /// α_i ∉ {0, 1, …, N-1} for all i ≤ ℓ.
    pub order_exclusions_ok: bool,
    /// N ≤ ℓ + Σ_{i≤ℓ} [α_i]⁻.
    pub split_inequality_ok: bool,
    pub split_capacity: i64,
    /// ε = 8πN - ρ_geo (positive when Σα sits left of 2N - χ).
    pub epsilon: R,
    /// Admissible window (0, β|Σ|) when β exists.
    pub epsilon_window: Option<(R, R)>,
    /// Is ρ_geo on a quantized blow-up level?
    pub rho_geo_in_gamma: bool,
    pub thm_components: TheoremVerdict,
    pub thm_noncontractible: TheoremVerdict,
    pub thm_contractible: TheoremVerdict,
    pub thm_class_plus: TheoremVerdict,
    pub thm_class_minus: TheoremVerdict,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Node labelling of {K > 0} on a structured grid. Sphere grids carry two
/// virtual pole nodes at indices n and n+1.
pub(crate) struct PositiveComponents {
    pub labels: Vec<Option<usize>>,
    pub count: usize,
    pub n_grid: usize,
}

pub(crate) fn positive_components<R: Real>(
    kind: &SurfaceKind<R>,
    quad: &Quadrature<R>,
    samples: &[R],
    pole_values: Option<(R, R)>,
) -> PositiveComponents {
    let (nu, nv) = (quad.n_u, quad.n_v);
    let n = nu * nv;
    let sphere = matches!(kind, SurfaceKind::UnitSphere);
    let total = if sphere { n + 2 } else { n };
    let positive = |idx: usize| -> bool {
        if idx < n {
            samples[idx] > R::zero()
        } else if let Some((kn, ks)) = pole_values {
            if idx == n {
                kn > R::zero()
            } else {
                ks > R::zero()
            }
        } else {
            false
        }
    };
    let mut uf = UnionFind::new(total);
    for i in 0..nu {
        for j in 0..nv {
            let idx = i * nv + j;
            if !positive(idx) {
                continue;
            }
            let right = i * nv + (j + 1) % nv;
            if positive(right) {
                uf.union(idx, right);
            }
            if i + 1 < nu {
                let down = (i + 1) * nv + j;
                if positive(down) {
                    uf.union(idx, down);
                }
            } else if !sphere {
                let down = j;
                if positive(down) {
                    uf.union(idx, down);
                }
            }
        }
    }
    if sphere {
        if positive(n) {
            for j in 0..nv {
                if positive(j) {
                    uf.union(n, j);
                }
            }
        }
        if positive(n + 1) {
            for j in 0..nv {
                let idx = (nu - 1) * nv + j;
                if positive(idx) {
                    uf.union(n + 1, idx);
                }
            }
        }
    }
    // Compact labels in deterministic (root index) order.
    let mut labels = vec![None; total];
    let mut next = 0usize;
    let mut root_label = std::collections::BTreeMap::new();
    for idx in 0..total {
        if positive(idx) {
            let root = uf.find(idx);
            let lab = *root_label.entry(root).or_insert_with(|| {
                let l = next;
                next += 1;
                l
            });
            labels[idx] = Some(lab);
        }
    }
    PositiveComponents {
        labels,
        count: next,
        n_grid: n,
    }
}

/// V - E + F of the patch of grid cells fully inside one component,
/// including the polar fans on the sphere. `None` when the component has
/// no full cell.
fn component_euler_char<R: Real>(
    kind: &SurfaceKind<R>,
    quad: &Quadrature<R>,
    comps: &PositiveComponents,
    component: usize,
) -> Option<i64> {
    let (nu, nv) = (quad.n_u, quad.n_v);
    let n = comps.n_grid;
    let sphere = matches!(kind, SurfaceKind::UnitSphere);
    let in_comp = |idx: usize| comps.labels[idx] == Some(component);
    let mut vertices: BTreeSet<usize> = BTreeSet::new();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut faces = 0i64;
    let add_edge = |a: usize, b: usize, set: &mut BTreeSet<(usize, usize)>| {
        set.insert((a.min(b), a.max(b)));
    };
    let row_pairs: Vec<(usize, usize)> = if sphere {
        (0..nu - 1).map(|i| (i, i + 1)).collect()
    } else {
        (0..nu).map(|i| (i, (i + 1) % nu)).collect()
    };
    for &(i0, i1) in &row_pairs {
        for j in 0..nv {
            let j1 = (j + 1) % nv;
            let corners = [i0 * nv + j, i0 * nv + j1, i1 * nv + j1, i1 * nv + j];
            if corners.iter().all(|&c| in_comp(c)) {
                faces += 1;
                for &c in &corners {
                    vertices.insert(c);
                }
                for k in 0..4 {
                    add_edge(corners[k], corners[(k + 1) % 4], &mut edges);
                }
            }
        }
    }
    if sphere {
        for (pole, row) in [(n, 0usize), (n + 1, nu - 1)] {
            if !in_comp(pole) {
                continue;
            }
            for j in 0..nv {
                let j1 = (j + 1) % nv;
                let (a, b) = (row * nv + j, row * nv + j1);
                if in_comp(a) && in_comp(b) {
                    faces += 1;
                    vertices.insert(pole);
                    vertices.insert(a);
                    vertices.insert(b);
                    add_edge(pole, a, &mut edges);
                    add_edge(pole, b, &mut edges);
                    add_edge(a, b, &mut edges);
                }
            }
        }
    }
    if faces == 0 {
        return None;
    }
    Some(vertices.len() as i64 - edges.len() as i64 + faces)
}

/// Crate-internal access to the Euler-characteristic classifier (the
/// min-max retraction builder reuses it to find annular components).
pub(crate) fn component_euler_char_pub<R: Real>(
    kind: &SurfaceKind<R>,
    quad: &Quadrature<R>,
    comps: &PositiveComponents,
    component: usize,
) -> Option<i64> {
    component_euler_char(kind, quad, comps, component)
}

fn is_excluded_integer<R: Real>(alpha: R, n: usize) -> bool {
    let tol = r64::<R>(1e-9);
    for k in 0..n {
        if (alpha - r64::<R>(k as f64)).abs() <= tol {
            return true;
        }
    }
    false
}

/// Run every hypothesis check on the problem data. Fails with
/// `GridTooCoarse` when the Σ⁺ component count changes under one grid
/// refinement.
pub fn hypotheses<R: Real>(data: &ProblemData<R>) -> Result<HypothesisReport<R>, ProblemError> {
    let model = data.surface();
    let quad = model.quadrature();
    let kind = model.kind();
    let samples = data.k_samples();
    let k = data.curvature();
    let pole_values = match kind {
        SurfaceKind::UnitSphere => {
            let north = model.point_from_chart(R::zero(), R::zero());
            let south = model.point_from_chart(R::zero(), R::pi());
            Some((k.value(model, &north), k.value(model, &south)))
        }
        _ => None,
    };
    let comps = positive_components(&kind, quad, samples, pole_values);

    // Topology stability under one refinement step.
    let fine_res = model.resolution().refined();
    let fine_quad = Quadrature::build(&kind, &fine_res);
    let fine_samples: Vec<R> = fine_quad.nodes.iter().map(|p| k.value(model, p)).collect();
    let fine_comps = positive_components(&kind, &fine_quad, &fine_samples, pole_values);
    if fine_comps.count != comps.count {
        return Err(ProblemError::GridTooCoarse {
            coarse: comps.count,
            fine: fine_comps.count,
        });
    }

    // (H1): sampled sign change.
    let mut min_k = R::infinity();
    let mut max_k = R::neg_infinity();
    for &v in samples {
        min_k = min_k.min(v);
        max_k = max_k.max(v);
    }
    let h1 = min_k < R::zero() && max_k > R::zero();

    // (H3): |∇K| along the sampled nodal set.
    let crossings = data.nodal_points();
    let mut max_grad = R::zero();
    for node in &quad.nodes {
        max_grad = max_grad.max(k.gradient(model, node).norm());
    }
    let h3_threshold = r64::<R>(1e-3) * max_grad;
    let h3_min = if crossings.is_empty() {
        None
    } else {
        let mut m = R::infinity();
        for c in crossings {
            m = m.min(k.gradient(model, c).norm());
        }
        Some(m)
    };
    let h3_pass = match h3_min {
        None => true, // ∂Σ⁺ empty: vacuously true
        Some(m) => m > h3_threshold,
    };

    // (H4): singular points clear of the nodal set.
    let h4_tol = quad.max_spacing * r64(2.0);
    let h4_min = if data.singular().is_empty() || crossings.is_empty() {
        None
    } else {
        let mut m = R::infinity();
        for p in data.singular().points() {
            for c in crossings {
                m = m.min(model.distance(p, c));
            }
        }
        Some(m)
    };
    let h4_pass = match h4_min {
        None => true,
        Some(m) => m > h4_tol,
    };

    // Per-component reports.
    let mut components = Vec::with_capacity(comps.count);
    for comp in 0..comps.count {
        let mut node_count = 0usize;
        let mut area = R::zero();
        for (idx, lab) in comps.labels.iter().take(comps.n_grid).enumerate() {
            if *lab == Some(comp) {
                node_count += 1;
                area += quad.weights[idx];
            }
        }
        let euler = component_euler_char(&kind, quad, &comps, comp);
        let mut sources_inside = Vec::new();
        for (i, p) in data.singular().points().iter().enumerate() {
            if i >= data.ell() {
                break;
            }
            if let Some(lab) = nearest_positive_label(model, quad, &comps, p) {
                if lab == comp {
                    sources_inside.push(i);
                }
            }
        }
        components.push(ComponentReport {
            node_count,
            area,
            euler_char: euler,
            contractible: euler.map(|e| e == 1),
            sources_inside,
        });
    }

    // β from the sampled sup of Δ_g log K on Σ⁺.
    let mut sup_ll = R::neg_infinity();
    for (idx, node) in quad.nodes.iter().enumerate() {
        if comps.labels[idx].is_some() {
            sup_ll = sup_ll.max(k.log_laplacian(model, node));
        }
    }
    if sup_ll == R::neg_infinity() {
        sup_ll = R::nan();
    }
    let beta = if sup_ll < R::zero() { Some(-sup_ll) } else { None };

    let ell = data.ell();
    let orders = data.singular().orders();
    let n_pts = data.n_points();
    let alpha_positive_ok = orders.iter().take(ell).all(|&a| a > R::zero());
    let order_exclusions_ok = orders
        .iter()
        .take(ell)
        .all(|&a| !is_excluded_integer(a, n_pts));
    let split_capacity: i64 = ell as i64
        + orders
            .iter()
            .take(ell)
            .map(|&a| bracket_minus(a))
            .sum::<i64>();
    let split_inequality_ok = (n_pts as i64) <= split_capacity;

    let epsilon = r64::<R>(8.0) * R::pi() * r64::<R>(n_pts as f64) - data.rho_geo();
    let epsilon_window = beta.map(|b| (R::zero(), b * model.area()));
    let rho_geo_in_gamma = data.gamma_contains(data.rho_geo(), r64(1e-9));

    // Structural theorem verdicts.
    let window_reasons = |reasons: &mut Vec<String>| {
        match beta {
            None => reasons.push(format!(
                "sup Δ_g log K on Σ⁺ = {:.3e} is not negative",
                sup_ll.to_f64().unwrap_or(f64::NAN)
            )),
            Some(b) => {
                let hi = b * model.area();
                if !(epsilon > R::zero() && epsilon < hi) {
                    reasons.push(format!(
                        "ε = {:.3e} outside the admissible window (0, β|Σ|) = (0, {:.3e})",
                        epsilon.to_f64().unwrap_or(f64::NAN),
                        hi.to_f64().unwrap_or(f64::NAN)
                    ));
                }
            }
        }
    };

    let thm_components = {
        let mut reasons = Vec::new();
        if !h1 {
            reasons.push("(H1) fails: K is not sign-changing".into());
        }
        if comps.count < n_pts {
            reasons.push(format!(
                "Σ⁺ has {} components, fewer than N = {}",
                comps.count, n_pts
            ));
        }
        if !alpha_positive_ok {
            reasons.push("some α_i ≤ 0 for i ≤ ℓ".into());
        }
        window_reasons(&mut reasons);
        TheoremVerdict::from_reasons(reasons, None)
    };

    let h_common = |reasons: &mut Vec<String>| {
        if !h1 {
            reasons.push("(H1) fails: K is not sign-changing".into());
        }
        if !h3_pass {
            reasons.push("(H3) fails: ∇K vanishes on the sampled nodal set".into());
        }
        if !h4_pass {
            reasons.push("(H4) fails: a singular point sits on the nodal set".into());
        }
        if !order_exclusions_ok {
            reasons.push("some α_i ∈ {0, …, N-1} for i ≤ ℓ".into());
        }
    };

    let thm_noncontractible = {
        let mut reasons = Vec::new();
        h_common(&mut reasons);
        if !components
            .iter()
            .any(|c| c.contractible == Some(false))
        {
            reasons.push("Σ⁺ has no non-contractible component".into());
        }
        window_reasons(&mut reasons);
        TheoremVerdict::from_reasons(reasons, None)
    };

    let thm_contractible = {
        let mut reasons = Vec::new();
        h_common(&mut reasons);
        if !split_inequality_ok {
            reasons.push(format!(
                "N = {} exceeds ℓ + Σ[α_i]⁻ = {}",
                n_pts, split_capacity
            ));
        }
        window_reasons(&mut reasons);
        TheoremVerdict::from_reasons(reasons, None)
    };

    let one = R::one();
    let thm_class_plus = {
        let mut reasons = Vec::new();
        if !(epsilon < R::zero() && epsilon > -one) {
            reasons.push(format!(
                "needs ρ_geo = 8πN + ε' with ε' ∈ (0,1): got ε' = {:.3e}",
                (-epsilon).to_f64().unwrap_or(f64::NAN)
            ));
        }
        TheoremVerdict::from_reasons(
            reasons,
            Some("requires a 𝒦⁺ class certificate (classes command)".into()),
        )
    };
    let thm_class_minus = {
        let mut reasons = Vec::new();
        if !(epsilon > R::zero() && epsilon < one) {
            reasons.push(format!(
                "needs ρ_geo = 8πN - ε with ε ∈ (0,1): got ε = {:.3e}",
                epsilon.to_f64().unwrap_or(f64::NAN)
            ));
        }
        TheoremVerdict::from_reasons(
            reasons,
            Some("requires a 𝒦⁻ class certificate (classes command)".into()),
        )
    };

    Ok(HypothesisReport {
        h1_sign_changing: h1,
        h2_c2: true,
        h3_pass,
        h3_min_grad_on_nodal: h3_min,
        h3_threshold,
        h4_pass,
        h4_min_margin: h4_min,
        ell,
        component_count: comps.count,
        components,
        beta,
        sup_log_laplacian: sup_ll,
        alpha_positive_ok,
        order_exclusions_ok,
        split_inequality_ok,
        split_capacity,
        epsilon,
        epsilon_window,
        rho_geo_in_gamma,
        thm_components,
        thm_noncontractible,
        thm_contractible,
        thm_class_plus,
        thm_class_minus,
    })
}

fn nearest_positive_label<R: Real>(
    model: &SurfaceModel<R>,
    quad: &Quadrature<R>,
    comps: &PositiveComponents,
    p: &SurfacePoint<R>,
) -> Option<usize> {
    // Nearest positive node wins; fine for points with (H4) margin.
    let mut best: Option<(R, usize)> = None;
    for (idx, node) in quad.nodes.iter().enumerate() {
        if let Some(lab) = comps.labels[idx] {
            let d = model.distance(p, node);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, lab));
            }
        }
    }
    best.map(|(_, lab)| lab)
}
