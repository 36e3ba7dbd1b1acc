//! Small dense linear algebra: 3-vectors for ambient sphere geometry,
//! a Jacobi eigensolver for Hessian spectra and a pivoted linear solve
//! for Newton steps. Matrices here are tiny (2N × 2N with N ≲ 8), so
//! simplicity and determinism beat asymptotics.

use crate::scalar::{r64, Real};

/// Ambient 3-vector (sphere embeddings, tangent vectors).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Vec3<R>(pub [R; 3]);

impl<R: Real> Vec3<R> {
    pub fn zero() -> Self {
        Vec3([R::zero(); 3])
    }

    pub fn dot(self, other: Self) -> R {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(self, other: Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = other.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: R) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn add(self, other: Self) -> Self {
        Vec3([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn sub(self, other: Self) -> Self {
        Vec3([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        assert!(n > R::zero(), "cannot normalise the zero vector");
        self.scale(n.recip())
    }
}

/// Dense row-major square matrix, small sizes only.
#[derive(Clone, Debug)]
pub struct SmallMatrix<R> {
    pub n: usize,
    pub data: Vec<R>,
}

impl<R: Real> SmallMatrix<R> {
    pub fn zeros(n: usize) -> Self {
        SmallMatrix {
            n,
            data: vec![R::zero(); n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: R) {
        self.data[i * self.n + j] = v;
    }

    /// (A + Aᵀ)/2, used before spectral classification so FD asymmetry
    /// cannot leak into the eigenvalues.
    pub fn symmetrized(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(i, j, (self.get(i, j) + self.get(j, i)) * r64(0.5));
            }
        }
        out
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Converges quadratically; plenty for 2N ≤ 32.
pub fn symmetric_eigenvalues<R: Real>(matrix: &SmallMatrix<R>) -> Vec<R> {
    let n = matrix.n;
    if n == 0 {
        return Vec::new();
    }
    let mut a = matrix.symmetrized();
    let tol = r64::<R>(1e-30);
    for _sweep in 0..100 {
        let mut off = R::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        let scale: R = (0..n).map(|i| a.get(i, i).abs()).fold(R::one(), R::max);
        if off <= tol * scale * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == R::zero() {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (r64::<R>(2.0) * apq);
                // Stable tangent of the rotation angle.
                let t = {
                    let s = if theta >= R::zero() { R::one() } else { -R::one() };
                    s / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = (t * t + R::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<R> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    eig
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_linear<R: Real>(matrix: &SmallMatrix<R>, rhs: &[R]) -> Option<Vec<R>> {
    let n = matrix.n;
    assert_eq!(rhs.len(), n);
    let mut a = matrix.data.clone();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if !(best > R::zero()) || !best.is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let diag = a[col * n + col];
        for row in (col + 1)..n {
            let f = a[row * n + col] / diag;
            if f == R::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] = a[row * n + k] - f * v;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![R::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc = acc - a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Least-squares slope of y against x (simple linear regression).
pub fn fit_slope<R: Real>(xs: &[R], ys: &[R]) -> R {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = crate::scalar::rus::<R>(xs.len());
    let mx = xs.iter().copied().sum::<R>() / n;
    let my = ys.iter().copied().sum::<R>() / n;
    let mut num = R::zero();
    let mut den = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_hand_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let mut m = SmallMatrix::<f64>::zeros(2);
        m.set(0, 0, 2.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 2.0);
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-13);
        assert!((e[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn jacobi_diagonal_4x4() {
        let mut m = SmallMatrix::<f64>::zeros(4);
        for (i, v) in [4.0, -1.0, 0.5, 2.0].iter().enumerate() {
            m.set(i, i, *v);
        }
        let e = symmetric_eigenvalues(&m);
        assert_eq!(e.len(), 4);
        for (a, b) in e.iter().zip([-1.0, 0.5, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_solve_roundtrip() {
        let mut m = SmallMatrix::<f64>::zeros(3);
        let rows = [[3.0, 1.0, -1.0], [1.0, 4.0, 0.5], [-1.0, 0.5, 5.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, rows[i][j]);
            }
        }
        let x_true = [1.0, -2.0, 0.25];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += rows[i][j] * x_true[j];
            }
        }
        let x = solve_linear(&m, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_solve_rejected() {
        let mut m = SmallMatrix::<f64>::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 4.0);
        assert!(solve_linear(&m, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 2.25 * x).collect();
        assert!((fit_slope(&xs, &ys) + 2.25).abs() < 1e-13);
    }
}
