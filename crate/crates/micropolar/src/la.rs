//! Small dense linear algebra: real 3-vectors and 3×3 matrices with the tensor
//! calculus used throughout (symmetrization, commutators, the `ten`/`vc` duality
//! between vectors and antisymmetric matrices), a Jacobi eigensolver for symmetric
//! 3×3 matrices, and heap-allocated complex matrices with LAPACK-backed
//! eigendecomposition plus a scaling-and-squaring matrix exponential.
//!
//! Conventions (fixed once, used everywhere):
//! - matrices act on column vectors; storage of [`Mat3`] is row-major;
//! - `(a ⊗ b) v = (b·v) a`, i.e. `outer(a,b)[i][l] = a[i]*b[l]`;
//! - `ten(a)[i][l] = Σ_j ε_{ijl} a_j`, so `ten(a) v = a × v`,
//!   `ten(a):ten(b) = 2 a·b`, and `vc` inverts `ten` on antisymmetric matrices;
//! - `[A, B] = AB − BA`.

use num_complex::Complex64;

pub type C64 = Complex64;

// ---------------------------------------------------------------------------
// real 3-vectors
// ---------------------------------------------------------------------------

/// Column 3-vector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    /// Standard basis vector `e_i` (0-indexed axis).
    pub fn basis(i: usize) -> Self {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        Vec3(v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self * (1.0 / n)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Planar rotation by +90°: `(x, y) ↦ (−y, x)`.
///
/// This is the `⊥` operation on the first two components; the third slot of a
/// 3-vector argument is dropped by the planar callers that use it.
pub fn perp2(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

// ---------------------------------------------------------------------------
// real 3×3 matrices
// ---------------------------------------------------------------------------

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Self {
        Mat3::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn transpose(self) -> Mat3 {
        let m = self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(self) -> f64 {
        let m = self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Solve `self · x = b` by the adjugate formula; `None` when singular.
    pub fn solve3(self, b: Vec3) -> Option<Vec3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = self.0;
        let adj = Mat3([
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ]);
        Some(adj * b * (1.0 / d))
    }

    /// Frobenius inner product `A:B = Σ_{il} A_{il} B_{il}`.
    pub fn inner(self, o: Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for l in 0..3 {
                s += self.0[i][l] * o.0[i][l];
            }
        }
        s
    }

    pub fn frobenius(self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn sym(self) -> Mat3 {
        (self + self.transpose()) * 0.5
    }

    /// Antisymmetric part `(A − Aᵀ)/2`.
    pub fn skew(self) -> Mat3 {
        (self - self.transpose()) * 0.5
    }

    pub fn is_symmetric(self, tol: f64) -> bool {
        (self - self.transpose()).max_abs() <= tol
    }

    /// Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi
    /// rotations. Returns `(eigenvalues, q)` with `self · q_col(i) = w_i q_col(i)`;
    /// eigenvalues are sorted ascending and `q` is orthogonal with eigenvectors
    /// as columns.
    pub fn sym_eigen(self) -> ([f64; 3], Mat3) {
        debug_assert!(self.is_symmetric(1e-12 * (1.0 + self.max_abs())));
        let mut a = self.0;
        let mut q = Mat3::identity().0;
        let scale = self.max_abs().max(1.0);
        for _sweep in 0..50 {
            let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
            if off <= 1e-16 * scale {
                break;
            }
            for (p, r) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][r].abs() <= 1e-300 {
                    continue;
                }
                // classic Jacobi rotation annihilating a[p][r]
                let theta = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let (akp, akr) = (a[k][p], a[k][r]);
                    a[k][p] = c * akp - s * akr;
                    a[k][r] = s * akp + c * akr;
                }
                for k in 0..3 {
                    let (apk, ark) = (a[p][k], a[r][k]);
                    a[p][k] = c * apk - s * ark;
                    a[r][k] = s * apk + c * ark;
                }
                for k in 0..3 {
                    let (qkp, qkr) = (q[k][p], q[k][r]);
                    q[k][p] = c * qkp - s * qkr;
                    q[k][r] = s * qkp + c * qkr;
                }
            }
        }
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
        let w = [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]];
        let mut qs = [[0.0; 3]; 3];
        for (newcol, &oldcol) in idx.iter().enumerate() {
            for k in 0..3 {
                qs[k][newcol] = q[k][oldcol];
            }
        }
        (w, Mat3(qs))
    }

    pub fn column(self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }
}

impl std::ops::Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for l in 0..3 {
                r[i][l] = self.0[i][l] + o.0[i][l];
            }
        }
        Mat3(r)
    }
}

impl std::ops::Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for l in 0..3 {
                r[i][l] = self.0[i][l] - o.0[i][l];
            }
        }
        Mat3(r)
    }
}

impl std::ops::Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut r = self.0;
        for row in &mut r {
            for x in row {
                *x *= s;
            }
        }
        Mat3(r)
    }
}

impl std::ops::Mul<Mat3> for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for l in 0..3 {
                r[i][l] = (0..3).map(|j| self.0[i][j] * o.0[j][l]).sum();
            }
        }
        Mat3(r)
    }
}

impl std::ops::Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1] + self.0[0][2] * v.0[2],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1] + self.0[1][2] * v.0[2],
            self.0[2][0] * v.0[0] + self.0[2][1] * v.0[1] + self.0[2][2] * v.0[2],
        ])
    }
}

impl std::ops::Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self * -1.0
    }
}

/// Commutator `[A, B] = AB − BA`.
pub fn commutator(a: Mat3, b: Mat3) -> Mat3 {
    a * b - b * a
}

/// Outer product with the convention `(a ⊗ b) v = (b·v) a`.
pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for l in 0..3 {
            r[i][l] = a.0[i] * b.0[l];
        }
    }
    Mat3(r)
}

/// Antisymmetric matrix of a vector: `ten(a)_{il} = Σ_j ε_{ijl} a_j`, so that
/// `ten(a) v = a × v`.
pub fn ten(a: Vec3) -> Mat3 {
    let [x, y, z] = a.0;
    Mat3([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
}

/// Inverse of [`ten`] on antisymmetric matrices: `vc(M)_j = ½ Σ_{il} ε_{ijl} M_{il}`.
/// Applied to a general matrix it extracts the antisymmetric part's vector.
pub fn vc(m: Mat3) -> Vec3 {
    Vec3([
        0.5 * (m.0[2][1] - m.0[1][2]),
        0.5 * (m.0[0][2] - m.0[2][0]),
        0.5 * (m.0[1][0] - m.0[0][1]),
    ])
}

/// The planar rotation generator `R = e₂⊗e₁ − e₁⊗e₂` acting on the 12-plane:
/// `R (a₁, a₂, 0) = (−a₂, a₁, 0)`, i.e. `⊥` on the first two slots.
pub fn perp_rotation() -> Mat3 {
    Mat3([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
}

// ---------------------------------------------------------------------------
// complex dense matrices (column-major, LAPACK-compatible)
// ---------------------------------------------------------------------------

extern "C" {
    fn zgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut C64,
        lda: *const i32,
        w: *mut C64,
        vl: *mut C64,
        ldvl: *const i32,
        vr: *mut C64,
        ldvr: *const i32,
        work: *mut C64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
}

#[derive(Debug, thiserror::Error)]
pub enum LaError {
    #[error("eigensolver failed to converge (LAPACK info = {0})")]
    EigNoConverge(i32),
    #[error("matrix is singular to working precision (pivot {0})")]
    Singular(usize),
}

/// Column-major complex `n×n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    /// entries, `a[i + j*n]` is row `i`, column `j`
    pub a: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            a: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn mul(&self, o: &CMat) -> CMat {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut r = CMat::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let ok = o[(k, j)];
                if ok == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..n {
                    r.a[i + j * n] += self.a[i + k * n] * ok;
                }
            }
        }
        r
    }

    pub fn add(&self, o: &CMat) -> CMat {
        assert_eq!(self.n, o.n);
        let mut r = self.clone();
        for (x, y) in r.a.iter_mut().zip(&o.a) {
            *x += y;
        }
        r
    }

    pub fn sub(&self, o: &CMat) -> CMat {
        assert_eq!(self.n, o.n);
        let mut r = self.clone();
        for (x, y) in r.a.iter_mut().zip(&o.a) {
            *x -= y;
        }
        r
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut r = self.clone();
        for x in &mut r.a {
            *x *= s;
        }
        r
    }

    /// Matrix 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i + j * n].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(v.len(), n);
        let mut r = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let vj = v[j];
            for i in 0..n {
                r[i] += self.a[i + j * n] * vj;
            }
        }
        r
    }

    /// Solve `self · X = B` in place of `b` (columns of `b` are right-hand sides)
    /// by partial-pivot LU. Intended for the small systems of the Padé scheme.
    pub fn solve_into(&self, b: &mut CMat) -> Result<(), LaError> {
        assert_eq!(self.n, b.n);
        let n = self.n;
        let mut lu = self.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (mut pmax, mut vmax) = (col, lu[col + col * n].norm());
            for r in col + 1..n {
                let v = lu[r + col * n].norm();
                if v > vmax {
                    pmax = r;
                    vmax = v;
                }
            }
            if vmax == 0.0 {
                return Err(LaError::Singular(col));
            }
            if pmax != col {
                for j in 0..n {
                    lu.swap(col + j * n, pmax + j * n);
                }
                piv.swap(col, pmax);
                for j in 0..b.n {
                    b.a.swap(col + j * n, pmax + j * n);
                }
            }
            let d = lu[col + col * n];
            for r in col + 1..n {
                let f = lu[r + col * n] / d;
                lu[r + col * n] = f;
                for j in col + 1..n {
                    let t = lu[col + j * n] * f;
                    lu[r + j * n] -= t;
                }
                for j in 0..b.n {
                    let t = b.a[col + j * n] * f;
                    b.a[r + j * n] -= t;
                }
            }
        }
        // back substitution
        for j in 0..b.n {
            for r in (0..n).rev() {
                let mut s = b.a[r + j * n];
                for k in r + 1..n {
                    s -= lu[r + k * n] * b.a[k + j * n];
                }
                b.a[r + j * n] = s / lu[r + r * n];
            }
        }
        Ok(())
    }

    /// Eigenvalues and right eigenvectors (as columns) of a general complex
    /// matrix, via LAPACK `zgeev`.
    pub fn eig(&self) -> Result<(Vec<C64>, CMat), LaError> {
        let n = self.n as i32;
        let mut a = self.a.clone();
        let mut w = vec![C64::new(0.0, 0.0); self.n];
        let mut vr = CMat::zeros(self.n);
        let mut rwork = vec![0.0f64; 2 * self.n];
        let mut info = 0i32;
        // workspace query, then the real call
        let mut query = [C64::new(0.0, 0.0)];
        let ldvl = 1i32;
        unsafe {
            zgeev_(
                b"N".as_ptr(),
                b"V".as_ptr(),
                &n,
                a.as_mut_ptr(),
                &n,
                w.as_mut_ptr(),
                std::ptr::null_mut(),
                &ldvl,
                vr.a.as_mut_ptr(),
                &n,
                query.as_mut_ptr(),
                &-1,
                rwork.as_mut_ptr(),
                &mut info,
            );
        }
        let lwork = query[0].re.max(2.0 * self.n as f64) as i32;
        let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
        unsafe {
            zgeev_(
                b"N".as_ptr(),
                b"V".as_ptr(),
                &n,
                a.as_mut_ptr(),
                &n,
                w.as_mut_ptr(),
                std::ptr::null_mut(),
                &ldvl,
                vr.a.as_mut_ptr(),
                &n,
                work.as_mut_ptr(),
                &lwork,
                rwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return Err(LaError::EigNoConverge(info));
        }
        Ok((w, vr))
    }

    /// Matrix exponential by scaling-and-squaring with the order-13 Padé
    /// approximant (the standard double-precision scheme).
    pub fn expm(&self) -> CMat {
        const THETA13: f64 = 5.371920351148152;
        #[rustfmt::skip]
        const B: [f64; 14] = [
            64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
            1187353796428800.0, 129060195264000.0, 10559470521600.0,
            670442572800.0, 33522128640.0, 1323241920.0,
            40840800.0, 960960.0, 16380.0, 182.0, 1.0,
        ];
        let n = self.n;
        let nrm = self.norm_one();
        let s = if nrm > THETA13 {
            (nrm / THETA13).log2().ceil() as i32
        } else {
            0
        };
        let a = self.scale(C64::new(0.5f64.powi(s), 0.0));
        let a2 = a.mul(&a);
        let a4 = a2.mul(&a2);
        let a6 = a2.mul(&a4);
        let id = CMat::identity(n);
        // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
        let w1 = a6
            .scale(B[13].into())
            .add(&a4.scale(B[11].into()))
            .add(&a2.scale(B[9].into()));
        let w2 = a6
            .scale(B[7].into())
            .add(&a4.scale(B[5].into()))
            .add(&a2.scale(B[3].into()))
            .add(&id.scale(B[1].into()));
        let u = a.mul(&a6.mul(&w1).add(&w2));
        // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
        let z1 = a6
            .scale(B[12].into())
            .add(&a4.scale(B[10].into()))
            .add(&a2.scale(B[8].into()));
        let z2 = a6
            .scale(B[6].into())
            .add(&a4.scale(B[4].into()))
            .add(&a2.scale(B[2].into()))
            .add(&id.scale(B[0].into()));
        let v = a6.mul(&z1).add(&z2);
        // exp(A) ≈ (V−U)⁻¹ (V+U), then repeated squaring
        let mut rhs = v.add(&u);
        let vm = v.sub(&u);
        vm.solve_into(&mut rhs)
            .expect("Padé denominator is nonsingular for scaled input");
        let mut e = rhs;
        for _ in 0..s {
            e = e.mul(&e);
        }
        e
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i + j * self.n]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i + j * self.n]
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx3(a: Vec3, b: Vec3, tol: f64) {
        assert!((a - b).norm() <= tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn ten_reproduces_cross_product() {
        let a = Vec3::new(1.0, -2.0, 3.0);
        let v = Vec3::new(0.5, 0.25, -1.0);
        approx3(ten(a) * v, a.cross(v), 1e-15);
    }

    #[test]
    fn ten_frobenius_pairing() {
        let a = Vec3::new(0.3, 0.7, -0.2);
        let b = Vec3::new(-1.1, 0.4, 0.9);
        assert!((ten(a).inner(ten(b)) - 2.0 * a.dot(b)).abs() < 1e-15);
    }

    #[test]
    fn vc_inverts_ten() {
        let a = Vec3::new(0.9, -0.1, 2.5);
        approx3(vc(ten(a)), a, 1e-15);
    }

    #[test]
    fn solve3_inverts_multiplication() {
        let m = Mat3([[3.0, 1.0, -0.5], [0.2, 2.0, 0.8], [-1.0, 0.4, 5.0]]);
        let x = Vec3::new(0.7, -1.3, 2.1);
        let b = m * x;
        approx3(m.solve3(b).unwrap(), x, 1e-12);
        let singular = Mat3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(singular.solve3(b).is_none());
    }

    #[test]
    fn perp_rotation_is_planar_perp() {
        let r = perp_rotation();
        let a = Vec3::new(3.0, 4.0, 0.0);
        approx3(r * a, Vec3::new(-4.0, 3.0, 0.0), 1e-15);
        let p = perp2([3.0, 4.0]);
        assert_eq!(p, [-4.0, 3.0]);
    }

    #[test]
    fn sym_eigen_diagonalizes() {
        let m = Mat3([[2.0, 1.0, 0.3], [1.0, -1.0, 0.5], [0.3, 0.5, 4.0]]);
        let (w, q) = m.sym_eigen();
        for i in 0..3 {
            let qi = q.column(i);
            approx3(m * qi, qi * w[i], 1e-12);
        }
        assert!(w[0] <= w[1] && w[1] <= w[2]);
        // orthogonality
        let qtq = q.transpose() * q;
        assert!((qtq - Mat3::identity()).max_abs() < 1e-12);
    }

    #[test]
    fn eig_rotation_generator() {
        let mut m = CMat::zeros(2);
        m[(0, 1)] = C64::new(-1.0, 0.0);
        m[(1, 0)] = C64::new(1.0, 0.0);
        let (mut w, _) = m.eig().unwrap();
        w.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((w[0] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((w[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp(t J) with J the 2×2 rotation generator is the rotation matrix
        let t = 0.7f64;
        let mut m = CMat::zeros(2);
        m[(0, 1)] = C64::new(-t, 0.0);
        m[(1, 0)] = C64::new(t, 0.0);
        let e = m.expm();
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-14);
        assert!((e[(0, 1)].re + t.sin()).abs() < 1e-14);
        assert!(e.max_abs() < 1.0 + 1e-12);
    }

    #[test]
    fn expm_matches_eig_reconstruction() {
        // for a diagonalizable matrix, exp(A) = V exp(w) V⁻¹; compare entrywise
        let n = 4;
        let mut m = CMat::zeros(n);
        let mut seed = 1.0f64;
        for j in 0..n {
            for i in 0..n {
                seed = (seed * 997.0 + 13.0) % 101.0;
                m[(i, j)] = C64::new(seed / 101.0 - 0.5, (seed / 7.0) % 1.0 - 0.5);
            }
        }
        let e = m.expm();
        let (w, v) = m.eig().unwrap();
        // reconstruct exp via eigen-decomposition: solve V X = V diag(exp w)
        let mut rhs = CMat::zeros(n);
        for j in 0..n {
            let ew = w[j].exp();
            for i in 0..n {
                rhs[(i, j)] = v[(i, j)] * ew;
            }
        }
        v.solve_into(&mut rhs).unwrap();
        // rhs = exp(diag) in eigenbasis; bring back: E = V rhs' ... compare action on vectors instead
        let x: Vec<C64> = (0..n).map(|i| C64::new(1.0 + i as f64, -0.3)).collect();
        let lhs = e.mul_vec(&x);
        // eig route: y = V exp(w) V⁻¹ x
        let mut xm = CMat::zeros(n);
        for i in 0..n {
            xm[(i, 0)] = x[i];
        }
        v.solve_into(&mut xm).unwrap();
        for i in 0..n {
            let wi = w[i].exp();
            xm[(i, 0)] *= wi;
        }
        let rhs2 = v.mul_vec(&(0..n).map(|i| xm[(i, 0)]).collect::<Vec<_>>());
        for i in 0..n {
            assert!(
                (lhs[i] - rhs2[i]).norm() < 1e-10 * (1.0 + rhs2[i].norm()),
                "row {i}: {:?} vs {:?}",
                lhs[i],
                rhs2[i]
            );
        }
    }

    // ---- property-based checks ------------------------------------------

    fn arb_vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-10.0f64..10.0).prop_map(Vec3)
    }

    fn arb_mat3() -> impl Strategy<Value = Mat3> {
        prop::array::uniform3(prop::array::uniform3(-10.0f64..10.0)).prop_map(Mat3)
    }

    proptest! {
        #[test]
        fn prop_ten_vc_duality(a in arb_vec3()) {
            let back = vc(ten(a));
            prop_assert!((back - a).norm() <= 1e-13 * (1.0 + a.norm()));
        }

        #[test]
        fn prop_sym_commutator_identity(m in arb_mat3(), s in arb_mat3()) {
            // ½[A, S] = sym(AS) for antisymmetric A, symmetric S
            let a = m.skew();
            let s = s.sym();
            let lhs = commutator(a, s) * 0.5;
            let rhs = (a * s).sym();
            prop_assert!((lhs - rhs).max_abs() <= 1e-12 * (1.0 + a.max_abs() * s.max_abs()));
        }

        #[test]
        fn prop_commutator_trace_orthogonality(m in arb_mat3(), s in arb_mat3()) {
            // [M, S]:S = 0 for symmetric S
            let s = s.sym();
            let c = commutator(m, s);
            prop_assert!(c.inner(s).abs() <= 1e-11 * (1.0 + m.max_abs() * s.max_abs() * s.max_abs()));
        }

        #[test]
        fn prop_jacobi_reconstructs(m in arb_mat3()) {
            let s = m.sym();
            let (w, q) = s.sym_eigen();
            let rec = q * Mat3::diag(w[0], w[1], w[2]) * q.transpose();
            prop_assert!((rec - s).max_abs() <= 1e-12 * (1.0 + s.max_abs()));
        }
    }
}
