//! Band-limited fields on the torus: scalars, 3-vectors, and symmetric 3×3
//! tensors stored as half-grid Fourier coefficients.
//!
//! Every field knows its band and keeps the crate invariant that coefficients
//! outside the band are exactly zero. Linear spectral operations (derivatives,
//! Laplacian inverse, band projection, Leray projection) act mode-by-mode;
//! pointwise products go through physical space (see the `product` module).

use crate::fft::Fft3;
use crate::grid::{Grid, Mode};
use crate::la::C64;
use rand::Rng;
use std::sync::Arc;

/// Symmetric-tensor slot order: diagonal first, then off-diagonal.
pub const SYM_SLOTS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
/// `SYM_IDX[i][j]` is the slot holding component `(i,j)`.
pub const SYM_IDX: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];
/// Slots carrying the planar component `a = (K₁₃, K₂₃)`.
pub const A_SLOTS: [usize; 2] = [4, 5];

/// A real scalar field stored spectrally on a band.
#[derive(Clone, Debug)]
pub struct Scalar {
    pub grid: Arc<Grid>,
    pub band: usize,
    pub c: Vec<C64>,
}

impl Scalar {
    pub fn zeros(grid: &Arc<Grid>, band: usize) -> Self {
        Scalar {
            grid: grid.clone(),
            band,
            c: vec![C64::new(0.0, 0.0); grid.spec_len()],
        }
    }

    /// Transform physical samples onto band `band` (higher modes truncated).
    pub fn from_phys(grid: &Arc<Grid>, band: usize, phys: &[f64], fft: &mut Fft3) -> Self {
        let mut s = Scalar::zeros(grid, band);
        fft.forward(phys, &mut s.c, band);
        s
    }

    pub fn to_phys(&self, phys: &mut [f64], fft: &mut Fft3) {
        fft.inverse(&self.c, phys, self.band);
    }

    pub fn modes(&self) -> Arc<Vec<Mode>> {
        self.grid.modes(self.band)
    }

    /// Zero all coefficients with `|k| > m`; the stored band shrinks to
    /// `min(band, m)`. Idempotent; self-adjoint in L².
    pub fn project(&mut self, m: usize) {
        if m >= self.band {
            return;
        }
        for mode in self.modes().iter() {
            if !self.grid.in_band(mode.k, m) {
                self.c[mode.idx] = C64::new(0.0, 0.0);
            }
        }
        self.band = m;
    }

    /// `∂^α` with spatial multi-index `α`: multiply mode `k` by `∏ (i·2πk_j)^{α_j}`.
    pub fn derivative(&self, alpha: [usize; 3]) -> Scalar {
        let mut out = Scalar::zeros(&self.grid, self.band);
        for mode in self.modes().iter() {
            let kappa = mode.kappa();
            let mut factor = C64::new(1.0, 0.0);
            for j in 0..3 {
                for _ in 0..alpha[j] {
                    factor *= C64::new(0.0, kappa[j]);
                }
            }
            out.c[mode.idx] = self.c[mode.idx] * factor;
        }
        out
    }

    /// Single first derivative `∂_j`.
    pub fn d(&self, j: usize) -> Scalar {
        let mut alpha = [0usize; 3];
        alpha[j] = 1;
        self.derivative(alpha)
    }

    /// Solve `−Δ p = self` (zero-mean convention: the k=0 mode maps to 0).
    pub fn neg_laplace_inv(&self) -> Scalar {
        let mut out = Scalar::zeros(&self.grid, self.band);
        for mode in self.modes().iter() {
            if mode.is_zero() {
                continue;
            }
            out.c[mode.idx] = self.c[mode.idx] / mode.kappa_sq();
        }
        out
    }

    /// L² inner product `∫ f g` (real fields, Parseval).
    pub fn inner(&self, other: &Scalar) -> f64 {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid));
        let small = self.band.min(other.band);
        self.grid
            .modes(small)
            .iter()
            .map(|m| m.weight * (self.c[m.idx] * other.c[m.idx].conj()).re)
            .sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.modes()
            .iter()
            .map(|m| m.weight * self.c[m.idx].norm_sqr())
            .sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// Squared H^s norm under the derivative-sum convention:
    /// `Σ_{|α|≤s} ‖∂^α f‖²_{L²}`.
    pub fn norm_hs_sq(&self, s: usize) -> f64 {
        self.modes()
            .iter()
            .map(|m| m.weight * sobolev_weight(m.kappa(), s) * self.c[m.idx].norm_sqr())
            .sum()
    }

    /// L^p norm by grid quadrature of the physical representation (p ∈ {1, ∞};
    /// use the spectral `norm_l2` for p = 2).
    pub fn norm_lp_grid(&self, p: LpKind, phys: &mut [f64], fft: &mut Fft3) -> f64 {
        self.to_phys(phys, fft);
        match p {
            LpKind::L1 => phys.iter().map(|v| v.abs()).sum::<f64>() / phys.len() as f64,
            LpKind::LInf => phys.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn mean(&self) -> f64 {
        self.c[self.grid.zero_mode()].re
    }

    pub fn set_mean(&mut self, v: f64) {
        self.c[self.grid.zero_mode()] = C64::new(v, 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.c {
            *z *= s;
        }
    }

    /// `self += s · other` (bands must agree or `onto` grows the result band).
    pub fn axpy(&mut self, s: f64, other: &Scalar) {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid));
        assert!(
            other.band <= self.band,
            "axpy would write outside the destination band"
        );
        for m in other.modes().iter() {
            self.c[m.idx] += other.c[m.idx] * s;
        }
    }

    /// Fill in-band modes with centered unit-variance Gaussian draws, made
    /// Hermitian-consistent on the k₁ = 0 plane (the field is real); the mean
    /// mode is a real draw.
    pub fn fill_random(&mut self, rng: &mut impl Rng) {
        use rand_distr::StandardNormal;
        let grid = self.grid.clone();
        for m in self.modes().iter() {
            if m.k[0] == 0 {
                // fill one representative of each conjugate pair
                if (m.k[1], m.k[2]) < (0, 0) {
                    continue;
                }
                if m.is_zero() {
                    let re: f64 = rng.sample(StandardNormal);
                    self.c[m.idx] = C64::new(re, 0.0);
                    continue;
                }
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let z = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
                self.c[m.idx] = z;
                let mirror =
                    grid.spec_idx(0, grid.index_of_k(-m.k[1]), grid.index_of_k(-m.k[2]));
                self.c[mirror] = z.conj();
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                self.c[m.idx] = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum LpKind {
    L1,
    LInf,
}

/// `Σ_{|α| ≤ s} κ^{2α}` — the Fourier multiplier of the H^s sum convention.
pub fn sobolev_weight(kappa: [f64; 3], s: usize) -> f64 {
    // sum over m ≤ s of the complete homogeneous symmetric polynomial h_m in
    // (κ₁², κ₂², κ₃²), built by the stars-and-bars recurrence
    let x = [kappa[0] * kappa[0], kappa[1] * kappa[1], kappa[2] * kappa[2]];
    let mut h = vec![0.0f64; s + 1]; // h[m] over the variables added so far
    h[0] = 1.0;
    for &xi in &x {
        // h_new[m] = Σ_{d≤m} h_old[m−d] xi^d  computed by the prefix recurrence
        for m in 1..=s {
            h[m] += h[m - 1] * xi;
        }
    }
    h.iter().sum()
}

/// A real 3-vector field.
#[derive(Clone, Debug)]
pub struct Vector(pub [Scalar; 3]);

impl Vector {
    pub fn zeros(grid: &Arc<Grid>, band: usize) -> Self {
        Vector(std::array::from_fn(|_| Scalar::zeros(grid, band)))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.0[0].grid
    }

    pub fn band(&self) -> usize {
        self.0[0].band
    }

    pub fn div(&self) -> Scalar {
        let mut out = self.0[0].d(0);
        out.axpy(1.0, &self.0[1].d(1));
        out.axpy(1.0, &self.0[2].d(2));
        out
    }

    pub fn curl(&self) -> Vector {
        let mut out = Vector::zeros(self.grid(), self.band());
        // (∇×v)_i = ε_{ijl} ∂_j v_l
        out.0[0] = self.0[2].d(1);
        out.0[0].axpy(-1.0, &self.0[1].d(2));
        out.0[1] = self.0[0].d(2);
        out.0[1].axpy(-1.0, &self.0[2].d(0));
        out.0[2] = self.0[1].d(0);
        out.0[2].axpy(-1.0, &self.0[0].d(1));
        out
    }

    pub fn laplacian(&self) -> Vector {
        Vector(std::array::from_fn(|i| {
            let f = &self.0[i];
            let mut out = Scalar::zeros(&f.grid, f.band);
            for m in f.modes().iter() {
                out.c[m.idx] = -f.c[m.idx] * m.kappa_sq();
            }
            out
        }))
    }

    /// Leray projection `v ↦ v − k (k·v̂)/|k|²` per mode; the k = 0 block is the
    /// identity (the velocity average is preserved).
    pub fn leray(&mut self) {
        let grid = self.grid().clone();
        for m in grid.modes(self.band()).iter() {
            if m.is_zero() {
                continue;
            }
            let kappa = m.kappa();
            let kv = self.0[0].c[m.idx] * kappa[0]
                + self.0[1].c[m.idx] * kappa[1]
                + self.0[2].c[m.idx] * kappa[2];
            let f = kv / m.kappa_sq();
            for j in 0..3 {
                self.0[j].c[m.idx] -= f * kappa[j];
            }
        }
    }

    pub fn project(&mut self, m: usize) {
        for s in &mut self.0 {
            s.project(m);
        }
    }

    pub fn inner(&self, other: &Vector) -> f64 {
        (0..3).map(|i| self.0[i].inner(&other.0[i])).sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.0.iter().map(Scalar::norm_l2_sq).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    pub fn norm_hs_sq(&self, s: usize) -> f64 {
        self.0.iter().map(|f| f.norm_hs_sq(s)).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for f in &mut self.0 {
            f.scale(s);
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Vector) {
        for i in 0..3 {
            self.0[i].axpy(s, &other.0[i]);
        }
    }

    pub fn mean(&self) -> [f64; 3] {
        [self.0[0].mean(), self.0[1].mean(), self.0[2].mean()]
    }

    pub fn zero_mean(&mut self) {
        for f in &mut self.0 {
            f.set_mean(0.0);
        }
    }

    pub fn fill_random(&mut self, rng: &mut impl Rng) {
        for f in &mut self.0 {
            f.fill_random(rng);
        }
    }
}

/// A general (not necessarily symmetric) real 3×3 matrix field, row-major.
#[derive(Clone, Debug)]
pub struct Matrix3(pub [[Scalar; 3]; 3]);

impl Matrix3 {
    pub fn zeros(grid: &Arc<Grid>, band: usize) -> Self {
        Matrix3(std::array::from_fn(|_| {
            std::array::from_fn(|_| Scalar::zeros(grid, band))
        }))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.0[0][0].grid
    }

    pub fn band(&self) -> usize {
        self.0[0][0].band
    }

    pub fn trace(&self) -> Scalar {
        let mut out = self.0[0][0].clone();
        out.axpy(1.0, &self.0[1][1]);
        out.axpy(1.0, &self.0[2][2]);
        out
    }

    /// Axial vector of the skew part: `vc(M)_j = ½ ε_{ijl} M_{il}`.
    pub fn vc(&self) -> Vector {
        let half = |a: &Scalar, b: &Scalar| {
            let mut s = a.clone();
            s.axpy(-1.0, b);
            s.scale(0.5);
            s
        };
        Vector([
            half(&self.0[2][1], &self.0[1][2]),
            half(&self.0[0][2], &self.0[2][0]),
            half(&self.0[1][0], &self.0[0][1]),
        ])
    }

    pub fn transpose(&self) -> Matrix3 {
        Matrix3(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[j][i].clone())
        }))
    }

    /// Row divergence `(∇·M)_i = ∂_l M_{il}`.
    pub fn div(&self) -> Vector {
        Vector(std::array::from_fn(|i| {
            let mut out = self.0[i][0].d(0);
            out.axpy(1.0, &self.0[i][1].d(1));
            out.axpy(1.0, &self.0[i][2].d(2));
            out
        }))
    }

    /// Frobenius pairing `∫ A : B`.
    pub fn inner(&self, other: &Matrix3) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.0[i][j].inner(&other.0[i][j]);
            }
        }
        acc
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn scale(&mut self, s: f64) {
        for row in &mut self.0 {
            for f in row {
                f.scale(s);
            }
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Matrix3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j].axpy(s, &other.0[i][j]);
            }
        }
    }

    /// `self += s · f · I`.
    pub fn add_scaled_diag(&mut self, s: f64, f: &Scalar) {
        for d in 0..3 {
            self.0[d][d].axpy(s, f);
        }
    }
}

impl Vector {
    /// Gradient tensor with rows indexed by component: `(∇v)_{il} = ∂_l v_i`.
    pub fn grad(&self) -> Matrix3 {
        Matrix3(std::array::from_fn(|i| {
            std::array::from_fn(|l| self.0[i].d(l))
        }))
    }

    /// The skew matrix field `ten(v)`, acting pointwise as `ten(v) w = v × w`.
    pub fn ten_field(&self) -> Matrix3 {
        let mut out = Matrix3::zeros(self.grid(), self.band());
        let neg = |f: &Scalar| {
            let mut g = f.clone();
            g.scale(-1.0);
            g
        };
        out.0[0][1] = neg(&self.0[2]);
        out.0[0][2] = self.0[1].clone();
        out.0[1][0] = self.0[2].clone();
        out.0[1][2] = neg(&self.0[0]);
        out.0[2][0] = neg(&self.0[1]);
        out.0[2][1] = self.0[0].clone();
        out
    }

    /// Symmetric deformation `𝔻v = ∇v + ∇vᵀ` as a symmetric tensor field.
    pub fn deformation(&self) -> SymTensor {
        SymTensor(std::array::from_fn(|s| {
            let (i, j) = SYM_SLOTS[s];
            let mut f = self.0[i].d(j);
            f.axpy(1.0, &self.0[j].d(i));
            f
        }))
    }

    /// Trace-free deformation `𝔻⁰v = 𝔻v − (2/3)(∇·v) I`.
    pub fn deformation_tracefree(&self) -> SymTensor {
        let mut d = self.deformation();
        let div = self.div();
        for s in 0..3 {
            d.0[s].axpy(-2.0 / 3.0, &div);
        }
        d
    }
}

/// A real symmetric 3×3 tensor field (six independent slots).
#[derive(Clone, Debug)]
pub struct SymTensor(pub [Scalar; 6]);

impl SymTensor {
    pub fn zeros(grid: &Arc<Grid>, band: usize) -> Self {
        SymTensor(std::array::from_fn(|_| Scalar::zeros(grid, band)))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.0[0].grid
    }

    pub fn band(&self) -> usize {
        self.0[0].band
    }

    pub fn slot(&self, i: usize, j: usize) -> &Scalar {
        &self.0[SYM_IDX[i][j]]
    }

    /// Row divergence `(∇·M)_i = ∂_l M_{il}` (rows and columns agree by symmetry).
    pub fn div(&self) -> Vector {
        Vector(std::array::from_fn(|i| {
            let mut out = self.slot(i, 0).d(0);
            out.axpy(1.0, &self.slot(i, 1).d(1));
            out.axpy(1.0, &self.slot(i, 2).d(2));
            out
        }))
    }

    pub fn trace(&self) -> Scalar {
        let mut out = self.0[0].clone();
        out.axpy(1.0, &self.0[1]);
        out.axpy(1.0, &self.0[2]);
        out
    }

    pub fn project(&mut self, m: usize) {
        for s in &mut self.0 {
            s.project(m);
        }
    }

    pub fn inner(&self, other: &SymTensor) -> f64 {
        // Frobenius pairing ∫ A:B — off-diagonal slots count twice
        (0..6)
            .map(|s| {
                let w = if s < 3 { 1.0 } else { 2.0 };
                w * self.0[s].inner(&other.0[s])
            })
            .sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// H^s norm of the tensor (Frobenius in the slots, derivative sum in space).
    pub fn norm_hs_sq(&self, s: usize) -> f64 {
        (0..6)
            .map(|sl| {
                let w = if sl < 3 { 1.0 } else { 2.0 };
                w * self.0[sl].norm_hs_sq(s)
            })
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        for f in &mut self.0 {
            f.scale(s);
        }
    }

    pub fn axpy(&mut self, s: f64, other: &SymTensor) {
        for i in 0..6 {
            self.0[i].axpy(s, &other.0[i]);
        }
    }

    /// The planar component `a = (K₁₃, K₂₃)` as two scalar fields.
    pub fn a_component(&self) -> [&Scalar; 2] {
        [&self.0[A_SLOTS[0]], &self.0[A_SLOTS[1]]]
    }

    pub fn to_matrix(&self) -> Matrix3 {
        Matrix3(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.slot(i, j).clone())
        }))
    }

    /// Pointwise sup of the matrix operator norm (max |eigenvalue|), by grid
    /// quadrature of the six physical slots.
    pub fn sup_opnorm(&self, fft: &mut Fft3) -> f64 {
        let n = self.grid().phys_len();
        let mut slots: Vec<Vec<f64>> = Vec::with_capacity(6);
        for s in &self.0 {
            let mut p = vec![0.0; n];
            s.to_phys(&mut p, fft);
            slots.push(p);
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            let m = crate::la::Mat3([
                [slots[0][i], slots[3][i], slots[4][i]],
                [slots[3][i], slots[1][i], slots[5][i]],
                [slots[4][i], slots[5][i], slots[2][i]],
            ]);
            let (w, _) = m.sym_eigen();
            worst = worst.max(w[0].abs()).max(w[2].abs());
        }
        worst
    }
}
