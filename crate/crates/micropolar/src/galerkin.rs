//! Band-limited solver for the perturbative system: the inertia operator
//! restricted to the band, the fully projected right-hand side, fourth-order
//! time steppers (classic and integrating-factor), and initial-data builders.
//!
//! The solved system keeps `(u, θ)` on band `n` and `K` on band `2n`:
//!
//! ```text
//!   ∂t u = −P_n P_L(u·∇u) + (μ+κ/2)Δu + κ∇×θ
//!   T_n(K) ∂t θ = −P_n[(J_eq+K)(u·∇)θ] − P_n[(ω_eq+θ)×(J_eq+K)θ]
//!                 − τ̃²ã^⊥ − θ×J_eq ω_eq − P_n[θ×Kω_eq] + 2vc T(u,θ) + (∇·M)(θ)
//!   ∂t K = [Θ, J_eq] + [Ω_eq, K] − P_2n(u·∇K) + P_2n([Θ, K])
//! ```
//!
//! where `T_n(K) v = J_eq v + P_n(K v)` is self-adjoint and positive on the
//! band whenever `sup_x ‖K(x)‖ < λ/2`. Every product is evaluated with exact
//! dealiasing; the worst case `P_n(K · P_2n(u·∇θ))` is what sizes the grid.

use crate::dynamics::{store_sym, sym_at, vec_at};
use crate::fft::Fft3;
use crate::field::{Scalar, SymTensor, Vector, A_SLOTS, SYM_IDX, SYM_SLOTS};
use crate::grid::{Grid, GridError, Mode};
use crate::la::{commutator, outer, ten, Mat3};
use crate::params::PhysParams;
use crate::product;
use crate::state::{couple_stress, stress_tensor, State, Tangent};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GalerkinError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(
        "inertia perturbation too large for the band operator: \
         sup‖K(x)‖ = {sup:.6e} ≥ λ/2 = {bound:.6e}"
    )]
    InertiaBound { sup: f64, bound: f64 },
    #[error(
        "conjugate gradient stalled after {iterations} iterations: \
         relative residual {residual:.3e} > tol {tol:.3e}"
    )]
    CgStall {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error(
        "initial data outside the admissible ball: \
         sup‖K₀(x)‖ = {sup:.6e} ≥ min(λ/2, ν−λ) = {bound:.6e}"
    )]
    AmplitudeBound { sup: f64, bound: f64 },
    #[error("time step {dt} does not evenly divide the horizon {t_end}")]
    BadHorizon { dt: f64, t_end: f64 },
}

/// Time integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    /// Classic explicit Runge–Kutta; stable only while `dt · μ_eff(2πn)²` and
    /// the angular-diffusion analogue stay below ≈ 2.8.
    Rk4,
    /// Lawson scheme: the stiff constant-coefficient diffusion/relaxation
    /// block is integrated exactly by per-mode exponentials, the remainder by
    /// the classic tableau. Unconditionally stable on the linear part.
    #[default]
    IntegratingFactorRk4,
}

/// Discretization and run-control knobs. `n` is the velocity band; the grid
/// size and the microinertia band `2n` follow from it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GalerkinConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub stepper: Stepper,
    /// record a snapshot every this many time units (endpoints always kept)
    pub snapshot_every: Option<f64>,
    /// relative residual target for the band-operator inversion
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// halt the run when `‖K‖_{H³}` exceeds this
    pub blowup_threshold: f64,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        GalerkinConfig {
            n: 8,
            dt: 1e-3,
            t_end: 1.0,
            stepper: Stepper::IntegratingFactorRk4,
            snapshot_every: None,
            cg_tol: 1e-10,
            cg_max_iter: 500,
            blowup_threshold: 1e3,
        }
    }
}

/// The band-restricted inertia operator `T_n(K) v = J_eq v + P_n(K v)`.
///
/// Construction samples `K` to the grid once (reused by every apply) and
/// checks the positivity margin `sup_x ‖K(x)‖ < λ/2`; a cheap Frobenius bound
/// screens the grid before any exact eigenvalue work.
pub struct TnOperator {
    grid: Arc<Grid>,
    band: usize,
    j_diag: [f64; 3],
    k_phys: [Vec<f64>; 6],
}

impl TnOperator {
    pub fn new(
        params: &PhysParams,
        k: &SymTensor,
        fft: &mut Fft3,
    ) -> Result<TnOperator, GalerkinError> {
        let grid = k.grid().clone();
        let band = grid.band_primary();
        assert!(grid.product_safe(k.band(), band, band));
        let npts = grid.phys_len();
        let mut k_phys: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
        for s in 0..6 {
            k.0[s].to_phys(&mut k_phys[s], fft);
        }

        let bound = params.lambda / 2.0;
        let mut frob_max = 0.0f64;
        for i in 0..npts {
            let mut f = 0.0;
            for s in 0..6 {
                let w = if s < 3 { 1.0 } else { 2.0 };
                f += w * k_phys[s][i] * k_phys[s][i];
            }
            frob_max = frob_max.max(f);
        }
        if frob_max.sqrt() >= bound {
            // the Frobenius screen is only an upper bound; measure exactly
            let mut sup = 0.0f64;
            for i in 0..npts {
                let (eigs, _) = sym_at(&k_phys, i).sym_eigen();
                sup = sup.max(eigs[0].abs()).max(eigs[2].abs());
            }
            if sup >= bound {
                return Err(GalerkinError::InertiaBound { sup, bound });
            }
        }

        Ok(TnOperator {
            grid,
            band,
            j_diag: [params.lambda, params.lambda, params.nu],
            k_phys,
        })
    }

    /// `T_n(K) v = J_eq v + P_n(K v)`, dealiased exactly.
    pub fn apply(&self, v: &Vector, fft: &mut Fft3) -> Vector {
        let npts = self.grid.phys_len();
        let mut pv: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; npts]);
        for j in 0..3 {
            v.0[j].to_phys(&mut pv[j], fft);
        }
        let mut acc: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; npts]);
        for i in 0..3 {
            for j in 0..3 {
                let slot = &self.k_phys[SYM_IDX[i][j]];
                let out = &mut acc[i];
                let col = &pv[j];
                for x in 0..npts {
                    out[x] += slot[x] * col[x];
                }
            }
        }
        Vector(std::array::from_fn(|i| {
            let mut f = Scalar::from_phys(&self.grid, self.band, &acc[i], fft);
            f.axpy(self.j_diag[i], &v.0[i]);
            f
        }))
    }

    fn jacobi(&self, r: &Vector) -> Vector {
        Vector(std::array::from_fn(|i| {
            let mut z = r.0[i].clone();
            z.scale(1.0 / self.j_diag[i]);
            z
        }))
    }

    /// Solve `T_n(K) x = f` by preconditioned conjugate gradients with the
    /// `J_eq⁻¹` (Jacobi) preconditioner. Returns only after verifying the true
    /// residual `‖T_n x − f‖ ≤ tol·‖f‖`.
    pub fn invert(
        &self,
        f: &Vector,
        tol: f64,
        max_iter: usize,
        fft: &mut Fft3,
    ) -> Result<Vector, GalerkinError> {
        let norm_f = f.norm_l2_sq().sqrt();
        if norm_f == 0.0 {
            return Ok(Vector::zeros(&self.grid, self.band));
        }
        let target = tol * norm_f;

        let mut x = self.jacobi(f);
        let mut r = f.clone();
        r.axpy(-1.0, &self.apply(&x, fft));
        let mut z = self.jacobi(&r);
        let mut p = z.clone();
        let mut rz = r.inner(&z);

        let mut res = r.norm_l2_sq().sqrt();
        for _ in 0..max_iter {
            if res <= target {
                // recurrence residuals drift; certify against the operator
                let mut true_r = f.clone();
                true_r.axpy(-1.0, &self.apply(&x, fft));
                if true_r.norm_l2_sq().sqrt() <= target {
                    return Ok(x);
                }
                r = true_r;
                z = self.jacobi(&r);
                p = z.clone();
                rz = r.inner(&z);
            }
            let ap = self.apply(&p, fft);
            let alpha = rz / p.inner(&ap);
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            z = self.jacobi(&r);
            let rz_next = r.inner(&z);
            let beta = rz_next / rz;
            rz = rz_next;
            let mut p_next = z.clone();
            p_next.axpy(beta, &p);
            p = p_next;
            res = r.norm_l2_sq().sqrt();
        }
        Err(GalerkinError::CgStall {
            iterations: max_iter,
            residual: res / norm_f,
            tol,
        })
    }
}

/// Per-mode exponentials of the stiff constant-coefficient block, used by the
/// integrating-factor stepper. The velocity block is the scalar heat factor
/// `e^{−h μ_eff|κ|²}`; the angular block exponentiates
/// `B(k) = J_eq⁻¹[(γ̃|κ|² + 2κ)I + (α̃−γ̃)κκᵀ]` through the symmetric
/// similarity `e^{−hB} = J_eq^{-1/2} e^{−h J_eq^{-1/2} S J_eq^{-1/2}} J_eq^{1/2}`;
/// the microinertia block is the identity.
pub struct ExpTables {
    modes: Arc<Vec<Mode>>,
    u_full: Vec<f64>,
    u_half: Vec<f64>,
    th_full: Vec<Mat3>,
    th_half: Vec<Mat3>,
    /// the generator `B(k)` itself, for peeling the exponentiated part out of
    /// the full right-hand side
    th_gen: Vec<Mat3>,
}

#[derive(Clone, Copy)]
enum StepSize {
    Half,
    Full,
}

impl ExpTables {
    pub fn new(grid: &Arc<Grid>, params: &PhysParams, dt: f64) -> ExpTables {
        let modes = grid.modes(grid.band_primary());
        let mut t = ExpTables {
            modes: modes.clone(),
            u_full: Vec::with_capacity(modes.len()),
            u_half: Vec::with_capacity(modes.len()),
            th_full: Vec::with_capacity(modes.len()),
            th_half: Vec::with_capacity(modes.len()),
            th_gen: Vec::with_capacity(modes.len()),
        };
        let j_diag = [params.lambda, params.lambda, params.nu];
        for m in modes.iter() {
            let ks = m.kappa_sq();
            t.u_full.push((-dt * params.mu_eff() * ks).exp());
            t.u_half.push((-0.5 * dt * params.mu_eff() * ks).exp());
            let s = Self::damping_matrix(params, m.kappa(), ks);
            t.th_full.push(Self::exp_neg(&s, j_diag, dt));
            t.th_half.push(Self::exp_neg(&s, j_diag, 0.5 * dt));
            let mut b = s;
            for i in 0..3 {
                for j in 0..3 {
                    b.0[i][j] /= j_diag[i];
                }
            }
            t.th_gen.push(b);
        }
        t
    }

    /// `S(k) = (γ̃|κ|² + 2κ) I + (α̃−γ̃) κκᵀ` (symmetric positive definite).
    pub(crate) fn damping_matrix(params: &PhysParams, kappa: [f64; 3], kappa_sq: f64) -> Mat3 {
        let iso = params.gamma_tilde() * kappa_sq + 2.0 * params.kappa;
        let mut s = Mat3::diag(iso, iso, iso);
        let c = params.alpha_tilde() - params.gamma_tilde();
        for i in 0..3 {
            for j in 0..3 {
                s.0[i][j] += c * kappa[i] * kappa[j];
            }
        }
        s
    }

    /// `e^{−h J⁻¹S}` for diagonal `J` and symmetric `S`.
    fn exp_neg(s: &Mat3, j_diag: [f64; 3], h: f64) -> Mat3 {
        let d_inv_sqrt = Mat3::diag(
            1.0 / j_diag[0].sqrt(),
            1.0 / j_diag[1].sqrt(),
            1.0 / j_diag[2].sqrt(),
        );
        let d_sqrt = Mat3::diag(j_diag[0].sqrt(), j_diag[1].sqrt(), j_diag[2].sqrt());
        let m = d_inv_sqrt * *s * d_inv_sqrt;
        let (eigs, q) = m.sym_eigen();
        let mut e = Mat3::ZERO;
        for k in 0..3 {
            let col = q.column(k);
            let w = (-h * eigs[k]).exp();
            e = e + outer(col, col) * w;
        }
        d_inv_sqrt * e * d_sqrt
    }

    fn apply_fields(&self, size: StepSize, u: &mut Vector, th: &mut Vector) {
        let (ut, tt) = match size {
            StepSize::Half => (&self.u_half, &self.th_half),
            StepSize::Full => (&self.u_full, &self.th_full),
        };
        for (pos, m) in self.modes.iter().enumerate() {
            let idx = m.idx;
            let s = ut[pos];
            for i in 0..3 {
                u.0[i].c[idx] *= s;
            }
            let b = &tt[pos];
            let v = [th.0[0].c[idx], th.0[1].c[idx], th.0[2].c[idx]];
            for i in 0..3 {
                th.0[i].c[idx] = v[0] * b.0[i][0] + v[1] * b.0[i][1] + v[2] * b.0[i][2];
            }
        }
    }

    fn apply_state(&self, size: StepSize, z: &mut State) {
        let (u, th) = (&mut z.u, &mut z.theta);
        self.apply_fields(size, u, th);
    }

    fn apply_tangent(&self, size: StepSize, t: &mut Tangent) {
        let (u, th) = (&mut t.du, &mut t.dtheta);
        self.apply_fields(size, u, th);
    }
}

/// Records a halted run: the guard that fired and where.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    /// `‖K‖_{H³}` crossed the configured threshold at time `t`.
    BlownUp { t: f64, h3_norm: f64 },
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub state: State,
}

#[derive(Debug)]
pub struct SimResult {
    pub final_state: State,
    pub t_final: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub outcome: Outcome,
}

/// Kinds of initial data. All kinds draw from a seeded generator, scale each
/// field to the requested amplitude in L², and enforce the constraints.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitialData {
    /// every field random on the given band (velocity solenoidal, mean-free)
    RandomBand { band: usize },
    /// all fields concentrated on one wavevector with random polarizations
    SingleMode { k: [i32; 3] },
    /// microinertia from a tilted axis field `n₀ = normalize(e₃ + amp·w)`,
    /// i.e. `K₀ = ν n₀⊗n₀ + λ(I − n₀⊗n₀) − J_eq`; velocity and spin random
    TiltAxis { band: usize },
}

/// Construction diagnostics returned alongside the initial state.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InitialDataReport {
    /// measured `sup_x ‖K₀(x)‖` (operator norm)
    pub k_sup: f64,
    /// tilt-axis only: max deviation of the pointwise spectrum of `J_eq+K₀`
    /// from `{λ, λ, ν}` before band projection (construction roundoff)
    pub tilt_eig_dev_pre: Option<f64>,
    /// tilt-axis only: the same deviation after projecting `K₀` to band `2n`
    pub tilt_eig_dev_post: Option<f64>,
}

/// Fourth-order pseudo-spectral integrator for one grid/parameter pair.
pub struct Solver {
    grid: Arc<Grid>,
    params: PhysParams,
    cfg: GalerkinConfig,
    fft: Fft3,
    tables: ExpTables,
}

impl Solver {
    pub fn new(params: PhysParams, cfg: GalerkinConfig) -> Result<Solver, GalerkinError> {
        let grid = Grid::new(cfg.n)?;
        Ok(Solver::with_grid(&grid, params, cfg))
    }

    /// Build on an existing grid so states from several solvers (different
    /// steps or steppers, same discretization) stay interoperable.
    pub fn with_grid(grid: &Arc<Grid>, params: PhysParams, cfg: GalerkinConfig) -> Solver {
        assert_eq!(grid.band_primary(), cfg.n, "config band must match the grid");
        let fft = Fft3::new(grid);
        let tables = ExpTables::new(grid, &params, cfg.dt);
        Solver {
            grid: grid.clone(),
            params,
            cfg,
            fft,
            tables,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn config(&self) -> &GalerkinConfig {
        &self.cfg
    }

    pub fn fft(&mut self) -> &mut Fft3 {
        &mut self.fft
    }

    /// The fully projected right-hand side of the band-limited system.
    pub fn approximate_rhs(&mut self, z: &State) -> Result<Tangent, GalerkinError> {
        let tn = TnOperator::new(&self.params, &z.k, &mut self.fft)?;
        self.approximate_rhs_with(z, &tn)
    }

    fn approximate_rhs_with(
        &mut self,
        z: &State,
        tn: &TnOperator,
    ) -> Result<Tangent, GalerkinError> {
        let g = self.grid.clone();
        let n = g.band_primary();
        let n2 = g.band_k();
        let p = self.params;
        let (lam, nu) = (p.lambda, p.nu);
        let tau_t = p.tau_tilde();
        let j_diag = [lam, lam, nu];
        let fft = &mut self.fft;

        // velocity: −P_n P_L(u·∇u) + (μ+κ/2)Δu + κ∇×θ
        let mut du = product::advect_vector(&z.u, &z.u, n, fft);
        du.scale(-1.0);
        du.leray();
        du.axpy(p.mu_eff(), &z.u.laplacian());
        du.axpy(p.kappa, &z.theta.curl());
        du.zero_mean();

        // θ bracket, assembled term by term on band n
        let mut bracket = Vector::zeros(&g, n);

        // −P_n[(J_eq+K)(u·∇)θ]: the advection is exact on band 2n
        let adv_th = product::advect_vector(&z.u, &z.theta, n2, fft);
        bracket.axpy(-1.0, &product::sym_times_vector(&z.k, &adv_th, n, fft));
        for i in 0..3 {
            let mut f = adv_th.0[i].clone();
            f.project(n);
            bracket.0[i].axpy(-j_diag[i], &f);
        }

        // −P_n[(ω_eq+θ)×(J_eq+K)θ] with (J_eq+K)θ exact on band 2n
        let mut jk_th = product::sym_times_vector(&z.k, &z.theta, n2, fft);
        for i in 0..3 {
            jk_th.0[i].axpy(j_diag[i], &z.theta.0[i]);
        }
        // ω_eq×g = τ̃(−g₂, g₁, 0)
        for (i, src, sign) in [(0usize, 1usize, -1.0), (1, 0, 1.0)] {
            let mut f = jk_th.0[src].clone();
            f.project(n);
            bracket.0[i].axpy(-sign * tau_t, &f);
        }
        bracket.axpy(-1.0, &product::cross_product(&z.theta, &jk_th, n, fft));

        // −τ̃² ã^⊥ = (τ̃²a₂, −τ̃²a₁, 0), projected onto band n
        let a = z.k.a_component();
        for (i, src, sign) in [(0usize, 1usize, 1.0), (1, 0, -1.0)] {
            let mut f = a[src].clone();
            f.project(n);
            bracket.0[i].axpy(sign * tau_t * tau_t, &f);
        }

        // −θ×J_eq ω_eq = −ν τ̃ θ×e₃ = ν τ̃ (−θ₂, θ₁, 0)
        bracket.0[0].axpy(-nu * tau_t, &z.theta.0[1]);
        bracket.0[1].axpy(nu * tau_t, &z.theta.0[0]);

        // −P_n[θ×Kω_eq] with Kω_eq = τ̃ (K₁₃, K₂₃, K₃₃)
        let k_e3 = Vector(std::array::from_fn(|i| {
            let mut f = z.k.0[SYM_IDX[i][2]].clone();
            f.scale(tau_t);
            f
        }));
        bracket.axpy(-1.0, &product::cross_product(&z.theta, &k_e3, n, fft));

        // +2 vc T(u,θ) + (∇·M)(θ): the dissipative part, all linear
        let p0 = Scalar::zeros(&g, n);
        let t_vc = stress_tensor(&z.u, &p0, &z.theta, &p).vc();
        bracket.axpy(2.0, &t_vc);
        bracket.axpy(1.0, &couple_stress(&z.theta, &p).div());

        let dtheta = tn.invert(&bracket, self.cfg.cg_tol, self.cfg.cg_max_iter, fft)?;

        // microinertia: [Θ,J_eq] + [Ω_eq,K] − P_2n(u·∇K) + P_2n([Θ,K])
        let mut dk = product::advect_sym(&z.u, &z.k, n2, fft);
        dk.scale(-1.0);
        // [Θ, J_eq] feeds only the planar slots: (ν−λ)(θ₂, −θ₁)
        dk.0[A_SLOTS[0]].axpy(nu - lam, &z.theta.0[1]);
        dk.0[A_SLOTS[1]].axpy(-(nu - lam), &z.theta.0[0]);
        // [Ω_eq, K] slot by slot
        dk.0[0].axpy(-2.0 * tau_t, &z.k.0[3]);
        dk.0[1].axpy(2.0 * tau_t, &z.k.0[3]);
        dk.0[3].axpy(tau_t, &z.k.0[0]);
        dk.0[3].axpy(-tau_t, &z.k.0[1]);
        dk.0[4].axpy(-tau_t, &z.k.0[5]);
        dk.0[5].axpy(tau_t, &z.k.0[4]);
        // P_2n([Θ, K]) pointwise
        let npts = g.phys_len();
        let mut pth: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; npts]);
        for i in 0..3 {
            z.theta.0[i].to_phys(&mut pth[i], fft);
        }
        let mut pk: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
        for s in 0..6 {
            z.k.0[s].to_phys(&mut pk[s], fft);
        }
        let mut comm: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
        for i in 0..npts {
            let c = commutator(ten(vec_at(&pth, i)), sym_at(&pk, i));
            store_sym(&c, &mut comm, i);
        }
        for s in 0..6 {
            dk.0[s].axpy(1.0, &Scalar::from_phys(&g, n2, &comm[s], fft));
        }

        Ok(Tangent { du, dtheta, dk })
    }

    /// `N(Z)`: the full right-hand side minus the exponentiated block.
    fn stiff_remainder(&mut self, z: &State) -> Result<Tangent, GalerkinError> {
        let mut t = self.approximate_rhs(z)?;
        t.du.axpy(-self.params.mu_eff(), &z.u.laplacian());
        let modes = self.tables.modes.clone();
        for (pos, m) in modes.iter().enumerate() {
            let idx = m.idx;
            let b = &self.tables.th_gen[pos];
            let v = [
                z.theta.0[0].c[idx],
                z.theta.0[1].c[idx],
                z.theta.0[2].c[idx],
            ];
            for i in 0..3 {
                t.dtheta.0[i].c[idx] += v[0] * b.0[i][0] + v[1] * b.0[i][1] + v[2] * b.0[i][2];
            }
        }
        Ok(t)
    }

    /// Advance one step of length `cfg.dt`; constraints are re-enforced.
    pub fn step(&mut self, z: &State) -> Result<State, GalerkinError> {
        let mut out = match self.cfg.stepper {
            Stepper::Rk4 => self.step_rk4(z)?,
            Stepper::IntegratingFactorRk4 => self.step_if_rk4(z)?,
        };
        out.enforce_constraints();
        Ok(out)
    }

    fn step_rk4(&mut self, z: &State) -> Result<State, GalerkinError> {
        let dt = self.cfg.dt;
        let k1 = self.approximate_rhs(z)?;
        let mut s = z.clone();
        s.axpy_tangent(0.5 * dt, &k1);
        let k2 = self.approximate_rhs(&s)?;
        let mut s = z.clone();
        s.axpy_tangent(0.5 * dt, &k2);
        let k3 = self.approximate_rhs(&s)?;
        let mut s = z.clone();
        s.axpy_tangent(dt, &k3);
        let k4 = self.approximate_rhs(&s)?;
        let mut out = z.clone();
        out.axpy_tangent(dt / 6.0, &k1);
        out.axpy_tangent(dt / 3.0, &k2);
        out.axpy_tangent(dt / 3.0, &k3);
        out.axpy_tangent(dt / 6.0, &k4);
        Ok(out)
    }

    fn step_if_rk4(&mut self, z: &State) -> Result<State, GalerkinError> {
        let dt = self.cfg.dt;
        let a1 = self.stiff_remainder(z)?;

        let mut s2 = z.clone();
        s2.axpy_tangent(0.5 * dt, &a1);
        self.tables.apply_state(StepSize::Half, &mut s2);
        let a2 = self.stiff_remainder(&s2)?;

        let mut ez_half = z.clone();
        self.tables.apply_state(StepSize::Half, &mut ez_half);
        let mut s3 = ez_half;
        s3.axpy_tangent(0.5 * dt, &a2);
        let a3 = self.stiff_remainder(&s3)?;

        let mut ez_full = z.clone();
        self.tables.apply_state(StepSize::Full, &mut ez_full);
        let mut ea3 = a3;
        self.tables.apply_tangent(StepSize::Half, &mut ea3);
        let mut s4 = ez_full.clone();
        s4.axpy_tangent(dt, &ea3);
        let a4 = self.stiff_remainder(&s4)?;

        let mut out = ez_full;
        let mut ea1 = a1;
        self.tables.apply_tangent(StepSize::Full, &mut ea1);
        let mut ea2 = a2;
        self.tables.apply_tangent(StepSize::Half, &mut ea2);
        out.axpy_tangent(dt / 6.0, &ea1);
        out.axpy_tangent(dt / 3.0, &ea2);
        out.axpy_tangent(dt / 3.0, &ea3);
        out.axpy_tangent(dt / 6.0, &a4);
        Ok(out)
    }

    /// Run from `z0` to `t_end`, recording snapshots and watching the blow-up
    /// guard. The observer sees every accepted step `(step, t, state)`.
    pub fn simulate_observed(
        &mut self,
        z0: State,
        mut observe: impl FnMut(usize, f64, &State),
    ) -> Result<SimResult, GalerkinError> {
        let dt = self.cfg.dt;
        let t_end = self.cfg.t_end;
        let steps_f = t_end / dt;
        let steps = steps_f.round() as usize;
        if steps == 0 || (steps_f - steps as f64).abs() > 1e-8 * steps_f.max(1.0) {
            return Err(GalerkinError::BadHorizon { dt, t_end });
        }

        let mut z = z0;
        z.enforce_constraints();
        let mut snapshots = Vec::new();
        let mut last_recorded = usize::MAX;
        let mut record = |s: usize, t: f64, st: &State, out: &mut Vec<Snapshot>| {
            if last_recorded != s {
                out.push(Snapshot {
                    t,
                    state: st.clone(),
                });
                last_recorded = s;
            }
        };
        observe(0, 0.0, &z);
        record(0, 0.0, &z, &mut snapshots);
        let mut next_snap = self.cfg.snapshot_every.map(|e| e);

        let mut outcome = Outcome::Completed;
        let mut t_final = 0.0;
        let mut done = 0;
        for s in 1..=steps {
            z = self.step(&z)?;
            let t = s as f64 * dt;
            t_final = t;
            done = s;
            observe(s, t, &z);
            if let Some(next) = next_snap {
                if t + 0.5 * dt >= next {
                    record(s, t, &z, &mut snapshots);
                    next_snap = Some(next + self.cfg.snapshot_every.unwrap());
                }
            }
            let h3 = z.k.norm_hs_sq(3).sqrt();
            if h3 > self.cfg.blowup_threshold {
                outcome = Outcome::BlownUp { t, h3_norm: h3 };
                record(s, t, &z, &mut snapshots);
                break;
            }
        }
        record(done, t_final, &z, &mut snapshots);

        Ok(SimResult {
            final_state: z,
            t_final,
            steps: done,
            snapshots,
            outcome,
        })
    }

    pub fn simulate(&mut self, z0: State) -> Result<SimResult, GalerkinError> {
        self.simulate_observed(z0, |_, _, _| {})
    }

    /// Build a constrained initial state of the requested kind and amplitude.
    pub fn initial_data(
        &mut self,
        kind: &InitialData,
        amplitude: f64,
        seed: u64,
    ) -> Result<(State, InitialDataReport), GalerkinError> {
        let g = self.grid.clone();
        let n = g.band_primary();
        let n2 = g.band_k();
        let p = self.params;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut z = State::zeros(&g);
        let mut report = InitialDataReport {
            k_sup: 0.0,
            tilt_eig_dev_pre: None,
            tilt_eig_dev_post: None,
        };

        let fill_uv = |z: &mut State, band: usize, amp: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut u = Vector::zeros(&g, band.min(n));
            u.fill_random(rng);
            u.leray();
            u.zero_mean();
            z.u.axpy(amp / u.norm_l2_sq().sqrt(), &u);
            let mut th = Vector::zeros(&g, band.min(n));
            th.fill_random(rng);
            z.theta.axpy(amp / th.norm_l2_sq().sqrt(), &th);
        };

        match kind {
            InitialData::RandomBand { band } => {
                fill_uv(&mut z, *band, amplitude, &mut rng);
                let mut k = SymTensor::zeros(&g, (*band).min(n2));
                for s in 0..6 {
                    k.0[s].fill_random(&mut rng);
                }
                z.k.axpy(amplitude / k.norm_l2_sq().sqrt(), &k);
            }
            InitialData::SingleMode { k } => {
                assert!(*k != [0, 0, 0], "single-mode data needs a nonzero wavevector");
                assert!(g.in_band(*k, n), "wavevector outside the velocity band");
                let mut draw = |f: &mut Scalar| {
                    let v = num_complex::Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    set_mode(f, *k, v);
                };
                for i in 0..3 {
                    draw(&mut z.u.0[i]);
                    draw(&mut z.theta.0[i]);
                }
                z.u.leray();
                z.u.zero_mean();
                z.u.scale(amplitude / z.u.norm_l2_sq().sqrt());
                z.theta.scale(amplitude / z.theta.norm_l2_sq().sqrt());
                for s in 0..6 {
                    draw(&mut z.k.0[s]);
                }
                z.k.scale(amplitude / z.k.norm_l2_sq().sqrt());
            }
            InitialData::TiltAxis { band } => {
                fill_uv(&mut z, *band, amplitude, &mut rng);
                let (k0, pre, post) =
                    self.tilt_inertia(*band, amplitude, &mut rng)?;
                z.k = k0;
                report.tilt_eig_dev_pre = Some(pre);
                report.tilt_eig_dev_post = Some(post);
            }
        }
        z.enforce_constraints();

        let bound = (p.lambda / 2.0).min(p.nu - p.lambda);
        let sup = z.k.sup_opnorm(&mut self.fft);
        report.k_sup = sup;
        if sup >= bound {
            return Err(GalerkinError::AmplitudeBound { sup, bound });
        }
        Ok((z, report))
    }

    /// `K₀ = ν n₀⊗n₀ + λ(I−n₀⊗n₀) − J_eq` for `n₀ = normalize(e₃ + amp·w)`,
    /// projected to band `2n`. Returns the max pointwise deviation of the
    /// spectrum of `J_eq+K₀` from `{λ, λ, ν}` before and after projection.
    fn tilt_inertia(
        &mut self,
        band: usize,
        amplitude: f64,
        rng: &mut impl Rng,
    ) -> Result<(SymTensor, f64, f64), GalerkinError> {
        let g = self.grid.clone();
        let n2 = g.band_k();
        let p = self.params;
        let mut w = Vector::zeros(&g, band.min(g.band_primary()));
        w.fill_random(rng);
        w.scale(amplitude / w.norm_l2_sq().sqrt());

        let npts = g.phys_len();
        let mut pw: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; npts]);
        for i in 0..3 {
            w.0[i].to_phys(&mut pw[i], &mut self.fft);
        }
        let mut slots: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
        let mut target = [p.lambda, p.lambda, p.nu];
        target.sort_by(f64::total_cmp);
        let mut dev_pre = 0.0f64;
        for i in 0..npts {
            let v = [pw[0][i], pw[1][i], pw[2][i] + 1.0];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let n0 = [v[0] / norm, v[1] / norm, v[2] / norm];
            for (s, (a, b)) in SYM_SLOTS.iter().enumerate() {
                let e3 = ((*a == 2) as i32 * (*b == 2) as i32) as f64;
                slots[s][i] = (p.nu - p.lambda) * (n0[*a] * n0[*b] - e3);
            }
            dev_pre = dev_pre.max(Self::spectrum_dev(sym_at(&slots, i), p, target));
        }

        let k0 = SymTensor(std::array::from_fn(|s| {
            Scalar::from_phys(&g, n2, &slots[s], &mut self.fft)
        }));

        let mut back: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
        for s in 0..6 {
            k0.0[s].to_phys(&mut back[s], &mut self.fft);
        }
        let mut dev_post = 0.0f64;
        for i in 0..npts {
            dev_post = dev_post.max(Self::spectrum_dev(sym_at(&back, i), p, target));
        }
        Ok((k0, dev_pre, dev_post))
    }

    fn spectrum_dev(k: Mat3, p: PhysParams, target: [f64; 3]) -> f64 {
        let (eigs, _) = (p.j_eq() + k).sym_eigen();
        let mut d = 0.0f64;
        for i in 0..3 {
            d = d.max((eigs[i] - target[i]).abs());
        }
        d
    }
}

/// Write one Fourier coefficient, routing through the stored half-grid
/// representative and conjugating when the requested wavevector is mirrored.
pub fn set_mode(f: &mut Scalar, k: [i32; 3], v: num_complex::Complex64) {
    let g = f.grid.clone();
    assert!(g.in_band(k, f.band));
    let stored_rep = k[0] > 0
        || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] >= 0)));
    let (kk, vv) = if stored_rep {
        (k, v)
    } else {
        ([-k[0], -k[1], -k[2]], v.conj())
    };
    let idx = g.spec_idx(
        kk[0] as usize,
        g.index_of_k(kk[1]),
        g.index_of_k(kk[2]),
    );
    f.c[idx] = if kk == [0, 0, 0] {
        num_complex::Complex64::new(vv.re, 0.0)
    } else {
        vv
    };
    // the kx = 0 plane stores both halves of each conjugate pair explicitly
    if kk[0] == 0 && kk != [0, 0, 0] {
        let mirror = g.spec_idx(0, g.index_of_k(-kk[1]), g.index_of_k(-kk[2]));
        f.c[mirror] = vv.conj();
    }
}

/// Read one Fourier coefficient, conjugating through the half-grid mirror
/// when the requested wavevector has negative first component.
pub fn mode_coefficient(f: &Scalar, k: [i32; 3]) -> num_complex::Complex64 {
    let g = &f.grid;
    assert!(g.in_band(k, f.band));
    if k[0] >= 0 {
        f.c[g.spec_idx(k[0] as usize, g.index_of_k(k[1]), g.index_of_k(k[2]))]
    } else {
        f.c[g.spec_idx((-k[0]) as usize, g.index_of_k(-k[1]), g.index_of_k(-k[2]))].conj()
    }
}
