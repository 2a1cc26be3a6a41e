//! Right-hand sides of the perturbative system and their time derivatives.
//!
//! The unknowns `(u, θ, K)` measure the departure from the rigidly rotating
//! equilibrium `(0, ω_eq, J_eq)` with `ω_eq = τ̃ e₃` and `J_eq = diag(λ, λ, ν)`.
//! The governing equations are
//!
//! ```text
//! ∂t u = −P_L(u·∇u) + (μ+κ/2)Δu + κ∇×θ
//! (J_eq+K) ∂t θ = −(J_eq+K)(u·∇)θ − (ω_eq+θ)×(J_eq+K)(ω_eq+θ)
//!                 + κ∇×u − 2κθ + (α̃−γ̃)∇(∇·θ) + γ̃Δθ
//! ∂t K = −u·∇K + [Ω_eq+Θ, J_eq+K]
//! ```
//!
//! Quadratic and cubic products are evaluated on the physical grid, which the
//! grid's size guarantee keeps alias-free for every retained band; the
//! microinertia factor is inverted pointwise (it is symmetric positive
//! definite wherever the eigenvalue floor holds). Pressure is reconstructed
//! as the diagnostic by-product `p = −Δ⁻¹ ∇·(u·∇u)`.

use crate::fft::Fft3;
use crate::field::{Scalar, SymTensor, Vector};
use crate::grid::Grid;
use crate::la::{commutator, perp2, ten, Mat3, Vec3};
use crate::params::PhysParams;
use crate::product;
use crate::state::{State, Tangent};
use std::sync::Arc;

/// Failures of the nonlinear evaluators.
#[derive(Debug, thiserror::Error)]
pub enum DynError {
    #[error(
        "microinertia tensor lost its eigenvalue floor at grid point {point:?}: \
         λ_min(J_eq+K) = {lambda_min:.6e} ≤ floor {floor:.6e}"
    )]
    InertiaFloor {
        point: [usize; 3],
        lambda_min: f64,
        floor: f64,
    },
    #[error("temporal derivative order {requested} exceeds the configured maximum {max}")]
    TemporalOrder { requested: usize, max: usize },
}

/// Pointwise block form of the commutator `[ten(ω), J]` for symmetric `J`,
/// assembled from the planar data `ω̄, ω₃, J̄, a, J₃₃` rather than by matrix
/// multiplication:
///
/// ```text
/// ⎛ ω₃[R, J̄] − (ω̄^⊥⊗a + a⊗ω̄^⊥)   (J̄ − J₃₃I₂)ω̄^⊥ + ω₃a^⊥ ⎞
/// ⎝            (sym)                       2a·ω̄^⊥          ⎠
/// ```
///
/// with `R` the counterclockwise quarter turn in the plane.
pub fn commutator_block_form(omega: Vec3, j: Mat3) -> Mat3 {
    let w3 = omega.0[2];
    let op = perp2([omega.0[0], omega.0[1]]); // ω̄^⊥
    let a = [j.0[0][2], j.0[1][2]];
    let ap = perp2(a);
    let jb = [[j.0[0][0], j.0[0][1]], [j.0[1][0], j.0[1][1]]];
    let j33 = j.0[2][2];
    // [R, J̄] = RJ̄ − J̄R with R = [[0,−1],[1,0]]
    let rj_minus_jr = [
        [-jb[1][0] - jb[0][1], -jb[1][1] + jb[0][0]],
        [jb[0][0] - jb[1][1], jb[0][1] + jb[1][0]],
    ];
    let mut tl = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for l in 0..2 {
            tl[i][l] = w3 * rj_minus_jr[i][l] - (op[i] * a[l] + a[i] * op[l]);
        }
    }
    let col = [
        (jb[0][0] - j33) * op[0] + jb[0][1] * op[1] + w3 * ap[0],
        jb[1][0] * op[0] + (jb[1][1] - j33) * op[1] + w3 * ap[1],
    ];
    let corner = 2.0 * (a[0] * op[0] + a[1] * op[1]);
    Mat3([
        [tl[0][0], tl[0][1], col[0]],
        [tl[1][0], tl[1][1], col[1]],
        [col[0], col[1], corner],
    ])
}

/// The precession term split used throughout the energy estimates:
/// `(ω_eq+θ)×(J_eq+K)(ω_eq+θ) = (ω_eq+θ)×(J_eq+K)θ + θ×(J_eq+K)ω_eq + τ̃²ã^⊥`,
/// resting on `ω_eq×J_eqω_eq = 0` and `ω_eq×Kω_eq = τ̃²ã^⊥`. Returns the three
/// pieces of the right-hand side for a pointwise check.
pub fn precession_split(theta: Vec3, k: Mat3, params: &PhysParams) -> (Vec3, Vec3, Vec3) {
    let j_eq = params.j_eq();
    let omega_eq = params.omega_eq();
    let j = j_eq + k;
    let omega = omega_eq + theta;
    let first = omega.cross(j * theta);
    let second = theta.cross(j * omega_eq);
    let tt = params.tau_tilde() * params.tau_tilde();
    let ap = perp2([k.0[0][2], k.0[1][2]]);
    let third = Vec3([tt * ap[0], tt * ap[1], 0.0]);
    (first, second, third)
}

/// The full RHS evaluation, keeping the pre-projection pointwise inverse for
/// the temporal-derivative recursion.
pub struct RhsDetail {
    pub tangent: Tangent,
    pub pressure: Scalar,
    /// Grid values of `(J_eq+K)⁻¹ F` before band projection; the chain rule of
    /// the discrete flow differentiates through these, not their projection.
    dtheta_grid: [Vec<f64>; 3],
}

/// Evaluator for the perturbative right-hand side and its time derivatives.
///
/// Owns the transform plan; all methods are deterministic functions of the
/// state. `floor_fraction` configures the pointwise invertibility guard: the
/// evaluation aborts if `λ_min(J_eq+K) ≤ floor_fraction·λ` anywhere.
pub struct Evaluator {
    pub grid: Arc<Grid>,
    pub params: PhysParams,
    pub fft: Fft3,
    pub floor_fraction: f64,
    pub max_temporal_order: usize,
}

impl Evaluator {
    pub fn new(grid: &Arc<Grid>, params: PhysParams) -> Self {
        Evaluator {
            grid: grid.clone(),
            params,
            fft: Fft3::new(grid),
            floor_fraction: 0.5,
            max_temporal_order: 2,
        }
    }

    /// `∂t Z` and the pressure by-product.
    pub fn rhs_perturbative(&mut self, z: &State) -> Result<(Tangent, Scalar), DynError> {
        let d = self.rhs_detail(z)?;
        Ok((d.tangent, d.pressure))
    }

    /// `∂t a` assembled from its own planar equation
    /// `∂t a = −u·∇a − (ν−λ)θ̄^⊥ + (K̄−K₃₃I₂)θ̄^⊥ + τ̃a^⊥ + θ₃a^⊥`;
    /// must agree with the `(1,3), (2,3)` slots of the `K` equation.
    pub fn rhs_a(&mut self, z: &State) -> [Scalar; 2] {
        let g = self.grid.clone();
        let n2 = g.band_k();
        let p = self.params;
        let nl = p.nu - p.lambda;
        let tt = p.tau_tilde();
        let pu = self.sample_vector(&z.u);
        let pth = self.sample_vector(&z.theta);
        let pk = self.sample_sym(&z.k);
        let adv = [
            self.advection_grid(&pu, &z.k.0[4]),
            self.advection_grid(&pu, &z.k.0[5]),
        ];
        let npts = g.phys_len();
        let mut out = [vec![0.0; npts], vec![0.0; npts]];
        for i in 0..npts {
            let (t1, t2, t3) = (pth[0][i], pth[1][i], pth[2][i]);
            let (k11, k22, k33, k12) = (pk[0][i], pk[1][i], pk[2][i], pk[3][i]);
            let (a1, a2) = (pk[4][i], pk[5][i]);
            out[0][i] = -adv[0][i] + nl * t2 - (k11 - k33) * t2 + k12 * t1 - tt * a2 - t3 * a2;
            out[1][i] = -adv[1][i] - nl * t1 + (k22 - k33) * t1 - k12 * t2 + tt * a1 + t3 * a1;
        }
        [
            Scalar::from_phys(&g, n2, &out[0], &mut self.fft),
            Scalar::from_phys(&g, n2, &out[1], &mut self.fft),
        ]
    }

    /// `∂t^j Z` for `j = 1..=j_max`, by differentiating the discrete flow.
    pub fn temporal_derivatives(
        &mut self,
        z: &State,
        j_max: usize,
    ) -> Result<Vec<Tangent>, DynError> {
        if j_max > self.max_temporal_order {
            return Err(DynError::TemporalOrder {
                requested: j_max,
                max: self.max_temporal_order,
            });
        }
        let mut out = Vec::with_capacity(j_max);
        if j_max == 0 {
            return Ok(out);
        }
        let d1 = self.rhs_detail(z)?;
        out.push(d1.tangent.clone());
        if j_max >= 2 {
            out.push(self.second_derivative(z, &d1));
        }
        Ok(out)
    }

    pub fn rhs_detail(&mut self, z: &State) -> Result<RhsDetail, DynError> {
        let g = self.grid.clone();
        let n = g.band_primary();
        let n2 = g.band_k();
        let p = self.params;

        // velocity: −P_L P_n(u·∇u) + (μ+κ/2)Δu + κ∇×θ, pressure from the
        // unprojected divergence of the advection
        let adv_u = product::advect_vector(&z.u, &z.u, n, &mut self.fft);
        let pressure = adv_u.div().neg_laplace_inv();
        let mut du = adv_u;
        du.scale(-1.0);
        du.leray();
        du.axpy(p.mu_eff(), &z.u.laplacian());
        du.axpy(p.kappa, &z.theta.curl());
        du.zero_mean();

        // angular velocity: pointwise solve of (J_eq+K) dθ = F
        let pu = self.sample_vector(&z.u);
        let pth = self.sample_vector(&z.theta);
        let pk = self.sample_sym(&z.k);
        let padv = [
            self.advection_grid(&pu, &z.theta.0[0]),
            self.advection_grid(&pu, &z.theta.0[1]),
            self.advection_grid(&pu, &z.theta.0[2]),
        ];
        let lin = theta_linear(&z.u, &z.theta, &p);
        let plin = self.sample_vector(&lin);

        let npts = g.phys_len();
        let j_eq = p.j_eq();
        let omega_eq = p.omega_eq();
        let mut dth = [vec![0.0; npts], vec![0.0; npts], vec![0.0; npts]];
        for i in 0..npts {
            let kx = sym_at(&pk, i);
            let jm = j_eq + kx;
            self.inertia_guard(kx, jm, i)?;
            let om = omega_eq + vec_at(&pth, i);
            let f = vec_at(&plin, i) - jm * vec_at(&padv, i) - om.cross(jm * om);
            let x = jm.solve3(f).expect("guard guarantees invertibility");
            for c in 0..3 {
                dth[c][i] = x.0[c];
            }
        }
        let dtheta = Vector(std::array::from_fn(|c| {
            Scalar::from_phys(&g, n, &dth[c], &mut self.fft)
        }));

        // microinertia: −P_2n(u·∇K) + [Ω_eq+Θ, J_eq+K] pointwise
        let mut comm = std::array::from_fn::<_, 6, _>(|_| vec![0.0; npts]);
        for i in 0..npts {
            let kx = sym_at(&pk, i);
            let om = omega_eq + vec_at(&pth, i);
            let c = commutator(ten(om), j_eq + kx);
            store_sym(&c, &mut comm, i);
        }
        let mut dk = SymTensor(std::array::from_fn(|s| {
            Scalar::from_phys(&g, n2, &comm[s], &mut self.fft)
        }));
        let advk = product::advect_sym(&z.u, &z.k, n2, &mut self.fft);
        dk.axpy(-1.0, &advk);

        Ok(RhsDetail {
            tangent: Tangent { du, dtheta, dk },
            pressure,
            dtheta_grid: dth,
        })
    }

    /// `∂t² Z`: the exact derivative of the discrete flow at `z`, given the
    /// first derivative. The only non-Leibniz step is the pointwise inverse,
    /// which differentiates to `(J_eq+K)⁻¹ [∂tF − (∂tK)(J_eq+K)⁻¹F]`; the inner
    /// inverse is the saved unprojected grid solve.
    fn second_derivative(&mut self, z: &State, d1: &RhsDetail) -> Tangent {
        let g = self.grid.clone();
        let n = g.band_primary();
        let n2 = g.band_k();
        let p = self.params;
        let t1 = &d1.tangent;

        // u″ = −P_L P_n(du·∇u + u·∇du) + (μ+κ/2)Δdu + κ∇×dθ
        let mut ddu = product::advect_vector(&t1.du, &z.u, n, &mut self.fft);
        ddu.axpy(1.0, &product::advect_vector(&z.u, &t1.du, n, &mut self.fft));
        ddu.scale(-1.0);
        ddu.leray();
        ddu.axpy(p.mu_eff(), &t1.du.laplacian());
        ddu.axpy(p.kappa, &t1.dtheta.curl());
        ddu.zero_mean();

        // θ″ = (J_eq+K)⁻¹ [∂tF − dK·dθ_unprojected]
        let pu = self.sample_vector(&z.u);
        let pth = self.sample_vector(&z.theta);
        let pk = self.sample_sym(&z.k);
        let pdu = self.sample_vector(&t1.du);
        let pdth = self.sample_vector(&t1.dtheta);
        let pdk = self.sample_sym(&t1.dk);
        let padv_th = [
            self.advection_grid(&pu, &z.theta.0[0]),
            self.advection_grid(&pu, &z.theta.0[1]),
            self.advection_grid(&pu, &z.theta.0[2]),
        ];
        let padv_dth = [
            self.advection_grid(&pu, &t1.dtheta.0[0]),
            self.advection_grid(&pu, &t1.dtheta.0[1]),
            self.advection_grid(&pu, &t1.dtheta.0[2]),
        ];
        let pdadv_th = [
            self.advection_grid(&pdu, &z.theta.0[0]),
            self.advection_grid(&pdu, &z.theta.0[1]),
            self.advection_grid(&pdu, &z.theta.0[2]),
        ];
        let lin = theta_linear(&t1.du, &t1.dtheta, &p);
        let plin = self.sample_vector(&lin);

        let npts = g.phys_len();
        let j_eq = p.j_eq();
        let omega_eq = p.omega_eq();
        let mut ddth = [vec![0.0; npts], vec![0.0; npts], vec![0.0; npts]];
        let mut comm = std::array::from_fn::<_, 6, _>(|_| vec![0.0; npts]);
        for i in 0..npts {
            let kx = sym_at(&pk, i);
            let dkx = sym_at(&pdk, i);
            let jm = j_eq + kx;
            let om = omega_eq + vec_at(&pth, i);
            let dth_v = vec_at(&pdth, i);
            let dth_unproj = Vec3([
                d1.dtheta_grid[0][i],
                d1.dtheta_grid[1][i],
                d1.dtheta_grid[2][i],
            ]);
            let dprec =
                dth_v.cross(jm * om) + om.cross(dkx * om) + om.cross(jm * dth_v);
            let df = vec_at(&plin, i)
                - dkx * vec_at(&padv_th, i)
                - jm * (vec_at(&pdadv_th, i) + vec_at(&padv_dth, i))
                - dprec;
            let rhs = df - dkx * dth_unproj;
            let x = jm.solve3(rhs).expect("floor was verified by the first derivative");
            for c in 0..3 {
                ddth[c][i] = x.0[c];
            }
            // K″ commutator part: [ten(dθ), J_eq+K] + [ten(ω_eq+θ), dK]
            let c = commutator(ten(dth_v), jm) + commutator(ten(om), dkx);
            store_sym(&c, &mut comm, i);
        }
        let ddtheta = Vector(std::array::from_fn(|c| {
            Scalar::from_phys(&g, n, &ddth[c], &mut self.fft)
        }));
        let mut ddk = SymTensor(std::array::from_fn(|s| {
            Scalar::from_phys(&g, n2, &comm[s], &mut self.fft)
        }));
        ddk.axpy(-1.0, &product::advect_sym(&t1.du, &z.k, n2, &mut self.fft));
        ddk.axpy(-1.0, &product::advect_sym(&z.u, &t1.dk, n2, &mut self.fft));

        Tangent {
            du: ddu,
            dtheta: ddtheta,
            dk: ddk,
        }
    }

    fn inertia_guard(&self, kx: Mat3, jm: Mat3, idx: usize) -> Result<(), DynError> {
        let p = &self.params;
        let floor = self.floor_fraction * p.lambda;
        let base = p.lambda.min(p.nu);
        // cheap screen: λ_min(J_eq+K) ≥ min(λ,ν) − ‖K‖_F
        if base - kx.frobenius() > floor {
            return Ok(());
        }
        let (w, _) = jm.sym_eigen();
        if w[0] <= floor {
            let size = self.grid.size;
            return Err(DynError::InertiaFloor {
                point: [idx % size, (idx / size) % size, idx / (size * size)],
                lambda_min: w[0],
                floor,
            });
        }
        Ok(())
    }

    pub(crate) fn sample_scalar(&mut self, f: &Scalar) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.phys_len()];
        f.to_phys(&mut out, &mut self.fft);
        out
    }

    pub(crate) fn sample_vector(&mut self, v: &Vector) -> [Vec<f64>; 3] {
        std::array::from_fn(|i| self.sample_scalar(&v.0[i]))
    }

    pub(crate) fn sample_sym(&mut self, m: &SymTensor) -> [Vec<f64>; 6] {
        std::array::from_fn(|s| self.sample_scalar(&m.0[s]))
    }

    /// Grid values of `u·∇f` from pre-sampled velocity components.
    pub(crate) fn advection_grid(&mut self, pu: &[Vec<f64>; 3], f: &Scalar) -> Vec<f64> {
        let npts = self.grid.phys_len();
        let mut acc = vec![0.0; npts];
        let mut buf = vec![0.0; npts];
        for j in 0..3 {
            f.d(j).to_phys(&mut buf, &mut self.fft);
            for i in 0..npts {
                acc[i] += pu[j][i] * buf[i];
            }
        }
        acc
    }
}

/// The linear θ-terms `κ∇×u − 2κθ + (α̃−γ̃)∇(∇·θ) + γ̃Δθ` (linear in `(u, θ)`
/// jointly, so it doubles as its own derivative under the Leibniz recursion).
fn theta_linear(u: &Vector, theta: &Vector, p: &PhysParams) -> Vector {
    let mut lin = u.curl();
    lin.scale(p.kappa);
    lin.axpy(-2.0 * p.kappa, theta);
    let divth = theta.div();
    let graddiv = Vector(std::array::from_fn(|j| divth.d(j)));
    lin.axpy(p.alpha_tilde() - p.gamma_tilde(), &graddiv);
    lin.axpy(p.gamma_tilde(), &theta.laplacian());
    lin
}

pub(crate) fn sym_at(pk: &[Vec<f64>; 6], i: usize) -> Mat3 {
    Mat3([
        [pk[0][i], pk[3][i], pk[4][i]],
        [pk[3][i], pk[1][i], pk[5][i]],
        [pk[4][i], pk[5][i], pk[2][i]],
    ])
}

pub(crate) fn vec_at(pv: &[Vec<f64>; 3], i: usize) -> Vec3 {
    Vec3([pv[0][i], pv[1][i], pv[2][i]])
}

pub(crate) fn store_sym(m: &Mat3, bufs: &mut [Vec<f64>; 6], i: usize) {
    bufs[0][i] = m.0[0][0];
    bufs[1][i] = m.0[1][1];
    bufs[2][i] = m.0[2][2];
    bufs[3][i] = m.0[0][1];
    bufs[4][i] = m.0[0][2];
    bufs[5][i] = m.0[1][2];
}
