//! Simulation state: perturbations `(u, θ, K)` about the rigidly rotating
//! equilibrium, plus the constitutive stress and couple-stress tensors.
//!
//! The unknowns are band-limited fields: velocity `u` and angular velocity
//! `θ = ω − ω_eq` on the primary band `n`, and the microinertia deviation
//! `K = J − J_eq` on the doubled band `2n` (its evolution equation is purely
//! hyperbolic, so its spectrum widens relative to the dissipative unknowns).

use crate::field::{Matrix3, Scalar, SymTensor, Vector};
use crate::grid::Grid;
use crate::params::PhysParams;
use std::sync::Arc;

/// Perturbation state `(u, θ, K)`; `u, θ` live on band `n`, `K` on band `2n`.
#[derive(Clone, Debug)]
pub struct State {
    pub u: Vector,
    pub theta: Vector,
    pub k: SymTensor,
}

impl State {
    pub fn zeros(grid: &Arc<Grid>) -> State {
        State {
            u: Vector::zeros(grid, grid.band_primary()),
            theta: Vector::zeros(grid, grid.band_primary()),
            k: SymTensor::zeros(grid, grid.band_k()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    /// The planar microinertia component `a = (K₁₃, K₂₃)`.
    pub fn a(&self) -> [&Scalar; 2] {
        self.k.a_component()
    }

    /// The full angular velocity `ω = ω_eq + θ` (shifts the mean mode).
    pub fn omega_full(&self, params: &PhysParams) -> Vector {
        let mut omega = self.theta.clone();
        let m = omega.0[2].mean();
        omega.0[2].set_mean(m + params.tau_tilde());
        omega
    }

    /// Re-impose the constraint manifold: `u` divergence-free with zero mean,
    /// all fields inside their bands (projection is a no-op when already
    /// satisfied; steppers call this to stop drift from accumulating).
    pub fn enforce_constraints(&mut self) {
        let n = self.grid().band_primary();
        let n2 = self.grid().band_k();
        self.u.project(n);
        self.u.leray();
        self.u.zero_mean();
        self.theta.project(n);
        self.k.project(n2);
    }

    /// Sum of squared L² norms of the three fields (a cheap blow-up monitor).
    pub fn norm_l2_sq(&self) -> f64 {
        self.u.norm_l2_sq() + self.theta.norm_l2_sq() + self.k.norm_l2_sq()
    }

    pub fn scale(&mut self, s: f64) {
        self.u.scale(s);
        self.theta.scale(s);
        self.k.scale(s);
    }

    pub fn axpy_tangent(&mut self, s: f64, t: &Tangent) {
        self.u.axpy(s, &t.du);
        self.theta.axpy(s, &t.dtheta);
        self.k.axpy(s, &t.dk);
    }

    pub fn axpy_state(&mut self, s: f64, other: &State) {
        self.u.axpy(s, &other.u);
        self.theta.axpy(s, &other.theta);
        self.k.axpy(s, &other.k);
    }

    /// L² distance to another state, summed over all three fields.
    pub fn distance(&self, other: &State) -> f64 {
        let mut d = self.clone();
        d.axpy_state(-1.0, other);
        d.norm_l2_sq().sqrt()
    }
}

/// One time-derivative of a `State` (same ranks and bands).
#[derive(Clone, Debug)]
pub struct Tangent {
    pub du: Vector,
    pub dtheta: Vector,
    pub dk: SymTensor,
}

impl Tangent {
    pub fn zeros(grid: &Arc<Grid>) -> Tangent {
        Tangent {
            du: Vector::zeros(grid, grid.band_primary()),
            dtheta: Vector::zeros(grid, grid.band_primary()),
            dk: SymTensor::zeros(grid, grid.band_k()),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.du.scale(s);
        self.dtheta.scale(s);
        self.dk.scale(s);
    }

    pub fn axpy(&mut self, s: f64, other: &Tangent) {
        self.du.axpy(s, &other.du);
        self.dtheta.axpy(s, &other.dtheta);
        self.dk.axpy(s, &other.dk);
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.du.norm_l2_sq() + self.dtheta.norm_l2_sq() + self.dk.norm_l2_sq()
    }
}

/// Cauchy stress `T = μ(∇u + ∇uᵀ) + κ·ten(½∇×u − ω) − p I`.
///
/// The symmetric part carries the Newtonian response, the skew part the
/// coupling between bulk rotation and the angular velocity.
pub fn stress_tensor(u: &Vector, p: &Scalar, omega: &Vector, params: &PhysParams) -> Matrix3 {
    let mut t = u.deformation().to_matrix();
    t.scale(params.mu);
    let mut w = u.curl();
    w.scale(0.5);
    w.axpy(-1.0, omega);
    t.axpy(params.kappa, &w.ten_field());
    t.add_scaled_diag(-1.0, p);
    t
}

/// Couple stress `M = α(∇·ω) I + β 𝔻⁰ω + γ·ten(∇×ω)`.
pub fn couple_stress(omega: &Vector, params: &PhysParams) -> Matrix3 {
    let mut m = omega.deformation_tracefree().to_matrix();
    m.scale(params.beta);
    m.add_scaled_diag(params.alpha, &omega.div());
    m.axpy(params.gamma, &omega.curl().ten_field());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::Vec3;
    use rand::SeedableRng;

    fn setup() -> (Arc<Grid>, crate::fft::Fft3, PhysParams) {
        let g = Grid::new(2).unwrap();
        let f = crate::fft::Fft3::new(&g);
        (g, f, PhysParams::unit_oblate())
    }

    #[test]
    fn constant_omega_stress_is_kappa_ten() {
        // u = 0, p = 0, ω = c constant → T = −κ ten(c), vc(T) = −κ c
        let (g, _, params) = setup();
        let c = Vec3([0.3, -1.1, 0.7]);
        let u = Vector::zeros(&g, g.band_primary());
        let p = Scalar::zeros(&g, g.band_primary());
        let mut omega = Vector::zeros(&g, g.band_primary());
        for i in 0..3 {
            omega.0[i].set_mean(c.0[i]);
        }
        let t = stress_tensor(&u, &p, &omega, &params);
        let vct = t.vc();
        for i in 0..3 {
            assert!((vct.0[i].mean() + params.kappa * c.0[i]).abs() < 1e-14);
            // purely a mean-mode tensor
            assert!((vct.0[i].norm_l2_sq() - vct.0[i].mean().powi(2)).abs() < 1e-14);
        }
        // antisymmetric: trace vanishes, symmetric part vanishes
        assert!(t.trace().norm_l2() < 1e-14);
        let mut sym = t.clone();
        sym.axpy(1.0, &t.transpose());
        assert!(sym.norm_l2_sq() < 1e-28);
    }

    #[test]
    fn constant_omega_couple_stress_vanishes() {
        let (g, _, params) = setup();
        let mut omega = Vector::zeros(&g, g.band_primary());
        omega.0[0].set_mean(2.0);
        omega.0[2].set_mean(-1.0);
        let m = couple_stress(&omega, &params);
        assert!(m.norm_l2_sq() < 1e-28);
    }

    #[test]
    fn stress_trace_is_minus_three_pressure() {
        let (g, _, params) = setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut u = Vector::zeros(&g, g.band_primary());
        u.fill_random(&mut rng);
        u.leray();
        u.zero_mean();
        let mut omega = Vector::zeros(&g, g.band_primary());
        omega.fill_random(&mut rng);
        let mut p = Scalar::zeros(&g, g.band_primary());
        p.fill_random(&mut rng);
        let t = stress_tensor(&u, &p, &omega, &params);
        // trace T = 2μ∇·u + 0 − 3p = −3p for divergence-free u
        let mut want = p.clone();
        want.scale(-3.0);
        let tr = t.trace();
        let err = {
            let mut d = tr.clone();
            d.axpy(-1.0, &want);
            d.norm_l2()
        };
        assert!(err <= 1e-10 * (1.0 + want.norm_l2()), "rel err {err}");
    }

    #[test]
    fn enforce_constraints_is_idempotent_and_kills_drift() {
        let (g, _, _) = setup();
        let mut z = State::zeros(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        z.u.fill_random(&mut rng);
        z.theta.fill_random(&mut rng);
        for s in &mut z.k.0 {
            s.fill_random(&mut rng);
        }
        z.enforce_constraints();
        assert!(z.u.div().norm_l2() < 1e-12 * (1.0 + z.u.norm_l2()));
        assert_eq!(z.u.mean(), [0.0; 3]);
        let snap = z.clone();
        z.enforce_constraints();
        assert!(
            (z.u.norm_l2_sq() - snap.u.norm_l2_sq()).abs() < 1e-15,
            "second application changed the state"
        );
    }
}
