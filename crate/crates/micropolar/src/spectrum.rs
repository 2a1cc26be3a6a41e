//! Wavenumber-by-wavenumber spectral analysis of the linearized dynamics.
//!
//! Linearizing the perturbative system about the spinning equilibrium and
//! taking Fourier transforms block-diagonalizes the generator. Each lattice
//! wavenumber `k` carries an 8×8 complex block acting on the stacked
//! amplitudes `(û, θ̂, â)` — velocity, angular velocity, and the planar
//! inertia pair `a = (K₁₃, K₂₃)` — together with two wavenumber-independent
//! pieces that decouple completely: a 3×3 rotation block on the remaining
//! planar inertia components `(K₁₁, K₂₂, K₁₂)` whose spectrum is
//! `{0, ±2iτ̃}`, and a zero block freezing `K₃₃`.
//!
//! This module assembles those blocks ([`assemble_symbol`]), computes their
//! spectra over lattice scans ([`eigen_scan`]), tracks the least-damped
//! oscillatory eigenvalue pair shell by shell (its real part collapses toward
//! zero as `|k| → ∞`, so the generator has no spectral gap), and classifies
//! the equilibrium as linearly stable or unstable from the scan
//! ([`classify_stability`]). Matrix exponentials of the blocks serve as exact
//! mode-evolution oracles for the nonlinear solver at tiny amplitude.

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::galerkin::ExpTables;
use crate::grid::TWO_PI;
use crate::la::{CMat, LaError};
use crate::params::{InertiaShape, PhysParams};

/// Real parts within this tolerance of zero are treated as neutral when a
/// scan is turned into a stability verdict.
pub const STABILITY_TOL: f64 = 1e-9;

/// Imaginary parts below this are treated as real when picking the tracked
/// oscillatory pair.
const OSCILLATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SpectrumError {
    /// Stability classification needs distinct planar/axial inertia.
    #[error("microinertia eigenvalues coincide (λ = ν = {0}); no shape to classify")]
    DegenerateInertia(f64),
    #[error(transparent)]
    La(#[from] LaError),
}

// ---------------------------------------------------------------------------
// symbol assembly
// ---------------------------------------------------------------------------

/// Fourier symbol of the linearized generator at one lattice wavenumber.
///
/// `coupled` acts on the stacked amplitudes `(û, θ̂, â) ∈ C³×C³×C²` with the
/// divergence constraint already built in: the velocity rows are composed
/// with the projection `I − κκᵀ/|κ|²`, so the wave-parallel velocity
/// direction is annihilated exactly (the structural zero eigenvalue carried
/// by incompressibility at every `k ≠ 0`). The planar-inertia rotation block
/// and the frozen `K₃₃` component are stored separately; they are independent
/// of `k` and decoupled from everything else.
#[derive(Clone, Debug)]
pub struct SymbolMatrix {
    /// Integer wavenumber; the physical wavevector is `κ = 2πk`.
    pub k: [i32; 3],
    /// 8×8 complex block on `(û, θ̂, â)`.
    pub coupled: CMat,
    /// 3×3 real rotation block on `(K₁₁, K₂₂, K₁₂)`; eigenvalues `{0, ±2iτ̃}`.
    pub planar_inertia: [[f64; 3]; 3],
    /// Scalar block on `K₃₃` — identically zero: that component is frozen by
    /// the linear flow.
    pub axial_block: f64,
}

fn kappa_of(k: [i32; 3]) -> ([f64; 3], f64) {
    let kap = [
        TWO_PI * f64::from(k[0]),
        TWO_PI * f64::from(k[1]),
        TWO_PI * f64::from(k[2]),
    ];
    let ksq = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
    (kap, ksq)
}

/// Matrix of `v ↦ w×v`.
fn cross_matrix(w: [f64; 3]) -> [[f64; 3]; 3] {
    [
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ]
}

/// Build the symbol at integer wavenumber `k`.
///
/// Row content (`κ = 2πk`, `J_eq = diag(λ, λ, ν)`, `τ̃ = τ/2κ`):
///
/// * velocity: `û′ = P̂_L[−(μ+κ/2)|κ|² û + κ (iκ)×θ̂]`,
/// * angular velocity: `θ̂′ = J_eq⁻¹[κ (iκ)×û − S(κ)θ̂ + τ̃(λ−ν)(θ̂₂,−θ̂₁,0)
///   + τ̃²(â₂,−â₁,0)]` with `S(κ) = (γ̃|κ|²+2κ)I + (α̃−γ̃)κκᵀ` the symmetric
///   dissipative part,
/// * planar inertia pair: `â′ = ((ν−λ)θ̂₂ − τ̃â₂, −(ν−λ)θ̂₁ + τ̃â₁)`.
pub fn assemble_symbol(k: [i32; 3], p: &PhysParams) -> SymbolMatrix {
    let (kap, ksq) = kappa_of(k);
    let tau_t = p.tau_tilde();
    let (lam, nu) = (p.lambda, p.nu);
    let j_inv = [1.0 / lam, 1.0 / lam, 1.0 / nu];
    let curl = cross_matrix(kap);

    let mut b = CMat::zeros(8);

    // velocity rows, assembled raw and then composed with the projection
    let mut raw = [[C64::new(0.0, 0.0); 8]; 3];
    for i in 0..3 {
        raw[i][i] = C64::new(-p.mu_eff() * ksq, 0.0);
        for j in 0..3 {
            raw[i][3 + j] = C64::new(0.0, p.kappa * curl[i][j]);
        }
    }
    for i in 0..3 {
        for c in 0..8 {
            let mut v = raw[i][c];
            if ksq > 0.0 {
                let mut kdot = C64::new(0.0, 0.0);
                for l in 0..3 {
                    kdot += raw[l][c] * kap[l];
                }
                v -= kdot * (kap[i] / ksq);
            }
            b[(i, c)] = v;
        }
    }

    // angular-velocity rows
    let s = ExpTables::damping_matrix(p, kap, ksq);
    for i in 0..3 {
        for j in 0..3 {
            b[(3 + i, j)] = C64::new(0.0, j_inv[i] * p.kappa * curl[i][j]);
            b[(3 + i, 3 + j)] = C64::new(-j_inv[i] * s.0[i][j], 0.0);
        }
    }
    let precession = tau_t * (lam - nu);
    b[(3, 4)] += C64::new(j_inv[0] * precession, 0.0);
    b[(4, 3)] += C64::new(-j_inv[1] * precession, 0.0);
    b[(3, 7)] = C64::new(j_inv[0] * tau_t * tau_t, 0.0);
    b[(4, 6)] = C64::new(-j_inv[1] * tau_t * tau_t, 0.0);

    // planar inertia pair rows
    b[(6, 4)] = C64::new(nu - lam, 0.0);
    b[(7, 3)] = C64::new(-(nu - lam), 0.0);
    b[(6, 7)] = C64::new(-tau_t, 0.0);
    b[(7, 6)] = C64::new(tau_t, 0.0);

    let planar_inertia = [
        [0.0, 0.0, -2.0 * tau_t],
        [0.0, 0.0, 2.0 * tau_t],
        [tau_t, -tau_t, 0.0],
    ];
    SymbolMatrix {
        k,
        coupled: b,
        planar_inertia,
        axial_block: 0.0,
    }
}

fn sort_desc_re(w: &mut [C64]) {
    w.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
}

impl SymbolMatrix {
    /// Orthonormal real basis of the dynamically active subspace. For
    /// `k ≠ 0` the wave-parallel velocity direction is removed (it is
    /// annihilated by the projected rows and contributes the structural zero
    /// eigenvalue); at `k = 0` the whole velocity block decouples and the
    /// mean velocity, pinned to zero, is dropped.
    fn active_basis(&self) -> Vec<[f64; 8]> {
        let unit = |i: usize| {
            let mut e = [0.0f64; 8];
            e[i] = 1.0;
            e
        };
        if self.k == [0, 0, 0] {
            return (3..8).map(unit).collect();
        }
        let (kap, ksq) = kappa_of(self.k);
        let knorm = ksq.sqrt();
        let khat = [kap[0] / knorm, kap[1] / knorm, kap[2] / knorm];
        // axis least aligned with k, then two cross products for a basis of k⊥
        let axis = (0..3).min_by(|&a, &b| khat[a].abs().partial_cmp(&khat[b].abs()).unwrap()).unwrap();
        let mut e = [0.0f64; 3];
        e[axis] = 1.0;
        let c1 = [
            khat[1] * e[2] - khat[2] * e[1],
            khat[2] * e[0] - khat[0] * e[2],
            khat[0] * e[1] - khat[1] * e[0],
        ];
        let n1 = (c1[0] * c1[0] + c1[1] * c1[1] + c1[2] * c1[2]).sqrt();
        let t1 = [c1[0] / n1, c1[1] / n1, c1[2] / n1];
        let t2 = [
            khat[1] * t1[2] - khat[2] * t1[1],
            khat[2] * t1[0] - khat[0] * t1[2],
            khat[0] * t1[1] - khat[1] * t1[0],
        ];
        let embed = |v: [f64; 3]| {
            let mut e = [0.0f64; 8];
            e[..3].copy_from_slice(&v);
            e
        };
        let mut basis = vec![embed(t1), embed(t2)];
        basis.extend((3..8).map(unit));
        basis
    }

    /// The symbol restricted to the active subspace: a 7×7 block for
    /// `k ≠ 0`, a 5×5 block at `k = 0`. The structural zero eigenvalues
    /// enforced by incompressibility (and mean-velocity conservation at
    /// `k = 0`) are deflated away, leaving the spectrum that decides
    /// stability.
    pub fn deflated(&self) -> CMat {
        let basis = self.active_basis();
        let m = basis.len();
        let mut out = CMat::zeros(m);
        for (j, vj) in basis.iter().enumerate() {
            // image of the j-th basis vector under the coupled block
            let mut image = [C64::new(0.0, 0.0); 8];
            for (r, img) in image.iter_mut().enumerate() {
                for c in 0..8 {
                    *img += self.coupled[(r, c)] * vj[c];
                }
            }
            for (i, vi) in basis.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (r, img) in image.iter().enumerate() {
                    acc += *img * vi[r];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Spectrum of the deflated block, sorted by descending real part.
    pub fn deflated_eigenvalues(&self) -> Result<Vec<C64>, LaError> {
        let (mut w, _) = self.deflated().eig()?;
        sort_desc_re(&mut w);
        Ok(w)
    }

    /// Full eight-point spectrum of the coupled block: the deflated spectrum
    /// plus the structurally exact zero eigenvalues carried by the removed
    /// velocity directions.
    pub fn eigenvalues(&self) -> Result<Vec<C64>, LaError> {
        let mut w = self.deflated_eigenvalues()?;
        w.resize(8, C64::new(0.0, 0.0));
        sort_desc_re(&mut w);
        Ok(w)
    }

    /// The planar-inertia rotation block as a complex matrix.
    pub fn planar_inertia_block(&self) -> CMat {
        let mut m = CMat::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = C64::new(self.planar_inertia[i][j], 0.0);
            }
        }
        m
    }

    /// Exact time-`t` propagator `exp(t B̂(k))` of the coupled block — the
    /// mode-evolution oracle for tiny-amplitude runs.
    pub fn propagator(&self, t: f64) -> CMat {
        self.coupled.scale(C64::new(t, 0.0)).expm()
    }

    /// Exact time-`t` propagator of the planar-inertia rotation block.
    pub fn planar_propagator(&self, t: f64) -> CMat {
        self.planar_inertia_block().scale(C64::new(t, 0.0)).expm()
    }
}

// ---------------------------------------------------------------------------
// lattice scan
// ---------------------------------------------------------------------------

/// Stability verdict extracted from a lattice scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stability {
    /// Every scanned eigenvalue beyond the structural zeros decays.
    Stable,
    /// Witness wavenumber and the growth rate found there.
    Unstable { k: [i32; 3], growth_rate: f64 },
    /// Largest real part within tolerance of zero: the scan cannot tell.
    Inconclusive { max_re: f64 },
}

/// Spectrum of the symbol at one wavenumber, as recorded by a scan.
#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    pub k: [i32; 3],
    /// `|k|_∞` shell the wavenumber belongs to.
    pub shell: usize,
    /// Full eight-point spectrum, sorted by descending real part.
    pub eigenvalues: Vec<C64>,
    /// Largest real part over the deflated block (structural zeros excluded).
    pub max_re_deflated: f64,
    /// Tracked oscillatory pair: the least-damped eigenvalue with a genuine
    /// imaginary part, reported with nonnegative imaginary part.
    pub tracked: C64,
}

/// Per-shell summary of the tracked pair and the deflated real parts.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShellSummary {
    /// `|k|_∞` of the shell.
    pub shell: usize,
    /// Real part of the least-damped tracked pair in the shell.
    pub tracked_re: f64,
    /// Imaginary part (nonnegative member) of that pair.
    pub tracked_im: f64,
    /// Largest deflated real part over the shell.
    pub max_re: f64,
}

/// Result of an [`eigen_scan`]: per-wavenumber spectra plus the scan-wide
/// statistics the stability verdict is read from.
#[derive(Clone, Debug)]
pub struct SymbolSpectrum {
    pub k_max: i32,
    pub modes: Vec<ModeSpectrum>,
    /// Largest deflated real part over the whole scan.
    pub max_re: f64,
    /// Wavenumber realizing `max_re`.
    pub argmax_k: [i32; 3],
    /// Empirical bound on `|Im|` over the scan (the half-slab height).
    pub imag_bound: f64,
    /// Shell-by-shell tracked-pair summaries, shells `0..=k_max`.
    pub shells: Vec<ShellSummary>,
    /// Wavenumbers where the eigensolver failed (scan continues past them).
    pub failures: Vec<[i32; 3]>,
    pub verdict: Stability,
}

/// Flattening of the tracked pair between the first and outermost shells.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlatteningCheck {
    /// `|Re z|` of the tracked pair at shell 1.
    pub first_shell: f64,
    /// `|Re z|` of the tracked pair at the outermost shell.
    pub last_shell: f64,
    pub threshold: f64,
    /// Flattened: the outer value sits below both the inner value and the
    /// threshold, the no-spectral-gap signature.
    pub passed: bool,
}

fn pick_tracked(deflated: &[C64]) -> C64 {
    let mut best: Option<C64> = None;
    for z in deflated {
        if z.im.abs() > OSCILLATION_TOL {
            match best {
                Some(b) if b.re >= z.re => {}
                _ => best = Some(*z),
            }
        }
    }
    let z = best.unwrap_or_else(|| deflated[0]);
    if z.im < 0.0 {
        z.conj()
    } else {
        z
    }
}

/// Scan the lattice `|k|_∞ ≤ k_max`, eigendecompose the deflated symbol at
/// every wavenumber, and summarize: the scan-wide maximal real part (and its
/// witness), the empirical imaginary bound, the tracked pair per shell, and
/// the stability verdict. Solver failures at individual wavenumbers are
/// recorded and skipped.
pub fn eigen_scan(p: &PhysParams, k_max: i32) -> SymbolSpectrum {
    assert!(k_max >= 1, "scan needs at least the first shell");
    let side = (2 * k_max + 1) as usize;
    let mut modes = Vec::with_capacity(side * side * side);
    let mut failures = Vec::new();
    let mut max_re = f64::NEG_INFINITY;
    let mut argmax_k = [0i32; 3];
    let mut imag_bound = 0.0f64;

    for kx in -k_max..=k_max {
        for ky in -k_max..=k_max {
            for kz in -k_max..=k_max {
                let k = [kx, ky, kz];
                let sym = assemble_symbol(k, p);
                let deflated = match sym.deflated_eigenvalues() {
                    Ok(w) => w,
                    Err(_) => {
                        failures.push(k);
                        continue;
                    }
                };
                let mode_max = deflated.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                if mode_max > max_re {
                    max_re = mode_max;
                    argmax_k = k;
                }
                for z in &deflated {
                    imag_bound = imag_bound.max(z.im.abs());
                }
                let tracked = pick_tracked(&deflated);
                let mut eigenvalues = deflated;
                eigenvalues.resize(8, C64::new(0.0, 0.0));
                sort_desc_re(&mut eigenvalues);
                let shell = k.iter().map(|kj| kj.unsigned_abs() as usize).max().unwrap();
                modes.push(ModeSpectrum {
                    k,
                    shell,
                    eigenvalues,
                    max_re_deflated: mode_max,
                    tracked,
                });
            }
        }
    }

    let mut shells = Vec::with_capacity(k_max as usize + 1);
    for s in 0..=(k_max as usize) {
        let mut tracked_re = f64::NEG_INFINITY;
        let mut tracked_im = 0.0;
        let mut shell_max = f64::NEG_INFINITY;
        let mut seen = false;
        for m in modes.iter().filter(|m| m.shell == s) {
            seen = true;
            if m.tracked.re > tracked_re {
                tracked_re = m.tracked.re;
                tracked_im = m.tracked.im;
            }
            shell_max = shell_max.max(m.max_re_deflated);
        }
        if seen {
            shells.push(ShellSummary {
                shell: s,
                tracked_re,
                tracked_im,
                max_re: shell_max,
            });
        }
    }

    let verdict = if max_re > STABILITY_TOL {
        Stability::Unstable {
            k: argmax_k,
            growth_rate: max_re,
        }
    } else if max_re < -STABILITY_TOL {
        Stability::Stable
    } else {
        Stability::Inconclusive { max_re }
    };

    SymbolSpectrum {
        k_max,
        modes,
        max_re,
        argmax_k,
        imag_bound,
        shells,
        failures,
        verdict,
    }
}

impl SymbolSpectrum {
    /// Compare the tracked pair's damping at the outermost scanned shell with
    /// shell 1. `None` when the scan holds fewer than two shells.
    pub fn flattening(&self, threshold: f64) -> Option<FlatteningCheck> {
        let first = self.shells.iter().find(|s| s.shell == 1)?;
        let last = self.shells.last()?;
        if last.shell <= first.shell {
            return None;
        }
        let first_shell = first.tracked_re.abs();
        let last_shell = last.tracked_re.abs();
        Some(FlatteningCheck {
            first_shell,
            last_shell,
            threshold,
            passed: last_shell < first_shell && last_shell < threshold,
        })
    }
}

/// Write one CSV row per scanned wavenumber: the shell, the deflated maximum
/// real part, the tracked pair, and the eight eigenvalues (real and
/// imaginary parts), sorted by descending real part.
pub fn write_scan_csv<W: std::io::Write>(
    scan: &SymbolSpectrum,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "k1".to_string(),
        "k2".to_string(),
        "k3".to_string(),
        "shell".to_string(),
        "max_re_deflated".to_string(),
        "tracked_re".to_string(),
        "tracked_im".to_string(),
    ];
    for i in 0..8 {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    w.write_record(&header)?;
    for m in &scan.modes {
        let mut row = vec![
            m.k[0].to_string(),
            m.k[1].to_string(),
            m.k[2].to_string(),
            m.shell.to_string(),
            format!("{:.16e}", m.max_re_deflated),
            format!("{:.16e}", m.tracked.re),
            format!("{:.16e}", m.tracked.im),
        ];
        for z in &m.eigenvalues {
            row.push(format!("{:.16e}", z.re));
            row.push(format!("{:.16e}", z.im));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

/// Stability verdict cross-checked against the inertia shape.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub shape: InertiaShape,
    pub k_max: i32,
    pub max_re: f64,
    pub imag_bound: f64,
    pub verdict: Stability,
    /// Whether the scan agrees with the shape's prediction: oblate stable,
    /// oblong unstable.
    pub matches_theory: bool,
}

/// Run an [`eigen_scan`] and classify: oblate microstructure should scan
/// stable, oblong should produce a growing witness. Degenerate inertia
/// (`λ = ν`) has no shape to classify and is rejected.
pub fn classify_stability(
    p: &PhysParams,
    k_max: i32,
) -> Result<StabilityReport, SpectrumError> {
    if p.lambda == p.nu {
        return Err(SpectrumError::DegenerateInertia(p.lambda));
    }
    let scan = eigen_scan(p, k_max);
    let shape = p.shape();
    let matches_theory = matches!(
        (&scan.verdict, shape),
        (Stability::Stable, InertiaShape::Oblate)
            | (Stability::Unstable { .. }, InertiaShape::Oblong)
    );
    Ok(StabilityReport {
        shape,
        k_max,
        max_re: scan.max_re,
        imag_bound: scan.imag_bound,
        verdict: scan.verdict,
        matches_theory,
    })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{mode_coefficient, set_mode, GalerkinConfig, Outcome, Solver};
    use crate::state::State;
    use proptest::prelude::*;

    /// Greedy nearest-match distance between two eigenvalue multisets: the
    /// largest gap left after pairing each expected value with its closest
    /// remaining counterpart. Robust against the sort-order flips that
    /// solver-noise real parts cause on conjugate pairs.
    fn multiset_distance(got: &[C64], expect: &[C64]) -> f64 {
        assert_eq!(got.len(), expect.len());
        let mut remaining: Vec<C64> = got.to_vec();
        let mut worst = 0.0f64;
        for e in expect {
            let (idx, d) = remaining
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - e).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            worst = worst.max(d);
            remaining.swap_remove(idx);
        }
        worst
    }

    #[test]
    fn planar_inertia_block_spectrum_is_zero_plus_conjugate_oscillation() {
        for p in [
            PhysParams::unit_oblate(),
            PhysParams::new(0.3, 2.0, 0.7, 1.1, 0.9, 1.7, 0.8, 2.9).unwrap(),
        ] {
            let sym = assemble_symbol([2, -1, 3], &p);
            let (w, _) = sym.planar_inertia_block().eig().unwrap();
            let tt = p.tau_tilde();
            let expect = [
                C64::new(0.0, -2.0 * tt),
                C64::new(0.0, 0.0),
                C64::new(0.0, 2.0 * tt),
            ];
            let d = multiset_distance(&w, &expect);
            assert!(d < 1e-12, "planar spectrum off by {d}");
            assert_eq!(sym.axial_block, 0.0);
        }
    }

    #[test]
    fn zero_frequency_symbol_has_trivial_velocity_rows_and_exact_slow_spectrum() {
        let p = PhysParams::unit_oblate();
        let sym = assemble_symbol([0, 0, 0], &p);
        for i in 0..3 {
            for j in 0..8 {
                assert_eq!(sym.coupled[(i, j)], C64::new(0.0, 0.0));
            }
        }
        // full spectrum keeps the three conserved mean-velocity directions
        let full = sym.eigenvalues().unwrap();
        assert_eq!(full.len(), 8);
        assert!(full.iter().filter(|z| z.norm() < 1e-12).count() >= 3);

        // at zero frequency the (θ̄, ā) dynamics splits into two circular
        // sectors; with unit oblate constants the five deflated eigenvalues
        // are (−2±√3)/2 ± i/2 and −2κ/ν = −1 exactly
        let got = sym.deflated_eigenvalues().unwrap();
        let s3 = 3.0f64.sqrt();
        let expect = [
            C64::new((-2.0 + s3) / 2.0, 0.5),
            C64::new((-2.0 + s3) / 2.0, -0.5),
            C64::new((-2.0 - s3) / 2.0, 0.5),
            C64::new((-2.0 - s3) / 2.0, -0.5),
            C64::new(-1.0, 0.0),
        ];
        let d = multiset_distance(&got, &expect);
        assert!(d < 1e-12, "slow spectrum off by {d}");
    }

    #[test]
    fn oblate_scan_is_stable_with_no_growing_mode() {
        let p = PhysParams::unit_oblate();
        let scan = eigen_scan(&p, 4);
        assert_eq!(scan.verdict, Stability::Stable);
        assert!(scan.failures.is_empty());
        assert_eq!(scan.modes.len(), 9 * 9 * 9);
        // every deflated eigenvalue decays, well beyond solver noise
        assert!(scan.max_re <= 1e-10, "max Re = {}", scan.max_re);
        assert!(scan.max_re < 0.0);
        // the half-slab height stays of order one
        assert!(scan.imag_bound < 10.0, "imag bound = {}", scan.imag_bound);
    }

    #[test]
    fn oblong_scan_reports_a_growing_witness() {
        let p = PhysParams::unit_oblate().swapped_inertia();
        // closed-form growth rate of the zero-frequency circular sector:
        // eigenvalues of [[−1−i/4, −i/8], [i, i/2]]
        let tr = C64::new(-1.0, 0.25);
        let det = C64::new(0.0, -0.5);
        let growth = ((tr + (tr * tr - det * 4.0).sqrt()) / 2.0).re;
        assert!(growth > 0.08 && growth < 0.09);

        let scan = eigen_scan(&p, 2);
        match scan.verdict {
            Stability::Unstable { k, growth_rate } => {
                assert!(growth_rate >= growth - 1e-12);
                let zero_mode = scan.modes.iter().find(|m| m.k == [0, 0, 0]).unwrap();
                assert!(
                    (zero_mode.max_re_deflated - growth).abs() < 1e-12,
                    "zero-frequency growth {} vs closed form {}",
                    zero_mode.max_re_deflated,
                    growth
                );
                // the witness shell carries at least that growth
                assert!(k.iter().all(|kj| kj.abs() <= 2));
            }
            v => panic!("expected an unstable verdict, got {v:?}"),
        }
    }

    #[test]
    fn tracked_pair_flattens_toward_the_imaginary_axis() {
        let p = PhysParams::unit_oblate();
        let scan = eigen_scan(&p, 8);
        let check = scan.flattening(1e-3).unwrap();
        assert!(
            check.passed,
            "tracked pair |Re| shell 1 = {}, shell 8 = {}",
            check.first_shell, check.last_shell
        );
        // the pair converges to ±iτ̃
        let last = scan.shells.last().unwrap();
        assert!(
            (last.tracked_im - p.tau_tilde()).abs() < 0.02,
            "tracked Im at outer shell = {}",
            last.tracked_im
        );
    }

    #[test]
    fn classification_crosschecks_the_inertia_shape() {
        let oblate = classify_stability(&PhysParams::unit_oblate(), 2).unwrap();
        assert_eq!(oblate.shape, InertiaShape::Oblate);
        assert_eq!(oblate.verdict, Stability::Stable);
        assert!(oblate.matches_theory);

        let oblong =
            classify_stability(&PhysParams::unit_oblate().swapped_inertia(), 2).unwrap();
        assert_eq!(oblong.shape, InertiaShape::Oblong);
        assert!(matches!(oblong.verdict, Stability::Unstable { .. }));
        assert!(oblong.matches_theory);

        let mut degenerate = PhysParams::unit_oblate();
        degenerate.nu = degenerate.lambda;
        assert!(matches!(
            classify_stability(&degenerate, 2),
            Err(SpectrumError::DegenerateInertia(_))
        ));

        // summaries serialize for the verdict file
        let text = serde_json::to_string(&oblate).unwrap();
        assert!(text.contains("\"kind\":\"stable\""));
    }

    #[test]
    fn scan_csv_has_one_row_per_wavenumber() {
        let scan = eigen_scan(&PhysParams::unit_oblate(), 1);
        let mut buf = Vec::new();
        write_scan_csv(&scan, &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(rdr.headers().unwrap().len(), 7 + 16);
        let rows: Vec<_> = rdr.records().collect::<Result<_, _>>().unwrap();
        assert_eq!(rows.len(), 27);
    }

    // ------------------------------------------------------------------
    // solver consistency: a tiny-amplitude run follows the propagators
    // ------------------------------------------------------------------

    #[test]
    fn tiny_amplitude_simulation_follows_the_symbol_propagator() {
        let p = PhysParams::unit_oblate();
        let cfg = GalerkinConfig {
            n: 2,
            dt: 2e-3,
            t_end: 1.0,
            ..GalerkinConfig::default()
        };
        let mut sv = Solver::new(p, cfg).unwrap();
        let g = sv.grid().clone();
        let amp = 1e-6;
        let kw = [1i32, 1, 2];
        let (kap, ksq) = kappa_of(kw);

        // divergence-free velocity amplitude at kw
        let raw_u = [
            C64::new(0.7, 0.2),
            C64::new(-0.4, 0.5),
            C64::new(0.3, -0.8),
        ];
        let kdot: C64 = (0..3).map(|i| raw_u[i] * kap[i]).sum();
        let u_hat: Vec<C64> = (0..3)
            .map(|i| (raw_u[i] - kdot * (kap[i] / ksq)) * amp)
            .collect();
        let th_hat = [
            C64::new(-0.6, 0.3) * amp,
            C64::new(0.2, 0.9) * amp,
            C64::new(0.5, -0.1) * amp,
        ];
        let a_hat = [C64::new(0.4, -0.7) * amp, C64::new(-0.9, 0.1) * amp];
        let planar_hat = [
            C64::new(0.3, 0.6) * amp,  // K₁₁
            C64::new(-0.5, 0.2) * amp, // K₂₂
            C64::new(0.1, -0.4) * amp, // K₁₂
        ];
        let kzz_hat = C64::new(0.8, 0.35) * amp;

        // zero-frequency content: real means for θ, a, and the inertia
        let th0 = [0.9 * amp, -0.3 * amp, 0.4 * amp];
        let a0 = [-0.6 * amp, 0.7 * amp];
        let planar0 = [0.5 * amp, -0.2 * amp, 0.35 * amp];
        let kzz0 = -0.45 * amp;

        let mut z0 = State::zeros(&g);
        for i in 0..3 {
            set_mode(&mut z0.u.0[i], kw, u_hat[i]);
            set_mode(&mut z0.theta.0[i], kw, th_hat[i]);
            set_mode(&mut z0.theta.0[i], [0, 0, 0], C64::new(th0[i], 0.0));
        }
        // slots: (0,0)=K₁₁, (1,1)=K₂₂, (2,2)=K₃₃, (0,1)=K₁₂, (0,2)=a₁, (1,2)=a₂
        for (slot, v) in [(4, a_hat[0]), (5, a_hat[1])] {
            set_mode(&mut z0.k.0[slot], kw, v);
        }
        for (slot, v) in [(0, planar_hat[0]), (1, planar_hat[1]), (3, planar_hat[2])] {
            set_mode(&mut z0.k.0[slot], kw, v);
        }
        set_mode(&mut z0.k.0[2], kw, kzz_hat);
        for (slot, v) in [(4, a0[0]), (5, a0[1])] {
            set_mode(&mut z0.k.0[slot], [0, 0, 0], C64::new(v, 0.0));
        }
        for (slot, v) in [(0, planar0[0]), (1, planar0[1]), (3, planar0[2])] {
            set_mode(&mut z0.k.0[slot], [0, 0, 0], C64::new(v, 0.0));
        }
        set_mode(&mut z0.k.0[2], [0, 0, 0], C64::new(kzz0, 0.0));
        z0.enforce_constraints();

        let res = sv.simulate(z0).unwrap();
        assert!(matches!(res.outcome, Outcome::Completed));
        let zf = &res.final_state;

        // coupled block at kw
        let sym = assemble_symbol(kw, &p);
        let prop = sym.propagator(1.0);
        let mut stacked = Vec::with_capacity(8);
        stacked.extend_from_slice(&u_hat);
        stacked.extend_from_slice(&th_hat);
        stacked.extend_from_slice(&a_hat);
        let oracle = prop.mul_vec(&stacked);
        let mut got = Vec::with_capacity(8);
        for i in 0..3 {
            got.push(mode_coefficient(&zf.u.0[i], kw));
        }
        for i in 0..3 {
            got.push(mode_coefficient(&zf.theta.0[i], kw));
        }
        got.push(mode_coefficient(&zf.k.0[4], kw));
        got.push(mode_coefficient(&zf.k.0[5], kw));
        let err: f64 = got
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = oracle.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(
            err / scale < 1e-4,
            "coupled block at {kw:?}: rel err {}",
            err / scale
        );

        // coupled block at zero frequency (velocity mean stays zero)
        let sym0 = assemble_symbol([0, 0, 0], &p);
        let prop0 = sym0.propagator(1.0);
        let mut stacked0 = vec![C64::new(0.0, 0.0); 3];
        stacked0.extend(th0.iter().map(|&v| C64::new(v, 0.0)));
        stacked0.extend(a0.iter().map(|&v| C64::new(v, 0.0)));
        let oracle0 = prop0.mul_vec(&stacked0);
        let mut got0 = Vec::with_capacity(8);
        for i in 0..3 {
            got0.push(mode_coefficient(&zf.u.0[i], [0, 0, 0]));
        }
        for i in 0..3 {
            got0.push(mode_coefficient(&zf.theta.0[i], [0, 0, 0]));
        }
        got0.push(mode_coefficient(&zf.k.0[4], [0, 0, 0]));
        got0.push(mode_coefficient(&zf.k.0[5], [0, 0, 0]));
        let err0: f64 = got0
            .iter()
            .zip(oracle0.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale0: f64 = oracle0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(
            err0 / scale0 < 1e-4,
            "zero-frequency block: rel err {}",
            err0 / scale0
        );

        // planar-inertia rotation block at both wavenumbers
        for (kq, init) in [(kw, planar_hat), ([0, 0, 0], planar0.map(|v| C64::new(v, 0.0)))] {
            let pl = sym.planar_propagator(1.0);
            let oracle_pl = pl.mul_vec(&init);
            let got_pl = [
                mode_coefficient(&zf.k.0[0], kq),
                mode_coefficient(&zf.k.0[1], kq),
                mode_coefficient(&zf.k.0[3], kq),
            ];
            let err_pl: f64 = got_pl
                .iter()
                .zip(oracle_pl.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale_pl: f64 = oracle_pl.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(
                err_pl / scale_pl < 1e-4,
                "planar block at {kq:?}: rel err {}",
                err_pl / scale_pl
            );
        }

        // the 33-component is frozen by the linear flow
        let kzz_f = mode_coefficient(&zf.k.0[2], kw);
        assert!((kzz_f - kzz_hat).norm() < 1e-4 * amp);
        let kzz0_f = mode_coefficient(&zf.k.0[2], [0, 0, 0]);
        assert!((kzz0_f - C64::new(kzz0, 0.0)).norm() < 1e-4 * amp);
    }

    // ------------------------------------------------------------------
    // property tests
    // ------------------------------------------------------------------

    fn phys_params_strategy() -> impl Strategy<Value = PhysParams> {
        (
            0.2f64..2.0,
            0.2f64..2.0,
            0.2f64..2.0,
            0.2f64..2.0,
            0.2f64..2.0,
            0.2f64..2.0,
            0.4f64..1.6,
            0.1f64..1.5,
        )
            .prop_map(|(mu, kappa, alpha, beta, gamma, tau, lambda, gap)| {
                PhysParams::new(mu, kappa, alpha, beta, gamma, tau, lambda, lambda + gap)
                    .unwrap()
            })
    }

    fn wavenumber_strategy() -> impl Strategy<Value = [i32; 3]> {
        [-6i32..=6, -6i32..=6, -6i32..=6]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symbol_entries_conjugate_under_wavenumber_reflection(
            p in phys_params_strategy(),
            k in wavenumber_strategy(),
        ) {
            let plus = assemble_symbol(k, &p);
            let minus = assemble_symbol([-k[0], -k[1], -k[2]], &p);
            for i in 0..8 {
                for j in 0..8 {
                    let d = (plus.coupled[(i, j)].conj() - minus.coupled[(i, j)]).norm();
                    prop_assert!(d < 1e-12, "entry ({i},{j}) differs by {d}");
                }
            }
            // hence the spectra are conjugate multisets
            let mut wp = plus.eigenvalues().unwrap();
            let wm = minus.eigenvalues().unwrap();
            for z in wp.iter_mut() {
                *z = z.conj();
            }
            let scale = 1.0 + wp.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let d = multiset_distance(&wm, &wp);
            prop_assert!(d < 1e-8 * scale, "reflected spectra differ by {d}");
        }

        #[test]
        fn wave_parallel_velocity_spans_the_structural_kernel(
            p in phys_params_strategy(),
            k in wavenumber_strategy(),
        ) {
            prop_assume!(k != [0, 0, 0]);
            let sym = assemble_symbol(k, &p);
            let (kap, ksq) = kappa_of(k);
            let knorm = ksq.sqrt();
            let mut par = vec![C64::new(0.0, 0.0); 8];
            for i in 0..3 {
                par[i] = C64::new(kap[i] / knorm, 0.0);
            }
            let image = sym.coupled.mul_vec(&par);
            let residual: f64 = image.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let scale = 1.0 + sym.coupled.max_abs();
            prop_assert!(residual < 1e-12 * scale, "kernel residual {residual}");
        }

        #[test]
        fn planar_block_oscillates_at_twice_the_spin(
            p in phys_params_strategy(),
        ) {
            let sym = assemble_symbol([1, 0, 0], &p);
            let (w, _) = sym.planar_inertia_block().eig().unwrap();
            let tt = p.tau_tilde();
            let expect = [
                C64::new(0.0, -2.0 * tt),
                C64::new(0.0, 0.0),
                C64::new(0.0, 2.0 * tt),
            ];
            let d = multiset_distance(&w, &expect);
            prop_assert!(d < 1e-9 * (1.0 + tt), "planar spectrum off by {d}");
        }
    }
}
