//! Three-dimensional real↔complex transforms on the half grid, with passes
//! pruned to the band occupied by the data.
//!
//! The forward transform maps `N³` real samples to Fourier coefficients
//! normalized as a Fourier *series* on the unit torus: `f(x) = Σ_k f̂(k)
//! e^{2πi k·x}`, i.e. the DFT sum divided by `N³`. The inverse is the plain
//! conjugate sum, so the round trip is the identity.
//!
//! Pruning: a band-`b` spectrum occupies `(b+1)(2b+1)²` of the stored slots,
//! so the y/z line passes run only over lines that can carry data. The
//! forward transform writes only in-band slots and callers keep the
//! "spectral buffers are zero outside their band" invariant by zeroing
//! buffers once at allocation.

use crate::grid::Grid;
use crate::la::C64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft3 {
    size: usize,
    nxh: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // reusable scratch: one full-grid complex work array, line buffers,
    // and the planners' own scratch
    work: Vec<C64>,
    line: Vec<C64>,
    cline: Vec<C64>,
    rline: Vec<f64>,
    fft_scratch: Vec<C64>,
    real_scratch: Vec<C64>,
}

impl Fft3 {
    pub fn new(grid: &Grid) -> Self {
        let size = grid.size;
        let nxh = grid.nxh;
        let mut rplan = RealFftPlanner::<f64>::new();
        let mut cplan = FftPlanner::<f64>::new();
        let r2c = rplan.plan_fft_forward(size);
        let c2r = rplan.plan_fft_inverse(size);
        let fwd = cplan.plan_fft_forward(size);
        let inv = cplan.plan_fft_inverse(size);
        let fft_scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let real_scratch_len = r2c
            .get_scratch_len()
            .max(c2r.get_scratch_len());
        Fft3 {
            size,
            nxh,
            r2c,
            c2r,
            fwd,
            inv,
            work: vec![C64::new(0.0, 0.0); size * size * nxh],
            line: vec![C64::new(0.0, 0.0); size],
            cline: vec![C64::new(0.0, 0.0); nxh],
            rline: vec![0.0; size],
            fft_scratch: vec![C64::new(0.0, 0.0); fft_scratch_len],
            real_scratch: vec![C64::new(0.0, 0.0); real_scratch_len],
        }
    }

    /// In-band `k₂`/`k₃` storage indices for band `b`: `0..=b` and `N−b..N`.
    fn band_indices(&self, b: usize) -> impl Iterator<Item = usize> + Clone {
        let size = self.size;
        (0..=b).chain(size - b..size)
    }

    /// Physical samples → band-`b` Fourier coefficients. Only in-band slots of
    /// `spec` are written; out-of-band slots are left untouched (callers keep
    /// them zero). Coefficients beyond band `b` are truncated.
    pub fn forward(&mut self, phys: &[f64], spec: &mut [C64], b: usize) {
        let (size, nxh) = (self.size, self.nxh);
        assert_eq!(phys.len(), size * size * size);
        assert_eq!(spec.len(), size * size * nxh);
        assert!(2 * b + 1 <= size, "band {b} too large for grid size {size}");

        // x-pass: real→complex on every contiguous x-row, into `work`
        for zy in 0..size * size {
            self.rline.copy_from_slice(&phys[zy * size..(zy + 1) * size]);
            self.r2c
                .process_with_scratch(&mut self.rline, &mut self.work[zy * nxh..(zy + 1) * nxh], &mut self.real_scratch)
                .expect("r2c lengths are planned");
        }

        // y-pass (in place on work) for k₁ ≤ b only
        for z in 0..size {
            for kx in 0..=b {
                let base = z * size * nxh + kx;
                for y in 0..size {
                    self.line[y] = self.work[base + y * nxh];
                }
                self.fwd
                    .process_with_scratch(&mut self.line, &mut self.fft_scratch);
                for y in 0..size {
                    self.work[base + y * nxh] = self.line[y];
                }
            }
        }

        // z-pass for (k₁ ≤ b, k₂ in band), scaled output into `spec`
        let scale = 1.0 / (size * size * size) as f64;
        let stride = size * nxh;
        for ky in self.band_indices(b).collect::<Vec<_>>() {
            for kx in 0..=b {
                let base = ky * nxh + kx;
                for z in 0..size {
                    self.line[z] = self.work[base + z * stride];
                }
                self.fwd
                    .process_with_scratch(&mut self.line, &mut self.fft_scratch);
                for kz in self.band_indices(b) {
                    spec[base + kz * stride] = self.line[kz] * scale;
                }
            }
        }
    }

    /// Band-`b` Fourier coefficients → physical samples. `spec` must be zero
    /// outside band `b` (the crate-wide invariant); every slot of `phys` is
    /// written.
    pub fn inverse(&mut self, spec: &[C64], phys: &mut [f64], b: usize) {
        let (size, nxh) = (self.size, self.nxh);
        assert_eq!(phys.len(), size * size * size);
        assert_eq!(spec.len(), size * size * nxh);
        assert!(2 * b + 1 <= size, "band {b} too large for grid size {size}");

        // z-pass: spec → work on full z-lines, for in-band (k₁, k₂)
        let stride = size * nxh;
        for ky in self.band_indices(b).collect::<Vec<_>>() {
            for kx in 0..=b {
                let base = ky * nxh + kx;
                self.line.fill(C64::new(0.0, 0.0));
                for kz in self.band_indices(b) {
                    self.line[kz] = spec[base + kz * stride];
                }
                self.inv
                    .process_with_scratch(&mut self.line, &mut self.fft_scratch);
                for z in 0..size {
                    self.work[base + z * stride] = self.line[z];
                }
            }
        }

        // y-pass in place on work; out-of-band y slots are stale, so the
        // gather fills them with zeros explicitly
        for z in 0..size {
            for kx in 0..=b {
                let base = z * size * nxh + kx;
                self.line.fill(C64::new(0.0, 0.0));
                for ky in self.band_indices(b) {
                    self.line[ky] = self.work[base + ky * nxh];
                }
                self.inv
                    .process_with_scratch(&mut self.line, &mut self.fft_scratch);
                for y in 0..size {
                    self.work[base + y * nxh] = self.line[y];
                }
            }
        }

        // x-pass: complex→real on every row (k₁ > b slots are zero by band
        // discipline and never carried junk: gather masks them)
        for zy in 0..size * size {
            self.cline.fill(C64::new(0.0, 0.0));
            for kx in 0..=b {
                self.cline[kx] = self.work[zy * nxh + kx];
            }
            // the k₁=0 bin of a real signal is real; clear the O(ulp) rounding
            // residue the y/z passes leave there (c2r validates this strictly)
            self.cline[0].im = 0.0;
            self.c2r
                .process_with_scratch(&mut self.cline, &mut phys[zy * size..(zy + 1) * size], &mut self.real_scratch)
                .expect("c2r lengths are planned");
        }
    }
}

/// Reference forward transform by the direct O(N⁶) double sum, for oracle
/// tests on tiny grids: returns the coefficient at integer wavevector `k`.
pub fn naive_coefficient(grid: &Grid, phys: &[f64], k: [i32; 3]) -> C64 {
    let n = grid.size;
    let mut acc = C64::new(0.0, 0.0);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let phase = -crate::grid::TWO_PI
                    * (k[0] as f64 * x as f64 + k[1] as f64 * y as f64 + k[2] as f64 * z as f64)
                    / n as f64;
                acc += C64::from_polar(phys[grid.phys_idx(x, y, z)], phase);
            }
        }
    }
    acc / (n * n * n) as f64
}
