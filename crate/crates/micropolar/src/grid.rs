//! Discrete geometry of the periodic box: the unit torus T³ = R³/Z³ sampled on
//! an N³ grid, with Fourier modes indexed by integer wavevectors `k` and the
//! physical wavevector `2πk` (so that `∇̂(k) = i·2πk`).
//!
//! Spectra are stored on the *half grid*: since every field is real, only
//! `k₁ ≥ 0` is kept and the `k₁ < 0` coefficients are the implicit conjugate
//! mirrors. Storage is `[k₃][k₂][k₁]` with `k₁` fastest (length `N/2+1`);
//! physical storage is `[z][y][x]` with `x` fastest.
//!
//! A *band* `b` is the set of modes with `|k_j| ≤ b` per axis (the default
//! box-shaped cut) or `|k|₂ ≤ b` (optional Euclidean cut). Every spectral
//! buffer in this crate is zero outside its band, bands never touch the
//! Nyquist planes, and pointwise products are formed on grids large enough
//! that retained coefficients are the exact truncated convolution — see
//! [`Grid::product_safe`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Shape of the mode cut used by band projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandShape {
    /// `|k_j| ≤ b` per axis (default).
    Box,
    /// `|k|₂ ≤ b`.
    Euclid,
}

/// One retained Fourier mode on the half grid.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    /// flat index into a spectral buffer
    pub idx: usize,
    /// integer wavevector, `k[0] ≥ 0`
    pub k: [i32; 3],
    /// Parseval weight: 2 for `k₁ > 0` (implicit mirror), 1 for `k₁ = 0`
    pub weight: f64,
}

impl Mode {
    /// Physical wavevector `2πk`.
    pub fn kappa(&self) -> [f64; 3] {
        [
            TWO_PI * self.k[0] as f64,
            TWO_PI * self.k[1] as f64,
            TWO_PI * self.k[2] as f64,
        ]
    }

    pub fn kappa_sq(&self) -> f64 {
        let k = self.kappa();
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    pub fn is_zero(&self) -> bool {
        self.k == [0, 0, 0]
    }
}

#[derive(Debug)]
pub struct Grid {
    /// primary band n: `u` and `θ` live on band n, `K` on band 2n
    pub n_modes: usize,
    /// physical points per axis
    pub size: usize,
    /// stored `k₁` indices: `size/2 + 1`
    pub nxh: usize,
    pub shape: BandShape,
    mode_cache: Mutex<HashMap<usize, Arc<Vec<Mode>>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("band {band} requires at least {needed} grid points per axis, got {size}")]
    TooSmall {
        band: usize,
        needed: usize,
        size: usize,
    },
    #[error("n_modes must be ≥ 1")]
    NoModes,
}

/// Smallest `2^a·3^b ≥ min` — sizes on which the line transforms are fastest.
pub fn fast_size(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 4 * min {
        let mut v = p2;
        while v < min {
            v *= 3;
        }
        best = best.min(v);
        p2 *= 2;
    }
    best
}

impl Grid {
    /// Grid for primary band `n` with the automatically chosen transform size:
    /// the smallest fast size `N ≥ 5n+1`, which makes every product the solver
    /// forms alias-free (see [`Grid::product_safe`]).
    pub fn new(n_modes: usize) -> Result<Arc<Grid>, GridError> {
        Grid::with_size(n_modes, fast_size(5 * n_modes + 1), BandShape::Box)
    }

    pub fn with_size(n_modes: usize, size: usize, shape: BandShape) -> Result<Arc<Grid>, GridError> {
        if n_modes == 0 {
            return Err(GridError::NoModes);
        }
        if size < 5 * n_modes + 1 {
            return Err(GridError::TooSmall {
                band: n_modes,
                needed: 5 * n_modes + 1,
                size,
            });
        }
        Ok(Arc::new(Grid {
            n_modes,
            size,
            nxh: size / 2 + 1,
            shape,
            mode_cache: Mutex::new(HashMap::new()),
        }))
    }

    /// Band of the velocity/angular-velocity unknowns.
    pub fn band_primary(&self) -> usize {
        self.n_modes
    }

    /// Band of the microinertia perturbation (twice the primary band).
    pub fn band_k(&self) -> usize {
        2 * self.n_modes
    }

    pub fn spec_len(&self) -> usize {
        self.size * self.size * self.nxh
    }

    pub fn phys_len(&self) -> usize {
        self.size * self.size * self.size
    }

    pub fn spec_idx(&self, kx: usize, ky: usize, kz: usize) -> usize {
        (kz * self.size + ky) * self.nxh + kx
    }

    pub fn phys_idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.size + y) * self.size + x
    }

    /// Inverse of [`phys_idx`](Self::phys_idx): the `(x, y, z)` grid
    /// coordinates of a flat physical-storage index.
    pub fn phys_coords(&self, i: usize) -> [usize; 3] {
        [
            i % self.size,
            (i / self.size) % self.size,
            i / (self.size * self.size),
        ]
    }

    /// Signed wavenumber of a storage index along a full (y/z) axis.
    pub fn k_of_index(&self, i: usize) -> i32 {
        if i <= self.size / 2 {
            i as i32
        } else {
            i as i32 - self.size as i32
        }
    }

    /// Storage index of a signed wavenumber along a full axis.
    pub fn index_of_k(&self, k: i32) -> usize {
        if k >= 0 {
            k as usize
        } else {
            (self.size as i32 + k) as usize
        }
    }

    /// Is `k` inside band `b` under this grid's cut shape?
    pub fn in_band(&self, k: [i32; 3], b: usize) -> bool {
        match self.shape {
            BandShape::Box => k.iter().all(|&kj| kj.unsigned_abs() as usize <= b),
            BandShape::Euclid => {
                (k[0] as i64 * k[0] as i64 + k[1] as i64 * k[1] as i64 + k[2] as i64 * k[2] as i64)
                    <= (b * b) as i64
            }
        }
    }

    /// Does this grid form the product of band-`a` and band-`b` data retained
    /// at band `c` exactly (alias-free)? Requires `N ≥ a + b + c + 1`.
    pub fn product_safe(&self, a: usize, b: usize, c: usize) -> bool {
        self.size >= a + b + c + 1
    }

    /// All modes of band `b` (cached). Iterating this list visits exactly the
    /// storage slots that may be nonzero for a band-`b` field.
    pub fn modes(&self, b: usize) -> Arc<Vec<Mode>> {
        assert!(
            2 * b + 1 <= self.size,
            "band {b} does not fit on a size-{} grid",
            self.size
        );
        let mut cache = self.mode_cache.lock().unwrap();
        cache
            .entry(b)
            .or_insert_with(|| {
                let mut list = Vec::new();
                let bi = b as i32;
                for kz in -bi..=bi {
                    for ky in -bi..=bi {
                        for kx in 0..=bi {
                            let k = [kx, ky, kz];
                            if !self.in_band(k, b) {
                                continue;
                            }
                            list.push(Mode {
                                idx: self.spec_idx(
                                    kx as usize,
                                    self.index_of_k(ky),
                                    self.index_of_k(kz),
                                ),
                                k,
                                weight: if kx > 0 { 2.0 } else { 1.0 },
                            });
                        }
                    }
                }
                Arc::new(list)
            })
            .clone()
    }

    /// Storage index of the mean (k = 0) mode.
    pub fn zero_mode(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size(41), 48);
        assert_eq!(fast_size(21), 24);
        assert_eq!(fast_size(11), 12);
        assert_eq!(fast_size(48), 48);
        assert_eq!(fast_size(5), 6);
    }

    #[test]
    fn default_grid_is_product_safe() {
        let g = Grid::new(8).unwrap();
        assert_eq!(g.size, 48);
        let n = g.n_modes;
        // the two worst products the solver forms:
        assert!(g.product_safe(2 * n, 2 * n, n)); // K·(u·∇θ) retained at n
        assert!(g.product_safe(n, 2 * n, 2 * n)); // u·∇K retained at 2n
    }

    #[test]
    fn wavenumber_indexing_roundtrip() {
        let g = Grid::new(2).unwrap();
        for k in -(g.size as i32) / 2 + 1..=(g.size as i32) / 2 {
            assert_eq!(g.k_of_index(g.index_of_k(k)), k);
        }
    }

    #[test]
    fn mode_counts() {
        let g = Grid::new(2).unwrap();
        // band b box: k₁ ∈ 0..=b, k₂,k₃ ∈ −b..=b → (b+1)(2b+1)²
        assert_eq!(g.modes(2).len(), 3 * 5 * 5);
        assert_eq!(g.modes(4).len(), 5 * 9 * 9);
        // weights: summing weight over modes = full lattice count (2b+1)³
        let w: f64 = g.modes(2).iter().map(|m| m.weight).sum();
        assert_eq!(w, 125.0);
    }

    #[test]
    fn euclidean_cut_is_smaller() {
        let g = Grid::with_size(2, 12, BandShape::Euclid).unwrap();
        let b = Grid::with_size(2, 12, BandShape::Box).unwrap();
        assert!(g.modes(2).len() < b.modes(2).len());
        // the corner mode (2,2,2) is outside the Euclidean ball of radius 2
        assert!(!g.in_band([2, 2, 2], 2));
        assert!(b.in_band([2, 2, 2], 2));
    }
}
