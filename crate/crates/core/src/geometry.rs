//! Steering vectors, DFT matrices and the overcomplete RIS angle dictionary.
//!
//! All angles are spatial frequencies (element spacing over wavelength times a
//! directional cosine). Steering vectors are 1-periodic in them.

use std::f64::consts::PI;

use crate::linalg::kron;
use crate::{CMat, CVec, Error, Result, C64};

/// `exp(−i·2π·t)` with the argument reduced modulo one first.
#[inline]
pub fn cis_neg(t: f64) -> C64 {
    let r = t - t.round();
    C64::from_polar(1.0, -2.0 * PI * r)
}

/// Maps a spatial frequency into `[−1/2, 1/2)`.
pub fn wrap_frequency(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Circular distance between two spatial frequencies.
pub fn frequency_distance(a: f64, b: f64) -> f64 {
    wrap_frequency(a - b).abs()
}

/// ULA response `[1, e^{−i2πx}, …, e^{−i2π(n−1)x}]ᵀ`.
pub fn ula_steering(n: usize, x: f64) -> Result<CVec> {
    if n == 0 {
        return Err(Error::InvalidDimension("ULA with zero elements".into()));
    }
    Ok(CVec::from_fn(n, |m, _| cis_neg(m as f64 * x)))
}

/// UPA response `a_{m1}(y) ⊗ a_{m2}(z)`; the m1 axis varies slowest.
pub fn upa_steering(m1: usize, m2: usize, y: f64, z: f64) -> Result<CVec> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidDimension(format!("UPA {m1}x{m2}")));
    }
    Ok(CVec::from_fn(m1 * m2, |i, _| {
        let (p, q) = (i / m2, i % m2);
        cis_neg(p as f64 * y + q as f64 * z)
    }))
}

/// Matrix whose columns are `ula_steering(n, x)` for each `x`.
pub fn ula_matrix(n: usize, xs: &[f64]) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidDimension("ULA with zero elements".into()));
    }
    Ok(CMat::from_fn(n, xs.len(), |m, j| cis_neg(m as f64 * xs[j])))
}

/// Matrix whose columns are UPA steering vectors of the given `(y, z)` pairs.
pub fn upa_matrix(m1: usize, m2: usize, angles: &[(f64, f64)]) -> Result<CMat> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidDimension(format!("UPA {m1}x{m2}")));
    }
    Ok(CMat::from_fn(m1 * m2, angles.len(), |i, j| {
        let (p, q) = (i / m2, i % m2);
        cis_neg(p as f64 * angles[j].0 + q as f64 * angles[j].1)
    }))
}

/// DFT matrix with entry `(r, c)` equal to `exp(−i2π·r·c/n)` (0-based).
pub fn dft_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidDimension("DFT of size zero".into()));
    }
    Ok(CMat::from_fn(n, n, |r, c| {
        cis_neg(((r * c) % n) as f64 / n as f64)
    }))
}

/// Sizes of the RIS array and of its angle grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictionaryConfig {
    pub m1: usize,
    pub m2: usize,
    pub d1: usize,
    pub d2: usize,
}

impl DictionaryConfig {
    /// Grids oversampled by `factor` along both axes.
    pub fn oversampled(m1: usize, m2: usize, factor: usize) -> Self {
        DictionaryConfig {
            m1,
            m2,
            d1: factor * m1,
            d2: factor * m2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 == 0 || self.m2 == 0 {
            return Err(Error::InvalidDimension(format!(
                "RIS {}x{}",
                self.m1, self.m2
            )));
        }
        if self.d1 < self.m1 {
            return Err(Error::UnderCompleteDictionary {
                array: self.m1,
                grid: self.d1,
            });
        }
        if self.d2 < self.m2 {
            return Err(Error::UnderCompleteDictionary {
                array: self.m2,
                grid: self.d2,
            });
        }
        Ok(())
    }
}

/// Grid point `c` of a `d`-point grid over one period: `−1/2 + c/d`.
pub fn grid_frequency(c: usize, d: usize) -> f64 {
    -0.5 + c as f64 / d as f64
}

/// Index of the grid point closest to `x` (circularly).
pub fn nearest_grid_index(x: f64, d: usize) -> usize {
    let t = ((wrap_frequency(x) + 0.5) * d as f64).round() as i64;
    t.rem_euclid(d as i64) as usize
}

/// Overcomplete RIS dictionary `Ā₁ ⊗ Ā₂` with its angle grids.
#[derive(Debug, Clone)]
pub struct RisDictionary {
    pub config: DictionaryConfig,
    pub a1: CMat,
    pub a2: CMat,
    pub grid1: Vec<f64>,
    pub grid2: Vec<f64>,
    /// `Ā₁ ⊗ Ā₂`, `M × D₁D₂`.
    pub full: CMat,
}

impl RisDictionary {
    pub fn new(cfg: DictionaryConfig) -> Result<Self> {
        let (a1, a2) = build_ris_dictionary(&cfg)?;
        let grid1: Vec<f64> = (0..cfg.d1).map(|c| grid_frequency(c, cfg.d1)).collect();
        let grid2: Vec<f64> = (0..cfg.d2).map(|c| grid_frequency(c, cfg.d2)).collect();
        let full = kron(&a1, &a2);
        Ok(RisDictionary {
            config: cfg,
            a1,
            a2,
            grid1,
            grid2,
            full,
        })
    }

    pub fn len(&self) -> usize {
        self.full.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.full.ncols() == 0
    }

    /// `(y, z)` frequencies of dictionary column `idx`.
    pub fn angles(&self, idx: usize) -> (f64, f64) {
        (self.grid1[idx / self.config.d2], self.grid2[idx % self.config.d2])
    }

    /// Column index of the grid point nearest to `(y, z)`.
    pub fn index_of(&self, y: f64, z: f64) -> usize {
        nearest_grid_index(y, self.config.d1) * self.config.d2
            + nearest_grid_index(z, self.config.d2)
    }

    /// Snaps `(y, z)` onto the grid.
    pub fn snap(&self, y: f64, z: f64) -> (f64, f64) {
        self.angles(self.index_of(y, z))
    }

    /// Submatrix of the selected columns.
    pub fn columns(&self, support: &[usize]) -> CMat {
        self.full.select_columns(support)
    }
}

/// Builds `(Ā₁, Ā₂)` with columns on the one-period grids `−1/2 + c/d`.
pub fn build_ris_dictionary(cfg: &DictionaryConfig) -> Result<(CMat, CMat)> {
    cfg.validate()?;
    let g1: Vec<f64> = (0..cfg.d1).map(|c| grid_frequency(c, cfg.d1)).collect();
    let g2: Vec<f64> = (0..cfg.d2).map(|c| grid_frequency(c, cfg.d2)).collect();
    Ok((ula_matrix(cfg.m1, &g1)?, ula_matrix(cfg.m2, &g2)?))
}
