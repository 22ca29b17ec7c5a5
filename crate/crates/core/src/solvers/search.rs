//! Periodic grid-then-refine maximizers and the two angle searches built on
//! them.
//!
//! A coarse grid locates the main lobe, golden-section passes shrink the
//! bracket, and a few safeguarded Newton steps on finite-difference
//! derivatives polish the result to near machine precision.

use crate::geometry::{cis_neg, wrap_frequency};
use crate::{CMat, CVec, Error, Result, C64};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GRAD_STEP: f64 = 1e-6;
const HESS_STEP: f64 = 1e-4;
// Below this step length function differences drown in round-off, so Newton
// steps are taken without an ascent check.
const TRUST_STEP: f64 = 1e-6;

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn newton_polish_1d<F: Fn(f64) -> f64>(f: &F, mut x: f64, mut fx: f64) -> f64 {
    for _ in 0..8 {
        let g = (f(x + GRAD_STEP) - f(x - GRAD_STEP)) / (2.0 * GRAD_STEP);
        let h = (f(x + HESS_STEP) - 2.0 * fx + f(x - HESS_STEP)) / (HESS_STEP * HESS_STEP);
        if !(h < 0.0) {
            break;
        }
        let mut step = -g / h;
        if step.abs() > HESS_STEP {
            step = step.signum() * HESS_STEP;
        }
        let mut accepted = false;
        for _ in 0..20 {
            let fy = f(x + step);
            if fy >= fx || step.abs() <= TRUST_STEP {
                x += step;
                fx = fy;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < 1e-15 {
            break;
        }
    }
    x
}

/// Maximizes a 1-periodic function over `[−1/2, 1/2)` with an `n_grid`-point
/// coarse scan followed by local refinement. Returns the wrapped maximizer.
pub fn maximize_periodic_1d<F: Fn(f64) -> f64>(f: F, n_grid: usize) -> f64 {
    let n = n_grid.max(4);
    let step = 1.0 / n as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n {
        let v = f(-0.5 + i as f64 * step);
        if v > best.1 {
            best = (i, v);
        }
    }
    let x0 = -0.5 + best.0 as f64 * step;
    let (x, fx) = golden_max(&f, x0 - step, x0 + step, 1e-9);
    let (x, fx) = if fx >= best.1 { (x, fx) } else { (x0, best.1) };
    wrap_frequency(newton_polish_1d(&f, x, fx))
}

/// Maximizes `f` near `center`: a scan with spacing `step` over
/// `center ± half_width` (the centre itself is always a scan point),
/// followed by golden-section and Newton refinement.
pub fn refine_local_1d<F: Fn(f64) -> f64>(f: F, center: f64, half_width: f64, step: f64) -> f64 {
    let n = (half_width / step).floor() as i64;
    let mut best = (center, f(center));
    for i in -n..=n {
        if i == 0 {
            continue;
        }
        let x = center + i as f64 * step;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (x, fx) = golden_max(&f, best.0 - step, best.0 + step, 1e-10);
    let (x, fx) = if fx > best.1 { (x, fx) } else { best };
    newton_polish_1d(&f, x, fx)
}

fn newton_polish_2d<F: Fn(f64, f64) -> f64>(f: &F, mut p: (f64, f64), mut fp: f64) -> (f64, f64) {
    let (hg, hh) = (GRAD_STEP, HESS_STEP);
    for _ in 0..8 {
        let (x, y) = p;
        let gx = (f(x + hg, y) - f(x - hg, y)) / (2.0 * hg);
        let gy = (f(x, y + hg) - f(x, y - hg)) / (2.0 * hg);
        let hxx = (f(x + hh, y) - 2.0 * fp + f(x - hh, y)) / (hh * hh);
        let hyy = (f(x, y + hh) - 2.0 * fp + f(x, y - hh)) / (hh * hh);
        let hxy = (f(x + hh, y + hh) - f(x + hh, y - hh) - f(x - hh, y + hh) + f(x - hh, y - hh))
            / (4.0 * hh * hh);
        let det = hxx * hyy - hxy * hxy;
        if !(hxx < 0.0 && det > 0.0) {
            break;
        }
        let mut sx = -(hyy * gx - hxy * gy) / det;
        let mut sy = -(hxx * gy - hxy * gx) / det;
        let len = sx.hypot(sy);
        if len > hh {
            sx *= hh / len;
            sy *= hh / len;
        }
        let mut accepted = false;
        for _ in 0..20 {
            let fq = f(x + sx, y + sy);
            if fq >= fp || sx.hypot(sy) <= TRUST_STEP {
                p = (x + sx, y + sy);
                fp = fq;
                accepted = true;
                break;
            }
            sx *= 0.5;
            sy *= 0.5;
        }
        if !accepted || sx.hypot(sy) < 1e-15 {
            break;
        }
    }
    p
}

/// Two-dimensional analogue of [`maximize_periodic_1d`]; the refinement
/// alternates golden-section passes over each axis before the Newton polish.
pub fn maximize_periodic_2d<F: Fn(f64, f64) -> f64>(f: F, n_grid: (usize, usize)) -> (f64, f64) {
    let (n1, n2) = (n_grid.0.max(4), n_grid.1.max(4));
    let (s1, s2) = (1.0 / n1 as f64, 1.0 / n2 as f64);
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for i in 0..n1 {
        let x = -0.5 + i as f64 * s1;
        for j in 0..n2 {
            let v = f(x, -0.5 + j as f64 * s2);
            if v > best.1 {
                best = ((i, j), v);
            }
        }
    }
    let mut p = (-0.5 + best.0 .0 as f64 * s1, -0.5 + best.0 .1 as f64 * s2);
    let mut fp = best.1;
    for _ in 0..3 {
        let (x, fx) = golden_max(&|t| f(t, p.1), p.0 - s1, p.0 + s1, 1e-9);
        if fx >= fp {
            p.0 = x;
            fp = fx;
        }
        let (y, fy) = golden_max(&|t| f(p.0, t), p.1 - s2, p.1 + s2, 1e-9);
        if fy >= fp {
            p.1 = y;
            fp = fy;
        }
    }
    let p = newton_polish_2d(&f, p, fp);
    (wrap_frequency(p.0), wrap_frequency(p.1))
}

/// Result of [`snl_ls_rotation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub dv: f64,
    pub dw: f64,
    pub x: C64,
    /// True when the observation carried no energy.
    pub degenerate: bool,
}

fn rotation_basis(h_ref: &CVec, e: &CMat) -> CMat {
    // Eᴴ·diag(h_ref)
    let mut b = e.adjoint();
    for (m, mut col) in b.column_iter_mut().enumerate() {
        col *= h_ref[m];
    }
    b
}

fn rotated_atom(b: &CMat, m2: usize, dv: f64, dw: f64) -> CVec {
    let m = b.ncols();
    let mut c = CVec::zeros(b.nrows());
    for idx in 0..m {
        let a = cis_neg((idx / m2) as f64 * dv + (idx % m2) as f64 * dw);
        c.axpy(a, &b.column(idx), C64::new(1.0, 0.0));
    }
    c
}

/// `|cᴴp|²/‖c‖²` with `c = Eᴴ·diag(h_ref)·a_M(dv, dw)`.
pub fn snl_ls_objective(h_ref: &CVec, e: &CMat, p: &CVec, m2: usize, dv: f64, dw: f64) -> f64 {
    let b = rotation_basis(h_ref, e);
    let c = rotated_atom(&b, m2, dv, dw);
    let den = c.norm_squared();
    if den == 0.0 {
        0.0
    } else {
        c.dotc(p).norm_sqr() / den
    }
}

/// Separable nonlinear least squares for one rotated copy of `h_ref`.
///
/// Fits `p ≈ x·Eᴴ·diag(h_ref)·a_M(dv, dw)`: the gain is eliminated in closed
/// form and the rotation found by a periodic 2-D search on a `grid` lattice.
pub fn snl_ls_rotation(
    h_ref: &CVec,
    e: &CMat,
    p: &CVec,
    dims: (usize, usize),
    grid: (usize, usize),
) -> Result<Rotation> {
    let (m1, m2) = dims;
    if h_ref.len() != m1 * m2 || e.nrows() != m1 * m2 {
        return Err(Error::DimensionMismatch(format!(
            "RIS of {m1}x{m2} elements, reference of length {}, E with {} rows",
            h_ref.len(),
            e.nrows()
        )));
    }
    if p.len() != e.ncols() || e.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "E has {} columns, observation has {} entries",
            e.ncols(),
            p.len()
        )));
    }
    if h_ref.norm() == 0.0 {
        return Err(Error::Detection("reference cascaded vector is zero".into()));
    }
    if p.norm() == 0.0 {
        return Ok(Rotation {
            dv: 0.0,
            dw: 0.0,
            x: C64::new(0.0, 0.0),
            degenerate: true,
        });
    }
    let b = rotation_basis(h_ref, e);
    let obj = |dv: f64, dw: f64| {
        let c = rotated_atom(&b, m2, dv, dw);
        let den = c.norm_squared();
        if den == 0.0 {
            0.0
        } else {
            c.dotc(p).norm_sqr() / den
        }
    };
    let (dv, dw) = maximize_periodic_2d(obj, grid);
    let c = rotated_atom(&b, m2, dv, dw);
    let den = c.norm_squared();
    if den == 0.0 {
        return Err(Error::Detection("rotated reference vanishes in the measurement space".into()));
    }
    Ok(Rotation {
        dv,
        dw,
        x: c.dotc(p) / den,
        degenerate: false,
    })
}

/// One-dimensional AoD search over a ratio sequence.
///
/// Returns the `ξ` maximizing `|Σ_m η_m·exp(+i2πmξ)|²`, so a sequence
/// `η_m = exp(−i2πmξ*)` maps to `ξ*`. `grid` is the number of coarse points
/// over one period.
pub fn line_search_aod(etas: &[C64], grid: usize) -> Result<f64> {
    if etas.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "AoD search needs at least two ratio samples, got {}",
            etas.len()
        )));
    }
    let obj = |xi: f64| {
        etas.iter()
            .enumerate()
            .map(|(m, &e)| e * cis_neg(-(m as f64) * xi))
            .sum::<C64>()
            .norm_sqr()
    };
    Ok(maximize_periodic_1d(obj, grid.max(4 * etas.len())))
}
