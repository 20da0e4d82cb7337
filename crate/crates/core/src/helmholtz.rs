//! Inversion of the Helmholtz operator 1 - d^2/dx^2 on the periodic grid.
//!
//! Two independent routes are provided on purpose. The solver applies the
//! Fourier multiplier 1/(1 + k^2); the convolution route sums the periodized
//! Green's function directly. They discretize the same operator differently
//! (the sampled kernel carries alias contributions the multiplier does not),
//! so their agreement, and its improvement under refinement, is a meaningful
//! consistency check rather than a tautology.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{wrap_periodic, Grid, GridFunction};
use crate::scalar::{Cplx, Scalar};

/// Periodized Green's function of 1 - d^2/dx^2 on [-L, L).
///
/// Written as (e^{-d} + e^{d-2L}) / (2(1 - e^{-2L})) with d = |x| wrapped,
/// which keeps every exponent nonpositive; the textbook cosh(L - d)/sinh(L)
/// form overflows for large L.
pub fn periodic_green<T: Scalar>(x: T, half_length: T) -> T {
    let d = wrap_periodic(x, half_length).abs();
    let two = T::lit(2.0);
    let denom = two * (T::one() - (-two * half_length).exp());
    ((-d).exp() + (d - two * half_length).exp()) / denom
}

/// Derivative of the periodized Green's function; the jump at the origin is
/// resolved as 0 (the symmetric principal value).
pub fn periodic_green_derivative<T: Scalar>(x: T, half_length: T) -> T {
    let w = wrap_periodic(x, half_length);
    if w == T::zero() {
        return T::zero();
    }
    let d = w.abs();
    let two = T::lit(2.0);
    let denom = two * (T::one() - (-two * half_length).exp());
    let mag = ((-d).exp() - (d - two * half_length).exp()) / denom;
    if w > T::zero() {
        -mag
    } else {
        mag
    }
}

/// Precomputed multipliers for velocity recovery u = (1 - d^2/dx^2)^{-1} m
/// and its derivative. The inverse keeps the true Nyquist wavenumber (even
/// symbol); the derivative symbol zeroes it, so `velocity_derivative`
/// composes exactly with `spectral_derivative` applied to `velocity`.
pub struct HelmholtzSolver<T: Scalar> {
    grid: Grid<T>,
    u_mult: Vec<Cplx<T>>,
    ux_mult: Vec<Cplx<T>>,
}

impl<T: Scalar> HelmholtzSolver<T> {
    pub fn new(grid: Grid<T>) -> Self {
        let n = grid.point_count();
        let mut u_mult = Vec::with_capacity(n);
        let mut ux_mult = Vec::with_capacity(n);
        for j in 0..n {
            let k = grid.wavenumber(j);
            let kd = grid.derivative_wavenumber(j);
            let inv = T::one() / (T::one() + k * k);
            u_mult.push(Cplx::new(inv, T::zero()));
            ux_mult.push(Cplx::new(T::zero(), kd * inv));
        }
        HelmholtzSolver { grid, u_mult, ux_mult }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn velocity(&self, m: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.check(m)?;
        m.apply_multiplier(&self.u_mult)
    }

    pub fn velocity_derivative(&self, m: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.check(m)?;
        m.apply_multiplier(&self.ux_mult)
    }

    /// Returns (u, u_x) from one forward transform.
    pub fn velocity_pair(&self, m: &GridFunction<T>) -> Result<(GridFunction<T>, GridFunction<T>)> {
        self.check(m)?;
        let spectrum = m.spectrum();
        let apply = |mult: &[Cplx<T>]| -> Result<GridFunction<T>> {
            let coeffs: Vec<Cplx<T>> = spectrum
                .iter()
                .zip(mult)
                .map(|(&c, &s)| c * s)
                .collect();
            GridFunction::from_spectrum(self.grid.clone(), coeffs)
        };
        Ok((apply(&self.u_mult)?, apply(&self.ux_mult)?))
    }

    fn check(&self, m: &GridFunction<T>) -> Result<()> {
        if *m.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if !m.is_finite() {
            return Err(Error::BlownUpState);
        }
        Ok(())
    }
}

/// Velocity by direct convolution with the sampled periodic Green's
/// function, u_i = sum_j G(x_i - x_j) m_j dx. O(N^2); independent of the
/// spectral route. Deterministic: each output sums sources in index order.
pub fn velocity_by_convolution<T: Scalar>(m: &GridFunction<T>) -> Result<GridFunction<T>> {
    convolve_with_kernel(m, periodic_green)
}

/// Derivative counterpart of `velocity_by_convolution`.
pub fn velocity_derivative_by_convolution<T: Scalar>(
    m: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    convolve_with_kernel(m, periodic_green_derivative)
}

/// u at each target from point sources: sum_j w_j G(x - h_j). Direct
/// O(sources x targets) evaluation; the particle engine's scan summation is
/// property-tested against this.
pub fn kernel_sum_velocity<T: Scalar>(
    positions: &[T],
    weights: &[Cplx<T>],
    targets: &[T],
    half_length: T,
) -> Result<Vec<Cplx<T>>> {
    kernel_point_sum(positions, weights, targets, half_length, periodic_green)
}

/// u_x counterpart; a target coinciding bitwise with a source gets no
/// contribution from it (the principal-value convention at the kernel jump).
pub fn kernel_sum_velocity_derivative<T: Scalar>(
    positions: &[T],
    weights: &[Cplx<T>],
    targets: &[T],
    half_length: T,
) -> Result<Vec<Cplx<T>>> {
    kernel_point_sum(
        positions,
        weights,
        targets,
        half_length,
        periodic_green_derivative,
    )
}

fn kernel_point_sum<T: Scalar>(
    positions: &[T],
    weights: &[Cplx<T>],
    targets: &[T],
    half_length: T,
    kernel: fn(T, T) -> T,
) -> Result<Vec<Cplx<T>>> {
    if positions.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: positions.len(),
            got: weights.len(),
        });
    }
    if positions.iter().any(|x| !x.is_finite())
        || weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite())
    {
        return Err(Error::BlownUpState);
    }
    Ok(targets
        .par_iter()
        .map(|&x| {
            let mut acc = Cplx::new(T::zero(), T::zero());
            for (&h, &w) in positions.iter().zip(weights) {
                acc += w.scale(kernel(x - h, half_length));
            }
            acc
        })
        .collect())
}

fn convolve_with_kernel<T: Scalar>(
    m: &GridFunction<T>,
    kernel: fn(T, T) -> T,
) -> Result<GridFunction<T>> {
    if !m.is_finite() {
        return Err(Error::BlownUpState);
    }
    let grid = m.grid();
    let n = grid.point_count();
    let l = grid.half_length();
    let dx = grid.spacing();
    // kernel depends only on the index offset; evaluate each value once
    let row: Vec<T> = (0..n)
        .map(|d| kernel(T::from_usize(d).unwrap() * dx, l))
        .collect();
    let src = m.values();
    let values: Vec<Cplx<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Cplx::new(T::zero(), T::zero());
            for (j, &w) in src.iter().enumerate() {
                // the kernel is 2L-periodic, so the offset (i - j) mod N
                // indexes the right sample for negative separations too
                acc += w.scale(row[(i + n - j) % n]);
            }
            acc.scale(dx)
        })
        .collect();
    GridFunction::from_values(grid.clone(), values)
}
