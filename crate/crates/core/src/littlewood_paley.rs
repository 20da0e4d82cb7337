//! Dyadic frequency decomposition and Besov norms on the periodic grid.
//!
//! The low-pass symbol is built from the classical e^{-1/s} bump: it is
//! exactly 1 up to |xi| = 3/4 and exactly 0 from 4/3 on, so the ring symbol
//! phi(xi) = chi(xi/2) - chi(xi) telescopes bit-exactly across scales and
//! the partition of unity closes with the literal constant 1 once the
//! rescaled Nyquist frequency falls inside the flat region. Grid spectra
//! are finite, so blocks above `max_block_index` vanish identically.

use crate::error::{Error, Result};
use crate::grid::{lp_norm, Grid, GridFunction};
use crate::scalar::{Cplx, Scalar};

/// C-infinity monotone ramp: 0 for s <= 0, 1 for s >= 1.
pub fn smooth_step<T: Scalar>(s: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    if s >= T::one() {
        return T::one();
    }
    let rise = (-s.recip()).exp();
    let fall = (-(T::one() - s).recip()).exp();
    rise / (rise + fall)
}

/// Low-pass symbol chi: 1 on [0, 3/4], 0 from 4/3, smooth in between.
pub fn low_pass_symbol<T: Scalar>(xi: T) -> T {
    let t = xi.abs();
    let lo = T::lit(0.75);
    let hi = T::lit(4.0) / T::lit(3.0);
    if t <= lo {
        T::one()
    } else if t >= hi {
        T::zero()
    } else {
        smooth_step((hi - t) / (hi - lo))
    }
}

/// Ring symbol phi(xi) = chi(xi/2) - chi(xi), supported on 3/4 <= |xi| <= 8/3.
pub fn ring_symbol<T: Scalar>(xi: T) -> T {
    low_pass_symbol(xi * T::lit(0.5)) - low_pass_symbol(xi)
}

/// Largest block index that can be nonzero on this grid: the smallest Q
/// with nyquist <= (3/4) 2^{Q+1}, so that every higher ring misses the
/// whole spectrum.
pub fn max_block_index<T: Scalar>(grid: &Grid<T>) -> i32 {
    let nyq = grid.nyquist();
    let mut q = 0i32;
    loop {
        if nyq <= T::lit(0.75) * T::lit(2.0).powi(q + 1) {
            return q;
        }
        q += 1;
    }
}

/// Frequency projection Delta_q: chi(D) for q = -1, phi(2^{-q} D) for q >= 0.
pub fn dyadic_block<T: Scalar>(f: &GridFunction<T>, q: i32) -> Result<GridFunction<T>> {
    if q < -1 {
        return Err(Error::invalid("block index starts at -1"));
    }
    if !f.is_finite() {
        return Err(Error::BlownUpState);
    }
    if q > max_block_index(f.grid()) {
        return Ok(GridFunction::zeros(f.grid().clone()));
    }
    let zero = T::zero();
    if q == -1 {
        Ok(f.apply_multiplier_fn(|k| Cplx::new(low_pass_symbol(k), zero)))
    } else {
        let scale = T::lit(2.0).powi(-q);
        Ok(f.apply_multiplier_fn(|k| Cplx::new(ring_symbol(k * scale), zero)))
    }
}

/// All possibly nonzero blocks, indices -1 ..= max_block_index.
pub fn dyadic_blocks<T: Scalar>(f: &GridFunction<T>) -> Result<Vec<GridFunction<T>>> {
    (-1..=max_block_index(f.grid()))
        .map(|q| dyadic_block(f, q))
        .collect()
}

/// Running low-pass S_q = chi(2^{-q} D), q >= 0; equals the sum of blocks
/// below q by the telescoping of the symbols.
pub fn low_freq_cutoff<T: Scalar>(f: &GridFunction<T>, q: i32) -> Result<GridFunction<T>> {
    if q < 0 {
        return Err(Error::invalid("cutoff index starts at 0"));
    }
    if !f.is_finite() {
        return Err(Error::BlownUpState);
    }
    let scale = T::lit(2.0).powi(-q);
    let zero = T::zero();
    Ok(f.apply_multiplier_fn(|k| Cplx::new(low_pass_symbol(k * scale), zero)))
}

#[derive(Debug, Clone, Copy)]
pub struct BesovParams<T> {
    /// Regularity index.
    pub s: T,
    /// Spatial integrability exponent, in [1, inf].
    pub p: T,
    /// Summability across scales, in [1, inf].
    pub r: T,
}

impl<T: Scalar> BesovParams<T> {
    pub fn new(s: T, p: T, r: T) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::invalid("regularity index must be finite"));
        }
        if p.is_nan() || p < T::one() || r.is_nan() || r < T::one() {
            return Err(Error::invalid("integrability exponents must be >= 1"));
        }
        Ok(BesovParams { s, p, r })
    }
}

/// Besov norm: the l^r aggregate over scales of 2^{qs} ||Delta_q f||_{L^p}.
pub fn besov_norm<T: Scalar>(f: &GridFunction<T>, params: &BesovParams<T>) -> Result<T> {
    let mut terms = Vec::new();
    for q in -1..=max_block_index(f.grid()) {
        let block = dyadic_block(f, q)?;
        let weight = T::lit(2.0).powf(T::from_i32(q).unwrap() * params.s);
        terms.push(weight * lp_norm(&block, params.p)?);
    }
    if params.r == T::infinity() {
        Ok(terms.into_iter().fold(T::zero(), |a, b| a.max(b)))
    } else if params.r == T::lit(2.0) {
        Ok(terms.into_iter().map(|t| t * t).sum::<T>().sqrt())
    } else {
        let r = params.r;
        Ok(terms
            .into_iter()
            .map(|t| t.powf(r))
            .sum::<T>()
            .powf(r.recip()))
    }
}

/// Sobolev norm by direct spectral quadrature,
/// (2L sum (1 + k^2)^s |c_k|^2)^{1/2}.
pub fn sobolev_norm<T: Scalar>(f: &GridFunction<T>, s: T) -> Result<T> {
    if !f.is_finite() {
        return Err(Error::BlownUpState);
    }
    let grid = f.grid();
    let two_l = T::lit(2.0) * grid.half_length();
    let total: T = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let k = grid.wavenumber(j);
            (T::one() + k * k).powf(s) * c.norm_sqr()
        })
        .sum();
    Ok((two_l * total).sqrt())
}
