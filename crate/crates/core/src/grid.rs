//! Periodic grid on [-L, L) and complex grid functions, plus the spectral
//! primitives everything else is built from.
//!
//! Transform conventions, fixed once and used everywhere:
//! samples live at x_j = -L + j*dx with dx = 2L/N; the forward DFT is
//! unnormalized and the factor 1/N sits on the inverse; the wavenumber layout
//! is [0, 1, .., N/2-1, -N/2, .., -1] scaled by pi/L. Odd multipliers such as
//! the first derivative zero the unpaired Nyquist mode so real data stays
//! real; even multipliers keep the true Nyquist wavenumber.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Scalar};

#[derive(Clone)]
pub struct Grid<T: Scalar> {
    half_length: T,
    points: usize,
    spacing: T,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    // transforms on the 3N/2 grid used by the dealiased product
    fwd_pad: Arc<dyn Fft<T>>,
    inv_pad: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Grid<T> {
    /// Builds a grid with `points` samples (a power of two, at least 8) on
    /// [-half_length, half_length).
    pub fn new(half_length: T, points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > T::zero()) {
            return Err(Error::invalid("half_length must be positive and finite"));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "point count must be a power of two >= 8, got {points}"
            )));
        }
        let two = T::lit(2.0);
        let spacing = two * half_length / T::from_usize(points).unwrap();
        let mut planner = FftPlanner::<T>::new();
        let padded = 3 * points / 2;
        Ok(Grid {
            half_length,
            points,
            spacing,
            fwd: planner.plan_fft_forward(points),
            inv: planner.plan_fft_inverse(points),
            fwd_pad: planner.plan_fft_forward(padded),
            inv_pad: planner.plan_fft_inverse(padded),
        })
    }

    pub fn point_count(&self) -> usize {
        self.points
    }

    pub fn half_length(&self) -> T {
        self.half_length
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Sample location x_j = -L + j*dx.
    pub fn point(&self, j: usize) -> T {
        debug_assert!(j < self.points);
        -self.half_length + self.spacing * T::from_usize(j).unwrap()
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.points).map(|j| self.point(j)).collect()
    }

    /// Signed mode number of slot j in the standard layout.
    pub fn mode_number(&self, j: usize) -> isize {
        debug_assert!(j < self.points);
        if j < self.points / 2 {
            j as isize
        } else {
            j as isize - self.points as isize
        }
    }

    /// Wavenumber k_j = pi * n_j / L of slot j (true value, Nyquist included).
    pub fn wavenumber(&self, j: usize) -> T {
        T::PI() * T::from_isize(self.mode_number(j)).unwrap() / self.half_length
    }

    /// Wavenumber used by odd (derivative-like) multipliers: the unpaired
    /// Nyquist mode is zeroed so conjugate symmetry survives.
    pub fn derivative_wavenumber(&self, j: usize) -> T {
        if j == self.points / 2 {
            T::zero()
        } else {
            self.wavenumber(j)
        }
    }

    pub fn wavenumbers(&self) -> Vec<T> {
        (0..self.points).map(|j| self.wavenumber(j)).collect()
    }

    /// Largest resolved wavenumber magnitude, pi*N/(2L).
    pub fn nyquist(&self) -> T {
        T::PI() * T::from_usize(self.points / 2).unwrap() / self.half_length
    }

    /// Wraps a coordinate into [-L, L).
    pub fn wrap(&self, x: T) -> T {
        wrap_periodic(x, self.half_length)
    }

    fn fft_in_place(&self, buf: &mut [Complex<T>]) {
        self.fwd.process(buf);
    }

    fn ifft_in_place(&self, buf: &mut [Complex<T>]) {
        self.inv.process(buf);
    }
}

/// Wraps a coordinate into [-half_length, half_length).
pub fn wrap_periodic<T: Scalar>(x: T, half_length: T) -> T {
    let period = T::lit(2.0) * half_length;
    let mut y = x - period * ((x + half_length) / period).floor();
    // floating-point floor can land exactly on the right endpoint
    if y >= half_length {
        y -= period;
    }
    if y < -half_length {
        y += period;
    }
    y
}

impl<T: Scalar> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Grid {{ half_length: {}, points: {} }}",
            self.half_length, self.points
        )
    }
}

impl<T: Scalar> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.half_length == other.half_length && self.points == other.points
    }
}

/// Complex samples on a grid. Length always equals the grid's point count.
#[derive(Clone, Debug)]
pub struct GridFunction<T: Scalar> {
    grid: Grid<T>,
    values: Vec<Cplx<T>>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn from_values(grid: Grid<T>, values: Vec<Cplx<T>>) -> Result<Self> {
        if values.len() != grid.point_count() {
            return Err(Error::LengthMismatch {
                expected: grid.point_count(),
                got: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> Cplx<T>) -> Self {
        let values = (0..grid.point_count()).map(|j| f(grid.point(j))).collect();
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        let values = vec![Cplx::new(T::zero(), T::zero()); grid.point_count()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Cplx<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Cplx<T>) -> Cplx<T>) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn zip(&self, other: &Self, f: impl Fn(Cplx<T>, Cplx<T>) -> Cplx<T>) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Largest sample modulus without finiteness checks; NaN poisons the
    /// result, which run drivers detect separately.
    pub fn max_modulus(&self) -> T {
        self.values
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
            .sqrt()
    }

    /// Normalized Fourier coefficients c_n = (1/N) sum_j f_j e^{-2 pi i nj/N},
    /// indexed by the standard wavenumber layout.
    pub fn spectrum(&self) -> Vec<Cplx<T>> {
        let mut buf = self.values.clone();
        self.grid.fft_in_place(&mut buf);
        let scale = T::one() / T::from_usize(self.len()).unwrap();
        for z in &mut buf {
            *z = z.scale(scale);
        }
        buf
    }

    /// Inverse of `spectrum`: synthesizes samples from normalized coefficients.
    pub fn from_spectrum(grid: Grid<T>, coeffs: Vec<Cplx<T>>) -> Result<Self> {
        if coeffs.len() != grid.point_count() {
            return Err(Error::LengthMismatch {
                expected: grid.point_count(),
                got: coeffs.len(),
            });
        }
        let mut buf = coeffs;
        grid.ifft_in_place(&mut buf);
        Ok(GridFunction { grid, values: buf })
    }

    /// Applies a diagonal Fourier multiplier given per-slot values.
    pub fn apply_multiplier(&self, multiplier: &[Cplx<T>]) -> Result<Self> {
        if multiplier.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: multiplier.len(),
            });
        }
        let mut buf = self.values.clone();
        self.grid.fft_in_place(&mut buf);
        let scale = T::one() / T::from_usize(self.len()).unwrap();
        for (z, s) in buf.iter_mut().zip(multiplier) {
            *z = (*z * s).scale(scale);
        }
        self.grid.ifft_in_place(&mut buf);
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: buf,
        })
    }

    /// Applies a multiplier defined as a function of the (true) wavenumber.
    pub fn apply_multiplier_fn(&self, sigma: impl Fn(T) -> Cplx<T>) -> Self {
        let multiplier: Vec<Cplx<T>> =
            (0..self.len()).map(|j| sigma(self.grid.wavenumber(j))).collect();
        self.apply_multiplier(&multiplier)
            .expect("multiplier built to length")
    }
}

/// Spectral first derivative; exact on resolved modes, Nyquist zeroed.
pub fn spectral_derivative<T: Scalar>(f: &GridFunction<T>) -> Result<GridFunction<T>> {
    if !f.is_finite() {
        return Err(Error::BlownUpState);
    }
    let grid = f.grid();
    let multiplier: Vec<Cplx<T>> = (0..f.len())
        .map(|j| Cplx::new(T::zero(), grid.derivative_wavenumber(j)))
        .collect();
    f.apply_multiplier(&multiplier)
}

/// Pointwise product on the sample grid, no dealiasing.
pub fn pointwise_product<T: Scalar>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    f.zip(g, |a, b| a * b)
}

/// Product with 3/2-rule zero padding: both factors are synthesized on a
/// 3N/2 grid, multiplied there, and the result truncated back to N modes.
/// Alias-free for quadratic products of fully resolved factors.
pub fn dealiased_product<T: Scalar>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    let n = grid.point_count();
    let m = 3 * n / 2;

    // the lone Nyquist slot is split half and half across +-N/2 on the
    // padded grid so real inputs stay conjugate symmetric
    let pad = |coeffs: Vec<Cplx<T>>| -> Vec<Cplx<T>> {
        let mut out = vec![Cplx::new(T::zero(), T::zero()); m];
        let half = T::lit(0.5);
        for (j, c) in coeffs.into_iter().enumerate() {
            if j < n / 2 {
                out[j] = c;
            } else if j == n / 2 {
                out[n / 2] = c.scale(half);
                out[m - n / 2] = c.scale(half);
            } else {
                out[m - (n - j)] = c;
            }
        }
        out
    };

    let mut fbuf = pad(f.spectrum());
    let mut gbuf = pad(g.spectrum());
    grid.inv_pad.process(&mut fbuf);
    grid.inv_pad.process(&mut gbuf);

    let mut prod: Vec<Cplx<T>> = fbuf.iter().zip(&gbuf).map(|(&a, &b)| a * b).collect();
    grid.fwd_pad.process(&mut prod);
    let scale = T::one() / T::from_usize(m).unwrap();

    // truncation zeroes the Nyquist slot: realness-preserving, and the
    // discrete product rule stays exact for the evolution algebra
    let mut coeffs = vec![Cplx::new(T::zero(), T::zero()); n];
    for (j, c) in coeffs.iter_mut().enumerate() {
        if j == n / 2 {
            continue;
        }
        let mode = if j < n / 2 { j } else { m - (n - j) };
        *c = prod[mode].scale(scale);
    }
    let mut buf = coeffs;
    grid.ifft_in_place(&mut buf);
    Ok(GridFunction {
        grid: grid.clone(),
        values: buf,
    })
}

fn validate_exponent<T: Scalar>(p: T) -> Result<()> {
    if p.is_nan() || p < T::one() {
        return Err(Error::invalid(format!(
            "L^p exponent must satisfy p >= 1 (or infinity), got {p}"
        )));
    }
    Ok(())
}

fn lp_accumulate<T: Scalar>(moduli_sq: impl Iterator<Item = T>, p: T, spacing: T) -> T {
    let two = T::lit(2.0);
    if p == T::infinity() {
        moduli_sq.fold(T::zero(), |a, b| if b > a { b } else { a }).sqrt()
    } else if p == T::one() {
        moduli_sq.map(|m2| m2.sqrt()).sum::<T>() * spacing
    } else if p == two {
        (moduli_sq.sum::<T>() * spacing).sqrt()
    } else {
        let half_p = p / two;
        (moduli_sq.map(|m2| m2.powf(half_p)).sum::<T>() * spacing).powf(T::one() / p)
    }
}

/// Discrete L^p norm (left-endpoint quadrature), p in [1, inf]. U(1)-invariant
/// since only sample moduli enter. Non-finite samples raise `BlownUpState`.
pub fn lp_norm<T: Scalar>(f: &GridFunction<T>, p: T) -> Result<T> {
    validate_exponent(p)?;
    if !f.is_finite() {
        return Err(Error::BlownUpState);
    }
    Ok(lp_accumulate(
        f.values().iter().map(|z| z.norm_sqr()),
        p,
        f.grid().spacing(),
    ))
}

/// L^p norm of real samples with explicit spacing.
pub fn lp_norm_real<T: Scalar>(samples: &[T], p: T, spacing: T) -> Result<T> {
    validate_exponent(p)?;
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::BlownUpState);
    }
    Ok(lp_accumulate(samples.iter().map(|&x| x * x), p, spacing))
}

/// Real and imaginary parts of a grid function as two real sample arrays.
#[derive(Clone, Debug)]
pub struct ComplexPair<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> ComplexPair<T> {
    pub fn split(f: &GridFunction<T>) -> Self {
        ComplexPair {
            re: f.values().iter().map(|z| z.re).collect(),
            im: f.values().iter().map(|z| z.im).collect(),
        }
    }

    /// Rebuilds f = re + i*im on the given grid; exact inverse of `split`.
    pub fn combine(&self, grid: &Grid<T>) -> Result<GridFunction<T>> {
        if self.re.len() != self.im.len() {
            return Err(Error::LengthMismatch {
                expected: self.re.len(),
                got: self.im.len(),
            });
        }
        let values = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| Cplx::new(a, b))
            .collect();
        GridFunction::from_values(grid.clone(), values)
    }
}

/// Norm sandwich for a complex function split into real parts:
/// (|f1| + |f2|)/2 <= |f1 + i f2| <= |f1| + |f2| in any L^p.
/// Returns (lower, middle, upper).
pub fn complex_pair_norm_sandwich<T: Scalar>(
    f1: &[T],
    f2: &[T],
    p: T,
    spacing: T,
) -> Result<(T, T, T)> {
    if f1.len() != f2.len() {
        return Err(Error::LengthMismatch {
            expected: f1.len(),
            got: f2.len(),
        });
    }
    let n1 = lp_norm_real(f1, p, spacing)?;
    let n2 = lp_norm_real(f2, p, spacing)?;
    validate_exponent(p)?;
    let mid = lp_accumulate(
        f1.iter().zip(f2).map(|(&a, &b)| a * a + b * b),
        p,
        spacing,
    );
    let lower = (n1 + n2) / T::lit(2.0);
    let upper = n1 + n2;
    Ok((lower, mid, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: f64, n: usize) -> Grid<f64> {
        Grid::new(l, n).unwrap()
    }

    #[test]
    fn rejects_bad_point_counts_and_lengths() {
        assert!(Grid::new(20.0, 0).is_err());
        assert!(Grid::new(20.0, 4).is_err());
        assert!(Grid::new(20.0, 100).is_err());
        assert!(Grid::new(0.0, 64).is_err());
        assert!(Grid::new(f64::NAN, 64).is_err());
        assert!(Grid::new(20.0, 64).is_ok());
    }

    #[test]
    fn wavenumber_layout_matches_fft_convention() {
        // L = pi makes the wavenumbers the integer mode numbers themselves
        let g = grid(std::f64::consts::PI, 8);
        let k: Vec<f64> = g.wavenumbers();
        let expect = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in k.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert_eq!(g.spacing(), 2.0 * std::f64::consts::PI / 8.0);
        assert_eq!(g.point(0), -std::f64::consts::PI);
    }

    #[test]
    fn wrap_covers_both_endpoints() {
        let g = grid(20.0, 64);
        assert_eq!(g.wrap(20.0), -20.0);
        assert_eq!(g.wrap(-20.0), -20.0);
        assert!((g.wrap(61.0) - (-19.0)).abs() < 1e-12);
        assert!((g.wrap(-21.0) - 19.0).abs() < 1e-12);
    }

    #[test]
    fn constant_function_norms() {
        let g = grid(20.0, 128);
        let one = GridFunction::from_fn(g.clone(), |_| Cplx::new(1.0, 0.0));
        for p in [1.0, 2.0, 3.5, 7.0] {
            let expect = (2.0 * 20.0f64).powf(1.0 / p);
            let got = lp_norm(&one, p).unwrap();
            assert!((got - expect).abs() < 1e-12 * expect, "p={p}: {got} vs {expect}");
        }
        assert_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn norm_rejects_bad_exponents_and_nan_samples() {
        let g = grid(20.0, 64);
        let one = GridFunction::from_fn(g.clone(), |_| Cplx::new(1.0, 0.0));
        assert!(matches!(lp_norm(&one, 0.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(lp_norm(&one, f64::NAN), Err(Error::InvalidParameter(_))));

        let mut bad = one.clone();
        bad.values_mut()[3] = Cplx::new(f64::NAN, 0.0);
        assert!(matches!(lp_norm(&bad, 2.0), Err(Error::BlownUpState)));
        let mut inf = one;
        inf.values_mut()[5] = Cplx::new(1.0, f64::INFINITY);
        assert!(matches!(lp_norm(&inf, 1.0), Err(Error::BlownUpState)));
    }

    #[test]
    fn derivative_of_single_mode_is_exact() {
        // oracle: d/dx sin(kx) = k cos(kx) with k = 3*pi/L
        let l = 20.0;
        let g = grid(l, 256);
        let k = 3.0 * std::f64::consts::PI / l;
        let f = GridFunction::from_fn(g.clone(), |x| Cplx::new((k * x).sin(), 0.0));
        let d = spectral_derivative(&f).unwrap();
        for (j, z) in d.values().iter().enumerate() {
            let expect = k * (k * g.point(j)).cos();
            assert!(
                (z.re - expect).abs() <= 1e-12 * k && z.im.abs() <= 1e-12 * k,
                "slot {j}: {} vs {expect}",
                z.re
            );
        }
    }

    #[test]
    fn second_derivative_matches_minus_k_squared_multiplier() {
        let g = grid(10.0, 128);
        let f = GridFunction::from_fn(g.clone(), |x| {
            Cplx::new((-0.5 * x * x).exp(), (0.3 * x).sin() * (-0.1 * x * x).exp())
        });
        let dd = spectral_derivative(&spectral_derivative(&f).unwrap()).unwrap();
        let mult: Vec<Cplx<f64>> = (0..g.point_count())
            .map(|j| {
                let k = g.derivative_wavenumber(j);
                Cplx::new(-k * k, 0.0)
            })
            .collect();
        let direct = f.apply_multiplier(&mult).unwrap();
        let diff = dd.zip(&direct, |a, b| a - b).unwrap();
        let scale = direct.max_modulus().max(1.0);
        assert!(diff.max_modulus() <= 1e-13 * scale);
    }

    #[test]
    fn parseval_ties_l2_norm_to_spectrum() {
        let g = grid(20.0, 256);
        let f = GridFunction::from_fn(g.clone(), |x| {
            Cplx::new((-0.3 * x * x).exp(), 0.2 * (0.9 * x).cos())
        });
        let l2 = lp_norm(&f, 2.0).unwrap();
        let energy: f64 = f.spectrum().iter().map(|c| c.norm_sqr()).sum();
        let spectral = (2.0 * g.half_length() * energy).sqrt();
        assert!((l2 - spectral).abs() <= 1e-12 * l2);
    }

    #[test]
    fn spectrum_round_trips() {
        let g = grid(5.0, 64);
        let f = GridFunction::from_fn(g.clone(), |x| Cplx::new((1.1 * x).sin(), (0.4 * x).cos()));
        let back = GridFunction::from_spectrum(g, f.spectrum()).unwrap();
        let diff = f.zip(&back, |a, b| a - b).unwrap();
        assert!(diff.max_modulus() < 1e-13);
    }

    #[test]
    fn gauge_rotation_leaves_norms_unchanged_to_ulps() {
        let g = grid(20.0, 512);
        let f = GridFunction::from_fn(g, |x| Cplx::new((-x * x / 8.0).exp(), (0.7 * x).sin()));
        let alpha = 1.234567;
        let rot = Cplx::from_polar(1.0, alpha);
        let fr = f.map(|z| z * rot);
        for p in [1.0, 2.0, f64::INFINITY] {
            let a = lp_norm(&f, p).unwrap();
            let b = lp_norm(&fr, p).unwrap();
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a, "p={p}");
        }
    }

    #[test]
    fn dealiased_product_matches_pointwise_on_low_modes() {
        // both factors band-limited to |n| < N/3: the pointwise product is
        // already alias-free, so the padded route must agree to roundoff
        let l = std::f64::consts::PI;
        let g = grid(l, 64);
        let f = GridFunction::from_fn(g.clone(), |x| Cplx::from_polar(1.0, 3.0 * x));
        let h = GridFunction::from_fn(g.clone(), |x| Cplx::new((5.0 * x).cos(), (2.0 * x).sin()));
        let plain = pointwise_product(&f, &h).unwrap();
        let padded = dealiased_product(&f, &h).unwrap();
        let diff = plain.zip(&padded, |a, b| a - b).unwrap();
        assert!(diff.max_modulus() < 1e-13);
    }

    #[test]
    fn sandwich_is_tight_when_one_part_vanishes() {
        let g = grid(20.0, 128);
        let f1: Vec<f64> = (0..128).map(|j| (j as f64 * 0.1).sin()).collect();
        let f2 = vec![0.0; 128];
        let (lo, mid, hi) = complex_pair_norm_sandwich(&f1, &f2, 2.0, g.spacing()).unwrap();
        assert_eq!(mid, hi);
        assert!((lo - hi / 2.0).abs() <= f64::EPSILON * hi);
        assert!(complex_pair_norm_sandwich(&f1, &f2[..64], 2.0, 0.1).is_err());
    }

    #[test]
    fn split_combine_round_trips_exactly() {
        let g = grid(7.0, 32);
        let f = GridFunction::from_fn(g.clone(), |x| Cplx::new(x.sin(), x.cos()));
        let pair = ComplexPair::split(&f);
        let back = pair.combine(&g).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::new(std::f32::consts::PI, 64).unwrap();
        let f = GridFunction::from_fn(g.clone(), |x| Cplx::new(x.sin(), 0.0));
        let d = spectral_derivative(&f).unwrap();
        for (j, z) in d.values().iter().enumerate() {
            assert!((z.re - g.point(j).cos()).abs() < 1e-4);
        }
        let n = lp_norm(&f, 2.0f32).unwrap();
        assert!(n.is_finite() && n > 0.0);
    }
}
