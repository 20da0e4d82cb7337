//! The exact peaked traveling wave of the family and its tracking tools.
//!
//! For amplitude a and family angle theta the profile
//! u(x, t) = a e^{i phi} e^{i omega t - |x - x0 - c t|} solves the equation
//! with c = (2/3) a^2 cos(theta) and omega = (2/3) a^2 sin(theta); at
//! theta = pi/2 it degenerates to a stationary breather. The momentum of
//! the exact wave is a point mass 2 a e^{i phi} at the crest, so grid
//! experiments start from a Gaussian-mollified momentum whose discrete L1
//! mass is exactly 2a by construction.

use crate::error::{Error, Result};
use crate::fields::validate_theta;
use crate::grid::{wrap_periodic, Grid, GridFunction};
use crate::scalar::{Cplx, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct Peakon<T: Scalar> {
    amplitude: T,
    phase: T,
    theta: T,
    crest: T,
}

impl<T: Scalar> Peakon<T> {
    pub fn new(amplitude: T, phase: T, theta: T, crest: T) -> Result<Self> {
        validate_theta(theta)?;
        if !(amplitude.is_finite() && amplitude > T::zero()) {
            return Err(Error::invalid("amplitude must be positive and finite"));
        }
        let two_pi = T::lit(2.0) * T::PI();
        if !(phase.is_finite() && phase >= T::zero() && phase < two_pi) {
            return Err(Error::invalid("phase must lie in [0, 2 pi)"));
        }
        if !crest.is_finite() {
            return Err(Error::invalid("crest position must be finite"));
        }
        Ok(Peakon {
            amplitude,
            phase,
            theta,
            crest,
        })
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn phase(&self) -> T {
        self.phase
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn crest(&self) -> T {
        self.crest
    }

    /// c = (2/3) a^2 cos(theta).
    pub fn speed(&self) -> T {
        T::lit(2.0) / T::lit(3.0) * self.amplitude * self.amplitude * self.theta.cos()
    }

    /// omega = (2/3) a^2 sin(theta).
    pub fn frequency(&self) -> T {
        T::lit(2.0) / T::lit(3.0) * self.amplitude * self.amplitude * self.theta.sin()
    }

    /// The exact wave at one point, with the crest distance wrapped to the
    /// periodic domain of the given half length.
    pub fn eval(&self, x: T, t: T, half_length: T) -> Cplx<T> {
        let d = wrap_periodic(x - self.crest - self.speed() * t, half_length);
        let angle = self.phase + self.frequency() * t;
        Cplx::from_polar(self.amplitude * (-d.abs()).exp(), angle)
    }

    pub fn sample(&self, grid: &Grid<T>, t: T) -> GridFunction<T> {
        let l = grid.half_length();
        GridFunction::from_fn(grid.clone(), |x| self.eval(x, t, l))
    }

    /// Momentum at t = 0 with the point mass replaced by a periodic Gaussian
    /// of width sigma, normalized against its own discrete sum so that the
    /// grid L1 norm equals 2a exactly.
    pub fn mollified_momentum(&self, grid: &Grid<T>, sigma: T) -> Result<GridFunction<T>> {
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(Error::invalid("mollification width must be positive"));
        }
        let l = grid.half_length();
        let inv = (T::lit(2.0) * sigma * sigma).recip();
        let bumps: Vec<T> = (0..grid.point_count())
            .map(|j| {
                let d = wrap_periodic(grid.point(j) - self.crest, l);
                (-d * d * inv).exp()
            })
            .collect();
        let mass: T = bumps.iter().copied().sum::<T>() * grid.spacing();
        if !(mass > T::zero()) {
            return Err(Error::invalid(
                "mollified bump vanished on the grid; sigma too small",
            ));
        }
        let front = Cplx::from_polar(T::lit(2.0) * self.amplitude / mass, self.phase);
        GridFunction::from_values(
            grid.clone(),
            bumps.into_iter().map(|b| front.scale(b)).collect(),
        )
    }
}

/// Sub-grid crest location and height from a profile with a single peaked
/// maximum: the two secant lines of log|u| through the samples just left
/// and just right of the discrete maximum are intersected. Exact for tent
/// profiles (the peakon in log space) and second order for smooth caps.
pub fn track_crest<T: Scalar>(u: &GridFunction<T>) -> Result<(T, T)> {
    if !u.is_finite() {
        return Err(Error::BlownUpState);
    }
    let n = u.len();
    if n < 8 {
        return Err(Error::invalid("profile too short to track"));
    }
    let grid = u.grid();
    let mut jmax = 0usize;
    let mut best = T::neg_infinity();
    for (j, z) in u.values().iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            jmax = j;
        }
    }
    // five consecutive samples centered on the discrete maximum, on an
    // unwrapped axis so the seam never splits them
    let dx = grid.spacing();
    let x0 = grid.point(jmax);
    let mut y = [T::zero(); 5];
    for (o, slot) in y.iter_mut().enumerate() {
        let j = (jmax + n + o - 2) % n;
        let m = u.values()[j].norm();
        if !(m > T::zero()) {
            return Err(Error::TrackingFailure(
                "samples next to the crest vanish".into(),
            ));
        }
        *slot = m.ln();
    }
    let left_slope = (y[1] - y[0]) / dx;
    let right_slope = (y[4] - y[3]) / dx;
    let gap = left_slope - right_slope;
    if !(gap > T::zero()) {
        return Err(Error::TrackingFailure(
            "profile is not peaked at its maximum".into(),
        ));
    }
    // left line through (x0 - dx, y[1]), right line through (x0 + dx, y[3])
    let xl = x0 - dx;
    let xr = x0 + dx;
    let xs = (y[3] - y[1] + left_slope * xl - right_slope * xr) / gap;
    let ys = y[1] + left_slope * (xs - xl);
    Ok((wrap_periodic(xs, grid.half_length()), ys.exp()))
}

/// How closely a simulated profile series follows the exact wave.
#[derive(Debug, Clone, Copy)]
pub struct TrackingReport<T> {
    pub fitted_speed: T,
    pub fitted_frequency: T,
    /// |fitted speed - c|.
    pub speed_error: T,
    /// |fitted rate - omega|.
    pub frequency_error: T,
    /// Shift-minimized relative L2 distance of the final |u| to the exact
    /// profile shape.
    pub shape_error: T,
}

/// Least-squares slope through (t, y).
fn fitted_slope<T: Scalar>(ts: &[T], ys: &[T]) -> T {
    let n = T::from_usize(ts.len()).unwrap();
    let tbar = ts.iter().copied().sum::<T>() / n;
    let ybar = ys.iter().copied().sum::<T>() / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&t, &y) in ts.iter().zip(ys) {
        num += (t - tbar) * (y - ybar);
        den += (t - tbar) * (t - tbar);
    }
    num / den
}

/// Accumulate increments folded into (-half, half] onto a running value.
fn unwrap_series<T: Scalar>(values: &[T], half: T) -> Vec<T> {
    let period = T::lit(2.0) * half;
    let mut out = Vec::with_capacity(values.len());
    let mut level = T::zero();
    for (j, &v) in values.iter().enumerate() {
        if j > 0 {
            let prev = values[j - 1];
            let mut diff = v - prev;
            while diff > half {
                diff -= period;
                level -= period;
            }
            while diff <= -half {
                diff += period;
                level += period;
            }
        }
        out.push(v + level);
    }
    out
}

fn golden_minimize<T: Scalar>(mut a: T, mut b: T, iterations: usize, f: impl Fn(T) -> T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Fits crest speed and phase rate across a series of profiles and measures
/// the final shape against the exact wave. Fails with `TrackingFailure` if
/// the crest decays below 0.1 a anywhere in the series.
pub fn peakon_tracking_error<T: Scalar>(
    times: &[T],
    profiles: &[GridFunction<T>],
    peakon: &Peakon<T>,
) -> Result<TrackingReport<T>> {
    if times.len() != profiles.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: profiles.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::invalid("need at least two profiles to fit rates"));
    }
    for pair in times.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid("profile times must be strictly increasing"));
        }
    }
    let grid = profiles[0].grid().clone();
    for p in profiles {
        if p.grid() != &grid {
            return Err(Error::GridMismatch);
        }
    }
    let floor = T::lit(0.1) * peakon.amplitude();

    let mut positions = Vec::with_capacity(profiles.len());
    let mut phases = Vec::with_capacity(profiles.len());
    for p in profiles {
        if p.max_modulus() < floor {
            return Err(Error::TrackingFailure(
                "crest amplitude fell below a tenth of the exact height".into(),
            ));
        }
        let (pos, _) = track_crest(p)?;
        positions.push(pos);
        // phase is read at the discrete maximum sample
        let jmax = argmax_modulus(p);
        phases.push(p.values()[jmax].arg());
    }
    let l = grid.half_length();
    let unwrapped_pos = unwrap_series(&positions, l);
    let unwrapped_phase = unwrap_series(&phases, T::PI());
    let fitted_speed = fitted_slope(times, &unwrapped_pos);
    let fitted_frequency = fitted_slope(times, &unwrapped_phase);

    // shape: golden-section over the crest shift around the tracked crest
    let last = profiles.last().unwrap();
    let crest_guess = positions[positions.len() - 1];
    let dx = grid.spacing();
    let a = peakon.amplitude();
    let distance = |shift: T| -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for (j, z) in last.values().iter().enumerate() {
            let d = wrap_periodic(grid.point(j) - shift, l);
            let exact = a * (-d.abs()).exp();
            let diff = z.norm() - exact;
            num += diff * diff;
            den += exact * exact;
        }
        (num / den).sqrt()
    };
    let shift = golden_minimize(crest_guess - dx, crest_guess + dx, 90, &distance);
    let shape_error = distance(shift);

    Ok(TrackingReport {
        fitted_speed,
        fitted_frequency,
        speed_error: (fitted_speed - peakon.speed()).abs(),
        frequency_error: (fitted_frequency - peakon.frequency()).abs(),
        shape_error,
    })
}

fn argmax_modulus<T: Scalar>(f: &GridFunction<T>) -> usize {
    let mut jmax = 0usize;
    let mut best = T::neg_infinity();
    for (j, z) in f.values().iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            jmax = j;
        }
    }
    jmax
}
