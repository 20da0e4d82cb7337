//! Lagrangian evolution of the momentum along characteristics.
//!
//! Positions follow dh/dt = J(h). The combination m(h) h_x keeps constant
//! modulus (the advective stretching J_x h_x cancels analytically against the
//! -J_x part of the zeroth-order coefficient), so each particle carries a
//! frozen weight modulus and only its position and rotation angle evolve,
//! the angle at rate Im(e^{i theta} Q)(h). Total |weight| conservation is
//! therefore exact by construction, not a property of the integrator.
//!
//! Positions are stored unwrapped and strictly increasing with span under
//! one period; the flow map is an increasing diffeomorphism while the
//! solution is classical, so an ordering violation is itself the discrete
//! blow-up signal. Sortedness lets every kernel sum collapse to prefix and
//! suffix scans over w e^{+-h}, an exact reordering of the direct sums.

use crate::blowup::{BlowupEvent, BlowupReason, BlowupThresholds, RunRecord};
use crate::error::{Error, Result};
use crate::fields::validate_theta;
use crate::grid::{wrap_periodic, Grid, GridFunction};
use crate::scalar::{Cplx, Scalar};

#[derive(Clone, Debug)]
pub struct ParticleEnsemble<T: Scalar> {
    time: T,
    /// Unwrapped, strictly increasing, span < 2L.
    positions: Vec<T>,
    /// Accumulated rotation angles, zero at construction.
    phases: Vec<T>,
    /// |m0(x_j)| dx; never mutated after construction.
    weight_moduli: Vec<T>,
    /// arg m0(x_j); fixed.
    initial_phases: Vec<T>,
    theta: T,
    half_length: T,
    /// Grid spacing at initialization, the spacing-monitor reference.
    initial_spacing: T,
}

impl<T: Scalar> ParticleEnsemble<T> {
    /// One particle per grid node of m0: position x_j, weight |m0(x_j)| dx,
    /// initial phase arg m0(x_j), rotation angle zero.
    pub fn from_momentum(m0: &GridFunction<T>, theta: T) -> Result<Self> {
        validate_theta(theta)?;
        if !m0.is_finite() {
            return Err(Error::BlownUpState);
        }
        let grid = m0.grid();
        let dx = grid.spacing();
        Ok(ParticleEnsemble {
            time: T::zero(),
            positions: grid.positions(),
            phases: vec![T::zero(); m0.len()],
            weight_moduli: m0.values().iter().map(|z| z.norm() * dx).collect(),
            initial_phases: m0.values().iter().map(|z| z.arg()).collect(),
            theta,
            half_length: grid.half_length(),
            initial_spacing: dx,
        })
    }

    /// Explicit point-mass momentum data (a peakon train): one particle per
    /// (position, complex weight) pair. Positions must be strictly increasing
    /// with span under one period; the spacing monitor is referenced to the
    /// smallest initial cyclic gap.
    pub fn from_weights(
        positions: &[T],
        weights: &[Cplx<T>],
        theta: T,
        half_length: T,
    ) -> Result<Self> {
        validate_theta(theta)?;
        if !(half_length.is_finite() && half_length > T::zero()) {
            return Err(Error::invalid("half_length must be positive and finite"));
        }
        if positions.is_empty() || positions.len() != weights.len() {
            return Err(Error::invalid(
                "need equal, nonzero numbers of positions and weights",
            ));
        }
        if !(positions.iter().all(|x| x.is_finite())
            && weights.iter().all(|w| w.re.is_finite() && w.im.is_finite()))
        {
            return Err(Error::invalid("positions and weights must be finite"));
        }
        let ens = ParticleEnsemble {
            time: T::zero(),
            positions: positions.to_vec(),
            phases: vec![T::zero(); positions.len()],
            weight_moduli: weights.iter().map(|z| z.norm()).collect(),
            initial_phases: weights.iter().map(|z| z.arg()).collect(),
            theta,
            half_length,
            initial_spacing: T::zero(),
        };
        if !ens.is_ordered() {
            return Err(Error::invalid(
                "positions must increase strictly with span under one period",
            ));
        }
        Ok(ParticleEnsemble {
            initial_spacing: ens.min_gap(),
            ..ens
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn half_length(&self) -> T {
        self.half_length
    }

    pub fn initial_spacing(&self) -> T {
        self.initial_spacing
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }

    pub fn weight_moduli(&self) -> &[T] {
        &self.weight_moduli
    }

    pub fn initial_phases(&self) -> &[T] {
        &self.initial_phases
    }

    pub fn wrapped_positions(&self) -> Vec<T> {
        self.positions
            .iter()
            .map(|&h| wrap_periodic(h, self.half_length))
            .collect()
    }

    /// Complex weights w_j e^{i(arg m0_j + psi_j)}.
    pub fn momentum_weights(&self) -> Vec<Cplx<T>> {
        self.weight_moduli
            .iter()
            .zip(&self.initial_phases)
            .zip(&self.phases)
            .map(|((&w, &g), &p)| Cplx::from_polar(w, g + p))
            .collect()
    }

    /// Sum of the frozen weight moduli: the conserved L1 quadrature value.
    pub fn total_weight(&self) -> T {
        self.weight_moduli.iter().copied().sum()
    }

    /// Smallest cyclic gap between neighbors, in units of the initial
    /// spacing. Nonpositive means the ordering has been violated.
    pub fn spacing_ratio(&self) -> T {
        self.min_gap() / self.initial_spacing
    }

    fn min_gap(&self) -> T {
        let n = self.positions.len();
        if n < 2 {
            return T::lit(2.0) * self.half_length;
        }
        let mut min = self.positions[0] + T::lit(2.0) * self.half_length
            - self.positions[n - 1];
        for j in 0..n - 1 {
            min = min.min(self.positions[j + 1] - self.positions[j]);
        }
        min
    }

    /// Momentum-density magnitude at each particle, |W_j| over the centered
    /// half-gap. Deposition onto a grid caps densities at the cell scale, so
    /// the blow-up monitor reads this estimate instead.
    pub fn density_estimates(&self) -> Vec<T> {
        let n = self.positions.len();
        let period = T::lit(2.0) * self.half_length;
        let half = T::lit(0.5);
        (0..n)
            .map(|j| {
                let right = if j + 1 < n {
                    self.positions[j + 1]
                } else {
                    self.positions[0] + period
                };
                let left = if j > 0 {
                    self.positions[j - 1]
                } else {
                    self.positions[n - 1] - period
                };
                let gap = half * (right - left);
                if gap > T::zero() {
                    self.weight_moduli[j] / gap
                } else {
                    T::infinity()
                }
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|x| x.is_finite()) && self.phases.iter().all(|x| x.is_finite())
    }

    /// Strictly increasing positions spanning less than one period; while
    /// this holds the discrete flow map is invertible.
    pub fn is_ordered(&self) -> bool {
        let n = self.positions.len();
        if n < 2 {
            return true;
        }
        for j in 0..n - 1 {
            if !(self.positions[j + 1] > self.positions[j]) {
                return false;
            }
        }
        self.positions[n - 1] - self.positions[0] < T::lit(2.0) * self.half_length
    }
}

/// u and u_x evaluated at a set of points from the particle representation.
pub struct ParticleFields<T: Scalar> {
    pub u: Vec<Cplx<T>>,
    pub ux: Vec<Cplx<T>>,
}

/// Rates of change plus the stage quantities the run driver monitors.
pub struct ParticleRates<T: Scalar> {
    pub position_rate: Vec<T>,
    pub phase_rate: Vec<T>,
    pub max_position_rate: T,
    /// inf over particles of the advection slope J_x estimated from the
    /// momentum identity with the particle density in place of m.
    pub min_advection_slope: T,
}

pub struct ParticleSolver<T: Scalar> {
    theta: T,
    phase: Cplx<T>,
    half_length: T,
    /// Sources with weight below this fraction of the largest are skipped
    /// in kernel sums (they still move as passive tracers).
    drop_fraction: T,
    cfl_number: T,
}

impl<T: Scalar> ParticleSolver<T> {
    pub fn new(theta: T, half_length: T) -> Result<Self> {
        validate_theta(theta)?;
        if !(half_length.is_finite() && half_length > T::zero()) {
            return Err(Error::invalid("half_length must be positive and finite"));
        }
        Ok(ParticleSolver {
            theta,
            phase: Cplx::from_polar(T::one(), theta),
            half_length,
            drop_fraction: T::lit(1e-14),
            cfl_number: T::lit(0.5),
        })
    }

    pub fn for_ensemble(ens: &ParticleEnsemble<T>) -> Result<Self> {
        Self::new(ens.theta, ens.half_length)
    }

    pub fn with_drop_fraction(mut self, f: T) -> Self {
        self.drop_fraction = f;
        self
    }

    fn check(&self, ens: &ParticleEnsemble<T>) -> Result<()> {
        if ens.theta != self.theta || ens.half_length != self.half_length {
            return Err(Error::invalid(
                "ensemble parameters disagree with the solver",
            ));
        }
        if !ens.is_finite() {
            return Err(Error::BlownUpState);
        }
        Ok(())
    }

    /// u, u_x at every particle via prefix/suffix scans; identical in exact
    /// arithmetic to the direct kernel sums. Errors with `ParticleCollision`
    /// if the ordering invariant fails (the blow-up signal).
    pub fn fields_at_particles(&self, ens: &ParticleEnsemble<T>) -> Result<ParticleFields<T>> {
        self.check(ens)?;
        let weights = ens.momentum_weights();
        scan_fields_self(
            &ens.positions,
            &weights,
            &ens.weight_moduli,
            self.drop_fraction,
            self.half_length,
        )
    }

    /// Position and phase rates: dh/dt = Re(e^{i theta} Q), dpsi/dt =
    /// Im(e^{i theta} Q), with Q = (u + u_x)(conj u - conj u_x) at each
    /// particle.
    pub fn rates(&self, ens: &ParticleEnsemble<T>) -> Result<ParticleRates<T>> {
        let fields = self.fields_at_particles(ens)?;
        Ok(self.rates_from_fields(ens, &fields))
    }

    fn rates_from_fields(
        &self,
        ens: &ParticleEnsemble<T>,
        fields: &ParticleFields<T>,
    ) -> ParticleRates<T> {
        let n = ens.len();
        let mut position_rate = Vec::with_capacity(n);
        let mut phase_rate = Vec::with_capacity(n);
        let mut max_rate = T::zero();
        let twelfth = T::lit(12.0).recip();
        for ((&u, &ux), &w) in fields.u.iter().zip(&fields.ux).zip(ens.weight_moduli()) {
            // Across a particle's own weight, u_x sweeps a jump of size w;
            // averaging the flow over that mass fraction shifts the product
            // by -w^2/12 (real). With this shift an isolated particle moves
            // at exactly (2/3)a^2 cos(theta) and rotates at the matching
            // rate, so the discrete system has the peaked traveling wave as
            // an exact solution; for resolved smooth data the shift is an
            // O(dx^2) perturbation.
            let q = (u + ux) * (u - ux).conj() - Cplx::new(w * w * twelfth, T::zero());
            let e = self.phase * q;
            position_rate.push(e.re);
            phase_rate.push(e.im);
            max_rate = max_rate.max(e.re.abs());
        }
        // J_x from the momentum identity with the particle density estimate
        let weights = ens.momentum_weights();
        let densities = ens.density_estimates();
        let mut min_slope = T::infinity();
        for j in 0..n {
            let (u, ux) = (fields.u[j], fields.ux[j]);
            let m = (weights[j] / weights[j].norm().max(T::lit(1e-300)))
                .scale(densities[j].min(T::lit(1e300)));
            let qx = (u + ux) * m.conj() - (u - ux).conj() * m;
            min_slope = min_slope.min((self.phase * qx).re);
        }
        ParticleRates {
            position_rate,
            phase_rate,
            max_position_rate: max_rate,
            min_advection_slope: min_slope,
        }
    }

    /// One RK4 step on (h, psi). Weight moduli are untouched. The CFL guard
    /// dt <= cfl * dx0 / max|J| is evaluated on the first stage; violations
    /// are refused with the admissible dt.
    pub fn step(
        &self,
        ens: &ParticleEnsemble<T>,
        dt: T,
    ) -> Result<(ParticleEnsemble<T>, ParticleRates<T>)> {
        let stage1 = self.rates(ens)?;
        self.step_from_rates(ens, dt, stage1)
    }

    fn step_from_rates(
        &self,
        ens: &ParticleEnsemble<T>,
        dt: T,
        stage1: ParticleRates<T>,
    ) -> Result<(ParticleEnsemble<T>, ParticleRates<T>)> {
        if !(dt.is_finite()) || dt == T::zero() {
            return Err(Error::invalid("step size must be finite and nonzero"));
        }
        let dt_max = self.cfl_number * ens.initial_spacing
            / stage1.max_position_rate.max(T::lit(1e-300));
        if dt.abs() > dt_max {
            return Err(Error::CflViolation {
                dt: dt.abs().to_f64().unwrap_or(f64::NAN),
                dt_max: dt_max.to_f64().unwrap_or(f64::NAN),
            });
        }

        let half = T::lit(0.5);
        let sixth = T::lit(6.0).recip();
        let two = T::lit(2.0);

        let advance = |c: T, r: &ParticleRates<T>| -> ParticleEnsemble<T> {
            let mut next = ens.clone();
            for j in 0..next.positions.len() {
                next.positions[j] = ens.positions[j] + c * r.position_rate[j];
                next.phases[j] = ens.phases[j] + c * r.phase_rate[j];
            }
            next.time = ens.time + c;
            next
        };

        let k1 = stage1;
        let k2 = self.rates(&advance(half * dt, &k1))?;
        let k3 = self.rates(&advance(half * dt, &k2))?;
        let k4 = self.rates(&advance(dt, &k3))?;

        let mut next = ens.clone();
        for j in 0..next.positions.len() {
            let dh = k1.position_rate[j]
                + two * k2.position_rate[j]
                + two * k3.position_rate[j]
                + k4.position_rate[j];
            let dp = k1.phase_rate[j]
                + two * k2.phase_rate[j]
                + two * k3.phase_rate[j]
                + k4.phase_rate[j];
            next.positions[j] = ens.positions[j] + dt * sixth * dh;
            next.phases[j] = ens.phases[j] + dt * sixth * dp;
        }
        next.time = ens.time + dt;
        next.recenter();
        if !next.is_finite() {
            return Err(Error::BlownUpState);
        }
        if !next.is_ordered() {
            return Err(Error::ParticleCollision);
        }
        Ok((next, k1))
    }

    /// Fixed-step drive to t_end with per-step safety monitors. A blow-up
    /// declaration is an outcome carried in the returned record, not an
    /// error; only a misconfigured first step errors out.
    pub fn run(
        &self,
        initial: ParticleEnsemble<T>,
        dt: T,
        t_end: T,
        snapshot_every: usize,
        thresholds: &BlowupThresholds<T>,
    ) -> Result<RunRecord<ParticleEnsemble<T>, T>> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        if t_end < initial.time {
            return Err(Error::invalid("t_end precedes the initial time"));
        }
        let every = snapshot_every.max(1);
        let initial_density = ens_max_density(&initial).max(T::lit(1e-300));

        let mut record = RunRecord::new(initial.clone());
        let mut state = initial;
        let mut steps = 0usize;
        loop {
            // state-level declarations first, so a state that crossed a
            // threshold is reported with its own time
            if state.spacing_ratio() <= thresholds.spacing_ratio {
                record.declare(BlowupEvent {
                    time: state.time,
                    reason: BlowupReason::SpacingCollapse,
                    value: state.spacing_ratio(),
                });
                record.close(state, steps);
                return Ok(record);
            }
            let density = ens_max_density(&state);
            if density >= thresholds.amplitude_factor * initial_density {
                record.declare(BlowupEvent {
                    time: state.time,
                    reason: BlowupReason::AmplitudeGrowth,
                    value: density,
                });
                record.close(state, steps);
                return Ok(record);
            }

            let remaining = t_end - state.time;
            if remaining <= T::lit(1e-12) * t_end.abs().max(T::one()) {
                record.maybe_snapshot(&state, steps, every, true);
                record.close(state, steps);
                return Ok(record);
            }

            let stage1 = match self.rates(&state) {
                Ok(r) => r,
                Err(e) => {
                    record.declare(event_from_error(&e, state.time));
                    record.close(state, steps);
                    return Ok(record);
                }
            };
            record.observe_monitor(state.time, stage1.min_advection_slope, thresholds);
            if stage1.min_advection_slope <= -thresholds.monitor {
                record.declare(BlowupEvent {
                    time: state.time,
                    reason: BlowupReason::MonitorThreshold,
                    value: stage1.min_advection_slope,
                });
                record.close(state, steps);
                return Ok(record);
            }

            let this_dt = dt.min(remaining);
            match self.step_from_rates(&state, this_dt, stage1) {
                Ok((next, _)) => {
                    steps += 1;
                    record.maybe_snapshot(&next, steps, every, false);
                    state = next;
                }
                Err(e) => {
                    if steps == 0 {
                        if let Error::CflViolation { .. } = e {
                            // the configured dt was never viable
                            return Err(e);
                        }
                    }
                    record.declare(event_from_error(&e, state.time + this_dt));
                    record.close(state, steps);
                    return Ok(record);
                }
            }
        }
    }

    /// u, u_x on a grid from the particle representation, by the same scan.
    pub fn velocity_on_grid(
        &self,
        ens: &ParticleEnsemble<T>,
        grid: &Grid<T>,
    ) -> Result<(GridFunction<T>, GridFunction<T>)> {
        self.check(ens)?;
        if grid.half_length() != self.half_length {
            return Err(Error::GridMismatch);
        }
        if !ens.is_ordered() {
            return Err(Error::ParticleCollision);
        }
        // bring sources into the target frame [-L, L), re-sorting the
        // cyclic rotation introduced by wrapping
        let (sorted_pos, sorted_w) = wrapped_sorted_sources(ens);
        let targets = grid.positions();
        let fields = scan_fields_external(
            &sorted_pos,
            &sorted_w,
            &targets,
            self.drop_fraction,
            self.half_length,
        )?;
        let u = GridFunction::from_values(grid.clone(), fields.u)?;
        let ux = GridFunction::from_values(grid.clone(), fields.ux)?;
        Ok((u, ux))
    }

    /// Momentum on a grid by mass-preserving Gaussian deposition of width
    /// 2 dx, each particle normalized against the same discrete window so
    /// total deposited weight equals the carried weight exactly.
    pub fn momentum_on_grid(
        &self,
        ens: &ParticleEnsemble<T>,
        grid: &Grid<T>,
    ) -> Result<GridFunction<T>> {
        self.check(ens)?;
        if grid.half_length() != self.half_length {
            return Err(Error::GridMismatch);
        }
        let n = grid.point_count();
        let dx = grid.spacing();
        let sigma = T::lit(2.0) * dx;
        // 6 sigma covers the kernel to below 1e-8 relative
        let half_window = 12usize;
        let inv_two_sigma_sq = (T::lit(2.0) * sigma * sigma).recip();
        let mut values = vec![Cplx::new(T::zero(), T::zero()); n];
        let weights = ens.momentum_weights();
        let mut kernel = vec![T::zero(); 2 * half_window + 1];
        for (&h, &w) in ens.positions.iter().zip(&weights) {
            let hw = wrap_periodic(h, self.half_length);
            let center = ((hw + self.half_length) / dx).round();
            let center_idx = center.to_isize().unwrap_or(0).rem_euclid(n as isize) as usize;
            let mut mass = T::zero();
            for (o, k) in kernel.iter_mut().enumerate() {
                let idx =
                    (center_idx + n + o - half_window) % n;
                let d = wrap_periodic(grid.point(idx) - hw, self.half_length);
                *k = (-d * d * inv_two_sigma_sq).exp();
                mass += *k;
            }
            let scale = (mass * dx).recip();
            for (o, &k) in kernel.iter().enumerate() {
                let idx = (center_idx + n + o - half_window) % n;
                values[idx] += w.scale(k * scale);
            }
        }
        GridFunction::from_values(grid.clone(), values)
    }
}

fn ens_max_density<T: Scalar>(ens: &ParticleEnsemble<T>) -> T {
    ens.density_estimates()
        .into_iter()
        .fold(T::zero(), |a, b| a.max(b))
}

fn event_from_error<T: Scalar>(e: &Error, time: T) -> BlowupEvent<T> {
    let reason = match e {
        Error::ParticleCollision => BlowupReason::SpacingCollapse,
        Error::CflViolation { .. } => BlowupReason::AdvectionGrowth,
        _ => BlowupReason::NonFinite,
    };
    BlowupEvent {
        time,
        reason,
        value: T::nan(),
    }
}

fn wrapped_sorted_sources<T: Scalar>(ens: &ParticleEnsemble<T>) -> (Vec<T>, Vec<Cplx<T>>) {
    let wrapped = ens.wrapped_positions();
    let weights = ens.momentum_weights();
    // positions are cyclically ordered, so wrapping splits them into two
    // sorted runs; find the seam and rotate
    let n = wrapped.len();
    let mut seam = 0;
    for j in 1..n {
        if wrapped[j] < wrapped[j - 1] {
            seam = j;
            break;
        }
    }
    let mut pos = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        let i = (seam + j) % n;
        pos.push(wrapped[i]);
        w.push(weights[i]);
    }
    (pos, w)
}

struct ScanTables<T: Scalar> {
    /// a_pre[k] = sum_{i<k, active} w_i e^{h_i}; a_suf[k] = sum_{i>=k}.
    a_pre: Vec<Cplx<T>>,
    a_suf: Vec<Cplx<T>>,
    b_pre: Vec<Cplx<T>>,
    b_suf: Vec<Cplx<T>>,
    /// 1 / (2 (1 - e^{-2L})) and e^{-2L}.
    norm: T,
    image: T,
    active: Vec<bool>,
}

fn build_tables<T: Scalar>(
    positions: &[T],
    weights: &[Cplx<T>],
    moduli_for_drop: Option<&[T]>,
    drop_fraction: T,
    half_length: T,
) -> ScanTables<T> {
    let n = positions.len();
    let max_w = match moduli_for_drop {
        Some(m) => m.iter().fold(T::zero(), |a, &b| a.max(b)),
        None => weights.iter().fold(T::zero(), |a, w| a.max(w.norm())),
    };
    let floor = drop_fraction * max_w;
    let active: Vec<bool> = (0..n)
        .map(|j| {
            let w = match moduli_for_drop {
                Some(m) => m[j],
                None => weights[j].norm(),
            };
            w > floor
        })
        .collect();

    let zero = Cplx::new(T::zero(), T::zero());
    let mut a_pre = vec![zero; n + 1];
    let mut b_pre = vec![zero; n + 1];
    let mut a_suf = vec![zero; n + 1];
    let mut b_suf = vec![zero; n + 1];
    for j in 0..n {
        let (ea, eb) = if active[j] {
            (positions[j].exp(), (-positions[j]).exp())
        } else {
            (T::zero(), T::zero())
        };
        a_pre[j + 1] = a_pre[j] + weights[j].scale(ea);
        b_pre[j + 1] = b_pre[j] + weights[j].scale(eb);
    }
    for j in (0..n).rev() {
        let (ea, eb) = if active[j] {
            (positions[j].exp(), (-positions[j]).exp())
        } else {
            (T::zero(), T::zero())
        };
        a_suf[j] = a_suf[j + 1] + weights[j].scale(ea);
        b_suf[j] = b_suf[j + 1] + weights[j].scale(eb);
    }
    let two = T::lit(2.0);
    let image = (-two * half_length).exp();
    let norm = (two * (T::one() - image)).recip();
    ScanTables {
        a_pre,
        a_suf,
        b_pre,
        b_suf,
        norm,
        image,
        active,
    }
}

fn scan_eval<T: Scalar>(
    t: &ScanTables<T>,
    x: T,
    lo: usize,
    hi: usize,
    tie_weight: Cplx<T>,
) -> (Cplx<T>, Cplx<T>) {
    let ep = x.exp();
    let en = (-x).exp();
    let left_a = t.a_pre[lo];
    let left_b = t.b_pre[lo];
    let right_a = t.a_suf[hi];
    let right_b = t.b_suf[hi];
    let u = (left_a.scale(en) + right_b.scale(ep)
        + (left_b.scale(ep) + right_a.scale(en)).scale(t.image)
        + tie_weight.scale(T::one() + t.image))
    .scale(t.norm);
    let ux = (right_b.scale(ep) - left_a.scale(en)
        + (left_b.scale(ep) - right_a.scale(en)).scale(t.image))
    .scale(t.norm);
    (u, ux)
}

fn check_sorted_span<T: Scalar>(positions: &[T], half_length: T) -> Result<()> {
    let n = positions.len();
    if n >= 2 {
        for j in 0..n - 1 {
            if !(positions[j + 1] > positions[j]) {
                return Err(Error::ParticleCollision);
            }
        }
        if !(positions[n - 1] - positions[0] < T::lit(2.0) * half_length) {
            return Err(Error::ParticleCollision);
        }
    }
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::BlownUpState);
    }
    Ok(())
}

/// Fields at the particles themselves: target k excludes itself from the
/// u_x sum (principal value) and adds its own G(0) contribution to u.
fn scan_fields_self<T: Scalar>(
    positions: &[T],
    weights: &[Cplx<T>],
    moduli: &[T],
    drop_fraction: T,
    half_length: T,
) -> Result<ParticleFields<T>> {
    check_sorted_span(positions, half_length)?;
    let t = build_tables(positions, weights, Some(moduli), drop_fraction, half_length);
    let n = positions.len();
    let mut u = Vec::with_capacity(n);
    let mut ux = Vec::with_capacity(n);
    let zero = Cplx::new(T::zero(), T::zero());
    for k in 0..n {
        let tie = if t.active[k] { weights[k] } else { zero };
        let (uu, xx) = scan_eval(&t, positions[k], k, k + 1, tie);
        u.push(uu);
        ux.push(xx);
    }
    Ok(ParticleFields { u, ux })
}

/// Fields at external sorted targets; a target bitwise equal to a source
/// position takes the source's G(0) term in u and nothing in u_x.
fn scan_fields_external<T: Scalar>(
    positions: &[T],
    weights: &[Cplx<T>],
    targets: &[T],
    drop_fraction: T,
    half_length: T,
) -> Result<ParticleFields<T>> {
    let n = positions.len();
    if n >= 2 {
        for j in 0..n - 1 {
            if positions[j + 1] < positions[j] {
                return Err(Error::ParticleCollision);
            }
        }
    }
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::BlownUpState);
    }
    let t = build_tables(positions, weights, None, drop_fraction, half_length);
    let mut u = Vec::with_capacity(targets.len());
    let mut ux = Vec::with_capacity(targets.len());
    let zero = Cplx::new(T::zero(), T::zero());
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut last: Option<T> = None;
    for &x in targets {
        if let Some(prev) = last {
            if x < prev {
                return Err(Error::invalid("targets must be sorted ascending"));
            }
        }
        last = Some(x);
        while lo < n && positions[lo] < x {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < n && positions[hi] <= x {
            hi += 1;
        }
        let mut tie = zero;
        for j in lo..hi {
            if t.active[j] {
                tie += weights[j];
            }
        }
        let (uu, xx) = scan_eval(&t, x, lo, hi, tie);
        u.push(uu);
        ux.push(xx);
    }
    Ok(ParticleFields { u, ux })
}

impl<T: Scalar> ParticleEnsemble<T> {
    /// Shift all positions by whole periods so the leftmost stays in
    /// [-L, L); the kernel is periodic, so fields are unchanged.
    fn recenter(&mut self) {
        if self.positions.is_empty() {
            return;
        }
        let period = T::lit(2.0) * self.half_length;
        let first = self.positions[0];
        let shift = ((first + self.half_length) / period).floor() * period;
        if shift != T::zero() {
            for h in &mut self.positions {
                *h -= shift;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::{kernel_sum_velocity, kernel_sum_velocity_derivative};

    fn grid(l: f64, n: usize) -> Grid<f64> {
        Grid::new(l, n).unwrap()
    }

    fn smooth_momentum(g: &Grid<f64>) -> GridFunction<f64> {
        GridFunction::from_fn(g.clone(), |x| {
            Cplx::new(
                0.8 * (-x * x / 2.0).exp(),
                0.5 * (-(x - 1.0) * (x - 1.0) / 1.5).exp(),
            )
        })
    }

    #[test]
    fn construction_records_weights_phases_and_order() {
        let g = grid(20.0, 64);
        let m0 = smooth_momentum(&g);
        let ens = ParticleEnsemble::from_momentum(&m0, 0.6).unwrap();
        assert_eq!(ens.len(), 64);
        assert!(ens.is_ordered());
        assert_eq!(ens.time(), 0.0);
        for (j, (&w, &ph)) in ens
            .weight_moduli()
            .iter()
            .zip(ens.initial_phases())
            .enumerate()
        {
            let z = m0.values()[j];
            assert_eq!(w, z.norm() * g.spacing());
            assert_eq!(ph, z.arg());
        }
        // the weight sum is the same quadrature as the grid L1 norm
        let l1 = crate::grid::lp_norm(&m0, 1.0).unwrap();
        assert!((ens.total_weight() - l1).abs() <= 1e-15 * l1);
    }

    #[test]
    fn single_point_mass_is_the_exact_peaked_wave() {
        // an isolated particle of weight 2a at any angle: Q stays |w|^2/6,
        // so the position and phase rates are constant and RK4 integrates
        // them without truncation error
        for theta in [0.0f64, 0.9, std::f64::consts::FRAC_PI_2] {
            let ens =
                ParticleEnsemble::from_weights(&[0.5], &[Cplx::new(2.0, 0.0)], theta, 20.0)
                    .unwrap();
            let solver = ParticleSolver::for_ensemble(&ens).unwrap();
            let rates = solver.rates(&ens).unwrap();
            let rate = 2.0 / 3.0;
            assert!((rates.position_rate[0] - rate * theta.cos()).abs() <= 1e-15);
            assert!((rates.phase_rate[0] - rate * theta.sin()).abs() <= 1e-15);
            let mut state = ens;
            for _ in 0..50 {
                state = solver.step(&state, 0.02).unwrap().0;
            }
            assert!((state.time() - 1.0).abs() <= 1e-12);
            assert!(
                (state.positions()[0] - (0.5 + rate * theta.cos())).abs() <= 1e-12,
                "theta {theta}: position {}",
                state.positions()[0]
            );
            assert!((state.phases()[0] - rate * theta.sin()).abs() <= 1e-12);
            assert_eq!(state.weight_moduli()[0], 2.0);
        }
    }

    #[test]
    fn explicit_weights_reject_disorder_and_mismatch() {
        let w = [Cplx::new(1.0, 0.0), Cplx::new(0.5, 0.5)];
        assert!(ParticleEnsemble::from_weights(&[0.0, 1.0], &w, 0.4, 20.0).is_ok());
        assert!(ParticleEnsemble::from_weights(&[1.0, 0.0], &w, 0.4, 20.0).is_err());
        assert!(ParticleEnsemble::from_weights(&[0.0, 45.0], &w, 0.4, 20.0).is_err());
        assert!(ParticleEnsemble::from_weights(&[0.0], &w, 0.4, 20.0).is_err());
        assert!(ParticleEnsemble::from_weights(&[0.0, 1.0], &w, 0.4, -1.0).is_err());
        let one = ParticleEnsemble::from_weights(&[0.0], &w[..1], 0.4, 20.0).unwrap();
        assert_eq!(one.initial_spacing(), 40.0);
    }

    #[test]
    fn zero_momentum_is_inert() {
        let g = grid(20.0, 32);
        let m0 = GridFunction::zeros(g);
        let ens = ParticleEnsemble::from_momentum(&m0, 0.3).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        let rates = solver.rates(&ens).unwrap();
        assert!(rates.position_rate.iter().all(|&r| r == 0.0));
        assert!(rates.phase_rate.iter().all(|&r| r == 0.0));
        let (next, _) = solver.step(&ens, 0.01).unwrap();
        assert_eq!(next.positions(), ens.positions());
        assert_eq!(next.phases(), ens.phases());
    }

    #[test]
    fn gauge_rotation_shifts_only_initial_phases() {
        let g = grid(20.0, 128);
        let m0 = smooth_momentum(&g);
        let alpha = 1.234;
        let rot = Cplx::from_polar(1.0, alpha);
        let m0r = m0.map(|z| z * rot);
        let a = ParticleEnsemble::from_momentum(&m0, 0.6).unwrap();
        let b = ParticleEnsemble::from_momentum(&m0r, 0.6).unwrap();
        assert_eq!(a.positions(), b.positions());
        for (&wa, &wb) in a.weight_moduli().iter().zip(b.weight_moduli()) {
            assert!((wa - wb).abs() <= 1e-15 * wa.max(1e-300));
        }
        // rates are gauge invariant, so trajectories coincide
        let solver = ParticleSolver::for_ensemble(&a).unwrap();
        let ra = solver.rates(&a).unwrap();
        let rb = solver.rates(&b).unwrap();
        for (x, y) in ra.position_rate.iter().zip(&rb.position_rate) {
            assert!((x - y).abs() <= 1e-12 * ra.max_position_rate.max(1e-300));
        }
    }

    #[test]
    fn scan_matches_direct_kernel_sums() {
        let g = grid(20.0, 256);
        let m0 = smooth_momentum(&g);
        let ens = ParticleEnsemble::from_momentum(&m0, 0.9).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap().with_drop_fraction(0.0);
        let fields = solver.fields_at_particles(&ens).unwrap();
        let weights = ens.momentum_weights();
        let u_direct =
            kernel_sum_velocity(ens.positions(), &weights, ens.positions(), 20.0).unwrap();
        let ux_direct =
            kernel_sum_velocity_derivative(ens.positions(), &weights, ens.positions(), 20.0)
                .unwrap();
        let scale: f64 = u_direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for j in 0..ens.len() {
            assert!(
                (fields.u[j] - u_direct[j]).norm() <= 1e-12 * scale,
                "u at {j}: {} vs {}",
                fields.u[j],
                u_direct[j]
            );
            assert!(
                (fields.ux[j] - ux_direct[j]).norm() <= 1e-12 * scale,
                "ux at {j}"
            );
        }
    }

    #[test]
    fn grid_targets_match_direct_kernel_sums() {
        let g = grid(20.0, 128);
        let target_grid = grid(20.0, 64);
        let m0 = smooth_momentum(&g);
        let ens = ParticleEnsemble::from_momentum(&m0, 0.2).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        let (u, ux) = solver.velocity_on_grid(&ens, &target_grid).unwrap();
        let weights = ens.momentum_weights();
        let targets = target_grid.positions();
        let u_direct = kernel_sum_velocity(ens.positions(), &weights, &targets, 20.0).unwrap();
        let ux_direct =
            kernel_sum_velocity_derivative(ens.positions(), &weights, &targets, 20.0).unwrap();
        let scale: f64 = u_direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for j in 0..targets.len() {
            assert!((u.values()[j] - u_direct[j]).norm() <= 1e-11 * scale);
            assert!((ux.values()[j] - ux_direct[j]).norm() <= 1e-11 * scale);
        }
    }

    #[test]
    fn total_weight_is_bit_identical_across_steps() {
        let g = grid(20.0, 128);
        let ens0 = ParticleEnsemble::from_momentum(&smooth_momentum(&g), 1.2).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens0).unwrap();
        let w0 = ens0.total_weight();
        let mut ens = ens0;
        for _ in 0..25 {
            let (next, _) = solver.step(&ens, 2e-3).unwrap();
            ens = next;
        }
        assert_eq!(ens.total_weight().to_bits(), w0.to_bits());
        assert!(ens.time() > 0.049);
    }

    #[test]
    fn real_data_at_theta_zero_keeps_phases_frozen() {
        let g = grid(20.0, 128);
        let m0 = GridFunction::from_fn(g.clone(), |x| Cplx::new((-x * x / 2.0).exp(), 0.0));
        let ens0 = ParticleEnsemble::from_momentum(&m0, 0.0).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens0).unwrap();
        let mut ens = ens0;
        for _ in 0..10 {
            let (next, _) = solver.step(&ens, 2e-3).unwrap();
            ens = next;
        }
        let max_phase = ens.phases().iter().fold(0.0f64, |a, &p| a.max(p.abs()));
        assert!(max_phase <= 1e-12, "phase drift {max_phase}");
    }

    #[test]
    fn fourth_order_self_convergence_in_dt() {
        let g = grid(20.0, 64);
        let ens0 = ParticleEnsemble::from_momentum(&smooth_momentum(&g), 0.8).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens0).unwrap();
        let evolve = |dt: f64, steps: usize| {
            let mut e = ens0.clone();
            for _ in 0..steps {
                e = solver.step(&e, dt).unwrap().0;
            }
            e
        };
        // out to t = 1 so truncation error clears the roundoff floor
        let reference = evolve(0.05 / 8.0, 160);
        let coarse = evolve(0.05, 20);
        let fine = evolve(0.025, 40);
        let err = |e: &ParticleEnsemble<f64>| {
            e.positions()
                .iter()
                .zip(reference.positions())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let (ec, ef) = (err(&coarse), err(&fine));
        let ratio = ec / ef;
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio} ({ec} vs {ef})"
        );
    }

    #[test]
    fn deposition_preserves_mass_and_recovers_smooth_data() {
        let g = grid(20.0, 1024);
        let m0 = smooth_momentum(&g);
        let ens = ParticleEnsemble::from_momentum(&m0, 0.4).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        let rec = solver.momentum_on_grid(&ens, &g).unwrap();
        // mass preservation: integral of reconstruction equals summed weights
        let total: Cplx<f64> = rec
            .values()
            .iter()
            .fold(Cplx::new(0.0, 0.0), |a, &z| a + z)
            .scale(g.spacing());
        let carried: Cplx<f64> = ens
            .momentum_weights()
            .iter()
            .fold(Cplx::new(0.0, 0.0), |a, &z| a + z);
        assert!((total - carried).norm() <= 1e-12 * carried.norm());
        // pointwise recovery at the deposition-smoothing scale: the kernel
        // acts as convolution with a width-2dx Gaussian, error ~ 2 dx^2 |m''|
        let diff = rec.zip(&m0, |a, b| a - b).unwrap();
        let rel = diff.max_modulus() / m0.max_modulus();
        assert!(rel < 0.006, "deposition error {rel}");
    }

    #[test]
    fn isolated_particle_deposition_has_exact_l1() {
        let g = grid(20.0, 256);
        let mut values = vec![Cplx::new(0.0, 0.0); 256];
        values[40] = Cplx::new(1.0, 2.0);
        values[200] = Cplx::new(-0.5, 0.1);
        let m0 = GridFunction::from_values(g.clone(), values).unwrap();
        let ens = ParticleEnsemble::from_momentum(&m0, 0.0).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        let rec = solver.momentum_on_grid(&ens, &g).unwrap();
        let l1 = crate::grid::lp_norm(&rec, 1.0).unwrap();
        assert!(
            (l1 - ens.total_weight()).abs() <= 1e-10 * ens.total_weight(),
            "{l1} vs {}",
            ens.total_weight()
        );
    }

    #[test]
    fn single_particle_is_an_exact_peaked_traveling_wave() {
        // one particle of weight p = 2a reconstructs u = a e^{-|x-h|} (up
        // to periodic images); the averaged self-term makes it move at
        // exactly (2/3)a^2 cos(theta) with phase rate (2/3)a^2 sin(theta)
        let g = grid(20.0, 512);
        let theta = 0.8;
        let a = 1.3;
        let mut values = vec![Cplx::new(0.0, 0.0); 512];
        let j0 = 170;
        let dx = g.spacing();
        values[j0] = Cplx::from_polar(2.0 * a / dx, 0.4);
        let m0 = GridFunction::from_values(g.clone(), values).unwrap();
        let ens = ParticleEnsemble::from_momentum(&m0, theta).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        let rates = solver.rates(&ens).unwrap();
        // periodic images shift u(h) from a to a + e^{-2L}-scale terms
        let c = 2.0 / 3.0 * a * a * theta.cos();
        let omega = 2.0 / 3.0 * a * a * theta.sin();
        let tol = 1e-8;
        assert!(
            (rates.position_rate[j0] - c).abs() <= tol,
            "speed {} vs {c}",
            rates.position_rate[j0]
        );
        assert!(
            (rates.phase_rate[j0] - omega).abs() <= tol,
            "rate {} vs {omega}",
            rates.phase_rate[j0]
        );
        // the rate field is constant along the trajectory, so RK4 is exact
        // while the crest stays inside the gap to the next (weightless)
        // tracer particle; once it overtakes one, the ordering check fires,
        // which is the faithful non-classical outcome
        let h0 = ens.positions()[j0];
        let mut state = ens;
        for _ in 0..40 {
            let (next, _) = solver.step(&state, 0.002).unwrap();
            state = next;
        }
        let drift = (state.positions()[j0] - (h0 + c * 0.08)).abs();
        assert!(drift <= 1e-9, "trajectory drift {drift:e}");
    }

    #[test]
    fn collision_is_reported_not_panicked() {
        let g = grid(20.0, 32);
        let m0 = smooth_momentum(&g);
        let mut ens = ParticleEnsemble::from_momentum(&m0, 0.1).unwrap();
        // manufacture a crossing
        ens.positions[5] = ens.positions[7];
        assert!(!ens.is_ordered());
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        assert!(matches!(
            solver.fields_at_particles(&ens),
            Err(Error::ParticleCollision)
        ));
    }

    #[test]
    fn run_returns_one_snapshot_for_zero_horizon() {
        let g = grid(20.0, 64);
        let ens = ParticleEnsemble::from_momentum(&smooth_momentum(&g), 0.5).unwrap();
        let solver = ParticleSolver::for_ensemble(&ens).unwrap();
        let rec = solver
            .run(ens, 1e-3, 0.0, 10, &BlowupThresholds::default())
            .unwrap();
        assert_eq!(rec.snapshots.len(), 1);
        assert!(rec.outcome.is_none());
        assert_eq!(rec.steps, 0);
    }

    #[test]
    fn recenter_keeps_fields_unchanged() {
        let g = grid(20.0, 64);
        let m0 = smooth_momentum(&g);
        let ens = ParticleEnsemble::from_momentum(&m0, 0.7).unwrap();
        let mut shifted = ens.clone();
        for h in &mut shifted.positions {
            *h += 40.0; // one full period
        }
        shifted.recenter();
        assert_eq!(shifted.positions(), ens.positions());
    }
}
