//! Pseudo-spectral evolution of the momentum on the periodic grid.
//!
//! The update is the transport form dm/dt = -J m_x + K m with J and K
//! assembled from the Helmholtz inversion of m and both products dealiased
//! by zero padding. The algebraically equal conservative form
//! -(J m)_x + i rot m is kept alongside, not as an alternative stepper but
//! as a residual: the two discretizations differ only through aliasing and
//! differentiation error, so their gap measures how well the grid resolves
//! the solution.

use crate::blowup::{BlowupEvent, BlowupReason, BlowupThresholds, RunRecord};
use crate::error::{Error, Result};
use crate::fields::{FieldAssembler, FieldBundle};
use crate::grid::{spectral_derivative, Grid, GridFunction};
use crate::scalar::{Cplx, Scalar};

#[derive(Clone, Debug)]
pub struct SpectralState<T: Scalar> {
    pub time: T,
    pub momentum: GridFunction<T>,
}

impl<T: Scalar> SpectralState<T> {
    pub fn new(momentum: GridFunction<T>, time: T) -> Result<Self> {
        if !time.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        if !momentum.is_finite() {
            return Err(Error::BlownUpState);
        }
        Ok(SpectralState { time, momentum })
    }

    pub fn initial(momentum: GridFunction<T>) -> Result<Self> {
        Self::new(momentum, T::zero())
    }

    pub fn grid(&self) -> &Grid<T> {
        self.momentum.grid()
    }
}

/// Stage-one quantities surfaced to run drivers and diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<T> {
    pub max_advection: T,
    pub min_advection_slope: T,
    pub max_abs_m: T,
}

pub struct SpectralSolver<T: Scalar> {
    assembler: FieldAssembler<T>,
    cfl_number: T,
}

impl<T: Scalar> SpectralSolver<T> {
    pub fn new(grid: Grid<T>, theta: T) -> Result<Self> {
        Ok(SpectralSolver {
            assembler: FieldAssembler::new(grid, theta, true)?,
            cfl_number: T::lit(0.4),
        })
    }

    pub fn assembler(&self) -> &FieldAssembler<T> {
        &self.assembler
    }

    pub fn grid(&self) -> &Grid<T> {
        self.assembler.grid()
    }

    pub fn theta(&self) -> T {
        self.assembler.theta()
    }

    fn check(&self, m: &GridFunction<T>) -> Result<()> {
        if m.grid() != self.assembler.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Transport-form right-hand side together with the assembled fields.
    pub fn rhs(&self, m: &GridFunction<T>) -> Result<(GridFunction<T>, FieldBundle<T>)> {
        self.check(m)?;
        let bundle = self.assembler.assemble(m)?;
        let dm = self.rhs_from_bundle(m, &bundle)?;
        Ok((dm, bundle))
    }

    fn rhs_from_bundle(
        &self,
        m: &GridFunction<T>,
        bundle: &FieldBundle<T>,
    ) -> Result<GridFunction<T>> {
        let grid = self.assembler.grid().clone();
        let mx = spectral_derivative(m)?;
        let j = GridFunction::from_values(
            grid.clone(),
            bundle
                .advection
                .iter()
                .map(|&a| Cplx::new(a, T::zero()))
                .collect(),
        )?;
        let k = GridFunction::from_values(grid, bundle.zeroth_order())?;
        let jmx = self.assembler.product(&j, &mx)?;
        let km = self.assembler.product(&k, m)?;
        jmx.zip(&km, |a, b| b - a)
    }

    /// Conservative-form right-hand side -(J m)_x + i rot m. Equal to the
    /// transport form up to aliasing; used only as a resolution residual.
    pub fn conservative_rhs(&self, m: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.check(m)?;
        let bundle = self.assembler.assemble(m)?;
        let grid = self.assembler.grid().clone();
        let j = GridFunction::from_values(
            grid.clone(),
            bundle
                .advection
                .iter()
                .map(|&a| Cplx::new(a, T::zero()))
                .collect(),
        )?;
        let rot = GridFunction::from_values(
            grid,
            bundle
                .rotation
                .iter()
                .map(|&r| Cplx::new(T::zero(), r))
                .collect(),
        )?;
        let jm_x = spectral_derivative(&self.assembler.product(&j, m)?)?;
        let rm = self.assembler.product(&rot, m)?;
        jm_x.zip(&rm, |a, b| b - a)
    }

    /// Sup gap between the two right-hand-side forms, relative to the sup
    /// of the transport form. Small only while the grid resolves m.
    pub fn form_residual(&self, m: &GridFunction<T>) -> Result<T> {
        let (transport, _) = self.rhs(m)?;
        let conservative = self.conservative_rhs(m)?;
        let gap = transport.zip(&conservative, |a, b| a - b)?.max_modulus();
        let scale = transport.max_modulus().max(T::lit(1e-300));
        Ok(gap / scale)
    }

    /// One RK4 step. The advection CFL bound is evaluated on the first
    /// stage; a refused step reports the admissible dt.
    pub fn step(&self, state: &SpectralState<T>, dt: T) -> Result<(SpectralState<T>, StepInfo<T>)> {
        let (dm, bundle) = self.rhs(&state.momentum)?;
        let info = StepInfo {
            max_advection: bundle.max_advection(),
            min_advection_slope: bundle.min_advection_slope(),
            max_abs_m: state.momentum.max_modulus(),
        };
        let next = self.step_from_rhs(state, dt, dm, &info)?;
        Ok((next, info))
    }

    fn step_from_rhs(
        &self,
        state: &SpectralState<T>,
        dt: T,
        stage1: GridFunction<T>,
        info: &StepInfo<T>,
    ) -> Result<SpectralState<T>> {
        if !dt.is_finite() || dt == T::zero() {
            return Err(Error::invalid("step size must be finite and nonzero"));
        }
        let dt_max = self.cfl_number * self.grid().spacing()
            / info.max_advection.max(T::lit(1e-300));
        if dt.abs() > dt_max {
            return Err(Error::CflViolation {
                dt: dt.abs().to_f64().unwrap_or(f64::NAN),
                dt_max: dt_max.to_f64().unwrap_or(f64::NAN),
            });
        }
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let sixth = T::lit(6.0).recip();
        let m = &state.momentum;

        let k1 = stage1;
        let m2 = m.zip(&k1, |a, b| a + b.scale(half * dt))?;
        let (k2, _) = self.rhs(&m2)?;
        let m3 = m.zip(&k2, |a, b| a + b.scale(half * dt))?;
        let (k3, _) = self.rhs(&m3)?;
        let m4 = m.zip(&k3, |a, b| a + b.scale(dt))?;
        let (k4, _) = self.rhs(&m4)?;

        let mut sum = k1.zip(&k4, |a, b| a + b)?;
        sum = sum.zip(&k2, |a, b| a + b.scale(two))?;
        sum = sum.zip(&k3, |a, b| a + b.scale(two))?;
        let next_m = m.zip(&sum, |a, b| a + b.scale(dt * sixth))?;
        if !next_m.is_finite() {
            return Err(Error::BlownUpState);
        }
        Ok(SpectralState {
            time: state.time + dt,
            momentum: next_m,
        })
    }

    /// Fixed-step drive to t_end. Blow-up declarations are outcomes in the
    /// record; only a first step that violates the CFL bound is an error.
    pub fn run(
        &self,
        initial: SpectralState<T>,
        dt: T,
        t_end: T,
        snapshot_every: usize,
        thresholds: &BlowupThresholds<T>,
    ) -> Result<RunRecord<SpectralState<T>, T>> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        if t_end < initial.time {
            return Err(Error::invalid("t_end precedes the initial time"));
        }
        self.check(&initial.momentum)?;
        let every = snapshot_every.max(1);
        let initial_amp = initial.momentum.max_modulus().max(T::lit(1e-300));

        let mut record = RunRecord::new(initial.clone());
        let mut state = initial;
        let mut steps = 0usize;
        loop {
            let amp = state.momentum.max_modulus();
            if amp >= thresholds.amplitude_factor * initial_amp {
                record.declare(BlowupEvent {
                    time: state.time,
                    reason: BlowupReason::AmplitudeGrowth,
                    value: amp,
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

            let (dm, bundle) = match self.rhs(&state.momentum) {
                Ok(v) => v,
                Err(_) => {
                    record.declare(BlowupEvent {
                        time: state.time,
                        reason: BlowupReason::NonFinite,
                        value: T::nan(),
                    });
                    record.close(state, steps);
                    return Ok(record);
                }
            };
            let info = StepInfo {
                max_advection: bundle.max_advection(),
                min_advection_slope: bundle.min_advection_slope(),
                max_abs_m: amp,
            };
            record.observe_monitor(state.time, info.min_advection_slope, thresholds);
            if info.min_advection_slope <= -thresholds.monitor {
                record.declare(BlowupEvent {
                    time: state.time,
                    reason: BlowupReason::MonitorThreshold,
                    value: info.min_advection_slope,
                });
                record.close(state, steps);
                return Ok(record);
            }

            let this_dt = dt.min(remaining);
            match self.step_from_rhs(&state, this_dt, dm, &info) {
                Ok(next) => {
                    steps += 1;
                    record.maybe_snapshot(&next, steps, every, false);
                    state = next;
                }
                Err(e) => {
                    if steps == 0 {
                        if let Error::CflViolation { .. } = e {
                            return Err(e);
                        }
                    }
                    let reason = match e {
                        Error::CflViolation { .. } => BlowupReason::AdvectionGrowth,
                        _ => BlowupReason::NonFinite,
                    };
                    record.declare(BlowupEvent {
                        time: state.time,
                        reason,
                        value: T::nan(),
                    });
                    record.close(state, steps);
                    return Ok(record);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: f64, n: usize) -> Grid<f64> {
        Grid::new(l, n).unwrap()
    }

    fn smooth_momentum(g: &Grid<f64>) -> GridFunction<f64> {
        GridFunction::from_fn(g.clone(), |x| {
            Cplx::new(
                0.6 * (-x * x / 2.0).exp(),
                0.4 * (-(x - 1.0) * (x - 1.0) / 1.5).exp(),
            )
        })
    }

    #[test]
    fn zero_momentum_is_a_fixed_point() {
        let g = grid(20.0, 64);
        let solver = SpectralSolver::new(g.clone(), 0.7).unwrap();
        let state = SpectralState::initial(GridFunction::zeros(g)).unwrap();
        let (next, info) = solver.step(&state, 1e-2).unwrap();
        assert_eq!(next.momentum.max_modulus(), 0.0);
        assert_eq!(info.max_advection, 0.0);
    }

    #[test]
    fn forms_agree_on_resolved_data() {
        let g = grid(20.0, 512);
        let solver = SpectralSolver::new(g.clone(), 1.1).unwrap();
        let m = smooth_momentum(&g);
        let residual = solver.form_residual(&m).unwrap();
        assert!(residual < 1e-10, "form residual {residual:e}");
    }

    #[test]
    fn forms_agree_even_at_coarse_resolution() {
        // with dealiased products and the momentum identity for J_x, the
        // discrete product rule is exact, so the two forms coincide to
        // roundoff at any N, not just on resolved data
        let g = grid(20.0, 64);
        let solver = SpectralSolver::new(g.clone(), 1.1).unwrap();
        let m = GridFunction::from_fn(g.clone(), |x| {
            let k = 24.0 * std::f64::consts::PI / 20.0;
            Cplx::new((k * x).cos(), (k * x).sin() * 0.3)
        });
        let residual = solver.form_residual(&m).unwrap();
        assert!(residual < 1e-12, "form residual {residual:e}");
    }

    #[test]
    fn fourth_order_self_convergence_in_dt() {
        let g = grid(20.0, 128);
        let solver = SpectralSolver::new(g.clone(), 0.4).unwrap();
        let initial = SpectralState::initial(smooth_momentum(&g)).unwrap();
        let evolve = |dt: f64, steps: usize| {
            let mut s = initial.clone();
            for _ in 0..steps {
                s = solver.step(&s, dt).unwrap().0;
            }
            s
        };
        let reference = evolve(0.025 / 8.0, 320);
        let coarse = evolve(0.025, 40);
        let fine = evolve(0.0125, 80);
        let err = |s: &SpectralState<f64>| {
            s.momentum
                .zip(&reference.momentum, |a, b| a - b)
                .unwrap()
                .max_modulus()
        };
        let ratio = err(&coarse) / err(&fine);
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio}"
        );
    }

    #[test]
    fn cfl_refusal_reports_admissible_step() {
        let g = grid(20.0, 256);
        let solver = SpectralSolver::new(g.clone(), 0.0).unwrap();
        let state = SpectralState::initial(smooth_momentum(&g)).unwrap();
        match solver.step(&state, 10.0) {
            Err(Error::CflViolation { dt, dt_max }) => {
                assert_eq!(dt, 10.0);
                assert!(dt_max > 0.0 && dt_max < 10.0);
            }
            other => panic!("expected CFL refusal, got {other:?}"),
        }
    }

    #[test]
    fn run_with_zero_horizon_returns_single_snapshot() {
        let g = grid(20.0, 64);
        let solver = SpectralSolver::new(g.clone(), 0.9).unwrap();
        let state = SpectralState::initial(smooth_momentum(&g)).unwrap();
        let rec = solver
            .run(state, 1e-3, 0.0, 5, &BlowupThresholds::default())
            .unwrap();
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.steps, 0);
        assert!(!rec.blew_up());
    }

    #[test]
    fn run_clamps_the_final_step_to_the_horizon() {
        let g = grid(20.0, 64);
        let solver = SpectralSolver::new(g.clone(), 0.9).unwrap();
        let state = SpectralState::initial(smooth_momentum(&g)).unwrap();
        let rec = solver
            .run(state, 0.004, 0.01, 1, &BlowupThresholds::default())
            .unwrap();
        let last = rec.final_state.as_ref().unwrap();
        assert!((last.time - 0.01).abs() < 1e-12);
        assert_eq!(rec.steps, 3); // 0.004 + 0.004 + 0.002
        assert!(!rec.blew_up());
    }

    #[test]
    fn first_step_cfl_violation_is_an_error_not_a_declaration() {
        let g = grid(20.0, 256);
        let solver = SpectralSolver::new(g.clone(), 0.3).unwrap();
        let state = SpectralState::initial(smooth_momentum(&g)).unwrap();
        assert!(matches!(
            solver.run(state, 10.0, 20.0, 1, &BlowupThresholds::default()),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn theta_zero_real_data_stays_real() {
        let g = grid(20.0, 128);
        let solver = SpectralSolver::new(g.clone(), 0.0).unwrap();
        let m = GridFunction::from_fn(g.clone(), |x| Cplx::new((-x * x / 2.0).exp(), 0.0));
        let mut state = SpectralState::initial(m).unwrap();
        for _ in 0..10 {
            state = solver.step(&state, 5e-3).unwrap().0;
        }
        let max_im = state
            .momentum
            .values()
            .iter()
            .fold(0.0f64, |a, z| a.max(z.im.abs()));
        assert!(max_im < 1e-12, "imaginary drift {max_im:e}");
    }

    #[test]
    fn gauge_rotation_commutes_with_the_flow() {
        let g = grid(20.0, 128);
        let solver = SpectralSolver::new(g.clone(), 0.8).unwrap();
        let m = smooth_momentum(&g);
        let rot = Cplx::from_polar(1.0, 0.9832);
        let a0 = SpectralState::initial(m.clone()).unwrap();
        let b0 = SpectralState::initial(m.map(|z| z * rot)).unwrap();
        let a = solver.step(&a0, 5e-3).unwrap().0;
        let b = solver.step(&b0, 5e-3).unwrap().0;
        let gap = a
            .momentum
            .map(|z| z * rot)
            .zip(&b.momentum, |x, y| x - y)
            .unwrap()
            .max_modulus();
        assert!(gap < 1e-13, "gauge gap {gap:e}");
    }
}
