//! Assembly of the nonlinear fields driving the evolution.
//!
//! From a momentum density m the assembler recovers u and u_x, forms the
//! interaction density Q = (u + u_x)(conj(u) - conj(u_x)), and splits
//! e^{i theta} Q into its real part J (the advection speed common to both
//! evolution routes) and imaginary part (the local phase rotation rate).
//!
//! Q_x is not computed by differentiating Q. Substituting u_xx = u - m into
//! the product rule collapses it to
//!     Q_x = (u + u_x) conj(m) - (conj(u) - conj(u_x)) m,
//! which stays meaningful when m is rough and Q is merely Lipschitz. The
//! spectral derivative of Q is kept available as a cross-check.

use crate::error::{Error, Result};
use crate::grid::{dealiased_product, pointwise_product, Grid, GridFunction};
use crate::helmholtz::HelmholtzSolver;
use crate::scalar::{Cplx, Scalar};

/// Everything derived from one momentum snapshot.
pub struct FieldBundle<T: Scalar> {
    pub u: GridFunction<T>,
    pub ux: GridFunction<T>,
    /// v+ = u + u_x, transported by one of the characteristic identities.
    pub v_plus: GridFunction<T>,
    /// v- = u - u_x, the other characteristic combination.
    pub v_minus: GridFunction<T>,
    /// Q = (u + u_x)(conj(u) - conj(u_x)); gauge invariant.
    pub q: GridFunction<T>,
    /// Q_x by the momentum identity, not by differentiating q.
    pub qx: GridFunction<T>,
    /// J = Re(e^{i theta} Q), the advection speed.
    pub advection: Vec<T>,
    /// J_x = Re(e^{i theta} Q_x); its negative part drives steepening.
    pub advection_x: Vec<T>,
    /// Im(e^{i theta} Q), the pointwise phase rotation rate.
    pub rotation: Vec<T>,
}

impl<T: Scalar> FieldBundle<T> {
    /// Coefficient of m in the transport form m_t + J m_x = K m, assembled
    /// as K = -J_x + i Im(e^{i theta} Q); Re(K) = -J_x holds exactly.
    pub fn zeroth_order(&self) -> Vec<Cplx<T>> {
        self.advection_x
            .iter()
            .zip(&self.rotation)
            .map(|(&jx, &r)| Cplx::new(-jx, r))
            .collect()
    }

    pub fn max_advection(&self) -> T {
        self.advection
            .iter()
            .fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn min_advection_slope(&self) -> T {
        self.advection_x
            .iter()
            .fold(T::infinity(), |a, &b| a.min(b))
    }

    /// Largest pointwise phase rotation rate. Sets the time scale when the
    /// advection speed vanishes identically, as it does for constant-phase
    /// data at theta = pi/2.
    pub fn max_rotation(&self) -> T {
        self.rotation.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }
}

/// Validates the family parameter; the canonical range is [0, pi).
pub fn validate_theta<T: Scalar>(theta: T) -> Result<()> {
    if !theta.is_finite() || theta < T::zero() || theta >= T::PI() {
        return Err(Error::invalid(format!(
            "family angle must lie in [0, pi), got {theta}"
        )));
    }
    Ok(())
}

pub struct FieldAssembler<T: Scalar> {
    solver: HelmholtzSolver<T>,
    theta: T,
    /// e^{i theta}, applied to Q when splitting into advection and rotation.
    phase: Cplx<T>,
    dealias: bool,
}

impl<T: Scalar> FieldAssembler<T> {
    /// `dealias` selects 3/2-rule products (used by the time stepper) versus
    /// plain pointwise products (cheaper, fine for one-off diagnostics).
    pub fn new(grid: Grid<T>, theta: T, dealias: bool) -> Result<Self> {
        validate_theta(theta)?;
        Ok(FieldAssembler {
            solver: HelmholtzSolver::new(grid),
            theta,
            phase: Cplx::from_polar(T::one(), theta),
            dealias,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.solver.grid()
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn phase(&self) -> Cplx<T> {
        self.phase
    }

    pub fn solver(&self) -> &HelmholtzSolver<T> {
        &self.solver
    }

    pub fn product(&self, f: &GridFunction<T>, g: &GridFunction<T>) -> Result<GridFunction<T>> {
        if self.dealias {
            dealiased_product(f, g)
        } else {
            pointwise_product(f, g)
        }
    }

    pub fn assemble(&self, m: &GridFunction<T>) -> Result<FieldBundle<T>> {
        let (u, ux) = self.solver.velocity_pair(m)?;
        let v_plus = u.zip(&ux, |a, b| a + b)?;
        let v_minus = u.zip(&ux, |a, b| a - b)?;
        // Q = v+ conj(v-)
        let w = v_minus.conj();
        let q = self.product(&v_plus, &w)?;
        let qx = {
            let first = self.product(&v_plus, &m.conj())?;
            let second = self.product(&w, m)?;
            first.zip(&second, |a, b| a - b)?
        };
        let advection = q.values().iter().map(|&z| (self.phase * z).re).collect();
        let rotation = q.values().iter().map(|&z| (self.phase * z).im).collect();
        let advection_x = qx.values().iter().map(|&z| (self.phase * z).re).collect();
        Ok(FieldBundle {
            u,
            ux,
            v_plus,
            v_minus,
            q,
            qx,
            advection,
            advection_x,
            rotation,
        })
    }
}

/// Sup gap between the numerical derivative of Q and the Q_x the bundle
/// carries from the momentum identity. On a dealiased bundle this is pure
/// roundoff; on a pointwise bundle it isolates the aliasing error of the
/// quadratic products and decays spectrally with resolution, so it serves
/// as a cheap "is the grid still resolving the solution" probe.
pub fn qx_consistency_residual<T: Scalar>(bundle: &FieldBundle<T>) -> Result<T> {
    let derivative = crate::grid::spectral_derivative(&bundle.q)?;
    Ok(derivative.zip(&bundle.qx, |a, b| a - b)?.max_modulus())
}
