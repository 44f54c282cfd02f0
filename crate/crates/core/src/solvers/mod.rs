//! Ground-truth evolution operators used to synthesize training data and
//! reference solutions.
//!
//! * [`exact`]: closed-form propagators on trigonometric modal spaces.
//! * [`fine`]: fine-grid solvers (spectral for linear and viscous problems,
//!   finite volume for the inviscid Burgers equation).
//! * [`galerkin`]: the modal Galerkin comparator.
//! * [`evolve`]: the finite-dimensional operator `P_n E_Delta` in coefficient space.

pub mod evolve;
pub mod exact;
pub mod fine;
pub mod galerkin;

use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};

pub use evolve::{evolve_modal, ModalEvolver};
pub use exact::{advdiff2d_exact, advect_exact, diffuse_exact, LinearPropagator};
pub use fine::{burgers_evolve, FineGrid, FineLayout, FineSolver};
pub use galerkin::galerkin_rollout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeKind {
    Advection1d,
    Diffusion1d,
    Burgers1d,
    Advdiff2d,
}

/// A known PDE used as the black-box data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSpec {
    pub kind: PdeKind,
    /// Advection speed per axis.
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// Viscosity per axis (one entry for 1D problems).
    #[serde(default)]
    pub sigma: Vec<f64>,
}

impl PdeSpec {
    pub fn advection(speed: f64) -> Self {
        Self {
            kind: PdeKind::Advection1d,
            alpha: vec![speed],
            sigma: vec![0.0],
        }
    }

    pub fn diffusion(sigma: f64) -> Self {
        Self {
            kind: PdeKind::Diffusion1d,
            alpha: vec![0.0],
            sigma: vec![sigma],
        }
    }

    pub fn burgers(sigma: f64) -> Self {
        Self {
            kind: PdeKind::Burgers1d,
            alpha: vec![0.0],
            sigma: vec![sigma],
        }
    }

    pub fn advdiff2d(alpha: [f64; 2], sigma: [f64; 2]) -> Self {
        Self {
            kind: PdeKind::Advdiff2d,
            alpha: alpha.to_vec(),
            sigma: sigma.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            PdeKind::Advdiff2d => 2,
            _ => 1,
        }
    }

    pub fn speed(&self, axis: usize) -> f64 {
        self.alpha.get(axis).copied().unwrap_or(0.0)
    }

    pub fn viscosity(&self, axis: usize) -> f64 {
        self.sigma.get(axis).copied().unwrap_or(0.0)
    }

    pub fn is_linear(&self) -> bool {
        self.kind != PdeKind::Burgers1d
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.sigma.iter().find(|s| !(**s >= 0.0)) {
            return Err(EvoError::InvalidArgument(format!(
                "viscosity must be >= 0, got {s}"
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(EvoError::InvalidArgument(
                "advection speed must be finite".into(),
            ));
        }
        let dim = self.dim();
        if self.alpha.len() > dim || self.sigma.len() > dim {
            return Err(EvoError::InvalidArgument(format!(
                "{:?} takes at most {dim} speed/viscosity entries",
                self.kind
            )));
        }
        match self.kind {
            PdeKind::Diffusion1d | PdeKind::Burgers1d if self.speed(0) != 0.0 => Err(
                EvoError::InvalidArgument(format!("{:?} has no advection speed", self.kind)),
            ),
            PdeKind::Advection1d if self.viscosity(0) != 0.0 => Err(EvoError::InvalidArgument(
                "advection1d has no viscosity; use advdiff2d or diffusion1d".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Limiter {
    #[default]
    Minmod,
    VanLeer,
    /// Piecewise-constant reconstruction (first-order Godunov).
    FirstOrder,
}

impl Limiter {
    pub fn slope(self, left: f64, right: f64) -> f64 {
        match self {
            Limiter::Minmod => {
                if left * right <= 0.0 {
                    0.0
                } else if left.abs() < right.abs() {
                    left
                } else {
                    right
                }
            }
            Limiter::VanLeer => {
                if left * right <= 0.0 {
                    0.0
                } else {
                    2.0 * left * right / (left + right)
                }
            }
            Limiter::FirstOrder => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    #[default]
    TwoThirds,
    None,
}

/// Fine-grid solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Fine-grid resolution (intervals, cells or nodes per axis).
    pub grid: usize,
    /// Fixed internal step; `None` picks the step from `cfl`.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub limiter: Limiter,
    pub dealias: Dealias,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: 512,
            dt: None,
            cfl: 0.4,
            limiter: Limiter::Minmod,
            dealias: Dealias::TwoThirds,
        }
    }
}

/// Courant number above which explicit RK4 on the pseudo-spectral advection term is unstable.
pub const SPECTRAL_CFL_LIMIT: f64 = 0.9;
/// Courant number limit of MUSCL with SSP-RK2.
pub const FV_CFL_LIMIT: f64 = 0.5;

impl SolverConfig {
    pub fn with_grid(grid: usize) -> Self {
        Self {
            grid,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 8 {
            return Err(EvoError::InvalidArgument(format!(
                "fine grid needs at least 8 points, got {}",
                self.grid
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= SPECTRAL_CFL_LIMIT) {
            return Err(EvoError::InvalidArgument(format!(
                "cfl must lie in (0, {SPECTRAL_CFL_LIMIT}], got {}",
                self.cfl
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(EvoError::InvalidArgument(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiters() {
        assert_eq!(Limiter::Minmod.slope(1.0, 2.0), 1.0);
        assert_eq!(Limiter::Minmod.slope(-1.0, 2.0), 0.0);
        assert_eq!(Limiter::VanLeer.slope(1.0, 1.0), 1.0);
        assert_eq!(Limiter::FirstOrder.slope(1.0, 1.0), 0.0);
    }

    #[test]
    fn pde_validation() {
        assert!(PdeSpec::burgers(-0.1).validate().is_err());
        assert!(PdeSpec::burgers(0.0).validate().is_ok());
        assert!(PdeSpec::advdiff2d([1.0, 0.7], [0.1, 0.16])
            .validate()
            .is_ok());
        let json = r#"{"kind":"diffusion1d","sigma":[0.5]}"#;
        let p: PdeSpec = serde_json::from_str(json).unwrap();
        assert_eq!(p.viscosity(0), 0.5);
    }

    #[test]
    fn solver_config_checks() {
        assert!(SolverConfig::default().validate().is_ok());
        let c = SolverConfig {
            dt: Some(-1.0),
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
