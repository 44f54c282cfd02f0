//! The finite-dimensional evolution operator `Pi^{-1} P_n E_Delta Pi`.
//!
//! Linear problems on trigonometric bases use the exact propagator (the modal
//! space is invariant). Otherwise the state is lifted to the fine grid, evolved
//! there and projected back.

use super::exact::LinearPropagator;
use super::fine::{FineGrid, FineSolver};
use super::{PdeSpec, SolverConfig};
use crate::basis::{Basis, BasisId, ModalVector};
use crate::error::{EvoError, Result};

#[derive(Debug, Clone)]
enum Route {
    Exact(LinearPropagator),
    Fine(Box<(FineGrid, FineSolver)>),
}

#[derive(Debug, Clone)]
pub struct ModalEvolver {
    basis: BasisId,
    n: usize,
    delta: f64,
    route: Route,
}

impl ModalEvolver {
    pub fn new(basis: &Basis, pde: &PdeSpec, delta: f64, config: &SolverConfig) -> Result<Self> {
        pde.validate()?;
        if pde.dim() != basis.domain().dim() {
            return Err(EvoError::IncompatibleBasis(format!(
                "{:?} is {}D but the basis is {}D",
                pde.kind,
                pde.dim(),
                basis.domain().dim()
            )));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "time lag must be >= 0, got {delta}"
            )));
        }
        let exact = if pde.is_linear() {
            LinearPropagator::new(basis, delta, &pde.alpha, &pde.sigma).ok()
        } else {
            None
        };
        let route = match exact {
            Some(p) => Route::Exact(p),
            None => {
                let solver = FineSolver::new(basis.domain(), pde, config)?;
                let grid = FineGrid::for_pde(basis, pde, config)?;
                Route::Fine(Box::new((grid, solver)))
            }
        };
        Ok(Self {
            basis: basis.id(),
            n: basis.n(),
            delta,
            route,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.route, Route::Exact(_))
    }

    pub fn apply_coeffs(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(EvoError::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        match &self.route {
            Route::Exact(p) => Ok(p.apply(v)),
            Route::Fine(gs) => {
                let (grid, solver) = &**gs;
                let u = solver.evolve(&grid.lift(v), self.delta)?;
                Ok(grid.project(&u))
            }
        }
    }

    pub fn apply(&self, v: &ModalVector) -> Result<ModalVector> {
        if v.basis_id() != self.basis {
            return Err(EvoError::IncompatibleBasis(
                "coefficient vector belongs to a different basis".into(),
            ));
        }
        ModalVector::with_id(self.basis, self.n, self.apply_coeffs(v.coeffs())?)
    }
}

/// One application of `Pi^{-1} P_n E_Delta Pi`.
pub fn evolve_modal(
    basis: &Basis,
    v: &ModalVector,
    delta: f64,
    pde: &PdeSpec,
    config: &SolverConfig,
) -> Result<ModalVector> {
    ModalEvolver::new(basis, pde, delta, config)?.apply(v)
}
