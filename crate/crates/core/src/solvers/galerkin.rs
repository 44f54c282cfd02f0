//! Modal Galerkin comparator: `dv/dt = Pi^{-1} P_n L(Pi v)` integrated with RK4.
//!
//! The right-hand side is evaluated pseudo-spectrally on the basis quadrature
//! grid, which resolves the quadratic Burgers term of the modal space exactly.

use super::{PdeKind, PdeSpec};
use crate::basis::{l2, Basis, ModalVector};
use crate::error::{EvoError, Result};

/// Internal RK4 steps per time lag.
pub const SUBSTEPS_PER_LAG: usize = 50;
const BLOW_UP_NORM: f64 = 1e6;

struct GalerkinRhs<'a> {
    basis: &'a Basis,
    pde: &'a PdeSpec,
    nq: usize,
    /// First and second derivatives of each basis function per axis, `n x nq`.
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
}

impl<'a> GalerkinRhs<'a> {
    fn new(basis: &'a Basis, pde: &'a PdeSpec) -> Self {
        let dim = basis.domain().dim();
        let grid = basis.grid();
        let orders = |axis: usize, k: u8| -> Vec<u8> {
            (0..dim).map(|a| if a == axis { k } else { 0 }).collect()
        };
        Self {
            basis,
            pde,
            nq: grid.len(),
            d1: (0..dim)
                .map(|a| basis.values_at(grid, &orders(a, 1)))
                .collect(),
            d2: (0..dim)
                .map(|a| basis.values_at(grid, &orders(a, 2)))
                .collect(),
        }
    }

    fn combine(&self, table: &[f64], v: &[f64]) -> Vec<f64> {
        let nq = self.nq;
        let mut out = vec![0.0; nq];
        for (i, &c) in v.iter().enumerate() {
            if c != 0.0 {
                for (o, t) in out.iter_mut().zip(&table[i * nq..(i + 1) * nq]) {
                    *o += c * t;
                }
            }
        }
        out
    }

    fn eval(&self, v: &[f64]) -> Vec<f64> {
        let mut rate = vec![0.0; self.nq];
        let u = (self.pde.kind == PdeKind::Burgers1d).then(|| self.basis.lift_values(v));
        for axis in 0..self.d1.len() {
            let (alpha, sigma) = (self.pde.speed(axis), self.pde.viscosity(axis));
            let ux = self.combine(&self.d1[axis], v);
            if alpha != 0.0 {
                for (r, d) in rate.iter_mut().zip(&ux) {
                    *r -= alpha * d;
                }
            }
            if axis == 0 {
                if let Some(u) = &u {
                    for ((r, d), u) in rate.iter_mut().zip(&ux).zip(u) {
                        *r -= u * d;
                    }
                }
            }
            if sigma != 0.0 {
                let uxx = self.combine(&self.d2[axis], v);
                for (r, d) in rate.iter_mut().zip(&uxx) {
                    *r += sigma * d;
                }
            }
        }
        self.basis.project_values(&rate)
    }
}

/// Coefficients at `t_k = k Delta`, `k = 0..=steps`.
pub fn galerkin_rollout(
    basis: &Basis,
    v0: &ModalVector,
    delta: f64,
    steps: usize,
    pde: &PdeSpec,
) -> Result<Vec<ModalVector>> {
    pde.validate()?;
    if v0.len() != basis.n() {
        return Err(EvoError::DimensionMismatch {
            expected: basis.n(),
            got: v0.len(),
        });
    }
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
    let rhs = GalerkinRhs::new(basis, pde);
    let h = delta / SUBSTEPS_PER_LAG as f64;
    let mut v = v0.coeffs().to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v0.clone());
    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> {
        x.iter().zip(y).map(|(x, y)| x + a * y).collect()
    };
    for step in 1..=steps {
        if delta > 0.0 {
            for _ in 0..SUBSTEPS_PER_LAG {
                let k1 = rhs.eval(&v);
                let k2 = rhs.eval(&axpy(&v, 0.5 * h, &k1));
                let k3 = rhs.eval(&axpy(&v, 0.5 * h, &k2));
                let k4 = rhs.eval(&axpy(&v, h, &k3));
                for i in 0..v.len() {
                    v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let norm = l2(&v);
        if !(norm <= BLOW_UP_NORM) {
            return Err(EvoError::BlowUp { step, norm });
        }
        out.push(ModalVector::new(basis, v.clone())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_basis, BasisKind, BoundaryKind, PhysicalDomain};
    use crate::solvers::exact::advect_exact;
    use std::f64::consts::PI;

    #[test]
    fn zero_stays_zero() {
        let d = PhysicalDomain::interval(-PI, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        let b = make_basis(d, BasisKind::Sine, 9).unwrap();
        let traj = galerkin_rollout(
            &b,
            &ModalVector::zeros(&b),
            0.05,
            10,
            &PdeSpec::burgers(0.0),
        )
        .unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|v| v.coeffs().iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn linear_limit_matches_exact() {
        let d = PhysicalDomain::interval(0.0, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let b = make_basis(d, BasisKind::RealTrig, 3).unwrap();
        let v0 = ModalVector::new(&b, vec![0.6, 0.1, 0.5, -0.1, 0.05, 0.0, -0.02]).unwrap();
        let traj = galerkin_rollout(&b, &v0, 0.1, 20, &PdeSpec::advection(1.0)).unwrap();
        let mut exact = v0.clone();
        for v in &traj[1..] {
            exact = advect_exact(&b, &exact, 0.1, 1.0).unwrap();
            assert!(v.distance(&exact) < 1e-8);
        }
    }

    #[test]
    fn energy_decays_for_viscous_burgers() {
        let d = PhysicalDomain::interval(-PI, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        let b = make_basis(d, BasisKind::Sine, 5).unwrap();
        let v0 = ModalVector::new(&b, vec![-PI.sqrt(), 0.0, 0.0, 0.0, 0.0]).unwrap();
        let traj = galerkin_rollout(&b, &v0, 0.05, 20, &PdeSpec::burgers(0.5)).unwrap();
        for w in traj.windows(2) {
            assert!(w[1].norm() < w[0].norm());
        }
    }
}
