//! Closed-form evolution of constant-coefficient linear PDEs on trigonometric
//! modal spaces.
//!
//! Under `u_t + sum_a alpha_a u_{x_a} = sum_a sigma_a u_{x_a x_a}` every factor
//! `cos(k x)` / `sin(k x)` is shifted by `alpha Delta` and damped by
//! `exp(-sigma k^2 Delta)`. The image of a product of such factors is again a
//! combination of products with the same wavenumbers, so whenever the basis
//! contains all of them the modal space is invariant and `P_n E_Delta` is the
//! exact propagator.

use crate::basis::{Basis, BasisKind, BoundaryKind, Factor, ModalVector};
use crate::error::{EvoError, Result};

/// Exact `n x n` coefficient propagator (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPropagator {
    n: usize,
    matrix: Vec<f64>,
}

impl LinearPropagator {
    /// Builds the propagator for speeds `alpha` and viscosities `sigma` (per axis).
    pub fn new(basis: &Basis, delta: f64, alpha: &[f64], sigma: &[f64]) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(EvoError::InvalidArgument(format!(
                "time lag must be >= 0, got {delta}"
            )));
        }
        let modes = basis.single_term_modes().ok_or_else(|| {
            EvoError::IncompatibleBasis("exact propagators need single-term trig bases".into())
        })?;
        let n = modes.len();
        let mut matrix = vec![0.0; n * n];
        for (i, (scale_i, factors)) in modes.iter().enumerate() {
            let per_axis: Vec<Vec<(f64, Factor)>> = factors
                .iter()
                .enumerate()
                .map(|(a, &f)| {
                    let shift = alpha.get(a).copied().unwrap_or(0.0) * delta;
                    let visc = sigma.get(a).copied().unwrap_or(0.0);
                    factor_image(f, shift, visc, delta)
                })
                .collect();
            for (coef, image) in cartesian(&per_axis) {
                let j = modes
                    .iter()
                    .position(|(_, g)| same_factors(g, &image))
                    .ok_or_else(|| {
                        EvoError::IncompatibleBasis(format!(
                            "modal space is not invariant: image of {} leaves the span",
                            basis.labels()[i]
                        ))
                    })?;
                matrix[j * n + i] += coef * scale_i / modes[j].0;
            }
        }
        Ok(Self { n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                self.matrix[j * n..(j + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }
}

fn factor_image(f: Factor, shift: f64, visc: f64, delta: f64) -> Vec<(f64, Factor)> {
    match f {
        Factor::One => vec![(1.0, Factor::One)],
        Factor::Cos(k) => {
            let decay = (-visc * k * k * delta).exp();
            let (s, c) = (k * shift).sin_cos();
            // cos(k(x - s)) = cos(ks) cos(kx) + sin(ks) sin(kx)
            nonzero(vec![
                (decay * c, Factor::Cos(k)),
                (decay * s, Factor::Sin(k)),
            ])
        }
        Factor::Sin(k) => {
            let decay = (-visc * k * k * delta).exp();
            let (s, c) = (k * shift).sin_cos();
            // sin(k(x - s)) = cos(ks) sin(kx) - sin(ks) cos(kx)
            nonzero(vec![
                (decay * c, Factor::Sin(k)),
                (-decay * s, Factor::Cos(k)),
            ])
        }
    }
}

fn nonzero(v: Vec<(f64, Factor)>) -> Vec<(f64, Factor)> {
    v.into_iter().filter(|(c, _)| *c != 0.0).collect()
}

fn cartesian(per_axis: &[Vec<(f64, Factor)>]) -> Vec<(f64, Vec<Factor>)> {
    let mut out = vec![(1.0, Vec::new())];
    for axis in per_axis {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for (c, fs) in &out {
            for (d, f) in axis {
                let mut g = fs.clone();
                g.push(*f);
                next.push((c * d, g));
            }
        }
        out = next;
    }
    out
}

fn same_factors(a: &[Factor], b: &[Factor]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Factor::One, Factor::One) => true,
            (Factor::Cos(p), Factor::Cos(q)) | (Factor::Sin(p), Factor::Sin(q)) => {
                (p - q).abs() <= 1e-12 * p.abs().max(1.0)
            }
            _ => false,
        })
}

fn apply_checked(basis: &Basis, v: &ModalVector, prop: &LinearPropagator) -> Result<ModalVector> {
    if v.len() != basis.n() {
        return Err(EvoError::DimensionMismatch {
            expected: basis.n(),
            got: v.len(),
        });
    }
    ModalVector::new(basis, prop.apply(v.coeffs()))
}

/// Coefficients of `u(x - c Delta)` on a periodic real-trig basis.
pub fn advect_exact(basis: &Basis, v: &ModalVector, delta: f64, speed: f64) -> Result<ModalVector> {
    if basis.domain().dim() != 1 || basis.domain().axis(0).boundary != BoundaryKind::Periodic {
        return Err(EvoError::IncompatibleBasis(
            "advection needs a periodic 1D basis".into(),
        ));
    }
    let prop = LinearPropagator::new(basis, delta, &[speed], &[0.0])?;
    apply_checked(basis, v, &prop)
}

/// Heat semigroup on a sine basis: `v_j -> v_j exp(-sigma j^2 Delta)`.
pub fn diffuse_exact(
    basis: &Basis,
    v: &ModalVector,
    delta: f64,
    sigma: f64,
) -> Result<ModalVector> {
    if basis.kind() != BasisKind::Sine {
        return Err(EvoError::IncompatibleBasis(format!(
            "diffusion propagator needs a sine basis, got {:?}",
            basis.kind()
        )));
    }
    if !(sigma >= 0.0) {
        return Err(EvoError::InvalidArgument(format!(
            "viscosity must be >= 0, got {sigma}"
        )));
    }
    let prop = LinearPropagator::new(basis, delta, &[0.0], &[sigma])?;
    apply_checked(basis, v, &prop)
}

/// Two-dimensional advection-diffusion on the 25-function tensor basis.
pub fn advdiff2d_exact(
    basis: &Basis,
    v: &ModalVector,
    delta: f64,
    alpha: [f64; 2],
    sigma: [f64; 2],
) -> Result<ModalVector> {
    if basis.kind() != BasisKind::TensorTrig2d {
        return Err(EvoError::IncompatibleBasis(format!(
            "2D advection-diffusion needs the tensor-trig-2d basis, got {:?}",
            basis.kind()
        )));
    }
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(EvoError::InvalidArgument("viscosity must be >= 0".into()));
    }
    let prop = LinearPropagator::new(basis, delta, &alpha, &sigma)?;
    apply_checked(basis, v, &prop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_basis, PhysicalDomain};
    use std::f64::consts::PI;

    fn trig() -> Basis {
        let d = PhysicalDomain::interval(0.0, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        make_basis(d, BasisKind::RealTrig, 3).unwrap()
    }

    fn sine(n: usize) -> Basis {
        let d = PhysicalDomain::interval(0.0, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        make_basis(d, BasisKind::Sine, n).unwrap()
    }

    fn tensor() -> Basis {
        let d = PhysicalDomain::periodic_square(-PI, PI).unwrap();
        make_basis(d, BasisKind::TensorTrig2d, 25).unwrap()
    }

    #[test]
    fn sin_becomes_minus_cos() {
        let b = trig();
        let v = ModalVector::unit(&b, 2);
        let w = advect_exact(&b, &v, PI / 2.0, 1.0).unwrap();
        let c = w.coeffs();
        assert!((c[1] + 1.0).abs() < 1e-15);
        assert!(c[2].abs() < 1e-15);
        assert!(c.iter().enumerate().all(|(i, x)| i == 1 || x.abs() < 1e-15));
    }

    #[test]
    fn zero_lag_is_identity() {
        let b = trig();
        let v = ModalVector::new(&b, vec![0.3, -0.2, 0.5, 0.1, 0.0, -0.04, 0.02]).unwrap();
        assert_eq!(advect_exact(&b, &v, 0.0, 1.0).unwrap(), v);
        let s = sine(5);
        let v = ModalVector::new(&s, vec![1.0, 0.5, 0.2, 0.05, 0.01]).unwrap();
        assert_eq!(diffuse_exact(&s, &v, 0.0, 0.5).unwrap(), v);
        let t = tensor();
        let v = ModalVector::new(&t, (0..25).map(|i| 0.01 * i as f64).collect()).unwrap();
        assert_eq!(
            advdiff2d_exact(&t, &v, 0.0, [1.0, 0.7], [0.1, 0.16]).unwrap(),
            v
        );
    }

    #[test]
    fn heat_eigenvalue() {
        let s = sine(5);
        let v = ModalVector::unit(&s, 0);
        let w = diffuse_exact(&s, &v, 0.1, 0.5).unwrap();
        assert!((w.coeffs()[0] - (-0.05f64).exp()).abs() < 1e-15);
        let v = ModalVector::unit(&s, 2);
        let w = diffuse_exact(&s, &v, 0.1, 0.5).unwrap();
        assert!((w.coeffs()[2] - (-0.45f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_mode_2d() {
        let t = tensor();
        let v = ModalVector::unit(&t, 1); // cos(x)
        let w = advdiff2d_exact(&t, &v, 0.1, [1.0, 0.7], [0.1, 0.16]).unwrap();
        let decay = (-0.01f64).exp();
        assert!((w.coeffs()[1] - decay * 0.1f64.cos()).abs() < 1e-15);
        assert!((w.coeffs()[2] - decay * 0.1f64.sin()).abs() < 1e-15);
        let rest: f64 = w
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 1 && *i != 2)
            .map(|(_, x)| x.abs())
            .sum();
        assert!(rest < 1e-15);
    }

    #[test]
    fn inviscid_2d_preserves_norm() {
        let t = tensor();
        let v =
            ModalVector::new(&t, (0..25).map(|i| ((i * 7) % 5) as f64 - 2.0).collect()).unwrap();
        let w = advdiff2d_exact(&t, &v, 0.37, [1.0, 0.7], [0.0, 0.0]).unwrap();
        assert!((w.norm() - v.norm()).abs() < 1e-13);
    }

    #[test]
    fn wrong_basis_kind() {
        let b = trig();
        let v = ModalVector::unit(&b, 0);
        assert!(diffuse_exact(&b, &v, 0.1, 0.5).is_err());
        let s = sine(3);
        let v = ModalVector::unit(&s, 0);
        assert!(advect_exact(&s, &v, 0.1, 1.0).is_err());
        assert!(advdiff2d_exact(&s, &v, 0.1, [1.0, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn advection_leaves_sine_span() {
        let s = sine(3);
        let err = LinearPropagator::new(&s, 0.1, &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, EvoError::IncompatibleBasis(_)));
    }
}
