use std::f64::consts::PI;

use pde_evolve::basis::{make_basis, BasisKind, BoundaryKind, PhysicalDomain};
use pde_evolve::resnet::{Activation, Architecture, ResNetModel};
use pde_evolve::solvers::LinearPropagator;
use proptest::prelude::*;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_then_project_is_identity(v in coeffs(7)) {
        let d = PhysicalDomain::interval(0.0, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let b = make_basis(d, BasisKind::RealTrig, 3).unwrap();
        let values = b.lift_values(&v);
        prop_assert!((b.norm_of(&values) - l2(&v)).abs() < 1e-10);
        for (x, y) in b.project_values(&values).iter().zip(&v) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn advection_keeps_the_norm(v in coeffs(7), dt in 0.01f64..1.0) {
        let d = PhysicalDomain::interval(0.0, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        let b = make_basis(d, BasisKind::RealTrig, 3).unwrap();
        let p = LinearPropagator::new(&b, dt, &[1.0], &[0.0]).unwrap();
        prop_assert!((l2(&p.apply(&v)) - l2(&v)).abs() < 1e-12 * (1.0 + l2(&v)));
    }

    #[test]
    fn forward_output_is_finite(v in coeffs(5), seed in 0u64..1000) {
        let arch = Architecture { n: 5, blocks: 2, depth: 2, width: 8, activation: Activation::Tanh };
        let model = ResNetModel::init(arch, seed, 1.0).unwrap();
        let out = model.forward(&v).unwrap();
        prop_assert_eq!(out.len(), 5);
        prop_assert!(out.iter().all(|x| x.is_finite()));
    }
}
