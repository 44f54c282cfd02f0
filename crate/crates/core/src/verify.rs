//! Quick invariant suite run by `pde-evolve verify`.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::basis::{l2, make_basis, Basis, BasisKind, BoundaryKind, PhysicalDomain};
use crate::dataset::ModalBox;
use crate::error::Result;
use crate::prediction::{prop31_check, ProbeSet, ReferenceRun};
use crate::resnet::{Activation, Architecture, ResNetModel};
use crate::rng::{stream, Purpose};
use crate::solvers::{FineSolver, LinearPropagator, ModalEvolver, PdeSpec, SolverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

/// The bases the presets use.
pub fn shipped_bases() -> Result<Vec<(&'static str, Basis)>> {
    let d = |lo, hi, b| PhysicalDomain::interval(lo, hi, b);
    Ok(vec![
        (
            "real-trig n=7",
            make_basis(
                d(0.0, 2.0 * PI, BoundaryKind::Periodic)?,
                BasisKind::RealTrig,
                3,
            )?,
        ),
        (
            "sine n=5 on (0,pi)",
            make_basis(
                d(0.0, PI, BoundaryKind::HomogeneousDirichlet)?,
                BasisKind::Sine,
                5,
            )?,
        ),
        (
            "sine n=5 on (-pi,pi)",
            make_basis(
                d(-PI, PI, BoundaryKind::HomogeneousDirichlet)?,
                BasisKind::Sine,
                5,
            )?,
        ),
        (
            "sine n=9 on (-pi,pi)",
            make_basis(
                d(-PI, PI, BoundaryKind::HomogeneousDirichlet)?,
                BasisKind::Sine,
                9,
            )?,
        ),
        (
            "tensor-trig-2d n=25",
            make_basis(
                PhysicalDomain::periodic_square(-PI, PI)?,
                BasisKind::TensorTrig2d,
                25,
            )?,
        ),
    ])
}

fn random_vec(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Probe, index);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn basis_checks(out: &mut Vec<Check>) -> Result<()> {
    for (label, b) in shipped_bases()? {
        out.push(Check::at_most(
            format!("gram deviation, {label}"),
            b.gram_deviation(),
            1e-10,
        ));
        let mut iso: f64 = 0.0;
        let mut round: f64 = 0.0;
        for j in 0..20 {
            let v = random_vec(11, j, b.n());
            let values = b.lift_values(&v);
            iso = iso.max((b.norm_of(&values) - l2(&v)).abs());
            let back = b.project_values(&values);
            round = round.max(
                back.iter()
                    .zip(&v)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max),
            );
        }
        out.push(Check::at_most(
            format!("lift isometry, {label}"),
            iso,
            1e-10,
        ));
        out.push(Check::at_most(
            format!("project after lift, {label}"),
            round,
            1e-10,
        ));
    }
    Ok(())
}

fn gradient_checks(out: &mut Vec<Check>) -> Result<()> {
    let mut worst: f64 = 0.0;
    for trial in 0..10u64 {
        let activation = if trial % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let arch = Architecture {
            n: 2 + (trial as usize % 3),
            blocks: 1 + (trial as usize % 2),
            depth: 1 + (trial as usize % 3),
            width: 3 + trial as usize,
            activation,
        };
        let mut model = ResNetModel::init(arch, trial, 1.0)?;
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p += 0.05 * (i as f64).sin();
        }
        let rows = 4;
        let x: Vec<f64> = (0..rows)
            .flat_map(|r| random_vec(100 + trial, r, arch.n))
            .collect();
        let y: Vec<f64> = (0..rows)
            .flat_map(|r| random_vec(200 + trial, r, arch.n))
            .collect();
        let (_, g) = model.backward(&x, &y)?;
        let h = 1e-6;
        for i in 0..model.params().len() {
            let mut plus = model.clone();
            plus.params_mut()[i] += h;
            let mut minus = model.clone();
            minus.params_mut()[i] -= h;
            let fd = (plus.loss(&x, &y)? - minus.loss(&x, &y)?) / (2.0 * h);
            let rel = (fd - g.values[i]).abs() / fd.abs().max(g.values[i].abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    out.push(Check::at_most(
        "backprop vs central differences (10 models)",
        worst,
        1e-6,
    ));
    Ok(())
}

fn propagator_checks(out: &mut Vec<Check>) -> Result<()> {
    let bases = shipped_bases()?;
    let trig = &bases[0].1;
    let sine = &bases[1].1;
    let adv = LinearPropagator::new(trig, 0.1, &[1.0], &[0.0])?;
    let adv2 = LinearPropagator::new(trig, 0.2, &[1.0], &[0.0])?;
    let heat = LinearPropagator::new(sine, 0.1, &[0.0], &[0.5])?;
    let mut semigroup: f64 = 0.0;
    let mut norm_gap: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    for j in 0..20 {
        let v = random_vec(12, j, trig.n());
        let twice = adv.apply(&adv.apply(&v));
        let once = adv2.apply(&v);
        semigroup = semigroup.max(
            twice
                .iter()
                .zip(&once)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        norm_gap = norm_gap.max((l2(&adv.apply(&v)) - l2(&v)).abs());
        let w = random_vec(13, j, sine.n());
        contraction = contraction.max(l2(&heat.apply(&w)) / l2(&w));
    }
    out.push(Check::at_most(
        "advection semigroup composition",
        semigroup,
        1e-12,
    ));
    out.push(Check::at_most(
        "advection norm preservation",
        norm_gap,
        1e-12,
    ));
    out.push(Check::at_most(
        "diffusion contraction ratio",
        contraction,
        (-0.05f64).exp() + 1e-12,
    ));

    let domain = PhysicalDomain::interval(-PI, PI, BoundaryKind::HomogeneousDirichlet)?;
    let cfg = SolverConfig::with_grid(256);
    let solver = FineSolver::new(&domain, &PdeSpec::burgers(0.0), &cfg)?;
    let grid = solver.grid()?;
    let u0: Vec<f64> = grid.points().map(|p| -p[0].sin()).collect();
    let (u, steps) = solver.evolve_traced(&u0, 1.5)?;
    let imbalance = steps
        .iter()
        .map(|s| s.imbalance().abs())
        .fold(0.0, f64::max);
    out.push(Check::at_most(
        "finite-volume mass balance per step",
        imbalance,
        1e-10,
    ));
    let excess = u
        .iter()
        .map(|x| (x.abs() - 1.0).max(0.0))
        .fold(0.0, f64::max);
    out.push(Check::at_most(
        "finite-volume maximum principle",
        excess,
        1e-12,
    ));
    Ok(())
}

fn prop31_checks(out: &mut Vec<Check>) -> Result<()> {
    let bases = shipped_bases()?;
    let cases = [
        (&bases[0].1, PdeSpec::advection(1.0), 0.1),
        (&bases[1].1, PdeSpec::diffusion(0.5), 0.1),
    ];
    for (basis, pde, delta) in cases {
        let cfg = SolverConfig::with_grid(256);
        let reference = ReferenceRun::from_fn(
            basis,
            &pde,
            &cfg,
            |p| 0.5 * p[0].sin().exp() * p[0].sin(),
            delta,
            30,
        )?;
        let evolver = ModalEvolver::new(basis, &pde, delta, &cfg)?;
        let b = ModalBox::symmetric(&vec![1.0; basis.n()])?;
        let probes = ProbeSet::from_box(&b, 1000, 5, &[], "");
        let r = prop31_check(&evolver, &reference, &probes, 1e-10)?;
        let excess = r
            .lhs
            .iter()
            .zip(&r.rhs)
            .map(|(l, r)| l - r)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(Check {
            name: format!("exact-modal solution bound, {:?}", pde.kind),
            value: excess,
            tolerance: 1e-10,
            passed: r.holds,
        });
    }
    Ok(())
}

pub fn run_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    basis_checks(&mut out)?;
    gradient_checks(&mut out)?;
    propagator_checks(&mut out)?;
    prop31_checks(&mut out)?;
    Ok(out)
}
