//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any gated criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use pde_evolve::basis::FieldSample;
use pde_evolve::basis::{make_basis, Basis, BasisKind, BoundaryKind, PhysicalDomain};
use pde_evolve::dataset::ModalBox;
use pde_evolve::dataset::PairDataset;
use pde_evolve::experiment::{
    run_analyze, run_generate, run_predict, run_train, trajectory_file, AnalysisOutput,
    ExperimentConfig, Manifest, RunDir, Scale, MANIFEST_FILE,
};
use pde_evolve::prediction::{
    mode_error, per_mode_sup_relative, prop31_check, ProbeSet, ReferenceRun, Trajectory,
    TrajectoryKind,
};
use pde_evolve::resnet::{Activation, Architecture, ResNetModel};
use pde_evolve::rng::{stream, Purpose};
use pde_evolve::solvers::{
    burgers_evolve, FineLayout, FineSolver, LinearPropagator, ModalEvolver, PdeSpec, SolverConfig,
};
use pde_evolve::training::evaluate;
use rand::Rng;

struct Outcome {
    passed: bool,
    gated: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome {
        passed,
        gated: true,
        detail,
    }
}

fn rnd(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut r = stream(seed, Purpose::Probe, index);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn bases() -> Vec<(&'static str, Basis)> {
    let d = |lo, hi, b| PhysicalDomain::interval(lo, hi, b).unwrap();
    vec![
        (
            "real-trig n=7",
            make_basis(
                d(0.0, 2.0 * PI, BoundaryKind::Periodic),
                BasisKind::RealTrig,
                3,
            )
            .unwrap(),
        ),
        (
            "sine n=5 (0,pi)",
            make_basis(
                d(0.0, PI, BoundaryKind::HomogeneousDirichlet),
                BasisKind::Sine,
                5,
            )
            .unwrap(),
        ),
        (
            "sine n=5 (-pi,pi)",
            make_basis(
                d(-PI, PI, BoundaryKind::HomogeneousDirichlet),
                BasisKind::Sine,
                5,
            )
            .unwrap(),
        ),
        (
            "sine n=9 (-pi,pi)",
            make_basis(
                d(-PI, PI, BoundaryKind::HomogeneousDirichlet),
                BasisKind::Sine,
                9,
            )
            .unwrap(),
        ),
        (
            "tensor 2d n=25",
            make_basis(
                PhysicalDomain::periodic_square(-PI, PI).unwrap(),
                BasisKind::TensorTrig2d,
                25,
            )
            .unwrap(),
        ),
    ]
}

/// Midpoint rule with `m` points per axis. It integrates `cos(kx)` and
/// `sin(kx)` exactly for integer `0 < k < 2m`, on full and half periods alike.
fn dense_points(basis: &Basis, m: usize) -> (Vec<Vec<f64>>, f64) {
    let axes = basis.domain().axes();
    let h: Vec<f64> = axes.iter().map(|a| a.length() / m as f64).collect();
    let nodes = |i: usize| -> Vec<f64> {
        (0..m)
            .map(|k| axes[i].lo + (k as f64 + 0.5) * h[i])
            .collect()
    };
    if axes.len() == 1 {
        (nodes(0).into_iter().map(|x| vec![x]).collect(), h[0])
    } else {
        let (xs, ys) = (nodes(0), nodes(1));
        let pts = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| vec![x, y]))
            .collect();
        (pts, h[0] * h[1])
    }
}

fn criterion_1() -> Outcome {
    let mut worst_gram: f64 = 0.0;
    let mut worst_iso: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    for (_, b) in bases() {
        let n = b.n();
        let (pts, w) = dense_points(&b, 64);
        let vals: Vec<Vec<f64>> = (0..n)
            .map(|i| pts.iter().map(|p| b.eval(i, p)).collect())
            .collect();
        for i in 0..n {
            for j in 0..n {
                let g: f64 = vals[i]
                    .iter()
                    .zip(&vals[j])
                    .map(|(a, c)| a * c)
                    .sum::<f64>()
                    * w;
                worst_gram = worst_gram.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        for t in 0..10 {
            let v = rnd(21, t, n);
            let u: Vec<f64> = (0..pts.len())
                .map(|k| (0..n).map(|i| v[i] * vals[i][k]).sum())
                .collect();
            let l2 = (u.iter().map(|x| x * x).sum::<f64>() * w).sqrt();
            worst_iso = worst_iso.max((l2 - norm(&v)).abs());
            let back = b.project_values(&b.lift_values(&v));
            worst_round = worst_round.max(max_abs_diff(&back, &v));
        }
    }
    let passed = worst_gram <= 1e-10 && worst_iso <= 1e-10 && worst_round <= 1e-10;
    let own: f64 = bases()
        .iter()
        .map(|(_, b)| b.gram_deviation())
        .fold(0.0, f64::max);
    outcome(
        passed && own <= 1e-10,
        format!(
            "gram (own quadrature) {own:.1e}, gram (dense midpoint) {worst_gram:.1e}, isometry {worst_iso:.1e}, project-lift {worst_round:.1e}"
        ),
    )
}

fn criterion_1_exact_isometry() -> f64 {
    bases()
        .iter()
        .flat_map(|(_, b)| {
            (0..10).map(move |t| {
                let v = rnd(22, t, b.n());
                (b.norm_of(&b.lift_values(&v)) - norm(&v)).abs()
            })
        })
        .fold(0.0, f64::max)
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for trial in 0..12u64 {
        let arch = Architecture {
            n: 2 + (trial % 4) as usize,
            blocks: 1 + (trial % 3) as usize,
            depth: 1 + (trial % 3) as usize,
            width: 4 + trial as usize,
            activation: if trial % 2 == 0 {
                Activation::Tanh
            } else {
                Activation::Relu
            },
        };
        let mut model = ResNetModel::init(arch, 100 + trial, 1.0).unwrap();
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p += 0.05 * ((i as f64) * 0.7 + trial as f64).sin();
        }
        let rows = 5;
        let x: Vec<f64> = (0..rows)
            .flat_map(|r| rnd(300 + trial, r, arch.n))
            .collect();
        let y: Vec<f64> = (0..rows)
            .flat_map(|r| rnd(400 + trial, r, arch.n))
            .collect();
        let (_, g) = model.backward(&x, &y).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..model.params().len())
            .map(|i| {
                let mut p = model.clone();
                p.params_mut()[i] += h;
                let mut m = model.clone();
                m.params_mut()[i] -= h;
                (p.loss(&x, &y).unwrap() - m.loss(&x, &y).unwrap()) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = g.values.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&fd));
    }
    outcome(
        worst <= 1e-6,
        format!("12 models, worst relative gradient error {worst:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let bs = bases();
    let (trig, sine, tensor) = (&bs[0].1, &bs[1].1, &bs[4].1);
    let mut semigroup: f64 = 0.0;
    let mut iso: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    let props = [
        (trig, vec![1.0], vec![0.0]),
        (sine, vec![0.0], vec![0.5]),
        (tensor, vec![1.0, 0.7], vec![0.1, 0.16]),
    ];
    for (k, (b, a, s)) in props.iter().enumerate() {
        let one = LinearPropagator::new(b, 0.1, a, s).unwrap();
        let two = LinearPropagator::new(b, 0.2, a, s).unwrap();
        for t in 0..20 {
            let v = rnd(30 + k as u64, t, b.n());
            semigroup = semigroup.max(max_abs_diff(&one.apply(&one.apply(&v)), &two.apply(&v)));
        }
    }
    let adv = LinearPropagator::new(trig, 0.37, &[1.0], &[0.0]).unwrap();
    let heat = LinearPropagator::new(sine, 0.1, &[0.0], &[0.5]).unwrap();
    for t in 0..50 {
        let v = rnd(40, t, trig.n());
        iso = iso.max((norm(&adv.apply(&v)) - norm(&v)).abs());
        let w = rnd(41, t, sine.n());
        contraction = contraction.max(norm(&heat.apply(&w)) / norm(&w));
    }
    // closed-form oracle: the shift of cos(x) + sin(2x) by 0.37
    let shifted = |x: f64| (x - 0.37).cos() + (2.0 * (x - 0.37)).sin();
    let v0 = trig.project_values(
        &trig
            .grid()
            .points()
            .map(|p| p[0].cos() + (2.0 * p[0]).sin())
            .collect::<Vec<_>>(),
    );
    let want = trig.project_values(
        &trig
            .grid()
            .points()
            .map(|p| shifted(p[0]))
            .collect::<Vec<_>>(),
    );
    let oracle = max_abs_diff(&adv.apply(&v0), &want);

    let d = PhysicalDomain::interval(-PI, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
    let run = |m: usize| -> Vec<f64> {
        let g = std::sync::Arc::new(FineLayout::Dirichlet1d.nodes(&d, m).unwrap());
        let u0 = FieldSample::from_fn(g, |p| -p[0].sin());
        burgers_evolve(&u0, 1.0, 0.1, &SolverConfig::with_grid(m), &d)
            .unwrap()
            .values
    };
    let levels: Vec<Vec<f64>> = [16, 32, 64].iter().map(|&m| run(m)).collect();
    let diff = |c: &[f64], f: &[f64]| -> f64 {
        let m = c.len() - 1;
        let h = 2.0 * PI / m as f64;
        (0..=m)
            .map(|i| (c[i] - f[2 * i]).powi(2) * h)
            .sum::<f64>()
            .sqrt()
    };
    let order = (diff(&levels[0], &levels[1]) / diff(&levels[1], &levels[2])).log2();

    let fv = FineSolver::new(&d, &PdeSpec::burgers(0.0), &SolverConfig::with_grid(400)).unwrap();
    let g = fv.grid().unwrap();
    // odd data keep the reflected ghost values inside the initial range
    let u0: Vec<f64> = g
        .points()
        .map(|p| -p[0].sin() + 0.3 * (2.0 * p[0]).sin())
        .collect();
    let (lo, hi) = u0
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let (u, steps) = fv.evolve_traced(&u0, 2.0).unwrap();
    let mass = steps
        .iter()
        .map(|s| s.imbalance().abs())
        .fold(0.0, f64::max);
    let maxp = u.iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12);

    let passed = semigroup <= 1e-12
        && iso <= 1e-13
        && oracle <= 1e-12
        && contraction < 1.0
        && contraction <= (-0.05f64).exp() + 1e-14
        && order >= 2.0
        && mass <= 1e-10
        && maxp;
    outcome(
        passed,
        format!(
            "semigroup {semigroup:.1e}, shift oracle {oracle:.1e}, advection norm drift {iso:.1e}, diffusion ratio {contraction:.4}, \
             viscous order {order:.2}, mass imbalance {mass:.1e} over {} steps, max principle {maxp}",
            steps.len()
        ),
    )
}

fn run_preset(
    name: &str,
    out: &Path,
    overrides: &[String],
) -> (ExperimentConfig, AnalysisOutput, f64) {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(name, Scale::Desk, overrides).unwrap();
    let dir = RunDir::open(out).unwrap();
    run_generate(&cfg, &dir).unwrap();
    run_train(&cfg, &dir, false, None).unwrap();
    run_predict(&cfg, &dir).unwrap();
    let a = run_analyze(&cfg, &dir).unwrap();
    (cfg, a, start.elapsed().as_secs_f64())
}

fn rel_at(a: &AnalysisOutput, cfg: &ExperimentConfig, t: f64) -> f64 {
    let k = (t / cfg.data.delta).round() as usize;
    a.report.rel_err_field[k].unwrap_or(f64::NAN)
}

fn final_loss(out: &Path) -> f64 {
    let model = ResNetModel::load(&out.join("model.mevm")).unwrap();
    let ds = PairDataset::load(&out.join("data.mevd")).unwrap();
    evaluate(&model, &ds).unwrap()
}

fn criterion_4(root: &Path) -> Outcome {
    let out = root.join("ex1");
    let (cfg, a, secs) = run_preset("ex1-advection", &out, &[]);
    let loss = final_loss(&out);
    let (e2, e10) = (rel_at(&a, &cfg, 2.0), rel_at(&a, &cfg, 10.0));
    let series: Vec<f64> = a
        .report
        .rel_err_field
        .iter()
        .map(|e| e.unwrap_or(f64::NAN))
        .collect();
    let bounded = series.iter().all(|e| e.is_finite() && *e < 0.5);
    let e20 = *series.last().unwrap();
    outcome(
        loss <= 1e-5 && e2 <= 0.02 && e10 <= 0.10 && bounded && secs <= 600.0,
        format!(
            "J {}, {} epochs: final loss {loss:.2e}, rel err {e2:.2e} at t=2, {e10:.2e} at t=10, {e20:.2e} at t=20, {secs:.0} s",
            cfg.data.samples, cfg.training.epochs
        ),
    )
}

fn criterion_5(root: &Path) -> (Outcome, AnalysisOutput) {
    let start = Instant::now();
    let (cfg, clean, _) = run_preset("ex2-diffusion", &root.join("ex2"), &[]);
    let (e1, e3) = (rel_at(&clean, &cfg, 1.0), rel_at(&clean, &cfg, 3.0));
    let dir = root.join("ex2");
    let pred = Trajectory::load_csv(
        &dir.join(trajectory_file(TrajectoryKind::Predicted)),
        TrajectoryKind::Predicted,
    )
    .unwrap();
    let opt = Trajectory::load_csv(
        &dir.join(trajectory_file(TrajectoryKind::OptimalProjection)),
        TrajectoryKind::OptimalProjection,
    )
    .unwrap();
    let per_mode = per_mode_sup_relative(&pred, &opt);
    let worst_mode = per_mode.iter().copied().fold(0.0, f64::max);
    let mut noisy = Vec::new();
    for eta in [0.02, 0.05] {
        let (c, a, _) = run_preset(
            "ex2-diffusion-noisy",
            &root.join(format!("ex2-noise-{eta}")),
            &[format!("data.noise={eta}")],
        );
        noisy.push(rel_at(&a, &c, 3.0));
    }
    let ordered = noisy[1] >= noisy[0] && noisy[0] >= e3;
    let secs = start.elapsed().as_secs_f64();
    (
        outcome(
            e1 <= 0.02 && e3 <= 0.05 && worst_mode <= 0.05 && ordered && secs <= 600.0,
            format!(
                "rel err {e1:.2e} at t=1, {e3:.2e} at t=3; worst per-mode sup deviation {worst_mode:.2e}; \
                 t=3 error clean {e3:.2e} <= 2% noise {:.2e} <= 5% noise {:.2e}: {ordered}; {secs:.0} s",
                noisy[0], noisy[1]
            ),
        ),
        clean,
    )
}

fn criterion_6(root: &Path) -> (Outcome, Outcome) {
    let (cfg, a, secs) = run_preset("ex3-burgers-sig0.5", &root.join("ex3a"), &[]);
    let e2 = rel_at(&a, &cfg, 2.0);
    let mut detail = format!(
        "sigma 0.5, J {}: rel err {e2:.2e} at t=2 in {secs:.0} s",
        cfg.data.samples
    );
    let mut passed = e2 <= 0.05 && secs <= 1200.0;
    let mut stretch = String::new();
    let mut stretch_ok = false;
    for (name, dir) in [
        ("ex3-burgers-sig0.1", "ex3b"),
        ("ex4-inviscid-burgers", "ex4"),
    ] {
        let start = Instant::now();
        let cfg = ExperimentConfig::preset(name, Scale::Desk, &[]).unwrap();
        let rd = RunDir::open(&root.join(dir)).unwrap();
        let result = run_generate(&cfg, &rd)
            .and_then(|_| run_train(&cfg, &rd, false, None))
            .and_then(|_| run_predict(&cfg, &rd))
            .and_then(|_| run_analyze(&cfg, &rd));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(a) => {
                let e = rel_at(&a, &cfg, 2.0);
                detail +=
                    &format!("; {name}: no divergence, rel err {e:.2e} at t=2 in {secs:.0} s");
                if name == "ex4-inviscid-burgers" {
                    let load = |k| {
                        let mut t =
                            Trajectory::load_csv(&root.join(dir).join(trajectory_file(k)), k)
                                .unwrap();
                        t.delta = cfg.data.delta;
                        t
                    };
                    let (pred, opt, gal) = (
                        load(TrajectoryKind::Predicted),
                        load(TrajectoryKind::OptimalProjection),
                        load(TrajectoryKind::Galerkin),
                    );
                    let (en, eg) = (mode_error(&pred, &opt, 6..9), mode_error(&gal, &opt, 6..9));
                    stretch_ok = en < eg;
                    stretch = format!("modes 7-9 time-averaged l2 distance to optimal: network {en:.3e}, Galerkin {eg:.3e}");
                }
            }
            Err(e) => {
                passed = false;
                detail += &format!("; {name}: {e}");
            }
        }
    }
    (
        outcome(passed, detail),
        Outcome {
            passed: stretch_ok,
            gated: false,
            detail: if stretch.is_empty() {
                "not available".into()
            } else {
                stretch
            },
        },
    )
}

fn criterion_7(ex2: &AnalysisOutput) -> Outcome {
    let r = &ex2.report;
    let k = r.horizon.min(30);
    let ok = (0..=k).all(|j| r.coeff_err[j] <= r.bound_rhs[j]);
    outcome(
        ok && r.horizon >= 30,
        format!(
            "steps 0..={k}: min slack {:.2e}; eps_dnn {:.3e} (absolute {:.3e}), |N| {:.4}, |P_n E| {:.4}; probes: {}",
            r.min_slack, r.eps_dnn, r.eps_dnn_abs, r.norm_n, r.norm_pe, r.probe_set
        ),
    )
}

fn criterion_8() -> Outcome {
    let bs = bases();
    let quartic = |p: &[f64]| {
        let s = p[0] / PI;
        s * (5.0 - 4.0 * s - 7.0 * s * s + 6.0 * s * s * s)
    };
    let half_exp = |p: &[f64]| 0.5 * p[0].sin().exp();
    let cases: Vec<(&str, &Basis, PdeSpec, f64, Box<dyn Fn(&[f64]) -> f64>)> = vec![
        (
            "advection",
            &bs[0].1,
            PdeSpec::advection(1.0),
            0.1,
            Box::new(half_exp),
        ),
        (
            "diffusion",
            &bs[1].1,
            PdeSpec::diffusion(0.5),
            0.1,
            Box::new(quartic),
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, basis, pde, delta, u0) in cases {
        let cfg = SolverConfig::with_grid(512);
        let reference = ReferenceRun::from_fn(basis, &pde, &cfg, |p| u0(p), delta, 50).unwrap();
        let evolver = ModalEvolver::new(basis, &pde, delta, &cfg).unwrap();
        let b = ModalBox::symmetric(&vec![1.0; basis.n()]).unwrap();
        let probes =
            ProbeSet::from_box(&b, 10_000, 8, &reference.optimal.states, "reference states");
        let r = prop31_check(&evolver, &reference, &probes, 1e-10).unwrap();
        let slack = r
            .lhs
            .iter()
            .zip(&r.rhs)
            .map(|(l, r)| r - l)
            .fold(f64::INFINITY, f64::min);
        ok &= r.holds;
        detail.push(format!(
            "{label}: 50 steps, |P_n E| {:.4}, min slack {slack:.2e}",
            r.norm_pe
        ));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_9(root: &Path) -> Outcome {
    let read = |d: &str| -> Manifest {
        serde_json::from_str(&std::fs::read_to_string(root.join(d).join(MANIFEST_FILE)).unwrap())
            .unwrap()
    };
    run_preset("ex2-diffusion", &root.join("ex2-rerun"), &[]);
    let (a, b) = (read("ex2"), read("ex2-rerun"));
    let same = a.outputs == b.outputs && !a.outputs.is_empty();
    let differing: Vec<&String> = a
        .outputs
        .keys()
        .filter(|k| a.outputs.get(*k) != b.outputs.get(*k))
        .collect();
    outcome(
        same,
        format!(
            "{} hashed outputs compared, {} differ {:?}",
            a.outputs.len(),
            differing.len(),
            differing
        ),
    )
}

fn report(id: &str, title: &str, o: &Outcome, secs: f64) {
    let tag = match (o.passed, o.gated) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "MISS",
    };
    println!("criterion {id} {tag} [{secs:.1} s] {title}: {}", o.detail);
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build_global()
        .ok();
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut results: Vec<Outcome> = Vec::new();

    let t = Instant::now();
    let mut c1 = criterion_1();
    let exact_iso = criterion_1_exact_isometry();
    c1.passed &= exact_iso <= 1e-10;
    c1.detail += &format!(", isometry on own quadrature {exact_iso:.1e}");
    let secs = t.elapsed().as_secs_f64();
    c1.passed &= secs < 5.0;
    report("1", "basis and projection", &c1, secs);
    results.push(c1);

    let t = Instant::now();
    let mut c2 = criterion_2();
    let secs = t.elapsed().as_secs_f64();
    c2.passed &= secs < 10.0;
    report("2", "gradient oracle", &c2, secs);
    results.push(c2);

    let t = Instant::now();
    let mut c3 = criterion_3();
    let secs = t.elapsed().as_secs_f64();
    c3.passed &= secs < 60.0;
    report("3", "propagator and solver properties", &c3, secs);
    results.push(c3);

    let t = Instant::now();
    let c4 = criterion_4(root);
    report(
        "4",
        "scaled advection example",
        &c4,
        t.elapsed().as_secs_f64(),
    );
    results.push(c4);

    let t = Instant::now();
    let (c5, ex2) = criterion_5(root);
    report(
        "5",
        "scaled diffusion example",
        &c5,
        t.elapsed().as_secs_f64(),
    );
    results.push(c5);

    let t = Instant::now();
    let (c6, c6b) = criterion_6(root);
    let secs = t.elapsed().as_secs_f64();
    report("6", "scaled Burgers examples", &c6, secs);
    report(
        "6b",
        "inviscid high modes vs Galerkin (reported, not gated)",
        &c6b,
        secs,
    );
    results.push(c6);
    results.push(c6b);

    let t = Instant::now();
    let mut c7 = criterion_7(&ex2);
    // the analysis of the shared run is timed separately
    let analyze = Instant::now();
    let cfg = ExperimentConfig::preset("ex2-diffusion", Scale::Desk, &[]).unwrap();
    {
        let dir = RunDir::open(&root.join("ex2")).unwrap();
        run_analyze(&cfg, &dir).unwrap();
    }
    let secs = analyze.elapsed().as_secs_f64();
    c7.passed &= secs < 120.0;
    c7.detail += &format!("; analysis {secs:.1} s");
    report(
        "7",
        "coefficient error bound on the diffusion model",
        &c7,
        t.elapsed().as_secs_f64(),
    );
    results.push(c7);

    let t = Instant::now();
    let mut c8 = criterion_8();
    let secs = t.elapsed().as_secs_f64();
    c8.passed &= secs < 60.0;
    report("8", "exact-modal solution bound", &c8, secs);
    results.push(c8);

    let t = Instant::now();
    let c9 = criterion_9(root);
    report("9", "reproducibility", &c9, t.elapsed().as_secs_f64());
    results.push(c9);

    let failed = results.iter().filter(|o| o.gated && !o.passed).count();
    println!("acceptance: {} gated criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
