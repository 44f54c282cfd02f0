//! Rollouts of the trained operator, reference trajectories and error analysis.
//!
//! Field errors are measured on the fine grid of the reference solver, where
//! the true solution lives; `ũ_n = Pi ṽ` is lifted there.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{l2, Basis, ModalVector};
use crate::dataset::ModalBox;
use crate::error::{EvoError, Result};
use crate::resnet::ResNetModel;
use crate::rng::Purpose;
use crate::solvers::{galerkin_rollout, FineGrid, FineSolver, ModalEvolver, PdeSpec, SolverConfig};

/// Rollouts abort once `||v||_2` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Predicted,
    OptimalProjection,
    Galerkin,
    ExactModal,
}

/// Coefficient vectors at `t_k = k Delta`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub delta: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len())
            .map(|k| k as f64 * self.delta)
            .collect()
    }

    /// CSV `t,v_1..v_n`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let cols: Vec<String> = (1..=self.n()).map(|i| format!("v_{i}")).collect();
        writeln!(w, "t,{}", cols.join(","))?;
        for (t, v) in self.times().iter().zip(&self.states) {
            let row: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by `write_csv`; the lag is taken from the time column.
    pub fn read_csv(r: impl BufRead, kind: TrajectoryKind) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| EvoError::Format("empty trajectory file".into()))??;
        let n = header.split(',').count().saturating_sub(1);
        if !header.starts_with("t,") || n == 0 {
            return Err(EvoError::Format(format!(
                "bad trajectory header {header:?}"
            )));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| EvoError::Format(format!("line {}: {e}", i + 2)))?;
            if vals.len() != n + 1 {
                return Err(EvoError::Format(format!(
                    "line {}: expected {} columns, got {}",
                    i + 2,
                    n + 1,
                    vals.len()
                )));
            }
            times.push(vals[0]);
            states.push(vals[1..].to_vec());
        }
        let delta = if times.len() > 1 {
            times[1] - times[0]
        } else {
            0.0
        };
        for (k, t) in times.iter().enumerate() {
            if (t - k as f64 * delta).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(EvoError::Format(format!(
                    "non-uniform time column at row {k}"
                )));
            }
        }
        Ok(Self {
            kind,
            delta,
            states,
        })
    }

    pub fn load_csv(path: &Path, kind: TrajectoryKind) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?), kind)
    }
}

/// `ṽ(t_{k+1}) = N(ṽ(t_k))` for `steps` steps.
pub fn rollout(model: &ResNetModel, v0: &[f64], delta: f64, steps: usize) -> Result<Trajectory> {
    if v0.len() != model.n() {
        return Err(EvoError::DimensionMismatch {
            expected: model.n(),
            got: v0.len(),
        });
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(v0.to_vec());
    for step in 1..=steps {
        let next = model.forward(states.last().unwrap()).map_err(|e| match e {
            EvoError::NonFinite { .. } => EvoError::BlowUp {
                step,
                norm: f64::INFINITY,
            },
            e => e,
        })?;
        let norm = l2(&next);
        if !(norm <= DIVERGENCE_NORM) {
            return Err(EvoError::BlowUp { step, norm });
        }
        states.push(next);
    }
    Ok(Trajectory {
        kind: TrajectoryKind::Predicted,
        delta,
        states,
    })
}

/// True solution on the fine grid at `t_k` together with its optimal projection.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub fine: FineGrid,
    pub delta: f64,
    pub fields: Vec<Vec<f64>>,
    pub optimal: Trajectory,
    /// `||u(t_k) - P_n u(t_k)||`.
    pub eps_proj: Vec<f64>,
}

impl ReferenceRun {
    /// Evolves fine data `u0` (in the layout of the PDE's fine grid).
    pub fn compute(
        basis: &Basis,
        pde: &PdeSpec,
        config: &SolverConfig,
        u0: Vec<f64>,
        delta: f64,
        steps: usize,
    ) -> Result<Self> {
        let fine = FineGrid::for_pde(basis, pde, config)?;
        let solver = FineSolver::new(basis.domain(), pde, config)?;
        if u0.len() != fine.len() {
            return Err(EvoError::DimensionMismatch {
                expected: fine.len(),
                got: u0.len(),
            });
        }
        let mut fields = Vec::with_capacity(steps + 1);
        fields.push(u0);
        for _ in 0..steps {
            let next = solver.evolve(fields.last().unwrap(), delta)?;
            fields.push(next);
        }
        let states: Vec<Vec<f64>> = fields.iter().map(|u| fine.project(u)).collect();
        let eps_proj = fields
            .iter()
            .zip(&states)
            .map(|(u, v)| fine.residual_norm(u, v))
            .collect();
        Ok(Self {
            fine,
            delta,
            fields,
            optimal: Trajectory {
                kind: TrajectoryKind::OptimalProjection,
                delta,
                states,
            },
            eps_proj,
        })
    }

    /// Samples a closed-form initial condition on the fine grid first.
    pub fn from_fn(
        basis: &Basis,
        pde: &PdeSpec,
        config: &SolverConfig,
        u0: impl Fn(&[f64]) -> f64,
        delta: f64,
        steps: usize,
    ) -> Result<Self> {
        let fine = FineGrid::for_pde(basis, pde, config)?;
        Self::compute(basis, pde, config, fine.sample(u0), delta, steps)
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    /// `v̂(0) = Pi^{-1} P_n u(0)`.
    pub fn initial_coefficients(&self) -> &[f64] {
        &self.optimal.states[0]
    }

    /// `||u(t_k) - Pi a_k|| / ||u(t_k)||` per step; `None` where `u(t_k) = 0`.
    pub fn field_errors(&self, traj: &Trajectory) -> Result<Vec<Option<f64>>> {
        self.check_axis(traj)?;
        Ok(self
            .fields
            .iter()
            .zip(&traj.states)
            .map(|(u, v)| {
                let den = self.fine.norm(u);
                (den > 0.0).then(|| self.fine.residual_norm(u, v) / den)
            })
            .collect())
    }

    /// Absolute field errors `||u(t_k) - Pi a_k||`.
    pub fn field_errors_abs(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        self.check_axis(traj)?;
        Ok(self
            .fields
            .iter()
            .zip(&traj.states)
            .map(|(u, v)| self.fine.residual_norm(u, v))
            .collect())
    }

    fn check_axis(&self, traj: &Trajectory) -> Result<()> {
        if traj.len() != self.fields.len() || (traj.delta - self.delta).abs() > 1e-12 * self.delta {
            return Err(EvoError::InvalidArgument(format!(
                "time axes differ: {} states at lag {} vs {} at lag {}",
                traj.len(),
                traj.delta,
                self.fields.len(),
                self.delta
            )));
        }
        Ok(())
    }
}

/// Iterated `Pi^{-1} P_n E_Delta Pi` from `v0`.
pub fn exact_modal_trajectory(
    evolver: &ModalEvolver,
    v0: &[f64],
    steps: usize,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(v0.to_vec());
    for _ in 0..steps {
        let next = evolver.apply_coeffs(states.last().unwrap())?;
        states.push(next);
    }
    Ok(Trajectory {
        kind: TrajectoryKind::ExactModal,
        delta: evolver.delta(),
        states,
    })
}

pub fn galerkin_trajectory(
    basis: &Basis,
    pde: &PdeSpec,
    v0: &[f64],
    delta: f64,
    steps: usize,
) -> Result<Trajectory> {
    let v0 = ModalVector::new(basis, v0.to_vec())?;
    let states = galerkin_rollout(basis, &v0, delta, steps, pde)?
        .into_iter()
        .map(ModalVector::into_coeffs)
        .collect();
    Ok(Trajectory {
        kind: TrajectoryKind::Galerkin,
        delta,
        states,
    })
}

/// Reference trajectory of the requested kind from a closed-form initial condition.
pub fn reference_trajectory(
    basis: &Basis,
    pde: &PdeSpec,
    config: &SolverConfig,
    u0: impl Fn(&[f64]) -> f64,
    delta: f64,
    steps: usize,
    kind: TrajectoryKind,
) -> Result<Trajectory> {
    let fine = FineGrid::for_pde(basis, pde, config)?;
    let v0 = fine.project(&fine.sample(&u0));
    match kind {
        TrajectoryKind::OptimalProjection => {
            Ok(ReferenceRun::compute(basis, pde, config, fine.sample(&u0), delta, steps)?.optimal)
        }
        TrajectoryKind::ExactModal => {
            exact_modal_trajectory(&ModalEvolver::new(basis, pde, delta, config)?, &v0, steps)
        }
        TrajectoryKind::Galerkin => galerkin_trajectory(basis, pde, &v0, delta, steps),
        TrajectoryKind::Predicted => Err(EvoError::InvalidArgument(
            "predicted trajectories come from rollout()".into(),
        )),
    }
}

/// `||a_k - b_k|| / ||b_k||` in coefficient space; `None` where `b_k = 0`.
pub fn relative_error(a: &Trajectory, b: &Trajectory) -> Result<Vec<Option<f64>>> {
    if a.len() != b.len()
        || a.n() != b.n()
        || (a.delta - b.delta).abs() > 1e-12 * b.delta.abs().max(1e-300)
    {
        return Err(EvoError::InvalidArgument(
            "trajectories have different time axes".into(),
        ));
    }
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| {
            let den = l2(y);
            (den > 0.0).then(|| distance(x, y) / den)
        })
        .collect())
}

pub fn coefficient_errors(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| distance(x, y))
        .collect()
}

/// Time average of the l2 distance restricted to `modes` (zero-based).
pub fn mode_error(a: &Trajectory, b: &Trajectory, modes: std::ops::Range<usize>) -> f64 {
    let total: f64 = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| {
            modes
                .clone()
                .map(|i| (x[i] - y[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / a.len() as f64
}

/// Per-mode sup-norm deviation relative to the sup norm of the reference curve.
pub fn per_mode_sup_relative(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    (0..b.n())
        .map(|i| {
            let dev = a
                .states
                .iter()
                .zip(&b.states)
                .map(|(x, y)| (x[i] - y[i]).abs())
                .fold(0.0, f64::max);
            let scale = b.states.iter().map(|y| y[i].abs()).fold(0.0, f64::max);
            if scale > 0.0 {
                dev / scale
            } else {
                dev
            }
        })
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Points at which operator norms and the network deviation are estimated.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub n: usize,
    pub points: Vec<f64>,
    pub description: String,
}

impl ProbeSet {
    /// `count` uniform box samples plus the given extra states.
    pub fn from_box(
        modal_box: &ModalBox,
        count: usize,
        seed: u64,
        extra: &[Vec<f64>],
        extra_label: &str,
    ) -> Self {
        let n = modal_box.dim();
        let mut points: Vec<f64> = (0..count)
            .into_par_iter()
            .flat_map_iter(|j| modal_box.draw(seed, Purpose::Probe, j as u64))
            .collect();
        let mut used_extra = 0;
        for v in extra.iter().filter(|v| v.len() == n) {
            points.extend_from_slice(v);
            used_extra += 1;
        }
        let description = format!(
            "{count} uniform samples of the training box (seed {seed}) plus {used_extra} {extra_label}"
        );
        Self {
            n,
            points,
            description,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.n.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn nonzero_rows(&self) -> Vec<&[f64]> {
        self.points
            .chunks_exact(self.n)
            .filter(|p| p.iter().any(|x| *x != 0.0))
            .collect()
    }
}

/// Probe estimates entering the Theorem 4.1 bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorEstimates {
    /// `max ||N(p) - M(p)|| / ||p||`.
    pub eps_dnn: f64,
    /// `max ||N(p) - M(p)||`.
    pub eps_dnn_abs: f64,
    /// `max ||N(p)|| / ||p||`.
    pub norm_n: f64,
    /// `max ||M(p)|| / ||p||` with `M = Pi^{-1} P_n E_Delta Pi`.
    pub norm_pe: f64,
}

pub fn estimate_operators(
    model: &ResNetModel,
    evolver: &ModalEvolver,
    probes: &ProbeSet,
) -> Result<OperatorEstimates> {
    let rows = probes.nonzero_rows();
    if rows.is_empty() {
        return Err(EvoError::EmptyProbeSet);
    }
    let per: Vec<(f64, f64, f64, f64)> = rows
        .par_iter()
        .map(|p| {
            let y = model.forward(p)?;
            let m = evolver.apply_coeffs(p)?;
            let np = l2(p);
            let dev = distance(&y, &m);
            Ok((dev / np, dev, l2(&y) / np, l2(&m) / np))
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&(f64, f64, f64, f64)) -> f64| per.iter().map(f).fold(0.0, f64::max);
    Ok(OperatorEstimates {
        eps_dnn: max(|t| t.0),
        eps_dnn_abs: max(|t| t.1),
        norm_n: max(|t| t.2),
        norm_pe: max(|t| t.3),
    })
}

/// Right-hand side of the coefficient bound for `k = 0..len`.
pub fn theorem_rhs(est: &OperatorEstimates, vhat_norms: &[f64], eps_proj: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vhat_norms.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..vhat_norms.len() {
        // sum_{j<k} N^{k-1-j} c_j by Horner's rule
        acc = est.norm_n * acc + est.eps_dnn * vhat_norms[k - 1] + eps_proj[k - 1] * est.norm_pe;
        out.push(acc);
    }
    out
}

/// Right-hand side of the exact-modal solution bound for `k = 0..len`.
pub fn prop31_rhs(norm_pe: f64, eps_proj: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    eps_proj
        .iter()
        .map(|e| {
            acc = norm_pe * acc + e;
            acc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub rel_err_field: Vec<Option<f64>>,
    pub rel_err_coeff: Vec<Option<f64>>,
    pub coeff_err: Vec<f64>,
    pub field_err: Vec<f64>,
    pub eps_proj: Vec<f64>,
    pub eps_dnn: f64,
    pub eps_dnn_abs: f64,
    #[serde(rename = "norm_N")]
    pub norm_n: f64,
    #[serde(rename = "norm_PE")]
    pub norm_pe: f64,
    pub probe_set: String,
    /// Coefficient bound per step.
    pub bound_rhs: Vec<f64>,
    /// Solution bound per step.
    pub bound_rhs_field: Vec<f64>,
    /// Coefficient bound checked up to this step.
    pub horizon: usize,
    pub holds: bool,
    pub holds_field: bool,
    /// `min_k (RHS - LHS)` over the checked steps.
    pub min_slack: f64,
    /// `max_k (||u - ũ_n|| - ||ṽ - v̂|| - eps_proj)`, which must be <= 0.
    pub decomposition_excess: f64,
}

impl ErrorReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Error series of a predicted trajectory plus the Theorem 4.1 bound up to `horizon` steps.
pub fn theorem_bound_check(
    model: &ResNetModel,
    evolver: &ModalEvolver,
    reference: &ReferenceRun,
    predicted: &Trajectory,
    probes: &ProbeSet,
    horizon: usize,
) -> Result<ErrorReport> {
    let est = estimate_operators(model, evolver, probes)?;
    let optimal = &reference.optimal;
    let rel_err_field = reference.field_errors(predicted)?;
    let field_err = reference.field_errors_abs(predicted)?;
    let rel_err_coeff = relative_error(predicted, optimal)?;
    let coeff_err = coefficient_errors(predicted, optimal);
    let vhat_norms: Vec<f64> = optimal.states.iter().map(|v| l2(v)).collect();
    let bound_rhs = theorem_rhs(&est, &vhat_norms, &reference.eps_proj);
    let bound_rhs_field: Vec<f64> = bound_rhs
        .iter()
        .zip(&reference.eps_proj)
        .map(|(b, e)| b + e)
        .collect();
    let horizon = horizon.min(predicted.len() - 1);
    let slack: Vec<f64> = (0..=horizon).map(|k| bound_rhs[k] - coeff_err[k]).collect();
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let holds = slack.iter().all(|s| *s >= 0.0);
    let holds_field = (0..=horizon).all(|k| field_err[k] <= bound_rhs_field[k]);
    let decomposition_excess = (0..predicted.len())
        .map(|k| field_err[k] - coeff_err[k] - reference.eps_proj[k])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ErrorReport {
        times: predicted.times(),
        rel_err_field,
        rel_err_coeff,
        coeff_err,
        field_err,
        eps_proj: reference.eps_proj.clone(),
        eps_dnn: est.eps_dnn,
        eps_dnn_abs: est.eps_dnn_abs,
        norm_n: est.norm_n,
        norm_pe: est.norm_pe,
        probe_set: probes.description.clone(),
        bound_rhs,
        bound_rhs_field,
        horizon,
        holds,
        holds_field,
        min_slack,
        decomposition_excess,
    })
}

/// Exact-modal solution bound, one entry per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop31Report {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub norm_pe: f64,
    pub holds: bool,
}

/// Checks `||u_n(t_k) - u(t_k)|| <= sum_j ||P_n E||^{k-j} eps_proj(t_j)` for the
/// exact-modal trajectory, with `tol` absolute slack.
pub fn prop31_check(
    evolver: &ModalEvolver,
    reference: &ReferenceRun,
    probes: &ProbeSet,
    tol: f64,
) -> Result<Prop31Report> {
    let rows = probes.nonzero_rows();
    if rows.is_empty() {
        return Err(EvoError::EmptyProbeSet);
    }
    let norm_pe = rows
        .par_iter()
        .map(|p| Ok(l2(&evolver.apply_coeffs(p)?) / l2(p)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    prop31_check_with_norm(evolver, reference, norm_pe, tol)
}

/// As `prop31_check` with an already estimated `||P_n E_Delta||`.
pub fn prop31_check_with_norm(
    evolver: &ModalEvolver,
    reference: &ReferenceRun,
    norm_pe: f64,
    tol: f64,
) -> Result<Prop31Report> {
    let traj =
        exact_modal_trajectory(evolver, reference.initial_coefficients(), reference.steps())?;
    let lhs = reference.field_errors_abs(&traj)?;
    let rhs = prop31_rhs(norm_pe, &reference.eps_proj);
    let holds = lhs.iter().zip(&rhs).all(|(l, r)| *l <= r + tol);
    Ok(Prop31Report {
        times: traj.times(),
        lhs,
        rhs,
        norm_pe,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_basis, BasisKind, BoundaryKind, PhysicalDomain};
    use crate::resnet::{Activation, Architecture};
    use std::f64::consts::PI;

    fn trig() -> Basis {
        let d = PhysicalDomain::interval(0.0, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        make_basis(d, BasisKind::RealTrig, 3).unwrap()
    }

    fn identity_model(n: usize) -> ResNetModel {
        let a = Architecture {
            n,
            blocks: 1,
            depth: 1,
            width: 2,
            activation: Activation::Tanh,
        };
        ResNetModel::from_params(a, 0, 1.0, vec![0.0; a.param_count()]).unwrap()
    }

    #[test]
    fn identity_rollout_is_constant_and_composes() {
        let m = identity_model(3);
        let t = rollout(&m, &[1.0, 2.0, 3.0], 0.1, 5).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.states.iter().all(|s| s == &vec![1.0, 2.0, 3.0]));
        let a = Architecture {
            n: 3,
            blocks: 2,
            depth: 2,
            width: 4,
            activation: Activation::Tanh,
        };
        let m = ResNetModel::init(a, 7, 0.5).unwrap();
        let full = rollout(&m, &[0.1, 0.2, 0.3], 0.1, 7).unwrap();
        let first = rollout(&m, &[0.1, 0.2, 0.3], 0.1, 3).unwrap();
        let rest = rollout(&m, &first.states[3], 0.1, 4).unwrap();
        assert_eq!(&full.states[3..], &rest.states[..]);
    }

    #[test]
    fn relative_error_cases() {
        let b = Trajectory {
            kind: TrajectoryKind::OptimalProjection,
            delta: 0.1,
            states: vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![-3.0, 4.0]],
        };
        let a = Trajectory {
            kind: TrajectoryKind::Predicted,
            states: b
                .states
                .iter()
                .map(|s| s.iter().map(|x| 1.1 * x).collect())
                .collect(),
            ..b.clone()
        };
        let e = relative_error(&a, &b).unwrap();
        assert!((e[0].unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(e[1], None);
        assert!((e[2].unwrap() - 0.1).abs() < 1e-12);
        assert!(relative_error(&b, &b)
            .unwrap()
            .iter()
            .flatten()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn advection_in_modal_space_has_zero_bound() {
        let b = trig();
        let pde = PdeSpec::advection(1.0);
        let cfg = SolverConfig::with_grid(64);
        let u0 = |p: &[f64]| 0.3 + p[0].sin() - 0.2 * (2.0 * p[0]).cos();
        let r = ReferenceRun::from_fn(&b, &pde, &cfg, u0, 0.1, 10).unwrap();
        assert!(r.eps_proj.iter().all(|e| *e < 1e-13));
        let ev = ModalEvolver::new(&b, &pde, 0.1, &cfg).unwrap();
        let exact = exact_modal_trajectory(&ev, r.initial_coefficients(), 10).unwrap();
        for (x, y) in exact.states.iter().zip(&r.optimal.states) {
            assert!(distance(x, y) < 1e-12);
        }
        // a surrogate equal to the exact propagator has eps_dnn = 0
        let est = OperatorEstimates {
            eps_dnn: 0.0,
            eps_dnn_abs: 0.0,
            norm_n: 1.0,
            norm_pe: 1.0,
        };
        let rhs = theorem_rhs(&est, &vec![1.0; 11], &r.eps_proj);
        assert!(rhs.iter().all(|x| *x < 1e-12));
        assert_eq!(rhs[0], 0.0);
    }

    #[test]
    fn bound_is_monotone_when_norm_at_least_one() {
        let est = OperatorEstimates {
            eps_dnn: 0.01,
            eps_dnn_abs: 0.01,
            norm_n: 1.02,
            norm_pe: 1.0,
        };
        let rhs = theorem_rhs(&est, &[1.0, 0.9, 0.8, 0.7], &[0.1, 0.1, 0.1, 0.1]);
        assert!(rhs.windows(2).all(|w| w[1] >= w[0]));
        assert!((rhs[1] - (0.01 + 0.1)).abs() < 1e-15);
        assert!((rhs[2] - (1.02 * 0.11 + 0.009 + 0.1)).abs() < 1e-15);
        assert_eq!(prop31_rhs(1.0, &[0.1, 0.2]), vec![0.1, 0.30000000000000004]);
    }

    #[test]
    fn diffusion_reference_decays() {
        let d = PhysicalDomain::interval(0.0, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        let b = make_basis(d, BasisKind::Sine, 5).unwrap();
        let pde = PdeSpec::diffusion(0.5);
        let cfg = SolverConfig::with_grid(128);
        let s = (2.0 / PI).sqrt();
        let t = reference_trajectory(
            &b,
            &pde,
            &cfg,
            |p| s * p[0].sin(),
            0.1,
            5,
            TrajectoryKind::OptimalProjection,
        )
        .unwrap();
        for (k, v) in t.states.iter().enumerate() {
            assert!((v[0] - (-0.05 * k as f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_of_zero_is_zero() {
        let d = PhysicalDomain::interval(-PI, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        let b = make_basis(d, BasisKind::Sine, 9).unwrap();
        let t = reference_trajectory(
            &b,
            &PdeSpec::burgers(0.0),
            &SolverConfig::with_grid(64),
            |_| 0.0,
            0.05,
            4,
            TrajectoryKind::Galerkin,
        )
        .unwrap();
        assert!(t.states.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn divergence_guard() {
        let a = Architecture {
            n: 1,
            blocks: 1,
            depth: 1,
            width: 1,
            activation: Activation::Relu,
        };
        // N(v) = v + 9 relu(v): multiplies positive states by 10 every step
        let m = ResNetModel::from_params(a, 0, 1.0, vec![1.0, 0.0, 9.0, 0.0]).unwrap();
        match rollout(&m, &[1.0], 0.1, 20) {
            Err(EvoError::BlowUp { step, .. }) => assert_eq!(step, 7),
            other => panic!("{other:?}"),
        }
    }
}
