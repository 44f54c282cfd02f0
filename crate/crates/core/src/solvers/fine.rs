//! Fine-grid reference solvers.
//!
//! Layouts:
//! * `Periodic1d`: `M` uniform nodes, FFT propagation.
//! * `Dirichlet1d`: `M + 1` nodes including both walls; odd extension to a
//!   `2M`-periodic signal, so sine modes become Fourier modes. Used for the heat
//!   equation (exact multiplier) and for viscous Burgers (integrating-factor RK4).
//! * `Cells1d`: `M` finite-volume cells carrying cell averages; inviscid Burgers.
//! * `Periodic2d`: `M x M` nodes, 2D FFT multiplier.
//!
//! [`FineGrid`] couples a layout with a modal basis: `lift` evaluates `Pi v` on the
//! fine grid and `project` maps fine data back to coefficients. For cells the
//! projection is the least-squares fit of cell averages, so `project(lift(v)) = v`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Dealias, PdeKind, PdeSpec, SolverConfig, FV_CFL_LIMIT, SPECTRAL_CFL_LIMIT};
use crate::basis::{Basis, BoundaryKind, FieldSample, Grid, PhysicalDomain};
use crate::error::{EvoError, Result};
use crate::quadrature::{gauss_legendre, trapezoid_periodic, Rule1d};

type C64 = Complex<f64>;

const CELL_GAUSS_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineLayout {
    Periodic1d,
    Dirichlet1d,
    Cells1d,
    Periodic2d,
}

impl FineLayout {
    pub fn for_pde(pde: &PdeSpec) -> Self {
        match pde.kind {
            PdeKind::Advection1d => FineLayout::Periodic1d,
            PdeKind::Diffusion1d => FineLayout::Dirichlet1d,
            PdeKind::Burgers1d if pde.viscosity(0) > 0.0 => FineLayout::Dirichlet1d,
            PdeKind::Burgers1d => FineLayout::Cells1d,
            PdeKind::Advdiff2d => FineLayout::Periodic2d,
        }
    }

    fn check_domain(self, domain: &PhysicalDomain) -> Result<()> {
        let want = match self {
            FineLayout::Periodic1d => (1, BoundaryKind::Periodic),
            FineLayout::Dirichlet1d | FineLayout::Cells1d => {
                (1, BoundaryKind::HomogeneousDirichlet)
            }
            FineLayout::Periodic2d => (2, BoundaryKind::Periodic),
        };
        if domain.dim() != want.0 || domain.axes().iter().any(|a| a.boundary != want.1) {
            return Err(EvoError::IncompatibleBasis(format!(
                "{self:?} fine grid needs a {}D {:?} domain",
                want.0, want.1
            )));
        }
        Ok(())
    }

    /// Sample points and weights of the layout on `domain` with resolution `m`.
    pub fn nodes(self, domain: &PhysicalDomain, m: usize) -> Result<Grid> {
        self.check_domain(domain)?;
        let a = domain.axis(0);
        let h = a.length() / m as f64;
        Ok(match self {
            FineLayout::Periodic1d => Grid::tensor(&[trapezoid_periodic(a.lo, a.hi, m)]),
            FineLayout::Dirichlet1d => {
                let mut w = vec![h; m + 1];
                w[0] = 0.5 * h;
                w[m] = 0.5 * h;
                let x = (0..=m).map(|i| a.lo + i as f64 * h).collect();
                Grid::tensor(&[Rule1d {
                    nodes: x,
                    weights: w,
                }])
            }
            FineLayout::Cells1d => {
                let x = (0..m).map(|i| a.lo + (i as f64 + 0.5) * h).collect();
                Grid::tensor(&[Rule1d {
                    nodes: x,
                    weights: vec![h; m],
                }])
            }
            FineLayout::Periodic2d => {
                let b = domain.axis(1);
                Grid::tensor(&[
                    trapezoid_periodic(a.lo, a.hi, m),
                    trapezoid_periodic(b.lo, b.hi, m),
                ])
            }
        })
    }
}

/// Gauss points of every cell, cell-major.
fn cell_subgrid(lo: f64, hi: f64, m: usize) -> Grid {
    let h = (hi - lo) / m as f64;
    let mut nodes = Vec::with_capacity(m * CELL_GAUSS_POINTS);
    let mut weights = Vec::with_capacity(m * CELL_GAUSS_POINTS);
    for i in 0..m {
        let c = lo + i as f64 * h;
        let r = gauss_legendre(c, c + h, CELL_GAUSS_POINTS);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Grid::tensor(&[Rule1d { nodes, weights }])
}

/// Fine sample grid plus the maps between fine data and modal coefficients.
#[derive(Debug, Clone)]
pub struct FineGrid {
    layout: FineLayout,
    domain: PhysicalDomain,
    m: usize,
    n: usize,
    grid: Arc<Grid>,
    /// `len x n`: value (or cell average) of `phi_j` at sample `i`.
    lift: Vec<f64>,
    /// `n x len`.
    project: Vec<f64>,
    /// Cells only: Gauss subgrid and `len_sub x n` basis values there.
    sub: Option<(Grid, Vec<f64>)>,
}

impl FineGrid {
    pub fn new(basis: &Basis, layout: FineLayout, m: usize) -> Result<Self> {
        let domain = basis.domain().clone();
        let grid = layout.nodes(&domain, m)?;
        let n = basis.n();
        let len = grid.len();
        let (lift, project, sub) = match layout {
            FineLayout::Cells1d => {
                let a = domain.axis(0);
                let sub = cell_subgrid(a.lo, a.hi, m);
                let h = a.length() / m as f64;
                let vals = transpose(&basis.values_at(&sub, &[0]), n, sub.len());
                let mut lift = vec![0.0; len * n];
                for i in 0..len {
                    for q in 0..CELL_GAUSS_POINTS {
                        let s = i * CELL_GAUSS_POINTS + q;
                        let w = sub.weights()[s] / h;
                        for j in 0..n {
                            lift[i * n + j] += w * vals[s * n + j];
                        }
                    }
                }
                let project = least_squares_projector(&lift, grid.weights(), len, n)?;
                (lift, project, Some((sub, vals)))
            }
            _ => {
                let lift = transpose(&basis.values_at(&grid, &[0]), n, len);
                let mut project = vec![0.0; n * len];
                for i in 0..len {
                    for j in 0..n {
                        project[j * len + i] = grid.weights()[i] * lift[i * n + j];
                    }
                }
                (lift, project, None)
            }
        };
        Ok(Self {
            layout,
            domain,
            m,
            n,
            grid: Arc::new(grid),
            lift,
            project,
            sub,
        })
    }

    pub fn for_pde(basis: &Basis, pde: &PdeSpec, config: &SolverConfig) -> Result<Self> {
        Self::new(basis, FineLayout::for_pde(pde), config.grid)
    }

    pub fn layout(&self) -> FineLayout {
        self.layout
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> &PhysicalDomain {
        &self.domain
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Values (cell averages for cells) of `sum_j v_j phi_j`.
    pub fn lift(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n;
        self.lift
            .chunks_exact(n)
            .map(|row| row.iter().zip(coeffs).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let len = self.len();
        self.project
            .chunks_exact(len)
            .map(|row| row.iter().zip(values).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Samples a closed-form function in the layout's representation.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        match &self.sub {
            Some((sub, _)) => {
                let h = self.domain.axis(0).length() / self.m as f64;
                sub.points()
                    .zip(sub.weights())
                    .map(|(p, w)| w * f(p) / h)
                    .collect::<Vec<_>>()
                    .chunks_exact(CELL_GAUSS_POINTS)
                    .map(|c| c.iter().sum())
                    .collect()
            }
            None => self.grid.points().map(f).collect(),
        }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<FieldSample> {
        FieldSample::new(self.grid.clone(), values)
    }

    /// Fine-grid L2 norm (piecewise constant for cells).
    pub fn norm(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(self.grid.weights())
            .map(|(u, w)| w * u * u)
            .sum::<f64>()
            .sqrt()
    }

    /// `||u - Pi v||` with `u` in the layout's representation.
    pub fn residual_norm(&self, values: &[f64], coeffs: &[f64]) -> f64 {
        match &self.sub {
            Some((sub, vals)) => {
                let n = self.n;
                let mut acc = 0.0;
                for (s, w) in sub.weights().iter().enumerate() {
                    let u = values[s / CELL_GAUSS_POINTS];
                    let p: f64 = vals[s * n..(s + 1) * n]
                        .iter()
                        .zip(coeffs)
                        .map(|(a, b)| a * b)
                        .sum();
                    acc += w * (u - p) * (u - p);
                }
                acc.sqrt()
            }
            None => {
                let lifted = self.lift(coeffs);
                let diff: Vec<f64> = values.iter().zip(&lifted).map(|(a, b)| a - b).collect();
                self.norm(&diff)
            }
        }
    }

    /// Fine-grid distance between two fields in the same representation.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.norm(&d)
    }
}

fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// `(A^T W A)^{-1} A^T W` for a tall `len x n` matrix `A`.
fn least_squares_projector(a: &[f64], w: &[f64], len: usize, n: usize) -> Result<Vec<f64>> {
    let mut g = vec![0.0; n * n];
    for i in 0..len {
        for p in 0..n {
            for q in 0..n {
                g[p * n + q] += w[i] * a[i * n + p] * a[i * n + q];
            }
        }
    }
    let l = cholesky(&g, n)?;
    let mut out = vec![0.0; n * len];
    let mut col = vec![0.0; n];
    for i in 0..len {
        for p in 0..n {
            col[p] = w[i] * a[i * n + p];
        }
        let x = cholesky_solve(&l, n, &col);
        for p in 0..n {
            out[p * len + i] = x[p];
        }
    }
    Ok(out)
}

pub(crate) fn cholesky(g: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = g[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return Err(EvoError::RankDeficient { index: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Diagnostics of one inviscid finite-volume step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvStep {
    pub dt: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// Time-integrated net flux through the walls (right minus left).
    pub boundary_outflow: f64,
}

impl FvStep {
    /// Mass change not accounted for by wall fluxes.
    pub fn imbalance(&self) -> f64 {
        self.mass_after - self.mass_before + self.boundary_outflow
    }
}

/// Reference evolution of one PDE on one fine layout.
#[derive(Clone)]
pub struct FineSolver {
    pde: PdeSpec,
    config: SolverConfig,
    layout: FineLayout,
    domain: PhysicalDomain,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FineSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FineSolver")
            .field("pde", &self.pde)
            .field("config", &self.config)
            .field("layout", &self.layout)
            .field("m", &self.m)
            .finish()
    }
}

impl FineSolver {
    pub fn new(domain: &PhysicalDomain, pde: &PdeSpec, config: &SolverConfig) -> Result<Self> {
        pde.validate()?;
        config.validate()?;
        let layout = FineLayout::for_pde(pde);
        layout.check_domain(domain)?;
        if layout == FineLayout::Cells1d && config.cfl > FV_CFL_LIMIT {
            return Err(EvoError::CflViolation {
                dt: config.cfl,
                bound: FV_CFL_LIMIT,
            });
        }
        let m = config.grid;
        let len = match layout {
            FineLayout::Dirichlet1d => 2 * m,
            _ => m,
        };
        let mut planner = FftPlanner::new();
        Ok(Self {
            pde: pde.clone(),
            config: config.clone(),
            layout,
            domain: domain.clone(),
            m,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        })
    }

    pub fn layout(&self) -> FineLayout {
        self.layout
    }

    pub fn pde(&self) -> &PdeSpec {
        &self.pde
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn grid(&self) -> Result<Grid> {
        self.layout.nodes(&self.domain, self.m)
    }

    fn spacing(&self) -> f64 {
        self.domain.axis(0).length() / self.m as f64
    }

    /// Advances fine data by `delta`.
    pub fn evolve(&self, u: &[f64], delta: f64) -> Result<Vec<f64>> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "time lag must be >= 0, got {delta}"
            )));
        }
        let expected = match self.layout {
            FineLayout::Dirichlet1d => self.m + 1,
            FineLayout::Periodic2d => self.m * self.m,
            _ => self.m,
        };
        if u.len() != expected {
            return Err(EvoError::DimensionMismatch {
                expected,
                got: u.len(),
            });
        }
        if delta == 0.0 {
            return Ok(u.to_vec());
        }
        match (self.pde.kind, self.layout) {
            (PdeKind::Burgers1d, FineLayout::Dirichlet1d) => self.burgers_spectral(u, delta),
            (PdeKind::Burgers1d, _) => self.burgers_fv(u, delta, |_| {}),
            (_, FineLayout::Periodic1d) => Ok(self.linear_periodic(u, delta)),
            (_, FineLayout::Dirichlet1d) => Ok(self.linear_dirichlet(u, delta)),
            (_, FineLayout::Periodic2d) => Ok(self.linear_2d(u, delta)),
            (_, FineLayout::Cells1d) => unreachable!("cells are only used for inviscid Burgers"),
        }
    }

    /// Inviscid evolution that reports every step.
    pub fn evolve_traced(&self, u: &[f64], delta: f64) -> Result<(Vec<f64>, Vec<FvStep>)> {
        if self.layout != FineLayout::Cells1d {
            return Err(EvoError::InvalidArgument(
                "step tracing is only available for the finite-volume solver".into(),
            ));
        }
        let mut steps = Vec::new();
        let out = self.burgers_fv(u, delta, |s| steps.push(s))?;
        Ok((out, steps))
    }

    fn wavenumber(&self, idx: usize, len: usize, period: f64) -> f64 {
        let m = if idx <= len / 2 {
            idx as f64
        } else {
            idx as f64 - len as f64
        };
        2.0 * std::f64::consts::PI * m / period
    }

    fn linear_periodic(&self, u: &[f64], delta: f64) -> Vec<f64> {
        let len = self.m;
        let period = self.domain.axis(0).length();
        let (alpha, sigma) = (self.pde.speed(0), self.pde.viscosity(0));
        let mut buf: Vec<C64> = u.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (i, c) in buf.iter_mut().enumerate() {
            let k = self.wavenumber(i, len, period);
            let nyquist = len % 2 == 0 && i == len / 2;
            let phase = if nyquist {
                C64::new((k * alpha * delta).cos(), 0.0)
            } else {
                C64::from_polar(1.0, -k * alpha * delta)
            };
            *c *= phase * (-sigma * k * k * delta).exp();
        }
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re / len as f64).collect()
    }

    fn odd_extend(&self, u: &[f64]) -> Vec<C64> {
        let m = self.m;
        let mut buf = vec![C64::new(0.0, 0.0); 2 * m];
        for i in 1..m {
            buf[i] = C64::new(u[i], 0.0);
            buf[2 * m - i] = C64::new(-u[i], 0.0);
        }
        buf
    }

    fn odd_restrict(&self, buf: &[C64]) -> Vec<f64> {
        let m = self.m;
        let scale = 1.0 / (2 * m) as f64;
        let mut out: Vec<f64> = buf[..=m].iter().map(|c| c.re * scale).collect();
        out[0] = 0.0;
        out[m] = 0.0;
        out
    }

    fn linear_dirichlet(&self, u: &[f64], delta: f64) -> Vec<f64> {
        let len = 2 * self.m;
        let period = 2.0 * self.domain.axis(0).length();
        let sigma = self.pde.viscosity(0);
        let mut buf = self.odd_extend(u);
        self.fwd.process(&mut buf);
        for (i, c) in buf.iter_mut().enumerate() {
            let k = self.wavenumber(i, len, period);
            *c *= (-sigma * k * k * delta).exp();
        }
        self.inv.process(&mut buf);
        self.odd_restrict(&buf)
    }

    fn linear_2d(&self, u: &[f64], delta: f64) -> Vec<f64> {
        let m = self.m;
        let (px, py) = (self.domain.axis(0).length(), self.domain.axis(1).length());
        let mut buf: Vec<C64> = u.iter().map(|&x| C64::new(x, 0.0)).collect();
        fft_2d(&*self.fwd, &mut buf, m);
        for ix in 0..m {
            let kx = self.wavenumber(ix, m, px);
            let nx = m % 2 == 0 && ix == m / 2;
            for iy in 0..m {
                let ky = self.wavenumber(iy, m, py);
                let ny = m % 2 == 0 && iy == m / 2;
                let theta = (kx * self.pde.speed(0) + ky * self.pde.speed(1)) * delta;
                let decay = (-(self.pde.viscosity(0) * kx * kx + self.pde.viscosity(1) * ky * ky)
                    * delta)
                    .exp();
                let phase = if nx || ny {
                    C64::new(theta.cos(), 0.0)
                } else {
                    C64::from_polar(1.0, -theta)
                };
                buf[ix * m + iy] *= phase * decay;
            }
        }
        fft_2d(&*self.inv, &mut buf, m);
        let scale = 1.0 / (m * m) as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Viscous Burgers: odd extension, 2/3 dealiasing, integrating-factor RK4.
    fn burgers_spectral(&self, u: &[f64], delta: f64) -> Result<Vec<f64>> {
        let m = self.m;
        let len = 2 * m;
        let period = 2.0 * self.domain.axis(0).length();
        let sigma = self.pde.viscosity(0);
        let h = self.spacing();
        let umax = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let stable = SPECTRAL_CFL_LIMIT * h / umax.max(f64::MIN_POSITIVE);
        let dt_target = match self.config.dt {
            Some(dt) if dt > stable => return Err(EvoError::CflViolation { dt, bound: stable }),
            Some(dt) => dt,
            None if umax == 0.0 => delta,
            None => self.config.cfl * h / umax,
        };
        let steps = (delta / dt_target).ceil().max(1.0) as usize;
        let dt = delta / steps as f64;

        let cutoff = match self.config.dealias {
            Dealias::TwoThirds => (2 * m) / 3,
            Dealias::None => m,
        };
        let k: Vec<f64> = (0..len).map(|i| self.wavenumber(i, len, period)).collect();
        let keep: Vec<bool> = (0..len)
            .map(|i| i.min(len - i) <= cutoff && i != m)
            .collect();
        let e: Vec<f64> = k
            .iter()
            .map(|k| (-sigma * k * k * dt / 2.0).exp())
            .collect();
        let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
        // dt-scaled transform of -(u^2/2)_x
        let g: Vec<C64> = k
            .iter()
            .zip(&keep)
            .map(|(k, &keep)| {
                if keep {
                    C64::new(0.0, -0.5 * k * dt)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();

        let mut v = self.odd_extend(u);
        self.fwd.process(&mut v);
        let mut work = vec![C64::new(0.0, 0.0); len];
        let mut nonlinear = |spec: &[C64], out: &mut [C64]| {
            work.copy_from_slice(spec);
            self.inv.process(&mut work);
            for c in work.iter_mut() {
                let x = c.re / len as f64;
                *c = C64::new(x * x, 0.0);
            }
            self.fwd.process(&mut work);
            for ((o, w), g) in out.iter_mut().zip(&work).zip(&g) {
                *o = g * w;
            }
        };
        let mut a = vec![C64::new(0.0, 0.0); len];
        let mut b = a.clone();
        let mut c = a.clone();
        let mut d = a.clone();
        let mut tmp = a.clone();
        for step in 0..steps {
            nonlinear(&v, &mut a);
            for i in 0..len {
                tmp[i] = (v[i] + a[i] * 0.5) * e[i];
            }
            nonlinear(&tmp, &mut b);
            for i in 0..len {
                tmp[i] = v[i] * e[i] + b[i] * 0.5;
            }
            nonlinear(&tmp, &mut c);
            for i in 0..len {
                tmp[i] = v[i] * e2[i] + c[i] * e[i];
            }
            nonlinear(&tmp, &mut d);
            let mut norm = 0.0;
            for i in 0..len {
                let next =
                    v[i] * e2[i] + (a[i] * e2[i] + (b[i] + c[i]) * (2.0 * e[i]) + d[i]) / 6.0;
                // odd real signal: purely imaginary spectrum
                v[i] = C64::new(0.0, next.im);
                norm += next.im * next.im;
            }
            if !norm.is_finite() || norm.sqrt() / len as f64 > 1e6 {
                return Err(EvoError::BlowUp {
                    step,
                    norm: norm.sqrt() / len as f64,
                });
            }
        }
        self.inv.process(&mut v);
        Ok(self.odd_restrict(&v))
    }

    /// Inviscid Burgers: Godunov flux, MUSCL reconstruction, SSP-RK2.
    fn burgers_fv(
        &self,
        u: &[f64],
        delta: f64,
        mut observe: impl FnMut(FvStep),
    ) -> Result<Vec<f64>> {
        let h = self.spacing();
        let limiter = self.config.limiter;
        let mut state = u.to_vec();
        let mut t = 0.0;
        let mut flux = vec![0.0; self.m + 1];
        let mut rhs = vec![0.0; self.m];
        let mut stage = vec![0.0; self.m];
        let mut step = 0usize;
        while t < delta {
            let umax = state.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if umax == 0.0 {
                break;
            }
            let stable = FV_CFL_LIMIT * h / umax;
            let mut dt = match self.config.dt {
                Some(dt) if dt > stable => {
                    return Err(EvoError::CflViolation { dt, bound: stable })
                }
                Some(dt) => dt,
                None => self.config.cfl * h / umax,
            };
            if t + dt > delta * (1.0 - 1e-14) {
                dt = delta - t;
            }
            let mass_before = h * state.iter().sum::<f64>();
            let out1 = fv_rhs(&state, h, limiter, &mut flux, &mut rhs);
            for i in 0..self.m {
                stage[i] = state[i] + dt * rhs[i];
            }
            let out2 = fv_rhs(&stage, h, limiter, &mut flux, &mut rhs);
            for i in 0..self.m {
                state[i] = 0.5 * state[i] + 0.5 * (stage[i] + dt * rhs[i]);
            }
            let mass_after = h * state.iter().sum::<f64>();
            observe(FvStep {
                dt,
                mass_before,
                mass_after,
                boundary_outflow: 0.5 * dt * (out1 + out2),
            });
            if state.iter().any(|x| !x.is_finite()) {
                return Err(EvoError::BlowUp {
                    step,
                    norm: f64::INFINITY,
                });
            }
            t += dt;
            step += 1;
        }
        Ok(state)
    }
}

/// In-place 2D transform of a row-major `m x m` array.
fn fft_2d(fft: &dyn Fft<f64>, buf: &mut [C64], m: usize) {
    for row in buf.chunks_exact_mut(m) {
        fft.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = buf[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            buf[i * m + j] = col[i];
        }
    }
}

fn godunov(ul: f64, ur: f64) -> f64 {
    let a = ul.max(0.0);
    let b = ur.min(0.0);
    (0.5 * a * a).max(0.5 * b * b)
}

/// Fills `rhs = -(F_{i+1/2} - F_{i-1/2}) / h` and returns the net wall outflow rate.
fn fv_rhs(u: &[f64], h: f64, limiter: super::Limiter, flux: &mut [f64], rhs: &mut [f64]) -> f64 {
    let m = u.len();
    // two ghost cells per side by odd reflection
    let at = |i: isize| -> f64 {
        if i < 0 {
            -u[(-i - 1) as usize]
        } else if i >= m as isize {
            -u[(2 * m as isize - i - 1) as usize]
        } else {
            u[i as usize]
        }
    };
    let slope = |i: isize| limiter.slope(at(i) - at(i - 1), at(i + 1) - at(i));
    for f in 0..=m {
        let l = f as isize - 1;
        let r = f as isize;
        let ul = at(l) + 0.5 * slope(l);
        let ur = at(r) - 0.5 * slope(r);
        flux[f] = godunov(ul, ur);
    }
    for i in 0..m {
        rhs[i] = -(flux[i + 1] - flux[i]) / h;
    }
    flux[m] - flux[0]
}

/// Evolves Burgers data on the fine layout selected by `sigma`.
///
/// `u0` must live on `FineLayout::nodes(domain, config.grid)`: nodal values with
/// both walls for `sigma > 0`, cell averages for `sigma = 0`.
pub fn burgers_evolve(
    u0: &FieldSample,
    delta: f64,
    sigma: f64,
    config: &SolverConfig,
    domain: &PhysicalDomain,
) -> Result<FieldSample> {
    let pde = PdeSpec::burgers(sigma);
    let solver = FineSolver::new(domain, &pde, config)?;
    let grid = solver.grid()?;
    if !u0.grid.same_nodes(&grid, 1e-12) {
        return Err(EvoError::GridMismatch(format!(
            "initial data has {} nodes, {:?} layout with M = {} expects {}",
            u0.grid.len(),
            solver.layout(),
            config.grid,
            grid.len()
        )));
    }
    let out = solver.evolve(&u0.values, delta)?;
    FieldSample::new(u0.grid.clone(), out)
}
