//! Orthonormal modal bases, the coefficient/field bijection and the
//! quadrature-based orthogonal projection onto the modal space.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};
use crate::quadrature::{gauss_legendre, trapezoid_periodic, Rule1d};

/// Tolerance on `max |G - I|` for every constructed basis.
pub const GRAM_TOLERANCE: f64 = 1e-10;
/// Pivot norm below which Gram-Schmidt reports rank deficiency.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Periodic,
    #[serde(alias = "dirichlet")]
    HomogeneousDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub boundary: BoundaryKind,
}

impl Axis {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Axis>", into = "Vec<Axis>")]
pub struct PhysicalDomain {
    axes: Vec<Axis>,
}

impl TryFrom<Vec<Axis>> for PhysicalDomain {
    type Error = EvoError;
    fn try_from(axes: Vec<Axis>) -> Result<Self> {
        PhysicalDomain::new(axes)
    }
}

impl From<PhysicalDomain> for Vec<Axis> {
    fn from(d: PhysicalDomain) -> Self {
        d.axes
    }
}

impl PhysicalDomain {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(EvoError::InvalidDomain(format!(
                "expected 1 or 2 axes, got {}",
                axes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(EvoError::InvalidDomain(format!(
                    "axis {i}: need lo < hi, got ({}, {})",
                    a.lo, a.hi
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn interval(lo: f64, hi: f64, boundary: BoundaryKind) -> Result<Self> {
        Self::new(vec![Axis { lo, hi, boundary }])
    }

    pub fn periodic_square(lo: f64, hi: f64) -> Result<Self> {
        let a = Axis {
            lo,
            hi,
            boundary: BoundaryKind::Periodic,
        };
        Self::new(vec![a, a])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self
                .axes
                .iter()
                .zip(point)
                .all(|(a, &x)| x >= a.lo - 1e-12 && x <= a.hi + 1e-12)
    }
}

/// One-dimensional trigonometric factor with wavenumber `k` in absolute coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "lowercase")]
pub enum Factor {
    One,
    Cos(f64),
    Sin(f64),
}

impl Factor {
    /// Value of the `order`-th derivative at `x`.
    pub fn eval(self, x: f64, order: u8) -> f64 {
        match self {
            Factor::One => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Factor::Cos(k) => {
                let (s, c) = (k * x).sin_cos();
                match order % 4 {
                    0 => c * k.powi(order as i32),
                    1 => -s * k.powi(order as i32),
                    2 => -c * k.powi(order as i32),
                    _ => s * k.powi(order as i32),
                }
            }
            Factor::Sin(k) => {
                let (s, c) = (k * x).sin_cos();
                match order % 4 {
                    0 => s * k.powi(order as i32),
                    1 => c * k.powi(order as i32),
                    2 => -s * k.powi(order as i32),
                    _ => -c * k.powi(order as i32),
                }
            }
        }
    }

    pub fn wavenumber(self) -> f64 {
        match self {
            Factor::One => 0.0,
            Factor::Cos(k) | Factor::Sin(k) => k,
        }
    }

    fn label(self, var: &str) -> String {
        match self {
            Factor::One => "1".into(),
            Factor::Cos(k) => format!("cos({}{var})", fmt_k(k)),
            Factor::Sin(k) => format!("sin({}{var})", fmt_k(k)),
        }
    }
}

fn fmt_k(k: f64) -> String {
    if k == 1.0 {
        String::new()
    } else if k.fract() == 0.0 {
        format!("{}", k as i64)
    } else {
        format!("{k}*")
    }
}

/// Product of per-axis factors scaled by `coef`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub coef: f64,
    pub factors: Vec<Factor>,
}

/// A closed-form (not yet orthonormalized) basis candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFunction {
    pub label: String,
    pub terms: Vec<TrigTerm>,
}

impl RawFunction {
    pub fn product(factors: Vec<Factor>) -> Self {
        let vars = ["x", "y"];
        let label = if factors.iter().all(|f| *f == Factor::One) {
            "1".to_string()
        } else {
            factors
                .iter()
                .zip(vars)
                .filter(|(f, _)| **f != Factor::One)
                .map(|(f, v)| f.label(v))
                .collect::<Vec<_>>()
                .join("*")
        };
        Self {
            label,
            terms: vec![TrigTerm { coef: 1.0, factors }],
        }
    }

    pub fn combination(label: impl Into<String>, terms: Vec<TrigTerm>) -> Self {
        Self {
            label: label.into(),
            terms,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.eval_deriv(point, &[0, 0])
    }

    /// Mixed derivative with `orders[axis]` derivatives along each axis.
    pub fn eval_deriv(&self, point: &[f64], orders: &[u8]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.factors
                        .iter()
                        .zip(point)
                        .enumerate()
                        .map(|(a, (f, &x))| f.eval(x, orders.get(a).copied().unwrap_or(0)))
                        .product::<f64>()
            })
            .sum()
    }

    pub fn max_wavenumber(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.wavenumber().abs()))
            .fold(0.0, f64::max)
    }

    fn dim(&self) -> usize {
        self.terms.first().map(|t| t.factors.len()).unwrap_or(0)
    }
}

/// Nodes (flattened, `dim` coordinates per node) with optional quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn from_points(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(EvoError::InvalidArgument(format!(
                "{} coordinates do not form {dim}-dimensional points",
                coords.len()
            )));
        }
        let len = coords.len() / dim;
        if !weights.is_empty() && weights.len() != len {
            return Err(EvoError::DimensionMismatch {
                expected: len,
                got: weights.len(),
            });
        }
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    /// Tensor grid; the last axis varies fastest.
    pub fn tensor(rules: &[Rule1d]) -> Self {
        match rules {
            [r] => Self {
                dim: 1,
                coords: r.nodes.clone(),
                weights: r.weights.clone(),
            },
            [rx, ry] => {
                let mut coords = Vec::with_capacity(2 * rx.len() * ry.len());
                let mut weights = Vec::with_capacity(rx.len() * ry.len());
                for (x, wx) in rx.nodes.iter().zip(&rx.weights) {
                    for (y, wy) in ry.nodes.iter().zip(&ry.weights) {
                        coords.push(*x);
                        coords.push(*y);
                        weights.push(wx * wy);
                    }
                }
                Self {
                    dim: 2,
                    coords,
                    weights,
                }
            }
            _ => panic!("tensor grids are 1D or 2D"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn same_nodes(&self, other: &Grid, tol: f64) -> bool {
        self.dim == other.dim
            && self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs()))
    }
}

/// Scalar field values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl FieldSample {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(EvoError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "non-finite field value at node {i}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.points().map(&f).collect();
        Self { grid, values }
    }

    /// Writes `x,u` (1D) or `x,y,u` (2D) CSV.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let header = if self.grid.dim() == 1 { "x,u" } else { "x,y,u" };
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for (p, u) in self.grid.points().zip(&self.values) {
            line.clear();
            for c in p {
                write!(line, "{c:e},").unwrap();
            }
            write!(line, "{u:e}").unwrap();
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Reads a field CSV; the resulting grid carries no weights.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| EvoError::Format("empty field CSV".into()))??;
        let dim = match header.trim() {
            "x,u" => 1,
            "x,y,u" => 2,
            h => {
                return Err(EvoError::Format(format!(
                    "unexpected field CSV header {h:?}"
                )))
            }
        };
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EvoError::Format(format!("line {}: {e}", lineno + 2)))?;
            if cols.len() != dim + 1 {
                return Err(EvoError::Format(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 2,
                    dim + 1,
                    cols.len()
                )));
            }
            coords.extend_from_slice(&cols[..dim]);
            values.push(cols[dim]);
        }
        let grid = Grid::from_points(dim, coords, Vec::new())?;
        FieldSample::new(Arc::new(grid), values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisId(pub u64);

/// Coefficient vector of a function in the modal space of one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalVector {
    coeffs: Vec<f64>,
    basis: BasisId,
}

impl ModalVector {
    pub fn new(basis: &Basis, coeffs: Vec<f64>) -> Result<Self> {
        Self::with_id(basis.id(), basis.n(), coeffs)
    }

    pub fn with_id(basis: BasisId, n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != n {
            return Err(EvoError::DimensionMismatch {
                expected: n,
                got: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "non-finite coefficient at index {i}"
            )));
        }
        Ok(Self { coeffs, basis })
    }

    pub fn zeros(basis: &Basis) -> Self {
        Self {
            coeffs: vec![0.0; basis.n()],
            basis: basis.id(),
        }
    }

    /// Unit vector `e_j` (zero-based `j`).
    pub fn unit(basis: &Basis, j: usize) -> Self {
        let mut v = Self::zeros(basis);
        v.coeffs[j] = 1.0;
        v
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn basis_id(&self) -> BasisId {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2(&self.coeffs)
    }

    pub fn distance(&self, other: &ModalVector) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    RealTrig,
    Sine,
    #[serde(rename = "tensor-trig-2d")]
    TensorTrig2d,
    CustomOrthonormalized,
}

/// Orthonormal basis `phi_i = sum_j T_ij raw_j` together with its quadrature.
#[derive(Debug, Clone)]
pub struct Basis {
    id: BasisId,
    kind: BasisKind,
    size: usize,
    domain: PhysicalDomain,
    raw: Vec<RawFunction>,
    transform: Vec<f64>,
    labels: Vec<String>,
    quadrature: Vec<Rule1d>,
    grid: Arc<Grid>,
    values: Vec<f64>,
    weighted: Vec<f64>,
}

/// Builds one of the built-in bases.
///
/// `size` is the maximum wavenumber for `RealTrig` (giving `n = 2 size + 1`),
/// the number of sine modes for `Sine`, and must be 25 for `TensorTrig2d`.
pub fn make_basis(domain: PhysicalDomain, kind: BasisKind, size: usize) -> Result<Basis> {
    if size < 1 {
        return Err(EvoError::InvalidArgument(
            "basis size must be at least 1".into(),
        ));
    }
    match kind {
        BasisKind::RealTrig => {
            let axis = single_axis(&domain, BoundaryKind::Periodic, "real-trig")?;
            let scale = integer_snap(2.0 * PI / axis.length());
            let mut raw = vec![RawFunction::product(vec![Factor::One])];
            let mut diag = vec![1.0 / axis.length().sqrt()];
            for k in 1..=size {
                let w = k as f64 * scale;
                raw.push(RawFunction::product(vec![Factor::Cos(w)]));
                raw.push(RawFunction::product(vec![Factor::Sin(w)]));
                diag.push((2.0 / axis.length()).sqrt());
                diag.push((2.0 / axis.length()).sqrt());
            }
            let quad = vec![trapezoid_periodic(axis.lo, axis.hi, periodic_nodes(size))];
            Basis::assemble(kind, size, domain, raw, diagonal(&diag), quad)
        }
        BasisKind::Sine => {
            let axis = single_axis(&domain, BoundaryKind::HomogeneousDirichlet, "sine")?;
            let raw = (1..=size)
                .map(|j| RawFunction::product(vec![Factor::Sin(j as f64)]))
                .collect();
            let c = (2.0 / axis.length()).sqrt();
            let quad = vec![gauss_legendre(
                axis.lo,
                axis.hi,
                dirichlet_nodes(size, axis.length()),
            )];
            Basis::assemble(kind, size, domain, raw, diagonal(&vec![c; size]), quad)
        }
        BasisKind::TensorTrig2d => {
            if size != 25 {
                return Err(EvoError::InvalidArgument(format!(
                    "tensor-trig-2d has exactly 25 functions, got size {size}"
                )));
            }
            if domain.dim() != 2
                || domain
                    .axes()
                    .iter()
                    .any(|a| a.boundary != BoundaryKind::Periodic)
            {
                return Err(EvoError::IncompatibleBasis(
                    "tensor-trig-2d needs a doubly periodic 2D domain".into(),
                ));
            }
            let sx = integer_snap(2.0 * PI / domain.axis(0).length());
            let sy = integer_snap(2.0 * PI / domain.axis(1).length());
            let raw = tensor_trig_functions(sx, sy);
            let quad = domain
                .axes()
                .iter()
                .map(|a| trapezoid_periodic(a.lo, a.hi, periodic_nodes(3)))
                .collect();
            let b = orthonormalize(domain, raw, quad)?;
            Ok(b.with_kind(BasisKind::TensorTrig2d, size))
        }
        BasisKind::CustomOrthonormalized => Err(EvoError::InvalidArgument(
            "custom bases are built with orthonormalize()".into(),
        )),
    }
}

/// The 25 functions spanning the two-dimensional modal space, in their fixed order.
pub fn tensor_trig_functions(sx: f64, sy: f64) -> Vec<RawFunction> {
    use Factor::*;
    let mut f = vec![RawFunction::product(vec![One, One])];
    for k in 1..=3 {
        let k = k as f64 * sx;
        f.push(RawFunction::product(vec![Cos(k), One]));
        f.push(RawFunction::product(vec![Sin(k), One]));
    }
    for k in 1..=3 {
        let k = k as f64 * sy;
        f.push(RawFunction::product(vec![One, Cos(k)]));
        f.push(RawFunction::product(vec![One, Sin(k)]));
    }
    for (kx, ky) in [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)] {
        let (kx, ky) = (kx * sx, ky * sy);
        f.push(RawFunction::product(vec![Cos(kx), Cos(ky)]));
        f.push(RawFunction::product(vec![Cos(kx), Sin(ky)]));
        f.push(RawFunction::product(vec![Sin(kx), Cos(ky)]));
        f.push(RawFunction::product(vec![Sin(kx), Sin(ky)]));
    }
    f
}

/// Orthonormalizes `raw` on the given quadrature with twice-iterated modified
/// Gram-Schmidt. The span (and the order of the leading subspaces) is preserved.
pub fn orthonormalize(
    domain: PhysicalDomain,
    raw: Vec<RawFunction>,
    quadrature: Vec<Rule1d>,
) -> Result<Basis> {
    if raw.is_empty() {
        return Err(EvoError::InvalidArgument(
            "no functions to orthonormalize".into(),
        ));
    }
    if quadrature.len() != domain.dim() {
        return Err(EvoError::DimensionMismatch {
            expected: domain.dim(),
            got: quadrature.len(),
        });
    }
    if let Some(f) = raw.iter().find(|f| f.dim() != domain.dim()) {
        return Err(EvoError::InvalidArgument(format!(
            "function {} is not {}-dimensional",
            f.label,
            domain.dim()
        )));
    }
    let grid = Grid::tensor(&quadrature);
    let n = raw.len();
    let nq = grid.len();
    let mut values = vec![0.0; n * nq];
    for (i, f) in raw.iter().enumerate() {
        for (q, p) in grid.points().enumerate() {
            values[i * nq + q] = f.eval(p);
        }
    }
    let transform = modified_gram_schmidt(&values, n, grid.weights())?;
    let size = n;
    Basis::assemble(
        BasisKind::CustomOrthonormalized,
        size,
        domain,
        raw,
        transform,
        quadrature,
    )
}

/// Returns the lower-triangular `T` (row-major, `n x n`) such that the rows of
/// `T * values` are orthonormal in the weighted inner product.
pub fn modified_gram_schmidt(values: &[f64], n: usize, weights: &[f64]) -> Result<Vec<f64>> {
    let nq = weights.len();
    assert_eq!(values.len(), n * nq);
    let mut q = values.to_vec();
    let mut t = diagonal(&vec![1.0; n]);
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(weights)
            .map(|((x, y), w)| w * x * y)
            .sum()
    };
    for i in 0..n {
        for _pass in 0..2 {
            for j in 0..i {
                let r = dot(&q[i * nq..(i + 1) * nq], &q[j * nq..(j + 1) * nq]);
                let (head, tail) = q.split_at_mut(i * nq);
                let qj = &head[j * nq..(j + 1) * nq];
                for (a, b) in tail[..nq].iter_mut().zip(qj) {
                    *a -= r * b;
                }
                let (th, tt) = t.split_at_mut(i * n);
                let tj = &th[j * n..(j + 1) * n];
                for (a, b) in tt[..n].iter_mut().zip(tj) {
                    *a -= r * b;
                }
            }
        }
        let qi = &q[i * nq..(i + 1) * nq];
        let norm = dot(qi, qi).sqrt();
        if !(norm >= PIVOT_TOLERANCE) {
            return Err(EvoError::RankDeficient {
                index: i,
                pivot: norm,
            });
        }
        q[i * nq..(i + 1) * nq].iter_mut().for_each(|x| *x /= norm);
        t[i * n..(i + 1) * n].iter_mut().for_each(|x| *x /= norm);
    }
    Ok(t)
}

fn diagonal(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut t = vec![0.0; n * n];
    for (i, &v) in d.iter().enumerate() {
        t[i * n + i] = v;
    }
    t
}

fn integer_snap(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-12 {
        x.round()
    } else {
        x
    }
}

fn single_axis(domain: &PhysicalDomain, bc: BoundaryKind, what: &str) -> Result<Axis> {
    if domain.dim() != 1 || domain.axis(0).boundary != bc {
        return Err(EvoError::IncompatibleBasis(format!(
            "{what} basis needs a 1D {bc:?} domain"
        )));
    }
    Ok(*domain.axis(0))
}

/// Trapezoid node count for a periodic axis with the given maximum wavenumber.
pub fn periodic_nodes(max_wavenumber: usize) -> usize {
    (4 * max_wavenumber + 1).max(32)
}

/// Gauss-Legendre node count for a Dirichlet axis; resolves triple products of
/// the basis functions (the quadratic nonlinearity times a test function).
pub fn dirichlet_nodes(max_wavenumber: usize, length: f64) -> usize {
    let resolve = (6.0 * max_wavenumber as f64 * length / PI).ceil() as usize + 32;
    (4 * max_wavenumber + 1).max(resolve)
}

impl Basis {
    fn assemble(
        kind: BasisKind,
        size: usize,
        domain: PhysicalDomain,
        raw: Vec<RawFunction>,
        transform: Vec<f64>,
        quadrature: Vec<Rule1d>,
    ) -> Result<Self> {
        let n = raw.len();
        let grid = Arc::new(Grid::tensor(&quadrature));
        let nq = grid.len();
        let mut raw_vals = vec![0.0; n * nq];
        for (j, f) in raw.iter().enumerate() {
            for (q, p) in grid.points().enumerate() {
                raw_vals[j * nq + q] = f.eval(p);
            }
        }
        let mut values = vec![0.0; n * nq];
        for i in 0..n {
            for j in 0..n {
                let t = transform[i * n + j];
                if t != 0.0 {
                    for q in 0..nq {
                        values[i * nq + q] += t * raw_vals[j * nq + q];
                    }
                }
            }
        }
        let mut weighted = values.clone();
        for i in 0..n {
            for (q, w) in grid.weights().iter().enumerate() {
                weighted[i * nq + q] *= w;
            }
        }
        let labels = raw.iter().map(|f| f.label.clone()).collect();
        let id = basis_id(kind, &domain, &raw, quadrature.iter().map(|r| r.len()));
        let basis = Self {
            id,
            kind,
            size,
            domain,
            raw,
            transform,
            labels,
            quadrature,
            grid,
            values,
            weighted,
        };
        basis.check_boundary_conditions()?;
        let dev = basis.gram_deviation();
        if !(dev <= GRAM_TOLERANCE) {
            return Err(EvoError::IncompatibleBasis(format!(
                "Gram matrix deviates from identity by {dev:e}"
            )));
        }
        let kmax = basis.max_wavenumber();
        for r in &basis.quadrature {
            if (r.len() as f64) < 4.0 * kmax + 1.0 {
                return Err(EvoError::InvalidArgument(format!(
                    "quadrature with {} nodes is too coarse for wavenumber {kmax}",
                    r.len()
                )));
            }
        }
        Ok(basis)
    }

    fn with_kind(mut self, kind: BasisKind, size: usize) -> Self {
        self.kind = kind;
        self.size = size;
        self.id = basis_id(
            kind,
            &self.domain,
            &self.raw,
            self.quadrature.iter().map(|r| r.len()),
        );
        self
    }

    fn check_boundary_conditions(&self) -> Result<()> {
        let probes = [0.1234, 0.5, 0.8765];
        for (a, axis) in self.domain.axes().iter().enumerate() {
            for i in 0..self.n() {
                for &s in &probes {
                    let mut lo = vec![0.0; self.domain.dim()];
                    for (b, other) in self.domain.axes().iter().enumerate() {
                        lo[b] = other.lo + s * other.length();
                    }
                    let mut hi = lo.clone();
                    lo[a] = axis.lo;
                    hi[a] = axis.hi;
                    let scale = 1.0 + self.max_wavenumber();
                    let ok = match axis.boundary {
                        BoundaryKind::HomogeneousDirichlet => {
                            self.eval(i, &lo).abs() <= 1e-12 * scale
                                && self.eval(i, &hi).abs() <= 1e-12 * scale
                        }
                        BoundaryKind::Periodic => {
                            let mut d = [0u8; 2];
                            d[a] = 1;
                            (self.eval(i, &lo) - self.eval(i, &hi)).abs() <= 1e-10 * scale
                                && (self.eval_deriv(i, &lo, &d) - self.eval_deriv(i, &hi, &d)).abs()
                                    <= 1e-10 * scale * scale
                        }
                    };
                    if !ok {
                        return Err(EvoError::IncompatibleBasis(format!(
                            "function {} violates the {:?} condition on axis {a}",
                            self.labels[i], axis.boundary
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Constructor argument that reproduces this basis with [`make_basis`].
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n(&self) -> usize {
        self.raw.len()
    }

    pub fn domain(&self) -> &PhysicalDomain {
        &self.domain
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn raw_functions(&self) -> &[RawFunction] {
        &self.raw
    }

    /// Row-major `n x n` matrix mapping raw functions to basis functions.
    pub fn transform(&self) -> &[f64] {
        &self.transform
    }

    pub fn quadrature(&self) -> &[Rule1d] {
        &self.quadrature
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn max_wavenumber(&self) -> f64 {
        self.raw
            .iter()
            .map(|f| f.max_wavenumber())
            .fold(0.0, f64::max)
    }

    /// Basis function values on the quadrature grid, row `i` holds `phi_i`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, i: usize, point: &[f64]) -> f64 {
        self.eval_deriv(i, point, &[0, 0])
    }

    pub fn eval_deriv(&self, i: usize, point: &[f64], orders: &[u8]) -> f64 {
        let n = self.n();
        (0..n)
            .filter_map(|j| {
                let t = self.transform[i * n + j];
                (t != 0.0).then(|| t * self.raw[j].eval_deriv(point, orders))
            })
            .sum()
    }

    /// `n x len` matrix of basis values (or derivatives) on arbitrary points.
    pub fn values_at(&self, grid: &Grid, orders: &[u8]) -> Vec<f64> {
        let len = grid.len();
        let mut out = vec![0.0; self.n() * len];
        for (q, p) in grid.points().enumerate() {
            for i in 0..self.n() {
                out[i * len + q] = self.eval_deriv(i, p, orders);
            }
        }
        out
    }

    /// If every basis function is a scaled single trig product, returns
    /// `(scale, factors)` per function.
    pub fn single_term_modes(&self) -> Option<Vec<(f64, Vec<Factor>)>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let d = self.transform[i * n + i];
            let off = (0..n)
                .filter(|&j| j != i)
                .map(|j| self.transform[i * n + j].abs())
                .fold(0.0, f64::max);
            if off > 1e-12 * d.abs() || self.raw[i].terms.len() != 1 {
                return None;
            }
            let term = &self.raw[i].terms[0];
            out.push((d * term.coef, term.factors.clone()));
        }
        Some(out)
    }

    /// Factor converting a raw amplitude of function `i` to its modal coefficient.
    pub fn raw_amplitude_scale(&self, i: usize) -> f64 {
        1.0 / self.transform[i * self.n() + i]
    }

    pub fn gram(&self) -> Vec<f64> {
        let n = self.n();
        let nq = self.grid.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = (0..nq)
                    .map(|q| self.weighted[i * nq + q] * self.values[j * nq + q])
                    .sum();
            }
        }
        g
    }

    pub fn gram_deviation(&self) -> f64 {
        let n = self.n();
        self.gram()
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let target = if k / n == k % n { 1.0 } else { 0.0 };
                (g - target).abs()
            })
            .fold(0.0, f64::max)
    }

    fn check_vector(&self, v: &ModalVector) -> Result<()> {
        if v.len() != self.n() {
            return Err(EvoError::DimensionMismatch {
                expected: self.n(),
                got: v.len(),
            });
        }
        if v.basis_id() != self.id {
            return Err(EvoError::IncompatibleBasis(
                "coefficient vector belongs to a different basis".into(),
            ));
        }
        Ok(())
    }

    /// `u_n = sum_j v_j phi_j` on the quadrature grid.
    pub fn lift_values(&self, coeffs: &[f64]) -> Vec<f64> {
        let nq = self.grid.len();
        let mut out = vec![0.0; nq];
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, p) in out.iter_mut().zip(&self.values[i * nq..(i + 1) * nq]) {
                    *o += c * p;
                }
            }
        }
        out
    }

    /// Evaluates `sum_j v_j phi_j` on `grid`.
    pub fn lift(&self, v: &ModalVector, grid: &Arc<Grid>) -> Result<FieldSample> {
        self.check_vector(v)?;
        if grid.dim() != self.domain.dim() {
            return Err(EvoError::DimensionMismatch {
                expected: self.domain.dim(),
                got: grid.dim(),
            });
        }
        if let Some(p) = grid.points().find(|p| !self.domain.contains(p)) {
            return Err(EvoError::InvalidArgument(format!(
                "grid node {p:?} lies outside the domain"
            )));
        }
        let values = if Arc::ptr_eq(grid, &self.grid) || grid.same_nodes(&self.grid, 0.0) {
            self.lift_values(v.coeffs())
        } else {
            grid.points()
                .map(|p| {
                    v.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * self.eval(i, p))
                        .sum()
                })
                .collect()
        };
        Ok(FieldSample {
            grid: grid.clone(),
            values,
        })
    }

    pub fn lift_quadrature(&self, v: &ModalVector) -> Result<FieldSample> {
        self.lift(v, &self.grid.clone())
    }

    /// `v_j = <u, phi_j>` by quadrature for values on the quadrature grid.
    pub fn project_values(&self, values: &[f64]) -> Vec<f64> {
        let nq = self.grid.len();
        debug_assert_eq!(values.len(), nq);
        (0..self.n())
            .map(|i| {
                self.weighted[i * nq..(i + 1) * nq]
                    .iter()
                    .zip(values)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn check_field(&self, field: &FieldSample) -> Result<()> {
        if Arc::ptr_eq(&field.grid, &self.grid) || field.grid.same_nodes(&self.grid, 1e-12) {
            Ok(())
        } else {
            Err(EvoError::GridMismatch(format!(
                "field has {} nodes, quadrature has {}",
                field.grid.len(),
                self.grid.len()
            )))
        }
    }

    pub fn project(&self, field: &FieldSample) -> Result<ModalVector> {
        self.check_field(field)?;
        Ok(ModalVector {
            coeffs: self.project_values(&field.values),
            basis: self.id,
        })
    }

    /// `||u - P_n u||` in the quadrature norm.
    pub fn projection_error(&self, field: &FieldSample) -> Result<f64> {
        let v = self.project(field)?;
        let un = self.lift_values(v.coeffs());
        Ok(self.norm_of(
            &field
                .values
                .iter()
                .zip(&un)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        ))
    }

    /// Quadrature L2 norm of values on the quadrature grid.
    pub fn norm_of(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(self.grid.weights())
            .map(|(u, w)| w * u * u)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_document(&self) -> BasisDocument {
        BasisDocument {
            kind: self.kind,
            domain: self.domain.clone(),
            n: self.n(),
            size: self.size,
            labels: self.labels.clone(),
            quadrature: self.quadrature.clone(),
            functions: self.raw.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: BasisDocument = serde_json::from_str(s)?;
        doc.into_basis()
    }
}

/// JSON form of a basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisDocument {
    pub kind: BasisKind,
    pub domain: PhysicalDomain,
    pub n: usize,
    pub size: usize,
    pub labels: Vec<String>,
    pub quadrature: Vec<Rule1d>,
    pub functions: Vec<RawFunction>,
}

impl BasisDocument {
    pub fn into_basis(self) -> Result<Basis> {
        let basis = match self.kind {
            BasisKind::CustomOrthonormalized => {
                orthonormalize(self.domain, self.functions, self.quadrature.clone())?
            }
            kind => make_basis(self.domain, kind, self.size)?,
        };
        if basis.n() != self.n {
            return Err(EvoError::Format(format!(
                "basis document declares n = {}, rebuilt basis has {}",
                self.n,
                basis.n()
            )));
        }
        if basis.quadrature != self.quadrature {
            return Err(EvoError::Format(
                "quadrature in basis document differs".into(),
            ));
        }
        Ok(basis)
    }
}

fn basis_id(
    kind: BasisKind,
    domain: &PhysicalDomain,
    raw: &[RawFunction],
    quad_sizes: impl Iterator<Item = usize>,
) -> BasisId {
    // FNV-1a over a canonical description
    let mut desc = format!("{kind:?}");
    for a in domain.axes() {
        write!(
            desc,
            "|{:x},{:x},{:?}",
            a.lo.to_bits(),
            a.hi.to_bits(),
            a.boundary
        )
        .unwrap();
    }
    for f in raw {
        write!(desc, "|{}", f.label).unwrap();
        for t in &f.terms {
            write!(desc, ":{:x}", t.coef.to_bits()).unwrap();
        }
    }
    for q in quad_sizes {
        write!(desc, "|q{q}").unwrap();
    }
    let mut h: u64 = 0xcbf29ce484222325;
    for b in desc.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    BasisId(h)
}
