//! Training pairs `(v_j(0), v_j(Delta))` in modal space.
//!
//! Two routes: sampling a box in coefficient space and evolving every sample
//! with the reference operator, or pairing projected snapshots that are one
//! lag apart.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, FieldSample, ModalVector};
use crate::error::{EvoError, Result};
use crate::rng::{stream, Purpose};
use crate::solvers::{ModalEvolver, PdeSpec, SolverConfig};

const MAGIC: &[u8; 4] = b"MEVD";
const VERSION: u32 = 1;

/// Axis-aligned box in coefficient space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ModalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(EvoError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(EvoError::InvalidArgument(
                "modal box has no coordinates".into(),
            ));
        }
        if let Some(i) =
            (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || !lo[i].is_finite() || !hi[i].is_finite())
        {
            return Err(EvoError::InvalidArgument(format!(
                "modal box coordinate {i}: [{}, {}] is not a finite interval",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        Self::new(
            half_widths.iter().map(|w| -w).collect(),
            half_widths.to_vec(),
        )
    }

    /// Box given in amplitudes of the raw functions (`sin(jx)`, `cos(kx)`, ...).
    pub fn from_raw(basis: &Basis, half_widths: &[f64]) -> Result<Self> {
        if half_widths.len() != basis.n() {
            return Err(EvoError::DimensionMismatch {
                expected: basis.n(),
                got: half_widths.len(),
            });
        }
        let scaled: Vec<f64> = half_widths
            .iter()
            .enumerate()
            .map(|(i, w)| w * basis.raw_amplitude_scale(i).abs())
            .collect();
        Self::symmetric(&scaled)
    }

    /// Raw-amplitude bound per wavenumber; the bound for `k` covers the
    /// constant mode (`k = 0`) and both `cos(kx)` and `sin(kx)`.
    pub fn by_wavenumber(basis: &Basis, bounds: &[f64]) -> Result<Self> {
        let half: Vec<f64> = basis
            .raw_functions()
            .iter()
            .map(|f| {
                let k = f.max_wavenumber().round() as usize;
                bounds.get(k).copied().ok_or_else(|| {
                    EvoError::Config(format!(
                        "no sampling bound for wavenumber {k} ({} given)",
                        bounds.len()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Self::from_raw(basis, &half)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(&self.lo)
                .zip(&self.hi)
                .all(|((x, l), h)| l <= x && x <= h)
    }

    /// Uniform draw number `index` of the stream keyed by `seed`.
    pub fn draw(&self, seed: u64, purpose: Purpose, index: u64) -> Vec<f64> {
        let mut rng = stream(seed, purpose, index);
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| {
                let u: f64 = rng.random();
                (l + (h - l) * u).min(h)
            })
            .collect()
    }
}

/// How a sampling box is written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxSpec {
    /// Raw-amplitude half-width per wavenumber `k = 0, 1, ...`.
    ByWavenumber(Vec<f64>),
    /// Raw-amplitude half-width per basis function.
    Raw(Vec<f64>),
    /// Half-width per normalized coefficient.
    Coefficient(Vec<f64>),
}

impl BoxSpec {
    pub fn resolve(&self, basis: &Basis) -> Result<ModalBox> {
        match self {
            BoxSpec::ByWavenumber(b) => ModalBox::by_wavenumber(basis, b),
            BoxSpec::Raw(b) => ModalBox::from_raw(basis, b),
            BoxSpec::Coefficient(b) => {
                if b.len() != basis.n() {
                    return Err(EvoError::DimensionMismatch {
                        expected: basis.n(),
                        got: b.len(),
                    });
                }
                ModalBox::symmetric(b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ModalSampled,
    SnapshotPaired,
}

impl Provenance {
    fn code(self) -> u32 {
        match self {
            Provenance::ModalSampled => 1,
            Provenance::SnapshotPaired => 2,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            1 => Ok(Provenance::ModalSampled),
            2 => Ok(Provenance::SnapshotPaired),
            _ => Err(EvoError::Format(format!("unknown provenance code {c}"))),
        }
    }
}

/// `J` pairs of `n`-vectors sharing one time lag; row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    n: usize,
    delta: f64,
    eta: f64,
    provenance: Provenance,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl PairDataset {
    pub fn new(
        n: usize,
        delta: f64,
        provenance: Provenance,
        inputs: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let ds = Self {
            n,
            delta,
            eta: 0.0,
            provenance,
            inputs,
            targets,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.inputs.is_empty() || self.inputs.len() % self.n != 0 {
            return Err(EvoError::InvalidArgument(format!(
                "dataset needs at least one row of {} coefficients, got {} values",
                self.n,
                self.inputs.len()
            )));
        }
        if self.inputs.len() != self.targets.len() {
            return Err(EvoError::DimensionMismatch {
                expected: self.inputs.len(),
                got: self.targets.len(),
            });
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(EvoError::InvalidArgument(format!(
                "time lag must be > 0, got {}",
                self.delta
            )));
        }
        if !(self.eta >= 0.0) {
            return Err(EvoError::InvalidArgument(format!(
                "noise level must be >= 0, got {}",
                self.eta
            )));
        }
        if let Some(i) = self
            .inputs
            .iter()
            .chain(&self.targets)
            .position(|x| !x.is_finite())
        {
            return Err(EvoError::InvalidArgument(format!(
                "non-finite dataset entry at flat index {i}"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.n..(j + 1) * self.n]
    }

    pub fn target(&self, j: usize) -> &[f64] {
        &self.targets[j * self.n..(j + 1) * self.n]
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(idx.len() * self.n);
        let mut targets = Vec::with_capacity(idx.len() * self.n);
        for &j in idx {
            inputs.extend_from_slice(self.input(j));
            targets.extend_from_slice(self.target(j));
        }
        let mut ds = Self::new(self.n, self.delta, self.provenance, inputs, targets)?;
        ds.eta = self.eta;
        Ok(ds)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.delta.to_le_bytes())?;
        w.write_all(&self.eta.to_le_bytes())?;
        w.write_all(&self.provenance.code().to_le_bytes())?;
        for x in self.inputs.iter().chain(&self.targets) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EvoError::Format("not a pair dataset (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(EvoError::Format(format!(
                "unsupported dataset version {version}"
            )));
        }
        let n = read_u32(r)? as usize;
        let j = read_u64(r)? as usize;
        let delta = read_f64(r)?;
        let eta = read_f64(r)?;
        let provenance = Provenance::from_code(read_u32(r)?)?;
        let count = n
            .checked_mul(j)
            .ok_or_else(|| EvoError::Format("dataset header sizes overflow".into()))?;
        let mut values = vec![0.0; 2 * count];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let targets = values.split_off(count);
        let ds = Self {
            n,
            delta,
            eta,
            provenance,
            inputs: values,
            targets,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }

    /// Debug export with columns `v0_1..v0_n, vd_1..vd_n`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.n)
            .map(|i| format!("v0_{i}"))
            .chain((1..=self.n).map(|i| format!("vd_{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for j in 0..self.len() {
            let row: Vec<String> = self
                .input(j)
                .iter()
                .chain(self.target(j))
                .map(|x| format!("{x:e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// `count` i.i.d. uniform draws; draw `j` depends only on `(seed, j)`.
pub fn sample_modal_box(
    basis: &Basis,
    modal_box: &ModalBox,
    count: usize,
    seed: u64,
) -> Result<Vec<ModalVector>> {
    if count == 0 {
        return Err(EvoError::InvalidArgument("need at least one sample".into()));
    }
    if modal_box.dim() != basis.n() {
        return Err(EvoError::DimensionMismatch {
            expected: basis.n(),
            got: modal_box.dim(),
        });
    }
    (0..count)
        .into_par_iter()
        .map(|j| ModalVector::new(basis, modal_box.draw(seed, Purpose::ModalSample, j as u64)))
        .collect()
}

/// Pairs `(v, Pi^{-1} P_n E_Delta Pi v)` for every sample.
pub fn generate_pairs(
    basis: &Basis,
    samples: &[ModalVector],
    delta: f64,
    pde: &PdeSpec,
    config: &SolverConfig,
) -> Result<PairDataset> {
    if samples.is_empty() {
        return Err(EvoError::InvalidArgument("need at least one sample".into()));
    }
    if !(delta > 0.0) {
        return Err(EvoError::InvalidArgument(format!(
            "time lag must be > 0, got {delta}"
        )));
    }
    let evolver = ModalEvolver::new(basis, pde, delta, config)?;
    let targets: Vec<Vec<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(j, v)| {
            evolver
                .apply(v)
                .map(ModalVector::into_coeffs)
                .map_err(|e| EvoError::Sample {
                    index: j,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let inputs = samples
        .iter()
        .flat_map(|v| v.coeffs().iter().copied())
        .collect();
    PairDataset::new(
        basis.n(),
        delta,
        Provenance::ModalSampled,
        inputs,
        targets.concat(),
    )
}

/// Snapshots of one trajectory on the basis quadrature grid.
#[derive(Debug, Clone)]
pub struct SnapshotTrajectory {
    pub initial_condition: String,
    pub snapshots: Vec<(f64, FieldSample)>,
}

#[derive(Debug, Clone, Default)]
pub struct SnapshotSet {
    pub trajectories: Vec<SnapshotTrajectory>,
}

impl SnapshotSet {
    pub fn validate(&self) -> Result<()> {
        for tr in &self.trajectories {
            if let Some(w) = tr.snapshots.windows(2).find(|w| !(w[1].0 > w[0].0)) {
                return Err(EvoError::InvalidArgument(format!(
                    "snapshot times of trajectory '{}' are not increasing: {} then {}",
                    tr.initial_condition, w[0].0, w[1].0
                )));
            }
        }
        Ok(())
    }

    pub fn total_snapshots(&self) -> usize {
        self.trajectories.iter().map(|t| t.snapshots.len()).sum()
    }
}

/// Default pairing tolerance for a lag.
pub fn default_time_tolerance(delta: f64) -> f64 {
    1e-9 * delta
}

/// All within-trajectory pairs whose time gap equals `delta` up to `tol`.
pub fn pair_snapshots(
    basis: &Basis,
    snapshots: &SnapshotSet,
    delta: f64,
    tol: Option<f64>,
) -> Result<PairDataset> {
    snapshots.validate()?;
    let tol = tol.unwrap_or_else(|| default_time_tolerance(delta));
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut gaps = Vec::new();
    for tr in &snapshots.trajectories {
        let s = &tr.snapshots;
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                let gap = s[b].0 - s[a].0;
                if (gap - delta).abs() <= tol {
                    inputs.extend(basis.project(&s[a].1)?.into_coeffs());
                    targets.extend(basis.project(&s[b].1)?.into_coeffs());
                } else {
                    gaps.push(gap);
                }
            }
        }
    }
    if inputs.is_empty() {
        gaps.sort_by(|x, y| (x - delta).abs().total_cmp(&(y - delta).abs()));
        gaps.truncate(5);
        return Err(EvoError::NoPairs { nearest: gaps });
    }
    PairDataset::new(
        basis.n(),
        delta,
        Provenance::SnapshotPaired,
        inputs,
        targets,
    )
}

/// Multiplies every entry by an independent `1 + eps`, `eps ~ U[-eta, eta]`.
pub fn add_noise(ds: &PairDataset, eta: f64, seed: u64) -> Result<PairDataset> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(EvoError::InvalidArgument(format!(
            "noise level must be >= 0, got {eta}"
        )));
    }
    let mut out = ds.clone();
    out.eta = eta;
    if eta == 0.0 {
        return Ok(out);
    }
    let n = ds.n;
    out.inputs
        .par_chunks_mut(n)
        .zip(out.targets.par_chunks_mut(n))
        .enumerate()
        .for_each(|(j, (x, y))| {
            let mut rng = stream(seed, Purpose::Noise, j as u64);
            for v in x.iter_mut().chain(y.iter_mut()) {
                *v *= 1.0 + rng.random_range(-eta..=eta);
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_basis, BasisKind, BoundaryKind, PhysicalDomain};
    use crate::solvers::{advect_exact, FineLayout};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn trig() -> Basis {
        let d = PhysicalDomain::interval(0.0, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        make_basis(d, BasisKind::RealTrig, 3).unwrap()
    }

    fn sine() -> Basis {
        let d = PhysicalDomain::interval(0.0, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        make_basis(d, BasisKind::Sine, 5).unwrap()
    }

    #[test]
    fn degenerate_box_repeats_point() {
        let b = sine();
        let p = vec![0.1, -0.2, 0.0, 0.3, 0.05];
        let bx = ModalBox::new(p.clone(), p.clone()).unwrap();
        for v in sample_modal_box(&b, &bx, 4, 9).unwrap() {
            assert_eq!(v.coeffs(), &p[..]);
        }
    }

    #[test]
    fn invalid_box() {
        assert!(ModalBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(ModalBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = sine();
        let bx = ModalBox::symmetric(&[1.0; 3]).unwrap();
        assert!(sample_modal_box(&b, &bx, 3, 0).is_err());
    }

    #[test]
    fn wavenumber_box_uses_raw_amplitudes() {
        let b = trig();
        let bx = ModalBox::by_wavenumber(&b, &[0.8, 0.8, 0.2, 0.03]).unwrap();
        // raw amplitude a of cos(kx) is coefficient a sqrt(pi)
        assert!((bx.hi()[1] - 0.8 * PI.sqrt()).abs() < 1e-12);
        assert!((bx.hi()[0] - 0.8 * (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((bx.hi()[6] - 0.03 * PI.sqrt()).abs() < 1e-12);
        assert!(ModalBox::by_wavenumber(&b, &[0.8, 0.8]).is_err());
    }

    #[test]
    fn samples_stay_in_box_and_are_deterministic() {
        let b = sine();
        let bx = ModalBox::from_raw(&b, &[1.0, 0.5, 0.2, 0.05, 0.01]).unwrap();
        let a = sample_modal_box(&b, &bx, 500, 3).unwrap();
        let c = sample_modal_box(&b, &bx, 500, 3).unwrap();
        assert_eq!(a, c);
        assert!(a.iter().all(|v| bx.contains(v.coeffs())));
        let d = sample_modal_box(&b, &bx, 500, 4).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn exact_pairs() {
        let b = trig();
        let bx = ModalBox::by_wavenumber(&b, &[0.8, 0.8, 0.2, 0.03]).unwrap();
        let s = sample_modal_box(&b, &bx, 20, 1).unwrap();
        let ds = generate_pairs(
            &b,
            &s,
            0.1,
            &PdeSpec::advection(1.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(ds.len(), 20);
        for (j, v) in s.iter().enumerate() {
            assert_eq!(
                ds.target(j),
                advect_exact(&b, v, 0.1, 1.0).unwrap().coeffs()
            );
        }

        let b = sine();
        let e1 = vec![ModalVector::unit(&b, 0)];
        let ds = generate_pairs(
            &b,
            &e1,
            0.1,
            &PdeSpec::diffusion(0.5),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((ds.target(0)[0] - (-0.05f64).exp()).abs() < 1e-15);
    }

    fn snapshot_set(b: &Basis, times: &[f64]) -> SnapshotSet {
        let v0 = ModalVector::new(b, vec![0.6, 0.1, 0.5, -0.1, 0.05, 0.0, -0.02]).unwrap();
        let snapshots = times
            .iter()
            .map(|&t| {
                let v = advect_exact(b, &v0, t, 1.0).unwrap();
                (t, b.lift_quadrature(&v).unwrap())
            })
            .collect();
        SnapshotSet {
            trajectories: vec![SnapshotTrajectory {
                initial_condition: "test".into(),
                snapshots,
            }],
        }
    }

    #[test]
    fn pairing_counts() {
        let b = trig();
        assert_eq!(
            pair_snapshots(&b, &snapshot_set(&b, &[0.0, 0.1, 0.2]), 0.1, None)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            pair_snapshots(&b, &snapshot_set(&b, &[0.0, 0.07, 0.1]), 0.1, None)
                .unwrap()
                .len(),
            1
        );
        match pair_snapshots(&b, &snapshot_set(&b, &[0.0, 0.07]), 0.1, None) {
            Err(EvoError::NoPairs { nearest }) => assert_eq!(nearest, vec![0.07]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn routes_agree_inside_modal_space() {
        let b = trig();
        let set = snapshot_set(&b, &[0.0, 0.1]);
        let paired = pair_snapshots(&b, &set, 0.1, None).unwrap();
        let v0 = ModalVector::new(&b, paired.input(0).to_vec()).unwrap();
        let sampled = generate_pairs(
            &b,
            &[v0],
            0.1,
            &PdeSpec::advection(1.0),
            &SolverConfig::default(),
        )
        .unwrap();
        for (a, c) in paired.target(0).iter().zip(sampled.target(0)) {
            assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_is_multiplicative_and_bounded() {
        let b = sine();
        let bx = ModalBox::from_raw(&b, &[1.0, 0.5, 0.2, 0.0, 0.01]).unwrap();
        let s = sample_modal_box(&b, &bx, 50, 2).unwrap();
        let ds = generate_pairs(
            &b,
            &s,
            0.1,
            &PdeSpec::diffusion(0.5),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(add_noise(&ds, 0.0, 5).unwrap(), ds);
        let noisy = add_noise(&ds, 0.02, 5).unwrap();
        assert_eq!(noisy.eta(), 0.02);
        for (c, x) in ds
            .inputs()
            .iter()
            .chain(ds.targets())
            .zip(noisy.inputs().iter().chain(noisy.targets()))
        {
            assert!((x - c).abs() <= 0.02 * c.abs() + 1e-300);
        }
        // coordinate 3 was sampled from a zero-width box
        assert!((0..noisy.len()).all(|j| noisy.input(j)[3] == 0.0));
        assert!(add_noise(&ds, -0.1, 5).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let b = sine();
        let bx = ModalBox::from_raw(&b, &[1.0, 0.5, 0.2, 0.05, 0.01]).unwrap();
        let s = sample_modal_box(&b, &bx, 7, 2).unwrap();
        let ds = add_noise(
            &generate_pairs(
                &b,
                &s,
                0.1,
                &PdeSpec::diffusion(0.5),
                &SolverConfig::default(),
            )
            .unwrap(),
            0.05,
            1,
        )
        .unwrap();
        let mut bytes = Vec::new();
        ds.write(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 40 + 2 * 7 * 5 * 8);
        assert_eq!(PairDataset::read(&mut bytes.as_slice()).unwrap(), ds);
        bytes[0] = b'X';
        assert!(PairDataset::read(&mut bytes.as_slice()).is_err());
        let mut csv = Vec::new();
        ds.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("v0_1,v0_2,v0_3,v0_4,v0_5,vd_1,"));
        assert_eq!(text.lines().count(), 8);
    }

    #[test]
    fn burgers_pairs_on_fine_grid() {
        let d = PhysicalDomain::interval(-PI, PI, BoundaryKind::HomogeneousDirichlet).unwrap();
        let b = make_basis(d.clone(), BasisKind::Sine, 5).unwrap();
        let v = ModalVector::new(&b, vec![-PI.sqrt(), 0.0, 0.0, 0.0, 0.0]).unwrap();
        let cfg = SolverConfig::with_grid(256);
        let ds = generate_pairs(&b, &[v.clone()], 0.05, &PdeSpec::burgers(0.1), &cfg).unwrap();
        let fine = crate::solvers::FineGrid::new(&b, FineLayout::Dirichlet1d, 256).unwrap();
        let u0 = FieldSample::new(Arc::clone(fine.grid()), fine.lift(v.coeffs())).unwrap();
        let u1 = crate::solvers::burgers_evolve(&u0, 0.05, 0.1, &cfg, &d).unwrap();
        assert_eq!(fine.project(&u1.values), ds.target(0));
    }
}
