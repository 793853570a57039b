//! Frequency partitions and assembly of the finite QCQP.
//!
//! Index layout of the basis: `φ_i = φ_{u,t_i}` for `i < n_D`, then
//! `φ^r_{ω_j}` at `n_D + 2j` and `φ^i_{ω_j}` at `n_D + 2j + 1`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{gram_matrix, BasisDescriptor};
use crate::kernels::{self, Axis, KernelSpec};
use crate::signals::Dataset;

/// Largest basis size `assemble` accepts.
pub const DEFAULT_MAX_DIM: usize = 12_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPartition {
    omegas: Vec<f64>,
    mesh: f64,
}

impl FrequencyPartition {
    /// Sorted distinct frequencies starting at exactly 0.
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.first() != Some(&0.0) {
            return Err(Error::Domain("partition must start at 0".into()));
        }
        let mut mesh = 0.0f64;
        for w in omegas.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Domain(format!("partition not strictly increasing at {}", w[1])));
            }
            mesh = mesh.max(w[1] - w[0]);
        }
        Ok(FrequencyPartition { omegas, mesh })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
    pub fn mesh(&self) -> f64 {
        self.mesh
    }
    /// Number of intervals (`len - 1`).
    pub fn n_p(&self) -> usize {
        self.omegas.len() - 1
    }
    pub fn omega_max(&self) -> f64 {
        *self.omegas.last().unwrap()
    }

    /// Partition with `factor` times as many intervals on the same range.
    pub fn refined(&self, factor: usize) -> FrequencyPartition {
        let factor = factor.max(1);
        let mut out = Vec::with_capacity(self.n_p() * factor + 1);
        out.push(0.0);
        for w in self.omegas.windows(2) {
            for k in 1..factor {
                out.push(w[0] + (w[1] - w[0]) * k as f64 / factor as f64);
            }
            out.push(w[1]);
        }
        FrequencyPartition::new(out).expect("refinement keeps order")
    }
}

/// Smallest `ω_max` with `2γ/(ω² + β²) <= λ/Σy²` beyond it.
pub fn omega_max_ct(spec: &KernelSpec, y: &[f64], lambda: f64) -> Result<f64> {
    if spec.axis() != Axis::Continuous {
        return Err(Error::Domain("omega_max_ct needs a continuous kernel".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if y.is_empty() {
        return Err(Error::Domain("empty output vector".into()));
    }
    let sy: f64 = y.iter().map(|v| v * v).sum();
    if sy == 0.0 {
        return Ok(0.0);
    }
    let b = spec.beta();
    Ok((2.0 * spec.gamma() * sy / lambda - b * b).max(0.0).sqrt())
}

/// Upper end of the constraint range: π in discrete time, [`omega_max_ct`] otherwise.
pub fn omega_max(spec: &KernelSpec, y: &[f64], lambda: f64) -> Result<f64> {
    match spec.axis() {
        Axis::Discrete => Ok(std::f64::consts::PI),
        Axis::Continuous => omega_max_ct(spec, y, lambda),
    }
}

/// Largest mesh for which sampled constraints certify the bound everywhere:
/// `2ελ / (4 μ0 μ1 Σy²)` with exact moments.
pub fn mesh_bound(spec: &KernelSpec, y: &[f64], lambda: f64, eps: f64) -> Result<f64> {
    mesh_bound_with(spec, y, lambda, eps, false)
}

/// As [`mesh_bound`]; `conservative` swaps the exact moments for their upper bounds.
pub fn mesh_bound_with(spec: &KernelSpec, y: &[f64], lambda: f64, eps: f64, conservative: bool) -> Result<f64> {
    if !(lambda > 0.0 && eps > 0.0) {
        return Err(Error::Domain(format!("need lambda, eps > 0, got {lambda}, {eps}")));
    }
    let (mu0, mu1) = if conservative {
        (kernels::mu_bound(spec, 0)?, kernels::mu_bound(spec, 1)?)
    } else {
        let m = kernels::moments(spec);
        (m.mu0, m.mu1)
    };
    if mu0 == 0.0 || mu1 == 0.0 {
        return Err(Error::InvalidKernel("degenerate kernel: zero moment".into()));
    }
    let sy: f64 = y.iter().map(|v| v * v).sum();
    Ok(2.0 * eps * lambda / (4.0 * mu0 * mu1 * sy))
}

/// Uniform partition of `[0, ω_max]` with `ceil(ω_max / mesh_target)` intervals.
pub fn build_partition(omega_max: f64, mesh_target: f64) -> Result<FrequencyPartition> {
    if !(omega_max >= 0.0 && omega_max.is_finite()) {
        return Err(Error::Domain(format!("omega_max must be >= 0, got {omega_max}")));
    }
    if !(mesh_target > 0.0) {
        return Err(Error::Domain(format!("mesh target must be positive, got {mesh_target}")));
    }
    if omega_max == 0.0 {
        return FrequencyPartition::new(vec![0.0]);
    }
    let n = (omega_max / mesh_target).ceil();
    if n > 1e8 {
        return Err(Error::Resource(format!("partition with {n} intervals is too large")));
    }
    uniform_partition(omega_max, n as usize)
}

/// `ω_i = (ω_max / n_p) i` for `i = 0..=n_p`.
pub fn uniform_partition(omega_max: f64, n_p: usize) -> Result<FrequencyPartition> {
    if n_p == 0 || omega_max == 0.0 {
        return FrequencyPartition::new(vec![0.0]);
    }
    let h = omega_max / n_p as f64;
    let mut w: Vec<f64> = (0..=n_p).map(|i| h * i as f64).collect();
    w[n_p] = omega_max;
    FrequencyPartition::new(w)
}

#[derive(Debug, Clone)]
pub struct GramProblem {
    pub phi: DMatrix<f64>,
    pub n_d: usize,
    /// Constraint frequencies, in basis order.
    pub omegas: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub eps: f64,
    pub descriptors: Vec<BasisDescriptor>,
    /// Partition mesh against the certified bound; `None` when no partition was used.
    pub certified: Option<bool>,
}

impl GramProblem {
    pub fn m(&self) -> usize {
        self.phi.nrows()
    }
    pub fn n_constraints(&self) -> usize {
        self.omegas.len()
    }
    pub fn a_row(&self, i: usize) -> DVectorView<'_, f64> {
        self.phi.column(i)
    }
    pub fn b_vec(&self, j: usize) -> DVectorView<'_, f64> {
        self.phi.column(self.n_d + 2 * j)
    }
    pub fn c_vec(&self, j: usize) -> DVectorView<'_, f64> {
        self.phi.column(self.n_d + 2 * j + 1)
    }

    /// Writes Φ as a 16-byte header (`b"FQIDPHI1"`, `m` as u64 LE) plus row-major f64 LE.
    pub fn write_phi_binary(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io { path: path.display().to_string(), source };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let m = self.m();
        f.write_all(b"FQIDPHI1").map_err(io)?;
        f.write_all(&(m as u64).to_le_bytes()).map_err(io)?;
        for i in 0..m {
            for j in 0..m {
                f.write_all(&self.phi[(i, j)].to_le_bytes()).map_err(io)?;
            }
        }
        f.flush().map_err(io)
    }
}

/// Reads a matrix written by [`GramProblem::write_phi_binary`].
pub fn read_phi_binary(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    if bytes.len() < 16 || &bytes[..8] != b"FQIDPHI1" {
        return Err(Error::Data("not a Gram dump".into()));
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * m * m {
        return Err(Error::Data("truncated Gram dump".into()));
    }
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let k = 16 + 8 * (i * m + j);
            out[(i, j)] = f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
        }
    }
    Ok(out)
}

/// Basis descriptors for the given sample times and constraint frequencies.
pub fn layout(sample_times: &[f64], omegas: &[f64]) -> Vec<BasisDescriptor> {
    let mut out: Vec<BasisDescriptor> = sample_times.iter().map(|&t| BasisDescriptor::InputFunctional(t)).collect();
    for &w in omegas {
        out.push(BasisDescriptor::FreqReal(w));
        out.push(BasisDescriptor::FreqImag(w));
    }
    out
}

/// Full problem over the partition `p`.
pub fn assemble(d: &Dataset, spec: &KernelSpec, p: &FrequencyPartition, lambda: f64, eps: f64, tol: f64) -> Result<GramProblem> {
    let mut g = assemble_freqs(d, spec, p.omegas(), lambda, eps, tol)?;
    g.certified = Some(p.mesh() <= mesh_bound(spec, d.outputs(), lambda, eps)?);
    Ok(g)
}

/// Problem whose constraints sit at an arbitrary frequency list (possibly empty).
pub fn assemble_freqs(d: &Dataset, spec: &KernelSpec, omegas: &[f64], lambda: f64, eps: f64, tol: f64) -> Result<GramProblem> {
    check_params(lambda, eps)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if d.axis() != spec.axis() {
        return Err(Error::Domain("dataset and kernel axes differ".into()));
    }
    let m = d.n_d() + 2 * omegas.len();
    if m > DEFAULT_MAX_DIM {
        return Err(Error::Resource(format!("basis size {m} exceeds the cap of {DEFAULT_MAX_DIM}")));
    }
    let descriptors = layout(d.sample_times(), omegas);
    let phi = gram_matrix(d, spec, &descriptors)?;
    Ok(GramProblem {
        phi,
        n_d: d.n_d(),
        omegas: omegas.to_vec(),
        y: d.outputs().to_vec(),
        lambda,
        eps,
        descriptors,
        certified: None,
    })
}

pub(crate) fn check_params(lambda: f64, eps: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps must lie in (0,1), got {eps}")));
    }
    Ok(())
}
