//! Constraint activation, model evaluation and the problem reductions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{freq_input_block, freq_pair, input_gram_block, phi_omega, phi_u_value_any, BasisDescriptor};
use crate::kernels::{self, Axis, KernelSpec};
use crate::problem::{self, check_params, FrequencyPartition, GramProblem};
use crate::qcqp::{solve_qcqp, solve_ridge, SolveReport, SolverConfig};
use crate::quad;
use crate::sim::{self, RationalTF};
use crate::signals::{scale_outputs, Dataset, Input};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentifyReport {
    /// Outer iterations (solves).
    pub iterations: usize,
    /// Active-set size before each solve.
    pub active_sizes: Vec<usize>,
    pub newton_iterations: usize,
    pub barrier_stages: usize,
    pub objective: f64,
    pub mesh: f64,
    pub mesh_bound: f64,
    pub warnings: Vec<String>,
}

/// Identified impulse response `g = ρ·gain·Σ x_i φ_i` plus a direct term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct Model {
    pub spec: KernelSpec,
    pub input: Input,
    pub descriptors: Vec<BasisDescriptor>,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub eps: f64,
    /// Output normalization.
    pub rho: f64,
    /// Extra output gain from a back-map (1 unless a reduction was undone).
    pub gain: f64,
    /// Direct input-to-output term (`g_0` increment in discrete time, `D` in continuous time).
    pub feedthrough: f64,
    pub active: Vec<f64>,
    pub certified: bool,
    /// `xᵀΦx` of the normalized model.
    pub rkhs_norm_sq: f64,
    pub report: IdentifyReport,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    kernel: KernelSpec,
    input: Input,
    descriptors: Vec<BasisDescriptor>,
    coefficients: Vec<String>,
    lambda: f64,
    eps: f64,
    rho: f64,
    #[serde(default = "one")]
    gain: f64,
    #[serde(default)]
    feedthrough: f64,
    active_frequencies: Vec<f64>,
    certified: bool,
    rkhs_norm_sq: f64,
    #[serde(default)]
    report: IdentifyReport,
}

fn one() -> f64 {
    1.0
}

impl From<Model> for ModelRepr {
    fn from(m: Model) -> Self {
        ModelRepr {
            kernel: m.spec,
            input: m.input,
            descriptors: m.descriptors,
            coefficients: m.x.iter().map(|v| format!("{v:.16e}")).collect(),
            lambda: m.lambda,
            eps: m.eps,
            rho: m.rho,
            gain: m.gain,
            feedthrough: m.feedthrough,
            active_frequencies: m.active,
            certified: m.certified,
            rkhs_norm_sq: m.rkhs_norm_sq,
            report: m.report,
        }
    }
}

impl TryFrom<ModelRepr> for Model {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        let x = r
            .coefficients
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Data(format!("bad coefficient '{s}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if x.len() != r.descriptors.len() {
            return Err(Error::Data(format!("{} coefficients for {} basis elements", x.len(), r.descriptors.len())));
        }
        if r.kernel.axis() != r.input.axis() {
            return Err(Error::Data("input and kernel axes differ".into()));
        }
        Ok(Model {
            spec: r.kernel,
            input: r.input,
            descriptors: r.descriptors,
            x,
            lambda: r.lambda,
            eps: r.eps,
            rho: r.rho,
            gain: r.gain,
            feedthrough: r.feedthrough,
            active: r.active_frequencies,
            certified: r.certified,
            rkhs_norm_sq: r.rkhs_norm_sq,
            report: r.report,
        })
    }
}

impl Model {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid model JSON: {e}")))
    }

    fn scale(&self) -> f64 {
        self.rho * self.gain
    }

    fn taus(&self) -> (Vec<f64>, Vec<usize>) {
        let mut taus = Vec::new();
        let mut pos = Vec::new();
        for (k, d) in self.descriptors.iter().enumerate() {
            if let BasisDescriptor::InputFunctional(t) = d {
                taus.push(*t);
                pos.push(k);
            }
        }
        (taus, pos)
    }

    /// `G(e^{jω})` or `G(jω)` of the model, including scaling and direct term.
    pub fn frequency_response(&self, omega: f64) -> Result<C64> {
        Ok(self.frequency_response_grid(&[omega])?[0])
    }

    pub fn frequency_response_grid(&self, omegas: &[f64]) -> Result<Vec<C64>> {
        let raw = self.raw_response(omegas)?;
        let s = self.scale();
        Ok(raw.into_iter().map(|v| s * v + self.feedthrough).collect())
    }

    /// `F_ω` of the normalized model `Σ x_i φ_i`.
    fn raw_response(&self, omegas: &[f64]) -> Result<Vec<C64>> {
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("frequencies must be finite".into()));
        }
        let (taus, pos) = self.taus();
        let mut out = Vec::with_capacity(omegas.len());
        for chunk in omegas.chunks(2048) {
            self.raw_response_chunk(chunk, &taus, &pos, &mut out)?;
        }
        Ok(out)
    }

    fn raw_response_chunk(&self, omegas: &[f64], taus: &[f64], pos: &[usize], out: &mut Vec<C64>) -> Result<()> {
        let abs: Vec<f64> = omegas.iter().map(|w| w.abs()).collect();
        let (re, im) = freq_input_block(&self.input, &self.spec, &abs, taus)?;
        for (k, &w) in abs.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &p) in pos.iter().enumerate() {
                acc += self.x[p] * C64::new(re[(k, i)], im[(k, i)]);
            }
            for (p, d) in self.descriptors.iter().enumerate() {
                let (wa, part) = match *d {
                    BasisDescriptor::FreqReal(wa) => (wa, 0),
                    BasisDescriptor::FreqImag(wa) => (wa, 1),
                    BasisDescriptor::InputFunctional(_) => continue,
                };
                if self.x[p] == 0.0 {
                    continue;
                }
                let pair = freq_pair(&self.spec, w, wa);
                acc += self.x[p] * C64::new(pair[0][part], pair[1][part]);
            }
            out.push(if omegas[k] < 0.0 { acc.conj() } else { acc });
        }
        Ok(())
    }

    /// `g(t)`. The continuous direct term is not part of `g`.
    pub fn impulse_response(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        let mut acc = 0.0;
        for (d, &x) in self.descriptors.iter().zip(&self.x) {
            if x == 0.0 {
                continue;
            }
            acc += x * match *d {
                BasisDescriptor::InputFunctional(tau) => phi_u_value_any(&self.input, &self.spec, tau, t)?,
                BasisDescriptor::FreqReal(w) => phi_omega(&self.spec, w, t)?.re,
                BasisDescriptor::FreqImag(w) => phi_omega(&self.spec, w, t)?.im,
            };
        }
        let direct = if self.spec.axis() == Axis::Discrete && t == 0.0 { self.feedthrough } else { 0.0 };
        Ok(self.scale() * acc + direct)
    }

    pub fn impulse_response_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        grid.iter().map(|&t| self.impulse_response(t)).collect()
    }

    /// Model output `L_{u,t}(g)` for the model's own input at the given times.
    pub fn predict(&self, times: &[f64]) -> Result<Vec<f64>> {
        let (taus, pos) = self.taus();
        let uu = input_gram_block(&self.input, &self.spec, times, &taus)?;
        let mut out: Vec<f64> = (0..times.len())
            .map(|i| pos.iter().enumerate().map(|(k, &p)| self.x[p] * uu[(i, k)]).sum())
            .collect();
        let freqs: Vec<(usize, f64, usize)> = self
            .descriptors
            .iter()
            .enumerate()
            .filter_map(|(p, d)| match *d {
                BasisDescriptor::FreqReal(w) => Some((p, w, 0)),
                BasisDescriptor::FreqImag(w) => Some((p, w, 1)),
                _ => None,
            })
            .collect();
        if !freqs.is_empty() {
            let ws: Vec<f64> = freqs.iter().map(|f| f.1).collect();
            let (re, im) = freq_input_block(&self.input, &self.spec, &ws, times)?;
            for (k, &(p, _, part)) in freqs.iter().enumerate() {
                let src = if part == 0 { &re } else { &im };
                for (i, o) in out.iter_mut().enumerate() {
                    *o += self.x[p] * src[(k, i)];
                }
            }
        }
        let s = self.scale();
        Ok(times.iter().zip(out).map(|(&t, v)| s * v + self.feedthrough * self.input.at(t)).collect())
    }

    /// Model with all coefficients zero.
    pub fn is_zero(&self) -> bool {
        self.x.iter().all(|v| *v == 0.0) && self.feedthrough == 0.0
    }
}

/// Grid search of the frequency-response magnitude with the Lipschitz certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HinfCheck {
    /// `max |G(ω)|` over the grid.
    pub grid_sup: f64,
    pub argmax: f64,
    /// Lipschitz constant of `|G(ω)|²`; absent when the model has a direct term.
    pub lipschitz: Option<f64>,
    pub mesh: f64,
    /// `sqrt(max |G|² + L·mesh/2)`.
    pub bound: Option<f64>,
    /// Whether `| |G(ω')|² − |G(ω)|² | <= L |ω' − ω|` on every adjacent grid pair.
    pub lipschitz_holds: Option<bool>,
}

pub fn hinf_grid_sup(m: &Model, grid: &FrequencyPartition) -> Result<HinfCheck> {
    let resp = m.frequency_response_grid(grid.omegas())?;
    let mags: Vec<f64> = resp.iter().map(|v| v.norm_sqr()).collect();
    let (k, &best) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("partition has at least one point");
    let lipschitz = (m.feedthrough == 0.0).then(|| {
        let mom = kernels::moments(&m.spec);
        4.0 * mom.mu0 * mom.mu1 * m.rkhs_norm_sq * m.scale() * m.scale()
    });
    let om = grid.omegas();
    let holds = lipschitz.map(|l| {
        (1..om.len()).all(|i| (mags[i] - mags[i - 1]).abs() <= l * (om[i] - om[i - 1]) * (1.0 + 1e-9) + 1e-15)
    });
    Ok(HinfCheck {
        grid_sup: best.sqrt(),
        argmax: om[k],
        lipschitz,
        mesh: grid.mesh(),
        bound: lipschitz.map(|l| (best + l * grid.mesh() / 2.0).sqrt()),
        lipschitz_holds: holds,
    })
}

// --------------------------------------------------------------- Algorithm 1

struct Blocks {
    spec: KernelSpec,
    taus: Vec<f64>,
    omegas: Vec<f64>,
    uu: DMatrix<f64>,
    fu_re: DMatrix<f64>,
    fu_im: DMatrix<f64>,
}

impl Blocks {
    fn new(d: &Dataset, spec: &KernelSpec, omegas: &[f64]) -> Result<Self> {
        let taus = d.sample_times().to_vec();
        let uu = input_gram_block(d.input(), spec, &taus, &taus)?;
        let (fu_re, fu_im) = freq_input_block(d.input(), spec, omegas, &taus)?;
        Ok(Blocks { spec: *spec, taus, omegas: omegas.to_vec(), uu, fu_re, fu_im })
    }

    fn gram(&self, active: &[usize]) -> DMatrix<f64> {
        let nd = self.taus.len();
        let m = nd + 2 * active.len();
        let mut phi = DMatrix::zeros(m, m);
        phi.view_mut((0, 0), (nd, nd)).copy_from(&self.uu);
        for (a, &p) in active.iter().enumerate() {
            for i in 0..nd {
                let (r, c) = (self.fu_re[(p, i)], self.fu_im[(p, i)]);
                phi[(nd + 2 * a, i)] = r;
                phi[(i, nd + 2 * a)] = r;
                phi[(nd + 2 * a + 1, i)] = c;
                phi[(i, nd + 2 * a + 1)] = c;
            }
        }
        for (a, &p) in active.iter().enumerate() {
            for (b, &q) in active.iter().enumerate().skip(a) {
                let pair = freq_pair(&self.spec, self.omegas[p], self.omegas[q]);
                for s in 0..2 {
                    for t in 0..2 {
                        phi[(nd + 2 * a + s, nd + 2 * b + t)] = pair[s][t];
                        phi[(nd + 2 * b + t, nd + 2 * a + s)] = pair[s][t];
                    }
                }
            }
        }
        phi
    }

    /// `|F_ω(g)|²` at partition index `p` for coefficients over the active basis.
    fn magnitude_sq(&self, p: usize, active: &[usize], x: &[f64]) -> f64 {
        let nd = self.taus.len();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..nd {
            acc += x[i] * C64::new(self.fu_re[(p, i)], self.fu_im[(p, i)]);
        }
        for (a, &q) in active.iter().enumerate() {
            let pair = freq_pair(&self.spec, self.omegas[p], self.omegas[q]);
            acc += x[nd + 2 * a] * C64::new(pair[0][0], pair[1][0]);
            acc += x[nd + 2 * a + 1] * C64::new(pair[0][1], pair[1][1]);
        }
        acc.norm_sqr()
    }
}

fn check_inputs(d: &Dataset, spec: &KernelSpec, lambda: f64, eps: f64, cfg: &SolverConfig) -> Result<()> {
    check_params(lambda, eps)?;
    cfg.validate()?;
    if d.axis() != spec.axis() {
        return Err(Error::Domain("dataset and kernel axes differ".into()));
    }
    Ok(())
}

fn certification(d: &Dataset, spec: &KernelSpec, p: &FrequencyPartition, lambda: f64, eps: f64) -> Result<(f64, bool, Vec<String>)> {
    let bound = problem::mesh_bound(spec, d.outputs(), lambda, eps)?;
    let mut warnings = Vec::new();
    let mut ok = p.mesh() <= bound;
    if !ok {
        warnings.push(format!("partition mesh {:.3e} exceeds the certified bound {:.3e}", p.mesh(), bound));
    }
    let needed = problem::omega_max(spec, d.outputs(), lambda)?;
    if p.omega_max() < needed {
        ok = false;
        warnings.push(format!("partition ends at {} below the required {needed}", p.omega_max()));
    }
    Ok((bound, ok, warnings))
}

/// Data-dependent blocks for one dataset, kernel and partition, reusable
/// across λ and ε.
pub struct Identifier<'a> {
    d: &'a Dataset,
    p: &'a FrequencyPartition,
    blocks: Blocks,
}

impl<'a> Identifier<'a> {
    pub fn new(d: &'a Dataset, spec: &KernelSpec, p: &'a FrequencyPartition) -> Result<Self> {
        if d.axis() != spec.axis() {
            return Err(Error::Domain("dataset and kernel axes differ".into()));
        }
        Ok(Identifier { d, p, blocks: Blocks::new(d, spec, p.omegas())? })
    }

    /// Iterative constraint activation: solve with the current active set,
    /// add every partition frequency with `|F_ω(g)|² > 1 − ε`, repeat until
    /// none is added.
    pub fn solve(&self, lambda: f64, eps: f64, cfg: &SolverConfig) -> Result<Model> {
        let (d, p, blocks) = (self.d, self.p, &self.blocks);
        let spec = &blocks.spec;
        check_inputs(d, spec, lambda, eps, cfg)?;
        let (bound, certified, warnings) = certification(d, spec, p, lambda, eps)?;
        let nd = d.n_d();
        let mut active: Vec<usize> = Vec::new();
        let mut in_active = vec![false; p.omegas().len()];
        let mut report = IdentifyReport { mesh: p.mesh(), mesh_bound: bound, warnings, ..Default::default() };
        loop {
            let ws: Vec<f64> = active.iter().map(|&k| p.omegas()[k]).collect();
            let gp = GramProblem {
                phi: blocks.gram(&active),
                n_d: nd,
                omegas: ws.clone(),
                y: d.outputs().to_vec(),
                lambda,
                eps,
                descriptors: problem::layout(d.sample_times(), &ws),
                certified: Some(certified),
            };
            report.iterations += 1;
            report.active_sizes.push(active.len());
            let sol = if active.is_empty() { solve_ridge(&gp)? } else { solve_qcqp(&gp, cfg)? };
            report.newton_iterations += sol.newton_iterations;
            report.barrier_stages += sol.stages;
            report.objective = sol.objective;
            let cap = 1.0 - eps;
            let added: Vec<usize> = (0..p.omegas().len())
                .filter(|&k| !in_active[k] && blocks.magnitude_sq(k, &active, &sol.x) > cap)
                .collect();
            if added.is_empty() {
                return Ok(finish(d, spec, lambda, eps, gp, sol, certified, report));
            }
            for k in added {
                in_active[k] = true;
            }
            active = (0..p.omegas().len()).filter(|&k| in_active[k]).collect();
        }
    }

    /// Kernel ridge estimate from the cached input block.
    pub fn ridge(&self, lambda: f64) -> Result<Model> {
        check_params(lambda, 0.5)?;
        let d = self.d;
        let gp = GramProblem {
            phi: self.blocks.uu.clone(),
            n_d: d.n_d(),
            omegas: vec![],
            y: d.outputs().to_vec(),
            lambda,
            eps: 0.0,
            descriptors: problem::layout(d.sample_times(), &[]),
            certified: None,
        };
        let sol = solve_ridge(&gp)?;
        let report = IdentifyReport { iterations: 1, active_sizes: vec![0], objective: sol.objective, ..Default::default() };
        Ok(finish(d, &self.blocks.spec, lambda, 0.0, gp, sol, false, report))
    }
}

/// Constrained estimate by iterative constraint activation (see [`Identifier::solve`]).
/// Outputs are used as given (normalized to ρ = 1).
pub fn identify(d: &Dataset, spec: &KernelSpec, p: &FrequencyPartition, lambda: f64, eps: f64, cfg: &SolverConfig) -> Result<Model> {
    check_inputs(d, spec, lambda, eps, cfg)?;
    Identifier::new(d, spec, p)?.solve(lambda, eps, cfg)
}

fn finish(d: &Dataset, spec: &KernelSpec, lambda: f64, eps: f64, gp: GramProblem, sol: SolveReport, certified: bool, report: IdentifyReport) -> Model {
    Model {
        spec: *spec,
        input: d.input().clone(),
        descriptors: gp.descriptors,
        x: sol.x,
        lambda,
        eps,
        rho: 1.0,
        gain: 1.0,
        feedthrough: 0.0,
        active: gp.omegas,
        certified,
        rkhs_norm_sq: sol.rkhs_norm_sq,
        report,
    }
}

/// [`identify`] on outputs divided by `rho`; the model is rescaled by `rho`.
pub fn identify_scaled(d: &Dataset, spec: &KernelSpec, p: &FrequencyPartition, lambda: f64, eps: f64, rho: f64, cfg: &SolverConfig) -> Result<Model> {
    let dn = scale_outputs(d, rho)?;
    let mut m = identify(&dn, spec, p, lambda, eps, cfg)?;
    m.rho = rho;
    Ok(m)
}

/// Solves with every partition constraint at once.
pub fn identify_full(d: &Dataset, spec: &KernelSpec, p: &FrequencyPartition, lambda: f64, eps: f64, cfg: &SolverConfig) -> Result<Model> {
    check_inputs(d, spec, lambda, eps, cfg)?;
    let (bound, certified, warnings) = certification(d, spec, p, lambda, eps)?;
    let gp = problem::assemble(d, spec, p, lambda, eps, crate::functionals::DEFAULT_TOL)?;
    let sol = solve_qcqp(&gp, cfg)?;
    let report = IdentifyReport {
        iterations: 1,
        active_sizes: vec![gp.n_constraints()],
        newton_iterations: sol.newton_iterations,
        barrier_stages: sol.stages,
        objective: sol.objective,
        mesh: p.mesh(),
        mesh_bound: bound,
        warnings,
    };
    Ok(finish(d, spec, lambda, eps, gp, sol, certified, report))
}

/// Unconstrained kernel ridge estimate.
pub fn identify_ridge(d: &Dataset, spec: &KernelSpec, lambda: f64) -> Result<Model> {
    check_params(lambda, 0.5)?;
    if d.axis() != spec.axis() {
        return Err(Error::Domain("dataset and kernel axes differ".into()));
    }
    let p = FrequencyPartition::new(vec![0.0])?;
    Identifier::new(d, spec, &p)?.ridge(lambda)
}

/// RKHS distance between the normalized parts of two models on the same data.
pub fn rkhs_distance(a: &Model, b: &Model) -> Result<f64> {
    if a.spec != b.spec || a.input != b.input {
        return Err(Error::Domain("models must share kernel and input".into()));
    }
    let mut desc: Vec<BasisDescriptor> = a.descriptors.clone();
    let mut coef: Vec<f64> = a.x.clone();
    for (d, &x) in b.descriptors.iter().zip(&b.x) {
        match desc.iter().position(|e| e == d) {
            Some(k) => coef[k] -= x,
            None => {
                desc.push(*d);
                coef.push(-x);
            }
        }
    }
    let taus: Vec<f64> = desc
        .iter()
        .filter_map(|d| match d {
            BasisDescriptor::InputFunctional(t) => Some(*t),
            _ => None,
        })
        .collect();
    let ds = Dataset::new(a.input.clone(), sorted_unique(&taus), vec![0.0; sorted_unique(&taus).len()])?;
    let phi = crate::functionals::gram_matrix(&ds, &a.spec, &desc)?;
    let v = DVector::from_vec(coef);
    Ok(v.dot(&(&phi * &v)).max(0.0).sqrt())
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

// ---------------------------------------------------------------- reductions

/// `s(u, y) = q_u u² + 2 q_uy u y + q_y y²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyRate {
    pub q_u: f64,
    pub q_uy: f64,
    pub q_y: f64,
}

impl SupplyRate {
    pub fn new(q_u: f64, q_uy: f64, q_y: f64) -> Result<Self> {
        if ![q_u, q_uy, q_y].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("supply rate must be finite".into()));
        }
        if !(q_y < 0.0) {
            return Err(Error::Config(format!("invalid supply rate: q_y must be negative, got {q_y}")));
        }
        if q_u * q_y - q_uy * q_uy > 0.0 {
            return Err(Error::Config("invalid supply rate: det Q must be nonpositive".into()));
        }
        Ok(SupplyRate { q_u, q_uy, q_y })
    }

    /// `s(u, y) = ρ² u² − y²`.
    pub fn gain_bound(rho: f64) -> Result<Self> {
        SupplyRate::new(rho * rho, 0.0, -1.0)
    }

    pub fn det(&self) -> f64 {
        self.q_u * self.q_y - self.q_uy * self.q_uy
    }

    /// `(l_1, l_2, l_3)` with `s(u, y) = (l_1 u)² − (l_2 u + l_3 y)²`.
    pub fn factors(&self) -> (f64, f64, f64) {
        let l3 = (-self.q_y).sqrt();
        let l1 = (self.det() / self.q_y).max(0.0).sqrt();
        (l1, -self.q_uy / l3, l3)
    }

    /// `L = [[l_1, l_2], [0, l_3]]`, so that `L diag(1, −1) Lᵀ = Q`.
    pub fn factor_matrix(&self) -> [[f64; 2]; 2] {
        let (l1, l2, l3) = self.factors();
        [[l1, l2], [0.0, l3]]
    }
}

/// Maps a model of `v ↦ z` back to `u ↦ y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipativityMap {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl DissipativityMap {
    /// `G = (l_1 G̃ − l_2) / l_3`. Since `φ_{v,τ} = l_1 φ_{u,τ}`, the basis is
    /// re-expressed in the original input `u` so that predictions use `u`.
    pub fn apply(&self, m: &Model) -> Model {
        let mut out = m.clone();
        out.gain = m.gain * self.l1 / self.l3;
        out.feedthrough = (self.l1 * m.feedthrough - self.l2) / self.l3;
        if self.l1 != 0.0 {
            out.input = m.input.scaled(1.0 / self.l1);
            for (x, d) in out.x.iter_mut().zip(&out.descriptors) {
                if matches!(d, BasisDescriptor::InputFunctional(_)) {
                    *x *= self.l1;
                }
            }
        }
        out
    }
}

/// Dataset of `v = l_1 u` and `z = l_2 u + l_3 y`.
pub fn dissipativity_reduce(d: &Dataset, q: &SupplyRate) -> Result<(Dataset, DissipativityMap)> {
    let q = SupplyRate::new(q.q_u, q.q_uy, q.q_y)?;
    let (l1, l2, l3) = q.factors();
    let z: Vec<f64> = d
        .sample_times()
        .iter()
        .zip(d.outputs())
        .map(|(&t, &y)| l2 * d.input().at(t) + l3 * y)
        .collect();
    let out = Dataset::new(d.input().scaled(l1), d.sample_times().to_vec(), z)?;
    Ok((out, DissipativityMap { l1, l2, l3 }))
}

/// `d_t = y_t − L_{u,t}(ḡ)` for a reference impulse response `ḡ`. Discrete
/// convolution is exact; continuous convolution uses adaptive quadrature
/// split at the input breakpoints.
pub fn delta_reduce(d: &Dataset, gbar: &dyn Fn(f64) -> f64) -> Result<Dataset> {
    let y = d.outputs();
    let out: Vec<f64> = match d.input() {
        Input::Discrete(u) => d
            .sample_times()
            .iter()
            .zip(y)
            .map(|(&t, &yt)| {
                let t = t as i64;
                yt - (0..=t).map(|s| gbar(s as f64) * u.at(t - s)).sum::<f64>()
            })
            .collect(),
        Input::PiecewiseConstant(u) => d
            .sample_times()
            .iter()
            .zip(y)
            .map(|(&t, &yt)| {
                let breaks: Vec<f64> = u.breakpoints().iter().map(|s| t - s).collect();
                yt - quad::integrate_split(|s| gbar(s) * u.at(t - s), 0.0, t, &breaks, 1e-13)
            })
            .collect(),
    };
    d.with_outputs(out)
}

/// [`delta_reduce`] with `ḡ` given as a transfer function, simulated exactly.
pub fn delta_reduce_tf(d: &Dataset, gbar: &RationalTF) -> Result<Dataset> {
    let yref = sim::simulate(gbar, d.input(), d.sample_times())?;
    d.with_outputs(d.outputs().iter().zip(yref).map(|(y, r)| y - r).collect())
}

/// Recovers `Ĝ = W⁻¹ Ĥ` from samples of `Ĥ`'s impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedBackMap {
    pub inverse: RationalTF,
    pub horizon: usize,
    /// Largest pole modulus of `W⁻¹`; the truncated tail decays like its powers.
    pub pole_radius: f64,
}

impl WeightedBackMap {
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        sim::filter(&self.inverse, h)
    }

    /// Impulse response of `W⁻¹ Ĥ` on `0..horizon`.
    pub fn apply_model(&self, m: &Model) -> Result<Vec<f64>> {
        let grid: Vec<f64> = (0..self.horizon).map(|t| t as f64).collect();
        Ok(self.apply(&m.impulse_response_grid(&grid)?))
    }
}

/// Filters the outputs through `W`. Discrete time only; `W` and `W⁻¹` must be
/// stable and causal. The back-map horizon is 4 times the data length.
pub fn weighted_reduce(d: &Dataset, w: &RationalTF) -> Result<(Dataset, WeightedBackMap)> {
    if d.axis() != Axis::Discrete || w.axis != Axis::Discrete {
        return Err(Error::Domain("weighted reduction is defined for discrete time only".into()));
    }
    if w.num.len() != w.den.len() {
        return Err(Error::Config("invalid weight: W must be biproper for a causal inverse".into()));
    }
    if !w.is_stable() {
        return Err(Error::Config("invalid weight: W has poles on or outside the unit circle".into()));
    }
    let inverse = w.inverse()?;
    let pole_radius = inverse.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    if pole_radius >= 1.0 {
        return Err(Error::Config("invalid weight: W has zeros on or outside the unit circle".into()));
    }
    let times = d.sample_times();
    let n = times.last().map_or(0, |t| *t as usize + 1);
    let mut full = vec![0.0; n];
    for (&t, &y) in times.iter().zip(d.outputs()) {
        full[t as usize] = y;
    }
    if times.len() != n {
        return Err(Error::Data("weighted reduction needs samples at every step 0..N".into()));
    }
    let p = sim::filter(w, &full);
    let out = d.with_outputs(p)?;
    Ok((out, WeightedBackMap { inverse, horizon: 4 * n, pole_radius }))
}

/// `100 (1 − ‖ĝ − g‖ / ‖g‖)`.
pub fn fit(g_hat: &[f64], g_true: &[f64]) -> Result<f64> {
    if g_hat.len() != g_true.len() {
        return Err(Error::Domain(format!("lengths differ: {} vs {}", g_hat.len(), g_true.len())));
    }
    let norm: f64 = g_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("fit is undefined for a zero reference".into()));
    }
    let err: f64 = g_hat.iter().zip(g_true).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(100.0 * (1.0 - err / norm))
}
