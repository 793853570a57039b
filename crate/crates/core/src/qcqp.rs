//! Log-barrier Newton solver for
//!
//! ```text
//! min ½‖Ax − y‖² + (λ/2) xᵀΦx   s.t.  (b_jᵀx)² + (c_jᵀx)² ≤ 1 − ε
//! ```
//!
//! Φ is a Gram matrix and is often numerically rank deficient. The solver
//! runs a diagonally pivoted Cholesky `Φ_SS = L_SS L_SSᵀ`, drops basis
//! elements whose residual diagonal falls below `jitter · max diag(Φ)`, and
//! works in `w = L_SSᵀ x_S`, where the regularizer becomes `‖w‖²`. Newton's
//! method is affine invariant, so the iterates are those of the x-space
//! method restricted to the kept basis elements.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::GramProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub theta0: f64,
    pub theta_decay: f64,
    pub barrier_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub armijo: f64,
    pub shrink: f64,
    /// Relative pivot threshold for the pivoted Cholesky of Φ.
    pub jitter: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            theta0: 1.0,
            theta_decay: 10.0,
            barrier_tol: 1e-8,
            newton_tol: 1e-10,
            max_newton: 100,
            armijo: 1e-4,
            shrink: 0.5,
            jitter: 1e-15,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.theta0, self.barrier_tol, self.newton_tol, self.armijo, self.shrink, self.jitter];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_newton == 0 {
            return Err(Error::Config("solver parameters must be positive".into()));
        }
        if !(self.theta_decay > 1.0) {
            return Err(Error::Config(format!("theta_decay must exceed 1, got {}", self.theta_decay)));
        }
        if !(self.armijo < 0.5 && self.shrink < 1.0) {
            return Err(Error::Config("need armijo < 0.5 and shrink < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    /// `‖Ax − y‖² + λ xᵀΦx`.
    pub objective: f64,
    /// `1 − ε − (b_jᵀx)² − (c_jᵀx)²` per constraint.
    pub slacks: Vec<f64>,
    pub stages: usize,
    pub newton_iterations: usize,
    pub rkhs_norm_sq: f64,
    pub feasible: bool,
    /// Halved objective after each barrier stage.
    pub stage_objectives: Vec<f64>,
    /// Basis elements kept by the pivoted factorization.
    pub rank: usize,
    /// `n_c θ` at the last stage, bounding the suboptimality of the halved objective.
    pub gap_bound: f64,
}

/// Explicit problem data. Rows of `a`, `b`, `c` must lie in the range of `phi`
/// (always true for Gram problems).
#[derive(Debug, Clone)]
pub struct Qcqp {
    pub a: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lambda: f64,
    pub eps: f64,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl Qcqp {
    pub fn new(a: DMatrix<f64>, phi: DMatrix<f64>, y: DVector<f64>, lambda: f64, eps: f64, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let m = phi.nrows();
        if phi.ncols() != m || a.ncols() != m || b.ncols() != m || c.ncols() != m {
            return Err(Error::Domain("column counts must match Φ".into()));
        }
        if a.nrows() != y.len() || b.nrows() != c.nrows() {
            return Err(Error::Domain("row counts do not match".into()));
        }
        crate::problem::check_params(lambda, eps)?;
        Ok(Qcqp { a, phi, y, lambda, eps, b, c })
    }

    pub fn from_gram(p: &GramProblem) -> Self {
        let m = p.m();
        let nc = p.n_constraints();
        let a = p.phi.rows(0, p.n_d).into_owned();
        let mut b = DMatrix::zeros(nc, m);
        let mut c = DMatrix::zeros(nc, m);
        for j in 0..nc {
            b.row_mut(j).copy_from(&p.b_vec(j).transpose());
            c.row_mut(j).copy_from(&p.c_vec(j).transpose());
        }
        Qcqp { a, phi: p.phi.clone(), y: DVector::from_column_slice(&p.y), lambda: p.lambda, eps: p.eps, b, c }
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }
}

/// Barrier data in some coordinate system; `metric = None` means the identity.
struct Barrier<'a> {
    a: &'a DMatrix<f64>,
    metric: Option<&'a DMatrix<f64>>,
    y: &'a DVector<f64>,
    lambda: f64,
    half_cap: f64,
    b: &'a DMatrix<f64>,
    c: &'a DMatrix<f64>,
}

struct Point {
    bx: DVector<f64>,
    cx: DVector<f64>,
    p: DVector<f64>,
}

impl<'a> Barrier<'a> {
    fn from_qcqp(q: &'a Qcqp) -> Self {
        Barrier { a: &q.a, metric: Some(&q.phi), y: &q.y, lambda: q.lambda, half_cap: 0.5 * (1.0 - q.eps), b: &q.b, c: &q.c }
    }

    fn point(&self, x: &DVector<f64>) -> Point {
        let bx = self.b * x;
        let cx = self.c * x;
        let p = DVector::from_fn(bx.len(), |j, _| 0.5 * bx[j] * bx[j] + 0.5 * cx[j] * cx[j] - self.half_cap);
        Point { bx, cx, p }
    }

    fn reg(&self, x: &DVector<f64>) -> f64 {
        match self.metric {
            Some(m) => x.dot(&(m * x)),
            None => x.norm_squared(),
        }
    }

    /// ½‖Ax − y‖² + (λ/2) reg(x).
    fn quad(&self, x: &DVector<f64>) -> f64 {
        0.5 * (self.a * x - self.y).norm_squared() + 0.5 * self.lambda * self.reg(x)
    }

    fn value(&self, x: &DVector<f64>, theta: f64) -> Option<f64> {
        let pt = self.point(x);
        if pt.p.iter().any(|&v| !(v < 0.0)) {
            return None;
        }
        let logs: f64 = if theta == 0.0 { 0.0 } else { pt.p.iter().map(|v| (-v).ln()).sum() };
        Some(self.quad(x) - theta * logs)
    }

    fn grad_hess(&self, x: &DVector<f64>, theta: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let pt = self.point(x);
        if pt.p.iter().any(|&v| !(v < 0.0)) {
            return None;
        }
        let n = x.len();
        let mut g = self.a.tr_mul(&(self.a * x - self.y));
        let mut h = self.a.tr_mul(self.a);
        match self.metric {
            Some(m) => {
                g += self.lambda * (m * x);
                h += self.lambda * m;
            }
            None => {
                g += self.lambda * x;
                for i in 0..n {
                    h[(i, i)] += self.lambda;
                }
            }
        }
        let nc = pt.p.len();
        if nc > 0 && theta > 0.0 {
            // ∇(−θ ln(−p_j)) = −θ ∇p_j / p_j with ∇p_j = (bᵀx) b + (cᵀx) c
            let coef_b = DVector::from_fn(nc, |j, _| -theta * pt.bx[j] / pt.p[j]);
            let coef_c = DVector::from_fn(nc, |j, _| -theta * pt.cx[j] / pt.p[j]);
            g += self.b.tr_mul(&coef_b) + self.c.tr_mul(&coef_c);
            // Hessian: θ/(−p_j)(bbᵀ + ccᵀ) + θ/p_j² ∇p_j ∇p_jᵀ, stacked as RᵀR
            let mut r = DMatrix::zeros(3 * nc, n);
            for j in 0..nc {
                let s = (theta / -pt.p[j]).sqrt();
                let t = theta.sqrt() / -pt.p[j];
                for k in 0..n {
                    let bk = self.b[(j, k)];
                    let ck = self.c[(j, k)];
                    r[(3 * j, k)] = s * bk;
                    r[(3 * j + 1, k)] = s * ck;
                    r[(3 * j + 2, k)] = t * (pt.bx[j] * bk + pt.cx[j] * ck);
                }
            }
            h += r.tr_mul(&r);
        }
        Some((g, h))
    }
}

fn check_x(q: &Qcqp, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != q.m() {
        return Err(Error::Domain(format!("x has length {}, expected {}", x.len(), q.m())));
    }
    Ok(DVector::from_column_slice(x))
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta must be >= 0, got {theta}")))
    }
}

/// `f(x) = ½‖Ax−y‖² + (λ/2)xᵀΦx − θ Σ ln(−p_j(x))`.
pub fn barrier_objective(p: &GramProblem, x: &[f64], theta: f64) -> Result<f64> {
    barrier_objective_q(&Qcqp::from_gram(p), x, theta)
}

pub fn barrier_objective_q(q: &Qcqp, x: &[f64], theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let xv = check_x(q, x)?;
    Barrier::from_qcqp(q).value(&xv, theta).ok_or_else(|| Error::Infeasible("x violates a constraint".into()))
}

/// Gradient and Hessian of [`barrier_objective`].
pub fn barrier_grad_hess(p: &GramProblem, x: &[f64], theta: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    barrier_grad_hess_q(&Qcqp::from_gram(p), x, theta)
}

pub fn barrier_grad_hess_q(q: &Qcqp, x: &[f64], theta: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_theta(theta)?;
    let xv = check_x(q, x)?;
    Barrier::from_qcqp(q).grad_hess(&xv, theta).ok_or_else(|| Error::Infeasible("x violates a constraint".into()))
}

/// Unconstrained solve `x = (Φ + λI)⁻¹ y` for a basis of input functionals only.
pub fn solve_ridge(p: &GramProblem) -> Result<SolveReport> {
    if p.n_constraints() != 0 || p.m() != p.n_d {
        return Err(Error::Domain("solve_ridge needs a problem without frequency constraints".into()));
    }
    let m = p.m();
    let y = DVector::from_column_slice(&p.y);
    let trace = p.phi.trace().max(0.0);
    let mut jitter = 0.0;
    let x = loop {
        let mut h = p.phi.clone();
        for i in 0..m {
            h[(i, i)] += p.lambda + jitter;
        }
        if let Some(ch) = Cholesky::new(h) {
            break ch.solve(&y);
        }
        jitter = if jitter == 0.0 { 1e-10 * trace / m.max(1) as f64 } else { jitter * 10.0 };
        if !(jitter.is_finite()) || jitter > trace.max(1.0) {
            return Err(Error::Singular("Φ + λI is not positive definite".into()));
        }
    };
    Ok(report(&Qcqp::from_gram(p), x.as_slice().to_vec(), 0, 0, vec![], m, 0.0))
}

fn report(q: &Qcqp, x: Vec<f64>, stages: usize, newton: usize, stage_objectives: Vec<f64>, rank: usize, gap: f64) -> SolveReport {
    let xv = DVector::from_column_slice(&x);
    let rkhs = xv.dot(&(&q.phi * &xv));
    let objective = (&q.a * &xv - &q.y).norm_squared() + q.lambda * rkhs;
    let bx = &q.b * &xv;
    let cx = &q.c * &xv;
    let cap = 1.0 - q.eps;
    let slacks: Vec<f64> = (0..bx.len()).map(|j| cap - bx[j] * bx[j] - cx[j] * cx[j]).collect();
    let feasible = slacks.iter().all(|s| *s >= -1e-9);
    SolveReport { x, objective, slacks, stages, newton_iterations: newton, rkhs_norm_sq: rkhs, feasible, stage_objectives, rank, gap_bound: gap }
}

/// Diagonally pivoted Cholesky. Returns `L` (m × r) with `L Lᵀ ≈ Φ` and the pivot order.
pub fn pivoted_cholesky(phi: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, Vec<usize>) {
    let m = phi.nrows();
    let mut diag: Vec<f64> = (0..m).map(|i| phi[(i, i)]).collect();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let thresh = rel_tol * max_diag;
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut piv = Vec::new();
    let mut used = vec![false; m];
    if max_diag <= 0.0 {
        return (DMatrix::zeros(m, 0), piv);
    }
    loop {
        let mut best = None;
        let mut best_v = thresh;
        for i in 0..m {
            if !used[i] && diag[i] > best_v {
                best_v = diag[i];
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        let mut col = phi.column(i).clone_owned();
        for l in &cols {
            let f = l[i];
            if f != 0.0 {
                col.axpy(-f, l, 1.0);
            }
        }
        let s = best_v.sqrt();
        col /= s;
        for (k, u) in used.iter().enumerate() {
            if *u {
                col[k] = 0.0;
            }
        }
        col[i] = s;
        used[i] = true;
        for k in 0..m {
            if !used[k] {
                diag[k] -= col[k] * col[k];
            }
        }
        diag[i] = 0.0;
        cols.push(col);
        piv.push(i);
    }
    let r = cols.len();
    let mut l = DMatrix::zeros(m, r);
    for (k, c) in cols.iter().enumerate() {
        l.set_column(k, c);
    }
    (l, piv)
}

/// Solves the QCQP of a Gram problem.
pub fn solve_qcqp(p: &GramProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_qcqp_general(&Qcqp::from_gram(p), cfg)
}

/// Solves an explicit QCQP.
pub fn solve_qcqp_general(q: &Qcqp, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    crate::problem::check_params(q.lambda, q.eps)?;
    let m = q.m();
    let nc = q.b.nrows();
    let (l, piv) = pivoted_cholesky(&q.phi, cfg.jitter);
    let r = piv.len();
    if r == 0 {
        return Ok(report(q, vec![0.0; m], 0, 0, vec![], 0, 0.0));
    }
    // L_SS is lower triangular in pivot order.
    let lss = DMatrix::from_fn(r, r, |i, j| l[(piv[i], j)]);
    let reduce = |mat: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        // mat[:, S] L_SS^{-T}  =  (L_SS^{-1} mat[:, S]ᵀ)ᵀ
        let sub = DMatrix::from_fn(r, mat.nrows(), |k, i| mat[(i, piv[k])]);
        let sol = lss
            .solve_lower_triangular(&sub)
            .ok_or_else(|| Error::Singular("pivoted factor is singular".into()))?;
        Ok(sol.transpose())
    };
    let aw = reduce(&q.a)?;
    let bw = reduce(&q.b)?;
    let cw = reduce(&q.c)?;
    let bar = Barrier { a: &aw, metric: None, y: &q.y, lambda: q.lambda, half_cap: 0.5 * (1.0 - q.eps), b: &bw, c: &cw };

    let mut w = DVector::zeros(r);
    let mut stages = 0;
    let mut newton = 0;
    let mut stage_obj = Vec::new();
    let mut theta = cfg.theta0;
    let gap;
    if nc == 0 {
        let (g, h) = bar.grad_hess(&w, 0.0).expect("no constraints");
        let ch = Cholesky::new(h).ok_or_else(|| Error::Numeric("Hessian not positive definite".into()))?;
        w -= ch.solve(&g);
        newton = 1;
        stage_obj.push(bar.quad(&w));
        gap = 0.0;
    } else {
        loop {
            newton += center(&bar, &mut w, theta, cfg)?;
            stages += 1;
            stage_obj.push(bar.quad(&w));
            if theta * (nc as f64) < cfg.barrier_tol {
                gap = theta * (nc as f64);
                break;
            }
            theta /= cfg.theta_decay;
        }
    }
    let xs = lss
        .transpose()
        .solve_upper_triangular(&w)
        .ok_or_else(|| Error::Singular("pivoted factor is singular".into()))?;
    let mut x = vec![0.0; m];
    for (k, &i) in piv.iter().enumerate() {
        x[i] = xs[k];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite coefficients".into()));
    }
    Ok(report(q, x, stages, newton, stage_obj, r, gap))
}

/// Damped Newton on the barrier function at fixed θ. Returns the iteration count.
fn center(bar: &Barrier, w: &mut DVector<f64>, theta: f64, cfg: &SolverConfig) -> Result<usize> {
    let mut f = bar.value(w, theta).ok_or_else(|| Error::Infeasible("iterate left the feasible set".into()))?;
    for it in 0..cfg.max_newton {
        let (g, h) = bar.grad_hess(w, theta).ok_or_else(|| Error::Infeasible("iterate left the feasible set".into()))?;
        if g.amax() <= cfg.newton_tol {
            return Ok(it);
        }
        let ch = Cholesky::new(h).ok_or_else(|| Error::Numeric("barrier Hessian not positive definite".into()))?;
        let dir = -ch.solve(&g);
        let slope = g.dot(&dir);
        if !slope.is_finite() {
            return Err(Error::Numeric("non-finite Newton step".into()));
        }
        if -slope <= 1e-28 * (1.0 + f.abs()) {
            return Ok(it + 1);
        }
        let floor = 4.0 * f64::EPSILON * f.abs();
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let cand = &*w + t * &dir;
            if let Some(fc) = bar.value(&cand, theta) {
                if fc <= f + cfg.armijo * t * slope + floor {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= cfg.shrink;
        }
        match accepted {
            Some((cand, fc)) => {
                let stalled = fc >= f && -slope <= 1e-14 * (1.0 + f.abs());
                *w = cand;
                f = fc;
                if stalled {
                    return Ok(it + 1);
                }
            }
            None => {
                if -slope <= 1e-12 * (1.0 + f.abs()) {
                    return Ok(it + 1);
                }
                return Err(Error::NonConvergence(format!(
                    "line search failed at theta={theta:e}, decrement²={:e}",
                    -slope
                )));
            }
        }
    }
    Err(Error::NonConvergence(format!("no convergence within {} Newton steps at theta={theta:e}", cfg.max_newton)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(eps: f64) -> Qcqp {
        let one = DMatrix::from_element(1, 1, 1.0);
        Qcqp::new(one.clone(), one.clone(), DVector::from_element(1, 2.0), 1.0, eps, one, DMatrix::zeros(1, 1)).unwrap()
    }

    #[test]
    fn one_dimensional_kkt() {
        let r = solve_qcqp_general(&one_d(0.19), &SolverConfig::default()).unwrap();
        assert!((r.x[0] - 0.9).abs() < 1e-6, "{:?}", r.x);
        assert!(r.feasible);
    }

    #[test]
    fn two_dimensional_kkt() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let q = Qcqp::new(i2.clone(), i2, DVector::from_column_slice(&[2.0, 0.0]), 1.0, 0.36, b, c).unwrap();
        let r = solve_qcqp_general(&q, &SolverConfig::default()).unwrap();
        assert!((r.x[0] - 0.8).abs() < 1e-6 && r.x[1].abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn pivoted_cholesky_reproduces_rank_deficient_gram() {
        let v = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let phi = &v * v.transpose();
        let (l, piv) = pivoted_cholesky(&phi, 1e-12);
        assert_eq!(piv.len(), 2);
        assert!((&l * l.transpose() - &phi).amax() < 1e-12);
    }

    #[test]
    fn barrier_at_zero() {
        let q = one_d(0.19);
        let f = barrier_objective_q(&q, &[0.0], 0.5).unwrap();
        assert!((f - (2.0 - 0.5 * (0.5f64 * 0.81).ln())).abs() < 1e-14);
        assert!(barrier_objective_q(&q, &[1.0], 0.5).is_err());
    }
}
