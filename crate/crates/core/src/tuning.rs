//! Hold-out selection of the regularization weight and kernel decay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{Identifier, Model};
use crate::kernels::{Axis, KernelSpec};
use crate::problem::FrequencyPartition;
use crate::qcqp::SolverConfig;
use crate::signals::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// First `n` samples train, the rest validate.
    TrainCount(usize),
    /// Leading fraction of samples trains.
    TrainFraction(f64),
    Explicit { train: Vec<usize>, valid: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitter {
    /// Frequency-constrained estimate.
    Constrained,
    /// Kernel ridge estimate without frequency constraints.
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub split: Split,
    pub lambdas: Vec<f64>,
    pub decays: Vec<f64>,
    /// Extra log-uniform λ / uniform decay draws inside the grid's box.
    pub random_points: usize,
    pub seed: u64,
    pub fitter: Fitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub lambda: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub lambda: f64,
    pub decay: f64,
    /// NaN when the fit failed.
    pub v: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Theta,
    pub best_v: f64,
    pub table: Vec<TuneRow>,
}

/// `n` log-spaced values from `10^lo` to `10^hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    lin_grid(lo, hi, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl TuneConfig {
    /// 8 × 8 grid: λ in `[1e-4, 1e2]`, α in `[0.5, 0.99]` or β in `[0.1, 10]`.
    pub fn default_for(axis: Axis, split: Split) -> TuneConfig {
        let decays = match axis {
            Axis::Discrete => lin_grid(0.5, 0.99, 8),
            Axis::Continuous => log_grid(-1.0, 1.0, 8),
        };
        TuneConfig { split, lambdas: log_grid(-4.0, 2.0, 8), decays, random_points: 0, seed: 0, fitter: Fitter::Constrained }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.decays.is_empty() {
            return Err(Error::Config("tuning grids must be non-empty".into()));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Config("tuning lambdas must be positive".into()));
        }
        Ok(())
    }

    /// `(I_T, I_V)` for a dataset with `n` samples.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let k = match &self.split {
            Split::TrainCount(k) => *k,
            Split::TrainFraction(f) => {
                if !(*f > 0.0 && *f < 1.0) {
                    return Err(Error::Config(format!("train fraction must lie in (0,1), got {f}")));
                }
                ((n as f64) * f).round() as usize
            }
            Split::Explicit { train, valid } => {
                let mut seen = vec![0u8; n];
                for &i in train.iter().chain(valid) {
                    if i >= n {
                        return Err(Error::Config(format!("split index {i} out of range")));
                    }
                    seen[i] += 1;
                }
                if seen.iter().any(|&c| c != 1) {
                    return Err(Error::Config("train and validation sets must be disjoint and cover the data".into()));
                }
                if train.is_empty() || valid.is_empty() {
                    return Err(Error::Config("train and validation sets must be non-empty".into()));
                }
                let mut t = train.clone();
                t.sort_unstable();
                let mut v = valid.clone();
                v.sort_unstable();
                return Ok((t, v));
            }
        };
        if k == 0 || k >= n {
            return Err(Error::Config(format!("train count {k} leaves no training or validation data of {n}")));
        }
        Ok(((0..k).collect(), (k..n).collect()))
    }

    fn points(&self) -> Vec<Theta> {
        let mut out = Vec::new();
        for &lambda in &self.lambdas {
            for &decay in &self.decays {
                out.push(Theta { lambda, decay });
            }
        }
        if self.random_points > 0 {
            let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let (l0, l1) = fold(&self.lambdas);
            let (d0, d1) = fold(&self.decays);
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for _ in 0..self.random_points {
                let lambda = 10f64.powf(l0.log10() + (l1.log10() - l0.log10()) * rng.random::<f64>());
                let decay = d0 + (d1 - d0) * rng.random::<f64>();
                out.push(Theta { lambda, decay });
            }
        }
        out
    }
}

fn fit_with(fitter: Fitter, id: &Identifier, lambda: f64, eps: f64, cfg: &SolverConfig) -> Result<Model> {
    match fitter {
        Fitter::Constrained => id.solve(lambda, eps, cfg),
        Fitter::Ridge => id.ridge(lambda),
    }
}

fn theta_context(theta: Theta) -> String {
    format!("lambda={}, decay={}", theta.lambda, theta.decay)
}

fn held_out_error(d: &Dataset, fitter: Fitter, valid: &[usize], id: &Identifier, lambda: f64, eps: f64, cfg: &SolverConfig) -> Result<f64> {
    let model = fit_with(fitter, id, lambda, eps, cfg)?;
    let times: Vec<f64> = valid.iter().map(|&i| d.sample_times()[i]).collect();
    let pred = model.predict(&times)?;
    let sse: f64 = valid.iter().zip(pred).map(|(&i, yp)| (d.outputs()[i] - yp).powi(2)).sum();
    Ok(sse / valid.len() as f64)
}

/// Mean squared prediction error on `I_V` of the model fitted on `I_T`.
pub fn validation_error(d: &Dataset, split: &TuneConfig, base: &KernelSpec, theta: Theta, p: &FrequencyPartition, eps: f64, cfg: &SolverConfig) -> Result<f64> {
    let ctx = theta_context(theta);
    let (train, valid) = split.indices(d.n_d())?;
    let spec = base.with_decay(theta.decay).map_err(|e| e.context(&ctx))?;
    let dt = d.subset(&train)?;
    let id = Identifier::new(&dt, &spec, p).map_err(|e| e.context(&ctx))?;
    held_out_error(d, split.fitter, &valid, &id, theta.lambda, eps, cfg).map_err(|e| e.context(&ctx))
}

/// Exhaustive search. Ties go to the larger λ, then the larger decay.
pub fn tune(d: &Dataset, cfg: &TuneConfig, base: &KernelSpec, p: &FrequencyPartition, eps: f64, solver: &SolverConfig) -> Result<TuneResult> {
    cfg.validate()?;
    let (train, valid) = cfg.indices(d.n_d())?;
    let dt = d.subset(&train)?;
    let points = cfg.points();
    let mut table: Vec<TuneRow> = points
        .iter()
        .map(|t| TuneRow { lambda: t.lambda, decay: t.decay, v: f64::NAN, error: None })
        .collect();
    // The data blocks depend on the decay only; build them once per decay.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].decay.total_cmp(&points[b].decay));
    let no_constraints = FrequencyPartition::new(vec![0.0])?;
    let mut k = 0;
    while k < order.len() {
        let decay = points[order[k]].decay;
        let group: Vec<usize> = order[k..].iter().copied().take_while(|&i| points[i].decay == decay).collect();
        k += group.len();
        let id = base.with_decay(decay).and_then(|spec| match cfg.fitter {
            Fitter::Constrained => Identifier::new(&dt, &spec, p),
            Fitter::Ridge => Identifier::new(&dt, &spec, &no_constraints),
        });
        for i in group {
            let res = match &id {
                Ok(id) => held_out_error(d, cfg.fitter, &valid, id, points[i].lambda, eps, solver),
                Err(e) => Err(Error::Domain(e.to_string())),
            };
            match res {
                Ok(v) => table[i].v = v,
                Err(e) => table[i].error = Some(e.context(&theta_context(points[i])).to_string()),
            }
        }
    }
    let best = table
        .iter()
        .filter(|r| r.v.is_finite())
        .min_by(|a, b| {
            a.v.total_cmp(&b.v)
                .then(b.lambda.total_cmp(&a.lambda))
                .then(b.decay.total_cmp(&a.decay))
        })
        .cloned();
    match best {
        Some(r) => Ok(TuneResult { best: Theta { lambda: r.lambda, decay: r.decay }, best_v: r.v, table }),
        None => {
            let msgs: Vec<String> = table.iter().filter_map(|r| r.error.clone()).take(3).collect();
            Err(Error::Numeric(format!("all {} tuning candidates failed; first errors: {}", table.len(), msgs.join("; "))))
        }
    }
}

pub fn table_to_csv(rows: &[TuneRow]) -> String {
    let mut s = String::from("lambda,decay,v\n");
    for r in rows {
        s.push_str(&format!("{:e},{:e},{:e}\n", r.lambda, r.decay, r.v));
    }
    s
}
