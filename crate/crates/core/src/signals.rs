//! Inputs, outputs and sampling instants, plus CSV ingestion.
//!
//! Dataset files carry the header `t,u,y`. Continuous-time inputs are read
//! from a separate `s,xi` file: row `i` holds breakpoint `s_i` and the value
//! on `[s_i, s_{i+1})`; the final row holds the end of support and an empty
//! (or zero) value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Axis;

/// Sampled input `u_0..u_{n-1}`; zero before 0 and from `n` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInput {
    samples: Vec<f64>,
}

impl DiscreteInput {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("discrete input needs at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("input sample {i} is not finite")));
        }
        Ok(DiscreteInput { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn at(&self, t: i64) -> f64 {
        if t < 0 {
            0.0
        } else {
            self.samples.get(t as usize).copied().unwrap_or(0.0)
        }
    }
}

/// `u(t) = ξ_{i+1}` on `[s_i, s_{i+1})`, zero outside `[0, s_{n_s})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantInput {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantInput {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::Data(format!(
                "need n_s >= 1 values and n_s + 1 breakpoints, got {} and {}",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Data(format!("first breakpoint must be 0, got {}", breakpoints[0])));
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Data(format!("breakpoints not strictly increasing at index {}", i + 1)));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("input value {i} is not finite")));
        }
        Ok(PiecewiseConstantInput { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_segments(&self) -> usize {
        self.values.len()
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.end() {
            return 0.0;
        }
        // last breakpoint <= t
        let i = self.breakpoints.partition_point(|&s| s <= t) - 1;
        self.values[i]
    }

    /// Jump sizes `ξ_{i+1} - ξ_i` for `i = 0..=n_s`, with `ξ_0 = ξ_{n_s+1} = 0`.
    pub(crate) fn jumps(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..=n)
            .map(|i| {
                let next = if i < n { self.values[i] } else { 0.0 };
                let prev = if i > 0 { self.values[i - 1] } else { 0.0 };
                next - prev
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Input {
    Discrete(DiscreteInput),
    PiecewiseConstant(PiecewiseConstantInput),
}

impl Input {
    pub fn axis(&self) -> Axis {
        match self {
            Input::Discrete(_) => Axis::Discrete,
            Input::PiecewiseConstant(_) => Axis::Continuous,
        }
    }

    /// Input value at time `t` (right-continuous in continuous time).
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Input::Discrete(u) => {
                if t.fract() != 0.0 {
                    0.0
                } else {
                    u.at(t as i64)
                }
            }
            Input::PiecewiseConstant(u) => u.at(t),
        }
    }

    pub fn scaled(&self, c: f64) -> Input {
        match self {
            Input::Discrete(u) => Input::Discrete(DiscreteInput { samples: u.samples.iter().map(|v| c * v).collect() }),
            Input::PiecewiseConstant(u) => Input::PiecewiseConstant(PiecewiseConstantInput {
                breakpoints: u.breakpoints.clone(),
                values: u.values.iter().map(|v| c * v).collect(),
            }),
        }
    }
}

impl From<DiscreteInput> for Input {
    fn from(u: DiscreteInput) -> Self {
        Input::Discrete(u)
    }
}

impl From<PiecewiseConstantInput> for Input {
    fn from(u: PiecewiseConstantInput) -> Self {
        Input::PiecewiseConstant(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    input: Input,
    sample_times: Vec<f64>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(input: Input, sample_times: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        if sample_times.is_empty() {
            return Err(Error::Data("no samples".into()));
        }
        if sample_times.len() != outputs.len() {
            return Err(Error::Data(format!(
                "{} sample times but {} outputs",
                sample_times.len(),
                outputs.len()
            )));
        }
        if !(sample_times[0] >= 0.0) {
            return Err(Error::Data(format!("sample times must be >= 0, got {}", sample_times[0])));
        }
        for (i, w) in sample_times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Data(format!("sample times not strictly increasing at index {}", i + 1)));
            }
        }
        if let Some(i) = sample_times.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("sample time {i} is not finite")));
        }
        if let Some(i) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("output {i} is not finite")));
        }
        if input.axis() == Axis::Discrete {
            if let Some(t) = sample_times.iter().find(|t| t.fract() != 0.0) {
                return Err(Error::Data(format!("discrete sample time {t} is not an integer")));
            }
        }
        Ok(Dataset { input, sample_times, outputs })
    }

    pub fn axis(&self) -> Axis {
        self.input.axis()
    }
    pub fn input(&self) -> &Input {
        &self.input
    }
    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }
    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }
    pub fn n_d(&self) -> usize {
        self.sample_times.len()
    }

    /// Same input and times with new outputs.
    pub fn with_outputs(&self, outputs: Vec<f64>) -> Result<Self> {
        Dataset::new(self.input.clone(), self.sample_times.clone(), outputs)
    }

    /// Same input, keeping only the listed sample indices (in the given order, which must be increasing in time).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut t = Vec::with_capacity(idx.len());
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.n_d() {
                return Err(Error::Index(format!("sample index {i} out of range")));
            }
            t.push(self.sample_times[i]);
            y.push(self.outputs[i]);
        }
        Dataset::new(self.input.clone(), t, y)
    }

    pub fn sum_sq_outputs(&self) -> f64 {
        self.outputs.iter().map(|v| v * v).sum()
    }

    /// Position of `tau` among the sample times.
    pub fn sample_index(&self, tau: f64) -> Result<usize> {
        self.sample_times
            .binary_search_by(|t| t.total_cmp(&tau))
            .map_err(|_| Error::Index(format!("{tau} is not a sample time")))
    }
}

/// Divides the outputs by `rho`.
pub fn scale_outputs(d: &Dataset, rho: f64) -> Result<Dataset> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    if rho == 1.0 {
        return Ok(d.clone());
    }
    let y = d.outputs.iter().map(|v| v / rho).collect();
    d.with_outputs(y)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn parse_rows(text: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if got != header {
        return Err(Error::Parse { row: 1, msg: format!("expected header '{}', got '{}'", header.join(","), got.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Parse { row: line, msg: format!("expected {} fields, got {}", header.len(), rec.len()) });
        }
        rows.push((line, rec.iter().map(|s| s.to_string()).collect()));
    }
    Ok(rows)
}

fn num(field: &str, row: usize, name: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse { row, msg: format!("{name}: cannot parse '{field}' as a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, msg: format!("{name}: value '{field}' is not finite") });
    }
    Ok(v)
}

/// Parses a `t,u,y` table. Discrete rows must cover `t = 0, 1, 2, ...` in order.
/// For continuous data the input comes from `input` and the `u` column is ignored.
pub fn parse_dataset(text: &str, axis: Axis, input: Option<PiecewiseConstantInput>) -> Result<Dataset> {
    let rows = parse_rows(text, &["t", "u", "y"])?;
    if rows.is_empty() {
        return Err(Error::Data("no samples".into()));
    }
    let mut t = Vec::with_capacity(rows.len());
    let mut u = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        let ti = num(&f[0], *line, "t")?;
        if let Some(&prev) = t.last() {
            if !(ti > prev) {
                return Err(Error::Parse { row: *line, msg: format!("time {ti} does not increase (previous {prev})") });
            }
        } else if ti < 0.0 {
            return Err(Error::Parse { row: *line, msg: format!("negative time {ti}") });
        }
        t.push(ti);
        u.push(num(&f[1], *line, "u")?);
        y.push(num(&f[2], *line, "y")?);
    }
    match axis {
        Axis::Discrete => {
            if input.is_some() {
                return Err(Error::Config("discrete datasets take their input from the u column".into()));
            }
            for (i, (line, _)) in rows.iter().enumerate() {
                if t[i] != i as f64 {
                    return Err(Error::Parse { row: *line, msg: format!("discrete rows must have t = 0,1,2,...; expected {i}, got {}", t[i]) });
                }
            }
            Dataset::new(Input::Discrete(DiscreteInput::new(u)?), t, y)
        }
        Axis::Continuous => {
            let inp = input.ok_or_else(|| Error::Config("continuous datasets need an s,xi input file".into()))?;
            Dataset::new(Input::PiecewiseConstant(inp), t, y)
        }
    }
}

pub fn load_dataset(path: &Path, axis: Axis, input_path: Option<&Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let input = match input_path {
        Some(p) => Some(load_pwc_input(p)?),
        None => None,
    };
    parse_dataset(&text, axis, input)
}

pub fn parse_pwc_input(text: &str) -> Result<PiecewiseConstantInput> {
    let rows = parse_rows(text, &["s", "xi"])?;
    if rows.len() < 2 {
        return Err(Error::Data("input file needs at least two breakpoints".into()));
    }
    let mut s = Vec::with_capacity(rows.len());
    let mut xi = Vec::with_capacity(rows.len() - 1);
    let last = rows.len() - 1;
    for (k, (line, f)) in rows.iter().enumerate() {
        s.push(num(&f[0], *line, "s")?);
        if k < last {
            xi.push(num(&f[1], *line, "xi")?);
        } else if !f[1].is_empty() && num(&f[1], *line, "xi")? != 0.0 {
            return Err(Error::Parse { row: *line, msg: "last row closes the support; xi must be empty or 0".into() });
        }
    }
    if s[0] != 0.0 {
        return Err(Error::Parse { row: rows[0].0, msg: format!("first breakpoint must be 0, got {}", s[0]) });
    }
    for k in 1..s.len() {
        if !(s[k] > s[k - 1]) {
            return Err(Error::Parse { row: rows[k].0, msg: format!("breakpoint {} does not increase", s[k]) });
        }
    }
    PiecewiseConstantInput::new(s, xi)
}

pub fn load_pwc_input(path: &Path) -> Result<PiecewiseConstantInput> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_pwc_input(&text)
}

/// `t,u,y` text; `u` is the input value at each sample time.
pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = String::from("t,u,y\n");
    for (t, y) in d.sample_times.iter().zip(&d.outputs) {
        out.push_str(&format!("{t},{},{y}\n", d.input.at(*t)));
    }
    out
}

pub fn pwc_input_to_csv(u: &PiecewiseConstantInput) -> String {
    let mut out = String::from("s,xi\n");
    for (s, xi) in u.breakpoints.iter().zip(&u.values) {
        out.push_str(&format!("{s},{xi}\n"));
    }
    out.push_str(&format!("{},\n", u.end()));
    out
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(d)).map_err(io_err(path))
}

pub fn save_pwc_input(u: &PiecewiseConstantInput, path: &Path) -> Result<()> {
    std::fs::write(path, pwc_input_to_csv(u)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_discrete_file() {
        let d = parse_dataset("t,u,y\n0,1,0.5\n1,0,0.3\n2,0,0.1", Axis::Discrete, None).unwrap();
        assert_eq!(d.n_d(), 3);
        assert_eq!(d.outputs(), &[0.5, 0.3, 0.1]);
        assert_eq!(d.input().at(0.0), 1.0);
    }

    #[test]
    fn rejects_bad_files() {
        let e = parse_dataset("t,u,y\n2,1,0.5\n1,0,0.3\n", Axis::Discrete, None).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 3, .. }), "{e}");
        let e = parse_dataset("t,u,y\n", Axis::Discrete, None).unwrap_err();
        assert!(e.to_string().contains("no samples"));
        let e = parse_dataset("t,u,y\n0,1,NaN\n", Axis::Discrete, None).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }));
        let e = parse_dataset("t,u,y\n0,1,x\n", Axis::Discrete, None).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }));
        assert!(parse_dataset("a,b\n0,1\n", Axis::Discrete, None).is_err());
    }

    #[test]
    fn pwc_file() {
        let u = parse_pwc_input("s,xi\n0,1\n0.5,-2\n1.5,\n").unwrap();
        assert_eq!(u.breakpoints(), &[0.0, 0.5, 1.5]);
        assert_eq!(u.values(), &[1.0, -2.0]);
        assert_eq!(u.at(0.49), 1.0);
        assert_eq!(u.at(0.5), -2.0);
        assert_eq!(u.at(1.5), 0.0);
        assert_eq!(u.jumps(), vec![1.0, -3.0, 2.0]);
        assert!(parse_pwc_input("s,xi\n0.1,1\n0.5,\n").is_err());
        let back = parse_pwc_input(&pwc_input_to_csv(&u)).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn scale_examples() {
        let d = Dataset::new(Input::Discrete(DiscreteInput::new(vec![1.0, 0.0]).unwrap()), vec![0.0, 1.0], vec![2.0, 4.0]).unwrap();
        assert_eq!(scale_outputs(&d, 2.0).unwrap().outputs(), &[1.0, 2.0]);
        assert_eq!(scale_outputs(&d, 1.0).unwrap(), d);
        assert!(scale_outputs(&d, 0.0).is_err());
    }
}
