//! Versioned JSON tuple files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "kind": "dense",
//!   "dim": 2,
//!   "operators": [{ "entries": [[[0.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]] }],
//!   "twists": [],
//!   "tolerance": { "residual_tol": 1e-9 }
//! }
//! ```
//!
//! Dense operators are row-major matrices of `[re, im]` pairs. Lattice files
//! carry `"shape": {"d_plus", "d_bi"}` and operators
//! `{"sigma": [[..]], "delta": [..], "weight": [factor, ..]}`, where a factor
//! is `{"base": {"modulus": ρ} | {"phase": θ}, "coeffs": [..], "constant": k}`.
//! A twist names its pair with 1-based `"pair": [i, j]` and is given either as
//! an operator of the file's kind or as `"scalar": [re, im]`.

use std::path::Path;

use faer::c64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lattice::{AffineMap, Boundary, LatticeShape, LatticeTuple, MonomialOperator, WeightRule};
use crate::operator::DenseOperator;
use crate::tolerance::ToleranceProfile;
use crate::twisted::{TwistFamily, TwistedTuple};

pub const FORMAT_VERSION: u32 = 1;

pub type Complex = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TupleKind {
    Dense,
    Lattice,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilization_window: Option<usize>,
}

impl ToleranceOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: ToleranceProfile) -> Result<ToleranceProfile> {
        ToleranceProfile::new(
            self.rank_rtol.unwrap_or(base.rank_rtol),
            self.residual_tol.unwrap_or(base.residual_tol),
            self.stabilization_window.unwrap_or(base.stabilization_window),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<Complex>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistSpec {
    pub pair: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<Complex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<Complex>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightRule>,
}

impl TwistSpec {
    fn operator(&self) -> OperatorSpec {
        OperatorSpec {
            entries: self.entries.clone(),
            sigma: self.sigma.clone(),
            delta: self.delta.clone(),
            weight: self.weight.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleFile {
    pub format_version: u32,
    pub kind: TupleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<LatticeShape>,
    /// Densification boundary for lattice files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
    pub operators: Vec<OperatorSpec>,
    #[serde(default)]
    pub twists: Vec<TwistSpec>,
    #[serde(default, skip_serializing_if = "ToleranceOverrides::is_empty")]
    pub tolerance: ToleranceOverrides,
}

fn to_c64(z: Complex) -> c64 {
    c64::new(z[0], z[1])
}

fn from_c64(z: c64) -> Complex {
    // normalizes −0.0 so files do not depend on how a zero was produced
    [z.re + 0.0, z.im + 0.0]
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn dense_matrix(rows: &[Vec<Complex>], dim: usize, what: &str) -> Result<DenseOperator> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(invalid(format!("{what} must be a {dim}x{dim} matrix")));
    }
    let rows: Vec<Vec<c64>> = rows.iter().map(|r| r.iter().copied().map(to_c64).collect()).collect();
    DenseOperator::from_rows(&rows)
}

fn matrix_rows(op: &DenseOperator) -> Vec<Vec<Complex>> {
    (0..op.dim())
        .map(|i| (0..op.dim()).map(|j| from_c64(op.entry(i, j))).collect())
        .collect()
}

fn is_scalar(op: &DenseOperator) -> Option<c64> {
    let c = op.entry(0, 0);
    let d = op.dim();
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { c } else { c64::new(0.0, 0.0) };
            if op.entry(i, j) != want {
                return None;
            }
        }
    }
    Some(c)
}

fn monomial(shape: LatticeShape, spec: &OperatorSpec, what: &str) -> Result<MonomialOperator> {
    if spec.entries.is_some() {
        return Err(invalid(format!("{what}: lattice operators take sigma/delta/weight, not entries")));
    }
    let d = shape.dim();
    let sigma = match &spec.sigma {
        Some(a) => a.clone(),
        None => (0..d).map(|p| (0..d).map(|q| i64::from(p == q)).collect()).collect(),
    };
    let delta = spec.delta.clone().unwrap_or_else(|| vec![0; d]);
    if sigma.len() != d || delta.len() != d {
        return Err(invalid(format!("{what}: sigma and delta must have dimension {d}")));
    }
    let map = AffineMap::new(sigma, delta)?;
    MonomialOperator::new(shape, map, spec.weight.clone().unwrap_or_default())
        .map_err(|e| invalid(format!("{what}: {e}")))
}

fn monomial_spec(op: &MonomialOperator) -> OperatorSpec {
    OperatorSpec {
        entries: None,
        sigma: Some(op.sigma().matrix().to_vec()),
        delta: Some(op.sigma().delta().to_vec()),
        weight: Some(op.weight().clone()),
    }
}

fn twist_pair(spec: &TwistSpec, n: usize) -> Result<(usize, usize)> {
    let [i, j] = spec.pair;
    if i == 0 || j == 0 || i > n || j > n || i == j {
        return Err(invalid(format!("twist pair ({i}, {j}) is not a pair of distinct indices in 1..={n}")));
    }
    Ok((i - 1, j - 1))
}

/// A parsed file turned into a tuple.
#[derive(Debug, Clone)]
pub enum LoadedTuple {
    Dense(TwistedTuple),
    Lattice { tuple: LatticeTuple, boundary: Boundary },
}

impl TupleFile {
    /// Syntax and type errors carry the line and column of the offending
    /// token.
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.format_version != FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    /// Reads a file and also returns its raw bytes (for digests).
    pub fn read(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
            line: 1,
            column: e.valid_up_to() + 1,
            message: "file is not valid UTF-8".into(),
        })?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn to_json(&self) -> String {
        render_json(&serde_json::to_value(self).expect("tuple files serialize"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn from_dense(t: &TwistedTuple) -> Self {
        let operators = t
            .ops()
            .iter()
            .map(|op| OperatorSpec {
                entries: Some(matrix_rows(op)),
                ..OperatorSpec::default()
            })
            .collect();
        let twists = t
            .twist()
            .stored()
            .map(|(&(i, j), u)| {
                let (scalar, entries) = match is_scalar(u) {
                    Some(c) => (Some(from_c64(c)), None),
                    None => (None, Some(matrix_rows(u))),
                };
                TwistSpec {
                    pair: [i + 1, j + 1],
                    scalar,
                    entries,
                    sigma: None,
                    delta: None,
                    weight: None,
                }
            })
            .collect();
        let tol = *t.tol();
        let d = ToleranceProfile::default();
        let tolerance = ToleranceOverrides {
            rank_rtol: (tol.rank_rtol != d.rank_rtol).then_some(tol.rank_rtol),
            residual_tol: (tol.residual_tol != d.residual_tol).then_some(tol.residual_tol),
            stabilization_window: (tol.stabilization_window != d.stabilization_window)
                .then_some(tol.stabilization_window),
        };
        Self {
            format_version: FORMAT_VERSION,
            kind: TupleKind::Dense,
            name: None,
            seed: None,
            dim: Some(t.dim()),
            shape: None,
            boundary: None,
            operators,
            twists,
            tolerance,
        }
    }

    pub fn from_lattice(t: &LatticeTuple, boundary: Boundary) -> Self {
        let operators = t.ops().iter().map(monomial_spec).collect();
        let twists = t
            .upper_twists()
            .filter(|(_, u)| **u != MonomialOperator::identity(t.shape()))
            .map(|((i, j), u)| {
                let op = monomial_spec(u);
                TwistSpec {
                    pair: [i + 1, j + 1],
                    scalar: None,
                    entries: None,
                    sigma: op.sigma,
                    delta: op.delta,
                    weight: op.weight,
                }
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            kind: TupleKind::Lattice,
            name: None,
            seed: None,
            dim: None,
            shape: Some(t.shape()),
            boundary: Some(boundary),
            operators,
            twists,
            tolerance: ToleranceOverrides::default(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// `base` with the file's overrides applied.
    pub fn tolerance(&self, base: ToleranceProfile) -> Result<ToleranceProfile> {
        self.tolerance.apply(base)
    }

    /// Dense tuple in audit mode; the relation report is attached.
    pub fn dense_tuple(&self, tol: ToleranceProfile) -> Result<TwistedTuple> {
        if self.kind != TupleKind::Dense {
            return Err(invalid("not a dense tuple file"));
        }
        let dim = self.dim.ok_or_else(|| invalid("dense files need \"dim\""))?;
        if self.shape.is_some() || self.boundary.is_some() {
            return Err(invalid("dense files take no \"shape\" or \"boundary\""));
        }
        let n = self.operators.len();
        if n == 0 {
            return Err(invalid("a tuple needs at least one operator"));
        }
        let mut ops = Vec::with_capacity(n);
        for (k, spec) in self.operators.iter().enumerate() {
            if spec.sigma.is_some() || spec.delta.is_some() || spec.weight.is_some() {
                return Err(invalid(format!("operator {}: dense operators take entries only", k + 1)));
            }
            let rows = spec
                .entries
                .as_ref()
                .ok_or_else(|| invalid(format!("operator {} has no entries", k + 1)))?;
            ops.push(dense_matrix(rows, dim, &format!("operator {}", k + 1))?);
        }
        let mut units = Vec::with_capacity(self.twists.len());
        for spec in &self.twists {
            let pair = twist_pair(spec, n)?;
            let what = format!("twist ({}, {})", spec.pair[0], spec.pair[1]);
            let u = match (&spec.scalar, &spec.entries) {
                (Some(z), None) => DenseOperator::scalar(dim, to_c64(*z)),
                (None, Some(rows)) => dense_matrix(rows, dim, &what)?,
                _ => return Err(invalid(format!("{what}: give exactly one of scalar or entries"))),
            };
            if spec.sigma.is_some() || spec.delta.is_some() || spec.weight.is_some() {
                return Err(invalid(format!("{what}: dense twists take scalar or entries")));
            }
            units.push((pair, u));
        }
        let twist = TwistFamily::new(n, dim, units)?;
        TwistedTuple::audit(ops, twist, tol)
    }

    pub fn lattice_tuple(&self) -> Result<LatticeTuple> {
        if self.kind != TupleKind::Lattice {
            return Err(invalid("not a lattice tuple file"));
        }
        let shape = self.shape.ok_or_else(|| invalid("lattice files need \"shape\""))?;
        let shape = LatticeShape::new(shape.d_plus, shape.d_bi)?;
        if self.dim.is_some() {
            return Err(invalid("lattice files take \"shape\", not \"dim\""));
        }
        let ops = self
            .operators
            .iter()
            .enumerate()
            .map(|(k, spec)| monomial(shape, spec, &format!("operator {}", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        let n = ops.len();
        let mut twists = Vec::with_capacity(self.twists.len());
        for spec in &self.twists {
            let pair = twist_pair(spec, n)?;
            let what = format!("twist ({}, {})", spec.pair[0], spec.pair[1]);
            let u = match spec.scalar {
                Some(z) => {
                    if spec.sigma.is_some() || spec.delta.is_some() || spec.weight.is_some() {
                        return Err(invalid(format!("{what}: give scalar or an operator, not both")));
                    }
                    let z = to_c64(z);
                    MonomialOperator::scalar(shape, z.norm(), z.arg())?
                }
                None => monomial(shape, &spec.operator(), &what)?,
            };
            twists.push((pair, u));
        }
        LatticeTuple::new(shape, ops, twists)
    }

    pub fn load(&self, tol: ToleranceProfile) -> Result<LoadedTuple> {
        match self.kind {
            TupleKind::Dense => Ok(LoadedTuple::Dense(self.dense_tuple(tol)?)),
            TupleKind::Lattice => Ok(LoadedTuple::Lattice {
                tuple: self.lattice_tuple()?,
                boundary: self.boundary.unwrap_or_default(),
            }),
        }
    }
}

/// Pretty JSON with arrays of scalars (and arrays of such arrays, e.g.
/// matrix rows of `[re, im]` pairs) kept on one line. Ends with a newline.
pub fn render_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_array() && !x.is_object()),
        _ => !v.is_object(),
    }
}

fn inline(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(is_flat),
        Value::Object(_) => false,
        _ => true,
    }
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth + 1);
    let close = "  ".repeat(depth);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (k, (key, val)) in map.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(val, depth + 1, out);
                if k + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&close);
            out.push('}');
        }
        Value::Array(items) if !items.is_empty() && !inline(v) => {
            out.push_str("[\n");
            for (k, val) in items.iter().enumerate() {
                out.push_str(&pad);
                write_value(val, depth + 1, out);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&close);
            out.push(']');
        }
        Value::Array(items) => {
            out.push('[');
            for (k, val) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_value(val, depth + 1, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Parses a real number with an optional trailing `pi`/`π` factor, as in
/// `0.4pi`, `2π/5` or `-1.5`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = || invalid(format!("cannot read angle {s:?}"));
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), Some(b.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (t, None),
    };
    let (coef, scale) = if let Some(c) = num.strip_suffix("pi").or_else(|| num.strip_suffix('π')) {
        let c = c.trim().trim_end_matches('*').trim();
        let c = match c {
            "" => 1.0,
            "-" => -1.0,
            _ => c.parse::<f64>().map_err(|_| bad())?,
        };
        (c, std::f64::consts::PI)
    } else {
        (num.parse::<f64>().map_err(|_| bad())?, 1.0)
    };
    let v = coef * scale / den.unwrap_or(1.0);
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}
