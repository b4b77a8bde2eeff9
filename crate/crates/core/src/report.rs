//! Reports written by `twold`: relation checks, dense decompositions and
//! lattice classifications.
//!
//! Every report renders to JSON or to a text summary. Floats are rounded to
//! 12 significant digits and residual-like values below [`NOISE_FLOOR`] print
//! as 0, so reports compare byte for byte across thread counts. The only
//! run-dependent field is `generated_at_unix`, which canonical output omits.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::canonical::{chain_unitary_part, unitary_part};
use crate::error::{Error, Result};
use crate::io::{render_json, TupleFile, TupleKind};
use crate::lattice::{
    densify, format_index, DensifiedTuple, oracle_agreement, slice_dimensions, verify_lattice_relations, Boundary, LatticeRelationReport,
    LatticeShape, LatticeTuple, OracleAgreement, SliceCounts,
};
use crate::multi::{
    decompose_with, engine_formula_gap, pair_formula_subspaces, CoordinateClass, DecomposeOptions, Diagnostics,
    Parallelism, SliceLabel,
};
use crate::subspace::subspace_gap;
use crate::tolerance::ToleranceProfile;
use crate::twisted::{verify_relations, RelationReport};

pub const TOOL: &str = "twold";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Residual-like values below this print as 0.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Keys whose float values are thresholds rather than residuals.
const EXACT_KEYS: [&str; 2] = ["tolerance", "margin"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Text,
}

/// `sha256:<hex>` of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    let mut s = String::from("sha256:");
    for b in Sha256::digest(bytes).iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn canonicalize(v: &mut Value, flush: bool) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let y = if flush && x.abs() < NOISE_FLOOR { 0.0 } else { round12(x) };
            *v = serde_json::Number::from_f64(y + 0.0).map_or(Value::Null, Value::Number);
        }
        Value::Array(a) => a.iter_mut().for_each(|x| canonicalize(x, flush)),
        Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                canonicalize(x, flush && !EXACT_KEYS.contains(&k.as_str()));
            }
        }
        _ => {}
    }
}

/// Report value with rounded floats.
pub fn to_canonical_value<T: Serialize>(r: &T) -> Value {
    let mut v = serde_json::to_value(r).expect("reports serialize");
    canonicalize(&mut v, true);
    v
}

fn fmt_f(x: f64) -> String {
    let x = if x.abs() < NOISE_FLOOR { 0.0 } else { round12(x) };
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.11e}")
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
}

impl Header {
    fn new(command: &'static str, canonical: bool) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            generated_at_unix: (!canonical).then(now_unix),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub digest: String,
    pub kind: TupleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<LatticeShape>,
}

impl InputInfo {
    pub fn new(file: &TupleFile, bytes: &[u8]) -> Self {
        Self {
            digest: digest(bytes),
            kind: file.kind,
            name: file.name.clone(),
            seed: file.seed,
            n: file.operators.len(),
            dim: file.dim,
            shape: file.shape,
        }
    }

    fn describe(&self) -> String {
        let size = match (self.dim, self.shape) {
            (Some(d), _) => format!("dim = {d}"),
            (_, Some(s)) => format!("shape = Z_+^{} x Z^{}", s.d_plus, s.d_bi),
            _ => String::new(),
        };
        let kind = match self.kind {
            TupleKind::Dense => "dense",
            TupleKind::Lattice => "lattice",
        };
        format!("{kind}, n = {}, {size}", self.n)
    }
}

/// Dense relation report of a densified lattice tuple, measured on the
/// relation interior.
#[derive(Debug, Clone, Serialize)]
pub struct WindowRelations {
    pub window: usize,
    pub boundary: Boundary,
    pub support_dim: usize,
    pub report: RelationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub header: Header,
    pub input: InputInfo,
    pub tolerance: ToleranceProfile,
    pub pass: bool,
    pub first_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense: Option<RelationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeRelationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub densified: Option<WindowRelations>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub tol: ToleranceProfile,
    pub window: usize,
    pub canonical: bool,
}

fn window_relations(t: &LatticeTuple, window: usize, boundary: Boundary, tol: ToleranceProfile) -> Result<(WindowRelations, DensifiedTuple)> {
    let d = densify(t, window, boundary)?;
    let support = d.relation_support(tol)?;
    let report = verify_relations(&d.ops, &d.twist, &tol, Some(&support))?;
    Ok((
        WindowRelations {
            window,
            boundary,
            support_dim: support.dim(),
            report,
        },
        d,
    ))
}

pub fn run_verify(file: &TupleFile, bytes: &[u8], opts: &VerifyOptions) -> Result<VerifyReport> {
    let tol = file.tolerance(opts.tol)?;
    let mut report = VerifyReport {
        header: Header::new("verify", opts.canonical),
        input: InputInfo::new(file, bytes),
        tolerance: tol,
        pass: true,
        first_failure: None,
        dense: None,
        lattice: None,
        densified: None,
    };
    match file.kind {
        TupleKind::Dense => {
            let t = file.dense_tuple(tol)?;
            let r = t.report().clone();
            report.pass = r.pass;
            report.first_failure = r.first_failure.clone();
            report.dense = Some(r);
        }
        TupleKind::Lattice => {
            let t = file.lattice_tuple()?;
            let exact = verify_lattice_relations(&t, opts.window)?;
            let (win, _) = window_relations(&t, opts.window, file.boundary.unwrap_or_default(), tol)?;
            report.pass = exact.pass && win.report.pass;
            report.first_failure = exact
                .first_failure
                .clone()
                .or_else(|| win.report.first_failure.as_ref().map(|f| format!("densified window: {f}")));
            report.lattice = Some(exact);
            report.densified = Some(win);
        }
    }
    Ok(report)
}

impl VerifyReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => render_json(&to_canonical_value(self)),
            Format::Text => {
                let mut s = String::new();
                let _ = writeln!(s, "{TOOL} {VERSION} verify");
                let _ = writeln!(s, "input      {} ({})", self.input.digest, self.input.describe());
                let _ = writeln!(s, "tolerance  {}", fmt_f(self.tolerance.residual_tol));
                if let Some(r) = &self.dense {
                    dense_relation_lines(&mut s, r);
                }
                if let Some(l) = &self.lattice {
                    let _ = writeln!(
                        s,
                        "exact      window {} ({} indices), {}",
                        l.window,
                        l.indices,
                        if l.pass { "all relations hold" } else { "relations fail" }
                    );
                    for c in l.checks.iter().filter(|c| c.failures > 0) {
                        let at = c.first.as_ref().map(|ce| format_index(&ce.index)).unwrap_or_default();
                        let _ = writeln!(s, "  {}: {} of {} indices fail, first at m = {at}", c.name(), c.failures, c.checked);
                    }
                }
                if let Some(w) = &self.densified {
                    let _ = writeln!(s, "densified  window {}, relation interior of dim {}", w.window, w.support_dim);
                    dense_relation_lines(&mut s, &w.report);
                }
                match &self.first_failure {
                    None => s.push_str("PASS\n"),
                    Some(f) => {
                        let _ = writeln!(s, "FAIL {f}");
                    }
                }
                s
            }
        }
    }
}

fn dense_relation_lines(s: &mut String, r: &RelationReport) {
    let fwd = r.pairs.iter().map(|p| p.forward).fold(0.0, f64::max);
    let adj = r.pairs.iter().map(|p| p.adjoint).fold(0.0, f64::max);
    let tw = r.twist_commute.iter().map(|c| c.residual).fold(0.0, f64::max);
    let _ = writeln!(
        s,
        "relations  forward {}  adjoint {}  twist {}",
        fmt_f(fwd),
        fmt_f(adj),
        fmt_f(tw)
    );
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceEntry {
    pub label: SliceLabel,
    pub dim: usize,
    pub classification: Vec<CoordinateClass>,
    pub reducing: Vec<f64>,
    pub relation_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossChecks {
    pub m_cap: usize,
    /// Gap between the engine's slices and the explicit pair formulas (`n = 2`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine_formula_gap: Option<f64>,
    /// Gap between the fixed-point and chain unitary parts (`n = 1`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    #[serde(flatten)]
    pub agreement: OracleAgreement,
    pub fraction: f64,
}

impl From<OracleAgreement> for OracleSummary {
    fn from(a: OracleAgreement) -> Self {
        Self {
            fraction: a.fraction(),
            agreement: a,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    #[serde(flatten)]
    pub header: Header,
    pub input: InputInfo,
    pub tolerance: ToleranceProfile,
    pub relations: RelationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub densified: Option<WindowRelations>,
    pub slices: Vec<SliceEntry>,
    pub diagnostics: Diagnostics,
    pub cross_checks: CrossChecks,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeRun {
    pub tol: ToleranceProfile,
    /// Power cap for the chain cross-check; `None` means `2·dim`.
    pub m_cap: Option<usize>,
    pub audit: bool,
    pub threads: Option<usize>,
    /// Window for lattice files.
    pub window: usize,
    /// Interior margin of the lattice/dense comparison.
    pub margin: i64,
    pub canonical: bool,
}

impl Default for DecomposeRun {
    fn default() -> Self {
        Self {
            tol: ToleranceProfile::default(),
            m_cap: None,
            audit: false,
            threads: None,
            window: 10,
            margin: 3,
            canonical: true,
        }
    }
}

pub fn run_decompose(file: &TupleFile, bytes: &[u8], run: &DecomposeRun) -> Result<DecompositionReport> {
    let tol = file.tolerance(run.tol)?;
    let mut warnings = Vec::new();
    let (tuple, densified, lattice) = match file.kind {
        TupleKind::Dense => (file.dense_tuple(tol)?, None, None),
        TupleKind::Lattice => {
            let t = file.lattice_tuple()?;
            let boundary = file.boundary.unwrap_or_default();
            let (win, d) = window_relations(&t, run.window, boundary, tol)?;
            let tuple = d.tuple(tol)?;
            if win.report.pass && !tuple.report().pass {
                warnings.push(format!(
                    "relations hold on the relation interior of the window only (edge: {})",
                    tuple.report().first_failure.clone().unwrap_or_default()
                ));
            }
            (tuple, Some(win), Some((t, boundary)))
        }
    };
    let pass = match &densified {
        Some(w) => w.report.pass,
        None => tuple.report().pass,
    };
    if !pass {
        let why = densified
            .as_ref()
            .map_or(tuple.report(), |w| &w.report)
            .first_failure
            .clone()
            .unwrap_or_default();
        if !run.audit {
            return Err(Error::RelationFailure(why));
        }
        warnings.push(format!("audit mode: {why}"));
    }
    let opts = DecomposeOptions {
        parallelism: run.threads.map_or(Parallelism::Sequential, Parallelism::Threads),
        audit: run.audit || densified.is_some(),
    };
    let result = decompose_with(&tuple, &opts)?;
    let slices = result
        .slices
        .iter()
        .map(|s| SliceEntry {
            label: s.label,
            dim: s.dim(),
            classification: s.classification.clone(),
            reducing: s.reducing.clone(),
            relation_residual: s.relation_residual,
        })
        .collect();
    let m_cap = run.m_cap.unwrap_or(2 * tuple.dim()).max(1);
    let mut cross = CrossChecks {
        m_cap,
        engine_formula_gap: None,
        chain_gap: None,
    };
    match tuple.n() {
        1 => {
            let fixed = unitary_part(tuple.op(0), &tol)?;
            let chain = chain_unitary_part(tuple.op(0), &tol, m_cap)?;
            cross.chain_gap = Some(if fixed.dim() == chain.dim() { subspace_gap(&fixed, &chain)? } else { 1.0 });
        }
        2 => {
            let f = pair_formula_subspaces(&tuple)?;
            cross.engine_formula_gap = Some(engine_formula_gap(&result, &f)?);
        }
        _ => {}
    }
    let oracle = match &lattice {
        Some((t, boundary)) if t.is_isometric() => {
            match oracle_agreement(t, run.window, run.margin, *boundary, 4 * run.window, tol) {
                Ok(a) => Some(a.into()),
                Err(e) => {
                    warnings.push(format!("lattice/dense comparison skipped: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    Ok(DecompositionReport {
        header: Header::new("decompose", run.canonical),
        input: InputInfo::new(file, bytes),
        tolerance: tol,
        relations: tuple.report().clone(),
        densified,
        slices,
        diagnostics: result.diagnostics,
        cross_checks: cross,
        oracle,
        warnings,
    })
}

impl DecompositionReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => render_json(&to_canonical_value(self)),
            Format::Text => {
                let mut s = String::new();
                let _ = writeln!(s, "{TOOL} {VERSION} decompose");
                let _ = writeln!(s, "input      {} ({})", self.input.digest, self.input.describe());
                if let Some(seed) = self.input.seed {
                    let _ = writeln!(s, "seed       {seed}");
                }
                match &self.densified {
                    Some(w) => {
                        let _ = writeln!(s, "window     {} ({:?}), relation interior of dim {}", w.window, w.boundary, w.support_dim);
                        dense_relation_lines(&mut s, &w.report);
                    }
                    None => dense_relation_lines(&mut s, &self.relations),
                }
                s.push_str("slices\n");
                for e in self.slices.iter().filter(|e| e.dim > 0) {
                    let kinds: Vec<String> = e
                        .classification
                        .iter()
                        .map(|c| {
                            let k = match c.kind {
                                crate::multi::CoordinateKind::Unitary => "unitary",
                                crate::multi::CoordinateKind::Cnu => "cnu",
                            };
                            format!("T_{} {k}{}", c.index, if c.holds { "" } else { " (fails)" })
                        })
                        .collect();
                    let reducing = e.reducing.iter().copied().fold(0.0, f64::max);
                    let _ = writeln!(
                        s,
                        "  {:<12} dim {:>4}  {}  reducing {}",
                        e.label.to_string(),
                        e.dim,
                        kinds.join(", "),
                        fmt_f(reducing)
                    );
                }
                let d = &self.diagnostics;
                let _ = writeln!(s, "dims       {} of {}", d.dim_sum, d.ambient_dim);
                let _ = writeln!(s, "complete   {}", fmt_f(d.completeness_residual));
                let _ = writeln!(s, "orthogonal {}", fmt_f(d.orthogonality_max));
                if let Some(g) = self.cross_checks.engine_formula_gap {
                    let _ = writeln!(s, "formulas   gap {}", fmt_f(g));
                }
                if let Some(g) = self.cross_checks.chain_gap {
                    let _ = writeln!(s, "chain      gap {} (m_cap {})", fmt_f(g), self.cross_checks.m_cap);
                }
                if let Some(o) = &self.oracle {
                    let _ = writeln!(s, "oracle     {} of {} interior indices agree", o.agreement.agreed, o.agreement.compared);
                }
                for w in &self.warnings {
                    let _ = writeln!(s, "warning    {w}");
                }
                s
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexEntry {
    pub index: String,
    pub label: Option<SliceLabel>,
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WoldReport {
    #[serde(flatten)]
    pub header: Header,
    pub input: InputInfo,
    pub step_cap: usize,
    /// Bilateral lattice coordinates (1-based); every `T_i` moving along them
    /// acts unitarily there.
    pub unitary_directions: Vec<usize>,
    pub slices: SliceCounts,
    pub indices: Vec<IndexEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
}

#[derive(Debug, Clone, Copy)]
pub struct WoldRun {
    pub window: usize,
    /// `None` means `4·window`.
    pub step_cap: Option<usize>,
    pub oracle: bool,
    pub margin: i64,
    pub tol: ToleranceProfile,
    pub canonical: bool,
}

/// Fails with [`Error::NonIsometricTuple`] when some `T_i` has non-unimodular
/// weights.
pub fn run_wold(file: &TupleFile, bytes: &[u8], run: &WoldRun) -> Result<WoldReport> {
    let tol = file.tolerance(run.tol)?;
    let t = file.lattice_tuple()?;
    t.ensure_isometric().map_err(|e| match e {
        Error::Lattice(msg) => Error::NonIsometricTuple(msg),
        other => other,
    })?;
    let step_cap = run.step_cap.unwrap_or(4 * run.window);
    let counts = slice_dimensions(&t, run.window, step_cap)?;
    let indices = counts
        .classifications
        .iter()
        .map(|c| IndexEntry {
            index: format_index(&c.index),
            label: c.label,
            boundary: c.boundary,
        })
        .collect();
    let shape = t.shape();
    let oracle = if run.oracle {
        let boundary = file.boundary.unwrap_or_default();
        Some(oracle_agreement(&t, run.window, run.margin, boundary, step_cap, tol)?.into())
    } else {
        None
    };
    Ok(WoldReport {
        header: Header::new("wold", run.canonical),
        input: InputInfo::new(file, bytes),
        step_cap,
        unitary_directions: (shape.d_plus + 1..=shape.dim()).collect(),
        slices: counts,
        indices,
        oracle,
    })
}

impl WoldReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => render_json(&to_canonical_value(self)),
            Format::Text => {
                let mut s = String::new();
                let c = &self.slices;
                let _ = writeln!(s, "{TOOL} {VERSION} wold");
                let _ = writeln!(s, "input      {} ({})", self.input.digest, self.input.describe());
                let _ = writeln!(s, "window     {} ({} indices), step cap {}", c.window, c.total, self.step_cap);
                if !self.unitary_directions.is_empty() {
                    let dirs: Vec<String> = self.unitary_directions.iter().map(|d| format!("m_{d}")).collect();
                    let _ = writeln!(s, "unitary    bilateral directions {}", dirs.join(", "));
                }
                s.push_str("slices\n");
                for (label, n) in &c.counts {
                    let _ = writeln!(s, "  {:<12} {n}", label.to_string());
                }
                let _ = writeln!(s, "undecided  {}", c.undecided.len());
                let _ = writeln!(s, "boundary   {}", c.boundary.len());
                if let Some(o) = &self.oracle {
                    let _ = writeln!(
                        s,
                        "oracle     {} of {} interior indices agree ({:.1}%)",
                        o.agreement.agreed,
                        o.agreement.compared,
                        100.0 * o.fraction
                    );
                }
                s
            }
        }
    }
}
