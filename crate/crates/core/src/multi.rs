//! The `2^n`-slice decomposition of a twisted tuple: split by the canonical
//! decomposition of `T_1`, then split every piece by that of `T_2`, and so on.
//! A slice label `A ⊆ {1..n}` lists the coordinates acting completely
//! non-unitarily; the others act unitarily.
//!
//! For pairs the explicit kernel-chain / range-span formulas are computed
//! separately by [`pair_formula_subspaces`] as a cross-check.

use std::fmt;

use faer::Mat;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::canonical;
use crate::dense;
use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use crate::subspace::{self, SubspaceBasis};
use crate::tolerance::ToleranceProfile;
use crate::twisted::{check_permutation, TwistedTuple};

/// Subset of `{1..n}` stored as a bitmask: bit `i` set iff `i + 1` is a member.
/// Ordering by mask is the binary-counter order `∅, {1}, {2}, {1,2}, {3}, …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SliceLabel {
    n: usize,
    mask: u32,
}

impl SliceLabel {
    pub const MAX_N: usize = 16;

    pub fn new(n: usize, mask: u32) -> Result<Self> {
        if n > Self::MAX_N || (n < 32 && mask >> n != 0) {
            return Err(Error::InvalidParameter(format!("mask {mask:#b} is not a subset of 1..{n}")));
        }
        Ok(Self { n, mask })
    }

    /// From 1-based members.
    pub fn from_members(n: usize, members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &m in members {
            if m == 0 || m > n {
                return Err(Error::IndexOutOfRange { index: m, len: n });
            }
            mask |= 1 << (m - 1);
        }
        Self::new(n, mask)
    }

    pub fn all(n: usize) -> impl Iterator<Item = SliceLabel> {
        (0..1u32 << n).map(move |mask| SliceLabel { n, mask })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// 0-based membership test.
    pub fn contains(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    /// 1-based members, increasing.
    pub fn members(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.contains(i)).map(|i| i + 1).collect()
    }

    fn with(&self, i: usize) -> Self {
        Self {
            n: self.n,
            mask: self.mask | 1 << i,
        }
    }

    /// Image under a permutation of positions: member `k` (0-based) maps to `perm[k]`.
    pub fn mapped(&self, perm: &[usize]) -> Self {
        let mut mask = 0;
        for k in 0..self.n {
            if self.contains(k) {
                mask |= 1 << perm[k];
            }
        }
        Self { n: self.n, mask }
    }
}

impl fmt::Display for SliceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m: Vec<String> = self.members().iter().map(|x| x.to_string()).collect();
        write!(f, "{{{}}}", m.join(","))
    }
}

impl Serialize for SliceLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateKind {
    Unitary,
    Cnu,
}

/// Classification of one coordinate on one slice.
///
/// For `Unitary`, `residual = max(‖B*B − I‖, ‖BB* − I‖)` of the block; for
/// `Cnu`, `unitary_part_dim` is the dimension of the block's unitary part and
/// `residual` is the block norm excess `max(‖B‖ − 1, 0)`.
#[derive(Debug, Clone, Serialize)]
pub struct CoordinateClass {
    pub index: usize,
    pub kind: CoordinateKind,
    pub holds: bool,
    pub residual: f64,
    pub unitary_part_dim: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DecompositionSlice {
    pub label: SliceLabel,
    pub space: SubspaceBasis,
    /// `B* T_i B` for each `i`.
    pub blocks: Vec<DenseOperator>,
    pub classification: Vec<CoordinateClass>,
    /// Reducing residual of each `T_i` against the slice.
    pub reducing: Vec<f64>,
    /// Largest relation residual of the tuple restricted to the slice (zero for
    /// empty slices).
    pub relation_residual: f64,
}

impl DecompositionSlice {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub dim_sum: usize,
    pub ambient_dim: usize,
    /// `‖[B_A]*[B_A] − I‖` over the concatenated slice bases.
    pub completeness_residual: f64,
    /// Largest `|⟨x, y⟩|` between basis vectors of distinct slices.
    pub orthogonality_max: f64,
    pub max_reducing_residual: f64,
    pub max_relation_residual: f64,
    pub max_classification_residual: f64,
    pub all_classified: bool,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub n: usize,
    pub dim: usize,
    /// All `2^n` slices in binary-counter order.
    pub slices: Vec<DecompositionSlice>,
    pub diagnostics: Diagnostics,
}

impl DecompositionResult {
    pub fn slice(&self, label: SliceLabel) -> &DecompositionSlice {
        &self.slices[label.mask() as usize]
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &DecompositionSlice> {
        self.slices.iter().filter(|s| s.dim() > 0)
    }
}

/// How slices at one recursion level are processed. Every setting gives the
/// same bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    Threads(usize),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DecomposeOptions {
    pub parallelism: Parallelism,
    /// Run even when the tuple fails verification.
    pub audit: bool,
}

/// [`decompose_with`] with default options (sequential, strict).
pub fn decompose(t: &TwistedTuple) -> Result<DecompositionResult> {
    decompose_with(t, &DecomposeOptions::default())
}

/// Factor by which a reducing residual may exceed `residual_tol` before the
/// recursion gives up.
const BLOWUP_FACTOR: f64 = 100.0;

fn split_slice(
    t: &TwistedTuple,
    k: usize,
    label: SliceLabel,
    space: &SubspaceBasis,
) -> Result<[(SliceLabel, SubspaceBasis); 2]> {
    let tol = t.tol();
    if space.is_zero() {
        return Ok([(label, space.clone()), (label.with(k), space.clone())]);
    }
    let (block, off) = t.op(k).restrict_to_reducing(space)?;
    if off > BLOWUP_FACTOR * tol.residual_tol {
        return Err(Error::ReducingBlowup {
            label: label.to_string(),
            index: k + 1,
            residual: off,
        });
    }
    let split = canonical::canonical_decompose(&block, tol)?;
    let u = SubspaceBasis::from_raw(space.map_by_coords(split.unitary_space.columns()), *tol);
    let c = SubspaceBasis::from_raw(space.map_by_coords(split.cnu_space.columns()), *tol);
    Ok([(label, u), (label.with(k), c)])
}

fn run_level<F, T>(par: Parallelism, items: &[T], f: F) -> Result<Vec<[(SliceLabel, SubspaceBasis); 2]>>
where
    F: Fn(&T) -> Result<[(SliceLabel, SubspaceBasis); 2]> + Sync + Send,
    T: Sync,
{
    match par {
        Parallelism::Sequential | Parallelism::Threads(0 | 1) => items.iter().map(&f).collect(),
        Parallelism::Threads(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| items.par_iter().map(&f).collect())
        }
    }
}

pub fn decompose_with(t: &TwistedTuple, opts: &DecomposeOptions) -> Result<DecompositionResult> {
    if !opts.audit && !t.report().pass {
        return Err(Error::RelationFailure(t.report().first_failure.clone().unwrap_or_default()));
    }
    let n = t.n();
    if n > SliceLabel::MAX_N {
        return Err(Error::InvalidParameter(format!("at most {} operators supported", SliceLabel::MAX_N)));
    }
    let tol = *t.tol();
    let dim = t.dim();
    let mut current = vec![(SliceLabel { n, mask: 0 }, SubspaceBasis::full(dim, tol))];
    for k in 0..n {
        let next = run_level(opts.parallelism, &current, |(label, space)| split_slice(t, k, *label, space))?;
        current = next.into_iter().flatten().collect();
    }
    current.sort_by_key(|(l, _)| l.mask);

    let slices = current
        .into_iter()
        .map(|(label, space)| finish_slice(t, label, space))
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = diagnostics(dim, &slices);
    Ok(DecompositionResult {
        n,
        dim,
        slices,
        diagnostics,
    })
}

fn unitarity_residual(b: &DenseOperator) -> Result<f64> {
    if b.dim() == 0 {
        return Ok(0.0);
    }
    let id = DenseOperator::identity(b.dim());
    let a = b.adjoint();
    Ok(a.compose(b)?.distance(&id)?.max(b.compose(&a)?.distance(&id)?))
}

fn classify_blocks(label: SliceLabel, blocks: &[DenseOperator], tol: &ToleranceProfile) -> Result<Vec<CoordinateClass>> {
    let mut out = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        if b.dim() == 0 {
            let kind = if label.contains(i) { CoordinateKind::Cnu } else { CoordinateKind::Unitary };
            out.push(CoordinateClass {
                index: i + 1,
                kind,
                holds: true,
                residual: 0.0,
                unitary_part_dim: (kind == CoordinateKind::Cnu).then_some(0),
            });
        } else if label.contains(i) {
            let up = canonical::unitary_part(b, tol)?.dim();
            out.push(CoordinateClass {
                index: i + 1,
                kind: CoordinateKind::Cnu,
                holds: up == 0,
                residual: (b.norm() - 1.0).max(0.0),
                unitary_part_dim: Some(up),
            });
        } else {
            let r = unitarity_residual(b)?;
            out.push(CoordinateClass {
                index: i + 1,
                kind: CoordinateKind::Unitary,
                holds: r <= tol.residual_tol,
                residual: r,
                unitary_part_dim: None,
            });
        }
    }
    Ok(out)
}

fn finish_slice(t: &TwistedTuple, label: SliceLabel, space: SubspaceBasis) -> Result<DecompositionSlice> {
    let mut blocks = Vec::with_capacity(t.n());
    let mut reducing = Vec::with_capacity(t.n());
    for op in t.ops() {
        let (b, off) = op.restrict_to_reducing(&space)?;
        blocks.push(b);
        reducing.push(off);
    }
    let classification = classify_blocks(label, &blocks, t.tol())?;
    let relation_residual = if space.is_zero() {
        0.0
    } else {
        let r = t.restrict(&space)?;
        r.report().max_pair_residual()
    };
    Ok(DecompositionSlice {
        label,
        space,
        blocks,
        classification,
        reducing,
        relation_residual,
    })
}

fn diagnostics(dim: usize, slices: &[DecompositionSlice]) -> Diagnostics {
    let dim_sum = slices.iter().map(|s| s.dim()).sum();
    let refs: Vec<_> = slices.iter().map(|s| s.space.columns()).collect();
    let all = dense::hstack(dim, &refs);
    let gram = dense::matmul(dense::adjoint(all.as_ref()).as_ref(), all.as_ref());
    let completeness_residual = if dim_sum == dim {
        dense::distance_to_identity(gram.as_ref())
    } else {
        f64::INFINITY
    };
    let mut owner = Vec::with_capacity(dim_sum);
    for (k, s) in slices.iter().enumerate() {
        owner.extend(std::iter::repeat(k).take(s.dim()));
    }
    let mut orthogonality_max = 0.0f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            if owner[i] != owner[j] {
                orthogonality_max = orthogonality_max.max(gram[(i, j)].norm());
            }
        }
    }
    let fold = |f: &dyn Fn(&DecompositionSlice) -> f64| slices.iter().map(f).fold(0.0, f64::max);
    Diagnostics {
        dim_sum,
        ambient_dim: dim,
        completeness_residual,
        orthogonality_max,
        max_reducing_residual: fold(&|s| s.reducing.iter().copied().fold(0.0, f64::max)),
        max_relation_residual: fold(&|s| s.relation_residual),
        max_classification_residual: fold(&|s| {
            s.classification
                .iter()
                .filter(|c| c.kind == CoordinateKind::Unitary)
                .map(|c| c.residual)
                .fold(0.0, f64::max)
        }),
        all_classified: slices.iter().all(|s| s.classification.iter().all(|c| c.holds)),
    }
}

/// The four subspaces of a pair from the explicit formulas, with chains cut
/// at `2·dim` of the space they act on.
#[derive(Debug, Clone)]
pub struct PairFormula {
    /// Both unitary; label `∅`.
    pub uu: SubspaceBasis,
    /// `T_1` unitary, `T_2` c.n.u.; label `{2}`.
    pub u_cnu: SubspaceBasis,
    /// `T_1` c.n.u., `T_2` unitary; label `{1}`.
    pub cnu_u: SubspaceBasis,
    /// Both c.n.u.; label `{1,2}`.
    pub cnu_cnu: SubspaceBasis,
}

impl PairFormula {
    /// The four subspaces indexed by label mask.
    pub fn by_mask(&self) -> [&SubspaceBasis; 4] {
        [&self.uu, &self.cnu_u, &self.u_cnu, &self.cnu_cnu]
    }
}

/// `I − T*^m T^m` and `I − T^m T*^m` for `1 ≤ m ≤ m_cap`.
fn defect_chain(t: &DenseOperator, m_cap: usize) -> Result<Vec<DenseOperator>> {
    let id = DenseOperator::identity(t.dim());
    let mut out = Vec::with_capacity(2 * m_cap);
    let mut pw = DenseOperator::identity(t.dim());
    for _ in 0..m_cap {
        pw = pw.compose(t)?;
        let adj = pw.adjoint();
        out.push(id.sub(&adj.compose(&pw)?)?);
        out.push(id.sub(&pw.compose(&adj)?)?);
    }
    Ok(out)
}

/// `within ∩ ⋂ N(X)` over the chain: vectors `B·y` with `X·B·y = 0` for all `X`.
fn chain_kernel(chain: &[DenseOperator], within: &SubspaceBasis, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    if within.is_zero() || chain.is_empty() {
        return Ok(within.clone());
    }
    let parts: Vec<Mat<faer::c64>> = chain.iter().map(|x| dense::matmul(x.mat(), within.columns())).collect();
    let refs: Vec<_> = parts.iter().map(|p| p.as_ref()).collect();
    let y = subspace::null_space_of(dense::vstack(&refs).as_ref(), tol)?;
    Ok(SubspaceBasis::from_raw(within.map_by_coords(y.as_ref()), *tol))
}

/// `⋁ X·within` over the chain.
fn chain_span(chain: &[DenseOperator], within: &SubspaceBasis, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    let n = within.ambient_dim();
    if within.is_zero() || chain.is_empty() {
        return Ok(SubspaceBasis::zero(n, *tol));
    }
    let parts: Vec<Mat<faer::c64>> = chain.iter().map(|x| dense::matmul(x.mat(), within.columns())).collect();
    let refs: Vec<_> = parts.iter().map(|p| p.as_ref()).collect();
    subspace::column_space_of(dense::hstack(n, &refs).as_ref(), tol)
}

/// The pair theorem's formulas: `H_u^1` as the kernel chain of `T_1`,
/// `H_¬u^1` as the span of the ranges of its defect chain, then each of these
/// split the same way by the chain of `T_2` restricted to it.
pub fn pair_formula_subspaces(t: &TwistedTuple) -> Result<PairFormula> {
    if t.n() != 2 {
        return Err(Error::InvalidParameter(format!("pair formulas need n = 2, got {}", t.n())));
    }
    if !t.report().pass {
        return Err(Error::RelationFailure(t.report().first_failure.clone().unwrap_or_default()));
    }
    let tol = t.tol();
    let n = t.dim();
    let full = SubspaceBasis::full(n, *tol);
    let c1 = defect_chain(t.op(0), 2 * n)?;
    let h_u1 = chain_kernel(&c1, &full, tol)?;
    let h_cnu1 = chain_span(&c1, &full, tol)?;
    let split = |within: &SubspaceBasis| -> Result<(SubspaceBasis, SubspaceBasis)> {
        let c2 = defect_chain(t.op(1), 2 * within.dim())?;
        Ok((chain_kernel(&c2, within, tol)?, chain_span(&c2, within, tol)?))
    };
    let (uu, u_cnu) = split(&h_u1)?;
    let (cnu_u, cnu_cnu) = split(&h_cnu1)?;
    Ok(PairFormula {
        uu,
        u_cnu,
        cnu_u,
        cnu_cnu,
    })
}

/// Largest principal-angle gap between the engine's slices and the formula
/// subspaces (`π/2` on any dimension mismatch).
pub fn engine_formula_gap(r: &DecompositionResult, f: &PairFormula) -> Result<f64> {
    let mut worst = 0.0f64;
    for (mask, sub) in f.by_mask().iter().enumerate() {
        worst = worst.max(subspace::subspace_gap(&r.slices[mask].space, sub)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct RestrictionEntry {
    pub label: SliceLabel,
    pub index: usize,
    pub kind: CoordinateKind,
    pub holds: bool,
    pub residual: f64,
    pub unitary_part_dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestrictionReport {
    pub entries: Vec<RestrictionEntry>,
    pub pass: bool,
}

/// Re-derives the classification of every nonzero slice from its blocks.
pub fn classify_restrictions(r: &DecompositionResult, tol: &ToleranceProfile) -> Result<RestrictionReport> {
    let mut entries = Vec::new();
    for s in r.nonzero() {
        for c in classify_blocks(s.label, &s.blocks, tol)? {
            entries.push(RestrictionEntry {
                label: s.label,
                index: c.index,
                kind: c.kind,
                holds: c.holds,
                residual: c.residual,
                unitary_part_dim: c.unitary_part_dim,
            });
        }
    }
    let pass = entries.iter().all(|e| e.holds);
    Ok(RestrictionReport { entries, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct PermutationReport {
    /// 0-based permutation applied to positions.
    pub perm: Vec<usize>,
    /// `(label in the original, matching label in the permuted run, gap)`.
    pub slices: Vec<(SliceLabel, SliceLabel, f64)>,
    pub max_angle: f64,
}

/// Decomposes `t` and the permuted tuple `(T_{π(1)}, …)` and compares slices
/// under the induced relabelling.
pub fn permuted_decompose_check(t: &TwistedTuple, perm: &[usize]) -> Result<PermutationReport> {
    check_permutation(perm, t.n())?;
    let p = t.permuted(perm)?;
    if !p.report().pass {
        return Err(Error::RelationFailure(format!(
            "permuted tuple: {}",
            p.report().first_failure.clone().unwrap_or_default()
        )));
    }
    let a = decompose(t)?;
    let b = decompose(&p)?;
    let mut slices = Vec::new();
    let mut max_angle = 0.0f64;
    for sb in &b.slices {
        // Position k of the permuted tuple is original coordinate perm[k].
        let original = sb.label.mapped(perm);
        let gap = subspace::subspace_gap(&a.slice(original).space, &sb.space)?;
        max_angle = max_angle.max(gap);
        slices.push((original, sb.label, gap));
    }
    slices.sort_by_key(|s| s.0);
    Ok(PermutationReport {
        perm: perm.to_vec(),
        slices,
        max_angle,
    })
}
