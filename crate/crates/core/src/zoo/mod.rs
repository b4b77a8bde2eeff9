//! Standard instances: clock/shift pairs, planted block tuples with known
//! slices, and lattice tuples built from weighted shifts, diagonal phases and
//! bilateral shifts.

pub mod random;

use std::f64::consts::TAU;

use faer::c64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{
    densify, AffineMap, Base, Boundary, DensifiedTuple, LatticeShape, LatticeTuple, MonomialOperator, WeightFactor,
    WeightRule,
};
use crate::operator::DenseOperator;
use crate::subspace::SubspaceBasis;
use crate::tolerance::ToleranceProfile;
use crate::twisted::{TwistFamily, TwistedTuple};

const UNIMODULAR_SLACK: f64 = 1e-12;

fn one() -> c64 {
    c64::new(1.0, 0.0)
}

/// `diag(1, ω, …, ω^{d-1})`.
pub fn clock(d: usize, omega: c64) -> DenseOperator {
    let mut p = one();
    let entries: Vec<c64> = (0..d)
        .map(|_| {
            let v = p;
            p *= omega;
            v
        })
        .collect();
    DenseOperator::diagonal(&entries)
}

/// `e_k ↦ e_{k+1 mod d}`.
pub fn cyclic_shift(d: usize) -> DenseOperator {
    DenseOperator::from_mat_unchecked(faer::Mat::from_fn(d, d, |i, j| {
        if i == (j + 1) % d {
            one()
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

fn check_unimodular(name: &str, z: c64) -> Result<()> {
    if (z.norm() - 1.0).abs() > UNIMODULAR_SLACK {
        return Err(Error::InvalidParameter(format!("{name} must have modulus 1, got {}", z.norm())));
    }
    Ok(())
}

/// `(s_1·C, s_2·S)` on `C^d` with twist `ω`: `C S = ω S C`.
pub fn clock_shift_tuple(d: usize, scales: &[f64], omega: Option<c64>) -> Result<TwistedTuple> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if scales.len() != 2 || scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::InvalidParameter("need two scales in (0, 1]".into()));
    }
    let omega = omega.unwrap_or_else(|| c64::cis(TAU / d as f64));
    check_unimodular("omega", omega)?;
    let mut p = one();
    for _ in 0..d {
        p *= omega;
    }
    if (p - one()).norm() > 1e-10 {
        return Err(Error::InvalidParameter("omega must be a d-th root of unity".into()));
    }
    let t1 = clock(d, omega).scale(c64::new(scales[0], 0.0));
    let t2 = cyclic_shift(d).scale(c64::new(scales[1], 0.0));
    let twist = TwistFamily::scalar(2, d, &[((0, 1), omega)])?;
    TwistedTuple::new(vec![t1, t2], twist, ToleranceProfile::default())
}

/// One block of a planted tuple: a `dim`-dimensional piece on which the
/// coordinates in `mask` act completely non-unitarily and the others
/// unitarily.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedBlock {
    pub mask: u32,
    pub dim: usize,
    /// Order of the clock/shift factor carrying the twist; 1 means the block
    /// is untwisted. Must divide `dim`.
    pub twist_order: usize,
}

/// Block-diagonal tuple conjugated by a seeded Haar unitary.
///
/// A block of dimension `k·r` is `C^k ⊗ F_1 ⊗ ⋯ ⊗ F_n` with `dim F_1 = r`
/// and the other factors one-dimensional. `T_i = W_i ⊗ M_i` where
/// `W_i = C^{a_i} S^{b_i}` and `M_i` acts on `F_i`: a Haar unitary (or a
/// phase) when `i` is not in the block's label, a contraction of norm 0.9
/// (or a scalar of modulus in `[0.3, 0.9]`) when it is. On that block
/// `U_ij = ω^{a_i b_j − b_i a_j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedSpec {
    pub n: usize,
    pub blocks: Vec<PlantedBlock>,
    pub seed: u64,
}

fn default_order(dim: usize) -> usize {
    if dim % 2 == 0 {
        2
    } else {
        1
    }
}

impl PlantedSpec {
    /// One operator with unitary part of dimension `k_u` and c.n.u. part of
    /// dimension `k_c`.
    pub fn single(k_u: usize, k_c: usize, seed: u64) -> Self {
        let blocks = [(0, k_u), (1, k_c)]
            .into_iter()
            .filter(|&(_, d)| d > 0)
            .map(|(mask, dim)| PlantedBlock {
                mask,
                dim,
                twist_order: 1,
            })
            .collect();
        Self { n: 1, blocks, seed }
    }

    /// Pair with blocks of the given dimensions for labels `∅, {1}, {2}, {1,2}`.
    pub fn pair_blocks(dims: [usize; 4], seed: u64) -> Self {
        let blocks = dims
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(mask, &dim)| PlantedBlock {
                mask: mask as u32,
                dim,
                twist_order: default_order(dim),
            })
            .collect();
        Self { n: 2, blocks, seed }
    }

    /// Every label of an `n`-tuple with a block of dimension `dim`.
    pub fn uniform(n: usize, dim: usize, seed: u64) -> Self {
        let blocks = (0..1u32 << n)
            .map(|mask| PlantedBlock {
                mask,
                dim,
                twist_order: default_order(dim),
            })
            .collect();
        Self { n, blocks, seed }
    }

    /// Random block dimensions in `0..=max_dim` per label, drawn from `seed`.
    pub fn random(n: usize, max_dim: usize, seed: u64) -> Self {
        let mut rng = random::seeded(seed ^ 0x9e37_79b9_7f4a_7c15);
        let blocks = (0..1u32 << n)
            .filter_map(|mask| {
                let dim = rng.random_range(0..=max_dim);
                (dim > 0).then(|| PlantedBlock {
                    mask,
                    dim,
                    twist_order: default_order(dim),
                })
            })
            .collect();
        Self { n, blocks, seed }
    }

    /// Same blocks, all untwisted.
    pub fn untwisted(mut self) -> Self {
        for b in &mut self.blocks {
            b.twist_order = 1;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// Planted slice dimensions indexed by mask.
    pub fn slice_dims(&self) -> Vec<usize> {
        let mut d = vec![0; 1 << self.n];
        for b in &self.blocks {
            d[b.mask as usize] += b.dim;
        }
        d
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 8 {
            return Err(Error::InvalidParameter(format!("planted tuples support 1..=8 operators, got {}", self.n)));
        }
        if self.dim() == 0 {
            return Err(Error::InvalidParameter("planted tuple has no blocks".into()));
        }
        for b in &self.blocks {
            if b.mask >> self.n != 0 {
                return Err(Error::InvalidParameter(format!("block label {:#b} outside 1..{}", b.mask, self.n)));
            }
            if b.dim == 0 || b.twist_order == 0 || b.dim % b.twist_order != 0 {
                return Err(Error::InvalidParameter(format!(
                    "block of dimension {} cannot carry a twist of order {}",
                    b.dim, b.twist_order
                )));
            }
        }
        Ok(())
    }
}

fn factor(rng: &mut random::ZooRng, size: usize, pure: bool) -> DenseOperator {
    match (size, pure) {
        (1, false) => DenseOperator::scalar(1, c64::cis(rng.random_range(0.0..TAU))),
        (1, true) => {
            let rho = rng.random_range(0.3..=0.9);
            DenseOperator::scalar(1, c64::cis(rng.random_range(0.0..TAU)) * rho)
        }
        (_, false) => random::haar_unitary(rng, size),
        (_, true) => random::random_contraction(rng, size, 0.9),
    }
}

fn weyl(k: usize, a: usize, b: usize) -> DenseOperator {
    let omega = c64::cis(TAU / k as f64);
    clock(k, omega)
        .power(a as i64)
        .compose(&cyclic_shift(k).power(b as i64))
        .expect("same dimension")
}

/// Builds the tuple of `spec` and the planted slice for every label (indexed
/// by mask; zero where no block carries the label).
pub fn planted_tuple(spec: &PlantedSpec) -> Result<(TwistedTuple, Vec<SubspaceBasis>)> {
    spec.validate()?;
    let n = spec.n;
    let dim = spec.dim();
    let tol = ToleranceProfile::default();
    let mut rng = random::seeded(spec.seed);
    let mut ops: Vec<Option<DenseOperator>> = vec![None; n];
    let mut lambdas: Vec<Vec<c64>> = vec![Vec::new(); n * n];
    let mut block_sizes = Vec::new();
    for b in &spec.blocks {
        let k = b.twist_order;
        let r = b.dim / k;
        let ab: Vec<(usize, usize)> = (0..n)
            .map(|_| (rng.random_range(0..k), rng.random_range(0..k)))
            .collect();
        let factors: Vec<DenseOperator> = (0..n)
            .map(|i| factor(&mut rng, if i == 0 { r } else { 1 }, b.mask >> i & 1 == 1))
            .collect();
        for i in 0..n {
            // W_i ⊗ (I ⊗ ⋯ ⊗ M_i ⊗ ⋯ ⊗ I); all factors past the first are 1x1
            let mut t = weyl(k, ab[i].0, ab[i].1);
            for (j, f) in factors.iter().enumerate() {
                let piece = if j == i { f.clone() } else { DenseOperator::identity(f.dim()) };
                t = t.kron(&piece);
            }
            ops[i] = Some(match ops[i].take() {
                None => t,
                Some(acc) => acc.direct_sum(&t),
            });
        }
        let omega = c64::cis(TAU / k as f64);
        for i in 0..n {
            for j in 0..n {
                let e = (ab[i].0 * ab[j].1) as i64 - (ab[i].1 * ab[j].0) as i64;
                lambdas[i * n + j].push(omega.powi(e.rem_euclid(k as i64) as i32));
            }
        }
        block_sizes.push(b.dim);
    }
    let q = random::haar_unitary(&mut rng, dim);
    let ops = ops
        .into_iter()
        .map(|t| t.expect("at least one block").conjugate_by(&q))
        .collect::<Result<Vec<_>>>()?;
    let mut units = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let diag: Vec<c64> = lambdas[i * n + j]
                .iter()
                .zip(&block_sizes)
                .flat_map(|(&l, &d)| std::iter::repeat_n(l, d))
                .collect();
            units.push(((i, j), DenseOperator::diagonal(&diag).conjugate_by(&q)?));
        }
    }
    let twist = TwistFamily::new(n, dim, units)?;
    let tuple = TwistedTuple::new(ops, twist, tol)?;

    let mut truth = Vec::with_capacity(1 << n);
    for mask in 0..1u32 << n {
        let mut coords = Vec::new();
        let mut offset = 0;
        for b in &spec.blocks {
            if b.mask == mask {
                coords.extend(offset..offset + b.dim);
            }
            offset += b.dim;
        }
        let e = SubspaceBasis::coordinate(dim, &coords, tol)?;
        let cols = crate::dense::matmul(q.mat(), e.columns());
        truth.push(SubspaceBasis::from_orthonormal(cols, tol)?);
    }
    Ok((tuple, truth))
}

fn phase_of(z: c64) -> f64 {
    z.im.atan2(z.re)
}

fn phase_factor(d: usize, theta: f64, coeffs: Vec<i64>, constant: i64) -> WeightFactor {
    debug_assert_eq!(coeffs.len(), d);
    WeightFactor {
        base: Base::Phase(theta),
        coeffs,
        constant,
    }
}

fn translate(shape: LatticeShape, delta: Vec<i64>, weight: WeightRule) -> Result<MonomialOperator> {
    MonomialOperator::new(shape, AffineMap::translation(delta), weight)
}

fn polar_weight(d: usize, z: c64) -> WeightRule {
    WeightRule::constant(d, z.norm(), phase_of(z))
}

/// One unweighted shift per lattice coordinate, identity twists.
pub fn lattice_shifts(d_plus: usize, d_bi: usize) -> Result<LatticeTuple> {
    let shape = LatticeShape::new(d_plus, d_bi)?;
    let ops = (0..shape.dim())
        .map(|p| MonomialOperator::shift(shape, p))
        .collect::<Result<Vec<_>>>()?;
    LatticeTuple::new(shape, ops, vec![])
}

/// `A_r z^n = (r^n / 2) z^n` on `H^2(D)`.
pub fn a_r_operator(r: c64) -> Result<MonomialOperator> {
    check_unimodular("r", r)?;
    let shape = LatticeShape::new(1, 0)?;
    let w = WeightRule::constant(1, 0.5, 0.0).times_factor(phase_factor(1, phase_of(r), vec![1], 0));
    MonomialOperator::new(shape, AffineMap::identity(1), w)
}

/// The pair `(A_r ⊗ M_z^α, M_z^α ⊗ I)` with twist `r`, densified on a window,
/// and the doubled tuple `(diag(T_1, T_2), diag(T_2, T_1))` with twist
/// `diag(rI, r̄I)`.
#[derive(Debug, Clone)]
pub struct HardyPairAr {
    pub lattice: LatticeTuple,
    pub densified: DensifiedTuple,
    pub pair: TwistedTuple,
    pub doubled: TwistedTuple,
    /// Relation support of the pair and of the doubled tuple.
    pub pair_support: SubspaceBasis,
    pub doubled_support: SubspaceBasis,
}

pub fn hardy_pair_ar(r: c64, alpha: f64, n: usize) -> Result<HardyPairAr> {
    hardy_pair_ar_complex(r, c64::new(alpha, 0.0), n)
}

pub fn hardy_pair_ar_complex(r: c64, alpha: c64, n: usize) -> Result<HardyPairAr> {
    check_unimodular("r", r)?;
    if alpha.norm() > 1.0 + UNIMODULAR_SLACK || alpha.norm() == 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must satisfy 0 < |alpha| <= 1, got {}", alpha.norm())));
    }
    let shape = LatticeShape::new(2, 0)?;
    let theta = phase_of(r);
    // coordinate 0 is the factor carrying A_r and the first M_z^α
    let w1 = polar_weight(2, alpha)
        .times_polar(2, 0.5, 0.0)
        .times_factor(phase_factor(2, theta, vec![1, 0], 0));
    let t1 = translate(shape, vec![0, 1], w1)?;
    let t2 = translate(shape, vec![1, 0], polar_weight(2, alpha))?;
    let u = MonomialOperator::scalar(shape, 1.0, theta)?;
    let lattice = LatticeTuple::new(shape, vec![t1, t2], vec![((0, 1), u)])?;
    let densified = densify(&lattice, n, Boundary::Truncate)?;
    let tol = ToleranceProfile::default();
    let pair = densified.tuple(tol)?;
    let pair_support = densified.relation_support(tol)?;
    let doubled = doubled_tuple(&pair, r)?;
    let doubled_support = densified.support(&[densified.relation_interior.clone(), densified.relation_interior.clone()].concat(), tol)?;
    Ok(HardyPairAr {
        lattice,
        densified,
        pair,
        doubled,
        pair_support,
        doubled_support,
    })
}

/// `(diag(T_1, T_2), diag(T_2, T_1))` with `U = diag(rI, r̄I)`, audit mode.
pub fn doubled_tuple(pair: &TwistedTuple, r: c64) -> Result<TwistedTuple> {
    if pair.n() != 2 {
        return Err(Error::InvalidParameter("doubling needs a pair".into()));
    }
    let (t1, t2) = (pair.op(0), pair.op(1));
    let d = pair.dim();
    let u = DenseOperator::scalar(d, r).direct_sum(&DenseOperator::scalar(d, r.conj()));
    let twist = TwistFamily::new(2, 2 * d, vec![((0, 1), u)])?;
    TwistedTuple::audit(vec![t1.direct_sum(t2), t2.direct_sum(t1)], twist, *pair.tol())
}

/// The unitary `U` on `E` in `T_2 = M_{z_2}^{α_2} D[U]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UMode {
    /// `E = C`, `U = e^{iθ}`.
    Phase(f64),
    /// `E = ℓ²(Z)`, `U` the bilateral shift; adds one bilateral coordinate.
    Bilateral,
}

/// `(M_{z_1}^{α_1}, M_{z_2}^{α_2} D[U])` with twist `I ⊗ U*`, where
/// `D[U] z_1^{m_1} z_2^{m_2} η = z_1^{m_1} z_2^{m_2} U^{m_1} η`.
pub fn hardy_pair_du(alpha1: c64, alpha2: c64, mode: UMode, isometric: bool) -> Result<LatticeTuple> {
    for (name, a) in [("alpha_1", alpha1), ("alpha_2", alpha2)] {
        if isometric {
            check_unimodular(name, a)?;
        } else if a.norm() > 1.0 + UNIMODULAR_SLACK || a.norm() == 0.0 {
            return Err(Error::InvalidParameter(format!("{name} must satisfy 0 < |{name}| <= 1")));
        }
    }
    match mode {
        UMode::Phase(theta) => {
            let shape = LatticeShape::new(2, 0)?;
            let t1 = translate(shape, vec![1, 0], polar_weight(2, alpha1))?;
            let w2 = polar_weight(2, alpha2).times_factor(phase_factor(2, theta, vec![1, 0], 0));
            let t2 = translate(shape, vec![0, 1], w2)?;
            let u = MonomialOperator::scalar(shape, 1.0, -theta)?;
            LatticeTuple::new(shape, vec![t1, t2], vec![((0, 1), u)])
        }
        UMode::Bilateral => {
            let shape = LatticeShape::new(2, 1)?;
            let t1 = translate(shape, vec![1, 0, 0], polar_weight(3, alpha1))?;
            let sigma2 = AffineMap::new(vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 0, 1]], vec![0, 1, 0])?;
            let t2 = MonomialOperator::new(shape, sigma2, polar_weight(3, alpha2))?;
            let u = MonomialOperator::new(shape, AffineMap::translation(vec![0, 0, -1]), WeightRule::one())?;
            LatticeTuple::new(shape, vec![t1, t2], vec![((0, 1), u)])
        }
    }
}

/// `(B_r ⊗ M_z, M_z ⊗ I)` with `B_r z^n = r^{n+1} z^{n+1}` and twist `r`. The
/// forward relation holds; the adjoint one does not.
pub fn counterexample_br(r: c64) -> Result<LatticeTuple> {
    check_unimodular("r", r)?;
    let shape = LatticeShape::new(2, 0)?;
    let theta = phase_of(r);
    let w1 = WeightRule::one().times_factor(phase_factor(2, theta, vec![1, 0], 1));
    let t1 = translate(shape, vec![1, 1], w1)?;
    let t2 = MonomialOperator::shift(shape, 0)?;
    let u = MonomialOperator::scalar(shape, 1.0, theta)?;
    LatticeTuple::new(shape, vec![t1, t2], vec![((0, 1), u)])
}

/// `(M_z, diag(e^{iθm}))` on `H^2(D)` with twist `e^{−iθ}`.
pub fn shift_phase_pair(theta: f64) -> Result<LatticeTuple> {
    let shape = LatticeShape::new(1, 0)?;
    let t1 = MonomialOperator::shift(shape, 0)?;
    let t2 = MonomialOperator::new(
        shape,
        AffineMap::identity(1),
        WeightRule::one().times_factor(phase_factor(1, theta, vec![1], 0)),
    )?;
    let u = MonomialOperator::scalar(shape, 1.0, -theta)?;
    LatticeTuple::new(shape, vec![t1, t2], vec![((0, 1), u)])
}

/// Isometric lattice pairs covering all four slices of the pair theorem.
pub fn lattice_pair_zoo() -> Result<Vec<(String, LatticeTuple)>> {
    let bilateral_first = {
        let shape = LatticeShape::new(1, 1)?;
        LatticeTuple::new(
            shape,
            vec![MonomialOperator::shift(shape, 1)?, MonomialOperator::shift(shape, 0)?],
            vec![],
        )?
    };
    Ok(vec![
        ("shifts".into(), lattice_shifts(2, 0)?),
        ("shift_bilateral".into(), lattice_shifts(1, 1)?),
        ("bilateral_shift".into(), bilateral_first),
        ("bilateral_pair".into(), lattice_shifts(0, 2)?),
        (
            "du_phase".into(),
            hardy_pair_du(one(), one(), UMode::Phase(0.4 * std::f64::consts::PI), true)?,
        ),
        ("du_bilateral".into(), hardy_pair_du(one(), c64::new(0.0, 1.0), UMode::Bilateral, true)?),
        ("shift_phase".into(), shift_phase_pair(0.7)?),
    ])
}
