//! Randomized invariants across module boundaries.

use proptest::prelude::*;
use twisted_wold::c64;
use twisted_wold::io::TupleFile;
use twisted_wold::lattice::classify::{classify_index, witness_is_sound};
use twisted_wold::lattice::coefficient::Match;
use twisted_wold::lattice::densify::Boundary;
use twisted_wold::lattice::LatticeTuple;
use twisted_wold::multi::{decompose, decompose_with, DecomposeOptions, Parallelism};
use twisted_wold::report::{run_decompose, DecomposeRun, Format};
use twisted_wold::subspace::{
    complement_in, intersect, kernel_of, range_of, span_union, subspace_gap, SubspaceBasis,
};
use twisted_wold::zoo::random::{complex_gaussian, seeded};
use twisted_wold::zoo::{self, planted_tuple, PlantedSpec, UMode};
use twisted_wold::{DenseOperator, ToleranceProfile};

fn tol() -> ToleranceProfile {
    ToleranceProfile::default()
}

fn random_subspace(seed: u64, ambient: usize, k: usize) -> SubspaceBasis {
    let mut rng = seeded(seed);
    let g = complex_gaussian(&mut rng, ambient, k);
    twisted_wold::subspace::orthonormalize_columns(g.as_ref(), &tol()).unwrap()
}

fn low_rank(seed: u64, dim: usize, rank: usize) -> DenseOperator {
    let mut rng = seeded(seed);
    let a = complex_gaussian(&mut rng, dim, rank);
    let b = complex_gaussian(&mut rng, rank, dim);
    DenseOperator::from_mat(&a * &b).unwrap()
}

fn lattice_pair(kind: u8, theta: f64) -> LatticeTuple {
    let one = c64::new(1.0, 0.0);
    match kind % 4 {
        0 => zoo::hardy_pair_du(one, one, UMode::Phase(theta), true).unwrap(),
        1 => zoo::hardy_pair_du(c64::cis(theta), one, UMode::Bilateral, true).unwrap(),
        2 => zoo::shift_phase_pair(theta).unwrap(),
        _ => zoo::lattice_shifts(2, 1).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planted_decomposition_is_complete_and_recovers_truth(seed in 0u64..10_000, n in 1usize..=3) {
        let max = if n == 3 { 2 } else { 3 };
        let spec = PlantedSpec::random(n, max, seed);
        prop_assume!(spec.dim() > 0);
        let (t, truth) = planted_tuple(&spec).unwrap();
        let r = decompose(&t).unwrap();
        let d = &r.diagnostics;
        prop_assert_eq!(d.dim_sum, t.dim());
        prop_assert!(d.orthogonality_max <= 1e-10);
        prop_assert!(d.max_reducing_residual <= 1e-10);
        for (s, g) in r.slices.iter().zip(&truth) {
            prop_assert_eq!(s.dim(), g.dim());
            prop_assert!(subspace_gap(&s.space, g).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn decomposition_does_not_depend_on_thread_count(seed in 0u64..10_000, threads in 1usize..=4) {
        let spec = PlantedSpec::random(2, 3, seed);
        prop_assume!(spec.dim() > 0);
        let (t, _) = planted_tuple(&spec).unwrap();
        let a = decompose(&t).unwrap();
        let opts = DecomposeOptions { parallelism: Parallelism::Threads(threads), audit: false };
        let b = decompose_with(&t, &opts).unwrap();
        for (x, y) in a.slices.iter().zip(&b.slices) {
            prop_assert_eq!(x.space.columns(), y.space.columns());
        }
    }

    #[test]
    fn intersection_lies_in_both_and_complements_fill(seed in 0u64..10_000, k1 in 0usize..=5, k2 in 0usize..=5) {
        let ambient = 6;
        let shared = random_subspace(seed, ambient, 2.min(k1).min(k2));
        let a = span_union(&[shared.clone(), random_subspace(seed + 1, ambient, k1.saturating_sub(shared.dim()))]).unwrap();
        let b = span_union(&[shared.clone(), random_subspace(seed + 2, ambient, k2.saturating_sub(shared.dim()))]).unwrap();
        let i = intersect(&[a.clone(), b.clone()]).unwrap();
        prop_assert!(i.dim() >= shared.dim());
        prop_assert!(i.dim() + ambient >= a.dim() + b.dim());
        prop_assert!(a.containment_residual(&i).unwrap() <= 1e-10);
        prop_assert!(b.containment_residual(&i).unwrap() <= 1e-10);
        let c = complement_in(&i, &a).unwrap();
        prop_assert_eq!(c.dim() + i.dim(), a.dim());
        prop_assert!(subspace_gap(&span_union(&[c, i]).unwrap(), &a).unwrap() <= 1e-10);
    }

    #[test]
    fn rank_nullity(seed in 0u64..10_000, dim in 1usize..=7, rank in 0usize..=7) {
        let rank = rank.min(dim);
        let a = low_rank(seed, dim, rank);
        let k = kernel_of(&a, &tol()).unwrap();
        let r = range_of(&a, &tol()).unwrap();
        prop_assert_eq!(r.dim(), rank);
        prop_assert_eq!(k.dim() + r.dim(), dim);
        // ker A = (ran A*)^⊥
        let r_adj = range_of(&a.adjoint(), &tol()).unwrap();
        let full = SubspaceBasis::full(dim, tol());
        prop_assert!(subspace_gap(&complement_in(&r_adj, &full).unwrap(), &k).unwrap() <= 1e-8);
    }

    #[test]
    fn dense_file_round_trip(seed in 0u64..10_000, n in 1usize..=3) {
        let spec = PlantedSpec::random(n, 2, seed);
        prop_assume!(spec.dim() > 0);
        let (t, _) = planted_tuple(&spec).unwrap();
        let file = TupleFile::from_dense(&t).with_seed(seed);
        let back = TupleFile::parse(&file.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), file.to_json());
        let u = back.dense_tuple(tol()).unwrap();
        for i in 0..n {
            prop_assert_eq!(u.op(i).mat(), t.op(i).mat());
        }
    }

    #[test]
    fn lattice_adjoint_is_the_transpose_conjugate(kind in 0u8..4, theta in -3.0f64..3.0, m in prop::collection::vec(-4i64..8, 3)) {
        let t = lattice_pair(kind, theta);
        let shape = t.shape();
        let mut m = m[..shape.dim()].to_vec();
        for (p, v) in m.iter_mut().enumerate() {
            if !shape.is_bilateral(p) {
                *v = v.abs();
            }
        }
        for op in t.ops() {
            let (p, c) = op.apply(&m).unwrap().expect("isometries do not annihilate");
            let (back, d) = op.apply_adjoint(&p).unwrap().expect("adjoint of an image is nonzero");
            prop_assert_eq!(&back, &m);
            prop_assert!(d.compare(&c.conj()) != Match::Differ);
        }
    }

    #[test]
    fn witnesses_replay_to_their_index(kind in 0u8..4, theta in -3.0f64..3.0, m in prop::collection::vec(-3i64..6, 3)) {
        let t = lattice_pair(kind, theta);
        let shape = t.shape();
        let mut m = m[..shape.dim()].to_vec();
        for (p, v) in m.iter_mut().enumerate() {
            if !shape.is_bilateral(p) {
                *v = v.abs();
            }
        }
        let c = classify_index(&t, &m, 64).unwrap();
        prop_assert!(c.label.is_some());
        let w = c.witness.expect("decided indices carry a witness");
        prop_assert!(witness_is_sound(&t, &m, &w).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn canonical_reports_are_reproducible(seed in 0u64..10_000, threads in 1usize..=3) {
        let spec = PlantedSpec::random(2, 2, seed);
        prop_assume!(spec.dim() > 0);
        let (t, _) = planted_tuple(&spec).unwrap();
        let file = TupleFile::from_dense(&t).with_seed(seed);
        let bytes = file.to_json().into_bytes();
        let base = DecomposeRun::default();
        let threaded = DecomposeRun { threads: Some(threads), ..DecomposeRun::default() };
        let a = run_decompose(&file, &bytes, &base).unwrap().render(Format::Json);
        let b = run_decompose(&file, &bytes, &threaded).unwrap().render(Format::Json);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lattice_file_round_trip(kind in 0u8..4, theta in -3.0f64..3.0) {
        let t = lattice_pair(kind, theta);
        let boundary = if kind % 4 == 0 || kind % 4 == 2 { Boundary::Truncate } else { Boundary::PeriodicBilateral };
        let file = TupleFile::from_lattice(&t, boundary);
        let back = TupleFile::parse(&file.to_json()).unwrap();
        let u = back.lattice_tuple().unwrap();
        prop_assert_eq!(TupleFile::from_lattice(&u, boundary).to_json(), file.to_json());
        let m = vec![1i64; t.shape().dim()];
        for (a, b) in t.ops().iter().zip(u.ops()) {
            let (pa, ca) = a.apply(&m).unwrap().unwrap();
            let (pb, cb) = b.apply(&m).unwrap().unwrap();
            prop_assert_eq!(pa, pb);
            prop_assert!((ca.value() - cb.value()).norm() <= 1e-12);
        }
    }
}
