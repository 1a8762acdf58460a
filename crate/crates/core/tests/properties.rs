use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use bosonic::interferometer::{fock_expectation, C64};
use bosonic::lattice::{
    catalan_dyck_spec, dyck_word_to_pattern, pattern_to_dyck_word, pattern_to_ferrers, staircase_inverse, staircase_iso,
};
use bosonic::parity::parity_bits;
use bosonic::problems::{brute_force_min, mobius_min, qubo_to_ising};
use bosonic::*;
use proptest::prelude::*;

fn angles(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TAU, len)
}

fn circuit() -> impl Strategy<Value = (CircuitSpec, Vec<f64>)> {
    (2usize..=5, any::<bool>(), 1usize..5).prop_filter("depth below M", |(m, _, d)| d < m).prop_flat_map(
        |(m, full, d)| {
            let c = CircuitSpec::standard(m, if full { m } else { m - 1 }, d).unwrap();
            let k = c.parameter_count(true);
            (Just(c), angles(k))
        },
    )
}

fn symmetric(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-2.0..2.0f64, n * n)
        .prop_map(move |v| (0..n).map(|i| (0..n).map(|j| (v[i * n + j] + v[j * n + i]) / 2.0).collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_unrank_round_trip(m in 1usize..7, n in 0usize..7, seed in any::<u64>()) {
        let basis = enumerate_basis(m, n).unwrap();
        let i = (seed % basis.len() as u64) as usize;
        let p = basis.unrank(i).unwrap();
        prop_assert_eq!(p.total(), n);
        prop_assert_eq!(basis.rank(p.counts()), i);
        prop_assert_eq!(basis.pattern_to_index(&p).unwrap(), i);
    }

    #[test]
    fn evolution_preserves_norm_and_sector((c, p) in circuit()) {
        let state = evolve(&c, &p).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        let dist = exact_distribution(&state).unwrap();
        for (pattern, _) in &dist.entries {
            prop_assert_eq!(pattern.total(), c.photons());
        }
    }

    #[test]
    fn support_lies_in_catalan_basis((c, p) in circuit()) {
        let dist = exact_distribution(&evolve(&c, &p).unwrap()).unwrap();
        let basis = catalan_basis(c.modes, c.photons(), c.depth).unwrap();
        for pattern in dist.support(0.0) {
            prop_assert!(basis.contains(&pattern), "{} outside the Catalan basis", pattern);
        }
    }

    #[test]
    fn schwinger_matches_fock_space((c, p) in circuit(), o in prop::collection::vec(-1.0..1.0f64, 50)) {
        let m = c.modes;
        let mut obs = vec![vec![C64::new(0.0, 0.0); m]; m];
        for a in 0..m {
            obs[a][a] = C64::new(o[a], 0.0);
            for b in a + 1..m {
                let v = C64::new(o[5 + a * 5 + b], o[30 + a * 4 + b]);
                obs[a][b] = v;
                obs[b][a] = v.conj();
            }
        }
        let direct = fock_expectation(&evolve(&c, &p).unwrap(), &obs).unwrap();
        let transfer = schwinger_expectation(&c, &p, &obs).unwrap();
        prop_assert!((direct - transfer).abs() < 1e-9);
    }

    #[test]
    fn cascade_matches_dense_coarse_graining(m in 2usize..7, full in any::<bool>(), a in angles(6), j in 0u8..2) {
        let c = CircuitSpec::standard(m, if full { m } else { m - 1 }, 1).unwrap();
        let p = &a[..m - 1];
        let dense = coarse_grain(&exact_distribution(&evolve(&c, p).unwrap()).unwrap(), j).unwrap();
        let cascade = CascadeSampler::new(&c, p).unwrap().bit_distribution(j).unwrap();
        for w in 0..(1u128 << m) {
            let b = BitString::from_word(m, w).unwrap();
            prop_assert!((dense.mass(&b) - cascade.mass(&b)).abs() < 1e-10);
        }
    }

    #[test]
    fn parity_variants_are_complements(counts in prop::collection::vec(0u8..6, 1..10)) {
        let b0 = parity_bits(&counts, 0).unwrap();
        let b1 = parity_bits(&counts, 1).unwrap();
        prop_assert_eq!(b0.complement(), b1);
        for (i, &c) in counts.iter().enumerate() {
            prop_assert_eq!(b0.get(i), c % 2);
        }
    }

    #[test]
    fn qubo_and_ising_agree(q in (1usize..=12).prop_flat_map(symmetric)) {
        let n = q.len();
        let qubo = QuboProblem::new(q).unwrap();
        let ising = qubo_to_ising(&qubo);
        for w in 0..1u128 << n {
            let x = BitString::from_word(n, w).unwrap();
            assert_abs_diff_eq!(qubo.energy(&x).unwrap(), ising.energy(&x).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn normalized_energy_is_scale_invariant(seed in 0u64..50, w in prop::collection::vec(0.01..1.0f64, 6), c in 1e-3..1e3f64) {
        let p = PortfolioProblem::synthetic(6, seed, 1.5, 1, PortfolioApproach::Normalized).unwrap();
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let (a, b) = (p.energy_normalized(&w), p.energy_normalized(&scaled));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let doubled: Vec<f64> = w.iter().map(|v| v * 2.0).collect();
        prop_assert_eq!(p.energy_normalized(&doubled), a);
    }

    #[test]
    fn dyck_words_round_trip(m in 2usize..7, full in any::<bool>(), depth in 1usize..6, seed in any::<u64>()) {
        prop_assume!(depth < m);
        let n = if full { m } else { m - 1 };
        let basis = catalan_basis(m, n, depth).unwrap();
        let p = &basis[(seed % basis.len() as u64) as usize];
        let word = pattern_to_dyck_word(p);
        prop_assert_eq!(&dyck_word_to_pattern(&word).unwrap(), p);
        let spec = catalan_dyck_spec(m, n, depth).unwrap();
        let paths = enumerate_dyck_paths(&spec).unwrap();
        let path = &paths[(seed % paths.len() as u64) as usize];
        let stair = staircase_iso(path, &spec).unwrap();
        prop_assert_eq!(&staircase_inverse(&stair, &spec).unwrap(), path);
        let f = pattern_to_ferrers(p);
        prop_assert_eq!(&ferrers_to_pattern(&f).unwrap(), p);
    }
}

#[test]
fn brute_force_matches_plain_loop() {
    let q = QuboProblem::reference_11x11();
    let spec = ProblemSpec::Qubo(q.clone());
    let mut all: Vec<(f64, u128)> =
        (0..1u128 << 11).map(|w| (q.energy(&BitString::from_word(11, w).unwrap()).unwrap(), w)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let r = brute_force_min(&spec, 5).unwrap();
    for ((e, b), (e2, w)) in r.lowest.iter().zip(&all) {
        assert_eq!(e, e2);
        assert_eq!(b.word(), *w);
    }
}

#[test]
fn mobius_closed_form_matches_brute_force() {
    for n in (4..=14).step_by(2) {
        for (ja, jb) in [(0.5, -0.2), (1.0, 0.0), (0.2, 0.3), (0.7, -0.9)] {
            let p = MobiusProblem::new(n, ja, jb).unwrap();
            let closed = mobius_min(&p).unwrap();
            let brute = brute_force_min(&ProblemSpec::Mobius(p), 1).unwrap().energy;
            assert_abs_diff_eq!(closed, brute, epsilon = 1e-12);
        }
    }
}

#[test]
fn young_lattice_sizes_match_catalan_bases() {
    for m in 2..=6 {
        for n in [m - 1, m] {
            for depth in 1..m {
                let bound = bosonic::lattice::catalan_bounds(m, n, depth).unwrap();
                let lattice = young_lattice(&bound).unwrap();
                let mut from_lattice = lattice.patterns().unwrap();
                from_lattice.sort();
                let mut basis = catalan_basis(m, n, depth).unwrap();
                basis.sort();
                assert_eq!(from_lattice, basis, "M={m} n={n} depth={depth}");
            }
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[test]
fn reference_matrices_are_pinned() {
    use bosonic::problems::{REFERENCE_Q11, REFERENCE_Q6};
    assert_eq!(fnv1a(REFERENCE_Q6.as_bytes()), 0x4312_2e68_0768_19c3);
    assert_eq!(fnv1a(REFERENCE_Q11.as_bytes()), 0x207a_8ff3_5d64_bd35);
    let q6 = QuboProblem::reference_6x6();
    assert_eq!(q6.matrix()[0][0], -0.1280102);
    assert_eq!(q6.matrix()[5][5], -0.2262147);
    let q11 = QuboProblem::reference_11x11();
    assert_eq!(q11.dimension(), 11);
    assert_eq!(q11.matrix()[1][7], 0.644);
    assert_eq!(q11.matrix()[10][10], 0.096);
}
