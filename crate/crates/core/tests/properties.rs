use std::collections::BTreeMap;

use bloch_asymptotics::domains::sphere_point;
use bloch_asymptotics::hill::solve_tv;
use bloch_asymptotics::lattice::{decompose_coords, decompose_t, dot, norm2, sublattice_geometry};
use bloch_asymptotics::oracle::{assemble_and_solve, BasisKind};
use bloch_asymptotics::stats::wilson_interval;
use bloch_asymptotics::{FourierPotential, Lattice};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Period bases with determinant bounded away from zero.
fn basis2() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (0.6f64..1.6, -0.5f64..0.5, 0.6f64..1.6, -0.5f64..0.5)
        .prop_map(|(a, b, c, e)| vec![vec![a, b], vec![e, c]])
}

fn small_potential() -> impl Strategy<Value = FourierPotential> {
    prop::collection::vec((-2i64..=2, -2i64..=2, -1.0f64..1.0, -1.0f64..1.0), 1..5).prop_map(|recs| {
        let mut map: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (a, b, re, im) in recs {
            if (a, b) == (0, 0) {
                continue;
            }
            let c = Complex64::new(re, im);
            map.insert(vec![a, b], c);
            map.insert(vec![-a, -b], c.conj());
        }
        FourierPotential::from_coeffs(2, map.into_iter().collect(), true).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduce_splits_into_lattice_and_cell(basis in basis2(), x in prop::collection::vec(-50.0f64..50.0, 2)) {
        let lat = Lattice::new(basis).unwrap();
        let (k, t) = lat.reduce(&x);
        let back: Vec<f64> = lat.vector(&k).iter().zip(&t).map(|(a, b)| a + b).collect();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for c in lat.coords(&t) {
            prop_assert!((-1e-9..1.0 + 1e-9).contains(&c));
        }
        prop_assert_eq!(lat.coset_coords(&x, &t).unwrap(), k);
    }

    #[test]
    fn dual_pairing_is_integral(basis in basis2(), k in prop::collection::vec(-6i64..=6, 2), m in prop::collection::vec(-6i64..=6, 2)) {
        let lat = Lattice::new(basis).unwrap();
        let p = dot(&lat.vector(&k), &lat.omega_vector(&m)) / TWO_PI;
        prop_assert!((p - p.round()).abs() < 1e-9);
        let want: i64 = k.iter().zip(&m).map(|(a, b)| a * b).sum();
        prop_assert_eq!(p.round() as i64, want);
    }

    #[test]
    fn delta_decomposition_reconstructs(g in prop::collection::vec(-30i64..=30, 2), t in prop::collection::vec(0.0f64..1.0, 2), dsel in 0usize..4) {
        let lat = Lattice::hexagonal();
        let deltas = [[1i64, 0], [0, 1], [1, 1], [2, -1]];
        let geom = sublattice_geometry(&lat, &deltas[dsel]).unwrap();
        let tv: Vec<f64> = lat.vector(&[1, 0]).iter().zip(lat.vector(&[0, 1]))
            .map(|(a, b)| t[0] * a + t[1] * b).collect();
        let td = decompose_t(&tv, &geom);
        let dec = decompose_coords(&g, &geom, &td);
        prop_assert!((0.0..1.0).contains(&dec.v));
        let x: Vec<f64> = lat.vector(&g).iter().zip(&tv).map(|(a, b)| a + b).collect();
        for (a, b) in dec.reconstruct(&geom).iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn potential_text_round_trips(q in small_potential()) {
        let back = FourierPotential::from_text(2, &q.to_text(), true).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn sphere_points_have_radius(seed in any::<u64>(), d in 1usize..5, rho in 0.5f64..500.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sphere_point(&mut rng, d, rho);
        prop_assert!((norm2(&x).sqrt() - rho).abs() < 1e-9 * rho);
    }

    #[test]
    fn wilson_interval_brackets_estimate(n in 1usize..100_000, frac in 0.0f64..=1.0) {
        let hits = ((n as f64) * frac).floor() as usize;
        let p = wilson_interval(hits, n);
        prop_assert!(0.0 <= p.lo && p.lo <= p.estimate && p.estimate <= p.hi && p.hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The trace of the truncated operator ignores a mean-free potential.
    #[test]
    fn oracle_trace_equals_free_trace(q in small_potential(), t in prop::collection::vec(0.0f64..1.0, 2)) {
        let lat = Lattice::cubic(2);
        let tv: Vec<f64> = t.iter().map(|v| v * TWO_PI).collect();
        let kind = BasisKind::Ball { cutoff: 9.0 };
        let spec = assemble_and_solve(&lat, &q, &tv, &kind, 0.0, None, 4000).unwrap();
        let free: f64 = spec.basis.iter().map(|k| {
            let g: Vec<f64> = lat.vector(k).iter().zip(&tv).map(|(a, b)| a + b).collect();
            norm2(&g)
        }).sum();
        let tr: f64 = spec.eigenvalues().iter().sum();
        prop_assert!((tr - free).abs() < 1e-9 * free.max(1.0), "{} vs {}", tr, free);
    }

    /// Shifting the quasimomentum by a dual vector relabels the ball basis only.
    #[test]
    fn oracle_spectrum_is_dual_periodic(q in small_potential(), t in prop::collection::vec(0.0f64..1.0, 2), k in prop::collection::vec(-2i64..=2, 2)) {
        let lat = Lattice::cubic(2);
        let t0: Vec<f64> = t.iter().map(|v| v * TWO_PI).collect();
        let t1: Vec<f64> = t0.iter().zip(lat.vector(&k)).map(|(a, b)| a + b).collect();
        let kind = BasisKind::Ball { cutoff: 8.0 };
        let a = assemble_and_solve(&lat, &q, &t0, &kind, 0.0, None, 4000).unwrap().eigenvalues();
        let b = assemble_and_solve(&lat, &q, &t1, &kind, 0.0, None, 4000).unwrap().eigenvalues();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    /// For a real potential the Hill spectrum is even in `v` on a symmetric truncation.
    #[test]
    fn hill_spectrum_even_in_v(c in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4), v in 0.0f64..1.0) {
        let mut q = BTreeMap::new();
        for (m, (re, im)) in c.into_iter().enumerate() {
            let z = Complex64::new(re, im);
            q.insert(m as i64 + 1, z);
            q.insert(-(m as i64) - 1, z.conj());
        }
        let a = solve_tv(&q, v, 1.0, -20, 20).unwrap().values();
        let b = solve_tv(&q, -v, 1.0, -20, 20).unwrap().values();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }
}
