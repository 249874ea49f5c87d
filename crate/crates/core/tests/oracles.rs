//! Cross-checks against constructions that share no code with the crate's
//! operators: explicit matrices, naive leg enumeration, finite differences.

use faer::{Mat, Side};

use uncle_forge_core::gallery::{enumeration_histogram, ghz_domain_state, gf2_count};
use uncle_forge_core::hamiltonian::assemble_chain;
use uncle_forge_core::kernel::{
    epsilon_kernel, ghz_parent_projector, ghz_uncle_projector, subspace_distance, uncle_kernel_ghz,
};
use uncle_forge_core::spectra::dense_spectrum;
use uncle_forge_core::{ghz_mps, Boundary, LatticeSpec, PatternBoundary, PatternSpec, PerturbationSpec};

/// `sum_i (1 - P_i)` with `P_i` the projector onto `vecs` (orthonormal, as
/// dense local vectors over `k` sites) placed on sites `i..i+k` mod `n`.
fn chain_matrix(n: usize, k: usize, vecs: &[Vec<f64>]) -> Mat<f64> {
    let dim = 1usize << n;
    let local = 1usize << k;
    let mut p = Mat::<f64>::zeros(local, local);
    for v in vecs {
        for a in 0..local {
            for b in 0..local {
                p[(a, b)] += v[a] * v[b];
            }
        }
    }
    let mut h = Mat::<f64>::zeros(dim, dim);
    for i in 0..n {
        let sites: Vec<usize> = (0..k).map(|j| (i + j) % n).collect();
        let window: usize = sites.iter().map(|s| 1 << s).sum();
        for x in 0..dim {
            h[(x, x)] += 1.0;
            let lx: usize = sites.iter().enumerate().map(|(j, &s)| (x >> s & 1) << j).sum();
            for ly in 0..local {
                let y = (x & !window) | sites.iter().enumerate().map(|(j, &s)| (ly >> j & 1) << s).sum::<usize>();
                h[(y, x)] -= p[(ly, lx)];
            }
        }
    }
    h
}

fn uncle_vectors() -> Vec<Vec<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = vec![vec![0.0; 8]; 4];
    out[0][0] = 1.0;
    out[1][0b001] = s;
    out[1][0b011] = s;
    out[2][0b100] = s;
    out[2][0b110] = s;
    out[3][0b111] = 1.0;
    out
}

fn parent_vectors() -> Vec<Vec<f64>> {
    let mut a = vec![0.0; 4];
    let mut b = vec![0.0; 4];
    a[0] = 1.0;
    b[3] = 1.0;
    vec![a, b]
}

fn eigenvalues(m: &Mat<f64>) -> Vec<f64> {
    let mut v = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn chain_spectra_match_explicit_matrices() {
    for n in [5usize, 6, 7] {
        for (h, m) in [
            (assemble_chain(&ghz_uncle_projector(), n, Boundary::Periodic).unwrap(), chain_matrix(n, 3, &uncle_vectors())),
            (assemble_chain(&ghz_parent_projector(2).unwrap(), n, Boundary::Periodic).unwrap(), chain_matrix(n, 2, &parent_vectors())),
        ] {
            let ours = dense_spectrum(&h).unwrap().eigenvalues;
            let want = eigenvalues(&m);
            for (a, b) in ours.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn uncle_gap_closes_like_a_free_particle_band() {
    // Uncle lambda_1 on a ring relative to the explicit matrix, n = 4..9.
    let mut last = f64::INFINITY;
    for n in 4..=9 {
        let want = eigenvalues(&chain_matrix(n, 3, &uncle_vectors()));
        let h = assemble_chain(&ghz_uncle_projector(), n, Boundary::Periodic).unwrap();
        let ours = dense_spectrum(&h).unwrap();
        assert_eq!(ours.null_dim, 2);
        assert!((ours.eigenvalues[2] - want[2]).abs() < 1e-10);
        assert!(want[2] < last);
        last = want[2];
    }
}

#[test]
fn domain_state_energy_matches_quadratic_form() {
    let (n, a) = (11usize, 8usize);
    let m = chain_matrix(n, 3, &uncle_vectors());
    let h = assemble_chain(&ghz_uncle_projector(), n, Boundary::Periodic).unwrap();
    for r in 2..a {
        let phi = ghz_domain_state(n, r, a, 1).unwrap();
        let x = phi.to_dense().unwrap();
        let mut num = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                num += x[i] * m[(i, j)] * x[j];
            }
        }
        let want = num / x.iter().map(|v| v * v).sum::<f64>();
        assert!((h.rayleigh(&phi).unwrap() - want).abs() < 1e-10, "r={r}");
    }
}

/// Counts leg assignments directly: every leg of every site is a free bit,
/// bonded legs must agree, and each site's legs must have the right parity.
fn naive_count(lattice: &LatticeSpec, odd: &[usize], fixed: Option<&[bool]>) -> u64 {
    let q = lattice.num_qubits();
    let edges = lattice.edges();
    let open = lattice.open_legs();
    let mut count = 0;
    for x in 0u64..(1 << q) {
        if edges.iter().any(|e| (x >> e.a & 1) != (x >> e.b & 1)) {
            continue;
        }
        if let Some(bits) = fixed {
            if open.iter().zip(bits).any(|(&l, &b)| (x >> l & 1 == 1) != b) {
                continue;
            }
        }
        let ok = (0..lattice.num_sites()).all(|s| {
            let parity = (x >> (4 * s) & 0xF).count_ones() % 2;
            parity == u32::from(odd.contains(&s))
        });
        if ok {
            count += 1;
        }
    }
    count
}

#[test]
fn gf2_counts_match_naive_leg_enumeration() {
    let cases: Vec<(LatticeSpec, PatternBoundary)> = vec![
        (LatticeSpec::torus(2, 2).unwrap(), PatternBoundary::Closed),
        (LatticeSpec::patch(2, 2).unwrap(), PatternBoundary::Free),
        (LatticeSpec::patch(2, 2).unwrap(), PatternBoundary::Fixed(vec![true, false, false, true, true, true, false, false])),
        (LatticeSpec::patch(2, 3).unwrap(), PatternBoundary::Fixed(vec![false; 10])),
    ];
    for (lat, boundary) in cases {
        let fixed = match &boundary {
            PatternBoundary::Fixed(b) => Some(b.as_slice()),
            _ => None,
        };
        let hist = enumeration_histogram(&lat, &boundary).unwrap();
        for mask in 0..(1usize << lat.num_sites()) {
            let odd: Vec<usize> = (0..lat.num_sites()).filter(|s| mask >> s & 1 == 1).collect();
            let want = naive_count(&lat, &odd, fixed);
            let spec = PatternSpec::with_odd(lat, &odd, boundary.clone()).unwrap();
            assert_eq!(gf2_count(&spec).norm_sqr, want as f64, "{lat:?} {odd:?}");
            assert_eq!(hist[mask], want);
        }
    }
}

#[test]
fn two_by_three_torus_matches_naive_enumeration() {
    let lat = LatticeSpec::torus(2, 3).unwrap();
    for odd in [vec![], vec![0, 1], vec![0, 5], vec![0, 1, 2, 3], vec![2]] {
        let spec = PatternSpec::with_odd(lat, &odd, PatternBoundary::Closed).unwrap();
        assert_eq!(gf2_count(&spec).norm_sqr, naive_count(&lat, &odd, None) as f64, "{odd:?}");
    }
}

#[test]
fn kernel_drift_is_linear_in_epsilon() {
    let a = ghz_mps();
    let uncle = uncle_kernel_ghz();
    let p = PerturbationSpec::random(1.0, 2, 2, 11).unwrap();
    let d = |eps: f64| {
        let k = epsilon_kernel(&a, &p.with_epsilon(eps).unwrap(), 3).unwrap();
        subspace_distance(&k.space, &uncle).unwrap().value()
    };
    for eps in [1e-2, 1e-3, 1e-4] {
        let ratio = d(eps / 2.0) / d(eps);
        assert!((ratio - 0.5).abs() < 0.05, "eps={eps}: {ratio}");
    }
}
