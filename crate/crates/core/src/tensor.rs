//! Site tensors: translation-invariant MPS matrices and the even/odd parity
//! projectors that define the toric-code PEPS.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::state::SparseState;

/// `phys_dim` matrices of shape `bond_dim x bond_dim`, one per physical level.
#[derive(Debug, Clone)]
pub struct MpsTensor {
    phys_dim: usize,
    bond_dim: usize,
    matrices: Vec<Mat<f64>>,
}

impl MpsTensor {
    pub fn new(matrices: Vec<Mat<f64>>) -> Result<Self> {
        let phys_dim = matrices.len();
        if phys_dim == 0 {
            return Err(CoreError::ShapeMismatch("an MPS tensor needs at least one level".into()));
        }
        let bond_dim = matrices[0].nrows();
        if bond_dim == 0 {
            return Err(CoreError::ShapeMismatch("bond dimension must be >= 1".into()));
        }
        for (i, m) in matrices.iter().enumerate() {
            if m.nrows() != bond_dim || m.ncols() != bond_dim {
                return Err(CoreError::ShapeMismatch(format!(
                    "level {i} is {}x{}, expected {bond_dim}x{bond_dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if (0..bond_dim).any(|r| (0..bond_dim).any(|c| !m[(r, c)].is_finite())) {
                return Err(CoreError::ShapeMismatch(format!("level {i} has non-finite entries")));
            }
        }
        Ok(MpsTensor { phys_dim, bond_dim, matrices })
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn matrix(&self, level: usize) -> &Mat<f64> {
        &self.matrices[level]
    }

    pub fn matrices(&self) -> &[Mat<f64>] {
        &self.matrices
    }

    /// `A_{w_0} A_{w_1} ... A_{w_{k-1}}`.
    pub fn word_product(&self, word: &[usize]) -> Mat<f64> {
        let mut acc = Mat::<f64>::identity(self.bond_dim, self.bond_dim);
        for &i in word {
            acc = &acc * &self.matrices[i];
        }
        acc
    }
}

/// GHZ tensor: `A_0 = diag(1, 0)`, `A_1 = diag(0, 1)`.
pub fn ghz_mps() -> MpsTensor {
    let a0 = Mat::from_fn(2, 2, |r, c| if r == 0 && c == 0 { 1.0 } else { 0.0 });
    let a1 = Mat::from_fn(2, 2, |r, c| if r == 1 && c == 1 { 1.0 } else { 0.0 });
    MpsTensor::new(vec![a0, a1]).expect("GHZ tensor is well formed")
}

/// Linear perturbation `A_i -> A_i + epsilon * P_i`.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub matrices: Vec<Mat<f64>>,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64, matrices: Vec<Mat<f64>>) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(CoreError::ShapeMismatch(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(PerturbationSpec { epsilon, matrices })
    }

    pub fn zero(phys_dim: usize, bond_dim: usize) -> Self {
        PerturbationSpec {
            epsilon: 0.0,
            matrices: vec![Mat::zeros(bond_dim, bond_dim); phys_dim],
        }
    }

    /// Standard-normal entries from a seeded ChaCha8 stream, row-major per level.
    pub fn random(epsilon: f64, phys_dim: usize, bond_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrices = Vec::with_capacity(phys_dim);
        for _ in 0..phys_dim {
            let mut m = Mat::zeros(bond_dim, bond_dim);
            for r in 0..bond_dim {
                for c in 0..bond_dim {
                    m[(r, c)] = StandardNormal.sample(&mut rng);
                }
            }
            matrices.push(m);
        }
        Self::new(epsilon, matrices)
    }

    /// GHZ-shaped perturbation from the entries `[a, b, c, d]` of each level.
    pub fn from_entries(epsilon: f64, levels: &[[f64; 4]]) -> Result<Self> {
        let matrices = levels
            .iter()
            .map(|e| Mat::from_fn(2, 2, |r, c| e[2 * r + c]))
            .collect();
        Self::new(epsilon, matrices)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.matrices.clone())
    }

    pub fn max_abs(&self) -> f64 {
        self.matrices
            .iter()
            .flat_map(|m| (0..m.nrows()).flat_map(move |r| (0..m.ncols()).map(move |c| m[(r, c)].abs())))
            .fold(0.0, f64::max)
    }

    /// `sum_i P_i[row, col]`, e.g. `b_0 + b_1` for `(0, 1)`.
    pub fn level_sum(&self, row: usize, col: usize) -> f64 {
        self.matrices.iter().map(|m| m[(row, col)]).sum()
    }
}

pub fn perturb_mps(a: &MpsTensor, p: &PerturbationSpec) -> Result<MpsTensor> {
    if p.matrices.len() != a.phys_dim {
        return Err(CoreError::ShapeMismatch(format!(
            "perturbation has {} levels, tensor has {}",
            p.matrices.len(),
            a.phys_dim
        )));
    }
    let mut out = Vec::with_capacity(a.phys_dim);
    for (i, (m, pm)) in a.matrices.iter().zip(&p.matrices).enumerate() {
        if pm.nrows() != a.bond_dim || pm.ncols() != a.bond_dim {
            return Err(CoreError::ShapeMismatch(format!("perturbation level {i} has the wrong shape")));
        }
        out.push(Mat::from_fn(a.bond_dim, a.bond_dim, |r, c| m[(r, c)] + p.epsilon * pm[(r, c)]));
    }
    MpsTensor::new(out)
}

/// How the virtual indices at the ends of a finite chain are closed.
#[derive(Debug, Clone)]
pub enum MpsClosure {
    Trace,
    Vectors { left: Vec<f64>, right: Vec<f64> },
}

/// Amplitudes `tr[A_{i_1} ... A_{i_n}]` (or `<l| ... |r>`) for every
/// configuration of an `n`-site qubit chain. The chain boundary of the
/// returned state's lattice is periodic for `Trace` and open otherwise.
pub fn mps_state(a: &MpsTensor, n: usize, closure: &MpsClosure, budget: usize) -> Result<SparseState> {
    if a.phys_dim != 2 {
        return Err(CoreError::ShapeMismatch(format!(
            "qubit chains need phys_dim 2, got {}",
            a.phys_dim
        )));
    }
    let boundary = match closure {
        MpsClosure::Trace => Boundary::Periodic,
        MpsClosure::Vectors { left, right } => {
            if left.len() != a.bond_dim || right.len() != a.bond_dim {
                return Err(CoreError::ShapeMismatch("boundary vectors must have length bond_dim".into()));
            }
            Boundary::Open
        }
    };
    let lattice = LatticeSpec::chain(n, boundary)?;
    lattice.check_key_width()?;
    if n >= 64 || (1usize << n) > budget {
        return Err(CoreError::BudgetExceeded {
            what: format!("{n}-site MPS state"),
            needed: 1u128 << n.min(127),
            budget: budget as u128,
        });
    }
    let d = a.bond_dim;
    let mut entries = Vec::new();
    // Depth-first over prefixes so each prefix product is formed once.
    let mut stack: Vec<(usize, u128, Mat<f64>)> = vec![(0, 0, Mat::identity(d, d))];
    while let Some((depth, key, prefix)) = stack.pop() {
        if depth == n {
            let amp = match closure {
                MpsClosure::Trace => (0..d).map(|i| prefix[(i, i)]).sum::<f64>(),
                MpsClosure::Vectors { left, right } => {
                    let mut s = 0.0;
                    for r in 0..d {
                        for c in 0..d {
                            s += left[r] * prefix[(r, c)] * right[c];
                        }
                    }
                    s
                }
            };
            entries.push((key, amp));
            continue;
        }
        for level in (0..2).rev() {
            let next = &prefix * &a.matrices[level];
            stack.push((depth + 1, key | ((level as u128) << depth), next));
        }
    }
    Ok(SparseState::from_entries(lattice, entries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteKind {
    Even,
    Odd,
}

impl SiteKind {
    pub fn parity(self) -> u32 {
        match self {
            SiteKind::Even => 0,
            SiteKind::Odd => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Even,
    Odd,
    General,
}

/// A PEPS site tensor with four bond-dimension-2 legs (N, E, S, W). Entry
/// `data[v]` is the 16-dimensional physical vector attached to virtual
/// configuration `v` (bit `leg` of `v` is the value on that leg).
#[derive(Debug, Clone)]
pub struct PepsTensor {
    pub kind: TensorKind,
    pub data: Vec<[f64; 16]>,
}

impl PepsTensor {
    /// The tensor as a 16x16 map from virtual configuration to physical vector.
    pub fn matrix(&self) -> Mat<f64> {
        Mat::from_fn(16, 16, |phys, virt| self.data[virt][phys])
    }
}

/// `E|ijkl> = |ijkl>` for even `i+j+k+l` (else 0); `Odd` is the complement.
pub fn toric_tensor(kind: SiteKind) -> PepsTensor {
    let data = (0..16u32)
        .map(|v| {
            let mut col = [0.0; 16];
            if v.count_ones() % 2 == kind.parity() {
                col[v as usize] = 1.0;
            }
            col
        })
        .collect();
    let kind = match kind {
        SiteKind::Even => TensorKind::Even,
        SiteKind::Odd => TensorKind::Odd,
    };
    PepsTensor { kind, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                m = m.max((a[(r, c)] - b[(r, c)]).abs());
            }
        }
        m
    }

    #[test]
    fn ghz_matrices() {
        let a = ghz_mps();
        assert_eq!((a.phys_dim(), a.bond_dim()), (2, 2));
        assert_eq!(a.matrix(0)[(0, 0)], 1.0);
        assert_eq!(a.matrix(0)[(1, 1)], 0.0);
        assert_eq!(a.matrix(1)[(1, 1)], 1.0);
        assert_eq!(a.matrix(1)[(0, 1)] + a.matrix(1)[(1, 0)], 0.0);
    }

    #[test]
    fn displayed_perturbed_form() {
        let p = PerturbationSpec::from_entries(0.1, &[[0.0, 1.0, 0.0, 0.0], [0.0; 4]]).unwrap();
        let a = perturb_mps(&ghz_mps(), &p).unwrap();
        let expected = Mat::from_fn(2, 2, |r, c| [[1.0, 0.1], [0.0, 0.0]][r][c]);
        assert!(max_abs_diff(a.matrix(0), &expected) < 1e-15);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let g = ghz_mps();
        let p = PerturbationSpec::random(0.0, 2, 2, 3).unwrap();
        let a = perturb_mps(&g, &p).unwrap();
        for i in 0..2 {
            assert_eq!(max_abs_diff(a.matrix(i), g.matrix(i)), 0.0);
        }
    }

    #[test]
    fn small_perturbation_is_linear() {
        let g = ghz_mps();
        let p = PerturbationSpec::random(1e-3, 2, 2, 11).unwrap();
        let a = perturb_mps(&g, &p).unwrap();
        let bound = 1e-3 * p.max_abs() * (1.0 + 1e-12);
        for i in 0..2 {
            assert!(max_abs_diff(a.matrix(i), g.matrix(i)) <= bound);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = PerturbationSpec::zero(3, 2);
        assert!(matches!(perturb_mps(&ghz_mps(), &p), Err(CoreError::ShapeMismatch(_))));
        let p = PerturbationSpec::zero(2, 3);
        assert!(perturb_mps(&ghz_mps(), &p).is_err());
        assert!(PerturbationSpec::from_entries(f64::NAN, &[[0.0; 4]; 2]).is_err());
    }

    #[test]
    fn ghz_states_from_trace() {
        let g = ghz_mps();
        let s1 = mps_state(&g, 1, &MpsClosure::Trace, 1 << 20).unwrap();
        assert_eq!(s1.entries(), &[(0, 1.0), (1, 1.0)]);
        let s2 = mps_state(&g, 2, &MpsClosure::Trace, 1 << 20).unwrap();
        assert_eq!(s2.entries(), &[(0, 1.0), (3, 1.0)]);
        let s3 = mps_state(&g, 3, &MpsClosure::Trace, 1 << 20).unwrap();
        assert_eq!(s3.entries(), &[(0, 1.0), (7, 1.0)]);
    }

    #[test]
    fn open_closure_uses_boundary_vectors() {
        let g = ghz_mps();
        let s = mps_state(
            &g,
            3,
            &MpsClosure::Vectors { left: vec![1.0, 0.0], right: vec![1.0, 1.0] },
            1 << 20,
        )
        .unwrap();
        assert_eq!(s.entries(), &[(0, 1.0)]);
        assert!(!s.lattice().is_periodic());
    }

    #[test]
    fn budget_is_enforced() {
        let err = mps_state(&ghz_mps(), 12, &MpsClosure::Trace, 1000).unwrap_err();
        assert!(matches!(err, CoreError::BudgetExceeded { .. }));
    }

    #[test]
    fn parity_projectors() {
        let e = toric_tensor(SiteKind::Even).matrix();
        let o = toric_tensor(SiteKind::Odd).matrix();
        let id = Mat::<f64>::identity(16, 16);
        let e2 = &e * &e;
        let eo = &e * &o;
        let sum = &e + &o;
        assert!(max_abs_diff(&e2, &e) < 1e-14);
        assert!(max_abs_diff(&(&o * &o), &o) < 1e-14);
        assert!(max_abs_diff(&eo, &Mat::zeros(16, 16)) < 1e-14);
        assert!(max_abs_diff(&sum, &id) < 1e-14);
        assert!(max_abs_diff(&e, &e.transpose().to_owned()) < 1e-14);
        // Even on |0000> keeps it, on |0001> kills it.
        assert_eq!(e[(0, 0)], 1.0);
        assert_eq!(e[(1, 1)], 0.0);
    }

    #[test]
    fn two_even_minus_identity_is_zzzz() {
        let e = toric_tensor(SiteKind::Even).matrix();
        for r in 0..16 {
            for c in 0..16 {
                let zzzz = if r == c { if (r as u32).count_ones() % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 };
                let lhs = 2.0 * e[(r, c)] - if r == c { 1.0 } else { 0.0 };
                assert_eq!(lhs, zzzz);
            }
        }
    }
}
