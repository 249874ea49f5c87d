//! Dense and Krylov eigensolvers, ground-space extraction and subspace
//! intersection by alternating projections.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hamiltonian::{GlobalHamiltonian, LinearOperator, MAX_DENSE_MATRIX_DIM};
use crate::kernel::{KernelSpace, PlacedKernel, SparseVec};
use crate::lattice::LatticeSpec;
use crate::state::SparseState;

/// Eigenvalues below this count as null.
pub const TAU_NULL: f64 = 1e-8;
/// Certification threshold for the deflated spectrum above a candidate ground space.
pub const TAU_GAP: f64 = 1e-4;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverMeta {
    pub solver: String,
    pub iterations: usize,
    pub seed: Option<u64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub null_dim: usize,
    pub tau_null: f64,
    pub meta: SolverMeta,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectralResult {
    fn finish(mut pairs: Vec<(f64, f64, Vec<f64>)>, meta: SolverMeta) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let null_dim = pairs.iter().filter(|p| p.0 < TAU_NULL).count();
        let mut out = SpectralResult {
            eigenvalues: Vec::with_capacity(pairs.len()),
            residuals: Vec::with_capacity(pairs.len()),
            null_dim,
            tau_null: TAU_NULL,
            meta,
            eigenvectors: Vec::with_capacity(pairs.len()),
        };
        for (l, r, v) in pairs {
            out.eigenvalues.push(l);
            out.residuals.push(r);
            if !v.is_empty() {
                out.eigenvectors.push(v);
            }
        }
        out
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn dense_budget(dim: usize) -> Result<()> {
    if dim > MAX_DENSE_MATRIX_DIM {
        return Err(CoreError::BudgetExceeded {
            what: "dense spectrum".into(),
            needed: dim as u128,
            budget: MAX_DENSE_MATRIX_DIM as u128,
        });
    }
    Ok(())
}

/// Full eigendecomposition with per-pair residuals `||H v - lambda v||`.
pub fn dense_spectrum(h: &GlobalHamiltonian) -> Result<SpectralResult> {
    dense_spectrum_matrix(&h.dense_matrix()?)
}

pub fn dense_spectrum_matrix(m: &Mat<f64>) -> Result<SpectralResult> {
    dense_budget(m.nrows())?;
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
    let (u, s) = (eig.U(), eig.S().column_vector());
    let hu = m * u;
    let n = m.nrows();
    let pairs = (0..n)
        .map(|j| {
            let lambda = s[j];
            let r = (0..n).map(|i| (hu[(i, j)] - lambda * u[(i, j)]).powi(2)).sum::<f64>().sqrt();
            (lambda, r, (0..n).map(|i| u[(i, j)]).collect())
        })
        .collect();
    let meta = SolverMeta { solver: "dense".into(), iterations: 1, seed: None, tolerance: 0.0 };
    Ok(SpectralResult::finish(pairs, meta))
}

/// Eigenvalues only; residuals are not computed.
pub fn dense_eigenvalues(h: &GlobalHamiltonian) -> Result<SpectralResult> {
    let m = h.dense_matrix()?;
    let vals = m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
    let meta = SolverMeta { solver: "dense-values".into(), iterations: 1, seed: None, tolerance: 0.0 };
    let mut r = SpectralResult::finish(vals.into_iter().map(|l| (l, f64::NAN, Vec::new())).collect(), meta);
    r.residuals.clear();
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub tol: f64,
    pub seed: u64,
    /// Krylov dimension per run; `None` picks `max(2k, 50)`.
    pub ncv: Option<usize>,
    /// Restarts per eigenpair; the iteration cap is `ncv * max_restarts`.
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, seed: 0, ncv: None, max_restarts: 10 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(w, -c, v);
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Dense copy of a kernel space whose keys index the operator's basis.
pub fn dense_columns(space: &KernelSpace, dim: usize) -> Result<Vec<Vec<f64>>> {
    if space.ambient_dim() != dim as u128 {
        return Err(CoreError::DimensionMismatch { expected: dim as u128, found: space.ambient_dim() });
    }
    Ok(space
        .columns()
        .iter()
        .map(|c| {
            let mut v = vec![0.0; dim];
            for &(k, a) in c {
                v[k as usize] = a;
            }
            v
        })
        .collect())
}

struct LockedLanczos<'a> {
    op: &'a dyn LinearOperator,
    locked: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    scale: f64,
    matvecs: usize,
}

impl LockedLanczos<'_> {
    fn random_start(&mut self) -> Vec<f64> {
        let n = self.op.dim();
        (0..n).map(|_| StandardNormal.sample(&mut self.rng)).collect()
    }

    /// Lowest eigenpair of the operator on the complement of `locked`.
    fn next_pair(&mut self, ncv: usize, restarts: usize, tol: f64) -> Result<(f64, f64, Vec<f64>)> {
        let n = self.op.dim();
        let mut start = self.random_start();
        let mut last_residual = f64::INFINITY;
        for _ in 0..=restarts {
            orthogonalize(&mut start, &self.locked);
            let s = norm(&start);
            if s < 1e-300 {
                return Err(CoreError::NoConvergence("start vector lies in the locked space".into()));
            }
            start.iter_mut().for_each(|x| *x /= s);
            let m = ncv.min(n - self.locked.len());
            let mut basis: Vec<Vec<f64>> = vec![start.clone()];
            let (mut alpha, mut beta) = (Vec::with_capacity(m), Vec::with_capacity(m));
            let mut w = vec![0.0; n];
            for j in 0..m {
                self.op.apply(&basis[j], &mut w);
                self.matvecs += 1;
                let av = norm(&w);
                let a = dot(&basis[j], &w);
                alpha.push(a);
                orthogonalize(&mut w, &self.locked);
                orthogonalize(&mut w, &basis);
                let b = norm(&w);
                // An exhausted Krylov space leaves only rounding noise in `w`.
                if j + 1 == m || b <= 1e-10 * av.max(self.scale * 1e-2) {
                    break;
                }
                beta.push(b);
                let mut next: Vec<f64> = w.iter().map(|x| x / b).collect();
                orthogonalize(&mut next, &self.locked);
                orthogonalize(&mut next, &basis);
                let nn = norm(&next);
                next.iter_mut().for_each(|x| *x /= nn);
                basis.push(next);
            }
            let k = alpha.len();
            let t = Mat::<f64>::from_fn(k, k, |r, c| {
                if r == c {
                    alpha[r]
                } else if r.abs_diff(c) == 1 {
                    beta[r.min(c)]
                } else {
                    0.0
                }
            });
            let eig = t.self_adjoint_eigen(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
            let (y, theta) = (eig.U(), eig.S().column_vector());
            self.scale = self.scale.max(theta[k - 1].abs());
            let mut x = vec![0.0; n];
            for (i, v) in basis.iter().take(k).enumerate() {
                axpy(&mut x, y[(i, 0)], v);
            }
            orthogonalize(&mut x, &self.locked);
            let xn = norm(&x);
            x.iter_mut().for_each(|v| *v /= xn);
            self.op.apply(&x, &mut w);
            self.matvecs += 1;
            let lambda = dot(&x, &w);
            axpy(&mut w, -lambda, &x);
            // Residual within the complement of the locked space.
            orthogonalize(&mut w, &self.locked);
            let r = norm(&w);
            last_residual = r;
            if r <= tol * self.scale.max(1.0) {
                return Ok((lambda, r, x));
            }
            start = x;
        }
        Err(CoreError::NoConvergence(format!(
            "Lanczos residual {last_residual:e} above {:e} after {} restarts",
            tol * self.scale.max(1.0),
            restarts
        )))
    }
}

/// The `k` smallest eigenvalues on the orthogonal complement of `deflate`.
/// Each eigenpair comes from its own restarted Lanczos run with full
/// reorthogonalization against the Krylov basis and every locked vector,
/// so degenerate eigenvalues are found with their multiplicity.
pub fn lowest_eigs(
    op: &dyn LinearOperator,
    k: usize,
    opts: &LanczosOptions,
    deflate: Option<&KernelSpace>,
) -> Result<SpectralResult> {
    if k == 0 {
        return Err(CoreError::InvalidParameter("k must be >= 1".into()));
    }
    let locked = match deflate {
        Some(space) => dense_columns(space, op.dim())?,
        None => Vec::new(),
    };
    if locked.len() + k > op.dim() {
        return Err(CoreError::InvalidParameter(format!(
            "{k} eigenpairs requested above a {}-dimensional deflation space in dimension {}",
            locked.len(),
            op.dim()
        )));
    }
    let ncv = opts.ncv.unwrap_or((2 * k).max(50));
    let mut solver = LockedLanczos { op, locked, rng: ChaCha8Rng::seed_from_u64(opts.seed), scale: 1.0, matvecs: 0 };
    let mut pairs = Vec::with_capacity(k);
    for _ in 0..k {
        let (l, r, v) = solver.next_pair(ncv, opts.max_restarts, opts.tol)?;
        solver.locked.push(v.clone());
        pairs.push((l, r, v));
    }
    let meta = SolverMeta {
        solver: "lanczos".into(),
        iterations: solver.matvecs,
        seed: Some(opts.seed),
        tolerance: opts.tol,
    };
    Ok(SpectralResult::finish(pairs, meta))
}

#[derive(Debug, Clone)]
pub struct GroundSpace {
    pub space: KernelSpace,
    /// Largest `||H v||` over the returned basis.
    pub max_residual: f64,
    /// Lowest eigenvalue on the complement of the returned space.
    pub gap_above: f64,
    pub matvecs: usize,
}

fn space_from_dense(vectors: &[Vec<f64>], qubits: usize, label: &str) -> Result<KernelSpace> {
    let gens: Vec<SparseVec> = vectors
        .iter()
        .map(|v| v.iter().enumerate().filter(|(_, a)| a.abs() > 1e-14).map(|(i, &a)| (i as u128, a)).collect())
        .collect();
    KernelSpace::from_generators(qubits, gens, label)
}

/// Eigen mode: lock Lanczos eigenpairs while they stay below `tau_null`; the
/// first eigenvalue at or above it is reported as the gap.
pub fn ground_space(op: &dyn LinearOperator, tau_null: f64, opts: &LanczosOptions) -> Result<GroundSpace> {
    let n = op.dim();
    if !n.is_power_of_two() {
        return Err(CoreError::InvalidParameter("operator dimension must be a power of two".into()));
    }
    let ncv = opts.ncv.unwrap_or(50);
    let mut solver = LockedLanczos { op, locked: Vec::new(), rng: ChaCha8Rng::seed_from_u64(opts.seed), scale: 1.0, matvecs: 0 };
    let mut max_residual: f64 = 0.0;
    loop {
        if solver.locked.len() == n {
            return Ok(GroundSpace {
                space: space_from_dense(&solver.locked, n.trailing_zeros() as usize, "ground space")?,
                max_residual,
                gap_above: f64::INFINITY,
                matvecs: solver.matvecs,
            });
        }
        let (l, r, v) = solver.next_pair(ncv, opts.max_restarts, opts.tol)?;
        if l >= tau_null {
            return Ok(GroundSpace {
                space: space_from_dense(&solver.locked, n.trailing_zeros() as usize, "ground space")?,
                max_residual,
                gap_above: l,
                matvecs: solver.matvecs,
            });
        }
        max_residual = max_residual.max(r);
        solver.locked.push(v);
    }
}

/// Candidate mode: the span of `candidates` is accepted as the ground space
/// once every basis vector is annihilated (`||H v|| <= tau_null`) and the
/// spectrum on its complement starts above `tau_gap`.
pub fn ground_space_candidates(
    h: &GlobalHamiltonian,
    op: &dyn LinearOperator,
    candidates: &[SparseState],
    tau_null: f64,
    tau_gap: f64,
    opts: &LanczosOptions,
) -> Result<GroundSpace> {
    let space = KernelSpace::from_states(candidates, "candidate ground space")?;
    let mut max_residual: f64 = 0.0;
    for i in 0..space.dim() {
        let v = space.column_state(*h.lattice(), i);
        let r = h.apply(&v)?.norm();
        max_residual = max_residual.max(r);
        if r > tau_null {
            return Err(CoreError::Certification(format!("candidate {i} has ||H v|| = {r:e}")));
        }
    }
    let above = lowest_eigs(op, 1, opts, Some(&space))?;
    let gap_above = above.eigenvalues[0];
    if gap_above <= tau_gap {
        return Err(CoreError::Certification(format!(
            "extra low direction at {gap_above:e} <= {tau_gap:e} outside the candidate span"
        )));
    }
    Ok(GroundSpace { space, max_residual, gap_above, matvecs: above.meta.iterations })
}

/// An orthogonal projector accessed through its action on sparse states.
pub trait SubspaceProjector {
    fn lattice(&self) -> LatticeSpec;
    fn project(&self, psi: &SparseState) -> SparseState;
    /// A random vector in the range, distributed as `P g` for Gaussian `g`.
    fn sample_range(&self, rng: &mut ChaCha8Rng) -> Result<SparseState>;
}

impl SubspaceProjector for PlacedKernel {
    fn lattice(&self) -> LatticeSpec {
        *PlacedKernel::lattice(self)
    }

    fn project(&self, psi: &SparseState) -> SparseState {
        PlacedKernel::project(self, psi)
    }

    fn sample_range(&self, rng: &mut ChaCha8Rng) -> Result<SparseState> {
        PlacedKernel::sample_range(self, rng)
    }
}

/// Projector onto a global span.
#[derive(Debug, Clone)]
pub struct SpanProjector {
    pub space: KernelSpace,
    pub lattice: LatticeSpec,
}

impl SpanProjector {
    pub fn new(space: KernelSpace, lattice: LatticeSpec) -> Result<Self> {
        if space.ambient_qubits() != lattice.num_qubits() {
            return Err(CoreError::DimensionMismatch {
                expected: 1u128 << lattice.num_qubits(),
                found: space.ambient_dim(),
            });
        }
        Ok(SpanProjector { space, lattice })
    }
}

impl SubspaceProjector for SpanProjector {
    fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    fn project(&self, psi: &SparseState) -> SparseState {
        SparseState::from_sorted(self.lattice, self.space.project(psi.entries()))
    }

    fn sample_range(&self, rng: &mut ChaCha8Rng) -> Result<SparseState> {
        let z: Vec<f64> = (0..self.space.dim()).map(|_| StandardNormal.sample(rng)).collect();
        Ok(SparseState::from_sorted(self.lattice, self.space.combination(&z)))
    }
}

#[derive(Debug, Clone)]
pub struct IntersectionRun {
    pub iterations: usize,
    pub final_change: f64,
    /// The iterate decayed to zero: the start had no component in the intersection.
    pub vanished: bool,
    /// Distances to every input subspace never increased over the run.
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct Intersection {
    pub space: KernelSpace,
    pub fixed_points: Vec<SparseState>,
    pub runs: Vec<IntersectionRun>,
}

impl Intersection {
    pub fn all_monotone(&self) -> bool {
        self.runs.iter().all(|r| r.monotone)
    }
}

pub const INTERSECTION_STARTS: usize = 8;
pub const INTERSECTION_CHANGE_TOL: f64 = 1e-10;

/// Cyclic projections `x <- P_m ... P_1 x` from seeded random starts in the
/// range of the first projector. Each run stops once an entire cycle moves the
/// (unit-norm) start by less than `1e-10`; fixed points are orthonormalized
/// into a space contained in every input subspace.
pub fn intersect_alternating(
    projectors: &[&dyn SubspaceProjector],
    seed: u64,
    iter_cap: usize,
) -> Result<Intersection> {
    intersect_alternating_with(projectors, seed, iter_cap, INTERSECTION_STARTS)
}

pub fn intersect_alternating_with(
    projectors: &[&dyn SubspaceProjector],
    seed: u64,
    iter_cap: usize,
    starts: usize,
) -> Result<Intersection> {
    if projectors.len() < 2 {
        return Err(CoreError::InvalidParameter("need at least two subspaces".into()));
    }
    let lattice = projectors[0].lattice();
    if projectors.iter().any(|p| p.lattice() != lattice) {
        return Err(CoreError::DimensionMismatch {
            expected: 1u128 << lattice.num_qubits(),
            found: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fixed_points = Vec::new();
    let mut runs = Vec::with_capacity(starts);
    for _ in 0..starts {
        let start = projectors[0].sample_range(&mut rng)?;
        let mut x = match start.normalized() {
            Ok(x) => x,
            Err(_) => {
                runs.push(IntersectionRun { iterations: 0, final_change: 0.0, vanished: true, monotone: true });
                continue;
            }
        };
        let distances = |x: &SparseState| -> Vec<f64> { projectors.iter().map(|p| x.sub(&p.project(x)).norm()).collect() };
        let mut prev_dist = distances(&x);
        let mut monotone = true;
        let mut run = None;
        for it in 1..=iter_cap {
            let mut y = x.clone();
            for p in projectors {
                y = p.project(&y);
            }
            let change = y.sub(&x).norm();
            if y.norm() < 1e-12 {
                run = Some(IntersectionRun { iterations: it, final_change: change, vanished: true, monotone });
                break;
            }
            let d = distances(&y);
            for (new, old) in d.iter().zip(&prev_dist) {
                if *new > old * (1.0 + 1e-9) + 1e-13 {
                    monotone = false;
                }
            }
            prev_dist = d;
            x = y;
            if change < INTERSECTION_CHANGE_TOL {
                run = Some(IntersectionRun { iterations: it, final_change: change, vanished: false, monotone });
                break;
            }
            if it == iter_cap {
                return Err(CoreError::IterationCap { iterations: it, last_change: change });
            }
        }
        let run = run.expect("loop exits through a recorded run");
        if !run.vanished {
            fixed_points.push(x);
        }
        runs.push(run);
    }
    let space = if fixed_points.is_empty() {
        KernelSpace::zero(lattice.num_qubits(), "intersection")
    } else {
        KernelSpace::from_states(&fixed_points, "intersection")?
    };
    Ok(Intersection { space, fixed_points, runs })
}

/// Largest gap between consecutive eigenvalues inside `[a, b]`, with `a` and
/// `b` themselves as sentinels.
pub fn spacing_stats(eigs: &[f64], a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(CoreError::InvalidParameter(format!("empty interval [{a}, {b}]")));
    }
    let mut pts: Vec<f64> = eigs.iter().copied().filter(|&x| x >= a && x <= b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    Ok(pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::assemble_chain;
    use crate::kernel::{ghz_parent_projector, ghz_uncle_projector};
    use crate::lattice::Boundary;

    #[test]
    fn spacing_examples() {
        assert_eq!(spacing_stats(&[0.0, 1.0, 2.0], 0.0, 2.0).unwrap(), 1.0);
        assert_eq!(spacing_stats(&[0.5], 0.0, 1.0).unwrap(), 0.5);
        assert!(spacing_stats(&[0.5], 1.0, 1.0).is_err());
    }

    #[test]
    fn dense_null_dims() {
        for h in [
            assemble_chain(&ghz_parent_projector(3).unwrap(), 4, Boundary::Periodic).unwrap(),
            assemble_chain(&ghz_uncle_projector(), 4, Boundary::Periodic).unwrap(),
        ] {
            let s = dense_spectrum(&h).unwrap();
            assert_eq!(s.null_dim, 2);
            assert!(s.max_residual() < 1e-10);
        }
        let s = dense_spectrum(&assemble_chain(&ghz_uncle_projector(), 3, Boundary::Periodic).unwrap()).unwrap();
        assert!(s.eigenvalues[0] >= -1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = assemble_chain(&ghz_uncle_projector(), 8, Boundary::Periodic).unwrap();
        let dense = dense_spectrum(&h).unwrap();
        let op = h.dense_operator().unwrap();
        let k = lowest_eigs(&op, 5, &LanczosOptions { seed: 3, ..Default::default() }, None).unwrap();
        for i in 0..5 {
            assert!((k.eigenvalues[i] - dense.eigenvalues[i]).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn zero_operator() {
        let h = GlobalHamiltonian::new(LatticeSpec::chain(3, Boundary::Open).unwrap()).unwrap();
        let op = h.dense_operator().unwrap();
        let r = lowest_eigs(&op, 1, &LanczosOptions::default(), None).unwrap();
        assert_eq!(r.eigenvalues, vec![0.0]);
    }

    #[test]
    fn intersection_trivial_cases() {
        let lat = LatticeSpec::chain(2, Boundary::Open).unwrap();
        let line = |v: SparseVec| SpanProjector::new(KernelSpace::from_generators(2, vec![v], "l").unwrap(), lat).unwrap();
        let a = line(vec![(0, 1.0), (1, 1.0)]);
        let b = line(vec![(0, 1.0), (1, -1.0)]);
        let same = intersect_alternating(&[&a, &a], 1, 10).unwrap();
        assert_eq!(same.fixed_points.len(), 8);
        assert!(crate::kernel::subspace_distance(&same.space, &a.space).unwrap().value() < 1e-12);
        let none = intersect_alternating(&[&a, &b], 1, 10).unwrap();
        assert_eq!(none.space.dim(), 0);
    }
}
