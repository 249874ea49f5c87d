//! Global Hamiltonians `H = sum_t h_t (x) I` assembled from placed local
//! projectors, with exact matrix-free application.

use faer::Mat;

use crate::error::{CoreError, Result};
use crate::kernel::{LocalProjector, PlacedKernel};
use crate::lattice::{Boundary, LatticeSpec};
use crate::state::SparseState;

/// Largest dimension for which a contiguous vector backend is built.
pub const MAX_DENSE_APPLY_QUBITS: usize = 24;

/// Largest dimension for which the full matrix may be materialized.
pub const MAX_DENSE_MATRIX_DIM: usize = 1 << 13;

#[derive(Debug, Clone)]
pub struct Term {
    placed: PlacedKernel,
}

impl Term {
    pub fn footprint(&self) -> &[usize] {
        self.placed.sites()
    }

    pub fn placed(&self) -> &PlacedKernel {
        &self.placed
    }
}

#[derive(Debug, Clone)]
pub struct GlobalHamiltonian {
    lattice: LatticeSpec,
    terms: Vec<Term>,
}

impl GlobalHamiltonian {
    pub fn new(lattice: LatticeSpec) -> Result<Self> {
        lattice.validate()?;
        lattice.check_key_width()?;
        Ok(GlobalHamiltonian { lattice, terms: Vec::new() })
    }

    /// Place `h` on `sites` (local site `p` of `h` goes to `sites[p]`).
    pub fn add_term(&mut self, h: &LocalProjector, sites: Vec<usize>) -> Result<()> {
        let placed = PlacedKernel::new(h, self.lattice, sites)?;
        self.terms.push(Term { placed });
        Ok(())
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.lattice.num_qubits()
    }

    fn check_lattice(&self, psi: &SparseState) -> Result<()> {
        if *psi.lattice() != self.lattice {
            return Err(CoreError::Geometry(format!(
                "state lives on {:?}, Hamiltonian on {:?}",
                psi.lattice(),
                self.lattice
            )));
        }
        Ok(())
    }

    /// Exact `H psi`.
    pub fn apply(&self, psi: &SparseState) -> Result<SparseState> {
        self.check_lattice(psi)?;
        let t = self.terms.len() as f64;
        let mut out: Vec<(u128, f64)> = psi.entries().iter().map(|&(k, a)| (k, t * a)).collect();
        for term in &self.terms {
            out.extend(term.placed.project(psi).entries().iter().map(|&(k, a)| (k, -a)));
        }
        Ok(SparseState::from_entries(self.lattice, out))
    }

    /// `<psi|h_t|psi>` for every term.
    pub fn term_energies(&self, psi: &SparseState) -> Result<Vec<f64>> {
        self.check_lattice(psi)?;
        Ok(self.terms.iter().map(|t| t.placed.term_energy(psi)).collect())
    }

    /// `<psi|H|psi> / <psi|psi>`, summed as `sum_t ||h_t psi||^2` so it is
    /// nonnegative by construction.
    pub fn rayleigh(&self, psi: &SparseState) -> Result<f64> {
        if psi.is_zero() {
            return Err(CoreError::ZeroState);
        }
        Ok(self.term_energies(psi)?.iter().sum::<f64>() / psi.norm_sqr())
    }

    pub fn dense_operator(&self) -> Result<DenseHamiltonian> {
        DenseHamiltonian::new(self)
    }

    pub fn dense_matrix(&self) -> Result<Mat<f64>> {
        let nq = self.num_qubits();
        if nq >= 63 || (1usize << nq) > MAX_DENSE_MATRIX_DIM {
            return Err(CoreError::BudgetExceeded {
                what: "dense Hamiltonian matrix".into(),
                needed: 1u128 << nq.min(127),
                budget: MAX_DENSE_MATRIX_DIM as u128,
            });
        }
        let dim = 1usize << nq;
        let mut h = Mat::<f64>::zeros(dim, dim);
        for i in 0..dim {
            h[(i, i)] = self.terms.len() as f64;
        }
        for term in &self.terms {
            let p = &term.placed;
            let comp = ((1u128 << nq) - 1) & !p.footprint_mask();
            let cols: Vec<Vec<(usize, f64)>> = p
                .kernel()
                .columns()
                .iter()
                .map(|c| c.iter().map(|&(lk, b)| (p.scatter(lk) as usize, b)).collect())
                .collect();
            for_each_submask(comp, |rest| {
                let rest = rest as usize;
                for col in &cols {
                    for &(a, x) in col {
                        for &(b, y) in col {
                            h[(rest | a, rest | b)] -= x * y;
                        }
                    }
                }
            });
        }
        Ok(h)
    }
}

fn for_each_submask(mask: u128, mut f: impl FnMut(u128)) {
    let mut sub = 0u128;
    loop {
        f(sub);
        if sub == mask {
            break;
        }
        sub = sub.wrapping_sub(mask) & mask;
    }
}

/// Periodic chains get `n` cyclic placements, open chains `n - k + 1`.
pub fn assemble_chain(h: &LocalProjector, n: usize, boundary: Boundary) -> Result<GlobalHamiltonian> {
    let k = h.sites();
    if h.site_width() != 1 {
        return Err(CoreError::ShapeMismatch("chain terms act on one qubit per site".into()));
    }
    if k > n {
        return Err(CoreError::Geometry(format!("footprint {k} longer than the chain ({n})")));
    }
    let mut ham = GlobalHamiltonian::new(LatticeSpec::chain(n, boundary)?)?;
    let starts = match boundary {
        Boundary::Periodic => n,
        Boundary::Open => n - k + 1,
    };
    for i in 0..starts {
        ham.add_term(h, (0..k).map(|p| (i + p) % n).collect())?;
    }
    Ok(ham)
}

/// Window sites in local order: top-left, top-right, bottom-left, bottom-right.
pub fn window_sites(lattice: &LatticeSpec, r: usize, c: usize) -> Vec<usize> {
    let (rows, cols) = (lattice.rows(), lattice.cols());
    let (r1, c1) = ((r + 1) % rows, (c + 1) % cols);
    vec![
        lattice.site_index(r, c),
        lattice.site_index(r, c1),
        lattice.site_index(r1, c),
        lattice.site_index(r1, c1),
    ]
}

fn check_window(h: &LocalProjector) -> Result<()> {
    if h.sites() != 4 || h.site_width() != 4 {
        return Err(CoreError::ShapeMismatch("expected a 2x2 window projector".into()));
    }
    Ok(())
}

/// One window term per site, wrapping around the torus.
pub fn assemble_torus(h: &LocalProjector, rows: usize, cols: usize) -> Result<GlobalHamiltonian> {
    check_window(h)?;
    let lat = LatticeSpec::torus(rows, cols)?;
    let mut ham = GlobalHamiltonian::new(lat)?;
    for r in 0..rows {
        for c in 0..cols {
            ham.add_term(h, window_sites(&lat, r, c))?;
        }
    }
    Ok(ham)
}

/// Every window fully inside an open patch.
pub fn assemble_patch(h: &LocalProjector, rows: usize, cols: usize) -> Result<GlobalHamiltonian> {
    check_window(h)?;
    let lat = LatticeSpec::patch(rows, cols)?;
    let mut ham = GlobalHamiltonian::new(lat)?;
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            ham.add_term(h, window_sites(&lat, r, c))?;
        }
    }
    Ok(ham)
}

/// A symmetric operator on `R^dim` accessed only through matrix-vector products.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

struct DenseTerm {
    rests: Vec<usize>,
    cols: Vec<Vec<(usize, f64)>>,
}

/// Contiguous-vector backend of a [`GlobalHamiltonian`].
pub struct DenseHamiltonian {
    dim: usize,
    diag: f64,
    terms: Vec<DenseTerm>,
}

impl DenseHamiltonian {
    pub fn new(h: &GlobalHamiltonian) -> Result<Self> {
        let nq = h.num_qubits();
        if nq > MAX_DENSE_APPLY_QUBITS {
            return Err(CoreError::BudgetExceeded {
                what: "contiguous state vector".into(),
                needed: 1u128 << nq,
                budget: 1u128 << MAX_DENSE_APPLY_QUBITS,
            });
        }
        let full = (1u128 << nq) - 1;
        let terms = h
            .terms
            .iter()
            .map(|t| {
                let p = &t.placed;
                let mut rests = Vec::new();
                for_each_submask(full & !p.footprint_mask(), |r| rests.push(r as usize));
                let cols = p
                    .kernel()
                    .columns()
                    .iter()
                    .map(|c| c.iter().map(|&(lk, b)| (p.scatter(lk) as usize, b)).collect())
                    .collect();
                DenseTerm { rests, cols }
            })
            .collect();
        Ok(DenseHamiltonian { dim: 1 << nq, diag: h.terms.len() as f64, terms })
    }
}

impl LinearOperator for DenseHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.diag * xi;
        }
        for t in &self.terms {
            for &rest in &t.rests {
                for col in &t.cols {
                    let c: f64 = col.iter().map(|&(off, b)| b * x[rest | off]).sum();
                    if c != 0.0 {
                        for &(off, b) in col {
                            y[rest | off] -= c * b;
                        }
                    }
                }
            }
        }
    }
}

impl LinearOperator for Mat<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = (0..self.ncols()).map(|c| self[(r, c)] * x[c]).sum();
        }
    }
}
