//! Local ground subspaces and the projectors built from them.
//!
//! A [`KernelSpace`] stores an orthonormal basis as sparse columns over local
//! basis keys. Spans are extracted from generator sets by splitting the
//! generators into components of overlapping support and running a thin SVD on
//! each component, so structured spans with thousands of disjoint generators
//! never touch a dense ambient-sized matrix.

use std::sync::Arc;

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;
use rustc_hash::FxHashMap;

use crate::error::{CoreError, Result};
use crate::lattice::LatticeSpec;
use crate::pattern::{pattern_state, PatternBoundary, PatternSpec};
use crate::state::{SparseState, DROP_TOL};
use crate::tensor::{perturb_mps, MpsTensor, PerturbationSpec};

pub type SparseVec = Vec<(u128, f64)>;

/// Relative singular-value cutoff used when extracting spans.
pub const RANK_TOL: f64 = 1e-10;

/// Largest component handled by a dense SVD (rows x cols entries).
const DENSE_SVD_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct KernelSpace {
    qubits: usize,
    columns: Vec<SparseVec>,
    rank_tol: f64,
    label: String,
    index: FxHashMap<u128, Vec<(u32, f64)>>,
}

fn sorted_merged(mut v: SparseVec) -> SparseVec {
    v.sort_by_key(|e| e.0);
    let mut out: SparseVec = Vec::with_capacity(v.len());
    for (k, a) in v {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += a,
            _ => out.push((k, a)),
        }
    }
    out.retain(|e| e.1.abs() > DROP_TOL);
    out
}

fn sparse_dot(a: &[(u128, f64)], b: &[(u128, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl KernelSpace {
    pub fn zero(qubits: usize, label: impl Into<String>) -> Self {
        Self::from_orthonormal(qubits, Vec::new(), label)
    }

    /// Wrap columns that are already orthonormal.
    pub fn from_orthonormal(qubits: usize, columns: Vec<SparseVec>, label: impl Into<String>) -> Self {
        assert!(qubits <= crate::lattice::MAX_QUBITS);
        let columns: Vec<SparseVec> = columns.into_iter().map(sorted_merged).collect();
        let mut index: FxHashMap<u128, Vec<(u32, f64)>> = FxHashMap::default();
        for (c, col) in columns.iter().enumerate() {
            for &(k, a) in col {
                index.entry(k).or_default().push((c as u32, a));
            }
        }
        KernelSpace { qubits, columns, rank_tol: RANK_TOL, label: label.into(), index }
    }

    pub fn from_generators(qubits: usize, gens: Vec<SparseVec>, label: impl Into<String>) -> Result<Self> {
        Self::from_generators_with_tol(qubits, gens, RANK_TOL, label)
    }

    /// Orthonormal basis of the span of `gens`.
    pub fn from_generators_with_tol(
        qubits: usize,
        gens: Vec<SparseVec>,
        rank_tol: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if qubits > crate::lattice::MAX_QUBITS {
            return Err(CoreError::BudgetExceeded {
                what: "kernel key width".into(),
                needed: qubits as u128,
                budget: crate::lattice::MAX_QUBITS as u128,
            });
        }
        let gens: Vec<SparseVec> = gens.into_iter().map(sorted_merged).filter(|g| !g.is_empty()).collect();
        let n = gens.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut owner: FxHashMap<u128, usize> = FxHashMap::default();
        for (g, gen) in gens.iter().enumerate() {
            for &(k, _) in gen {
                match owner.get(&k) {
                    Some(&o) => {
                        let (ra, rb) = (find(&mut parent, o), find(&mut parent, g));
                        if ra != rb {
                            parent[ra.max(rb)] = ra.min(rb);
                        }
                    }
                    None => {
                        owner.insert(k, g);
                    }
                }
            }
        }
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut comp_of: FxHashMap<usize, usize> = FxHashMap::default();
        for g in 0..n {
            let r = find(&mut parent, g);
            let c = *comp_of.entry(r).or_insert_with(|| {
                comps.push(Vec::new());
                comps.len() - 1
            });
            comps[c].push(g);
        }

        let mut candidates: Vec<(f64, SparseVec)> = Vec::new();
        for comp in &comps {
            candidates.extend(component_basis(&gens, comp)?);
        }
        let smax = candidates.iter().map(|c| c.0).fold(0.0, f64::max);
        let columns = candidates
            .into_iter()
            .filter(|c| c.0 > rank_tol * smax)
            .map(|c| c.1)
            .collect();
        let mut space = Self::from_orthonormal(qubits, columns, label);
        space.rank_tol = rank_tol;
        Ok(space)
    }

    pub fn ambient_qubits(&self) -> usize {
        self.qubits
    }

    pub fn ambient_dim(&self) -> u128 {
        if self.qubits >= 128 {
            u128::MAX
        } else {
            1u128 << self.qubits
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.columns
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Kernel columns touching basis key `k`, with their amplitudes there.
    pub fn columns_at(&self, k: u128) -> &[(u32, f64)] {
        self.index.get(&k).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `B^T v` for a sorted sparse vector.
    pub fn coefficients(&self, v: &[(u128, f64)]) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for &(k, a) in v {
            for &(col, b) in self.columns_at(k) {
                c[col as usize] += b * a;
            }
        }
        c
    }

    /// `B c` as a sorted sparse vector.
    pub fn combination(&self, coeffs: &[f64]) -> SparseVec {
        let mut out = Vec::new();
        for (col, &c) in self.columns.iter().zip(coeffs) {
            if c != 0.0 {
                out.extend(col.iter().map(|&(k, b)| (k, c * b)));
            }
        }
        sorted_merged(out)
    }

    pub fn project(&self, v: &[(u128, f64)]) -> SparseVec {
        self.combination(&self.coefficients(v))
    }

    /// `|| v - P v ||`.
    pub fn residual_norm(&self, v: &[(u128, f64)]) -> f64 {
        let p = self.project(v);
        let mut diff: SparseVec = v.to_vec();
        diff.extend(p.into_iter().map(|(k, a)| (k, -a)));
        let diff = sorted_merged(diff);
        diff.iter().fold(0.0, |acc, e| acc + e.1 * e.1).sqrt()
    }

    /// Largest deviation of `B^T B` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let g = sparse_dot(&self.columns[i], &self.columns[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Embed global states of `lattice` as generators.
    pub fn from_states(states: &[SparseState], label: impl Into<String>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(CoreError::InvalidParameter("no states supplied".into()));
        };
        let lattice = *first.lattice();
        if states.iter().any(|s| *s.lattice() != lattice) {
            return Err(CoreError::InvalidParameter("states live on different lattices".into()));
        }
        let gens = states.iter().map(|s| s.entries().to_vec()).collect();
        Self::from_generators(lattice.num_qubits(), gens, label)
    }

    pub fn column_state(&self, lattice: LatticeSpec, i: usize) -> SparseState {
        SparseState::from_sorted(lattice, self.columns[i].clone())
    }
}

/// Orthonormal directions of one component with their singular values.
fn component_basis(gens: &[SparseVec], comp: &[usize]) -> Result<Vec<(f64, SparseVec)>> {
    if comp.len() == 1 {
        let g = &gens[comp[0]];
        let norm = g.iter().fold(0.0, |acc, e| acc + e.1 * e.1).sqrt();
        return Ok(vec![(norm, g.iter().map(|&(k, a)| (k, a / norm)).collect())]);
    }
    let mut keys: Vec<u128> = comp.iter().flat_map(|&g| gens[g].iter().map(|e| e.0)).collect();
    keys.sort_unstable();
    keys.dedup();
    let row_of = |k: u128| keys.binary_search(&k).expect("key collected above");
    let ncols = comp.len();
    if keys.len() * ncols <= DENSE_SVD_LIMIT {
        let mut m = Mat::<f64>::zeros(keys.len(), ncols);
        for (c, &g) in comp.iter().enumerate() {
            for &(k, a) in &gens[g] {
                m[(row_of(k), c)] = a;
            }
        }
        let svd = m.thin_svd().map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
        let (u, s) = (svd.U(), svd.S().column_vector());
        let mut out = Vec::with_capacity(s.nrows());
        for j in 0..s.nrows() {
            let col: SparseVec = (0..keys.len())
                .filter(|&r| u[(r, j)].abs() > DROP_TOL)
                .map(|r| (keys[r], u[(r, j)]))
                .collect();
            out.push((s[j], col));
        }
        return Ok(out);
    }
    // Huge supports with few generators: eigen-decompose the Gram matrix.
    let mut gram = Mat::<f64>::zeros(ncols, ncols);
    for i in 0..ncols {
        for j in i..ncols {
            let g = sparse_dot(&gens[comp[i]], &gens[comp[j]]);
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = gram.self_adjoint_eigen(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
    let (vecs, vals) = (eig.U(), eig.S().column_vector());
    let mut out = Vec::new();
    for j in (0..ncols).rev() {
        let sigma = vals[j].max(0.0).sqrt();
        if sigma == 0.0 {
            continue;
        }
        let mut col = Vec::new();
        for (c, &g) in comp.iter().enumerate() {
            let w = vecs[(c, j)] / sigma;
            col.extend(gens[g].iter().map(|&(k, a)| (k, w * a)));
        }
        out.push((sigma, sorted_merged(col)));
    }
    Ok(out)
}

/// `h = I - B B^T` acting on `sites` consecutive local sites of `site_width`
/// qubits each. Local site `p` owns local qubits `site_width * p ..`.
#[derive(Debug, Clone)]
pub struct LocalProjector {
    kernel: Arc<KernelSpace>,
    sites: usize,
    site_width: usize,
}

impl LocalProjector {
    pub fn new(kernel: KernelSpace, sites: usize, site_width: usize) -> Result<Self> {
        if sites * site_width != kernel.ambient_qubits() {
            return Err(CoreError::ShapeMismatch(format!(
                "{sites} sites of width {site_width} do not cover {} kernel qubits",
                kernel.ambient_qubits()
            )));
        }
        Ok(LocalProjector { kernel: Arc::new(kernel), sites, site_width })
    }

    pub fn kernel(&self) -> &KernelSpace {
        &self.kernel
    }

    pub fn kernel_arc(&self) -> Arc<KernelSpace> {
        Arc::clone(&self.kernel)
    }

    pub fn footprint(&self) -> Vec<usize> {
        (0..self.sites).collect()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn site_width(&self) -> usize {
        self.site_width
    }

    pub fn qubits(&self) -> usize {
        self.kernel.ambient_qubits()
    }

    /// `h v` on a local sparse vector.
    pub fn apply_local(&self, v: &[(u128, f64)]) -> SparseVec {
        let mut out: SparseVec = v.to_vec();
        out.extend(self.kernel.project(v).into_iter().map(|(k, a)| (k, -a)));
        sorted_merged(out)
    }

    /// Dense matrix of `h` for small footprints.
    pub fn dense_matrix(&self) -> Result<Mat<f64>> {
        let q = self.qubits();
        if q > 13 {
            return Err(CoreError::BudgetExceeded {
                what: "dense local projector".into(),
                needed: 1u128 << q,
                budget: 1 << 13,
            });
        }
        let dim = 1usize << q;
        let mut h = Mat::<f64>::identity(dim, dim);
        for col in self.kernel.columns() {
            for &(a, x) in col {
                for &(b, y) in col {
                    h[(a as usize, b as usize)] -= x * y;
                }
            }
        }
        Ok(h)
    }
}

/// A local kernel placed on concrete sites of a lattice.
#[derive(Debug, Clone)]
pub struct PlacedKernel {
    kernel: Arc<KernelSpace>,
    lattice: LatticeSpec,
    sites: Vec<usize>,
    width: usize,
    footprint_mask: u128,
}

impl PlacedKernel {
    pub fn new(projector: &LocalProjector, lattice: LatticeSpec, sites: Vec<usize>) -> Result<Self> {
        lattice.check_key_width()?;
        if sites.len() != projector.sites() || projector.site_width() != lattice.qubits_per_site() {
            return Err(CoreError::ShapeMismatch("placement does not match the projector footprint".into()));
        }
        let mut footprint_mask = 0u128;
        for &s in &sites {
            if s >= lattice.num_sites() {
                return Err(CoreError::Geometry(format!("site {s} outside the lattice")));
            }
            let m = lattice.site_mask(s);
            if footprint_mask & m != 0 {
                return Err(CoreError::Geometry("footprint repeats a site".into()));
            }
            footprint_mask |= m;
        }
        Ok(PlacedKernel {
            kernel: projector.kernel_arc(),
            lattice,
            sites,
            width: projector.site_width(),
            footprint_mask,
        })
    }

    pub fn kernel(&self) -> &KernelSpace {
        &self.kernel
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn footprint_mask(&self) -> u128 {
        self.footprint_mask
    }

    #[inline]
    pub fn gather(&self, key: u128) -> u128 {
        let m = (1u128 << self.width) - 1;
        let mut local = 0u128;
        for (p, &s) in self.sites.iter().enumerate() {
            local |= ((key >> (self.width * s)) & m) << (self.width * p);
        }
        local
    }

    #[inline]
    pub fn scatter(&self, local: u128) -> u128 {
        let m = (1u128 << self.width) - 1;
        let mut key = 0u128;
        for (p, &s) in self.sites.iter().enumerate() {
            key |= ((local >> (self.width * p)) & m) << (self.width * s);
        }
        key
    }

    /// `(B^T (x) I) psi` as `(rest, column, coefficient)` triples, merged and sorted.
    pub fn coefficients(&self, psi: &SparseState) -> Vec<(u128, u32, f64)> {
        let mut acc: Vec<(u128, u32, f64)> = Vec::new();
        for &(key, amp) in psi.entries() {
            let local = self.gather(key);
            let rest = key & !self.footprint_mask;
            for &(col, b) in self.kernel.columns_at(local) {
                acc.push((rest, col, b * amp));
            }
        }
        acc.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(u128, u32, f64)> = Vec::with_capacity(acc.len());
        for (r, c, v) in acc {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged
    }

    fn expand(&self, coeffs: &[(u128, u32, f64)]) -> SparseState {
        let mut out = Vec::new();
        for &(rest, col, c) in coeffs {
            if c == 0.0 {
                continue;
            }
            for &(lk, b) in &self.kernel.columns()[col as usize] {
                out.push((rest | self.scatter(lk), c * b));
            }
        }
        SparseState::from_entries(self.lattice, out)
    }

    /// `(B B^T (x) I) psi`.
    pub fn project(&self, psi: &SparseState) -> SparseState {
        self.expand(&self.coefficients(psi))
    }

    /// `(h (x) I) psi`.
    pub fn apply_term(&self, psi: &SparseState) -> SparseState {
        psi.sub(&self.project(psi))
    }

    /// `<psi| h (x) I |psi> = ||psi||^2 - ||(B^T (x) I) psi||^2`, computed as
    /// `||(h (x) I) psi||^2` to avoid cancellation.
    pub fn term_energy(&self, psi: &SparseState) -> f64 {
        self.apply_term(psi).norm_sqr()
    }

    /// `P g` for standard Gaussian `g` over the full ambient space. Because
    /// `B` has orthonormal columns, `(B^T (x) I) g` is itself i.i.d. Gaussian.
    pub fn sample_range(&self, rng: &mut impl Rng) -> Result<SparseState> {
        let comp = self.lattice_mask() & !self.footprint_mask;
        let rest_bits = comp.count_ones();
        let terms = (self.kernel.dim() as u128) << rest_bits;
        if rest_bits >= 40 || terms > 1 << 24 {
            return Err(CoreError::BudgetExceeded {
                what: "range sample".into(),
                needed: terms,
                budget: 1 << 24,
            });
        }
        let mut coeffs = Vec::with_capacity(terms as usize);
        let mut rest = 0u128;
        loop {
            for col in 0..self.kernel.dim() {
                let z: f64 = rng.sample(StandardNormal);
                coeffs.push((rest, col as u32, z));
            }
            if rest == comp {
                break;
            }
            rest = (rest.wrapping_sub(comp)) & comp;
        }
        Ok(self.expand(&coeffs))
    }

    fn lattice_mask(&self) -> u128 {
        let nq = self.lattice.num_qubits();
        if nq == 128 {
            u128::MAX
        } else {
            (1u128 << nq) - 1
        }
    }
}

/// Largest singular value of `P_U - P_V`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SubspaceDistance(pub f64);

impl SubspaceDistance {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_ambient(u: &KernelSpace, v: &KernelSpace) -> Result<()> {
    if u.ambient_qubits() != v.ambient_qubits() {
        return Err(CoreError::DimensionMismatch { expected: u.ambient_dim(), found: v.ambient_dim() });
    }
    Ok(())
}

/// Columns of `(I - P_V) U`.
fn residual_columns(u: &KernelSpace, v: &KernelSpace) -> Vec<SparseVec> {
    u.columns()
        .iter()
        .map(|col| {
            let mut r: SparseVec = col.clone();
            r.extend(v.project(col).into_iter().map(|(k, a)| (k, -a)));
            sorted_merged(r)
        })
        .collect()
}

/// Operator norm of `P_U - P_V`. Equal dimensions give `sin` of the largest
/// principal angle, computed from the residual `(I - P_V) U` directly;
/// different dimensions always give 1.
pub fn subspace_distance(u: &KernelSpace, v: &KernelSpace) -> Result<SubspaceDistance> {
    check_ambient(u, v)?;
    if u.dim() != v.dim() {
        return Ok(SubspaceDistance(1.0));
    }
    if u.dim() == 0 {
        return Ok(SubspaceDistance(0.0));
    }
    let r = residual_columns(u, v);
    let n = r.len();
    let mut gram = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = sparse_dot(&r[i], &r[j]);
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let vals = gram.self_adjoint_eigenvalues(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    Ok(SubspaceDistance(top.sqrt().min(1.0)))
}

/// `max_j ||(I - P_V) u_j||`: zero iff `U` is contained in `V`.
pub fn containment_residual(u: &KernelSpace, v: &KernelSpace) -> Result<f64> {
    check_ambient(u, v)?;
    Ok(residual_columns(u, v)
        .iter()
        .map(|r| r.iter().fold(0.0, |acc, e| acc + e.1 * e.1).sqrt())
        .fold(0.0, f64::max))
}

fn phys_bits(a: &MpsTensor) -> Result<usize> {
    let d = a.phys_dim();
    if !d.is_power_of_two() {
        return Err(CoreError::ShapeMismatch(format!("phys_dim {d} is not a power of two")));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Span over boundary pairs `(i, j)` of `sum_w <i|A_{w_1}...A_{w_k}|j> |w>`.
pub fn mps_kernel(a: &MpsTensor, k: usize) -> Result<KernelSpace> {
    if k < 2 {
        return Err(CoreError::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    let bits = phys_bits(a)?;
    let qubits = bits * k;
    if qubits > 24 {
        return Err(CoreError::BudgetExceeded {
            what: "MPS kernel words".into(),
            needed: 1u128 << qubits,
            budget: 1 << 24,
        });
    }
    let d = a.phys_dim();
    let bond = a.bond_dim();
    let mut gens: Vec<SparseVec> = vec![Vec::new(); bond * bond];
    let mut word = vec![0usize; k];
    for w in 0..(1usize << qubits) {
        for (p, slot) in word.iter_mut().enumerate() {
            *slot = (w >> (bits * p)) & (d - 1);
        }
        let prod = a.word_product(&word);
        for i in 0..bond {
            for j in 0..bond {
                let x = prod[(i, j)];
                if x != 0.0 {
                    gens[i * bond + j].push((w as u128, x));
                }
            }
        }
    }
    KernelSpace::from_generators(qubits, gens, format!("mps kernel k={k}"))
}

/// span{|000>, |0+1>, |1+0>, |111>}; key bit `p` is site `p`.
pub fn uncle_kernel_ghz() -> KernelSpace {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    KernelSpace::from_orthonormal(
        3,
        vec![vec![(0, 1.0)], vec![(4, s), (6, s)], vec![(1, s), (3, s)], vec![(7, 1.0)]],
        "GHZ uncle kernel",
    )
}

#[derive(Debug, Clone)]
pub struct EpsilonKernel {
    pub space: KernelSpace,
    pub epsilon: f64,
    /// `b_0 + b_1` or `c_0 + c_1` vanishes: the limit may differ from the
    /// generic uncle kernel.
    pub degenerate_direction: bool,
    pub b_sum: f64,
    pub c_sum: f64,
}

/// Below this (relative to `max |P|`) a level sum counts as vanishing.
pub const DEGENERACY_TOL: f64 = 1e-10;

pub fn epsilon_kernel(a: &MpsTensor, p: &PerturbationSpec, k: usize) -> Result<EpsilonKernel> {
    if p.epsilon <= 0.0 {
        return Err(CoreError::InvalidParameter(format!("epsilon must be > 0, got {}", p.epsilon)));
    }
    let perturbed = perturb_mps(a, p)?;
    let space = mps_kernel(&perturbed, k)?.with_label(format!("perturbed kernel eps={:e}", p.epsilon));
    let (b_sum, c_sum, degenerate_direction) = if a.phys_dim() == 2 && a.bond_dim() == 2 {
        let (b, c) = (p.level_sum(0, 1), p.level_sum(1, 0));
        let scale = p.max_abs().max(f64::MIN_POSITIVE);
        (b, c, b.abs() <= DEGENERACY_TOL * scale || c.abs() <= DEGENERACY_TOL * scale)
    } else {
        (f64::NAN, f64::NAN, false)
    };
    Ok(EpsilonKernel { space, epsilon: p.epsilon, degenerate_direction, b_sum, c_sum })
}

#[derive(Debug, Clone)]
pub struct UncleLimit {
    pub space: KernelSpace,
    pub epsilon: f64,
    pub grid_index: usize,
    /// `distances[i]` compares the kernels at grid points `i` and `i + 1`.
    pub distances: Vec<f64>,
    /// Geometric tail bound on the remaining drift at each grid point.
    pub tail_estimates: Vec<f64>,
    pub degenerate_direction: bool,
}

/// The kernel drifts by `O(eps)`, so adjacent grid points never agree to much
/// better than the grid spacing itself. Convergence is declared once the
/// geometric tail bound `d_i q / (1 - q)` on the remaining drift falls below
/// `tol`, with the successive distances required to be non-increasing.
pub fn uncle_limit(
    a: &MpsTensor,
    p: &PerturbationSpec,
    k: usize,
    eps_grid: &[f64],
    tol: f64,
) -> Result<UncleLimit> {
    if eps_grid.len() < 4 {
        return Err(CoreError::InvalidParameter("the epsilon grid needs at least 4 points".into()));
    }
    if eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CoreError::InvalidParameter("the epsilon grid must be positive and strictly descending".into()));
    }
    let ratios: Vec<f64> = eps_grid.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|r| (r / ratios[0] - 1.0).abs() > 1e-6) {
        return Err(CoreError::InvalidParameter("the epsilon grid must be geometric".into()));
    }
    let q = ratios[0];
    let mut kernels = Vec::with_capacity(eps_grid.len());
    let mut degenerate = false;
    for &eps in eps_grid {
        let ek = epsilon_kernel(a, &p.with_epsilon(eps)?, k)?;
        degenerate |= ek.degenerate_direction;
        kernels.push(ek.space);
    }
    let mut distances = Vec::with_capacity(kernels.len() - 1);
    for w in kernels.windows(2) {
        distances.push(subspace_distance(&w[0], &w[1])?.value());
    }
    let tail_estimates: Vec<f64> = distances.iter().map(|d| d * q / (1.0 - q)).collect();
    let done = |space: KernelSpace, i: usize, distances: Vec<f64>, tail_estimates: Vec<f64>| UncleLimit {
        space,
        epsilon: eps_grid[i],
        grid_index: i,
        distances,
        tail_estimates,
        degenerate_direction: degenerate,
    };
    if distances.iter().all(|&d| d <= 1e-12) {
        let first = kernels.swap_remove(0);
        return Ok(done(first, 0, distances, tail_estimates));
    }
    for i in 1..distances.len() {
        if distances[i] > distances[i - 1] * (1.0 + 1e-6) + 1e-13 {
            return Err(CoreError::NoConvergence(format!(
                "kernel drift increased from {:e} to {:e} at eps={:e}",
                distances[i - 1],
                distances[i],
                eps_grid[i + 1]
            )));
        }
    }
    for i in 1..distances.len() {
        if tail_estimates[i] <= tol {
            let space = kernels.swap_remove(i + 1);
            return Ok(done(space, i + 1, distances, tail_estimates));
        }
    }
    Err(CoreError::NoConvergence(format!(
        "tail estimate {:e} still above {tol:e} at the end of the grid",
        tail_estimates.last().copied().unwrap_or(f64::NAN)
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    ParentEven,
    UncleSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    E,
    O,
    S,
}

/// One generator of a region space: a boundary assignment and the state it
/// produces (possibly zero).
#[derive(Debug, Clone)]
pub struct RegionGenerator {
    pub boundary: Vec<bool>,
    pub odd: bool,
    pub state: SparseState,
}

/// Default cap on boundary assignments enumerated for a region.
pub const REGION_BOUNDARY_BUDGET: usize = 1 << 16;

/// Generators over every boundary basis assignment: all-Even patch states
/// (`E`), position-summed single-Odd patch states (`O`), or both (`S`).
pub fn region_generators(rows: usize, cols: usize, kind: RegionKind) -> Result<Vec<RegionGenerator>> {
    let patch = LatticeSpec::patch(rows, cols)?;
    patch.check_key_width()?;
    let legs = patch.open_legs().len();
    if legs >= 40 || (1usize << legs) > REGION_BOUNDARY_BUDGET {
        return Err(CoreError::BudgetExceeded {
            what: format!("boundary assignments of a {rows}x{cols} region"),
            needed: 1u128 << legs,
            budget: REGION_BOUNDARY_BUDGET as u128,
        });
    }
    let mut out = Vec::new();
    let with_even = kind != RegionKind::O;
    let with_odd = kind != RegionKind::E;
    for b in 0..(1usize << legs) {
        let bits: Vec<bool> = (0..legs).map(|i| b >> i & 1 == 1).collect();
        if with_even {
            let spec = PatternSpec::all_even(patch, PatternBoundary::Fixed(bits.clone()))?;
            out.push(RegionGenerator { boundary: bits.clone(), odd: false, state: pattern_state(&spec)? });
        }
        if with_odd {
            let mut sum = SparseState::zero(patch);
            for site in 0..patch.num_sites() {
                let spec = PatternSpec::with_odd(patch, &[site], PatternBoundary::Fixed(bits.clone()))?;
                sum = sum.add(&pattern_state(&spec)?);
            }
            out.push(RegionGenerator { boundary: bits, odd: true, state: sum });
        }
    }
    Ok(out)
}

pub fn region_span(rows: usize, cols: usize, kind: RegionKind) -> Result<KernelSpace> {
    let gens = region_generators(rows, cols, kind)?;
    let qubits = 4 * rows * cols;
    let label = format!("{kind:?}{rows}{cols}");
    KernelSpace::from_generators(qubits, gens.into_iter().map(|g| g.state.into_entries()).collect(), label)
}

/// The 2x2 window spaces: `E22` for the parent, `E22 + O22` for the uncle.
pub fn toric_window_span(kind: WindowKind) -> Result<KernelSpace> {
    match kind {
        WindowKind::ParentEven => region_span(2, 2, RegionKind::E),
        WindowKind::UncleSum => region_span(2, 2, RegionKind::S),
    }
}

pub fn ghz_parent_projector(k: usize) -> Result<LocalProjector> {
    LocalProjector::new(mps_kernel(&crate::tensor::ghz_mps(), k)?, k, 1)
}

pub fn ghz_uncle_projector() -> LocalProjector {
    LocalProjector::new(uncle_kernel_ghz(), 3, 1).expect("three one-qubit sites")
}

pub fn toric_window_projector(kind: WindowKind) -> Result<LocalProjector> {
    LocalProjector::new(toric_window_span(kind)?, 4, 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ghz_mps;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(qubits: usize, v: SparseVec) -> KernelSpace {
        KernelSpace::from_generators(qubits, vec![v], "line").unwrap()
    }

    #[test]
    fn ghz_parent_kernel() {
        let k3 = mps_kernel(&ghz_mps(), 3).unwrap();
        assert_eq!(k3.dim(), 2);
        let expected = KernelSpace::from_orthonormal(3, vec![vec![(0, 1.0)], vec![(7, 1.0)]], "ghz");
        assert!(subspace_distance(&k3, &expected).unwrap().value() < 1e-14);
        let k2 = mps_kernel(&ghz_mps(), 2).unwrap();
        let expected = KernelSpace::from_orthonormal(2, vec![vec![(0, 1.0)], vec![(3, 1.0)]], "ghz");
        assert!(subspace_distance(&k2, &expected).unwrap().value() < 1e-14);
        assert!(mps_kernel(&ghz_mps(), 1).is_err());
    }

    #[test]
    fn uncle_kernel_contains_parent() {
        let u = uncle_kernel_ghz();
        assert_eq!(u.dim(), 4);
        assert!(u.orthonormality_error() < 1e-15);
        let parent = mps_kernel(&ghz_mps(), 3).unwrap();
        assert!(containment_residual(&parent, &u).unwrap() < 1e-14);
        let d = subspace_distance(&parent, &u).unwrap().value();
        assert!(d > 0.0 && d <= 1.0);
    }

    #[test]
    fn distance_basics() {
        let a = line(2, vec![(0, 1.0)]);
        let b = line(2, vec![(1, 1.0)]);
        assert_eq!(subspace_distance(&a, &a).unwrap().value(), 0.0);
        assert!((subspace_distance(&a, &b).unwrap().value() - 1.0).abs() < 1e-15);
        let c = line(2, vec![(0, 1.0), (1, 1.0)]);
        let d = subspace_distance(&a, &c).unwrap().value();
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!(subspace_distance(&a, &line(3, vec![(0, 1.0)])).is_err());
    }

    #[test]
    fn span_extraction_handles_dependent_generators() {
        let gens = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(1, 1.0), (2, 1.0)],
            vec![(0, 1.0), (2, -1.0)],
            vec![(9, 3.0)],
            vec![(9, -3.0)],
            vec![],
        ];
        let k = KernelSpace::from_generators(4, gens, "t").unwrap();
        assert_eq!(k.dim(), 3);
        assert!(k.orthonormality_error() < 1e-14);
    }

    #[test]
    fn local_projector_is_an_orthogonal_projector() {
        let h = ghz_uncle_projector().dense_matrix().unwrap();
        let h2 = &h * &h;
        for r in 0..8 {
            for c in 0..8 {
                assert!((h2[(r, c)] - h[(r, c)]).abs() < 1e-14);
                assert!((h[(r, c)] - h[(c, r)]).abs() < 1e-15);
            }
        }
        let p = ghz_uncle_projector();
        for col in p.kernel().columns() {
            assert!(p.apply_local(col).is_empty());
        }
    }

    #[test]
    fn perturbed_kernel_rank_four() {
        let p = PerturbationSpec::random(1e-2, 2, 2, 5).unwrap();
        let ek = epsilon_kernel(&ghz_mps(), &p, 3).unwrap();
        assert_eq!(ek.space.dim(), 4);
        assert!(!ek.degenerate_direction);
        let zero = PerturbationSpec::zero(2, 2).with_epsilon(1e-3).unwrap();
        let ek0 = epsilon_kernel(&ghz_mps(), &zero, 3).unwrap();
        assert_eq!(ek0.space.dim(), 2);
        assert!(epsilon_kernel(&ghz_mps(), &PerturbationSpec::zero(2, 2), 3).is_err());
    }

    #[test]
    fn degenerate_direction_is_flagged() {
        let p = PerturbationSpec::from_entries(1e-2, &[[0.3, 1.0, -0.7, 0.2], [0.5, -1.0, 0.4, -0.1]]).unwrap();
        assert!(epsilon_kernel(&ghz_mps(), &p, 3).unwrap().degenerate_direction);
    }

    #[test]
    fn uncle_limit_generic_and_trivial() {
        let grid = [1e-1, 1e-2, 1e-3, 1e-4];
        let p = PerturbationSpec::random(1.0, 2, 2, 7).unwrap();
        let lim = uncle_limit(&ghz_mps(), &p, 3, &grid, 1e-3).unwrap();
        assert!(subspace_distance(&lim.space, &uncle_kernel_ghz()).unwrap().value() < 1e-3);
        let zero = PerturbationSpec::zero(2, 2);
        let lim0 = uncle_limit(&ghz_mps(), &zero, 3, &grid, 1e-3).unwrap();
        assert_eq!(lim0.grid_index, 0);
        assert_eq!(lim0.space.dim(), 2);
        assert!(uncle_limit(&ghz_mps(), &p, 3, &grid[..3], 1e-3).is_err());
    }

    #[test]
    fn window_spans() {
        let e = toric_window_span(WindowKind::ParentEven).unwrap();
        let s = toric_window_span(WindowKind::UncleSum).unwrap();
        assert_eq!(e.dim(), 128);
        assert_eq!(s.dim(), 256);
        assert!(containment_residual(&e, &s).unwrap() < 1e-12);
        assert!(s.orthonormality_error() < 1e-12);
    }

    #[test]
    fn placed_projection_matches_local_projection() {
        let proj = ghz_uncle_projector();
        let lat = LatticeSpec::chain(5, crate::lattice::Boundary::Periodic).unwrap();
        let placed = PlacedKernel::new(&proj, lat, vec![3, 4, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = SparseState::from_entries(lat, (0..32).map(|k| (k as u128, rng.random::<f64>() - 0.5)).collect());
        let once = placed.project(&psi);
        let twice = placed.project(&once);
        assert!(once.sub(&twice).norm() < 1e-13);
        assert!((placed.term_energy(&psi) - (psi.norm_sqr() - once.norm_sqr())).abs() < 1e-12);
        let sample = placed.sample_range(&mut rng).unwrap();
        assert!(placed.apply_term(&sample).norm() < 1e-12 * sample.norm());
    }
}
