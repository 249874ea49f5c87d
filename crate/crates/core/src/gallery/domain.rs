//! One-dimensional GHZ states: domain-wall superpositions, localized
//! approximate eigenpairs and their concatenation over a `|0>` background.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hamiltonian::GlobalHamiltonian;
use crate::lattice::{Boundary, LatticeSpec};
use crate::spectra::TAU_NULL;
use crate::state::SparseState;

/// Number of pairs `1 <= i < j <= a` with `2 <= j - i <= r`.
pub fn domain_pair_count(a: usize, r: usize) -> usize {
    (2..=r.min(a.saturating_sub(1))).map(|len| a - len).sum()
}

/// `sum_{i<j, 2<=j-i<=r} |0..0 1_{i+1} .. 1_j 0..0>` over an `a`-site window
/// whose position 1 sits at chain site `offset`. Sites outside the window are 0.
pub fn ghz_domain_state(n: usize, r: usize, a: usize, offset: usize) -> Result<SparseState> {
    if offset == 0 || offset + a >= n {
        return Err(CoreError::Geometry(format!(
            "window of {a} sites at offset {offset} does not fit strictly inside {n} sites"
        )));
    }
    if r < 2 || r >= a {
        return Err(CoreError::InvalidParameter(format!("need 2 <= r < A, got r={r}, A={a}")));
    }
    let lattice = LatticeSpec::chain(n, Boundary::Periodic)?;
    lattice.check_key_width()?;
    let mut entries = Vec::with_capacity(domain_pair_count(a, r));
    for i in 1..a {
        for j in (i + 2)..=(i + r).min(a) {
            // Window positions i+1..=j are chain sites offset+i..offset+j-1.
            let len = j - i;
            let key = ((1u128 << len) - 1) << (offset + i);
            entries.push((key, 1.0));
        }
    }
    Ok(SparseState::from_entries(lattice, entries))
}

/// A window `[start, start + len)` of a chain with a fragment living on it.
/// The fragment is a state of an open chain of `len` sites; its bit `p` is
/// chain site `start + p`.
#[derive(Debug, Clone)]
pub struct ConcatBlock {
    pub start: usize,
    pub fragment: SparseState,
}

impl ConcatBlock {
    pub fn new(start: usize, fragment: SparseState) -> Result<Self> {
        if !matches!(fragment.lattice(), LatticeSpec::Chain { .. }) {
            return Err(CoreError::Geometry("1D blocks carry chain fragments".into()));
        }
        if fragment.is_zero() {
            return Err(CoreError::ZeroState);
        }
        Ok(ConcatBlock { start, fragment })
    }

    pub fn len(&self) -> usize {
        self.fragment.lattice().num_sites()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> usize {
        self.start + self.len()
    }

    pub fn shifted(&self, by: usize) -> ConcatBlock {
        ConcatBlock { start: self.start + by, fragment: self.fragment.clone() }
    }
}

fn gap_ok(a: &ConcatBlock, b: &ConcatBlock, n: usize, periodic: bool, m: usize) -> bool {
    let (first, second) = if a.start <= b.start { (a, b) } else { (b, a) };
    if second.start < first.end() + m {
        return false;
    }
    !periodic || first.start + n >= second.end() + m
}

/// `X1 (x) |0...0> (x) X2` on `lattice`, with at least `m >= 2` background
/// sites between the blocks (on both sides when periodic).
pub fn concat_state(lattice: LatticeSpec, x1: &ConcatBlock, x2: Option<&ConcatBlock>, m: usize) -> Result<SparseState> {
    let LatticeSpec::Chain { n, boundary } = lattice else {
        return Err(CoreError::Geometry("concatenation of 1D fragments needs a chain".into()));
    };
    lattice.check_key_width()?;
    if m < 2 {
        return Err(CoreError::InvalidParameter(format!("separation must be >= 2, got {m}")));
    }
    let periodic = boundary == Boundary::Periodic;
    for b in std::iter::once(x1).chain(x2) {
        if b.end() > n {
            return Err(CoreError::Geometry(format!("block [{}, {}) leaves the chain", b.start, b.end())));
        }
    }
    if let Some(x2) = x2 {
        if !gap_ok(x1, x2, n, periodic, m) {
            return Err(CoreError::Geometry(format!("blocks need {m} background sites between them")));
        }
    }
    let mut entries = Vec::new();
    match x2 {
        None => {
            for &(k, a) in x1.fragment.entries() {
                entries.push((k << x1.start, a));
            }
        }
        Some(x2) => {
            for &(k1, a1) in x1.fragment.entries() {
                for &(k2, a2) in x2.fragment.entries() {
                    entries.push(((k1 << x1.start) | (k2 << x2.start), a1 * a2));
                }
            }
        }
    }
    Ok(SparseState::from_entries(lattice, entries))
}

/// An approximate eigenpair supported on a window: a Ritz pair of `H` over
/// the configurations that vanish outside the window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalPair {
    pub start: usize,
    pub width: usize,
    pub level: usize,
    pub eigenvalue: f64,
    /// `||(H - lambda) phi|| / ||phi||`.
    pub delta: f64,
    /// Ritz values of the window, ascending, including null ones.
    pub ritz_values: Vec<f64>,
    #[serde(skip)]
    pub fragment: Option<SparseState>,
}

impl LocalPair {
    pub fn block(&self) -> Result<ConcatBlock> {
        let frag = self.fragment.clone().ok_or(CoreError::ZeroState)?;
        ConcatBlock::new(self.start, frag)
    }
}

/// `level`-th Ritz pair with eigenvalue above the null threshold.
pub fn localized_pair(h: &GlobalHamiltonian, start: usize, width: usize, level: usize) -> Result<LocalPair> {
    let lattice = *h.lattice();
    let LatticeSpec::Chain { n, .. } = lattice else {
        return Err(CoreError::Geometry("window extraction is defined on chains".into()));
    };
    if width == 0 || width > 12 || start + width > n {
        return Err(CoreError::Geometry(format!("window [{start}, {}) invalid for {n} sites", start + width)));
    }
    let dim = 1usize << width;
    let mut m = Mat::<f64>::zeros(dim, dim);
    for b in 0..dim {
        let hb = h.apply(&SparseState::basis(lattice, (b as u128) << start))?;
        for &(k, v) in hb.entries() {
            let local = k >> start;
            if local < dim as u128 && (local << start) == k {
                m[(local as usize, b)] = v;
            }
        }
    }
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
    let (u, s) = (eig.U(), eig.S().column_vector());
    let ritz_values: Vec<f64> = (0..dim).map(|i| s[i]).collect();
    let nonnull: Vec<usize> = (0..dim).filter(|&i| s[i] >= TAU_NULL).collect();
    let Some(&col) = nonnull.get(level) else {
        return Err(CoreError::Localization(format!(
            "window [{start}, {}) has {} non-null Ritz values, level {level} requested; lowest are {:?}",
            start + width,
            nonnull.len(),
            &ritz_values[..ritz_values.len().min(6)]
        )));
    };
    let frag_lattice = LatticeSpec::chain(width, Boundary::Open)?;
    let fragment = SparseState::from_entries(frag_lattice, (0..dim).map(|i| (i as u128, u[(i, col)])).collect());
    let embedded = SparseState::from_entries(lattice, fragment.entries().iter().map(|&(k, a)| (k << start, a)).collect());
    let lambda = s[col];
    let hphi = h.apply(&embedded)?;
    let delta = hphi.combine(1.0, &embedded, -lambda).norm() / embedded.norm();
    Ok(LocalPair { start, width, level, eigenvalue: lambda, delta, ritz_values, fragment: Some(fragment) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub lambda1: f64,
    pub delta1: f64,
    pub lambda2: f64,
    pub delta2: f64,
    pub rayleigh: f64,
    /// `|rayleigh - (lambda1 + lambda2)|`.
    pub deviation: f64,
    /// `||(H - lambda1 - lambda2) phi|| / ||phi||`.
    pub residual: f64,
}

impl AdditivityReport {
    pub fn within_bound(&self) -> bool {
        self.deviation <= self.delta1 + self.delta2 && self.residual <= self.delta1 + self.delta2 + 1e-12
    }
}

/// Concatenate two localized pairs and compare against the sum of eigenvalues.
pub fn additivity(h: &GlobalHamiltonian, p1: &LocalPair, p2: Option<&LocalPair>, m: usize) -> Result<AdditivityReport> {
    let b1 = p1.block()?;
    let b2 = p2.map(LocalPair::block).transpose()?;
    let phi = concat_state(*h.lattice(), &b1, b2.as_ref(), m)?;
    let (lambda2, delta2) = p2.map_or((0.0, 0.0), |p| (p.eigenvalue, p.delta));
    let target = p1.eigenvalue + lambda2;
    let rayleigh = h.rayleigh(&phi)?;
    let residual = h.apply(&phi)?.combine(1.0, &phi, -target).norm() / phi.norm();
    Ok(AdditivityReport {
        lambda1: p1.eigenvalue,
        delta1: p1.delta,
        lambda2,
        delta2,
        rayleigh,
        deviation: (rayleigh - target).abs(),
        residual,
    })
}
