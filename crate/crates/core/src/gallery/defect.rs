//! Reduced description of torus states built from defect patterns.
//!
//! The state `sum_D f(D) |pattern(D)>`, summed over sets `D` of Odd sites,
//! has squared norm `C^2 sum_D f(D)^2` because distinct patterns are
//! orthogonal with equal norms. Every uncle window projector maps such a state
//! to another one of the same form:
//!
//! * no defect in the window: `f` is unchanged,
//! * one defect: `f` is averaged over the four window positions,
//! * two or more: the component is removed.
//!
//! so energies depend only on `f`, whose support is tiny compared to the
//! physical configuration space.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gallery::toric::{check_regions, RegionSpec};
use crate::hamiltonian::window_sites;
use crate::lattice::LatticeSpec;
use crate::pattern::{pattern_state_with_budget, PatternBoundary, PatternSpec};
use crate::spectra::TAU_NULL;
use crate::state::{SparseState, DROP_TOL};

/// Largest torus (in sites) handled by the reduced engine.
pub const MAX_DEFECT_SITES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DefectState {
    lattice: LatticeSpec,
    entries: Vec<(u64, f64)>,
}

fn merged(mut v: Vec<(u64, f64)>) -> Vec<(u64, f64)> {
    v.sort_by_key(|e| e.0);
    let mut out: Vec<(u64, f64)> = Vec::with_capacity(v.len());
    for (k, a) in v {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += a,
            _ => out.push((k, a)),
        }
    }
    out.retain(|e| e.1.abs() > DROP_TOL);
    out
}

/// Window site masks of an `N x M` torus, one per window position.
pub fn window_masks(lattice: &LatticeSpec) -> Vec<u64> {
    let mut out = Vec::with_capacity(lattice.num_sites());
    for r in 0..lattice.rows() {
        for c in 0..lattice.cols() {
            out.push(window_sites(lattice, r, c).iter().fold(0u64, |m, &s| m | (1 << s)));
        }
    }
    out
}

impl DefectState {
    pub fn new(lattice: LatticeSpec, entries: Vec<(u64, f64)>) -> Result<Self> {
        if !matches!(lattice, LatticeSpec::Torus { .. }) || lattice.num_sites() > MAX_DEFECT_SITES {
            return Err(CoreError::Geometry(format!(
                "the defect engine needs a torus with at most {MAX_DEFECT_SITES} sites"
            )));
        }
        if entries.iter().any(|e| e.0.count_ones() % 2 == 1) {
            return Err(CoreError::Geometry("defect sets on a torus must have even size".into()));
        }
        Ok(DefectState { lattice, entries: merged(entries) })
    }

    /// `f(D) = 1` for every `D = {p1, p2}` with `p1` in `r1`, `p2` in `r2`.
    pub fn from_regions(lattice: LatticeSpec, r1: &RegionSpec, r2: &RegionSpec) -> Result<Self> {
        check_regions(&lattice, r1, r2)?;
        let mut entries = Vec::new();
        for p1 in r1.sites(&lattice) {
            for p2 in r2.sites(&lattice) {
                entries.push(((1u64 << p1) | (1u64 << p2), 1.0));
            }
        }
        Self::new(lattice, entries)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    /// `sum_D f(D)^2`; the physical squared norm is this times `C^2`.
    pub fn reduced_norm_sqr(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, other: &DefectState) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
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

    pub fn combine(&self, a: f64, other: &DefectState, b: f64) -> DefectState {
        let mut v: Vec<(u64, f64)> = self.entries.iter().map(|&(k, x)| (k, a * x)).collect();
        v.extend(other.entries.iter().map(|&(k, x)| (k, b * x)));
        DefectState { lattice: self.lattice, entries: merged(v) }
    }

    /// The window projector with site mask `w`.
    pub fn project_window(&self, w: u64) -> DefectState {
        let mut out = Vec::with_capacity(self.entries.len());
        for &(d, a) in &self.entries {
            let inside = d & w;
            match inside.count_ones() {
                0 => out.push((d, a)),
                1 => {
                    let base = d & !w;
                    let mut rest = w;
                    while rest != 0 {
                        let p = rest & rest.wrapping_neg();
                        out.push((base | p, a / 4.0));
                        rest &= rest - 1;
                    }
                }
                _ => {}
            }
        }
        DefectState { lattice: self.lattice, entries: merged(out) }
    }

    pub fn term_energies(&self) -> Vec<f64> {
        window_masks(&self.lattice)
            .into_iter()
            .map(|w| self.combine(1.0, &self.project_window(w), -1.0).reduced_norm_sqr())
            .collect()
    }

    /// `H f = sum_W (f - P_W f)`.
    pub fn apply(&self) -> DefectState {
        let masks = window_masks(&self.lattice);
        let mut acc: Vec<(u64, f64)> = self.entries.iter().map(|&(k, a)| (k, masks.len() as f64 * a)).collect();
        for w in masks {
            acc.extend(self.project_window(w).entries.iter().map(|&(k, a)| (k, -a)));
        }
        DefectState { lattice: self.lattice, entries: merged(acc) }
    }

    pub fn rayleigh(&self) -> Result<f64> {
        if self.is_zero() {
            return Err(CoreError::ZeroState);
        }
        Ok(self.term_energies().iter().sum::<f64>() / self.reduced_norm_sqr())
    }

    /// The physical state `sum_D f(D) |pattern(D)>`.
    pub fn to_physical(&self, budget: usize) -> Result<SparseState> {
        self.lattice.check_key_width()?;
        let mut entries = Vec::new();
        for &(d, a) in &self.entries {
            let odd: Vec<usize> = (0..self.lattice.num_sites()).filter(|s| d >> s & 1 == 1).collect();
            let spec = PatternSpec::with_odd(self.lattice, &odd, PatternBoundary::Closed)?;
            let s = pattern_state_with_budget(&spec, budget.saturating_sub(entries.len()))?;
            entries.extend(s.entries().iter().map(|&(k, x)| (k, a * x)));
        }
        Ok(SparseState::from_entries(self.lattice, entries))
    }

    /// Translate every defect by `dc` columns.
    pub fn shift_columns(&self, dc: usize) -> DefectState {
        let (rows, cols) = (self.lattice.rows(), self.lattice.cols());
        let entries = self
            .entries
            .iter()
            .map(|&(d, a)| {
                let mut out = 0u64;
                for s in 0..rows * cols {
                    if d >> s & 1 == 1 {
                        let (r, c) = self.lattice.site_coords(s);
                        out |= 1 << self.lattice.site_index(r, (c + dc) % cols);
                    }
                }
                (out, a)
            })
            .collect();
        DefectState { lattice: self.lattice, entries: merged(entries) }
    }

    /// Columns holding at least one defect in some configuration.
    pub fn occupied_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .entries
            .iter()
            .flat_map(|&(d, _)| (0..self.lattice.num_sites()).filter(move |s| d >> s & 1 == 1))
            .map(|s| self.lattice.site_coords(s).1)
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// A column block of a torus strip with a reduced fragment whose defects all
/// lie inside the block.
#[derive(Debug, Clone)]
pub struct DefectBlock {
    pub col0: usize,
    pub width: usize,
    pub fragment: DefectState,
}

impl DefectBlock {
    pub fn new(col0: usize, width: usize, fragment: DefectState) -> Result<Self> {
        let cols = fragment.lattice().cols();
        if width == 0 || col0 + width > cols {
            return Err(CoreError::Geometry(format!("block [{col0}, {}) leaves the lattice", col0 + width)));
        }
        if fragment.occupied_columns().iter().any(|&c| c < col0 || c >= col0 + width) {
            return Err(CoreError::Geometry("fragment has defects outside its block".into()));
        }
        if fragment.is_zero() {
            return Err(CoreError::ZeroState);
        }
        Ok(DefectBlock { col0, width, fragment })
    }
}

/// Product of two fragments over an all-Even background with at least `m`
/// empty columns between the blocks on both sides.
pub fn concat_defect_state(x1: &DefectBlock, x2: Option<&DefectBlock>, m: usize) -> Result<DefectState> {
    if m < 2 {
        return Err(CoreError::InvalidParameter(format!("separation must be >= 2, got {m}")));
    }
    let Some(x2) = x2 else {
        return Ok(x1.fragment.clone());
    };
    let lattice = *x1.fragment.lattice();
    if *x2.fragment.lattice() != lattice {
        return Err(CoreError::Geometry("blocks live on different lattices".into()));
    }
    let cols = lattice.cols();
    let (a, b) = if x1.col0 <= x2.col0 { (x1, x2) } else { (x2, x1) };
    let inner = b.col0 as isize - (a.col0 + a.width) as isize;
    let outer = (a.col0 + cols) as isize - (b.col0 + b.width) as isize;
    if inner < m as isize || outer < m as isize {
        return Err(CoreError::Geometry(format!("blocks need {m} empty columns between them")));
    }
    let mut entries = Vec::with_capacity(x1.fragment.entries().len() * x2.fragment.entries().len());
    for &(d1, a1) in x1.fragment.entries() {
        for &(d2, a2) in x2.fragment.entries() {
            entries.push((d1 | d2, a1 * a2));
        }
    }
    DefectState::new(lattice, entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefectPair {
    pub col0: usize,
    pub width: usize,
    pub level: usize,
    pub eigenvalue: f64,
    pub delta: f64,
    #[serde(skip)]
    pub fragment: Option<DefectState>,
}

/// Ritz pair of the reduced Hamiltonian over even defect sets inside a
/// column block, skipping null Ritz values.
pub fn localized_defect_pair(lattice: LatticeSpec, col0: usize, width: usize, level: usize) -> Result<DefectPair> {
    let rows = lattice.rows();
    let sites: Vec<usize> = (0..rows)
        .flat_map(|r| (col0..col0 + width).map(move |c| (r, c)))
        .map(|(r, c)| lattice.site_index(r, c))
        .collect();
    if sites.len() > 14 || col0 + width > lattice.cols() {
        return Err(CoreError::Geometry("defect window too large or outside the lattice".into()));
    }
    let basis: Vec<u64> = (0u64..(1 << sites.len()))
        .filter(|b| b.count_ones() % 2 == 0)
        .map(|b| sites.iter().enumerate().filter(|(i, _)| b >> i & 1 == 1).fold(0u64, |m, (_, &s)| m | (1 << s)))
        .collect();
    let n = basis.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for (j, &d) in basis.iter().enumerate() {
        let hf = DefectState::new(lattice, vec![(d, 1.0)])?.apply();
        for &(k, v) in hf.entries() {
            if let Ok(i) = basis.binary_search(&k) {
                m[(i, j)] = v;
            }
        }
    }
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| CoreError::LinAlg(format!("{e:?}")))?;
    let (u, s) = (eig.U(), eig.S().column_vector());
    let nonnull: Vec<usize> = (0..n).filter(|&i| s[i] >= TAU_NULL).collect();
    let Some(&col) = nonnull.get(level) else {
        return Err(CoreError::Localization(format!("block has {} non-null Ritz values", nonnull.len())));
    };
    let fragment = DefectState::new(lattice, basis.iter().enumerate().map(|(i, &d)| (d, u[(i, col)])).collect())?;
    let lambda = s[col];
    let delta = (fragment.apply().combine(1.0, &fragment, -lambda).reduced_norm_sqr() / fragment.reduced_norm_sqr()).sqrt();
    Ok(DefectPair { col0, width, level, eigenvalue: lambda, delta, fragment: Some(fragment) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::assemble_torus;
    use crate::kernel::{toric_window_projector, WindowKind};

    fn physical_energy(f: &DefectState) -> f64 {
        let lat = *f.lattice();
        let h = assemble_torus(&toric_window_projector(WindowKind::UncleSum).unwrap(), lat.rows(), lat.cols()).unwrap();
        h.rayleigh(&f.to_physical(1 << 22).unwrap()).unwrap()
    }

    #[test]
    fn reduced_matches_physical_on_small_tori() {
        let cases = [
            (LatticeSpec::torus(4, 4).unwrap(), RegionSpec::new(0, 0, 1, 1), RegionSpec::new(0, 2, 1, 1)),
            (LatticeSpec::torus(2, 6).unwrap(), RegionSpec::new(0, 0, 2, 1), RegionSpec::new(0, 2, 2, 1)),
        ];
        for (lat, a, b) in cases {
            let f = DefectState::from_regions(lat, &a, &b).unwrap();
            let reduced = f.rayleigh().unwrap();
            let exact = physical_energy(&f);
            assert!((reduced - exact).abs() < 1e-10, "{lat:?}: {reduced} vs {exact}");
        }
    }

    #[test]
    fn projector_rule_is_idempotent() {
        let lat = LatticeSpec::torus(2, 6).unwrap();
        let f = DefectState::new(lat, vec![(0b11, 1.0), (0b1000001, -2.0), (0b1100, 0.5)]).unwrap();
        for w in window_masks(&lat) {
            let p = f.project_window(w);
            let pp = p.project_window(w);
            assert!(p.combine(1.0, &pp, -1.0).reduced_norm_sqr() < 1e-28);
            // Symmetric: <g, P f> = <P g, f>.
            let g = f.shift_columns(1);
            assert!((g.dot(&p) - g.project_window(w).dot(&f)).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_defect_blocks_add() {
        let lat = LatticeSpec::torus(2, 12).unwrap();
        let p1 = localized_defect_pair(lat, 0, 3, 0).unwrap();
        let p2 = localized_defect_pair(lat, 0, 3, 1).unwrap();
        let b1 = DefectBlock::new(0, 3, p1.fragment.clone().unwrap()).unwrap();
        let b2 = DefectBlock::new(6, 3, p2.fragment.clone().unwrap().shift_columns(6)).unwrap();
        let phi = concat_defect_state(&b1, Some(&b2), 2).unwrap();
        let dev = (phi.rayleigh().unwrap() - p1.eigenvalue - p2.eigenvalue).abs();
        assert!(dev <= p1.delta + p2.delta, "{dev}");
    }
}
