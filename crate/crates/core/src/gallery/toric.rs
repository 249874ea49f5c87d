//! Two-region superpositions of single Odd defects on a torus and the
//! counting bound on their energy.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hamiltonian::window_sites;
use crate::lattice::{cyclic_distance, LatticeSpec};
use crate::pattern::{pattern_state_with_budget, PatternBoundary, PatternSpec};
use crate::state::SparseState;

/// A (possibly wrapping) rectangle of sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionSpec {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl RegionSpec {
    pub fn new(row0: usize, col0: usize, height: usize, width: usize) -> Self {
        RegionSpec { row0, col0, height, width }
    }

    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(CoreError::Geometry("regions need height and width >= 1".into()));
        }
        let wraps = matches!(lattice, LatticeSpec::Torus { .. });
        let (rows, cols) = (lattice.rows(), lattice.cols());
        let fits = if wraps {
            self.row0 < rows && self.col0 < cols && self.height <= rows && self.width <= cols
        } else {
            self.row0 + self.height <= rows && self.col0 + self.width <= cols
        };
        if !fits {
            return Err(CoreError::Geometry(format!("{self:?} does not fit {rows}x{cols}")));
        }
        Ok(())
    }

    /// Sites in row-major order of the rectangle.
    pub fn sites(&self, lattice: &LatticeSpec) -> Vec<usize> {
        let (rows, cols) = (lattice.rows(), lattice.cols());
        let mut out = Vec::with_capacity(self.height * self.width);
        for dr in 0..self.height {
            for dc in 0..self.width {
                out.push(lattice.site_index((self.row0 + dr) % rows, (self.col0 + dc) % cols));
            }
        }
        out
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// Smallest torus Chebyshev distance between a site of `a` and a site of `b`.
pub fn region_separation(lattice: &LatticeSpec, a: &RegionSpec, b: &RegionSpec) -> usize {
    let (rows, cols) = (lattice.rows(), lattice.cols());
    let mut best = usize::MAX;
    for s in a.sites(lattice) {
        let (r1, c1) = lattice.site_coords(s);
        for t in b.sites(lattice) {
            let (r2, c2) = lattice.site_coords(t);
            best = best.min(cyclic_distance(r1, r2, rows).max(cyclic_distance(c1, c2, cols)));
        }
    }
    best
}

/// Two regions are admissible when no site of one is within one step
/// (including diagonals) of the other.
pub fn check_regions(lattice: &LatticeSpec, r1: &RegionSpec, r2: &RegionSpec) -> Result<()> {
    if !matches!(lattice, LatticeSpec::Torus { .. }) {
        return Err(CoreError::Geometry("defect pairs are placed on a torus".into()));
    }
    r1.validate(lattice)?;
    r2.validate(lattice)?;
    let sep = region_separation(lattice, r1, r2);
    if sep < 2 {
        return Err(CoreError::Geometry(format!("regions are {sep} apart, need at least 2")));
    }
    Ok(())
}

/// Cap on configurations held by a physical two-region superposition.
pub const PHI_BUDGET: usize = 1 << 22;

/// `sum_{p1 in R1, p2 in R2}` of the pattern with Odd at `p1`, `p2`.
pub fn toric_phi(lattice: LatticeSpec, r1: &RegionSpec, r2: &RegionSpec) -> Result<SparseState> {
    check_regions(&lattice, r1, r2)?;
    lattice.check_key_width()?;
    let mut entries = Vec::new();
    for p1 in r1.sites(&lattice) {
        for p2 in r2.sites(&lattice) {
            let spec = PatternSpec::with_odd(lattice, &[p1, p2], PatternBoundary::Closed)?;
            let left = PHI_BUDGET.saturating_sub(entries.len());
            let s = pattern_state_with_budget(&spec, left)?;
            entries.extend_from_slice(s.entries());
        }
    }
    Ok(SparseState::from_entries(lattice, entries))
}

/// Counting bound on `<phi|H|phi> / <phi|phi>`. Only windows that overlap a
/// region without lying inside it contribute; each such window meets the
/// region in at most two sites, and its energy is at most the number of
/// orthogonal summands with a defect there times `C^2`.
pub fn phi_energy_bound(lattice: &LatticeSpec, r1: &RegionSpec, r2: &RegionSpec) -> Result<f64> {
    check_regions(lattice, r1, r2)?;
    let (n1, n2) = (r1.area() as f64, r2.area() as f64);
    let cells: [Vec<usize>; 2] = [r1.sites(lattice), r2.sites(lattice)];
    let mut boundary_windows = [0usize; 2];
    for r in 0..lattice.rows() {
        for c in 0..lattice.cols() {
            let w = window_sites(lattice, r, c);
            for (i, region) in cells.iter().enumerate() {
                let inside = w.iter().filter(|s| region.contains(s)).count();
                if inside > 0 && inside < 4 {
                    boundary_windows[i] += 1;
                }
            }
        }
    }
    let summands = boundary_windows[0] as f64 * 2.0 * n2 + boundary_windows[1] as f64 * 2.0 * n1;
    Ok(summands / (n1 * n2))
}

/// Two `r x r` squares in the same rows, one empty column apart.
pub fn square_regions(lattice: &LatticeSpec, r: usize) -> Result<(RegionSpec, RegionSpec)> {
    if r == 0 || lattice.rows() < r || lattice.cols() < 2 * r + 2 {
        return Err(CoreError::Geometry(format!("two separated {r}x{r} squares do not fit")));
    }
    Ok((RegionSpec::new(0, 0, r, r), RegionSpec::new(0, r + 1, r, r)))
}

/// Two full-height strips of width `r`, one empty column apart.
pub fn strip_regions(lattice: &LatticeSpec, r: usize) -> Result<(RegionSpec, RegionSpec)> {
    let rows = lattice.rows();
    if r == 0 || lattice.cols() < 2 * r + 2 {
        return Err(CoreError::Geometry(format!("two separated width-{r} strips do not fit")));
    }
    Ok((RegionSpec::new(0, 0, rows, r), RegionSpec::new(0, r + 1, rows, r)))
}

/// `16 / r` for squares.
pub fn phi_energy_bound_square(lattice: &LatticeSpec, r: usize) -> Result<f64> {
    let (a, b) = square_regions(lattice, r)?;
    phi_energy_bound(lattice, &a, &b)
}

pub fn phi_energy_bound_strip(lattice: &LatticeSpec, r: usize) -> Result<f64> {
    let (a, b) = strip_regions(lattice, r)?;
    phi_energy_bound(lattice, &a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_rule() {
        let t = LatticeSpec::torus(4, 4).unwrap();
        let a = RegionSpec::new(0, 0, 1, 1);
        assert!(check_regions(&t, &a, &RegionSpec::new(0, 2, 1, 1)).is_ok());
        assert!(check_regions(&t, &a, &RegionSpec::new(1, 1, 1, 1)).is_err());
        assert!(check_regions(&t, &a, &RegionSpec::new(0, 3, 1, 1)).is_err(), "wraps around");
    }

    #[test]
    fn bounds() {
        let t = LatticeSpec::torus(4, 4).unwrap();
        assert_eq!(phi_energy_bound_square(&t, 1).unwrap(), 16.0);
        let t = LatticeSpec::torus(10, 10).unwrap();
        assert_eq!(phi_energy_bound_square(&t, 4).unwrap(), 4.0);
        let s = LatticeSpec::torus(2, 10).unwrap();
        for r in 1..=3 {
            assert!((phi_energy_bound_strip(&s, r).unwrap() - 8.0 / r as f64).abs() < 1e-12);
        }
        assert!(phi_energy_bound_square(&LatticeSpec::torus(4, 4).unwrap(), 2).is_err());
    }

    #[test]
    fn single_pattern_norm() {
        let t = LatticeSpec::torus(4, 4).unwrap();
        let phi = toric_phi(t, &RegionSpec::new(0, 0, 1, 1), &RegionSpec::new(0, 2, 1, 1)).unwrap();
        assert_eq!(phi.norm_sqr(), (1u64 << 17) as f64);
    }
}
