use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lattice::LatticeSpec;
use crate::pattern::{PatternBoundary, PatternSpec};

/// Exact statistics of a pattern's parity system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    /// Unknowns: internal edges plus free boundary legs.
    pub edges: usize,
    pub vertices: usize,
    pub rank: usize,
    pub feasible: bool,
    pub log2_count: Option<usize>,
    /// `C^2`: the squared norm of the pattern state (0 when infeasible).
    pub norm_sqr: f64,
}

pub fn gf2_count(pattern: &PatternSpec) -> CountReport {
    let sys = pattern.parity_system();
    let sol = sys.system.solve();
    let log2_count = sol.log2_count();
    CountReport {
        edges: sys.vars.len(),
        vertices: sys.system.nrows(),
        rank: sol.rank,
        feasible: sol.feasible,
        log2_count,
        norm_sqr: log2_count.map_or(0.0, |l| 2f64.powi(l as i32)),
    }
}

/// Largest number of unknowns enumerated by [`enumeration_histogram`].
pub const ENUMERATION_LIMIT: usize = 26;

/// Brute-force counts for every site pattern at once: entry `m` is the
/// number of leg assignments whose Odd sites are exactly the bits of `m`.
/// Unknowns are the lattice edges plus, with a `Free` boundary, the open
/// legs; a `Fixed` boundary contributes its bits to the site parities.
pub fn enumeration_histogram(lattice: &LatticeSpec, boundary: &PatternBoundary) -> Result<Vec<u64>> {
    let sites = lattice.num_sites();
    if !lattice.is_two_dimensional() || sites > 20 {
        return Err(CoreError::Geometry("enumeration needs a 2D lattice with at most 20 sites".into()));
    }
    let site_of = |q: u32| lattice.decode(q).0;
    let mut unknowns: Vec<u32> = lattice.edges().iter().map(|e| (1u32 << e.site_a) ^ (1u32 << e.site_b)).collect();
    let mut base = 0u32;
    match (lattice, boundary) {
        (LatticeSpec::Torus { .. }, PatternBoundary::Closed) => {}
        (LatticeSpec::Patch { .. }, PatternBoundary::Free) => {
            unknowns.extend(lattice.open_legs().into_iter().map(|q| 1u32 << site_of(q)));
        }
        (LatticeSpec::Patch { .. }, PatternBoundary::Fixed(bits)) if bits.len() == lattice.open_legs().len() => {
            for (q, &b) in lattice.open_legs().into_iter().zip(bits) {
                if b {
                    base ^= 1 << site_of(q);
                }
            }
        }
        _ => return Err(CoreError::Geometry("boundary does not match the lattice".into())),
    }
    if unknowns.len() > ENUMERATION_LIMIT {
        return Err(CoreError::BudgetExceeded {
            what: "enumerated unknowns".into(),
            needed: unknowns.len() as u128,
            budget: ENUMERATION_LIMIT as u128,
        });
    }
    let mut hist = vec![0u64; 1 << sites];
    // Gray code: one syndrome flip per step.
    let mut syndrome = base;
    hist[syndrome as usize] += 1;
    for step in 1u64..(1u64 << unknowns.len()) {
        syndrome ^= unknowns[step.trailing_zeros() as usize];
        hist[syndrome as usize] += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::pattern::PatternBoundary;

    #[test]
    fn torus_counts() {
        let t = LatticeSpec::torus(2, 2).unwrap();
        let r = gf2_count(&PatternSpec::all_even(t, PatternBoundary::Closed).unwrap());
        assert_eq!((r.edges, r.rank, r.log2_count), (8, 3, Some(5)));
        assert_eq!(r.norm_sqr, 32.0);
        let r = gf2_count(&PatternSpec::with_odd(t, &[2], PatternBoundary::Closed).unwrap());
        assert!(!r.feasible);
        assert_eq!(r.norm_sqr, 0.0);
    }

    #[test]
    fn histogram_matches_elimination_on_2x2() {
        let t = LatticeSpec::torus(2, 2).unwrap();
        let hist = enumeration_histogram(&t, &PatternBoundary::Closed).unwrap();
        assert_eq!(hist.iter().sum::<u64>(), 256);
        for m in 0..16usize {
            let odd: Vec<usize> = (0..4).filter(|s| m >> s & 1 == 1).collect();
            let r = gf2_count(&PatternSpec::with_odd(t, &odd, PatternBoundary::Closed).unwrap());
            assert_eq!(hist[m] as f64, r.norm_sqr);
        }
    }

    #[test]
    fn large_torus_is_fast() {
        let t = LatticeSpec::torus(64, 64).unwrap();
        let r = gf2_count(&PatternSpec::all_even(t, PatternBoundary::Closed).unwrap());
        assert_eq!(r.log2_count, Some(64 * 64 + 1));
    }
}
