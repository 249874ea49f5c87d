//! E/O pattern states of the toric-code PEPS.
//!
//! With bonds in `|00> + |11>`, contracting a pattern gives a 0/1 superposition
//! over leg configurations where bonded legs agree and every site has the
//! parity of its kind. After fixing the bonds, the free unknowns are one bit per
//! internal edge plus one per free boundary leg, and each site is a single
//! parity equation.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gf2::{BitVec, Gf2Solution, Gf2System};
use crate::lattice::{EdgeDir, LatticeSpec};
use crate::state::SparseState;
use crate::tensor::SiteKind;

/// Default cap on the number of configurations a pattern state may hold.
pub const PATTERN_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternBoundary {
    /// Tori: no open legs.
    Closed,
    /// Bit `i` is the value of the `i`-th open leg in ascending qubit order.
    Fixed(Vec<bool>),
    /// Every open leg ranges over both values.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternSpec {
    lattice: LatticeSpec,
    kinds: Vec<SiteKind>,
    boundary: PatternBoundary,
}

/// One unknown of the parity system: a bonded pair of legs or a single free leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityVar {
    Edge { a: u32, b: u32 },
    Leg(u32),
}

impl ParityVar {
    pub fn mask(&self) -> u128 {
        match *self {
            ParityVar::Edge { a, b } => (1u128 << a) | (1u128 << b),
            ParityVar::Leg(q) => 1u128 << q,
        }
    }
}

/// The parity system of a pattern together with the meaning of each variable.
#[derive(Debug, Clone)]
pub struct ParitySystem {
    pub system: Gf2System,
    pub vars: Vec<ParityVar>,
    /// Boundary legs fixed to 1.
    pub fixed_ones: Vec<u32>,
}

impl PatternSpec {
    pub fn new(lattice: LatticeSpec, kinds: Vec<SiteKind>, boundary: PatternBoundary) -> Result<Self> {
        lattice.validate()?;
        if !lattice.is_two_dimensional() {
            return Err(CoreError::Geometry("patterns live on tori or patches".into()));
        }
        if kinds.len() != lattice.num_sites() {
            return Err(CoreError::ShapeMismatch(format!(
                "{} site kinds for {} sites",
                kinds.len(),
                lattice.num_sites()
            )));
        }
        match (&lattice, &boundary) {
            (LatticeSpec::Torus { .. }, PatternBoundary::Closed) => {}
            (LatticeSpec::Torus { .. }, _) => {
                return Err(CoreError::Geometry("a torus has no open legs".into()));
            }
            (LatticeSpec::Patch { .. }, PatternBoundary::Closed) => {
                return Err(CoreError::Geometry("a patch needs a boundary assignment".into()));
            }
            (LatticeSpec::Patch { .. }, PatternBoundary::Fixed(bits)) => {
                let open = lattice.open_legs().len();
                if bits.len() != open {
                    return Err(CoreError::ShapeMismatch(format!(
                        "{} boundary bits for {open} open legs",
                        bits.len()
                    )));
                }
            }
            _ => {}
        }
        Ok(PatternSpec { lattice, kinds, boundary })
    }

    pub fn all_even(lattice: LatticeSpec, boundary: PatternBoundary) -> Result<Self> {
        let n = lattice.num_sites();
        Self::new(lattice, vec![SiteKind::Even; n], boundary)
    }

    /// Even everywhere except Odd at `odd_sites`.
    pub fn with_odd(lattice: LatticeSpec, odd_sites: &[usize], boundary: PatternBoundary) -> Result<Self> {
        let mut kinds = vec![SiteKind::Even; lattice.num_sites()];
        for &s in odd_sites {
            if s >= kinds.len() {
                return Err(CoreError::Geometry(format!("site {s} outside the lattice")));
            }
            kinds[s] = SiteKind::Odd;
        }
        Self::new(lattice, kinds, boundary)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn kinds(&self) -> &[SiteKind] {
        &self.kinds
    }

    pub fn boundary(&self) -> &PatternBoundary {
        &self.boundary
    }

    pub fn odd_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == SiteKind::Odd).count()
    }

    pub fn parity_system(&self) -> ParitySystem {
        let lat = &self.lattice;
        let edges = lat.edges();
        let open = lat.open_legs();
        let mut vars: Vec<ParityVar> = edges.iter().map(|e| ParityVar::Edge { a: e.a, b: e.b }).collect();
        // Per-site variable membership, and per-site constant from fixed legs.
        let mut site_vars: Vec<Vec<usize>> = vec![Vec::with_capacity(4); lat.num_sites()];
        let mut site_rhs: Vec<bool> = self.kinds.iter().map(|k| *k == SiteKind::Odd).collect();
        for (i, e) in edges.iter().enumerate() {
            site_vars[e.site_a].push(i);
            site_vars[e.site_b].push(i);
        }
        let mut fixed_ones = Vec::new();
        match &self.boundary {
            PatternBoundary::Closed => {}
            PatternBoundary::Free => {
                for &q in &open {
                    site_vars[lat.decode(q).0].push(vars.len());
                    vars.push(ParityVar::Leg(q));
                }
            }
            PatternBoundary::Fixed(bits) => {
                for (&q, &bit) in open.iter().zip(bits) {
                    if bit {
                        site_rhs[lat.decode(q).0] ^= true;
                        fixed_ones.push(q);
                    }
                }
            }
        }
        let mut system = Gf2System::new(vars.len());
        for (vs, rhs) in site_vars.into_iter().zip(site_rhs) {
            system.add_equation(vs, rhs);
        }
        ParitySystem { system, vars, fixed_ones }
    }
}

impl ParitySystem {
    fn mask_of(&self, x: &BitVec) -> u128 {
        x.ones().fold(0u128, |m, i| m ^ self.vars[i].mask())
    }

    /// Every satisfying configuration as a basis key, in Gray-code order.
    pub fn configurations(&self, solution: &Gf2Solution, budget: usize) -> Result<Vec<u128>> {
        let Some(particular) = &solution.particular else {
            return Ok(Vec::new());
        };
        let k = solution.nullspace.len();
        if k >= 63 || (1usize << k) > budget {
            return Err(CoreError::BudgetExceeded {
                what: "pattern configurations".into(),
                needed: 1u128 << k.min(127),
                budget: budget as u128,
            });
        }
        let flips: Vec<u128> = solution.nullspace.iter().map(|z| self.mask_of(z)).collect();
        let mut key = self.fixed_ones.iter().fold(self.mask_of(particular), |m, &q| m | (1u128 << q));
        let mut out = Vec::with_capacity(1 << k);
        out.push(key);
        for i in 1usize..(1 << k) {
            key ^= flips[i.trailing_zeros() as usize];
            out.push(key);
        }
        Ok(out)
    }
}

/// Uniform 0/1 superposition over the configurations allowed by `pattern`.
pub fn pattern_state(pattern: &PatternSpec) -> Result<SparseState> {
    pattern_state_with_budget(pattern, PATTERN_BUDGET)
}

pub fn pattern_state_with_budget(pattern: &PatternSpec, budget: usize) -> Result<SparseState> {
    pattern.lattice.check_key_width()?;
    let sys = pattern.parity_system();
    let sol = sys.system.solve();
    let keys = sys.configurations(&sol, budget)?;
    Ok(SparseState::from_entries(pattern.lattice, keys.into_iter().map(|k| (k, 1.0)).collect()))
}

/// The toric-code ground states of a torus: the all-Even pattern state dressed
/// with `(-1)^(a w_h + b w_v)`, where `w_h` is the parity of the horizontal
/// bonds crossing column cut 0 and `w_v` that of the vertical bonds crossing
/// row cut 0. These are the closures obtained by inserting `Z` strings around
/// the two cycles.
pub fn closure_states(lattice: LatticeSpec) -> Result<Vec<SparseState>> {
    if !matches!(lattice, LatticeSpec::Torus { .. }) {
        return Err(CoreError::Geometry("closure states need a torus".into()));
    }
    let base = pattern_state(&PatternSpec::all_even(lattice, PatternBoundary::Closed)?)?;
    let edges = lattice.edges();
    let h_cut: u128 = edges
        .iter()
        .filter(|e| e.dir == EdgeDir::Horizontal && e.col == 0)
        .fold(0, |m, e| m | (1u128 << e.a));
    let v_cut: u128 = edges
        .iter()
        .filter(|e| e.dir == EdgeDir::Vertical && e.row == 0)
        .fold(0, |m, e| m | (1u128 << e.a));
    let mut out = Vec::with_capacity(4);
    for (a, b) in [(0u32, 0u32), (1, 0), (0, 1), (1, 1)] {
        let entries = base
            .entries()
            .iter()
            .map(|&(k, amp)| {
                let w = a * ((k & h_cut).count_ones() & 1) + b * ((k & v_cut).count_ones() & 1);
                (k, if w % 2 == 1 { -amp } else { amp })
            })
            .collect();
        out.push(SparseState::from_sorted(lattice, entries));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all leg configurations of a small lattice.
    fn enumerate(pattern: &PatternSpec) -> Vec<u128> {
        let lat = pattern.lattice();
        let nq = lat.num_qubits();
        assert!(nq <= 24);
        let edges = lat.edges();
        let open = lat.open_legs();
        let mut out = Vec::new();
        'outer: for key in 0u128..(1u128 << nq) {
            for e in &edges {
                if (key >> e.a & 1) != (key >> e.b & 1) {
                    continue 'outer;
                }
            }
            if let PatternBoundary::Fixed(bits) = pattern.boundary() {
                for (q, &b) in open.iter().zip(bits) {
                    if (key >> q & 1 == 1) != b {
                        continue 'outer;
                    }
                }
            }
            for (s, kind) in pattern.kinds().iter().enumerate() {
                if ((key >> (4 * s)) & 0xF).count_ones() % 2 != kind.parity() {
                    continue 'outer;
                }
            }
            out.push(key);
        }
        out
    }

    #[test]
    fn two_by_two_torus_has_32_configurations() {
        let t = LatticeSpec::torus(2, 2).unwrap();
        let p = PatternSpec::all_even(t, PatternBoundary::Closed).unwrap();
        let s = pattern_state(&p).unwrap();
        assert_eq!(s.len(), 32);
        assert!(s.entries().iter().all(|e| e.1 == 1.0));
        let keys: Vec<u128> = s.entries().iter().map(|e| e.0).collect();
        assert_eq!(keys, enumerate(&p));
    }

    #[test]
    fn odd_number_of_odd_sites_is_empty() {
        let t = LatticeSpec::torus(2, 3).unwrap();
        for odd in [vec![0], vec![1, 2, 5]] {
            let p = PatternSpec::with_odd(t, &odd, PatternBoundary::Closed).unwrap();
            assert!(pattern_state(&p).unwrap().is_zero());
        }
        let p = PatternSpec::with_odd(t, &[0, 4], PatternBoundary::Closed).unwrap();
        assert_eq!(pattern_state(&p).unwrap().len(), 1 << 7);
    }

    #[test]
    fn patch_with_zero_boundary_matches_enumeration() {
        let p2 = LatticeSpec::patch(2, 2).unwrap();
        let p = PatternSpec::all_even(p2, PatternBoundary::Fixed(vec![false; 8])).unwrap();
        let s = pattern_state(&p).unwrap();
        let keys: Vec<u128> = s.entries().iter().map(|e| e.0).collect();
        assert_eq!(keys, enumerate(&p));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn free_and_fixed_boundaries_match_enumeration() {
        let p2 = LatticeSpec::patch(2, 2).unwrap();
        let free = PatternSpec::all_even(p2, PatternBoundary::Free).unwrap();
        let keys: Vec<u128> = pattern_state(&free).unwrap().entries().iter().map(|e| e.0).collect();
        assert_eq!(keys, enumerate(&free));
        let mut bits = vec![false; 8];
        bits[0] = true;
        bits[5] = true;
        let fixed = PatternSpec::with_odd(p2, &[3], PatternBoundary::Fixed(bits)).unwrap();
        let keys: Vec<u128> = pattern_state(&fixed).unwrap().entries().iter().map(|e| e.0).collect();
        assert_eq!(keys, enumerate(&fixed));
    }

    #[test]
    fn spec_validation() {
        let t = LatticeSpec::torus(2, 2).unwrap();
        let p = LatticeSpec::patch(2, 2).unwrap();
        assert!(PatternSpec::all_even(t, PatternBoundary::Free).is_err());
        assert!(PatternSpec::all_even(p, PatternBoundary::Closed).is_err());
        assert!(PatternSpec::all_even(p, PatternBoundary::Fixed(vec![false; 3])).is_err());
        assert!(PatternSpec::new(t, vec![SiteKind::Even; 3], PatternBoundary::Closed).is_err());
    }

    #[test]
    fn closure_states_are_orthogonal_ground_candidates() {
        let t = LatticeSpec::torus(2, 2).unwrap();
        let cs = closure_states(t).unwrap();
        for (i, a) in cs.iter().enumerate() {
            assert_eq!(a.norm_sqr(), 32.0);
            for b in &cs[i + 1..] {
                assert_eq!(a.dot(b), 0.0);
            }
        }
    }
}
