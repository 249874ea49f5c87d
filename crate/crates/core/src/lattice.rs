//! Lattice geometry and the bit conventions shared by every state in the crate.
//!
//! Chains carry one qubit per site (site `i` is bit `i`). Two-dimensional
//! lattices carry four qubits per site, one per virtual leg, with
//! `q = 4 * (r * cols + c) + leg` and legs ordered N, E, S, W. Basis states
//! are `u128` bitstrings whose bit `q` is the value of qubit `q`.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Largest qubit count a `u128` basis key can hold.
pub const MAX_QUBITS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Leg {
    N = 0,
    E = 1,
    S = 2,
    W = 3,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::N, Leg::E, Leg::S, Leg::W];

    pub fn from_index(i: u32) -> Leg {
        Leg::ALL[(i & 3) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum LatticeSpec {
    Chain { n: usize, boundary: Boundary },
    Torus { rows: usize, cols: usize },
    Patch { rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeDir {
    Horizontal,
    Vertical,
}

/// A bond between two legs: `(r, c).E -- (r, c+1).W` or `(r, c).S -- (r+1, c).N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub dir: EdgeDir,
    pub row: usize,
    pub col: usize,
    pub a: u32,
    pub b: u32,
    pub site_a: usize,
    pub site_b: usize,
}

impl Edge {
    pub fn mask(&self) -> u128 {
        (1u128 << self.a) | (1u128 << self.b)
    }
}

impl LatticeSpec {
    pub fn chain(n: usize, boundary: Boundary) -> Result<Self> {
        let l = LatticeSpec::Chain { n, boundary };
        l.validate()?;
        Ok(l)
    }

    pub fn torus(rows: usize, cols: usize) -> Result<Self> {
        let l = LatticeSpec::Torus { rows, cols };
        l.validate()?;
        Ok(l)
    }

    pub fn patch(rows: usize, cols: usize) -> Result<Self> {
        let l = LatticeSpec::Patch { rows, cols };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LatticeSpec::Chain { n, .. } => {
                if n == 0 {
                    return Err(CoreError::InvalidLattice("chain needs at least one site".into()));
                }
            }
            LatticeSpec::Torus { rows, cols } | LatticeSpec::Patch { rows, cols } => {
                if rows < 2 || cols < 2 {
                    return Err(CoreError::InvalidLattice(format!(
                        "{rows}x{cols}: rows and cols must be >= 2"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Lattices used for basis states must fit a `u128` key; GF(2) counting has no such limit.
    pub fn check_key_width(&self) -> Result<()> {
        if self.num_qubits() > MAX_QUBITS {
            return Err(CoreError::BudgetExceeded {
                what: "basis key width".into(),
                needed: self.num_qubits() as u128,
                budget: MAX_QUBITS as u128,
            });
        }
        Ok(())
    }

    pub fn is_two_dimensional(&self) -> bool {
        !matches!(self, LatticeSpec::Chain { .. })
    }

    pub fn is_periodic(&self) -> bool {
        matches!(
            self,
            LatticeSpec::Chain { boundary: Boundary::Periodic, .. } | LatticeSpec::Torus { .. }
        )
    }

    pub fn rows(&self) -> usize {
        match *self {
            LatticeSpec::Chain { .. } => 1,
            LatticeSpec::Torus { rows, .. } | LatticeSpec::Patch { rows, .. } => rows,
        }
    }

    pub fn cols(&self) -> usize {
        match *self {
            LatticeSpec::Chain { n, .. } => n,
            LatticeSpec::Torus { cols, .. } | LatticeSpec::Patch { cols, .. } => cols,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn qubits_per_site(&self) -> usize {
        if self.is_two_dimensional() {
            4
        } else {
            1
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_sites() * self.qubits_per_site()
    }

    pub fn site_index(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    pub fn site_coords(&self, site: usize) -> (usize, usize) {
        (site / self.cols(), site % self.cols())
    }

    /// Qubit carrying `leg` of `site`. Chains ignore the leg.
    pub fn qubit(&self, site: usize, leg: Leg) -> u32 {
        if self.is_two_dimensional() {
            (4 * site + leg as usize) as u32
        } else {
            site as u32
        }
    }

    pub fn decode(&self, qubit: u32) -> (usize, Leg) {
        if self.is_two_dimensional() {
            ((qubit / 4) as usize, Leg::from_index(qubit))
        } else {
            (qubit as usize, Leg::N)
        }
    }

    /// Mask of every qubit owned by `site`.
    pub fn site_mask(&self, site: usize) -> u128 {
        let q = self.qubits_per_site();
        ((1u128 << q) - 1) << (q * site)
    }

    /// Internal bonds. Tori wrap; on width or height 2 the two parallel
    /// bonds between a site pair are kept as distinct edges.
    pub fn edges(&self) -> Vec<Edge> {
        let (rows, cols, wrap) = match *self {
            LatticeSpec::Chain { .. } => return Vec::new(),
            LatticeSpec::Torus { rows, cols } => (rows, cols, true),
            LatticeSpec::Patch { rows, cols } => (rows, cols, false),
        };
        let mut out = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                if wrap || c + 1 < cols {
                    let s = self.site_index(r, c);
                    let t = self.site_index(r, (c + 1) % cols);
                    out.push(Edge {
                        dir: EdgeDir::Horizontal,
                        row: r,
                        col: c,
                        a: self.qubit(s, Leg::E),
                        b: self.qubit(t, Leg::W),
                        site_a: s,
                        site_b: t,
                    });
                }
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                if wrap || r + 1 < rows {
                    let s = self.site_index(r, c);
                    let t = self.site_index((r + 1) % rows, c);
                    out.push(Edge {
                        dir: EdgeDir::Vertical,
                        row: r,
                        col: c,
                        a: self.qubit(s, Leg::S),
                        b: self.qubit(t, Leg::N),
                        site_a: s,
                        site_b: t,
                    });
                }
            }
        }
        out
    }

    /// Perimeter legs of a patch in ascending qubit order (empty for tori and chains).
    pub fn open_legs(&self) -> Vec<u32> {
        let LatticeSpec::Patch { rows, cols } = *self else {
            return Vec::new();
        };
        let mut legs = Vec::with_capacity(2 * (rows + cols));
        for r in 0..rows {
            for c in 0..cols {
                let s = self.site_index(r, c);
                for leg in Leg::ALL {
                    let open = match leg {
                        Leg::N => r == 0,
                        Leg::S => r + 1 == rows,
                        Leg::W => c == 0,
                        Leg::E => c + 1 == cols,
                    };
                    if open {
                        legs.push(self.qubit(s, leg));
                    }
                }
            }
        }
        legs
    }

    /// Translate a basis key by `dr` rows and `dc` columns. Only periodic
    /// geometries support this.
    pub fn translate_key(&self, key: u128, dr: usize, dc: usize) -> Result<u128> {
        if !self.is_periodic() {
            return Err(CoreError::Geometry("translation needs a periodic lattice".into()));
        }
        let (rows, cols) = (self.rows(), self.cols());
        let q = self.qubits_per_site();
        let local = (1u128 << q) - 1;
        let mut out = 0u128;
        for site in 0..self.num_sites() {
            let bits = (key >> (q * site)) & local;
            if bits == 0 {
                continue;
            }
            let (r, c) = self.site_coords(site);
            let target = self.site_index((r + dr) % rows, (c + dc) % cols);
            out |= bits << (q * target);
        }
        Ok(out)
    }
}

/// Torus distance along one axis of length `len`.
pub fn cyclic_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b) % len;
    d.min(len - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_edge_count_and_legs() {
        let t = LatticeSpec::torus(2, 2).unwrap();
        let edges = t.edges();
        assert_eq!(edges.len(), 8);
        let mut seen = 0u128;
        for e in &edges {
            assert_eq!(seen & e.mask(), 0, "each leg belongs to exactly one bond");
            seen |= e.mask();
        }
        assert_eq!(seen, (1u128 << 16) - 1);
    }

    #[test]
    fn patch_open_legs_cover_perimeter() {
        let p = LatticeSpec::patch(2, 3).unwrap();
        assert_eq!(p.open_legs().len(), 10);
        assert_eq!(p.edges().len(), 7);
        let mut covered = 0u128;
        for e in p.edges() {
            covered |= e.mask();
        }
        for q in p.open_legs() {
            assert_eq!(covered >> q & 1, 0);
            covered |= 1 << q;
        }
        assert_eq!(covered, (1u128 << 24) - 1);
    }

    #[test]
    fn encode_decode_round_trip() {
        for rows in 2..=6 {
            for cols in 2..=6 {
                let t = LatticeSpec::torus(rows, cols).unwrap();
                for site in 0..t.num_sites() {
                    for leg in Leg::ALL {
                        assert_eq!(t.decode(t.qubit(site, leg)), (site, leg));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_degenerate_geometry() {
        assert!(LatticeSpec::torus(1, 4).is_err());
        assert!(LatticeSpec::patch(2, 1).is_err());
        assert!(LatticeSpec::chain(0, Boundary::Open).is_err());
        let big = LatticeSpec::torus(6, 6).unwrap();
        assert!(big.check_key_width().is_err(), "144 qubits do not fit a u128 key");
    }

    #[test]
    fn translation_is_a_bijection() {
        let t = LatticeSpec::torus(2, 3).unwrap();
        let key = 0b1011_0001_1110_0000_0101u128;
        let moved = t.translate_key(key, 1, 2).unwrap();
        assert_eq!(moved.count_ones(), key.count_ones());
        let back = t.translate_key(moved, 1, 1).unwrap();
        assert_eq!(back, key);
        assert!(LatticeSpec::patch(2, 2).unwrap().translate_key(1, 0, 1).is_err());
    }
}
