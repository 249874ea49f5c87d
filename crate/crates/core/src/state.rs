use crate::error::{CoreError, Result};
use crate::lattice::LatticeSpec;

/// Amplitudes at or below this magnitude are dropped.
pub const DROP_TOL: f64 = 1e-14;

/// Largest qubit count for which a state may be expanded to a dense vector.
pub const MAX_DENSE_QUBITS: usize = 26;

/// Unnormalized many-body state stored as a sorted list of
/// (basis key, amplitude) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    lattice: LatticeSpec,
    entries: Vec<(u128, f64)>,
    norm_sqr: f64,
}

impl SparseState {
    pub fn zero(lattice: LatticeSpec) -> Self {
        assert!(lattice.num_qubits() <= crate::lattice::MAX_QUBITS);
        SparseState { lattice, entries: Vec::new(), norm_sqr: 0.0 }
    }

    pub fn basis(lattice: LatticeSpec, key: u128) -> Self {
        Self::from_entries(lattice, vec![(key, 1.0)])
    }

    /// Sort, merge duplicate keys by summation (in input order) and drop
    /// negligible amplitudes.
    pub fn from_entries(lattice: LatticeSpec, mut entries: Vec<(u128, f64)>) -> Self {
        assert!(lattice.num_qubits() <= crate::lattice::MAX_QUBITS);
        entries.sort_by_key(|e| e.0);
        Self::from_sorted(lattice, entries)
    }

    /// Same as [`from_entries`](Self::from_entries) for input already sorted by key.
    pub fn from_sorted(lattice: LatticeSpec, entries: Vec<(u128, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 <= w[1].0));
        let nq = lattice.num_qubits();
        let mut merged: Vec<(u128, f64)> = Vec::with_capacity(entries.len());
        for (k, a) in entries {
            debug_assert!(nq == 128 || k >> nq == 0, "key outside the lattice");
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += a,
                _ => merged.push((k, a)),
            }
        }
        merged.retain(|e| e.1.abs() > DROP_TOL);
        let norm_sqr = merged.iter().fold(0.0, |acc, e| acc + e.1 * e.1);
        SparseState { lattice, entries: merged, norm_sqr }
    }

    pub fn from_dense(lattice: LatticeSpec, v: &[f64]) -> Self {
        assert_eq!(v.len(), 1usize << lattice.num_qubits());
        let entries = v
            .iter()
            .enumerate()
            .filter(|(_, a)| a.abs() > DROP_TOL)
            .map(|(i, &a)| (i as u128, a))
            .collect();
        Self::from_sorted(lattice, entries)
    }

    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let nq = self.lattice.num_qubits();
        if nq > MAX_DENSE_QUBITS {
            return Err(CoreError::BudgetExceeded {
                what: "dense state".into(),
                needed: 1u128 << nq,
                budget: 1u128 << MAX_DENSE_QUBITS,
            });
        }
        let mut v = vec![0.0; 1usize << nq];
        for &(k, a) in &self.entries {
            v[k as usize] = a;
        }
        Ok(v)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn entries(&self) -> &[(u128, f64)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(u128, f64)> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr.sqrt()
    }

    pub fn amplitude(&self, key: u128) -> f64 {
        match self.entries.binary_search_by_key(&key, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, other: &SparseState) -> f64 {
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

    pub fn scaled(&self, s: f64) -> SparseState {
        let entries = self.entries.iter().map(|&(k, a)| (k, a * s)).collect();
        Self::from_sorted(self.lattice, entries)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SparseState, b: f64) -> SparseState {
        assert_eq!(self.lattice, other.lattice, "states live on different lattices");
        let (x, y) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(x.len() + y.len());
        let (mut i, mut j) = (0, 0);
        while i < x.len() || j < y.len() {
            let take_x = j == y.len() || (i < x.len() && x[i].0 < y[j].0);
            let take_y = i == x.len() || (j < y.len() && y[j].0 < x[i].0);
            if take_x {
                out.push((x[i].0, a * x[i].1));
                i += 1;
            } else if take_y {
                out.push((y[j].0, b * y[j].1));
                j += 1;
            } else {
                out.push((x[i].0, a * x[i].1 + b * y[j].1));
                i += 1;
                j += 1;
            }
        }
        Self::from_sorted(self.lattice, out)
    }

    pub fn add(&self, other: &SparseState) -> SparseState {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SparseState) -> SparseState {
        self.combine(1.0, other, -1.0)
    }

    pub fn normalized(&self) -> Result<SparseState> {
        if self.is_zero() {
            return Err(CoreError::ZeroState);
        }
        Ok(self.scaled(1.0 / self.norm()))
    }

    /// Translate by `dr` rows and `dc` columns (sites, on a chain).
    pub fn translate(&self, dr: usize, dc: usize) -> Result<SparseState> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for &(k, a) in &self.entries {
            entries.push((self.lattice.translate_key(k, dr, dc)?, a));
        }
        Ok(Self::from_entries(self.lattice, entries))
    }

    /// Keep only entries whose keys satisfy `pred`.
    pub fn filter(&self, mut pred: impl FnMut(u128) -> bool) -> SparseState {
        let entries = self.entries.iter().copied().filter(|e| pred(e.0)).collect();
        Self::from_sorted(self.lattice, entries)
    }
}
