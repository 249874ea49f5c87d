//! Linear systems over GF(2) on bit-packed rows.
//!
//! Rows are stored as `u64` words with the right-hand side in one extra bit
//! column. Elimination pivots columns in ascending order, so ranks, pivots
//! and nullspace bases are deterministic.

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { len, words: vec![0; len.div_ceil(64).max(1)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let w = &mut self.words[i / 64];
        if v {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }
}

/// One parity equation per row: `sum_{j in row} x_j = rhs (mod 2)`.
#[derive(Debug, Clone)]
pub struct Gf2System {
    ncols: usize,
    rows: Vec<BitVec>,
}

#[derive(Debug, Clone)]
pub struct Gf2Solution {
    pub ncols: usize,
    pub rank: usize,
    pub feasible: bool,
    /// Pivot column of each echelon row, in elimination order.
    pub pivots: Vec<usize>,
    /// Solution with every free variable set to 0 (only when feasible).
    pub particular: Option<BitVec>,
    /// One basis vector per free column, ascending.
    pub nullspace: Vec<BitVec>,
}

impl Gf2Solution {
    /// log2 of the number of solutions, when the system is feasible.
    pub fn log2_count(&self) -> Option<usize> {
        self.feasible.then_some(self.ncols - self.rank)
    }
}

impl Gf2System {
    pub fn new(ncols: usize) -> Self {
        Gf2System { ncols, rows: Vec::new() }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Add an equation. Repeated variables cancel, as they do over GF(2).
    pub fn add_equation(&mut self, vars: impl IntoIterator<Item = usize>, rhs: bool) {
        let mut row = BitVec::zeros(self.ncols + 1);
        for v in vars {
            assert!(v < self.ncols, "variable {v} out of range");
            row.flip(v);
        }
        row.set(self.ncols, rhs);
        self.rows.push(row);
    }

    pub fn solve(&self) -> Gf2Solution {
        let n = self.ncols;
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..n {
            let Some(found) = (next..rows.len()).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(next, found);
            let pivot_row = rows[next].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != next && row.get(col) {
                    row.xor_assign(&pivot_row);
                }
            }
            pivots.push(col);
            next += 1;
            if next == rows.len() {
                break;
            }
        }
        let rank = pivots.len();
        let feasible = rows[rank..].iter().all(|row| !row.get(n));

        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let particular = feasible.then(|| {
            let mut x = BitVec::zeros(n);
            for (r, &p) in pivots.iter().enumerate() {
                x.set(p, rows[r].get(n));
            }
            x
        });
        let nullspace = (0..n)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut x = BitVec::zeros(n);
                x.set(f, true);
                for (r, &p) in pivots.iter().enumerate() {
                    if rows[r].get(f) {
                        x.set(p, true);
                    }
                }
                x
            })
            .collect();
        Gf2Solution { ncols: n, rank, feasible, pivots, particular, nullspace }
    }

    /// Does `x` satisfy every equation?
    pub fn satisfies(&self, x: &BitVec) -> bool {
        self.rows.iter().all(|row| {
            let mut parity = false;
            for (w, xw) in row.words.iter().zip(&x.words) {
                parity ^= (w & xw).count_ones() & 1 == 1;
            }
            // The rhs bit sits past the end of `x`, so it never enters the product.
            parity == row.get(self.ncols)
        })
    }
}
