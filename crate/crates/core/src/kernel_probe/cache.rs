use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;

/// Above this many training rows the kernel is no longer held in full.
pub const FULL_CACHE_LIMIT: usize = 8192;
/// Entry budget for the row cache used past [`FULL_CACHE_LIMIT`].
const ROW_CACHE_ENTRIES: usize = 1 << 25;

#[inline]
pub(crate) fn rbf_sq(sq_dist: f64, gamma: f64) -> f64 {
    libm::exp(-gamma * sq_dist)
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Slot {
    row: usize,
    data: Vec<f64>,
    last_used: u64,
}

/// Least-recently-used cache of kernel rows.
pub(crate) struct RowCache {
    capacity: usize,
    index: Vec<Option<usize>>,
    slots: Vec<Slot>,
    tick: u64,
}

impl RowCache {
    fn new(n: usize, capacity: usize) -> Self {
        Self {
            capacity: capacity.max(2),
            index: vec![None; n],
            slots: Vec::new(),
            tick: 0,
        }
    }

    fn fetch(&mut self, x: &Matrix, gamma: f64, i: usize) -> &[f64] {
        self.tick += 1;
        if let Some(s) = self.index[i] {
            self.slots[s].last_used = self.tick;
            return &self.slots[s].data;
        }
        let data: Vec<f64> = (0..x.rows())
            .map(|j| rbf_sq(sq_dist(x.row(i), x.row(j)), gamma))
            .collect();
        let s = if self.slots.len() < self.capacity {
            self.slots.push(Slot {
                row: i,
                data,
                last_used: self.tick,
            });
            self.slots.len() - 1
        } else {
            let (victim, _) = self
                .slots
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| s.last_used)
                .expect("capacity >= 2");
            self.index[self.slots[victim].row] = None;
            self.slots[victim] = Slot {
                row: i,
                data,
                last_used: self.tick,
            };
            victim
        };
        self.index[i] = Some(s);
        &self.slots[s].data
    }
}

/// Source of RBF kernel rows for the training set.
pub(crate) enum KernelStore<'a> {
    Full(Matrix),
    Rows {
        x: &'a Matrix,
        gamma: f64,
        cache: RowCache,
    },
}

impl<'a> KernelStore<'a> {
    pub(crate) fn new(x: &'a Matrix, gamma: f64) -> Self {
        if x.rows() <= FULL_CACHE_LIMIT {
            Self::full(x, gamma)
        } else {
            Self::rows(x, gamma, ROW_CACHE_ENTRIES / x.rows())
        }
    }

    pub(crate) fn full(x: &Matrix, gamma: f64) -> Self {
        let n = x.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = 1.0;
            for j in (i + 1)..n {
                let v = rbf_sq(sq_dist(x.row(i), x.row(j)), gamma);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Self::Full(k)
    }

    pub(crate) fn rows(x: &'a Matrix, gamma: f64, capacity: usize) -> Self {
        Self::Rows {
            x,
            gamma,
            cache: RowCache::new(x.rows(), capacity),
        }
    }

    /// Copies kernel rows `i` and `j` into the buffers.
    pub(crate) fn load_pair(&mut self, i: usize, j: usize, ki: &mut [f64], kj: &mut [f64]) {
        match self {
            Self::Full(k) => {
                ki.copy_from_slice(k.row(i));
                kj.copy_from_slice(k.row(j));
            }
            Self::Rows { x, gamma, cache } => {
                ki.copy_from_slice(cache.fetch(x, *gamma, i));
                kj.copy_from_slice(cache.fetch(x, *gamma, j));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_cache_matches_full() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.5], [2.0, -1.0], [0.3, 0.3], [5.0, 1.0]]).unwrap();
        let mut full = KernelStore::full(&x, 0.7);
        let mut rows = KernelStore::rows(&x, 0.7, 2);
        let (mut a, mut b, mut c, mut d) = ([0.0; 5], [0.0; 5], [0.0; 5], [0.0; 5]);
        for (i, j) in [(0, 1), (2, 3), (4, 0), (1, 1), (3, 2)] {
            full.load_pair(i, j, &mut a, &mut b);
            rows.load_pair(i, j, &mut c, &mut d);
            assert_eq!(a, c);
            assert_eq!(b, d);
        }
    }
}
