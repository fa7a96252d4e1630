//! Symmetric positive definite matrices in envelope (skyline) storage with an
//! in-place Cholesky factorization. Row `i` stores columns `first[i]..=i`.

#[derive(Debug, Clone)]
pub struct Skyline {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl Skyline {
    /// `first[i]` is the leftmost structurally nonzero column of row `i`.
    pub fn new(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "skyline row {i} starts after the diagonal");
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Skyline {
            first,
            offset,
            data: vec![0.0; total],
        }
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at `(i, j)` of the lower triangle; requires `first[i] <= j <= i`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && j >= self.first[i]);
        self.data[self.offset[i] + j - self.first[i]] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j < self.first[i] {
            0.0
        } else {
            self.data[self.offset[i] + j - self.first[i]]
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// Overwrites the matrix with its Cholesky factor `L` (`A = L L^T`).
    /// Pivots that collapse below `rel_floor` times their original diagonal
    /// are lifted to that floor, which damps null directions instead of
    /// failing; returns how many pivots were lifted.
    pub fn factor(&mut self, rel_floor: f64) -> usize {
        let n = self.n();
        let mut lifted = 0;
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            let diag_orig = self.data[oi + i - fi];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let mut s = self.data[oi + j - fi];
                let (ri, rj) = (
                    &self.data[oi + k0 - fi..oi + j - fi],
                    &self.data[oj + k0 - fj..oj + j - fj],
                );
                s -= dot(ri, rj);
                let ljj = self.data[oj + j - fj];
                self.data[oi + j - fi] = s / ljj;
            }
            let r = &self.data[oi..oi + i - fi];
            let mut d = diag_orig - dot(r, r);
            let floor = rel_floor * diag_orig.abs().max(f64::MIN_POSITIVE);
            if !(d > floor) {
                d = floor.max(1e-300);
                lifted += 1;
            }
            self.data[oi + i - fi] = d.sqrt();
        }
        lifted
    }

    /// Solves `L L^T x = b` in place after [`Skyline::factor`].
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let s = b[i] - dot(&row[..i - fi], &b[fi..i]);
            b[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            b[i] /= row[i - fi];
            let bi = b[i];
            for (k, l) in (fi..i).zip(row) {
                b[k] -= l * bi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorizable and the order fixed
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let first: Vec<usize> = (0..n)
            .map(|i: usize| i.saturating_sub(rng.random_range(0..6)))
            .collect();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in first[i]..i {
                let v = rng.random_range(-1.0..1.0);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
            dense[(i, i)] = 20.0;
        }
        let mut s = Skyline::new(first.clone());
        for i in 0..n {
            for j in first[i]..=i {
                s.add(i, j, dense[(i, j)]);
            }
        }
        assert_eq!(s.get(3, first[3]), dense[(3, first[3])]);
        assert_eq!(s.factor(1e-14), 0);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        s.solve(&mut x);
        let r = &dense * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn singular_direction_is_damped() {
        let mut s = Skyline::new(vec![0, 0]);
        s.add(0, 0, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 1.0);
        assert_eq!(s.factor(1e-12), 1);
        let mut b = vec![1.0, 1.0];
        s.solve(&mut b);
        assert!(b.iter().all(|v| v.is_finite()));
    }
}
