//! Compressed-sparse-row matrices over interior nodes.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Declared symmetry; selects CG over BiCGSTAB.
    pub symmetric: bool,
}

impl Csr {
    /// Sums duplicate entries; columns within a row come out sorted.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>, symmetric: bool) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) out of range for n = {n}");
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        Self::from_rows(n, rows, symmetric)
    }

    fn from_rows(n: usize, rows: Vec<BTreeMap<usize, f64>>, symmetric: bool) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals, symmetric }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        Self {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            cols: (0..d.len()).collect(),
            vals: d.to_vec(),
            symmetric: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    /// `alpha * self + beta * other`.
    pub fn add(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!(self.n, other.n);
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                *row.entry(j).or_insert(0.0) += alpha * v;
            }
            for (j, v) in other.row(i) {
                *row.entry(j).or_insert(0.0) += beta * v;
            }
        }
        Self::from_rows(self.n, rows, self.symmetric && other.symmetric)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &Csr) -> Csr {
        assert_eq!(self.n, other.n);
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n];
        for (i, row) in rows.iter_mut().enumerate() {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    *row.entry(j).or_insert(0.0) += a * b;
                }
            }
        }
        Self::from_rows(self.n, rows, false)
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.vals[k] *= di;
            }
        }
        out.symmetric = false;
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Preconditioners applied as `z = M^{-1} r`.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    Jacobi(Vec<f64>),
    Ilu0(Ilu0),
}

impl Preconditioner {
    pub fn jacobi(a: &Csr) -> Self {
        Preconditioner::Jacobi(a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect())
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Preconditioner::Ilu0(ilu) => ilu.solve(r, z),
        }
    }
}

/// Incomplete LU factorisation with the sparsity pattern of `A`. Unit lower
/// factor and upper factor share `A`'s storage.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    /// Returns `None` on a zero pivot or a structurally missing diagonal.
    pub fn new(a: &Csr) -> Option<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return None;
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for kk in start..end {
                let k = lu.cols[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[diag_pos[k]];
                if pivot == 0.0 {
                    return None;
                }
                let factor = lu.vals[kk] / pivot;
                lu.vals[kk] = factor;
                for m in diag_pos[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[m];
                    let p = pos[j];
                    if p != usize::MAX {
                        lu.vals[p] -= factor * lu.vals[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            if lu.vals[diag_pos[i]] == 0.0 || !lu.vals[diag_pos[i]].is_finite() {
                return None;
            }
        }
        Some(Self { lu, diag_pos })
    }

    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut acc = r[i];
            for k in lu.row_ptr[i]..self.diag_pos[i] {
                acc -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = acc;
        }
        for i in (0..lu.n).rev() {
            let mut acc = z[i];
            for k in self.diag_pos[i] + 1..lu.row_ptr[i + 1] {
                acc -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = acc / lu.vals[self.diag_pos[i]];
        }
    }
}
