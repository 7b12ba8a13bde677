/// Square sparse matrix in compressed sparse row form with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix from per-row `(column, value)` buckets, summing duplicates.
    pub(crate) fn from_row_buckets(n: usize, counts: &[usize], mut fill: impl FnMut(&mut dyn FnMut(usize, usize, f64))) -> Self {
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for &c in counts {
            start.push(start.last().unwrap() + c);
        }
        let total = *start.last().unwrap();
        let mut cols = vec![0usize; total];
        let mut vals = vec![0.0; total];
        let mut cursor = start.clone();
        fill(&mut |row, col, val| {
            let k = cursor[row];
            cols[k] = col;
            vals[k] = val;
            cursor[row] += 1;
        });

        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for row in 0..n {
            scratch.clear();
            scratch.extend((start[row]..cursor[row]).map(|k| (cols[k], vals[k])));
            // Stable sort keeps the summation order of duplicates deterministic.
            scratch.sort_by_key(|&(c, _)| c);
            let mut it = scratch.iter().peekable();
            while let Some(&(c, v)) = it.next() {
                let mut acc = v;
                while let Some(&&(c2, v2)) = it.peek() {
                    if c2 != c {
                        break;
                    }
                    acc += v2;
                    it.next();
                }
                col_idx.push(c);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (row, dense_row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                dense_row[self.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    /// Builds a matrix from dense rows, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let counts: Vec<usize> = rows.iter().map(|r| r.iter().filter(|v| **v != 0.0).count()).collect();
        CsrMatrix::from_row_buckets(n, &counts, |push| {
            for (i, r) in rows.iter().enumerate() {
                for (j, &v) in r.iter().enumerate() {
                    if v != 0.0 {
                        push(i, j, v);
                    }
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_row_buckets(2, &[3, 1], |push| {
            push(0, 1, 1.0);
            push(0, 0, 2.0);
            push(0, 1, 0.5);
            push(1, 1, 4.0);
        });
        assert_eq!(m.row_ptr, vec![0, 2, 3]);
        assert_eq!(m.col_idx, vec![0, 1, 1]);
        assert_eq!(m.values, vec![2.0, 1.5, 4.0]);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.matvec(&[1.0, 2.0]), vec![5.0, 8.0]);
    }
}
