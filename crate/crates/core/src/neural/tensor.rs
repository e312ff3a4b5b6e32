use super::NeuralError;

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NeuralError> {
        if data.len() != rows * cols {
            return Err(NeuralError::Shape {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn same_shape(&self, other: &Mat, op: &'static str) -> Result<(), NeuralError> {
        if self.shape() != other.shape() {
            return Err(NeuralError::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat, NeuralError> {
        if self.cols != other.rows {
            return Err(NeuralError::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                for (ov, &bv) in o.iter_mut().zip(other.row(k)) {
                    *ov += av * bv;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat, NeuralError> {
        if self.cols != other.cols {
            return Err(NeuralError::Shape {
                op: "matmul_t",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Mat::from_fn(self.rows, other.rows, |i, j| {
            self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum()
        }))
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Mat) -> Result<Mat, NeuralError> {
        if self.rows != other.rows {
            return Err(NeuralError::Shape {
                op: "t_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &av) in self.row(k).iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let o = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn add(&self, other: &Mat) -> Result<Mat, NeuralError> {
        self.same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn add_assign(&mut self, other: &Mat) -> Result<(), NeuralError> {
        self.same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn hadamard(&self, other: &Mat) -> Result<Mat, NeuralError> {
        self.same_shape(other, "hadamard")?;
        Ok(self.zip_map(other, |a, b| a * b))
    }

    fn zip_map(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|v| v * s)
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Add a `1 × cols` row to every row.
    pub fn add_row(&self, row: &Mat) -> Result<Mat, NeuralError> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(NeuralError::Shape {
                op: "add_row",
                left: self.shape(),
                right: row.shape(),
            });
        }
        Ok(Mat::from_fn(self.rows, self.cols, |r, c| self.get(r, c) + row.data[c]))
    }

    /// Column sums as a `1 × cols` row.
    pub fn col_sum(&self) -> Mat {
        let mut out = Mat::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, v) in out.data.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    /// Row means as a `rows × 1` column.
    pub fn row_mean(&self) -> Mat {
        Mat::from_fn(self.rows, 1, |r, _| self.row(r).iter().sum::<f64>() / self.cols as f64)
    }

    /// Stack `top` over `bottom`.
    pub fn vstack(top: &Mat, bottom: &Mat) -> Result<Mat, NeuralError> {
        if top.cols != bottom.cols {
            return Err(NeuralError::Shape {
                op: "vstack",
                left: top.shape(),
                right: bottom.shape(),
            });
        }
        let mut data = top.data.clone();
        data.extend_from_slice(&bottom.data);
        Ok(Mat {
            rows: top.rows + bottom.rows,
            cols: top.cols,
            data,
        })
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Mat {
        Mat {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Columns `start..end`.
    pub fn slice_cols(&self, start: usize, end: usize) -> Mat {
        Mat::from_fn(self.rows, end - start, |r, c| self.get(r, start + c))
    }

    /// Write `block` into columns starting at `start`.
    pub fn set_cols(&mut self, start: usize, block: &Mat) {
        for r in 0..self.rows {
            for c in 0..block.cols {
                self.set(r, start + c, block.get(r, c));
            }
        }
    }

    /// Rows reordered as `perm[i]` -> row `i`.
    pub fn permute_rows(&self, perm: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Mat {
            rows: perm.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Mat {
        Mat::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn products_agree() {
        let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = m(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab, m(2, 2, &[58.0, 64.0, 139.0, 154.0]));
        assert_eq!(a.matmul_t(&b.transpose()).unwrap(), ab);
        assert_eq!(a.transpose().t_matmul(&b).unwrap(), ab);
    }

    #[test]
    fn shape_errors_name_shapes() {
        let a = Mat::zeros(2, 3);
        let err = a.matmul(&Mat::zeros(2, 3)).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch in matmul: 2x3 vs 2x3");
        assert!(Mat::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn stacking_and_slicing() {
        let a = m(1, 2, &[1.0, 2.0]);
        let b = m(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let s = Mat::vstack(&a, &b).unwrap();
        assert_eq!(s.slice_rows(1, 3), b);
        assert_eq!(s.slice_cols(1, 2), m(3, 1, &[2.0, 4.0, 6.0]));
        assert_eq!(s.col_sum(), m(1, 2, &[9.0, 12.0]));
        assert_eq!(s.permute_rows(&[2, 0]), m(2, 2, &[5.0, 6.0, 1.0, 2.0]));
    }
}
