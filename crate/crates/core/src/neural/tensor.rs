use std::fmt;

/// Dense row-major 2-D array of `f64`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor[{}x{}]", self.rows, self.cols)
    }
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "tensor data does not match {rows}x{cols}"
        );
        Tensor { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// The single value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self[m,k] · other[k,n]`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let o = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[p * n..(p + 1) * n];
                for (x, &y) in o.iter_mut().zip(b) {
                    *x += a * y;
                }
            }
        }
        Tensor::from_vec(m, n, out)
    }

    /// `self[m,k] · other[n,k]ᵀ`.
    pub fn matmul_bt(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.cols, "matmul_bt shape mismatch");
        let (m, n) = (self.rows, other.rows);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a = self.row(i);
            for j in 0..n {
                out[i * n + j] = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        Tensor::from_vec(m, n, out)
    }

    /// `self[k,m]ᵀ · other[k,n]`.
    pub fn matmul_at(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.rows, other.rows, "matmul_at shape mismatch");
        let (k, m, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a = self.row(p);
            let b = other.row(p);
            for (i, &x) in a.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (o, &y) in out[i * n..(i + 1) * n].iter_mut().zip(b) {
                    *o += x * y;
                }
            }
        }
        Tensor::from_vec(m, n, out)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape(), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scaled(&self, s: f64) -> Tensor {
        Tensor::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|x| x * s).collect(),
        )
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Row-wise softmax of a slice, with the max subtracted for stability.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the first maximal element.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
