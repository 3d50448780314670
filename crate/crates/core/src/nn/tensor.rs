use crate::error::{Error, Result};

/// Dense row-major `f64` array of rank 1 to 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(&other.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
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

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Contiguous slice of the `i`-th entry along the leading axis.
    pub fn outer(&self, i: usize) -> &[f64] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn outer_mut(&mut self, i: usize) -> &mut [f64] {
        let stride = self.data.len() / self.shape[0];
        &mut self.data[i * stride..(i + 1) * stride]
    }

    pub(crate) fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::Shape(format!(
                "{what}: expected rank {rank}, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent accumulators (fixed summation order).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Outputs computed per register block in the correlation kernels.
const BLOCK: usize = 8;

/// Valid-mode cross-correlation, accumulated: `y[t] += sum_k w[k] x[t + k]`.
#[inline]
pub(crate) fn correlate_accumulate(x: &[f64], w: &[f64], y: &mut [f64]) {
    let t_out = y.len();
    let k = w.len();
    debug_assert_eq!(x.len(), t_out + k - 1);
    let mut t = 0;
    while t + BLOCK <= t_out {
        let mut acc = [0.0f64; BLOCK];
        for (j, &wj) in w.iter().enumerate() {
            let xs: &[f64; BLOCK] = x[t + j..t + j + BLOCK].try_into().expect("block");
            for (a, &v) in acc.iter_mut().zip(xs) {
                *a += wj * v;
            }
        }
        for (yv, a) in y[t..t + BLOCK].iter_mut().zip(acc) {
            *yv += a;
        }
        t += BLOCK;
    }
    for (i, yv) in y.iter_mut().enumerate().skip(t) {
        *yv += dot(w, &x[i..i + k]);
    }
}

/// Kernel gradient of [`correlate_accumulate`]: `gw[k] += sum_t up[t] x[t + k]`.
#[inline]
pub(crate) fn correlate_weight_grad(x: &[f64], up: &[f64], gw: &mut [f64]) {
    let t_out = up.len();
    let k = gw.len();
    let mut j0 = 0;
    while j0 + BLOCK <= k {
        let mut acc = [0.0f64; BLOCK];
        for (t, &u) in up.iter().enumerate() {
            let xs: &[f64; BLOCK] = x[t + j0..t + j0 + BLOCK].try_into().expect("block");
            for (a, &v) in acc.iter_mut().zip(xs) {
                *a += u * v;
            }
        }
        for (g, a) in gw[j0..j0 + BLOCK].iter_mut().zip(acc) {
            *g += a;
        }
        j0 += BLOCK;
    }
    for (j, g) in gw.iter_mut().enumerate().skip(j0) {
        *g += dot(&x[j..j + t_out], up);
    }
}

/// Input gradient of [`correlate_accumulate`]: `gx[t + k] += up[t] w[k]`.
#[inline]
pub(crate) fn correlate_input_grad(up: &[f64], w: &[f64], gx: &mut [f64]) {
    let t_out = up.len();
    let k = w.len();
    let t_in = gx.len();
    debug_assert_eq!(t_in, t_out + k - 1);
    // gx[s] = sum_j w[j] up[s - j] over valid j; the middle range has every j valid.
    let edge = |s: usize, gx: &mut [f64]| {
        let lo = s.saturating_sub(t_out - 1);
        let hi = s.min(k - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += w[j] * up[s - j];
        }
        gx[s] += acc;
    };
    let start = k - 1;
    let end = t_out; // exclusive upper bound of the all-valid range
    for s in 0..start.min(t_in) {
        edge(s, gx);
    }
    let mut s = start;
    while s + BLOCK <= end {
        let mut acc = [0.0f64; BLOCK];
        for (j, &wj) in w.iter().enumerate() {
            let us: &[f64; BLOCK] = up[s - j..s - j + BLOCK].try_into().expect("block");
            for (a, &v) in acc.iter_mut().zip(us) {
                *a += wj * v;
            }
        }
        for (g, a) in gx[s..s + BLOCK].iter_mut().zip(acc) {
            *g += a;
        }
        s += BLOCK;
    }
    for s in s.max(start)..t_in {
        edge(s, gx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::new(vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.outer(1), &[3.0, 4.0, 5.0]);
        assert!(t.clone().reshape(&[3, 2]).is_ok());
        assert!(t.reshape(&[4]).is_err());
    }

    #[test]
    fn kernels_match_naive_loops() {
        let x: Vec<f64> = (0..11).map(|i| (i as f64 * 0.7).sin()).collect();
        let w = [0.5, -1.0, 0.25];
        let mut y = vec![0.0; 9];
        correlate_accumulate(&x, &w, &mut y);
        for t in 0..9 {
            let naive: f64 = (0..3).map(|k| w[k] * x[t + k]).sum();
            assert!((y[t] - naive).abs() < 1e-15);
        }
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), 91.0);
    }

    proptest::proptest! {
        #[test]
        fn blocked_kernels_match_naive(t_out in 1usize..40, k in 1usize..30, seed in 0u64..1000) {
            let val = |i: usize, salt: u64| (((i as u64 + 1) * (seed + salt)) as f64 * 0.37).sin();
            let x: Vec<f64> = (0..t_out + k - 1).map(|i| val(i, 1)).collect();
            let w: Vec<f64> = (0..k).map(|i| val(i, 2)).collect();
            let up: Vec<f64> = (0..t_out).map(|i| val(i, 3)).collect();

            let mut y = vec![0.5; t_out];
            correlate_accumulate(&x, &w, &mut y);
            for t in 0..t_out {
                let naive: f64 = 0.5 + (0..k).map(|j| w[j] * x[t + j]).sum::<f64>();
                proptest::prop_assert!((y[t] - naive).abs() < 1e-12);
            }
            let mut gw = vec![0.0; k];
            correlate_weight_grad(&x, &up, &mut gw);
            for j in 0..k {
                let naive: f64 = (0..t_out).map(|t| up[t] * x[t + j]).sum();
                proptest::prop_assert!((gw[j] - naive).abs() < 1e-12);
            }
            let mut gx = vec![0.0; x.len()];
            correlate_input_grad(&up, &w, &mut gx);
            let mut naive = vec![0.0; x.len()];
            for t in 0..t_out {
                for j in 0..k {
                    naive[t + j] += up[t] * w[j];
                }
            }
            for (a, b) in gx.iter().zip(&naive) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
