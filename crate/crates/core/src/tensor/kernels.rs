//! Inner loops. All reductions use a fixed summation order so results are
//! reproducible run to run and independent of thread count.

/// `y += alpha * x`.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with eight independent lanes, summed left to right at the end.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut s = 0.0;
    for l in lanes {
        s += l;
    }
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `c[m,n] += a[m,k] * b[k,n]`, accumulating over `k` in increasing order.
pub(crate) fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip != 0.0 {
                axpy(aip, &b[p * n..(p + 1) * n], c_row);
            }
        }
    }
}

/// Row/column strides of a matrix operand, in elements.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Strides(pub usize, pub usize);

impl Strides {
    pub(crate) fn row_major(cols: usize) -> Self {
        Strides(cols, 1)
    }

    /// Transposed view of a row-major buffer with `cols` columns.
    pub(crate) fn transposed(cols: usize) -> Self {
        Strides(1, cols)
    }

    fn span(self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * self.0 + (cols - 1) * self.1 + 1
        }
    }
}

/// `C[m,n] = A[m,k]·B[k,n] + beta·C` through the blocked `matrixmultiply`
/// kernel. Single-threaded and deterministic for a given CPU.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: Strides, b: &[f64], sb: Strides, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= sa.span(m, k), "gemm: A too short");
    assert!(b.len() >= sb.span(k, n), "gemm: B too short");
    assert!(c.len() >= m * n, "gemm: C too short");
    // SAFETY: the asserts above bound every index the kernel touches for
    // the given extents and strides; `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
