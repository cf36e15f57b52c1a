//! Safe strided wrapper over `matrixmultiply::dgemm`.

/// Strided view of an `rows × cols` matrix inside a slice.
#[derive(Clone, Copy)]
pub(crate) struct View {
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    /// Dense row-major matrix.
    pub fn rm(rows: usize, cols: usize) -> Self {
        View { rows, cols, rs: cols, cs: 1 }
    }

    /// Transpose of a dense row-major `cols × rows` matrix.
    pub fn rm_t(rows: usize, cols: usize) -> Self {
        View { rows, cols, rs: 1, cs: rows }
    }

    pub fn strided(rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        View { rows, cols, rs, cs }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs + 1
        }
    }
}

/// `c ← alpha·a·b + beta·c`.
///
/// Panics if the views disagree in shape or reach outside their slices, so the
/// unsafe call below only ever sees in-bounds pointers.
pub(crate) fn gemm(alpha: f64, a: &[f64], av: View, b: &[f64], bv: View, beta: f64, c: &mut [f64], cv: View) {
    assert_eq!(av.cols, bv.rows, "gemm inner dimension");
    assert_eq!((av.rows, bv.cols), (cv.rows, cv.cols), "gemm output shape");
    assert!(av.span() <= a.len() && bv.span() <= b.len() && cv.span() <= c.len(), "gemm view out of bounds");
    if cv.rows == 0 || cv.cols == 0 {
        return;
    }
    if av.cols == 0 {
        // k = 0: the product is empty, only the beta scaling applies.
        for i in 0..cv.rows {
            for j in 0..cv.cols {
                let x = &mut c[i * cv.rs + j * cv.cs];
                *x = if beta == 0.0 { 0.0 } else { beta * *x };
            }
        }
        return;
    }
    // SAFETY: shapes agree and every addressed element lies inside the
    // corresponding slice (checked above); `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            cv.rows,
            av.cols,
            cv.cols,
            alpha,
            a.as_ptr(),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr(),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr(),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matches_naive_product_and_transposes() {
        let a: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect(); // 2×3
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect(); // 3×4
        let mut c = vec![0.0; 8];
        gemm(1.0, &a, View::rm(2, 3), &b, View::rm(3, 4), 0.0, &mut c, View::rm(2, 4));
        let want = naive(2, 3, 4, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-14);
        }
        // (aᵀ)ᵀ read through a transposed view of a 3×2 buffer
        let at: Vec<f64> = (0..3).flat_map(|j| (0..2).map(move |i| (i * 3 + j) as f64 - 2.5)).collect();
        let mut c2 = vec![1.0; 8];
        gemm(1.0, &at, View::rm_t(2, 3), &b, View::rm(3, 4), 1.0, &mut c2, View::rm(2, 4));
        for (x, y) in c2.iter().zip(&want) {
            assert!((x - 1.0 - y).abs() < 1e-14);
        }
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn rejects_out_of_bounds_view() {
        let mut c = vec![0.0; 3];
        gemm(1.0, &[1.0; 4], View::rm(2, 2), &[1.0; 4], View::rm(2, 2), 0.0, &mut c, View::rm(2, 2));
    }
}
