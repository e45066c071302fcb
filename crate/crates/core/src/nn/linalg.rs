//! Thin safe wrappers over `matrixmultiply::dgemm` for the three products the
//! network passes need. All matrices are dense row-major `f64` slices.

/// `c = a * b^T`, with `a: n x k`, `b: m x k`, `c: n x m`.
pub(crate) fn matmul_bt(a: &[f64], b: &[f64], c: &mut [f64], n: usize, k: usize, m: usize) {
    assert_eq!(a.len(), n * k);
    assert_eq!(b.len(), m * k);
    assert_eq!(c.len(), n * m);
    if n == 0 || m == 0 {
        return;
    }
    // SAFETY: lengths checked above; strides describe row-major a, transposed b, row-major c.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// `c = a * b`, with `a: n x k`, `b: k x m`, `c: n x m`.
pub(crate) fn matmul(a: &[f64], b: &[f64], c: &mut [f64], n: usize, k: usize, m: usize) {
    assert_eq!(a.len(), n * k);
    assert_eq!(b.len(), k * m);
    assert_eq!(c.len(), n * m);
    if n == 0 || m == 0 {
        return;
    }
    // SAFETY: lengths checked above; all operands row-major.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            m as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// `c += a^T * b`, with `a: n x p`, `b: n x q`, `c: p x q`.
pub(crate) fn matmul_at_acc(a: &[f64], b: &[f64], c: &mut [f64], n: usize, p: usize, q: usize) {
    assert_eq!(a.len(), n * p);
    assert_eq!(b.len(), n * q);
    assert_eq!(c.len(), p * q);
    if n == 0 || p == 0 || q == 0 {
        return;
    }
    // SAFETY: lengths checked above; a is read transposed through its strides.
    unsafe {
        matrixmultiply::dgemm(
            p,
            n,
            q,
            1.0,
            a.as_ptr(),
            1,
            p as isize,
            b.as_ptr(),
            q as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            q as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                for p in 0..k {
                    c[i * m + j] += a[i * k + p] * b[p * m + j];
                }
            }
        }
        c
    }

    fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = a[i * c + j];
            }
        }
        t
    }

    #[test]
    fn products_match_naive_loops() {
        let (n, k, m) = (3, 4, 5);
        let a: Vec<f64> = (0..n * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * m).map(|i| (i as f64 * 0.91).cos()).collect();
        let expected = naive(&a, &b, n, k, m);

        let mut c = vec![0.0; n * m];
        matmul(&a, &b, &mut c, n, k, m);
        for (x, y) in c.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }

        let bt = transpose(&b, k, m);
        let mut c2 = vec![0.0; n * m];
        matmul_bt(&a, &bt, &mut c2, n, k, m);
        for (x, y) in c2.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }

        let at = transpose(&a, n, k);
        let mut c3 = vec![1.0; n * m];
        matmul_at_acc(&at, &b, &mut c3, k, n, m);
        for (x, y) in c3.iter().zip(&expected) {
            assert!((x - 1.0 - y).abs() < 1e-12);
        }
    }
}
