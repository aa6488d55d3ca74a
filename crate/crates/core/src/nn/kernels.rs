//! Thin safe wrappers over the `matrixmultiply` GEMM kernels.

/// `c = a · b + beta · c` for row/column strided operands.
///
/// `a` is `m × k` addressed as `a[i * rsa + j * csa]`, `b` is `k × n`
/// addressed likewise, `c` is a contiguous row-major `m × n` block.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n, "gemm output too small");
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa, "gemm lhs out of bounds");
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb, "gemm rhs out of bounds");
    }
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` is a distinct mutable borrow so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transposed_operands() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, 2, 1, &b, 2, 1, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        // aᵀ · b
        gemm(2, 2, 2, &a, 1, 2, &b, 2, 1, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        // accumulate
        gemm(2, 2, 2, &a, 1, 2, &b, 2, 1, 1.0, &mut c);
        assert_eq!(c, [52.0, 60.0, 76.0, 88.0]);
    }
}
