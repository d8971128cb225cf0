use super::Real;

/// `c = op(a) * op(b) + beta * c` for contiguous row-major matrices, where
/// `op(a)` is `m x k` and `op(b)` is `k x n`. With `trans_a` the buffer `a`
/// holds the `k x m` matrix; likewise `trans_b` means `b` holds `n x k`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    trans_a: bool,
    b: &[T],
    trans_b: bool,
    beta: T,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs size");
    assert_eq!(b.len(), k * n, "gemm: rhs size");
    assert_eq!(c.len(), m * n, "gemm: output size");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserted lengths cover every (row, col) reached through the
    // strides above, and `c` is a distinct &mut borrow.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds `k x k` patches of a `channels x height x width` image into a
/// `(channels * k * k) x (out_h * out_w)` matrix. Out-of-image taps read 0.
#[allow(clippy::too_many_arguments)]
pub fn im2col<T: Real>(
    image: &[T],
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    let cols_n = out_h * out_w;
    let mut cols = vec![T::zero(); channels * kernel * kernel * cols_n];
    for c in 0..channels {
        let plane = &image[c * height * width..(c + 1) * height * width];
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = (c * kernel + ky) * kernel + kx;
                let dst = &mut cols[row * cols_n..(row + 1) * cols_n];
                for oy in 0..out_h {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= height as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * width..(iy as usize + 1) * width];
                    let dst_row = &mut dst[oy * out_w..(oy + 1) * out_w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < width as isize {
                            *d = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-and-sums a patch matrix back into an
/// image of `channels x height x width`.
#[allow(clippy::too_many_arguments)]
pub fn col2im<T: Real>(
    cols: &[T],
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    let cols_n = out_h * out_w;
    assert_eq!(cols.len(), channels * kernel * kernel * cols_n, "col2im: size");
    let mut image = vec![T::zero(); channels * height * width];
    for c in 0..channels {
        let plane = &mut image[c * height * width..(c + 1) * height * width];
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = (c * kernel + ky) * kernel + kx;
                let src = &cols[row * cols_n..(row + 1) * cols_n];
                for oy in 0..out_h {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= height as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * width..(iy as usize + 1) * width];
                    for (ox, &s) in src[oy * out_w..(oy + 1) * out_w].iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < width as isize {
                            dst_row[ix as usize] += s;
                        }
                    }
                }
            }
        }
    }
    image
}
