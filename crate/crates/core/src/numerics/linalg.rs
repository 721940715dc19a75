//! Dense kernels shared by the forward and backward passes.

/// Whether a row-major operand is used as stored or transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    N,
    T,
}

/// `c = a·b + beta·c` for row-major buffers, where `a` is logically `m×k`
/// and `b` is logically `k×n` after applying the transpose flags.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    op_a: Op,
    b: &[f64],
    op_b: Op,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = match op_a {
        Op::N => (k as isize, 1),
        Op::T => (1, m as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (n as isize, 1),
        Op::T => (1, k as isize),
    };
    // SAFETY: the strides above address exactly the m·k, k·n and m·n
    // elements whose lengths were asserted, and `c` does not alias `a`/`b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
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

/// Output length of a 1-D convolution, or `None` if the kernel does not fit.
pub(crate) fn conv_out_len(t: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = t + 2 * padding;
    if k == 0 || stride == 0 || k > padded {
        None
    } else {
        Some((padded - k) / stride + 1)
    }
}

/// Unfolds `x: [c_in, t]` into `[c_in·k, t_out]` patches.
pub(crate) fn im2col(
    x: &[f64],
    c_in: usize,
    t: usize,
    k: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
) -> Vec<f64> {
    let mut cols = vec![0.0; c_in * k * t_out];
    for ci in 0..c_in {
        let xrow = &x[ci * t..(ci + 1) * t];
        for kk in 0..k {
            let dst = &mut cols[(ci * k + kk) * t_out..(ci * k + kk + 1) * t_out];
            for (o, d) in dst.iter_mut().enumerate() {
                let pos = (o * stride + kk) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < t {
                    *d = xrow[pos as usize];
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto `[c_in, t]`.
pub(crate) fn col2im_add(
    cols: &[f64],
    c_in: usize,
    t: usize,
    k: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
    dx: &mut [f64],
) {
    for ci in 0..c_in {
        for kk in 0..k {
            let src = &cols[(ci * k + kk) * t_out..(ci * k + kk + 1) * t_out];
            for (o, &g) in src.iter().enumerate() {
                let pos = (o * stride + kk) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < t {
                    dx[ci * t + pos as usize] += g;
                }
            }
        }
    }
}

/// Linear-interpolation matrix `[t_in, t_out]` with aligned end points, so
/// that `y = x · M` resamples the columns of `x: [c, t_in]` to `t_out`.
pub fn interp_matrix(t_in: usize, t_out: usize) -> Vec<f64> {
    let mut m = vec![0.0; t_in * t_out];
    for j in 0..t_out {
        let pos = if t_out == 1 || t_in == 1 {
            0.0
        } else {
            j as f64 * (t_in - 1) as f64 / (t_out - 1) as f64
        };
        let lo = (pos.floor() as usize).min(t_in - 1);
        let hi = (lo + 1).min(t_in - 1);
        let frac = pos - lo as f64;
        m[lo * t_out + j] += 1.0 - frac;
        if frac > 0.0 {
            m[hi * t_out + j] += frac;
        }
    }
    m
}
