//! Inner matrix kernels shared by forward and backward passes.

/// C = A . B with A `[m,k]`, B `[k,n]`, row-major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// acc += G . B^T with G `[m,n]`, B `[k,n]`, acc `[m,k]`.
pub fn matmul_acc_nt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize, acc: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            let mut s = 0.0;
            for (gv, bv) in grow.iter().zip(brow) {
                s += gv * bv;
            }
            acc[i * k + kk] += s;
        }
    }
}

/// acc += A^T . G with A `[m,k]`, G `[m,n]`, acc `[k,n]`.
pub fn matmul_acc_tn(a: &[f64], g: &[f64], k: usize, m: usize, n: usize, acc: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == 0.0 {
                continue;
            }
            let arow = &mut acc[kk * n..(kk + 1) * n];
            for (cv, &gv) in arow.iter_mut().zip(grow) {
                *cv += av * gv;
            }
        }
    }
}
