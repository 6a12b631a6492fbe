//! Dense kernels that nalgebra's generic products handle slowly at our sizes.

use nalgebra::DMatrix;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `MᵀM`, filled from the upper triangle.
pub(crate) fn column_gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = m.shape();
    let data = m.as_slice();
    let mut g = DMatrix::zeros(p, p);
    for j in 0..p {
        let cj = &data[j * n..(j + 1) * n];
        for i in 0..=j {
            let v = dot(&data[i * n..(i + 1) * n], cj);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
