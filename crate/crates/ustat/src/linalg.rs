//! Small dense linear algebra helpers: symmetric eigenvalues via cyclic
//! Jacobi rotations, numerical rank, and order-independent summation.

/// Eigenvalues of a small symmetric matrix (row-major, `n x n`), ascending.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    let (vals, _) = jacobi(matrix, n, false);
    vals
}

/// Eigenvalues and eigenvectors (columns) of a small symmetric matrix.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    jacobi(matrix, n, true)
}

fn jacobi(matrix: &[f64], n: usize, want_vectors: bool) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; if want_vectors { n * n } else { 0 }];
    if want_vectors {
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
    }
    let idx = |r: usize, c: usize| r * n + c;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += a[idx(r, c)] * a[idx(r, c)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[idx(k, p)];
                        let vkq = v[idx(k, q)];
                        v[idx(k, p)] = c * vkp - s * vkq;
                        v[idx(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[idx(i, i)]).collect();
    if want_vectors {
        // Sort ascending, permuting the eigenvector columns along.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let mut sorted_vecs = vec![0.0; n * n];
        for (new_c, &old_c) in order.iter().enumerate() {
            for r in 0..n {
                sorted_vecs[r * n + new_c] = v[r * n + old_c];
            }
        }
        (sorted_vals, sorted_vecs)
    } else {
        vals.sort_by(|x, y| x.total_cmp(y));
        (vals, v)
    }
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Smallest eigenvalue of a symmetric matrix; positive semidefiniteness can
/// be checked as `min_eigenvalue >= -tol`.
pub fn min_symmetric_eigenvalue(matrix: &[f64], n: usize) -> f64 {
    symmetric_eigenvalues(matrix, n)[0]
}

/// Numerical rank of a set of vectors, via Gram-matrix eigenvalues.
pub fn rank_of(vectors: &[Vec<f64>], tol: f64) -> usize {
    let k = vectors.len();
    if k == 0 {
        return 0;
    }
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            gram[i * k + j] = dot;
            gram[j * k + i] = dot;
        }
    }
    let eigs = symmetric_eigenvalues(&gram, k);
    let scale = eigs.last().map_or(0.0, |v| v.abs()).max(1.0);
    eigs.iter().filter(|&&e| e > tol * scale).count()
}

/// Sum by pairwise (tree) reduction; the result depends only on the element
/// order, never on chunking by callers.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Mean via pairwise summation.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Population variance (divides by n) via pairwise summation.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / xs.len() as f64
}

/// Central moment of given order.
pub fn central_moment(xs: &[f64], order: u32) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let pw: Vec<f64> = xs.iter().map(|&x| (x - m).powi(order as i32)).collect();
    pairwise_sum(&pw) / xs.len() as f64
}
