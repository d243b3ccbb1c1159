//! Small dense complex linear algebra used by the dynamics layer:
//! a scaling-and-squaring matrix exponential and a null-space solver
//! for the (non-normal) vectorized generator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type CMat = DMatrix<Complex64>;

/// Matrix 1-norm: max over columns of the column's absolute sum.
pub fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Dense matrix exponential by degree-13 Pade approximation with
/// scaling and squaring (Higham 2005). Good to close to machine
/// precision for the well-scaled generators used here.
pub fn expm(a: &CMat) -> CMat {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let d = a.nrows();
    let theta13 = 5.371_920_351_148_152;

    let norm = one_norm(a);
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let scale = Complex64::new((0.5f64).powi(s), 0.0);
    let a = a.map(|z| z * scale);

    // Pade-13 coefficients.
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let id = CMat::identity(d, d);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (a6.scale(B[13]) + a4.scale(B[11]) + a2.scale(B[9]))
        + a6.scale(B[7])
        + a4.scale(B[5])
        + a2.scale(B[3])
        + id.scale(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (a6.scale(B[12]) + a4.scale(B[10]) + a2.scale(B[8]))
        + a6.scale(B[6])
        + a4.scale(B[4])
        + a2.scale(B[2])
        + id.scale(B[0]);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs
        .lu()
        .solve(&rhs)
        .expect("expm: Pade denominator singular (matrix badly scaled?)");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Result of a null-space probe of a generator.
pub struct NullSpace {
    /// Unit-norm vector spanning the (near-)kernel, from the smallest
    /// singular direction.
    pub vector: DVector<Complex64>,
    /// Number of singular values below tolerance.
    pub dim: usize,
    /// Smallest singular value (residual of the returned vector).
    pub sigma_min: f64,
}

/// Null space of a general complex matrix through the Hermitian
/// eigendecomposition of A+A: singular directions of A are eigenvectors
/// of A+A with eigenvalue sigma^2. Squaring the condition number is
/// acceptable here because the generators used have spectral gaps many
/// orders above machine noise.
pub fn null_space(a: &CMat, tol: f64) -> NullSpace {
    let g = a.ad_mul(a); // A+ A, Hermitian PSD
    let g_norm = one_norm(&g);
    let se = g.clone().symmetric_eigen();
    // eigenvalues come back unordered
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| {
        se.eigenvalues[i]
            .partial_cmp(&se.eigenvalues[j])
            .expect("NaN eigenvalue in null_space")
    });
    let tol2 = tol * tol;
    let dim = idx
        .iter()
        .take_while(|&&i| se.eigenvalues[i].max(0.0) < tol2)
        .count();
    let k = idx[0];
    let mut v = se.eigenvectors.column(k).into_owned();

    // the eigensolver leaves the kernel vector with error of order
    // eps * |A|^2 / gap; two rounds of inverse iteration on the
    // regularized Gram matrix push it to the machine-precision floor,
    // which matters because downstream quantities can amplify state
    // noise by large factors
    if g_norm > 0.0 {
        let shift = Complex64::new(g_norm * 1e-14, 0.0);
        let mut shifted = g;
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += shift;
        }
        let lu = shifted.lu();
        for _ in 0..2 {
            match lu.solve(&v) {
                Some(y) => {
                    let n = y.norm();
                    if !(n.is_finite() && n > 0.0) {
                        break;
                    }
                    v = y.unscale(n);
                }
                None => break,
            }
        }
    }

    let sigma_min = (a * &v).norm();
    NullSpace {
        vector: v,
        dim,
        sigma_min,
    }
}
