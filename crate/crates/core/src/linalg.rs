//! Complex linear-algebra helpers shared by the solvers.
//!
//! Thin layer over `nalgebra` for Hermitian matrices: eigendecomposition
//! sorted descending, PSD checks and factorizations with jitter escalation,
//! pseudo-inverses with a relative singular-value cutoff, the Frobenius
//! projection onto the PSD trace-constrained set, and allocation-free
//! Cholesky kernels for Monte-Carlo inner loops.
//!
//! Vectorization is column-major throughout (`nalgebra`'s storage order), so
//! `vec(H x) = (x^T kron I_m) vec(H)`.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::standard_complex_normal;
use crate::tol;
use crate::{C64, CMat, CVec};

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    let mut h = a.adjoint();
    h += a;
    h.scale_mut(0.5);
    h
}

/// Largest entrywise deviation `|A - A^H|`.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let ah = a.adjoint();
    (a - ah).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// descending. Returns `(values, vectors)` with vectors as columns matching
/// the sorted order.
pub fn eigh_desc(a: &CMat) -> (DVector<f64>, CMat) {
    let se = hermitian_part(a).symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Check `lambda_min >= -rel_tol * max(lambda_max, 0)` for a Hermitian matrix.
pub fn check_psd(a: &CMat, rel_tol: f64) -> Result<()> {
    let (vals, _) = eigh_desc(a);
    let max = vals[0].max(0.0);
    let min = vals[vals.len() - 1];
    if min < -rel_tol * max {
        return Err(Error::Invalid(format!(
            "matrix is not positive semidefinite: min eigenvalue {min:.3e}, max {max:.3e}"
        )));
    }
    Ok(())
}

/// Factor a PSD matrix as `F F^H`.
///
/// Tries a plain Cholesky first, then escalates a relative diagonal jitter
/// from [`tol::JITTER_FIRST_REL`] to [`tol::JITTER_LAST_REL`], and finally
/// falls back to eigendecomposition with negative eigenvalues clipped at
/// zero. The fallback returns a possibly rectangular factor whose column
/// count is the numerical rank, so singular covariances sample correctly.
///
/// Fails only when the matrix is indefinite beyond [`tol::PSD_REL_TOL`].
pub fn psd_sqrt_factor(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let scale = a.diagonal().iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    if scale == 0.0 && a.iter().all(|z| z.norm_sqr() == 0.0) {
        // Zero covariance: rank-0 factor, draws are deterministic.
        return Ok(CMat::zeros(n, 0));
    }
    // The strictly-positive-pivot Cholesky doubles as the definiteness test
    // (the library one takes complex square roots of negative pivots).
    let mut l = a.clone();
    if cholesky_in_place(&mut l) {
        zero_upper(&mut l);
        return Ok(l);
    }
    let mut jitter = tol::JITTER_FIRST_REL;
    while jitter <= tol::JITTER_LAST_REL {
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] += C64::new(jitter * scale, 0.0);
        }
        if cholesky_in_place(&mut aj) {
            zero_upper(&mut aj);
            return Ok(aj);
        }
        jitter *= 100.0;
    }
    let (vals, vecs) = eigh_desc(a);
    let max = vals[0].max(0.0);
    if vals[vals.len() - 1] < -tol::PSD_REL_TOL * max {
        return Err(Error::Factorization(format!(
            "covariance is indefinite beyond tolerance: min eigenvalue {:.3e}, max {:.3e}",
            vals[vals.len() - 1],
            max
        )));
    }
    let rank = vals.iter().filter(|&&v| v > tol::PINV_REL_TOL * max).count();
    let mut f = CMat::zeros(n, rank);
    for k in 0..rank {
        let s = vals[k].max(0.0).sqrt();
        f.set_column(k, &(vecs.column(k) * C64::new(s, 0.0)));
    }
    Ok(f)
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix, treating
/// eigenvalues below `PINV_REL_TOL * lambda_max` as zero.
pub fn pinv_psd(a: &CMat) -> CMat {
    let (vals, vecs) = eigh_desc(a);
    let max = vals[0].max(0.0);
    let cutoff = tol::PINV_REL_TOL * max;
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        if vals[k] > cutoff {
            let col = vecs.column(k);
            let scale = C64::new(1.0 / vals[k], 0.0);
            // out += v v^H / lambda
            out.gerc(scale, &col, &col, C64::new(1.0, 0.0));
        }
    }
    out
}

/// Euclidean projection of `vals` onto the simplex `{p >= 0, sum p = total}`.
pub fn simplex_project(vals: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = vals.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - total) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    vals.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Frobenius-nearest Hermitian PSD matrix with trace exactly `trace`.
///
/// Hermitianizes, eigendecomposes, and projects the eigenvalue vector onto
/// the simplex of the given total.
pub fn project_psd_trace(a: &CMat, trace: f64) -> CMat {
    let (vals, vecs) = eigh_desc(a);
    let proj = simplex_project(vals.as_slice(), trace);
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        if proj[k] > 0.0 {
            let col = vecs.column(k);
            out.gerc(C64::new(proj[k], 0.0), &col, &col, C64::new(1.0, 0.0));
        }
    }
    hermitian_part(&out)
}

/// Column-major vectorization: stacks the columns of `m`.
pub fn vec_mat(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_mat`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols, "unvec length mismatch");
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Haar-ish random unitary matrix from the QR of a Ginibre draw.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| standard_complex_normal(rng));
    let qr = g.qr();
    let r_diag: Vec<C64> = (0..n).map(|i| qr.r()[(i, i)]).collect();
    let mut q = qr.q();
    // Fix the phase ambiguity so the distribution is Haar.
    for (j, d) in r_diag.iter().enumerate() {
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let col = q.column(j) * phase;
        q.set_column(j, &col);
    }
    q
}

/// Random Hermitian PSD matrix with the given trace (Wishart draw rescaled).
pub fn random_psd_trace<R: Rng>(n: usize, trace: f64, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| standard_complex_normal(rng));
    let mut a = &g * g.adjoint();
    let tr: f64 = a.diagonal().iter().map(|z| z.re).sum();
    a.scale_mut(trace / tr);
    hermitian_part(&a)
}

fn zero_upper(l: &mut CMat) {
    let n = l.nrows();
    for j in 1..n {
        for i in 0..j {
            l[(i, j)] = C64::new(0.0, 0.0);
        }
    }
}

// ---------------------------------------------------------------------------
// Allocation-free kernels for Monte-Carlo inner loops
// ---------------------------------------------------------------------------

/// In-place Cholesky of a Hermitian positive-definite matrix. On success the
/// lower triangle of `a` holds `L` with `L L^H = A` (upper triangle is left
/// stale). Returns `false` if a pivot is not strictly positive.
pub fn cholesky_in_place(a: &mut CMat) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= a[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[(j, j)] = C64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)].conj();
            }
            a[(i, j)] = s / d;
        }
    }
    true
}

/// `ln det A` from an in-place Cholesky factor produced by
/// [`cholesky_in_place`].
pub fn chol_logdet(l: &CMat) -> f64 {
    (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0
}

/// Solve `L X = B` in place for lower-triangular `L` (as produced by
/// [`cholesky_in_place`]); `b` is overwritten with the solution, column by
/// column.
pub fn solve_lower_in_place(l: &CMat, b: &mut CMat) {
    let n = l.nrows();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * b[(k, col)];
            }
            b[(i, col)] = s / l[(i, i)].re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_reconstructs_and_sorts() {
        let mut rng = rng_from_seed(3);
        let a = random_psd_trace(4, 2.5, &mut rng);
        let (vals, vecs) = eigh_desc(&a);
        for w in vals.as_slice().windows(2) {
            assert!(w[0] >= w[1], "eigenvalues must be sorted descending");
        }
        let mut recon = CMat::zeros(4, 4);
        for k in 0..4 {
            recon.gerc(c(vals[k], 0.0), &vecs.column(k), &vecs.column(k), c(1.0, 0.0));
        }
        assert_relative_eq!((a - recon).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn sqrt_factor_handles_zero_singular_and_full_rank() {
        let z = CMat::zeros(3, 3);
        let f = psd_sqrt_factor(&z).unwrap();
        assert_eq!(f.ncols(), 0, "zero covariance factors to rank 0");

        // Singular rank-1 example.
        let v = CVec::from_column_slice(&[c(1.0, 0.0), c(0.0, 1.0)]);
        let mut a = CMat::zeros(2, 2);
        a.gerc(c(1.0, 0.0), &v, &v, c(0.0, 0.0));
        let f = psd_sqrt_factor(&a).unwrap();
        assert_relative_eq!((&f * f.adjoint() - &a).norm(), 0.0, epsilon = 1e-9);

        let mut rng = rng_from_seed(11);
        let a = random_psd_trace(5, 5.0, &mut rng);
        let f = psd_sqrt_factor(&a).unwrap();
        assert_relative_eq!((&f * f.adjoint() - &a).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn sqrt_factor_rejects_indefinite() {
        let a = CMat::from_diagonal(&CVec::from_column_slice(&[c(1.0, 0.0), c(-0.5, 0.0)]));
        assert!(matches!(psd_sqrt_factor(&a), Err(Error::Factorization(_))));
    }

    #[test]
    fn pinv_psd_inverts_on_range() {
        let mut rng = rng_from_seed(5);
        let g = CMat::from_fn(3, 2, |_, _| standard_complex_normal(&mut rng));
        let a = &g * g.adjoint(); // rank 2 in 3x3
        let p = pinv_psd(&a);
        // A pinv(A) A = A
        assert_relative_eq!((&a * &p * &a - &a).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn simplex_projection_basics() {
        let p = simplex_project(&[0.5, 0.3], 1.0);
        assert_relative_eq!(p[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.4, epsilon = 1e-12);

        // A strongly negative coordinate is clipped to zero.
        let p = simplex_project(&[2.0, -5.0], 1.0);
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_projection_is_feasible_and_idempotent() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let g = CMat::from_fn(3, 3, |_, _| standard_complex_normal(&mut rng));
            let a = hermitian_part(&g);
            let p = project_psd_trace(&a, 2.0);
            let tr: f64 = p.diagonal().iter().map(|z| z.re).sum();
            assert_relative_eq!(tr, 2.0, epsilon = 1e-9);
            check_psd(&p, 1e-9).unwrap();
            let pp = project_psd_trace(&p, 2.0);
            assert_relative_eq!((pp - &p).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn in_place_cholesky_matches_nalgebra() {
        let mut rng = rng_from_seed(13);
        let a = random_psd_trace(4, 4.0, &mut rng)
            + CMat::identity(4, 4).scale(0.1);
        let mut l = a.clone();
        assert!(cholesky_in_place(&mut l));
        let ch = a.clone().cholesky().unwrap();
        let ld_ref: f64 = (0..4).map(|i| ch.l_dirty()[(i, i)].re.ln()).sum::<f64>() * 2.0;
        assert_relative_eq!(chol_logdet(&l), ld_ref, epsilon = 1e-10);

        let mut b = CMat::from_fn(4, 2, |_, _| standard_complex_normal(&mut rng));
        let x_ref = ch.l().solve_lower_triangular(&b).unwrap();
        solve_lower_in_place(&l, &mut b);
        assert_relative_eq!((b - x_ref).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rng_from_seed(17);
        let u = random_unitary(4, &mut rng);
        assert_relative_eq!((u.adjoint() * &u - CMat::identity(4, 4)).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn vec_is_column_major() {
        let m = crate::cmat_from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = vec_mat(&m);
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&v, 2, 2), m);
    }
}
