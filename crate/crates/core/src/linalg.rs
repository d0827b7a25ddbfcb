//! Small dense linear-algebra helpers on complex matrices.

use nalgebra::{DMatrix, DVector};

use crate::{CMat, CVec, C64};

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn diag_real(values: &[f64]) -> CMat {
    let d = DVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
    CMat::from_diagonal(&d)
}

pub fn vec_real(values: &[f64]) -> CVec {
    CVec::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)))
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `‖M − M*‖₂`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    spectral_norm(&(m - m.adjoint()))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

/// Full SVD `M = U Σ V*` of a possibly rectangular matrix, padded with zero
/// rows so that `V` is square. Singular values are returned descending with
/// the matching columns of `V`.
fn right_singular_pairs(m: &CMat) -> (Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v = svd.v_t.expect("requested V").adjoint();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let cols_sorted: Vec<CVec> = order.iter().map(|&k| v.column(k).into_owned()).collect();
    (s, CMat::from_columns(&cols_sorted))
}

/// Numerical rank: number of singular values above `rel · σ_max`.
pub fn numerical_rank(m: &CMat, rel: f64) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * smax).count()
}

/// Orthonormal basis (as columns) of the numerical kernel of `m`, using the
/// threshold `rel · σ_max`. A zero matrix has the whole space as kernel.
pub fn kernel_basis(m: &CMat, rel: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let (s, v) = right_singular_pairs(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        s.iter().filter(|&&x| x > rel * smax).count()
    };
    v.columns(rank, n - rank).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `basis` (assumed orthonormal) in `C^n`.
pub fn orthogonal_complement(basis: &CMat, n: usize) -> CMat {
    if basis.ncols() == 0 {
        return identity(n);
    }
    let proj = identity(n) - basis * basis.adjoint();
    let (s, v) = right_singular_pairs(&proj);
    let keep = s.iter().filter(|&&x| x > 0.5).count();
    v.columns(0, keep).into_owned()
}

/// Appends columns to `basis` so that it spans `span(basis) + span(extra)`,
/// keeping the result orthonormal. Directions of `extra` whose component
/// orthogonal to `basis` is below `rel` (relative to `extra`'s norm) are
/// dropped.
pub fn extend_orthonormal(basis: &CMat, extra: &CMat, rel: f64) -> CMat {
    let n = extra.nrows().max(basis.nrows());
    if extra.ncols() == 0 {
        return basis.clone();
    }
    let scale = spectral_norm(extra).max(f64::MIN_POSITIVE);
    let mut cols: Vec<CVec> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut residual: Vec<CVec> = extra.column_iter().map(|c| c.into_owned()).collect();
    let project_out = |v: &mut CVec, q: &[CVec]| {
        for _ in 0..2 {
            for c in q {
                let coef = c.dotc(v);
                *v -= c * coef;
            }
        }
    };
    for v in residual.iter_mut() {
        project_out(v, &cols);
    }
    // pivoted Gram-Schmidt: always take the largest remaining direction
    while cols.len() < n {
        let Some((k, norm)) = residual
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if norm <= rel.max(1e-8) * scale {
            break;
        }
        let q = residual.swap_remove(k) / C64::new(norm, 0.0);
        for v in residual.iter_mut() {
            project_out(v, std::slice::from_ref(&q));
        }
        cols.push(q);
    }
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

pub fn determinant(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Inverse through the adjugate identity `X⁻¹ = det(X)⁻¹ adj(X)`.
/// Returns `None` for an exactly singular matrix.
pub fn adjugate_inverse(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let det = determinant(m);
    if det.norm() == 0.0 {
        return None;
    }
    if n == 1 {
        return Some(CMat::from_element(1, 1, C64::new(1.0, 0.0) / det));
    }
    let mut adj = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // adj(X)_{ji} = (-1)^{i+j} M_{ij}
            adj[(j, i)] = determinant(&minor) * sign;
        }
    }
    Some(adj / det)
}

/// Eight-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Gauss–Legendre quadrature of a matrix-valued function on `[a, b]`.
pub fn integrate_matrix<F>(a: f64, b: f64, mut f: F) -> crate::Result<CMat>
where
    F: FnMut(f64) -> crate::Result<CMat>,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc: Option<CMat> = None;
    for (x, w) in GAUSS_LEGENDRE_8 {
        let v = f(mid + half * x)? * C64::new(w * half, 0.0);
        acc = Some(match acc {
            Some(s) => s + v,
            None => v,
        });
    }
    Ok(acc.expect("nonempty rule"))
}

pub fn to_real_matrix(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_diagonal_matrix() {
        let m = diag_real(&[2.0, 0.0, 1.0]);
        let k = kernel_basis(&m, 1e-12);
        assert_eq!(k.ncols(), 1);
        assert!((k[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert_eq!(numerical_rank(&m, 1e-12), 2);
    }

    #[test]
    fn kernel_of_wide_matrix_is_complete() {
        let c = from_real(1, 3, &[1.0, 0.0, 0.0]);
        let k = kernel_basis(&c, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((c * k).norm() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_full_kernel() {
        let k = kernel_basis(&CMat::zeros(2, 2), 1e-12);
        assert_eq!(k.ncols(), 2);
        assert_eq!(numerical_rank(&CMat::zeros(2, 2), 1e-12), 0);
    }

    #[test]
    fn adjugate_matches_lu_inverse() {
        let mut m = from_real(3, 3, &[2.0, 1.0, 0.0, -1.0, 3.0, 1.0, 0.5, 0.0, 1.0]);
        m[(0, 2)] = C64::new(0.0, 1.0);
        let a = adjugate_inverse(&m).unwrap();
        let b = m.clone().try_inverse().unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn complement_completes_basis() {
        let b = CMat::from_columns(&[vec_real(&[1.0, 0.0, 0.0])]);
        let c = orthogonal_complement(&b, 3);
        assert_eq!(c.ncols(), 2);
        assert!((b.adjoint() * &c).norm() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = integrate_matrix(0.0, 2.0, |t| Ok(CMat::from_element(1, 1, C64::new(t.powi(7), 0.0)))).unwrap();
        assert!((v[(0, 0)].re - 32.0).abs() < 1e-12);
    }
}
