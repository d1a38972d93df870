//! Dense linear algebra over the Euclidean space (V, h).
//!
//! Everything downstream works in an h-orthonormal basis, so after
//! [`InnerProductSpace::orthonormalize`] the metric is the identity and the
//! symmetric bilinear extension of h to V_C is the plain `u^T v` (no
//! conjugation). Complex quantities are `nalgebra` matrices over
//! [`Complex64`].

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Largest absolute entry.
pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|v| Complex::new(v, 0.0))
}

/// Columns of `m` as owned vectors.
pub fn columns(m: &RMat) -> Vec<RVec> {
    (0..m.ncols()).map(|j| m.column(j).into_owned()).collect()
}

pub fn unit(m: usize, k: usize) -> RVec {
    let mut e = RVec::zeros(m);
    e[k] = 1.0;
    e
}

/// Symmetric eigen-decomposition with eigenpairs sorted by decreasing
/// eigenvalue. Sorting makes downstream bases deterministic.
pub fn sorted_symmetric_eigen(s: &RMat) -> (Vec<f64>, RMat) {
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = RMat::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Modified Gram-Schmidt over `candidates`, keeping vectors whose residual
/// norm exceeds `tol`, stopping once `max_rank` vectors are kept.
pub fn gram_schmidt<I>(candidates: I, max_rank: usize, tol: f64) -> Vec<RVec>
where
    I: IntoIterator<Item = RVec>,
{
    let mut basis: Vec<RVec> = Vec::with_capacity(max_rank);
    for mut v in candidates {
        if basis.len() == max_rank {
            break;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / norm);
        }
    }
    basis
}

/// Orthonormal basis (as columns) of the null space of the linear map with
/// matrix `a`, assuming it has rank `rank`.
pub fn kernel_basis(a: &RMat, rank: usize) -> RMat {
    let gram = a.transpose() * a;
    let (_, vecs) = sorted_symmetric_eigen(&gram);
    vecs.columns(rank, a.ncols() - rank).into_owned()
}

/// Orthonormal basis of the row space of `a`, assuming rank `rank`.
pub fn row_space_basis(a: &RMat, rank: usize) -> RMat {
    let gram = a.transpose() * a;
    let (_, vecs) = sorted_symmetric_eigen(&gram);
    vecs.columns(0, rank).into_owned()
}

/// Least-squares solution of `a x = b` for `a` of full rank, through a
/// Householder QR of `a` or `a^T`; the minimum-norm solution when `a` is
/// wide. `None` when a diagonal entry of `R` falls below `1e-12` of the
/// largest.
pub fn lstsq(a: &RMat, b: &RMat) -> Option<RMat> {
    let tall = a.nrows() >= a.ncols();
    let qr = if tall { a.clone().qr() } else { a.transpose().qr() };
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    if diag.is_empty() || !(diag.min() > 1e-12 * diag.max()) {
        return None;
    }
    let q = qr.q();
    if tall {
        r.solve_upper_triangular(&(q.transpose() * b))
    } else {
        r.transpose().solve_lower_triangular(b).map(|y| q * y)
    }
}

/// Number of singular values above `tol`.
pub fn numerical_rank(a: &RMat, tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Axis-aligned box; used for Euclidean domains U ⊂ V and for charts of N.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: RVec,
    upper: RVec,
}

impl BoxDomain {
    pub fn new(lower: RVec, upper: RVec) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Shape("box corners must have equal, nonzero length".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(Error::Shape("box is empty".into()));
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::new(RVec::from_column_slice(lower), RVec::from_column_slice(upper))
    }

    /// The cube `[-r, r]^dim`.
    pub fn cube(dim: usize, r: f64) -> Self {
        BoxDomain {
            lower: RVec::from_element(dim, -r),
            upper: RVec::from_element(dim, r),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &RVec {
        &self.lower
    }

    pub fn upper(&self) -> &RVec {
        &self.upper
    }

    pub fn center(&self) -> RVec {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn contains(&self, x: &RVec) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Box shrunk about its center; `fraction` of each side is removed.
    pub fn shrink(&self, fraction: f64) -> BoxDomain {
        let c = self.center();
        let half = (&self.upper - &self.lower) * (0.5 * (1.0 - fraction));
        BoxDomain {
            lower: &c - &half,
            upper: &c + &half,
        }
    }

    pub fn translate(&self, t: &RVec) -> BoxDomain {
        BoxDomain {
            lower: &self.lower + t,
            upper: &self.upper + t,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RVec {
        RVec::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(self.upper.iter())
                .map(|(l, u)| rng.random_range(*l..*u)),
        )
    }

    /// Regular grid with `res` nodes per axis, in lexicographic order
    /// (last axis fastest).
    pub fn grid(&self, res: usize) -> Vec<RVec> {
        let res = res.max(2);
        let d = self.dim();
        let total = res.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = RVec::zeros(d);
                for k in (0..d).rev() {
                    let i = idx % res;
                    idx /= res;
                    let t = i as f64 / (res - 1) as f64;
                    p[k] = self.lower[k] + t * (self.upper[k] - self.lower[k]);
                }
                p
            })
            .collect()
    }
}

/// The space (V, h) together with an h-orthonormal working basis.
#[derive(Debug, Clone)]
pub struct InnerProductSpace {
    h: RMat,
    working_basis: RMat,
}

impl InnerProductSpace {
    /// Standard Euclidean structure on R^m.
    pub fn euclidean(m: usize) -> Self {
        InnerProductSpace {
            h: RMat::identity(m, m),
            working_basis: RMat::identity(m, m),
        }
    }

    /// A space with metric `h`; the working basis is the coordinate basis
    /// until [`Self::orthonormalize`] is called.
    pub fn new(h: RMat) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::Shape("metric must be a nonempty square matrix".into()));
        }
        let m = h.nrows();
        Ok(InnerProductSpace {
            h,
            working_basis: RMat::identity(m, m),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn metric(&self) -> &RMat {
        &self.h
    }

    pub fn working_basis(&self) -> &RMat {
        &self.working_basis
    }

    /// Replace the working basis by the symmetric choice `B = h^{-1/2}`,
    /// which satisfies `B^T h B = I` and is the identity when `h` is.
    pub fn orthonormalize(self) -> Result<Self> {
        let asym = max_abs(&(&self.h - self.h.transpose()));
        let scale = max_abs(&self.h).max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite(f64::NAN));
        }
        let sym = (&self.h + self.h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if smallest <= 1e-12 * scale {
            return Err(Error::NotPositiveDefinite(smallest));
        }
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        let q = &eig.eigenvectors;
        let b = q * RMat::from_diagonal(&inv_sqrt) * q.transpose();
        Ok(InnerProductSpace {
            h: self.h,
            working_basis: b,
        })
    }

    /// `max |B^T h B - I|`.
    pub fn basis_residual(&self) -> f64 {
        let b = &self.working_basis;
        let g = b.transpose() * &self.h * b;
        max_abs(&(g - RMat::identity(self.dim(), self.dim())))
    }

    /// Coordinates of `v` (given in the original basis) in the working basis.
    pub fn coordinates(&self, v: &RVec) -> RVec {
        self.working_basis.transpose() * &self.h * v
    }
}

/// Complex-bilinear (not hermitian) extension of the identity form.
pub fn bilinear(u: &CVec, v: &CVec) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isotropy {
    pub isotropic: bool,
    /// Largest normalized |h_C(u, v)| over pairs of basis vectors.
    pub residual: f64,
}

/// Tests whether the complex span of `basis` is null for the bilinear form.
pub fn is_isotropic_subspace(basis: &[CVec], tol: f64) -> Result<Isotropy> {
    let Some(first) = basis.first() else {
        return Err(Error::DegenerateSpan);
    };
    let m = first.len();
    if basis.iter().any(|v| v.len() != m) {
        return Err(Error::Shape("basis vectors of unequal length".into()));
    }
    let w = CMat::from_columns(basis);
    let sv = w.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if basis.len() > m || smax == 0.0 || smin <= 1e-10 * smax {
        return Err(Error::DegenerateSpan);
    }
    let mut residual = 0.0_f64;
    for (i, u) in basis.iter().enumerate() {
        for v in &basis[i..] {
            let r = bilinear(u, v).norm() / (u.norm() * v.norm());
            residual = residual.max(r);
        }
    }
    Ok(Isotropy {
        isotropic: residual <= tol,
        residual,
    })
}

/// Spectral projectors of an f-structure onto its `+i`, `0` and `-i`
/// eigenspaces: `P+ = (-F^2 - iF)/2`, `P0 = I + F^2`, `P- = conj(P+)`.
pub fn spectral_projectors(f: &RMat) -> (CMat, CMat, CMat) {
    let m = f.nrows();
    let f2 = f * f;
    let plus = CMat::from_fn(m, m, |i, j| Complex::new(-0.5 * f2[(i, j)], -0.5 * f[(i, j)]));
    let minus = plus.map(|z| z.conj());
    let zero = complexify(&(RMat::identity(m, m) + f2));
    (plus, zero, minus)
}

/// Bases of the `+i`, `0`, `-i` eigenspaces of an f-structure.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    /// Unit vectors `(e_a - i F e_a)/sqrt(2)`, columns spanning V⁺.
    pub basis_plus: CMat,
    /// Orthonormal real basis of V⁰ = ker F.
    pub basis_zero: RMat,
    /// Orthonormal real basis `e_1, F e_1, e_2, F e_2, ...` of im F.
    pub adapted: RMat,
}

impl EigenSplit {
    pub fn basis_minus(&self) -> CMat {
        self.basis_plus.map(|z| z.conj())
    }

    pub fn n(&self) -> usize {
        self.basis_plus.ncols()
    }

    /// `i P+ - i P-` built from the eigenbases.
    pub fn reassemble(&self) -> RMat {
        let w = &self.basis_plus;
        let p = w * w.adjoint();
        p.map(|z| -2.0 * z.im)
    }
}

/// Splits `V_C` into the eigenspaces of the f-structure `f` of rank `2n`.
pub fn eig_split(f: &RMat, n: usize) -> Result<EigenSplit> {
    if !f.is_square() {
        return Err(Error::Shape("F must be square".into()));
    }
    let m = f.nrows();
    let gram = f.transpose() * f;
    let (values, vectors) = sorted_symmetric_eigen(&gram);
    let rank = values.iter().filter(|&&l| l > 0.5).count();
    if rank != 2 * n {
        return Err(Error::RankMismatch {
            expected: 2 * n,
            found: rank,
        });
    }
    let horizontal = columns(&vectors.columns(0, 2 * n).into_owned());
    let mut adapted: Vec<RVec> = Vec::with_capacity(2 * n);
    while adapted.len() < 2 * n {
        let mut best: Option<RVec> = None;
        let mut best_norm = -1.0;
        for h in &horizontal {
            let mut r = h.clone();
            for b in &adapted {
                let c = b.dot(&r);
                r.axpy(-c, b, 1.0);
            }
            let nr = r.norm();
            if nr > best_norm {
                best_norm = nr;
                best = Some(r);
            }
        }
        let e = best.expect("nonempty horizontal basis") / best_norm;
        let mut fe = f * &e;
        for b in &adapted {
            let c = b.dot(&fe);
            fe.axpy(-c, b, 1.0);
        }
        let fe_norm = fe.norm();
        adapted.push(e);
        adapted.push(fe / fe_norm);
    }
    let adapted = RMat::from_columns(&adapted);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let basis_plus = CMat::from_fn(m, n, |i, a| {
        Complex::new(s * adapted[(i, 2 * a)], -s * adapted[(i, 2 * a + 1)])
    });
    let basis_zero = vectors.columns(2 * n, m - 2 * n).into_owned();
    Ok(EigenSplit {
        basis_plus,
        basis_zero,
        adapted,
    })
}

/// Central-difference step `cbrt(eps) * max(1, |x|)`.
pub fn fd_step(x: &RVec) -> f64 {
    f64::EPSILON.cbrt() * x.norm().max(1.0)
}

/// Step for the five-point stencil, `eps^(1/5) * max(1, |x|)`.
pub fn five_point_step(x: &RVec) -> f64 {
    f64::EPSILON.powf(0.2) * x.norm().max(1.0)
}

/// Values that can be finite-differenced.
pub trait Differentiable: Sized {
    fn combine(terms: &[(f64, &Self)]) -> Self;
}

impl Differentiable for RMat {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let mut out = terms[0].1 * terms[0].0;
        for (c, t) in &terms[1..] {
            out += *t * *c;
        }
        out
    }
}

impl Differentiable for RVec {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let mut out = terms[0].1 * terms[0].0;
        for (c, t) in &terms[1..] {
            out.axpy(*c, t, 1.0);
        }
        out
    }
}

fn check_stencil(domain: Option<&BoxDomain>, x: &RVec, dir: &RVec, reach: f64) -> Result<()> {
    if let Some(d) = domain {
        let fwd = x + dir * reach;
        let bwd = x - dir * reach;
        if !d.contains(&fwd) || !d.contains(&bwd) {
            return Err(Error::DomainMargin);
        }
    }
    Ok(())
}

/// Flat-space covariant derivative of a field along `dir` at `x`:
/// `(field(x + h dir) - field(x - h dir)) / 2h` with `h = fd_step(x)`.
pub fn directional_derivative<T, F>(
    field: F,
    x: &RVec,
    dir: &RVec,
    domain: Option<&BoxDomain>,
) -> Result<T>
where
    T: Differentiable,
    F: Fn(&RVec) -> Result<T>,
{
    let h = fd_step(x);
    check_stencil(domain, x, dir, h)?;
    let plus = field(&(x + dir * h))?;
    let minus = field(&(x - dir * h))?;
    let s = 0.5 / h;
    Ok(T::combine(&[(s, &plus), (-s, &minus)]))
}

/// Fourth-order directional derivative; used for first derivatives that are
/// differentiated a second time, where the central rule's rounding noise
/// would be amplified.
pub fn directional_derivative_five_point<T, F>(
    field: F,
    x: &RVec,
    dir: &RVec,
    domain: Option<&BoxDomain>,
) -> Result<T>
where
    T: Differentiable,
    F: Fn(&RVec) -> Result<T>,
{
    let h = five_point_step(x);
    check_stencil(domain, x, dir, 2.0 * h)?;
    let p2 = field(&(x + dir * (2.0 * h)))?;
    let p1 = field(&(x + dir * h))?;
    let m1 = field(&(x - dir * h))?;
    let m2 = field(&(x - dir * (2.0 * h)))?;
    let s = 1.0 / (12.0 * h);
    Ok(T::combine(&[(-s, &p2), (8.0 * s, &p1), (-8.0 * s, &m1), (s, &m2)]))
}

/// Jacobian of a vector map by the five-point stencil, one column per
/// coordinate direction.
pub fn five_point_jacobian<F>(f: F, x: &RVec, domain: Option<&BoxDomain>) -> Result<RMat>
where
    F: Fn(&RVec) -> Result<RVec>,
{
    let m = x.len();
    let cols = (0..m)
        .map(|k| directional_derivative_five_point(&f, x, &unit(m, k), domain))
        .collect::<Result<Vec<RVec>>>()?;
    Ok(RMat::from_columns(&cols))
}

/// Jacobian by central differences.
pub fn central_jacobian<F>(f: F, x: &RVec, domain: Option<&BoxDomain>) -> Result<RMat>
where
    F: Fn(&RVec) -> Result<RVec>,
{
    let m = x.len();
    let cols = (0..m)
        .map(|k| directional_derivative(&f, x, &unit(m, k), domain))
        .collect::<Result<Vec<RVec>>>()?;
    Ok(RMat::from_columns(&cols))
}

/// Multiplication by i on a real vector holding `(re, im)` pairs.
pub fn mul_i(v: &RVec) -> RVec {
    let mut out = RVec::zeros(v.len());
    for a in 0..v.len() / 2 {
        out[2 * a] = -v[2 * a + 1];
        out[2 * a + 1] = v[2 * a];
    }
    out
}

/// Matrix of multiplication by i on `R^{2n}` with interleaved `(re, im)`.
pub fn complex_structure(n: usize) -> RMat {
    let mut j = RMat::zeros(2 * n, 2 * n);
    for a in 0..n {
        j[(2 * a + 1, 2 * a)] = 1.0;
        j[(2 * a, 2 * a + 1)] = -1.0;
    }
    j
}

pub fn to_complex(v: &RVec) -> CVec {
    CVec::from_iterator(v.len() / 2, (0..v.len() / 2).map(|a| Complex::new(v[2 * a], v[2 * a + 1])))
}

pub fn from_complex(z: &CVec) -> RVec {
    RVec::from_iterator(2 * z.len(), z.iter().flat_map(|c| [c.re, c.im]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lstsq_tall_and_wide() {
        let a = RMat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = RMat::from_column_slice(3, 1, &[1.0, 2.0, 0.0]);
        // normal equations: [[2, 1], [1, 2]] x = [1, 2]
        let x = lstsq(&a, &b).unwrap();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
        let w = a.transpose();
        let y = RMat::from_column_slice(2, 1, &[1.0, 1.0]);
        let x = lstsq(&w, &y).unwrap();
        assert_abs_diff_eq!((&w * &x - &y).norm(), 0.0, epsilon = 1e-14);
        // minimum norm: x lies in the row space of w
        let k = RVec::from_column_slice(&[1.0, 1.0, -1.0]);
        assert_abs_diff_eq!(k.dot(&x.column(0)), 0.0, epsilon = 1e-14);
        assert!(lstsq(&RMat::zeros(3, 2), &b).is_none());
    }

    fn j2() -> RMat {
        RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    fn blockdiag_j_zero() -> RMat {
        let mut f = RMat::zeros(4, 4);
        f[(1, 0)] = 1.0;
        f[(0, 1)] = -1.0;
        f
    }

    fn cvec(v: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex::new(a, b)))
    }

    #[test]
    fn orthonormalize_identity() {
        let s = InnerProductSpace::new(RMat::identity(3, 3)).unwrap().orthonormalize().unwrap();
        assert_abs_diff_eq!(s.working_basis().clone(), RMat::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn orthonormalize_diagonal() {
        let h = RMat::from_diagonal(&RVec::from_column_slice(&[4.0, 1.0]));
        let s = InnerProductSpace::new(h).unwrap().orthonormalize().unwrap();
        let expected = RMat::from_diagonal(&RVec::from_column_slice(&[0.5, 1.0]));
        assert_abs_diff_eq!(s.working_basis().clone(), expected, epsilon = 1e-15);
    }

    #[test]
    fn orthonormalize_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = RMat::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let h = &a * a.transpose() + RMat::identity(5, 5) * 0.5;
        let s = InnerProductSpace::new(h).unwrap().orthonormalize().unwrap();
        assert!(s.basis_residual() <= 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_indefinite() {
        let h = RMat::from_diagonal(&RVec::from_column_slice(&[1.0, -1.0]));
        let err = InnerProductSpace::new(h).unwrap().orthonormalize().unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite(_)));
        assert!(err.to_string().contains("metric not positive definite"));
    }

    #[test]
    fn isotropy_of_null_vector() {
        let v = cvec(&[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.0, 0.0)]);
        let iso = is_isotropic_subspace(&[v], 1e-12).unwrap();
        assert!(iso.isotropic);
        assert_eq!(iso.residual, 0.0);
    }

    #[test]
    fn isotropy_of_real_vector() {
        let v = cvec(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let iso = is_isotropic_subspace(&[v], 1e-12).unwrap();
        assert!(!iso.isotropic);
        assert_abs_diff_eq!(iso.residual, 1.0);
    }

    #[test]
    fn isotropy_rejects_dependent_basis() {
        let v = cvec(&[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]);
        let w = v.map(|z| z * Complex::new(2.0, 0.0));
        assert_eq!(is_isotropic_subspace(&[v, w], 1e-10), Err(Error::DegenerateSpan));
    }

    #[test]
    fn eig_split_complex_structure_on_plane() {
        let s = eig_split(&j2(), 1).unwrap();
        assert_eq!(s.basis_zero.ncols(), 0);
        let w = s.basis_plus.column(0).into_owned();
        // proportional to e1 - i e2
        let ratio = w[1] / w[0];
        assert_abs_diff_eq!(ratio.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ratio.im, -1.0, epsilon = 1e-14);
        let fw = complexify(&j2()) * &w;
        assert!((fw - w.map(|z| z * Complex::i())).norm() <= 1e-14);
    }

    #[test]
    fn eig_split_partial_structure() {
        let f = blockdiag_j_zero();
        let s = eig_split(&f, 1).unwrap();
        let w = s.basis_plus.column(0).into_owned();
        assert_abs_diff_eq!((w[1] / w[0]).im, -1.0, epsilon = 1e-14);
        assert!(w[2].norm() + w[3].norm() <= 1e-14);
        // kernel spans e3, e4
        let k = &s.basis_zero;
        assert_eq!(k.ncols(), 2);
        let proj = k * k.transpose();
        assert_abs_diff_eq!(proj[(2, 2)] + proj[(3, 3)], 2.0, epsilon = 1e-14);
        assert!(max_abs(&(&f * k)) <= 1e-14);
    }

    #[test]
    fn eig_split_cross_product_matrix() {
        // [u]_x for u = e3
        let f = RMat::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = eig_split(&f, 1).unwrap();
        assert_abs_diff_eq!(s.basis_zero[(2, 0)].abs(), 1.0, epsilon = 1e-14);
        let w = s.basis_plus.column(0).into_owned();
        assert_abs_diff_eq!((w[1] / w[0]).im, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_split_rank_error() {
        let err = eig_split(&blockdiag_j_zero(), 2).unwrap_err();
        assert_eq!(err, Error::RankMismatch { expected: 4, found: 2 });
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let x = RVec::from_column_slice(&[0.3, -1.0]);
        let d: RMat = directional_derivative(
            |_| Ok(RMat::identity(2, 2)),
            &x,
            &RVec::from_column_slice(&[1.0, 2.0]),
            None,
        )
        .unwrap();
        assert_eq!(max_abs(&d), 0.0);
    }

    #[test]
    fn derivative_of_product_entry() {
        let x = RVec::from_column_slice(&[1.0, 1.0]);
        let d: RMat = directional_derivative(|p| Ok(p * p.transpose()), &x, &unit(2, 0), None).unwrap();
        assert_abs_diff_eq!(d[(0, 1)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn derivative_reports_margin() {
        let dom = BoxDomain::cube(2, 1.0);
        let x = RVec::from_column_slice(&[1.0, 0.0]);
        let r: Result<RVec> = directional_derivative(|p| Ok(p.clone()), &x, &unit(2, 0), Some(&dom));
        assert_eq!(r.unwrap_err(), Error::DomainMargin);
    }

    #[test]
    fn box_grid_order() {
        let b = BoxDomain::from_slices(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        let g = b.grid(3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], RVec::from_column_slice(&[0.0, 1.0]));
        assert_eq!(g[8], RVec::from_column_slice(&[1.0, 2.0]));
    }

    #[test]
    fn complex_packing() {
        let v = RVec::from_column_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(from_complex(&to_complex(&v)), v);
        assert_eq!(mul_i(&v), complex_structure(2) * &v);
    }
}
