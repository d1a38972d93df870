//! The orthogonal Grassmannian of isotropic quotients, realized as the
//! manifold of skew matrices `F` with `F^3 + F = 0` and rank `2n`.
//!
//! Tangent vectors at `F` are the matrices `[F, A] = FA - AF` with `A`
//! skew. The complex structure `J_F` acts through the `(1,0)` part
//! `T⁺ = {A : A V⁺ = 0, A V⁰ ⊂ V⁺, A V⁻ ⊂ V⁰ + V⁺}`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Invariant, Result};
use crate::linalg::{
    complexify, eig_split, max_abs, numerical_rank, sorted_symmetric_eigen, spectral_projectors, CMat, EigenSplit,
    RMat,
};

/// Tolerance used by [`validate`].
pub const POINT_TOL: f64 = 1e-10;

/// A point of the orthogonal Grassmannian.
#[derive(Debug, Clone, PartialEq)]
pub struct OGPoint {
    f: RMat,
    n: usize,
}

/// The three residuals checked by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResiduals {
    pub skew: f64,
    pub cubic: f64,
    /// Number of singular values above `1e-8`.
    pub rank: usize,
    /// Smallest of the leading `2n` singular values.
    pub sv_low: f64,
    /// Largest of the trailing `m - 2n` singular values.
    pub sv_tail: f64,
}

impl PointResiduals {
    pub fn max_residual(&self) -> f64 {
        self.skew.max(self.cubic)
    }
}

pub fn point_residuals(f: &RMat, n: usize) -> PointResiduals {
    let f3 = f * f * f;
    let mut sv: Vec<f64> = f.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let two_n = (2 * n).min(sv.len());
    PointResiduals {
        skew: max_abs(&(f + f.transpose())),
        cubic: max_abs(&(f3 + f)),
        rank: sv.iter().filter(|&&s| s > 1e-8).count(),
        sv_low: sv[..two_n].iter().cloned().fold(f64::INFINITY, f64::min),
        sv_tail: sv[two_n..].iter().cloned().fold(0.0, f64::max),
    }
}

/// Validates `f` as a point of `F_n` with the default tolerance.
pub fn validate(f: RMat, n: usize) -> Result<OGPoint> {
    validate_with(f, n, POINT_TOL)
}

pub fn validate_with(f: RMat, n: usize, tol: f64) -> Result<OGPoint> {
    if !f.is_square() {
        return Err(Error::Shape(format!("F is {}x{}", f.nrows(), f.ncols())));
    }
    let m = f.nrows();
    if n == 0 || 2 * n > m {
        return Err(Error::RankOutOfRange { m, n });
    }
    let r = point_residuals(&f, n);
    if !(r.skew <= tol) {
        return Err(Error::InvalidPoint {
            invariant: Invariant::Skew,
            residual: r.skew,
        });
    }
    if !(r.cubic <= tol) {
        return Err(Error::InvalidPoint {
            invariant: Invariant::Cubic,
            residual: r.cubic,
        });
    }
    if r.rank != 2 * n || r.sv_tail > tol {
        let residual = if r.rank < 2 * n { r.sv_low } else { r.sv_tail };
        return Err(Error::InvalidPoint {
            invariant: Invariant::Rank,
            residual,
        });
    }
    Ok(OGPoint { f, n })
}

impl OGPoint {
    pub fn f(&self) -> &RMat {
        &self.f
    }

    pub fn into_matrix(self) -> RMat {
        self.f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    pub fn split(&self) -> EigenSplit {
        eig_split(&self.f, self.n).expect("validated point has rank 2n")
    }

    /// Orthogonal projector onto im F, `-F^2`.
    pub fn horizontal_projector(&self) -> RMat {
        -(&self.f * &self.f)
    }

    /// Orthogonal projector onto ker F, `I + F^2`.
    pub fn vertical_projector(&self) -> RMat {
        RMat::identity(self.m(), self.m()) + &self.f * &self.f
    }

    /// `Q F Q^T`.
    pub fn conjugate(&self, q: &RMat) -> Result<OGPoint> {
        validate(q * &self.f * q.transpose(), self.n)
    }

    /// Frobenius distance; points are equal when this is at most `1e-8`.
    pub fn distance(&self, other: &OGPoint) -> f64 {
        (&self.f - &other.f).norm()
    }

    /// Row-major entries, the serialized form.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.f.transpose().iter().cloned().collect()
    }
}

/// `blockdiag(J, ..., J, 0)` with `n` copies of `J = [[0,-1],[1,0]]`.
pub fn canonical_point(m: usize, n: usize) -> Result<OGPoint> {
    if n == 0 || 2 * n > m {
        return Err(Error::RankOutOfRange { m, n });
    }
    let mut f = RMat::zeros(m, m);
    for a in 0..n {
        f[(2 * a + 1, 2 * a)] = 1.0;
        f[(2 * a, 2 * a + 1)] = -1.0;
    }
    Ok(OGPoint { f, n })
}

/// The point `J ∘ P` for an orthogonal projection `P` of rank `2n` and a
/// complex structure `J` on `im P`. Values of `J` off `im P` are ignored.
pub fn from_quotient(p: &RMat, j: &RMat) -> Result<OGPoint> {
    if !p.is_square() || p.shape() != j.shape() {
        return Err(Error::Shape("P and J must be square of equal size".into()));
    }
    let m = p.nrows();
    let proj_res = max_abs(&(p * p - p)).max(max_abs(&(p - p.transpose())));
    if proj_res > 1e-10 {
        return Err(Error::NotProjection(proj_res));
    }
    let rank = p.trace().round() as usize;
    if !rank.is_multiple_of(2) || rank == 0 {
        return Err(Error::RankOutOfRange { m, n: rank / 2 });
    }
    let jp = j * p;
    // J must preserve im P, square to -1 there, and be skew there.
    let invariance = max_abs(&(p * &jp - &jp));
    let square = max_abs(&(&jp * &jp + p));
    let skew = max_abs(&(p * (j + j.transpose()) * p));
    let defect = invariance.max(square).max(skew);
    if defect > 1e-10 {
        return Err(Error::NonOrthogonalComplexStructure(defect));
    }
    validate(jp, rank / 2)
}

/// Skew matrix with independent standard normal entries above the diagonal.
pub fn random_skew<R: Rng + ?Sized>(m: usize, rng: &mut R) -> RMat {
    let mut a = RMat::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    a
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &RMat) -> RMat {
    let m = a.nrows();
    let norm1 = (0..m)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = RMat::identity(m, m);
    let mut term = RMat::identity(m, m);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if max_abs(&term) < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Seeded sample `Q F0 Q^T` with `Q = exp(A)`, `A` a random skew matrix.
pub fn random_point(m: usize, n: usize, seed: u64) -> Result<OGPoint> {
    let f0 = canonical_point(m, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = expm(&random_skew(m, &mut rng));
    validate(&q * f0.f() * q.transpose(), n)
}

/// `ad(F)(A) = FA - AF`.
pub fn ad(f: &RMat, a: &RMat) -> RMat {
    f * a - a * f
}

fn ad_c(f: &CMat, a: &CMat) -> CMat {
    f * a - a * f
}

/// A tangent vector `B ∈ im ad(F)` at a point.
#[derive(Debug, Clone)]
pub struct OGTangent {
    base: OGPoint,
    b: RMat,
}

impl OGTangent {
    /// Checks skewness and membership in the image of `ad(F)`.
    pub fn new(base: OGPoint, b: RMat) -> Result<Self> {
        if b.shape() != base.f.shape() {
            return Err(Error::Shape("tangent and base differ in size".into()));
        }
        let scale = b.norm().max(1.0);
        let skew = max_abs(&(&b + b.transpose()));
        if skew > 1e-10 * scale {
            return Err(Error::NotTangent(skew));
        }
        let (_, residual) = ad_least_squares(base.f(), &b);
        if residual > 1e-8 * scale {
            return Err(Error::NotTangent(residual));
        }
        Ok(OGTangent { base, b })
    }

    pub fn base(&self) -> &OGPoint {
        &self.base
    }

    pub fn matrix(&self) -> &RMat {
        &self.b
    }

    /// `ad(F) B`, again a tangent vector.
    pub fn ad(&self) -> OGTangent {
        OGTangent {
            base: self.base.clone(),
            b: ad(self.base.f(), &self.b),
        }
    }
}

/// `B = FA - AF` for skew `A`.
pub fn tangent_from(a: &RMat, base: &OGPoint) -> Result<OGTangent> {
    if a.shape() != base.f.shape() {
        return Err(Error::Shape("A and F differ in size".into()));
    }
    let skew = max_abs(&(a + a.transpose()));
    if skew > 1e-12 * a.norm().max(1.0) {
        return Err(Error::Shape("A must be skew".into()));
    }
    Ok(OGTangent {
        base: base.clone(),
        b: ad(base.f(), a),
    })
}

pub fn random_tangent<R: Rng + ?Sized>(base: &OGPoint, rng: &mut R) -> OGTangent {
    let a = random_skew(base.m(), rng);
    OGTangent {
        base: base.clone(),
        b: ad(base.f(), &a),
    }
}

/// Basis `E_ij - E_ji`, `i < j`, of the skew matrices.
pub fn skew_basis(m: usize) -> Vec<RMat> {
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            let mut e = RMat::zeros(m, m);
            e[(i, j)] = 1.0;
            e[(j, i)] = -1.0;
            out.push(e);
        }
    }
    out
}

/// Matrix of `ad(F)` from skew coordinates to the `m^2` entries.
fn ad_matrix(f: &RMat) -> RMat {
    let m = f.nrows();
    let cols: Vec<_> = skew_basis(m)
        .iter()
        .map(|e| {
            let b = ad(f, e);
            nalgebra::DVector::from_iterator(m * m, b.iter().cloned())
        })
        .collect();
    if cols.is_empty() {
        return RMat::zeros(m * m, 0);
    }
    RMat::from_columns(&cols)
}

/// Minimum-norm skew `A` minimizing `|FA - AF - B|`, and that residual.
pub fn ad_least_squares(f: &RMat, b: &RMat) -> (RMat, f64) {
    let m = f.nrows();
    let basis = skew_basis(m);
    if basis.is_empty() {
        return (RMat::zeros(m, m), b.norm());
    }
    let mat = ad_matrix(f);
    let rhs = nalgebra::DVector::from_iterator(m * m, b.iter().cloned());
    let (vals, vecs) = sorted_symmetric_eigen(&(mat.transpose() * &mat));
    let atb = mat.transpose() * rhs;
    let cutoff = 1e-9 * vals.first().copied().unwrap_or(0.0);
    let mut coeffs = nalgebra::DVector::zeros(basis.len());
    for (k, lambda) in vals.iter().enumerate() {
        if *lambda > cutoff {
            let v = vecs.column(k);
            coeffs += v * (v.dot(&atb) / lambda);
        }
    }
    let mut a = RMat::zeros(m, m);
    for (c, e) in coeffs.iter().zip(basis.iter()) {
        a += e * *c;
    }
    let residual = (ad(f, &a) - b).norm();
    (a, residual)
}

/// Real dimension of `im ad(F)`, measured numerically.
pub fn tangent_dimension(point: &OGPoint) -> usize {
    numerical_rank(&ad_matrix(point.f()), 1e-8)
}

/// `2n(m - 2n) + n(n - 1)`.
pub fn expected_dimension(m: usize, n: usize) -> usize {
    2 * n * (m - 2 * n) + n * (n - 1)
}

/// Residuals of the degree-four identities for `ad(F)` on a tangent vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticResidual {
    /// `|(ad^2 + I)(ad^2 + 4I) B| / |B|`, which vanishes on tangents.
    pub consistent: f64,
    /// `|(ad^4 + 5 ad^2 + I) B| / |B|`; equals 3 on every tangent.
    pub printed: f64,
}

pub fn ad_quartic_residual(base: &OGPoint, b: &RMat) -> QuarticResidual {
    let norm = b.norm();
    if norm <= f64::MIN_POSITIVE {
        return QuarticResidual {
            consistent: 0.0,
            printed: 0.0,
        };
    }
    let f = base.f();
    let ad2 = ad(f, &ad(f, b));
    let ad4 = ad(f, &ad(f, &ad2));
    QuarticResidual {
        consistent: (&ad4 + &ad2 * 5.0 + b * 4.0).norm() / norm,
        printed: (&ad4 + &ad2 * 5.0 + b).norm() / norm,
    }
}

/// `|(ad(F)^2 + I) B|`; zero on tangents when `n = 1`.
pub fn ad_square_residual(base: &OGPoint, b: &RMat) -> f64 {
    let f = base.f();
    (ad(f, &ad(f, b)) + b).norm()
}

/// Component of a complex matrix in `T⁺`: the blocks mapping `V⁰ → V⁺`,
/// `V⁻ → V⁺` and `V⁻ → V⁰`, i.e. the `+i` and `+2i` eigenspaces of ad(F).
pub fn project_t_plus(f: &RMat, b: &CMat) -> CMat {
    let (pp, p0, pm) = spectral_projectors(f);
    &pp * b * &p0 + &pp * b * &pm + &p0 * b * &pm
}

/// Largest violation of the three membership conditions defining `T⁺`.
pub fn t_plus_membership_residual(f: &RMat, a: &CMat) -> f64 {
    let (pp, p0, pm) = spectral_projectors(f);
    let m = f.nrows();
    let eye = CMat::identity(m, m);
    let kills_plus = (a * &pp).norm();
    let zero_to_plus = ((&eye - &pp) * a * &p0).norm();
    let minus_to_zero_plus = (&pm * a * &pm).norm();
    kills_plus.max(zero_to_plus).max(minus_to_zero_plus)
}

/// `J_F B`: the real tangent whose `T⁺` part is `i` times that of `B`.
pub fn j_grass(f: &RMat, b: &RMat) -> RMat {
    project_t_plus(f, &complexify(b)).map(|z| -2.0 * z.im)
}

/// Complex-linear `ad(F)` on complex matrices; exposed for eigen checks.
pub fn ad_complex(f: &RMat, b: &CMat) -> CMat {
    ad_c(&complexify(f), b)
}

/// `dΦ(B)`: the restriction of `B` to `ker F`, valued in `im F`.
#[derive(Debug, Clone)]
pub struct DPhiMap {
    /// Orthonormal basis of `ker F` (columns).
    pub kernel: RMat,
    /// Images of the kernel basis vectors.
    pub images: RMat,
}

impl DPhiMap {
    pub fn apply(&self, v: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.images * (self.kernel.transpose() * v)
    }

    /// The map precomposed with the projection onto `ker F`, as an `m×m`
    /// matrix.
    pub fn as_matrix(&self) -> RMat {
        &self.images * self.kernel.transpose()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.ncols() == 0
    }
}

pub fn d_phi(base: &OGPoint, b: &RMat) -> Result<DPhiMap> {
    d_phi_with_tol(base, b, 1e-10)
}

/// [`d_phi`] with a relative tolerance on the vertical leak of the images.
pub fn d_phi_with_tol(base: &OGPoint, b: &RMat, tol: f64) -> Result<DPhiMap> {
    let kernel = base.split().basis_zero;
    let images = b * &kernel;
    let leak = max_abs(&(base.vertical_projector() * &images));
    if leak > tol * b.norm().max(1.0) {
        return Err(Error::NotTangent(leak));
    }
    Ok(DPhiMap { kernel, images })
}

/// `|dΦ(J_F B) - F dΦ(B)| / max(1, |B|)`.
pub fn check_dphi_complex_linear(base: &OGPoint, b: &RMat) -> f64 {
    let kernel = base.split().basis_zero;
    if kernel.ncols() == 0 {
        return 0.0;
    }
    let jb = j_grass(base.f(), b);
    let lhs = jb * &kernel;
    let rhs = base.f() * b * &kernel;
    (lhs - rhs).norm() / b.norm().max(1.0)
}

/// `|[A, F] - B|` for the least-squares `A`; the projected form of the
/// identity `[dΩ(X), F] = ∇_X F` evaluated on `B = ∇_X F`.
pub fn bracket_representation_residual(f: &RMat, b: &RMat) -> f64 {
    // [A, F] = -ad(F) A, so solve ad(F)(-A) = B.
    let (neg_a, _) = ad_least_squares(f, b);
    let a = -neg_a;
    ((&a * f - f * &a) - b).norm()
}
