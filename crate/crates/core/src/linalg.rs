//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on [`ComplexMatrix`] (a heap-allocated
//! `nalgebra::DMatrix<Complex64>`). Dimensions are expected to stay small
//! (N ≤ 64), so no attempt is made at blocking or sparsity.
//!
//! The exponential treats Hermitian and anti-Hermitian generators through an
//! eigendecomposition so that positivity and unitarity survive to rounding
//! level. Anything else goes through scaling and squaring.

use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Relative tolerance used when a matrix claims to be Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Default Gram-defect tolerance for [`Frame`].
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;
/// Below this smallest singular value a set of columns is rank deficient.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli matrices with σz = diag(1, −1) and σy = [[0, −i], [i, 0]].
pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn ensure_finite(m: &ComplexMatrix, op: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

fn ensure_square(m: &ComplexMatrix, op: &'static str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension {
            op,
            detail: format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()),
        })
    }
}

pub(crate) fn ensure_same_shape(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    op: &'static str,
) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::Dimension {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        })
    }
}

/// √Σ|m_ij|². Rejects NaN and infinities.
pub fn frobenius_norm(m: &ComplexMatrix) -> Result<f64> {
    ensure_finite(m, "frobenius_norm")?;
    Ok(frob(m))
}

/// Unchecked Frobenius norm for internal residuals.
pub(crate) fn frob(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖m − m†‖_F
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    frob(&(m - m.adjoint()))
}

/// ‖m + m†‖_F
pub fn anti_hermitian_defect(m: &ComplexMatrix) -> f64 {
    frob(&(m + m.adjoint()))
}

/// A square matrix equal to its own adjoint.
///
/// Construction checks ‖M − M†‖_F ≤ 1e−12·max(1, ‖M‖_F) and then stores the
/// exactly symmetrized matrix (M + M†)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        ensure_square(&m, "HermitianMatrix::new")?;
        ensure_finite(&m, "HermitianMatrix::new")?;
        let defect = hermitian_defect(&m);
        let tolerance = HERMITIAN_TOLERANCE * frob(&m).max(1.0);
        if defect > tolerance {
            return Err(Error::NotHermitian { defect, tolerance });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking. For matrices that are Hermitian by
    /// construction, such as f·f† or −i[H, P].
    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(d[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }
}

impl Deref for HermitianMatrix {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// An N×ℓ matrix whose columns are orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    columns: ComplexMatrix,
}

impl Frame {
    /// Accepts `columns` if its Gram defect is within
    /// [`ORTHONORMALITY_TOLERANCE`].
    pub fn new(columns: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(columns, ORTHONORMALITY_TOLERANCE)
    }

    pub fn with_tolerance(columns: ComplexMatrix, tolerance: f64) -> Result<Self> {
        ensure_finite(&columns, "Frame::new")?;
        let (n, l) = columns.shape();
        if l == 0 || l > n {
            return Err(Error::Dimension {
                op: "Frame::new",
                detail: format!("rank must satisfy 1 ≤ ℓ ≤ N, got N = {n}, ℓ = {l}"),
            });
        }
        let defect = gram_defect(&columns);
        if defect > tolerance {
            return Err(Error::NotOrthonormal { defect, tolerance });
        }
        Ok(Self { columns })
    }

    pub(crate) fn from_unchecked(columns: ComplexMatrix) -> Self {
        Self { columns }
    }

    /// Frame made of standard basis vectors e_i for the given indices.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut m = ComplexMatrix::zeros(dim, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            if i >= dim {
                return Err(Error::Dimension {
                    op: "Frame::basis",
                    detail: format!("basis index {i} out of range for dimension {dim}"),
                });
            }
            m[(i, j)] = c(1.0, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &ComplexMatrix {
        &self.columns
    }

    pub fn gram_defect(&self) -> f64 {
        gram_defect(&self.columns)
    }

    /// Right-multiplies by an ℓ×ℓ matrix, i.e. rotates the basis within the
    /// subspace. The result is re-validated.
    pub fn rotated(&self, v: &ComplexMatrix) -> Result<Self> {
        if v.shape() != (self.rank(), self.rank()) {
            return Err(Error::Dimension {
                op: "Frame::rotated",
                detail: format!(
                    "rotation must be {0}x{0}, got {1:?}",
                    self.rank(),
                    v.shape()
                ),
            });
        }
        Self::new(&self.columns * v)
    }
}

fn gram_defect(columns: &ComplexMatrix) -> f64 {
    let l = columns.ncols();
    frob(&(columns.adjoint() * columns - ComplexMatrix::identity(l, l)))
}

/// A matrix V together with the projectors it is meant to connect:
/// V†V = source, VV† = target.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialIsometry {
    pub matrix: ComplexMatrix,
    pub source_projector: HermitianMatrix,
    pub target_projector: HermitianMatrix,
}

impl PartialIsometry {
    /// (‖V†V − source‖_F, ‖VV† − target‖_F)
    pub fn defect(&self) -> (f64, f64) {
        isometry_defect(&self.matrix, &self.source_projector, &self.target_projector)
            .expect("PartialIsometry holds conformable matrices")
    }
}

/// Returns (‖v†v − source‖_F, ‖vv† − target‖_F).
pub fn isometry_defect(
    v: &ComplexMatrix,
    source: &HermitianMatrix,
    target: &HermitianMatrix,
) -> Result<(f64, f64)> {
    ensure_square(v, "isometry_defect")?;
    ensure_same_shape(v, source, "isometry_defect")?;
    ensure_same_shape(v, target, "isometry_defect")?;
    let vh = v.adjoint();
    Ok((
        frob(&(&vh * v - source.as_matrix())),
        frob(&(v * &vh - target.as_matrix())),
    ))
}

/// Symmetric (Löwdin) orthonormalization: the closest matrix with
/// orthonormal columns, U·V† from the SVD of `columns`.
///
/// No column is privileged, so orthonormalizing f·V equals orthonormalizing
/// f and then applying V for any unitary V.
pub fn reorthonormalize(columns: &ComplexMatrix) -> Result<Frame> {
    ensure_finite(columns, "reorthonormalize")?;
    let (n, l) = columns.shape();
    if l == 0 || l > n {
        return Err(Error::Dimension {
            op: "reorthonormalize",
            detail: format!("rank must satisfy 1 ≤ ℓ ≤ N, got N = {n}, ℓ = {l}"),
        });
    }
    let svd = columns.clone().svd(true, true);
    let smallest = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if smallest < DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate {
            smallest,
            threshold: DEGENERACY_THRESHOLD,
        });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V†");
    Ok(Frame::from_unchecked(u * v_t))
}

impl Frame {
    pub fn reorthonormalized(&self) -> Result<Frame> {
        reorthonormalize(&self.columns)
    }
}

/// Partial-isometry factor of the polar decomposition of a rank-`rank`
/// matrix: keeps the `rank` leading singular directions and sets their
/// singular values to one.
pub fn polar_isometry(m: &ComplexMatrix, rank: usize) -> Result<ComplexMatrix> {
    ensure_finite(m, "polar_isometry")?;
    let svd = m.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if rank > order.len() {
        return Err(Error::Dimension {
            op: "polar_isometry",
            detail: format!("rank {rank} exceeds matrix size {}", order.len()),
        });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V†");
    let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
    for &k in &order[..rank] {
        let sv = svd.singular_values[k];
        if sv < DEGENERACY_THRESHOLD {
            return Err(Error::Degenerate {
                smallest: sv,
                threshold: DEGENERACY_THRESHOLD,
            });
        }
        out += u.column(k) * v_t.row(k);
    }
    Ok(out)
}

enum Structure {
    Hermitian,
    AntiHermitian,
    General,
}

// Purely relative: generators like F·Δt can be far below unit norm, and an
// absolute floor would let an anti-Hermitian matrix pass as Hermitian.
fn classify(m: &ComplexMatrix) -> Structure {
    let tol = HERMITIAN_TOLERANCE * frob(m);
    if hermitian_defect(m) <= tol {
        Structure::Hermitian
    } else if anti_hermitian_defect(m) <= tol {
        Structure::AntiHermitian
    } else {
        Structure::General
    }
}

/// e^generator.
///
/// Hermitian generators give Hermitian positive-definite results and
/// anti-Hermitian generators give unitary results, both to rounding.
pub fn matrix_exponential(generator: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(generator, "matrix_exponential")?;
    ensure_finite(generator, "matrix_exponential")?;
    let out = match classify(generator) {
        Structure::Hermitian => {
            let h = HermitianMatrix::symmetrized(generator.clone());
            hermitian_function(&h, |x| c(x.exp(), 0.0))
        }
        Structure::AntiHermitian => {
            // A = −iK with K = iA Hermitian, so e^A = V e^{−iΛ} V†.
            let k = HermitianMatrix::symmetrized(generator * I);
            hermitian_function(&k, |x| c(0.0, -x).exp())
        }
        Structure::General => taylor_scaling_squaring(generator),
    };
    ensure_finite(&out, "matrix_exponential")?;
    Ok(out)
}

/// V f(Λ) V† for Hermitian h = VΛV†.
fn hermitian_function(h: &HermitianMatrix, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let eig = SymmetricEigen::new(h.as_matrix().clone());
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let fl = f(lambda);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= fl;
        }
    }
    scaled * eig.eigenvectors.adjoint()
}

fn taylor_scaling_squaring(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    let norm = frob(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));
    let mut sum = ComplexMatrix::identity(n, n);
    let mut term = ComplexMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / c(k as f64, 0.0);
        sum += &term;
        if frob(&term) <= f64::EPSILON * frob(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// The eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h.as_matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Complex Gaussian matrix with independent standard-normal real and
/// imaginary parts, drawn from `rng` in row-major order.
pub fn random_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, j)] = c(re, im);
        }
    }
    m
}

/// (G + G†)/2 for a complex Gaussian G.
pub fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    HermitianMatrix::symmetrized(random_gaussian(dim, dim, rng))
}

/// Haar-distributed unitary from the QR decomposition of a seeded complex
/// Gaussian matrix, with the phases of R's diagonal moved into Q.
///
/// The generator is ChaCha8 seeded through `seed_from_u64`, so a given
/// `(dim, seed)` yields the same matrix on every run of the same build.
pub fn seeded_random_unitary(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::Dimension {
            op: "seeded_random_unitary",
            detail: "dimension must be ≥ 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_gaussian(dim, dim, &mut rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    Ok(q)
}
