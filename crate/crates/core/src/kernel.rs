//! Kernel detection: singular values, kernel vectors, Riesz projectors and the restricted
//! pencil near a double point of the vacuum spectrum.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fourier::{Dirac, SectionCoeffs};
use crate::linalg;
use crate::scalar::{abs, Real, C};

/// Numerical tolerances shared across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Largest singular value still counted as kernel.
    pub ker_tol: T,
    /// Convergence of the projector quadrature between node doublings.
    pub proj_tol: T,
    /// Minimal distance to the vacuum spectrum for the vacuum resolvent.
    pub tol_vac: T,
    /// Largest acceptable condition number on a contour.
    pub cond_max: T,
    /// `|f|` below this on a contour makes a winding count unreliable.
    pub winding_floor: T,
    /// Initial number of contour nodes.
    pub nodes: usize,
    /// Required accuracy of the constant term of an end fit.
    pub fit_tol: T,
    /// Two discriminant zeros closer than `zero_sep_rel * eps` count as one double zero.
    pub zero_sep_rel: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            ker_tol: T::lit(1e-7),
            proj_tol: T::lit(1e-9),
            tol_vac: T::lit(1e-9),
            cond_max: T::lit(1e12),
            winding_floor: T::lit(1e-12),
            nodes: 32,
            fit_tol: T::lit(1e-8),
            zero_sep_rel: T::lit(1e-4),
        }
    }
}

/// Singularity indicator of `D_{a,b}` on the truncated basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralIndicator<T> {
    pub a: C<T>,
    pub b: C<T>,
    pub sigma_min: T,
    /// `log|det|`; the most negative finite value when the matrix is exactly singular.
    pub log_abs_det: T,
}

pub fn indicator<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>) -> Result<SpectralIndicator<T>> {
    let sigma_min = linalg::sigma_min(d, a, b)?;
    let det = linalg::det_info(d, a, b);
    let log_abs_det = if det.singular {
        -T::max_value().unwrap_or_else(T::one)
    } else {
        det.log_abs
    };
    Ok(SpectralIndicator {
        a,
        b,
        sigma_min,
        log_abs_det,
    })
}

/// Unit kernel vector of `D_{a,b}`.
#[derive(Debug, Clone)]
pub struct KernelVector<T: Real> {
    pub sigma: T,
    /// Number of singular values at most `ker_tol`.
    pub kernel_dim: usize,
    /// Coefficients in basis order, unit Euclidean norm, largest entry real positive.
    pub vector: Vec<C<T>>,
    pub section: SectionCoeffs<T>,
}

fn normalise_phase<T: Real>(v: &mut [C<T>]) {
    let k = linalg::dominant_index(v);
    let r = abs(v[k]);
    if r > T::zero() {
        let ph = v[k].conj() / r;
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}

/// Right singular vector of the smallest singular value, provided it is at most `ker_tol`.
pub fn kernel_vector<T: Real>(
    d: &Dirac<T>,
    a: C<T>,
    b: C<T>,
    ker_tol: T,
) -> Result<KernelVector<T>> {
    let mut basis = kernel_basis(d, a, b, ker_tol)?;
    if basis.is_empty() {
        let s = linalg::sigma_min(d, a, b)?;
        return Err(Error::NoKernel {
            sigma_min: s.as_f64(),
        });
    }
    Ok(basis.swap_remove(0))
}

/// All singular vectors with singular value at most `ker_tol`, ordered by singular value
/// and then by dominant basis index.
pub fn kernel_basis<T: Real>(
    d: &Dirac<T>,
    a: C<T>,
    b: C<T>,
    ker_tol: T,
) -> Result<Vec<KernelVector<T>>> {
    let pairs = linalg::smallest_singular(d, a, b, 4)?;
    let kernel_dim = pairs.iter().filter(|p| p.sigma <= ker_tol).count();
    Ok(pairs
        .into_iter()
        .take(kernel_dim)
        .map(|p| {
            let mut vector = p.vector;
            normalise_phase(&mut vector);
            let section = d.from_vector(&vector);
            KernelVector {
                sigma: p.sigma,
                kernel_dim,
                vector,
                section,
            }
        })
        .collect())
}

/// Number of singular values of `D_{a,b}` at most `ker_tol`.
pub fn kernel_dim<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>, ker_tol: T) -> Result<usize> {
    Ok(linalg::smallest_singular(d, a, b, 4)?
        .iter()
        .filter(|p| p.sigma <= ker_tol)
        .count())
}

/// Riesz projector `P = (1/2πi) ∮_{|λ|=eps} (D_{a+λ,b+λ})⁻¹ dλ`.
#[derive(Debug, Clone)]
pub struct Projector<T: Real> {
    pub matrix: DMatrix<C<T>>,
    pub trace: C<T>,
    pub rank: usize,
    /// `‖P² - P‖_F`.
    pub idempotency: T,
    pub nodes: usize,
    /// Worst 1-norm condition number met on the contour.
    pub condition: T,
}

/// Parameter roots `λ` of `det D_{a+λ,b+λ}`; since `D_{a+λ,b+λ} = D_{a,b} + λ` these are the
/// negated eigenvalues of `D_{a,b}`.
pub fn transversal_roots<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>) -> Result<Vec<C<T>>> {
    Ok(linalg::eigenvalues(d, a, b)?
        .into_iter()
        .map(|m| -m)
        .collect())
}

pub fn riesz_projector<T: Real>(
    d: &Dirac<T>,
    center: (C<T>, C<T>),
    eps: T,
    tol: &Tolerances<T>,
) -> Result<Projector<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput(
            "contour radius must be positive".into(),
        ));
    }
    let (a, b) = center;
    let margin = eps / T::lit(10.0);
    let roots = transversal_roots(d, a, b)?;
    if let Some(r) = roots.iter().find(|r| (abs(**r) - eps).abs() < margin) {
        return Err(Error::IllConditionedContour(format!(
            "spectrum at distance {:e} from the contour",
            (abs(*r) - eps).abs().as_f64()
        )));
    }
    let expected = roots.iter().filter(|r| abs(**r) < eps).count();

    let n = d.dim();
    let quad = |nodes: usize| -> Result<(DMatrix<C<T>>, T)> {
        let mut p = DMatrix::from_element(n, n, C::new(T::zero(), T::zero()));
        let mut cond = T::one();
        for k in 0..nodes {
            let th =
                T::two_pi() * (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(nodes);
            let lam = C::new(th.cos(), th.sin()) * eps;
            let (inv, c) = linalg::shifted_inverse(d, a + lam, b + lam)?;
            cond = cond.max(c);
            p += inv * lam;
        }
        Ok((p / C::new(T::from_usize_lossy(nodes), T::zero()), cond))
    };
    let mut nodes = tol.nodes.max(8);
    let (mut p, mut cond) = quad(nodes)?;
    loop {
        if cond > tol.cond_max {
            return Err(Error::IllConditionedContour(format!(
                "condition number {:e}",
                cond.as_f64()
            )));
        }
        let (p2, c2) = quad(2 * nodes)?;
        let change = linalg::frobenius(&(&p2 - &p));
        p = p2;
        cond = cond.max(c2);
        nodes *= 2;
        if change < tol.proj_tol {
            break;
        }
        if nodes >= 1 << 13 {
            return Err(Error::UnreliableContour(
                "projector quadrature did not converge".into(),
            ));
        }
    }
    if cond > tol.cond_max {
        return Err(Error::IllConditionedContour(format!(
            "condition number {:e}",
            cond.as_f64()
        )));
    }
    let trace = p.trace();
    let idempotency = blockwise_idempotency(d, &p);
    let rank = trace.re.round().max(T::zero()).as_f64() as usize;
    if rank != expected {
        return Err(Error::UnexpectedRank {
            expected,
            found: rank,
        });
    }
    Ok(Projector {
        matrix: p,
        trace,
        rank,
        idempotency,
        nodes,
        condition: cond,
    })
}

fn blockwise_idempotency<T: Real>(d: &Dirac<T>, p: &DMatrix<C<T>>) -> T {
    let mut s = T::zero();
    for idx in d.blocks() {
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| p[(idx[i], idx[j])]);
        let e = linalg::frobenius(&(&m * &m - &m));
        s += e * e;
    }
    s.sqrt()
}

/// Orthonormal basis of the range of a projector of known rank.
pub fn range_basis<T: Real>(p: &DMatrix<C<T>>, rank: usize) -> DMatrix<C<T>> {
    let qr = p.clone().col_piv_qr();
    qr.q().columns(0, rank).into_owned()
}

/// Coefficients `(p₁, p₂)` of `det(λ + D|_{im P̃_x}) = λ² + p₁λ + p₂` for the restriction of
/// `D_{a₀+x, b₀-x}` to the range of its Riesz projector of radius `eps/2 + eps/10` around
/// the double point `(a₀, b₀)` moved by `x`.
pub fn restricted_pencil<T: Real>(
    d: &Dirac<T>,
    double_point: (C<T>, C<T>),
    x: C<T>,
    eps: T,
    tol: &Tolerances<T>,
) -> Result<(C<T>, C<T>)> {
    let (a0, b0) = double_point;
    let (a, b) = (a0 + x, b0 - x);
    let radius = eps / T::lit(2.0) + eps / T::lit(10.0);
    let proj = riesz_projector(d, (a, b), radius, tol)?;
    if proj.rank != 2 {
        return Err(Error::UnexpectedRank {
            expected: 2,
            found: proj.rank,
        });
    }
    let q = range_basis(&proj.matrix, 2);
    let m = d.matrix(a, b);
    let restricted = q.adjoint() * m * &q;
    let p1 = restricted[(0, 0)] + restricted[(1, 1)];
    let p2 = restricted[(0, 0)] * restricted[(1, 1)] - restricted[(0, 1)] * restricted[(1, 0)];
    Ok((p1, p2))
}

/// Number of zeros of an analytic `f` inside a circle, by the argument principle.
pub fn count_zeros_winding<T: Real>(
    f: &(dyn Fn(C<T>) -> Result<C<T>> + Sync),
    center: C<T>,
    radius: T,
    tol: &Tolerances<T>,
) -> Result<usize> {
    linalg::winding_count(f, center, radius, tol.nodes, tol.winding_floor)
}

/// Zeros of `λ ↦ det D_{a+λ,b+λ}` inside `|λ| < radius`, counted through the phase of the
/// block determinants.
pub fn det_winding<T: Real>(
    d: &Dirac<T>,
    a: C<T>,
    b: C<T>,
    radius: T,
    tol: &Tolerances<T>,
) -> Result<usize> {
    let f = |lam: C<T>| -> Result<C<T>> {
        let det = linalg::det_info(d, a + lam, b + lam);
        Ok(if det.singular {
            C::new(T::zero(), T::zero())
        } else {
            det.phase
        })
    };
    linalg::winding_count(
        &f,
        C::new(T::zero(), T::zero()),
        radius,
        tol.nodes,
        T::zero(),
    )
}
