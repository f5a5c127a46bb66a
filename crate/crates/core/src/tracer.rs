//! Following the spectral curve: transversal root finding, graph tracing over a coordinate
//! plane, classification of vacuum double points and the tube audit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{Dirac, Species};
use crate::kernel::{self, Tolerances};
use crate::lattice::{Coord, DualLattice, TorusLattice};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

use crate::scalar::{abs, arg, arg_positive, Real, C};

fn zero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

fn order_by_modulus<T: Real>(roots: &mut [C<T>]) {
    roots.sort_by(|x, y| {
        abs(*x)
            .partial_cmp(&abs(*y))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                arg_positive(*x)
                    .partial_cmp(&arg_positive(*y))
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
}

/// Roots `λ` with `|λ| < eps` of `det D_{a+λ,b+λ}`, repeated by multiplicity and ordered by
/// modulus then argument. The count comes from the winding of the determinant; eigenvalue
/// estimates are polished by Newton on the determinant.
pub fn solve_transversal<T: Real>(
    d: &Dirac<T>,
    base: Coord<T>,
    eps: T,
    tol: &Tolerances<T>,
) -> Result<Vec<C<T>>> {
    let (a, b) = base;
    let expected = kernel::det_winding(d, a, b, eps, tol)?;
    let seeds: Vec<C<T>> = kernel::transversal_roots(d, a, b)?
        .into_iter()
        .filter(|r| abs(*r) < eps * T::lit(1.05))
        .collect();
    // Group coincident estimates so multiple roots are polished with the right multiplicity.
    let cluster = eps * T::lit(1e-6);
    let mut groups: Vec<(C<T>, usize)> = Vec::new();
    for s in seeds {
        match groups.iter_mut().find(|(g, _)| abs(*g - s) < cluster) {
            Some(g) => g.1 += 1,
            None => groups.push((s, 1)),
        }
    }
    let mut roots = Vec::new();
    for (seed, mult) in groups {
        let r = newton_det(d, a, b, seed, mult)?;
        if abs(r) < eps {
            roots.extend(std::iter::repeat(r).take(mult));
        }
    }
    if roots.len() != expected {
        return Err(Error::RootBracketing {
            expected,
            found: roots.len(),
        });
    }
    order_by_modulus(&mut roots);
    Ok(roots)
}

/// Newton on `λ ↦ det D_{a+λ,b+λ}` using `det'/det = trace (D + λ)⁻¹`.
fn newton_det<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>, seed: C<T>, mult: usize) -> Result<C<T>> {
    let m = C::new(T::from_usize_lossy(mult), T::zero());
    let mut lam = seed;
    for _ in 0..50 {
        let tr = match linalg::trace_inverse_masked(d, a + lam, b + lam, |_| true) {
            Ok(t) => t,
            Err(_) => return Ok(lam),
        };
        if abs(tr) == T::zero() {
            break;
        }
        let step = m / tr;
        lam -= step;
        if abs(step) < T::lit(1e-13) * (T::one() + abs(lam)) {
            break;
        }
    }
    Ok(lam)
}

/// Which coordinate plane a traced piece is a graph over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// `a` as a function of `b`, near the line `a = 0`.
    B,
    /// `b` as a function of `a`, near the line `b = 0`.
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchTag {
    GraphOverB,
    GraphOverA,
    NearDoublePoint,
}

impl BranchTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchTag::GraphOverB => "graph_over_b",
            BranchTag::GraphOverA => "graph_over_a",
            BranchTag::NearDoublePoint => "near_double_point",
        }
    }
}

/// A point of the spectral curve with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample<T> {
    pub a: C<T>,
    pub b: C<T>,
    pub sigma_min: T,
    pub kernel_dim: usize,
    pub tag: BranchTag,
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub re: (T, T),
    pub im: (T, T),
}

impl<T: Real> Rect<T> {
    fn distance_to(&self, z: C<T>) -> T {
        let dx = (self.re.0 - z.re).max(z.re - self.re.1).max(T::zero());
        let dy = (self.im.0 - z.im).max(z.im - self.im.1).max(T::zero());
        (dx * dx + dy * dy).sqrt()
    }
}

/// Vertical solve: with the plane coordinate fixed at `p`, finds the unique root of
/// `det D` in the other coordinate inside the disc of radius `eps` about zero.
pub fn vertical_solve<T: Real>(
    d: &Dirac<T>,
    plane: Plane,
    p: C<T>,
    seed: C<T>,
    eps: T,
    tol: &Tolerances<T>,
) -> Result<C<T>> {
    let coord = |u: C<T>| match plane {
        Plane::B => (u, p),
        Plane::A => (p, u),
    };
    let species = match plane {
        Plane::B => Species::W,
        Plane::A => Species::V,
    };
    let det_phase = |u: C<T>| -> Result<C<T>> {
        let (a, b) = coord(u);
        let det = linalg::det_info(d, a, b);
        Ok(if det.singular { zero() } else { det.phase })
    };
    let count = linalg::winding_count(&det_phase, zero(), eps, tol.nodes, T::zero())?;
    if count != 1 {
        return Err(Error::BranchAmbiguity {
            re: p.re.as_f64(),
            im: p.im.as_f64(),
            roots: count,
        });
    }
    let basis = d.basis();
    let mut u = seed;
    for _ in 0..60 {
        let (a, b) = coord(u);
        let tr = match linalg::trace_inverse_masked(d, a, b, |k| basis[k].species == species) {
            Ok(t) => t,
            Err(_) => return Ok(u),
        };
        let step = C::new(T::one(), T::zero()) / tr;
        u -= step;
        if !(abs(u) < eps) {
            return Err(Error::UnreliableContour(
                "Newton left the vertical disc".into(),
            ));
        }
        if abs(step) < T::lit(1e-14) * (T::one() + abs(u)) {
            return Ok(u);
        }
    }
    Ok(u)
}

fn sample_at<T: Real>(
    d: &Dirac<T>,
    plane: Plane,
    p: C<T>,
    u: C<T>,
    tol: &Tolerances<T>,
) -> Result<SpectrumSample<T>> {
    let ((a, b), tag) = match plane {
        Plane::B => ((u, p), BranchTag::GraphOverB),
        Plane::A => ((p, u), BranchTag::GraphOverA),
    };
    let singular = linalg::smallest_singular(d, a, b, 3)?;
    let kernel_dim = singular.iter().filter(|s| s.sigma <= tol.ker_tol).count();
    let tag = if kernel_dim > 1 {
        BranchTag::NearDoublePoint
    } else {
        tag
    };
    Ok(SpectrumSample {
        a,
        b,
        sigma_min: singular[0].sigma,
        kernel_dim,
        tag,
    })
}

/// Follows the graph through the given plane points in order, seeding each vertical solve
/// with the previous root and halving the step when Newton fails.
pub fn trace_path<T: Real>(
    d: &Dirac<T>,
    plane: Plane,
    points: &[C<T>],
    eps: T,
    tol: &Tolerances<T>,
) -> Result<Vec<SpectrumSample<T>>> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev: Option<(C<T>, C<T>)> = None;
    for &p in points {
        let u = match prev {
            None => vertical_solve(d, plane, p, zero(), eps, tol)?,
            Some((p0, u0)) => continue_to(d, plane, p0, u0, p, eps, tol, 0)?,
        };
        out.push(sample_at(d, plane, p, u, tol)?);
        prev = Some((p, u));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn continue_to<T: Real>(
    d: &Dirac<T>,
    plane: Plane,
    p0: C<T>,
    u0: C<T>,
    p1: C<T>,
    eps: T,
    tol: &Tolerances<T>,
    depth: usize,
) -> Result<C<T>> {
    match vertical_solve(d, plane, p1, u0, eps, tol) {
        Ok(u) => Ok(u),
        Err(Error::UnreliableContour(_)) if depth < 8 => {
            let mid = (p0 + p1) * T::lit(0.5);
            let um = continue_to(d, plane, p0, u0, mid, eps, tol, depth + 1)?;
            continue_to(d, plane, mid, um, p1, eps, tol, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// Traces the graph of the spectrum over a rectangle of the chosen plane on a grid of the
/// given step, visited row by row in serpentine order.
///
/// The rectangle must stay further than `eps` from every truncated vacuum line of the other
/// species, so that each vertical disc holds exactly one root.
pub fn trace_graph<T: Real>(
    d: &Dirac<T>,
    plane: Plane,
    region: Rect<T>,
    step: T,
    eps: T,
    tol: &Tolerances<T>,
) -> Result<Vec<SpectrumSample<T>>> {
    if !(step > T::zero()) || region.re.1 < region.re.0 || region.im.1 < region.im.0 {
        return Err(Error::InvalidInput(
            "empty region or nonpositive step".into(),
        ));
    }
    let dual = d.dual();
    if eps >= abs(dual.basis()[0]) {
        return Err(Error::InvalidInput(
            "eps must be smaller than the shortest dual vector".into(),
        ));
    }
    for c in crate::lattice::enumerate_dual(dual, d.radius()) {
        let line = match plane {
            Plane::B => c,
            Plane::A => c.conj(),
        };
        if region.distance_to(line) <= eps {
            return Err(Error::InvalidInput(format!(
                "region comes within eps of the vacuum line through ({}, {})",
                line.re.as_f64(),
                line.im.as_f64()
            )));
        }
    }
    let count = |lo: T, hi: T| ((hi - lo) / step + T::lit(1e-9)).floor().as_f64() as usize + 1;
    let (nx, ny) = (
        count(region.re.0, region.re.1),
        count(region.im.0, region.im.1),
    );
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = region.im.0 + step * T::from_usize_lossy(j);
        for i in 0..nx {
            let i = if j % 2 == 0 { i } else { nx - 1 - i };
            points.push(C::new(region.re.0 + step * T::from_usize_lossy(i), y));
        }
    }
    trace_path(d, plane, &points, eps, tol)
}

/// Outcome of classifying a double point of the vacuum spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The double point opens into a handle: two simple discriminant zeros.
    Handle,
    /// The double point survives as a transversal crossing: one double zero.
    Node,
    /// The zeros could not be told apart reliably.
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Handle => "handle",
            Verdict::Node => "node",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

/// Classification of the vacuum double point `(c̄'', c')` where `v_{c'}` and `w_{c''}` cross.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublePointReport<T> {
    pub c_pair: (C<T>, C<T>),
    pub location: Coord<T>,
    pub verdict: Verdict,
    /// Zeros of the discriminant in the `x`-coordinate of the family `(a₀ + x, b₀ - x)`.
    pub zeros: Vec<C<T>>,
    /// Crossing point when the verdict is a node.
    pub node: Option<Coord<T>>,
    pub kernel_dim: Option<usize>,
    /// Largest distance of `Im log h_k` from `πℤ` at the node.
    pub multiplier_defect: Option<T>,
    pub multiplier_real: Option<bool>,
    /// Radius of the `x`-circle used.
    pub radius: T,
    /// Smallest weight of a tracked eigenvector on its vacuum mode along the circle.
    pub min_weight: T,
    pub note: String,
}

/// Settings of the double point classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions<T> {
    /// Radii of the `x`-circles tried, as multiples of `eps/2`, smallest first.
    pub radius_factors: Vec<T>,
    /// Minimal weight of each tracked eigenvector on its own vacuum mode.
    pub min_weight: T,
    /// Largest node count before the contour is declared unresolved.
    pub max_nodes: usize,
    /// Largest distance of `Im log h` from `πℤ` for a real multiplier.
    pub real_tol: T,
}

impl<T: Real> Default for ClassifyOptions<T> {
    fn default() -> Self {
        Self {
            radius_factors: [
                0.125, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.1, 2.25, 2.5, 3.0, 4.0,
            ]
            .iter()
            .map(|&f| T::lit(f))
            .collect(),
            min_weight: T::lit(0.25),
            max_nodes: 1024,
            real_tol: T::lit(1e-8),
        }
    }
}

/// The two eigenvalues of `D_{a₀+x, b₀-x}` continuing the vacuum values on `v_{c'}` and
/// `w_{c''}`. They are picked by weight on those modes at a starting point and then
/// followed by shift-invert subspace iteration inside the blocks holding the two modes.
struct TrackedPair<'a, T: Real> {
    d: &'a Dirac<T>,
    base: Coord<T>,
    groups: Vec<Group>,
}

/// One block of the operator and the modes tracked inside it.
struct Group {
    block: usize,
    /// Local positions of the tracked modes; `true` marks the `v_{c'}` mode.
    modes: Vec<(usize, bool)>,
}

#[derive(Clone)]
struct GroupState<T: Real> {
    basis: DMatrix<C<T>>,
    mu: Vec<C<T>>,
}

#[derive(Clone)]
struct PairState<T: Real> {
    groups: Vec<GroupState<T>>,
}

struct PairValue<T> {
    lam_v: C<T>,
    lam_w: C<T>,
    /// Smallest weight of a tracked eigenvector on its own mode.
    weight: T,
}

fn weight_of<T: Real>(v: &DVector<C<T>>, k: usize) -> T {
    let n = v.iter().fold(T::zero(), |s, z| s + crate::scalar::abs2(*z));
    crate::scalar::abs2(v[k]) / n
}

/// Eigenvalues and eigenvectors of a 1x1 or 2x2 matrix.
fn small_eigen<T: Real>(h: &DMatrix<C<T>>) -> (Vec<C<T>>, Vec<DVector<C<T>>>) {
    if h.nrows() == 1 {
        return (
            vec![h[(0, 0)]],
            vec![DVector::from_element(1, C::new(T::one(), T::zero()))],
        );
    }
    let half = T::lit(0.5);
    let tr = h[(0, 0)] + h[(1, 1)];
    let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
    let s = crate::scalar::csqrt(tr * tr * T::lit(0.25) - det);
    let mus = [tr * half + s, tr * half - s];
    let vecs = mus
        .iter()
        .map(|&mu| {
            let (p, q) = ((h[(0, 1)], mu - h[(0, 0)]), (mu - h[(1, 1)], h[(1, 0)]));
            let pick = if abs(p.0) + abs(p.1) >= abs(q.0) + abs(q.1) {
                p
            } else {
                q
            };
            DVector::from_vec(vec![pick.0, pick.1])
        })
        .collect();
    (mus.to_vec(), vecs)
}

impl<'a, T: Real> TrackedPair<'a, T> {
    fn new(d: &'a Dirac<T>, c_pair: (C<T>, C<T>)) -> Result<Self> {
        let dual = d.dual();
        let (c2, c1) = c_pair;
        let not_dual = |c: C<T>| Error::NotInDualLattice {
            re: c.re.as_f64(),
            im: c.im.as_f64(),
        };
        let i1 = dual.index_of(c1).ok_or_else(|| not_dual(c1))?;
        let i2 = dual.index_of(c2).ok_or_else(|| not_dual(c2))?;
        let outside =
            || Error::InvalidInput("double point modes lie outside the truncation".into());
        let pos_v = d.position(Species::V, i1).ok_or_else(outside)?;
        let pos_w = d.position(Species::W, i2).ok_or_else(outside)?;
        let mut groups: Vec<Group> = Vec::new();
        for (pos, is_v) in [(pos_v, true), (pos_w, false)] {
            let block = d.block_of(pos);
            let local = d.blocks()[block]
                .binary_search(&pos)
                .expect("position in its block");
            match groups.iter_mut().find(|g| g.block == block) {
                Some(g) => g.modes.push((local, is_v)),
                None => groups.push(Group {
                    block,
                    modes: vec![(local, is_v)],
                }),
            }
        }
        Ok(Self {
            d,
            base: (c2.conj(), c1),
            groups,
        })
    }

    fn coord(&self, x: C<T>) -> Coord<T> {
        (self.base.0 + x, self.base.1 - x)
    }

    /// Full eigen-decomposition and selection by weight. Fails unless the chosen
    /// eigenvalues are the ones nearest their mean and other eigenvectors barely touch
    /// the tracked modes.
    fn start(&self, x: C<T>, opts: &ClassifyOptions<T>) -> Result<(PairValue<T>, PairState<T>)> {
        let (a, b) = self.coord(x);
        let mut states = Vec::new();
        let mut found: Vec<(C<T>, T, bool)> = Vec::new();
        for g in &self.groups {
            let (vals, vecs) = linalg::eigen(self.d.block_matrix(g.block, a, b))?;
            let w: Vec<Vec<T>> = vecs
                .iter()
                .map(|v| g.modes.iter().map(|&(k, _)| weight_of(v, k)).collect())
                .collect();
            let chosen: Vec<usize> = if g.modes.len() == 1 {
                vec![(0..vals.len())
                    .max_by(|&i, &j| {
                        w[i][0]
                            .partial_cmp(&w[j][0])
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("nonempty")]
            } else {
                if vals.len() < 2 {
                    return Err(Error::ClassificationWindow(
                        "block too small for two tracked values".into(),
                    ));
                }
                // Past a branch point the two eigenvectors mix both modes, so select by
                // weight on their span; the labelling only fixes the sign of λ_v - λ_w.
                let mut order: Vec<usize> = (0..vals.len()).collect();
                order.sort_by(|&i, &j| {
                    (w[j][0] + w[j][1])
                        .partial_cmp(&(w[i][0] + w[i][1]))
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                let (i, j) = (order[0], order[1]);
                if w[i][0] - w[i][1] >= w[j][0] - w[j][1] {
                    vec![i, j]
                } else {
                    vec![j, i]
                }
            };
            let sigma = chosen
                .iter()
                .fold(C::new(T::zero(), T::zero()), |s, &i| s + vals[i])
                / T::from_usize_lossy(chosen.len());
            let spread = chosen
                .iter()
                .fold(T::zero(), |m, &i| m.max(abs(vals[i] - sigma)));
            for (i, mu) in vals.iter().enumerate() {
                if chosen.contains(&i) {
                    continue;
                }
                let total = |k: usize| w[k].iter().fold(T::zero(), |a, b| a + *b);
                let touches = chosen.iter().any(|&k| total(i) > T::lit(0.5) * total(k));
                if touches || abs(*mu - sigma) <= spread * T::lit(1.05) {
                    return Err(Error::ClassificationWindow(
                        "tracked pair not isolated in its block".into(),
                    ));
                }
            }
            for (slot, &i) in chosen.iter().enumerate() {
                let (_, is_v) = g.modes[slot];
                found.push((-vals[i], w[i][slot], is_v));
            }
            let m = vecs[0].len();
            let mut basis = DMatrix::from_element(m, chosen.len(), C::new(T::zero(), T::zero()));
            for (col, &i) in chosen.iter().enumerate() {
                basis.set_column(col, &vecs[i]);
            }
            states.push(GroupState {
                basis: basis.qr().q(),
                mu: chosen.iter().map(|&i| vals[i]).collect(),
            });
        }
        let value = Self::assemble_value(&found, opts)?;
        Ok((value, PairState { groups: states }))
    }

    fn assemble_value(
        found: &[(C<T>, T, bool)],
        opts: &ClassifyOptions<T>,
    ) -> Result<PairValue<T>> {
        let lam_v = found.iter().find(|f| f.2).expect("v mode tracked").0;
        let lam_w = found.iter().find(|f| !f.2).expect("w mode tracked").0;
        let weight = found.iter().fold(T::one(), |m, f| m.min(f.1));
        if weight < opts.min_weight {
            return Err(Error::ClassificationWindow(format!(
                "tracked weight {:.3} below threshold",
                weight.as_f64()
            )));
        }
        Ok(PairValue {
            lam_v,
            lam_w,
            weight,
        })
    }

    /// Follows the tracked eigenvalues from `state` to `x`.
    fn step(
        &self,
        x: C<T>,
        state: &PairState<T>,
        opts: &ClassifyOptions<T>,
    ) -> Result<(PairValue<T>, PairState<T>)> {
        let (a, b) = self.coord(x);
        let mut states = Vec::new();
        let mut found = Vec::new();
        for (g, st) in self.groups.iter().zip(&state.groups) {
            let m = self.d.block_matrix(g.block, a, b);
            let k = st.mu.len();
            let scale = linalg::one_norm(&m) + T::one();
            // Offset so the shift never sits exactly on an eigenvalue.
            let sigma = st
                .mu
                .iter()
                .fold(C::new(T::zero(), T::zero()), |s, z| s + *z)
                / T::from_usize_lossy(k)
                + C::new(T::lit(0.8), T::lit(0.6)) * (T::lit(1e-7) * scale);
            let mut shifted = m.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] -= sigma;
            }
            let lu = shifted.lu();
            let mut v = st.basis.clone();
            let mut converged = false;
            let mut h = DMatrix::from_element(k, k, C::new(T::zero(), T::zero()));
            for _ in 0..200 {
                let y = lu
                    .solve(&v)
                    .ok_or_else(|| Error::ClassificationWindow("shift hit an eigenvalue".into()))?;
                v = y.qr().q();
                let av = &m * &v;
                h = v.adjoint() * &av;
                let res = linalg::frobenius(&(av - &v * &h));
                if res < T::lit(1e-12) * scale {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::ClassificationWindow(
                    "tracked subspace did not converge".into(),
                ));
            }
            let (mus, ys) = small_eigen(&h);
            let ritz: Vec<DVector<C<T>>> = ys.iter().map(|y| &v * y).collect();
            let order: Vec<usize> = if k == 1 {
                vec![0]
            } else {
                let s01 = weight_of(&ritz[0], g.modes[0].0) + weight_of(&ritz[1], g.modes[1].0);
                let s10 = weight_of(&ritz[1], g.modes[0].0) + weight_of(&ritz[0], g.modes[1].0);
                if s01 >= s10 {
                    vec![0, 1]
                } else {
                    vec![1, 0]
                }
            };
            for (slot, &i) in order.iter().enumerate() {
                let (local, is_v) = g.modes[slot];
                found.push((-mus[i], weight_of(&ritz[i], local), is_v));
            }
            states.push(GroupState {
                basis: v,
                mu: order.iter().map(|&i| mus[i]).collect(),
            });
        }
        let value = Self::assemble_value(&found, opts)?;
        Ok((value, PairState { groups: states }))
    }
}

/// Evaluates the tracked pair at a sequence of nearby points, warm starting each from the
/// previous one.
struct Follower<'p, 'a, T: Real> {
    pair: &'p TrackedPair<'a, T>,
    opts: &'p ClassifyOptions<T>,
    state: std::cell::RefCell<Option<PairState<T>>>,
}

impl<'p, 'a, T: Real> Follower<'p, 'a, T> {
    fn new(
        pair: &'p TrackedPair<'a, T>,
        opts: &'p ClassifyOptions<T>,
        state: Option<PairState<T>>,
    ) -> Self {
        Self {
            pair,
            opts,
            state: std::cell::RefCell::new(state),
        }
    }

    fn eval(&self, x: C<T>) -> Result<PairValue<T>> {
        let prev = self.state.borrow().clone();
        let (v, s) = match prev.map(|st| self.pair.step(x, &st, self.opts)) {
            Some(Ok(r)) => r,
            _ => self.pair.start(x, self.opts)?,
        };
        *self.state.borrow_mut() = Some(s);
        Ok(v)
    }
}

struct CircleData<T: Real> {
    winding: usize,
    power_sums: (C<T>, C<T>),
    min_weight: T,
    /// State at the first node, to warm start later evaluations.
    state: PairState<T>,
}

/// Samples the discriminant on `|x| = r` and returns the winding number with the first two
/// power sums of the enclosed zeros. Nodes double until the phase is resolved and the
/// power sums settle.
fn scan_circle<T: Real>(
    pair: &TrackedPair<T>,
    r: T,
    opts: &ClassifyOptions<T>,
) -> Result<CircleData<T>> {
    let mut n = 32usize;
    let mut previous: Option<(C<T>, C<T>)> = None;
    loop {
        let (first, start_state) = pair.start(C::new(r, T::zero()), opts)?;
        let follower = Follower::new(pair, opts, Some(start_state.clone()));
        let mut vals = Vec::with_capacity(n);
        let mut min_weight = first.weight;
        for k in 0..n {
            let p = if k == 0 {
                first.lam_v - first.lam_w
            } else {
                let th = T::two_pi() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
                let v = follower.eval(C::new(th.cos(), th.sin()) * r)?;
                min_weight = min_weight.min(v.weight);
                v.lam_v - v.lam_w
            };
            vals.push(p * p);
        }
        // Closing the loop must land on the starting pair (possibly swapped).
        let last = follower.eval(C::new(r, T::zero()))?;
        let close = last.lam_v - last.lam_w;
        let scale = vals.iter().fold(T::zero(), |m, v| m.max(abs(*v)));
        if abs(close * close - vals[0]) > T::lit(1e-8) * scale {
            return Err(Error::ClassificationWindow(format!(
                "tracking does not close on |x| = {}",
                r.as_f64()
            )));
        }
        if vals.iter().any(|v| abs(*v) <= scale * T::lit(1e-10)) {
            return Err(Error::ClassificationWindow(format!(
                "discriminant vanishes on |x| = {}",
                r.as_f64()
            )));
        }
        let mut phase = Vec::with_capacity(n);
        let mut acc = T::zero();
        let mut resolved = true;
        for k in 0..n {
            phase.push(acc);
            let ratio = vals[(k + 1) % n] / vals[k];
            let step = arg(ratio);
            let jump = abs(ratio);
            if step.abs() > T::frac_pi_2() || jump > T::lit(4.0) || jump < T::lit(0.25) {
                resolved = false;
                break;
            }
            acc += step;
        }
        if resolved {
            let w = acc / T::two_pi();
            if (w - w.round()).abs() > T::lit(0.1) || w.round() < T::zero() {
                return Err(Error::ClassificationWindow(format!(
                    "non-integral winding {}",
                    w.as_f64()
                )));
            }
            let winding = w.round().as_f64() as usize;
            // log(q/x^w) is single valued on the circle; the coefficient of e^{-ikθ} in its
            // Fourier series is -p_k r^{-k} / k with p_k the k-th power sum of the zeros.
            let wt = T::from_usize_lossy(winding);
            let mut a1 = zero::<T>();
            let mut a2 = zero::<T>();
            for k in 0..n {
                let th = T::two_pi() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
                let l = C::new(abs(vals[k]).ln(), phase[k] - wt * th);
                a1 += l * C::new(th.cos(), th.sin());
                a2 += l * C::new((th + th).cos(), (th + th).sin());
            }
            let nn = T::from_usize_lossy(n);
            let p1 = -(a1 / nn) * r;
            let p2 = -(a2 / nn) * (r * r * T::lit(2.0));
            if winding == 0 {
                return Ok(CircleData {
                    winding,
                    power_sums: (p1, p2),
                    min_weight,
                    state: start_state,
                });
            }
            if let Some((q1, q2)) = previous {
                if abs(p1 - q1) < T::lit(1e-10) * r && abs(p2 - q2) < T::lit(1e-10) * r * r {
                    return Ok(CircleData {
                        winding,
                        power_sums: (p1, p2),
                        min_weight,
                        state: start_state,
                    });
                }
            }
            previous = Some((p1, p2));
        }
        if n >= opts.max_nodes {
            return Err(Error::ClassificationWindow(format!(
                "discriminant not resolved on |x| = {}",
                r.as_f64()
            )));
        }
        n *= 2;
    }
}

/// Secant iteration on an analytic function from `x0`, kept inside `|x| < bound`.
fn secant<T: Real>(f: &dyn Fn(C<T>) -> Result<C<T>>, x0: C<T>, h: T, bound: T) -> Result<C<T>> {
    let mut xa = x0;
    let mut xb = x0 + C::new(h, T::zero());
    let mut fa = f(xa)?;
    let mut fb = f(xb)?;
    for _ in 0..60 {
        let den = fb - fa;
        if abs(den) == T::zero() || abs(fb) == T::zero() {
            break;
        }
        let xn = xb - fb * (xb - xa) / den;
        if !(abs(xn) < bound) {
            break;
        }
        xa = xb;
        fa = fb;
        xb = xn;
        fb = f(xb)?;
        if abs(xb - xa) < T::lit(1e-14) * (T::one() + abs(xb)) {
            break;
        }
    }
    Ok(xb)
}

/// Largest distance of `Im(aγ_k + bγ̄_k)` from `πℤ`; zero exactly when both multipliers are real.
pub fn multiplier_defect<T: Real>(lat: &TorusLattice<T>, a: C<T>, b: C<T>) -> T {
    lat.generators()
        .iter()
        .map(|&g| {
            let t = (a * g + b * g.conj()).im / T::pi();
            (t - t.round()).abs() * T::pi()
        })
        .fold(T::zero(), |m, x| m.max(x))
}

/// Classifies the double point where `v_{c'}` meets `w_{c''}` (`c_pair = (c'', c')`).
///
/// Along `x ↦ (a₀ + x, b₀ - x)` the two eigenvalues of `D` continuing the vacuum crossing
/// are followed by their weight on the two modes. Their squared difference is analytic in
/// `x`; two simple zeros mean a handle, one double zero a node. Circles of increasing radius
/// are tried until one encloses exactly two zeros with a clean tracked pair.
pub fn classify_double_point<T: Real>(
    d: &Dirac<T>,
    lat: &TorusLattice<T>,
    c_pair: (C<T>, C<T>),
    eps: T,
    tol: &Tolerances<T>,
    opts: &ClassifyOptions<T>,
) -> Result<DoublePointReport<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let pair = TrackedPair::new(d, c_pair)?;
    let zero_sep = tol.zero_sep_rel * eps;
    let mut last_err = None;
    for &f in &opts.radius_factors {
        let r = f * eps / T::lit(2.0);
        let data = match scan_circle(&pair, r, opts) {
            Ok(x) => x,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if data.winding != 2 {
            last_err = Some(Error::ClassificationWindow(format!(
                "{} zeros inside |x| = {}",
                data.winding,
                r.as_f64()
            )));
            continue;
        }
        let (p1, p2) = data.power_sums;
        let half = T::lit(0.5);
        let root = crate::scalar::csqrt(p2 * half - p1 * p1 * T::lit(0.25));
        let est = [p1 * half + root, p1 * half - root];
        let mut report = DoublePointReport {
            c_pair,
            location: pair.base,
            verdict: Verdict::Indeterminate,
            zeros: vec![],
            node: None,
            kernel_dim: None,
            multiplier_defect: None,
            multiplier_real: None,
            radius: r,
            min_weight: data.min_weight,
            note: String::new(),
        };
        let follower = Follower::new(&pair, opts, Some(data.state.clone()));
        if abs(est[0] - est[1]) > zero_sep {
            let disc = |x: C<T>| {
                let p = follower.eval(x)?;
                let dl = p.lam_v - p.lam_w;
                Ok(dl * dl)
            };
            let z: Vec<C<T>> = est
                .iter()
                .map(|&z0| secant(&disc, z0, r * T::lit(1e-4), r))
                .collect::<Result<_>>()?;
            if abs(z[0] - z[1]) > zero_sep && z.iter().all(|z| abs(*z) < r) {
                let mut z = z;
                order_by_modulus(&mut z);
                report.verdict = Verdict::Handle;
                report.zeros = z;
                return Ok(report);
            }
            report.note = "polished zeros merged".into();
        }
        // One double zero: the labelled difference has a simple zero there.
        let diff = |x: C<T>| follower.eval(x).map(|p| p.lam_v - p.lam_w);
        let x0 = secant(&diff, (est[0] + est[1]) * half, r * T::lit(1e-4), r)?;
        let pv = follower.eval(x0)?;
        let lam = (pv.lam_v + pv.lam_w) * half;
        let node = (pair.base.0 + x0 + lam, pair.base.1 - x0 + lam);
        let kdim = kernel::kernel_dim(d, node.0, node.1, tol.ker_tol)?;
        let defect = multiplier_defect(lat, node.0, node.1);
        report.zeros = vec![x0, x0];
        report.node = Some(node);
        report.kernel_dim = Some(kdim);
        report.multiplier_defect = Some(defect);
        report.multiplier_real = Some(defect <= opts.real_tol);
        if abs(x0) < r && kdim == 2 && defect <= opts.real_tol {
            report.verdict = Verdict::Node;
        } else if report.note.is_empty() {
            report.note = format!(
                "node not confirmed: kernel dimension {kdim}, multiplier defect {:e}",
                defect.as_f64()
            );
        }
        return Ok(report);
    }
    Err(last_err.unwrap_or_else(|| Error::ClassificationWindow("no radius configured".into())))
}

/// Summary of all double points `(c̄'', c')` with `|c'|, |c''| ≤ window`.
#[derive(Debug, Clone)]
pub struct GenusReport<T> {
    pub window_radius: T,
    pub eps: T,
    pub reports: Vec<(C<T>, C<T>, Result<DoublePointReport<T>>)>,
    pub handles: usize,
    pub nodes: usize,
    pub indeterminate: usize,
    pub failures: usize,
    pub note: String,
}

pub fn genus_window_report<T: Real + Send + Sync>(
    d: &Dirac<T>,
    lat: &TorusLattice<T>,
    window_radius: T,
    eps: T,
    tol: &Tolerances<T>,
    opts: &ClassifyOptions<T>,
) -> GenusReport<T>
where
    C<T>: Send + Sync,
{
    let pts = crate::lattice::enumerate_dual(d.dual(), window_radius);
    let pairs: Vec<(C<T>, C<T>)> = pts
        .iter()
        .flat_map(|&c2| pts.iter().map(move |&c1| (c2, c1)))
        .collect();
    let reports: Vec<_> = pairs
        .par_iter()
        .map(|&(c2, c1)| {
            (
                c2,
                c1,
                classify_double_point(d, lat, (c2, c1), eps, tol, opts),
            )
        })
        .collect();
    let mut g = GenusReport {
        window_radius,
        eps,
        reports,
        handles: 0,
        nodes: 0,
        indeterminate: 0,
        failures: 0,
        note: "counts cover the window only; handles outside it are not bounded by this report"
            .into(),
    };
    for (_, _, r) in &g.reports {
        match r {
            Ok(rep) => match rep.verdict {
                Verdict::Handle => g.handles += 1,
                Verdict::Node => g.nodes += 1,
                Verdict::Indeterminate => g.indeterminate += 1,
            },
            Err(_) => g.failures += 1,
        }
    }
    g
}

/// Result of checking that samples far out stay within `eps` of the vacuum spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeAudit<T> {
    pub checked: usize,
    /// Indices of samples at distance at least `eps` from the vacuum lines.
    pub violations: Vec<usize>,
    pub max_distance: T,
}

/// Distance of `(a, b)` to the union of vacuum lines `{b = c} ∪ {a = c̄}`, `c ∈ Γ'`.
pub fn vacuum_distance<T: Real>(dual: &DualLattice<T>, a: C<T>, b: C<T>) -> T {
    let db = abs(dual.nearest(b).1 - b);
    let da = abs(dual.nearest(a.conj()).1 - a.conj());
    da.min(db)
}

/// Audits the samples lying outside the core `{ā, b with dual coordinates in [-k, k]²}`,
/// `k = core_cells`.
pub fn tube_audit<T: Real>(
    samples: &[SpectrumSample<T>],
    eps: T,
    dual: &DualLattice<T>,
    core_cells: T,
) -> TubeAudit<T> {
    let inside = |z: C<T>| dual.coords(z).iter().all(|x| x.abs() <= core_cells);
    let mut audit = TubeAudit {
        checked: 0,
        violations: vec![],
        max_distance: T::zero(),
    };
    for (i, s) in samples.iter().enumerate() {
        if inside(s.a.conj()) && inside(s.b) {
            continue;
        }
        audit.checked += 1;
        let dist = vacuum_distance(dual, s.a, s.b);
        audit.max_distance = audit.max_distance.max(dist);
        if dist >= eps {
            audit.violations.push(i);
        }
    }
    audit
}
