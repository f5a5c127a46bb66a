//! Dense linear algebra on the block decomposition of a truncated operator.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::fourier::Dirac;
use crate::scalar::{abs, arg, Real, C};

/// Connected components of the graph with an edge wherever `m[i,j]` or `m[j,i]` is nonzero
/// (`i ≠ j`). Components are sorted internally and ordered by their smallest index.
pub fn components<T: Real>(m: &DMatrix<C<T>>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let zero = C::new(T::zero(), T::zero());
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != zero {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Determinant split into `log|det|` and unit phase, so it never overflows.
#[derive(Debug, Clone, Copy)]
pub struct DetInfo<T> {
    pub log_abs: T,
    pub phase: C<T>,
    pub singular: bool,
}

fn lu_det<T: Real>(m: DMatrix<C<T>>) -> DetInfo<T> {
    let lu = m.lu();
    let sign: C<T> = lu.p().determinant();
    let u = lu.u();
    let mut log_abs = T::zero();
    let mut phase = sign;
    let mut singular = false;
    for k in 0..u.nrows() {
        let p = u[(k, k)];
        let r = abs(p);
        if r == T::zero() {
            singular = true;
            continue;
        }
        log_abs += r.ln();
        phase *= p / r;
    }
    DetInfo {
        log_abs,
        phase,
        singular,
    }
}

/// `det D_{a,b}` accumulated over blocks.
pub fn det_info<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>) -> DetInfo<T> {
    let mut acc = DetInfo {
        log_abs: T::zero(),
        phase: C::new(T::one(), T::zero()),
        singular: false,
    };
    for k in 0..d.blocks().len() {
        let x = lu_det(d.block_matrix(k, a, b));
        acc.log_abs += x.log_abs;
        acc.phase *= x.phase;
        acc.singular |= x.singular;
    }
    let r = abs(acc.phase);
    if r > T::zero() {
        acc.phase /= r;
    }
    acc
}

/// A singular value with its right singular vector embedded in the full basis.
#[derive(Debug, Clone)]
pub struct SingularPair<T: Real> {
    pub sigma: T,
    pub vector: Vec<C<T>>,
}

fn block_svd<T: Real>(m: DMatrix<C<T>>) -> Result<(DVector<T>, DMatrix<C<T>>)> {
    let svd = m
        .try_svd(false, true, T::machine_eps(), 0)
        .ok_or_else(|| Error::Linalg("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Linalg("missing singular vectors".into()))?;
    Ok((svd.singular_values, v_t))
}

/// Smallest singular value of `D_{a,b}`.
pub fn sigma_min<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>) -> Result<T> {
    let mut best = T::max_value().unwrap_or_else(T::one);
    for k in 0..d.blocks().len() {
        let m = d.block_matrix(k, a, b);
        let s = if m.nrows() == 1 {
            abs(m[(0, 0)])
        } else {
            let svd = m
                .try_svd(false, false, T::machine_eps(), 0)
                .ok_or_else(|| Error::Linalg("SVD did not converge".into()))?;
            svd.singular_values
                .iter()
                .fold(T::max_value().unwrap_or_else(T::one), |x, &y| x.min(y))
        };
        best = best.min(s);
    }
    Ok(best)
}

/// The `count` smallest singular values with right singular vectors, ascending; ties are
/// ordered by the dominant basis index of the vector.
pub fn smallest_singular<T: Real>(
    d: &Dirac<T>,
    a: C<T>,
    b: C<T>,
    count: usize,
) -> Result<Vec<SingularPair<T>>> {
    let n = d.dim();
    let mut all = Vec::new();
    for (k, idx) in d.blocks().iter().enumerate() {
        let (s, v_t) = block_svd(d.block_matrix(k, a, b))?;
        for i in 0..s.len() {
            let mut vector = vec![C::new(T::zero(), T::zero()); n];
            for (j, &g) in idx.iter().enumerate() {
                vector[g] = v_t[(i, j)].conj();
            }
            all.push(SingularPair {
                sigma: s[i],
                vector,
            });
        }
    }
    all.sort_by(|x, y| {
        x.sigma
            .partial_cmp(&y.sigma)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(dominant_index(&x.vector).cmp(&dominant_index(&y.vector)))
    });
    all.truncate(count);
    Ok(all)
}

/// Index of the entry with largest modulus (first one on ties).
pub fn dominant_index<T: Real>(v: &[C<T>]) -> usize {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if abs(*z) > abs(v[best]) {
            best = i;
        }
    }
    best
}

/// Block-diagonal inverse of `D_{a,b} + λ` as a dense matrix, with the 1-norm condition
/// estimate `‖A‖₁‖A⁻¹‖₁` of the worst block.
pub fn shifted_inverse<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>) -> Result<(DMatrix<C<T>>, T)> {
    let n = d.dim();
    let mut inv = DMatrix::from_element(n, n, C::new(T::zero(), T::zero()));
    let mut cond = T::one();
    for (k, idx) in d.blocks().iter().enumerate() {
        let m = d.block_matrix(k, a, b);
        let norm_m = one_norm(&m);
        let mi = m.try_inverse().ok_or_else(|| {
            Error::IllConditionedContour("singular resolvent on the contour".into())
        })?;
        cond = cond.max(norm_m * one_norm(&mi));
        for (i, &gi) in idx.iter().enumerate() {
            for (j, &gj) in idx.iter().enumerate() {
                inv[(gi, gj)] = mi[(i, j)];
            }
        }
    }
    Ok((inv, cond))
}

pub fn one_norm<T: Real>(m: &DMatrix<C<T>>) -> T {
    (0..m.ncols())
        .map(|j| m.column(j).iter().fold(T::zero(), |s, z| s + abs(*z)))
        .fold(T::zero(), |x, y| x.max(y))
}

pub fn frobenius<T: Real>(m: &DMatrix<C<T>>) -> T {
    m.iter()
        .fold(T::zero(), |s, z| s + crate::scalar::abs2(*z))
        .sqrt()
}

/// `trace((D_{a,b})⁻¹ E)` where `E` is the diagonal selector `mask`. This is the logarithmic
/// derivative of the determinant along the corresponding parameter direction.
pub fn trace_inverse_masked<T: Real>(
    d: &Dirac<T>,
    a: C<T>,
    b: C<T>,
    mask: impl Fn(usize) -> bool,
) -> Result<C<T>> {
    let mut tr = C::new(T::zero(), T::zero());
    for (k, idx) in d.blocks().iter().enumerate() {
        if !idx.iter().any(|&g| mask(g)) {
            continue;
        }
        let mi = d
            .block_matrix(k, a, b)
            .try_inverse()
            .ok_or(Error::Linalg("singular matrix in Newton step".into()))?;
        for (i, &g) in idx.iter().enumerate() {
            if mask(g) {
                tr += mi[(i, i)];
            }
        }
    }
    Ok(tr)
}

/// Eigenvalues and unit right eigenvectors of a square matrix via the complex Schur form.
pub fn eigen<T: Real>(m: DMatrix<C<T>>) -> Result<(Vec<C<T>>, Vec<DVector<C<T>>>)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((
            vec![m[(0, 0)]],
            vec![DVector::from_element(1, C::new(T::one(), T::zero()))],
        ));
    }
    let scale = one_norm(&m).max(T::one());
    let schur = Schur::try_new(m, T::machine_eps(), 0)
        .ok_or_else(|| Error::Linalg("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let tiny = T::machine_eps() * scale;
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut y = DVector::from_element(n, C::new(T::zero(), T::zero()));
        y[k] = C::new(T::one(), T::zero());
        for j in (0..k).rev() {
            let mut s = C::new(T::zero(), T::zero());
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - lam;
            if abs(den) < tiny {
                den = C::new(tiny, T::zero());
            }
            y[j] = -s / den;
        }
        let v = &q * y;
        let nv = v
            .iter()
            .fold(T::zero(), |s, z| s + crate::scalar::abs2(*z))
            .sqrt();
        values.push(lam);
        vectors.push(v / C::new(nv, T::zero()));
    }
    Ok((values, vectors))
}

/// All eigenvalues of `D_{a,b}` (block by block).
pub fn eigenvalues<T: Real>(d: &Dirac<T>, a: C<T>, b: C<T>) -> Result<Vec<C<T>>> {
    let mut out = Vec::with_capacity(d.dim());
    for k in 0..d.blocks().len() {
        let m = d.block_matrix(k, a, b);
        if m.nrows() == 1 {
            out.push(m[(0, 0)]);
            continue;
        }
        let schur = Schur::try_new(m, T::machine_eps(), 0)
            .ok_or_else(|| Error::Linalg("Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        out.extend((0..t.nrows()).map(|i| t[(i, i)]));
    }
    Ok(out)
}

/// Number of zeros of `f` inside the circle `|z - center| = radius` by the argument
/// principle. `f` returns a complex value whose phase is used; a value below `floor` in
/// modulus on the contour is an error. Nodes start at `nodes` and double until consecutive
/// phase increments stay below a quarter turn.
pub fn winding_count<T: Real>(
    f: &(dyn Fn(C<T>) -> Result<C<T>> + Sync),
    center: C<T>,
    radius: T,
    nodes: usize,
    floor: T,
) -> Result<usize> {
    let mut n = nodes.max(8);
    loop {
        let vals: Vec<C<T>> = (0..n)
            .map(|k| {
                let th = T::two_pi() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
                f(center + C::new(th.cos(), th.sin()) * radius)
            })
            .collect::<Result<_>>()?;
        if let Some(v) = vals.iter().find(|v| abs(**v) <= floor) {
            return Err(Error::UnreliableContour(format!(
                "|f| = {:e} on the contour",
                abs(*v).as_f64()
            )));
        }
        let mut total = T::zero();
        let mut max_step = T::zero();
        for k in 0..n {
            let step = arg(vals[(k + 1) % n] / vals[k]);
            max_step = max_step.max(step.abs());
            total += step;
        }
        if max_step < T::frac_pi_2() {
            let w = total / T::two_pi();
            let r = w.round();
            if (w - r).abs() > T::lit(0.25) || r < T::zero() {
                return Err(Error::UnreliableContour(format!(
                    "winding {} is not a nonnegative integer",
                    w.as_f64()
                )));
            }
            return Ok(r.as_f64() as usize);
        }
        if n >= 1 << 14 {
            return Err(Error::UnreliableContour(
                "phase not resolved on the contour".into(),
            ));
        }
        n *= 2;
    }
}
