//! Period lattices, their duals and the symmetry actions on the spectral parameters.
//!
//! For a lattice `Γ ⊂ ℂ` the dual lattice is `Γ' = {c : -c̄γ + cγ̄ ∈ 2πiℤ for all γ ∈ Γ}`.
//! Since `-c̄γ + cγ̄ = 2i·Im(cγ̄)` this is the condition `Im(cγ̄) ∈ πℤ`.
//! Dual points are addressed by integer coordinates with respect to a reduced basis.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{abs, arg_positive, cexp, Real, C};

/// Integer coordinates of a dual lattice point.
pub type LatticeIndex = [i64; 2];

/// A pair of spectral parameters `(a, b) ∈ ℂ²`.
pub type Coord<T> = (C<T>, C<T>);

/// Rank-two lattice `Γ = ℤγ₁ ⊕ ℤγ₂` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusLattice<T> {
    gamma: [C<T>; 2],
}

impl<T: Real> TorusLattice<T> {
    pub fn new(gamma1: C<T>, gamma2: C<T>) -> Result<Self> {
        let cross = (gamma1.conj() * gamma2).im;
        let scale = abs(gamma1) * abs(gamma2);
        if !(scale > T::zero()) || cross.abs() <= T::lit(1e-12) * scale {
            return Err(Error::DegenerateLattice);
        }
        Ok(Self {
            gamma: [gamma1, gamma2],
        })
    }

    /// The square lattice `⟨2π, 2πi⟩`.
    pub fn square() -> Self {
        let tau = T::two_pi();
        Self {
            gamma: [C::new(tau, T::zero()), C::new(T::zero(), tau)],
        }
    }

    pub fn generators(&self) -> [C<T>; 2] {
        self.gamma
    }

    /// Area of a fundamental domain.
    pub fn covolume(&self) -> T {
        (self.gamma[0].conj() * self.gamma[1]).im.abs()
    }

    /// `+1` if `(γ₁, γ₂)` is positively oriented, `-1` otherwise.
    pub fn orientation(&self) -> T {
        if (self.gamma[0].conj() * self.gamma[1]).im > T::zero() {
            T::one()
        } else {
            -T::one()
        }
    }

    /// Floquet multipliers `h_k = exp(aγ_k + bγ̄_k)` along both generators.
    pub fn exp_multiplier(&self, a: C<T>, b: C<T>) -> [C<T>; 2] {
        self.gamma.map(|g| cexp(a * g + b * g.conj()))
    }
}

/// Dual lattice together with its reduced basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLattice<T> {
    basis: [C<T>; 2],
    /// Inverse of the real 2x2 matrix with columns `c₁, c₂`.
    inv: [[T; 2]; 2],
    gamma: [C<T>; 2],
}

/// Computes `Γ'` with a reduced basis: `c₁` is a shortest nonzero vector, `c₂` a shortest
/// vector independent of it. Ties are broken by the smaller argument in `[0, 2π)`.
pub fn dual_lattice<T: Real>(lattice: &TorusLattice<T>) -> Result<DualLattice<T>> {
    let [g1, g2] = lattice.generators();
    // Rows encode Im(c γ̄_k) = y·Re γ_k - x·Im γ_k = π n_k.
    let m = [[-g1.im, g1.re], [-g2.im, g2.re]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == T::zero() {
        return Err(Error::DegenerateLattice);
    }
    let pi = T::pi();
    // Columns of π·m⁻¹.
    let raw1 = C::new(m[1][1] * pi / det, -m[1][0] * pi / det);
    let raw2 = C::new(-m[0][1] * pi / det, m[0][0] * pi / det);
    let (u, v) = gauss_reduce(raw1, raw2);

    let mut cands = Vec::new();
    for i in -2i64..=2 {
        for j in -2i64..=2 {
            if i != 0 || j != 0 {
                cands.push(u * T::lit(i as f64) + v * T::lit(j as f64));
            }
        }
    }
    let tol = T::lit(1e-10) * abs(u);
    let by_len_arg = |x: &C<T>, y: &C<T>| cmp_len_arg(*x, *y, tol);
    let c1 = *cands
        .iter()
        .min_by(|x, y| by_len_arg(x, y))
        .expect("nonempty");
    let c2 = *cands
        .iter()
        .filter(|z| (c1.conj() * **z).im.abs() > tol * abs(c1))
        .min_by(|x, y| by_len_arg(x, y))
        .expect("independent vector exists");
    DualLattice::from_basis(c1, c2, lattice.generators())
}

fn gauss_reduce<T: Real>(mut u: C<T>, mut v: C<T>) -> (C<T>, C<T>) {
    for _ in 0..200 {
        if crate::scalar::abs2(v) < crate::scalar::abs2(u) {
            std::mem::swap(&mut u, &mut v);
        }
        let mu = ((v * u.conj()).re / crate::scalar::abs2(u)).round();
        if mu == T::zero() {
            break;
        }
        v -= u * mu;
    }
    (u, v)
}

fn cmp_len_arg<T: Real>(x: C<T>, y: C<T>, tol: T) -> Ordering {
    let (lx, ly) = (abs(x), abs(y));
    if (lx - ly).abs() > tol {
        return lx.partial_cmp(&ly).unwrap_or(Ordering::Equal);
    }
    let (ax, ay) = (arg_positive(x), arg_positive(y));
    if (ax - ay).abs() > T::lit(1e-12) {
        return ax.partial_cmp(&ay).unwrap_or(Ordering::Equal);
    }
    Ordering::Equal
}

impl<T: Real> DualLattice<T> {
    fn from_basis(c1: C<T>, c2: C<T>, gamma: [C<T>; 2]) -> Result<Self> {
        let det = c1.re * c2.im - c2.re * c1.im;
        if det == T::zero() {
            return Err(Error::DegenerateLattice);
        }
        let inv = [[c2.im / det, -c2.re / det], [-c1.im / det, c1.re / det]];
        Ok(Self {
            basis: [c1, c2],
            inv,
            gamma,
        })
    }

    pub fn basis(&self) -> [C<T>; 2] {
        self.basis
    }

    pub fn point(&self, idx: LatticeIndex) -> C<T> {
        self.basis[0] * T::lit(idx[0] as f64) + self.basis[1] * T::lit(idx[1] as f64)
    }

    /// Real coordinates of `z` with respect to the basis.
    pub fn coords(&self, z: C<T>) -> [T; 2] {
        [
            self.inv[0][0] * z.re + self.inv[0][1] * z.im,
            self.inv[1][0] * z.re + self.inv[1][1] * z.im,
        ]
    }

    /// Integer coordinates of `c` if it is a dual point, checked through the
    /// congruence `Im(cγ̄) ∈ πℤ` to relative accuracy `1e-12`.
    pub fn index_of(&self, c: C<T>) -> Option<LatticeIndex> {
        for g in self.gamma {
            let k = (c * g.conj()).im / T::pi();
            let tol = T::lit(1e-12) * (T::one() + k.abs());
            if (k - k.round()).abs() > tol {
                return None;
            }
        }
        let [x, y] = self.coords(c);
        Some([x.round().as_f64() as i64, y.round().as_f64() as i64])
    }

    pub fn contains(&self, c: C<T>) -> bool {
        self.index_of(c).is_some()
    }

    /// The dual point nearest to `z`.
    pub fn nearest(&self, z: C<T>) -> (LatticeIndex, C<T>) {
        let [x, y] = self.coords(z);
        let (x0, y0) = (x.floor().as_f64() as i64, y.floor().as_f64() as i64);
        let mut best = ([x0, y0], self.point([x0, y0]));
        let mut best_d = abs(best.1 - z);
        for i in -1..=2 {
            for j in -1..=2 {
                let idx = [x0 + i, y0 + j];
                let p = self.point(idx);
                let d = abs(p - z);
                if d < best_d {
                    best = (idx, p);
                    best_d = d;
                }
            }
        }
        best
    }

    /// Dual points with `|c| ≤ radius` paired with their indices, ordered by modulus and
    /// then by argument in `[0, 2π)`.
    pub fn enumerate_indexed(&self, radius: T) -> Vec<(LatticeIndex, C<T>)> {
        let tol = T::lit(1e-12) * (T::one() + radius);
        let row = |r: [T; 2]| (r[0] * r[0] + r[1] * r[1]).sqrt();
        let mmax = (radius * row(self.inv[0])).floor().as_f64() as i64 + 1;
        let nmax = (radius * row(self.inv[1])).floor().as_f64() as i64 + 1;
        let mut out = Vec::new();
        for m in -mmax..=mmax {
            for n in -nmax..=nmax {
                let c = self.point([m, n]);
                if abs(c) <= radius + tol {
                    out.push(([m, n], c));
                }
            }
        }
        out.sort_by(|x, y| cmp_len_arg(x.1, y.1, tol).then(x.0.cmp(&y.0)));
        out
    }
}

/// Dual points with `|c| ≤ radius`, ordered by modulus and then argument.
pub fn enumerate_dual<T: Real>(dual: &DualLattice<T>, radius: T) -> Vec<C<T>> {
    dual.enumerate_indexed(radius)
        .into_iter()
        .map(|(_, c)| c)
        .collect()
}

/// Symmetries of the spectrum acting on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symmetry<T> {
    /// `t_c: (a, b) ↦ (a - c̄, b + c)`; preserves the spectrum and the multiplier.
    Gauge(C<T>),
    /// `T_c: (a, b) ↦ (a + c̄, b + c)`.
    Diagonal(C<T>),
    /// `ρ: (a, b) ↦ (b̄, ā)`.
    Reality,
}

pub fn apply_symmetry<T: Real>(
    sym: Symmetry<T>,
    coord: Coord<T>,
    dual: &DualLattice<T>,
) -> Result<Coord<T>> {
    let (a, b) = coord;
    match sym {
        Symmetry::Gauge(c) | Symmetry::Diagonal(c) if !dual.contains(c) => {
            Err(Error::NotInDualLattice {
                re: c.re.as_f64(),
                im: c.im.as_f64(),
            })
        }
        Symmetry::Gauge(c) => Ok((a - c.conj(), b + c)),
        Symmetry::Diagonal(c) => Ok((a + c.conj(), b + c)),
        Symmetry::Reality => Ok((b.conj(), a.conj())),
    }
}

/// Moves `coord` by a gauge symmetry `t_c` so that `a = λ₁c̄₁ + λ₂c̄₂` with
/// `λ_k ∈ [-1/2, 1/2)`. Returns the reduced point and the `c` used.
pub fn reduce_to_domain<T: Real>(coord: Coord<T>, dual: &DualLattice<T>) -> (Coord<T>, C<T>) {
    let (a, b) = coord;
    let mu = dual.coords(a.conj());
    let half = T::lit(0.5);
    let n = mu.map(|m| (m + half).floor().as_f64() as i64);
    let c = dual.point(n);
    ((a - c.conj(), b + c), c)
}
