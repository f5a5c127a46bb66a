//! Fourier model of the Dirac operator `D_{a,b} = ∂̄_{a,b} + M`.
//!
//! Write `e_c = exp(-c̄z + cz̄)`. A section `ψ = (u₁, u₂)` is expanded as
//! `ψ = Σ x_c v_c + y_c w_c` with `v_c = (e_{-c}, 0)` and `w_c = (0, e_c)`, `c ∈ Γ'`.
//! On this basis the diagonal part acts by `v_c ↦ (b - c)v_c` and `w_c ↦ (a - c̄)w_c`,
//! and the potential `M = [[0, -q̄], [q, 0]]` with `q = Σ q_c e_c` couples
//! `v_c → q_{c'} w_{c'-c}` and `w_c → -conj(q_{c'}) v_{c'-c}`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{DualLattice, LatticeIndex, Symmetry};
use crate::scalar::{abs, cexp, Real, C};

fn add_idx(x: LatticeIndex, y: LatticeIndex) -> LatticeIndex {
    [x[0] + y[0], x[1] + y[1]]
}

fn sub_idx(x: LatticeIndex, y: LatticeIndex) -> LatticeIndex {
    [x[0] - y[0], x[1] - y[1]]
}

/// Finitely supported potential `q = Σ q_c e_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<T> {
    dual: DualLattice<T>,
    coeffs: BTreeMap<LatticeIndex, C<T>>,
}

impl<T: Real> Potential<T> {
    /// Builds a potential from `(c, q_c)` pairs. Every `c` must lie in `Γ'` and appear once.
    pub fn new(dual: &DualLattice<T>, entries: &[(C<T>, C<T>)]) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for &(c, q) in entries {
            let idx = dual.index_of(c).ok_or(Error::NotInDualLattice {
                re: c.re.as_f64(),
                im: c.im.as_f64(),
            })?;
            if !(q.re.is_finite() && q.im.is_finite()) {
                return Err(Error::InvalidInput(
                    "non-finite potential coefficient".into(),
                ));
            }
            if coeffs.insert(idx, q).is_some() {
                return Err(Error::InvalidInput(
                    "duplicate Fourier mode in potential".into(),
                ));
            }
        }
        coeffs.retain(|_, q| *q != C::new(T::zero(), T::zero()));
        Ok(Self {
            dual: *dual,
            coeffs,
        })
    }

    pub fn zero(dual: &DualLattice<T>) -> Self {
        Self {
            dual: *dual,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dual: &DualLattice<T>, q0: C<T>) -> Self {
        Self::new(dual, &[(C::new(T::zero(), T::zero()), q0)]).expect("origin is a dual point")
    }

    pub fn dual(&self) -> &DualLattice<T> {
        &self.dual
    }

    /// `(index, c, q_c)` for every nonzero mode.
    pub fn modes(&self) -> impl Iterator<Item = (LatticeIndex, C<T>, C<T>)> + '_ {
        self.coeffs
            .iter()
            .map(|(&i, &q)| (i, self.dual.point(i), q))
    }

    pub fn coeff(&self, idx: LatticeIndex) -> C<T> {
        self.coeffs
            .get(&idx)
            .copied()
            .unwrap_or_else(|| C::new(T::zero(), T::zero()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ |q_c|²`, the mean of `|q|²` over the torus.
    pub fn mean_square(&self) -> T {
        self.coeffs
            .values()
            .fold(T::zero(), |s, q| s + crate::scalar::abs2(*q))
    }

    /// Largest `|c|` in the support, zero for the vacuum.
    pub fn support_radius(&self) -> T {
        self.modes().fold(T::zero(), |m, (_, c, _)| m.max(abs(c)))
    }

    /// Pointwise value `q(z)`.
    pub fn value(&self, z: C<T>) -> C<T> {
        self.modes()
            .fold(C::new(T::zero(), T::zero()), |s, (_, c, q)| {
                s + q * e_mode(c, z)
            })
    }
}

/// `e_c(z) = exp(-c̄z + cz̄)`.
pub fn e_mode<T: Real>(c: C<T>, z: C<T>) -> C<T> {
    cexp(c * z.conj() - c.conj() * z)
}

/// Which slot a basis section lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    /// `v_c = (e_{-c}, 0)`.
    V,
    /// `w_c = (0, e_c)`.
    W,
}

/// Fourier coefficients of a section: `first[c]` multiplies `v_c`, `second[c]` multiplies `w_c`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SectionCoeffs<T> {
    pub first: BTreeMap<LatticeIndex, C<T>>,
    pub second: BTreeMap<LatticeIndex, C<T>>,
}

impl<T: Real> SectionCoeffs<T> {
    pub fn new() -> Self {
        Self {
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn slot(&self, species: Species) -> &BTreeMap<LatticeIndex, C<T>> {
        match species {
            Species::V => &self.first,
            Species::W => &self.second,
        }
    }

    pub fn get(&self, species: Species, idx: LatticeIndex) -> C<T> {
        self.slot(species)
            .get(&idx)
            .copied()
            .unwrap_or_else(|| C::new(T::zero(), T::zero()))
    }

    pub fn add(&mut self, species: Species, idx: LatticeIndex, z: C<T>) {
        let slot = match species {
            Species::V => &mut self.first,
            Species::W => &mut self.second,
        };
        *slot
            .entry(idx)
            .or_insert_with(|| C::new(T::zero(), T::zero())) += z;
    }

    /// Wiener norm `Σ |x_c| + Σ |y_c|`.
    pub fn wiener_norm(&self) -> T {
        self.first
            .values()
            .chain(self.second.values())
            .fold(T::zero(), |s, z| s + abs(*z))
    }

    pub fn scale(&self, k: C<T>) -> Self {
        Self {
            first: self.first.iter().map(|(&i, &z)| (i, z * k)).collect(),
            second: self.second.iter().map(|(&i, &z)| (i, z * k)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&i, &z) in &other.first {
            out.add(Species::V, i, -z);
        }
        for (&i, &z) in &other.second {
            out.add(Species::W, i, -z);
        }
        out
    }

    /// Applies the quaternionic structure `j(u₁, u₂) = (-ū₂, ū₁)`. On coefficients it keeps
    /// the index: `x_c ↦ -conj(y_c)` and `y_c ↦ conj(x_c)`.
    pub fn quaternionic_j(&self) -> Self {
        Self {
            first: self.second.iter().map(|(&i, &y)| (i, -y.conj())).collect(),
            second: self.first.iter().map(|(&i, &x)| (i, x.conj())).collect(),
        }
    }
}

/// Pointwise value `(u₁(z), u₂(z))` of a section.
pub fn evaluate_pointwise<T: Real>(
    s: &SectionCoeffs<T>,
    z: C<T>,
    dual: &DualLattice<T>,
) -> (C<T>, C<T>) {
    let zero = C::new(T::zero(), T::zero());
    let u1 = s
        .first
        .iter()
        .fold(zero, |acc, (&i, &x)| acc + x * e_mode(-dual.point(i), z));
    let u2 = s
        .second
        .iter()
        .fold(zero, |acc, (&i, &y)| acc + y * e_mode(dual.point(i), z));
    (u1, u2)
}

/// `M ψ` computed exactly by convolution, without truncation.
pub fn multiply_by_potential<T: Real>(q: &Potential<T>, s: &SectionCoeffs<T>) -> SectionCoeffs<T> {
    let mut out = SectionCoeffs::new();
    for (cq, _, qc) in q.modes() {
        for (&d, &y) in &s.second {
            out.add(Species::V, sub_idx(cq, d), -qc.conj() * y);
        }
        for (&d, &x) in &s.first {
            out.add(Species::W, sub_idx(cq, d), qc * x);
        }
    }
    out
}

/// `D_{a,b} ψ` on coefficients, without truncation.
pub fn apply_dirac<T: Real>(
    a: C<T>,
    b: C<T>,
    q: &Potential<T>,
    s: &SectionCoeffs<T>,
) -> SectionCoeffs<T> {
    let dual = q.dual();
    let mut out = multiply_by_potential(q, s);
    for (&i, &x) in &s.first {
        out.add(Species::V, i, (b - dual.point(i)) * x);
    }
    for (&i, &y) in &s.second {
        out.add(Species::W, i, (a - dual.point(i).conj()) * y);
    }
    out
}

/// Multiplies a section by a gauge: `t_c = diag(e_c, e_c)` or `T_c = diag(e_c, e_{-c})`.
/// `t_c` sends `v_d ↦ v_{d-c}` and `w_d ↦ w_{d+c}`; `T_c` sends both to index `d - c`.
/// These satisfy `D_{a-c̄,b+c} = t_c⁻¹ D_{a,b} t_c` and
/// `D_{a+c̄,b+c} = T_c⁻¹ (∂̄_{a,b} + M T_{-2c}) T_c`.
pub fn gauge_shift<T: Real>(
    sym: Symmetry<T>,
    s: &SectionCoeffs<T>,
    dual: &DualLattice<T>,
) -> Result<SectionCoeffs<T>> {
    let (c, twist) = match sym {
        Symmetry::Gauge(c) => (c, false),
        Symmetry::Diagonal(c) => (c, true),
        Symmetry::Reality => {
            return Err(Error::InvalidInput(
                "the reality symmetry is not a gauge".into(),
            ))
        }
    };
    let ci = dual.index_of(c).ok_or(Error::NotInDualLattice {
        re: c.re.as_f64(),
        im: c.im.as_f64(),
    })?;
    let first = s.first.iter().map(|(&d, &x)| (sub_idx(d, ci), x)).collect();
    let second = s
        .second
        .iter()
        .map(|(&d, &y)| {
            (
                if twist {
                    sub_idx(d, ci)
                } else {
                    add_idx(d, ci)
                },
                y,
            )
        })
        .collect();
    Ok(SectionCoeffs { first, second })
}

/// One element of the truncated basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisVector<T> {
    pub species: Species,
    pub index: LatticeIndex,
    pub c: C<T>,
}

/// The truncated operator family `(a, b) ↦ D_{a,b}` for a fixed potential and radius.
///
/// The matrix is stored at `a = b = 0`; moving the parameters only changes the diagonal.
/// The coupling graph splits the basis into independent blocks, which all dense linear
/// algebra exploits.
#[derive(Debug, Clone)]
pub struct Dirac<T: Real> {
    potential: Potential<T>,
    radius: T,
    basis: Vec<BasisVector<T>>,
    position: HashMap<(Species, LatticeIndex), usize>,
    base: DMatrix<C<T>>,
    blocks: Vec<Vec<usize>>,
}

impl<T: Real> Dirac<T> {
    /// Truncates to `|c| ≤ radius`. The basis is ordered as `v_c, w_c` for `c` in
    /// enumeration order.
    pub fn new(potential: &Potential<T>, radius: T) -> Result<Self> {
        if !(radius >= T::zero()) {
            return Err(Error::InvalidInput(
                "truncation radius must be nonnegative".into(),
            ));
        }
        let dual = *potential.dual();
        let mut basis = Vec::new();
        for (idx, c) in dual.enumerate_indexed(radius) {
            basis.push(BasisVector {
                species: Species::V,
                index: idx,
                c,
            });
            basis.push(BasisVector {
                species: Species::W,
                index: idx,
                c,
            });
        }
        let position: HashMap<_, _> = basis
            .iter()
            .enumerate()
            .map(|(k, e)| ((e.species, e.index), k))
            .collect();
        let n = basis.len();
        let mut base = DMatrix::from_element(n, n, C::new(T::zero(), T::zero()));
        for (col, e) in basis.iter().enumerate() {
            match e.species {
                Species::V => base[(col, col)] = -e.c,
                Species::W => base[(col, col)] = -e.c.conj(),
            }
            for (cq, _, qc) in potential.modes() {
                let target = sub_idx(cq, e.index);
                match e.species {
                    Species::V => {
                        if let Some(&row) = position.get(&(Species::W, target)) {
                            base[(row, col)] += qc;
                        }
                    }
                    Species::W => {
                        if let Some(&row) = position.get(&(Species::V, target)) {
                            base[(row, col)] -= qc.conj();
                        }
                    }
                }
            }
        }
        let blocks = crate::linalg::components(&base);
        Ok(Self {
            potential: potential.clone(),
            radius,
            basis,
            position,
            base,
            blocks,
        })
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn dual(&self) -> &DualLattice<T> {
        self.potential.dual()
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[BasisVector<T>] {
        &self.basis
    }

    /// Connected components of the coupling graph, each sorted ascending.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn position(&self, species: Species, idx: LatticeIndex) -> Option<usize> {
        self.position.get(&(species, idx)).copied()
    }

    /// Position of the block containing basis vector `k`.
    pub fn block_of(&self, k: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.binary_search(&k).is_ok())
            .expect("every index is in a block")
    }

    /// Parameter added on the diagonal entry `k`: `b` for `v`, `a` for `w`.
    pub fn shift(&self, k: usize, a: C<T>, b: C<T>) -> C<T> {
        match self.basis[k].species {
            Species::V => b,
            Species::W => a,
        }
    }

    /// Dense matrix of `D_{a,b}`.
    pub fn matrix(&self, a: C<T>, b: C<T>) -> DMatrix<C<T>> {
        let mut m = self.base.clone();
        for k in 0..self.dim() {
            m[(k, k)] += self.shift(k, a, b);
        }
        m
    }

    /// Dense matrix of the block `blk` of `D_{a,b}`.
    pub fn block_matrix(&self, blk: usize, a: C<T>, b: C<T>) -> DMatrix<C<T>> {
        let idx = &self.blocks[blk];
        let mut m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.base[(idx[i], idx[j])]);
        for (i, &k) in idx.iter().enumerate() {
            m[(i, i)] += self.shift(k, a, b);
        }
        m
    }

    /// Coefficient vector in basis order; modes outside the truncation are dropped.
    pub fn to_vector(&self, s: &SectionCoeffs<T>) -> Vec<C<T>> {
        self.basis
            .iter()
            .map(|e| s.get(e.species, e.index))
            .collect()
    }

    pub fn from_vector(&self, v: &[C<T>]) -> SectionCoeffs<T> {
        let mut s = SectionCoeffs::new();
        for (e, &z) in self.basis.iter().zip(v) {
            if z != C::new(T::zero(), T::zero()) {
                s.add(e.species, e.index, z);
            }
        }
        s
    }
}

/// Truncated matrix together with its parameters.
#[derive(Debug, Clone)]
pub struct OperatorMatrix<T> {
    pub a: C<T>,
    pub b: C<T>,
    pub radius: T,
    pub basis: Vec<BasisVector<T>>,
    pub entries: DMatrix<C<T>>,
}

/// Assembles the truncated matrix of `D_{a,b}` for `|c| ≤ radius`.
pub fn assemble<T: Real>(
    a: C<T>,
    b: C<T>,
    q: &Potential<T>,
    radius: T,
) -> Result<OperatorMatrix<T>> {
    let d = Dirac::new(q, radius)?;
    Ok(OperatorMatrix {
        a,
        b,
        radius,
        basis: d.basis.clone(),
        entries: d.matrix(a, b),
    })
}

/// Diagonal of `(∂̄_{a,b})⁻¹` on the truncated basis and its operator norm.
#[derive(Debug, Clone)]
pub struct VacuumResolvent<T> {
    pub diag: Vec<C<T>>,
    pub norm: T,
}

/// Entries `1/(b - c)` on `v_c` and `1/(a - c̄)` on `w_c`. Fails when `(a, b)` lies within
/// `tol` of a vacuum line.
pub fn vacuum_resolvent_diag<T: Real>(
    a: C<T>,
    b: C<T>,
    radius: T,
    dual: &DualLattice<T>,
    tol: T,
) -> Result<VacuumResolvent<T>> {
    let mut diag = Vec::new();
    let mut min_dist = T::max_value().unwrap_or_else(T::one);
    for c in crate::lattice::enumerate_dual(dual, radius) {
        for z in [b - c, a - c.conj()] {
            min_dist = min_dist.min(abs(z));
            diag.push(C::new(T::one(), T::zero()) / z);
        }
    }
    if min_dist <= tol {
        return Err(Error::SingularResolvent {
            distance: min_dist.as_f64(),
        });
    }
    Ok(VacuumResolvent {
        diag,
        norm: T::one() / min_dist,
    })
}
