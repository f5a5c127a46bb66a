//! Invariants read off the ends of the spectral curve: the Willmore energy by three
//! independent routes, the convergence of kernel sections to the vacuum and the map `S`.
//!
//! Near the end `o` the curve is a graph `a = a(x)` with `x = 1/b`, near `∞` a graph
//! `b = b(x)` with `x = 1/a`. Both vanish at `x = 0`; the linear coefficient carries the
//! energy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::{evaluate_pointwise, Dirac, Potential, SectionCoeffs, Species};
use crate::kernel::{self, Tolerances};
use crate::lattice::TorusLattice;
use crate::scalar::{abs, Real, C};
use crate::tracer::{self, BranchTag, Plane, SpectrumSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    /// `b → ∞`, `a → 0`; the curve is a graph over the `b`-plane.
    O,
    /// `a → ∞`, `b → 0`; the curve is a graph over the `a`-plane.
    Infinity,
}

/// Truncated Laurent series `Σ_{k ≥ min_exp} c_k x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laurent<T> {
    pub min_exp: i32,
    pub coeffs: Vec<C<T>>,
}

impl<T: Real> Laurent<T> {
    pub fn new(min_exp: i32, coeffs: Vec<C<T>>) -> Self {
        Self { min_exp, coeffs }
    }

    /// `x^k`.
    pub fn monomial(k: i32) -> Self {
        Self {
            min_exp: k,
            coeffs: vec![C::new(T::one(), T::zero())],
        }
    }

    pub fn coeff(&self, k: i32) -> C<T> {
        let i = k - self.min_exp;
        if i < 0 || i as usize >= self.coeffs.len() {
            C::new(T::zero(), T::zero())
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            min_exp: self.min_exp,
            coeffs: self.coeffs.iter().map(|c| *c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let lo = self.min_exp.min(other.min_exp);
        let hi = (self.min_exp + self.coeffs.len() as i32)
            .max(other.min_exp + other.coeffs.len() as i32);
        Self {
            min_exp: lo,
            coeffs: (lo..hi).map(|k| self.coeff(k) + other.coeff(k)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![C::new(T::zero(), T::zero()); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += *a * *b;
            }
        }
        Self {
            min_exp: self.min_exp + other.min_exp,
            coeffs,
        }
    }

    pub fn derivative(&self) -> Self {
        Self {
            min_exp: self.min_exp - 1,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| *c * T::lit((self.min_exp + i as i32) as f64))
                .collect(),
        }
    }

    /// Coefficient of `x^{-1}`.
    pub fn residue(&self) -> C<T> {
        self.coeff(-1)
    }
}

/// Local pairing `(ω₁, ω₂) = Res(ω₁ F₂)` where `dF₂ = ω₂`; differentials are given by their
/// coefficient series in `dx` and `F₂` by a chosen primitive.
pub fn residue_pairing<T: Real>(omega1: &Laurent<T>, primitive2: &Laurent<T>) -> C<T> {
    omega1.mul(primitive2).residue()
}

/// Polynomial fit of an end in its local coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EndChart<T> {
    pub end: End,
    /// Coefficients `c₀, …, c_deg` of the graph in `x`.
    pub fit: Vec<C<T>>,
    /// Largest fit residual over the samples.
    pub residual: T,
    pub samples: usize,
}

impl<T: Real> EndChart<T> {
    /// Linear coefficient of the graph.
    pub fn lambda(&self) -> C<T> {
        self.fit[1]
    }

    pub fn series(&self) -> Laurent<T> {
        Laurent::new(0, self.fit.clone())
    }
}

/// Least-squares fit of the graph function at `end` by a polynomial of degree `degree` in
/// the local coordinate.
pub fn end_chart<T: Real>(
    end: End,
    samples: &[SpectrumSample<T>],
    fit_tol: T,
    degree: usize,
) -> Result<EndChart<T>> {
    if degree < 1 || samples.len() < degree + 2 {
        return Err(Error::InvalidInput(
            "too few samples for the end fit".into(),
        ));
    }
    let one = C::new(T::one(), T::zero());
    let pts: Vec<(C<T>, C<T>)> = samples
        .iter()
        .map(|s| match end {
            End::O => (one / s.b, s.a),
            End::Infinity => (one / s.a, s.b),
        })
        .collect();
    let rho = pts.iter().fold(T::zero(), |m, (x, _)| m.max(abs(*x)));
    let n = pts.len();
    let v = DMatrix::from_fn(n, degree + 1, |i, k| {
        crate::scalar::from_real::<T>(T::one()) * pow(pts[i].0 / rho, k)
    });
    let y = DVector::from_fn(n, |i, _| pts[i].1);
    let svd = v.svd(true, true);
    let d = svd
        .solve(&y, T::machine_eps())
        .map_err(|e| Error::Linalg(e.to_string()))?;
    let fit: Vec<C<T>> = (0..=degree)
        .map(|k| d[k] / crate::scalar::from_real(rho.powi(k as i32)))
        .collect();
    let residual = pts
        .iter()
        .fold(T::zero(), |m, (x, y)| m.max(abs(horner(&fit, *x) - *y)));
    if residual > fit_tol * T::lit(10.0) {
        return Err(Error::NonGraphEnd {
            residual: residual.as_f64(),
        });
    }
    if abs(fit[0]) > fit_tol {
        return Err(Error::NonGraphEnd {
            residual: abs(fit[0]).as_f64(),
        });
    }
    Ok(EndChart {
        end,
        fit,
        residual,
        samples: n,
    })
}

fn pow<T: Real>(z: C<T>, k: usize) -> C<T> {
    (0..k).fold(C::new(T::one(), T::zero()), |acc, _| acc * z)
}

fn horner<T: Real>(c: &[C<T>], x: C<T>) -> C<T> {
    c.iter()
        .rev()
        .fold(C::new(T::zero(), T::zero()), |acc, k| acc * x + *k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEnergy<T> {
    pub value: T,
    pub lambda: C<T>,
    /// `|Im λ| / |λ|`; the slope must be real up to truncation error.
    pub imag_ratio: T,
    pub warning: bool,
}

/// `W = -4 λ Vol` from the linear coefficient of an end chart.
pub fn willmore_slope<T: Real>(chart: &EndChart<T>, lat: &TorusLattice<T>) -> SlopeEnergy<T> {
    let lambda = chart.lambda();
    let imag_ratio = if abs(lambda) > T::zero() {
        lambda.im.abs() / abs(lambda)
    } else {
        T::zero()
    };
    SlopeEnergy {
        value: -T::lit(4.0) * lambda.re * lat.covolume(),
        lambda,
        imag_ratio,
        warning: imag_ratio > T::lit(1e-3),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueEnergy<T> {
    /// `4 (ω_∞, ω_o)_∞ Vol`.
    pub at_infinity: T,
    /// `-4 (ω_∞, ω_o)_o Vol`.
    pub at_o: T,
    /// `2i (θ, θ̃)_∞` for the oriented period basis.
    pub from_periods: T,
    /// Largest imaginary part among the three before taking real parts.
    pub imag: T,
}

/// Willmore energy from residue pairings of `ω_∞ = da` and `ω_o = db` at both ends.
pub fn willmore_residue<T: Real>(
    chart_o: &EndChart<T>,
    chart_inf: &EndChart<T>,
    lat: &TorusLattice<T>,
) -> Result<ResidueEnergy<T>> {
    if chart_o.end != End::O || chart_inf.end != End::Infinity {
        return Err(Error::InvalidInput("charts must be given as (o, ∞)".into()));
    }
    let vol = lat.covolume();
    let four = T::lit(4.0);
    let inv_x = Laurent::<T>::monomial(-1);

    // End ∞: a = 1/x, b = P(x).
    let p = chart_inf.series();
    let da = inv_x.derivative();
    let db = p.derivative();
    let pair_inf = residue_pairing(&da, &p);
    let at_infinity = pair_inf * four * vol;

    // End o: b = 1/x, a = Q(x).
    let q = chart_o.series();
    let pair_o = residue_pairing(&q.derivative(), &inv_x);
    let at_o = -pair_o * four * vol;

    // Period differentials θ = γ₁ da + γ̄₁ db, θ̃ = γ₂ da + γ̄₂ db at ∞.
    let [g1, g2] = lat.generators();
    let theta = da.scale(g1).add(&db.scale(g1.conj()));
    let theta_prim = inv_x.scale(g2).add(&p.scale(g2.conj()));
    let i2 = C::new(T::zero(), T::lit(2.0));
    let from_periods = i2 * residue_pairing(&theta, &theta_prim) * lat.orientation();

    let imag = at_infinity
        .im
        .abs()
        .max(at_o.im.abs())
        .max(from_periods.im.abs());
    Ok(ResidueEnergy {
        at_infinity: at_infinity.re,
        at_o: at_o.re,
        from_periods: from_periods.re,
        imag,
    })
}

/// `W = 4 Vol Σ |q_c|²`.
pub fn willmore_direct<T: Real>(q: &Potential<T>, lat: &TorusLattice<T>) -> T {
    T::lit(4.0) * lat.covolume() * q.mean_square()
}

/// How the ends are sampled for the energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EndSampling<T> {
    /// Inner radius `B₀` of the annulus `B₀ ≤ |b| ≤ 2B₀`; `None` picks `8 max(1, sup |c|)`.
    pub inner_radius: Option<T>,
    pub radii: usize,
    pub rays: usize,
    /// Radius of the vertical disc for the graph solve.
    pub eps: T,
    pub degree: usize,
}

impl<T: Real> Default for EndSampling<T> {
    fn default() -> Self {
        Self {
            inner_radius: None,
            radii: 6,
            rays: 3,
            eps: T::lit(0.1),
            degree: 4,
        }
    }
}

/// Samples the end along rays in the annulus `B₀ ≤ |p| ≤ 2B₀` of the relevant plane.
pub fn sample_end<T: Real>(
    d: &Dirac<T>,
    end: End,
    opts: &EndSampling<T>,
    tol: &Tolerances<T>,
) -> Result<Vec<SpectrumSample<T>>> {
    let b0 = opts
        .inner_radius
        .unwrap_or_else(|| T::lit(8.0) * T::one().max(d.potential().support_radius()));
    let plane = match end {
        End::O => Plane::B,
        End::Infinity => Plane::A,
    };
    let mut out = Vec::new();
    for j in 0..opts.rays {
        // Angles away from the lattice directions.
        let th =
            T::lit(0.37) + T::two_pi() * T::from_usize_lossy(j) / T::from_usize_lossy(opts.rays);
        let dir = C::new(th.cos(), th.sin());
        let pts: Vec<C<T>> = (0..opts.radii)
            .map(|k| {
                dir * (b0
                    * (T::one()
                        + T::from_usize_lossy(k) / T::from_usize_lossy(opts.radii.max(2) - 1)))
            })
            .collect();
        out.extend(tracer::trace_path(d, plane, &pts, opts.eps, tol)?);
    }
    Ok(out)
}

/// Willmore energy by the direct, slope and residue routes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport<T> {
    pub direct: T,
    pub slope_o: SlopeEnergy<T>,
    pub slope_infinity: SlopeEnergy<T>,
    pub residue: ResidueEnergy<T>,
    pub chart_o: EndChart<T>,
    pub chart_infinity: EndChart<T>,
}

impl<T: Real> EnergyReport<T> {
    /// Largest pairwise relative difference among direct, slope at `o` and residue at `∞`.
    pub fn max_relative_spread(&self) -> T {
        let v = [self.direct, self.slope_o.value, self.residue.at_infinity];
        let mut m = T::zero();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let s = v[i].abs().max(v[j].abs());
                if s > T::zero() {
                    m = m.max((v[i] - v[j]).abs() / s);
                }
            }
        }
        m
    }
}

pub fn energy_report<T: Real>(
    d: &Dirac<T>,
    lat: &TorusLattice<T>,
    opts: &EndSampling<T>,
    tol: &Tolerances<T>,
) -> Result<EnergyReport<T>> {
    let so = sample_end(d, End::O, opts, tol)?;
    let si = sample_end(d, End::Infinity, opts, tol)?;
    let chart_o = end_chart(End::O, &so, tol.fit_tol, opts.degree)?;
    let chart_infinity = end_chart(End::Infinity, &si, tol.fit_tol, opts.degree)?;
    Ok(EnergyReport {
        direct: willmore_direct(d.potential(), lat),
        slope_o: willmore_slope(&chart_o, lat),
        slope_infinity: willmore_slope(&chart_infinity, lat),
        residue: willmore_residue(&chart_o, &chart_infinity, lat)?,
        chart_o,
        chart_infinity,
    })
}

/// Kernel section at a spectrum sample and its Wiener distance to the vacuum sections
/// `ψ° = w₀` (end `o`) and `ψ^∞ = v₀` (end `∞`).
#[derive(Debug, Clone)]
pub struct SectionDeviation<T: Real> {
    /// Kernel section normalised so that its coefficient on the branch's vacuum mode is one.
    pub psi: SectionCoeffs<T>,
    pub dev_o: T,
    /// `None` when the `v₀` coefficient is too small to normalise by.
    pub dev_infinity: Option<T>,
}

fn normalised_by<T: Real>(psi: &SectionCoeffs<T>, species: Species) -> Option<SectionCoeffs<T>> {
    let k = psi.get(species, [0, 0]);
    if abs(k) < T::lit(1e-6) * psi.wiener_norm() {
        None
    } else {
        Some(psi.scale(C::new(T::one(), T::zero()) / k))
    }
}

fn vacuum_section<T: Real>(species: Species) -> SectionCoeffs<T> {
    let mut s = SectionCoeffs::new();
    s.add(species, [0, 0], C::new(T::one(), T::zero()));
    s
}

fn branch_species<T: Real>(psi: &SectionCoeffs<T>, tag: BranchTag) -> Species {
    match tag {
        BranchTag::GraphOverB => Species::W,
        BranchTag::GraphOverA => Species::V,
        BranchTag::NearDoublePoint => {
            if abs(psi.get(Species::W, [0, 0])) >= abs(psi.get(Species::V, [0, 0])) {
                Species::W
            } else {
                Species::V
            }
        }
    }
}

pub fn kernel_section_deviation<T: Real>(
    d: &Dirac<T>,
    sample: &SpectrumSample<T>,
    tol: &Tolerances<T>,
) -> Result<SectionDeviation<T>> {
    let kv = kernel::kernel_vector(d, sample.a, sample.b, tol.ker_tol)?;
    let species = branch_species(&kv.section, sample.tag);
    let psi = normalised_by(&kv.section, species).ok_or(Error::WrongBranch)?;
    let by_w = normalised_by(&kv.section, Species::W);
    let by_v = normalised_by(&kv.section, Species::V);
    let dev_o = by_w
        .map(|p| p.sub(&vacuum_section(Species::W)).wiener_norm())
        .unwrap_or_else(|| T::max_value().unwrap_or_else(T::one));
    let dev_infinity = by_v.map(|p| p.sub(&vacuum_section(Species::V)).wiener_norm());
    Ok(SectionDeviation {
        psi,
        dev_o,
        dev_infinity,
    })
}

/// Point `[first : second]` of `ℂP¹`, scaled so the larger coordinate is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectivePoint<T> {
    pub first: C<T>,
    pub second: C<T>,
}

impl<T: Real> ProjectivePoint<T> {
    pub fn new(u1: C<T>, u2: C<T>) -> Result<Self> {
        let (m1, m2) = (abs(u1), abs(u2));
        if m1.max(m2) <= T::lit(1e-10) {
            return Err(Error::ZeroOfSection);
        }
        Ok(if m2 >= m1 {
            Self {
                first: u1 / u2,
                second: C::new(T::one(), T::zero()),
            }
        } else {
            Self {
                first: C::new(T::one(), T::zero()),
                second: u2 / u1,
            }
        })
    }

    /// Chordal distance on `ℂP¹`.
    pub fn distance(&self, other: &Self) -> T {
        let cross = abs(self.first * other.second - self.second * other.first);
        let n1 = (crate::scalar::abs2(self.first) + crate::scalar::abs2(self.second)).sqrt();
        let n2 = (crate::scalar::abs2(other.first) + crate::scalar::abs2(other.second)).sqrt();
        cross / (n1 * n2)
    }

    /// Image under the quaternionic structure `[u₁ : u₂] ↦ [-ū₂ : ū₁]`.
    pub fn j_image(&self) -> Self {
        Self::new(-self.second.conj(), self.first.conj()).expect("nonzero point")
    }
}

/// The map `S`: the kernel section at `sample`, normalised as in
/// [`kernel_section_deviation`], evaluated at the torus point `p`.
pub fn s_map<T: Real>(
    d: &Dirac<T>,
    sample: &SpectrumSample<T>,
    p: C<T>,
    tol: &Tolerances<T>,
) -> Result<ProjectivePoint<T>> {
    let dev = kernel_section_deviation(d, sample, tol)?;
    let (u1, u2) = evaluate_pointwise(&dev.psi, p, d.dual());
    ProjectivePoint::new(u1, u2)
}
