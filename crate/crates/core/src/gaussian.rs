//! Affine Bogoliubov maps for lossless Gaussian networks on vacuum inputs.
//!
//! A map over `M` modes expresses every output annihilation operator in the
//! Heisenberg picture as
//!
//! ```text
//! a_j = d_j + sum_n C[j,n] z_n + sum_n S[j,n] z_n^dagger
//! ```
//!
//! where `z_n` are vacuum input modes. Elementary elements act on the current
//! outputs, so applying `A` then `B` yields `B(A(z))`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ComplexScalar;

type CMatrix = DMatrix<ComplexScalar>;
type CVector = DVector<ComplexScalar>;

const ZERO: ComplexScalar = ComplexScalar::new(0.0, 0.0);

/// Squeeze factor and squeeze angle of a parametric amplifier.
///
/// A negative factor is folded into the angle: `(−r, θ)` is stored as
/// `(r, θ + π/2)` because `e^{2i(θ+π/2)} sinh r = e^{2iθ} sinh(−r)`. The
/// angle is kept in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    r: f64,
    theta: f64,
}

impl SqueezeParams {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || !theta.is_finite() {
            return Err(Error::invalid(format!(
                "squeeze parameters must be finite (r={r}, theta={theta})"
            )));
        }
        let (r, theta) = if r < 0.0 { (-r, theta + FRAC_PI_2) } else { (r, theta) };
        Ok(SqueezeParams {
            r,
            theta: reduce_angle(theta),
        })
    }

    pub const fn vacuum() -> Self {
        SqueezeParams { r: 0.0, theta: 0.0 }
    }

    /// Squeezing quoted in decibels of noise reduction: `r = ln(10^{dB/20})`.
    pub fn from_db(db: f64, theta: f64) -> Result<Self> {
        Self::new(db_to_r(db), theta)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Coefficient `e^{2iθ} sinh r` of the creation operator.
    pub fn creation_coefficient(&self) -> ComplexScalar {
        ComplexScalar::from_polar(self.r.sinh(), 2.0 * self.theta)
    }
}

impl Default for SqueezeParams {
    fn default() -> Self {
        Self::vacuum()
    }
}

pub fn db_to_r(db: f64) -> f64 {
    (10f64.powf(db / 20.0)).ln()
}

fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly PI for tiny negative inputs
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Deviations from the Bogoliubov (symplectic) conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovDiagnostics {
    /// `max |C C† − S S† − I|`
    pub unitarity: f64,
    /// `max |C Sᵀ − (C Sᵀ)ᵀ|`
    pub symmetry: f64,
}

impl BogoliubovDiagnostics {
    pub fn max_deviation(&self) -> f64 {
        self.unitarity.max(self.symmetry)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_deviation() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovMap {
    displacement: CVector,
    c: CMatrix,
    s: CMatrix,
}

impl BogoliubovMap {
    pub fn identity(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("a map needs at least one mode"));
        }
        Ok(BogoliubovMap {
            displacement: CVector::zeros(modes),
            c: CMatrix::identity(modes, modes),
            s: CMatrix::zeros(modes, modes),
        })
    }

    /// Builds a map from raw parts. Shapes and finiteness are checked, the
    /// Bogoliubov conditions are not (see [`BogoliubovMap::validate`]).
    pub fn from_parts(displacement: CVector, c: CMatrix, s: CMatrix) -> Result<Self> {
        let m = displacement.len();
        if m == 0 || c.shape() != (m, m) || s.shape() != (m, m) {
            return Err(Error::invalid(format!(
                "inconsistent shapes: d={m}, C={:?}, S={:?}",
                c.shape(),
                s.shape()
            )));
        }
        let finite = |z: &ComplexScalar| z.re.is_finite() && z.im.is_finite();
        if !(displacement.iter().all(finite) && c.iter().all(finite) && s.iter().all(finite)) {
            return Err(Error::invalid("map entries must be finite"));
        }
        Ok(BogoliubovMap { displacement, c, s })
    }

    pub fn modes(&self) -> usize {
        self.displacement.len()
    }

    pub fn displacement(&self) -> &CVector {
        &self.displacement
    }

    pub fn annihilation_coefficients(&self) -> &CMatrix {
        &self.c
    }

    pub fn creation_coefficients(&self) -> &CMatrix {
        &self.s
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes() {
            Err(Error::IndexOutOfRange {
                index: mode,
                modes: self.modes(),
            })
        } else {
            Ok(())
        }
    }

    fn check_pair(&self, j: usize, k: usize) -> Result<()> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        if j == k {
            return Err(Error::invalid(format!("two-mode element needs distinct modes, got {j} twice")));
        }
        Ok(())
    }

    pub fn displace(&self, mode: usize, alpha: ComplexScalar) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.displacement[mode] += alpha;
        Ok(out)
    }

    /// `a_mode -> a_mode e^{-i phi}`.
    pub fn apply_phase(&self, mode: usize, phi: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let rot = ComplexScalar::from_polar(1.0, -phi);
        let mut out = self.clone();
        out.displacement[mode] *= rot;
        out.c.row_mut(mode).apply(|z| *z *= rot);
        out.s.row_mut(mode).apply(|z| *z *= rot);
        Ok(out)
    }

    /// Power transmissivity `t`: `a_j -> √t a_j + √(1−t) a_k`,
    /// `a_k -> √(1−t) a_j − √t a_k`. `t = 1/2` is the balanced splitter
    /// `(a_j ± a_k)/√2`.
    pub fn apply_beamsplitter(&self, j: usize, k: usize, t: f64) -> Result<Self> {
        self.check_pair(j, k)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("transmissivity {t} outside [0, 1]")));
        }
        let tau = t.sqrt();
        let rho = (1.0 - t).sqrt();
        let mut out = self.clone();
        let mix = |x: ComplexScalar, y: ComplexScalar| (x * tau + y * rho, x * rho - y * tau);
        let (dj, dk) = mix(self.displacement[j], self.displacement[k]);
        out.displacement[j] = dj;
        out.displacement[k] = dk;
        for n in 0..self.modes() {
            let (cj, ck) = mix(self.c[(j, n)], self.c[(k, n)]);
            out.c[(j, n)] = cj;
            out.c[(k, n)] = ck;
            let (sj, sk) = mix(self.s[(j, n)], self.s[(k, n)]);
            out.s[(j, n)] = sj;
            out.s[(k, n)] = sk;
        }
        Ok(out)
    }

    /// Degenerate parametric amplifier: `a -> a cosh r + a† e^{2iθ} sinh r`.
    pub fn apply_dopa(&self, mode: usize, sq: SqueezeParams) -> Result<Self> {
        self.check_mode(mode)?;
        let ch = sq.r().cosh();
        let g = sq.creation_coefficient();
        let mut out = self.clone();
        let d = self.displacement[mode];
        out.displacement[mode] = d * ch + d.conj() * g;
        for n in 0..self.modes() {
            let (c, s) = (self.c[(mode, n)], self.s[(mode, n)]);
            out.c[(mode, n)] = c * ch + s.conj() * g;
            out.s[(mode, n)] = s * ch + c.conj() * g;
        }
        Ok(out)
    }

    /// Non-degenerate parametric amplifier on `(j, k)`:
    /// `a_j -> a_j cosh r + a_k† e^{2iθ} sinh r` and symmetrically for `a_k`.
    ///
    /// The opposite (anti-squeezing) pump phase is `θ + π/2`, which is what a
    /// negative `r` in [`SqueezeParams::new`] produces.
    pub fn apply_nopa(&self, j: usize, k: usize, sq: SqueezeParams) -> Result<Self> {
        self.check_pair(j, k)?;
        let ch = sq.r().cosh();
        let g = sq.creation_coefficient();
        let mut out = self.clone();
        let (dj, dk) = (self.displacement[j], self.displacement[k]);
        out.displacement[j] = dj * ch + dk.conj() * g;
        out.displacement[k] = dk * ch + dj.conj() * g;
        for n in 0..self.modes() {
            let (cj, sj) = (self.c[(j, n)], self.s[(j, n)]);
            let (ck, sk) = (self.c[(k, n)], self.s[(k, n)]);
            out.c[(j, n)] = cj * ch + sk.conj() * g;
            out.s[(j, n)] = sj * ch + ck.conj() * g;
            out.c[(k, n)] = ck * ch + sj.conj() * g;
            out.s[(k, n)] = sk * ch + cj.conj() * g;
        }
        Ok(out)
    }

    /// The map that applies `first` and then `second`.
    pub fn compose(first: &Self, second: &Self) -> Result<Self> {
        if first.modes() != second.modes() {
            return Err(Error::invalid(format!(
                "cannot compose maps over {} and {} modes",
                first.modes(),
                second.modes()
            )));
        }
        let d1c = first.displacement.map(|z| z.conj());
        let c1c = first.c.map(|z| z.conj());
        let s1c = first.s.map(|z| z.conj());
        Ok(BogoliubovMap {
            displacement: &second.displacement + &second.c * &first.displacement + &second.s * d1c,
            c: &second.c * &first.c + &second.s * s1c,
            s: &second.c * &first.s + &second.s * c1c,
        })
    }

    pub fn then(&self, next: &Self) -> Result<Self> {
        Self::compose(self, next)
    }

    /// `|d_j|² + Σ_k |S_jk|²`.
    pub fn mean_photon(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        Ok(self.mean_photon_unchecked(mode))
    }

    fn mean_photon_unchecked(&self, mode: usize) -> f64 {
        self.displacement[mode].norm_sqr() + self.s.row(mode).iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn mean_photons(&self) -> DVector<f64> {
        DVector::from_fn(self.modes(), |j, _| self.mean_photon_unchecked(j))
    }

    pub fn total_mean_photons(&self) -> f64 {
        self.mean_photons().sum()
    }

    /// Photon-number means and covariance `⟨δN_j δN_k⟩`.
    pub fn photon_covariance(&self) -> MomentSet {
        let (linear, quadratic) = self.photon_covariance_parts();
        let mut cov = linear + quadratic;
        symmetrize(&mut cov);
        MomentSet {
            mean: self.mean_photons(),
            cov,
        }
    }

    /// Splits the covariance into the part linear in the displacement
    /// (`Σ_n u_jn u*_kn`, `u_jn = d*_j C_jn + d_j S*_jn`) and the
    /// displacement-free part `|⟨δa_j δa_k⟩|² + ⟨δa_j† δa_k⟩⟨δa_j δa_k†⟩`.
    pub fn photon_covariance_parts(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.modes();
        let s_conj = self.s.map(|z| z.conj());
        let u = CMatrix::from_fn(m, m, |j, n| {
            self.displacement[j].conj() * self.c[(j, n)] + self.displacement[j] * s_conj[(j, n)]
        });
        let linear = (&u * u.adjoint()).map(|z| z.re);

        let pair = &self.c * self.s.transpose();
        let normal = &s_conj * self.s.transpose();
        let anti = &self.c * self.c.adjoint();
        let quadratic = DMatrix::from_fn(m, m, |j, k| {
            pair[(j, k)].norm_sqr() + (normal[(j, k)] * anti[(j, k)]).re
        });
        (linear, quadratic)
    }

    /// Symmetrized covariance between `N_j` of `self` and `N_k` of `other`,
    /// both maps acting on the same vacuum inputs.
    ///
    /// Used for observables that do not commute, e.g. photon numbers before
    /// and after a beamsplitter.
    pub fn cross_number_covariance(&self, j: usize, other: &Self, k: usize) -> Result<f64> {
        self.check_mode(j)?;
        other.check_mode(k)?;
        if self.modes() != other.modes() {
            return Err(Error::invalid("maps must share their input modes"));
        }
        let (dj, dk) = (self.displacement[j], other.displacement[k]);
        let mut linear = ZERO;
        let mut pair = ZERO;
        let mut normal = ZERO;
        let mut anti = ZERO;
        for n in 0..self.modes() {
            let (cj, sj) = (self.c[(j, n)], self.s[(j, n)]);
            let (ck, sk) = (other.c[(k, n)], other.s[(k, n)]);
            let uj = dj.conj() * cj + dj * sj.conj();
            let uk = dk.conj() * ck + dk * sk.conj();
            linear += uj * uk.conj();
            pair += cj * sk;
            normal += sj.conj() * sk;
            anti += cj * ck.conj();
        }
        Ok(linear.re + pair.norm_sqr() + (normal * anti).re)
    }

    /// Mean and variance of `(a e^{-iψ} + a† e^{iψ})/√2` for `ψ = angle`.
    /// Vacuum variance is 1/2.
    pub fn quadrature_stats(&self, mode: usize, angle: f64) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        let rot = ComplexScalar::from_polar(1.0, -angle);
        let mean = std::f64::consts::SQRT_2 * (self.displacement[mode] * rot).re;
        let var = 0.5
            * (0..self.modes())
                .map(|n| (self.c[(mode, n)] * rot + self.s[(mode, n)].conj() * rot.conj()).norm_sqr())
                .sum::<f64>();
        Ok((mean, var))
    }

    pub fn validate(&self) -> BogoliubovDiagnostics {
        let m = self.modes();
        let comm = &self.c * self.c.adjoint() - &self.s * self.s.adjoint() - CMatrix::identity(m, m);
        let pair = &self.c * self.s.transpose();
        let asym = &pair - pair.transpose();
        let max_abs = |x: &CMatrix| x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        BogoliubovDiagnostics {
            unitarity: max_abs(&comm),
            symmetry: max_abs(&asym),
        }
    }

    /// Maximum entrywise distance to another map of the same size.
    pub fn distance(&self, other: &Self) -> f64 {
        let dmax = |a: &CMatrix, b: &CMatrix| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dd = (&self.displacement - &other.displacement)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        dd.max(dmax(&self.c, &other.c)).max(dmax(&self.s, &other.s))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Photon-number means and covariance matrix over a set of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl MomentSet {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if cov.shape() != (m, m) {
            return Err(Error::invalid(format!("covariance shape {:?} does not match {m} means", cov.shape())));
        }
        let scale = cov.amax().max(1.0);
        for j in 0..m {
            if cov[(j, j)] < -1e-12 * scale {
                return Err(Error::invalid(format!("negative variance {} at {j}", cov[(j, j)])));
            }
            for k in 0..j {
                if (cov[(j, k)] - cov[(k, j)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("covariance not symmetric at ({j}, {k})")));
                }
            }
        }
        Ok(MomentSet { mean, cov })
    }

    pub fn modes(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.cov[(j, j)]
    }

    /// Restriction to `arms`, in the given order.
    pub fn select(&self, arms: &[usize]) -> Result<Self> {
        check_distinct(arms, self.modes())?;
        Ok(MomentSet {
            mean: DVector::from_fn(arms.len(), |i, _| self.mean[arms[i]]),
            cov: DMatrix::from_fn(arms.len(), arms.len(), |i, k| self.cov[(arms[i], arms[k])]),
        })
    }
}

pub(crate) fn check_distinct(arms: &[usize], modes: usize) -> Result<()> {
    for (i, &a) in arms.iter().enumerate() {
        if a >= modes {
            return Err(Error::IndexOutOfRange { index: a, modes });
        }
        if arms[..i].contains(&a) {
            return Err(Error::invalid(format!("arm {a} listed more than once")));
        }
    }
    Ok(())
}

/// One elementary element of a Gaussian network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Displace { mode: usize, alpha: ComplexScalar },
    Phase { mode: usize, phi: f64 },
    BeamSplitter { j: usize, k: usize, transmissivity: f64 },
    Dopa { mode: usize, squeeze: SqueezeParams },
    Nopa { j: usize, k: usize, squeeze: SqueezeParams },
}

impl Element {
    pub fn apply(&self, map: &BogoliubovMap) -> Result<BogoliubovMap> {
        match *self {
            Element::Displace { mode, alpha } => map.displace(mode, alpha),
            Element::Phase { mode, phi } => map.apply_phase(mode, phi),
            Element::BeamSplitter { j, k, transmissivity } => map.apply_beamsplitter(j, k, transmissivity),
            Element::Dopa { mode, squeeze } => map.apply_dopa(mode, squeeze),
            Element::Nopa { j, k, squeeze } => map.apply_nopa(j, k, squeeze),
        }
    }

    pub fn max_mode(&self) -> usize {
        match *self {
            Element::Displace { mode, .. } | Element::Phase { mode, .. } | Element::Dopa { mode, .. } => mode,
            Element::BeamSplitter { j, k, .. } | Element::Nopa { j, k, .. } => j.max(k),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Displace { mode, alpha } => write!(f, "displace(mode {mode}, alpha {alpha})"),
            Element::Phase { mode, phi } => write!(f, "phase(mode {mode}, phi {phi})"),
            Element::BeamSplitter { j, k, transmissivity } => {
                write!(f, "beamsplitter(modes {j},{k}, T {transmissivity})")
            }
            Element::Dopa { mode, squeeze } => {
                write!(f, "dopa(mode {mode}, r {}, theta {})", squeeze.r(), squeeze.theta())
            }
            Element::Nopa { j, k, squeeze } => {
                write!(f, "nopa(modes {j},{k}, r {}, theta {})", squeeze.r(), squeeze.theta())
            }
        }
    }
}

/// An ordered list of elements acting on `modes` vacuum inputs.
///
/// The same program drives both the Bogoliubov map and the Fock oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    modes: usize,
    elements: Vec<Element>,
}

impl Program {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("a program needs at least one mode"));
        }
        Ok(Program {
            modes,
            elements: Vec::new(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn push(&mut self, element: Element) -> Result<&mut Self> {
        if element.max_mode() >= self.modes {
            return Err(Error::IndexOutOfRange {
                index: element.max_mode(),
                modes: self.modes,
            });
        }
        self.elements.push(element);
        Ok(self)
    }

    pub fn with(mut self, element: Element) -> Result<Self> {
        self.push(element)?;
        Ok(self)
    }

    pub fn to_map(&self) -> Result<BogoliubovMap> {
        self.elements
            .iter()
            .try_fold(BogoliubovMap::identity(self.modes)?, |map, el| el.apply(&map))
    }
}
