//! Quantum Fisher information and Cramér–Rao bounds for phase estimation.
//!
//! For a pure probe and commuting generators `N_j` the Fisher matrix is
//! `A = 4 Cov(N)`, and any unbiased estimator obeys `Cov(phi) >= A^{-1}`.
//!
//! Two-arm results are usually quoted in the common/differential basis with
//! `N± = N1 ± N2` and `phi± = (phi1 ± phi2)/2`, so `N1 phi1 + N2 phi2 =
//! N+ phi+ + N- phi-`. Index 0 of a ± quantity is `+`, index 1 is `−`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{check_distinct, BogoliubovMap, Element, MomentSet, Program, SqueezeParams};
use crate::ComplexScalar;

/// Fisher information matrix `A` (4 × photon-number covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    a: DMatrix<f64>,
}

impl FisherMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::invalid(format!("Fisher matrix must be square and non-empty, got {:?}", a.shape())));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("Fisher matrix entries must be finite"));
        }
        let scale = a.amax().max(1.0);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("Fisher matrix is not symmetric"));
        }
        let min_eig = a.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::invalid(format!("Fisher matrix is not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        Ok(FisherMatrix { a })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// `A = 4 Cov(N)` restricted to `arms`.
pub fn fisher_matrix(moments: &MomentSet, arms: &[usize]) -> Result<FisherMatrix> {
    check_distinct(arms, moments.modes())?;
    let sub = moments.select(arms)?;
    FisherMatrix::new(sub.cov() * 4.0)
}

const PM: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, -1.0]];

fn transform(m: &MomentSet, t: [[f64; 2]; 2]) -> Result<MomentSet> {
    if m.modes() != 2 {
        return Err(Error::invalid(format!("expected moments over exactly 2 arms, got {}", m.modes())));
    }
    let t = DMatrix::from_row_slice(2, 2, &[t[0][0], t[0][1], t[1][0], t[1][1]]);
    let mut cov = &t * m.cov() * t.transpose();
    let sym = cov.transpose();
    cov = (cov + sym) * 0.5;
    MomentSet::new(&t * m.mean(), cov)
}

/// Arm moments `(N1, N2)` to `(N+, N-)`.
pub fn to_plusminus_basis(m: &MomentSet) -> Result<MomentSet> {
    transform(m, PM)
}

/// Inverse of [`to_plusminus_basis`]: `N1,2 = (N+ ± N-)/2`.
pub fn from_plusminus_basis(m: &MomentSet) -> Result<MomentSet> {
    transform(m, [[0.5, 0.5], [0.5, -0.5]])
}

/// Lower bound on the phase-estimator covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBound {
    var_phi: DMatrix<f64>,
    well_posed: bool,
}

impl PhaseBound {
    pub fn var_phi(&self) -> &DMatrix<f64> {
        &self.var_phi
    }

    pub fn well_posed(&self) -> bool {
        self.well_posed
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.var_phi[(j, j)]
    }

    /// For a bound over arm phases, the bound over `(phi+, phi-)`.
    pub fn to_plusminus(&self) -> Result<PhaseBound> {
        if self.var_phi.nrows() != 2 {
            return Err(Error::invalid("basis change needs a 2x2 bound"));
        }
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, -0.5]);
        Ok(PhaseBound {
            var_phi: transform_bound(&self.var_phi, &p),
            well_posed: self.well_posed,
        })
    }

    /// For a bound over `(phi+, phi-)`, the bound over arm phases.
    pub fn from_plusminus(&self) -> Result<PhaseBound> {
        if self.var_phi.nrows() != 2 {
            return Err(Error::invalid("basis change needs a 2x2 bound"));
        }
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        Ok(PhaseBound {
            var_phi: transform_bound(&self.var_phi, &t),
            well_posed: self.well_posed,
        })
    }
}

fn transform_bound(b: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    if b.iter().all(|x| x.is_finite()) {
        p * b * p.transpose()
    } else {
        // infinite directions do not mix linearly; keep the conservative answer
        DMatrix::from_fn(2, 2, |j, k| if j == k { f64::INFINITY } else { 0.0 })
    }
}

/// `A^{-1}`, with the explicit determinant formula for `2×2`.
///
/// A singular `A` has an unmeasurable phase direction: the result is flagged
/// not well posed, variances with a component along that direction are
/// `+inf`, and the remaining entries come from the pseudo-inverse.
pub fn qcrb_bound(fisher: &FisherMatrix) -> PhaseBound {
    let a = fisher.matrix();
    let n = a.nrows();
    let scale = a.amax();
    let eig = a.clone().symmetric_eigen();
    let tol = 1e-12 * scale;
    let singular = scale == 0.0 || eig.eigenvalues.iter().any(|&l| l <= tol);
    if !singular {
        let var_phi = if n == 1 {
            DMatrix::from_element(1, 1, 1.0 / a[(0, 0)])
        } else if n == 2 {
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            DMatrix::from_row_slice(2, 2, &[a[(1, 1)] / det, -a[(0, 1)] / det, -a[(1, 0)] / det, a[(0, 0)] / det])
        } else {
            match a.clone().lu().try_inverse() {
                Some(inv) => inv,
                None => return singular_bound(a, &eig, tol),
            }
        };
        return PhaseBound {
            var_phi,
            well_posed: true,
        };
    }
    singular_bound(a, &eig, tol)
}

fn singular_bound(a: &DMatrix<f64>, eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, tol: f64) -> PhaseBound {
    let n = a.nrows();
    let mut pinv = DMatrix::zeros(n, n);
    let mut null_weight = vec![0.0; n];
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        if l > tol && l > 0.0 {
            pinv += (v * v.transpose()) / l;
        } else {
            for j in 0..n {
                null_weight[j] += v[j] * v[j];
            }
        }
    }
    let infinite: Vec<bool> = null_weight.iter().map(|&w| w > 1e-12).collect();
    let var_phi = DMatrix::from_fn(n, n, |j, k| {
        if infinite[j] || infinite[k] {
            if j == k {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            pinv[(j, k)]
        }
    });
    PhaseBound {
        var_phi,
        well_posed: false,
    }
}

/// `Var(N)` of the squeezed coherent probe `α + z cosh r + z† e^{2iθ} sinh r`.
pub fn single_arm_number_variance(alpha: f64, sq: SqueezeParams) -> f64 {
    let (r, th) = (sq.r(), sq.theta());
    alpha * alpha * ((2.0 * r).cosh() + (2.0 * r).sinh() * (2.0 * th).cos()) + 0.5 * (2.0 * r).sinh().powi(2)
}

/// Single-arm bound `1/(4 Var N)`.
pub fn closed_form_single_arm(alpha: f64, sq: SqueezeParams) -> Result<PhaseBound> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    let fisher = FisherMatrix::new(DMatrix::from_element(1, 1, 4.0 * single_arm_number_variance(alpha, sq)))?;
    Ok(qcrb_bound(&fisher))
}

/// Two-arm preparation: carrier `α` split as `α1 = α cos ζ`, `α2 = iα sin ζ`
/// at the input ports, squeezers `sq1`, `sq2` on those ports, then a balanced
/// beamsplitter whose outputs are the arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoArmPrep {
    pub alpha: f64,
    pub zeta: f64,
    pub sq1: SqueezeParams,
    pub sq2: SqueezeParams,
}

impl TwoArmPrep {
    pub fn new(alpha: f64, zeta: f64, sq1: SqueezeParams, sq2: SqueezeParams) -> Result<Self> {
        if !alpha.is_finite() || !zeta.is_finite() {
            return Err(Error::invalid("alpha and zeta must be finite"));
        }
        Ok(TwoArmPrep { alpha, zeta, sq1, sq2 })
    }

    /// Non-degenerate amplifier preparation, i.e. `−r1 = r2 = r`, `θ1 = θ2 = θ`.
    pub fn su11(alpha: f64, zeta: f64, r: f64, theta: f64) -> Result<Self> {
        Self::new(alpha, zeta, SqueezeParams::new(-r, theta)?, SqueezeParams::new(r, theta)?)
    }

    pub fn port_amplitudes(&self) -> [ComplexScalar; 2] {
        [
            ComplexScalar::new(self.alpha * self.zeta.cos(), 0.0),
            ComplexScalar::new(0.0, self.alpha * self.zeta.sin()),
        ]
    }

    /// Squeezed coherent states at the two input ports (before the splitter).
    pub fn input_program(&self) -> Result<Program> {
        let [a1, a2] = self.port_amplitudes();
        Program::new(2)?
            .with(Element::Dopa { mode: 0, squeeze: self.sq1 })?
            .with(Element::Dopa { mode: 1, squeeze: self.sq2 })?
            .with(Element::Displace { mode: 0, alpha: a1 })?
            .with(Element::Displace { mode: 1, alpha: a2 })
    }

    /// Fields at the phase-shifting objects (after the input splitter).
    pub fn program(&self) -> Result<Program> {
        self.input_program()?.with(Element::BeamSplitter {
            j: 0,
            k: 1,
            transmissivity: 0.5,
        })
    }

    pub fn arm_map(&self) -> Result<BogoliubovMap> {
        self.program()?.to_map()
    }

    pub fn total_mean_photons(&self) -> f64 {
        self.alpha * self.alpha + self.sq1.r().sinh().powi(2) + self.sq2.r().sinh().powi(2)
    }
}

/// `(N+, N-)` moments of a two-arm preparation in closed form.
pub fn two_arm_plusminus_moments(prep: &TwoArmPrep) -> Result<MomentSet> {
    let (r1, t1) = (prep.sq1.r(), prep.sq1.theta());
    let (r2, t2) = (prep.sq2.r(), prep.sq2.theta());
    let a2 = prep.alpha * prep.alpha;
    let (c2, s2) = (prep.zeta.cos().powi(2), prep.zeta.sin().powi(2));
    let ch = |r: f64| (2.0 * r).cosh();
    let sh = |r: f64| (2.0 * r).sinh();
    let var_plus = a2 * ((ch(r1) + sh(r1) * (2.0 * t1).cos()) * c2 + (ch(r2) - sh(r2) * (2.0 * t2).cos()) * s2)
        + 0.5 * (sh(r1).powi(2) + sh(r2).powi(2));
    let var_minus = a2 * ((ch(r1) - sh(r1) * (2.0 * t1).cos()) * s2 + (ch(r2) + sh(r2) * (2.0 * t2).cos()) * c2)
        + (r1 + r2).sinh().powi(2) * (t1 - t2).cos().powi(2)
        + (r1 - r2).sinh().powi(2) * (t1 - t2).sin().powi(2);
    let cross = 0.5 * a2 * (sh(r1) * (2.0 * t1).sin() + sh(r2) * (2.0 * t2).sin()) * (2.0 * prep.zeta).sin();
    let mean = DVector::from_vec(vec![prep.total_mean_photons(), 0.0]);
    MomentSet::new(mean, DMatrix::from_row_slice(2, 2, &[var_plus, cross, cross, var_minus]))
}

/// Closed-form `(N+, N-)` moments and the ± bound of a two-arm preparation.
pub fn closed_form_two_arm(prep: &TwoArmPrep) -> Result<(MomentSet, PhaseBound)> {
    let moments = two_arm_plusminus_moments(prep)?;
    let bound = qcrb_bound(&fisher_matrix(&moments, &[0, 1])?);
    Ok((moments, bound))
}

/// The same quantities through the generic Bogoliubov pipeline.
pub fn pipeline_two_arm(prep: &TwoArmPrep) -> Result<(MomentSet, PhaseBound)> {
    let arms = prep.arm_map()?.photon_covariance();
    let moments = to_plusminus_basis(&arms)?;
    let bound = qcrb_bound(&fisher_matrix(&moments, &[0, 1])?);
    Ok((moments, bound))
}

/// ± bound of the non-degenerate amplifier preparation (independent of ζ).
pub fn su11_prep_bounds(alpha: f64, r: f64, theta: f64) -> Result<PhaseBound> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("r must be non-negative, got {r}")));
    }
    let a2 = alpha * alpha;
    let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let var_plus = a2 * (ch - sh * (2.0 * theta).cos()) + sh * sh;
    let var_minus = a2 * (ch + sh * (2.0 * theta).cos());
    let fisher = FisherMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0 * var_plus, 0.0, 0.0, 4.0 * var_minus]))?;
    Ok(qcrb_bound(&fisher))
}

/// How an unknown phase `φ` enters the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `φ` in arm 1 only: `φ+ = φ- = φ/2`.
    Asymmetric,
    /// `±φ/2` in the two arms: `φ+ = 0`, `φ- = φ/2`.
    Antisymmetric,
}

/// Error of a single phase `φ` from a ± bound whose channels are uncorrelated.
pub fn individual_phase_error(bound: &PhaseBound, layout: Layout) -> Result<f64> {
    let b = bound.var_phi();
    if b.shape() != (2, 2) {
        return Err(Error::invalid("individual phase error needs a 2x2 bound"));
    }
    let (vp, vm, corr) = (b[(0, 0)], b[(1, 1)], b[(0, 1)]);
    let scale = if vp.is_finite() && vm.is_finite() { (vp * vm).sqrt() } else { 0.0 };
    if corr.abs() > 1e-8 * scale {
        return Err(Error::PreconditionViolation(format!(
            "phi+/phi- bound correlation {corr:e} is not negligible"
        )));
    }
    match layout {
        Layout::Asymmetric => {
            let info = 1.0 / vp + 1.0 / vm;
            if info == 0.0 {
                Ok(f64::INFINITY)
            } else {
                Ok(4.0 / info)
            }
        }
        Layout::Antisymmetric => Ok(4.0 * vm),
    }
}

/// Coherent-state (shot-noise) variance of `φ` for a layout at `n_total`
/// photons in both arms: `1/N` antisymmetric, `1/(2N)` asymmetric.
pub fn snl_variance(layout: Layout, n_total: f64) -> Result<f64> {
    if !(n_total > 0.0) {
        return Err(Error::invalid(format!("photon number must be positive, got {n_total}")));
    }
    Ok(match layout {
        Layout::Asymmetric => 0.5 / n_total,
        Layout::Antisymmetric => 1.0 / n_total,
    })
}

/// Reference phase uncertainties (standard deviations, radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceLimits {
    /// `1/(2√N)`
    pub snl: f64,
    /// `e^{-r}/(2√N)`
    pub sqz: f64,
    /// `1/N`
    pub hl: f64,
}

pub fn reference_limits(n: f64, r: f64) -> Result<ReferenceLimits> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::invalid(format!("photon number must be positive, got {n}")));
    }
    if !r.is_finite() {
        return Err(Error::invalid("r must be finite"));
    }
    let snl = 0.5 / n.sqrt();
    Ok(ReferenceLimits {
        snl,
        sqz: (-r).exp() * snl,
        hl: 1.0 / n,
    })
}

/// Squeeze angle that turns a DOPA into the anti-squeezer of `(r, θ)`.
pub(crate) fn anti_angle(theta: f64) -> f64 {
    theta + FRAC_PI_2
}
