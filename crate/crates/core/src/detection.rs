//! Realized phase errors of concrete readout schemes.
//!
//! Every scheme reduces to a signal observable with phase-dependent mean and
//! variance; the phase error follows from error propagation,
//! `Var(φ) = Var(signal) / G²` with `G = ∂⟨signal⟩/∂φ` at the operating point.
//! Closed forms valid for `θ = 0` inputs sit next to numeric pipelines built
//! on [`BogoliubovMap`]s, which accept any preparation.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use crate::error::{Error, Result};
use crate::gaussian::{BogoliubovMap, Element, Program, SqueezeParams};
use crate::qcrb::{anti_angle, TwoArmPrep};
use crate::ComplexScalar;

/// Step of the finite-difference stencil (radians).
pub const GAIN_STEP: f64 = 1e-4;

/// Signal statistics and the propagated phase error at an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub mean_signal: f64,
    pub var_signal: f64,
    pub gain: f64,
    pub var_phase: f64,
}

impl DetectionOutcome {
    /// Builds an outcome from an analytic gain.
    pub fn from_gain(mean_signal: f64, var_signal: f64, gain: f64) -> Result<Self> {
        if !(var_signal >= 0.0) {
            return Err(Error::invalid(format!("signal variance {var_signal} is negative")));
        }
        if gain == 0.0 || !gain.is_finite() {
            return Err(Error::ZeroGain { gain, threshold: 0.0 });
        }
        Ok(DetectionOutcome {
            mean_signal,
            var_signal,
            gain,
            var_phase: var_signal / (gain * gain),
        })
    }
}

fn stencil(f: &mut impl FnMut(f64) -> Result<f64>, x: f64, h: f64, fmax: &mut f64) -> Result<f64> {
    let mut eval = |t: f64| -> Result<f64> {
        let v = f(t)?;
        if !v.is_finite() {
            return Err(Error::invalid(format!("signal mean is not finite at phase {t}")));
        }
        *fmax = fmax.max(v.abs());
        Ok(v)
    };
    let (m2, m1, p1, p2) = (eval(x - 2.0 * h)?, eval(x - h)?, eval(x + h)?, eval(x + 2.0 * h)?);
    Ok((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h))
}

/// Error propagation with a five-point central difference at `h = 1e-4`
/// refined by one Richardson step.
///
/// The gain counts as zero when it is within `1e-12 √Var` of zero or below
/// the round-off floor of the stencil.
pub fn error_propagation(
    mut mean_of: impl FnMut(f64) -> Result<f64>,
    mut var_of: impl FnMut(f64) -> Result<f64>,
    phi0: f64,
) -> Result<DetectionOutcome> {
    let mean_signal = mean_of(phi0)?;
    let var_signal = var_of(phi0)?;
    if !(var_signal >= 0.0) || !var_signal.is_finite() {
        return Err(Error::invalid(format!("signal variance {var_signal} is not a finite non-negative number")));
    }
    let mut fmax = mean_signal.abs();
    let coarse = stencil(&mut mean_of, phi0, GAIN_STEP, &mut fmax)?;
    let fine = stencil(&mut mean_of, phi0, 0.5 * GAIN_STEP, &mut fmax)?;
    let gain = (16.0 * fine - coarse) / 15.0;
    let threshold = 1e-12 * var_signal.sqrt() + 64.0 * f64::EPSILON * fmax / GAIN_STEP;
    if gain.abs() <= threshold {
        return Err(Error::ZeroGain { gain, threshold });
    }
    Ok(DetectionOutcome {
        mean_signal,
        var_signal,
        gain,
        var_phase: var_signal / (gain * gain),
    })
}

fn require_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

fn require_non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be non-negative and finite, got {x}")))
    }
}

/// Single-arm homodyne readout against a reference beam of amplitude `α_R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneError {
    /// Error propagation on `n-` at `φ → 0`.
    pub outcome: DetectionOutcome,
    /// `¼(e^{-2r}/α² + 1/α_R² + sinh²r/(α²α_R²))`
    pub closed_form: f64,
    /// `α_R → ∞` limit `e^{-2r}/(4α²)`.
    pub asymptote: f64,
}

/// Homodyne error for an amplitude-antisqueezed probe (`θ = 0`).
pub fn single_arm_homodyne_error(alpha: f64, alpha_r: f64, r: f64) -> Result<HomodyneError> {
    require_positive("alpha", alpha)?;
    require_positive("alpha_R", alpha_r)?;
    let (a2, ar2) = (alpha * alpha, alpha_r * alpha_r);
    let outcome = error_propagation(
        |phi| Ok(-2.0 * alpha * alpha_r * phi.sin()),
        |phi| Ok(a2 + ar2 * ((2.0 * r).cosh() - (2.0 * r).sinh() * (2.0 * phi).cos()) + r.sinh().powi(2)),
        0.0,
    )?;
    Ok(HomodyneError {
        outcome,
        closed_form: 0.25 * ((-2.0 * r).exp() / a2 + 1.0 / ar2 + r.sinh().powi(2) / (a2 * ar2)),
        asymptote: homodyne_asymptote(alpha, r)?,
    })
}

pub fn homodyne_asymptote(alpha: f64, r: f64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    Ok((-2.0 * r).exp() / (4.0 * alpha * alpha))
}

fn single_arm_homodyne_map(alpha: f64, alpha_r: f64, sq: SqueezeParams, phi: f64) -> Result<BogoliubovMap> {
    Program::new(2)?
        .with(Element::Dopa { mode: 0, squeeze: sq })?
        .with(Element::Displace { mode: 0, alpha: ComplexScalar::new(alpha, 0.0) })?
        .with(Element::Phase { mode: 0, phi })?
        .with(Element::Displace { mode: 1, alpha: ComplexScalar::new(0.0, alpha_r) })?
        .with(Element::BeamSplitter { j: 0, k: 1, transmissivity: 0.5 })?
        .to_map()
}

fn difference_stats(map: &BogoliubovMap) -> (f64, f64) {
    let m = map.photon_covariance();
    let c = m.cov();
    (m.mean()[0] - m.mean()[1], c[(0, 0)] + c[(1, 1)] - 2.0 * c[(0, 1)])
}

/// Homodyne readout simulated on the full two-mode network, for any squeeze angle.
pub fn single_arm_homodyne_pipeline(alpha: f64, alpha_r: f64, sq: SqueezeParams) -> Result<DetectionOutcome> {
    require_positive("alpha", alpha)?;
    require_positive("alpha_R", alpha_r)?;
    error_propagation(
        |phi| Ok(difference_stats(&single_arm_homodyne_map(alpha, alpha_r, sq, phi)?).0),
        |phi| Ok(difference_stats(&single_arm_homodyne_map(alpha, alpha_r, sq, phi)?).1),
        0.0,
    )
}

/// Coefficients of `d = Bα + C z + S z†` for the single-arm SU(1,1) chain
/// (probe squeezer `(r, θ)`, phase `φ`, anti-squeezer `R` at the same `θ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su11Coefficients {
    pub b: ComplexScalar,
    pub c: ComplexScalar,
    pub s: ComplexScalar,
}

impl Su11Coefficients {
    pub fn new(r: f64, theta: f64, big_r: f64, phi: f64) -> Self {
        let e = |x: f64| ComplexScalar::from_polar(1.0, x);
        let (ch, sh) = (r.cosh(), r.sinh());
        let (chr, shr) = (big_r.cosh(), big_r.sinh());
        Su11Coefficients {
            b: e(-phi) * chr - e(2.0 * theta + phi) * shr,
            c: e(-phi) * (ch * chr) - e(phi) * (sh * shr),
            s: e(2.0 * theta - phi) * (sh * chr) - e(2.0 * theta + phi) * (ch * shr),
        }
    }

    /// `|C|² − |S|²`, equal to 1 for a valid single-mode map.
    pub fn normalization(&self) -> f64 {
        self.c.norm_sqr() - self.s.norm_sqr()
    }
}

/// Exact mean and variance of the output photon number.
pub fn su11_single_arm_stats(alpha: f64, r: f64, theta: f64, big_r: f64, phi: f64) -> Result<(f64, f64)> {
    require_non_negative("R", big_r)?;
    let k = Su11Coefficients::new(r, theta, big_r, phi);
    let a2 = alpha * alpha;
    let mean = k.b.norm_sqr() * a2 + k.s.norm_sqr();
    let var = (k.b.conj() * k.s + k.b * k.c.conj()).norm_sqr() * a2 + 2.0 * k.c.norm_sqr() * k.s.norm_sqr();
    Ok((mean, var))
}

/// Large-`R` forms of the output mean and variance (valid for `e^{2R} ≫ 1`).
pub fn su11_single_arm_stats_large_r(alpha: f64, r: f64, theta: f64, big_r: f64, phi: f64) -> (f64, f64) {
    let sigma2 = (2.0 * r).cosh() - (2.0 * r).sinh() * (2.0 * phi).cos();
    let carrier = alpha * alpha * (theta + phi).sin().powi(2);
    (
        (2.0 * big_r).exp() * (carrier + sigma2 / 4.0),
        (4.0 * big_r).exp() * sigma2 * (carrier + sigma2 / 8.0),
    )
}

/// Large-`R` gain `e^{2R}[α² sin 2(θ+φ) + ½ sinh 2r sin 2φ]`.
pub fn su11_single_arm_gain_large_r(alpha: f64, r: f64, theta: f64, big_r: f64, phi: f64) -> f64 {
    (2.0 * big_r).exp() * (alpha * alpha * (2.0 * (theta + phi)).sin() + 0.5 * (2.0 * r).sinh() * (2.0 * phi).sin())
}

/// `e^{-2r}/(4α²cos²θ) · (1 + e^{-2r}/(8α²sin²θ))`.
pub fn su11_single_arm_closed_form(alpha: f64, r: f64, theta: f64) -> f64 {
    let e = (-2.0 * r).exp();
    let a2 = alpha * alpha;
    e / (4.0 * a2 * theta.cos().powi(2)) * (1.0 + e / (8.0 * a2 * theta.sin().powi(2)))
}

/// Default squeeze angle `(e^{-2r}/(8α²))^{1/4}`: the geometric midpoint of
/// `e^{-2r}/N ≪ θ² ≪ 1`, which balances the two terms of the closed form.
pub fn su11_default_theta(alpha: f64, r: f64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    Ok(((-2.0 * r).exp() / (8.0 * alpha * alpha)).powf(0.25))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su11SingleArmError {
    /// Error propagation on the exact statistics at `φ → 0`.
    pub outcome: DetectionOutcome,
    pub closed_form: f64,
}

pub fn su11_single_arm_error(alpha: f64, r: f64, theta: f64, big_r: f64) -> Result<Su11SingleArmError> {
    require_non_negative("R", big_r)?;
    let outcome = error_propagation(
        |phi| su11_single_arm_stats(alpha, r, theta, big_r, phi).map(|s| s.0),
        |phi| su11_single_arm_stats(alpha, r, theta, big_r, phi).map(|s| s.1),
        0.0,
    )?;
    Ok(Su11SingleArmError {
        outcome,
        closed_form: su11_single_arm_closed_form(alpha, r, theta),
    })
}

/// The single-arm SU(1,1) chain as a program (one mode).
pub fn su11_single_arm_program(alpha: f64, sq: SqueezeParams, big_r: f64, phi: f64) -> Result<Program> {
    Program::new(1)?
        .with(Element::Dopa { mode: 0, squeeze: sq })?
        .with(Element::Displace { mode: 0, alpha: ComplexScalar::new(alpha, 0.0) })?
        .with(Element::Phase { mode: 0, phi })?
        .with(Element::Dopa {
            mode: 0,
            squeeze: SqueezeParams::new(big_r, anti_angle(sq.theta()))?,
        })
}

/// Double homodyne errors `(Var φ+, Var φ-) = (e^{-2r1}, e^{-2r2})/(4α²)`.
pub fn double_homodyne_error(alpha: f64, r1: f64, r2: f64) -> Result<(f64, f64)> {
    require_positive("alpha", alpha)?;
    let a2 = 4.0 * alpha * alpha;
    Ok(((-2.0 * r1).exp() / a2, (-2.0 * r2).exp() / a2))
}

/// Fields at the two outputs of the second splitter for arm phases `φ1, φ2`.
pub fn two_arm_output_map(prep: &TwoArmPrep, phi1: f64, phi2: f64) -> Result<BogoliubovMap> {
    prep.program()?
        .with(Element::Phase { mode: 0, phi: phi1 })?
        .with(Element::Phase { mode: 1, phi: phi2 })?
        .with(Element::BeamSplitter { j: 0, k: 1, transmissivity: 0.5 })?
        .to_map()
}

/// Double homodyne readout on the exact network: sine quadrature of output
/// 1 against `φ+` and of output 2 against `φ-`, both at `φ± → 0`.
pub fn double_homodyne_pipeline(prep: &TwoArmPrep) -> Result<(DetectionOutcome, DetectionOutcome)> {
    let sine = std::f64::consts::FRAC_PI_2;
    let quad = |mode: usize, phi_p: f64, phi_m: f64| -> Result<(f64, f64)> {
        two_arm_output_map(prep, phi_p + phi_m, phi_p - phi_m)?.quadrature_stats(mode, sine)
    };
    let plus = error_propagation(|p| quad(0, p, 0.0).map(|s| s.0), |p| quad(0, p, 0.0).map(|s| s.1), 0.0)?;
    let minus = error_propagation(|m| quad(1, 0.0, m).map(|s| s.0), |m| quad(1, 0.0, m).map(|s| s.1), 0.0)?;
    Ok((plus, minus))
}

/// Photon-number moments of the two input ports for direct detection.
///
/// `Y = i(a2† a1 − a1† a2)`; covariances are symmetrized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectDetectionMoments {
    pub mean_n1: f64,
    pub mean_n2: f64,
    pub mean_y: f64,
    pub var_n1: f64,
    pub var_n2: f64,
    pub var_y: f64,
    pub cov_n1_n2: f64,
    pub cov_n1_y: f64,
    pub cov_n2_y: f64,
}

impl DirectDetectionMoments {
    pub fn mean_n_minus(&self) -> f64 {
        self.mean_n1 - self.mean_n2
    }

    /// `Var(n±) = Var n1 + Var n2 ± 2 Cov(n1, n2)`.
    pub fn var_n_plus(&self) -> f64 {
        self.var_n1 + self.var_n2 + 2.0 * self.cov_n1_n2
    }

    pub fn var_n_minus(&self) -> f64 {
        self.var_n1 + self.var_n2 - 2.0 * self.cov_n1_n2
    }

    pub fn cov_n_plus_n_minus(&self) -> f64 {
        self.var_n1 - self.var_n2
    }

    /// Moments of a two-mode map of the input ports.
    pub fn from_map(ports: &BogoliubovMap) -> Result<Self> {
        if ports.modes() != 2 {
            return Err(Error::invalid("direct detection needs a two-mode map"));
        }
        // (a1 + i a2)/√2 and (a1 − i a2)/√2 count Y as the difference n_b − n_a
        let rotated = ports.apply_phase(1, -std::f64::consts::FRAC_PI_2)?.apply_beamsplitter(0, 1, 0.5)?;
        let ports_cov = ports.photon_covariance();
        let rot_cov = rotated.photon_covariance();
        let c = rot_cov.cov();
        let cov_y = |j: usize| -> Result<f64> {
            Ok(ports.cross_number_covariance(j, &rotated, 1)? - ports.cross_number_covariance(j, &rotated, 0)?)
        };
        Ok(DirectDetectionMoments {
            mean_n1: ports_cov.mean()[0],
            mean_n2: ports_cov.mean()[1],
            mean_y: rot_cov.mean()[1] - rot_cov.mean()[0],
            var_n1: ports_cov.variance(0),
            var_n2: ports_cov.variance(1),
            var_y: c[(0, 0)] + c[(1, 1)] - 2.0 * c[(0, 1)],
            cov_n1_n2: ports_cov.cov()[(0, 1)],
            cov_n1_y: cov_y(0)?,
            cov_n2_y: cov_y(1)?,
        })
    }

    /// Output statistics `(⟨n-out⟩, Var n-out, Var n+out, Cov(n-out, n+out))` at `φ-`.
    pub fn output_stats(&self, phi_minus: f64) -> (f64, f64, f64, f64) {
        let (c, s) = ((2.0 * phi_minus).cos(), (2.0 * phi_minus).sin());
        let mean = self.mean_n_minus() * c + self.mean_y * s;
        let var_minus = self.var_n_minus() * c * c + self.var_y * s * s + 2.0 * c * s * (self.cov_n1_y - self.cov_n2_y);
        let var_plus = self.var_n_plus();
        let cross = self.cov_n_plus_n_minus() * c + (self.cov_n1_y + self.cov_n2_y) * s;
        (mean, var_minus, var_plus, cross)
    }
}

/// Appendix-style moments for `a1 = α + sq(r1)`, `a2 = sq(r2)` with `θ = 0`.
pub fn double_direct_moments(alpha: f64, r1: f64, r2: f64) -> DirectDetectionMoments {
    let a2 = alpha * alpha;
    DirectDetectionMoments {
        mean_n1: a2 + r1.sinh().powi(2),
        mean_n2: r2.sinh().powi(2),
        mean_y: 0.0,
        var_n1: a2 * (2.0 * r1).exp() + 0.5 * (2.0 * r1).sinh().powi(2),
        var_n2: 0.5 * (2.0 * r2).sinh().powi(2),
        var_y: a2 * (-2.0 * r2).exp() + (r1 - r2).sinh().powi(2),
        cov_n1_n2: 0.0,
        cov_n1_y: 0.0,
        cov_n2_y: 0.0,
    }
}

/// Port map `a1 = α + sq(r1)`, `a2 = sq(r2)` (squeeze angle 0).
pub fn direct_ports_map(alpha: f64, r1: f64, r2: f64) -> Result<BogoliubovMap> {
    TwoArmPrep::new(alpha, 0.0, SqueezeParams::new(r1, 0.0)?, SqueezeParams::new(r2, 0.0)?)?
        .input_program()?
        .to_map()
}

fn check_operating_point(phi_minus: f64) -> Result<(f64, f64)> {
    let (s, c) = (2.0 * phi_minus).sin_cos();
    if s.abs() < 1e-12 {
        return Err(Error::SingularOperatingPoint(format!(
            "sin 2phi- vanishes at phi- = {phi_minus}"
        )));
    }
    Ok((s, c))
}

/// Optimal combination of both outputs, general closed form:
/// `1/(4⟨n-⟩²)[Var Y + 4 Var n1 Var n2/(Var n1 + Var n2) cot² 2φ-]`.
pub fn double_direct_error(alpha: f64, r1: f64, r2: f64, phi_minus: f64) -> Result<DetectionOutcome> {
    let (s, c) = check_operating_point(phi_minus)?;
    let m = double_direct_moments(alpha, r1, r2);
    let n_minus = m.mean_n_minus();
    if n_minus == 0.0 {
        return Err(Error::ZeroGain { gain: 0.0, threshold: 0.0 });
    }
    let harmonic = if m.var_n1 + m.var_n2 > 0.0 {
        4.0 * m.var_n1 * m.var_n2 / (m.var_n1 + m.var_n2)
    } else {
        0.0
    };
    let cot2 = (c / s).powi(2);
    let gain = -2.0 * n_minus * s;
    let var_phase = (m.var_y + harmonic * cot2) / (4.0 * n_minus * n_minus);
    Ok(DetectionOutcome {
        mean_signal: n_minus * c,
        var_signal: var_phase * gain * gain,
        gain,
        var_phase,
    })
}

/// Single dark-port squeezer specialization (`r1 = 0`, `r2 = r`).
pub fn single_squeezer_direct_closed_form(alpha: f64, r: f64, phi_minus: f64) -> Result<f64> {
    let (s, c) = check_operating_point(phi_minus)?;
    let a2 = alpha * alpha;
    let sh2 = (2.0 * r).sinh().powi(2);
    let denom = a2 - r.sinh().powi(2);
    Ok((a2 * (-2.0 * r).exp() + r.sinh().powi(2) + 2.0 * a2 * sh2 / (a2 + sh2) * (c / s).powi(2))
        / (4.0 * denom * denom))
}

/// The published specialization for the non-degenerate amplifier preparation
/// (`−r1 = r2 = r`). It does not follow from [`double_direct_error`]; kept
/// for comparison only.
pub fn su11_prep_direct_closed_form(alpha: f64, r: f64, phi_minus: f64) -> Result<f64> {
    let (s, _) = check_operating_point(phi_minus)?;
    let a2 = alpha * alpha;
    let sh2 = (2.0 * r).sinh().powi(2);
    Ok(((-4.0 * r).exp() + (2.0 * a2 * sh2 + sh2 * sh2) / (a2 * a2 * s * s))
        / (4.0 * (a2 * (-2.0 * r).exp() + r.sinh().powi(2))))
}

/// Error of the optimal combination from raw moments, with the gain taken as
/// `∂⟨n-out⟩/∂φ-` of the supplied mean.
pub fn direct_error_from_output_stats(gain: f64, var_minus: f64, var_plus: f64, cross: f64) -> Result<f64> {
    if gain == 0.0 {
        return Err(Error::ZeroGain { gain, threshold: 0.0 });
    }
    let corrected = if var_plus > 0.0 { var_minus - cross * cross / var_plus } else { var_minus };
    Ok(corrected / (gain * gain))
}

/// Optimal combination evaluated from a moment set, analytic gain.
pub fn double_direct_from_moments(m: &DirectDetectionMoments, phi_minus: f64) -> Result<f64> {
    let (s, c) = check_operating_point(phi_minus)?;
    let (_, var_minus, var_plus, cross) = m.output_stats(phi_minus);
    let gain = 2.0 * (m.mean_y * c - m.mean_n_minus() * s);
    direct_error_from_output_stats(gain, var_minus, var_plus, cross)
}

/// `n-out`-only estimator, without the correlation subtraction.
pub fn double_direct_naive_error(m: &DirectDetectionMoments, phi_minus: f64) -> Result<f64> {
    let (s, c) = check_operating_point(phi_minus)?;
    let (_, var_minus, _, _) = m.output_stats(phi_minus);
    let gain = 2.0 * (m.mean_y * c - m.mean_n_minus() * s);
    direct_error_from_output_stats(gain, var_minus, 0.0, 0.0)
}

/// Full numeric pipeline for any input-port map: both splitters and the arm
/// phases are simulated, the gain comes from the finite-difference stencil,
/// and the outputs are combined optimally.
pub fn double_direct_pipeline(ports: &BogoliubovMap, phi_minus: f64) -> Result<DetectionOutcome> {
    check_operating_point(phi_minus)?;
    if ports.modes() != 2 {
        return Err(Error::invalid("direct detection needs a two-mode map"));
    }
    let outputs = |phi_m: f64| -> Result<BogoliubovMap> {
        ports
            .apply_beamsplitter(0, 1, 0.5)?
            .apply_phase(0, phi_m)?
            .apply_phase(1, -phi_m)?
            .apply_beamsplitter(0, 1, 0.5)
    };
    let corrected_var = |phi_m: f64| -> Result<f64> {
        let m = outputs(phi_m)?.photon_covariance();
        let c = m.cov();
        let var_minus = c[(0, 0)] + c[(1, 1)] - 2.0 * c[(0, 1)];
        let var_plus = c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)];
        let cross = c[(0, 0)] - c[(1, 1)];
        Ok(if var_plus > 0.0 { var_minus - cross * cross / var_plus } else { var_minus })
    };
    error_propagation(
        |phi_m| outputs(phi_m).map(|m| m.mean_photon(0).unwrap() - m.mean_photon(1).unwrap()),
        corrected_var,
        phi_minus,
    )
}

/// Default `φ-` offset for direct detection; cancels the `cot² 2φ-` term.
pub const DEFAULT_PHI_OFFSET: f64 = FRAC_PI_4;

/// Output photon means after a NOPA readout `(R, ϑ)` of the arm fields.
pub fn two_arm_su11_readout_stats(
    prep_map: &BogoliubovMap,
    big_r: f64,
    vartheta: f64,
    phi1: f64,
    phi2: f64,
) -> Result<(f64, f64)> {
    let out = two_arm_su11_readout_map(prep_map, big_r, vartheta, phi1, phi2)?;
    Ok((out.mean_photon(0)?, out.mean_photon(1)?))
}

fn two_arm_su11_readout_map(
    prep_map: &BogoliubovMap,
    big_r: f64,
    vartheta: f64,
    phi1: f64,
    phi2: f64,
) -> Result<BogoliubovMap> {
    if prep_map.modes() != 2 {
        return Err(Error::invalid("two-arm readout needs a two-mode map"));
    }
    require_non_negative("R", big_r)?;
    prep_map
        .apply_phase(0, phi1)?
        .apply_phase(1, phi2)?
        .apply_nopa(0, 1, SqueezeParams::new(big_r, vartheta)?)
}

/// Common-phase error of the two-arm NOPA readout, using the total output
/// photon number as signal at `φ+ = phi_plus`, `φ- = 0`.
pub fn two_arm_su11_readout_error(
    prep_map: &BogoliubovMap,
    big_r: f64,
    vartheta: f64,
    phi_plus: f64,
) -> Result<DetectionOutcome> {
    let stats = |phi_p: f64| -> Result<(f64, f64)> {
        let m = two_arm_su11_readout_map(prep_map, big_r, vartheta, phi_p, phi_p)?.photon_covariance();
        Ok((m.mean().sum(), m.cov().sum()))
    };
    error_propagation(|p| stats(p).map(|s| s.0), |p| stats(p).map(|s| s.1), phi_plus)
}

/// [`two_arm_su11_readout_error`] at the best readout angle among `samples`
/// equally spaced values of `ϑ` in `[0, π)`. Angles with zero gain are skipped.
pub fn two_arm_su11_best_readout(
    prep_map: &BogoliubovMap,
    big_r: f64,
    phi_plus: f64,
    samples: usize,
) -> Result<(f64, DetectionOutcome)> {
    let mut best: Option<(f64, DetectionOutcome)> = None;
    let mut last_err = Error::invalid("no readout angles sampled");
    for i in 0..samples {
        let vartheta = std::f64::consts::PI * i as f64 / samples as f64;
        match two_arm_su11_readout_error(prep_map, big_r, vartheta, phi_plus) {
            Ok(o) if best.is_none_or(|b| o.var_phase < b.1.var_phase) => best = Some((vartheta, o)),
            Ok(_) => {}
            Err(e @ Error::ZeroGain { .. }) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(last_err)
}

/// Quadrature mean of a coherent amplitude along the sine direction, `−√2 α sin φ`.
pub fn sine_quadrature_mean(alpha: f64, phi: f64) -> f64 {
    -SQRT_2 * alpha * phi.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcrb::closed_form_two_arm;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn sq(r: f64, theta: f64) -> SqueezeParams {
        SqueezeParams::new(r, theta).unwrap()
    }

    #[test]
    fn propagation_examples() {
        let o = error_propagation(|p| Ok(p.sin()), |_| Ok(1.0), 0.0).unwrap();
        assert_relative_eq!(o.gain, 1.0, max_relative = 1e-12);
        assert_relative_eq!(o.var_phase, 1.0, max_relative = 1e-12);
        let o = error_propagation(|p| Ok(-2.0 * 2.0 * 10.0 * p.sin()), |_| Ok(1.0), 0.0).unwrap();
        assert_relative_eq!(o.gain, -40.0, max_relative = 1e-12);
        let e = error_propagation(|p| Ok(3.0 + p * p), |_| Ok(1.0), 0.0);
        assert!(matches!(e, Err(Error::ZeroGain { .. })));
    }

    #[test]
    fn homodyne_examples() {
        let h = single_arm_homodyne_error(2.0, 1000.0, 0.5).unwrap();
        assert_relative_eq!(h.closed_form, 0.0229927320445, max_relative = 1e-11);
        assert_relative_eq!(h.outcome.var_phase, h.closed_form, max_relative = 1e-9);
        assert_relative_eq!(h.asymptote, 0.0229924650732, max_relative = 1e-11);
        assert_relative_eq!(homodyne_asymptote(3.0, 0.0).unwrap(), 1.0 / 36.0);
        assert!(single_arm_homodyne_error(0.0, 10.0, 0.5).is_err());
        // analytic gain 2 α α_R cos φ
        assert_relative_eq!(h.outcome.gain.abs(), 2.0 * 2.0 * 1000.0, max_relative = 1e-9);
    }

    #[test]
    fn homodyne_pipeline_matches_closed_form() {
        let h = single_arm_homodyne_error(2.0, 30.0, 0.5).unwrap();
        let p = single_arm_homodyne_pipeline(2.0, 30.0, sq(0.5, 0.0)).unwrap();
        assert_relative_eq!(p.var_phase, h.closed_form, max_relative = 1e-8);
        assert_relative_eq!(p.mean_signal, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn su11_coefficients_and_stats() {
        for (r, th, big_r, phi) in [(0.5, 0.1, 2.0, 0.05), (0.0, 0.0, 0.0, 0.0), (1.0, 1.3, 0.7, -0.4)] {
            assert_relative_eq!(Su11Coefficients::new(r, th, big_r, phi).normalization(), 1.0, max_relative = 1e-10);
        }
        let (m, v) = su11_single_arm_stats(2.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(m, 4.0, max_relative = 1e-14);
        assert_relative_eq!(v, 4.0, max_relative = 1e-14);
        for (th, phi) in [(0.0, 0.0), (0.7, 0.2)] {
            let (m, _) = su11_single_arm_stats(0.0, 0.0, th, 0.5, phi).unwrap();
            assert_relative_eq!(m, 0.271540317408, max_relative = 1e-11);
        }
        let exact = su11_single_arm_stats(2.0, 0.5, 0.1, 2.0, 0.05).unwrap();
        assert_relative_eq!(exact.0, 9.56265867297, max_relative = 1e-10);
        assert_relative_eq!(exact.1, 151.469386084, max_relative = 1e-10);
        // at R = 2 the neglected e^{-2R} terms still move the mean by ~4%
        let approx = su11_single_arm_stats_large_r(2.0, 0.5, 0.1, 2.0, 0.05);
        assert_relative_eq!(approx.0, 9.97861231509, max_relative = 1e-10);
        assert_relative_eq!(approx.1, 151.573391091, max_relative = 1e-10);
        assert!((exact.1 - approx.1).abs() / exact.1 < 2e-2);
    }

    #[test]
    fn su11_stats_match_map() {
        for (alpha, r, th, big_r, phi) in [(2.0, 0.5, 0.1, 2.0, 0.05), (1.0, 0.3, 1.2, 0.4, -0.3)] {
            let map = su11_single_arm_program(alpha, sq(r, th), big_r, phi).unwrap().to_map().unwrap();
            let (m, v) = su11_single_arm_stats(alpha, r, th, big_r, phi).unwrap();
            assert_relative_eq!(map.mean_photon(0).unwrap(), m, max_relative = 1e-12);
            assert_relative_eq!(map.photon_covariance().variance(0), v, max_relative = 1e-12);
        }
    }

    #[test]
    fn su11_large_r_gap_shrinks() {
        let gap = |big_r: f64| {
            let e = su11_single_arm_stats(2.0, 0.5, 0.1, big_r, 0.05).unwrap();
            let a = su11_single_arm_stats_large_r(2.0, 0.5, 0.1, big_r, 0.05);
            ((e.0 - a.0) / e.0).abs().max(((e.1 - a.1) / e.1).abs())
        };
        assert!(gap(1.0) > gap(2.0) && gap(2.0) > gap(3.0));
    }

    #[test]
    fn su11_error_examples() {
        let theta = su11_default_theta(10.0, 1.0).unwrap();
        assert_relative_eq!(theta, 0.114046053748, max_relative = 1e-11);
        let e = su11_single_arm_error(10.0, 1.0, theta, 2.0).unwrap();
        let target = (-2.0f64).exp() / 400.0;
        assert!((e.outcome.var_phase - target).abs() / target < 0.05, "{}", e.outcome.var_phase);
        assert_relative_eq!(su11_single_arm_closed_form(10.0, 0.0, 0.3), 0.00277842922633, max_relative = 1e-11);
        assert!(matches!(su11_single_arm_error(10.0, 1.0, 0.0, 2.0), Err(Error::ZeroGain { .. })));
    }

    #[test]
    fn su11_gain_matches_large_r_form() {
        let (alpha, r, th, big_r) = (3.0, 0.4, 0.3, 6.0);
        let e = su11_single_arm_error(alpha, r, th, big_r).unwrap();
        let g = su11_single_arm_gain_large_r(alpha, r, th, big_r, 0.0);
        assert!((e.outcome.gain - g).abs() / g.abs() < 1e-4);
    }

    #[test]
    fn double_homodyne_examples() {
        let (p, m) = double_homodyne_error(2.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(p, 0.0625);
        assert_relative_eq!(m, 0.0229924650732, max_relative = 1e-11);
        let (p, m) = double_homodyne_error(3.0, 0.0, 0.0).unwrap();
        assert_eq!(p, m);
        assert!(double_homodyne_error(0.0, 0.1, 0.1).is_err());

        let (_, qcrb) = closed_form_two_arm(&TwoArmPrep::su11(100.0, 0.0, 0.5, 0.0).unwrap()).unwrap();
        let (_, m) = double_homodyne_error(100.0, -0.5, 0.5).unwrap();
        let ratio = m / qcrb.variance(1);
        assert!((1.0 - 1e-12..=1.0 + 1e-3).contains(&ratio), "{ratio}");
    }

    #[test]
    fn double_homodyne_pipeline_matches() {
        let prep = TwoArmPrep::new(2.0, 0.0, sq(0.3, 0.0), sq(0.5, 0.0)).unwrap();
        let (p, m) = double_homodyne_pipeline(&prep).unwrap();
        let (cp, cm) = double_homodyne_error(2.0, 0.3, 0.5).unwrap();
        assert_relative_eq!(p.var_phase, cp, max_relative = 1e-8);
        assert_relative_eq!(m.var_phase, cm, max_relative = 1e-8);
    }

    #[test]
    fn direct_moment_examples() {
        let m = double_direct_moments(2.0, 0.0, 0.0);
        assert_eq!((m.var_y, m.var_n1, m.var_n2), (4.0, 4.0, 0.0));
        assert_relative_eq!(double_direct_moments(2.0, 0.0, 0.5).var_y, 1.74305808209, max_relative = 1e-11);
        assert_relative_eq!(double_direct_moments(2.0, 0.3, 0.5).mean_n_minus(), 3.82119229171, max_relative = 1e-11);
    }

    #[test]
    fn direct_moments_match_maps() {
        for (alpha, r1, r2) in [(2.0, 0.0, 0.5), (2.0, 0.3, 0.5), (1.5, -0.4, 0.6), (0.0, 0.2, -0.1)] {
            let a = double_direct_moments(alpha, r1, r2);
            let b = DirectDetectionMoments::from_map(&direct_ports_map(alpha, r1, r2).unwrap()).unwrap();
            let pairs = [
                (a.mean_n1, b.mean_n1),
                (a.mean_n2, b.mean_n2),
                (a.mean_y, b.mean_y),
                (a.var_n1, b.var_n1),
                (a.var_n2, b.var_n2),
                (a.var_y, b.var_y),
                (a.cov_n1_n2, b.cov_n1_n2),
                (a.cov_n1_y, b.cov_n1_y),
                (a.cov_n2_y, b.cov_n2_y),
            ];
            for (x, y) in pairs {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn direct_error_examples() {
        let e = double_direct_error(2.0, 0.0, 0.5, FRAC_PI_4).unwrap();
        assert_relative_eq!(e.var_phase, 0.0313467821049, max_relative = 1e-11);
        assert_relative_eq!(single_squeezer_direct_closed_form(2.0, 0.5, FRAC_PI_4).unwrap(), e.var_phase, max_relative = 1e-12);
        assert_relative_eq!(su11_prep_direct_closed_form(2.0, 0.5, FRAC_PI_4).unwrap(), 0.135551802519, max_relative = 1e-11);
        assert_relative_eq!(double_direct_error(2.0, -0.5, 0.5, FRAC_PI_4).unwrap().var_phase, 0.0445721189098, max_relative = 1e-11);
        assert!(matches!(double_direct_error(2.0, 0.0, 0.5, 0.0), Err(Error::SingularOperatingPoint(_))));
        assert!(matches!(double_direct_error(2.0, 0.0, 0.5, FRAC_PI_2), Err(Error::SingularOperatingPoint(_))));
        assert!(matches!(double_direct_error(0.0, 0.5, 0.5, FRAC_PI_4), Err(Error::ZeroGain { .. })));
    }

    #[test]
    fn direct_pipeline_matches_general_formula() {
        for (alpha, r1, r2, phi) in [(2.0, 0.0, 0.5, FRAC_PI_4), (2.0, -0.5, 0.5, FRAC_PI_4), (1.5, 0.3, 0.4, 0.6)] {
            let general = double_direct_error(alpha, r1, r2, phi).unwrap().var_phase;
            let m = DirectDetectionMoments::from_map(&direct_ports_map(alpha, r1, r2).unwrap()).unwrap();
            assert_relative_eq!(double_direct_from_moments(&m, phi).unwrap(), general, max_relative = 1e-10);
            let pipe = double_direct_pipeline(&direct_ports_map(alpha, r1, r2).unwrap(), phi).unwrap();
            assert_relative_eq!(pipe.var_phase, general, max_relative = 1e-8);
        }
    }

    #[test]
    fn two_arm_readout_examples() {
        let prep = TwoArmPrep::new(2.0, 0.3, sq(0.2, 0.1), sq(0.5, 0.0)).unwrap().arm_map().unwrap();
        let base = two_arm_su11_readout_stats(&prep, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(base.0, prep.mean_photon(0).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(base.1, prep.mean_photon(1).unwrap(), max_relative = 1e-14);

        let vac = BogoliubovMap::identity(2).unwrap();
        let (m1, m2) = two_arm_su11_readout_stats(&vac, 0.5, 0.3, 0.1, 0.2).unwrap();
        assert_relative_eq!(m1, 0.271540317408, max_relative = 1e-11);
        assert_relative_eq!(m2, 0.271540317408, max_relative = 1e-11);
    }

    #[test]
    fn two_arm_readout_error_respects_bound() {
        let prep = TwoArmPrep::su11(20.0, 0.2, 0.8, 0.0).unwrap();
        let (_, bound) = crate::qcrb::pipeline_two_arm(&prep).unwrap();
        let map = prep.arm_map().unwrap();
        // symmetric angles put φ+ = 0 at an extremum of the signal
        assert!(matches!(two_arm_su11_readout_error(&map, 1.5, 0.0, 0.0), Err(Error::ZeroGain { .. })));
        let (vt, best) = two_arm_su11_best_readout(&map, 1.5, 0.0, 64).unwrap();
        let fixed = two_arm_su11_readout_error(&map, 1.5, FRAC_PI_4, 0.05).unwrap();
        assert!(best.var_phase >= bound.variance(0) - 1e-9);
        assert!(best.var_phase <= 1.15 * bound.variance(0), "{} vs {}", best.var_phase, bound.variance(0));
        assert!(fixed.var_phase >= best.var_phase * (1.0 - 1e-3));
        assert!((0.0..std::f64::consts::PI).contains(&vt));
    }

    proptest! {
        #[test]
        fn optimal_combination_beats_naive(alpha in 0.5..5.0f64, r1 in -0.8..0.8f64, r2 in -0.8..0.8f64, phi in 0.1..1.4f64) {
            prop_assume!((r1 - r2).abs() > 1e-3);
            let m = double_direct_moments(alpha, r1, r2);
            prop_assume!(m.mean_n_minus().abs() > 1e-3);
            let best = double_direct_error(alpha, r1, r2, phi).unwrap().var_phase;
            let naive = double_direct_naive_error(&m, phi).unwrap();
            prop_assert!(best <= naive * (1.0 + 1e-12));
        }

        #[test]
        fn readout_blind_to_differential_phase(phi_p in -1.0..1.0f64, big_r in 0.0..1.5f64, vt in 0.0..3.2f64) {
            let prep = TwoArmPrep::new(1.5, 0.2, sq(0.3, 0.4), sq(-0.5, 0.1)).unwrap().arm_map().unwrap();
            let base = two_arm_su11_readout_stats(&prep, big_r, vt, phi_p, phi_p).unwrap();
            for k in 1..5 {
                let phi_m = 0.3 * k as f64;
                let s = two_arm_su11_readout_stats(&prep, big_r, vt, phi_p + phi_m, phi_p - phi_m).unwrap();
                prop_assert!((s.0 - base.0).abs() < 1e-12 * base.0.max(1.0));
                prop_assert!((s.1 - base.1).abs() < 1e-12 * base.1.max(1.0));
            }
        }
    }
}
