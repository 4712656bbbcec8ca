//! Evaluation of sweep points into report rows.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use squeezelab_core::detection::{
    double_direct_pipeline, double_homodyne_pipeline, single_arm_homodyne_pipeline, su11_default_theta,
    su11_single_arm_error, two_arm_su11_best_readout, two_arm_su11_readout_error, DEFAULT_PHI_OFFSET,
};
use squeezelab_core::fock::{compare_with_map, program_cutoff, OracleComparison};
use squeezelab_core::qcrb::{closed_form_single_arm, fisher_matrix, pipeline_two_arm, reference_limits, TwoArmPrep};
use squeezelab_core::{par, ComplexScalar, Element, Program, Result, SqueezeParams};

use crate::config::{Detection, LoadedConfig, ScenarioConfig, Topology};

/// Absolute slack of the Cramér–Rao ordering check.
pub const CR_SLACK: f64 = 1e-9;

/// Readout angles tried when `vartheta` is omitted.
pub const READOUT_ANGLE_SAMPLES: usize = 64;

/// One sweep point. Variances in rad²; `None` fields are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub qcrb_var_minus: f64,
    pub qcrb_var_plus: Option<f64>,
    pub realized_var: Option<f64>,
    pub snl: f64,
    pub sqz: f64,
    pub hl: f64,
    pub oracle_gap: Option<f64>,
    pub well_posed: bool,
    /// Single-parameter bound `1/A_jj` of the channel the readout measures.
    pub cr_floor: Option<f64>,
    /// Why `realized_var` is missing, when the readout failed at this point.
    pub flag: Option<String>,
}

impl Row {
    pub fn violates_cramer_rao(&self) -> bool {
        match (self.realized_var, self.cr_floor) {
            (Some(v), Some(floor)) => v < floor - CR_SLACK,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub rows: Vec<Row>,
}

enum Prep {
    Single { alpha: f64, sq: SqueezeParams },
    Two { prep: TwoArmPrep, su11: Option<SqueezeParams> },
}

fn resolve(c: &ScenarioConfig) -> Result<Prep> {
    let p = &c.preparation;
    match c.topology {
        Topology::SingleArm => {
            let spec = p.sq1.unwrap_or_default();
            let theta = match (c.detection, spec.theta) {
                (Detection::Su11Readout, None) if p.alpha > 0.0 => su11_default_theta(p.alpha, spec.factor())?,
                _ => 0.0,
            };
            Ok(Prep::Single {
                alpha: p.alpha,
                sq: spec.params(theta)?,
            })
        }
        Topology::TwoArm => {
            let zeta = p.zeta.unwrap_or(0.0);
            if let Some(s) = p.su11_prep {
                let theta = s.theta.unwrap_or(0.0);
                Ok(Prep::Two {
                    prep: TwoArmPrep::su11(p.alpha, zeta, s.factor(), theta)?,
                    su11: Some(SqueezeParams::new(s.factor(), theta)?),
                })
            } else {
                let sq1 = p.sq1.unwrap_or_default().params(0.0)?;
                let sq2 = p.sq2.unwrap_or_default().params(0.0)?;
                Ok(Prep::Two {
                    prep: TwoArmPrep::new(p.alpha, zeta, sq1, sq2)?,
                    su11: None,
                })
            }
        }
    }
}

/// Program of the state at the phase-shifting objects, as the oracle builds it.
///
/// The non-degenerate amplifier preparation is built from a single two-mode
/// squeezer at `θ + π/2` followed by the split carrier, not from the
/// equivalent pair of single-mode squeezers.
pub fn oracle_program(c: &ScenarioConfig) -> Result<Program> {
    match resolve(c)? {
        Prep::Single { alpha, sq } => Program::new(1)?
            .with(Element::Dopa { mode: 0, squeeze: sq })?
            .with(Element::Displace {
                mode: 0,
                alpha: ComplexScalar::new(alpha, 0.0),
            }),
        Prep::Two { prep, su11: Some(s) } => {
            let [a1, a2] = prep.port_amplitudes();
            Program::new(2)?
                .with(Element::Nopa {
                    j: 0,
                    k: 1,
                    squeeze: SqueezeParams::new(s.r(), s.theta() + FRAC_PI_2)?,
                })?
                .with(Element::Displace { mode: 0, alpha: (a1 + a2) / SQRT_2 })?
                .with(Element::Displace { mode: 1, alpha: (a1 - a2) / SQRT_2 })
        }
        Prep::Two { prep, su11: None } => prep.program(),
    }
}

/// Oracle comparison of one point at the configured or recommended cutoff.
pub fn oracle_comparison(c: &ScenarioConfig) -> Result<(usize, OracleComparison)> {
    let program = oracle_program(c)?;
    let cutoff = c.oracle.cutoff.unwrap_or_else(|| program_cutoff(&program));
    Ok((cutoff, compare_with_map(&program, cutoff)?))
}

/// Reference variances; a state without photons carries no phase information.
fn limits(n: f64, r: f64) -> Result<(f64, f64, f64)> {
    if n == 0.0 {
        return Ok((f64::INFINITY, f64::INFINITY, f64::INFINITY));
    }
    let l = reference_limits(n, r)?;
    Ok((l.snl * l.snl, l.sqz * l.sqz, l.hl * l.hl))
}

/// Evaluates one sweep point.
pub fn evaluate(sweep_value: f64, c: &ScenarioConfig) -> Result<Row> {
    let dp = &c.detection_params;
    let oracle_gap = if c.oracle.enabled {
        Some(oracle_comparison(c)?.1.max_gap())
    } else {
        None
    };
    let mut flag = None;
    let mut keep = |r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            flag = Some(e.to_string());
            None
        }
    };
    match resolve(c)? {
        Prep::Single { alpha, sq } => {
            let bound = closed_form_single_arm(alpha, sq)?;
            let var = bound.variance(0);
            let realized = match c.detection {
                Detection::Homodyne => {
                    keep(single_arm_homodyne_pipeline(alpha, dp.alpha_r.unwrap_or(f64::NAN), sq).map(|o| o.var_phase))
                }
                Detection::Su11Readout => keep(
                    su11_single_arm_error(alpha, sq.r(), sq.theta(), dp.big_r.unwrap_or(f64::NAN))
                        .map(|e| e.outcome.var_phase),
                ),
                _ => None,
            };
            let (snl, sqz, hl) = limits(alpha * alpha + sq.r().sinh().powi(2), sq.r())?;
            Ok(Row {
                sweep_value,
                qcrb_var_minus: var,
                qcrb_var_plus: None,
                realized_var: realized,
                snl,
                sqz,
                hl,
                oracle_gap,
                well_posed: bound.well_posed(),
                cr_floor: Some(var),
                flag,
            })
        }
        Prep::Two { prep, su11 } => {
            let (moments, bound) = pipeline_two_arm(&prep)?;
            let fisher = fisher_matrix(&moments, &[0, 1])?;
            let floor = |j: usize| 1.0 / fisher.matrix()[(j, j)];
            let (realized, channel) = match c.detection {
                Detection::DoubleHomodyne => (keep(double_homodyne_pipeline(&prep).map(|o| o.1.var_phase)), 1),
                Detection::DoubleDirect => {
                    let phi = dp.phi_offset.unwrap_or(DEFAULT_PHI_OFFSET);
                    let ports = prep.input_program()?.to_map()?;
                    (keep(double_direct_pipeline(&ports, phi).map(|o| o.var_phase)), 1)
                }
                Detection::Su11TwoArmReadout => {
                    let map = prep.arm_map()?;
                    let big_r = dp.big_r.unwrap_or(f64::NAN);
                    let phi = dp.phi_offset.unwrap_or(0.0);
                    let out = match dp.vartheta {
                        Some(vt) => two_arm_su11_readout_error(&map, big_r, vt, phi),
                        None => two_arm_su11_best_readout(&map, big_r, phi, READOUT_ANGLE_SAMPLES).map(|b| b.1),
                    };
                    (keep(out.map(|o| o.var_phase)), 0)
                }
                _ => (None, 1),
            };
            let r = match su11 {
                Some(s) => s.r(),
                None => prep.sq2.r(),
            };
            let (snl, sqz, hl) = limits(prep.total_mean_photons(), r)?;
            Ok(Row {
                sweep_value,
                qcrb_var_minus: bound.variance(1),
                qcrb_var_plus: Some(bound.variance(0)),
                realized_var: realized,
                snl,
                sqz,
                hl,
                oracle_gap,
                well_posed: bound.well_posed(),
                cr_floor: realized.map(|_| floor(channel)),
                flag,
            })
        }
    }
}

/// Evaluates every sweep point, in parallel when enabled; rows keep sweep order.
pub fn run_scenario(loaded: &LoadedConfig) -> Result<SensitivityReport> {
    let rows = par::map(&loaded.points, |(x, c)| evaluate(*x, c));
    Ok(SensitivityReport {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Oracle gaps of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub sweep_value: f64,
    pub cutoff: usize,
    pub comparison: OracleComparison,
}

pub fn oracle_table(loaded: &LoadedConfig) -> Result<Vec<GapRow>> {
    par::map(&loaded.points, |(x, c)| {
        oracle_comparison(c).map(|(cutoff, comparison)| GapRow {
            sweep_value: *x,
            cutoff,
            comparison,
        })
    })
    .into_iter()
    .collect()
}
