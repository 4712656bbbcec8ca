//! Exact states in a truncated multimode Fock space.
//!
//! Each element of a [`Program`] is applied to the vacuum as a matrix built
//! from its generator. Amplitudes pushed past the cutoff are dropped, not
//! renormalized, so truncation shows up as a norm deficit in every moment.
//!
//! * beamsplitters conserve `n_j + n_k` and are exponentiated exactly, one
//!   total-photon block at a time;
//! * two-mode squeezers conserve `n_j − n_k` and are exponentiated per
//!   difference block on a padded chain;
//! * single-mode generators are exponentiated on a padded space and then
//!   projected onto the cutoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{check_distinct, Element, MomentSet, Program, SqueezeParams};
use crate::par;
use crate::qcrb::FisherMatrix;
use crate::ComplexScalar;

type CMatrix = DMatrix<ComplexScalar>;

/// Default bound on the accumulated norm deficit.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Largest number of modes the oracle accepts.
pub const MAX_MODES: usize = 3;

/// Largest state dimension (`cutoff^modes`) the oracle accepts.
pub const MAX_DIMENSION: usize = 1 << 21;

/// Tail mass above which [`CutoffDiagnostics::flagged`] reports a mode.
pub const TAIL_THRESHOLD: f64 = 1e-8;

const ZERO: ComplexScalar = ComplexScalar::new(0.0, 0.0);

/// Truncated state with per-mode occupation `0..cutoff`.
///
/// Amplitudes are stored with mode 0 as the most significant index.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    cutoff: usize,
    amplitudes: DVector<ComplexScalar>,
    norm_deficit: f64,
    step_deficits: Vec<f64>,
}

impl FockState {
    pub fn vacuum(modes: usize, cutoff: usize) -> Result<Self> {
        check_shape(modes, cutoff)?;
        let mut amplitudes = DVector::from_element(cutoff.pow(modes as u32), ZERO);
        amplitudes[0] = ComplexScalar::new(1.0, 0.0);
        Ok(FockState {
            modes,
            cutoff,
            amplitudes,
            norm_deficit: 0.0,
            step_deficits: Vec::new(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &DVector<ComplexScalar> {
        &self.amplitudes
    }

    /// `1 − ‖ψ‖²` of the final state (never negative).
    pub fn norm_deficit(&self) -> f64 {
        self.norm_deficit
    }

    /// Accumulated deficit after each element.
    pub fn step_deficits(&self) -> &[f64] {
        &self.step_deficits
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.modes - 1 - mode) as u32)
    }

    fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.cutoff
    }

    /// Flat indices with zero photons in every mode of `skip`.
    fn bases(&self, skip: &[usize]) -> Vec<usize> {
        (0..self.amplitudes.len())
            .filter(|&i| skip.iter().all(|&m| self.occupation(i, m) == 0))
            .collect()
    }

    fn apply_single(&mut self, mode: usize, u: &CMatrix) {
        let c = self.cutoff;
        let stride = self.stride(mode);
        let mut fiber = DVector::from_element(c, ZERO);
        for base in self.bases(&[mode]) {
            for n in 0..c {
                fiber[n] = self.amplitudes[base + n * stride];
            }
            let out = u * &fiber;
            for n in 0..c {
                self.amplitudes[base + n * stride] = out[n];
            }
        }
    }

    /// Applies `f` to every `cutoff × cutoff` slice over modes `(j, k)`.
    fn apply_pair(&mut self, j: usize, k: usize, f: impl Fn(&CMatrix) -> CMatrix) {
        let c = self.cutoff;
        let (sj, sk) = (self.stride(j), self.stride(k));
        for base in self.bases(&[j, k]) {
            let slice = CMatrix::from_fn(c, c, |nj, nk| self.amplitudes[base + nj * sj + nk * sk]);
            let out = f(&slice);
            for nj in 0..c {
                for nk in 0..c {
                    self.amplitudes[base + nj * sj + nk * sk] = out[(nj, nk)];
                }
            }
        }
    }

    fn apply_element(&mut self, el: &Element) -> Result<()> {
        let c = self.cutoff;
        match *el {
            Element::Displace { mode, alpha } => {
                let pad = padding(c);
                let u = padded_single_mode(c, pad, |n| {
                    let amp = ((n + 1) as f64).sqrt();
                    vec![(n + 1, n, alpha * amp), (n, n + 1, -alpha.conj() * amp)]
                });
                self.apply_single(mode, &u);
            }
            Element::Phase { mode, phi } => {
                let u = CMatrix::from_diagonal(&DVector::from_fn(c, |n, _| ComplexScalar::from_polar(1.0, -phi * n as f64)));
                self.apply_single(mode, &u);
            }
            Element::Dopa { mode, squeeze } => {
                let g = unit_pump(squeeze) * (0.5 * squeeze.r());
                let pad = padding(c);
                let u = padded_single_mode(c, pad, |n| {
                    let amp = (((n + 1) * (n + 2)) as f64).sqrt();
                    vec![(n + 2, n, g * amp), (n, n + 2, -g.conj() * amp)]
                });
                self.apply_single(mode, &u);
            }
            Element::BeamSplitter { j, k, transmissivity } => {
                let k_phase = CMatrix::from_diagonal(&DVector::from_fn(c, |n, _| {
                    ComplexScalar::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
                }));
                self.apply_single(k, &k_phase);
                let angle = (-(1.0 - transmissivity).sqrt()).atan2(transmissivity.sqrt());
                let blocks = rotation_blocks(c, angle);
                self.apply_pair(j, k, |slice| apply_rotation(slice, &blocks));
            }
            Element::Nopa { j, k, squeeze } => {
                let g = unit_pump(squeeze) * squeeze.r();
                let blocks = nopa_blocks(c, padding(c), g);
                self.apply_pair(j, k, |slice| apply_nopa(slice, &blocks));
            }
        }
        Ok(())
    }
}

fn check_shape(modes: usize, cutoff: usize) -> Result<()> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::invalid(format!("the oracle supports 1..={MAX_MODES} modes, got {modes}")));
    }
    if cutoff < 2 {
        return Err(Error::invalid(format!("cutoff must be at least 2, got {cutoff}")));
    }
    match cutoff.checked_pow(modes as u32) {
        Some(d) if d <= MAX_DIMENSION => Ok(()),
        _ => Err(Error::invalid(format!(
            "state dimension {cutoff}^{modes} exceeds the oracle limit {MAX_DIMENSION}"
        ))),
    }
}

fn padding(cutoff: usize) -> usize {
    cutoff.max(32)
}

fn unit_pump(sq: SqueezeParams) -> ComplexScalar {
    ComplexScalar::from_polar(1.0, 2.0 * sq.theta())
}

/// `exp(G)` on `cutoff + pad` levels, restricted to the first `cutoff`.
fn padded_single_mode(
    cutoff: usize,
    pad: usize,
    entries: impl Fn(usize) -> Vec<(usize, usize, ComplexScalar)>,
) -> CMatrix {
    let dim = cutoff + pad;
    let mut g = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        for (row, col, v) in entries(n) {
            if row < dim && col < dim {
                g[(row, col)] = v;
            }
        }
    }
    g.exp().view((0, 0), (cutoff, cutoff)).into_owned()
}

/// `exp(ϑ K)` on each total-photon block, `K = a_j† a_k − a_k† a_j`,
/// indexed by `n_j` within the block.
fn rotation_blocks(cutoff: usize, angle: f64) -> Vec<DMatrix<f64>> {
    (0..=2 * (cutoff - 1))
        .map(|total| {
            let dim = total + 1;
            let mut k = DMatrix::zeros(dim, dim);
            for nj in 0..dim {
                let nk = total - nj;
                if nk > 0 {
                    // a_j† a_k |nj, nk> = √((nj+1) nk) |nj+1, nk−1>
                    let v = (((nj + 1) * nk) as f64).sqrt();
                    k[(nj + 1, nj)] += v;
                    k[(nj, nj + 1)] -= v;
                }
            }
            (k * angle).exp()
        })
        .collect()
}

fn apply_rotation(slice: &CMatrix, blocks: &[DMatrix<f64>]) -> CMatrix {
    let c = slice.nrows();
    let mut out = CMatrix::zeros(c, c);
    for (total, u) in blocks.iter().enumerate() {
        let lo = total.saturating_sub(c - 1);
        let hi = total.min(c - 1);
        for out_j in lo..=hi {
            let mut acc = ZERO;
            for in_j in lo..=hi {
                acc += slice[(in_j, total - in_j)] * u[(out_j, in_j)];
            }
            out[(out_j, total - out_j)] = acc;
        }
    }
    out
}

/// Blocks of `exp(r(g a_j† a_k† − g* a_j a_k))` keyed by `n_j − n_k`,
/// indexed by `min(n_j, n_k)` and already projected onto the cutoff.
fn nopa_blocks(cutoff: usize, pad: usize, g: ComplexScalar) -> Vec<(isize, CMatrix)> {
    let c = cutoff as isize;
    (-(c - 1)..c)
        .map(|delta| {
            let (oj, ok) = (delta.max(0) as usize, (-delta).max(0) as usize);
            let inside = cutoff - delta.unsigned_abs();
            let dim = inside + pad;
            let mut gen = CMatrix::zeros(dim, dim);
            for m in 0..dim - 1 {
                let v = (((m + oj + 1) * (m + ok + 1)) as f64).sqrt();
                gen[(m + 1, m)] = g * v;
                gen[(m, m + 1)] = -g.conj() * v;
            }
            (delta, gen.exp().view((0, 0), (inside, inside)).into_owned())
        })
        .collect()
}

fn apply_nopa(slice: &CMatrix, blocks: &[(isize, CMatrix)]) -> CMatrix {
    let mut out = CMatrix::zeros(slice.nrows(), slice.ncols());
    for (delta, u) in blocks {
        let (oj, ok) = (delta.max(&0).unsigned_abs(), (-delta).max(0) as usize);
        let inside = u.nrows();
        for a in 0..inside {
            let mut acc = ZERO;
            for b in 0..inside {
                acc += u[(a, b)] * slice[(b + oj, b + ok)];
            }
            out[(a + oj, a + ok)] = acc;
        }
    }
    out
}

/// Runs `program` on the vacuum at the given per-mode cutoff.
pub fn build_state(program: &Program, cutoff: usize) -> Result<FockState> {
    build_state_with_tolerance(program, cutoff, DEFAULT_TOLERANCE)
}

/// As [`build_state`], failing as soon as the accumulated norm deficit
/// exceeds `tolerance`; the error names the offending step.
pub fn build_state_with_tolerance(program: &Program, cutoff: usize, tolerance: f64) -> Result<FockState> {
    let mut state = FockState::vacuum(program.modes(), cutoff)?;
    for (step, el) in program.elements().iter().enumerate() {
        state.apply_element(el)?;
        let deficit = (1.0 - state.norm_sqr()).max(0.0);
        state.step_deficits.push(deficit);
        state.norm_deficit = deficit;
        if deficit > tolerance {
            return Err(Error::TruncationOverflow {
                step,
                element: el.to_string(),
                deficit,
                tolerance,
            });
        }
    }
    Ok(state)
}

/// Builds several states, in parallel when enabled. Results keep input order.
pub fn build_states(jobs: &[(Program, usize)]) -> Vec<Result<FockState>> {
    par::map(jobs, |(program, cutoff)| build_state(program, *cutoff))
}

/// Photon-number means and covariance by direct summation (no renormalization).
pub fn exact_photon_moments(state: &FockState) -> MomentSet {
    let m = state.modes;
    let mut mean = DVector::<f64>::zeros(m);
    let mut second = DMatrix::<f64>::zeros(m, m);
    let mut occ = vec![0.0; m];
    for (i, z) in state.amplitudes.iter().enumerate() {
        let p = z.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (j, o) in occ.iter_mut().enumerate() {
            *o = state.occupation(i, j) as f64;
        }
        for j in 0..m {
            mean[j] += p * occ[j];
            for k in 0..m {
                second[(j, k)] += p * occ[j] * occ[k];
            }
        }
    }
    let cov = DMatrix::from_fn(m, m, |j, k| second[(j, k)] - mean[j] * mean[k]);
    MomentSet::new(mean, cov).expect("summed moments are symmetric")
}

/// `4 × Cov(N)` over `arms`, the Fisher matrix of a pure state.
pub fn exact_qfi_pure(state: &FockState, arms: &[usize]) -> Result<FisherMatrix> {
    check_distinct(arms, state.modes)?;
    crate::qcrb::fisher_matrix(&exact_photon_moments(state), arms)
}

/// Marginal photon-number distribution of `mode`, normalized to the kept norm.
pub fn photon_distribution(state: &FockState, mode: usize) -> Result<Vec<f64>> {
    let raw = marginal(state, mode)?;
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return Err(Error::invalid("state has no weight inside the cutoff"));
    }
    Ok(raw.into_iter().map(|p| p / total).collect())
}

fn marginal(state: &FockState, mode: usize) -> Result<Vec<f64>> {
    if mode >= state.modes {
        return Err(Error::IndexOutOfRange {
            index: mode,
            modes: state.modes,
        });
    }
    let mut probs = vec![0.0; state.cutoff];
    for (i, z) in state.amplitudes.iter().enumerate() {
        probs[state.occupation(i, mode)] += z.norm_sqr();
    }
    Ok(probs)
}

/// Mean and variance of `(a e^{-iψ} + a† e^{iψ})/√2` from the amplitudes.
pub fn exact_quadrature_stats(state: &FockState, mode: usize, angle: f64) -> Result<(f64, f64)> {
    if mode >= state.modes {
        return Err(Error::IndexOutOfRange {
            index: mode,
            modes: state.modes,
        });
    }
    let stride = state.stride(mode);
    let (mut a1, mut a2, mut n, mut norm) = (ZERO, ZERO, 0.0, 0.0);
    for (i, z) in state.amplitudes.iter().enumerate() {
        let k = state.occupation(i, mode);
        let p = z.norm_sqr();
        norm += p;
        n += p * k as f64;
        if k >= 1 {
            a1 += state.amplitudes[i - stride].conj() * z * (k as f64).sqrt();
        }
        if k >= 2 {
            a2 += state.amplitudes[i - 2 * stride].conj() * z * ((k * (k - 1)) as f64).sqrt();
        }
    }
    let rot = ComplexScalar::from_polar(1.0, -angle);
    let mean = std::f64::consts::SQRT_2 * (rot * a1).re;
    let second = (rot * rot * a2).re + n + 0.5 * norm;
    Ok((mean, second - mean * mean))
}

/// Truncation health of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffDiagnostics {
    pub norm_deficit: f64,
    /// Probability in the two highest kept levels of each mode.
    pub tail_mass: Vec<f64>,
}

impl CutoffDiagnostics {
    /// Modes whose tail mass exceeds [`TAIL_THRESHOLD`].
    pub fn flagged(&self) -> Vec<usize> {
        self.tail_mass
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > TAIL_THRESHOLD)
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn cutoff_diagnostics(state: &FockState) -> CutoffDiagnostics {
    let tail_mass = (0..state.modes)
        .map(|j| {
            let p = marginal(state, j).expect("mode in range");
            p[p.len().saturating_sub(2)..].iter().sum()
        })
        .collect();
    CutoffDiagnostics {
        norm_deficit: state.norm_deficit,
        tail_mass,
    }
}

/// Per-mode cutoff `ceil((|α| cosh r + 3)² + 10 sinh² r)`.
pub fn cutoff_rule(alpha: f64, r: f64) -> usize {
    let r = r.abs();
    ((alpha.abs() * r.cosh() + 3.0).powi(2) + 10.0 * r.sinh().powi(2)).ceil() as usize
}

/// Total tail mass allowed outside the cutoff box by [`program_cutoff`].
pub const TAIL_BUDGET: f64 = 1e-8;

/// Chernoff bound on `P(n ≥ cutoff)` for a single-mode Gaussian state with
/// mean field `d`, `⟨δa†δa⟩ = normal` and `⟨δa δa⟩ = anomalous`.
///
/// Uses `P(n ≥ c) ≤ E[x^n]/x^c` with the closed-form generating function
/// `E[x^n] = exp(λ(|d|²(1−λN) + λ Re(M* d²))/Δ)/√Δ`, `λ = x − 1`,
/// `Δ = (1−λN)² − λ²|M|²`, minimized over `x` (the log bound is convex in `ln x`).
pub fn tail_bound(d: ComplexScalar, normal: f64, anomalous: ComplexScalar, cutoff: usize) -> f64 {
    let m2 = anomalous.norm_sqr();
    let pull = (anomalous.conj() * d * d).re;
    let log_bound = |s: f64| -> f64 {
        let l = s.exp_m1();
        let det = (1.0 - l * normal).powi(2) - l * l * m2;
        if det <= 0.0 || 1.0 - l * normal <= 0.0 {
            return f64::INFINITY;
        }
        l * (d.norm_sqr() * (1.0 - l * normal) + l * pull) / det - 0.5 * det.ln() - cutoff as f64 * s
    };
    let spread = normal + m2.sqrt();
    let mut hi = if spread > 0.0 { (1.0 / spread).ln_1p() } else { 1e6f64.ln() };
    let mut lo = 0.0;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if log_bound(a) <= log_bound(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    log_bound(0.5 * (lo + hi)).exp().min(1.0)
}

/// Smallest cutoff whose [`tail_bound`] is below `budget`, never below
/// [`cutoff_rule`] for the mode's displacement and squeezing.
pub fn mode_cutoff(d: ComplexScalar, normal: f64, anomalous: ComplexScalar, budget: f64) -> usize {
    let mut cutoff = cutoff_rule(d.norm(), normal.max(0.0).sqrt().asinh());
    while cutoff < MAX_DIMENSION && tail_bound(d, normal, anomalous, cutoff) > budget {
        cutoff += 1;
    }
    cutoff
}

/// Largest [`mode_cutoff`] over every mode after every step of a program,
/// with [`TAIL_BUDGET`] shared equally between the modes.
pub fn program_cutoff(program: &Program) -> usize {
    let modes = program.modes();
    let budget = TAIL_BUDGET / modes as f64;
    let mut map = crate::BogoliubovMap::identity(modes).expect("program has at least one mode");
    let mut cutoff = cutoff_rule(0.0, 0.0);
    for el in program.elements() {
        map = el.apply(&map).expect("program elements fit their program");
        let (c, s) = (map.annihilation_coefficients(), map.creation_coefficients());
        for j in 0..modes {
            let normal = s.row(j).iter().map(|z| z.norm_sqr()).sum();
            let anomalous = c.row(j).iter().zip(s.row(j).iter()).map(|(a, b)| a * b).sum();
            cutoff = cutoff.max(mode_cutoff(map.displacement()[j], normal, anomalous, budget));
        }
    }
    cutoff
}

/// `max |analytic − exact| / max |exact|`, or the absolute gap when the
/// exact values are all zero.
pub fn relative_gap<'a>(analytic: impl IntoIterator<Item = &'a f64>, exact: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (mut gap, mut scale) = (0.0f64, 0.0f64);
    for (a, e) in analytic.into_iter().zip(exact) {
        gap = gap.max((a - e).abs());
        scale = scale.max(e.abs());
    }
    if scale == 0.0 {
        gap
    } else {
        gap / scale
    }
}

/// Relative gaps between the Bogoliubov moments of a program and its exact state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub mean_gap: f64,
    pub cov_gap: f64,
    pub qfi_gap: f64,
    pub norm_deficit: f64,
}

impl OracleComparison {
    pub fn max_gap(&self) -> f64 {
        self.mean_gap.max(self.cov_gap).max(self.qfi_gap)
    }
}

/// Compares analytic and exact moments and Fisher matrices over all modes.
pub fn compare_with_map(program: &Program, cutoff: usize) -> Result<OracleComparison> {
    let analytic = program.to_map()?.photon_covariance();
    let state = build_state(program, cutoff)?;
    let exact = exact_photon_moments(&state);
    let arms: Vec<usize> = (0..program.modes()).collect();
    let fa = crate::qcrb::fisher_matrix(&analytic, &arms)?;
    let fe = exact_qfi_pure(&state, &arms)?;
    Ok(OracleComparison {
        mean_gap: relative_gap(analytic.mean().iter(), exact.mean().iter()),
        cov_gap: relative_gap(analytic.cov().iter(), exact.cov().iter()),
        qfi_gap: relative_gap(fa.matrix().iter(), fe.matrix().iter()),
        norm_deficit: state.norm_deficit(),
    })
}

/// [`compare_with_map`] over many programs, in parallel when enabled.
pub fn compare_batch(jobs: &[(Program, usize)]) -> Vec<Result<OracleComparison>> {
    par::map(jobs, |(program, cutoff)| compare_with_map(program, *cutoff))
}
