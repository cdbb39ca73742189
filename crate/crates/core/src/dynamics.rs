//! Single-trajectory integration of the three-mode equations of motion.
//!
//! Mean-field and truncated Wigner trajectories share the Gross-Pitaevskii
//! drift and are stepped with classical RK4. Positive-P trajectories live in
//! the doubled phase space (α_j, α_j⁺) and are stepped with a semi-implicit
//! midpoint scheme whose noise coefficient is taken at the start of the step,
//! so the scheme converges to the Itô solution.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Couplings, ModelParams, Representation};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default steps per pulse for the RK4 representations: dt = t_p / 2¹⁴
/// before rounding to the sample grid.
pub const DEFAULT_STEPS_PER_PULSE: usize = 1 << 14;
/// Default steps per pulse for positive-P. The midpoint scheme is second
/// order, and early in the pulse its truncation error must stay below a
/// sampling error that starts at zero.
pub const DEFAULT_POSITIVE_P_STEPS_PER_PULSE: usize = 1 << 15;
/// Default number of sample intervals across the pulse.
pub const DEFAULT_SAMPLE_INTERVALS: usize = 400;
/// A positive-P trajectory is divergent once any |α|² exceeds this multiple
/// of the atom number.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e6;
pub const DEFAULT_MIDPOINT_ITERATIONS: usize = 3;

/// Positive-P amplitudes in the doubled phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpAmps {
    pub alpha: [Complex64; 3],
    pub alpha_plus: [Complex64; 3],
}

impl PpAmps {
    /// Interleaved (α₁, α₁⁺, α₂, α₂⁺, α₃, α₃⁺).
    pub fn to_array(&self) -> [Complex64; 6] {
        let (a, b) = (&self.alpha, &self.alpha_plus);
        [a[0], b[0], a[1], b[1], a[2], b[2]]
    }

    pub fn from_array(v: [Complex64; 6]) -> Self {
        Self {
            alpha: [v[0], v[2], v[4]],
            alpha_plus: [v[1], v[3], v[5]],
        }
    }

    fn is_bounded(&self, threshold: f64) -> bool {
        self.alpha
            .iter()
            .chain(self.alpha_plus.iter())
            .all(|z| {
                let n = z.norm_sqr();
                n.is_finite() && n <= threshold
            })
    }
}

/// Phase-space amplitudes of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitudes {
    /// Mean-field or Wigner amplitudes α₁, α₂, α₃.
    Classical([Complex64; 3]),
    PositiveP(PpAmps),
}

impl Amplitudes {
    /// Σ_j |α_j|² for classical amplitudes, Σ_j α_j⁺α_j in positive-P.
    pub fn total_number(&self) -> Complex64 {
        match self {
            Amplitudes::Classical(a) => a.iter().map(|z| z.norm_sqr()).sum::<f64>().into(),
            Amplitudes::PositiveP(s) => (0..3).map(|j| s.alpha_plus[j] * s.alpha[j]).sum(),
        }
    }

    fn fits(&self, representation: Representation) -> bool {
        matches!(
            (self, representation),
            (Amplitudes::Classical(_), Representation::Gpe | Representation::Wigner)
                | (Amplitudes::PositiveP(_), Representation::PositiveP)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub representation: Representation,
    pub amplitudes: Amplitudes,
    /// Index of the current step; `t = step · dt`.
    pub step: usize,
    pub t: f64,
}

impl TrajectoryState {
    pub fn new(representation: Representation, amplitudes: Amplitudes) -> Result<Self> {
        if !amplitudes.fits(representation) {
            return Err(Error::Domain(format!(
                "amplitudes do not match the {representation} representation"
            )));
        }
        Ok(Self {
            representation,
            amplitudes,
            step: 0,
            t: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rk4,
    SemiImplicitMidpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub steps: usize,
    pub dt: f64,
    /// Steps between observable records.
    pub sample_stride: usize,
    /// |α|² above which a positive-P trajectory is flagged divergent.
    pub divergence_threshold: f64,
    pub scheme: Scheme,
    /// Fixed-point iterations for the positive-P midpoint.
    pub midpoint_iterations: usize,
    /// Each positive-P Wiener increment is the sum of this many finer
    /// increments, so a run at dt with 2 substeps follows the same Brownian
    /// path as a run at dt/2 with 1.
    pub noise_substeps: usize,
}

impl IntegrationConfig {
    /// Resolves a step count for the pulse. The requested `dt` (default
    /// t_p/2¹⁴, or t_p/2¹⁵ for positive-P) is reduced until the number of steps is a multiple of
    /// `sample_intervals`.
    pub fn new(
        params: &ModelParams,
        representation: Representation,
        dt: Option<f64>,
        sample_intervals: usize,
    ) -> Result<Self> {
        if sample_intervals == 0 {
            return Err(Error::Validation(vec!["sample_intervals must be at least 1".into()]));
        }
        let raw = match dt {
            None if representation == Representation::PositiveP => {
                DEFAULT_POSITIVE_P_STEPS_PER_PULSE as f64
            }
            None => DEFAULT_STEPS_PER_PULSE as f64,
            Some(dt) if dt > 0.0 && dt.is_finite() => params.t_p / dt,
            Some(dt) => {
                return Err(Error::Validation(vec![format!("dt must be positive (got {dt})")]))
            }
        };
        // absorb rounding noise before taking the ceiling
        let near = raw.round();
        let raw = if (raw - near).abs() <= 1e-9 * near.max(1.0) { near } else { raw.ceil() };
        let blocks = ((raw as usize).max(1)).div_ceil(sample_intervals);
        let steps = blocks * sample_intervals;
        Ok(Self::with_steps(params, representation, steps, blocks))
    }

    fn with_steps(
        params: &ModelParams,
        representation: Representation,
        steps: usize,
        sample_stride: usize,
    ) -> Self {
        let scheme = match representation {
            Representation::PositiveP => Scheme::SemiImplicitMidpoint,
            _ => Scheme::Rk4,
        };
        Self {
            steps,
            dt: params.t_p / steps as f64,
            sample_stride,
            divergence_threshold: DEFAULT_DIVERGENCE_FACTOR * params.n_total.max(1.0),
            scheme,
            midpoint_iterations: DEFAULT_MIDPOINT_ITERATIONS,
            noise_substeps: 1,
        }
    }

    /// Same grid, half the step.
    pub fn halved(&self, t_p: f64) -> Self {
        Self {
            steps: self.steps * 2,
            dt: t_p / (self.steps * 2) as f64,
            sample_stride: self.sample_stride * 2,
            ..self.clone()
        }
    }

    pub fn sample_intervals(&self) -> usize {
        self.steps / self.sample_stride
    }

    pub fn sample_count(&self) -> usize {
        self.sample_intervals() + 1
    }
}

#[inline(always)]
fn gpe_rhs(a: &[Complex64; 3], e: &[f64; 3], two_chi: f64, c: Couplings) -> [Complex64; 3] {
    let rot = |j: usize| -> Complex64 {
        let w = e[j] + two_chi * a[j].norm_sqr();
        // −i w α
        Complex64::new(w * a[j].im, -w * a[j].re)
    };
    let hop1 = a[1] * c.k12;
    let hop2 = a[0] * c.k12 + a[2] * c.k23;
    let hop3 = a[1] * c.k23;
    [
        rot(0) + Complex64::new(-hop1.im, hop1.re),
        rot(1) + Complex64::new(-hop2.im, hop2.re),
        rot(2) + Complex64::new(-hop3.im, hop3.re),
    ]
}

/// Mean-field drift dα/dt for all three wells, shared by the truncated
/// Wigner method.
pub fn drift_gpe(alpha: &[Complex64; 3], params: &ModelParams, c: Couplings) -> [Complex64; 3] {
    gpe_rhs(alpha, &params.e, 2.0 * params.chi, c)
}

#[inline(always)]
fn pp_rhs(s: &PpAmps, e: &[f64; 3], two_chi: f64, c: Couplings) -> PpAmps {
    let (a, b) = (&s.alpha, &s.alpha_plus);
    let mut out = PpAmps::default();
    let hop = [a[1] * c.k12, a[0] * c.k12 + a[2] * c.k23, a[1] * c.k23];
    let hop_plus = [b[1] * c.k12, b[0] * c.k12 + b[2] * c.k23, b[1] * c.k23];
    for j in 0..3 {
        let w = e[j] + two_chi * b[j] * a[j];
        out.alpha[j] = -I * w * a[j] + I * hop[j];
        out.alpha_plus[j] = I * w * b[j] - I * hop_plus[j];
    }
    out
}

/// Deterministic part of the positive-P equations, including the well
/// energies E₁ and E₃.
pub fn drift_pp(state: &PpAmps, params: &ModelParams, c: Couplings) -> PpAmps {
    pp_rhs(state, &params.e, 2.0 * params.chi, c)
}

/// Principal square root of `c·z²`, given `root_c = √c`. Both ±√c·z square
/// to c·z²; the principal root is the one with non-negative real part.
#[inline(always)]
fn principal_root_of_scaled_square(root_c: Complex64, z: Complex64) -> Complex64 {
    let s = root_c * z;
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        -s
    } else {
        s
    }
}

/// √(−2iχ) and √(2iχ).
fn diffusion_roots(chi: f64) -> (Complex64, Complex64) {
    (
        Complex64::new(0.0, -2.0 * chi).sqrt(),
        Complex64::new(0.0, 2.0 * chi).sqrt(),
    )
}

#[inline(always)]
fn scaled_noise(s: &PpAmps, roots: (Complex64, Complex64), dw: &[f64; 6]) -> PpAmps {
    let (root_minus, root_plus) = roots;
    let mut out = PpAmps::default();
    for j in 0..3 {
        out.alpha[j] = principal_root_of_scaled_square(root_minus, s.alpha[j]) * dw[2 * j];
        out.alpha_plus[j] =
            principal_root_of_scaled_square(root_plus, s.alpha_plus[j]) * dw[2 * j + 1];
    }
    out
}

/// Stochastic increments √(−2iχα_j²)·dW for the α lines and √(2iχα_j⁺²)·dW
/// for the α⁺ lines, principal square-root branch. `dw` is interleaved like
/// [`PpAmps::to_array`].
pub fn noise_pp(state: &PpAmps, chi: f64, dw: &[f64; 6]) -> PpAmps {
    scaled_noise(state, diffusion_roots(chi), dw)
}

/// Outcome of a whole trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    pub final_state: TrajectoryState,
    /// Step index at which a positive-P trajectory first left the bounded
    /// region, if it did.
    pub diverged_at: Option<usize>,
}

/// Fixed-step integrator for one parameter set; the coupling schedule is
/// tabulated on the half-step grid and shared by every trajectory.
#[derive(Clone, Debug)]
pub struct Integrator {
    params: ModelParams,
    cfg: IntegrationConfig,
    couplings: Vec<Couplings>,
    roots: (Complex64, Complex64),
}

impl Integrator {
    pub fn new(params: ModelParams, cfg: IntegrationConfig) -> Self {
        let schedule = params.schedule();
        let half_steps = 2 * cfg.steps;
        let couplings = (0..=half_steps)
            .map(|h| schedule.at_unchecked(params.t_p * (h as f64 / half_steps as f64)))
            .collect();
        let roots = diffusion_roots(params.chi);
        Self {
            params,
            cfg,
            couplings,
            roots,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &IntegrationConfig {
        &self.cfg
    }

    pub fn time_of(&self, step: usize) -> f64 {
        self.params.t_p * (step as f64 / self.cfg.steps as f64)
    }

    /// One RK4 step from step index `k`.
    #[inline]
    pub fn step_classical(&self, a: &mut [Complex64; 3], k: usize) {
        let e = &self.params.e;
        let two_chi = 2.0 * self.params.chi;
        let dt = self.cfg.dt;
        let [c0, ch, c1] = self.couplings[2 * k..2 * k + 3] else {
            unreachable!()
        };
        let y = *a;
        let k1 = gpe_rhs(&y, e, two_chi, c0);
        let y2 = std::array::from_fn(|j| y[j] + k1[j] * (0.5 * dt));
        let k2 = gpe_rhs(&y2, e, two_chi, ch);
        let y3 = std::array::from_fn(|j| y[j] + k2[j] * (0.5 * dt));
        let k3 = gpe_rhs(&y3, e, two_chi, ch);
        let y4 = std::array::from_fn(|j| y[j] + k3[j] * dt);
        let k4 = gpe_rhs(&y4, e, two_chi, c1);
        let w = dt / 6.0;
        for j in 0..3 {
            a[j] = y[j] + (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * w;
        }
    }

    /// One semi-implicit midpoint step from step index `k`. Returns false if
    /// the new state is non-finite or beyond the divergence threshold.
    #[inline]
    pub fn step_pp<R: Rng + ?Sized>(&self, s: &mut PpAmps, k: usize, rng: &mut R) -> bool {
        let dw = self.wiener_increments(rng);
        let noise = scaled_noise(s, self.roots, &dw);
        let e = &self.params.e;
        let two_chi = 2.0 * self.params.chi;
        let dt = self.cfg.dt;
        let ch = self.couplings[2 * k + 1];
        let start = *s;
        let mut mid = start;
        for _ in 0..self.cfg.midpoint_iterations {
            let d = pp_rhs(&mid, e, two_chi, ch);
            for j in 0..3 {
                mid.alpha[j] = start.alpha[j] + (d.alpha[j] * dt + noise.alpha[j]) * 0.5;
                mid.alpha_plus[j] =
                    start.alpha_plus[j] + (d.alpha_plus[j] * dt + noise.alpha_plus[j]) * 0.5;
            }
        }
        for j in 0..3 {
            s.alpha[j] = mid.alpha[j] * 2.0 - start.alpha[j];
            s.alpha_plus[j] = mid.alpha_plus[j] * 2.0 - start.alpha_plus[j];
        }
        s.is_bounded(self.cfg.divergence_threshold)
    }

    #[inline]
    fn wiener_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 6] {
        let sub = self.cfg.noise_substeps.max(1);
        let mut dw = [0.0; 6];
        for _ in 0..sub {
            for w in dw.iter_mut() {
                *w += rng.sample::<f64, _>(StandardNormal);
            }
        }
        let scale = (self.cfg.dt / sub as f64).sqrt();
        dw.map(|w| w * scale)
    }

    /// Advances `state` by one step. Positive-P trajectories report divergence
    /// through the returned flag; a non-finite classical state is an error.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut TrajectoryState, rng: &mut R) -> Result<bool> {
        let k = state.step;
        if k >= self.cfg.steps {
            return Err(Error::Domain(format!(
                "step {k} is past the end of the pulse ({} steps)",
                self.cfg.steps
            )));
        }
        let ok = match &mut state.amplitudes {
            Amplitudes::Classical(a) => {
                self.step_classical(a, k);
                if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { step: k + 1 });
                }
                true
            }
            Amplitudes::PositiveP(s) => self.step_pp(s, k, rng),
        };
        state.step = k + 1;
        state.t = self.time_of(k + 1);
        Ok(ok)
    }

    /// Integrates from `initial` (at step 0) to the end of the pulse.
    /// `observer(sample_index, state)` is called at t = 0 and after every
    /// `sample_stride` steps; a divergent positive-P trajectory stops there
    /// and receives no further calls.
    pub fn integrate<R, F>(
        &self,
        initial: TrajectoryState,
        rng: &mut R,
        mut observer: F,
    ) -> Result<TrajectorySummary>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &Amplitudes),
    {
        if initial.step != 0 {
            return Err(Error::Domain("trajectories start at step 0".into()));
        }
        let mut state = initial;
        let stride = self.cfg.sample_stride;
        observer(0, &state.amplitudes);
        let mut diverged_at = None;
        let intervals = self.cfg.sample_intervals();
        match &mut state.amplitudes {
            Amplitudes::Classical(a) => {
                for sample in 1..=intervals {
                    for k in (sample - 1) * stride..sample * stride {
                        self.step_classical(a, k);
                    }
                    if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                        return Err(Error::NonFinite {
                            step: sample * stride,
                        });
                    }
                    observer(sample, &Amplitudes::Classical(*a));
                }
                state.step = self.cfg.steps;
            }
            Amplitudes::PositiveP(s) => {
                state.step = self.cfg.steps;
                'outer: for sample in 1..=intervals {
                    for k in (sample - 1) * stride..sample * stride {
                        if !self.step_pp(s, k, rng) {
                            diverged_at = Some(k + 1);
                            state.step = k + 1;
                            break 'outer;
                        }
                    }
                    observer(sample, &Amplitudes::PositiveP(*s));
                }
            }
        }
        state.t = self.time_of(state.step);
        Ok(TrajectorySummary {
            final_state: state,
            diverged_at,
        })
    }
}
