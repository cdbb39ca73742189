//! Three-well Bose-Hubbard parameters and the counter-intuitive pulse schedule.
//!
//! All rates are angular frequencies with ħ = 1. The tunnelling between
//! wells 1-2 and 2-3 follows
//!
//! ```text
//! K12(t) = Ω sin²(πt / 2t_p)      K23(t) = Ω cos²(πt / 2t_p)
//! ```
//!
//! so the 2-3 coupling is switched on first and population moves from well 1
//! to well 3 through the dark state.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest |χ| for which positive-P trajectories are known to converge.
pub const POSITIVE_P_CHI_LIMIT: f64 = 5e-4;
/// Largest |χ| over which the mean-field equations give clean transfer.
pub const GPE_CHI_LIMIT: f64 = 1e-3;
/// Largest |χ| explored with the truncated Wigner method.
pub const WIGNER_CHI_LIMIT: f64 = 5e-3;

/// Phase-space method used to evolve the three modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Mean-field Gross-Pitaevskii amplitudes, no quantum noise.
    Gpe,
    /// Truncated Wigner: mean-field drift, sampled initial conditions.
    Wigner,
    /// Positive-P: doubled phase space with multiplicative noise.
    PositiveP,
}

impl Representation {
    pub fn is_stochastic(self) -> bool {
        !matches!(self, Representation::Gpe)
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::Gpe => "gpe",
            Representation::Wigner => "wigner",
            Representation::PositiveP => "positive-p",
        }
    }

    /// |χ| beyond which results for this method should not be trusted.
    pub fn chi_limit(self) -> f64 {
        match self {
            Representation::Gpe => GPE_CHI_LIMIT,
            Representation::Wigner => WIGNER_CHI_LIMIT,
            Representation::PositiveP => POSITIVE_P_CHI_LIMIT,
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical constants of the three-well Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Peak tunnelling rate Ω.
    pub omega: f64,
    /// Pulse duration t_p.
    pub t_p: f64,
    /// Single-atom ground-state energy of each well (divided by ħ).
    pub e: [f64; 3],
    /// On-site collisional interaction χ. May be negative.
    pub chi: f64,
    /// Total atom number N_A. Real valued so coherent means are admissible.
    pub n_total: f64,
}

impl ModelParams {
    /// Parameters with E₁ = E₃ = 0 and E₂ = 0.1 Ω.
    pub fn new(omega: f64, t_p: f64, chi: f64, n_total: f64) -> Self {
        Self {
            omega,
            t_p,
            e: [0.0, 0.1 * omega, 0.0],
            chi,
            n_total,
        }
    }

    /// The parameter set behind the population-transfer figures:
    /// Ω = 10, t_p = 40, E₂ = 1, χ = 10⁻³, N_A = 200.
    pub fn reference() -> Self {
        Self::new(10.0, 40.0, 1e-3, 200.0)
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_energies(mut self, e: [f64; 3]) -> Self {
        self.e = e;
        self
    }

    pub fn schedule(&self) -> PulseSchedule {
        PulseSchedule {
            omega: self.omega,
            t_p: self.t_p,
        }
    }

    /// Tunnelling rates at time `t`, which must lie in `[0, t_p]`.
    pub fn coupling_at(&self, t: f64) -> Result<Couplings> {
        self.schedule().at(t)
    }

    /// Rejects non-finite values, a non-positive pulse time and a negative atom
    /// number. A χ outside the range where `representation` is known to behave
    /// produces a warning rather than an error.
    pub fn validate(self, representation: Representation) -> Result<CheckedParams> {
        let mut bad = Vec::new();
        let scalars = [
            ("omega", self.omega),
            ("t_p", self.t_p),
            ("chi", self.chi),
            ("n_total", self.n_total),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite (got {v})"));
            }
        }
        for (j, v) in self.e.iter().enumerate() {
            if !v.is_finite() {
                bad.push(format!("e[{}] must be finite (got {v})", j + 1));
            }
        }
        if self.t_p.is_finite() && self.t_p <= 0.0 {
            bad.push(format!("t_p must be positive (got {})", self.t_p));
        }
        if self.n_total.is_finite() && self.n_total < 0.0 {
            bad.push(format!("n_total must be non-negative (got {})", self.n_total));
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }

        let mut warnings = Vec::new();
        let limit = representation.chi_limit();
        if self.chi.abs() > limit {
            warnings.push(format!(
                "|chi| = {:e} exceeds {:e}, outside the range where the {} method is known to converge",
                self.chi.abs(),
                limit,
                representation
            ));
        }
        Ok(CheckedParams {
            params: self,
            warnings,
        })
    }
}

/// Parameters that passed [`ModelParams::validate`], with any stability warnings.
#[derive(Clone, Debug)]
pub struct CheckedParams {
    pub params: ModelParams,
    pub warnings: Vec<String>,
}

/// Instantaneous tunnelling rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Couplings {
    pub k12: f64,
    pub k23: f64,
}

/// Time-dependent coupling schedule derived from [`ModelParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSchedule {
    pub omega: f64,
    pub t_p: f64,
}

impl PulseSchedule {
    pub fn at(&self, t: f64) -> Result<Couplings> {
        if !(0.0..=self.t_p).contains(&t) {
            return Err(Error::TimeOutOfRange { t, t_p: self.t_p });
        }
        Ok(self.at_unchecked(t))
    }

    pub(crate) fn at_unchecked(&self, t: f64) -> Couplings {
        let (s, c) = (PI * t / (2.0 * self.t_p)).sin_cos();
        Couplings {
            k12: self.omega * s * s,
            k23: self.omega * c * c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let p = ModelParams::new(10.0, 40.0, 0.0, 200.0);
        let c0 = p.coupling_at(0.0).unwrap();
        assert_eq!((c0.k12, c0.k23), (0.0, 10.0));
        let cm = p.coupling_at(20.0).unwrap();
        assert!(close(cm.k12, 5.0) && close(cm.k23, 5.0));
        let c1 = p.coupling_at(40.0).unwrap();
        assert!(close(c1.k12, 10.0) && c1.k23.abs() < 1e-12);
    }

    #[test]
    fn schedule_rejects_times_outside_pulse() {
        let p = ModelParams::reference();
        assert!(matches!(
            p.coupling_at(-1e-9),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(p.coupling_at(40.0 + 1e-9).is_err());
    }

    #[test]
    fn default_energies() {
        let p = ModelParams::new(10.0, 40.0, 1e-3, 200.0);
        assert_eq!(p.e, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn reference_parameters_accepted_without_warning() {
        let checked = ModelParams::reference()
            .validate(Representation::Wigner)
            .unwrap();
        assert!(checked.warnings.is_empty());
    }

    #[test]
    fn degenerate_pulse_rejected() {
        let mut p = ModelParams::reference();
        p.t_p = 0.0;
        let err = p.validate(Representation::Gpe).unwrap_err();
        assert!(err.to_string().contains("t_p"));
    }

    #[test]
    fn every_bad_field_is_listed() {
        let mut p = ModelParams::reference();
        p.omega = f64::NAN;
        p.n_total = -1.0;
        p.e[1] = f64::INFINITY;
        match p.validate(Representation::Gpe) {
            Err(Error::Validation(fields)) => {
                assert_eq!(fields.len(), 3);
                let all = fields.join(" ");
                assert!(all.contains("omega") && all.contains("n_total") && all.contains("e[2]"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn positive_p_warns_outside_convergence_window() {
        let checked = ModelParams::reference()
            .validate(Representation::PositiveP)
            .unwrap();
        assert_eq!(checked.warnings.len(), 1);
        let ok = ModelParams::reference()
            .with_chi(5e-4)
            .validate(Representation::PositiveP)
            .unwrap();
        assert!(ok.warnings.is_empty());
    }

    proptest! {
        #[test]
        fn couplings_sum_to_omega(omega in -50.0f64..50.0, t_p in 0.1f64..1000.0, frac in 0.0f64..=1.0) {
            let s = PulseSchedule { omega, t_p };
            let c = s.at(frac * t_p).unwrap();
            prop_assert!((c.k12 + c.k23 - omega).abs() <= 4.0 * f64::EPSILON * omega.abs().max(1.0));
        }

        #[test]
        fn schedule_mirror_symmetry(t_p in 0.1f64..1000.0, frac in 0.0f64..=1.0) {
            let s = PulseSchedule { omega: 10.0, t_p };
            let t = frac * t_p;
            let a = s.at(t).unwrap();
            let b = s.at(t_p - t).unwrap();
            prop_assert!((a.k12 - b.k23).abs() < 1e-12);
            prop_assert!((a.k23 - b.k12).abs() < 1e-12);
        }
    }
}
