//! Initial phase-space samples for coherent, Fock and vacuum wells.
//!
//! Wigner samples reproduce symmetrically ordered moments, positive-P samples
//! normally ordered ones. The Wigner Fock sampler is the large-N ring
//! approximation and is only offered for N ≥ 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Amplitudes, PpAmps};
use crate::error::{Error, Result};
use crate::model::Representation;

/// Fock numbers below this are sampled in the Wigner representation with a
/// warning: the ring approximation is poor for few quanta.
pub const FOCK_WIGNER_MIN_RELIABLE: u64 = 10;

/// Quantum state of one well at t = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WellState {
    Vacuum,
    Coherent(Complex64),
    Fock(u64),
}

impl WellState {
    pub fn mean_number(&self) -> f64 {
        match *self {
            WellState::Vacuum => 0.0,
            WellState::Coherent(a) => a.norm_sqr(),
            WellState::Fock(n) => n as f64,
        }
    }

    /// Amplitude used by the mean-field equations, which ignore fluctuations.
    pub fn mean_field_amplitude(&self) -> Complex64 {
        match *self {
            WellState::Vacuum => Complex64::new(0.0, 0.0),
            WellState::Coherent(a) => a,
            WellState::Fock(n) => Complex64::new((n as f64).sqrt(), 0.0),
        }
    }
}

/// One state per well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub wells: [WellState; 3],
}

impl InitialStateSpec {
    /// All atoms in well 1 in a coherent state with real amplitude √n.
    pub fn coherent_in_first(n: f64) -> Self {
        Self {
            wells: [
                WellState::Coherent(Complex64::new(n.sqrt(), 0.0)),
                WellState::Vacuum,
                WellState::Vacuum,
            ],
        }
    }

    /// All atoms in well 1 in a Fock state.
    pub fn fock_in_first(n: u64) -> Self {
        Self {
            wells: [WellState::Fock(n), WellState::Vacuum, WellState::Vacuum],
        }
    }

    pub fn mean_number(&self) -> f64 {
        self.wells.iter().map(WellState::mean_number).sum()
    }

    /// Checks that every well can be sampled in `representation`; returns
    /// warnings for states that are sampled only approximately.
    pub fn check(&self, representation: Representation) -> Result<Vec<String>> {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        for (j, w) in self.wells.iter().enumerate() {
            match *w {
                WellState::Coherent(a) if !(a.re.is_finite() && a.im.is_finite()) => {
                    errors.push(format!("well{} coherent amplitude must be finite", j + 1));
                }
                WellState::Fock(0) if representation == Representation::Wigner => {
                    errors.push(format!(
                        "well{}: Fock(0) has no Wigner ring sample; use vacuum instead",
                        j + 1
                    ));
                }
                WellState::Fock(n)
                    if representation == Representation::Wigner
                        && n < FOCK_WIGNER_MIN_RELIABLE =>
                {
                    warnings.push(format!(
                        "well{}: Wigner sampling of Fock({n}) is a large-N approximation",
                        j + 1
                    ));
                }
                _ => {}
            }
        }
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(Error::Validation(errors))
        }
    }
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// α + (η₁ + iη₂)/2 with independent standard normals η.
pub fn sample_coherent_wigner<R: Rng + ?Sized>(alpha: Complex64, rng: &mut R) -> Complex64 {
    let re = normal(rng);
    let im = normal(rng);
    alpha + Complex64::new(re, im) * 0.5
}

/// The coherent state as a point in the doubled phase space: (α, α*).
pub fn sample_coherent_pp(alpha: Complex64) -> (Complex64, Complex64) {
    (alpha, alpha.conj())
}

/// Ring radius p and radial width q = 1/(4p) of the approximate Wigner
/// distribution of an n-quantum Fock state. `p² + q² = n + 1/2`.
pub fn fock_wigner_ring(n: u64) -> (f64, f64) {
    let nf = n as f64;
    let p = 0.5 * (2.0 * nf + 1.0 + 2.0 * (nf * nf + nf).sqrt()).sqrt();
    (p, 0.25 / p)
}

/// (p + qη) e^{2πiν}, η standard normal and ν uniform on [0, 1).
pub fn sample_fock_wigner<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Domain(
            "Fock(0) cannot be ring-sampled; sample the vacuum as Coherent(0)".into(),
        ));
    }
    let (p, q) = fock_wigner_ring(n);
    let eta = normal(rng);
    let nu: f64 = rng.random();
    Ok(Complex64::from_polar(p + q * eta, 2.0 * PI * nu))
}

/// Positive-P sample of an n-quantum Fock state: (μ + γ, μ* − γ*) with
/// |μ|² ~ Γ(n + 1), uniform phase, and γ = (η₁ + iη₂)/√2.
pub fn sample_fock_pp<R: Rng + ?Sized>(n: u64, rng: &mut R) -> (Complex64, Complex64) {
    let z = gamma_sample(n as f64 + 1.0, rng).expect("shape n + 1 is positive");
    let theta = 2.0 * PI * rng.random::<f64>();
    let mu = Complex64::from_polar(z.sqrt(), theta);
    let g = Complex64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2;
    (mu + g, mu.conj() - g.conj())
}

/// Gamma(shape, 1) variate by Marsaglia and Tsang's squeeze-rejection method.
///
/// Shapes below one are boosted: if X ~ Γ(a + 1) and U ~ U(0,1) then
/// X·U^{1/a} ~ Γ(a).
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::Domain(format!(
            "gamma shape must be positive and finite (got {shape})"
        )));
    }
    if shape < 1.0 {
        let x = gamma_sample(shape + 1.0, rng)?;
        let u: f64 = rng.random();
        return Ok(x * u.powf(1.0 / shape));
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return Ok(d * v);
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return Ok(d * v);
        }
    }
}

/// Draws the t = 0 amplitudes of all three wells, well 1 first.
pub fn sample_initial<R: Rng + ?Sized>(
    spec: &InitialStateSpec,
    representation: Representation,
    rng: &mut R,
) -> Result<Amplitudes> {
    match representation {
        Representation::Gpe => Ok(Amplitudes::Classical(
            spec.wells.map(|w| w.mean_field_amplitude()),
        )),
        Representation::Wigner => {
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (slot, well) in out.iter_mut().zip(spec.wells.iter()) {
                *slot = match *well {
                    WellState::Vacuum => sample_coherent_wigner(Complex64::new(0.0, 0.0), rng),
                    WellState::Coherent(a) => sample_coherent_wigner(a, rng),
                    WellState::Fock(n) => sample_fock_wigner(n, rng)?,
                };
            }
            Ok(Amplitudes::Classical(out))
        }
        Representation::PositiveP => {
            let mut s = PpAmps::default();
            for (j, well) in spec.wells.iter().enumerate() {
                let (a, ap) = match *well {
                    WellState::Vacuum => sample_coherent_pp(Complex64::new(0.0, 0.0)),
                    WellState::Coherent(a) => sample_coherent_pp(a),
                    WellState::Fock(n) => sample_fock_pp(n, rng),
                };
                s.alpha[j] = a;
                s.alpha_plus[j] = ap;
            }
            Ok(Amplitudes::PositiveP(s))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TrajectoryRng;
    use proptest::prelude::*;

    /// Mean and standard error of the mean.
    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn within(xs: &[f64], expected: f64, sigmas: f64) {
        let (m, se) = mean_se(xs);
        assert!(
            (m - expected).abs() <= sigmas * se,
            "mean {m} vs {expected}, se {se}"
        );
    }

    #[test]
    fn coherent_wigner_vacuum_moments() {
        let mut rng = TrajectoryRng::new(1, 0);
        let xs: Vec<Complex64> = (0..1_000_000)
            .map(|_| sample_coherent_wigner(Complex64::new(0.0, 0.0), &mut rng))
            .collect();
        let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
        let n2: Vec<f64> = xs.iter().map(|z| z.norm_sqr()).collect();
        within(&re, 0.0, 5.0);
        within(&im, 0.0, 5.0);
        within(&n2, 0.5, 5.0);
        // quadrature variance 1/4
        let sq: Vec<f64> = re.iter().map(|x| x * x).collect();
        within(&sq, 0.25, 5.0);
    }

    #[test]
    fn coherent_wigner_large_amplitude() {
        let alpha = Complex64::new(200f64.sqrt(), 0.0);
        let mut rng = TrajectoryRng::new(2, 0);
        let n2: Vec<f64> = (0..200_000)
            .map(|_| sample_coherent_wigner(alpha, &mut rng).norm_sqr())
            .collect();
        within(&n2, 200.5, 5.0);
    }

    #[test]
    fn coherent_pp_is_conjugate_pair() {
        let r = 200f64.sqrt();
        assert_eq!(
            sample_coherent_pp(Complex64::new(r, 0.0)),
            (Complex64::new(r, 0.0), Complex64::new(r, 0.0))
        );
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(sample_coherent_pp(z), (z, z));
        assert_eq!(
            sample_coherent_pp(Complex64::new(1.0, 1.0)),
            (Complex64::new(1.0, 1.0), Complex64::new(1.0, -1.0))
        );
    }

    #[test]
    fn fock_ring_at_200() {
        let (p, q) = fock_wigner_ring(200);
        let direct = 0.5 * (401.0f64 + 2.0 * 40200f64.sqrt()).sqrt();
        assert_eq!(p, direct);
        assert!((q - 1.0 / (4.0 * direct)).abs() < 1e-18);
        assert!((p * p + q * q - 200.5).abs() < 1e-12);
    }

    #[test]
    fn fock_wigner_rejects_zero() {
        let mut rng = TrajectoryRng::new(0, 0);
        assert!(matches!(
            sample_fock_wigner(0, &mut rng),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fock_wigner_moments_at_200() {
        let mut rng = TrajectoryRng::new(3, 0);
        let xs: Vec<Complex64> = (0..200_000)
            .map(|_| sample_fock_wigner(200, &mut rng).unwrap())
            .collect();
        let n2: Vec<f64> = xs.iter().map(|z| z.norm_sqr()).collect();
        within(&n2, 200.5, 5.0);
        within(&xs.iter().map(|z| z.re).collect::<Vec<_>>(), 0.0, 5.0);
        within(&xs.iter().map(|z| z.im).collect::<Vec<_>>(), 0.0, 5.0);
        // number spread is sub-Poissonian: the coherent state would give ~200
        let (m, _) = mean_se(&n2);
        let var = n2.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n2.len() as f64;
        assert!(var < 1.0, "number variance {var}");
    }

    #[test]
    fn fock_pp_moments() {
        let mut rng = TrajectoryRng::new(4, 0);
        let n = 200u64;
        let mut first = Vec::with_capacity(1_000_000);
        let mut second = Vec::with_capacity(1_000_000);
        let mut amp = Vec::with_capacity(1_000_000);
        for _ in 0..1_000_000 {
            let (a, ap) = sample_fock_pp(n, &mut rng);
            first.push((ap * a).re);
            second.push((ap * ap * a * a).re);
            amp.push(a.re);
        }
        within(&first, 200.0, 5.0);
        within(&second, 200.0 * 199.0, 5.0);
        within(&amp, 0.0, 5.0);

        let mut rng = TrajectoryRng::new(5, 0);
        let zero: Vec<f64> = (0..200_000)
            .map(|_| {
                let (a, ap) = sample_fock_pp(0, &mut rng);
                (ap * a).re
            })
            .collect();
        within(&zero, 0.0, 5.0);
    }

    #[test]
    fn gamma_moments_and_exponential_case() {
        let mut rng = TrajectoryRng::new(6, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| gamma_sample(201.0, &mut rng).unwrap())
            .collect();
        within(&xs, 201.0, 5.0);
        let (m, _) = mean_se(&xs);
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        // sd of the sample variance for a Gamma(a) is ≈ sqrt((2a² + 6a)/n)
        let sd_var = ((2.0 * 201.0f64.powi(2) + 6.0 * 201.0) / xs.len() as f64).sqrt();
        assert!((var - 201.0).abs() < 5.0 * sd_var, "variance {var}");

        let mut rng = TrajectoryRng::new(7, 0);
        let tail: Vec<f64> = (0..1_000_000)
            .map(|_| (gamma_sample(1.0, &mut rng).unwrap() > 1.0) as u8 as f64)
            .collect();
        within(&tail, (-1.0f64).exp(), 5.0);
    }

    #[test]
    fn gamma_small_shape_mean() {
        let mut rng = TrajectoryRng::new(8, 0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| gamma_sample(0.3, &mut rng).unwrap())
            .collect();
        within(&xs, 0.3, 5.0);
    }

    #[test]
    fn gamma_rejects_bad_shape() {
        let mut rng = TrajectoryRng::new(0, 0);
        for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(gamma_sample(s, &mut rng).is_err());
        }
    }

    #[test]
    fn initial_samples_follow_representation() {
        let spec = InitialStateSpec::fock_in_first(200);
        let mut rng = TrajectoryRng::new(9, 0);
        match sample_initial(&spec, Representation::Gpe, &mut rng).unwrap() {
            Amplitudes::Classical(a) => {
                assert_eq!(a[0], Complex64::new(200f64.sqrt(), 0.0));
                assert_eq!(a[1], Complex64::new(0.0, 0.0));
            }
            _ => panic!(),
        }
        match sample_initial(&spec, Representation::PositiveP, &mut rng).unwrap() {
            Amplitudes::PositiveP(s) => {
                assert_eq!(s.alpha[2], Complex64::new(0.0, 0.0));
                assert_eq!(s.alpha_plus[2], Complex64::new(0.0, 0.0));
            }
            _ => panic!(),
        }
        let bad = InitialStateSpec {
            wells: [WellState::Fock(0), WellState::Vacuum, WellState::Vacuum],
        };
        assert!(bad.check(Representation::Wigner).is_err());
        assert!(bad.check(Representation::PositiveP).unwrap().is_empty());
        assert_eq!(
            InitialStateSpec::fock_in_first(3)
                .check(Representation::Wigner)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn samplers_are_deterministic_in_the_stream() {
        let draw = || {
            let mut rng = TrajectoryRng::new(11, 42);
            let a = sample_fock_wigner(50, &mut rng).unwrap();
            let (b, c) = sample_fock_pp(50, &mut rng);
            let d = sample_coherent_wigner(Complex64::new(1.0, 2.0), &mut rng);
            [a, b, c, d]
        };
        let x = draw();
        let y = draw();
        for (p, q) in x.iter().zip(y.iter()) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }

    proptest! {
        #[test]
        fn fock_ring_identity(n in 1u64..1_000_000) {
            let (p, q) = fock_wigner_ring(n);
            let target = n as f64 + 0.5;
            prop_assert!((p * p + q * q - target).abs() <= 8.0 * f64::EPSILON * target);
            prop_assert!((q * 4.0 * p - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
    }
}
