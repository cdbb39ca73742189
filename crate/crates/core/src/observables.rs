//! Ensemble moments and the observables built from them.
//!
//! Trajectories are grouped into batches. Each batch keeps plain running sums
//! per sample time; standard errors come from the spread of the batch means,
//! with products of means propagated to first order. ξ₁₃ is the
//! Hillery-Zubairy correlation
//!
//! ```text
//! ξ₁₃ = ⟨a₁†a₃⟩⟨a₃†a₁⟩ − ⟨a₁†a₁a₃†a₃⟩
//! ```
//!
//! which is positive only for entangled end wells.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Amplitudes;
use crate::error::{Error, Result};
use crate::model::Representation;

/// Running sums for one sample time of one batch.
///
/// Classical amplitudes store |α_j|², α₁*α₃, α₃*α₁ and |α₁|²|α₃|²; positive-P
/// stores α_j⁺α_j, α₁⁺α₃, α₃⁺α₁ and α₁⁺α₁α₃⁺α₃.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MomentSums {
    pub count: u64,
    pub number: [Complex64; 3],
    pub c13: Complex64,
    pub c31: Complex64,
    pub n1n3: Complex64,
}

impl MomentSums {
    #[inline]
    pub fn record(&mut self, amps: &Amplitudes) {
        self.count += 1;
        match amps {
            Amplitudes::Classical(a) => {
                let n = [a[0].norm_sqr(), a[1].norm_sqr(), a[2].norm_sqr()];
                for j in 0..3 {
                    self.number[j].re += n[j];
                }
                let c13 = a[0].conj() * a[2];
                self.c13 += c13;
                self.c31 += c13.conj();
                self.n1n3.re += n[0] * n[2];
            }
            Amplitudes::PositiveP(s) => {
                let n: [Complex64; 3] = std::array::from_fn(|j| s.alpha_plus[j] * s.alpha[j]);
                for j in 0..3 {
                    self.number[j] += n[j];
                }
                self.c13 += s.alpha_plus[0] * s.alpha[2];
                self.c31 += s.alpha_plus[2] * s.alpha[0];
                self.n1n3 += n[0] * n[2];
            }
        }
    }

    fn add(&mut self, other: &MomentSums) {
        self.count += other.count;
        for j in 0..3 {
            self.number[j] += other.number[j];
        }
        self.c13 += other.c13;
        self.c31 += other.c31;
        self.n1n3 += other.n1n3;
    }

    fn means(&self) -> Option<Means> {
        if self.count == 0 {
            return None;
        }
        let inv = 1.0 / self.count as f64;
        Some(Means {
            number: self.number.map(|x| x * inv),
            c13: self.c13 * inv,
            c31: self.c31 * inv,
            n1n3: self.n1n3 * inv,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Means {
    number: [Complex64; 3],
    c13: Complex64,
    c31: Complex64,
    n1n3: Complex64,
}

/// Sample grid shared by every accumulator of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub t_p: f64,
    pub intervals: usize,
}

impl SampleGrid {
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_p * (i as f64 / self.intervals as f64)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// Per-batch moment sums on a fixed sample grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    representation: Representation,
    grid: SampleGrid,
    batches: BTreeMap<usize, Vec<MomentSums>>,
}

impl MomentAccumulator {
    pub fn new(representation: Representation, grid: SampleGrid) -> Self {
        Self {
            representation,
            grid,
            batches: BTreeMap::new(),
        }
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn grid(&self) -> SampleGrid {
        self.grid
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    /// Mutable sums of `batch`, created empty if absent.
    pub fn batch_mut(&mut self, batch: usize) -> &mut [MomentSums] {
        let n = self.grid.len();
        self.batches
            .entry(batch)
            .or_insert_with(|| vec![MomentSums::default(); n])
    }

    pub fn record(&mut self, batch: usize, sample: usize, amps: &Amplitudes) {
        self.batch_mut(batch)[sample].record(amps);
    }

    /// Number of trajectories that contributed at each sample time.
    pub fn counts(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.grid.len()];
        for sums in self.batches.values() {
            for (o, s) in out.iter_mut().zip(sums) {
                *o += s.count;
            }
        }
        out
    }

    /// Adds every sum of `other` into `self`, batch by batch.
    pub fn merge(mut self, other: MomentAccumulator) -> Result<MomentAccumulator> {
        if self.representation != other.representation {
            return Err(Error::Mismatch(format!(
                "representations {} and {}",
                self.representation, other.representation
            )));
        }
        if self.grid != other.grid {
            return Err(Error::Mismatch(format!(
                "sample grids {:?} and {:?}",
                self.grid, other.grid
            )));
        }
        for (b, sums) in other.batches {
            match self.batches.get_mut(&b) {
                Some(mine) => mine.iter_mut().zip(&sums).for_each(|(m, s)| m.add(s)),
                None => {
                    self.batches.insert(b, sums);
                }
            }
        }
        Ok(self)
    }

    fn pooled(&self, sample: usize) -> MomentSums {
        let mut total = MomentSums::default();
        for sums in self.batches.values() {
            total.add(&sums[sample]);
        }
        total
    }

    /// Estimate of a functional that is linear in the means at `sample`.
    /// `lin(batch, global)` must be linear in `batch` for fixed `global`.
    fn linearized<F>(&self, sample: usize, value: f64, lin: F) -> Result<Estimate>
    where
        F: Fn(&Means, &Means) -> f64,
    {
        let pooled = self.pooled(sample);
        let global = pooled.means().ok_or(Error::EmptyEnsemble { sample })?;
        let centre = lin(&global, &global);
        let total = pooled.count as f64;
        let mut used = 0usize;
        let mut acc = 0.0;
        for sums in self.batches.values() {
            if let Some(m) = sums[sample].means() {
                let w = sums[sample].count as f64 / total;
                acc += (w * (lin(&m, &global) - centre)).powi(2);
                used += 1;
            }
        }
        let stderr = if used >= 2 {
            (acc * used as f64 / (used as f64 - 1.0)).sqrt()
        } else if self.representation.is_stochastic() {
            f64::NAN
        } else {
            0.0
        };
        Ok(Estimate { value, stderr })
    }

    fn global_means(&self, sample: usize) -> Result<Means> {
        self.pooled(sample)
            .means()
            .ok_or(Error::EmptyEnsemble { sample })
    }

    /// Population of `well` (0-based) at `sample`.
    pub fn population(&self, well: usize, sample: usize) -> Result<Estimate> {
        let m = self.global_means(sample)?;
        let shift = match self.representation {
            Representation::Wigner => 0.5,
            _ => 0.0,
        };
        self.linearized(sample, m.number[well].re - shift, |b, _| b.number[well].re)
    }

    /// Imaginary part of the positive-P population estimator; zero for
    /// classical amplitudes.
    pub fn population_imag(&self, well: usize, sample: usize) -> Result<f64> {
        Ok(self.global_means(sample)?.number[well].im)
    }

    /// ξ₁₃ at `sample` with the normal-ordering corrections appropriate to
    /// the representation.
    pub fn xi13(&self, sample: usize) -> Result<Estimate> {
        let m = self.global_means(sample)?;
        let product = (m.c13 * m.c31).re;
        match self.representation {
            Representation::Wigner => {
                // ⟨a₁†a₁a₃†a₃⟩ = mean|α₁|²|α₃|² − ½(N₁ + N₃) − ¼ with the
                // physical populations N_j = mean|α_j|² − ½
                let (n1, n3) = (m.number[0].re - 0.5, m.number[2].re - 0.5);
                let normal = m.n1n3.re - 0.5 * (n1 + n3) - 0.25;
                self.linearized(sample, product - normal, |b, g| {
                    (g.c31 * b.c13 + g.c13 * b.c31).re - b.n1n3.re
                        + 0.5 * b.number[0].re
                        + 0.5 * b.number[2].re
                })
            }
            _ => self.linearized(sample, product - m.n1n3.re, |b, g| {
                (g.c31 * b.c13 + g.c13 * b.c31).re - b.n1n3.re
            }),
        }
    }

    /// Imaginary part of the positive-P ξ₁₃ estimator.
    pub fn xi13_imag(&self, sample: usize) -> Result<f64> {
        let m = self.global_means(sample)?;
        Ok((m.c13 * m.c31 - m.n1n3).im)
    }

    /// Means of ⟨a₁†a₃⟩ and ⟨a₃†a₁⟩ at `sample`.
    pub fn coherences(&self, sample: usize) -> Result<(Complex64, Complex64)> {
        let m = self.global_means(sample)?;
        Ok((m.c13, m.c31))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

/// Finalized observables on the sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub representation: Representation,
    pub times: Vec<f64>,
    pub populations: [Vec<Estimate>; 3],
    pub xi13: Vec<Estimate>,
    /// Fraction of the started trajectories that have diverged by each time.
    pub divergence_fraction: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_population(&self, sample: usize) -> Estimate {
        let value = self.populations.iter().map(|p| p[sample].value).sum();
        let var: f64 = self.populations.iter().map(|p| p[sample].stderr.powi(2)).sum();
        Estimate {
            value,
            stderr: var.sqrt(),
        }
    }
}

/// Per-well populations with standard errors.
pub fn populations(acc: &MomentAccumulator) -> Result<[Vec<Estimate>; 3]> {
    let n = acc.grid().len();
    let mut out: [Vec<Estimate>; 3] = Default::default();
    for (well, series) in out.iter_mut().enumerate() {
        *series = (0..n)
            .map(|i| acc.population(well, i))
            .collect::<Result<_>>()?;
    }
    Ok(out)
}

/// ξ₁₃ from normally ordered positive-P moments.
pub fn xi13_pp(acc: &MomentAccumulator) -> Result<Vec<Estimate>> {
    if acc.representation() != Representation::PositiveP {
        return Err(Error::Mismatch("xi13_pp needs a positive-P accumulator".into()));
    }
    (0..acc.grid().len()).map(|i| acc.xi13(i)).collect()
}

/// ξ₁₃ from symmetrically ordered Wigner moments.
pub fn xi13_wigner(acc: &MomentAccumulator) -> Result<Vec<Estimate>> {
    if acc.representation() != Representation::Wigner {
        return Err(Error::Mismatch("xi13_wigner needs a Wigner accumulator".into()));
    }
    (0..acc.grid().len()).map(|i| acc.xi13(i)).collect()
}

/// Converts an accumulator into a [`TimeSeries`].
pub fn finalize(acc: &MomentAccumulator) -> Result<TimeSeries> {
    let counts = acc.counts();
    let started = counts.first().copied().unwrap_or(0);
    if started == 0 {
        return Err(Error::EmptyEnsemble { sample: 0 });
    }
    let divergence_fraction = counts
        .iter()
        .map(|&c| 1.0 - c as f64 / started as f64)
        .collect();
    let xi13 = (0..acc.grid().len())
        .map(|i| acc.xi13(i))
        .collect::<Result<_>>()?;
    Ok(TimeSeries {
        representation: acc.representation(),
        times: acc.grid().times(),
        populations: populations(acc)?,
        xi13,
        divergence_fraction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Coherent,
    Fock,
}

/// ξ₁₃ at the half-way point if each end well still held an unchanged
/// coherent state, or a Fock state with N_A/2 atoms.
pub fn xi13_analytic_midpoint(kind: StateKind, n_total: f64) -> f64 {
    match kind {
        StateKind::Coherent => 0.0,
        // Fock states have ⟨a₁†a₃⟩ = 0, leaving −⟨N₁⟩⟨N₃⟩
        StateKind::Fock => -n_total * n_total / 4.0,
    }
}
