//! Monte Carlo oracles: Birkhoff averages along orbits of the full map and
//! visit statistics of the first-return map, with batch-means error bars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::{I_HI, I_LO};
use crate::observable::Observable;
use crate::orbit::{map_raw, ParamAlpha};

pub const DEFAULT_BURN_IN: usize = 10_000;
pub const MC_BATCHES: usize = 50;
const HISTOGRAM_BINS: usize = 50;
const GENERATOR: &str = "ChaCha20";

/// Visit frequencies on `[lo, hi]` in equal bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Fraction of visits per bin; sums to 1.
    pub freq: Vec<f64>,
    /// Batch-means standard error of each fraction.
    pub std_error: Vec<f64>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.freq.len() as f64
    }

    /// Fraction of visits in `[a, b]` (bins whose centre lies inside) and its
    /// standard error, treating bins as independent.
    pub fn mass(&self, a: f64, b: f64) -> (f64, f64) {
        let w = self.bin_width();
        let mut m = 0.0;
        let mut v = 0.0;
        for (i, (f, e)) in self.freq.iter().zip(&self.std_error).enumerate() {
            let c = self.lo + (i as f64 + 0.5) * w;
            if (a..=b).contains(&c) {
                m += f;
                v += e * e;
            }
        }
        (m, v.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub generator: &'static str,
    pub seed: u64,
    pub alpha: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub estimate: f64,
    pub batch_std_error: f64,
    /// False when correlations are not summable and the error bar is not
    /// backed by a central limit theorem.
    pub reliable: bool,
    /// Restarts after an orbit landed on a fixed point in floating point.
    pub restarts: usize,
    /// Full map: fraction of time spent in `[1/2, 1]`.
    pub window_fraction: Option<f64>,
    pub bins: Option<Histogram>,
}

fn batch_stats(sums: &[f64], per_batch: f64) -> (f64, f64) {
    let means: Vec<f64> = sums.iter().map(|s| s / per_batch).collect();
    let b = means.len() as f64;
    let m = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0);
    (m, (var / b).sqrt())
}

fn check_size(n: usize) -> Result<()> {
    if n < MC_BATCHES || n % MC_BATCHES != 0 {
        return Err(Error::Precondition(format!(
            "sample count {n} must be a positive multiple of {MC_BATCHES}"
        )));
    }
    Ok(())
}

/// Uniform draw in the open interval `(lo, hi)`.
fn draw(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let x = lo + (hi - lo) * u;
        if x > lo && x < hi {
            return x;
        }
    }
}

/// Orbit of `T_alpha` from a random point. In floating point an orbit can
/// land exactly on 1 (then on the fixed point) or on 0; it is restarted from
/// a fresh draw when that happens.
struct Orbit {
    a: f64,
    x: f64,
    rng: ChaCha20Rng,
    restarts: usize,
}

impl Orbit {
    fn new(a: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = draw(&mut rng, 0.0, 1.0);
        Self { a, x, rng, restarts: 0 }
    }

    #[inline]
    fn step(&mut self) -> f64 {
        let y = map_raw(self.a, self.x);
        self.x = if y > 0.0 && y < 1.0 {
            y
        } else {
            self.restarts += 1;
            draw(&mut self.rng, 0.0, 1.0)
        };
        self.x
    }
}

/// Birkhoff average of `phi` along an orbit of `T_alpha` after `burn_in` steps.
pub fn mc_full_map(alpha: ParamAlpha, phi: &Observable, n: usize, burn_in: usize, seed: u64) -> Result<McReport> {
    check_size(n)?;
    let a = alpha.get();
    let mut orbit = Orbit::new(a, seed);
    for _ in 0..burn_in {
        orbit.step();
    }
    let per = n / MC_BATCHES;
    let mut sums = vec![0.0; MC_BATCHES];
    let mut in_window = 0usize;
    for s in sums.iter_mut() {
        let mut acc = 0.0;
        for _ in 0..per {
            let x = orbit.x;
            acc += phi.eval(x);
            in_window += usize::from(x >= I_LO);
            orbit.step();
        }
        *s = acc;
    }
    let (estimate, se) = batch_stats(&sums, per as f64);
    Ok(McReport {
        generator: GENERATOR,
        seed,
        alpha: a,
        n_steps: n,
        burn_in,
        batches: MC_BATCHES,
        estimate,
        batch_std_error: se,
        reliable: a < 0.5,
        restarts: orbit.restarts,
        window_fraction: Some(in_window as f64 / n as f64),
        bins: None,
    })
}

/// Orbit of the first-return map to `[1/2, 1]`: the estimate is the mean
/// return time, the histogram the visit frequencies on `[1/2, 1]`.
pub fn mc_induced_map(alpha: ParamAlpha, n_returns: usize, seed: u64) -> Result<McReport> {
    check_size(n_returns)?;
    let a = alpha.get();
    let mut orbit = Orbit::new(a, seed);
    orbit.x = draw(&mut orbit.rng, I_LO, I_HI);
    let burn_in = DEFAULT_BURN_IN;
    // one return: iterate until the orbit is back in [1/2, 1]
    let ret = |o: &mut Orbit| -> usize {
        let start = o.restarts;
        let mut tau = 0;
        loop {
            let y = o.step();
            tau += 1;
            if o.restarts != start {
                // a restart breaks the excursion; begin a new one inside I
                o.x = draw(&mut o.rng, I_LO, I_HI);
                return 0;
            }
            if y >= I_LO {
                return tau;
            }
        }
    };
    let mut done = 0;
    while done < burn_in {
        if ret(&mut orbit) > 0 {
            done += 1;
        }
    }
    let per = n_returns / MC_BATCHES;
    let width = (I_HI - I_LO) / HISTOGRAM_BINS as f64;
    let mut sums = vec![0.0; MC_BATCHES];
    let mut counts = vec![[0u32; HISTOGRAM_BINS]; MC_BATCHES];
    for (s, cnt) in sums.iter_mut().zip(counts.iter_mut()) {
        let mut acc = 0.0;
        let mut k = 0;
        while k < per {
            let x = orbit.x;
            let tau = ret(&mut orbit);
            if tau == 0 {
                continue;
            }
            let bin = (((x - I_LO) / width) as usize).min(HISTOGRAM_BINS - 1);
            cnt[bin] += 1;
            acc += tau as f64;
            k += 1;
        }
        *s = acc;
    }
    let (estimate, se) = batch_stats(&sums, per as f64);
    let mut freq = vec![0.0; HISTOGRAM_BINS];
    let mut std_error = vec![0.0; HISTOGRAM_BINS];
    for (i, (f, e)) in freq.iter_mut().zip(std_error.iter_mut()).enumerate() {
        let per_bin: Vec<f64> = counts.iter().map(|c| c[i] as f64).collect();
        let (m, s) = batch_stats(&per_bin, per as f64);
        *f = m;
        *e = s;
    }
    Ok(McReport {
        generator: GENERATOR,
        seed,
        alpha: a,
        n_steps: n_returns,
        burn_in,
        batches: MC_BATCHES,
        estimate,
        batch_std_error: se,
        reliable: a < 0.5,
        restarts: orbit.restarts,
        window_fraction: None,
        bins: Some(Histogram {
            lo: I_LO,
            hi: I_HI,
            freq,
            std_error,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(a: f64) -> ParamAlpha {
        ParamAlpha::new(a).unwrap()
    }

    #[test]
    fn constant_observable_is_exact() {
        let r = mc_full_map(alpha(0.3), &Observable::one(), 50_000, 1000, 7).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.batch_std_error, 0.0);
    }

    #[test]
    fn same_seed_same_report() {
        let a = mc_full_map(alpha(0.4), &Observable::identity(), 10_000, 100, 42).unwrap();
        let b = mc_full_map(alpha(0.4), &Observable::identity(), 10_000, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = mc_full_map(alpha(0.4), &Observable::identity(), 10_000, 100, 43).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn induced_histogram_is_a_distribution() {
        let r = mc_induced_map(alpha(0.3), 100_000, 3).unwrap();
        let h = r.bins.as_ref().unwrap();
        let total: f64 = h.freq.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.estimate >= 1.0);
        assert_eq!(h.mass(0.5, 1.0).0, total);
    }

    #[test]
    fn rejects_sizes_not_divisible_into_batches() {
        assert!(mc_full_map(alpha(0.3), &Observable::one(), 1001, 0, 1).is_err());
        assert!(mc_induced_map(alpha(0.3), 10, 1).is_err());
    }

    #[test]
    fn flags_the_nonsummable_regime() {
        let r = mc_full_map(alpha(0.6), &Observable::identity(), 1000, 0, 1).unwrap();
        assert!(!r.reliable);
    }
}
