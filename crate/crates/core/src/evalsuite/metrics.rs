//! L1 distance between an estimate and a reference law.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::generators::GeneratorSpec;
use crate::density::PiecewiseDensity;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Longest stretch searched for density crossings in one step.
const CROSSING_STEP: f64 = 1e-4;
const MC_POINTS: usize = 1_000_000;
const MC_CHUNK: usize = 10_000;
const MC_STREAM: u64 = 0x6c31_6d63;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1Distance {
    pub distance: f64,
    /// Standard error of a Monte Carlo estimate; `None` when computed exactly.
    pub std_error: Option<f64>,
}

/// `∫ |f - g|` over the unit cube, where `g` is the reference density.
///
/// In one dimension the integral is split at every breakpoint of either
/// density and at every crossing of the two, and each piece is integrated
/// through the reference distribution function. Otherwise it is estimated
/// from `10^6` uniform points drawn with `seed`.
pub fn l1_distance(f: &PiecewiseDensity, spec: &GeneratorSpec, seed: u64) -> Result<L1Distance> {
    if f.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: f.dim(),
        });
    }
    if !f.root().is_continuous() {
        return Err(Error::InvalidConfig("L1 distance needs a density on [0, 1]^p".into()));
    }
    if f.dim() == 1 {
        Ok(L1Distance {
            distance: exact_1d(f, spec),
            std_error: None,
        })
    } else {
        monte_carlo(f, spec, seed)
    }
}

fn exact_1d(f: &PiecewiseDensity, spec: &GeneratorSpec) -> f64 {
    let mix = &spec.mixture;
    let g_breaks = mix.breakpoints_1d();
    let mut leaves: Vec<(f64, f64, f64)> = f
        .leaves()
        .iter()
        .map(|l| {
            let (a, b) = l.region.bounds(0);
            (a, b, l.density)
        })
        .collect();
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    leaves
        .par_iter()
        .map(|&(a, b, c)| {
            let mut cuts = vec![a];
            cuts.extend(g_breaks.iter().copied().filter(|&v| v > a && v < b));
            cuts.push(b);
            let mut total = 0.0;
            for w in cuts.windows(2) {
                total += piece(mix, c, w[0], w[1]);
            }
            total
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// `∫_lo^hi |c - g|` where `g` is smooth on `(lo, hi)`.
fn piece(mix: &super::generators::Mixture, c: f64, lo: f64, hi: f64) -> f64 {
    let g = |x: f64| mix.density(&[x]).unwrap_or(0.0);
    // Interior offsets keep evaluations away from jumps at the ends.
    let inside = |x: f64| x.clamp(lo + (hi - lo) * 1e-12, hi - (hi - lo) * 1e-12);
    let steps = ((hi - lo) / CROSSING_STEP).ceil().max(1.0) as usize;
    let mut cuts = vec![lo];
    let mut prev_x = lo;
    let mut prev_s = (c - g(inside(lo))).signum();
    for k in 1..=steps {
        let x = if k == steps { hi } else { lo + (hi - lo) * k as f64 / steps as f64 };
        let s = (c - g(inside(x))).signum();
        if s != prev_s && s != 0.0 && prev_s != 0.0 {
            let (mut a, mut b) = (prev_x, x);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if (c - g(inside(m))).signum() == prev_s {
                    a = m;
                } else {
                    b = m;
                }
            }
            cuts.push(0.5 * (a + b));
        }
        if s != 0.0 {
            prev_s = s;
        }
        prev_x = x;
    }
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| (c * (w[1] - w[0]) - (mix.cdf_1d(w[1]) - mix.cdf_1d(w[0]))).abs())
        .sum()
}

fn monte_carlo(f: &PiecewiseDensity, spec: &GeneratorSpec, seed: u64) -> Result<L1Distance> {
    let dim = f.dim();
    let chunks: Vec<(f64, f64)> = (0..MC_POINTS / MC_CHUNK)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[MC_STREAM, k as u64]);
            let mut x = vec![0.0; dim];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..MC_CHUNK {
                for v in x.iter_mut() {
                    *v = rng.random::<f64>();
                }
                let v = (f.evaluate(&x)? - spec.mixture.density(&x)?).abs();
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect::<Result<_>>()?;
    let n = MC_POINTS as f64;
    let (s, s2) = chunks.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(L1Distance {
        distance: mean,
        std_error: Some((var / n).sqrt()),
    })
}
