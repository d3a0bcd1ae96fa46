//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate falls below the absolute tolerance. The subdivision order
//! depends only on the integrand, so repeated evaluations are bit-identical.

use alloc::vec::Vec;

use crate::math::abs;
use crate::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerance and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            abs_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

/// Integral value and the summed local error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: abs((kronrod - gauss) * half),
    }
}

/// Integrates `f` over `[a, b]`, first splitting at every breakpoint that lies
/// strictly inside the interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadratureOptions,
) -> Result<Estimate> {
    if !(b > a) {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b && x.is_finite())
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let mut segments: Vec<Segment> = Vec::with_capacity(cuts.len() + 16);
    let mut left = a;
    for &c in cuts.iter().chain(core::iter::once(&b)) {
        if c > left {
            segments.push(kronrod21(&f, left, c));
        }
        left = c;
    }

    // Segments too narrow to split further keep their error but are frozen.
    let mut frozen = alloc::vec![false; segments.len()];
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= opts.abs_tol {
            break;
        }
        if segments.len() >= opts.max_subdivisions {
            return Err(Error::QuadratureNotConverged {
                achieved: total_error,
                requested: opts.abs_tol,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(i, _)| !frozen[*i])
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            return Err(Error::QuadratureNotConverged {
                achieved: total_error,
                requested: opts.abs_tol,
            });
        };
        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) < 1e-14 * (1.0 + abs(mid)) {
            frozen[worst] = true;
            if frozen.iter().all(|&x| x) {
                if total_error <= 1e3 * opts.abs_tol {
                    break;
                }
                return Err(Error::QuadratureNotConverged {
                    achieved: total_error,
                    requested: opts.abs_tol,
                });
            }
            continue;
        }
        segments[worst] = kronrod21(&f, seg.a, mid);
        segments.push(kronrod21(&f, mid, seg.b));
        frozen.push(false);
    }

    // Sum in interval order so the result does not depend on the refinement path.
    segments.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap());
    Ok(Estimate {
        value: segments.iter().map(|s| s.value).sum(),
        error: segments.iter().map(|s| s.error).sum(),
    })
}
