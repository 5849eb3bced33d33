//! Special functions in log space and an adaptive Gauss–Kronrod integrator.

use statrs::function::gamma::ln_gamma;

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln C(n, k)` for `0 <= k <= n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn choose2(n: u64) -> f64 {
    let n = n as f64;
    0.5 * n * (n - 1.0)
}

/// `e^{-y} - 1 + y` without cancellation for small `y`.
pub fn exp_defect(y: f64) -> f64 {
    if y < 1e-4 {
        y * y * (0.5 - y * (1.0 / 6.0 - y / 24.0))
    } else {
        (-y).exp_m1() + y
    }
}

// Gauss–Kronrod 21-point nodes on [-1, 1] (positive half, centre last) with
// the embedded 10-point Gauss weights on the odd Kronrod nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive integration of `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below `rel_tol * |integral|` (or a small absolute floor),
/// or the interval budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    integrate_with_breaks(f, &[a, b], rel_tol)
}

/// Like [`integrate`], with the initial partition given by `breaks`
/// (sorted, first and last are the integration limits).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], rel_tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    const ABS_FLOOR: f64 = 1e-300;
    let mut parts: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk21(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= (rel_tol * total.abs()).max(ABS_FLOOR) || parts.len() >= MAX_INTERVALS {
            return total;
        }
        let (worst, _) = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("nonempty");
        let (a, b, _, _) = parts.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            // interval cannot be split further in floating point
            let (v, _) = gk21(&f, a, b);
            parts.push((a, b, v, 0.0));
            continue;
        }
        let (v1, e1) = gk21(&f, a, m);
        let (v2, e2) = gk21(&f, m, b);
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
}
