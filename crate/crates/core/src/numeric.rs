//! Small numerical kernels shared by the solver modules: adaptive Simpson
//! quadrature, bracketing bisection, sign-scan root isolation and a golden
//! section maximiser.

/// Default absolute tolerance for [`integrate`].
pub const QUAD_TOL: f64 = 1e-9;
/// Hard cap on integrand evaluations per [`integrate`] call.
pub const QUAD_MAX_EVALS: usize = 1_000_000;

const MAX_DEPTH: u32 = 48;
/// Panels are always split this many times before the error test is
/// trusted; a single coarse comparison can agree by accident.
const MIN_DEPTH: u32 = 3;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The evaluation budget is capped at [`QUAD_MAX_EVALS`]; once exhausted the
/// remaining panels are accepted at their current (Richardson-corrected)
/// estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: f64| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let fa = eval(a);
    let fb = eval(b);
    let m = 0.5 * (a + b);
    let fm = eval(m);
    let whole = simpson(a, b, fa, fm, fb);

    // Explicit stack keeps deep refinement off the call stack.
    let mut total = 0.0;
    let mut stack = vec![(a, b, fa, fm, fb, whole, tol, 0u32)];
    while let Some((a, b, fa, fm, fb, whole, tol, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = eval(lm);
        let frm = eval(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol) || evals.get() >= QUAD_MAX_EVALS {
            total += left + right + delta / 15.0;
        } else {
            stack.push((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1));
            stack.push((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1));
        }
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite
/// sign (or one of them zero). Stops once the bracket is narrower than `tol`
/// or cannot be split further in floating point.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(flo.signum() != fhi.signum(), "bisect: no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A root isolated by [`scan_roots`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScannedRoot {
    pub x: f64,
    /// `true` when the root was found as a touching extremum rather than a
    /// sign change.
    pub tangent: bool,
}

/// Finds the zeros of `f` on the open interval `(lo, hi)`.
///
/// `f` is sampled on `steps + 1` uniform points; every strict sign change is
/// refined by bisection to `tol`, and grid points where `f` is exactly zero
/// are reported as is. Local extrema that come within `touch_tol` of zero
/// without crossing are refined by golden section and reported as tangent
/// roots.
pub fn scan_roots<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    steps: usize,
    tol: f64,
    touch_tol: f64,
) -> Vec<ScannedRoot> {
    let steps = steps.max(2);
    let h = (hi - lo) / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|i| lo + h * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..steps {
        let (y0, y1) = (ys[i], ys[i + 1]);
        if i > 0 && y0 == 0.0 {
            roots.push(ScannedRoot { x: xs[i], tangent: false });
        }
        if y0 != 0.0 && y1 != 0.0 && y0.signum() != y1.signum() {
            roots.push(ScannedRoot {
                x: bisect(&f, xs[i], xs[i + 1], tol),
                tangent: false,
            });
        }
    }
    // Touching extrema: interior grid point whose value is the smallest in
    // magnitude among its neighbours while all three share a sign.
    for i in 1..steps {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if a == 0.0 || b == 0.0 || c == 0.0 {
            continue;
        }
        if a.signum() != b.signum() || b.signum() != c.signum() {
            continue;
        }
        if b.abs() > a.abs() || b.abs() > c.abs() {
            continue;
        }
        let sign = b.signum();
        let (x, y) = golden_max(|x| -sign * f(x), xs[i - 1], xs[i + 1], tol);
        let value = -sign * y;
        if value.abs() <= touch_tol {
            roots.push(ScannedRoot { x, tangent: true });
        }
    }
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    roots
}

/// Golden-section maximisation of a unimodal `f` on `[a, b]`.
/// Returns the maximiser and the maximum.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while b - a > tol && iter < 200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
        iter += 1;
    }
    // Endpoints can beat the interior estimate for monotone f.
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let y = f(x);
        if y > best.1 {
            best = (x, y);
        }
    }
    best
}

/// Binomial coefficient as `f64`, exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, not on how the caller produced them.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}
