//! Small numerical helpers shared by the solver, calibration and statistics code.

/// Outcome of a bracketing search: the final bracket and the function value
/// at its midpoint.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Bisection on a function that is non-increasing over `[lo, hi]` with
/// `f(lo) >= 0 >= f(hi)`.
///
/// Stops once the bracket is narrower than `x_tol` and `|f| < f_tol`, or
/// once the bracket cannot be split any further in floating point.
pub fn bisect_decreasing<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, f_tol: f64, max_iter: usize) -> Bracket
where
    F: FnMut(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    let mut fx = f(x);
    for it in 1..=max_iter {
        if fx > 0.0 {
            lo = x;
        } else if fx < 0.0 {
            hi = x;
        } else {
            return Bracket { lo: x, hi: x, x, fx, iterations: it, converged: true };
        }
        let next = 0.5 * (lo + hi);
        let stalled = next <= lo || next >= hi;
        x = next;
        fx = f(x);
        if (hi - lo < x_tol && fx.abs() < f_tol) || stalled {
            return Bracket { lo, hi, x, fx, iterations: it, converged: fx.abs() < f_tol || stalled };
        }
    }
    Bracket { lo, hi, x, fx, iterations: max_iter, converged: false }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() - 1) as f64).sqrt()
}
