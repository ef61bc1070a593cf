//! Small numerical helpers: compensated summation, 1-D search and root finding.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for KahanSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = KahanSum::new();
    s.extend(iter);
    s.value()
}

/// `(x^k - y^k) / (x - y)`, continuous across `x = y`.
pub fn power_difference(x: f64, y: f64, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let scale = x.abs().max(y.abs());
    if (x - y).abs() > 1e-6 * scale {
        return (x.powi(k as i32) - y.powi(k as i32)) / (x - y);
    }
    if y == 0.0 {
        return x.powi(k as i32 - 1);
    }
    // sum_{j<k} x^j y^{k-1-j}
    let mut acc = KahanSum::new();
    let mut xp = 1.0;
    let mut yp = y.powi(k as i32 - 1);
    for _ in 0..k {
        acc.add(xp * yp);
        xp *= x;
        yp /= y;
    }
    acc.value()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimiser of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection for a sign change of `f` on `[a, b]`; `None` if the endpoints agree in sign.
///
/// Stops when the bracket is narrower than `tol` or cannot be split further,
/// so `tol = 0` runs to machine precision.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
