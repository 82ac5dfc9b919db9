//! Small numerical building blocks shared by the modules.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a slice, ascending index order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Compensated sum of complex values (real and imaginary parts separately).
pub fn compensated_sum_complex(values: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for z in values {
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value())
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    // A(1) = 2, A(2) = 2π, A(d + 2) = 2π A(d) / d.
    let mut area = if d % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if d % 2 == 1 { 1 } else { 2 };
    while k < d {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

/// Fourth-order finite-difference first derivative of uniformly spaced
/// samples, with one-sided fourth-order closures on the first and last two
/// points.
pub fn derivative_4th(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five samples");
    let v = values;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if i >= 2 && i + 2 < n {
            (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h)
        } else if i == 0 {
            (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
        } else if i == 1 {
            (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h)
        } else if i == n - 1 {
            let s = &v[n - 5..n];
            (25.0 * s[4] - 48.0 * s[3] + 36.0 * s[2] - 16.0 * s[1] + 3.0 * s[0]) / (12.0 * h)
        } else {
            let s = &v[n - 5..n];
            (3.0 * s[4] + 10.0 * s[3] - 18.0 * s[2] + 6.0 * s[1] - s[0]) / (12.0 * h)
        };
    }
    out
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Observed convergence orders `log2(e_k / e_{k+1})` for a sequence of
/// errors measured at successively halved mesh sizes.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Integral of `f` over `[a, b]` by composite Gauss–Legendre quadrature with
/// `panels` panels of `order` points.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(&w) {
            acc.add(0.5 * width * wi * f(mid + 0.5 * width * xi));
        }
    }
    acc.value()
}

/// Cumulative integral of uniformly spaced samples `y_k = y(x₀ + k h)` with
/// fourth-order accuracy: interior cells use the four-point Lagrange rule,
/// the first and last cells its one-sided variants. Returns `I_k = ∫_{x₀}^{x_k} y`.
pub fn cumulative_integral_4th(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 4, "need at least four samples");
    let mut out = Vec::with_capacity(n);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for k in 0..n - 1 {
        let cell = if k == 0 {
            h / 24.0 * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3])
        } else if k + 2 >= n {
            h / 24.0 * (y[n - 4] - 5.0 * y[n - 3] + 19.0 * y[n - 2] + 9.0 * y[n - 1])
        } else {
            h / 24.0 * (-y[k - 1] + 13.0 * y[k] + 13.0 * y[k + 1] - y[k + 2])
        };
        acc.add(cell);
        out.push(acc.value());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0e16, 1.0, -1.0e16];
        values.extend(std::iter::repeat(1.0).take(10));
        assert_eq!(compensated_sum(values), 11.0);
    }

    #[test]
    fn derivative_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let v: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin()).collect();
            let d = derivative_4th(&v, h);
            d.iter()
                .enumerate()
                .map(|(i, di)| (di - (i as f64 * h).cos()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(40) / err(80)).log2();
        assert!(order > 3.7, "order {order}");
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = integrate_gl(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0, 3, 5);
        assert!((v - (256.0 / 8.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn cumulative_rule_is_exact_for_cubics() {
        let h = 0.1;
        let y: Vec<f64> = (0..12).map(|k| (k as f64 * h).powi(3) - 2.0 * k as f64 * h).collect();
        let c = cumulative_integral_4th(&y, h);
        for (k, ck) in c.iter().enumerate() {
            let x = k as f64 * h;
            assert!((ck - (x.powi(4) / 4.0 - x * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t - 1.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }
}
