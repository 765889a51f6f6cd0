//! Fixed-step classical Runge-Kutta.

/// Advance `x` by one RK4 step of length `h` for the autonomous system `ẋ = f(x)`.
pub fn rk4_step<const N: usize, F>(x: &[f64; N], h: f64, f: F) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let shifted = |k: &[f64; N], c: f64| -> [f64; N] { std::array::from_fn(|i| x[i] + c * k[i]) };
    let k1 = f(x);
    let k2 = f(&shifted(&k1, h / 2.0));
    let k3 = f(&shifted(&k2, h / 2.0));
    let k4 = f(&shifted(&k3, h));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    // ẍ = a from rest: RK4 is exact for polynomial solutions of degree ≤ 4
    #[test]
    fn constant_acceleration_is_exact() {
        let a = 3.0;
        let h = 0.01;
        let mut x = [0.0, 0.0];
        for _ in 0..100 {
            x = rk4_step(&x, h, |s| [s[1], a]);
        }
        assert!((x[0] - a / 2.0).abs() < 1e-12);
        assert!((x[1] - a).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_convergence_on_decay() {
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut x = [1.0];
            for _ in 0..n {
                x = rk4_step(&x, h, |s| [-s[0]]);
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
