//! Quadrature helpers shared by the discretisation operators.

/// Composite Simpson rule on `[a, b]` with `panels` subintervals (rounded up
/// to an even count).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(2).next_multiple_of(2);
    let h = (b - a) / panels as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..panels {
        let x = a + k as f64 * h;
        if k % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

/// `n * ∫_{I_i} f`, i.e. the average of `f` over each of the `n` equal cells
/// of `[0, 1]`, by composite Simpson with `panels` per cell.
pub fn cell_averages<F: Fn(f64) -> f64>(f: F, n: usize, panels: usize) -> Vec<f64> {
    let width = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let a = i as f64 * width;
            let b = if i + 1 == n { 1.0 } else { (i + 1) as f64 * width };
            simpson(&f, a, b, panels) / (b - a)
        })
        .collect()
}

/// Adaptive double-exponential quadrature on `[a, b]`.
///
/// Handles the square-root endpoint behaviour of the self-consistency
/// integrands, where composite Newton–Cotes rules lose most of their order.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::double_exponential::integrate(f, a, b, abs_tol).integral
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn cell_averages_of_linear_function() {
        let avg = cell_averages(|x| x - 0.5, 4, 16);
        let expected = [-0.375, -0.125, 0.125, 0.375];
        for (a, e) in avg.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn tanh_sinh_handles_sqrt_endpoints() {
        // quarter disc
        let v = tanh_sinh(|x| (1.0 - (2.0 * x - 1.0).powi(2)).max(0.0).sqrt(), 0.0, 1.0, 1e-14);
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-13);
    }
}
