/// Golden-section search for a maximum of `f` on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid scan followed by golden-section refinement around the best grid point.
pub(crate) fn grid_then_golden(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> (f64, f64) {
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..points {
        let v = f(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = (lo + step * (best_i as f64 - 1.0)).max(lo);
    let b = (lo + step * (best_i as f64 + 1.0)).min(hi);
    let (x, fx) = golden_max(&f, a, b, tol);
    if fx >= best {
        (x, fx)
    } else {
        (lo + step * best_i as f64, best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_scan_picks_global_peak() {
        let f = |x: f64| (3.0 * x).cos() + 0.1 * x;
        let (x, _) = grid_then_golden(f, 0.0, 7.0, 200, 1e-10);
        assert!((x - (std::f64::consts::TAU + (1.0f64 / 30.0).asin() / 3.0)).abs() < 1e-6);
    }
}
