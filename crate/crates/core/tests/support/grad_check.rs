//! Central finite differences against an analytic gradient.

/// Largest relative error between `analytic` and the central difference of
/// `loss` around `params`, over the coordinates in `indices`.
///
/// Both derivatives below `floor` in magnitude are compared absolutely.
pub fn max_relative_error(
    loss: &mut dyn FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    floor: f64,
) -> f64 {
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for &i in indices {
        let h = 1e-6 * params[i].abs().max(1.0);
        p[i] = params[i] + h;
        let up = loss(&p);
        p[i] = params[i] - h;
        let down = loss(&p);
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}
