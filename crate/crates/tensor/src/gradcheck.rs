use crate::error::Result;
use crate::tensor::Tensor;

/// Central finite-difference check of reverse-mode gradients.
///
/// `f` must be a deterministic scalar-valued function that rebuilds its
/// graph on every call. Returns the maximum over a sampled coordinate set
/// of |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
pub fn finite_diff_check<F>(f: F, t: &Tensor<f64>, h: f64, max_coords: usize) -> Result<f64>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    t.zero_grad();
    let loss = f(t)?;
    loss.backward()?;
    let analytic = t.grad().unwrap_or_else(|| vec![0.0; t.numel()]);

    let n = t.numel();
    let stride = (n / max_coords.max(1)).max(1);
    let mut worst = 0.0f64;
    for i in (0..n).step_by(stride) {
        let orig = t.data()[i];
        t.with_data_mut(|d| d[i] = orig + h);
        let plus = f(t)?.item();
        t.with_data_mut(|d| d[i] = orig - h);
        let minus = f(t)?.item();
        t.with_data_mut(|d| d[i] = orig);
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        let err = (analytic[i] - numeric).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    Ok(worst)
}
