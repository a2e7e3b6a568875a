use rand::Rng;
use rand_chacha::ChaCha8Rng;
use uwnet_tensor::{Scalar, Shape, Tensor};

/// Kaiming-uniform weight: values in ±sqrt(6 / fan_in), fan_in = C_in·k·k.
pub fn kaiming_conv<T: Scalar>(
    rng: &mut ChaCha8Rng,
    out_ch: usize,
    in_ch: usize,
    k: usize,
) -> Tensor<T> {
    let shape = Shape::new(out_ch, in_ch, k, k);
    let bound = (6.0 / (in_ch * k * k) as f64).sqrt();
    let data: Vec<T> = (0..shape.numel())
        .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::leaf(shape, data).unwrap()
}

pub fn zeros_leaf<T: Scalar>(shape: Shape) -> Tensor<T> {
    Tensor::leaf(shape, vec![T::zero(); shape.numel()]).unwrap()
}

pub fn const_bias<T: Scalar>(n: usize, value: f64) -> Tensor<T> {
    Tensor::leaf(Shape::new(1, n, 1, 1), vec![T::from_f64(value); n]).unwrap()
}
