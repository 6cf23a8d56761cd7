use rand::Rng;

use crate::error::Result;
use crate::nn::tensor::Tensor;

/// Uniform(-bound, bound) tensor.
pub fn uniform<R: Rng>(shape: Vec<usize>, bound: f64, rng: &mut R) -> Result<Tensor> {
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape, values)
}

/// Fan-in rule: Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn fan_in<R: Rng>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Result<Tensor> {
    uniform(shape, 1.0 / (fan_in as f64).sqrt(), rng)
}
