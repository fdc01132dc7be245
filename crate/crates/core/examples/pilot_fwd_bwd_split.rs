// SPDX-License-Identifier: Apache-2.0
//! Forward-vs-backward wall split on the real model path.

use encopt_core::encoding::SoftTensor;
use encopt_core::surrogate::{
    backward_regression, forward_regression, inputs_from_soft, ModelConfig, SurrogateParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let params = SurrogateParams::init(ModelConfig::default(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch: Vec<SoftTensor> = (0..256)
        .map(|_| SoftTensor::new((0..64).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap())
        .collect();
    let reps = 30;

    let start = Instant::now();
    for _ in 0..reps {
        let (y, cache) = forward_regression(&params, inputs_from_soft(&batch));
        std::hint::black_box((&y, &cache));
    }
    let fwd = start.elapsed().as_secs_f64() / reps as f64;

    let (y, cache) = forward_regression(&params, inputs_from_soft(&batch));
    let dy: Vec<f64> = y.iter().map(|_| 1.0).collect();
    let start = Instant::now();
    for _ in 0..reps {
        let g = backward_regression(&params, &cache, &dy, true, false);
        std::hint::black_box(&g);
    }
    let bwd = start.elapsed().as_secs_f64() / reps as f64;
    println!("forward: {:.1} ms/batch  backward: {:.1} ms/batch  -> {:.0} samples/s", fwd * 1e3, bwd * 1e3, 256.0 / (fwd + bwd));
}
