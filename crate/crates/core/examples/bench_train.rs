use ltae_core::metrics::ImageSet;
use ltae_core::models::{
    backward_ltae, build_model, corrupt_input, forward_ltae_with_target, CorruptionSpec,
    ModelConfig, ModelVariant,
};
use ltae_core::nn::{ClrSchedule, DenseMatrix, Rng};
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(1);
    let data =
        DenseMatrix::from_vec(100, 784, rng.uniform_vec(0.0, 1.0, 100 * 784)).unwrap();
    let mut config = ModelConfig::for_variant(ModelVariant::DltaeM);
    config.iterations = 200;
    config.clr = ClrSchedule::new(0.001, 0.005, 10).unwrap();
    let mut bundle = build_model(&config, &mut rng).unwrap();
    let spec = CorruptionSpec::new(0.5).unwrap();

    let reps = 100;
    // corruption
    let t = Instant::now();
    for _ in 0..reps {
        let _ = corrupt_input(&data, &spec, &mut rng);
    }
    println!("corrupt:  {:.2} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);

    let corrupted = corrupt_input(&data, &spec, &mut rng);
    // forward
    let t = Instant::now();
    for _ in 0..reps {
        let _ = forward_ltae_with_target(&bundle, &corrupted, &data, &mut rng, true).unwrap();
    }
    println!("forward:  {:.2} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);

    let fwd = forward_ltae_with_target(&bundle, &corrupted, &data, &mut rng, true).unwrap();
    // backward
    let t = Instant::now();
    for _ in 0..reps {
        let _ = backward_ltae(&bundle, &fwd).unwrap();
    }
    println!("backward: {:.2} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);

    let grads = backward_ltae(&bundle, &fwd).unwrap();
    // sgd
    let t = Instant::now();
    for _ in 0..reps {
        bundle.encoder.sgd_step(&grads.encoder, 1e-9).unwrap();
        bundle.decoder.sgd_step(&grads.decoder, 1e-9).unwrap();
    }
    println!("sgd:      {:.2} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);

    // raw gemm comparison: the six big products of one iteration
    let x = DenseMatrix::from_vec(100, 784, rng.uniform_vec(0.0, 1.0, 78400)).unwrap();
    let w1 = DenseMatrix::from_vec(500, 784, rng.uniform_vec(-0.1, 0.1, 392000)).unwrap();
    let w2 = DenseMatrix::from_vec(500, 500, rng.uniform_vec(-0.1, 0.1, 250000)).unwrap();
    let dz = DenseMatrix::from_vec(100, 500, rng.uniform_vec(-0.1, 0.1, 50000)).unwrap();
    let t = Instant::now();
    for _ in 0..reps {
        let a = x.matmul_transpose_rhs(&w1).unwrap(); // fwd L1
        let _b = a.matmul_transpose_rhs(&w2).unwrap(); // fwd L2
        let _dw1 = dz.matmul_transpose_lhs(&x).unwrap(); // dW1
        let _dw2 = dz.matmul_transpose_lhs(&a).unwrap(); // dW2
        let _dx2 = dz.matmul(&w2).unwrap(); // dX L2
        let _dx1 = dz.matmul(&w1).unwrap(); // dX L1
    }
    println!("6 gemms (1 net fwd+bwd): {:.2} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
