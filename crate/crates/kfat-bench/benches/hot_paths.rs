//! The operations a tuning campaign spends its time in: discretization,
//! the steady-state NEES recursion, one Monte Carlo batch, and surrogate
//! fitting/posterior queries.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use kfat_core::oracle::{expected_nees, OracleOpts};
use kfat_core::simulate::{monte_carlo, ScenarioConfig};
use kfat_core::surrogate::{
    fit_hyperparams, kernel_eval, Kernel, MaternOrder, SurrogateFamily, SurrogateState,
};
use kfat_core::sysmodel::{discretize, matrix_exponential, tracking_1d, tracking_2d, NoiseIntensities};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn bench_discretize(c: &mut Criterion) {
    let m1 = tracking_1d();
    let n1 = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
    let m2 = tracking_2d();
    let n2 = NoiseIntensities::from_slices(&[1.0, 2.0], &[0.2, 0.1]).unwrap();
    c.bench_function("discretize_1d", |b| {
        b.iter(|| discretize(black_box(&m1), black_box(&n1), 0.1).unwrap())
    });
    c.bench_function("discretize_2d", |b| {
        b.iter(|| discretize(black_box(&m2), black_box(&n2), 0.1).unwrap())
    });
    let skew = DMatrix::from_row_slice(4, 4, &[
        0.0, 2.0, 0.0, 0.3, -2.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.5, -0.3, 0.0, -0.5, 0.0,
    ]);
    c.bench_function("matrix_exponential_4x4", |b| {
        b.iter(|| matrix_exponential(black_box(&skew)).unwrap())
    });
}

fn bench_oracle(c: &mut Criterion) {
    let cont = tracking_1d();
    let truth = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
    let candidate = NoiseIntensities::from_slices(&[0.7], &[0.2]).unwrap();
    let opts = OracleOpts::default();
    c.bench_function("expected_nees_steady_state", |b| {
        b.iter(|| expected_nees(black_box(&cont), black_box(&candidate), &truth, 0.1, &opts).unwrap())
    });
}

fn bench_monte_carlo(c: &mut Criterion) {
    let cfg = ScenarioConfig::new(
        tracking_1d(),
        NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap(),
        NoiseIntensities::from_slices(&[0.8], &[0.15]).unwrap(),
        0.1,
        200,
        20,
        5,
    )
    .unwrap();
    c.bench_function("monte_carlo_20x200", |b| {
        b.iter(|| monte_carlo(black_box(&cfg)).unwrap())
    });
}

fn surrogate_data(m: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let xs: Vec<DVector<f64>> = (0..m)
        .map(|_| DVector::from_fn(2, |_, _| rng.random_range(0.0..1.0)))
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) + 0.01 * rng.random_range(-1.0..1.0))
        .collect();
    (xs, ys)
}

fn bench_surrogate(c: &mut Criterion) {
    let (xs, ys) = surrogate_data(60);
    let kernel = Kernel::default_for_dim(2, MaternOrder::ThreeHalves);
    c.bench_function("surrogate_factorize_60", |b| {
        b.iter_batched(
            || (xs.clone(), kernel.clone()),
            |(x, k)| SurrogateState::new(x, &ys, k, SurrogateFamily::Gp, 5.0).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let state = SurrogateState::new(xs.clone(), &ys, kernel, SurrogateFamily::Gp, 5.0).unwrap();
    let query = DVector::from_row_slice(&[0.3, 0.6]);
    c.bench_function("surrogate_posterior_60", |b| {
        b.iter(|| state.posterior(black_box(&query)))
    });
    c.bench_function("surrogate_fit_hyperparams_60", |b| {
        b.iter(|| {
            fit_hyperparams(
                &xs,
                &ys,
                2,
                &mut ChaCha12Rng::seed_from_u64(3),
                MaternOrder::ThreeHalves,
            )
        })
    });
    c.bench_function("kernel_eval", |b| {
        let k = Kernel::default_for_dim(2, MaternOrder::ThreeHalves);
        let a = DVector::from_row_slice(&[0.2, 0.4]);
        let z = DVector::from_row_slice(&[0.7, 0.1]);
        b.iter(|| kernel_eval(black_box(&a), black_box(&z), &k))
    });
}

criterion_group!(
    benches,
    bench_discretize,
    bench_oracle,
    bench_monte_carlo,
    bench_surrogate
);
criterion_main!(benches);
