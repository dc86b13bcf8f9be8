//! Benchmarks for the data-parallel hot paths. Run once with the default
//! features (rayon) and once with `--no-default-features` (sequential) to
//! compare the two backends:
//!
//! ```sh
//! cargo bench --bench parallel
//! cargo bench --bench parallel --no-default-features
//! ```
//!
//! Group names carry the backend so both result sets can live side by side
//! in criterion's report directory.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;

use qgas::channelme::{self, ChannelBasis};
use qgas::gasenv::GasParams;
use qgas::qlbe::{
    m_out_cl, BrownianParams, GeneratorOptions, LVariant, MomentumDensityMatrix, MomentumGrid3,
    RatePairKernel,
};
use qgas::quad::{self, QuadratureSpec};
use qgas::scattering::{GaussianBorn, HardSphere, TwoChannelToy};
use qgas::{testkit, C64};

#[cfg(feature = "parallel")]
const BACKEND: &str = "parallel";
#[cfg(not(feature = "parallel"))]
const BACKEND: &str = "sequential";

fn gas() -> GasParams {
    GasParams::new(1.0, 1.0, 1.0).unwrap()
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn bench_rate_tensor(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("rate_tensor/{BACKEND}"));
    let basis = ChannelBasis::new(vec![0.0, 0.8]).unwrap();
    let mut rng = testkit::rng(1);
    let model = TwoChannelToy::new([0.0, 0.8], testkit::random_complex_matrix(&mut rng, 2), 1.0);
    group.bench_function(BenchmarkId::from_parameter("two-channel"), |b| {
        b.iter(|| channelme::rate_tensor(&model, &gas(), &basis, &spec()).unwrap())
    });
    group.finish();
}

fn bench_out_rate(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("out_rate/{BACKEND}"));
    let tracer = BrownianParams::new(2.0).unwrap();
    let model = GaussianBorn::new(1.0, 1.5);
    let p = Vector3::new(0.4, -0.8, 1.1);
    group.bench_function(BenchmarkId::from_parameter("gaussian-born"), |b| {
        b.iter(|| m_out_cl(&model, &p, &gas(), &tracer, &spec()).unwrap())
    });
    group.finish();
}

fn bench_kernel_build(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("kernel_build/{BACKEND}"));
    group.sample_size(10);
    let tracer = BrownianParams::new(1.0).unwrap();
    let model = HardSphere::new(1.0);
    for points in [7usize, 11] {
        let grid = MomentumGrid3::new(points, 3.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(points), &grid, |b, grid| {
            b.iter(|| {
                RatePairKernel::build(
                    &model,
                    *grid,
                    &gas(),
                    &tracer,
                    &spec(),
                    &[],
                    LVariant::Monitoring,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_kernel_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("kernel_apply/{BACKEND}"));
    let tracer = BrownianParams::new(1.0).unwrap();
    let model = HardSphere::new(1.0);
    for points in [11usize, 15] {
        let grid = MomentumGrid3::new(points, 4.0).unwrap();
        let kernel = RatePairKernel::build(
            &model,
            grid,
            &gas(),
            &tracer,
            &spec(),
            &[],
            LVariant::Monitoring,
        )
        .unwrap();
        let rho = MomentumDensityMatrix::thermal(grid, &tracer, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(points), &kernel, |b, kernel| {
            b.iter(|| kernel.apply(&rho, &GeneratorOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_mc_integrate(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("mc_integrate/{BACKEND}"));
    group.bench_function(BenchmarkId::from_parameter("gaussian-3d"), |b| {
        b.iter(|| {
            quad::mc_integrate(
                |v: &Vector3<f64>| C64::new((-v.norm_squared()).exp(), 0.0),
                |rng| testkit::random_vector3(rng, 1.0),
                100_000,
                42,
            )
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_rate_tensor,
    bench_out_rate,
    bench_kernel_build,
    bench_kernel_apply,
    bench_mc_integrate
);
criterion_main!(benches);
