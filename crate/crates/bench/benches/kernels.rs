use criterion::{criterion_group, criterion_main, Criterion};
use std::sync::Arc;
use thermoflow::assembly::{
    assemble_momentum_system, assemble_temperature_system, PenaltyParams,
};
use thermoflow::constitutive::{
    hb_regularized_solve, stress, ConductivityLaw, StressModel, SymTensor2, ThetaCoeff,
};
use thermoflow::scenario::polynomial_vortex;
use thermoflow::space::interpolate_scalar;
use thermoflow::stepper::discretize;

fn bench_stress(c: &mut Criterion) {
    let carreau = StressModel::CarreauYasuda {
        r: 1.5,
        alpha: ThetaCoeff::Constant(1.0),
        beta: ThetaCoeff::Constant(1.0),
        gamma: ThetaCoeff::Constant(1.0),
    };
    let hb = StressModel::HbRegularized {
        r: 1.8,
        tau_y: 1.0,
        consistency: 1.0,
        eps_reg: 0.05,
    };
    let d = SymTensor2::new(0.7, -0.7, 0.4);
    c.bench_function("stress_carreau_yasuda", |b| {
        b.iter(|| stress(std::hint::black_box(&carreau), &d, 1.3).unwrap())
    });
    c.bench_function("stress_hb_regularized", |b| {
        b.iter(|| hb_regularized_solve(std::hint::black_box(&hb), &d).unwrap())
    });
}

fn bench_assembly(c: &mut Criterion) {
    let disc = discretize(4).unwrap();
    let u = thermoflow::space::interpolate_vector(&disc.v_space, polynomial_vortex).unwrap();
    let theta = interpolate_scalar(&disc.p_space, |_| 1.0).unwrap();
    let model = StressModel::newtonian(2.0);
    let law = ConductivityLaw::Constant(1.0);
    c.bench_function("momentum_assembly_16x16", |b| {
        b.iter(|| {
            assemble_momentum_system(
                &disc.v_space,
                &disc.p_space,
                &u,
                &u,
                &theta,
                0.01,
                &|_| [0.0, 0.0],
                PenaltyParams::off(),
                &model,
            )
            .unwrap()
        })
    });
    c.bench_function("temperature_assembly_16x16", |b| {
        b.iter(|| {
            assemble_temperature_system(
                &disc.p_space, &theta, &u, &theta, 0.01, &law, &model, true, None,
            )
            .unwrap()
        })
    });
    let sys = assemble_momentum_system(
        &disc.v_space,
        &disc.p_space,
        &u,
        &u,
        &theta,
        0.01,
        &|_| [0.0, 0.0],
        PenaltyParams::off(),
        &model,
    )
    .unwrap();
    c.bench_function("momentum_sparse_lu_16x16", |b| b.iter(|| sys.solve().unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_stress, bench_assembly
}
criterion_main!(benches);
