use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gramdiff_core::campaign::CampaignConfig;
use gramdiff_core::evolution::{population_fitness, recombine, DistanceKind, ElitistArchive};
use gramdiff_core::generator::{program_rng, sample_block};
use gramdiff_core::refc::{check_program, BugProfile};
use gramdiff_core::{feature_vector, render, Block, Individual, SamplerConfig};
use std::hint::black_box;

fn blocks(n: u64, bias: f64) -> Vec<Block> {
    let (g, ctx) = CampaignConfig::default().load_inputs().unwrap();
    let cfg = SamplerConfig {
        simplicity_bias: bias,
        ..Default::default()
    };
    (0..n)
        .map(|k| sample_block(&g, &ctx, &cfg, &mut program_rng(0, k)).unwrap())
        .collect()
}

fn sampling(c: &mut Criterion) {
    let (g, ctx) = CampaignConfig::default().load_inputs().unwrap();
    let mut group = c.benchmark_group("sample_block");
    for bias in [0.4, 0.5, 0.6] {
        let cfg = SamplerConfig {
            simplicity_bias: bias,
            ..Default::default()
        };
        let mut k = 0;
        group.bench_with_input(BenchmarkId::from_parameter(bias), &cfg, |b, cfg| {
            b.iter(|| {
                k += 1;
                sample_block(&g, &ctx, cfg, &mut program_rng(0, k)).unwrap()
            })
        });
    }
    group.finish();
}

fn checking(c: &mut Criterion) {
    let sources: Vec<String> = blocks(32, 0.5).iter().map(render).collect();
    c.bench_function("refc_check_32_programs", |b| {
        b.iter(|| {
            for s in &sources {
                black_box(check_program(s, BugProfile::All));
            }
        })
    });
}

fn evolution(c: &mut Criterion) {
    let pop = blocks(50, 0.5);
    let vectors: Vec<_> = pop.iter().map(feature_vector).collect();
    c.bench_function("population_fitness_50_l2", |b| {
        b.iter(|| population_fitness(black_box(&vectors), DistanceKind::L2))
    });
    let mut rng = program_rng(1, 0);
    c.bench_function("recombine", |b| b.iter(|| recombine(&pop[0], &pop[1], &mut rng)));
    let individuals: Vec<Individual> = pop
        .into_iter()
        .enumerate()
        .map(|(i, b)| Individual::new(i as u64, b))
        .collect();
    c.bench_function("archive_update_50", |b| {
        b.iter(|| {
            let mut archive = ElitistArchive::new();
            archive.update(&individuals)
        })
    });
}

criterion_group!(benches, sampling, checking, evolution);
criterion_main!(benches);
