use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use smart_tgpn::analysis::{explore, Branching, ExploreConfig};
use smart_tgpn::monitor::{check_proposition, Proposition, Timeline};
use smart_tgpn::sim::{builtin, parse_scenario, simulate, Scenario};

fn scenario(name: &str) -> Scenario {
    parse_scenario(builtin(name).unwrap(), None).unwrap()
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for name in [
        "robot-escalation",
        "robot-conflict",
        "hysteresis-oscillation",
    ] {
        let sc = scenario(name);
        g.bench_with_input(BenchmarkId::from_parameter(name), &sc, |b, sc| {
            b.iter(|| simulate(black_box(sc)).unwrap())
        });
    }
    g.finish();
}

fn monitors(c: &mut Criterion) {
    let sc = scenario("robot-conflict");
    let trace = simulate(&sc).unwrap();
    c.bench_function("monitor/robot-conflict", |b| {
        b.iter(|| {
            let tl = Timeline::new(black_box(&trace)).unwrap();
            for p in Proposition::ALL {
                black_box(check_proposition(&tl, p).unwrap());
            }
        })
    });
}

fn exploration(c: &mut Criterion) {
    let net = scenario("robot-nominal").compiled().unwrap();
    let mut g = c.benchmark_group("explore");
    g.sample_size(10);
    for signals in [2usize, 4, 6] {
        let alphabet = [
            "anom",
            "safe",
            "assist",
            "hardware_fault",
            "disagree",
            "evidence",
        ][..signals]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cfg = ExploreConfig {
            horizon: 20,
            branching: Branching::Earliest,
            alphabet: Some(alphabet),
            ..ExploreConfig::default()
        };
        g.bench_with_input(BenchmarkId::new("single-agent", signals), &cfg, |b, cfg| {
            b.iter(|| explore(&net, cfg).unwrap().len())
        });
    }
    g.finish();
}

criterion_group!(benches, simulation, monitors, exploration);
criterion_main!(benches);
