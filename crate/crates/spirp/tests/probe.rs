//! Scratch probe (not part of the suite): run with
//! `cargo test -p spirp --test probe --release -- --nocapture --ignored`.

use std::time::Instant;

use spirp::instance::{generate_instance, Recipe, RecipeId, Requirement};
use spirp::mip_search::LbMode;
use spirp::orchestrator::{run, RunParams, Variant};

const CASES: [(RecipeId, u32, Requirement, u64); 10] = [
    (RecipeId::Benchmark1Fio, 30, Requirement::Low, 1),
    (RecipeId::Benchmark1Fio, 30, Requirement::Medium, 2),
    (RecipeId::Benchmark1Fio, 30, Requirement::High, 3),
    (RecipeId::Benchmark1Fio, 60, Requirement::Low, 4),
    (RecipeId::Benchmark1Fio, 60, Requirement::High, 5),
    (RecipeId::Benchmark1Dob, 30, Requirement::Low, 6),
    (RecipeId::Benchmark1Dob, 30, Requirement::Medium, 7),
    (RecipeId::Benchmark1Dob, 30, Requirement::High, 8),
    (RecipeId::Benchmark1Dob, 60, Requirement::Medium, 9),
    (RecipeId::Benchmark1Dob, 60, Requirement::Low, 10),
];

#[test]
#[ignore]
fn probe_full_run() {
    let params = RunParams {
        delta: 10.0,
        elite_complete_k: 3,
        irr_time_limit: 360.0,
        mip_time_limit: 60.0,
        lb_mode: LbMode::Literal,
        seed: 0,
    };
    let mut gaps = Vec::new();
    for (id, acc, req, seed) in CASES {
        let recipe = Recipe { id, n: None, accumulation: acc, requirement: req, price: 0.25 };
        let inst = generate_instance(&recipe, seed).unwrap();
        let wall = Instant::now();
        let report = run(&inst, Variant::MhPlus, &params).unwrap();
        println!(
            "{}: gap={:.2}% z={:.2} lb={:.2} pool={} times=({:.0},{:.0},{:.0}) wall={:.0?}",
            inst.name,
            report.gap,
            report.upper_bound,
            report.lower_bound,
            report.pool_size,
            report.times.irr,
            report.times.construction,
            report.times.mip_search,
            wall.elapsed()
        );
        gaps.push(report.gap);
    }
    let avg = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max = gaps.iter().fold(0.0f64, |a, &b| a.max(b));
    println!("avg={avg:.2}% max={max:.2}%");
}
