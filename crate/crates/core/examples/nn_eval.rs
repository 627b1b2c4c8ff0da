//! Nearest-neighbour policy success at unseen docks for growing training sets.

use dockaug::augment::{augment_source, BatchConfig};
use dockaug::demo::ValidationRules;
use dockaug::harness::{nn_policy_eval, pick_scene, scripted_demo, source_dock, NnConfig, ScriptConfig};
use dockaug::planner::PlannerConfig;
use dockaug::sampler::{sample_docks, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = pick_scene();
    let seeds = 10;
    let mut sums = [0.0; 3];
    for seed in 0..seeds {
        let src = scripted_demo(&scene, &source_dock(), seed, &ScriptConfig::default())?.demo;
        let cfg = BatchConfig { sampler: SamplerConfig { seed, ..Default::default() }, ..Default::default() };
        let res = augment_source(&src, &scene, &cfg, &ValidationRules::default());
        let parsed = res.parsed.clone().expect("parsed");
        let test = SamplerConfig { seed: seed + 10_000, n_docks: 8, ..Default::default() };
        let docks: Vec<_> = sample_docks(&scene, &src, &parsed, &test, &PlannerConfig::default())?.accepted.iter().map(|r| r.dock).collect();
        for (i, k) in [1, 2, 4].into_iter().enumerate() {
            let mut train = vec![src.clone()];
            train.extend(res.augmented.iter().take(k - 1).map(|a| a.demo.clone()));
            sums[i] += nn_policy_eval(&train, &scene, &docks, &NnConfig::default())?.rate();
        }
    }
    for (k, s) in [1, 2, 4].iter().zip(sums) {
        println!("{k} training docks: mean success {:.3}", s / seeds as f64);
    }
    Ok(())
}
