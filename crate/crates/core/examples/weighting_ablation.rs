//! Small benchmark comparing predicted-uncertainty weighting against uniform
//! and shuffled weights as the number of views shrinks.

use occlusion3d::cli::{run_bench, ExperimentConfig, Method, Metric, ViewFraction};
use occlusion3d::simulation::{NoiseModel, SceneConfig, UncertaintyMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        scene: SceneConfig { n_cameras: 16, seed: 5, ..SceneConfig::default() },
        noise: NoiseModel { base_sigma: [0.02; 6], occlusion_exponent: 1.0, visibility_range: [0.3, 0.9] },
        trials: 20,
        iou_samples: 20_000,
        methods: vec![
            Method::new("oracle", UncertaintyMode::Oracle, true),
            Method::new("identity", UncertaintyMode::Identity, true),
            Method::new("shuffled", UncertaintyMode::Shuffled, true),
            Method::new("oracle-offsets-only", UncertaintyMode::Oracle, false),
        ],
        ..ExperimentConfig::default()
    };
    let table = run_bench(&cfg)?;

    print!("{:<22}", "method");
    for f in ViewFraction::ALL {
        print!("{:>16}", format!("O3D@{}", f.label()));
    }
    println!();
    for (i, name) in table.methods.iter().enumerate() {
        print!("{name:<22}");
        for f in ViewFraction::ALL {
            let c = table.cell(i, f, Metric::O3d);
            print!("{:>16}", format!("{:.3}+/-{:.3}", c.mean, c.stderr));
        }
        println!();
    }
    Ok(())
}
