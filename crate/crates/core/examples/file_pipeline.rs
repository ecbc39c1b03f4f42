//! The file-based workflow behind the command-line tool: simulate a scene,
//! fit it and score the result.

use occlusion3d::cli::{cmd_eval, cmd_fit, cmd_simulate, ExperimentConfig};
use occlusion3d::estimation::SolverOptions;
use occlusion3d::simulation::{SceneConfig, UncertaintyMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let cfg = ExperimentConfig {
        scene: SceneConfig { n_objects: 4, n_cameras: 10, seed: 21, ..SceneConfig::default() },
        ..ExperimentConfig::default()
    };

    let (scene, detections) = cmd_simulate(&cfg, dir.path())?;
    println!("wrote {} and {}", scene.display(), detections.display());

    let results = dir.path().join("results.json");
    let records = cmd_fit(&scene, &detections, UncertaintyMode::Oracle, &SolverOptions::default(), &results)?;
    for r in &records {
        println!("object {}: cost {:.3}, {} iterations, converged {}", r.object_id, r.cost, r.iterations, r.converged);
    }

    let (eval, csv) = cmd_eval(&scene, &results, 100_000, 0)?;
    print!("{}", String::from_utf8(csv)?);
    println!("missing objects: {:?}", eval.missing);
    Ok(())
}
