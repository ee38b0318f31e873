//! Rejection sampling of random stable grasps. Round objects accept far
//! more proposals than shapes with concave corners.
//!
//!     cargo run --release --example grasp_sampler

use dexplore::exp::ExperimentConfig;
use dexplore::rl::GraspSampler;
use dexplore::rng::stream;

fn main() -> dexplore::Result<()> {
    let sampler = GraspSampler::default();
    for name in ["disc", "square", "rectangle", "l_polygon"] {
        let cfg = ExperimentConfig::parse(&format!("[object]\nname = {name}\n"), std::iter::empty())?;
        let sim = cfg.simulator()?;
        let rate = sampler.rejection_rate(&sim, 20, &mut stream(0, &[name.len() as u64]))?;
        println!("{name:>10}: rejection rate {:.3}", rate);
    }
    Ok(())
}
