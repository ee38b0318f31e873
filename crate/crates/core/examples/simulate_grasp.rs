//! Settles the canonical grasp in the simulator, replays an action
//! sequence from a snapshot, and runs the one-second hold check on a good
//! and a hopeless state.
//!
//!     cargo run --example simulate_grasp

use dexplore::hand::ObjectShape;
use dexplore::sim::{Action, SimConfig, Simulator};
use dexplore::hand::HandModel;

fn main() -> dexplore::Result<()> {
    let shape = ObjectShape::preset("disc")?;
    let sim = Simulator::new(HandModel::reference(), shape.clone(), SimConfig::for_shape(&shape))?;
    let grasp = sim.canonical_grasp(0.002, 0.5)?;
    let p = grasp.state.pose;
    println!("settled object pose ({:+.5}, {:+.5}, {:+.5})", p.x, p.y, p.theta);
    println!("contacts: {}", sim.contacts(&grasp.state).count());

    let snap = sim.snapshot(&grasp);
    let actions: Vec<Action> = (0..20)
        .map(|k| {
            let mut a = grasp.setpoints.clone();
            a[0] += 0.01 * k as f64;
            Action(a)
        })
        .collect();
    let run = |mut s| {
        for a in &actions {
            sim.control(&mut s, a)?;
        }
        Ok::<_, dexplore::Error>(s)
    };
    let first = run(sim.restore(&snap))?;
    let second = run(sim.restore(&snap))?;
    println!("replay identical: {}", first == second);

    println!("hold check, settled grasp: {}", sim.rollout_stability_check(&grasp));
    let mut open = grasp.clone();
    open.setpoints = sim.model().lower_limits();
    println!("hold check, hand opened: {}", sim.rollout_stability_check(&open));
    Ok(())
}
