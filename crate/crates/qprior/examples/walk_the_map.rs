//! Tour of the grid environment: map layout, noisy moves, and why actions
//! aimed at free cells can still collide once position noise accumulates.

use qprior::grid::{action_name, CellKind, ACTION_COUNT, RIGHT};
use qprior::maps;
use qprior::{ActionId, RngStream};

fn main() {
    let env = maps::original();
    println!(
        "map: {}x{} cells, {} states, goal at {:?}",
        env.width(),
        env.height(),
        env.state_count(),
        env.goal()
    );

    let free = env.free_states();
    println!("free cells (excluding the goal): {}", free.len());
    for &s in &free {
        let (x, y) = env.coords(s);
        let walls: Vec<&str> = (0..ACTION_COUNT)
            .map(ActionId)
            .filter(|&a| env.collision_actions(s).contains(&a))
            .map(action_name)
            .collect();
        println!(
            "  ({x:>2},{y:>2}) {}",
            if walls.is_empty() {
                "open on all sides".to_owned()
            } else {
                format!("walls: {}", walls.join(", "))
            }
        );
    }

    let mut rng = RngStream::new(5);
    let mut pose = env.cell_center(10, 9);
    println!("\nfive noisy steps to the right from the centre of (10,9):");
    for _ in 0..5 {
        let out = env.step(pose, RIGHT, &mut rng);
        println!(
            "  pose ({:>6.3},{:>6.3}) -> ({:>6.3},{:>6.3})  reward {:>4.1}  collided {}",
            pose.x, pose.y, out.pose.x, out.pose.y, out.reward, out.collided
        );
        pose = out.pose;
    }
    println!("  the wall at (14,9) stops the run: colliding costs -1 and wastes the step");

    assert_eq!(env.kind(13, 9), CellKind::Free);
    let mut rng = RngStream::new(6);
    let mut pose = env.cell_center(12, 10);
    let mut aimed_open = 0u64;
    let mut surprised = 0u64;
    for _ in 0..200_000 {
        let s = env.state_of_pose(pose);
        let a = ActionId(rng.pick(ACTION_COUNT));
        let aimed_at_wall = env.collision_actions(s).contains(&a);
        let out = env.step(pose, a, &mut rng);
        if !aimed_at_wall {
            aimed_open += 1;
            if out.collided {
                surprised += 1;
            }
        }
        pose = if out.terminal {
            env.cell_center(12, 10)
        } else {
            out.pose
        };
    }
    println!(
        "\nrandom walk of 200000 moves: of {aimed_open} moves aimed at open cells, \
         {:.2}% collided anyway",
        100.0 * surprised as f64 / aimed_open as f64
    );
    println!("position noise accumulates inside a cell, so a move toward an open cell");
    println!("can overshoot into the wall behind it; walls make nearby actions risky even");
    println!("when the next cell over is free, and that risk is what the sources agree on");
}
