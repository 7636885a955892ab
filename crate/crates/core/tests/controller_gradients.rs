use cableswarm::controller::{obstacle_force, repulsive_agent_force, ControlParams};
use cableswarm::SimConfig;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn potential(agent: &Vector3<f64>, sources: &[Vector3<f64>], gain: f64, scale: f64) -> f64 {
    sources.iter().map(|s| gain * (-(agent - s).norm() / scale).exp()).sum()
}

fn numeric_descent(agent: &Vector3<f64>, sources: &[Vector3<f64>], gain: f64, scale: f64) -> Vector3<f64> {
    let h = 1e-6;
    Vector3::from_fn(|axis, _| {
        let mut plus = *agent;
        let mut minus = *agent;
        plus[axis] += h;
        minus[axis] -= h;
        -(potential(&plus, sources, gain, scale) - potential(&minus, sources, gain, scale)) / (2.0 * h)
    })
}

fn random_point(rng: &mut ChaCha8Rng, half_width: f64) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-half_width..half_width),
        rng.gen_range(-half_width..half_width),
        rng.gen_range(-half_width..half_width),
    )
}

fn sources_away_from(rng: &mut ChaCha8Rng, agent: &Vector3<f64>, count: usize, half_width: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    while out.len() < count {
        let s = random_point(rng, half_width);
        if (agent - s).norm() > 0.2 {
            out.push(s);
        }
    }
    out
}

#[test]
fn neighbor_repulsion_descends_its_potential() {
    let p = ControlParams::from_config(&SimConfig::baseline()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let agent = random_point(&mut rng, 6.0);
        let neighbors = sources_away_from(&mut rng, &agent, 6, 6.0);
        let force = repulsive_agent_force(&agent, &neighbors, p.repulsion_gain, p.repulsion_scale).unwrap();
        let expected = numeric_descent(&agent, &neighbors, p.repulsion_gain, p.repulsion_scale);
        let rel = (force - expected).norm() / expected.norm();
        assert!(rel < 1e-6, "relative error {rel:e}");
    }
}

#[test]
fn obstacle_repulsion_descends_its_potential() {
    let p = ControlParams::from_config(&SimConfig::baseline()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let agent = random_point(&mut rng, 10.0);
        let obstacles = sources_away_from(&mut rng, &agent, 3, 10.0);
        let force = obstacle_force(&agent, &obstacles, p.obstacle_gain, p.obstacle_scale).unwrap();
        let expected = numeric_descent(&agent, &obstacles, p.obstacle_gain, p.obstacle_scale);
        let rel = (force - expected).norm() / expected.norm();
        assert!(rel < 1e-6, "relative error {rel:e}");
        // pushes away: the potential decreases along the force
        assert!(
            potential(&(agent + force * 1e-4), &obstacles, p.obstacle_gain, p.obstacle_scale)
                < potential(&agent, &obstacles, p.obstacle_gain, p.obstacle_scale)
        );
    }
}

#[test]
fn repulsion_between_a_pair_is_reciprocal() {
    let p = ControlParams::from_config(&SimConfig::baseline()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let a = random_point(&mut rng, 5.0);
        let b = sources_away_from(&mut rng, &a, 1, 5.0)[0];
        let fa = repulsive_agent_force(&a, &[b], p.repulsion_gain, p.repulsion_scale).unwrap();
        let fb = repulsive_agent_force(&b, &[a], p.repulsion_gain, p.repulsion_scale).unwrap();
        assert!((fa + fb).norm() <= 1e-14 * fa.norm().max(1.0));
    }
}
