//! Lumped-mass cable model.
//!
//! Each cable is a chain of `t_n` point masses joined by tension-only
//! spring–dampers of natural length `l_free`. Element 1 sits at the payload
//! end and element `t_n` at the agent end, so a chain has `t_n + 1` links:
//! link 0 joins the anchor to element 1 and link `t_n` joins element `t_n`
//! to the agent.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::config::SimConfig;

/// Node separations below this are treated as coincident (m).
pub const DEGENERATE_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableParams {
    pub stiffness: f64,
    pub damping: f64,
    pub segment_length: f64,
    pub element_mass: f64,
}

impl CableParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        CableParams {
            stiffness: cfg.cable.stiffness,
            damping: cfg.cable.damping,
            segment_length: cfg.cable.segment_length,
            element_mass: cfg.cable.element_mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("coincident nodes: separation {separation:e} m")]
pub struct DegenerateGeometry {
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("cable {agent}, link {link}: {source}")]
pub struct CableError {
    /// Zero-based agent index.
    pub agent: usize,
    /// Link index, 0 at the anchor.
    pub link: usize,
    #[source]
    pub source: DegenerateGeometry,
}

/// Slack gate α: 1 for a stretched link, 0 otherwise.
#[inline]
pub fn slack_gate(extension: f64) -> f64 {
    if extension > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Force on node `i` from the spring–damper link joining it to node `j`.
///
/// Zero whenever the link is not stretched, damping included.
#[inline]
pub fn element_force(
    xi: &Vector3<f64>,
    xj: &Vector3<f64>,
    vi: &Vector3<f64>,
    vj: &Vector3<f64>,
    params: &CableParams,
) -> Result<Vector3<f64>, DegenerateGeometry> {
    let xij = xi - xj;
    let len = xij.norm();
    if len < DEGENERATE_LENGTH {
        return Err(DegenerateGeometry { separation: len });
    }
    let extension = len - params.segment_length;
    if slack_gate(extension) == 0.0 {
        return Ok(Vector3::zeros());
    }
    let vij = vi - vj;
    let rate = xij.dot(&vij) / len;
    let magnitude = params.stiffness * extension + params.damping * rate;
    Ok(xij * (-magnitude / len))
}

/// Elastic energy stored in one link, ½·k_t·Δx² when taut.
pub fn link_potential(length: f64, params: &CableParams) -> f64 {
    let extension = length - params.segment_length;
    0.5 * params.stiffness * slack_gate(extension) * extension * extension
}

/// Inertial position and velocity of an anchor point fixed in the payload.
///
/// The rotational term uses the anchor offset expressed in inertial
/// coordinates, `B·c^B`.
pub fn anchor_kinematics(
    payload_position: &Vector3<f64>,
    payload_velocity: &Vector3<f64>,
    angular_velocity: &Vector3<f64>,
    axes: &Matrix3<f64>,
    anchor_body: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let offset = axes * anchor_body;
    (
        payload_position + offset,
        payload_velocity + angular_velocity.cross(&offset),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CableChain {
    pub agent: usize,
    /// Element positions, payload end first (m).
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub anchor_body: Vector3<f64>,
}

/// Forces the end links exert on the bodies they attach to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainEnds {
    /// Force on the payload at the anchor, f(c_k, s_1).
    pub anchor_force: Vector3<f64>,
    /// Force on the agent, f(r_k, s_tn).
    pub agent_force: Vector3<f64>,
}

/// A position/velocity pair for a chain end.
pub type Node<'a> = (&'a Vector3<f64>, &'a Vector3<f64>);

/// Walks one chain from the anchor up to the agent, writing each element's
/// acceleration through `write_accel` and returning the end-link forces.
///
/// Each link force is evaluated once and applied with opposite signs to its
/// two nodes, so internal forces cancel exactly.
#[allow(clippy::too_many_arguments)]
pub fn chain_dynamics<P, V, W>(
    agent: usize,
    elements: usize,
    position: P,
    velocity: V,
    anchor: Node<'_>,
    top: Node<'_>,
    params: &CableParams,
    gravity: &Vector3<f64>,
    mut write_accel: W,
) -> Result<ChainEnds, CableError>
where
    P: Fn(usize) -> Vector3<f64>,
    V: Fn(usize) -> Vector3<f64>,
    W: FnMut(usize, Vector3<f64>),
{
    let fail = |link: usize| move |source| CableError {
        agent,
        link,
        source,
    };
    let inv_mass = 1.0 / params.element_mass;

    let mut lower_pos = position(0);
    let mut lower_vel = velocity(0);
    // force on element 1 from link 0
    let first = element_force(&lower_pos, anchor.0, &lower_vel, anchor.1, params).map_err(fail(0))?;
    let mut below = first;
    for e in 0..elements {
        let (upper_pos, upper_vel) = if e + 1 < elements {
            (position(e + 1), velocity(e + 1))
        } else {
            (*top.0, *top.1)
        };
        // force on the upper node of link e+1
        let link = element_force(&upper_pos, &lower_pos, &upper_vel, &lower_vel, params)
            .map_err(fail(e + 1))?;
        write_accel(e, (below - link) * inv_mass - gravity);
        below = link;
        lower_pos = upper_pos;
        lower_vel = upper_vel;
    }
    Ok(ChainEnds {
        anchor_force: -first,
        agent_force: below,
    })
}

/// Accelerations of every element of `chain`, payload end first.
pub fn cable_accelerations(
    chain: &CableChain,
    agent_position: &Vector3<f64>,
    agent_velocity: &Vector3<f64>,
    anchor_position: &Vector3<f64>,
    anchor_velocity: &Vector3<f64>,
    params: &CableParams,
    gravity: &Vector3<f64>,
) -> Result<Vec<Vector3<f64>>, CableError> {
    let n = chain.positions.len();
    let mut out = vec![Vector3::zeros(); n];
    chain_dynamics(
        chain.agent,
        n,
        |e| chain.positions[e],
        |e| chain.velocities[e],
        (anchor_position, anchor_velocity),
        (agent_position, agent_velocity),
        params,
        gravity,
        |e, a| out[e] = a,
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn baseline() -> CableParams {
        CableParams {
            stiffness: 10073.0,
            damping: 0.1,
            segment_length: 1.5,
            element_mass: 0.003,
        }
    }

    fn g() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 9.8)
    }

    #[test]
    fn natural_length_gives_no_force() {
        let f = element_force(
            &Vector3::new(0.0, 0.0, 1.5),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &baseline(),
        )
        .unwrap();
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn slack_link_ignores_velocity() {
        let f = element_force(
            &Vector3::new(0.0, 0.6, 0.8),
            &Vector3::zeros(),
            &Vector3::new(5.0, -3.0, 2.0),
            &Vector3::new(-1.0, 4.0, 0.0),
            &baseline(),
        )
        .unwrap();
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn stretched_link_hand_value() {
        // Δx = 0.5 m, k_t = 10073 N/m
        let f = element_force(
            &Vector3::new(0.0, 0.0, 2.0),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &baseline(),
        )
        .unwrap();
        assert_relative_eq!(f, Vector3::new(0.0, 0.0, -5036.5), epsilon = 1e-9);
    }

    #[test]
    fn damping_acts_along_link() {
        let p = baseline();
        let f = element_force(
            &Vector3::new(0.0, 0.0, 2.0),
            &Vector3::zeros(),
            &Vector3::new(3.0, 0.0, 1.0),
            &Vector3::zeros(),
            &p,
        )
        .unwrap();
        assert_relative_eq!(f.z, -(5036.5 + 0.1), epsilon = 1e-9);
        assert_eq!(f.x, 0.0);
    }

    #[test]
    fn coincident_nodes_are_rejected() {
        let x = Vector3::new(1.0, 2.0, 3.0);
        let err = element_force(&x, &x, &Vector3::zeros(), &Vector3::zeros(), &baseline()).unwrap_err();
        assert_eq!(err.separation, 0.0);
    }

    #[test]
    fn anchor_kinematics_examples() {
        let zero = Vector3::zeros();
        let id = Matrix3::identity();
        let (c, cdot) = anchor_kinematics(&zero, &zero, &zero, &id, &Vector3::new(1.0, 0.0, 5.0));
        assert_eq!(c, Vector3::new(1.0, 0.0, 5.0));
        assert_eq!(cdot, zero);

        let (_, cdot) =
            anchor_kinematics(&zero, &zero, &Vector3::z(), &id, &Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(cdot, Vector3::new(0.0, 1.0, 0.0));

        let (_, cdot) = anchor_kinematics(
            &zero,
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.0, 0.0, 2.0),
            &id,
            &Vector3::new(0.0, 3.0, 5.0),
        );
        assert_eq!(cdot, Vector3::new(-5.0, 0.0, 0.0));
    }

    #[test]
    fn slack_chain_free_falls() {
        let chain = CableChain {
            agent: 0,
            positions: vec![Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.0, 0.0, 1.0)],
            velocities: vec![Vector3::zeros(); 2],
            anchor_body: Vector3::zeros(),
        };
        let acc = cable_accelerations(
            &chain,
            &Vector3::new(0.0, 0.0, 1.5),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &baseline(),
            &g(),
        )
        .unwrap();
        for a in acc {
            assert_eq!(a, -g());
        }
    }

    #[test]
    fn single_element_chain_couples_both_ends() {
        let p = baseline();
        // one element at rest midway, both links stretched equally: net force
        // cancels, leaving only gravity
        let chain = CableChain {
            agent: 3,
            positions: vec![Vector3::new(0.0, 0.0, 1.6)],
            velocities: vec![Vector3::zeros()],
            anchor_body: Vector3::zeros(),
        };
        let zero = Vector3::zeros();
        let acc = cable_accelerations(&chain, &Vector3::new(0.0, 0.0, 3.2), &zero, &zero, &zero, &p, &g())
            .unwrap();
        assert_relative_eq!(acc[0], -g(), epsilon = 1e-9);
    }

    #[test]
    fn vertical_chain_in_static_balance() {
        let p = baseline();
        let w = p.element_mass * 9.8;
        // link tensions from the anchor up: T, T + w, T + 2w
        let t0 = 28.0;
        let lens: Vec<f64> = (0..3)
            .map(|j| p.segment_length + (t0 + j as f64 * w) / p.stiffness)
            .collect();
        let z1 = lens[0];
        let z2 = z1 + lens[1];
        let z3 = z2 + lens[2];
        let chain = CableChain {
            agent: 0,
            positions: vec![Vector3::new(0.0, 0.0, z1), Vector3::new(0.0, 0.0, z2)],
            velocities: vec![Vector3::zeros(); 2],
            anchor_body: Vector3::zeros(),
        };
        let zero = Vector3::zeros();
        let acc = cable_accelerations(&chain, &Vector3::new(0.0, 0.0, z3), &zero, &zero, &zero, &p, &g())
            .unwrap();
        for a in acc {
            // force residual well below a micronewton
            assert!(a.norm() * p.element_mass < 1e-9, "{a}");
        }
    }

    #[test]
    fn degenerate_link_reports_its_index() {
        let chain = CableChain {
            agent: 4,
            positions: vec![Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, 1.0)],
            velocities: vec![Vector3::zeros(); 2],
            anchor_body: Vector3::zeros(),
        };
        let zero = Vector3::zeros();
        let err = cable_accelerations(&chain, &Vector3::new(0.0, 0.0, 3.0), &zero, &zero, &zero, &baseline(), &g())
            .unwrap_err();
        assert_eq!((err.agent, err.link), (4, 1));
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn link_force_is_exactly_antisymmetric(xi in vec3(), xj in vec3(), vi in vec3(), vj in vec3()) {
            prop_assume!((xi - xj).norm() > 1e-6);
            let p = baseline();
            let fij = element_force(&xi, &xj, &vi, &vj, &p).unwrap();
            let fji = element_force(&xj, &xi, &vj, &vi, &p).unwrap();
            prop_assert_eq!(fij, -fji);
        }

        #[test]
        fn slack_links_carry_nothing(dir in vec3(), len in 1e-3f64..1.5, vi in vec3(), vj in vec3()) {
            prop_assume!(dir.norm() > 1e-3);
            let xi = dir.normalize() * len;
            let f = element_force(&xi, &Vector3::zeros(), &vi, &vj, &baseline()).unwrap();
            prop_assert_eq!(f, Vector3::zeros());
        }
    }
}
