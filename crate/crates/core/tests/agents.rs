use crowdnav::agents::{
    orca_velocity, social_force_velocity, AgentView, OrcaParams, SocialForceParams,
};
use crowdnav::Vec2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DT: f64 = 0.25;

fn view(p: (f64, f64), v: (f64, f64), goal: (f64, f64), radius: f64, v_max: f64) -> AgentView {
    AgentView {
        position: Vec2::new(p.0, p.1),
        velocity: Vec2::new(v.0, v.1),
        radius,
        v_max,
        goal: Vec2::new(goal.0, goal.1),
    }
}

fn arb_agent() -> impl Strategy<Value = AgentView> {
    (
        (-5.0f64..5.0, -5.0f64..5.0),
        (-1.0f64..1.0, -1.0f64..1.0),
        (-8.0f64..8.0, -8.0f64..8.0),
        0.2f64..0.6,
        0.3f64..1.5,
    )
        .prop_map(|(p, v, g, r, vm)| view(p, v, g, r, vm))
}

/// Two identical ORCA agents swapping places along the x axis.
fn head_on(steps: usize) -> (Vec<Vec2>, Vec<Vec2>, f64) {
    let p = OrcaParams::default();
    let mut a = view((-4.0, 0.0), (0.0, 0.0), (4.0, 0.0), 0.3, 1.0);
    let mut b = view((4.0, 0.0), (0.0, 0.0), (-4.0, 0.0), 0.3, 1.0);
    let (mut pa, mut pb) = (vec![a.position], vec![b.position]);
    let mut d_min = f64::INFINITY;
    for _ in 0..steps {
        let va = orca_velocity(&a, &[b], &p, DT);
        let vb = orca_velocity(&b, &[a], &p, DT);
        a.velocity = va;
        b.velocity = vb;
        a.position += va * DT;
        b.position += vb * DT;
        pa.push(a.position);
        pb.push(b.position);
        d_min = d_min.min(a.position.distance(b.position) - a.radius - b.radius);
    }
    (pa, pb, d_min)
}

#[test]
fn head_on_encounter_is_mirror_symmetric_and_collision_free() {
    let (pa, pb, d_min) = head_on(200);
    assert!(d_min > 0.0, "{d_min}");
    for (a, b) in pa.iter().zip(&pb) {
        assert!((a.x + b.x).abs() < 1e-9 && (a.y + b.y).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn controllers_respect_speed_limit(agent in arb_agent(), others in prop::collection::vec(arb_agent(), 0..6), seed in 0u64..100) {
        let v = orca_velocity(&agent, &others, &OrcaParams::default(), DT);
        prop_assert!(v.length() <= agent.v_max + 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = social_force_velocity(&agent, &others, &SocialForceParams::default(), DT, &mut rng);
        prop_assert!(v.length() <= agent.v_max + 1e-9);
    }

    #[test]
    fn orca_is_reciprocal(a in arb_agent(), b in arb_agent()) {
        // Reflect `a` through the origin to build the symmetric partner.
        let mirror = AgentView { position: -a.position, velocity: -a.velocity, goal: -a.goal, ..a };
        let _ = b;
        let p = OrcaParams::default();
        let va = orca_velocity(&a, &[mirror], &p, DT);
        let vm = orca_velocity(&mirror, &[a], &p, DT);
        prop_assert!((va + vm).length() < 1e-9);
    }

    #[test]
    fn unconstrained_orca_returns_preferred(agent in arb_agent(), dx in 20.0f64..50.0) {
        let far = view((agent.position.x + dx, agent.position.y), (0.0, 0.0), (0.0, 0.0), 0.3, 1.0);
        let p = OrcaParams::default();
        prop_assert_eq!(orca_velocity(&agent, &[], &p, DT), agent.preferred_velocity(DT));
        prop_assert_eq!(orca_velocity(&agent, &[far], &p, DT), agent.preferred_velocity(DT));
    }

    #[test]
    fn repulsion_is_non_increasing(r in 0.2f64..1.2, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
        let p = SocialForceParams::default();
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(p.repulsion(r, near) >= p.repulsion(r, far));
    }
}

#[test]
fn preferred_velocity_caps_at_goal() {
    let a = view((0.0, 0.0), (0.0, 0.0), (0.1, 0.1), 0.3, 1.0);
    let v = orca_velocity(&a, &[], &OrcaParams::default(), DT);
    assert!((a.position + v * DT - a.goal).length() < 1e-12);
    let far = view((0.0, 0.0), (0.0, 0.0), (3.0, 4.0), 0.3, 1.0);
    assert!((far.preferred_velocity(DT) - Vec2::new(0.6, 0.8)).length() < 1e-15);
}

#[test]
fn social_force_settles_on_preferred_velocity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut a = view((0.0, 0.0), (0.0, 0.0), (0.0, 200.0), 0.3, 1.2);
    for _ in 0..200 {
        a.velocity = social_force_velocity(&a, &[], &SocialForceParams::default(), DT, &mut rng);
    }
    assert!((a.velocity - a.preferred_velocity(DT)).length() < 1e-3);
}

#[test]
fn social_force_repels_and_balances() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = SocialForceParams::default();
    let a = view((0.0, 0.0), (0.0, 0.0), (0.0, 0.0), 0.3, 1.0);
    let ahead = view((0.0, 0.65), (0.0, 0.0), (0.0, 0.0), 0.3, 1.0);
    assert!(social_force_velocity(&a, &[ahead], &p, DT, &mut rng).y < 0.0);

    let moving = view((0.0, 0.0), (0.0, 0.0), (5.0, 0.0), 0.3, 1.0);
    let left = view((1.0, 0.7), (0.0, 0.0), (0.0, 0.0), 0.3, 1.0);
    let right = view((1.0, -0.7), (0.0, 0.0), (0.0, 0.0), 0.3, 1.0);
    let v = social_force_velocity(&moving, &[left, right], &p, DT, &mut rng);
    assert!(v.y.abs() < 1e-9);
}

#[test]
fn parameter_validation() {
    assert!(OrcaParams {
        time_horizon: 0.0,
        ..OrcaParams::default()
    }
    .validate("h")
    .is_err());
    assert!(OrcaParams {
        max_neighbors: 0,
        ..OrcaParams::default()
    }
    .validate("h")
    .is_err());
    assert!(SocialForceParams {
        repulsion_range: -1.0,
        ..SocialForceParams::default()
    }
    .validate("h")
    .is_err());
    OrcaParams::default().validate("h").unwrap();
    SocialForceParams::default().validate("h").unwrap();
}
