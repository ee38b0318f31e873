use approx::assert_relative_eq;
use dexplore::hand::{
    constraint_matrix, contact_jacobian, detect_contacts, fingertip_contact, grasp_map,
    touching_configuration, ContactInfo, ContactSet, FingerSpec, HandModel, ObjectShape,
    Pose2, ShapeKind, State, CONTACT_TOLERANCE,
};
use dexplore::rng::stream;
use nalgebra::{DVector, Vector2};
use proptest::prelude::*;
use rand::Rng;

fn random_q<R: Rng>(hand: &HandModel, rng: &mut R) -> Vec<f64> {
    hand.lower_limits()
        .into_iter()
        .zip(hand.upper_limits())
        .map(|(l, h)| rng.gen_range(l..h))
        .collect()
}

fn rot(a: f64, v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(a.cos() * v.x - a.sin() * v.y, a.sin() * v.x + a.cos() * v.y)
}

#[test]
fn textbook_chain_positions() {
    let hand = HandModel::new(
        vec![FingerSpec {
            base: [0.0, 0.0],
            base_angle: 0.0,
            links: [0.1, 0.1],
            limits: [[-2.0, 2.0], [-2.0, 2.0]],
        }],
        0.008,
    )
    .unwrap();
    let tip = hand.finger_pose(0, &[0.0, 0.0]).tip;
    assert_relative_eq!(tip, Vector2::new(0.2, 0.0), epsilon = 1e-15);
    let tip = hand.finger_pose(0, &[std::f64::consts::FRAC_PI_2, 0.0]).tip;
    assert_relative_eq!(tip, Vector2::new(0.0, 0.2), epsilon = 1e-15);
}

#[test]
fn fk_small_displacement_matches_integrated_joint_motion() {
    // Tip displacement for dq = 1e-4 against integrating the planar chain
    // velocity along the straight joint path.
    let hand = HandModel::reference();
    let mut rng = stream(11, &[]);
    for _ in 0..200 {
        let q = random_q(&hand, &mut rng);
        let dq: Vec<f64> = (0..hand.dof()).map(|_| rng.gen_range(-1e-4..1e-4)).collect();
        let q2: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + b).collect();
        for f in 0..hand.num_fingers() {
            let spec = &hand.fingers()[f];
            let r = hand.joint_range(f);
            let mut integrated = hand.finger_pose(f, &q).tip;
            let n = 100;
            for k in 0..n {
                let t = (k as f64 + 0.5) / n as f64;
                let a1 = spec.base_angle + q[r.start] + t * dq[r.start];
                let a2 = a1 + q[r.start + 1] + t * dq[r.start + 1];
                let v1 = rot(a1, Vector2::new(0.0, spec.links[0])) + rot(a2, Vector2::new(0.0, spec.links[1]));
                let v2 = rot(a2, Vector2::new(0.0, spec.links[1]));
                integrated += (v1 * dq[r.start] + v2 * dq[r.start + 1]) / n as f64;
            }
            let fk = hand.finger_pose(f, &q2).tip;
            assert!((fk - integrated).norm() < 1e-6);
        }
    }
}

#[test]
fn tip_jacobian_finite_difference() {
    let hand = HandModel::reference();
    let mut rng = stream(12, &[]);
    let h = 1e-5;
    for _ in 0..200 {
        let q = random_q(&hand, &mut rng);
        for f in 0..hand.num_fingers() {
            let pose = hand.finger_pose(f, &q);
            let j = HandModel::point_jacobian(&pose, &pose.tip);
            let r = hand.joint_range(f);
            let dir = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let mut qp = q.clone();
            qp[r.start] += h * dir.x;
            qp[r.start + 1] += h * dir.y;
            let fd = (hand.finger_pose(f, &qp).tip - pose.tip) / h;
            let lin = j * dir;
            assert!((fd - lin).norm() / lin.norm().max(1e-12) < 1e-4);
        }
    }
}

fn grasp_state(name: &str) -> (HandModel, ObjectShape, State) {
    let hand = HandModel::reference();
    let shape = ObjectShape::preset(name).unwrap();
    let pose = Pose2::new(0.003, -0.002, 0.2);
    let q = touching_configuration(&hand, &shape, pose, 0.0).unwrap();
    (hand, shape, State::new(q, pose))
}

#[test]
fn contact_jacobian_moves_the_point_fixed_to_the_distal_link() {
    let mut rng = stream(13, &[]);
    let h = 1e-5;
    for name in ["disc", "rectangle", "l_polygon"] {
        let (hand, shape, state) = grasp_state(name);
        let cs = detect_contacts(&hand, &shape, &state, CONTACT_TOLERANCE);
        let subset = cs.active_fingers();
        let j = contact_jacobian(&hand, &state, &cs, &subset).unwrap();
        for _ in 0..20 {
            let dq: Vec<f64> = (0..hand.dof()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q2: Vec<f64> = state.q.iter().zip(&dq).map(|(a, b)| a + h * b).collect();
            let pred = &j * DVector::from_vec(dq.clone());
            for (row, &f) in subset.iter().enumerate() {
                let p0 = hand.finger_pose(f, &state.q);
                let p1 = hand.finger_pose(f, &q2);
                // Contact point in distal-link coordinates, carried along.
                let local = rot(-p0.link_angles[1], cs.get(f).unwrap().point - p0.elbow);
                let moved = p1.elbow + rot(p1.link_angles[1], local);
                let fd = (moved - cs.get(f).unwrap().point) / h;
                let lin = Vector2::new(pred[2 * row], pred[2 * row + 1]);
                assert!((fd - lin).norm() <= 1e-5 * lin.norm().max(1e-3), "{name}: {fd} vs {lin}");
            }
            // Columns of fingers outside the subset stay zero.
            for f in 0..hand.num_fingers() {
                if !subset.contains(&f) {
                    let r = hand.joint_range(f);
                    assert!(j.columns(r.start, 2).iter().all(|v| *v == 0.0));
                }
            }
        }
    }
}

#[test]
fn grasp_map_matches_rigid_body_motion_and_wrench_sum() {
    let mut rng = stream(14, &[]);
    for _ in 0..100 {
        let pose = Pose2::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), rng.gen_range(-3.0..3.0));
        let state = State::new(vec![], pose);
        let k = rng.gen_range(1..5);
        let contacts: Vec<ContactInfo> = (0..k)
            .map(|i| ContactInfo {
                finger: i,
                point: Vector2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)),
                normal: Vector2::new(1.0, 0.0),
                gap: 0.0,
                depth: 0.0,
                active: true,
            })
            .collect();
        let cs = ContactSet { contacts: contacts.clone() };
        let subset: Vec<usize> = (0..k).collect();
        let g = grasp_map(&state, &cs, &subset).unwrap();

        // Velocity of material points under a small pose change.
        let h = 1e-6;
        let twist = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let moved = Pose2::new(pose.x + h * twist[0], pose.y + h * twist[1], pose.theta + h * twist[2]);
        let pred = &g * DVector::from_column_slice(&twist);
        for (i, c) in contacts.iter().enumerate() {
            let local = pose.to_local(&c.point);
            let fd = (moved.to_world(&local) - c.point) / h;
            assert!((fd - Vector2::new(pred[2 * i], pred[2 * i + 1])).norm() < 1e-5);
        }

        // Net wrench from G^T against summing force and torque directly.
        let forces: Vec<f64> = (0..2 * k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w = g.transpose() * DVector::from_vec(forces.clone());
        let mut direct = [0.0; 3];
        for (i, c) in contacts.iter().enumerate() {
            let r = c.point - pose.position();
            let (fx, fy) = (forces[2 * i], forces[2 * i + 1]);
            direct[0] += fx;
            direct[1] += fy;
            direct[2] += r.x * fy - r.y * fx;
        }
        for a in 0..3 {
            assert!((w[a] - direct[a]).abs() < 1e-12);
        }
    }
}

#[test]
fn constraint_matrix_is_exact_block_assembly() {
    for name in ["disc", "square", "l_polygon"] {
        let (hand, shape, state) = grasp_state(name);
        let cs = detect_contacts(&hand, &shape, &state, CONTACT_TOLERANCE);
        let subset = cs.active_fingers();
        let n = constraint_matrix(&hand, &state, &cs, &subset).unwrap();
        let j = contact_jacobian(&hand, &state, &cs, &subset).unwrap();
        let g = grasp_map(&state, &cs, &subset).unwrap();
        assert_eq!(n.shape(), (2 * subset.len(), hand.dof() + 3));
        assert_eq!(n.columns(0, hand.dof()), j.columns(0, hand.dof()));
        assert_eq!(n.columns(hand.dof(), 3), (-g).columns(0, 3));
    }
}

#[test]
fn co_moving_finger_and_object_satisfy_the_constraint() {
    let (hand, shape, state) = grasp_state("disc");
    let cs = detect_contacts(&hand, &shape, &state, CONTACT_TOLERANCE);
    let n = constraint_matrix(&hand, &state, &cs, &[1]).unwrap();
    let d = hand.dof();
    // Pure object translation; the finger follows through its Jacobian.
    let v = Vector2::new(0.3, -0.2);
    let pose = hand.finger_pose(1, &state.q);
    let jc = HandModel::point_jacobian(&pose, &cs.get(1).unwrap().point);
    let dq = jc.try_inverse().unwrap() * v;
    let mut dx = DVector::zeros(d + 3);
    dx[2] = dq.x;
    dx[3] = dq.y;
    dx[d] = v.x;
    dx[d + 1] = v.y;
    assert!((&n * &dx).norm() < 1e-9);

    // Pushing along the normal with the object still breaks it.
    let nrm = cs.get(1).unwrap().normal;
    let dq = jc.try_inverse().unwrap() * nrm;
    let mut dx = DVector::zeros(d + 3);
    dx[2] = dq.x;
    dx[3] = dq.y;
    assert!((&n * &dx).norm() > 0.5);
}

/// Dense boundary samples of `shape` in its own frame, as (parameter,
/// point) with the parameter running over `[0, 1)`.
fn boundary(shape: &ObjectShape, vertices: Option<&[[f64; 2]]>, t: f64) -> Vector2<f64> {
    match vertices {
        None => {
            let r = shape.bounding_radius();
            let a = t * std::f64::consts::TAU;
            Vector2::new(r * a.cos(), r * a.sin())
        }
        Some(v) => {
            let n = v.len();
            let lens: Vec<f64> = (0..n)
                .map(|i| {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    (b[0] - a[0]).hypot(b[1] - a[1])
                })
                .collect();
            let total: f64 = lens.iter().sum();
            let mut s = t.rem_euclid(1.0) * total;
            for i in 0..n {
                if s <= lens[i] || i == n - 1 {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    let u = (s / lens[i]).min(1.0);
                    return Vector2::new(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]));
                }
                s -= lens[i];
            }
            unreachable!()
        }
    }
}

fn point_in_polygon(v: &[[f64; 2]], p: &Vector2<f64>) -> bool {
    let mut inside = false;
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if (a[1] > p.y) != (b[1] > p.y) {
            let x = a[0] + (p.y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[test]
fn contacts_agree_with_dense_boundary_sampling() {
    let mut rng = stream(15, &[]);
    let tip_r = 0.008;
    let shapes: Vec<(ObjectShape, Option<Vec<[f64; 2]>>)> = ["disc", "rectangle", "l_polygon"]
        .iter()
        .map(|name| {
            let shape = ObjectShape::preset(name).unwrap();
            let verts = match shape.kind() {
                ShapeKind::Polygon { vertices } => Some(vertices.clone()),
                _ => None,
            };
            (shape, verts)
        })
        .collect();
    let samples = 10_000;
    let mut checked = 0;
    for (shape, verts) in &shapes {
        for _ in 0..200 {
            let pose = Pose2::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), rng.gen_range(-3.0..3.0));
            let state = State::new(vec![], pose);
            let tip_local = Vector2::new(rng.gen_range(-0.07..0.07), rng.gen_range(-0.07..0.07));
            let inside = match verts {
                None => tip_local.norm() < shape.bounding_radius(),
                Some(v) => point_in_polygon(v, &tip_local),
            };
            if inside {
                continue;
            }
            // Brute force nearest sample, then golden-section refinement
            // over the parameter bracket around it.
            let dist = |t: f64| (boundary(shape, verts.as_deref(), t) - tip_local).norm();
            let best = (0..samples)
                .map(|i| i as f64 / samples as f64)
                .min_by(|a, b| dist(*a).total_cmp(&dist(*b)))
                .unwrap();
            let (mut lo, mut hi) = (best - 1.0 / samples as f64, best + 1.0 / samples as f64);
            let gr = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..80 {
                let m1 = hi - gr * (hi - lo);
                let m2 = lo + gr * (hi - lo);
                if dist(m1) < dist(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t = 0.5 * (lo + hi);
            let closest = boundary(shape, verts.as_deref(), t);
            let gap = (closest - tip_local).norm() - tip_r;

            let tip = pose.to_world(&tip_local);
            let c = fingertip_contact(0, &tip, tip_r, shape, &state, CONTACT_TOLERANCE);
            assert!((c.gap - gap).abs() < 1e-7, "gap {} vs {gap}", c.gap);
            if (gap - CONTACT_TOLERANCE).abs() > 1e-6 {
                assert_eq!(c.active, gap <= CONTACT_TOLERANCE);
            }
            let push = pose.rotate_to_world(&(closest - tip_local).normalize());
            let angle = (c.normal.x * push.y - c.normal.y * push.x).atan2(c.normal.dot(&push));
            assert!(angle.abs() < 1e-3, "normal off by {angle}");
            assert!((c.normal.norm() - 1.0).abs() < 1e-9);
            assert_eq!(c.depth, (-c.gap).max(0.0));
            checked += 1;
        }
    }
    assert!(checked > 300);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tips_depend_only_on_their_own_joints(seed in 0u64..10_000, finger in 0usize..4) {
        let hand = HandModel::reference();
        let mut rng = stream(seed, &[]);
        let q = random_q(&hand, &mut rng);
        let mut q2 = random_q(&hand, &mut rng);
        let r = hand.joint_range(finger);
        q2[r.start] = q[r.start];
        q2[r.start + 1] = q[r.start + 1];
        prop_assert_eq!(hand.finger_pose(finger, &q).tip, hand.finger_pose(finger, &q2).tip);
    }

    #[test]
    fn depth_is_continuous_across_the_activity_band(offset in -0.003f64..0.003) {
        let shape = ObjectShape::preset("disc").unwrap();
        let state = State::new(vec![], Pose2::default());
        let r = shape.bounding_radius() + 0.008 + offset;
        let c = fingertip_contact(0, &Vector2::new(r, 0.0), 0.008, &shape, &state, CONTACT_TOLERANCE);
        prop_assert!((c.gap - offset).abs() < 1e-12);
        prop_assert!((c.depth - (-offset).max(0.0)).abs() < 1e-12);
        prop_assert_eq!(c.active, offset <= CONTACT_TOLERANCE);
    }
}
