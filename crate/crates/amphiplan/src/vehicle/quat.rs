//! Quaternion helpers with the conventions fixed once for the whole crate:
//! scalar-first storage, Hamilton product, body→inertial rotation via the
//! sandwich `q ⊗ [0, v] ⊗ q*`.

use nalgebra::{Quaternion, Vector3};

/// Scalar-first quaternion; unit quaternions rotate body → inertial.
pub type Quat = Quaternion<f64>;

/// Hamilton product `a ⊗ b`.
#[inline]
pub fn quat_multiply(a: &Quat, b: &Quat) -> Quat {
    a * b
}

/// Conjugate `q* = (w, −x, −y, −z)`; inverse for unit quaternions.
#[inline]
pub fn quat_conjugate(q: &Quat) -> Quat {
    q.conjugate()
}

/// Rescale to unit norm.
#[inline]
pub fn quat_normalize(q: &Quat) -> Quat {
    q / q.norm()
}

/// Rotate a vector from the body frame into the inertial frame:
/// `v_I = q ⊗ [0, v_B] ⊗ q*`. Use the conjugate attitude to go the
/// other way.
#[inline]
pub fn quat_rotate(q: &Quat, v: &Vector3<f64>) -> Vector3<f64> {
    (q * Quaternion::from_imag(*v) * q.conjugate()).imag()
}

/// Attitude kinematics `q̇ = ½ q ⊗ [0, ω]` for body rates `ω`.
#[inline]
pub fn quat_derivative(q: &Quat, omega: &Vector3<f64>) -> Quat {
    (q * Quaternion::from_imag(*omega)) * 0.5
}

/// Attitude error `q_e = q_d* ⊗ q_m`, sign-normalized so the scalar part
/// is non-negative (both covers of the rotation group collapse onto the
/// short way around).
#[inline]
pub fn quat_error(q_d: &Quat, q_m: &Quat) -> Quat {
    let e = q_d.conjugate() * q_m;
    if e.w < 0.0 {
        -e
    } else {
        e
    }
}

/// Shortest-arc rotation taking unit vector `fb` onto unit vector `fi`:
///
/// `q = [1 + fb·fi ; fb × fi] / sqrt(2 (1 + fb·fi))`
///
/// which is exactly unit-norm. When the vectors are antiparallel the arc
/// is degenerate; the fallback rotates π about the body x axis (projected
/// orthogonal to `fb`, so the result still maps `fb` onto `fi` even if
/// `fb` has a component along x).
pub fn quat_from_two_vectors(fb: &Vector3<f64>, fi: &Vector3<f64>) -> Quat {
    let d = fb.dot(fi);
    let w = 1.0 + d;
    if w > 1e-12 {
        let v = fb.cross(fi);
        let s = (2.0 * w).sqrt();
        Quaternion::new(w / s, v.x / s, v.y / s, v.z / s)
    } else {
        let mut axis = Vector3::x() - fb * fb.x;
        if axis.norm() < 1e-9 {
            axis = Vector3::y() - fb * fb.y;
        }
        let axis = axis.normalize();
        Quaternion::new(0.0, axis.x, axis.y, axis.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit_quat(rng: &mut impl Rng) -> Quat {
        loop {
            let q = Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if q.norm() > 1e-3 {
                return quat_normalize(&q);
            }
        }
    }

    fn random_unit_vec(rng: &mut impl Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 1e-3 {
                return v.normalize();
            }
        }
    }

    #[test]
    fn identity_leaves_vectors_alone() {
        let id = Quaternion::identity();
        let v = Vector3::new(1.5, -2.0, 0.25);
        assert_eq!(quat_rotate(&id, &v), v);
        let q = Quaternion::new(0.5, 0.5, -0.5, 0.5);
        assert_eq!(quat_multiply(&id, &q), q);
        assert_eq!(quat_multiply(&q, &id), q);
    }

    #[test]
    fn hamilton_basis_products() {
        let i = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        let j = Quaternion::new(0.0, 0.0, 1.0, 0.0);
        let k = Quaternion::new(0.0, 0.0, 0.0, 1.0);
        assert_eq!(quat_multiply(&i, &j), k);
        assert_eq!(quat_multiply(&j, &k), i);
        assert_eq!(quat_multiply(&k, &i), j);
        assert_eq!(quat_multiply(&i, &i), Quaternion::new(-1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rotation_is_an_isometry_and_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let q = random_unit_quat(&mut rng);
            let v = Vector3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            let r = quat_rotate(&q, &v);
            assert_relative_eq!(r.norm(), v.norm(), epsilon = 1e-12, max_relative = 1e-12);
            let back = quat_rotate(&quat_conjugate(&q), &r);
            assert_relative_eq!(back, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn thrust_axis_alignment_canonical_case() {
        // Body thrust axis (0,0,-1) onto inertial +x: quarter turn whose
        // components follow directly from the construction formula.
        let fb = Vector3::new(0.0, 0.0, -1.0);
        let fi = Vector3::new(1.0, 0.0, 0.0);
        let q = quat_from_two_vectors(&fb, &fi);
        let s = 1.0 / 2.0_f64.sqrt();
        assert_relative_eq!(q.w, s, epsilon = 1e-15);
        assert_relative_eq!(q.i, 0.0, epsilon = 1e-15);
        assert_relative_eq!(q.j, -s, epsilon = 1e-15);
        assert_relative_eq!(q.k, 0.0, epsilon = 1e-15);
        assert_relative_eq!(quat_rotate(&q, &fb), fi, epsilon = 1e-12);
    }

    #[test]
    fn aligning_rotation_is_unit_and_exact_for_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let fb = random_unit_vec(&mut rng);
            let fi = random_unit_vec(&mut rng);
            if (fb.dot(&fi) + 1.0).abs() < 1e-6 {
                continue; // antiparallel handled separately
            }
            let q = quat_from_two_vectors(&fb, &fi);
            assert_relative_eq!(q.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(quat_rotate(&q, &fb), fi, epsilon = 1e-9);
        }
    }

    #[test]
    fn equal_vectors_give_identity() {
        let v = Vector3::new(0.0, 0.0, -1.0);
        let q = quat_from_two_vectors(&v, &v);
        assert_relative_eq!(q.w, 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.imag().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn antiparallel_falls_back_to_half_turn_about_x() {
        let fb = Vector3::new(0.0, 0.0, -1.0);
        let fi = Vector3::new(0.0, 0.0, 1.0);
        let q = quat_from_two_vectors(&fb, &fi);
        assert_relative_eq!(q, Quaternion::new(0.0, 1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(quat_rotate(&q, &fb), fi, epsilon = 1e-12);

        // Even when the thrust axis has an x component, the projected axis
        // still maps fb onto -fb.
        let fb = Vector3::new(1.0, 2.0, -2.0).normalize();
        let q = quat_from_two_vectors(&fb, &(-fb));
        assert_relative_eq!(q.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(quat_rotate(&q, &fb), -fb, epsilon = 1e-12);
    }

    #[test]
    fn error_quaternion_is_sign_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let qd = random_unit_quat(&mut rng);
            let qm = random_unit_quat(&mut rng);
            let e = quat_error(&qd, &qm);
            assert!(e.w >= 0.0);
            assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-12);
        }
        let q = random_unit_quat(&mut rng);
        let e = quat_error(&q, &q);
        assert_relative_eq!(e.w, 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.imag().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kinematics_integrate_to_axis_rotation() {
        // Constant spin about body z: q(t) = (cos(wt/2), 0, 0, sin(wt/2)).
        let omega = Vector3::new(0.0, 0.0, 2.0);
        let mut q = Quaternion::identity();
        let dt = 1e-4;
        let steps = 10_000; // t = 1 s
        for _ in 0..steps {
            // RK4 on the quaternion ODE.
            let k1 = quat_derivative(&q, &omega);
            let k2 = quat_derivative(&(q + k1 * (dt / 2.0)), &omega);
            let k3 = quat_derivative(&(q + k2 * (dt / 2.0)), &omega);
            let k4 = quat_derivative(&(q + k3 * dt), &omega);
            q = quat_normalize(&(q + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)));
        }
        let half: f64 = 1.0; // w t / 2
        assert_relative_eq!(q.w, half.cos(), epsilon = 1e-9);
        assert_relative_eq!(q.k, half.sin(), epsilon = 1e-9);
        assert_relative_eq!(q.i, 0.0, epsilon = 1e-12);
        assert_relative_eq!(q.j, 0.0, epsilon = 1e-12);
    }
}
