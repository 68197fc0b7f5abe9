//! Specular reflection, Snell refraction and the Schlick energy split.
//!
//! All directions are unit vectors. `incident` points along the direction of
//! travel (toward the surface) and `normal` faces the incident side, so
//! `incident · normal < 0` for a ray arriving at the surface.

use super::vec3::Vec3;
use crate::error::{Error, Result};

/// Tolerance on `|v| - 1` for inputs that must be unit length.
pub const UNIT_TOLERANCE: f64 = 1e-6;

fn check_unit(name: &str, v: Vec3) -> Result<()> {
    if !v.is_unit(UNIT_TOLERANCE) {
        return Err(Error::invalid(format!(
            "{name} must be unit length (|v| = {})",
            v.norm()
        )));
    }
    Ok(())
}

pub fn reflect(incident: Vec3, normal: Vec3) -> Result<Vec3> {
    check_unit("incident", incident)?;
    check_unit("normal", normal)?;
    Ok(reflect_unchecked(incident, normal))
}

#[inline]
pub(crate) fn reflect_unchecked(incident: Vec3, normal: Vec3) -> Vec3 {
    incident - normal * (2.0 * incident.dot(normal))
}

/// Refract through an interface with relative index `eta = n_incident / n_transmitted`.
/// Returns `None` under total internal reflection.
pub fn refract(incident: Vec3, normal: Vec3, eta: f64) -> Result<Option<Vec3>> {
    check_unit("incident", incident)?;
    check_unit("normal", normal)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    Ok(refract_unchecked(incident, normal, eta))
}

#[inline]
pub(crate) fn refract_unchecked(incident: Vec3, normal: Vec3, eta: f64) -> Option<Vec3> {
    let cos_i = -incident.dot(normal);
    let sin2_t = eta * eta * (1.0 - cos_i * cos_i).max(0.0);
    if sin2_t > 1.0 {
        return None;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    Some(incident * eta + normal * (eta * cos_i - cos_t))
}

/// Fresnel reflect/transmit weights at a dielectric boundary (Schlick form).
///
/// `normal` is the geometric outward normal of the object; whether the ray
/// is entering (`incident · normal < 0`) or leaving is derived from it, with
/// `ior` the index inside the object and 1 outside.
pub fn fresnel_split(incident: Vec3, normal: Vec3, ior: f64) -> Result<(f64, f64)> {
    check_unit("incident", incident)?;
    check_unit("normal", normal)?;
    if !(ior > 0.0) || !ior.is_finite() {
        return Err(Error::invalid(format!("ior must be positive, got {ior}")));
    }
    Ok(fresnel_split_unchecked(incident, normal, ior))
}

pub(crate) fn fresnel_split_unchecked(incident: Vec3, normal: Vec3, ior: f64) -> (f64, f64) {
    let entering = incident.dot(normal) < 0.0;
    let (n1, n2, facing) = if entering {
        (1.0, ior, normal)
    } else {
        (ior, 1.0, -normal)
    };
    let cos_i = (-incident.dot(facing)).clamp(0.0, 1.0);
    let r0 = ((n1 - n2) / (n1 + n2)).powi(2);
    // Schlick must use the angle on the optically thinner side.
    let cos = if n1 > n2 {
        let eta = n1 / n2;
        let sin2_t = eta * eta * (1.0 - cos_i * cos_i);
        if sin2_t > 1.0 {
            return (1.0, 0.0);
        }
        (1.0 - sin2_t).sqrt()
    } else {
        cos_i
    };
    let r = r0 + (1.0 - r0) * (1.0 - cos).powi(5);
    (r, 1.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn angle_deg(a: Vec3, b: Vec3) -> f64 {
        a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn reflect_examples() {
        let s = 0.5f64.sqrt();
        let r = reflect(Vec3::new(s, -s, 0.0), Vec3::UP).unwrap();
        assert!(r.max_abs_diff(Vec3::new(s, s, 0.0)) < 1e-15);
        let r = reflect(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(r.max_abs_diff(Vec3::new(0.0, 0.0, 1.0)) < 1e-15);
        // 30 degrees off the normal on one side comes out 30 degrees on the other.
        let th = 30f64.to_radians();
        let i = Vec3::new(th.sin(), -th.cos(), 0.0);
        let r = reflect(i, Vec3::UP).unwrap();
        assert_abs_diff_eq!(
            angle_deg(-i, Vec3::UP),
            angle_deg(r, Vec3::UP),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(r.x, th.sin(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_unit() {
        assert!(matches!(
            reflect(Vec3::new(1.0, 1.0, 0.0), Vec3::UP),
            Err(Error::InvalidArgument(_))
        ));
        assert!(refract(Vec3::new(0.0, -2.0, 0.0), Vec3::UP, 1.0).is_err());
        assert!(refract(Vec3::new(0.0, -1.0, 0.0), Vec3::UP, 0.0).is_err());
    }

    #[test]
    fn snell_examples() {
        let straight = refract(Vec3::new(0.0, -1.0, 0.0), Vec3::UP, 1.0 / 1.5)
            .unwrap()
            .unwrap();
        assert!(straight.max_abs_diff(Vec3::new(0.0, -1.0, 0.0)) < 1e-15);

        let th = 45f64.to_radians();
        let t = refract(Vec3::new(th.sin(), -th.cos(), 0.0), Vec3::UP, 1.0 / 1.5)
            .unwrap()
            .unwrap();
        let expected = (th.sin() / 1.5).asin().to_degrees();
        assert_abs_diff_eq!(expected, 28.125_505_5, epsilon = 1e-6);
        assert_abs_diff_eq!(angle_deg(t, -Vec3::UP), expected, epsilon = 1e-9);

        let th = 50f64.to_radians();
        assert!(refract(Vec3::new(th.sin(), -th.cos(), 0.0), Vec3::UP, 1.5)
            .unwrap()
            .is_none());
        // just below the critical angle still transmits
        let crit = (1.0f64 / 1.5).asin();
        let th = crit - 1e-6;
        assert!(refract(Vec3::new(th.sin(), -th.cos(), 0.0), Vec3::UP, 1.5)
            .unwrap()
            .is_some());
    }

    #[test]
    fn schlick_examples() {
        let (r, t) = fresnel_split(Vec3::new(0.0, -1.0, 0.0), Vec3::UP, 1.5).unwrap();
        assert_abs_diff_eq!(r, 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(t, 0.96, epsilon = 1e-15);

        // leaving glass beyond the critical angle
        let th = 50f64.to_radians();
        let inside = Vec3::new(th.sin(), th.cos(), 0.0);
        assert_eq!(fresnel_split(inside, Vec3::UP, 1.5).unwrap(), (1.0, 0.0));

        // approaching grazing incidence the reflected share goes to 1
        let mut last = 0.0;
        for deg in [30.0, 60.0, 85.0, 89.9, 89.999_999] {
            let th = f64::to_radians(deg);
            let (r, _) = fresnel_split(Vec3::new(th.sin(), -th.cos(), 0.0), Vec3::UP, 1.5).unwrap();
            assert_abs_diff_eq!(r, 0.04 + 0.96 * (1.0 - th.cos()).powi(5), epsilon = 1e-12);
            assert!(r > last);
            last = r;
        }
        assert!(last > 0.999_999);
    }

    fn unit() -> impl Strategy<Value = Vec3> {
        (0.0..std::f64::consts::TAU, -1.0f64..1.0).prop_map(|(phi, z)| {
            let r = (1.0 - z * z).sqrt();
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
    }

    proptest! {
        #[test]
        fn reflect_is_an_involution(d in unit(), n in unit()) {
            let back = reflect(reflect(d, n).unwrap(), n).unwrap();
            prop_assert!(back.max_abs_diff(d) < 1e-9);
        }

        #[test]
        fn refraction_inverts(d in unit(), n in unit(), ior in 1.01f64..2.5) {
            let n = if d.dot(n) > 0.0 { -n } else { n };
            prop_assume!(d.dot(n) < -1e-3);
            for eta in [1.0 / ior, ior] {
                // near the critical angle the inverse is ill-conditioned
                if let Some(t) = refract(d, n, eta).unwrap().filter(|t| t.dot(n) < -1e-3) {
                    let back = -refract(-t, -n, 1.0 / eta).unwrap().unwrap();
                    prop_assert!(back.max_abs_diff(d) < 1e-9);
                }
            }
        }

        #[test]
        fn fresnel_weights_sum_to_one(d in unit(), n in unit(), ior in 1.01f64..2.5) {
            let (r, t) = fresnel_split(d, n, ior).unwrap();
            prop_assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&t));
            prop_assert!((r + t - 1.0).abs() < 1e-12);
        }
    }
}
