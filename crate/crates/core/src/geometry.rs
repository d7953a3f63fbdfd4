//! Geometric-control machinery: Pauli vector fields on the `(θ, φ)` chart,
//! Lie brackets of the linear Bloch fields and the singular-control
//! feedback laws.
//!
//! Bracket convention: for linear fields `f = Aρ`, `g = Bρ` the bracket
//! `[f, g]^i = ⟨f, ∇g^i⟩ − ⟨g, ∇f^i⟩` is the linear field `(BA − AB)ρ`.
//! With this sign `[2x̂×·, 2ẑ×·] = 2 V_y`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{drift_field, drive_field, BlochVector, FieldMatrix, PureState, SystemSpec};

/// Pole guard for the `(θ, φ)` chart.
pub const POLE_GUARD: f64 = 1e-6;

/// Largest acceptable condition number of the bracket expansion basis.
pub const BASIS_CONDITION_LIMIT: f64 = 1e8;

/// `|g × [f,g]|` below this fraction of `|g|·|[f,g]|` is degenerate.
pub const COFACTOR_TOL: f64 = 1e-8;

/// Relative size below which the singular-control denominator counts as zero.
const DENOMINATOR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCoord {
    pub theta: f64,
    pub phi: f64,
}

impl SphereCoord {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_bloch(rho: &BlochVector) -> Self {
        let r = rho.norm();
        let theta = if r > 0.0 { (rho.z() / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
        let phi = rho.y().atan2(rho.x()).rem_euclid(TAU);
        Self { theta, phi }
    }

    /// Unit Bloch vector of this point.
    pub fn to_bloch(&self) -> BlochVector {
        BlochVector::new(
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        )
    }

    fn check_pole(&self) -> Result<()> {
        if self.theta > POLE_GUARD && self.theta < PI - POLE_GUARD {
            Ok(())
        } else {
            Err(Error::PoleProximity { theta: self.theta })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Tangent vector `(dθ/dt, dφ/dt)` generated by the Hamiltonian `σ_axis`.
pub fn pauli_field(axis: PauliAxis, p: SphereCoord) -> Result<[f64; 2]> {
    p.check_pole()?;
    let (s, c) = p.phi.sin_cos();
    let cot = 1.0 / p.theta.tan();
    Ok(match axis {
        PauliAxis::Z => [0.0, 2.0],
        PauliAxis::X => [-2.0 * s, -2.0 * c * cot],
        PauliAxis::Y => [2.0 * c, -2.0 * s * cot],
    })
}

/// Coefficient `α` of the closed-system expansion `[f, g] = α f + β g`,
/// `α = −(2 / sin φ)(cos φ − ξ cot θ)`. Vanishes on the singular arc
/// `ξ = tan θ cos φ`.
pub fn singular_arc_alpha(p: SphereCoord, xi: f64) -> Result<f64> {
    p.check_pole()?;
    let s = p.phi.sin();
    if s.abs() <= 1e-9 {
        return Err(Error::ArcUndefined { phi: p.phi });
    }
    Ok(-(2.0 / s) * (p.phi.cos() - xi / p.theta.tan()))
}

/// Constant singular control of the closed problem, `−ξ / (1 + ξ²)`.
pub fn singular_control_closed(xi: f64) -> f64 {
    -xi / (1.0 + xi * xi)
}

/// Matrix of `[f, g]` for `f = Aρ`, `g = Bρ`: `BA − AB`.
pub fn lie_bracket(a: &FieldMatrix, b: &FieldMatrix) -> FieldMatrix {
    FieldMatrix(b.0 * a.0 - a.0 * b.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularEvaluation {
    pub u_raw: f64,
    pub u_applied: f64,
    pub admissible: bool,
    pub basis_condition: f64,
}

/// How the singular control is extracted from the brackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularRoute {
    /// Expand `[f,[f,g]]` and `[g,[f,g]]` in the basis `{f, g, [f,g]}` and
    /// take `u = −α₁/β₁`.
    Basis,
    /// Same ratio through Cramer's rule: with `n = g × [f,g]` (the costate
    /// direction fixed by `Φ = Φ̇ = 0`), `u = −⟨n,[f,[f,g]]⟩ / ⟨n,[g,[f,g]]⟩`.
    /// Unlike [`SingularRoute::Basis`] it stays defined where `f` falls into
    /// the span of `g` and `[f,g]`, which is where singular arcs run when
    /// `H_c = 0`.
    Cofactor,
    /// Closed or uniformly damped systems: all brackets are tangent to the
    /// sphere and `{f, g, [f,g]}` is rank-deficient on the arc. The costate
    /// direction is fixed in the tangent plane by `Φ = 0`, `λ ∝ ρ × g`, and
    /// `Φ̈ = 0` gives `u = −⟨λ,[f,[f,g]]⟩ / ⟨λ,[g,[f,g]]⟩`.
    Tangent,
}

/// Precomputed brackets of a [`SystemSpec`]; evaluates the singular
/// feedback `u_sing(ρ)` at any Bloch vector.
#[derive(Clone, Debug)]
pub struct SingularLaw {
    f: Matrix3<f64>,
    g: Matrix3<f64>,
    fg: Matrix3<f64>,
    ffg: Matrix3<f64>,
    gfg: Matrix3<f64>,
    route: SingularRoute,
    u_bound: f64,
}

impl SingularLaw {
    pub fn new(spec: &SystemSpec) -> Self {
        let f = drift_field(spec);
        let g = drive_field(spec);
        let fg = lie_bracket(&f, &g);
        let ffg = lie_bracket(&f, &fg);
        let gfg = lie_bracket(&g, &fg);
        let route = if spec.is_closed() || spec.channel.is_isotropic() {
            SingularRoute::Tangent
        } else {
            SingularRoute::Cofactor
        };
        Self {
            f: f.0,
            g: g.0,
            fg: fg.0,
            ffg: ffg.0,
            gfg: gfg.0,
            route,
            u_bound: spec.u_bound,
        }
    }

    /// Forces a particular route (diagnostics and tests).
    pub fn with_route(mut self, route: SingularRoute) -> Self {
        self.route = route;
        self
    }

    pub fn route(&self) -> SingularRoute {
        self.route
    }

    #[inline]
    pub fn evaluate(&self, rho: &Vector3<f64>) -> Result<SingularEvaluation> {
        let f = self.f * rho;
        let g = self.g * rho;
        let d_f = self.ffg * rho;
        let d_g = self.gfg * rho;

        let (num, den, condition) = match self.route {
            SingularRoute::Basis => {
                let c = self.fg * rho;
                let m = Matrix3::from_columns(&[f, g, c]);
                let condition = condition_1(&m);
                if !(condition < BASIS_CONDITION_LIMIT) {
                    return Err(self.degenerate(rho, condition));
                }
                let lu = m.lu();
                let (alpha, beta) = match (lu.solve(&d_f), lu.solve(&d_g)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(self.degenerate(rho, f64::INFINITY)),
                };
                if beta[0].abs() <= DENOMINATOR_TOL * (1.0 + alpha[0].abs()) {
                    return Err(Error::SingularUndefined {
                        rho: [rho.x, rho.y, rho.z],
                        denominator: beta[0],
                    });
                }
                (alpha[0], beta[0], condition)
            }
            SingularRoute::Cofactor => {
                let c = self.fg * rho;
                let n = g.cross(&c);
                let scale = g.norm() * c.norm();
                if !(n.norm() > COFACTOR_TOL * scale) {
                    let ratio = if n.norm() > 0.0 { scale / n.norm() } else { f64::INFINITY };
                    return Err(self.degenerate(rho, ratio));
                }
                let num = n.dot(&d_f);
                let den = n.dot(&d_g);
                if den.abs() <= DENOMINATOR_TOL * n.norm() * d_g.norm() || den == 0.0 {
                    return Err(Error::SingularUndefined {
                        rho: [rho.x, rho.y, rho.z],
                        denominator: den,
                    });
                }
                (num, den, condition_1(&Matrix3::from_columns(&[f, g, c])))
            }
            SingularRoute::Tangent => {
                let m = Matrix3::from_columns(&[*rho, f, g]);
                let condition = condition_1(&m);
                if !(condition < BASIS_CONDITION_LIMIT) {
                    return Err(self.degenerate(rho, condition));
                }
                let lambda = rho.cross(&g);
                let num = lambda.dot(&d_f);
                let den = lambda.dot(&d_g);
                if den.abs() <= DENOMINATOR_TOL * lambda.norm() * d_g.norm() || den == 0.0 {
                    return Err(Error::SingularUndefined {
                        rho: [rho.x, rho.y, rho.z],
                        denominator: den,
                    });
                }
                (num, den, condition)
            }
        };

        let u_raw = -num / den;
        Ok(SingularEvaluation {
            u_raw,
            u_applied: u_raw.clamp(-self.u_bound, self.u_bound),
            admissible: u_raw.abs() <= self.u_bound,
            basis_condition: condition,
        })
    }

    fn degenerate(&self, rho: &Vector3<f64>, condition: f64) -> Error {
        Error::DegenerateBasis {
            rho: [rho.x, rho.y, rho.z],
            condition,
        }
    }
}

/// 1-norm condition number; infinite for singular matrices.
fn condition_1(m: &Matrix3<f64>) -> f64 {
    let norm1 = |a: &Matrix3<f64>| {
        a.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match m.try_inverse() {
        Some(inv) => {
            let c = norm1(m) * norm1(&inv);
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Singular control at `ρ` from the double brackets of the system's fields:
/// the basis expansion for damped-axis channels, the tangent-plane form for
/// closed and uniformly damped systems (where the basis is always
/// rank-deficient).
pub fn singular_control_open(rho: &BlochVector, spec: &SystemSpec) -> Result<SingularEvaluation> {
    let law = SingularLaw::new(spec);
    match law.route() {
        SingularRoute::Tangent => law.evaluate(&rho.0),
        _ => law.with_route(SingularRoute::Basis).evaluate(&rho.0),
    }
}

/// Minimum time `arccos(|i₀t₀| + |i₁t₁|)` between two pure states for
/// `ξ = 0` and unbounded control. Inputs are normalized internally.
pub fn quantum_speed_limit(psi_i: &PureState, psi_t: &PureState) -> f64 {
    let ni = psi_i.norm_sqr().sqrt();
    let nt = psi_t.norm_sqr().sqrt();
    let s = (psi_i.c0.norm() * psi_t.c0.norm() + psi_i.c1.norm() * psi_t.c1.norm()) / (ni * nt);
    s.clamp(-1.0, 1.0).acos()
}

/// Points `(θ, φ)` of the closed-system singular arc `ξ = tan θ cos φ`,
/// sampled on `n` interior θ values. The two branches `φ` and `2π − φ` are
/// traversed so the output is a single closed curve.
pub fn singular_arc_curve(xi: f64, n: usize) -> Vec<SphereCoord> {
    let thetas: Vec<f64> = (1..=n).map(|k| PI * k as f64 / (n + 1) as f64).collect();
    let principal: Vec<SphereCoord> = thetas
        .iter()
        .filter_map(|&theta| {
            let c = xi / theta.tan();
            (c.abs() <= 1.0).then(|| SphereCoord::new(theta, c.acos()))
        })
        .collect();
    let mirrored = principal
        .iter()
        .rev()
        .map(|p| SphereCoord::new(p.theta, (TAU - p.phi).rem_euclid(TAU)));
    principal.iter().copied().chain(mirrored).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cross_matrix, Channel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Finite-difference flow commutator `φ⁻ᵍ∘φ⁻ᶠ∘φᵍ∘φᶠ`, divided by `s²`.
    fn flow_commutator(a: &Matrix3<f64>, b: &Matrix3<f64>, s: f64) -> Matrix3<f64> {
        let flow = |m: &Matrix3<f64>, t: f64| (m * t).exp();
        let p = flow(b, -s) * flow(a, -s) * flow(b, s) * flow(a, s);
        (p - Matrix3::identity()) / (s * s)
    }

    fn arc_point(xi: f64, theta: f64) -> SphereCoord {
        SphereCoord::new(theta, (xi / theta.tan()).acos())
    }

    #[test]
    fn pauli_field_examples() {
        let p = SphereCoord::new(1.1, 2.3);
        assert_eq!(pauli_field(PauliAxis::Z, p).unwrap(), [0.0, 2.0]);
        let v = pauli_field(PauliAxis::X, SphereCoord::new(PI / 2.0, PI / 2.0)).unwrap();
        assert!((v[0] + 2.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        let v = pauli_field(PauliAxis::Y, SphereCoord::new(PI / 2.0, 0.0)).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        assert!(matches!(
            pauli_field(PauliAxis::X, SphereCoord::new(1e-8, 0.3)),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn pauli_fields_match_bloch_rotations() {
        // dρ/dt = 2 n × ρ pushed through the chart must agree with V_n.
        let p = SphereCoord::new(0.9, 1.3);
        let rho = p.to_bloch().0;
        for (axis, n) in [
            (PauliAxis::X, Vector3::x()),
            (PauliAxis::Y, Vector3::y()),
            (PauliAxis::Z, Vector3::z()),
        ] {
            let [dth, dph] = pauli_field(axis, p).unwrap();
            let rdot = 2.0 * n.cross(&rho);
            let (st, ct) = p.theta.sin_cos();
            let (sp, cp) = p.phi.sin_cos();
            let expected = Vector3::new(
                ct * cp * dth - st * sp * dph,
                ct * sp * dth + st * cp * dph,
                -st * dth,
            );
            assert!((rdot - expected).amax() < 1e-12, "{axis:?}");
        }
    }

    #[test]
    fn alpha_examples() {
        for theta in [0.3, 1.0, 2.0] {
            let a = singular_arc_alpha(SphereCoord::new(theta, PI / 2.0), 0.0).unwrap();
            assert!(a.abs() < 1e-15);
        }
        let p = arc_point(0.2, 0.35 * PI);
        assert!(singular_arc_alpha(p, 0.2).unwrap().abs() < 1e-12);
        let a = singular_arc_alpha(SphereCoord::new(PI / 2.0, PI / 4.0), 0.0).unwrap();
        assert!((a + 2.0).abs() < 1e-14);
        assert!(matches!(
            singular_arc_alpha(SphereCoord::new(1.0, 0.0), 0.2),
            Err(Error::ArcUndefined { .. })
        ));
    }

    #[test]
    fn closed_singular_control_values() {
        assert_eq!(singular_control_closed(0.0), 0.0);
        assert!((singular_control_closed(0.2) + 0.192_307_692_307_692_3).abs() < 1e-15);
        assert!((singular_control_closed(0.8) + 0.487_804_878_048_780_5).abs() < 1e-15);
    }

    #[test]
    fn bracket_reproduces_two_vy() {
        let spec = SystemSpec::closed(0.0);
        let fg = lie_bracket(&drift_field(&spec), &drive_field(&spec));
        // V_y is the field of the Hamiltonian σy: ρ ↦ 2 ŷ × ρ
        let vy = 2.0 * cross_matrix(&Vector3::y());
        assert!((fg.0 - 2.0 * vy).amax() < 1e-14);
        let fd = flow_commutator(&drift_field(&spec).0, &drive_field(&spec).0, 1e-4);
        assert!((fd - fg.0).amax() < 1e-3);
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear() {
        let spec = SystemSpec::dissipative(0.3, Channel::X, 0.2).unwrap();
        let f = drift_field(&spec);
        assert_eq!(lie_bracket(&f, &f).0, Matrix3::zeros());
    }

    #[test]
    fn open_law_agrees_with_closed_formula_on_arc() {
        for xi in [0.0, 0.2, 0.5, 0.8] {
            let spec = SystemSpec::closed(xi);
            for theta in [0.25 * PI, 0.4 * PI, 0.6 * PI] {
                let rho = arc_point(xi, theta).to_bloch();
                let ev = singular_control_open(&rho, &spec).unwrap();
                assert!(
                    (ev.u_raw - singular_control_closed(xi)).abs() < 1e-6,
                    "xi={xi} theta={theta} u={}",
                    ev.u_raw
                );
                assert!(ev.admissible);
            }
        }
    }

    #[test]
    fn uniform_channel_uses_closed_law_on_scaled_sphere() {
        let spec = SystemSpec::dissipative(0.2, Channel::Uniform, 0.1).unwrap();
        let rho = arc_point(0.2, 0.4 * PI).to_bloch() * 0.7;
        let ev = singular_control_open(&rho, &spec).unwrap();
        assert!((ev.u_raw - singular_control_closed(0.2)).abs() < 1e-10);
    }

    #[test]
    fn basis_route_is_rank_deficient_without_dissipation() {
        let spec = SystemSpec::closed(0.2);
        let law = SingularLaw::new(&spec).with_route(SingularRoute::Basis);
        let rho = arc_point(0.2, 0.4 * PI).to_bloch();
        assert!(matches!(law.evaluate(&rho.0), Err(Error::DegenerateBasis { .. })));
    }

    #[test]
    fn origin_is_degenerate() {
        for ch in Channel::ALL {
            let spec = SystemSpec::dissipative(0.2, ch, 0.1).unwrap();
            assert!(matches!(
                singular_control_open(&BlochVector::zeros(), &spec),
                Err(Error::DegenerateBasis { .. })
            ));
        }
    }

    #[test]
    fn sigma_x_basis_route_is_well_conditioned_off_null_space() {
        let spec = SystemSpec::dissipative(0.2, Channel::X, 0.1).unwrap();
        let ev = singular_control_open(&BlochVector::new(0.5, 0.3, -0.4), &spec).unwrap();
        assert!(ev.basis_condition < 1e4);
        assert_eq!(ev.u_applied, ev.u_raw.clamp(-1.0, 1.0));
    }

    #[test]
    fn cofactor_route_matches_basis_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ch in [Channel::X, Channel::Y, Channel::Z] {
            let spec = SystemSpec::dissipative(rng.random_range(-1.0..1.0), ch, 0.2).unwrap();
            let law = SingularLaw::new(&spec);
            assert_eq!(law.route(), SingularRoute::Cofactor);
            let basis = law.clone().with_route(SingularRoute::Basis);
            for _ in 0..50 {
                let r = Vector3::new(
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.6..0.6),
                );
                if let (Ok(a), Ok(b)) = (law.evaluate(&r), basis.evaluate(&r)) {
                    if b.basis_condition < 1e5 {
                        assert!((a.u_raw - b.u_raw).abs() < 1e-8 * (1.0 + b.u_raw.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn cofactor_route_is_continuous_where_basis_degenerates() {
        // locate a zero of det[f, g, [f,g]] along a segment by bisection
        let spec = SystemSpec::dissipative(0.8, Channel::X, 0.1).unwrap();
        let law = SingularLaw::new(&spec);
        let (f, g) = (drift_field(&spec).0, drive_field(&spec).0);
        let fg = lie_bracket(&drift_field(&spec), &drive_field(&spec)).0;
        let det = |r: &Vector3<f64>| Matrix3::from_columns(&[f * r, g * r, fg * r]).determinant();
        let (mut a, mut b) = (Vector3::new(-0.6, 0.6, 0.3), Vector3::new(0.6, 0.6, 0.3));
        let mut found = false;
        for k in 1..200 {
            let t = k as f64 / 200.0;
            let p = a + (b - a) * t;
            if det(&p).signum() != det(&a).signum() {
                b = p;
                found = true;
                break;
            }
        }
        assert!(found);
        for _ in 0..60 {
            let m = (a + b) / 2.0;
            if det(&m).signum() == det(&a).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        let basis = law.clone().with_route(SingularRoute::Basis);
        assert!(basis.evaluate(&a).is_err() || basis.evaluate(&a).unwrap().basis_condition > 1e8);
        let ua = law.evaluate(&a).unwrap().u_raw;
        let ub = law.evaluate(&b).unwrap().u_raw;
        assert!(ua.is_finite() && (ua - ub).abs() < 1e-9);
    }

    #[test]
    fn speed_limit_values() {
        let pi = PureState::preparation_initial();
        let pf = PureState::preparation_target();
        assert_eq!(quantum_speed_limit(&pi, &pi), 0.0);
        let t = quantum_speed_limit(&pi, &pf);
        assert!((t - (1.0 / 5f64.sqrt()).acos()).abs() < 1e-12);
        assert!((t / PI - 0.35242).abs() < 1e-5);
        let up = PureState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let down = PureState::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        assert!((quantum_speed_limit(&up, &down) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn arc_curve_lies_on_arc() {
        let pts = singular_arc_curve(0.2, 200);
        assert!(!pts.is_empty());
        for p in pts {
            assert!((p.theta.tan() * p.phi.cos() - 0.2).abs() < 1e-9);
        }
    }

    fn random_matrix(v: &[f64]) -> Matrix3<f64> {
        Matrix3::from_row_slice(&v[..9])
    }

    proptest! {
        #[test]
        fn bracket_matches_flow_commutator(
            a in proptest::collection::vec(-1.0..1.0f64, 9),
            b in proptest::collection::vec(-1.0..1.0f64, 9),
        ) {
            let (a, b) = (random_matrix(&a), random_matrix(&b));
            let exact = lie_bracket(&FieldMatrix(a), &FieldMatrix(b)).0;
            let s = 1e-3;
            // second-order symmetric estimate removes the O(s) term
            let fd = (flow_commutator(&a, &b, s) + flow_commutator(&a, &b, -s)) / 2.0;
            prop_assert!((fd - exact).amax() < 1e-4);
        }

        #[test]
        fn bracket_bilinear(
            a in proptest::collection::vec(-1.0..1.0f64, 9),
            b in proptest::collection::vec(-1.0..1.0f64, 9),
            c in proptest::collection::vec(-1.0..1.0f64, 9),
        ) {
            let (a, b, c) = (FieldMatrix(random_matrix(&a)), FieldMatrix(random_matrix(&b)), FieldMatrix(random_matrix(&c)));
            let lhs = lie_bracket(&a, &(b + c)).0;
            let rhs = lie_bracket(&a, &b).0 + lie_bracket(&a, &c).0;
            prop_assert!((lhs - rhs).amax() < 1e-13);
            prop_assert!((lie_bracket(&a, &b).0 + lie_bracket(&b, &a).0).amax() < 1e-15);
        }

        #[test]
        fn speed_limit_symmetric_and_phase_invariant(
            t1 in 0.0..PI, p1 in 0.0..TAU, t2 in 0.0..PI, p2 in 0.0..TAU,
            g1 in -PI..PI, g2 in -PI..PI,
        ) {
            let a = PureState::from_angles(t1, p1, 0.0);
            let b = PureState::from_angles(t2, p2, 0.0);
            let ab = quantum_speed_limit(&a, &b);
            prop_assert!((ab - quantum_speed_limit(&b, &a)).abs() < 1e-12);
            let a2 = PureState::from_angles(t1, p1, g1);
            let b2 = PureState::from_angles(t2, p2, g2);
            prop_assert!((ab - quantum_speed_limit(&a2, &b2)).abs() < 1e-7);
        }
    }
}
