//! Physical model: the Landau-Zener qubit `H = σx + u (ξ σx + σz)` with a
//! single Lindblad dissipation channel, written on the Bloch ball.
//!
//! Every vector field of the problem is linear in the Bloch vector, so both
//! the drift `f(ρ) = 2 h0 × ρ − Γ P ρ` and the drive `g(ρ) = 2 h1 × ρ` are
//! stored as explicit 3×3 matrices ([`FieldMatrix`]).
//!
//! Dissipation rates are expressed as `Γ`. The Lindblad rate of a single
//! Pauli channel is `γ = Γ / 2`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|ρ|` for states produced by physical evolution.
pub const PURITY_SLACK: f64 = 1e-9;

/// Tolerance on `|c0|² + |c1|²` for pure states.
pub const NORM_TOL: f64 = 1e-12;

/// Real 3-vector of Pauli expectation values, `ρ = 1/2 + 1/2 ρ·σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector(pub Vector3<f64>);

/// PMP conjugate momentum of the Bloch vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct CostateVector(pub Vector3<f64>);

macro_rules! vec3_newtype {
    ($ty:ident) => {
        impl $ty {
            pub const fn new(x: f64, y: f64, z: f64) -> Self {
                Self(Vector3::new(x, y, z))
            }

            pub fn zeros() -> Self {
                Self(Vector3::zeros())
            }

            #[inline]
            pub fn x(&self) -> f64 {
                self.0.x
            }

            #[inline]
            pub fn y(&self) -> f64 {
                self.0.y
            }

            #[inline]
            pub fn z(&self) -> f64 {
                self.0.z
            }

            #[inline]
            pub fn norm(&self) -> f64 {
                self.0.norm()
            }

            #[inline]
            pub fn dot(&self, other: &Self) -> f64 {
                self.0.dot(&other.0)
            }

            pub fn to_array(self) -> [f64; 3] {
                [self.0.x, self.0.y, self.0.z]
            }
        }

        impl From<[f64; 3]> for $ty {
            fn from(a: [f64; 3]) -> Self {
                Self(Vector3::new(a[0], a[1], a[2]))
            }
        }

        impl From<$ty> for [f64; 3] {
            fn from(v: $ty) -> Self {
                v.to_array()
            }
        }

        impl From<Vector3<f64>> for $ty {
            fn from(v: Vector3<f64>) -> Self {
                Self(v)
            }
        }

        impl Add for $ty {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl Sub for $ty {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                Self(self.0 - rhs.0)
            }
        }

        impl Neg for $ty {
            type Output = Self;
            fn neg(self) -> Self {
                Self(-self.0)
            }
        }

        impl Mul<f64> for $ty {
            type Output = Self;
            fn mul(self, rhs: f64) -> Self {
                Self(self.0 * rhs)
            }
        }
    };
}

vec3_newtype!(BlochVector);
vec3_newtype!(CostateVector);

impl BlochVector {
    /// The maximally mixed state.
    pub fn mixed() -> Self {
        Self::zeros()
    }

    pub fn is_physical(&self) -> bool {
        self.0.iter().all(|c| c.is_finite()) && self.norm() <= 1.0 + PURITY_SLACK
    }
}

/// Single-qubit pure state `c0 |0⟩ + c1 |1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState {
    pub c0: Complex64,
    pub c1: Complex64,
}

impl PureState {
    /// Builds a state from amplitudes that must already be normalized.
    pub fn new(c0: Complex64, c1: Complex64) -> Result<Self> {
        let psi = Self { c0, c1 };
        if !psi.is_normalized() {
            return Err(Error::InvalidState(format!(
                "|c0|^2 + |c1|^2 = {} (expected 1)",
                psi.norm_sqr()
            )));
        }
        Ok(psi)
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(c0: Complex64, c1: Complex64) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("zero or non-finite amplitudes".into()));
        }
        Ok(Self {
            c0: c0 / n,
            c1: c1 / n,
        })
    }

    /// `e^{iφ0} (cos θ/2, e^{iφ} sin θ/2)`.
    pub fn from_angles(theta: f64, phi: f64, phi0: f64) -> Self {
        let g = Complex64::from_polar(1.0, phi0);
        Self {
            c0: g * (theta / 2.0).cos(),
            c1: g * Complex64::from_polar((theta / 2.0).sin(), phi),
        }
    }

    /// Inverse of [`PureState::from_angles`]: `(θ, φ, φ0)` with `φ ∈ [0, 2π)`.
    /// Lossless for `θ ∈ (0, π)`; at the poles `φ` (resp. the split between
    /// `φ` and `φ0`) is not defined and is reported as 0.
    pub fn angles(&self) -> (f64, f64, f64) {
        let theta = 2.0 * self.c1.norm().atan2(self.c0.norm());
        let phi0 = if self.c0.norm() > 0.0 {
            self.c0.arg()
        } else {
            self.c1.arg()
        };
        let phi = if self.c0.norm() > 0.0 && self.c1.norm() > 0.0 {
            (self.c1.arg() - phi0).rem_euclid(std::f64::consts::TAU)
        } else {
            0.0
        };
        (theta, phi, phi0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.c0.conj() * other.c0 + self.c1.conj() * other.c1
    }

    /// Ground state of `σx + 2σz`, the default initial state.
    pub fn preparation_initial() -> Self {
        let s5 = 5f64.sqrt();
        let n = (10.0 + 4.0 * s5).sqrt();
        Self {
            c0: Complex64::new(1.0 / n, 0.0),
            c1: Complex64::new((-2.0 - s5) / n, 0.0),
        }
    }

    /// Ground state of `σx − 2σz`, the default target state.
    pub fn preparation_target() -> Self {
        let s5 = 5f64.sqrt();
        let n = (10.0 - 4.0 * s5).sqrt();
        Self {
            c0: Complex64::new(1.0 / n, 0.0),
            c1: Complex64::new((2.0 - s5) / n, 0.0),
        }
    }
}

/// Parses `"c0,c1"` where each amplitude is a complex literal such as
/// `0.6`, `-0.8i` or `0.3+0.4i`. The result must be normalized.
impl FromStr for PureState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!(
                "expected two comma-separated amplitudes, got {s:?}"
            )));
        }
        let parse = |p: &str| {
            p.parse::<Complex64>()
                .map_err(|_| Error::Parse(format!("bad complex amplitude {p:?}")))
        };
        let (c0, c1) = (parse(parts[0])?, parse(parts[1])?);
        if !(c0.re.is_finite() && c0.im.is_finite() && c1.re.is_finite() && c1.im.is_finite()) {
            return Err(Error::Parse("non-finite amplitude".into()));
        }
        PureState::new(c0, c1)
    }
}

/// Lindblad dissipation channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    None,
    /// Identical damping of all three Bloch components.
    Uniform,
    /// `σx` channel: damps `ρy` and `ρz`.
    X,
    /// `σy` channel: damps `ρx` and `ρz`.
    Y,
    /// `σz` channel: damps `ρx` and `ρy`.
    Z,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::None,
        Channel::Uniform,
        Channel::X,
        Channel::Y,
        Channel::Z,
    ];

    /// Diagonal of the damping projector `P`.
    pub fn projector_diagonal(self) -> [f64; 3] {
        match self {
            Channel::None => [0.0, 0.0, 0.0],
            Channel::Uniform => [1.0, 1.0, 1.0],
            Channel::X => [0.0, 1.0, 1.0],
            Channel::Y => [1.0, 0.0, 1.0],
            Channel::Z => [1.0, 1.0, 0.0],
        }
    }

    /// Damping commutes with rotations (none or uniform): the angular motion
    /// is that of the closed system.
    pub fn is_isotropic(self) -> bool {
        matches!(self, Channel::None | Channel::Uniform)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::None => "none",
            Channel::Uniform => "uniform",
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Z => "z",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Channel::None),
            "uniform" => Ok(Channel::Uniform),
            "x" | "sigma_x" | "sx" => Ok(Channel::X),
            "y" | "sigma_y" | "sy" => Ok(Channel::Y),
            "z" | "sigma_z" | "sz" => Ok(Channel::Z),
            other => Err(Error::Parse(format!("unknown channel {other:?}"))),
        }
    }
}

fn default_u_bound() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystemSpec {
    xi: f64,
    channel: Channel,
    #[serde(default)]
    gamma: f64,
    #[serde(default = "default_u_bound")]
    u_bound: f64,
}

/// Hamiltonian parameter, dissipation channel and control bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemSpec")]
pub struct SystemSpec {
    pub xi: f64,
    pub channel: Channel,
    pub gamma: f64,
    pub u_bound: f64,
}

impl TryFrom<RawSystemSpec> for SystemSpec {
    type Error = Error;

    fn try_from(raw: RawSystemSpec) -> Result<Self> {
        SystemSpec::new(raw.xi, raw.channel, raw.gamma, raw.u_bound)
    }
}

impl SystemSpec {
    pub fn new(xi: f64, channel: Channel, gamma: f64, u_bound: f64) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::InvalidSpec(format!("xi must be finite, got {xi}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(u_bound.is_finite() && u_bound > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "u_bound must be > 0, got {u_bound}"
            )));
        }
        Ok(Self {
            xi,
            channel,
            gamma,
            u_bound,
        })
    }

    /// Closed system with unit control bound.
    pub fn closed(xi: f64) -> Self {
        Self {
            xi,
            channel: Channel::None,
            gamma: 0.0,
            u_bound: 1.0,
        }
    }

    pub fn dissipative(xi: f64, channel: Channel, gamma: f64) -> Result<Self> {
        Self::new(xi, channel, gamma, 1.0)
    }

    /// True when the dissipator vanishes identically.
    pub fn is_closed(&self) -> bool {
        self.channel == Channel::None || self.gamma == 0.0
    }

    /// `h1 = ξ x̂ + ẑ`
    pub fn drive_axis(&self) -> Vector3<f64> {
        Vector3::new(self.xi, 0.0, 1.0)
    }

    /// The damping matrix `Γ P`.
    pub fn damping(&self) -> Matrix3<f64> {
        if self.channel == Channel::None {
            return Matrix3::zeros();
        }
        let [a, b, c] = self.channel.projector_diagonal();
        Matrix3::from_diagonal(&Vector3::new(a, b, c)) * self.gamma
    }
}

/// Linear vector field `ρ ↦ A ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldMatrix(pub Matrix3<f64>);

impl FieldMatrix {
    #[inline]
    pub fn apply(&self, rho: &BlochVector) -> Vector3<f64> {
        self.0 * rho.0
    }

    pub fn zeros() -> Self {
        Self(Matrix3::zeros())
    }
}

impl Add for FieldMatrix {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for FieldMatrix {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul<f64> for FieldMatrix {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self(self.0 * rhs)
    }
}

/// Matrix of `v ↦ a × v`.
#[inline]
pub fn cross_matrix(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// `h = h0 + u h1 = (1 + uξ, 0, u)`.
pub fn hamiltonian_vector(u: f64, spec: &SystemSpec) -> Vector3<f64> {
    Vector3::new(1.0 + u * spec.xi, 0.0, u)
}

/// `f(ρ) = 2 x̂ × ρ − Γ P ρ`; the uniform channel damps as `−Γ ρ`.
pub fn drift_field(spec: &SystemSpec) -> FieldMatrix {
    FieldMatrix(2.0 * cross_matrix(&Vector3::x()) - spec.damping())
}

/// `g(ρ) = 2 (ξ x̂ + ẑ) × ρ`.
pub fn drive_field(spec: &SystemSpec) -> FieldMatrix {
    FieldMatrix(2.0 * cross_matrix(&spec.drive_axis()))
}

/// Generator of `dρ/dt = (F + u G) ρ` for a fixed control value.
#[inline]
pub fn generator(spec: &SystemSpec, u: f64) -> Matrix3<f64> {
    drift_field(spec).0 + drive_field(spec).0 * u
}

/// Pauli expectation values of a normalized pure state.
pub fn bloch_from_pure(psi: &PureState) -> Result<BlochVector> {
    if !psi.is_normalized() {
        return Err(Error::InvalidState(format!(
            "state not normalized: |c0|^2 + |c1|^2 = {}",
            psi.norm_sqr()
        )));
    }
    let cross = psi.c0.conj() * psi.c1;
    Ok(BlochVector::new(
        2.0 * cross.re,
        2.0 * cross.im,
        psi.c0.norm_sqr() - psi.c1.norm_sqr(),
    ))
}

/// `(−1/√5, 0, −2/√5)`, the Bloch vector of the default initial state.
pub fn preparation_initial() -> BlochVector {
    let s5 = 5f64.sqrt();
    BlochVector::new(-1.0 / s5, 0.0, -2.0 / s5)
}

/// `(−1/√5, 0, 2/√5)`, the Bloch vector of the default target state.
pub fn preparation_target() -> BlochVector {
    let s5 = 5f64.sqrt();
    BlochVector::new(-1.0 / s5, 0.0, 2.0 / s5)
}
